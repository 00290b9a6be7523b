"""Scratch calibration: scan synthetic-pair designs for the directional transfer test."""
import sys
import time

import numpy as np

from xferqa import synth_corpus, TrainConfig, train_base, train_init, train_mult, train_iss_mult
from xferqa.corpus import Corpus
from xferqa.embeddings import EmbeddingTable
from xferqa.model import ModelDims


def sparse_table(vocab, dim, seed, k=2):
    rng = np.random.default_rng(seed)
    vecs = {}
    for i in range(vocab):
        v = np.zeros(dim)
        idx = rng.choice(dim, size=k, replace=False)
        v[idx] = rng.choice([-1.0, 1.0], size=k) * 0.7
        v += rng.normal(0, 0.05, dim)
        vecs[f"w{i:04d}"] = v
    return EmbeddingTable.from_vectors(vecs, seed=seed)


def resplit(corpus, n_train, n_dev, n_test, name=None):
    groups = [g for s in ("train", "dev", "test") for g in corpus.splits.get(s, ())]
    assert len(groups) >= n_train + n_dev + n_test
    return Corpus(
        name=name or corpus.name,
        splits={
            "train": tuple(groups[:n_train]),
            "dev": tuple(groups[n_train : n_train + n_dev]),
            "test": tuple(groups[n_train + n_dev : n_train + n_dev + n_test]),
        },
    )


def best_dev(m):
    return m.dev_history[m.best_epoch - 1]


def run_config(n_tr, n_dev, cands, vocab, prate, epochs, lr, batch=1, table_seed=99, n_seeds=5):
    dims = ModelDims(embed_dim=8, n_filters_1=8, max_len=12)
    tab = sparse_table(vocab, 8, table_seed)
    wins = {"init": 0, "mult": 0, "iss": 0}
    t0 = time.perf_counter()
    rows = []
    for seed in range(n_seeds):
        n_total = n_tr + n_dev + max(n_dev // 2, 4)
        target = resplit(
            synth_corpus(seed=100 + seed, n_questions=n_total, candidates_per_q=cands,
                         vocab_size=vocab, positive_rate=prate, name="tgt"),
            n_tr, n_dev, max(n_dev // 2, 4),
        )
        source = synth_corpus(seed=200 + seed, n_questions=5 * n_tr, candidates_per_q=cands,
                              vocab_size=vocab, positive_rate=prate, name="src")
        cfg = TrainConfig(epochs=epochs, learning_rate=lr, seed=seed, lambda_=0.9, batch_size=batch)
        b = best_dev(train_base(target, tab, dims, cfg))
        i = best_dev(train_init(source, target, tab, dims, cfg, cfg))
        m = best_dev(train_mult(source, target, tab, dims, cfg))
        s = best_dev(train_iss_mult(source, target, tab, dims, cfg, keep_fraction=0.8))
        rows.append((b, i, m, s))
        wins["init"] += i > b
        wins["mult"] += m > b
        wins["iss"] += s > b
    dt = time.perf_counter() - t0
    print(f"ntr={n_tr} ndev={n_dev} c={cands} V={vocab} p={prate} ep={epochs} lr={lr} b={batch} tab={table_seed}: "
          f"wins={wins} ({dt:.0f}s)")
    for r in rows:
        print("   base %.3f init %.3f mult %.3f iss.8 %.3f" % r)
    sys.stdout.flush()
    return wins


if __name__ == "__main__":
    configs = [
        # n_tr, n_dev, cands, vocab, prate, epochs, lr, batch
        (16, 150, 5, 100, 1.0, 40, 0.05, 1),
    ]
    for cfg in configs:
        run_config(*cfg)
