"""QA corpus loading, validation, synthesis, and statistics.

A corpus is a set of questions, each with an ordered list of candidate
answers labelled 0/1 (1 = correct), partitioned into train/dev/test
splits. On disk a corpus is a UTF-8 TSV with one candidate per line:

    question_id<TAB>question_text<TAB>answer_text<TAB>label<TAB>split

Lines starting with ``#`` are comments. Text is lowercased, stripped of
punctuation and split on whitespace at load time; candidate order is file
order and is never shuffled here (shuffling belongs to the trainer).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .validation import check_choice, check_positive, check_unit_interval

SPLITS = ("train", "dev", "test")

_PUNCTUATION = ".,;:!?\"'()[]"
_STRIP_TABLE = str.maketrans("", "", _PUNCTUATION)

# Token-count ranges used by the synthetic generator. Fixed lengths keep
# sentence-vector norms comparable, which makes the synthetic task cleanly
# separable at desk scale.
_SYNTH_QUESTION_LEN = (4, 4)
_SYNTH_ANSWER_LEN = (4, 4)


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, drop punctuation characters, split on whitespace."""
    return tuple(text.lower().translate(_STRIP_TABLE).split())


@dataclass(frozen=True)
class QAInstance:
    """One labelled question-candidate pair."""

    question_id: str
    question_tokens: tuple[str, ...]
    answer_tokens: tuple[str, ...]
    label: int


@dataclass(frozen=True)
class QuestionGroup:
    """All candidates of one question, in file order."""

    question_id: str
    candidates: tuple[QAInstance, ...]

    def has_positive(self) -> bool:
        return any(c.label == 1 for c in self.candidates)


@dataclass(frozen=True)
class Corpus:
    """A named corpus with train/dev/test splits, immutable after load."""

    name: str
    splits: dict[str, tuple[QuestionGroup, ...]] = field(default_factory=dict)
    role: str = "target"

    def groups(self, split: str) -> tuple[QuestionGroup, ...]:
        """Groups of one split; raises DataError when the split is missing or empty."""
        groups = self.splits.get(split, ())
        if not groups:
            raise DataError(f"corpus '{self.name}' has no '{split}' split")
        return groups

    def instances(self, split: str) -> tuple[QAInstance, ...]:
        """All instances of one split, flattened in group order."""
        return tuple(c for g in self.groups(split) for c in g.candidates)


def load_corpus(path, name: str) -> Corpus:
    """Parse a TSV corpus file into a Corpus.

    Raises DataError on malformed lines (naming the line number), empty
    question or answer text after tokenization (naming the question id),
    unknown split tags, question ids appearing in more than one split, or
    inconsistent question text within a question id.
    """
    path = Path(path)
    per_split: dict[str, dict[str, list[QAInstance]]] = {s: {} for s in SPLITS}
    qid_split: dict[str, str] = {}
    qid_question: dict[str, tuple[str, ...]] = {}

    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line.startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 tab-separated columns, got {len(columns)}")
        qid, question_text, answer_text, label_text, split = columns
        if split not in SPLITS:
            raise DataError(f"{path}:{lineno}: unknown split tag {split!r}")
        if label_text not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label_text!r}")
        question_tokens = tokenize(question_text)
        answer_tokens = tokenize(answer_text)
        if not question_tokens:
            raise DataError(f"{path}:{lineno}: question of {qid} is empty after tokenization")
        if not answer_tokens:
            raise DataError(f"{path}:{lineno}: answer of {qid} is empty after tokenization")
        seen_split = qid_split.get(qid)
        if seen_split is None:
            qid_split[qid] = split
            qid_question[qid] = question_tokens
        else:
            if seen_split != split:
                raise DataError(
                    f"question {qid} appears in both '{seen_split}' and '{split}' splits"
                )
            if qid_question[qid] != question_tokens:
                raise DataError(f"{path}:{lineno}: question text of {qid} is inconsistent")
        per_split[split].setdefault(qid, []).append(
            QAInstance(qid, question_tokens, answer_tokens, int(label_text))
        )

    splits = {
        split: tuple(QuestionGroup(qid, tuple(cands)) for qid, cands in groups.items())
        for split, groups in per_split.items()
        if groups
    }
    return Corpus(name=name, splits=splits)


def save_corpus(corpus: Corpus, path) -> None:
    """Write a corpus back to TSV; load_corpus(save_corpus(c)) is identity."""
    lines = []
    for split in SPLITS:
        for group in corpus.splits.get(split, ()):
            for cand in group.candidates:
                lines.append(
                    "\t".join(
                        (
                            cand.question_id,
                            " ".join(cand.question_tokens),
                            " ".join(cand.answer_tokens),
                            str(cand.label),
                            split,
                        )
                    )
                )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def hit_rate(corpus: Corpus, split: str) -> float:
    """Fraction of groups in the split that contain at least one correct answer."""
    groups = corpus.groups(split)
    return sum(1 for g in groups if g.has_positive()) / len(groups)


def synth_corpus(
    seed: int,
    n_questions: int,
    candidates_per_q: int,
    vocab_size: int,
    positive_rate: float,
    name: str = "synth",
) -> Corpus:
    """Generate a deterministic synthetic corpus.

    Each question is a random token sample; with probability positive_rate
    the question gets exactly one correct candidate, which restates about
    half its tokens from the question (always at least one). Incorrect
    candidates are sampled to share no token with their question.
    Questions are split 80/10/10.
    """
    check_positive(n_questions, "n_questions")
    check_positive(candidates_per_q, "candidates_per_q")
    check_positive(vocab_size, "vocab_size")
    check_unit_interval(positive_rate, "positive_rate")
    if vocab_size < _SYNTH_QUESTION_LEN[1] + _SYNTH_ANSWER_LEN[1]:
        raise ValueError(
            f"vocab_size {vocab_size} too small to guarantee non-overlapping negatives "
            f"(need at least {_SYNTH_QUESTION_LEN[1] + _SYNTH_ANSWER_LEN[1]})"
        )

    rng = random.Random(f"{seed}-synth")
    vocab = [f"w{i:04d}" for i in range(vocab_size)]
    groups: list[QuestionGroup] = []
    for qi in range(n_questions):
        qid = f"{name}-q{qi:05d}"
        question = tuple(rng.sample(vocab, rng.randint(*_SYNTH_QUESTION_LEN)))
        non_question = [t for t in vocab if t not in question]
        positive_at = rng.randrange(candidates_per_q) if rng.random() < positive_rate else -1
        candidates = []
        for ci in range(candidates_per_q):
            length = rng.randint(*_SYNTH_ANSWER_LEN)
            if ci == positive_at:
                n_shared = max(1, min(length // 2, len(question)))
                answer = rng.sample(list(question), n_shared) + rng.sample(non_question, length - n_shared)
                rng.shuffle(answer)
                label = 1
            else:
                answer = rng.sample(non_question, length)
                label = 0
            candidates.append(QAInstance(qid, question, tuple(answer), label))
        groups.append(QuestionGroup(qid, tuple(candidates)))

    if n_questions >= 3:
        n_dev = max(1, n_questions // 10)
        n_test = max(1, n_questions // 10)
        n_train = n_questions - n_dev - n_test
    else:
        n_train, n_dev, n_test = n_questions, 0, 0
    splits = {"train": tuple(groups[:n_train])}
    if n_dev:
        splits["dev"] = tuple(groups[n_train : n_train + n_dev])
    if n_test:
        splits["test"] = tuple(groups[n_train + n_dev :])
    return Corpus(name=name, splits=splits)
