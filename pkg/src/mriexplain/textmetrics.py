"""Quality metrics for generated narrative reports.

Lexical diversity (type-token ratio and the Maas index), readability
(Flesch Reading Ease), sentence-to-sentence coherence via embedding
cosine similarity, and standard classification metrics computed from a
confusion matrix.

The tokenizer, sentence splitter and syllable counter are deliberately
simple rule-based routines, documented below; abbreviations such as
"e.g." split sentences and are a known limitation.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Dict, List, Protocol, Sequence, Tuple

import numpy as np

__all__ = [
    "tokenize",
    "split_sentences",
    "count_syllables",
    "ttr",
    "maas",
    "fres",
    "coherence",
    "EmbeddingProvider",
    "TermFrequencyEmbedder",
    "TextMetricsReport",
    "text_report",
    "ConfusionMatrix",
    "ClassMetrics",
    "ClassificationReport",
    "classification_metrics",
]

# Lowercased alphabetic runs; apostrophes survive word-internally only.
_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)*")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+(?=\s|$)")
_VOWEL_RUN_RE = re.compile(r"[aeiouy]+")


def tokenize(text: str) -> List[str]:
    """Lowercased word tokens; digits and punctuation act as separators."""
    return _TOKEN_RE.findall(text.lower().replace("’", "'"))


def split_sentences(text: str) -> List[str]:
    """Split on ., ! or ? followed by whitespace or end of text.

    Segments without any word token are dropped.
    """
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [p.strip() for p in parts if tokenize(p)]


def count_syllables(word: str) -> int:
    """Vowel-group heuristic: maximal runs of aeiouy, minus a trailing
    silent 'e' (kept when the word ends in consonant + 'le'), minimum 1."""
    w = word.lower()
    runs = _VOWEL_RUN_RE.findall(w)
    n = len(runs)
    if w.endswith("e") and not (
        len(w) >= 3 and w.endswith("le") and w[-3] not in "aeiouy"
    ):
        n -= 1
    return max(1, n)


def ttr(text: str) -> float:
    """Type-token ratio: unique words / total words."""
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("cannot compute TTR of a text with no word tokens")
    return len(set(tokens)) / len(tokens)


def maas(text: str) -> float:
    """Maas lexical-diversity index, (ln tokens - ln types) / (ln tokens)^2.

    Natural logarithm; 0 when all tokens are distinct, larger as
    diversity falls.  Requires at least 2 tokens.
    """
    tokens = tokenize(text)
    if len(tokens) < 2:
        raise ValueError("Maas index needs at least 2 tokens")
    n_tokens = len(tokens)
    n_types = len(set(tokens))
    return (math.log(n_tokens) - math.log(n_types)) / math.log(n_tokens) ** 2


def fres(text: str) -> float:
    """Flesch Reading Ease: 206.835 - 1.015 * ASL - 84.6 * ASW."""
    sentences = split_sentences(text)
    if not sentences:
        raise ValueError("no sentences detected")
    tokens = tokenize(text)
    asl = len(tokens) / len(sentences)
    asw = sum(count_syllables(t) for t in tokens) / len(tokens)
    return 206.835 - 1.015 * asl - 84.6 * asw


class EmbeddingProvider(Protocol):
    """Anything that can embed a batch of sentences into vectors."""

    def embed(self, sentences: Sequence[str]) -> List[np.ndarray]: ...


class TermFrequencyEmbedder:
    """Deterministic built-in embedder: L2-normalized term-frequency
    vectors over the vocabulary of the sentences being embedded.

    Zero model dependencies, so coherence scores are reproducible; a
    remote embedding service can be plugged in behind the same
    interface.  Safe for concurrent use (stateless).
    """

    def embed(self, sentences: Sequence[str]) -> List[np.ndarray]:
        tokenized = [tokenize(s) for s in sentences]
        vocab = sorted({t for toks in tokenized for t in toks})
        index = {t: i for i, t in enumerate(vocab)}
        out = []
        for toks in tokenized:
            v = np.zeros(max(len(vocab), 1), dtype=np.float64)
            for t in toks:
                v[index[t]] += 1.0
            norm = np.linalg.norm(v)
            out.append(v / norm if norm > 0 else v)
        return out


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def coherence(text: str, embedder: EmbeddingProvider | None = None) -> float:
    """Mean cosine similarity of adjacent sentence-embedding pairs.

    Pairs involving a zero vector contribute 0.  Requires at least two
    sentences.
    """
    sentences = split_sentences(text)
    if len(sentences) < 2:
        raise ValueError("coherence needs at least 2 sentences")
    vectors = (embedder or TermFrequencyEmbedder()).embed(sentences)
    sims = [_cosine(vectors[i], vectors[i + 1]) for i in range(len(vectors) - 1)]
    return sum(sims) / len(sims)


@dataclass(frozen=True)
class TextMetricsReport:
    n_tokens: int
    n_types: int
    ttr: float
    maas: float
    fres: float
    cohs: float


def text_report(text: str, embedder: EmbeddingProvider | None = None) -> TextMetricsReport:
    """All four report-quality metrics for one text.

    Requires >= 2 tokens and >= 2 sentences so every metric is finite.
    """
    tokens = tokenize(text)
    return TextMetricsReport(
        n_tokens=len(tokens),
        n_types=len(set(tokens)),
        ttr=ttr(text),
        maas=maas(text),
        fres=fres(text),
        cohs=coherence(text, embedder),
    )


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Square count matrix; rows are true classes, columns predictions."""

    classes: Tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts)
        if not np.issubdtype(c.dtype, np.integer):
            raise ValueError("confusion counts must be integers")
        k = len(self.classes)
        if c.shape != (k, k):
            raise ValueError(f"counts shape {c.shape} does not match {k} classes")
        if c.min(initial=0) < 0:
            raise ValueError("confusion counts must be >= 0")
        object.__setattr__(self, "classes", tuple(self.classes))
        counts = np.ascontiguousarray(c.astype(np.int64))
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    per_class: Dict[str, ClassMetrics]
    macro: ClassMetrics


def classification_metrics(cm: ConfusionMatrix) -> ClassificationReport:
    """Accuracy plus per-class and macro-averaged precision/recall/F1.

    A class with a zero denominator (never predicted, never present, or
    precision + recall = 0) gets that metric set to 0 with a warning.
    """
    counts = cm.counts
    total = int(counts.sum())
    if total == 0:
        raise ValueError("confusion matrix has no samples")

    per_class: Dict[str, ClassMetrics] = {}
    for k, name in enumerate(cm.classes):
        tp = int(counts[k, k])
        pred = int(counts[:, k].sum())
        true = int(counts[k, :].sum())
        if pred == 0:
            warnings.warn(f"class {name!r} was never predicted; precision set to 0", stacklevel=2)
            precision = 0.0
        else:
            precision = tp / pred
        if true == 0:
            warnings.warn(f"class {name!r} has no true samples; recall set to 0", stacklevel=2)
            recall = 0.0
        else:
            recall = tp / true
        if precision + recall == 0.0:
            f1 = 0.0
        else:
            f1 = 2.0 * precision * recall / (precision + recall)
        per_class[name] = ClassMetrics(precision=precision, recall=recall, f1=f1)

    k = len(cm.classes)
    macro = ClassMetrics(
        precision=sum(m.precision for m in per_class.values()) / k,
        recall=sum(m.recall for m in per_class.values()) / k,
        f1=sum(m.f1 for m in per_class.values()) / k,
    )
    return ClassificationReport(
        accuracy=int(np.trace(counts)) / total,
        per_class=per_class,
        macro=macro,
    )
