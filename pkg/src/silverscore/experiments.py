"""The analysis protocols: correct vs. random pairs, reordering robustness,
prosody stratification and cross-modal retrieval."""

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import stats
from .data_io import INTENSITY_LEVELS, save_grid
from .embedding import Direction, as_matrix, silver_score
from .errors import (
    BadIntensity,
    DegenerateSample,
    MissingAnnotation,
    NotSquare,
    TooShort,
    TooSmall,
)
from .text_metrics import TokenizedSentence

LOW_INTENSITY_MAX = 4


@dataclass(frozen=True)
class PairingPlan:
    n: int
    mapping: tuple
    seed: int


def derangement(n, seed):
    """Uniformly drawn permutation without fixed points (rejection sampling)."""
    if n < 2:
        raise TooSmall(f"a derangement needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    # acceptance rate tends to 1/e, so this terminates quickly
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == idx):
            return PairingPlan(n, tuple(int(p) for p in perm), seed)


def drop_undefined_pairs(metric, pos_scores, neg_scores, pos_label, neg_label):
    """Align two per-item score lists, dropping every item undefined on either side."""
    if len(pos_scores) != len(neg_scores):
        raise ValueError("paired score lists differ in length")
    keep = [(p, n) for p, n in zip(pos_scores, neg_scores) if p is not None and n is not None]
    dropped = len(pos_scores) - len(keep)
    pos = stats.ScoreDistribution(metric, pos_label, tuple(p for p, _ in keep), dropped)
    neg = stats.ScoreDistribution(metric, neg_label, tuple(n for _, n in keep), dropped)
    return pos, neg


def discrimination_analysis(correct, random, normalize=True):
    """Separability of correct-pair scores (positive class) from mismatched-pair scores."""
    return stats.separability(correct.values, random.values, normalize=normalize,
                              dropped=max(correct.undefined_count, random.undefined_count))


def reorder_analysis(original, reordered, normalize=True):
    """Same statistics as :func:`discrimination_analysis`; here high overlap and an
    AUC near 0.5 mean the metric tolerates reordering."""
    return stats.separability(original.values, reordered.values, normalize=normalize,
                              dropped=max(original.undefined_count, reordered.undefined_count))


def shuffle_reorder(sentence, seed):
    """Seeded token shuffle that never returns the identity permutation.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if len(sentence.tokens) < 2:
        raise TooShort("need at least 2 tokens to reorder")
    rng = np.random.default_rng(seed)
    n = len(sentence.tokens)
    while True:
        perm = rng.permutation(n)
        if np.any(perm != np.arange(n)):
            break
    return TokenizedSentence(tuple(sentence.tokens[i] for i in perm), sentence.tokenizer)


def permute_rows(m, seed):
    m = np.asarray(m)
    return m[np.random.default_rng(seed).permutation(m.shape[0])]


# -- prosody -----------------------------------------------------------------------

class ProsodyCategory(str, enum.Enum):
    NONE = "no_intensity"
    LOW = "low_intensity"
    HIGH = "high_intensity"

    @classmethod
    def from_intensity(cls, total):
        if total < 0:
            raise ValueError("sentence intensity cannot be negative")
        if total == 0:
            return cls.NONE
        if total <= LOW_INTENSITY_MAX:
            return cls.LOW
        return cls.HIGH


CATEGORY_ORDER = (ProsodyCategory.NONE, ProsodyCategory.LOW, ProsodyCategory.HIGH)


@dataclass(frozen=True)
class ProsodyAnnotation:
    sentence_id: str
    token_intensities: tuple
    intensity: int
    category: ProsodyCategory


def annotate_prosody(sentence_id, token_intensities):
    levels = tuple(int(t) for t in token_intensities)
    for t in levels:
        if t not in INTENSITY_LEVELS:
            raise BadIntensity(f"{sentence_id}: token intensity {t} not in {{0,1,2}}")
    total = sum(levels)
    return ProsodyAnnotation(sentence_id, levels, total, ProsodyCategory.from_intensity(total))


@dataclass(frozen=True)
class CategoryCounts:
    counts: dict
    percentages: dict
    total: int


def category_counts(annotations):
    counts = {c: 0 for c in CATEGORY_ORDER}
    for a in annotations:
        counts[a.category] += 1
    total = sum(counts.values())
    pct = {c: (100.0 * k / total if total else 0.0) for c, k in counts.items()}
    return CategoryCounts(counts, pct, total)


@dataclass(frozen=True)
class ProsodyReport:
    categories: CategoryCounts
    box: dict  # category -> BoxStats, or None for an empty category
    correlation: Optional[tuple]  # (r, p); None when undefined
    n: int
    undefined_count: int


def prosody_analysis(scores: Mapping[str, Optional[float]], annotations):
    """Per-category box statistics and Pearson correlation of score with intensity.

    ``annotations`` maps sentence id to :class:`ProsodyAnnotation` (a list is
    also accepted). Scores of ``None`` are counted and left out.
    """
    if not isinstance(annotations, Mapping):
        annotations = {a.sentence_id: a for a in annotations}
    missing = [sid for sid in scores if sid not in annotations]
    if missing:
        raise MissingAnnotation(f"no prosody annotation for {len(missing)} sentence(s), "
                                f"first {missing[0]!r}")
    used = [(annotations[sid], s) for sid, s in scores.items() if s is not None]
    undefined = len(scores) - len(used)
    cats = category_counts(a for a, _ in used)
    box = {}
    for c in CATEGORY_ORDER:
        vals = [s for a, s in used if a.category is c]
        box[c] = stats.box_stats(vals) if vals else None
    try:
        corr = stats.pearson([s for _, s in used], [a.intensity for a, _ in used])
    except DegenerateSample:
        corr = None
    return ProsodyReport(cats, box, corr, len(used), undefined)


# -- retrieval -------------------------------------------------------------------------

@dataclass(frozen=True)
class RecallTable:
    ks: tuple
    recalls: tuple
    direction: Direction
    n: int


def true_match_ranks(sim, direction=Direction.TEXT_TO_VIDEO):
    """0-based rank of each query's diagonal match; ties go to the lower index."""
    m = as_matrix(sim, "similarity matrix")
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"similarity matrix must be square, got {m.shape}")
    if Direction.parse(direction) is Direction.VIDEO_TO_TEXT:
        m = m.T
    n = m.shape[0]
    target = np.diag(m)[:, None]
    lower = np.arange(n)[None, :] < np.arange(n)[:, None]
    return (m > target).sum(axis=1) + ((m == target) & lower).sum(axis=1)


def recall_at_k(sim, ks=(1, 5, 10), direction=Direction.TEXT_TO_VIDEO):
    """Recall@k with the diagonal as ground truth.

    Rows are text queries for text-to-video; columns are video queries for
    video-to-text.
    """
    direction = Direction.parse(direction)
    ranks = true_match_ranks(sim, direction)
    ks = tuple(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise ValueError("k must be >= 1")
    recalls = tuple(float(np.mean(ranks < k)) for k in ks)
    return RecallTable(ks, recalls, direction, len(ranks))


def retrieval_matrix(records, weight=3.5, temperature=1.0):
    """``sim[t, v]`` = video-to-text similarity of video ``v`` against text ``t``."""
    n = len(records)
    sim = np.empty((n, n), dtype=np.float64)
    for v, rv in enumerate(records):
        for t, rt in enumerate(records):
            sim[t, v] = silver_score(rv.clip_embeddings, rt.token_embeddings, weight,
                                     temperature=temperature).z
    return sim


def heatmap_export(sim, path, row_ids=None, col_ids=None):
    save_grid(sim, path, row_ids, col_ids, corner="text/video")
