"""Back-translation baselines: sentence BLEU, ROUGE-L and greedy embedding matching."""

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import regex

from .embedding import as_matrix, l2_normalize_rows, similarity_matrix
from .errors import DimMismatch, EmptySentence

EPSILON_FLOOR = 1e-9


class Tokenizer(str, enum.Enum):
    WHITESPACE = "whitespace"
    CHARACTER = "character"


class Smoothing(str, enum.Enum):
    NONE = "none"
    EPSILON = "epsilon"


@dataclass(frozen=True)
class TokenizedSentence:
    tokens: tuple
    tokenizer: Tokenizer = Tokenizer.WHITESPACE

    def __post_init__(self):
        if not self.tokens:
            raise EmptySentence("sentence has no tokens")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class NgramMetricResult:
    # value is None when some required order has no hypothesis n-grams
    value: Optional[float]
    per_order_precision: tuple
    brevity_penalty: float

    @property
    def defined(self):
        return self.value is not None


@dataclass(frozen=True)
class MatchScore:
    precision: float
    recall: float
    f1: float


def f1_score(p, r):
    return 2 * p * r / (p + r) if p + r != 0 else 0.0


_GRAPHEME = regex.compile(r"\X")


def tokenize(text, mode=Tokenizer.WHITESPACE):
    mode = Tokenizer(mode)
    if mode is Tokenizer.WHITESPACE:
        tokens = text.lower().split()
    else:
        tokens = [g.lower() for g in _GRAPHEME.findall(text) if not g.isspace()]
    if not tokens:
        raise EmptySentence(f"empty sentence: {text!r}")
    return TokenizedSentence(tuple(tokens), mode)


def _tokens(s):
    return s.tokens if isinstance(s, TokenizedSentence) else tuple(s)


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def closest_ref_length(hyp_len, ref_lens):
    # ties go to the shorter reference
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def bleu(hyp, refs, max_n=4, smoothing=Smoothing.EPSILON):
    """Sentence-level BLEU with clipped n-gram counts.

    ``refs`` is a single sentence or a list of them. Returns an undefined
    result (``value is None``) when the hypothesis is shorter than ``max_n``.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    smoothing = Smoothing(smoothing)
    if isinstance(refs, TokenizedSentence):
        refs = [refs]
    hyp_toks = _tokens(hyp)
    ref_toks = [_tokens(r) for r in refs]
    if not ref_toks:
        raise ValueError("at least one reference is required")

    precisions = []
    undefined = False
    for n in range(1, max_n + 1):
        hyp_counts = ngrams(hyp_toks, n)
        total = sum(hyp_counts.values())
        if total == 0:
            precisions.append(None)
            undefined = True
            continue
        max_ref = Counter()
        for r in ref_toks:
            for gram, c in ngrams(r, n).items():
                if c > max_ref[gram]:
                    max_ref[gram] = c
        matches = sum(min(c, max_ref[gram]) for gram, c in hyp_counts.items())
        precisions.append(matches / total)

    c = len(hyp_toks)
    r = closest_ref_length(c, [len(t) for t in ref_toks])
    bp = 1.0 if c > r else math.exp(1 - r / c)
    if undefined:
        return NgramMetricResult(None, tuple(precisions), bp)

    if smoothing is Smoothing.EPSILON:
        logs = [math.log(p if p > 0 else EPSILON_FLOOR) for p in precisions]
    elif min(precisions) == 0:
        return NgramMetricResult(0.0, tuple(precisions), bp)
    else:
        logs = [math.log(p) for p in precisions]
    value = bp * math.exp(math.fsum(logs) / max_n)
    return NgramMetricResult(value, tuple(precisions), bp)


def lcs_length(a, b):
    a, b = _tokens(a), _tokens(b)
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hyp, ref):
    """ROUGE-L with beta = 1."""
    h, r = _tokens(hyp), _tokens(ref)
    if not h or not r:
        raise EmptySentence("ROUGE-L needs non-empty sentences")
    lcs = lcs_length(h, r)
    f1 = 2 * lcs / (len(h) + len(r))  # == 2PR/(P+R), without the extra roundings
    return MatchScore(lcs / len(h), lcs / len(r), f1)


def _weighted_mean(values, weights):
    if weights is None:
        return math.fsum(values) / len(values)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(values),):
        raise DimMismatch(f"expected {len(values)} idf weights, got {w.shape}")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("idf weights must be non-negative with a positive sum")
    return math.fsum((w * values).tolist()) / math.fsum(w.tolist())


def greedy_match(hyp_tokens, ref_tokens, hyp_idf: Sequence[float] = None,
                 ref_idf: Sequence[float] = None):
    """BERTScore-style greedy matching over token embeddings.

    Each reference token is matched to its most similar hypothesis token
    (recall) and vice versa (precision). Token order plays no role.
    """
    h = as_matrix(hyp_tokens, "hypothesis embeddings")
    r = as_matrix(ref_tokens, "reference embeddings")
    if h.shape[1] != r.shape[1]:
        raise DimMismatch(f"hypothesis dim {h.shape[1]} != reference dim {r.shape[1]}")
    cos = similarity_matrix(l2_normalize_rows(h), l2_normalize_rows(r))
    precision = _weighted_mean(cos.max(axis=1), hyp_idf)
    recall = _weighted_mean(cos.max(axis=0), ref_idf)
    return MatchScore(precision, recall, f1_score(precision, recall))
