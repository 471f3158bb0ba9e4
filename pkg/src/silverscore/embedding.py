"""Fine-grained video/text similarity and its scaled global score.

A video is a stack of clip embeddings (M x D) from a sliding window, a text a
stack of token embeddings (L x D). The clip/token cosine matrix is
re-weighted by a softmax along the aggregation direction, then rows (or
columns) are summed and averaged into a single similarity ``z``, which is
mapped to [0, 100].

All reductions use :func:`math.fsum`. It is correctly rounded, so the result
depends only on the multiset of summands: permuting clips or tokens leaves
every score bit-for-bit unchanged.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NonFinite, ZeroRow

DEFAULT_WEIGHT = 3.5
ZERO_NORM = 1e-12


class Direction(str, enum.Enum):
    VIDEO_TO_TEXT = "v2t"
    TEXT_TO_VIDEO = "t2v"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "v2t": cls.VIDEO_TO_TEXT,
            "videototext": cls.VIDEO_TO_TEXT,
            "video-to-text": cls.VIDEO_TO_TEXT,
            "t2v": cls.TEXT_TO_VIDEO,
            "texttovideo": cls.TEXT_TO_VIDEO,
            "text-to-video": cls.TEXT_TO_VIDEO,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown direction {value!r}") from None


@dataclass(frozen=True)
class SilverScoreValue:
    z: float
    scaled: float
    weight: float = DEFAULT_WEIGHT
    direction: Direction = Direction.VIDEO_TO_TEXT

    @property
    def unclamped(self):
        """``100 * weight * z`` before clamping; keeps the spread that the clamp discards."""
        return 100.0 * self.weight * self.z


def as_matrix(m, name="matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimMismatch(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains non-finite values")
    return arr


def _fsum_rows(m):
    return np.array([math.fsum(row) for row in m.tolist()], dtype=np.float64)


def l2_normalize_rows(m):
    """Scale each row to unit Euclidean norm.

    Raises ZeroRow for a row whose norm is below 1e-12.
    """
    arr = as_matrix(m)
    norms = np.sqrt(_fsum_rows(arr * arr))
    bad = np.flatnonzero(norms < ZERO_NORM)
    if bad.size:
        raise ZeroRow(f"row {int(bad[0])} has (near) zero norm")
    return arr / norms[:, None]


def similarity_matrix(clips, tokens):
    """E[i, j] = <clips[i], tokens[j]>, shape (M, L).

    Inputs are used as given; normalize first to get cosines.
    """
    s = as_matrix(clips, "clip embeddings")
    w = as_matrix(tokens, "token embeddings")
    if s.shape[1] != w.shape[1]:
        raise DimMismatch(f"clip dim {s.shape[1]} != token dim {w.shape[1]}")
    prods = s[:, None, :] * w[None, :, :]
    flat = [math.fsum(p) for p in prods.reshape(-1, s.shape[1]).tolist()]
    return np.array(flat, dtype=np.float64).reshape(s.shape[0], w.shape[0])


def _row_softmax(e, temperature):
    # one row at a time so each denominator is an fsum over that row only
    shifted = (e - e.max(axis=1, keepdims=True)) / temperature
    ex = np.exp(shifted)
    return ex / _fsum_rows(ex)[:, None]


def softmax_weights(e, direction=Direction.VIDEO_TO_TEXT, temperature=1.0):
    """Softmax over each row (v2t) or each column (t2v) of ``e``."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    e = as_matrix(e)
    if Direction.parse(direction) is Direction.VIDEO_TO_TEXT:
        return _row_softmax(e, temperature)
    return _row_softmax(e.T, temperature).T


def softmax_reweight(e, direction=Direction.VIDEO_TO_TEXT, temperature=1.0):
    e = as_matrix(e)
    return softmax_weights(e, direction, temperature) * e


def z_similarity(e_prime, direction=Direction.VIDEO_TO_TEXT):
    """Sum along the softmax axis, then average the sums."""
    e_prime = as_matrix(e_prime)
    if Direction.parse(direction) is Direction.TEXT_TO_VIDEO:
        e_prime = e_prime.T
    sums = _fsum_rows(e_prime)
    return math.fsum(sums.tolist()) / len(sums)


def scale_score(z, weight=DEFAULT_WEIGHT):
    return 100.0 * min(max(weight * z, 0.0), 1.0)


def silver_score(clips, tokens, weight=DEFAULT_WEIGHT, direction=Direction.VIDEO_TO_TEXT,
                 temperature=1.0):
    if weight <= 0:
        raise ValueError("weight must be positive")
    direction = Direction.parse(direction)
    s = l2_normalize_rows(clips)
    w = l2_normalize_rows(tokens)
    e = similarity_matrix(s, w)
    z = z_similarity(softmax_reweight(e, direction, temperature), direction)
    return SilverScoreValue(z=z, scaled=scale_score(z, weight), weight=weight, direction=direction)
