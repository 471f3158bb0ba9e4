"""Sign-language video/text embedding scores and the statistics used to judge them."""

__version__ = "0.1.0"

from .embedding import (
    Direction,
    SilverScoreValue,
    l2_normalize_rows,
    silver_score,
    similarity_matrix,
    softmax_reweight,
    z_similarity,
)
from .errors import SilverScoreError

__all__ = [
    "Direction",
    "SilverScoreError",
    "SilverScoreValue",
    "l2_normalize_rows",
    "silver_score",
    "similarity_matrix",
    "softmax_reweight",
    "z_similarity",
]
