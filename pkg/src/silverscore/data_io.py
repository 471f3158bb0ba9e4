"""On-disk formats and the synthetic embedding generator.

SLVE binary layout (all integers little-endian)::

    magic      4 bytes   b"SLVE"
    version    u16       1
    dim        u32       D
    count      u64       number of records
    record * count:
        id_len u16, id (UTF-8, id_len bytes)
        M u32, L u32
        M*D float32 clip embeddings, then L*D float32 token embeddings, row-major

Text formats are UTF-8, one record per line; blank lines are ignored.

* embeddings sidecar (``.jsonl``): ``{"id", "clips": [[...]], "tokens": [[...]]}``
* corpus (JSONL): ``{"id", "reference", "hypothesis", "reordered_hypothesis"?}``
* prosody: ``<id> <t1> <t2> ...`` whitespace separated, each t in {0, 1, 2};
  ``#`` starts a comment line
* grid (TSV): header ``<corner>\\t<col ids...>``, then ``<row id>\\t<values...>``
"""

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .embedding import l2_normalize_rows
from .errors import (
    BadIntensity,
    BadMagic,
    CorruptRecord,
    DimInconsistent,
    DuplicateId,
    IoFailure,
    ParseError,
    VersionMismatch,
)

MAGIC = b"SLVE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<H")
_SHAPE = struct.Struct("<II")
_F32 = np.dtype("<f4")
INTENSITY_LEVELS = (0, 1, 2)


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    id: str
    clip_embeddings: np.ndarray
    token_embeddings: np.ndarray

    @property
    def dim(self):
        return self.clip_embeddings.shape[1]


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    reference: str
    hypothesis: str
    reordered_hypothesis: Optional[str] = None


@dataclass(frozen=True)
class SynthesisConfig:
    n: int
    dim: int
    clips_range: tuple = (3, 10)
    tokens_range: tuple = (3, 10)
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        for name in ("clips_range", "tokens_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 1 <= min <= max, got {(lo, hi)}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _open(path, mode, **kw):
    try:
        return open(path, mode, **kw)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc


# -- SLVE ---------------------------------------------------------------------

def encode_embeddings(records):
    records = list(records)
    dims = {r.clip_embeddings.shape[1] for r in records} | {r.token_embeddings.shape[1] for r in records}
    if len(dims) > 1:
        raise DimInconsistent(f"records mix embedding dims {sorted(dims)}")
    dim = dims.pop() if dims else 0
    seen = set()
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(records))]
    for r in records:
        if r.id in seen:
            raise DuplicateId(f"duplicate id {r.id!r}")
        seen.add(r.id)
        rid = r.id.encode("utf-8")
        if len(rid) > 0xFFFF:
            raise ValueError(f"id too long: {r.id[:20]!r}...")
        parts.append(_ID_LEN.pack(len(rid)))
        parts.append(rid)
        parts.append(_SHAPE.pack(r.clip_embeddings.shape[0], r.token_embeddings.shape[0]))
        parts.append(np.ascontiguousarray(r.clip_embeddings, dtype=_F32).tobytes())
        parts.append(np.ascontiguousarray(r.token_embeddings, dtype=_F32).tobytes())
    return b"".join(parts)


def save_embeddings(records, path):
    path = Path(path)
    if path.suffix == ".jsonl":
        return _save_embeddings_text(records, path)
    data = encode_embeddings(records)
    with _open(path, "wb") as fh:
        fh.write(data)


def decode_embeddings(data, path=None):
    if len(data) < len(MAGIC) or data[:4] != MAGIC:
        raise BadMagic(f"not an SLVE file (magic {bytes(data[:4])!r})", path, 0)
    if len(data) < _HEADER.size:
        raise CorruptRecord("truncated header", path, len(data))
    _, version, dim, count = _HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, expected {FORMAT_VERSION}", path, 4)
    if count and dim == 0:
        raise CorruptRecord("dimension is zero", path, 6)

    def need(offset, size, what):
        if offset + size > len(data):
            raise CorruptRecord(f"truncated {what} (need {size} bytes, have {len(data) - offset})",
                                path, offset)

    records, seen = [], set()
    off = _HEADER.size
    for _ in range(count):
        start = off
        need(off, _ID_LEN.size, "id length")
        (id_len,) = _ID_LEN.unpack_from(data, off)
        off += _ID_LEN.size
        need(off, id_len, "id")
        try:
            rid = bytes(data[off:off + id_len]).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecord("id is not valid UTF-8", path, off) from None
        off += id_len
        if rid in seen:
            raise DuplicateId(f"duplicate id {rid!r}", path, start)
        seen.add(rid)
        need(off, _SHAPE.size, "shape")
        m, l = _SHAPE.unpack_from(data, off)
        if m == 0 or l == 0:
            raise CorruptRecord(f"record {rid!r} has M={m}, L={l}; both must be >= 1", path, off)
        off += _SHAPE.size
        mats = []
        for rows, what in ((m, "clip embeddings"), (l, "token embeddings")):
            nbytes = rows * dim * _F32.itemsize
            need(off, nbytes, what)
            arr = np.frombuffer(data, dtype=_F32, count=rows * dim, offset=off)
            if not np.all(np.isfinite(arr)):
                raise CorruptRecord(f"non-finite value in {what} of {rid!r}", path, off)
            mats.append(arr.astype(np.float64).reshape(rows, dim))
            off += nbytes
        records.append(EmbeddingRecord(rid, mats[0], mats[1]))
    if off != len(data):
        raise CorruptRecord(f"{len(data) - off} trailing bytes after last record", path, off)
    return records


def load_embeddings(path):
    path = Path(path)
    if path.suffix == ".jsonl":
        return _load_embeddings_text(path)
    with _open(path, "rb") as fh:
        data = fh.read()
    return decode_embeddings(data, path)


def _save_embeddings_text(records, path):
    with _open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({"id": r.id,
                                 "clips": np.asarray(r.clip_embeddings).tolist(),
                                 "tokens": np.asarray(r.token_embeddings).tolist()},
                                ensure_ascii=False))
            fh.write("\n")


def _matrix_field(obj, key, path, lineno):
    try:
        arr = np.asarray(obj[key], dtype=np.float64)
    except KeyError:
        raise ParseError(f"missing field {key!r}", path, lineno) from None
    except (TypeError, ValueError):
        raise ParseError(f"field {key!r} is not a numeric matrix", path, lineno) from None
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ParseError(f"field {key!r} must be a non-empty matrix", path, lineno)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"field {key!r} has non-finite values", path, lineno)
    return arr


def _json_lines(path):
    with _open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("record must be a JSON object", path, lineno)
            yield lineno, obj


def _record_id(obj, path, lineno, seen):
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise ParseError("missing or empty string field 'id'", path, lineno)
    if rid in seen:
        raise DuplicateId(f"duplicate id {rid!r}", path, lineno)
    seen.add(rid)
    return rid


def _load_embeddings_text(path):
    records, seen, dim = [], set(), None
    for lineno, obj in _json_lines(path):
        rid = _record_id(obj, path, lineno, seen)
        clips = _matrix_field(obj, "clips", path, lineno)
        tokens = _matrix_field(obj, "tokens", path, lineno)
        for d in (clips.shape[1], tokens.shape[1]):
            if dim is None:
                dim = d
            elif d != dim:
                raise DimInconsistent(f"dim {d} differs from file dim {dim}", path, lineno)
        records.append(EmbeddingRecord(rid, clips, tokens))
    return records


# -- corpus / prosody -----------------------------------------------------------

def load_corpus(path):
    records, seen = [], set()
    for lineno, obj in _json_lines(path):
        rid = _record_id(obj, path, lineno, seen)
        fields = {}
        for key in ("reference", "hypothesis"):
            val = obj.get(key)
            if not isinstance(val, str) or not val.strip():
                raise ParseError(f"missing or empty field {key!r}", path, lineno)
            fields[key] = val
        reordered = obj.get("reordered_hypothesis")
        if reordered is not None and (not isinstance(reordered, str) or not reordered.strip()):
            raise ParseError("'reordered_hypothesis' must be a non-empty string", path, lineno)
        records.append(CorpusRecord(rid, fields["reference"], fields["hypothesis"], reordered))
    return records


def save_corpus(records, path):
    with _open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {"id": r.id, "reference": r.reference, "hypothesis": r.hypothesis}
            if r.reordered_hypothesis is not None:
                obj["reordered_hypothesis"] = r.reordered_hypothesis
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_prosody(path):
    """Return ``{sentence_id: [token intensities]}`` in file order."""
    out = {}
    with _open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            sid, raw = fields[0], fields[1:]
            if not raw:
                raise ParseError(f"sentence {sid!r} has no token intensities", path, lineno)
            if sid in out:
                raise DuplicateId(f"duplicate id {sid!r}", path, lineno)
            levels = []
            for tok in raw:
                try:
                    v = int(tok)
                except ValueError:
                    raise ParseError(f"intensity {tok!r} is not an integer", path, lineno) from None
                if v not in INTENSITY_LEVELS:
                    raise BadIntensity(f"intensity {v} not in {{0,1,2}}", path, lineno)
                levels.append(v)
            out[sid] = levels
    return out


def save_prosody(intensities, path):
    with _open(path, "w", encoding="utf-8") as fh:
        for sid, levels in intensities.items():
            fh.write(sid + " " + " ".join(str(int(v)) for v in levels) + "\n")


# -- grids ------------------------------------------------------------------------

def save_grid(matrix, path, row_ids=None, col_ids=None, corner="id"):
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"grid must be a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("grid contains non-finite values")
    row_ids = [str(i) for i in range(m.shape[0])] if row_ids is None else list(row_ids)
    col_ids = [str(j) for j in range(m.shape[1])] if col_ids is None else list(col_ids)
    if len(row_ids) != m.shape[0] or len(col_ids) != m.shape[1]:
        raise ValueError("row/column id counts do not match the matrix shape")
    lines = ["\t".join([corner] + col_ids)]
    for rid, row in zip(row_ids, m.tolist()):
        lines.append("\t".join([rid] + [repr(v) for v in row]))
    with _open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid(path):
    """Return ``(matrix, row_ids, col_ids)``."""
    with _open(path, "r", encoding="utf-8") as fh:
        lines = [(i, ln.rstrip("\n")) for i, ln in enumerate(fh, 1) if ln.strip()]
    if len(lines) < 2:
        raise ParseError("grid needs a header and at least one row", path, len(lines) + 1)
    col_ids = lines[0][1].split("\t")[1:]
    if not col_ids:
        raise ParseError("grid header has no columns", path, lines[0][0])
    rows, row_ids = [], []
    for lineno, line in lines[1:]:
        fields = line.split("\t")
        if len(fields) != len(col_ids) + 1:
            raise ParseError(f"expected {len(col_ids)} values, got {len(fields) - 1}", path, lineno)
        try:
            vals = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", path, lineno)
        row_ids.append(fields[0])
        rows.append(vals)
    return np.array(rows, dtype=np.float64), row_ids, col_ids


# -- synthetic data -------------------------------------------------------------------

def generate_synthetic(config):
    """Paired clip/token embeddings sharing one latent direction per item.

    Returns ``(records, pairing)`` where ``pairing`` lists the ground-truth
    ``(video_id, text_id)`` matches (record i's clips go with record i's tokens).
    """
    rng = np.random.default_rng(config.seed)
    width = max(5, len(str(max(config.n - 1, 0))))
    records = []
    for i in range(config.n):
        latent = rng.standard_normal(config.dim)
        latent /= np.linalg.norm(latent)
        m = int(rng.integers(config.clips_range[0], config.clips_range[1] + 1))
        l = int(rng.integers(config.tokens_range[0], config.tokens_range[1] + 1))
        clips = latent + config.noise_sigma * rng.standard_normal((m, config.dim))
        tokens = latent + config.noise_sigma * rng.standard_normal((l, config.dim))
        rid = f"item-{i:0{width}d}"
        records.append(EmbeddingRecord(rid, l2_normalize_rows(clips), l2_normalize_rows(tokens)))
    pairing = [(r.id, r.id) for r in records]
    return records, pairing


def save_pairing(pairing, path):
    with _open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id\ttext_id\n")
        for v, t in pairing:
            fh.write(f"{v}\t{t}\n")
