import struct

import numpy as np
import pytest

from silverscore import data_io
from silverscore.data_io import CorpusRecord, EmbeddingRecord, SynthesisConfig
from silverscore.embedding import silver_score
from silverscore.errors import (
    BadIntensity,
    BadMagic,
    CorruptRecord,
    DimInconsistent,
    DuplicateId,
    IoFailure,
    ParseError,
    VersionMismatch,
)
from silverscore.experiments import heatmap_export


def rec(rid, m=2, l=3, d=4, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingRecord(rid, rng.normal(size=(m, d)), rng.normal(size=(l, d)))


@pytest.fixture
def records():
    return [rec("a", seed=1), rec("ünï", 1, 5, seed=2), rec("c", 4, 1, seed=3)]


class TestSlve:
    def test_round_trip_bitwise(self, tmp_path, records):
        path = tmp_path / "e.slve"
        data_io.save_embeddings(records, path)
        loaded = data_io.load_embeddings(path)
        assert [r.id for r in loaded] == [r.id for r in records]
        for a, b in zip(records, loaded):
            np.testing.assert_array_equal(a.clip_embeddings.astype(np.float32), b.clip_embeddings)
            np.testing.assert_array_equal(a.token_embeddings.astype(np.float32), b.token_embeddings)
        again = tmp_path / "f.slve"
        data_io.save_embeddings(loaded, again)
        assert again.read_bytes() == path.read_bytes()

    def test_header_layout(self, tmp_path, records):
        path = tmp_path / "e.slve"
        data_io.save_embeddings(records, path)
        raw = path.read_bytes()
        assert raw[:4] == b"SLVE"
        assert struct.unpack_from("<HIQ", raw, 4) == (1, 4, 3)
        assert struct.unpack_from("<H", raw, 18) == (1,)
        assert raw[20:21] == b"a"
        assert struct.unpack_from("<II", raw, 21) == (2, 3)
        first = np.frombuffer(raw, "<f4", 4, 29)
        np.testing.assert_array_equal(first, records[0].clip_embeddings[0].astype(np.float32))

    def test_empty(self, tmp_path):
        path = tmp_path / "e.slve"
        data_io.save_embeddings([], path)
        assert data_io.load_embeddings(path) == []

    def test_truncated(self, tmp_path, records):
        path = tmp_path / "e.slve"
        data_io.save_embeddings(records, path)
        raw = path.read_bytes()
        for cut in (10, 19, 25, len(raw) - 1):
            path.write_bytes(raw[:cut])
            with pytest.raises(CorruptRecord) as err:
                data_io.load_embeddings(path)
            assert err.value.location is not None
            assert str(path) in str(err.value)

    def test_trailing_bytes(self, tmp_path, records):
        path = tmp_path / "e.slve"
        data_io.save_embeddings(records, path)
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(CorruptRecord):
            data_io.load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "e.slve"
        path.write_bytes(b"NOPE" + bytes(14))
        with pytest.raises(BadMagic) as err:
            data_io.load_embeddings(path)
        assert err.value.location == 0

    def test_version(self, tmp_path, records):
        raw = bytearray(data_io.encode_embeddings(records))
        raw[4:6] = struct.pack("<H", 2)
        with pytest.raises(VersionMismatch):
            data_io.decode_embeddings(bytes(raw))

    def test_zero_rows_rejected(self):
        raw = data_io._HEADER.pack(b"SLVE", 1, 2, 1) + struct.pack("<H", 1) + b"x" + struct.pack("<II", 0, 1)
        with pytest.raises(CorruptRecord):
            data_io.decode_embeddings(raw + bytes(8))

    def test_mixed_dims(self, tmp_path):
        with pytest.raises(DimInconsistent):
            data_io.save_embeddings([rec("a", d=4), rec("b", d=5)], tmp_path / "e.slve")

    def test_duplicate_id(self, records):
        raw = data_io.encode_embeddings(records[:1])
        header = data_io._HEADER.pack(b"SLVE", 1, 4, 2)
        body = raw[data_io._HEADER.size:]
        with pytest.raises(DuplicateId):
            data_io.decode_embeddings(header + body + body)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            data_io.load_embeddings(tmp_path / "nope.slve")


class TestTextSidecar:
    def test_round_trip(self, tmp_path, records):
        path = tmp_path / "e.jsonl"
        data_io.save_embeddings(records, path)
        loaded = data_io.load_embeddings(path)
        for a, b in zip(records, loaded):
            np.testing.assert_array_equal(a.clip_embeddings, b.clip_embeddings)

    def test_mixed_dims(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text('{"id": "a", "clips": [[1, 0]], "tokens": [[1, 0, 0]]}\n')
        with pytest.raises(DimInconsistent) as err:
            data_io.load_embeddings(path)
        assert err.value.location == 1

    def test_empty_matrix(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text('\n{"id": "a", "clips": [], "tokens": [[1, 0]]}\n')
        with pytest.raises(ParseError) as err:
            data_io.load_embeddings(path)
        assert err.value.location == 2


class TestCorpus:
    def test_round_trip(self, tmp_path):
        recs = [CorpusRecord("1", "im westen", "im nordwesten"),
                CorpusRecord("2", "他的女儿", "女儿", "儿女")]
        path = tmp_path / "c.jsonl"
        data_io.save_corpus(recs, path)
        assert data_io.load_corpus(path) == recs

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("")
        assert data_io.load_corpus(path) == []

    def test_duplicate(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "1", "reference": "a", "hypothesis": "b"}\n'
                        '{"id": "1", "reference": "a", "hypothesis": "b"}\n')
        with pytest.raises(DuplicateId) as err:
            data_io.load_corpus(path)
        assert err.value.location == 2

    @pytest.mark.parametrize("line", [
        "not json",
        '{"id": "1", "hypothesis": "b"}',
        '{"id": "1", "reference": " ", "hypothesis": "b"}',
        '["list"]',
    ])
    def test_malformed(self, tmp_path, line):
        path = tmp_path / "c.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(ParseError) as err:
            data_io.load_corpus(path)
        assert err.value.location == 1


class TestProsodyFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "p.txt"
        data = {"s1": [0, 1, 2], "s2": [0]}
        data_io.save_prosody(data, path)
        assert data_io.load_prosody(path) == data

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("# header\n\ns1 0 0\n")
        assert data_io.load_prosody(path) == {"s1": [0, 0]}

    def test_bad_intensity(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("s1 0 1\ns2 0 3\n")
        with pytest.raises(BadIntensity) as err:
            data_io.load_prosody(path)
        assert err.value.location == 2

    def test_duplicate(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("s1 0\ns1 1\n")
        with pytest.raises(DuplicateId):
            data_io.load_prosody(path)

    def test_not_int(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("s1 x\n")
        with pytest.raises(ParseError):
            data_io.load_prosody(path)


class TestGrid:
    def test_one_by_one(self, tmp_path):
        path = tmp_path / "g.tsv"
        heatmap_export([[1.0]], path)
        m, rows, cols = data_io.load_grid(path)
        assert m.tolist() == [[1.0]] and rows == ["0"] and cols == ["0"]

    def test_round_trip_exact(self, tmp_path):
        m = np.random.default_rng(0).normal(size=(4, 4))
        path = tmp_path / "g.tsv"
        data_io.save_grid(m, path, list("abcd"), list("wxyz"))
        back, rows, cols = data_io.load_grid(path)
        np.testing.assert_array_equal(back, m)
        assert rows == list("abcd") and cols == list("wxyz")

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("id\n")
        with pytest.raises(ParseError):
            data_io.load_grid(path)
        with pytest.raises(ValueError):
            data_io.save_grid(np.empty((0, 0)), path)


class TestSynthetic:
    def test_noiseless_scores_saturate(self):
        records, pairing = data_io.generate_synthetic(SynthesisConfig(20, 16, noise_sigma=0.0))
        assert all(silver_score(r.clip_embeddings, r.token_embeddings).scaled == 100.0
                   for r in records)
        assert pairing == [(r.id, r.id) for r in records]

    def test_shapes(self):
        records, _ = data_io.generate_synthetic(SynthesisConfig(50, 8, (2, 3), (4, 6), 0.1, 1))
        for r in records:
            assert 2 <= r.clip_embeddings.shape[0] <= 3 and 4 <= r.token_embeddings.shape[0] <= 6
            assert r.dim == 8
            np.testing.assert_allclose(np.linalg.norm(r.clip_embeddings, axis=1), 1.0)

    def test_deterministic_files(self, tmp_path):
        cfg = SynthesisConfig(30, 16, noise_sigma=0.2, seed=5)
        for name in ("a.slve", "b.slve"):
            data_io.save_embeddings(data_io.generate_synthetic(cfg)[0], tmp_path / name)
        assert (tmp_path / "a.slve").read_bytes() == (tmp_path / "b.slve").read_bytes()

    def test_cosine_decreases_with_noise(self):
        means = []
        for sigma in (0.0, 0.1, 0.5, 1.0):
            records, _ = data_io.generate_synthetic(SynthesisConfig(1000, 16, (1, 1), (1, 1), sigma, 2))
            means.append(np.mean([float(r.clip_embeddings[0] @ r.token_embeddings[0])
                                  for r in records]))
        assert means == sorted(means, reverse=True) and len(set(means)) == 4

    @pytest.mark.parametrize("kw", [dict(dim=1), dict(clips_range=(0, 2)),
                                    dict(tokens_range=(5, 2)), dict(noise_sigma=-1)])
    def test_invalid_config(self, kw):
        base = dict(n=3, dim=4)
        base.update(kw)
        with pytest.raises(ValueError):
            SynthesisConfig(**base)
