import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tune_probe.latent_store import (
    HEADER_SIZE,
    CorpusValidationError,
    LatentFormatError,
    LatentSequence,
    UtteranceRecord,
    load_corpus,
    read_latents,
    save_manifest,
    write_latents,
    write_matrix,
)


def test_header_is_twenty_bytes_and_payload_row_major(tmp_path):
    path = tmp_path / "m.ltnt"
    seq = LatentSequence(np.array([[1.0, -1.0]], dtype=np.float32), frame_rate=12.5)
    write_latents(seq, path)
    raw = path.read_bytes()
    assert len(raw) == HEADER_SIZE + 8 == 28
    assert raw[:4] == b"LTNT"
    assert np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).tolist() == [1.0, -1.0]


def test_zero_frames_rejected_before_write(tmp_path):
    seq = LatentSequence(np.zeros((0, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        write_latents(seq, tmp_path / "bad.ltnt")
    assert not (tmp_path / "bad.ltnt").exists()


def test_write_read_identity(tmp_path):
    frames = np.random.default_rng(0).standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "m.ltnt"
    write_latents(LatentSequence(frames, frame_rate=12.5), path)
    back = read_latents(path)
    assert back.frame_rate == 12.5
    assert np.array_equal(back.frames, frames)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 9),
    d=st.integers(1, 17),
    seed=st.integers(0, 2**31 - 1),
)
def test_byte_exact_roundtrip_random_shapes(tmp_path_factory, n, d, seed):
    tmp = tmp_path_factory.mktemp("ltnt")
    frames = (
        np.random.default_rng(seed).standard_normal((n, d)).astype(np.float32) * 100
    )
    path = tmp / "m.ltnt"
    write_latents(LatentSequence(frames), path)
    assert np.array_equal(read_latents(path).frames, frames)
    # second write of the read-back data is byte identical
    path2 = tmp / "m2.ltnt"
    write_latents(read_latents(path), path2)
    assert path.read_bytes() == path2.read_bytes()


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "m.ltnt"
    write_matrix(np.ones((1, 1), dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(LatentFormatError, match="bad magic"):
        read_latents(path)


def test_read_rejects_version_mismatch(tmp_path):
    path = tmp_path / "m.ltnt"
    write_matrix(np.ones((1, 1), dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(LatentFormatError, match="version 99"):
        read_latents(path)


def test_read_reports_truncation_byte_counts(tmp_path):
    path = tmp_path / "m.ltnt"
    write_matrix(np.ones((2, 3), dtype=np.float32), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(LatentFormatError, match="expected 24 payload bytes, found 20"):
        read_latents(path)


def test_non_finite_rejected(tmp_path):
    seq = LatentSequence(np.array([[np.inf, 0.0]], dtype=np.float32))
    with pytest.raises(ValueError, match="non-finite"):
        write_latents(seq, tmp_path / "m.ltnt")


def _write_stream(tmp_path, name, n=3, d=8, rate=12.5):
    path = tmp_path / name
    frames = np.zeros((n, d), dtype=np.float32)
    write_latents(LatentSequence(frames, frame_rate=rate), path)
    return str(path)


def _record(tmp_path, uid, tune="lll", d=8, **overrides):
    rec = {
        "id": uid,
        "tune": tune,
        "speaker": "spk00",
        "sentence": "She mentioned Oliver",
        "origin": "synthetic",
        "word_interval": [0.2, 0.6],
        "streams": {"unquantized": _write_stream(tmp_path, f"{uid}.ltnt", d=d)},
    }
    rec.update(overrides)
    return rec


def _write_manifest(tmp_path, records, metadata=None):
    path = tmp_path / "corpus.jsonl"
    with open(path, "w") as fh:
        if metadata:
            fh.write(json.dumps({"metadata": metadata}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def test_two_valid_records(tmp_path):
    path = _write_manifest(
        tmp_path,
        [_record(tmp_path, "a"), _record(tmp_path, "b", tune="hhh")],
        metadata={"unquantized_dim": 8},
    )
    manifest = load_corpus(path)
    assert len(manifest.records) == 2
    assert manifest.records[0].tune == "lll"


def test_unknown_tune_names_record(tmp_path):
    path = _write_manifest(
        tmp_path, [_record(tmp_path, "a", tune="hhx")], metadata={"unquantized_dim": 8}
    )
    with pytest.raises(CorpusValidationError, match="record 'a'.*unknown tune code 'hhx'"):
        load_corpus(path)


def test_codeword_dim_mismatch(tmp_path):
    # codebook stream written at 512 while the manifest declares 256-d codewords
    rec = _record(tmp_path, "a", d=8)
    rec["streams"]["codebook0"] = _write_stream(tmp_path, "a.codebook0.ltnt", d=512)
    path = _write_manifest(
        tmp_path, [rec], metadata={"unquantized_dim": 8, "codeword_dim": 256}
    )
    with pytest.raises(
        CorpusValidationError, match="codebook0.*has dim 512.*declares 256"
    ):
        load_corpus(path)


def test_duplicate_id(tmp_path):
    path = _write_manifest(
        tmp_path,
        [_record(tmp_path, "a"), _record(tmp_path, "a")],
        metadata={"unquantized_dim": 8},
    )
    with pytest.raises(CorpusValidationError, match="duplicate id"):
        load_corpus(path)


def test_missing_stream_file(tmp_path):
    rec = _record(tmp_path, "a")
    rec["streams"]["unquantized"] = str(tmp_path / "gone.ltnt")
    path = _write_manifest(tmp_path, [rec], metadata={"unquantized_dim": 8})
    with pytest.raises(CorpusValidationError, match="file missing"):
        load_corpus(path)


def test_validation_verdicts_are_order_independent(tmp_path):
    records = [
        _record(tmp_path, "a", tune="hhx"),
        _record(tmp_path, "b"),
        _record(tmp_path, "c", word_interval=[0.9, 0.1]),
    ]
    meta = {"unquantized_dim": 8}
    path1 = _write_manifest(tmp_path, records, metadata=meta)
    errors1 = pytest.raises(CorpusValidationError, load_corpus, path1).value.errors
    path2 = tmp_path / "permuted.jsonl"
    lines = path1.read_text().splitlines()
    path2.write_text("\n".join([lines[0], lines[3], lines[1], lines[2]]) + "\n")
    errors2 = pytest.raises(CorpusValidationError, load_corpus, path2).value.errors
    assert errors1 == errors2


def test_manifest_roundtrip_relative_paths(tmp_path):
    path = _write_manifest(
        tmp_path, [_record(tmp_path, "a")], metadata={"unquantized_dim": 8}
    )
    manifest = load_corpus(path)
    out = tmp_path / "copy.jsonl"
    save_manifest(manifest.records, manifest.metadata, out)
    text = out.read_text()
    assert str(tmp_path) not in text.splitlines()[1]  # stored relative
    again = load_corpus(out)
    assert [r.id for r in again.records] == ["a"]
    assert os.path.isabs(again.records[0].streams["unquantized"])


def test_metadata_line_position_irrelevant(tmp_path):
    rec = _record(tmp_path, "a", d=8)
    path = tmp_path / "corpus.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps(rec) + "\n")
        fh.write(json.dumps({"metadata": {"unquantized_dim": 8}}) + "\n")
    manifest = load_corpus(path)
    assert manifest.metadata["unquantized_dim"] == 8


def test_record_roundtrip_to_json():
    rec = UtteranceRecord(
        id="x", tune="lhl", speaker="s", sentence="t", origin="imitated",
        word_interval=(0.1, 0.4), streams={"unquantized": "p.ltnt"},
    )
    assert rec.to_json_dict()["tune"] == "lhl"
