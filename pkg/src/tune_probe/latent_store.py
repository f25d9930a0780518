"""Corpus interchange: binary latent matrices plus a line-record manifest.

Matrix files are little-endian throughout: 4-byte magic ``LTNT`` then
u32 format version, f32 frame rate (Hz; 0 marks a non-temporal matrix),
u32 dim, u32 row count, followed by the row-major f32 payload. The
payload is stored at 32-bit precision; all downstream math upcasts to
64-bit.

The manifest is JSON-lines so corpora can be concatenated or filtered
with shell tools. A line whose object carries a ``metadata`` key (and no
``id``) contributes free-form corpus metadata; every other line is one
utterance record. Stream paths are stored relative to the manifest and
resolved to absolute paths on load.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"LTNT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIfII")
HEADER_SIZE = _HEADER.size  # 20 bytes

TUNES = ("lll", "llh", "lhl", "lhh", "hll", "hlh", "hhl", "hhh")
ORIGINS = ("resynthesized", "imitated", "synthetic")
STREAM_UNQUANTIZED = "unquantized"

DEFAULT_UNQUANTIZED_DIM = 512
DEFAULT_CODEWORD_DIM = 256
DEFAULT_FRAME_RATE = 12.5


class LatentFormatError(ValueError):
    """Bad magic, version, or payload size in a matrix file."""


class CorpusValidationError(ValueError):
    """One or more problems found while loading a manifest."""

    def __init__(self, errors: list[str]):
        self.errors = sorted(errors)
        super().__init__(
            f"{len(self.errors)} corpus validation error(s):\n"
            + "\n".join(self.errors)
        )


@dataclass
class LatentSequence:
    """Per-utterance matrix of frame vectors at a fixed frame rate."""

    frames: np.ndarray  # (n_frames, dim) float32
    frame_rate: float = DEFAULT_FRAME_RATE

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def duration(self) -> float:
        return self.n_frames / self.frame_rate

    def validate(self) -> None:
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be 2-d, got shape {self.frames.shape}")
        if self.n_frames < 1 or self.dim < 1:
            raise ValueError(f"empty latent matrix: shape {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise ValueError("latent matrix contains non-finite entries")
        if not self.frame_rate > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate}")


def write_matrix(frames: np.ndarray, path: str | os.PathLike, frame_rate: float = 0.0) -> None:
    """Low-level writer; ``frame_rate`` 0 means the rows are not a time series."""
    arr = np.ascontiguousarray(frames, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2-d matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("refusing to write non-finite values")
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, float(frame_rate), d, n))
        fh.write(arr.tobytes())


def read_matrix(path: str | os.PathLike) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise LatentFormatError(
            f"{path}: file too short for a header ({len(raw)} bytes)"
        )
    magic, version, frame_rate, dim, n_frames = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise LatentFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise LatentFormatError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}"
        )
    expected = dim * n_frames * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise LatentFormatError(
            f"{path}: expected {expected} payload bytes, found {actual}"
        )
    frames = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(n_frames, dim)
    return frames.copy(), frame_rate


def read_header(path: str | os.PathLike) -> tuple[int, float, int, int]:
    """(version, frame_rate, dim, n_frames) without reading the payload."""
    with open(path, "rb") as fh:
        raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise LatentFormatError(
            f"{path}: file too short for a header ({len(raw)} bytes)"
        )
    magic, version, frame_rate, dim, n_frames = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise LatentFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise LatentFormatError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}"
        )
    return version, frame_rate, dim, n_frames


def write_latents(seq: LatentSequence, path: str | os.PathLike) -> None:
    seq.validate()
    write_matrix(seq.frames, path, frame_rate=seq.frame_rate)


def read_latents(path: str | os.PathLike) -> LatentSequence:
    frames, frame_rate = read_matrix(path)
    seq = LatentSequence(frames, frame_rate)
    seq.validate()
    return seq


@dataclass
class UtteranceRecord:
    id: str
    tune: str
    speaker: str
    sentence: str
    origin: str
    word_interval: tuple[float, float]
    streams: dict[str, str] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "tune": self.tune,
            "speaker": self.speaker,
            "sentence": self.sentence,
            "origin": self.origin,
            "word_interval": list(self.word_interval),
            "streams": dict(self.streams),
        }


_REQUIRED_FIELDS = ("id", "tune", "speaker", "sentence", "origin", "word_interval", "streams")


def _record_from_json(obj: dict, errors: list[str], lineno: int) -> UtteranceRecord | None:
    rid = obj.get("id")
    label = f"record {rid!r}" if rid else f"manifest line {lineno}"
    missing = [f for f in _REQUIRED_FIELDS if f not in obj]
    if missing:
        errors.append(f"{label}: missing field(s) {', '.join(missing)}")
        return None
    ok = True
    if obj["tune"] not in TUNES:
        errors.append(f"{label}: unknown tune code {obj['tune']!r}")
        ok = False
    if obj["origin"] not in ORIGINS:
        errors.append(f"{label}: unknown origin {obj['origin']!r}")
        ok = False
    wi = obj["word_interval"]
    if not (isinstance(wi, (list, tuple)) and len(wi) == 2):
        errors.append(f"{label}: word_interval must be a [tmin, tmax] pair")
        ok = False
    elif not float(wi[0]) < float(wi[1]):
        errors.append(f"{label}: word_interval tmin {wi[0]} must precede tmax {wi[1]}")
        ok = False
    if not isinstance(obj["streams"], dict) or not obj["streams"]:
        errors.append(f"{label}: streams must be a nonempty name->path map")
        ok = False
    if not ok:
        return None
    return UtteranceRecord(
        id=str(obj["id"]),
        tune=obj["tune"],
        speaker=str(obj["speaker"]),
        sentence=str(obj["sentence"]),
        origin=obj["origin"],
        word_interval=(float(wi[0]), float(wi[1])),
        streams={str(k): str(v) for k, v in obj["streams"].items()},
    )


@dataclass
class CorpusManifest:
    records: list[UtteranceRecord]
    metadata: dict = field(default_factory=dict)

    def by_id(self) -> dict[str, UtteranceRecord]:
        return {r.id: r for r in self.records}

    def stream_names(self) -> list[str]:
        names: list[str] = []
        for r in self.records:
            for s in r.streams:
                if s not in names:
                    names.append(s)
        return names

    @property
    def frame_rate(self) -> float:
        return float(self.metadata.get("frame_rate", DEFAULT_FRAME_RATE))


def expected_stream_dim(stream: str, metadata: dict) -> int | None:
    """Declared dim for a stream name, or None when nothing is declared."""
    if stream == STREAM_UNQUANTIZED:
        return int(metadata.get("unquantized_dim", DEFAULT_UNQUANTIZED_DIM))
    if stream.startswith("codebook") and stream[len("codebook") :].isdigit():
        return int(metadata.get("codeword_dim", DEFAULT_CODEWORD_DIM))
    return None


def load_corpus(manifest_path: str | os.PathLike, check_files: bool = True) -> CorpusManifest:
    """Load and validate a manifest.

    All problems are collected (duplicate ids, unknown tune codes, missing
    or malformed stream files, dim mismatches against the declared
    metadata) and raised together as CorpusValidationError, sorted so the
    verdict does not depend on record order.
    """
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    errors: list[str] = []
    records: list[UtteranceRecord] = []
    metadata: dict = {}
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                errors.append(f"manifest line {lineno}: invalid JSON ({e.msg})")
                continue
            if isinstance(obj, dict) and "metadata" in obj and "id" not in obj:
                metadata.update(obj["metadata"])
                continue
            if not isinstance(obj, dict):
                errors.append(f"manifest line {lineno}: expected an object")
                continue
            rec = _record_from_json(obj, errors, lineno)
            if rec is not None:
                rec.streams = {
                    k: v if os.path.isabs(v) else os.path.join(base, v)
                    for k, v in rec.streams.items()
                }
                records.append(rec)

    seen: dict[str, int] = {}
    for rec in records:
        seen[rec.id] = seen.get(rec.id, 0) + 1
    for rid, count in seen.items():
        if count > 1:
            errors.append(f"record {rid!r}: duplicate id ({count} occurrences)")

    if check_files:
        for rec in records:
            for stream, path in rec.streams.items():
                if not os.path.exists(path):
                    errors.append(
                        f"record {rec.id!r}: stream {stream!r} file missing: {path}"
                    )
                    continue
                try:
                    _, frame_rate, dim, n_frames = read_header(path)
                except LatentFormatError as e:
                    errors.append(f"record {rec.id!r}: stream {stream!r}: {e}")
                    continue
                want = expected_stream_dim(stream, metadata)
                if want is not None and dim != want:
                    errors.append(
                        f"record {rec.id!r}: stream {stream!r} has dim {dim}, "
                        f"manifest declares {want}"
                    )
                declared_rate = metadata.get("frame_rate")
                if declared_rate is not None and frame_rate > 0 and not np.isclose(
                    frame_rate, float(declared_rate), rtol=1e-6
                ):
                    errors.append(
                        f"record {rec.id!r}: stream {stream!r} frame rate "
                        f"{frame_rate} differs from declared {declared_rate}"
                    )

    if errors:
        raise CorpusValidationError(errors)
    return CorpusManifest(records, metadata)


def save_manifest(
    records: list[UtteranceRecord],
    metadata: dict,
    manifest_path: str | os.PathLike,
) -> None:
    """Write a manifest; stream paths are made relative to it when possible."""
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        if metadata:
            fh.write(json.dumps({"metadata": metadata}, sort_keys=True) + "\n")
        for rec in records:
            obj = rec.to_json_dict()
            obj["streams"] = {
                k: _relativize(v, base) for k, v in sorted(obj["streams"].items())
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def _relativize(path: str, base: str) -> str:
    try:
        rel = os.path.relpath(path, base)
    except ValueError:
        return path
    return path if rel.startswith("..") else rel
