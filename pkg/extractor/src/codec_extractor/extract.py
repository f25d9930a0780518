"""Batch extraction: audio + TextGrid + label table -> corpus directory.

Directory contract: for every row of the label table there is an
``<id>.wav`` under the audio dir and an ``<id>.TextGrid`` under the
textgrid dir. Utterances that fail (unreadable audio, codec failure,
missing or bad alignment) are logged and skipped; the job continues and
the manifest lists only the successes.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

from . import audio, codecs, store, textgrids

logger = logging.getLogger(__name__)

TUNES = ("lll", "llh", "lhl", "lhh", "hll", "hlh", "hhl", "hhh")


@dataclass
class ExtractionJob:
    audio_dir: str
    textgrid_dir: str
    labels_path: str
    out_dir: str
    codec: str = "spectral"
    checkpoint: str | None = None
    tier: str = "words"
    origin: str = "imitated"


@dataclass
class ExtractionResult:
    manifest_path: str
    extracted: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)


def read_label_table(path: str) -> list[dict]:
    """CSV with header id,tune,speaker,sentence."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "tune", "speaker", "sentence"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: label table lacks column(s) {sorted(missing)}")
        for row in reader:
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty label table")
    return rows


def run_extraction(job: ExtractionJob) -> ExtractionResult:
    codec = codecs.get_codec(job.codec, job.checkpoint)
    labels = read_label_table(job.labels_path)
    latents_dir = os.path.join(job.out_dir, "latents")
    os.makedirs(latents_dir, exist_ok=True)

    records = []
    result = ExtractionResult(manifest_path=os.path.join(job.out_dir, "corpus.jsonl"))
    for row in labels:
        uid = row["id"]
        try:
            records.append(_extract_one(job, codec, row, latents_dir))
            result.extracted.append(uid)
        except Exception as exc:  # noqa: BLE001 - one bad utterance must not stop the batch
            result.failed[uid] = f"{type(exc).__name__}: {exc}"
            logger.warning("skipping %s: %s", uid, result.failed[uid])

    if not records:
        raise RuntimeError(
            f"no utterance could be extracted; first failure: "
            f"{next(iter(result.failed.values()), 'none')}"
        )
    metadata = {
        "frame_rate": codecs.FRAME_RATE,
        "unquantized_dim": codecs.UNQUANTIZED_DIM,
        "codeword_dim": codecs.CODEWORD_DIM,
        "codec": job.codec,
    }
    store.write_manifest(records, metadata, result.manifest_path)
    logger.info(
        "extracted %d utterance(s), skipped %d", len(result.extracted), len(result.failed)
    )
    return result


def _extract_one(job: ExtractionJob, codec, row: dict, latents_dir: str) -> dict:
    uid = row["id"]
    if row["tune"] not in TUNES:
        raise ValueError(f"unknown tune code {row['tune']!r}")
    wav_path = os.path.join(job.audio_dir, f"{uid}.wav")
    grid_path = os.path.join(job.textgrid_dir, f"{uid}.TextGrid")
    if not os.path.exists(grid_path):
        raise FileNotFoundError(f"missing alignment {grid_path}")
    samples, rate = audio.load_wav(wav_path)
    samples = audio.resample(samples, rate, codecs.SAMPLE_RATE)
    tmin, tmax = textgrids.final_word_interval(grid_path, job.tier)

    latents, codeword_streams = codec.encode(samples)
    n_frames = latents.shape[0]
    streams: dict[str, str] = {}
    path = os.path.join(latents_dir, f"{uid}.unquantized.ltnt")
    store.write_ltnt(latents, path, codecs.FRAME_RATE)
    streams["unquantized"] = path
    for level, words in enumerate(codeword_streams):
        if words.shape[0] != n_frames:
            raise RuntimeError(
                f"codebook{level} frame count {words.shape[0]} != {n_frames}"
            )
        path = os.path.join(latents_dir, f"{uid}.codebook{level}.ltnt")
        store.write_ltnt(words, path, codecs.FRAME_RATE)
        streams[f"codebook{level}"] = path
    return {
        "id": uid,
        "tune": row["tune"],
        "speaker": row["speaker"],
        "sentence": row["sentence"],
        "origin": job.origin,
        "word_interval": [tmin, tmax],
        "streams": streams,
    }
