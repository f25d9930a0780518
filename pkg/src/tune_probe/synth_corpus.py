"""Synthetic tune corpus: F0 contours embedded in pseudo-latent frames.

A contour realizes a three-tone tune over the nuclear word: high targets
sit at base_f0 + range, low targets at base_f0. The pitch-accent target
is reached at 50% of the word's frames, the phrase-accent target at 75%
and the boundary tone at the final frame, with piecewise-linear
interpolation from a neutral onset (base + range/2) at frame 0. So the
first half of the word is shaped by the pitch accent and everything
after it by the edge tones.

Embedding maps the per-frame pair (speaker-normalized F0, its delta)
through a corpus-global random linear map into d dimensions, then adds
smoothed random-walk nuisance channels (a stand-in for phone and speaker
variation) and white noise. With zero nuisance and noise the frame
matrix has rank at most 2, so tune information is linearly decodable by
construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .latent_store import (
    DEFAULT_FRAME_RATE,
    LatentSequence,
    TUNES,
    UtteranceRecord,
    save_manifest,
    write_latents,
)

TONE_TARGET_FRACTIONS = (0.50, 0.75, 1.0)
ONSET_LEVEL = 0.5  # onset F0 as a fraction of the speaker's range

_SENTENCES = ("They followed Eleanor", "She mentioned Oliver", "He greeted Annabel")


@dataclass(frozen=True)
class SpeakerParams:
    base_f0: float
    range: float
    jitter_sd: float
    seed: int = 0

    def __post_init__(self):
        if not self.base_f0 > 0:
            raise ValueError(f"base_f0 must be positive, got {self.base_f0}")
        if not self.range > 0:
            raise ValueError(f"range must be positive, got {self.range}")
        if self.jitter_sd < 0:
            raise ValueError(f"jitter_sd must be >= 0, got {self.jitter_sd}")


@dataclass
class TuneContour:
    tune: str
    samples: np.ndarray  # (n_frames,) F0 in Hz, positive
    segment_bounds: tuple[int, int]  # (pitch-accent end, phrase-accent end)
    speaker: SpeakerParams


def _target_indices(n_frames: int, accent_frac: float, phrase_frac: float):
    last = n_frames - 1
    i1 = int(accent_frac * last + 0.5)
    i2 = int(phrase_frac * last + 0.5)
    i1 = min(max(i1, 1), last - 2)
    i2 = min(max(i2, i1 + 1), last - 1)
    return i1, i2, last


def synth_contour(
    tune: str,
    n_frames: int,
    spk: SpeakerParams,
    rng: np.random.Generator,
    accent_frac: float = TONE_TARGET_FRACTIONS[0],
    phrase_frac: float = TONE_TARGET_FRACTIONS[1],
    boundary_undershoot: float = 1.0,
) -> TuneContour:
    """Piecewise-linear F0 track for one tune over the nuclear word.

    ``boundary_undershoot`` scales how fully the final boundary target is
    realized: the last knot sits at phrase-accent level plus undershoot
    times the difference to the boundary level, so at 1.0 the target is
    hit exactly and near 0 the boundary is barely articulated. Corpus
    generation draws this (and the phrase-accent position) per utterance
    to mimic the variability of produced speech.
    """
    if tune not in TUNES:
        raise ValueError(f"unknown tune code {tune!r}")
    if n_frames < 6:
        raise ValueError(f"need at least 6 frames for three tone targets, got {n_frames}")
    if not 0.0 <= boundary_undershoot <= 1.0:
        raise ValueError(f"boundary_undershoot must be in [0, 1], got {boundary_undershoot}")
    i1, i2, i3 = _target_indices(n_frames, accent_frac, phrase_frac)
    levels = [spk.base_f0 + (spk.range if tone == "h" else 0.0) for tone in tune]
    levels[2] = levels[1] + boundary_undershoot * (levels[2] - levels[1])
    onset = spk.base_f0 + ONSET_LEVEL * spk.range
    knots_x = np.array([0, i1, i2, i3], dtype=np.float64)
    knots_y = np.array([onset, *levels], dtype=np.float64)
    samples = np.interp(np.arange(n_frames, dtype=np.float64), knots_x, knots_y)
    if spk.jitter_sd > 0:
        samples = samples + rng.normal(0.0, spk.jitter_sd, size=n_frames)
    samples = np.maximum(samples, 1.0)  # F0 stays positive
    return TuneContour(tune=tune, samples=samples, segment_bounds=(i1, i2), speaker=spk)


def _box_smooth(x: np.ndarray, width: int) -> np.ndarray:
    """Zero-padded moving average along axis 0, all columns at once."""
    half = width // 2
    padded = np.zeros((x.shape[0] + width, x.shape[1]))
    padded[half + 1 : half + 1 + x.shape[0]] = x
    csum = np.cumsum(padded, axis=0)
    return (csum[width:] - csum[:-width]) / width


def _normalized_track(
    contour: TuneContour,
    lead_frames: int,
    trail_frames: int,
    rng: np.random.Generator,
) -> np.ndarray:
    spk = contour.speaker
    f0n = (contour.samples - spk.base_f0) / spk.range
    jitter_n = spk.jitter_sd / spk.range
    lead = np.full(lead_frames, ONSET_LEVEL)
    trail = np.full(trail_frames, ONSET_LEVEL)
    if jitter_n > 0:
        if lead_frames:
            lead = lead + rng.normal(0.0, jitter_n, size=lead_frames)
        if trail_frames:
            trail = trail + rng.normal(0.0, jitter_n, size=trail_frames)
    return np.concatenate([lead, f0n, trail])


def embed_latents(
    contour: TuneContour,
    d: int,
    nuisance_dims: int,
    noise_sd: float,
    rng: np.random.Generator,
    embedding_seed,
    lead_frames: int = 0,
    trail_frames: int = 0,
    frame_rate: float = DEFAULT_FRAME_RATE,
    nuisance_step_sd: float = 0.05,
) -> LatentSequence:
    """Embed a contour (with optional neutral context frames) into d dims.

    ``embedding_seed`` fixes the corpus-global linear maps; ``rng`` drives
    everything utterance-specific (context jitter, nuisance walks, noise).
    """
    if d <= 2:
        raise ValueError(f"latent dim must exceed 2, got {d}")
    f0n = _normalized_track(contour, lead_frames, trail_frames, rng)
    delta = np.diff(f0n, prepend=f0n[0])
    feats = np.stack([f0n, delta], axis=1)  # (n, 2)

    emb_rng = np.random.default_rng(embedding_seed)
    signal_map = emb_rng.standard_normal((d, 2))
    signal_map /= np.linalg.norm(signal_map, axis=0, keepdims=True)
    frames = feats @ signal_map.T

    if nuisance_dims > 0:
        nuisance_map = emb_rng.standard_normal((d, nuisance_dims))
        nuisance_map /= np.linalg.norm(nuisance_map, axis=0, keepdims=True)
        walks = np.cumsum(
            rng.normal(0.0, nuisance_step_sd, size=(len(f0n), nuisance_dims)), axis=0
        )
        frames = frames + _box_smooth(walks, 5) @ nuisance_map.T
    if noise_sd > 0:
        frames = frames + rng.normal(0.0, noise_sd, size=frames.shape)

    seq = LatentSequence(frames.astype(np.float32), frame_rate=frame_rate)
    seq.validate()
    return seq


def make_speakers(n_speakers: int, seed: int) -> list[SpeakerParams]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    speakers = []
    for i in range(n_speakers):
        speakers.append(
            SpeakerParams(
                base_f0=float(rng.uniform(90.0, 250.0)),
                range=float(rng.uniform(60.0, 140.0)),
                jitter_sd=float(rng.uniform(1.5, 5.0)),
                seed=i,
            )
        )
    return speakers


def generate_corpus(
    out_dir: str | os.PathLike,
    n_speakers: int = 30,
    utts_per_speaker_per_tune: int = 20,
    d: int = 512,
    seed: int = 0,
    frame_rate: float = DEFAULT_FRAME_RATE,
    nuisance_dims: int = 24,
    noise_sd: float = 0.01,
    nuisance_step_sd: float = 0.1,
    word_frames: tuple[int, int] = (8, 20),
    context_frames: tuple[int, int] = (2, 5),
    phrase_frac_range: tuple[float, float] = (0.65, 0.85),
    boundary_undershoot_range: tuple[float, float] = (0.25, 1.0),
) -> str:
    """Write a balanced synthetic corpus and return the manifest path.

    Per utterance: a random word length, lead/trail neutral context, a
    jittered contour, and an embedded latent file. The phrase-accent
    position and the degree of boundary-tone undershoot are drawn per
    utterance, so tunes differing only in the boundary tone genuinely
    overlap, as they do in produced speech. Word intervals land exactly
    on frame boundaries so the frame-center rule recovers the generated
    word frames. Fully deterministic per seed: every utterance derives
    its generator from (seed, utterance ordinal).
    """
    if n_speakers < 1 or utts_per_speaker_per_tune < 1:
        raise ValueError("speaker and utterance counts must be positive")
    out_dir = os.fspath(out_dir)
    latents_dir = os.path.join(out_dir, "latents")
    os.makedirs(latents_dir, exist_ok=True)
    speakers = make_speakers(n_speakers, seed)
    embedding_seed = np.random.SeedSequence([seed, 2])

    records = []
    ordinal = 0
    for s, spk in enumerate(speakers):
        for tune in TUNES:
            for u in range(utts_per_speaker_per_tune):
                rng = np.random.default_rng(np.random.SeedSequence([seed, 1, ordinal]))
                n_word = int(rng.integers(word_frames[0], word_frames[1] + 1))
                lead = int(rng.integers(context_frames[0], context_frames[1] + 1))
                trail = int(rng.integers(context_frames[0], context_frames[1] + 1))
                contour = synth_contour(
                    tune, n_word, spk, rng,
                    phrase_frac=float(rng.uniform(*phrase_frac_range)),
                    boundary_undershoot=float(rng.uniform(*boundary_undershoot_range)),
                )
                seq = embed_latents(
                    contour, d, nuisance_dims, noise_sd, rng, embedding_seed,
                    lead_frames=lead, trail_frames=trail, frame_rate=frame_rate,
                    nuisance_step_sd=nuisance_step_sd,
                )
                uid = f"spk{s:02d}_{tune}_{u:03d}"
                path = os.path.join(latents_dir, f"{uid}.unquantized.ltnt")
                write_latents(seq, path)
                records.append(
                    UtteranceRecord(
                        id=uid,
                        tune=tune,
                        speaker=f"spk{s:02d}",
                        sentence=_SENTENCES[ordinal % len(_SENTENCES)],
                        origin="synthetic",
                        word_interval=(lead / frame_rate, (lead + n_word) / frame_rate),
                        streams={"unquantized": path},
                    )
                )
                ordinal += 1

    metadata = {
        "frame_rate": frame_rate,
        "unquantized_dim": d,
        "generator": {
            "seed": seed,
            "n_speakers": n_speakers,
            "utts_per_speaker_per_tune": utts_per_speaker_per_tune,
            "nuisance_dims": nuisance_dims,
            "noise_sd": noise_sd,
            "nuisance_step_sd": nuisance_step_sd,
            "word_frames": list(word_frames),
            "context_frames": list(context_frames),
            "phrase_frac_range": list(phrase_frac_range),
            "boundary_undershoot_range": list(boundary_undershoot_range),
        },
    }
    manifest_path = os.path.join(out_dir, "corpus.jsonl")
    save_manifest(records, metadata, manifest_path)
    return manifest_path
