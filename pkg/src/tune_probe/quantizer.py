"""k-means vector quantization and residual vector quantization.

A fitted codec mirrors the geometry of a neural codec's quantizer: one
standalone VQ codebook (level 0) trained on the raw frames, and a stack
of residual codebooks (levels 1..L) where level j is trained on what is
left after subtracting the codewords of levels 1..j-1.

With the zero-codeword guard (default on) every residual codebook pins
row 0 to the zero vector and never updates it, so encoding a residual
can never make it worse; per-sample residual norms are then monotonically
non-increasing across levels.

Fitting is plain Lloyd's with k-means++ seeding, deterministic per seed.
Final codewords are rounded to f32 so a codec encodes identically before
and after a save/load round-trip.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .latent_store import (
    LatentSequence,
    load_corpus,
    read_latents,
    read_matrix,
    save_manifest,
    write_latents,
    write_matrix,
)

_ENCODE_CHUNK = 16384


@dataclass
class Codebook:
    codewords: np.ndarray  # (K, d) float64, f32-representable values
    trained: bool = True

    @property
    def k(self) -> int:
        return self.codewords.shape[0]

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]


@dataclass
class RvqCodec:
    vq: Codebook
    rvq_levels: list[Codebook]
    zero_codeword_guard: bool = True

    @property
    def levels(self) -> int:
        return len(self.rvq_levels)

    @property
    def k(self) -> int:
        return self.vq.k

    @property
    def dim(self) -> int:
        return self.vq.dim


@dataclass
class QuantizedFrame:
    """Codeword choices for one frame: index 0 is the parallel VQ branch,
    indices 1..L the residual hierarchy."""

    indices: np.ndarray  # (L+1,) int
    codeword_vectors: np.ndarray  # (L+1, d)


def _count_distinct(vectors: np.ndarray, needed: int) -> int:
    """Number of distinct rows, counting stops once ``needed`` is reached."""
    seen: set[bytes] = set()
    for row in vectors:
        seen.add(row.tobytes())
        if len(seen) >= needed:
            break
    return len(seen)


def _nearest(vectors: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    """Index of the nearest codeword per row; ties go to the lowest index."""
    n = vectors.shape[0]
    out = np.empty(n, dtype=np.int64)
    c_sq = np.einsum("kd,kd->k", codewords, codewords)
    for start in range(0, n, _ENCODE_CHUNK):
        chunk = vectors[start : start + _ENCODE_CHUNK]
        # ||x||^2 is constant per row, argmin only needs the cross terms.
        d2 = c_sq[None, :] - 2.0 * (chunk @ codewords.T)
        out[start : start + _ENCODE_CHUNK] = np.argmin(d2, axis=1)
    return out


def _cluster_means(vectors: np.ndarray, assign: np.ndarray, k: int):
    order = np.argsort(assign, kind="stable")
    sorted_vecs = vectors[order]
    counts = np.bincount(assign, minlength=k)
    nonempty = counts > 0
    # reduceat over the segment starts of the clusters that have members.
    starts = np.concatenate(([0], np.cumsum(counts[nonempty])[:-1]))
    segment_sums = np.add.reduceat(sorted_vecs, starts, axis=0)
    means = np.zeros((k, vectors.shape[1]))
    means[nonempty] = segment_sums / counts[nonempty, None]
    return means, counts


def _kmeans_pp_init(
    vectors: np.ndarray, k: int, rng: np.random.Generator, pinned_zero: bool
) -> np.ndarray:
    n, d = vectors.shape
    x_sq = np.einsum("nd,nd->n", vectors, vectors)
    centers = np.empty((k, d))
    if pinned_zero:
        centers[0] = 0.0
        d2 = x_sq.copy()
    else:
        centers[0] = vectors[rng.integers(n)]
        d2 = np.maximum(
            x_sq - 2.0 * (vectors @ centers[0]) + centers[0] @ centers[0], 0.0
        )
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            # All points coincide with chosen centers; any pick works.
            idx = int(rng.integers(n))
        centers[j] = vectors[idx]
        cand = np.maximum(
            x_sq - 2.0 * (vectors @ centers[j]) + centers[j] @ centers[j], 0.0
        )
        np.minimum(d2, cand, out=d2)
    return centers


def kmeans_fit(
    vectors: np.ndarray,
    k: int,
    iters: int = 25,
    seed: int = 0,
    pinned_zero: bool = False,
) -> Codebook:
    """Fit a codebook with k-means++ then Lloyd iterations.

    Runs for ``iters`` rounds or until the assignment reaches a fixpoint.
    Empty clusters are reseeded to the point farthest from its assigned
    center. With ``pinned_zero`` row 0 stays the zero vector throughout.
    Deterministic for a fixed (data, k, iters, seed).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError(f"expected (n, d) training vectors, got {vectors.shape}")
    if k < 1:
        raise ValueError(f"codebook size must be >= 1, got {k}")
    if _count_distinct(vectors, k) < k:
        raise ValueError(f"need at least {k} distinct vectors to fit {k} codewords")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(vectors, k, rng, pinned_zero)
    prev_assign = None
    first_mutable = 1 if pinned_zero else 0
    for _ in range(iters):
        assign = _nearest(vectors, centers)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        means, counts = _cluster_means(vectors, assign, k)
        centers[first_mutable:] = np.where(
            counts[first_mutable:, None] > 0,
            means[first_mutable:],
            centers[first_mutable:],
        )
        empty = np.nonzero(counts[first_mutable:] == 0)[0] + first_mutable
        if empty.size:
            diff = vectors - centers[assign]
            point_d2 = np.einsum("nd,nd->n", diff, diff)
            for row in empty:
                far = int(np.argmax(point_d2))
                centers[row] = vectors[far]
                point_d2[far] = 0.0
        prev_assign = assign
    centers = centers.astype(np.float32).astype(np.float64)
    if pinned_zero:
        centers[0] = 0.0
    return Codebook(codewords=centers, trained=True)


def _degenerate_codebook(vectors: np.ndarray, k: int, pinned_zero: bool) -> Codebook:
    # Residual stages can collapse below k distinct values; enumerate what
    # is there and pad with zero rows (ties resolve to the lowest index,
    # so padding rows are never selected over row 0).
    distinct = np.unique(vectors, axis=0)
    centers = np.zeros((k, vectors.shape[1]))
    if pinned_zero:
        nonzero = distinct[np.any(distinct != 0.0, axis=1)]
        centers[1 : 1 + len(nonzero)] = nonzero[: k - 1]
    else:
        centers[: len(distinct)] = distinct[:k]
    centers = centers.astype(np.float32).astype(np.float64)
    return Codebook(codewords=centers, trained=True)


def vq_encode(cb: Codebook, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Nearest codeword by squared Euclidean distance (lowest index wins ties)."""
    if not cb.trained:
        raise ValueError("codebook is not trained")
    x = np.asarray(x, dtype=np.float64)
    idx = int(_nearest(x[None, :], cb.codewords)[0])
    return idx, cb.codewords[idx].copy()


def vq_encode_batch(cb: Codebook, xs: np.ndarray) -> np.ndarray:
    if not cb.trained:
        raise ValueError("codebook is not trained")
    return _nearest(np.asarray(xs, dtype=np.float64), cb.codewords)


def rvq_fit(
    vectors: np.ndarray,
    levels: int,
    k: int,
    iters: int = 25,
    seed: int = 0,
    zero_codeword_guard: bool = True,
) -> RvqCodec:
    """Fit the parallel VQ codebook and the residual hierarchy.

    Level j (1-based) is fit with seed ``seed + j - 1`` on the residuals
    left by levels 1..j-1; the VQ branch uses ``seed + levels`` on the raw
    vectors. Residual stages whose inputs have collapsed below k distinct
    values are constructed directly instead of iterated.
    """
    if levels < 1:
        raise ValueError(f"need at least one residual level, got {levels}")
    vectors = np.asarray(vectors, dtype=np.float64)
    vq = kmeans_fit(vectors, k, iters=iters, seed=seed + levels)
    residual = vectors.copy()
    rvq_levels: list[Codebook] = []
    for j in range(1, levels + 1):
        if _count_distinct(residual, k) < k:
            if j == 1:
                raise ValueError(
                    f"need at least {k} distinct vectors to fit {k} codewords"
                )
            cb = _degenerate_codebook(residual, k, zero_codeword_guard)
        else:
            cb = kmeans_fit(
                residual, k, iters=iters, seed=seed + j - 1,
                pinned_zero=zero_codeword_guard,
            )
        rvq_levels.append(cb)
        assign = _nearest(residual, cb.codewords)
        residual = residual - cb.codewords[assign]
    return RvqCodec(vq=vq, rvq_levels=rvq_levels, zero_codeword_guard=zero_codeword_guard)


def rvq_encode(codec: RvqCodec, x: np.ndarray) -> QuantizedFrame:
    """Greedy per-level encoding, plus the parallel VQ index."""
    frames = rvq_encode_batch(codec, np.asarray(x, dtype=np.float64)[None, :])
    return QuantizedFrame(
        indices=frames[0][0], codeword_vectors=frames[1][0]
    )


def rvq_encode_batch(codec: RvqCodec, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(indices (n, L+1), codeword vectors (n, L+1, d)) for a frame batch."""
    xs = np.asarray(xs, dtype=np.float64)
    n = xs.shape[0]
    indices = np.empty((n, codec.levels + 1), dtype=np.int64)
    vectors = np.empty((n, codec.levels + 1, codec.dim))
    indices[:, 0] = vq_encode_batch(codec.vq, xs)
    vectors[:, 0] = codec.vq.codewords[indices[:, 0]]
    residual = xs.copy()
    for j, cb in enumerate(codec.rvq_levels, start=1):
        assign = _nearest(residual, cb.codewords)
        indices[:, j] = assign
        vectors[:, j] = cb.codewords[assign]
        residual -= cb.codewords[assign]
    return indices, vectors


def reconstruct(codec: RvqCodec, frame: QuantizedFrame, up_to_level: int) -> np.ndarray:
    """Sum of the residual-branch codewords for levels 1..up_to_level."""
    if not 1 <= up_to_level <= codec.levels:
        raise ValueError(
            f"up_to_level must be in [1, {codec.levels}], got {up_to_level}"
        )
    return frame.codeword_vectors[1 : up_to_level + 1].sum(axis=0)


def save_codec(codec: RvqCodec, directory: str | os.PathLike) -> None:
    os.makedirs(directory, exist_ok=True)
    write_matrix(codec.vq.codewords, os.path.join(directory, "vq.ltnt"))
    for j, cb in enumerate(codec.rvq_levels, start=1):
        write_matrix(cb.codewords, os.path.join(directory, f"rvq{j}.ltnt"))
    meta = {
        "k": codec.k,
        "dim": codec.dim,
        "levels": codec.levels,
        "zero_codeword_guard": codec.zero_codeword_guard,
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_codec(directory: str | os.PathLike) -> RvqCodec:
    with open(os.path.join(directory, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    vq_words, _ = read_matrix(os.path.join(directory, "vq.ltnt"))
    levels = []
    for j in range(1, meta["levels"] + 1):
        words, _ = read_matrix(os.path.join(directory, f"rvq{j}.ltnt"))
        levels.append(Codebook(words.astype(np.float64), trained=True))
    return RvqCodec(
        vq=Codebook(vq_words.astype(np.float64), trained=True),
        rvq_levels=levels,
        zero_codeword_guard=bool(meta["zero_codeword_guard"]),
    )


def quantize_corpus(
    manifest_path: str | os.PathLike,
    out_dir: str | os.PathLike,
    levels: int = 7,
    k: int = 512,
    iters: int = 20,
    seed: int = 0,
    fit_samples: int = 16384,
    cumulative: bool = False,
    manifest_name: str = "corpus.quantized.jsonl",
) -> str:
    """Fit an RVQ codec on a corpus's unquantized frames and emit the
    codebook streams.

    The codec is fit on a seeded subsample of at most ``fit_samples``
    frames, saved under out_dir/codec, then every utterance is encoded.
    Stream ``codebook0`` holds the VQ branch's codeword per frame and
    ``codebookJ`` (J >= 1) the level-J residual codeword; with
    ``cumulative`` those become partial-sum reconstructions instead.
    Returns the path of the augmented manifest.
    """
    manifest = load_corpus(manifest_path, check_files=False)
    out_dir = os.fspath(out_dir)
    latents_dir = os.path.join(out_dir, "latents")
    os.makedirs(latents_dir, exist_ok=True)

    records = sorted(manifest.records, key=lambda r: r.id)
    sequences: list[LatentSequence] = [
        read_latents(rec.streams["unquantized"]) for rec in records
    ]
    all_frames = np.concatenate([seq.frames for seq in sequences], axis=0)
    total = all_frames.shape[0]
    if fit_samples < total:
        pick = np.random.default_rng(seed).choice(total, size=fit_samples, replace=False)
        fit_vectors = all_frames[np.sort(pick)].astype(np.float64)
    else:
        fit_vectors = all_frames.astype(np.float64)
    del all_frames

    codec = rvq_fit(fit_vectors, levels=levels, k=k, iters=iters, seed=seed)
    del fit_vectors
    save_codec(codec, os.path.join(out_dir, "codec"))

    # Encode in utterance groups to bound memory.
    group_size = 256
    new_records = []
    for start in range(0, len(records), group_size):
        group = records[start : start + group_size]
        group_seqs = sequences[start : start + group_size]
        frames = np.concatenate([s.frames for s in group_seqs]).astype(np.float64)
        bounds = np.cumsum([0] + [s.n_frames for s in group_seqs])
        per_level = np.empty((frames.shape[0], levels + 1, codec.dim), dtype=np.float32)
        per_level[:, 0] = codec.vq.codewords[vq_encode_batch(codec.vq, frames)]
        residual = frames
        running = np.zeros_like(frames)
        for j, cb in enumerate(codec.rvq_levels, start=1):
            assign = _nearest(residual, cb.codewords)
            chosen = cb.codewords[assign]
            residual = residual - chosen
            running += chosen
            per_level[:, j] = (running if cumulative else chosen).astype(np.float32)
        for rec, (lo, hi) in zip(group, zip(bounds[:-1], bounds[1:])):
            streams = dict(rec.streams)
            for j in range(levels + 1):
                path = os.path.join(latents_dir, f"{rec.id}.codebook{j}.ltnt")
                write_latents(
                    LatentSequence(per_level[lo:hi, j], frame_rate=manifest.frame_rate),
                    path,
                )
                streams[f"codebook{j}"] = path
            new_records.append(dataclasses.replace(rec, streams=streams))

    metadata = dict(manifest.metadata)
    metadata["codeword_dim"] = codec.dim
    metadata["quantizer"] = {
        "levels": levels, "k": k, "iters": iters, "seed": seed,
        "fit_samples": fit_samples, "cumulative": cumulative,
    }
    out_manifest = os.path.join(out_dir, manifest_name)
    save_manifest(new_records, metadata, out_manifest)
    return out_manifest
