"""Decay-weighted pooling of a word's latent frames, and PCA reduction.

Pooling: given the frames (x_0 .. x_N) of the accented word, the pooled
vector is sum_i w_i x_i with

    w_i = exp(-delta_f * i - delta_b * (N - i)) / normalizer

so delta_f concentrates weight at the start of the word and delta_b at
the end; both zero recovers the plain average. Weights are computed with
max-subtraction so extreme rates stay finite.

PCA: eigen-decomposition of the d x d scatter matrix of the pooled
training vectors. Centering by the training mean is the default; the
uncentered scatter is available behind a flag. Eigenvalues are those of
the scatter matrix itself (no 1/n), sorted descending, and each basis
vector's sign is canonicalized so refits are reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .latent_store import LatentSequence, read_matrix, write_matrix
from .textgrid import WordInterval

_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class DecayConfig:
    delta_f: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        for name in ("delta_f", "delta_b"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, d), columns are principal directions
    eigenvalues: np.ndarray  # (d,), nonnegative, descending

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def frames_for_interval(
    seq: LatentSequence, interval: WordInterval | tuple[float, float]
) -> range:
    """Indices of the frames whose centers fall inside [tmin, tmax).

    Frame i is centered at (i + 0.5) / frame_rate. If no center lands in
    the interval, the single frame whose center is nearest the interval
    midpoint is returned. An interval with no overlap at all is an error.
    """
    if isinstance(interval, WordInterval):
        tmin, tmax = interval.tmin, interval.tmax
    else:
        tmin, tmax = float(interval[0]), float(interval[1])
    if not tmin < tmax:
        raise ValueError(f"empty interval [{tmin}, {tmax}]")
    if tmax <= 0.0 or tmin >= seq.duration:
        raise ValueError(
            f"interval [{tmin}, {tmax}] does not overlap the sequence "
            f"[0, {seq.duration}]"
        )
    centers = (np.arange(seq.n_frames) + 0.5) / seq.frame_rate
    inside = np.nonzero((centers >= tmin) & (centers < tmax))[0]
    if inside.size:
        return range(int(inside[0]), int(inside[-1]) + 1)
    nearest = int(np.argmin(np.abs(centers - (tmin + tmax) / 2.0)))
    return range(nearest, nearest + 1)


def decay_weights(n_last: int, cfg: DecayConfig) -> np.ndarray:
    """Normalized weights over indices 0..n_last."""
    if n_last < 0:
        raise ValueError(f"n_last must be >= 0, got {n_last}")
    i = np.arange(n_last + 1, dtype=np.float64)
    expo = -cfg.delta_f * i - cfg.delta_b * (n_last - i)
    expo -= expo.max()
    w = np.exp(expo)
    return w / w.sum()


def aggregate(
    seq: LatentSequence,
    indices: range | np.ndarray,
    cfg: DecayConfig = DecayConfig(),
) -> np.ndarray:
    """Weighted average of the selected frames, in float64."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("cannot aggregate an empty frame selection")
    frames = seq.frames[idx].astype(np.float64)
    w = decay_weights(idx.size - 1, cfg)
    return w @ frames


def pool_frames(frames: np.ndarray, cfg: DecayConfig = DecayConfig()) -> np.ndarray:
    """aggregate() for a bare (n, d) frame matrix."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] == 0:
        raise ValueError("cannot aggregate an empty frame selection")
    return decay_weights(frames.shape[0] - 1, cfg) @ frames


def fit_pca(training_vectors: np.ndarray, center: bool = True) -> PcaModel:
    """Fit PCA on pooled vectors stacked as rows of an (n, d) matrix.

    ``center=False`` decomposes the raw (uncentered) scatter and records
    a zero mean, for fidelity experiments against the centered default.
    """
    Y = np.asarray(training_vectors, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix, got shape {Y.shape}")
    n, d = Y.shape
    if n < 2:
        raise ValueError(f"PCA needs at least 2 training vectors, got {n}")
    mean = Y.mean(axis=0) if center else np.zeros(d)
    Yc = Y - mean
    scatter = Yc.T @ Yc
    eigvals, eigvecs = np.linalg.eigh(scatter)
    order = np.arange(d - 1, -1, -1)  # eigh is ascending
    eigvals = np.clip(eigvals[order], 0.0, None)
    basis = eigvecs[:, order]
    _canonicalize_signs(basis)
    return PcaModel(mean=mean, basis=basis, eigenvalues=eigvals)


def _canonicalize_signs(basis: np.ndarray) -> None:
    # First component above tolerance is made positive, in place.
    for k in range(basis.shape[1]):
        col = basis[:, k]
        nonzero = np.nonzero(np.abs(col) > _SIGN_TOL)[0]
        if nonzero.size and col[nonzero[0]] < 0:
            basis[:, k] = -col


def project(model: PcaModel, y: np.ndarray, d_pca: int) -> np.ndarray:
    """Coordinates of (y - mean) on the first d_pca basis columns.

    Accepts a single d-vector or an (n, d) batch.
    """
    if not 1 <= d_pca <= model.dim:
        raise ValueError(f"d_pca must be in [1, {model.dim}], got {d_pca}")
    y = np.asarray(y, dtype=np.float64)
    return (y - model.mean) @ model.basis[:, :d_pca]


def reconstruct(model: PcaModel, coords: np.ndarray) -> np.ndarray:
    """Inverse of project for however many coordinates are given."""
    coords = np.asarray(coords, dtype=np.float64)
    k = coords.shape[-1]
    if not 1 <= k <= model.dim:
        raise ValueError(f"got {k} coordinates for a dim-{model.dim} model")
    return coords @ model.basis[:, :k].T + model.mean


def save_pca(model: PcaModel, directory: str | os.PathLike) -> None:
    """Persist mean/basis/eigenvalues as matrix files (f32 on disk)."""
    os.makedirs(directory, exist_ok=True)
    write_matrix(model.mean[None, :], os.path.join(directory, "mean.ltnt"))
    write_matrix(model.basis, os.path.join(directory, "basis.ltnt"))
    write_matrix(
        model.eigenvalues[None, :], os.path.join(directory, "eigenvalues.ltnt")
    )


def load_pca(directory: str | os.PathLike) -> PcaModel:
    mean, _ = read_matrix(os.path.join(directory, "mean.ltnt"))
    basis, _ = read_matrix(os.path.join(directory, "basis.ltnt"))
    eigenvalues, _ = read_matrix(os.path.join(directory, "eigenvalues.ltnt"))
    return PcaModel(
        mean=mean[0].astype(np.float64),
        basis=basis.astype(np.float64),
        eigenvalues=eigenvalues[0].astype(np.float64),
    )
