"""Codec backends.

Every backend maps a 24 kHz mono waveform to the same stream geometry:
a 12.5 Hz sequence of 512-d continuous latents plus eight 256-d
codeword streams (one VQ branch, seven residual levels), all with equal
frame counts.

``spectral`` is a self-contained deterministic pseudo-codec (windowed
band energies behind fixed seeded projections and codebooks) so the
extraction pipeline can run and be tested without model weights.
``mimi`` adapts the pretrained Mimi checkpoint through transformers and
requires torch plus downloaded weights.
"""

from __future__ import annotations

import numpy as np

SAMPLE_RATE = 24_000
FRAME_RATE = 12.5
FRAME_STRIDE = int(SAMPLE_RATE / FRAME_RATE)  # 1920 samples
UNQUANTIZED_DIM = 512
CODEWORD_DIM = 256
N_CODEBOOKS = 8  # one VQ branch + seven residual levels


class CodecUnavailable(RuntimeError):
    """The requested backend cannot run in this environment."""


class SpectralStubCodec:
    """Deterministic stand-in with the real codec's geometry.

    Frames are non-overlapping windows of 1920 samples; features are log
    band energies over a geometric frequency grid, projected into 512
    dims by a fixed seeded map. Codeword streams quantize a fixed 256-d
    projection of the latent against fixed seeded unit-vector codebooks,
    residually for levels 1..7. No training, no state: identical input
    bytes give identical streams.
    """

    name = "spectral"
    _SEED = 0x5EED

    def __init__(self, n_bands: int = 64, codebook_size: int = 256):
        rng = np.random.default_rng(self._SEED)
        self.n_bands = n_bands
        self._n_fft = 4096
        edges = np.geomspace(50.0, 11_000.0, n_bands + 1)
        freqs = np.fft.rfftfreq(self._n_fft, d=1.0 / SAMPLE_RATE)
        self._band_of_bin = np.searchsorted(edges, freqs) - 1
        self._window = np.hanning(FRAME_STRIDE)
        self._to_latent = rng.standard_normal((UNQUANTIZED_DIM, n_bands))
        self._to_latent /= np.linalg.norm(self._to_latent, axis=0, keepdims=True)
        self._to_quant = rng.standard_normal((CODEWORD_DIM, UNQUANTIZED_DIM))
        self._to_quant /= np.linalg.norm(self._to_quant, axis=0, keepdims=True)
        self._codebooks = []
        for level in range(N_CODEBOOKS):
            words = rng.standard_normal((codebook_size, CODEWORD_DIM))
            words /= np.linalg.norm(words, axis=1, keepdims=True)
            words *= 2.0 ** (-level)  # residual levels shrink
            words[0] = 0.0  # zero word keeps residuals bounded
            self._codebooks.append(words)

    def _features(self, samples: np.ndarray) -> np.ndarray:
        n_frames = max(1, int(np.ceil(samples.size / FRAME_STRIDE)))
        padded = np.zeros(n_frames * FRAME_STRIDE)
        padded[: samples.size] = samples
        windows = padded.reshape(n_frames, FRAME_STRIDE) * self._window
        spectra = np.abs(np.fft.rfft(windows, n=self._n_fft, axis=1))
        bands = np.zeros((n_frames, self.n_bands))
        valid = (self._band_of_bin >= 0) & (self._band_of_bin < self.n_bands)
        np.add.at(bands.T, self._band_of_bin[valid], spectra[:, valid].T)
        return np.log1p(bands)

    def encode(self, samples: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """(unquantized (T, 512), [eight codeword-vector streams (T, 256)])."""
        latents = self._features(samples) @ self._to_latent.T
        proj = latents @ self._to_quant.T
        norms = np.linalg.norm(proj, axis=1, keepdims=True)
        proj = proj / np.maximum(norms, 1e-9)
        streams = []
        vq = self._codebooks[0]
        idx = np.argmin(
            ((proj[:, None, :] - vq[None, :, :]) ** 2).sum(-1), axis=1
        )
        streams.append(vq[idx])
        residual = proj.copy()
        for level in range(1, N_CODEBOOKS):
            words = self._codebooks[level]
            idx = np.argmin(
                ((residual[:, None, :] - words[None, :, :]) ** 2).sum(-1), axis=1
            )
            streams.append(words[idx])
            residual = residual - words[idx]
        return latents.astype(np.float32), [s.astype(np.float32) for s in streams]


class MimiCodec:
    """Pretrained Mimi through transformers.

    Needs torch, transformers with Mimi support, and the checkpoint
    (default kyutai/mimi) available locally or downloadable. Frame
    counts and dims are asserted at run time so an upstream API drift
    fails loudly instead of producing a malformed corpus.
    """

    name = "mimi"

    def __init__(self, checkpoint: str = "kyutai/mimi"):
        try:
            import torch
            from transformers import MimiModel
        except ImportError as exc:
            raise CodecUnavailable(
                f"mimi backend needs torch and transformers: {exc}"
            ) from exc
        try:
            self._model = MimiModel.from_pretrained(checkpoint)
        except Exception as exc:  # noqa: BLE001 - surface the checkpoint problem
            raise CodecUnavailable(
                f"cannot load Mimi checkpoint {checkpoint!r}: {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch

    def encode(self, samples: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        torch = self._torch
        model = self._model
        wav = torch.as_tensor(samples, dtype=torch.float32)[None, None, :]
        with torch.no_grad():
            emb = model.encoder(wav)
            emb = model.encoder_transformer(emb.transpose(1, 2))[0].transpose(1, 2)
            emb = model.downsample(emb)  # (1, 512, T)
            quantizer = model.quantizer
            semantic = quantizer.semantic_residual_vector_quantizer
            acoustic = quantizer.acoustic_residual_vector_quantizer
            sem_codes = semantic.encode(emb)  # (1, 1, T)
            aco_codes = acoustic.encode(emb, num_quantizers=N_CODEBOOKS - 1)
            streams = [
                semantic.layers[0].codebook.decode(sem_codes[0])[0].cpu().numpy()
            ]
            for level in range(N_CODEBOOKS - 1):
                words = acoustic.layers[level].codebook.decode(aco_codes[level])
                streams.append(words[0].cpu().numpy())
        latents = emb[0].transpose(0, 1).cpu().numpy()
        if latents.shape[1] != UNQUANTIZED_DIM:
            raise RuntimeError(f"unexpected latent dim {latents.shape[1]}")
        for s in streams:
            if s.shape != (latents.shape[0], CODEWORD_DIM):
                raise RuntimeError(f"unexpected codeword stream shape {s.shape}")
        return latents.astype(np.float32), [s.astype(np.float32) for s in streams]


def get_codec(identifier: str, checkpoint: str | None = None):
    if identifier == "spectral":
        return SpectralStubCodec()
    if identifier == "mimi":
        return MimiCodec(checkpoint or "kyutai/mimi")
    raise ValueError(f"unknown codec {identifier!r}; known: spectral, mimi")
