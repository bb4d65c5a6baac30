"""Random-vector-quantized feedback and the conventional CSI baseline.

Users feed back a codebook index for the direction of their selected path
gains plus an unquantized magnitude.  The baseline quantizes the full
stacked antenna channel the same way and precodes with regularized zero
forcing, which is what the gain-feedback scheme is competing against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import as_rng

__all__ = [
    "Codebook",
    "gen_rvq_codebook",
    "quantize_pgi",
    "reconstruct_pgi",
    "csi_bits_rule",
    "csi_baseline_feedback",
    "quantize_directions",
    "rzf_precoders",
    "rzf_precoder_array",
]


@dataclass
class Codebook:
    """Unit-norm quantization codewords, one per row, shape (2**bits, dim)."""

    words: np.ndarray
    bits: int

    def __post_init__(self) -> None:
        expected = 2 ** self.bits
        if self.words.shape[0] != expected:
            raise ValueError(
                f"codebook with bits={self.bits} needs {expected} words, "
                f"got {self.words.shape[0]}")

    @property
    def dim(self) -> int:
        return self.words.shape[1]


def gen_rvq_codebook(dim: int, bits: int, seed) -> Codebook:
    """Draw ``2**bits`` independent isotropic unit vectors in ``C^dim``.

    Each word consumes a contiguous slice of the seeded stream, so for a
    fixed seed the size-``2**b`` codebook is exactly the first ``2**b`` words
    of any larger one.  That nesting makes distortion monotone in ``bits``
    word-for-word, not just in distribution.
    """
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    rng = as_rng(seed)
    parts = rng.standard_normal((2 ** bits, dim, 2))
    words = parts[..., 0] + 1j * parts[..., 1]
    words /= np.linalg.norm(words, axis=1, keepdims=True)
    return Codebook(words=words, bits=bits)


def quantize_pgi(gains: np.ndarray, codebook: Codebook) -> tuple[int, float]:
    """Quantize a gain vector's direction; report (codeword index, magnitude).

    The index maximizes ``|g^H c_i|^2 / ||g||^2``; ties resolve to the
    smallest index.  A zero vector has no direction and raises.
    """
    gains = np.asarray(gains)
    magnitude = float(np.linalg.norm(gains))
    if magnitude == 0.0:
        raise ValueError("cannot quantize the direction of a zero gain vector")
    corr = np.abs(codebook.words.conj() @ gains) ** 2
    return int(np.argmax(corr)), magnitude


def reconstruct_pgi(index: int, magnitude: float, codebook: Codebook) -> np.ndarray:
    """Receiver-side reconstruction: magnitude times the indexed codeword."""
    return magnitude * codebook.words[index]


def csi_bits_rule(num_antennas: int, snr_db: float) -> float:
    """Feedback bits per user for full-CSI quantization to track array gain.

    The classic scaling ``(N - 1) / 3 * SNR_dB``: one third of a bit per
    spatial dimension per dB.  Returned unrounded.
    """
    return (num_antennas - 1) / 3.0 * snr_db


def csi_baseline_feedback(channel: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Quantize a stacked antenna channel like the gain feedback does.

    Same index-plus-magnitude protocol, but the codebook lives in the full
    stacked antenna dimension instead of the selected-path dimension.
    """
    index, magnitude = quantize_pgi(channel, codebook)
    return reconstruct_pgi(index, magnitude, codebook)


def quantize_directions(vectors: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Codeword indices for a batch of vectors, shape (T,) from (T, dim).

    Batched form of the index half of :func:`quantize_pgi`: per row, the
    codeword maximizing chordal alignment with the vector's direction, ties
    to the smallest index.  Rows must be nonzero.
    """
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot quantize a zero vector")
    scores = np.abs(vectors.conj() @ codebook.words.T) ** 2
    return np.argmax(scores, axis=1)


def rzf_precoders(channels: np.ndarray, noise_var: float, num_bs: int) -> np.ndarray:
    """Regularized zero-forcing columns from (possibly quantized) channels.

    ``channels`` is (dim, K) with one user's stacked channel per column.
    Columns of the result are ``H (H^H H + K noise_var I)^{-1}`` rescaled to
    norm sqrt(M) each, matching the per-user power of the gain-feedback
    precoders.
    """
    dim, num_users = channels.shape
    gram = channels.conj().T @ channels
    reg = gram + num_users * noise_var * np.eye(num_users)
    raw = channels @ np.linalg.solve(reg, np.eye(num_users))
    norms = np.linalg.norm(raw, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("regularized zero-forcing produced a zero precoder column")
    return raw * (np.sqrt(num_bs) / norms)[None, :]


def rzf_precoder_array(channels: np.ndarray, noise_var: float,
                       num_bs: int) -> np.ndarray:
    """Batched :func:`rzf_precoders` over a leading draw axis.

    ``channels`` is (T, dim, K); the regularized K x K solve runs once per
    draw through numpy's stacked solver.  Column scaling matches the
    single-draw function exactly.
    """
    draws, _, num_users = channels.shape
    gram = np.einsum("tdk,tdl->tkl", channels.conj(), channels)
    reg = gram + num_users * noise_var * np.eye(num_users)[None]
    raw = channels @ np.linalg.inv(reg)
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("regularized zero-forcing produced a zero precoder column")
    return raw * (np.sqrt(num_bs) / norms)[:, None, :]
