"""Closed-form feedback-quantization bounds.

Everything here is analytic: the expected squared correlation of a random
vector quantizer, the normalized signal-power distortion it induces through
a selected-path coupling matrix, the per-user rate-gap bound that follows,
its exact inverse (bits needed for a target gap), and a single-cell rate
lower bound.  Monte Carlo counterparts live in :mod:`cellfree_pgi.rates`.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betaln

__all__ = [
    "rvq_gamma",
    "delta_factor",
    "distortion_closed_form",
    "distortion_bound",
    "rate_gap_bound",
    "bits_for_rate_gap",
    "single_cell_rate_bound",
]

_DEGENERATE_SCALE = 1e-12


def _check_dim(dim: int) -> None:
    if dim < 2:
        raise ValueError(f"quantized dimension must be >= 2, got {dim}")


def rvq_gamma(bits: float, dim: int) -> float:
    """Expected squared codeword correlation of a random vector quantizer.

    A size-``2**bits`` codebook of independent isotropic unit vectors in
    ``C^dim`` quantizing an isotropic direction attains

        gamma = 1 - 2**bits * Beta(2**bits, dim / (dim - 1)),

    evaluated through log-gamma so large codebooks cannot overflow.  Strictly
    increasing in ``bits``; equals ``1/dim`` at zero bits.
    """
    _check_dim(dim)
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    words = 2.0 ** bits
    return 1.0 - float(np.exp(bits * np.log(2.0) + betaln(words, dim / (dim - 1.0))))


def delta_factor(steering_blocks, precoder_blocks) -> tuple[float, bool]:
    """Spread-to-coherent power ratio of the selected-path coupling.

    ``delta = sum_m ||A_m^H V_m||_F^2 / |sum_m tr(A_m^H V_m)|^2`` where the
    blocks hold only the selected steering columns and their precoding
    columns.  Always >= 1 / (total selected paths) by Cauchy-Schwarz.  When
    the coherent trace nearly cancels (below ``1e-12`` of the accumulated
    Frobenius mass) the ratio is meaningless; the flag marks that case and
    the returned value is ``inf`` if the trace is exactly zero.
    """
    trace_sum = 0.0 + 0.0j
    fro_sq = 0.0
    fro = 0.0
    for a_blk, v_blk in zip(steering_blocks, precoder_blocks):
        coupling = a_blk.conj().T @ v_blk
        trace_sum += np.trace(coupling)
        fro_sq += float(np.sum(np.abs(coupling) ** 2))
        fro += float(np.linalg.norm(coupling))
    degenerate = abs(trace_sum) < _DEGENERATE_SCALE * fro
    coherent = abs(trace_sum) ** 2
    value = np.inf if coherent == 0.0 else fro_sq / coherent
    return float(value), bool(degenerate)


def distortion_closed_form(dim: int, bits: float, delta: float) -> float:
    """Exact expected normalized signal-power distortion of quantized gains.

        (1 - gamma) * (dim - delta) / ((dim - 1) * (1 + delta))

    Negative values are possible for adversarial couplings (delta > dim,
    where quantization accidentally helps) and are returned unclamped.
    """
    _check_dim(dim)
    gamma = rvq_gamma(bits, dim)
    return (1.0 - gamma) * (dim - delta) / ((dim - 1.0) * (1.0 + delta))


def distortion_bound(dim: int, bits: float, delta: float) -> tuple[float, float, float]:
    """(closed form, correlation-bound form, dimension-only form).

    The middle value replaces ``1 - gamma`` with its upper bound
    ``2**(-bits/(dim-1))``; the last drops the coupling factor entirely.
    The triple is ordered ascending whenever ``delta`` lies in
    ``[1/dim, dim]``.
    """
    _check_dim(dim)
    closed = distortion_closed_form(dim, bits, delta)
    complement = 2.0 ** (-bits / (dim - 1.0))
    shaped = complement * (dim - delta) / ((dim - 1.0) * (1.0 + delta))
    return closed, shaped, complement


def rate_gap_bound(dim: int, bits: float, delta: float, snr: float) -> float:
    """Per-user rate-gap bound (bits/s/Hz) of finite-rate gain feedback.

    ``snr`` is the linear received signal-to-noise ratio of the quantized
    system.  Raises when the denominator ``(dim-1)(1+delta) -
    2**(-bits/(dim-1)) (dim-delta)`` is not positive, i.e. when the codebook
    is too coarse for this bound to give a finite guarantee.
    """
    _check_dim(dim)
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    shrink = 2.0 ** (-bits / (dim - 1.0))
    denom = (dim - 1.0) * (1.0 + delta) - shrink * (dim - delta)
    if denom <= 0.0:
        raise ValueError(
            f"gap bound infeasible: {bits} bits cannot bound dimension {dim} "
            f"at delta={delta:.6g}")
    gain = snr / (1.0 + snr)
    return float(np.log2(1.0 + gain * shrink * (dim - delta) / denom))


def bits_for_rate_gap(dim: int, delta: float, snr: float, gap_factor: float) -> float:
    """Bits per user keeping the rate gap at ``log2(gap_factor)``.

    Exact inverse of :func:`rate_gap_bound` in ``bits``:

        B = (dim - 1) * [log2(snr / ((snr + 1)(gap_factor - 1)) + 1)
                         + log2((dim - delta) / ((dim - 1)(1 + delta)))].

    Any ``gap_factor > 1`` is attainable because the bound decreases to zero
    as the bit count grows.
    """
    _check_dim(dim)
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    if gap_factor <= 1.0:
        raise ValueError(
            f"gap_factor must exceed 1 (a positive gap), got {gap_factor}")
    if not 0 < delta < dim:
        raise ValueError(f"delta must lie in (0, {dim}) to invert, got {delta}")
    gain = snr / (1.0 + snr)
    return float((dim - 1.0) * (np.log2(gain / (gap_factor - 1.0) + 1.0)
                                + np.log2((dim - delta) / ((dim - 1.0) * (1.0 + delta)))))


def single_cell_rate_bound(dim: int, bits: float, delta: float,
                           noise_var: float, snr: float) -> float:
    """Rate lower bound for one base station with orthonormal steering columns.

    The coherent-plus-spread signal power of the optimal precoder is exactly
    ``dim + 1`` in that geometry, so the ideal rate is at least
    ``log2(1 + (dim + 1) / noise_var)``; subtracting the feedback gap bound
    gives a guarantee for the quantized system.  May be negative for very
    coarse codebooks; returned unclamped.
    """
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    ideal = float(np.log2(1.0 + (dim + 1.0) / noise_var))
    return ideal - rate_gap_bound(dim, bits, delta, snr)
