"""Departure-angle estimation from uplink snapshots (MUSIC on a ULA).

Angle reciprocity lets the base station reuse uplink angle estimates for the
downlink.  The estimator is classic subspace MUSIC: eigendecompose the sample
covariance, scan the pseudo-spectrum ``1 / ||E_n^H a(theta)||^2`` on a fine
grid, then refine each peak with one parabolic interpolation step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import as_rng, draw_gains, steering_matrix

__all__ = [
    "sample_covariance",
    "MusicSpectrum",
    "music_spectrum",
    "AodEstimate",
    "estimate_aods",
    "synth_uplink_snapshots",
]

GRID_STEP_DEG = 0.1
_FLOOR_SCALE = 1e-12


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """Average outer products of snapshots, shape (T, N) -> (N, N) Hermitian.

    Snapshots sit in rows, so the average of ``x x^H`` is ``X^T conj(X)``;
    the transposed-conjugate alternative is the covariance's conjugate and
    would mirror every spectrum angle.
    """
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 2:
        raise ValueError(f"snapshots must be (T, N), got shape {snapshots.shape}")
    t = snapshots.shape[0]
    cov = snapshots.T @ snapshots.conj() / t
    return (cov + cov.conj().T) / 2.0


@dataclass
class MusicSpectrum:
    """Pseudo-spectrum samples over a strictly increasing angle grid (radians)."""

    angles: np.ndarray
    values: np.ndarray


def _grid(step_deg: float) -> np.ndarray:
    # Open interval (-90, 90) degrees: endpoints alias each other on a ULA.
    steps = int(round(180.0 / step_deg))
    return np.deg2rad(-90.0 + step_deg * np.arange(1, steps))


def music_spectrum(cov: np.ndarray, num_sources: int,
                   spacing_ratio: float = 0.5,
                   grid_step_deg: float = GRID_STEP_DEG) -> MusicSpectrum:
    """MUSIC pseudo-spectrum of a covariance with ``num_sources`` signals.

    The noise subspace spans the N - num_sources eigenvectors with the
    smallest eigenvalues.  Denominators are floored at ``1e-12 * trace(cov)``
    so exactly noiseless covariances produce large finite peaks instead of
    dividing by zero.
    """
    cov = np.asarray(cov)
    n = cov.shape[0]
    if not 0 < num_sources < n:
        raise ValueError(f"num_sources must lie in (0, {n}), got {num_sources}")
    eigvals, eigvecs = np.linalg.eigh(cov)
    del eigvals  # ascending order; only the subspace split matters
    noise_basis = eigvecs[:, : n - num_sources]
    angles = _grid(grid_step_deg)
    a = steering_matrix(angles, n, spacing_ratio)
    denom = np.sum(np.abs(noise_basis.conj().T @ a) ** 2, axis=0)
    floor = _FLOOR_SCALE * float(np.trace(cov).real)
    values = 1.0 / np.maximum(denom, floor)
    return MusicSpectrum(angles=angles, values=values)


@dataclass
class AodEstimate:
    """Refined peak angles (radians, ascending) and a shortfall indicator.

    ``shortfall`` is set when the spectrum exposed fewer local maxima than
    requested; ``angles`` then holds only the peaks that were found.
    """

    angles: np.ndarray
    shortfall: bool


def _parabolic_offset(left: float, mid: float, right: float) -> float:
    """Vertex offset in grid-step units of the parabola through three points."""
    denom = left - 2.0 * mid + right
    if denom >= 0.0:  # flat or non-concave triple: keep the grid point
        return 0.0
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))


def estimate_aods(spectrum: MusicSpectrum, num_sources: int) -> AodEstimate:
    """Pick the ``num_sources`` largest spectrum peaks and refine them.

    Peaks are strict interior local maxima.  Refinement interpolates the
    log-spectrum, which stays well conditioned even for the near-singular
    peaks of a noiseless covariance.
    """
    values = spectrum.values
    interior = (values[1:-1] > values[:-2]) & (values[1:-1] > values[2:])
    peak_idx = np.flatnonzero(interior) + 1
    if peak_idx.size == 0:
        return AodEstimate(angles=np.empty(0), shortfall=True)
    order = np.argsort(values[peak_idx])[::-1]
    keep = peak_idx[order[:num_sources]]
    shortfall = keep.size < num_sources
    step = spectrum.angles[1] - spectrum.angles[0]
    log_vals = np.log(values)
    refined = np.array([
        spectrum.angles[i] + step * _parabolic_offset(log_vals[i - 1], log_vals[i], log_vals[i + 1])
        for i in keep
    ])
    return AodEstimate(angles=np.sort(refined), shortfall=shortfall)


def synth_uplink_snapshots(path_angles, num_antennas: int, num_snapshots: int,
                           snr_db: float, seed, spacing_ratio: float = 0.5) -> np.ndarray:
    """Simulate uplink array snapshots for one (base station, user) pair.

    Each snapshot is ``A g + noise`` with fresh unit-variance path gains, so
    sources stay mutually incoherent across snapshots.  The per-antenna
    signal power is P (number of paths); noise is scaled to meet ``snr_db``.
    ``snr_db = inf`` gives exactly noiseless snapshots.
    """
    rng = as_rng(seed)
    path_angles = np.asarray(path_angles, dtype=float)
    num_paths = path_angles.size
    a = steering_matrix(path_angles, num_antennas, spacing_ratio)
    gains = draw_gains(rng, (num_snapshots, num_paths))
    snaps = gains @ a.T
    if np.isfinite(snr_db):
        noise_var = num_paths * 10.0 ** (-snr_db / 10.0)
        snaps = snaps + np.sqrt(noise_var) * draw_gains(rng, snaps.shape)
    return snaps
