"""Spatially precoded downlink training of the selected path gains.

Each base station sends pilots through a per-user precoder ``W = G A^+``
(the selected rows of the steering pseudo-inverse), so each user observes
its own selected gains directly instead of the full antenna channel.  Pilot
sequences for the (station, user) blocks are disjoint row-slices of one
unitary matrix, making despreading exact, and the per-gain estimate is a
scalar LMMSE shrinkage of the despread output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import as_rng, draw_gains

__all__ = [
    "build_pilot_precoder",
    "PilotBook",
    "gen_pilot_sequences",
    "simulate_training",
    "despread",
    "lmmse_pgi",
]

_COND_GUARD = 1e8


def build_pilot_precoder(steering_mk: np.ndarray, path_set) -> tuple[np.ndarray, bool]:
    """Rows of the steering pseudo-inverse for the selected paths.

    ``W = G (A^H A)^{-1} A^H`` with ``G`` selecting ``path_set``;
    then ``W h = g[path_set]`` exactly whenever ``h = A g``.  Computed
    through a thin QR factorization, which loses only ~cond(A) * eps of
    accuracy instead of the squared conditioning of the normal equations.
    When ``cond(A^H A)`` exceeds 1e8 the inverse is replaced by a Tikhonov
    solve with ridge ``1e-10 * tr(A^H A) / P`` and the flag is set; the
    identity then holds only approximately.
    """
    steering_mk = np.asarray(steering_mk)
    _, num_paths = steering_mk.shape
    singvals = np.linalg.svd(steering_mk, compute_uv=False)
    guarded = bool((singvals[-1] == 0.0)
                   or (singvals[0] / singvals[-1]) ** 2 > _COND_GUARD)
    rows = list(path_set)
    if guarded:
        gram = steering_mk.conj().T @ steering_mk
        ridge = 1e-10 * float(np.trace(gram).real) / num_paths
        pinv = np.linalg.solve(gram + ridge * np.eye(num_paths),
                               steering_mk.conj().T)
        return pinv[rows, :], True
    q, r = np.linalg.qr(steering_mk)
    pinv = scipy.linalg.solve_triangular(r, q.conj().T, lower=False)
    return pinv[rows, :], False


@dataclass
class PilotBook:
    """Orthonormal pilot blocks for every (station, user) pair.

    ``sequences[m][k]`` has shape (|Lambda_mk|, tau); all rows across all
    blocks come from one tau x tau unitary, so blocks are exactly mutually
    orthogonal and each block satisfies ``Psi Psi^H = I``.
    """

    sequences: list
    total_length: int


def gen_pilot_sequences(block_sizes, seed) -> PilotBook:
    """Partition the rows of a seeded random unitary into per-pair blocks.

    ``block_sizes[m][k]`` gives each pair's pilot dimension; their total is
    the shared sequence length tau.  The unitary comes from the QR
    factorization of a complex Gaussian matrix (Haar distributed up to
    column phases, which orthonormality does not care about).
    """
    rng = as_rng(seed)
    sizes = [[int(s) for s in row] for row in block_sizes]
    tau = sum(sum(row) for row in sizes)
    if tau == 0:
        raise ValueError("at least one pilot block must be non-empty")
    gauss = draw_gains(rng, (tau, tau))
    unitary, _ = np.linalg.qr(gauss)
    sequences, start = [], 0
    for row in sizes:
        seq_row = []
        for size in row:
            seq_row.append(unitary[start:start + size, :])
            start += size
        sequences.append(seq_row)
    return PilotBook(sequences=sequences, total_length=tau)


def simulate_training(channels: np.ndarray, pilot_precoders, pilot_book: PilotBook,
                      noise_var: float, seed) -> np.ndarray:
    """Received (conjugated) pilot observations for every user, shape (K, tau).

    User k hears every station's superposition of all users' precoded pilot
    blocks through its own channels, plus white noise of variance
    ``noise_var`` per pilot symbol.
    """
    rng = as_rng(seed)
    num_bs, num_users, _ = channels.shape
    tau = pilot_book.total_length
    received = np.zeros((num_users, tau), dtype=complex)
    for k in range(num_users):
        for m in range(num_bs):
            for j in range(num_users):
                faded = pilot_precoders[m][j] @ channels[m, k]
                received[k] += pilot_book.sequences[m][j].conj().T @ faded
        if noise_var > 0.0:
            received[k] += np.sqrt(noise_var) * draw_gains(rng, tau)
    return received


def despread(received_k: np.ndarray, pilot_book: PilotBook, bs: int,
             user: int) -> np.ndarray:
    """Correlate one user's observation with its (station, user) pilot block."""
    return pilot_book.sequences[bs][user] @ received_k


def lmmse_pgi(despread_out: np.ndarray, pilot_noise_var: float) -> np.ndarray:
    """Scalar LMMSE estimate of unit-variance gains from despread pilots.

    The despread output is gain plus white noise, entrywise, so the LMMSE
    shrinkage is the scalar ``1 / (1 + noise_var)``.
    """
    return despread_out / (1.0 + pilot_noise_var)
