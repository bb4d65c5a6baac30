"""Closed-form and Monte Carlo rate evaluation.

The closed-form route evaluates per-user rates from three power terms of the
selected-path precoders: a coherent term (squared magnitude of the summed
coupling traces), a beam-spread term (signal power radiated across all paths
of the user's own channel), and cross-user interference.  The Monte Carlo
route draws path gains and measures the same quantities from instantaneous
SINRs, either averaging log rates or taking the ratio of averaged powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import as_rng, draw_gains
from .feedback import Codebook
from .selection import SelectionState

__all__ = [
    "selected_steering_blocks",
    "selected_coupling",
    "power_terms",
    "ideal_rate_closed_form",
    "noise_variance_for_snr",
    "slnr_value",
    "quadratic_moment_closed_form",
    "pgi_precoder_array",
    "channels_from_gains",
    "sinr_terms",
    "rate_from_powers",
    "mc_rate",
    "measure_distortion",
    "measure_distortion_ensemble",
    "BreakdownResult",
    "rate_breakdown",
    "RunningMoments",
]


def selected_steering_blocks(steering: np.ndarray, state: SelectionState,
                             user: int) -> list[np.ndarray]:
    """Selected steering columns per base station, shapes (N, |Lambda_m|)."""
    return [steering[m, user][:, list(state.index_sets[m][user])]
            for m in range(state.num_bs)]


def selected_coupling(steering: np.ndarray, state: SelectionState,
                      user: int) -> np.ndarray:
    """Block-diagonal coupling ``diag_m(A_m^H V_m)`` of selected paths.

    Acting on the user's stacked selected gains, this matrix carries the
    coherent beamforming term: ``g^H C g`` is the user's received amplitude
    through its own selected paths.
    """
    blocks = [a.conj().T @ v for a, v in
              zip(selected_steering_blocks(steering, state, user),
                  [state.precoders[m][user] for m in range(state.num_bs)])]
    blocks = [b for b in blocks if b.size]
    return scipy.linalg.block_diag(*blocks) if blocks else np.empty((0, 0), complex)


def power_terms(steering: np.ndarray, state: SelectionState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coherent, beam_spread, interference) per user, all length K.

    coherent_k   = |sum_m tr(A_sel^H V_m)|^2
    beam_spread_k = sum_m ||A_mk^H V_mk||_F^2   (full steering, all paths)
    interference_k = sum_{j != k} sum_m ||A_mk^H V_mj||_F^2
    """
    num_bs, num_users = state.num_bs, state.num_users
    coherent = np.empty(num_users)
    cross = np.zeros((num_users, num_users))  # [k, j]: j's precoder into k's channel
    for k in range(num_users):
        trace_sum = 0.0 + 0.0j
        for m in range(num_bs):
            a_sel = steering[m, k][:, list(state.index_sets[m][k])]
            trace_sum += np.trace(a_sel.conj().T @ state.precoders[m][k])
        coherent[k] = np.abs(trace_sum) ** 2
        for j in range(num_users):
            cross[k, j] = sum(
                float(np.sum(np.abs(steering[m, k].conj().T @ state.precoders[m][j]) ** 2))
                for m in range(num_bs))
    spread = np.array([cross[k, k] for k in range(num_users)])
    interference = cross.sum(axis=1) - spread
    return coherent, spread, interference


def ideal_rate_closed_form(steering: np.ndarray, state: SelectionState,
                           noise_var: float) -> np.ndarray:
    """Per-user rate of perfect gain feedback, ratio-of-expectations form."""
    coherent, spread, interference = power_terms(steering, state)
    return np.log2(1.0 + (coherent + spread) / (interference + noise_var))


def noise_variance_for_snr(steering: np.ndarray, state: SelectionState,
                           snr_db: float) -> float:
    """Noise variance placing the mean user's total received power at snr_db."""
    coherent, spread, interference = power_terms(steering, state)
    total = float(np.mean(coherent + spread + interference))
    return total / 10.0 ** (snr_db / 10.0)


def slnr_value(steering: np.ndarray, state: SelectionState, user: int,
               noise_var: float) -> float:
    """Signal-to-leakage-plus-noise ratio attained by one user's precoder."""
    num_bs, num_users = state.num_bs, state.num_users
    trace_sum = 0.0 + 0.0j
    spread = 0.0
    leak = 0.0
    for m in range(num_bs):
        a_sel = steering[m, user][:, list(state.index_sets[m][user])]
        trace_sum += np.trace(a_sel.conj().T @ state.precoders[m][user])
        spread += float(np.sum(np.abs(steering[m, user].conj().T
                                      @ state.precoders[m][user]) ** 2))
        for j in range(num_users):
            if j != user:
                leak += float(np.sum(np.abs(steering[m, j].conj().T
                                            @ state.precoders[m][user]) ** 2))
    return (np.abs(trace_sum) ** 2 + spread) / (leak + noise_var)


def quadratic_moment_closed_form(matrix: np.ndarray) -> float:
    """E|u^H A u|^2 for an isotropic unit vector u in C^L.

        (|tr A|^2 + ||A||_F^2) / (L (L + 1))
    """
    dim = matrix.shape[0]
    return (np.abs(np.trace(matrix)) ** 2 + float(np.sum(np.abs(matrix) ** 2))) \
        / (dim * (dim + 1.0))


def _gain_slices(state: SelectionState, user: int) -> list[tuple[int, slice, list]]:
    """(station, destination slice, path ids) covering the stacked gain vector."""
    out, start = [], 0
    for m in range(state.num_bs):
        paths = list(state.index_sets[m][user])
        out.append((m, slice(start, start + len(paths)), paths))
        start += len(paths)
    return out


def pgi_precoder_array(state: SelectionState, gains: np.ndarray,
                       feedback=None) -> np.ndarray:
    """Transmit vectors ``w = V ghat`` for each draw, shape (T, M, K, N).

    ``gains`` holds the true path gains, shape (T, M, K, P).  Each user's
    selected gains are stacked station-major, passed through ``feedback``
    (``None`` means fed back perfectly), and mixed through the selection
    state's precoder columns.
    """
    draws = gains.shape[0]
    num_antennas = state.precoders[0][0].shape[0]
    precoders = np.zeros((draws, state.num_bs, state.num_users, num_antennas), complex)
    for k in range(state.num_users):
        slices = _gain_slices(state, k)
        selected = np.concatenate(
            [gains[:, m, k, paths] for m, _, paths in slices], axis=1)
        fed_back = selected if feedback is None else feedback(k, selected)
        for m, dest, _ in slices:
            precoders[:, m, k, :] = fed_back[:, dest] @ state.precoders[m][k].T
    return precoders


def channels_from_gains(steering: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """Antenna channels for a batch of gain draws, shape (T, M, K, N).

    One matrix product per (station, user) pair keeps the contraction in
    BLAS even for very large draw counts.
    """
    draws = gains.shape[0]
    num_bs, num_users, num_antennas, _ = steering.shape
    channels = np.empty((draws, num_bs, num_users, num_antennas), complex)
    for m in range(num_bs):
        for k in range(num_users):
            channels[:, m, k, :] = gains[:, m, k, :] @ steering[m, k].T
    return channels


def sinr_terms(channels: np.ndarray, precoders: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw signal and interference powers, shapes (T, K).

    ``channels`` and ``precoders`` are (T, M, K, N); entry [t, k, j] of the
    cross matrix is ``sum_m h_mk^H w_mj``, evaluated as one batched matrix
    product over the stacked station-antenna axis.
    """
    draws, num_bs, num_users, num_antennas = channels.shape
    flat_ch = channels.transpose(0, 2, 1, 3).reshape(draws, num_users, -1)
    flat_w = precoders.transpose(0, 2, 1, 3).reshape(draws, num_users, -1)
    cross = flat_ch.conj() @ flat_w.transpose(0, 2, 1)
    signal = np.abs(np.einsum("tkk->tk", cross)) ** 2
    interference = np.sum(np.abs(cross) ** 2, axis=2) - signal
    return signal, interference


def rate_from_powers(signal: np.ndarray, interference: np.ndarray,
                     noise_var: float, mode: str = "ratio",
                     batches: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Reduce per-draw (T, K) power terms to per-user rates with errors.

    ``instantaneous`` averages the per-draw log rates; ``ratio`` takes one
    log of averaged powers, with a batch-means standard error (the draws are
    split into ``batches`` contiguous blocks and the ratio recomputed per
    block).
    """
    if mode == "instantaneous":
        values = np.log2(1.0 + signal / (interference + noise_var))
        return values.mean(axis=0), values.std(axis=0, ddof=1) / np.sqrt(signal.shape[0])
    if mode != "ratio":
        raise ValueError(f"unknown mode {mode!r}")
    draws = signal.shape[0]
    batches = min(batches, draws)
    rates = np.log2(1.0 + signal.mean(axis=0) / (interference.mean(axis=0) + noise_var))
    edges = np.linspace(0, draws, batches + 1, dtype=int)
    per_batch = np.stack([
        np.log2(1.0 + signal[a:b].mean(axis=0) / (interference[a:b].mean(axis=0) + noise_var))
        for a, b in zip(edges[:-1], edges[1:])])
    se = per_batch.std(axis=0, ddof=1) / np.sqrt(batches)
    return rates, se


def mc_rate(steering: np.ndarray, state: SelectionState, noise_var: float,
            draws: int, seed, mode: str = "ratio", feedback=None,
            batches: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo per-user rates of selected-path precoding, with errors.

    Draws fresh path gains, forms each user's precoder ``w = V ghat`` from
    the fed-back gains, and accumulates instantaneous SINR terms.
    ``mode="instantaneous"`` averages ``log2(1 + SINR)``;  ``mode="ratio"``
    averages signal and interference powers first and takes one log, the
    form the closed-form rates approximate.  ``feedback(user, gains)`` maps
    the (T, L) true selected gains to the gains the precoder actually uses;
    ``None`` means perfect feedback.  Returns (rates, standard errors).
    """
    rng = as_rng(seed)
    num_bs, num_users, _, num_paths = steering.shape
    gains = draw_gains(rng, (draws, num_bs, num_users, num_paths))
    channels = channels_from_gains(steering, gains)
    precoders = pgi_precoder_array(state, gains, feedback)
    signal, interference = sinr_terms(channels, precoders)
    return rate_from_powers(signal, interference, noise_var, mode, batches)


def measure_distortion(steering_blocks, precoder_blocks, codebook: Codebook,
                       trials: int, seed, batches: int = 20) -> tuple[float, float]:
    """Monte Carlo normalized signal-power distortion of quantized gains.

    Draws stacked selected gains ``g ~ CN(0, I_L)`` (one
    :func:`~cellfree_pgi.channel.draw_gains` call of shape (trials, L), so a
    caller can reproduce the directions), quantizes each direction with the
    codebook, and returns the relative coherent-power loss

        sum_t (|g^H C g|^2 - |g^H C ghat|^2) / sum_t |g^H C g|^2

    with a batch-wise standard error of the ratio.
    """
    coupling = scipy.linalg.block_diag(*[
        a.conj().T @ v for a, v in zip(steering_blocks, precoder_blocks) if a.size])
    dim = coupling.shape[0]
    if codebook.dim != dim:
        raise ValueError(f"codebook dimension {codebook.dim} != selected paths {dim}")
    rng = as_rng(seed)
    gains = draw_gains(rng, (trials, dim))
    norms = np.linalg.norm(gains, axis=1)
    directions = gains / norms[:, None]
    picks = np.argmax(np.abs(directions.conj() @ codebook.words.T) ** 2, axis=1)
    quantized = norms[:, None] * codebook.words[picks]
    through = gains.conj() @ coupling
    ideal = np.abs(np.einsum("tl,tl->t", through, gains)) ** 2
    actual = np.abs(np.einsum("tl,tl->t", through, quantized)) ** 2
    loss = ideal - actual
    estimate = float(loss.sum() / ideal.sum())
    if batches < 2:
        return estimate, float("nan")
    edges = np.linspace(0, trials, batches + 1, dtype=int)
    per_batch = np.array([loss[a:b].sum() / ideal[a:b].sum()
                          for a, b in zip(edges[:-1], edges[1:])])
    se = float(per_batch.std(ddof=1) / np.sqrt(batches))
    return estimate, se


def measure_distortion_ensemble(steering_blocks, precoder_blocks, bits: int,
                                trials: int, seed,
                                codebooks: int = 20) -> tuple[float, float]:
    """Distortion averaged over fresh random codebooks.

    The closed-form distortion is an expectation over both the gain draws
    and the codebook ensemble; a single codebook realization deviates by
    more than its gain-sampling error.  This draws ``codebooks`` fresh
    codebooks, runs ``trials // codebooks`` gain draws through each, pools
    the loss ratio, and reports the spread across codebooks as the
    standard error, so the error bar covers both randomness sources.
    """
    from .feedback import gen_rvq_codebook

    if codebooks < 2:
        raise ValueError("need at least 2 codebooks for an error estimate")
    root = np.random.SeedSequence(seed.entropy if isinstance(seed, np.random.SeedSequence)
                                  else seed)
    children = root.spawn(2 * codebooks)
    dim = sum(a.shape[1] for a in steering_blocks)
    per_book = trials // codebooks
    ratios = np.empty(codebooks)
    for i in range(codebooks):
        book = gen_rvq_codebook(dim, bits, children[2 * i])
        ratios[i], _ = measure_distortion(steering_blocks, precoder_blocks, book,
                                          per_book, children[2 * i + 1], batches=1)
    return float(ratios.mean()), float(ratios.std(ddof=1) / np.sqrt(codebooks))


@dataclass
class BreakdownResult:
    """Per-user power decomposition and the rates built from it.

    The desired-signal power through a user's own selected paths is
    ``E|g^H C g|^2`` with perfect feedback (``ds_ideal``, closed form
    ``|tr C|^2 + ||C||_F^2``) and ``E|g^H C ghat|^2`` with quantized
    feedback (``ds_quantized``, Monte Carlo with standard error
    ``ds_se``).  ``unselected_spread`` (power radiated onto the user's
    unselected paths) and ``interference`` are closed-form expectations
    shared by both systems: the fed-back vector is isotropic on average, so
    quantizing it cannot change them.  Rates are ratio-of-expectations, so
    ``rate_ideal`` equals the closed-form ideal rate exactly.
    """

    ds_ideal: np.ndarray
    ds_ideal_mc: np.ndarray
    ds_quantized: np.ndarray
    ds_se: np.ndarray
    unselected_spread: np.ndarray
    interference: np.ndarray
    rate_ideal: np.ndarray
    rate_realistic: np.ndarray
    gap: np.ndarray
    noise_var: float


def rate_breakdown(steering: np.ndarray, state: SelectionState, noise_var: float,
                   codebooks, draws: int, seed,
                   pilot_noise_var: float = 0.0) -> BreakdownResult:
    """Decompose each user's rate and measure the quantization hit.

    ``codebooks`` is one :class:`~cellfree_pgi.feedback.Codebook` shared by
    all users or a per-user sequence.  The quantized desired-signal power is
    estimated from ``draws`` gain draws per user, where ``ghat`` runs
    through the training chain (optional pilot noise, LMMSE shrinkage,
    direction quantization, magnitude reattachment).  ``ds_ideal_mc`` is
    the same estimator with perfect feedback, kept as a consistency check
    against the closed-form ``ds_ideal``.
    """
    rng = as_rng(seed)
    coherent, spread, interference = power_terms(steering, state)
    num_users = state.num_users
    if isinstance(codebooks, Codebook):
        codebooks = [codebooks] * num_users
    ds_ideal = np.empty(num_users)
    ds_ideal_mc = np.empty(num_users)
    quant = np.empty(num_users)
    quant_se = np.empty(num_users)
    unselected = np.empty(num_users)
    for k in range(num_users):
        coupling = selected_coupling(steering, state, k)
        selected_spread = float(np.sum(np.abs(coupling) ** 2))
        ds_ideal[k] = coherent[k] + selected_spread
        unselected[k] = spread[k] - selected_spread
        dim = coupling.shape[0]
        gains = draw_gains(rng, (draws, dim))
        estimate = gains
        if pilot_noise_var > 0.0:
            noise = np.sqrt(pilot_noise_var) * draw_gains(rng, (draws, dim))
            estimate = (gains + noise) / (1.0 + pilot_noise_var)
        book = codebooks[k]
        norms = np.linalg.norm(estimate, axis=1)
        directions = estimate / norms[:, None]
        picks = np.argmax(np.abs(directions.conj() @ book.words.T) ** 2, axis=1)
        fed_back = norms[:, None] * book.words[picks]
        through = gains.conj() @ coupling
        ds_ideal_mc[k] = np.mean(np.abs(np.einsum("tl,tl->t", through, gains)) ** 2)
        actual = np.abs(np.einsum("tl,tl->t", through, fed_back)) ** 2
        quant[k] = actual.mean()
        quant_se[k] = actual.std(ddof=1) / np.sqrt(draws)
    rate_ideal = np.log2(1.0 + (ds_ideal + unselected) / (interference + noise_var))
    rate_real = np.log2(1.0 + (quant + unselected) / (interference + noise_var))
    return BreakdownResult(
        ds_ideal=ds_ideal, ds_ideal_mc=ds_ideal_mc, ds_quantized=quant,
        ds_se=quant_se, unselected_spread=unselected, interference=interference,
        rate_ideal=rate_ideal, rate_realistic=rate_real,
        gap=rate_ideal - rate_real, noise_var=noise_var)


@dataclass
class RunningMoments:
    """Order-independent mean/variance accumulator with pairwise merging."""

    count: int = 0
    mean: float = 0.0
    _m2: float = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (value - self.mean)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self._m2 = other.count, other.mean, other._m2
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / total
        self._m2 += other._m2 + delta * delta * self.count * other.count / total
        self.count = total
        return self

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else float("nan")

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 1 else float("nan")
