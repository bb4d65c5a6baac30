"""Seeded trial execution and parameter sweeps.

A trial is one scenario draw carried through the full pipeline: path-angle
acquisition, dominating-path selection, noise calibration, shared gain
draws, and per-scheme rate evaluation.  Every enabled scheme inside a trial
sees the identical gain draws and pilot-noise draws (asserted via a content
digest), so scheme differences are paired and sweeps need far fewer trials
than independent runs would.

Seed lineage: every random stream is a ``SeedSequence`` over
``(master_seed, axis_index, trial_index, stream_id, ...)``, so any single
trial can be reproduced from those integers alone.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aod import estimate_aods, music_spectrum, sample_covariance, synth_uplink_snapshots
from .channel import as_rng, draw_gains, draw_scenario, steering_tensor
from .config import SystemConfig
from .feedback import (Codebook, gen_rvq_codebook, quantize_directions,
                       rzf_precoder_array)
from .rates import (channels_from_gains, noise_variance_for_snr,
                    pgi_precoder_array, rate_from_powers, sinr_terms)
from .selection import SelectionState, optimize_on_sets, select_dominating_paths
from .sweep_io import SweepRow, SweepTable

__all__ = [
    "SCHEMES",
    "SWEEP_AXES",
    "TrialResult",
    "SweepResult",
    "trial_key",
    "provisional_noise_var",
    "run_trial",
    "apply_axis",
    "run_sweep",
]

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "ideal_pgi", "rvq_csi", "random_path")
SWEEP_AXES = ("snr_db", "feedback_bits", "path_budget", "num_paths", "num_bs")

_STREAM_SCENARIO = 0
_STREAM_AOD = 1
_STREAM_GAINS = 2
_STREAM_PGI_CODEBOOK = 3
_STREAM_CSI_CODEBOOK = 4
_STREAM_RANDOM_SELECTION = 5
_STREAM_PILOT_NOISE = 6


def trial_key(master_seed: int, axis_index: int, trial_index: int) -> tuple[int, int, int]:
    """The integers that fully determine one trial's randomness."""
    return (int(master_seed), int(axis_index), int(trial_index))


def _stream(seed_key, stream_id: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([*seed_key, stream_id, *extra])


def provisional_noise_var(config: SystemConfig) -> float:
    """Noise level used during selection, before calibration is possible.

    Scales the nominal per-user power ``M * N * L`` (station count times
    per-station array gain times fed-back paths) down by the target SNR;
    the post-selection calibration then replaces it with the measured value.
    """
    nominal = config.num_bs * config.num_antennas * config.path_budget
    return nominal / 10.0 ** (config.snr_db / 10.0)


def _estimated_path_aods(geometry, config: SystemConfig, seed_key) -> np.ndarray:
    """Per-(station, user) angle estimates from synthetic uplink snapshots.

    When the spectrum yields fewer peaks than paths, the found angles are
    repeated cyclically to keep the path count; with none found the
    broadside angle stands in.
    """
    num_paths = config.num_paths
    out = np.empty_like(geometry.path_aods)
    for m in range(config.num_bs):
        for k in range(config.num_users):
            snaps = synth_uplink_snapshots(
                geometry.path_aods[m, k], config.num_antennas,
                config.music_snapshots, config.music_snr_db,
                _stream(seed_key, _STREAM_AOD, m, k), config.spacing_ratio)
            spectrum = music_spectrum(sample_covariance(snaps), num_paths,
                                      config.spacing_ratio)
            found = estimate_aods(spectrum, num_paths).angles
            if found.size == 0:
                found = np.zeros(1)
            reps = -(-num_paths // found.size)
            out[m, k] = np.sort(np.tile(found, reps)[:num_paths])
    return out


def _random_index_sets(config: SystemConfig, seed) -> list[list[list[int]]]:
    """Uniformly random per-user path subsets at the same budget."""
    rng = as_rng(seed)
    total = config.num_bs * config.num_paths
    sets: list[list[list[int]]] = [
        [[] for _ in range(config.num_users)] for _ in range(config.num_bs)]
    for k in range(config.num_users):
        chosen = rng.choice(total, size=config.path_budget, replace=False)
        for slot in sorted(int(s) for s in chosen):
            sets[slot // config.num_paths][k].append(slot % config.num_paths)
    return sets


def _selected_gain_blocks(state: SelectionState, gains: np.ndarray) -> list[np.ndarray]:
    """Per-user (T, L) stacked selected gains, station-major order."""
    blocks = []
    for k in range(state.num_users):
        parts = [gains[:, m, k, list(state.index_sets[m][k])]
                 for m in range(state.num_bs)]
        blocks.append(np.concatenate(parts, axis=1))
    return blocks


def _quantized_feedback(selected: np.ndarray, pilot_noise: np.ndarray | None,
                        pilot_noise_var: float, codebook: Codebook) -> np.ndarray:
    """Training-chain shortcut: LMMSE estimate, then quantize and rebuild."""
    estimate = selected
    if pilot_noise is not None and pilot_noise_var > 0.0:
        estimate = (selected + np.sqrt(pilot_noise_var) * pilot_noise) \
            / (1.0 + pilot_noise_var)
    picks = quantize_directions(estimate, codebook)
    norms = np.linalg.norm(estimate, axis=1)
    directions = codebook.words[picks]
    return norms[:, None] * directions


@dataclass
class TrialResult:
    """Per-scheme rates of one trial, plus its pairing evidence."""

    rates: dict[str, np.ndarray]
    rate_se: dict[str, np.ndarray]
    noise_var: float
    shared_digest: str
    seed_key: tuple[int, int, int]

    def sum_rate(self, scheme: str) -> float:
        return float(np.sum(self.rates[scheme]))


def run_trial(config: SystemConfig, seed_key, schemes=None) -> TrialResult:
    """Execute one seeded trial and rate every requested scheme on it.

    ``schemes`` defaults to the proposed scheme plus ``config.baselines``.
    All schemes share the trial's scenario, gain draws, pilot-noise draws,
    and noise variance; ``shared_digest`` fingerprints those shared draws.
    """
    if schemes is None:
        schemes = ("proposed",) + tuple(config.baselines)
    unknown = sorted(set(schemes) - set(SCHEMES))
    if unknown:
        raise ValueError(f"unknown schemes {unknown}; valid: {SCHEMES}")
    seed_key = tuple(int(s) for s in seed_key)

    geometry = draw_scenario(config, _stream(seed_key, _STREAM_SCENARIO))
    steering_true = steering_tensor(geometry.path_aods, config.num_antennas,
                                    config.spacing_ratio)
    steering_known = steering_true
    if config.use_estimated_aods:
        steering_known = steering_tensor(
            _estimated_path_aods(geometry, config, seed_key),
            config.num_antennas, config.spacing_ratio)

    state = select_dominating_paths(steering_known, config.path_budget,
                                    provisional_noise_var(config))
    noise_var = noise_variance_for_snr(steering_true, state, config.snr_db)
    state = optimize_on_sets(steering_known, state.index_sets, noise_var)
    pilot_noise_var = config.resolved_pilot_noise_var(noise_var)

    draws = config.gain_draws
    gains = draw_gains(as_rng(_stream(seed_key, _STREAM_GAINS)),
                       (draws, config.num_bs, config.num_users, config.num_paths))
    channels = channels_from_gains(steering_true, gains)
    digest = hashlib.sha256(gains.tobytes())
    pilot_noise = None
    if pilot_noise_var > 0.0:
        pilot_noise = draw_gains(as_rng(_stream(seed_key, _STREAM_PILOT_NOISE)),
                                 (config.num_users, draws, config.path_budget))
        digest.update(pilot_noise.tobytes())
    digest = digest.hexdigest()

    needs_pgi_codebooks = {"proposed", "random_path"} & set(schemes)
    pgi_codebooks = {}
    if needs_pgi_codebooks:
        pgi_codebooks = {
            k: gen_rvq_codebook(config.path_budget, config.feedback_bits,
                                _stream(seed_key, _STREAM_PGI_CODEBOOK, k))
            for k in range(config.num_users)}

    rates: dict[str, np.ndarray] = {}
    rate_se: dict[str, np.ndarray] = {}

    def evaluate(scheme: str, precoders: np.ndarray) -> None:
        signal, interference = sinr_terms(channels, precoders)
        rates[scheme], rate_se[scheme] = rate_from_powers(
            signal, interference, noise_var, config.rate_mode)

    for scheme in schemes:
        if scheme == "ideal_pgi":
            evaluate(scheme, pgi_precoder_array(state, gains))
        elif scheme == "proposed":
            selected = _selected_gain_blocks(state, gains)
            fed = [_quantized_feedback(selected[k],
                                       None if pilot_noise is None else pilot_noise[k],
                                       pilot_noise_var, pgi_codebooks[k])
                   for k in range(config.num_users)]
            evaluate(scheme, pgi_precoder_array(state, gains,
                                                feedback=lambda k, _sel: fed[k]))
        elif scheme == "random_path":
            random_state = optimize_on_sets(
                steering_known,
                _random_index_sets(config, _stream(seed_key, _STREAM_RANDOM_SELECTION)),
                noise_var)
            selected = _selected_gain_blocks(random_state, gains)
            fed = [_quantized_feedback(selected[k],
                                       None if pilot_noise is None else pilot_noise[k],
                                       pilot_noise_var, pgi_codebooks[k])
                   for k in range(config.num_users)]
            evaluate(scheme, pgi_precoder_array(random_state, gains,
                                                feedback=lambda k, _sel: fed[k]))
        elif scheme == "rvq_csi":
            quantized = np.empty_like(channels)
            for m in range(config.num_bs):
                for k in range(config.num_users):
                    book = gen_rvq_codebook(
                        config.num_antennas, config.feedback_bits,
                        _stream(seed_key, _STREAM_CSI_CODEBOOK, m, k))
                    h = channels[:, m, k, :]
                    picks = quantize_directions(h, book)
                    quantized[:, m, k, :] = np.linalg.norm(h, axis=1)[:, None] \
                        * book.words[picks]
            stacked = quantized.transpose(0, 1, 3, 2).reshape(
                draws * config.num_bs, config.num_antennas, config.num_users)
            w = rzf_precoder_array(stacked, noise_var, config.num_bs)
            precoders = w.reshape(draws, config.num_bs, config.num_antennas,
                                  config.num_users).transpose(0, 1, 3, 2)
            evaluate(scheme, precoders)
    return TrialResult(rates=rates, rate_se=rate_se, noise_var=noise_var,
                       shared_digest=digest, seed_key=seed_key)


def apply_axis(config: SystemConfig, axis: str, value) -> SystemConfig:
    """Config for one sweep point; num_paths keeps the budget at two per path."""
    if axis == "snr_db":
        return config.replace(snr_db=float(value))
    if axis == "feedback_bits":
        return config.replace(feedback_bits=int(value))
    if axis == "path_budget":
        return config.replace(path_budget=int(value))
    if axis == "num_paths":
        return config.replace(num_paths=int(value), path_budget=2 * int(value))
    if axis == "num_bs":
        return config.replace(num_bs=int(value))
    raise ValueError(f"unknown sweep axis {axis!r}; valid: {SWEEP_AXES}")


@dataclass
class SweepResult:
    """Aggregated sweep with the per-trial sums kept for paired tests."""

    axis: str
    values: tuple[float, ...]
    schemes: tuple[str, ...]
    mean: dict[str, np.ndarray]
    ci95: dict[str, np.ndarray]
    trial_sums: dict[str, list[np.ndarray]]
    trials: np.ndarray
    failed: np.ndarray
    failed_keys: list[tuple[int, int, int]] = field(default_factory=list)
    config: SystemConfig | None = None
    master_seed: int = 0

    def to_table(self) -> SweepTable:
        rows = []
        for i, value in enumerate(self.values):
            for scheme in self.schemes:
                rows.append(SweepRow(
                    axis_value=float(value), scheme=scheme,
                    mean_sum_rate=float(self.mean[scheme][i]),
                    ci95=float(self.ci95[scheme][i]),
                    trials=int(self.trials[i]), failed_trials=int(self.failed[i])))
        snapshot = self.config.to_dict() if self.config is not None else {}
        return SweepTable(axis=self.axis, master_seed=self.master_seed,
                          config=snapshot, rows=rows)


def _run_trial_job(args):
    """Picklable trial wrapper: failures come back as None, with the key."""
    config, seed_key, schemes = args
    try:
        return seed_key, run_trial(config, seed_key, schemes)
    except Exception:
        log.warning("trial %s failed", seed_key, exc_info=True)
        return seed_key, None


def run_sweep(config: SystemConfig, axis: str, values, trials: int | None = None,
              master_seed: int | None = None, schemes=None,
              workers: int = 1) -> SweepResult:
    """Run ``trials`` seeded trials per axis value and aggregate sum rates.

    Per (value, scheme): mean sum rate over successful trials and a normal
    95% CI halfwidth.  A failing trial is logged with its seed key, counted,
    and excluded; the remaining trials still aggregate.  ``workers > 1``
    runs trials in a process pool; results are reassembled in trial order,
    so the aggregate is identical to a serial run.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("values must be nonempty")
    if trials is None:
        trials = config.trials
    if trials < 2:
        raise ValueError("need at least 2 trials for a confidence interval")
    if master_seed is None:
        master_seed = config.master_seed
    if schemes is None:
        schemes = ("proposed",) + tuple(config.baselines)

    point_configs = [apply_axis(config, axis, v) for v in values]
    jobs = [(point_configs[i], trial_key(master_seed, i, t), tuple(schemes))
            for i in range(len(values)) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial_job, jobs, chunksize=8))
    else:
        outcomes = [_run_trial_job(job) for job in jobs]
    results = dict(outcomes)

    sums = {s: [] for s in schemes}
    n_ok = np.zeros(len(values), dtype=int)
    n_fail = np.zeros(len(values), dtype=int)
    failed_keys = []
    for i in range(len(values)):
        per_scheme = {s: [] for s in schemes}
        for t in range(trials):
            key = trial_key(master_seed, i, t)
            res = results[key]
            if res is None:
                n_fail[i] += 1
                failed_keys.append(key)
                continue
            n_ok[i] += 1
            for s in schemes:
                per_scheme[s].append(res.sum_rate(s))
        for s in schemes:
            sums[s].append(np.array(per_scheme[s]))

    mean = {s: np.array([blk.mean() if blk.size else np.nan for blk in sums[s]])
            for s in schemes}
    ci95 = {s: np.array([
        1.96 * blk.std(ddof=1) / np.sqrt(blk.size) if blk.size > 1 else np.nan
        for blk in sums[s]]) for s in schemes}
    return SweepResult(axis=axis, values=tuple(values), schemes=tuple(schemes),
                       mean=mean, ci95=ci95, trial_sums=sums,
                       trials=n_ok, failed=n_fail, failed_keys=failed_keys,
                       config=config, master_seed=master_seed)
