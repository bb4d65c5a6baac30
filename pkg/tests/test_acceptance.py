"""Acceptance suite: one test per numbered release criterion.

Each test checks an exact identity, an oracle equivalence, a bound, or a
scheme ordering on frozen seeds, prints one pass/fail line with the stated
tolerance through the shared result board, and the grid/sweep criteria
persist their tables under ``artifacts/sweeps/`` for the standalone figure
renderer.  Everything here runs without that renderer being built.
"""

import numpy as np
import scipy.linalg
from numpy.random import SeedSequence
from scipy import stats

from cellfree_pgi import (SystemConfig, bits_for_rate_gap, build_pilot_precoder,
                          build_slnr_operands, delta_factor, despread,
                          distortion_bound, draw_gains, draw_scenario,
                          estimate_aods, gen_pilot_sequences, gen_rvq_codebook,
                          ideal_rate_closed_form, lmmse_pgi, mc_rate,
                          measure_distortion_ensemble, music_spectrum,
                          noise_variance_for_snr, optimize_on_sets,
                          provisional_noise_var, quadratic_moment_closed_form,
                          rate_breakdown, rate_gap_bound, run_sweep, rvq_gamma,
                          sample_covariance, save_sweep, select_dominating_paths,
                          simulate_training, steering_matrix, steering_tensor,
                          synth_uplink_snapshots)
from cellfree_pgi.channel import as_rng
from cellfree_pgi.rates import selected_steering_blocks
from cellfree_pgi.sweep_io import SweepRow, SweepTable
from conftest import record_criterion
from pathlib import Path

ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts" / "sweeps"


def _check(index: int, name: str, passed: bool, detail: str) -> None:
    record_criterion(index, name, passed, detail)
    assert passed, f"criterion {index} {name}: {detail}"


def _calibrated_selection(config: SystemConfig, scenario_seed):
    """Scenario, budgeted selection, and noise calibrated to the target SNR."""
    geometry = draw_scenario(config, scenario_seed)
    steering = steering_tensor(geometry.path_aods, config.num_antennas)
    state = select_dominating_paths(steering, config.path_budget,
                                    provisional_noise_var(config))
    noise_var = noise_variance_for_snr(steering, state, config.snr_db)
    state = optimize_on_sets(steering, state.index_sets, noise_var)
    return steering, state, noise_var


def _user_blocks(steering, state, user):
    blocks = selected_steering_blocks(steering, state, user)
    precoders = [state.precoders[m][user] for m in range(state.num_bs)]
    return blocks, precoders


def test_criterion_01_pilot_identity():
    """Training precoder returns exactly the selected gains, noiselessly.

    100 seeded realizations at M=K=5, N=8, P=4 with widely spread path
    angles, two selected paths per pair: the row-selected pseudo-inverse
    identity and the full noiseless training chain must both recover the
    selected gains to 1e-9 relative error.
    """
    num_bs = num_users = 5
    num_antennas, num_paths = 8, 4
    worst_identity = 0.0
    worst_e2e = 0.0
    guard_trips = 0
    for t in range(100):
        rng = as_rng(SeedSequence([3, 0, t]))
        angles = np.sort(rng.uniform(np.deg2rad(-75.0), np.deg2rad(75.0),
                                     (num_bs, num_users, num_paths)), axis=-1)
        sets = [[sorted(rng.choice(num_paths, 2, replace=False).tolist())
                 for _k in range(num_users)] for _m in range(num_bs)]
        steer = [[steering_matrix(angles[m, k], num_antennas)
                  for k in range(num_users)] for m in range(num_bs)]
        precoders = [[None] * num_users for _ in range(num_bs)]
        for m in range(num_bs):
            for k in range(num_users):
                w, guarded = build_pilot_precoder(steer[m][k], sets[m][k])
                guard_trips += int(guarded)
                precoders[m][k] = w
                g = draw_gains(rng, (num_paths,))
                err = np.linalg.norm(w @ (steer[m][k] @ g) - g[sets[m][k]]) \
                    / np.linalg.norm(g[sets[m][k]])
                worst_identity = max(worst_identity, float(err))
        gains = draw_gains(rng, (num_bs, num_users, num_paths))
        channels = np.stack([
            np.stack([steer[m][k] @ gains[m, k] for k in range(num_users)])
            for m in range(num_bs)])
        sizes = [[len(sets[m][k]) for k in range(num_users)]
                 for m in range(num_bs)]
        book = gen_pilot_sequences(sizes, SeedSequence([3, 1, t]))
        received = simulate_training(channels, precoders, book, 0.0,
                                     SeedSequence([3, 2, t]))
        for m in range(num_bs):
            for k in range(num_users):
                est = lmmse_pgi(despread(received[k], book, m, k), 0.0)
                truth = gains[m, k, sets[m][k]]
                err = np.linalg.norm(est - truth) / np.linalg.norm(truth)
                worst_e2e = max(worst_e2e, float(err))
    ok = worst_identity <= 1e-9 and worst_e2e <= 1e-9 and guard_trips == 0
    _check(1, "pilot gain recovery", ok,
           f"identity rel err {worst_identity:.2e}, end-to-end "
           f"{worst_e2e:.2e} (tol 1e-9 each, 100 realizations, "
           f"{guard_trips} conditioning guards)")


def test_criterion_02_quartic_moment():
    """E|u^H A u|^2 formula vs sampling on the complex unit sphere.

    20 random 8x8 matrices, 200k isotropic unit vectors each, 2% relative
    tolerance against (|tr A|^2 + ||A||_F^2) / (L (L + 1)).
    """
    worst = 0.0
    for i in range(20):
        matrix = draw_gains(as_rng(SeedSequence([102, i, 0])), (8, 8))
        closed = quadratic_moment_closed_form(matrix)
        u = draw_gains(as_rng(SeedSequence([102, i, 1])), (200_000, 8))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        sampled = float(np.mean(np.abs(
            np.einsum("ti,ij,tj->t", u.conj(), matrix, u)) ** 2))
        worst = max(worst, abs(sampled - closed) / closed)
    _check(2, "quartic moment identity", worst <= 0.02,
           f"worst rel err {worst:.4f} (tol 0.02, 20 matrices x 2e5 draws)")


def test_criterion_03_quantizer_correlation():
    """Expected best squared codeword correlation at L=8, B=6.

    Monte Carlo over 20 fresh codebooks x 1000 isotropic directions, 1%
    relative tolerance against 1 - 2^B Beta(2^B, L/(L-1)); the complement
    must also respect the 2^(-B/(L-1)) bound (0.5157... <= 0.5520...).
    """
    gamma = rvq_gamma(6, 8)
    children = SeedSequence([103]).spawn(40)
    best = []
    for i in range(20):
        book = gen_rvq_codebook(8, 6, children[2 * i])
        g = draw_gains(as_rng(children[2 * i + 1]), (1000, 8))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        best.append(np.max(np.abs(u.conj() @ book.words.T) ** 2, axis=1))
    sampled = float(np.concatenate(best).mean())
    rel = abs(sampled - gamma) / gamma
    complement = 1.0 - gamma
    cap = 2.0 ** (-6.0 / 7.0)
    ok = rel <= 0.01 and complement <= cap \
        and abs(complement - 0.515747342222) < 1e-9 \
        and abs(cap - 0.552044756837) < 1e-9
    _check(3, "quantizer correlation", ok,
           f"MC {sampled:.6f} vs closed {gamma:.6f}, rel err {rel:.4f} "
           f"(tol 0.01); complement {complement:.4f} <= cap {cap:.4f}")


def test_criterion_04_distortion_grid():
    """Measured distortion vs its closed form and bounds on an L x B grid.

    For L in {2,4,8} and B in {2,4,6} on seeded default scenarios: the
    codebook-ensemble Monte Carlo distortion must sit below closed form
    + 3 SE, the closed form below the correlation-bound form below the
    dimension-only form (coupling ratio inside [1/L, L]), and the measured
    value below the unshaped full-vector RVQ distortion + 3 SE.  Persists
    the measured/closed/unshaped series for the figure renderer.
    """
    rows = []
    failures = []
    points = 0
    for budget in (2, 4, 8):
        config = SystemConfig(path_budget=budget, pilot_noise_var=0.0)
        steering, state, _ = _calibrated_selection(
            config, SeedSequence([104, budget]))
        blocks, precoders = _user_blocks(steering, state, 0)
        delta, degenerate = delta_factor(blocks, precoders)
        assert not degenerate
        in_range = 1.0 / budget <= delta <= budget
        for bits in (2, 4, 6):
            points += 1
            closed, shaped, plain = distortion_bound(budget, bits, delta)
            unshaped = 1.0 - rvq_gamma(bits, budget)
            measured, se = measure_distortion_ensemble(
                blocks, precoders, bits=bits, trials=40_000,
                seed=SeedSequence([104, budget, bits]), codebooks=20)
            if measured > closed + 3.0 * se:
                failures.append(f"L={budget} B={bits} measured {measured:.4f} "
                                f"> closed {closed:.4f} + 3SE")
            if in_range and not closed <= shaped + 1e-12 <= plain + 2e-12:
                failures.append(f"L={budget} B={bits} bound ordering broken")
            if measured > unshaped + 3.0 * se:
                failures.append(f"L={budget} B={bits} measured {measured:.4f} "
                                f"> unshaped {unshaped:.4f} + 3SE")
            rows.extend([
                SweepRow(float(budget), f"measured_bits{bits}", measured,
                         1.96 * se, 40_000, 0),
                SweepRow(float(budget), f"closed_form_bits{bits}", closed,
                         0.0, 0, 0),
                SweepRow(float(budget), f"full_vector_bits{bits}", unshaped,
                         0.0, 0, 0),
            ])
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    save_sweep(SweepTable(axis="path_budget", master_seed=104,
                          config=SystemConfig(pilot_noise_var=0.0).to_dict(),
                          rows=rows),
               ARTIFACTS / "distortion_vs_budget.csv")
    _check(4, "distortion grid", not failures,
           f"{points} grid points: measured <= closed + 3SE, "
           f"closed <= shaped <= plain, measured <= full-vector + 3SE"
           + (f"; FAILED: {'; '.join(failures)}" if failures else ""))


def test_criterion_05_closed_form_rate():
    """Ratio-of-means Monte Carlo rate agrees with the closed form.

    20 seeded default scenarios, 1e5 gain draws each, every per-user rate
    within 3 batch-means standard errors of the closed form.
    """
    config = SystemConfig()
    worst_z = 0.0
    misses = 0
    for i in range(20):
        steering, state, noise_var = _calibrated_selection(
            config, SeedSequence([105, i, 0]))
        closed = ideal_rate_closed_form(steering, state, noise_var)
        rates, se = mc_rate(steering, state, noise_var, draws=100_000,
                            seed=SeedSequence([105, i, 1]), mode="ratio")
        z = np.abs(rates - closed) / se
        worst_z = max(worst_z, float(z.max()))
        misses += int(np.sum(z > 3.0))
    _check(5, "closed-form rate", misses == 0,
           f"worst |closed - MC| = {worst_z:.2f} SE (limit 3 SE, "
           f"20 instances x 1e5 draws, {misses} misses)")


def test_criterion_06_leakage_quotient():
    """The optimized precoder maximizes its generalized Rayleigh quotient.

    50 seeded default scenarios: for every user, the attained ratio beats
    1000 random feasible vectors, and the generalized eigen-residual
    ||U x - lambda W x|| / ||U x|| stays below 1e-8.
    """
    config = SystemConfig()
    rng = as_rng(SeedSequence([106, 999]))
    worst_residual = 0.0
    undominated = 0
    comparisons = 0
    for i in range(50):
        steering, state, _ = _calibrated_selection(config, SeedSequence([106, i]))
        for k in range(config.num_users):
            operands = build_slnr_operands(steering, state.index_sets, k,
                                           state.noise_var)
            x = state.stacked_precoder(k)
            lam = state.slnr[k]
            residual = np.linalg.norm(operands.U @ x - lam * (operands.W @ x)) \
                / np.linalg.norm(operands.U @ x)
            worst_residual = max(worst_residual, float(residual))
            dim = operands.U.shape[0]
            parts = rng.standard_normal((1000, dim, 2))
            z = parts[..., 0] + 1j * parts[..., 1]
            num = np.einsum("td,de,te->t", z.conj(), operands.U, z).real
            den = np.einsum("td,de,te->t", z.conj(), operands.W, z).real
            comparisons += 1000
            undominated += int(np.sum(num / den > lam + 1e-9))
    ok = worst_residual <= 1e-8 and undominated == 0
    _check(6, "leakage quotient optimality", ok,
           f"eigen-residual {worst_residual:.2e} (tol 1e-8); "
           f"{undominated}/{comparisons} random vectors beat the optimum")


def test_criterion_07_unit_coupling_spectrum():
    """Top eigenvalue of the signal operand with orthonormal steering.

    With L orthonormal steering columns the rank-one-plus-Kronecker signal
    operand has top eigenvalue exactly L + 1; checked through the library
    assembly and an independent Kronecker construction, tolerance 1e-8.
    """
    worst = 0.0
    for dim in (2, 4, 8):
        parts = as_rng(SeedSequence([107, dim])).standard_normal((8, dim, 2))
        ortho, _ = np.linalg.qr(parts[..., 0] + 1j * parts[..., 1])
        steering = ortho[None, None]
        sets = ((tuple(range(dim)),),)
        operands = build_slnr_operands(steering, sets, 0, 1.0)
        mu = ortho.ravel(order="F")
        oracle = np.outer(mu, mu.conj()) \
            + np.kron(np.eye(dim), ortho @ ortho.conj().T)
        assert np.allclose(operands.U, oracle, atol=1e-12)
        top = scipy.linalg.eigh(operands.U, eigvals_only=True)[-1]
        worst = max(worst, abs(float(top) - (dim + 1.0)))
    _check(7, "unit-coupling spectrum", worst <= 1e-8,
           f"max |lambda_max - (L+1)| = {worst:.2e} over L in {{2,4,8}} "
           "(tol 1e-8)")


def test_criterion_08_rate_gap_bound():
    """Mean measured rate gap sits under the analytic gap bound.

    500 paired default-scenario trials at L=8: per user, the Monte Carlo
    ideal-vs-quantized rate gap (3000 draws) against the bound evaluated at
    that user's coupling ratio and received SNR.  Criterion: at B=6 the
    mean gap <= mean bound + 3 SE; B in {2,4} computed alongside for the
    persisted bits sweep.
    """
    config = SystemConfig(pilot_noise_var=0.0)
    bit_levels = (2, 4, 6)
    gaps = {b: [] for b in bit_levels}
    bounds = {b: [] for b in bit_levels}
    infeasible = 0
    trials = 500
    for t in range(trials):
        steering, state, noise_var = _calibrated_selection(
            config, SeedSequence([108, t, 0]))
        deltas = []
        for k in range(config.num_users):
            blocks, precoders = _user_blocks(steering, state, k)
            delta, degenerate = delta_factor(blocks, precoders)
            assert not degenerate
            deltas.append(delta)
        for bits in bit_levels:
            books = [gen_rvq_codebook(config.path_budget, bits,
                                      SeedSequence([108, t, k, bits]))
                     for k in range(config.num_users)]
            result = rate_breakdown(steering, state, noise_var, books,
                                    draws=3000, seed=SeedSequence([108, t, 1, bits]))
            snr_k = (result.ds_ideal + result.unselected_spread) \
                / (result.interference + noise_var)
            for k in range(config.num_users):
                gaps[bits].append(float(result.gap[k]))
                try:
                    bounds[bits].append(rate_gap_bound(
                        config.path_budget, bits, deltas[k], float(snr_k[k])))
                except ValueError:
                    infeasible += 1
                    bounds[bits].append(np.nan)
    rows = []
    margins = {}
    for bits in bit_levels:
        gap = np.array(gaps[bits])
        bound = np.array(bounds[bits])
        gap_se = gap.std(ddof=1) / np.sqrt(gap.size)
        bound_se = np.nanstd(bound, ddof=1) / np.sqrt(bound.size)
        margins[bits] = (float(gap.mean()), float(gap_se),
                         float(np.nanmean(bound)))
        rows.extend([
            SweepRow(float(bits), "measured_gap", float(gap.mean()),
                     1.96 * float(gap_se), trials, 0),
            SweepRow(float(bits), "gap_bound", float(np.nanmean(bound)),
                     1.96 * float(bound_se), trials, 0),
        ])
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    save_sweep(SweepTable(axis="feedback_bits", master_seed=108,
                          config=config.to_dict(), rows=rows),
               ARTIFACTS / "rate_gap_vs_bits.csv")
    ok = infeasible == 0 and all(
        mean <= bound + 3.0 * se for mean, se, bound in margins.values())
    mean6, se6, bound6 = margins[6]
    _check(8, "rate-gap bound", ok,
           f"B=6: mean gap {mean6:.4f} <= bound {bound6:.4f} + 3SE "
           f"(SE {se6:.4f}, 500 paired trials); {infeasible} infeasible")


def test_criterion_09_bit_inverse():
    """Bits-for-gap inverts the gap bound exactly.

    20-point grid over dimension, coupling ratio, SNR and target factor:
    plugging the returned bit count back into the bound reproduces
    log2(target) within 1e-9.
    """
    combos = ((0.15, 10.0, 1.02), (0.3, 31.6, 1.05), (0.2, 31.6, 1.1),
              (0.15, 100.0, 1.05), (0.3, 10.0, 1.03))
    worst = 0.0
    points = 0
    for dim in (2, 4, 8, 16):
        for frac, snr, target in combos:
            points += 1
            delta = frac * dim
            bits = bits_for_rate_gap(dim, delta, snr, target)
            assert bits > 0
            err = abs(rate_gap_bound(dim, bits, delta, snr) - np.log2(target))
            worst = max(worst, err)
    _check(9, "gap-bound bit inverse", worst <= 1e-9,
           f"worst round-trip err {worst:.2e} over {points} points (tol 1e-9)")


def test_criterion_10_selection_ordering():
    """Dominating-path selection beats random selection, paired.

    200 paired trials per budget L in {4,8,12}: one-sided paired t-test at
    95% on the per-trial sum-rate difference.  Persists the budget sweep.
    """
    config = SystemConfig(pilot_noise_var=0.0, baselines=("random_path",))
    result = run_sweep(config, "path_budget", [4, 8, 12], trials=200,
                       master_seed=110)
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    save_sweep(result.to_table(), ARTIFACTS / "rate_vs_budget.csv")
    stats_lines = []
    ok = int(result.failed.sum()) == 0
    for i, value in enumerate(result.values):
        diff = result.trial_sums["proposed"][i] - result.trial_sums["random_path"][i]
        tstat = diff.mean() / (diff.std(ddof=1) / np.sqrt(diff.size))
        threshold = stats.t.ppf(0.95, diff.size - 1)
        ok = ok and tstat >= threshold
        stats_lines.append(f"L={value:g} t={tstat:.1f}")
    _check(10, "selection ordering", ok,
           "; ".join(stats_lines) + f" (one-sided threshold "
           f"{stats.t.ppf(0.95, 199):.2f}, 200 paired trials)")


def test_criterion_11_station_scaling():
    """More stations help, and gain feedback beats full-channel RVQ.

    One sweep over M in {2,5,8} at 200 trials with the quantized-channel
    baseline alongside: the proposed mean sum rate must be non-decreasing
    under the CI-overlap rule, and at M=5 the paired one-sided t-test at
    95% must favor gain feedback over the equal-bit-budget RVQ channel
    baseline.  Persists the station sweep.
    """
    config = SystemConfig(pilot_noise_var=0.0, baselines=("rvq_csi",))
    result = run_sweep(config, "num_bs", [2, 5, 8], trials=200,
                       master_seed=111)
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    save_sweep(result.to_table(), ARTIFACTS / "rate_vs_stations.csv")
    mean = result.mean["proposed"]
    ci = result.ci95["proposed"]
    trend_ok = all(mean[i + 1] + ci[i + 1] >= mean[i] - ci[i] for i in range(2))
    at_five = list(result.values).index(5.0)
    diff = result.trial_sums["proposed"][at_five] \
        - result.trial_sums["rvq_csi"][at_five]
    tstat = diff.mean() / (diff.std(ddof=1) / np.sqrt(diff.size))
    threshold = stats.t.ppf(0.95, diff.size - 1)
    ok = trend_ok and tstat >= threshold and int(result.failed.sum()) == 0
    _check(11, "station scaling and feedback ordering", ok,
           f"proposed means {np.round(mean, 2).tolist()} non-decreasing "
           f"(CI overlap); M=5 proposed vs channel-RVQ t={tstat:.1f} "
           f"(threshold {threshold:.2f})")


def test_criterion_12_angle_estimation():
    """Noiseless subspace angle estimation on two sources.

    N=8 antennas, sources at -20 and +35 degrees, 64 snapshots: both
    estimates within 0.2 degrees.
    """
    snapshots = synth_uplink_snapshots(np.deg2rad([-20.0, 35.0]), 8, 64,
                                       np.inf, SeedSequence(5))
    spectrum = music_spectrum(sample_covariance(snapshots), 2)
    estimate = estimate_aods(spectrum, 2)
    errors = np.abs(np.rad2deg(estimate.angles) - np.array([-20.0, 35.0]))
    ok = not estimate.shortfall and float(errors.max()) <= 0.2
    _check(12, "angle estimation", ok,
           f"errors {errors[0]:.2e}, {errors[1]:.2e} deg (tol 0.2 deg)")


def test_criterion_13_renderer_inputs():
    """The persisted sweep tables are complete and digest-clean.

    The standalone figure renderer consumes exactly these four files; this
    test closes the loop on the primary side by re-loading each one (which
    re-verifies its content digest) and checking the expected series.  The
    renderer's own suite covers image output and truncation handling; no
    part of criteria 1-12 depends on it being built.
    """
    from cellfree_pgi import load_sweep

    expected = {
        "distortion_vs_budget.csv": {"measured_bits6", "closed_form_bits6",
                                     "full_vector_bits6"},
        "rate_gap_vs_bits.csv": {"measured_gap", "gap_bound"},
        "rate_vs_budget.csv": {"proposed", "random_path"},
        "rate_vs_stations.csv": {"proposed", "rvq_csi"},
    }
    problems = []
    for name, series in expected.items():
        path = ARTIFACTS / name
        if not path.exists():
            problems.append(f"{name} missing")
            continue
        table = load_sweep(path)
        missing = series - set(table.schemes)
        if missing:
            problems.append(f"{name} lacks series {sorted(missing)}")
        if len(table.axis_values) < 2:
            problems.append(f"{name} has fewer than 2 axis points")
    _check(13, "renderer inputs", not problems,
           "4 sweep tables persisted and digest-verified for the standalone "
           "renderer" + (f"; FAILED: {'; '.join(problems)}" if problems else ""))
