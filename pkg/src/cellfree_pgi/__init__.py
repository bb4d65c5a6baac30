"""Dominating path-gain feedback for FDD cell-free downlink.

A seedable simulation library for a limited-feedback scheme in which users
feed back the complex gains of a few dominating propagation paths instead
of full channel vectors.  The pipeline: departure-angle acquisition from
uplink snapshots, leakage-based precoding with alternating path pruning,
precoded pilot training, random-vector-quantized gain feedback, and both
closed-form and Monte Carlo rate evaluation, plus distortion and rate-gap
analysis of the quantizer.
"""

from .aod import (AodEstimate, MusicSpectrum, estimate_aods, music_spectrum,
                  sample_covariance, synth_uplink_snapshots)
from .bounds import (bits_for_rate_gap, delta_factor, distortion_bound,
                     distortion_closed_form, rate_gap_bound, rvq_gamma,
                     single_cell_rate_bound)
from .channel import (ChannelRealization, Geometry, as_rng, draw_gains,
                      draw_scenario, realize_channel, steering_matrix,
                      steering_tensor, steering_vector)
from .config import SystemConfig, dump_config, load_config, single_station_preset
from .feedback import (Codebook, csi_baseline_feedback, csi_bits_rule,
                       gen_rvq_codebook, quantize_directions, quantize_pgi,
                       reconstruct_pgi, rzf_precoder_array, rzf_precoders)
from .harness import (SCHEMES, SWEEP_AXES, SweepResult, TrialResult, apply_axis,
                      provisional_noise_var, run_sweep, run_trial, trial_key)
from .pilots import (PilotBook, build_pilot_precoder, despread,
                     gen_pilot_sequences, lmmse_pgi, simulate_training)
from .rates import (BreakdownResult, RunningMoments, channels_from_gains,
                    ideal_rate_closed_form, mc_rate, measure_distortion,
                    measure_distortion_ensemble, noise_variance_for_snr,
                    pgi_precoder_array, power_terms,
                    quadratic_moment_closed_form, rate_breakdown,
                    rate_from_powers, selected_coupling,
                    selected_steering_blocks, sinr_terms, slnr_value)
from .selection import (SelectionState, SlnrOperands, build_slnr_operands,
                        choose_path_budget, optimize_on_sets, prune_one_path,
                        select_dominating_paths, slnr_precoder)
from .sweep_io import (SweepFormatError, SweepRow, SweepTable, load_sweep,
                       render_sweep, save_sweep)

__version__ = "0.1.0"

__all__ = [
    "AodEstimate", "MusicSpectrum", "estimate_aods", "music_spectrum",
    "sample_covariance", "synth_uplink_snapshots",
    "bits_for_rate_gap", "delta_factor", "distortion_bound",
    "distortion_closed_form", "rate_gap_bound", "rvq_gamma",
    "single_cell_rate_bound",
    "ChannelRealization", "Geometry", "as_rng", "draw_gains", "draw_scenario",
    "realize_channel", "steering_matrix", "steering_tensor", "steering_vector",
    "SystemConfig", "dump_config", "load_config", "single_station_preset",
    "Codebook", "csi_baseline_feedback", "csi_bits_rule", "gen_rvq_codebook",
    "quantize_directions", "quantize_pgi", "reconstruct_pgi",
    "rzf_precoder_array", "rzf_precoders",
    "SCHEMES", "SWEEP_AXES", "SweepResult", "TrialResult", "apply_axis",
    "provisional_noise_var", "run_sweep", "run_trial", "trial_key",
    "PilotBook", "build_pilot_precoder", "despread", "gen_pilot_sequences",
    "lmmse_pgi", "simulate_training",
    "BreakdownResult", "RunningMoments", "channels_from_gains",
    "ideal_rate_closed_form", "mc_rate", "measure_distortion",
    "measure_distortion_ensemble", "noise_variance_for_snr",
    "pgi_precoder_array", "power_terms", "quadratic_moment_closed_form",
    "rate_breakdown", "rate_from_powers", "selected_coupling",
    "selected_steering_blocks", "sinr_terms", "slnr_value",
    "SelectionState", "SlnrOperands", "build_slnr_operands",
    "choose_path_budget", "optimize_on_sets", "prune_one_path",
    "select_dominating_paths", "slnr_precoder",
    "SweepFormatError", "SweepRow", "SweepTable", "load_sweep", "render_sweep",
    "save_sweep",
    "__version__",
]
