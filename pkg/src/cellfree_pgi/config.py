"""System configuration and the JSON config-file interface.

All physical and protocol parameters of a simulation live in a single
:class:`SystemConfig`.  Config files are plain JSON objects whose keys match
the dataclass field names exactly; unknown keys are rejected so that typos
fail loudly instead of silently running the defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["SystemConfig", "load_config", "dump_config", "single_station_preset"]

_BASELINES = ("ideal_pgi", "rvq_csi", "random_path")
_RATE_MODES = ("instantaneous", "ratio")


@dataclass
class SystemConfig:
    """Parameters of one cell-free downlink simulation.

    Attributes
    ----------
    num_bs:
        Number of base stations M.
    num_users:
        Number of single-antenna users K.
    num_antennas:
        Antennas N per base-station uniform linear array.
    num_paths:
        Propagation paths P between each base station and each user.
    path_budget:
        Total number of dominating paths L each user feeds back, summed
        over all base stations.
    feedback_bits:
        Codebook size exponent B; the gain-direction codebook holds 2**B words.
    snr_db:
        Target downlink SNR in dB.  The data noise variance is calibrated so
        that the mean received signal-plus-interference power over users sits
        at this SNR.
    spacing_ratio:
        Antenna spacing divided by carrier wavelength (d / lambda).
    angular_spread:
        Width in degrees of the uniform angle window around the geometric
        bearing from which path departure angles are drawn.
    area_side:
        Side length of the square deployment area (km); positions are
        dimensionless multiples of this.
    pilot_noise_var:
        Additive noise variance sigma_z^2 on the despread downlink pilots.
        ``None`` means "derived": equal to the calibrated data noise variance
        when ``pilot_noise_equals_data_noise`` is set, else 0.
    master_seed:
        Root seed of the reproducible seed lineage.
    trials:
        Monte Carlo trials (independent scenario draws) per sweep point.
    pilot_noise_equals_data_noise:
        When true and ``pilot_noise_var`` is unset, pilots see the same noise
        variance as data transmission.
    use_estimated_aods:
        When true, departure angles used for selection/precoding come from
        subspace estimation on synthetic uplink snapshots instead of the true
        scenario angles.  Channel realizations always use the true angles.
    music_snapshots:
        Uplink snapshots per (base station, user) pair for angle estimation.
    music_snr_db:
        SNR of those synthetic uplink snapshots.
    gain_draws:
        Path-gain realizations drawn per trial; every scheme in a trial is
        evaluated on this same block of draws.
    rate_mode:
        How per-trial rates reduce over the gain draws: ``instantaneous``
        averages log2(1 + SINR) per draw, ``ratio`` averages signal and
        interference powers first and takes a single log.
    baselines:
        Comparison schemes evaluated alongside the proposed scheme, drawn
        from ``ideal_pgi``, ``rvq_csi``, ``random_path``.  Empty means the
        proposed scheme runs alone.
    """

    num_bs: int = 5
    num_users: int = 5
    num_antennas: int = 8
    num_paths: int = 4
    path_budget: int = 8
    feedback_bits: int = 6
    snr_db: float = 15.0
    spacing_ratio: float = 0.5
    angular_spread: float = 10.0
    area_side: float = 1.0
    pilot_noise_var: float | None = None
    master_seed: int = 0
    trials: int = 200
    pilot_noise_equals_data_noise: bool = True
    use_estimated_aods: bool = False
    music_snapshots: int = 64
    music_snr_db: float = 20.0
    gain_draws: int = 64
    rate_mode: str = "instantaneous"
    baselines: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("num_bs", "num_users", "num_antennas", "num_paths",
                     "path_budget", "feedback_bits", "music_snapshots"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if min(self.num_bs, self.num_users, self.num_antennas, self.num_paths) < 1:
            raise ValueError("num_bs, num_users, num_antennas, num_paths must be >= 1")
        if not 1 <= self.path_budget <= self.num_bs * self.num_paths:
            raise ValueError(
                f"path_budget must lie in [1, num_bs*num_paths="
                f"{self.num_bs * self.num_paths}], got {self.path_budget}")
        if self.feedback_bits < 0:
            raise ValueError("feedback_bits must be >= 0")
        if self.spacing_ratio <= 0:
            raise ValueError("spacing_ratio must be positive")
        if self.angular_spread < 0:
            raise ValueError("angular_spread must be >= 0")
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if self.pilot_noise_var is not None and self.pilot_noise_var < 0:
            raise ValueError("pilot_noise_var must be >= 0 when given")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not isinstance(self.gain_draws, int) or self.gain_draws < 2:
            raise ValueError("gain_draws must be an integer >= 2")
        if self.rate_mode not in _RATE_MODES:
            raise ValueError(f"rate_mode must be one of {_RATE_MODES}, got {self.rate_mode!r}")
        self.baselines = tuple(self.baselines)
        if len(set(self.baselines)) != len(self.baselines):
            raise ValueError("baselines must not repeat")
        for name in self.baselines:
            if name not in _BASELINES:
                raise ValueError(f"unknown baseline {name!r}; valid: {_BASELINES}")

    def replace(self, **changes) -> "SystemConfig":
        """Return a copy with the given fields changed (re-validated)."""
        return dataclasses.replace(self, **changes)

    def resolved_pilot_noise_var(self, data_noise_var: float) -> float:
        """Pilot noise variance to use given the calibrated data noise."""
        if self.pilot_noise_var is not None:
            return float(self.pilot_noise_var)
        return float(data_noise_var) if self.pilot_noise_equals_data_noise else 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path) -> SystemConfig:
    """Read a JSON config file; keys must match :class:`SystemConfig` fields."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys {unknown}; valid keys: {sorted(known)}")
    return SystemConfig(**raw)


def dump_config(config: SystemConfig, path: str | Path) -> None:
    """Write ``config`` as pretty-printed JSON readable by :func:`load_config`."""
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


def single_station_preset(**overrides) -> SystemConfig:
    """Single-station setup with many paths and a tight budget (M=1, P=8, L=4).

    The inverted path/budget relation relative to the multi-station defaults
    is deliberate: with one station, selection pressure comes from a rich
    local scatterer set rather than from station diversity.
    """
    params = dict(num_bs=1, num_paths=8, path_budget=4)
    params.update(overrides)
    return SystemConfig(**params)
