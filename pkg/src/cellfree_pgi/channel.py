"""Geometry, array steering, and ray-based channel realizations.

The downlink channel between base station m and user k is a sum of P plane
waves: ``h = A g`` where the columns of ``A`` are uniform-linear-array
steering vectors at the path departure angles and ``g`` holds i.i.d. unit
variance complex normal path gains.  Angles are radians measured from array
broadside throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_rng",
    "steering_vector",
    "steering_matrix",
    "Geometry",
    "draw_scenario",
    "steering_tensor",
    "ChannelRealization",
    "realize_channel",
    "draw_gains",
]


def as_rng(seed) -> np.random.Generator:
    """Coerce an int / SeedSequence / Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def steering_vector(angle: float, num_antennas: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA steering vector ``[1, e^{-j 2 pi (d/lambda) sin(angle)}, ...]``.

    Element n carries phase ``-2 pi n (d/lambda) sin(angle)``; the first entry
    is always 1 and every entry has unit modulus.
    """
    n = np.arange(num_antennas)
    return np.exp(-2j * np.pi * spacing_ratio * n * np.sin(angle))


def steering_matrix(angles, num_antennas: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """Stack steering vectors for ``angles`` as columns, shape (N, len(angles))."""
    angles = np.asarray(angles, dtype=float)
    n = np.arange(num_antennas)[:, None]
    return np.exp(-2j * np.pi * spacing_ratio * n * np.sin(angles)[None, :])


@dataclass
class Geometry:
    """One scenario draw: positions and per-path departure angles.

    Attributes
    ----------
    bs_positions:
        (M, 2) base-station coordinates inside the deployment square.
    user_positions:
        (K, 2) user coordinates.
    nominal_aods:
        (M, K) broadside-referenced bearing from each base station to each
        user, in radians within (-pi/2, pi/2].
    path_aods:
        (M, K, P) per-path departure angles, each within half the angular
        spread of the corresponding nominal bearing, sorted ascending along
        the path axis.
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    nominal_aods: np.ndarray
    path_aods: np.ndarray


def _broadside_wrap(bearing: np.ndarray) -> np.ndarray:
    """Fold a 2-D bearing in (-pi, pi] onto the ULA's unambiguous range.

    A linear array cannot distinguish ``theta`` from ``pi - theta`` (equal
    ``sin``), so bearings behind the array fold forward: the result is
    ``arcsin(sin(bearing))`` in [-pi/2, pi/2].
    """
    return np.arcsin(np.sin(bearing))


def draw_scenario(config, seed) -> Geometry:
    """Drop base stations and users uniformly and draw path departure angles.

    Path angles are the nominal bearing plus i.i.d. uniform offsets in
    ``[-spread/2, +spread/2]`` degrees, sorted ascending per (m, k) pair so
    that path indices have a stable, orientation-free meaning.
    """
    rng = as_rng(seed)
    m, k, p = config.num_bs, config.num_users, config.num_paths
    bs = rng.uniform(0.0, config.area_side, size=(m, 2))
    users = rng.uniform(0.0, config.area_side, size=(k, 2))
    delta = users[None, :, :] - bs[:, None, :]
    nominal = _broadside_wrap(np.arctan2(delta[..., 1], delta[..., 0]))
    half = np.deg2rad(config.angular_spread) / 2.0
    offsets = rng.uniform(-half, half, size=(m, k, p))
    paths = np.sort(nominal[..., None] + offsets, axis=-1)
    return Geometry(bs_positions=bs, user_positions=users,
                    nominal_aods=nominal, path_aods=paths)


def steering_tensor(path_aods: np.ndarray, num_antennas: int,
                    spacing_ratio: float = 0.5) -> np.ndarray:
    """Steering matrices for every (m, k) pair, shape (M, K, N, P)."""
    n = np.arange(num_antennas).reshape(1, 1, -1, 1)
    return np.exp(-2j * np.pi * spacing_ratio * n * np.sin(path_aods)[:, :, None, :])


@dataclass
class ChannelRealization:
    """Path gains and the channels they generate for one coherence block.

    ``channels[m, k] == steering[m, k] @ gains[m, k]`` by construction.
    """

    gains: np.ndarray     # (M, K, P) complex
    channels: np.ndarray  # (M, K, N) complex


def draw_gains(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. unit-variance circularly symmetric complex normal draws."""
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return (real + 1j * imag) / np.sqrt(2.0)


def realize_channel(steering: np.ndarray, seed) -> ChannelRealization:
    """Draw fresh path gains and form ``h = A g`` for every (m, k) pair."""
    rng = as_rng(seed)
    m, k, _, p = steering.shape
    gains = draw_gains(rng, (m, k, p))
    channels = np.einsum("mknp,mkp->mkn", steering, gains)
    return ChannelRealization(gains=gains, channels=channels)
