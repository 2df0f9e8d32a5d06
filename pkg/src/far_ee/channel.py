"""Rician channel synthesis and large-scale pathloss.

One "scenario draw" fixes the block-fading state: user drop points, all
link angles, gamma shadowing multipliers and the Gaussian small-scale
components.  Everything is generated from a counter-based Philox stream
so a (config, seed) pair reproduces bit-identical channels and the three
schemes can share one draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Placement, ScenarioConfig, steering_vector, wave_vector
from .propagation import MediumParams, ThroughMatrix, propagation_constants, through_matrix


@dataclass(frozen=True)
class AngleSet:
    """Elevation/azimuth pairs for every LoS link, all in [0, pi].

    user_aod[k] parameterises the wave vector at user k's FA region,
    user_aoa[k] the arrival at the FAR-U face; bs_aod / bs_aoa cover the
    FAR-B -> BS link.
    """

    user_aod: np.ndarray  # (K, 2)
    user_aoa: np.ndarray  # (K, 2)
    bs_aod: np.ndarray  # (2,)
    bs_aoa: np.ndarray  # (2,)


@dataclass(frozen=True)
class FadingDraw:
    mu_k: np.ndarray  # (K,) gamma shadowing multipliers
    mu_0: float
    hhat_k: np.ndarray  # (M, K) unit-variance CSCG
    Hhat_0: np.ndarray  # (N, M) unit-variance CSCG

    def __post_init__(self):
        if np.any(self.mu_k <= 0) or self.mu_0 <= 0:
            raise ValueError("gamma multipliers must be positive")


def scenario_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _cscg(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def draw_user_refs(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Drop points o_k on the ground plane, (3, K)."""
    region = config.user_region
    K = config.num_users
    refs = np.zeros((3, K))
    if region.kind == "disc":
        # uniform on the disc via sqrt-radius
        r = region.radius * np.sqrt(rng.random(K))
        phi = 2.0 * math.pi * rng.random(K)
        refs[0] = region.center_x + r * np.cos(phi)
        refs[1] = region.center_y + r * np.sin(phi)
    else:
        refs[0] = region.center_x + region.width * (rng.random(K) - 0.5)
        refs[1] = region.center_y + region.depth * (rng.random(K) - 0.5)
    return refs


def draw_angles(config: ScenarioConfig, rng: np.random.Generator) -> AngleSet:
    K = config.num_users
    return AngleSet(
        user_aod=rng.uniform(0.0, math.pi, size=(K, 2)),
        user_aoa=rng.uniform(0.0, math.pi, size=(K, 2)),
        bs_aod=rng.uniform(0.0, math.pi, size=2),
        bs_aoa=rng.uniform(0.0, math.pi, size=2),
    )


def draw_fading(config: ScenarioConfig, rng: np.random.Generator) -> FadingDraw:
    K, M, N = config.num_users, config.num_far_antennas, config.num_bs_antennas
    return FadingDraw(
        mu_k=rng.gamma(config.gamma_shape, config.gamma_scale, size=K),
        mu_0=float(rng.gamma(config.gamma_shape, config.gamma_scale)),
        hhat_k=_cscg(rng, (M, K)),
        Hhat_0=_cscg(rng, (N, M)),
    )


def pathloss(distance: float, mu: float, exponent: float) -> float:
    """beta = mu / distance**exponent."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    if mu <= 0:
        raise ValueError("shadowing multiplier must be positive")
    if not 2.0 <= exponent <= 6.0:
        raise ValueError("pathloss exponent outside [2, 6]")
    return mu / distance**exponent


def _rician_weights(factor: float) -> tuple[float, float]:
    if math.isinf(factor):
        return 1.0, 0.0
    if factor < 0:
        raise ValueError("Rician factor must be >= 0")
    return math.sqrt(factor / (factor + 1.0)), math.sqrt(1.0 / (factor + 1.0))


def synthesize_user_channel(
    config: ScenarioConfig,
    placement: Placement,
    angles: AngleSet,
    draw: FadingDraw,
    k: int,
) -> np.ndarray:
    """Small-scale channel from user k to the FAR-U face, (M,) complex."""
    los_w, nlos_w = _rician_weights(config.rician_k1)
    kap_aoa = wave_vector(*angles.user_aoa[k])
    kap_aod = wave_vector(*angles.user_aod[k])
    rho_u = steering_vector(placement.U, placement.o_u, kap_aoa, config.wavelength)
    rho_t = steering_vector(
        placement.T[:, k], placement.user_refs[:, k], kap_aod, config.wavelength
    )[0]
    return los_w * rho_u * np.conj(rho_t) + nlos_w * draw.hhat_k[:, k]


def synthesize_far_bs_channel(
    config: ScenarioConfig,
    placement: Placement,
    angles: AngleSet,
    draw: FadingDraw,
) -> np.ndarray:
    """Channel from the FAR-B face to the BS, (N, M) complex."""
    los_w, nlos_w = _rician_weights(config.rician_k0)
    kap_aoa = wave_vector(*angles.bs_aoa)
    kap_aod = wave_vector(*angles.bs_aod)
    rho_r = steering_vector(placement.R, np.zeros(3), kap_aoa, config.wavelength)
    rho_b = steering_vector(placement.B, placement.o_b, kap_aod, config.wavelength)
    return los_w * np.outer(rho_r, np.conj(rho_b)) + nlos_w * draw.Hhat_0


@dataclass
class ChannelRealization:
    beta_k: np.ndarray  # (K,)
    beta_0: float
    h_k: np.ndarray  # (M, K), column k = channel of user k
    H_0: np.ndarray  # (N, M)
    theta_matrix: ThroughMatrix
    H: np.ndarray  # (N, M) = H_0 @ Theta


def medium_from_config(config: ScenarioConfig) -> MediumParams:
    return MediumParams(
        conductivity=config.conductivity,
        relative_permittivity=config.relative_permittivity,
        relative_permeability=config.relative_permeability,
        carrier_wavelength=config.wavelength,
    )


def build_channel(
    config: ScenarioConfig,
    placement: Placement,
    angles: AngleSet,
    draw: FadingDraw,
) -> ChannelRealization:
    """Assemble the full uplink channel for one placement and fading state."""
    K = config.num_users
    dists = np.linalg.norm(placement.T - placement.o_u[:, None], axis=0)
    if np.any(dists <= 0):
        raise ValueError("distance must be positive")
    beta_k = draw.mu_k / dists**config.pathloss_exponent

    # all user channels at once (vectorized synthesize_user_channel)
    los_w, nlos_w = _rician_weights(config.rician_k1)
    el_a, az_a = angles.user_aoa[:, 0], angles.user_aoa[:, 1]
    el_d, az_d = angles.user_aod[:, 0], angles.user_aod[:, 1]
    kap_aoa = np.stack([np.sin(el_a) * np.cos(az_a), np.cos(el_a),
                        np.sin(el_a) * np.sin(az_a)])  # (3, K)
    kap_aod = np.stack([np.sin(el_d) * np.cos(az_d), np.cos(el_d),
                        np.sin(el_d) * np.sin(az_d)])
    two_pi_l = 2.0 * math.pi / config.wavelength
    rho_u = np.exp(1j * two_pi_l
                   * ((placement.U - placement.o_u[:, None]).T @ kap_aoa))  # (M, K)
    rho_t = np.exp(1j * two_pi_l
                   * np.sum((placement.T - placement.user_refs) * kap_aod, axis=0))
    h_k = los_w * rho_u * np.conj(rho_t)[None, :] + nlos_w * draw.hhat_k

    d0 = float(np.linalg.norm(placement.o_b))  # BS reference is the origin
    mu0 = draw.mu_0**2 if config.beta0_squared else draw.mu_0
    beta_0 = pathloss(d0, mu0, config.pathloss_exponent)

    H_0 = synthesize_far_bs_channel(config, placement, angles, draw)
    consts = propagation_constants(medium_from_config(config))
    ref_distance = float(np.linalg.norm(placement.o_b - placement.o_u))
    theta = through_matrix(
        consts, placement.U, placement.B, ref_distance,
        per_pair_attenuation=config.per_pair_attenuation,
    )
    return ChannelRealization(
        beta_k=beta_k, beta_0=beta_0, h_k=h_k, H_0=H_0,
        theta_matrix=theta, H=H_0 @ theta.entries,
    )
