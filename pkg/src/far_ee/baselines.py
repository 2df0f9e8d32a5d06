"""Comparison schemes: energy-splitting surface relay and fixed AF relay.

Both baselines consume the same seeded scenario draw as the main scheme
(user drops, angles, fading), keep the default grid placements fixed,
and optimize only transmit powers and receive beamformers.  They differ
in how the blockage is bridged and in their circuit-power models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelRealization, build_channel, draw_angles, draw_fading,
    draw_user_refs, scenario_rng,
)
from .geometry import ScenarioConfig, dbm_to_watt, initial_placement
from .metrics import ControlState, LinkReport, check_solution
from .optimizer import OptimizerState, optimize_power_beamforming, repair_feasibility
from .propagation import ThroughMatrix


@dataclass(frozen=True)
class BaselineConfig:
    scheme: str  # "sris" | "afr"
    element_count: int
    element_power: float  # watt, per element / antenna
    transmission_coeff: float = 0.9
    reflection_coeff: float = 0.1

    def __post_init__(self):
        if self.scheme not in ("sris", "afr"):
            raise ValueError(f"unknown baseline scheme {self.scheme!r}")
        if self.transmission_coeff < 0 or self.reflection_coeff < 0:
            raise ValueError("energy-splitting coefficients must be >= 0")
        if self.transmission_coeff + self.reflection_coeff > 1.0 + 1e-12:
            raise ValueError("energy split exceeds unit power")
        if self.element_count <= 0:
            raise ValueError("element_count must be positive")


def baseline_config(config: ScenarioConfig, scheme: str) -> BaselineConfig:
    if scheme == "sris":
        return BaselineConfig(
            scheme="sris",
            element_count=2 * config.num_far_antennas,
            element_power=config.circuit_power_sris_element,
            transmission_coeff=config.sris_transmission_coeff,
            reflection_coeff=config.sris_reflection_coeff,
        )
    return BaselineConfig(
        scheme="afr",
        element_count=2 * config.num_far_antennas,
        element_power=config.circuit_power_afr_antenna,
        transmission_coeff=1.0,
        reflection_coeff=0.0,
    )


def sris_phases(
    config: ScenarioConfig,
    channels: ChannelRealization,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-element phases for the transmission-side coefficient matrix.

    Default: co-phase the cascade of the strongest user so the element
    contributions (sum_n H0[n, m]) * e^{j phi_m} * h_{m,k*} add up
    coherently at a uniform-reference combiner.  With the random-phase
    ablation enabled, draw uniform phases instead.
    """
    if config.sris_random_phases:
        if rng is None:
            raise ValueError("random-phase mode needs the scenario rng")
        return rng.uniform(0.0, 2.0 * np.pi, size=config.num_far_antennas)
    k_star = int(np.argmax(channels.beta_k))
    combined = channels.H_0.sum(axis=0) * channels.h_k[:, k_star]
    return -np.angle(combined)


def sris_theta(
    config: ScenarioConfig,
    channels: ChannelRealization,
    rng: np.random.Generator | None = None,
) -> ThroughMatrix:
    """Diagonal energy-splitting coefficient matrix replacing the AF path."""
    phases = sris_phases(config, channels, rng)
    amp = np.sqrt(config.sris_transmission_coeff)
    entries = np.diag(amp * np.exp(1j * phases))
    return ThroughMatrix(entries=entries, alpha=1.0, forwarding_gain=1.0)


def _shared_scenario(config: ScenarioConfig, seed: int):
    rng = scenario_rng(seed)
    refs = draw_user_refs(config, rng)
    angles = draw_angles(config, rng)
    fading = draw_fading(config, rng)
    placement = initial_placement(config, refs)
    return rng, refs, angles, fading, placement


def _optimize_control(config, placement, angles, fading, channels, scheme):
    state = OptimizerState(
        config=config, placement=placement,
        control=ControlState(
            p=np.full(config.num_users, config.max_power / 2.0),
            Omega=_mrc(channels),
        ),
        angles=angles, draw=fading, channels=channels, scheme=scheme,
    )
    if not repair_feasibility(state):
        state.feasible = False
        return state
    ctrl, ee, feasible = optimize_power_beamforming(
        config, channels, state.control, scheme=scheme)
    if feasible:
        state.control = ctrl
    state.feasible = state.report().feasible
    return state


def _mrc(channels: ChannelRealization) -> np.ndarray:
    cols = channels.H @ channels.h_k
    return cols / np.linalg.norm(cols, axis=0, keepdims=True)


def evaluate_sris(config: ScenarioConfig, seed: int) -> LinkReport:
    """Energy-splitting surface baseline: fixed grids, co-phased elements,
    power/beamforming optimized; reflection-side energy is lost (users and
    BS sit on opposite sides of the blockage)."""
    rng, refs, angles, fading, placement = _shared_scenario(config, seed)
    base = build_channel(config, placement, angles, fading)
    theta = sris_theta(config, base, rng)
    channels = ChannelRealization(
        beta_k=base.beta_k, beta_0=base.beta_0, h_k=base.h_k, H_0=base.H_0,
        theta_matrix=theta, H=base.H_0 @ theta.entries,
    )
    state = _optimize_control(config, placement, angles, fading, channels, "sris")
    return state.report()


def evaluate_afr(config: ScenarioConfig, seed: int) -> LinkReport:
    """Fixed-antenna AF relay baseline: same forwarding model as the main
    scheme but antennas pinned to the initial grids; only powers and
    beamformers are optimized."""
    _, refs, angles, fading, placement = _shared_scenario(config, seed)
    channels = build_channel(config, placement, angles, fading)
    state = _optimize_control(config, placement, angles, fading, channels, "afr")
    return state.report()
