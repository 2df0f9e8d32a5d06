"""Link-level metrics: SINR, rates, energy efficiency, feasibility report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .geometry import Placement, ScenarioConfig, validate_placement


@dataclass
class ControlState:
    p: np.ndarray  # (K,) transmit powers, W
    Omega: np.ndarray  # (N, K) complex, column k = receive beamformer for user k

    def copy(self) -> "ControlState":
        return ControlState(self.p.copy(), self.Omega.copy())


def circuit_power(config: ScenarioConfig, scheme: str = "far") -> float:
    """Static power drawn besides transmit power, per comparison scheme."""
    if scheme == "far":
        return config.circuit_power_bs + config.circuit_power_far
    if scheme == "sris":
        return config.circuit_power_bs + 2 * config.num_far_antennas * config.circuit_power_sris_element
    if scheme == "afr":
        return config.circuit_power_bs + 2 * config.num_far_antennas * config.circuit_power_afr_antenna
    raise ValueError(f"unknown scheme {scheme!r}")


def sinr(
    k: int,
    control: ControlState,
    channels: ChannelRealization,
    config: ScenarioConfig,
) -> float:
    """Post-combining SINR of user k at the BS.

    The relay amplifies its own thermal noise, so the combined noise floor
    carries both the BS term and a beamformer-shaped forwarded term.
    """
    H, h = channels.H, channels.h_k
    w = control.Omega[:, k]
    b0, bk = channels.beta_0, channels.beta_k
    gains = np.abs(w.conj() @ H @ h) ** 2  # (K,)
    signal = control.p[k] * b0 * bk[k] * gains[k]
    interference = sum(
        control.p[i] * b0 * bk[i] * gains[i] for i in range(config.num_users) if i != k
    )
    relay_noise = b0 * config.noise_faru_total * float(np.linalg.norm(w.conj() @ H) ** 2)
    return float(signal / (config.noise_bs_total + relay_noise + interference))


def all_sinrs(control, channels, config) -> np.ndarray:
    """Vectorized post-combining SINRs; matches sinr(k, ...) per entry."""
    V = control.Omega.conj().T @ channels.H  # (K, M)
    gains = np.abs(V @ channels.h_k) ** 2  # [k, i] = |w_k^H H h_i|^2
    b0, bk, p = channels.beta_0, channels.beta_k, control.p
    weighted = p * b0 * bk  # (K,)
    signal = weighted * np.diagonal(gains)
    interference = gains @ weighted - signal
    relay = b0 * config.noise_faru_total * np.sum(np.abs(V) ** 2, axis=1)
    return signal / (config.noise_bs_total + relay + interference)


def rates_from_sinr(gammas: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    return config.bandwidth * np.log2(1.0 + np.asarray(gammas))


def energy_efficiency(
    rates: np.ndarray, p: np.ndarray, config: ScenarioConfig, scheme: str = "far"
) -> float:
    """bit/J: sum rate over transmit plus scheme circuit power."""
    total_power = float(np.sum(p)) + circuit_power(config, scheme)
    return float(np.sum(rates)) / total_power


# fixed column order of the harness CSV (schema v1)
CSV_COLUMNS = (
    "scenario_hash", "seed", "scheme", "axis", "axis_value",
    "ee", "sum_rate", "total_power", "min_rate_margin", "feasible",
    "outer_iterations",
)


@dataclass
class LinkReport:
    sinr: np.ndarray
    rates: np.ndarray
    sum_rate: float
    total_power: float
    ee: float
    feasible: bool
    violations: dict = field(default_factory=dict)

    def csv_fragment(self) -> dict:
        return {
            "ee": f"{self.ee:.10e}",
            "sum_rate": f"{self.sum_rate:.10e}",
            "total_power": f"{self.total_power:.10e}",
            "min_rate_margin": f"{float(np.min(self.rates)):.10e}",
            "feasible": int(self.feasible),
        }


def check_solution(
    placement: Placement,
    control: ControlState,
    channels: ChannelRealization,
    config: ScenarioConfig,
    scheme: str = "far",
    tol: float = 1e-6,
) -> LinkReport:
    """Evaluate the full constraint set and the EE objective.

    Rate violations are reported relative to the rate floor so the 1e-6
    tolerance is scale-free; power and position checks are absolute.
    """
    gammas = all_sinrs(control, channels, config)
    rates = rates_from_sinr(gammas, config)
    violations: dict[str, float] = {}

    if config.min_rate > 0:
        rate_gap = float(np.max((config.min_rate - rates) / config.min_rate))
        violations["min_rate"] = max(0.0, rate_gap)
    violations["power_low"] = max(0.0, float(-np.min(control.p)))
    violations["power_high"] = max(0.0, float(np.max(control.p) - config.max_power))
    violations["beam_norm"] = max(
        0.0, float(np.max(np.linalg.norm(control.Omega, axis=0)) - 1.0)
    )
    for family, (_, worst) in validate_placement(placement, config, tol).items():
        violations[family] = worst

    worst = max(violations.values()) if violations else 0.0
    total_power = float(np.sum(control.p)) + circuit_power(config, scheme)
    sum_rate = float(np.sum(rates))
    return LinkReport(
        sinr=gammas,
        rates=rates,
        sum_rate=sum_rate,
        total_power=total_power,
        ee=sum_rate / total_power,
        feasible=worst <= tol,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# normalized quantities used by the solvers


def normalized_noise(k: int, control, channels, config) -> tuple[float, float]:
    """(sigma_hat_r^2, sigma_hat_u^2): noise terms of the small-scale SINR
    after dividing numerator and denominator by p_k * beta_0 * beta_k."""
    pk, b0, bk = control.p[k], channels.beta_0, channels.beta_k[k]
    return (
        config.noise_bs_total / (pk * b0 * bk),
        config.noise_faru_total / (pk * bk),
    )


def normalized_interference_weights(k: int, control, channels) -> np.ndarray:
    """p_i beta_i / (p_k beta_k) for all i (entry k meaningless, set 0)."""
    w = control.p * channels.beta_k / (control.p[k] * channels.beta_k[k])
    w[k] = 0.0
    return w


def small_scale_sinr(k: int, control, channels, config) -> float:
    """SINR written in beamformer/channel units only; equals sinr() exactly."""
    H, h = channels.H, channels.h_k
    w = control.Omega[:, k]
    gains = np.abs(w.conj() @ H @ h) ** 2
    s_r, s_u = normalized_noise(k, control, channels, config)
    p_hat = normalized_interference_weights(k, control, channels)
    denom = s_r + s_u * float(np.linalg.norm(w.conj() @ H) ** 2) + float(p_hat @ gains)
    return float(gains[k] / denom)
