"""Plane-wave propagation through a lossy isotropic slab.

A TE plane wave crossing a medium with conductivity sigma, permittivity
eps and permeability mu picks up a complex wavenumber

    k = omega * sqrt(mu * eps_complex),   eps_complex = eps - j*sigma/omega.

Splitting k into real/imaginary parts gives a distance-proportional phase
(theta) and an exponential amplitude attenuation (alpha).  The relay's
forwarding gains are chosen to cancel alpha, so the blockage-through
matrix ends up with unit-modulus entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Vacuum constants (CODATA); the model only ever needs their products.
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
VACUUM_PERMEABILITY = 1.25663706212e-6  # H/m
SPEED_OF_LIGHT = 2.99792458e8  # m/s


@dataclass(frozen=True)
class MediumParams:
    """Material constants of the blockage plus the carrier wavelength."""

    conductivity: float  # S/m
    relative_permittivity: float
    relative_permeability: float
    carrier_wavelength: float  # m

    def __post_init__(self):
        if self.conductivity < 0:
            raise ValueError("conductivity must be >= 0")
        if self.relative_permittivity <= 0 or self.relative_permeability <= 0:
            raise ValueError("permittivity/permeability must be positive")
        if self.carrier_wavelength <= 0:
            raise ValueError("carrier wavelength must be positive")

    @property
    def permittivity(self) -> float:
        return self.relative_permittivity * VACUUM_PERMITTIVITY

    @property
    def permeability(self) -> float:
        return self.relative_permeability * VACUUM_PERMEABILITY


@dataclass(frozen=True)
class PropagationConstants:
    angular_frequency: float  # rad/s
    loss_angle: float  # rad, arctan(sigma / (omega eps))
    c1: float  # rad/m, omega * sqrt(mu eps)
    c1_hat: float  # rad/m, phase-rate: c1 * sec^(1/2)(gamma) * cos(gamma/2)
    attenuation_rate: float  # 1/m, c1 * sec^(1/2)(gamma) * sin(gamma/2)


def propagation_constants(medium: MediumParams) -> PropagationConstants:
    """Derive angular frequency, loss angle and phase/attenuation rates."""
    omega = 2.0 * math.pi * SPEED_OF_LIGHT / medium.carrier_wavelength
    eps = medium.permittivity
    mu = medium.permeability
    gamma = math.atan2(medium.conductivity, omega * eps)
    c1 = omega * math.sqrt(mu * eps)
    sec_half = (1.0 / math.cos(gamma)) ** 0.5
    return PropagationConstants(
        angular_frequency=omega,
        loss_angle=gamma,
        c1=c1,
        c1_hat=c1 * sec_half * math.cos(0.5 * gamma),
        attenuation_rate=c1 * sec_half * math.sin(0.5 * gamma),
    )


def attenuation_and_phase(
    consts: PropagationConstants, ref_distance: float, fa_distance: float
) -> tuple[float, float]:
    """Amplitude coefficient alpha over the reference path and the phase
    shift theta for one antenna pair.

    The phase is returned unwrapped (radians); callers wrap it only when
    forming the complex exponential.
    """
    if ref_distance <= 0 or fa_distance <= 0:
        raise ValueError("distances must be positive")
    alpha = math.exp(-consts.attenuation_rate * ref_distance)
    theta = consts.c1_hat * fa_distance
    return alpha, theta


@dataclass(frozen=True)
class ThroughMatrix:
    """Blockage-through matrix after forwarding-gain cancellation."""

    entries: np.ndarray  # (M, M) complex, entry (p, q) couples u_q -> b_p
    alpha: float
    forwarding_gain: float  # sqrt(1/alpha), diagonal of both forwarding matrices


def through_matrix(
    consts: PropagationConstants,
    faru_positions: np.ndarray,
    farb_positions: np.ndarray,
    ref_distance: float,
    per_pair_attenuation: bool = False,
) -> ThroughMatrix:
    """Build Theta from the two antenna face position matrices (3 x M).

    With the default reference-point approximation every per-pair alpha
    equals the common alpha, which the forwarding gains cancel exactly, so
    |Theta_pq| = 1.  ``per_pair_attenuation=True`` keeps the exact
    exp(-rate * d_pq) amplitudes (divided by the common gain) for error
    studies.
    """
    u = np.asarray(faru_positions, dtype=float)
    b = np.asarray(farb_positions, dtype=float)
    if u.shape[0] != 3 or b.shape[0] != 3:
        raise ValueError("position matrices must be 3 x M")
    if u.shape[1] != b.shape[1]:
        raise ValueError("FAR-U and FAR-B antenna counts differ")
    if ref_distance <= 0:
        raise ValueError("reference distance must be positive")

    # pairwise distances d_pq = ||b_p - u_q||
    diff = b.T[:, None, :] - u.T[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    alpha = math.exp(-consts.attenuation_rate * ref_distance)
    entries = np.exp(-1j * consts.c1_hat * dist)
    if per_pair_attenuation:
        entries = entries * np.exp(-consts.attenuation_rate * dist) / alpha
    return ThroughMatrix(
        entries=entries, alpha=alpha, forwarding_gain=math.sqrt(1.0 / alpha)
    )
