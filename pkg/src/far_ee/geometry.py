"""Spatial state: scenario constants, antenna placements, steering phases.

Coordinate frame (meters): the BS sits at the origin, the blockage face
toward the BS lies in the plane y = Y0 and the user-side face in
y = Y0 + W.  Users are on the ground plane z = 0.  Every movable antenna
lives in a C x C square region parallel to the x-z plane, so its y
coordinate is fixed and only (x, z) are free.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, fields, asdict, replace

import numpy as np

log = logging.getLogger("far_ee")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class UserRegion:
    """Where user drop points come from: a disc (default) or a rectangle
    centred at (center_x, center_y) on the ground plane."""

    kind: str = "disc"  # "disc" | "rectangle"
    center_x: float = 0.0
    center_y: float = 100.0
    radius: float = 20.0
    width: float = 40.0  # rectangle extent along x
    depth: float = 20.0  # rectangle extent along y

    def __post_init__(self):
        if self.kind not in ("disc", "rectangle"):
            raise ValueError(f"unknown user region kind {self.kind!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int = 4  # K
    num_far_antennas: int = 4  # M, per blockage face
    num_bs_antennas: int = 4  # N
    bandwidth: float = 10e6  # Hz
    wavelength: float = 0.3  # m
    blockage_length: float = 10.0  # L
    blockage_width: float = 0.3  # W
    blockage_height: float = 5.0  # H
    far_bs_distance: float = 50.0  # Y0
    region_size: float = 0.9  # C, movable-region edge (3 wavelengths)
    min_spacing: float = 0.15  # d_min = lambda / 2
    pathloss_exponent: float = 2.6
    rician_k0: float = 3.0 + math.sqrt(12.0)
    rician_k1: float = 3.0 + math.sqrt(12.0)
    noise_bs: float = dbm_to_watt(-174.0)  # sigma_r^2, W/Hz (thermal density)
    noise_faru: float = dbm_to_watt(-90.0)  # sigma_u^2, W (total relay noise)
    max_power: float = dbm_to_watt(5.0)  # W per user
    min_rate: float = 1e6  # bit/s
    circuit_power_bs: float = dbm_to_watt(39.0)  # P_B
    circuit_power_far: float = dbm_to_watt(30.0)  # P_F
    circuit_power_sris_element: float = dbm_to_watt(5.0)  # P_S
    circuit_power_afr_antenna: float = dbm_to_watt(20.0)  # P_A
    conductivity: float = 1e-14
    relative_permittivity: float = 4.0
    relative_permeability: float = 1.0
    gamma_shape: float = 2.0
    gamma_scale: float = 0.5
    user_region: UserRegion = field(default_factory=UserRegion)
    # ---- behaviour switches -------------------------------------------------
    corner_mode: str = "argmax"  # "argmax" | "closed_form" rule for o_b
    beta0_squared: bool = False  # compatibility flag: beta_0 = mu^2 / D^l
    loose_curvature: bool = False  # use the loose closed-form curvature bounds
    per_pair_attenuation: bool = False
    sris_random_phases: bool = False
    sris_transmission_coeff: float = 0.9
    sris_reflection_coeff: float = 0.1

    def __post_init__(self):
        if self.region_size > min(self.blockage_length, self.blockage_height):
            raise ValueError("region size exceeds blockage face")
        if self.num_far_antennas > 1 and self.min_spacing > self.region_size:
            raise ValueError("min spacing larger than region")
        if self.min_rate < 0:
            raise ValueError("min rate must be >= 0")
        if not 2.0 <= self.pathloss_exponent <= 6.0:
            raise ValueError("pathloss exponent outside [2, 6]")
        if self.corner_mode not in ("argmax", "closed_form"):
            raise ValueError(f"unknown corner mode {self.corner_mode!r}")

    # effective noise powers entering the SINR.  The BS noise is a thermal
    # density integrated over the bandwidth; the FAR-U noise is already a
    # total power (a per-Hz reading would leave the rate floor unattainable
    # at the default power budget).
    @property
    def noise_bs_total(self) -> float:
        return self.noise_bs * self.bandwidth

    @property
    def noise_faru_total(self) -> float:
        return self.noise_faru

    @property
    def sinr_floor(self) -> float:
        """Minimum SINR implied by the rate floor."""
        return 2.0 ** (self.min_rate / self.bandwidth) - 1.0

    def canonical_dict(self) -> dict:
        d = asdict(self)
        d["user_region"] = asdict(self.user_region)
        return d

    def scenario_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# keys that arrive in dBm and are stored in watts
_DBM_KEYS = {
    "noise_bs_dbm": "noise_bs",
    "noise_faru_dbm": "noise_faru",
    "max_power_dbm": "max_power",
    "circuit_power_bs_dbm": "circuit_power_bs",
    "circuit_power_far_dbm": "circuit_power_far",
    "circuit_power_sris_element_dbm": "circuit_power_sris_element",
    "circuit_power_afr_antenna_dbm": "circuit_power_afr_antenna",
}


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a flat key/value mapping.

    Keys with a ``_dbm`` suffix are converted to watts at ingestion; the
    conversion is recorded in the run log.
    """
    data = dict(raw)
    for dbm_key, watt_key in _DBM_KEYS.items():
        if dbm_key in data:
            dbm = data.pop(dbm_key)
            data[watt_key] = dbm_to_watt(dbm)
            log.info("config: %s = %s dBm -> %s = %.6e W", dbm_key, dbm, watt_key, data[watt_key])
    region = data.pop("user_region", None)
    if region is not None:
        data["user_region"] = UserRegion(**region)
    # YAML 1.1 reads "1.0e5" (no signed exponent) as a string; coerce
    # anything destined for a float field
    for f in fields(ScenarioConfig):
        if f.name in data and f.type == "float":
            data[f.name] = float(data[f.name])
    return ScenarioConfig(**data)


def load_config(path: str) -> ScenarioConfig:
    import yaml

    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# placements


@dataclass
class Placement:
    """Reference points plus all antenna position matrices (3 x count)."""

    o_u: np.ndarray  # (3,) reference of the user-side face region
    o_b: np.ndarray  # (3,) reference of the BS-side face region
    T: np.ndarray  # (3, K) user fluid antennas
    U: np.ndarray  # (3, M)
    B: np.ndarray  # (3, M)
    R: np.ndarray  # (3, N)
    user_refs: np.ndarray  # (3, K) drop points o_k (region references)

    def copy(self) -> "Placement":
        return Placement(
            self.o_u.copy(), self.o_b.copy(), self.T.copy(), self.U.copy(),
            self.B.copy(), self.R.copy(), self.user_refs.copy(),
        )


def wave_vector(elevation: float, azimuth: float) -> np.ndarray:
    """kappa = [sin(th)cos(ph), cos(th), sin(th)sin(ph)], a unit vector."""
    if not (0.0 <= elevation <= math.pi) or not (0.0 <= azimuth <= math.pi):
        raise ValueError("angles must lie in [0, pi]")
    st = math.sin(elevation)
    return np.array([st * math.cos(azimuth), math.cos(elevation), st * math.sin(azimuth)])


def phase_difference(position, reference, kappa, wavelength: float) -> complex:
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    disp = np.asarray(position, dtype=float) - np.asarray(reference, dtype=float)
    return np.exp(1j * (2.0 * math.pi / wavelength) * float(kappa @ disp))


def steering_vector(positions, reference, kappa, wavelength: float) -> np.ndarray:
    """Elementwise phase differences for a 3 x n position matrix."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.shape[0] != 3:
        pos = pos.T
    disp = pos - np.asarray(reference, dtype=float)[:, None]
    return np.exp(1j * (2.0 * math.pi / wavelength) * (np.asarray(kappa) @ disp))


def region_bounds(reference: np.ndarray, config: ScenarioConfig):
    """(x, z) box of the C x C region anchored at a reference point."""
    c = config.region_size
    return (reference[0], reference[0] + c), (reference[2], reference[2] + c)


def centered_grid(reference: np.ndarray, count: int, config: ScenarioConfig) -> np.ndarray:
    """d_min-spaced square sub-grid centred in the region (3 x count)."""
    side = math.ceil(math.sqrt(count))
    span = (side - 1) * config.min_spacing
    if span > config.region_size:
        raise ValueError("antennas do not fit the region at d_min spacing")
    x0 = reference[0] + 0.5 * (config.region_size - span)
    z0 = reference[2] + 0.5 * (config.region_size - span)
    pts = []
    for i in range(count):
        r, c = divmod(i, side)
        pts.append([x0 + c * config.min_spacing, reference[1], z0 + r * config.min_spacing])
    return np.array(pts).T


def min_pairwise_distance(points: np.ndarray) -> float:
    n = points.shape[1]
    if n < 2:
        return math.inf
    d = points.T[:, None, :] - points.T[None, :, :]
    dist = np.linalg.norm(d, axis=2)
    return float(dist[np.triu_indices(n, k=1)].min())


def validate_placement(placement: Placement, config: ScenarioConfig, tol: float = 1e-9) -> dict:
    """Check every position constraint; returns {family: (ok, worst violation)}."""
    c = config.region_size
    L, H, W, Y0 = (config.blockage_length, config.blockage_height,
                   config.blockage_width, config.far_bs_distance)
    report: dict[str, tuple[bool, float]] = {}

    def in_box(points, ref, y_expect):
        worst = 0.0
        pts = np.atleast_2d(points.T).reshape(-1, 3)
        for p in pts:
            worst = max(worst, ref[0] - p[0], p[0] - (ref[0] + c),
                        ref[2] - p[2], p[2] - (ref[2] + c), abs(p[1] - y_expect))
        return worst

    report["faru_region"] = _ok(in_box(placement.U, placement.o_u, Y0 + W), tol)
    report["farb_region"] = _ok(in_box(placement.B, placement.o_b, Y0), tol)
    report["bs_region"] = _ok(in_box(placement.R, np.zeros(3), 0.0), tol)
    worst_t = 0.0
    for k in range(placement.T.shape[1]):
        worst_t = max(worst_t, in_box(placement.T[:, k:k + 1], placement.user_refs[:, k],
                                      placement.user_refs[1, k]))
    report["user_region"] = _ok(worst_t, tol)

    worst_ref = max(
        -placement.o_u[0], placement.o_u[0] - (L - c),
        -placement.o_u[2], placement.o_u[2] - (H - c),
        -placement.o_b[0], placement.o_b[0] - (L - c),
        -placement.o_b[2], placement.o_b[2] - (H - c),
    )
    report["reference_box"] = _ok(worst_ref, tol)

    for name, pts in (("faru_spacing", placement.U), ("farb_spacing", placement.B),
                      ("bs_spacing", placement.R)):
        gap = config.min_spacing - min_pairwise_distance(pts)
        report[name] = _ok(gap, tol)
    return report


def _ok(violation: float, tol: float) -> tuple[bool, float]:
    v = max(0.0, float(violation))
    return (v <= tol, v)


def initial_placement(config: ScenarioConfig, user_refs: np.ndarray) -> Placement:
    """Centre both face regions, grid the antennas, park user FAs at their
    drop points' region corners (reference = drop point)."""
    L, H, W, Y0, c = (config.blockage_length, config.blockage_height,
                      config.blockage_width, config.far_bs_distance, config.region_size)
    o_u = np.array([0.5 * (L - c), Y0 + W, 0.5 * (H - c)])
    o_b = np.array([0.5 * (L - c), Y0, 0.5 * (H - c)])
    U = centered_grid(o_u, config.num_far_antennas, config)
    B = centered_grid(o_b, config.num_far_antennas, config)
    R = centered_grid(np.zeros(3), config.num_bs_antennas, config)
    T = np.empty((3, config.num_users))
    for k in range(config.num_users):
        ref = user_refs[:, k]
        T[:, k] = [ref[0] + 0.5 * c, ref[1], ref[2] + 0.5 * c]
    return Placement(o_u=o_u, o_b=o_b, T=T, U=U, B=B, R=R, user_refs=user_refs.copy())
