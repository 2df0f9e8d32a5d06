"""Convexification toolbox: Taylor linearizations, difference-of-squares
expansions, sqrt-product bounds, and quadratic minorants/majorants with
analytic curvature constants.

The position-dependent targets all reduce to "phase sums"

    f(x) = Re[ sum_t c_t * exp(j * (a_t^T x + sum_j s_tj * ||x - q_tj||)) ] + const,

i.e. sinusoids whose phase mixes a steering term (linear in x) and
propagation terms (distances to fixed points, coefficients folded into
s_tj).  ComplexPhaseSum supports the algebra (conjugation, products,
sums) needed to expand |w^H H0 Theta h|^2-type expressions; RealPhaseSum
adds analytic gradients, Hessians, and per-term curvature bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# phase-sum algebra


@dataclass(frozen=True)
class PhaseTerm:
    """c * exp(j * (lin^T x + sum_j signs[j] * ||x - points[j]||))."""

    coeff: complex
    lin: np.ndarray  # (3,)
    signs: np.ndarray  # (m,) signed distance coefficients (rad/m)
    points: np.ndarray  # (m, 3)

    def phase(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ph = x @ self.lin
        if len(self.signs):
            d = np.linalg.norm(x[..., None, :] - self.points, axis=-1)
            ph = ph + d @ self.signs
        return ph

    def conj(self) -> "PhaseTerm":
        return PhaseTerm(np.conj(self.coeff), -self.lin, -self.signs, self.points)


def _term(coeff, lin=None, dists=()) -> PhaseTerm:
    lin = np.zeros(3) if lin is None else np.asarray(lin, dtype=float)
    signs = np.array([s for s, _ in dists], dtype=float)
    points = (
        np.array([np.asarray(q, dtype=float) for _, q in dists])
        if dists else np.zeros((0, 3))
    )
    return PhaseTerm(complex(coeff), lin, signs, points)


@dataclass
class ComplexPhaseSum:
    terms: list = field(default_factory=list)
    const: complex = 0.0

    @staticmethod
    def constant(c) -> "ComplexPhaseSum":
        return ComplexPhaseSum([], complex(c))

    @staticmethod
    def sinusoid(coeff, lin=None, dists=()) -> "ComplexPhaseSum":
        return ComplexPhaseSum([_term(coeff, lin, dists)], 0.0)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.const, dtype=complex)
        for t in self.terms:
            out = out + t.coeff * np.exp(1j * t.phase(x))
        return out

    def conj(self) -> "ComplexPhaseSum":
        return ComplexPhaseSum([t.conj() for t in self.terms], np.conj(self.const))

    def __add__(self, other: "ComplexPhaseSum") -> "ComplexPhaseSum":
        return ComplexPhaseSum(self.terms + other.terms, self.const + other.const)

    def scale(self, c) -> "ComplexPhaseSum":
        c = complex(c)
        return ComplexPhaseSum(
            [PhaseTerm(t.coeff * c, t.lin, t.signs, t.points) for t in self.terms],
            self.const * c,
        )

    def __mul__(self, other: "ComplexPhaseSum") -> "ComplexPhaseSum":
        terms = []
        if self.const != 0:
            terms += other.scale(self.const).terms
        if other.const != 0:
            terms += self.scale(other.const).terms
        for a in self.terms:
            for b in other.terms:
                terms.append(PhaseTerm(
                    a.coeff * b.coeff,
                    a.lin + b.lin,
                    np.concatenate([a.signs, b.signs]),
                    np.vstack([a.points, b.points]),
                ))
        return ComplexPhaseSum(terms, self.const * other.const)

    def abs_squared(self) -> "RealPhaseSum":
        return (self * self.conj()).real()

    def real(self) -> "RealPhaseSum":
        return RealPhaseSum(self.terms, float(np.real(self.const)))


@dataclass
class RealPhaseSum:
    """f(x) = const + sum_t Re[c_t exp(j phi_t(x))], x a 3-D point."""

    terms: list
    const: float = 0.0

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.const, dtype=float)
        for t in self.terms:
            out = out + np.real(t.coeff * np.exp(1j * t.phase(x)))
        return out

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros(3)
        for t in self.terms:
            gphi = t.lin.copy()
            for s, q in zip(t.signs, t.points):
                diff = x - q
                gphi += s * diff / np.linalg.norm(diff)
            g += np.real(1j * t.coeff * np.exp(1j * t.phase(x))) * gphi
        return g

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = np.zeros((3, 3))
        eye = np.eye(3)
        for t in self.terms:
            gphi = t.lin.copy()
            hphi = np.zeros((3, 3))
            for s, q in zip(t.signs, t.points):
                diff = x - q
                d = np.linalg.norm(diff)
                unit = diff / d
                gphi += s * unit
                hphi += s * (eye - np.outer(unit, unit)) / d
            e = t.coeff * np.exp(1j * t.phase(x))
            h += np.real(1j * e) * hphi - np.real(e) * np.outer(gphi, gphi)
        return h

    def curvature_bound(self, min_distance: float) -> float:
        """Upper bound on ||hess||_2 valid wherever every ||x - q_tj|| >=
        min_distance (antennas on opposite blockage faces give W)."""
        if min_distance <= 0:
            raise ValueError("min distance must be positive")
        total = 0.0
        for t in self.terms:
            s_abs = float(np.abs(t.signs).sum())
            gmax = float(np.linalg.norm(t.lin)) + s_abs
            total += abs(t.coeff) * (gmax**2 + s_abs / min_distance)
        return total


# ---------------------------------------------------------------------------
# generic surrogate containers


@dataclass(frozen=True)
class AffineMap:
    """constant + linear^T (x - anchor)."""

    constant: float
    linear: np.ndarray
    anchor: np.ndarray

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.constant + self.linear @ (x - self.anchor))


@dataclass(frozen=True)
class QuadraticSurrogate:
    """f(x0) + g^T (x - x0) -/+ (iota/2) ||x - x0||^2 (minorant/majorant)."""

    curvature: float
    linear: np.ndarray  # gradient at the anchor
    constant: float  # target value at the anchor
    sense: str  # "minorant" | "majorant"
    expansion_point: np.ndarray

    def __post_init__(self):
        if self.curvature < 0:
            raise ValueError("curvature must be >= 0")
        if self.sense not in ("minorant", "majorant"):
            raise ValueError(f"bad sense {self.sense!r}")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self.expansion_point
        quad = 0.5 * self.curvature * np.sum(d * d, axis=-1)
        lin = self.constant + d @ self.linear
        return lin - quad if self.sense == "minorant" else lin + quad


# ---------------------------------------------------------------------------
# elementary surrogates


def taylor_inverse_pathloss(anchor, point, scale: float, exponent: float) -> AffineMap:
    """Affine expansion of o -> scale / ||o - point||^exponent around anchor."""
    anchor = np.asarray(anchor, dtype=float)
    point = np.asarray(point, dtype=float)
    diff = anchor - point
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise ValueError("expansion point coincides with the pole")
    value = scale / d**exponent
    grad = -scale * exponent * diff / d ** (exponent + 2.0)
    return AffineMap(constant=value, linear=grad, anchor=anchor)


@dataclass(frozen=True)
class DcBilinear:
    """Upper bound of a*b: keep (a+b)^2/4, linearize -(a-b)^2/4 at the anchor."""

    a_n: float
    b_n: float

    def value(self, a, b):
        d_n = self.a_n - self.b_n
        lin = d_n**2 + 2.0 * d_n * ((a - b) - d_n)  # tangent of (a-b)^2
        return 0.25 * ((a + b) ** 2 - lin)


def dc_bilinear(a_n: float, b_n: float) -> DcBilinear:
    if not (math.isfinite(a_n) and math.isfinite(b_n)):
        raise ValueError("expansion values must be finite")
    return DcBilinear(a_n, b_n)


def sqrt_product_lower(p_n: float, psi_n: float, chi_n: float) -> AffineMap:
    """First-order expansion of sqrt(psi*chi/p) at (p_n, psi_n, chi_n).

    Matches value and gradient at the anchor.  The function is not
    jointly convex, so one-sidedness is not global; callers re-verify the
    true constraint after every accepted step.
    """
    if p_n <= 0 or psi_n <= 0 or chi_n <= 0:
        raise ValueError("anchors must be positive")
    f0 = math.sqrt(psi_n * chi_n / p_n)
    grad = np.array([
        -0.5 * f0 / p_n,
        0.5 * f0 / psi_n,
        0.5 * f0 / chi_n,
    ])
    return AffineMap(constant=f0, linear=grad, anchor=np.array([p_n, psi_n, chi_n]))


def linearize_min_distance(x_n, x_other, d_min: float) -> AffineMap:
    """Affine g with g(x) >= d_min implying ||x - x_other|| >= d_min.

    g(x) = (x_n - x_other)^T (x - x_other) / ||x_n - x_other||; by
    Cauchy-Schwarz g(x) <= ||x - x_other||, so the linearized constraint
    is a restriction of the true spacing constraint.
    """
    x_n = np.asarray(x_n, dtype=float)
    x_other = np.asarray(x_other, dtype=float)
    diff = x_n - x_other
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise ValueError("anchor coincides with the other point")
    unit = diff / d
    return AffineMap(constant=d, linear=unit, anchor=x_n)


# ---------------------------------------------------------------------------
# quadratic MM bounds for phase sums


def c2_constant(wavelength: float, c1: float, t_dim: float, w_dim: float) -> float:
    """Loose curvature constant for steering-plus-propagation sinusoids."""
    if wavelength <= 0 or w_dim <= 0:
        raise ValueError("wavelength and face separation must be positive")
    lam, T, W = wavelength, t_dim, w_dim
    return (
        4.0 * math.pi**2 / lam**2
        + 4.0 * math.pi * c1 * T / (lam * W)
        + c1**2 * T**2 / W**2
        + c1 / W
        + c1 * T**2 / W**3
    )


def c4_constant(c1: float, t_dim: float, w_dim: float) -> float:
    """Loose curvature constant for pure-propagation sinusoids."""
    if w_dim <= 0:
        raise ValueError("face separation must be positive")
    T, W = t_dim, w_dim
    return c1 * (T**2 + W**2) / W**3 + c1**2 * T**2 / W**2


@dataclass(frozen=True)
class SurrogateConstants:
    """Curvature and spectral constants attached to one MM subproblem."""

    iota_lower: float
    iota_upper: float
    c2: float
    c4: float
    lambda_max: float
    g_vector: np.ndarray
    c_vector: np.ndarray


def _check_geometry(target: RealPhaseSum, anchor: np.ndarray, w_min: float):
    for t in target.terms:
        if len(t.points):
            d = np.linalg.norm(anchor - t.points, axis=1)
            if np.any(d < 0.5 * w_min):
                raise ValueError(
                    "anchor within half the face separation of a propagation "
                    "pole; geometry is inconsistent"
                )


def mm_minorant(
    target: RealPhaseSum,
    anchor,
    w_min: float,
    curvature: float | None = None,
) -> QuadraticSurrogate:
    """Quadratic global lower bound of a phase-sum, exact at the anchor.

    ``curvature`` overrides the per-term analytic bound (e.g. with the
    looser closed-form constant when reproducing the reference behaviour).
    """
    anchor = np.asarray(anchor, dtype=float)
    if w_min <= 0:
        raise ValueError("face separation must be positive")
    _check_geometry(target, anchor, w_min)
    iota = target.curvature_bound(w_min) if curvature is None else float(curvature)
    return QuadraticSurrogate(
        curvature=iota,
        linear=target.grad(anchor),
        constant=float(target.value(anchor)),
        sense="minorant",
        expansion_point=anchor,
    )


def mm_majorant(
    target: RealPhaseSum,
    anchor,
    w_min: float,
    curvature: float | None = None,
    offset: float = 0.0,
) -> QuadraticSurrogate:
    """Quadratic global upper bound; ``offset`` adds a constant slack term
    (e.g. the Rayleigh-quotient bound replacing a rank-one quadratic form)."""
    anchor = np.asarray(anchor, dtype=float)
    if w_min <= 0:
        raise ValueError("face separation must be positive")
    _check_geometry(target, anchor, w_min)
    iota = target.curvature_bound(w_min) if curvature is None else float(curvature)
    return QuadraticSurrogate(
        curvature=iota,
        linear=target.grad(anchor),
        constant=float(target.value(anchor)) + offset,
        sense="majorant",
        expansion_point=anchor,
    )


def largest_eigenvalue(hermitian: np.ndarray) -> float:
    """lambda_max of a Hermitian matrix (used for Rayleigh-quotient bounds)."""
    return float(np.linalg.eigvalsh(hermitian)[-1])


# ---------------------------------------------------------------------------
# power/beamforming interference majorant


@dataclass
class DcInterferenceMajorant:
    """Convex upper bound of sum_{i != k} p_i beta_bar_i |w^H hbar_i|^2.

    Each product is split as ab = [(a+b)^2 - (a-b)^2]/4 with a = p_i
    beta_bar_i and b = |w^H hbar_i|^2; the concave -(a-b)^2 piece is
    linearized at the anchor, which keeps every summand jointly convex in
    (p, w) because a is linear and b is a PSD quadratic form of w.
    """

    k: int
    hbar: np.ndarray  # (N, K) effective channels H h_i
    beta_bar: np.ndarray  # (K,) beta_i / beta_k ratios (entry k unused)
    p_anchor: np.ndarray  # (K,)
    w_anchor: np.ndarray  # (N,) complex

    def __post_init__(self):
        b = np.abs(self.w_anchor.conj() @ self.hbar) ** 2
        self.pieces = [
            (i, dc_bilinear(self.p_anchor[i] * self.beta_bar[i], b[i]))
            for i in range(self.hbar.shape[1]) if i != self.k
        ]

    def value(self, p: np.ndarray, w: np.ndarray) -> float:
        gains = np.abs(np.asarray(w).conj() @ self.hbar) ** 2
        return float(sum(
            dc.value(p[i] * self.beta_bar[i], gains[i]) for i, dc in self.pieces
        ))

    def true_value(self, p: np.ndarray, w: np.ndarray) -> float:
        gains = np.abs(np.asarray(w).conj() @ self.hbar) ** 2
        return float(sum(
            p[i] * self.beta_bar[i] * gains[i] for i, _ in self.pieces
        ))


def dc_interference_majorant(k, hbar, beta_bar, p_anchor, w_anchor) -> DcInterferenceMajorant:
    return DcInterferenceMajorant(
        k=k,
        hbar=np.asarray(hbar, dtype=complex),
        beta_bar=np.asarray(beta_bar, dtype=float),
        p_anchor=np.asarray(p_anchor, dtype=float),
        w_anchor=np.asarray(w_anchor, dtype=complex),
    )
