"""Small dense convex solver plus SCA and Dinkelbach drivers.

Concave maximization over affine, convex-quadratic, and smooth-convex
callback constraints, solved with a primal log-barrier interior-point
method (Newton steps, backtracking line search, x10 barrier schedule).
Problem dimensions here are tens of variables, so dense Cholesky is the
right tool.  Strict feasibility is maintained throughout: the line
search treats any constraint touching zero as +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KKT_TOL = 1e-8


# ---------------------------------------------------------------------------
# constraints: f(x) <= 0, convex


class LinearConstraint:
    def __init__(self, a, b: float):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)

    def value(self, x):
        return float(self.a @ x - self.b)

    def grad(self, x):
        return self.a

    def hess(self, x):
        return None  # zero


class QuadraticConstraint:
    """0.5 x^T P x + q^T x + r <= 0 with P PSD."""

    def __init__(self, P, q, r: float):
        self.P = np.asarray(P, dtype=float)
        self.P = 0.5 * (self.P + self.P.T)
        if np.linalg.eigvalsh(self.P)[0] < -1e-10:
            raise ValueError("quadratic constraint matrix is not PSD")
        self.q = np.asarray(q, dtype=float)
        self.r = float(r)

    def value(self, x):
        return float(0.5 * x @ self.P @ x + self.q @ x + self.r)

    def grad(self, x):
        return self.P @ x + self.q

    def hess(self, x):
        return self.P


class SmoothConstraint:
    """Convex constraint given by value/grad/hess callbacks."""

    def __init__(self, value_fn, grad_fn, hess_fn):
        self._v, self._g, self._h = value_fn, grad_fn, hess_fn

    def value(self, x):
        return float(self._v(x))

    def grad(self, x):
        return self._g(x)

    def hess(self, x):
        return self._h(x)


def box_constraints(index: int, lo: float, hi: float, n: int) -> list:
    e = np.zeros(n)
    e[index] = 1.0
    return [LinearConstraint(-e, -lo), LinearConstraint(e, hi)]


# ---------------------------------------------------------------------------
# objectives (maximized, concave)


class SeparableLogObjective:
    """sum_i w_i log2(1 + x_{idx_i}) + c^T x - 0.5 x^T P x."""

    def __init__(self, n: int, log_indices=(), log_weights=(), linear=None, quad=None):
        self.n = n
        self.idx = np.asarray(log_indices, dtype=int)
        self.w = np.asarray(log_weights, dtype=float)
        self.c = np.zeros(n) if linear is None else np.asarray(linear, dtype=float)
        self.P = quad if quad is None else 0.5 * (np.asarray(quad) + np.asarray(quad).T)
        self._ln2 = math.log(2.0)

    def in_domain(self, x) -> bool:
        return bool(np.all(1.0 + x[self.idx] > 0)) if len(self.idx) else True

    def value(self, x):
        v = float(self.c @ x)
        if len(self.idx):
            v += float(self.w @ np.log2(1.0 + x[self.idx]))
        if self.P is not None:
            v -= 0.5 * float(x @ self.P @ x)
        return v

    def grad(self, x):
        g = self.c.copy()
        if len(self.idx):
            np.add.at(g, self.idx, self.w / ((1.0 + x[self.idx]) * self._ln2))
        if self.P is not None:
            g -= self.P @ x
        return g

    def hess(self, x):
        h = np.zeros((self.n, self.n)) if self.P is None else -self.P.copy()
        if len(self.idx):
            d = -self.w / ((1.0 + x[self.idx]) ** 2 * self._ln2)
            np.add.at(h, (self.idx, self.idx), d)
        return h


def linear_objective(n: int, c) -> SeparableLogObjective:
    return SeparableLogObjective(n, linear=c)


# ---------------------------------------------------------------------------
# program + result


@dataclass
class ConvexProgram:
    n: int
    objective: SeparableLogObjective
    constraints: list = field(default_factory=list)
    x0: np.ndarray | None = None  # strictly feasible start, if known


@dataclass
class SolveResult:
    x: np.ndarray
    objective_value: float
    status: str  # optimal | max_iter | infeasible
    kkt_residual: float
    iterations: int


# ---------------------------------------------------------------------------
# barrier machinery


def _barrier_value(x, t, objective, constraints):
    if not objective.in_domain(x):
        return math.inf
    v = -t * objective.value(x)
    for con in constraints:
        fv = con.value(x)
        if fv >= 0:
            return math.inf
        v -= math.log(-fv)
    return v


def _newton_minimize(x, t, objective, constraints, max_iter=60, tol=1e-11):
    """Damped Newton on the barrier; returns (x, iterations, decrement).

    The returned decrement lambda^2 = g^T H^{-1} g bounds the barrier
    suboptimality by lambda^2/2 once small, which is what the caller
    needs for its duality-gap estimate.
    """
    n = len(x)
    dec = math.inf
    for it in range(max_iter):
        g = -t * objective.grad(x)
        H = -t * objective.hess(x)
        for con in constraints:
            fv = con.value(x)
            cg = con.grad(x)
            inv = 1.0 / (-fv)
            g = g + inv * cg
            H = H + inv**2 * np.outer(cg, cg)
            ch = con.hess(x)
            if ch is not None:
                H = H + inv * ch
        reg = 0.0
        for _ in range(12):
            try:
                L = np.linalg.cholesky(H + reg * np.eye(n))
                break
            except np.linalg.LinAlgError:
                reg = max(2.0 * reg, 1e-12 * max(1.0, float(np.trace(H)) / n))
                reg *= 10.0
        else:
            return x, it, dec
        dx = np.linalg.solve(L.T, np.linalg.solve(L, -g))
        dec = float(-g @ dx)
        # the barrier scales with t, so the decrement test must too
        if dec / 2.0 <= tol * max(1.0, t):
            return x, it, dec
        base = _barrier_value(x, t, objective, constraints)
        alpha, ok = 1.0, False
        for _ in range(40):
            if 0.01 * alpha * dec <= 4e-16 * max(1.0, abs(base)):
                break  # improvement below float resolution of the barrier
            cand = x + alpha * dx
            v = _barrier_value(cand, t, objective, constraints)
            if v <= base - 0.01 * alpha * dec:
                x, ok = cand, True
                break
            alpha *= 0.5
        if not ok:
            return x, it, dec
    return x, max_iter, dec


def _strictly_feasible(x, objective, constraints, margin=0.0) -> bool:
    if not objective.in_domain(x):
        return False
    return all(con.value(x) < -margin for con in constraints)


def phase_one(constraints, n: int, x_guess=None, log_indices=()) -> np.ndarray | None:
    """Find a strictly feasible point by minimizing the max violation slack."""
    x = np.zeros(n) if x_guess is None else np.asarray(x_guess, dtype=float).copy()
    if len(log_indices):
        x[np.asarray(log_indices, dtype=int)] = np.maximum(
            x[np.asarray(log_indices, dtype=int)], -0.5
        )
    s = max(con.value(x) for con in constraints) + 1.0
    z = np.append(x, s)
    obj = linear_objective(n + 1, np.append(np.zeros(n), -1.0))

    class _Shifted:
        def __init__(self, con):
            self.con = con

        def value(self, z):
            return self.con.value(z[:n]) - z[n]

        def grad(self, z):
            return np.append(self.con.grad(z[:n]), -1.0)

        def hess(self, z):
            ch = self.con.hess(z[:n])
            if ch is None:
                return None
            out = np.zeros((n + 1, n + 1))
            out[:n, :n] = ch
            return out

    # keep the log-domain guard during phase-I as explicit constraints
    shifted = [_Shifted(c) for c in constraints]
    for i in np.asarray(log_indices, dtype=int):
        e = np.zeros(n + 1)
        e[i] = -1.0
        shifted.append(LinearConstraint(e, 1.0 - 1e-9))

    t = 1.0
    for _ in range(40):
        z, _, _ = _newton_minimize(z, t, obj, shifted)
        if z[n] < -1e-7:
            return z[:n]
        if (len(shifted)) / t < 1e-9:
            break
        t *= 10.0
    return z[:n] if z[n] < 0 else None


def solve(program: ConvexProgram, gap_tol: float = KKT_TOL) -> SolveResult:
    """Barrier solve of a concave maximization; see module docstring."""
    cons = program.constraints
    obj = program.objective
    n = program.n
    m = max(len(cons), 1)

    x = program.x0
    if x is None or not _strictly_feasible(np.asarray(x, dtype=float), obj, cons):
        x = phase_one(cons, n, x_guess=program.x0, log_indices=obj.idx)
        if x is None or not _strictly_feasible(x, obj, cons):
            start = np.zeros(n) if program.x0 is None else np.asarray(program.x0, float)
            return SolveResult(start, -math.inf, "infeasible", math.inf, 0)
    x = np.asarray(x, dtype=float).copy()

    t, total_it = 1.0, 0
    dec = math.inf
    while True:
        x, it, dec = _newton_minimize(x, t, obj, cons)
        total_it += it
        if m / t <= gap_tol:
            break
        if t > 1e16:  # numerical ceiling
            break
        t *= 10.0
    # duality-gap bound m/t plus the Newton suboptimality lambda^2/(2t)
    residual = m / t + (dec / (2.0 * t) if math.isfinite(dec) else 1.0)
    status = "optimal" if residual <= 10 * gap_tol else "max_iter"
    return SolveResult(x, obj.value(x), status, residual, total_it)


# ---------------------------------------------------------------------------
# drivers


def sca_drive(
    build,
    x0: np.ndarray,
    true_objective,
    true_feasible=None,
    tol: float = 1e-4,
    max_iter: int = 50,
):
    """Generic SCA loop with a commit rule.

    build(anchor) -> ConvexProgram over the same variable vector.  A step
    is committed only if the TRUE objective does not decrease and (when a
    checker is given) the iterate stays truly feasible; otherwise the
    loop stops at the last good iterate.  Returns the iterate trace.
    """
    x = np.asarray(x0, dtype=float).copy()
    if true_feasible is not None and not true_feasible(x):
        raise ValueError("SCA started from an infeasible point")
    trace = [x.copy()]
    current = true_objective(x)
    for _ in range(max_iter):
        program = build(x)
        result = solve(program)
        if result.status == "infeasible":
            break
        cand = result.x
        cand_val = true_objective(cand)
        if cand_val < current - 1e-12 * max(1.0, abs(current)):
            break
        if true_feasible is not None and not true_feasible(cand):
            break
        gain = cand_val - current
        x, current = cand.copy(), cand_val
        trace.append(x.copy())
        if gain <= tol * max(1.0, abs(current)):
            break
    return trace


def dinkelbach_drive(
    numerator,
    denominator,
    parametric_solver,
    s0: float | None = None,
    eps: float = 1e-6,
    max_iter: int = 30,
):
    """Fractional maximization of f/g via the parametric subtraction.

    parametric_solver(s) returns the maximizer of f - s*g over the fixed
    feasible set (or None on failure).  Returns (x, s, s_trace).
    """
    x = parametric_solver(0.0 if s0 is None else s0)
    if x is None:
        raise RuntimeError("parametric solve failed at the initial ratio")
    s = numerator(x) / denominator(x)
    trace = [s]
    for _ in range(max_iter):
        x_new = parametric_solver(s)
        if x_new is None:
            break
        gap = numerator(x_new) - s * denominator(x_new)
        if gap >= -1e-12:
            x = x_new
        if abs(gap) < eps:
            s = numerator(x) / denominator(x)
            trace.append(s)
            break
        s_new = numerator(x_new) / denominator(x_new)
        if s_new <= s + 1e-15:
            break
        s = s_new
        trace.append(s)
    return x, s, trace
