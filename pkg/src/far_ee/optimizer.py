"""Joint energy-efficiency optimization: large-scale placement, per-antenna
position updates, and Dinkelbach power/beamforming, wrapped in an outer
alternating loop.

Every sub-step follows the same SCA pattern: build a convex restriction
around the current state, solve it with the barrier kernel, and commit
the step only if the TRUE objective (sum rate, or EE in the power stage)
does not decrease and the full constraint set stays satisfied.  The
commit rule makes the outer EE trace monotone by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ChannelRealization, build_channel, draw_angles, draw_fading,
    draw_user_refs, medium_from_config, scenario_rng,
)
from .geometry import Placement, ScenarioConfig, initial_placement
from .kernel import (
    ConvexProgram, LinearConstraint, QuadraticConstraint, SeparableLogObjective,
    SmoothConstraint, dinkelbach_drive, sca_drive, solve,
)
from .metrics import (
    ControlState, all_sinrs, check_solution, circuit_power, energy_efficiency,
    rates_from_sinr,
)
from .surrogates import (
    c2_constant, c4_constant, linearize_min_distance, mm_majorant, mm_minorant,
    sqrt_product_lower, taylor_inverse_pathloss,
)
from .targets import MovingAntennaTargets
from .propagation import propagation_constants

log = logging.getLogger("far_ee")

OUTER_TOL = 1e-3
OUTER_MAX = 15
SCA_TOL = 1e-4
POSITION_SCA_MAX = 3
POWER_SCA_MAX = 20
INNER_ALT_MAX = 10


@dataclass
class OptimizerState:
    config: ScenarioConfig
    placement: Placement
    control: ControlState
    angles: object
    draw: object
    channels: ChannelRealization
    scheme: str = "far"
    slacks: dict = field(default_factory=dict)
    outer_iteration: int = 0
    ee_trace: list = field(default_factory=list)
    stage_log: list = field(default_factory=list)
    feasible: bool = True

    def refresh(self):
        self.channels = build_channel(self.config, self.placement, self.angles, self.draw)

    def report(self):
        return check_solution(
            self.placement, self.control, self.channels, self.config, self.scheme
        )


# ---------------------------------------------------------------------------
# helpers


def _sum_rate(config, placement, angles, draw, control) -> float:
    ch = build_channel(config, placement, angles, draw)
    return float(np.sum(rates_from_sinr(all_sinrs(control, ch, config), config)))


def _feasible(config, placement, angles, draw, control, scheme) -> bool:
    ch = build_channel(config, placement, angles, draw)
    return check_solution(placement, control, ch, config, scheme).feasible


def mrc_beamformers(channels: ChannelRealization) -> np.ndarray:
    cols = channels.H @ channels.h_k
    return cols / np.linalg.norm(cols, axis=0, keepdims=True)


def zf_beamformers(channels: ChannelRealization) -> np.ndarray:
    A = channels.H @ channels.h_k  # (N, K) effective channels
    gram = A.conj().T @ A
    try:
        W = A @ np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        return mrc_beamformers(channels)
    norms = np.linalg.norm(W, axis=0, keepdims=True)
    norms[norms == 0] = 1.0
    return W / norms


def mmse_beamformers(channels: ChannelRealization, config: ScenarioConfig,
                     p: np.ndarray) -> np.ndarray:
    """Per-user SINR-optimal unit-norm receive beamformers at fixed powers.

    Each user's SINR is a Rayleigh quotient in its own beamformer, so the
    simultaneous best response w_k ~ (B_k + sigma^2 I)^{-1} hbar_k weakly
    improves every SINR at once.
    """
    N, K = config.num_bs_antennas, config.num_users
    hbar = channels.H @ channels.h_k
    G = channels.H @ channels.H.conj().T
    base = (config.noise_bs_total * np.eye(N)
            + channels.beta_0 * config.noise_faru_total * G)
    out = np.empty((N, K), dtype=complex)
    for k in range(K):
        C = base.copy()
        for i in range(K):
            if i != k:
                C += (p[i] * channels.beta_0 * channels.beta_k[i]
                      * np.outer(hbar[:, i], hbar[:, i].conj()))
        try:
            w = np.linalg.solve(C, hbar[:, k])
        except np.linalg.LinAlgError:
            w = hbar[:, k]
        nw = np.linalg.norm(w)
        out[:, k] = w / nw if nw > 0 else hbar[:, k] / np.linalg.norm(hbar[:, k])
    return out


def effective_gains(control, channels) -> np.ndarray:
    """gains[k, i] = |w_k^H H h_i|^2."""
    return np.abs(control.Omega.conj().T @ channels.H @ channels.h_k) ** 2


def combined_row_power(control, channels) -> np.ndarray:
    return np.linalg.norm(control.Omega.conj().T @ channels.H, axis=1) ** 2


# ---------------------------------------------------------------------------
# large-scale stage (reference points)


def _corner_candidates(config: ScenarioConfig) -> list[np.ndarray]:
    L, H, C, Y0 = (config.blockage_length, config.blockage_height,
                   config.region_size, config.far_bs_distance)
    return [np.array([x, Y0, z]) for x in (0.0, L - C) for z in (0.0, H - C)]


def _translate(points: np.ndarray, shift: np.ndarray) -> np.ndarray:
    return points + shift[:, None]


def optimize_bs_face_reference(state: OptimizerState) -> np.ndarray:
    """Pick o_b (and rigidly translate the FAR-B array with it)."""
    config = state.config
    if config.corner_mode == "closed_form":
        cand = [np.array([
            config.blockage_length - config.region_size,
            config.far_bs_distance,
            config.blockage_height - config.region_size,
        ])]
    else:
        cand = _corner_candidates(config) + [state.placement.o_b.copy()]
    was_feasible = _feasible(config, state.placement, state.angles,
                             state.draw, state.control, state.scheme)
    best, best_rate = None, -math.inf
    for ob in cand:
        pl = state.placement.copy()
        shift = ob - pl.o_b
        pl.B = _translate(pl.B, shift)
        pl.o_b = ob
        rate = _sum_rate(config, pl, state.angles, state.draw, state.control)
        ok = _feasible(config, pl, state.angles, state.draw,
                       state.control, state.scheme)
        if rate > best_rate and (ok or not was_feasible):
            best, best_rate = pl, rate
    if best is not None and (
        config.corner_mode == "closed_form"
        or best_rate >= _sum_rate(config, state.placement, state.angles,
                                  state.draw, state.control) - 1e-9
    ):
        state.placement = best
        state.refresh()
    return state.placement.o_b


def optimize_user_face_reference(state: OptimizerState) -> np.ndarray:
    """SCA over o_u with small-scale gains frozen; FAR-U rigidly translated."""
    config = state.config
    K = config.num_users
    floor = config.sinr_floor
    gains = effective_gains(state.control, state.channels)  # A_ki
    row_pw = combined_row_power(state.control, state.channels)  # A_k0
    b0 = state.channels.beta_0
    p = state.control.p
    mu = state.draw.mu_k
    ell = config.pathloss_exponent
    T = state.placement.T
    y_face = config.far_bs_distance + config.blockage_width
    base_offsets_u = state.placement.U - state.placement.o_u[:, None]
    o_anchor = state.placement.o_u.copy()
    sr2, su2 = config.noise_bs_total, config.noise_faru_total

    def placement_at(o2):
        pl = state.placement.copy()
        o = np.array([o2[0], y_face, o2[1]])
        pl.U = base_offsets_u + o[:, None]
        pl.o_u = o
        return pl

    def denom_const(k):
        return sr2 / b0 + su2 * row_pw[k]

    n = 2 + 2 * K

    def build(z):
        o = np.array([z[0], y_face, z[1]])
        cons = []
        # anchor denominators set the slack scale
        Z = np.array([
            denom_const(k) + sum(
                p[i] * mu[i] * gains[k, i] / np.linalg.norm(o - T[:, i]) ** ell
                for i in range(K) if i != k
            )
            for k in range(K)
        ])
        eta_n = np.array([
            p[k] * mu[k] * gains[k, k] / np.linalg.norm(o - T[:, k]) ** ell / Z[k]
            for k in range(K)
        ])
        for k in range(K):
            ie, iz = 2 + k, 2 + K + k
            num = taylor_inverse_pathloss(o, T[:, k], p[k] * mu[k] * gains[k, k], ell)
            # eta * zeta <= numerator (difference-of-squares restriction)
            P = np.zeros((n, n))
            for a in (ie, iz):
                for b in (ie, iz):
                    P[a, b] += 0.5
            q = np.zeros(n)
            d_n = eta_n[k] - 1.0  # zeta anchor is 1 after scaling
            q[ie] += -0.5 * d_n
            q[iz] += 0.5 * d_n
            r = 0.25 * d_n**2
            q[0] += -num.linear[0] / Z[k]
            q[1] += -num.linear[2] / Z[k]
            r += (-num.constant + num.linear[0] * o[0] + num.linear[2] * o[2]) / Z[k]
            cons.append(QuadraticConstraint(P, q, r))
            # interference + noise <= zeta
            a_vec = np.zeros(n)
            a_vec[iz] = -1.0
            rhs = -denom_const(k) / Z[k]
            for i in range(K):
                if i == k:
                    continue
                tl = taylor_inverse_pathloss(o, T[:, i], p[i] * mu[i] * gains[k, i], ell)
                a_vec[0] += tl.linear[0] / Z[k]
                a_vec[1] += tl.linear[2] / Z[k]
                rhs += (-tl.constant + tl.linear[0] * o[0] + tl.linear[2] * o[2]) / Z[k]
            cons.append(LinearConstraint(a_vec, rhs))
            # rate floor
            e = np.zeros(n)
            e[ie] = -1.0
            cons.append(LinearConstraint(e, -floor))
        for idx, hi in ((0, config.blockage_length - config.region_size),
                        (1, config.blockage_height - config.region_size)):
            e = np.zeros(n)
            e[idx] = 1.0
            cons.append(LinearConstraint(e, hi))
            cons.append(LinearConstraint(-e, 0.0))
        obj = SeparableLogObjective(
            n, log_indices=list(range(2, 2 + K)), log_weights=[1.0] * K
        )
        x0 = np.concatenate([[o[0], o[2]], eta_n * (1 - 1e-3), np.full(K, 1.0 + 1e-6)])
        return ConvexProgram(n, obj, cons, x0)

    def true_obj(z):
        return _sum_rate(state.config, placement_at(z[:2]), state.angles,
                         state.draw, state.control)

    def true_feas(z):
        return _feasible(state.config, placement_at(z[:2]), state.angles,
                         state.draw, state.control, state.scheme)

    z0 = np.concatenate([[o_anchor[0], o_anchor[2]], np.zeros(2 * K)])
    try:
        trace = sca_drive(build, z0, true_obj, true_feas,
                          tol=SCA_TOL, max_iter=POSITION_SCA_MAX)
    except ValueError:
        return state.placement.o_u  # infeasible start: keep previous reference
    state.placement = placement_at(trace[-1][:2])
    state.refresh()
    return state.placement.o_u


def optimize_large_scale(state: OptimizerState):
    optimize_bs_face_reference(state)
    optimize_user_face_reference(state)
    return state.placement.o_u, state.placement.o_b, state.placement.U, state.placement.B


# ---------------------------------------------------------------------------
# small-scale stage (per-antenna position SCA)


def _position_box(state, kind, index):
    config = state.config
    c = config.region_size
    if kind == "user":
        ref = state.placement.user_refs[:, index]
    elif kind == "faru":
        ref = state.placement.o_u
    elif kind == "farb":
        ref = state.placement.o_b
    else:
        ref = np.zeros(3)
    return (ref[0], ref[0] + c), (ref[2], ref[2] + c)


def _array_for(placement, kind):
    return {"user": placement.T, "faru": placement.U,
            "farb": placement.B, "bs": placement.R}[kind]


def _loose_curvatures(state, targets):
    """Loose closed-form curvature constants (selectable via config)."""
    config = state.config
    c1 = propagation_constants(medium_from_config(config)).c1
    t_dim = max(config.blockage_length, config.blockage_width, config.blockage_height)
    c2 = c2_constant(config.wavelength, c1, t_dim, config.blockage_width)
    c4 = c4_constant(c1, t_dim, config.blockage_width)
    return c2, c4


def optimize_antenna_position(state: OptimizerState, kind: str, index: int,
                              scan_points: int = 15):
    """One-antenna SCA update (moves t_k, u_m, b_m, or r_n)."""
    config = state.config
    K = config.num_users
    floor = config.sinr_floor
    W = config.blockage_width
    (xlo, xhi), (zlo, zhi) = _position_box(state, kind, index)
    y_fixed = _array_for(state.placement, kind)[1, index]
    n = 2 + 2 * K
    pos_idx = (0, 1)
    use_loose = config.loose_curvature

    def placement_at(z2):
        pl = state.placement.copy()
        _array_for(pl, kind)[:, index] = [z2[0], y_fixed, z2[1]]
        return pl

    def build(z):
        pl = placement_at(z[:2])
        ch = build_channel(config, pl, state.angles, state.draw)
        tg = MovingAntennaTargets(config, pl, state.angles, state.draw, ch)
        anchor = np.array([z[0], y_fixed, z[1]])
        p, Om = state.control.p, state.control.Omega
        sinrs = all_sinrs(state.control, ch, config)
        cons = []
        c2 = c4 = None
        if use_loose:
            c2, c4 = _loose_curvatures(state, tg)
        for k in range(K):
            it, iu = 2 + k, 2 + K + k
            w = Om[:, k]
            g = np.conj(w) @ ch.H @ ch.h_k[:, k]
            sr, su = (config.noise_bs_total / (p[k] * ch.beta_0 * ch.beta_k[k]),
                      config.noise_faru_total / (p[k] * ch.beta_k[k]))
            # numerator minorant: |s_k|^2 >= 2 Re(conj(g) s_k) - |g|^2
            num_target = tg.signal(w, k, kind, index).scale(2.0 * np.conj(g)).real()
            num_target.const -= abs(g) ** 2
            iota_num = (2.0 * c2 * sum(abs(t.coeff) for t in num_target.terms)
                        if use_loose else None)
            num_surr = mm_minorant(num_target, anchor, W, curvature=iota_num)
            # denominator majorant pieces
            pw_target = tg.combined_power(w, kind, index)
            iota_pw = (2.0 * c4 * sum(abs(t.coeff) for t in pw_target.terms)
                       if use_loose else None)
            pw_surr = mm_majorant(pw_target, anchor, W, curvature=iota_pw)
            denom_c = sr + su * pw_surr.constant
            denom_g = su * pw_surr.linear
            denom_iota = su * pw_surr.curvature
            for i in range(K):
                if i == k:
                    continue
                phat = p[i] * ch.beta_k[i] / (p[k] * ch.beta_k[k])
                s_target = tg.signal(w, i, kind, index).abs_squared()
                iota_s = (2.0 * c4 * sum(abs(t.coeff) for t in s_target.terms)
                          if use_loose else None)
                s_surr = mm_majorant(s_target, anchor, W, curvature=iota_s)
                denom_c += phat * s_surr.constant
                denom_g = denom_g + phat * s_surr.linear
                denom_iota += phat * s_surr.curvature
            V = max(denom_c, 1e-12)
            tau_n = max(num_surr.constant / V, 1e-12)
            # tau * upsilon <= numerator minorant (scaled by V)
            P = np.zeros((n, n))
            qv = np.zeros(n)
            for a in (it, iu):
                for b in (it, iu):
                    P[a, b] += 0.5
            d_n = tau_n - 1.0
            qv[it] += -0.5 * d_n
            qv[iu] += 0.5 * d_n
            r = 0.25 * d_n**2
            a2 = anchor[[0, 2]]
            gmin = num_surr.linear[[0, 2]]
            for d, zi in enumerate(pos_idx):
                qv[zi] += (-gmin[d] - num_surr.curvature * a2[d]) / V
                P[zi, zi] += num_surr.curvature / V
            r += (-num_surr.constant + gmin @ a2 + 0.5 * num_surr.curvature * (a2 @ a2)) / V
            cons.append(QuadraticConstraint(P, qv, r))
            # denominator majorant <= V * upsilon
            P2 = np.zeros((n, n))
            q2 = np.zeros(n)
            gden = denom_g[[0, 2]]
            for d, zi in enumerate(pos_idx):
                q2[zi] += (gden[d] - denom_iota * a2[d]) / V
                P2[zi, zi] += denom_iota / V
            r2 = (denom_c - gden @ a2 + 0.5 * denom_iota * (a2 @ a2)) / V
            q2[iu] += -1.0
            cons.append(QuadraticConstraint(P2, q2, r2))
            # rate floor on tau
            e = np.zeros(n)
            e[it] = -1.0
            cons.append(LinearConstraint(e, -floor))
        # region box
        for zi, lo, hi in ((0, xlo, xhi), (1, zlo, zhi)):
            e = np.zeros(n)
            e[zi] = 1.0
            cons.append(LinearConstraint(e, hi))
            cons.append(LinearConstraint(-e, -lo))
        # spacing linearizations against the same array's other antennas
        if kind in ("faru", "farb", "bs"):
            arr = _array_for(pl, kind)
            for l in range(arr.shape[1]):
                if l == index:
                    continue
                lin = linearize_min_distance(anchor, arr[:, l], config.min_spacing)
                e = np.zeros(n)
                e[0], e[1] = -lin.linear[0], -lin.linear[2]
                # tiny slack keeps grid-tight anchors strictly interior; the
                # checker tolerance absorbs it
                rhs = (-config.min_spacing + 5e-7 + lin.constant
                       - lin.linear[0] * anchor[0] - lin.linear[2] * anchor[2])
                cons.append(LinearConstraint(e, rhs))
        obj = SeparableLogObjective(
            n, log_indices=list(range(2, 2 + K)), log_weights=[1.0] * K
        )
        tau0 = np.maximum(sinrs * (1 - 1e-3), floor * (1 + 1e-9) if floor > 0 else 1e-12)
        x0 = np.concatenate([[anchor[0], anchor[2]], tau0, np.full(K, 1.0 + 1e-6)])
        return ConvexProgram(n, obj, cons, x0)

    def true_obj(z):
        return _sum_rate(config, placement_at(z[:2]), state.angles, state.draw,
                         state.control)

    def true_feas(z):
        return _feasible(config, placement_at(z[:2]), state.angles, state.draw,
                         state.control, state.scheme)

    arr = _array_for(state.placement, kind)
    z0 = np.concatenate([[arr[0, index], arr[2, index]], np.zeros(2 * K)])
    # The MM curvature constants confine each convex step to a millimetre
    # trust region, so seed the SCA with a coarse scan of the region (the
    # rate oscillates on the half-wavelength scale; 15 points across a 3λ
    # box samples each lobe) and let the SCA polish the best cell.
    if scan_points > 1 and true_feas(z0):
        others = None
        if kind in ("faru", "farb", "bs"):
            others = np.delete(_array_for(state.placement, kind), index, axis=1)
        rate_floor = config.min_rate * (1 - 1e-9)
        p_now = state.control.p

        def response_rates(z2):
            """Rates at the candidate under the beamformer best response
            (scanning the joint landscape avoids the position/beamformer
            zigzag of plain coordinate ascent)."""
            ch2 = build_channel(config, placement_at(z2), state.angles, state.draw)
            beams = mmse_beamformers(ch2, config, p_now)
            ctrl = ControlState(p_now, beams)
            return rates_from_sinr(all_sinrs(ctrl, ch2, config), config), beams

        r0, beams0 = response_rates(z0[:2])
        best2, best_val, best_beams = z0[:2].copy(), float(r0.sum()), None

        def scan(x_range, z_range, points):
            nonlocal best2, best_val, best_beams
            for gx in np.linspace(*x_range, points):
                for gz in np.linspace(*z_range, points):
                    pos = np.array([gx, y_fixed, gz])
                    if others is not None and others.size and np.min(
                        np.linalg.norm(others - pos[:, None], axis=0)
                    ) < config.min_spacing:
                        continue
                    rates, beams = response_rates((gx, gz))
                    val = float(rates.sum())
                    if val > best_val and float(rates.min()) >= rate_floor:
                        best2, best_val, best_beams = np.array([gx, gz]), val, beams

        scan((xlo, xhi), (zlo, zhi), scan_points)
        # refine around the best coarse cell
        cell = max(xhi - xlo, zhi - zlo) / (scan_points - 1)
        scan((max(xlo, best2[0] - cell), min(xhi, best2[0] + cell)),
             (max(zlo, best2[1] - cell), min(zhi, best2[1] + cell)), 9)
        if best_beams is not None:
            # commit position and matching beams together, with a full check
            old_placement, old_control = state.placement, state.control
            old_ee = state.report().ee
            state.placement = placement_at(best2)
            state.refresh()
            state.control = ControlState(p_now, best_beams)
            rep = state.report()
            if rep.feasible and rep.ee >= old_ee - 1e-12 * abs(old_ee):
                z0[:2] = best2
            else:
                state.placement, state.control = old_placement, old_control
                state.refresh()
    try:
        trace = sca_drive(build, z0, true_obj, true_feas,
                          tol=SCA_TOL, max_iter=POSITION_SCA_MAX)
    except ValueError:
        return arr[:, index]
    state.placement = placement_at(trace[-1][:2])
    state.refresh()
    return _array_for(state.placement, kind)[:, index]


def _refresh_beamformers(state: OptimizerState):
    """Adopt the beamformer best response when it truly helps (it weakly
    improves every SINR, so this keeps the stage trace monotone)."""
    cand = ControlState(state.control.p,
                        mmse_beamformers(state.channels, state.config, state.control.p))
    old = state.report()
    state_control = state.control
    state.control = cand
    new = state.report()
    if new.ee >= old.ee and (new.feasible or not old.feasible):
        return
    state.control = state_control


def optimize_all_positions(state: OptimizerState, tol: float = SCA_TOL,
                           max_passes: int = 2) -> float:
    """Cycle the per-antenna updates (users, FAR-U, FAR-B, BS, index
    ascending) until the stage's own sum rate converges."""
    current = _sum_rate(state.config, state.placement, state.angles,
                        state.draw, state.control)
    for _ in range(max_passes):
        optimize_user_positions(state)
        optimize_faru_positions(state)
        optimize_farb_positions(state)
        optimize_bs_positions(state)
        _refresh_beamformers(state)
        new = _sum_rate(state.config, state.placement, state.angles,
                        state.draw, state.control)
        if new - current <= tol * max(1.0, abs(current)):
            current = max(new, current)
            break
        current = new
    return current


def optimize_user_positions(state: OptimizerState) -> np.ndarray:
    for k in range(state.config.num_users):
        optimize_antenna_position(state, "user", k)
    return state.placement.T


def optimize_faru_positions(state: OptimizerState) -> np.ndarray:
    for m in range(state.config.num_far_antennas):
        optimize_antenna_position(state, "faru", m)
    return state.placement.U


def optimize_farb_positions(state: OptimizerState) -> np.ndarray:
    for m in range(state.config.num_far_antennas):
        optimize_antenna_position(state, "farb", m)
    return state.placement.B


def optimize_bs_positions(state: OptimizerState) -> np.ndarray:
    for nn in range(state.config.num_bs_antennas):
        optimize_antenna_position(state, "bs", nn)
    return state.placement.R


# ---------------------------------------------------------------------------
# power / beamforming stage


def _real_embedding(G: np.ndarray) -> np.ndarray:
    """w^H G w = [Re w; Im w]^T M [Re w; Im w] for Hermitian G."""
    Gr, Gi = np.real(G), np.imag(G)
    return np.block([[Gr, -Gi], [Gi, Gr]])


class _DenominatorConstraint:
    """(sigma_r + sigma_u ||w^H H||^2 + interference majorant)/X - chi <= 0.

    Interference products p_i*b_i(w) are majorized by the weighted
    squares (t/2) a^2 + b^2/(2t) with t = b_n/a_n (exact at the anchor,
    jointly convex since both squares have positive coefficients).
    """

    def __init__(self, n, k, K, N, iw0, ichi, H, hbar, beta_bar, sr, su, X,
                 p_anchor, w_anchor, p_max):
        self.n, self.k, self.N = n, k, N
        self.iw = slice(iw0, iw0 + 2 * N)
        self.ichi = ichi
        self.X = X
        self.sr = sr
        self.S = su * _real_embedding(H @ H.conj().T) / X
        self.pieces = []
        wa = np.concatenate([np.real(w_anchor), np.imag(w_anchor)])
        for i in range(K):
            if i == k:
                continue
            h = hbar[:, i]
            v1 = np.concatenate([np.real(h), np.imag(h)])
            v2 = np.concatenate([np.imag(h), -np.real(h)])
            coef = p_max * beta_bar[i]  # a = coef * p_tilde_i
            a_n = max(coef * p_anchor[i], 1e-12)
            b_n = max((v1 @ wa) ** 2 + (v2 @ wa) ** 2, 1e-12)
            t = min(max(b_n / a_n, 1e-8), 1e8)
            self.pieces.append((i, coef, v1, v2, t))

    def _b(self, w):
        out = []
        for _, _, v1, v2, _ in self.pieces:
            out.append(((v1 @ w), (v2 @ w)))
        return out

    def value(self, z):
        w = z[self.iw]
        val = self.sr / self.X + float(w @ self.S @ w)
        for (i, coef, v1, v2, t), (d1, d2) in zip(self.pieces, self._b(w)):
            a = coef * z[i]
            b = d1 * d1 + d2 * d2
            val += (0.5 * t * a * a + 0.5 * b * b / t) / self.X
        return val - z[self.ichi]

    def grad(self, z):
        w = z[self.iw]
        g = np.zeros(self.n)
        g[self.iw] = 2.0 * (self.S @ w)
        for (i, coef, v1, v2, t), (d1, d2) in zip(self.pieces, self._b(w)):
            a = coef * z[i]
            b = d1 * d1 + d2 * d2
            g[i] += t * a * coef / self.X
            g[self.iw] += (b / t) * (2.0 * d1 * v1 + 2.0 * d2 * v2) / self.X
        g[self.ichi] = -1.0
        return g

    def hess(self, z):
        w = z[self.iw]
        Hm = np.zeros((self.n, self.n))
        Hm[self.iw, self.iw] = 2.0 * self.S
        for (i, coef, v1, v2, t), (d1, d2) in zip(self.pieces, self._b(w)):
            b = d1 * d1 + d2 * d2
            gb = 2.0 * d1 * v1 + 2.0 * d2 * v2
            hb = 2.0 * (np.outer(v1, v1) + np.outer(v2, v2))
            Hm[i, i] += t * coef * coef / self.X
            Hm[self.iw, self.iw] += ((np.outer(gb, gb) + b * hb) / t) / self.X
        return Hm


def optimize_power_beamforming(
    config: ScenarioConfig,
    channels: ChannelRealization,
    control: ControlState,
    scheme: str = "far",
    outer_max: int = POWER_SCA_MAX,
    tol: float = SCA_TOL,
):
    """Dinkelbach EE maximization of powers and beamformers at fixed
    placement.  Returns (control, ee, feasible)."""
    K, N = config.num_users, config.num_bs_antennas
    floor = config.sinr_floor
    p_max = config.max_power
    p_const = circuit_power(config, scheme)
    bw_scale = config.bandwidth / 1e6  # rates tracked in Mbit/s inside
    hbar = channels.H @ channels.h_k  # (N, K)
    G = channels.H @ channels.H.conj().T
    n = K + 2 * N * K + 2 * K
    ipsi0 = K + 2 * N * K
    ichi0 = ipsi0 + K

    def iw0(k):
        return K + 2 * N * k

    def true_ee(p, Om):
        ctrl = ControlState(p, Om)
        rates = rates_from_sinr(all_sinrs(ctrl, channels, config), config)
        return energy_efficiency(rates, p, config, scheme), rates

    def true_sinrs(p, Om):
        return all_sinrs(ControlState(p, Om), channels, config)

    best_p, best_Om = control.p.copy(), control.Omega.copy()
    best_ee, best_rates = true_ee(best_p, best_Om)
    best_feasible = bool(np.min(best_rates) >= config.min_rate * (1 - 1e-9))

    for _ in range(outer_max):
        # closed-form beamformer best response at the current powers
        Om_br = mmse_beamformers(channels, config, best_p)
        br_ee, br_rates = true_ee(best_p, Om_br)
        br_feasible = bool(np.min(br_rates) >= config.min_rate * (1 - 1e-9))
        if br_ee >= best_ee and (br_feasible or not best_feasible):
            best_Om, best_ee = Om_br, br_ee
            best_feasible = br_feasible
        # pre-rotate anchor beamformers so w^H hbar_k is real nonnegative
        Om_a = best_Om.copy()
        for k in range(K):
            ip_val = np.conj(Om_a[:, k]) @ hbar[:, k]
            if abs(ip_val) > 0:
                Om_a[:, k] *= np.exp(1j * np.angle(ip_val))
        p_a = np.clip(best_p / p_max, 1e-4, 1.0 - 1e-9)
        sinr_a = true_sinrs(p_a * p_max, Om_a)
        sbar_r = config.noise_bs_total / (channels.beta_0 * channels.beta_k)
        sbar_u = config.noise_faru_total / channels.beta_k
        beta_bar = np.array([channels.beta_k / channels.beta_k[k] for k in range(K)])

        cons = []
        X = np.empty(K)
        psi_a = np.empty(K)
        for k in range(K):
            w = Om_a[:, k]
            denom = (sbar_r[k] + sbar_u[k] * float(np.real(np.conj(w) @ G @ w))
                     + sum(p_a[i] * p_max * beta_bar[k][i]
                           * abs(np.conj(w) @ hbar[:, i]) ** 2
                           for i in range(K) if i != k))
            X[k] = max(denom, 1e-12)
            psi_a[k] = max(sinr_a[k], floor * 1.01 if floor > 0 else 1e-9, 1e-9)
            # (a) power box
            cons += [LinearConstraint(_unit(n, k), 1.0),
                     LinearConstraint(-_unit(n, k), 0.0)]
            # (b) beam norm ||w_k||^2 <= 1
            P = np.zeros((n, n))
            sl = slice(iw0(k), iw0(k) + 2 * N)
            P[sl, sl] = 2.0 * np.eye(2 * N)
            cons.append(QuadraticConstraint(P, np.zeros(n), -1.0))
            # (c) psi floor
            cons.append(LinearConstraint(-_unit(n, ipsi0 + k),
                                         -(floor if floor > 0 else 1e-10)))
            # (d) chi positivity
            cons.append(LinearConstraint(-_unit(n, ichi0 + k), -1e-8))
            # (e) sqrt-product restriction of the SINR definition
            aff = sqrt_product_lower(p_a[k], psi_a[k], 1.0)
            scale = math.sqrt(X[k] / p_max)
            a_vec = np.zeros(n)
            a_vec[k] = scale * aff.linear[0]
            a_vec[ipsi0 + k] = scale * aff.linear[1]
            a_vec[ichi0 + k] = scale * aff.linear[2]
            a_vec[iw0(k):iw0(k) + N] = -np.real(hbar[:, k])
            a_vec[iw0(k) + N:iw0(k) + 2 * N] = -np.imag(hbar[:, k])
            rhs = -scale * (aff.constant - aff.linear @ aff.anchor)
            cons.append(LinearConstraint(a_vec, rhs))
            # (f) denominator majorant <= chi
            cons.append(SmoothConstraint(*_triple(_DenominatorConstraint(
                n, k, K, N, iw0(k), ichi0 + k, channels.H, hbar, beta_bar[k],
                sbar_r[k], sbar_u[k], X[k], p_a, w, p_max,
            ))))

        x_anchor = np.zeros(n)
        x_anchor[:K] = p_a
        for k in range(K):
            x_anchor[iw0(k):iw0(k) + N] = np.real(Om_a[:, k]) * (1 - 1e-7)
            x_anchor[iw0(k) + N:iw0(k) + 2 * N] = np.imag(Om_a[:, k]) * (1 - 1e-7)
        x_anchor[ipsi0:ipsi0 + K] = psi_a * (1 - 1e-5)
        x_anchor[ichi0:ichi0 + K] = 1.0 + 1e-6

        def numerator(z):
            return bw_scale * float(np.sum(np.log2(1.0 + z[ipsi0:ipsi0 + K])))

        def denominator(z):
            return p_max * float(np.sum(z[:K])) + p_const

        def parametric(s):
            obj = SeparableLogObjective(
                n,
                log_indices=list(range(ipsi0, ipsi0 + K)),
                log_weights=[bw_scale] * K,
                linear=_power_linear(n, K, -s * p_max),
            )
            res = solve(ConvexProgram(n, obj, cons, x_anchor.copy()))
            return None if res.status == "infeasible" else res.x

        try:
            z, _, _ = dinkelbach_drive(numerator, denominator, parametric)
        except RuntimeError:
            break
        cand_p = np.clip(z[:K], 0.0, 1.0) * p_max
        cand_Om = np.empty((N, K), dtype=complex)
        for k in range(K):
            wk = z[iw0(k):iw0(k) + N] + 1j * z[iw0(k) + N:iw0(k) + 2 * N]
            nk = np.linalg.norm(wk)
            cand_Om[:, k] = wk / nk if nk > 1.0 else wk
        cand_ee, cand_rates = true_ee(cand_p, cand_Om)
        cand_feasible = bool(np.min(cand_rates) >= config.min_rate * (1 - 1e-9))
        improved = cand_ee > best_ee + tol * max(1.0, abs(best_ee))
        accept = (cand_feasible and not best_feasible) or (
            cand_feasible == best_feasible and cand_ee >= best_ee - 1e-12 * abs(best_ee)
        )
        if not accept:
            break
        best_p, best_Om, best_ee = cand_p, cand_Om, cand_ee
        best_feasible = cand_feasible
        if not improved:
            break
    return ControlState(best_p, best_Om), best_ee, best_feasible


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _power_linear(n, K, coef):
    c = np.zeros(n)
    c[:K] = coef
    return c


def _triple(obj):
    return obj.value, obj.grad, obj.hess


# ---------------------------------------------------------------------------
# initialization + outer loop


def initialize(config: ScenarioConfig, seed: int) -> OptimizerState:
    rng = scenario_rng(seed)
    refs = draw_user_refs(config, rng)
    angles = draw_angles(config, rng)
    fading = draw_fading(config, rng)
    placement = initial_placement(config, refs)
    channels = build_channel(config, placement, angles, fading)
    control = ControlState(
        p=np.full(config.num_users, config.max_power / 2.0),
        Omega=mrc_beamformers(channels),
    )
    return OptimizerState(
        config=config, placement=placement, control=control,
        angles=angles, draw=fading, channels=channels,
    )


def repair_feasibility(state: OptimizerState) -> bool:
    """Try cheap control settings, then the power stage, to reach a state
    meeting the rate floor.  Returns True on success."""
    if state.report().feasible:
        return True
    p_full = np.full(state.config.num_users, state.config.max_power)
    candidates = [
        ControlState(p_full, mmse_beamformers(state.channels, state.config, p_full)),
        ControlState(p_full, mrc_beamformers(state.channels)),
        ControlState(p_full, zf_beamformers(state.channels)),
    ]
    for cand in candidates:
        rep = check_solution(state.placement, cand, state.channels,
                             state.config, state.scheme)
        if rep.feasible:
            state.control = cand
            return True
    # last resort: let the power stage search (phase-I handles infeasible starts)
    best = None
    for cand in [state.control] + candidates:
        ctrl, ee, feasible = optimize_power_beamforming(
            state.config, state.channels, cand, state.scheme, outer_max=3)
        if feasible and (best is None or ee > best[1]):
            best = (ctrl, ee)
    if best is not None:
        state.control = best[0]
        return state.report().feasible
    return False


def optimize_ee(config: ScenarioConfig, seed: int, scheme: str = "far",
                outer_max: int = OUTER_MAX, tol: float = OUTER_TOL) -> OptimizerState:
    """Full alternating EE maximization for one seeded scenario."""
    state = initialize(config, seed)
    if not repair_feasibility(state):
        state.feasible = False
        state.ee_trace = [0.0]
        log.warning("seed %d: rate floor unattainable, scenario flagged infeasible", seed)
        return state

    def current_ee():
        rep = state.report()
        return rep.ee

    state.ee_trace = [current_ee()]
    for it in range(outer_max):
        state.outer_iteration = it + 1
        optimize_large_scale(state)
        state.stage_log.append(("large_scale", current_ee()))
        # positions and control are tightly coupled (each unlocks small
        # gains for the other), so drive the pair to a joint fixed point
        # inside the round instead of leaking the zigzag into the outer
        # trace
        inner_prev = current_ee()
        for _ in range(INNER_ALT_MAX):
            optimize_all_positions(state)
            state.stage_log.append(("positions", current_ee()))
            before = current_ee()
            ctrl, ee, feasible = optimize_power_beamforming(
                config, state.channels, state.control, state.scheme)
            if feasible and ee >= before - 1e-12 * abs(before):
                state.control = ctrl
            after = current_ee()
            state.stage_log.append(("power", after))
            if after - inner_prev <= 0.2 * tol * max(1.0, abs(after)):
                break
            inner_prev = after
        ee_now = current_ee()
        state.ee_trace.append(ee_now)
        if abs(ee_now - state.ee_trace[-2]) <= tol * max(1.0, abs(ee_now)):
            break
    return state
