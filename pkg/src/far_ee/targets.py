"""Phase-sum views of the link quantities under single-antenna motion.

For the position subproblems each update moves exactly one antenna while
all others stay put.  The beamformed signal w^H H0 Theta h_j and the
combined power ||w^H H0 Theta||^2 then reduce to phase sums in that one
3-D position: steering phases are linear in the position, and the
blockage-through phases are C1_hat times distances to the antennas on
the opposite face.  These builders produce ComplexPhaseSum /
RealPhaseSum objects whose values match the direct matrix evaluation at
the current placement and stay exact as the antenna moves (other
channel state frozen, block-fading).

``freeze_steering=True`` additionally pins the moving antenna's own
steering phase at its current value, leaving only the through-matrix
distances varying (the coarser convention used for upper-bound targets
in the reference treatment); the default keeps full variation.
"""

from __future__ import annotations

import numpy as np

from .channel import AngleSet, ChannelRealization, FadingDraw, medium_from_config
from .geometry import Placement, ScenarioConfig, steering_vector, wave_vector
from .propagation import propagation_constants
from .surrogates import ComplexPhaseSum, RealPhaseSum, _term


class MovingAntennaTargets:
    """Builders bound to one placement + fading state.

    kind is one of "user" (t_k), "faru" (u_m), "farb" (b_m), "bs" (r_n);
    index selects the antenna.  Rebuild after every committed move.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        placement: Placement,
        angles: AngleSet,
        draw: FadingDraw,
        channels: ChannelRealization,
    ):
        self.config = config
        self.placement = placement
        self.angles = angles
        self.draw = draw
        self.ch = channels
        self.klam = 2.0 * np.pi / config.wavelength
        self.c1_hat = propagation_constants(medium_from_config(config)).c1_hat

        k0, k1 = config.rician_k0, config.rician_k1
        self.los0 = np.sqrt(k0 / (k0 + 1.0))
        self.nlos0 = np.sqrt(1.0 / (k0 + 1.0))
        self.los1 = np.sqrt(k1 / (k1 + 1.0))
        self.nlos1 = np.sqrt(1.0 / (k1 + 1.0))

        self.kappa_u = [wave_vector(*angles.user_aoa[k]) for k in range(config.num_users)]
        self.kappa_t = [wave_vector(*angles.user_aod[k]) for k in range(config.num_users)]
        self.kappa_b = wave_vector(*angles.bs_aod)
        self.kappa_r = wave_vector(*angles.bs_aoa)
        self.rho_r = steering_vector(placement.R, np.zeros(3), self.kappa_r, config.wavelength)
        self.rho_b = steering_vector(placement.B, placement.o_b, self.kappa_b, config.wavelength)
        self.rho_t = np.array([
            steering_vector(
                placement.T[:, k], placement.user_refs[:, k], self.kappa_t[k], config.wavelength
            )[0]
            for k in range(config.num_users)
        ])

    # -- per-entry channel decompositions -----------------------------------

    def _h_entry_parts(self, j: int):
        """h_j(q) = coef * exp(j lin^T u_q) + nlos1 * hhat[q, j]."""
        lin = self.klam * self.kappa_u[j]
        coef = self.los1 * np.conj(self.rho_t[j]) * np.exp(-1j * lin @ self.placement.o_u)
        return coef, lin

    def _h0_col_parts(self):
        """H0[:, m] = coef_vec * exp(-j lin^T b_m) + nlos0 * Hhat0[:, m]."""
        lin = self.klam * self.kappa_b
        coef_vec = self.los0 * self.rho_r * np.exp(1j * lin @ self.placement.o_b)
        return coef_vec, lin

    # -- signal target: x -> w^H H0 Theta h_j --------------------------------

    def signal(self, omega, j: int, kind: str, index: int,
               freeze_steering: bool = False) -> ComplexPhaseSum:
        w = np.conj(np.asarray(omega))
        H0, Th, h = self.ch.H_0, self.ch.theta_matrix.entries, self.ch.h_k
        B, U = self.placement.B, self.placement.U
        neg = -self.c1_hat

        if kind == "user":
            if j != index:
                return ComplexPhaseSum.constant(w @ self.ch.H @ h[:, j])
            v = w @ self.ch.H  # (M,) over FAR-U entries
            rho_u = steering_vector(U, self.placement.o_u, self.kappa_u[j],
                                    self.config.wavelength)
            lin = -self.klam * self.kappa_t[j]
            coef = self.los1 * (v @ rho_u) * np.exp(
                1j * self.klam * self.kappa_t[j] @ self.placement.user_refs[:, j]
            )
            const = self.nlos1 * (v @ self.draw.hhat_k[:, j])
            return ComplexPhaseSum.constant(const) + ComplexPhaseSum.sinusoid(coef, lin)

        if kind == "faru":
            m = index
            a = w @ H0  # (M,) over FAR-B
            full = (a @ Th) @ h[:, j]
            const = full - (a @ Th[:, m]) * h[m, j]
            out = ComplexPhaseSum.constant(const)
            if freeze_steering:
                hm = h[m, j]
                for p in range(B.shape[1]):
                    out = out + ComplexPhaseSum.sinusoid(
                        a[p] * hm, dists=[(neg, B[:, p])]
                    )
                return out
            coef, lin = self._h_entry_parts(j)
            nl = self.nlos1 * self.draw.hhat_k[m, j]
            for p in range(B.shape[1]):
                out = out + ComplexPhaseSum.sinusoid(a[p] * coef, lin, [(neg, B[:, p])])
                out = out + ComplexPhaseSum.sinusoid(a[p] * nl, dists=[(neg, B[:, p])])
            return out

        if kind == "farb":
            m = index
            th_h = Th @ h[:, j]  # (M,) over FAR-B rows
            const = sum((w @ H0[:, p]) * th_h[p] for p in range(B.shape[1]) if p != m)
            out = ComplexPhaseSum.constant(const)
            if freeze_steering:
                amp = w @ H0[:, m]
                for q in range(U.shape[1]):
                    out = out + ComplexPhaseSum.sinusoid(
                        amp * h[q, j], dists=[(neg, U[:, q])]
                    )
                return out
            coef_vec, lin = self._h0_col_parts()
            a_los = w @ coef_vec
            a_nlos = self.nlos0 * (w @ self.draw.Hhat_0[:, m])
            for q in range(U.shape[1]):
                out = out + ComplexPhaseSum.sinusoid(a_los * h[q, j], -lin, [(neg, U[:, q])])
                out = out + ComplexPhaseSum.sinusoid(a_nlos * h[q, j], dists=[(neg, U[:, q])])
            return out

        if kind == "bs":
            n = index
            th_h = Th @ h[:, j]
            const = sum(w[i] * (H0[i, :] @ th_h) for i in range(len(w)) if i != n)
            const += w[n] * self.nlos0 * (self.draw.Hhat_0[n, :] @ th_h)
            coef = w[n] * self.los0 * (np.conj(self.rho_b) @ th_h)
            return ComplexPhaseSum.constant(const) + ComplexPhaseSum.sinusoid(
                coef, self.klam * self.kappa_r
            )

        raise ValueError(f"unknown antenna kind {kind!r}")

    # -- combined power target: x -> ||w^H H0 Theta||^2 ----------------------

    def combined_power(self, omega, kind: str, index: int,
                       freeze_steering: bool = False) -> RealPhaseSum:
        w = np.conj(np.asarray(omega))
        H0, Th = self.ch.H_0, self.ch.theta_matrix.entries
        B, U = self.placement.B, self.placement.U
        M = B.shape[1]
        neg = -self.c1_hat
        row = w @ self.ch.H  # (M,) entries of w^H H over FAR-U columns

        if kind == "user":
            return RealPhaseSum([], float(np.linalg.norm(row) ** 2))

        if kind == "faru":
            m = index
            a = w @ H0
            const = float(np.linalg.norm(row) ** 2 - abs(row[m]) ** 2)
            col = ComplexPhaseSum(
                [_term(a[p], dists=[(neg, B[:, p])]) for p in range(M)]
            )
            out = col.abs_squared()
            out.const += const
            return out

        if kind == "farb":
            m = index
            if freeze_steering:
                amp_terms = [ComplexPhaseSum.constant(w @ H0[:, m])]
                lin = None
            else:
                coef_vec, lin = self._h0_col_parts()
                amp_terms = [
                    ComplexPhaseSum.sinusoid(w @ coef_vec, -lin),
                    ComplexPhaseSum.constant(self.nlos0 * (w @ self.draw.Hhat_0[:, m])),
                ]
            total = RealPhaseSum([], 0.0)
            for q in range(U.shape[1]):
                base = sum((w @ H0[:, p]) * Th[p, q] for p in range(M) if p != m)
                col = ComplexPhaseSum.constant(base)
                for amp in amp_terms:
                    col = col + amp * ComplexPhaseSum.sinusoid(1.0, dists=[(neg, U[:, q])])
                sq = col.abs_squared()
                total = RealPhaseSum(total.terms + sq.terms, total.const + sq.const)
            return total

        if kind == "bs":
            n = index
            others = np.conj(omega).copy()
            others[n] = 0.0
            base_a = others @ H0
            base_a = base_a + w[n] * self.nlos0 * self.draw.Hhat_0[n, :]
            var_a = w[n] * self.los0 * np.conj(self.rho_b)
            lin = self.klam * self.kappa_r
            total = RealPhaseSum([], 0.0)
            for q in range(Th.shape[1]):
                col = ComplexPhaseSum.constant(base_a @ Th[:, q]) + ComplexPhaseSum.sinusoid(
                    var_a @ Th[:, q], lin
                )
                sq = col.abs_squared()
                total = RealPhaseSum(total.terms + sq.terms, total.const + sq.const)
            return total

        raise ValueError(f"unknown antenna kind {kind!r}")

    # -- convenience ----------------------------------------------------------

    def anchor(self, kind: str, index: int) -> np.ndarray:
        arr = {"user": self.placement.T, "faru": self.placement.U,
               "farb": self.placement.B, "bs": self.placement.R}[kind]
        return arr[:, index].copy()

    def opposite_face(self, kind: str) -> np.ndarray | None:
        """Positions whose distances enter the through-matrix phases."""
        if kind == "faru":
            return self.placement.B
        if kind == "farb":
            return self.placement.U
        return None
