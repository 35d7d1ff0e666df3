"""Assembly of the fully discrete implicit step: residuals and Jacobians.

One implicit time step advances (X, mu, mu_S) simultaneously. Unknowns
and residual rows share one global layout with four slots per node,
(r_k, z_k, mu_k, mu_S_k), which keeps the Jacobian bandwidth constant in
the node index. Lagged (old-time) geometry enters through per-segment
tangents, normals, lengths and the stabilized matrix B_q(theta^m); the
new-time curve enters through gamma(theta^{m+1})|h^{m+1}|, the quadratic
mu_S terms, and the averaged area element f^{m+1/2}.

Quadrature policy (load-bearing for the conservation/stability proofs):
  * pairings against f^{m+1/2} use per-segment Simpson, exact for their
    cubic integrands - this is what makes the volume identity exact;
  * products of segment constants with the linear radius integrate
    exactly via the segment mean radius;
  * nodal products (mu_S^2 and friends) use the lumped trapezoid rule,
    matching the lumped terms of the discrete energy.
Cancelling term pairs across the three equations share their rule, so the
telescoping in the energy argument holds to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .anisotropy import AnisotropyModel, StabilityLookup, eval_gamma, surface_energy_matrix
from .curve import CurveError, GeneratingCurve, Topology, perp, segment_frames

__all__ = [
    "PhysicsParams",
    "SchemeState",
    "DofMap",
    "f_half",
    "volume_pairing",
    "StepSystem",
]


@dataclass(frozen=True)
class PhysicsParams:
    sigma: float
    eta: float
    eps: float

    def __post_init__(self) -> None:
        if self.eta <= 0.0:
            raise ValueError("contact-line mobility eta must be positive")
        if self.eps < 0.0:
            raise ValueError("regularization eps must be >= 0")


@dataclass
class SchemeState:
    curve: GeneratingCurve
    mu: np.ndarray
    mu_S: np.ndarray
    kappa: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        n = self.curve.J + 1
        self.mu = np.asarray(self.mu, dtype=float)
        self.mu_S = np.asarray(self.mu_S, dtype=float)
        self.kappa = np.asarray(self.kappa, dtype=float)
        for name in ("mu", "mu_S", "kappa"):
            if getattr(self, name).shape != (n,):
                raise CurveError(f"field {name} has wrong size")
        if abs(self.mu_S[0]) > 1e-12 or abs(self.mu_S[-1]) > 1e-12:
            raise CurveError("mu_S must vanish at the curve endpoints")

    def copy(self) -> "SchemeState":
        return SchemeState(self.curve.copy(), self.mu.copy(), self.mu_S.copy(),
                           self.kappa.copy(), self.t)


class DofMap:
    """Boolean mask of active slots; pinned unknowns and their paired
    test rows occupy the same slots, so one mask serves both."""

    def __init__(self, J: int, topology: Topology):
        if J < 4:
            raise CurveError("need J >= 4 segments")
        self.J = J
        self.topology = topology
        n = 4 * (J + 1)
        mask = np.ones(n, dtype=bool)
        # z_J pin / removed z-test at the outer contact line, plus the
        # mu_S pins at both endpoints, apply to both topologies.
        mask[4 * J + 1] = False
        mask[3] = False
        mask[4 * J + 3] = False
        if topology is Topology.TWO_CONTACT_LINES:
            mask[1] = False            # z_0 pinned on the substrate
        else:
            mask[0] = False            # r_0 pinned on the axis
        self.mask = mask
        self.free = np.nonzero(mask)[0]

    @property
    def n_full(self) -> int:
        return 4 * (self.J + 1)

    @property
    def n_reduced(self) -> int:
        return len(self.free)


def _slots(J: int):
    k = np.arange(J + 1)
    return 4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3


def f_half(curve_m: GeneratingCurve, curve_guess: GeneratingCurve):
    """Segment endpoint values of the averaged area element f^{m+1/2}.

    f^{m+1/2} = -(1/6)[2 r^m X_rho^m + 2 r^{m+1} X_rho^{m+1}
                       + r^m X_rho^{m+1} + r^{m+1} X_rho^m]^perp
    is linear on each segment; returns (f_left, f_right), each (J, 2).
    """
    if curve_m.J != curve_guess.J:
        raise CurveError("curves must share the node count")
    J = curve_m.J
    h = 1.0 / J
    P = curve_m.nodes
    Y = curve_guess.nodes
    dP = np.diff(P, axis=0)
    dY = np.diff(Y, axis=0)
    a = P[:, 0]
    b = Y[:, 0]
    k0 = -1.0 / (6.0 * h)
    cL1 = 2.0 * a[:-1] + b[:-1]
    cL2 = 2.0 * b[:-1] + a[:-1]
    cR1 = 2.0 * a[1:] + b[1:]
    cR2 = 2.0 * b[1:] + a[1:]
    fL = k0 * perp(cL1[:, None] * dP + cL2[:, None] * dY)
    fR = k0 * perp(cR1[:, None] * dP + cR2[:, None] * dY)
    return fL, fR


def volume_pairing(curve_m: GeneratingCurve, curve_guess: GeneratingCurve) -> float:
    """2 pi (X^{m+1} - X^m, f^{m+1/2}) with per-segment Simpson (exact)."""
    J = curve_m.J
    h = 1.0 / J
    D = curve_guess.nodes - curve_m.nodes
    fL, fR = f_half(curve_m, curve_guess)
    D0, D1 = D[:-1], D[1:]
    Dm = 0.5 * (D0 + D1)
    fm = 0.5 * (fL + fR)
    s = (np.einsum("jk,jk->j", D0, fL)
         + 4.0 * np.einsum("jk,jk->j", Dm, fm)
         + np.einsum("jk,jk->j", D1, fR))
    return float(2.0 * np.pi * np.sum(h / 6.0 * s))


# Column basis for the four curve unknowns of a segment, ordered
# (r_left, z_left, r_right, z_right): sign of d(Delta Y) and the component.
_COL_SIGN = np.array([-1.0, -1.0, 1.0, 1.0])
_COL_COMP = np.array([0, 1, 0, 1])


class StepSystem:
    """Residual and Jacobian of one implicit step, frozen at the old state.

    All lagged quantities (segment frames, stabilized matrices, lumped
    weights) are computed once in the constructor; residual() and
    jacobian() are then pure functions of the new-time guess.
    """

    def __init__(self, state_m: SchemeState, model: AnisotropyModel,
                 params: PhysicsParams, dt: float, dofs: DofMap,
                 stability: StabilityLookup | None = None):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        curve = state_m.curve
        curve.validate()
        if dofs.J != curve.J or dofs.topology != curve.topology:
            raise CurveError("dof map does not match the curve")
        self.model = model
        self.params = params
        self.dt = dt
        self.dofs = dofs
        self.J = curve.J
        self.h = 1.0 / self.J
        self.P = curve.nodes.copy()
        self.a = self.P[:, 0]
        self.dP = np.diff(self.P, axis=0)
        tau, normal, lengths = segment_frames(curve)
        self.q = lengths
        self.tau_m = tau
        self.n_m = normal
        self.rbar = 0.5 * (self.a[:-1] + self.a[1:])
        self.theta_m = np.arctan2(tau[:, 1], tau[:, 0])
        if stability is None:
            stability = StabilityLookup(model)
        Sval = stability(self.theta_m)
        self.B = surface_energy_matrix(model, self.theta_m, Sval)
        w = np.zeros(self.J + 1)
        w[:-1] += 0.5 * lengths
        w[1:] += 0.5 * lengths
        self.w = w
        self.kap_m = state_m.kappa.copy()
        self.nu_m = state_m.mu_S.copy()

    # -- helpers -------------------------------------------------------

    def _new_geometry(self, Y: np.ndarray):
        dY = np.diff(Y, axis=0)
        qn = np.linalg.norm(dY, axis=1)
        if np.any(qn <= 0.0):
            raise CurveError("guess produced a zero-length segment")
        theta_new = np.arctan2(dY[:, 1], dY[:, 0])
        return dY, qn, theta_new

    def _fhalf(self, Y: np.ndarray):
        b = Y[:, 0]
        k0 = -1.0 / (6.0 * self.h)
        dY = np.diff(Y, axis=0)
        cL2 = 2.0 * b[:-1] + self.a[:-1]
        cR2 = 2.0 * b[1:] + self.a[1:]
        fL = k0 * perp((2.0 * self.a[:-1] + b[:-1])[:, None] * self.dP + cL2[:, None] * dY)
        fR = k0 * perp((2.0 * self.a[1:] + b[1:])[:, None] * self.dP + cR2[:, None] * dY)
        return fL, fR, cL2, cR2, k0

    # -- residual ------------------------------------------------------

    def residual(self, Y: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
        J, h, dt = self.J, self.h, self.dt
        eps2 = self.params.eps ** 2
        sigma, eta = self.params.sigma, self.params.eta
        iR, iZ, iMU, iNU = _slots(J)
        R = np.zeros(4 * (J + 1))

        a, b = self.a, Y[:, 0]
        D = Y - self.P
        dY, qn, theta_new = self._new_geometry(Y)
        dD = dY - self.dP
        fL, fR, _, _, _ = self._fhalf(Y)
        fm = 0.5 * (fL + fR)
        D0, D1 = D[:-1], D[1:]
        Dm = 0.5 * (D0 + D1)
        q, rbar, n_m = self.q, self.rbar, self.n_m
        w = self.w

        # equation for the chemical potential (rows iMU)
        SL = np.einsum("jk,jk->j", D0, fL)
        SR = np.einsum("jk,jk->j", D1, fR)
        Sm = np.einsum("jk,jk->j", Dm, fm)
        coef = h / (6.0 * dt)
        np.add.at(R, iMU[:-1], coef * (SL + 2.0 * Sm))
        np.add.at(R, iMU[1:], coef * (SR + 2.0 * Sm))
        dmu = np.diff(mu)
        stiff = rbar * dmu / q
        np.add.at(R, iMU[:-1], -stiff)
        np.add.at(R, iMU[1:], stiff)

        # momentum equation (rows iR, iZ)
        mu0, mu1 = mu[:-1], mu[1:]
        mum = 0.5 * (mu0 + mu1)
        VA_L = (h / 6.0) * (mu0[:, None] * fL + 2.0 * mum[:, None] * fm)
        VA_R = (h / 6.0) * (mu1[:, None] * fR + 2.0 * mum[:, None] * fm)
        vB = (rbar / q)[:, None] * np.einsum("jkl,jl->jk", self.B, dY)
        dnu = np.diff(nu)
        vC1 = eps2 * (rbar * dnu / q)[:, None] * n_m
        gn = b * nu ** 2
        gs = gn[:-1] + gn[1:]
        vC2 = (eps2 / 4.0) * (gs / q)[:, None] * dY
        nub = 0.5 * (nu[:-1] + nu[1:])
        vC3 = eps2 * (n_m[:, 0] * nub / q)[:, None] * self.dP
        g_new, _, _ = eval_gamma(self.model, theta_new)
        dDval = 0.5 * g_new * qn

        left_vec = VA_L + vB - vC1 - vC2 - vC3
        right_vec = VA_R - vB + vC1 + vC2 + vC3
        np.add.at(R, iR[:-1], left_vec[:, 0] - dDval)
        np.add.at(R, iZ[:-1], left_vec[:, 1])
        np.add.at(R, iR[1:], right_vec[:, 0] - dDval)
        np.add.at(R, iZ[1:], right_vec[:, 1])
        R[iR] += (0.5 * eps2 * nu ** 2 - eps2 * nu * self.kap_m) * w
        R[iR[0]] -= (b[0] ** 2 - a[0] ** 2) / (2.0 * eta * dt) + 0.5 * sigma * (b[0] + a[0])
        R[iR[-1]] -= (b[-1] ** 2 - a[-1] ** 2) / (2.0 * eta * dt) - 0.5 * sigma * (b[-1] + a[-1])

        # mean-curvature transport equation (rows iNU)
        R[iNU] += (w / dt) * ((b - a) * nu + a * (nu - self.nu_m) - (b - a) * self.kap_m)
        s3 = rbar * np.einsum("jk,jk->j", n_m, dD) / (q * dt)
        np.add.at(R, iNU[:-1], -s3)
        np.add.at(R, iNU[1:], s3)
        c4 = np.einsum("jk,jk->j", dY, dD) / (q * dt)
        np.add.at(R, iNU[:-1], 0.5 * b[:-1] * nu[:-1] * c4)
        np.add.at(R, iNU[1:], 0.5 * b[1:] * nu[1:] * c4)
        s5 = n_m[:, 0] * np.einsum("jk,jk->j", self.dP, dD) / (2.0 * q * dt)
        np.add.at(R, iNU[:-1], s5)
        np.add.at(R, iNU[1:], s5)

        return R[self.dofs.mask]

    # -- jacobian ------------------------------------------------------

    def jacobian(self, Y: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> sp.csr_matrix:
        J, h, dt = self.J, self.h, self.dt
        eps2 = self.params.eps ** 2
        sigma, eta = self.params.sigma, self.params.eta
        iR, iZ, iMU, iNU = _slots(J)
        nl = np.arange(J)
        nr = nl + 1

        a, b = self.a, Y[:, 0]
        D = Y - self.P
        dY, qn, theta_new = self._new_geometry(Y)
        dD = dY - self.dP
        fL, fR, cL2, cR2, k0 = self._fhalf(Y)
        fm = 0.5 * (fL + fR)
        D0, D1 = D[:-1], D[1:]
        Dm = 0.5 * (D0 + D1)
        q, rbar, n_m = self.q, self.rbar, self.n_m
        w = self.w

        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []

        def add(r, c, v):
            rows.append(np.ravel(r))
            cols.append(np.ravel(c))
            vals.append(np.ravel(v))

        # Per-segment curve columns: (r_l, z_l, r_r, z_r).
        ycols = np.stack([iR[nl], iZ[nl], iR[nr], iZ[nr]], axis=1)  # (J, 4)

        # derivatives of the f^{m+1/2} endpoint values wrt the 4 columns
        pv = perp(self.dP + 2.0 * dY)                               # (J, 2)
        basis = np.zeros((4, 2))
        basis[np.arange(4), _COL_COMP] = _COL_SIGN                  # d(dY)/d col
        pbasis = perp(basis)                                        # (4, 2)
        dfL = k0 * cL2[:, None, None] * pbasis[None, :, :]          # (J, 4, 2)
        dfR = k0 * cR2[:, None, None] * pbasis[None, :, :]
        dfL[:, 0, :] += k0 * pv
        dfR[:, 2, :] += k0 * pv
        dfm = 0.5 * (dfL + dfR)

        dD0 = np.zeros((4, 2))
        dD0[0, 0] = dD0[1, 1] = 1.0
        dD1 = np.zeros((4, 2))
        dD1[2, 0] = dD1[3, 1] = 1.0
        dDm = 0.5 * (dD0 + dD1)

        gSL = dD0[None] @ fL[:, :, None] + dfL @ D0[:, :, None]     # (J, 4, 1)
        gSR = dD1[None] @ fR[:, :, None] + dfR @ D1[:, :, None]
        gSm = dDm[None] @ fm[:, :, None] + dfm @ Dm[:, :, None]
        gSL, gSR, gSm = gSL[..., 0], gSR[..., 0], gSm[..., 0]       # (J, 4)

        coef = h / (6.0 * dt)
        add(np.repeat(iMU[nl], 4), ycols, coef * (gSL + 2.0 * gSm))
        add(np.repeat(iMU[nr], 4), ycols, coef * (gSR + 2.0 * gSm))

        stiff = rbar / q
        add(iMU[nl], iMU[nl], stiff)
        add(iMU[nl], iMU[nr], -stiff)
        add(iMU[nr], iMU[nl], -stiff)
        add(iMU[nr], iMU[nr], stiff)

        # momentum rows: curve columns
        mu0, mu1 = mu[:-1], mu[1:]
        mum = 0.5 * (mu0 + mu1)
        dA_L = (h / 6.0) * (mu0[:, None, None] * dfL + 2.0 * mum[:, None, None] * dfm)
        dA_R = (h / 6.0) * (mu1[:, None, None] * dfR + 2.0 * mum[:, None, None] * dfm)

        # stabilized-matrix term: rows view of (rbar/q) B d(dY)
        dB = (rbar / q)[:, None, None] * np.einsum("jkl,cl->jck", self.B, basis)  # (J, 4, 2)

        dC1 = np.zeros_like(dB)  # no curve dependence

        gnu0, gnu1 = nu[:-1] ** 2, nu[1:] ** 2
        gs = b[:-1] * gnu0 + b[1:] * gnu1
        dC2 = (eps2 / 4.0) * (gs / q)[:, None, None] * basis[None]
        dC2[:, 0, :] += (eps2 / 4.0) * (gnu0 / q)[:, None] * dY
        dC2[:, 2, :] += (eps2 / 4.0) * (gnu1 / q)[:, None] * dY

        dC3 = np.zeros_like(dB)

        g_new, gp_new, _ = eval_gamma(self.model, theta_new)
        tau_new = dY / qn[:, None]
        n_new = -perp(tau_new)
        gvec = gp_new[:, None] * n_new + g_new[:, None] * tau_new   # d(gamma qn)/d(dY)
        dDterm = 0.5 * np.einsum("jk,ck->jc", gvec, basis)          # (J, 4)

        left_blk = dA_L + dB - dC1 - dC2 - dC3                      # (J, 4, 2)
        right_blk = dA_R - dB + dC1 + dC2 + dC3
        add(np.repeat(iR[nl], 4), ycols, left_blk[:, :, 0] - dDterm)
        add(np.repeat(iZ[nl], 4), ycols, left_blk[:, :, 1])
        add(np.repeat(iR[nr], 4), ycols, right_blk[:, :, 0] - dDterm)
        add(np.repeat(iZ[nr], 4), ycols, right_blk[:, :, 1])

        # momentum rows: mu columns
        mA_Ll = (h / 6.0) * (fL + fm)   # d(left row)/d mu_left
        mA_Lr = (h / 6.0) * fm
        mA_Rl = (h / 6.0) * fm
        mA_Rr = (h / 6.0) * (fR + fm)
        for comp, slot in ((0, iR), (1, iZ)):
            add(slot[nl], iMU[nl], mA_Ll[:, comp])
            add(slot[nl], iMU[nr], mA_Lr[:, comp])
            add(slot[nr], iMU[nl], mA_Rl[:, comp])
            add(slot[nr], iMU[nr], mA_Rr[:, comp])

        # momentum rows: mu_S columns (C1, C2, C3 terms)
        c1vec = eps2 * (rbar / q)[:, None] * n_m                     # (J, 2)
        c2l = (eps2 / 4.0) * (2.0 * b[:-1] * nu[:-1] / q)[:, None] * dY
        c2r = (eps2 / 4.0) * (2.0 * b[1:] * nu[1:] / q)[:, None] * dY
        c3half = eps2 * (n_m[:, 0] / (2.0 * q))[:, None] * self.dP
        for comp, slot in ((0, iR), (1, iZ)):
            add(slot[nl], iNU[nl], c1vec[:, comp] - c2l[:, comp] - c3half[:, comp])
            add(slot[nl], iNU[nr], -c1vec[:, comp] - c2r[:, comp] - c3half[:, comp])
            add(slot[nr], iNU[nl], -c1vec[:, comp] + c2l[:, comp] + c3half[:, comp])
            add(slot[nr], iNU[nr], c1vec[:, comp] + c2r[:, comp] + c3half[:, comp])

        # lumped momentum terms and the contact line
        add(iR, iNU, eps2 * (nu - self.kap_m) * w)
        add(iR[0], iR[0], -b[0] / (eta * dt) - 0.5 * sigma)
        add(iR[-1], iR[-1], -b[-1] / (eta * dt) + 0.5 * sigma)

        # transport rows: lumped nodal parts
        add(iNU, iR, (w / dt) * (nu - self.kap_m))
        add(iNU, iNU, (w / dt) * b)

        # transport rows: gradient part against the curve columns
        ds3 = (rbar / (q * dt))[:, None] * np.einsum("jk,ck->jc", n_m, basis)
        add(np.repeat(iNU[nl], 4), ycols, -ds3)
        add(np.repeat(iNU[nr], 4), ycols, ds3)

        # transport rows: quadratic stretching term
        c4 = np.einsum("jk,jk->j", dY, dD) / (q * dt)
        dc4 = np.einsum("jk,ck->jc", dD + dY, basis) / (q * dt)[:, None]
        add(iNU[nl], iR[nl], 0.5 * nu[:-1] * c4)
        add(iNU[nr], iR[nr], 0.5 * nu[1:] * c4)
        add(iNU[nl], iNU[nl], 0.5 * b[:-1] * c4)
        add(iNU[nr], iNU[nr], 0.5 * b[1:] * c4)
        add(np.repeat(iNU[nl], 4), ycols, 0.5 * (b[:-1] * nu[:-1])[:, None] * dc4)
        add(np.repeat(iNU[nr], 4), ycols, 0.5 * (b[1:] * nu[1:])[:, None] * dc4)

        # transport rows: axial stretching term
        ds5 = (n_m[:, 0] / (2.0 * q * dt))[:, None] * np.einsum("jk,ck->jc", self.dP, basis)
        add(np.repeat(iNU[nl], 4), ycols, ds5)
        add(np.repeat(iNU[nr], 4), ycols, ds5)

        n = 4 * (J + 1)
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()
        free = self.dofs.free
        return A[np.ix_(free, free)].tocsr()
