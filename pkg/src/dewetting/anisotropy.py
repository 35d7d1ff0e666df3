"""Orientation-dependent surface energy and its stabilized matrix form.

The surface energy density gamma(theta) is defined on tangent angles
theta in [-pi, pi]. The matrix

    B_q(theta) = A(theta) M(theta)^{1-q} + S(theta) (I/2 - M(theta)/2),

with A = [[gamma, -gamma'], [gamma', gamma]] and the reflection matrix
M(theta) = [[cos 2theta, sin 2theta], [sin 2theta, -cos 2theta]], drives
the anisotropic curvature terms of the evolution scheme.  The scalar
stabilization S(theta) is chosen large enough that the one-sided bound

    (B_q(theta) w) . (w - v) / |v|  >=  |w| gamma(theta_hat) - |v| gamma(theta)

holds for all nonzero v, w, where theta and theta_hat are the tangent
angles atan2(v2, v1) and atan2(w2, w1).  That bound, applied segment-wise
with v and w the old and new edge vectors, is what makes the implicit
time step dissipate the discrete energy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "ConfigurationError",
    "StabilityCase",
    "StabilityPolicy",
    "AnisotropyModel",
    "eval_gamma",
    "surface_energy_matrix",
    "minimal_stability",
    "stability_table",
    "StabilityLookup",
    "verify_stability_inequality",
    "InequalityReport",
]


class ConfigurationError(ValueError):
    """Raised for invalid anisotropy or stabilization configuration."""


class StabilityCase(enum.Enum):
    I = "I"
    II = "II"
    III = "III"  # opt-in only; the defining formulas look inconsistent


class StabilityMode(enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    AUTO_MINIMAL = "auto_minimal"


@dataclass(frozen=True)
class StabilityPolicy:
    mode: StabilityMode = StabilityMode.AUTO_MINIMAL
    value: float = 0.0
    case: StabilityCase = StabilityCase.II
    grid_size: int = 512

    def __post_init__(self) -> None:
        if self.mode is StabilityMode.CONSTANT and self.value < 0.0:
            raise ConfigurationError("constant stabilization must be >= 0")
        if self.mode is StabilityMode.AUTO_MINIMAL and self.grid_size < 256:
            raise ConfigurationError("stabilization search grid must have >= 256 points")

    @staticmethod
    def zero() -> "StabilityPolicy":
        return StabilityPolicy(mode=StabilityMode.ZERO)

    @staticmethod
    def constant(value: float) -> "StabilityPolicy":
        return StabilityPolicy(mode=StabilityMode.CONSTANT, value=value)

    @staticmethod
    def auto(case: StabilityCase = StabilityCase.II, grid_size: int = 512) -> "StabilityPolicy":
        return StabilityPolicy(mode=StabilityMode.AUTO_MINIMAL, case=case, grid_size=grid_size)


@dataclass(frozen=True)
class AnisotropyModel:
    """Surface energy density with q-form selection and stabilization policy.

    kind: "fourfold" (gamma = 1 + beta cos 4theta), "isotropic", or "custom"
    (tabulated gamma with periodic cubic interpolation; needs >= 8 samples
    so the second derivative is meaningful).
    """

    kind: str = "fourfold"
    beta: float = 0.0
    q: int = 1
    stability: StabilityPolicy = field(default_factory=StabilityPolicy)
    table_theta: Optional[tuple] = None
    table_gamma: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.kind not in ("fourfold", "isotropic", "custom"):
            raise ConfigurationError(f"unknown anisotropy kind {self.kind!r}")
        if self.q not in (0, 1):
            raise ConfigurationError("q must be 0 or 1")
        if self.kind == "fourfold" and not 0.0 <= self.beta < 1.0:
            raise ConfigurationError("fourfold strength must satisfy 0 <= beta < 1")
        if self.kind == "custom":
            if self.table_theta is None or self.table_gamma is None:
                raise ConfigurationError("custom anisotropy needs theta and gamma tables")
            if len(self.table_theta) < 8:
                raise ConfigurationError(
                    "custom gamma table too coarse to differentiate twice (need >= 8 samples)"
                )
            th = np.asarray(self.table_theta, dtype=float)
            ga = np.asarray(self.table_gamma, dtype=float)
            if th.shape != ga.shape or th.ndim != 1:
                raise ConfigurationError("custom gamma table shapes do not match")
            if np.any(ga <= 0.0):
                raise ConfigurationError("gamma must be positive everywhere")
            spline = _periodic_spline(th, ga)
            object.__setattr__(self, "_spline", spline)

    def _gamma_spline(self) -> CubicSpline:
        return getattr(self, "_spline")


def _periodic_spline(theta: np.ndarray, gamma: np.ndarray) -> CubicSpline:
    order = np.argsort(theta)
    th = theta[order]
    ga = gamma[order]
    if not math.isclose(ga[0], ga[-1], rel_tol=0.0, abs_tol=1e-12):
        th = np.append(th, th[0] + 2.0 * math.pi)
        ga = np.append(ga, ga[0])
    return CubicSpline(th, ga, bc_type="periodic")


def eval_gamma(model: AnisotropyModel, theta):
    """Return (gamma, gamma', gamma'') at theta (scalar or array)."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ConfigurationError("theta must be finite")
    if model.kind == "isotropic":
        one = np.ones_like(theta)
        zero = np.zeros_like(theta)
        return one, zero, zero
    if model.kind == "fourfold":
        b = model.beta
        g = 1.0 + b * np.cos(4.0 * theta)
        gp = -4.0 * b * np.sin(4.0 * theta)
        gpp = -16.0 * b * np.cos(4.0 * theta)
        return g, gp, gpp
    sp = model._gamma_spline()
    t0 = float(sp.x[0])
    tw = np.mod(theta - t0, 2.0 * math.pi) + t0
    return sp(tw), sp(tw, 1), sp(tw, 2)


def _reflection(theta: np.ndarray) -> np.ndarray:
    c2 = np.cos(2.0 * theta)
    s2 = np.sin(2.0 * theta)
    M = np.empty(theta.shape + (2, 2))
    M[..., 0, 0] = c2
    M[..., 0, 1] = s2
    M[..., 1, 0] = s2
    M[..., 1, 1] = -c2
    return M


def surface_energy_matrix(model: AnisotropyModel, theta, S):
    """Evaluate B_q(theta) with stabilization value(s) S; S must be >= 0.

    theta may be a scalar or array; the result has shape theta.shape + (2, 2).
    """
    theta = np.asarray(theta, dtype=float)
    S = np.broadcast_to(np.asarray(S, dtype=float), theta.shape)
    if np.any(S < 0.0):
        raise ConfigurationError("stabilization value must be >= 0")
    g, gp, _ = eval_gamma(model, theta)
    A = np.empty(theta.shape + (2, 2))
    A[..., 0, 0] = g
    A[..., 0, 1] = -gp
    A[..., 1, 0] = gp
    A[..., 1, 1] = g
    M = _reflection(theta)
    if model.q == 0:
        B = A @ M
    else:
        B = A
    eye = np.zeros_like(M)
    eye[..., 0, 0] = 1.0
    eye[..., 1, 1] = 1.0
    return B + S[..., None, None] * 0.5 * (eye - M)


def _case_condition(model: AnisotropyModel, theta: float, case: StabilityCase,
                    theta_hat: np.ndarray) -> Callable[[float], bool]:
    """Build the predicate 'S satisfies the case's defining bound on the grid'."""
    g, gp, _ = eval_gamma(model, theta)
    g = float(g)
    gp = float(gp)
    gh, _, _ = eval_gamma(model, theta_hat)
    if case is StabilityCase.I:
        if model.q != 0:
            raise ConfigurationError("case I stabilization applies to q = 0 only")
        u = np.stack([np.cos(theta_hat), np.sin(theta_hat)], axis=-1)

        def holds(S: float) -> bool:
            B = surface_energy_matrix(model, theta, S)
            quad = np.einsum("ij,nj,ni->n", B, u, u)
            return bool(np.all(g * quad >= gh ** 2 - 1e-15))

        return holds
    sd = np.sin(theta - theta_hat)
    cd = np.cos(theta - theta_hat)
    if case is StabilityCase.II:
        if model.q != 1:
            raise ConfigurationError("case II stabilization applies to q = 1 only")
        # Q is gamma(theta_hat) + B_1(theta) u_hat . u(theta), whose expansion
        # around theta_hat = theta carries no linear term; the opposite sign
        # on the gamma' part makes the minimal S diverge under grid
        # refinement, so it cannot be the intended bound.
        Q = gh + g * cd + gp * sd

        def holds(S: float) -> bool:
            P = 2.0 * np.sqrt((g + S * sd ** 2) * g)
            return bool(np.all(P - Q >= -1e-15))

        return holds
    if case is StabilityCase.III:
        if model.q != 0:
            raise ConfigurationError("case III stabilization applies to q = 0 only")
        # Transcribed as stated; the missing gamma factor on the first f term
        # and the leading -gamma inside P look inconsistent, so this case is
        # opt-in only and never selected automatically.
        f = 2.0 * cd - gp * sd
        Q = gh + g * cd - gp * sd

        def holds(S: float) -> bool:
            rad = (-g + S * sd ** 2 + f) * g
            if np.any(rad < 0.0):
                return False
            P = 2.0 * np.sqrt(rad)
            return bool(np.all(P - Q >= -1e-15))

        return holds
    raise ConfigurationError(f"unknown stability case {case}")


def _check_preconditions(model: AnisotropyModel, case: StabilityCase, grid: int) -> None:
    th = np.linspace(-math.pi, math.pi, grid, endpoint=False)
    g, _, _ = eval_gamma(model, th)
    gpi, _, _ = eval_gamma(model, th + math.pi)
    if case is StabilityCase.I:
        bad = np.abs(g - gpi) > 1e-12 * np.maximum(1.0, np.abs(g))
        if np.any(bad):
            j = int(np.argmax(bad))
            raise ConfigurationError(
                f"case I requires gamma(theta) = gamma(pi + theta); violated at theta = {th[j]:.6f}"
            )
    else:
        bad = 3.0 * g < gpi - 1e-12
        if np.any(bad):
            j = int(np.argmax(bad))
            raise ConfigurationError(
                f"case {case.value} requires 3 gamma(theta) >= gamma(pi + theta); "
                f"violated at theta = {th[j]:.6f}"
            )


def minimal_stability(model: AnisotropyModel, theta: float,
                      case: StabilityCase = StabilityCase.II,
                      grid: int = 512) -> float:
    """Smallest S(theta) for which the case's defining bound holds.

    The bound is enforced on a uniform theta_hat grid over [-pi, pi]; the
    result carries a safety margin of one bisection width, so any S at or
    above it also passes verify_stability_inequality on the same grid.
    """
    if grid < 256:
        raise ConfigurationError("grid must have >= 256 points")
    _check_preconditions(model, case, grid)
    theta_hat = np.linspace(-math.pi, math.pi, grid)
    holds = _case_condition(model, float(theta), case, theta_hat)
    if holds(0.0):
        return 0.0
    hi = 1.0
    while not holds(hi):
        hi *= 2.0
        if hi > 1e8:
            raise ConfigurationError("stabilization search failed to bracket")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    # Return the upper bracket plus one bisection width as safety margin.
    return hi + (hi - lo)


def stability_table(model: AnisotropyModel, case: StabilityCase = StabilityCase.II,
                    n_theta: int = 512, grid: int = 512):
    """Tabulate minimal_stability on a uniform theta grid (inclusive of pi)."""
    thetas = np.linspace(-math.pi, math.pi, n_theta + 1)
    values = np.array([minimal_stability(model, t, case, grid) for t in thetas])
    return thetas, values


class StabilityLookup:
    """Evaluates the stabilization S(theta) for a model's policy.

    AutoMinimal caches a table and returns, for any query angle, the max of
    the two bracketing table values; monotonicity of the stability bound in
    S makes this upper envelope safe.
    """

    def __init__(self, model: AnisotropyModel):
        self.model = model
        self.policy = model.stability
        self._thetas = None
        self._values = None
        if self.policy.mode is StabilityMode.AUTO_MINIMAL:
            self._thetas, self._values = stability_table(
                model, self.policy.case, self.policy.grid_size, self.policy.grid_size
            )

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.policy.mode is StabilityMode.ZERO:
            return np.zeros_like(theta)
        if self.policy.mode is StabilityMode.CONSTANT:
            return np.full_like(theta, self.policy.value)
        th = np.mod(theta + math.pi, 2.0 * math.pi) - math.pi
        idx = np.clip(np.searchsorted(self._thetas, th) - 1, 0, len(self._thetas) - 2)
        return np.maximum(self._values[idx], self._values[idx + 1])


@dataclass
class InequalityReport:
    samples: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_stability_inequality(model: AnisotropyModel, case: StabilityCase,
                                samples: int, seed: int = 0,
                                stability: Optional[StabilityLookup] = None) -> InequalityReport:
    """Monte-Carlo check of the stabilized one-sided bound.

    Draws random nonzero pairs (v, w), extracts tangent angles
    theta = atan2(v2, v1) and theta_hat = atan2(w2, w1), and records every
    pair where (B_q(theta) w).(w - v)/|v| falls short of
    |w| gamma(theta_hat) - |v| gamma(theta) by more than 1e-12 (|w| + |v|).
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    if stability is None:
        stability = StabilityLookup(model)
    rng = np.random.default_rng(seed)
    ang = rng.uniform(-math.pi, math.pi, size=(samples, 2))
    mag = np.exp(rng.uniform(-2.0, 2.0, size=(samples, 2)))
    v = mag[:, :1] * np.stack([np.cos(ang[:, 0]), np.sin(ang[:, 0])], axis=-1)
    w = mag[:, 1:] * np.stack([np.cos(ang[:, 1]), np.sin(ang[:, 1])], axis=-1)
    theta = np.arctan2(v[:, 1], v[:, 0])
    theta_hat = np.arctan2(w[:, 1], w[:, 0])
    S = stability(theta)
    B = surface_energy_matrix(model, theta, S)
    g, _, _ = eval_gamma(model, theta)
    gh, _, _ = eval_gamma(model, theta_hat)
    nv = np.linalg.norm(v, axis=-1)
    nw = np.linalg.norm(w, axis=-1)
    lhs = np.einsum("nij,nj,ni->n", B, w, w - v) / nv
    rhs = nw * gh - nv * g
    slack = 1e-12 * (nv + nw)
    bad = lhs < rhs - slack
    violations = [
        {
            "v": v[i].tolist(),
            "w": w[i].tolist(),
            "lhs": float(lhs[i]),
            "rhs": float(rhs[i]),
            "S": float(S[i]),
        }
        for i in np.nonzero(bad)[0]
    ]
    return InequalityReport(samples=samples, violations=violations)
