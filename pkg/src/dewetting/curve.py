"""Generating curves and their discrete differential geometry.

A film surface is the revolution of a polyline X_j = (r_j, z_j),
j = 0..J, about the z axis. Two topologies occur: a film with an inner
hole touches the substrate at both ends (two contact lines), and a film
without a hole starts on the symmetry axis (island). The normal
convention is n = -tau^perp with perp the clockwise quarter turn
(a, b) -> (b, -a); for curves stored inner-to-outer this points out of
the film, and all curvature signs follow from it (a unit sphere has
kappa = -1 and mean curvature mu_S = -2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .anisotropy import AnisotropyModel, eval_gamma

__all__ = [
    "CurveError",
    "Topology",
    "GeneratingCurve",
    "segment_frames",
    "mass_lumped_inner",
    "discrete_volume",
    "discrete_energy",
    "recover_kappa",
    "initial_mu_S",
    "mesh_ratio",
    "perp",
]

_AXIS_TOL = 1e-12


class CurveError(ValueError):
    """Raised for degenerate or inadmissible curve data."""


class Topology(enum.Enum):
    TWO_CONTACT_LINES = "two_contact_lines"
    ISLAND = "island"


def perp(v: np.ndarray) -> np.ndarray:
    """Clockwise quarter turn: (a, b) -> (b, -a), applied along the last axis."""
    out = np.empty_like(v)
    out[..., 0] = v[..., 1]
    out[..., 1] = -v[..., 0]
    return out


@dataclass
class GeneratingCurve:
    nodes: np.ndarray  # (J+1, 2) columns (r, z)
    topology: Topology

    def __post_init__(self) -> None:
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise CurveError("nodes must be an (J+1, 2) array")

    @property
    def J(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def r(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def z(self) -> np.ndarray:
        return self.nodes[:, 1]

    def copy(self) -> "GeneratingCurve":
        return GeneratingCurve(self.nodes.copy(), self.topology)

    def validate(self) -> None:
        J = self.J
        if J < 4:
            raise CurveError("need J >= 4 segments")
        if not np.all(np.isfinite(self.nodes)):
            raise CurveError("curve contains non-finite coordinates")
        seg = np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)
        if np.any(seg <= 0.0):
            j = int(np.argmax(seg <= 0.0)) + 1
            raise CurveError(f"zero-length segment {j}")
        r, z = self.r, self.z
        if np.any(r < -_AXIS_TOL):
            raise CurveError("negative radius")
        if np.any(r[1:-1] <= 0.0):
            raise CurveError("interior node on the axis")
        if np.any(z < -1e-9):
            raise CurveError("node below the substrate")
        if abs(z[-1]) > 1e-9:
            raise CurveError("outer contact node must sit on the substrate (z_J = 0)")
        if self.topology is Topology.TWO_CONTACT_LINES:
            if abs(z[0]) > 1e-9:
                raise CurveError("inner contact node must sit on the substrate (z_0 = 0)")
            if r[0] <= 0.0:
                raise CurveError("inner contact radius must be positive")
        else:
            if abs(r[0]) > _AXIS_TOL:
                raise CurveError("island curve must start on the axis (r_0 = 0)")


def segment_frames(curve: GeneratingCurve):
    """Per-segment unit tangents, outward normals, and lengths.

    tau_j = h_j/|h_j| with h_j = X_j - X_{j-1}; n_j = -h_j^perp/|h_j|.
    """
    h = np.diff(curve.nodes, axis=0)
    lengths = np.linalg.norm(h, axis=1)
    if np.any(lengths <= 0.0):
        j = int(np.argmax(lengths <= 0.0)) + 1
        raise CurveError(f"zero-length segment {j}")
    tau = h / lengths[:, None]
    normal = -perp(tau)
    return tau, normal, lengths


def mass_lumped_inner(u, v, curve: GeneratingCurve) -> float:
    """Lumped inner product (u, v)^h = 1/2 sum_j |h_j| [(u.v)_j + (u.v)_{j-1}].

    u and v are nodal fields of shape (J+1,) or (J+1, 2).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    J = curve.J
    if u.shape[0] != J + 1 or v.shape != u.shape:
        raise CurveError("field sizes do not match the curve")
    prod = u * v if u.ndim == 1 else np.einsum("jk,jk->j", u, v)
    _, _, lengths = segment_frames(curve)
    return float(0.5 * np.sum(lengths * (prod[1:] + prod[:-1])))


def discrete_volume(curve: GeneratingCurve) -> float:
    """Volume of the solid of revolution, 2 pi int r z r_rho d rho.

    The integrand is quadratic on each segment, so the per-segment Simpson
    rule below is exact for the polyline.
    """
    r, z = curve.r, curve.z
    dr = np.diff(r)
    avg = (2.0 * r[:-1] * z[:-1] + 2.0 * r[1:] * z[1:] + r[:-1] * z[1:] + r[1:] * z[:-1]) / 6.0
    return float(2.0 * math.pi * np.sum(dr * avg))


def discrete_energy(curve: GeneratingCurve, mu_S, model: AnisotropyModel,
                    sigma: float, eps: float) -> float:
    """Total energy: anisotropic area + Willmore penalty - substrate term.

    W = 2 pi sum_j gamma(theta_j) |h_j| rbar_j
        + eps^2 pi sum_j |h_j| (r_j mu_S_j^2 + r_{j-1} mu_S_{j-1}^2)/2
        - sigma pi (r_J^2 - r_0^2)
    """
    mu_S = np.asarray(mu_S, dtype=float)
    tau, _, lengths = segment_frames(curve)
    theta = np.arctan2(tau[:, 1], tau[:, 0])
    g, _, _ = eval_gamma(model, theta)
    r = curve.r
    rbar = 0.5 * (r[:-1] + r[1:])
    area_term = 2.0 * math.pi * float(np.sum(g * lengths * rbar))
    gnod = r * mu_S ** 2
    willmore = eps ** 2 * math.pi * float(np.sum(lengths * 0.5 * (gnod[1:] + gnod[:-1])))
    substrate = sigma * math.pi * (r[-1] ** 2 - r[0] ** 2)
    return area_term + willmore - substrate


def recover_kappa(curve: GeneratingCurve) -> np.ndarray:
    """Nodal curvature from the lumped weak identity kappa n ~ -(tau)_s.

    Interior nodes solve the least-squares projection of
    kappa_k w_k = tau_k - tau_{k+1}, w_k = (|h_k| n_k + |h_{k+1}| n_{k+1})/2,
    with the sign fixed so a circle traversed inner-to-outer gets
    kappa = -1/R (matching kappa = X_ss . n). Endpoints are filled by
    quadratic extrapolation; they never enter the scheme because every
    term multiplying kappa at the ends carries a factor vanishing there.
    """
    curve.validate()
    tau, normal, lengths = segment_frames(curve)
    w = 0.5 * (lengths[:-1, None] * normal[:-1] + lengths[1:, None] * normal[1:])
    wsq = np.einsum("jk,jk->j", w, w)
    if np.any(wsq <= 0.0):
        raise CurveError("degenerate lumped normal (segments fold back)")
    dtau = tau[1:] - tau[:-1]
    kappa = np.empty(curve.J + 1)
    kappa[1:-1] = np.einsum("jk,jk->j", w, dtau) / wsq
    kappa[0] = 3.0 * kappa[1] - 3.0 * kappa[2] + kappa[3]
    kappa[-1] = 3.0 * kappa[-2] - 3.0 * kappa[-3] + kappa[-4]
    return kappa


def initial_mu_S(curve: GeneratingCurve, kappa: np.ndarray) -> np.ndarray:
    """Mean curvature field mu_S = kappa - (n.e1)/r at nodes.

    Interior nodes use the angle-bisector nodal normal; at the contact
    lines and at an island's axis node the limit (n.e1)/r -> -kappa gives
    mu_S = 2 kappa.
    """
    kappa = np.asarray(kappa, dtype=float)
    _, normal, _ = segment_frames(curve)
    nsum = normal[:-1] + normal[1:]
    norms = np.linalg.norm(nsum, axis=1)
    if np.any(norms <= 0.0):
        raise CurveError("degenerate nodal normal (segments fold back)")
    nbar = nsum / norms[:, None]
    r_int = curve.r[1:-1]
    if np.any(r_int <= 0.0):
        raise CurveError("interior node on the axis")
    mu = np.empty(curve.J + 1)
    mu[1:-1] = kappa[1:-1] - nbar[:, 0] / r_int
    mu[0] = 2.0 * kappa[0]
    mu[-1] = 2.0 * kappa[-1]
    return mu


def mesh_ratio(curve: GeneratingCurve) -> float:
    """Mesh quality indicator: max segment length over min segment length."""
    _, _, lengths = segment_frames(curve)
    return float(np.max(lengths) / np.min(lengths))
