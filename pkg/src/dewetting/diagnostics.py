"""Quantitative diagnostics: enclosed regions, manifold distance,
time interpolation, the convergence harness, and mesh-quality studies.

The error metric between two films is the manifold distance
Md = |Omega1| + |Omega2| - 2 |Omega1 n Omega2|, the area of the symmetric
difference of the regions enclosed by the generating curves and the
substrate (plus the axis for islands).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import Polygon
from shapely.validation import explain_validity

from .curve import GeneratingCurve, Topology, mesh_ratio
from .evolve import (EventConfig, NewtonConfig, RunResult, StepFailure, evolve)
from .forms import PhysicsParams
from .anisotropy import AnisotropyModel

__all__ = [
    "RegionError",
    "ClosedRegion",
    "manifold_distance",
    "time_interpolant",
    "ConvergenceRow",
    "ConvergenceTable",
    "convergence_harness",
    "MeshQualityReport",
    "mesh_quality_study",
]


class RegionError(ValueError):
    """Raised for self-intersecting or degenerate regions."""


@dataclass
class ClosedRegion:
    """Simple polygon (counterclockwise) enclosed by a generating curve,
    its substrate segment, and, for islands, the symmetry axis."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)
        poly = Polygon(self.vertices)
        if not poly.is_valid:
            raise RegionError(f"region is not a simple polygon: {explain_validity(poly)}")
        if poly.area <= 0.0:
            raise RegionError("region has non-positive area")
        self._poly = poly

    @staticmethod
    def from_curve(curve: GeneratingCurve) -> "ClosedRegion":
        # The curve runs inner to outer; reversing it and closing along the
        # substrate (through the origin for islands) gives a CCW loop.
        pts = list(curve.nodes[::-1])
        if curve.topology is Topology.ISLAND:
            if abs(pts[-1][1]) > 1e-12:  # axis node off the substrate
                pts.append(np.array([0.0, 0.0]))
        return ClosedRegion(np.array(pts))

    @property
    def area(self) -> float:
        return float(self._poly.area)

    def polygon(self) -> Polygon:
        return self._poly


def manifold_distance(region1: ClosedRegion, region2: ClosedRegion) -> float:
    """Area of the symmetric difference |O1| + |O2| - 2 |O1 n O2|."""
    inter = region1.polygon().intersection(region2.polygon()).area
    return region1.area + region2.area - 2.0 * float(inter)


def time_interpolant(times: Sequence[float], states: Sequence, t: float) -> GeneratingCurve:
    """Nodewise linear-in-time curve between stored steps.

    X(t) = ((t_{m+1} - t) X^m + (t - t_m) X^{m+1}) / (t_{m+1} - t_m).
    """
    times = np.asarray(times, dtype=float)
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"time {t} outside the trajectory span")
    idx = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    t0, t1 = times[idx], times[idx + 1]
    c0 = states[idx].curve if hasattr(states[idx], "curve") else states[idx]
    c1 = states[idx + 1].curve if hasattr(states[idx + 1], "curve") else states[idx + 1]
    lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    nodes = (1.0 - lam) * c0.nodes + lam * c1.nodes
    return GeneratingCurve(nodes, c0.topology)


@dataclass
class ConvergenceRow:
    level: int
    J: int
    dt: float
    error: float
    order: float


@dataclass
class ConvergenceTable:
    eval_time: float
    rows: list


def _sample_preset_curve(curve_fn, J: int, topology: Topology) -> GeneratingCurve:
    rho = 1.0 - np.arange(J + 1) / J
    nodes = np.array([curve_fn(p) for p in rho])
    nodes[np.abs(nodes) < 1e-15] = 0.0
    return GeneratingCurve(nodes, topology)


def convergence_harness(curve_fn, topology: Topology, model: AnisotropyModel,
                        params: PhysicsParams, base_J: int, base_dt: float,
                        levels: int, eval_times: Iterable[float] = (1.0, 2.0),
                        newton: NewtonConfig = NewtonConfig()) -> list[ConvergenceTable]:
    """Refinement study: level k runs (J 2^k, dt 4^-k); errors are manifold
    distances between consecutive levels at the evaluation times."""
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    eval_times = sorted(eval_times)
    t_end = max(eval_times)
    snapshots = []  # per level: {t: ClosedRegion}
    for k in range(levels):
        J = base_J * 2 ** k
        dt = base_dt * 4.0 ** (-k)
        initial = _sample_preset_curve(curve_fn, J, topology)
        run = evolve(initial, model, params, dt, t_end, newton=newton,
                     events=EventConfig(v_eq=0.0))
        branch = run.branches[0]
        regions = {}
        for t in eval_times:
            curve = time_interpolant(branch.times, branch.states, t)
            regions[t] = ClosedRegion.from_curve(curve)
        snapshots.append((J, dt, regions))
    tables = []
    for t in eval_times:
        rows = []
        prev_err = None
        for k in range(levels - 1):
            J, dt, regions = snapshots[k]
            err = manifold_distance(regions[t], snapshots[k + 1][2][t])
            order = math.nan if prev_err is None or err == 0.0 else math.log2(prev_err / err)
            rows.append(ConvergenceRow(level=k, J=J, dt=dt, error=err, order=order))
            prev_err = err
        tables.append(ConvergenceTable(eval_time=t, rows=rows))
    return tables


@dataclass
class MeshQualityReport:
    eps_series: dict          # eps -> list of (t, Rh)
    failures: dict            # eps -> failure message (runs that aborted)
    peak: dict                # eps -> max Rh over the run
    final: dict               # eps -> final Rh

    def regularization_helps(self, eps_reg: float) -> bool:
        """True when the regularized run beats the unregularized one: the
        eps = 0 run failed, or peaked higher, or ended with a larger ratio."""
        if 0.0 in self.failures:
            return True
        if self.peak.get(0.0, math.inf) > self.peak.get(eps_reg, math.inf):
            return True
        return self.final.get(eps_reg, math.inf) < self.final.get(0.0, -math.inf)


def mesh_quality_study(initial: GeneratingCurve, model: AnisotropyModel,
                       sigma: float, eta: float, eps_values: Sequence[float],
                       dt: float, t_end: float,
                       newton: NewtonConfig = NewtonConfig()) -> MeshQualityReport:
    """Run the same evolution for each eps and compare mesh ratios.

    An aborted run (expected for eps = 0 in strongly anisotropic regimes) is
    recorded as the outcome, not raised."""
    report = MeshQualityReport(eps_series={}, failures={}, peak={}, final={})
    for eps in eps_values:
        params = PhysicsParams(sigma=sigma, eta=eta, eps=eps)
        series = []
        try:
            run = evolve(initial.copy(), model, params, dt, t_end, newton=newton,
                         events=EventConfig(v_eq=0.0))
            for branch in run.branches:
                series.extend((row["t"], row["Rh"]) for row in branch.diagnostics)
        except StepFailure as exc:
            report.failures[eps] = str(exc)
            best = exc.best
            if best is not None:
                series.append((best.t, mesh_ratio(best.curve)))
        if series:
            report.eps_series[eps] = series
            ratios = [rh for _, rh in series]
            report.peak[eps] = max(ratios)
            report.final[eps] = ratios[-1]
    return report
