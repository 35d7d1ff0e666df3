"""Newton solution of the implicit step, the time loop, and topology events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .anisotropy import AnisotropyModel, StabilityLookup
from .curve import (CurveError, GeneratingCurve, Topology, discrete_energy,
                    discrete_volume, initial_mu_S, mesh_ratio, recover_kappa)
from .forms import DofMap, PhysicsParams, SchemeState, StepSystem

__all__ = [
    "NewtonConfig",
    "EventConfig",
    "EventRecord",
    "StepFailure",
    "newton_step",
    "seed_state",
    "detect_events",
    "split_at_pinch",
    "Branch",
    "RunResult",
    "evolve",
]


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-8
    max_iters: int = 50
    damping: float = 0.5
    max_backtracks: int = 20

    def __post_init__(self) -> None:
        if self.tol <= 0.0 or self.max_iters < 1:
            raise ValueError("invalid Newton configuration")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping factor must lie in (0, 1]")


@dataclass(frozen=True)
class EventConfig:
    """Thresholds are relative to the initial geometry: z_pinch_rel times the
    initial max height, r_close_rel times the initial outer contact radius."""
    z_pinch_rel: float = 1e-3
    r_close_rel: float = 1e-3
    v_eq: float = 1e-6
    split: bool = True


@dataclass
class EventRecord:
    kind: str                      # "pinch_off" | "hole_closed" | "equilibrium"
    time: float
    node: Optional[int] = None
    payload: dict = field(default_factory=dict)


class StepFailure(RuntimeError):
    def __init__(self, message: str, best: Optional[SchemeState] = None,
                 stats: Optional[dict] = None):
        super().__init__(message)
        self.best = best
        self.stats = stats or {}


def _pack(state: SchemeState) -> np.ndarray:
    n = state.curve.J + 1
    u = np.empty(4 * n)
    u[0::4] = state.curve.nodes[:, 0]
    u[1::4] = state.curve.nodes[:, 1]
    u[2::4] = state.mu
    u[3::4] = state.mu_S
    return u


def _unpack(u: np.ndarray):
    Y = np.stack([u[0::4], u[1::4]], axis=1)
    return Y, u[2::4], u[3::4]


def newton_step(state_m: SchemeState, dt: float, model: AnisotropyModel,
                params: PhysicsParams, cfg: NewtonConfig,
                dofs: Optional[DofMap] = None,
                stability: Optional[StabilityLookup] = None):
    """Advance one implicit step by damped Newton iteration.

    The iteration stops when the iterate differences satisfy
    ||dX||_inf + ||dmu||_inf + ||dmu_S||_inf <= tol.  Returns the new state
    (with curvature recovered from the new curve) and solver statistics.
    Raises StepFailure on non-convergence or a degenerate linear system.
    """
    if dofs is None:
        dofs = DofMap(state_m.curve.J, state_m.curve.topology)
    system = StepSystem(state_m, model, params, dt, dofs, stability)
    u = _pack(state_m)
    Y, mu, nu = _unpack(u)
    F = system.residual(Y, mu, nu)
    norm = float(np.linalg.norm(F))
    stats = {"iterations": 0, "residual_norm": norm, "diff": math.inf}
    axis_crossing = False
    substrate_crossing = False
    for it in range(1, cfg.max_iters + 1):
        Jm = system.jacobian(Y, mu, nu)
        try:
            du = spla.spsolve(Jm.tocsc(), -F)
        except RuntimeError as exc:
            raise StepFailure(f"linear solve failed: {exc}", stats=stats) from exc
        if not np.all(np.isfinite(du)):
            raise StepFailure("singular linear system in Newton step", stats=stats)
        # Track barrier crossings of the undamped direction: near a topology
        # change Newton drives a node through the axis or substrate and the
        # line search stalls, so the full step is the diagnostic signal.
        full = u.copy()
        full[dofs.free] += du
        axis_crossing = axis_crossing or bool(np.any(full[0::4] < 0.0))
        substrate_crossing = substrate_crossing or bool(np.any(full[1::4][1:-1] < 0.0))
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks + 1):
            trial = u.copy()
            trial[dofs.free] += alpha * du
            Yt, mut, nut = _unpack(trial)
            try:
                Ft = system.residual(Yt, mut, nut)
                norm_t = float(np.linalg.norm(Ft))
            except (CurveError, FloatingPointError):
                norm_t = math.inf
            if math.isfinite(norm_t) and (norm_t < norm or norm == 0.0):
                accepted = True
                break
            alpha *= cfg.damping
        if not accepted:
            # No descent direction survived damping; take the full step and
            # let the outer loop judge convergence or fail.
            alpha = 1.0
            trial = u.copy()
            trial[dofs.free] += alpha * du
            Yt, mut, nut = _unpack(trial)
            try:
                Ft = system.residual(Yt, mut, nut)
                norm_t = float(np.linalg.norm(Ft))
            except (CurveError, FloatingPointError) as exc:
                raise StepFailure(f"Newton iterate left the admissible set: {exc}",
                                  stats=stats) from exc
        step = np.zeros_like(u)
        step[dofs.free] = alpha * du
        diff = (np.max(np.abs(step[0::4])) + np.max(np.abs(step[1::4]))
                + np.max(np.abs(step[2::4])) + np.max(np.abs(step[3::4])))
        u, F, norm = trial, Ft, norm_t
        Y, mu, nu = _unpack(u)
        stats = {"iterations": it, "residual_norm": norm, "diff": diff,
                 "axis_crossing": axis_crossing,
                 "substrate_crossing": substrate_crossing}
        if diff <= cfg.tol:
            curve_new = GeneratingCurve(Y.copy(), state_m.curve.topology)
            try:
                curve_new.validate()
                kappa_new = recover_kappa(curve_new)
            except CurveError as exc:
                stats["nodes"] = Y.copy()
                raise StepFailure(f"step produced an inadmissible curve: {exc}",
                                  stats=stats) from exc
            state_new = SchemeState(curve_new, mu.copy(), nu.copy(), kappa_new,
                                    state_m.t + dt)
            return state_new, stats
    best = None
    try:
        curve_b = GeneratingCurve(Y.copy(), state_m.curve.topology)
        curve_b.validate()
        best = SchemeState(curve_b, mu.copy(), nu.copy(), recover_kappa(curve_b),
                           state_m.t + dt)
    except CurveError:
        pass
    stats["nodes"] = Y.copy()
    raise StepFailure(
        f"Newton did not converge in {cfg.max_iters} iterations "
        f"(last diff {stats['diff']:.3e})", best=best, stats=stats)


def seed_state(curve: GeneratingCurve, t: float = 0.0) -> SchemeState:
    """Initial state: curvature recovered from geometry, mean curvature from
    the nodal formula with endpoints clamped to zero (the scheme's essential
    boundary condition), and a zero chemical potential (no equation ever
    reads the old-time mu)."""
    curve.validate()
    kappa = recover_kappa(curve)
    mu_S = initial_mu_S(curve, kappa)
    mu_S[0] = 0.0
    mu_S[-1] = 0.0
    mu = np.zeros(curve.J + 1)
    return SchemeState(curve.copy(), mu, mu_S, kappa, t)


@dataclass
class EventScales:
    z_max0: float
    r_outer0: float

    @staticmethod
    def from_curve(curve: GeneratingCurve) -> "EventScales":
        return EventScales(z_max0=float(np.max(curve.z)), r_outer0=float(curve.r[-1]))


def detect_events(prev: SchemeState, new: SchemeState, dt: float,
                  cfg: EventConfig, scales: EventScales) -> list[EventRecord]:
    events: list[EventRecord] = []
    z = new.curve.z
    z_pinch = cfg.z_pinch_rel * scales.z_max0
    interior = np.nonzero(z[1:-1] < z_pinch)[0]
    if interior.size:
        node = int(interior[np.argmin(z[1:-1][interior])]) + 1
        events.append(EventRecord("pinch_off", new.t, node=node))
    if new.curve.topology is Topology.TWO_CONTACT_LINES:
        # The hole can close either by the inner contact line sliding to the
        # axis (node 0) or, for obtuse contact angles, by an overhanging
        # interior node touching the axis first.  A gap narrower than one
        # local element is below the resolution of the discrete curve (the
        # mean curvature there is already singular at the mesh scale), so
        # the local edge length acts as a floor on the closure threshold.
        k = int(np.argmin(new.curve.r))
        edges = np.linalg.norm(np.diff(new.curve.nodes, axis=0), axis=1)
        h_loc = float(np.max(edges[max(k - 1, 0): k + 1]))
        if new.curve.r[k] < max(cfg.r_close_rel * scales.r_outer0, h_loc):
            events.append(EventRecord("hole_closed", new.t, node=k))
    speed = float(np.max(np.linalg.norm(new.curve.nodes - prev.curve.nodes, axis=1))) / dt
    if speed < cfg.v_eq:
        events.append(EventRecord("equilibrium", new.t, payload={"speed": speed}))
    return events


def split_at_pinch(state: SchemeState, node: int):
    """Split the curve at an interior pinch node projected onto the substrate.

    Returns (child_axis_side, child_outer_side, projection_loss). The pinch
    node becomes the outer contact point of the first child and the inner
    contact point of the second; both children are re-seeded from their
    geometry. Children inherit the parent volume exactly up to the reported
    projection loss. Raises CurveError when a child would be too short.
    """
    J = state.curve.J
    if not 0 < node < J:
        raise CurveError("pinch node must be interior")
    if node < 4 or J - node < 4:
        raise CurveError("pinch node too close to an endpoint to split")
    vol_parent = discrete_volume(state.curve)
    nodes = state.curve.nodes.copy()
    nodes[node, 1] = 0.0
    projected = GeneratingCurve(nodes, state.curve.topology)
    loss = discrete_volume(projected) - vol_parent
    topo_a = (Topology.ISLAND if state.curve.topology is Topology.ISLAND
              else Topology.TWO_CONTACT_LINES)
    child_a = GeneratingCurve(nodes[: node + 1].copy(), topo_a)
    child_b = GeneratingCurve(nodes[node:].copy(), Topology.TWO_CONTACT_LINES)
    state_a = seed_state(child_a, t=state.t)
    state_b = seed_state(child_b, t=state.t)
    return state_a, state_b, float(loss)


@dataclass
class Branch:
    states: list
    events: list
    diagnostics: list
    parent: Optional[int] = None

    @property
    def initial(self) -> SchemeState:
        return self.states[0]

    @property
    def final(self) -> SchemeState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


@dataclass
class RunResult:
    branches: list
    model: AnisotropyModel
    params: PhysicsParams

    @property
    def events(self) -> list[EventRecord]:
        return [e for b in self.branches for e in b.events]

    def first_event(self, kind: str) -> Optional[EventRecord]:
        hits = [e for e in self.events if e.kind == kind]
        return min(hits, key=lambda e: e.time) if hits else None


def _diag_row(state: SchemeState, model: AnisotropyModel, params: PhysicsParams,
              W0: float, V0: float, iters: int, res: float, event: str) -> dict:
    W = discrete_energy(state.curve, state.mu_S, model, params.sigma, params.eps)
    V = discrete_volume(state.curve)
    return {
        "t": state.t,
        "W": W,
        "W_ratio": W / W0 if W0 != 0.0 else math.nan,
        "dV": (V - V0) / V0 if V0 != 0.0 else math.nan,
        "Rh": mesh_ratio(state.curve),
        "r_i": float(state.curve.r[0]),
        "r_o": float(state.curve.r[-1]),
        "newton_iters": iters,
        "residual_norm": res,
        "event": event,
    }


def _classify_failure(state: SchemeState, failure: Optional[StepFailure],
                      events: EventConfig, scales: EventScales) -> Optional[EventRecord]:
    """Map an unrecoverable step failure to a topology event when the failed
    iterate crossed an admissibility barrier (substrate or axis).

    Near pinch-off or hole closure the converged step leaves the admissible
    set faster than the post-step thresholds can fire, so the solver fails
    instead; the failing iterate tells which barrier was hit. Returns None
    when the failure is not barrier-driven.
    """
    if failure is None:
        return None
    nodes = failure.stats.get("nodes")
    if nodes is None and failure.best is not None:
        nodes = failure.best.curve.nodes
    if nodes is None or nodes.shape != state.curve.nodes.shape:
        nodes = state.curve.nodes
    r_f, z_f = nodes[:, 0], nodes[:, 1]
    r_close = events.r_close_rel * scales.r_outer0
    z_pinch = events.z_pinch_rel * scales.z_max0
    edges = np.linalg.norm(np.diff(state.curve.nodes, axis=0), axis=1)
    if state.curve.topology is Topology.TWO_CONTACT_LINES:
        k = int(np.argmin(state.curve.r))
        h_loc = float(np.max(edges[max(k - 1, 0): k + 1]))
        # A hard Newton stall with the narrowest gap only a few elements
        # wide marks the closure singularity (the mean curvature of the
        # shrinking neck diverges), so the gate here is looser than the
        # one-element floor used on the converged path.
        axis_hit = (np.any(r_f < 0.0) or np.min(r_f[1:-1]) < r_close
                    or state.curve.r[k] < 4.0 * h_loc)
        if axis_hit:
            return EventRecord("hole_closed", state.t, node=k,
                               payload={"from_failed_step": True})
    k = int(np.argmin(state.curve.z[1:-1])) + 1
    h_loc = float(np.max(edges[k - 1: k + 1]))
    if (np.any(z_f[1:-1] < z_pinch)
            or (failure.stats.get("substrate_crossing", False)
                and state.curve.z[k] < h_loc)):
        return EventRecord("pinch_off", state.t, node=k,
                           payload={"from_failed_step": True})
    return None


def _close_hole(branch: "Branch", state: SchemeState, evt: EventRecord) -> SchemeState:
    """Transition a two-contact-line film to an island after hole closure.

    Nodes inward of the closure node are discarded (they bound the vanishing
    hole) and the closure node is snapped onto the axis; the new island
    state is reseeded from its geometry. The enclosed volumes before and
    after are recorded in the event payload.
    """
    k = evt.node or 0
    if state.curve.J - k < 4:
        raise StepFailure(f"hole closure at node {k} leaves too short a curve",
                          best=state)
    nodes = state.curve.nodes[k:].copy()
    nodes[0, 0] = 0.0
    island = GeneratingCurve(nodes, Topology.ISLAND)
    reseeded = seed_state(island, t=state.t)
    evt.payload["volume_before"] = discrete_volume(state.curve)
    evt.payload["volume_after"] = discrete_volume(reseeded.curve)
    evt.payload["nodes_dropped"] = k
    branch.states.append(reseeded)
    return reseeded


def evolve(initial: GeneratingCurve, model: AnisotropyModel, params: PhysicsParams,
           dt: float, t_end: float, newton: NewtonConfig = NewtonConfig(),
           events: EventConfig = EventConfig(),
           max_halvings: int = 6) -> RunResult:
    """Run the solver from the initial curve until t_end or a terminal event.

    Failed steps retry with a halved time step (up to max_halvings); pinch-off
    splits the film into independently evolving children when enabled.
    """
    stability = StabilityLookup(model)
    root = initial if isinstance(initial, SchemeState) else seed_state(initial)
    scales = EventScales.from_curve(root.curve)
    result = RunResult(branches=[], model=model, params=params)
    queue: list[Branch] = [Branch(states=[root], events=[], diagnostics=[])]
    while queue:
        branch = queue.pop(0)
        result.branches.append(branch)
        state = branch.final
        W0 = discrete_energy(state.curve, state.mu_S, model, params.sigma, params.eps)
        V0 = discrete_volume(state.curve)
        branch.diagnostics.append(_diag_row(state, model, params, W0, V0, 0, 0.0, ""))
        dofs = DofMap(state.curve.J, state.curve.topology)
        dt_cur = dt
        while state.t < t_end - 1e-12:
            dt_try = min(dt_cur, t_end - state.t)
            new = None
            stats = None
            failure = None
            for _ in range(max_halvings + 1):
                try:
                    new, stats = newton_step(state, dt_try, model, params, newton,
                                             dofs, stability)
                    break
                except StepFailure as exc:
                    failure = exc
                    dt_try *= 0.5
            if new is None:
                evt = _classify_failure(state, failure, events, scales)
                if evt is None:
                    raise StepFailure(
                        f"step at t = {state.t:.6f} failed after {max_halvings} "
                        f"halvings: {failure}", best=state,
                        stats=failure.stats if failure else {})
                branch.events.append(evt)
                if evt.kind == "hole_closed":
                    state = _close_hole(branch, state, evt)
                    dofs = DofMap(state.curve.J, state.curve.topology)
                    continue
                # pinch_off detected through the failed barrier crossing
                if events.split:
                    try:
                        child_a, child_b, loss = split_at_pinch(state, evt.node)
                    except CurveError as exc:
                        evt.payload["split_refused"] = str(exc)
                        break
                    evt.payload["projection_loss"] = loss
                    me = len(result.branches) - 1
                    queue.append(Branch(states=[child_a], events=[],
                                        diagnostics=[], parent=me))
                    queue.append(Branch(states=[child_b], events=[],
                                        diagnostics=[], parent=me))
                break
            # grow the step back toward the nominal dt after a clean solve
            dt_cur = min(dt, 2.0 * dt_try) if dt_try < dt_cur else dt
            evts = detect_events(state, new, dt_try, events, scales)
            tags = ",".join(e.kind for e in evts)
            branch.diagnostics.append(
                _diag_row(new, model, params, W0, V0, stats["iterations"],
                          stats["residual_norm"], tags))
            branch.states.append(new)
            branch.events.extend(evts)
            state = new
            pinch = next((e for e in evts if e.kind == "pinch_off"), None)
            hole = next((e for e in evts if e.kind == "hole_closed"), None)
            eq = next((e for e in evts if e.kind == "equilibrium"), None)
            if pinch is not None and events.split:
                try:
                    child_a, child_b, loss = split_at_pinch(state, pinch.node)
                except CurveError as exc:
                    pinch.payload["split_refused"] = str(exc)
                else:
                    pinch.payload["projection_loss"] = loss
                    me = len(result.branches) - 1
                    queue.append(Branch(states=[child_a], events=[],
                                        diagnostics=[], parent=me))
                    queue.append(Branch(states=[child_b], events=[],
                                        diagnostics=[], parent=me))
                    break
            if pinch is not None and not events.split:
                break
            if hole is not None:
                state = _close_hole(branch, state, hole)
                dofs = DofMap(state.curve.J, state.curve.topology)
            if eq is not None:
                break
    return result
