"""Serialization: snapshot / diagnostics / table CSV files and a
surface-of-revolution OBJ exporter."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .curve import GeneratingCurve, Topology
from .forms import SchemeState

__all__ = [
    "OutputError",
    "write_snapshot",
    "read_snapshot",
    "write_diagnostics",
    "write_convergence",
    "write_mesh_study",
    "write_stability_table",
    "write_surface_obj",
    "write_config_echo",
    "write_events",
    "write_run_outputs",
]

_FMT = "%.17g"


class OutputError(IOError):
    """Raised for malformed snapshot files or unwritable targets."""


def _fmt(x: float) -> str:
    return _FMT % x


def write_snapshot(path, state: SchemeState) -> None:
    """Write a curve snapshot as CSV with full double precision."""
    curve = state.curve
    J = curve.J
    rho = 1.0 - np.arange(J + 1) / J
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rho", "r", "z", "mu", "mu_S", "kappa"])
        for j in range(J + 1):
            writer.writerow([_fmt(rho[j]), _fmt(curve.r[j]), _fmt(curve.z[j]),
                             _fmt(state.mu[j]), _fmt(state.mu_S[j]),
                             _fmt(state.kappa[j])])


def read_snapshot(path, topology: Topology, t: float = 0.0) -> SchemeState:
    """Read a snapshot CSV back into a state (inverse of write_snapshot)."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:3] != ["rho", "r", "z"]:
                raise OutputError(f"{path}: not a snapshot file")
            for row in reader:
                rows.append([float(v) for v in row])
    except (ValueError, csv.Error) as exc:
        raise OutputError(f"{path}: bad snapshot row: {exc}") from exc
    if len(rows) < 5:
        raise OutputError(f"{path}: too few nodes for a curve")
    data = np.asarray(rows)
    curve = GeneratingCurve(data[:, 1:3].copy(), topology)
    curve.validate()
    if data.shape[1] >= 6:
        mu, mu_S, kappa = data[:, 3], data[:, 4], data[:, 5]
    else:
        from .curve import initial_mu_S, recover_kappa
        kappa = recover_kappa(curve)
        mu_S = initial_mu_S(curve, kappa)
        mu_S[0] = 0.0
        mu_S[-1] = 0.0
        mu = np.zeros(curve.J + 1)
    return SchemeState(curve=curve, mu=mu.copy(), mu_S=mu_S.copy(),
                       kappa=kappa.copy(), t=t)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_diagnostics(path, run) -> None:
    """Per-step diagnostics of a run (all branches, branch id in column 1)."""
    header = ["branch", "t", "W", "W_ratio", "dV", "Rh", "r_i", "r_o",
              "newton_iters", "residual_norm", "event"]
    rows = []
    for b, branch in enumerate(run.branches):
        for row in branch.diagnostics:
            rows.append([str(b)] + [row[k] if isinstance(row[k], str)
                                    else float(row[k]) for k in header[1:]])
    _write_rows(path, header, rows)


def write_events(path, run) -> None:
    header = ["kind", "time", "node", "payload"]
    rows = [[e.kind, float(e.time), str(-1 if e.node is None else e.node),
             json.dumps(e.payload, sort_keys=True, default=float)]
            for e in run.events]
    _write_rows(path, header, rows)


def write_convergence(path, table) -> None:
    rows = [[float(r.level), float(r.J), r.dt, r.error,
             "" if math.isnan(r.order) else _fmt(r.order)]
            for r in table.rows]
    _write_rows(path, ["level", "J", "dt", "error", "order"], rows)


def write_mesh_study(path, report) -> None:
    rows = []
    for eps in sorted(report.eps_series):
        for t, rh in report.eps_series[eps]:
            rows.append([eps, t, rh])
    _write_rows(path, ["eps", "t", "Rh"], rows)


def write_stability_table(path, table) -> None:
    """Table of minimal stabilizing constants: rows (theta, S0)."""
    thetas, values = table
    _write_rows(path, ["theta", "S0"],
                [(float(th), float(s)) for th, s in zip(thetas, values)])


def write_surface_obj(path, curve: GeneratingCurve, segments: int = 64) -> None:
    """Export the surface of revolution of a generating curve as Wavefront
    OBJ. Nodes on the axis (r = 0) become a single apex vertex with a
    triangle fan; all other rings use two triangles per quad."""
    if segments < 3:
        raise OutputError("segments >= 3 required for a closed surface")
    phi = 2.0 * math.pi * np.arange(segments) / segments
    c, s = np.cos(phi), np.sin(phi)
    verts = []
    ring_start = []            # per node: index of first vertex, or apex index
    on_axis = []
    for j in range(curve.J + 1):
        r, z = float(curve.r[j]), float(curve.z[j])
        ring_start.append(len(verts))
        if r == 0.0:
            on_axis.append(True)
            verts.append((0.0, 0.0, z))
        else:
            on_axis.append(False)
            verts.extend(zip(r * c, r * s, np.full(segments, z)))
    faces = []
    for j in range(curve.J):
        a0, b0 = ring_start[j], ring_start[j + 1]
        if on_axis[j] and on_axis[j + 1]:
            raise OutputError("degenerate band: two consecutive axis nodes")
        if on_axis[j]:
            for k in range(segments):
                kn = (k + 1) % segments
                faces.append((a0, b0 + kn, b0 + k))
        elif on_axis[j + 1]:
            for k in range(segments):
                kn = (k + 1) % segments
                faces.append((a0 + k, a0 + kn, b0))
        else:
            for k in range(segments):
                kn = (k + 1) % segments
                faces.append((a0 + k, a0 + kn, b0 + k))
                faces.append((a0 + kn, b0 + kn, b0 + k))
    with open(path, "w") as fh:
        fh.write(f"# surface of revolution, {len(verts)} vertices, "
                 f"{len(faces)} faces\n")
        for x, y, z in verts:
            fh.write(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        for i, jj, k in faces:
            fh.write(f"f {i + 1} {jj + 1} {k + 1}\n")


def write_config_echo(path, cfg_dict: dict) -> None:
    with open(path, "w") as fh:
        json.dump(cfg_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run_outputs(out_dir, run, cfg_dict: dict, snapshot_every: int = 0) -> None:
    """Standard output bundle for a run: config echo, diagnostics, events,
    and final (plus optional intermediate) snapshots per branch."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(out / "config.json", cfg_dict)
    write_diagnostics(out / "diagnostics.csv", run)
    write_events(out / "events.csv", run)
    for b, branch in enumerate(run.branches):
        write_snapshot(out / f"branch{b}_final.csv", branch.final)
        if snapshot_every > 0:
            for i, state in enumerate(branch.states):
                if i % snapshot_every == 0:
                    write_snapshot(out / f"branch{b}_step{i:06d}.csv", state)
