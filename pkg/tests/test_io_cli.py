"""Configuration parsing, file formats, and the command line interface."""

import json
import math
import os

import numpy as np
import pytest

from dewetting.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from dewetting.config import (ConfigError, PRESET_NAMES, build_initial_curve,
                              config_to_dict, load_config, parse_config, preset)
from dewetting.curve import GeneratingCurve, Topology
from dewetting.evolve import seed_state
from dewetting.output import (OutputError, read_snapshot, write_snapshot,
                              write_surface_obj)

from test_curve import half_torus, hemisphere


# -- configuration ---------------------------------------------------------

def test_preset_catalog_has_all_experiments():
    for name in ("ex1", "fig5_beta007", "fig6_beta035", "fig7_beta012",
                 "fig8_sigma_neg", "fig9", "fig10", "fig11"):
        assert name in PRESET_NAMES
        cfg = preset(name)
        cfg.validate()


def test_preset_expansion_from_minimal_config():
    cfg = parse_config({"preset": "fig5_beta007"})
    assert cfg.model.beta == pytest.approx(0.07)
    assert cfg.discretization.J == 128
    assert cfg.discretization.dt == pytest.approx(1.0 / 256.0)


def test_preset_override_via_sections():
    cfg = parse_config({"preset": "ex1", "discretization": {"J": 64}})
    base = preset("ex1")
    assert cfg.discretization.J == 64
    assert cfg.discretization.dt == base.discretization.dt


def test_unknown_keys_rejected_by_name():
    with pytest.raises(ConfigError) as err:
        parse_config({"preset": "ex1", "physics": {"sigma": 0.0, "bogus": 1}})
    assert "bogus" in str(err.value)
    with pytest.raises(ConfigError) as err:
        parse_config({"nonsense_section": {}})
    assert "nonsense_section" in str(err.value)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        parse_config({"preset": "not_a_preset"})


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"preset": "ex1",}')
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "line" in str(err.value)


def test_explicit_nodes_config():
    nodes = half_torus(10.0, 1.0, 8).nodes.tolist()
    cfg = parse_config({"initial": {"nodes": nodes, "topology": "two_contact_lines"}})
    curve = build_initial_curve(cfg)
    assert curve.J == 8
    curve.validate()


def test_config_roundtrip_through_dict():
    cfg = preset("fig9")
    again = parse_config(config_to_dict(cfg))
    assert again == cfg


# -- snapshots ---------------------------------------------------------------

def test_snapshot_roundtrip_byte_identical(tmp_path):
    state = seed_state(half_torus(10.0, 1.0, 32))
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_snapshot(p1, state)
    back = read_snapshot(p1, Topology.TWO_CONTACT_LINES)
    write_snapshot(p2, back)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.curve.nodes, state.curve.nodes)
    assert np.array_equal(back.mu_S, state.mu_S)


def test_snapshot_reseeds_missing_fields(tmp_path):
    state = seed_state(hemisphere(16))
    path = tmp_path / "geom.csv"
    # write a geometry-only file by hand
    lines = ["rho,r,z"]
    rho = 1.0 - np.arange(17) / 16
    for p, (r, z) in zip(rho, state.curve.nodes):
        lines.append(f"{float(p)!r},{float(r)!r},{float(z)!r}")
    path.write_text("\n".join(lines) + "\n")
    back = read_snapshot(path, Topology.ISLAND)
    assert back.mu_S[0] == 0.0 and back.mu_S[-1] == 0.0
    assert np.all(np.isfinite(back.kappa))


# -- surface export ----------------------------------------------------------

def _parse_obj(path):
    verts, faces = [], []
    for line in open(path):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:]])
        elif parts[0] == "f":
            faces.append([int(x) for x in parts[1:]])
    return np.array(verts), faces


def test_surface_obj_ring_counts(tmp_path):
    curve = half_torus(10.0, 1.0, 8)
    path = tmp_path / "s.obj"
    write_surface_obj(path, curve, segments=16)
    verts, faces = _parse_obj(path)
    assert len(verts) == 9 * 16
    assert len(faces) == 8 * 16 * 2   # two triangles per quad
    # all faces are triangles with valid indices
    for f in faces:
        assert len(f) == 3
        assert all(1 <= idx <= len(verts) for idx in f)


def test_surface_obj_island_has_apex_fan(tmp_path):
    curve = hemisphere(8)
    path = tmp_path / "s.obj"
    write_surface_obj(path, curve, segments=12)
    verts, faces = _parse_obj(path)
    # axis node collapses to a single apex vertex
    assert len(verts) == 8 * 12 + 1
    assert len(faces) == 12 + 7 * 12 * 2
    radii = np.hypot(verts[:, 0], verts[:, 1])
    assert np.isclose(radii.min(), 0.0)


def test_surface_obj_rejects_too_few_segments(tmp_path):
    with pytest.raises(OutputError):
        write_surface_obj(tmp_path / "s.obj", half_torus(10.0, 1.0, 8), segments=2)


# -- command line -------------------------------------------------------------

def test_cli_run_preset_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--preset", "ex1", "--out", str(out)])
    assert code == EXIT_OK
    for name in ("config.json", "diagnostics.csv", "events.csv", "branch0_final.csv"):
        assert (out / name).exists()
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["model"]["beta"] == pytest.approx(0.07)


def test_cli_run_deterministic(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", "--preset", "ex1", "--out", str(out1)]) == EXIT_OK
    assert main(["run", "--preset", "ex1", "--out", str(out2)]) == EXIT_OK
    for name in ("diagnostics.csv", "branch0_final.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"preset": "no_such"}))
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["run"]) == EXIT_CONFIG


def test_cli_io_error_exit_code(tmp_path):
    missing = tmp_path / "nope.csv"
    assert main(["export-surface", "--snapshot", str(missing),
                 "--out", str(tmp_path / "s.obj")]) == EXIT_IO


def test_cli_stability_table(tmp_path):
    out = tmp_path / "table.csv"
    code = main(["stability-table", "--beta", "0.07", "--case", "I",
                 "--out", str(out)])
    assert code == EXIT_OK
    header = out.read_text().splitlines()[0]
    assert "theta" in header


def test_cli_export_surface_roundtrip(tmp_path):
    snap = tmp_path / "snap.csv"
    write_snapshot(snap, seed_state(half_torus(10.0, 1.0, 8)))
    out = tmp_path / "surf.obj"
    code = main(["export-surface", "--snapshot", str(snap), "--out", str(out),
                 "--segments", "8"])
    assert code == EXIT_OK
    assert out.exists()


def test_cli_sweep_runs_variants(tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--preset", "ex1", "--out", str(out),
                 "--vary", "discretization.dt=0.0625,0.125"])
    assert code == EXIT_OK
    subdirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(subdirs) == 2
