"""Metrics: region construction, manifold distance, interpolation, studies."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dewetting.anisotropy import AnisotropyModel
from dewetting.curve import GeneratingCurve, Topology
from dewetting.diagnostics import (ClosedRegion, ConvergenceTable, RegionError,
                                   manifold_distance, mesh_quality_study,
                                   time_interpolant)
from dewetting.evolve import seed_state

from test_curve import half_torus, hemisphere


def region_of(fn, J, topology):
    from test_curve import sampled_curve
    return ClosedRegion.from_curve(sampled_curve(fn, J, topology))


def test_half_torus_region_area():
    # half-disc of radius 1: area pi/2
    curve = half_torus(10.0, 1.0, 2048)
    region = ClosedRegion.from_curve(curve)
    assert region.area == pytest.approx(math.pi / 2.0, rel=1e-5)


def test_island_region_closes_through_origin():
    curve = hemisphere(2048)
    region = ClosedRegion.from_curve(curve)
    # quarter disc: area pi/4
    assert region.area == pytest.approx(math.pi / 4.0, rel=1e-5)


def test_region_rejects_self_intersection():
    nodes = np.array([[1.0, 0.0], [3.0, 1.0], [1.5, -0.5], [2.0, 1.5], [4.0, 0.0]])
    with pytest.raises(RegionError):
        ClosedRegion(nodes)


def test_manifold_distance_identity_and_disjoint():
    r1 = region_of(lambda p: (10 + math.cos(math.pi * p), math.sin(math.pi * p)),
                   256, Topology.TWO_CONTACT_LINES)
    assert manifold_distance(r1, r1) == pytest.approx(0.0, abs=1e-12)
    r2 = region_of(lambda p: (20 + math.cos(math.pi * p), math.sin(math.pi * p)),
                   256, Topology.TWO_CONTACT_LINES)
    # disjoint regions: distance is the sum of areas
    assert manifold_distance(r1, r2) == pytest.approx(r1.area + r2.area, rel=1e-12)


def test_manifold_distance_known_shift():
    # shifting a rectangle [0,1]x[0,1] by dx in r overlaps 1-dx
    def rect(shift):
        return ClosedRegion(np.array([[1.0 + shift, 0.0], [2.0 + shift, 0.0],
                                      [2.0 + shift, 1.0], [1.0 + shift, 1.0]]))
    d = manifold_distance(rect(0.0), rect(0.25))
    assert d == pytest.approx(2.0 * 0.25, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.0, max_value=2.0), st.floats(min_value=0.0, max_value=2.0))
def test_manifold_distance_triangle_inequality(s1, s2):
    def rect(shift):
        return ClosedRegion(np.array([[1.0 + shift, 0.0], [2.0 + shift, 0.0],
                                      [2.0 + shift, 1.0], [1.0 + shift, 1.0]]))
    a, b, c = rect(0.0), rect(s1), rect(s2)
    assert manifold_distance(a, c) <= manifold_distance(a, b) + manifold_distance(b, c) + 1e-12


def test_time_interpolant_endpoints_and_midpoint():
    c0 = half_torus(10.0, 1.0, 16)
    c1 = GeneratingCurve(c0.nodes + np.array([0.5, 0.0]), Topology.TWO_CONTACT_LINES)
    times = [0.0, 1.0]
    states = [seed_state(c0), seed_state(c1, t=1.0)]
    mid = time_interpolant(times, states, 0.5)
    assert np.allclose(mid.nodes, 0.5 * (c0.nodes + c1.nodes))
    assert np.allclose(time_interpolant(times, states, 0.0).nodes, c0.nodes)
    assert np.allclose(time_interpolant(times, states, 1.0).nodes, c1.nodes)
    with pytest.raises(ValueError):
        time_interpolant(times, states, 2.0)


def test_mesh_quality_study_prefers_regularization():
    # strongly anisotropic short run: the regularized run must not lose to
    # the unregularized one on the comparative report
    initial = half_torus(10.0, 1.0, 65)
    model = AnisotropyModel(beta=0.35)
    report = mesh_quality_study(initial, model, sigma=-0.6, eta=100.0,
                                eps_values=(0.0, 0.01), dt=5.0 / 128.0, t_end=0.5)
    assert 0.01 in report.peak
    assert math.isfinite(report.peak[0.01])
    assert report.regularization_helps(0.01)
