"""Weak forms of one implicit step: dof layout, volume pairing, Jacobian."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dewetting.anisotropy import (AnisotropyModel, StabilityCase,
                                  StabilityLookup, StabilityPolicy)
from dewetting.curve import GeneratingCurve, Topology, discrete_volume
from dewetting.evolve import DofMap, seed_state
from dewetting.forms import PhysicsParams, StepSystem, f_half, volume_pairing

from test_curve import half_torus, hemisphere


def random_perturbed(base, rng, amp):
    nodes = base.nodes.copy()
    nodes[:, 0] += amp * rng.normal(size=len(nodes))
    nodes[:, 1] += amp * rng.normal(size=len(nodes))
    if base.topology is Topology.TWO_CONTACT_LINES:
        nodes[0, 1] = 0.0
    else:
        nodes[0, 0] = 0.0
    nodes[-1, 1] = 0.0
    nodes[:, 0] = np.maximum(nodes[:, 0], 0.0)
    nodes[0, 0] = max(nodes[0, 0], 0.05) if base.topology is Topology.TWO_CONTACT_LINES else 0.0
    return GeneratingCurve(nodes, base.topology)


def test_dofmap_counts():
    d = DofMap(16, Topology.TWO_CONTACT_LINES)
    assert d.n_full == 4 * 17
    # pinned: z_0, z_J, mu_S_0, mu_S_J
    assert d.n_reduced == d.n_full - 4
    d2 = DofMap(16, Topology.ISLAND)
    # pinned: r_0, z_J, mu_S_0, mu_S_J
    assert d2.n_reduced == d2.n_full - 4
    assert not d2.mask[0] and d.mask[0]


def test_dofmap_rejects_tiny_meshes():
    from dewetting.curve import CurveError
    with pytest.raises(CurveError):
        DofMap(3, Topology.ISLAND)


def test_f_half_reduces_to_area_element_at_identity():
    # with curve_guess == curve_m the averaged element is -(r X_rho)^perp / h
    curve = half_torus(10.0, 1.0, 12)
    fL, fR = f_half(curve, curve)
    h = 1.0 / curve.J
    dX = np.diff(curve.nodes, axis=0)
    r = curve.r
    from dewetting.curve import perp
    expectL = -(r[:-1, None] * perp(dX)) / h
    expectR = -(r[1:, None] * perp(dX)) / h
    assert np.allclose(fL, expectL, rtol=1e-13)
    assert np.allclose(fR, expectR, rtol=1e-13)


def test_volume_pairing_identity_structured():
    # vol(X^1) - vol(X^0) = 2 pi (X^1 - X^0, f^{1/2}) exactly
    rng = np.random.default_rng(11)
    for trial in range(100):
        base = half_torus(10.0, 1.0, 16) if trial % 2 == 0 else hemisphere(16)
        c0 = random_perturbed(base, rng, 0.05)
        c1 = random_perturbed(base, rng, 0.05)
        dV = discrete_volume(c1) - discrete_volume(c0)
        pairing = volume_pairing(c0, c1)
        scale = max(abs(discrete_volume(c0)), 1.0)
        assert abs(dV - pairing) <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_volume_pairing_identity_property(seed):
    rng = np.random.default_rng(seed)
    base = half_torus(8.0, 1.0, 16)
    c0 = random_perturbed(base, rng, 0.08)
    c1 = random_perturbed(base, rng, 0.08)
    dV = discrete_volume(c1) - discrete_volume(c0)
    assert abs(dV - volume_pairing(c0, c1)) <= 1e-12 * max(abs(discrete_volume(c0)), 1.0)


def _fd_jacobian(system, Y, mu, nu, dofs, h=1e-7):
    def pack(Y, mu, nu):
        u = np.empty(4 * len(mu))
        u[0::4], u[1::4], u[2::4], u[3::4] = Y[:, 0], Y[:, 1], mu, nu
        return u

    def unpack(u):
        return np.column_stack([u[0::4], u[1::4]]), u[2::4].copy(), u[3::4].copy()

    u0 = pack(Y, mu, nu)
    cols = []
    for idx in dofs.free:
        up, um = u0.copy(), u0.copy()
        up[idx] += h
        um[idx] -= h
        Fp = system.residual(*unpack(up))
        Fm = system.residual(*unpack(um))
        cols.append((Fp - Fm) / (2.0 * h))
    return np.array(cols).T


@pytest.mark.parametrize("topology", [Topology.TWO_CONTACT_LINES, Topology.ISLAND])
def test_jacobian_matches_finite_differences(topology):
    rng = np.random.default_rng(7)
    model = AnisotropyModel(beta=0.07)
    params = PhysicsParams(sigma=-0.6, eta=100.0, eps=0.01)
    lookup = StabilityLookup(model)
    worst = 0.0
    for _ in range(10):
        base = half_torus(10.0, 1.0, 8) if topology is Topology.TWO_CONTACT_LINES else hemisphere(8)
        state = seed_state(random_perturbed(base, rng, 0.03))
        dofs = DofMap(state.curve.J, topology)
        system = StepSystem(state, model, params, 1.0 / 16.0, dofs, lookup)
        Y = state.curve.nodes + 0.02 * rng.normal(size=state.curve.nodes.shape)
        mu = 0.5 * rng.normal(size=state.curve.J + 1)
        nu = 0.5 * rng.normal(size=state.curve.J + 1)
        nu[0] = nu[-1] = 0.0
        Jm = system.jacobian(Y, mu, nu).toarray()
        Jfd = _fd_jacobian(system, Y, mu, nu, dofs)
        scale = max(np.abs(Jfd).max(), 1.0)
        worst = max(worst, np.abs(Jm - Jfd).max() / scale)
    assert worst <= 1e-6


def test_residual_vanishing_willmore_term_when_eps_zero():
    # with eps = 0, the residual must not depend on the mu_S unknowns except
    # through their own defining rows
    model = AnisotropyModel(beta=0.07)
    params = PhysicsParams(sigma=-0.6, eta=100.0, eps=0.0)
    state = seed_state(half_torus(10.0, 1.0, 8))
    dofs = DofMap(8, Topology.TWO_CONTACT_LINES)
    system = StepSystem(state, model, params, 1.0 / 16.0, dofs, StabilityLookup(model))
    Y = state.curve.nodes.copy()
    mu = np.zeros(9)
    nu0 = np.zeros(9)
    nu1 = np.zeros(9)
    nu1[1:-1] = 3.0
    F0 = system.residual(Y, mu, nu0)
    F1 = system.residual(Y, mu, nu1)
    diff = F1 - F0
    # the residual is returned on the reduced slots; rows with slot index
    # 3 mod 4 define mu_S itself, every other row must be free of mu_S when
    # the regularization is off
    keep = dofs.free % 4 != 3
    assert np.max(np.abs(diff[keep])) == 0.0


def test_physics_params_validation():
    with pytest.raises(ValueError):
        PhysicsParams(sigma=0.0, eta=0.0, eps=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(sigma=0.0, eta=1.0, eps=-0.1)
