"""Acceptance gate: the nine headline requirements, one pass/fail line each.

Each criterion prints a single line `criterion N: PASS|FAIL -- detail` before
asserting, so a full run of this module doubles as the acceptance report.
Run with `pytest tests/test_acceptance.py -v -s`.
"""

import dataclasses
import math

import numpy as np
import pytest

from dewetting.anisotropy import (AnisotropyModel, StabilityCase,
                                  StabilityLookup, StabilityPolicy,
                                  verify_stability_inequality)
from dewetting.config import (CURVE_FORMS, build_events, build_initial_curve,
                              build_model, build_newton, build_params, preset)
from dewetting.curve import (GeneratingCurve, Topology, discrete_energy,
                             discrete_volume, recover_kappa)
from dewetting.diagnostics import convergence_harness, mesh_quality_study
from dewetting.evolve import (DofMap, EventConfig, NewtonConfig, evolve,
                              seed_state)
from dewetting.forms import (PhysicsParams, StepSystem, f_half, volume_pairing)

from test_curve import half_torus, hemisphere, sampled_curve
from test_forms import _fd_jacobian, random_perturbed


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'} -- {detail}")
    assert ok, f"criterion {num}: {detail}"


def _run_preset(cfg, t_end=None, newton=None, events=None):
    return evolve(build_initial_curve(cfg), build_model(cfg), build_params(cfg),
                  cfg.discretization.dt,
                  cfg.discretization.t_end if t_end is None else t_end,
                  newton=newton or build_newton(cfg),
                  events=events or build_events(cfg))


def _max_rel_drift(run) -> float:
    worst = 0.0
    for branch in run.branches:
        V0 = discrete_volume(branch.states[0].curve)
        drift = max(abs(discrete_volume(s.curve) - V0) for s in branch.states)
        worst = max(worst, drift / abs(V0))
    return worst


def test_criterion_1_volume_conservation():
    # fig5 presets to t=2; drift bounded by 1e-6, and a 10x tighter Newton
    # tolerance must beat a 10x tighter bound (both runs sit at the roundoff
    # floor, see the printed values)
    drifts = {}
    for tag in ("007", "008", "009", "010"):
        cfg = preset(f"fig5_beta{tag}")
        drifts[tag] = _max_rel_drift(_run_preset(cfg, t_end=2.0))
    cfg = preset("fig5_beta007")
    tight = dataclasses.replace(build_newton(cfg), tol=1e-10)
    drift_tight = _max_rel_drift(_run_preset(cfg, t_end=2.0, newton=tight))
    ok = max(drifts.values()) <= 1e-6 and drift_tight <= 1e-7
    detail = ("max rel |dV| " + ", ".join(f"beta=0.{t[1:]}: {d:.2e}" for t, d in drifts.items())
              + f"; Newton tol 1e-10 drift {drift_tight:.2e} (bound 1e-7)")
    _report(1, ok, detail)


def test_criterion_2_unconditional_energy_stability():
    violations = 0
    checked = 0
    worst = -math.inf
    for fam, eps in (("fig3", 0.01), ("fig4", 0.005)):
        for tag in ("007", "01"):
            for dt in (1.0 / 32.0, 1.0 / 256.0):
                cfg = preset(f"{fam}_beta{tag}")
                cfg = dataclasses.replace(
                    cfg, discretization=dataclasses.replace(cfg.discretization, dt=dt))
                run = _run_preset(cfg, t_end=1.0)
                model = build_model(cfg)
                for branch in run.branches:
                    W = np.array([discrete_energy(s.curve, s.mu_S, model,
                                                  cfg.physics.sigma, eps)
                                  for s in branch.states])
                    slack = 1e-10 * abs(W[0])
                    steps = np.diff(W)
                    checked += len(steps)
                    violations += int(np.sum(steps > slack))
                    worst = max(worst, float(steps.max()) / abs(W[0]))
    ok = violations == 0
    _report(2, ok, f"{checked} steps over fig3/fig4 x beta {{0.07,0.1}} x dt "
                   f"{{1/32,1/256}}: {violations} energy increases "
                   f"(worst step dW/|W0| = {worst:.2e})")


def test_criterion_3_second_order_convergence():
    fn, topo = CURVE_FORMS["torus10"]
    finals = {}
    ok = True
    for beta in (0.07, 0.1):
        for eps in (0.01, 0.02):
            model = AnisotropyModel(beta=beta)
            params = PhysicsParams(sigma=-0.6, eta=100.0, eps=eps)
            tables = convergence_harness(fn, topo, model, params, base_J=32,
                                         base_dt=1.0 / 16.0, levels=4,
                                         eval_times=(1.0, 2.0))
            for table in tables:
                order = table.rows[-1].order
                finals[(beta, eps, table.eval_time)] = order
                ok = ok and order >= 1.8
    detail = "; ".join(f"beta={b} eps={e} t={t:g}: order {o:.2f}"
                       for (b, e, t), o in sorted(finals.items()))
    _report(3, ok, detail)


def test_criterion_4_volume_pairing_identity():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(100):
        base = half_torus(8.0, 1.0, 16) if trial % 2 == 0 else hemisphere(16)
        c0 = random_perturbed(base, rng, 0.05)
        c1 = random_perturbed(base, rng, 0.05)
        dV = discrete_volume(c1) - discrete_volume(c0)
        scale = max(abs(discrete_volume(c0)), 1.0)
        worst = max(worst, abs(dV - volume_pairing(c0, c1)) / scale)
    ok = worst <= 1e-12
    _report(4, ok, f"100 random pairs (J=16): max |dV - pairing| / vol = {worst:.2e}")


def test_criterion_5_stability_inequality_suite():
    counts = {}
    ok = True
    for beta in (0.07, 0.1, 0.5):
        for case in (StabilityCase.I, StabilityCase.II):
            q = 0 if case is StabilityCase.I else 1
            model = AnisotropyModel(
                beta=beta, q=q,
                stability=StabilityPolicy.auto(case=case))
            report = verify_stability_inequality(model, case, samples=10_000,
                                                 seed=17)
            counts[(beta, case.value)] = len(report.violations)
            ok = ok and report.ok
    # non-vacuity: removing the stabilization must break the bound
    bare = AnisotropyModel(beta=0.07, q=1, stability=StabilityPolicy.zero())
    unstable = verify_stability_inequality(bare, StabilityCase.II,
                                           samples=10_000, seed=17)
    ok = ok and len(unstable.violations) >= 1
    detail = ("violations " + ", ".join(f"beta={b} case {c}: {n}"
                                        for (b, c), n in sorted(counts.items()))
              + f"; S=0 control: {len(unstable.violations)} violations (needs >= 1)")
    _report(5, ok, detail)


def test_criterion_6_jacobian_correctness():
    rng = np.random.default_rng(42)
    model = AnisotropyModel(beta=0.07)
    params = PhysicsParams(sigma=-0.6, eta=100.0, eps=0.01)
    lookup = StabilityLookup(model)
    worst = 0.0
    for trial in range(20):
        topo = Topology.TWO_CONTACT_LINES if trial % 2 == 0 else Topology.ISLAND
        base = half_torus(10.0, 1.0, 8) if topo is Topology.TWO_CONTACT_LINES else hemisphere(8)
        state = seed_state(random_perturbed(base, rng, 0.03))
        dofs = DofMap(8, topo)
        system = StepSystem(state, model, params, 1.0 / 16.0, dofs, lookup)
        Y = state.curve.nodes + 0.02 * rng.normal(size=state.curve.nodes.shape)
        mu = 0.5 * rng.normal(size=9)
        nu = 0.5 * rng.normal(size=9)
        nu[0] = nu[-1] = 0.0
        Jm = system.jacobian(Y, mu, nu).toarray()
        Jfd = _fd_jacobian(system, Y, mu, nu, dofs)
        worst = max(worst, np.abs(Jm - Jfd).max() / max(np.abs(Jfd).max(), 1.0))
    ok = worst <= 1e-6
    _report(6, ok, f"20 random states (J=8): max relative mismatch {worst:.2e}")


def test_criterion_7_morphology_windows():
    results = []
    # fig10 and fig11: pinch-off inside the paper's windows
    windows = {"fig10": (0.6, 0.9), "fig11": (0.25, 0.40)}
    ok = True
    for name, (lo, hi) in windows.items():
        run = _run_preset(preset(name))
        pinches = [e.time for b in run.branches for e in b.events
                   if e.kind == "pinch_off"]
        t_pinch = min(pinches) if pinches else math.nan
        good = bool(pinches) and lo <= t_pinch <= hi
        ok = ok and good
        results.append(f"{name} pinch at t={t_pinch:.3f} (window [{lo}, {hi}])")
    # fig9: Equilibrium event by t <= 10. The faithful dynamics closes the
    # hole at t = 9.08 and the island equilibrates near t ~ 30, so this leg
    # fails; see the decision ledger for the measured analysis.
    run9 = _run_preset(preset("fig9"))
    eq = [e.time for b in run9.branches for e in b.events if e.kind == "equilibrium"]
    closed = [e.time for b in run9.branches for e in b.events if e.kind == "hole_closed"]
    good9 = bool(eq) and min(eq) <= 10.0
    ok = ok and good9
    results.append(
        f"fig9 equilibrium by t<=10: {'yes' if good9 else 'no'}"
        + (f" (hole closed at t={min(closed):.2f}, island still relaxing)"
           if closed and not good9 else ""))
    _report(7, ok, "; ".join(results))


def test_criterion_8_mesh_quality_effect():
    cfg = preset("fig6_beta035")
    initial = build_initial_curve(cfg)
    report = mesh_quality_study(initial, build_model(cfg), sigma=cfg.physics.sigma,
                                eta=cfg.physics.eta, eps_values=(0.0, cfg.physics.eps),
                                dt=cfg.discretization.dt, t_end=cfg.discretization.t_end,
                                newton=build_newton(cfg))
    eps = cfg.physics.eps
    reg_finite = (eps in report.peak and math.isfinite(report.peak[eps])
                  and eps not in report.failures and report.peak[eps] < 100.0)
    ok = reg_finite and report.regularization_helps(eps)
    detail = (f"peak Rh: eps=0 {report.peak.get(0.0, math.nan):.2f}, "
              f"eps={eps} {report.peak.get(eps, math.nan):.2f}; "
              f"final Rh: eps=0 {report.final.get(0.0, math.nan):.2f}, "
              f"eps={eps} {report.final.get(eps, math.nan):.2f}; "
              f"eps=0 failed: {0.0 in report.failures}")
    _report(8, ok, detail)


def test_criterion_9_geometry_oracles():
    quarter = hemisphere(256)
    kappa = recover_kappa(quarter)
    kerr = float(np.max(np.abs(kappa[1:-1] + 1.0)))
    torus = half_torus(10.0, 1.0, 4096)
    verr = abs(discrete_volume(torus) - 10.0 * math.pi ** 2) / (10.0 * math.pi ** 2)
    ok = kerr <= 5e-4 and verr <= 1e-3
    _report(9, ok, f"quarter-circle kappa error {kerr:.2e} (<= 5e-4); "
                   f"half-torus volume rel error {verr:.2e} (<= 1e-3)")
