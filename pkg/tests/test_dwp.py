"""Doubly warped products: profile ODE, Berger flows, the candidate builder."""

import numpy as np
import pytest

from skewspin.constructors import ConstructionError
from skewspin.dwp import (FlowData, GaugeError, berger_chart, berger_flow,
                          build_dwp_candidate, dwp_chart, dwp_pointwise_data,
                          integrate_dwp, leaf_chart, line_bundle_section,
                          sol_residuals)
from skewspin.fields import eta_at, f_rho_at, skew_killing_residual, xi_at

# frozen by the RK4 self-convergence oracle: values at t = 0.1 for
# (K_hat, tau_hat, rho0, sigma0) = (4, 1, 0.3, 1); steps 1e-3 and 5e-4 agree
# to 6e-13, far below the 1e-8 gate
RHO_AT_01 = 0.125431029471486
SIGMA_AT_01 = 0.975167885562025


def test_profile_regression_values():
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.1), 1e-3)
    assert p.exit == "completed"
    assert abs(p.t[-1] - 0.1) < 1e-12
    assert abs(p.rho[-1] - RHO_AT_01) < 1e-8
    assert abs(p.sigma[-1] - SIGMA_AT_01) < 1e-8


def test_rk4_self_convergence_order():
    vals = {}
    for step in (1e-3, 5e-4, 2.5e-4):
        p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.1), step)
        vals[step] = p.rho[-1]
    d1 = abs(vals[1e-3] - vals[5e-4])
    d2 = abs(vals[5e-4] - vals[2.5e-4])
    order = np.log2(d1 / d2)
    assert order > 3.8


def test_sigma_monotone_sign():
    # tau_hat > 0 forces (sigma^2)' < 0; tau_hat < 0 the opposite
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.05), 1e-3)
    assert np.all(np.diff(p.sigma) < 0)
    p = integrate_dwp(4.0, -1.0, 0.3, 1.0, (0.0, 0.05), 1e-3)
    assert np.all(np.diff(p.sigma) > 0)


def test_profile_truncates_with_exit_reason():
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.5), 1e-3)
    assert p.exit == "rho_lower"
    assert p.t[-1] < 0.2
    p2 = integrate_dwp(0.05, -1.0, 0.49, 1.0, (0.0, 2.0), 1e-3)
    assert p2.exit == "rho_upper"


def test_profile_equation_residuals():
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.5), 1e-3)
    r1, r2 = sol_residuals(p)
    assert max(r1, r2) < 1e-7


def test_sol_residual_step_scaling():
    # halving the step reduces the sampled-equation residual ~16x (4th order)
    p1 = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.1), 1e-3)
    p2 = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.1), 5e-4)
    r1 = max(sol_residuals(p1))
    r2 = max(sol_residuals(p2))
    assert 8.0 < r1 / r2 < 32.0


def test_profile_precondition_errors():
    with pytest.raises(ValueError):
        integrate_dwp(4.0, 1.0, 0.6, 1.0)
    with pytest.raises(ValueError):
        integrate_dwp(4.0, 0.0, 0.3, 1.0)


def test_profile_json_schema():
    import json
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.05), 1e-3)
    d = json.loads(p.to_json())
    assert set(d) == {"t", "rho", "sigma", "lambda", "mu", "tau", "K",
                      "K_hat", "tau_hat", "exit"}
    assert len(d["t"]) == len(d["rho"]) == len(d["lambda"])


def test_berger_flow_seed_constants():
    fl = berger_flow(1.0, 1.0)
    assert abs(fl.tau_hat - 1.0) < 1e-5
    assert abs(fl.K_hat - 4.0) < 1e-4
    for key in ("unit_residual", "killing_residual", "geodesic_residual",
                "rotation_residual"):
        assert fl.checks[key] < 1e-5, key


def test_berger_flow_scaling_law():
    fl = berger_flow(1.0, 2.0)
    assert abs(fl.tau_hat - 0.25) < 1e-5
    assert abs(fl.K_hat - 1.0) < 1e-4
    fl = berger_flow(0.5, 1.0)
    assert abs(fl.tau_hat - 0.5) < 1e-5
    assert abs(fl.K_hat - 4.0) < 1e-4


def test_berger_flow_flip_eta():
    fl = berger_flow(1.0, 1.0, flip_eta=True)
    assert abs(fl.tau_hat + 1.0) < 1e-5


def test_dwp_chart_rho_window():
    fl = berger_flow(1.0, 1.0)
    p = integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.5), 1e-3)
    chart = dwp_chart(p, fl)
    lo, hi = chart.domain[0]
    assert p.rho_of(hi) >= 0.17
    with pytest.raises(ConstructionError):
        dwp_chart(p, fl, rho_bounds=(0.46, 0.49))


def test_dwp_pointwise_frame(dwp_bundle):
    _, profile, cand = dwp_bundle
    x = cand.chart.center()
    d = dwp_pointwise_data(cand.chart, x)
    s = d["s"]
    assert np.abs(s @ s.T - np.eye(4)).max() < 1e-12
    assert np.linalg.det(s) < 0
    assert abs(np.linalg.norm(d["eta"]) - d["rho"]) < 1e-12
    jm, am = d["J"], d["A"]
    assert np.allclose(jm @ jm, -np.eye(4), atol=1e-12)
    assert np.allclose(am @ jm, jm @ am, atol=1e-12)
    assert abs(d["A_E"] + d["lambda"] * d["rho"] / d["f"]) < 1e-12
    assert abs(d["A_P"] - d["mu"] * d["rho"]) < 1e-12


def test_line_bundle_section_properties(dwp_bundle):
    _, _, cand = dwp_bundle
    d = dwp_pointwise_data(cand.chart, cand.chart.center())
    sec = line_bundle_section(d["J"], d["xi"], d["f"])
    assert abs(np.linalg.norm(sec) - 1.0) < 1e-12
    from skewspin.cliffalg import REP4, vector_clifford
    pp, pm = REP4.split(sec)
    # defining conditions of the line bundle
    assert np.abs(pp - vector_clifford(d["xi"], pm)).max() < 1e-12
    for i in range(4):
        lhs = vector_clifford(d["J"][:, i], pm)
        rhs = 1j * vector_clifford(np.eye(4)[i], pm)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_line_bundle_rejects_wrong_duality(dwp_bundle):
    _, _, cand = dwp_bundle
    d = dwp_pointwise_data(cand.chart, cand.chart.center())
    with pytest.raises(GaugeError):
        line_bundle_section(-d["J"], d["xi"], d["f"])


def test_dwp_candidate_k0_and_fields(dwp_bundle):
    _, profile, cand = dwp_bundle
    assert cand.meta["dalpha"] < 5e-4
    assert cand.meta["line_residual"] < 5e-4
    for x in [cand.chart.center(), cand.chart.center() + [0.01, 0.15, -0.1, 0.2]]:
        assert skew_killing_residual(cand, x).max() < 5e-5
        d = dwp_pointwise_data(cand.chart, x)
        eta, _ = eta_at(cand, x)
        assert np.abs(eta - d["eta"]).max() < 1e-6
        f, rho = f_rho_at(cand, x)
        assert abs(rho - d["rho"]) < 1e-6
        assert abs(f - d["f"]) < 1e-6
        assert np.abs(xi_at(cand, x) - d["xi"]).max() < 1e-6
        # A eta parallel to J eta
        aeta = d["A"] @ eta
        jeta = d["J"] @ eta
        u = np.dot(aeta, jeta) / rho ** 2
        assert np.linalg.norm(aeta - u * jeta) < 1e-8


def test_dwp_flow_mismatch_refused(dwp_bundle):
    flow, profile, _ = dwp_bundle
    wrong = integrate_dwp(1.0, 0.25, 0.3, 1.0, (0.0, 0.3), 1e-3)
    with pytest.raises(ConstructionError):
        build_dwp_candidate(wrong, flow)


def test_leaf_chart_matches_profile(dwp_bundle):
    _, profile, cand = dwp_bundle
    ch3, rho, sigma = leaf_chart(cand.chart)
    t = cand.chart.center()[0]
    assert abs(rho - profile.rho_of(t)) < 1e-12
    x3 = np.array([1.3, 0.5, 0.6])
    g3 = ch3.g(x3)
    g4 = cand.chart.g(np.concatenate([[t], x3]))
    assert np.abs(g3 - g4[1:, 1:]).max() < 1e-12


def test_transport_path_independence(dwp_bundle):
    # two different polyline orders agree at a common target
    _, _, cand = dwp_bundle
    from skewspin.geometry import LineTransportField
    base = cand.psi(cand.chart.center())
    f2 = LineTransportField(cand.chart, cand.psi.conn, cand.chart.center(), base,
                            step=cand.psi.step)
    target = cand.chart.center() + np.array([0.012, 0.2, 0.15, -0.1])
    v1 = cand.psi(target)
    # reversed axis order: transport along axes 3,2,1,0 by permuting the chart
    x = cand.chart.center().copy()
    v = base
    from skewspin.geometry import transport_segment
    for axis in (3, 2, 1, 0):
        v = transport_segment(cand.psi.conn, x, axis, x[axis], v, target[axis],
                              cand.psi.step)
        x[axis] = target[axis]
    assert np.abs(v - v1).max() < 1e-5
