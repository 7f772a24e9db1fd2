"""Builders: flat, round-sphere transport, product lifts, corruption."""

import numpy as np
import pytest

from skewspin.cliffalg import REP4, vector_clifford
from skewspin.constructors import (ConstructionError, build_flat_parallel,
                                   build_product_3d, build_s2_skew_killing,
                                   build_s2xr2, corrupt_candidate,
                                   extend_to_3d, modified_flatness_residual,
                                   scan_sphere_flatness, transport_loop_residual)
from skewspin.fields import (eta_at, f_rho_at, skew_killing_residual, xi_at)
from skewspin.geometry import PointGeometry, spinor_cov_deriv

X4 = np.array([1.2, 0.55, 0.2, -0.1])


def test_flat_parallel_exact():
    cand = build_flat_parallel()
    for x in cand.chart.grid(2):
        assert skew_killing_residual(cand, x).max() == 0.0
    eta, _ = eta_at(cand, np.zeros(4))
    assert np.abs(eta).max() < 1e-14


def test_flat_perturbed_A_breaks_k0():
    cand = build_flat_parallel(base_spinor=(1.0, 0.5, 0.0, 0.25))
    eps = 1e-3
    amat = np.zeros((4, 4))
    amat[0, 1], amat[1, 0] = -eps, eps

    def a_field(pts):
        return np.broadcast_to(amat, np.asarray(pts).shape[:-1] + (4, 4)).copy()

    from skewspin.fields import Candidate
    bad = Candidate(cand.chart, a_field, cand.psi)
    worst = skew_killing_residual(bad, np.zeros(4)).max()
    assert 0.2 * eps < worst < 5 * eps


def test_sphere_flatness_scan_minimum():
    rows = scan_sphere_flatness(np.linspace(0.3, 0.8, 26))
    radii = [r for r, _ in rows]
    vals = [v for _, v in rows]
    k = int(np.argmin(vals))
    assert abs(radii[k] - 0.5) < 0.021
    # residual at radius 1 is at least 1000x the minimum
    full = scan_sphere_flatness([0.5, 1.0])
    assert full[1][1] / max(full[0][1], 1e-300) > 1e3
    # monotone away from the minimum
    assert all(vals[i] > vals[i + 1] for i in range(k))
    assert all(vals[i] < vals[i + 1] for i in range(k, len(vals) - 1))


def test_sphere_construction_k0(s2_cand):
    worst = max(skew_killing_residual(s2_cand, x).max()
                for x in s2_cand.chart.grid(5))
    assert worst < 5e-5
    pts = s2_cand.chart.grid(4)
    assert np.abs(np.linalg.norm(s2_cand.psi(pts), axis=-1) - 1).max() < 1e-10


def test_sphere_construction_refuses_wrong_radius():
    with pytest.raises(ConstructionError):
        build_s2_skew_killing(radius=1.0)


def test_sphere_loop_holonomy(s2_cand):
    assert transport_loop_residual(s2_cand) < 1e-8


def test_sphere_minus_sign_variant():
    cand = build_s2_skew_killing(sign=-1.0)
    x = np.array([1.4, 0.5])
    assert skew_killing_residual(cand, x).max() < 5e-5


def test_product3d_rejects_bad_input(s2_cand):
    c3 = extend_to_3d(s2_cand)
    bad = corrupt_candidate(c3, a_scale=1.3)
    with pytest.raises(ConstructionError):
        build_product_3d(bad)


def test_product3d_properties(product3d_cand):
    cand = product3d_cand
    x = np.array([1.3, 0.5, 0.1, -0.2])
    assert skew_killing_residual(cand, x).max() < 5e-5
    f, rho = f_rho_at(cand, x)
    assert abs(f) < 1e-8
    assert abs(rho - 0.5) < 1e-8
    assert np.abs(xi_at(cand, x) + np.eye(4)[3]).max() < 1e-8
    # the factor direction is parallel: nabla_{dt} psi = 0
    geo = PointGeometry(cand.chart, x)
    nab_t = spinor_cov_deriv(cand.chart, REP4, cand.psi, x, 3, geo=geo)
    assert np.abs(nab_t).max() < 5e-5


@pytest.mark.parametrize("mode,combo", [
    ("plus", "aeta_nonzero"), ("minus", "aeta_nonzero"),
    ("plus", "aeta_zero"), ("minus", "aeta_zero")])
def test_s2xr2_all_variants_satisfy_k0(mode, combo):
    cand = build_s2xr2(mode, combo)
    assert skew_killing_residual(cand, X4).max() < 5e-5


def test_s2xr2_aeta_nonzero_structure(s2xr2_cand):
    cand = s2xr2_cand
    xi = xi_at(cand, X4)
    a = cand.A(X4)
    a2xi = a @ (a @ xi)
    # A^2 xi = -xi_sphere: nonzero, supported on the sphere factor
    assert np.linalg.norm(a2xi[:2] + xi[:2]) < 1e-10
    assert np.linalg.norm(a2xi) > 0.01
    eta, _ = eta_at(cand, X4)
    assert np.linalg.norm(a @ eta) > 0.01


def test_s2xr2_aeta_zero_structure(s2xr2_zero):
    cand = s2xr2_zero
    assert np.abs(xi_at(cand, X4) + np.eye(4)[2]).max() < 1e-8
    eta, _ = eta_at(cand, X4)
    assert np.linalg.norm(cand.A(X4) @ eta) < 1e-10
    f, rho = f_rho_at(cand, X4)
    assert abs(f) < 1e-8 and abs(rho - 0.5) < 1e-8


def test_s2xr2_curvature_structure(s2xr2_cand):
    from skewspin.geometry import curvature
    cp = curvature(s2xr2_cand.chart, X4)
    assert abs(cp.scalar - 8.0) < 1e-9
    a = s2xr2_cand.A(X4)
    a2 = float(np.sum(a * a))
    assert abs(cp.scalar - 4.0 * a2) < 1e-9
    # Ricci eigenvalues {0, 0, S/2, S/2} with parallel eigenprojectors
    eig = np.sort(np.linalg.eigvalsh(cp.ricci))
    assert np.allclose(eig, [0, 0, 4, 4], atol=1e-9)


def test_ricci_eigenprojectors_parallel(s2xr2_cand):
    # the eigendistributions of Ric coincide with ker A and im A and are parallel
    from skewspin.geometry import endo_cov_deriv_coord
    chart = s2xr2_cand.chart

    def proj_field(p):
        p = np.asarray(p)
        cp_r = np.linalg.eigh(_ric(p))
        # projector onto the S/2-eigenspace: columns with eigenvalue > 2
        vals, vecs = cp_r
        mask = (vals > 2.0).astype(float)
        return np.einsum("...ik,...k,...jk->...ij", vecs, mask, vecs)

    def _ric(p):
        from skewspin.geometry import curvature
        return curvature(chart, p).ricci

    geo = PointGeometry(chart, X4)
    dproj = endo_cov_deriv_coord(chart, proj_field, X4, geo=geo)
    assert np.abs(dproj).max() < 5e-4


def test_modified_flatness_on_product(s2xr2_cand):
    # A = J + 0 is parallel with A^2 = -pr_sphere; the modified connection is
    # not flat on the full bundle, only along solutions
    res = modified_flatness_residual(s2xr2_cand, X4[None, :])
    assert np.isfinite(res)


def test_corrupt_candidate_a_scale(s2xr2_cand):
    bad = corrupt_candidate(s2xr2_cand, a_scale=1.01)
    assert skew_killing_residual(bad, X4).max() > 1e-4


def test_corrupt_candidate_psi(s2xr2_cand):
    bad = corrupt_candidate(s2xr2_cand, psi_eps=1e-3)
    assert skew_killing_residual(bad, X4).max() > 1e-4
    assert not bad.normalized
