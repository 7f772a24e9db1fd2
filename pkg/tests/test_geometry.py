"""Chart-based geometry: frames, Christoffels, curvature, covariant derivatives."""

import numpy as np
import pytest

from skewspin.cliffalg import REP4, herm, vector_clifford
from skewspin.constructors import flat_chart, s2k4_product_chart, sphere_chart
from skewspin.geometry import (ChartError, MetricChart, PointGeometry,
                               christoffels, curvature, frame_at,
                               spinor_cov_deriv, spinor_curvature,
                               spinor_curvature_commutator, theta_coord)

X4 = np.array([1.1, 0.3, 0.2, -0.1])


def test_flat_chart_trivial_geometry():
    ch = flat_chart(4)
    x = np.array([0.1, -0.2, 0.3, 0.0])
    assert np.abs(christoffels(ch, x)).max() < 1e-12
    assert np.abs(curvature(ch, x).riemann).max() < 1e-10
    assert np.abs(theta_coord(ch, x)).max() < 1e-12
    assert np.allclose(frame_at(ch, x), np.eye(4))


def test_sphere_christoffel_closed_form():
    ch = sphere_chart(1.0)
    x = np.array([1.1, 0.3])
    gam = christoffels(ch, x)
    assert abs(gam[0, 1, 1] + np.sin(1.1) * np.cos(1.1)) < 1e-12
    assert abs(gam[1, 0, 1] - np.cos(1.1) / np.sin(1.1)) < 1e-12


def test_unit_sphere_curvature():
    ch = sphere_chart(1.0)
    cp = curvature(ch, np.array([1.2, 0.5]))
    assert abs(cp.scalar - 2.0) < 1e-10
    assert abs(cp.sectional(np.array([1.0, 0.0]), np.array([0.0, 1.0])) - 1.0) < 1e-10


def test_product_chart_curvature_values():
    ch = s2k4_product_chart()
    cp = curvature(ch, X4)
    assert abs(cp.scalar - 8.0) < 1e-10
    assert np.allclose(np.sort(np.linalg.eigvalsh(cp.ricci)), [0, 0, 4, 4], atol=1e-10)


def test_berger_unit_sphere_scalar_curvature():
    from skewspin.dwp import berger_chart
    cp = curvature(berger_chart(1.0, 1.0), np.array([1.2, 0.5, 0.4]))
    assert abs(cp.scalar - 6.0) < 1e-9


def test_frame_orthonormal_and_oriented():
    ch = s2k4_product_chart()
    pts = ch.grid(3)
    E = frame_at(ch, pts)
    g = ch.g(pts)
    gram = np.einsum("pai,pab,pbj->pij", E, g, E)
    assert np.abs(gram - np.eye(4)).max() < 1e-10
    assert np.all(np.linalg.det(E) > 0)
    flipped = ch.with_orientation(-1)
    assert np.all(np.linalg.det(frame_at(flipped, pts)) < 0)


def test_frame_derivative_matches_fd():
    ch = s2k4_product_chart()
    E, dE = frame_at(ch, X4, with_d1=True)
    h = 1e-5
    for c in range(4):
        dx = np.zeros(4)
        dx[c] = h
        fd = (frame_at(ch, X4 + dx) - frame_at(ch, X4 - dx)) / (2 * h)
        assert np.abs(fd - dE[c]).max() < 1e-8


def test_non_positive_metric_raises():
    bad = MetricChart("bad", 2, ((-1, 1), (-1, 1)),
                      lambda x: np.broadcast_to(np.diag([1.0, -1.0]),
                                                x.shape[:-1] + (2, 2)).copy())
    with pytest.raises(ChartError):
        frame_at(bad, np.zeros(2))


def test_christoffels_fd_vs_analytic_richardson():
    ch = s2k4_product_chart()
    exact = christoffels(ch, X4)
    errs = []
    for h in (2e-3, 1e-3):
        fd_chart = MetricChart(ch.name, 4, ch.domain, ch.metric, h=h)
        errs.append(np.abs(christoffels(fd_chart, X4) - exact).max())
    ratio = errs[0] / errs[1]
    assert 3.0 < ratio < 5.0


def test_metric_compatibility_and_bianchi():
    ch = s2k4_product_chart()
    for x in ch.grid(2):
        geo = PointGeometry(ch, x)
        th = geo.theta
        assert np.abs(th + np.swapaxes(th, -1, -2)).max() < 1e-9
        r = geo.curv.riemann
        bianchi = r + np.einsum("ijkl->jkil", r) + np.einsum("ijkl->kijl", r)
        assert np.abs(bianchi).max() < 1e-8


def test_curvature_symmetries():
    ch = s2k4_product_chart()
    r = curvature(ch, X4).riemann
    assert np.abs(r + np.einsum("ijkl->jikl", r)).max() < 1e-10
    assert np.abs(r + np.einsum("ijkl->ijlk", r)).max() < 1e-10
    assert np.abs(r - np.einsum("ijkl->klij", r)).max() < 1e-10


def _psi_field(p):
    p = np.asarray(p)
    a = np.exp(1j * (0.3 * p[..., 0] + 0.1 * p[..., 1]))
    b = np.cos(p[..., 2] - 0.2 * p[..., 0])
    return np.stack([a, 0.5 * b + 0j * a, 0.2 * np.exp(1j * p[..., 3]) + 0 * a,
                     0.3 + 0j * a], axis=-1)


def _phi_field(p):
    p = np.asarray(p)
    a = np.sin(p[..., 1] + 0.4 * p[..., 3])
    return np.stack([a + 0j, 0.2j + 0 * a, np.exp(0.2j * p[..., 0]) + 0 * a,
                     -0.1 + 0j * a], axis=-1)


def test_spinor_derivative_flat_constant():
    ch = flat_chart(4)
    fld = lambda p: np.broadcast_to(np.array([1.0, 0, 0.5j, 0]),
                                    np.asarray(p).shape[:-1] + (4,)).copy()
    out = spinor_cov_deriv(ch, REP4, fld, np.zeros(4), 2)
    assert np.abs(out).max() < 1e-12


def test_spinor_derivative_leibniz():
    ch = s2k4_product_chart()
    geo = PointGeometry(ch, X4)

    def vec_field(p):
        p = np.asarray(p)
        return np.stack([np.sin(p[..., 0]), 0.3 + 0 * p[..., 0],
                         p[..., 2], 0.1 * p[..., 1]], axis=-1)

    def prod_field(p):
        out = np.einsum("...i,iab,...b->...a", vec_field(p).astype(complex),
                        np.stack(REP4.gamma), _psi_field(p))
        return out

    k = 1
    lhs = spinor_cov_deriv(ch, REP4, prod_field, X4, k, geo=geo)
    from skewspin.geometry import vector_cov_deriv_coord
    dv = vector_cov_deriv_coord(ch, vec_field, X4, geo=geo)
    nab_v = np.einsum("c,cj->j", geo.frame[:, k], dv)
    rhs = vector_clifford(nab_v, _psi_field(X4)) \
        + vector_clifford(vec_field(X4), spinor_cov_deriv(ch, REP4, _psi_field, X4, k, geo=geo))
    assert np.abs(lhs - rhs).max() < 5e-5


def test_spinor_derivative_metricity():
    ch = s2k4_product_chart()
    geo = PointGeometry(ch, X4)
    h = ch.h
    k = 2
    dpsi = spinor_cov_deriv(ch, REP4, _psi_field, X4, k, geo=geo)
    dphi = spinor_cov_deriv(ch, REP4, _phi_field, X4, k, geo=geo)
    ip = lambda p: herm(_psi_field(p), _phi_field(p))
    xc = geo.frame[:, k]
    dip = sum(xc[c] * (ip(X4 + h * np.eye(4)[c]) - ip(X4 - h * np.eye(4)[c])) / (2 * h)
              for c in range(4))
    resid = dip - herm(dpsi, _phi_field(X4)) - herm(_psi_field(X4), dphi)
    assert abs(resid) < 5e-5


def test_spinorial_ricci_identity():
    ch = s2k4_product_chart()
    geo = PointGeometry(ch, X4)
    cp = geo.curv
    psi0 = _psi_field(X4)
    for i in range(4):
        acc = np.zeros(4, dtype=complex)
        for j in range(4):
            acc += vector_clifford(np.eye(4)[j],
                                   spinor_curvature(ch, REP4, X4, i, j, psi0, geo=geo))
        lhs = -0.5 * vector_clifford(cp.ricci[:, i], psi0)
        assert np.abs(lhs - acc).max() < 1e-10


def test_spinor_curvature_commutator_oracle():
    ch = s2k4_product_chart()
    geo = PointGeometry(ch, X4)
    for (i, j) in [(0, 1), (1, 3)]:
        r1 = spinor_curvature(ch, REP4, X4, i, j, _psi_field(X4), geo=geo)
        r2 = spinor_curvature_commutator(ch, REP4, _psi_field, X4, i, j)
        assert np.abs(r1 - r2).max() < 5e-5
        assert np.abs(r1 + spinor_curvature(ch, REP4, X4, j, i, _psi_field(X4), geo=geo)).max() < 1e-12


def test_grid_respects_margin():
    ch = sphere_chart(0.5)
    pts = ch.grid(5)
    lo = np.array([d[0] for d in ch.domain]) + 2 * ch.h
    hi = np.array([d[1] for d in ch.domain]) - 2 * ch.h
    assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)
    assert pts.shape == (25, 2)
