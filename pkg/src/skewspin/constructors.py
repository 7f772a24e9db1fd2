"""Explicit candidates: flat parallel spinor, the round-sphere construction,
its product lifts, and deliberate corruptions for non-vacuity checks.

The round-sphere builder realizes the 2-dimensional solution as a parallel
section of the modified connection ``nabla - A . (Clifford)`` on the sphere
of Gauss curvature 4; the construction first measures the curvature of that
connection and refuses to transport when it is not flat (wrong radius).
Transport runs along axis-parallel polylines from the chart center.
"""

from __future__ import annotations

import numpy as np

from .cliffalg import REP4, ExtForm
from .fields import Candidate, skew_killing_residual
from .geometry import (LineTransportField, MetricChart, PointGeometry,
                       endo_cov_deriv_coord, modified_connection_batch,
                       transport_segment)


class ConstructionError(RuntimeError):
    """A builder refused: preconditions failed or a flatness check broke."""


J_STD2 = np.array([[0.0, -1.0], [1.0, 0.0]])


# ----------------------------------------------------------------------------
# chart fixtures
# ----------------------------------------------------------------------------

def flat_chart(dim=4, halfwidth=1.0, h=1e-3):
    def g(x):
        return np.broadcast_to(np.eye(dim), x.shape[:-1] + (dim, dim)).copy()

    def d1(x):
        return np.zeros(x.shape[:-1] + (dim, dim, dim))

    def d2(x):
        return np.zeros(x.shape[:-1] + (dim, dim, dim, dim))

    dom = ((-halfwidth, halfwidth),) * dim
    return MetricChart("flat", dim, dom, g, d1, d2, h=h)


def sphere_chart(radius=0.5, box=None, h=1e-3):
    """Round 2-sphere of the given radius in polar coordinates (theta, phi)."""
    r2 = radius * radius

    def g(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = r2
        out[..., 1, 1] = r2 * np.sin(th) ** 2
        return out

    def d1(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = r2 * np.sin(2.0 * th)
        return out

    def d2(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 0, 1, 1] = 2.0 * r2 * np.cos(2.0 * th)
        return out

    if box is None:
        box = ((np.pi / 2 - 0.45, np.pi / 2 + 0.45), (0.1, 1.0))
    return MetricChart(f"s2_r{radius:g}", 2, box, g, d1, d2, h=h,
                       extras={"radius": radius})


def _block_product_chart(ch_base, line_intervals, name, h=1e-3):
    """Riemannian product of a chart with flat line factors (appended axes)."""
    nb = ch_base.dim
    dim = nb + len(line_intervals)

    def g(x):
        out = np.zeros(x.shape[:-1] + (dim, dim))
        out[..., :nb, :nb] = ch_base.metric(x[..., :nb])
        for k in range(nb, dim):
            out[..., k, k] = 1.0
        return out

    d1 = None
    d2 = None
    if ch_base.metric_d1 is not None:
        def d1(x):
            out = np.zeros(x.shape[:-1] + (dim, dim, dim))
            out[..., :nb, :nb, :nb] = ch_base.metric_d1(x[..., :nb])
            return out
    if ch_base.metric_d2 is not None:
        def d2(x):
            out = np.zeros(x.shape[:-1] + (dim, dim, dim, dim))
            out[..., :nb, :nb, :nb, :nb] = ch_base.metric_d2(x[..., :nb])
            return out

    dom = tuple(ch_base.domain) + tuple(line_intervals)
    return MetricChart(name, dim, dom, g, d1, d2, h=h, extras=dict(ch_base.extras))


def s2xr_chart3(radius=0.5, interval=(-0.6, 0.6), h=1e-3):
    return _block_product_chart(sphere_chart(radius, h=h), [interval], "s2xr", h=h)


def s2k4_product_chart(intervals=((-0.6, 0.6), (-0.6, 0.6)), h=1e-3):
    """S^2(K=4) x R^2 in coordinates (theta, phi, y, z)."""
    return _block_product_chart(sphere_chart(0.5, h=h), list(intervals), "s2xr2", h=h)


# ----------------------------------------------------------------------------
# modified connection: transport matrices and curvature
# ----------------------------------------------------------------------------

def modified_connection_matrices(cand):
    """Batched callback x -> matrices M_c with hat-nabla_{d_c} = d_c + M_c."""
    return modified_connection_batch(cand.chart, cand.rep, cand.A)


def modified_curvature_ops(cand, x):
    """Curvature operators of the modified connection for all frame pairs.

    hat-R_{e_i, e_j} = R_{e_i, e_j} - C_A(e_i, e_j) . + 2 (A e_i ^ A e_j) . ,
    returned as a dict {(i, j): matrix} for i < j.  The wedge of two vectors
    acts as g_u g_v + <u, v> Id, which keeps this dimension-generic.
    """
    chart, rep = cand.chart, cand.rep
    geo = PointGeometry(chart, x)
    rf = geo.curv.riemann
    da_coord = endo_cov_deriv_coord(chart, cand.A, x, geo=geo)
    da_frame = np.einsum("ck,cij->kij", geo.frame, da_coord)
    a = cand.A(x)
    eye = np.eye(rep.nspin)
    ops = {}
    for i in range(chart.dim):
        for j in range(i + 1, chart.dim):
            spin = 0.25 * np.einsum("kl,klab->ab", rf[i, j], rep.gamma_pairs)
            c_vec = da_frame[i][:, j] - da_frame[j][:, i]
            ai, aj = a[:, i], a[:, j]
            wedge = (rep.vector_matrix(ai) @ rep.vector_matrix(aj)
                     + np.dot(ai, aj) * eye)
            ops[(i, j)] = spin - rep.vector_matrix(c_vec) + 2.0 * wedge
    return ops


def modified_flatness_residual(cand, pts):
    """Max operator norm of the modified-connection curvature over points."""
    worst = 0.0
    for x in np.atleast_2d(pts):
        for op in modified_curvature_ops(cand, x).values():
            worst = max(worst, float(np.linalg.norm(op, 2)))
    return worst


# ----------------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------------

def build_flat_parallel(base_spinor=(1.0, 0.0, 0.0, 0.0), h=1e-3):
    """Flat chart, constant unit spinor, A = 0."""
    chart = flat_chart(4, h=h)
    base = np.asarray(base_spinor, dtype=complex)
    base = base / np.linalg.norm(base)

    def psi(pts):
        return np.broadcast_to(base, np.asarray(pts).shape[:-1] + (4,)).copy()

    def a_field(pts):
        return np.zeros(np.asarray(pts).shape[:-1] + (4, 4))

    return Candidate(chart, a_field, psi, name="flat_parallel")


def build_s2_skew_killing(base_spinor=(1.0, 0.0), radius=0.5, sign=1.0,
                          step=0.01, flat_tol=1e-2, check_grid=5, h=1e-3):
    """Skew Killing spinor on the round 2-sphere with A = sign * J.

    Measures the curvature of the modified connection first and refuses when
    it exceeds ``flat_tol`` (only Gauss curvature 4, radius 1/2, is flat);
    then parallel-transports ``base_spinor`` from the chart center.
    """
    chart = sphere_chart(radius, h=h)
    jmat = sign * J_STD2

    def a_field(pts):
        return np.broadcast_to(jmat, np.asarray(pts).shape[:-1] + (2, 2)).copy()

    base = np.asarray(base_spinor, dtype=complex)
    base = base / np.linalg.norm(base)
    cand = Candidate(chart, a_field, None, name=f"s2_r{radius:g}")
    flatness = modified_flatness_residual(cand, chart.grid(check_grid))
    if flatness > flat_tol:
        raise ConstructionError(
            f"modified connection is not flat on the radius-{radius:g} sphere: "
            f"curvature norm {flatness:.3e} (flat only at Gauss curvature 4)")
    psi = LineTransportField(chart, modified_connection_matrices(cand),
                             chart.center(), base, step=step)
    cand.psi = psi
    cand.meta["flatness"] = flatness
    return cand


def _embed_pos(vals2):
    """(a, b) -> positive chirality spinor (a, 0, 0, b) of the 4-dim gauge."""
    out = np.zeros(vals2.shape[:-1] + (4,), dtype=complex)
    out[..., 0] = vals2[..., 0]
    out[..., 3] = vals2[..., 1]
    return out


def build_product_3d(cand3, t_interval=(-0.6, 0.6), tol=5e-5, check_grid=3):
    """Lift a 3-dimensional candidate to N x R via psi = phi + dt . phi.

    The input must satisfy the 3-dimensional skew Killing equation to ``tol``
    on a coarse grid.  The output spinor has equal chirality norms and
    xi = -d_t; A is extended by zero on the line factor.
    """
    if cand3.chart.dim != 3:
        raise ConstructionError("build_product_3d needs a 3-dimensional candidate")
    worst = float(np.max([np.max(skew_killing_residual(cand3, x))
                          for x in cand3.chart.grid(check_grid)]))
    if worst > tol:
        raise ConstructionError(
            f"input candidate fails the 3-dim skew Killing equation: {worst:.3e} > {tol:g}")
    chart4 = _block_product_chart(
        MetricChart(cand3.chart.name, 3, cand3.chart.domain, cand3.chart.metric,
                    cand3.chart.metric_d1, cand3.chart.metric_d2, h=cand3.chart.h,
                    extras=cand3.chart.extras),
        [t_interval], cand3.chart.name + "_x_t", h=cand3.chart.h)
    g4 = REP4.gamma[3]
    psi3, a3 = cand3.psi, cand3.A

    def psi(pts):
        emb = _embed_pos(psi3(np.asarray(pts)[..., :3]))
        return (emb + np.einsum("ab,...b->...a", g4, emb)) / np.sqrt(2.0)

    def a_field(pts):
        pts = np.asarray(pts)
        out = np.zeros(pts.shape[:-1] + (4, 4))
        out[..., :3, :3] = a3(pts[..., :3])
        return out

    return Candidate(chart4, a_field, psi, name=cand3.name + "_x_t",
                     meta={"kind": "product3d", "input_k0": worst})


def extend_to_3d(cand2, interval=(-0.6, 0.6)):
    """Trivial extension of a 2-dim sphere candidate to S^2 x R (A -> A + 0)."""
    if cand2.chart.dim != 2:
        raise ConstructionError("extend_to_3d needs a 2-dimensional candidate")
    chart3 = _block_product_chart(cand2.chart, [interval],
                                  cand2.chart.name + "_x_s", h=cand2.chart.h)
    psi2, a2 = cand2.psi, cand2.A

    def psi(pts):
        return psi2(np.asarray(pts)[..., :2])

    def a_field(pts):
        pts = np.asarray(pts)
        out = np.zeros(pts.shape[:-1] + (3, 3))
        out[..., :2, :2] = a2(pts[..., :2])
        return out

    return Candidate(chart3, a_field, psi, name=cand2.name + "_x_s")


def build_s2xr2(mode="plus", combo="aeta_nonzero", base_spinor=(1.0, 0.0),
                step=0.01, h=1e-3):
    """Tensor-product candidates on S^2(4) x R^2 with A = +-(J + 0).

    ``mode`` selects the sign of the Killing map; the constant factor spinor
    is taken positive-chirality for ``plus`` and negative for ``minus``.
    ``combo = "aeta_zero"`` adds the parallel-vector term Y . psi_bar with
    Y = e_3, which makes xi = -Y and A eta = 0.
    """
    if mode not in ("plus", "minus") or combo not in ("aeta_nonzero", "aeta_zero"):
        raise ConstructionError(f"unknown mode/combo: {mode}/{combo}")
    sign = 1.0 if mode == "plus" else -1.0
    cand2 = build_s2_skew_killing(base_spinor, radius=0.5, sign=1.0, step=step, h=h)
    chart = s2k4_product_chart(h=h)
    sigma = np.array([1.0, 0.0], dtype=complex) if mode == "plus" \
        else np.array([0.0, 1.0], dtype=complex)
    psi2 = cand2.psi
    post = np.eye(4, dtype=complex)
    if combo == "aeta_zero":
        post = (np.eye(4) + REP4.gamma[2] @ REP4.volume_c) / np.sqrt(2.0)

    def psi(pts):
        phi = psi2(np.asarray(pts)[..., :2])
        full = np.einsum("...i,j->...ij", phi, sigma).reshape(phi.shape[:-1] + (4,))
        return np.einsum("ab,...b->...a", post, full)

    amat = np.zeros((4, 4))
    amat[:2, :2] = sign * J_STD2

    def a_field(pts):
        return np.broadcast_to(amat, np.asarray(pts).shape[:-1] + (4, 4)).copy()

    return Candidate(chart, a_field, psi, name=f"s2xr2_{mode}_{combo}",
                     meta={"kind": "s2xr2", "mode": mode, "combo": combo})


# ----------------------------------------------------------------------------
# diagnostics and corruption
# ----------------------------------------------------------------------------

def transport_loop_residual(cand, corner=None, extents=(0.05, 0.07), step=0.005):
    """Holonomy defect of the modified connection around a coordinate rectangle.

    Transports the candidate's spinor value at ``corner`` around the
    rectangle spanned by the first two coordinates and returns the norm of
    the difference after the round trip; for a flat modified connection this
    is O(area * curvature residual).
    """
    conn = modified_connection_matrices(cand)
    x0 = cand.chart.center() if corner is None else np.asarray(corner, dtype=float)
    v0 = cand.psi(x0)
    dx, dy = extents
    v = v0
    x = x0.copy()
    for axis, delta in ((0, dx), (1, dy), (0, -dx), (1, -dy)):
        v = transport_segment(conn, x, axis, x[axis], v, x[axis] + delta, step)
        x[axis] += delta
    return float(np.linalg.norm(v - v0))


def scan_sphere_flatness(radii, check_grid=5, h=1e-3):
    """(radius, modified-connection curvature norm) table for the J-construction."""
    rows = []
    for r in radii:
        chart = sphere_chart(float(r), h=h)

        def a_field(pts):
            return np.broadcast_to(J_STD2, np.asarray(pts).shape[:-1] + (2, 2)).copy()

        cand = Candidate(chart, a_field, None, name="scan")
        rows.append((float(r), modified_flatness_residual(cand, chart.grid(check_grid))))
    return rows


def corrupt_candidate(cand, a_scale=None, psi_eps=None):
    """Deliberately broken copy: scaled A and/or perturbed psi (non-vacuity)."""
    out = Candidate(cand.chart, cand.A, cand.psi,
                    normalized=cand.normalized and psi_eps is None,
                    name=cand.name + "~corrupt", meta=dict(cand.meta))
    if a_scale is not None:
        a_old = out.A
        out.A = lambda pts, _s=float(a_scale), _a=a_old: _s * _a(pts)
    if psi_eps is not None:
        psi_old = out.psi
        eps = float(psi_eps)

        def psi(pts, _p=psi_old, _e=eps):
            vals = _p(pts).copy()
            x = np.asarray(pts)
            vals[..., 0] += _e * np.cos(3.0 * x[..., 0])
            return vals

        out.psi = psi
    return out
