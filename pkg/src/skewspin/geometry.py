"""Chart-based Riemannian computation: frames, curvature, spin connection.

A chart is a coordinate box with a metric callback; everything else (frame,
Christoffel symbols, curvature, spin connection, covariant derivatives of
spinor / tensor fields) is derived from it, either from analytic derivative
callbacks or by central finite differences with step ``chart.h``.

Index conventions (all arrays broadcast over leading point dimensions):

* ``g[..., a, b]`` metric components, ``dg[..., c, a, b] = d_c g_ab``,
  ``d2g[..., c, e, a, b] = d_c d_e g_ab``.
* ``gam[..., a, b, c]`` Christoffel symbols ``Gamma^a_bc``.
* ``E[..., a, i]`` coordinate components of the orthonormal frame vector
  ``e_i`` (column ``i``); built by Gram-Schmidt on the coordinate basis in
  order (Cholesky), with the last two columns swapped when the chart declares
  the coordinates negatively oriented, so the frame is always positively
  oriented.  Spinor components are only meaningful in this frame gauge.
* ``theta[..., c, i, j] = g(nabla_{d_c} e_i, e_j)`` spin-connection
  coefficients in coordinate directions.
* ``rframe[..., i, j, k, l] = g(R(e_i, e_j) e_k, e_l)`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .cliffalg import GammaRep


class ChartError(ValueError):
    """Raised for bad chart data (non-positive metric, point off domain)."""


@dataclass
class MetricChart:
    """Coordinate box with a metric and optional analytic derivatives.

    ``metric`` maps points of shape (..., dim) to (..., dim, dim); the
    optional ``metric_d1`` / ``metric_d2`` callbacks return the derivative
    arrays described in the module docstring.  Missing derivatives fall back
    to central differences with step ``h``, and the usable domain shrinks by
    ``2 h`` for differentiated quantities.
    """

    name: str
    dim: int
    domain: tuple
    metric: Callable
    metric_d1: Optional[Callable] = None
    metric_d2: Optional[Callable] = None
    orientation: int = 1
    h: float = 1e-3
    extras: dict = field(default_factory=dict)

    def g(self, x):
        return self.metric(np.asarray(x, dtype=float))

    def dg(self, x):
        x = np.asarray(x, dtype=float)
        if self.metric_d1 is not None:
            return self.metric_d1(x)
        return _fd_stack(self.metric, x, self.dim, self.h)

    def d2g(self, x):
        x = np.asarray(x, dtype=float)
        if self.metric_d2 is not None:
            return self.metric_d2(x)
        return _fd_stack(self.dg, x, self.dim, self.h)

    def shrunk_domain(self, margin=None):
        m = 2.0 * self.h if margin is None else margin
        return tuple((lo + m, hi - m) for (lo, hi) in self.domain)

    def grid(self, counts, margin=None):
        """Uniform interior lattice, shape (prod(counts), dim), C-order."""
        if np.isscalar(counts):
            counts = (int(counts),) * self.dim
        box = self.shrunk_domain(margin)
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(box, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def center(self):
        return np.array([(lo + hi) / 2.0 for lo, hi in self.domain])

    def contains(self, x, margin=0.0):
        x = np.asarray(x)
        lo = np.array([d[0] for d in self.domain]) + margin
        hi = np.array([d[1] for d in self.domain]) - margin
        return bool(np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12))

    def with_orientation(self, orientation):
        return replace(self, orientation=int(orientation))


def _fd_stack(fn, x, dim, h):
    """Central-difference derivatives of ``fn`` along each coordinate axis.

    Returns an array with a new axis of length ``dim`` inserted after the
    point dimensions: ``out[..., c, :] = d_c fn``.
    """
    x = np.asarray(x, dtype=float)
    parts = []
    for c in range(dim):
        dx = np.zeros(dim)
        dx[c] = h
        parts.append((fn(x + dx) - fn(x - dx)) / (2.0 * h))
    return np.stack(parts, axis=x.ndim - 1)


def field_partials(fn, x, dim, h):
    """d_c of an arbitrary point-function field, same layout as _fd_stack."""
    return _fd_stack(fn, x, dim, h)


# ----------------------------------------------------------------------------
# frame and connection
# ----------------------------------------------------------------------------

def frame_at(chart, x, with_d1=False):
    """Orthonormal frame E (and optionally its coordinate derivatives).

    Gram-Schmidt on the coordinate basis in order, realized through the
    Cholesky factor: ``E = inv(L)^T`` for ``g = L L^T``.  If the chart
    declares the coordinates negatively oriented the last two columns are
    swapped so that the returned frame is positively oriented.
    """
    g = chart.g(x)
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ChartError(f"metric not positive definite near {np.asarray(x)!r}") from exc
    E = np.linalg.inv(np.swapaxes(low, -1, -2))
    if not with_d1:
        return _orient(chart, E)
    dg = chart.dg(x)
    low_inv = np.linalg.inv(low)
    m = np.einsum("...xa,...cab,...yb->...cxy", low_inv, dg, low_inv)
    s = np.tril(m, -1) + 0.5 * _diag_only(m)
    dE = -np.einsum("...ai,...cji->...caj", E, s)  # -E S_c^T
    return _orient(chart, E), _orient(chart, dE)


def _diag_only(m):
    d = np.zeros_like(m)
    idx = np.arange(m.shape[-1])
    d[..., idx, idx] = m[..., idx, idx]
    return d


def _orient(chart, arr):
    if chart.orientation >= 0:
        return arr
    out = arr.copy()
    out[..., [-2, -1]] = out[..., [-1, -2]]
    return out


def christoffels(chart, x):
    """Gamma^a_bc from the metric and its first derivatives."""
    g = chart.g(x)
    dg = chart.dg(x)
    ginv = np.linalg.inv(g)
    # 2 Gamma_{d,bc} = d_b g_dc + d_c g_bd - d_d g_bc
    lower = np.einsum("...bdc->...dbc", dg) + np.einsum("...cbd->...dbc", dg) - dg
    return 0.5 * np.einsum("...ad,...dbc->...abc", ginv, lower)


def dchristoffels(chart, x):
    """d_e Gamma^a_bc, analytic when second metric derivatives are available."""
    if chart.metric_d1 is not None or chart.metric_d2 is not None:
        g = chart.g(x)
        dg = chart.dg(x)
        d2g = chart.d2g(x)
        ginv = np.linalg.inv(g)
        dginv = -np.einsum("...af,...cfh,...hd->...cad", ginv, dg, ginv)
        lower = np.einsum("...bdc->...dbc", dg) + np.einsum("...cbd->...dbc", dg) - dg
        dlower = (np.einsum("...ebdc->...edbc", d2g)
                  + np.einsum("...ecbd->...edbc", d2g)
                  - d2g)
        return (0.5 * np.einsum("...ead,...dbc->...eabc", dginv, lower)
                + 0.5 * np.einsum("...ad,...edbc->...eabc", ginv, dlower))
    return _fd_stack(lambda p: christoffels(chart, p), x, chart.dim, chart.h)


def riemann_coord(chart, x):
    """R^a_bcd in coordinates: R(d_c, d_d) d_b = R^a_bcd d_a."""
    gam = christoffels(chart, x)
    dgam = dchristoffels(chart, x)
    quad = np.einsum("...ace,...edb->...abcd", gam, gam)
    return (np.einsum("...cadb->...abcd", dgam) - np.einsum("...dacb->...abcd", dgam)
            + quad - np.einsum("...abdc->...abcd", quad))


@dataclass
class CurvaturePack:
    """Frame-component curvature data at one point (or a batch of points)."""

    riemann: np.ndarray  # (..., i, j, k, l) = g(R(e_i,e_j)e_k, e_l)
    ricci: np.ndarray    # (..., i, j)
    scalar: np.ndarray   # (...)

    def sectional(self, u, v):
        """K(u, v) = g(R(u, v) v, u) for an orthonormal pair in frame comps."""
        return np.einsum("...ijkl,...i,...j,...k,...l->...", self.riemann, u, v, v, u)

    def ricci_vec(self, v):
        return np.einsum("...ij,...j->...i", self.ricci, v)


def curvature(chart, x, frame=None):
    """CurvaturePack in frame components at ``x``."""
    r = riemann_coord(chart, x)
    g = chart.g(x)
    E = frame_at(chart, x) if frame is None else frame
    rlow = np.einsum("...ea,...abcd->...ebcd", g, r)  # R_{e b c d} = g(R(c,d)b, e)
    rframe = np.einsum("...ebcd,...ci,...dj,...bk,...el->...ijkl", rlow, E, E, E, E)
    ric = np.einsum("...kijk->...ij", rframe)
    return CurvaturePack(riemann=rframe, ricci=ric, scalar=np.einsum("...ii->...", ric))


def theta_coord(chart, x):
    """theta[..., c, i, j] = g(nabla_{d_c} e_i, e_j); antisymmetric in (i, j)."""
    E, dE = frame_at(chart, x, with_d1=True)
    g = chart.g(x)
    gam = christoffels(chart, x)
    nab = dE + np.einsum("...acb,...bi->...cai", gam, E)
    return np.einsum("...cai,...ab,...bj->...cij", nab, g, E)


class PointGeometry:
    """Lazy per-point cache of frame, connection, and curvature data."""

    def __init__(self, chart, x):
        self.chart = chart
        self.x = np.asarray(x, dtype=float)
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def g(self):
        return self._get("g", lambda: self.chart.g(self.x))

    @property
    def frame(self):
        return self._get("frame", lambda: frame_at(self.chart, self.x))

    @property
    def coframe(self):
        return self._get("coframe", lambda: np.linalg.inv(self.frame))

    @property
    def gamma(self):
        return self._get("gamma", lambda: christoffels(self.chart, self.x))

    @property
    def theta(self):
        return self._get("theta", lambda: theta_coord(self.chart, self.x))

    @property
    def theta_frame(self):
        # theta_frame[k, i, j] = theta_ij(e_k)
        return self._get(
            "theta_frame", lambda: np.einsum("ck,cij->kij", self.frame, self.theta))

    @property
    def curv(self):
        return self._get("curv", lambda: curvature(self.chart, self.x, frame=self.frame))


# ----------------------------------------------------------------------------
# spin connection and covariant derivatives
# ----------------------------------------------------------------------------

def spin_matrices(rep: GammaRep, theta):
    """Connection matrices 1/4 sum_ij theta[..., c, i, j] g_i g_j per direction c."""
    return 0.25 * np.einsum("...cij,ijab->...cab", theta, rep.gamma_pairs)


def spinor_cov_deriv_coord(chart, rep, psi_field, x, geo=None, h=None):
    """nabla_{d_c} psi for all coordinate directions c; shape (..., c, nspin)."""
    h = chart.h if h is None else h
    geo = geo or PointGeometry(chart, x)
    dpsi = _fd_stack(psi_field, x, chart.dim, h)
    om = spin_matrices(rep, geo.theta)
    return dpsi + np.einsum("...cab,...b->...ca", om, psi_field(x))


def spinor_cov_deriv(chart, rep, psi_field, x, direction, geo=None, h=None):
    """nabla_X psi for X given in *frame* components (a single frame index or vector)."""
    geo = geo or PointGeometry(chart, x)
    dc = spinor_cov_deriv_coord(chart, rep, psi_field, x, geo=geo, h=h)
    xc = _as_coord_vector(geo, direction)
    return np.einsum("...c,...ca->...a", xc, dc)


def _as_coord_vector(geo, direction):
    """Frame-component direction -> coordinate components via the frame."""
    if np.isscalar(direction):
        return geo.frame[..., :, int(direction)]
    return np.einsum("...ai,...i->...a", geo.frame, np.asarray(direction, dtype=float))


def vector_cov_deriv_coord(chart, vec_field, x, geo=None, h=None):
    """nabla_{d_c} of a frame-component vector field; shape (..., c, i)."""
    h = chart.h if h is None else h
    geo = geo or PointGeometry(chart, x)
    dv = _fd_stack(vec_field, x, chart.dim, h)
    return dv + np.einsum("...cij,...i->...cj", geo.theta, vec_field(x))


def endo_cov_deriv_coord(chart, endo_field, x, geo=None, h=None):
    """nabla_{d_c} of a frame-component endomorphism field; shape (..., c, i, j)."""
    h = chart.h if h is None else h
    geo = geo or PointGeometry(chart, x)
    dm = _fd_stack(endo_field, x, chart.dim, h)
    m = endo_field(x)
    th = geo.theta
    # (nabla_c M)_ij = d_c M_ij + (Theta_c^T M)_ij - (M Theta_c^T)_ij
    return dm + np.einsum("...cki,...kj->...cij", th, m) - np.einsum("...cjk,...ik->...cij", th, m)


def scalar_dirderiv_frame(chart, scal_field, x, geo=None, h=None):
    """e_k(f) for all frame directions k; shape (..., k)."""
    h = chart.h if h is None else h
    geo = geo or PointGeometry(chart, x)
    df = _fd_stack(scal_field, x, chart.dim, h)
    return np.einsum("...ck,...c->...k", geo.frame, df)


def spinor_curvature(chart, rep, x, i, j, psi, geo=None):
    """R_{e_i, e_j} psi from the Riemann tensor (frame components)."""
    geo = geo or PointGeometry(chart, x)
    om = geo.curv.riemann[..., i, j, :, :]
    mat = 0.25 * np.einsum("...kl,klab->...ab", om, rep.gamma_pairs)
    return np.einsum("...ab,...b->...a", mat, psi)


def spinor_curvature_commutator(chart, rep, psi_field, x, i, j, h=None):
    """R_{e_i,e_j} psi by finite-difference commutator of covariant derivatives.

    Independent oracle for :func:`spinor_curvature`; costs two nested FD layers.
    """
    h = chart.h if h is None else h

    def nab(k):
        def fld(p):
            p = np.asarray(p)
            geo_p = PointGeometry(chart, p)
            return spinor_cov_deriv(chart, rep, psi_field, p, k, geo=geo_p, h=h)
        return fld

    geo = PointGeometry(chart, x)
    didj = spinor_cov_deriv(chart, rep, nab(j), x, i, geo=geo, h=h)
    djdi = spinor_cov_deriv(chart, rep, nab(i), x, j, geo=geo, h=h)
    # [e_i, e_j] in frame components: nabla_{e_i} e_j - nabla_{e_j} e_i
    th = geo.theta_frame
    bracket = th[i, j, :] - th[j, i, :]
    dbr = spinor_cov_deriv(chart, rep, psi_field, x, bracket, geo=geo, h=h)
    return didj - djdi - dbr


def modified_connection_batch(chart, rep, a_field):
    """Batched connection matrices of ``hat-nabla = nabla - A . (Clifford)``.

    Returns a callback mapping points (..., dim) to matrices
    (..., c, nspin, nspin) with ``hat-nabla_{d_c} = d_c + M_c`` on spinor
    components in the frame gauge.
    """

    def conn(pts):
        pts = np.asarray(pts, dtype=float)
        om = spin_matrices(rep, theta_coord(chart, pts))
        a = a_field(pts)
        cof = np.linalg.inv(frame_at(chart, pts))
        av = np.einsum("...ij,...jc->...ci", a, cof)
        return om - rep.vector_matrix(av)

    return conn


# ----------------------------------------------------------------------------
# path-ordered transport along axis-parallel polylines
# ----------------------------------------------------------------------------

class LineTransportField:
    """Field defined by transporting a base value along axis-parallel polylines.

    The connection callback maps a batch of points (B, dim) to a stack of
    matrices (B, dim, N, N), one per coordinate axis, and the field solves
    ``d psi / d x_c = -M_c(x) psi`` along each segment, axes in increasing
    order from ``base_point``.  Values are cached per line so that grid
    sweeps and finite-difference stencils integrate each line once,
    incrementally; segment integration is classical RK4 with all matrix
    evaluations batched per segment.  For a flat connection the result is
    path-independent up to the integration error.
    """

    def __init__(self, chart, conn, base_point, base_value, step=0.02, decimals=10):
        self.chart = chart
        self.conn = conn
        self.base = np.asarray(base_point, dtype=float)
        self.base_value = np.asarray(base_value, dtype=complex)
        self.step = float(step)
        self.decimals = decimals
        self._lines = {}

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            return self._eval(pts)
        flat = pts.reshape(-1, pts.shape[-1])
        out = np.stack([self._eval(p) for p in flat])
        return out.reshape(pts.shape[:-1] + self.base_value.shape)

    def _eval(self, x):
        return self._value(np.asarray(x, dtype=float), self.chart.dim - 1)

    def _value(self, x, level):
        if level < 0:
            return self.base_value
        t = x[level]
        if abs(t - self.base[level]) < 1e-15:
            return self._value(x, level - 1)
        key = (level,) + tuple(np.round(x[:level], self.decimals))
        line = self._lines.get(key)
        if line is None:
            anchor = x.copy()
            anchor[level] = self.base[level]
            v0 = self._value(anchor, level - 1)
            line = ([self.base[level]], [v0])
            self._lines[key] = line
        ts, vs = line
        tr = round(t, self.decimals)
        pos = bisect_left(ts, tr)
        if pos < len(ts) and ts[pos] == tr:
            return vs[pos]
        t0, v0 = self._nearest_start(ts, vs, tr)
        v = self._integrate(x, level, t0, v0, t)
        pos = bisect_left(ts, tr)
        ts.insert(pos, tr)
        vs.insert(pos, v)
        return v

    def _nearest_start(self, ts, vs, t):
        """Closest cached parameter on the line; the flow is consistent along it."""
        pos = bisect_left(ts, t)
        best = None
        for cand in (pos - 1, pos):
            if 0 <= cand < len(ts):
                if best is None or abs(ts[cand] - t) < abs(ts[best] - t):
                    best = cand
        return ts[best], vs[best]

    def _integrate(self, x, level, t0, v0, t1):
        return transport_segment(self.conn, x, level, t0, v0, t1, self.step)


def transport_segment(conn, x, axis, t0, v0, t1, step):
    """RK4 transport of ``v0`` along coordinate ``axis`` from t0 to t1.

    Solves d v / d t = -M_axis(x(t)) v with all connection matrices for the
    segment evaluated in one batched call.
    """
    n = max(1, int(np.ceil(abs(t1 - t0) / step)))
    hstep = (t1 - t0) / n
    nodes = t0 + hstep * np.arange(n + 1)
    mids = nodes[:-1] + 0.5 * hstep
    pts = np.broadcast_to(x, (2 * n + 1, x.size)).copy()
    pts[: n + 1, axis] = nodes
    pts[n + 1:, axis] = mids
    mats = -np.asarray(conn(pts))[:, axis]
    v = v0
    for k in range(n):
        m0, m1, mh = mats[k], mats[k + 1], mats[n + 1 + k]
        k1 = m0 @ v
        k2 = mh @ (v + 0.5 * hstep * k1)
        k3 = mh @ (v + 0.5 * hstep * k2)
        k4 = m1 @ (v + hstep * k3)
        v = v + (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v
