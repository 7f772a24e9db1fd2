"""Doubly warped products over Berger-sphere flows, and candidates on them.

Pipeline: ``integrate_dwp`` solves the profile system

    (sigma^2)' = -2 rho tau_hat / sqrt(1 - 4 rho^2)
    rho'       =  rho (K_hat - 2 rho^2 tau_hat^2 / sigma^2) / (sigma^2)'

with classical fixed-step RK4 in the unknowns (rho, sigma^2);
``berger_flow`` realizes a minimal Riemannian flow with constants
(tau_hat, K_hat) = (r/s^2, 4/s^2) on a Berger 3-sphere chart; and
``build_dwp_candidate`` assembles the 4-metric
``dt^2 + rho(t)^2 g_eta + sigma(t)^2 g_perp``, the adapted frame and Killing
map, and a unit section of the rank-1 spinor line bundle cut out by
``J(X) . phi_minus = i X . phi_minus`` and ``phi_plus = xi . phi_minus``,
whose modified-connection phase is integrated along polylines.

Sign conventions frozen here (validated by the test suite): the flow chart
uses Euler-type coordinates (theta, phi, psi) with the Hopf direction last
and the hermitian structure J(X) = cross(eta, X) w.r.t. the frame volume;
the product chart (t, theta, phi, psi) is positively oriented and the
adapted frame (s1, s2, s3, s4) is completed so that it is *negatively*
oriented, which is the orientation class compatible with negative-chirality
spinor solutions in this gauge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .cliffalg import REP4, herm
from .fields import Candidate
from .geometry import (LineTransportField, MetricChart, PointGeometry,
                       frame_at, modified_connection_batch)
from .constructors import ConstructionError


class GaugeError(RuntimeError):
    """The line-bundle conditions degenerated numerically."""


# ----------------------------------------------------------------------------
# profile ODE
# ----------------------------------------------------------------------------

def _rhs(state, k_hat, tau_hat):
    """(rho', u') for u = sigma^2; NaN outside the admissible region."""
    rho, u = state
    disc = 1.0 - 4.0 * rho * rho
    if disc <= 0.0 or u <= 0.0 or rho <= 0.0:
        return np.array([np.nan, np.nan])
    f = np.sqrt(disc)
    du = -2.0 * rho * tau_hat / f
    if abs(du) < 1e-14:
        return np.array([np.nan, np.nan])
    drho = rho * (k_hat - 2.0 * rho * rho * tau_hat * tau_hat / u) / du
    return np.array([drho, du])


def _rhs_second(state, k_hat, tau_hat):
    """(rho'', u'') obtained by differentiating the right-hand side."""
    rho, u = state
    f = np.sqrt(1.0 - 4.0 * rho * rho)
    drho, du = _rhs(state, k_hat, tau_hat)
    dG = -2.0 * tau_hat / f ** 3                        # dG/drho
    num = k_hat - 2.0 * rho * rho * tau_hat ** 2 / u
    dF_rho = (k_hat - 6.0 * rho * rho * tau_hat ** 2 / u) / du - drho * dG / du
    dF_u = rho * (2.0 * rho * rho * tau_hat ** 2 / u ** 2) / du
    d2rho = dF_rho * drho + dF_u * du
    d2u = dG * drho
    return np.array([d2rho, d2u]), num


@dataclass
class DwpProfile:
    """Sampled solution of the profile system plus the flow constants."""

    K_hat: float
    tau_hat: float
    t: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    exit: str = "completed"
    _spl_rho: object = field(default=None, repr=False)
    _spl_u: object = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.t) >= 2:
            u = self.sigma ** 2
            drho = np.empty_like(self.t)
            du = np.empty_like(self.t)
            for k in range(len(self.t)):
                drho[k], du[k] = _rhs((self.rho[k], u[k]), self.K_hat, self.tau_hat)
            object.__setattr__(self, "_spl_rho", CubicHermiteSpline(self.t, self.rho, drho))
            object.__setattr__(self, "_spl_u", CubicHermiteSpline(self.t, u, du))

    # derived samples -------------------------------------------------------
    @property
    def lambda_(self):
        return -self.drho(self.t) / self.rho

    @property
    def mu(self):
        u = self.sigma ** 2
        return -self.du(self.t) / (2.0 * u)

    @property
    def tau(self):
        return self.rho * self.tau_hat / self.sigma ** 2

    @property
    def K(self):
        return self.K_hat / self.sigma ** 2

    # interpolation ---------------------------------------------------------
    def rho_of(self, t):
        return self._spl_rho(t)

    def u_of(self, t):
        return self._spl_u(t)

    def drho(self, t):
        rho = self._spl_rho(t)
        u = self._spl_u(t)
        f = np.sqrt(1.0 - 4.0 * rho ** 2)
        du = -2.0 * rho * self.tau_hat / f
        return rho * (self.K_hat - 2.0 * rho ** 2 * self.tau_hat ** 2 / u) / du

    def du(self, t):
        rho = self._spl_rho(t)
        return -2.0 * rho * self.tau_hat / np.sqrt(1.0 - 4.0 * rho ** 2)

    def second(self, t):
        """(rho'', u'') along the profile (vectorized)."""
        rho = np.asarray(self._spl_rho(t))
        u = np.asarray(self._spl_u(t))
        out_r = np.empty_like(rho, dtype=float)
        out_u = np.empty_like(rho, dtype=float)
        it = np.nditer(rho, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            (out_r[idx], out_u[idx]), _ = _rhs_second(
                (rho[idx], u[idx]), self.K_hat, self.tau_hat)
        return out_r, out_u

    def span(self):
        return float(self.t[0]), float(self.t[-1])

    def to_json(self):
        return json.dumps({
            "t": self.t.tolist(),
            "rho": self.rho.tolist(),
            "sigma": self.sigma.tolist(),
            "lambda": self.lambda_.tolist(),
            "mu": self.mu.tolist(),
            "tau": self.tau.tolist(),
            "K": self.K.tolist(),
            "K_hat": self.K_hat,
            "tau_hat": self.tau_hat,
            "exit": self.exit,
        }, indent=2)


def integrate_dwp(k_hat, tau_hat, rho0, sigma0, t_span=(0.0, 0.5), step=1e-3,
                  delta=0.02, sigma2_floor=1e-3):
    """RK4 integration of the profile system in the unknowns (rho, sigma^2).

    Stops early (with an exit status) when rho leaves (delta, 1/2 - delta)
    or sigma^2 crosses the floor; the singular case rho * tau_hat = 0 is
    excluded by the preconditions.
    """
    if not (0.0 < rho0 < 0.5):
        raise ValueError("rho0 must lie in (0, 1/2)")
    if sigma0 <= 0.0 or tau_hat == 0.0:
        raise ValueError("need sigma0 > 0 and tau_hat != 0")
    t0, t1 = map(float, t_span)
    hstep = step if t1 >= t0 else -step
    ts = [t0]
    ys = [np.array([rho0, sigma0 ** 2])]
    status = "completed"
    t = t0
    y = ys[0].copy()
    while (t1 - t) * np.sign(hstep) > 1e-14:
        hcur = hstep if abs(t1 - t) >= abs(hstep) else (t1 - t)
        with np.errstate(invalid="ignore", divide="ignore"):
            k1 = _rhs(y, k_hat, tau_hat)
            k2 = _rhs(y + 0.5 * hcur * k1, k_hat, tau_hat)
            k3 = _rhs(y + 0.5 * hcur * k2, k_hat, tau_hat)
            k4 = _rhs(y + hcur * k3, k_hat, tau_hat)
            ynew = y + (hcur / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = not np.all(np.isfinite(ynew))
        if bad or not (delta < ynew[0] < 0.5 - delta) or ynew[1] < sigma2_floor:
            if bad or ynew[1] < sigma2_floor:
                status = "sigma_zero" if not bad else "singular"
            elif ynew[0] <= delta:
                status = "rho_lower"
            else:
                status = "rho_upper"
            break
        t = t + hcur
        y = ynew
        ts.append(t)
        ys.append(y.copy())
    ys = np.array(ys)
    return DwpProfile(K_hat=float(k_hat), tau_hat=float(tau_hat),
                      t=np.array(ts), rho=ys[:, 0], sigma=np.sqrt(ys[:, 1]),
                      exit=status)


def sol_residuals(profile):
    """Independent residuals of the profile equations from the samples alone.

    Differentiates the stored (rho, sigma^2) arrays with 5-point central
    stencils (no use of the right-hand side), and evaluates both equations
    at the interior points of the uniform part of the grid.
    """
    t, rho = profile.t, profile.rho
    u = profile.sigma ** 2
    dt = np.diff(t)
    n = len(t)
    if n < 6 or np.max(np.abs(dt - dt[0])) > 1e-10 * abs(dt[0]):
        nu = n - 1
        while nu > 5 and abs(dt[nu - 1] - dt[0]) > 1e-10 * abs(dt[0]):
            nu -= 1
        t, rho, u = t[:nu], rho[:nu], u[:nu]
        n = nu
    h = t[1] - t[0]

    def d5(arr):
        return (arr[:-4] - 8 * arr[1:-3] + 8 * arr[3:-1] - arr[4:]) / (12.0 * h)

    rho_i, u_i = rho[2:-2], u[2:-2]
    drho, du = d5(rho), d5(u)
    f = np.sqrt(1.0 - 4.0 * rho_i ** 2)
    res1 = du + 2.0 * rho_i * profile.tau_hat / f
    res2 = du * drho / rho_i - profile.K_hat + 2.0 * rho_i ** 2 * profile.tau_hat ** 2 / u_i
    return float(np.max(np.abs(res1))), float(np.max(np.abs(res2)))


# ----------------------------------------------------------------------------
# Berger-sphere minimal flows
# ----------------------------------------------------------------------------

_BERGER_BOX = ((0.9, 1.8), (0.2, 1.0), (0.2, 1.0))


def berger_chart(r=1.0, s=1.0, box=_BERGER_BOX, h=1e-3):
    """Berger 3-sphere in Euler-type coordinates (theta, phi, psi).

    Metric ``b^2 (dtheta^2 + sin^2 theta dphi^2) + a^2 (dpsi + cos theta dphi)^2``
    with a = r/2, b = s/2; r = s = 1 is the unit round sphere and the unit
    Killing field of the flow is ``(1/a) d_psi``.
    """
    a2, b2 = (r / 2.0) ** 2, (s / 2.0) ** 2

    def g(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = b2
        out[..., 1, 1] = b2 * np.sin(th) ** 2 + a2 * np.cos(th) ** 2
        out[..., 2, 2] = a2
        out[..., 1, 2] = out[..., 2, 1] = a2 * np.cos(th)
        return out

    def d1(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (3, 3, 3))
        out[..., 0, 1, 1] = (b2 - a2) * np.sin(2.0 * th)
        out[..., 0, 1, 2] = out[..., 0, 2, 1] = -a2 * np.sin(th)
        return out

    def d2(x):
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (3, 3, 3, 3))
        out[..., 0, 0, 1, 1] = 2.0 * (b2 - a2) * np.cos(2.0 * th)
        out[..., 0, 0, 1, 2] = out[..., 0, 0, 2, 1] = -a2 * np.cos(th)
        return out

    return MetricChart(f"berger_r{r:g}_s{s:g}", 3, box, g, d1, d2, h=h,
                       extras={"r": r, "s": s})


@dataclass
class FlowData:
    """A minimal Riemannian flow chart with measured constants.

    ``eta_coord`` are the coordinate components of the unit Killing field;
    ``tau_hat`` and ``K_hat`` are measured numerically (rotation speed of
    the flow and base Gauss curvature via the submersion correction + 3 tau^2).
    """

    r: float
    s: float
    chart: MetricChart
    eta_coord: np.ndarray
    tau_hat: float
    K_hat: float
    checks: dict


def _cross_frame(n, x):
    """Hermitian structure J(X) of the flow in orthonormal frame components.

    J(X) = cross(X, n) for the flow field n; the sign is fixed so that the
    unit round seed chart measures tau_hat = +1.
    """
    return np.cross(x, n)


def flow_measurements(chart, eta_coord, x):
    """(tau, base curvature K, residual diagnostics) of a unit-Killing flow at x."""
    geo = PointGeometry(chart, x)
    n = geo.coframe @ eta_coord
    steps = np.eye(3) * chart.h

    def eta_frame_field(p):
        cof = np.linalg.inv(frame_at(chart, np.asarray(p)))
        return np.einsum("...ij,j->...i", cof, eta_coord)

    deta = np.stack([
        (eta_frame_field(x + steps[c]) - eta_frame_field(x - steps[c])) / (2 * chart.h)
        for c in range(3)])
    nab = deta + np.einsum("cij,i->cj", geo.theta, n)          # nabla_{d_c} eta
    nab_frame = np.einsum("ck,cj->kj", geo.frame, nab)          # nabla_{e_k} eta
    killing = float(np.max(np.abs(nab_frame + nab_frame.T)))
    geodesic = float(np.linalg.norm(np.einsum("k,kj->j", n, nab_frame)))
    # horizontal unit vector: e_1 is d_theta-normalized, orthogonal to eta
    x1f = np.array([1.0, 0.0, 0.0])
    jx = _cross_frame(n, x1f)
    w = np.einsum("k,kj->j", x1f, nab_frame)
    tau = float(np.dot(w, jx))
    rot_res = float(np.linalg.norm(w - tau * jx))
    k_sec = float(geo.curv.sectional(x1f, jx))
    return {
        "tau": tau,
        "K": k_sec + 3.0 * tau * tau,
        "unit_residual": abs(float(np.dot(n, n)) - 1.0),
        "killing_residual": killing,
        "geodesic_residual": geodesic,
        "rotation_residual": rot_res,
    }


def berger_flow(r=1.0, s=1.0, flip_eta=False, h=1e-3, check_grid=3):
    """Flow data for the Berger sphere with fibre scale r and base scale s.

    Verifies numerically that the unit field rotates at constant speed
    tau_hat = r / s^2 (seed value 1) with base curvature K_hat = 4 / s^2
    (seed 4).  ``flip_eta`` reverses the flow direction, negating tau_hat.
    """
    if r <= 0 or s <= 0:
        raise ValueError("need r, s > 0")
    chart = berger_chart(r, s, h=h)
    sign = -1.0 if flip_eta else 1.0
    eta_coord = np.array([0.0, 0.0, sign / (r / 2.0)])
    taus, ks, checks = [], [], {}
    for x in chart.grid(check_grid):
        m = flow_measurements(chart, eta_coord, x)
        taus.append(m["tau"])
        ks.append(m["K"])
        for key in ("unit_residual", "killing_residual", "geodesic_residual",
                    "rotation_residual"):
            checks[key] = max(checks.get(key, 0.0), m[key])
    tau_hat = float(np.mean(taus))
    k_hat = float(np.mean(ks))
    checks["tau_spread"] = float(np.ptp(taus))
    checks["K_spread"] = float(np.ptp(ks))
    return FlowData(r=r, s=s, chart=chart, eta_coord=eta_coord,
                    tau_hat=tau_hat, K_hat=k_hat, checks=checks)


# ----------------------------------------------------------------------------
# the doubly warped product chart and candidate
# ----------------------------------------------------------------------------

def dwp_chart(profile, flow, t_margin=None, box3=None, h=1e-3, orientation=1,
              rho_bounds=(0.18, 0.44)):
    """Chart (t, theta, phi, psi) with metric dt^2 + rho^2 g_eta + sigma^2 g_perp.

    The t-interval is restricted to the longest stretch of the profile with
    rho inside ``rho_bounds``: near rho -> 0 the fibre block of the metric
    degenerates and finite-difference curvature loses accuracy (the inverse
    metric grows like rho^-2, putting curvature-level residuals above 5e-4
    at h = 1e-3 once rho drops below ~0.18), while rho -> 1/2 kills f.
    """
    a2 = (flow.r / 2.0) ** 2
    b2 = (flow.s / 2.0) ** 2
    mask = (profile.rho >= rho_bounds[0]) & (profile.rho <= rho_bounds[1])
    best = (0, -1)
    start = None
    for k, ok in enumerate(list(mask) + [False]):
        if ok and start is None:
            start = k
        elif not ok and start is not None:
            if k - start > best[1] - best[0]:
                best = (start, k - 1)
            start = None
    if best[1] < 0:
        raise ConstructionError(
            f"profile never enters the usable band rho in {rho_bounds}")
    t0, t1 = profile.t[best[0]], profile.t[best[1]]
    if t_margin is None:
        t_margin = max(0.05 * abs(t1 - t0), 3 * h)
    lo, hi = min(t0, t1) + t_margin, max(t0, t1) - t_margin
    if hi - lo < 8 * h:
        raise ConstructionError("profile span too short for a usable chart")
    box3 = _BERGER_BOX if box3 is None else box3

    def _blocks(th):
        zero = np.zeros_like(th)
        hmat = np.stack([
            np.stack([zero, zero, zero], axis=-1),
            np.stack([zero, a2 * np.cos(th) ** 2, a2 * np.cos(th)], axis=-1),
            np.stack([zero, a2 * np.cos(th), a2 * np.ones_like(th)], axis=-1),
        ], axis=-2)
        bmat = np.stack([
            np.stack([b2 * np.ones_like(th), zero, zero], axis=-1),
            np.stack([zero, b2 * np.sin(th) ** 2, zero], axis=-1),
            np.stack([zero, zero, zero], axis=-1),
        ], axis=-2)
        return hmat, bmat

    def _blocks_d1(th):
        zero = np.zeros_like(th)
        dh = np.stack([
            np.stack([zero, zero, zero], axis=-1),
            np.stack([zero, -a2 * np.sin(2 * th), -a2 * np.sin(th)], axis=-1),
            np.stack([zero, -a2 * np.sin(th), zero], axis=-1),
        ], axis=-2)
        db = np.stack([
            np.stack([zero, zero, zero], axis=-1),
            np.stack([zero, b2 * np.sin(2 * th), zero], axis=-1),
            np.stack([zero, zero, zero], axis=-1),
        ], axis=-2)
        return dh, db

    def _blocks_d2(th):
        zero = np.zeros_like(th)
        d2h = np.stack([
            np.stack([zero, zero, zero], axis=-1),
            np.stack([zero, -2 * a2 * np.cos(2 * th), -a2 * np.cos(th)], axis=-1),
            np.stack([zero, -a2 * np.cos(th), zero], axis=-1),
        ], axis=-2)
        d2b = np.stack([
            np.stack([zero, zero, zero], axis=-1),
            np.stack([zero, 2 * b2 * np.cos(2 * th), zero], axis=-1),
            np.stack([zero, zero, zero], axis=-1),
        ], axis=-2)
        return d2h, d2b

    def _pq(t):
        rho = profile.rho_of(t)
        u = profile.u_of(t)
        return rho ** 2, u

    def _dpq(t):
        rho = profile.rho_of(t)
        return 2.0 * rho * profile.drho(t), profile.du(t)

    def _d2pq(t):
        rho = profile.rho_of(t)
        drho = profile.drho(t)
        d2rho, d2u = profile.second(t)
        return 2.0 * (drho ** 2 + rho * d2rho), d2u

    def g(x):
        t, th = x[..., 0], x[..., 1]
        p, q = _pq(t)
        hmat, bmat = _blocks(th)
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[..., 0, 0] = 1.0
        out[..., 1:, 1:] = p[..., None, None] * hmat + q[..., None, None] * bmat
        return out

    def d1(x):
        t, th = x[..., 0], x[..., 1]
        p, q = _pq(t)
        dp, dq = _dpq(t)
        hmat, bmat = _blocks(th)
        dh, db = _blocks_d1(th)
        out = np.zeros(x.shape[:-1] + (4, 4, 4))
        out[..., 0, 1:, 1:] = dp[..., None, None] * hmat + dq[..., None, None] * bmat
        out[..., 1, 1:, 1:] = p[..., None, None] * dh + q[..., None, None] * db
        return out

    def d2(x):
        t, th = x[..., 0], x[..., 1]
        p, q = _pq(t)
        dp, dq = _dpq(t)
        d2p, d2q = _d2pq(t)
        hmat, bmat = _blocks(th)
        dh, db = _blocks_d1(th)
        d2h, d2b = _blocks_d2(th)
        out = np.zeros(x.shape[:-1] + (4, 4, 4, 4))
        out[..., 0, 0, 1:, 1:] = d2p[..., None, None] * hmat + d2q[..., None, None] * bmat
        mix = dp[..., None, None] * dh + dq[..., None, None] * db
        out[..., 0, 1, 1:, 1:] = mix
        out[..., 1, 0, 1:, 1:] = mix
        out[..., 1, 1, 1:, 1:] = p[..., None, None] * d2h + q[..., None, None] * d2b
        return out

    dom = ((lo, hi),) + tuple(box3)
    return MetricChart("dwp", 4, dom, g, d1, d2, h=h, orientation=orientation,
                       extras={"profile": profile, "flow": flow})


def dwp_pointwise_batch(chart, pts):
    """Adapted frame, J, A, xi and profile scalars of the DWP chart (batched).

    Returns a dict of arrays with leading batch shape; the frame
    (s1, s2, s3, s4) is negatively oriented and J, A rotate (s1, s2) by an
    A_E-type and (s3, s4) by an A_P-type coefficient built from the profile.
    """
    profile = chart.extras["profile"]
    flow = chart.extras["flow"]
    pts = np.asarray(pts, dtype=float)
    cof = np.linalg.inv(frame_at(chart, pts))
    t = pts[..., 0]
    rho = np.asarray(profile.rho_of(t), dtype=float)
    u = np.asarray(profile.u_of(t), dtype=float)
    drho = np.asarray(profile.drho(t), dtype=float)
    du = np.asarray(profile.du(t), dtype=float)
    f = np.sqrt(1.0 - 4.0 * rho ** 2)
    lam = -drho / rho
    mu = -du / (2.0 * u)
    a_e = -lam * rho / f
    a_p = mu * rho
    # the flow field (unit for g-hat) has g-length rho(t) in the warped metric
    eta4 = np.concatenate([[0.0], flow.eta_coord])
    eta = np.einsum("...ij,j->...i", cof, eta4)
    s1 = -eta / rho[..., None]
    s2 = cof[..., :, 0]
    w = cof[..., :, 1]
    w = w - np.einsum("...i,...i->...", w, s1)[..., None] * s1 \
        - np.einsum("...i,...i->...", w, s2)[..., None] * s2
    s3 = w / np.linalg.norm(w, axis=-1, keepdims=True)
    m = np.stack([s1, s2, s3], axis=-2)
    _, _, vt = np.linalg.svd(m)
    s4 = vt[..., -1, :]
    det = np.linalg.det(np.concatenate([m, s4[..., None, :]], axis=-2))
    s4 = np.where(det[..., None] > 0, -s4, s4)

    def outer(a, b):
        return np.einsum("...i,...j->...ij", a, b)

    rot12 = outer(s2, s1) - outer(s1, s2)
    rot34 = outer(s4, s3) - outer(s3, s4)
    jmat = rot12 + rot34
    amat = a_e[..., None, None] * rot12 + a_p[..., None, None] * rot34
    xi = (2.0 / (f - 1.0))[..., None] * eta
    return {
        "eta": eta, "xi": xi, "rho": rho, "sigma": np.sqrt(u), "f": f,
        "lambda": lam, "mu": mu, "A_E": a_e, "A_P": a_p,
        "s": np.stack([s1, s2, s3, s4], axis=-2), "J": jmat, "A": amat,
    }


def dwp_pointwise_data(chart, x):
    """Single-point convenience wrapper around :func:`dwp_pointwise_batch`."""
    out = dwp_pointwise_batch(chart, np.asarray(x, dtype=float))
    out["rho"] = float(out["rho"])
    out["sigma"] = float(out["sigma"])
    out["f"] = float(out["f"])
    out["lambda"] = float(out["lambda"])
    out["mu"] = float(out["mu"])
    out["A_E"] = float(out["A_E"])
    out["A_P"] = float(out["A_P"])
    return out


_SMINUS_BASIS = np.zeros((4, 2), dtype=complex)
_SMINUS_BASIS[1, 0] = 1.0
_SMINUS_BASIS[2, 1] = 1.0


def line_bundle_sections(jmats, xis, fs, cond_tol=1e-8, gauge_ref=None):
    """Unit spinors with J(X) . phi_minus = i X . phi_minus, phi_plus = xi . phi_minus.

    Batched over leading dimensions.  The negative-chirality part solves a
    rank-deficient complex system (its nullspace is one-dimensional exactly
    when the frame conventions are compatible) and is scaled so
    |phi_minus|^2 = (1 - f)/2, giving |phi| = 1.  The complex gauge makes
    the pairing with ``gauge_ref`` real positive (smooth as long as the line
    stays away from the reference's orthogonal complement; a flip raises
    GaugeError).  Without a reference the largest-magnitude component is set
    real positive instead, which is deterministic but only piecewise smooth.
    """
    rep = REP4
    jmats = np.asarray(jmats)
    rows = [
        np.einsum("...ab,bk->...ak",
                  rep.vector_matrix(jmats[..., :, i]) - 1j * rep.gamma[i],
                  _SMINUS_BASIS)
        for i in range(4)
    ]
    m = np.concatenate(rows, axis=-2)
    _, sv, vh = np.linalg.svd(m)
    if np.any(sv[..., -1] > cond_tol * sv[..., -2]):
        worst = float(np.max(sv[..., -1] / sv[..., -2]))
        raise GaugeError(f"line-bundle conditions inconsistent: sigma_min/sigma_next = {worst:.2e}")
    c = np.conj(vh[..., -1, :])
    pm = np.einsum("ak,...k->...a", _SMINUS_BASIS, c)
    if gauge_ref is None:
        idx = np.argmax(np.abs(pm), axis=-1)
        anchor = np.take_along_axis(pm, idx[..., None], axis=-1)[..., 0]
    else:
        anchor = herm(pm, np.asarray(gauge_ref, dtype=complex))
        if np.any(np.abs(anchor) < 0.2 * np.linalg.norm(pm, axis=-1)
                  * np.linalg.norm(gauge_ref)):
            raise GaugeError("section gauge flip: line nearly orthogonal to reference")
    pm = pm * (np.conj(anchor) / np.abs(anchor))[..., None]
    scale = np.sqrt((1.0 - np.asarray(fs)) / 2.0) / np.linalg.norm(pm, axis=-1)
    pm = pm * scale[..., None]
    pp = rep.vector_clifford(xis, pm)
    return pp + pm


def line_bundle_section(jmat, xi, f, cond_tol=1e-8, gauge_ref=None):
    return line_bundle_sections(jmat, xi, f, cond_tol, gauge_ref)


def _section_field(chart):
    d0 = dwp_pointwise_data(chart, chart.center())
    ref = REP4.split(line_bundle_section(d0["J"], d0["xi"], d0["f"]))[1]

    def sec(pts):
        d = dwp_pointwise_batch(chart, pts)
        return line_bundle_sections(d["J"], d["xi"], d["f"], gauge_ref=ref)

    return sec


def build_dwp_candidate(profile, flow, base_phase=1.0, h=1e-3, step=0.01,
                        check_grid=2, flat_tol=5e-4):
    """Skew Killing candidate on the doubly warped product of a profile.

    Assembles the chart, the adapted frame and Killing map, and a unit
    section of the rank-1 spinor line bundle; measures the curvature
    ``d alpha`` of the induced modified connection on the line bundle
    (flatness is the integrability of the construction) and then builds the
    spinor by modified-connection parallel transport of the center section
    along axis-parallel polylines.
    """
    if abs(flow.tau_hat - profile.tau_hat) > 5e-3 or abs(flow.K_hat - profile.K_hat) > 5e-3:
        raise ConstructionError(
            f"flow constants ({flow.tau_hat:.4f}, {flow.K_hat:.4f}) do not match "
            f"profile ({profile.tau_hat:.4f}, {profile.K_hat:.4f})")
    chart = dwp_chart(profile, flow, h=h)
    sec = _section_field(chart)

    def a_field(pts):
        return dwp_pointwise_batch(chart, pts)["A"]

    conn = modified_connection_batch(chart, REP4, a_field)

    def alpha(x):
        """Connection 1-form of the induced line-bundle connection at x."""
        x = np.asarray(x, dtype=float)
        mats = conn(x)
        s0 = sec(x)
        stencil = np.stack([x + d for d in np.eye(4) * chart.h]
                           + [x - d for d in np.eye(4) * chart.h])
        vals = sec(stencil)
        dsec = (vals[:4] - vals[4:]) / (2.0 * chart.h)
        nab = dsec + np.einsum("cab,b->ca", mats, s0)
        return herm(nab, s0), nab

    # flatness of the induced connection: d alpha ~ 0 on a coarse grid
    worst_dalpha = 0.0
    worst_line = 0.0
    hh = chart.h
    for x in chart.grid(check_grid, margin=3 * hh):
        al0, nab = alpha(x)
        s0 = sec(x)
        worst_line = max(worst_line, float(np.max(np.linalg.norm(
            nab - al0[:, None] * s0, axis=-1))))
        aplus = [alpha(x + d)[0] for d in np.eye(4) * hh]
        aminus = [alpha(x - d)[0] for d in np.eye(4) * hh]
        for c in range(4):
            for e in range(c + 1, 4):
                dae = (aplus[c][e] - aminus[c][e]) / (2 * hh)
                dac = (aplus[e][c] - aminus[e][c]) / (2 * hh)
                worst_dalpha = max(worst_dalpha, abs(dae - dac))
    if worst_dalpha > flat_tol:
        raise ConstructionError(
            f"induced line-bundle connection is not flat: |d alpha| = "
            f"{worst_dalpha:.3e} (profile does not satisfy the integrability system)")

    base = complex(base_phase) * sec(chart.center())
    psi = LineTransportField(chart, conn, chart.center(), base, step=step)
    cand = Candidate(chart, a_field, psi, name="dwp",
                     meta={"kind": "dwp", "profile": profile, "flow": flow,
                           "dalpha": worst_dalpha, "line_residual": worst_line})
    return cand


def leaf_chart(chart, t_leaf=None, h=1e-3):
    """The 3-dimensional leaf {t} x M-hat of a DWP chart, as a Berger chart."""
    profile = chart.extras["profile"]
    flow = chart.extras["flow"]
    if t_leaf is None:
        t_leaf = chart.center()[0]
    rho = float(profile.rho_of(t_leaf))
    sigma = float(np.sqrt(profile.u_of(t_leaf)))
    return berger_chart(flow.r * rho, flow.s * sigma,
                        box=tuple(chart.domain[1:]), h=h), rho, sigma
