"""Candidates and their derived fields: eta, xi, f, rho, J, adapted frames.

A candidate bundles a chart with a skew endomorphism field ``A`` and a spinor
field ``psi`` (both in the chart's frame gauge) to be tested against the skew
Killing equation ``nabla_X psi = A X . psi`` and the identity catalog.

All derived quantities are pointwise; field derivatives of them live in the
verifier.  The canonical vector field is read off through the real part of
the Hermitian pairing, ``eta_i = Re <e_i . psi_plus, psi_minus>``; the
imaginary part is returned as a diagnostic instead of being assumed zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import cliffalg
from .cliffalg import (DegenerateSpinorError, GammaRep, REP2, REP3, REP4, T_FLIP,
                       herm, solve_J, solve_xi)
from .geometry import MetricChart, PointGeometry, spinor_cov_deriv_coord

_REP_BY_DIM = {2: REP2, 3: REP3, 4: REP4}


class RegionError(ValueError):
    """Raised when an operation is evaluated outside its region of validity."""


@dataclass
class Candidate:
    """A (chart, A, psi) triple: the object the verifier runs on.

    ``A`` maps points to skew matrices in frame components, ``psi`` maps
    points to spinor components in the frame gauge.  ``normalized`` asserts
    the unit-length input contract |psi| = 1.
    """

    chart: MetricChart
    A: Callable
    psi: Callable
    normalized: bool = True
    name: str = "candidate"
    meta: dict = field(default_factory=dict)

    @property
    def rep(self) -> GammaRep:
        return _REP_BY_DIM[self.chart.dim]

    def check_contracts(self, pts, tol_skew=1e-10, tol_norm=1e-10):
        """Max residuals of the input contracts A^T = -A and |psi| = 1."""
        a = self.A(pts)
        skew = float(np.max(np.abs(a + np.swapaxes(a, -1, -2))))
        norm = float(np.max(np.abs(np.linalg.norm(self.psi(pts), axis=-1) - 1.0))) \
            if self.normalized else 0.0
        ok = skew <= tol_skew and norm <= tol_norm
        return ok, {"skew_residual": skew, "norm_residual": norm}


def skew_killing_residual(cand, x, geo=None, h=None):
    """Frame-direction residuals of nabla_X psi - A X . psi at ``x``.

    Returns an array of shape (dim,) with the Hermitian norm per direction,
    normalized by 1 + |lhs| + |rhs|.
    """
    rep = cand.rep
    geo = geo or PointGeometry(cand.chart, x)
    dc = spinor_cov_deriv_coord(cand.chart, rep, cand.psi, x, geo=geo, h=h)
    nab = np.einsum("ck,ca->ka", geo.frame, dc)  # nabla_{e_k} psi
    a = cand.A(x)
    psi = cand.psi(x)
    out = np.empty(cand.chart.dim)
    for k in range(cand.chart.dim):
        rhs = rep.vector_clifford(a[:, k], psi)
        num = np.linalg.norm(nab[k] - rhs)
        out[k] = num / (1.0 + np.linalg.norm(nab[k]) + np.linalg.norm(rhs))
    return out


# ----------------------------------------------------------------------------
# pointwise derived fields
# ----------------------------------------------------------------------------

def eta_at(cand, x):
    """Canonical vector field eta and the imaginary-part diagnostic.

    eta_i = Re <e_i . psi_plus, psi_minus> in the orthonormal frame; the
    imaginary parts are returned separately (they vanish for true solutions).
    """
    rep = cand.rep
    psi = cand.psi(x)
    pp, pm = rep.split(psi)
    pairing = np.stack(
        [herm(np.einsum("ab,...b->...a", g, pp), pm) for g in rep.gamma], axis=-1)
    return pairing.real, pairing.imag


def f_rho_at(cand, x):
    """(f, rho) = (1 - 2|psi_minus|^2, |eta|); needs a normalized candidate."""
    if not cand.normalized:
        raise ValueError("f and rho require the unit-length candidate contract")
    rep = cand.rep
    _, pm = rep.split(cand.psi(x))
    f = 1.0 - 2.0 * np.sum(np.abs(pm) ** 2, axis=-1)
    eta, _ = eta_at(cand, x)
    rho = np.linalg.norm(eta, axis=-1)
    return f, rho


def xi_at(cand, x):
    """xi with psi_plus = xi . psi_minus; raises where psi_minus = 0."""
    rep = cand.rep
    pp, pm = rep.split(cand.psi(x))
    return solve_xi(pm, pp, rep)


def J_at(cand, x):
    """Almost complex structure J(X) . psi_minus = i X . psi_minus."""
    rep = cand.rep
    _, pm = rep.split(cand.psi(x))
    return solve_J(pm, rep)


@dataclass(frozen=True)
class RegionFlags:
    in_M0: bool
    in_M1: bool
    in_Mprime: bool
    in_Mdoubleprime: bool


def region_flags(cand, x, eps=1e-6):
    """Pointwise membership in M0, M1, M' and M'' up to the threshold eps."""
    rep = cand.rep
    pp, pm = rep.split(cand.psi(x))
    _, rho = f_rho_at(cand, x)
    return RegionFlags(
        in_M0=bool(np.linalg.norm(pm) > eps),
        in_M1=bool(np.linalg.norm(pp) > eps),
        in_Mprime=bool(rho > eps),
        in_Mdoubleprime=bool(eps < rho < 0.5 - eps),
    )


@dataclass(frozen=True)
class AdaptedFrame:
    """The ordered frame (s1, s2, s3, s4) adapted to eta and J, plus A_E, A_P.

    Vectors are in frame components.  ``aj_comm`` is the commutator norm
    |AJ - JA|; when it is not small the A_P value is not meaningful and the
    defining-relation residuals report the failure.
    """

    s: np.ndarray          # (4, 4), rows s1..s4
    A_E: float
    A_P: float
    aj_comm: float
    relation_residual: float


def adapted_frame(cand, x, eps=1e-6, s3_hint=None):
    """Build s1 = -eta/rho, s2 = J s1, s3 in {eta, J eta}^perp, s4 = J s3.

    ``s3`` is gauged as the smallest-index coordinate direction projected to
    the orthogonal complement of span(eta, J eta) and normalized (documented
    as non-canonical); ``s3_hint`` overrides it with a frame-component vector.
    Requires rho in (0, 1/2).
    """
    f, rho = f_rho_at(cand, x)
    if not (eps < rho < 0.5 - eps):
        raise RegionError(f"adapted frame needs rho in ({eps}, 1/2-{eps}); got {rho}")
    eta, _ = eta_at(cand, x)
    J = J_at(cand, x)
    s1 = -eta / rho
    s2 = J @ s1
    if s3_hint is not None:
        cand3 = np.asarray(s3_hint, dtype=float)
        cand3 = cand3 - np.dot(cand3, s1) * s1 - np.dot(cand3, s2) * s2
        if np.linalg.norm(cand3) < 1e-8:
            raise RegionError("s3 hint degenerates after projection")
        s3 = cand3 / np.linalg.norm(cand3)
    else:
        s3 = None
        for c in range(4):
            v = np.zeros(4)
            v[c] = 1.0
            v = v - np.dot(v, s1) * s1 - np.dot(v, s2) * s2
            n = np.linalg.norm(v)
            if n > 0.3:
                s3 = v / n
                break
        if s3 is None:
            raise RegionError("no coordinate direction projects onto the plane P")
    s4 = J @ s3
    a = cand.A(x)
    A_E = -float(np.dot(a @ (J @ eta), eta)) / rho ** 2
    A_P = -float(np.dot(a @ s4, s3))
    aj_comm = float(np.linalg.norm(a @ J - J @ a))
    res = max(
        np.linalg.norm(a @ (J @ eta) + A_E * eta),
        np.linalg.norm(a @ s4 + A_P * s3),
        np.linalg.norm(a @ (J @ s4) + A_P * s4),
    )
    return AdaptedFrame(s=np.stack([s1, s2, s3, s4]), A_E=A_E, A_P=A_P,
                        aj_comm=aj_comm, relation_residual=float(res))


# ----------------------------------------------------------------------------
# orientation flip
# ----------------------------------------------------------------------------

_PERM_FLIP = np.eye(4)[[0, 1, 3, 2]]


def flip_orientation(cand):
    """Candidate on the orientation-reversed chart with swapped chirality.

    The chart's orientation flag flips, so its frame becomes
    (e1, e2, e4, e3).  Spinor components transform by the fixed unitary
    intertwiner T_FLIP (so the underlying section is unchanged and the
    chirality parts swap); the A matrix is re-indexed accordingly.  Flipping
    twice restores the components exactly.
    """
    if cand.chart.dim != 4:
        raise ValueError("orientation flip is implemented for dimension 4")
    chart2 = cand.chart.with_orientation(-cand.chart.orientation)
    psi_old, a_old = cand.psi, cand.A

    def psi2(pts):
        return np.einsum("ab,...b->...a", T_FLIP, psi_old(pts))

    def a2(pts):
        return np.einsum("ij,...jk,kl->...il", _PERM_FLIP, a_old(pts), _PERM_FLIP)

    return replace(cand, chart=chart2, psi=psi2, A=a2, name=cand.name + "~flip")


def verify_flip(cand, flipped, pts, eps=1e-6):
    """Residuals of the flip relations at sample points.

    Checks xi_hat = -xi/|xi|^2, eta_hat = -eta, f_hat = -f (componentwise
    through the frame relabeling) and the double-flip round trip.  Points
    where xi is undefined (psi_minus ~ 0 or psi_plus ~ 0) are counted as
    untestable for the xi relation.
    """
    res = {"eta": 0.0, "f": 0.0, "xi": 0.0, "roundtrip": 0.0}
    untestable = 0
    back = flip_orientation(flipped)
    for x in np.atleast_2d(pts):
        eta, _ = eta_at(cand, x)
        eta_h, _ = eta_at(flipped, x)
        res["eta"] = max(res["eta"], float(np.max(np.abs(eta_h + _PERM_FLIP @ eta))))
        f, _ = f_rho_at(cand, x)
        f_h, _ = f_rho_at(flipped, x)
        res["f"] = max(res["f"], abs(f_h + f))
        res["roundtrip"] = max(
            res["roundtrip"], float(np.max(np.abs(back.psi(x) - cand.psi(x)))))
        flags = region_flags(cand, x, eps)
        if flags.in_M0 and flags.in_M1 and flags.in_Mprime:
            xi = xi_at(cand, x)
            xi_h = xi_at(flipped, x)
            res["xi"] = max(res["xi"], float(np.max(np.abs(
                xi_h + _PERM_FLIP @ xi / np.dot(xi, xi)))))
        else:
            untestable += 1
    res["xi_untestable_points"] = untestable
    return res
