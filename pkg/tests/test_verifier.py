"""Identity catalog: suites on the fixture zoo, gating, reports, non-vacuity."""

import json

import numpy as np
import pytest

from skewspin.constructors import build_flat_parallel, corrupt_candidate
from skewspin.fields import Candidate
from skewspin.verifier import (CATALOG, CATALOG_BY_ID, PointContext,
                               check_identity, run_suite)


def test_catalog_ids_unique_and_anchored():
    ids = [e.id for e in CATALOG]
    assert len(ids) == len(set(ids))
    assert all(e.anchor for e in CATALOG)
    assert {e.suite for e in CATALOG} == {"S1", "S2", "S3", "S4"}


def test_flat_s1_exactly_zero():
    cand = build_flat_parallel()
    rep = run_suite(cand, "S1", cand.chart.grid(3))
    assert rep.passed
    for r in rep.identities:
        assert r.max_residual == 0.0, r.id


def test_flat_s2_mostly_not_applicable():
    # A = 0: the degenerate-case gates are all off for the (GA) entries
    cand = build_flat_parallel()
    rep = run_suite(cand, "S2", cand.chart.grid(3))
    assert rep.passed
    by_id = {r.id: r for r in rep.identities}
    assert by_id["L4.10"].applicable_points == 0
    assert by_id["P4.12"].applicable_points == 0  # pure spinor: xi undefined


def test_p412_on_mixed_flat_candidate():
    # mixed chirality constant spinor: xi defined, A xi = 0, reduces to
    # nabla psi = 0
    cand = build_flat_parallel(base_spinor=(1.0, 0.5, 0.0, 0.0))
    rep = check_identity(cand, "P4.12", cand.chart.grid(3))
    assert rep.applicable_points > 0
    assert rep.max_residual < 1e-12


def test_s2xr2_suites_pass(s2xr2_cand):
    grid = s2xr2_cand.chart.grid(3)
    for suite in ("S1", "S2"):
        rep = run_suite(s2xr2_cand, suite, grid)
        assert rep.passed, str(rep)
    rep = run_suite(s2xr2_cand, "S2", grid)
    by_id = {r.id: r for r in rep.identities}
    assert by_id["L4.10"].applicable_points > 0
    assert by_id["L4.10"].max_residual <= 5e-4


def test_s2xr2_minus_and_zero_variants(s2xr2_zero):
    grid = s2xr2_zero.chart.grid(3)
    rep1 = run_suite(s2xr2_zero, "S1", grid)
    assert rep1.passed, str(rep1)
    rep2 = run_suite(s2xr2_zero, "S2", grid)
    assert rep2.passed, str(rep2)
    by_id = {r.id: r for r in rep2.identities}
    # rho = 1/2 everywhere: the (GA) entries are vacuous, P4.12 is live
    assert by_id["L4.10"].applicable_points == 0
    assert by_id["P4.12"].applicable_points == len(grid)
    assert by_id["P4.12"].max_residual < 5e-5


def test_product3d_s1(product3d_cand):
    rep = run_suite(product3d_cand, "S1", product3d_cand.chart.grid(3))
    assert rep.passed, str(rep)


def test_dwp_all_suites(dwp_bundle):
    _, _, cand = dwp_bundle
    grid = cand.chart.grid(2)
    for suite in ("S1", "S3", "S4"):
        rep = run_suite(cand, suite, grid)
        assert rep.passed, str(rep)
        for r in rep.identities:
            assert r.applicable_points == len(grid), (suite, r.id)


def test_corrupted_A_fails_k0(s2xr2_cand):
    bad = corrupt_candidate(s2xr2_cand, a_scale=1.01)
    rep = check_identity(bad, "K0", bad.chart.grid(3)[:9])
    assert not rep.passed
    assert rep.max_residual >= 1e-4


def test_corrupted_psi_fails_k0(s2xr2_cand):
    bad = corrupt_candidate(s2xr2_cand, psi_eps=1e-3)
    rep = check_identity(bad, "K0", bad.chart.grid(3)[:9])
    assert not rep.passed
    assert rep.max_residual >= 1e-4


def test_report_json_schema(s2xr2_cand):
    rep = run_suite(s2xr2_cand, "S1", s2xr2_cand.chart.grid(3)[:4], ids={"K0", "LEN"})
    d = json.loads(rep.to_json())
    assert set(d) == {"suite", "identities", "meta"}
    for entry in d["identities"]:
        assert set(entry) == {"id", "anchor", "max_residual", "argmax_point",
                              "applicable_points", "tolerance", "pass"}
        assert len(entry["argmax_point"]) == 4
    assert d["suite"] == "S1"


def test_tolerance_overrides(s2xr2_cand):
    grid = s2xr2_cand.chart.grid(3)[:4]
    rep = run_suite(s2xr2_cand, "S1", grid, tol_overrides={"K0": 1e-12}, ids={"K0"})
    assert not rep.passed


def test_not_applicable_is_not_failure(product3d_cand):
    # rho = 1/2 everywhere, so the (GA)-gated entries never apply
    rep = check_identity(product3d_cand, "L4.2-1", product3d_cand.chart.grid(2))
    assert rep.applicable_points == 0
    assert rep.passed


def test_rank_gates(s2xr2_cand, dwp_bundle):
    ctx = PointContext(s2xr2_cand, np.array([1.2, 0.55, 0.2, -0.1]))
    assert ctx.rank_le2 and not ctx.rank4
    _, _, dcand = dwp_bundle
    ctx = PointContext(dcand, dcand.chart.center())
    assert ctx.rank4 and not ctx.rank_le2


def test_fd_order_ratio_on_truncation_dominated_identities(s2xr2_cand, dwp_bundle,
                                                           product3d_cand):
    from dataclasses import replace

    def ratio(cand, id_, x):
        vals = []
        for h in (1e-3, 5e-4):
            c2 = Candidate(replace(cand.chart, h=h), cand.A, cand.psi,
                           normalized=cand.normalized, meta=dict(cand.meta))
            vals.append(check_identity(c2, id_, [x]).max_residual)
        return vals[0] / vals[1]

    # rebuild the sphere factor with a fine transport so FD truncation dominates
    from skewspin.constructors import build_s2xr2
    fine = build_s2xr2(step=0.002)
    x = np.array([1.25, 0.52, 0.21, -0.12])
    assert 3.0 < ratio(fine, "L3.1-1", x) < 5.0
    assert 3.0 < ratio(fine, "L3.1-2", x) < 5.0
    _, _, dcand = dwp_bundle
    xd = dcand.chart.center() + np.array([0.004, 0.13, 0.09, -0.11])
    assert 3.0 < ratio(dcand, "K0", xd) < 5.0
    xp = np.array([1.31, 0.49, 0.12, -0.21])
    assert 3.0 < ratio(product3d_cand, "K0", xp) < 5.0


def test_global_entries_cached(dwp_bundle):
    _, _, cand = dwp_bundle
    rep = check_identity(cand, "SOL", cand.chart.grid(2)[:2])
    assert rep.passed and rep.max_residual < 1e-7
    assert "_global_cache" in cand.meta
