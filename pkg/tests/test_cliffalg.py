"""Algebra-layer invariants: gamma gauge, forms, Hodge star, linear solves."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewspin.cliffalg import (DegenerateSpinorError, ExtForm, GammaRep, REP2,
                               REP3, REP4, T_FLIP, form_action_chirality_check,
                               form_clifford, form_matrix, herm, hodge_star,
                               sd_asd_split, solve_J, solve_xi, vector_clifford)

RNG = np.random.default_rng(7)


def rand_spinor(n=4):
    return RNG.normal(size=n) + 1j * RNG.normal(size=n)


@pytest.mark.parametrize("rep", [REP2, REP3, REP4])
def test_clifford_relation_all_pairs(rep):
    eye = np.eye(rep.nspin)
    for i, gi in enumerate(rep.gamma):
        for j, gj in enumerate(rep.gamma):
            acom = gi @ gj + gj @ gi
            assert np.allclose(acom, -2.0 * (i == j) * eye, atol=1e-14)


@pytest.mark.parametrize("rep", [REP2, REP3, REP4])
def test_generators_skew_hermitian(rep):
    for g in rep.gamma:
        assert np.allclose(g.conj().T, -g, atol=1e-14)


def test_volume_element_squares_to_identity():
    for rep in (REP2, REP4):
        assert np.allclose(rep.volume_c @ rep.volume_c, np.eye(rep.nspin), atol=1e-14)
        assert np.allclose(rep.p_plus @ rep.p_minus, 0.0, atol=1e-14)
        assert np.allclose(rep.p_plus + rep.p_minus, np.eye(rep.nspin), atol=1e-14)


def test_vectors_swap_chirality():
    psi = rand_spinor()
    pp, pm = REP4.split(psi)
    for i in range(4):
        v = np.eye(4)[i]
        out = vector_clifford(v, pp)
        assert np.linalg.norm(REP4.split(out)[0]) < 1e-13
        out = vector_clifford(v, pm)
        assert np.linalg.norm(REP4.split(out)[1]) < 1e-13


def test_double_application_is_minus_identity():
    psi = rand_spinor()
    e1 = np.eye(4)[0]
    assert np.allclose(vector_clifford(e1, vector_clifford(e1, psi)), -psi)


def test_vector_action_skew_adjoint():
    psi, phi = rand_spinor(), rand_spinor()
    v = RNG.normal(size=4)
    lhs = herm(vector_clifford(v, psi), phi)
    rhs = -herm(psi, vector_clifford(v, phi))
    assert abs(lhs - rhs) < 1e-12


def test_volume_commutes_with_2forms_anticommutes_with_vectors():
    vol = REP4.volume_c
    for i in range(4):
        assert np.allclose(vol @ REP4.gamma[i], -REP4.gamma[i] @ vol, atol=1e-13)
        for j in range(i + 1, 4):
            m = form_matrix(ExtForm.basis((i, j)))
            assert np.allclose(vol @ m, m @ vol, atol=1e-13)


# ---------------------------------------------------------------------------
# exterior algebra and Hodge star
# ---------------------------------------------------------------------------

def test_hodge_star_basics():
    assert np.allclose(hodge_star(ExtForm.basis((0, 1))).coeffs,
                       ExtForm.basis((2, 3)).coeffs)
    w = ExtForm.basis((0, 2))
    assert np.allclose(hodge_star(hodge_star(w)).coeffs, w.coeffs)


@pytest.mark.parametrize("p", range(5))
def test_hodge_star_involution_sign(p):
    n = len(ExtForm.zero(p).coeffs)
    for k in range(n):
        c = np.zeros(n)
        c[k] = 1.0
        w = ExtForm(p, c)
        ss = hodge_star(hodge_star(w))
        assert np.allclose(ss.coeffs, (-1) ** (p * (4 - p)) * w.coeffs)


def test_interior_star_identity():
    # X -| *w = (-1)^p *(X ^ w), spot-checked by direct expansion over the basis
    for p in (1, 2, 3):
        n = len(ExtForm.zero(p).coeffs)
        for k in range(n):
            c = np.zeros(n)
            c[k] = 1.0
            w = ExtForm(p, c)
            for i in range(4):
                x = np.eye(4)[i]
                lhs = hodge_star(w).interior(x)
                rhs = (-1) ** p * hodge_star(ExtForm.from_vector(x).wedge(w))
                assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-14), (p, k, i)


def test_wedge_anticommutes_on_one_forms():
    a = ExtForm.from_vector(RNG.normal(size=4))
    b = ExtForm.from_vector(RNG.normal(size=4))
    assert np.allclose(a.wedge(b).coeffs, -(b.wedge(a)).coeffs)


def test_two_form_action_matches_half_sum_expansion():
    # (1/2) sum_j e_j . (A e_j) . psi against the multi-index expansion
    m = RNG.normal(size=(4, 4))
    a = m - m.T
    psi = rand_spinor()
    lhs = np.zeros(4, dtype=complex)
    for j in range(4):
        ej = np.eye(4)[j]
        lhs += 0.5 * vector_clifford(ej, vector_clifford(a @ ej, psi))
    rhs = form_clifford(ExtForm.from_skew(a), psi)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_form_skew_roundtrip():
    m = RNG.normal(size=(4, 4))
    a = m - m.T
    assert np.allclose(ExtForm.from_skew(a).to_skew(), a)


def test_two_form_adjoint_sign():
    # <w . psi, phi> = (-1)^{p(p+1)/2} <psi, w . phi> with sign -1 for p = 2
    w = ExtForm(2, RNG.normal(size=6))
    psi, phi = rand_spinor(), rand_spinor()
    lhs = herm(form_clifford(w, psi), phi)
    rhs = -herm(psi, form_clifford(w, phi))
    assert abs(lhs - rhs) < 1e-12


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_form_action_duality_rule(p):
    for _ in range(20):
        c = RNG.normal(size=len(ExtForm.zero(p).coeffs))
        assert form_action_chirality_check(ExtForm(p, c), rand_spinor()) < 1e-12


def test_duality_rule_zero_form_edge():
    assert form_action_chirality_check(ExtForm.zero(2), rand_spinor()) == 0.0


def test_sd_asd_split_and_annihilation():
    w = ExtForm.basis((0, 1))
    plus, minus = sd_asd_split(w)
    assert np.allclose(plus.coeffs, 0.5 * (ExtForm.basis((0, 1)) + ExtForm.basis((2, 3))).coeffs)
    assert np.allclose(minus.coeffs, 0.5 * (ExtForm.basis((0, 1)) - ExtForm.basis((2, 3))).coeffs)
    psi = rand_spinor()
    pp, pm = REP4.split(psi)
    for _ in range(20):
        w = ExtForm(2, RNG.normal(size=6))
        plus, minus = sd_asd_split(w)
        assert np.linalg.norm(form_clifford(plus, pm)) < 1e-12
        assert np.linalg.norm(form_clifford(minus, pp)) < 1e-12
    sd = ExtForm.basis((0, 1)) + ExtForm.basis((2, 3))
    assert sd_asd_split(sd)[1].norm() < 1e-15


def test_asd_action_injective_on_pure_spinors():
    # w_- -> w_- . psi_minus has a trivial kernel for nonzero psi_minus
    pm = REP4.p_minus @ rand_spinor()
    basis_minus = [sd_asd_split(ExtForm.basis(ij))[1]
                   for ij in [(0, 1), (0, 2), (0, 3)]]
    cols = [form_clifford(w, pm) for w in basis_minus]
    m = np.stack([np.concatenate([c.real, c.imag]) for c in cols], axis=1)
    assert np.linalg.matrix_rank(m, tol=1e-10) == 3


# ---------------------------------------------------------------------------
# the linear solves
# ---------------------------------------------------------------------------

def test_solve_xi_constructed_inverse():
    pm = REP4.p_minus @ rand_spinor()
    pp = vector_clifford(np.eye(4)[0], pm)
    assert np.allclose(solve_xi(pm, pp), np.eye(4)[0], atol=1e-12)
    assert np.allclose(solve_xi(pm, np.zeros(4)), np.zeros(4), atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_solve_xi_roundtrip(seed):
    r = np.random.default_rng(seed)
    pm = REP4.p_minus @ (r.normal(size=4) + 1j * r.normal(size=4))
    if np.linalg.norm(pm) < 1e-3:
        return
    pm = pm / np.linalg.norm(pm)
    xi0 = r.normal(size=4)
    pp = vector_clifford(xi0, pm)
    assert np.max(np.abs(solve_xi(pm, pp) - xi0)) < 1e-12


def test_solve_xi_degenerate_input():
    with pytest.raises(DegenerateSpinorError):
        solve_xi(np.zeros(4), rand_spinor())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_solve_J_is_orthogonal_complex_structure(seed):
    r = np.random.default_rng(seed)
    pm = REP4.p_minus @ (r.normal(size=4) + 1j * r.normal(size=4))
    if np.linalg.norm(pm) < 1e-3:
        return
    pm = pm / np.linalg.norm(pm)
    jm = solve_J(pm)
    assert np.allclose(jm @ jm, -np.eye(4), atol=1e-12)
    assert np.allclose(jm + jm.T, 0.0, atol=1e-12)
    x, y = r.normal(size=4), r.normal(size=4)
    assert abs(np.dot(jm @ x, jm @ y) - np.dot(x, y)) < 1e-12
    # scale invariance in psi_minus
    assert np.allclose(solve_J((0.3 - 1.7j) * pm), jm, atol=1e-12)


def test_solve_J_defining_equation():
    pm = REP4.p_minus @ rand_spinor()
    jm = solve_J(pm)
    for i in range(4):
        lhs = vector_clifford(jm[:, i], pm)
        rhs = 1j * vector_clifford(np.eye(4)[i], pm)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_flip_intertwiner_swaps_last_generators():
    t_inv = np.linalg.inv(T_FLIP)
    for i, tgt in enumerate([0, 1, 3, 2]):
        assert np.allclose(T_FLIP @ REP4.gamma[i] @ t_inv, REP4.gamma[tgt], atol=1e-13)
    assert np.allclose(T_FLIP @ T_FLIP, np.eye(4), atol=1e-13)
    assert np.allclose(T_FLIP @ REP4.volume_c @ t_inv, -REP4.volume_c, atol=1e-13)
