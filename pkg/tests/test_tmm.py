from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import bloch_multipliers, branches_mp, product
from sturmwave.models import BEAM_CASES, chain_spec, element_tms
from sturmwave.numbers import cf_from_rational
from sturmwave.tmm import (ChebSequenceState, PalindromyError, admitted_2x2, alpha_r, char_coeffs_4x4,
                           cheb_z_closed, cheb_z_iterate, chebyshev_u, compound2, cos_kL_2x2, cos_kL_4x4,
                           half_trace_scaled, mat_power, palindromy_defect, quadratic_branches_4x4,
                           renormalize, size_law, supercell_branches_4x4, supercell_tm,
                           supercell_tm_direct, tau_r, zeta_r)
from sturmwave.words import word_for

generators = st.builds(lambda q, p: Fraction(p % (q + 1), q), st.integers(1, 40), st.integers(0, 10 ** 6))


def chain_pair(omega, K_p=1.0, K_q=2.0):
    return element_tms(chain_spec(K_p, K_q), omega)


@given(generators, st.floats(0.0, 2.5), st.floats(0.5, 3.0), st.floats(0.5, 3.0))
def test_recursion_matches_direct_product(x, omega, kp, kq):
    T_p, T_q = chain_pair(omega, kp, kq)
    rec = supercell_tm(cf_from_rational(x), T_p, T_q)
    ref = product(str(word_for(x)), {"p": T_p, "q": T_q})
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(rec - ref)) <= 1e-9 * scale


@given(generators, st.floats(0.0, 2.0))
def test_supercell_is_unimodular(x, omega):
    T_p, T_q = chain_pair(omega)
    T = supercell_tm(cf_from_rational(x), T_p, T_q)
    # det is only resolvable to rounding relative to the product of row norms
    floor = np.prod(np.linalg.norm(T, axis=-1))
    assert abs(np.linalg.det(T) - 1.0) <= 1e-9 * max(1.0, floor)


@given(generators, st.floats(0.0, 2.0))
def test_supercell_is_unimodular_in_passbands(x, omega):
    T_p, T_q = chain_pair(omega)
    T = supercell_tm(cf_from_rational(x), T_p, T_q)
    if abs(0.5 * np.trace(T)) <= 1.0 and np.max(np.abs(T)) < 1e3:
        assert np.linalg.det(T) == pytest.approx(1.0, abs=1e-9)


def test_empty_fraction_gives_p_matrix():
    T_p, T_q = chain_pair(0.7)
    np.testing.assert_array_equal(supercell_tm((), T_p, T_q), T_p)
    np.testing.assert_allclose(supercell_tm((1,), T_p, T_q), T_q @ T_p)


def test_direct_product_order():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    B = np.array([[1.0, 0.0], [3.0, 1.0]])
    np.testing.assert_array_equal(supercell_tm_direct("pq", A, B), B @ A)


@given(st.integers(0, 300), st.floats(0.0, 2.0))
def test_mat_power_matches_numpy(k, omega):
    T = chain_pair(omega)[1]
    ref = np.linalg.matrix_power(T, k)
    got = mat_power(T, k)
    assert np.max(np.abs(got - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_mat_power_rejects_negative():
    with pytest.raises(ValueError):
        mat_power(np.eye(2), -1)


def test_renormalize_leaves_exact_and_huge_alone():
    T = np.array([[2.0, 0.0], [0.0, 0.5]])
    assert renormalize(T) is T
    drifted = T * (1 + 1e-9)
    assert np.linalg.det(renormalize(drifted)) == pytest.approx(1.0, abs=1e-14)
    far = T * 3.0
    np.testing.assert_array_equal(renormalize(far), far)


def test_half_trace_scaled_signed_overflow():
    T_p, T_q = chain_pair(np.array([2.5, 0.5]))
    word = str(word_for(Fraction(233, 377))) * 3
    z = half_trace_scaled(word, T_p, T_q)
    assert np.isinf(z[0])
    ref = 0.5 * np.trace(product(word, {"p": T_p[1], "q": T_q[1]}))
    assert z[1] == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_admitted_2x2_treats_nan_as_blocked():
    T = np.full((2, 2), np.nan)
    assert not admitted_2x2(T)
    assert admitted_2x2(np.eye(2))


# -- 4x4 ------------------------------------------------------------------

def _random4(rng):
    return rng.normal(size=(4, 4))


def test_compound_is_multiplicative_and_traces_to_c2():
    rng = np.random.default_rng(4)
    for _ in range(20):
        A, B = _random4(rng), _random4(rng)
        np.testing.assert_allclose(compound2(A @ B), compound2(A) @ compound2(B), atol=1e-10)
        ev = np.linalg.eigvals(A)
        e2 = sum(ev[i] * ev[j] for i in range(4) for j in range(i + 1, 4))
        assert np.trace(compound2(A)) == pytest.approx(e2.real, rel=1e-9, abs=1e-9)
        assert char_coeffs_4x4(A)[1] == pytest.approx(e2.real, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("case", "abcd")
def test_beam_branches_match_high_precision_product(case):
    spec = BEAM_CASES[case]
    omega = np.array([5.0, 40.0, 120.0, 400.0])
    T_p, T_q = element_tms(spec, omega)
    for x in ("1/2", "3/11", "21/34"):
        plus, minus = supercell_branches_4x4(cf_from_rational(x), T_p, T_q)
        word = str(word_for(x))
        for i in range(len(omega)):
            ref = branches_mp(word, T_p[i], T_q[i])
            for got, want in zip((plus[i], minus[i]), ref):
                assert abs(got - want) <= 1e-8 * max(1.0, abs(want)), (case, x, omega[i])


@pytest.mark.parametrize("case", "abcd")
def test_propagating_branches_match_pencil(case):
    # Bloch multipliers on the unit circle from a QZ pencil, product never formed
    spec = BEAM_CASES[case]
    omega = np.linspace(2.0, 300.0, 12)
    T_p, T_q = element_tms(spec, omega)
    word = str(word_for("3/11"))
    plus, minus = supercell_branches_4x4(cf_from_rational("3/11"), T_p, T_q)
    for i in range(len(omega)):
        lam = bloch_multipliers([T_p[i] if s == "p" else T_q[i] for s in word])
        s_ref = lam + 1.0 / lam
        for b in (plus[i], minus[i]):
            if abs(b.imag) < 1e-12 and abs(b.real) <= 1.0:
                assert np.min(np.abs(s_ref - 2.0 * b)) < 1e-7


def test_stable_branches_match_naive_for_short_cells():
    T_p, T_q = element_tms(BEAM_CASES["a"], np.linspace(1.0, 150.0, 40))
    for x in ("1/2", "2/7"):
        cf = cf_from_rational(x)
        plus, minus = supercell_branches_4x4(cf, T_p, T_q)
        np_, nm = cos_kL_4x4(supercell_tm(cf, T_p, T_q), check=False)
        np.testing.assert_allclose(plus, np_, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(minus, nm, rtol=1e-9, atol=1e-9)


def test_palindromy_check_raises_on_generic_matrix():
    rng = np.random.default_rng(0)
    with pytest.raises(PalindromyError):
        cos_kL_4x4(_random4(rng) * 3.0)


def test_quadratic_roots_agree_with_formula():
    T_p, T_q = element_tms(BEAM_CASES["b"], 30.0)
    T = T_q @ T_p @ T_p
    d13, d4 = palindromy_defect(T)
    assert d13 < 1e-10 and d4 < 1e-10
    roots = quadratic_branches_4x4(T)
    plus, minus = cos_kL_4x4(T)
    got = np.sort_complex(np.array([plus, minus]))
    np.testing.assert_allclose(got, np.sort_complex(roots), rtol=1e-10, atol=1e-10)


# -- Chebyshev machinery ----------------------------------------------------

@given(st.integers(0, 12), st.floats(-0.99, 0.99))
def test_chebyshev_u_closed_form(r, x):
    th = np.arccos(x)
    assert chebyshev_u(r, x) == pytest.approx(np.sin((r + 1) * th) / np.sin(th), abs=1e-9)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.floats(0.0, 2.5))
def test_trace_map_iterate_and_closed_agree_with_products(prefix, omega):
    seq0 = alpha_r(prefix, 0)
    T_p, T_q = chain_pair(omega)
    Ta = supercell_tm(cf_from_rational(seq0.a), T_p, T_q)
    Tb = supercell_tm(cf_from_rational(seq0.b), T_p, T_q)
    state = ChebSequenceState.from_matrices(Ta, Tb)
    zs = cheb_z_iterate(state, 12)
    for r, z in enumerate(zs):
        direct = 0.5 * np.trace(tau_r(Ta, Tb, r))
        assert z == pytest.approx(direct, rel=1e-9, abs=1e-9)
        if r >= 2:
            assert cheb_z_closed(state, r - 1) == pytest.approx(z, rel=1e-9, abs=1e-9)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=5), st.integers(0, 40))
def test_alpha_r_laws(prefix, r):
    seq = alpha_r(prefix, r)
    n_r, n_a, n_b = size_law(prefix, r)
    assert n_r == n_a + r * n_b == seq.size
    if seq.a != seq.b:
        assert zeta_r(prefix, r) == (seq.alpha - seq.b) / (seq.a - seq.b)
    # alpha_r is the prefix with its last term raised by r
    terms = list(prefix)
    terms[-1] += r
    from sturmwave.numbers import rational_from_cf
    assert seq.alpha == rational_from_cf(tuple(terms))


def test_alpha_r_word_is_a_then_b_powers():
    # B(alpha_r) = B(a) B(b)^r up to the ordering of the block recursion
    seq = alpha_r((1, 2, 2, 2), 3)
    assert len(str(word_for(seq.alpha))) == 29 + 12 * 3


def test_cos_kl_2x2_is_half_trace():
    T = np.array([[3.0, 1.0], [2.0, 1.0]])
    assert cos_kL_2x2(T) == 2.0
