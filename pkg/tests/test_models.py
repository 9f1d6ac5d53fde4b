import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, strategies as st

from oracles import product, rod_tm_explicit
from sturmwave.models import (BEAM_CASES, BeamElement, ChainElement, ModelSpec, ModelSpecError, RodElement,
                              SpringSupport, beam_W, beam_tm, beam_tm_closed, chain_spec, chain_tm,
                              element_tms, expm_oracle, rod_W, rod_Z_alpha, rod_spec, rod_tm,
                              rod_zr_closed, spring_tm, supported_beam_tm)
from sturmwave.tmm import palindromy_defect

pos = st.floats(0.1, 10.0)


@given(pos, pos, st.floats(0.0, 5.0))
def test_chain_tm_unimodular_and_single_band(m, K, omega):
    T = chain_tm(ChainElement(m, K), omega)
    assert np.linalg.det(T) == pytest.approx(1.0, abs=1e-10 * max(1.0, m * omega ** 2 / K) ** 2)
    assert 0.5 * np.trace(T) == pytest.approx(1.0 - m * omega ** 2 / (2.0 * K), rel=1e-12, abs=1e-12)


@given(pos, pos, st.floats(0.1, 3.0), st.floats(0.0, 20.0))
def test_rod_tm_matches_explicit_and_expm(EA, rhoA, l, omega):
    e = RodElement(EA, rhoA, l)
    T = rod_tm(e, omega)
    np.testing.assert_allclose(T, rod_tm_explicit(EA, rhoA, l, omega), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(T, sl.expm(rod_W(e, omega) * l), rtol=1e-8, atol=1e-8 * max(1.0, EA / l))


def test_rod_tm_static_limit():
    T = rod_tm(RodElement(2.0, 1.0, 3.0), 0.0)
    np.testing.assert_allclose(T, [[1.0, 1.5], [0.0, 1.0]])


@pytest.mark.parametrize("seed", range(5))
def test_expm_oracle_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(4, 4)) * rng.uniform(0.1, 20.0)
    np.testing.assert_allclose(expm_oracle(W), sl.expm(W), rtol=1e-10, atol=1e-10 * np.abs(sl.expm(W)).max())


@pytest.mark.parametrize("case", "abcd")
def test_beam_tm_matches_scipy_expm(case):
    beam = BEAM_CASES[case].element("p")
    beam = beam[0] if isinstance(beam, tuple) else beam
    omega = np.linspace(0.0, 500.0, 11)
    T = beam_tm(beam, omega)
    for i, w in enumerate(omega):
        ref = sl.expm(beam_W(beam, w) * beam.l)
        np.testing.assert_allclose(T[i], ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())


@pytest.mark.parametrize("case", "abcd")
def test_element_tms_are_palindromic(case):
    T_p, T_q = element_tms(BEAM_CASES[case], np.linspace(1.0, 1000.0, 50))
    for T in (T_p, T_q, T_q @ T_p):
        d13, d4 = palindromy_defect(T)
        assert np.all(d13 < 1e-10) and np.all(d4 < 1e-10)


def test_beam_semigroup():
    a = BeamElement(0.25, 3.0, 0.01, 8.33e-6, 0.4)
    b = BeamElement(0.25, 3.0, 0.01, 8.33e-6, 0.6)
    ab = BeamElement(0.25, 3.0, 0.01, 8.33e-6, 1.0)
    for w in (3.0, 50.0, 180.0):
        lhs = beam_tm(ab, w)
        rhs = beam_tm(b, w) @ beam_tm(a, w)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-8 * np.abs(lhs).max())


def test_beam_closed_form_agrees_off_the_coupling_entries():
    # the printed closed form matches the exponential except at (3,2) and (3,4)
    # (1-based), whose printed expressions do not satisfy dT/dl = W T
    beam = BEAM_CASES["a"].element("p")
    w = np.array([10.0, 70.0])
    T = beam_tm(beam, w, cross_check=False)
    C = beam_tm_closed(beam, w)
    mask = np.ones((4, 4), dtype=bool)
    mask[2, 1] = mask[2, 3] = False
    for i in range(len(w)):
        scale = np.abs(T[i]).max()
        assert np.all(np.abs(C[i] - T[i])[mask] <= 1e-8 * scale)


def test_spring_support_order():
    beam = BEAM_CASES["c"].element("p")[0]
    s = SpringSupport(5.0)
    np.testing.assert_allclose(supported_beam_tm(beam, s, 20.0), beam_tm(beam, 20.0) @ spring_tm(s))
    assert np.linalg.det(spring_tm(s)) == 1.0


@pytest.mark.parametrize("lam", [2.0, 4.0, 10.0])
def test_rod_closed_form_against_products(lam):
    spec = rod_spec(lam)
    omega = np.linspace(0.0, 40.0, 200)
    T_p, T_q = element_tms(spec, omega)
    for r in range(0, 8):
        direct = 0.5 * np.trace(T_q @ np.linalg.matrix_power(T_p, r), axis1=-2, axis2=-1)
        np.testing.assert_allclose(rod_zr_closed(lam, r, omega), direct, atol=1e-9)


@given(st.integers(1, 30), st.floats(0.5, 10.0), st.floats(0.0, 30.0))
def test_z_alpha_substitution(r, lam, omega):
    assert rod_Z_alpha(lam, 1.0 / r, omega) == pytest.approx(rod_zr_closed(lam, r, omega), abs=1e-9)


def test_z_alpha_rejects_zero():
    with pytest.raises(ValueError):
        rod_Z_alpha(2.0, 0.0, 1.0)


def test_lambda_one_is_uniform():
    omega = np.linspace(0.0, 50.0, 500)
    assert np.all(np.abs(rod_zr_closed(1.0, 5, omega)) <= 1.0 + 1e-12)


# -- specification ---------------------------------------------------------

def test_spec_from_mapping_roundtrip():
    spec = ModelSpec.from_mapping({"kind": "chain", "varied": "K", "theta_p": 1, "theta_q": 2,
                                   "params": {"m": 1.0}})
    assert spec == chain_spec()
    assert spec.size == 2 and BEAM_CASES["c"].size == 4


@pytest.mark.parametrize("data, fragment", [
    ({"kind": "string", "varied": "K", "theta_p": 1, "theta_q": 2}, "unknown model kind"),
    ({"kind": "chain", "varied": "EA", "theta_p": 1, "theta_q": 2, "params": {"m": 1}}, "varied field"),
    ({"kind": "chain", "varied": "K", "theta_p": 1, "theta_q": 2}, "missing"),
    ({"kind": "chain", "varied": "K", "theta_p": 1, "theta_q": 2, "params": {"m": 1, "x": 2}}, "unknown"),
    ({"kind": "chain", "varied": "K", "theta_p": "a", "theta_q": 2, "params": {"m": 1}}, "number"),
    ({"kind": "chain", "varied": "K", "theta_p": -1, "theta_q": 2, "params": {"m": 1}}, "p-element"),
    ({"kind": "chain", "varied": "K", "theta_q": 2, "params": {"m": 1}}, "theta_p"),
])
def test_spec_errors_name_the_field(data, fragment):
    with pytest.raises(ModelSpecError, match=fragment):
        ModelSpec.from_mapping(data)


def test_rod_spec_is_lambda_squared():
    spec = rod_spec(4.0)
    assert spec.theta_p == 16.0 and spec.theta_q == 1.0
    assert spec.element("p").c == pytest.approx(4.0 * spec.element("q").c)
