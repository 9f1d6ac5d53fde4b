from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sturmwave.numbers import cf_from_rational, convergents
from sturmwave.words import (assign_parameters, block_history, cutting_sequence_oracle, g_closed_form,
                             g_vectors, is_rotation, parameter_sum, sturmian_block, supercell_length,
                             word_for)

generators = st.builds(lambda q, p: Fraction(p % (q + 1), q), st.integers(1, 60), st.integers(0, 10 ** 6))
positive = generators.filter(lambda x: x > 0)


@pytest.mark.parametrize("alpha, word", [
    ("2/7", "pppqpppqp"),
    ("1/2", "ppq"),
    ("0/1", "p"),
    ("1/1", "pq"),
    ("3/11", "pppqppppqppppq"),
])
def test_word_examples(alpha, word):
    assert str(word_for(alpha)) == word


def test_blocks_3_11():
    hist = block_history(cf_from_rational("3/11"))
    assert hist.blocks[2:] == ("pppq", "pppqp", "pppqppppqppppq")
    assert hist.lengths[2:] == (4, 5, 14)


@given(generators)
def test_counts_and_length(x):
    w = word_for(x)
    assert len(w) == supercell_length(x) == x.numerator + x.denominator
    assert w.count_q == x.numerator and w.count_p == x.denominator
    assert w.alpha == x


@given(generators)
def test_block_lengths_are_convergent_sums(x):
    cf = cf_from_rational(x)
    hist = block_history(cf)
    sums = tuple(n + d for n, d in convergents(cf).pairs)
    assert hist.lengths == sums
    assert tuple(len(b) for b in hist.blocks) == sums


@given(generators)
def test_cyclic_word_is_balanced(x):
    # Sturmian (mechanical) words: equal-length cyclic factors differ by at most one q
    w = str(word_for(x))
    n = len(w)
    ww = w * 2
    for length in range(1, n + 1):
        counts = {ww[i:i + length].count("q") for i in range(n)}
        assert max(counts) - min(counts) <= 1


@given(positive, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_cutting_sequence_matches_recursion(x, tp, tq):
    cut = str(cutting_sequence_oracle(x, tp, tq))
    assert is_rotation(cut, str(word_for(x)))


@given(generators, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_parameter_sum_identities(x, tp, tq):
    w = word_for(x)
    s = parameter_sum(w, tp, tq)
    nu, de = x.numerator, x.denominator
    assert s == pytest.approx(de * tp + nu * tq, rel=1e-12)
    N = nu + de
    assert s == pytest.approx(N * (tp + float(x) * tq) / (1 + float(x)), rel=1e-12)


def test_parameter_track_is_periodic():
    track = assign_parameters("ppq", 1.0, 2.0)
    assert [track.at(j) for j in range(1, 7)] == [1.0, 1.0, 2.0, 1.0, 1.0, 2.0]
    with pytest.raises(IndexError):
        track.at(0)


@given(generators, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_g_vectors_closed_form(x, tp, tq):
    cf = cf_from_rational(x)
    geo = g_vectors(cf, tp, tq)
    closed = g_closed_form(cf, tp, tq)
    for (x1, y1), (x2, y2) in zip(geo.g, closed):
        assert x1 == x2
        assert y1 == pytest.approx(y2, rel=1e-12)
    # the last fan vector is vertical: it closes one period of the tiling
    assert geo.g[-1][0] == 0


def test_sturmian_block_of_empty_fraction():
    assert str(sturmian_block(())) == "p"
    assert np.all(assign_parameters("", 1, 2).values.shape == (0,))
