from fractions import Fraction

import numpy as np
import pytest

from photoshadow.haar import (MomentIndex, RngSeed, fourth_moment_analytic, fourth_moment_mc,
                              haar_chunks, reduced_fourth_moment, sample_haar, sample_haar_batch,
                              verification_patterns, weingarten_value)
from photoshadow.matcore import validate_unitary


def test_same_seed_same_unitary():
    np.testing.assert_array_equal(sample_haar(8, RngSeed(5, 1)), sample_haar(8, RngSeed(5, 1)))
    assert not np.allclose(sample_haar(8, RngSeed(5, 1)), sample_haar(8, RngSeed(5, 2)))


def test_chunk_invariance():
    whole = sample_haar_batch(4, 1000, RngSeed(9))
    parts = np.concatenate(list(haar_chunks(4, 1000, RngSeed(9), chunk=97)))
    np.testing.assert_array_equal(whole, parts)


def test_unitarity_and_d1():
    u = sample_haar_batch(6, 200, RngSeed(1))
    assert all(validate_unitary(x) for x in u)
    z = sample_haar(1, RngSeed(2))
    assert z.shape == (1, 1) and abs(abs(z[0, 0]) - 1) < 1e-14


def test_second_moment():
    u = sample_haar_batch(4, 200_000, RngSeed(3))
    x = np.abs(u[:, 1, 2]) ** 2
    assert abs(x.mean() - 0.25) <= 3 * x.std() / np.sqrt(x.size)


@pytest.mark.parametrize("part,d,value", [("OneOne", 2, Fraction(1, 3)), ("Two", 2, Fraction(-1, 6)),
                                          ("OneOne", 8, Fraction(1, 63))])
def test_weingarten_values(part, d, value):
    assert weingarten_value(part, d) == value


def test_weingarten_d1_rejected():
    with pytest.raises(ValueError):
        weingarten_value("Two", 1)


def test_fourth_moment_analytic_oracles():
    assert fourth_moment_analytic(MomentIndex(0, 0, 0, 0, 0, 0, 0, 0), 2) == Fraction(1, 3)
    assert fourth_moment_analytic(MomentIndex(0, 0, 0, 1, 0, 0, 0, 1), 2) == Fraction(1, 6)
    assert fourth_moment_analytic(MomentIndex(0, 0, 0, 0, 1, 0, 0, 0), 2) == 0
    for d in (2, 4, 8):
        assert fourth_moment_analytic(MomentIndex(*[0] * 8), d) == Fraction(2, d * (d + 1))


@pytest.mark.parametrize("idx,d,exact", [(MomentIndex(*[0] * 8), 4, 0.1),
                                         (MomentIndex(0, 0, 0, 1, 0, 0, 0, 1), 8, 1 / 72),
                                         (MomentIndex(0, 0, 0, 0, 1, 0, 0, 0), 4, 0.0)])
def test_fourth_moment_mc(idx, d, exact):
    mean, err = fourth_moment_mc(idx, d, 200_000, RngSeed(11))
    assert abs(mean - exact) <= 3 * err


def test_reduced_moment():
    assert reduced_fourth_moment(0, 0, 1, 1, 8) == Fraction(1, 72)
    assert reduced_fourth_moment(2, 2, 2, 2, 4) == Fraction(2, 20)
    assert reduced_fourth_moment(0, 1, 2, 3, 8) == 0
    assert reduced_fourth_moment(0, 0, 1, 1, 8, summed=True) == Fraction(1, 9)


def test_reduced_moment_matches_full_formula():
    d = 3
    for a, j, k, b in np.ndindex(d, d, d, d):
        full = fourth_moment_analytic(MomentIndex(1, j, 1, b, 1, a, 1, k), d)
        assert full == reduced_fourth_moment(a, j, k, b, d)


def test_pattern_set():
    pats = verification_patterns()
    assert len(pats) == 16 and len({label for label, _ in pats}) == 16
    nonzero = [p for _, p in pats if fourth_moment_analytic(p, 2) != 0]
    assert len(nonzero) == 9
