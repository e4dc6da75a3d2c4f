from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from choquard.grid import TensorGrid
from choquard.params import (ParameterError, Potential, ProblemParams, derive_exponents,
                             smooth_ramp_well, validate_potential, validate_values)


def test_exponents_n4_mu2():
    ex = derive_exponents(4, 2)
    assert ex.two_mu_star == 3
    assert ex.exact["level_coeff"] == Fraction(1, 3)
    assert ex.level_coeff == pytest.approx(1 / 3, abs=0)


def test_exponents_n5_mu1():
    ex = derive_exponents(5, 1)
    assert ex.two_mu_star == 3 and ex.nehari_exp == 4


@pytest.mark.parametrize("N,mu", [(4, 0), (4, 4), (4, 5), (2, 1), (4, -1)])
def test_exponents_reject(N, mu):
    with pytest.raises(ParameterError):
        derive_exponents(N, mu)


@given(st.integers(3, 8), st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100), max_denominator=1000))
def test_nehari_exponent_identity(N, frac):
    mu = frac * N
    ex = derive_exponents(N, mu)
    # 2 (2N-mu)/(N-2) - 2 = 2 (N - mu + 2)/(N - 2), exactly
    assert ex.exact["nehari_exp"] == Fraction(2) * (N - mu + 2) / (N - 2)
    assert ex.exact["level_coeff"] == (ex.exact["two_mu_star"] - 1) / (2 * ex.exact["two_mu_star"])
    assert (ex.two_mu_star > 2) == (mu < 4)


def test_params_validation():
    with pytest.raises(ParameterError):
        ProblemParams(4, 4.5, indefinite_mode=True)
    with pytest.raises(ParameterError):
        ProblemParams(5, 4.5, indefinite_mode=True)
    assert ProblemParams(5, 4.5).q == pytest.approx(5.5 / 3)


@pytest.fixture(scope="module")
def g4():
    return TensorGrid(4, 16, 4.0)


def test_ball_well_passes(g4):
    rep = validate_potential(Potential("ball_well", radius=1.0, M0=1.0), g4)
    assert rep.v1 and rep.v2 and rep.v3 and rep.origin_in_zero_set


def test_zero_potential_fails_v1(g4):
    rep = validate_values(np.zeros(g4.shape), g4, 1.0)
    assert not rep.v1
    assert rep.zero_set_touches_shell


def test_annulus_origin_not_in_zero_set(g4):
    pot = Potential("annulus_well", radius=1.5, inner_radius=0.5)
    assert pot.evaluate([np.zeros(1)] * 4)[0] > 0
    rep = validate_potential(pot, g4)
    assert not rep.v1 and any("origin" in n for n in rep.notes)
    ok = validate_potential(Potential("annulus_well", radius=1.5, inner_radius=0.5, allow_origin_outside=True), g4)
    assert ok.v1


@pytest.mark.parametrize("pot", [Potential("ball_well"), Potential("box_well", half_width=1.0),
                                 Potential("annulus_well", radius=1.5, inner_radius=0.5, allow_origin_outside=True),
                                 smooth_ramp_well()])
def test_default_kinds_pass_v1_v2(pot, g4):
    rep = validate_potential(pot, g4)
    assert rep.v1 and rep.v2


def test_smooth_ramp_unbounded_passes_v3(g4):
    pot = smooth_ramp_well()
    rep = validate_potential(pot, g4)
    assert rep.v3
    far = pot.evaluate([np.array([100.0])] + [np.zeros(1)] * 3)[0]
    assert far > 1e4


def test_negative_potential_rejected(g4):
    V = -np.ones(g4.shape)
    rep = validate_values(V, g4)
    assert not rep.v1


@given(st.floats(0, 5), st.floats(0.05, 1.0))
def test_potential_nonnegative_and_c1(d, w):
    pot = Potential("ball_well", radius=1.0, ramp_width=w)
    x = np.array([1.0 + d])
    v = pot.evaluate([x, 0 * x, 0 * x, 0 * x])
    assert v[0] >= 0
    # one-sided difference quotients agree at the well edge (C^1 clamp)
    hs = 1e-6
    left = pot.evaluate([np.array([1.0 - hs])] + [np.zeros(1)] * 3)[0]
    right = pot.evaluate([np.array([1.0 + hs])] + [np.zeros(1)] * 3)[0]
    # quadratic onset: V(1 + h) <= 3 cap (h / w)^2
    assert left == 0 and right <= 3 * 2.0 * (hs / w) ** 2 * (1 + 1e-6)
