import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from dampwave.exponents import (
    DegenerateParameters,
    InterplayParams,
    NonlinearityParams,
    SpaceParams,
    fujita_threshold,
    gn_theta,
    gn_upper_bound,
    loss_of_decay,
    modified_exponents,
    modify,
    sobolev_gn_choice,
    unmodify,
)

fractions = st.fractions(min_value=F(1, 20), max_value=F(20), max_denominator=50)
powers = st.fractions(min_value=F(21, 20), max_value=F(12), max_denominator=60)
ms = st.fractions(min_value=1, max_value=2, max_denominator=12)


def test_space_params_validation():
    assert SpaceParams(3, F(3, 2)).m == F(3, 2)
    assert SpaceParams(2, 2).m == 2
    for bad in [dict(n=0), dict(n=2, m=F(1, 2)), dict(n=2, m=3), dict(n=1.5)]:
        with pytest.raises(ValueError):
            SpaceParams(**bad)


def test_nonlinearity_params_validation():
    NonlinearityParams(F(6, 5), 2, -1, F(-1, 3))
    with pytest.raises(ValueError):
        NonlinearityParams(1, 2)
    with pytest.raises(ValueError):
        NonlinearityParams(2, 2, F(-3, 2))


def test_interplay_flag():
    assert InterplayParams(F(1, 2), F(2, 3)).previously_studied
    assert not InterplayParams(3, F(1, 3)).previously_studied
    with pytest.raises(ValueError):
        InterplayParams(0, 1)


@pytest.mark.parametrize("p, q, alpha, beta, m, want", [
    (1, 2, 1, 3, 1, (1, 2)),
    (2, 2, 1, F(1, 3), 2, (F(4, 3), 2)),
    (2, F(7, 5), 3, 1, 1, (2, F(11, 5))),
    (F(6, 5), F(3, 2), 3, F(1, 3), 2, (F(16, 15), F(5, 2))),
])
def test_modified_exponents_examples(p, q, alpha, beta, m, want):
    assert modified_exponents(p, q, InterplayParams(alpha, beta), m) == want


def test_modified_exponents_float_input():
    pt, qt = modified_exponents(2.0, 1.4, InterplayParams(3, F(1, 3)), 2)
    assert qt == pytest.approx(2.2, abs=1e-14)
    assert pt == pytest.approx(4 / 3, abs=1e-14)


@given(powers, powers, ms)
def test_identity_interplay(p, q, m):
    assert modified_exponents(p, q, InterplayParams(1, 1), m) == (p, q)


@given(powers, ms)
def test_seam_at_weight_one(p, m):
    # Just below 1, the lower branch converges to the upper one.
    eps = F(1, 10**9)
    below, at = modify(p, 1 - eps, m), modify(p, 1, m)
    assert abs(below - at) <= eps * (abs(p) + 1)


@given(powers, powers, fractions, ms)
def test_modify_monotone(p1, p2, w, m):
    lo, hi = sorted((p1, p2))
    assert modify(lo, w, m) <= modify(hi, w, m)


@given(powers, fractions, ms)
def test_unmodify_inverts(p, w, m):
    assert unmodify(modify(p, w, m), w, m) == p


@pytest.mark.parametrize("n, m, gamma, want", [
    (2, 2, -1, 1),
    (2, 2, F(-1, 3), F(7, 3)),
    (4, 1, 0, F(3, 2)),
    (1, 1, 0, 3),
])
def test_fujita_threshold(n, m, gamma, want):
    got = fujita_threshold(SpaceParams(n, m), gamma)
    assert got == want and isinstance(got, (int, F))


def test_classical_fujita_recovered():
    for n in range(1, 8):
        assert fujita_threshold(SpaceParams(n, 1), 0) == 1 + F(2, n)


def test_fujita_rejects_small_gamma():
    with pytest.raises(ValueError):
        fujita_threshold(SpaceParams(2, 1), F(-3, 2))


@pytest.mark.parametrize("n, want", [(1, math.inf), (2, math.inf), (3, 3), (4, 2), (6, F(3, 2))])
def test_gn_upper_bound(n, want):
    assert gn_upper_bound(n) == want


@pytest.mark.parametrize("n, m, g1, pt, want", [
    (3, 1, 0, F(3, 2), F(1, 4)),
    (2, 2, -1, F(3, 2), F(-1, 4)),
    (5, F(3, 2), 1, 2, F(1, 3)),
])
def test_loss_of_decay_examples(n, m, g1, pt, want):
    assert loss_of_decay(SpaceParams(n, m), g1, pt) == want


@settings(max_examples=300)
@given(st.integers(1, 12), ms, st.fractions(min_value=F(-39, 40), max_value=5, max_denominator=40))
def test_kappa_vanishes_at_threshold(n, m, g1):
    space = SpaceParams(n, m)
    assert loss_of_decay(space, g1, fujita_threshold(space, g1)) == 0


@given(st.integers(1, 12), ms, st.fractions(min_value=-1, max_value=5, max_denominator=40), powers, powers)
def test_kappa_strictly_decreasing(n, m, g1, a, b):
    lo, hi = sorted((a, b))
    if lo == hi:
        return
    space = SpaceParams(n, m)
    assert loss_of_decay(space, g1, hi) < loss_of_decay(space, g1, lo)


def test_loss_of_decay_rejects_small_p():
    with pytest.raises(ValueError):
        loss_of_decay(SpaceParams(2, 1), 0, 1)


def test_gn_theta_examples():
    ident = gn_theta(3, 3, 2, 0, 1, 5)
    assert ident.theta == 0 and ident.feasible
    half = gn_theta(2, 2, 2, 1, 2, 4)
    assert half.theta == F(1, 2) and half.feasible


@given(st.integers(1, 10), st.fractions(min_value=F(11, 10), max_value=10, max_denominator=20),
       st.fractions(min_value=F(11, 10), max_value=10, max_denominator=20),
       st.fractions(min_value=F(1, 10), max_value=4, max_denominator=20))
def test_gn_theta_at_s_equal_sigma_is_one(n, p0, p1, sigma):
    # s = sigma is outside the strict precondition; approach it from below.
    s = sigma * (1 - F(1, 10**12))
    try:
        res = gn_theta(p1, p0, p1, s, sigma, n)
    except DegenerateParameters:
        return
    assert abs(res.theta - 1) < F(1, 10**10) * (1 + n)


def test_gn_theta_degenerate():
    # 1/p0 - 1/p1 + sigma/n = 0 with p0 = 4, p1 = 2, sigma = 1/2, n = 2.
    with pytest.raises(DegenerateParameters):
        gn_theta(3, 4, 2, 0, F(1, 2), 2)


@pytest.mark.parametrize("bad", [
    dict(p_target=1, p0=2, p1=2, s=0, sigma=1, n=3),
    dict(p_target=2, p0=2, p1=2, s=1, sigma=1, n=3),
    dict(p_target=2, p0=2, p1=2, s=-1, sigma=1, n=3),
])
def test_gn_theta_preconditions(bad):
    with pytest.raises(ValueError):
        gn_theta(**bad)


@settings(max_examples=400)
@given(st.integers(3, 12), st.fractions(min_value=F(41, 40), max_value=6, max_denominator=40),
       st.data())
def test_sobolev_choice_matches_closed_range(n, p, data):
    s2 = data.draw(st.fractions(min_value=F(11, 10), max_value=F(n, 2) + 1, max_denominator=20))
    s1 = data.draw(st.fractions(min_value=1, max_value=s2, max_denominator=20))
    choice = sobolev_gn_choice(n, p, s1, s2)
    upper = math.inf if n <= 2 * s2 else 1 + F(2, n - 2 * s2)
    assert choice.feasible == (1 + F(2, n) <= p <= upper)
