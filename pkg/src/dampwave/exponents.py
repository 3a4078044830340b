"""Scalar exponent arithmetic: modified powers, Fujita thresholds, GN data.

Every function here is pure and keeps ``int``/``Fraction`` inputs exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ._numbers import Number, as_number, compare, div, half


class DegenerateParameters(ValueError):
    """Raised when a Gagliardo-Nirenberg parameter set has a zero denominator."""


@dataclass(frozen=True)
class SpaceParams:
    """Space dimension ``n`` and additional-regularity index ``m``.

    ``m = 2`` is accepted for arithmetic; theorem checkers warn about it.
    """

    n: int
    m: Number = 1

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        m = as_number(self.m)
        if compare(m, 1) < 0 or compare(m, 2) > 0:
            raise ValueError(f"m must lie in [1, 2], got {m}")
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class NonlinearityParams:
    p: Number
    q: Number
    gamma1: Number = 0
    gamma2: Number = 0

    def __post_init__(self):
        for name in ("p", "q", "gamma1", "gamma2"):
            object.__setattr__(self, name, as_number(getattr(self, name)))
        if not (self.p > 1 and self.q > 1):
            raise ValueError(f"p and q must exceed 1, got p={self.p}, q={self.q}")
        if self.gamma1 < -1 or self.gamma2 < -1:
            raise ValueError(f"gamma1 and gamma2 must be >= -1, got {self.gamma1}, {self.gamma2}")


@dataclass(frozen=True)
class InterplayParams:
    alpha: Number
    beta: Number

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_number(self.alpha))
        object.__setattr__(self, "beta", as_number(self.beta))
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")

    @property
    def previously_studied(self) -> bool:
        """Both exponents below 1: the two clocks are equivalent."""
        return max(self.alpha, self.beta) < 1


def modify(power: Number, weight: Number, m: Number) -> Number:
    """One branch-selected modified exponent: ``(x-1)w+1`` for w >= 1, else ``(x-m/2)w+m/2``."""
    if weight >= 1:
        return (power - 1) * weight + 1
    return (power - half(m)) * weight + half(m)


def unmodify(threshold: Number, weight: Number, m: Number) -> Number:
    """Inverse of :func:`modify` in its first argument."""
    if weight >= 1:
        return div(threshold - 1, weight) + 1
    return div(threshold - half(m), weight) + half(m)


def modified_exponents(p: Number, q: Number, interplay: InterplayParams, m: Number) -> tuple[Number, Number]:
    """``(p_tilde, q_tilde)``; p is weighted by beta and q by alpha."""
    p, q, m = as_number(p), as_number(q), as_number(m)
    return modify(p, interplay.beta, m), modify(q, interplay.alpha, m)


def fujita_threshold(space: SpaceParams, gamma: Number) -> Number:
    """Modified Fujita exponent ``1 + 2m(gamma+1)/n``."""
    gamma = as_number(gamma)
    if gamma < -1:
        raise ValueError(f"gamma must be >= -1, got {gamma}")
    return 1 + Fraction(2, space.n) * space.m * (gamma + 1)


def gn_upper_bound(n: int) -> Number:
    """``n/(n-2)`` for n > 2, infinity otherwise."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return math.inf if n <= 2 else Fraction(n, n - 2)


def loss_of_decay(space: SpaceParams, gamma1: Number, p_tilde: Number) -> Number:
    """``kappa = gamma1 - n/(2m) (p_tilde - 1) + 1``."""
    gamma1, p_tilde = as_number(gamma1), as_number(p_tilde)
    if not p_tilde > 1:
        raise ValueError(f"p_tilde must exceed 1, got {p_tilde}")
    return formal_loss_of_decay(space, gamma1, p_tilde)


def formal_loss_of_decay(space: SpaceParams, gamma1: Number, p_tilde: Number) -> Number:
    """The loss-of-decay formula without the ``p_tilde > 1`` precondition."""
    return as_number(gamma1) - div(space.n, 2 * space.m) * (as_number(p_tilde) - 1) + 1


@dataclass(frozen=True)
class GNTheta:
    theta: Number
    feasible: bool
    lower: Number


def gn_theta(p_target: Number, p0: Number, p1: Number, s: Number, sigma: Number, n: int) -> GNTheta:
    """Interpolation parameter of the fractional Gagliardo-Nirenberg inequality.

    ``||u||_{H^s_p} <~ ||u||_{L^p0}^(1-theta) ||u||_{H^sigma_p1}^theta`` with
    ``theta = (1/p0 - 1/p + s/n) / (1/p0 - 1/p1 + sigma/n)``; feasible when
    ``s/sigma <= theta <= 1``.
    """
    p_target, p0, p1, s, sigma = (as_number(v) for v in (p_target, p0, p1, s, sigma))
    for name, val in (("p_target", p_target), ("p0", p0), ("p1", p1)):
        if not 1 < val < math.inf:
            raise ValueError(f"{name} must lie in (1, inf), got {val}")
    if not 0 <= s < sigma:
        raise ValueError(f"need 0 <= s < sigma, got s={s}, sigma={sigma}")
    denom = div(1, p0) - div(1, p1) + div(sigma, n)
    if compare(denom, 0) == 0:
        raise DegenerateParameters("gn_theta denominator vanishes")
    theta = div(div(1, p0) - div(1, p_target) + div(s, n), denom)
    lower = div(s, sigma)
    feasible = compare(theta, lower) >= 0 and compare(theta, 1) <= 0
    return GNTheta(theta, feasible, lower)


@dataclass(frozen=True)
class SobolevGNChoice:
    """The interpolation exponents used for the ``|v|^p`` estimate with Sobolev data."""

    q1: Number
    q2: Number
    theta1: GNTheta | None
    theta2: GNTheta | None

    @property
    def feasible(self) -> bool:
        return bool(self.theta1 and self.theta1.feasible and self.theta2 and self.theta2.feasible)


def sobolev_gn_choice(n: int, p: Number, s1: Number, s2: Number) -> SobolevGNChoice:
    """Feasibility of ``q2 = 2n/(n-2)``, ``q1 = n(p-1)`` for the Sobolev-data estimate.

    ``theta1`` interpolates ``L^q1`` between ``L^2`` and ``H^s2``; ``theta2``
    interpolates ``H^(s1-1)_q2`` between the same endpoints. A ``q1 <= 1``
    makes ``theta1`` undefined, reported as ``None`` (infeasible).
    """
    if n <= 2:
        raise ValueError("the Sobolev-data choice needs n > 2")
    p, s1, s2 = as_number(p), as_number(s1), as_number(s2)
    q2 = Fraction(2 * n, n - 2)
    q1 = n * (p - 1)
    theta1 = gn_theta(q1, 2, 2, 0, s2, n) if q1 > 1 else None
    theta2 = gn_theta(q2, 2, 2, s1 - 1, s2, n) if 0 <= s1 - 1 < s2 else None
    return SobolevGNChoice(q1, q2, theta1, theta2)
