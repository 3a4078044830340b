"""Clause-by-clause hypothesis checkers for the global-existence theorems.

Four families of data are covered: energy data above both modified Fujita
exponents (``T2.1``), energy data with one subcritical exponent (``T2.5a`` to
``T2.5d``), Sobolev data of intermediate regularity (``T2.6``) and large
regular data (``T2.7``). Each checker returns a :class:`Verdict` listing every
clause it evaluated; :func:`classify` routes a scenario to the right checker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from ._numbers import Number, as_number, ceil, compare, div, fmt, half
from .exponents import (
    InterplayParams,
    NonlinearityParams,
    SpaceParams,
    formal_loss_of_decay,
    fujita_threshold,
    gn_upper_bound,
    modified_exponents,
    unmodify,
)

PROVENANCE_GAP = 0.2

THEOREM_IDS = ("T2.1", "T2.5a", "T2.5b", "T2.5c", "T2.5d", "T2.6", "T2.7", "none")


class WrongChecker(ValueError):
    """The scenario belongs to a different theorem; ``target`` names it."""

    def __init__(self, message: str, target: str):
        super().__init__(message)
        self.target = target


class NotCovered(ValueError):
    """No theorem applies to the scenario."""


@dataclass(frozen=True)
class Scenario:
    space: SpaceParams
    nl: NonlinearityParams
    interplay: InterplayParams
    s1: Number = 1
    s2: Number = 1
    source: str = "user"
    fitted: Optional[InterplayParams] = None

    def __post_init__(self):
        s1, s2 = as_number(self.s1), as_number(self.s2)
        if s1 < 1 or s2 < 1:
            raise ValueError(f"s1 and s2 must be >= 1, got {s1}, {s2}")
        if self.source not in ("user", "fitted"):
            raise ValueError(f"source must be 'user' or 'fitted', got {self.source!r}")
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)

    @property
    def modified(self) -> tuple[Number, Number]:
        return modified_exponents(self.nl.p, self.nl.q, self.interplay, self.space.m)

    @property
    def fujita(self) -> tuple[Number, Number]:
        return (fujita_threshold(self.space, self.nl.gamma1),
                fujita_threshold(self.space, self.nl.gamma2))

    @property
    def energy_data(self) -> bool:
        return self.s1 == 1 and self.s2 == 1


@dataclass(frozen=True)
class Interval:
    """A real interval with open or closed ends; ``upper`` may be infinite."""

    lower: Number
    upper: Number = math.inf
    lower_closed: bool = False
    upper_closed: bool = False

    def __contains__(self, x) -> bool:
        lo, hi = compare(x, self.lower), compare(x, self.upper)
        return (lo > 0 or (lo == 0 and self.lower_closed)) and (hi < 0 or (hi == 0 and self.upper_closed))

    @property
    def empty(self) -> bool:
        c = compare(self.lower, self.upper)
        return c > 0 or (c == 0 and not (self.lower_closed and self.upper_closed))

    def on_boundary(self, x) -> bool:
        return compare(x, self.lower) == 0 or compare(x, self.upper) == 0

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed and not math.isinf(self.upper) else ")"
        return f"{left}{fmt(self.lower)}, {fmt(self.upper)}{right}"


Operand = Union[Number, Interval]


@dataclass(frozen=True)
class Clause:
    """One hypothesis: ``lhs <relation> rhs`` evaluated to ``passed``.

    ``boundary`` marks equality with a threshold, which matters because all
    strict inequalities fail there.
    """

    name: str
    relation: str
    lhs: Operand
    rhs: Operand
    passed: bool
    boundary: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        out = {"relation": self.relation, "lhs": _render(self.lhs), "rhs": _render(self.rhs),
               "passed": self.passed, "boundary": self.boundary}
        if self.note:
            out["note"] = self.note
        return out


def _render(x: Operand) -> str:
    return str(x) if isinstance(x, Interval) else fmt(x)


_OPS = {
    ">": lambda c: c > 0,
    ">=": lambda c: c >= 0,
    "<": lambda c: c < 0,
    "<=": lambda c: c <= 0,
    "!=": lambda c: c != 0,
}


def _clause(name: str, lhs: Number, op: str, rhs: Number, note: str = "") -> Clause:
    c = compare(lhs, rhs)
    return Clause(name, op, lhs, rhs, _OPS[op](c), boundary=(c == 0), note=note)


def _member(name: str, x: Number, interval: Interval, note: str = "") -> Clause:
    return Clause(name, "in", x, interval, x in interval, interval.on_boundary(x), note)


@dataclass(frozen=True)
class EnvelopeTerm:
    """Predicted bound ``b(t)^b_power (1+B(t,0))^exponent`` for one norm."""

    norm: str
    j: int
    l: int
    exponent: Number
    b_power: int
    order: Optional[Number] = None


@dataclass(frozen=True)
class DecayEnvelope:
    component: str
    terms: tuple[EnvelopeTerm, ...]
    loss: Number = 0

    def exponent(self, j: int = 0, l: int = 0) -> Number:
        for term in self.terms:
            if term.j == j and term.l == l and term.order is None:
                return term.exponent
        raise KeyError(f"no (j={j}, l={l}) term in this envelope")

    def to_dict(self) -> dict:
        out = {"loss": fmt(self.loss)}
        for t in self.terms:
            out[t.norm] = fmt(t.exponent)
            out[f"{t.norm}_b_power"] = t.b_power
        return out


def base_exponent(space: SpaceParams) -> Number:
    """Linear ``L^m``-``L^2`` decay rate ``-(n/2)(1/m - 1/2)``."""
    return -half(space.n) * (div(1, space.m) - Fraction(1, 2))


def energy_envelope(space: SpaceParams, component: str, loss: Number = 0) -> DecayEnvelope:
    """Envelope for ``||grad^j d_t^l w||_2`` with ``j + l <= 1``."""
    base = base_exponent(space)
    terms = []
    for j, l, norm in ((0, 0, "L2"), (1, 0, "L2_grad"), (0, 1, "L2_dt")):
        terms.append(EnvelopeTerm(norm, j, l, base - half(j) - l + loss, -l))
    return DecayEnvelope(component, tuple(terms), loss)


def sobolev_envelope(space: SpaceParams, component: str, s: Number) -> DecayEnvelope:
    """Envelope for ``|| |D|^(s-l) d_t^l w ||_2`` with ``l = 0, 1``."""
    base = base_exponent(space)
    terms = []
    for l, norm in ((0, "Hs"), (1, "Hs_dt")):
        terms.append(EnvelopeTerm(norm, 0, l, base - l - half(s - l), -l, order=s - l))
    return DecayEnvelope(component, tuple(terms), 0)


@dataclass
class Verdict:
    theorem_id: str
    clauses: list[Clause]
    admissible_p: Optional[Interval] = None
    admissible_q: Optional[Interval] = None
    kappa: Optional[Number] = None
    kappa_side: Optional[str] = None
    decay_u: Optional[DecayEnvelope] = None
    decay_v: Optional[DecayEnvelope] = None
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.theorem_id not in THEOREM_IDS:
            raise ValueError(f"unknown theorem id {self.theorem_id!r}")
        if (self.kappa is not None) != self.theorem_id.startswith("T2.5"):
            raise ValueError("kappa is reported exactly for the T2.5 cases")

    @property
    def satisfied(self) -> bool:
        return self.theorem_id != "none" and all(c.passed for c in self.clauses)

    @property
    def failed(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed]

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        out: dict = {"theorem": self.theorem_id, "satisfied": self.satisfied}
        if self.kappa is not None:
            out["kappa"] = fmt(self.kappa)
            out["kappa_side"] = self.kappa_side
        if self.admissible_p is not None:
            out["admissible_p"] = str(self.admissible_p)
        if self.admissible_q is not None:
            out["admissible_q"] = str(self.admissible_q)
        out["clauses"] = {c.name: c.to_dict() for c in self.clauses}
        if self.decay_u is not None:
            out["decay_u"] = self.decay_u.to_dict()
        if self.decay_v is not None:
            out["decay_v"] = self.decay_v.to_dict()
        if self.warnings:
            out["warnings"] = list(self.warnings)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# ---------------------------------------------------------------------------
# shared pieces

def _common_warnings(scn: Scenario) -> list[str]:
    out = []
    if compare(scn.space.m, 2) == 0:
        out.append("m = 2 lies outside the stated range [1, 2); the verdict is informational")
    if scn.interplay.previously_studied:
        out.append("max{alpha, beta} < 1: both clocks are equivalent, a setting outside this toolkit's scope")
    if scn.source == "user" and scn.fitted is not None:
        for name in ("alpha", "beta"):
            given, fit = getattr(scn.interplay, name), getattr(scn.fitted, name)
            gap = abs(float(given) - float(fit)) / abs(float(given))
            if gap > PROVENANCE_GAP:
                out.append(f"user-supplied {name}={fmt(given)} differs from the fitted value "
                           f"{float(fit):.4g} by {100 * gap:.0f}%")
    return out


def _energy_range_clauses(scn: Scenario) -> list[Clause]:
    p, q, m = scn.nl.p, scn.nl.q, scn.space.m
    gn = gn_upper_bound(scn.space.n)
    return [
        _clause("min{p,q} >= 2/m", min(p, q), ">=", div(2, m)),
        _clause("max{p,q} <= p_GN(n)" if not math.isinf(gn) else "max{p,q} < inf",
                max(p, q), "<=" if not math.isinf(gn) else "<", gn),
    ]


def _lower_interval(strict_bound: Number, closed_bound: Number, upper: Number) -> Interval:
    """``{x > strict_bound} ∩ {x >= closed_bound} ∩ {x <= upper}``."""
    c = compare(closed_bound, strict_bound)
    lower, closed = (closed_bound, True) if c > 0 else (strict_bound, False)
    return Interval(lower, upper, closed, not math.isinf(upper))


def _require_energy(scn: Scenario):
    if not scn.energy_data:
        target = "T2.7" if min(scn.s1, scn.s2) > half(scn.space.n) + 1 else "T2.6"
        raise WrongChecker(f"s1={fmt(scn.s1)}, s2={fmt(scn.s2)} is not energy data; use {target}", target)


# ---------------------------------------------------------------------------
# energy data, both exponents supercritical

def check_energy(scn: Scenario) -> Verdict:
    """Energy data with both modified exponents above their Fujita thresholds."""
    _require_energy(scn)
    pt, qt = scn.modified
    f1, f2 = scn.fujita
    clauses = [
        _clause("p_tilde > p_Fuj(gamma1)", pt, ">", f1),
        _clause("q_tilde > p_Fuj(gamma2)", qt, ">", f2),
        *_energy_range_clauses(scn),
    ]
    m, gn = scn.space.m, gn_upper_bound(scn.space.n)
    adm_p = _lower_interval(unmodify(f1, scn.interplay.beta, m), div(2, m), gn)
    adm_q = _lower_interval(unmodify(f2, scn.interplay.alpha, m), div(2, m), gn)
    return Verdict(
        "T2.1", clauses, adm_p, adm_q,
        decay_u=energy_envelope(scn.space, "u"),
        decay_v=energy_envelope(scn.space, "v"),
        warnings=_common_warnings(scn),
    )


@dataclass(frozen=True)
class TableRow:
    row: str
    bound: Number
    strict: bool = True


def admissible_table(beta: Number, gamma1: Number, space: SpaceParams) -> TableRow:
    """Lower bound for ``p`` from the four-row admissible-range table.

    Rows are indexed by ``beta < 1`` or ``beta >= 1`` and whether ``gamma1``
    reaches ``-1 + n/2`` (resp. ``-1 + n beta/2``). The low-``gamma1`` rows
    take the maximum with ``2/m``. The same table gives ``q`` from ``alpha``
    and ``gamma2``.
    """
    beta, gamma1 = as_number(beta), as_number(gamma1)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    n, m = space.n, space.m
    if beta < 1:
        seam = -1 + half(n)
        bound = div(1, beta) + div(2 * m * (gamma1 + 1), n * beta) - div(m, 2 * beta) + half(m)
        key = "beta<1"
    else:
        seam = -1 + half(n * beta)
        bound = div(2 * m * (gamma1 + 1), n * beta) + 1
        key = "beta>=1"
    if compare(gamma1, seam) >= 0:
        return TableRow(f"{key}, gamma1>={fmt(seam)}", bound)
    return TableRow(f"{key}, gamma1<{fmt(seam)}", max(bound, div(2, m)))


# ---------------------------------------------------------------------------
# energy data, one exponent subcritical

def _k9_case_a(n, m, pt, qt, g1, g2, alpha, beta):
    num = qt + alpha + g1 * qt + g1 * (alpha - 1) + g2
    den = pt * qt - 1 + (alpha - 1) * (pt - 1)
    return num, den


def _k9_case_b(n, m, pt, qt, g1, g2, alpha, beta):
    num = qt + 1 + g1 * qt + g2 + half(m) * (alpha - 1) * (g1 + 1)
    den = pt * qt - 1 + half(m) * (alpha - 1) * (pt - 1)
    return num, den


def _k9_case_c(n, m, pt, qt, g1, g2, alpha, beta):
    num = pt + beta + g2 * pt + g2 * (beta - 1) + g1
    den = pt * qt - 1 + (beta - 1) * (qt - 1)
    return num, den


def _k9_case_d(n, m, pt, qt, g1, g2, alpha, beta):
    num = pt + 1 + g2 * pt + g1 + half(m) * (beta - 1) * (g2 + 1)
    den = pt * qt - 1 + half(m) * (beta - 1) * (qt - 1)
    return num, den


_K9 = {"a": _k9_case_a, "b": _k9_case_b, "c": _k9_case_c, "d": _k9_case_d}


def subcritical_sides(scn: Scenario) -> tuple[bool, bool]:
    """Whether ``p_tilde`` (resp. ``q_tilde``) lies at or below its Fujita threshold."""
    pt, qt = scn.modified
    f1, f2 = scn.fujita
    return compare(pt, f1) <= 0, compare(qt, f2) <= 0


def loss_case(scn: Scenario) -> Optional[str]:
    """Which of the four subcritical cases applies, or ``None``."""
    p_sub, q_sub = subcritical_sides(scn)
    alpha, beta = scn.interplay.alpha, scn.interplay.beta
    if p_sub and not q_sub:
        if alpha >= 1:
            return "a"
        if beta >= 1:
            return "b"
    elif q_sub and not p_sub:
        if beta >= 1:
            return "c"
        if alpha >= 1:
            return "d"
    return None


def k9_value(scn: Scenario, case: str) -> Number:
    """Right-hand side ``m * num/den`` of the coupling condition ``n/2 > ...``."""
    pt, qt = scn.modified
    num, den = _K9[case](scn.space.n, scn.space.m, pt, qt, scn.nl.gamma1, scn.nl.gamma2,
                         scn.interplay.alpha, scn.interplay.beta)
    if compare(den, 0) == 0:
        return math.inf
    return scn.space.m * div(num, den)


def proof_form_holds(scn: Scenario) -> bool:
    """Working inequality ``gamma2 - n/(2m)(q_tilde-1) + kappa(p_tilde) q alpha < -1``.

    Used only to report whether it agrees with the displayed coupling
    condition; the displayed condition is the one that governs.
    """
    pt, qt = scn.modified
    kappa = formal_loss_of_decay(scn.space, scn.nl.gamma1, pt)
    lhs = scn.nl.gamma2 - div(scn.space.n, 2 * scn.space.m) * (qt - 1) + kappa * scn.nl.q * scn.interplay.alpha
    return compare(lhs, -1) < 0


def check_energy_loss(scn: Scenario) -> Verdict:
    """Energy data with exactly one modified exponent at or below its threshold."""
    _require_energy(scn)
    p_sub, q_sub = subcritical_sides(scn)
    if p_sub and q_sub:
        raise NotCovered("both modified exponents are subcritical; no theorem applies")
    if not (p_sub or q_sub):
        raise WrongChecker("both modified exponents are supercritical; use T2.1", "T2.1")
    case = loss_case(scn)
    if case is None:
        raise NotCovered(f"alpha={fmt(scn.interplay.alpha)}, beta={fmt(scn.interplay.beta)} "
                         "match none of the four subcritical cases")
    pt, qt = scn.modified
    f1, f2 = scn.fujita
    n, m = scn.space.n, scn.space.m
    if p_sub:
        side = [_clause("p_tilde < p_Fuj(gamma1)", pt, "<", f1),
                _clause("q_tilde > p_Fuj(gamma2)", qt, ">", f2),
                _clause("p_tilde > 1", pt, ">", 1, note="kappa is only meaningful above 1")]
        kappa = formal_loss_of_decay(scn.space, scn.nl.gamma1, pt)
    else:
        side = [_clause("p_tilde > p_Fuj(gamma1)", pt, ">", f1),
                _clause("q_tilde < p_Fuj(gamma2)", qt, "<", f2),
                _clause("q_tilde > 1", qt, ">", 1, note="kappa is only meaningful above 1")]
        kappa = formal_loss_of_decay(scn.space, scn.nl.gamma2, qt)
    clauses = [
        *side,
        _clause(f"n/2 > coupling ({case})", half(n), ">", k9_value(scn, case)),
        *_energy_range_clauses(scn),
    ]
    gn = gn_upper_bound(n)
    sub_p = unmodify(f1, scn.interplay.beta, m)
    sub_q = unmodify(f2, scn.interplay.alpha, m)
    if p_sub:
        top = min(sub_p, gn)
        adm_p = Interval(div(2, m), top, True, compare(top, sub_p) < 0)
        adm_q = _lower_interval(sub_q, div(2, m), gn)
    else:
        top = min(sub_q, gn)
        adm_p = _lower_interval(sub_p, div(2, m), gn)
        adm_q = Interval(div(2, m), top, True, compare(top, sub_q) < 0)
    notes = ["admissible intervals ignore the coupling condition, which ties p and q together"]
    if case == "a":
        agree = proof_form_holds(scn) == clauses[3].passed
        notes.append("the proof's working inequality " + ("agrees" if agree else "DISAGREES")
                     + " with the displayed coupling condition")
    warnings = _common_warnings(scn)
    if compare(kappa, 0) <= 0:
        warnings.append(f"kappa={fmt(kappa)} is not positive; the subcritical clause is at or past its boundary")
    return Verdict(
        f"T2.5{case}", clauses, adm_p, adm_q,
        kappa=kappa, kappa_side="p" if p_sub else "q",
        decay_u=energy_envelope(scn.space, "u", kappa if p_sub else 0),
        decay_v=energy_envelope(scn.space, "v", 0 if p_sub else kappa),
        warnings=warnings, notes=notes,
    )


# ---------------------------------------------------------------------------
# Sobolev and large data

def regularity_threshold(space: SpaceParams, s: Number, gamma: Number) -> Number:
    """Lower bound ``(2m/n)((s + 1 + 2 gamma)/2) + 1`` for the modified exponent."""
    return div(2 * space.m, space.n) * half(s + 1 + 2 * gamma) + 1


def _threshold_clauses(scn: Scenario) -> list[Clause]:
    pt, qt = scn.modified
    return [
        _clause("p_tilde > regularity threshold(s1, gamma1)", pt, ">",
                regularity_threshold(scn.space, scn.s1, scn.nl.gamma1)),
        _clause("q_tilde > regularity threshold(s2, gamma2)", qt, ">",
                regularity_threshold(scn.space, scn.s2, scn.nl.gamma2)),
    ]


def sobolev_power_row(n: int, s1: Number, s2: Number) -> tuple[str, Number, Number]:
    """Row of the power table for Sobolev data: ``(label, p_cap, q_cap)``.

    Caps are ``inf`` where the row imposes none. The row is chosen by where
    ``n`` falls relative to ``2 s1`` and ``2 s2``.
    """
    if compare(n, 2 * s1) <= 0:
        return "n<=2s1", math.inf, math.inf
    q_cap = 1 + div(2, n - 2 * s1)
    if compare(n, 2 * s2) <= 0:
        return "2s1<n<=2s2", math.inf, q_cap
    return "n>2s2", 1 + div(2, n - 2 * s2), q_cap


def check_sobolev(scn: Scenario) -> Verdict:
    """Sobolev data with ``s1, s2`` in ``(1, n/2 + 1]``."""
    n, s1, s2 = scn.space.n, scn.s1, scn.s2
    g1, g2 = scn.nl.gamma1, scn.nl.gamma2
    p, q = scn.nl.p, scn.nl.q
    top = half(n) + 1
    row, p_cap, q_cap = sobolev_power_row(n, s1, s2)
    clauses = [
        _clause("n >= 4", n, ">=", 4),
        _member("s1 in (max{1, 3+2 gamma1}, n/2+1]", s1, Interval(max(1, 3 + 2 * g1), top, False, True)),
        _member("s2 in (max{1, 3+2 gamma2}, n/2+1]", s2, Interval(max(1, 3 + 2 * g2), top, False, True)),
        _member("s2 - s1 in (0, 1)", s2 - s1, Interval(0, 1)),
        _clause("ceil(s1) != ceil(s2)", ceil(s1), "!=", ceil(s2)),
        *_threshold_clauses(scn),
        _member(f"p in power row {row}", p, Interval(ceil(s1), p_cap, False, not math.isinf(p_cap))),
        _member(f"q in power row {row}", q, Interval(ceil(s2), q_cap, False, not math.isinf(q_cap))),
    ]
    notes = []
    if scn.interplay.beta >= 1 and compare(s1, 3 + 2 * g1) >= 0:
        notes.append("beta >= 1 and s1 >= 3+2 gamma1: p > ceil(s1) already implies the p_tilde threshold")
    if scn.interplay.alpha >= 1 and compare(s2, 3 + 2 * g2) >= 0:
        notes.append("alpha >= 1 and s2 >= 3+2 gamma2: q > ceil(s2) already implies the q_tilde threshold")
    m = scn.space.m
    adm_p = _lower_interval(max(ceil(s1), unmodify(regularity_threshold(scn.space, s1, g1), scn.interplay.beta, m)),
                            -math.inf, p_cap)
    adm_q = _lower_interval(max(ceil(s2), unmodify(regularity_threshold(scn.space, s2, g2), scn.interplay.alpha, m)),
                            -math.inf, q_cap)
    return Verdict(
        "T2.6", clauses, adm_p, adm_q,
        decay_u=sobolev_envelope(scn.space, "u", s1),
        decay_v=sobolev_envelope(scn.space, "v", s2),
        warnings=_common_warnings(scn), notes=notes,
    )


def check_large(scn: Scenario) -> Verdict:
    """Large regular data with ``min{s1, s2} > n/2 + 1``."""
    n, s1, s2 = scn.space.n, scn.s1, scn.s2
    p, q = scn.nl.p, scn.nl.q
    clauses = [
        _clause("n >= 4", n, ">=", 4),
        _clause("min{s1,s2} > n/2+1", min(s1, s2), ">", half(n) + 1),
        _member("s1 - s2 in (-1, 1)", s1 - s2, Interval(-1, 1)),
        _clause("p > s1", p, ">", s1),
        _clause("q > s2", q, ">", s2),
        *_threshold_clauses(scn),
    ]
    m = scn.space.m
    adm_p = _lower_interval(max(s1, unmodify(regularity_threshold(scn.space, s1, scn.nl.gamma1),
                                             scn.interplay.beta, m)), -math.inf, math.inf)
    adm_q = _lower_interval(max(s2, unmodify(regularity_threshold(scn.space, s2, scn.nl.gamma2),
                                             scn.interplay.alpha, m)), -math.inf, math.inf)
    return Verdict(
        "T2.7", clauses, adm_p, adm_q,
        decay_u=sobolev_envelope(scn.space, "u", s1),
        decay_v=sobolev_envelope(scn.space, "v", s2),
        warnings=_common_warnings(scn),
    )


# ---------------------------------------------------------------------------
# routing

def _not_covered(scn: Scenario, candidates: list[Verdict], reason: str) -> Verdict:
    """Verdict for an uncovered scenario, listing the failures of the nearest candidate."""
    notes = [reason]
    clauses: list[Clause] = []
    if candidates:
        best = min(candidates, key=lambda v: len(v.failed))
        clauses = best.failed
        notes.append(f"nearest miss: {best.theorem_id} with {len(best.failed)} failing clause(s)")
    return Verdict("none", clauses, warnings=_common_warnings(scn), notes=notes)


def classify(scn: Scenario) -> Verdict:
    """Route ``scn`` to the applicable checker and return its verdict."""
    n = scn.space.n
    if scn.energy_data:
        p_sub, q_sub = subcritical_sides(scn)
        if not (p_sub or q_sub):
            return check_energy(scn)
        if p_sub and q_sub:
            return _not_covered(scn, [check_energy(scn)], "both modified exponents are subcritical")
        if loss_case(scn) is None:
            return _not_covered(scn, [check_energy(scn)],
                                "one exponent is subcritical but (alpha, beta) match none of the four cases")
        return check_energy_loss(scn)
    if scn.s1 > 1 and scn.s2 > 1:
        if compare(min(scn.s1, scn.s2), half(n) + 1) > 0:
            return check_large(scn)
        if compare(max(scn.s1, scn.s2), half(n) + 1) <= 0:
            return check_sobolev(scn)
    return _not_covered(scn, [check_sobolev(scn), check_large(scn)],
                        f"regularities s1={fmt(scn.s1)}, s2={fmt(scn.s2)} fall in no single data class")
