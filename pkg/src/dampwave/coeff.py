"""Dissipation coefficients b(t), their primitives and effectiveness checks.

Four families are supported::

    constant           b(t) = mu
    pure-power         b(t) = mu / (1+t)^r
    power-log-growth   b(t) = mu / (1+t)^r * log(c+t)^gamma
    power-log-decay    b(t) = mu / ((1+t)^r * log(c+t)^gamma)

The primitive ``B(t, tau) = int_tau^t dr / b(r)`` is the clock against which
all decay rates are measured. It is closed form for the first two families
and computed by adaptive Gauss-Kronrod quadrature (QUADPACK through
:func:`scipy.integrate.quad`) for the logarithmic ones.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

FAMILIES = ("constant", "pure-power", "power-log-growth", "power-log-decay")
POWER_FAMILIES = ("pure-power", "power-log-growth", "power-log-decay")
LOG_FAMILIES = ("power-log-growth", "power-log-decay")

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-13

# (1+t) nodes of the primitive cache are spaced geometrically, NODES_PER_DECADE per decade
NODES_PER_DECADE = 8


class ContractViolation(ValueError):
    """An operation was called outside its documented precondition."""


class InvalidSpec(ValueError):
    """A dissipation spec failed validation at construction."""


@dataclass(frozen=True)
class DissipationSpec:
    """A dissipation coefficient family with its parameters.

    ``c`` is the offset inside the logarithm. When left as ``None`` for a
    log family it is chosen as the smallest value >= e that keeps ``b``
    monotone on ``[0, inf)``, plus a 1% margin.
    """

    family: str
    mu: float = 1.0
    r: float = 0.0
    gamma: float = 0.0
    c: float | None = None
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.family in LOG_FAMILIES:
            c = _default_log_offset(self.r, self.gamma, self.family) if self.c is None else float(self.c)
        else:
            c = math.e if self.c is None else float(self.c)
        object.__setattr__(self, "c", c)
        if self.strict:
            self._validate()

    @classmethod
    def unchecked(cls, family: str, mu: float = 1.0, r: float = 0.0, gamma: float = 0.0,
                  c: float | None = None) -> "DissipationSpec":
        """Build a spec without validation. Only meant for negative tests."""
        return cls(family, mu, r, gamma, c, strict=False)

    @classmethod
    def constant(cls, mu: float = 1.0) -> "DissipationSpec":
        return cls("constant", mu)

    @classmethod
    def power(cls, mu: float, r: float) -> "DissipationSpec":
        return cls("pure-power", mu, r)

    def _validate(self):
        if not self.mu > 0:
            raise InvalidSpec(f"mu must be positive, got {self.mu}")
        if self.family in POWER_FAMILIES and not -1.0 < self.r < 1.0:
            raise InvalidSpec(f"r must lie in (-1, 1) for {self.family}, got {self.r}")
        if self.family in LOG_FAMILIES:
            if not self.gamma > 0:
                raise InvalidSpec(f"gamma must be positive for {self.family}, got {self.gamma}")
            if self.c < math.e:
                raise InvalidSpec(f"c must be at least e, got {self.c}")
            t = _sample_times(1e6)
            d = log_derivative(self, t)
            if not (np.all(d >= -1e-15) or np.all(d <= 1e-15)):
                raise InvalidSpec(f"b is not monotone on [0, 1e6] with c = {self.c}; increase c")

    def to_dict(self) -> dict:
        out = {"family": self.family, "mu": self.mu}
        if self.family in POWER_FAMILIES:
            out["r"] = self.r
        if self.family in LOG_FAMILIES:
            out["gamma"] = self.gamma
            out["c"] = self.c
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DissipationSpec":
        return cls(data["family"], float(data.get("mu", 1.0)), float(data.get("r", 0.0)),
                   float(data.get("gamma", 0.0)), None if data.get("c") is None else float(data["c"]))

    # convenience methods

    def b(self, t):
        return eval_b(self, t)

    def B(self, t, tau=0.0):
        return primitive_B(self, tau, t)


def _log_conflicts(r: float, family: str) -> bool:
    # the power and the log factor push b in opposite directions
    return (family == "power-log-growth" and r > 0) or (family == "power-log-decay" and r < 0)


def _default_log_offset(r: float, gamma: float, family: str) -> float:
    if gamma <= 0 or not _log_conflicts(r, family):
        return math.e
    rho = abs(r)

    def worst(c: float) -> float:
        # min over t >= 0 of rho (c+t) log(c+t) - gamma (1+t); convex in t
        x = math.exp(gamma / rho - 1.0)
        if x <= c:
            return rho * c * math.log(c) - gamma
        return gamma * (c - 1.0) - rho * x

    if worst(math.e) >= 0:
        return math.e
    hi = math.e
    while worst(hi) < 0:
        hi *= 2.0
    lo = hi / 2.0 if hi > math.e else math.e
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if worst(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return max(math.e, hi * 1.01)


def _check_t(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ContractViolation("t must be nonnegative")
    return arr


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def eval_b(spec: DissipationSpec, t):
    """Value of b at ``t`` (scalar or array)."""
    tt = _check_t(t)
    out = spec.mu * np.ones_like(tt)
    if spec.family in POWER_FAMILIES:
        out = out * (1.0 + tt) ** (-spec.r)
    if spec.family == "power-log-growth":
        out = out * np.log(spec.c + tt) ** spec.gamma
    elif spec.family == "power-log-decay":
        out = out * np.log(spec.c + tt) ** (-spec.gamma)
    return _scalar_or_array(out, t)


def log_derivative(spec: DissipationSpec, t, order: int = 1):
    """Derivatives of ``log b``: order 1, 2 or 3, closed form for every family."""
    tt = np.asarray(t, dtype=float)
    if spec.family == "constant":
        return _scalar_or_array(np.zeros_like(tt), t)
    r, g = spec.r, spec.gamma
    s = 1.0 + tt
    sign = {"pure-power": 0.0, "power-log-growth": 1.0, "power-log-decay": -1.0}[spec.family]
    x = spec.c + tt
    L = np.log(x)
    if order == 1:
        out = -r / s + sign * g / (x * L)
    elif order == 2:
        out = r / s**2 - sign * g * (L + 1.0) / (x**2 * L**2)
    elif order == 3:
        out = -2.0 * r / s**3 + sign * g * (2.0 * L**2 + 3.0 * L + 2.0) / (x**3 * L**3)
    else:
        raise ValueError("order must be 1, 2 or 3")
    return _scalar_or_array(out, t)


def eval_b_derivative(spec: DissipationSpec, t, k: int):
    """k-th derivative of b for k in 1..3, via the chain rule on ``log b``."""
    if k not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {k}")
    tt = _check_t(t)
    b = np.asarray(eval_b(spec, tt))
    d1 = np.asarray(log_derivative(spec, tt, 1))
    if k == 1:
        out = b * d1
    else:
        d2 = np.asarray(log_derivative(spec, tt, 2))
        if k == 2:
            out = b * (d2 + d1**2)
        else:
            d3 = np.asarray(log_derivative(spec, tt, 3))
            out = b * (d3 + 3.0 * d1 * d2 + d1**3)
    return _scalar_or_array(out, t)


def _fd_weights(k: int, offsets: np.ndarray) -> np.ndarray:
    """Central-difference weights for the k-th derivative on integer ``offsets``."""
    m = np.arange(len(offsets))
    vander = offsets[None, :].astype(float) ** m[:, None]
    rhs = np.zeros(len(offsets))
    rhs[k] = math.factorial(k)
    return np.linalg.solve(vander, rhs)


def b_derivative_fd(spec: DissipationSpec, t: float, k: int, h: float | None = None) -> tuple[float, float]:
    """Finite-difference derivative with an error estimate.

    Sixth-order central differences at step ``h`` and ``2h``; the returned
    error is their difference. Independent of :func:`eval_b_derivative` and
    used to cross-check it.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {k}")
    if h is None:
        h = 1e-2 * (1.0 + t)

    half_width = 3 if k < 3 else 4
    offsets = np.arange(-half_width, half_width + 1)
    weights = _fd_weights(k, offsets)

    def stencil(step):
        # b extends smoothly to t > -1, so nodes slightly below 0 are fine
        x = t + offsets * step
        vals = spec.mu * (1.0 + x) ** (-spec.r)
        if spec.family == "power-log-growth":
            vals = vals * np.log(spec.c + x) ** spec.gamma
        elif spec.family == "power-log-decay":
            vals = vals * np.log(spec.c + x) ** (-spec.gamma)
        return float(np.dot(weights, vals)) / step**k

    fine, coarse = stencil(h), stencil(2 * h)
    return fine, abs(fine - coarse)


# ---------------------------------------------------------------- primitives


class _PrimitiveCache:
    """Segment integrals of 1/b between fixed nodes, grown on demand."""

    def __init__(self, spec: DissipationSpec):
        self.spec = spec
        self.nodes = [0.0]
        self.segments: list[float] = []
        self.error = 0.0
        self.lock = threading.Lock()

    def node(self, i: int) -> float:
        return 0.0 if i == 0 else 10.0 ** (i / NODES_PER_DECADE) - 1.0

    def integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        spec = self.spec
        val, err = integrate.quad(lambda s: 1.0 / _b_scalar(spec, s), a, b,
                                  epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, limit=200)
        self.error = max(self.error, err)
        return val

    def ensure(self, t: float) -> int:
        """Return the index of the last node <= t, filling segments up to it."""
        idx = 0 if t <= 0 else int(math.floor(NODES_PER_DECADE * math.log10(1.0 + t) + 1e-12))
        while self.node(idx) > t and idx > 0:
            idx -= 1
        with self.lock:
            while len(self.nodes) <= idx + 1:
                i = len(self.nodes)
                self.nodes.append(self.node(i))
                self.segments.append(self.integral(self.nodes[i - 1], self.nodes[i]))
        return idx

    def between(self, tau: float, t: float) -> float:
        if t == tau:
            return 0.0
        i_tau = self.ensure(tau)
        i_t = self.ensure(t)
        if i_tau == i_t:
            return self.integral(tau, t)
        total = self.integral(tau, self.nodes[i_tau + 1])
        total += math.fsum(self.segments[i_tau + 1:i_t])
        total += self.integral(self.nodes[i_t], t)
        return total


_CACHES: dict[DissipationSpec, _PrimitiveCache] = {}
_CACHES_LOCK = threading.Lock()


def _cache_for(spec: DissipationSpec) -> _PrimitiveCache:
    with _CACHES_LOCK:
        cache = _CACHES.get(spec)
        if cache is None:
            cache = _CACHES[spec] = _PrimitiveCache(spec)
        return cache


def _b_scalar(spec: DissipationSpec, t: float) -> float:
    val = spec.mu
    if spec.family != "constant":
        val *= (1.0 + t) ** (-spec.r)
    if spec.family == "power-log-growth":
        val *= math.log(spec.c + t) ** spec.gamma
    elif spec.family == "power-log-decay":
        val *= math.log(spec.c + t) ** (-spec.gamma)
    return val


def quadrature_error_bound(spec: DissipationSpec) -> float:
    """Largest QUADPACK error estimate seen so far for this spec's cache."""
    return _cache_for(spec).error


def _closed_primitive(spec: DissipationSpec, tau: float, t: float) -> float:
    if spec.mu == 0:
        return math.inf if t > tau else 0.0
    if spec.family == "constant":
        return (t - tau) / spec.mu
    e = 1.0 + spec.r
    # (1+tau)^e * expm1(e * log1p((t - tau)/(1 + tau))) / (mu e), no cancellation for t close to tau
    return (1.0 + tau) ** e * math.expm1(e * math.log1p((t - tau) / (1.0 + tau))) / (spec.mu * e)


def primitive_B(spec: DissipationSpec, tau: float, t: float, method: str = "auto") -> float:
    """``B(t, tau) = int_tau^t dr / b(r)``.

    ``method`` is ``"auto"`` (closed form where available), ``"closed"`` or
    ``"quad"``. Quadrature results are cached per spec on a monotone grid.
    """
    tau, t = float(tau), float(t)
    if tau < 0 or t < 0:
        raise ContractViolation("times must be nonnegative")
    if tau > t:
        raise ContractViolation(f"primitive_B needs tau <= t, got tau={tau}, t={t}")
    closed_ok = spec.family in ("constant", "pure-power")
    if method == "closed" and not closed_ok:
        raise ValueError(f"no closed-form primitive for {spec.family}")
    if method == "closed" or (method == "auto" and closed_ok):
        return _closed_primitive(spec, tau, t)
    if method not in ("auto", "quad"):
        raise ValueError(f"unknown method {method!r}")
    if spec.mu == 0:
        return _closed_primitive(spec, tau, t)
    return _cache_for(spec).between(tau, t)


def primitive_B0(spec: DissipationSpec, t, method: str = "auto"):
    """Vectorised ``B(t, 0)``."""
    tt = _check_t(t)
    if method != "quad" and spec.family in ("constant", "pure-power"):
        if spec.mu == 0:
            out = np.where(tt > 0, np.inf, 0.0)
        elif spec.family == "constant":
            out = tt / spec.mu
        else:
            e = 1.0 + spec.r
            out = np.expm1(e * np.log1p(tt)) / (spec.mu * e)
        return _scalar_or_array(out, t)
    flat = np.array([primitive_B(spec, 0.0, float(s), method) for s in np.ravel(tt)])
    return _scalar_or_array(flat.reshape(tt.shape), t)


# ---------------------------------------------------------------- effectiveness


@dataclass
class EffectivenessReport:
    cond_monotone_tb: bool
    tb_witness: dict
    cond_integrability: bool
    integral_estimate: float
    cond_derivative_bounds: dict
    derivative_ratios: dict
    cond_one_over_b_diverges: bool
    a_witness: float | None
    horizon: float

    @property
    def passed(self) -> bool:
        return (self.cond_monotone_tb and self.cond_integrability
                and all(self.cond_derivative_bounds.values()) and self.cond_one_over_b_diverges)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "horizon": self.horizon,
            "cond_monotone_tb": self.cond_monotone_tb,
            "tb_witness": dict(self.tb_witness),
            "cond_integrability": self.cond_integrability,
            "integral_estimate": self.integral_estimate,
            "cond_derivative_bounds": {f"k{k}": v for k, v in self.cond_derivative_bounds.items()},
            "derivative_ratios": {f"k{k}": v for k, v in self.derivative_ratios.items()},
            "cond_one_over_b_diverges": self.cond_one_over_b_diverges,
            "a_witness": self.a_witness,
        }


def _sample_times(horizon: float, count: int = 2000) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-3, horizon, count)])


def _power_log_exponents(spec: DissipationSpec) -> tuple[float, float]:
    """b ~ t^(-r) log(t)^g as t -> inf; returns (r, g) with the sign of the log power."""
    if spec.family == "constant":
        return 0.0, 0.0
    g = {"pure-power": 0.0, "power-log-growth": spec.gamma, "power-log-decay": -spec.gamma}[spec.family]
    return spec.r, g


def _tail_integrable(power: float, log_power: float) -> bool:
    """Is t^power * log(t)^log_power integrable at infinity?"""
    return power < -1 or (power == -1 and log_power < -1)


def check_effective(spec: DissipationSpec, horizon: float = 1e3) -> EffectivenessReport:
    """Evaluate the four effectiveness conditions on ``spec``.

    Asymptotic statements (``t b -> inf``, integrability, divergence of 1/b)
    are decided from the family's power/log exponents; sampled quantities on
    ``[0, horizon]`` provide the witnesses.
    """
    t = _sample_times(horizon)
    b = np.asarray(eval_b(spec, t))
    r, g = _power_log_exponents(spec)

    d1 = np.asarray(eval_b_derivative(spec, t, 1))
    monotone = bool(np.all(d1 >= -1e-15 * b) or np.all(d1 <= 1e-15 * b))
    # t b(t) ~ t^(1-r) log^g
    tb_diverges = spec.family == "constant" or r < 1 or (r == 1 and g > 0)
    probes = [horizon / 100, horizon / 10, horizon]
    tb_witness = {f"t={p:g}": float(p * eval_b(spec, p)) for p in probes}

    # ((1+t)^2 b)^-1 ~ t^(r-2) log^-g
    integrable = _tail_integrable(r - 2, -g)
    integral_estimate, _ = integrate.quad(lambda s: 1.0 / ((1.0 + s) ** 2 * _b_scalar(spec, s)),
                                          0.0, horizon, limit=200)
    if integrable and spec.family in LOG_FAMILIES:
        tail, _ = integrate.quad(lambda s: 1.0 / ((1.0 + s) ** 2 * _b_scalar(spec, s)),
                                 horizon, np.inf, limit=200)
        integral_estimate += tail

    derivative_ok, ratios = {}, {}
    for k in (1, 2, 3):
        dk = np.asarray(eval_b_derivative(spec, t, k))
        worst = float(np.max(np.abs(dk) * (1.0 + t) ** k / b))
        ratios[k] = worst
        # (1+t)^k b^(k) / b tends to the falling factorial (-r)(-r-1)...(-r-k+1); log factors only
        # add terms of lower order, so the ratio is bounded iff the sampled sup and the limit are finite
        limit = abs(math.prod(-r - i for i in range(k)))
        derivative_ok[k] = bool(np.isfinite(worst) and math.isfinite(limit))

    # 1/b ~ t^r log^-g
    one_over_b_diverges = spec.family == "constant" or not _tail_integrable(r, -g)
    # t b'/b -> -r as t -> inf, so -r >= 1 leaves no admissible a < 1
    a_sup = float(np.max(t * d1 / b))
    a_witness = max(0.0, a_sup)
    if a_witness >= 1.0 or -r >= 1.0:
        a_witness = None

    return EffectivenessReport(
        cond_monotone_tb=monotone and tb_diverges,
        tb_witness=tb_witness,
        cond_integrability=integrable,
        integral_estimate=float(integral_estimate),
        cond_derivative_bounds=derivative_ok,
        derivative_ratios=ratios,
        cond_one_over_b_diverges=one_over_b_diverges and a_witness is not None,
        a_witness=a_witness,
        horizon=float(horizon),
    )


# ---------------------------------------------------------------- interplay


@dataclass
class InterplayEstimate:
    alpha_hat: float
    beta_hat: float
    horizon: tuple[float, float]
    log_correction_flag: bool
    constant: float
    residual_trend: float

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "horizon": list(self.horizon),
            "log_correction_flag": self.log_correction_flag,
            "constant": self.constant,
            "residual_trend": self.residual_trend,
        }


def fit_interplay(spec1: DissipationSpec, spec2: DissipationSpec, horizon: float = 1e6,
                  samples: int = 200, log_threshold: float = 0.05) -> InterplayEstimate:
    """Estimate the interplay exponents between B1 and B2.

    ``beta_hat`` is the least-squares slope of ``log(1+B2)`` against
    ``log(1+B1)`` on a geometric sample of ``[10, horizon]``. ``alpha_hat`` is
    the reciprocal of the secant slope over the last decade, the best
    finite-horizon proxy for the liminf of the local slope. Residuals of the
    least-squares line are regressed on ``log log t``; a trend steeper than
    ``log_threshold`` sets ``log_correction_flag``.
    """
    for spec in (spec1, spec2):
        if not check_effective(spec, min(horizon, 1e4)).passed:
            raise ContractViolation(f"fit_interplay needs effective coefficients, got {spec}")
    t_lo = 10.0
    if spec1 == spec2:
        return InterplayEstimate(1.0, 1.0, (t_lo, horizon), False, 1.0, 0.0)
    t = np.geomspace(t_lo, horizon, samples)
    x = np.log1p(primitive_B0(spec1, t))
    y = np.log1p(primitive_B0(spec2, t))
    fit = stats.linregress(x, y)
    beta_hat = float(fit.slope)
    j = int(np.searchsorted(t, horizon / 10))
    j = min(j, len(t) - 2)
    tail_slope = float((y[-1] - y[j]) / (x[-1] - x[j]))
    alpha_hat = 1.0 / tail_slope
    residuals = y - (fit.intercept + fit.slope * x)
    trend = float(stats.linregress(np.log(np.log(t)), residuals).slope)
    lower = np.max(np.exp(x / alpha_hat - y))
    upper = np.max(np.exp(y - beta_hat * x))
    return InterplayEstimate(alpha_hat, beta_hat, (t_lo, float(horizon)), abs(trend) > log_threshold,
                             float(max(lower, upper)), trend)


# ---------------------------------------------------------------- primitive properties


@dataclass
class BPropertyReport:
    p6_constant: float
    p7_constant: float
    p8_constants: dict
    horizon: float

    @property
    def finite(self) -> bool:
        vals = [self.p6_constant, self.p7_constant, *self.p8_constants.values()]
        return all(math.isfinite(v) for v in vals)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "P6": self.p6_constant,
            "P7": self.p7_constant,
            **{f"P8_j{j}_l{l}": v for (j, l), v in self.p8_constants.items()},
        }


P8_INDICES = ((0, 0), (1, 0), (0, 1))


def p8_integral(spec: DissipationSpec, t: float, j: int, l: int) -> float:
    """``int_{t/2}^t b(tau)^-1 (1+B(t,tau))^(-j/2-l) dtau`` by quadrature."""
    a = -j / 2 - l
    Bt0 = primitive_B(spec, 0.0, t)

    def integrand(tau):
        # B(t, tau) = B(t, 0) - B(tau, 0), but the direct form avoids cancellation for tau near t
        return (1.0 + primitive_B(spec, tau, t)) ** a / _b_scalar(spec, tau)

    if spec.family in ("constant", "pure-power"):
        val, _ = integrate.quad(integrand, t / 2, t, epsabs=1e-12, epsrel=1e-10, limit=200)
    else:
        val, _ = integrate.quad(integrand, t / 2, t, epsabs=1e-10 * (1 + Bt0), epsrel=1e-8, limit=100)
    return val


def check_B_properties(spec: DissipationSpec, horizon: float = 1e4, samples: int = 40) -> BPropertyReport:
    """Sup-ratio constants for the three primitive properties.

    P6: ``B(t,0) / B(t,tau)`` for ``tau`` in ``[0, t/2]``;
    P7: ``B(t,0) / B(tau,0)`` for ``tau`` in ``[t/2, t]``;
    P8: the integral above against ``(1+B(t,0))^(1-j/2-l) log(1+B(t,0))^l``.
    """
    ts = np.geomspace(1.0, horizon, samples)
    fractions = np.linspace(0.0, 0.5, 9)
    p6 = p7 = 0.0
    p8 = {idx: 0.0 for idx in P8_INDICES}
    for t in ts:
        t = float(t)
        Bt0 = primitive_B(spec, 0.0, t)
        for f in fractions:
            tau = f * t
            p6 = max(p6, Bt0 / primitive_B(spec, tau, t))
            tau2 = t - f * t
            p7 = max(p7, Bt0 / primitive_B(spec, 0.0, tau2))
        for j, l in P8_INDICES:
            lhs = p8_integral(spec, t, j, l)
            rhs = (1.0 + Bt0) ** (1 - j / 2 - l) * math.log(1.0 + Bt0) ** l
            p8[(j, l)] = max(p8[(j, l)], lhs / rhs)
    return BPropertyReport(p6, p7, p8, float(horizon))
