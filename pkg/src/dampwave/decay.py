"""Norms of discrete states, decay-rate fits and envelope comparisons.

Spatial norms are computed on the periodic box: ``L^2`` and ``L^m`` by the
rectangle rule (spectrally accurate for smooth periodic fields), gradient and
fractional ``|D|^s`` norms by Fourier multipliers with Parseval's identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ._numbers import div, half
from .coeff import eval_b
from .theorems import DecayEnvelope

MAX_SOBOLEV_ORDER = 8.0
DEFAULT_C_MAX = 10.0


class UnresolvedOrder(ValueError):
    """A Sobolev order outside ``[0, MAX_SOBOLEV_ORDER]`` was requested."""


@dataclass(frozen=True)
class NormRecord:
    """Norms of one component ``w`` at one time.

    ``hs[s]`` is ``|| |D|^s w ||_2`` and ``hs_dt[s]`` is ``|| |D|^s w_t ||_2``.
    """

    t: float
    l2: float
    lm: float
    grad_l2: float
    dt_l2: float
    hs: dict = field(default_factory=dict)
    hs_dt: dict = field(default_factory=dict)

    def value(self, name: str, order: Optional[float] = None) -> float:
        """Look up a norm by the envelope naming (``L2``, ``L2_grad``, ``L2_dt``, ``Hs``, ``Hs_dt``)."""
        if name == "L2":
            return self.l2
        if name == "L2_grad":
            return self.grad_l2
        if name == "L2_dt":
            return self.dt_l2
        if name == "Hs":
            return self.hs[order]
        if name == "Hs_dt":
            return self.hs_dt[order]
        raise KeyError(name)


def _spectral_weights(grid) -> np.ndarray:
    """Multiplicity of each rfft coefficient in the full spectrum (1 or 2)."""
    w = np.full(grid.spectral_shape, 2.0)
    w[..., 0] = 1.0
    if grid.points % 2 == 0:
        w[..., -1] = 1.0
    return w


def spectral_l2(grid, field_hat: np.ndarray, multiplier: np.ndarray | float = 1.0) -> float:
    """``|| m(D) w ||_2`` from the rfft coefficients of ``w`` via Parseval."""
    total = grid.points ** grid.dim
    power = _spectral_weights(grid) * np.abs(multiplier * field_hat) ** 2
    return math.sqrt(float(np.sum(power)) * grid.cell_volume / total)


def _check_orders(orders: Iterable[float]) -> list[float]:
    out = []
    for s in orders:
        s = float(s)
        if not (0.0 <= s <= MAX_SOBOLEV_ORDER) or not math.isfinite(s):
            raise UnresolvedOrder(f"Sobolev order {s} is outside [0, {MAX_SOBOLEV_ORDER}]")
        out.append(s)
    return out


def compute_norms(state, m: float = 1.0, s_orders: Sequence[float] = (), component: str = "u") -> NormRecord:
    """Norms of ``state.u`` (or ``state.v``) and its velocity.

    For each ``s`` in ``s_orders`` the record holds ``|| |D|^s w ||_2`` and,
    when ``s >= 1``, ``|| |D|^(s-1) w_t ||_2``.
    """
    if not 1.0 <= float(m) <= 2.0:
        raise ValueError(f"m must lie in [1, 2], got {m}")
    orders = _check_orders(s_orders)
    grid = state.grid
    w, wt = (state.u, state.ut) if component == "u" else (state.v, state.vt)
    dv = grid.cell_volume
    l2 = math.sqrt(float(np.sum(w * w)) * dv)
    lm = float(np.sum(np.abs(w) ** m) * dv) ** (1.0 / m)
    dt_l2 = math.sqrt(float(np.sum(wt * wt)) * dv)
    w_hat = np.fft.rfftn(w)
    kabs = np.sqrt(grid.k2)
    grad = spectral_l2(grid, w_hat, kabs)
    hs, hs_dt = {}, {}
    if orders:
        wt_hat = np.fft.rfftn(wt)
        for s in orders:
            hs[s] = l2 if s == 0 else spectral_l2(grid, w_hat, kabs ** s)
            if s >= 1:
                hs_dt[s - 1] = dt_l2 if s == 1 else spectral_l2(grid, wt_hat, kabs ** (s - 1))
    return NormRecord(float(state.time), l2, lm, grad, dt_l2, hs, hs_dt)


def predicted_exponent(j: float, l: int, space, kappa=0):
    """``-(n/2)(1/m - 1/2) - j/2 - l + kappa``; ``j`` may be fractional."""
    return -half(space.n) * (div(1, space.m) - div(1, 2)) - half(j) - l + kappa


# ---------------------------------------------------------------------------
# fits

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    window: tuple[float, float]
    samples: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "r_squared": self.r_squared,
                "window_t_min": self.window[0], "window_t_max": self.window[1], "samples": self.samples}


def default_window(times: np.ndarray, B_values: np.ndarray) -> tuple[float, float]:
    """The last decade of ``log(1+B)``, never reaching into the first 10% of samples."""
    times = np.asarray(times, dtype=float)
    logs = np.log1p(np.asarray(B_values, dtype=float))
    skip = int(math.ceil(0.1 * len(times)))
    start = max(skip, int(np.searchsorted(logs, logs[-1] - math.log(10.0), side="left")))
    start = min(start, len(times) - 1)
    return float(times[start]), float(times[-1])


def fit_decay(times: Sequence[float], values: Sequence[float], B: Callable | Sequence[float],
              window: Optional[tuple[float, float]] = None, min_samples: int = 8) -> DecayFit:
    """Least-squares slope of ``log(value)`` against ``log(1 + B(t))``.

    ``B`` is either a callable ``t -> B(t, 0)`` or precomputed values aligned
    with ``times``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    B_values = np.asarray(B(times) if callable(B) else B, dtype=float)
    if window is None:
        window = default_window(times, B_values)
    sel = (times >= window[0]) & (times <= window[1])
    if sel.sum() < min_samples:
        raise ValueError(f"only {int(sel.sum())} samples in window {window}; need {min_samples}")
    if np.any(~(values[sel] > 0)):
        raise ValueError("non-positive values in the fit window (divergence or underflow?)")
    x, y = np.log1p(B_values[sel]), np.log(values[sel])
    # residual-based standard error; deriving it from r^2 loses precision on exact power laws
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    sxx = float(np.sum((x - x.mean()) ** 2))
    syy = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum(resid ** 2))
    stderr = math.sqrt(sse / (len(x) - 2) / sxx) if sxx > 0 else math.inf
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    return DecayFit(float(slope), float(intercept), stderr, r2,
                    (float(window[0]), float(window[1])), int(sel.sum()))


# ---------------------------------------------------------------------------
# weighted norms of the solution space

@dataclass(frozen=True)
class WeightedSupNorm:
    value: float
    per_sample: np.ndarray
    argmax_t: float


def weighted_terms(space, rec: NormRecord, b: float, B: float, kappa: float = 0.0,
                   s: Optional[float] = None) -> float:
    """The weighted combination inside the sup at one sample.

    Energy data (``s`` is None): ``L^2``, gradient and ``b``-weighted velocity
    terms. Sobolev data: ``L^2``, velocity, ``|D|^(s-1) w_t`` and ``|D|^s w``
    terms. ``kappa`` is subtracted from every weight exponent.
    """
    base = float(-predicted_exponent(0, 0, space))
    w = 1.0 + B
    if s is None:
        return (w ** (base - kappa) * rec.l2
                + w ** (base + 0.5 - kappa) * rec.grad_l2
                + b * w ** (base + 1 - kappa) * rec.dt_l2)
    return (w ** (base - kappa) * rec.l2
            + b * w ** (base + 1 - kappa) * rec.dt_l2
            + b * w ** (base + (s - 1) / 2 + 1 - kappa) * rec.hs_dt[s - 1]
            + w ** (base + s / 2 - kappa) * rec.hs[s])


def weighted_sup_norm(traj, side: str, space, kappa: float = 0.0, s: Optional[float] = None) -> WeightedSupNorm:
    """Running supremum of the weighted norm ``M_1`` (side ``"u"``) or ``M_2`` (``"v"``)."""
    records = traj.u_norms if side == "u" else traj.v_norms
    spec = traj.system.b1 if side == "u" else traj.system.b2
    Bs = traj.B1 if side == "u" else traj.B2
    if not records:
        raise ValueError("empty trajectory")
    vals = np.array([weighted_terms(space, rec, float(eval_b(spec, rec.t)), float(Bv), float(kappa), s)
                     for rec, Bv in zip(records, Bs)])
    running = np.maximum.accumulate(vals)
    idx = int(np.argmax(vals))
    return WeightedSupNorm(float(running[-1]), running, float(records[idx].t))


# ---------------------------------------------------------------------------
# envelopes

@dataclass
class EnvelopeReport:
    passed: bool
    c_max: float
    scale: float
    max_ratio: float
    worst: str
    ratios: dict

    def to_dict(self) -> dict:
        return {"passed": self.passed, "c_max": self.c_max, "data_scale": self.scale,
                "max_ratio": self.max_ratio, "worst": self.worst,
                **{f"ratio_{k}": float(np.max(v)) if len(v) else 0.0 for k, v in self.ratios.items()}}


def envelope_check(records: Sequence[NormRecord], envelope: DecayEnvelope, b: Callable, B: Sequence[float],
                   scale: float, c_max: float = DEFAULT_C_MAX, start_time: float = 0.0) -> EnvelopeReport:
    """Compare sampled norms with ``c_max * scale * b(t)^b_power (1+B)^exponent``.

    ``scale`` is the data norm multiplying the theorem's estimate. With a zero
    scale only an all-zero trajectory passes.
    """
    B = np.asarray(B, dtype=float)
    ratios: dict[str, np.ndarray] = {}
    worst_name, worst = "", 0.0
    for term in envelope.terms:
        got = np.array([rec.value(term.norm, None if term.order is None else float(term.order)) for rec in records])
        t = np.array([rec.t for rec in records])
        env = np.array([float(b(ti)) ** term.b_power for ti in t]) * (1.0 + B) ** float(term.exponent)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(got == 0, 0.0, got / (scale * env)) if scale > 0 else np.where(got == 0, 0.0, np.inf)
        r = r[t >= start_time]
        ratios[term.norm] = r
        if len(r) and float(np.max(r)) >= worst:
            worst, worst_name = float(np.max(r)), term.norm
    return EnvelopeReport(worst <= c_max, float(c_max), float(scale), worst, worst_name, ratios)
