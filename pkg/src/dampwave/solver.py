"""Pseudo-spectral solver for the coupled damped wave system on a periodic box.

Each Fourier mode obeys ``w'' + b(t) w' + |k|^2 w = F[nonlinearity]``. The
mode system is integrated with the Dormand-Prince 4(5) pair from
:mod:`scipy.integrate`; the nonlinearity is evaluated in physical space and
dealiased with the 2/3 rule. The box ``[-L, L)^dim`` stands in for ``R^n``,
so runs are limited to the time before waves from the data wrap around.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from .coeff import ContractViolation, DissipationSpec, check_effective, eval_b, primitive_B, primitive_B0
from .decay import NormRecord, compute_norms

CSV_COLUMNS = ("t", "B1", "B2", "L2_u", "L2_grad_u", "L2_ut", "Hs1_u",
               "L2_v", "L2_grad_v", "L2_vt", "Hs2_v", "Lm_u", "Lm_v")
CHECKPOINT_MAGIC = b"DWCKPT01"
MIN_POINTS_ACROSS_SUPPORT = 8
# growth of the largest mode amplitude that turns a step-size collapse into suspected blow-up
BLOWUP_GROWTH = 1e6


class ConfigurationError(ValueError):
    """Invalid grid, profile or run parameters."""


class BlowUpSuspected(RuntimeError):
    """The state became non-finite; ``last_finite_time`` is the last good time."""

    def __init__(self, message: str, last_finite_time: float, trajectory=None):
        super().__init__(message)
        self.last_finite_time = float(last_finite_time)
        self.trajectory = trajectory


class StiffnessError(RuntimeError):
    """The adaptive step size collapsed."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


# ---------------------------------------------------------------------------
# grid, data and state

@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-L, L)^dim`` with ``points`` nodes per axis."""

    dim: int
    points: int
    half_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points
        if n < 64 or n & (n - 1):
            raise ConfigurationError(f"points per axis must be a power of two >= 64, got {n}")
        if not self.half_length > 0:
            raise ConfigurationError(f"half_length must be positive, got {self.half_length}")

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    @property
    def step(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def cell_volume(self) -> float:
        return self.step ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.points,) * (self.dim - 1) + (self.points // 2 + 1,)

    def axis(self) -> np.ndarray:
        return -self.half_length + self.step * np.arange(self.points)

    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.dim), indexing="ij")

    def _wavenumbers(self) -> list[np.ndarray]:
        scale = 2.0 * math.pi / (2.0 * self.half_length)
        full = np.fft.fftfreq(self.points, d=1.0 / self.points) * scale
        half = np.fft.rfftfreq(self.points, d=1.0 / self.points) * scale
        axes = [full] * (self.dim - 1) + [half]
        return np.meshgrid(*axes, indexing="ij")

    @property
    def k2(self) -> np.ndarray:
        return sum(k * k for k in self._wavenumbers())

    @property
    def dealias_mask(self) -> np.ndarray:
        """Keep modes with every integer wavenumber index below N/3 in magnitude."""
        full = np.abs(np.fft.fftfreq(self.points, d=1.0 / self.points))
        half = np.fft.rfftfreq(self.points, d=1.0 / self.points)
        axes = [full] * (self.dim - 1) + [half]
        cut = self.points / 3.0
        mask = np.ones(self.spectral_shape, dtype=bool)
        for g in np.meshgrid(*axes, indexing="ij"):
            mask &= g < cut
        return mask


@dataclass(frozen=True)
class DataProfile:
    """Smooth compactly supported bump ``exp(-1/(1-r^2))``, ``r = |x - center| / width``.

    ``position`` and ``velocity`` scale the bump in ``w(0)`` and ``w_t(0)``.
    ``kind = "noisy-bump"`` multiplies the bump by ``1 + noise * s(x)`` with a
    smooth random ``s`` drawn from ``seed``.
    """

    width: float = 1.0
    center: float | tuple = 0.0
    position: float = 1.0
    velocity: float = 0.0
    kind: str = "bump"
    seed: int = 0
    noise: float = 0.1

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"profile width must be positive, got {self.width}")
        if self.kind not in ("bump", "noisy-bump"):
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")

    def centers(self, dim: int) -> np.ndarray:
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.size == 1:
            c = np.repeat(c, dim)
        if c.size != dim:
            raise ConfigurationError(f"center has {c.size} entries for a {dim}-d grid")
        return c

    def support_radius(self, dim: int) -> float:
        """Radius of the smallest origin-centred cube containing the support."""
        return float(np.max(np.abs(self.centers(dim)))) + self.width

    def shape_on(self, grid: GridSpec) -> np.ndarray:
        coords = grid.coordinates()
        c = self.centers(grid.dim)
        r2 = sum(((x - ci) / self.width) ** 2 for x, ci in zip(coords, c))
        out = np.zeros(grid.shape)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        if self.kind == "noisy-bump":
            rng = np.random.default_rng(self.seed)
            wiggle = np.zeros(grid.shape)
            for _ in range(4):
                freq = rng.uniform(0.5, 3.0, size=grid.dim) / self.width
                phase = rng.uniform(0, 2 * math.pi)
                wiggle += np.cos(sum(f * x for f, x in zip(freq, coords)) + phase)
            out *= 1.0 + self.noise * wiggle / 4.0
        return out


@dataclass
class FieldState:
    u: np.ndarray
    ut: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    time: float
    grid: GridSpec

    def __post_init__(self):
        for name in ("u", "ut", "v", "vt"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ConfigurationError(f"{name} has shape {arr.shape}, grid expects {self.grid.shape}")
            setattr(self, name, arr)

    @property
    def finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (self.u, self.ut, self.v, self.vt))

    def scaled(self, factor: float) -> "FieldState":
        return FieldState(factor * self.u, factor * self.ut, factor * self.v, factor * self.vt, self.time, self.grid)


def check_profile_fits(grid: GridSpec, profile: DataProfile) -> None:
    radius = profile.support_radius(grid.dim)
    if radius > 0.75 * grid.half_length:
        raise ConfigurationError(f"support radius {radius} leaves less than L/4 margin in a box of half-length "
                                 f"{grid.half_length}")
    if 2 * profile.width / grid.step < MIN_POINTS_ACROSS_SUPPORT:
        raise ConfigurationError(f"only {2 * profile.width / grid.step:.1f} grid points across the support; "
                                 f"need {MIN_POINTS_ACROSS_SUPPORT}")


def make_initial_data(grid: GridSpec, profile: DataProfile, epsilon: float,
                      v_profile: Optional[DataProfile] = None) -> FieldState:
    """``u = eps * position * bump``, ``u_t = eps * velocity * bump``; likewise ``v``."""
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be nonnegative, got {epsilon}")
    v_profile = v_profile or profile
    check_profile_fits(grid, profile)
    check_profile_fits(grid, v_profile)
    bu = profile.shape_on(grid)
    bv = bu if v_profile is profile else v_profile.shape_on(grid)
    return FieldState(epsilon * profile.position * bu, epsilon * profile.velocity * bu,
                      epsilon * v_profile.position * bv, epsilon * v_profile.velocity * bv, 0.0, grid)


def safe_horizon(grid: GridSpec, profile: DataProfile, v_profile: Optional[DataProfile] = None) -> float:
    """Latest end time before unit-speed waves from the data can wrap around the box."""
    radius = max(profile.support_radius(grid.dim), (v_profile or profile).support_radius(grid.dim))
    return grid.half_length - radius - 1.0


# ---------------------------------------------------------------------------
# system

@dataclass(frozen=True)
class SystemSpec:
    """Coefficients, powers and data of the coupled system.

    The forcing terms are ``(1+B1(t,0))^gamma1 |v|^p`` and
    ``(1+B2(t,0))^gamma2 |u|^q`` (``signed=True`` uses ``|v|^(p-1) v``).
    ``s1, s2`` are the Sobolev orders recorded in trajectories.
    """

    b1: DissipationSpec
    b2: DissipationSpec
    p: float = 2.0
    q: float = 2.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    epsilon: float = 1e-3
    profile: DataProfile = field(default_factory=DataProfile)
    v_profile: Optional[DataProfile] = None
    nonlinear: bool = True
    signed: bool = False
    s1: float = 1.0
    s2: float = 1.0
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise ConfigurationError(f"p and q must exceed 1, got {self.p}, {self.q}")
        if self.gamma1 < -1 or self.gamma2 < -1:
            raise ConfigurationError("gamma1 and gamma2 must be >= -1")
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.validate:
            for name in ("b1", "b2"):
                rep = check_effective(getattr(self, name))
                if not rep.passed:
                    raise ConfigurationError(f"{name} is not an effective dissipation: {rep.to_dict()}")

    @property
    def linear(self) -> "SystemSpec":
        return replace(self, nonlinear=False, validate=False)


@dataclass
class NormTrajectory:
    system: SystemSpec
    grid: GridSpec
    m: float
    times: list = field(default_factory=list)
    B1: list = field(default_factory=list)
    B2: list = field(default_factory=list)
    u_norms: list = field(default_factory=list)
    v_norms: list = field(default_factory=list)
    states: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def append(self, state: FieldState, keep_state: bool = False):
        t = float(state.time)
        if self.times and not (abs(t - self.times[-1]) > 0):
            raise ValueError("trajectory times must be strictly monotone")
        orders_u = sorted({0.0, 1.0, float(self.system.s1)})
        orders_v = sorted({0.0, 1.0, float(self.system.s2)})
        self.times.append(t)
        self.B1.append(float(primitive_B0(self.system.b1, abs(t))))
        self.B2.append(float(primitive_B0(self.system.b2, abs(t))))
        self.u_norms.append(compute_norms(state, self.m, orders_u, "u"))
        self.v_norms.append(compute_norms(state, self.m, orders_v, "v"))
        if keep_state:
            self.states.append(state)

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        s1, s2 = float(self.system.s1), float(self.system.s2)
        getters = {
            "t": lambda i: self.times[i], "B1": lambda i: self.B1[i], "B2": lambda i: self.B2[i],
            "L2_u": lambda i: self.u_norms[i].l2, "L2_grad_u": lambda i: self.u_norms[i].grad_l2,
            "L2_ut": lambda i: self.u_norms[i].dt_l2, "Hs1_u": lambda i: self.u_norms[i].hs[s1],
            "L2_v": lambda i: self.v_norms[i].l2, "L2_grad_v": lambda i: self.v_norms[i].grad_l2,
            "L2_vt": lambda i: self.v_norms[i].dt_l2, "Hs2_v": lambda i: self.v_norms[i].hs[s2],
            "Lm_u": lambda i: self.u_norms[i].lm, "Lm_v": lambda i: self.v_norms[i].lm,
        }
        return np.array([getters[name](i) for i in range(len(self))])

    def to_csv(self, target=None) -> str:
        """CSV text with the fixed column order; written to ``target`` if given."""
        data = np.column_stack([self.column(c) for c in CSV_COLUMNS]) if len(self) else np.empty((0, len(CSV_COLUMNS)))
        buf = io.StringIO()
        np.savetxt(buf, data, delimiter=",", fmt="%.17g", header=",".join(CSV_COLUMNS), comments="")
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


# ---------------------------------------------------------------------------
# exact mode solutions

def mode_propagator(mu, k, t):
    """Fundamental solutions of ``w'' + mu w' + k^2 w = 0`` on ``[0, t]``.

    Returns ``(c, s, dc, ds)`` with ``w(t) = c u0 + s u1`` and
    ``w'(t) = dc u0 + ds u1``. With ``d = mu^2/4 - k^2`` the three root
    configurations (distinct real, double, complex pair) are handled by
    ``cosh``/``sinh``, polynomial and ``cos``/``sin`` branches.
    """
    mu, k, t = np.broadcast_arrays(np.asarray(mu, float), np.asarray(k, float), np.asarray(t, float))
    a = mu / 2.0
    d = a * a - k * k
    real = d > 0
    cplx = d < 0
    root = np.sqrt(np.abs(d))
    C = np.empty_like(t)  # e^{-at} cosh / cos / 1
    S = np.empty_like(t)  # e^{-at} sinh(root t)/root / sin(root t)/root / t
    # distinct real roots: combine exponentials to avoid overflow
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # root - a written as -k^2/(root + a) to avoid cancellation for slow modes
        ep = np.exp(-(k * k) / np.where(real, root + a, 1.0) * t)
        em = np.exp(-(root + a) * t)
        C = np.where(real, 0.5 * (ep + em), C)
        S = np.where(real, 0.5 * (ep - em) / np.where(real, root, 1.0), S)
        decay = np.exp(-a * t)
        C = np.where(cplx, decay * np.cos(root * t), C)
        S = np.where(cplx, decay * np.sin(root * t) / np.where(cplx, root, 1.0), S)
        double = ~(real | cplx)
        C = np.where(double, decay, C)
        S = np.where(double, decay * t, S)
    # w = C u0 + (u1 + a u0) S, w' = -a w + e^{-at}(u0 d S' + (u1 + a u0) C') folded in
    c = C + a * S
    s = S
    dc = -a * c + d * S + a * C
    ds = -a * S + C
    return c, s, dc, ds


def mode_oracle(mu: float, k: float, u0: float, u1: float, t: float) -> float:
    """Exact value of the damped oscillator ``w'' + mu w' + k^2 w = 0`` at time ``t``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    c, s, _, _ = mode_propagator(mu, k, t)
    return float(c * u0 + s * u1)


# ---------------------------------------------------------------------------
# time stepping

class _ModeSystem:
    """Right-hand side of the Fourier-mode ODE system."""

    def __init__(self, sys: SystemSpec, grid: GridSpec, damping: float = 1.0):
        self.sys, self.grid = sys, grid
        self.k2 = grid.k2
        self.mask = grid.dealias_mask
        self.shape = grid.spectral_shape
        self.size = int(np.prod(self.shape))
        self.damping = damping

    def pack(self, state: FieldState) -> np.ndarray:
        parts = [np.fft.rfftn(a) for a in (state.u, state.ut, state.v, state.vt)]
        return np.concatenate([p.ravel() for p in parts])

    def unpack_hat(self, y: np.ndarray):
        return [y[i * self.size:(i + 1) * self.size].reshape(self.shape) for i in range(4)]

    def unpack(self, y: np.ndarray, t: float) -> FieldState:
        arrs = [np.fft.irfftn(h, s=self.grid.shape, axes=self.grid.axes) for h in self.unpack_hat(y)]
        return FieldState(*arrs, time=t, grid=self.grid)

    def _power(self, w: np.ndarray, power: float) -> np.ndarray:
        if self.sys.signed:
            return np.abs(w) ** (power - 1.0) * w
        return np.abs(w) ** power

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        uh, uth, vh, vth = self.unpack_hat(y)
        ta = abs(t)
        b1 = self.damping * float(eval_b(self.sys.b1, ta))
        b2 = self.damping * float(eval_b(self.sys.b2, ta))
        du = -b1 * uth - self.k2 * uh
        dv = -b2 * vth - self.k2 * vh
        if self.sys.nonlinear:
            u = np.fft.irfftn(uh, s=self.grid.shape, axes=self.grid.axes)
            v = np.fft.irfftn(vh, s=self.grid.shape, axes=self.grid.axes)
            w1 = (1.0 + float(primitive_B0(self.sys.b1, ta))) ** self.sys.gamma1
            w2 = (1.0 + float(primitive_B0(self.sys.b2, ta))) ** self.sys.gamma2
            du = du + self.mask * np.fft.rfftn(w1 * self._power(v, self.sys.p))
            dv = dv + self.mask * np.fft.rfftn(w2 * self._power(u, self.sys.q))
        return np.concatenate([uth.ravel(), du.ravel(), vth.ravel(), dv.ravel()])


def _check_times(t0: float, t_end: float, output_times: Sequence[float]) -> np.ndarray:
    out = np.asarray(sorted(set(float(x) for x in output_times), reverse=bool(t_end < t0)), dtype=float)
    lo, hi = min(t0, t_end), max(t0, t_end)
    if len(out) and (out.min() < lo - 1e-12 or out.max() > hi + 1e-12):
        raise ConfigurationError(f"output times must lie in [{lo}, {hi}]")
    return out


def evolve(sys: SystemSpec, grid: GridSpec, t_end: float, output_times: Sequence[float], *,
           initial: Optional[FieldState] = None, t0: float = 0.0, rtol: float = 1e-8,
           atol: Optional[float] = None, m: float = 1.0, check_horizon: bool = True,
           keep_states: bool = False, method: str = "rk45", damping: float = 1.0) -> NormTrajectory:
    """Integrate the system from ``t0`` to ``t_end`` and record norms at ``output_times``.

    ``method="rk45"`` uses the adaptive Dormand-Prince pair with dense output
    between steps. ``method="exact"`` propagates each mode in closed form and
    is available only for linear runs with constant coefficients; it is also
    the automatic fallback when the adaptive step collapses on such a run.
    ``damping`` scales both coefficients (``0`` gives the undamped system,
    useful for reversibility checks).
    """
    if initial is None:
        initial = make_initial_data(grid, sys.profile, sys.epsilon, sys.v_profile)
        initial.time = t0
    if initial.grid != grid:
        raise ConfigurationError("initial state lives on a different grid")
    if check_horizon:
        horizon = safe_horizon(grid, sys.profile, sys.v_profile)
        if not t_end - t0 < horizon:
            raise ConfigurationError(f"t_end - t0 = {t_end - t0} is not below the safe horizon {horizon:.6g}")
    outs = _check_times(t0, t_end, output_times)
    traj = NormTrajectory(sys, grid, m)
    if method == "exact":
        return _evolve_exact(sys, grid, initial, t0, outs, traj, keep_states, damping)
    if method != "rk45":
        raise ConfigurationError(f"unknown method {method!r}")

    rhs = _ModeSystem(sys, grid, damping)
    y0 = rhs.pack(initial)
    scale = float(np.max(np.abs(y0))) if y0.size else 0.0
    if atol is None:
        atol = 1e-12 * scale if scale > 0 else 1e-300
    idx = 0
    while idx < len(outs) and outs[idx] == t0:
        traj.append(rhs.unpack(y0, t0), keep_states)
        idx += 1
    if idx == len(outs) and t_end == t0:
        return traj
    solver = RK45(rhs, t0, y0, t_end, rtol=rtol, atol=atol)
    # overflow on the way to a blow-up is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        return _step_loop(sys, grid, rhs, solver, outs, idx, traj, keep_states, damping, scale)


def _step_loop(sys, grid, rhs, solver, outs, idx, traj, keep_states, damping, scale):
    """Advance ``solver`` until every output time has been recorded."""
    last_good = solver.t
    while idx < len(outs):
        msg = solver.step()
        if solver.status == "failed":
            if not sys.nonlinear and _constant_coefficients(sys):
                traj.notes.append(f"adaptive step collapsed at t={solver.t:.6g} ({msg}); switched to exact propagation")
                state = rhs.unpack(solver.y, solver.t)
                return _evolve_exact(sys, grid, state, solver.t, outs[idx:], traj, keep_states, damping)
            peak = float(np.max(np.abs(solver.y)))
            if sys.nonlinear and (not math.isfinite(peak) or peak > BLOWUP_GROWTH * max(scale, 1e-300)):
                raise BlowUpSuspected(f"step size collapsed at t={solver.t:.6g} after the state grew by "
                                      f"{peak / max(scale, 1e-300):.3g}", last_good, traj)
            raise StiffnessError(f"step size collapsed at t={solver.t:.6g}: {msg}", solver.t)
        if not np.all(np.isfinite(solver.y)):
            raise BlowUpSuspected(f"non-finite state after t={last_good:.6g}", last_good, traj)
        last_good = float(solver.t)
        dense = None
        forward = solver.direction > 0
        while idx < len(outs) and ((outs[idx] <= solver.t) if forward else (outs[idx] >= solver.t)):
            if outs[idx] == solver.t:
                y = solver.y
            else:
                dense = dense or solver.dense_output()
                y = dense(outs[idx])
            traj.append(rhs.unpack(y, float(outs[idx])), keep_states)
            idx += 1
        if solver.status == "finished":
            break
    return traj


def _constant_coefficients(sys: SystemSpec) -> bool:
    return sys.b1.family == "constant" and sys.b2.family == "constant"


def _evolve_exact(sys, grid, initial, t0, outs, traj, keep_states, damping):
    if sys.nonlinear or not _constant_coefficients(sys):
        raise ConfigurationError("exact propagation needs a linear run with constant coefficients")
    k = np.sqrt(grid.k2)
    hats = [np.fft.rfftn(a) for a in (initial.u, initial.ut, initial.v, initial.vt)]
    mu1, mu2 = damping * sys.b1.mu, damping * sys.b2.mu
    for t in outs:
        dt = t - t0
        out = []
        for mu, (w0, w1) in ((mu1, hats[:2]), (mu2, hats[2:])):
            c, s, dc, ds = mode_propagator(mu, k, np.full(k.shape, dt))
            out += [c * w0 + s * w1, dc * w0 + ds * w1]
        arrs = [np.fft.irfftn(h, s=grid.shape, axes=grid.axes) for h in out]
        traj.append(FieldState(*arrs, time=float(t), grid=grid), keep_states)
    return traj


# ---------------------------------------------------------------------------
# parameter-dependent problems

@dataclass
class DuhamelResult:
    """Trajectory from ``v(tau) = 0, v_t(tau) = v1`` and its envelope ratios."""

    trajectory: NormTrajectory
    tau: float
    data_norm: float
    ratios: dict

    @property
    def max_ratio(self) -> float:
        return max((float(np.max(r)) for r in self.ratios.values() if len(r)), default=0.0)


def duhamel_run(sys: SystemSpec, tau: float, v1_profile: DataProfile, grid: GridSpec,
                output_times: Sequence[float], *, m: float = 1.0, rtol: float = 1e-8,
                epsilon: Optional[float] = None) -> DuhamelResult:
    """Linear ``v``-equation started at ``tau`` with zero position and velocity ``v1``.

    Ratios compare measured norms with
    ``||v1||_{L^2 cap L^m} b2(tau)^-1 b2(t)^-l (1+B2(t,tau))^e`` where
    ``e = -(n/2)(1/m-1/2) - j/2 - l`` for ``(j, l)`` in ``{(0,0), (1,0), (0,1)}``.
    """
    if tau < 0:
        raise ContractViolation(f"tau must be nonnegative, got {tau}")
    eps = sys.epsilon if epsilon is None else epsilon
    check_profile_fits(grid, v1_profile)
    zeros = np.zeros(grid.shape)
    v1 = eps * v1_profile.velocity * v1_profile.shape_on(grid)
    init = FieldState(zeros, zeros.copy(), zeros.copy(), v1, tau, grid)
    outs = [t for t in output_times if t >= tau]
    t_end = max(outs) if outs else tau
    lin = replace(sys.linear, profile=v1_profile, v_profile=v1_profile)
    traj = evolve(lin, grid, t_end, outs, initial=init, t0=tau, rtol=rtol, m=m)
    dv = grid.cell_volume
    data_norm = math.sqrt(float(np.sum(v1 * v1)) * dv) + float(np.sum(np.abs(v1) ** m) * dv) ** (1.0 / m)
    base = -(grid.dim / 2.0) * (1.0 / m - 0.5)
    b_tau = float(eval_b(sys.b2, tau))
    ratios = {"L2": [], "L2_grad": [], "L2_dt": []}
    for rec in traj.v_norms:
        if rec.t <= tau:
            continue
        Btt = primitive_B(sys.b2, tau, rec.t)
        b_t = float(eval_b(sys.b2, rec.t))
        for name, j, l, val in (("L2", 0, 0, rec.l2), ("L2_grad", 1, 0, rec.grad_l2), ("L2_dt", 0, 1, rec.dt_l2)):
            env = data_norm / b_tau * b_t ** (-l) * (1.0 + Btt) ** (base - j / 2.0 - l)
            ratios[name].append(val / env if env > 0 else (0.0 if val == 0 else math.inf))
    return DuhamelResult(traj, float(tau), data_norm, {k: np.asarray(v) for k, v in ratios.items()})


# ---------------------------------------------------------------------------
# checkpoints

_HEADER = struct.Struct("<8sqqdd")


def write_checkpoint(state: FieldState, path) -> None:
    """Binary layout: magic, int64 dim, int64 N, float64 L, float64 time, then u, u_t, v, v_t.

    Arrays are row-major little-endian float64.
    """
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, g.dim, g.points, g.half_length, state.time))
        for arr in (state.u, state.ut, state.v, state.vt):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def read_checkpoint(path) -> FieldState:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, dim, n, L, t = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    grid = GridSpec(int(dim), int(n), float(L))
    count = n ** dim
    expected = _HEADER.size + 4 * count * 8
    if len(raw) != expected:
        raise ValueError(f"checkpoint size {len(raw)} does not match header ({expected} bytes expected)")
    arrs = [np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size + i * count * 8).reshape(grid.shape).copy()
            for i in range(4)]
    return FieldState(*arrs, time=float(t), grid=grid)
