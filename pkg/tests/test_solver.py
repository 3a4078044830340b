import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from dampwave.coeff import ContractViolation, DissipationSpec
from dampwave.solver import (
    CSV_COLUMNS,
    BlowUpSuspected,
    ConfigurationError,
    DataProfile,
    FieldState,
    GridSpec,
    SystemSpec,
    _ModeSystem,
    duhamel_run,
    evolve,
    make_initial_data,
    mode_oracle,
    mode_propagator,
    read_checkpoint,
    safe_horizon,
    write_checkpoint,
)

CONST = DissipationSpec.constant(1)
SMALL = GridSpec(1, 128, 20.0)
PROFILE = DataProfile(width=3)


def linear(b1=CONST, b2=CONST, eps=1.0, profile=PROFILE, **kw):
    return SystemSpec(b1, b2, epsilon=eps, profile=profile, nonlinear=False, **kw)


def _sympy_oscillator(mu, k):
    t = sp.symbols("t", real=True)
    u0, u1 = sp.symbols("u0 u1")
    w = sp.Function("w")
    sol = sp.dsolve(w(t).diff(t, 2) + mu * w(t).diff(t) + k**2 * w(t), w(t),
                    ics={w(0): u0, w(t).diff(t).subs(t, 0): u1})
    return sp.lambdify((u0, u1, t), sol.rhs, "mpmath")


@pytest.mark.parametrize("mu, k", [
    (2, 1),                          # double root
    (2, 2),                          # complex pair -1 +- i sqrt(3)
    (5, 1),                          # distinct real roots
    (sp.Rational(1, 2), 3),
    (2, 0),
])
def test_mode_oracle_matches_sympy(mu, k):
    exact = _sympy_oscillator(mu, k)
    for u0, u1, t in [(1.0, 0.0, 1.0), (0.3, -2.0, 2.5), (-1.0, 1.0, 7.0)]:
        want = float(sp.re(exact(u0, u1, t)))
        assert mode_oracle(float(mu), float(k), u0, u1, t) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_mode_oracle_examples():
    assert mode_oracle(2, 1, 1, 0, 1) == pytest.approx(2 / math.e, rel=1e-15)
    for t in (0.0, 1.0, 100.0):
        assert mode_oracle(2, 0, 1, 0, t) == 1.0
    with pytest.raises(ValueError):
        mode_oracle(0, 1, 1, 0, 1)


@settings(max_examples=200)
@given(st.floats(0.01, 20), st.floats(0, 20), st.floats(0, 50))
def test_mode_propagator_wronskian_and_derivative(mu, k, t):
    # w = c u0 + s u1 solves the ODE; its Wronskian is exp(-mu t)
    c, s, dc, ds = (float(x) for x in mode_propagator(mu, k, t))
    assert c * ds - s * dc == pytest.approx(math.exp(-mu * t), rel=1e-7, abs=1e-12)
    h = 1e-6
    if t > h:
        cp, sp_, _, _ = (float(x) for x in mode_propagator(mu, k, t + h))
        cm, sm, _, _ = (float(x) for x in mode_propagator(mu, k, t - h))
        assert (cp - cm) / (2 * h) == pytest.approx(dc, abs=1e-6 * (1 + abs(dc)))
        assert (sp_ - sm) / (2 * h) == pytest.approx(ds, abs=1e-6 * (1 + abs(ds)))


def test_mode_propagator_no_overflow_at_large_times():
    c, s, dc, ds = mode_propagator(50.0, 0.1, 1e4)
    assert np.all(np.isfinite([c, s, dc, ds]))
    # slow root -k^2/mu (1 + O(k^2/mu^2)); value from mpmath at high precision
    with mpmath.workdps(50):
        a = mpmath.mpf(25)
        root = mpmath.sqrt(a * a - mpmath.mpf("0.01"))
        t = mpmath.mpf(10**4)
        want = mpmath.exp(-a * t) * (mpmath.cosh(root * t) + a * mpmath.sinh(root * t) / root)
    assert float(c) == pytest.approx(float(want), rel=1e-10)


def test_grid_validation():
    for bad in [dict(dim=4, points=64, half_length=1), dict(dim=1, points=100, half_length=1),
                dict(dim=1, points=32, half_length=1), dict(dim=1, points=64, half_length=0)]:
        with pytest.raises(ConfigurationError):
            GridSpec(**bad)


def test_dealias_mask_cutoff():
    g = GridSpec(1, 64, 1.0)
    mask = g.dealias_mask
    assert mask.sum() == 22  # indices 0..21 < 64/3
    g2 = GridSpec(2, 64, 1.0)
    assert g2.dealias_mask.shape == g2.spectral_shape


def test_bump_mass_matches_quadrature():
    g = GridSpec(1, 1024, 10.0)
    prof = DataProfile(width=2.0, center=0.5)
    state = make_initial_data(g, prof, 0.3)
    want = 0.3 * 2.0 * float(mpmath.quad(lambda r: mpmath.exp(-1 / (1 - r * r)), [-1, 0, 1]))
    assert float(np.sum(np.abs(state.u)) * g.cell_volume) == pytest.approx(want, rel=1e-8)
    assert np.all(state.ut == 0)


def test_initial_data_scaling_and_zero():
    a = make_initial_data(SMALL, PROFILE, 0.5)
    b = make_initial_data(SMALL, PROFILE, 1.0)
    np.testing.assert_array_equal(2 * a.u, b.u)
    z = make_initial_data(SMALL, PROFILE, 0.0)
    assert not np.any(z.u) and not np.any(z.v)


@pytest.mark.parametrize("prof", [DataProfile(width=16), DataProfile(width=0.1), DataProfile(width=2, center=14)])
def test_profile_guards(prof):
    with pytest.raises(ConfigurationError):
        make_initial_data(SMALL, prof, 1.0)


def test_noisy_bump_deterministic():
    prof = DataProfile(width=3, kind="noisy-bump", seed=7)
    a, b = prof.shape_on(SMALL), prof.shape_on(SMALL)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, DataProfile(width=3).shape_on(SMALL))
    assert np.all(a[np.abs(SMALL.axis()) >= 3] == 0)


def test_single_mode_oracle():
    g = GridSpec(1, 64, math.pi)
    x = g.axis()
    z = np.zeros(g.shape)
    init = FieldState(np.cos(x), z, np.cos(x), z.copy(), 0.0, g)
    b = DissipationSpec.constant(2)
    traj = evolve(linear(b, b), g, 10.0, [0.0, 10.0], initial=init, check_horizon=False, keep_states=True)
    u = traj.states[-1].u
    want = mode_oracle(2, 1, 1, 0, 10) * np.cos(x)
    assert want[0] == pytest.approx(-11 * math.exp(-10), rel=1e-14)
    assert np.max(np.abs(u - want)) / np.max(np.abs(want)) <= 1e-6


def test_linearity_scaling():
    b1, b2 = DissipationSpec.power(1, 0.5), DissipationSpec.power(1, -0.5)
    ts = np.linspace(0, 10, 11)
    one = evolve(linear(b1, b2, eps=1.0), SMALL, 10, ts)
    two = evolve(linear(b1, b2, eps=2.0), SMALL, 10, ts)
    for col in CSV_COLUMNS[3:]:
        a, b = one.column(col), two.column(col)
        nz = a > 0
        np.testing.assert_allclose(b[nz], 2 * a[nz], rtol=1e-10)


def test_zero_data_zero_trajectory():
    sys = SystemSpec(CONST, CONST, epsilon=0.0, profile=PROFILE)
    traj = evolve(sys, SMALL, 5, np.linspace(0, 5, 6))
    for col in CSV_COLUMNS[3:]:
        assert np.all(traj.column(col) == 0)


def test_exact_and_adaptive_agree():
    ts = np.linspace(0, 12, 13)
    a = evolve(linear(), SMALL, 12, ts, method="exact")
    b = evolve(linear(), SMALL, 12, ts)
    np.testing.assert_allclose(a.column("L2_grad_u"), b.column("L2_grad_u"), rtol=1e-7)


def test_exact_requires_linear_constant():
    with pytest.raises(ConfigurationError):
        evolve(SystemSpec(CONST, CONST, profile=PROFILE), SMALL, 5, [5], method="exact")


def test_resolution_doubling():
    ts = [0.0, 8.0]
    b = DissipationSpec.power(1, 0.5)
    # the bump's Fourier tail needs about 150 points across its support for 1e-8
    coarse = evolve(linear(b, b), GridSpec(1, 1024, 20.0), 8, ts, rtol=1e-12)
    fine = evolve(linear(b, b), GridSpec(1, 2048, 20.0), 8, ts, rtol=1e-12)
    for col in ("L2_u", "L2_grad_u", "L2_ut", "Lm_u"):
        assert fine.column(col)[-1] == pytest.approx(coarse.column(col)[-1], rel=1e-8)


def test_time_reversibility_undamped():
    ts = [0.0, 6.0]
    fwd = evolve(linear(), SMALL, 6, ts, damping=0.0, rtol=1e-11, keep_states=True)
    end = fwd.states[-1]
    back = evolve(linear(), SMALL, 0, [0.0], initial=end, t0=6.0, damping=0.0, rtol=1e-11, keep_states=True)
    start = make_initial_data(SMALL, PROFILE, 1.0)
    assert np.max(np.abs(back.states[-1].u - start.u)) <= 1e-8


def test_energy_nonincreasing():
    b = DissipationSpec.power(2, 0.5)
    traj = evolve(linear(b, b, profile=DataProfile(width=3, velocity=1.0)), SMALL, 15, np.linspace(0, 15, 61))
    energy = 0.5 * traj.column("L2_ut") ** 2 + 0.5 * traj.column("L2_grad_u") ** 2
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])


def test_dealiasing_no_spill():
    g = GridSpec(1, 64, math.pi)
    x = g.axis()
    z = np.zeros(g.shape)
    state = FieldState(z, z.copy(), np.cos(10 * x), z.copy(), 0.0, g)
    rhs = _ModeSystem(SystemSpec(CONST, CONST, p=3, q=2, signed=True, validate=False), g)
    du = rhs.unpack_hat(rhs(0.0, rhs.pack(state)))[1]
    # cos^3(10x) = (3 cos 10x + cos 30x)/4; mode 30 lies beyond 64/3 and is removed
    assert np.all(np.abs(du[~g.dealias_mask]) == 0)
    assert abs(du[10]) == pytest.approx(3 / 4 * 32, rel=1e-12)
    assert np.max(np.abs(np.delete(du, 10))) < 1e-12


def test_horizon_guard():
    h = safe_horizon(SMALL, PROFILE)
    assert h == pytest.approx(20 - 3 - 1)
    with pytest.raises(ConfigurationError):
        evolve(linear(), SMALL, h, [h])
    with pytest.raises(ConfigurationError):
        evolve(linear(), SMALL, 5, [6])


def test_blow_up_detected():
    sys = SystemSpec(CONST, CONST, p=2, q=2, epsilon=50.0, profile=DataProfile(width=5))
    with pytest.raises(BlowUpSuspected) as info:
        evolve(sys, GridSpec(1, 64, 20.0), 10, np.linspace(0, 10, 11))
    assert 0 < info.value.last_finite_time < 10
    assert len(info.value.trajectory) >= 1


def test_csv_layout_and_determinism(tmp_path):
    sys = SystemSpec(CONST, DissipationSpec.power(1, 0.5), epsilon=1e-2,
                     profile=DataProfile(width=3, kind="noisy-bump", seed=3))
    ts = np.linspace(0, 4, 5)
    text = evolve(sys, SMALL, 4, ts).to_csv(tmp_path / "a.csv")
    again = evolve(sys, SMALL, 4, ts).to_csv()
    assert text == again == (tmp_path / "a.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 6 and all(len(line.split(",")) == len(CSV_COLUMNS) for line in lines[1:])


def test_checkpoint_roundtrip(tmp_path):
    g = GridSpec(2, 64, 5.0)
    rng = np.random.default_rng(0)
    st_ = FieldState(*(rng.normal(size=g.shape) for _ in range(4)), time=2.5, grid=g)
    path = tmp_path / "state.bin"
    write_checkpoint(st_, path)
    back = read_checkpoint(path)
    assert back.grid == g and back.time == 2.5
    for name in ("u", "ut", "v", "vt"):
        np.testing.assert_array_equal(getattr(back, name), getattr(st_, name))
    raw = path.read_bytes()
    assert len(raw) == 8 + 8 + 8 + 8 + 8 + 4 * 64 * 64 * 8
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError):
        read_checkpoint(path)
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_checkpoint(path)


def test_duhamel_zero_velocity():
    res = duhamel_run(linear(), 2.0, DataProfile(width=3, velocity=0.0), SMALL, [2.0, 4.0, 6.0])
    assert all(r.l2 == 0 for r in res.trajectory.v_norms)
    assert res.max_ratio == 0


def test_duhamel_at_zero_matches_evolve():
    prof = DataProfile(width=3, position=0.0, velocity=1.0)
    ts = np.linspace(0, 8, 9)
    res = duhamel_run(linear(), 0.0, prof, SMALL, ts)
    direct = evolve(linear(profile=prof), SMALL, 8, ts)
    np.testing.assert_allclose(res.trajectory.column("L2_v"), direct.column("L2_v"), rtol=1e-12, atol=1e-14)


def test_duhamel_constant_damping_bounded():
    g = GridSpec(1, 512, 80.0)
    prof = DataProfile(width=3, position=0.0, velocity=1.0)
    ts = np.linspace(5, 55, 101)
    res = duhamel_run(linear(), 5.0, prof, g, ts)
    assert res.max_ratio < 10
    assert all(len(r) == 100 for r in res.ratios.values())


def test_duhamel_rejects_negative_tau():
    with pytest.raises(ContractViolation):
        duhamel_run(linear(), -1.0, PROFILE, SMALL, [0.0])


def test_system_rejects_non_effective():
    with pytest.raises(ConfigurationError):
        SystemSpec(DissipationSpec.unchecked("pure-power", 1.0, -1.0), CONST)
    with pytest.raises(ConfigurationError):
        SystemSpec(CONST, CONST, epsilon=-1)
