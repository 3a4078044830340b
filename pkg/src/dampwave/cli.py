"""Command-line entry points: check, table, simulate, verify and fit.

Exit codes:

* ``check``: 0 hypotheses satisfied, 1 violated or not covered, 2 configuration error.
* ``table``: 0, or 2 on bad input.
* ``simulate``: 0 on completion, 2 on configuration errors (including the
  safe-horizon guard, checked before any stepping), 3 on suspected blow-up.
* ``verify``: 0 if every oracle item passes, else 1.
* ``fit``: 0, or 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from ._numbers import as_number, fmt
from .coeff import DissipationSpec, check_B_properties, eval_b, primitive_B, primitive_B0
from .config import ConfigError, RunConfig, exact_number, load
from .decay import DEFAULT_C_MAX, compute_norms, envelope_check, fit_decay
from .exponents import SpaceParams
from .report import render_report
from .solver import (
    CSV_COLUMNS,
    BlowUpSuspected,
    ConfigurationError,
    DataProfile,
    FieldState,
    GridSpec,
    StiffnessError,
    SystemSpec,
    duhamel_run,
    evolve,
    make_initial_data,
    mode_oracle,
)
from .theorems import (
    Interval,
    NotCovered,
    Verdict,
    WrongChecker,
    admissible_table,
    check_energy,
    check_energy_loss,
    check_large,
    check_sobolev,
    classify,
    energy_envelope,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class _Output:
    """Collects report text for stdout and an optional output directory."""

    def __init__(self, out_dir: Optional[str], stream=None):
        self.dir = Path(out_dir) if out_dir else None
        self.stream = stream or sys.stdout
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, echo: bool = True):
        if echo:
            self.stream.write(text)
        if self.dir:
            (self.dir / name).write_text(text, encoding="utf-8")

    def path(self, name: str) -> Optional[Path]:
        return self.dir / name if self.dir else None


def _error(msg: str) -> int:
    sys.stderr.write(f"error: {msg}\n")
    return EXIT_CONFIG


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load(args.config if isinstance(args.config, (str, Path)) else args.config[0])
    if getattr(args, "seed", None) is not None:
        cfg.seed_override = args.seed
    return cfg


# ---------------------------------------------------------------------------
# check

def interval_text(symbol: str, interval: Optional[Interval]) -> str:
    """Render an admissible interval as an inequality, e.g. ``q > 13/9``."""
    if interval is None:
        return "not computed"
    if interval.empty:
        return "empty"
    lo_op = ">=" if interval.lower_closed else ">"
    if math.isinf(float(interval.upper)):
        return f"{symbol} {lo_op} {fmt(interval.lower)}"
    hi_op = "<=" if interval.upper_closed else "<"
    lo_op = "<=" if interval.lower_closed else "<"
    return f"{fmt(interval.lower)} {lo_op} {symbol} {hi_op} {fmt(interval.upper)}"


CHECKERS: dict[str, Callable] = {
    "T2.1": check_energy, "T2.5a": check_energy_loss, "T2.5b": check_energy_loss,
    "T2.5c": check_energy_loss, "T2.5d": check_energy_loss, "T2.6": check_sobolev, "T2.7": check_large,
}


def run_check(cfg: RunConfig) -> Verdict:
    scn = cfg.scenario()
    if cfg.theorem == "auto":
        return classify(scn)
    verdict = CHECKERS[cfg.theorem](scn)
    if cfg.theorem.startswith("T2.5") and verdict.theorem_id != cfg.theorem:
        verdict.notes.append(f"requested {cfg.theorem}; the interplay signs select {verdict.theorem_id}")
    return verdict


def verdict_report(cfg: RunConfig, verdict: Verdict) -> dict:
    scn = cfg.scenario()
    pt, qt = scn.modified
    return {
        "scenario": {"n": scn.space.n, "m": fmt(scn.space.m), "p": fmt(scn.nl.p), "q": fmt(scn.nl.q),
                     "gamma1": fmt(scn.nl.gamma1), "gamma2": fmt(scn.nl.gamma2),
                     "alpha": fmt(scn.interplay.alpha), "beta": fmt(scn.interplay.beta),
                     "s1": fmt(scn.s1), "s2": fmt(scn.s2), "interplay_source": scn.source,
                     "p_tilde": fmt(pt), "q_tilde": fmt(qt)},
        "ranges": {"p": interval_text("p", verdict.admissible_p), "q": interval_text("q", verdict.admissible_q)},
        "verdict": verdict.to_dict(),
    }


def cmd_check(args) -> int:
    try:
        cfg = _load(args)
        verdict = run_check(cfg)
        report = verdict_report(cfg, verdict)
    except (ConfigError, WrongChecker, NotCovered, ValueError) as exc:
        return _error(str(exc))
    _Output(args.out).emit("check_report.txt", render_report(report))
    return EXIT_OK if verdict.satisfied else EXIT_FAIL


# ---------------------------------------------------------------------------
# table

def table_rows(betas: Sequence, gammas: Sequence, space: SpaceParams) -> list[dict]:
    rows = []
    for beta in betas:
        for g1 in gammas:
            row = admissible_table(beta, g1, space)
            rows.append({"beta": fmt(as_number(beta)), "gamma1": fmt(as_number(g1)), "row": row.row,
                         "lower_bound": fmt(row.bound), "relation": ">" if row.strict else ">="})
    return rows


def cmd_table(args) -> int:
    try:
        if args.config:
            cfg = _load(args)
            betas, gammas = cfg.table_lists()
            scn = cfg.raw.get("scenario", {})
            n = scn.get("n", args.n)
            m = exact_number(scn.get("m", args.m))
        else:
            betas, gammas, n, m = args.beta, args.gamma1, args.n, as_number(args.m)
        if not betas or not gammas:
            raise ConfigError("need at least one beta and one gamma1")
        rows = table_rows([as_number(b) for b in betas], [as_number(g) for g in gammas], SpaceParams(n, m))
    except (ConfigError, ValueError, TypeError) as exc:
        return _error(str(exc))
    out = _Output(args.out)
    if args.csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        out.emit("table.csv", buf.getvalue())
    else:
        lines = [f"p {r['relation']} {r['lower_bound']}    (beta = {r['beta']}, gamma1 = {r['gamma1']}; {r['row']})"
                 for r in rows]
        out.emit("table.txt", "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def data_scale(state: FieldState, m: float, component: str) -> float:
    """``||w0||_{H^1} + ||w0||_{L^m} + ||w1||_{L^2} + ||w1||_{L^m}`` of the initial data."""
    rec = compute_norms(state, m, (), component)
    w1 = state.ut if component == "u" else state.vt
    dv = state.grid.cell_volume
    lm1 = float(np.sum(np.abs(w1) ** m) * dv) ** (1.0 / m)
    return rec.l2 + rec.grad_l2 + rec.lm + rec.dt_l2 + lm1


def _envelopes(verdict: Verdict, space: SpaceParams):
    if verdict.theorem_id != "none" and verdict.decay_u is not None:
        return verdict.decay_u, verdict.decay_v, ""
    return (energy_envelope(space, "u"), energy_envelope(space, "v"),
            "no theorem applies; the linear energy envelope is shown for reference")


def simulate_config(cfg: RunConfig, out: _Output) -> int:
    """Run one configuration; returns the exit code."""
    try:
        scn = cfg.scenario()
        sys_ = cfg.system()
        grid = cfg.grid()
        times = cfg.output_times()
        t_end = cfg.t_end
        verdict = run_check(cfg)
    except (ConfigError, ValueError) as exc:
        return _error(str(exc))
    m = float(scn.space.m)
    summary: dict = {"run": {"t_end": t_end, "samples": len(times), "epsilon": sys_.epsilon,
                             "nonlinear": sys_.nonlinear, "seed": cfg.seed, "rtol": cfg.rtol,
                             "grid": f"dim={grid.dim} points={grid.points} half_length={grid.half_length}"},
                     "theorem": {"id": verdict.theorem_id, "satisfied": verdict.satisfied}}
    try:
        traj = evolve(sys_, grid, t_end, times, rtol=cfg.rtol, m=m, method=cfg.method)
    except ConfigurationError as exc:
        return _error(str(exc))
    except BlowUpSuspected as exc:
        summary["blow_up"] = {"suspected": True, "last_finite_time": exc.last_finite_time, "message": str(exc)}
        if exc.trajectory is not None and len(exc.trajectory):
            exc.trajectory.to_csv(out.path("trajectory.csv"))
        out.emit("summary.txt", render_report(summary))
        return EXIT_BLOWUP
    except StiffnessError as exc:
        summary["stiffness"] = {"time": exc.time, "message": str(exc)}
        out.emit("summary.txt", render_report(summary))
        return _error(str(exc))
    csv_text = traj.to_csv(out.path("trajectory.csv"))
    if out.dir is None:
        out.stream.write(csv_text)
    if traj.notes:
        summary["solver_notes"] = {f"note{i}": n for i, n in enumerate(traj.notes)}

    init = make_initial_data(grid, sys_.profile, sys_.epsilon, sys_.v_profile)
    env_u, env_v, note = _envelopes(verdict, scn.space)
    if note:
        summary["theorem"]["note"] = note
    for side, env, spec, Bv, records in (("u", env_u, sys_.b1, traj.B1, traj.u_norms),
                                         ("v", env_v, sys_.b2, traj.B2, traj.v_norms)):
        scale = data_scale(init, m, side)
        rep = envelope_check(records, env, lambda t, s=spec: float(eval_b(s, t)), Bv, scale, cfg.c_max)
        summary[f"envelope_{side}"] = rep.to_dict()
        col = {"L2": f"L2_{side}", "L2_grad": f"L2_grad_{side}", "L2_dt": f"L2_{side}t"}[cfg.fit_norm]
        term = next(t for t in env.terms if t.norm == cfg.fit_norm)
        try:
            fit = fit_decay(traj.times, traj.column(col), Bv, cfg.fit_window)
            summary[f"fit_{side}"] = {"norm": col, **fit.to_dict(), "predicted_exponent": fmt(term.exponent),
                                      "b_power": term.b_power,
                                      "deviation": fit.slope - float(term.exponent)}
        except ValueError as exc:
            summary[f"fit_{side}"] = {"norm": col, "skipped": str(exc)}
    if out.dir is None:
        # stdout carries the CSV, so the summary goes to stderr
        sys.stderr.write(render_report(summary))
    out.emit("summary.txt", render_report(summary), echo=out.dir is not None)
    return EXIT_OK


def _simulate_one(path: str, out_dir: Optional[str], seed: Optional[int]) -> int:
    try:
        cfg = load(path)
    except ConfigError as exc:
        return _error(str(exc))
    if seed is not None:
        cfg.seed_override = seed
    return simulate_config(cfg, _Output(out_dir))


def cmd_simulate(args) -> int:
    paths = args.config or []
    if not paths:
        return _error("--config is required")
    if len(paths) == 1:
        return _simulate_one(paths[0], args.out, args.seed)
    if not args.out:
        return _error("--out is required when running several configurations")
    dirs = [str(Path(args.out) / Path(p).stem) for p in paths]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        codes = list(pool.map(_simulate_one, paths, dirs, [args.seed] * len(paths)))
    for p, c in zip(paths, codes):
        sys.stdout.write(f"{p}: exit {c}\n")
    return max(codes)


# ---------------------------------------------------------------------------
# verify

class _Suite:
    def __init__(self):
        self.items: dict[str, dict] = {}

    def add(self, name: str, passed: bool, **details):
        self.items[name] = {"passed": bool(passed), **details}

    @property
    def passed(self) -> bool:
        return all(item["passed"] for item in self.items.values())


def _oracle_specs(cfg: Optional[RunConfig]) -> dict[str, DissipationSpec]:
    if cfg is not None and cfg.has_dissipation:
        return {"b1": cfg.dissipation("b1"), "b2": cfg.dissipation("b2")}
    return {"constant": DissipationSpec.constant(1), "power_r=1/2": DissipationSpec.power(1, 0.5),
            "power_r=-1/2": DissipationSpec.power(1, -0.5)}


def _log_closed_form(spec: DissipationSpec, t: float) -> Optional[float]:
    """Closed ``B(t, 0)`` for the logarithmic families with ``r = 0`` and ``gamma = 1``."""
    if spec.r != 0 or spec.gamma != 1:
        return None
    c = spec.c
    if spec.family == "power-log-growth":
        # int dt / log(c+t) = li(c+t) - li(c), li(x) = Ei(log x)
        return float(special.expi(math.log(c + t)) - special.expi(math.log(c))) / spec.mu
    # int log(c+t) dt = x log x - x between c and c+t
    x0, x1 = c, c + t
    return (x1 * math.log(x1) - x1 - (x0 * math.log(x0) - x0)) / spec.mu


def verify_suite(cfg: Optional[RunConfig], rtol: float = 1e-8) -> _Suite:
    suite = _Suite()
    # 1. solver against the exact single-mode solution
    g = GridSpec(1, 64, math.pi)
    x = g.axis()
    z = np.zeros(g.shape)
    b = DissipationSpec.constant(2)
    sys_ = SystemSpec(b, b, nonlinear=False, validate=False)
    init = FieldState(np.cos(x), z, np.cos(x), z.copy(), 0.0, g)
    traj = evolve(sys_, g, 10.0, [10.0], initial=init, check_horizon=False, keep_states=True, rtol=rtol,
                  atol=1e-12 * rtol / 1e-8)
    want = mode_oracle(2.0, 1.0, 1.0, 0.0, 10.0) * np.cos(x)
    err = float(np.max(np.abs(traj.states[-1].u - want)) / np.max(np.abs(want)))
    suite.add("mode_oracle_solver", err <= 1e-6, relative_error=err, tolerance=1e-6, rtol=rtol)
    # 2. the three characteristic-root branches against numpy's polynomial roots
    worst = 0.0
    for mu, k in ((2.0, 1.0), (2.0, 2.0), (5.0, 1.0)):
        r1, r2 = np.roots([1.0, mu, k * k])
        for t in (0.5, 3.0):
            if abs(r1 - r2) < 1e-9:
                ref = math.exp(r1.real * t) * (1 - r1.real * t)
            else:
                ref = ((r2 * np.exp(r1 * t) - r1 * np.exp(r2 * t)) / (r2 - r1)).real
            worst = max(worst, abs(mode_oracle(mu, k, 1.0, 0.0, t) - ref) / max(abs(ref), 1e-300))
    suite.add("mode_oracle_branches", worst <= 1e-10, relative_error=worst)
    # 3. B primitives, closed form against quadrature
    closed_specs = dict(_oracle_specs(cfg))
    closed_specs.update({"log_growth_r=0": DissipationSpec("power-log-growth", 1.0, 0.0, 1.0),
                         "log_decay_r=0": DissipationSpec("power-log-decay", 1.0, 0.0, 1.0)})
    for name, spec in closed_specs.items():
        worst = 0.0
        for t in np.geomspace(1e-2, 1e4, 13):
            t = float(t)
            if spec.family in ("constant", "pure-power"):
                ref = primitive_B(spec, 0.0, t, method="closed")
            else:
                ref = _log_closed_form(spec, t)
                if ref is None:
                    break
            worst = max(worst, abs(primitive_B(spec, 0.0, t, method="quad") - ref) / ref)
        else:
            suite.add(f"B_closed_vs_quad[{name}]", worst <= 1e-8, relative_error=worst)
    # 4. primitive property constants, with explicit values for constant b
    for name, spec in _oracle_specs(cfg).items():
        rep = check_B_properties(spec, horizon=1e3, samples=25)
        ts = np.geomspace(1.0, 1e3, 25)
        lower6 = max(primitive_B(spec, f * t, t) / primitive_B(spec, 0.0, t) for t in ts for f in (0.0, 0.25, 0.5))
        lower7 = max(primitive_B(spec, 0.0, t * (1 - f)) / primitive_B(spec, 0.0, t) for t in ts for f in (0.0, 0.5))
        details = {"P6_upper": rep.p6_constant, "P6_lower": lower6, "P7_upper": rep.p7_constant, "P7_lower": lower7,
                   **{f"P8_j{j}_l{l}": v for (j, l), v in rep.p8_constants.items()}}
        ok = rep.finite
        if spec.family == "constant":
            ok = ok and all(abs(details[k] - v) <= 1e-12 for k, v in
                            (("P6_upper", 2.0), ("P6_lower", 1.0), ("P7_upper", 2.0), ("P7_lower", 1.0)))
            details["expected"] = "P6 and P7 constants 2 (upper) and 1 (lower)"
        suite.add(f"primitive_properties[{name}]", ok, **details)
    # 5. parameter-dependent linear problem against its envelope
    for name, spec in _oracle_specs(cfg).items():
        lin = SystemSpec(spec, spec, nonlinear=False, validate=False)
        grid = GridSpec(1, 512, 80.0)
        res = duhamel_run(lin, 2.0, DataProfile(width=3, position=0.0, velocity=1.0), grid,
                          np.linspace(2.0, 50.0, 49), rtol=rtol)
        suite.add(f"duhamel_envelope[{name}]", res.max_ratio <= DEFAULT_C_MAX and np.isfinite(res.max_ratio),
                  max_ratio=res.max_ratio, c_max=DEFAULT_C_MAX)
    return suite


def cmd_verify(args) -> int:
    try:
        cfg = _load(args) if args.config else None
    except ConfigError as exc:
        return _error(str(exc))
    suite = verify_suite(cfg, rtol=args.tolerance)
    lines = [f"{'PASS' if item['passed'] else 'FAIL'} {name}" for name, item in suite.items.items()]
    out = _Output(args.out)
    out.emit("verify.txt", "\n".join(lines) + "\n")
    out.emit("verify_report.txt", render_report({"suite": {"passed": suite.passed}, **suite.items}),
             echo=False)
    return EXIT_OK if suite.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# fit

def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"unexpected columns {header}", str(path))
        rows = [[float(x) for x in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


def cmd_fit(args) -> int:
    try:
        cols = read_trajectory_csv(args.trajectory)
        cfg = _load(args) if args.config else None
        window = cfg.fit_window if cfg else None
        env = None
        if cfg is not None and cfg.has_scenario:
            scn = cfg.scenario()
            verdict = run_check(cfg)
            env_u, env_v, _ = _envelopes(verdict, scn.space)
            env = {"u": env_u, "v": env_v}
    except (ConfigError, OSError, ValueError) as exc:
        return _error(str(exc))
    report: dict = {}
    for side, Bname in (("u", "B1"), ("v", "B2")):
        for norm, col in (("L2", f"L2_{side}"), ("L2_grad", f"L2_grad_{side}"), ("L2_dt", f"L2_{side}t")):
            entry: dict
            try:
                entry = fit_decay(cols["t"], cols[col], cols[Bname], window).to_dict()
            except ValueError as exc:
                entry = {"skipped": str(exc)}
            if env is not None:
                term = next(t for t in env[side].terms if t.norm == norm)
                entry["predicted_exponent"] = fmt(term.exponent)
                entry["b_power"] = term.b_power
            report[col] = entry
    _Output(args.out).emit("fit_report.txt", render_report(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", metavar="PATH", help="TOML run configuration (repeatable)")
        else:
            p.add_argument("--config", metavar="PATH", help="TOML run configuration")
        p.add_argument("--out", metavar="DIR", help="directory for report files")
        p.add_argument("--seed", type=int, help="override the data seed")

    p = sub.add_parser("check", help="check theorem hypotheses for a scenario")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("table", help="lower bounds for p from the admissible-range table")
    common(p)
    p.add_argument("--beta", nargs="+", default=[], help="interplay exponents (rationals allowed)")
    p.add_argument("--gamma1", nargs="+", default=[], help="weight powers")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", default="1")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of text")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="run the solver and compare with the predicted envelopes")
    common(p, multi=True)
    p.add_argument("--jobs", type=int, default=None, help="worker processes for several configurations")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the built-in oracle suite")
    common(p)
    p.add_argument("--tolerance", type=float, default=1e-8, help="solver relative tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit decay slopes to a trajectory CSV")
    common(p)
    p.add_argument("trajectory", help="CSV written by simulate")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _error(str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
