"""Run configuration: a TOML document validated against a JSON schema.

Every number is read exactly: TOML integers stay integers, TOML floats and
strings such as ``"13/9"`` become :class:`fractions.Fraction` through their
decimal text, so ``1.2`` means exactly ``6/5``. Unknown keys are rejected.

Sections::

    [dissipation.b1] / [dissipation.b2]   family, mu, r, gamma, c
    [scenario]   n, m, p, q, gamma1, gamma2, alpha, beta, s1, s2, interplay
    [grid]       dim, points, half_length
    [run]        t_end, output_times, epsilon, seed, nonlinear, signed, rtol, method
    [run.profile] width, center, position, velocity, kind, noise
    [checks]     theorem, c_max, fit_window, fit_norm
    [table]      beta, gamma1
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ._numbers import as_number
from .coeff import DissipationSpec, fit_interplay
from .exponents import InterplayParams, NonlinearityParams, SpaceParams
from .solver import DataProfile, GridSpec, SystemSpec
from .theorems import THEOREM_IDS, Scenario


class ConfigError(ValueError):
    """The configuration is malformed; ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


NUMBER = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*[-+]?[0-9./eE+\-]+\s*$|^\s*[+]?inf\s*$"}]}
POSITIVE_INT = {"type": "integer", "minimum": 1}


def _section(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


DISSIPATION = _section({
    "family": {"enum": ["constant", "pure-power", "power-log-growth", "power-log-decay"]},
    "mu": NUMBER, "r": NUMBER, "gamma": NUMBER, "c": NUMBER,
}, ("family",))

SCHEMA = _section({
    "dissipation": _section({"b1": DISSIPATION, "b2": DISSIPATION}, ("b1", "b2")),
    "scenario": _section({
        "n": POSITIVE_INT, "m": NUMBER, "p": NUMBER, "q": NUMBER,
        "gamma1": NUMBER, "gamma2": NUMBER, "alpha": NUMBER, "beta": NUMBER,
        "s1": NUMBER, "s2": NUMBER, "interplay": {"enum": ["user", "fitted"]},
    }, ("n", "p", "q")),
    "grid": _section({"dim": {"type": "integer", "minimum": 1, "maximum": 3},
                      "points": POSITIVE_INT, "half_length": NUMBER}, ("dim", "points", "half_length")),
    "run": _section({
        "t_end": NUMBER,
        "output_times": {"anyOf": [
            {"type": "array", "items": NUMBER, "minItems": 1},
            _section({"start": NUMBER, "stop": NUMBER, "count": {"type": "integer", "minimum": 2}},
                     ("start", "stop", "count")),
        ]},
        "epsilon": NUMBER, "seed": {"type": "integer", "minimum": 0},
        "nonlinear": {"type": "boolean"}, "signed": {"type": "boolean"},
        "rtol": NUMBER, "method": {"enum": ["rk45", "exact"]},
        "profile": _section({"width": NUMBER, "center": {"anyOf": [NUMBER, {"type": "array", "items": NUMBER}]},
                             "position": NUMBER, "velocity": NUMBER,
                             "kind": {"enum": ["bump", "noisy-bump"]}, "noise": NUMBER}),
    }, ("t_end",)),
    "checks": _section({
        "theorem": {"enum": ["auto", *[t for t in THEOREM_IDS if t != "none"]]},
        "c_max": NUMBER,
        "fit_window": {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2},
        "fit_norm": {"enum": ["L2", "L2_grad", "L2_dt"]},
    }),
    "table": _section({"beta": {"type": "array", "items": NUMBER, "minItems": 1},
                       "gamma1": {"type": "array", "items": NUMBER, "minItems": 1}}, ("beta", "gamma1")),
})


def exact_number(value):
    """Exact reading of a TOML number or numeric string."""
    if isinstance(value, float):
        return value if math.isinf(value) else Fraction(str(value))
    return as_number(value)


def _f(value) -> float:
    return float(exact_number(value))


@dataclass
class RunConfig:
    raw: dict
    source: Optional[Path] = None
    seed_override: Optional[int] = None
    _fitted: Any = field(default=None, repr=False)

    # --- dissipation -------------------------------------------------------

    @property
    def has_dissipation(self) -> bool:
        return "dissipation" in self.raw

    def dissipation(self, name: str) -> DissipationSpec:
        data = self.raw["dissipation"][name]
        try:
            return DissipationSpec(data["family"], *(_f(data[k]) if k in data else d
                                                     for k, d in (("mu", 1.0), ("r", 0.0), ("gamma", 0.0))),
                                   c=_f(data["c"]) if "c" in data else None)
        except ValueError as exc:
            raise ConfigError(str(exc), f"dissipation.{name}") from exc

    def fitted_interplay(self) -> Optional[InterplayParams]:
        if not self.has_dissipation:
            return None
        if self._fitted is None:
            b1, b2 = self.dissipation("b1"), self.dissipation("b2")
            if b1 == b2:
                self._fitted = InterplayParams(1, 1)
            else:
                est = fit_interplay(b1, b2)
                self._fitted = InterplayParams(est.alpha_hat, est.beta_hat)
        return self._fitted

    # --- scenario ----------------------------------------------------------

    @property
    def has_scenario(self) -> bool:
        return "scenario" in self.raw

    def scenario(self) -> Scenario:
        if not self.has_scenario:
            raise ConfigError("section is required for this command", "scenario")
        sc = self.raw["scenario"]
        get = lambda key, default: exact_number(sc[key]) if key in sc else default  # noqa: E731
        try:
            space = SpaceParams(sc["n"], get("m", 1))
            nl = NonlinearityParams(get("p", None), get("q", None), get("gamma1", 0), get("gamma2", 0))
        except ValueError as exc:
            raise ConfigError(str(exc), "scenario") from exc
        mode = sc.get("interplay", "user")
        fitted = self.fitted_interplay() if self.has_dissipation else None
        if mode == "fitted":
            if fitted is None:
                raise ConfigError("interplay = 'fitted' needs a [dissipation] section", "scenario.interplay")
            interplay = fitted
        else:
            if ("alpha" in sc) != ("beta" in sc):
                raise ConfigError("give both alpha and beta or neither", "scenario.alpha")
            if "alpha" in sc:
                try:
                    interplay = InterplayParams(get("alpha", 1), get("beta", 1))
                except ValueError as exc:
                    raise ConfigError(str(exc), "scenario.alpha") from exc
            elif fitted is not None:
                interplay, mode = fitted, "fitted"
            else:
                interplay = InterplayParams(1, 1)
        try:
            return Scenario(space, nl, interplay, get("s1", 1), get("s2", 1), source=mode,
                            fitted=fitted if mode == "user" else None)
        except ValueError as exc:
            raise ConfigError(str(exc), "scenario.s1") from exc

    # --- simulation --------------------------------------------------------

    def grid(self) -> GridSpec:
        if "grid" not in self.raw:
            raise ConfigError("section is required for simulate", "grid")
        g = self.raw["grid"]
        try:
            return GridSpec(g["dim"], g["points"], _f(g["half_length"]))
        except ValueError as exc:
            raise ConfigError(str(exc), "grid") from exc

    @property
    def run(self) -> dict:
        if "run" not in self.raw:
            raise ConfigError("section is required for simulate", "run")
        return self.raw["run"]

    @property
    def seed(self) -> int:
        if self.seed_override is not None:
            return self.seed_override
        return int(self.raw.get("run", {}).get("seed", 0))

    def profile(self) -> DataProfile:
        pr = self.run.get("profile", {})
        center = pr.get("center", 0)
        center = tuple(_f(c) for c in center) if isinstance(center, list) else _f(center)
        try:
            return DataProfile(width=_f(pr.get("width", 1)), center=center, position=_f(pr.get("position", 1)),
                               velocity=_f(pr.get("velocity", 0)), kind=pr.get("kind", "bump"),
                               seed=self.seed, noise=_f(pr.get("noise", "0.1")))
        except ValueError as exc:
            raise ConfigError(str(exc), "run.profile") from exc

    def system(self) -> SystemSpec:
        if not self.has_dissipation:
            raise ConfigError("section is required for simulate", "dissipation")
        scn = self.scenario()
        run = self.run
        try:
            return SystemSpec(self.dissipation("b1"), self.dissipation("b2"), p=float(scn.nl.p), q=float(scn.nl.q),
                              gamma1=float(scn.nl.gamma1), gamma2=float(scn.nl.gamma2),
                              epsilon=_f(run.get("epsilon", "0.001")), profile=self.profile(),
                              nonlinear=bool(run.get("nonlinear", True)), signed=bool(run.get("signed", False)),
                              s1=float(scn.s1), s2=float(scn.s2))
        except ValueError as exc:
            raise ConfigError(str(exc), "run") from exc

    @property
    def t_end(self) -> float:
        return _f(self.run["t_end"])

    def output_times(self) -> np.ndarray:
        spec = self.run.get("output_times", {"start": 0, "stop": self.run["t_end"], "count": 101})
        if isinstance(spec, dict):
            return np.linspace(_f(spec["start"]), _f(spec["stop"]), int(spec["count"]))
        return np.array(sorted(_f(x) for x in spec))

    @property
    def rtol(self) -> float:
        return _f(self.run.get("rtol", "1e-8"))

    @property
    def method(self) -> str:
        return self.run.get("method", "rk45")

    # --- checks ------------------------------------------------------------

    @property
    def checks(self) -> dict:
        return self.raw.get("checks", {})

    @property
    def theorem(self) -> str:
        return self.checks.get("theorem", "auto")

    @property
    def c_max(self) -> float:
        return _f(self.checks.get("c_max", 10))

    @property
    def fit_window(self) -> Optional[tuple[float, float]]:
        w = self.checks.get("fit_window")
        return None if w is None else (_f(w[0]), _f(w[1]))

    @property
    def fit_norm(self) -> str:
        return self.checks.get("fit_norm", "L2_grad")

    def table_lists(self) -> tuple[list, list]:
        if "table" not in self.raw:
            raise ConfigError("section is required for table", "table")
        t = self.raw["table"]
        return [exact_number(b) for b in t["beta"]], [exact_number(g) for g in t["gamma1"]]


def validate(raw: dict) -> None:
    """Raise :class:`ConfigError` pointing at the first schema violation."""
    if not raw:
        raise ConfigError("configuration is empty")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(err.message, path)


def loads(text: str, source: Optional[Path] = None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    validate(raw)
    return RunConfig(raw, source)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text, path)


def shipped_configs() -> dict[str, Path]:
    """Example configurations installed with the package."""
    root = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(root.glob("*.toml"))}
