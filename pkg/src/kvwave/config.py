"""Flat ``key = value`` run configuration.

Example::

    model = kelvin_voigt
    domain.geometry = interval
    domain.length = 1.0
    modes = 8
    integrator.method = direct_rk4
    integrator.dt = 0.001
    integrator.t_end = 10.0
    sample_stride = 10
    init.u0 = mode_sum 1:1.0 2:-0.0625
    init.u1 = zero

Initial data values take one of the forms ``zero``, ``single_mode K A``,
``mode_sum K:A K:A ...`` or ``profile EXPR`` where ``EXPR`` is an arithmetic
expression in ``x`` (and ``y`` on rectangles).
"""

from __future__ import annotations

import ast
import hashlib
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .diagnostics import BT_PROTOTYPE, KELVIN_VOIGT
from .errors import InvalidConfigurationError
from .evolution import METHODS, MODELS, IntegratorSpec
from .spectral import InitialData, Interval, Rectangle, build_domain

__all__ = [
    "ConfigIssue",
    "ConfigError",
    "InitSpec",
    "SimConfig",
    "parse_config",
    "render_config",
    "load_config",
    "fingerprint",
]

GEOMETRIES = ("interval", "rectangle")

ERROR_KINDS = (
    "syntax",
    "unknown-key",
    "duplicate-key",
    "missing-key",
    "type-mismatch",
    "range-violation",
    "invalid-choice",
)


@dataclass(frozen=True)
class ConfigIssue:
    line: int
    kind: str
    key: str
    message: str

    def __str__(self):
        where = f"line {self.line}" if self.line else "config"
        return f"{where}: {self.kind}: {self.key}: {self.message}"


class ConfigError(InvalidConfigurationError):
    def __init__(self, issues: list[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))

    @property
    def kinds(self) -> set[str]:
        return {i.kind for i in self.issues}


_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
)


def _compile_profile(expr: str, variables: tuple[str, ...]):
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ValueError("only elementary functions may be called")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS and node.id not in variables:
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError("only numeric constants are allowed")
    code = compile(tree, "<profile>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def profile(*coords):
        return eval(code, env, dict(zip(variables, coords)))  # noqa: S307 - AST whitelisted above

    return profile


@dataclass(frozen=True)
class InitSpec:
    kind: str  # zero | single_mode | mode_sum | profile
    terms: tuple = ()
    expr: str = ""

    def render(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "single_mode":
            k, amp = self.terms[0]
            return f"single_mode {k} {amp!r}"
        if self.kind == "mode_sum":
            return "mode_sum " + " ".join(f"{k}:{amp!r}" for k, amp in self.terms)
        return f"profile {self.expr}"

    def to_initial_data(self, geometry: str = "interval") -> InitialData:
        if self.kind == "zero":
            return InitialData.zero()
        if self.kind in ("single_mode", "mode_sum"):
            return InitialData.mode_sum(self.terms)
        variables = ("x",) if geometry == "interval" else ("x", "y")
        return InitialData.from_profile(_compile_profile(self.expr, variables))

    @classmethod
    def parse(cls, text: str) -> "InitSpec":
        parts = text.split(None, 1)
        if not parts:
            raise ValueError("empty initial data")
        kind = parts[0]
        rest = parts[1].strip() if len(parts) > 1 else ""
        if kind == "zero":
            if rest:
                raise ValueError("'zero' takes no parameters")
            return cls("zero")
        if kind == "single_mode":
            toks = rest.split()
            if len(toks) != 2:
                raise ValueError("single_mode expects 'K A'")
            return cls("single_mode", ((_parse_int(toks[0]), _parse_float(toks[1])),))
        if kind == "mode_sum":
            toks = rest.replace(",", " ").split()
            terms = []
            for tok in toks:
                k, sep, amp = tok.partition(":")
                if not sep:
                    raise ValueError(f"mode_sum term {tok!r} is not K:A")
                terms.append((_parse_int(k), _parse_float(amp)))
            return cls("mode_sum", tuple(terms))
        if kind == "profile":
            if not rest:
                raise ValueError("profile needs an expression")
            _compile_profile(rest, ("x", "y"))
            return cls("profile", (), rest)
        raise ValueError(f"unknown initial data kind {kind!r}")


def _parse_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ValueError(f"{s!r} is not an integer") from None


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ValueError(f"{s!r} is not a number") from None


@dataclass(frozen=True)
class SimConfig:
    model: str
    geometry: str
    lengths: tuple
    modes: int
    method: str
    dt: float
    t_end: float
    u0: InitSpec
    u1: InitSpec
    alpha: float | None = None
    sample_stride: int = 1
    trace_path: str = "trace.csv"
    report_path: str = "report.txt"
    plot_script: str | None = None
    tol_resolvent: float = 1e-12
    tol_identity: float = 1e-6

    def domain(self):
        geom = Interval(self.lengths[0]) if self.geometry == "interval" else Rectangle(*self.lengths)
        return build_domain(geom, self.modes)

    def integrator(self) -> IntegratorSpec:
        return IntegratorSpec(self.method, self.dt, self.t_end, self.sample_stride, self.alpha)

    def initial_data(self):
        return self.u0.to_initial_data(self.geometry), self.u1.to_initial_data(self.geometry)

    def fingerprint(self) -> str:
        return fingerprint(render_config(self))

    def with_changes(self, **kw) -> "SimConfig":
        return replace(self, **kw)


# key -> (field, parser, required)
_KEYS = {
    "model": "model",
    "domain.geometry": "geometry",
    "domain.length": "lengths",
    "domain.lengths": "lengths",
    "modes": "modes",
    "integrator.method": "method",
    "integrator.dt": "dt",
    "integrator.t_end": "t_end",
    "integrator.alpha": "alpha",
    "sample_stride": "sample_stride",
    "init.u0": "u0",
    "init.u1": "u1",
    "output.trace_path": "trace_path",
    "output.report_path": "report_path",
    "output.plot_script": "plot_script",
    "tolerances.resolvent": "tol_resolvent",
    "tolerances.identity": "tol_identity",
}
_REQUIRED = ("model", "modes", "integrator.method", "integrator.dt", "integrator.t_end", "init.u0", "init.u1")
_POSITIVE_FLOATS = ("integrator.dt", "integrator.t_end", "integrator.alpha", "tolerances.resolvent", "tolerances.identity")


def fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def parse_config(text: str) -> SimConfig:
    """Parse and validate configuration text.

    All problems are collected and raised together as a ``ConfigError``
    whose ``issues`` carry the offending line numbers.
    """
    issues: list[ConfigIssue] = []
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            issues.append(ConfigIssue(lineno, "syntax", key or body, "expected 'key = value'"))
            continue
        if key not in _KEYS:
            issues.append(ConfigIssue(lineno, "unknown-key", key, "not a recognized setting"))
            continue
        if key in raw or (key in ("domain.length", "domain.lengths") and ({"domain.length", "domain.lengths"} & raw.keys())):
            issues.append(ConfigIssue(lineno, "duplicate-key", key, f"already set on line {raw.get(key, (0,))[0] or '?'}"))
            continue
        raw[key] = (lineno, value)

    vals: dict[str, object] = {}

    def bad(key, kind, msg):
        issues.append(ConfigIssue(raw[key][0] if key in raw else 0, kind, key, msg))

    for key in _REQUIRED:
        if key not in raw:
            bad(key, "missing-key", "required setting is absent")

    def get_float(key):
        if key not in raw:
            return None
        try:
            x = float(raw[key][1])
        except ValueError:
            bad(key, "type-mismatch", f"{raw[key][1]!r} is not a number")
            return None
        if key in _POSITIVE_FLOATS and not (x > 0 and math.isfinite(x)):
            bad(key, "range-violation", f"must be positive and finite, got {raw[key][1]}")
            return None
        return x

    def get_int(key):
        if key not in raw:
            return None
        try:
            x = int(raw[key][1])
        except ValueError:
            bad(key, "type-mismatch", f"{raw[key][1]!r} is not an integer")
            return None
        if x < 1:
            bad(key, "range-violation", f"must be >= 1, got {x}")
            return None
        return x

    def get_choice(key, choices):
        if key not in raw:
            return None
        v = raw[key][1]
        if v not in choices:
            bad(key, "invalid-choice", f"{v!r} not in {choices}")
            return None
        return v

    vals["model"] = get_choice("model", MODELS)
    geometry = get_choice("domain.geometry", GEOMETRIES) if "domain.geometry" in raw else "interval"
    vals["geometry"] = geometry
    vals["modes"] = get_int("modes")
    vals["method"] = get_choice("integrator.method", METHODS)
    vals["dt"] = get_float("integrator.dt")
    vals["t_end"] = get_float("integrator.t_end")
    vals["alpha"] = get_float("integrator.alpha")
    stride = get_int("sample_stride")
    vals["sample_stride"] = 1 if stride is None else stride
    for key, field_name in (("tolerances.resolvent", "tol_resolvent"), ("tolerances.identity", "tol_identity")):
        x = get_float(key)
        if x is not None:
            vals[field_name] = x
    for key, field_name in (("output.trace_path", "trace_path"), ("output.report_path", "report_path"), ("output.plot_script", "plot_script")):
        if key in raw:
            if not raw[key][1]:
                bad(key, "type-mismatch", "path must be non-empty")
            else:
                vals[field_name] = raw[key][1]

    # domain lengths
    lengths = None
    if geometry == "interval":
        if "domain.lengths" in raw:
            bad("domain.lengths", "invalid-choice", "interval geometry takes domain.length")
        elif "domain.length" not in raw:
            bad("domain.length", "missing-key", "required setting is absent")
        else:
            try:
                L = float(raw["domain.length"][1])
            except ValueError:
                bad("domain.length", "type-mismatch", f"{raw['domain.length'][1]!r} is not a number")
            else:
                if L > 0 and math.isfinite(L):
                    lengths = (L,)
                else:
                    bad("domain.length", "range-violation", f"must be positive, got {raw['domain.length'][1]}")
    elif geometry == "rectangle":
        if "domain.length" in raw:
            bad("domain.length", "invalid-choice", "rectangle geometry takes domain.lengths = Lx Ly")
        elif "domain.lengths" not in raw:
            bad("domain.lengths", "missing-key", "required setting is absent")
        else:
            toks = raw["domain.lengths"][1].replace(",", " ").split()
            try:
                ls = tuple(float(t) for t in toks)
            except ValueError:
                bad("domain.lengths", "type-mismatch", "expected two numbers")
            else:
                if len(ls) != 2:
                    bad("domain.lengths", "type-mismatch", f"expected two numbers, got {len(ls)}")
                elif not all(x > 0 and math.isfinite(x) for x in ls):
                    bad("domain.lengths", "range-violation", "lengths must be positive")
                else:
                    lengths = ls
    vals["lengths"] = lengths

    for key, field_name in (("init.u0", "u0"), ("init.u1", "u1")):
        if key not in raw:
            vals[field_name] = None
            continue
        try:
            spec = InitSpec.parse(raw[key][1])
        except ValueError as exc:
            bad(key, "type-mismatch", str(exc))
            vals[field_name] = None
            continue
        vals[field_name] = spec
        n_modes = None
        if vals["modes"] is not None:
            n_modes = vals["modes"] if geometry == "interval" else vals["modes"] ** 2
        if n_modes is not None:
            for k, amp in spec.terms:
                if not 1 <= k <= n_modes:
                    bad(key, "range-violation", f"mode index {k} outside 1..{n_modes}")
                if not math.isfinite(amp):
                    bad(key, "range-violation", f"amplitude for mode {k} is not finite")
        if spec.kind == "profile" and geometry == "interval":
            try:
                _compile_profile(spec.expr, ("x",))
            except ValueError as exc:
                bad(key, "type-mismatch", str(exc))

    # cross-field rules
    if vals["method"] == "yosida_rk4" and "integrator.alpha" not in raw:
        bad("integrator.alpha", "missing-key", "yosida_rk4 requires integrator.alpha")
    if vals["model"] == BT_PROTOTYPE and vals["method"] not in (None, "direct_rk4"):
        bad("integrator.method", "invalid-choice", "bt_prototype is integrated with direct_rk4 only")
    if vals["dt"] is not None and vals["t_end"] is not None and vals["dt"] > vals["t_end"]:
        bad("integrator.dt", "range-violation", "dt exceeds t_end")

    if issues:
        raise ConfigError(sorted(issues, key=lambda i: (i.line, i.key)))
    return SimConfig(**vals)


def render_config(config: SimConfig) -> str:
    """Canonical text; ``parse_config(render_config(c)) == c``."""
    lines = [
        f"model = {config.model}",
        f"domain.geometry = {config.geometry}",
    ]
    if config.geometry == "interval":
        lines.append(f"domain.length = {config.lengths[0]!r}")
    else:
        lines.append(f"domain.lengths = {config.lengths[0]!r} {config.lengths[1]!r}")
    lines += [
        f"modes = {config.modes}",
        f"integrator.method = {config.method}",
        f"integrator.dt = {config.dt!r}",
        f"integrator.t_end = {config.t_end!r}",
    ]
    if config.alpha is not None:
        lines.append(f"integrator.alpha = {config.alpha!r}")
    lines += [
        f"sample_stride = {config.sample_stride}",
        f"init.u0 = {config.u0.render()}",
        f"init.u1 = {config.u1.render()}",
        f"output.trace_path = {config.trace_path}",
        f"output.report_path = {config.report_path}",
    ]
    if config.plot_script is not None:
        lines.append(f"output.plot_script = {config.plot_script}")
    lines += [
        f"tolerances.resolvent = {config.tol_resolvent!r}",
        f"tolerances.identity = {config.tol_identity!r}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


assert {f.name for f in fields(SimConfig)} >= set(_KEYS.values())
