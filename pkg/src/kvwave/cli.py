"""Command-line driver: ``kvwave simulate | resolvent | decay-report | plot-script``."""

from __future__ import annotations

import argparse
import glob
import io
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, parse_config
from .diagnostics import (
    BT_PROTOTYPE,
    KELVIN_VOIGT,
    EnergyTrace,
    build_certificate,
    check_decay_bound,
    check_prototype_bounds,
    decay_constant,
    loglog_slope,
    max_energy_increase,
    prototype_derivative_residual,
    regular_identity_residual,
    weak_identity_residual,
)
from .errors import BlowUpError, InvalidConfigurationError, KVWaveError, StiffnessWarning
from .evolution import evolve
from .resolvent import ResolventProblem, solve_resolvent, verify_m_dissipativity
from .spectral import Interval, build_domain, project_initial_data

__all__ = [
    "Check",
    "RunReport",
    "run_simulate",
    "run_resolvent_test",
    "analyze_trace",
    "write_trace_csv",
    "read_trace_csv",
    "emit_plot_script",
    "main",
]

TRACE_COLUMNS = ("t", "E_weak", "E_regular", "chi", "grad2_ut_mu2", "bound_thm2", "lower_13")


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float | None = None
    hard: bool = True
    note: str = ""


@dataclass
class RunReport:
    title: str
    fingerprint: str = ""
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    C: float = math.nan
    slope: float = math.nan
    wall_time: float = 0.0

    def add(self, name, passed, value, threshold=None, hard=True, note=""):
        self.checks.append(Check(name, bool(passed), float(value), threshold, hard, note))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def render(self) -> str:
        out = io.StringIO()
        out.write(f"# {self.title}\n")
        out.write(f"fingerprint = {self.fingerprint}\n")
        for k, v in self.info.items():
            out.write(f"{k} = {_fmt(v)}\n")
        out.write(f"decay_constant = {_fmt(self.C)}\n")
        out.write(f"slope = {_fmt(self.slope)}\n")
        out.write(f"wall_time_s = {self.wall_time:.3f}\n")
        out.write(f"status = {'PASS' if self.passed else 'FAIL'}\n")
        for w in self.warnings:
            out.write(f"warning: {w}\n")
        out.write("\n[checks]\n")
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            kind = "hard" if c.hard else "info"
            thr = "" if c.threshold is None else f" threshold={_fmt(c.threshold)}"
            note = f" ({c.note})" if c.note else ""
            out.write(f"{c.name:<28} {flag} [{kind}] value={_fmt(c.value)}{thr}{note}\n")
        out.write("\n[csv]\n")
        out.write("check,status,kind,value,threshold\n")
        for c in self.checks:
            thr = "" if c.threshold is None else _fmt(c.threshold)
            out.write(f"{c.name},{'PASS' if c.passed else 'FAIL'},{'hard' if c.hard else 'info'},{_fmt(c.value)},{thr}\n")
        return out.getvalue()


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


# ----------------------------------------------------------------- trace I/O


def write_trace_csv(path, trace: EnergyTrace, C: float | None, meta: dict) -> None:
    t = trace.times
    e0 = trace.e0
    kv = trace.model == KELVIN_VOIGT
    lines = [f"# {k}={_fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(TRACE_COLUMNS))
    for i in range(len(t)):
        bound = f"{e0 * 2.0 * C / (C + t[i]):.17g}" if kv and C is not None else ""
        lower = f"{1.0 / (1.0 / e0 + 2.0 * t[i]):.17g}" if not kv and e0 > 0 else ""
        row = (t[i], trace.e_weak[i], trace.e_regular[i], trace.chi[i], trace.grad2_ut_mu2[i])
        lines.append(",".join(f"{v:.17g}" for v in row) + f",{bound},{lower}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path) -> tuple[EnergyTrace, dict]:
    """Load a trace written by ``write_trace_csv``; integrals use the trapezoid rule."""
    meta: dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif header is None:
                header = tuple(line.split(","))
                if header != TRACE_COLUMNS:
                    raise InvalidConfigurationError(f"{path}: unexpected trace header {line!r}")
            elif line:
                rows.append(line.split(","))
    if not rows:
        raise InvalidConfigurationError(f"{path}: trace has no samples")
    data = np.array([[float(x) for x in r[:5]] for r in rows])
    model = meta.get("model", KELVIN_VOIGT)
    lam = float(meta["lambda1"]) if "lambda1" in meta else None
    trace = EnergyTrace(
        times=data[:, 0], e_weak=data[:, 1], e_regular=data[:, 2], chi=data[:, 3],
        grad2_ut_mu2=data[:, 4], model=model, method=meta.get("method", ""),
        fingerprint=meta.get("fingerprint", ""), lambda1=lam,
    )
    return trace, meta


# ----------------------------------------------------------------- analysis


def analyze_trace(trace: EnergyTrace, report: RunReport, tol_identity: float = 1e-6, strict: bool = False) -> None:
    """Run every diagnostic that applies to ``trace`` and record it in ``report``."""
    n = len(trace)
    e0 = trace.e0
    w_scale = e0 if e0 > 0 else 1.0
    r_scale = trace.e_regular[0] if trace.e_regular[0] > 0 else 1.0
    method = trace.method
    from_file = trace.states_a is None
    budget = tol_identity * w_scale

    one_sided = method == "implicit_euler_resolvent"
    identity_hard = method in ("direct_rk4", "implicit_euler_resolvent") and not from_file
    if trace.weak_dissipation is not None and n > 1:
        res = weak_identity_residual(trace, 0, n - 1) / w_scale
        ok = res <= tol_identity if one_sided else abs(res) <= tol_identity
        report.add("weak_identity", ok, res, tol_identity, hard=identity_hard,
                   note="one-sided" if one_sided else "")
    if n > 1:
        res = regular_identity_residual(trace, 0, n - 1) / r_scale
        ok = res <= tol_identity if one_sided else abs(res) <= tol_identity
        report.add("regular_identity", ok, res, tol_identity, hard=identity_hard,
                   note="one-sided" if one_sided else "")

    inc_w = max_energy_increase(trace.e_weak)
    report.add("weak_energy_monotone", inc_w <= 10 * budget, inc_w, 10 * budget)
    inc_r = max_energy_increase(trace.e_regular)
    r_budget = 10 * tol_identity * r_scale
    report.add("regular_energy_monotone", inc_r <= r_budget, inc_r, r_budget, hard=method != "yosida_rk4")

    if trace.model == KELVIN_VOIGT:
        if trace.lambda1 is None:
            report.warnings.append("Poincare constant unknown; decay checks skipped")
            return
        cert = build_certificate(trace)
        report.C = cert.C
        margin = float(np.min(cert.tail_margins))
        thr = -tol_identity * w_scale * max(1.0, cert.C)
        report.add("integral_inequality", margin >= thr, margin, thr)
        t_end = float(trace.times[-1])
        report.slope = loglog_slope(trace.times, trace.e_weak, t_end / 10.0, t_end)
        if t_end >= cert.C:
            dr = check_decay_bound(trace, cert)
            report.add("decay_bound", dr.passed, dr.max_violation, 0.0, note=f"{dr.checked} samples with t >= C")
        else:
            msg = f"t_end = {t_end:g} < C = {cert.C:.6g}; decay bound not checked (need t_end >= C)"
            report.warnings.append(msg)
            report.add("decay_horizon", not strict, t_end, cert.C, hard=strict, note="insufficient horizon")
        report.add("empirical_slope", True, report.slope, hard=False, note="fit on [t_end/10, t_end]")
    else:
        pr = check_prototype_bounds(trace)
        report.add("lower_bound", pr.passed, pr.min_gap, -pr.tol, note=f"min E*(1/E0+2t) = {pr.min_ratio:.6g}")
        report.add("upper_bound_fitted_mu", True, pr.fitted_mu, hard=False)
        report.slope = pr.slope
        report.add("empirical_slope", True, pr.slope, hard=False, note="fit on [t_end/10, t_end]")
        if trace.kinetic is not None and n >= 3:
            fd = prototype_derivative_residual(trace)
            report.add("derivative_identity_fd", True, fd, hard=False, note="central differences on samples")


# ----------------------------------------------------------------- simulate


def _resolve(out_dir, path: str) -> Path:
    p = Path(path)
    if out_dir is not None and not p.is_absolute():
        return Path(out_dir) / p
    return p


def run_simulate(config: SimConfig, out_dir=None, strict: bool = False) -> RunReport:
    """Integrate one configuration, write its trace and report, return the report."""
    started = time.perf_counter()
    fp = config.fingerprint()
    report = RunReport("kvwave simulate report", fp)
    report.info.update(model=config.model, method=config.method, dt=config.dt, t_end=config.t_end, modes=config.modes)
    dom = config.domain()
    u0, u1 = config.initial_data()
    initial = project_initial_data(dom, u0, u1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StiffnessWarning)
        try:
            trace = evolve(initial, config.model, config.integrator(), tol=config.tol_resolvent, fingerprint=fp)
            report.add("integration", True, float(trace.times[-1]), note="completed")
        except BlowUpError as exc:
            trace = exc.trace
            report.add("integration", False, float(trace.times[-1]) if trace is not None else 0.0, note=str(exc))
    trace.lambda1 = dom.poincare_constant
    for w in trace.warnings:
        report.warnings.append(str(w))
    if trace.warnings:
        report.add("stiffness_guard", not strict, len(trace.warnings), hard=strict, note="dt*chi*mu_max > 1")
    if len(trace) > 0:
        analyze_trace(trace, report, config.tol_identity, strict)
    C = decay_constant(dom.poincare_constant, trace.e0) if config.model == KELVIN_VOIGT else None
    meta = {
        "model": config.model,
        "method": config.method,
        "lambda1": float(dom.poincare_constant),
        "decay_constant": float(C) if C is not None else "",
        "fingerprint": fp,
    }
    trace_path = _resolve(out_dir, config.trace_path)
    write_trace_csv(trace_path, trace, C, meta)
    if config.plot_script:
        emit_plot_script(trace_path, _resolve(out_dir, config.plot_script))
    report.wall_time = time.perf_counter() - started
    report_path = _resolve(out_dir, config.report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.render(), encoding="utf-8")
    return report


def _sweep_one(args):
    path, out_dir, strict = args
    text = Path(path).read_text(encoding="utf-8")
    config = parse_config(text)
    sub = Path(out_dir) / Path(path).stem if out_dir is not None else Path(path).with_suffix("")
    report = run_simulate(config, sub, strict)
    return str(path), report.passed, report.wall_time


# ----------------------------------------------------------------- resolvent


def run_resolvent_test(
    alpha: float | None = None, trials: int = 100, modes: int = 8, length: float = 1.0,
    seed: int = 0, tol: float = 1e-9,
) -> RunReport:
    """Cubic single-mode instance plus randomized range checks.

    With ``alpha`` given the random trials use that value; otherwise alpha is
    drawn log-uniformly from ``[1e-3, 1e3]``.
    """
    if alpha is not None and not (alpha > 0 and math.isfinite(alpha)):
        raise InvalidConfigurationError(f"alpha must be positive, got {alpha}")
    started = time.perf_counter()
    report = RunReport("kvwave resolvent report")
    one = build_domain(Interval(math.pi), 1)
    a = 1.0 if alpha is None else alpha
    sol = solve_resolvent(ResolventProblem(a, np.zeros(1), np.ones(1), one))
    report.info.update(single_mode_alpha=a, chi_star=sol.chi_star, velocity=float(sol.v[0]),
                       iterations=sol.iterations, chi_residual=sol.residual)
    report.add("single_mode_chi_residual", sol.residual <= 1e-12, sol.residual, 1e-12)

    dom = build_domain(Interval(length), modes)
    rng_range = (a, a) if alpha is not None else (1e-3, 1e3)
    rep = verify_m_dissipativity(dom, trials=trials, tol=tol, seed=seed, alpha_range=rng_range)
    report.info.update(trials=rep.trials, seed=seed, modes=modes, length=length)
    report.add("range_residual", rep.passed, rep.max_residual, tol, note=f"{len(rep.failures)} failures")
    report.add("max_chi_residual", True, rep.max_chi_residual, hard=False)
    report.add("coercivity_printed", rep.min_coercivity_slack >= 0, rep.min_coercivity_slack, 0.0, hard=False)
    report.add("coercivity_sharp", rep.min_sharp_coercivity_slack >= -1e-9, rep.min_sharp_coercivity_slack, -1e-9)
    report.wall_time = time.perf_counter() - started
    return report


# ----------------------------------------------------------------- plot script


def emit_plot_script(trace_path, script_path=None) -> Path:
    """Write a gnuplot script for a trace; nothing is rendered here."""
    trace_path = Path(trace_path)
    if not trace_path.is_file():
        raise FileNotFoundError(f"trace file not found: {trace_path}")
    model = KELVIN_VOIGT
    with open(trace_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            if k.strip() == "model":
                model = v.strip()
    script_path = Path(script_path) if script_path is not None else trace_path.with_suffix(".gp")
    if script_path.is_dir():
        script_path = script_path / (trace_path.stem + ".gp")
    try:
        rel = os.path.relpath(trace_path, script_path.parent)
    except ValueError:
        rel = str(trace_path)
    curves = [
        f"'{rel}' using 1:2 with lines title 'E_weak'",
        f"'{rel}' using 1:3 with lines title 'E_regular'",
    ]
    if model == BT_PROTOTYPE:
        curves.append(f"'{rel}' using 1:7 with lines dashtype 2 title 'lower bound (1/E0+2t)^-1'")
    else:
        curves.append(f"'{rel}' using 1:6 with lines dashtype 2 title 'bound E0*2C/(C+t)'")
    body = "\n".join(
        [
            "# gnuplot script generated by kvwave",
            "set datafile separator ','",
            "set datafile commentschars '#'",
            "set key autotitle columnhead",
            "set logscale xy",
            "set xlabel 't'",
            "set ylabel 'energy'",
            "set grid",
            "plot " + ", \\\n     ".join(curves),
            "",
        ]
    )
    script_path.parent.mkdir(parents=True, exist_ok=True)
    script_path.write_text(body, encoding="utf-8")
    return script_path


# ----------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvwave", description="Modal Kelvin-Voigt wave simulator and verifier")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a configuration and check its energy diagnostics")
    s.add_argument("--config", help="configuration file")
    s.add_argument("--sweep", help="glob of configuration files run concurrently")
    s.add_argument("--out", help="directory for output files")
    s.add_argument("--strict", action="store_true", help="treat warnings as failures")
    s.add_argument("--jobs", type=int, default=None, help="worker processes for --sweep")

    r = sub.add_parser("resolvent", help="cubic single-mode case and random range checks")
    r.add_argument("--alpha", type=float, default=None)
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--modes", type=int, default=8)
    r.add_argument("--length", type=float, default=1.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--tol", type=float, default=1e-9)
    r.add_argument("--out", help="directory for the report")

    d = sub.add_parser("decay-report", help="re-analyze an existing trace CSV")
    d.add_argument("trace")
    d.add_argument("--out", help="directory for the report")
    d.add_argument("--strict", action="store_true")
    d.add_argument("--tol-identity", type=float, default=1e-6)

    g = sub.add_parser("plot-script", help="write a gnuplot script for a trace CSV")
    g.add_argument("trace")
    g.add_argument("--out", help="script path or directory")
    return p


def _emit(report: RunReport, out_dir, name: str) -> None:
    text = report.render()
    sys.stdout.write(text)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / name).write_text(text, encoding="utf-8")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if bool(args.config) == bool(args.sweep):
                print("error: give exactly one of --config or --sweep", file=sys.stderr)
                return 2
            if args.sweep:
                paths = sorted(glob.glob(args.sweep))
                if not paths:
                    print(f"error: no files match {args.sweep!r}", file=sys.stderr)
                    return 2
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    results = list(pool.map(_sweep_one, [(p, args.out, args.strict) for p in paths]))
                for path, ok, wall in results:
                    print(f"{'PASS' if ok else 'FAIL'} {path} ({wall:.2f} s)")
                return 0 if all(ok for _, ok, _ in results) else 1
            text = Path(args.config).read_text(encoding="utf-8")
            report = run_simulate(parse_config(text), args.out, args.strict)
            sys.stdout.write(report.render())
            return report.exit_code
        if args.command == "resolvent":
            report = run_resolvent_test(args.alpha, args.trials, args.modes, args.length, args.seed, args.tol)
            _emit(report, args.out, "resolvent_report.txt")
            return report.exit_code
        if args.command == "decay-report":
            trace, meta = read_trace_csv(args.trace)
            report = RunReport("kvwave decay report", meta.get("fingerprint", ""))
            report.info.update(model=trace.model, method=trace.method, samples=len(trace), source=args.trace)
            analyze_trace(trace, report, args.tol_identity, args.strict)
            _emit(report, args.out, Path(args.trace).stem + "_decay_report.txt")
            return report.exit_code
        if args.command == "plot-script":
            path = emit_plot_script(args.trace, args.out)
            print(path)
            return 0
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KVWaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
