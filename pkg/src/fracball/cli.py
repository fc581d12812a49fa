"""Command-line workbench.

Usage::

    fracball <command> [--config cfg.json] [--out DIR] [--format json|csv]
                       [--seed N] [--refine FACTOR]

Commands: verify-nonuniqueness, trace, embedding-table, solve, properties,
kernel-eval. Exit codes: 0 pass, 1 property failure, 2 usage, config or
parse error, 3 numerical failure.

Config schema (JSON object, every section optional)::

    {
      "params":     {"n": 2, "s": 0.75, "r": 0.5, "p": 2, "q": 1},
      "fields":     {"f": "1", "b": ["0.3", "0"], "c": "0.2", "g": "1", "u": "delta^0.5"},
      "quadrature": {QuadratureSpec fields},
      "solver":     {SolverSpec fields other than "quadrature"},
      "experiment": {command-specific keys, see EXPERIMENT_DEFAULTS},
      "output":     {"dir": "out", "format": "json"},
      "inject_fault": {"c_ns_scale": 1.1}
    }

Unknown keys at any level are rejected. All field expressions are parsed
before any computation starts, and output files are only written once the
whole report exists.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, fields, replace

import numpy as np

from . import __version__
from .errors import ConfigError, FracBallError
from .experiments import embedding_spec, embedding_table, solve_report, verify_nonuniqueness
from .fieldspec import parse_field, parse_vector_field
from .kernels import (
    ProblemParams,
    green_function,
    green_gradient,
    incomplete_kernel_integral,
    poisson_kernel,
    rho,
)
from .properties import faulty_constants, run_suite
from .quadrature import QuadratureSpec
from .solver import CoefficientBundle, SolverSpec
from .weighted_norms import dyadic_schedule, trace_limit_estimate

SCHEMA_VERSION = 1
TOP_LEVEL = ("params", "fields", "quadrature", "solver", "experiment", "output",
             "inject_fault")
FIELD_KEYS = ("f", "b", "c", "g", "u")
FAULT_KEYS = ("c_ns_scale", "kappa_scale", "C_ns_scale")
OUTPUT_KEYS = ("dir", "format")

EXPERIMENT_DEFAULTS = {
    "verify-nonuniqueness": {"probes": 10, "radius": 0.7, "pv_tol": 1e-2,
                             "limit_tol": 0.05, "k_min": 3, "k_max": 9,
                             "control": "none"},
    "trace": {"k_min": 3, "k_max": 9, "expect": None},
    "embedding-table": {"p": None, "q": None,
                        "t_values": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
                        "tolerance": 0.10},
    "solve": {"threshold": 5e-2},
    "properties": {"lemma_samples": 100_000, "green_samples": 10_000,
                   "gradient_samples": 10_000, "fd_samples": 100},
    "kernel-eval": {"kernel": "green", "x": [[0.1, 0.2]], "y": [[-0.3, 0.4]]},
}
COMMANDS = tuple(EXPERIMENT_DEFAULTS)
DEFAULT_FIELDS = {
    "verify-nonuniqueness": {},
    "trace": {"u": "delta^0.5"},
    "embedding-table": {},
    "solve": {"f": "1", "b": None, "c": "0"},
    "properties": {},
    "kernel-eval": {},
}
KERNELS = ("green", "green_gradient", "poisson", "rho", "incomplete")


# -- config -------------------------------------------------------------------

def _reject_unknown(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _dataclass_from(cls, section, where, exclude=()):
    allowed = [f.name for f in fields(cls) if f.name not in exclude]
    _reject_unknown(section, allowed, where)
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return cfg


class Experiment:
    """A validated configuration for one command."""

    def __init__(self, command, cfg, seed=None, refine=None):
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        _reject_unknown(cfg, TOP_LEVEL, "config")
        self.command = command
        params = cfg.get("params", {})
        if command == "solve" and "params" not in cfg:
            params = {"n": 2, "s": 0.75, "r": 0.5, "p": 2.0}
        self.params = _dataclass_from(ProblemParams, params, "params")
        quad = dict(cfg.get("quadrature", {}))
        if command == "embedding-table":
            quad = {**asdict(embedding_spec()), **quad}
        solver = dict(cfg.get("solver", {}))
        if seed is not None:
            quad["seed"] = solver["seed"] = int(seed)
        self.quadrature = _dataclass_from(QuadratureSpec, quad, "quadrature")
        solver_base = SolverSpec()
        solver = _dataclass_from(SolverSpec, solver, "solver", exclude=("quadrature",))
        self.solver = replace(solver, quadrature=solver_base.quadrature)
        if refine is not None:
            if not refine > 0:
                raise ConfigError("--refine must be positive")
            self.quadrature = self.quadrature.refined(refine)
            self.solver = self.solver.refined(refine)
        self.seed = self.quadrature.seed

        exp = cfg.get("experiment", {})
        defaults = EXPERIMENT_DEFAULTS[command]
        _reject_unknown(exp, defaults, f"experiment ({command})")
        self.options = {**defaults, **exp}

        out = cfg.get("output", {})
        _reject_unknown(out, OUTPUT_KEYS, "output")
        self.output = out

        fault = cfg.get("inject_fault", {})
        _reject_unknown(fault, FAULT_KEYS, "inject_fault")
        self.fault = {k: float(v) for k, v in fault.items()}

        texts = cfg.get("fields", {})
        _reject_unknown(texts, FIELD_KEYS, "fields")
        self.field_texts = {**DEFAULT_FIELDS[command], **texts}
        self.fields = self._parse_fields()
        self._check_options()

    def _parse_fields(self):
        out = {}
        for key, text in self.field_texts.items():
            if text is None:
                continue
            if key == "b":
                out[key] = parse_vector_field(text, self.params)
            else:
                out[key] = parse_field(text, self.params)
        return out

    def _check_options(self):
        o = self.options
        if self.command == "verify-nonuniqueness":
            if o["control"] not in ("none", "green-bump"):
                raise ConfigError("experiment.control must be 'none' or 'green-bump'")
        if self.command in ("verify-nonuniqueness", "trace"):
            if not 3 <= int(o["k_min"]) < int(o["k_max"]):
                raise ConfigError("need 3 <= k_min < k_max for the trace schedule")
        if self.command == "trace" and o["expect"] not in (None, "zero", "positive",
                                                           "divergent", "inconclusive"):
            raise ConfigError("experiment.expect must name a trace classification")
        if self.command == "kernel-eval":
            if o["kernel"] not in KERNELS:
                raise ConfigError(f"experiment.kernel must be one of {', '.join(KERNELS)}")
            for key in ("x", "y"):
                pts = np.asarray(o[key], dtype=float)
                if pts.ndim != 2 or pts.shape[1] != self.params.n:
                    raise ConfigError(f"experiment.{key} must be a list of points in R^{self.params.n}")
        if self.command == "embedding-table" and o["p"] is None:
            o["p"] = self.params.p
        if self.command == "embedding-table" and o["q"] is None and o["p"] == 1.0:
            o["q"] = self.params.q if self.params.q > 1.0 else None


# -- commands -----------------------------------------------------------------

def _schedule(o):
    return dyadic_schedule(int(o["k_min"]), int(o["k_max"]))


def cmd_verify_nonuniqueness(exp):
    o = exp.options
    return verify_nonuniqueness(exp.params, exp.quadrature, int(o["probes"]),
                                float(o["radius"]), float(o["pv_tol"]),
                                float(o["limit_tol"]), _schedule(o),
                                control=o["control"] == "green-bump"), {}


def cmd_trace(exp):
    u = exp.fields["u"]
    report = trace_limit_estimate(u, _schedule(exp.options), exp.params, exp.quadrature)
    expect = exp.options["expect"]
    out = {"schema_version": SCHEMA_VERSION, "command": "trace", "u": exp.field_texts["u"],
           **report.to_dict()}
    out["expect"] = expect
    out["passed"] = expect is None or report.classification == expect
    return out, {}


def cmd_embedding_table(exp):
    o = exp.options
    q = None if o["q"] is None else float(o["q"])
    report = embedding_table(exp.params, float(o["p"]), q, exp.quadrature,
                             tuple(float(t) for t in o["t_values"]), float(o["tolerance"]))
    return report, {}


def cmd_solve(exp):
    n = exp.params.n
    b = exp.fields.get("b")
    b_text = tuple(exp.field_texts["b"]) if b is not None else ("0",) * n
    if b is None:
        b = CoefficientBundle.zero(n).b
    coeffs = CoefficientBundle(b, exp.fields["c"], b_text, exp.field_texts["c"])
    sol, report = solve_report(exp.fields["f"], coeffs, exp.params, exp.solver,
                               float(exp.options["threshold"]))
    report["fields"] = {k: v for k, v in exp.field_texts.items() if k in ("f", "b", "c")}
    return report, {"solution.json": sol.to_json(), "solution.csv": sol.to_csv()}


def cmd_property_suite(exp):
    o = exp.options
    samples = {"lemma": int(o["lemma_samples"]), "green": int(o["green_samples"]),
               "gradient": int(o["gradient_samples"]), "fd": int(o["fd_samples"])}
    results = run_suite(exp.seed, samples, exp.fault or None, exp.quadrature)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "properties",
        "seed": exp.seed,
        "inject_fault": exp.fault,
        "results": [r.to_dict() for r in results],
        "failed": [r.name for r in results if not r.passed],
        "passed": all(r.passed for r in results),
    }, {}


def cmd_kernel_eval(exp):
    o = exp.options
    p = exp.params
    consts = faulty_constants(p, **exp.fault) if exp.fault else None
    x = np.asarray(o["x"], dtype=float)
    y = np.asarray(o["y"], dtype=float)
    kind = o["kernel"]
    if kind == "green":
        vals = green_function(x, y, p, consts)
    elif kind == "green_gradient":
        vals = green_gradient(x, y, p, consts)
    elif kind == "poisson":
        vals = poisson_kernel(x, y, p, consts)
    elif kind == "rho":
        vals = rho(x, y)
    else:
        vals = incomplete_kernel_integral(rho(x, y), p)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "kernel-eval",
        "kernel": kind,
        "params": asdict(p),
        "rows": [{"x": xi.tolist(), "y": yi.tolist(), "value": np.asarray(v).tolist()}
                 for xi, yi, v in zip(x, y, np.atleast_1d(vals))],
        "passed": True,
    }, {}


HANDLERS = {
    "verify-nonuniqueness": cmd_verify_nonuniqueness,
    "trace": cmd_trace,
    "embedding-table": cmd_embedding_table,
    "solve": cmd_solve,
    "properties": cmd_property_suite,
    "kernel-eval": cmd_kernel_eval,
}


# -- output -------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, json.dumps(v) if isinstance(v, list) else v


def report_to_csv(report):
    """Tabular reports (rows or results) become one CSV row per entry,
    anything else a key/value listing."""
    buf = io.StringIO()
    table = report.get("rows") or report.get("results")
    if table:
        flat = [dict(_flatten(r)) for r in table]
        cols = []
        for r in flat:
            cols += [c for c in r if c not in cols]
        w = csv.DictWriter(buf, fieldnames=cols)
        w.writeheader()
        w.writerows(flat)
    else:
        w = csv.writer(buf)
        w.writerow(["key", "value"])
        w.writerows(_flatten(report))
    return buf.getvalue()


def render(report, fmt):
    report = _jsonable(report)
    if fmt == "csv":
        return report_to_csv(report)
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir, files):
    """Write every file through a temporary name, then rename into place."""
    os.makedirs(out_dir, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(out_dir, name)))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def run(command, config=None, out=None, fmt=None, seed=None, refine=None):
    """Validate, compute and (optionally) write; returns (report, exit code)."""
    exp = Experiment(command, config or {}, seed, refine)
    fmt = fmt or exp.output.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"unknown output format {fmt!r}")
    out = out or exp.output.get("dir")
    report, extra = HANDLERS[command](exp)
    report.setdefault("schema_version", SCHEMA_VERSION)
    report["version"] = __version__
    text = render(report, fmt)
    if out is not None:
        write_outputs(out, {f"report.{fmt}": text, **extra})
    return report, text, (0 if report.get("passed", True) else 1)


def build_parser():
    parser = argparse.ArgumentParser(prog="fracball", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="directory for report (and solution) files")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--refine", type=float, default=None,
                       help="scale quadrature and solver resolution")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _, text, code = run(args.command, cfg, args.out, args.format, args.seed, args.refine)
    except FracBallError as exc:
        print(f"fracball {args.command}: error: {exc}", file=sys.stderr)
        pointer = getattr(exc, "pointer", None)
        if callable(pointer) and getattr(exc, "text", None):
            print(pointer(), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"fracball {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
