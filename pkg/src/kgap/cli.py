"""Command line interface.

    kgap integral --a 2 --b 3
    kgap gap --k 2 --s 0.01
    kgap partitions --k 2 --n 4
    kgap automaton --k 2 --L 2 --s 0.5 --exact
    kgap verify-all --seed 42

Results go to stdout, or to ``--output``; when ``--output`` is not given and
the environment variable KGAP_OUTPUT_DIR is set, they are written to
``$KGAP_OUTPUT_DIR/<command>.<format>``.  The result payload is
deterministic for a given configuration; timestamps and runtimes are written
separately to ``<output>.meta.json`` (or to stderr with ``--meta``).  The
exit status is 0 iff every requested check passes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import automaton as am
from . import gap_process as gp
from . import partitions as pt
from . import quadrature as qd
from . import verify
from .core_math import ConvergenceError, DomainError

DEFAULT_SEED = verify.DEFAULT_SEED
OUTPUT_ENV = "KGAP_OUTPUT_DIR"
COMMANDS = ("integral", "gap", "partitions", "automaton", "verify-all")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"--{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str
    parameters: dict
    seed: int = DEFAULT_SEED
    output_path: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format", "must be json or csv")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")


@dataclass
class RunOutcome:
    payload: object  # dict for json, list of rows for csv
    passed: bool
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _positive(key, value):
    if not value > 0:
        raise ConfigError(key, f"must be positive, got {value}")
    return value


def _cmd_integral(p: dict, cfg: RunConfig) -> RunOutcome:
    kind = p.get("kind", "main")
    tol = p.get("tol") or (1e-9 if kind.startswith("tilde") else 1e-10)
    try:
        if kind == "main":
            pair = (p["a"], p["b"])
            res = qd.integral_main(pair, tol)
            target = qd.main_target(pair)
            out = {"kind": kind, "a": p["a"], "b": p["b"], "value": res.value, "target": target}
        elif kind == "split":
            pair = (p["a"], p["b"])
            lo, hi = qd.integral_split(pair, tol)
            t_lo, t_hi = qd.split_targets(pair)
            out = {"kind": kind, "a": p["a"], "b": p["b"], "value": [lo.value, hi.value], "target": [t_lo, t_hi]}
            res = lo + hi
        elif kind == "tilde":
            res = qd.integral_tilde(tol)
            out = {"kind": kind, "value": res.value, "target": qd.TILDE_TARGET}
        elif kind == "tilde-split":
            lo, hi = qd.integral_tilde_split(tol)
            out = {"kind": kind, "value": [lo.value, hi.value], "target": list(qd.TILDE_SPLIT_TARGETS)}
            res = lo + hi
        elif kind == "F":
            a = _positive("a", p["a"])
            r = qd.integral_F(a, max(tol, 1e-8))
            out = {"kind": kind, "a": a, "value": [r.direct.value, r.termwise.value], "target": r.target}
            res = r.direct
        else:
            raise ConfigError("kind", f"unknown integral kind {kind!r}")
    except DomainError as exc:
        raise ConfigError("a", str(exc)) from exc
    vals = out["value"] if isinstance(out["value"], list) else [out["value"]]
    tgts = out["target"] if isinstance(out["target"], list) else [out["target"]] * len(vals)
    err = max(abs(v - t) for v, t in zip(vals, tgts))
    check_tol = 1e-8 if kind in ("main", "split") else 1e-7
    out.update(abs_error=err, error_estimate=res.error_estimate, tolerance=check_tol)
    return RunOutcome(out, err <= check_tol)


def _cmd_gap(p: dict, cfg: RunConfig) -> RunOutcome:
    try:
        params = gp.GapParams(p["k"], p["s"])
    except DomainError as exc:
        raise ConfigError("s" if str(exc).startswith("s ") else "k", str(exc)) from exc
    res = gp.p_Ak(params, p.get("tol") or 1e-12)
    lam = gp.lambda_k(params.k)
    out = {
        "k": params.k,
        "s": params.s,
        "log_probability": res.log_value,
        "probability": res.value,
        "relative_truncation_error": res.rel_error,
        "events": res.n_events,
        "lambda_k": lam,
        "scaled": -params.s * res.log_value,
        "deviation": abs(-params.s * res.log_value - lam),
    }
    passed = True
    if math.floor(params.s**-0.5) >= params.k + 1:
        sw = gp.sandwich_bounds(params)
        inside = sw.log_lower <= res.log_value <= sw.log_upper
        out["sandwich"] = {"log_lower": sw.log_lower, "log_upper": sw.log_upper, "r": sw.r, "contains": inside}
        passed = inside
    return RunOutcome(out, passed)


def _cmd_partitions(p: dict, cfg: RunConfig) -> RunOutcome:
    n = p["n"]
    if n < 0:
        raise ConfigError("n", "must be >= 0")
    kind = p.get("kind", "p_k")
    if kind == "p_k":
        k = p.get("k")
        if k is None or k < 2:
            raise ConfigError("k", "must be an integer >= 2")
        table = pt.count_pk(k, n)
    elif kind == "unrestricted":
        table = pt.count_unrestricted(n)
    elif kind in ("macmahon_lhs", "macmahon_rhs"):
        lhs, rhs = pt.count_macmahon(n)
        table = lhs if kind == "macmahon_lhs" else rhs
    else:
        raise ConfigError("kind", f"unknown table {kind!r}")
    if cfg.format == "csv":
        rows = [{"n": i, "count": str(c)} for i, c in enumerate(table.counts)]
        return RunOutcome(rows, True)
    out = {"kind": kind, "k": table.k, "n": n, "count": table[n]}
    return RunOutcome(out, True)


def _cmd_automaton(p: dict, cfg: RunConfig) -> RunOutcome:
    try:
        params = am.ModelParams(p["k"], p.get("theta"), p.get("variant", "original"))
    except DomainError as exc:
        raise ConfigError("k", str(exc)) from exc
    Ls, ss = p["L"], p["s"]
    for L in Ls:
        if L < 1:
            raise ConfigError("L", "must be >= 1")
    for s in ss:
        if not 0 <= s <= 1:
            raise ConfigError("s", "must lie in [0, 1]")
    if p.get("exact"):
        if len(Ls) != 1 or len(ss) != 1:
            raise ConfigError("exact", "takes a single L and s")
        try:
            poly = am.exhaustive_I(Ls[0], params)
        except DomainError as exc:
            raise ConfigError("L", str(exc)) from exc
        s_exact = Fraction(str(ss[0]))
        val = poly(s_exact)
        out = {"k": params.k, "variant": params.variant, "L": Ls[0], "s": ss[0], "value": float(val), "exact": str(val),
               "spanning_counts_by_occupied": list(poly.counts)}
        return RunOutcome(out, True)
    trials = p.get("trials") or 10000
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    rows = am.threshold_sweep(params.k, Ls, ss, trials, cfg.seed, params.variant, params.theta)
    if cfg.format == "csv":
        return RunOutcome(rows, True)
    if len(rows) == 1:
        return RunOutcome(rows[0], True)
    return RunOutcome({"rows": rows}, True)


def _cmd_verify_all(p: dict, cfg: RunConfig) -> RunOutcome:
    only = p.get("only")
    known = [c[0] for c in verify.CRITERIA]
    for n in only or []:
        if n not in known:
            raise ConfigError("only", f"no criterion {n}; choose from {known}")
    results = []
    for n in only or known:
        res = verify.run_criterion(n, cfg.seed)
        results.append(res)
        print(verify.summary_line(res), file=sys.stderr, flush=True)
    payload = {"seed": cfg.seed, "criteria": [r.payload() for r in results], "passed": all(r.checks_passed for r in results)}
    meta = {
        "runtimes": {str(r.number): r.runtime for r in results},
        "time_limits": {str(r.number): r.time_limit for r in results},
        "within_time": {str(r.number): r.within_time for r in results},
    }
    return RunOutcome(payload, all(r.passed for r in results), meta)


HANDLERS = {
    "integral": _cmd_integral,
    "gap": _cmd_gap,
    "partitions": _cmd_partitions,
    "automaton": _cmd_automaton,
    "verify-all": _cmd_verify_all,
}


# ---------------------------------------------------------------------------
# Rendering and I/O
# ---------------------------------------------------------------------------


def render(payload, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    rows = payload if isinstance(payload, list) else payload.get("rows", [payload])
    buf = io.StringIO()
    if rows:
        fields = list(am.SWEEP_HEADER) if set(rows[0]) == set(am.SWEEP_HEADER) else list(rows[0])
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def run(cfg: RunConfig, meta_to_stderr: bool = False) -> int:
    """Execute a configuration; write results; return the exit status."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    outcome = HANDLERS[cfg.command](cfg.parameters, cfg)
    text = render(outcome.payload, cfg.format)
    meta = {
        "command": cfg.command,
        "started": started,
        "elapsed_seconds": time.perf_counter() - t0,
        "python": platform.python_version(),
        "passed": outcome.passed,
        **outcome.metadata,
    }
    path = cfg.output_path
    if path is None and os.environ.get(OUTPUT_ENV):
        path = str(Path(os.environ[OUTPUT_ENV]) / f"{cfg.command}.{cfg.format}")
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        Path(path + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if meta_to_stderr:
        sys.stderr.write(json.dumps(meta, sort_keys=True) + "\n")
    return 0 if outcome.passed else 1


def _floats(key):
    def parse(text):
        try:
            return float(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"--{key} expects a number, got {text!r}") from exc

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None, help="output format")
    common.add_argument("--meta", action="store_true", help="also print run metadata to stderr")

    parser = argparse.ArgumentParser(prog="kgap", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integral", parents=[common], help="integrals of -log f(x)/x and F(x)/x")
    p.add_argument("--a", type=_floats("a"))
    p.add_argument("--b", type=_floats("b"))
    p.add_argument("--kind", choices=("main", "split", "tilde", "tilde-split", "F"), default="main")
    p.add_argument("--tol", type=_floats("tol"))

    p = sub.add_parser("gap", parents=[common], help="probability of no k-gap")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--s", type=_floats("s"), required=True)
    p.add_argument("--tol", type=_floats("tol"))

    p = sub.add_parser("partitions", parents=[common], help="partition counts")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=("p_k", "unrestricted", "macmahon_lhs", "macmahon_rhs"), default="p_k")

    p = sub.add_parser("automaton", parents=[common], help="spanning probability I(L, s)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--L", type=int, nargs="+", required=True)
    p.add_argument("--s", type=_floats("s"), nargs="+", required=True)
    p.add_argument("--theta", type=int)
    p.add_argument("--variant", choices=am.VARIANTS, default="original")
    p.add_argument("--trials", type=int)
    p.add_argument("--exact", action="store_true", help="exhaustive enumeration (L <= 5)")

    p = sub.add_parser("verify-all", parents=[common], help="run every acceptance check")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "seed", "output", "format", "meta")}
    if args.command == "integral" and params.get("kind") in ("main", "split"):
        for key in ("a", "b"):
            if params.get(key) is None:
                raise ConfigError(key, "is required for this integral")
    if args.command == "integral" and params.get("kind") == "F" and params.get("a") is None:
        raise ConfigError("a", "is required for this integral")
    sweep = args.command == "automaton" and not args.exact and (len(args.L) > 1 or len(args.s) > 1)
    fmt = args.format or ("csv" if sweep else "json")
    return RunConfig(args.command, params, args.seed, args.output, fmt)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg, args.meta)
    except ConfigError as exc:
        parser.exit(2, f"kgap {args.command}: error: {exc}\n")
    except (DomainError, ConvergenceError, am.ContainmentError) as exc:
        parser.exit(1, f"kgap {args.command}: {type(exc).__name__}: {exc}\n")
    except OSError as exc:
        parser.exit(1, f"kgap {args.command}: I/O error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
