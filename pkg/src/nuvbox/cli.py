"""Command-line front end: sweeps, scenarios, and cost evaluation.

Every command writes delimited output (CSV) plus a JSON summary sidecar so
that downstream checks and the figure renderer never have to re-run the
solvers.  Exit codes: 0 success, 2 bad arguments or configuration, 3 sweep
non-convergence, 4 scenario non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from nuvbox.errors import ConfigError, NonConvergence, NuvError
from nuvbox.polyhedron import PolyhedronSpec, polyhedron_cost, triangle_spec
from nuvbox.priors import BoxSpec, HalfSpaceSpec, LaplaceSpec, Side, cost
from nuvbox.scalar import characteristic_sweep, feasibility_threshold
from nuvbox.scenarios import (
    BUILTIN_NAMES,
    ScenarioConfig,
    builtin_scenario_dict,
    run_scenario,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SWEEP_NONCONV = 3
EXIT_SCENARIO_NONCONV = 4

_SIDES = {"ge": Side.RIGHT_OF, "le": Side.LEFT_OF}


class _CliError(Exception):
    """Invalid invocation; maps to exit code 2."""


def _out_dir(args) -> str:
    out = args.out_dir or os.environ.get("NUV_OUT_DIR") or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: List[str], rows: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text: str, what: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise _CliError(f"could not parse {what} {text!r} as comma-separated floats")
    if not values:
        raise _CliError(f"{what} is empty")
    return values


def _parse_grid(text: str) -> List[float]:
    """Either 'lo:hi:step' or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise _CliError(f"grid {text!r} must be lo:hi:step")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise _CliError(f"could not parse grid {text!r}")
        if step <= 0 or hi < lo:
            raise _CliError(f"bad grid {text!r}: need hi >= lo and step > 0")
        n = int(math.floor((hi - lo) / step + 1e-12)) + 1
        return [lo + i * step for i in range(n)]
    return _parse_floats(text, "grid")


def _scalar_prior(args):
    if args.prior == "box":
        return BoxSpec(args.a, args.b, args.gamma)
    if args.prior == "halfspace":
        return HalfSpaceSpec(args.a, _SIDES[args.side], args.gamma)
    if args.prior == "laplace":
        return LaplaceSpec(args.a, args.gamma)
    raise _CliError(f"unknown prior {args.prior!r}")


def cmd_scalar_sweep(args) -> int:
    prior = _scalar_prior(args)
    mu_grid = _parse_grid(args.mu_grid)
    s_sq_list = _parse_floats(args.s2, "--s2")
    if any(s <= 0 for s in s_sq_list):
        raise _CliError("--s2 values must be > 0")
    rows, summary = characteristic_sweep(
        prior, mu_grid, s_sq_list, tol=args.tol, max_iter=args.max_iter
    )
    out = _out_dir(args)
    csv_path = os.path.join(out, f"sweep_{args.prior}.csv")
    _write_csv(csv_path, ["mu", "s_sq", "x_hat", "oracle_x_hat", "feasible_flag"], rows)
    thresholds = None
    if args.prior in ("box", "halfspace"):
        thresholds = [
            {"mu": mu, "threshold": feasibility_threshold(mu, prior)} for mu in mu_grid
        ]
    _write_json(
        os.path.join(out, f"sweep_{args.prior}.json"),
        {
            "prior": {"kind": args.prior, "a": args.a, "b": args.b, "side": args.side, "gamma": args.gamma},
            "s_sq_list": s_sq_list,
            "mu_grid": {"count": len(mu_grid), "min": min(mu_grid), "max": max(mu_grid)},
            "thresholds": thresholds,
            "csv": os.path.basename(csv_path),
            **summary,
        },
    )
    print(f"wrote {csv_path} ({len(rows)} rows)")
    if not summary["all_converged"]:
        print(f"{summary['nonconverged']} grid point(s) did not converge", file=sys.stderr)
        return EXIT_SWEEP_NONCONV
    return EXIT_OK


def _apply_overrides(cfg_dict: dict, overrides: List[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise _CliError(f"--set expects key.path=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg_dict
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict):
                raise _CliError(f"--set path {key!r} does not address a mapping")
            node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise _CliError(f"--set path {key!r} does not address a mapping")
        node[parts[-1]] = value
    return cfg_dict


def _load_scenario_config(args) -> ScenarioConfig:
    if args.scenario in BUILTIN_NAMES:
        cfg_dict = builtin_scenario_dict(args.scenario)
    else:
        if not os.path.exists(args.scenario):
            raise ConfigError(
                f"{args.scenario!r} is neither a builtin scenario ({', '.join(BUILTIN_NAMES)}) nor a config file"
            )
        try:
            with open(args.scenario) as fh:
                cfg_dict = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.scenario}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    _apply_overrides(cfg_dict, args.set or [])
    return ScenarioConfig.from_dict(cfg_dict)


def _write_scenario_outputs(result, out: str) -> str:
    csv_path = os.path.join(out, f"scenario_{result.name}.csv")
    _write_csv(
        csv_path,
        ["k", "channel", "kind", "mean", "variance", "lower", "upper", "violation"],
        result.trace_rows,
    )
    payload = dict(result.summary)
    payload["csv"] = os.path.basename(csv_path)
    payload["objective_trace_head"] = result.objective_trace[:5]
    payload["objective_final"] = result.objective_trace[-1] if result.objective_trace else None
    _write_json(os.path.join(out, f"scenario_{result.name}.json"), payload)
    return csv_path


def cmd_run_scenario(args) -> int:
    cfg = _load_scenario_config(args)
    out = _out_dir(args)
    try:
        result = run_scenario(cfg)
    except NonConvergence as exc:
        if exc.report is not None:
            path = _write_scenario_outputs(exc.report, out)
            print(f"wrote partial {path}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO_NONCONV
    path = _write_scenario_outputs(result, out)
    print(
        f"wrote {path} (iterations={result.iterations}, "
        f"max violation={result.summary['max_violation']:.3g})"
    )
    return EXIT_OK


def _load_polyhedron(args) -> PolyhedronSpec:
    if args.spec == "triangle":
        return triangle_spec(args.gamma)
    try:
        with open(args.spec) as fh:
            data = json.load(fh)
    except OSError:
        raise _CliError(f"polyhedron spec {args.spec!r}: no such file (or use 'triangle')")
    except json.JSONDecodeError as exc:
        raise _CliError(f"{args.spec}: JSON parse error: {exc.msg}")
    try:
        faces = data["faces"]
        normals = np.array([f["normal"] for f in faces], dtype=float)
        offsets = np.array([f["offset"] for f in faces], dtype=float)
        sides = tuple(_SIDES[f["side"]] for f in faces)
    except (KeyError, TypeError) as exc:
        raise _CliError(f"bad polyhedron spec: missing {exc}")
    return PolyhedronSpec(normals, offsets, sides, float(data.get("gamma", args.gamma)))


def cmd_cost_eval(args) -> int:
    out = _out_dir(args)
    if args.prior == "polyhedron":
        spec = _load_polyhedron(args)
        lo, hi, step = args.lo, args.hi, args.step
        grid = np.arange(lo, hi + step / 2, step)
        rows = [
            {"y1": float(y1), "y2": float(y2), "kappa": polyhedron_cost(np.array([y1, y2]), spec)}
            for y2 in grid
            for y1 in grid
        ]
        csv_path = os.path.join(out, "cost_polyhedron.csv")
        _write_csv(csv_path, ["y1", "y2", "kappa"], rows)
        _write_json(
            os.path.join(out, "cost_polyhedron.json"),
            {
                "spec": args.spec,
                "gamma": spec.gamma,
                "faces": spec.n_faces,
                "grid": {"lo": lo, "hi": hi, "step": step, "points": len(grid)},
                "csv": os.path.basename(csv_path),
                "kappa_min": min(r["kappa"] for r in rows),
                "kappa_max": max(r["kappa"] for r in rows),
            },
        )
        print(f"wrote {csv_path} ({len(rows)} rows)")
        return EXIT_OK
    prior = _scalar_prior(args)
    xs = np.arange(args.lo, args.hi + args.step / 2, args.step)
    if xs.size == 0:
        raise _CliError("empty evaluation grid")
    rows = [{"x": float(x), "kappa": cost(float(x), prior)} for x in xs]
    stem = f"cost_{args.prior}_{args.side}" if args.prior == "halfspace" else f"cost_{args.prior}"
    csv_path = os.path.join(out, f"{stem}.csv")
    _write_csv(csv_path, ["x", "kappa"], rows)
    _write_json(
        os.path.join(out, f"{stem}.json"),
        {
            "prior": {"kind": args.prior, "a": args.a, "b": args.b, "side": args.side, "gamma": args.gamma},
            "grid": {"lo": args.lo, "hi": args.hi, "step": args.step, "points": len(rows)},
            "csv": os.path.basename(csv_path),
            "kappa_min": min(r["kappa"] for r in rows),
            "kappa_max": max(r["kappa"] for r in rows),
        },
    )
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_list_scenarios(args) -> int:
    for name in BUILTIN_NAMES:
        print(name)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nuvbox",
        description="Constrained estimation and control with NUV priors in linear Gaussian models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("scalar-sweep", help="solve the scalar problem over a grid of likelihood means")
    sweep.add_argument("--prior", required=True, choices=["box", "halfspace", "laplace"])
    sweep.add_argument("--a", type=float, default=-1.0, help="center / lower bound / boundary")
    sweep.add_argument("--b", type=float, default=1.0, help="upper bound (box only)")
    sweep.add_argument("--side", choices=["ge", "le"], default="ge", help="half-space orientation")
    sweep.add_argument("--gamma", type=float, default=1.0)
    sweep.add_argument("--s2", required=True, help="comma-separated likelihood variances")
    sweep.add_argument("--mu-grid", default="-3.95:3.95:0.1", help="lo:hi:step or comma list")
    sweep.add_argument("--tol", type=float, default=1e-9)
    sweep.add_argument("--max-iter", type=int, default=5000)
    sweep.add_argument("--out-dir", default=None, help="default: $NUV_OUT_DIR or ./out")
    sweep.set_defaults(func=cmd_scalar_sweep)

    run = sub.add_parser("run-scenario", help="run a builtin scenario or a JSON config file")
    run.add_argument("scenario", help=f"builtin name ({', '.join(BUILTIN_NAMES)}) or config path")
    run.add_argument("--set", action="append", metavar="KEY.PATH=VALUE", help="override a config entry")
    run.add_argument("--out-dir", default=None, help="default: $NUV_OUT_DIR or ./out")
    run.set_defaults(func=cmd_run_scenario)

    ce = sub.add_parser("cost-eval", help="tabulate a constraint cost function on a grid")
    ce.add_argument("--prior", required=True, choices=["box", "halfspace", "laplace", "polyhedron"])
    ce.add_argument("--a", type=float, default=-1.0)
    ce.add_argument("--b", type=float, default=1.0)
    ce.add_argument("--side", choices=["ge", "le"], default="ge")
    ce.add_argument("--gamma", type=float, default=1.0)
    ce.add_argument("--lo", type=float, default=-3.0)
    ce.add_argument("--hi", type=float, default=3.0)
    ce.add_argument("--step", type=float, default=0.01)
    ce.add_argument("--spec", default="triangle", help="polyhedron: 'triangle' or a JSON spec file")
    ce.add_argument("--out-dir", default=None, help="default: $NUV_OUT_DIR or ./out")
    ce.set_defaults(func=cmd_cost_eval)

    ls = sub.add_parser("list-scenarios", help="print the builtin scenario names")
    ls.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (_CliError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NuvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
