"""Command-line interface.

Subcommands: bounds, construct, sphere, cylinder, randcube, verify.
Every run writes a manifest (parameters, input/output hashes, wall-clock,
version) so results are reproducible and auditable.

Exit codes: 0 success/verified, 1 usage or validation error,
2 verification failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .measure import MeasureValidationError, parse_measure
from .quadrature import (
    ConstructionError,
    ParameterError,
    UnsupportedMeasureError,
    construct_quadrature,
    construct_quadrature_large_atoms,
)
from .bounds import lower_bound_report, upper_bound

FORMAT_VERSION = 1


@dataclass
class RunManifest:
    """Reproducibility record for one CLI invocation."""

    subcommand: str
    parameters: dict
    input_hashes: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    version: str = __version__

    def add_output(self, path: str):
        self.outputs[path] = _file_hash(path)

    def write(self, path: str):
        doc = {
            "format_version": FORMAT_VERSION,
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "input_hashes": self.input_hashes,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
            "version": self.version,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def _file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _load_measure(path: str):
    try:
        return parse_measure(path)
    except FileNotFoundError:
        raise SystemExit2(f"measure file not found: {path}")
    except MeasureValidationError as exc:
        raise SystemExit2(f"invalid measure spec {path}: {exc}")


class SystemExit2(Exception):
    """Usage/validation error carrying a message (exit code 1)."""


def cmd_bounds(args) -> int:
    m = _load_measure(args.measure)
    manifest = RunManifest(
        "bounds", {"measure": args.measure, "k": args.k}, {args.measure: _file_hash(args.measure)}
    )
    t0 = time.time()
    up = upper_bound(m, args.k, density_max=args.density_max)
    doc = {"format_version": FORMAT_VERSION, "upper": up.to_dict()}
    summary = f"k={args.k} upper n_guaranteed={up.n_guaranteed}"
    if up.large_atom_referral:
        summary += " (large atom present: use the atom-splitting construction path)"
    if args.k >= 3 and args.k % 2 == 1:
        low = lower_bound_report(m, args.k)
        doc["lower"] = low.to_dict()
        summary += f" lower moment={low.moment_bound:.6g}"
        if low.bernstein_bound is not None:
            summary += f" bernstein={low.bernstein_bound:.6g}"
        if up.n_guaranteed is not None and low.moment_bound > up.n_guaranteed:
            summary += " [WARNING: lower bound exceeds upper bound]"
    manifest.wall_clock_s = time.time() - t0
    out = args.out or "bounds_report.json"
    _write_json(out, doc)
    manifest.add_output(out)
    manifest.write(out + ".manifest.json")
    print(summary)
    return 0


def cmd_construct(args) -> int:
    m = _load_measure(args.measure)
    params = {
        "measure": args.measure,
        "k": args.k,
        "n": args.n,
        "mode": "best_effort" if args.best_effort else "guaranteed",
        "eps": args.eps,
    }
    manifest = RunManifest("construct", params, {args.measure: _file_hash(args.measure)})
    t0 = time.time()
    try:
        if args.eps is not None:
            result = construct_quadrature_large_atoms(m, args.k, args.eps, n=args.n)
        else:
            mode = "best_effort" if args.best_effort else "guaranteed"
            result = construct_quadrature(m, args.k, n=args.n, mode=mode)
    except (ConstructionError, UnsupportedMeasureError) as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 3
    manifest.wall_clock_s = time.time() - t0
    out = args.out or "nodes.txt"
    with open(out, "w") as fh:
        for x in result.nodes:
            fh.write(repr(float(x)) + "\n")
    from .verify import moment_residual

    report = moment_residual(result.nodes, m, args.k)
    report_path = out + ".residuals.json"
    _write_json(report_path, report.to_dict())
    manifest.add_output(out)
    manifest.add_output(report_path)
    manifest.write(out + ".manifest.json")
    print(
        f"n={len(result.nodes)} mode={result.mode} "
        f"max_residual={report.max_residual:.3e}"
    )
    return 0 if report.max_residual <= 1e-9 else 3


def cmd_sphere(args) -> int:
    from .cubature_sphere import sphere_cubature

    params = {"d": args.d, "k": args.k, "tau": args.tau, "delta": args.delta}
    manifest = RunManifest("sphere", params)
    t0 = time.time()
    try:
        cub = sphere_cubature(args.d, args.k, args.tau, args.delta)
    except (ConstructionError, ParameterError, ValueError) as exc:
        print(f"sphere cubature failed: {exc}", file=sys.stderr)
        return 3
    manifest.wall_clock_s = time.time() - t0
    out = args.out or "sphere_cubature.json"
    _write_json(out, cub.to_dict())
    manifest.add_output(out)
    manifest.write(out + ".manifest.json")
    print(
        f"K={cub.partition.K} boxes, {cub.nodes_per_box} nodes/box "
        f"(factor n={cub.n_factor})"
    )
    if args.verify:
        err = cub.max_error()
        print(f"max monomial error {err:.3e} vs delta {args.delta}")
        if err > args.delta:
            return 2
    return 0


def cmd_cylinder(args) -> int:
    from .cubature_cylinder import CylinderSpec, cylinder_cubature

    params = {
        "d": args.d, "k": args.k, "L": args.L, "W": args.W,
        "tau": args.tau, "delta": args.delta,
    }
    manifest = RunManifest("cylinder", params)
    t0 = time.time()
    try:
        spec = CylinderSpec(args.d, args.k, args.L, args.W, args.tau, args.delta)
        cub = cylinder_cubature(spec)
    except (ConstructionError, ParameterError, ValueError) as exc:
        print(f"cylinder cubature failed: {exc}", file=sys.stderr)
        return 3
    manifest.wall_clock_s = time.time() - t0
    out = args.out or "cylinder_cubature.json"
    _write_json(out, cub.to_dict())
    manifest.add_output(out)
    manifest.write(out + ".manifest.json")
    print(f"K={cub.K} cells, {cub.nodes_per_cell} nodes/cell")
    if args.verify:
        err = cub.max_cell_error()
        masses = np.array([c.mass for c in cub.cells])
        mass_dev = float(np.abs(masses - spec.tau ** (spec.d - 1)).max())
        print(
            f"max cell error {err:.3e} vs delta {args.delta}; "
            f"mass deviation {mass_dev:.3e}"
        )
        if err > args.delta or mass_dev > 1e-10 * spec.tau ** (spec.d - 1):
            return 2
    return 0


def cmd_randcube(args) -> int:
    from .random_cubature import small_ball_probability

    with open(args.config) as fh:
        config = json.load(fh)
    required = {"n", "k", "d", "eps", "reps", "seed"}
    missing = required - config.keys()
    if missing:
        raise SystemExit2(f"randcube config missing keys: {sorted(missing)}")
    manifest = RunManifest(
        "randcube", dict(config), {args.config: _file_hash(args.config)}
    )
    t0 = time.time()
    est = small_ball_probability(
        config["n"], config["k"], config["d"],
        config["eps"], config["reps"], config["seed"],
    )
    manifest.wall_clock_s = time.time() - t0
    log = args.log or "randcube_results.log"
    with open(log, "a") as fh:
        fh.write(json.dumps(est.to_dict(), sort_keys=True) + "\n")
    manifest.add_output(log)
    manifest.write(log + ".manifest.json")
    print(
        f"estimate={est.estimate:.6g} CI=[{est.ci_low:.6g}, {est.ci_high:.6g}] "
        f"hits={est.hit_count}/{est.repetitions}"
    )
    return 0


def cmd_verify(args) -> int:
    from .verify import moment_residual

    m = _load_measure(args.measure)
    nodes = np.loadtxt(args.nodes, ndmin=1)
    manifest = RunManifest(
        "verify",
        {"measure": args.measure, "nodes": args.nodes, "k": args.k, "tol": args.tol},
        {args.measure: _file_hash(args.measure), args.nodes: _file_hash(args.nodes)},
    )
    t0 = time.time()
    report = moment_residual(nodes, m, args.k)
    manifest.wall_clock_s = time.time() - t0
    out = args.out or "residual_report.json"
    _write_json(out, report.to_dict())
    manifest.add_output(out)
    manifest.write(out + ".manifest.json")
    print(f"max_residual={report.max_residual:.3e} tol={args.tol:.3e}")
    return 0 if report.max_residual <= args.tol else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chebyquad",
        description="Equal-weight quadrature and local cubature toolkit",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap library parallelism (default: available cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="node-count bound report for a measure")
    p.add_argument("-m", "--measure", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--density-max", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("construct", help="build an equal-weight node set")
    p.add_argument("-m", "--measure", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--best-effort", action="store_true")
    p.add_argument("--eps", type=float, default=None,
                   help="atom truncation level (activates the atom-splitting path)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("sphere", help="local cubature on a sphere")
    p.add_argument("-d", type=int, required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sphere)

    p = sub.add_parser("cylinder", help="local cubature on a cylinder")
    p.add_argument("-d", type=int, required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("-L", type=float, required=True)
    p.add_argument("-W", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cylinder)

    p = sub.add_parser("randcube", help="small-ball Monte-Carlo experiment")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--log")
    p.set_defaults(func=cmd_randcube)

    p = sub.add_parser("verify", help="moment residuals of a node file")
    p.add_argument("-m", "--measure", required=True)
    p.add_argument("--nodes", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (MeasureValidationError, ParameterError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
