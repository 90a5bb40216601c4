"""``esm-icp`` command line: register, synth, bench, downsample, convert.

Exit codes: 0 success, 1 usage, 2 I/O or parse error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .bench import Scenario, run_bench, synthesize
from .geometry import GeometryError
from .linalg3 import DegenerateCovarianceError
from .metrics import correspondence_rmse, error_report
from .pcio import (
    ANCHORS,
    VoxelFilterParams,
    convert,
    infer_format,
    read_cloud,
    read_transform,
    voxel_downsample,
    write_cloud,
    write_transform,
)
from .similarity import SimilarityCollapseError
from .solver import SolverConfig, export_snapshots, register, write_trace
from .synth import NoiseSpec

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def parse_noise(text: str) -> tuple[tuple[float, float, float], ...]:
    """``"std,lo,hi;std,lo,hi"`` -> component triples."""
    comps = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        vals = part.split(",")
        if len(vals) != 3:
            raise argparse.ArgumentTypeError(f"noise component {part!r} is not 'std,lo,hi'")
        try:
            comps.append(tuple(float(v) for v in vals))
        except ValueError:
            raise argparse.ArgumentTypeError(f"noise component {part!r} is not numeric") from None
    if not comps:
        raise argparse.ArgumentTypeError("empty noise specification")
    return tuple(comps)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--sigma", type=float, default=0.1, help="Gaussian kernel scale (default 0.1)")
    g.add_argument("--mode", choices=("esm", "classic"), default="esm")
    g.add_argument("--max-iters", type=int, default=100)
    g.add_argument("--eps-error", type=float, default=1e-12)
    g.add_argument("--eps-transform", type=float, default=1e-10)
    g.add_argument("--normalize-weights", type=_on_off, default=True, metavar="{on,off}")
    g.add_argument("--prealign", type=_on_off, default=True, metavar="{on,off}")
    g.add_argument("--h-form", choices=("matrix", "directed"), default="matrix")


def _add_synth_flags(p: argparse.ArgumentParser, default_trans: float = 1.0) -> None:
    g = p.add_argument_group("synthetic transform and noise")
    g.add_argument("--rot-range", nargs=2, type=float, default=(-math.pi, math.pi), metavar=("LO", "HI"),
                   help="per-axis Euler angle range in radians (default -pi pi)")
    g.add_argument("--trans-range", nargs=2, type=float, default=(-default_trans, default_trans),
                   metavar=("LO", "HI"))
    g.add_argument("--fraction", type=float, default=0.0, help="fraction of points to corrupt")
    g.add_argument("--noise", type=parse_noise, default=None,
                   help='mixture components "std,lo,hi[;std,lo,hi...]" (default: three-component mixture)')
    g.add_argument("--seed", type=int, default=0)


def _solver_config(args: argparse.Namespace, snapshots: bool = False) -> SolverConfig:
    try:
        return SolverConfig(sigma=args.sigma, max_iterations=args.max_iters,
                            epsilon_error=args.eps_error, epsilon_transform=args.eps_transform,
                            mode=args.mode, normalize_weights=args.normalize_weights,
                            centroid_prealign=args.prealign, record_snapshots=snapshots,
                            h_form=args.h_form)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _noise_spec(args: argparse.Namespace, seed: int) -> NoiseSpec:
    try:
        if args.noise is None:
            return NoiseSpec(args.fraction, seed=seed)
        return NoiseSpec(args.fraction, components=args.noise, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_range(name: str, rng) -> None:
    if rng[0] > rng[1]:
        raise UsageError(f"{name}: LO must not exceed HI")


def _write_json(path: str, payload) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def cmd_register(args: argparse.Namespace) -> int:
    config = _solver_config(args, snapshots=args.snapshots)
    source = read_cloud(args.source)
    target = read_cloud(args.target)
    gt = read_transform(args.ground_truth) if args.ground_truth else None
    started = _now()
    result = register(source, target, config)
    os.makedirs(args.out, exist_ok=True)
    write_transform(result.final_transform, os.path.join(args.out, "transform.txt"))
    write_trace(result, os.path.join(args.out, "trace.csv"))
    summary = {
        "iterations": result.iterations,
        "termination": result.termination.value,
        "correspondence_rmse": correspondence_rmse(source, target, result.final_transform),
    }
    if gt is not None:
        summary["errors"] = error_report(result.final_transform, gt).as_dict()
        _write_json(os.path.join(args.out, "errors.json"), summary["errors"])
    if args.snapshots:
        export_snapshots(result, os.path.join(args.out, "heatmaps"))
    _write_json(os.path.join(args.out, "metadata.json"), {
        "tool": "esm_icp", "version": __version__, "command": "register",
        "source_path": args.source, "target_path": args.target, "ground_truth": args.ground_truth,
        "solver": dataclasses.asdict(config), "result": summary,
        "timestamps": {"started": started, "finished": _now()},
    })
    print(json.dumps(summary))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    _check_range("--rot-range", args.rot_range)
    _check_range("--trans-range", args.trans_range)
    noise = _noise_spec(args, seed=args.seed + 1)
    target = read_cloud(args.target)
    pair = synthesize(target, tuple(args.rot_range), tuple(args.trans_range), args.seed, noise)
    os.makedirs(args.out, exist_ok=True)
    ext = os.path.splitext(args.target)[1].lower()
    src_path = os.path.join(args.out, "source" + ext)
    write_cloud(pair.source, src_path, infer_format(args.target))
    write_transform(pair.ground_truth, os.path.join(args.out, "ground_truth.txt"))
    write_transform(pair.applied, os.path.join(args.out, "applied_transform.txt"))
    with open(os.path.join(args.out, "corrupted_indices.txt"), "w") as f:
        f.writelines(f"{i}\n" for i in pair.corrupted)
    _write_json(os.path.join(args.out, "metadata.json"), {
        "tool": "esm_icp", "version": __version__, "command": "synth",
        "target_path": args.target, "seed": args.seed, "noise_seed": noise.seed,
        "rotation_range": list(args.rot_range), "translation_range": list(args.trans_range),
        "fraction": args.fraction, "noise": [list(c) for c in noise.components],
        "corrupted": len(pair.corrupted),
    })
    print(src_path)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    _check_range("--rot-range", args.rot_range)
    _check_range("--trans-range", args.trans_range)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    _noise_spec(args, 0)  # validate early
    scenario = Scenario(tuple(args.rot_range), tuple(args.trans_range), args.fraction,
                        args.noise, _solver_config(args))
    target = read_cloud(args.target)
    report = run_bench(target, args.trials, scenario, args.seed, args.jobs,
                       target_path=args.target)
    report.write(args.out)
    print(json.dumps(report.summary()))
    return EXIT_OK


def cmd_downsample(args: argparse.Namespace) -> int:
    try:
        params = VoxelFilterParams(args.leaf, args.anchor)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = voxel_downsample(read_cloud(args.input), params)
    write_cloud(out, args.output)
    print(len(out))
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    for p in (args.input, args.output):
        try:
            infer_format(p)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    print(convert(args.input, args.output))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="esm-icp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("register", help="align SOURCE onto TARGET")
    p.add_argument("source")
    p.add_argument("target")
    _add_solver_flags(p)
    p.add_argument("--snapshots", action="store_true", help="write m_iter_<k> heatmaps")
    p.add_argument("--ground-truth", metavar="PATH", help="4x4 source->target transform to score against")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("synth", help="make a transformed (and optionally corrupted) source from TARGET")
    p.add_argument("target")
    _add_synth_flags(p)
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="repeat synth + register + score over seeded trials")
    p.add_argument("target")
    _add_synth_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=100, metavar="K")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("downsample", help="voxel-grid filter")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--leaf", type=float, required=True)
    p.add_argument("--anchor", choices=ANCHORS, default="origin")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("convert", help="re-encode a cloud; formats follow the extensions")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"esm-icp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateCovarianceError, SimilarityCollapseError) as exc:
        print(f"esm-icp {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER if args.command == "register" else EXIT_IO
    except (OSError, ValueError, GeometryError) as exc:
        print(f"esm-icp {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
