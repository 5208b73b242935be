"""Command line entry point: ``pottsilp {noise,segment2d,segment1d,export-lp}``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as pio
from .grid import NoiseSpec, add_noise, build_grid_graph, connected_components, contrast_weights
from .milp import SolveOptions
from .model import write_lp_file
from .multicut import MulticutInstance, build_multicut_model, solve_multicut
from .potts1d import (
    Potts1DParams,
    build_potts1d_model,
    exact_big_m as exact_big_m_1d,
    median_fit,
    objective_1d,
    solve_potts1d_dp,
    solve_potts1d_mip,
)
from .potts2d import (
    Potts2DParams,
    build_potts2d_model,
    cardinality_bounds,
    default_parameters,
    objective_2d,
    solve_potts2d,
)

log = logging.getLogger("pottsilp")

SCHEMA = 1
MODELS_2D = ("multicut", "potts2d", "potts2d+cuts", "potts2d+cuts+card")
MODELS_1D = ("potts1d-dp", "potts1d-mip")
OBJECTIVE_CHECK_TOL = 1e-6


class CliError(Exception):
    pass


def _add_noise_flags(p: argparse.ArgumentParser, required: bool) -> None:
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--gaussian", type=float, metavar="SIGMA", help="additive Gaussian noise, clamped to [0, 255]")
    group.add_argument("--salt-pepper", type=float, metavar="P", help="replace pixels by 0/255 with probability P")
    p.add_argument("--seed", type=int, default=0)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, help="edge penalty (default: sigma1 * Y* / 4)")
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=0.5)
    p.add_argument("--big-m", type=float, help="big-M constant (default: block contrast Y*)")
    p.add_argument("--four-cycle", action=argparse.BooleanOptionalAction, default=None,
                   help="add the unit-square cycle inequalities (default: on for +cuts models)")
    p.add_argument("--cardinality", action="store_true", default=None,
                   help="add per-row/column active-edge caps (default: on for +card model)")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--time-limit", type=float, default=100.0)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--node-limit", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pottsilp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise", help="write a noisy copy of a PGM image")
    p.add_argument("input")
    p.add_argument("output")
    _add_noise_flags(p, required=True)
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")

    p = sub.add_parser("segment2d", help="segment and denoise PGM images")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", choices=MODELS_2D, default="potts2d+cuts")
    _add_param_flags(p)
    _add_solver_flags(p)
    _add_noise_flags(p, required=False)
    p.add_argument("--weights", help="multicut only: CSV of edge_index,weight instead of contrast weights")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--report", help="report path (single input only)")
    p.add_argument("--jobs", type=int, default=1, help="process independent inputs in parallel")

    p = sub.add_parser("segment1d", help="piecewise-constant fit of a CSV signal")
    p.add_argument("input")
    p.add_argument("--model", choices=MODELS_1D, default="potts1d-mip")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--big-m", type=float, help="default: data range")
    _add_solver_flags(p)
    p.add_argument("--out", help="fit CSV (index,y,w,label)")
    p.add_argument("--report")

    p = sub.add_parser("export-lp", help="write a model as a CPLEX LP file without solving")
    p.add_argument("input", help="PGM image, or CSV signal for potts1d")
    p.add_argument("output")
    p.add_argument("--model", choices=("potts1d",) + MODELS_2D, default="potts2d+cuts")
    _add_param_flags(p)
    p.add_argument("--weights")
    return parser


def _noise_spec(args) -> NoiseSpec | None:
    if args.gaussian is not None:
        return NoiseSpec("gaussian", args.gaussian)
    if args.salt_pepper is not None:
        return NoiseSpec("salt_pepper", args.salt_pepper)
    return None


def _read_image(path) -> np.ndarray:
    try:
        return pio.read_pgm(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read image {path}: {exc}") from exc


def _params_2d(image, args) -> Potts2DParams:
    four = args.four_cycle if args.four_cycle is not None else "cuts" in args.model
    card = args.cardinality if args.cardinality is not None else args.model.endswith("+card")
    try:
        base = default_parameters(image, args.sigma1, args.sigma2)
        big_m = args.big_m if args.big_m is not None else base.big_m
        lam = args.lam if args.lam is not None else base.lam
        return Potts2DParams(lam, big_m, args.sigma1, args.sigma2, bool(four), bool(card))
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _variant_name(args, params: Potts2DParams) -> str:
    if args.model == "multicut":
        return "multicut"
    name = "potts2d"
    if params.use_four_cycle:
        name += "+cuts"
    if params.use_cardinality:
        name += "+card"
    return name


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _finite(v: float):
    return v if math.isfinite(v) else None


def _segment_one(path: str, args) -> dict:
    image = _read_image(path)
    spec = _noise_spec(args)
    if spec is not None:
        image = add_noise(image, spec, args.seed)
    params = _params_2d(image, args)
    variant = _variant_name(args, params)
    options = SolveOptions(args.time_limit, args.gap_tol, args.node_limit)
    graph = build_grid_graph(*image.shape)

    if variant == "multicut":
        weights = (pio.read_edge_weights_csv(args.weights, graph.num_edges)
                   if args.weights else contrast_weights(image, graph))
        instance = MulticutInstance(graph, weights, params.lam)
        sol = solve_multicut(instance, options)
        result, labeling, seg = sol.result, sol.labeling, sol.segmentation
        w = np.empty(image.size)
        for k in range(seg.k):
            members = seg.labels.ravel() == k
            w[members] = median_fit(image.ravel()[members])[0]
        w = w.reshape(image.shape)
        recomputed = instance.objective(labeling)
        objective = sol.objective
    else:
        bounds = cardinality_bounds(image, params.sigma2) if params.use_cardinality else None
        fit = solve_potts2d(image, params, bounds, options)
        result, labeling, seg, w = fit.result, fit.labeling, fit.segmentation, fit.w
        recomputed = objective_2d(image, w, labeling, params.lam)
        objective = fit.objective
    if abs(recomputed - objective) > OBJECTIVE_CHECK_TOL * max(1.0, abs(objective)):
        raise CliError(f"objective check failed: solver {objective}, recomputed {recomputed}")

    stem = Path(path).stem
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_pgm(out / f"{stem}.labels.pgm", pio.label_map_image(seg.labels))
    (out / f"{stem}.labels.csv").write_text(pio.labels_csv(seg.labels))
    pio.write_pgm(out / f"{stem}.denoised.pgm", w)

    stats = result.stats if result else None
    report = {
        "schema": SCHEMA,
        "model": variant,
        "input": str(path),
        "status": result.status if result else "optimal",
        "objective": recomputed,
        "lower_bound": _finite(result.bound) if result else recomputed,
        "gap": _finite(result.gap) if result else 0.0,
        "wall_time_s": stats.wall_time if stats else 0.0,
        "segments": int(seg.k),
        "nodes": stats.nodes if stats else 0,
        "lazy_cuts": stats.lazy_cuts if stats else 0,
        "simplex_iterations": stats.simplex_iterations if stats else 0,
        "params": {
            "lambda": params.lam,
            "big_m": params.big_m,
            "sigma1": params.sigma1,
            "sigma2": params.sigma2,
            "time_limit": args.time_limit,
            "gap_tol": args.gap_tol,
            "seed": args.seed,
            "noise": None if spec is None else {"kind": spec.kind, "level": spec.level},
        },
    }
    report_path = Path(args.report) if args.report else out / f"{stem}.report.json"
    report_path.write_text(_dump(report))
    return report


def cmd_segment2d(args) -> int:
    if args.report and len(args.inputs) > 1:
        raise CliError("--report needs a single input; use --out-dir for several")
    if args.jobs > 1 and len(args.inputs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_segment_one, args.inputs, [args] * len(args.inputs)))
    else:
        reports = [_segment_one(p, args) for p in args.inputs]
    for r in reports:
        log.info("%s: %s S=%d objective=%.6g gap=%.3g", r["input"], r["model"], r["segments"],
                 r["objective"], r["gap"] if r["gap"] is not None else math.inf)
        print(f"{r['input']}\t{r['model']}\tS={r['segments']}\tobjective={r['objective']:.6g}\t"
              f"gap={r['gap']}\tstatus={r['status']}")
    return 0


def cmd_noise(args) -> int:
    image = _read_image(args.input)
    try:
        spec = _noise_spec(args)
        noisy = add_noise(image, spec, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    comment = f"noise={spec.kind} level={spec.level!r} seed={args.seed}"
    pio.write_pgm(args.output, noisy, binary=not args.ascii, comments=(comment,))
    return 0


def cmd_segment1d(args) -> int:
    try:
        y = pio.read_signal_csv(args.input)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read signal {args.input}: {exc}") from exc
    big_m = args.big_m if args.big_m is not None else exact_big_m_1d(y)
    try:
        params = Potts1DParams(args.lam, big_m)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if args.model == "potts1d-dp":
        fit = solve_potts1d_dp(y, params.lam)
    else:
        fit = solve_potts1d_mip(y, params, SolveOptions(args.time_limit, args.gap_tol, args.node_limit))
    recomputed = objective_1d(y, fit.w, fit.x.values, params.lam)
    if abs(recomputed - fit.objective) > OBJECTIVE_CHECK_TOL * max(1.0, abs(fit.objective)):
        raise CliError(f"objective check failed: solver {fit.objective}, recomputed {recomputed}")
    labels = connected_components(fit.x.graph, fit.x).labels.ravel()
    if args.out:
        Path(args.out).write_text(pio.fit1d_csv(y, fit.w, labels))
    res = fit.result
    report = {
        "schema": SCHEMA,
        "model": args.model,
        "input": str(args.input),
        "status": res.status if res else "optimal",
        "objective": recomputed,
        "lower_bound": _finite(res.bound) if res else recomputed,
        "gap": _finite(res.gap) if res else 0.0,
        "wall_time_s": res.stats.wall_time if res else 0.0,
        "segments": len(fit.segments),
        "nodes": res.stats.nodes if res else 0,
        "lazy_cuts": res.stats.lazy_cuts if res else 0,
        "simplex_iterations": res.stats.simplex_iterations if res else 0,
        "params": {
            "lambda": params.lam,
            "big_m": params.big_m,
            "sigma1": None,
            "sigma2": None,
            "time_limit": args.time_limit,
            "gap_tol": args.gap_tol,
            "seed": None,
            "noise": None,
        },
    }
    if args.report:
        Path(args.report).write_text(_dump(report))
    print(f"{args.input}\t{args.model}\tS={report['segments']}\tobjective={recomputed:.6g}")
    return 0


def cmd_export_lp(args) -> int:
    if args.model == "potts1d":
        try:
            y = pio.read_signal_csv(args.input)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read signal {args.input}: {exc}") from exc
        lam = args.lam if args.lam is not None else 0.0
        big_m = args.big_m if args.big_m is not None else exact_big_m_1d(y)
        try:
            model = build_potts1d_model(y, Potts1DParams(lam, big_m))
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    else:
        image = _read_image(args.input)
        params = _params_2d(image, args)
        graph = build_grid_graph(*image.shape)
        if args.model == "multicut":
            weights = (pio.read_edge_weights_csv(args.weights, graph.num_edges)
                       if args.weights else contrast_weights(image, graph))
            model = build_multicut_model(MulticutInstance(graph, weights, params.lam))
        else:
            bounds = cardinality_bounds(image, params.sigma2) if params.use_cardinality else None
            try:
                model = build_potts2d_model(image, params, bounds)
            except ValueError as exc:
                raise CliError(str(exc)) from exc
    Path(args.output).write_text(write_lp_file(model))
    return 0


COMMANDS = {
    "noise": cmd_noise,
    "segment2d": cmd_segment2d,
    "segment1d": cmd_segment1d,
    "export-lp": cmd_export_lp,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, RuntimeError) as exc:
        print(f"pottsilp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
