"""``morphgen`` command line.

Exit codes: 0 success, 1 invalid input, 2 dataset finished with failed
samples, 3 any other error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, gpr, pipeline, projector, sampler
from .errors import MorphgenError
from .interp import interpolate
from .mesh_io import bounding_box, load_stl, save_stl, watertight_check
from .reconstruct import BINARY_BAND, SMOOTH_SDF, ReconstructionConfig, reconstruct
from .sdf import DEFAULT_DILATION_ITERS, fill_holes, load_field, save_field, signed_distance
from .voxelizer import load_grid, make_grid, save_grid, voxelize

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3

log = logging.getLogger("morphgen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which here means "partial failure"
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _resolution(values):
    if len(values) == 1:
        return (values[0],) * 3
    if len(values) == 3:
        return tuple(values)
    raise UsageError("--resolution takes 1 or 3 integers")


def _grid_for(mesh, args, isotropic):
    res = _resolution(args.resolution)
    if isotropic:
        return pipeline.shared_grid([mesh], res, args.padding)
    box = bounding_box(mesh)
    padding = pipeline.auto_padding(box, res) if args.padding is None else args.padding
    return make_grid(box, res, padding)


def _emit(obj):
    print(json.dumps(obj, indent=2, default=float))


# -- subcommands -------------------------------------------------------------


def cmd_voxelize(args):
    mesh = load_stl(args.mesh)
    grid = voxelize(mesh, _grid_for(mesh, args, args.isotropic))
    save_grid(grid, args.output)
    _emit({"output": args.output, "dims": grid.spec.dims, "occupied": grid.count})


def cmd_sdf(args):
    src = Path(args.input)
    if src.suffix.lower() == ".mgvx":
        grid = load_grid(src)
    else:
        mesh = load_stl(src)
        spec = _spec_of(args.like) if args.like else _grid_for(mesh, args, True)
        grid = voxelize(mesh, spec)
    field = signed_distance(fill_holes(grid, args.dilation_iters))
    save_field(field, args.output)
    v = field.values
    _emit({"output": args.output, "dims": field.spec.dims, "min": v.min(), "max": v.max()})


def _spec_of(path):
    if Path(path).suffix.lower() == ".mgvx":
        return load_grid(path).spec
    return load_field(path).spec


def cmd_interp(args):
    fields = [load_field(p) for p in args.fields]
    out = interpolate(fields, args.weights)
    save_field(out, args.output)
    _emit({"output": args.output, "weights": args.weights})


def _recon_config(args, base=None):
    base = base or ReconstructionConfig()
    changes = {
        "epsilon": args.epsilon,
        "iso_mode": args.iso_mode,
        "smoothing_lambda": args.smoothing_lambda,
        "smoothing_iters": args.smoothing_iters,
    }
    return replace(base, **{k: v for k, v in changes.items() if v is not None})


def cmd_reconstruct(args):
    mesh = reconstruct(load_field(args.field), _recon_config(args))
    save_stl(mesh, args.output)
    _emit({"output": args.output, "triangles": mesh.n_triangles, **watertight_check(mesh).as_dict()})


def cmd_project(args):
    mesh = load_stl(args.mesh)
    views = args.views or list(projector.DEFAULT_VIEWS)
    if len(views) == 1:
        image = projector.depth_map(mesh, views[0], args.width, args.height)
    else:
        image = projector.stack_views(mesh, views, args.width, args.height)
    meta = projector.save_png(image, args.output)
    _emit({"output": args.output, "metadata": meta, "views": views})


def cmd_sample_plan(args):
    if args.count is not None:
        plan = sampler.random_plan(args.bases, args.count, args.seed)
    else:
        plan = sampler.simplex_grid(args.bases, args.samples_per_dim)
    plans = {"plan": plan}
    if args.split == "incircle":
        train, test = sampler.incircle_split(plan)
        plans = {"train": train, "test": test}
    for name, p in plans.items():
        target = args.output if len(plans) == 1 else _suffixed(args.output, name)
        if target is None:
            print(p.to_json(indent=2))
        else:
            Path(target).write_text(p.to_json(indent=2) + "\n")
            log.info("%s: %d points -> %s", name, len(p), target)
    if args.output is not None:
        _emit({name: len(p) for name, p in plans.items()})


def _suffixed(path, name):
    if path is None:
        return None
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{name}{p.suffix}"))


def _dataset_config(args):
    cfg = pipeline.PipelineConfig.load(args.config) if args.config else None
    if cfg is None and not args.basis:
        raise UsageError("dataset needs --config or --basis")
    if cfg is None:
        cfg = pipeline.PipelineConfig(args.basis)
    sampling = cfg.sampling
    if args.samples_per_dim is not None:
        sampling = replace(sampling, scheme=sampler.LATTICE, samples_per_dim=args.samples_per_dim)
    if args.count is not None:
        sampling = replace(sampling, scheme=sampler.RANDOM, count=args.count)
    if args.seed is not None:
        sampling = replace(sampling, seed=args.seed)
    image = cfg.image
    if args.views:
        image = replace(image, views=tuple(args.views))
    if args.width or args.height:
        image = replace(image, width=args.width or image.width, height=args.height or image.height)
    return pipeline.override(
        cfg,
        basis_paths=tuple(args.basis) if args.basis else None,
        resolution=_resolution(args.resolution) if args.resolution else None,
        padding=args.padding,
        dilation_iters=args.dilation_iters,
        reconstruction=_recon_config(args, cfg.reconstruction),
        sampling=sampling,
        image=image,
        output_dir=args.output_dir,
        threads=args.threads,
        cache_dir=args.cache_dir,
    )


def cmd_dataset(args):
    cfg = _dataset_config(args)
    manifest = pipeline.run_dataset(cfg)
    _emit({"manifest": str(manifest.path), "count": manifest.count, "failed": manifest.n_failed})
    return EXIT_PARTIAL if manifest.n_failed else EXIT_OK


def _gpr_data(path, need_values):
    pts, values = gpr.read_xy_csv(path)
    if need_values and values is None:
        raise UsageError(f"{path}: training data needs a 'value' column")
    return pts, values


def cmd_gpr_fit(args):
    x, y = _gpr_data(args.data, True)
    model = gpr.GaussianProcessSurrogate(
        length_scale=args.length_scale,
        signal_variance=args.signal_variance,
        alpha=args.alpha,
        n_restarts=args.restarts,
        random_state=args.seed,
        optimize=not args.no_optimize,
    ).fit(x, y)
    model.save(args.output)
    h = model.hyper_
    _emit({
        "output": args.output,
        "length_scale": h.length_scale,
        "signal_variance": h.signal_variance,
        "log_marginal_likelihood": model.log_marginal_likelihood_value_,
    })


def cmd_gpr_predict(args):
    model = gpr.GaussianProcessSurrogate.load(args.model)
    x, y = _gpr_data(args.points, False)
    mean, std = model.predict(x, return_std=True)
    if args.output:
        gpr.write_predictions_csv(args.output, x, mean, std)
    summary = {"output": args.output, "count": len(x)}
    if y is not None:
        summary["r2"] = gpr.r2_score(y, mean)
    _emit(summary)


def cmd_inspect(args):
    _emit(pipeline.inspect(args.manifest, check_watertight=args.watertight))


# -- parser ------------------------------------------------------------------


def _grid_args(p, isotropic_flag=True):
    p.add_argument("--resolution", type=int, nargs="+", default=[64], metavar="N",
                   help="cells per axis: one value or three (default 64)")
    p.add_argument("--padding", type=float,
                   help="world-unit margin around the mesh (default: 3 voxel pitches)")
    if isotropic_flag:
        p.add_argument("--isotropic", action="store_true", help="use one cubic pitch")


def _recon_args(p):
    p.add_argument("--iso-mode", choices=(SMOOTH_SDF, BINARY_BAND))
    p.add_argument("--epsilon", type=float, help="band half-width for binary-band mode")
    p.add_argument("--smoothing-lambda", type=float)
    p.add_argument("--smoothing-iters", type=int)


def build_parser():
    parser = _Parser(prog="morphgen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"morphgen {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("voxelize", help="STL -> surface occupancy grid (.mgvx)")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True)
    _grid_args(p)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("sdf", help="STL or .mgvx -> filled signed distance field (.mgsf)")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    _grid_args(p, isotropic_flag=False)
    p.add_argument("--dilation-iters", type=int, default=DEFAULT_DILATION_ITERS)
    p.add_argument("--like", metavar="FILE", help="reuse the grid of an existing .mgsf/.mgvx")
    p.set_defaults(func=cmd_sdf)

    p = sub.add_parser("interp", help="barycentric blend of .mgsf fields")
    p.add_argument("fields", nargs="+")
    p.add_argument("-w", "--weights", type=float, nargs="+", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("reconstruct", help=".mgsf -> smoothed watertight STL")
    p.add_argument("field")
    p.add_argument("-o", "--output", required=True)
    _recon_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("project", help="STL -> depth PNG (1 view gray, 3 views RGB)")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--views", nargs="+", choices=sorted(projector.VIEWS))
    p.add_argument("--width", type=int, default=projector.DEFAULT_SIZE)
    p.add_argument("--height", type=int, default=projector.DEFAULT_SIZE)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sample-plan", help="design points on the simplex (JSON)")
    p.add_argument("--bases", type=int, default=3)
    p.add_argument("--samples-per-dim", type=int, default=50)
    p.add_argument("--count", type=int, help="draw this many random points instead of a lattice")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("incircle",))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample_plan)

    p = sub.add_parser("dataset", help="full dataset run (flags override --config)")
    p.add_argument("--config", help="JSON PipelineConfig")
    p.add_argument("--basis", nargs="+", help="basis STL paths")
    p.add_argument("--resolution", type=int, nargs="+")
    p.add_argument("--padding", type=float)
    p.add_argument("--dilation-iters", type=int)
    _recon_args(p)
    p.add_argument("--samples-per-dim", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--views", nargs=3, choices=sorted(projector.VIEWS))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--cache-dir")
    p.add_argument("--threads", type=int, help=f"worker count (fallback: ${pipeline.THREADS_ENV})")
    p.set_defaults(func=cmd_dataset)

    g = sub.add_parser("gpr", help="Gaussian-process surrogate on map coordinates")
    gsub = g.add_subparsers(dest="gpr_command", required=True, parser_class=_Parser)
    p = gsub.add_parser("fit", help="fit on a CSV with columns x,y,value")
    p.add_argument("data")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--length-scale", type=float, default=1.2)
    p.add_argument("--signal-variance", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-optimize", action="store_true")
    p.set_defaults(func=cmd_gpr_fit)
    p = gsub.add_parser("predict", help="mean, std and 95%% interval at CSV points x,y")
    p.add_argument("model")
    p.add_argument("points")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gpr_predict)

    p = sub.add_parser("inspect", help="verify a dataset manifest and summarize it")
    p.add_argument("manifest")
    p.add_argument("--watertight", action="store_true", help="re-check every mesh")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        code = args.func(args)
    except (UsageError, MorphgenError, ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("fatal", exc_info=True)
        print(f"fatal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
