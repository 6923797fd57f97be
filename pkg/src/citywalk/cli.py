"""Command line front for the pipeline.

synth-city      write a synthetic scene, street trajectories, and reference masks
align           fit alignment parameters for one trajectory against its masks
eval-alignment  held-out misalignment rates for two parameter sets
run-bench       the full multi-street recovery benchmark
serve           session service for the browser walkthrough
"""
from __future__ import annotations

import argparse
import os
import sys

from .alignment import (
    AlignmentObjective,
    apply_transform,
    build_transform,
    canonical_params,
    evaluate_alignment,
    initial_params,
    optimize,
    params_from_json,
    params_to_json,
    read_local_trajectory,
    sample_frames,
    write_local_trajectory,
)
from .benchmark import (
    BenchConfig,
    format_summary,
    run_benchmark,
    write_bench_json,
    write_histogram_csv,
)
from .citymodel import scene_from_json, scene_to_json, scene_to_mesh, terrain_elevation
from .panorama import load_mask_set, save_mask_set
from .raycast import build_ray_index, set_threads
from .synthcity import (
    SynthSpec,
    generate_city,
    generate_street,
    perturb_params,
    render_reference_masks,
    street_count,
)


def _load_scene(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_json(f.read())


def _build_index(scene):
    return build_ray_index(scene_to_mesh(scene), scene)


def cmd_synth_city(args: argparse.Namespace) -> int:
    spec = SynthSpec(seed=args.seed)
    scene = generate_city(spec)
    index = _build_index(scene)
    os.makedirs(args.out, exist_ok=True)
    tdir = os.path.join(args.out, "trajectories")
    mdir = os.path.join(args.out, "masks")
    os.makedirs(tdir, exist_ok=True)
    os.makedirs(mdir, exist_ok=True)
    with open(os.path.join(args.out, "scene.json"), "w", encoding="utf-8") as f:
        f.write(scene_to_json(scene))
    n = args.streets if args.streets is not None else street_count(spec)
    w, h = args.mask_res
    for k in range(n):
        truth = generate_street(scene, spec, k, args.seed * 1000 + k)
        refs = render_reference_masks(
            index, truth.global_traj, args.occluders, args.seed * 1000 + k + 500, w, h
        )
        base = os.path.join(tdir, truth.street_id)
        with open(base + ".traj.txt", "w", encoding="utf-8") as f:
            f.write(write_local_trajectory(truth.local))
        with open(base + ".params.json", "w", encoding="utf-8") as f:
            f.write(params_to_json(truth.gt_params))
        save_mask_set(mdir, truth.street_id, refs, ext="pgm")
        print(f"{truth.street_id}: {len(truth.local.frames)} frames, {len(refs)} masks")
    print(f"wrote {args.out}")
    return 0


def _read_traj(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return read_local_trajectory(f.read())


def _read_params(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return params_from_json(f.read())


def cmd_align(args: argparse.Namespace) -> int:
    scene = _load_scene(args.scene)
    index = _build_index(scene)
    traj = _read_traj(args.trajectory)
    refs = load_mask_set(args.masks, traj.street_id, ext="pgm")
    if args.init:
        init = _read_params(args.init)
    else:
        init = initial_params(
            traj, scene.origin,
            terrain_z=lambda x, y: terrain_elevation(scene.terrain, x, y),
        )
    frames = sorted(refs.keys())
    sampled = sample_frames(len(frames), args.samples)
    sampled = [frames[i] for i in sampled]
    objective = AlignmentObjective(index, traj, refs, sampled)
    fitted, trace = optimize(
        objective, init, iterations=args.iters, seed=args.seed
    )
    fitted = canonical_params(traj, fitted)
    report = evaluate_alignment(
        index, traj, init, fitted, refs, sampled, holdout_stride=args.holdout_stride,
        trace=trace,
    )
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(params_to_json(fitted))
    print(f"{traj.street_id}: objective {trace[0]:.0f} -> {trace[-1]:.0f} "
          f"in {len(trace)} iterations ({objective.calls} evaluations)")
    print(f"held-out misalignment: {report.rate_pre:.4f} -> {report.rate_post:.4f}")
    print(f"wrote {args.out}")
    return 0


def cmd_eval_alignment(args: argparse.Namespace) -> int:
    scene = _load_scene(args.scene)
    index = _build_index(scene)
    traj = _read_traj(args.trajectory)
    refs = load_mask_set(args.masks, traj.street_id, ext="pgm")
    init = _read_params(args.init)
    fitted = _read_params(args.fitted)
    frames = sorted(refs.keys())
    sampled = sample_frames(len(frames), args.samples)
    sampled = [frames[i] for i in sampled]
    report = evaluate_alignment(
        index, traj, init, fitted, refs, sampled, holdout_stride=args.holdout_stride
    )
    reduction = 0.0
    if report.rate_pre > 0:
        reduction = 1.0 - report.rate_post / report.rate_pre
    print(f"{traj.street_id}: pre {report.rate_pre:.4f} post {report.rate_post:.4f} "
          f"relative reduction {100 * reduction:.1f}%")
    return 0


def cmd_run_bench(args: argparse.Namespace) -> int:
    w, h = args.mask_res
    spec = SynthSpec(seed=args.seed)
    config = BenchConfig(
        streets=args.streets,
        width=w,
        height=h,
        occluder_fraction=args.occluders,
        endpoint_sigma_m=args.sigma_m,
        lambda_sigma_deg=args.sigma_deg,
        sample_count=args.samples,
        iterations=args.iters,
        holdout_stride=args.holdout_stride,
        seed=args.seed,
    )
    result = run_benchmark(spec, config, progress=print)
    print(format_summary(result))
    if args.out:
        write_bench_json(result, args.out)
        print(f"wrote {args.out}")
    if args.hist:
        write_histogram_csv(result, args.hist)
        print(f"wrote {args.hist}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import WalkEngine
    from .webapp import make_app

    scene = _load_scene(args.scene)
    trajectories = []
    for name in sorted(os.listdir(args.trajectories)):
        if not name.endswith(".traj.txt"):
            continue
        base = os.path.join(args.trajectories, name[: -len(".traj.txt")])
        traj = _read_traj(base + ".traj.txt")
        params = _read_params(base + ".params.json")
        trajectories.append(apply_transform(traj, build_transform(traj, params)))
    w, h = args.mask_res
    engine = WalkEngine(scene, trajectories, width=w, height=h, pano_ext=args.ext)
    app = make_app(engine, args.assets, static_dir=args.static)
    print(f"serving {len(trajectories)} streets on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _add_common(p: argparse.ArgumentParser, *, iters: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0)
    if iters:
        p.add_argument("--iters", type=int, default=700)
        p.add_argument("--samples", type=int, default=30,
                       help="frames sampled into the objective")
        p.add_argument("--holdout-stride", type=int, default=5)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="citywalk", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for the render kernels")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-city", help="generate scene, trajectories, and masks")
    p.add_argument("--out", required=True)
    p.add_argument("--streets", type=int, default=None, help="default: all")
    p.add_argument("--occluders", type=float, default=0.1)
    p.add_argument("--mask-res", type=int, nargs=2, default=[512, 256], metavar=("W", "H"))
    _add_common(p)
    p.set_defaults(func=cmd_synth_city)

    p = sub.add_parser("align", help="fit alignment parameters for one street")
    p.add_argument("--scene", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--init", default=None,
                   help="initial parameters JSON; default: the trajectory's annotations")
    p.add_argument("--out", required=True)
    _add_common(p, iters=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval-alignment", help="held-out rates for two parameter sets")
    p.add_argument("--scene", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--fitted", required=True)
    _add_common(p, iters=True)
    p.set_defaults(func=cmd_eval_alignment)

    p = sub.add_parser("run-bench", help="multi-street recovery benchmark")
    p.add_argument("--streets", type=int, default=8)
    p.add_argument("--occluders", type=float, default=0.1)
    p.add_argument("--sigma-m", type=float, default=5.0)
    p.add_argument("--sigma-deg", type=float, default=5.0)
    p.add_argument("--mask-res", type=int, nargs=2, default=[512, 256], metavar=("W", "H"))
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--hist", default=None, help="pre/post rate histogram CSV path")
    _add_common(p, iters=True)
    p.set_defaults(func=cmd_run_bench)

    p = sub.add_parser("serve", help="run the walkthrough service")
    p.add_argument("--scene", required=True)
    p.add_argument("--trajectories", required=True,
                   help="directory of <street>.traj.txt + <street>.params.json")
    p.add_argument("--assets", required=True, help="panorama asset root")
    p.add_argument("--static", default=None, help="built viewer directory to mount at /")
    p.add_argument("--ext", default="pgm")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--mask-res", type=int, nargs=2, default=[512, 256], metavar=("W", "H"))
    p.set_defaults(func=cmd_serve)

    args = ap.parse_args(argv)
    if args.threads:
        set_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
