"""Command-line entry point: ``bzstreets <subcommand> [options]``.

Exit codes: 0 success, 1 usage, 2 configuration or input data, 3 runtime.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, metrics, plots, render
from .config import RunConfig, from_ini, load_config, parse_sites, to_ini
from .errors import (BZError, ConfigError, ContractViolation, DomainError,
                     InputFormatError, MaskFormatError)
from .masks import GridCitySpec, gen_channel, gen_grid_city, gen_open_field, gen_ring, load_mask, save_mask, validate_mask
from .runner import simulate
from .sweep import classify_phases, phase_kv, phase_report, read_sweep_csv, run_sweep, write_sweep_csv

log = logging.getLogger("bzstreets")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="INI run configuration")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--seed", type=int, default=d)
    parser.add_argument("--threads", type=int, default=d,
                        help="row-band workers for run, concurrent phis for sweep")
    parser.add_argument("--quiet", action="store_true", default=d if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    p = _Parser(prog="bzstreets", description="Excitation waves on street networks.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", parents=[common], help="single simulation")
    _sim_flags(r)
    r.add_argument("--frames", action="store_true", help="write video frames")

    s = sub.add_parser("sweep", parents=[common], help="coverage over a phi grid")
    _sim_flags(s)
    s.add_argument("--phis", help="comma-separated phi values (overrides the grid)")
    s.add_argument("--phi-start", type=float)
    s.add_argument("--phi-stop", type=float)
    s.add_argument("--phi-step", type=float)

    a = sub.add_parser("analyze", parents=[common], help="Q-Q and clustering")
    a.add_argument("--coverage", help="sweep CSV (phi,coverage,outcome,steps)")
    a.add_argument("--maps", nargs="*", default=[], help="frequency-map grid files")
    a.add_argument("--methods", default="qq,dissimilarity,hier,fcm,pso")
    a.add_argument("--k", type=int, help="clusters for FCM and PSO")
    a.add_argument("--hier-k", type=int)
    a.add_argument("--linkage", choices=analysis.LINKAGES)
    a.add_argument("--fuzzifier", type=float)
    a.add_argument("--pso-iter", type=int)
    a.add_argument("--particles", type=int)

    rd = sub.add_parser("render", parents=[common], help="images and figures from outputs")
    rd.add_argument("--freq", nargs="*", default=[], help="frequency-map grid files")
    rd.add_argument("--frames-dir", help="directory of frame images to overlay")
    rd.add_argument("--activity", nargs="*", default=[], help="activity CSV files")
    rd.add_argument("--sweep", help="sweep CSV to plot with its phases")

    g = sub.add_parser("gen-mask", parents=[common], help="write a synthetic mask")
    g.add_argument("kind", choices=("grid-city", "open-field", "channel", "ring"))
    g.add_argument("--rows", type=int, default=4)
    g.add_argument("--cols", type=int, default=4)
    g.add_argument("--main-width", type=int, default=9)
    g.add_argument("--side-width", type=int, default=3)
    g.add_argument("--block", type=int, default=48)
    g.add_argument("--width", type=int, default=256)
    g.add_argument("--height", type=int, default=256)
    g.add_argument("--channel-width", type=int, default=9)
    g.add_argument("--size", type=int, default=120)
    g.add_argument("--street-width", type=int, default=9)
    g.add_argument("--name", default="mask.pgm")

    v = sub.add_parser("validate-mask", parents=[common], help="connectivity report")
    v.add_argument("image")
    v.add_argument("--threshold", type=float, default=0.5)
    v.add_argument("--dark-streets", action="store_true")
    return p


def _sim_flags(parser):
    parser.add_argument("--mask", help="mask image (overrides [mask])")
    parser.add_argument("--phi", type=float)
    parser.add_argument("--max-steps", type=int)
    parser.add_argument("--sites", help="perturbations 'row,col[,side[,u]]; ...'")


# -- helpers ---------------------------------------------------------------


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else from_ini("")
    if getattr(args, "mask", None):
        cfg = cfg.replace("mask", kind="file", path=args.mask)
    if getattr(args, "phi", None) is not None:
        cfg = cfg.replace("params", phi=args.phi)
    if getattr(args, "max_steps", None) is not None:
        cfg = cfg.replace("schedule", max_steps=args.max_steps)
    if getattr(args, "sites", None):
        cfg = dataclasses.replace(cfg, perturbations=parse_sites(args.sites))
    if args.out:
        cfg = cfg.replace("output", dir=args.out)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    cfg.validate()
    return cfg


def _outdir(cfg_or_path) -> Path:
    out = Path(cfg_or_path.output.dir if isinstance(cfg_or_path, RunConfig) else cfg_or_path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, seed, files, extra=None):
    items = {"seed": seed, **(extra or {}), "files": " ".join(sorted(files))}
    metrics.write_kv(out / "manifest.txt", items)


# -- subcommands -----------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _load(args)
    threads = args.threads or cfg.schedule.workers
    cfg = cfg.replace("schedule", workers=threads)
    if args.frames:
        cfg = cfg.replace("output", frames=True)
    out = _outdir(cfg)
    mask = cfg.mask.build()
    sites = cfg.resolve_perturbations(mask)

    observers = []
    snaps = frames = None
    if cfg.output.snapshots:
        snaps = render.SnapshotRecorder(cfg.render)
        observers.append(snaps)
    if cfg.output.frames:
        frames = render.FrameWriter(out / "frames", cfg.render)
        observers.append(frames)

    rec = simulate(mask, cfg.params, sites, cfg.schedule, observers,
                   excite_threshold=cfg.metrics.excite_threshold,
                   count_stride=cfg.metrics.count_stride)
    files = _write_run_outputs(out, cfg, rec, snaps, frames)
    (out / "config.ini").write_text(to_ini(cfg))
    files.append("config.ini")
    _write_manifest(out, cfg.seed, files, {"mask_id": mask.fingerprint})
    log.info("%s: coverage %.4f, %s after %d steps", out, rec.coverage, rec.outcome, rec.steps_executed)
    return EXIT_OK


def _write_run_outputs(out, cfg, rec, snaps, frames):
    summary = {"phi": repr(cfg.params.phi), "mask_id": rec.tracker.mask.fingerprint,
               **rec.summary(), "seed": cfg.seed}
    metrics.write_kv(out / "summary.txt", summary)
    metrics.write_activity_csv(out / "activity.csv", rec.activity_series, rec.tracker.stride)
    freq = rec.frequency_map()
    metrics.write_grid(out / "frequency.grid", freq)
    render.write_image(out / "frequency.pgm", render.render_frequency(freq))
    files = ["summary.txt", "activity.csv", "frequency.grid", "frequency.pgm"]
    if snaps is not None and snaps.composite is not None:
        render.write_image(out / "timelapse.png", snaps.composite)
        files.append("timelapse.png")
    if frames is not None:
        frames.write_manifest({"seed": cfg.seed})
        files.append("frames/manifest.txt")
    if cfg.output.figures:
        plots.plot_activity(out / "activity.png", {f"phi={cfg.params.phi}": rec.activity_series},
                            rec.tracker.stride)
        files.append("activity.png")
    return files


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.phis:
        try:
            phis = [float(x) for x in args.phis.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--phis: cannot parse {args.phis!r}") from None
    else:
        sw = cfg.sweep
        cfg = cfg.replace("sweep", phi_start=args.phi_start if args.phi_start is not None else sw.phi_start,
                          phi_stop=args.phi_stop if args.phi_stop is not None else sw.phi_stop,
                          phi_step=args.phi_step if args.phi_step is not None else sw.phi_step)
        phis = cfg.sweep.grid()
    threads = args.threads or cfg.sweep.threads
    out = _outdir(cfg)
    mask = cfg.mask.build()
    sites = cfg.resolve_perturbations(mask)
    curve = run_sweep(mask, phis, cfg.params, list(sites), cfg.schedule, threads=threads,
                      keep_records=True, excite_threshold=cfg.metrics.excite_threshold,
                      count_stride=cfg.metrics.count_stride)
    write_sweep_csv(out / "sweep.csv", curve)
    files = ["sweep.csv"]
    maps_dir = out / "maps"
    maps_dir.mkdir(exist_ok=True)
    for phi, rec in curve.records.items():
        name = f"maps/phi_{phi:.4f}.grid"
        metrics.write_grid(out / name, rec.frequency_map())
        files.append(name)
    seg = None
    if len(curve.samples) >= 4:
        seg = classify_phases(curve)
        (out / "phases.txt").write_text(phase_report(seg))
        metrics.write_kv(out / "phases.kv", phase_kv(seg))
        files += ["phases.txt", "phases.kv"]
    if curve.failures:
        with open(out / "errors.txt", "w") as fh:
            for phi, err in curve.failures:
                fh.write(f"{phi!r}: {err}\n")
        files.append("errors.txt")
    if cfg.output.figures and curve.samples:
        plots.plot_coverage_curve(out / "coverage.png", curve.phis, curve.coverages, seg)
        plots.plot_activity(out / "activity.png",
                            {f"{phi:.3f}": r.activity_series for phi, r in curve.records.items()},
                            cfg.metrics.count_stride)
        files += ["coverage.png", "activity.png"]
    (out / "config.ini").write_text(to_ini(cfg))
    files.append("config.ini")
    _write_manifest(out, cfg.seed, files, {"mask_id": mask.fingerprint, "phis": len(phis),
                                           "failures": len(curve.failures)})
    if curve.failures:
        for phi, err in curve.failures:
            print(f"bzstreets: sweep failed at phi={phi}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config) if args.config else from_ini("")
    seed = args.seed if args.seed is not None else cfg.seed
    an = cfg.analysis
    k = args.k if args.k is not None else an.k
    hier_k = args.hier_k if args.hier_k is not None else an.hier_k
    linkage = args.linkage or an.linkage
    fuzz = args.fuzzifier if args.fuzzifier is not None else an.fuzzifier
    pso_iter = args.pso_iter if args.pso_iter is not None else an.pso_max_iter
    particles = args.particles if args.particles is not None else an.particles
    methods = {m.strip() for m in args.methods.split(",") if m.strip()}
    unknown = methods - {"qq", "dissimilarity", "hier", "fcm", "pso"}
    if unknown:
        raise UsageError(f"unknown methods: {', '.join(sorted(unknown))}")
    out = _outdir(args.out or cfg.output.dir)
    files = []

    cov_labels, cov_values = [], None
    if args.coverage:
        samples = read_sweep_csv(args.coverage)
        cov_labels = [f"{s.phi:.3f}" for s in samples]
        cov_values = np.array([s.coverage for s in samples])
    maps = [metrics.read_grid(p) for p in args.maps]
    map_labels = [Path(p).stem.removeprefix("phi_") for p in args.maps]
    if maps and any(m.shape != maps[0].shape for m in maps):
        raise ContractViolation("frequency maps differ in shape")

    if "qq" in methods and cov_values is not None:
        qq = analysis.qq_points(cov_values)
        analysis.write_qq_csv(out / "qq.csv", qq)
        files.append("qq.csv")
        if cfg.output.figures:
            plots.plot_qq(out / "qq.png", qq)
            files.append("qq.png")

    dis = None
    if maps and ({"dissimilarity", "hier"} & methods):
        dis = analysis.dissimilarity_matrix(maps)
        if "dissimilarity" in methods:
            analysis.write_matrix_csv(out / "dissimilarity.csv", dis, map_labels)
            files.append("dissimilarity.csv")
            if cfg.output.figures:
                plots.plot_matrix(out / "dissimilarity.png", dis, map_labels)
                files.append("dissimilarity.png")

    if "hier" in methods and (cov_values is not None or dis is not None):
        if cov_values is not None:
            pts = cov_values[:, None]
            mat = np.abs(pts - pts.T)
            labels = cov_labels
        else:
            mat, labels = dis, map_labels
        dendro = analysis.hier_cluster(mat, linkage, labels)
        (out / "dendrogram.txt").write_text(dendro.to_text())
        analysis.write_merges_csv(out / "merges.csv", dendro)
        files += ["dendrogram.txt", "merges.csv"]
        if 1 <= hier_k <= len(labels):
            flat = analysis.cut(dendro, hier_k)
            with open(out / "hier_labels.csv", "w", newline="\n") as fh:
                fh.write("item,cluster\n")
                for lab, c in zip(labels, flat):
                    fh.write(f"{lab},{c}\n")
            files.append("hier_labels.csv")
        if cfg.output.figures:
            plots.plot_dendrogram(out / "dendrogram.png", dendro)
            files.append("dendrogram.png")

    points = np.stack([m.ravel() for m in maps]) if maps else (
        cov_values[:, None] if cov_values is not None else None)
    point_labels = map_labels if maps else cov_labels
    if "fcm" in methods and points is not None:
        fc = analysis.fcm(points, k, m=fuzz, tol=an.fcm_tol, max_iter=an.fcm_max_iter, seed=seed)
        analysis.write_memberships_csv(out / "fcm_memberships.csv", fc, point_labels)
        files.append("fcm_memberships.csv")
        if cfg.output.figures:
            xs = _numeric_or_index(point_labels)
            plots.plot_memberships(out / "fcm_memberships.png", xs, fc.memberships)
            files.append("fcm_memberships.png")

    if "pso" in methods and points is not None:
        ps = analysis.pso_cluster(points, k, particles=particles, inertia=an.inertia,
                                  c1=an.c1, c2=an.c2, max_iter=pso_iter, seed=seed)
        analysis.write_cost_csv(out / "pso_cost.csv", ps.cost_history)
        files.append("pso_cost.csv")
        if cfg.output.figures:
            plots.plot_cost(out / "pso_cost.png", ps.cost_history)
            files.append("pso_cost.png")

    if not files:
        raise UsageError("nothing to analyze: pass --coverage and/or --maps")
    _write_manifest(out, seed, files, {"k": k, "linkage": linkage})
    return EXIT_OK


def _numeric_or_index(labels):
    try:
        return [float(x) for x in labels]
    except ValueError:
        return list(range(len(labels)))


def cmd_render(args) -> int:
    cfg = load_config(args.config) if args.config else from_ini("")
    out = _outdir(args.out or cfg.output.dir)
    files = []
    for p in args.freq:
        img = render.render_frequency(metrics.read_grid(p))
        name = Path(p).stem + ".png"
        render.write_image(out / name, img)
        files.append(name)
    if args.frames_dir:
        frame_paths = sorted(Path(args.frames_dir).glob("frame_*.*"))
        if not frame_paths:
            raise ConfigError(f"no frame_* images in {args.frames_dir}")
        try:
            imgs = [render.read_image(p) for p in frame_paths]
        except OSError as exc:
            raise InputFormatError(args.frames_dir, 0, f"unreadable frame: {exc}") from None
        render.write_image(out / "timelapse.png", render.render_timelapse(imgs))
        files.append("timelapse.png")
    if args.activity:
        series = {}
        for p in args.activity:
            steps, counts = metrics.read_activity_csv(p)
            series[Path(p).parent.name or Path(p).stem] = counts
        plots.plot_activity(out / "activity.png", series)
        files.append("activity.png")
    if args.sweep:
        samples = read_sweep_csv(args.sweep)
        pts = np.array([(s.phi, s.coverage) for s in samples])
        seg = classify_phases(pts) if len(pts) >= 4 else None
        plots.plot_coverage_curve(out / "coverage.png", pts[:, 0], pts[:, 1], seg)
        files.append("coverage.png")
    if not files:
        raise UsageError("nothing to render")
    _write_manifest(out, cfg.seed if args.seed is None else args.seed, files)
    return EXIT_OK


def cmd_gen_mask(args) -> int:
    if args.kind == "grid-city":
        mask = gen_grid_city(GridCitySpec(args.rows, args.cols, args.main_width,
                                          args.side_width, args.block))
    elif args.kind == "open-field":
        mask = gen_open_field(args.width, args.height)
    elif args.kind == "channel":
        mask = gen_channel(args.width, args.height, args.channel_width)
    else:
        mask = gen_ring(args.size, args.street_width)
    out = _outdir(args.out or ".")
    save_mask(mask, out / args.name)
    report = validate_mask(mask)
    (out / (Path(args.name).stem + "_report.txt")).write_text(report.to_text())
    if not args.quiet:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_validate_mask(args) -> int:
    mask = load_mask(args.image, args.threshold, not args.dark_streets)
    report = validate_mask(mask)
    if args.out:
        out = _outdir(args.out)
        (out / "mask_report.txt").write_text(report.to_text())
    if not args.quiet:
        sys.stdout.write(report.to_text())
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "render": cmd_render,
    "gen-mask": cmd_gen_mask,
    "validate-mask": cmd_validate_mask,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bzstreets: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, MaskFormatError, InputFormatError, ContractViolation, DomainError) as exc:
        print(f"bzstreets: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BZError, OSError, FloatingPointError) as exc:
        print(f"bzstreets: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
