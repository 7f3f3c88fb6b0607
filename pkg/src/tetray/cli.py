"""Command-line interface: generate meshes, render stills, run benchmark
sweeps, and launch the interactive viewer service.

Exit codes: 0 success, 1 bad configuration or IO, 2 render failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .imgio import framebuffer_rgb, heatmap_rgb, write_image, write_ppm
from .mesh import ANALYTIC_FIELDS, Centering, MeshError, generate_synthetic, save_mesh
from .metrics import run_sweep
from .render import MODES, render
from .scene import build_scene_from_config, load_scene_config
from .viewer import ViewerServer


class CliError(Exception):
    pass


def _parse_sweep(spec: str) -> np.ndarray:
    try:
        start, stop, count = spec.split(":")
        values = np.linspace(float(start), float(stop), int(count))
    except Exception as exc:
        raise CliError(f"bad sweep spec {spec!r}, expected start:stop:count") from exc
    if len(values) < 1:
        raise CliError("sweep must contain at least one value")
    return values


def _load_scene(args):
    cfg = load_scene_config(args.scene)
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    for name in ("s1", "s2", "p"):
        v = getattr(args, name, None)
        if v is not None:
            cfg.params = replace(cfg.params, **{name: v})
    if getattr(args, "width", None):
        cfg.camera = replace(cfg.camera, width=args.width)
    if getattr(args, "height", None):
        cfg.camera = replace(cfg.camera, height=args.height)
    scene = build_scene_from_config(cfg)
    return cfg, scene


def _dump_partitions(scene, path):
    lines = ["# id n_elements lo_x lo_y lo_z hi_x hi_y hi_z "
             "value_min value_max max_opacity sigma active"]
    for p in scene.partitions:
        m = p.meta
        lines.append(
            f"{p.id} {len(p.element_ids)} "
            f"{p.bounds.lo[0]:.9g} {p.bounds.lo[1]:.9g} {p.bounds.lo[2]:.9g} "
            f"{p.bounds.hi[0]:.9g} {p.bounds.hi[1]:.9g} {p.bounds.hi[2]:.9g} "
            f"{p.value_range[0]:.9g} {p.value_range[1]:.9g} "
            f"{m.max_opacity:.9g} {m.normalized_variance:.9g} {int(m.active)}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_generate(args) -> int:
    if args.n < 1:
        raise CliError("--n must be >= 1")
    if args.field not in ANALYTIC_FIELDS:
        raise CliError(f"unknown field {args.field!r}; "
                       f"choose from {sorted(ANALYTIC_FIELDS)}")
    centering = Centering.VERTEX if args.centering == "vertex" else Centering.CELL
    mesh = generate_synthetic(args.n, args.field, centering)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_tets} tets")
    return 0


def cmd_render(args) -> int:
    cfg, scene = _load_scene(args)
    try:
        fb, stats = render(scene, cfg.camera, cfg.mode, cfg.params,
                           threads=args.threads, jitter=cfg.jitter)
    except Exception as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 2
    write_image(args.out, framebuffer_rgb(fb))
    if args.heatmap:
        write_ppm(args.heatmap, heatmap_rgb(fb.samples))
    if args.stats:
        Path(args.stats).write_text(json.dumps({
            "total_samples": stats.total_samples,
            "partitions": scene.n_partitions,
            "partitions_visited_mean": stats.partitions_visited_mean,
            "ms_per_frame": stats.wall_ms,
        }, indent=2) + "\n")
    if args.dump_partitions:
        _dump_partitions(scene, args.dump_partitions)
    print(f"wrote {args.out}: mode={cfg.mode} samples={stats.total_samples} "
          f"partitions={scene.n_partitions}")
    return 0


def cmd_bench(args) -> int:
    cfg, scene = _load_scene(args)
    values = _parse_sweep(args.sweep_s2)
    result = run_sweep(scene, cfg.camera, cfg.params, values,
                       timing=not args.no_timing, repeats=args.repeats,
                       warmup=args.warmup, threads=args.threads)
    csv = result.to_csv()
    if args.out:
        Path(args.out).write_text(csv)
        print(f"wrote {args.out} ({len(result.rows)} rows, "
              f"reference samples {result.reference_samples})")
    else:
        sys.stdout.write(csv)
    return 0


def cmd_serve(args) -> int:
    host, _, port = args.bind.rpartition(":")
    if not host:
        raise CliError(f"bad bind address {args.bind!r}, expected host:port")
    cfg, scene = _load_scene(args)
    server = ViewerServer(scene, cfg.camera, cfg.params, mode=cfg.mode,
                          host=host, port=int(port), threads=args.threads)
    print(f"serving on ws://{host}:{port} (ctrl-c to stop)")
    server.run_blocking()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tetray",
        description="Tetrahedral-mesh volume renderer with empty-space "
                    "skipping and adaptive sampling")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic TET1 mesh")
    g.add_argument("--n", type=int, required=True, help="cubes per axis")
    g.add_argument("--field", default="ramp",
                   help=f"analytic field: {sorted(ANALYTIC_FIELDS)}")
    g.add_argument("--centering", choices=("vertex", "cell"), default="vertex")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("render", help="render a scene config to an image")
    r.add_argument("--scene", required=True, help="scene JSON path")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--s1", type=float)
    r.add_argument("--s2", type=float)
    r.add_argument("--p", type=float)
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out", required=True, help="output image (.ppm or .png)")
    r.add_argument("--heatmap", help="write per-pixel sample heatmap PPM")
    r.add_argument("--stats", help="write render stats JSON")
    r.add_argument("--dump-partitions", help="write partition diagnostics text")
    r.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="quality-vs-max-step sweep, emits CSV")
    b.add_argument("--scene", required=True)
    b.add_argument("--sweep-s2", required=True, metavar="START:STOP:COUNT")
    b.add_argument("--mode", choices=MODES)
    b.add_argument("--s1", type=float)
    b.add_argument("--p", type=float)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--no-timing", action="store_true",
                   help="skip fps measurement (deterministic output)")
    b.add_argument("--threads", type=int)
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("serve", help="run the interactive viewer service")
    s.add_argument("--bind", default="127.0.0.1:7878")
    s.add_argument("--scene", required=True)
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, MeshError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
