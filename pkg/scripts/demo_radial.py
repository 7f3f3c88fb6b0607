#!/usr/bin/env python3
"""End-to-end demo on the bundled radial scene: renders all three modes,
writes images + heatmaps, and runs the max-step quality sweep.

    python scripts/demo_radial.py [outdir]
"""

import shutil
import sys
import time
from pathlib import Path

from tetray.cli import main as cli_main
from tetray.imgio import framebuffer_rgb, heatmap_rgb, write_ppm
from tetray.metrics import run_sweep
from tetray.render import render
from tetray.scene import build_scene_from_config, load_scene_config

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    out.mkdir(parents=True, exist_ok=True)

    shutil.copy(GOLDEN / "radial16_scene.json", out / "radial16_scene.json")
    shutil.copy(GOLDEN / "radial16_tf.json", out / "radial16_tf.json")
    cli_main(["generate", "--n", "16", "--field", "radial",
              "--centering", "vertex", "--out", str(out / "radial16.tet")])

    cfg = load_scene_config(out / "radial16_scene.json")
    scene = build_scene_from_config(cfg)
    print(f"{scene.n_partitions} partitions, {int(scene.active.sum())} active")

    for mode in ("reference", "skip", "skip-adaptive"):
        t0 = time.perf_counter()
        fb, stats = render(scene, cfg.camera, mode, cfg.params)
        dt = time.perf_counter() - t0
        write_ppm(out / f"{mode}.ppm", framebuffer_rgb(fb))
        write_ppm(out / f"{mode}_heatmap.ppm", heatmap_rgb(fb.samples))
        print(f"{mode:14s} {stats.total_samples:>12,} samples  {dt:6.2f}s "
              f"({1.0 / dt:.1f} fps)")

    result = run_sweep(scene, cfg.camera, cfg.params,
                       [0.08, 0.16, 0.32, 0.64, 1.28, 2.56],
                       timing=True, repeats=3, warmup=1)
    csv_path = out / "sweep.csv"
    csv_path.write_text(result.to_csv())
    print(f"\nsweep (reference: {result.reference_samples:,} samples)")
    for row in result.rows:
        ratio = result.reference_samples / row.samples
        print(f"  s2={row.s2:5.2f}  {row.fps:6.2f} fps  {row.samples:>12,} "
              f"samples ({ratio:4.2f}x fewer)  ssim={row.ssim:.4f}")
    print(f"\nwrote images and {csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
