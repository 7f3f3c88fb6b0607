"""Image quality and performance measurement: SSIM and max-step sweeps.

SSIM uses the canonical constants (11x11 Gaussian window, sigma 1.5,
K1 = 0.01, K2 = 0.03, L = 255) on Rec.709 luminance of the quantized
8-bit image, averaging local scores over valid window positions only.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .imgio import framebuffer_rgb
from .render import AdaptiveParams, Camera, render

REC709 = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0


DEFAULT_SSIM = SsimConfig()


def luminance(rgb_u8: np.ndarray) -> np.ndarray:
    return np.asarray(rgb_u8, dtype=np.float64) @ REC709


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g1 = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g1, g1)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, config: SsimConfig = DEFAULT_SSIM) -> float:
    """Mean local SSIM between two images.

    Accepts u8 RGB (converted to luminance) or 2-D luminance arrays of equal
    shape; raises on dimension mismatch.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a, b = luminance(a), luminance(b)
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    half = config.window // 2
    if a.shape[0] < config.window or a.shape[1] < config.window:
        raise ValueError("images smaller than the SSIM window")

    w = gaussian_window(config.window, config.sigma)

    def win(img):
        return ndimage.correlate(img, w, mode="constant")[half:-half, half:-half]

    mu_a = win(a)
    mu_b = win(b)
    s_aa = win(a * a) - mu_a ** 2
    s_bb = win(b * b) - mu_b ** 2
    s_ab = win(a * b) - mu_a * mu_b
    c1 = (config.k1 * config.dynamic_range) ** 2
    c2 = (config.k2 * config.dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * s_ab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (s_aa + s_bb + c2)
    return float((num / den).mean())


@dataclass
class SweepRow:
    s2: float
    fps: float
    samples: int
    ssim: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reference_samples: int = 0
    reference_rgb: Optional[np.ndarray] = field(default=None, repr=False)

    def to_csv(self) -> str:
        lines = ["s2,fps,samples,ssim"]
        for r in self.rows:
            lines.append(f"{r.s2:.6g},{r.fps:.3f},{r.samples},{r.ssim:.6f}")
        return "\n".join(lines) + "\n"


def _timed_fps(scene, camera, mode, params, repeats: int, warmup: int,
               threads: Optional[int]) -> float:
    for _ in range(warmup):
        render(scene, camera, mode, params, threads=threads)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        render(scene, camera, mode, params, threads=threads)
        times.append(time.perf_counter() - t0)
    return 1.0 / statistics.median(times)


def run_sweep(scene, camera: Camera, base: AdaptiveParams, s2_values,
              mode: str = "skip-adaptive", timing: bool = True,
              repeats: int = 5, warmup: int = 1,
              threads: Optional[int] = None) -> SweepResult:
    """Render the reference once, then one adaptive render per s2 value
    (ascending), recording samples, fps, and SSIM against the reference.

    When the sweep reaches below the configured s1, the whole sweep
    (reference included) runs with s1 lowered to the smallest swept value so
    every row stays valid. With timing disabled, fps is reported as 0 and
    each point renders once; the remaining columns are deterministic.
    """
    values = sorted(float(v) for v in s2_values)
    s1 = min(base.s1, values[0])
    base = AdaptiveParams(s1=s1, s2=max(base.s2, s1), p=base.p,
                          termination_opacity=base.termination_opacity)
    ref_fb, ref_stats = render(scene, camera, "reference", base, threads=threads)
    ref_rgb = framebuffer_rgb(ref_fb)

    rows = []
    for s2 in values:
        params = AdaptiveParams(s1=base.s1, s2=s2, p=base.p,
                                termination_opacity=base.termination_opacity)
        fb, stats = render(scene, camera, mode, params, threads=threads)
        fps = _timed_fps(scene, camera, mode, params, repeats, warmup, threads) \
            if timing else 0.0
        rows.append(SweepRow(s2=s2, fps=fps, samples=stats.total_samples,
                             ssim=ssim(ref_rgb, framebuffer_rgb(fb))))
    return SweepResult(rows=rows, reference_samples=ref_stats.total_samples,
                       reference_rgb=ref_rgb)
