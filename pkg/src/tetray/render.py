"""Front-to-back volume ray marching in three modes.

Reference marches the whole mesh-bounds clip range at a fixed step; SkipOnly
traverses active partitions at the fixed step; SkipAdaptive additionally
derives each partition's step from its normalized color variance, with
opacity correction keeping the composit consistent across step sizes.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from . import _kernels
from .geometry import normalize
from .mesh import MeshSampler
from .transfer import TransferFunction
from .traversal import PartitionInterval, Ray

MODES = ("reference", "skip", "skip-adaptive")
_MODE_IDS = {"reference": 0, "skip": 1, "skip-adaptive": 2}


@dataclass
class AdaptiveParams:
    s1: float
    s2: float
    p: float = 2.0
    termination_opacity: float = 0.99

    def __post_init__(self):
        if not self.s1 > 0.0:
            raise ValueError("s1 must be positive")
        if self.s2 < self.s1:
            raise ValueError("s2 must be >= s1")
        if self.p < 1.0:
            raise ValueError("adaptive power p must be >= 1")
        if not 0.0 <= self.termination_opacity < 1.0:
            raise ValueError("termination_opacity must lie in [0, 1)")


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_y_deg: float = 45.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.look_at = np.asarray(self.look_at, dtype=np.float64).reshape(3)
        self.up = np.asarray(self.up, dtype=np.float64).reshape(3)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not 0.0 < self.fov_y_deg < 180.0:
            raise ValueError("fov must lie in (0, 180) degrees")
        self.basis()  # validates non-degeneracy

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        fwd = normalize(self.look_at - self.position)
        cross = np.cross(fwd, self.up)
        if np.linalg.norm(cross) < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")
        right = normalize(cross)
        true_up = np.cross(right, fwd)
        return right, true_up, fwd

    def ray_for_pixel(self, ix: int, iy: int) -> Ray:
        """Primary ray through the pixel center; row 0 is the image top.

        Arithmetic matches the render kernel exactly (reciprocal multiply),
        so per-pixel rays here reproduce frame rays bit for bit."""
        right, up, fwd = self.basis()
        tan_half = math.tan(math.radians(self.fov_y_deg) / 2.0)
        aspect = self.width / self.height
        sx = ((ix + 0.5) / self.width) * 2.0 - 1.0
        sy = 1.0 - ((iy + 0.5) / self.height) * 2.0
        d = fwd + sx * aspect * tan_half * right + sy * tan_half * up
        dn = 1.0 / math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        return Ray(self.position.copy(), d * dn)


@dataclass
class Framebuffer:
    width: int
    height: int
    rgba: np.ndarray      # (H, W, 4) float in [0, 1], background composited
    samples: np.ndarray   # (H, W) int64 point queries per pixel
    background: np.ndarray


@dataclass
class RenderStats:
    total_samples: int
    wall_ms: float
    partitions_visited_mean: float
    per_partition_samples: Optional[np.ndarray] = None
    samples: np.ndarray = field(default=None, repr=False)


def compute_step_size(params: AdaptiveParams, sigma: float) -> float:
    """Step for a partition with normalized variance sigma:
    max(s1 + (s2 - s1) * |min(sigma, 1) - 1|^p, s1)."""
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    return float(_kernels.step_size(params.s1, params.s2, params.p, float(sigma)))


def correct_opacity(alpha: float, s: float, s1: float) -> float:
    """Opacity rescaled for step size s relative to the base step s1:
    1 - (1 - alpha)^(s / s1)."""
    if not s1 > 0.0 or s < s1:
        raise ValueError("requires s >= s1 > 0")
    return float(_kernels.opacity_correction(float(alpha), float(s), float(s1)))


def march_partition(sampler: MeshSampler, tf: TransferFunction, ray: Ray,
                    interval: PartitionInterval, step: float,
                    accum: tuple[np.ndarray, float], *, s1: Optional[float] = None,
                    termination_opacity: float = 0.99,
                    ) -> tuple[np.ndarray, float, int, bool]:
    """Integrate one interval front to back at midpoint sample positions
    t_enter + (k + 1/2) * step (at least one sample). Returns
    (color, opacity, samples taken, terminated)."""
    color, opacity = accum
    if opacity >= termination_opacity:
        raise ValueError("accumulated opacity already beyond the termination threshold")
    base = step if s1 is None else s1
    r, g, b, a, n, term = _kernels.march_range(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        interval.t_enter, interval.t_exit, float(step), float(base),
        float(termination_opacity), 0.5,
        tf.table, tf.domain[0], tf.domain[1],
        *sampler.kernel_args(),
        float(color[0]), float(color[1]), float(color[2]), float(opacity))
    return np.array([r, g, b]), float(a), int(n), bool(term)


@contextmanager
def _thread_count(threads: Optional[int]):
    if threads is None:
        yield
        return
    prev = numba.get_num_threads()
    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(prev)


def render(scene, camera: Camera, mode: str, params: AdaptiveParams, *,
           threads: Optional[int] = None, jitter: bool = False,
           track_per_partition: bool = True) -> tuple[Framebuffer, RenderStats]:
    """Render a frame. Output pixels are independent of the thread count."""
    if mode not in _MODE_IDS:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    if scene.bvh is None or scene.tf is None:
        raise ValueError("scene is not fully built (partitions/metas/BVH missing)")
    active, sigma, tf = scene.meta_state()
    w, h = camera.width, camera.height
    right, up, fwd = camera.basis()
    tan_half = math.tan(math.radians(camera.fov_y_deg) / 2.0)

    n_parts = len(scene.partitions)
    out_rgba = np.zeros((h, w, 4))
    out_samples = np.zeros((h, w), dtype=np.int64)
    out_visited = np.zeros((h, w), dtype=np.int32)
    track = track_per_partition and mode != "reference"
    out_ppart = np.zeros((h, n_parts if track else 1), dtype=np.int64)

    t0 = time.perf_counter()
    with _thread_count(threads):
        _kernels.render_frame(
            camera.position, np.ascontiguousarray(right), np.ascontiguousarray(up),
            np.ascontiguousarray(fwd), tan_half, w / h, w, h, jitter,
            _MODE_IDS[mode], params.s1, params.s2, params.p,
            params.termination_opacity, scene.traversal_config.epsilon,
            scene.background,
            tf.table, tf.domain[0], tf.domain[1],
            scene.mesh.bounds.lo, scene.mesh.bounds.hi,
            *scene.bvh.kernel_args(), active, sigma,
            *scene.sampler.kernel_args(),
            out_rgba, out_samples, out_visited, out_ppart, track)
    wall_ms = (time.perf_counter() - t0) * 1000.0

    fb = Framebuffer(width=w, height=h, rgba=out_rgba, samples=out_samples,
                     background=scene.background.copy())
    stats = RenderStats(
        total_samples=int(out_samples.sum()),
        wall_ms=wall_ms,
        partitions_visited_mean=float(out_visited.mean()),
        per_partition_samples=out_ppart.sum(axis=0) if track else None,
        samples=out_samples,
    )
    return fb, stats
