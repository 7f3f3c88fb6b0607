"""Transfer functions and transfer-dependent partition metadata.

A partition's metadata (maximum opacity, color variance) is computed from the
TF entries overlapping its stored scalar range, so a TF edit costs time linear
in the TF size, independent of how many elements the partition holds.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

DEFAULT_TABLE_SIZE = 256


@dataclass
class TransferFunction:
    domain: tuple[float, float]
    table: np.ndarray  # (N, 4) RGBA in [0, 1]

    def __post_init__(self):
        lo, hi = self.domain
        self.domain = (float(lo), float(hi))
        if not lo < hi:
            raise ValueError(f"transfer function domain must have lo < hi, got {self.domain}")
        self.table = np.ascontiguousarray(self.table, dtype=np.float64).reshape(-1, 4)
        if self.table.shape[0] < 2:
            raise ValueError("transfer function table needs at least 2 entries")
        if self.table.min() < 0.0 or self.table.max() > 1.0:
            raise ValueError("transfer function components must lie in [0, 1]")

    @property
    def size(self) -> int:
        return int(self.table.shape[0])

    def entry_positions(self) -> np.ndarray:
        lo, hi = self.domain
        return lo + (hi - lo) * np.arange(self.size) / (self.size - 1)

    @classmethod
    def constant(cls, rgba, domain=(0.0, 1.0), size: int = 2) -> "TransferFunction":
        return cls(domain, np.tile(np.asarray(rgba, dtype=np.float64), (size, 1)))

    @classmethod
    def from_control_points(cls, points, domain=(0.0, 1.0),
                            size: int = DEFAULT_TABLE_SIZE) -> "TransferFunction":
        """Resample piecewise-linear control points (x in [0,1], r, g, b, a)
        to a fixed-size table. Positions outside the points clamp to the ends.
        """
        pts = sorted(((float(p[0]), np.asarray(p[1:], dtype=np.float64))
                      for p in points), key=lambda t: t[0])
        if len(pts) < 1:
            raise ValueError("need at least one control point")
        xs = np.array([p[0] for p in pts])
        cs = np.stack([p[1] for p in pts])
        u = np.arange(size) / (size - 1)
        table = np.empty((size, 4))
        for c in range(4):
            table[:, c] = np.interp(u, xs, cs[:, c])
        return cls(domain, table)

    @classmethod
    def from_json(cls, doc) -> "TransferFunction":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        return cls(tuple(doc["domain"]), np.asarray(doc["rgba"], dtype=np.float64))

    def to_json(self) -> dict:
        return {"domain": list(self.domain), "rgba": self.table.tolist()}


@dataclass
class PartitionMeta:
    max_opacity: float
    raw_variance: float
    normalized_variance: float = 0.0
    active: bool = False

    def __post_init__(self):
        self.active = self.max_opacity > 0.0


def tf_lookup(tf: TransferFunction, value: float) -> np.ndarray:
    """RGBA at a scalar value: piecewise-linear between entries, clamped."""
    r, g, b, a = _kernels.tf_sample(tf.table, tf.domain[0], tf.domain[1], float(value))
    return np.array([r, g, b, a])


def _overlapping_colors(tf: TransferFunction, value_range) -> np.ndarray:
    """RGBA rows overlapping [min, max]: the interpolated endpoints plus
    every table entry strictly inside the range."""
    rmin, rmax = float(value_range[0]), float(value_range[1])
    if rmin > rmax:
        raise ValueError(f"invalid value range ({rmin}, {rmax})")
    lo, hi = tf.domain
    n = tf.size
    u_min = (rmin - lo) / (hi - lo) * (n - 1)
    u_max = (rmax - lo) / (hi - lo) * (n - 1)
    j0 = max(int(np.floor(u_min)) + 1, 0)
    j1 = min(int(np.ceil(u_max)) - 1, n - 1)
    rows = [tf_lookup(tf, rmin)]
    if j1 >= j0:
        rows.extend(tf.table[j0:j1 + 1])
    rows.append(tf_lookup(tf, rmax))
    return np.stack(rows)


def compute_partition_meta(tf: TransferFunction, value_range) -> PartitionMeta:
    """Maximum opacity and color variance of the TF restricted to a scalar
    range. Variance is of the opacity-weighted RGB vectors, so fully
    transparent stretches contribute nothing. Cost is linear in TF size.
    """
    rows = _overlapping_colors(tf, value_range)
    alpha = rows[:, 3]
    weighted = rows[:, :3] * alpha[:, None]
    mean = weighted.mean(axis=0)
    var = float(((weighted - mean) ** 2).sum(axis=1).mean())
    return PartitionMeta(max_opacity=float(alpha.max()), raw_variance=var)


def normalize_variances(metas: list[PartitionMeta]) -> list[PartitionMeta]:
    """Rescale raw variances to [0, 1] over all partitions. If every raw
    variance is equal the normalized value is 1 everywhere (finest sampling).
    """
    if len(metas) == 0:
        raise ValueError("need at least one partition")
    raw = np.array([m.raw_variance for m in metas])
    v_min, v_max = float(raw.min()), float(raw.max())
    if v_max == v_min:
        sig = np.ones(len(metas))
    else:
        sig = (raw - v_min) / (v_max - v_min)
    for m, s in zip(metas, sig):
        m.normalized_variance = float(s)
    return metas


def update_transfer_function(scene, tf: TransferFunction,
                             parallel: bool = True) -> list[PartitionMeta]:
    """Recompute every partition's metadata for a new transfer function.

    Touches only the stored per-partition value ranges; never the mesh,
    the sampler, or the partition BVH.
    """
    ranges = [p.value_range for p in scene.partitions]
    if parallel:
        with ThreadPoolExecutor() as pool:
            metas = list(pool.map(lambda r: compute_partition_meta(tf, r), ranges))
    else:
        metas = [compute_partition_meta(tf, r) for r in ranges]
    normalize_variances(metas)
    for p, m in zip(scene.partitions, metas):
        p.meta = m
    scene.tf = tf
    counters = getattr(scene, "counters", None)
    if counters is not None:
        counters["meta_updates"] = counters.get("meta_updates", 0) + 1
    refresh = getattr(scene, "refresh_meta_arrays", None)
    if refresh is not None:
        refresh()
    return metas
