"""Front-to-back iteration of rays through partitions via an AABB BVH.

Entry/exit intervals come from slab tests against the refined partition
boxes; fully transparent partitions are skipped in order. Advancing backs the
ray off by a small epsilon so coplanar boundary faces are still hit, and the
just-visited partition is excluded so it cannot be re-found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .bvh import FlatBVH, build_bvh
from .partitions import Partition, partition_bounds_arrays

# Incremented on every BVH build; lets tests assert TF edits never rebuild.
BUILD_COUNT = 0


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.direction = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length (|d| = {n})")
        if not self.t_min <= self.t_max:
            raise ValueError(f"t_min {self.t_min} > t_max {self.t_max}")


@dataclass
class PartitionInterval:
    partition_id: int
    t_enter: float
    t_exit: float


@dataclass
class TraversalConfig:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    @staticmethod
    def for_diagonal(diag: float) -> "TraversalConfig":
        # Backstep scaled with scene size; large scenes need a larger offset.
        return TraversalConfig(epsilon=1e-4 * diag)


@dataclass
class PartitionBVH:
    tree: FlatBVH
    box_lo: np.ndarray
    box_hi: np.ndarray
    n_partitions: int = field(init=False)

    def __post_init__(self):
        self.n_partitions = int(self.box_lo.shape[0])

    def kernel_args(self) -> tuple:
        t = self.tree
        return (t.node_lo, t.node_hi, t.left, t.right, t.start, t.count, t.prim,
                self.box_lo, self.box_hi)

    def reachable_partitions(self) -> np.ndarray:
        return self.tree.leaf_prims()


def build_partition_bvh(partitions: list[Partition]) -> PartitionBVH:
    """BVH over partition boxes. Rebuilt only when partition geometry
    changes; a transfer-function update never calls this."""
    global BUILD_COUNT
    if len(partitions) == 0:
        raise ValueError("need at least one partition")
    lo, hi = partition_bounds_arrays(partitions)
    bvh = PartitionBVH(tree=build_bvh(lo, hi, leaf_size=4), box_lo=lo, box_hi=hi)
    BUILD_COUNT += 1
    return bvh


def active_sigma_arrays(partitions: list[Partition]) -> tuple[np.ndarray, np.ndarray]:
    active = np.array([1 if (p.meta is not None and p.meta.active) else 0
                       for p in partitions], dtype=np.uint8)
    sigma = np.array([p.meta.normalized_variance if p.meta is not None else 1.0
                      for p in partitions], dtype=np.float64)
    return active, sigma


def next_active_interval(bvh: PartitionBVH, partitions: list[Partition], ray: Ray,
                         exclude_eps: float = 0.0,
                         exclude_id: int = -1) -> Optional[PartitionInterval]:
    """Earliest active partition interval with t_exit > ray.t_min
    (+ exclude_eps) starting before ray.t_max; t_enter is clamped to
    ray.t_min. Ties on t_enter break toward the lower partition id. None
    means the ray is done and composites with the background.
    """
    active, _ = active_sigma_arrays(partitions)
    pid, a, b = _kernels.next_interval(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, exclude_eps, exclude_id,
        *bvh.kernel_args(), active)
    if pid < 0:
        return None
    return PartitionInterval(int(pid), float(a), float(b))


def advance_ray(ray: Ray, interval: PartitionInterval,
                config: TraversalConfig) -> Ray:
    """Move past an interval: t_min = t_exit - epsilon. The backstep keeps
    coplanar neighbour faces reachable; re-finding the visited partition is
    prevented by the caller passing exclude_id on the next query."""
    return Ray(ray.origin.copy(), ray.direction.copy(),
               t_min=interval.t_exit - config.epsilon, t_max=ray.t_max)


def traverse(bvh: PartitionBVH, partitions: list[Partition], ray: Ray,
             config: TraversalConfig,
             max_steps: Optional[int] = None) -> Iterator[PartitionInterval]:
    """All active intervals along a ray, front to back. The first query uses
    no exclusion epsilon; subsequent ones exclude t_exit <= t_min + epsilon
    and the just-visited id."""
    limit = max_steps if max_steps is not None else len(partitions) + 1
    r = ray
    last = -1
    for _ in range(limit):
        iv = next_active_interval(bvh, partitions, r,
                                  exclude_eps=0.0 if last < 0 else config.epsilon,
                                  exclude_id=last)
        if iv is None:
            return
        yield iv
        r = advance_ray(r, iv, config)
        last = iv.partition_id


def trace_intervals_arrays(bvh: PartitionBVH, active: np.ndarray, ray: Ray,
                           epsilon: float, max_steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Array-based full traversal (ids, t_enter, t_exit) for oracle tests."""
    ids = np.empty(max_steps, dtype=np.int64)
    enter = np.empty(max_steps, dtype=np.float64)
    exit_ = np.empty(max_steps, dtype=np.float64)
    n = _kernels.trace_intervals(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, epsilon, *bvh.kernel_args(), active,
        ids, enter, exit_)
    return ids[:n], enter[:n], exit_[:n]
