"""Convex disjoint partitions over mesh elements via a spatial KD-tree.

Leaves of a median-split KD-tree become partitions; elements whose bounding
box straddles a split plane go to both children, and partition bounds are
shrunk to the intersection of the contained elements' box union with the
originating leaf bounds, which keeps partitions disjoint while fitting the
actual geometry tightly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import AABB
from .mesh import Centering, TetMesh
from .transfer import PartitionMeta


@dataclass
class KdBuildConfig:
    max_leaf_elements: int
    max_depth: int = 24
    split_rule: str = "median-of-centroids"

    def __post_init__(self):
        if self.max_leaf_elements < 1:
            raise ValueError("max_leaf_elements must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.split_rule != "median-of-centroids":
            raise ValueError(f"unknown split rule {self.split_rule!r}")


def default_config(n_tets: int) -> KdBuildConfig:
    # Coarse partitioning: the skipping structure pays off with relatively
    # few boxes, each holding many elements.
    return KdBuildConfig(max_leaf_elements=max(64, n_tets // 4096), max_depth=24)


@dataclass
class Partition:
    id: int
    bounds: AABB
    element_ids: np.ndarray          # sorted tet indices
    value_range: tuple[float, float]
    meta: Optional[PartitionMeta] = None


def element_value_ranges(mesh: TetMesh) -> np.ndarray:
    """(T, 2) min/max field value per element (over the 4 vertex values for
    vertex-centered data)."""
    if mesh.centering == Centering.VERTEX:
        v = mesh.field[mesh.tets]
        return np.stack([v.min(axis=1), v.max(axis=1)], axis=1)
    return np.stack([mesh.field, mesh.field], axis=1)


def refine_partition_bounds(partition: Partition, mesh: TetMesh,
                            leaf_bounds: AABB) -> Partition:
    """Shrink bounds to fit: intersection of the union of the contained
    elements' boxes with the originating leaf bounds."""
    if len(partition.element_ids) == 0:
        raise ValueError("partition has no elements")
    p = mesh.vertices[mesh.tets[partition.element_ids]].reshape(-1, 3)
    box = AABB.from_points(p).intersection(leaf_bounds)
    partition.bounds = box
    return partition


def build_partitions(mesh: TetMesh, config: Optional[KdBuildConfig] = None) -> list[Partition]:
    """KD-tree leaf partitions with per-partition scalar value ranges.

    Splits on the longest node axis at the median element centroid; elements
    straddling the plane are duplicated into both children. Recursion stops
    at max_leaf_elements, at max_depth, or when a split makes no progress.
    """
    if config is None:
        config = default_config(mesh.n_tets)
    box_lo, box_hi = mesh.tet_aabbs()
    centroids = mesh.vertices[mesh.tets].mean(axis=1)
    ranges = element_value_ranges(mesh)

    partitions: list[Partition] = []

    def emit(ids: np.ndarray, node_lo: np.ndarray, node_hi: np.ndarray):
        ids = np.sort(ids)
        part = Partition(
            id=len(partitions),
            bounds=AABB(node_lo.copy(), node_hi.copy()),
            element_ids=ids,
            value_range=(float(ranges[ids, 0].min()), float(ranges[ids, 1].max())),
        )
        refine_partition_bounds(part, mesh, AABB(node_lo, node_hi))
        partitions.append(part)

    def split(ids: np.ndarray, node_lo: np.ndarray, node_hi: np.ndarray, depth: int):
        if len(ids) <= config.max_leaf_elements or depth >= config.max_depth:
            emit(ids, node_lo, node_hi)
            return
        axis = int(np.argmax(node_hi - node_lo))
        vals = centroids[ids, axis]
        m = float(np.median(vals))
        left = ids[box_lo[ids, axis] < m]
        right = ids[box_hi[ids, axis] > m]
        covered = np.union1d(left, right)
        if len(covered) != len(ids):
            # elements flat on the plane belong to the right (closed) side
            extra = np.setdiff1d(ids, covered)
            right = np.concatenate([right, extra])
        if len(left) == len(ids) and len(right) == len(ids):
            emit(ids, node_lo, node_hi)  # split made no progress
            return
        if len(left) == 0 or len(right) == 0:
            emit(ids, node_lo, node_hi)
            return
        lhi = node_hi.copy()
        lhi[axis] = m
        rlo = node_lo.copy()
        rlo[axis] = m
        split(left, node_lo, lhi, depth + 1)
        split(right, rlo, node_hi, depth + 1)

    all_ids = np.arange(mesh.n_tets, dtype=np.int64)
    split(all_ids, mesh.bounds.lo.copy(), mesh.bounds.hi.copy(), 0)
    return partitions


def partition_bounds_arrays(partitions: list[Partition]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.ascontiguousarray(np.stack([p.bounds.lo for p in partitions]))
    hi = np.ascontiguousarray(np.stack([p.bounds.hi for p in partitions]))
    return lo, hi
