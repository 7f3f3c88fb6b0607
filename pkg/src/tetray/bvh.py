"""Median-split BVH builder over axis-aligned boxes, stored as flat arrays.

The same builder backs both the tetrahedron point-location structure and the
partition traversal structure; only queries differ (and live in _kernels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FlatBVH:
    """Flat array BVH. Internal nodes have left/right >= 0; leaves reference
    a contiguous [start, start+count) slice of prim (primitive ids)."""

    node_lo: np.ndarray   # (M, 3) f64
    node_hi: np.ndarray   # (M, 3) f64
    left: np.ndarray      # (M,) i64, -1 for leaf
    right: np.ndarray     # (M,) i64, -1 for leaf
    start: np.ndarray     # (M,) i64
    count: np.ndarray     # (M,) i64
    prim: np.ndarray      # (N,) i64

    @property
    def n_nodes(self) -> int:
        return int(self.left.shape[0])

    def leaf_prims(self) -> np.ndarray:
        """All primitive ids reachable through leaves, sorted."""
        ids = []
        for i in range(self.n_nodes):
            if self.left[i] < 0:
                s, c = int(self.start[i]), int(self.count[i])
                ids.extend(self.prim[s:s + c].tolist())
        return np.array(sorted(ids), dtype=np.int64)


def build_bvh(box_lo: np.ndarray, box_hi: np.ndarray, leaf_size: int = 8) -> FlatBVH:
    """Build a median-split BVH (longest node axis, split by centroid order).

    Degenerate splits fall back to a leaf. Build is deterministic: ties in
    centroid order are broken by primitive id via stable sort.
    """
    box_lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    box_hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    n = box_lo.shape[0]
    if n == 0:
        raise ValueError("cannot build BVH over zero boxes")
    centroids = 0.5 * (box_lo + box_hi)

    prim = np.arange(n, dtype=np.int64)
    node_lo, node_hi, left, right, start, count = [], [], [], [], [], []

    def new_node() -> int:
        node_lo.append(None)
        node_hi.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    # Iterative DFS build; ranges index into prim, which is reordered in place.
    root = new_node()
    stack = [(root, 0, n)]
    while stack:
        ni, lo_i, hi_i = stack.pop()
        ids = prim[lo_i:hi_i]
        nlo = box_lo[ids].min(axis=0)
        nhi = box_hi[ids].max(axis=0)
        node_lo[ni] = nlo
        node_hi[ni] = nhi
        m = hi_i - lo_i
        if m <= leaf_size:
            start[ni], count[ni] = lo_i, m
            prim[lo_i:hi_i] = np.sort(ids)
            continue
        axis = int(np.argmax(nhi - nlo))
        order = np.argsort(centroids[ids, axis], kind="stable")
        prim[lo_i:hi_i] = ids[order]
        mid = lo_i + m // 2
        li, ri = new_node(), new_node()
        left[ni], right[ni] = li, ri
        stack.append((ri, mid, hi_i))
        stack.append((li, lo_i, mid))

    return FlatBVH(
        node_lo=np.ascontiguousarray(np.stack(node_lo)),
        node_hi=np.ascontiguousarray(np.stack(node_hi)),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        start=np.array(start, dtype=np.int64),
        count=np.array(count, dtype=np.int64),
        prim=prim,
    )
