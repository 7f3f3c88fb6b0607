"""Shared test utilities: random disjoint partition scenes, brute-force
oracles for point location and partition traversal."""

from __future__ import annotations

import math

import numpy as np

from tetray.geometry import AABB
from tetray.partitions import Partition
from tetray.transfer import PartitionMeta


def random_partition_scene(rng: np.random.Generator, n_target: int,
                           domain=10.0, shrink: bool = True,
                           active_fraction: float = 0.7) -> list[Partition]:
    """Disjoint boxes built by random KD splitting of [0, domain]^3, with
    optional random shrinking (preserves disjointness, creates gaps)."""
    boxes = [(np.zeros(3), np.full(3, float(domain)))]
    while len(boxes) < n_target:
        i = int(rng.integers(len(boxes)))
        lo, hi = boxes[i]
        ext = hi - lo
        axis = int(np.argmax(ext))
        if ext[axis] < 1e-3:
            continue
        f = rng.uniform(0.3, 0.7)
        m = lo[axis] + f * ext[axis]
        lhi = hi.copy()
        lhi[axis] = m
        rlo = lo.copy()
        rlo[axis] = m
        boxes[i] = (lo, lhi)
        boxes.append((rlo, hi))
    parts = []
    for i, (lo, hi) in enumerate(boxes):
        if shrink:
            ext = hi - lo
            cut_lo = rng.uniform(0.0, 0.25, 3) * ext
            cut_hi = rng.uniform(0.0, 0.25, 3) * ext
            lo = lo + cut_lo
            hi = hi - cut_hi
        p = Partition(id=i, bounds=AABB(lo, hi),
                      element_ids=np.array([0], dtype=np.int64),
                      value_range=(0.0, 1.0))
        is_active = rng.random() < active_fraction
        p.meta = PartitionMeta(max_opacity=1.0 if is_active else 0.0,
                               raw_variance=float(rng.random()))
        p.meta.normalized_variance = float(rng.random())
        parts.append(p)
    return parts


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def slab_all(origin, direction, lo, hi):
    """Vectorized slab intervals against every box, mirroring the kernel's
    arithmetic exactly (multiply by the reciprocal, not divide)."""
    o = np.asarray(origin)
    d = np.asarray(direction)
    t0 = np.full(lo.shape[0], -np.inf)
    t1 = np.full(lo.shape[0], np.inf)
    miss = np.zeros(lo.shape[0], dtype=bool)
    for ax in range(3):
        if d[ax] != 0.0:
            inv = 1.0 / d[ax]
            a = (lo[:, ax] - o[ax]) * inv
            b = (hi[:, ax] - o[ax]) * inv
            swap = a > b
            a2 = np.where(swap, b, a)
            b2 = np.where(swap, a, b)
            t0 = np.maximum(t0, a2)
            t1 = np.minimum(t1, b2)
        else:
            miss |= (o[ax] < lo[:, ax]) | (o[ax] > hi[:, ax])
    t0 = np.where(miss, 1.0, t0)
    t1 = np.where(miss, 0.0, t1)
    return t0, t1


def brute_force_next_interval(origin, direction, t_min, t_max, excl_eps,
                              excl_id, lo, hi, active):
    """O(n) reference for next_interval: scan every partition, keep the
    earliest clamped entry, ties to the lower id."""
    t0, t1 = slab_all(origin, direction, lo, hi)
    a_cl = np.maximum(t0, t_min)
    ok = (t0 <= t1) & (t1 > t_min + excl_eps) & (a_cl < t_max) & (active != 0)
    if excl_id >= 0:
        ok[excl_id] = False
    if not ok.any():
        return -1, math.inf, math.inf
    ids = np.nonzero(ok)[0]
    order = np.lexsort((ids, a_cl[ids]))
    best = ids[order[0]]
    return int(best), float(a_cl[best]), float(t1[best])


def brute_force_traverse(origin, direction, eps, lo, hi, active,
                         t_min0=0.0, t_max=math.inf, max_steps=10_000):
    """Full O(n)-per-step traversal using the same advance rule as the
    renderer: first query without exclusion epsilon, then t_min = exit - eps
    and last-id exclusion."""
    out = []
    t_min = t_min0
    last = -1
    for _ in range(max_steps):
        excl = 0.0 if last < 0 else eps
        pid, a, b = brute_force_next_interval(origin, direction, t_min, t_max,
                                              excl, last, lo, hi, active)
        if pid < 0:
            break
        out.append((pid, a, b))
        t_min = b - eps
        last = pid
    return out


def brute_force_locate(mesh, points, tol=1e-9):
    """Lowest-index containing tet per point by scanning all tets with
    independently computed barycentrics. Returns (ids, values) with id -1
    outside the mesh."""
    verts = mesh.vertices
    tets = mesh.tets
    p = verts[tets]
    edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]],
                     axis=-1)
    inv = np.linalg.inv(edges)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    ids = np.full(len(points), -1, dtype=np.int64)
    vals = np.zeros(len(points))
    for i, pt in enumerate(points):
        d = pt[None, :] - p[:, 0]                       # (T, 3)
        lam = np.einsum("tij,tj->ti", inv, d)           # (T, 3)
        l0 = 1.0 - lam.sum(axis=1)
        inside = (l0 >= -tol) & np.all(lam >= -tol, axis=1)
        hit = np.nonzero(inside)[0]
        if len(hit) == 0:
            continue
        t = int(hit[0])
        ids[i] = t
        if int(mesh.centering) == 0:
            w = np.concatenate([[l0[t]], lam[t]])
            vals[i] = w @ mesh.field[tets[t]]
        else:
            vals[i] = mesh.field[t]
    return ids, vals
