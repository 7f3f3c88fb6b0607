"""Axis-aligned boxes and small vector helpers shared across the renderer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


@dataclass
class AABB:
    """Axis-aligned box in world units. An empty box has lo > hi (sentinel)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)

    @staticmethod
    def empty() -> "AABB":
        return AABB(np.full(3, np.inf), np.full(3, -np.inf))

    @staticmethod
    def from_points(pts: np.ndarray) -> "AABB":
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        return AABB(pts.min(axis=0), pts.max(axis=0))

    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def union(self, other: "AABB") -> "AABB":
        return AABB(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersection(self, other: "AABB") -> "AABB":
        return AABB(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def contains(self, p: np.ndarray, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def diagonal(self) -> float:
        if self.is_empty():
            return 0.0
        return float(np.linalg.norm(self.hi - self.lo))

    def volume(self) -> float:
        if self.is_empty():
            return 0.0
        return float(np.prod(self.hi - self.lo))

    def overlap_volume(self, other: "AABB") -> float:
        ext = np.minimum(self.hi, other.hi) - np.maximum(self.lo, other.lo)
        if np.any(ext <= 0):
            return 0.0
        return float(np.prod(ext))
