"""Tetrahedral mesh data model, binary IO, synthetic generation, and point
sampling.

Binary format "TET1" (little-endian): magic ``TET1`` (4 bytes), u8 centering
(0 = vertex, 1 = cell), u64 vertex count V, u64 tet count T, then V*3 f32
positions, T*4 u32 indices, and V (vertex-centered) or T (cell-centered) f32
field values.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .bvh import FlatBVH, build_bvh
from .geometry import AABB

MAGIC = b"TET1"
_HEADER = struct.Struct("<4sBQQ")

# Degenerate tets break barycentric inversion; rejected relative to scene scale.
DEGENERACY_REL_TOL = 1e-12

# Central void of the "voidblock" field, in normalized domain coordinates.
VOID_LO = 0.3
VOID_HI = 0.7
VOIDBLOCK_BASE = 0.35
VOIDBLOCK_STEP = 0.08


class Centering(enum.IntEnum):
    VERTEX = 0
    CELL = 1


class MeshError(Exception):
    pass


class MeshFormatError(MeshError):
    pass


def tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volume of every tet (det/6 of the edge matrix)."""
    p = vertices[tets]
    e = p[:, 1:] - p[:, 0:1]
    return np.linalg.det(e) / 6.0


@dataclass
class TetMesh:
    vertices: np.ndarray        # (V, 3) f64
    tets: np.ndarray            # (T, 4) i64
    field: np.ndarray           # (V,) or (T,) f64
    centering: Centering
    bounds: AABB = dc_field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64).reshape(-1, 4)
        self.field = np.ascontiguousarray(self.field, dtype=np.float64).reshape(-1)
        self.centering = Centering(self.centering)
        self._validate()
        self.bounds = AABB.from_points(self.vertices)

    def _validate(self):
        nv, nt = len(self.vertices), len(self.tets)
        if nv == 0 or nt == 0:
            raise MeshFormatError("mesh must have at least one vertex and one tet")
        if self.tets.min() < 0 or self.tets.max() >= nv:
            bad = int(np.argmax(np.any((self.tets < 0) | (self.tets >= nv), axis=1)))
            raise MeshFormatError(f"tet {bad} has a vertex index out of range (V={nv})")
        expect = nv if self.centering == Centering.VERTEX else nt
        if len(self.field) != expect:
            raise MeshFormatError(
                f"field length {len(self.field)} does not match "
                f"{self.centering.name.lower()}-centered count {expect}")
        diag = float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))
        thr = DEGENERACY_REL_TOL * diag ** 3
        vols = np.abs(tet_volumes(self.vertices, self.tets))
        bad = np.where(vols <= thr)[0]
        if len(bad):
            raise MeshFormatError(f"degenerate tet {int(bad[0])} (|volume|={vols[bad[0]]:g})")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def tet_aabbs(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.vertices[self.tets]
        return p.min(axis=1), p.max(axis=1)

    def __eq__(self, other) -> bool:
        return (isinstance(other, TetMesh)
                and self.centering == other.centering
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.tets, other.tets)
                and np.array_equal(self.field, other.field))


def load_mesh(path) -> TetMesh:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise MeshFormatError("file too short for TET1 header")
    magic, centering, nv, nt = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise MeshFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if centering not in (0, 1):
        raise MeshFormatError(f"unknown centering byte {centering}")
    nfield = nv if centering == 0 else nt
    expected = _HEADER.size + nv * 3 * 4 + nt * 4 * 4 + nfield * 4
    if len(raw) != expected:
        raise MeshFormatError(f"file size {len(raw)} != expected {expected} bytes")
    off = _HEADER.size
    verts = np.frombuffer(raw, dtype="<f4", count=nv * 3, offset=off).reshape(nv, 3)
    off += nv * 3 * 4
    tets = np.frombuffer(raw, dtype="<u4", count=nt * 4, offset=off).reshape(nt, 4)
    off += nt * 4 * 4
    vals = np.frombuffer(raw, dtype="<f4", count=nfield, offset=off)
    return TetMesh(verts.astype(np.float64), tets.astype(np.int64),
                   vals.astype(np.float64), Centering(centering))


def save_mesh(mesh: TetMesh, path) -> None:
    if mesh.n_vertices > 0xFFFFFFFF:
        raise MeshFormatError("too many vertices for u32 indices")
    parts = [
        _HEADER.pack(MAGIC, int(mesh.centering), mesh.n_vertices, mesh.n_tets),
        mesh.vertices.astype("<f4").tobytes(),
        mesh.tets.astype("<u4").tobytes(),
        mesh.field.astype("<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


# ---------------------------------------------------------------------------
# Synthetic meshes: N^3 unit cubes, each split into 5 tets with mirrored
# parity so neighbouring cubes share face diagonals (watertight).

_CORNERS = np.array([(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)])
# Corner order above is (x, y, z) bits with x slowest: index = 4x + 2y + z.
_C = {(x, y, z): 4 * x + 2 * y + z for x in (0, 1) for y in (0, 1) for z in (0, 1)}
_PATTERN_EVEN = np.array([
    [_C[0, 0, 0], _C[1, 0, 0], _C[0, 1, 0], _C[0, 0, 1]],
    [_C[1, 1, 0], _C[0, 1, 0], _C[1, 0, 0], _C[1, 1, 1]],
    [_C[1, 0, 1], _C[0, 0, 1], _C[1, 1, 1], _C[1, 0, 0]],
    [_C[0, 1, 1], _C[1, 1, 1], _C[0, 0, 1], _C[0, 1, 0]],
    [_C[1, 0, 0], _C[0, 1, 0], _C[0, 0, 1], _C[1, 1, 1]],
], dtype=np.int64)
_FLIP_X = np.array([_C[1 - x, y, z] for (x, y, z) in _CORNERS], dtype=np.int64)
_PATTERN_ODD = _FLIP_X[_PATTERN_EVEN]
_PATTERNS = np.stack([_PATTERN_EVEN, _PATTERN_ODD])


def _field_ramp(p: np.ndarray, n: int) -> np.ndarray:
    return p[:, 0].copy()


def _field_radial(p: np.ndarray, n: int) -> np.ndarray:
    return np.linalg.norm(p - n / 2.0, axis=1)


def _field_sinusoidal(p: np.ndarray, n: int) -> np.ndarray:
    w = 2.0 * np.pi / n
    return np.sin(w * p[:, 0]) * np.sin(w * p[:, 1]) * np.sin(w * p[:, 2])


def _field_voidblock(p: np.ndarray, n: int) -> np.ndarray:
    u = p / n
    in_void = np.all((u >= VOID_LO) & (u < VOID_HI), axis=1)
    octant = ((u[:, 0] >= 0.5).astype(np.int64)
              + 2 * (u[:, 1] >= 0.5).astype(np.int64)
              + 4 * (u[:, 2] >= 0.5).astype(np.int64))
    vals = VOIDBLOCK_BASE + VOIDBLOCK_STEP * octant
    vals[in_void] = 0.0
    return vals


ANALYTIC_FIELDS = {
    "ramp": _field_ramp,
    "radial": _field_radial,
    "sinusoidal": _field_sinusoidal,
    "voidblock": _field_voidblock,
}


def generate_synthetic(n: int, field: str = "ramp",
                       centering: Centering = Centering.VERTEX) -> TetMesh:
    """N^3-cube synthetic mesh over [0, N]^3 with an analytic scalar field.

    Field values are rounded through f32 so the TET1 round trip is exact.
    """
    if n < 1:
        raise ValueError(f"resolution must be >= 1, got {n}")
    if field not in ANALYTIC_FIELDS:
        raise ValueError(f"unknown field {field!r}; choose from {sorted(ANALYTIC_FIELDS)}")
    centering = Centering(centering)

    g = n + 1
    axis = np.arange(g, dtype=np.float64)
    gi, gj, gk = np.meshgrid(axis, axis, axis, indexing="ij")
    verts = np.stack([gi, gj, gk], axis=-1).reshape(-1, 3)

    ci, cj, ck = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    cells = np.stack([ci, cj, ck], axis=-1).reshape(-1, 3)
    # (M, 8) vertex ids of each cell's corners, corner order matching _CORNERS
    corner = cells[:, None, :] + _CORNERS[None, :, :]
    corner_ids = (corner[..., 0] * g + corner[..., 1]) * g + corner[..., 2]
    parity = cells.sum(axis=1) % 2
    tets = np.take_along_axis(
        corner_ids[:, None, :].repeat(5, axis=1),
        _PATTERNS[parity], axis=2).reshape(-1, 4)

    fn = ANALYTIC_FIELDS[field]
    if centering == Centering.VERTEX:
        vals = fn(verts, n)
    else:
        vals = fn(verts[tets].mean(axis=1), n)
    vals = vals.astype(np.float32).astype(np.float64)
    return TetMesh(verts, tets, vals, centering)


# ---------------------------------------------------------------------------
# Point location / field sampling


class MeshSampler:
    """BVH-backed point location over tet bounding boxes.

    Immutable after construction; concurrent read-only queries are safe.
    A query returns the value from the lowest-index containing tet
    (barycentric tolerance -1e-9), or None outside every tet.
    """

    def __init__(self, mesh: TetMesh, leaf_size: int = 8):
        self.mesh = mesh
        lo, hi = mesh.tet_aabbs()
        pad = 1e-7 * max(mesh.bounds.diagonal(), 1e-30)
        self.bvh: FlatBVH = build_bvh(lo - pad, hi + pad, leaf_size=leaf_size)
        p = mesh.vertices[mesh.tets]
        self.tet_orig = np.ascontiguousarray(p[:, 0])
        edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=-1)
        self.tet_inv = np.ascontiguousarray(np.linalg.inv(edges))

    def kernel_args(self) -> tuple:
        b = self.bvh
        m = self.mesh
        return (b.node_lo, b.node_hi, b.left, b.right, b.start, b.count, b.prim,
                m.tets, self.tet_orig, self.tet_inv, m.field, int(m.centering))

    def locate(self, point) -> tuple[int, np.ndarray]:
        """(tet id, barycentrics); tet id is -1 outside the mesh."""
        p = np.asarray(point, dtype=np.float64)
        b = self.bvh
        t, l0, l1, l2, l3 = _kernels.locate_point(
            p[0], p[1], p[2], b.node_lo, b.node_hi, b.left, b.right,
            b.start, b.count, b.prim, self.mesh.tets, self.tet_orig, self.tet_inv)
        return int(t), np.array([l0, l1, l2, l3])

    def sample(self, point) -> Optional[float]:
        p = np.asarray(point, dtype=np.float64)
        found, v = _kernels.field_at(p[0], p[1], p[2], *self.kernel_args())
        return float(v) if found else None

    def sample_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(found mask, values) for a batch of points."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        return _kernels.field_at_many(pts, *self.kernel_args())


def sample_field(sampler: MeshSampler, point) -> Optional[float]:
    """Scalar field value at a world point, or None in unoccupied space."""
    return sampler.sample(point)
