"""Scene assembly: mesh + sampler + partitions + metadata + traversal BVH,
plus the JSON scene-config format used by the CLI and the viewer.

Scene JSON schema (all paths relative to the config file):

    {
      "mesh": "mesh.tet",
      "transfer_function": "tf.json" | {"domain": [lo, hi], "rgba": [[r,g,b,a], ...]},
      "camera": {"position": [..], "look_at": [..], "up": [..],
                 "fov_y_deg": 45, "width": 512, "height": 512},
      "params": {"s1": .., "s2": .., "p": 2.0,
                 "termination_opacity": 0.99, "mode": "skip-adaptive"},
      "kd": {"max_leaf_elements": 64, "max_depth": 24},   // optional
      "epsilon": null,            // null -> 1e-4 x scene bounds diagonal
      "background": [0, 0, 0, 1], // optional
      "jitter": false             // optional
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import traversal as traversal_mod
from .mesh import MeshSampler, TetMesh, load_mesh
from .partitions import KdBuildConfig, Partition, build_partitions, default_config
from .render import AdaptiveParams, Camera
from .transfer import TransferFunction, update_transfer_function
from .traversal import PartitionBVH, TraversalConfig


@dataclass
class Scene:
    mesh: TetMesh
    sampler: MeshSampler
    partitions: list[Partition]
    kd_config: KdBuildConfig
    traversal_config: TraversalConfig
    tf: Optional[TransferFunction] = None
    bvh: Optional[PartitionBVH] = None
    background: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    counters: dict = field(default_factory=dict)
    # (active, sigma, tf) swapped as one tuple so a concurrent frame always
    # sees one consistent metadata epoch
    _meta_state: Optional[tuple] = field(init=False, default=None, repr=False)

    @classmethod
    def build(cls, mesh: TetMesh, tf: TransferFunction,
              kd_config: Optional[KdBuildConfig] = None,
              epsilon: Optional[float] = None,
              background=None) -> "Scene":
        kd = kd_config or default_config(mesh.n_tets)
        tc = TraversalConfig(epsilon) if epsilon is not None \
            else TraversalConfig.for_diagonal(mesh.bounds.diagonal())
        scene = cls(mesh=mesh, sampler=MeshSampler(mesh),
                    partitions=build_partitions(mesh, kd),
                    kd_config=kd, traversal_config=tc)
        if background is not None:
            scene.background = np.asarray(background, dtype=np.float64).reshape(4)
        scene.bvh = traversal_mod.build_partition_bvh(scene.partitions)
        scene.counters["partition_bvh_builds"] = scene.counters.get("partition_bvh_builds", 0) + 1
        scene.set_transfer_function(tf)
        return scene

    def set_transfer_function(self, tf: TransferFunction) -> None:
        """Recompute partition metadata only; the partition BVH is untouched."""
        update_transfer_function(self, tf)

    def refresh_meta_arrays(self) -> None:
        active, sigma = traversal_mod.active_sigma_arrays(self.partitions)
        self._meta_state = (active, sigma, self.tf)

    def meta_state(self) -> tuple[np.ndarray, np.ndarray, TransferFunction]:
        """One consistent (active, sigma, tf) epoch for a frame."""
        if self._meta_state is None:
            raise ValueError("scene metadata not built yet")
        return self._meta_state

    @property
    def active(self) -> np.ndarray:
        return self.meta_state()[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.meta_state()[1]

    @property
    def n_partitions(self) -> int:
        return len(self.partitions)


@dataclass
class SceneConfig:
    mesh_path: Path
    tf: TransferFunction
    camera: Camera
    params: AdaptiveParams
    mode: str
    kd: Optional[KdBuildConfig]
    epsilon: Optional[float]
    background: np.ndarray
    jitter: bool


def load_scene_config(path) -> SceneConfig:
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent

    tf_doc = doc["transfer_function"]
    tf = TransferFunction.from_json(base / tf_doc if isinstance(tf_doc, str) else tf_doc)

    cam = doc["camera"]
    camera = Camera(position=cam["position"], look_at=cam["look_at"],
                    up=cam.get("up", [0.0, 1.0, 0.0]),
                    fov_y_deg=cam.get("fov_y_deg", 45.0),
                    width=int(cam.get("width", 256)), height=int(cam.get("height", 256)))

    par = doc["params"]
    params = AdaptiveParams(s1=par["s1"], s2=par["s2"], p=par.get("p", 2.0),
                            termination_opacity=par.get("termination_opacity", 0.99))
    mode = par.get("mode", "skip-adaptive")

    kd = None
    if "kd" in doc:
        kd = KdBuildConfig(max_leaf_elements=int(doc["kd"]["max_leaf_elements"]),
                           max_depth=int(doc["kd"].get("max_depth", 24)))

    return SceneConfig(
        mesh_path=base / doc["mesh"], tf=tf, camera=camera, params=params,
        mode=mode, kd=kd, epsilon=doc.get("epsilon"),
        background=np.asarray(doc.get("background", [0, 0, 0, 1]), dtype=np.float64),
        jitter=bool(doc.get("jitter", False)))


def build_scene_from_config(cfg: SceneConfig) -> Scene:
    mesh = load_mesh(cfg.mesh_path)
    return Scene.build(mesh, cfg.tf, kd_config=cfg.kd, epsilon=cfg.epsilon,
                       background=cfg.background)
