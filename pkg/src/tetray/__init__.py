"""tetray: CPU volume renderer for unstructured tetrahedral meshes with
transfer-function-aware empty-space skipping and variance-driven adaptive
sampling."""

import os

# Avoid numba probing the (too old) TBB runtime on import.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .geometry import AABB, vec3
from .mesh import (ANALYTIC_FIELDS, Centering, MeshError, MeshFormatError,
                   MeshSampler, TetMesh, generate_synthetic, load_mesh,
                   sample_field, save_mesh)
from .metrics import SsimConfig, SweepResult, run_sweep, ssim
from .partitions import (KdBuildConfig, Partition, build_partitions,
                         refine_partition_bounds)
from .render import (AdaptiveParams, Camera, Framebuffer, RenderStats,
                     compute_step_size, correct_opacity, march_partition,
                     render)
from .scene import Scene, load_scene_config
from .transfer import (PartitionMeta, TransferFunction,
                       compute_partition_meta, normalize_variances,
                       tf_lookup, update_transfer_function)
from .traversal import (PartitionBVH, PartitionInterval, Ray, TraversalConfig,
                        advance_ray, build_partition_bvh, next_active_interval)

__version__ = "0.1.0"
