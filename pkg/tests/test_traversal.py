import math

import numpy as np
import pytest

from helpers import (brute_force_next_interval, brute_force_traverse,
                     random_partition_scene, random_unit_vector)
from tetray.geometry import AABB
from tetray.partitions import Partition
from tetray.transfer import PartitionMeta
from tetray.traversal import (Ray, TraversalConfig, advance_ray,
                              build_partition_bvh, next_active_interval,
                              traverse, trace_intervals_arrays,
                              active_sigma_arrays)


def box_partition(pid, lo, hi, active=True):
    p = Partition(pid, AABB(lo, hi), np.array([0], dtype=np.int64), (0.0, 1.0))
    p.meta = PartitionMeta(max_opacity=1.0 if active else 0.0, raw_variance=0.0)
    return p


def two_cubes(first_active=True, second_active=True):
    return [box_partition(0, [0, 0, 0], [1, 1, 1], first_active),
            box_partition(1, [1, 0, 0], [2, 1, 1], second_active)]


X_RAY = Ray(origin=[-1.0, 0.5, 0.5], direction=[1.0, 0.0, 0.0])


def test_ray_validation():
    with pytest.raises(ValueError):
        Ray(origin=[0, 0, 0], direction=[1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        Ray(origin=[0, 0, 0], direction=[1, 0, 0], t_min=2.0, t_max=1.0)


def test_first_interval_of_adjacent_cubes():
    parts = two_cubes()
    bvh = build_partition_bvh(parts)
    iv = next_active_interval(bvh, parts, X_RAY)
    assert iv.partition_id == 0
    assert iv.t_enter == pytest.approx(1.0)
    assert iv.t_exit == pytest.approx(2.0)


def test_inactive_first_cube_is_skipped():
    parts = two_cubes(first_active=False)
    bvh = build_partition_bvh(parts)
    iv = next_active_interval(bvh, parts, X_RAY)
    assert iv.partition_id == 1
    assert iv.t_enter == pytest.approx(2.0)
    assert iv.t_exit == pytest.approx(3.0)


def test_no_active_partition_returns_none():
    parts = two_cubes(False, False)
    bvh = build_partition_bvh(parts)
    assert next_active_interval(bvh, parts, X_RAY) is None


def test_t_enter_clamped_when_origin_inside():
    parts = two_cubes()
    bvh = build_partition_bvh(parts)
    inside = Ray(origin=[0.5, 0.5, 0.5], direction=[1.0, 0.0, 0.0])
    iv = next_active_interval(bvh, parts, inside)
    assert iv.partition_id == 0
    assert iv.t_enter == 0.0  # clamped to t_min


def test_advance_ray_backsteps_epsilon():
    parts = two_cubes()
    bvh = build_partition_bvh(parts)
    cfg = TraversalConfig(epsilon=1e-4)
    iv = next_active_interval(bvh, parts, X_RAY)
    r2 = advance_ray(X_RAY, iv, cfg)
    assert r2.t_min == pytest.approx(iv.t_exit - 1e-4)


def test_coplanar_face_found_after_advance():
    parts = two_cubes()
    bvh = build_partition_bvh(parts)
    cfg = TraversalConfig(epsilon=1e-4)
    ivs = list(traverse(bvh, parts, X_RAY, cfg))
    assert [iv.partition_id for iv in ivs] == [0, 1]
    assert ivs[1].t_enter == pytest.approx(2.0)
    assert ivs[1].t_exit == pytest.approx(3.0)


def test_single_partition_bvh_is_single_leaf():
    parts = [box_partition(0, [0, 0, 0], [1, 1, 1])]
    bvh = build_partition_bvh(parts)
    assert bvh.tree.n_nodes == 1
    assert bvh.reachable_partitions().tolist() == [0]


def test_bvh_reaches_every_partition(rng):
    parts = random_partition_scene(rng, 77)
    bvh = build_partition_bvh(parts)
    assert bvh.reachable_partitions().tolist() == list(range(77))


def test_next_interval_matches_bruteforce(rng):
    parts = random_partition_scene(rng, 20)
    bvh = build_partition_bvh(parts)
    active, _ = active_sigma_arrays(parts)
    lo, hi = bvh.box_lo, bvh.box_hi
    center = np.full(3, 5.0)
    for _ in range(100):
        origin = rng.uniform(-5, 15, 3)
        direction = random_unit_vector(rng)
        if rng.random() < 0.5:  # bias toward the scene
            direction = (center - origin) / np.linalg.norm(center - origin)
        ray = Ray(origin, direction)
        iv = next_active_interval(bvh, parts, ray)
        pid, a, b = brute_force_next_interval(origin, direction, 0.0, math.inf,
                                              0.0, -1, lo, hi, active)
        if iv is None:
            assert pid == -1
        else:
            assert iv.partition_id == pid
            assert iv.t_enter == pytest.approx(a, abs=1e-9)
            assert iv.t_exit == pytest.approx(b, abs=1e-9)


def test_full_traversal_matches_bruteforce(rng):
    eps = 1e-4 * math.sqrt(3) * 10
    for scene_i in range(5):
        parts = random_partition_scene(rng, 50)
        bvh = build_partition_bvh(parts)
        active, _ = active_sigma_arrays(parts)
        for _ in range(50):
            origin = rng.uniform(-2, 12, 3)
            direction = random_unit_vector(rng)
            ray = Ray(origin, direction)
            ids, enter, exit_ = trace_intervals_arrays(bvh, active, ray, eps, 200)
            ref = brute_force_traverse(origin, direction, eps,
                                       bvh.box_lo, bvh.box_hi, active)
            assert ids.tolist() == [r[0] for r in ref]
            assert np.allclose(enter, [r[1] for r in ref], atol=1e-9)
            assert np.allclose(exit_, [r[2] for r in ref], atol=1e-9)


def test_traversal_order_and_no_reentry(rng):
    cfg = TraversalConfig(epsilon=1e-3)
    for _ in range(5):
        parts = random_partition_scene(rng, 60)
        bvh = build_partition_bvh(parts)
        for _ in range(40):
            ray = Ray(rng.uniform(-2, 12, 3), random_unit_vector(rng))
            ivs = list(traverse(bvh, parts, ray, cfg, max_steps=500))
            ids = [iv.partition_id for iv in ivs]
            assert len(ids) == len(set(ids)), "partition visited twice"
            enters = [iv.t_enter for iv in ivs]
            assert all(a <= b + 1e-12 for a, b in zip(enters, enters[1:]))


def test_traversal_config_validation():
    with pytest.raises(ValueError):
        TraversalConfig(epsilon=0.0)


def test_ties_on_t_enter_break_by_lower_id():
    # two boxes sharing the plane x=1, both starting there for a ray from x<0
    parts = [box_partition(0, [1, 0, 0], [2, 1, 1]),
             box_partition(1, [1, 0, 1], [2, 1, 2])]
    bvh = build_partition_bvh(parts)
    ray = Ray(origin=[0.0, 0.5, 1.0], direction=[1.0, 0.0, 0.0])
    # grazes both boxes' shared edge; both intervals start at t=1
    iv = next_active_interval(bvh, parts, ray)
    assert iv.partition_id == 0


def test_gap_between_refined_partitions_takes_no_samples():
    """Two mesh clusters with empty space between them: every sample lands
    inside a cluster, none in the gap."""
    import math

    from tetray.mesh import Centering, TetMesh, generate_synthetic
    from tetray.partitions import KdBuildConfig
    from tetray.render import AdaptiveParams, Camera, render
    from tetray.scene import Scene
    from tetray.transfer import TransferFunction

    a = generate_synthetic(1, "ramp", Centering.VERTEX)
    verts = np.vstack([a.vertices, a.vertices + [3.0, 0.0, 0.0]])
    tets = np.vstack([a.tets, a.tets + a.n_vertices])
    field = np.concatenate([a.field, a.field])
    mesh = TetMesh(verts, tets, field, Centering.VERTEX)

    tf = TransferFunction.constant([1, 1, 1, 0.4], domain=(0.0, 1.0))
    scene = Scene.build(mesh, tf, kd_config=KdBuildConfig(max_leaf_elements=5))
    boxes = [(p.bounds.lo[0], p.bounds.hi[0]) for p in scene.partitions]
    assert all(hi <= 1.0 or lo >= 3.0 for lo, hi in boxes), boxes

    cam = Camera(position=[-1.0, 0.5, 0.5], look_at=[2.0, 0.5, 0.5],
                 up=[0, 1, 0], fov_y_deg=30.0, width=1, height=1)
    step = 0.25
    fb, stats = render(scene, cam, "skip", AdaptiveParams(s1=step, s2=step))
    # intervals are [1,2) and [4,5): 4 midpoint samples each, 0 in the gap
    expected = 2 * max(1, math.ceil(1.0 / step - 0.5))
    assert stats.total_samples == expected
