"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with -s to see them). Tolerances are pinned in the assertions."""

import math
import shutil
import time
from contextlib import contextmanager
from pathlib import Path

import mpmath
import numpy as np
import pytest

import tetray.traversal as traversal_mod
from helpers import (brute_force_traverse, random_partition_scene,
                     random_unit_vector)
from tetray.imgio import framebuffer_rgb
from tetray.mesh import (Centering, TetMesh, VOID_HI, VOID_LO,
                         generate_synthetic)
from tetray.metrics import run_sweep
from tetray.partitions import KdBuildConfig
from tetray.render import (AdaptiveParams, Camera, compute_step_size,
                           correct_opacity, render)
from tetray.scene import Scene, build_scene_from_config, load_scene_config
from tetray.transfer import TransferFunction, update_transfer_function
from tetray.traversal import Ray, active_sigma_arrays, trace_intervals_arrays
from tetray.viewer import (ViewerServer, decode_frame_message, pack_json,
                           unpack_envelope)
from tetray.wsock import WsClient

GOLDEN = Path(__file__).parent / "golden"


@contextmanager
def report(name):
    try:
        yield
    except BaseException:
        print(f"[{name}] FAIL")
        raise
    print(f"[{name}] PASS")


@pytest.fixture(scope="module")
def bundled_scene(tmp_path_factory):
    """The bundled N=16 radial scene at 512x512, built through the real
    config path (mesh generated into a temp copy of the bundle)."""
    from tetray.cli import main as cli_main
    d = tmp_path_factory.mktemp("radial16")
    shutil.copy(GOLDEN / "radial16_scene.json", d / "radial16_scene.json")
    shutil.copy(GOLDEN / "radial16_tf.json", d / "radial16_tf.json")
    rc = cli_main(["generate", "--n", "16", "--field", "radial",
                   "--centering", "vertex", "--out", str(d / "radial16.tet")])
    assert rc == 0
    cfg = load_scene_config(d / "radial16_scene.json")
    return cfg, build_scene_from_config(cfg)


def test_a1_formula_fidelity(rng):
    with report("A1"):
        mpmath.mp.dps = 50
        n = 1000
        s1 = rng.uniform(1e-3, 1.0, n)
        s2 = s1 + rng.uniform(0.0, 2.0, n)
        p = rng.uniform(1.0, 8.0, n)
        sigma = rng.uniform(0.0, 2.0, n)
        for i in range(n):
            got = compute_step_size(AdaptiveParams(s1[i], s2[i], p[i]), sigma[i])
            same = max(s1[i] + (s2[i] - s1[i]) * abs(min(sigma[i], 1.0) - 1.0) ** p[i], s1[i])
            assert got == same  # identical expression
            hp = mpmath.mpf(s1[i]) + (mpmath.mpf(s2[i]) - mpmath.mpf(s1[i])) * \
                abs(min(mpmath.mpf(sigma[i]), 1) - 1) ** mpmath.mpf(p[i])
            hp = max(hp, mpmath.mpf(s1[i]))
            assert abs(got - float(hp)) < 1e-12

        alpha = rng.uniform(0.0, 1.0, n)
        s_base = rng.uniform(1e-3, 1.0, n)
        k = rng.uniform(1.0, 10.0, n)
        for i in range(n):
            s = s_base[i] * k[i]
            got = correct_opacity(alpha[i], s, s_base[i])
            assert got == 1.0 - (1.0 - alpha[i]) ** (s / s_base[i])
            hp = 1 - (1 - mpmath.mpf(alpha[i])) ** (mpmath.mpf(s) / mpmath.mpf(s_base[i]))
            assert abs(got - float(hp)) < 1e-12


def test_a2_traversal_oracle(rng):
    with report("A2"):
        t0 = time.monotonic()
        eps = 1e-4 * math.sqrt(3) * 10.0
        for _ in range(50):
            n = int(rng.integers(10, 201))
            parts = random_partition_scene(rng, n)
            bvh = traversal_mod.build_partition_bvh(parts)
            active, _ = active_sigma_arrays(parts)
            for _ in range(1000):
                origin = rng.uniform(-2.0, 12.0, 3)
                direction = random_unit_vector(rng)
                ray = Ray(origin, direction)
                ids, enter, exit_ = trace_intervals_arrays(bvh, active, ray,
                                                           eps, 500)
                ref = brute_force_traverse(origin, direction, eps,
                                           bvh.box_lo, bvh.box_hi, active)
                assert ids.tolist() == [r[0] for r in ref]
                assert np.allclose(enter, [r[1] for r in ref], atol=1e-9)
                assert np.allclose(exit_, [r[2] for r in ref], atol=1e-9)
                assert len(set(ids.tolist())) == len(ids)
        elapsed = time.monotonic() - t0
        assert elapsed < 60.0, f"oracle took {elapsed:.1f}s"


def test_a3_homogeneous_invariance():
    with report("A3"):
        mesh = generate_synthetic(2, "ramp", Centering.VERTEX)
        mesh = TetMesh(mesh.vertices, mesh.tets, np.full(len(mesh.field), 0.5),
                       Centering.VERTEX)
        tf = TransferFunction.constant([0.9, 0.6, 0.2, 0.3], domain=(0.0, 1.0))
        scene = Scene.build(mesh, tf, kd_config=KdBuildConfig(8),
                            background=[0.0, 0.0, 0.0, 0.0])
        cam = Camera(position=[5.0, 3.0, 4.0], look_at=[1.0, 1.0, 1.0],
                     up=[0, 1, 0], fov_y_deg=45.0, width=32, height=32)
        base = None
        for s2, p in [(0.05, 1.0), (0.1, 2.0), (0.4, 3.0), (0.9, 6.0)]:
            fb, _ = render(scene, cam, "skip-adaptive",
                           AdaptiveParams(s1=0.05, s2=s2, p=p))
            if base is None:
                base = fb.rgba[..., 3]
            else:
                assert np.abs(fb.rgba[..., 3] - base).max() < 1e-6


def test_a4_equivalence_ladder():
    with report("A4"):
        # (a) s1 == s2: SkipAdaptive and SkipOnly byte-identical
        mesh = generate_synthetic(4, "radial", Centering.VERTEX)
        tf = TransferFunction((0.0, 3.5), np.array(
            [[0, 0, 1, 0.0], [0, 1, 1, 0.1], [0, 1, 0, 0.5],
             [1, 1, 0, 0.3], [1, 0, 0, 0.8]], dtype=float))
        scene = Scene.build(mesh, tf, kd_config=KdBuildConfig(40))
        cam = Camera(position=[10, 6, 8], look_at=[2, 2, 2], up=[0, 1, 0],
                     fov_y_deg=40.0, width=64, height=64)
        params = AdaptiveParams(s1=0.05, s2=0.05, p=2.0)
        fb_a, _ = render(scene, cam, "skip-adaptive", params)
        fb_s, _ = render(scene, cam, "skip", params)
        assert framebuffer_rgb(fb_a).tobytes() == framebuffer_rgb(fb_s).tobytes()
        assert np.array_equal(fb_a.samples, fb_s.samples)

        # (b) single partition: SkipOnly == Reference sampling
        single = Scene.build(mesh, tf, kd_config=KdBuildConfig(10 ** 9))
        assert single.n_partitions == 1
        fb_ref, _ = render(single, cam, "reference", params)
        fb_skip, _ = render(single, cam, "skip", params)
        assert np.array_equal(fb_ref.samples, fb_skip.samples)
        diff = (framebuffer_rgb(fb_ref).astype(int)
                - framebuffer_rgb(fb_skip).astype(int))
        assert np.abs(diff).max() <= 1


def test_a5_desk_scale_quality_sweep(bundled_scene):
    with report("A5"):
        t0 = time.monotonic()
        cfg, scene = bundled_scene
        base = AdaptiveParams(s1=0.08, s2=0.08, p=cfg.params.p,
                              termination_opacity=cfg.params.termination_opacity)
        result = run_sweep(scene, cfg.camera, base,
                           [0.08, 0.16, 0.32, 0.64, 1.28, 2.56], timing=False)
        ratios = [result.reference_samples / r.samples for r in result.rows]
        scores = [r.ssim for r in result.rows]
        # some swept setting reaches >= 3x fewer samples at SSIM >= 0.97
        assert any(rt >= 3.0 and sc >= 0.97 for rt, sc in zip(ratios, scores)), \
            f"ratios {ratios}, ssim {scores}"
        samples = [r.samples for r in result.rows]
        assert all(a >= b for a, b in zip(samples, samples[1:])), samples
        assert all(a >= b - 0.005 for a, b in zip(scores, scores[1:])), scores
        elapsed = time.monotonic() - t0
        assert elapsed < 300.0, f"sweep took {elapsed:.1f}s"


VOID_TF_CTRL = [
    (0.00, 0.1, 0.1, 0.9, 0.0),
    (0.30, 0.1, 0.5, 0.9, 0.0),
    (0.33, 0.1, 0.9, 0.2, 0.10),
    (0.50, 0.9, 0.9, 0.1, 0.06),
    (0.70, 0.9, 0.5, 0.1, 0.12),
    (0.95, 0.9, 0.1, 0.1, 0.08),
    (1.00, 0.9, 0.1, 0.5, 0.08),
]


def void_tf(void_alpha: float) -> TransferFunction:
    ctrl = [(x, r, g, b, void_alpha if x <= 0.30 else a)
            for (x, r, g, b, a) in VOID_TF_CTRL]
    return TransferFunction.from_control_points(ctrl, domain=(0.0, 1.0), size=64)


def test_a6_skipping_correctness():
    with report("A6"):
        mesh = generate_synthetic(8, "voidblock", Centering.VERTEX)
        scene = Scene.build(mesh, void_tf(0.0),
                            kd_config=KdBuildConfig(max_leaf_elements=5))
        vlo, vhi = VOID_LO * 8.0, VOID_HI * 8.0
        inside = [p for p in scene.partitions
                  if (p.bounds.lo >= vlo - 1e-9).all()
                  and (p.bounds.hi <= vhi + 1e-9).all()]
        assert len(inside) >= 1, "no partition lies fully inside the void"
        assert all(not p.meta.active for p in inside)

        cam = Camera(position=[22, 14, 18], look_at=[4, 4, 4], up=[0, 1, 0],
                     fov_y_deg=38.0, width=128, height=128)
        params = AdaptiveParams(s1=0.05, s2=0.4, p=2.0,
                                termination_opacity=0.9999)
        _, st_skip = render(scene, cam, "skip", params)
        for p in inside:
            assert st_skip.per_partition_samples[p.id] == 0
        _, st_ref = render(scene, cam, "reference", params)
        transparent_ratio = st_ref.total_samples / st_skip.total_samples

        # slightly opaque void: SkipOnly's reduction collapses,
        # SkipAdaptive keeps >= 1.5x
        scene.set_transfer_function(void_tf(0.03))
        assert all(p.meta.active for p in scene.partitions)
        _, st_ref2 = render(scene, cam, "reference", params)
        _, st_skip2 = render(scene, cam, "skip", params)
        _, st_ad2 = render(scene, cam, "skip-adaptive", params)
        skip_ratio = st_ref2.total_samples / st_skip2.total_samples
        adaptive_ratio = st_ref2.total_samples / st_ad2.total_samples
        assert skip_ratio < 1.15, skip_ratio
        assert skip_ratio < transparent_ratio
        assert adaptive_ratio >= 1.5, adaptive_ratio


def test_a7_tf_update_decoupling(rng):
    with report("A7"):
        mesh = generate_synthetic(4, "radial", Centering.VERTEX)
        tf0 = TransferFunction.constant([1, 1, 1, 0.5], domain=(0.0, 3.5))
        scene = Scene.build(mesh, tf0, kd_config=KdBuildConfig(16))
        builds0 = scene.counters["partition_bvh_builds"]
        metas0 = scene.counters["meta_updates"]
        global_builds0 = traversal_mod.BUILD_COUNT

        mesh_obj, sampler_obj = scene.mesh, scene.sampler

        class Guard:
            def __getattr__(self, name):
                raise AssertionError(f"per-element data touched via {name!r}")

        scene.mesh = Guard()
        scene.sampler = Guard()
        try:
            for i in range(100):
                table = rng.random((32, 4))
                update_transfer_function(scene, TransferFunction((0.0, 3.5), table))
        finally:
            scene.mesh = mesh_obj
            scene.sampler = sampler_obj

        assert scene.counters["meta_updates"] == metas0 + 100
        assert scene.counters["partition_bvh_builds"] == builds0
        assert traversal_mod.BUILD_COUNT == global_builds0


def test_a8_determinism(tmp_path):
    with report("A8"):
        from golden_scene import write_golden_scene
        from tetray.cli import main as cli_main
        scene_path = write_golden_scene(tmp_path)

        images = []
        for run in range(2):
            for threads in ("1", "2"):
                out = tmp_path / f"img_{run}_{threads}.ppm"
                rc = cli_main(["render", "--scene", str(scene_path),
                               "--threads", threads, "--out", str(out)])
                assert rc == 0
                images.append(out.read_bytes())
        assert len(set(images)) == 1

        csvs = []
        for run in range(2):
            for threads in ("1", "2"):
                out = tmp_path / f"sweep_{run}_{threads}.csv"
                rc = cli_main(["bench", "--scene", str(scene_path),
                               "--sweep-s2", "0.05:0.4:4", "--no-timing",
                               "--threads", threads, "--out", str(out)])
                assert rc == 0
                csvs.append(out.read_bytes())
        assert len(set(csvs)) == 1


def test_a9_viewer_round_trip():
    with report("A9"):
        mesh = generate_synthetic(2, "radial", Centering.VERTEX)
        tf = TransferFunction((0.0, 1.8), np.array(
            [[0, 0, 1, 0.05], [0, 1, 0, 0.5], [1, 0, 0, 0.8]], dtype=float))
        scene = Scene.build(mesh, tf, kd_config=KdBuildConfig(10))
        cam = Camera(position=[6, 4, 5], look_at=[1, 1, 1], up=[0, 1, 0],
                     fov_y_deg=40.0, width=24, height=24)
        params = AdaptiveParams(s1=0.05, s2=0.2, p=2.0)
        srv = ViewerServer(scene, cam, params, mode="skip-adaptive", port=0)
        srv.start()
        client = None
        try:
            client = WsClient.connect("127.0.0.1", srv.port)
            client.settimeout(20.0)
            client.recv()  # hello

            new_tf = {"domain": [0.0, 1.8],
                      "rgba": [[0.2, 0.3, 0.9, 0.1], [0.9, 0.4, 0.1, 0.6]]}
            client.send(pack_json({"type": "SetTransferFunction", **new_tf}))
            client.send(pack_json({"type": "RequestFrame",
                                   "width": 24, "height": 24}))

            # drain until quiescent, keep the last frame
            frames = []
            client.settimeout(1.5)
            while True:
                try:
                    msg = client.recv()
                except OSError:
                    break
                tag, body = unpack_envelope(msg[1])
                if tag == 2:
                    frames.append(decode_frame_message(body))
            client.settimeout(20.0)
            assert frames
            from tetray.imgio import quantize
            fb, _ = render(scene, cam, "skip-adaptive", params)
            assert frames[-1][1] == quantize(fb.rgba).tobytes()

            # 10 coalesced camera edits == one render at the last camera
            positions = [[6.0 + 0.05 * i, 4.0, 5.0] for i in range(10)]
            for pos in positions:
                client.send(pack_json({"type": "SetCamera", "position": pos,
                                       "look_at": [1, 1, 1], "up": [0, 1, 0],
                                       "fov_y_deg": 40.0}))
            frames = []
            client.settimeout(1.5)
            while True:
                try:
                    msg = client.recv()
                except OSError:
                    break
                tag, body = unpack_envelope(msg[1])
                if tag == 2:
                    frames.append(decode_frame_message(body))
            assert frames
            last_cam = Camera(position=positions[-1], look_at=[1, 1, 1],
                              up=[0, 1, 0], fov_y_deg=40.0, width=24, height=24)
            fb, _ = render(scene, last_cam, "skip-adaptive", params)
            assert frames[-1][1] == quantize(fb.rgba).tobytes()
            ids = [f[0]["frame_id"] for f in frames]
            assert ids == sorted(ids)
        finally:
            if client is not None:
                client.close()
            srv.stop()
