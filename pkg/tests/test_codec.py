import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peelkit import (ColoredPointCloud, EmptyMesh, PeeledMapStack,
                     PinholeCamera, decode_pointcloud, encode_peeled,
                     point_to_surface, read_peel, subsample_uniform,
                     write_peel)
from peelkit.codec import export_depth_png
from peelkit.errors import InvalidFormat
from peelkit.geometry import TriangleMesh

import fixtures
import oracles


class TestEncode:
    def test_sphere_center_pixel_depths(self, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 4)
        np.testing.assert_allclose(stack.depth[:, 32, 32], [1.5, 3.5, 0, 0],
                                   atol=5e-3)

    def test_mesh_behind_camera_all_background(self):
        mesh = fixtures.icosphere(2, 1.0, (0, 0, -3.0))
        stack = encode_peeled(mesh, fixtures.simple_camera(32), 4)
        assert np.all(stack.depth == 0)

    def test_parallel_quads_exact(self):
        mesh = fixtures.quad(1.0)
        far = fixtures.quad(2.0)
        both = TriangleMesh(np.vstack([mesh.vertices, far.vertices]),
                            np.vstack([mesh.faces, far.faces + 4]))
        stack = encode_peeled(both, fixtures.simple_camera(32), 4)
        np.testing.assert_allclose(stack.depth[0], 1.0, atol=1e-9)
        np.testing.assert_allclose(stack.depth[1], 2.0, atol=1e-9)
        assert np.all(stack.depth[2:] == 0)

    def test_empty_mesh_raises(self):
        degenerate = TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
        with pytest.raises(EmptyMesh):
            encode_peeled(degenerate, fixtures.simple_camera(16), 4)

    def test_rgb_interpolation(self):
        mesh = fixtures.icosphere(3, 1.0, (0, 0, 2.5), colors=True)
        stack = encode_peeled(mesh, fixtures.simple_camera(64), 4)
        assert stack.rgb is not None
        fg = stack.depth > 0
        assert np.all(stack.rgb[~fg] == 0)
        assert stack.rgb[fg].min() >= 0 and stack.rgb[fg].max() <= 1

    def test_invariants_fuzz(self):
        for seed in range(5):
            mesh = fixtures.triangle_soup(200, seed=seed, center=(0, 0, 2.5))
            cam = fixtures.simple_camera(48)
            stack = encode_peeled(mesh, cam, 4)
            stack.validate()  # monotone layers, background suffix, finite

    def test_repeat_runs_bit_identical(self, sphere_scene):
        mesh, cam = sphere_scene
        a = encode_peeled(mesh, cam, 4)
        b = encode_peeled(mesh, cam, 4)
        np.testing.assert_array_equal(a.depth, b.depth)


class TestDecode:
    def test_empty_stack_empty_cloud(self):
        stack = PeeledMapStack(np.zeros((4, 8, 8)), fixtures.simple_camera(8))
        assert len(decode_pointcloud(stack)) == 0

    def test_principal_point_pixel(self):
        cam = PinholeCamera(fx=100, fy=100, cx=16.5, cy=16.5, width=32, height=32)
        depth = np.zeros((1, 32, 32))
        depth[0, 16, 16] = 2.0
        cloud = decode_pointcloud(PeeledMapStack(depth, cam))
        np.testing.assert_allclose(cloud.points[0], [0, 0, 2.0], atol=1e-12)

    def test_round_trip_on_sphere_surface(self, sphere_scene):
        mesh, cam = sphere_scene
        cloud = decode_pointcloud(encode_peeled(mesh, cam, 4))
        r = np.linalg.norm(cloud.points - np.array([0, 0, 2.5]), axis=1)
        assert np.abs(r - 1.0).max() < 5e-3

    def test_round_trip_exact_on_mesh(self, sphere_scene):
        mesh, cam = sphere_scene
        cloud = decode_pointcloud(encode_peeled(mesh, cam, 4))
        assert point_to_surface(cloud, mesh) < 1e-6

    def test_point_count_equals_foreground_pixels(self, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 4)
        assert len(decode_pointcloud(stack)) == stack.foreground_count()

    def test_nonidentity_pose_round_trip(self):
        a = np.deg2rad(25)
        pose = np.eye(4)
        pose[:3, :3] = [[np.cos(a), 0, np.sin(a)], [0, 1, 0],
                        [-np.sin(a), 0, np.cos(a)]]
        pose[:3, 3] = [0.2, -0.1, 2.5]
        cam = PinholeCamera(fx=64, fy=64, cx=32, cy=32, width=64, height=64,
                            pose=pose)
        mesh = fixtures.icosphere(3, 0.8, (0.0, 0.0, 0.0))
        cloud = decode_pointcloud(encode_peeled(mesh, cam, 4))
        assert len(cloud) > 0
        r = np.linalg.norm(cloud.points, axis=1)  # world-space sphere at origin
        assert np.abs(r - 0.8).max() < 5e-3


class TestSubsample:
    def test_at_target_returns_unchanged(self, rng):
        cloud = ColoredPointCloud(rng.normal(size=(100, 3)))
        assert subsample_uniform(cloud, 100, seed=0) is cloud

    def test_exact_count_and_determinism(self, rng):
        cloud = ColoredPointCloud(rng.normal(size=(50_000, 3)))
        a = subsample_uniform(cloud, 20_000, seed=7)
        b = subsample_uniform(cloud, 20_000, seed=7)
        assert len(a) == 20_000
        np.testing.assert_array_equal(a.points, b.points)

    @given(seed=st.integers(0, 2**32 - 1), target=st.integers(1, 400))
    @settings(max_examples=25, deadline=None)
    def test_subset_property(self, seed, target):
        pts = np.arange(400 * 3, dtype=np.float64).reshape(-1, 3)
        out = subsample_uniform(ColoredPointCloud(pts), target, seed=seed)
        assert len(out) == min(target, 400)
        rows = {tuple(p) for p in pts}
        assert all(tuple(p) in rows for p in out.points)

    def test_carries_colors_and_layers(self, rng):
        cloud = ColoredPointCloud(rng.normal(size=(500, 3)),
                                  colors=rng.random((500, 3)),
                                  layer_id=rng.integers(0, 4, 500))
        out = subsample_uniform(cloud, 100, seed=1)
        assert out.colors.shape == (100, 3)
        assert out.layer_id.shape == (100,)


class TestPeelContainer:
    def test_header_and_round_trip(self, tmp_path, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 4)
        path = tmp_path / "s.peel"
        write_peel(path, stack)
        raw = path.read_bytes()
        assert raw[:4] == b"PEEL" and raw[4] == 1
        back = read_peel(path)
        assert back.layers == 4 and back.width == 64 and back.height == 64
        np.testing.assert_array_equal(back.depth,
                                      stack.depth.astype("<f4").astype(np.float64))

    def test_rgb_flag(self, tmp_path):
        mesh = fixtures.icosphere(2, 1.0, (0, 0, 2.5), colors=True)
        stack = encode_peeled(mesh, fixtures.simple_camera(16), 2)
        path = tmp_path / "rgb.peel"
        write_peel(path, stack)
        assert path.read_bytes()[5] & 1
        back = read_peel(path)
        assert back.rgb is not None

    def test_write_is_bit_stable(self, tmp_path, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 4)
        a, b = tmp_path / "a.peel", tmp_path / "b.peel"
        write_peel(a, stack)
        write_peel(b, stack)
        assert a.read_bytes() == b.read_bytes()

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.peel"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(InvalidFormat):
            read_peel(path)

    def test_missing_sidecar_rejected(self, tmp_path, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 2)
        path = tmp_path / "s.peel"
        write_peel(path, stack)
        (tmp_path / "s.camera.json").unlink()
        with pytest.raises(InvalidFormat):
            read_peel(path)

    def test_png_export(self, tmp_path, sphere_scene):
        mesh, cam = sphere_scene
        stack = encode_peeled(mesh, cam, 4)
        out = tmp_path / "layer0.png"
        export_depth_png(out, stack, 0, vmin=1.0, vmax=4.0)
        assert out.stat().st_size > 0


class TestStackValidation:
    def test_detects_depth_inversion(self):
        depth = np.zeros((2, 4, 4))
        depth[0] = 2.0
        depth[1] = 1.0
        with pytest.raises(ValueError):
            PeeledMapStack(depth, fixtures.simple_camera(4)).validate()

    def test_detects_background_gap(self):
        depth = np.zeros((2, 4, 4))
        depth[1, 1, 1] = 1.0  # layer 0 background but layer 1 set
        with pytest.raises(ValueError):
            PeeledMapStack(depth, fixtures.simple_camera(4)).validate()

    def test_detects_nan(self):
        depth = np.zeros((1, 4, 4))
        depth[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            PeeledMapStack(depth, fixtures.simple_camera(4)).validate()
