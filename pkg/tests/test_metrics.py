import numpy as np
import pytest

from peelkit import (EmptyCloud, EmptyMesh, chamfer_distance, evaluate,
                     point_to_surface, sample_surface)
from peelkit.metrics import chamfer_directional

import fixtures
import oracles


class TestChamfer:
    def test_identical_clouds_zero(self):
        pts = np.random.default_rng(0).random((200, 3))
        assert chamfer_distance(pts, pts) == 0.0

    def test_single_pair(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[0.1, 0.0, 0.0]])
        assert chamfer_distance(a, b) == pytest.approx(0.01, abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = rng.uniform(-1, 1, (500, 3))
            b = rng.uniform(-1, 1, (400, 3))
            assert abs(chamfer_distance(a, b) - oracles.brute_chamfer(a, b)) < 1e-12

    def test_symmetry_exact(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((300, 3))
        b = rng.standard_normal((250, 3))
        assert chamfer_distance(a, b) == chamfer_distance(b, a)

    def test_directional_terms_average(self):
        rng = np.random.default_rng(3)
        a = rng.random((100, 3))
        b = rng.random((120, 3))
        fwd, bwd = chamfer_directional(a, b)
        rev_fwd, rev_bwd = chamfer_directional(b, a)
        assert (fwd, bwd) == (rev_bwd, rev_fwd)
        assert chamfer_distance(a, b) == pytest.approx(0.5 * (fwd + bwd),
                                                       rel=1e-15)

    def test_empty_cloud(self):
        with pytest.raises(EmptyCloud):
            chamfer_distance(np.zeros((0, 3)), np.zeros((5, 3)))


class TestPointToSurface:
    def test_on_surface_points(self):
        mesh = fixtures.icosphere(3)
        pts = sample_surface(mesh, 500, seed=4)
        assert point_to_surface(pts.points, mesh) < 1e-9

    def test_plane_offset(self):
        mesh = fixtures.quad(z=0.0, half=5.0)
        pts = np.array([[0.3, -0.2, 0.2], [1.0, 1.0, 0.2]])
        assert point_to_surface(pts, mesh) == pytest.approx(0.2, abs=1e-12)

    def test_matches_all_faces_oracle(self):
        mesh = fixtures.bumpy_sphere(3, seed=5)
        assert len(mesh.faces) >= 1000
        rng = np.random.default_rng(6)
        pts = rng.uniform(-1.5, 1.5, (300, 3))
        ref = oracles.brute_point_triangle_distance(pts, mesh).mean()
        assert abs(point_to_surface(pts, mesh) - ref) < 1e-12

    def test_translation_invariance(self):
        mesh = fixtures.bumpy_sphere(2, seed=7)
        rng = np.random.default_rng(8)
        pts = rng.uniform(-1.5, 1.5, (200, 3))
        base = point_to_surface(pts, mesh)
        shift = np.array([3.25, -1.5, 0.75])
        moved = fixtures.TriangleMesh(mesh.vertices + shift, mesh.faces)
        assert abs(point_to_surface(pts + shift, moved) - base) < 1e-9

    def test_empty_inputs(self):
        mesh = fixtures.cube()
        with pytest.raises(EmptyCloud):
            point_to_surface(np.zeros((0, 3)), mesh)
        empty = fixtures.TriangleMesh(np.zeros((0, 3)),
                                      np.zeros((0, 3), dtype=np.int64))
        with pytest.raises(EmptyMesh):
            point_to_surface(np.zeros((5, 3)), empty)


class TestSampleSurface:
    def test_count_and_determinism(self):
        mesh = fixtures.icosphere(2)
        a = sample_surface(mesh, 1000, seed=9)
        b = sample_surface(mesh, 1000, seed=9)
        assert a.points.shape == (1000, 3)
        np.testing.assert_array_equal(a.points, b.points)

    def test_samples_lie_on_surface(self):
        mesh = fixtures.cube(size=2.0)
        pts = sample_surface(mesh, 500, seed=10).points
        # every cube-surface point has one coordinate at +-1
        assert np.all(np.isclose(np.abs(pts), 1.0, atol=1e-12).any(axis=1))


class TestEvaluate:
    def test_report_fields(self):
        mesh = fixtures.icosphere(3)
        pred = sample_surface(mesh, 800, seed=11)
        gt = sample_surface(mesh, 800, seed=12)
        report = evaluate(pred, mesh, gt)
        d = report.to_dict()
        for key in ("chamfer", "p2s", "pred_to_gt", "gt_to_pred", "CD", "P2S"):
            assert key in d
        assert d["CD"] == d["chamfer"]
        assert report.p2s < 1e-9
        assert report.chamfer < 1e-2
