import math

import numpy as np
import pytest

from hyperradon.ingest import (
    AffineMap,
    AffineRanges,
    OffParseError,
    CLASS_TEMPLATES,
    TriangleMesh,
    affine_class_samples,
    apply_affine_voxels,
    box_mesh,
    parse_off,
    preprocess,
    random_affine,
    random_rotation,
    sample_two_cluster_cloud,
    serialize_off,
    symmetric_eigen,
    synth_shape,
    voxelize,
)
from hyperradon.voxel import VoxelImage

TETRA = """OFF
# a tetrahedron
4 4 0
0 0 0
1 0 0
0 1 0
0 0 1
3 0 1 2
3 0 1 3
3 0 2 3
3 1 2 3
"""


def octahedron(r=0.4):
    v = np.array([[r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0], [0, 0, r], [0, 0, -r]])
    f = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    return TriangleMesh(v, np.array(f))


def centres(n):
    s = 1.0 / n
    c = s * (np.arange(n) - (n - 1) / 2)
    return np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1)


class TestOff:
    def test_tetrahedron(self):
        mesh = parse_off(TETRA)
        assert mesh.vertices.shape == (4, 3) and mesh.faces.shape == (4, 3)

    def test_quad_fan(self):
        mesh = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
        assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_missing_vertex(self):
        with pytest.raises(OffParseError) as info:
            parse_off("OFF\n5 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n")
        assert info.value.line == 7 and "vertex 5" in str(info.value)

    def test_glued_header_and_no_header(self):
        glued = parse_off("OFF4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n")
        bare = parse_off("4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n")
        assert np.array_equal(glued.faces, bare.faces) and np.array_equal(glued.vertices, bare.vertices)

    def test_colour_tokens_ignored(self):
        mesh = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2 255 0 0\n")
        assert mesh.faces.tolist() == [[0, 1, 2]]

    @pytest.mark.parametrize(
        "text, line",
        [
            ("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n", 4),
            ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n", 6),
            ("OFF\nthree 1 0\n", 2),
            ("OFF\n3 1 0\n0 0 0\n1 0\n0 1 0\n3 0 1 2\n", 4),
            ("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", 7),
        ],
    )
    def test_errors_have_line_numbers(self, text, line):
        with pytest.raises(OffParseError) as info:
            parse_off(text)
        assert info.value.line == line

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        mesh = TriangleMesh(rng.normal(size=(20, 3)), rng.integers(0, 20, size=(15, 3)))
        back = parse_off(serialize_off(mesh))
        assert np.array_equal(back.vertices, mesh.vertices) and np.array_equal(back.faces, mesh.faces)

    def test_index_validation(self):
        with pytest.raises(ValueError):
            TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])


class TestVoxelize:
    def test_unit_cube_fills_grid(self):
        im = voxelize(box_mesh([0, 0, 0], [1, 1, 1]), 4, fill=True)
        # the scaled cube spans [-0.45, 0.45]^3 and contains every centre
        inside = np.all(np.abs(centres(4)) < 0.45, axis=-1)
        assert np.array_equal(im.values.astype(bool), inside) and inside.all()
        assert im.voxel_size == 0.25

    def test_fill_matches_point_in_octahedron(self):
        n = 24
        im = voxelize(octahedron(), n, fill=True, normalize=False)
        pts = centres(n)
        inside = np.sum(np.abs(pts), axis=-1) < 0.4
        occ = im.values.astype(bool)
        # every centre strictly inside is set; extra voxels touch the surface
        assert np.all(occ[inside])
        surface_only = voxelize(octahedron(), n, fill=False, normalize=False).values.astype(bool)
        assert np.array_equal(occ & ~inside, surface_only & ~inside)

    def test_tiny_triangle(self):
        s = 1 / 8
        c = s * (np.array([5, 2, 3]) - 3.5)
        tri = TriangleMesh(c + 0.01 * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]]), [[0, 1, 2]])
        im = voxelize(tri, 8, fill=False, normalize=False)
        assert im.values.sum() == 1 and im.values[5, 2, 3] == 1

    def test_degenerate_triangle(self):
        seg = TriangleMesh(np.array([[-0.3, 0.01, 0.01], [0.3, 0.01, 0.01], [0.0, 0.01, 0.01]]), [[0, 1, 2]])
        im = voxelize(seg, 8, fill=True, normalize=False)
        # the segment runs through one row of voxels along x
        assert im.values.sum() > 0
        assert set(np.nonzero(im.values)[1]) == {4} and set(np.nonzero(im.values)[2]) == {4}

    def test_translation_consistent(self):
        n = 16
        mesh = octahedron(0.27)
        a = voxelize(mesh, n, fill=True, normalize=False).values
        b = voxelize(mesh.translated([1 / n, 0, 0]), n, fill=True, normalize=False).values
        assert np.array_equal(np.roll(a, 1, axis=0)[1:], b[1:])

    def test_crack_tolerated(self):
        n = 16
        mesh = box_mesh([-0.3, -0.3, -0.3], [0.3, 0.3, 0.3])
        # drop one triangle of the top face
        cracked = TriangleMesh(mesh.vertices, mesh.faces[1:])
        full = voxelize(mesh, n, normalize=False).values
        got = voxelize(cracked, n, normalize=False).values
        assert np.abs(full - got).sum() <= 0.02 * full.sum()

    def test_rejects(self):
        with pytest.raises(ValueError):
            voxelize(octahedron(), 1)
        with pytest.raises(ValueError):
            voxelize(TriangleMesh(np.zeros((3, 3)), np.zeros((0, 3))), 8)


class TestSynth:
    def test_full_box(self):
        im = synth_shape("solid_box", {"half_widths": 0.5}, 8)
        assert im.values.all()

    def test_point_sphere(self):
        assert synth_shape("solid_sphere", {"radius": 0.0}, 9).values.sum() <= 1
        assert synth_shape("solid_sphere", {"radius": 0.0}, 8).values.sum() == 0

    def test_hemisphere_half_volume(self):
        full = synth_shape("solid_sphere", {"radius": 0.4}, 64).values.sum()
        half = synth_shape("hemisphere", {"radius": 0.4}, 64).values.sum()
        assert half == pytest.approx(full / 2, rel=0.1)

    def test_hemisphere_normal(self):
        up = synth_shape("hemisphere", {"radius": 0.3, "normal": [0, 0, 1]}, 16).values
        side = synth_shape("hemisphere", {"radius": 0.3, "normal": [1, 0, 0]}, 16).values
        assert up[:, :, :7].sum() == 0 and side[:7].sum() == 0 and up.sum() == side.sum()

    def test_shell_is_hollow(self):
        im = synth_shape("shell", {"radius": 0.4, "thickness": 0.1}, 32).values
        assert im[16, 16, 16] == 0 and im.sum() > 0

    def test_l_shape(self):
        im = synth_shape("l_shape", {"arm": 0.6, "width": 0.2, "depth": 0.2}, 20).values
        # one arm along each of the first two axes, nothing in the opposite corner
        assert im[4, 4, 10] == 1 and im[15, 4, 10] == 1 and im[4, 15, 10] == 1 and im[15, 15, 10] == 0

    def test_two_dimensional(self):
        im = synth_shape("solid_sphere", {"radius": 0.3}, 32, d=2)
        assert im.d == 2 and im.values.sum() == pytest.approx(math.pi * (0.3 * 32) ** 2, rel=0.05)

    @pytest.mark.parametrize(
        "kind, params",
        [("solid_box", {"half_widths": 0.6}), ("solid_sphere", {"radius": 0.3, "center": [0.3, 0, 0]}), ("cone", {})],
    )
    def test_rejects(self, kind, params):
        with pytest.raises(ValueError):
            synth_shape(kind, params, 16)


class TestCloud:
    def test_two_points(self):
        pts = sample_two_cluster_cloud(2, 2, 0)
        assert pts.shape == (2, 2)
        assert np.all((pts[0] >= -1) & (pts[0] <= -0.5)) and np.all((pts[1] >= 0.5) & (pts[1] <= 1))

    def test_boxes_and_means(self):
        pts = sample_two_cluster_cloud(40, 2, 3)
        assert np.all((pts[:20] >= -1) & (pts[:20] <= -0.5)) and np.all((pts[20:] >= 0.5) & (pts[20:] <= 1))
        np.testing.assert_allclose(pts[:20].mean(0), -0.75, atol=0.15)
        np.testing.assert_allclose(pts[20:].mean(0), 0.75, atol=0.15)

    def test_odd_rejected(self):
        with pytest.raises(ValueError):
            sample_two_cluster_cloud(3)


class TestAffine:
    def test_identity(self):
        im = VoxelImage(np.random.default_rng(0).random((6, 6, 6)), 1 / 6)
        assert np.array_equal(apply_affine_voxels(im, AffineMap.identity()).values, im.values)

    def test_shift_one_voxel(self):
        im = VoxelImage(np.random.default_rng(1).random((6, 5, 4)), 0.25)
        out = apply_affine_voxels(im, AffineMap(np.eye(3), [0.25, 0, 0])).values
        assert np.array_equal(out[1:], im.values[:-1]) and not out[0].any()

    def test_quarter_turn_group(self):
        rng = np.random.default_rng(2)
        vals = rng.random((8, 8, 8)) * (rng.random((8, 8, 8)) > 0.5)
        im = VoxelImage(vals, 1 / 8)
        rot = AffineMap([[math.cos(math.pi / 2), -1, 0], [1, math.cos(math.pi / 2), 0], [0, 0, 1]], np.zeros(3))
        out = im
        for _ in range(4):
            out = apply_affine_voxels(out, rot)
        assert np.array_equal(out.values, vals)
        once = apply_affine_voxels(im, rot).values
        assert not np.array_equal(once, vals)

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            AffineMap(np.diag([1.0, 1.0, 0.0]), np.zeros(3))

    def test_random_affine_reproducible(self):
        a = random_affine(5)
        b = random_affine(5)
        assert np.array_equal(a.A, b.A) and np.array_equal(a.y, b.y)

    def test_determinant_bounds(self):
        for seed in range(50):
            det = np.linalg.det(random_affine(seed).A)
            assert 0.7**3 - 1e-12 <= det <= 1.3**3 + 1e-12 and det > 0.1

    def test_zero_ranges(self):
        m = random_affine(7, AffineRanges.zero())
        assert np.array_equal(m.A, np.eye(3)) and np.array_equal(m.y, np.zeros(3))

    def test_rotation_is_orthogonal(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            R = random_rotation(rng)
            np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_rotation_angle_cap(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            R = random_rotation(rng, 3, 0.3)
            angle = math.acos(np.clip((np.trace(R) - 1) / 2, -1, 1))
            assert angle <= 0.3 + 1e-9

    def test_haar_angle_law(self):
        # Haar rotation angles have density (1 - cos w) / pi on [0, pi]
        rng = np.random.default_rng(10)
        angles = np.array([math.acos(np.clip((np.trace(random_rotation(rng)) - 1) / 2, -1, 1)) for _ in range(4000)])
        assert np.mean(angles) == pytest.approx(math.pi / 2 + 2 / math.pi, abs=0.05)


class TestEigen:
    def test_diagonal_exact(self):
        w, V = symmetric_eigen(np.diag([2.0, 5.0, -1.0]))
        assert w.tolist() == [5.0, 2.0, -1.0]

    def test_residual(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            M = rng.normal(size=(3, 3))
            C = M + M.T
            w, V = symmetric_eigen(C)
            assert np.all(np.diff(w) <= 0)
            for k in range(3):
                assert np.linalg.norm(C @ V[:, k] - w[k] * V[:, k]) <= 1e-9 * np.linalg.norm(C)


class TestPreprocess:
    def test_mass_normalised(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            im = VoxelImage(rng.random((10, 10, 10)) * (rng.random((10, 10, 10)) > 0.7), 0.1)
            assert preprocess(im).mass() == pytest.approx(1.0, abs=1e-9)

    def test_centred_box_keeps_shape(self):
        im = synth_shape("solid_box", {"half_widths": [0.3, 0.2, 0.1]}, 32)
        out = preprocess(im)
        assert out.mass() == pytest.approx(1.0, abs=1e-9)
        # still an axis-aligned box, stretched to fill the grid along x
        occ = out.values > 0
        xs = np.nonzero(occ.any(axis=(1, 2)))[0]
        assert xs.min() <= 1 and xs.max() >= 30

    def test_shift_invariant(self):
        a = synth_shape("solid_box", {"half_widths": [0.3, 0.2, 0.1]}, 32)
        b = synth_shape("solid_box", {"half_widths": [0.3, 0.2, 0.1], "center": [3 / 32, 0, 0]}, 32)
        assert np.array_equal(preprocess(a).values, preprocess(b).values)

    @pytest.mark.parametrize(
        "kind, params",
        [
            ("solid_box", {"half_widths": [0.35, 0.25, 0.15]}),
            ("hemisphere", {"radius": 0.4}),
            ("l_shape", {"arm": 0.6, "width": 0.2, "depth": 0.3}),
        ],
    )
    def test_idempotent(self, kind, params):
        once = preprocess(synth_shape(kind, params, 64))
        twice = preprocess(once)
        rel = np.abs(twice.values - once.values).sum() / np.abs(once.values).sum()
        assert rel < 0.05

    def test_rank_deficient_warns(self):
        vals = np.zeros((8, 8, 8))
        vals[2:6, 4, 4] = 1.0
        with pytest.warns(RuntimeWarning):
            out = preprocess(VoxelImage(vals, 1 / 8))
        assert out.mass() == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            preprocess(VoxelImage(np.zeros((4, 4, 4))))


class TestAffineClassSamples:
    def test_layout_and_ids(self):
        labels, images, ids = affine_class_samples(["box", "ball"], 3, N=16, rng_seed=4)
        assert labels == ["box"] * 3 + ["ball"] * 3
        assert ids[0] == "box_000" and len(set(ids)) == 6
        assert all(F.extents == (16, 16, 16) for F in images)

    def test_seeded(self):
        a = affine_class_samples(["lshape"], 2, N=16, rng_seed=1)[1]
        b = affine_class_samples(["lshape"], 2, N=16, rng_seed=1)[1]
        c = affine_class_samples(["lshape"], 2, N=16, rng_seed=2)[1]
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
        assert not np.array_equal(a[0].values, c[0].values)

    @pytest.mark.parametrize("name", sorted(CLASS_TEMPLATES))
    def test_stays_on_grid(self, name):
        # mass away from the boundary layer: no copy is clipped by the grid
        for F in affine_class_samples([name], 5, N=24, rng_seed=0)[1]:
            v = F.values
            assert v.sum() > 0
            for ax in range(3):
                edge = np.take(v, [0, -1], axis=ax)
                assert edge.sum() == 0

    def test_plain_shape_kind_and_errors(self):
        labels, images, _ = affine_class_samples(["solid_sphere"], 1, N=16)
        assert labels == ["solid_sphere"] and images[0].values.sum() > 0
        with pytest.raises(ValueError):
            affine_class_samples(["torus"], 1)
        with pytest.raises(ValueError):
            affine_class_samples(["box"], 0)
