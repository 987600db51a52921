import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperradon.directions import fibonacci_sphere
from hyperradon.ingest import AffineRanges, apply_affine_voxels, random_affine, synth_shape
from hyperradon.nrcdt import (
    DegenerateProjectionError,
    DiscreteCDF,
    QuantileProfile,
    cdf_from_projection,
    image_max_nrcdt,
    max_nrcdt,
    nrcdt,
    quantile,
    write_profile_csv,
    xi_grid,
)
from hyperradon.voxel import Sinogram, VoxelImage, sinogram


def orbit(theta):
    """Images of ``theta`` under axis permutations and sign flips."""
    out = set()
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            out.add(tuple(np.array(signs) * np.asarray(theta)[list(perm)]))
    return np.array(sorted(out))


class TestCDF:
    def test_constant_projection(self):
        t = np.linspace(0, 1, 11)
        c = cdf_from_projection(t, np.ones(11))
        np.testing.assert_allclose(c.cdf, t, atol=1e-15)

    def test_spike_gives_step(self):
        t = np.linspace(-1, 1, 21)
        p = np.zeros(21)
        p[13] = 5.0
        c = cdf_from_projection(t, p)
        assert np.all(c.cdf[:12] == 0)
        assert np.all(c.cdf[14:] == 1)

    def test_mass_invariance(self):
        rng = np.random.default_rng(0)
        t = np.sort(rng.uniform(-1, 1, 30))
        p = rng.random(30)
        np.testing.assert_allclose(cdf_from_projection(t, 7 * p).cdf, cdf_from_projection(t, p).cdf, atol=1e-15)

    def test_zero_projection(self):
        with pytest.raises(DegenerateProjectionError):
            cdf_from_projection(np.linspace(0, 1, 5), np.zeros(5))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            cdf_from_projection(np.linspace(0, 1, 3), [1.0, -1.0, 1.0])

    def test_invariants(self):
        rng = np.random.default_rng(1)
        c = cdf_from_projection(np.linspace(-1, 1, 50), rng.random(50))
        assert np.all(np.diff(c.cdf) >= 0)
        assert c.cdf[-1] == 1.0

    def test_bad_cdf(self):
        with pytest.raises(ValueError):
            DiscreteCDF(np.array([0.0, 1.0]), np.array([0.5, 0.4]))


class TestQuantile:
    def test_uniform(self):
        t = np.linspace(0, 1, 11)
        c = DiscreteCDF(t, t.copy())
        assert quantile(c, 0.25) == pytest.approx(0.25)

    def test_step(self):
        t = np.linspace(-1, 1, 21)
        p = np.zeros(21)
        p[7] = 1.0
        c = cdf_from_projection(t, p)
        h = t[1] - t[0]
        for xi in (0.01, 0.3, 0.5, 0.99):
            assert abs(quantile(c, xi) - t[7]) <= h + 1e-12
            assert abs(quantile(c, xi, interpolate=False) - t[7]) <= h + 1e-12

    def test_step_variant_is_grid_point_above(self):
        t = np.arange(9) / 8
        c = DiscreteCDF(t, t.copy())
        assert quantile(c, 0.3, interpolate=False) == 0.375
        # literal inf of {s : cdf(s) > xi} on the grid
        assert quantile(c, 0.25, interpolate=False) == 0.375

    def test_bounds(self):
        c = DiscreteCDF(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        for xi in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                quantile(c, xi)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1e-9, 1e-3), st.booleans())
    def test_generalized_inverse(self, seed, delta, interp):
        rng = np.random.default_rng(seed)
        t = np.cumsum(rng.uniform(0.1, 1.0, 25))
        p = rng.random(25) * (rng.random(25) > 0.3)
        p[5] = 1.0
        c = cdf_from_projection(t, p)
        for j in range(t.size):
            xi = c.cdf[j] + delta
            if 0 < xi < 1:
                assert quantile(c, xi, interp) >= t[j]

    def test_monotone_in_xi(self):
        rng = np.random.default_rng(4)
        c = cdf_from_projection(np.linspace(0, 1, 40), rng.random(40))
        q = quantile(c, xi_grid(128))
        assert np.all(np.diff(q) >= 0)


def test_xi_grid():
    g = xi_grid(4)
    np.testing.assert_allclose(g, [1 / 8, 3 / 8, 5 / 8, 7 / 8])
    assert xi_grid().size == 256


@pytest.fixture(scope="module")
def ball():
    return synth_shape("solid_sphere", {"radius": 0.3}, N=24)


class TestNRCDT:
    def test_standardised(self, ball):
        S = sinogram(ball, fibonacci_sphere(5).points, np.linspace(-0.9, 0.9, 181))
        for i in range(5):
            v = nrcdt(S, i).values
            assert abs(np.mean(v)) < 1e-12
            assert np.sqrt(np.mean(v**2)) == pytest.approx(1.0, abs=1e-12)
            assert np.all(np.diff(v) >= 0)

    def test_ball_symmetry_orbit(self, ball):
        theta = np.array([0.3, 0.5, np.sqrt(1 - 0.34)])
        dirs = orbit(theta)
        S = sinogram(ball, dirs, np.linspace(-0.9, 0.9, 181))
        ref = nrcdt(S, 0).values
        for i in range(1, len(dirs)):
            np.testing.assert_allclose(nrcdt(S, i).values, ref, atol=1e-6)
        np.testing.assert_allclose(max_nrcdt(S).values, ref, atol=1e-6)

    def test_ball_nearly_isotropic(self, ball):
        S = sinogram(ball, fibonacci_sphere(16).points, np.linspace(-0.9, 0.9, 181))
        ref = nrcdt(S, 0).values
        for i in range(1, 16):
            assert np.max(np.abs(nrcdt(S, i).values - ref)) < 0.05

    def test_dirac_like_raises(self):
        vals = np.zeros((5, 5, 5))
        vals[2, 2, 2] = 1.0
        F = VoxelImage(vals, 0.01)
        S = sinogram(F, np.array([[0.0, 0.0, 1.0]]), np.linspace(-0.5, 0.5, 11))
        with pytest.raises(DegenerateProjectionError):
            nrcdt(S, 0)

    def test_two_samples_are_valid(self):
        S = Sinogram(np.array([[1.0, 0.0]]), np.linspace(0, 1, 5), np.array([[0, 1.0, 1.0, 0, 0]]))
        # two adjacent samples: spread is positive, so this is valid
        assert np.isfinite(nrcdt(S, 0).values).all()

    @pytest.mark.parametrize("seed", range(4))
    def test_translation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        vals = np.zeros((12, 12, 12))
        vals[3:7, 4:6, 2:8] = rng.random((4, 2, 6)) + 0.5
        F = VoxelImage(vals, 1 / 12)
        k = rng.integers(-3, 4, size=3)
        G = VoxelImage(np.roll(vals, tuple(k), axis=(0, 1, 2)), 1 / 12)
        theta = rng.normal(size=3)
        theta /= np.linalg.norm(theta)
        shift = float(theta @ (k / 12))
        if abs(shift) < 1e-3:
            shift, theta, k = 1 / 12, np.array([1.0, 0, 0]), np.array([1, 0, 0])
            G = VoxelImage(np.roll(vals, 1, axis=0), 1 / 12)
        # grid spacing divides the shift, so the row moves by whole cells
        h = abs(shift) / 5
        m = int(np.ceil(1.2 / h))
        radii = h * np.arange(-m, m + 1)
        a = nrcdt(sinogram(F, theta[None], radii), 0).values
        b = nrcdt(sinogram(G, theta[None], radii), 0).values
        np.testing.assert_allclose(a, b, atol=1e-6)


class TestMax:
    def test_single_direction(self, ball):
        S = sinogram(ball, fibonacci_sphere(1).points, np.linspace(-0.9, 0.9, 101))
        assert np.array_equal(max_nrcdt(S).values, nrcdt(S, 0).values)

    def test_dominates(self):
        rng = np.random.default_rng(2)
        vals = rng.random((8, 8, 8)) * (rng.random((8, 8, 8)) > 0.6)
        S = sinogram(VoxelImage(vals, 1 / 8), fibonacci_sphere(12).points, np.linspace(-0.9, 0.9, 91))
        m = max_nrcdt(S).values
        for i in range(12):
            assert np.all(m >= nrcdt(S, i).values)

    def test_skips_degenerate(self, ball):
        S0 = sinogram(ball, fibonacci_sphere(3).points, np.linspace(-0.9, 0.9, 101))
        vals = np.vstack([S0.values, np.zeros((1, 101))])
        dirs = np.vstack([S0.directions, [[1.0, 0.0, 0.0]]])
        S = Sinogram(dirs, S0.radii, vals)
        with pytest.warns(RuntimeWarning):
            m = max_nrcdt(S)
        assert np.array_equal(m.values, max_nrcdt(S0).values)

    def test_all_degenerate(self):
        S = Sinogram(np.eye(3), np.linspace(0, 1, 5), np.zeros((3, 5)))
        with pytest.raises(DegenerateProjectionError):
            max_nrcdt(S)


def test_affine_invariance_box():
    F = synth_shape("solid_box", {"center": [0, 0, 0], "half_widths": [0.15, 0.1, 0.07]}, N=64)
    dirs = fibonacci_sphere(256)
    r = np.linspace(-np.sqrt(3) / 2, np.sqrt(3) / 2, 257)
    p0 = image_max_nrcdt(F, dirs, r).values
    ranges = AffineRanges(scale=(0.8, 1.25), shear=0.2)
    for seed in (0, 1):
        G = apply_affine_voxels(F, random_affine(seed, ranges))
        p = image_max_nrcdt(G, dirs, r).values
        assert np.max(np.abs(p - p0)) / np.max(np.abs(p0)) < 0.05


def test_profile_csv(tmp_path):
    prof = QuantileProfile(xi_grid(4), np.array([-1.0, 0.0, 0.5, 2.0]))
    p = tmp_path / "q.csv"
    write_profile_csv(p, prof, header_line="# x")
    lines = p.read_text().splitlines()
    assert lines[:2] == ["# x", "xi,value"]
    assert len(lines) == 6
    with pytest.raises(ValueError):
        QuantileProfile(xi_grid(2), np.array([1.0, 0.0]))
