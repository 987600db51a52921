import math

import numpy as np
import pytest
from scipy.stats import qmc

from hyperradon.directions import (
    GOLDEN_ANGLE,
    DirectionSet,
    circle_equispaced,
    explicit,
    fibonacci_sphere,
    inverse_normal_cdf,
    parse_direction_spec,
    sobol_points,
    sobol_sphere_s3,
    spherical_grid,
    write_directions_csv,
)

# standard normal quantiles at 40 digits (mpmath: sqrt(2) erfinv(2p - 1))
NORMAL_QUANTILES = [
    (1e-10, -6.361340902404056199100397),
    (3e-09, -5.816757740125828170087747),
    (1e-07, -5.19933758219281693999921),
    (1e-05, -4.264890793922824610233749),
    (0.001, -3.090232306167813535358005),
    (0.01, -2.326347874040841093075096),
    (0.02, -2.053748910631823044338639),
    (0.02425, -1.972961051311884837602748),
    (0.05, -1.644853626951472687952128),
    (0.1, -1.281551565544600435334517),
    (0.2, -0.8416212335729141655224906),
    (0.3, -0.5244005127080408159694544),
    (0.4, -0.2533471031357997413246887),
    (0.45, -0.1256613468550740061604284),
    (0.499, -0.002506630899571766231698791),
    (0.5, 0.0),
    (0.501, 0.002506630899571766231698791),
    (0.6, 0.2533471031357997413246887),
    (0.75, 0.674489750196081743202227),
    (0.9, 1.281551565544600593487448),
    (0.97, 1.880793608151250547266465),
    (0.97575, 1.972961051311884959401313),
    (0.98, 2.053748910631822686058948),
    (0.999, 3.090232306167813277758202),
    (0.99999, 4.264890793923840769947835),
    (0.9999999, 5.199337582290661093657356),
    (0.9999999999, 6.361340889697421864155442),
]

# frozen regression values
FIB128_MIN_GEODESIC = 0.27404066486151996
SOBOL128_MEAN_NORM = 0.01058247392539396


def assert_unit(dirs):
    np.testing.assert_allclose(np.linalg.norm(dirs.points, axis=1), 1.0, rtol=0, atol=1e-12)


class TestCircle:
    def test_two(self):
        np.testing.assert_array_equal(circle_equispaced(2).points, [[1, 0], [0, 1]])

    def test_four_has_diagonal(self):
        pts = circle_equispaced(4).points
        assert np.any(np.all(np.abs(pts - 2**-0.5) < 1e-15, axis=1))

    @pytest.mark.parametrize("n", [1, 3, 7, 128])
    def test_unit(self, n):
        assert_unit(circle_equispaced(n))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            circle_equispaced(0)


class TestSphericalGrid:
    def test_equator_point(self):
        g = spherical_grid(4, 3)
        # phi1 = 0, phi2 = pi/2
        assert g.points[g.grid_index[0, 1]].tolist() == [0.0, 1.0, 0.0]

    def test_pole_deduplicated(self):
        g = spherical_grid(5, 4)
        assert np.all(g.grid_index[:, 0] == g.grid_index[0, 0])
        assert g.points[g.grid_index[3, 0]].tolist() == [0.0, 0.0, 1.0]
        assert g.points[g.grid_index[3, -1]].tolist() == [0.0, 0.0, -1.0]

    def test_count(self):
        assert len(spherical_grid(30, 21)) == 572

    def test_single_ring(self):
        g = spherical_grid(6, 1)
        assert len(g) == 1 and g.points[0].tolist() == [0.0, 0.0, 1.0]

    def test_grid_index_reproduces_angles(self):
        g = spherical_grid(8, 5)
        phi1, phi2 = g.angles
        for i in range(8):
            for j in range(5):
                p = g.points[g.grid_index[i, j]]
                want = [math.sin(phi1[i]) * math.sin(phi2[j]), math.cos(phi1[i]) * math.sin(phi2[j]), math.cos(phi2[j])]
                np.testing.assert_allclose(p, want, atol=1e-15)

    def test_unit(self):
        assert_unit(spherical_grid(30, 21))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            spherical_grid(0, 3)


class TestFibonacci:
    def test_single_point(self):
        p = fibonacci_sphere(1).points[0]
        assert p[2] == 0.0
        assert p[0] == pytest.approx(0.675490, abs=1e-6) and p[1] == pytest.approx(-0.737369, abs=1e-6)
        assert p[0] == math.sin(GOLDEN_ANGLE) and p[1] == math.cos(GOLDEN_ANGLE)

    def test_two_points(self):
        assert fibonacci_sphere(2).points[:, 2].tolist() == [0.5, -0.5]

    @pytest.mark.parametrize("n", [1, 5, 64, 300])
    def test_z_closed_form(self, n):
        i = np.arange(1, n + 1)
        assert np.array_equal(fibonacci_sphere(n).points[:, 2], 1.0 - (2.0 * i - 1.0) / n)

    def test_min_geodesic_128(self):
        pts = fibonacci_sphere(128).points
        g = np.arccos(np.clip(pts @ pts.T, -1, 1))
        np.fill_diagonal(g, np.inf)
        assert g.min() > 0.1
        assert g.min() == pytest.approx(FIB128_MIN_GEODESIC, rel=1e-12)

    def test_unit_and_deterministic(self):
        a = fibonacci_sphere(500)
        assert_unit(a)
        assert np.array_equal(a.points, fibonacci_sphere(500).points)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            fibonacci_sphere(0)


class TestSobol:
    def test_matches_reference_generator(self):
        ref = qmc.Sobol(4, scramble=False).random(1024)
        assert np.array_equal(sobol_points(1024), ref)

    def test_offset_slice(self):
        assert np.array_equal(sobol_points(10, start=37), sobol_points(47)[37:])

    def test_first_points(self):
        pts = sobol_points(3)
        assert pts[0].tolist() == [0, 0, 0, 0] and pts[1].tolist() == [0.5] * 4

    def test_centre_point_is_skipped(self):
        # index 1 maps to the zero vector, so the first output comes from index 2
        first = sobol_sphere_s3(1, seed_skip=1).points[0]
        g = inverse_normal_cdf(sobol_points(1, start=2)[0])
        np.testing.assert_allclose(first, g / np.linalg.norm(g), rtol=0, atol=1e-15)
        assert np.array_equal(sobol_sphere_s3(5, seed_skip=1).points, sobol_sphere_s3(5, seed_skip=2).points)

    def test_unit(self):
        assert_unit(sobol_sphere_s3(200))

    def test_mean_vector(self):
        m = np.linalg.norm(sobol_sphere_s3(128).points.mean(axis=0))
        assert m < 0.15
        assert m == pytest.approx(SOBOL128_MEAN_NORM, rel=1e-9)

    def test_deterministic(self):
        assert np.array_equal(sobol_sphere_s3(64).points, sobol_sphere_s3(64).points)

    def test_rejects_origin(self):
        with pytest.raises(ValueError):
            sobol_sphere_s3(4, seed_skip=0)


class TestInverseNormal:
    def test_reference_table(self):
        err = max(abs(inverse_normal_cdf(p) - q) for p, q in NORMAL_QUANTILES)
        assert err < 1e-9

    def test_vectorised(self):
        ps = np.array([p for p, _ in NORMAL_QUANTILES])
        qs = np.array([q for _, q in NORMAL_QUANTILES])
        np.testing.assert_allclose(inverse_normal_cdf(ps), qs, rtol=0, atol=1e-9)

    def test_antisymmetric(self):
        # dyadic p so that 1 - p is exact
        for p in (2.0**-30, 0.125, 0.3125):
            assert inverse_normal_cdf(p) == -inverse_normal_cdf(1 - p)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_rejects(self, p):
        with pytest.raises(ValueError):
            inverse_normal_cdf(p)


class TestSetAndSpec:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            DirectionSet(np.array([[1.0, 1.0]]))

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            DirectionSet(np.array([[1.0, 0.0], [1.0, 0.0]]))

    def test_explicit_normalises(self):
        assert explicit([[3.0, 4.0]]).points.tolist() == [[0.6, 0.8]]

    @pytest.mark.parametrize(
        "spec, n, d", [("fibonacci:256", 256, 3), ("grid:30,21", 572, 3), ("circle:8", 8, 2), ("sobol:16", 16, 4)]
    )
    def test_spec(self, spec, n, d):
        dirs = parse_direction_spec(spec)
        assert len(dirs) == n and dirs.d == d

    @pytest.mark.parametrize("spec", ["fib:3", "grid:3", "circle:x", "sobol:0", "nonsense"])
    def test_bad_spec(self, spec):
        with pytest.raises(ValueError):
            parse_direction_spec(spec)

    def test_csv(self, tmp_path):
        p = tmp_path / "d.csv"
        write_directions_csv(p, circle_equispaced(3))
        lines = p.read_text().splitlines()
        assert lines[0] == "index,x1,x2" and len(lines) == 4
        assert [float(v) for v in lines[2].split(",")[1:]] == circle_equispaced(3).points[1].tolist()
