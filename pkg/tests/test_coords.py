import numpy as np
import pytest

from panodepth.coords import (
    GridSpec,
    SphericalDir,
    cart_to_cyl,
    cyl_to_cart,
    dir_to_sph,
    grid_angles,
    grid_dirs,
    pixel_to_sph,
    sph_to_dir,
    sph_to_pixel,
    unit_vector,
    wrap_theta,
)

GRID = GridSpec(4096, 2048)


class TestGridSpec:
    def test_shape(self):
        assert GRID.shape == (2048, 4096)

    @pytest.mark.parametrize("w,h", [(100, 40), (1, 1), (4, 0), (2, 2)])
    def test_rejects_bad_dimensions(self, w, h):
        with pytest.raises(ValueError):
            GridSpec(w, h)


class TestSphericalDir:
    def test_theta_wraps(self):
        assert SphericalDir(185.0, 0.0).theta == -175.0
        assert SphericalDir(-180.0, 0.0).theta == -180.0
        assert SphericalDir(180.0, 0.0).theta == -180.0

    def test_phi_range_enforced(self):
        with pytest.raises(ValueError):
            SphericalDir(0.0, 90.5)
        with pytest.raises(ValueError):
            SphericalDir(0.0, -91.0)


class TestPixelToSph:
    def test_image_center_is_forward(self):
        d = pixel_to_sph(4096 / 2 - 0.5, 2048 / 2 - 0.5, GRID)
        assert d.theta == pytest.approx(0.0, abs=1e-12)
        assert d.phi == pytest.approx(0.0, abs=1e-12)

    def test_wrapped_left_edge(self):
        d = pixel_to_sph(-0.5, 2048 / 2 - 0.5, GRID)
        assert d.theta == pytest.approx(-180.0)
        assert d.phi == pytest.approx(0.0)

    def test_quarter_point(self):
        d = pixel_to_sph(1023.5, 511.5, GRID)
        assert d.theta == pytest.approx(-90.0)
        assert d.phi == pytest.approx(45.0)

    def test_vertical_out_of_range_is_error(self):
        with pytest.raises(ValueError):
            pixel_to_sph(0.0, 2048.0, GRID)
        with pytest.raises(ValueError):
            pixel_to_sph(0.0, -1.0, GRID)

    def test_horizontal_wrap(self):
        rng = np.random.default_rng(7)
        u = rng.uniform(0, GRID.width, size=200)
        v = rng.uniform(0, GRID.height - 1, size=200)
        a = pixel_to_sph(u, v, GRID)
        b = pixel_to_sph(u + GRID.width, v, GRID)
        np.testing.assert_allclose(wrap_theta(a.theta - b.theta), 0.0, atol=1e-9)


class TestSphToPixel:
    def test_inverse_of_center(self):
        u, v = sph_to_pixel(SphericalDir(0.0, 0.0), GRID)
        assert (u, v) == (2047.5, 1023.5)

    def test_seam_canonicalized_by_wrap(self):
        u, v = sph_to_pixel(SphericalDir(-180.0, 0.0), GRID)
        assert u == 4095.5
        assert v == 1023.5

    def test_round_trip_random_pixels(self):
        rng = np.random.default_rng(11)
        u = rng.uniform(0, GRID.width, size=1000)
        v = rng.uniform(0, GRID.height - 1, size=1000)
        u2, v2 = sph_to_pixel(pixel_to_sph(u, v, GRID), GRID)
        np.testing.assert_allclose(u2, u % GRID.width, atol=1e-9)
        np.testing.assert_allclose(v2, v, atol=1e-9)

    def test_round_trip_exhaustive_small_grid(self):
        grid = GridSpec(64, 32)
        v, u = np.mgrid[0:32, 0:64].astype(np.float64)
        u2, v2 = sph_to_pixel(pixel_to_sph(u, v, grid), grid)
        assert np.abs(u2 - u).max() < 1e-9
        assert np.abs(v2 - v).max() < 1e-9


class TestSphToDir:
    @pytest.mark.parametrize(
        "theta,phi,expected",
        [
            (0.0, 0.0, (0.0, 1.0, 0.0)),
            (0.0, 90.0, (0.0, 0.0, 1.0)),
            (90.0, 0.0, (1.0, 0.0, 0.0)),
        ],
    )
    def test_axes(self, theta, phi, expected):
        np.testing.assert_allclose(sph_to_dir(SphericalDir(theta, phi)), expected, atol=1e-12)

    def test_always_unit_norm(self):
        rng = np.random.default_rng(3)
        d = SphericalDir(rng.uniform(-180, 180, 1000), rng.uniform(-90, 90, 1000))
        norms = np.linalg.norm(sph_to_dir(d), axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)


class TestDirToSph:
    def test_forward(self):
        d = dir_to_sph([0.0, 1.0, 0.0])
        assert (d.theta, d.phi) == (0.0, 0.0)

    def test_pole_theta_convention(self):
        d = dir_to_sph([0.0, 0.0, -1.0])
        assert d.theta == 0.0
        assert d.phi == -90.0

    def test_diagonal(self):
        d = dir_to_sph([np.sqrt(0.5), np.sqrt(0.5), 0.0])
        assert d.theta == pytest.approx(45.0)
        assert d.phi == pytest.approx(0.0)

    def test_round_trip_away_from_poles(self):
        rng = np.random.default_rng(5)
        sph = SphericalDir(rng.uniform(-180, 179.9, 500), rng.uniform(-89, 89, 500))
        back = dir_to_sph(sph_to_dir(sph))
        np.testing.assert_allclose(back.theta, sph.theta, atol=1e-9)
        np.testing.assert_allclose(back.phi, sph.phi, atol=1e-9)


class TestCylindrical:
    def test_forward_point(self):
        assert cart_to_cyl([0.0, 2.0, 1.5]) == (2.0, 0.0, 1.5)

    def test_axis_theta_convention(self):
        rho, theta, z = cart_to_cyl([0.0, 0.0, 3.0])
        assert (rho, theta, z) == (0.0, 0.0, 3.0)

    def test_diagonal(self):
        rho, theta, z = cart_to_cyl([1.0, 1.0, 0.0])
        assert rho == pytest.approx(np.sqrt(2.0))
        assert theta == pytest.approx(45.0)
        assert z == 0.0

    def test_round_trip_off_axis(self):
        rng = np.random.default_rng(9)
        rho = rng.uniform(1e-6, 10, size=1000)
        theta = rng.uniform(-180, 180, size=1000)
        z = rng.uniform(-5, 5, size=1000)
        r2, t2, z2 = cart_to_cyl(cyl_to_cart(rho, theta, z))
        np.testing.assert_allclose(r2, rho, atol=1e-9)
        np.testing.assert_allclose(wrap_theta(t2 - theta), 0.0, atol=1e-9)
        np.testing.assert_allclose(z2, z, atol=1e-9)


class TestGridHelpers:
    def test_angles_match_scalar_map(self):
        grid = GridSpec(64, 32)
        theta, phi = grid_angles(grid)
        d = pixel_to_sph(5.0, 7.0, grid)
        assert theta[7, 5] == d.theta
        assert phi[7, 5] == d.phi

    def test_dirs_are_unit(self):
        dirs = grid_dirs(GridSpec(64, 32))
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=-1), 1.0, atol=1e-12)

    def test_cached_arrays_are_read_only(self):
        dirs = grid_dirs(GridSpec(64, 32))
        with pytest.raises(ValueError):
            dirs[0, 0, 0] = 5.0


class TestUnitVector:
    def test_accepts_within_tolerance(self):
        v = unit_vector([0.0, 0.0, 1.0 + 5e-10])
        assert v.shape == (3,)

    def test_rejects_off_sphere(self):
        with pytest.raises(ValueError):
            unit_vector([0.0, 0.0, 1.1])
        with pytest.raises(ValueError):
            unit_vector(np.array([[0.0, 0.0, 1.0], [0.5, 0.0, 0.0]]))
