import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectorflow import kernels as K
from sectorflow.geometry import Sector

PI = math.pi


def random_upper(rng, m, lo=0.1, hi=2.0):
    return rng.uniform(-hi, hi, m) + 1j * rng.uniform(lo, hi, m)


def random_sector_points(rng, alpha, m, rmin=0.1, rmax=0.9):
    return rng.uniform(rmin, rmax, m) * np.exp(1j * alpha * rng.uniform(0.05, 0.95, m))


def perp_gradient_fd(fn, z, step=1e-5):
    gx = (fn(z + step) - fn(z - step)) / (2 * step)
    gy = (fn(z + 1j * step) - fn(z - 1j * step)) / (2 * step)
    return np.stack([-gy, gx], axis=-1)


# -- change of angle ----------------------------------------------------------------------------


def test_change_of_angle_examples():
    x = 0.3 + 0.4j
    z, dz, jac = K.change_of_angle(PI, x)
    assert z == x and dz == 1 and jac == 1
    z, _, _ = K.change_of_angle(PI / 2, np.exp(1j * PI / 4))
    assert z == pytest.approx(1j, abs=1e-15)
    z, _, _ = K.change_of_angle(PI / 2, 2 * np.exp(1j * PI / 8))
    assert abs(z) == pytest.approx(4.0) and np.angle(z) == pytest.approx(PI / 4)


def test_change_of_angle_errors():
    with pytest.raises(K.SingularityError):
        K.change_of_angle(PI / 3, 0j)
    with pytest.raises(ValueError):
        K.change_of_angle(PI / 3, np.exp(1j * PI / 2))


@given(st.floats(0.2, 1.9 * PI), st.floats(0.01, 0.99), st.floats(0.05, 5.0))
def test_change_of_angle_maps_to_half_plane(alpha, s, r):
    x = r * np.exp(1j * alpha * s)
    z, dz, jac = K.change_of_angle(alpha, x)
    nu = PI / alpha
    assert abs(z) == pytest.approx(r**nu, rel=1e-12)
    assert z.imag > 0
    assert jac == pytest.approx(abs(dz) ** 2)
    assert K.inverse_change_of_angle(alpha, z) == pytest.approx(x, rel=1e-10)
    h = 1e-6 * r
    fd = (K.change_of_angle(alpha, x + h)[0] - K.change_of_angle(alpha, x - h)[0]) / (2 * h)
    assert fd == pytest.approx(dz, rel=1e-6)


# -- half-plane Biot-Savart ---------------------------------------------------------------------


def test_biot_savart_example():
    u = K.biot_savart_halfplane(1j, 2j)
    assert u == pytest.approx([2 / (3 * PI), 0.0], abs=1e-15)


def test_biot_savart_horizontal_on_wall():
    rng = np.random.default_rng(0)
    u = K.biot_savart_halfplane(rng.uniform(-3, 3, 100), random_upper(rng, 100))
    assert np.all(u[:, 1] == 0)


def test_biot_savart_singular_part():
    zeta = 0.3 + 0.7j
    for r in (1e-2, 1e-4, 1e-6):
        z = zeta + r * np.exp(0.4j)
        free = K.as_vector(1j / (2 * PI) * np.conj(1 / (z - zeta)))
        rest = K.biot_savart_halfplane(z, zeta) - free
        assert np.linalg.norm(rest) < 1.0
    with pytest.raises(K.SingularityError):
        K.biot_savart_halfplane(zeta, zeta)


def test_biot_savart_is_perp_gradient_of_green():
    rng = np.random.default_rng(1)
    z, zeta = random_upper(rng, 50, lo=0.3), random_upper(rng, 50, lo=0.3)
    fd = perp_gradient_fd(lambda p: K.green_halfplane(p, zeta), z)
    exact = K.biot_savart_halfplane(z, zeta)
    assert np.max(np.linalg.norm(fd - exact, axis=1) / np.linalg.norm(exact, axis=1)) < 1e-6


# -- gradient kernel ----------------------------------------------------------------------------


def test_grad_biot_savart_matches_finite_differences():
    rng = np.random.default_rng(5)
    z, zeta = random_upper(rng, 50), random_upper(rng, 50)
    J = K.grad_biot_savart_halfplane(z, zeta)
    h = 1e-5
    fd = np.stack([(K.biot_savart_halfplane(z + e * h, zeta) - K.biot_savart_halfplane(z - e * h, zeta)) / (2 * h)
                   for e in (1, 1j)], axis=-1)
    assert np.max(np.linalg.norm(J - fd, axis=(1, 2)) / np.linalg.norm(J, axis=(1, 2))) < 1e-6


def test_free_kernel_first_column_formula():
    # L_1 = (2 pi)^-1 (2 d1 d2, d2^2 - d1^2) / |d|^4
    rng = np.random.default_rng(2)
    d = random_upper(rng, 20) - 1j
    L = K.free_space_kernel_gradient(d)
    d1, d2, r4 = d.real, d.imag, np.abs(d) ** 4
    expected = np.stack([2 * d1 * d2, d2**2 - d1**2], axis=-1) / (2 * PI * r4[:, None])
    assert np.allclose(L[:, :, 0], expected, rtol=1e-12, atol=0)


@given(st.floats(1e-3, 1e3), st.floats(-PI, PI))
def test_free_kernel_homogeneous_degree_minus_two(t, phi):
    u = np.exp(1j * phi)
    a, b = K.free_space_kernel_gradient(t * u), t**-2 * K.free_space_kernel_gradient(u)
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)


def test_free_kernel_zero_circular_mean():
    phis = 2 * PI * np.arange(256) / 256  # periodic trapezoid is exact for trigonometric polynomials
    L = K.free_space_kernel_gradient(np.exp(1j * phis))
    assert np.max(np.abs(L.mean(axis=0))) < 1e-10


def _smoothness_constant(rng, m=4000):
    x = np.exp(rng.uniform(-2, 2, m)) * np.exp(1j * rng.uniform(-PI, PI, m))
    y = 0.5 * np.abs(x) * rng.uniform(0, 1, m) * np.exp(1j * rng.uniform(-PI, PI, m))
    diff = K.free_space_kernel_gradient(x) - K.free_space_kernel_gradient(x - y)
    return float(np.max(np.linalg.norm(diff, axis=(1, 2)) * np.abs(x) ** 3 / np.abs(y)))


def test_kernel_smoothness_constant_is_stable():
    # |K(x) - K(x - y)| <= C |y| |x|^-3 for |y| <= |x| / 2, with C recorded once
    c1 = _smoothness_constant(np.random.default_rng(10))
    c2 = _smoothness_constant(np.random.default_rng(11), m=40000)
    assert c1 < 2.0 and c2 < 2.0
    assert max(c1, c2) / min(c1, c2) < 1.5


# -- Green functions ----------------------------------------------------------------------------


def test_green_halfplane_examples():
    assert K.green_halfplane(1j, 2j) == pytest.approx(-math.log(3) / (2 * PI), abs=1e-15)
    assert K.green_halfplane(0.7, 0.2 + 0.5j) == 0.0
    rng = np.random.default_rng(3)
    z, zeta = random_upper(rng, 100), random_upper(rng, 100)
    assert np.max(np.abs(K.green_halfplane(z, zeta) - K.green_halfplane(zeta, z))) < 1e-14


@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(-3, 3), st.floats(0.01, 3))
def test_green_halfplane_negative(a, b, c, d):
    if abs(complex(a, b) - complex(c, d)) > 1e-6:
        assert K.green_halfplane(complex(a, b), complex(c, d)) < 0


def test_green_halfdisk_boundary_and_limit():
    R = 1.5
    zeta = 0.2 + 0.6j
    arc = R * np.exp(1j * np.linspace(0, PI, 41))
    assert np.max(np.abs(K.green_halfdisk(arc, zeta, R))) < 1e-12
    assert np.all(K.green_halfdisk(np.linspace(-1.4, 1.4, 29), zeta, R) == 0)
    rng = np.random.default_rng(4)
    z = 0.7 * np.exp(1j * rng.uniform(0.1, 3.0, 50))
    w = 0.8 * np.exp(1j * rng.uniform(0.1, 3.0, 50))
    big = K.green_halfdisk(z, w, 1e4)
    assert np.max(np.abs(big - K.green_halfplane(z, w))) < 1e-6
    with pytest.raises(ValueError):
        K.green_halfdisk(2.0 + 1j, zeta, R)


def test_biot_savart_halfdisk_is_perp_gradient():
    R = 1.0
    rng = np.random.default_rng(6)
    z = 0.6 * np.exp(1j * rng.uniform(0.2, 2.9, 30))
    w = 0.5 * np.exp(1j * rng.uniform(0.2, 2.9, 30)) + 0.1j
    fd = perp_gradient_fd(lambda p: K.green_halfdisk(p, w, R), z, 1e-6)
    exact = K.biot_savart_halfdisk(z, w, R)
    assert np.max(np.linalg.norm(fd - exact, axis=1) / np.linalg.norm(exact, axis=1)) < 1e-6
    J = K.grad_biot_savart_halfdisk(z, w, R)
    h = 1e-6
    fdJ = np.stack([(K.biot_savart_halfdisk(z + e * h, w, R) - K.biot_savart_halfdisk(z - e * h, w, R)) / (2 * h)
                    for e in (1, 1j)], axis=-1)
    assert np.max(np.linalg.norm(J - fdJ, axis=(1, 2)) / np.linalg.norm(J, axis=(1, 2))) < 1e-5


def test_green_sector_examples():
    rng = np.random.default_rng(7)
    half = Sector(PI)
    z, zeta = random_upper(rng, 30), random_upper(rng, 30)
    assert np.array_equal(K.green_sector(half, z, zeta), K.green_halfplane(z, zeta))
    alpha = PI / 3
    sec = Sector(alpha, 0j, 1.0)
    x, y = random_sector_points(rng, alpha, 100), random_sector_points(rng, alpha, 100)
    assert np.max(np.abs(K.green_sector(sec, x, y) - K.green_sector(sec, y, x))) < 1e-12
    y0 = 0.5 * np.exp(1j * alpha / 2)
    centre = abs(K.green_sector(sec, 0.5 * np.exp(1j * alpha / 4), y0))
    radii = np.linspace(0.1, 0.9, 33)
    for th in (1e-3, alpha - 1e-3):
        assert np.max(np.abs(K.green_sector(sec, radii * np.exp(1j * th), y0))) < 1e-2 * centre


# apertures below ~0.5 push |Z(x)| = |x|^(pi/alpha) under the diagonal guard near the vertex
@given(st.floats(0.5, 1.9 * PI), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.floats(0.05, 0.95))
def test_green_sector_negative_and_symmetric(alpha, r1, t1, r2, t2):
    sec = Sector(alpha, 0j, 1.0)
    x, y = r1 * np.exp(1j * alpha * t1), r2 * np.exp(1j * alpha * t2)
    if abs(x - y) > 1e-6:
        g = K.green_sector(sec, x, y)
        assert g < 0
        assert g == pytest.approx(K.green_sector(sec, y, x), rel=1e-9, abs=1e-14)


def test_green_sector_vertex_translation():
    a = Sector(PI / 3, 0j, 1.0)
    b = Sector(PI / 3, 2 - 1j, 1.0)
    x, y = 0.4 * np.exp(0.3j), 0.6 * np.exp(0.8j)
    assert K.green_sector(b, x + b.vertex, y + b.vertex) == pytest.approx(K.green_sector(a, x, y), rel=1e-12)


def test_biot_savart_sector_is_perp_gradient():
    alpha = 2 * PI / 3
    sec = Sector(alpha, 0j, 1.0)
    rng = np.random.default_rng(8)
    x, y = random_sector_points(rng, alpha, 30), random_sector_points(rng, alpha, 30)
    fd = perp_gradient_fd(lambda p: K.green_sector(sec, p, y), x, 1e-6)
    exact = K.biot_savart_sector(sec, x, y)
    assert np.max(np.linalg.norm(fd - exact, axis=1) / np.linalg.norm(exact, axis=1)) < 1e-6


# -- Robin function and self velocity -----------------------------------------------------------


def test_robin_velocity_half_plane():
    h = 0.3
    u = K.robin_velocity(Sector(PI), 0.2 + h * 1j)
    assert u == pytest.approx([1 / (4 * PI * h), 0.0], rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("alpha", [PI / 3, 2 * PI / 3, 1.5 * PI])
def test_robin_velocity_is_half_perp_gradient_of_robin_function(alpha):
    # Kirchhoff-Routh: the self velocity of a point vortex is (1/2) grad^perp of the Robin function
    sec = Sector(alpha, 0j, 1.0)
    x = random_sector_points(np.random.default_rng(9), alpha, 20, 0.2, 0.8)
    fd = 0.5 * perp_gradient_fd(lambda p: K.robin_function(sec, p), x, 1e-6)
    assert np.allclose(K.robin_velocity(sec, x), fd, rtol=1e-6, atol=1e-8)


def test_robin_function_is_regular_part_of_green():
    sec = Sector(PI / 3, 0j, 1.0)
    x = 0.5 * np.exp(0.5j)
    for r in (1e-3, 1e-4):
        y = x + r * np.exp(0.7j)
        reg = K.green_sector(sec, x, y) - math.log(r) / (2 * PI)
        assert reg == pytest.approx(K.robin_function(sec, x), abs=10 * r)
