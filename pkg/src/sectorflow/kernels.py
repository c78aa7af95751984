"""Closed-form kernels on the half-plane, half-disk and sectors.

Points of the plane are complex numbers; 2-vectors are returned as real
arrays with a trailing axis of length 2, and Jacobians as ``(..., 2, 2)``
arrays with ``J[..., i, j] = d u_i / d z_j``.

Conventions: ``(a, b)^perp = (-b, a)`` (multiplication by ``i``) and
``Laplacian G = delta``, so Green functions are negative inside.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Sector

TWO_PI = 2 * math.pi
DIAGONAL_RTOL = 1e-13
ANGLE_TOL = 1e-9


class SingularityError(ValueError):
    """Kernel evaluated on (or numerically at) its singular set."""


def as_vector(w):
    """Complex number(s) -> real 2-vectors."""
    w = np.asarray(w)
    return np.stack([w.real, w.imag], axis=-1)


def _guard_diagonal(z, zeta):
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(np.abs(z - zeta) < DIAGONAL_RTOL * (1 + np.abs(z))):
        raise SingularityError("kernel evaluated on the diagonal z == zeta")
    return z, zeta


def sector_angle(x, alpha: float, tol: float = ANGLE_TOL):
    """Argument of ``x`` taken in ``[0, 2 pi)``; raises outside ``[-tol, alpha + tol]``."""
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise SingularityError("the vertex is excluded")
    theta = np.angle(x)
    theta = np.where(theta < -tol, theta + TWO_PI, theta)
    if np.any(theta > alpha + tol) or np.any(theta < -tol):
        raise ValueError("point outside the sector")
    return theta


def change_of_angle(alpha: float, x):
    """Map ``x -> x^(pi/alpha)`` from the sector onto the upper half-plane.

    Returns ``(z, dz, jac)``: the image, the complex derivative and the
    Jacobian determinant ``|dz|^2``.
    """
    x = np.asarray(x, dtype=complex)
    theta = sector_angle(x, alpha)
    if alpha == math.pi:
        return x.copy(), np.ones_like(x), np.ones(x.shape)
    r = np.abs(x)
    nu = math.pi / alpha
    z = r**nu * np.exp(1j * nu * theta)
    dz = nu * r ** (nu - 1) * np.exp(1j * (nu - 1) * theta)
    return z, dz, np.abs(dz) ** 2


def inverse_change_of_angle(alpha: float, z):
    z = np.asarray(z, dtype=complex)
    phi = np.angle(z)
    phi = np.where(phi < -ANGLE_TOL, phi + TWO_PI, phi)
    mu = alpha / math.pi
    return np.abs(z) ** mu * np.exp(1j * mu * phi)


def second_derivative_ratio(alpha: float, x):
    """``Z''(x) / Z'(x) = (pi/alpha - 1) / x`` for the change-of-angle map."""
    return (math.pi / alpha - 1) / np.asarray(x, dtype=complex)


# -- half-plane ---------------------------------------------------------------


def biot_savart_halfplane(z, zeta):
    """Velocity at ``z`` induced by a unit vortex at ``zeta`` above a wall."""
    z, zeta = _guard_diagonal(z, zeta)
    h = 1 / (z - zeta) - 1 / (z - np.conj(zeta))
    return as_vector(1j / TWO_PI * np.conj(h))


def _conj_jacobian(hprime):
    # u = conj(H) with H holomorphic: column j of Du is conj(H' e_j)
    c1 = np.conj(hprime)
    c2 = np.conj(1j * hprime)
    out = np.empty(np.shape(hprime) + (2, 2))
    out[..., 0, 0] = c1.real
    out[..., 1, 0] = c1.imag
    out[..., 0, 1] = c2.real
    out[..., 1, 1] = c2.imag
    return out


def free_space_kernel_gradient(d):
    """``L(d) = (L_1, L_2)``: z-derivatives of ``(2 pi)^-1 d^perp / |d|^2``.

    Column j of the returned matrix is ``L_j``.
    """
    d = np.asarray(d, dtype=complex)
    if np.any(d == 0):
        raise SingularityError("free-space kernel is singular at the origin")
    return _conj_jacobian(1j / TWO_PI / d**2)


def grad_biot_savart_halfplane(z, zeta):
    """Jacobian in ``z`` of :func:`biot_savart_halfplane`: ``L(z - zeta) - L(z - conj(zeta))``."""
    z, zeta = _guard_diagonal(z, zeta)
    if np.any(np.abs(z - np.conj(zeta)) < DIAGONAL_RTOL * (1 + np.abs(z))):
        raise SingularityError("kernel evaluated at the image point")
    hp = -1 / (z - zeta) ** 2 + 1 / (z - np.conj(zeta)) ** 2
    return _conj_jacobian(-1j / TWO_PI * hp)


def green_halfplane(z, zeta):
    z, zeta = _guard_diagonal(z, zeta)
    return np.log(np.abs(z - zeta) ** 2 / np.abs(z - np.conj(zeta)) ** 2) / (2 * TWO_PI)


# -- half-disk ----------------------------------------------------------------


def green_disk(z, zeta, R: float):
    z, zeta = _guard_diagonal(z, zeta)
    return np.log(R * np.abs(z - zeta) / np.abs(R * R - z * np.conj(zeta))) / TWO_PI


def green_halfdisk(z, zeta, R: float):
    """Dirichlet Green function of ``{|z| < R, Im z > 0}``."""
    z, zeta = _guard_diagonal(z, zeta)
    outside = (np.abs(z) > R * (1 + 1e-12)) | (np.abs(zeta) > R * (1 + 1e-12))
    outside |= (z.imag < 0) | (zeta.imag < 0)
    if np.any(outside):
        raise ValueError("points must lie in the closed upper half-disk")
    R2 = R * R
    num = np.abs(z - zeta) ** 2 * np.abs(R2 - z * zeta) ** 2
    den = np.abs(z - np.conj(zeta)) ** 2 * np.abs(R2 - z * np.conj(zeta)) ** 2
    return np.log(num / den) / (2 * TWO_PI)


def _halfdisk_h(z, zeta, R: float):
    # grad_z G = conj(h) / (2 pi), h holomorphic in z
    zb = np.conj(zeta)
    h = 1 / (z - zeta) - 1 / (z - zb)
    if math.isfinite(R):
        R2 = R * R
        h = h - zeta / (R2 - z * zeta) + zb / (R2 - z * zb)
    return h


def _halfdisk_hprime(z, zeta, R: float):
    zb = np.conj(zeta)
    hp = -1 / (z - zeta) ** 2 + 1 / (z - zb) ** 2
    if math.isfinite(R):
        R2 = R * R
        hp = hp - zeta**2 / (R2 - z * zeta) ** 2 + zb**2 / (R2 - z * zb) ** 2
    return hp


def biot_savart_halfdisk(z, zeta, R: float):
    """``perp``-gradient in ``z`` of :func:`green_halfdisk`."""
    z, zeta = _guard_diagonal(z, zeta)
    return as_vector(1j / TWO_PI * np.conj(_halfdisk_h(z, zeta, R)))


def grad_biot_savart_halfdisk(z, zeta, R: float):
    z, zeta = _guard_diagonal(z, zeta)
    return _conj_jacobian(-1j / TWO_PI * _halfdisk_hprime(z, zeta, R))


# -- sectors ------------------------------------------------------------------


def _sector_images(sector: Sector, *pts):
    out = []
    for p in pts:
        p = np.asarray(p, dtype=complex) - sector.vertex
        if sector.truncated and np.any(np.abs(p) >= sector.truncation_radius):
            raise ValueError("point outside the truncated sector")
        z, dz, _ = change_of_angle(sector.alpha, p)
        out.append((z, dz))
    return out


def mapped_radius(sector: Sector) -> float:
    """Radius of the half-disk image of a truncated sector (``inf`` otherwise)."""
    if not sector.truncated:
        return math.inf
    return sector.truncation_radius ** (math.pi / sector.alpha)


def green_sector(sector: Sector, x, y):
    """Dirichlet Green function of the (truncated) sector via conformal invariance."""
    (zx, _), (zy, _) = _sector_images(sector, x, y)
    if sector.truncated:
        return green_halfdisk(zx, zy, mapped_radius(sector))
    return green_halfplane(zx, zy)


def biot_savart_sector(sector: Sector, x, y):
    """Velocity at ``x`` of a unit vortex at ``y``: ``conj(Z'(x)) K(Z(x), Z(y))``."""
    (zx, dzx), (zy, _) = _sector_images(sector, x, y)
    zx, zy = _guard_diagonal(zx, zy)
    u = np.conj(dzx) * (1j / TWO_PI) * np.conj(_halfdisk_h(zx, zy, mapped_radius(sector)))
    return as_vector(u)


def robin_velocity(sector: Sector, x):
    """Regular part of the self-induced velocity of a unit point vortex at ``x``.

    Image contribution pulled back by the map, plus the term from
    ``grad log |Z'|`` (Routh's correction); zero for ``alpha = pi``.
    """
    ((z, dz),) = _sector_images(sector, x)
    R = mapped_radius(sector)
    zb = np.conj(z)
    h = -1 / (z - zb)
    if math.isfinite(R):
        R2 = R * R
        h = h - z / (R2 - z * z) + zb / (R2 - z * zb)
    image = np.conj(dz) * (1j / TWO_PI) * np.conj(h)
    x = np.asarray(x, dtype=complex) - sector.vertex
    routh = 1j / (2 * TWO_PI) * np.conj(second_derivative_ratio(sector.alpha, x))
    return as_vector(image + routh)


def robin_function(sector: Sector, x):
    """``lim_{y->x} G(x, y) - log|x - y| / (2 pi)``."""
    ((z, dz),) = _sector_images(sector, x)
    val = np.log(np.abs(dz)) - np.log(2 * z.imag)
    R = mapped_radius(sector)
    if math.isfinite(R):
        R2 = R * R
        val = val + np.log(np.abs(R2 - z * z)) - np.log(R2 - np.abs(z) ** 2)
    return val / TWO_PI
