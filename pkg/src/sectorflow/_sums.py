"""Direct O(N M) kernel sums over mapped points in the upper half-plane.

Each target row is reduced sequentially, so results do not depend on the
number of threads. ``skip[i]`` names a source index excluded from row ``i``
(``-1`` for none); with ``self_image`` only its direct term is dropped.
``R2 <= 0`` selects the half-plane kernels.
"""

import numba
import numpy as np


@numba.njit(parallel=True, cache=True)
def green_sums(zt, zs, c, R2, skip):
    n = zt.shape[0]
    out = np.zeros(n)
    inv4pi = 1.0 / (4.0 * np.pi)
    for i in numba.prange(n):
        x = zt[i].real
        y = zt[i].imag
        s = 0.0
        for j in range(zs.shape[0]):
            if j == skip[i]:
                continue
            u = zs[j].real
            v = zs[j].imag
            dx = x - u
            a = dx * dx + (y - v) * (y - v)
            b = dx * dx + (y + v) * (y + v)
            if R2 > 0.0:
                re1 = R2 - x * u + y * v
                im1 = x * v + y * u
                re2 = R2 - x * u - y * v
                im2 = y * u - x * v
                a *= re1 * re1 + im1 * im1
                b *= re2 * re2 + im2 * im2
            s += np.log(a / b) * c[j]
        out[i] = s * inv4pi
    return out


@numba.njit(parallel=True, cache=True)
def h_sums(zt, zs, c, R2, skip, self_image=False):
    """Sum of ``h(z, zeta) c`` with ``grad_z G = conj(h) / (2 pi)``."""
    n = zt.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    for i in numba.prange(n):
        z = zt[i]
        s = 0j
        for j in range(zs.shape[0]):
            w = zs[j]
            wb = w.conjugate()
            if j == skip[i]:
                if not self_image:
                    continue
                h = -1.0 / (z - wb)
            else:
                h = 1.0 / (z - w) - 1.0 / (z - wb)
            if R2 > 0.0:
                h += -w / (R2 - z * w) + wb / (R2 - z * wb)
            s += h * c[j]
        out[i] = s
    return out


@numba.njit(parallel=True, cache=True)
def h_hprime_sums(zt, zs, c, R2, skip, self_image=False):
    """Sums of ``h(z, zeta) c`` and ``dh/dz (z, zeta) c`` in one pass."""
    n = zt.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    outp = np.zeros(n, dtype=np.complex128)
    for i in numba.prange(n):
        z = zt[i]
        s = 0j
        sp = 0j
        for j in range(zs.shape[0]):
            w = zs[j]
            wb = w.conjugate()
            b = 1.0 / (z - wb)
            if j == skip[i]:
                if not self_image:
                    continue
                h = -b
                hp = b * b
            else:
                a = 1.0 / (z - w)
                h = a - b
                hp = b * b - a * a
            if R2 > 0.0:
                e1 = w / (R2 - z * w)
                e2 = wb / (R2 - z * wb)
                h += e2 - e1
                hp += e2 * e2 - e1 * e1
            s += h * c[j]
            sp += hp * c[j]
        out[i] = s
        outp[i] = sp
    return out, outp


@numba.njit(parallel=True, cache=True)
def local_sums(xt, kappa, xs, c, skip, active, rot, R2):
    """Lattice sums of the local kernel approximants in physical coordinates.

    Direct part ``-1/d`` (velocity) and ``-1/d^2 + kappa/d`` (Hessian) with
    ``d = y - x``, skipping ``skip[i]``. Reflected part, over all sources,
    ``1/e`` and ``1/e^2 - kappa/e`` with ``e = y* - x`` for the reflections
    ``y* = conj(y)``, ``rot conj(y)`` and ``R2 / conj(y)`` switched on by
    ``active[i]``. Returns ``(velocity, hessian)``.
    """
    n = xt.shape[0]
    sv = np.zeros(n, dtype=np.complex128)
    sh = np.zeros(n, dtype=np.complex128)
    for i in numba.prange(n):
        x = xt[i]
        k = kappa[i]
        a0, a1, a2 = active[i, 0], active[i, 1], active[i, 2]
        v = 0j
        h = 0j
        for j in range(xs.shape[0]):
            y = xs[j]
            cj = c[j]
            if j != skip[i]:
                r = 1.0 / (y - x)
                v -= cj * r
                h += cj * r * (k - r)
            yb = y.conjugate()
            if a0:
                r = 1.0 / (yb - x)
                v += cj * r
                h += cj * r * (r - k)
            if a1:
                r = 1.0 / (rot * yb - x)
                v += cj * r
                h += cj * r * (r - k)
            if a2:
                r = 1.0 / (R2 / yb - x)
                v += cj * r
                h += cj * r * (r - k)
        sv[i] = v
        sh[i] = h
    return sv, sh
