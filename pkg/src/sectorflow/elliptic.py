"""Quadrature Dirichlet solver on truncated sectors, velocity law, Hessian split,
singular solutions and the weighted / Orlicz norms.

The mesh is a graded polar product grid: cell edges are the images of a
uniform grid under ``t -> t - a sin(2 pi t) / (2 pi)``, which clusters cells
toward the vertex, both rays and the arc. Nodes are mapped cell midpoints and
weights are exact polar cell areas.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from . import _sums
from .geometry import Sector
from .kernels import (
    TWO_PI,
    SingularityError,
    change_of_angle,
    mapped_radius,
    robin_function,
    second_derivative_ratio,
)

DEFAULT_GRADING = 0.5
NODE_MATCH_RTOL = 1e-13


def _grade(t, a):
    return t - a * np.sin(2 * np.pi * t) / (2 * np.pi)


@dataclass(frozen=True, eq=False)
class QuadratureMesh:
    """Graded polar product mesh of a truncated sector.

    Nodes are stored radial-major: node ``i * n_theta + j`` sits at
    ``rho[i] e^{i theta[j]}`` relative to the vertex.
    """

    sector: Sector
    n: int
    grading: float
    rho_edges: np.ndarray
    theta_edges: np.ndarray
    rho: np.ndarray
    theta: np.ndarray

    @property
    def radius(self) -> float:
        return self.sector.truncation_radius

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rho.size, self.theta.size)

    @property
    def size(self) -> int:
        return self.rho.size * self.theta.size

    @cached_property
    def local(self) -> np.ndarray:
        """Nodes relative to the vertex."""
        return (self.rho[:, None] * np.exp(1j * self.theta[None, :])).ravel()

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.local + self.sector.vertex

    @cached_property
    def weights(self) -> np.ndarray:
        ring = 0.5 * np.diff(self.rho_edges**2)
        return np.outer(ring, np.diff(self.theta_edges)).ravel()

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        dr = np.diff(self.rho_edges)[:, None]
        arc = self.rho_edges[1:, None] * np.diff(self.theta_edges)[None, :]
        return np.hypot(dr, arc).ravel()

    @property
    def h(self) -> float:
        """Largest cell diameter."""
        return float(self.cell_diameters.max())

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        r = np.repeat(self.rho, self.theta.size)
        th = np.tile(self.theta, self.rho.size)
        d0 = np.where(th < np.pi / 2, r * np.sin(th), r)
        phi = self.sector.alpha - th
        d1 = np.where(phi < np.pi / 2, r * np.sin(phi), r)
        return np.minimum(np.minimum(d0, d1), self.radius - r)

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        """True on nodes of the outermost cell layer along the rays and the arc."""
        flags = np.zeros(self.shape, dtype=bool)
        flags[:, 0] = flags[:, -1] = flags[-1, :] = True
        return flags.ravel()

    @cached_property
    def node_corrections(self) -> tuple[np.ndarray, np.ndarray]:
        """Local-singularity corrections with the nodes as targets (data independent)."""
        return _local_corrections_at(self, self.local, np.arange(self.size, dtype=np.int64))

    @cached_property
    def mapped(self) -> tuple[np.ndarray, np.ndarray]:
        z, dz, _ = change_of_angle(self.sector.alpha, self.local)
        return z, dz

    def params(self) -> dict:
        return {
            "alpha": self.sector.alpha,
            "vertex": [self.sector.vertex.real, self.sector.vertex.imag],
            "radius": self.radius,
            "n": self.n,
            "grading": self.grading,
        }

    # -- finite differences on the product grid -------------------------------

    def gradient(self, values) -> np.ndarray:
        """Cartesian gradient ``(N, ...)`` -> ``(N, ..., 2)`` by centered differences."""
        v = np.asarray(values, dtype=float)
        tail = v.shape[1:]
        grid = v.reshape(self.shape + tail)
        d_r = np.gradient(grid, self.rho, axis=0, edge_order=2)
        d_t = np.gradient(grid, self.theta, axis=1, edge_order=2)
        expand = (slice(None), slice(None)) + (None,) * len(tail)
        c = np.cos(self.theta)[None, :][expand]
        s = np.sin(self.theta)[None, :][expand]
        inv_r = (1 / self.rho)[:, None][expand]
        gx = c * d_r - s * inv_r * d_t
        gy = s * d_r + c * inv_r * d_t
        return np.stack([gx, gy], axis=-1).reshape((self.size,) + tail + (2,))

    def hessian(self, values) -> np.ndarray:
        """``(N, 2, 2)`` array of second derivatives, ``H[:, i, j] = d_j d_i F``."""
        return self.gradient(self.gradient(values))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def build_mesh(sector: Sector, R: float | None = None, n: int = 64, grading: float = DEFAULT_GRADING) -> QuadratureMesh:
    """Mesh of ``sector`` truncated at radius ``R`` with ``n x n`` cells."""
    if R is None:
        R = sector.truncation_radius
    R = float(R)
    if not (math.isfinite(R) and R > 0):
        raise ValueError("truncation radius must be finite and positive")
    if sector.truncated and not math.isclose(R, sector.truncation_radius, rel_tol=1e-12):
        raise ValueError("R disagrees with the sector's truncation radius")
    if int(n) != n or n < 8:
        raise ValueError("n must be an integer >= 8")
    if not 0 <= grading < 1:
        raise ValueError("grading must lie in [0, 1)")
    n = int(n)
    sector = Sector(sector.alpha, sector.vertex, R)
    t = np.linspace(0.0, 1.0, n + 1)
    mid = 0.5 * (t[:-1] + t[1:])
    return QuadratureMesh(
        sector=sector,
        n=n,
        grading=float(grading),
        rho_edges=R * _grade(t, grading),
        theta_edges=sector.alpha * _grade(t, grading),
        rho=R * _grade(mid, grading),
        theta=sector.alpha * _grade(mid, grading),
    )


@dataclass(frozen=True, eq=False)
class GridFunction:
    mesh: QuadratureMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 0 or v.shape[0] != self.mesh.size:
            raise ValueError(f"expected {self.mesh.size} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, mesh: QuadratureMesh, fn) -> "GridFunction":
        """Sample ``fn(x)`` at the nodes (``x`` relative to the vertex)."""
        return cls(mesh, np.asarray(fn(mesh.local), dtype=float))

    def interpolate(self, x) -> np.ndarray:
        """Bilinear interpolation in ``(rho, theta)``; points outside the node hull are clamped."""
        m = self.mesh
        x = np.asarray(x, dtype=complex) - m.sector.vertex
        th = np.mod(np.angle(x), TWO_PI)
        pts = np.stack([np.clip(np.abs(x), m.rho[0], m.rho[-1]), np.clip(th, m.theta[0], m.theta[-1])], axis=-1)
        grid = self.values.reshape(m.shape + self.values.shape[1:])
        return RegularGridInterpolator((m.rho, m.theta), grid)(pts)

    def to_csv(self, path) -> Path:
        """Write ``x, y, value...`` rows plus a JSON header ``<path>.json`` with the mesh parameters."""
        path = Path(path)
        vals = self.values.reshape(self.mesh.size, -1)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"] + [f"value{k}" if vals.shape[1] > 1 else "value" for k in range(vals.shape[1])])
            for z, row in zip(self.mesh.nodes, vals):
                w.writerow([repr(float(z.real)), repr(float(z.imag))] + [repr(float(v)) for v in row])
        header = dict(self.mesh.params(), components=vals.shape[1])
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, sort_keys=True))
        return path

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        path = Path(path)
        header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        sector = Sector(header["alpha"], complex(*header["vertex"]), header["radius"])
        mesh = build_mesh(sector, header["radius"], header["n"], header["grading"])
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] != mesh.size or not np.allclose(data[:, 0] + 1j * data[:, 1], mesh.nodes, rtol=0, atol=1e-12):
            raise ValueError("CSV nodes do not match the mesh in the header")
        vals = data[:, 2:]
        return cls(mesh, vals[:, 0] if header["components"] == 1 else vals)


def _check(mesh: QuadratureMesh, f: GridFunction) -> np.ndarray:
    if f.mesh is not mesh and f.mesh.params() != mesh.params():
        raise ValueError("grid function lives on a different mesh")
    v = f.values
    if v.ndim != 1:
        raise ValueError("scalar grid function expected")
    if not np.all(np.isfinite(v)):
        raise ValueError("data must be finite")
    return v


def _R2(mesh: QuadratureMesh) -> float:
    return mapped_radius(mesh.sector) ** 2


def _self_term(mesh: QuadratureMesh) -> np.ndarray:
    # Green function averaged over a disk of the cell's area around each node:
    # regular part plus the exact mean of log|x - y| / (2 pi)
    a = np.sqrt(mesh.weights / np.pi)
    return robin_function(mesh.sector, mesh.nodes) + (np.log(a) - 0.5) / TWO_PI


def solve_dirichlet(mesh: QuadratureMesh, f: GridFunction) -> GridFunction:
    """``F = G f`` by node quadrature with a local log correction on the diagonal."""
    v = _check(mesh, f)
    c = v * mesh.weights
    z, _ = mesh.mapped
    skip = np.arange(mesh.size)
    out = _sums.green_sums(z, z, c, _R2(mesh), skip)
    out += c * _self_term(mesh)
    return GridFunction(mesh, out)


def green_matrix(mesh: QuadratureMesh) -> np.ndarray:
    """Dense symmetric matrix ``G`` with ``solve_dirichlet = G @ (f w)``; small meshes only."""
    if mesh.size > 4096:
        raise ValueError("dense Green matrix limited to 4096 nodes")
    z, _ = mesh.mapped
    N = mesh.size
    G = np.empty((N, N))
    for i in range(N):
        c = np.zeros(N)
        c[i] = 1.0
        G[:, i] = _sums.green_sums(z, z, c, _R2(mesh), np.arange(N))
    G = np.triu(G, 1)
    G = G + G.T
    G[np.diag_indices(N)] = _self_term(mesh)
    return G


def _targets(mesh: QuadratureMesh, x):
    """Mapped targets plus the index of a coinciding node (``-1`` if none)."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    loc = x - mesh.sector.vertex
    if np.any(loc == 0):
        raise SingularityError("evaluation at the vertex")
    if not all(mesh.sector.contains(p) for p in x.ravel()):
        raise ValueError("evaluation point outside the sector")
    pts = np.stack([loc.real, loc.imag], axis=-1)
    dist, idx = cKDTree(np.stack([mesh.local.real, mesh.local.imag], axis=-1)).query(pts)
    skip = np.where(dist < NODE_MATCH_RTOL * (1 + np.abs(loc)), idx, -1).astype(np.int64)
    z, dz, _ = change_of_angle(mesh.sector.alpha, loc)
    return loc, z, dz, skip


def _local_corrections(mesh, loc, skip):
    if skip.size == mesh.size and np.array_equal(skip, np.arange(mesh.size)):
        return mesh.node_corrections
    return _local_corrections_at(mesh, loc, skip)


def _local_corrections_at(mesh, loc, skip):
    """Per unit ``f(x)``: exact minus lattice integrals of the local approximants.

    The pulled-back kernel near ``y = x`` is ``-1/d + kappa/2`` (velocity) and
    ``-1/d^2 + kappa/d`` (Hessian), ``d = y - x``, ``kappa = Z''/Z'(x)``; near
    each mirror point ``y*`` across a ray or the arc it is ``1/e - kappa/2``
    and ``1/e^2 - kappa/e`` with ``e = y* - x``. Subtracting these with weight
    ``f(x)`` and adding back their exact integrals leaves a smooth integrand,
    which the midpoint sum handles even on the thin cells along the boundary.
    """
    sector = mesh.sector
    kappa = second_derivative_ratio(sector.alpha, loc)
    active = _active_reflections(sector, loc)
    R = sector.truncation_radius
    sv, sh = _sums.local_sums(loc, kappa, mesh.local, mesh.weights, skip, active, np.exp(2j * sector.alpha), R * R)
    first, square = reflected_integrals(sector, loc)
    J = _cauchy_local(sector, loc)
    vel = -J + np.sum(np.where(active, first, 0), axis=-1) - sv
    hess = _square_local(sector, loc) + kappa * J + np.sum(np.where(active, square - kappa[..., None] * first, 0), axis=-1) - sh
    # the omitted self cell also carries the constant kappa / 2
    vel = vel + np.where(skip >= 0, 0.5 * kappa * mesh.weights[np.maximum(skip, 0)], 0)
    return vel, hess


def _target_values(mesh, v, loc, skip):
    off_node = skip < 0
    f_x = v[np.maximum(skip, 0)]
    if np.any(off_node):
        f_x = np.where(off_node, GridFunction(mesh, v).interpolate(loc + mesh.sector.vertex), f_x)
    return f_x


def _holomorphic_velocity(mesh, v, z, dz, skip, f_x, vel_corr):
    # u = conj(H) with H = Z'(x) (-i / 2 pi) sum_j h(Z(x), Z(y_j)) c_j
    zs, _ = mesh.mapped
    S = _sums.h_sums(z, zs, v * mesh.weights, _R2(mesh), skip, True)
    return (-1j / TWO_PI) * (dz * S + f_x * vel_corr)


def velocity_field(mesh: QuadratureMesh, f: GridFunction, x) -> np.ndarray:
    """``u = grad^perp G f`` at points ``x``; returns ``(..., 2)``.

    A target that coincides with a node omits that node (principal value);
    the local singular parts are integrated exactly.
    """
    v = _check(mesh, f)
    shape = np.shape(x)
    loc, z, dz, skip = _targets(mesh, x)
    vel_corr, _ = _local_corrections(mesh, loc, skip)
    u = np.conj(_holomorphic_velocity(mesh, v, z, dz, skip, _target_values(mesh, v, loc, skip), vel_corr))
    return np.stack([u.real, u.imag], axis=-1).reshape(shape + (2,))


def _as_jacobian(w1, w2):
    out = np.empty(w1.shape + (2, 2))
    out[..., 0, 0], out[..., 1, 0] = w1.real, w1.imag
    out[..., 0, 1], out[..., 1, 1] = w2.real, w2.imag
    return out


def _segment_integral(x, a, b):
    # int_a^b dconj(y) / (x - y) along the straight segment
    d = b - a
    return np.conj(d) / d * np.log((x - a) / (x - b))


def _arc_dlog(x, y0, y1):
    # increment of log(y - x) along a counterclockwise arc piece; arg(y - x)
    # increases monotonically for x inside the circle, so take it in [0, 2 pi);
    # from outside a short piece subtends less than pi
    r = (y1 - x) / (y0 - x)
    arg = np.angle(r)
    arg = np.where(np.abs(x) < np.abs(y0), np.mod(arg, 2 * math.pi), arg)
    return np.log(np.abs(r)) + 1j * arg


def _arc_pieces(phi0, phi1, pieces=16):
    phis = np.linspace(phi0, phi1, pieces + 1)
    return zip(phis[:-1], phis[1:])


def _arc_integral(x, R, phi0, phi1):
    # same along y = R e^{i phi}; antiderivative in w = e^{i phi} is
    # -(R/x)^2 (log w - log(x - R w)) + R / (x w), continued piece by piece
    out = 0j
    for p0, p1 in _arc_pieces(phi0, phi1):
        w0, w1 = np.exp(1j * p0), np.exp(1j * p1)
        dlog = 1j * (p1 - p0) - _arc_dlog(x, R * w0, R * w1)
        out = out - (R / x) ** 2 * dlog + R / x * (1 / w1 - 1 / w0)
    return out


def inverse_square_pv(sector: Sector, x) -> np.ndarray:
    """``p.v. int -1/(x - y)^2 dy`` over the truncated sector, by Stokes on its boundary."""
    if not sector.truncated:
        raise ValueError("needs a truncated sector")
    return _square_local(sector, np.asarray(x, dtype=complex) - sector.vertex)


def _square_local(sector, x):
    # vertex at the origin; for x outside the closed sector this is the plain integral
    R, a = sector.truncation_radius, sector.alpha
    corner = R * np.exp(1j * a)
    loop = _segment_integral(x, 0j, R + 0j) + _arc_integral(x, R, 0.0, a) + _segment_integral(x, corner, 0j)
    return -0.5j * loop


def _cauchy_segment(x, a, b):
    # int_a^b (conj(y) - conj(x)) / (y - x) dy
    d, A = b - a, a - x
    return np.conj(d) + (np.conj(A) - np.conj(d) * A / d) * np.log((b - x) / A)


def _cauchy_arc(x, R, phi0, phi1):
    # same along y = R e^{i phi}, using conj(y) = R^2 / y
    out = 0j
    for p0, p1 in _arc_pieces(phi0, phi1):
        y0, y1 = R * np.exp(1j * p0), R * np.exp(1j * p1)
        dlog = _arc_dlog(x, y0, y1)
        out = out + (R * R / x) * (dlog - 1j * (p1 - p0)) - np.conj(x) * dlog
    return out


def cauchy_area_integral(sector: Sector, x) -> np.ndarray:
    """``int 1/(y - x) dy`` over the truncated sector, by Stokes on its boundary."""
    if not sector.truncated:
        raise ValueError("needs a truncated sector")
    return _cauchy_local(sector, np.asarray(x, dtype=complex) - sector.vertex)


def _cauchy_local(sector, x):
    R, a = sector.truncation_radius, sector.alpha
    corner = R * np.exp(1j * a)
    loop = _cauchy_segment(x, 0j, R + 0j) + _cauchy_arc(x, R, 0.0, a) + _cauchy_segment(x, corner, 0j)
    return -0.5j * loop


def _active_reflections(sector, x):
    # which reflections of the kernel sit close to x: across the nearer ray when
    # the mirror point lies outside the sector, and across the arc away from the vertex
    a, R = sector.alpha, sector.truncation_radius
    theta = np.mod(np.angle(x), 2 * math.pi)
    gap = math.pi - 0.5 * a
    active = np.empty(x.shape + (3,), dtype=np.bool_)
    active[..., 0] = (theta <= 0.5 * a) & (theta <= gap)
    active[..., 1] = (theta > 0.5 * a) & (a - theta <= gap)
    active[..., 2] = np.abs(x) > 0.25 * R
    return active


def reflected_integrals(sector: Sector, x):
    """Exact ``int 1/(y* - x) dy`` and ``int 1/(y* - x)^2 dy`` over the sector.

    ``y*`` runs over the mirror images of ``y`` across the ray ``theta = 0``,
    the ray ``theta = alpha`` and the arc; ``x`` is in vertex-local
    coordinates. Returns two ``(..., 3)`` arrays in that order.
    """
    x = np.asarray(x, dtype=complex)
    R, a = sector.truncation_radius, sector.alpha
    area = 0.5 * a * R * R
    xb = np.conj(x)
    rot = np.exp(2j * a)
    first = np.empty(x.shape + (3,), dtype=complex)
    square = np.empty(x.shape + (3,), dtype=complex)
    first[..., 0] = np.conj(_cauchy_local(sector, xb))
    square[..., 0] = -np.conj(_square_local(sector, xb))
    first[..., 1] = np.conj(rot) * np.conj(_cauchy_local(sector, rot * xb))
    square[..., 1] = -np.conj(rot * rot) * np.conj(_square_local(sector, rot * xb))
    # y* = R^2 / conj(y); with c = R^2 / conj(x) expand y / (y - c) and y^2 / (y - c)^2
    c = R * R / xb
    Jc = _cauchy_local(sector, c)
    Sc = -_square_local(sector, c)
    first[..., 2] = np.conj(-(area + c * Jc) / xb)
    square[..., 2] = np.conj((area + 2 * c * Jc + c * c * Sc) / xb**2)
    return first, square


def hessian_split(mesh: QuadratureMesh, f: GridFunction, x):
    """Split ``D u = R1 + R2`` of the velocity gradient at ``x``.

    ``R1`` carries the derivative of the conformal factor, ``R1_j =
    conj(d_j Z' / Z') u``; ``R2`` is the pulled-back principal-value
    singular integral ``conj(Z' T(Z) d_j Z)``. All three returns have shape
    ``(..., 2, 2)`` with ``[..., i, j] = component i of direction j``.

    ``R2`` includes the local term ``f(x)/2`` times the rotation by ``pi/2``
    carried by the distributional derivative of the kernel. The singular
    and near-singular parts of the kernel are treated as in
    ``_local_corrections``, which removes the lattice error of non-square
    cells, of the small cells at the vertex and of the thin cells along the
    rays and the arc.

    Nodes are always admissible; other probes must keep the innermost cell
    ring's radius away from the vertex.
    """
    v = _check(mesh, f)
    shape = np.shape(x)
    loc, z, dz, skip = _targets(mesh, x)
    off_node = skip < 0
    if np.any(off_node & (np.abs(loc) < mesh.rho_edges[1])):
        raise ValueError("probe closer to the vertex than one mesh cell")
    f_x = _target_values(mesh, v, loc, skip)
    vel_corr, hess_corr = _local_corrections(mesh, loc, skip)
    zs, _ = mesh.mapped
    S, Sp = _sums.h_hprime_sums(z, zs, v * mesh.weights, _R2(mesh), skip, True)
    u = np.conj((-1j / TWO_PI) * (dz * S + f_x * vel_corr))
    ratio = np.conj(second_derivative_ratio(mesh.sector.alpha, loc))
    R1 = _as_jacobian(ratio * u, -1j * ratio * u)
    Hp = (-1j / TWO_PI) * (Sp * dz**2 + f_x * hess_corr)
    # distributional part of D_z K: rotation by f / 2, so that curl u = f
    local = 0.5j * f_x
    R2 = _as_jacobian(np.conj(Hp) + local, np.conj(1j * Hp) + 1j * local)
    out = tuple(a.reshape(shape + (2, 2)) for a in (R1, R2, R1 + R2))
    return out


# -- singular solutions -------------------------------------------------------


def cutoff(rho, r0: float):
    """Quintic C^2 bump: 1 on ``[0, r0/2]``, 0 on ``[r0, inf)``."""
    s = np.clip((np.asarray(rho, dtype=float) - 0.5 * r0) / (0.5 * r0), 0.0, 1.0)
    return 1.0 - s**3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class SingularSolution:
    """Corner profile ``eta(rho) rho^{k pi / alpha} sin(k pi theta / alpha)`` (or its resonant form)."""

    alpha: float
    k: int
    r0: float
    corner: int = 0
    vertex: complex = 0j

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.r0 > 0:
            raise ValueError("cutoff radius must be positive")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "vertex", complex(self.vertex))

    @property
    def exponent(self) -> float:
        return self.k * math.pi / self.alpha

    @property
    def resonant(self) -> bool:
        e = self.exponent
        return abs(e - round(e)) <= 1e-12 * max(1.0, e)

    @classmethod
    def for_sector(cls, sector: Sector, k: int, r0: float | None = None) -> "SingularSolution":
        if r0 is None:
            if not sector.truncated:
                raise ValueError("r0 is required on an infinite sector")
            r0 = 0.5 * sector.truncation_radius
        return cls(sector.alpha, k, r0, 0, sector.vertex)


def singular_solution(s: SingularSolution, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex) - s.vertex
    rho = np.abs(x)
    theta = np.mod(np.angle(x), TWO_PI)
    nu = s.exponent
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(rho > 0, rho**nu, 0.0)
        if s.resonant:
            log_rho = np.where(rho > 0, np.log(np.where(rho > 0, rho, 1.0)), 0.0)
            shape = log_rho * np.sin(nu * theta) + theta * np.cos(nu * theta)
        else:
            shape = np.sin(nu * theta)
    return cutoff(rho, s.r0) * power * shape


def h1_inner(mesh: QuadratureMesh, a, b) -> float:
    """Discrete ``H^1`` inner product: quadrature of ``grad a . grad b + a b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ga, gb = mesh.gradient(a), mesh.gradient(b)
    return mesh.integrate(np.sum(ga * gb, axis=-1) + a * b)


def project_singular(mesh: QuadratureMesh, F: GridFunction, basis) -> tuple[np.ndarray, GridFunction]:
    """``H^1``-orthogonal projection of ``F`` on ``span(basis)``."""
    v = _check(mesh, F)
    basis = list(basis)
    if not basis:
        return np.zeros(0), GridFunction(mesh, np.zeros(mesh.size))
    S = np.stack([singular_solution(s, mesh.nodes) for s in basis])
    grads = mesh.gradient(S.T)  # (N, m, 2)
    w = mesh.weights
    gram = np.einsum("n,nid,njd->ij", w, grads, grads) + np.einsum("n,in,jn->ij", w, S, S)
    rhs = np.einsum("n,nid,nd->i", w, grads, mesh.gradient(v)) + S @ (w * v)
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError("singular Gram matrix: basis is (numerically) dependent")
    coef = np.linalg.solve(gram, rhs)
    return coef, GridFunction(mesh, coef @ S)


# -- norms --------------------------------------------------------------------


def lp_norm(values, weights, p: float) -> float:
    """Weighted ``L^p`` norm evaluated in log space."""
    a = np.abs(np.asarray(values, dtype=float))
    if a.ndim > 1:
        a = np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values")
    if math.isinf(p):
        return float(a.max(initial=0.0))
    if p < 1:
        raise ValueError("p must be >= 1")
    nz = a > 0
    if not nz.any():
        return 0.0
    return float(np.exp(logsumexp(p * np.log(a[nz]) + np.log(np.asarray(weights)[nz])) / p))


def weighted_norm_P(F: GridFunction, k: int, p: float) -> float:
    """``sum_{j<=k} || |x|^{j-2} D^j F ||_p`` with finite-difference derivatives."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if p < 1:
        raise ValueError("p must be >= 1")
    m = F.mesh
    r = np.abs(m.local)
    derivs = [F.values]
    if k >= 1:
        derivs.append(m.gradient(F.values))
    if k >= 2:
        derivs.append(m.hessian(F.values))
    total = 0.0
    for j, D in enumerate(derivs):
        scale = r ** (j - 2.0)
        total += lp_norm(D * scale.reshape((-1,) + (1,) * (D.ndim - 1)), m.weights, p)
    return total


def orlicz_norm(phi: GridFunction, domain_area: float, rtol: float = 1e-10) -> float:
    """``inf{t > 0 : int exp(|phi| / t) <= 1 + |Omega|}`` by root finding in ``log t``."""
    a = np.abs(phi.values)
    if a.ndim > 1:
        a = np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values")
    if not domain_area > 0:
        raise ValueError("domain area must be positive")
    w = phi.mesh.weights
    target = math.log1p(domain_area)
    if math.log(w.sum()) >= target:
        raise ValueError("total weight exceeds 1 + |Omega|; the norm is infinite")
    amax = a.max(initial=0.0)
    if amax == 0:
        return 0.0
    logw = np.log(w)

    def g(s):
        return logsumexp(a * math.exp(-s) + logw) - target

    # the constraint holds at t = amax / log((1 + A) / W) and fails at the log-mean bound below it
    hi = math.log(amax / (target - math.log(w.sum()))) + 1e-9  # margin: constant phi has its root exactly here
    lo = hi - 1.0
    while g(lo) <= 0:
        lo -= 1.0
    s = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=rtol)
    return math.exp(s)
