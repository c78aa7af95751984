"""Muckenhoupt weights, maximal operators on grids and weighted operator norms.

Plane functions live on a cell-centred ``n x n`` grid over the square
``[-L/2, L/2]^2``; the grid is the whole universe, so cube and ball averages
are taken over the nodes they contain (functions vanish outside).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import logsumexp

from .geometry import conjugate_exponent

N_SHIFTS = 9
EXTRA_LEVELS = 2


# -- weights ------------------------------------------------------------------


@dataclass(frozen=True)
class Weight:
    """Positive weight. ``kind='power'`` is ``scale |x|^eta``; ``'custom'`` wraps ``fn``.

    ``delta`` and ``p`` record the ``w_{p, delta}`` parameters when the
    weight was built by :meth:`power`.
    """

    kind: str
    eta: float = 0.0
    scale: float = 1.0
    fn: Callable | None = field(default=None, compare=False)
    delta: float | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("power", "custom"):
            raise ValueError("kind must be 'power' or 'custom'")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom weights need an evaluator")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def constant(cls, c: float = 1.0) -> "Weight":
        return cls("power", 0.0, c)

    @classmethod
    def power(cls, delta: float, p: float, alpha: float | None = None) -> "Weight":
        """``|x|^{2 delta (p-1)}``, or ``((pi/alpha) |x|^delta)^{2(p-1)}`` when ``alpha`` is given."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if p < 2:
            raise ValueError("power weights need p >= 2")
        scale = 1.0 if alpha is None else (math.pi / alpha) ** (2 * (p - 1))
        return cls("power", 2 * delta * (p - 1), scale, delta=delta, p=p)

    @classmethod
    def custom(cls, fn: Callable) -> "Weight":
        return cls("custom", fn=fn)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if self.kind == "power":
            r = np.abs(x)
            with np.errstate(divide="ignore"):
                return self.scale * np.power(r, self.eta) if self.eta else np.full(r.shape, self.scale)
        return np.asarray(self.fn(x), dtype=float)

    def log(self, x) -> np.ndarray:
        """``log w(x)`` without overflow for large exponents."""
        x = np.asarray(x, dtype=complex)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                return math.log(self.scale) + self.eta * np.log(np.abs(x))
        return np.log(self(x))

    def scaled(self, c: float) -> "Weight":
        if self.kind == "power":
            return Weight("power", self.eta, self.scale * c, delta=self.delta, p=self.p)
        fn = self.fn
        return Weight.custom(lambda x: c * fn(x))


def dual_weight(w: Weight, p: float) -> Weight:
    """``w^* = w^{-p'/p} = w^{-1/(p-1)}``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    e = -1.0 / (p - 1)
    if w.kind == "power":
        return Weight("power", w.eta * e, w.scale**e)
    fn = w.fn
    return Weight.custom(lambda x: np.asarray(fn(x), dtype=float) ** e)


# -- A_p characteristic ---------------------------------------------------------


def _radial_ball_integral(eta: float, center: complex, r: float) -> float:
    """``int_B |x|^eta dx`` by exact reduction to one radial integral."""
    if eta <= -2:
        raise ValueError("weight is not locally integrable (exponent <= -2)")
    c = abs(center)
    total = 0.0
    inner = r - c
    if inner > 0:
        total += 2 * math.pi * inner ** (eta + 2) / (eta + 2)
    lo, hi = abs(inner), c + r
    if c > 0 and hi > lo:
        half = 0.5 * (hi - lo)

        def arc(u):
            # s = lo + half (1 - cos u) removes the square-root endpoint behaviour of the arc length
            s = lo + half * (1 - math.cos(u))
            if s == 0:
                return 0.0
            cosine = min(1.0, max(-1.0, (s * s + c * c - r * r) / (2 * s * c)))
            return s ** (eta + 1) * 2 * math.acos(cosine) * half * math.sin(u)

        with warnings.catch_warnings():
            # accuracy is checked below against a looser, explicit tolerance
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(arc, 0.0, math.pi, limit=200, epsabs=0.0, epsrel=1e-12)
        if not math.isfinite(val) or err > 1e-6 * abs(val) + 1e-300:
            raise ValueError("divergent or inaccurate ball quadrature")
        total += val
    return total


_GL_R = np.polynomial.legendre.leggauss(64)


def _polar_ball_integral(fn, center: complex, r: float, n_theta: int = 128) -> float:
    x, wx = _GL_R
    s = 0.5 * r * (x + 1)
    ws = 0.5 * r * wx
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    pts = center + s[:, None] * np.exp(1j * th[None, :])
    vals = np.asarray(fn(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("divergent ball quadrature")
    return float(np.sum(ws[:, None] * s[:, None] * vals) * 2 * math.pi / n_theta)


def ball_integral(w: Weight, center: complex, r: float) -> float:
    if w.kind == "power":
        return w.scale * _radial_ball_integral(w.eta, complex(center), r)
    return _polar_ball_integral(w, complex(center), r)


def sample_balls(size: float = 1.0, depth: int = 6, lattice: int = 5) -> list[tuple[complex, float]]:
    """Balls centred on a ``lattice x lattice`` grid of ``[-size/2, size/2]^2``, radii ``size 2^-k``."""
    g = np.linspace(-size / 2, size / 2, lattice)
    centers = [complex(a, b) for a in g for b in g]
    return [(c, size * 2.0**-k) for k in range(depth + 1) for c in centers]


def ap_characteristic(w: Weight, p: float, balls) -> float:
    """Sampled ``[w]_{A_p}``: a lower bound for the supremum over all balls."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    ws = dual_weight(w, p)
    pp = conjugate_exponent(p)
    best = 0.0
    for c, r in balls:
        area = math.pi * r * r
        val = math.exp(math.log(ball_integral(w, c, r)) / p + math.log(ball_integral(ws, c, r)) / pp) / area
        best = max(best, val)
    return best**p


def power_weight_ap_bound(delta: float, p: float) -> float:
    """Envelope ``(1 - delta)^{-(p-1)}`` for ``[|x|^{2 delta (p-1)}]_{A_p}``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return (1 - delta) ** (-(p - 1))


def marcinkiewicz_constant(p0: float, p1: float, p: float) -> float:
    if not (1 <= p0 < p < p1 < math.inf):
        raise ValueError("need 1 <= p0 < p < p1 < inf")
    return 2 * (p1 / (p * (p1 - p)) + p0 / (p * (p - p0))) ** (1 / p)


# -- plane grids ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaneGridFunction:
    """Values on the cell centres of an ``n x n`` grid over ``[-L/2, L/2]^2`` (``values[i, j]`` at ``(x_i, y_j)``)."""

    values: np.ndarray
    L: float = 1.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("values must be a square 2-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.L / self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * (np.arange(self.n) + 0.5)

    @cached_property
    def points(self) -> np.ndarray:
        return self.axis[:, None] + 1j * self.axis[None, :]

    def like(self, values) -> "PlaneGridFunction":
        return PlaneGridFunction(values, self.L)


def weighted_lp(f: PlaneGridFunction, w: Weight | np.ndarray | None, p: float) -> float:
    """``(sum |f|^p w h^2)^{1/p}`` in log space; ``w=None`` is the unweighted norm."""
    a = np.abs(f.values)
    if a.ndim == 2 and a.shape != (f.n, f.n):
        raise ValueError("shape mismatch")
    nz = a > 0
    if not nz.any():
        return 0.0
    if w is None:
        logw = np.zeros(a.shape)
    elif isinstance(w, Weight):
        logw = w.log(f.points)
    else:
        logw = np.log(np.asarray(w, dtype=float))
    return float(np.exp((logsumexp(p * np.log(a[nz]) + logw[nz]) + 2 * math.log(f.h)) / p))


# -- maximal operators ----------------------------------------------------------


def hl_maximal(f: PlaneGridFunction, ratio: float = math.sqrt(2)) -> PlaneGridFunction:
    """Centred discrete Hardy-Littlewood maximal function.

    Balls of radii ``h/2 * ratio^k`` up to the grid diagonal; each average is
    over the nodes of the ball that lie in the grid.
    """
    a = np.abs(f.values)
    n = f.n
    out = a.copy()
    ones = np.ones_like(a)
    r = 1.0  # in cells; radius 1/2 only holds the centre node
    rmax = math.sqrt(2) * n
    while r <= rmax:
        m = int(math.floor(r))
        k = np.arange(-m, m + 1)
        disk = ((k[:, None] ** 2 + k[None, :] ** 2) <= r * r).astype(float)
        s = fftconvolve(a, disk, mode="same")
        c = np.rint(fftconvolve(ones, disk, mode="same"))
        out = np.maximum(out, np.clip(s, 0, None) / c)
        r *= ratio
    return f.like(out)


def _inverse_of_three(k: int) -> int:
    return pow(3, -1, 2**k) if k > 0 else 0


@dataclass(frozen=True)
class DyadicGrid:
    """Nested dyadic cubes on the node grid: level ``k`` cubes have side ``2^k`` nodes.

    Levels run ``0..depth``. ``shift`` in ``0..8`` picks ``(tx, ty) in {0,1,2}^2``;
    level-``k`` cube boundaries sit at ``t * 3^{-1} mod 2^k`` (a discrete
    one-third shift, nested across levels).
    """

    depth: int
    shift: int = 0
    h: float = 1.0

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0 <= self.shift < N_SHIFTS:
            raise ValueError("shift index must lie in 0..8")

    @property
    def offsets(self) -> tuple[int, int]:
        return divmod(self.shift, 3)

    def cube_ids(self, n: int, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis cube index of each node at ``level``."""
        side = 2**level
        inv = _inverse_of_three(level)
        idx = np.arange(n)
        return tuple((idx - (t * inv) % side) // side for t in self.offsets)

    @classmethod
    def for_grid(cls, n: int, shift: int = 0, h: float = 1.0) -> "DyadicGrid":
        """Grid whose top cubes are ``2^EXTRA_LEVELS`` times the data grid."""
        J = int(math.ceil(math.log2(n)))
        return cls(J + EXTRA_LEVELS, shift, h)


def _cube_averages(num: np.ndarray, den: np.ndarray, grid: DyadicGrid):
    """Yield per-node ``sum_Q num / sum_Q den`` for each level, from fine to coarse."""
    n = num.shape[0]
    for level in range(grid.depth + 1):
        ix, iy = grid.cube_ids(n, level)
        ix = ix - ix.min()
        iy = iy - iy.min()
        ny = iy.max() + 1
        cid = (ix[:, None] * ny + iy[None, :]).ravel()
        size = cid.max() + 1
        sn = np.bincount(cid, weights=num.ravel(), minlength=size)
        sd = np.bincount(cid, weights=den.ravel(), minlength=size)
        yield level, cid, sn, sd


def _check_support(f: PlaneGridFunction, grid: DyadicGrid) -> None:
    nz = np.nonzero(f.values)
    if nz[0].size == 0:
        return
    extent = max(nz[0].max() - nz[0].min(), nz[1].max() - nz[1].min()) + 1
    if extent > 2**grid.depth:
        raise ValueError("support of f escapes the root cube")


def dyadic_maximal(f: PlaneGridFunction, grid: DyadicGrid) -> PlaneGridFunction:
    return weighted_dyadic_maximal(f, None, grid)


def _weight_values(w, f: PlaneGridFunction) -> np.ndarray:
    if w is None:
        return np.ones(f.values.shape)
    v = w(f.points) if isinstance(w, Weight) else np.asarray(w, dtype=float)
    if v.shape != f.values.shape or not np.all(v > 0):
        raise ValueError("weight must be positive on every node")
    return v


def weighted_dyadic_maximal(f: PlaneGridFunction, w, grid: DyadicGrid) -> PlaneGridFunction:
    """``sup_{Q ni x} w(Q)^{-1} int_Q |f| w`` over the dyadic ancestors of each node."""
    _check_support(f, grid)
    wv = _weight_values(w, f)
    a = np.abs(f.values)
    out = np.zeros(a.size)
    for _, cid, sn, sd in _cube_averages(a * wv, wv, grid):
        if np.any(sd <= 0):
            raise ValueError("a cube has zero weight")
        out = np.maximum(out, (sn / sd)[cid])
    return f.like(out.reshape(a.shape))


def shifted_dyadic_maximal(f: PlaneGridFunction, depth: int | None = None) -> PlaneGridFunction:
    """Nodewise maximum of the nine shifted dyadic maximal functions."""
    depth = DyadicGrid.for_grid(f.n).depth if depth is None else depth
    out = np.zeros(f.values.shape)
    for s in range(N_SHIFTS):
        out = np.maximum(out, dyadic_maximal(f, DyadicGrid(depth, s)).values)
    return f.like(out)


def dyadic_characteristic(w, p: float, grid: DyadicGrid, like: PlaneGridFunction) -> float:
    """``max_Q <w>_Q <w^*>_Q^{p-1}`` over the cubes of ``grid`` (clipped to the node grid)."""
    wv = _weight_values(w, like)
    ws = wv ** (-1.0 / (p - 1))
    ones = np.ones(wv.shape)
    best = 0.0
    for (_, _, sw, cnt), (_, _, sws, _) in zip(_cube_averages(wv, ones, grid), _cube_averages(ws, ones, grid)):
        keep = cnt > 0
        val = (sw[keep] / cnt[keep]) * (sws[keep] / cnt[keep]) ** (p - 1)
        best = max(best, float(val.max()))
    return best


def lerner_check(f: PlaneGridFunction, w, p: float, grid: DyadicGrid) -> float:
    """Largest nodewise ratio of the two sides of Lerner's pointwise bound.

    The characteristic is the dyadic one of ``grid``; nodes where the
    right side vanishes are skipped.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    pp = conjugate_exponent(p)
    wv = _weight_values(w, f)
    ws = wv ** (-1.0 / (p - 1))
    char = dyadic_characteristic(wv, p, grid, f)
    lhs = dyadic_maximal(f.like(np.abs(f.values) * ws), grid).values
    inner = weighted_dyadic_maximal(f, ws, grid).values ** (p / pp) / wv
    rhs = char ** (1 / (p - 1)) * weighted_dyadic_maximal(f.like(inner), wv, grid).values ** (pp / p)
    keep = rhs > 0
    if not keep.any():
        return 0.0
    return float(np.max(lhs[keep] / rhs[keep]))


# -- annular decomposition ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnnularPart:
    j: int
    near: PlaneGridFunction  # f 1_{A_j}
    far: PlaneGridFunction  # f - f 1_{A_j}
    band: np.ndarray  # indicator of B_j


def annular_decompose(f: PlaneGridFunction, js=None) -> list[AnnularPart]:
    """Parts ``f_{j,1} = f 1_{|x| <= 2^{j-1}}``, ``f_{j,2} = f - f_{j,1}``.

    ``js`` defaults to every band ``B_j`` meeting the support.
    """
    r = np.abs(f.points)
    nz = (f.values != 0) & (r > 0)
    band_index = np.floor(np.log2(np.where(r > 0, r, 1.0))).astype(int)
    if js is None:
        if not nz.any():
            return []
        js = range(int(band_index[nz].min()), int(band_index[nz].max()) + 1)
    parts = []
    for j in js:
        near = np.where(r <= 2.0 ** (j - 1), f.values, 0.0)
        parts.append(AnnularPart(j, f.like(near), f.like(f.values - near), (band_index == j) & (r > 0)))
    return parts


# -- weighted operator norms ------------------------------------------------------


def _kernel_stencil(kernel, n: int, h: float) -> np.ndarray:
    k = np.arange(-(n - 1), n)
    d = h * (k[:, None] + 1j * k[None, :])
    d[n - 1, n - 1] = 1.0  # placeholder, zeroed below
    K = np.asarray(kernel(d), dtype=float)
    K = K.reshape(d.shape + (-1,))
    K[n - 1, n - 1] = 0.0  # punctured: the kernel has zero circular mean
    return K


def apply_convolution(kernel, g: PlaneGridFunction) -> np.ndarray:
    """``Tg(x_i) = sum_{j != i} K(x_i - x_j) g_j h^2``; returns ``(n, n, m)`` components."""
    K = _kernel_stencil(kernel, g.n, g.h)
    out = np.stack([fftconvolve(g.values, K[..., c], mode="same") for c in range(K.shape[-1])], axis=-1)
    return out * g.h**2


def random_bumps(n: int, L: float, rng: np.random.Generator, count: int = 5) -> PlaneGridFunction:
    """Sum of Gaussian bumps with log-uniform widths, centred in an annulus that avoids the origin by one cell."""
    f = PlaneGridFunction(np.zeros((n, n)), L)
    h = f.h
    vals = np.zeros((n, n))
    for _ in range(count):
        rad = rng.uniform(h, 0.4 * L)
        ang = rng.uniform(0, 2 * math.pi)
        width = math.exp(rng.uniform(math.log(1.5 * h), math.log(L / 8)))
        amp = rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        vals += amp * np.exp(-np.abs(f.points - rad * np.exp(1j * ang)) ** 2 / (2 * width**2))
    return f.like(vals)


def random_quadrants(n: int, L: float, rng: np.random.Generator, count: int = 5) -> PlaneGridFunction:
    """Sum of checkerboard quadrant patterns ``sign(d_1) sign(d_2)`` cut to disks.

    Same centre and scale law as :func:`random_bumps`; the sign jumps make
    ``Tg`` logarithmically large near each centre.
    """
    f = PlaneGridFunction(np.zeros((n, n)), L)
    h = f.h
    vals = np.zeros((n, n))
    for _ in range(count):
        rad = rng.uniform(h, 0.4 * L)
        ang = rng.uniform(0, 2 * math.pi)
        width = math.exp(rng.uniform(math.log(1.5 * h), math.log(L / 8)))
        amp = rng.choice([-1.0, 1.0])
        d = (f.points - rad * np.exp(1j * ang)) * np.exp(-1j * rng.uniform(0, math.pi))
        vals += amp * np.sign(d.real) * np.sign(d.imag) * (np.abs(d) < 2 * width)
    return f.like(vals)


FAMILIES = {"bumps": random_bumps, "quadrants": random_quadrants}


@dataclass
class NormEstimate:
    p: float
    delta: float | None
    estimate: float
    trials: list[float]
    seed: int
    n: int
    L: float

    def row(self) -> dict:
        return {"p": self.p, "delta": self.delta, "estimate": self.estimate, "estimate_over_p": self.estimate / self.p}


def _trial_ratio(kernel, p, w, n, L, seed_seq, family):
    g = FAMILIES[family](n, L, np.random.default_rng(seed_seq))
    comps = apply_convolution(kernel, g)
    Tg = g.like(np.sqrt(np.sum(comps**2, axis=-1)))
    return weighted_lp(Tg, w, p) / weighted_lp(g, w, p)


def weighted_operator_norm_estimate(kernel, p: float, delta: float | None, trials: int = 8, seed: int = 0,
                                    n: int = 128, L: float = 2.0, workers: int = 1,
                                    family: str = "bumps") -> NormEstimate:
    """Running maximum of ``||Tg||_{L^p(w)} / ||g||_{L^p(w)}`` over random ``g``.

    ``w = |x|^{2 delta (p-1)}``; ``delta=None`` gives the unweighted norm.
    ``family`` picks the random test functions (``'bumps'`` or ``'quadrants'``).
    Trial ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the
    result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if family not in FAMILIES:
        raise ValueError(f"unknown test-function family {family!r}")
    w = None if delta is None else Weight.power(delta, p)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            ratios = list(ex.map(lambda s: _trial_ratio(kernel, p, w, n, L, s, family), seeds))
    else:
        ratios = [_trial_ratio(kernel, p, w, n, L, s, family) for s in seeds]
    return NormEstimate(p, delta, float(np.max(ratios)), [float(r) for r in ratios], seed, n, L)


def write_norm_table(estimates: list[NormEstimate], path, meta: dict | None = None) -> tuple[Path, Path]:
    """CSV ``p, delta, estimate, estimate_over_p`` plus a JSON summary next to it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["p", "delta", "estimate", "estimate_over_p"])
        w.writeheader()
        for e in estimates:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in e.row().items()})
    summary = dict(meta or {})
    if estimates:
        summary.update({"seed": estimates[0].seed, "n": estimates[0].n, "L": estimates[0].L,
                        "rows": [e.row() for e in estimates]})
    jpath = path.with_suffix(".json")
    jpath.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return path, jpath
