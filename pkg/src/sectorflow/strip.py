"""Logarithmic change of variables to the strip ``O_alpha = R x (0, alpha)``
and the Fourier-multiplier solver for
``(d_t + 2/q)^2 U + d_theta^2 U = h``, ``U(t, 0) = U(t, alpha) = 0``.

Transforms in ``t`` are discrete (periodic on ``[t_c - T, t_c + T)``); the
``theta`` integral uses the trapezoid rule on nodes that include both edges,
so the kernel vanishes identically on the boundary rows.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import HALF_PI, conjugate_exponent, epsilon_alpha, singular_exponent

DEFAULT_T = 12.0
WINDOW_FRACTION = 0.1
XI_CHUNK = 64
ALIAS_TOL = 1e-6


def admissible_p_min(alpha: float) -> float:
    """Smallest exponent of the admissible range: 4, or ``2 p_alpha`` for obtuse apertures."""
    if not 0 < alpha < math.pi:
        raise ValueError("aperture must lie in (0, pi)")
    pa = singular_exponent(alpha)
    return 4.0 if pa is None else 2 * pa


def check_admissible(alpha: float, p: float) -> None:
    if abs(alpha - HALF_PI) <= 1e-12:
        raise ValueError("the strip solver excludes alpha = pi/2")
    if p < admissible_p_min(alpha) * (1 - 1e-12) or not math.isfinite(p):
        raise ValueError(f"p = {p} outside the admissible range [{admissible_p_min(alpha)}, inf)")


@dataclass(frozen=True, eq=False)
class StripGrid:
    """``N`` periodic samples of ``t`` and ``M`` nodes of ``[0, alpha]``."""

    alpha: float
    p: float
    N: int = 1024
    M: int = 128
    T: float = DEFAULT_T
    t_center: float = 0.0

    def __post_init__(self) -> None:
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.M < 3:
            raise ValueError("M must be at least 3")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0 < self.alpha < math.pi:
            raise ValueError("aperture must lie in (0, pi)")
        if not self.p > 1:
            raise ValueError("p must exceed 1")

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    @property
    def c(self) -> float:
        """Shift ``2/q`` in ``Xi = 2/q + i xi``."""
        return 2.0 / self.q

    @property
    def dt(self) -> float:
        return 2 * self.T / self.N

    @cached_property
    def t(self) -> np.ndarray:
        return self.t_center - self.T + self.dt * np.arange(self.N)

    @cached_property
    def theta(self) -> np.ndarray:
        return np.linspace(0.0, self.alpha, self.M)

    @cached_property
    def theta_weights(self) -> np.ndarray:
        w = np.full(self.M, self.alpha / (self.M - 1))
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def xi(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, self.dt)

    @cached_property
    def window(self) -> np.ndarray:
        """1 on the inner 90% of the t-range, cosine taper to 0 at the ends."""
        s = np.abs(self.t - self.t_center) / self.T
        edge = 1.0 - WINDOW_FRACTION
        taper = np.cos(0.5 * np.pi * np.clip((s - edge) / WINDOW_FRACTION, 0.0, 1.0)) ** 2
        return np.where(s <= edge, 1.0, taper)

    def params(self) -> dict:
        return {"alpha": self.alpha, "p": self.p, "N": self.N, "M": self.M, "T": self.T, "t_center": self.t_center}


@dataclass(frozen=True, eq=False)
class StripField:
    grid: StripGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.N, self.grid.M):
            raise ValueError(f"expected shape {(self.grid.N, self.grid.M)}, got {v.shape}")
        object.__setattr__(self, "values", v)


# -- kernels ------------------------------------------------------------------


def _scaled_sin(Xi, ax, x):
    # sin(Xi x) e^{-|xi| x} for x >= 0, free of overflow
    return (np.exp(1j * Xi * x - ax * x) - np.exp(-1j * Xi * x - ax * x)) / 2j


def _scaled_cos(Xi, ax, x):
    return (np.exp(1j * Xi * x - ax * x) + np.exp(-1j * Xi * x - ax * x)) / 2


def strip_kernels(xi, theta, y, alpha: float, p: float, *, check: bool = True):
    """``K``, ``L = i xi K`` and ``M = d_theta K`` (broadcast over the inputs).

    On the diagonal ``theta == y`` the ``theta <= y`` branch is used.
    """
    if check:
        check_admissible(alpha, p)
    xi, theta, y = np.broadcast_arrays(np.asarray(xi, float), np.asarray(theta, float), np.asarray(y, float))
    c = 2.0 / conjugate_exponent(p)
    Xi = c + 1j * xi
    ax = np.abs(xi)
    s_alpha = _scaled_sin(Xi, ax, alpha)
    if np.any(np.abs(s_alpha) < 1e-14):
        raise ZeroDivisionError("sin(alpha Xi) vanishes")
    lower = theta <= y
    # theta <= y: sin(Xi th) sin(Xi (y - a)) / (Xi sin(Xi a)); the exponential
    # factors recombine to exp(-|xi| |theta - y|)
    decay = np.exp(-ax * np.abs(theta - y))
    a, b = np.where(lower, theta, alpha - theta), np.where(lower, alpha - y, y)
    K = -_scaled_sin(Xi, ax, a) * _scaled_sin(Xi, ax, b) / (Xi * s_alpha) * decay
    Mlow = -_scaled_cos(Xi, ax, theta) * _scaled_sin(Xi, ax, alpha - y) / s_alpha
    Mhigh = _scaled_cos(Xi, ax, alpha - theta) * _scaled_sin(Xi, ax, y) / s_alpha
    M = np.where(lower, Mlow, Mhigh) * decay
    L = 1j * xi * K
    return K, L, M


def solvability_margin(alpha: float, p: float, xi) -> tuple[np.ndarray, np.ndarray]:
    """``|sin(alpha Xi)|`` and the lower bound ``|sin(2 alpha / q)| cosh(alpha xi)``."""
    c = 2.0 / conjugate_exponent(p)
    xi = np.asarray(xi, dtype=float)
    return np.abs(np.sin(alpha * (c + 1j * xi))), np.abs(math.sin(alpha * c)) * np.cosh(alpha * xi)


# -- solver -------------------------------------------------------------------


def _quadrature_kernels(grid: StripGrid, xi):
    # same formulas as strip_kernels, assembled from 1-d factors on the theta grid
    th = grid.theta
    Xi = (grid.c + 1j * xi)[:, None]
    ax = np.abs(xi)[:, None]
    s0, s1 = _scaled_sin(Xi, ax, th[None, :]), _scaled_sin(Xi, ax, grid.alpha - th[None, :])
    c0, c1 = _scaled_cos(Xi, ax, th[None, :]), _scaled_cos(Xi, ax, grid.alpha - th[None, :])
    s_alpha = _scaled_sin(Xi, ax, grid.alpha)[:, :, None]
    lower = (th[:, None] <= th[None, :])[None]
    decay = np.exp(-np.abs(xi)[:, None, None] * np.abs(th[:, None] - th[None, :])[None])
    K = np.where(lower, s0[:, :, None] * s1[:, None, :], s1[:, :, None] * s0[:, None, :])
    K *= -decay / (Xi[:, :, None] * s_alpha)
    M = np.where(lower, -c0[:, :, None] * s1[:, None, :], c1[:, :, None] * s0[:, None, :])
    M *= decay / s_alpha
    # M jumps by 1 across theta = y; the trapezoid rule wants the mean there
    idx = np.arange(grid.M)
    M[:, idx, idx] += 0.5
    w = grid.theta_weights[None, None, :]
    K *= w
    M *= w
    return K, 1j * xi[:, None, None] * K, M


def strip_solve(h: StripField, *, window: bool = True):
    """Solve the strip problem; returns ``(U, d_t U, d_theta U)``."""
    g = h.grid
    check_admissible(g.alpha, g.p)
    data = h.values * g.window[:, None] if window else h.values
    hh = np.fft.fft(data, axis=0)
    power = np.sum(np.abs(hh) ** 2, axis=1)
    high = np.abs(g.xi) > 0.9 * np.abs(g.xi).max()
    if power.sum() > 0 and power[high].sum() > ALIAS_TOL * power.sum():
        warnings.warn("spectrum of h is not resolved by the t-grid", RuntimeWarning, stacklevel=2)
    out = [np.empty_like(hh) for _ in range(3)]
    for start in range(0, g.N, XI_CHUNK):
        sl = slice(start, start + XI_CHUNK)
        mats = _quadrature_kernels(g, g.xi[sl])
        for o, A in zip(out, mats):
            o[sl] = np.einsum("kij,kj->ki", A, hh[sl])
    U, Ut, Uth = (np.fft.ifft(o, axis=0) for o in out)
    U[:, [0, -1]] = 0.0
    return StripField(g, U), StripField(g, Ut), StripField(g, Uth)


def strip_operator(U: StripField) -> StripField:
    """Discrete ``(d_t + 2/q)^2 + d_theta^2``: spectral in ``t``, centered differences in ``theta``.

    Edge rows are left at zero.
    """
    g = U.grid
    Uh = np.fft.fft(U.values, axis=0)
    part_t = np.fft.ifft((g.c + 1j * g.xi)[:, None] ** 2 * Uh, axis=0)
    d = g.alpha / (g.M - 1)
    out = np.zeros_like(U.values)
    out[:, 1:-1] = part_t[:, 1:-1] + (U.values[:, 2:] - 2 * U.values[:, 1:-1] + U.values[:, :-2]) / d**2
    return StripField(g, out)


# -- transfer between sector and strip ---------------------------------------


def to_strip(F, lap, grid: StripGrid, *, support: tuple[float, float] | None = None):
    """``U = e^{-2t/q} F(e^{t + i theta})`` and ``h = e^{2t/p} Lap F(e^{t + i theta})``.

    ``F`` and ``lap`` are callables of the local point or
    :class:`~sectorflow.elliptic.GridFunction` objects (bilinear
    interpolation). ``support`` is the radial range ``(rho_min, rho_max)``
    that may be sampled; grid functions default to their node range.
    """
    rho = np.exp(grid.t)
    if support is None:
        for obj in (F, lap):
            mesh = getattr(obj, "mesh", None)
            if mesh is not None:
                support = (mesh.rho[0], mesh.rho[-1])
    if support is not None and (rho[0] < support[0] * (1 - 1e-12) or rho[-1] > support[1] * (1 + 1e-12)):
        raise ValueError("t-range exceeds the support of the sector data")
    x = rho[:, None] * np.exp(1j * grid.theta[None, :])

    def sample(obj):
        if hasattr(obj, "interpolate"):
            return obj.interpolate(x.ravel() + obj.mesh.sector.vertex).reshape(x.shape)
        return np.asarray(obj(x), dtype=complex)

    U = np.exp(-grid.c * grid.t)[:, None] * sample(F)
    h = np.exp((2.0 / grid.p) * grid.t)[:, None] * sample(lap)
    U[:, [0, -1]] = 0.0
    return StripField(grid, U), StripField(grid, h)


def strip_lp(values, grid: StripGrid, p: float) -> float:
    """``L^p(O_alpha)`` norm of a scalar or vector field on the strip grid."""
    a = np.abs(np.asarray(values))
    if a.ndim == 3:
        a = np.sqrt(np.sum(a**2, axis=-1))
    w = grid.dt * grid.theta_weights[None, :]
    if math.isinf(p):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    return float(top * np.sum(w * (a / top) ** p) ** (1 / p))


def strip_gradient(U: StripField) -> np.ndarray:
    """``(d_t U, d_theta U)`` by differences (one-sided at the theta edges)."""
    g = U.grid
    Ut = np.gradient(U.values, g.dt, axis=0)
    Uth = np.gradient(U.values, g.theta, axis=1, edge_order=2)
    return np.stack([Ut, Uth], axis=-1)


def strip_w1p(U: StripField, p: float, grad=None) -> float:
    """``||U||_p + ||grad U||_p``; ``grad`` may be supplied (e.g. from the solver)."""
    if grad is None:
        grad = strip_gradient(U)
    return strip_lp(U.values, U.grid, p) + strip_lp(grad, U.grid, p)


# -- bound profile ------------------------------------------------------------


ENVELOPES = ("corrected", "paper")


@dataclass
class BoundProfile:
    """Normalized kernel ratios on a ``(xi, theta, y)`` grid and their suprema.

    ``ratios[name]`` has shape ``(len(xi), len(theta), len(y))``. The groups
    are ``K``: ``|Xi||K| + |xi dK|``, ``ML``: ``|M| + |L|`` and ``dML``:
    ``|xi dM| + |xi dL|``, each times ``eps_alpha`` over its envelope.
    """

    alpha: float
    p: float
    envelope: str
    xi: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    ratios: dict = field(repr=False)

    @property
    def suprema(self) -> dict:
        return {k: float(np.max(v)) for k, v in self.ratios.items()}

    def to_csv(self, path) -> Path:
        path = Path(path)
        names = sorted(self.ratios)
        X, TH, Y = np.meshgrid(self.xi, self.theta, self.y, indexing="ij")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "theta", "y"] + [f"ratio_{n}" for n in names])
            cols = [X.ravel(), TH.ravel(), Y.ravel()] + [self.ratios[n].ravel() for n in names]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])
        return path

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "p": self.p,
            "envelope": self.envelope,
            "xi_range": [float(self.xi.min()), float(self.xi.max())],
            "n_xi": int(self.xi.size),
            "n_theta": int(self.theta.size),
            "n_y": int(self.y.size),
            "suprema": self.suprema,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        return path


def kernel_bound_profile(alpha: float, p: float, xi, theta, y, envelope: str = "corrected",
                         rel_step: float = 1e-6) -> BoundProfile:
    """Kernel sizes divided by their exponential envelope, times ``eps_alpha``.

    ``envelope="paper"`` divides by ``exp((y + theta - 2 alpha)|xi|)`` (and the
    extra factor ``(2 alpha - y - theta)|xi|`` for the xi-derivative group).
    ``"corrected"`` uses the actual decay ``exp(-|theta - y||xi|)`` and
    ``(1 + |theta - y||xi|) exp(-|theta - y||xi|)``.
    """
    if envelope not in ENVELOPES:
        raise ValueError(f"envelope must be one of {ENVELOPES}")
    check_admissible(alpha, p)
    xi = np.asarray(xi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    X, TH, Y = np.meshgrid(xi, theta, y, indexing="ij")
    K, L, M = strip_kernels(X, TH, Y, alpha, p)
    step = rel_step * np.maximum(np.abs(X), 1.0)
    Kp, Lp, Mp = strip_kernels(X + step, TH, Y, alpha, p)
    Km, Lm, Mm = strip_kernels(X - step, TH, Y, alpha, p)
    dK, dL, dM = ((a - b) / (2 * step) for a, b in ((Kp, Km), (Lp, Lm), (Mp, Mm)))
    Xi = 2.0 / conjugate_exponent(p) + 1j * X
    ax = np.abs(X)
    if envelope == "paper":
        s = (2 * alpha - Y - TH) * ax
        env = np.exp(-s)
        env_d = np.maximum(s, 1e-300) * env
    else:
        s = np.abs(TH - Y) * ax
        env = np.exp(-s)
        env_d = (1 + s) * env
    eps = epsilon_alpha(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = {
            "K": (np.abs(Xi) * np.abs(K) + np.abs(X * dK)) * eps / env,
            "ML": (np.abs(M) + np.abs(L)) * eps / env,
            "dML": (np.abs(X * dM) + np.abs(X * dL)) * eps / env_d,
        }
    ratios = {k: np.where(np.isfinite(v), v, np.inf) for k, v in ratios.items()}
    return BoundProfile(alpha, p, envelope, xi, theta, y, ratios)
