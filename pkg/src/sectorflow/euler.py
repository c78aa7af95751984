"""Point-vortex method for 2D Euler on (truncated) sectors.

Particles carry fixed circulations and are advected by the conformal
Biot-Savart velocity with RK4. A particle's own singular term is replaced
by its regular self-velocity (image plus Routh term).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import __version__, _sums
from .geometry import Sector
from .kernels import TWO_PI, change_of_angle, green_sector, mapped_radius, robin_function, robin_velocity

PENETRATION_TOL = 1e-6
LL_MAX_SEPARATION = math.exp(-1.0)
LL_MIN_SEPARATION = math.exp(-12.0)


class NumericalGuardError(RuntimeError):
    """A run-time guard (CFL, boundary penetration) tripped."""


class CFLError(NumericalGuardError):
    pass


class BoundaryPenetrationError(NumericalGuardError):
    pass


# -- geometry helpers ---------------------------------------------------------------


def _domain_scale(domain: Sector) -> float:
    return domain.truncation_radius if domain.truncated else 1.0


def boundary_distance(domain: Sector, x) -> np.ndarray:
    """Distance from ``x`` to the boundary of the sector (rays, arc and vertex)."""
    d = np.asarray(x, dtype=complex) - domain.vertex
    out = np.full(d.shape, np.inf)
    for phi in (0.0, domain.alpha):
        e = d * np.exp(-1j * phi)
        out = np.minimum(out, np.where(e.real < 0, np.abs(d), np.abs(e.imag)))
    if domain.truncated:
        out = np.minimum(out, np.abs(domain.truncation_radius - np.abs(d)))
    return out


def _inside(domain: Sector, d: np.ndarray) -> np.ndarray:
    theta = np.mod(np.angle(d), 2 * math.pi)
    ok = (np.abs(d) > 0) & (theta > 0) & (theta < domain.alpha)
    if domain.truncated:
        ok &= np.abs(d) < domain.truncation_radius
    return ok


def _reflect_inside(domain: Sector, d: np.ndarray) -> np.ndarray:
    """Mirror points just outside the boundary back across it (along the normal)."""
    rho = np.abs(d)
    theta = np.angle(d)
    theta = np.where(theta < -0.5 * (2 * math.pi - domain.alpha), theta + 2 * math.pi, theta)
    theta = np.where(theta <= 0, -theta, theta)
    theta = np.where(theta >= domain.alpha, 2 * domain.alpha - theta, theta)
    if domain.truncated:
        rho = np.where(rho >= domain.truncation_radius, 2 * domain.truncation_radius - rho, rho)
    return rho * np.exp(1j * theta)


def admit_positions(domain: Sector, x) -> np.ndarray:
    """Return ``x`` with tiny boundary penetrations reflected back; raise on larger ones."""
    x = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise BoundaryPenetrationError("non-finite particle position")
    d = x - domain.vertex
    bad = ~_inside(domain, d)
    if not bad.any():
        return x
    depth = boundary_distance(domain, x[bad])
    if np.any(depth >= PENETRATION_TOL * _domain_scale(domain)) or np.any(d[bad] == 0):
        raise BoundaryPenetrationError("particle left the domain")
    d = d.copy()
    d[bad] = _reflect_inside(domain, d[bad])
    if not np.all(_inside(domain, d[bad])):
        raise BoundaryPenetrationError("particle stuck on the boundary")
    return d + domain.vertex


# -- state ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PatchSpec:
    """Initial vorticity. ``kind='disk'``: ``omega`` on the disk ``|x - center| < radius``
    (a number or a callable of complex points); ``kind='point'``: vortices at
    ``points`` with circulations ``gammas``.
    """

    kind: str = "disk"
    center: complex = 0.5 + 0.5j
    radius: float = 0.1
    omega: float | Callable = 1.0
    points: tuple = ()
    gammas: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in ("disk", "point"):
            raise ValueError("patch kind must be 'disk' or 'point'")
        if self.kind == "disk" and not self.radius > 0:
            raise ValueError("patch radius must be positive")
        if self.kind == "point" and len(self.points) != len(self.gammas):
            raise ValueError("points and gammas differ in length")


@dataclass(frozen=True, eq=False)
class SimState:
    domain: Sector
    positions: np.ndarray  # complex
    gamma: np.ndarray
    omega: np.ndarray
    area: np.ndarray
    t: float = 0.0
    steps: int = 0
    cell_scale: float = math.inf
    omega0_inf: float = 0.0
    forcing_integral: float = 0.0

    def __post_init__(self) -> None:
        n = self.positions.shape
        if self.positions.ndim != 1 or any(a.shape != n for a in (self.gamma, self.omega, self.area)):
            raise ValueError("particle arrays must be 1-d and of equal length")
        if not np.all(np.isfinite(self.gamma)):
            raise ValueError("circulations must be finite")

    @property
    def n(self) -> int:
        return self.positions.size


def init_state(domain: Sector, patch: PatchSpec, n: int = 400, seed: int = 0) -> SimState:
    """Particles at equal-area cell centres of ``patch``; ``Gamma_i = omega_0(x_i) * area_i``.

    A disk patch is cut into ``K = round(sqrt(n))`` rings, ring ``k`` holding
    ``2k + 1`` cells, so ``K^2`` particles are created. Each ring gets a
    random phase drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    scale = _domain_scale(domain)
    if patch.kind == "point":
        x = np.asarray(patch.points, dtype=complex)
        g = np.asarray(patch.gammas, dtype=float)
        if x.size == 0:
            raise ValueError("point patch needs at least one vortex")
        if np.any(boundary_distance(domain, x) <= 0) or not np.all(_inside(domain, x - domain.vertex)):
            raise ValueError("patch escapes the domain")
        gaps = boundary_distance(domain, x)
        if x.size > 1:
            dd = np.abs(x[:, None] - x[None, :]) + np.diag(np.full(x.size, np.inf))
            gaps = np.minimum(gaps, dd.min(axis=1))
        area = np.zeros(x.size)
        return SimState(domain, x, g, np.zeros(x.size), area, cell_scale=0.5 * float(gaps.min()))
    if n < 1:
        raise ValueError("n must be >= 1")
    c = complex(patch.center)
    if not _inside(domain, np.array([c - domain.vertex]))[0] or boundary_distance(domain, c) <= patch.radius:
        raise ValueError("patch escapes the domain")
    K = max(1, int(round(math.sqrt(n))))
    cell = math.pi * patch.radius**2 / K**2
    pts = []
    for k in range(K):
        r = patch.radius * math.sqrt((k + 0.5) / K)
        m = 2 * k + 1
        phase = rng.uniform(0, 2 * math.pi)
        pts.append(c + r * np.exp(1j * (phase + 2 * math.pi * (np.arange(m) + 0.5) / m)))
    x = np.concatenate(pts)
    om = patch.omega(x) if callable(patch.omega) else np.full(x.size, float(patch.omega))
    om = np.asarray(om, dtype=float)
    area = np.full(x.size, cell)
    return SimState(domain, x, om * area, om, area, cell_scale=min(math.sqrt(cell), 0.1 * scale),
                    omega0_inf=float(np.max(np.abs(om), initial=0.0)))


# -- velocity -------------------------------------------------------------------------


def _mapped(domain: Sector, x):
    z, dz, _ = change_of_angle(domain.alpha, np.asarray(x, dtype=complex) - domain.vertex)
    return z, dz


def _R2(domain: Sector) -> float:
    R = mapped_radius(domain)
    return R * R if math.isfinite(R) else 0.0


def _velocity(state: SimState, x: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Complex velocity at ``x`` from all particles except ``skip[i]``."""
    if state.n == 0:
        return np.zeros(x.shape, dtype=complex)
    z, dz = _mapped(state.domain, x)
    zs, _ = _mapped(state.domain, state.positions)
    h = _sums.h_sums(z, zs, state.gamma, _R2(state.domain), skip)
    return np.conj(dz * (-1j / TWO_PI) * h)


def particle_velocities(state: SimState, positions=None) -> np.ndarray:
    """Velocity of each particle (complex), self term replaced by the regular self-velocity."""
    x = state.positions if positions is None else np.asarray(positions, dtype=complex)
    if state.n == 0:
        return np.zeros(0, dtype=complex)
    moved = replace(state, positions=x)
    u = _velocity(moved, x, np.arange(x.size, dtype=np.int64))
    rv = robin_velocity(state.domain, x)
    return u + state.gamma * (rv[..., 0] + 1j * rv[..., 1])


def velocity_at(state: SimState, x) -> np.ndarray:
    """Velocity ``(..., 2)`` at probe points; a probe sitting on a particle uses that particle's self-velocity."""
    x = np.asarray(x, dtype=complex)
    flat = x.reshape(-1)
    if np.any(flat == state.domain.vertex):
        raise ValueError("velocity is not defined at the vertex")
    if not np.all(_inside(state.domain, flat - state.domain.vertex)):
        raise ValueError("probe outside the domain")
    skip = np.full(flat.size, -1, dtype=np.int64)
    if state.n:
        dist, idx = cKDTree(np.c_[state.positions.real, state.positions.imag]).query(np.c_[flat.real, flat.imag])
        skip = np.where(dist == 0, idx, -1).astype(np.int64)
    u = _velocity(state, flat, skip)
    hit = skip >= 0
    if hit.any():
        rv = robin_velocity(state.domain, flat[hit])
        u[hit] += state.gamma[skip[hit]] * (rv[..., 0] + 1j * rv[..., 1])
    return np.stack([u.real, u.imag], axis=-1).reshape(x.shape + (2,))


def smoothed_velocity(state: SimState, x) -> np.ndarray:
    """Complex velocity with each particle spread over a disk of its cell area.

    Inside that disk the direct ``1/(x - y)`` term is scaled by ``|x - y|^2 / a^2``
    (uniform-disk profile); used for diagnostics of patch flows only.
    """
    x = np.asarray(x, dtype=complex).reshape(-1)
    u = _velocity(state, x, np.full(x.size, -1, dtype=np.int64)) if state.n else np.zeros(x.size, complex)
    a = np.sqrt(state.area / math.pi)
    if state.n == 0 or not np.any(a > 0):
        return u
    tree = cKDTree(np.c_[state.positions.real, state.positions.imag])
    for i, near in enumerate(tree.query_ball_point(np.c_[x.real, x.imag], float(a.max()))):
        for j in near:
            d = x[i] - state.positions[j]
            if a[j] > 0 and abs(d) < a[j]:
                u[i] += state.gamma[j] * (1j / TWO_PI) * np.conj(1 / d) * (abs(d) ** 2 / a[j] ** 2 - 1)
    return u


# -- time stepping ----------------------------------------------------------------------


def step(state: SimState, dt: float, forcing: Callable | None = None) -> SimState:
    """One classical RK4 step. ``forcing(t, x)`` adds ``dt * f`` to particle vorticity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dom = state.domain
    x0 = state.positions
    k1 = particle_velocities(state, x0)
    vmax = float(np.max(np.abs(k1), initial=0.0))
    if dt * vmax >= state.cell_scale:
        raise CFLError(f"dt * max speed = {dt * vmax:.3g} exceeds the cell scale {state.cell_scale:.3g}")
    k2 = particle_velocities(state, admit_positions(dom, x0 + 0.5 * dt * k1))
    k3 = particle_velocities(state, admit_positions(dom, x0 + 0.5 * dt * k2))
    k4 = particle_velocities(state, admit_positions(dom, x0 + dt * k3))
    x1 = admit_positions(dom, x0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    omega, gamma, fint = state.omega, state.gamma, state.forcing_integral
    if forcing is not None:
        f = np.asarray(forcing(state.t, x1), dtype=float)
        omega = omega + dt * f
        gamma = omega * state.area
        fint = fint + dt * float(np.max(np.abs(f), initial=0.0))
    return replace(state, positions=x1, gamma=gamma, omega=omega, t=state.t + dt, steps=state.steps + 1,
                   forcing_integral=fint)


# -- diagnostics --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    circulation: float
    omega_l1: float
    omega_l2: float
    omega_inf: float
    energy: float
    energy_pairs: float
    Q: float
    log_lipschitz: float | None = None

    FIELDS = ("time", "circulation", "omega_l1", "omega_l2", "omega_inf", "energy", "energy_pairs", "Q",
              "log_lipschitz")


def interaction_energy(state: SimState) -> tuple[float, float]:
    """``(E, E_pairs)``: ``E_pairs = -sum_{i != j} G_i G_j G(x_i, x_j)``; ``E`` adds the Robin self-energy."""
    x, g = state.positions, state.gamma
    if state.n == 0:
        return 0.0, 0.0
    pairs = 0.0
    if state.n > 1:
        i, j = np.triu_indices(state.n, 1)
        pairs = -2.0 * float(np.sum(g[i] * g[j] * green_sector(state.domain, x[i], x[j])))
    self_part = -float(np.sum(g * g * robin_function(state.domain, x)))
    return pairs + self_part, pairs


def diagnostics(state: SimState, log_lipschitz: float | None = None) -> DiagnosticsRecord:
    a, om = state.area, np.abs(state.omega)
    e, ep = interaction_energy(state)
    return DiagnosticsRecord(
        time=state.t,
        circulation=float(np.sum(state.gamma)),
        omega_l1=float(np.sum(om * a)),
        omega_l2=float(np.sqrt(np.sum(om**2 * a))),
        omega_inf=float(np.max(om, initial=0.0)),
        energy=e,
        energy_pairs=ep,
        Q=state.omega0_inf + state.forcing_integral,
        log_lipschitz=log_lipschitz,
    )


def _sample_points(domain: Sector, rng: np.random.Generator, m: int, extent: float) -> np.ndarray:
    R = domain.truncation_radius if domain.truncated else extent
    rho = R * np.sqrt(rng.uniform(0, 1, m))
    theta = domain.alpha * rng.uniform(0, 1, m)
    return domain.vertex + rho * np.exp(1j * theta)


def sample_pairs(domain: Sector, m: int, seed: int, extent: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``m`` interior pairs with ``|x - y|`` log-uniform in ``[e^-12, e^-1]``."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    need = m
    while need > 0:
        x = _sample_points(domain, rng, 2 * need, extent)
        r = np.exp(rng.uniform(math.log(LL_MIN_SEPARATION), math.log(LL_MAX_SEPARATION), x.size))
        y = x + r * np.exp(1j * rng.uniform(0, 2 * math.pi, x.size))
        ok = _inside(domain, x - domain.vertex) & _inside(domain, y - domain.vertex)
        xs.append(x[ok][:need])
        ys.append(y[ok][:need])
        need -= xs[-1].size
    return np.concatenate(xs), np.concatenate(ys)


def log_lipschitz_parts(velocity: Callable, x, y) -> tuple[float, float]:
    """``(max |u(x)-u(y)| / (|x-y| |log|x-y||), max |u|)`` over the given pairs."""
    ux, uy = np.asarray(velocity(x)), np.asarray(velocity(y))
    d = np.abs(x - y)
    modulus = float(np.max(np.abs(ux - uy) / (d * np.abs(np.log(d))), initial=0.0))
    speed = float(max(np.max(np.abs(ux), initial=0.0), np.max(np.abs(uy), initial=0.0)))
    return modulus, speed


def log_lipschitz_modulus(state: SimState, m: int = 1000, seed: int = 0) -> float:
    """Sampled log-Lipschitz norm: modulus part plus ``max |u|`` (smoothed particle field)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    extent = 2 * float(np.max(np.abs(state.positions - state.domain.vertex), initial=0.5))
    x, y = sample_pairs(state.domain, m, seed, extent)
    mod, speed = log_lipschitz_parts(lambda p: smoothed_velocity(state, p), x, y)
    return mod + speed


# -- runs -------------------------------------------------------------------------------


@dataclass
class SimConfig:
    alpha: float = math.pi / 2
    radius: float = 1.0
    patch: PatchSpec = field(default_factory=PatchSpec)
    n: int = 400
    dt: float = 1e-3
    steps: int = 100
    seed: int = 0
    snapshot_every: int = 10
    diagnostics_every: int = 10
    log_lipschitz_pairs: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        if self.steps < 0 or self.snapshot_every < 1 or self.diagnostics_every < 1:
            raise ValueError("steps >= 0 and cadences >= 1 required")

    def domain(self) -> Sector:
        return Sector(self.alpha, 0j, self.radius)

    def to_json(self) -> dict:
        d = asdict(self)
        p = d.pop("patch")
        if callable(p["omega"]):
            raise ValueError("callable vorticity cannot be serialised")
        p["center"] = [complex(p["center"]).real, complex(p["center"]).imag]
        p["points"] = [[complex(z).real, complex(z).imag] for z in p["points"]]
        p["gammas"] = list(p["gammas"])
        d["patch"] = p
        d["radius"] = None if math.isinf(self.radius) else self.radius
        return d


@dataclass
class RunResult:
    times: list
    positions: list
    diagnostics: list
    final: SimState
    files: list


def _fmt(v) -> str:
    return repr(float(v))


def write_snapshot(state: SimState, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "gamma", "omega"])
        for i, (z, g, o) in enumerate(zip(state.positions, state.gamma, state.omega)):
            w.writerow([i, _fmt(z.real), _fmt(z.imag), _fmt(g), _fmt(o)])
    return path


def run(config: SimConfig, forcing: Callable | None = None) -> RunResult:
    """Integrate ``config.steps`` RK4 steps, recording snapshots and diagnostics at the set cadences."""
    state = init_state(config.domain(), config.patch, config.n, config.seed)
    out = Path(config.out) if config.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    times, pos, diags, files = [], [], [], []

    def record(s: SimState) -> None:
        if s.steps % config.snapshot_every == 0 or s.steps == config.steps:
            times.append(s.t)
            pos.append(s.positions.copy())
            if out:
                files.append(write_snapshot(s, out / f"snapshot_{s.steps:06d}.csv"))
        if s.steps % config.diagnostics_every == 0 or s.steps == config.steps:
            ll = log_lipschitz_modulus(s, config.log_lipschitz_pairs, config.seed) if config.log_lipschitz_pairs else None
            diags.append(diagnostics(s, ll))

    record(state)
    for _ in range(config.steps):
        state = step(state, config.dt, forcing)
        record(state)
    if out:
        dpath = out / "diagnostics.csv"
        with dpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DiagnosticsRecord.FIELDS)
            for d in diags:
                w.writerow(["" if getattr(d, k) is None else _fmt(getattr(d, k)) for k in DiagnosticsRecord.FIELDS])
        meta = {"version": __version__, "config": config.to_json(), "particles": state.n}
        mpath = out / "run.json"
        mpath.write_text(json.dumps(meta, indent=2, sort_keys=True))
        files += [dpath, mpath]
    return RunResult(times, pos, diags, state, files)
