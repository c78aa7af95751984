"""Sectors, polygonal domains and their corner-exponent bookkeeping."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

PI = math.pi
HALF_PI = 0.5 * PI
# relative tolerance used when snapping the singular index bound to an integer
INDEX_RTOL = 1e-12


def _check_aperture(alpha: float, upper: float = 2 * PI) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < upper) or not math.isfinite(alpha):
        raise ValueError(f"aperture must lie in (0, {upper:g}), got {alpha!r}")
    return alpha


def epsilon_alpha(alpha: float) -> float:
    """Distance of the aperture from the degenerate set {0, pi/2, pi}."""
    alpha = _check_aperture(alpha)
    return min(abs(alpha), abs(alpha - HALF_PI), abs(alpha - PI))


@dataclass(frozen=True)
class Sector:
    """Open cone ``{rho e^{i theta}: 0 < theta < alpha}`` translated to ``vertex``.

    ``truncation_radius`` is ``math.inf`` for the infinite sector.
    """

    alpha: float
    vertex: complex = 0j
    truncation_radius: float = math.inf

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _check_aperture(self.alpha))
        object.__setattr__(self, "vertex", complex(self.vertex))
        r = float(self.truncation_radius)
        if not r > 0:
            raise ValueError("truncation_radius must be positive")
        object.__setattr__(self, "truncation_radius", r)

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.truncation_radius)

    @property
    def epsilon(self) -> float:
        return epsilon_alpha(self.alpha)

    @property
    def area(self) -> float:
        return 0.5 * self.alpha * self.truncation_radius**2

    def contains(self, x: complex, tol: float = 0.0) -> bool:
        """True when ``x`` is interior (angles and radius compared with slack ``tol``)."""
        d = complex(x) - self.vertex
        r = abs(d)
        if r == 0.0:
            return False
        theta = math.atan2(d.imag, d.real) % (2 * PI)
        if not (tol < theta < self.alpha - tol):
            return False
        return r < self.truncation_radius * (1 - tol) if self.truncated else True


@dataclass(frozen=True)
class Corner:
    point: complex
    aperture: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", complex(self.point))
        object.__setattr__(self, "aperture", _check_aperture(self.aperture))


@dataclass(frozen=True)
class PolygonalDomain:
    """Corner data of a piecewise C^{1,1} domain.

    The boundary itself is kept only as an opaque descriptor.
    """

    corners: tuple[Corner, ...]
    boundary_descriptor: tuple[Any, ...] = ()
    truncation_radius: float = math.inf

    def __post_init__(self) -> None:
        corners = tuple(
            c if isinstance(c, Corner) else Corner(complex(c[0]), float(c[1]))
            for c in self.corners
        )
        pts = [c.point for c in corners]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if pts[i] == pts[j]:
                    raise ValueError(f"duplicate corner at {pts[i]}")
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "boundary_descriptor", tuple(self.boundary_descriptor))

    @property
    def apertures(self) -> list[float]:
        return [c.aperture for c in self.corners]

    @property
    def max_aperture(self) -> float:
        if not self.corners:
            raise ValueError("domain has no corners")
        return max(self.apertures)

    @classmethod
    def from_sector(cls, sector: Sector) -> "PolygonalDomain":
        return cls((Corner(sector.vertex, sector.alpha),), truncation_radius=sector.truncation_radius)

    # JSON document: {"corners": [{"x", "y", "aperture"}], "truncation_radius"}
    def to_json(self) -> str:
        doc = {
            "corners": [
                {"x": c.point.real, "y": c.point.imag, "aperture": c.aperture}
                for c in self.corners
            ],
            "truncation_radius": None if math.isinf(self.truncation_radius) else self.truncation_radius,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PolygonalDomain":
        doc = json.loads(text)
        unknown = set(doc) - {"corners", "truncation_radius"}
        if unknown:
            raise ValueError(f"unknown keys in domain document: {sorted(unknown)}")
        corners = tuple(
            Corner(complex(c["x"], c["y"]), float(c["aperture"])) for c in doc["corners"]
        )
        r = doc.get("truncation_radius")
        return cls(corners, truncation_radius=math.inf if r is None else float(r))


@dataclass(frozen=True)
class SingularExponentReport:
    exponents: dict[int, float]  # corner index -> p_alpha, only for alpha > pi/2
    p_omega: float
    index_ranges: dict[int, int] = field(default_factory=dict)  # corner index -> k_max at p_omega


def singular_exponent(alpha: float) -> float | None:
    """``2 alpha / (2 alpha - pi)`` for obtuse corners, ``None`` otherwise."""
    alpha = _check_aperture(alpha, PI)
    if alpha <= HALF_PI:
        return None
    return 2 * alpha / (2 * alpha - PI)


def conjugate_exponent(p: float) -> float:
    if not p > 1:
        raise ValueError("exponent must exceed 1")
    return math.inf if math.isinf(p) else p / (p - 1)


def singular_index_range(alpha: float, p: float) -> int:
    """Largest k with ``k <= (2/p') (alpha/pi)``.

    Values within ``INDEX_RTOL`` of an integer are snapped to it, so the
    bound is inclusive as written.
    """
    alpha = _check_aperture(alpha, PI)
    if not p > 1:
        raise ValueError("exponent must exceed 1")
    bound = 2 * (1 - 1 / p) * alpha / PI
    k = round(bound)
    if abs(bound - k) <= INDEX_RTOL * max(1.0, abs(bound)):
        return int(k)
    return int(math.floor(bound))


def p_omega(domain: PolygonalDomain) -> float:
    apertures = domain.apertures
    if not apertures:
        raise ValueError("domain has no corners")
    if max(apertures) >= PI:
        raise ValueError("p_omega needs every aperture below pi")
    if max(apertures) <= HALF_PI:
        return 4.0
    return 2 * max(singular_exponent(a) for a in apertures if a > HALF_PI)


def singular_report(domain: PolygonalDomain) -> SingularExponentReport:
    pw = p_omega(domain)
    exps = {}
    ranges = {}
    for j, c in enumerate(domain.corners):
        pa = singular_exponent(c.aperture)
        if pa is not None:
            exps[j] = pa
        ranges[j] = singular_index_range(c.aperture, pw)
    return SingularExponentReport(exps, pw, ranges)


def corner_distance(domain: PolygonalDomain, x: complex) -> float:
    if not domain.corners:
        raise ValueError("domain has no corners")
    x = complex(x)
    return min(abs(x - c.point) for c in domain.corners)
