"""Swiss-cheese discs, truncated boundary arcs, areas and lengths.

A cheese is the closed unit disc with a finite list of open holes removed.
Truncation ``k`` keeps only the first ``k`` holes.  Circle index 0 is always
the unit circle; index ``j >= 1`` is hole ``j``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from cheesetower._threads import ordered_map
from cheesetower.errors import (
    BudgetExhausted,
    DegenerateArrangement,
    FormatVersionError,
    TransversalityUnachievable,
)

FORMAT_VERSION = "1.0"
TWO_PI = 2.0 * math.pi
TRIPLE_SEPARATION = 1e-6
_ANGLE_EPS = 1e-13


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius!r}")

    def contains(self, z) -> np.ndarray:
        """Membership in the *open* disc."""
        return np.abs(np.asarray(z) - self.center) < self.radius


@dataclass(frozen=True)
class CheeseSpec:
    holes: tuple
    radius_budget: float
    seed: int
    min_crossing_angle: float

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))

    @property
    def radius_sum(self) -> float:
        return math.fsum(h.radius for h in self.holes)

    def circles(self, k: int | None = None) -> list[tuple[complex, float]]:
        """(center, radius) pairs for the unit circle and holes 1..k."""
        k = len(self.holes) if k is None else k
        return [(0j, 1.0)] + [(h.center, h.radius) for h in self.holes[:k]]

    def in_region(self, z, k: int | None = None, slack: float = 0.0) -> np.ndarray:
        """Membership in X_0^k (closed disc minus open holes 1..k)."""
        z = np.asarray(z, dtype=complex)
        k = len(self.holes) if k is None else k
        inside = np.abs(z) <= 1.0 + slack
        for h in self.holes[:k]:
            inside &= np.abs(z - h.center) >= h.radius - slack
        return inside

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "seed": int(self.seed),
            "radius_budget": self.radius_budget,
            "min_crossing_angle": self.min_crossing_angle,
            "holes": [
                {"re": h.center.real, "im": h.center.imag, "radius": h.radius}
                for h in self.holes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CheeseSpec":
        check_version(doc)
        holes = tuple(
            Disc(complex(h["re"], h["im"]), float(h["radius"])) for h in doc["holes"]
        )
        return cls(
            holes=holes,
            radius_budget=float(doc["radius_budget"]),
            seed=int(doc["seed"]),
            min_crossing_angle=float(doc["min_crossing_angle"]),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CheeseSpec":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def check_version(doc: dict, expected: str = FORMAT_VERSION):
    version = str(doc.get("version", ""))
    if version.split(".")[0] != expected.split(".")[0]:
        raise FormatVersionError(f"unsupported format version {version!r}")


# ---------------------------------------------------------------------------
# circle pair geometry


def circle_intersections(c1: complex, r1: float, c2: complex, r2: float) -> list[complex]:
    d = abs(c2 - c1)
    if d == 0 or d >= r1 + r2 or d <= abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    u = (c2 - c1) / d
    base = c1 + a * u
    return [base + 1j * h * u, base - 1j * h * u]


def crossing_angle(c1: complex, r1: float, c2: complex, r2: float) -> float | None:
    """Angle in (0, pi/2] at which two circles cross, or None if they do not."""
    d = abs(c2 - c1)
    if d == 0 or d >= r1 + r2 or d <= abs(r1 - r2):
        return None
    cos_t = (r1 * r1 + r2 * r2 - d * d) / (2 * r1 * r2)
    return math.acos(min(1.0, abs(cos_t)))


def invariant_violations(
    spec: CheeseSpec, k: int | None = None, triple_tol: float = TRIPLE_SEPARATION
) -> list[str]:
    """Every broken CheeseSpec invariant among the circles 0..k, as messages."""
    problems = []
    k = len(spec.holes) if k is None else k
    if k == len(spec.holes) and not spec.radius_sum < spec.radius_budget:
        problems.append(f"radius sum {spec.radius_sum} >= budget {spec.radius_budget}")
    circles = spec.circles(k)
    points = []
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            ang = crossing_angle(*circles[i], *circles[j])
            if ang is None:
                continue
            if ang < spec.min_crossing_angle:
                problems.append(f"circles {i},{j} cross at {ang:.3g} rad")
            points.extend((p, i, j) for p in circle_intersections(*circles[i], *circles[j]))
    for p, i, j in points:
        for l, (c, r) in enumerate(circles):
            if l not in (i, j) and abs(abs(p - c) - r) <= triple_tol:
                problems.append(f"circles {i},{j},{l} nearly concurrent at {p:.6g}")
    return problems


def _placement_ok(center, radius, circles, points, min_angle, triple_tol) -> bool:
    new_points = []
    for j, (c, r) in enumerate(circles):
        ang = crossing_angle(center, radius, c, r)
        if ang is None:
            continue
        if ang < min_angle:
            return False
        new_points.extend((p, j) for p in circle_intersections(center, radius, c, r))
    for p, j in new_points:
        for l, (c, r) in enumerate(circles):
            if l != j and abs(abs(p - c) - r) <= triple_tol:
                return False
    for p in points:
        if abs(abs(p - center) - radius) <= triple_tol:
            return False
    return True


def generate_cheese(
    seed: int,
    radius_budget: float,
    hole_count: int,
    min_crossing_angle: float,
    *,
    decay: float = 0.15,
    min_radius: float = 1e-6,
    max_retries: int = 2000,
    triple_tol: float = TRIPLE_SEPARATION,
) -> CheeseSpec:
    """Place ``hole_count`` random holes under the radius budget.

    Each hole takes a random fraction (at most ``0.9 * decay``) of the budget
    still unspent, so radii decay roughly geometrically and the running sum
    stays strictly below the budget.  Centers are uniform in the open unit
    disc and are redrawn until every crossing with the circles already placed
    is transverse and no three circles nearly meet.
    """
    if not 0 < radius_budget < 1:
        raise ValueError("radius_budget must lie in (0, 1)")
    if hole_count < 0:
        raise ValueError("hole_count must be nonnegative")
    if not min_crossing_angle > 0:
        raise ValueError("min_crossing_angle must be positive")
    rng = np.random.default_rng(seed)
    circles = [(0j, 1.0)]
    points: list[complex] = []
    holes = []
    spent = 0.0
    for n in range(hole_count):
        radius = float(rng.uniform(0.3, 0.9)) * decay * (radius_budget - spent)
        if radius < min_radius:
            raise BudgetExhausted(
                f"hole {n + 1}: radius {radius:.3g} below floor {min_radius:.3g}"
            )
        for _ in range(max_retries):
            rho = math.sqrt(float(rng.random()))
            phi = TWO_PI * float(rng.random())
            center = complex(rho * math.cos(phi), rho * math.sin(phi))
            if _placement_ok(center, radius, circles, points, min_crossing_angle, triple_tol):
                break
        else:
            raise TransversalityUnachievable(
                f"hole {n + 1}: no transverse placement after {max_retries} draws"
            )
        for c, r in circles:
            points.extend(circle_intersections(center, radius, c, r))
        circles.append((center, radius))
        holes.append(Disc(center, radius))
        spent += radius
    return CheeseSpec(tuple(holes), radius_budget, seed, min_crossing_angle)


# ---------------------------------------------------------------------------
# boundary arcs


@dataclass(frozen=True)
class ArcSegment:
    circle_index: int
    start_angle: float
    end_angle: float
    orientation: int
    center: complex
    radius: float

    @property
    def extent(self) -> float:
        return abs(self.end_angle - self.start_angle)

    @property
    def length(self) -> float:
        return self.radius * self.extent

    @property
    def start_point(self) -> complex:
        return self.center + self.radius * complex(math.cos(self.start_angle), math.sin(self.start_angle))

    @property
    def end_point(self) -> complex:
        return self.center + self.radius * complex(math.cos(self.end_angle), math.sin(self.end_angle))

    @property
    def angle_range(self) -> tuple[float, float]:
        """Ascending parameter interval of the arc."""
        return min(self.start_angle, self.end_angle), max(self.start_angle, self.end_angle)

    def point(self, phi):
        return self.center + self.radius * np.exp(1j * np.asarray(phi))

    def zbar_dz(self) -> complex:
        """Closed form of the integral of conj(z) dz along the arc."""
        a, rho = self.center, self.radius
        e0 = complex(math.cos(self.start_angle), math.sin(self.start_angle))
        e1 = complex(math.cos(self.end_angle), math.sin(self.end_angle))
        return rho * a.conjugate() * (e1 - e0) + 1j * rho * rho * (self.end_angle - self.start_angle)


@dataclass(frozen=True)
class BoundaryChain:
    truncation_k: int
    arcs: tuple

    def closure_defect(self) -> complex:
        """The integral of dz over the chain; zero for a closed chain."""
        return sum((a.end_point - a.start_point for a in self.arcs), 0j)

    def endpoint_mismatch(self) -> float:
        """Largest distance from an arc end to the nearest arc start."""
        if not self.arcs:
            return 0.0
        starts = np.array([a.start_point for a in self.arcs])
        ends = np.array([a.end_point for a in self.arcs])
        used = np.zeros(len(starts), dtype=bool)
        worst = 0.0
        for e in ends:
            dist = np.where(used, np.inf, np.abs(starts - e))
            i = int(np.argmin(dist))
            used[i] = True
            worst = max(worst, float(dist[i]))
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["circle_index", "start_angle", "end_angle", "orientation"])
        for a in self.arcs:
            w.writerow([a.circle_index, repr(a.start_angle), repr(a.end_angle), a.orientation])
        return buf.getvalue()


def _covered_interval(a: complex, rho: float, b: complex, r: float):
    """Angular interval of circle (a, rho) lying inside the disc (b, r).

    Returns None (no overlap), "full", or (lo, hi) with hi - lo < 2 pi.
    """
    d = abs(b - a)
    if d == 0:
        return "full" if rho < r else None
    kappa = (rho * rho + d * d - r * r) / (2 * rho * d)
    if kappa >= 1:
        return None
    if kappa <= -1:
        return "full"
    psi = math.atan2((b - a).imag, (b - a).real)
    w = math.acos(kappa)
    return psi - w, psi + w


def _wrap(lo: float, hi: float) -> list[tuple[float, float]]:
    lo_n = lo % TWO_PI
    hi_n = lo_n + (hi - lo)
    if hi_n <= TWO_PI:
        return [(lo_n, hi_n)]
    return [(lo_n, TWO_PI), (0.0, hi_n - TWO_PI)]


def _subtract(intervals, cut):
    out = []
    for a, b in intervals:
        pieces = [(a, b)]
        for c, d in cut:
            nxt = []
            for p, q in pieces:
                if d <= p or c >= q:
                    nxt.append((p, q))
                    continue
                if c > p:
                    nxt.append((p, c))
                if d < q:
                    nxt.append((d, q))
            pieces = nxt
        out.extend(pieces)
    return [(p, q) for p, q in out if q - p > _ANGLE_EPS]


def _merge_wrap(intervals):
    intervals = sorted(intervals)
    if not intervals:
        return []
    if len(intervals) == 1 and intervals[0][0] <= _ANGLE_EPS and intervals[0][1] >= TWO_PI - _ANGLE_EPS:
        return [(0.0, TWO_PI)]
    first, last = intervals[0], intervals[-1]
    if len(intervals) > 1 and first[0] <= _ANGLE_EPS and last[1] >= TWO_PI - _ANGLE_EPS:
        intervals = intervals[1:-1] + [(last[0], TWO_PI + first[1])]
    return intervals


def boundary_chain(spec: CheeseSpec, k: int) -> BoundaryChain:
    """Maximal positively oriented arcs making up the boundary of X_0^k."""
    if not 0 <= k <= len(spec.holes):
        raise ValueError(f"truncation k={k} outside 0..{len(spec.holes)}")
    bad = [p for p in invariant_violations(spec, k) if "circles" in p]
    if bad:
        raise DegenerateArrangement("; ".join(bad))
    circles = spec.circles(k)
    arcs = []
    for i, (a, rho) in enumerate(circles):
        if i == 0:
            allowed = [(0.0, TWO_PI)]
        else:
            inside = _covered_interval(a, rho, 0j, 1.0)
            if inside is None:
                continue
            allowed = [(0.0, TWO_PI)] if inside == "full" else _wrap(*inside)
        cut = []
        for j, (b, r) in enumerate(circles):
            if j == 0 or j == i:
                continue
            cov = _covered_interval(a, rho, b, r)
            if cov == "full":
                cut = [(0.0, TWO_PI)]
                break
            if cov is not None:
                cut.extend(_wrap(*cov))
        for lo, hi in _merge_wrap(_subtract(allowed, cut)):
            if i == 0:
                arcs.append(ArcSegment(0, lo, hi, 1, a, rho))
            else:
                arcs.append(ArcSegment(i, hi, lo, -1, a, rho))
    return BoundaryChain(k, tuple(arcs))


def chain_length(chain: BoundaryChain) -> float:
    return math.fsum(a.length for a in chain.arcs)


# ---------------------------------------------------------------------------
# area


def _mc_block(spec: CheeseSpec, k: int, seq: np.random.SeedSequence, n: int) -> int:
    rng = np.random.default_rng(seq)
    pts = rng.random((n, 2)) * 2.0 - 1.0
    x, y = pts[:, 0], pts[:, 1]
    hit = x * x + y * y <= 1.0
    for h in spec.holes[:k]:
        dx, dy = x - h.center.real, y - h.center.imag
        hit &= dx * dx + dy * dy >= h.radius * h.radius
    return int(np.count_nonzero(hit))


def monte_carlo_area(
    spec: CheeseSpec, k: int, samples: int = 10**7, block: int = 1 << 20
) -> tuple[float, float]:
    """Hit-or-miss estimate of Area(X_0^k) over [-1, 1]^2.

    Blocks draw from child seeds of a sequence keyed by (seed, k), so the
    estimate does not depend on how many workers evaluate them.
    """
    sizes = [block] * (samples // block)
    if samples % block:
        sizes.append(samples % block)
    root = np.random.SeedSequence([int(spec.seed) & 0xFFFFFFFFFFFFFFFF, int(k), 0xC0FFEE])
    seqs = root.spawn(len(sizes))
    hits = sum(ordered_map(lambda job: _mc_block(spec, k, *job), list(zip(seqs, sizes))))
    p = hits / samples
    return 4.0 * p, 4.0 * math.sqrt(max(p * (1.0 - p), 0.0) / samples)


def area(
    spec: CheeseSpec, k: int, method: str = "boundary_integral", samples: int = 10**7
) -> tuple[float, float]:
    """Area of X_0^k with an error estimate.

    ``boundary_integral`` evaluates (1/2) |Im of the integral of conj(z) dz|
    over the boundary chain using the closed-form arc integrals;
    ``monte_carlo`` counts hits in the bounding square.
    """
    if method == "boundary_integral":
        chain = boundary_chain(spec, k)
        terms = [a.zbar_dz() for a in chain.arcs]
        total = sum(terms, 0j)
        err = 8 * np.finfo(float).eps * sum(abs(t) for t in terms)
        return 0.5 * abs(total.imag), 0.5 * err
    if method == "monte_carlo":
        return monte_carlo_area(spec, k, samples)
    raise ValueError(f"unknown area method {method!r}")


# ---------------------------------------------------------------------------
# svg


def chain_to_svg(
    spec: CheeseSpec,
    k: int | None = None,
    overlays: Iterable[Sequence[complex]] = (),
    size: int = 480,
) -> str:
    """SVG of the cheese: one <circle> per circle, boundary arcs and overlay polylines as <path>."""
    k = len(spec.holes) if k is None else k
    scale = size / 2.2

    def xy(z: complex) -> str:
        return f"{(z.real + 1.1) * scale:.3f},{(1.1 - z.imag) * scale:.3f}"

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
    ]
    for i, (c, r) in enumerate(spec.circles(k)):
        x, y = xy(c).split(",")
        fill = "#f6e7b4" if i == 0 else "#ffffff"
        lines.append(
            f'  <circle cx="{x}" cy="{y}" r="{r * scale:.3f}" fill="{fill}" '
            f'stroke="#999999" stroke-width="0.5" data-index="{i}"/>'
        )
    for a in boundary_chain(spec, k).arcs:
        lo, hi = a.angle_range
        phis = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / 0.05)) + 1))
        pts = a.point(phis)
        d = "M " + " L ".join(xy(z) for z in pts)
        lines.append(f'  <path d="{d}" fill="none" stroke="#204a87" stroke-width="1.2"/>')
    for poly in overlays:
        poly = list(poly)
        if len(poly) < 2:
            continue
        d = "M " + " L ".join(xy(complex(z)) for z in poly)
        lines.append(f'  <path class="cut" d="{d}" fill="none" stroke="#cc0000" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
