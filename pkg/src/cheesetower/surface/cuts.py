"""Cut levels for exponential stages and the level curves {arg f = c}.

A cut level c is admissible when, along every boundary piece of the
previous stage, ``arg f`` (continued along the piece) meets c + 2 pi Z only
transversally and never at a piece endpoint.  The cut curves themselves
are traced with the parameter u = log|f|, along which ``arg f`` is
constant and z1 moves with velocity f / f'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from cheesetower.errors import NoAdmissibleCut, TracingDivergence, ZeroOnRegion
from cheesetower.geometry import CheeseSpec
from cheesetower.quadrature import adaptive_gauss
from cheesetower.surface.paths import LiftedPath, branch_nearest, continue_column

TWO_PI = 2.0 * math.pi
CUT_TOLERANCE = 1e-3
ZERO_TOL = 1e-8


def _wrap(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


# ---------------------------------------------------------------------------
# argument profiles along pieces


@dataclass
class ArgProfile:
    """Continuous arg f along a path, sampled so it is monotone between samples."""

    path: LiftedPath
    f: object
    t: np.ndarray
    val: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    speed: np.ndarray

    def theta_at(self, s: float, i: int) -> float:
        Z, _ = self.path.evaluate([s])
        v = complex(self.f(Z[:, : self.f.arity])[0])
        return self.theta[i] + float(np.angle(v / self.val[i]))

    def state_at(self, s: float):
        Z, dZ = self.path.evaluate([s])
        val, grad = self.f.value_and_gradient(Z[:, : self.f.arity])
        dval = np.einsum("ij,ij->i", grad, dZ[:, : self.f.arity])
        return Z[0], dZ[0], complex(val[0]), float(np.imag(dval[0] / val[0]))


def _profile_state(path, f, t):
    Z, dZ = path.evaluate(t)
    val, grad = f.value_and_gradient(Z[:, : f.arity])
    dval = np.einsum("ij,ij->i", grad, dZ[:, : f.arity])
    return Z, dZ, val, dval


def arg_profile(path: LiftedPath, f, max_dtheta: float = 0.1, zero_tol: float = ZERO_TOL, max_rounds: int = 40) -> ArgProfile:
    t = np.array(path.t, dtype=float)
    for _ in range(max_rounds):
        Z, dZ, val, dval = _profile_state(path, f, t)
        if np.min(np.abs(val)) < zero_tol:
            i = int(np.argmin(np.abs(val)))
            raise ZeroOnRegion(f"|f| < {zero_tol:g} near z1={Z[i, 0]:.6g}")
        dth = np.imag(dval / val)
        dt = np.diff(t)
        step = np.abs(np.angle(val[1:] / val[:-1]))
        bad = (step > max_dtheta) | (np.abs(dth[:-1]) * dt > max_dtheta) | (np.abs(dth[1:]) * dt > max_dtheta)
        bad &= dt > 1e-13
        if not bad.any():
            break
        t = np.sort(np.concatenate([t, 0.5 * (t[:-1] + t[1:])[bad]]))
    # split at interior extrema so arg f is monotone on every interval
    flips = np.nonzero(dth[:-1] * dth[1:] < 0)[0]
    if len(flips):
        def slope(s):
            _, _, v, dv = _profile_state(path, f, np.array([s]))
            return float(np.imag(dv[0] / v[0]))

        extra = [brentq(slope, t[i], t[i + 1], xtol=1e-15) for i in flips]
        t = np.unique(np.concatenate([t, extra]))
        Z, dZ, val, dval = _profile_state(path, f, t)
        dth = np.imag(dval / val)
    theta = continue_column("exp", val, None).imag
    return ArgProfile(path, f, t, val, theta, dth, np.abs(dZ[:, 0]))


@dataclass(frozen=True)
class Crossing:
    """A point of a boundary piece where arg f = c + 2 pi level."""

    piece: int
    t: float
    coords: tuple
    level: int
    slope: float
    tangent: complex

    @property
    def z1(self) -> complex:
        return self.coords[0]


def corner_gap(profile: ArgProfile, c: float) -> float:
    return float(np.min(np.abs(_wrap(profile.theta[[0, -1]] - c))))


def find_crossings(profile: ArgProfile, c: float, piece_index: int = 0, sign: int = 1) -> list[Crossing]:
    """Every crossing of arg f with c + 2 pi Z along a profiled piece, in parameter order."""
    g = np.floor((profile.theta - c) / TWO_PI)
    hits = np.nonzero(g[1:] != g[:-1])[0]
    out = []
    for i in hits:
        level = int(max(g[i], g[i + 1]))
        target = c + TWO_PI * level
        a, b = profile.t[i], profile.t[i + 1]
        h = lambda s: profile.theta_at(s, i) - target
        ha, hb = profile.theta[i] - target, profile.theta[i + 1] - target
        if ha == 0.0:
            s = a
        elif hb == 0.0:
            s = b
        else:
            s = brentq(h, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        Z, dZ, val, dth = profile.state_at(s)
        speed = abs(dZ[0])
        out.append(Crossing(piece_index, float(s), tuple(complex(z) for z in Z), level,
                            float(sign * dth / speed), complex(sign * dZ[0] / speed)))
    return out


# ---------------------------------------------------------------------------
# choosing c


@dataclass
class CutChoice:
    c: float
    certificate: dict
    crossings: dict = field(default_factory=dict, repr=False)  # k -> per-piece crossing lists


def choose_cut_level(
    f,
    pieces_by_k: dict,
    stage: int,
    seed: int,
    tolerance: float = CUT_TOLERANCE,
    max_attempts: int = 64,
    zero_tol: float = ZERO_TOL,
) -> CutChoice:
    """Draw c uniformly in [-pi, pi) until every crossing on every piece is transversal.

    ``pieces_by_k`` maps each truncation k to the oriented boundary pieces
    of the previous stage.  The accepted crossings are returned with the
    certificate so the boundary split reuses them.
    """
    profiles = {
        k: [arg_profile(p.path, f, zero_tol=zero_tol) for p in pieces] for k, pieces in pieces_by_k.items()
    }
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(stage), 0x5EED]))
    for attempt in range(1, max_attempts + 1):
        c = float(rng.uniform(-math.pi, math.pi))
        gaps, slopes, found, ok = [], [], {}, True
        for k, profs in profiles.items():
            gaps += [corner_gap(p, c) for p in profs]
            if gaps and min(gaps) < tolerance:
                ok = False
                break
            found[k] = [
                find_crossings(p, c, i, piece.sign) for i, (p, piece) in enumerate(zip(profs, pieces_by_k[k]))
            ]
            slopes += [abs(x.slope) for lst in found[k] for x in lst]
            if slopes and min(slopes) < tolerance:
                ok = False
                break
        if not ok:
            continue
        cert = {
            "c": c,
            "attempts": attempt,
            "seed": int(seed),
            "tolerance": tolerance,
            "min_crossing_slope": min(slopes) if slopes else None,
            "min_corner_gap": min(gaps) if gaps else None,
            "crossing_counts": {str(k): sum(len(x) for x in lst) for k, lst in sorted(found.items())},
        }
        return CutChoice(c, cert, found)
    raise NoAdmissibleCut(f"stage {stage}: no admissible cut level after {max_attempts} draws")


# ---------------------------------------------------------------------------
# tracing


class CutCurve:
    """The level set arg F = level of F = f(z1, z2(z1), ..., zd(z1)) on X_{d-1}.

    The parameter is u = log|F|.  Lower coordinates follow from z1 through
    the exponential stages below, on the branch nearest to the reference.
    """

    def __init__(self, f, level: float, lower):
        self.f = f
        self.level = float(level)
        self.lower = tuple(lower)
        self.native_depth = len(self.lower) + 1
        if f.arity != self.native_depth:
            raise ValueError("cut function arity must equal the native depth")

    def _chain(self, z1, ref):
        P, d = len(z1), self.native_depth
        Z = np.empty((P, d), dtype=complex)
        J = np.zeros((P, d), dtype=complex)
        Z[:, 0], J[:, 0] = z1, 1.0
        for j, fj in enumerate(self.lower, start=1):
            val, grad = fj.value_and_gradient(Z[:, :j])
            Z[:, j] = branch_nearest("exp", val, ref[:, j])
            J[:, j] = np.einsum("ij,ij->i", grad, J[:, :j]) / val
        F, gF = self.f.value_and_gradient(Z)
        return Z, J, F, np.einsum("ij,ij->i", gF, J)

    def solve(self, u, ref, tol: float = 1e-14, max_iter: int = 40):
        """Newton on log F(z1) = u + i level, starting at the reference point."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        ref = np.atleast_2d(np.asarray(ref, dtype=complex))
        z1 = ref[:, 0].copy()
        converged = np.zeros(len(u), dtype=bool)
        for _ in range(max_iter):
            Z, J, F, Fp = self._chain(z1, ref)
            r = np.log(F) - (u + 1j * self.level)
            r = r.real + 1j * _wrap(r.imag)
            step = r * F / Fp
            z1 = z1 - np.where(converged, 0, step)
            converged |= np.abs(step) <= tol * np.maximum(1.0, np.abs(z1))
            if converged.all():
                break
        Z, J, F, Fp = self._chain(z1, ref)
        v = F / Fp
        return Z, J * v[:, None], converged

    def coords(self, t, ref):
        Z, dZ, ok = self.solve(t, ref)
        if not ok.all():
            i = int(np.argmin(ok))
            raise TracingDivergence(f"corrector failed at u={np.atleast_1d(t)[i]:.6g}", point=complex(Z[i, 0]))
        return Z, dZ

    def initial_grid(self, t0, t1):
        raise NotImplementedError("cut curves are traced, not gridded")


@dataclass(frozen=True)
class TraceRegion:
    """Membership test for X_{d-1}^k used while tracing."""

    spec: CheeseSpec
    k: int
    windows: tuple = ()  # (c_n, m_n) for the stages below the curve's depth
    slack: float = 1e-12

    def inside(self, Z) -> np.ndarray:
        Z = np.atleast_2d(Z)
        ok = self.spec.in_region(Z[:, 0], self.k, self.slack)
        for n, (c, m) in enumerate(self.windows, start=1):
            y = Z[:, n].imag
            ok &= (y >= c - self.slack) & (y <= c + TWO_PI * m + self.slack)
        return ok

    def chord_ok(self, za: complex, zb: complex) -> bool:
        d = zb - za
        for h in self.spec.holes[: self.k]:
            if abs(d) == 0:
                dist = abs(za - h.center)
            else:
                s = min(1.0, max(0.0, ((h.center - za) * d.conjugate()).real / abs(d) ** 2))
                dist = abs(za + s * d - h.center)
            if dist < h.radius - self.slack:
                return False
        return True

    def clearance(self, Z) -> float:
        z = Z[0]
        dist = 1.0 - abs(z)
        for h in self.spec.holes[: self.k]:
            dist = min(dist, abs(z - h.center) - h.radius)
        for n, (c, m) in enumerate(self.windows, start=1):
            y = Z[n].imag
            dist = min(dist, y - c, c + TWO_PI * m - y)
        return max(dist, 0.0)


def _trace_one(curve: CutCurve, region: TraceRegion, start: Crossing, targets, used, ds_max, ds_min, max_steps):
    d = curve.native_depth
    z0 = np.asarray(start.coords[:d], dtype=complex)
    u0 = float(np.log(np.abs(curve.f(z0[None])[0])))
    Z, dZ, ok = curve.solve(u0, z0[None])
    if not ok.all() or np.max(np.abs(Z[0] - z0)) > 1e-9:
        raise TracingDivergence("seed does not lie on the cut curve", point=start.z1)
    v = dZ[0, 0]
    direction = 1.0 if (v * np.conj(1j * start.tangent)).real > 0 else -1.0
    us, Zs = [u0], [Z[0]]
    u, z, dz = u0, Z[0], dZ[0]
    for _ in range(max_steps):
        speed = abs(dz[0])
        ds = min(ds_max, max(ds_min, 0.5 * region.clearance(z)))
        h = ds / speed
        vert = np.max(np.abs(dz[1:].imag)) if d > 1 else 0.0
        if vert > 0:
            h = min(h, 0.05 / vert)
        while True:
            u1 = u + direction * h
            ref = z + direction * h * dz
            Z1, dZ1, ok = curve.solve(u1, ref[None])
            if ok[0] and abs(Z1[0, 0] - ref[0]) <= 0.25 * abs(h * dz[0]) + 1e-12:
                break
            h *= 0.5
            if h * speed < 1e-13:
                raise TracingDivergence("step collapsed while tracing a cut curve", point=complex(z[0]))
        z1, dz1 = Z1[0], dZ1[0]
        if region.inside(z1)[0] and region.chord_ok(z[0], z1[0]):
            us.append(u1)
            Zs.append(z1)
            u, z, dz = u1, z1, dz1
            continue
        # bisect for the exit
        ua, za, ub, zb = u, z, u1, z1
        for _ in range(200):
            if abs(ub - ua) <= 1e-15 * max(1.0, abs(ua)):
                break
            um = 0.5 * (ua + ub)
            w = (um - ua) / (ub - ua)
            Zm, _, okm = curve.solve(um, (za + w * (zb - za))[None])
            if okm[0] and region.inside(Zm[0])[0] and region.chord_ok(za[0], Zm[0, 0]):
                ua, za = um, Zm[0]
            else:
                ub, zb = um, Zm[0]
        best, best_dist = None, math.inf
        for j, x in enumerate(targets):
            if j in used:
                continue
            dist = float(np.max(np.abs(np.asarray(x.coords[:d]) - za)))
            if dist < best_dist:
                best, best_dist = j, dist
        if best is None or best_dist > 1e-6:
            raise TracingDivergence(
                f"cut curve left the region at an unmatched point (distance {best_dist:.3g})", point=complex(za[0])
            )
        end = targets[best]
        ze = np.asarray(end.coords[:d], dtype=complex)
        ue = float(np.log(np.abs(curve.f(ze[None])[0])))
        while len(us) > 1 and direction * (ue - us[-1]) <= 1e-13:
            us.pop()
            Zs.pop()
        us.append(ue)
        Zs.append(ze)
        order = np.argsort(us)
        return np.asarray(us)[order], np.asarray(Zs)[order], best
    raise TracingDivergence("step limit reached while tracing a cut curve", point=complex(z[0]))


def trace_cut_curves(
    f,
    c: float,
    crossings,
    region: TraceRegion,
    lower=(),
    ds_max: float = 0.02,
    ds_min: float = 1e-3,
    max_steps: int = 100000,
) -> list[LiftedPath]:
    """Trace every component of {arg f = c} in the region from its boundary crossings.

    ``crossings`` are the crossings of arg f with c + 2 pi Z on the oriented
    boundary pieces of the region (depth d = native arity of f).  Each
    component joins two of them; every crossing must be used exactly once.
    Returned paths are parameterized by ascending u = log|f| and carry
    ``meta["length"]`` (z1-length) and the matched crossing indices.
    """
    crossings = list(crossings)
    used: set[int] = set()
    out = []
    for i, x in enumerate(crossings):
        if i in used:
            continue
        used.add(i)
        level = c + TWO_PI * x.level
        curve = CutCurve(f, level, lower)
        us, Zs, j = _trace_one(curve, region, x, crossings, used, ds_max, ds_min, max_steps)
        used.add(j)
        path = LiftedPath(curve, us, Zs, (), meta={"endpoints": (i, j)})
        path.meta["length"] = cut_length(path)
        out.append(path)
    return out


def cut_length(path: LiftedPath, tol: float = 1e-12) -> float:
    def fn(t):
        _, dZ = path.evaluate(t)
        return np.abs(dZ[:, 0])[:, None]

    idx = np.unique(np.r_[np.arange(0, len(path.t), 8), len(path.t) - 1])
    val, _ = adaptive_gauss(fn, path.t[idx], tol)
    return float(val[0])
