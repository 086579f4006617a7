"""Adaptive contour quadrature of 1-forms f dz1 over chains and lifted boundaries."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from cheesetower.errors import NonconvergenceWarning, PoleProximity
from cheesetower.geometry import FORMAT_VERSION, BoundaryChain, boundary_chain, canonical_json
from cheesetower.surface.paths import ArcPath, LiftedPath, Piece
from cheesetower.surface.rational import RationalFunction

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(16)
DEFAULT_TOL = 1e-12
POLE_TOL = 1e-8


def adaptive_gauss(fn, breaks, tol: float = DEFAULT_TOL, min_width: float = 1e-12, max_rounds: int = 48):
    """Integrate a vector-valued ``fn(t) -> (len(t), K)`` over [breaks[0], breaks[-1]].

    Each panel compares a 16-point Gauss rule with the sum over its two
    halves and is split until the difference is below its share of
    ``tol``.  Returns ``(values, error_estimate)`` with per-component arrays.
    """
    breaks = np.asarray(breaks, dtype=float)
    span = float(breaks[-1] - breaks[0])
    a, b = breaks[:-1], breaks[1:]
    total = None
    err = None
    for _ in range(max_rounds):
        if len(a) == 0:
            break
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        t_whole = mid[:, None] + half[:, None] * _NODES
        t_left = (a + 0.5 * half)[:, None] + 0.5 * half[:, None] * _NODES
        t_right = (mid + 0.5 * half)[:, None] + 0.5 * half[:, None] * _NODES
        t_all = np.concatenate([t_whole, t_left, t_right], axis=1).ravel()
        vals = np.asarray(fn(t_all))
        if vals.ndim == 1:
            vals = vals[:, None]
        K = vals.shape[1]
        vals = vals.reshape(len(a), 3, 16, K)
        whole = half[:, None] * np.einsum("n,pnk->pk", _WEIGHTS, vals[:, 0])
        halves = 0.5 * half[:, None] * (
            np.einsum("n,pnk->pk", _WEIGHTS, vals[:, 1]) + np.einsum("n,pnk->pk", _WEIGHTS, vals[:, 2])
        )
        diff = np.max(np.abs(whole - halves), axis=1)
        if total is None:
            total = np.zeros(K, dtype=vals.dtype)
            err = 0.0
        share = tol * (b - a) / span if span > 0 else np.full(len(a), tol)
        # nothing below rounding in the panel's own magnitude is resolvable
        mass = half * np.einsum("n,pnk->p", _WEIGHTS, np.abs(vals[:, 0]))
        share = np.maximum(share, 64 * np.finfo(float).eps * mass)
        done = (diff <= share) | ((b - a) <= min_width)
        if np.any(done & (diff > share)):
            warnings.warn("quadrature hit the panel-width floor", NonconvergenceWarning, stacklevel=2)
        total = total + halves[done].sum(axis=0)
        err += float(diff[done].sum())
        a, b = np.concatenate([a[~done], mid[~done]]), np.concatenate([mid[~done], b[~done]])
    else:
        if len(a):
            warnings.warn("quadrature round limit reached", NonconvergenceWarning, stacklevel=2)
            mid = 0.5 * (a + b)
            tt = mid[:, None] + 0.5 * (b - a)[:, None] * _NODES
            vals = np.asarray(fn(tt.ravel())).reshape(len(a), 16, -1)
            total = total + (0.5 * (b - a))[:, None] * np.einsum("n,pnk->pk", _WEIGHTS, vals).sum(axis=0)
    if total is None:
        total = np.zeros(1)
        err = 0.0
    return total, err


@dataclass(frozen=True)
class Integrand:
    """A 1-form ``h dz1``; kind is holomorphic_rational, conjugate_z1 or constant_one."""

    kind: str
    g: RationalFunction | None = None

    def __post_init__(self):
        if self.kind not in ("holomorphic_rational", "conjugate_z1", "constant_one"):
            raise ValueError(f"unknown integrand kind {self.kind!r}")
        if (self.kind == "holomorphic_rational") != (self.g is not None):
            raise ValueError("a rational integrand needs exactly one function")

    @classmethod
    def rational(cls, g: RationalFunction) -> "Integrand":
        return cls("holomorphic_rational", g)

    def values(self, Z: np.ndarray) -> np.ndarray:
        if self.kind == "conjugate_z1":
            return np.conj(Z[:, 0])
        if self.kind == "constant_one":
            return np.ones(len(Z), dtype=complex)
        return self.g(Z[:, : self.g.arity])

    def pole_distance(self, Z: np.ndarray) -> float:
        if self.kind != "holomorphic_rational":
            return math.inf
        return float(np.min(np.abs(self.g.denominator_value(Z[:, : self.g.arity]))))


ZBAR = Integrand("conjugate_z1")
ONE = Integrand("constant_one")


def _as_pieces(path) -> list[Piece]:
    if isinstance(path, Piece):
        return [path]
    if isinstance(path, BoundaryChain):
        return chain_pieces(path)
    if isinstance(path, LiftedPath):
        return [Piece(path, 1, "I", 0, "path")]
    return list(path)


def chain_pieces(chain: BoundaryChain) -> list[Piece]:
    """Base boundary arcs as depth-1 pieces with ascending angle parameter."""
    out = []
    for i, arc in enumerate(chain.arcs):
        lo, hi = arc.angle_range
        path = LiftedPath.from_base(ArcPath(arc.center, arc.radius), lo, hi)
        sign = 1 if arc.end_angle >= arc.start_angle else -1
        out.append(Piece(path, sign, "I", 0, f"arc{i}:c{arc.circle_index}"))
    return out


def _breaks(path: LiftedPath, per_panel: int = 8) -> np.ndarray:
    idx = np.unique(np.r_[np.arange(0, len(path.t), per_panel), len(path.t) - 1])
    return path.t[idx]


def piece_integrals(piece: Piece, integrands, tol: float = DEFAULT_TOL, with_length: bool = True):
    """Integrals of every integrand (and optionally |dz1|) along one oriented piece."""
    integrands = list(integrands)
    path = piece.path
    for h in integrands:
        if h.pole_distance(path.Z) < POLE_TOL:
            raise PoleProximity(f"integrand pole within {POLE_TOL:g} of piece {piece.label}")

    def fn(t):
        Z, dZ = path.evaluate(t)
        dz = dZ[:, 0]
        cols = [h.values(Z) * dz * piece.sign for h in integrands]
        if with_length:
            cols.append(np.abs(dz).astype(complex))
        return np.column_stack(cols) if cols else np.zeros((len(t), 0))

    vals, err = adaptive_gauss(fn, _breaks(path), tol)
    return vals, err


def integrate_form(path, f: Integrand, tol: float = DEFAULT_TOL) -> tuple[complex, float]:
    """Integral of f dz1 along a chain, lifted path, piece, or list of pieces."""
    total, err = 0j, 0.0
    for piece in _as_pieces(path):
        vals, e = piece_integrals(piece, [f], tol, with_length=False)
        total += complex(vals[0])
        err += e
    return total, err


def total_variation(path, tol: float = DEFAULT_TOL) -> float:
    """The z1-length of the projected path, i.e. the mass of |dz1|."""
    total = 0.0
    for piece in _as_pieces(path):
        vals, _ = piece_integrals(piece, [], tol, with_length=True)
        total += float(vals[0].real)
    return total


# ---------------------------------------------------------------------------
# boundary measures of exponential towers


@dataclass
class MeasureReport:
    stage: int
    truncation: int
    total_variation: float
    moment_zbar: complex
    ei_variation: float
    ej_variation: float
    ei_moment: complex
    ej_moment: complex
    quadrature_error: float
    method: str
    closure: complex = 0j
    piece_count: int = 0
    contributions: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        cplx = lambda z: [float(z.real), float(z.imag)]
        return {
            "version": FORMAT_VERSION,
            "stage": self.stage,
            "truncation": self.truncation,
            "method": self.method,
            "total_variation": float(self.total_variation),
            "moment_zbar": cplx(self.moment_zbar),
            "ei_variation": float(self.ei_variation),
            "ej_variation": float(self.ej_variation),
            "ei_moment": cplx(self.ei_moment),
            "ej_moment": cplx(self.ej_moment),
            "quadrature_error": float(self.quadrature_error),
            "closure": cplx(self.closure),
            "piece_count": self.piece_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureReport":
        c = lambda v: complex(v[0], v[1])
        return cls(
            d["stage"], d["truncation"], d["total_variation"], c(d["moment_zbar"]), d["ei_variation"],
            d["ej_variation"], c(d["ei_moment"]), c(d["ej_moment"]), d["quadrature_error"], d["method"],
            c(d.get("closure", [0.0, 0.0])), d.get("piece_count", 0),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def contributions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["piece", "role", "stage", "orientation", "length", "zbar_re", "zbar_im", "dz_re", "dz_im"])
        for row in self.contributions:
            w.writerow([row["piece"], row["role"], row["stage"], row["orientation"], repr(row["length"]),
                        repr(row["zbar"].real), repr(row["zbar"].imag), repr(row["dz"].real), repr(row["dz"].imag)])
        return buf.getvalue()


def exp_model(tower):
    """The boundary model cached on a tower (created on first use)."""
    from cheesetower.surface.boundary import ExpBoundaryModel

    if tower.kind != "exponential":
        raise ValueError("boundary measures are defined for exponential towers")
    model = tower._cache.get("model")
    if model is None:
        model = ExpBoundaryModel(tower.base, tower.stages)
        tower._cache["model"] = model
    return model


def boundary_pieces(tower, N: int, k: int, model=None) -> list[Piece]:
    model = model or exp_model(tower)
    return model.boundary(N, k)


def boundary_integrals(tower, N: int, k: int, integrands, model=None, tol: float = DEFAULT_TOL):
    """Integrals of each integrand over the oriented boundary of X_N^k, piece by piece.

    Returns ``(values, lengths, errors)`` where values has one row per piece.
    """
    from cheesetower._threads import ordered_map

    pieces = boundary_pieces(tower, N, k, model)
    results = ordered_map(lambda p: piece_integrals(p, integrands, tol), pieces)
    K = len(integrands)
    values = np.array([r[0][:K] for r in results]).reshape(len(pieces), K)
    lengths = np.array([r[0][K].real for r in results])
    errors = np.array([r[1] for r in results])
    return pieces, values, lengths, errors


def _pairwise(x) -> complex:
    # fixed-order pairwise reduction keyed by piece index
    x = list(x)
    if not x:
        return 0j
    while len(x) > 1:
        x = [x[i] + x[i + 1] if i + 1 < len(x) else x[i] for i in range(0, len(x), 2)]
    return x[0]


def boundary_measure(tower, N: int, k: int, method: str = "direct", model=None, tol: float = DEFAULT_TOL) -> MeasureReport:
    """Total variation and z̄1-moment of the measure dz1 on the boundary of X_N^k."""
    if method not in ("direct", "recursive"):
        raise ValueError(f"unknown method {method!r}")
    if N < 0 or N > tower.height:
        raise ValueError(f"stage {N} is not built")
    model = model or exp_model(tower)
    if method == "recursive":
        if N == 0:
            arcs = boundary_chain(tower.base, k).arcs
            moment = _pairwise(a.zbar_dz() for a in arcs)
            var = math.fsum(a.length for a in arcs)
            return MeasureReport(0, k, var, moment, var, 0.0, moment, 0j, 0.0, "recursive", 0j, len(arcs))
        prev = boundary_measure(tower, N - 1, k, "recursive", model, tol)
        m = tower.stages[N - 1].m
        L = model.cut_length(N, k)
        ei_var, ej_var = m * prev.total_variation, 2.0 * L
        ei_mom = m * prev.moment_zbar
        return MeasureReport(N, k, ei_var + ej_var, ei_mom, ei_var, ej_var, ei_mom, 0j,
                             m * prev.quadrature_error, "recursive", 0j, 0)
    pieces, values, lengths, errors = boundary_integrals(tower, N, k, [ZBAR, ONE], model, tol)
    is_j = np.array([p.role == "J" and p.stage == N and N > 0 for p in pieces], dtype=bool)
    ei_mom = _pairwise(values[~is_j, 0])
    ej_mom = _pairwise(values[is_j, 0])
    ei_var = float(math.fsum(lengths[~is_j]))
    ej_var = float(math.fsum(lengths[is_j]))
    rows = [
        {"piece": p.label, "role": "J" if j else "I", "stage": p.stage, "orientation": p.sign,
         "length": float(L), "zbar": complex(v[0]), "dz": complex(v[1])}
        for p, v, L, j in zip(pieces, values, lengths, is_j)
    ]
    return MeasureReport(
        N, k, ei_var + ej_var, complex(ei_mom + ej_mom), ei_var, ej_var, complex(ei_mom), complex(ej_mom),
        float(errors.sum()), "direct", complex(_pairwise(values[:, 1])), len(pieces), rows,
    )

