"""Certificates for the norm and moment inequalities, the nontriviality gap,
log-modulus fitting experiments, the halving identity and the two-generator
coefficient scheme."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from cheesetower.errors import IllConditionedWarning, PoleProximity
from cheesetower.geometry import FORMAT_VERSION, CheeseSpec, boundary_chain
from cheesetower.quadrature import (
    POLE_TOL,
    ZBAR,
    Integrand,
    MeasureReport,
    boundary_integrals,
    boundary_measure,
    exp_model,
)
from cheesetower.surface.construct import disc_grid
from cheesetower.surface.rational import RationalFunction
from cheesetower.surface.tower import TowerSpec, fiber_array

TWO_PI = 2.0 * math.pi


def b_lower_bound(spec: CheeseSpec, source: str = "budget") -> float:
    """Lower bound for the area of the full cheese.

    ``budget`` gives pi (1 - r^2) with r the radius budget; ``radii`` gives
    pi (1 - (sum r_j)^2).  Both lie below pi - pi sum r_j^2.
    """
    if source == "budget":
        r = spec.radius_budget
    elif source == "radii":
        r = spec.radius_sum
    else:
        raise ValueError(f"unknown source {source!r}")
    return math.pi * (1.0 - r * r)


# ---------------------------------------------------------------------------
# conditions on norm and moment


@dataclass(frozen=True)
class Certificate:
    stage: int
    truncation: int
    lhs_norm: float
    rhs_norm_bound: float
    delta_margin: float
    moment_abs: float
    moment_bound: float
    B_lb: float
    sheet_product: int
    target_delta: float
    method: str
    pass_condition_8: bool
    pass_condition_9: bool

    @property
    def passed(self) -> bool:
        return self.pass_condition_8 and self.pass_condition_9

    def recompute(self) -> tuple[bool, bool]:
        """Pass flags recomputed from the stored numbers alone."""
        return self.lhs_norm < self.rhs_norm_bound, self.moment_abs > self.moment_bound

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "truncation": self.truncation,
            "lhs_norm": self.lhs_norm,
            "rhs_norm_bound": self.rhs_norm_bound,
            "delta_margin": self.delta_margin,
            "moment_abs": self.moment_abs,
            "moment_bound": self.moment_bound,
            "B_lb": self.B_lb,
            "sheet_product": self.sheet_product,
            "target_delta": self.target_delta,
            "method": self.method,
            "pass_condition_8": self.pass_condition_8,
            "pass_condition_9": self.pass_condition_9,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(**d)


def certify_conditions(
    tower: TowerSpec,
    N: int,
    k: int,
    B_lb: float,
    target_delta: float,
    report: MeasureReport | None = None,
    method: str | None = None,
) -> Certificate:
    """Norm bound 4 pi m1..mN - delta and moment bound 2 B m1..mN at stage N, truncation k."""
    if B_lb <= 0:
        raise ValueError("B_lb must be positive")
    if report is None:
        method = method or ("direct" if N <= 2 else "recursive")
        report = boundary_measure(tower, N, k, method)
    prod = tower.sheet_product(N)
    full = 4.0 * math.pi * prod
    lhs = float(report.total_variation)
    rhs = full - target_delta
    moment_abs = abs(report.moment_zbar)
    moment_bound = 2.0 * B_lb * prod
    return Certificate(
        N, k, lhs, rhs, full - lhs, moment_abs, moment_bound, B_lb, prod, float(target_delta),
        report.method, lhs < rhs, moment_abs > moment_bound,
    )


# ---------------------------------------------------------------------------
# nontriviality


@dataclass
class NontrivialityReport:
    gap: float
    theoretical_floor: float
    sampled_sup_norm_min: float
    annihilation_max: float
    max_test_norm: float
    total_variation: float
    tests_used: int
    skipped: list = field(default_factory=list)
    per_test: list = field(default_factory=list, repr=False)

    @property
    def annihilation_ratio(self) -> float:
        scale = self.total_variation * max(self.max_test_norm, 1e-300)
        return self.annihilation_max / scale

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "theoretical_floor": self.theoretical_floor,
            "sampled_sup_norm_min": self.sampled_sup_norm_min,
            "annihilation_max": self.annihilation_max,
            "annihilation_ratio": self.annihilation_ratio,
            "max_test_norm": self.max_test_norm,
            "total_variation": self.total_variation,
            "tests_used": self.tests_used,
            "skipped": list(self.skipped),
        }


def surface_points(tower: TowerSpec, N: int, k: int, spacing: float = 0.05, model=None) -> np.ndarray:
    """Sample points of X_N^k: a lifted interior grid plus the boundary samples."""
    model = model or exp_model(tower)
    grid = fiber_array(disc_grid(spacing, k, tower.base), tower, N)
    bnd = [p.path.Z for p in model.boundary(N, k)]
    return np.concatenate([grid] + bnd)


def test_family(spec: CheeseSpec, N: int, k: int, count: int = 50, seed: int = 0, degree: int = 4,
                scales=None) -> list[RationalFunction]:
    """Seeded holomorphic test functions on X_N^k.

    Polynomials of degree <= ``degree`` in z1..z_{N+1} (higher variables
    normalized by ``scales``) alternate with Möbius combinations whose poles
    sit at centers of removed holes.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), N, k, 0x7E57]))
    arity = N + 1
    scales = np.ones(arity) if scales is None else np.maximum(np.asarray(scales, dtype=float), 1.0)
    poles = [h.center for h in spec.holes[:k]]
    out = [RationalFunction.constant(0.0, arity)]
    while len(out) < count:
        i = len(out)
        if i % 2 == 1 or not poles:
            terms = []
            for _ in range(int(rng.integers(1, 2 * degree + 1))):
                e = [0] * arity
                for _ in range(int(rng.integers(0, degree + 1))):
                    e[int(rng.integers(arity))] += 1
                c = complex(rng.normal(), rng.normal()) / 2.0 ** sum(e)
                c /= math.prod(scales[j] ** e[j] for j in range(arity))
                terms.append((tuple(e), c))
            out.append(RationalFunction.polynomial(terms, arity))
        else:
            b = poles[int(rng.integers(len(poles)))]
            a = complex(rng.normal(), rng.normal()) * 0.5
            g = RationalFunction.mobius(a, b, 0.05 * complex(rng.normal(), rng.normal()), arity=arity)
            out.append(g)
    return out


test_family.__test__ = False  # not a pytest test despite the name


def nontriviality_gap(
    report: MeasureReport,
    tests,
    sample_points: np.ndarray,
    tower: TowerSpec,
    B_lb: float,
    model=None,
) -> NontrivialityReport:
    """|∫(z̄1 - g) dμ| / ‖μ‖ minimized over the test functions, with sampled sup norms."""
    N, k = report.stage, report.truncation
    usable, skipped = [], []
    for i, g in enumerate(tests):
        den = g.denominator_value(sample_points[:, : g.arity])
        if np.min(np.abs(den)) < POLE_TOL:
            skipped.append(i)
        else:
            usable.append((i, g))
    integrands = [ZBAR] + [Integrand.rational(g) for _, g in usable]
    try:
        _, values, lengths, _ = boundary_integrals(tower, N, k, integrands, model)
    except PoleProximity:
        raise
    tv = float(math.fsum(lengths))
    totals = values.sum(axis=0)
    moment = totals[0]
    z1bar = np.conj(sample_points[:, 0])
    per, gaps, sups, annih, norms = [], [], [], [], []
    for (i, g), val in zip(usable, totals[1:]):
        gv = g(sample_points[:, : g.arity])
        gap = abs(moment - val) / tv
        sup = float(np.max(np.abs(z1bar - gv)))
        gaps.append(gap)
        sups.append(sup)
        annih.append(abs(val))
        norms.append(float(np.max(np.abs(gv))))
        per.append({"index": i, "gap": gap, "sampled_sup": sup, "integral_abs": abs(val), "sup_g": norms[-1]})
    return NontrivialityReport(
        gap=min(gaps),
        theoretical_floor=B_lb / TWO_PI,
        sampled_sup_norm_min=min(sups),
        annihilation_max=max(annih),
        max_test_norm=max(norms),
        total_variation=tv,
        tests_used=len(usable),
        skipped=skipped,
        per_test=per,
    )


# ---------------------------------------------------------------------------
# log-modulus fitting


def chain_samples(spec: CheeseSpec, k: int, nodes_per_unit: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points of X_0^k with arc-length weights (composite Gauss on each arc)."""
    x, w = np.polynomial.legendre.leggauss(8)
    pts, wts = [], []
    for arc in boundary_chain(spec, k).arcs:
        lo, hi = arc.angle_range
        panels = max(1, int(math.ceil(arc.length * nodes_per_unit / 8)))
        edges = np.linspace(lo, hi, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            phi = 0.5 * (a + b) + 0.5 * (b - a) * x
            pts.append(arc.point(phi))
            wts.append(0.5 * (b - a) * arc.radius * w)
    return np.concatenate(pts), np.concatenate(wts)


def _design(points, dictionary) -> np.ndarray:
    P = np.asarray(points, dtype=complex)
    if P.ndim == 1:
        P = P[:, None]
    return np.column_stack([np.log(np.abs(g(P[:, : g.arity]))) for g in dictionary])


def dirichlet_residual(
    points,
    weights,
    dictionary,
    target,
    norm: str = "L2",
    previous: tuple | None = None,
    cond_limit: float = 1e10,
) -> tuple[float, np.ndarray]:
    """Best real combination of log|g_i| fitting ``target`` at the samples.

    ``norm="L2"`` minimizes the weighted root-mean-square error, ``"sup"``
    the maximum error (linear program).  ``previous`` is the
    ``(residual, coefficients)`` of a prefix of the dictionary; the result
    never exceeds it, which makes nested runs monotone.
    """
    A = _design(points, dictionary)
    u = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    n = A.shape[1]
    sw = np.sqrt(w)
    cond = np.linalg.cond(A * sw[:, None])
    if not np.isfinite(cond) or cond > cond_limit:
        warnings.warn(f"dictionary is ill-conditioned (condition estimate {cond:.3g})", IllConditionedWarning,
                      stacklevel=2)
    if norm == "L2":
        coef = np.linalg.lstsq(A * sw[:, None], u * sw, rcond=None)[0]
        resid = float(np.sqrt(np.sum(w * (A @ coef - u) ** 2)))
    elif norm == "sup":
        # variables (t, s): minimize s with -s <= A t - u <= s
        ones = np.ones((len(u), 1))
        A_ub = np.block([[A, -ones], [-A, -ones]])
        b_ub = np.concatenate([u, -u])
        c = np.zeros(n + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * n + [(0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"sup-norm fit failed: {res.message}")
        coef = res.x[:n]
        resid = float(np.max(np.abs(A @ coef - u)))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if previous is not None:
        prev_resid, prev_coef = previous
        if prev_resid < resid:
            coef = np.concatenate([prev_coef, np.zeros(n - len(prev_coef))])
            resid = float(prev_resid)
    return resid, coef


def nested_residuals(points, weights, dictionary, target, sizes, norm: str = "L2") -> list[tuple[int, float]]:
    """Residuals for the nested prefixes dictionary[:s] for s in ascending ``sizes``."""
    out, prev = [], None
    for s in sorted(sizes):
        resid, coef = dirichlet_residual(points, weights, dictionary[:s], target, norm, prev)
        prev = (resid, coef)
        out.append((s, resid))
    return out


# ---------------------------------------------------------------------------
# halving identity


def halving_identity_check(tower: TowerSpec, points: np.ndarray, zero_tol: float = 1e-300,
                           return_skipped: bool = False):
    """Max over points and stages of |log|z_{n+1}| - ½ log|f_n||."""
    if tower.kind != "square_root":
        raise ValueError("the halving identity concerns square-root towers")
    Z = np.atleast_2d(points)
    worst, skipped = 0.0, 0
    for n, (_, f) in enumerate(tower.stage_pairs(min(tower.height, Z.shape[1] - 1)), start=1):
        val = np.abs(f(Z[:, :n]))
        ok = (val > zero_tol) & (np.abs(Z[:, n]) > zero_tol)
        skipped += int(np.sum(~ok))
        if ok.any():
            d = np.abs(np.log(np.abs(Z[ok, n])) - 0.5 * np.log(val[ok]))
            worst = max(worst, float(np.max(d)))
    return (worst, skipped) if return_skipped else worst


# ---------------------------------------------------------------------------
# generator coefficients


@dataclass
class GeneratorReport:
    coefficients: dict
    case_tags: dict
    condition_checks: dict
    recovery_residuals: dict = field(default_factory=dict)
    identity_residuals: dict = field(default_factory=dict)
    lemma_N: int = 1

    @property
    def all_conditions(self) -> bool:
        return all(self.condition_checks.values())

    def to_dict(self) -> dict:
        s = lambda d: {str(k): v for k, v in sorted(d.items())}
        return {
            "lemma_N": self.lemma_N,
            "coefficients": s(self.coefficients),
            "case_tags": s(self.case_tags),
            "condition_checks": dict(self.condition_checks),
            "recovery_residuals": s(self.recovery_residuals),
            "identity_residuals": s(self.identity_residuals),
        }


def check_generator_conditions(coefficients: dict, norms: dict, cross_norms: dict, case_tags: dict) -> dict:
    """Conditions (i)-(iv) for given coefficients, with (iv) via the tail bound."""
    ns = sorted(coefficients)
    c = coefficients
    ok_i = all(c[n] > 0 for n in ns)
    ok_ii = all(c[n] * norms[n] < 2.0 ** -n for n in ns)
    ok_iii = all(
        c[n] * cross_norms[(n, k)] < 2.0 ** -n * c[k]
        for k in ns if case_tags[k] == "inverse_case"
        for n in ns if n > k
    )
    ok_iv = all(
        math.fsum(c[n] * norms[n] for n in ns if n > k) < math.pi * c[k]
        for k in ns if case_tags[k] == "log_case"
    )
    return {"i": ok_i, "ii": ok_ii, "iii": ok_iii, "iv": ok_iv}


def generator_coefficients(norms: dict, cross_norms: dict, case_tags: dict, lemma_N: int = 1) -> GeneratorReport:
    """Greedy c_n = ½ min of the constraints active at step n.

    ``norms[n]`` is ‖f_n‖, ``cross_norms[(n, k)]`` is ‖f_n h_k‖ for each
    inverse-case k < n, and ``case_tags[n]`` is ``"inverse_case"`` or
    ``"log_case"`` for every n > lemma_N.
    """
    ns = sorted(n for n in norms if n > lemma_N)
    for n in ns:
        if not (norms[n] > 0 and math.isfinite(norms[n])):
            raise ValueError(f"norm of f_{n} must be finite and positive")
        if case_tags.get(n) not in ("inverse_case", "log_case"):
            raise ValueError(f"f_{n} needs a case tag")
    c: dict = {}
    for n in ns:
        bounds = [2.0 ** -n / norms[n]]
        for k in c:
            if case_tags[k] == "inverse_case":
                bounds.append(2.0 ** -n * c[k] / cross_norms[(n, k)])
            else:
                bounds.append(math.pi * c[k] * 2.0 ** -(n - k) / norms[n])
        c[n] = 0.5 * min(bounds)
    tags = {n: case_tags[n] for n in ns}
    checks = check_generator_conditions(c, {n: norms[n] for n in ns}, cross_norms, tags)
    return GeneratorReport(c, tags, checks, lemma_N=lemma_N)


def _denominator(f: RationalFunction) -> RationalFunction:
    return RationalFunction.polynomial(f.denominator, f.arity)


def exp_generator_sequence(tower: TowerSpec, N: int):
    """The sequence z1, 1/q1, z2, 1/q2, ..., z_{N+1} of an exponential tower of height N.

    Returns ``(evaluators, tags, h, g)``: callables on coordinate rows, the
    case tag of each index > 1, and the h_k (inverse case) or g_k (log case)
    evaluators.
    """
    seq, tags, h, g = [lambda Z: Z[:, 0]], {}, {}, {}
    for n in range(1, N + 1):
        f = tower.stages[n - 1].f
        q = _denominator(f)
        i = len(seq) + 1
        seq.append(lambda Z, q=q, n=n: 1.0 / q(Z[:, :n]))
        tags[i] = "inverse_case"
        h[i] = lambda Z, q=q, n=n: q(Z[:, :n])
        i = len(seq) + 1
        seq.append(lambda Z, n=n: Z[:, n])
        tags[i] = "log_case"
        g[i] = lambda Z, f=f, n=n: f(Z[:, :n])
    return seq, tags, h, g


def tower_generator_report(tower: TowerSpec, N: int, points: np.ndarray, safety: float = 1.25) -> GeneratorReport:
    """Coefficients from sampled norms on X_N, plus pointwise recovery of every f_k."""
    seq, tags, h, g = exp_generator_sequence(tower, N)
    vals = {n: seq[n - 1](points) for n in range(1, len(seq) + 1)}
    norms = {n: safety * float(np.max(np.abs(v))) for n, v in vals.items()}
    cross = {}
    for k, tag in tags.items():
        if tag == "inverse_case":
            hk = h[k](points)
            for n in vals:
                if n > k:
                    cross[(n, k)] = safety * float(np.max(np.abs(vals[n] * hk)))
    report = generator_coefficients(norms, cross, tags, lemma_N=1)
    c = report.coefficients
    ns = sorted(c)
    for k in ns:
        b_k = sum(c[n] * vals[n] for n in ns if n >= k)
        if tags[k] == "log_case":
            tail = sum((c[n] / c[k]) * vals[n] for n in ns if n > k) if k < ns[-1] else np.zeros(len(points))
            rhs = g[k](points) * np.exp(-b_k / c[k])
            report.identity_residuals[k] = float(np.max(np.abs(np.exp(-tail) - rhs)))
            rec = b_k / c[k] + np.log(rhs)
        else:
            hk = h[k](points)
            t = (c[k] - b_k * hk) / c[k]
            inv, term = np.zeros_like(t), np.ones_like(t)
            for _ in range(200):
                inv = inv + term
                term = term * t
                if np.max(np.abs(term)) < 1e-17:
                    break
            rec = b_k * inv / c[k]
        report.recovery_residuals[k] = float(np.max(np.abs(rec - vals[k])))
    return report
