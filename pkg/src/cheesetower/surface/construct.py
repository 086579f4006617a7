"""Building finite exponential and square-root towers stage by stage."""

from __future__ import annotations

import math

import numpy as np

from cheesetower.errors import (
    NoAdmissibleCut,
    NoRegularValue,
    TracingDivergence,
    ZeroFreeCertificationFailed,
)
from cheesetower.geometry import CheeseSpec, boundary_chain, chain_length
from cheesetower.surface.boundary import ExpBoundaryModel
from cheesetower.surface.cuts import CUT_TOLERANCE, choose_cut_level
from cheesetower.surface.rational import RationalFunction, random_polynomial
from cheesetower.surface.schedule import dictionary_source, schedule
from cheesetower.surface.tower import (
    ExpStage,
    SqrtStage,
    TowerSpec,
    fiber_array,
    next_function,
    total_derivative,
)

TWO_PI = 2.0 * math.pi
ZERO_FREE_TOL = 1e-3


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


# ---------------------------------------------------------------------------
# sampling the surfaces


def disc_grid(spacing: float, k: int | None = None, spec: CheeseSpec | None = None) -> np.ndarray:
    """Square grid of z1 points in X_0^k (the closed disc when spec is None)."""
    xs = np.arange(-1.0, 1.0 + spacing / 2, spacing)
    z = (xs[:, None] + 1j * xs[None, :]).ravel()
    if spec is None:
        return z[np.abs(z) <= 1.0]
    return z[spec.in_region(z, k)]


def surface_samples(tower: TowerSpec, level: int, k: int, spacing: float = 0.02, model=None):
    """Points of X_level^k with a covering radius for each: interior grid plus boundary samples."""
    base = tower.base
    grid = disc_grid(spacing, k, base)
    Z = fiber_array(grid, tower, level)
    radius = [np.full(len(Z), spacing / math.sqrt(2.0))]
    blocks = [Z]
    if model is not None:
        for piece in model.boundary(level, k):
            Zp = piece.path.Z
            gaps = np.abs(np.diff(Zp[:, 0]))
            rho = 0.5 * np.maximum(np.r_[gaps, 0.0], np.r_[0.0, gaps])
            blocks.append(Zp)
            radius.append(rho)
    elif tower.kind == "square_root" or not base.holes:
        phi = np.linspace(0, TWO_PI, int(TWO_PI / spacing) * 4, endpoint=False)
        ring = fiber_array(np.exp(1j * phi), tower, level)
        blocks.append(ring)
        radius.append(np.full(len(ring), TWO_PI / len(phi)))
    return np.concatenate(blocks), np.concatenate(radius)


def zero_free_margin(g: RationalFunction, tower: TowerSpec, Z: np.ndarray, radius: np.ndarray) -> dict:
    """Sampled min |g| padded by the local derivative times the covering radius."""
    den = g.denominator_value(Z[:, : g.arity])
    val, dval = total_derivative(g, tower, Z)
    padded = np.abs(val) - np.abs(dval) * radius
    return {
        "min_abs": float(np.min(np.abs(val))),
        "padded_min_abs": float(np.min(padded)),
        "min_abs_denominator": float(np.min(np.abs(den))),
        "sup_abs": float(np.max(np.abs(val))),
        "samples": int(len(Z)),
    }


# ---------------------------------------------------------------------------
# dictionaries


def _anchor_points(spec: CheeseSpec, k: int, rng) -> list[complex]:
    pts = [h.center for h in spec.holes[:k] if h.radius >= 0.02]
    for _ in range(4):
        pts.append(rng.uniform(1.3, 2.5) * np.exp(1j * rng.uniform(0, TWO_PI)))
    return pts


def _random_mobius(spec: CheeseSpec, k: int, rng, arity: int) -> RationalFunction:
    pts = _anchor_points(spec, k, rng)
    i, j = rng.choice(len(pts), size=2, replace=False)
    scale = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0, TWO_PI))
    return RationalFunction.mobius(pts[i], pts[j], scale, arity=arity)


def _shifted_polynomial(rng, arity: int, sup_of) -> RationalFunction:
    p = random_polynomial(rng, arity, int(rng.integers(1, 4)))
    s = 2.0 * max(sup_of(p), 1e-3) * np.exp(1j * rng.uniform(0, TWO_PI))
    return p.shifted(-s)


def _exp_candidate(tower: TowerSpec, level: int, j: int, rng, k: int, Z: np.ndarray) -> RationalFunction:
    spec = tower.base
    arity = level + 1
    sup_of = lambda p: float(np.max(np.abs(p(Z[:, :arity]))))
    if level == 0:
        roll = j % 6
        if roll == 5:
            return _shifted_polynomial(rng, 1, sup_of)
        return _random_mobius(spec, k, rng, 1)
    if j % 2 == 1:
        stage = tower.stages[level - 1]
        col = Z[:, level]
        lo = float(np.min(col.real))
        w = complex(lo - 1.0 - rng.uniform(0, 1), stage.c + math.pi * stage.m + rng.uniform(-1, 1))
        lin = RationalFunction.polynomial(
            [(tuple(1 if i == level else 0 for i in range(arity)), 1.0), ((0,) * arity, -w)], arity
        )
        return _random_mobius(spec, k, rng, arity) * lin
    return _shifted_polynomial(rng, arity, sup_of)


def _sqrt_candidate(level: int, j: int, rng) -> RationalFunction:
    arity = level + 1
    return random_polynomial(rng, arity, int(rng.integers(1, 4)))


def build_dictionary(
    tower: TowerSpec,
    level: int,
    size: int,
    seed: int,
    k: int | None = None,
    model=None,
    tolerance: float = ZERO_FREE_TOL,
    max_retries: int = 200,
    spacing: float = 0.02,
) -> tuple[list[RationalFunction], list[dict]]:
    """Seeded dictionary g_{level,1..size} in z1..z_{level+1} with per-entry certificates.

    Exponential towers require every entry to be zero-free on X_level^k
    (padded sampled minimum at least ``tolerance``); square-root entries are
    random polynomials and only have their sampled extremes recorded.
    """
    if size < 1:
        raise ValueError("dictionary size must be at least 1")
    k = len(tower.base.holes) if k is None else k
    Z, radius = surface_samples(tower, level, k, spacing, model)
    rng = _rng(seed, level, 0xD1C7)
    entries, certs = [], []
    for j in range(1, size + 1):
        for attempt in range(1, max_retries + 1):
            if tower.kind == "exponential":
                g = _exp_candidate(tower, level, j, rng, k, Z)
            else:
                g = _sqrt_candidate(level, j, rng)
            cert = zero_free_margin(g, tower, Z, radius)
            if tower.kind == "square_root" or cert["padded_min_abs"] >= tolerance:
                cert.update(attempts=attempt, tolerance=tolerance, truncation=k)
                entries.append(g)
                certs.append(cert)
                break
        else:
            raise ZeroFreeCertificationFailed(f"level {level} entry {j}: no certified candidate in {max_retries} draws")
    return entries, certs


def certify_entries(tower: TowerSpec, level: int, entries, k: int, model=None, spacing: float = 0.02,
                    tolerance: float = ZERO_FREE_TOL) -> list[dict]:
    """Certificates for user-supplied dictionary entries; raises if one is not zero-free."""
    Z, radius = surface_samples(tower, level, k, spacing, model)
    certs = []
    for j, g in enumerate(entries, start=1):
        cert = zero_free_margin(g.with_arity(max(g.arity, level + 1)), tower, Z, radius)
        if tower.kind == "exponential" and cert["padded_min_abs"] < tolerance:
            raise ZeroFreeCertificationFailed(f"supplied entry g_{{{level},{j}}} is not certified zero-free")
        cert.update(attempts=0, tolerance=tolerance, truncation=k, supplied=True)
        certs.append(cert)
    return certs


# ---------------------------------------------------------------------------
# stage choices


def choose_sheet_count(prev_norm: float, prev_delta: float, cut_cost_C: float, target_delta: float) -> int:
    """Least m >= 1 with m * prev_delta - C >= target."""
    if prev_delta <= 0 or cut_cost_C < 0 or target_delta <= 0:
        raise ValueError("need prev_delta > 0, C >= 0 and target_delta > 0")
    m = max(1, math.ceil((cut_cost_C + target_delta) / prev_delta))
    while m * prev_delta - cut_cost_C < target_delta:
        m += 1
    while m > 1 and (m - 1) * prev_delta - cut_cost_C >= target_delta:
        m -= 1
    return m


def sqrt_tangent(tower: TowerSpec, Z: np.ndarray, level: int) -> np.ndarray:
    """Unit tangent of X_level in coordinates z1..z_{level+1}, as a function of z1."""
    J = np.zeros((len(Z), level + 1), dtype=complex)
    J[:, 0] = 1.0
    for n, stage in enumerate(tower.stages[:level], start=1):
        val, grad = stage.f.value_and_gradient(Z[:, :n])
        w = Z[:, n]
        w = np.where(np.abs(w) < 1e-300, 1e-300, w)
        J[:, n] = np.einsum("ij,ij->i", grad, J[:, :n]) / (2.0 * w)
    return J / np.linalg.norm(J, axis=1)[:, None]


def regular_value_margin(q: RationalFunction, alpha: complex, Z: np.ndarray, T: np.ndarray) -> float:
    val, grad = q.value_and_gradient(Z[:, : q.arity])
    dq = np.einsum("ij,ij->i", grad, T[:, : q.arity])
    return float(np.min(np.maximum(np.abs(val - alpha), np.abs(dq))))


def choose_alpha(q: RationalFunction, tower: TowerSpec, M: int, seed: int, tolerance: float = 1e-4,
                 max_attempts: int = 200, spacing: float = 0.05, samples=None) -> tuple[complex, float]:
    """Random alpha with |alpha| < 1/M that is a sampled regular value of q on X_{M-1}."""
    if samples is None:
        Z, _ = surface_samples(tower, M - 1, 0, spacing)
    else:
        Z = samples
    T = sqrt_tangent(tower, Z, M - 1)
    rng = _rng(seed, M, 0xA1FA)
    for _ in range(max_attempts):
        rho = (0.999 / M) * math.sqrt(rng.uniform())
        alpha = complex(rho * np.exp(1j * rng.uniform(0, TWO_PI)))
        margin = regular_value_margin(q, alpha, Z, T)
        if margin >= tolerance:
            return alpha, margin
    raise NoRegularValue(f"stage {M}: no regular value found in {max_attempts} draws")


# ---------------------------------------------------------------------------
# tower builders


def build_exp_tower(
    spec: CheeseSpec,
    N: int,
    J: int,
    seed: int,
    ks,
    target_delta: float = 1.0,
    dictionaries: dict | None = None,
    k_dict: int | None = None,
    cut_tolerance: float = CUT_TOLERANCE,
    max_stage_retries: int = 8,
    spacing: float = 0.02,
    return_model: bool = False,
):
    """Exponential tower of height N over the truncations ``ks``.

    Each stage takes its function from the dictionary entry the schedule
    dictates, draws an admissible cut level, traces the cut set for every
    truncation and takes the least sheet count keeping the norm margin
    at least ``target_delta``.
    """
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 0 or ks[-1] > len(spec.holes):
        raise ValueError("truncations must lie between 0 and the hole count")
    k_dict = ks[0] if k_dict is None else k_dict
    supplied = {int(level): list(v) for level, v in (dictionaries or {}).items()}
    config = {
        "seed": int(seed),
        "truncations": ks,
        "k_dict": k_dict,
        "dictionary_size": int(J),
        "target_delta": float(target_delta),
        "cut_tolerance": cut_tolerance,
        "zero_free_tolerance": ZERO_FREE_TOL,
        "sample_spacing": spacing,
    }
    tower = TowerSpec("exponential", spec, [], {}, {}, config)
    model = ExpBoundaryModel(spec, tower.stages)
    delta = {k: 4.0 * math.pi - chain_length(boundary_chain(spec, k)) for k in ks}
    norm = {k: chain_length(boundary_chain(spec, k)) for k in ks}
    for M in range(1, N + 1):
        level, j = dictionary_source(M)
        if level not in tower.dictionaries:
            if level in supplied:
                entries = supplied[level]
                certs = certify_entries(tower, level, entries, k_dict, model, spacing)
            else:
                entries, certs = build_dictionary(tower, level, J, seed, k_dict, model, spacing=spacing)
            tower.dictionaries[level] = entries
            tower.dictionary_certificates[level] = certs
        f = next_function(tower, M)
        last_error = None
        for attempt in range(max_stage_retries):
            try:
                choice = choose_cut_level(
                    f, {k: model.boundary(M - 1, k) for k in ks}, M, seed + 7919 * attempt, cut_tolerance
                )
                comps = {k: model.cut_components(M, k, f, choice.c) for k in ks}
                break
            except (TracingDivergence, NoAdmissibleCut) as exc:
                last_error = exc
        else:
            raise type(last_error)(f"stage {M}: retries exhausted ({last_error})")
        d = f.native_arity
        mult = math.prod(s.m for s in tower.stages[d - 1 : M - 1])
        lengths = {k: mult * math.fsum(p.meta["length"] for p in comps[k]) for k in ks}
        cost = max(2.0 * L for L in lengths.values())
        prev = min(delta.values())
        m = choose_sheet_count(max(norm.values()), prev, cost, target_delta)
        for k in ks:
            norm[k] = m * norm[k] + 2.0 * lengths[k]
            delta[k] = m * delta[k] - 2.0 * lengths[k]
        cert = dict(choice.certificate)
        cert.update(
            retries=attempt,
            native_depth=d,
            cut_lengths={str(k): lengths[k] for k in ks},
            cut_components={str(k): len(comps[k]) for k in ks},
            prev_delta=prev,
            cut_cost=cost,
            delta={str(k): delta[k] for k in ks},
        )
        tower.stages.append(ExpStage(M, f, choice.c, m, schedule(M), (level, j), cert))
        model.choices[M] = choice
        for k in ks:
            model._cuts[(M, k)] = comps[k]
    return (tower, model) if return_model else tower


def build_sqrt_tower(
    N: int,
    J: int,
    seed: int,
    dictionaries: dict | None = None,
    spacing: float = 0.05,
    regular_tolerance: float = 1e-4,
) -> TowerSpec:
    """Square-root tower of height N over the closed unit disc."""
    base = CheeseSpec((), 0.5, int(seed), 0.01)
    config = {"seed": int(seed), "dictionary_size": int(J), "sample_spacing": spacing,
              "regular_value_tolerance": regular_tolerance}
    tower = TowerSpec("square_root", base, [], {}, {}, config)
    supplied = {int(level): list(v) for level, v in (dictionaries or {}).items()}
    for M in range(1, N + 1):
        level, j = dictionary_source(M)
        if level not in tower.dictionaries:
            if level in supplied:
                tower.dictionaries[level] = supplied[level]
                tower.dictionary_certificates[level] = certify_entries(tower, level, supplied[level], 0,
                                                                       spacing=spacing)
            else:
                entries, certs = build_dictionary(tower, level, J, seed, 0, spacing=spacing)
                tower.dictionaries[level] = entries
                tower.dictionary_certificates[level] = certs
        q = next_function(tower, M)
        alpha, margin = choose_alpha(q, tower, M, seed, regular_tolerance, spacing=spacing)
        tower.stages.append(SqrtStage(M, q, alpha, margin, schedule(M), (level, j), {"seed": int(seed)}))
    return tower
