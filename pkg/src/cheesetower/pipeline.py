"""End-to-end runs: spec, tower and verdict documents from a RunConfig."""

from __future__ import annotations

import math

import numpy as np

from cheesetower.certification import (
    b_lower_bound,
    certify_conditions,
    chain_samples,
    halving_identity_check,
    nested_residuals,
    nontriviality_gap,
    surface_points,
    test_family,
    tower_generator_report,
)
from cheesetower.config import RunConfig
from cheesetower.geometry import FORMAT_VERSION, CheeseSpec, generate_cheese
from cheesetower.quadrature import boundary_measure, exp_model
from cheesetower.surface.construct import build_exp_tower, build_sqrt_tower, disc_grid
from cheesetower.surface.tower import TowerSpec, fiber_array

GAP_SLACK = 1e-4
SUP_SLACK = 1e-3
ANNIHILATION_RATIO = 1e-8
DUAL_METHOD_RTOL = 1e-6


def make_spec(cfg: RunConfig) -> CheeseSpec:
    return generate_cheese(cfg.seed, cfg.radius_budget, cfg.hole_count, cfg.min_crossing_angle)


def make_tower(spec: CheeseSpec | None, cfg: RunConfig, dictionaries: dict | None = None) -> TowerSpec:
    if cfg.kind == "sqrt":
        return build_sqrt_tower(cfg.stages, cfg.dictionary_size, cfg.seed, dictionaries)
    return build_exp_tower(spec, cfg.stages, cfg.dictionary_size, cfg.seed, cfg.truncations,
                           cfg.target_delta, dictionaries, cut_tolerance=cfg.tolerances.transversality)


def _f(x) -> float:
    return float(x)


def _exp_verdict(tower: TowerSpec, cfg: RunConfig, ks) -> dict:
    spec = tower.base
    B = b_lower_bound(spec)
    model = exp_model(tower)
    certs, gaps, checks = [], [], []
    measures = {}
    for N in range(tower.height + 1):
        for k in ks:
            method = "direct" if N <= 2 else "recursive"
            rep = boundary_measure(tower, N, k, method, model, cfg.tolerances.quadrature)
            measures[(N, k)] = rep
            certs.append(certify_conditions(tower, N, k, B, cfg.target_delta, rep).to_dict())
            if method == "direct" and N >= 1:
                rec = boundary_measure(tower, N, k, "recursive", model)
                prev = measures[(N - 1, k)]
                m = tower.stages[N - 1].m
                checks.append({
                    "stage": N,
                    "truncation": k,
                    "dual_method_moment_rel": _f(abs(rep.moment_zbar - rec.moment_zbar) / abs(rec.moment_zbar)),
                    "dual_method_variation_rel": _f(abs(rep.total_variation - rec.total_variation)
                                                    / rec.total_variation),
                    "ei_law_rel": _f(abs(rep.ei_moment - m * prev.moment_zbar) / abs(m * prev.moment_zbar)),
                    "ej_cancellation_ratio": _f(abs(rep.ej_moment) / rep.ej_variation) if rep.ej_variation else 0.0,
                    "closure_abs": _f(abs(rep.closure)),
                })
            if method == "direct":
                pts = surface_points(tower, N, k, model=model)
                tests = test_family(spec, N, k, cfg.tests, cfg.seed, scales=np.max(np.abs(pts), axis=0))
                nt = nontriviality_gap(rep, tests, pts, tower, B, model)
                d = {"stage": N, "truncation": k}
                d.update({key: (_f(v) if isinstance(v, (float, np.floating)) else v) for key, v in nt.to_dict().items()})
                d["pass"] = bool(
                    nt.gap >= nt.theoretical_floor - GAP_SLACK
                    and nt.sampled_sup_norm_min >= nt.gap - SUP_SLACK
                    and nt.annihilation_ratio <= ANNIHILATION_RATIO
                )
                gaps.append(d)
    for c in checks:
        c["pass"] = bool(
            c["dual_method_moment_rel"] <= DUAL_METHOD_RTOL
            and c["ei_law_rel"] <= DUAL_METHOD_RTOL
            and c["ej_cancellation_ratio"] <= 1e-8
        )
    verdict = {
        "certificates": certs,
        "nontriviality": gaps,
        "cross_checks": checks,
        "B_lb": B,
        "delta_min": min(c["delta_margin"] for c in certs),
    }
    if tower.height >= 1:
        N = min(tower.height, 2)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x6E4]))
        Z = fiber_array(disc_grid(0.05, max(ks), spec), tower, N)
        Z = Z[np.sort(rng.choice(len(Z), size=min(1000, len(Z)), replace=False))]
        gen = tower_generator_report(tower, N, Z)
        verdict["generators"] = gen.to_dict()
        verdict["generators"]["pass"] = bool(gen.all_conditions and max(gen.recovery_residuals.values()) <= 1e-6)
    level0 = tower.dictionaries.get(0, [])
    if level0:
        pts, w = chain_samples(spec, max(ks))
        sizes = sorted({min(5, len(level0)), len(level0)})
        res = nested_residuals(pts, w, level0, pts.real, sizes)
        verdict["density"] = {
            "target": "Re z1",
            "truncation": max(ks),
            "residuals": [{"size": s, "residual": _f(r)} for s, r in res],
            "nonincreasing": all(b[1] <= a[1] for a, b in zip(res, res[1:])),
        }
    passed = all(c["pass_condition_8"] and c["pass_condition_9"] for c in certs)
    passed &= all(g["pass"] for g in gaps) and all(c["pass"] for c in checks)
    if "generators" in verdict:
        passed &= verdict["generators"]["pass"]
    verdict["all_passed"] = bool(passed)
    return verdict


def _sqrt_verdict(tower: TowerSpec, cfg: RunConfig) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5A7]))
    p = np.sqrt(rng.uniform(0, 1, 100)) * np.exp(2j * math.pi * rng.uniform(size=100))
    N = tower.height
    counts = [len(fiber_array([z], tower, N)) for z in p]
    Z = fiber_array(p, tower, N)
    halving = halving_identity_check(tower, Z)
    alphas = [{"stage": s.level, "abs_alpha": abs(s.alpha), "bound": 1.0 / s.level,
               "regular_value_margin": s.regular_value_margin} for s in tower.stages]
    ok = all(c == 2 ** N for c in counts) and halving <= 1e-12 and all(a["abs_alpha"] < a["bound"] for a in alphas)
    return {
        "fiber_counts": {"expected": 2 ** N, "min": min(counts), "max": max(counts), "points": len(counts)},
        "halving_max_residual": halving,
        "alphas": alphas,
        "all_passed": bool(ok),
    }


def certify_tower(tower: TowerSpec, cfg: RunConfig, ks=None) -> dict:
    """The verdict payload (no timestamps) for a built tower."""
    ks = list(ks if ks is not None else tower.config.get("truncations", cfg.truncations))
    body = _exp_verdict(tower, cfg, ks) if tower.kind == "exponential" else _sqrt_verdict(tower, cfg)
    body.update({
        "version": FORMAT_VERSION,
        "kind": tower.kind,
        "truncations": ks,
        "stages": tower.height,
        "provenance": {
            "spec_sha256": tower.base.digest(),
            "tower_sha256": tower.digest(),
            "config": cfg.to_dict(),
        },
    })
    return body
