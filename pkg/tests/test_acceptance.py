"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary so that
they are visible without ``-s``.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from cheesetower.certification import (
    b_lower_bound,
    certify_conditions,
    chain_samples,
    dirichlet_residual,
    halving_identity_check,
    nested_residuals,
    nontriviality_gap,
    surface_points,
    tower_generator_report,
)
from cheesetower.certification import test_family as make_tests
from cheesetower.cli import main
from cheesetower.errors import IllConditionedWarning
from cheesetower.geometry import boundary_chain, chain_length, generate_cheese, monte_carlo_area
from cheesetower.quadrature import ZBAR, boundary_measure, exp_model, integrate_form
from cheesetower.surface.construct import build_dictionary, build_exp_tower, disc_grid
from cheesetower.surface.schedule import schedule
from cheesetower.surface.tower import TowerSpec, fiber_array, next_function

from conftest import KS
from oracles import brute_schedule

RESULTS: list[str] = []
SEEDS = range(10)
B_LB = math.pi * (1 - 0.25)


def verdict(tag: str, ok: bool, detail: str) -> None:
    line = f"{tag} {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def timed_tower():
    spec = generate_cheese(42, 0.5, 20, 0.01)
    t0 = time.perf_counter()
    tower = build_exp_tower(spec, 3, 4, 42, KS, target_delta=1.0)
    return tower, time.perf_counter() - t0


def test_c01_green_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        spec = generate_cheese(seed, 0.5, 20, 0.01)
        k = len(spec.holes)
        value, _ = integrate_form(boundary_chain(spec, k), ZBAR, 1e-10)
        est, sigma = monte_carlo_area(spec, k, 10**7)
        worst = max(worst, abs(value - 2j * est) / (2 * sigma))
    elapsed = time.perf_counter() - t0
    verdict("C1", worst <= 3.0 and elapsed <= 60.0, f"max deviation {worst:.2f} sigma, {elapsed:.1f}s")


def test_c02_chain_length_bound():
    longest = max(
        chain_length(boundary_chain(spec, k))
        for spec in (generate_cheese(s, 0.5, 20, 0.01) for s in SEEDS)
        for k in range(len(spec.holes) + 1)
    )
    verdict("C2", longest < 3 * math.pi, f"max chain length {longest:.6f} < {3 * math.pi:.6f}")


def test_c03_ei_multiplication_law(timed_tower):
    tower, _ = timed_tower
    worst = 0.0
    for N in (1, 2):
        m = tower.stages[N - 1].m
        for k in KS:
            prev = boundary_measure(tower, N - 1, k, "direct")
            rep = boundary_measure(tower, N, k, "direct")
            worst = max(worst, abs(rep.ei_moment - m * prev.moment_zbar) / abs(m * prev.moment_zbar))
    verdict("C3", worst <= 1e-6, f"max relative deviation {worst:.2e}")


def test_c04_ej_cancellation(timed_tower):
    tower, _ = timed_tower
    ratios = []
    for N in (1, 2):
        for k in KS:
            rep = boundary_measure(tower, N, k, "direct")
            ratios.append(abs(rep.ej_moment) / rep.ej_variation if rep.ej_variation else 0.0)
    verdict("C4", max(ratios) <= 1e-8, f"max |E_J moment| / variation {max(ratios):.2e}")


def test_c05_conditions_8_and_9(timed_tower):
    tower, build_time = timed_tower
    t0 = time.perf_counter()
    failures, deltas = [], []
    for N in (1, 2, 3):
        method = "recursive" if N == 3 else "direct"
        for k in KS:
            rep = boundary_measure(tower, N, k, method)
            cert = certify_conditions(tower, N, k, B_LB, 1.0, rep)
            deltas.append(cert.delta_margin)
            bound = 2 * B_LB * tower.sheet_product(N)
            if not (cert.passed and cert.delta_margin >= 1.0 and cert.moment_abs > bound):
                failures.append((N, k))
    elapsed = build_time + time.perf_counter() - t0
    ok = not failures and elapsed <= 600.0 and b_lower_bound(tower.base) == pytest.approx(B_LB)
    verdict("C5", ok, f"m={[s.m for s in tower.stages]} min delta {min(deltas):.3f}, "
                      f"failures {failures}, {elapsed:.1f}s")


def _gap_reports(tower):
    model = exp_model(tower)
    for N in (0, 1, 2):
        for k in KS:
            rep = boundary_measure(tower, N, k, "direct", model)
            pts = surface_points(tower, N, k, model=model)
            tests = make_tests(tower.base, N, k, 50, 42, scales=np.max(np.abs(pts), axis=0))
            yield nontriviality_gap(rep, tests, pts, tower, B_LB, model)


def test_c06_nontriviality_gap(timed_tower):
    tower, _ = timed_tower
    reports = list(_gap_reports(tower))
    min_gap = min(r.gap for r in reports)
    sup_ok = all(row["sampled_sup"] >= r.gap - 1e-3 for r in reports for row in r.per_test)
    ok = min_gap >= 0.375 - 1e-4 and sup_ok and all(r.tests_used == 50 for r in reports)
    verdict("C6", ok, f"min gap {min_gap:.6f}, sampled sup bound {'holds' if sup_ok else 'violated'}")


def test_c07_stokes_annihilation(timed_tower):
    tower, _ = timed_tower
    worst = max(r.annihilation_ratio for r in _gap_reports(tower))
    verdict("C7", worst <= 1e-8, f"max annihilation ratio {worst:.2e}")


def test_c08_sqrt_tower(sqrt_tower):
    rng = np.random.default_rng(8)
    p = np.sqrt(rng.uniform(size=100)) * np.exp(2j * math.pi * rng.uniform(size=100))
    counts_ok = True
    for N in range(1, 9):
        counts_ok &= all(len(fiber_array([z], sqrt_tower, N)) == 2**N for z in p)
    alpha_ok = all(abs(s.alpha) < 1 / s.level for s in sqrt_tower.stages)
    halving = halving_identity_check(sqrt_tower, fiber_array(p, sqrt_tower, 8))
    ok = counts_ok and alpha_ok and halving <= 1e-12 and sqrt_tower.height == 8
    verdict("C8", ok, f"fiber counts {'exact' if counts_ok else 'wrong'}, "
                      f"alpha bounds {'hold' if alpha_ok else 'violated'}, halving {halving:.1e}")


def test_c09_scheduler(timed_tower):
    tower, _ = timed_tower
    agree = [tuple(schedule(N)) for N in range(1, 10**4 + 1)] == brute_schedule(10**4)
    wiring = (
        tuple(schedule(1)) == (0, 0)
        and tuple(schedule(3)) == (2, 1)
        and next_function(tower, 1) == tower.dictionaries[0][0].with_arity(1)
        and next_function(tower, 3) == tower.dictionaries[1][0].with_arity(3)
        and tower.stages[0].f == next_function(tower, 1)
        and tower.stages[2].f == next_function(tower, 3)
    )
    verdict("C9", agree and wiring, f"brute force {'agrees' if agree else 'differs'}, "
                                    f"wiring {'ok' if wiring else 'wrong'}")


def test_c10_generator_coefficients(timed_tower):
    tower, _ = timed_tower
    Z = fiber_array(disc_grid(0.05, 20, tower.base), tower, 2)
    Z = Z[np.random.default_rng(10).choice(len(Z), 1000, replace=False)]
    rep = tower_generator_report(tower, 2, Z)
    recovery = max(rep.recovery_residuals.values())
    ok = rep.all_conditions and len(rep.condition_checks) == 4 and recovery <= 1e-6
    verdict("C10", ok, f"conditions {rep.condition_checks}, recovery {recovery:.1e}")


def test_c11_density_residual(three_hole):
    entries, _ = build_dictionary(TowerSpec("exponential", three_hole, [], {}, {}, {}), 0, 50, 7, 3)
    pts, w = chain_samples(three_hole, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        nested = nested_residuals(pts, w, entries, pts.real, [5, 15, 50])
        exact, _ = dirichlet_residual(pts, w, entries[:5], np.log(np.abs(entries[2].of_z1(pts))))
    values = [r for _, r in nested]
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    verdict("C11", monotone and exact <= 1e-10,
            f"residuals {', '.join(f'{v:.3e}' for v in values)}; member residual {exact:.1e}")


def _pipeline(d):
    codes = [
        main(["gen-cheese", "--seed", "42", "--out", str(d / "spec.json")]),
        main(["build-tower", "--spec", str(d / "spec.json"), "--stages", "3", "--dict", "4",
              "--out", str(d / "tower.json")]),
        main(["certify", "--tower", str(d / "tower.json"), "--out", str(d / "verdict.json")]),
    ]
    docs = {}
    for name in ("spec", "tower", "verdict"):
        doc = json.loads((d / f"{name}.json").read_text())
        doc.pop("metadata", None)
        docs[name] = json.dumps(doc, sort_keys=True).encode()
    return codes, docs


def test_c12_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    codes_a, a = _pipeline(tmp_path / "a")
    codes_b, b = _pipeline(tmp_path / "b")
    same = [name for name in a if a[name] == b[name]]
    ok = codes_a == codes_b == [0, 0, 0] and len(same) == 3
    verdict("C12", ok, f"byte-identical payloads: {', '.join(same)}")
