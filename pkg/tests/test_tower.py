import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheesetower.errors import ZeroOfF
from cheesetower.surface.construct import (
    build_exp_tower,
    build_sqrt_tower,
    choose_alpha,
    choose_sheet_count,
    zero_free_margin,
    surface_samples,
)
from cheesetower.surface.paths import ArcPath, LiftedPoint, SegmentPath, lift_path
from cheesetower.surface.rational import RationalFunction, random_polynomial
from cheesetower.surface.tower import TowerSpec, fiber, fiber_array, tower_jacobian

from conftest import TWO_PI, disc_spec, hand_tower, linear
from oracles import critical_points_newton, fd_derivative

Z1 = RationalFunction.variable(0, 1)


# rational functions


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), x=st.floats(-0.7, 0.7), y=st.floats(-0.7, 0.7))
def test_gradient_matches_finite_differences(seed, x, y):
    rng = np.random.default_rng(seed)
    g = random_polynomial(rng, 2, 3)
    z = np.array([[complex(x, y), complex(y, -x)]])
    _, grad = g.value_and_gradient(z)
    for i in range(2):
        e = np.zeros(2, dtype=complex)
        e[i] = 1
        fd = fd_derivative(lambda t: complex(g((z[0] + t * e)[None])[0]), 0.0)
        assert abs(grad[0, i] - fd) < 1e-6 * max(1.0, abs(fd))


def test_rational_round_trip_and_arity():
    g = RationalFunction.mobius(0.3, -0.4, 2j, arity=2, var=1)
    assert RationalFunction.from_dict(g.to_dict()) == g
    assert g.native_arity == 2
    with pytest.raises(ValueError):
        g.with_arity(1)
    assert RationalFunction.constant(3.0).native_arity == 1


def test_shifted_subtracts_constant():
    g = linear(2, 1)
    assert complex(g.shifted(0.5).of_z1(0.25)) == pytest.approx(2 * 0.25 + 1 - 0.5)


# sheet counts


def test_sheet_count_examples():
    assert choose_sheet_count(9.0, 0.5, 10.0, 1.0) == 22
    assert choose_sheet_count(3 * math.pi, 4 * math.pi - 3 * math.pi, 0.0, 1.0) == 1


@given(
    delta=st.floats(1e-3, 20), cost=st.floats(0, 100), target=st.floats(1e-3, 10)
)
def test_sheet_count_is_least_admissible(delta, cost, target):
    m = choose_sheet_count(1.0, delta, cost, target)
    assert m >= 1
    assert m * delta - cost >= target
    assert m == 1 or (m - 1) * delta - cost < target


# fibers


def test_exp_fiber_window_examples():
    one = RationalFunction.constant(1.0)
    tower = hand_tower(disc_spec(), one, 0.1, 2)
    pts = fiber(0.3, tower, 1)
    assert sorted(p.coords[1].imag for p in pts) == pytest.approx([TWO_PI, 2 * TWO_PI])
    closed = hand_tower(disc_spec(), one, 0.0, 2)
    assert len(fiber(0.3, closed, 1)) == 3


def test_sqrt_fiber_has_four_points():
    tower = build_sqrt_tower(2, 3, 5)
    pts = fiber(0.2 + 0.1j, tower, 2)
    assert len(pts) == 4
    assert max(max(p.residuals) for p in pts) < 1e-12


def test_fiber_raises_at_zero():
    tower = hand_tower(disc_spec(), linear(1, -0.5), 0.1)
    with pytest.raises(ZeroOfF):
        fiber(0.5, tower, 1)


def test_exp_fibers_of_seeded_tower(tower42):
    rng = np.random.default_rng(0)
    p = 0.6 * np.sqrt(rng.uniform(size=50)) * np.exp(1j * rng.uniform(0, TWO_PI, 50))
    p = p[tower42.base.in_region(p, 20)]
    for z in p[:10]:
        pts = fiber(complex(z), tower42, 3)
        assert len(pts) >= tower42.sheet_product(3)
        assert max(max(q.residuals) for q in pts) < 1e-9
        for q in pts:
            for n, st_ in enumerate(tower42.stages, start=1):
                lo, hi = st_.window
                assert lo - 1e-12 <= q.coords[n].imag <= hi + 1e-12


def test_jacobian_matches_finite_differences(tower42):
    z0 = 0.1 + 0.05j
    Z = fiber_array([z0], tower42, 3)
    J = tower_jacobian(tower42, Z, 3)
    h = 1e-6
    Zp, Zm = fiber_array([z0 + h], tower42, 3), fiber_array([z0 - h], tower42, 3)
    assert Zp.shape == Z.shape == Zm.shape
    fd = (Zp - Zm) / (2 * h)
    assert np.max(np.abs(J - fd)) < 1e-5 * max(1.0, np.max(np.abs(J)))


# lifting


def test_log_monodromy_on_unit_circle():
    path = lift_path(ArcPath(0, 1), [("exp", Z1)], LiftedPoint((1 + 0j, 0j)), 0.0, TWO_PI)
    assert path.Z[-1, 1] - path.Z[0, 1] == pytest.approx(TWO_PI * 1j, abs=1e-12)


def test_constant_function_lifts_constant():
    two = RationalFunction.constant(2.0)
    path = lift_path(SegmentPath(-0.5, 0.5j), [("exp", two)], LiftedPoint((-0.5 + 0j, complex(math.log(2)))))
    assert np.ptp(path.Z[:, 1].real) == 0 and np.ptp(path.Z[:, 1].imag) == 0


def test_bad_branch_seed_rejected():
    with pytest.raises(ValueError):
        lift_path(ArcPath(0, 1), [("exp", Z1)], LiftedPoint((1 + 0j, 1j)), 0.0, TWO_PI)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_stage_two_monodromy_is_integral(seed):
    # the loop avoids the zero of f1, so it closes on X_1; f2 has a zero near its center
    rng = np.random.default_rng(seed)
    a = complex(*rng.uniform(-0.3, 0.3, 2))
    b = 0.7 + complex(*rng.uniform(-0.05, 0.05, 2))
    eps = complex(*rng.uniform(-0.01, 0.01, 2))
    f1 = linear(1, -a)
    f2 = RationalFunction.polynomial([((1, 0), 1.0), ((0, 0), -b), ((0, 1), eps)], 2)
    stages = [("exp", f1), ("exp", f2)]
    loop = ArcPath(0.7, 0.2)
    z0 = 0.9 + 0j
    w1 = complex(np.log(f1.of_z1(z0)))
    w2 = complex(np.log(f2(np.array([z0, w1]))))
    seed_pt = LiftedPoint((z0, w1, w2))
    coarse = lift_path(loop, stages, seed_pt, 0.0, TWO_PI)
    fine = lift_path(loop, stages, seed_pt, 0.0, TWO_PI, max_step_arg=0.15)
    assert abs(coarse.Z[-1, 1] - coarse.Z[0, 1]) < 1e-12
    jump = coarse.Z[-1, 2] - coarse.Z[0, 2]
    turns = jump.imag / TWO_PI
    assert abs(jump.real) < 1e-8
    assert abs(turns - round(turns)) < 1e-8
    assert round(turns) == 1
    assert abs(jump - (fine.Z[-1, 2] - fine.Z[0, 2])) < 1e-8


# construction


def test_dictionary_entries_are_zero_free(tower42):
    for level, certs in tower42.dictionary_certificates.items():
        for cert in certs:
            assert cert["padded_min_abs"] >= cert["tolerance"]
            assert cert["padded_min_abs"] <= cert["min_abs"]


def test_zero_free_margin_flags_a_zero_inside():
    spec = disc_spec((0.5, 0.1))
    tower = hand_tower(spec, RationalFunction.constant(2.0), 0.1)
    Z, radius = surface_samples(tower, 0, 1, 0.05)
    good = RationalFunction.mobius(0.5, -2.0)
    bad = RationalFunction.mobius(-0.2, 3.0)
    assert zero_free_margin(good, tower, Z, radius)["padded_min_abs"] >= 1e-3
    assert zero_free_margin(bad, tower, Z, radius)["padded_min_abs"] < 0


def test_stage_sheet_counts_are_reproducible(spec42, tower42):
    again = build_exp_tower(spec42, 3, 4, 42, [5, 10, 20])
    assert [s.m for s in again.stages] == [s.m for s in tower42.stages]
    assert again.to_json() == tower42.to_json()
    for s in tower42.stages:
        cert = s.certificate
        lengths = cert["cut_lengths"].values()
        m = choose_sheet_count(1.0, cert["prev_delta"], cert["cut_cost"], 1.0)
        assert m == s.m
        assert cert["cut_cost"] == max(2 * L for L in lengths)
        assert min(cert["delta"].values()) >= 1.0


def test_tower_json_round_trip(tower42, sqrt_tower):
    for tower in (tower42, sqrt_tower):
        text = tower.to_json()
        again = TowerSpec.from_json(text)
        assert again.to_json() == text
        assert again.digest() == tower.digest()


def test_sqrt_tower_stages(sqrt_tower):
    assert sqrt_tower.height == 8
    for s in sqrt_tower.stages:
        assert abs(s.alpha) < 1 / s.level
        assert s.regular_value_margin >= 1e-4
    assert len(fiber_array([0.3 - 0.2j], sqrt_tower, 8)) == 256


def test_choose_alpha_for_square():
    base = build_sqrt_tower(0, 1, 0)
    q = RationalFunction.polynomial([((2,), 1.0)], 1)
    alpha, margin = choose_alpha(q, base, 1, seed=3)
    assert alpha != 0 and abs(alpha) < 1
    roots = np.roots([1, 0, -alpha])
    assert abs(roots[0] - roots[1]) > 0


def test_choose_alpha_for_constant():
    base = build_sqrt_tower(0, 1, 0)
    q = RationalFunction.constant(0.5)
    alpha, margin = choose_alpha(q, base, 1, seed=3)
    assert alpha != 0.5


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_choose_alpha_avoids_critical_values(seed):
    base = build_sqrt_tower(0, 1, 0)
    rng = np.random.default_rng(seed)
    q = random_polynomial(rng, 1, 3)
    alpha, _ = choose_alpha(q, base, 1, seed)
    # critical points of q from numpy.roots and from multistart Newton
    coeffs = np.zeros(4, dtype=complex)
    for (e,), c in q.numerator:
        coeffs[3 - e] += c
    crit = np.roots(np.polyder(coeffs))
    for z in crit:
        if abs(z) <= 1:
            assert abs(np.polyval(coeffs, z) - alpha) > 1e-6
    starts = [complex(x, y) for x in np.linspace(-1, 1, 7) for y in np.linspace(-1, 1, 7)]
    joint = [z for z in critical_points_newton(q, alpha, starts) if abs(z) <= 1]
    assert joint == []
