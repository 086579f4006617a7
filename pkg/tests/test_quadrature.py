import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheesetower.errors import NonconvergenceWarning, PoleProximity
from cheesetower.geometry import area, boundary_chain, chain_length, generate_cheese
from cheesetower.quadrature import (
    ONE,
    ZBAR,
    Integrand,
    MeasureReport,
    adaptive_gauss,
    boundary_integrals,
    boundary_measure,
    exp_model,
    integrate_form,
    total_variation,
)
from cheesetower.surface.rational import RationalFunction

from conftest import KS, disc_spec, hand_tower, linear

UNIT = boundary_chain(disc_spec(), 0)
INV_Z = Integrand.rational(RationalFunction((((0,), 1.0),), (((1,), 1.0),), 1))


def test_adaptive_gauss_smooth_integrals():
    val, err = adaptive_gauss(lambda t: np.column_stack([np.exp(t), np.cos(t)]), [0.0, 1.0])
    assert val[0] == pytest.approx(math.e - 1, abs=1e-14)
    assert val[1] == pytest.approx(math.sin(1), abs=1e-14)
    assert err < 1e-12


def test_adaptive_gauss_refines_near_a_kink():
    val, _ = adaptive_gauss(lambda t: np.abs(t - 0.3), [0.0, 1.0], tol=1e-12)
    assert val[0] == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-12)


def test_adaptive_gauss_warns_when_unresolved():
    with pytest.warns(NonconvergenceWarning):
        adaptive_gauss(lambda t: 1 / np.sqrt(np.abs(t - 1 / 3)), [0.0, 1.0], tol=1e-14, max_rounds=6)


def test_unit_circle_examples():
    assert abs(integrate_form(UNIT, ONE)[0]) < 1e-14
    assert integrate_form(UNIT, ZBAR)[0] == pytest.approx(2j * math.pi, abs=1e-13)
    assert integrate_form(UNIT, INV_Z)[0] == pytest.approx(2j * math.pi, abs=1e-13)
    assert total_variation(UNIT) == pytest.approx(2 * math.pi, abs=1e-13)


def test_pole_on_the_path_is_refused():
    near = Integrand.rational(RationalFunction.mobius(0.0, 1.0))
    with pytest.raises(PoleProximity):
        integrate_form(UNIT, near)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), holes=st.integers(0, 15))
def test_stage_zero_green_identity(seed, holes):
    spec = generate_cheese(seed, 0.5, holes, 0.01)
    chain = boundary_chain(spec, holes)
    value, _ = integrate_form(chain, ZBAR, 1e-12)
    A, _ = area(spec, holes)
    assert value == pytest.approx(2j * A, abs=1e-10)
    assert total_variation(chain) == pytest.approx(chain_length(chain), abs=1e-11)


def test_stage_zero_methods_agree(spec42):
    tower = hand_tower(spec42, RationalFunction.constant(2.0), 1.0)
    for k in KS:
        d = boundary_measure(tower, 0, k, "direct")
        r = boundary_measure(tower, 0, k, "recursive")
        assert d.moment_zbar == pytest.approx(2j * area(spec42, k)[0], abs=1e-11)
        assert d.moment_zbar == pytest.approx(r.moment_zbar, abs=1e-11)
        assert d.total_variation == pytest.approx(chain_length(boundary_chain(spec42, k)), abs=1e-11)


def test_constant_stage_multiplies_exactly(spec42):
    tower = hand_tower(spec42, RationalFunction.constant(2.0), 1.0, m=3)
    base = boundary_measure(tower, 0, 10, "direct")
    rep = boundary_measure(tower, 1, 10, "direct")
    assert rep.ej_variation == 0 and rep.ej_moment == 0
    assert rep.moment_zbar == pytest.approx(3 * base.moment_zbar, abs=1e-12)
    assert rep.total_variation == pytest.approx(3 * base.total_variation, abs=1e-12)


def test_segment_cut_copies():
    tower = hand_tower(disc_spec(), linear(1, -2), math.pi)
    rep = boundary_measure(tower, 1, 0, "direct")
    assert rep.ej_variation == pytest.approx(4.0, abs=1e-9)
    assert rep.ei_variation == pytest.approx(2 * math.pi, abs=1e-12)
    assert abs(rep.ej_moment) <= 1e-8 * rep.ej_variation


def test_ei_multiplication_law(tower42):
    for N in (1, 2):
        m = tower42.stages[N - 1].m
        for k in KS:
            prev = boundary_measure(tower42, N - 1, k, "direct")
            rep = boundary_measure(tower42, N, k, "direct")
            assert abs(rep.ei_moment - m * prev.moment_zbar) <= 1e-6 * abs(m * prev.moment_zbar)
            assert rep.ei_variation == pytest.approx(m * prev.total_variation, rel=1e-6)


def test_ej_cancellation(tower42):
    for N in (1, 2):
        for k in KS:
            rep = boundary_measure(tower42, N, k, "direct")
            assert abs(rep.ej_moment) <= 1e-8 * rep.ej_variation


def test_direct_and_recursive_agree(tower42):
    for N in (1, 2, 3):
        for k in KS:
            d = boundary_measure(tower42, N, k, "direct")
            r = boundary_measure(tower42, N, k, "recursive")
            assert abs(d.moment_zbar - r.moment_zbar) <= 1e-6 * abs(r.moment_zbar)
            assert d.total_variation == pytest.approx(r.total_variation, rel=1e-6)


def test_boundary_is_closed(tower42):
    model = exp_model(tower42)
    for N in range(4):
        for k in KS:
            assert model.closure_defect(N, k) < 1e-8
            assert abs(boundary_measure(tower42, N, k, "direct").closure) < 1e-10


def test_two_copies_per_cut_curve(tower42):
    model = exp_model(tower42)
    for N in (1, 2, 3):
        js = [p for p in model.boundary(N, 10) if p.role == "J" and p.stage == N]
        lo = [p for p in js if p.label.endswith("@lo")]
        hi = [p for p in js if p.label.endswith("@hi")]
        assert len(lo) == len(hi) and {p.sign for p in lo} <= {1} and {p.sign for p in hi} <= {-1}
        c, m = tower42.stages[N - 1].c, tower42.stages[N - 1].m
        for a, b in zip(lo, hi):
            assert np.allclose(a.path.Z[:, :N], b.path.Z[:, :N])
            assert np.allclose(b.path.Z[:, N] - a.path.Z[:, N], 2j * np.pi * m)
            assert np.allclose(a.path.Z[:, N].imag, c)
        rep = boundary_measure(tower42, N, 10, "direct")
        assert rep.ej_variation == pytest.approx(2 * model.cut_length(N, 10), rel=1e-9)


def test_stokes_annihilation(tower42):
    for N in (0, 1, 2):
        integrands = [Integrand.rational(g) for level, entries in tower42.dictionaries.items()
                      if level <= N for g in entries]
        for k in (5, 20):
            pieces, values, lengths, _ = boundary_integrals(tower42, N, k, integrands)
            mu = lengths.sum()
            for h, col in zip(integrands, values.T):
                sup = max(float(np.max(np.abs(h.values(p.path.Z)))) for p in pieces)
                assert abs(col.sum()) <= 1e-8 * mu * sup


def test_triangle_consistency(tower42):
    for N in range(4):
        for k in KS:
            rep = boundary_measure(tower42, N, k, "recursive" if N == 3 else "direct")
            assert rep.total_variation >= abs(rep.moment_zbar)


def test_report_serialization(tower42):
    rep = boundary_measure(tower42, 1, 5, "direct")
    again = MeasureReport.from_dict(rep.to_dict())
    assert again.to_json() == rep.to_json()
    rows = rep.contributions_csv().strip().splitlines()
    assert len(rows) == rep.piece_count + 1


def test_thread_count_invariance(tower42, monkeypatch):
    reps = []
    for threads in ("1", "4"):
        monkeypatch.setenv("CHEESE_THREADS", threads)
        reps.append(boundary_measure(tower42, 2, 10, "direct"))
    assert reps[0].to_json() == reps[1].to_json()
