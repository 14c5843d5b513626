import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noonamp.analytic import (
    ASYMPTOTIC_BY_N,
    VISIBILITY_SERIES,
    VISIBILITY_SERIES_EXACT,
    FormulaId as F,
    coll3_coefficients,
    eval_formula,
    multinomial,
    visibility_from_formula,
)
from noonamp.correlators import Analyzer, heisenberg_fringe, theta_grid, visibility
from noonamp.errors import FormulaDomainError
from noonamp.fock import H1, V1, PureState
from noonamp.opa import GainParams, Geometry
from noonamp.states import NoonSpec, make_noon

PAIR = PureState.basis_ket({H1: 1, V1: 1}, 2)


def test_asymptotic_two_photon_second_order():
    assert eval_formula(F.ASYM_V_N2, M=2) == pytest.approx(1 / 13, rel=1e-15)


def test_second_order_visibility_high_gain_limit():
    assert eval_formula(F.COLL_V2, nbar=1e8) == pytest.approx(0.2, abs=1e-6)


def test_flat_seed_moment():
    assert eval_formula(F.SEED_GM, N=2, M=1) == 1


def test_spontaneous_moment_at_unit_sinh():
    assert eval_formula(F.NC_SPONT_GM, M=1, g=math.asinh(1)) == pytest.approx(1.0, rel=1e-15)


def test_second_order_fringe_visibility_at_unit_nbar():
    assert visibility_from_formula(F.COLL_G2, nbar=1.0) == pytest.approx(15 / 59, rel=1e-12)


def test_noncollinear_visibility_high_gain():
    assert visibility_from_formula(F.NC_GMN_GEQ, N=2, M=2, g=10.0) == pytest.approx(1 / 13, abs=1e-6)


def test_sixth_order_visibility_high_gain_limit():
    assert eval_formula(F.COLL_V6, nbar=1e12) == pytest.approx(9245 / 10621, rel=1e-9)
    assert eval_formula(F.COLL_V6_EXACT, nbar=1e12) == pytest.approx(9245 / 10621, rel=1e-9)


def test_mean_photon_numbers():
    gain = GainParams(0.8)
    assert eval_formula(F.MEAN_N_SP, g=0.8) == pytest.approx(2 * gain.S**2)
    assert eval_formula(F.MEAN_N_STIM, g=0.8) == pytest.approx(2 + 6 * gain.S**2)


def test_nbar_and_gain_inputs_agree():
    n = GainParams(0.7).nbar
    assert eval_formula(F.COLL_V3, g=0.7) == pytest.approx(eval_formula(F.COLL_V3, nbar=n), rel=1e-12)


def test_multinomial_is_exact():
    assert multinomial(12, 3, 4) == math.factorial(12) // (math.factorial(3) * math.factorial(4) * math.factorial(5))
    assert multinomial(4, 3, 2) == 0


@given(st.floats(0, 1e6))
def test_series_second_order_visibility_equals_compact_form(nbar):
    # both expressions describe the same contrast
    assert eval_formula(F.COLL_V2_SERIES, nbar=nbar) == pytest.approx(eval_formula(F.COLL_V2, nbar=nbar), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_noncollinear_visibility_reaches_asymptote(n):
    for m in range(n, 9):
        v = visibility_from_formula(F.NC_GMN_GEQ, N=n, M=m, g=10.0)
        assert v == pytest.approx(eval_formula(ASYMPTOTIC_BY_N[n], M=m), abs=1e-6)


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0, 4.0])
def test_collinear_visibility_increases_with_order(g):
    vs = [eval_formula(VISIBILITY_SERIES[m], g=g) for m in range(2, 7)]
    assert all(a < b for a, b in zip(vs, vs[1:]))


def _equal_mean_difference(mean_n: float) -> float:
    stim = eval_formula(F.COLL_V2, nbar=(mean_n - 2) / 6)
    spont = eval_formula(F.COLL_SPONT_V2, nbar=mean_n / 2)
    return stim - spont


@pytest.mark.parametrize("mean_n", [5, 10, 20])
def test_seeded_contrast_beats_vacuum_at_low_flux(mean_n):
    assert _equal_mean_difference(mean_n) > 0


def test_seeded_and_vacuum_contrast_converge():
    assert abs(_equal_mean_difference(200)) < 0.01


def test_derived_forms_match_simulation():
    t = theta_grid(72)
    gain = GainParams(0.6)
    scan = heisenberg_fringe(make_noon(NoonSpec(2)), Geometry.NONCOLLINEAR, gain, 3, t)
    ref = [eval_formula(F.NC_GMN_GEQ_EXACT, N=2, M=3, g=0.6, theta=x) for x in t]
    np.testing.assert_allclose(scan.values, ref, rtol=1e-10)
    scan3 = heisenberg_fringe(make_noon(NoonSpec(3)), Geometry.COLLINEAR, gain, 3, t, Analyzer("phase"))
    ref3 = [eval_formula(F.COLL3_G3_EXACT, g=0.6, theta=x) for x in t]
    np.testing.assert_allclose(scan3.values, ref3, rtol=1e-10)


@pytest.mark.parametrize("m", range(2, 7))
def test_closed_form_contrast_matches_simulated_contrast(m):
    gain = GainParams(0.5)
    sim = visibility(heisenberg_fringe(PAIR, Geometry.COLLINEAR, gain, m, theta_grid(720))).V
    assert sim == pytest.approx(eval_formula(VISIBILITY_SERIES_EXACT[m], g=0.5), rel=1e-9)


def test_formula_visibility_matches_scan_visibility():
    t = theta_grid(720)
    sim = visibility(heisenberg_fringe(PAIR, Geometry.COLLINEAR, GainParams(0.5), 2, t)).V
    assert visibility_from_formula(F.COLL_G2, g=0.5) == pytest.approx(sim, rel=1e-9)


def test_three_photon_coefficients_ratio_grows():
    ratios = []
    for g in (0.5, 1.0, 1.5, 2.0):
        a, b, c, d = coll3_coefficients(GainParams(g).nbar)
        ratios.append(abs(c) / abs(d))
    assert all(x < y for x, y in zip(ratios, ratios[1:]))


def test_domain_errors():
    with pytest.raises(FormulaDomainError):
        eval_formula(F.NC_GMN_GEQ, N=3, M=2, g=0.5, theta=0.0)
    with pytest.raises(FormulaDomainError):
        eval_formula(F.NC_GMN_LESS, N=2, M=2, g=0.5)
    with pytest.raises(FormulaDomainError):
        eval_formula(F.SEED_GM, N=2, M=2)
    with pytest.raises(FormulaDomainError):
        visibility_from_formula(F.COLL_G1, g=0.5)
    with pytest.raises(FormulaDomainError):
        visibility_from_formula(F.NC_GMN_GEQ, N=3, M=2, g=0.5)


def test_missing_parameters_rejected():
    with pytest.raises((FormulaDomainError, ValueError)):
        eval_formula(F.COLL_G2, g=0.5)
    with pytest.raises((FormulaDomainError, ValueError)):
        eval_formula(F.SEED_GN, phi=0.0)


@given(st.integers(1, 6), st.floats(0, 2 * math.pi))
def test_seed_fringe_bounded(n, phi):
    v = eval_formula(F.SEED_GN, N=n, phi=phi)
    assert 0 <= v <= 2 * math.factorial(n) / 2**n + 1e-12


@given(st.integers(1, 4), st.integers(0, 3), st.floats(0.05, 3.0))
def test_noncollinear_visibility_in_unit_interval(n, extra, g):
    v = visibility_from_formula(F.NC_GMN_GEQ, N=n, M=n + extra, g=g)
    assert 0 < v <= 1


@given(st.integers(1, 12))
def test_asymptotic_visibilities_bounded(m):
    for fid in ASYMPTOTIC_BY_N.values():
        assert 0 <= eval_formula(fid, M=m) < 1


def test_loss_scales_seed_fringe():
    assert eval_formula(F.SEED_LOSS, N=3, phi=0.4, eta=0.5) == pytest.approx(
        0.125 * eval_formula(F.SEED_GN, N=3, phi=0.4)
    )
