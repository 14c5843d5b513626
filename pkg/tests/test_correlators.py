import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noonamp.analytic import FormulaId, eval_formula
from noonamp.errors import DivergentRatioError, LeakageError, UndefinedVisibilityError
from noonamp.fock import H1, V1, PolBasis, PureState
from noonamp.opa import GainParams, Geometry, amplify, noncollinear_amplify
from noonamp.correlators import (
    Analyzer,
    FringeScan,
    fourier_coefficients,
    fringe_scan,
    heisenberg_fringe,
    seed_fringe,
    stimulated_vs_spontaneous_ratio,
    theta_grid,
    visibility,
)
from noonamp.states import NoonSpec, change_basis, make_noon, vacuum

GRID = theta_grid(72)
PAIR = PureState.basis_ket({H1: 1, V1: 1}, 2)
COLL_VAC = PureState.vacuum((H1, V1), 0)


def test_theta_grid_is_half_open():
    t = theta_grid(8)
    assert t[0] == 0 and t[-1] < 2 * np.pi
    assert np.allclose(np.diff(t), np.pi / 4)


@pytest.mark.parametrize("g", [0.4, 1.0])
def test_collinear_first_order_is_flat(g):
    scan = heisenberg_fringe(PAIR, Geometry.COLLINEAR, GainParams(g), 1, GRID)
    np.testing.assert_allclose(scan.values, 3 * GainParams(g).nbar + 1, rtol=1e-12)


def test_collinear_second_order_fringe_at_unit_gain():
    gain = GainParams(1.0)
    scan = heisenberg_fringe(PAIR, Geometry.COLLINEAR, gain, 2, GRID)
    ref = [eval_formula(FormulaId.COLL_G2, g=1.0, theta=t) for t in GRID]
    np.testing.assert_allclose(scan.values, ref, rtol=1e-12)


def test_collinear_spontaneous_second_order_fringe():
    scan = heisenberg_fringe(COLL_VAC, Geometry.COLLINEAR, GainParams(0.7), 2, GRID)
    ref = [eval_formula(FormulaId.COLL_SPONT_G2, g=0.7, theta=t) for t in GRID]
    np.testing.assert_allclose(scan.values, ref, rtol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_noncollinear_spontaneous_moments(m):
    gain = GainParams(0.6)
    scan = heisenberg_fringe(vacuum(), Geometry.NONCOLLINEAR, gain, m, GRID)
    np.testing.assert_allclose(scan.values, math.factorial(m) * gain.S ** (2 * m), rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_seed_fringe_full_order(n):
    scan = seed_fringe(NoonSpec(n), n, GRID)
    sign = (-1) ** (n + 1)
    ref = math.factorial(n) / 2**n * (1 + sign * np.cos(n * (GRID + (np.pi if n % 2 else 0) / n)))
    np.testing.assert_allclose(scan.values, ref, atol=1e-12)


def test_two_photon_seed_fringe_values():
    scan = seed_fringe(NoonSpec(2), 2, GRID)
    np.testing.assert_allclose(scan.values, 0.5 * (1 - np.cos(2 * GRID)), atol=1e-14)


@pytest.mark.parametrize("n,m", [(2, 1), (3, 1), (3, 2), (4, 3)])
def test_seed_below_full_order_is_flat(n, m):
    scan = seed_fringe(NoonSpec(n), m, GRID)
    np.testing.assert_allclose(scan.values, math.factorial(n) / (2**m * math.factorial(n - m)), atol=1e-12)


@pytest.mark.parametrize("geometry", list(Geometry))
def test_gram_matches_direct_expansion(geometry):
    gain = GainParams(0.4)
    seed = make_noon(NoonSpec(2))
    if geometry is Geometry.COLLINEAR:
        seed = change_basis(seed, PolBasis.HV)
    state = amplify(seed, geometry, gain, order=3)
    an = Analyzer("rotation" if geometry is Geometry.COLLINEAR else "phase")
    t = theta_grid(24)
    a = fringe_scan(state, 3, an, t, method="gram")
    b = fringe_scan(state, 3, an, t, method="direct")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-11)


@pytest.mark.parametrize("kind", ["rotation", "phase", "fixed"])
def test_analyzer_independent_of_state_basis(kind):
    state = amplify(PAIR, Geometry.COLLINEAR, GainParams(0.3), order=2)
    t = theta_grid(16)
    a = fringe_scan(state, 2, Analyzer(kind), t)
    b = fringe_scan(change_basis(state, PolBasis.PM), 2, Analyzer(kind), t)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-10)


def test_fixed_analyzer_is_flat():
    scan = heisenberg_fringe(PAIR, Geometry.COLLINEAR, GainParams(0.5), 2, GRID, Analyzer("fixed"))
    assert np.ptp(scan.values) < 1e-12 * scan.values.max()


def test_schrodinger_and_heisenberg_agree():
    gain = GainParams(0.5)
    seed = make_noon(NoonSpec(3))
    state = noncollinear_amplify(seed, gain, order=3)
    a = fringe_scan(state, 3, Analyzer("phase"), GRID)
    b = heisenberg_fringe(seed, Geometry.NONCOLLINEAR, gain, 3, GRID)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_noncollinear_fringe_period(n):
    t = theta_grid(36)
    scan = heisenberg_fringe(make_noon(NoonSpec(n)), Geometry.NONCOLLINEAR, GainParams(0.5), 3, t)
    np.testing.assert_allclose(np.roll(scan.values, 36 // n), scan.values, rtol=1e-12)


@given(st.integers(1, 3), st.integers(0, 2), st.floats(0.1, 1.0))
def test_noncollinear_fringe_has_single_harmonic(n, extra, g):
    m = n + extra
    t = theta_grid(48)
    scan = heisenberg_fringe(make_noon(NoonSpec(n)), Geometry.NONCOLLINEAR, GainParams(g), m, t)
    rep = visibility(scan)
    peak = rep.harmonic_amplitudes[0]
    stray = [a for k, a in rep.harmonic_amplitudes.items() if k not in (0, n)]
    assert max(stray) < 1e-10 * peak
    assert rep.harmonic_amplitudes[n] > 1e-6 * peak


@pytest.mark.parametrize("n,m", [(2, 1), (3, 1), (3, 2), (4, 3)])
def test_no_fringe_below_photon_number(n, m):
    scan = heisenberg_fringe(make_noon(NoonSpec(n)), Geometry.NONCOLLINEAR, GainParams(0.7), m, GRID)
    assert np.ptp(scan.values) < 1e-12 * scan.values.max()
    assert visibility(scan).V < 1e-12


def test_high_gain_visibility_tends_to_one_fifth():
    gain = GainParams.from_nbar(1e4)
    scan = heisenberg_fringe(PAIR, Geometry.COLLINEAR, gain, 2, GRID)
    assert visibility(scan).V == pytest.approx(0.2, abs=1e-3)


def test_visibility_uses_global_extrema():
    scan = FringeScan(2, GRID, 3 + np.cos(2 * GRID))
    rep = visibility(scan)
    assert rep.V == pytest.approx(1 / 3)
    assert rep.cosine[2] == pytest.approx(1.0)
    assert rep.harmonic_amplitudes[1] == pytest.approx(0.0, abs=1e-14)


def test_flat_scan_has_zero_visibility():
    assert visibility(FringeScan(1, GRID, np.full_like(GRID, 2.5))).V == 0


def test_vanishing_scan_has_undefined_visibility():
    with pytest.raises(UndefinedVisibilityError):
        visibility(FringeScan(2, GRID, np.zeros_like(GRID)))


def test_fourier_fit_on_irregular_grid():
    rng = np.random.default_rng(3)
    t = np.sort(rng.uniform(0, 2 * np.pi, 40))
    v = 2 + 0.5 * np.cos(t) - 0.25 * np.sin(3 * t)
    cos, sin = fourier_coefficients(t, v, 3)
    assert cos[0] == pytest.approx(2)
    assert cos[1] == pytest.approx(0.5)
    assert sin[3] == pytest.approx(-0.25)


def test_scan_validation():
    with pytest.raises(ValueError):
        FringeScan(1, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        FringeScan(1, np.array([0.0, 7.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        FringeScan(1, np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_order_limits():
    with pytest.raises(ValueError):
        heisenberg_fringe(PAIR, Geometry.COLLINEAR, GainParams(0.5), 7, GRID)
    scan = heisenberg_fringe(PAIR, Geometry.COLLINEAR, GainParams(0.5), 7, theta_grid(32), max_order=7)
    assert scan.values.min() > 0
    with pytest.raises(ValueError):
        fringe_scan(PAIR, 0)


def test_truncated_state_rejected():
    state = amplify(PAIR, Geometry.COLLINEAR, GainParams(1.0), cutoff=10, leak_budget=None)
    with pytest.raises(LeakageError):
        fringe_scan(state, 2, Analyzer("rotation"), GRID)


def test_stimulated_to_spontaneous_ratio_at_gain_two():
    n = GainParams(2.0).nbar
    # peak of the seeded fringe over peak of the vacuum fringe
    derived = (21 * n**2 + 15 * n + 1) / (3 * n**2 + n)
    ratio = stimulated_vs_spontaneous_ratio(GainParams(2.0), GRID)
    assert ratio == pytest.approx(derived, rel=1e-12)
    assert ratio == pytest.approx(7.199593498121832, rel=1e-12)


def test_ratio_diverges_without_gain():
    with pytest.raises(DivergentRatioError):
        stimulated_vs_spontaneous_ratio(GainParams(0.0), GRID)
