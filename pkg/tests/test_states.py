import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noonamp.fock import H1, M1, P1, V1, PolBasis, PureState, fidelity, inner_product
from noonamp.states import (
    NoonSpec,
    PhaseShift,
    RelativeSign,
    apply_phase_shift,
    basis_change_sector,
    change_basis,
    make_noon,
)

SQ2 = math.sqrt(2)


def sector_by_expansion(n: int) -> np.ndarray:
    """Expand (b1+b2)^h (b1-b2)^(n-h) / 2^(n/2) as a polynomial in x = b2/b1."""
    T = np.zeros((n + 1, n + 1))
    P = np.polynomial.polynomial
    for h in range(n + 1):
        poly = P.polymul(P.polypow([1, 1], h), P.polypow([1, -1], n - h)) / 2 ** (n / 2)
        poly = np.pad(poly, (0, n + 1 - len(poly)))
        for p in range(n + 1):
            norm = math.sqrt(math.factorial(p) * math.factorial(n - p) / (math.factorial(h) * math.factorial(n - h)))
            T[p, h] = poly[n - p] * norm
    return T


def test_two_photon_noon_is_one_h_one_v():
    hv = change_basis(make_noon(NoonSpec(2)), PolBasis.HV)
    assert hv.n_terms == 1
    assert hv.amplitude({H1: 1, V1: 1}) == pytest.approx(1.0, abs=1e-14)


def test_single_photon_noon_with_quarter_phase():
    hv = change_basis(make_noon(NoonSpec(1, math.pi / 2)), PolBasis.HV)
    # (|+> - i|->)/√2 = ((1-i)|H> + (1+i)|V>)/2
    assert hv.amplitude({H1: 1, V1: 0}) == pytest.approx((1 - 1j) / 2)
    assert hv.amplitude({H1: 0, V1: 1}) == pytest.approx((1 + 1j) / 2)


def test_three_photon_noon_with_third_turn_phase():
    noon = make_noon(NoonSpec(3, math.pi / 3))
    assert noon.amplitude({P1: 3, M1: 0}) == pytest.approx(1 / SQ2)
    assert noon.amplitude({P1: 0, M1: 3}) == pytest.approx(1 / SQ2)


def test_single_photon_h_in_diagonal_basis():
    pm = change_basis(PureState.basis_ket({H1: 1, V1: 0}, 1), PolBasis.PM)
    assert pm.amplitude({P1: 1, M1: 0}) == pytest.approx(1 / SQ2)
    assert pm.amplitude({P1: 0, M1: 1}) == pytest.approx(1 / SQ2)


def test_vacuum_maps_to_vacuum():
    pm = change_basis(PureState.vacuum((H1, V1), 0), PolBasis.PM)
    assert pm.amplitude({P1: 0, M1: 0}) == pytest.approx(1.0)


def test_relative_sign_option():
    plus = make_noon(NoonSpec(2, relative_sign=RelativeSign.PLUS))
    assert plus.amplitude({P1: 0, M1: 2}) == pytest.approx(1 / SQ2)


def test_noon_spec_validation():
    with pytest.raises(ValueError):
        NoonSpec(0)
    with pytest.raises(ValueError):
        make_noon(NoonSpec(4), cutoff=3)


@pytest.mark.parametrize("n", range(0, 9))
def test_sector_matches_polynomial_expansion(n):
    np.testing.assert_allclose(basis_change_sector(n), sector_by_expansion(n), atol=1e-12)


@pytest.mark.parametrize("n", range(0, 9))
def test_sector_is_orthogonal_involution(n):
    T = basis_change_sector(n)
    np.testing.assert_allclose(T @ T.T, np.eye(n + 1), atol=1e-12)
    np.testing.assert_allclose(T @ T, np.eye(n + 1), atol=1e-12)


def random_state(seed: int, cutoff: int = 4) -> PureState:
    rng = np.random.default_rng(seed)
    occ = rng.integers(0, cutoff + 1, size=(6, 2))
    amp = rng.normal(size=6) + 1j * rng.normal(size=6)
    return PureState.from_arrays((H1, V1), occ, amp, cutoff).normalized()


@given(st.integers(0, 2**32 - 1))
def test_round_trip_and_unitarity(seed):
    psi = random_state(seed)
    pm = change_basis(psi, PolBasis.PM)
    assert pm.norm_squared() == pytest.approx(psi.norm_squared(), abs=1e-12)
    back = change_basis(pm, PolBasis.HV)
    assert fidelity(back, psi) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_photon_number_distribution_preserved(seed):
    psi = random_state(seed)
    pm = change_basis(psi, PolBasis.PM)

    def distribution(s):
        tot = s.occupations.sum(axis=1)
        w = np.abs(s.amplitudes) ** 2
        return np.bincount(tot, weights=w, minlength=20)[:20]

    np.testing.assert_allclose(distribution(pm), distribution(psi), atol=1e-12)


def test_basis_change_grows_cutoff():
    psi = PureState.basis_ket({H1: 3, V1: 3}, 3)
    pm = change_basis(psi, PolBasis.PM)
    assert pm.cutoff == 6
    assert pm.norm_squared() == pytest.approx(1.0)


def test_zero_phase_shift_is_identity():
    noon = make_noon(NoonSpec(3, 0.7))
    assert fidelity(apply_phase_shift(noon, PhaseShift(0.0)), noon) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_phase_shift_sets_noon_phase(n):
    shifted = apply_phase_shift(make_noon(NoonSpec(n)), PhaseShift(0.9))
    assert inner_product(make_noon(NoonSpec(n, 0.9)), shifted) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_full_period_shift_restores_noon(n):
    noon = make_noon(NoonSpec(n))
    assert fidelity(apply_phase_shift(noon, PhaseShift(2 * math.pi / n)), noon) == pytest.approx(1.0)


def test_phase_shift_keeps_hv_basis():
    psi = PureState.basis_ket({H1: 1, V1: 1}, 2)
    out = apply_phase_shift(psi, PhaseShift(0.3))
    assert out.basis is PolBasis.HV
    assert out.norm_squared() == pytest.approx(1.0)
