"""Collinear and non-collinear optical parametric amplification.

Both geometries are described by a real symmetric coupling matrix ``K`` over
their active modes, with pair-creation operator ``K+ = ½ Σ K_ij a†_i a†_j``
and evolution ``U(g) = exp(g (K+ - K-))``.  For the couplings used here
``K² = 1`` on the active modes, which gives

* the disentangled form ``U = e^{Γ K+} C^{-(n_act/2 + Σ n_i)} e^{-Γ K-}``,
* the Heisenberg map ``a_i -> C a_i + S Σ_j K_ij a†_j``.

Three routes produce amplified states: closed-form Fock expansions,
Taylor application of the disentangled factors, and fixed-step RK4
integration of the Schrödinger equation (the independent oracle).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.special import gammaln

from .errors import BasisMismatchError, IntegrationError, LeakageError
from .fock import (
    H1,
    M1,
    M2,
    P1,
    P2,
    V1,
    LadderOp,
    ModeLabel,
    PolBasis,
    PureState,
    Spatial,
    _encode,
    _merge,
    _prune,
    apply_sum,
    canonical_modes,
    mode_pair,
)
from .states import change_basis

LEAKAGE_BUDGET = 1e-8
TAYLOR_TOL = 1e-16
MAX_CUTOFF = 300


@dataclass(frozen=True)
class GainParams:
    """Nonlinear gain ``g`` and its hyperbolic functions."""

    g: float

    def __post_init__(self):
        if not np.isfinite(self.g) or self.g < 0:
            raise ValueError(f"gain must be finite and nonnegative, got {self.g}")

    @classmethod
    def from_nbar(cls, nbar: float) -> GainParams:
        if nbar < 0:
            raise ValueError("mean pair number must be nonnegative")
        return cls(float(np.arcsinh(np.sqrt(nbar))))

    @property
    def C(self) -> float:
        return math.cosh(self.g)

    @property
    def S(self) -> float:
        return math.sinh(self.g)

    @property
    def Gamma(self) -> float:
        return math.tanh(self.g)

    @property
    def nbar(self) -> float:
        return math.sinh(self.g) ** 2


class Geometry(enum.Enum):
    COLLINEAR = "collinear"
    NONCOLLINEAR = "noncollinear"

    @property
    def spatials(self) -> tuple[Spatial, ...]:
        return (Spatial.K1,) if self is Geometry.COLLINEAR else (Spatial.K1, Spatial.K2)


# native couplings: collinear a†_1H a†_1V ; non-collinear a†_1+ a†_2- - a†_1- a†_2+
_NATIVE = {
    Geometry.COLLINEAR: (PolBasis.HV, {(H1, V1): 1.0}),
    Geometry.NONCOLLINEAR: (PolBasis.PM, {(P1, M2): 1.0, (M1, P2): -1.0}),
}

_R = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def coupling(geometry: Geometry, basis: PolBasis) -> tuple[tuple[ModeLabel, ...], np.ndarray]:
    """Coupling matrix of ``geometry`` expressed over the modes of ``basis``."""
    native, pairs = _NATIVE[geometry]
    modes = canonical_modes(m for pair in pairs for m in pair)
    idx = {m: i for i, m in enumerate(modes)}
    K = np.zeros((len(modes), len(modes)))
    for (a, b), c in pairs.items():
        K[idx[a], idx[b]] = K[idx[b], idx[a]] = c
    if basis is native:
        return modes, K
    # complete every spatial pair, then a†_old = R a†_new blockwise
    spatials = sorted({m.spatial for m in modes}, key=lambda s: s.rank)
    full_old = [m for s in spatials for m in mode_pair(s, native)]
    full_new = [m for s in spatials for m in mode_pair(s, basis)]
    Kf = np.zeros((len(full_old), len(full_old)))
    for a in modes:
        for b in modes:
            Kf[full_old.index(a), full_old.index(b)] = K[idx[a], idx[b]]
    R = np.kron(np.eye(len(spatials)), _R)
    Kn = R.T @ Kf @ R
    Kn[np.abs(Kn) < 1e-14] = 0.0
    active = [i for i in range(len(full_new)) if np.any(Kn[i])]
    return tuple(full_new[i] for i in active), Kn[np.ix_(active, active)]


def _pair_words(modes, K, raising: bool):
    """Words of ``K+`` (raising) or ``K-`` as (coef, [ops]) with ``K± = Σ_{i<=j} w_ij``."""
    make = LadderOp.create if raising else LadderOp.annihilate
    words = []
    for i in range(len(modes)):
        if K[i, i]:
            words.append((0.5 * K[i, i], [make(modes[i], 2)]))
        for j in range(i + 1, len(modes)):
            if K[i, j]:
                words.append((K[i, j], [make(modes[i]), make(modes[j])]))
    return words


def _check_coupling(K: np.ndarray) -> None:
    if not np.allclose(K @ K, np.eye(len(K)), atol=1e-12):
        raise ValueError("coupling matrix must square to the identity on its active modes")


def default_cutoff(
    n_seed: int,
    gain: GainParams,
    order: int = 0,
    tol: float = LEAKAGE_BUDGET,
    cap: int | None = MAX_CUTOFF,
) -> int:
    """Per-mode photon cutoff for a seed of ``n_seed`` photons.

    Baseline ``ceil(N + 10 + 20 n̄)``, raised until a geometric tail
    ``Γ^{2(L-N)} (L+1)^{order+N+2}`` falls below ``tol/100`` so that
    correlation moments up to ``order`` are converged too.
    """
    base = math.ceil(n_seed + 10 + 20 * gain.nbar)
    r = gain.Gamma**2
    L = base
    if r > 0:
        power = order + n_seed + 2
        log_target = math.log(tol * 1e-2)
        while (L - n_seed) * math.log(r) + power * math.log(L + 1) > log_target:
            L += 1
            if L > 10_000:
                break
    return min(L, cap) if cap is not None else L


def _check_leakage(state: PureState, budget: float | None) -> PureState:
    if budget is not None and state.leakage > budget:
        raise LeakageError(state.leakage, budget, state.cutoff)
    return state


# ---------------------------------------------------------------------------
# Taylor application of the disentangled unitary


def _taylor_exp(state: PureState, words, x: float) -> PureState:
    """``exp(x W) |state>`` for a pair operator ``W`` that shifts photon number by ±2.

    Successive orders live in disjoint photon-number sectors, so they are
    concatenated and merged once.
    """
    occs, amps = [state.occupations], [state.amplitudes]
    term = state
    k = 0
    while True:
        k += 1
        term = apply_sum(term, words)
        if term.is_zero:
            break
        term = term.scaled(x / k)
        occs.append(term.occupations)
        amps.append(term.amplitudes)
        if np.sqrt(term.norm_squared()) < TAYLOR_TOL:
            break
    occ, amp = _merge(np.vstack(occs), np.concatenate(amps), state.cutoff + 1)
    return PureState(state.modes, occ, amp, state.cutoff, state.leakage)


def disentangled_evolve(seed: PureState, geometry: Geometry, gain: GainParams, cutoff: int) -> PureState:
    """Apply ``e^{Γ K+} e^{-ln C (n_act/2 + Σ n)} e^{-Γ K-}`` by truncated Taylor series."""
    modes, K = coupling(geometry, seed.basis)
    _check_coupling(K)
    state = seed.embed(modes).with_cutoff(cutoff)
    norm_in = state.norm_squared()
    if gain.g == 0:
        return state
    lowered = _taylor_exp(state, _pair_words(modes, K, raising=False), -gain.Gamma)
    cols = [lowered.modes.index(m) for m in modes]
    exponent = len(modes) / 2 + lowered.occupations[:, cols].sum(axis=1)
    damped = lowered.amplitudes * np.exp(-math.log(gain.C) * exponent)
    mid = PureState(lowered.modes, lowered.occupations, damped, cutoff, lowered.leakage)
    out = _taylor_exp(mid, _pair_words(modes, K, raising=True), gain.Gamma)
    lost = max(0.0, norm_in - out.norm_squared())
    return out.with_leakage(seed.leakage + lost)


def amplify(
    seed: PureState,
    geometry: Geometry,
    gain: GainParams,
    cutoff: int | None = None,
    leak_budget: float | None = LEAKAGE_BUDGET,
    order: int = 0,
) -> PureState:
    """Amplified state of ``seed`` in either geometry (disentangled-unitary engine)."""
    if geometry is Geometry.NONCOLLINEAR:
        return noncollinear_amplify(seed, gain, cutoff, leak_budget, order)
    n_seed = int(seed.total_photons().max(initial=0))
    cutoff = default_cutoff(n_seed, gain, order) if cutoff is None else cutoff
    return _check_leakage(_native_evolve(seed, geometry, gain, cutoff), leak_budget)


def noncollinear_amplify(
    seed: PureState,
    gain: GainParams,
    cutoff: int | None = None,
    leak_budget: float | None = LEAKAGE_BUDGET,
    order: int = 0,
) -> PureState:
    """Non-collinear amplification of a seed injected on k1 (k2 in vacuum)."""
    for j, m in enumerate(seed.modes):
        if m.spatial is not Spatial.K1 and seed.occupations[:, j].any():
            raise ValueError(f"seed must leave mode {m} in vacuum")
    n_seed = int(seed.total_photons().max(initial=0))
    cutoff = default_cutoff(n_seed, gain, order) if cutoff is None else cutoff
    out = _native_evolve(seed, Geometry.NONCOLLINEAR, gain, cutoff)
    return _check_leakage(out, leak_budget)


def _native_evolve(seed: PureState, geometry: Geometry, gain: GainParams, cutoff: int) -> PureState:
    """Evolve in the basis where the pump creates photon pairs in distinct modes.

    In the other basis the collinear coupling puts whole pairs into one mode,
    so a per-mode cutoff there converges only half as fast.  The result is
    returned in the seed's basis.
    """
    native = _NATIVE[geometry][0]
    if seed.basis is native:
        return disentangled_evolve(seed, geometry, gain, cutoff)
    out = disentangled_evolve(change_basis(seed, native), geometry, gain, cutoff)
    return change_basis(out, seed.basis)


# ---------------------------------------------------------------------------
# closed-form expansions


def _finish(modes, occ, amp, cutoff, budget) -> PureState:
    occ, amp = _prune(np.asarray(occ, dtype=np.int64), np.asarray(amp, dtype=complex))
    state = PureState(canonical_modes(modes), occ, amp, cutoff)
    state = state.with_leakage(max(0.0, 1.0 - state.norm_squared()))
    return _check_leakage(state, budget)


def collinear_amplified_2photon(
    gain: GainParams, cutoff: int | None = None, leak_budget: float | None = LEAKAGE_BUDGET
) -> PureState:
    """``(1/C) Σ_n Γ^{n-1} (n/C² - Γ²) |nH; nV>`` truncated at ``cutoff``."""
    cutoff = default_cutoff(2, gain, order=2, cap=None) if cutoff is None else cutoff
    C, G = gain.C, gain.Gamma
    n = np.arange(cutoff + 1)
    if G == 0:
        amp = np.where(n == 1, 1.0, 0.0)
    else:
        amp = G ** (n - 1.0) * (n / C**2 - G**2) / C
    occ = np.stack([n, n], axis=1)
    return _finish((H1, V1), occ, amp, cutoff, leak_budget)


def _log_pow(base: float, k: np.ndarray) -> np.ndarray:
    """k·log(base) with 0·log(0) = 0."""
    if base == 0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(base)


def collinear_amplified_3photon(
    gain: GainParams, cutoff: int | None = None, leak_budget: float | None = LEAKAGE_BUDGET
) -> PureState:
    """Amplified ``(|3+> - |3->)/√2`` from its double-sum Fock expansion (± basis)."""
    cutoff = default_cutoff(3, gain, order=3) if cutoff is None else cutoff
    C, G = gain.C, gain.Gamma
    half = cutoff // 2 + 1
    i, j = np.meshgrid(np.arange(half), np.arange(half), indexing="ij")
    i, j = i.ravel(), j.ravel()
    log_w = _log_pow(G / 2, i) + _log_pow(G / 2, j) - gammaln(i + 1.0) - gammaln(j + 1.0)
    sign_w = (-1.0) ** j

    def lf(k):
        return gammaln(k + 1.0)

    occs, amps = [], []
    pre1 = 1 / (math.sqrt(12) * C**4)
    pre2 = -G * math.sqrt(3) / (2 * C**2)
    blocks = [
        (pre1, 2 * i + 3, 2 * j, 0.5 * (lf(2 * i + 3) + lf(2 * j)), 1.0),
        (pre1, 2 * i, 2 * j + 3, 0.5 * (lf(2 * i) + lf(2 * j + 3)), -1.0),
        (pre2, 2 * i + 1, 2 * j, 0.5 * (lf(2 * i + 1) + lf(2 * j)), 1.0),
        (pre2, 2 * i, 2 * j + 1, 0.5 * (lf(2 * i) + lf(2 * j + 1)), 1.0),
    ]
    for pre, n_plus, n_minus, log_f, sign in blocks:
        keep = (n_plus <= cutoff) & (n_minus <= cutoff)
        amp = pre * sign * sign_w * np.exp(log_w + log_f)
        occs.append(np.stack([n_plus, n_minus], axis=1)[keep])
        amps.append(amp[keep])
    occ, amp = _merge(np.vstack(occs), np.concatenate(amps), cutoff + 1)
    return _finish((P1, M1), occ, amp, cutoff, leak_budget)


def noncollinear_closed_form(
    n_seed: int,
    gain: GainParams,
    cutoff: int | None = None,
    leak_budget: float | None = LEAKAGE_BUDGET,
    reduced_prefactor: bool = False,
) -> PureState:
    """Amplified NOON(N) as an explicit Fock expansion over both spatial modes.

    The normalized prefactor is ``1/(√2 √N! C^{N+2})``.  ``reduced_prefactor=True``
    uses ``C^{N+1}`` instead, which leaves the squared norm at ``C²``; that
    variant skips the leakage check and exists for comparison only.
    """
    N = n_seed
    cutoff = default_cutoff(N, gain, order=N) if cutoff is None else cutoff
    C, G = gain.C, gain.Gamma
    p, m = np.meshgrid(np.arange(cutoff + 1), np.arange(cutoff + 1), indexing="ij")
    p, m = p.ravel(), m.ravel()  # p = n - m
    power = N + (1 if reduced_prefactor else 2)
    log_pre = -0.5 * math.log(2) - 0.5 * gammaln(N + 1.0) - power * math.log(C)
    log_g = _log_pow(G, p + m)
    sign = (-1.0) ** m
    a1 = np.exp(log_pre + log_g + 0.5 * (gammaln(p + N + 1.0) - gammaln(p + 1.0))) * sign
    a2 = -np.exp(log_pre + log_g + 0.5 * (gammaln(m + N + 1.0) - gammaln(m + 1.0))) * sign
    # columns: 1+, 1-, 2+, 2-
    occ1 = np.stack([p + N, m, m, p], axis=1)
    occ2 = np.stack([p, m + N, m, p], axis=1)
    occ = np.vstack([occ1, occ2])
    amp = np.concatenate([a1, a2])
    keep = occ.max(axis=1) <= cutoff
    occ, amp = _merge(occ[keep], amp[keep], cutoff + 1)
    if reduced_prefactor:
        occ, amp = _prune(occ, amp)
        return PureState((P1, M1, P2, M2), occ, amp, cutoff)
    return _finish((P1, M1, P2, M2), occ, amp, cutoff, leak_budget)


def spontaneous_noncollinear(
    gain: GainParams,
    cutoff: int | None = None,
    leak_budget: float | None = LEAKAGE_BUDGET,
    reduced_prefactor: bool = False,
) -> PureState:
    """Non-collinear output for vacuum input.

    Normalized form ``(1/C²) Σ_n Γ^n Σ_m (-1)^m |(n-m)+, m->_1 |m+, (n-m)->_2``.
    ``reduced_prefactor=True`` gives the ``1/C`` prefactor without the
    alternating sign (not normalized, comparison only).
    """
    cutoff = default_cutoff(0, gain, order=4) if cutoff is None else cutoff
    C, G = gain.C, gain.Gamma
    p, m = np.meshgrid(np.arange(cutoff + 1), np.arange(cutoff + 1), indexing="ij")
    p, m = p.ravel(), m.ravel()
    if reduced_prefactor:
        amp = np.exp(_log_pow(G, p + m)) / C
    else:
        amp = np.exp(_log_pow(G, p + m)) * (-1.0) ** m / C**2
    occ = np.stack([p, m, m, p], axis=1)
    if reduced_prefactor:
        occ, amp = _prune(occ, amp.astype(complex))
        return PureState((P1, M1, P2, M2), occ, amp, cutoff)
    return _finish((P1, M1, P2, M2), occ, amp, cutoff, leak_budget)


# ---------------------------------------------------------------------------
# numeric oracle


def _reachable(seed: PureState, modes, K, cutoff: int) -> np.ndarray:
    """Occupation rows reachable from the seed kets under K+ and K- within the cutoff."""
    cols = [seed.modes.index(m) for m in modes]
    shifts = []
    for i in range(len(modes)):
        for j in range(i, len(modes)):
            if K[i, j]:
                s = np.zeros(seed.occupations.shape[1], dtype=np.int64)
                s[cols[i]] += 1
                s[cols[j]] += 1
                shifts.extend([s, -s])
    base = cutoff + 1
    known = seed.occupations.copy()
    known_keys = np.sort(_encode(known, base))
    frontier = known
    while len(frontier):
        cand = np.vstack([frontier + s for s in shifts])
        cand = cand[(cand.min(axis=1) >= 0) & (cand.max(axis=1) <= cutoff)]
        keys = _encode(cand, base)
        keys, first = np.unique(keys, return_index=True)
        cand = cand[first]
        new = ~np.isin(keys, known_keys)
        frontier = cand[new]
        known = np.vstack([known, frontier])
        known_keys = np.sort(np.concatenate([known_keys, keys[new]]))
    return known


def default_steps(gain: GainParams, cutoff: int) -> int:
    return max(64, math.ceil(6 * gain.g * cutoff))


def numeric_evolve(
    seed: PureState,
    geometry: Geometry,
    gain: GainParams,
    cutoff: int | None = None,
    steps: int | None = None,
    drift_bound: float = 1e-9,
) -> PureState:
    """Integrate ``d|ψ>/dτ = (K+ - K-)|ψ>`` from 0 to ``g`` with classical RK4.

    The generator is assembled as a sparse matrix on the photon-number
    sectors reachable from the seed.  Raises :class:`IntegrationError` when the
    squared norm drifts by more than ``drift_bound``.
    """
    modes, K = coupling(geometry, seed.basis)
    _check_coupling(K)
    for m in modes:
        if m.spatial not in geometry.spatials:
            raise BasisMismatchError(f"mode {m} outside the {geometry.value} amplifier")
    n_seed = int(seed.total_photons().max(initial=0))
    cutoff = default_cutoff(n_seed, gain) if cutoff is None else cutoff
    state = seed.embed(modes).with_cutoff(cutoff)
    if gain.g == 0:
        return state
    basis = _reachable(state, modes, K, cutoff)
    base = cutoff + 1
    keys = _encode(basis, base)
    order = np.argsort(keys)
    basis, keys = basis[order], keys[order]
    dim = len(basis)
    cols = [state.modes.index(m) for m in modes]

    rows, cols_idx, vals = [], [], []
    for i in range(len(modes)):
        for j in range(i, len(modes)):
            if not K[i, j]:
                continue
            tgt = basis.copy()
            tgt[:, cols[i]] += 1
            tgt[:, cols[j]] += 1
            if i == j:
                n = basis[:, cols[i]]
                amp = 0.5 * K[i, i] * np.sqrt((n + 1.0) * (n + 2.0))
            else:
                amp = K[i, j] * np.sqrt((basis[:, cols[i]] + 1.0) * (basis[:, cols[j]] + 1.0))
            ok = tgt.max(axis=1) <= cutoff
            tkeys = _encode(tgt[ok], base)
            pos = np.searchsorted(keys, tkeys)
            pos = np.minimum(pos, dim - 1)
            hit = keys[pos] == tkeys
            rows.append(pos[hit])
            cols_idx.append(np.nonzero(ok)[0][hit])
            vals.append(amp[ok][hit])
    Kp = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols_idx))), shape=(dim, dim)
    )
    A = (Kp - Kp.T).tocsr()

    psi = np.zeros(dim, dtype=complex)
    skeys = _encode(state.occupations, base)
    psi[np.searchsorted(keys, skeys)] = state.amplitudes
    norm0 = np.vdot(psi, psi).real
    steps = default_steps(gain, cutoff) if steps is None else steps
    h = gain.g / steps
    for _ in range(steps):
        k1 = A @ psi
        k2 = A @ (psi + 0.5 * h * k1)
        k3 = A @ (psi + 0.5 * h * k2)
        k4 = A @ (psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = abs(np.vdot(psi, psi).real - norm0)
    if drift > drift_bound:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds {drift_bound:.0e} with {steps} steps")
    edge = basis.max(axis=1) >= cutoff
    leak = float(np.sum(np.abs(psi[edge]) ** 2))
    occ, amp = _prune(basis, psi)
    return PureState(state.modes, occ, amp, cutoff, state.leakage + leak)
