"""Photon loss modeled as a beam splitter whose reflected port is discarded.

Two equivalent routes are provided.  ``apply_loss_to_seed`` returns the
closed-form mixture for a lossy NOON seed.  ``purify`` keeps the reflected
light in ancilla modes, so every expectation on the transmitted modes is an
expectation on one larger pure state and no density matrix is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .correlators import Analyzer, FringeScan, fringe_scan
from .errors import BasisMismatchError
from .fock import (
    FockBasisState,
    LadderOp,
    ModeLabel,
    PolBasis,
    Polarization,
    PureState,
    Spatial,
    _merge,
    mode_pair,
    normally_ordered_expectation,
)
from .opa import LEAKAGE_BUDGET
from .states import NoonSpec, change_basis, make_noon

ANCILLA = {Spatial.K1: Spatial.B1, Spatial.K2: Spatial.B2}


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittivity must lie in [0, 1], got {eta}")
    return eta


@dataclass(frozen=True)
class LossChannel:
    """Beam splitter of intensity transmittivity ``eta`` on both polarizations of one spatial mode.

    The reflected amplitude carries a factor ``i``:
    ``a† -> √η a† + i√(1-η) b†``.
    """

    eta: float
    spatial: Spatial = Spatial.K1

    def __post_init__(self):
        _check_eta(self.eta)
        if self.spatial not in ANCILLA:
            raise ValueError("loss acts on a signal spatial mode, not on an ancilla")

    def target_modes(self, basis: PolBasis) -> tuple[ModeLabel, ModeLabel]:
        return mode_pair(self.spatial, basis)

    def ancilla(self, mode: ModeLabel) -> ModeLabel:
        return ModeLabel(ANCILLA[mode.spatial], mode.polarization)


@dataclass(frozen=True)
class WeightedMixture:
    components: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise ValueError("mixture weights must be nonnegative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"mixture weights sum to {total}, not 1")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def expectation(self, fn: Callable[[PureState], complex]) -> complex:
        return sum(w * fn(s) for w, s in self.components)


def apply_loss_to_seed(spec: NoonSpec, eta: float) -> WeightedMixture:
    """Mixture left by a lossy channel acting on ``NOON(N, φ)``.

    With probability ``η^N`` every photon survives and the state stays
    coherent.  If ``i < N`` photons survive, the discarded photons reveal
    which polarization arm was occupied, leaving an equal mixture of
    ``|i+,0->`` and ``|0+,i->``.
    """
    eta = _check_eta(eta)
    n = spec.n
    plus, minus = mode_pair(spec.spatial, PolBasis.PM)
    comps = []
    w_noon = eta**n
    if w_noon > 0:
        comps.append((w_noon, make_noon(spec)))
    for i in range(n):
        w = math.comb(n, i) * eta**i * (1 - eta) ** (n - i)
        if w == 0:
            continue
        if i == 0:
            comps.append((w, PureState.vacuum((plus, minus), cutoff=n)))
            continue
        for mode in (plus, minus):
            counts = {plus: 0, minus: 0, mode: i}
            comps.append((w / 2, PureState.from_terms({FockBasisState.of(counts): 1.0}, n)))
    return WeightedMixture(tuple(comps))


def _split_column(occ, amp, col: int, anc: int, t: float, r: complex):
    """Send the photons of column ``col`` through the beam splitter into ``anc``."""
    n = occ[:, col]
    reps = n + 1
    rows = np.repeat(np.arange(len(occ)), reps)
    start = np.repeat(np.cumsum(reps) - reps, reps)
    k = np.arange(len(rows)) - start  # photons reflected
    nn = n[rows]
    new = occ[rows].copy()
    new[:, col] = nn - k
    new[:, anc] = k
    log_binom = 0.5 * (gammaln(nn + 1.0) - gammaln(k + 1.0) - gammaln(nn - k + 1.0))
    coef = np.exp(log_binom) * t ** (nn - k).astype(float) * r ** k.astype(float)
    return new, amp[rows] * coef


def purify(state: PureState, channel: LossChannel) -> PureState:
    """Apply the beam splitter with the reflected light kept in vacuum-initialized ancillas."""
    basis = state.basis
    targets = channel.target_modes(basis)
    ancillas = [channel.ancilla(m) for m in targets]
    if any(a in state.modes for a in ancillas):
        raise BasisMismatchError("ancilla modes are already occupied")
    work = state.embed(list(targets) + ancillas)
    occ, amp = work.occupations.copy(), work.amplitudes.copy()
    t = math.sqrt(channel.eta)
    r = 1j * math.sqrt(1 - channel.eta)
    if channel.eta == 1.0:
        return work
    for m, a in zip(targets, ancillas):
        col, anc = work.mode_index(m), work.mode_index(a)
        occ, amp = _split_column(occ, amp, col, anc, t, r)
    occ, amp = _merge(occ, amp, work.cutoff + 1)
    return PureState(work.modes, occ, amp, work.cutoff, work.leakage)


def lossy_correlation(
    state: PureState,
    channel: LossChannel,
    order: int,
    thetas=None,
    analyzer: Analyzer | None = None,
    method: str = "gram",
    leak_budget: float | None = LEAKAGE_BUDGET,
) -> FringeScan:
    """Fringe of the light transmitted by ``channel``, evaluated on the purified state."""
    analyzer = analyzer or Analyzer("phase", channel.spatial)
    if analyzer.spatial is not channel.spatial:
        raise BasisMismatchError("the loss channel must act on the analyzed spatial mode")
    enlarged = purify(state, channel)
    scan = fringe_scan(enlarged, order, analyzer, thetas, method, leak_budget=leak_budget)
    return FringeScan(scan.order, scan.thetas, scan.values, "lossy", f"eta={channel.eta:g}")


def moment(state: PureState, mode: ModeLabel, order: int) -> float:
    """``<a†^M a^M>`` of one mode, converting the state's basis when needed."""
    if state.basis is not mode.basis:
        state = change_basis(state, mode.basis)
    return normally_ordered_expectation(
        state, [LadderOp.create(mode, order)], [LadderOp.annihilate(mode, order)]
    ).real


def mixture_moment(mixture: WeightedMixture, mode: ModeLabel, order: int) -> float:
    return float(mixture.expectation(lambda s: moment(s, mode, order)).real)


def seed_loss_moment(spec: NoonSpec, eta: float, order: int | None = None) -> float:
    """``<a†_H^M a_H^M>`` of the lossy seed mixture, M defaulting to N."""
    order = spec.n if order is None else order
    h = ModeLabel(spec.spatial, Polarization.H)
    return mixture_moment(apply_loss_to_seed(spec, eta), h, order)
