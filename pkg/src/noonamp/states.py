"""Input states, polarization basis change and phase shifts.

Basis convention: ``a†_± = (a†_H ± a†_V)/√2``.  With it the two-photon
NOON state ``(|2+> - |2->)/√2`` equals ``|1H;1V>`` exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .fock import (
    BASIS_PAIRS,
    FockBasisState,
    ModeLabel,
    PolBasis,
    Polarization,
    PureState,
    Spatial,
    _merge,
    mode_pair,
)


class RelativeSign(enum.Enum):
    MINUS = -1
    PLUS = 1


@dataclass(frozen=True)
class NoonSpec:
    """``(|N+> + sign e^{iNφ} |N->)/√2`` on one spatial mode."""

    n: int
    phase: float = 0.0
    spatial: Spatial = Spatial.K1
    relative_sign: RelativeSign = RelativeSign.MINUS

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"NOON photon number must be a positive integer, got {self.n}")


@dataclass(frozen=True)
class PhaseShift:
    """Phase ``e^{iθ n_-}`` on the minus-polarized mode of one spatial mode."""

    theta: float
    spatial: Spatial = Spatial.K1


def make_noon(spec: NoonSpec, cutoff: int | None = None) -> PureState:
    cutoff = spec.n if cutoff is None else cutoff
    if spec.n > cutoff:
        raise ValueError(f"NOON photon number {spec.n} exceeds cutoff {cutoff}")
    plus, minus = mode_pair(spec.spatial, PolBasis.PM)
    rel = spec.relative_sign.value * np.exp(1j * spec.n * spec.phase)
    terms = {
        FockBasisState.of({plus: spec.n, minus: 0}): 1 / np.sqrt(2),
        FockBasisState.of({plus: 0, minus: spec.n}): rel / np.sqrt(2),
    }
    return PureState.from_terms(terms, cutoff)


def vacuum(spatials=(Spatial.K1,), basis: PolBasis = PolBasis.PM, cutoff: int = 0) -> PureState:
    modes = [m for s in spatials for m in mode_pair(s, basis)]
    return PureState.vacuum(modes, cutoff)


@lru_cache(maxsize=None)
def _rotation_sector(n: int) -> np.ndarray:
    """n-photon block of the mode rotation by π/4, basis |p, n-p>, p = 0..n."""
    p = np.arange(n)
    hop = np.sqrt((p + 1.0) * (n - p))
    gen = np.zeros((n + 1, n + 1))
    # b†_2 b_1 raises the second count, b†_1 b_2 the first
    gen[p + 1, p] = -np.pi / 4 * hop
    gen[p, p + 1] = np.pi / 4 * hop
    block = expm(gen) if n else np.ones((1, 1))
    block.setflags(write=False)
    return block


@lru_cache(maxsize=None)
def basis_change_sector(n: int) -> np.ndarray:
    """Matrix T with ``|h, n-h>_old -> sum_p T[p, h] |p, n-p>_new``.

    The map a†_1 -> (a†_1 + a†_2)/√2, a†_2 -> (a†_1 - a†_2)/√2 is an
    involution, so the same block serves both directions.
    """
    rot = _rotation_sector(n)
    # mode map = rotation(π/4) · diag(1, -1); the sign acts on the second count
    sign = (-1.0) ** (n - np.arange(n + 1))
    block = rot * sign[None, :]
    block.setflags(write=False)
    return block


def change_basis(state: PureState, target: PolBasis) -> PureState:
    """Re-expand ``state`` in the target polarization basis (HV <-> ±).

    The map is exact.  The cutoff is raised to the largest single-mode count
    produced, at most twice the old cutoff.
    """
    if state.basis is target:
        return state
    source = state.basis
    spatials = sorted({m.spatial for m in state.modes}, key=lambda s: s.rank)
    full = state.embed([m for s in spatials for m in mode_pair(s, source)])
    occ, amp = full.occupations, full.amplitudes
    src_modes = full.modes
    for s in spatials:
        i1, i2 = (src_modes.index(m) for m in mode_pair(s, source))
        counts = occ[:, i1] + occ[:, i2]
        new_occ, new_amp = [], []
        for n in np.unique(counts):
            rows = np.nonzero(counts == n)[0]
            block = basis_change_sector(int(n))
            coeff = block[:, occ[rows, i1]].T * amp[rows, None]  # (rows, n+1)
            base = np.repeat(occ[rows], n + 1, axis=0)
            p = np.tile(np.arange(n + 1), len(rows))
            base[:, i1] = p
            base[:, i2] = n - p
            new_occ.append(base)
            new_amp.append(coeff.reshape(-1))
        occ, amp = _merge(np.vstack(new_occ), np.concatenate(new_amp), 2 * full.cutoff + 1)
    pol_map = dict(zip(BASIS_PAIRS[source], BASIS_PAIRS[target]))
    new_modes = [ModeLabel(m.spatial, pol_map[m.polarization]) for m in src_modes]
    # pair order is preserved (H->+, V->-), so columns keep their positions.
    # A pair holding n photons may put all n in one mode, so the cutoff grows.
    cutoff = max(full.cutoff, int(occ.max(initial=0)))
    return PureState(tuple(new_modes), occ, amp, cutoff, full.leakage)


def apply_phase_shift(state: PureState, shift: PhaseShift) -> PureState:
    """Multiply each ket by ``e^{iθ m}``, m the minus-mode occupation."""
    source = state.basis
    work = change_basis(state, PolBasis.PM)
    minus = ModeLabel(shift.spatial, Polarization.MINUS)
    if minus not in work.modes:
        return state
    phases = np.exp(1j * shift.theta * work.column(minus))
    shifted = PureState(work.modes, work.occupations, work.amplitudes * phases, work.cutoff, work.leakage)
    return change_basis(shifted, source)
