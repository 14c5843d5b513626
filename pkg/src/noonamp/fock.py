"""Sparse multi-mode bosonic Fock space.

A :class:`PureState` stores its nonzero terms as an integer occupation table
(one row per basis ket, one column per mode) next to a complex amplitude
vector.  All operations are vectorized over rows; duplicate kets produced by
linear combinations are merged by integer key.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BasisMismatchError

PRUNE_RELATIVE = 1e-15
HERMITIAN_RTOL = 1e-10


class Spatial(enum.Enum):
    """Spatial modes.  ``B1``/``B2`` are the vacuum ports of loss beam splitters."""

    K1 = "1"
    K2 = "2"
    B1 = "b1"
    B2 = "b2"

    @property
    def rank(self) -> int:
        return _SPATIAL_ORDER.index(self)


_SPATIAL_ORDER = [Spatial.K1, Spatial.K2, Spatial.B1, Spatial.B2]


class PolBasis(enum.Enum):
    HV = "HV"
    PM = "+-"


class Polarization(enum.Enum):
    H = "H"
    V = "V"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> PolBasis:
        return PolBasis.HV if self in (Polarization.H, Polarization.V) else PolBasis.PM

    @property
    def rank(self) -> int:
        return _POL_ORDER.index(self)


_POL_ORDER = [Polarization.H, Polarization.V, Polarization.PLUS, Polarization.MINUS]
BASIS_PAIRS = {
    PolBasis.HV: (Polarization.H, Polarization.V),
    PolBasis.PM: (Polarization.PLUS, Polarization.MINUS),
}


@dataclass(frozen=True)
class ModeLabel:
    spatial: Spatial
    polarization: Polarization

    @property
    def basis(self) -> PolBasis:
        return self.polarization.basis

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.spatial.rank, self.polarization.rank)

    def __str__(self) -> str:
        return f"{self.spatial.value}{self.polarization.value}"

    def __repr__(self) -> str:
        return f"ModeLabel({self})"


H1 = ModeLabel(Spatial.K1, Polarization.H)
V1 = ModeLabel(Spatial.K1, Polarization.V)
P1 = ModeLabel(Spatial.K1, Polarization.PLUS)
M1 = ModeLabel(Spatial.K1, Polarization.MINUS)
H2 = ModeLabel(Spatial.K2, Polarization.H)
V2 = ModeLabel(Spatial.K2, Polarization.V)
P2 = ModeLabel(Spatial.K2, Polarization.PLUS)
M2 = ModeLabel(Spatial.K2, Polarization.MINUS)


def mode_pair(spatial: Spatial, basis: PolBasis) -> tuple[ModeLabel, ModeLabel]:
    first, second = BASIS_PAIRS[basis]
    return ModeLabel(spatial, first), ModeLabel(spatial, second)


def canonical_modes(modes: Iterable[ModeLabel]) -> tuple[ModeLabel, ...]:
    """Sort and deduplicate, rejecting a mixture of polarization bases."""
    out = tuple(sorted(set(modes), key=lambda m: m.sort_key))
    if len({m.basis for m in out}) > 1:
        raise BasisMismatchError(f"modes mix polarization bases: {[str(m) for m in out]}")
    return out


@dataclass(frozen=True)
class FockBasisState:
    """Occupation-number ket, canonically ordered by mode."""

    occupations: tuple[tuple[ModeLabel, int], ...]

    def __post_init__(self):
        modes = [m for m, _ in self.occupations]
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate mode in basis state")
        if any(n < 0 for _, n in self.occupations):
            raise ValueError("photon counts must be nonnegative")
        ordered = tuple(sorted(self.occupations, key=lambda t: t[0].sort_key))
        canonical_modes(modes)
        object.__setattr__(self, "occupations", ordered)

    @classmethod
    def of(cls, counts: Mapping[ModeLabel, int]) -> FockBasisState:
        return cls(tuple(counts.items()))

    def count(self, mode: ModeLabel) -> int:
        for m, n in self.occupations:
            if m == mode:
                return n
        return 0

    @property
    def total(self) -> int:
        return sum(n for _, n in self.occupations)

    def __str__(self) -> str:
        return "|" + ",".join(f"{n}{m}" for m, n in self.occupations) + ">"


class LadderKind(enum.Enum):
    CREATE = "create"
    ANNIHILATE = "annihilate"


@dataclass(frozen=True)
class LadderOp:
    kind: LadderKind
    mode: ModeLabel
    power: int = 1

    def __post_init__(self):
        if self.power < 1:
            raise ValueError("ladder power must be a positive integer")

    @classmethod
    def create(cls, mode: ModeLabel, power: int = 1) -> LadderOp:
        return cls(LadderKind.CREATE, mode, power)

    @classmethod
    def annihilate(cls, mode: ModeLabel, power: int = 1) -> LadderOp:
        return cls(LadderKind.ANNIHILATE, mode, power)

    def adjoint(self) -> LadderOp:
        kind = LadderKind.ANNIHILATE if self.kind is LadderKind.CREATE else LadderKind.CREATE
        return LadderOp(kind, self.mode, self.power)


def _encode(occ: np.ndarray, base: int) -> np.ndarray:
    m = occ.shape[1]
    if m and float(base) ** m >= 2.0**62:
        raise OverflowError(f"{m} modes with cutoff {base - 1} exceed the 62-bit key space")
    weights = base ** np.arange(m - 1, -1, -1, dtype=np.int64)
    return occ @ weights


def _merge(occ: np.ndarray, amp: np.ndarray, base: int, prune: float = PRUNE_RELATIVE):
    """Sum amplitudes of identical kets and drop negligible ones."""
    if len(amp) == 0:
        return occ, amp
    keys = _encode(occ, base)
    uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    re = np.bincount(inv, weights=amp.real, minlength=len(uniq))
    im = np.bincount(inv, weights=amp.imag, minlength=len(uniq))
    summed = re + 1j * im
    occ = occ[first]
    return _prune(occ, summed, prune)


def _prune(occ: np.ndarray, amp: np.ndarray, prune: float = PRUNE_RELATIVE):
    if len(amp) == 0:
        return occ, amp
    mags = np.abs(amp)
    peak = mags.max()
    keep = mags > prune * peak if peak > 0 else np.zeros(len(amp), dtype=bool)
    return occ[keep], amp[keep]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Sparse ket over ``modes`` with a single per-mode photon cutoff.

    ``leakage`` records the probability weight discarded by truncation so far.
    """

    modes: tuple[ModeLabel, ...]
    occupations: np.ndarray
    amplitudes: np.ndarray
    cutoff: int
    leakage: float = 0.0
    _keys: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        modes = tuple(self.modes)
        if canonical_modes(modes) != modes:
            raise ValueError("modes must be canonically ordered and unique")
        occ = np.asarray(self.occupations, dtype=np.int64).reshape(-1, len(modes))
        amp = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if occ.shape[0] != amp.shape[0]:
            raise ValueError("occupation table and amplitude vector differ in length")
        if occ.size and (occ.min() < 0 or occ.max() > self.cutoff):
            raise ValueError(f"photon counts must lie in [0, {self.cutoff}]")
        if self.leakage < 0:
            raise ValueError("leakage must be nonnegative")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "occupations", _frozen(occ))
        object.__setattr__(self, "amplitudes", _frozen(amp))

    # construction -------------------------------------------------------

    @classmethod
    def from_arrays(cls, modes, occupations, amplitudes, cutoff, leakage=0.0, merge=True):
        occ = np.asarray(occupations, dtype=np.int64).reshape(-1, len(modes))
        amp = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        if merge:
            occ, amp = _merge(occ, amp, cutoff + 1)
        return cls(tuple(modes), occ, amp, cutoff, leakage)

    @classmethod
    def from_terms(
        cls,
        terms: Mapping[FockBasisState, complex],
        cutoff: int,
        modes: Iterable[ModeLabel] | None = None,
    ) -> PureState:
        all_modes = set(modes or ())
        for ket in terms:
            all_modes.update(m for m, _ in ket.occupations)
        mode_tuple = canonical_modes(all_modes)
        occ = np.array(
            [[ket.count(m) for m in mode_tuple] for ket in terms], dtype=np.int64
        ).reshape(-1, len(mode_tuple))
        if occ.size and occ.max() > cutoff:
            raise ValueError(f"basis state exceeds cutoff {cutoff}")
        return cls.from_arrays(mode_tuple, occ, list(terms.values()), cutoff)

    @classmethod
    def basis_ket(cls, counts: Mapping[ModeLabel, int], cutoff: int) -> PureState:
        return cls.from_terms({FockBasisState.of(counts): 1.0}, cutoff)

    @classmethod
    def vacuum(cls, modes: Iterable[ModeLabel], cutoff: int) -> PureState:
        modes = canonical_modes(modes)
        return cls(modes, np.zeros((1, len(modes)), dtype=np.int64), np.ones(1), cutoff)

    @classmethod
    def zero(cls, modes: Iterable[ModeLabel], cutoff: int, leakage: float = 0.0) -> PureState:
        modes = canonical_modes(modes)
        return cls(modes, np.zeros((0, len(modes)), dtype=np.int64), np.zeros(0), cutoff, leakage)

    # inspection -----------------------------------------------------------

    @property
    def basis(self) -> PolBasis:
        return self.modes[0].basis

    @property
    def n_terms(self) -> int:
        return len(self.amplitudes)

    @property
    def is_zero(self) -> bool:
        return self.n_terms == 0

    @property
    def keys(self) -> np.ndarray:
        if self._keys is None:
            object.__setattr__(self, "_keys", _encode(self.occupations, self.cutoff + 1))
        return self._keys

    def mode_index(self, mode: ModeLabel) -> int:
        if mode.basis is not self.basis:
            raise BasisMismatchError(
                f"mode {mode} is in the {mode.basis.value} basis, state is in {self.basis.value}"
            )
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(f"mode {mode} not present in state") from None

    def column(self, mode: ModeLabel) -> np.ndarray:
        return self.occupations[:, self.mode_index(mode)]

    def total_photons(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def terms(self) -> Iterator[tuple[FockBasisState, complex]]:
        for row, amp in zip(self.occupations, self.amplitudes):
            yield FockBasisState(tuple(zip(self.modes, (int(x) for x in row)))), complex(amp)

    def amplitude(self, ket: FockBasisState | Mapping[ModeLabel, int]) -> complex:
        if not isinstance(ket, FockBasisState):
            ket = FockBasisState.of(ket)
        for m, n in ket.occupations:
            if n and m not in self.modes:
                return 0j
        row = np.array([ket.count(m) for m in self.modes], dtype=np.int64)
        if row.max(initial=0) > self.cutoff:
            return 0j
        key = _encode(row[None, :], self.cutoff + 1)[0]
        hit = np.nonzero(self.keys == key)[0]
        return complex(self.amplitudes[hit[0]]) if len(hit) else 0j

    def to_dict(self) -> dict[FockBasisState, complex]:
        return dict(self.terms())

    # derived states -------------------------------------------------------

    def scaled(self, factor: complex) -> PureState:
        return PureState(self.modes, self.occupations, self.amplitudes * factor, self.cutoff, self.leakage)

    def normalized(self) -> PureState:
        norm = np.sqrt(self.norm_squared())
        if norm == 0:
            raise ValueError("cannot normalize the zero state")
        return self.scaled(1.0 / norm)

    def with_leakage(self, leakage: float) -> PureState:
        return PureState(self.modes, self.occupations, self.amplitudes, self.cutoff, max(0.0, leakage))

    def with_cutoff(self, cutoff: int) -> PureState:
        """Change the cutoff; lowering it drops terms and books their weight as leakage."""
        if cutoff >= self.cutoff or self.is_zero:
            return PureState(self.modes, self.occupations, self.amplitudes, cutoff, self.leakage)
        keep = self.occupations.max(axis=1) <= cutoff
        lost = float(np.sum(np.abs(self.amplitudes[~keep]) ** 2))
        return PureState(
            self.modes, self.occupations[keep], self.amplitudes[keep], cutoff, self.leakage + lost
        )

    def embed(self, modes: Iterable[ModeLabel]) -> PureState:
        """Extend the mode set, the new modes in vacuum."""
        new_modes = canonical_modes(set(self.modes) | set(modes))
        if new_modes == self.modes:
            return self
        occ = np.zeros((self.n_terms, len(new_modes)), dtype=np.int64)
        for j, m in enumerate(self.modes):
            occ[:, new_modes.index(m)] = self.occupations[:, j]
        return PureState(new_modes, occ, self.amplitudes, self.cutoff, self.leakage)

    def permuted(self, rng: np.random.Generator) -> PureState:
        """Same ket with its term rows stored in a random order."""
        perm = rng.permutation(self.n_terms)
        return PureState(
            self.modes, self.occupations[perm], self.amplitudes[perm], self.cutoff, self.leakage
        )

    def __repr__(self) -> str:
        modes = ",".join(str(m) for m in self.modes)
        return f"PureState(modes=[{modes}], terms={self.n_terms}, cutoff={self.cutoff}, leakage={self.leakage:.2e})"


def _log_falling_sqrt(n: np.ndarray, p: int) -> np.ndarray:
    """log sqrt(n!/(n-p)!) for n >= p."""
    return 0.5 * (gammaln(n + 1.0) - gammaln(n - p + 1.0))


def _ladder_arrays(state: PureState, op: LadderOp):
    """Image of a single ladder power as raw arrays plus the weight dropped at the cutoff."""
    try:
        j = state.mode_index(op.mode)
    except KeyError:
        state = state.embed([op.mode])
        j = state.mode_index(op.mode)
    n = state.occupations[:, j]
    p = op.power
    if op.kind is LadderKind.ANNIHILATE:
        keep = n >= p
        occ = state.occupations[keep].copy()
        occ[:, j] -= p
        factor = np.exp(_log_falling_sqrt(n[keep], p))
        return state, occ, state.amplitudes[keep] * factor, 0.0
    new = n + p
    factor = np.exp(_log_falling_sqrt(new, p))
    amp = state.amplitudes * factor
    keep = new <= state.cutoff
    dropped = float(np.sum(np.abs(amp[~keep]) ** 2))
    occ = state.occupations[keep].copy()
    occ[:, j] += p
    return state, occ, amp[keep], dropped


def apply_ladder(state: PureState, op: LadderOp) -> PureState:
    """Apply ``a^p`` or ``(a†)^p``; the result is not renormalized.

    Kets pushed past the cutoff are dropped and their squared weight is added
    to ``leakage``.  Annihilating more photons than present gives zero.
    """
    state, occ, amp, dropped = _ladder_arrays(state, op)
    # a single ladder power maps distinct kets to distinct kets: no merge needed
    return PureState(state.modes, occ, amp, state.cutoff, state.leakage + dropped)


def apply_word(state: PureState, ops: Sequence[LadderOp]) -> PureState:
    """Apply an operator product, rightmost factor first."""
    for op in reversed(ops):
        state = apply_ladder(state, op)
    return state


def apply_linear(state: PureState, terms: Sequence[tuple[complex, LadderOp]]) -> PureState:
    """Apply a linear combination ``sum_k c_k O_k`` of ladder powers and merge duplicate kets."""
    modes_needed = {op.mode for _, op in terms}
    state = state.embed(modes_needed) if not modes_needed <= set(state.modes) else state
    occs, amps = [], []
    dropped = 0.0
    for coef, op in terms:
        if coef == 0:
            continue
        _, occ, amp, lost = _ladder_arrays(state, op)
        occs.append(occ)
        amps.append(amp * coef)
        dropped += abs(coef) ** 2 * lost
    if not occs:
        return PureState.zero(state.modes, state.cutoff, state.leakage)
    occ, amp = _merge(np.vstack(occs), np.concatenate(amps), state.cutoff + 1)
    return PureState(state.modes, occ, amp, state.cutoff, state.leakage + dropped)


def apply_sum(state: PureState, words: Sequence[tuple[complex, Sequence[LadderOp]]]) -> PureState:
    """Apply ``sum_k c_k W_k`` where each ``W_k`` is a product of ladder powers."""
    modes_needed = {op.mode for _, word in words for op in word}
    state = state.embed(modes_needed) if not modes_needed <= set(state.modes) else state
    occs, amps = [], []
    dropped = 0.0
    for coef, word in words:
        if coef == 0:
            continue
        img = state
        lost = 0.0
        for op in reversed(word):
            img, occ, amp, d = _ladder_arrays(img, op)
            lost += d
            img = PureState(img.modes, occ, amp, img.cutoff)
        occs.append(img.occupations)
        amps.append(img.amplitudes * coef)
        dropped += abs(coef) ** 2 * lost
    if not occs:
        return PureState.zero(state.modes, state.cutoff, state.leakage)
    occ, amp = _merge(np.vstack(occs), np.concatenate(amps), state.cutoff + 1)
    return PureState(state.modes, occ, amp, state.cutoff, state.leakage + dropped)


def superpose(terms: Sequence[tuple[complex, PureState]]) -> PureState:
    """Linear combination of states sharing one mode set."""
    modes = canonical_modes(m for _, s in terms for m in s.modes)
    cutoff = max(s.cutoff for _, s in terms)
    states = [(c, s.embed(modes)) for c, s in terms]
    occ = np.vstack([s.occupations for _, s in states])
    amp = np.concatenate([c * s.amplitudes for c, s in states])
    leak = sum(abs(c) ** 2 * s.leakage for c, s in states)
    return PureState.from_arrays(modes, occ, amp, cutoff, leak)


def _aligned(a: PureState, b: PureState) -> tuple[PureState, PureState]:
    if a.basis is not b.basis:
        raise BasisMismatchError(f"states in different bases: {a.basis.value} vs {b.basis.value}")
    if a.modes != b.modes:
        a, b = a.embed(b.modes), b.embed(a.modes)
    return a, b


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.is_zero or b.is_zero:
        return 0j
    a, b = _aligned(a, b)
    base = max(a.cutoff, b.cutoff) + 1
    ka = _encode(a.occupations, base)
    kb = _encode(b.occupations, base)
    order = np.argsort(kb, kind="stable")
    kb_sorted = kb[order]
    pos = np.searchsorted(kb_sorted, ka)
    pos = np.minimum(pos, len(kb_sorted) - 1)
    hit = kb_sorted[pos] == ka
    return complex(np.vdot(a.amplitudes[hit], b.amplitudes[order[pos[hit]]]))


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2 / (<a|a><b|b>)."""
    return abs(inner_product(a, b)) ** 2 / (a.norm_squared() * b.norm_squared())


def _power_totals(ops: Sequence[LadderOp]) -> dict[ModeLabel, int]:
    totals: dict[ModeLabel, int] = {}
    for op in ops:
        totals[op.mode] = totals.get(op.mode, 0) + op.power
    return totals


def normally_ordered_expectation(
    state: PureState,
    creators: Sequence[LadderOp],
    annihilators: Sequence[LadderOp],
) -> complex:
    """<psi| (prod creators)(prod annihilators) |psi>.

    Evaluated as the overlap of ``(prod creators)^† |psi>`` with
    ``(prod annihilators) |psi>``.  When the operator is Hermitian (matching
    per-mode powers) the result is checked to be real.
    """
    if any(op.kind is not LadderKind.CREATE for op in creators):
        raise ValueError("creators must all be creation operators")
    if any(op.kind is not LadderKind.ANNIHILATE for op in annihilators):
        raise ValueError("annihilators must all be annihilation operators")
    if state.is_zero:
        raise ValueError("expectation value of the zero state is undefined")
    for op in list(creators) + list(annihilators):
        _check_basis(state, op.mode)
    right = apply_word(state, annihilators)
    left = apply_word(state, [op.adjoint() for op in reversed(creators)])
    value = inner_product(left, right)
    if _power_totals(creators) == _power_totals(annihilators):
        if abs(value.imag) > HERMITIAN_RTOL * max(abs(value), 1e-300):
            raise AssertionError(f"Hermitian expectation has imaginary part {value.imag:.3e}")
    return value


def _check_basis(state: PureState, mode: ModeLabel) -> None:
    if mode.basis is not state.basis:
        raise BasisMismatchError(
            f"mode {mode} is in the {mode.basis.value} basis, state is in {state.basis.value}"
        )


def number_expectation(state: PureState, mode: ModeLabel) -> float:
    """<n_mode> normalized by <psi|psi>."""
    if mode not in state.modes:
        _check_basis(state, mode)
        return 0.0
    n = state.column(mode)
    w = np.abs(state.amplitudes) ** 2
    return float(np.dot(n, w) / w.sum())
