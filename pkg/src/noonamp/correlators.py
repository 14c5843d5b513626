"""M-th order correlation fringes, visibilities and harmonic content.

An analyzer is a θ-dependent two-mode combination ``c(θ) = w_0(θ) a_0 + w_1(θ) a_1``.
Because ``a_0`` and ``a_1`` commute,

    c^M |ψ> = Σ_k binom(M,k) w_0^{M-k} w_1^k  a_0^{M-k} a_1^k |ψ>,

so one Gram matrix of the M+1 images ``a_0^{M-k} a_1^k |ψ>`` gives
``G(θ) = <ψ| c†^M c^M |ψ>`` on any θ grid.  The same expansion with the
Heisenberg-evolved operators ``C a + S K a†`` acting on the unamplified
seed is the second backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentRatioError, LeakageError, UndefinedVisibilityError
from .fock import (
    H1,
    V1,
    LadderOp,
    ModeLabel,
    PolBasis,
    Polarization,
    PureState,
    Spatial,
    apply_ladder,
    apply_linear,
    apply_sum,
    inner_product,
    mode_pair,
    normally_ordered_expectation,
)
from .opa import LEAKAGE_BUDGET, GainParams, Geometry, coupling
from .states import NoonSpec, PhaseShift, apply_phase_shift, change_basis, make_noon

DEFAULT_GRID_POINTS = 720
DEFAULT_MAX_ORDER = 6
_R = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def theta_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid over one period [0, 2π)."""
    return 2 * np.pi * np.arange(points) / points


@dataclass(frozen=True)
class Analyzer:
    """Analyzed mode ``c(θ)`` on one spatial mode.

    ``rotation``: ``c† = cos(θ/2) a†_H - sin(θ/2) a†_V`` (polarizer rotated by θ/2).
    ``phase``: ``c† = (a†_+ - e^{iθ} a†_-)/√2`` (phase θ between ±, then projection).
    ``fixed``: ``c = a_H`` for every θ.
    """

    kind: str = "phase"
    spatial: Spatial = Spatial.K1

    def __post_init__(self):
        if self.kind not in ("rotation", "phase", "fixed"):
            raise ValueError(f"unknown analyzer kind {self.kind!r}")

    @property
    def native_basis(self) -> PolBasis:
        return PolBasis.PM if self.kind == "phase" else PolBasis.HV

    def weights(self, thetas: np.ndarray, basis: PolBasis) -> tuple[tuple[ModeLabel, ModeLabel], np.ndarray]:
        """Annihilation-operator weights, shape (len(thetas), 2), in ``basis``."""
        t = np.asarray(thetas, dtype=float)
        if self.kind == "rotation":
            w = np.stack([np.cos(t / 2), -np.sin(t / 2)], axis=1).astype(complex)
        elif self.kind == "phase":
            w = np.stack([np.ones_like(t), -np.exp(-1j * t)], axis=1) / np.sqrt(2)
        else:
            w = np.stack([np.ones_like(t), np.zeros_like(t)], axis=1).astype(complex)
        if basis is not self.native_basis:
            w = w @ _R  # R is symmetric and real
        return mode_pair(self.spatial, basis), w


def default_analyzer(geometry: Geometry) -> Analyzer:
    return Analyzer("rotation") if geometry is Geometry.COLLINEAR else Analyzer("phase")


@dataclass(frozen=True)
class FringeScan:
    order: int
    thetas: np.ndarray
    values: np.ndarray
    geometry: str = ""
    seed: str = ""

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or len(t) == 0:
            raise ValueError("theta grid and values must be equal-length, nonempty 1-D arrays")
        if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= 2 * np.pi:
            raise ValueError("theta grid must be strictly increasing within [0, 2π)")
        scale = max(1.0, float(np.abs(v).max()))
        if v.min() < -1e-9 * scale:
            raise ValueError(f"normally ordered moments must be nonnegative, got {v.min():.3e}")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "values", v)

    def scaled(self, factor: float) -> FringeScan:
        return FringeScan(self.order, self.thetas, self.values * factor, self.geometry, self.seed)


@dataclass(frozen=True)
class VisibilityReport:
    V: float
    max: float
    min: float
    harmonic_amplitudes: dict[int, float] = field(default_factory=dict)
    cosine: dict[int, float] = field(default_factory=dict)
    sine: dict[int, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Gram-matrix machinery


def _images(state: PureState, ops0, ops1, M: int, apply) -> list[PureState]:
    """``O_0^{M-k} O_1^k |state>`` for k = 0..M."""
    out = []
    right = state
    for k in range(M + 1):
        v = right
        for _ in range(M - k):
            v = apply(v, ops0)
        out.append(v)
        if k < M:
            right = apply(right, ops1)
    return out


def _gram(images: list[PureState]) -> np.ndarray:
    n = len(images)
    G = np.zeros((n, n), dtype=complex)
    for k in range(n):
        for l in range(k, n):
            G[k, l] = inner_product(images[k], images[l])
            G[l, k] = np.conj(G[k, l])
    return G


def _expand_weights(W: np.ndarray, M: int) -> np.ndarray:
    k = np.arange(M + 1)
    binom = np.array([math.comb(M, int(x)) for x in k], dtype=float)
    return binom * W[:, :1] ** (M - k) * W[:, 1:] ** k


def _evaluate(gram: np.ndarray, W: np.ndarray, M: int) -> np.ndarray:
    U = _expand_weights(W, M)
    vals = np.einsum("tk,kl,tl->t", U.conj(), gram, U)
    return vals


def _real(vals: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(vals), 1e-300)
    if np.any(np.abs(vals.imag) > 1e-9 * scale + 1e-14):
        raise AssertionError("correlation function has a non-negligible imaginary part")
    return vals.real


def _check_grid(thetas) -> np.ndarray:
    return theta_grid() if thetas is None else np.asarray(thetas, dtype=float)


def fringe_scan(
    state: PureState,
    order: int,
    analyzer: Analyzer | None = None,
    thetas=None,
    method: str = "gram",
    geometry: str = "",
    seed: str = "",
    leak_budget: float | None = LEAKAGE_BUDGET,
) -> FringeScan:
    """``G^(M)(θ) = <ψ| c†(θ)^M c(θ)^M |ψ>`` on an already evolved state.

    ``method="direct"`` applies ``c(θ)`` M times for every θ and takes the
    squared norm; ``"gram"`` uses the binomial expansion described in the
    module docstring.
    """
    if order < 1:
        raise ValueError("correlation order must be >= 1")
    if leak_budget is not None and state.leakage > leak_budget:
        raise LeakageError(state.leakage, leak_budget, state.cutoff)
    analyzer = analyzer or Analyzer("phase")
    thetas = _check_grid(thetas)
    (m0, m1), W = analyzer.weights(thetas, state.basis)
    state = state.embed([m0, m1])
    if method == "direct":
        vals = []
        for w0, w1 in W:
            v = state
            for _ in range(order):
                v = apply_linear(v, [(w0, LadderOp.annihilate(m0)), (w1, LadderOp.annihilate(m1))])
            vals.append(v.norm_squared())
        values = np.array(vals)
    elif method == "gram":
        imgs = _images(state, LadderOp.annihilate(m0), LadderOp.annihilate(m1), order, apply_ladder)
        values = _real(_evaluate(_gram(imgs), W, order))
    else:
        raise ValueError(f"unknown method {method!r}")
    return FringeScan(order, thetas, values, geometry, seed)


def heisenberg_operator(
    mode: ModeLabel, geometry: Geometry, gain: GainParams, basis: PolBasis
) -> list[tuple[complex, list[LadderOp]]]:
    """``a_mode(g) = C a_mode + S Σ_j K_mj a†_j`` as a list of words."""
    modes, K = coupling(geometry, basis)
    words = [(gain.C if mode in modes else 1.0, [LadderOp.annihilate(mode)])]
    if mode in modes:
        i = modes.index(mode)
        for j, other in enumerate(modes):
            if K[i, j]:
                words.append((gain.S * K[i, j], [LadderOp.create(other)]))
    return words


def _ancilla(mode: ModeLabel) -> ModeLabel:
    port = {Spatial.K1: Spatial.B1, Spatial.K2: Spatial.B2}[mode.spatial]
    return ModeLabel(port, mode.polarization)


def heisenberg_fringe(
    seed: PureState,
    geometry: Geometry,
    gain: GainParams,
    order: int,
    thetas=None,
    analyzer: Analyzer | None = None,
    eta: float = 1.0,
    max_order: int = DEFAULT_MAX_ORDER,
    seed_tag: str = "",
) -> FringeScan:
    """``<seed, 0| c†(g)^M c(g)^M |seed, 0>`` with Heisenberg-evolved analyzer operators.

    ``c(g)^M`` is expanded binomially in the two evolved components, and each
    product of evolved ladder operators is applied to the seed (k2 modes in
    vacuum).  No truncation occurs: the cutoff is raised to the seed photon
    number plus M.  With ``eta < 1`` the analyzed mode passes a beam splitter
    whose other input is a vacuum ancilla.
    """
    if order < 1:
        raise ValueError("correlation order must be >= 1")
    if order > max_order:
        raise ValueError(f"order {order} exceeds max_order={max_order}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmittivity must lie in [0, 1]")
    analyzer = analyzer or default_analyzer(geometry)
    thetas = _check_grid(thetas)
    basis = seed.basis
    (m0, m1), W = analyzer.weights(thetas, basis)
    modes, _ = coupling(geometry, basis)
    n_max = int(seed.total_photons().max(initial=0))
    state = seed.embed(list(modes) + [m0, m1]).with_cutoff(n_max + order)
    ops = []
    for m in (m0, m1):
        words = [(np.sqrt(eta) * c, w) for c, w in heisenberg_operator(m, geometry, gain, basis)]
        if eta < 1:
            words.append((-1j * np.sqrt(1 - eta), [LadderOp.annihilate(_ancilla(m))]))
        ops.append(words)
    if eta < 1:
        state = state.embed([_ancilla(m0), _ancilla(m1)])
    imgs = _images(state, ops[0], ops[1], order, apply_sum)
    values = _real(_evaluate(_gram(imgs), W, order))
    return FringeScan(order, thetas, values, geometry.value, seed_tag)


def seed_fringe(spec: NoonSpec, order: int, phis=None) -> FringeScan:
    """``<ψ_φ| a†_H^M a_H^M |ψ_φ>`` of a NOON seed, scanned over the seed phase φ."""
    phis = _check_grid(phis)
    base = make_noon(NoonSpec(spec.n, 0.0, spec.spatial, spec.relative_sign))
    H = ModeLabel(spec.spatial, Polarization.H)
    vals = []
    for phi in phis:
        psi = change_basis(apply_phase_shift(base, PhaseShift(phi, spec.spatial)), PolBasis.HV)
        vals.append(
            normally_ordered_expectation(
                psi, [LadderOp.create(H, order)], [LadderOp.annihilate(H, order)]
            ).real
        )
    return FringeScan(order, phis, np.array(vals), "seed", f"NOON({spec.n})")


# ---------------------------------------------------------------------------
# visibility and harmonics


def _is_uniform_period(t: np.ndarray) -> bool:
    K = len(t)
    return K >= 2 and np.allclose(t, 2 * np.pi * np.arange(K) / K, atol=1e-12)


def fourier_coefficients(thetas, values, max_harmonic: int | None = None):
    """Cosine and sine coefficients ``f(θ) = a_0 + Σ a_k cos kθ + b_k sin kθ``.

    Uses the DFT on a uniform full-period grid, otherwise a least-squares fit
    up to ``max_harmonic``.
    """
    t = np.asarray(thetas, dtype=float)
    v = np.asarray(values, dtype=float)
    K = len(t)
    if _is_uniform_period(t):
        F = np.fft.rfft(v) / K
        top = len(F) - 1 if max_harmonic is None else min(max_harmonic, len(F) - 1)
        cos = {0: float(F[0].real)}
        sin = {0: 0.0}
        for k in range(1, top + 1):
            factor = 1.0 if (K % 2 == 0 and k == K // 2) else 2.0
            cos[k] = float(factor * F[k].real)
            sin[k] = float(-factor * F[k].imag)
        return cos, sin
    top = max_harmonic if max_harmonic is not None else (K - 1) // 2
    cols = [np.ones(K)]
    for k in range(1, top + 1):
        cols += [np.cos(k * t), np.sin(k * t)]
    coef, *_ = np.linalg.lstsq(np.stack(cols, axis=1), v, rcond=None)
    cos = {0: float(coef[0])}
    sin = {0: 0.0}
    for k in range(1, top + 1):
        cos[k] = float(coef[2 * k - 1])
        sin[k] = float(coef[2 * k])
    return cos, sin


def visibility(scan: FringeScan, max_harmonic: int | None = None) -> VisibilityReport:
    """Contrast ``(max - min)/(max + min)`` from the global extrema of the scan."""
    hi = float(scan.values.max())
    lo = float(scan.values.min())
    if hi + lo <= 0:
        raise UndefinedVisibilityError("max + min of the fringe is zero")
    V = (hi - lo) / (hi + lo)
    top = max_harmonic if max_harmonic is not None else max(2 * scan.order, 1)
    if len(scan.thetas) < 2 * top + 1:
        top = (len(scan.thetas) - 1) // 2
    cos, sin = fourier_coefficients(scan.thetas, scan.values, top)
    amps = {k: float(np.hypot(cos[k], sin[k])) for k in cos}
    return VisibilityReport(V, hi, lo, amps, cos, sin)


def stimulated_vs_spontaneous_ratio(gain: GainParams, thetas=None) -> float:
    """Ratio of the G^(2) fringe maxima, NOON(2) injection over vacuum, collinear amplifier."""
    thetas = _check_grid(thetas)
    seed = PureState.basis_ket({H1: 1, V1: 1}, cutoff=2)
    vac = PureState.vacuum((H1, V1), cutoff=0)
    stim = heisenberg_fringe(seed, Geometry.COLLINEAR, gain, 2, thetas)
    spont = heisenberg_fringe(vac, Geometry.COLLINEAR, gain, 2, thetas)
    top = spont.values.max()
    if top <= 0:
        raise DivergentRatioError("spontaneous emission vanishes at this gain")
    return float(stim.values.max() / top)
