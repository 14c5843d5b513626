"""Simulation-versus-closed-form checks shared by the CLI and the test suite.

Each check returns one or more ``CheckResult`` records carrying the worst
deviation found and the tolerance it was held to.  Checks never raise on a
mismatch; the caller decides what a failure means.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analytic as an
from .analytic import FormulaId as F
from .channels import LossChannel, lossy_correlation, moment, seed_loss_moment
from .correlators import (
    Analyzer,
    FringeScan,
    fringe_scan,
    heisenberg_fringe,
    seed_fringe,
    stimulated_vs_spontaneous_ratio,
    theta_grid,
    visibility,
)
from .fock import H1, M1, P1, V1, PolBasis, PureState, fidelity
from .opa import (
    GainParams,
    Geometry,
    amplify,
    collinear_amplified_2photon,
    collinear_amplified_3photon,
    noncollinear_amplify,
    noncollinear_closed_form,
    numeric_evolve,
    spontaneous_noncollinear,
)
from .states import NoonSpec, change_basis, make_noon


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{flag}] {self.criterion:>2} {self.name}: max_dev={self.deviation:.3e} tol={self.tolerance:.1e}{extra}"


def _result(criterion, name, dev, tol, detail="", extra_ok=True) -> CheckResult:
    dev = float(dev)
    return CheckResult(criterion, name, bool(dev <= tol and extra_ok), dev, tol, detail)


def rel_dev(sim, ref) -> float:
    """Worst pointwise relative deviation; absolute where the reference vanishes."""
    sim, ref = np.atleast_1d(np.asarray(sim, float)), np.atleast_1d(np.asarray(ref, float))
    scale = np.where(ref != 0, np.abs(ref), 1.0)
    return float(np.max(np.abs(sim - ref) / scale))


def _formula_curve(fid, thetas, **params) -> np.ndarray:
    return np.array([an.eval_formula(fid, theta=t, **params) for t in thetas])


def _harmonic(scan: FringeScan, k: int) -> float:
    return visibility(scan, max_harmonic=max(k, 2 * scan.order)).harmonic_amplitudes[k]


def _shift_to_align(sim: np.ndarray, ref: np.ndarray) -> int:
    """Grid shift that puts the simulated maximum on the reference maximum."""
    if np.ptp(ref) == 0:
        return 0
    return int(np.argmax(ref)) - int(np.argmax(sim))


# ---------------------------------------------------------------------------


def check_seed(tol: float | None = None) -> list[CheckResult]:
    """Seed fringes for NOON(N), N = 1..4 and every M <= N, on a 72-point grid."""
    tol = 1e-10 if tol is None else tol
    phis = theta_grid(72)
    out = []
    for n in range(1, 5):
        for m in range(1, n + 1):
            sim = seed_fringe(NoonSpec(n), m, phis).values
            if m == n:
                ref = np.array([an.eval_formula(F.SEED_GN, N=n, phi=p) for p in phis])
            else:
                ref = np.full_like(phis, an.eval_formula(F.SEED_GM, N=n, M=m))
            shift = _shift_to_align(sim, ref)
            dev = np.max(np.abs(np.roll(sim, shift) - ref))
            detail = f"offset={shift * 2 * np.pi / len(phis):.4f} rad" if shift else ""
            out.append(_result(1, f"seed N={n} M={m}", dev, tol, detail))
    return out


def check_seed_loss(tol: float | None = None) -> list[CheckResult]:
    """Lossy seed mixture against ``η^N`` times the lossless seed moment and its closed form."""
    tol = 1e-10 if tol is None else tol
    phis = theta_grid(12)
    out = []
    for n in (1, 2, 3):
        for eta in (0.25, 0.5, 0.9):
            mix = np.array([seed_loss_moment(NoonSpec(n, p), eta) for p in phis])
            pure = np.array([moment(make_noon(NoonSpec(n, p)), H1, n) for p in phis])
            ref = np.array([an.eval_formula(F.SEED_LOSS, N=n, eta=eta, phi=p) for p in phis])
            law = np.max(np.abs(mix - eta**n * pure)) / (eta**n * pure.max())
            shift = _shift_to_align(mix, ref)
            form = np.max(np.abs(np.roll(mix, shift) - ref)) / ref.max()
            out.append(_result(2, f"seed loss N={n} eta={eta}", max(law, form), tol))
    return out


def check_collinear_2photon(tol: float | None = None) -> list[CheckResult]:
    tol = 1e-9 if tol is None else tol
    thetas = theta_grid()
    out = []
    for g in (0.3, 1.0, 2.0):
        gain = GainParams(g)
        state = collinear_amplified_2photon(gain)
        g2 = fringe_scan(state, 2, Analyzer("rotation"), thetas)
        ref = _formula_curve(F.COLL_G2, thetas, g=g)
        out.append(_result(3, f"G2 fringe g={g}", rel_dev(g2.values, ref), tol, f"cutoff={state.cutoff}"))
        g1 = fringe_scan(state, 1, Analyzer("rotation"), thetas)
        out.append(_result(3, f"G1 flat g={g}", rel_dev(g1.values, an.eval_formula(F.COLL_G1, g=g)), 1e-10))
        V = visibility(g2).V
        out.append(_result(3, f"V2 g={g}", rel_dev(V, an.eval_formula(F.COLL_V2, g=g)), tol))
    seed = PureState.basis_ket({H1: 1, V1: 1}, cutoff=2)
    big = heisenberg_fringe(seed, Geometry.COLLINEAR, GainParams.from_nbar(1e4), 2, thetas)
    out.append(_result(3, "V2 at nbar=1e4 vs 1/5", abs(visibility(big).V - 0.2), 1e-3))
    return out


def _collinear_visibilities(g: float, orders=range(2, 7)) -> dict[int, float]:
    seed = PureState.basis_ket({H1: 1, V1: 1}, cutoff=2)
    gain = GainParams(g)
    return {m: visibility(heisenberg_fringe(seed, Geometry.COLLINEAR, gain, m)).V for m in orders}


def check_collinear_orders(tol: float | None = None, exact: bool = False) -> list[CheckResult]:
    """Visibility of orders M = 2..6 for the NOON(2)-seeded collinear amplifier."""
    tol = 1e-8 if tol is None else tol
    table = an.VISIBILITY_SERIES_EXACT if exact else an.VISIBILITY_SERIES
    tag = " (exact)" if exact else ""
    out = []
    for g in (0.5, 1.0):
        sim = _collinear_visibilities(g)
        for m, v in sim.items():
            ref = an.eval_formula(table[m], g=g)
            out.append(_result(4, f"V{m} g={g}{tag}", rel_dev(v, ref), tol, f"sim={v:.12g} ref={ref:.12g}"))
        vals = [sim[m] for m in sorted(sim)]
        rising = all(b > a for a, b in zip(vals, vals[1:]))
        out.append(CheckResult(4, f"V increasing in M g={g}{tag}", rising, 0.0, 0.0))
    return out


def _coll3_scan(g: float) -> FringeScan:
    return heisenberg_fringe(make_noon(NoonSpec(3)), Geometry.COLLINEAR, GainParams(g), 3, analyzer=Analyzer("phase"))


def check_collinear_3photon(tol: float | None = None, exact: bool = False) -> list[CheckResult]:
    """Harmonic magnitudes of ``G^(3)`` for the NOON(3)-seeded collinear amplifier."""
    tol = 1e-7 if tol is None else tol
    tag = " (exact)" if exact else ""
    out = []
    for g in (0.5, 1.0):
        gain = GainParams(g)
        rep = visibility(_coll3_scan(g), max_harmonic=6)
        ref = an.coll3_coefficients(gain.nbar, exact=exact)
        for k, name in enumerate("abcd"):
            sim = rep.harmonic_amplitudes[k]
            out.append(
                _result(5, f"|{name}| g={g}{tag}", rel_dev(sim, abs(ref[k])), tol, f"sim={sim:.10g} ref={abs(ref[k]):.10g}")
            )
    ratios = []
    for g in (0.5, 1.0, 1.5, 2.0):
        amps = visibility(_coll3_scan(g), max_harmonic=6).harmonic_amplitudes
        ratios.append(amps[2] / amps[3])
    if not exact:
        rising = all(b > a for a, b in zip(ratios, ratios[1:]))
        out.append(CheckResult(5, "|c|/|d| grows with g", rising, 0.0, 0.0, "ratios=" + ",".join(f"{r:.4g}" for r in ratios)))
    return out


def check_nc_spontaneous(tol: float | None = None) -> list[CheckResult]:
    tol = 1e-9 if tol is None else tol
    out = []
    for g in (0.5, 1.0, 1.5):
        gain = GainParams(g)
        state = spontaneous_noncollinear(gain, leak_budget=None)
        for m in range(1, 5):
            scan = fringe_scan(state, m, Analyzer("phase"), leak_budget=None)
            mean = scan.values.mean()
            flat = np.ptp(scan.values) / mean
            ref = an.eval_formula(F.NC_SPONT_GM, M=m, g=g)
            out.append(
                _result(6, f"spontaneous flat M={m} g={g}", rel_dev(mean, ref), tol, f"flatness={flat:.1e}", flat < 1e-10)
            )
    return out


NC_GEQ_CASES = ((2, 2), (2, 3), (3, 3), (2, 4))
NC_LESS_CASES = ((3, 2), (4, 3))


def check_nc_amplified(tol: float | None = None, exact: bool = False) -> list[CheckResult]:
    """Schrödinger-picture fringes of amplified NOON(N) against the closed forms."""
    tol = 1e-8 if tol is None else tol
    geq = F.NC_GMN_GEQ_EXACT if exact else F.NC_GMN_GEQ
    tag = " (exact)" if exact else ""
    thetas = theta_grid()
    out = []
    for g in (0.3, 0.8):
        gain = GainParams(g)
        for n, m in NC_GEQ_CASES + NC_LESS_CASES:
            state = noncollinear_amplify(make_noon(NoonSpec(n)), gain, order=m)
            scan = fringe_scan(state, m, Analyzer("phase"), thetas)
            if m >= n:
                ref = _formula_curve(geq, thetas, N=n, M=m, g=g)
                rep = visibility(scan, max_harmonic=2 * m)
                peak = rep.harmonic_amplitudes[n]
                stray = max(a for k, a in rep.harmonic_amplitudes.items() if k not in (0, n))
                pure = stray < 1e-8 * peak
                detail = f"stray/peak={stray / peak:.1e}"
            else:
                ref = np.full_like(thetas, an.eval_formula(F.NC_GMN_LESS, N=n, M=m, g=g))
                pure = np.ptp(scan.values) < 1e-9 * scan.values.mean()
                detail = f"flatness={np.ptp(scan.values) / scan.values.mean():.1e}"
            out.append(_result(7, f"G{m}_N={n} g={g}{tag}", rel_dev(scan.values, ref), tol, detail, pure))
    return out


def check_loss(tol: float | None = None) -> list[CheckResult]:
    """``η^M`` scaling through an explicitly purified beam splitter, both geometries."""
    tol = 1e-10 if tol is None else tol
    thetas = theta_grid(90)
    gain = GainParams(0.5)
    states = {
        "collinear": (amplify(make_noon(NoonSpec(2)), Geometry.COLLINEAR, gain, order=3), Analyzer("rotation")),
        "noncollinear": (noncollinear_amplify(make_noon(NoonSpec(2)), gain, order=3), Analyzer("phase")),
    }
    out = []
    for label, (state, analyzer) in states.items():
        if analyzer.native_basis is not state.basis:
            state = change_basis(state, analyzer.native_basis)
        for eta in (0.5, 0.8):
            for m in (1, 2, 3):
                clean = fringe_scan(state, m, analyzer, thetas)
                lossy = lossy_correlation(state, LossChannel(eta), m, thetas, analyzer)
                dev = rel_dev(lossy.values, eta**m * clean.values)
                v0, v1 = visibility(clean).V, visibility(lossy).V
                out.append(
                    _result(8, f"{label} eta={eta} M={m}", dev, tol, f"dV={abs(v1 - v0):.1e}", abs(v1 - v0) <= tol)
                )
    return out


def check_asymptotic(tol: float | None = None) -> list[CheckResult]:
    tol = 1e-6 if tol is None else tol
    out = []
    for n, fid in an.ASYMPTOTIC_BY_N.items():
        dev = max(
            abs(an.visibility_from_formula(F.NC_GMN_GEQ, N=n, M=m, g=10.0) - an.eval_formula(fid, M=m))
            for m in range(n, 9)
        )
        detail = ""
        if n == 2:
            spot = abs(an.eval_formula(fid, M=2) - 1 / 13)
            dev = max(dev, spot)
            detail = "spot V(N=2,M=2)=1/13"
        out.append(_result(9, f"asymptotic N={n} M<=8", dev, tol, detail))
    return out


def check_ratio(tol: float | None = None) -> list[CheckResult]:
    tol = 1e-2 if tol is None else tol
    r = stimulated_vs_spontaneous_ratio(GainParams.from_nbar(1e4))
    return [_result(10, "stimulated/spontaneous at nbar=1e4", abs(r - 7) / 7, tol, f"ratio={r:.6f}")]


def check_oracles(tol: float | None = None) -> list[CheckResult]:
    """Closed-form states against the RK4 integrator; Schrödinger against Heisenberg fringes."""
    tol = 1e-7 if tol is None else tol
    out = []
    for g in (0.2, 0.5, 1.0):
        gain = GainParams(g)
        noon2, noon3 = make_noon(NoonSpec(2)), make_noon(NoonSpec(3))
        cases = {
            "2-photon collinear": (collinear_amplified_2photon(gain), noon2, Geometry.COLLINEAR),
            "3-photon collinear": (collinear_amplified_3photon(gain), noon3, Geometry.COLLINEAR),
            "NOON(2) noncollinear": (noncollinear_closed_form(2, gain), noon2, Geometry.NONCOLLINEAR),
            "spontaneous noncollinear": (spontaneous_noncollinear(gain), PureState.vacuum((P1, M1), 0), Geometry.NONCOLLINEAR),
        }
        for label, (closed, seed, geometry) in cases.items():
            seed = change_basis(seed, closed.basis).with_cutoff(closed.cutoff)
            ode = change_basis(numeric_evolve(seed, geometry, gain, cutoff=closed.cutoff), closed.basis)
            out.append(_result(11, f"{label} g={g} fidelity", max(0.0, 1 - fidelity(closed, ode)), tol))
    thetas = theta_grid(90)
    for geometry, analyzer in ((Geometry.COLLINEAR, Analyzer("rotation")), (Geometry.NONCOLLINEAR, Analyzer("phase"))):
        worst = 0.0
        for n in (1, 2, 3):
            seed = make_noon(NoonSpec(n))
            if geometry is Geometry.COLLINEAR:
                seed = change_basis(seed, PolBasis.HV)
            for g in (0.5, 1.0):
                state = amplify(seed, geometry, GainParams(g), order=4)
                for m in range(1, 5):
                    a = fringe_scan(state, m, analyzer, thetas).values
                    b = heisenberg_fringe(seed, geometry, GainParams(g), m, thetas, analyzer).values
                    worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(b)))
        out.append(_result(11, f"{geometry.value} Schrodinger vs Heisenberg", worst, 1e-9))
    return out


BLOCKS: dict[str, Callable[..., list[CheckResult]]] = {
    "seed": check_seed,
    "seed_loss": check_seed_loss,
    "collinear": check_collinear_2photon,
    "collinear_orders": check_collinear_orders,
    "collinear_3photon": check_collinear_3photon,
    "nc_spontaneous": check_nc_spontaneous,
    "nc_amplified": check_nc_amplified,
    "loss": check_loss,
    "asym": check_asymptotic,
    "ratio": check_ratio,
    "oracles": check_oracles,
}


def run_checks(blocks=None, tol: float | None = None, log: Callable[[str], None] | None = None) -> list[CheckResult]:
    names = list(BLOCKS) if not blocks else list(blocks)
    unknown = [b for b in names if b not in BLOCKS]
    if unknown:
        raise KeyError(f"unknown verification block(s): {', '.join(unknown)}")
    results = []
    for name in names:
        t0 = time.perf_counter()
        res = BLOCKS[name](tol)
        results.extend(res)
        if log:
            for r in res:
                log(r.line())
            log(f"# block {name}: {time.perf_counter() - t0:.1f} s")
    return results


