"""Closed-form correlation functions, visibilities and photon numbers.

Every expression is a plain function of the gain (or mean pair number
``n̄ = sinh² g``), the photon numbers and the phase.  Identifiers ending in
``_EXACT`` hold the forms reproduced by the simulation wherever a reference
coefficient or sign differs from it; the reference forms stay available
unchanged so that the two can be compared.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FormulaDomainError, UndefinedVisibilityError
from .opa import GainParams


class FormulaId(enum.Enum):
    SEED_GN = "seed_GN"
    SEED_GM = "seed_GM"
    SEED_LOSS = "seed_loss"
    COLL_G1 = "coll_G1"
    COLL_G2 = "coll_G2"
    COLL_V2 = "coll_V2"
    COLL_V2_SERIES = "coll_V2_series"
    COLL_V3 = "coll_V3"
    COLL_V4 = "coll_V4"
    COLL_V5 = "coll_V5"
    COLL_V6 = "coll_V6"
    COLL_V6_EXACT = "coll_V6_exact"
    COLL_SPONT_V2 = "coll_spont_V2"
    COLL_SPONT_G2 = "coll_spont_G2"
    COLL3_G3 = "coll3_G3"
    COLL3_G3_EXACT = "coll3_G3_exact"
    NC_SPONT_GM = "nc_spont_GM"
    NC_GMN_GEQ = "nc_GMN_geq"
    NC_GMN_GEQ_EXACT = "nc_GMN_geq_exact"
    NC_GMN_LESS = "nc_GMN_less"
    NC_LOSS_SCALE = "nc_loss_scale"
    ASYM_V_N2 = "asym_V_N2"
    ASYM_V_N3 = "asym_V_N3"
    ASYM_V_N4 = "asym_V_N4"
    MEAN_N_SP = "mean_n_sp"
    MEAN_N_STIM = "mean_n_stim"


def multinomial(m: int, *parts: int) -> int:
    """``m! / (k_1! ... k_r! (m - Σk)!)``, exact in integers."""
    rest = m - sum(parts)
    if rest < 0 or any(p < 0 for p in parts):
        return 0
    out = math.factorial(m) // math.factorial(rest)
    for p in parts:
        out //= math.factorial(p)
    return out


def _poly(coeffs, x):
    """``Σ coeffs[k] x^k``."""
    return sum(c * x**k for k, c in enumerate(coeffs))


def _ratio(num, den):
    return lambda n: _poly(num, n) / _poly(den, n)


# collinear visibilities of the NOON(2)-seeded amplifier, ascending powers of n̄
_COLL_VISIBILITY = {
    FormulaId.COLL_V2: _ratio((1, 7, 7), (1, 23, 35)),
    FormulaId.COLL_V2_SERIES: _ratio((1, 7, 7), (1, 25, 35)),
    FormulaId.COLL_V3: _ratio((12, 48, 39), (12, 84, 91)),
    FormulaId.COLL_V4: _ratio((12, 291, 822, 567), (12, 291, 1078, 903)),
    FormulaId.COLL_V5: _ratio((135, 1315, 2845, 1705), (135, 1315, 3245, 2201)),
    FormulaId.COLL_V6: _ratio((45, 1745, 10080, 17507, 9245), (45, 1745, 10080, 18657, 10621)),
    FormulaId.COLL_V6_EXACT: _ratio((45, 1745, 10080, 17505, 9245), (45, 1745, 10080, 18657, 10621)),
}

VISIBILITY_SERIES = {
    2: FormulaId.COLL_V2_SERIES,
    3: FormulaId.COLL_V3,
    4: FormulaId.COLL_V4,
    5: FormulaId.COLL_V5,
    6: FormulaId.COLL_V6,
}
VISIBILITY_SERIES_EXACT = {**VISIBILITY_SERIES, 2: FormulaId.COLL_V2, 6: FormulaId.COLL_V6_EXACT}

# asymptotic non-collinear visibilities: numerator and denominator in ascending powers of M
_ASYMPTOTIC = {
    FormulaId.ASYM_V_N2: ((0, -1, 1), (8, 7, 1)),
    FormulaId.ASYM_V_N3: ((0, 2, -3, 1), (48, 56, 15, 1)),
    FormulaId.ASYM_V_N4: ((0, -6, 11, -6, 1), (384, 538, 203, 26, 1)),
}
ASYMPTOTIC_BY_N = {2: FormulaId.ASYM_V_N2, 3: FormulaId.ASYM_V_N3, 4: FormulaId.ASYM_V_N4}


def coll3_coefficients(nbar: float, exact: bool = False) -> tuple[float, float, float, float]:
    """Coefficients ``(a, b, c, d)`` of ``a + b cos θ + c cos 2θ + d cos 3θ``.

    ``exact=True`` gives the fringe of the phase analyzer
    ``c = (a_+ - e^{-iθ} a_-)/√2`` applied to the amplified NOON(3) state.
    """
    n = nbar
    if exact:
        return (
            (6 + 342 * n + 1782 * n**2 + 1824 * n**3) / 8,
            -54 * (n + n**2) / 8,
            -18 * n * (n + 1) * (32 * n + 9) / 8,
            6 * (3 * n**2 + 3 * n + 1) / 8,
        )
    return (
        6 + 342 * n + 1782 * n**2 + 1824 * n**3,
        1.5 * (3 * n**2 + 3 * n + 1),
        0.5 * (81 * n + 369 * n**2 + 288 * n**3),
        -13.5 * (n + n**2),
    )


def nc_constant_terms(n: int, m: int, gain: GainParams) -> float:
    """Phase-independent part of the non-collinear ``G^(M)_N`` for ``M >= N``, inside ``M!/2^M {...}``."""
    C2, S2 = gain.C**2, gain.S**2
    total = 0.0
    for i in range(m - n + 1):
        for j in range(n + 1):
            total += C2**j * S2 ** (m - j) * math.comb(n, j) * multinomial(m, i, j)
    for i in range(m - n + 1, m + 1):
        for j in range(m - i + 1):
            total += C2**j * S2 ** (m - j) * math.comb(n, j) * multinomial(m, i, j)
    return total


def nc_fringe_amplitude(n: int, m: int, gain: GainParams) -> float:
    """Magnitude of the ``cos(Nθ)`` term inside ``M!/2^M {...}``."""
    return gain.C ** (2 * n) * gain.S ** (2 * (m - n)) * sum(multinomial(m, i, n) for i in range(m - n + 1))


def _nc_below(n: int, m: int, gain: GainParams) -> float:
    C2, S2 = gain.C**2, gain.S**2
    s = sum(
        C2**j * S2 ** (m - j) * multinomial(m, i, j) * math.comb(n, j)
        for i in range(m + 1)
        for j in range(m - i + 1)
    )
    return math.factorial(m) / 2**m * s


def _gain(g, nbar) -> GainParams:
    if (g is None) == (nbar is None):
        raise FormulaDomainError("give exactly one of g and nbar")
    return GainParams(g) if g is not None else GainParams.from_nbar(nbar)


def _need(name, value):
    if value is None:
        raise FormulaDomainError(f"parameter {name!r} is required")
    return value


def _need_int(name, value, low: int) -> int:
    value = _need(name, value)
    if int(value) != value or value < low:
        raise FormulaDomainError(f"{name} must be an integer >= {low}, got {value}")
    return int(value)


def eval_formula(
    fid: FormulaId,
    *,
    N: int | None = None,
    M: int | None = None,
    g: float | None = None,
    nbar: float | None = None,
    theta: float | None = None,
    phi: float | None = None,
    eta: float | None = None,
) -> float:
    """Evaluate one closed form.  Unused parameters are ignored."""
    fid = FormulaId(fid)
    if fid is FormulaId.SEED_GN:
        n = _need_int("N", N, 1)
        return math.factorial(n) / 2**n * (1 + (-1) ** (n + 1) * math.cos(n * _need("phi", phi)))
    if fid is FormulaId.SEED_GM:
        n, m = _need_int("N", N, 1), _need_int("M", M, 1)
        if m >= n:
            raise FormulaDomainError("the flat seed moment needs M < N")
        return math.factorial(n) / (2**m * math.factorial(n - m))
    if fid is FormulaId.SEED_LOSS:
        e = _need("eta", eta)
        return e ** _need_int("N", N, 1) * eval_formula(FormulaId.SEED_GN, N=N, phi=phi)
    if fid in _ASYMPTOTIC:
        m = _need_int("M", M, 1)
        num, den = _ASYMPTOTIC[fid]
        return _poly(num, m) / _poly(den, m)

    gain = _gain(g, nbar)
    n_ = gain.nbar
    if fid is FormulaId.COLL_G1:
        return 3 * n_ + 1
    if fid is FormulaId.COLL_G2:
        t = _need("theta", theta)
        return 2 * n_ * (4 + 7 * n_) + 0.5 * (7 * n_**2 + 7 * n_ + 1) * (1 - math.cos(2 * t))
    if fid is FormulaId.COLL_SPONT_G2:
        t = _need("theta", theta)
        return 2 * n_**2 + 0.5 * (n_**2 + n_) * (1 - math.cos(2 * t))
    if fid in _COLL_VISIBILITY:
        return _COLL_VISIBILITY[fid](n_)
    if fid is FormulaId.COLL_SPONT_V2:
        return (n_ + 1) / (5 * n_ + 1)
    if fid in (FormulaId.COLL3_G3, FormulaId.COLL3_G3_EXACT):
        t = _need("theta", theta)
        a, b, c, d = coll3_coefficients(n_, exact=fid is FormulaId.COLL3_G3_EXACT)
        return a + b * math.cos(t) + c * math.cos(2 * t) + d * math.cos(3 * t)
    if fid is FormulaId.NC_SPONT_GM:
        m = _need_int("M", M, 1)
        return math.factorial(m) * gain.S ** (2 * m)
    if fid in (FormulaId.NC_GMN_GEQ, FormulaId.NC_GMN_GEQ_EXACT):
        n, m = _need_int("N", N, 1), _need_int("M", M, 1)
        if m < n:
            raise FormulaDomainError("the oscillating form needs M >= N")
        t = _need("theta", theta)
        sign = (-1) ** (n if fid is FormulaId.NC_GMN_GEQ_EXACT else m)
        inner = nc_constant_terms(n, m, gain) - sign * nc_fringe_amplitude(n, m, gain) * math.cos(n * t)
        return math.factorial(m) / 2**m * inner
    if fid is FormulaId.NC_GMN_LESS:
        n, m = _need_int("N", N, 1), _need_int("M", M, 1)
        if m >= n:
            raise FormulaDomainError("the flat form needs M < N")
        return _nc_below(n, m, gain)
    if fid is FormulaId.NC_LOSS_SCALE:
        n, m = _need_int("N", N, 1), _need_int("M", M, 1)
        e = _need("eta", eta)
        if m < n:
            return e**m * _nc_below(n, m, gain)
        return e**m * eval_formula(FormulaId.NC_GMN_GEQ, N=n, M=m, g=gain.g, theta=theta)
    if fid is FormulaId.MEAN_N_SP:
        return 2 * gain.S**2
    if fid is FormulaId.MEAN_N_STIM:
        return 2 + 6 * gain.S**2
    raise FormulaDomainError(f"no evaluator for {fid}")  # pragma: no cover


_OSCILLATORY = {
    FormulaId.SEED_GN,
    FormulaId.SEED_LOSS,
    FormulaId.COLL_G2,
    FormulaId.COLL_SPONT_G2,
    FormulaId.COLL3_G3,
    FormulaId.COLL3_G3_EXACT,
    FormulaId.NC_GMN_GEQ,
    FormulaId.NC_GMN_GEQ_EXACT,
    FormulaId.NC_LOSS_SCALE,
}


def _trig_extrema(f) -> tuple[float, float]:
    """Global max and min of a smooth 2π-periodic function: dense scan then bounded polish."""
    grid = np.linspace(0, 2 * np.pi, 2049)
    vals = np.array([f(t) for t in grid])
    step = grid[1] - grid[0]
    i_hi, i_lo = int(vals.argmax()), int(vals.argmin())
    opts = {"xatol": 1e-12}
    t_hi, t_lo = grid[i_hi], grid[i_lo]
    res_hi = minimize_scalar(lambda t: -f(t), bounds=(t_hi - step, t_hi + step), method="bounded", options=opts)
    res_lo = minimize_scalar(f, bounds=(t_lo - step, t_lo + step), method="bounded", options=opts)
    return max(vals[i_hi], -res_hi.fun), min(vals[i_lo], res_lo.fun)


def visibility_from_formula(fid: FormulaId, **params) -> float:
    """Fringe contrast ``(max - min)/(max + min)`` of an oscillating closed form."""
    fid = FormulaId(fid)
    if fid not in _OSCILLATORY:
        raise FormulaDomainError(f"{fid.value} has no phase dependence")
    if fid in (FormulaId.NC_GMN_GEQ, FormulaId.NC_GMN_GEQ_EXACT, FormulaId.NC_LOSS_SCALE):
        n, m = _need_int("N", params.get("N"), 1), _need_int("M", params.get("M"), 1)
        if m < n:
            raise FormulaDomainError("below M = N the correlation is flat")
        gain = _gain(params.get("g"), params.get("nbar"))
        return nc_fringe_amplitude(n, m, gain) / nc_constant_terms(n, m, gain)
    var = "phi" if fid in (FormulaId.SEED_GN, FormulaId.SEED_LOSS) else "theta"
    rest = {k: v for k, v in params.items() if k not in ("theta", "phi")}
    hi, lo = _trig_extrema(lambda t: eval_formula(fid, **rest, **{var: t}))
    if hi + lo <= 0:
        raise UndefinedVisibilityError("max + min of the closed form is zero")
    return (hi - lo) / (hi + lo)
