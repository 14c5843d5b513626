"""Amplification of polarization NOON states by parametric amplifiers.

Sparse Fock-space simulation of collinear and non-collinear amplifiers,
correlation fringes of any order, loss channels, and the closed-form
expressions the simulation is checked against.
"""

from .analytic import FormulaId, eval_formula, visibility_from_formula
from .channels import LossChannel, WeightedMixture, apply_loss_to_seed, lossy_correlation, purify
from .correlators import (
    Analyzer,
    FringeScan,
    VisibilityReport,
    fringe_scan,
    heisenberg_fringe,
    seed_fringe,
    stimulated_vs_spontaneous_ratio,
    theta_grid,
    visibility,
)
from .errors import (
    BasisMismatchError,
    DivergentRatioError,
    FormulaDomainError,
    IntegrationError,
    LeakageError,
    NoonAmpError,
    UndefinedVisibilityError,
)
from .fock import (
    FockBasisState,
    LadderOp,
    ModeLabel,
    PolBasis,
    Polarization,
    PureState,
    Spatial,
    apply_ladder,
    inner_product,
    normally_ordered_expectation,
)
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
from .states import NoonSpec, PhaseShift, apply_phase_shift, change_basis, make_noon

__version__ = "0.1.0"
