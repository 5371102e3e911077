"""Orthonormal Laurent polynomial systems in two real variables.

Balanced anti-diagonal monomial ordering, moment providers for measures
supported away from the coordinate axes, orthonormalization, five-term
recurrences, reproducing kernels with Christoffel-Darboux and confluent
forms, Favard reconstruction, and the tensor fast path for product measures.
"""

from . import _precision as _precision_setup

# Construction accuracy at level 8 requires ~20 guard digits past the worst
# conditioning (cond(M_8) ~ 3e19); the package-wide default is 60 digits.
_precision_setup.set_working_dps()

from .errors import (
    AxisEvaluationError,
    DegenerateDenominatorError,
    Lorpl2Error,
    NotPositiveDefiniteError,
    QuadratureError,
    RankHypothesisError,
    TableFormatError,
    WindowExceededError,
)
from .lattice import (
    LevelBasis,
    MonomialIndex,
    StructMatrix,
    c_additivity_check,
    c_seq,
    factorize,
    global_index,
    inv_c,
    lattice_dim,
    lattice_monomials,
    level,
    level_basis,
    monomial_at,
    position,
    struct_matrices,
)

__version__ = "0.1.0"
