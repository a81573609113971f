"""Free Meixner laws: moments by partitions, continued fractions and Fock
space operators, densities, block Gaussian random matrices and
conditional freeness checks."""

from .jacobi import (
    DensityError,
    JacobiParams,
    MeixnerParams,
    MomentTable,
    cauchy_transform,
    density_eval,
    density_mass,
    density_moments,
    hankel_min_eigenvalue,
    meixner_to_jacobi,
    moments_tridiagonal,
)
from .partitions import NCPartition, enumerate_nc2, enumerate_nc12, moment_combinatorial, \
    moments_combinatorial
from .fock import FockModel, TruncationError, WordParseError, meixner_moments_fock, parse_word, \
    state_moment
from .rmt import BlockSpec, EnsembleSpec, LabelParams, finite_size_sweep, mc_mixed_moments, \
    mc_moments, oracle_moments
from .cfree import AlgebraElement, kernel_property_test, counterexample_values

__version__ = "0.1.0"
