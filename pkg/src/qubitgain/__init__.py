"""Optimal Bayesian estimation of two-qubit entanglement and single-qubit mixing."""

__version__ = "0.1.0"

from .bayes import (
    AbstractPOVM,
    GainReport,
    PriorDensity,
    average_gain,
    entanglement_of_formation,
    fit_asymptote,
    marginal_probability,
    outcome_gain,
    outcome_probability,
    posterior,
    povm_gain,
    reparametrized_gain,
    simulate_experiment,
    single_copy_monotone,
)
from .local import local_gain, local_haar_average, local_spectrum
from .spin import (
    HalfSpin,
    SpectralBlock,
    Spectrum,
    block_dimension,
    block_weight,
    path_multiplicity,
    spectrum,
    symmetric_dimension,
)
