"""
Discrete mixture representations of parametric families.

Modules
-------
dyadic      exact dyadic rationals and the decomposition of uniforms into dyadic uniforms
mixtures    uniform-mixture (Shepp) decomposition of monotone densities
chi2        noncentral chi-squared densities as Poisson mixtures, samplers
fisher      Fisher information lost by observing the mixture
estimators  Rao-Blackwellized estimators with exact variances
em          EM for the mixing pmf of chi-squared mixtures
simkit      seeded random streams and samplers
cli         command-line entry point

Set ``DMIXREP_DISABLE_JIT=1`` before import to run the pure-numpy kernels.
"""

from ._jit import backend
from .chi2 import MixingPMF, NoncentralChiSq
from .dyadic import DiscreteMixture, DyadicInterval, DyadicRational, decompose, one_sided_decompose
from .em import EMConfig, EMState, fit

__version__ = "0.1.0"

__all__ = [
    "backend",
    "MixingPMF",
    "NoncentralChiSq",
    "DiscreteMixture",
    "DyadicInterval",
    "DyadicRational",
    "decompose",
    "one_sided_decompose",
    "EMConfig",
    "EMState",
    "fit",
]
