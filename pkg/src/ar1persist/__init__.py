"""Persistence exponents, quasi-stationary laws and harmonic functions of
AR(1) chains killed on leaving (0, inf)."""
from .chain import ChainParams, SurvivalCurve, survival_curve_mc
from .errors import ArtifactError, ConfigError, ConvergenceError, DomainError
from .estimators import fleming_viot, lambda_from_slope
from .innovations import Gaussian, Laplace, TwoSidedPareto, Uniform
from .kernel import KernelBlocks, assemble_blocks, build_grid
from .renewal import find_lambda_root, renewal_for
from .spectral import EigenTriple, leading_eigentriple, spectrum_for

__all__ = [
    "ChainParams", "SurvivalCurve", "survival_curve_mc", "ArtifactError", "ConfigError", "ConvergenceError",
    "DomainError", "fleming_viot", "lambda_from_slope", "Gaussian", "Laplace", "TwoSidedPareto", "Uniform",
    "KernelBlocks", "assemble_blocks", "build_grid", "find_lambda_root", "renewal_for", "EigenTriple",
    "leading_eigentriple", "spectrum_for",
]
