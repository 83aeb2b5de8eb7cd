"""Block preconditioners for the (augmented) Navier-Stokes saddle-point system."""

from ..exceptions import ConfigError
from .augmented import (
    AugmentedIdentityPreconditioner,
    AugmentedSimplePreconditioner,
    ExactAugmentedLU,
    augmented_simple_like_solve,
    block,
    error_matrix,
)
from .inner import make_inner_solver, parse_inner
from .simple import GeneralLUPreconditioner, SimplePreconditioner, simple_like_solve

PRECONDITIONERS = ("aug-as", "aug-as-i", "simple", "exact-lu", "chorin-temam", "yosida")


def make_preconditioner(name, inner="direct", inner_schur=None):
    """Build an unfitted preconditioner from its CLI/config name."""
    inner_schur = inner if inner_schur is None else inner_schur
    name = name.lower()
    if name == "aug-as":
        return AugmentedSimplePreconditioner(inner, inner_schur)
    if name == "aug-as-i":
        return AugmentedIdentityPreconditioner(inner, inner_schur)
    if name == "simple":
        return SimplePreconditioner(inner, inner_schur)
    if name == "exact-lu":
        return ExactAugmentedLU()
    if name == "chorin-temam":
        return GeneralLUPreconditioner("dt_mass_inv", "dt_mass_inv", inner, inner_schur)
    if name == "yosida":
        return GeneralLUPreconditioner("dt_mass_inv", "exact_k", inner, inner_schur)
    raise ConfigError(f"unknown preconditioner {name!r}; choose from {', '.join(PRECONDITIONERS)}")


__all__ = [
    "AugmentedIdentityPreconditioner",
    "AugmentedSimplePreconditioner",
    "ExactAugmentedLU",
    "GeneralLUPreconditioner",
    "PRECONDITIONERS",
    "SimplePreconditioner",
    "augmented_simple_like_solve",
    "block",
    "error_matrix",
    "make_inner_solver",
    "make_preconditioner",
    "parse_inner",
    "simple_like_solve",
]
