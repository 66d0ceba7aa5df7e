"""Python bindings for the epinuts renewal model, sampler and command-line tool."""

from ._core import (
    DomainError,
    InputError,
    Model,
    UsageError,
    generation_pmf,
    infection_to_death_pmf,
    ks_uniform,
    logpmf_negbinomial,
    prior_effects,
    run_cli,
    summarize,
)

__all__ = [
    "DomainError",
    "InputError",
    "Model",
    "UsageError",
    "generation_pmf",
    "infection_to_death_pmf",
    "ks_uniform",
    "logpmf_negbinomial",
    "prior_effects",
    "run_cli",
    "summarize",
]
