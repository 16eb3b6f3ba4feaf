from ._core import (
    Nonlinearity,
    RadialField,
    RadialGrid,
    SingularSolutionTable,
    StlabError,
    asymptotic_ratio,
    build_singular,
    check_admissibility,
    fixed_point_residual,
    flux_residual,
    ladders,
    pohozaev,
    run,
    sample_singular,
    sobolev_exponent,
    threshold_scan,
    ul_norm,
    window_integral,
)

__all__ = [
    "Nonlinearity",
    "RadialField",
    "RadialGrid",
    "SingularSolutionTable",
    "StlabError",
    "asymptotic_ratio",
    "build_singular",
    "check_admissibility",
    "fixed_point_residual",
    "flux_residual",
    "ladders",
    "pohozaev",
    "run",
    "sample_singular",
    "sobolev_exponent",
    "threshold_scan",
    "ul_norm",
    "window_integral",
]
