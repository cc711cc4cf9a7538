"""Spatial birth-death process with local competition: exact simulation,
point-pattern diagnostics and moment-closure dynamics."""

from .kernels import (
    CompetitionKernel,
    DispersalClass,
    DispersalKernel,
    FissionKernel,
    KernelSet,
    MortalityField,
    RadialKernel,
    SamplingError,
    classify_dispersal,
    competition_integral,
    eval_competition,
    fission_total_rate,
    sample_offspring,
)

__all__ = [
    "CompetitionKernel",
    "DispersalClass",
    "DispersalKernel",
    "FissionKernel",
    "KernelSet",
    "MortalityField",
    "RadialKernel",
    "SamplingError",
    "classify_dispersal",
    "competition_integral",
    "eval_competition",
    "fission_total_rate",
    "sample_offspring",
    "TorusGeometry",
    "Configuration",
    "SimState",
    "EventRecord",
    "Snapshot",
    "RunResult",
    "init_poisson",
    "init_from_points",
    "death_rate",
    "step",
    "run",
    "Box",
    "ThetaFunction",
    "CountDistribution",
    "CorrelationEstimate",
    "RuelleDiagnostic",
    "count_distribution",
    "sub_poisson_test",
    "estimate_correlations",
    "ruelle_check",
    "f_theta",
    "generator_on_f_theta",
    "kolmogorov_residual",
    "snapshots_at",
    "stencil_times",
    "MeanFieldParams",
    "PairGrid",
    "PairState",
    "BlowUpError",
    "mean_field_rhs",
    "solve_mean_field",
    "pair_rhs",
    "solve_pair",
    "ExperimentConfig",
    "ThetaSpec",
    "ConfigError",
]

from .hierarchy import (  # noqa: E402
    BlowUpError,
    MeanFieldParams,
    PairGrid,
    PairState,
    mean_field_rhs,
    pair_rhs,
    solve_mean_field,
    solve_pair,
)
from .observables import (  # noqa: E402
    Box,
    CorrelationEstimate,
    CountDistribution,
    RuelleDiagnostic,
    ThetaFunction,
    count_distribution,
    estimate_correlations,
    f_theta,
    generator_on_f_theta,
    kolmogorov_residual,
    ruelle_check,
    snapshots_at,
    stencil_times,
    sub_poisson_test,
)
from .simulator import (  # noqa: E402
    Configuration,
    EventRecord,
    RunResult,
    SimState,
    Snapshot,
    TorusGeometry,
    death_rate,
    init_from_points,
    init_poisson,
    run,
    step,
)
from .config import ConfigError, ExperimentConfig, ThetaSpec  # noqa: E402

__version__ = "0.1.0"
