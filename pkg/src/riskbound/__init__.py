"""riskbound: online learning of risk-aware disturbance-norm upper bounds.

The package fits, via regularized Gaussian process regression, an upper
bound on the Surface-at-Risk of the disturbance-norm stochastic process
between a simple control model and a noisy true system, and demonstrates
the learned bound improving a waypoint-tracking controller in simulation.
"""

__version__ = "0.1.0"

from .risk import (
    AnalyticDistribution,
    Binomial,
    Gaussian,
    RiskLevel,
    SampleSet,
    WienerMarginal,
    analytic_var,
    empirical_sar,
    empirical_var,
    exceedance_probability,
)
from .gpr import (
    ConfidenceParams,
    GpDataset,
    GpPosterior,
    NumericalError,
    SquaredExponentialKernel,
    confidence_multiplier,
    fit,
    kernel_eval,
    mean,
    upper_bound,
    variance,
)
from .sysmodel import (
    Box,
    Composite,
    ConstantWind,
    DisturbanceRecord,
    DivergenceError,
    GroundEffect,
    SimModel,
    SystemMaps,
    Tether,
    TrueSystem,
    World,
    WorldConfig,
    build_integrator_world,
    build_quadrotor_like_world,
    build_world,
    disturbance_norm_sample,
    observe,
    rng_stream,
)
from .surface import (
    AssumptionViolation,
    Batch,
    BatchDiagnostics,
    CoverageReport,
    DiscrepancyParams,
    OnlineSurfaceFitter,
    SarModel,
    batch_target,
    coverage_report,
    evaluate_surface,
    fit_online,
    load_sar_model,
    save_sar_model,
    verify_assumption,
)
from .control import (
    ControllerConfig,
    CourseMetrics,
    RunTrace,
    WaypointCourse,
    augmented_input,
    baseline_input,
    load_trace,
    run_course,
    save_trace,
)
from .harness import (
    ExperimentReport,
    Scenario,
    builtin_course,
    builtin_scenario,
    export_plot_data,
    figure2_fixture,
    load_scenario,
    run_experiment,
    save_report,
)
