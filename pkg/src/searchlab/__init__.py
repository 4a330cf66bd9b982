"""searchlab: search-strategy laboratory on synthetic improvement landscapes."""

from .core import (
    Candidate,
    ConfigurationError,
    Directive,
    FailureKind,
    MetricDirection,
    RunOutcome,
    RunTrajectory,
    StepRecord,
    TaskCard,
    format_metric_display,
    select_best_validated,
)
from .landscape import (
    EvalResult,
    EvalSplit,
    Gate,
    LandscapeSpec,
    SyntheticBackend,
    evaluate,
    generate_landscape,
    latent_fitness,
    propose_child,
)
from .orchestrator import GridConfig, parse_config, run_grid, run_single

__version__ = "0.1.0"
