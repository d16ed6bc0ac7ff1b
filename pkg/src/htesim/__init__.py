"""Heterogeneous treatment effect estimation and empirical Monte Carlo studies."""

from ._rng import RNG_FAMILY, derive_rng, derive_seed
from .data import (
    Dataset,
    ParseError,
    PredictionSet,
    Sample,
    SchemaError,
    SplitPlan,
    load_csv,
    load_schema,
    make_folds,
    split_half,
    write_csv,
    write_schema,
)
from .features import FeatureExpander, FeatureExpansion, expand_features
from .forest import CausalForest, HonestProbabilityForest, HonestRegressionForest, load_forest, save_forest
from .lasso import ConvergenceError, LogisticLasso, WeightedLasso

__version__ = "0.1.0"

from .config import ConfigError, StudyConfig, load_config  # noqa: E402
from .dgp import (  # noqa: E402
    GroupColumn,
    GroupingScheme,
    ItesSpec,
    Population,
    SyntheticPopConfig,
    Y0Config,
    assign_groups,
    build_population,
    compute_ite,
    draw_replication,
    load_population,
    save_population,
    true_targets,
)
from .estimators import (  # noqa: E402
    INFEASIBLE_BENCHMARKS,
    THE_ELEVEN,
    EstimatorSpec,
    TreatmentEffectEstimator,
    aggregate,
    estimate_iate,
    parse_estimator_id,
)
from .harness import StudyResult, load_tensors, run_study, write_reports  # noqa: E402
from .metrics import (  # noqa: E402
    EstimatorPerformance,
    PredictionTensor,
    jarque_bera,
    per_unit_measures,
    summarize,
)
from .nuisance import Nuisances, estimate_nuisances  # noqa: E402
from .transforms import (  # noqa: E402
    TransformedProblem,
    transform_mcm,
    transform_mom_dr,
    transform_mom_ipw,
    transform_rlearn,
)

__all__ = [
    "RNG_FAMILY",
    "derive_rng",
    "derive_seed",
    "Dataset",
    "Sample",
    "SplitPlan",
    "PredictionSet",
    "SchemaError",
    "ParseError",
    "load_csv",
    "write_csv",
    "load_schema",
    "write_schema",
    "make_folds",
    "split_half",
    "FeatureExpander",
    "FeatureExpansion",
    "expand_features",
    "HonestRegressionForest",
    "HonestProbabilityForest",
    "CausalForest",
    "save_forest",
    "load_forest",
    "WeightedLasso",
    "LogisticLasso",
    "ConvergenceError",
    "ConfigError",
    "StudyConfig",
    "load_config",
    "GroupColumn",
    "GroupingScheme",
    "ItesSpec",
    "Population",
    "SyntheticPopConfig",
    "Y0Config",
    "assign_groups",
    "build_population",
    "compute_ite",
    "draw_replication",
    "load_population",
    "save_population",
    "true_targets",
    "EstimatorSpec",
    "TreatmentEffectEstimator",
    "THE_ELEVEN",
    "INFEASIBLE_BENCHMARKS",
    "aggregate",
    "estimate_iate",
    "parse_estimator_id",
    "StudyResult",
    "run_study",
    "write_reports",
    "load_tensors",
    "EstimatorPerformance",
    "PredictionTensor",
    "jarque_bera",
    "per_unit_measures",
    "summarize",
    "Nuisances",
    "estimate_nuisances",
    "TransformedProblem",
    "transform_mom_ipw",
    "transform_mom_dr",
    "transform_mcm",
    "transform_rlearn",
    "__version__",
]
