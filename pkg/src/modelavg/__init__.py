"""Two-candidate-model averaging: estimator, exact laws, and experiments."""

from .design import (
    DesignSingularError,
    LimitDesign,
    PartitionedDesign,
    exact_gram_design,
    new_limit_design,
    new_partitioned_design,
    sym_sqrt,
)
from .estimator import (
    AveragingConfig,
    EstimateBundle,
    model_average,
    restricted_ls,
    risk_estimates,
    shrink_bound,
    unrestricted_ls,
    weight,
)
from .laws import (
    AT_INFINITY,
    AsymptoticLaw,
    FiniteSampleLaw,
    UnsupportedDimensionError,
    l1_distance,
    transformed_density,
)
from .sampling import (
    SampleBatch,
    empirical_cdf,
    ks_distance,
    ks_per_coordinate,
    sample_asymptotic,
    sample_chi_rep,
    sample_data_level,
    sample_root_rep,
)
from .shrink import ShrinkMap
from .tables import ResultTable

__version__ = "0.1.0"
