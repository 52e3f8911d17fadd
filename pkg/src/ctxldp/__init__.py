"""Context-aware local differential privacy toolkit."""

from .core import (
    Channel,
    Distribution,
    HadamardMatrix,
    Partition,
    PrivacyMatrix,
    RawEstimate,
    SensitiveSet,
    apply_channel,
    block_budgets,
    high_low_budgets,
    l2_sq_distance,
    sylvester,
    tv_distance,
    uniform_budgets,
    validate_triangle,
)
from .mechanisms import (
    block_hr_channel,
    high_low_hr_channel,
    optimal_binary_channel,
    privatize_all,
    sample_output,
)
from .audit import attained_privacy, compose, error_region, postprocess, verify_eldp
from .estimation import (
    BlockEstimatorSpec,
    HighLowEstimatorSpec,
    block_estimate,
    empirical_risk,
    exact_expected_estimate,
    high_low_estimate,
    project_to_simplex,
)
from .lowerbound import (
    block_packing,
    check_block_chi_bound,
    check_claim1,
    chi_square,
    high_low_packing,
    sample_complexity_floor,
)

__version__ = "0.1.0"
