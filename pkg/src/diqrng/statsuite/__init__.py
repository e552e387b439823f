"""SP 800-22 statistical randomness tests with KS aggregation."""

from .sp800_22 import (
    TestResult,
    aperiodic_templates,
    approximate_entropy_test,
    berlekamp_massey,
    block_frequency_test,
    cumulative_sums_test,
    fft_test,
    frequency_test,
    full_rank_probability,
    gf2_rank_batch,
    gf2_rank_reference,
    linear_complexity_batch,
    linear_complexity_test,
    longest_runs_test,
    non_overlapping_template_test,
    overlapping_count_probs,
    overlapping_template_test,
    random_excursions_test,
    random_excursions_variant_test,
    rank_test,
    runs_test,
    serial_test,
    universal_test,
)
from .suite import (
    TEST_NAMES,
    SuiteReport,
    ks_uniformity,
    run_named_test,
    run_suite,
)

__all__ = [
    "TEST_NAMES",
    "SuiteReport",
    "TestResult",
    "aperiodic_templates",
    "approximate_entropy_test",
    "berlekamp_massey",
    "block_frequency_test",
    "cumulative_sums_test",
    "fft_test",
    "frequency_test",
    "full_rank_probability",
    "gf2_rank_batch",
    "gf2_rank_reference",
    "ks_uniformity",
    "linear_complexity_batch",
    "linear_complexity_test",
    "longest_runs_test",
    "non_overlapping_template_test",
    "overlapping_count_probs",
    "overlapping_template_test",
    "random_excursions_test",
    "random_excursions_variant_test",
    "rank_test",
    "run_named_test",
    "run_suite",
    "runs_test",
    "serial_test",
    "universal_test",
]
