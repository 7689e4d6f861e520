"""Weighted topological pressure for chains of subshifts of finite type."""
from .covering import (
    PressureBracket,
    StageSpec,
    lambda_vs_w_check,
    power_rule_check,
    pressure_bisect,
    single_scale_log_sum,
    upper_pressure,
    w_lp_stage,
)
from .cylinders import (
    Cover,
    WeightedCylinder,
    WindowProfile,
    count_weighted_cylinders,
    cylinder_cover,
    enumerate_weighted_cylinders,
    explicit_cover,
    join_element_of,
    oscillation,
    power_join_identity_check,
    trivial_cover,
    weight_of,
    window_profile,
)
from .errors import ResourceLimitError, ValidationError
from .frostman import FrostmanCertificate, StageMeasure, duality_gap, frostman_lp, verify_frostman
from .measures import (
    EntropyBracket,
    MarkovMeasure,
    WordMeasure,
    avg_entropy_inequality_check,
    block_entropy_continuity_check,
    cover_from_partition,
    entropy,
    hm_entropy_bracket,
    integral,
    pushforward_block_dist,
    smb_expected_rate,
    stationary,
    wcyl_mass,
)
from .symbolic import (
    Alphabet,
    BlockCode,
    ChainSystem,
    Potential,
    Subshift,
    apply_code,
    birkhoff_sup,
    validate_chain,
    word_count,
    words,
)
from .variational import (
    ObjectiveValue,
    OptimizerOptions,
    VPReport,
    fullshift_closed_form,
    lower_bound_check,
    objective,
    optimize_markov,
    vp_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
