"""Cryptoeconomic security of restaking graphs versus stand-alone PoS protocols."""

from .division import (
    AugmentedDivision,
    CoverResult,
    DivisionCheck,
    compute_cover_K,
    construct_alpha_augmentation,
    construct_cover_augmentation,
    construct_maxdeg_augmentation,
    construct_sqrt_augmentation,
    induced_protocols,
    proportional_division,
    verify_division,
)
from .errors import (
    CapacityError,
    DegenerateInputError,
    InputError,
    InsecureError,
    PreconditionError,
    RestakingError,
    ValidationError,
)
from .generators import (
    GeneratorSpec,
    gen_poss_lower_family,
    gen_random,
    gen_random_pos,
    gen_rs_lower_family,
    generate,
)
from .model import (
    DivisionPlan,
    PoSInstance,
    Rat,
    RestakingGraph,
    Service,
    StakeVector,
    attack_profit,
    can_attack,
    fmt_rat,
    maximal_attack_set,
    neighborhood,
    to_rat,
    total_stake,
)
from .savings import (
    PoSSReport,
    RSReport,
    aggregate_pos,
    check_stake_value_inequality,
    poss_exact_oracle,
    poss_report,
    poss_upper_construction,
    rs_exact_oracle,
    rs_family_lower_bound,
    rs_family_upper_certificate,
    rs_report,
    rs_upper_bounds,
)
from .security import (
    SecurityVerdict,
    SufficiencyReport,
    Witness,
    is_secure_exact,
    min_attacking_subset,
    pos_is_secure,
    satisfies_sufficient_condition,
)

__version__ = "0.1.0"
