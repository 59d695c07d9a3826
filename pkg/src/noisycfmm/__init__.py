"""Deterministic laboratory for constant function market makers that mask
trade sizes with zero-mean noise, price the fee that makes the masking
incentive-neutral, and check the personalized local differential privacy
guarantee of the masking mechanism."""

from .curve import Family, TradingCurve, integral_price_quadrature
from .errors import (
    ConfigError,
    DistributionShapeError,
    DomainError,
    HiddenAccountError,
    InfeasibleBiasError,
    MisalignedSupportError,
    NoisyCfmmError,
    NonZeroMeanError,
    NoSolutionError,
    OptimizationError,
    SpecViolationError,
)
from .fee import (
    FeeMethod,
    FeeQuote,
    fee_liquidity_ratio,
    noise_fee,
    noise_fee_closed_form,
)
from .harness import (
    EXPECTATIONS,
    STRATEGY_KINDS,
    Z99,
    ExcessProfitResult,
    ExperimentConfig,
    LPNoiseProblem,
    NoiseConfig,
    NoiseLPSolution,
    NoiseSolutionCheck,
    ScalingRow,
    ScalingStudyResult,
    StrategyConfig,
    WitnessCandidate,
    WitnessScanResult,
    check_expectation,
    estimate_excess_profit,
    factor2_grid,
    liquidity_scaling_study,
    make_random_policy,
    optimize_noise_lp,
    policy_rng,
    replica_rng,
    reproduce_deviation_theorem,
    run_strategy_once,
    validate_lp_solution,
)
from .market import (
    TRADE_LOG_COLUMNS,
    ExternalMarket,
    FeePolicy,
    FeePolicyKind,
    MarketState,
    TradeRecord,
    eavesdrop_infer,
    execute_trade,
    support_check,
    trade_log_from_csv,
    trade_log_to_csv,
    trade_log_to_jsonl,
)
from .privacy import (
    EPSILON_FLOOR,
    NoiseAtom,
    NoiseDistribution,
    PLDPReport,
    PrivacySpec,
    biased_binary,
    biased_factory,
    binary_mechanism,
    verify_pldp,
)
from .strategies import (
    DEFAULT_MAX_ROUNDS,
    AdaptivePolicy,
    ExternalFlow,
    StrategyTrace,
    case1_deviation,
    case2_deviation,
    noise_chasing_strategy,
    run_adaptive,
    trace_to_csv,
    trace_to_json,
    truthful_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptivePolicy",
    "ConfigError",
    "DEFAULT_MAX_ROUNDS",
    "DistributionShapeError",
    "DomainError",
    "EPSILON_FLOOR",
    "EXPECTATIONS",
    "ExcessProfitResult",
    "ExperimentConfig",
    "ExternalFlow",
    "ExternalMarket",
    "Family",
    "FeeMethod",
    "FeePolicy",
    "FeePolicyKind",
    "FeeQuote",
    "HiddenAccountError",
    "InfeasibleBiasError",
    "LPNoiseProblem",
    "MarketState",
    "MisalignedSupportError",
    "NoiseAtom",
    "NoiseConfig",
    "NoiseDistribution",
    "NoiseLPSolution",
    "NoiseSolutionCheck",
    "NoisyCfmmError",
    "NonZeroMeanError",
    "NoSolutionError",
    "OptimizationError",
    "PLDPReport",
    "PrivacySpec",
    "ScalingRow",
    "ScalingStudyResult",
    "SpecViolationError",
    "StrategyConfig",
    "StrategyTrace",
    "STRATEGY_KINDS",
    "TRADE_LOG_COLUMNS",
    "TradeRecord",
    "TradingCurve",
    "WitnessCandidate",
    "WitnessScanResult",
    "Z99",
    "biased_binary",
    "biased_factory",
    "binary_mechanism",
    "case1_deviation",
    "case2_deviation",
    "check_expectation",
    "eavesdrop_infer",
    "estimate_excess_profit",
    "execute_trade",
    "factor2_grid",
    "fee_liquidity_ratio",
    "integral_price_quadrature",
    "liquidity_scaling_study",
    "make_random_policy",
    "noise_chasing_strategy",
    "noise_fee",
    "noise_fee_closed_form",
    "optimize_noise_lp",
    "policy_rng",
    "replica_rng",
    "reproduce_deviation_theorem",
    "run_adaptive",
    "run_strategy_once",
    "support_check",
    "trace_to_csv",
    "trace_to_json",
    "trade_log_from_csv",
    "trade_log_to_csv",
    "trade_log_to_jsonl",
    "truthful_strategy",
    "validate_lp_solution",
    "verify_pldp",
]
