from ._twincher import (
    ContractViolation,
    DomainError,
    ForwardProcess,
    GnConfig,
    HarmonicEntangler,
    SpiralProcess,
    TwincherModel,
    derive_key,
    estimate_complexity,
    mix64,
    refine,
    run_cli,
    run_trial,
    squash,
    unsquash,
)

__all__ = [
    "ContractViolation",
    "DomainError",
    "ForwardProcess",
    "GnConfig",
    "HarmonicEntangler",
    "SpiralProcess",
    "TwincherModel",
    "derive_key",
    "estimate_complexity",
    "mix64",
    "refine",
    "run_cli",
    "run_trial",
    "squash",
    "unsquash",
]
