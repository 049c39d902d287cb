"""Dense float64 math, reverse-mode autodiff, optimizers and the PRNG."""
from .autodiff import Tape, TapeError, Var, backward
from .functional import (
    GradCheckReport,
    entropy,
    entropy_from_logp,
    grad_check,
    log_softmax,
    mlp_forward,
    softmax,
)
from .optim import NonFiniteGradient, OptimizerState, adam_step, rmsprop_step
from .prng import Prng, SplitMix64

__all__ = [
    "GradCheckReport", "NonFiniteGradient", "OptimizerState", "Prng", "SplitMix64",
    "Tape", "TapeError", "Var", "adam_step", "backward", "entropy", "entropy_from_logp",
    "grad_check", "log_softmax", "mlp_forward", "rmsprop_step", "softmax",
]
