"""End-to-end privacy accountants for noisy-gradient training schemes.

Both accountants follow the same pipeline: a per-step budget for the
noisy batch-gradient release, privacy amplification by uniform
subsampling (factor 2 tau / N on epsilon, tau / N on delta), moment-mode
composition over T steps, and the induced generalization bound when its
preconditions hold.

The per-step epsilon formulas are reported exactly as stated by the
source theorems.  Their derivation bounds the privacy loss through the
event {g'v <= 2 sqrt(2) L sigma sqrt(log(1/delta))} (probability >=
1 - delta), whose loss threshold is what ``loss_tail_threshold`` returns;
note the stated eps-tilde carries half that dot-product term, so tail
checks must use the event threshold, not eps-tilde.  Both values are
exposed for audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .composition import CompositionResult, PrivacyBudget, SlackParameter, compose_homogeneous
from .errors import InvalidArgumentError
from .generalization import GeneralizationBound, high_probability_bound, min_sample_size
from .numerics import smallest_int_above

#: Machine-readable reasons for a missing generalization bound.
REASON_EPSILON_TOO_LARGE = "composed-epsilon-at-least-2"
REASON_SAMPLE_TOO_SMALL = "sample-size-below-threshold"
REASON_DELTA_ZERO = "composed-delta-not-positive"


@dataclass(frozen=True)
class SgldConfig:
    """Inputs of the noisy subsampled-gradient (Langevin) training loop.

    ``lipschitz`` bounds each per-example loss gradient; features must be
    clipped accordingly for the certificate to hold.  Step sizes do not
    enter the privacy computation (the analysis is invariant to the
    outer rescaling); they are carried for the simulator.
    """

    lipschitz: float
    sigma: float
    tau: int
    n_samples: int
    steps: int
    step_sizes: Tuple[float, ...]
    per_step_delta: float

    def __post_init__(self):
        # sigma = 0 and zero step sizes are legal for pure simulation
        # (no-op sanity runs); the accountant itself rejects sigma <= 0.
        if self.lipschitz <= 0.0 or self.sigma < 0.0:
            raise InvalidArgumentError("lipschitz must be positive and sigma nonnegative")
        if self.tau < 1 or self.n_samples < 1 or self.tau > self.n_samples:
            raise InvalidArgumentError(
                f"need 1 <= tau <= n_samples, got tau={self.tau}, n={self.n_samples}"
            )
        if self.steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {self.steps}")
        sizes = tuple(float(s) for s in self.step_sizes)
        if len(sizes) != self.steps or any(s < 0.0 for s in sizes):
            raise InvalidArgumentError("step_sizes must hold one nonnegative value per step")
        if not 0.0 < self.per_step_delta < 1.0:
            raise InvalidArgumentError("per_step_delta must be in (0, 1)")
        object.__setattr__(self, "step_sizes", sizes)

    @classmethod
    def with_constant_step(cls, lipschitz, sigma, tau, n_samples, steps,
                           per_step_delta, step_size=None):
        if step_size is None:
            step_size = 0.1 / tau
        return cls(lipschitz, sigma, tau, n_samples, steps,
                   (step_size,) * steps, per_step_delta)


@dataclass(frozen=True)
class FedConfig:
    """Inputs of the differentially private federated averaging loop."""

    num_clients: int
    tau: int
    sigma: float
    clip_bound: float
    steps: int
    per_step_delta: float

    def __post_init__(self):
        if self.sigma < 0.0 or self.clip_bound <= 0.0:
            raise InvalidArgumentError("clip_bound must be positive and sigma nonnegative")
        if self.tau < 1 or self.num_clients < 1 or self.tau > self.num_clients:
            raise InvalidArgumentError(
                f"need 1 <= tau <= num_clients, got tau={self.tau}, "
                f"clients={self.num_clients}"
            )
        if self.steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 < self.per_step_delta < 1.0:
            raise InvalidArgumentError("per_step_delta must be in (0, 1)")


@dataclass(frozen=True)
class AccountantReport:
    """Pre-subsampling step epsilon, amplified step budget, composed budget,
    and the generalization bound (absent with a machine-readable reason)."""

    eps_tilde: float
    step_budget: PrivacyBudget
    composed: CompositionResult
    generalization: Optional[GeneralizationBound]
    skipped_reason: Optional[str] = None


def sgld_per_step_epsilon(lipschitz: float, sigma: float, tau: int, delta: float) -> float:
    """Stated per-step epsilon of the noisy batch gradient (before
    subsampling): (2 sqrt(2) L sigma sqrt(log(1/delta)) / tau
    + 4 L^2 / tau^2) / (2 sigma^2)."""
    if lipschitz <= 0.0 or sigma <= 0.0 or tau < 1 or not 0.0 < delta < 1.0:
        raise InvalidArgumentError("invalid per-step epsilon inputs")
    c = math.log(1.0 / delta)
    return (
        2.0 * math.sqrt(2.0) * lipschitz * sigma * math.sqrt(c) / tau
        + 4.0 * lipschitz * lipschitz / (tau * tau)
    ) / (2.0 * sigma * sigma)


def fed_per_step_epsilon(sigma: float, tau: int, delta: float) -> float:
    """Stated per-step epsilon of the clipped, noised client average:
    (4 sigma sqrt(log(1/delta)) / tau + 1 / tau^2) / (2 sigma^2)."""
    if sigma <= 0.0 or tau < 1 or not 0.0 < delta < 1.0:
        raise InvalidArgumentError("invalid per-step epsilon inputs")
    c = math.log(1.0 / delta)
    return (4.0 * sigma * math.sqrt(c) / tau + 1.0 / (tau * tau)) / (2.0 * sigma * sigma)


def loss_tail_threshold(lipschitz: float, sigma: float, delta: float, tau: int = 1) -> float:
    """Privacy-loss level exceeded with probability at most delta.

    The worst-case gradient shift has norm 2 L / tau and its Gaussian
    projection stays below 2 sqrt(2) L sigma sqrt(log(1/delta)) except
    with probability delta, so the loss (2 g'v + |v|^2) / (2 sigma^2)
    stays below this value.  This is the threshold the Monte-Carlo tail
    check must use (the stated per-step epsilon halves the dot term).
    """
    if lipschitz <= 0.0 or sigma <= 0.0 or tau < 1 or not 0.0 < delta < 1.0:
        raise InvalidArgumentError("invalid tail threshold inputs")
    c = math.log(1.0 / delta)
    return (
        4.0 * math.sqrt(2.0) * lipschitz * sigma * math.sqrt(c) / tau
        + 4.0 * lipschitz * lipschitz / (tau * tau)
    ) / (2.0 * sigma * sigma)


def _compose_and_bound(
    eps_tilde: float,
    sampling_rate: float,
    per_step_delta: float,
    steps: int,
    population: int,
    slack: SlackParameter,
) -> AccountantReport:
    step_budget = PrivacyBudget(
        2.0 * sampling_rate * eps_tilde, sampling_rate * per_step_delta
    )
    composed = compose_homogeneous(
        step_budget.epsilon, step_budget.delta, steps, slack, mode="moment"
    )
    bound = None
    reason = None
    if composed.composed.epsilon >= 2.0:
        reason = REASON_EPSILON_TOO_LARGE
    elif composed.composed.delta <= 0.0:
        reason = REASON_DELTA_ZERO
    elif population < min_sample_size(composed.composed):
        reason = REASON_SAMPLE_TOO_SMALL
    else:
        bound = high_probability_bound(composed.composed, population)
    return AccountantReport(
        eps_tilde=eps_tilde,
        step_budget=step_budget,
        composed=composed,
        generalization=bound,
        skipped_reason=reason,
    )


def sgld_accountant(config: SgldConfig, slack: SlackParameter) -> AccountantReport:
    """Privacy and generalization accounting for the Langevin loop."""
    eps_tilde = sgld_per_step_epsilon(
        config.lipschitz, config.sigma, config.tau, config.per_step_delta
    )
    return _compose_and_bound(
        eps_tilde,
        config.tau / config.n_samples,
        config.per_step_delta,
        config.steps,
        config.n_samples,
        slack,
    )


def fed_accountant(config: FedConfig, slack: SlackParameter) -> AccountantReport:
    """Privacy and generalization accounting for the federated loop.

    Clipping guarantees every aggregated client update has norm at most
    the clip bound before noising, so the per-step epsilon certificate
    holds regardless of what the local update computes.
    """
    eps_tilde = fed_per_step_epsilon(config.sigma, config.tau, config.per_step_delta)
    return _compose_and_bound(
        eps_tilde,
        config.tau / config.num_clients,
        config.per_step_delta,
        config.steps,
        config.num_clients,
        slack,
    )


def free_privacy_threshold(eps: float, delta: float, n: int, tau: int) -> int:
    """Smallest iteration count strictly exceeding eps^2 N / (32 tau log(2/delta)),
    past which the un-noised subsampled scheme is already (eps, delta)-DP."""
    if eps <= 0.0 or n < 1 or tau < 1:
        raise InvalidArgumentError("eps, n and tau must be positive")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must be in (0, 1), got {delta}")
    bound = eps * eps * n / (32.0 * tau * math.log(2.0 / delta))
    return max(1, smallest_int_above(bound))
