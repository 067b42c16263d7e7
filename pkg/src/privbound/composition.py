"""Privacy budgets and composition rules for iterative algorithms.

Composing T steps that are individually (eps_i, delta_i)-DP yields an
(eps', delta')-DP guarantee for the whole run.  The composed eps' is the
minimum of three estimates (plain sum, and two advanced-composition forms
driven by a free slack constant delta_tilde); the composed delta' maximizes
a product expression over boundary assignments of per-step exponents.
Alongside the main rules this module carries the classical baselines
(basic sum, Dwork-style advanced composition, and the Kairouz et al.
homogeneous bound) so results can be ranked against them.

All operations are pure functions of their inputs; values are immutable
and safe to share across threads.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import DegenerateBudgetError, InvalidArgumentError
from .numerics import (
    kl_rate,
    one_minus_prod_powers,
    require_finite,
    snapped_ratio_ceil,
    stable_sum,
)

#: Absolute slack (scaled by max(1, eps')) for budget-sum comparisons.
_BUDGET_TOL = 1e-12

#: Largest heterogeneous step count searched exactly; beyond this the
#: delta maximization falls back to a provable upper-bound relaxation.
EXACT_SEARCH_MAX_STEPS = 25

METHODS = (
    "ours-general",
    "ours-homogeneous",
    "ours-moment",
    "kairouz",
    "dwork-basic",
    "dwork-advanced",
)


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair for one mechanism or one composed result."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        eps = require_finite("epsilon", self.epsilon)
        delta = require_finite("delta", self.delta)
        if eps < 0.0:
            raise InvalidArgumentError(f"epsilon must be >= 0, got {eps}")
        if not 0.0 <= delta < 1.0:
            raise InvalidArgumentError(f"delta must be in [0, 1), got {delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class IterationSpec:
    """Ordered per-iteration budgets of a T-step algorithm (T >= 1)."""

    budgets: Tuple[PrivacyBudget, ...]

    def __post_init__(self):
        budgets = tuple(self.budgets)
        if not budgets:
            raise InvalidArgumentError("iteration spec must contain at least one budget")
        for b in budgets:
            if not isinstance(b, PrivacyBudget):
                raise InvalidArgumentError(f"not a PrivacyBudget: {b!r}")
        object.__setattr__(self, "budgets", budgets)

    @classmethod
    def homogeneous(cls, eps: float, delta: float, steps: int) -> "IterationSpec":
        if steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
        return cls((PrivacyBudget(eps, delta),) * int(steps))

    @property
    def steps(self) -> int:
        return len(self.budgets)

    @property
    def epsilons(self) -> Tuple[float, ...]:
        return tuple(b.epsilon for b in self.budgets)

    @property
    def deltas(self) -> Tuple[float, ...]:
        return tuple(b.delta for b in self.budgets)

    def is_homogeneous(self) -> bool:
        first = self.budgets[0]
        return all(b == first for b in self.budgets)


@dataclass(frozen=True)
class SlackParameter:
    """The free constant delta_tilde in (0, 1) trading eps' for delta'."""

    delta_tilde: float

    def __post_init__(self):
        value = require_finite("delta_tilde", self.delta_tilde)
        if not 0.0 < value < 1.0:
            raise InvalidArgumentError(f"delta_tilde must be in (0, 1), got {value}")
        object.__setattr__(self, "delta_tilde", value)


@dataclass(frozen=True)
class EpsilonBreakdown:
    """The three composed-epsilon estimates and which one was chosen."""

    eps1: float
    eps2: float
    eps3: float
    chosen: int
    value: float

    def __post_init__(self):
        candidates = (self.eps1, self.eps2, self.eps3)
        if self.chosen not in (1, 2, 3):
            raise InvalidArgumentError(f"chosen must be 1, 2 or 3, got {self.chosen}")
        if self.value != min(candidates) or candidates[self.chosen - 1] != self.value:
            raise InvalidArgumentError("value must be the minimum estimate at the chosen index")


@dataclass(frozen=True)
class BoundaryAssignment:
    """Per-step exponents alpha_i witnessing a composed-delta value.

    Every alpha_i lies in [0, eps_i] and at most one is strictly interior;
    they sum to the composed epsilon (within _BUDGET_TOL scaling).
    """

    alphas: Tuple[float, ...]


@dataclass(frozen=True)
class CompositionResult:
    composed: PrivacyBudget
    method: str
    slack: SlackParameter
    exact_search: bool
    breakdown: Optional[EpsilonBreakdown] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown method {self.method!r}")


def kl_divergence_bound(epsilon: float) -> float:
    """Largest KL divergence between outputs of an epsilon-DP mechanism
    on neighboring inputs: epsilon * (e^eps - 1) / (e^eps + 1).

    Tight (attained by the two-atom worst-case pair) and strictly below
    the classical eps * (e^eps - 1) / 2 estimate for every eps > 0.
    """
    return kl_rate(epsilon)


def compose_epsilon(spec: IterationSpec, slack: SlackParameter) -> EpsilonBreakdown:
    """Composed epsilon as the minimum of the three advanced estimates.

    eps'_1 is the plain sum; eps'_2 and eps'_3 pay a per-step KL rate plus
    a martingale deviation term controlled by the slack.  Ties pick the
    smallest index for determinism.
    """
    eps = spec.epsilons
    dt = slack.delta_tilde
    sum_eps = stable_sum(eps)
    sum_sq = stable_sum(e * e for e in eps)
    sum_kl = stable_sum(kl_rate(e) for e in eps)
    eps2 = sum_kl + math.sqrt(2.0 * sum_sq * math.log(math.e + math.sqrt(sum_sq) / dt))
    eps3 = sum_kl + math.sqrt(2.0 * math.log(1.0 / dt) * sum_sq)
    candidates = (sum_eps, eps2, eps3)
    value = min(candidates)
    chosen = candidates.index(value) + 1
    return EpsilonBreakdown(eps1=sum_eps, eps2=eps2, eps3=eps3, chosen=chosen, value=value)


def _atom_masses(spec: IterationSpec) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Per-step masses A_i = delta_i / (1 + e^{eps_i}) and e^{eps_i} A_i."""
    low = []
    high = []
    for b in spec.budgets:
        a = b.delta / (1.0 + math.exp(b.epsilon))
        low.append(a)
        high.append(math.exp(b.epsilon) * a)
    return tuple(low), tuple(high)


def _delta_product_value(log_terms: Sequence[float]) -> float:
    """1 - exp(sum of log(1 - x_i)) summed exactly."""
    return -math.expm1(stable_sum(log_terms))


def boundary_delta_max(
    spec: IterationSpec, eps_prime: float
) -> Tuple[float, BoundaryAssignment, bool]:
    """Maximize 1 - prod(1 - e^{alpha_i} A_i) over boundary assignments.

    The exponents satisfy 0 <= alpha_i <= eps_i with sum(alpha) <= eps'
    (the maximum is attained at equality whenever reachable) and at most
    one alpha_i strictly between its bounds; the optimum of the full
    simplex problem lies on this boundary set.

    Returns (max value, witness, exact) where exact is False when the
    documented upper-bound relaxation replaced the exact search.
    """
    eps_prime = require_finite("eps_prime", eps_prime)
    if eps_prime < -_BUDGET_TOL:
        raise InvalidArgumentError(f"eps_prime must be >= 0, got {eps_prime}")
    eps_prime = max(eps_prime, 0.0)
    epsilons = spec.epsilons
    steps = spec.steps
    total_eps = stable_sum(epsilons)
    if eps_prime > total_eps + _BUDGET_TOL * max(1.0, total_eps):
        raise InvalidArgumentError(
            f"eps_prime = {eps_prime} exceeds the summed per-step epsilon {total_eps}"
        )
    low, high = _atom_masses(spec)

    if all(a == 0.0 for a in low):
        return 0.0, BoundaryAssignment(_greedy_fill(epsilons, eps_prime)), True

    if eps_prime >= total_eps - _BUDGET_TOL * max(1.0, total_eps):
        value = _delta_product_value([math.log1p(-x) for x in high])
        return value, BoundaryAssignment(tuple(epsilons)), True

    if spec.is_homogeneous():
        return _boundary_max_homogeneous(spec, eps_prime)

    if steps <= EXACT_SEARCH_MAX_STEPS:
        return _boundary_max_exact(spec, eps_prime, low, high)
    return _boundary_max_relaxed(spec, eps_prime, low)


def _greedy_fill(epsilons: Sequence[float], eps_prime: float) -> Tuple[float, ...]:
    """Any boundary assignment summing to eps_prime (used when the value
    does not depend on the assignment, i.e. all deltas are zero)."""
    alphas = []
    remaining = eps_prime
    for e in epsilons:
        take = min(e, remaining)
        alphas.append(take)
        remaining -= take
    return tuple(alphas)


def _boundary_max_homogeneous(
    spec: IterationSpec, eps_prime: float
) -> Tuple[float, BoundaryAssignment, bool]:
    # All (full-count, fractional) assignments collapse to a single shape:
    # floor(eps'/eps) full steps plus one remainder step.
    eps = spec.budgets[0].epsilon
    delta = spec.budgets[0].delta
    steps = spec.steps
    if eps == 0.0:
        # eps' <= sum eps = 0, so every alpha is zero.
        a = delta / 2.0
        value = one_minus_prod_powers([(a, steps)])
        return value, BoundaryAssignment((0.0,) * steps), True
    ceil_count = snapped_ratio_ceil(eps_prime, eps)
    a = delta / (1.0 + math.exp(eps))
    if ceil_count * eps <= eps_prime + _BUDGET_TOL * max(1.0, eps_prime):
        full = ceil_count
        frac = 0.0
    else:
        full = ceil_count - 1
        frac = eps_prime - full * eps
    log_terms = [full * math.log1p(-math.exp(eps) * a), (steps - full) * math.log1p(-a)]
    alphas = [eps] * full + [0.0] * (steps - full)
    if frac > 0.0:
        log_terms[1] -= math.log1p(-a)
        log_terms.append(math.log1p(-math.exp(frac) * a))
        alphas[full] = frac
    value = -math.expm1(stable_sum(log_terms))
    return value, BoundaryAssignment(tuple(alphas)), True


def _boundary_max_exact(
    spec: IterationSpec,
    eps_prime: float,
    low: Sequence[float],
    high: Sequence[float],
) -> Tuple[float, BoundaryAssignment, bool]:
    """Depth-first enumeration of (full subset, fractional index) pairs.

    Maximizing 1 - exp(sum log(1 - e^{alpha_i} A_i)) means minimizing the
    log sum.  Each index contributes log1p(-A_i) at alpha=0; promoting it
    to full adds gain_i = log1p(-e^{eps_i} A_i) - log1p(-A_i) < 0.  The
    search is a budgeted subset choice (weights eps_i) plus one fractional
    index, pruned with a fractional-knapsack bound (valid because each
    gain is convex in alpha, hence chord-bounded).
    """
    epsilons = spec.epsilons
    steps = spec.steps
    base = [math.log1p(-a) for a in low]
    gain = [math.log1p(-h) - b for h, b in zip(high, base)]
    order = sorted(
        range(steps),
        key=lambda i: (-gain[i] / epsilons[i]) if epsilons[i] > 0 else 0.0,
        reverse=True,
    )
    tol = _BUDGET_TOL * max(1.0, eps_prime)

    def frac_gain(i: int, alpha: float) -> float:
        if alpha <= 0.0:
            return 0.0
        if alpha >= epsilons[i]:
            return gain[i]
        return math.log1p(-math.exp(alpha) * low[i]) - base[i]

    def knapsack_bound(pos: int, budget: float, in_full) -> float:
        # Optimistic bound (more negative = better) on extra gain from this
        # node, via the linear chord relaxation of each convex gain.
        # Undecided indices (order[pos:]) may still go full; an
        # already-skipped index may still serve as the single fractional
        # one, so the best skipped chord is granted the leftover budget on
        # top.  The double-counted budget only loosens the bound, which
        # keeps the prune sound.
        bound = 0.0
        remaining = budget
        for i in order[pos:]:
            if remaining <= 0.0:
                break
            e = epsilons[i]
            if e <= 0.0 or gain[i] == 0.0:
                continue
            take = min(e, remaining)
            bound += gain[i] * (take / e)
            remaining -= take
        skipped_extra = 0.0
        for i in order[:pos]:
            if in_full[i] or epsilons[i] <= 0.0:
                continue
            chord = gain[i] * (min(epsilons[i], budget) / epsilons[i])
            skipped_extra = min(skipped_extra, chord)
        return bound + skipped_extra

    best = {"value": math.inf, "full": (), "frac": None}

    def close(full_set, used):
        remaining = eps_prime - used
        total = sum(gain[i] for i in full_set)
        frac_choice = None
        if remaining > tol:
            extra = 0.0
            members = set(full_set)
            for j in range(steps):
                if j in members:
                    continue
                g = frac_gain(j, min(epsilons[j], remaining))
                if g < extra:
                    extra = g
                    frac_choice = (j, min(epsilons[j], remaining))
            total += extra
        if total < best["value"]:
            best["value"] = total
            best["full"] = tuple(full_set)
            best["frac"] = frac_choice

    in_full = [False] * steps

    def dfs(pos: int, used: float, acc: float, full_set):
        close(full_set, used)
        if pos == steps:
            return
        if acc + knapsack_bound(pos, eps_prime - used, in_full) >= best["value"]:
            return
        i = order[pos]
        if used + epsilons[i] <= eps_prime + tol:
            full_set.append(i)
            in_full[i] = True
            dfs(pos + 1, used + epsilons[i], acc + gain[i], full_set)
            in_full[i] = False
            full_set.pop()
        dfs(pos + 1, used, acc, full_set)

    dfs(0, 0.0, 0.0, [])

    log_sum = stable_sum(base) + best["value"]
    alphas = [0.0] * steps
    for i in best["full"]:
        alphas[i] = epsilons[i]
    if best["frac"] is not None:
        j, alpha = best["frac"]
        alphas[j] = alpha
    return -math.expm1(log_sum), BoundaryAssignment(tuple(alphas)), True


def _boundary_max_relaxed(
    spec: IterationSpec, eps_prime: float, low: Sequence[float]
) -> Tuple[float, BoundaryAssignment, bool]:
    """Provable upper bound for large heterogeneous step counts.

    Uses 1 - prod(1 - x_i) <= sum x_i, then bounds sum e^{alpha_i} A_i by
    the fractional knapsack on the chord rates A_i (e^{eps_i} - 1)/eps_i.
    The result can only overstate delta', so released budgets stay sound.
    """
    epsilons = spec.epsilons
    rates = [
        (a * math.expm1(e) / e if e > 0.0 else 0.0) for a, e in zip(low, epsilons)
    ]
    order = sorted(range(spec.steps), key=lambda i: rates[i], reverse=True)
    alphas = [0.0] * spec.steps
    remaining = eps_prime
    linear_gain = 0.0
    for i in order:
        if remaining <= 0.0:
            break
        take = min(epsilons[i], remaining)
        alphas[i] = take
        linear_gain += take * rates[i]
        remaining -= take
    value = min(1.0, stable_sum(low) + linear_gain)
    return value, BoundaryAssignment(tuple(alphas)), False


def compose_delta(
    spec: IterationSpec, eps_prime: float, slack: SlackParameter
) -> Tuple[float, BoundaryAssignment, bool]:
    """Composed delta at a given composed epsilon.

    delta' = max over boundary assignments of
             [1 - prod(1 - e^{alpha_i} A_i)] + [1 - prod(1 - A_i)] + delta_tilde
    with A_i = delta_i / (1 + e^{eps_i}).  Raises DegenerateBudgetError when
    the result reaches 1.
    """
    first, witness, exact = boundary_delta_max(spec, eps_prime)
    low, _ = _atom_masses(spec)
    second = _delta_product_value([math.log1p(-a) for a in low])
    delta_prime = first + second + slack.delta_tilde
    if delta_prime >= 1.0:
        raise DegenerateBudgetError(
            f"composed delta {delta_prime} >= 1; the budget is vacuous"
        )
    return delta_prime, witness, exact


def homogeneous_delta(
    eps: float, delta: float, steps: int, eps_prime: float, tail: float
) -> float:
    """Closed-form composed delta for T identical (eps, delta) steps.

    Rounds the fractional boundary index up to a full one (exponent
    ceil(eps'/eps) on the heavy factor), evaluated entirely through the
    stable product primitive.  ``tail`` is the additive slack term
    (delta_tilde, or the moment bound's delta'').
    """
    if eps <= 0.0:
        raise InvalidArgumentError(f"eps must be > 0, got {eps}")
    full = snapped_ratio_ceil(eps_prime, eps)
    full = min(max(full, 0), steps)
    a = delta / (1.0 + math.exp(eps))
    first = one_minus_prod_powers([(math.exp(eps) * a, full), (a, steps - full)])
    second = one_minus_prod_powers([(a, steps)])
    return first + second + tail


def moment_epsilon(eps: float, steps: int, slack: SlackParameter) -> float:
    """Composed epsilon of the moment-generating-function estimate."""
    return steps * kl_rate(eps) + math.sqrt(
        2.0 * math.log(1.0 / slack.delta_tilde) * steps * eps * eps
    )


def moment_slack(eps: float, steps: int, eps_prime: float) -> float:
    """The optimized-MGF tail delta'' replacing delta_tilde in moment mode.

    Exact Chernoff value min over t > 0 of e^{-eps' t} E[e^{t S}] for the
    T-fold two-point privacy loss (+eps w.p. e^eps/(1+e^eps), else -eps),
    evaluated at its closed-form minimizer.  The leading exponential is
    e^{+(eps'+T eps)/2}: with a negative sign the expression drops below
    the true tail probability and stops being a bound.  Requires
    T * kl_rate(eps) < eps' < T * eps; evaluated in log space because the
    value routinely sits hundreds of orders below 1.
    """
    total = steps * eps
    if not steps * kl_rate(eps) < eps_prime < total:
        raise InvalidArgumentError(
            f"eps_prime = {eps_prime} outside the open interval "
            f"({steps * kl_rate(eps)}, {total}) required by the moment bound"
        )
    log_value = (
        (eps_prime + total) / 2.0
        + steps * (math.log(2.0 * total / (total - eps_prime)) - math.log1p(math.exp(eps)))
        - (eps_prime + total) / (2.0 * eps) * math.log((total + eps_prime) / (total - eps_prime))
    )
    return math.exp(log_value)


def compose_homogeneous(
    eps: float,
    delta: float,
    steps: int,
    slack: SlackParameter,
    mode: str = "closed-form",
) -> CompositionResult:
    """Compose T identical (eps, delta)-DP steps.

    mode "closed-form" uses the minimum-of-three epsilon and the closed
    product form for delta'.  mode "moment" tightens the tail term via the
    optimized moment bound; when its eps' would reach T * eps the result
    is demoted to exact basic composition (method tag "dwork-basic",
    delta'' = 0), the mathematically correct limit.
    """
    if eps <= 0.0:
        raise InvalidArgumentError(f"eps must be > 0, got {eps}")
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    budget = PrivacyBudget(eps, delta)  # validates ranges
    if mode == "closed-form":
        breakdown = compose_epsilon(IterationSpec.homogeneous(eps, delta, steps), slack)
        delta_prime = homogeneous_delta(eps, delta, steps, breakdown.value, slack.delta_tilde)
        if delta_prime >= 1.0:
            raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
        return CompositionResult(
            composed=PrivacyBudget(breakdown.value, delta_prime),
            method="ours-homogeneous",
            slack=slack,
            exact_search=True,
            breakdown=breakdown,
        )
    if mode == "moment":
        eps_prime = moment_epsilon(eps, steps, slack)
        total = steps * eps
        if eps_prime >= total * (1.0 - 1e-12):
            delta_prime = steps * budget.delta
            if delta_prime >= 1.0:
                raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
            return CompositionResult(
                composed=PrivacyBudget(total, delta_prime),
                method="dwork-basic",
                slack=slack,
                exact_search=True,
                breakdown=None,
            )
        tail = moment_slack(eps, steps, eps_prime)
        delta_prime = homogeneous_delta(eps, delta, steps, eps_prime, tail)
        if delta_prime >= 1.0:
            raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
        return CompositionResult(
            composed=PrivacyBudget(eps_prime, delta_prime),
            method="ours-moment",
            slack=slack,
            exact_search=True,
            breakdown=None,
        )
    raise InvalidArgumentError(f"unknown mode {mode!r}; expected 'closed-form' or 'moment'")


def compose_iterations(spec: IterationSpec, slack: SlackParameter) -> CompositionResult:
    """General heterogeneous composition: min-of-three epsilon plus the
    boundary-maximized delta."""
    breakdown = compose_epsilon(spec, slack)
    delta_prime, _, exact = compose_delta(spec, breakdown.value, slack)
    return CompositionResult(
        composed=PrivacyBudget(breakdown.value, delta_prime),
        method="ours-general",
        slack=slack,
        exact_search=exact,
        breakdown=breakdown,
    )


def compose_baseline(
    spec: IterationSpec, slack: SlackParameter, method: str
) -> CompositionResult:
    """Classical composition baselines for comparison.

    "dwork-basic" sums the budgets.  "dwork-advanced" is the classical
    advanced composition.  "kairouz" is the tight homogeneous bound of
    Kairouz et al. (same eps' estimates as ours, multiplicative delta');
    it rejects heterogeneous specs.
    """
    dt = slack.delta_tilde
    eps = spec.epsilons
    deltas = spec.deltas
    if method == "dwork-basic":
        delta_prime = stable_sum(deltas)
        if delta_prime >= 1.0:
            raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
        result = PrivacyBudget(stable_sum(eps), delta_prime)
        return CompositionResult(result, "dwork-basic", slack, True, None)
    if method == "dwork-advanced":
        eps_prime = stable_sum(e * math.expm1(e) for e in eps) + math.sqrt(
            2.0 * math.log(1.0 / dt) * stable_sum(e * e for e in eps)
        )
        delta_prime = dt + stable_sum(deltas)
        if delta_prime >= 1.0:
            raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
        return CompositionResult(
            PrivacyBudget(eps_prime, delta_prime), "dwork-advanced", slack, True, None
        )
    if method == "kairouz":
        if not spec.is_homogeneous():
            raise InvalidArgumentError("the kairouz baseline requires a homogeneous spec")
        breakdown = compose_epsilon(spec, slack)
        delta = deltas[0]
        delta_prime = one_minus_prod_powers([(delta, spec.steps), (dt, 1)])
        if delta_prime >= 1.0:
            raise DegenerateBudgetError(f"composed delta {delta_prime} >= 1")
        return CompositionResult(
            PrivacyBudget(breakdown.value, delta_prime), "kairouz", slack, True, breakdown
        )
    raise InvalidArgumentError(
        f"unknown baseline {method!r}; expected kairouz, dwork-basic or dwork-advanced"
    )
