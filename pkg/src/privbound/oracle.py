"""Exact brute-force verification of composed budgets.

The worst case for composing (eps, delta)-DP mechanisms is a pair of
four-atom distributions: atom 0 carries the delta mass one-sidedly, atoms
1 and 2 carry the e^{eps} likelihood ratio, atom 3 mirrors atom 0.  The
exact composed delta of T independent copies is the hockey-stick
divergence of the T-fold product, computed here by aggregating outcome
sequences into multinomial type classes (polynomial in T instead of 4^T).

Every reported value from the composition module must dominate the exact
value computed here; that is the library's central soundness check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Tuple

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgumentError, ResourceLimitError
from .numerics import stable_sum

#: Type-class enumeration cap; the class count grows polynomially in the
#: step count and becomes impractical beyond this.
MAX_ORACLE_STEPS = 10_000

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class AtomicMechanismPair:
    """Worst-case four-atom distribution pair (p1 is p0 reversed).

    The plain variant puts mass delta on an atom where the other
    distribution has none; the tilde variant redistributes that mass so
    both supports coincide, at statistical distance delta / (1 + e^eps)
    from the plain pair.

    ``log_ratios`` holds the per-atom privacy loss log(p0[a] / p1[a]) in
    closed form (+/- eps, or infinite on one-sided atoms); supplying it
    exactly keeps threshold comparisons in the product oracle free of the
    round-off that log(p0) - log(p1) would introduce.
    """

    p0: Tuple[float, float, float, float]
    p1: Tuple[float, float, float, float]
    variant: str
    log_ratios: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        for name, masses in (("p0", self.p0), ("p1", self.p1)):
            if len(masses) != 4 or any(m < 0.0 for m in masses):
                raise InvalidArgumentError(f"{name} must be 4 nonnegative masses")
            if abs(stable_sum(masses) - 1.0) > 1e-15:
                raise InvalidArgumentError(f"{name} masses must sum to 1")
        if self.variant not in ("plain", "tilde"):
            raise InvalidArgumentError(f"unknown variant {self.variant!r}")

    def atom_log_ratio(self, atom: int) -> float:
        if self.log_ratios is not None:
            return self.log_ratios[atom]
        if self.p1[atom] > 0.0:
            return math.log(self.p0[atom]) - math.log(self.p1[atom])
        return math.inf


def worst_case_pair(eps: float, delta: float = 0.0, variant: str = "plain") -> AtomicMechanismPair:
    """Builds the extremal (eps, delta)-DP mechanism pair."""
    if not eps > 0.0 or not math.isfinite(eps):
        raise InvalidArgumentError(f"eps must be finite and > 0, got {eps}")
    if not 0.0 <= delta < 1.0:
        raise InvalidArgumentError(f"delta must be in [0, 1), got {delta}")
    heavy = (1.0 - delta) * math.exp(eps) / (1.0 + math.exp(eps))
    light = (1.0 - delta) / (1.0 + math.exp(eps))
    if variant == "plain":
        p0 = (delta, heavy, light, 0.0)
        ratios = (math.inf, eps, -eps, -math.inf)
    elif variant == "tilde":
        edge = delta / (1.0 + math.exp(eps))
        p0 = (math.exp(eps) * edge, heavy, light, edge)
        ratios = (eps, eps, -eps, -eps)
    else:
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    p1 = tuple(reversed(p0))
    return AtomicMechanismPair(p0=p0, p1=p1, variant=variant, log_ratios=ratios)


def statistical_distance(p, q) -> float:
    """max_S |P(S) - Q(S)| over events = half the L1 distance."""
    return 0.5 * stable_sum(abs(a - b) for a, b in zip(p, q))


def approx_max_divergence(p, q, delta: float = 0.0) -> float:
    """Exact delta-approximate max divergence between two finite
    distributions, by enumerating all events with P(S) >= delta."""
    n = len(p)
    best = -math.inf
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            mass_p = stable_sum(p[i] for i in subset)
            mass_q = stable_sum(q[i] for i in subset)
            if mass_p < delta:
                continue
            numerator = mass_p - delta
            if numerator <= 0.0:
                continue
            if mass_q == 0.0:
                return math.inf
            best = max(best, math.log(numerator / mass_q))
    return best


def kl_oracle(pair: AtomicMechanismPair) -> float:
    """Numeric KL divergence sum p0 log(p0 / p1) over supported atoms.

    Requires the supports to be compatible (every atom with p0 mass also
    has p1 mass); the plain pair with delta > 0 is not, and errors.
    """
    terms = []
    for a, b in zip(pair.p0, pair.p1):
        if a == 0.0:
            continue
        if b == 0.0:
            raise InvalidArgumentError(
                "support mismatch: p0 places mass where p1 has none, KL diverges"
            )
        terms.append(a * (math.log(a) - math.log(b)))
    return stable_sum(terms)


def _type_class_contributions(pair: AtomicMechanismPair, steps: int, eps_prime: float):
    """Linear-space hockey-stick contributions per multinomial type class.

    Classes containing an atom with zero p0 mass contribute nothing and
    are skipped wholesale; classes hitting a zero p1 mass contribute their
    full p0 probability.  Underflowed contributions vanish harmlessly
    (they are hundreds of orders below any delta of interest).
    """
    support = [a for a in range(4) if pair.p0[a] > 0.0]
    log_p0 = {a: math.log(pair.p0[a]) for a in support}
    ratios = {a: pair.atom_log_ratio(a) for a in support}
    log_fact = [math.lgamma(i + 1) for i in range(steps + 1)]

    def counts_iter(remaining, atoms):
        if len(atoms) == 1:
            yield (remaining,)
            return
        head, *tail = atoms
        for c in range(remaining + 1):
            for rest in counts_iter(remaining - c, tail):
                yield (c,) + rest

    contributions = []
    for counts in counts_iter(steps, support):
        # class privacy loss from the exact per-atom ratios; a class hitting
        # a one-sided atom (p1 mass zero) always contributes its full mass
        used = [(c, a) for c, a in zip(counts, support) if c > 0]
        if any(ratios[a] == math.inf for _, a in used):
            loss = math.inf
        else:
            loss = stable_sum(c * ratios[a] for c, a in used)
        if not loss > eps_prime:
            continue
        log_mult = log_fact[steps] - stable_sum(log_fact[c] for c in counts)
        lp0 = log_mult + stable_sum(c * log_p0[a] for c, a in used)
        if loss == math.inf:
            # Single-atom classes go through pow for an exactly-rounded
            # probability (matters when T = 1 turns dominance into equality).
            if len(used) == 1:
                contributions.append(pair.p0[used[0][1]] ** steps)
            else:
                contributions.append(math.exp(lp0))
        else:
            contributions.append(math.exp(lp0) * -math.expm1(eps_prime - loss))
    return contributions


def hockey_stick_product(pair: AtomicMechanismPair, steps: int, eps_prime: float) -> float:
    """Exact hockey-stick divergence of the T-fold product pair at eps'.

    This is the smallest delta for which the product is (eps', delta)-DP;
    sum over outcomes of max(0, P0 - e^{eps'} P1), grouped by type class.
    """
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    if steps > MAX_ORACLE_STEPS:
        raise ResourceLimitError(
            f"steps = {steps} exceeds the type-class enumeration cap {MAX_ORACLE_STEPS}"
        )
    if not math.isfinite(eps_prime) or eps_prime < 0.0:
        raise InvalidArgumentError(f"eps_prime must be finite and >= 0, got {eps_prime}")
    return min(1.0, stable_sum(_type_class_contributions(pair, steps, eps_prime)))


def exact_composed_delta(eps: float, delta: float, steps: int, eps_prime: float) -> float:
    """Exact optimal composed delta of T worst-case (eps, delta)-DP steps."""
    return hockey_stick_product(worst_case_pair(eps, delta, "plain"), steps, eps_prime)


def exact_optimal_epsilon(
    eps: float, delta: float, steps: int, target_delta: float
) -> Tuple[float, bool]:
    """Smallest eps' whose exact composed delta meets target_delta.

    Bisection on [0, T * eps] against the nonincreasing hockey-stick curve,
    to absolute tolerance 1e-10 in the delta value.  Targets below the
    floor value at T * eps are unreachable; (T * eps, True) is returned.
    """
    if not 0.0 < target_delta < 1.0:
        raise InvalidArgumentError(f"target_delta must be in (0, 1), got {target_delta}")
    pair = worst_case_pair(eps, delta, "plain")
    hi = steps * eps
    floor_value = hockey_stick_product(pair, steps, hi)
    if target_delta < floor_value - 1e-10:
        return hi, True
    if hockey_stick_product(pair, steps, 0.0) <= target_delta:
        return 0.0, False
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = hockey_stick_product(pair, steps, mid)
        if abs(value - target_delta) <= 1e-10:
            return mid, False
        if value > target_delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi, False


def gaussian_loss_tail(
    sigma: float,
    shift_norm: float,
    eps_threshold: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> float:
    """Monte-Carlo estimate of P[(2 g'v + |v|^2) / (2 sigma^2) > threshold]
    for g ~ N(0, sigma^2 I) and a fixed vector v of norm shift_norm.

    Only the projection g'v ~ N(0, shift_norm^2 sigma^2) matters, so one
    standard normal is drawn per trial.  Trial i consumes exactly the i-th
    output of a counter-based Philox stream keyed by the seed, so the
    estimate is bit-identical for any worker count.
    """
    if sigma <= 0.0 or shift_norm <= 0.0:
        raise InvalidArgumentError("sigma and shift_norm must be positive")
    if trials < 10_000:
        raise InvalidArgumentError(f"trials must be >= 10000, got {trials}")
    if workers < 1:
        raise InvalidArgumentError(f"workers must be >= 1, got {workers}")

    key = int(seed) & _MASK64
    # chunk starts sit on 4-output Philox block boundaries: advance() moves
    # the counter in whole blocks, so every chunk is an exact slice of the
    # single-stream output and the count is worker-count invariant
    bounds = [min(trials, 4 * ((trials * w) // workers // 4)) for w in range(workers)]
    bounds.append(trials)

    def count_chunk(start: int, stop: int) -> int:
        if stop <= start:
            return 0
        bit_gen = np.random.Philox(key=key)
        bit_gen.advance(start // 4)
        uniforms = np.random.Generator(bit_gen).random(stop - start)
        z = ndtri(uniforms)
        loss = (2.0 * shift_norm * sigma * z + shift_norm * shift_norm) / (2.0 * sigma * sigma)
        return int(np.count_nonzero(loss > eps_threshold))

    if workers == 1:
        exceed = count_chunk(0, trials)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda w: count_chunk(bounds[w], bounds[w + 1]), range(workers)))
        exceed = sum(counts)
    return exceed / trials
