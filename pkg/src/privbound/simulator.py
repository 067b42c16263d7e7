"""Desk-scale training simulations checking the bounds empirically.

Runs the noisy subsampled-gradient loop and the clipped federated loop on
synthetic two-cluster data with a [0, 1]-bounded surrogate loss, then
measures the train/test risk gap against the theoretical threshold.

Determinism contract: every random quantity comes from a counter-based
Philox generator keyed by (seed, stream index), so traces and experiment
summaries are bit-identical across runs and across worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .accountants import SgldConfig, FedConfig, sgld_accountant
from .composition import SlackParameter
from .errors import DivergenceError, InvalidArgumentError, PreconditionError
from .generalization import min_sample_size

_MASK64 = (1 << 64) - 1


def _generator(seed: int, stream: int) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SyntheticDataset:
    """Two-Gaussian-cluster binary classification data with a held-out
    test split drawn i.i.d. from the same generator."""

    features: np.ndarray
    labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    generator_spec: Dict[str, float]

    @property
    def n_train(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TrainTrace:
    """Per-step parameters and [0, 1]-bounded train/test risks."""

    params_per_step: Tuple[np.ndarray, ...]
    train_risk: Tuple[float, ...]
    test_risk: Tuple[float, ...]
    seed: int


@dataclass(frozen=True)
class GapExperimentResult:
    trials: int
    gaps: Tuple[float, ...]
    bound_gap: float
    predicted_failure: float
    observed_violation_rate: float


def make_synthetic_dataset(n_train: int, n_test: int, dim: int, seed: int) -> SyntheticDataset:
    """Balanced-in-expectation labels, features at +/- mean plus unit noise.

    Class means sit at +/- (1, ..., 1) / sqrt(dim), so the Bayes risk of
    the margin classifier is the standard normal tail at 1 (~0.159).
    """
    if n_train < 1 or n_test < 1 or dim < 1:
        raise InvalidArgumentError("n_train, n_test and dim must be positive")
    rng = _generator(seed, 0)
    mean = np.ones(dim) / math.sqrt(dim)

    def draw(n):
        labels = rng.integers(0, 2, size=n) * 2 - 1
        features = labels[:, None] * mean[None, :] + rng.standard_normal((n, dim))
        return features, labels

    train_x, train_y = draw(n_train)
    test_x, test_y = draw(n_test)
    return SyntheticDataset(
        features=train_x,
        labels=train_y,
        test_features=test_x,
        test_labels=test_y,
        generator_spec={
            "kind": "two-gaussian-clusters",
            "mean_norm": 1.0,
            "noise_scale": 1.0,
            "dim": dim,
            "seed": int(seed),
        },
    )


def clip_rows(x: np.ndarray, radius: float) -> np.ndarray:
    """Rescale rows to norm at most radius (certifies the gradient bound)."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(1.0, norms / radius)


def clip_to_norm(v: np.ndarray, radius: float) -> np.ndarray:
    """v / max(1, |v| / radius): identity for short vectors, norm radius after."""
    return v / max(1.0, float(np.linalg.norm(v)) / radius)


def bounded_risk(theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean logistic loss clipped to [0, 1]."""
    margins = labels * (features @ theta)
    losses = np.minimum(1.0, np.logaddexp(0.0, -margins))
    return float(np.mean(losses))


def _logistic_grad_sum(theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    margins = labels * (features @ theta)
    weights = -labels * expit(-margins)
    return features.T @ weights


def run_sgld(config: SgldConfig, data: SyntheticDataset, seed: int) -> TrainTrace:
    """One noisy subsampled-gradient run of exactly T update steps.

    theta <- theta - eta_t * [batch-mean gradient + g_t], g_t of scale
    sigma inside the bracket; the regularizer term is identically zero
    here.  Features are clipped to the configured gradient bound first.
    """
    if data.n_train != config.n_samples:
        raise InvalidArgumentError(
            f"dataset has {data.n_train} training rows but the config says "
            f"{config.n_samples}"
        )
    rng = _generator(seed, 1)
    x = clip_rows(data.features, config.lipschitz)
    x_test = clip_rows(data.test_features, config.lipschitz)
    y, y_test = data.labels, data.test_labels
    theta = rng.standard_normal(data.dim)

    params = [theta.copy()]
    train_risk = [bounded_risk(theta, x, y)]
    test_risk = [bounded_risk(theta, x_test, y_test)]
    for step in range(config.steps):
        batch = rng.choice(config.n_samples, size=config.tau, replace=False)
        noise = rng.standard_normal(data.dim) * config.sigma
        grad = _logistic_grad_sum(theta, x[batch], y[batch]) / config.tau
        theta = theta - config.step_sizes[step] * (grad + noise)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"parameters became non-finite at step {step + 1}")
        params.append(theta.copy())
        train_risk.append(bounded_risk(theta, x, y))
        test_risk.append(bounded_risk(theta, x_test, y_test))
    return TrainTrace(
        params_per_step=tuple(params),
        train_risk=tuple(train_risk),
        test_risk=tuple(test_risk),
        seed=int(seed),
    )


def split_for_clients(data: SyntheticDataset, num_clients: int) -> Tuple[SyntheticDataset, ...]:
    """Partition the training rows into contiguous client shards; every
    shard shares the global test split."""
    if num_clients < 1 or num_clients > data.n_train:
        raise InvalidArgumentError(
            f"need 1 <= num_clients <= {data.n_train}, got {num_clients}"
        )
    edges = np.linspace(0, data.n_train, num_clients + 1, dtype=int)
    shards = []
    for a, b in zip(edges[:-1], edges[1:]):
        shards.append(
            SyntheticDataset(
                features=data.features[a:b],
                labels=data.labels[a:b],
                test_features=data.test_features,
                test_labels=data.test_labels,
                generator_spec=dict(data.generator_spec, shard_of=int(num_clients)),
            )
        )
    return tuple(shards)


def run_federated(
    config: FedConfig, client_data: Sequence[SyntheticDataset], seed: int
) -> TrainTrace:
    """One clipped federated-averaging run of exactly T rounds.

    The local update is a single full-batch gradient-descent step of the
    client objective (unit local step size); its displacement is clipped
    to the configured bound, averaged over the sampled clients, and
    noised at scale clip_bound * sigma.
    """
    if len(client_data) != config.num_clients:
        raise InvalidArgumentError(
            f"got {len(client_data)} shards for {config.num_clients} clients"
        )
    if any(s.n_train == 0 for s in client_data):
        raise InvalidArgumentError("every client shard must be nonempty")
    rng = _generator(seed, 2)
    dim = client_data[0].dim
    union_x = np.concatenate([s.features for s in client_data])
    union_y = np.concatenate([s.labels for s in client_data])
    test_x = client_data[0].test_features
    test_y = client_data[0].test_labels
    theta = rng.standard_normal(dim)

    params = [theta.copy()]
    train_risk = [bounded_risk(theta, union_x, union_y)]
    test_risk = [bounded_risk(theta, test_x, test_y)]
    for step in range(config.steps):
        picked = rng.choice(config.num_clients, size=config.tau, replace=False)
        noise = rng.standard_normal(dim) * (config.clip_bound * config.sigma)
        aggregate = np.zeros(dim)
        for c in picked:
            shard = client_data[c]
            grad = _logistic_grad_sum(theta, shard.features, shard.labels) / shard.n_train
            # one unit-step descent displacement, then norm clipping
            aggregate += clip_to_norm(-grad, config.clip_bound)
        theta = theta + (aggregate / config.tau + noise)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"parameters became non-finite at round {step + 1}")
        params.append(theta.copy())
        train_risk.append(bounded_risk(theta, union_x, union_y))
        test_risk.append(bounded_risk(theta, test_x, test_y))
    return TrainTrace(
        params_per_step=tuple(params),
        train_risk=tuple(train_risk),
        test_risk=tuple(test_risk),
        seed=int(seed),
    )


def gap_experiment(
    config: SgldConfig,
    trials: int,
    seed: int,
    slack: SlackParameter,
    dim: int = 2,
    workers: int = 1,
) -> GapExperimentResult:
    """Repeated fresh-data runs measuring |final test - train risk|.

    Requires the composed budget to satisfy eps' < 2 and the sample size
    to clear the generalization threshold.  Trial t draws its dataset and
    its run from streams keyed by (seed, t), so results do not depend on
    the worker count.
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise InvalidArgumentError(f"workers must be >= 1, got {workers}")
    report = sgld_accountant(config, slack)
    composed = report.composed.composed
    if composed.epsilon >= 2.0:
        raise PreconditionError(
            f"composed epsilon {composed.epsilon} is not below 2",
            quantity="eps_prime",
            required=2.0,
        )
    if report.generalization is None:
        required = min_sample_size(composed)
        raise PreconditionError(
            f"sample size {config.n_samples} below the threshold {required}",
            quantity="n",
            required=required,
        )
    bound_gap = report.generalization.gap
    predicted_failure = report.generalization.failure_prob

    def one_trial(t: int) -> float:
        data_seed = (int(seed) << 20) ^ (2 * t)
        run_seed = (int(seed) << 20) ^ (2 * t + 1)
        data = make_synthetic_dataset(config.n_samples, config.n_samples, dim, data_seed)
        trace = run_sgld(config, data, run_seed)
        return abs(trace.test_risk[-1] - trace.train_risk[-1])

    if workers == 1:
        gaps = [one_trial(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            gaps = list(pool.map(one_trial, range(trials)))
    violations = sum(1 for g in gaps if g >= bound_gap)
    return GapExperimentResult(
        trials=trials,
        gaps=tuple(gaps),
        bound_gap=bound_gap,
        predicted_failure=predicted_failure,
        observed_violation_rate=violations / trials,
    )
