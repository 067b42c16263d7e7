"""Command-line harness: flag parsing, JSON config ingestion, sweeps.

Exit statuses are the only machine channel for error class: 0 success,
2 invalid input (including malformed config and resource caps),
3 precondition violations (message names the required value),
4 degenerate budgets (composed delta >= 1).  All stderr text is advisory.

Reports are JSON (CSV for sweeps and traces); every number is serialized
in shortest round-trip decimal form, so parsing a report back yields the
exact same floats.  Each report carries a ``paper_refs`` block naming the
rule that produced each quantity, for auditability.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

from . import accountants, composition, generalization, oracle, simulator
from .composition import IterationSpec, PrivacyBudget, SlackParameter
from .errors import (
    DegenerateBudgetError,
    InvalidArgumentError,
    PreconditionError,
    PrivboundError,
)

#: delta_tilde used when the CLI caller does not pass --slack.  The
#: library itself never defaults it.
DEFAULT_SLACK = 1e-9

SWEEP_GUARD = 10**6

COMMANDS = ("compose", "bound", "multidb", "sgld", "fed", "oracle",
            "simulate", "sweep", "compare")

_RUN_KEYS = {"command", "params", "seed", "output"}

_PARAM_KEYS = {
    "compose": {"eps", "delta", "steps", "slack", "method", "mode", "eps_prime"},
    "bound": {"eps", "delta", "N"},
    "multidb": {"eps", "delta", "k"},
    "sgld": {"L", "sigma", "tau", "N", "T", "per_step_delta", "slack"},
    "fed": {"L", "sigma", "tau", "N", "T", "per_step_delta", "slack"},
    "oracle": {"eps", "delta", "T", "eps_prime", "target_delta"},
    "simulate": {"kind", "L", "sigma", "tau", "N", "T", "per_step_delta",
                 "slack", "trials", "dim", "workers", "step_size"},
    "compare": {"eps", "delta", "steps", "slack", "N", "empirical_risk",
                "empirical_variance"},
}

_REFS = {
    "kl_bound": "KL budget of a pure-DP step, eps(e^eps-1)/(e^eps+1)",
    "eps_prime": "composed epsilon, minimum of three advanced estimates",
    "delta_prime": "composed delta, boundary-maximized product form",
    "delta_prime_moment": "composed delta, product form with optimized moment tail",
    "delta_prime_kairouz": "multiplicative composed delta of the homogeneous baseline",
    "delta_prime_dwork": "additive composed delta of the classical baseline",
    "gap": "high-probability generalization gap 9 eps",
    "failure_prob": "failure term e^{-eps} delta/eps ln(2/eps)",
    "min_sample_size": "sample threshold (2/eps^2) ln(16 e^eps / delta)",
    "on_average_gap": "on-average multi-database bound e^{-eps} k delta + 1 - e^{-eps}",
    "high_prob_threshold": "high-probability multi-database threshold k e^{-eps} delta + 3 eps",
    "eps_tilde": "stated per-step epsilon of the noisy batch gradient",
    "step_budget": "subsampling amplification (2 tau/N eps~, tau/N delta)",
    "exact_delta": "hockey-stick divergence of the worst-case product pair",
    "free_privacy_steps": "iteration threshold eps^2 N / (32 tau log(2/delta))",
}


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation: command tag, parameter map, seed, output path."""

    command: str
    params: Dict[str, object]
    seed: int = 0
    output: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgumentError(f"unknown command {self.command!r}")
        allowed = _PARAM_KEYS.get(self.command, set())
        unknown = set(self.params) - allowed
        if unknown:
            raise InvalidArgumentError(
                f"unknown parameter(s) for {self.command}: {sorted(unknown)}"
            )


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian grid over named parameters plus fixed ones."""

    axes: Dict[str, Sequence[object]]
    fixed: Dict[str, object]

    def __post_init__(self):
        size = 1
        for name, values in self.axes.items():
            if not isinstance(values, (list, tuple)) or not values:
                raise InvalidArgumentError(f"axis {name!r} must be a nonempty list")
            size *= len(values)
        if size > SWEEP_GUARD:
            raise InvalidArgumentError(
                f"sweep grid has {size} points, exceeding the guard {SWEEP_GUARD}"
            )


def _slack(params) -> SlackParameter:
    return SlackParameter(float(params.get("slack", DEFAULT_SLACK)))


def _spec_from_params(params) -> IterationSpec:
    eps = params["eps"]
    delta = params.get("delta", 0.0)
    if isinstance(eps, (list, tuple)):
        deltas = delta if isinstance(delta, (list, tuple)) else [delta] * len(eps)
        if len(deltas) != len(eps):
            raise InvalidArgumentError("eps and delta lists must have equal length")
        return IterationSpec(
            tuple(PrivacyBudget(float(e), float(d)) for e, d in zip(eps, deltas))
        )
    steps = int(params.get("steps", 1))
    return IterationSpec.homogeneous(float(eps), float(delta), steps)


def _composition_payload(result: composition.CompositionResult) -> Dict[str, object]:
    payload = {
        "eps_prime": result.composed.epsilon,
        "delta_prime": result.composed.delta,
        "method": result.method,
        "slack": result.slack.delta_tilde,
        "exact_search": result.exact_search,
    }
    if result.breakdown is not None:
        payload["eps_breakdown"] = {
            "eps1": result.breakdown.eps1,
            "eps2": result.breakdown.eps2,
            "eps3": result.breakdown.eps3,
            "chosen": result.breakdown.chosen,
        }
    return payload


def _cmd_compose(params, seed) -> Dict[str, object]:
    spec = _spec_from_params(params)
    slack = _slack(params)
    method = params.get("method", "ours-general" if not spec.is_homogeneous() else "ours-homogeneous")
    mode = params.get("mode")
    if method in ("kairouz", "dwork-basic", "dwork-advanced"):
        result = composition.compose_baseline(spec, slack, method)
    elif method == "ours-general":
        result = composition.compose_iterations(spec, slack)
    elif method in ("ours-homogeneous", "ours-moment"):
        if not spec.is_homogeneous():
            raise InvalidArgumentError(f"{method} requires a homogeneous spec")
        first = spec.budgets[0]
        result = composition.compose_homogeneous(
            first.epsilon,
            first.delta,
            spec.steps,
            slack,
            mode="moment" if (method == "ours-moment" or mode == "moment") else "closed-form",
        )
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    payload = _composition_payload(result)
    payload["paper_refs"] = {
        "eps_prime": _REFS["eps_prime"],
        "delta_prime": _REFS[
            "delta_prime_moment" if result.method == "ours-moment" else
            "delta_prime_kairouz" if result.method == "kairouz" else
            "delta_prime_dwork" if result.method.startswith("dwork") else
            "delta_prime"
        ],
    }
    return payload


def _cmd_bound(params, seed) -> Dict[str, object]:
    budget = PrivacyBudget(float(params["eps"]), float(params["delta"]))
    n = int(params["N"])
    bound = generalization.high_probability_bound(budget, n)
    return {
        "gap": bound.gap,
        "failure_prob": bound.failure_prob,
        "min_sample_size": bound.min_sample_size,
        "vacuous": bound.vacuous,
        "N": n,
        "paper_refs": {k: _REFS[k] for k in ("gap", "failure_prob", "min_sample_size")},
    }


def _cmd_multidb(params, seed) -> Dict[str, object]:
    budget = PrivacyBudget(float(params["eps"]), float(params["delta"]))
    bound = generalization.multi_db_bounds(budget, int(params["k"]))
    return {
        "k": bound.k,
        "on_average_gap": bound.on_average_gap,
        "high_prob_threshold": bound.high_prob_threshold,
        "high_prob_level": bound.high_prob_level,
        "paper_refs": {k: _REFS[k] for k in ("on_average_gap", "high_prob_threshold")},
    }


def _accountant_payload(report: accountants.AccountantReport) -> Dict[str, object]:
    payload = {
        "eps_tilde": report.eps_tilde,
        "step_epsilon": report.step_budget.epsilon,
        "step_delta": report.step_budget.delta,
    }
    payload.update(_composition_payload(report.composed))
    if report.generalization is not None:
        payload["gap"] = report.generalization.gap
        payload["failure_prob"] = report.generalization.failure_prob
        payload["min_sample_size"] = report.generalization.min_sample_size
    else:
        payload["generalization_skipped"] = report.skipped_reason
    payload["paper_refs"] = {
        "eps_tilde": _REFS["eps_tilde"],
        "step_budget": _REFS["step_budget"],
        "eps_prime": _REFS["eps_prime"],
        "delta_prime": _REFS["delta_prime_moment"],
    }
    return payload


def _sgld_config(params) -> accountants.SgldConfig:
    return accountants.SgldConfig.with_constant_step(
        lipschitz=float(params.get("L", 1.0)),
        sigma=float(params["sigma"]),
        tau=int(params["tau"]),
        n_samples=int(params["N"]),
        steps=int(params["T"]),
        per_step_delta=float(params["per_step_delta"]),
        step_size=float(params["step_size"]) if "step_size" in params else None,
    )


def _cmd_sgld(params, seed) -> Dict[str, object]:
    return _accountant_payload(
        accountants.sgld_accountant(_sgld_config(params), _slack(params))
    )


def _cmd_fed(params, seed) -> Dict[str, object]:
    config = accountants.FedConfig(
        num_clients=int(params["N"]),
        tau=int(params["tau"]),
        sigma=float(params["sigma"]),
        clip_bound=float(params.get("L", 1.0)),
        steps=int(params["T"]),
        per_step_delta=float(params["per_step_delta"]),
    )
    return _accountant_payload(accountants.fed_accountant(config, _slack(params)))


def _cmd_oracle(params, seed) -> Dict[str, object]:
    eps = float(params["eps"])
    delta = float(params.get("delta", 0.0))
    steps = int(params["T"])
    if "target_delta" in params:
        value, capped = oracle.exact_optimal_epsilon(
            eps, delta, steps, float(params["target_delta"])
        )
        return {
            "optimal_eps_prime": value,
            "capped": capped,
            "paper_refs": {"optimal_eps_prime": _REFS["exact_delta"]},
        }
    eps_prime = float(params["eps_prime"])
    return {
        "exact_delta": oracle.exact_composed_delta(eps, delta, steps, eps_prime),
        "eps_prime": eps_prime,
        "paper_refs": {"exact_delta": _REFS["exact_delta"]},
    }


def _cmd_simulate(params, seed) -> Dict[str, object]:
    kind = params.get("kind", "gap")
    if kind == "gap":
        config = _sgld_config(params)
        result = simulator.gap_experiment(
            config,
            trials=int(params.get("trials", 20)),
            seed=seed,
            slack=_slack(params),
            dim=int(params.get("dim", 2)),
            workers=int(params.get("workers", 1)),
        )
        return {
            "trials": result.trials,
            "gaps": list(result.gaps),
            "bound_gap": result.bound_gap,
            "predicted_failure": result.predicted_failure,
            "observed_violation_rate": result.observed_violation_rate,
            "paper_refs": {"bound_gap": _REFS["gap"], "predicted_failure": _REFS["failure_prob"]},
        }
    if kind == "sgld-trace":
        config = _sgld_config(params)
        dim = int(params.get("dim", 2))
        data = simulator.make_synthetic_dataset(config.n_samples, config.n_samples, dim, seed)
        trace = simulator.run_sgld(config, data, seed)
        return {"trace": _trace_rows(trace)}
    if kind == "fed-trace":
        config = accountants.FedConfig(
            num_clients=int(params["N"]),
            tau=int(params["tau"]),
            sigma=float(params["sigma"]),
            clip_bound=float(params.get("L", 1.0)),
            steps=int(params["T"]),
            per_step_delta=float(params["per_step_delta"]),
        )
        dim = int(params.get("dim", 2))
        base = simulator.make_synthetic_dataset(
            max(config.num_clients * 8, config.num_clients), config.num_clients * 8, dim, seed
        )
        shards = simulator.split_for_clients(base, config.num_clients)
        trace = simulator.run_federated(config, shards, seed)
        return {"trace": _trace_rows(trace)}
    raise InvalidArgumentError(f"unknown simulate kind {kind!r}")


def _trace_rows(trace: simulator.TrainTrace) -> List[Dict[str, object]]:
    return [
        {"step": i, "train_risk": tr, "test_risk": te}
        for i, (tr, te) in enumerate(zip(trace.train_risk, trace.test_risk))
    ]


def _cmd_compare(params, seed) -> Dict[str, object]:
    eps = float(params["eps"])
    delta = float(params.get("delta", 0.0))
    steps = int(params.get("steps", 1))
    slack = _slack(params)
    spec = IterationSpec.homogeneous(eps, delta, steps)
    methods: Dict[str, object] = {}
    for method, run in (
        ("ours-homogeneous", lambda: composition.compose_homogeneous(eps, delta, steps, slack)),
        ("ours-moment", lambda: composition.compose_homogeneous(eps, delta, steps, slack, mode="moment")),
        ("kairouz", lambda: composition.compose_baseline(spec, slack, "kairouz")),
        ("dwork-advanced", lambda: composition.compose_baseline(spec, slack, "dwork-advanced")),
        ("dwork-basic", lambda: composition.compose_baseline(spec, slack, "dwork-basic")),
    ):
        try:
            methods[method] = _composition_payload(run())
        except DegenerateBudgetError:
            methods[method] = {"degenerate": True}
    for name, payload in list(methods.items()):
        if "eps_prime" in payload and steps <= 200:
            payload["exact_delta_at_eps_prime"] = oracle.exact_composed_delta(
                eps, delta, steps, payload["eps_prime"]
            )
    report: Dict[str, object] = {"composition": methods}
    if "N" in params:
        budget = PrivacyBudget(eps, delta)
        bounds = generalization.baseline_generalization(
            budget,
            int(params["N"]),
            float(params.get("empirical_risk", 0.0)),
            float(params.get("empirical_variance", 0.0)),
        )
        report["generalization"] = [
            {
                "method": b.method,
                "gap": b.gap,
                "failure_prob": b.failure_prob,
                "vacuous": b.vacuous,
            }
            for b in bounds
        ]
    report["paper_refs"] = {
        "composition": _REFS["eps_prime"],
        "generalization": _REFS["gap"],
    }
    return report


_EVALUATORS = {
    "compose": _cmd_compose,
    "bound": _cmd_bound,
    "multidb": _cmd_multidb,
    "sgld": _cmd_sgld,
    "fed": _cmd_fed,
    "oracle": _cmd_oracle,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}

#: Commands usable as sweep targets (flat scalar payloads).
SWEEPABLE = ("compose", "bound", "multidb", "sgld", "fed", "oracle")


def _flatten(payload: Dict[str, object], prefix: str = "") -> Dict[str, object]:
    flat = {}
    for key, value in payload.items():
        if key == "paper_refs":
            continue
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        elif isinstance(value, list):
            continue
        else:
            flat[name] = value
    return flat


def run_sweep(spec: SweepSpec, command: str, seed: int = 0, workers: int = 1) -> List[Dict[str, object]]:
    """Evaluate a command over the Cartesian grid of the axes.

    One row per grid point holding the axis values, the fixed values and
    the flattened outputs; rows are ordered lexicographically by the
    sorted axis names and their (sorted) values, independent of worker
    scheduling.
    """
    if command not in SWEEPABLE:
        raise InvalidArgumentError(f"command {command!r} is not sweepable")
    axis_names = sorted(spec.axes)
    grids = [sorted(spec.axes[name]) for name in axis_names]
    points = list(product(*grids)) if axis_names else [()]

    def evaluate(point):
        params = dict(spec.fixed)
        params.update(dict(zip(axis_names, point)))
        RunConfig(command=command, params=params, seed=seed)  # validates keys
        payload = _EVALUATORS[command](params, seed)
        row = {name: value for name, value in zip(axis_names, point)}
        row.update(spec.fixed)
        row.update(_flatten(payload))
        return row

    if workers == 1:
        rows = [evaluate(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, points))
    return rows


def rows_to_csv(rows: List[Dict[str, object]]) -> str:
    """Comma-separated table with a mandatory header row, newline line
    endings and shortest round-trip decimals."""
    if not rows:
        return "\n"
    header: List[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(key)) for key in header])
    return buffer.getvalue()


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report(payload: Dict[str, object]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def run_command(config: RunConfig) -> Tuple[int, str]:
    """Execute one command; returns (exit status, artifact text)."""
    if config.command == "sweep":
        raise InvalidArgumentError("sweeps are driven by a JSON config; use --config")
    try:
        payload = _EVALUATORS[config.command](config.params, config.seed)
    except KeyError as exc:
        raise InvalidArgumentError(f"missing parameter {exc} for {config.command}") from exc
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"bad parameter value: {exc}") from exc
    if config.command == "simulate" and "trace" in payload:
        artifact = rows_to_csv(payload["trace"])
    else:
        artifact = render_report(payload)
    return 0, artifact


def _load_json_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidArgumentError("config must be a JSON object")
    unknown = set(raw) - _RUN_KEYS - {"axes", "fixed", "sweep_command", "workers"}
    if unknown:
        raise InvalidArgumentError(f"unknown config key(s): {sorted(unknown)}")
    if "command" not in raw:
        raise InvalidArgumentError("config must name a command")
    command = raw["command"]
    if command == "sweep":
        return RunConfig(
            command="sweep",
            params={},
            seed=int(raw.get("seed", 0)),
            output=raw.get("output"),
        )
    return RunConfig(
        command=command,
        params=raw.get("params", {}),
        seed=int(raw.get("seed", 0)),
        output=raw.get("output"),
    )


def _emit(artifact: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(artifact)
    else:
        sys.stdout.write(artifact)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privbound",
        description="Differential-privacy composition and generalization accountant",
    )
    parser.add_argument("--config", help="JSON run configuration (overrides subcommand)")
    sub = parser.add_subparsers(dest="command")

    def add(name, **flags):
        p = sub.add_parser(name)
        for flag, kwargs in flags.items():
            p.add_argument(f"--{flag}", **kwargs)
        p.add_argument("--slack", type=float, default=DEFAULT_SLACK)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output")
        return p

    add("compose", eps={"type": float, "required": True}, delta={"type": float, "default": 0.0},
        steps={"type": int, "default": 1}, method={"default": "ours-homogeneous"},
        mode={"default": None})
    add("bound", eps={"type": float, "required": True}, delta={"type": float, "required": True},
        n={"type": int, "required": True})
    add("multidb", eps={"type": float, "required": True}, delta={"type": float, "required": True},
        k={"type": int, "required": True})
    add("sgld", L={"type": float, "default": 1.0}, sigma={"type": float, "required": True},
        tau={"type": int, "required": True}, n={"type": int, "required": True},
        steps={"type": int, "required": True}, **{"per-step-delta": {"type": float, "required": True}})
    add("fed", L={"type": float, "default": 1.0}, sigma={"type": float, "required": True},
        tau={"type": int, "required": True}, **{
            "num-clients": {"type": int, "required": True},
            "steps": {"type": int, "required": True},
            "per-step-delta": {"type": float, "required": True},
        })
    add("oracle", eps={"type": float, "required": True}, delta={"type": float, "default": 0.0},
        steps={"type": int, "required": True}, **{
            "eps-prime": {"type": float, "default": None},
            "target-delta": {"type": float, "default": None},
        })
    add("simulate", kind={"default": "gap"}, L={"type": float, "default": 1.0},
        sigma={"type": float, "required": True}, tau={"type": int, "required": True},
        n={"type": int, "required": True}, steps={"type": int, "required": True},
        trials={"type": int, "default": 20}, dim={"type": int, "default": 2},
        workers={"type": int, "default": 1}, **{
            "per-step-delta": {"type": float, "required": True},
            "step-size": {"type": float, "default": None},
        })
    add("compare", eps={"type": float, "required": True}, delta={"type": float, "default": 0.0},
        steps={"type": int, "default": 1}, n={"type": int, "default": None},
        **{"empirical-risk": {"type": float, "default": 0.0},
           "empirical-variance": {"type": float, "default": 0.0}})
    sub.add_parser("sweep").add_argument("--config", required=True)
    return parser


def _args_to_params(command: str, args: argparse.Namespace) -> Dict[str, object]:
    mapping = {
        "compose": [("eps", "eps"), ("delta", "delta"), ("steps", "steps"),
                    ("method", "method"), ("mode", "mode"), ("slack", "slack")],
        "bound": [("eps", "eps"), ("delta", "delta"), ("n", "N")],
        "multidb": [("eps", "eps"), ("delta", "delta"), ("k", "k")],
        "sgld": [("L", "L"), ("sigma", "sigma"), ("tau", "tau"), ("n", "N"),
                 ("steps", "T"), ("per_step_delta", "per_step_delta"), ("slack", "slack")],
        "fed": [("L", "L"), ("sigma", "sigma"), ("tau", "tau"), ("num_clients", "N"),
                ("steps", "T"), ("per_step_delta", "per_step_delta"), ("slack", "slack")],
        "oracle": [("eps", "eps"), ("delta", "delta"), ("steps", "T"),
                   ("eps_prime", "eps_prime"), ("target_delta", "target_delta")],
        "simulate": [("kind", "kind"), ("L", "L"), ("sigma", "sigma"), ("tau", "tau"),
                     ("n", "N"), ("steps", "T"), ("per_step_delta", "per_step_delta"),
                     ("trials", "trials"), ("dim", "dim"), ("workers", "workers"),
                     ("step_size", "step_size"), ("slack", "slack")],
        "compare": [("eps", "eps"), ("delta", "delta"), ("steps", "steps"), ("n", "N"),
                    ("empirical_risk", "empirical_risk"),
                    ("empirical_variance", "empirical_variance"), ("slack", "slack")],
    }
    params = {}
    for attr, key in mapping[command]:
        value = getattr(args, attr, None)
        if value is not None:
            params[key] = value
    if command == "compare" and args.n is None:
        params.pop("empirical_risk", None)
        params.pop("empirical_variance", None)
    return params


def _run_sweep_config(path: str) -> Tuple[int, str, Optional[str]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    unknown = set(raw) - {"command", "sweep_command", "axes", "fixed", "seed", "output", "workers"}
    if unknown:
        raise InvalidArgumentError(f"unknown config key(s): {sorted(unknown)}")
    target = raw.get("sweep_command")
    if target is None:
        raise InvalidArgumentError("sweep config must name a sweep_command")
    spec = SweepSpec(axes=raw.get("axes", {}), fixed=raw.get("fixed", {}))
    rows = run_sweep(spec, target, seed=int(raw.get("seed", 0)),
                     workers=int(raw.get("workers", 1)))
    return 0, rows_to_csv(rows), raw.get("output")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.config:
            if getattr(args, "command", None) == "sweep" or _peek_command(args.config) == "sweep":
                status, artifact, output = _run_sweep_config(args.config)
                _emit(artifact, output)
                return status
            config = _load_json_config(args.config)
            status, artifact = run_command(config)
            _emit(artifact, config.output)
            return status
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 2
        params = _args_to_params(args.command, args)
        config = RunConfig(
            command=args.command,
            params=params,
            seed=getattr(args, "seed", 0) or 0,
            output=getattr(args, "output", None),
        )
        status, artifact = run_command(config)
        _emit(artifact, config.output)
        return status
    except PreconditionError as exc:
        print(f"precondition violated: {exc} (required: {exc.required})", file=sys.stderr)
        return exc.exit_status
    except DegenerateBudgetError as exc:
        print(f"degenerate budget: {exc}", file=sys.stderr)
        return exc.exit_status
    except InvalidArgumentError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return exc.exit_status
    except PrivboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _peek_command(path: str) -> Optional[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    if isinstance(raw, dict):
        return raw.get("command")
    raise InvalidArgumentError("config must be a JSON object")


if __name__ == "__main__":
    sys.exit(main())
