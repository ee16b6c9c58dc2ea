"""``smc`` command line: configuration, dispatch and machine-readable output.

Exit codes: 0 success / hypothesis accepted, 1 rejected or nothing found,
2 inconclusive, 3 error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses as d
import io
import json
import logging
import os
import secrets
import sys
import time

from . import __version__
from .algorithms import (
    ACCEPTED,
    EMPTY_CANDIDATES,
    INCONCLUSIVE,
    MAX,
    MIN,
    REJECTED,
    HypothesisResult,
    IterationRecord,
    SmartRunResult,
    estimate_multiple,
    hypothesis_multiple,
    smart_estimate,
    smart_hypothesis,
)
from .engine import MdpSimulator, backend_name, get_backend
from .errors import ConfigError, SmcError
from .model import load_model
from .oracle import (
    exact_optimum_history,
    exact_optimum_memoryless,
    exact_scheduler_probability,
    uniform_scheduler_probability,
)
from .prop import format_property, resolve_property
from .scheduler import HISTORY, MEMORYLESS, MODULUS, PRNG_NAME
from .stats import ChernoffSpec, SprtSpec
from .synthetic import EXPLICIT, EXPONENTIAL, LINEAR, SyntheticPopulation, SyntheticSimulator

log = logging.getLogger("smartsmc")

DEFAULT_SEED = 0x0123456789ABCDEF
DEFAULT_BUDGET = 100_000

MODES = ("smart-estimate", "smart-hypothesis", "simple-estimate", "simple-hypothesis", "oracle", "synthetic")
FORMATS = ("json", "csv")
CSV_COLUMNS = (
    "iteration",
    "stage",
    "M_i",
    "N_i",
    "simulations",
    "confidence",
    "best_estimate",
    "mean_estimate",
    "best_sigma",
    "best_true_probability",
)

EXIT_OK, EXIT_REJECTED, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 1, 2, 3

# environment variable -> (config field, parser)
ENV_OVERRIDES = {
    "SMC_EPSILON": ("epsilon", float),
    "SMC_DELTA": ("delta", float),
    "SMC_ALPHA": ("alpha", float),
    "SMC_BETA": ("beta", float),
    "SMC_SEED": ("master_seed", lambda s: int(s, 0)),
    "SMC_WORKERS": ("workers", int),
    "SMC_BUDGET": ("budget", int),
    "SMC_FORMAT": ("output_format", str),
}


@d.dataclass
class RunConfig:
    mode: str
    model: str | None = None
    prop: str | None = None
    direction: str = MAX
    scheduler_class: str = HISTORY
    epsilon: float = 0.01
    delta: float = 0.01
    alpha: float = 0.01
    beta: float = 0.01
    theta: float | None = None
    budget: int | None = None
    schedulers: int | None = None
    master_seed: int = DEFAULT_SEED
    workers: int = 1
    output_format: str = "json"
    backend: str | None = None
    oracle_kind: str = "optimum"
    sigma: int | None = None
    population: dict | None = None
    distributions: bool = False
    env_overrides: dict = d.field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.direction not in (MAX, MIN):
            raise ConfigError("direction must be max or min")
        if self.scheduler_class not in (HISTORY, MEMORYLESS):
            raise ConfigError("scheduler class must be history or memoryless")
        if self.output_format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mode != "synthetic" and not self.model:
            raise ConfigError("--model is required")
        try:
            if self.mode in ("smart-estimate", "simple-estimate", "synthetic"):
                ChernoffSpec(self.epsilon, self.delta)
            if self.mode in ("smart-hypothesis", "simple-hypothesis"):
                if self.theta is None:
                    raise ConfigError("--theta is required for hypothesis testing")
                SprtSpec(self.theta, self.epsilon, self.alpha, self.beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode in ("simple-estimate", "simple-hypothesis") and (self.schedulers or 0) < 1:
            raise ConfigError("--schedulers must be >= 1")
        if self.mode in ("smart-estimate", "smart-hypothesis", "synthetic") and (self.budget or 0) < 1:
            raise ConfigError("--budget must be >= 1")
        if self.oracle_kind not in ("optimum", "scheduler", "uniform"):
            raise ConfigError("oracle kind must be optimum, scheduler or uniform")
        if self.oracle_kind == "scheduler" and self.sigma is None:
            raise ConfigError("--sigma is required to replay a scheduler")


@d.dataclass
class OutputRecord:
    config: dict
    result: dict
    iterations: list[dict]
    simulations: int
    wall_seconds: float
    exit_code: int = EXIT_OK

    def payload(self) -> dict:
        """Everything that must be reproducible; timing is deliberately excluded."""
        return {"result": self.result, "iterations": self.iterations, "simulations": self.simulations}

    def to_dict(self) -> dict:
        return {**{"config": self.config}, **self.payload(), "timing": {"wall_seconds": self.wall_seconds}}


def _row(r: IterationRecord) -> dict:
    return {
        "iteration": r.iteration,
        "stage": r.stage,
        "M_i": r.candidate_count,
        "N_i": r.sims_per_candidate,
        "simulations": r.simulations,
        "confidence": r.confidence,
        "best_estimate": r.best_estimate,
        "mean_estimate": r.mean_estimate,
        "best_sigma": r.best_sigma,
        "best_true_probability": r.best_true_probability,
    }


def _smart_payload(res: SmartRunResult) -> dict:
    out = {
        "best_sigma": res.best_sigma,
        "estimate": res.estimate,
        "direction": res.direction,
        "terminated_by": res.terminated_by,
        "total_simulations": res.total_simulations,
    }
    if res.distributions is not None:
        out["distributions"] = res.distributions
    return out


def _hyp_payload(res: HypothesisResult) -> dict:
    return {
        "verdict": res.verdict,
        "hypothesis": res.hypothesis,
        "witness_sigma": res.witness_sigma,
        "simulations_used": res.simulations_used,
        "schedulers_tested": res.schedulers_tested,
    }


def _hyp_exit(verdict: str) -> int:
    return {ACCEPTED: EXIT_OK, REJECTED: EXIT_REJECTED, INCONCLUSIVE: EXIT_INCONCLUSIVE}[verdict]


def _echo(config: RunConfig, backend: str, prop_text: str | None) -> dict:
    echo = d.asdict(config)
    echo.update(
        prop_resolved=prop_text,
        modulus=MODULUS,
        prng=PRNG_NAME,
        backend=backend,
        version=__version__,
    )
    return echo


def run(config: RunConfig) -> OutputRecord:
    config.validate()
    started = time.perf_counter()
    backend = backend_name(get_backend(config.backend))
    prop_text = None
    iterations: list[dict] = []
    exit_code = EXIT_OK

    if config.mode == "synthetic":
        pop = SyntheticPopulation(**(config.population or {"kind": EXPONENTIAL, "mass": 0.0144}))
        sim = SyntheticSimulator(pop, config.master_seed, config.workers, config.backend)
        res = smart_estimate(
            sim, ChernoffSpec(config.epsilon, config.delta), config.budget, config.direction,
            record_distributions=config.distributions,
        )
        result = _smart_payload(res)
        result["population"] = pop.describe()
        result["population_mean"] = pop.mean()
        result["population_max"] = pop.maximum()
        iterations = [_row(r) for r in res.iterations]
        simulations = res.total_simulations
        exit_code = EXIT_REJECTED if res.terminated_by == EMPTY_CANDIDATES else EXIT_OK
        return OutputRecord(
            _echo(config, backend, None), result, iterations, simulations,
            time.perf_counter() - started, exit_code,
        )

    mdp = load_model(config.model)
    name = config.prop
    if name is None:
        if not mdp.properties:
            raise ConfigError("model defines no property; pass --prop")
        name = next(iter(mdp.properties))
    prop = resolve_property(name, mdp)
    prop_text = format_property(prop)

    if config.mode == "oracle":
        if config.oracle_kind == "scheduler":
            o = exact_scheduler_probability(mdp, prop, config.sigma, config.scheduler_class)
        elif config.oracle_kind == "uniform":
            o = uniform_scheduler_probability(mdp, prop)
        elif config.scheduler_class == HISTORY:
            o = exact_optimum_history(mdp, prop, config.direction)
        else:
            o = exact_optimum_memoryless(mdp, prop, config.direction)
        result = {
            "value": float(o.value),
            "value_exact": f"{o.value.numerator}/{o.value.denominator}",
            "explored": o.explored,
            "witness": o.scheduler_witness,
        }
        simulations = 0
    else:
        sim = MdpSimulator(mdp, prop, config.scheduler_class, config.master_seed, config.workers, config.backend)
        if config.mode == "smart-estimate":
            res = smart_estimate(sim, ChernoffSpec(config.epsilon, config.delta), config.budget, config.direction)
            result = _smart_payload(res)
            iterations = [_row(r) for r in res.iterations]
            simulations = res.total_simulations
            exit_code = EXIT_REJECTED if res.terminated_by == EMPTY_CANDIDATES else EXIT_OK
        elif config.mode == "simple-estimate":
            est = estimate_multiple(sim, ChernoffSpec(config.epsilon, config.delta), config.schedulers)
            wins = sum(r.successes for r in est.records)
            trials = sum(r.trials for r in est.records)
            best = max(est.records, key=lambda r: (r.successes, -r.sigma)) if config.direction == MAX else None
            if config.direction == MIN:
                positive = [r for r in est.records if r.successes > 0]
                best = min(positive, key=lambda r: (r.successes, r.sigma)) if positive else None
            result = {
                "p_max": est.p_max,
                "p_min": est.p_min,
                "found": est.found,
                "estimate": est.p_max if config.direction == MAX else est.p_min,
                "best_sigma": best.sigma if best else None,
                "sims_per_scheduler": est.sims_per_scheduler,
                "total_simulations": est.total_simulations,
                "schedulers": [
                    {"sigma": r.sigma, "successes": r.successes, "trials": r.trials, "estimate": r.estimate}
                    for r in est.records
                ],
            }
            iterations = [
                {
                    "iteration": 0,
                    "stage": "simple",
                    "M_i": config.schedulers,
                    "N_i": est.sims_per_scheduler,
                    "simulations": est.total_simulations,
                    "confidence": config.delta,
                    "best_estimate": result["estimate"],
                    "mean_estimate": wins / trials,
                    "best_sigma": result["best_sigma"],
                    "best_true_probability": None,
                }
            ]
            simulations = est.total_simulations
            exit_code = EXIT_OK if est.found else EXIT_REJECTED
        else:
            spec = SprtSpec(config.theta, config.epsilon, config.alpha, config.beta)
            if config.mode == "smart-hypothesis":
                res = smart_hypothesis(sim, spec, config.budget, config.direction)
            else:
                res = hypothesis_multiple(sim, spec, config.schedulers, config.direction)
            result = _hyp_payload(res)
            iterations = [_row(r) for r in res.iterations]
            simulations = res.simulations_used
            exit_code = _hyp_exit(res.verdict)
        result["deadlocked_traces"] = sim.deadlocks

    return OutputRecord(
        _echo(config, backend, prop_text), result, iterations, simulations,
        time.perf_counter() - started, exit_code,
    )


def _csv_value(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def emit(record: OutputRecord, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(record.to_dict(), indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in record.iterations:
        writer.writerow([_csv_value(row[c]) for c in CSV_COLUMNS])
    res = record.result
    outcome = res.get("terminated_by") or res.get("verdict") or ("exact" if "value" in res else "simple")
    final = res.get("estimate", res.get("value"))
    sigma = res.get("best_sigma", res.get("witness_sigma"))
    summary = dict.fromkeys(CSV_COLUMNS)
    summary.update(iteration="summary", stage=outcome, simulations=record.simulations, best_estimate=final, best_sigma=sigma)
    writer.writerow([_csv_value(summary[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


# -- argument parsing -----------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("expected an unsigned 64-bit integer")
    return value


def _values(text: str) -> tuple[float, ...]:
    """``0.0*999,0.9`` -> 999 zeros followed by one 0.9."""
    out: list[float] = []
    for part in text.split(","):
        value, _, count = part.strip().partition("*")
        out.extend([float(value)] * (int(count) if count else 1))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smc", description="Statistical model checking of MDPs with sampled schedulers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model file, or the name of a bundled model (choice, coordination)")
    common.add_argument("--prop", help="property text or the name of a property in the model")
    group = common.add_mutually_exclusive_group()
    group.add_argument("--max", dest="direction", action="store_const", const=MAX)
    group.add_argument("--min", dest="direction", action="store_const", const=MIN)
    common.add_argument("--class", dest="scheduler_class", choices=(HISTORY, MEMORYLESS), default=HISTORY)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--theta", type=float)
    sizing = common.add_mutually_exclusive_group()
    sizing.add_argument("--budget", type=int, help="per-iteration budget N_max (smart sampling)")
    sizing.add_argument("--schedulers", type=int, help="number of schedulers M (simple sampling)")
    seeding = common.add_mutually_exclusive_group()
    seeding.add_argument("--seed", type=_u64, dest="master_seed")
    seeding.add_argument("--random-seed", action="store_true", help="draw the master seed from OS entropy")
    common.add_argument("--workers", type=int)
    common.add_argument("--backend", choices=("numba", "numpy"))
    common.add_argument("--format", dest="output_format", choices=FORMATS)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("estimate", parents=[common], help="estimate the optimal probability")
    sub.add_parser("hypothesis", parents=[common], help="test whether some scheduler reaches theta")
    p = sub.add_parser("oracle", parents=[common], help="exact values by exhaustive expansion")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--sigma", type=_u64, help="replay this hash-defined scheduler exactly")
    kind.add_argument("--uniform", action="store_true", help="uniformly random choice at every step")
    p = sub.add_parser("synthetic", parents=[common], help="smart estimation on a virtual scheduler population")
    p.add_argument("--population", choices=(EXPONENTIAL, LINEAR, EXPLICIT), default=EXPONENTIAL)
    p.add_argument("--p-max", type=float, default=0.2)
    p.add_argument("--mass", type=float, default=0.0144)
    p.add_argument("--rate", type=float, default=30.0)
    p.add_argument("--values", type=_values, help="explicit probabilities, e.g. 0.0*999,0.9")
    p.add_argument("--distributions", action="store_true", help="include per-iteration candidate distributions")
    return parser


def config_from_args(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values: dict = {}
    applied: dict = {}
    for var, (field, parse) in ENV_OVERRIDES.items():
        if getattr(args, field, None) is None and var in environ:
            try:
                values[field] = parse(environ[var])
            except ValueError:
                raise ConfigError(f"bad value for {var}: {environ[var]!r}") from None
            applied[var] = environ[var]
    for field in ("epsilon", "delta", "alpha", "beta", "master_seed", "workers", "budget", "output_format"):
        if getattr(args, field, None) is not None:
            values[field] = getattr(args, field)
    if args.random_seed:
        values["master_seed"] = secrets.randbits(64)

    command = args.command
    if command in ("estimate", "hypothesis"):
        simple = args.schedulers is not None
        mode = f"{'simple' if simple else 'smart'}-{command}"
        if simple:
            values.pop("budget", None)
        else:
            values.setdefault("budget", DEFAULT_BUDGET)
    elif command == "synthetic":
        mode = "synthetic"
        values.setdefault("budget", 1_000_000)
    else:
        mode = "oracle"
        values.pop("budget", None)

    config = RunConfig(
        mode=mode,
        model=args.model,
        prop=args.prop,
        direction=args.direction or MAX,
        scheduler_class=args.scheduler_class,
        theta=args.theta,
        schedulers=args.schedulers,
        backend=args.backend,
        env_overrides=applied,
        **values,
    )
    if command == "oracle":
        config.oracle_kind = "scheduler" if args.sigma is not None else "uniform" if args.uniform else "optimum"
        config.sigma = args.sigma
    if command == "synthetic":
        if args.population == EXPLICIT:
            if not args.values:
                raise ConfigError("--values is required for an explicit population")
            config.population = {"kind": EXPLICIT, "values": args.values}
        else:
            config.population = {"kind": args.population, "p_max": args.p_max, "mass": args.mass}
            if args.population == EXPONENTIAL:
                config.population["rate"] = args.rate
        config.distributions = args.distributions
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        record = run(config)
        text = emit(record, config.output_format)
    except (SmcError, ValueError, OSError, RuntimeError) as exc:
        print(f"smc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return record.exit_code


if __name__ == "__main__":
    sys.exit(main())
