"""Synthetic constrained-tuning problems and a deterministic event-loop simulator.

Trials follow exponential-approach metric curves toward per-configuration
asymptotes; the constraint trajectory adds a sinusoidal term so feasibility
can cross the threshold more than once. All randomness is counter-based:
noise is keyed by (problem seed, trial id, iteration, metric tag), so every
metric value is a pure function of its position and runs replay exactly.

The simulator keeps a fixed number of trial slots busy, interleaving their
iterations by per-slot virtual time, while a single cost clock accumulates
every charged cost. The budget gates issuing new work on that clock; an
iteration already issued always completes. Constraint-evaluation cost never
consumes training iterations: a trial's iteration budget counts iterations,
the clock counts cost.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .history import ConstraintSpec, CostLedger, Group, RunningHistory
from .schedulers import Action, ScanResult, TrialScheduler, post_hoc_feasibility_scan
from .search_space import (
    Configuration,
    ParamKind,
    ParamSpec,
    SearchSpace,
    sample,
)

__all__ = [
    "TrialCurve",
    "opt_curve_value",
    "constraint_curve_value",
    "metric_noise",
    "CostMeter",
    "eval_opt_metric",
    "eval_constraint_metric",
    "LandscapeTerm",
    "ProblemSpec",
    "SyntheticProblem",
    "make_problem",
    "PRESET_NAMES",
    "TraceRow",
    "DecisionRow",
    "TrialRow",
    "RunResult",
    "run_experiment",
]

_OPT_TAG = 0
_CONSTRAINT_TAG = 1


@dataclass(frozen=True)
class TrialCurve:
    """Metric trajectories and costs of one trial.

    Both metrics approach their limit exponentially from their start value;
    the constraint trajectory additionally oscillates with the given
    amplitude and period, which makes feasibility non-monotone whenever the
    amplitude exceeds the gap between the limit and the threshold.
    """

    opt_limit: float
    opt_start: float
    opt_rate: float
    opt_noise: float
    constraint_limit: float
    constraint_start: float
    constraint_rate: float
    osc_amplitude: float
    osc_period: float
    constraint_noise: float
    primary_cost: float
    constraint_cost: float
    max_iterations: int

    def __post_init__(self) -> None:
        if not self.opt_rate > 0:
            raise ValueError("opt_rate must be positive")
        if not self.constraint_rate > 0:
            raise ValueError("constraint_rate must be positive")
        if self.opt_noise < 0 or self.constraint_noise < 0:
            raise ValueError("noise amplitudes must be nonnegative")
        if self.osc_amplitude < 0:
            raise ValueError("osc_amplitude must be nonnegative")
        if not self.osc_period > 0:
            raise ValueError("osc_period must be positive")
        if not self.primary_cost > 0:
            raise ValueError("primary_cost must be positive")
        if self.constraint_cost < 0:
            raise ValueError("constraint_cost must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def opt_curve_value(curve: TrialCurve, t: float) -> float:
    """Noise-free optimization metric at iteration t (t=0 gives the start value)."""
    return curve.opt_limit + (curve.opt_start - curve.opt_limit) * math.exp(-curve.opt_rate * t)


def constraint_curve_value(curve: TrialCurve, t: float) -> float:
    """Noise-free constraint metric at iteration t, oscillation included."""
    level = curve.constraint_limit + (curve.constraint_start - curve.constraint_limit) * math.exp(
        -curve.constraint_rate * t
    )
    return level + curve.osc_amplitude * math.sin(2.0 * math.pi * t / curve.osc_period)


def metric_noise(problem_seed: int, trial_id: int, iteration: int, tag: int) -> float:
    """Standard normal draw keyed by position, independent of evaluation order."""
    ss = np.random.SeedSequence(problem_seed, spawn_key=(trial_id, iteration, tag))
    return float(np.random.Generator(np.random.PCG64(ss)).standard_normal())


@dataclass
class CostMeter:
    """Simulated clock advanced only by ledger charges, so time equals total cost.

    The clock is recomputed from the ledger's two kind-sums on every charge,
    making clock == total primary cost + total constraint cost an exact
    identity rather than a float-summation-order coincidence.
    """

    ledger: CostLedger
    clock: float = 0.0

    def __post_init__(self) -> None:
        self.clock = self.ledger.total_primary_cost + self.ledger.total_constraint_cost

    def charge_primary(self, cost: float) -> None:
        self.ledger.add_primary(cost)
        self.clock = self.ledger.total_primary_cost + self.ledger.total_constraint_cost

    def charge_constraint(self, cost: float) -> None:
        self.ledger.add_constraint(cost)
        self.clock = self.ledger.total_primary_cost + self.ledger.total_constraint_cost


def eval_opt_metric(
    curve: TrialCurve, t: int, problem_seed: int, trial_id: int, meter: CostMeter
) -> float:
    """Observed optimization metric at iteration t; charges the iteration cost."""
    if not 1 <= t <= curve.max_iterations:
        raise ValueError("iteration out of range")
    meter.charge_primary(curve.primary_cost)
    noise = curve.opt_noise * metric_noise(problem_seed, trial_id, t, _OPT_TAG)
    return opt_curve_value(curve, t) + noise


def eval_constraint_metric(
    curve: TrialCurve, t: int, problem_seed: int, trial_id: int, meter: CostMeter
) -> float:
    """Observed constraint metric at iteration t; charges the evaluation cost."""
    if not 1 <= t <= curve.max_iterations:
        raise ValueError("iteration out of range")
    meter.charge_constraint(curve.constraint_cost)
    noise = curve.constraint_noise * metric_noise(problem_seed, trial_id, t, _CONSTRAINT_TAG)
    return constraint_curve_value(curve, t) + noise


@dataclass(frozen=True)
class LandscapeTerm:
    """One squared-distance pull toward a center in normalized parameter space."""

    param: str
    center: float
    weight: float


@dataclass(frozen=True)
class ProblemSpec:
    """Deterministic mapping from configurations to trial curves.

    Two Gaussian bump scores over the normalized hyperparameters shape each
    trial: a quality score lowers the optimization-metric asymptote and a
    feasibility score lowers the constraint asymptote. Their centers differ
    on purpose, so the configurations with the best raw metric tend to sit
    where the constraint is hard to satisfy.
    """

    name: str
    space: SearchSpace
    quality_terms: tuple[LandscapeTerm, ...]
    feasibility_terms: tuple[LandscapeTerm, ...]
    rate_param: str
    rate_low: float
    rate_high: float
    opt_base: float
    opt_gain: float
    opt_start: float
    opt_start_gain: float
    constraint_base: float
    constraint_gain: float
    constraint_lift: float
    constraint_rate_scale: float
    osc_base: float
    osc_gain: float
    osc_period: float
    opt_noise: float
    constraint_noise: float
    primary_cost: float
    constraint_cost: float
    feasible_fraction: float
    maximize: bool

    def __post_init__(self) -> None:
        if not 0.0 < self.feasible_fraction < 1.0:
            raise ValueError("feasible_fraction must be in (0, 1)")
        if not 0.0 < self.rate_low < self.rate_high:
            raise ValueError("rate bounds must satisfy 0 < rate_low < rate_high")
        names = {p.name for p in self.space.params}
        if self.rate_param not in names:
            raise ValueError(f"rate_param {self.rate_param!r} is not in the space")
        for term in self.quality_terms + self.feasibility_terms:
            if term.param not in names:
                raise ValueError(f"landscape term references unknown parameter {term.param!r}")


class SyntheticProblem:
    """A problem spec bound to a seed, with a calibrated constraint threshold.

    The threshold is the feasible_fraction quantile of the noise-free
    best-over-iterations constraint value across a fixed probe sample of the
    space, so roughly that fraction of configurations is ever-feasible.
    """

    PROBE_COUNT = 512
    _PROBE_SEED_OFFSET = 1_000_003

    def __init__(self, spec: ProblemSpec, problem_seed: int):
        self.spec = spec
        self.problem_seed = problem_seed
        self.constraint = ConstraintSpec(self._calibrated_threshold())

    @property
    def space(self) -> SearchSpace:
        return self.spec.space

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def maximize(self) -> bool:
        return self.spec.maximize

    def reported(self, internal: float) -> float:
        """Map an internally-minimized metric back to its reporting orientation."""
        return -internal if self.spec.maximize else internal

    def normalized_values(self, config: Configuration) -> dict[str, float]:
        """Each parameter mapped into [0, 1]: linear, log, or choice-index scale."""
        out: dict[str, float] = {}
        for pspec in self.spec.space.params:
            value = config.values[pspec.name]
            if pspec.kind is ParamKind.UNIFORM_REAL:
                u = (value - pspec.low) / (pspec.high - pspec.low)
            elif pspec.kind in (ParamKind.LOG_UNIFORM_REAL, ParamKind.LOG_UNIFORM_INT):
                u = (math.log(value) - math.log(pspec.low)) / (
                    math.log(pspec.high) - math.log(pspec.low)
                )
            else:
                index = pspec.choices.index(value)
                u = 0.5 if len(pspec.choices) == 1 else index / (len(pspec.choices) - 1)
            out[pspec.name] = min(max(u, 0.0), 1.0)
        return out

    @staticmethod
    def _score(terms: tuple[LandscapeTerm, ...], u: dict[str, float]) -> float:
        return math.exp(-sum(t.weight * (u[t.param] - t.center) ** 2 for t in terms))

    def curve_for(self, config: Configuration) -> TrialCurve:
        s = self.spec
        u = self.normalized_values(config)
        quality = self._score(s.quality_terms, u)
        headroom = self._score(s.feasibility_terms, u)
        rate = math.exp(
            math.log(s.rate_low) + u[s.rate_param] * (math.log(s.rate_high) - math.log(s.rate_low))
        )
        constraint_limit = s.constraint_base - s.constraint_gain * headroom
        return TrialCurve(
            opt_limit=s.opt_base - s.opt_gain * quality,
            opt_start=s.opt_start - s.opt_start_gain * quality,
            opt_rate=rate,
            opt_noise=s.opt_noise,
            constraint_limit=constraint_limit,
            constraint_start=constraint_limit + s.constraint_lift,
            constraint_rate=rate * s.constraint_rate_scale,
            osc_amplitude=s.osc_base + s.osc_gain * (1.0 - headroom),
            osc_period=s.osc_period,
            constraint_noise=s.constraint_noise,
            primary_cost=s.primary_cost,
            constraint_cost=s.constraint_cost,
            max_iterations=config.max_iterations,
        )

    def _calibrated_threshold(self) -> float:
        probe_seed = self._PROBE_SEED_OFFSET + self.problem_seed
        minima = []
        for i in range(self.PROBE_COUNT):
            config = sample(self.spec.space, probe_seed, i)
            curve = self.curve_for(config)
            best = min(
                constraint_curve_value(curve, t) for t in range(1, curve.max_iterations + 1)
            )
            minima.append(best)
        return float(np.quantile(np.asarray(minima), self.spec.feasible_fraction))


def _fairness_like_spec() -> ProblemSpec:
    space = SearchSpace(
        (
            ParamSpec("learning_rate", ParamKind.LOG_UNIFORM_REAL, 1e-4, 1e-1),
            ParamSpec("regularization", ParamKind.LOG_UNIFORM_REAL, 1e-5, 1e-1),
            ParamSpec("hidden_width", ParamKind.CHOICE, choices=(32, 64, 128, 256)),
            ParamSpec(
                "training_iterations", ParamKind.LOG_UNIFORM_INT, 64, 256, iteration_axis=True
            ),
        )
    )
    return ProblemSpec(
        name="fairness-like",
        space=space,
        quality_terms=(
            LandscapeTerm("learning_rate", 0.55, 6.0),
            LandscapeTerm("regularization", 0.35, 2.5),
            LandscapeTerm("hidden_width", 0.80, 2.0),
        ),
        feasibility_terms=(
            LandscapeTerm("learning_rate", 0.35, 5.0),
            LandscapeTerm("regularization", 0.75, 5.0),
        ),
        rate_param="learning_rate",
        rate_low=0.08,
        rate_high=0.60,
        opt_base=-0.70,
        opt_gain=0.20,
        opt_start=-0.50,
        opt_start_gain=0.12,
        constraint_base=0.40,
        constraint_gain=0.25,
        constraint_lift=0.15,
        constraint_rate_scale=0.9,
        osc_base=0.06,
        osc_gain=0.04,
        osc_period=7.0,
        opt_noise=0.004,
        constraint_noise=0.004,
        primary_cost=1.0,
        constraint_cost=1.94,
        feasible_fraction=0.15,
        maximize=True,
    )


def _robustness_like_spec() -> ProblemSpec:
    space = SearchSpace(
        (
            ParamSpec("learning_rate", ParamKind.LOG_UNIFORM_REAL, 1e-4, 1e-1),
            ParamSpec("augmentation_strength", ParamKind.UNIFORM_REAL, 0.0, 1.0),
            ParamSpec("weight_decay", ParamKind.LOG_UNIFORM_REAL, 1e-6, 1e-2),
            ParamSpec(
                "training_iterations", ParamKind.LOG_UNIFORM_INT, 8, 256, iteration_axis=True
            ),
        )
    )
    return ProblemSpec(
        name="robustness-like",
        space=space,
        quality_terms=(
            LandscapeTerm("learning_rate", 0.60, 5.0),
            LandscapeTerm("augmentation_strength", 0.35, 3.0),
        ),
        feasibility_terms=(
            LandscapeTerm("augmentation_strength", 0.75, 5.0),
            LandscapeTerm("weight_decay", 0.70, 4.0),
        ),
        rate_param="learning_rate",
        rate_low=0.02,
        rate_high=0.30,
        opt_base=0.30,
        opt_gain=0.20,
        opt_start=0.90,
        opt_start_gain=0.12,
        constraint_base=0.40,
        constraint_gain=0.25,
        constraint_lift=0.15,
        constraint_rate_scale=0.9,
        osc_base=0.01,
        osc_gain=0.02,
        osc_period=7.0,
        opt_noise=0.004,
        constraint_noise=0.004,
        primary_cost=1.0,
        constraint_cost=23.98,
        feasible_fraction=0.15,
        maximize=False,
    )


_PRESET_BUILDERS: dict[str, Callable[[], ProblemSpec]] = {
    "fairness-like": _fairness_like_spec,
    "robustness-like": _robustness_like_spec,
}
PRESET_NAMES = tuple(sorted(_PRESET_BUILDERS))


def make_problem(
    preset: str,
    problem_seed: int,
    space: SearchSpace | None = None,
    **overrides: object,
) -> SyntheticProblem:
    """Build a preset problem, optionally overriding its space or scalar fields."""
    try:
        spec = _PRESET_BUILDERS[preset]()
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; expected one of {PRESET_NAMES}") from None
    if space is not None:
        spec = replace(spec, space=space)
    if overrides:
        spec = replace(spec, **overrides)  # type: ignore[arg-type]
    return SyntheticProblem(spec, problem_seed)


@dataclass(frozen=True)
class TraceRow:
    trial_id: int
    iteration: int
    opt_metric: float
    constraint_value: float | None
    group: str
    violation_amount: float | None
    sim_time: float


@dataclass(frozen=True)
class DecisionRow:
    sim_time: float
    trial_id: int
    iteration: int
    action: str
    evaluate_constraint: bool
    group: str
    rank: int | None
    group_size: int | None


@dataclass(frozen=True)
class TrialRow:
    trial_id: int
    max_iterations: int
    interval: int | None
    best_opt: float
    best_iteration: int
    status: str


STATUS_COMPLETED = "completed"
STATUS_STOPPED = "stopped"
STATUS_BUDGET_TRUNCATED = "budget_truncated"


@dataclass
class RunResult:
    """Everything one run produced; file emission happens in the CLI layer."""

    problem_name: str
    sampler_seed: int
    budget: float
    max_concurrent: int
    trace_rows: list[TraceRow]
    decision_rows: list[DecisionRow]
    trial_rows: list[TrialRow]
    total_trials: int
    completed_trials: int
    stopped_trials: int
    truncated_trials: int
    feasible_found: bool
    best_feasible_internal: float | None
    best_feasible_score: float | None
    best_feasible_trial: int | None
    time_to_best: float | None
    total_cost: float
    primary_cost_total: float
    constraint_cost_total: float
    primary_iterations: int
    constraint_evaluations: int
    interval_every_iteration: int
    interval_final_only: int
    interval_unscheduled: int
    scan: ScanResult | None
    history: RunningHistory


@dataclass
class _ActiveTrial:
    trial_id: int
    config: Configuration
    curve: TrialCurve
    interval: int | None
    iteration: int = 0
    best_opt: float = math.inf
    best_iteration: int = 0


@dataclass
class _Slot:
    virtual_time: float = 0.0
    trial: _ActiveTrial | None = None


def run_experiment(
    problem: SyntheticProblem,
    scheduler_factory: Callable[[RunningHistory], TrialScheduler],
    budget: float,
    max_concurrent: int,
    seed: int,
) -> RunResult:
    """Run one tuning experiment under a simulated cost budget.

    New work (a trial or a single iteration) is issued only while the clock
    is strictly below the budget; an issued iteration always completes, and
    a trial caught mid-flight when the budget runs out is recorded as
    truncated. Candidate configurations come from the seed-keyed sample
    sequence in issue order, so the set of started configurations is a
    prefix of that sequence regardless of concurrency.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    if max_concurrent < 1:
        raise ValueError("max_concurrent must be >= 1")

    history = RunningHistory(problem.constraint)
    scheduler = scheduler_factory(history)
    meter = CostMeter(history.ledger)

    trace_rows: list[TraceRow] = []
    decision_rows: list[DecisionRow] = []
    trial_rows: list[TrialRow] = []
    curves: dict[int, TrialCurve] = {}
    next_trial_index = 0
    best_trial: int | None = None
    time_to_best: float | None = None

    def start_trial() -> _ActiveTrial:
        nonlocal next_trial_index
        trial_id = next_trial_index
        next_trial_index += 1
        config = sample(problem.space, seed, trial_id)
        curve = problem.curve_for(config)
        curves[trial_id] = curve
        trial = _ActiveTrial(trial_id, config, curve, None)
        returned = scheduler.on_trial_start(trial_id, config.max_iterations)
        trial.interval = returned if returned is not None else scheduler.interval_choices.get(trial_id)
        return trial

    def finish_trial(trial: _ActiveTrial, status: str) -> None:
        trial_rows.append(
            TrialRow(
                trial.trial_id,
                trial.curve.max_iterations,
                trial.interval,
                trial.best_opt,
                trial.best_iteration,
                status,
            )
        )

    heap: list[tuple[float, int, _Slot]] = []
    seq = 0
    for _ in range(max_concurrent):
        heapq.heappush(heap, (0.0, seq, _Slot()))
        seq += 1

    while heap:
        _, _, slot = heapq.heappop(heap)
        if meter.clock >= budget:
            if slot.trial is not None:
                finish_trial(slot.trial, STATUS_BUDGET_TRUNCATED)
                slot.trial = None
            continue
        if slot.trial is None:
            slot.trial = start_trial()
        trial = slot.trial
        trial.iteration += 1
        t = trial.iteration
        curve = trial.curve

        opt = eval_opt_metric(curve, t, problem.problem_seed, trial.trial_id, meter)
        slot.virtual_time += curve.primary_cost
        if opt < trial.best_opt:
            trial.best_opt = opt
            trial.best_iteration = t

        observed: list[float] = []

        def evaluate(trial=trial, t=t, curve=curve, slot=slot, observed=observed) -> float:
            value = eval_constraint_metric(curve, t, problem.problem_seed, trial.trial_id, meter)
            slot.virtual_time += curve.constraint_cost
            observed.append(value)
            return value

        incumbent_before = history.best_feasible_score
        decision = scheduler.step(trial.trial_id, t, curve.max_iterations, opt, evaluate)
        if history.best_feasible_score < incumbent_before:
            best_trial = trial.trial_id
            time_to_best = meter.clock

        value = observed[0] if observed else None
        violation = None
        if value is not None and not problem.constraint.is_satisfied(value):
            violation = problem.constraint.violation(value)
        trace_rows.append(
            TraceRow(trial.trial_id, t, opt, value, decision.group.value, violation, meter.clock)
        )
        decision_rows.append(
            DecisionRow(
                meter.clock,
                trial.trial_id,
                t,
                decision.action.value,
                decision.evaluate_constraint,
                decision.group.value,
                decision.rank,
                decision.group_size,
            )
        )

        if t >= curve.max_iterations:
            finish_trial(trial, STATUS_COMPLETED)
            slot.trial = None
        elif decision.action is Action.STOP:
            finish_trial(trial, STATUS_STOPPED)
            slot.trial = None
        heapq.heappush(heap, (slot.virtual_time, seq, slot))
        seq += 1

    scan: ScanResult | None = None
    if not scheduler.performs_constraint_evaluations:
        ranked = sorted(trial_rows, key=lambda r: (r.best_opt, r.trial_id))
        candidates = [
            (r.trial_id, r.best_iteration, r.best_opt) for r in ranked if r.best_iteration >= 1
        ]

        best_opt_by_trial = {r.trial_id: r.best_opt for r in trial_rows}

        def scan_eval(trial_id: int, iteration: int) -> tuple[float, float]:
            curve = curves[trial_id]
            value = eval_constraint_metric(curve, iteration, problem.problem_seed, trial_id, meter)
            # Scan evaluations belong in the trace too, so every charged
            # constraint evaluation is auditable from the flat files.
            satisfied = problem.constraint.is_satisfied(value)
            violation = None if satisfied else problem.constraint.violation(value)
            group = Group.VALID if satisfied else Group.INVALID
            trace_rows.append(
                TraceRow(
                    trial_id,
                    iteration,
                    best_opt_by_trial[trial_id],
                    value,
                    group.value,
                    violation,
                    meter.clock,
                )
            )
            return value, curve.constraint_cost

        incumbent_before = history.best_feasible_score
        scan = post_hoc_feasibility_scan(history, candidates, scan_eval)
        if history.best_feasible_score < incumbent_before:
            best_trial = scan.feasible_trial_id
            time_to_best = meter.clock

    feasible_found = math.isfinite(history.best_feasible_score)
    best_internal = history.best_feasible_score if feasible_found else None
    trial_rows.sort(key=lambda r: r.trial_id)
    return RunResult(
        problem_name=problem.name,
        sampler_seed=seed,
        budget=budget,
        max_concurrent=max_concurrent,
        trace_rows=trace_rows,
        decision_rows=decision_rows,
        trial_rows=trial_rows,
        total_trials=next_trial_index,
        completed_trials=sum(1 for r in trial_rows if r.status == STATUS_COMPLETED),
        stopped_trials=sum(1 for r in trial_rows if r.status == STATUS_STOPPED),
        truncated_trials=sum(1 for r in trial_rows if r.status == STATUS_BUDGET_TRUNCATED),
        feasible_found=feasible_found,
        best_feasible_internal=best_internal,
        best_feasible_score=problem.reported(best_internal) if feasible_found else None,
        best_feasible_trial=best_trial,
        time_to_best=time_to_best,
        total_cost=meter.clock,
        primary_cost_total=history.ledger.total_primary_cost,
        constraint_cost_total=history.ledger.total_constraint_cost,
        primary_iterations=history.ledger.primary_cost_count,
        constraint_evaluations=history.ledger.constraint_cost_count,
        interval_every_iteration=sum(
            1 for r in trial_rows if r.interval == 1 and r.max_iterations > 1
        ),
        interval_final_only=sum(
            1 for r in trial_rows if r.interval is not None and r.interval == r.max_iterations
        ),
        interval_unscheduled=sum(1 for r in trial_rows if r.interval is None),
        scan=scan,
        history=history,
    )
