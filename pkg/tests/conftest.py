"""Shared test fixtures: a deterministic six-trial stopping scenario.

The scenario contrasts a trial whose constraint goes invalid only for a
short stretch against one that is invalid from the first checkpoint. Four
background trials with poor optimization metrics and small constant
violations populate the invalid group so the stratified rule has peers to
rank against. All curves are noise-free closed forms, so every scheduler
decision is exactly reproducible.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import pytest

from ace_hpo.history import ConstraintSpec, RunningHistory
from ace_hpo.schedulers import Action, TrialScheduler

FIXTURE_TAU = 0.25
FIXTURE_MAX_ITERATIONS = 26

TRANSIENT_ID = 1
ALWAYS_INVALID_ID = 2
BACKGROUND_IDS = (3, 4, 5, 6)


@dataclass(frozen=True)
class ScenarioTrial:
    trial_id: int
    opt: Callable[[int], float]
    constraint: Callable[[int], float]
    max_iterations: int = FIXTURE_MAX_ITERATIONS


def _transient_constraint(t: int) -> float:
    # Feasible everywhere except a three-iteration excursion.
    return 0.27 if t in (5, 6, 7) else 0.22


def scenario_trials() -> list[ScenarioTrial]:
    """Drive-order list: the improving trial first, the bad one last."""
    trials = [
        ScenarioTrial(
            TRANSIENT_ID,
            opt=lambda t: 0.1 + 0.8 * math.exp(-0.12 * t),
            constraint=_transient_constraint,
        )
    ]
    for offset, trial_id in enumerate(BACKGROUND_IDS):
        violation = 0.03 + 0.01 * offset
        trials.append(
            ScenarioTrial(
                trial_id,
                opt=lambda t: 0.85 + 0.05 * math.exp(-0.2 * t),
                constraint=lambda t, v=violation: FIXTURE_TAU + v,
            )
        )
    trials.append(
        ScenarioTrial(
            ALWAYS_INVALID_ID,
            opt=lambda t: 0.45 + 0.1 * math.exp(-0.3 * t),
            constraint=lambda t: 0.75,
        )
    )
    return trials


@dataclass
class ScenarioOutcome:
    history: RunningHistory
    stop_iteration: dict[int, int]
    decisions: list[tuple[int, int, Action]] = field(default_factory=list)

    def actions_for(self, trial_id: int) -> list[tuple[int, Action]]:
        return [(t, a) for tid, t, a in self.decisions if tid == trial_id]


def drive_scenario(
    scheduler_factory: Callable[[RunningHistory], TrialScheduler],
) -> ScenarioOutcome:
    """Run the six trials round-robin through a scheduler until stop or finish.

    The ledger is preloaded with one unit of training cost and one unit of
    evaluation cost, so adaptive interval selection sees cost ratio 1 and
    assigns every trial an interval of one iteration.
    """
    history = RunningHistory(ConstraintSpec(FIXTURE_TAU))
    history.ledger.add_primary(1.0)
    history.ledger.add_constraint(1.0)
    scheduler = scheduler_factory(history)
    trials = scenario_trials()
    for trial in trials:
        scheduler.on_trial_start(trial.trial_id, trial.max_iterations)
    alive = {trial.trial_id for trial in trials}
    outcome = ScenarioOutcome(history=history, stop_iteration={})
    for iteration in range(1, FIXTURE_MAX_ITERATIONS + 1):
        for trial in trials:
            if trial.trial_id not in alive:
                continue
            decision = scheduler.step(
                trial.trial_id,
                iteration,
                trial.max_iterations,
                trial.opt(iteration),
                lambda trial=trial, t=iteration: trial.constraint(t),
            )
            outcome.decisions.append((trial.trial_id, iteration, decision.action))
            if decision.action is Action.STOP:
                alive.discard(trial.trial_id)
                outcome.stop_iteration[trial.trial_id] = iteration
    return outcome


@pytest.fixture
def stopping_scenario():
    return drive_scenario
