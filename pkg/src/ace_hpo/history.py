"""Running tuning history: checkpoint records, feasibility state, cost ledger.

Every checkpoint of every trial lands here as an immutable record tagged
with its constraint group: ``no_constraint`` when the constraint was not
evaluated, else ``valid`` or ``invalid`` against an upper-bound threshold.
The history also tracks the best feasible optimization metric seen so far
(metrics are minimized internally) and a ledger of charged costs from which
the empirical constraint-to-training cost ratio is estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "Group",
    "ConstraintSpec",
    "CheckpointRecord",
    "CostLedger",
    "TrialSnapshot",
    "RunningHistory",
]


class Group(str, Enum):
    NO_CONSTRAINT = "no_constraint"
    VALID = "valid"
    INVALID = "invalid"


@dataclass(frozen=True)
class ConstraintSpec:
    """Upper-bound constraint: a checkpoint is feasible iff value <= threshold."""

    threshold: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold):
            raise ValueError("constraint threshold must be finite")

    def is_satisfied(self, value: float) -> bool:
        return value <= self.threshold

    def violation(self, value: float) -> float:
        return value - self.threshold

    def classify(
        self,
        trial_id: int,
        iteration: int,
        opt_metric: float,
        constraint_value: float | None,
    ) -> "CheckpointRecord":
        """Build a consistent record from an observation (None = not evaluated)."""
        if constraint_value is None:
            return CheckpointRecord(trial_id, iteration, opt_metric, None, Group.NO_CONSTRAINT)
        if self.is_satisfied(constraint_value):
            return CheckpointRecord(trial_id, iteration, opt_metric, constraint_value, Group.VALID)
        return CheckpointRecord(
            trial_id,
            iteration,
            opt_metric,
            constraint_value,
            Group.INVALID,
            self.violation(constraint_value),
        )


@dataclass(frozen=True)
class CheckpointRecord:
    trial_id: int
    iteration: int
    opt_metric: float
    constraint_value: float | None
    group: Group
    violation_amount: float | None = None

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")
        if self.group is Group.NO_CONSTRAINT:
            if self.constraint_value is not None or self.violation_amount is not None:
                raise ValueError("no_constraint record cannot carry constraint data")
        elif self.constraint_value is None:
            raise ValueError(f"{self.group.value} record requires a constraint value")
        if self.group is Group.VALID and self.violation_amount is not None:
            raise ValueError("valid record cannot carry a violation amount")
        if self.group is Group.INVALID:
            if self.violation_amount is None or not self.violation_amount > 0:
                raise ValueError("invalid record requires a positive violation amount")


@dataclass
class CostLedger:
    """Accumulated charges, split by kind, with sample counts for averaging."""

    total_primary_cost: float = 0.0
    primary_cost_count: int = 0
    total_constraint_cost: float = 0.0
    constraint_cost_count: int = 0

    def add_primary(self, cost: float) -> None:
        if cost < 0:
            raise ValueError("cost must be nonnegative")
        self.total_primary_cost += cost
        self.primary_cost_count += 1

    def add_constraint(self, cost: float) -> None:
        if cost < 0:
            raise ValueError("cost must be nonnegative")
        self.total_constraint_cost += cost
        self.constraint_cost_count += 1

    def cost_ratio(self) -> float | None:
        """Average constraint cost over average training-iteration cost.

        None until at least one sample of each kind has been charged.
        """
        if self.primary_cost_count == 0 or self.constraint_cost_count == 0:
            return None
        mean_primary = self.total_primary_cost / self.primary_cost_count
        if mean_primary == 0.0:
            return None
        mean_constraint = self.total_constraint_cost / self.constraint_cost_count
        return mean_constraint / mean_primary


@dataclass
class TrialSnapshot:
    """Per-trial ranking entry: one row per trial, kept current as records land.

    A trial sits in the group of its most recent checkpoint; it ranks by its
    best-so-far optimization metric and, when invalid, by the violation from
    its latest constraint evaluation.
    """

    trial_id: int
    group: Group
    best_opt: float
    latest_violation: float | None
    latest_iteration: int


class RunningHistory:
    """Single-writer record store shared by the simulator and the scheduler."""

    def __init__(self, constraint: ConstraintSpec):
        self.constraint = constraint
        self.records: list[CheckpointRecord] = []
        self.best_feasible_score: float = math.inf
        self.ledger = CostLedger()
        self._snapshots: dict[int, TrialSnapshot] = {}

    def record_checkpoint(self, record: CheckpointRecord) -> None:
        if record.group is Group.VALID and not self.constraint.is_satisfied(record.constraint_value):
            raise ValueError("valid record with constraint value above the threshold")
        if record.group is Group.INVALID:
            if self.constraint.is_satisfied(record.constraint_value):
                raise ValueError("invalid record with constraint value within the threshold")
            expected = self.constraint.violation(record.constraint_value)
            if not math.isclose(record.violation_amount, expected, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError("violation amount inconsistent with value and threshold")
        self.records.append(record)
        if record.group is Group.VALID and record.opt_metric < self.best_feasible_score:
            self.best_feasible_score = record.opt_metric
        snap = self._snapshots.get(record.trial_id)
        if snap is None:
            self._snapshots[record.trial_id] = TrialSnapshot(
                record.trial_id,
                record.group,
                record.opt_metric,
                record.violation_amount,
                record.iteration,
            )
        else:
            snap.group = record.group
            snap.best_opt = min(snap.best_opt, record.opt_metric)
            if record.group is Group.INVALID:
                snap.latest_violation = record.violation_amount
            snap.latest_iteration = record.iteration

    def group_subset(self, group: Group, latest_per_trial: bool = False) -> list[CheckpointRecord]:
        """Records of one group in arrival order, optionally deduplicated per trial."""
        subset = [r for r in self.records if r.group is group]
        if not latest_per_trial:
            return subset
        latest: dict[int, CheckpointRecord] = {}
        for record in subset:
            latest[record.trial_id] = record
        return list(latest.values())

    def group_members(self, group: Group) -> list[TrialSnapshot]:
        """Trials whose most recent checkpoint sits in the given group."""
        return [s for s in self._snapshots.values() if s.group is group]

    def trial_snapshot(self, trial_id: int) -> TrialSnapshot | None:
        return self._snapshots.get(trial_id)

    @property
    def trial_count(self) -> int:
        return len(self._snapshots)
