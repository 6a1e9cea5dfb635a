import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ace_hpo.history import (
    CheckpointRecord,
    ConstraintSpec,
    CostLedger,
    Group,
    RunningHistory,
)

TAU = ConstraintSpec(0.25)


def test_classify_each_group():
    assert TAU.classify(1, 1, 0.5, None).group is Group.NO_CONSTRAINT
    assert TAU.classify(1, 1, 0.5, 0.25).group is Group.VALID
    rec = TAU.classify(1, 1, 0.5, 0.3)
    assert rec.group is Group.INVALID
    assert rec.violation_amount == pytest.approx(0.05)


def test_record_invariants_enforced():
    with pytest.raises(ValueError):
        CheckpointRecord(1, 0, 0.5, None, Group.NO_CONSTRAINT)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 0.5, 0.1, Group.NO_CONSTRAINT)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 0.5, None, Group.VALID)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 0.5, 0.5, Group.INVALID, violation_amount=None)
    with pytest.raises(ValueError):
        CheckpointRecord(1, 1, 0.5, 0.5, Group.INVALID, violation_amount=-0.1)


def test_history_rejects_inconsistent_records():
    history = RunningHistory(TAU)
    with pytest.raises(ValueError):
        history.record_checkpoint(CheckpointRecord(1, 1, 0.5, 0.4, Group.VALID))
    with pytest.raises(ValueError):
        history.record_checkpoint(CheckpointRecord(1, 1, 0.5, 0.2, Group.INVALID, violation_amount=0.05))
    with pytest.raises(ValueError):
        history.record_checkpoint(CheckpointRecord(1, 1, 0.5, 0.4, Group.INVALID, violation_amount=0.5))


def test_best_feasible_updates_only_on_valid_improvement():
    history = RunningHistory(TAU)
    assert history.best_feasible_score == math.inf
    history.record_checkpoint(TAU.classify(1, 1, 0.9, None))
    assert history.best_feasible_score == math.inf
    history.record_checkpoint(TAU.classify(1, 2, 0.8, 0.2))
    assert history.best_feasible_score == 0.8
    history.record_checkpoint(TAU.classify(2, 1, 0.5, 0.9))
    assert history.best_feasible_score == 0.8
    history.record_checkpoint(TAU.classify(2, 2, 0.4, 0.1))
    assert history.best_feasible_score == 0.4
    history.record_checkpoint(TAU.classify(3, 1, 0.7, 0.1))
    assert history.best_feasible_score == 0.4


def test_group_subset_partition_and_latest():
    history = RunningHistory(TAU)
    history.record_checkpoint(TAU.classify(1, 1, 0.9, 0.5))
    history.record_checkpoint(TAU.classify(1, 2, 0.8, 0.4))
    history.record_checkpoint(TAU.classify(2, 1, 0.7, None))
    history.record_checkpoint(TAU.classify(3, 1, 0.6, 0.1))
    invalid = history.group_subset(Group.INVALID)
    assert [r.iteration for r in invalid] == [1, 2]
    latest = history.group_subset(Group.INVALID, latest_per_trial=True)
    assert len(latest) == 1 and latest[0].iteration == 2
    sizes = sum(len(history.group_subset(g)) for g in Group)
    assert sizes == len(history.records)


def test_snapshots_track_current_group_best_opt_latest_violation():
    history = RunningHistory(TAU)
    history.record_checkpoint(TAU.classify(1, 1, 0.9, 0.45))
    history.record_checkpoint(TAU.classify(1, 2, 0.5, None))
    history.record_checkpoint(TAU.classify(1, 3, 0.7, 0.30))
    snap = history.trial_snapshot(1)
    assert snap.group is Group.INVALID
    assert snap.best_opt == 0.5
    assert snap.latest_violation == pytest.approx(0.05)
    assert [s.trial_id for s in history.group_members(Group.INVALID)] == [1]
    assert history.group_members(Group.VALID) == []


def test_ledger_ratio():
    ledger = CostLedger()
    assert ledger.cost_ratio() is None
    ledger.add_primary(1.0)
    assert ledger.cost_ratio() is None
    ledger.add_primary(1.0)
    ledger.add_constraint(2.0)
    assert ledger.cost_ratio() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ledger.add_primary(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.one_of(st.none(), st.floats(0.0, 1.0))), max_size=40))
def test_best_feasible_is_monotone_nonincreasing(stream):
    history = RunningHistory(TAU)
    previous = history.best_feasible_score
    for i, (opt, value) in enumerate(stream):
        history.record_checkpoint(TAU.classify(1 + i % 5, 1 + i // 5, opt, value))
        assert history.best_feasible_score <= previous
        previous = history.best_feasible_score
    valid_opts = [r.opt_metric for r in history.group_subset(Group.VALID)]
    if valid_opts:
        assert history.best_feasible_score == min(valid_opts)
    else:
        assert history.best_feasible_score == math.inf


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(1, 20), st.integers(1, 20))
def test_ledger_ratio_scale_invariant(scale, n_primary, n_constraint):
    a, b = CostLedger(), CostLedger()
    for i in range(n_primary):
        a.add_primary(1.0 + i)
        b.add_primary((1.0 + i) * scale)
    for i in range(n_constraint):
        a.add_constraint(2.0 + i)
        b.add_constraint((2.0 + i) * scale)
    assert a.cost_ratio() == pytest.approx(b.cost_ratio())
