import math

import pytest

from ace_hpo.history import CostLedger, Group, RunningHistory
from ace_hpo.schedulers import (
    AceConfig,
    AceScheduler,
    AshaConfig,
    AshaScheduler,
    ConstraintCallback,
    NoStoppingScheduler,
)
from ace_hpo.search_space import ParamKind, ParamSpec, SearchSpace, sample, sequence_for_seed
from ace_hpo.simulate import (
    CostMeter,
    LandscapeTerm,
    ProblemSpec,
    SyntheticProblem,
    TrialCurve,
    constraint_curve_value,
    eval_constraint_metric,
    eval_opt_metric,
    make_problem,
    metric_noise,
    opt_curve_value,
    run_experiment,
)


def flat_curve(**kwargs):
    base = dict(
        opt_limit=0.0,
        opt_start=1.0,
        opt_rate=math.log(2.0),
        opt_noise=0.0,
        constraint_limit=0.2,
        constraint_start=0.2,
        constraint_rate=0.5,
        osc_amplitude=0.0,
        osc_period=7.0,
        constraint_noise=0.0,
        primary_cost=1.0,
        constraint_cost=0.5,
        max_iterations=16,
    )
    base.update(kwargs)
    return TrialCurve(**base)


class TestCurves:
    def test_opt_halving_point(self):
        # limit 0, start 1, rate ln2: value at t=1 is exp(-ln 2) = 0.5 exactly.
        assert opt_curve_value(flat_curve(), 1) == pytest.approx(0.5, abs=1e-15)

    def test_opt_start_and_asymptote(self):
        curve = flat_curve()
        assert opt_curve_value(curve, 0) == pytest.approx(1.0, abs=1e-15)
        assert opt_curve_value(curve, 200) == pytest.approx(0.0, abs=1e-12)

    def test_constraint_asymptote_without_oscillation(self):
        curve = flat_curve(constraint_start=0.9, constraint_limit=0.3)
        assert constraint_curve_value(curve, 500) == pytest.approx(0.3, abs=1e-12)

    def test_oscillation_makes_feasibility_non_monotone(self):
        # Flat level 0.2 with amplitude 0.1 swings across a 0.25 threshold.
        curve = flat_curve(osc_amplitude=0.1)
        tau = 0.25
        feasible = [constraint_curve_value(curve, t) <= tau for t in range(1, 15)]
        flips = sum(1 for a, b in zip(feasible, feasible[1:]) if a != b)
        assert flips >= 2

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            flat_curve(opt_rate=0.0)
        with pytest.raises(ValueError):
            flat_curve(primary_cost=0.0)
        with pytest.raises(ValueError):
            flat_curve(osc_amplitude=-0.1)


class TestNoise:
    def test_keyed_reproducibility(self):
        assert metric_noise(7, 3, 5, 0) == metric_noise(7, 3, 5, 0)

    def test_distinct_positions_differ(self):
        draws = {
            metric_noise(7, 3, 5, 0),
            metric_noise(7, 3, 5, 1),
            metric_noise(7, 3, 6, 0),
            metric_noise(7, 4, 5, 0),
            metric_noise(8, 3, 5, 0),
        }
        assert len(draws) == 5


class TestMeteredEvaluation:
    def test_charges_once_per_call(self):
        meter = CostMeter(CostLedger())
        curve = flat_curve()
        eval_opt_metric(curve, 3, 0, 0, meter)
        assert meter.ledger.primary_cost_count == 1
        assert meter.clock == pytest.approx(1.0)
        eval_constraint_metric(curve, 3, 0, 0, meter)
        assert meter.ledger.constraint_cost_count == 1
        assert meter.clock == pytest.approx(1.5)

    def test_clock_equals_ledger_sums_exactly(self):
        meter = CostMeter(CostLedger())
        curve = flat_curve(primary_cost=0.1, constraint_cost=0.7)
        for t in range(1, 12):
            eval_opt_metric(curve, t, 0, 0, meter)
            eval_constraint_metric(curve, t, 0, 0, meter)
        assert meter.clock == meter.ledger.total_primary_cost + meter.ledger.total_constraint_cost

    def test_iteration_out_of_range(self):
        meter = CostMeter(CostLedger())
        with pytest.raises(ValueError):
            eval_opt_metric(flat_curve(), 0, 0, 0, meter)
        with pytest.raises(ValueError):
            eval_constraint_metric(flat_curve(), 17, 0, 0, meter)

    def test_noisy_value_matches_components(self):
        meter = CostMeter(CostLedger())
        curve = flat_curve(opt_noise=0.01)
        value = eval_opt_metric(curve, 4, 11, 2, meter)
        expected = opt_curve_value(curve, 4) + 0.01 * metric_noise(11, 2, 4, 0)
        assert value == pytest.approx(expected, abs=1e-15)


def fixed_length_problem(constraint_cost=0.5, iterations=4):
    """Every trial runs exactly `iterations` iterations at unit primary cost."""
    space = SearchSpace(
        (
            ParamSpec("x", ParamKind.UNIFORM_REAL, 0.0, 1.0),
            ParamSpec("steps", ParamKind.CHOICE, choices=(iterations,), iteration_axis=True),
        )
    )
    spec = ProblemSpec(
        name="unit-flat",
        space=space,
        quality_terms=(LandscapeTerm("x", 0.5, 2.0),),
        feasibility_terms=(LandscapeTerm("x", 0.8, 2.0),),
        rate_param="x",
        rate_low=0.1,
        rate_high=0.5,
        opt_base=0.5,
        opt_gain=0.2,
        opt_start=0.9,
        opt_start_gain=0.0,
        constraint_base=0.3,
        constraint_gain=0.25,
        constraint_lift=0.1,
        constraint_rate_scale=1.0,
        osc_base=0.0,
        osc_gain=0.0,
        osc_period=7.0,
        opt_noise=0.0,
        constraint_noise=0.0,
        primary_cost=1.0,
        constraint_cost=constraint_cost,
        feasible_fraction=0.5,
        maximize=False,
    )
    return SyntheticProblem(spec, problem_seed=0)


class TestRunExperiment:
    def test_budget_of_three_trials_runs_three_trials(self):
        problem = fixed_length_problem()
        result = run_experiment(problem, NoStoppingScheduler, budget=12.0, max_concurrent=1, seed=5)
        assert result.total_trials == 3
        assert result.completed_trials == 3
        assert result.truncated_trials == 0
        assert result.primary_iterations == 12

    def test_cost_conservation_exact(self):
        problem = make_problem("fairness-like", problem_seed=1)
        result = run_experiment(
            problem,
            lambda h: AceScheduler(AceConfig(), h),
            budget=300.0,
            max_concurrent=4,
            seed=1,
        )
        assert result.total_cost == result.primary_cost_total + result.constraint_cost_total

    def test_reruns_are_identical(self):
        problem = make_problem("fairness-like", problem_seed=3)

        def once():
            return run_experiment(
                problem,
                lambda h: AceScheduler(AceConfig(), h),
                budget=250.0,
                max_concurrent=4,
                seed=3,
            )

        a, b = once(), once()
        assert a.trace_rows == b.trace_rows
        assert a.decision_rows == b.decision_rows
        assert a.trial_rows == b.trial_rows
        assert a.best_feasible_score == b.best_feasible_score
        assert a.time_to_best == b.time_to_best
        assert a.total_cost == b.total_cost

    def test_candidates_are_seed_prefix_for_any_concurrency(self):
        problem = fixed_length_problem()
        results = [
            run_experiment(problem, NoStoppingScheduler, budget=40.0, max_concurrent=m, seed=9)
            for m in (1, 3)
        ]
        reference = sequence_for_seed(problem.space, 9, max(r.total_trials for r in results))
        for result in results:
            for row in result.trial_rows:
                assert row.max_iterations == reference[row.trial_id].max_iterations

    def test_mid_trial_budget_exhaustion_truncates(self):
        problem = fixed_length_problem(iterations=8)
        result = run_experiment(problem, NoStoppingScheduler, budget=12.0, max_concurrent=1, seed=2)
        assert result.total_trials == 2
        assert result.completed_trials == 1
        assert result.truncated_trials == 1
        truncated = [r for r in result.trial_rows if r.status == "budget_truncated"]
        assert truncated[0].max_iterations == 8

    def test_gate_reduces_constraint_evaluations(self):
        problem = make_problem("fairness-like", problem_seed=4)

        def run(gate):
            return run_experiment(
                problem,
                lambda h: AceScheduler(AceConfig(low_overhead_gate=gate), h),
                budget=400.0,
                max_concurrent=4,
                seed=4,
            )

        assert run(True).constraint_evaluations <= run(False).constraint_evaluations

    def test_scan_runs_only_for_constraint_agnostic_schedulers(self):
        problem = make_problem("fairness-like", problem_seed=6)
        agnostic = run_experiment(
            problem, NoStoppingScheduler, budget=300.0, max_concurrent=2, seed=6
        )
        aware = run_experiment(
            problem,
            lambda h: ConstraintCallback(NoStoppingScheduler(h)),
            budget=300.0,
            max_concurrent=2,
            seed=6,
        )
        assert agnostic.scan is not None
        assert aware.scan is None

    def test_scan_certification_time_exceeds_budget(self):
        problem = make_problem("fairness-like", problem_seed=2)
        result = run_experiment(
            problem, NoStoppingScheduler, budget=1500.0, max_concurrent=2, seed=2
        )
        assert result.feasible_found
        assert result.time_to_best is not None
        assert result.time_to_best >= result.budget
        assert result.constraint_evaluations == result.scan.evaluations

    def test_reported_score_is_unnegated_for_maximize(self):
        problem = make_problem("fairness-like", problem_seed=0)
        result = run_experiment(
            problem,
            lambda h: AceScheduler(AceConfig(), h),
            budget=2000.0,
            max_concurrent=4,
            seed=0,
        )
        assert result.feasible_found
        assert result.best_feasible_score == pytest.approx(-result.best_feasible_internal)
        assert result.best_feasible_score > 0.4

    def test_interval_tally_matches_trial_rows(self):
        problem = make_problem("fairness-like", problem_seed=7)
        result = run_experiment(
            problem,
            lambda h: AceScheduler(AceConfig(), h),
            budget=400.0,
            max_concurrent=4,
            seed=7,
        )
        every = sum(1 for r in result.trial_rows if r.interval == 1 and r.max_iterations > 1)
        final = sum(
            1 for r in result.trial_rows if r.interval is not None and r.interval == r.max_iterations
        )
        assert result.interval_every_iteration == every
        assert result.interval_final_only == final
        assert every + final == result.total_trials

    def test_asha_arm_runs_and_reaches_rungs(self):
        problem = make_problem("fairness-like", problem_seed=8)
        result = run_experiment(
            problem,
            lambda h: AshaScheduler(AshaConfig(max_time_units=64), h),
            budget=300.0,
            max_concurrent=4,
            seed=8,
        )
        assert result.total_trials > 0
        assert result.scan is not None
        ranked_rows = [d for d in result.decision_rows if d.rank is not None]
        assert ranked_rows
        assert all(d.iteration in (1, 4, 16, 64) for d in ranked_rows)

    def test_invalid_arguments(self):
        problem = fixed_length_problem()
        with pytest.raises(ValueError):
            run_experiment(problem, NoStoppingScheduler, budget=0.0, max_concurrent=1, seed=0)
        with pytest.raises(ValueError):
            run_experiment(problem, NoStoppingScheduler, budget=10.0, max_concurrent=0, seed=0)


class TestProblems:
    def test_preset_names(self):
        with pytest.raises(ValueError):
            make_problem("unknown-preset", 0)
        assert make_problem("fairness-like", 0).maximize
        assert not make_problem("robustness-like", 0).maximize

    def test_calibration_hits_feasible_fraction(self):
        problem = make_problem("fairness-like", problem_seed=0)
        probe_seed = SyntheticProblem._PROBE_SEED_OFFSET + 0
        feasible = 0
        for i in range(SyntheticProblem.PROBE_COUNT):
            config = sample(problem.space, probe_seed, i)
            curve = problem.curve_for(config)
            best = min(constraint_curve_value(curve, t) for t in range(1, curve.max_iterations + 1))
            if best <= problem.constraint.threshold:
                feasible += 1
        fraction = feasible / SyntheticProblem.PROBE_COUNT
        assert abs(fraction - 0.15) <= 0.03

    def test_curves_deterministic_per_config(self):
        problem = make_problem("robustness-like", problem_seed=1)
        config = sequence_for_seed(problem.space, 0, 1)[0]
        assert problem.curve_for(config) == problem.curve_for(config)

    def test_normalized_values_in_unit_box(self):
        problem = make_problem("robustness-like", problem_seed=1)
        for config in sequence_for_seed(problem.space, 3, 20):
            for value in problem.normalized_values(config).values():
                assert 0.0 <= value <= 1.0

    def test_override_replaces_fields(self):
        problem = make_problem("fairness-like", 0, constraint_cost=3.0, feasible_fraction=0.3)
        assert problem.spec.constraint_cost == 3.0
        assert problem.spec.feasible_fraction == 0.3

    def test_invalid_spec_fields(self):
        base = make_problem("fairness-like", 0).spec
        from dataclasses import replace

        with pytest.raises(ValueError):
            replace(base, feasible_fraction=0.0)
        with pytest.raises(ValueError):
            replace(base, rate_param="nope")
