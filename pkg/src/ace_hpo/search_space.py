"""Hyperparameter search space with reproducible counter-based sampling.

Every parameter draw is keyed by (seed, trial index, parameter index)
through a dedicated generator stream, so the i-th candidate configuration
depends only on the seed and i: runs that stop early, interleave trials
differently, or change concurrency all see the same candidate sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

__all__ = [
    "ParamKind",
    "ParamSpec",
    "SearchSpace",
    "Configuration",
    "sample",
    "sequence_for_seed",
]


class ParamKind(str, Enum):
    LOG_UNIFORM_REAL = "log_uniform_real"
    UNIFORM_REAL = "uniform_real"
    LOG_UNIFORM_INT = "log_uniform_int"
    CHOICE = "choice"


_RANGED = (ParamKind.LOG_UNIFORM_REAL, ParamKind.UNIFORM_REAL, ParamKind.LOG_UNIFORM_INT)
_LOG_KINDS = (ParamKind.LOG_UNIFORM_REAL, ParamKind.LOG_UNIFORM_INT)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: ParamKind
    low: float | None = None
    high: float | None = None
    choices: tuple[Any, ...] = ()
    initial: Any = None
    iteration_axis: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be nonempty")
        if self.kind in _RANGED:
            if self.low is None or self.high is None:
                raise ValueError(f"{self.name}: ranged parameter needs low and high")
            if not self.low < self.high:
                raise ValueError(f"{self.name}: low must be strictly below high")
            if self.kind in _LOG_KINDS and self.low <= 0:
                raise ValueError(f"{self.name}: log-scale bounds must be positive")
            if self.kind is ParamKind.LOG_UNIFORM_INT and (
                self.low != int(self.low) or self.high != int(self.high)
            ):
                raise ValueError(f"{self.name}: integer parameter needs integer bounds")
        elif self.kind is ParamKind.CHOICE:
            if not self.choices:
                raise ValueError(f"{self.name}: choice parameter needs at least one option")
        if self.iteration_axis and not self._is_integer_kind():
            raise ValueError(f"{self.name}: the iteration axis must be integer-valued")

    def _is_integer_kind(self) -> bool:
        if self.kind is ParamKind.LOG_UNIFORM_INT:
            return True
        return self.kind is ParamKind.CHOICE and all(
            isinstance(c, int) and c >= 1 for c in self.choices
        )


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        if not self.params:
            raise ValueError("search space must have at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        axes = [p for p in self.params if p.iteration_axis]
        if len(axes) != 1:
            raise ValueError("exactly one parameter must be the iteration axis")

    @property
    def iteration_axis(self) -> ParamSpec:
        return next(p for p in self.params if p.iteration_axis)

    def spec(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class Configuration:
    """One sampled candidate: parameter values plus its own iteration budget."""

    values: dict[str, Any]
    max_iterations: int

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _param_rng(seed: int, trial_index: int, param_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(trial_index, param_index))
    return np.random.Generator(np.random.PCG64(ss))


def _sample_param(spec: ParamSpec, rng: np.random.Generator) -> Any:
    if spec.kind is ParamKind.UNIFORM_REAL:
        return float(rng.uniform(spec.low, spec.high))
    if spec.kind is ParamKind.LOG_UNIFORM_REAL:
        return float(math.exp(rng.uniform(math.log(spec.low), math.log(spec.high))))
    if spec.kind is ParamKind.LOG_UNIFORM_INT:
        # Uniform in log space, rounded down, clamped into the bounds.
        raw = math.floor(math.exp(rng.uniform(math.log(spec.low), math.log(spec.high))))
        return int(min(max(raw, spec.low), spec.high))
    return spec.choices[int(rng.integers(len(spec.choices)))]


def sample(space: SearchSpace, seed: int, trial_index: int = 0) -> Configuration:
    """Draw the trial_index-th candidate for a seed, independent of any history."""
    if trial_index < 0:
        raise ValueError("trial_index must be nonnegative")
    values: dict[str, Any] = {}
    for j, spec in enumerate(space.params):
        values[spec.name] = _sample_param(spec, _param_rng(seed, trial_index, j))
    return Configuration(values, int(values[space.iteration_axis.name]))


def sequence_for_seed(space: SearchSpace, seed: int, count: int) -> list[Configuration]:
    return [sample(space, seed, i) for i in range(count)]
