#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
from __future__ import annotations
from abc import ABC
from dataclasses import dataclass
from time import perf_counter_ns
from typing import Any, ClassVar, Final, Iterable, Protocol, Self, cast

import numpy          as NP
import scipy.stats    as SS  # pyright: ignore[reportMissingTypeStubs]
import rich.repr      as RR
from immutables import Map

from .Types     import FArray


__all__: list[str] = ['DescribeResults', 'TrialStats', 'describe_trials',
                      'Metrics']


################################################################################
#
# ---------- Trial Statistics -------------------------------------------------
#
#  Every Monte Carlo mean and standard error in the package comes from here,
#  aggregated over values already ordered by trial index.
#

nan: Final[float] = float('nan')


class DescribeResults(Protocol):
    """Typing helper for scipy.stats.describe() results."""
    nobs    : int
    minmax  : tuple[Any, Any]
    mean    : NP.float64
    variance: NP.float64
    skewness: NP.float64
    kurtosis: NP.float64


@RR.auto
@dataclass(frozen=True, slots=True)
class TrialStats:
    nobs    : int
    mean    : float
    stderr  : float
    min     : float
    max     : float
    variance: float

    @property
    def interval(self: Self) -> tuple[float, float]:
        """Three-standard-error interval around the mean."""
        return (self.mean - 3 * self.stderr, self.mean + 3 * self.stderr)


def describe_trials(values: Iterable[float] | FArray) -> TrialStats:
    vals = NP.asarray(list(values) if not isinstance(values, NP.ndarray)
                      else values, dtype=NP.float64)
    nobs = int(vals.size)
    if nobs == 0:
        return TrialStats(0, nan, nan, nan, nan, nan)
    if not NP.all(NP.isfinite(vals)):
        # A -inf trial (singular product) dominates the mean.
        mean = float(NP.mean(vals))
        return TrialStats(nobs, mean, nan,
                          float(NP.min(vals)), float(NP.max(vals)), nan)
    if nobs == 1:
        v = float(vals[0])
        return TrialStats(1, v, nan, v, v, nan)
    summary = cast(DescribeResults,
        SS.describe(vals))  # pyright: ignore[reportUnknownMemberType]
    variance = float(summary.variance)
    return TrialStats(
        nobs     = nobs,
        mean     = float(summary.mean),
        stderr   = float(NP.sqrt(max(variance, 0.0) / nobs)),
        min      = float(summary.minmax[0]),
        max      = float(summary.minmax[1]),
        variance = variance)


################################################################################
#
# ---------- Sensors ----------------------------------------------------------
#

class Metrics:
    """Registry of named sensors, held in an immutable map."""

    registry: Map[str, Metrics.Sensor]

    _Singleton: ClassVar[Metrics | None] = None

    def __init__(self: Self) -> None:
        self.registry = Map()

    @classmethod
    def Singleton(cls: type[Self]) -> Metrics:
        if cls._Singleton is None:
            cls._Singleton = cls()
        return cls._Singleton

    def register(self: Self, sensor: Metrics.Sensor) -> None:
        stored = self.registry.get(sensor.key)
        if stored is not None and stored is not sensor:
            raise RuntimeError(
                f"Can't register {sensor}: "
                f"{sensor.key} registered already to: {stored}")
        self.registry = self.registry.set(sensor.key, sensor)

    def get(self: Self, key: str) -> Metrics.Sensor | None:
        return self.registry.get(key)

    def counter(self: Self, key: str) -> Metrics.Counter:
        found = self.registry.get(key)
        return (found if isinstance(found, Metrics.Counter)
                else Metrics.Counter(key, self))

    def stopwatch(self: Self, key: str) -> Metrics.Stopwatch:
        found = self.registry.get(key)
        return (found if isinstance(found, Metrics.Stopwatch)
                else Metrics.Stopwatch(key, self))

    def snapshot(self: Self) -> dict[str, float]:
        return {k: s.value() for k, s in sorted(self.registry.items())}

    def __rich_repr__(self: Self) -> RR.Result:
        yield from self.snapshot().items()

    class Sensor(ABC):
        key: str
        _metrics: Metrics

        def __init__(self: Self, key: str, metrics: Metrics | None = None
                     ) -> None:
            self.key = key
            self._metrics = metrics if metrics else Metrics.Singleton()
            self._metrics.register(self)

        def value(self: Self) -> float:
            raise NotImplementedError

    class Counter(Sensor):
        _acc: int

        def __init__(self: Self, key: str, metrics: Metrics | None = None
                     ) -> None:
            super().__init__(key, metrics)
            self._acc = 0

        def __call__(self: Self, inc: int = 1) -> int:
            self._acc += inc
            return self._acc

        def value(self: Self) -> float:
            return float(self._acc)

    class Gauge(Sensor):
        _last: float

        def __init__(self: Self, key: str, metrics: Metrics | None = None
                     ) -> None:
            super().__init__(key, metrics)
            self._last = nan

        def __call__(self: Self, val: float) -> float:
            last, self._last = self._last, val
            return last

        def value(self: Self) -> float:
            return self._last

    class Stopwatch(Sensor):
        """Accumulates wall time of `with` blocks, in seconds."""
        _ns: int
        _started: int

        def __init__(self: Self, key: str, metrics: Metrics | None = None
                     ) -> None:
            super().__init__(key, metrics)
            self._ns = 0
            self._started = 0

        def __enter__(self: Self) -> Self:
            self._started = perf_counter_ns()
            return self

        def __exit__(self: Self, *_: Any) -> None:
            self._ns += perf_counter_ns() - self._started

        def value(self: Self) -> float:
            return 1e-9 * self._ns
