#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-

import numpy as NP
from pytest import mark, raises

from rich.pretty import pretty_repr

from fatoulab.config import Settings
from fatoulab.core import *

pytestmark = mark.smoke


def test_settings_singleton():
    assert Settings() is Settings()
    s = Settings()
    assert s.DEGREE == 8
    assert s.PERIOD == 10
    assert s.RADIUS == 10.0
    assert s.INDEX_CAP == 60


def test_settings_env(monkeypatch):
    monkeypatch.setenv('FATOULAB_THREADS', '4')
    try:
        assert Settings.reload().THREADS == 4
    finally:
        monkeypatch.delenv('FATOULAB_THREADS')
        Settings.reload()
    assert Settings().THREADS == 1


def test_mix_seed():
    assert mix_seed(0, 0) != mix_seed(0, 1)
    assert mix_seed(0, 1) != mix_seed(1, 0)
    assert 0 <= mix_seed(2**70, 3) < 2**64
    assert mix_seed(7, 5) == mix_seed(7, 5)
    with raises(ConfigError):
        mix_seed(0, -1)


def test_trial_streams_are_reproducible():
    a = trial_rng(42, 3).random(5)
    b = trial_rng(42, 3).random(5)
    c = trial_rng(42, 4).random(5)
    assert NP.array_equal(a, b)
    assert not NP.array_equal(a, c)


def test_index_blocks_prefix_stable():
    cdf = cumulative(NP.array([0.25, 0.25, 0.5]))
    assert cdf[-1] == 1.0
    long = NP.concatenate(list(index_blocks(trial_rngs(1, range(3)), cdf,
                                            100, block=7)), axis=1)
    short = NP.concatenate(list(index_blocks(trial_rngs(1, range(3)), cdf,
                                             40, block=7)), axis=1)
    assert long.shape == (3, 100)
    assert NP.array_equal(long[:, :40], short)
    assert set(NP.unique(long)) <= {0, 1, 2}


def test_draw_indices_frequencies():
    cdf = cumulative(NP.array([0.1, 0.9]))
    idx = draw_indices(trial_rng(0, 0), cdf, 20000)
    assert abs(NP.mean(idx == 0) - 0.1) < 0.01


def test_unit_ball():
    pts = unit_ball(trial_rng(3, 0), 500, 2)
    assert pts.shape == (500, 2)
    assert NP.all(NP.linalg.norm(pts, axis=1) <= 1.0)


def test_map_trials_keeps_order():
    def fn(trials: range) -> list[int]:
        return [t * t for t in trials]
    assert map_trials(fn, 10, threads=1) == [t * t for t in range(10)]
    assert map_trials(fn, 10, threads=3) == [t * t for t in range(10)]
    assert map_trials(fn, 0, threads=3) == []


def test_describe_trials():
    stats = describe_trials([1.0, 2.0, 3.0, 4.0])
    assert stats.nobs == 4
    assert stats.mean == 2.5
    assert stats.min == 1.0 and stats.max == 4.0
    assert abs(stats.stderr - NP.sqrt(stats.variance / 4)) < 1e-15
    lo, hi = stats.interval
    assert lo < 2.5 < hi
    assert NP.isnan(describe_trials([]).mean)
    assert describe_trials([1.0, -NP.inf]).mean == -NP.inf


def test_metrics_registry():
    metrics = Metrics()
    count = metrics.counter('steps')
    count()
    count(4)
    assert metrics.counter('steps') is count
    assert metrics.snapshot()['steps'] == 5.0
    with metrics.stopwatch('wall'):
        pass
    assert metrics.snapshot()['wall'] >= 0.0
    gauge = Metrics.Gauge('last', metrics)
    gauge(2.0)
    assert gauge.value() == 2.0
    with raises(RuntimeError):
        Metrics.Counter('last', metrics)


def test_errors():
    assert issubclass(JetError, ConfigError)
    assert issubclass(ConfigError, ValueError)
    assert issubclass(NotAttractingError, ConfigError)
    assert issubclass(SeparationFailure, NumericalFailure)
    assert issubclass(NumericalFailure, ArithmeticError)
    assert SeparationFailure(7, 'bump too narrow').k == 7
    assert MonotonicityViolation(12, 'norm dropped').step == 12
    assert NotConverged('no', [1.0, 0.5]).defects == (1.0, 0.5)


def test_verdicts():
    assert Verdict('Attracting') is Verdict.Attracting
    assert {str(v) for v in Verdict} == {
        'Attracting', 'Repelling', 'Neutral', 'SemiNeutral', 'Undetermined'}


def test_pretty_repr():
    assert isRichReprable(MonomialBasis.get(2, 3))
    assert 'degree' in pretty_repr(Jet.identity(2, 3))
    assert 'mean' in pretty_repr(describe_trials([1.0, 2.0]))
