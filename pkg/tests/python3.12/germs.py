#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-

import math

import numpy as NP
from scipy.spatial.distance import directed_hausdorff
from pytest import mark, raises

from fatoulab.config import Settings
from fatoulab.core import *

pytestmark = mark.smoke


def quadratic(lam: float = 0.5) -> GermEnsemble:
    """The single germ lam·z + z²."""
    return GermEnsemble((Jet.from_terms([{(1,): lam, (2,): 1}]),),
                        NP.array([1.0]))


def linear_germs(*matrices) -> GermEnsemble:
    return GermEnsemble.from_cocycle(
        CocycleSpec.iid(MatrixEnsemble.uniform(list(matrices))))


def hausdorff(a: NP.ndarray, b: NP.ndarray) -> float:
    a, b = a.real, b.real
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def test_ensemble_validation():
    with raises(ConfigError):
        GermEnsemble((), NP.zeros(0))
    with raises(ConfigError):
        GermEnsemble((Jet.from_terms([{(0,): 1, (1,): 1}]),), NP.array([1.0]))
    with raises(ConfigError):
        GermEnsemble((Jet.identity(1), Jet.identity(2)), NP.array([0.5, 0.5]))
    with raises(ConfigError):
        GermEnsemble((Jet.identity(1),), NP.array([0.7]))
    with raises(ConfigError):
        GermEnsemble((Jet.identity(1),), NP.array([1.0]), radius=-1.0)
    with raises(ConfigError):
        GermEnsemble.from_cocycle(build_example('R1'))
    ens = linear_germs(NP.eye(2), 0.5 * NP.eye(2))
    assert ens.dimension == 2
    assert ens.compact_support
    assert NP.array_equal(linear_part(ens.atoms[1]), 0.5 * NP.eye(2))


def test_orbit_escape():
    ens = GermEnsemble((Jet.linear([[2.0]]),), NP.array([1.0]), radius=10.0)
    rec = simulate_orbit(ens, 1.0, steps=100)
    assert not rec.bounded
    assert rec.escape_step == 4
    assert list(rec.steps) == [0, 1, 2, 3, 4]
    assert rec.points[-1, 0] == 16
    assert rec.max_norm == 16
    assert list(rec.choices) == [0, 0, 0, 0]
    with raises(ConfigError):
        simulate_orbit(ens, 11.0)
    with raises(ConfigError):
        simulate_orbit(ens, [0.1, 0.1])
    with raises(ConfigError):
        simulate_orbit(ens, 0.1, thin=0)


def test_orbit_replay_and_thinning():
    e2 = build_example('E2')
    z0 = [0.03, 0.02 - 0.01j]
    full = simulate_orbit(e2, z0, steps=500, seed=7)
    assert full.bounded
    assert len(full.choices) == 500
    again = simulate_orbit(e2, z0, choices=full.choices)
    assert NP.array_equal(again.points, full.points)
    assert NP.array_equal(simulate_orbit(e2, z0, steps=500, seed=7).points,
                          full.points)
    thin = simulate_orbit(e2, z0, steps=500, seed=7, thin=7)
    assert list(thin.steps) == [*range(0, 500, 7), 500]
    assert NP.array_equal(thin.points, full.points[thin.steps])
    assert len(full.rows()[0]) == 2 + 2 * 2
    with raises(ConfigError):
        simulate_orbit(e2, z0, choices=[0, 2])


def test_e2_exact_law():
    e2 = build_example('E2')
    for seed in range(10):
        z0 = NP.array([0.04, 0.03 + 0.02j]) * (1 + seed / 10)
        rec = simulate_orbit(e2, z0, steps=1500, seed=seed)
        assert rec.bounded
        halvings = NP.concatenate([[0], NP.cumsum(rec.choices == 0)])
        for step, point in zip(rec.steps, rec.points):
            expected = z0[1] * 2.0 ** -int(halvings[step])
            assert point[1] == expected


@mark.slow
def test_e2_halving_frequency():
    e2 = build_example('E2')
    total = 0
    for seed in range(20):
        rec = simulate_orbit(e2, [0.05, 0.0], steps=10_000, seed=seed)
        total += int(NP.sum(rec.choices == 0))
    assert 0.48 <= total / (20 * 10_000) <= 0.52


def test_e2_membership():
    e2 = build_example('E2')
    report = fatou_membership(e2, 0.05, test_points=2, steps=2000, trials=100)
    assert report.fraction == 1.0
    assert report.bounded.shape == (100, 2)
    assert NP.all(report.exit_steps == -1)
    assert report.record()['fraction'] == 1.0
    threaded = fatou_membership(e2, 0.05, test_points=2, steps=2000,
                                trials=100, threads=3)
    assert NP.array_equal(threaded.exit_steps, report.exit_steps)
    with raises(ConfigError):
        fatou_membership(e2, 0.0)
    with raises(ConfigError):
        fatou_membership(e2, 0.05, trials=0)


@mark.slow
def test_e2_membership_full_scale():
    report = fatou_membership(build_example('E2'), 0.05, steps=10_000,
                              trials=1000)
    assert report.fraction == 1.0


def test_repelling_membership():
    ens = GermEnsemble((Jet.linear([[1.5]]),), NP.array([1.0]))
    report = fatou_membership(ens, 0.5, steps=100, trials=10)
    assert report.fraction == 0.0
    assert NP.all(report.exit_steps > 0)


def test_membership_is_monotone():
    ens = GermEnsemble((Jet.linear([[1.5]]), Jet.linear([[0.6]])),
                       NP.array([0.5, 0.5]))
    by_steps = [fatou_membership(ens, 1.0, 3, n, 200, 4)
                for n in (20, 100, 500)]
    by_delta = [fatou_membership(ens, d, 3, 200, 200, 4)
                for d in (0.25, 1.0, 4.0)]
    for reports in (by_steps, by_delta):
        for a, b in zip(reports, reports[1:]):
            assert NP.all(b.bounded <= a.bounded)
            assert b.fraction <= a.fraction
        assert all(0 < r.fraction < 1 for r in reports)


def test_trapping_radius():
    report = trapping_radius(quadratic(), eps=0.1, trials=1000, steps=100)
    assert abs(report.r - 0.1) < 1e-8
    assert report.r <= 0.1
    assert NP.allclose(report.alphas, [0.6])
    assert abs(report.elog_alpha - math.log(0.6)) < 1e-15
    assert report.contraction is not None
    assert report.contraction.fraction == 1.0
    assert report.contraction.max_final < 1e-8
    assert report.record()['converged_fraction'] == 1.0


def test_trapping_defaults_and_errors():
    auto = trapping_radius(quadratic(), trials=0)
    assert abs(auto.eps - 0.25) < 1e-12
    assert auto.contraction is None
    linear = GermEnsemble((Jet.linear([[0.5]]),), NP.array([1.0]))
    assert trapping_radius(linear, trials=0).r == math.inf
    with raises(NotAttractingError):
        trapping_radius(quadratic(1.0))
    with raises(ConfigError):
        trapping_radius(quadratic(), eps=0.6)
    with raises(TrappingFailure):
        trapping_radius(quadratic(), eps=0.1, floor=1.0)


def test_uniform_trapping():
    stats = uniform_trapping_check(quadratic(), 0.05, 0.1, steps=100,
                                   trials=10)
    assert stats.violations == 0
    assert stats.orbit_violations == 0
    assert stats.orbits > 0
    assert stats.max_norm <= 0.05 * (1 + 1e-12)
    loose = uniform_trapping_check(quadratic(0.99), 0.5, 0.6, steps=50,
                                   trials=3)
    assert loose.violations == 3
    with raises(ConfigError):
        uniform_trapping_check(quadratic(), 0.2, 0.1)


def test_uniform_trapping_linear_ensembles():
    l1 = GermEnsemble.from_cocycle(build_example(L1))
    stats = uniform_trapping_check(l1, 0.1, 1.0, steps=500, trials=20)
    assert stats.violations == 0
    assert stats.max_norm <= 0.25
    doubling = GermEnsemble((Jet.linear([[2.0]]),), NP.array([1.0]))
    stats = uniform_trapping_check(doubling, 0.1, 1.0, steps=20, trials=5)
    assert stats.violations == 5
    assert 0 < stats.orbit_violations < stats.orbits


def test_contraction_statistics():
    stats = contraction_statistics(quadratic(), 0.05, 100, 50, 0)
    assert stats.fraction == 1.0
    slow = contraction_statistics(quadratic(0.9), 0.05, 10, 50, 0)
    assert slow.fraction == 0.0


def test_polydisc_grid():
    grid = polydisc_grid(0.2, 5, 2)
    assert grid.shape == (25, 2)
    assert NP.all(grid.imag == 0)
    disc = polydisc_grid(1.0, 5, 1, real=False)
    assert NP.all(NP.abs(disc) <= 1 + 1e-12)
    spokes = polydisc_grid(0.2, 5, 1, diameters=3)[:, 0]
    assert len(spokes) == 5 + 2 * 4
    assert NP.all(NP.abs(spokes) <= 0.2 * (1 + 1e-12))
    assert NP.sum(spokes.imag != 0) == 8
    angles = NP.angle(spokes[spokes.imag > 0]) / NP.pi
    assert NP.allclose(NP.unique(NP.round(angles, 12)), [1 / 3, 2 / 3])
    assert polydisc_grid(0.2, 9, 2, diameters=3).shape == (25 ** 2, 2)
    with raises(ConfigError):
        polydisc_grid(0.2, 5, 1, diameters=0)


def test_limit_map_of_a_projection():
    ens = linear_germs(NP.diag([1.0, 0.5]))
    est = limit_map_estimate(ens, 0, 0.2, grid_size=17)
    assert est.converged
    assert est.times == (50, 100)
    assert est.defect < Settings().CAUCHY_TOL
    assert NP.allclose(est.values[:, 1], 0, atol=1e-12)
    assert NP.array_equal(est.values[:, 0], est.grid[:, 0])
    profile = rank_profile(est)
    assert profile.degenerate
    assert profile.nonvanishing
    assert abs(profile.origin_sigma[0] - 1) < 1e-6
    assert NP.all(profile.singular_values[:, 1] < 1e-3)
    assert NP.any(est.grid.imag != 0)
    stable = stable_set(est, [0.1, 0.05])
    column = polydisc_grid(0.2, 17, 1, diameters=3)[:, 0]
    assert len(stable.points) == len(column) == 49
    assert NP.allclose(stable.points[:, 0], 0.1, rtol=0, atol=1e-12)
    assert NP.allclose(NP.sort_complex(stable.points[:, 1]),
                       NP.sort_complex(column), rtol=0, atol=1e-15)
    assert stable.residual < 1e-12
    assert abs(abs(stable.direction[1]) - 1) < 1e-12


@mark.slow
def test_limit_map_l1_recurrence():
    l1 = GermEnsemble.from_cocycle(build_example('L1'))
    est = limit_map_estimate(l1, 0, 0.2, grid_size=17)
    assert est.converged
    ni, nj = est.times
    assert 0 < ni < nj
    profile = rank_profile(est)
    assert profile.origin_sigma[0] >= 1 - 1e-3
    assert NP.all(profile.singular_values[:, 1] <= 1e-3)
    stable = stable_set(est, [0.1, 0.05])
    expected = NP.stack([NP.linspace(-0.2, 0.2, 17), NP.full(17, 0.05)],
                        axis=1)
    real = stable.points[stable.points[:, 0].imag == 0]
    assert hausdorff(real, expected) <= 1e-3
    # the level set through z0 crosses the complex diameters too
    assert NP.any(stable.points[:, 0].imag != 0)
    assert NP.all(NP.abs(stable.points[:, 1] - 0.05) < 1e-3)


def test_limit_map_failures():
    l1 = GermEnsemble.from_cocycle(build_example('L1'))
    est = limit_map_estimate(l1, 0, 0.2, grid_size=9, max_n=200)
    assert not est.converged
    assert len(est.defects) == 3
    with raises(NotConverged):
        rank_profile(est)
    with raises(NotConverged):
        stable_set(est, [0.1, 0.05])
    doubling = GermEnsemble((Jet.linear([[2.0]]),), NP.array([1.0]))
    with raises(NumericalFailure):
        limit_map_estimate(doubling, 0, 1.0, grid_size=5)
    with raises(ConfigError):
        limit_map_estimate(GermEnsemble((Jet.identity(4),), NP.array([1.0])),
                           0, 0.1)
    with raises(ConfigError):
        limit_map_estimate(doubling, 0, -1.0)


def test_stable_set_errors():
    est = limit_map_estimate(linear_germs(NP.diag([1.0, 0.5])), 0, 0.2,
                             grid_size=17)
    with raises(StableSetEmpty):
        stable_set(est, [0.103, 0.0])
    with raises(ConfigError):
        stable_set(est, [0.1, 0.05], valid_radius=0.01)


def test_limit_map_control():
    est = LimitMapEstimate.from_map(lambda p: p * NP.array([1.0, 0.0]),
                                    0.2, 9, 2)
    profile = rank_profile(est)
    assert profile.degenerate and profile.nonvanishing
    assert est.record()['grid_points'] == 25 ** 2
    real = LimitMapEstimate.from_map(lambda p: p, 0.2, 9, 2, diameters=1)
    assert real.record()['grid_points'] == 81
    assert NP.all(real.grid.imag == 0)
