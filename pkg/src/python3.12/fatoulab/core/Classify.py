#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Four-way classification of cocycles by the sign of the top exponent.

An ensemble is Attracting (Repelling) when the three-standard-error
interval of the estimated exponent lies below (above) [-eps, eps].  When
the interval lies inside [-eps, eps] the exact mean log|det| decides
between Neutral (|E log|det|| <= eps) and SemiNeutral (below -eps).
Everything else is Undetermined.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Self, TYPE_CHECKING

import numpy  as NP
import loguru as LG

from .Types     import ConfigError, Verdict
from .Cocycles  import (CocycleSpec, MatrixEnsemble, expected_log_abs_det,
                        lyapunov_exponent)
from .Jets      import linear_part
from ..config   import Settings

if TYPE_CHECKING:
    from .Germs import GermEnsemble


__all__: list[str] = ['Classification', 'decide', 'classify_ensemble',
                      'classify_germ_measure', 'linear_ensemble', 'scaled']


@dataclass(frozen=True, slots=True)
class Classification:
    verdict  : Verdict
    kappa_hat: float
    stderr   : float
    elogdet  : float
    eps_abs  : float
    n        : int
    trials   : int
    seed     : int

    def record(self: Self) -> dict[str, Any]:
        return {'verdict': str(self.verdict), 'kappa_hat': self.kappa_hat,
                'stderr': self.stderr, 'elogdet': self.elogdet,
                'eps_abs': self.eps_abs, 'n': self.n,
                'trials': self.trials, 'seed': self.seed}


def decide(kappa: float, stderr: float, elogdet: float, eps_abs: float
           ) -> Verdict:
    if kappa == float('-inf'):
        return Verdict.Attracting
    # a single trial has no spread to judge by
    if not NP.isfinite(kappa) or not NP.isfinite(stderr):
        return Verdict.Undetermined
    spread = 3 * stderr
    lo, hi = kappa - spread, kappa + spread
    if hi < -eps_abs:
        return Verdict.Attracting
    if lo > eps_abs:
        return Verdict.Repelling
    if lo >= -eps_abs and hi <= eps_abs:
        if abs(elogdet) <= eps_abs:
            return Verdict.Neutral
        if elogdet < -eps_abs:
            return Verdict.SemiNeutral
    return Verdict.Undetermined


def classify_ensemble(spec: CocycleSpec, n: int, trials: int, seed: int,
                      eps_abs: float | None = None) -> Classification:
    eps = eps_abs if eps_abs is not None else Settings().EPS_ABS
    if eps <= 0:
        raise ConfigError(f"eps_abs must be positive: {eps}")
    stats = lyapunov_exponent(spec, n, trials, seed)
    elogdet = expected_log_abs_det(spec)
    verdict = decide(stats.mean, stats.stderr, elogdet, eps)
    LG.logger.bind(op='classify', n=n, trials=trials, seed=seed).info(
        f"{verdict}: kappa={stats.mean:.6g}±{stats.stderr:.2g}, "
        f"E log|det|={elogdet:.6g}")
    return Classification(verdict, stats.mean, stats.stderr, elogdet, eps,
                          n, trials, seed)


def scaled(spec: CocycleSpec, c: complex) -> CocycleSpec:
    """The ensemble of c·A; its exponents shift by log|c|."""
    if c == 0:
        raise ConfigError("Scale factor must be nonzero")
    return CocycleSpec.iid(spec.ensemble.scaled(c))


def linear_ensemble(ensemble: GermEnsemble) -> MatrixEnsemble:
    """Push a germ ensemble forward through f -> df(0)."""
    if not all(f.fixes_origin for f in ensemble.atoms):
        raise ConfigError("Every germ must fix the origin")
    return MatrixEnsemble(NP.array([linear_part(f) for f in ensemble.atoms]),
                          ensemble.probabilities)


def classify_germ_measure(ensemble: GermEnsemble, n: int, trials: int,
                          seed: int, eps_abs: float | None = None
                          ) -> Classification:
    return classify_ensemble(CocycleSpec.iid(linear_ensemble(ensemble)),
                             n, trials, seed, eps_abs)
