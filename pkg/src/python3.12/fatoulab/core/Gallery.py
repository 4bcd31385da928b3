#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Built-in example systems and their bespoke checks.

    E1_noncompact                  f_i(z) = λz + a_i z², a_i = λ^(-3·2^i),
                                   P(i) = 2^-i for i >= 1
    E2_semineutral_germs           (z, w/2) and (z + zw, w), ½ each
    E3_neutral_adversarial         λ(z + z²) and λ(z - z²), λ = e^(2πiα)
    L1_linear_semineutral          [[½,0],[0,1]] and [[½,1],[0,1]]
    L2_linear_semineutral_variant  [[1,0],[0,½]] and [[1,1],[0,½]]
    R1_rotation_simple             M_x = e^(φ(x) - φ(Tx)), φ = -log
    R2_rotation_continuous         M_x = e^(Σ f_k(x)), tents up to layer K

L2 is a reconstruction: its limits are (z + βw, 0) with β in [0, 2).
"""

from __future__ import annotations
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Any, Callable, Final, Iterable, Self, Sequence

import numpy           as NP
import scipy.integrate as SI  # pyright: ignore[reportMissingTypeStubs]
import sympy           as SY
import loguru          as LG
import rich.repr       as RR
from immutables import Map
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .Types    import (CArray, ConfigError, FArray, IArray,
                       MonotonicityViolation, SeparationFailure)
from .Jets     import Jet
from .Streams  import cumulative, index_blocks, trial_rngs
from .Cocycles import CocycleSpec, MatrixEnsemble, RotationDriver
from .Germs    import GermEnsemble, IndexedGenerator
from ..config  import Settings


__all__: list[str] = [
    'GOLDEN_MEAN', 'ExampleName', 'ExampleId', 'build_example',
    'resolve_example', 'example_file', 'e1_log_coefficient',
    'e1_generator', 'e1_second_coefficient', 'e1_blowup_statistics',
    'e1_tail_probability', 'e1_tail_exact', 'SecondCoefficient',
    'BlowupStats', 'adversarial_orbit', 'AdversarialOrbit',
    'TentLayer', 'RotationTents', 'RotationEval', 'rotation_cocycle_eval',
    'BrjunoSum', 'brjuno_partial_sum',
]


GOLDEN_MEAN: Final[float] = (math.sqrt(5.0) - 1.0) / 2.0
MAX_LAYERS : Final[int] = 12
MAX_DEPTH  : Final[int] = 40


#############################################################################
#  Example identifiers
# ---------------------
#

class ExampleName(StrEnum):
    E1 = 'E1_noncompact'
    E2 = 'E2_semineutral_germs'
    E3 = 'E3_neutral_adversarial'
    L1 = 'L1_linear_semineutral'
    L2 = 'L2_linear_semineutral_variant'
    R1 = 'R1_rotation_simple'
    R2 = 'R2_rotation_continuous'


def resolve_example(name: str | ExampleName) -> ExampleName:
    """Accept full names or their short prefixes (E1, L2, ...)."""
    if isinstance(name, ExampleName):
        return name
    for member in ExampleName:
        if name in (member.value, member.name):
            return member
    raise ConfigError(
        f"Unknown example {name!r}; known: {[m.value for m in ExampleName]}")


class ExampleId(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    name  : ExampleName
    lam   : float = Field(default=0.5, gt=0, lt=1)
    theta : float = GOLDEN_MEAN
    alpha : float = GOLDEN_MEAN
    K     : int   = Field(default=8, ge=1, le=MAX_LAYERS)
    cap   : int   = Field(default_factory=lambda: Settings().INDEX_CAP, ge=1)
    degree: int | None = Field(default=None, ge=2)

    @field_validator('name', mode='before')
    @classmethod
    def _short_names(cls, v: Any) -> Any:
        return resolve_example(v) if isinstance(v, str) else v

    @field_validator('theta', 'alpha')
    @classmethod
    def _unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError(f"must lie in (0, 1): {v}")
        return v


def _linear(name: str, atoms: Sequence[Any]) -> CocycleSpec:
    LG.logger.bind(op='build_example').debug(f"{name}: {len(atoms)} atoms")
    return CocycleSpec.iid(MatrixEnsemble.uniform(atoms))


def _e1(eid: ExampleId) -> GermEnsemble:
    return GermEnsemble.from_generator(e1_generator(eid.lam, eid.cap,
                                                    eid.degree))


def _e2(eid: ExampleId) -> GermEnsemble:
    z, w = SY.symbols('z w')
    return GermEnsemble(
        (Jet.from_sympy([z, w / 2], [z, w], eid.degree),
         Jet.from_sympy([z + z * w, w], [z, w], eid.degree)),
        NP.array([0.5, 0.5]))


def _e3(eid: ExampleId) -> GermEnsemble:
    lam = complex(NP.exp(2j * NP.pi * eid.alpha))
    return GermEnsemble(
        (Jet.from_terms([{(1,): lam, (2,): lam}], eid.degree),
         Jet.from_terms([{(1,): lam, (2,): -lam}], eid.degree)),
        NP.array([0.5, 0.5]))


def _l1(_: ExampleId) -> CocycleSpec:
    return _linear('L1', [[[0.5, 0], [0, 1]], [[0.5, 1], [0, 1]]])


def _l2(_: ExampleId) -> CocycleSpec:
    return _linear('L2', [[[1, 0], [0, 0.5]], [[1, 1], [0, 0.5]]])


def _r1(eid: ExampleId) -> CocycleSpec:
    theta = eid.theta

    def multiplier(x: FArray) -> CArray:
        return (NP.mod(x + theta, 1.0) / x)[..., None, None].astype(
            NP.complex128)

    return CocycleSpec.rotation(RotationDriver(
        theta, multiplier, 1, 'R1', 0.0, Map(theta=theta)))


def _r2(eid: ExampleId) -> CocycleSpec:
    tents = RotationTents(eid.K, eid.theta)

    def multiplier(x: FArray) -> CArray:
        return NP.exp(tents.f(x))[..., None, None].astype(NP.complex128)

    return CocycleSpec.rotation(RotationDriver(
        eid.theta, multiplier, 1, 'R2', 0.0, Map(theta=eid.theta, K=eid.K)))


_BUILDERS: Final[Map[ExampleName, Callable[[ExampleId],
                                           GermEnsemble | CocycleSpec]]] = Map({
    ExampleName.E1: _e1, ExampleName.E2: _e2, ExampleName.E3: _e3,
    ExampleName.L1: _l1, ExampleName.L2: _l2,
    ExampleName.R1: _r1, ExampleName.R2: _r2,
})


def build_example(eid: ExampleId | ExampleName | str
                  ) -> GermEnsemble | CocycleSpec:
    if not isinstance(eid, ExampleId):
        eid = ExampleId(name=resolve_example(eid))
    return _BUILDERS[eid.name](eid)


def example_file(eid: ExampleId | ExampleName | str) -> str:
    """Data file from which the example can be rebuilt."""
    from .Files import dump_example
    if not isinstance(eid, ExampleId):
        eid = ExampleId(name=resolve_example(eid))
    return dump_example(eid, build_example(eid))


#############################################################################
#  E1: a non-compactly supported attracting measure
# --------------------------------------------------
#
#  The z² coefficient of f_{i_n}∘...∘f_{i_1} obeys
#
#      c_n = λ c_{n-1} + a_{i_n} λ^(2(n-1)),   c_0 = 0,
#
#  which is λ^(n-1) Σ_k λ^(k-1) a_{i_k}.  All of it is carried in logs.
#

def e1_log_coefficient(lam: float) -> Callable[[int], float]:
    log_lam = math.log(lam)
    return lambda i: -3.0 * (2.0 ** i) * log_lam


def e1_generator(lam: float = 0.5, cap: int | None = None,
                 degree: int | None = None) -> IndexedGenerator:
    if not 0 < lam < 1:
        raise ConfigError(f"λ must lie in (0, 1): {lam}")
    cap = cap if cap else Settings().INDEX_CAP
    indices = NP.arange(1, cap + 1, dtype=NP.int64)
    weights = NP.ldexp(1.0, -indices)
    pmf = weights / weights.sum()
    log_a = e1_log_coefficient(lam)
    ceiling = math.log(NP.finfo(NP.float64).max)
    overflowed = tuple(int(i) for i in indices if log_a(int(i)) > ceiling)

    def rule(i: int) -> Jet:
        la = log_a(i)
        a = float(NP.finfo(NP.float64).max) if la > ceiling else math.exp(la)
        return Jet.from_terms([{(1,): lam, (2,): a}], degree)

    if overflowed:
        LG.logger.bind(op='e1_generator').debug(
            f"coefficients clamped for indices {overflowed[0]}..{cap}")
    return IndexedGenerator('E1', Map(lam=lam), indices, pmf, rule,
                            float(2.0 ** -cap), overflowed)


@dataclass(frozen=True, slots=True)
class SecondCoefficient:
    log_c       : FArray          # log c_1, ..., log c_n
    log_bound   : FArray          # log(λ^(2n) a_{i_n})
    bound_holds : bool

    @property
    def value(self: Self) -> float:
        return math.exp(self.log_c[-1]) if len(self.log_c) else 0.0


def e1_second_coefficient(indices: Iterable[int], lam: float = 0.5,
                          coefficient: Callable[[int], float] | None = None
                          ) -> SecondCoefficient:
    """z² coefficient of the composed germ along an index prefix.

    `coefficient` overrides a_i (given as a value, not a log)."""
    seq = [int(i) for i in indices]
    if coefficient is None:
        log_a = e1_log_coefficient(lam)
    else:
        log_a = lambda i: math.log(coefficient(i))  # noqa: E731
    log_lam = math.log(lam)
    log_c = NP.empty(len(seq))
    bound = NP.empty(len(seq))
    prev = -NP.inf
    for n, i in enumerate(seq, start=1):
        la = log_a(i)
        prev = float(NP.logaddexp(log_lam + prev, la + 2 * (n - 1) * log_lam))
        log_c[n - 1] = prev
        bound[n - 1] = la + 2 * n * log_lam
    holds = bool(NP.all(log_c >= bound - 1e-12 * NP.abs(bound)))
    return SecondCoefficient(log_c, bound, holds)


@dataclass(frozen=True, slots=True)
class BlowupStats:
    fraction : float
    horizon  : int
    threshold: float              # in decades: blowup is log10|c_n| > it
    trials   : int
    seed     : int
    max_log10: FArray             # per trial


def _e1_draws(generator: IndexedGenerator, rngs: Sequence[NP.random.Generator],
              horizon: int) -> Iterable[IArray]:
    for block in index_blocks(rngs, cumulative(generator.pmf), horizon):
        yield generator.indices[block]


def e1_blowup_statistics(lam: float, trials: int, horizon: int,
                         threshold: float, seed: int, cap: int | None = None
                         ) -> BlowupStats:
    """Fraction of trials whose z² coefficient passes 10**threshold by
    `horizon`.  Trials keep their stream prefixes across horizons, so
    the fraction is nondecreasing in the horizon."""
    if trials < 1 or horizon < 0:
        raise ConfigError(f"Need trials >= 1 and horizon >= 0: {trials}, "
                          f"{horizon}")
    gen = e1_generator(lam, cap)
    log_lam = math.log(lam)
    log_c = NP.full(trials, -NP.inf)
    best = NP.full(trials, -NP.inf)
    n = 0
    for block in _e1_draws(gen, trial_rngs(seed, range(trials)), horizon):
        for s in range(block.shape[1]):
            n += 1
            la = -3.0 * NP.ldexp(1.0, block[:, s]) * log_lam
            log_c = NP.logaddexp(log_lam + log_c, la + 2 * (n - 1) * log_lam)
            best = NP.maximum(best, log_c)
    max_log10 = best / math.log(10.0)
    fraction = float(NP.mean(max_log10 > threshold)) if horizon else 0.0
    return BlowupStats(fraction, horizon, threshold, trials, seed, max_log10)


def e1_tail_exact(n: int, cap: int | None = None) -> float:
    """P(2^i >= n) under the truncated index law."""
    gen_cap = cap if cap else Settings().INDEX_CAP
    indices = NP.arange(1, gen_cap + 1)
    weights = NP.ldexp(1.0, -indices)
    weights /= weights.sum()
    return float(weights[NP.ldexp(1.0, indices) >= n].sum())


def e1_tail_probability(n: int, trials: int, seed: int,
                        cap: int | None = None) -> float:
    """Empirical P(λ^(2n) a_{i_n} >= λ^(-n)), i.e. P(2^(i_n) >= n)."""
    if n < 1:
        raise ConfigError(f"Step must be at least 1: {n}")
    gen = e1_generator(0.5, cap)
    draws = NP.concatenate(list(_e1_draws(
        gen, trial_rngs(seed, range(trials)), n)), axis=1)
    return float(NP.mean(NP.ldexp(1.0, draws[:, n - 1]) >= n))


#############################################################################
#  E3: the adversarial strategy
# ------------------------------
#

@dataclass(frozen=True, eq=False)
class AdversarialOrbit:
    z0       : complex
    alpha    : float
    points   : CArray
    norms    : FArray
    choices  : IArray             # 1 for λ(z+z²), 2 for λ(z-z²)
    exit_step: int | None         # first step with |z| > 1

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'z0', self.z0
        yield 'alpha', self.alpha
        yield 'steps', len(self.choices)
        yield 'exit_step', self.exit_step, None


def adversarial_orbit(z0: complex, alpha: float = GOLDEN_MEAN,
                      steps: int = 100_000, stop_radius: float = 2.0,
                      slack: float = 1e-14) -> AdversarialOrbit:
    """Follow f_1 when Re z >= 0 and f_2 otherwise; the norm never drops."""
    z = complex(z0)
    if z == 0:
        raise ConfigError("The adversarial orbit needs z0 != 0")
    lam = complex(NP.exp(2j * NP.pi * alpha))
    points = [z]
    norms = [abs(z)]
    choices: list[int] = []
    exit_step: int | None = None
    for n in range(1, steps + 1):
        if z.real >= 0:
            z, c = lam * (z + z * z), 1
        else:
            z, c = lam * (z - z * z), 2
        r = abs(z)
        if r < norms[-1] * (1 - slack):
            raise MonotonicityViolation(
                n, f"|z| fell from {norms[-1]!r} to {r!r} at step {n}")
        points.append(z)
        norms.append(r)
        choices.append(c)
        if exit_step is None and r > 1:
            exit_step = n
        if r > stop_radius:
            break
    return AdversarialOrbit(complex(z0), alpha, NP.array(points),
                            NP.array(norms), NP.array(choices, NP.int64),
                            exit_step)


#############################################################################
#  R2: tents along a rotation orbit
# ----------------------------------
#
#  Layer k has a = 2^k·k and tents of half width eps around the orbit
#  points ω_j = T^(j-1)(0), j = 0, ..., 2a+1, stepped with the same float
#  rotation T the cocycle uses.  With h = 1 - |δ|/eps at offset δ from ω_j:
#
#      f_k = -h/2^k  for 1 <= j <= a,      +h/2^k  for a < j <= 2a
#      φ_k = c_j h/2^k,   c_j = j-1 (j <= a+1),   2a-j+1 beyond
#
#  and T moves (j, δ) to (j+1, δ), which gives f_k = φ_k - φ_k∘T.  The
#  image ω_{2a+2} of the last tent must stay clear of every tent.
#

def _circular(d: FArray) -> FArray:
    return d - NP.round(d)


@dataclass(frozen=True, eq=False)
class TentLayer:
    k        : int
    a        : int
    eps      : float
    theta    : float
    positions: FArray             # ω_j for j = 0, ..., 2a+1
    _order   : IArray
    _sorted  : FArray

    @classmethod
    def build(cls: type[Self], k: int, theta: float) -> Self:
        a = (1 << k) * k
        steps = [float(NP.mod(-theta, 1.0)), 0.0]
        for _ in range(2 * a + 1):
            steps.append(float(NP.mod(steps[-1] + theta, 1.0)))
        orbit = NP.array(steps)
        positions = orbit[:-1]
        order = NP.argsort(positions, kind='stable')
        ordered = positions[order]
        spread = NP.sort(orbit)
        gaps = NP.diff(NP.append(spread, spread[0] + 1.0))
        gap = float(gaps.min())
        eps = 1.0 / a ** 2
        while 2 * eps >= gap:
            eps /= 2
            if eps < 1e-15:
                raise SeparationFailure(
                    k, f"Tents of layer {k} cannot be separated for "
                       f"θ={theta!r}: minimal gap {gap:.3e}")
        return cls(k, a, eps, theta, positions, order, ordered)

    def _c(self: Self, j: IArray) -> FArray:
        a = self.a
        c = NP.where(j <= a + 1, j - 1, 2 * a - j + 1)
        return NP.clip(c, 0, None).astype(NP.float64)

    def _sign(self: Self, j: IArray) -> FArray:
        a = self.a
        return NP.where((j >= 1) & (j <= a), -1.0,
                        NP.where((j > a) & (j <= 2 * a), 1.0, 0.0))

    def height(self: Self, delta: FArray) -> FArray:
        return NP.clip(1.0 - NP.abs(delta) / self.eps, 0.0, None)

    def f_local(self: Self, j: IArray, delta: FArray) -> FArray:
        return self._sign(j) * self.height(delta) / (1 << self.k)

    def phi_local(self: Self, j: IArray, delta: FArray) -> FArray:
        return self._c(j) * self.height(delta) / (1 << self.k)

    def locate(self: Self, x: FArray) -> tuple[IArray, FArray]:
        """Tent index j (-1 outside all tents) and signed offset."""
        x = NP.mod(NP.asarray(x, dtype=NP.float64), 1.0)
        n = len(self._sorted)
        hi = NP.searchsorted(self._sorted, x) % n
        lo = (hi - 1) % n
        d_hi = _circular(x - self._sorted[hi])
        d_lo = _circular(x - self._sorted[lo])
        near = NP.where(NP.abs(d_lo) <= NP.abs(d_hi), lo, hi)
        delta = NP.where(NP.abs(d_lo) <= NP.abs(d_hi), d_lo, d_hi)
        inside = NP.abs(delta) < self.eps
        j = NP.where(inside, self._order[near], -1).astype(NP.int64)
        return j, NP.where(inside, delta, 0.0)

    def f(self: Self, x: FArray) -> FArray:
        j, delta = self.locate(x)
        return NP.where(j >= 0, self.f_local(j, delta), 0.0)

    def phi(self: Self, x: FArray) -> FArray:
        j, delta = self.locate(x)
        return NP.where(j >= 0, self.phi_local(j, delta), 0.0)

    def integral(self: Self, samples: int = 201) -> float:
        """∫φ_k by the trapezoid rule on each tent, exact for tents."""
        delta = NP.linspace(-self.eps, self.eps, samples | 1)
        tent = float(SI.trapezoid(self.height(delta), delta))
        j = NP.arange(2 * self.a + 2)
        return float(self._c(j).sum()) * tent / (1 << self.k)

    def identity_defect(self: Self, rng: NP.random.Generator,
                        samples: int = 1000) -> float:
        """max |f_k(x) - φ_k(x) + φ_k(Tx)| on random points, half of them
        drawn inside tents."""
        near = self.positions[rng.integers(0, len(self.positions), samples)]
        x = NP.mod(NP.concatenate([
            rng.random(samples),
            near + rng.uniform(-self.eps, self.eps, samples)]), 1.0)
        image = NP.mod(x + self.theta, 1.0)
        return float(NP.max(NP.abs(
            self.f(x) - (self.phi(x) - self.phi(image)))))


class RotationTents:
    """Layers 1..K of the continuous coboundary over x -> x + θ."""

    K     : int
    theta : float
    layers: tuple[TentLayer, ...]

    def __init__(self: Self, K: int, theta: float = GOLDEN_MEAN) -> None:
        if not 1 <= K <= MAX_LAYERS:
            raise ConfigError(f"K must lie in [1, {MAX_LAYERS}]: {K}")
        if not 0 < theta < 1:
            raise ConfigError(f"θ must lie in (0, 1): {theta}")
        self.K = K
        self.theta = theta
        self.layers = tuple(TentLayer.build(k, theta) for k in range(1, K + 1))

    @property
    def envelope(self: Self) -> tuple[float, ...]:
        """Tent half widths per layer."""
        return tuple(layer.eps for layer in self.layers)

    @property
    def designated_point(self: Self) -> float:
        """ω_{a_K+1}, where φ_K reaches K."""
        last = self.layers[-1]
        return float(last.positions[last.a + 1])

    def rotate(self: Self, x: FArray, n: int = 1) -> FArray:
        return NP.mod(NP.asarray(x) + n * self.theta, 1.0)

    def f(self: Self, x: FArray) -> FArray:
        x = NP.asarray(x, dtype=NP.float64)
        return sum((layer.f(x) for layer in self.layers), NP.zeros(x.shape))

    def phi(self: Self, x: FArray) -> FArray:
        x = NP.asarray(x, dtype=NP.float64)
        return sum((layer.phi(x) for layer in self.layers),
                   NP.zeros(x.shape))

    def integrals(self: Self) -> tuple[float, ...]:
        return tuple(layer.integral() for layer in self.layers)

    def identity_defects(self: Self, samples: int = 1000, seed: int = 0
                         ) -> tuple[float, ...]:
        rngs = trial_rngs(seed, range(self.K))
        return tuple(layer.identity_defect(r, samples)
                     for layer, r in zip(self.layers, rngs))

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'K', self.K
        yield 'theta', self.theta
        yield 'envelope', self.envelope


@dataclass(frozen=True, eq=False)
class RotationEval:
    x      : FArray
    n      : int
    f      : FArray               # Σ_k f_k(x)
    phi    : FArray               # Σ_k φ_k(x)
    product: FArray               # M^n_x = exp(φ(x) - φ(T^n x))
    direct : FArray               # exp(Σ_{i<n} f(T^i x))


def rotation_cocycle_eval(K: int, theta: float, x: float | FArray, n: int,
                          tents: RotationTents | None = None) -> RotationEval:
    tents = tents if tents is not None else RotationTents(K, theta)
    if n < 0:
        raise ConfigError(f"n must be nonnegative: {n}")
    xs = NP.atleast_1d(NP.asarray(x, dtype=NP.float64))
    phi = tents.phi(xs)
    product = NP.exp(phi - tents.phi(tents.rotate(xs, n)))
    steps = NP.arange(n, dtype=NP.float64)
    orbit = NP.mod(xs[:, None] + steps[None] * theta, 1.0)
    direct = NP.exp(tents.f(orbit).sum(axis=1))
    return RotationEval(xs, n, tents.f(xs), phi, product, direct)


#############################################################################
#  Brjuno sums
# -------------
#

@dataclass(frozen=True, eq=False)
class BrjunoSum:
    quotients   : tuple[int, ...]     # a_0, a_1, ..., a_depth
    q           : tuple[int, ...]     # q_0, q_1, ..., q_depth
    partial_sums: FArray              # Σ_{k<=n} log(q_{k+1})/q_k
    converged   : bool                # heuristic only
    depth       : int

    def record(self: Self) -> dict[str, Any]:
        return {'depth': self.depth, 'q': [str(q) for q in self.q],
                'partial_sums': self.partial_sums.tolist(),
                'converged_hint': self.converged}


def brjuno_partial_sum(alpha: float | None = None, depth: int = 20,
                       quotients: Sequence[int] | None = None,
                       tail_tol: float = 1e-6) -> BrjunoSum:
    """Partial Brjuno sums of α, or of explicit partial quotients.

    α is expanded exactly as the rational value of the double, so the
    expansion terminates; reaching the end before `depth` is an error.
    """
    if not 1 <= depth <= MAX_DEPTH:
        raise ConfigError(f"depth must lie in [1, {MAX_DEPTH}]: {depth}")
    if quotients is None:
        if alpha is None or not 0 < alpha < 1:
            raise ConfigError(f"α must lie in (0, 1): {alpha}")
        terms: list[int] = []
        for a in SY.continued_fraction_iterator(SY.Rational(alpha)):
            terms.append(int(a))
            if len(terms) > depth:
                break
        if len(terms) <= depth:
            raise ConfigError(
                f"α={alpha!r} is rational in double precision: its "
                f"continued fraction terminates at depth {len(terms) - 1}")
    else:
        terms = [int(a) for a in quotients][:depth + 1]
        if len(terms) <= depth or any(a < 1 for a in terms[1:]):
            raise ConfigError(
                f"Need {depth + 1} partial quotients, positive after a_0")
    q = [1]
    prev = 0
    for a in terms[1:]:
        q, prev = [*q, a * q[-1] + prev], q[-1]
    logs = [math.log(qq) for qq in q]
    # log(q_{k+1})/q_k through logs, q_k may exceed the double range
    increments = NP.array([math.exp(math.log(nxt) - cur) if nxt > 0 else 0.0
                           for cur, nxt in zip(logs[:-1], logs[1:])])
    sums = NP.cumsum(increments)
    converged = bool(increments[-1] < tail_tol)
    LG.logger.bind(op='brjuno_partial_sum').debug(
        f"depth {depth}: sum {sums[-1]:.6g}, last increment "
        f"{increments[-1]:.3g}")
    return BrjunoSum(tuple(terms), tuple(q), sums, converged, depth)
