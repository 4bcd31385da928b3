#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Random orbits of polynomial germs fixing the origin.

Orbits are computed by evaluating the chosen atom at the current point,
never by composing jets.  Within a trial one atom sequence drives every
start point of that trial.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Self, Sequence

import numpy          as NP
import scipy.optimize as SO  # pyright: ignore[reportMissingTypeStubs]
import scipy.spatial  as SSP # pyright: ignore[reportMissingTypeStubs]
import loguru         as LG
import rich.repr      as RR

from .Types    import (BArray, CArray, ConfigError, FArray, IArray,
                       NotAttractingError, NotConverged, NumericalFailure,
                       Point, StableSetEmpty, TrappingFailure, as_point)
from .Jets     import Jet, JetEvaluator, linear_part
from .Streams  import (cumulative, index_blocks, map_trials, trial_rng,
                       trial_rngs, unit_ball)
from .Cocycles import CocycleSpec, IIDDriver
from ..config  import Settings


__all__: list[str] = [
    'IndexedGenerator', 'GermEnsemble', 'OrbitRecord', 'MembershipReport',
    'ContractionStats', 'TrappingReport', 'UniformTrapStats',
    'LimitMapEstimate', 'RankProfile', 'StableSet',
    'simulate_orbit', 'fatou_membership', 'contraction_statistics',
    'trapping_radius', 'uniform_trapping_check', 'limit_map_estimate',
    'rank_profile', 'stable_set', 'polydisc_grid',
]


#############################################################################
#  Ensembles
# -----------
#

@dataclass(frozen=True, eq=False)
class IndexedGenerator:
    """Countable family i -> rule(i) with pmf truncated at `cap`."""
    family     : str
    params     : Mapping[str, Any]
    indices    : IArray
    pmf        : FArray               # renormalized over `indices`
    rule       : Callable[[int], Jet]
    tv_distance: float                # mass removed by the truncation
    overflowed : tuple[int, ...] = ()

    @property
    def cap(self: Self) -> int:
        return int(self.indices[-1])

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'family', self.family
        yield 'params', dict(self.params)
        yield 'cap', self.cap
        yield 'tv_distance', self.tv_distance
        yield 'overflowed', self.overflowed, ()


@dataclass(frozen=True, eq=False)
class GermEnsemble:
    atoms          : tuple[Jet, ...]
    probabilities  : FArray
    radius         : float = field(default_factory=lambda: Settings().RADIUS)
    compact_support: bool = True
    generator      : IndexedGenerator | None = None
    cdf            : FArray = field(init=False)
    evaluators     : tuple[JetEvaluator, ...] = field(init=False)

    def __post_init__(self: Self) -> None:
        atoms = tuple(self.atoms)
        probs = NP.array(self.probabilities, dtype=NP.float64)
        if not atoms:
            raise ConfigError("A germ ensemble needs at least one atom")
        if probs.shape != (len(atoms),):
            raise ConfigError(
                f"{len(probs)} probabilities for {len(atoms)} atoms")
        if NP.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(
                f"Probabilities must be nonnegative and sum to 1: {probs}")
        dims = {f.dimension for f in atoms}
        if len(dims) != 1:
            raise ConfigError(f"Atoms of mixed dimensions: {sorted(dims)}")
        if not all(f.fixes_origin for f in atoms):
            raise ConfigError("Every germ must fix the origin")
        if self.radius <= 0:
            raise ConfigError(f"Escape radius must be positive: {self.radius}")
        probs.flags.writeable = False
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'probabilities', probs)
        object.__setattr__(self, 'cdf', cumulative(probs))
        object.__setattr__(self, 'evaluators',
                           tuple(f.evaluator() for f in atoms))

    @classmethod
    def from_generator(cls: type[Self], generator: IndexedGenerator,
                       radius: float | None = None) -> Self:
        return cls(tuple(generator.rule(int(i)) for i in generator.indices),
                   generator.pmf,
                   radius if radius else Settings().RADIUS,
                   compact_support=False, generator=generator)

    @classmethod
    def from_cocycle(cls: type[Self], spec: CocycleSpec,
                     radius: float | None = None, degree: int | None = None
                     ) -> Self:
        """Linear germs of an i.i.d. matrix ensemble."""
        if not isinstance(spec.driver, IIDDriver):
            raise ConfigError("Only i.i.d. cocycles have germ counterparts")
        ens = spec.driver.ensemble
        return cls(tuple(Jet.linear(a, degree) for a in ens.atoms),
                   ens.probabilities,
                   radius if radius else Settings().RADIUS)

    @property
    def dimension(self: Self) -> int:
        return self.atoms[0].dimension

    def step(self: Self, z: CArray, choice: IArray) -> CArray:
        """Apply atom choice[i] to row z[i]."""
        out = NP.empty_like(z)
        for k in NP.unique(choice):
            rows = choice == k
            out[rows] = self.evaluators[int(k)](z[rows])
        return out

    def replay(self: Self, choices: IArray, z: CArray) -> CArray:
        """Apply the whole sequence `choices` to every row of z."""
        with NP.errstate(over='ignore', invalid='ignore'):
            for c in choices:
                z = self.evaluators[int(c)](z)
        return z

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'dimension', self.dimension
        yield 'atoms', len(self.atoms)
        yield 'radius', self.radius
        yield 'compact_support', self.compact_support
        yield 'generator', self.generator, None


#############################################################################
#  Orbits
# --------
#

@dataclass(frozen=True, eq=False)
class OrbitRecord:
    initial    : CArray
    steps      : IArray            # step number of each kept point
    points     : CArray            # (k, m)
    choices    : IArray            # atom index applied at steps 1, 2, ...
    escape_step: int | None
    max_norm   : float
    seed       : int
    radius     : float

    @property
    def bounded(self: Self) -> bool:
        return self.escape_step is None

    def rows(self: Self) -> list[list[float]]:
        """step, re_1, im_1, ..., re_m, im_m, norm per kept point."""
        out: list[list[float]] = []
        for s, p in zip(self.steps, self.points):
            row: list[float] = [int(s)]
            for c in p:
                row.extend((float(c.real), float(c.imag)))
            row.append(float(NP.linalg.norm(p)))
            out.append(row)
        return out


def simulate_orbit(ensemble: GermEnsemble, z0: Point | complex,
                   steps: int | None = None, seed: int = 0, thin: int = 1,
                   choices: Sequence[int] | IArray | None = None
                   ) -> OrbitRecord:
    """Orbit of z0 under atoms drawn from trial 0 of `seed`, or under the
    given `choices`, stopping at escape from the ball of radius R."""
    z = as_point(z0, ensemble.dimension)
    if NP.linalg.norm(z) > ensemble.radius:
        raise ConfigError(
            f"Start point {z} lies outside the escape radius {ensemble.radius}")
    if thin < 1:
        raise ConfigError(f"Thinning must be at least 1: {thin}")
    if choices is not None:
        seq = NP.asarray(choices, dtype=NP.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= len(ensemble.atoms)):
            raise ConfigError("Replayed choices reference unknown atoms")
        horizon = len(seq) if steps is None else min(steps, len(seq))
        blocks = iter([seq[None, :horizon]])
    else:
        horizon = steps if steps is not None else Settings().STEPS
        blocks = index_blocks([trial_rng(seed, 0)], ensemble.cdf, horizon)
    kept_steps: list[int] = [0]
    kept: list[CArray] = [z.copy()]
    used: list[int] = []
    max_norm = float(NP.linalg.norm(z))
    escape: int | None = None
    n = 0
    with NP.errstate(over='ignore', invalid='ignore'):
        for block in blocks:
            for c in block[0]:
                n += 1
                z = ensemble.evaluators[int(c)](z[None])[0]
                used.append(int(c))
                norm = float(NP.linalg.norm(z))
                max_norm = max(max_norm, norm)
                if norm > ensemble.radius or not NP.isfinite(norm):
                    escape = n
                    break
                if n % thin == 0:
                    kept_steps.append(n)
                    kept.append(z.copy())
            if escape is not None:
                break
    if escape is not None or (n and kept_steps[-1] != n):
        kept_steps.append(n)
        kept.append(z.copy())
    return OrbitRecord(
        initial     = as_point(z0, ensemble.dimension),
        steps       = NP.array(kept_steps, dtype=NP.int64),
        points      = NP.array(kept).reshape(len(kept), ensemble.dimension),
        choices     = NP.array(used, dtype=NP.int64),
        escape_step = escape,
        max_norm    = max_norm,
        seed        = seed,
        radius      = ensemble.radius)


def _run_orbits(ensemble: GermEnsemble, starts: CArray,
                rngs: Sequence[NP.random.Generator], steps: int, bound: float
                ) -> tuple[IArray, FArray, CArray]:
    """Exit step (or -1), max norm and final point per (trial, start)."""
    t, p, m = starts.shape
    z = starts.reshape(t * p, m).copy()
    live = NP.ones(t * p, dtype=bool)
    exit_step = NP.full(t * p, -1, dtype=NP.int64)
    max_norm = NP.linalg.norm(z, axis=1)
    n = 0
    with NP.errstate(over='ignore', invalid='ignore'):
        for block in index_blocks(rngs, ensemble.cdf, steps):
            for s in range(block.shape[1]):
                n += 1
                choice = NP.repeat(block[:, s], p)
                z[live] = ensemble.step(z[live], choice[live])
                norms = NP.linalg.norm(z, axis=1)
                max_norm = NP.where(live, NP.fmax(max_norm, norms), max_norm)
                out = live & ~(norms <= bound)
                exit_step[out] = n
                live &= ~out
                if not live.any():
                    break
            if not live.any():
                break
    return (exit_step.reshape(t, p), max_norm.reshape(t, p),
            z.reshape(t, p, m))


@dataclass(frozen=True, eq=False)
class MembershipReport:
    delta      : float
    steps      : int
    trials     : int
    test_points: int
    seed       : int
    fraction   : float
    bounded    : BArray             # (trials, test_points)
    exit_steps : IArray             # -1 where bounded

    def record(self: Self) -> dict[str, Any]:
        return {'delta': self.delta, 'N': self.steps, 'trials': self.trials,
                'test_points': self.test_points, 'fraction': self.fraction,
                'seed': self.seed}


def fatou_membership(ensemble: GermEnsemble, delta: float,
                     test_points: int = 1, steps: int | None = None,
                     trials: int = 100, seed: int = 0,
                     threads: int | None = None) -> MembershipReport:
    """Fraction of (sequence, start in B_delta) pairs staying in B_R."""
    if not 0 < delta < ensemble.radius:
        raise ConfigError(
            f"delta must lie in (0, R={ensemble.radius}): {delta}")
    if test_points < 1 or trials < 1:
        raise ConfigError("Need at least one trial and one test point")
    horizon = steps if steps is not None else Settings().STEPS
    m = ensemble.dimension

    def run(block: range) -> list[IArray]:
        rngs = trial_rngs(seed, block)
        starts = NP.stack([delta * unit_ball(r, test_points, m)
                           for r in rngs])
        exits, _, _ = _run_orbits(ensemble, starts, rngs, horizon,
                                  ensemble.radius)
        return list(exits)

    exits = NP.array(map_trials(run, trials, threads))
    bounded = exits < 0
    report = MembershipReport(delta, horizon, trials, test_points, seed,
                              float(bounded.mean()), bounded, exits)
    LG.logger.bind(op='fatou_membership', seed=seed).debug(
        f"bounded fraction {report.fraction:.4f}")
    return report


@dataclass(frozen=True, slots=True)
class ContractionStats:
    radius   : float
    steps    : int
    trials   : int
    target   : float
    fraction : float
    max_final: float


def contraction_statistics(ensemble: GermEnsemble, radius: float,
                           steps: int, trials: int, seed: int,
                           target: float = 1e-8) -> ContractionStats:
    """Fraction of orbits from B_radius ending below `target` in norm."""
    m = ensemble.dimension
    rngs = trial_rngs(seed, range(trials))
    starts = NP.stack([radius * unit_ball(r, 1, m) for r in rngs])
    _, _, final = _run_orbits(ensemble, starts, rngs, steps, ensemble.radius)
    norms = NP.linalg.norm(final[:, 0, :], axis=1)
    return ContractionStats(radius, steps, trials, target,
                            float(NP.mean(norms < target)),
                            float(NP.max(norms)))


#############################################################################
#  Trapping
# ----------
#

@dataclass(frozen=True, eq=False)
class TrappingReport:
    eps        : float
    r          : float
    alphas     : FArray            # ‖df(0)‖ + eps per atom
    linear     : FArray            # ‖df(0)‖ per atom
    elog_linear: float
    elog_alpha : float
    contraction: ContractionStats | None

    def record(self: Self) -> dict[str, Any]:
        out: dict[str, Any] = {
            'eps': self.eps, 'r': self.r, 'alphas': self.alphas.tolist(),
            'elog_linear': self.elog_linear, 'elog_alpha': self.elog_alpha}
        if self.contraction is not None:
            out['converged_fraction'] = self.contraction.fraction
        return out


def _remainder_bound(f: Jet) -> Callable[[float], float]:
    """r -> Σ_{d>=2} C_d r^(d-1), with C_d the summed coefficient norms
    of degree d, bounding ‖f(z) - df(0)z‖ / ‖z‖ on B_r."""
    basis = f.basis
    norms = NP.linalg.norm(f.coeffs, axis=0)
    c = NP.bincount(basis.degrees, weights=norms, minlength=f.degree + 1)
    c = c[2:]
    powers = NP.arange(1, len(c) + 1)
    return lambda r: float(NP.sum(c * r ** powers)) if len(c) else 0.0


def trapping_radius(ensemble: GermEnsemble, eps: float | None = None,
                    floor: float = 1e-8, samples: int = 2048,
                    steps: int = 100, trials: int = 1000, seed: int = 0,
                    target: float = 1e-8) -> TrappingReport:
    """Per-atom contraction ‖f(z)‖ <= (‖df(0)‖ + eps)‖z‖ on B_r with
    E log(‖df(0)‖ + eps) < 0."""
    probs = ensemble.probabilities
    live = probs > 0
    linear = NP.array([NP.linalg.norm(linear_part(f), 2)
                       for f in ensemble.atoms])
    with NP.errstate(divide='ignore'):
        def elog(e: float) -> float:
            return float(NP.sum(probs[live] * NP.log(linear[live] + e)))
        elog_linear = elog(0.0)
    if not elog_linear < 0:
        raise NotAttractingError(
            f"E log‖df(0)‖ = {elog_linear:.6g} is not negative")
    if eps is None:
        hi = 1.0
        while elog(hi) < 0:
            hi *= 2
        eps = 0.5 * float(SO.bisect(elog, 0.0, hi, xtol=1e-15))
    elif eps <= 0 or not elog(eps) < 0:
        raise ConfigError(f"eps={eps} does not keep E log(‖df(0)‖+eps) < 0")

    r = NP.inf
    for f in ensemble.atoms:
        bound = _remainder_bound(f)
        if bound(1.0) == 0:
            continue
        hi = 1.0
        while bound(hi) <= eps:
            hi *= 2
        root = float(SO.bisect(lambda x: bound(x) - eps, 0.0, hi,
                               xtol=1e-300, rtol=4 * NP.finfo(float).eps))
        r = min(r, root * (1 - 1e-9))
    if r < floor:
        raise TrappingFailure(f"Trapping radius {r:.3e} is below {floor:.0e}")
    alphas = linear + eps

    rng = trial_rng(seed, 0)
    rho = min(r, ensemble.radius)
    shells = NP.array([0.25, 0.5, 0.75, 1.0])[:, None]
    for f, a in zip(ensemble.evaluators, alphas):
        dirs = unit_ball(rng, samples, ensemble.dimension)
        dirs /= NP.linalg.norm(dirs, axis=1, keepdims=True)
        pts = (rho * shells[:, :, None] * dirs[None]).reshape(
            -1, ensemble.dimension)
        lhs = NP.linalg.norm(f(pts), axis=1)
        rhs = a * NP.linalg.norm(pts, axis=1) * (1 + 1e-12)
        if NP.any(lhs > rhs):
            raise TrappingFailure(
                f"Boundary sampling found ‖f(z)‖ > {a:.6g}‖z‖ on B_{rho:.3g}")
    contraction = (contraction_statistics(ensemble, rho / 2, steps, trials,
                                          seed, target)
                   if trials > 0 else None)
    report = TrappingReport(eps, float(r), alphas, linear, elog_linear,
                            elog(eps), contraction)
    LG.logger.bind(op='trapping_radius').debug(
        f"eps={eps:.6g} r={r:.6g}")
    return report


@dataclass(frozen=True, slots=True)
class UniformTrapStats:
    violations      : int         # trials with at least one exit
    orbit_violations: int
    orbits          : int
    trials          : int
    max_norm        : float


def polydisc_grid(rho: float, size: int, dimension: int, real: bool = True,
                  diameters: int = 1) -> CArray:
    """Lattice of the polydisc of radius rho.

    With `real`, each coordinate runs over `diameters` diameters of the
    disc at angles kπ/diameters, size points each, so diameters=1 is the
    real slice.  Otherwise each coordinate runs over a complex size×size
    lattice inside the disc.
    """
    if diameters < 1:
        raise ConfigError(f"Need at least one diameter: {diameters}")
    axis = NP.linspace(-rho, rho, size)
    if real:
        spokes = axis[axis != 0]
        coords = NP.concatenate([
            axis.astype(NP.complex128),
            *(spokes * NP.exp(1j * NP.pi * k / diameters)
              for k in range(1, diameters))])
    else:
        re, im = NP.meshgrid(axis, axis, indexing='ij')
        coords = (re + 1j * im).ravel()
        coords = coords[NP.abs(coords) <= rho * (1 + 1e-12)]
    mesh = NP.meshgrid(*([coords] * dimension), indexing='ij')
    return NP.stack([g.ravel() for g in mesh], axis=1)


def uniform_trapping_check(ensemble: GermEnsemble, rho: float, eps: float,
                           steps: int | None = None, trials: int = 100,
                           seed: int = 0, mesh: int = 5) -> UniformTrapStats:
    """Count orbits from a mesh of B_rho leaving B_eps within N steps."""
    if not 0 < rho < eps <= ensemble.radius:
        raise ConfigError(
            f"Need 0 < rho < eps <= R: {rho}, {eps}, {ensemble.radius}")
    grid = polydisc_grid(rho, mesh, ensemble.dimension, real=False)
    grid = grid[NP.linalg.norm(grid, axis=1) <= rho * (1 + 1e-12)]
    horizon = steps if steps is not None else Settings().STEPS
    rngs = trial_rngs(seed, range(trials))
    starts = NP.broadcast_to(grid, (trials, *grid.shape)).copy()
    exits, max_norm, _ = _run_orbits(ensemble, starts, rngs, horizon, eps)
    out = exits >= 0
    return UniformTrapStats(int(out.any(axis=1).sum()), int(out.sum()),
                            int(out.size), trials, float(NP.max(max_norm)))


#############################################################################
#  Limit maps
# ------------
#

@dataclass(frozen=True, eq=False)
class LimitMapEstimate:
    grid      : CArray              # (G, m)
    values    : CArray              # (G, m)
    jacobians : CArray | None       # (G, m, m)
    times     : tuple[int, int]     # the Cauchy pair n_i < n_j
    defect    : float
    defects   : tuple[float, ...]   # consecutive snapshot defects
    converged : bool
    rho       : float
    seed      : int
    evaluate  : Callable[[CArray], CArray] = field(repr=False)

    @property
    def origin_index(self: Self) -> int:
        return int(NP.argmin(NP.linalg.norm(self.grid, axis=1)))

    @classmethod
    def from_map(cls: type[Self], fn: Callable[[CArray], CArray], rho: float,
                 grid_size: int, dimension: int,
                 diameters: int | None = None) -> Self:
        """Estimate record for a known map, used as a control."""
        grid = polydisc_grid(rho, grid_size, dimension,
                             diameters=diameters or Settings().DIAMETERS)
        return cls(grid, fn(grid), _jacobians(fn, grid, rho), (0, 0), 0.0,
                   (), True, rho, 0, fn)

    def record(self: Self) -> dict[str, Any]:
        return {'converged': self.converged, 'times': list(self.times),
                'defect': self.defect, 'rho': self.rho, 'seed': self.seed,
                'grid_points': len(self.grid)}


def _jacobians(fn: Callable[[CArray], CArray], grid: CArray, rho: float
               ) -> CArray:
    g, m = grid.shape
    h = 1e-5 * rho
    shifts = NP.eye(m) * h
    pts = NP.concatenate([grid[:, None, :] + shifts[None],
                          grid[:, None, :] - shifts[None]], axis=1)
    vals = fn(pts.reshape(-1, m)).reshape(g, 2 * m, m)
    # column k holds the derivative along the k-th coordinate
    return NP.swapaxes((vals[:, :m] - vals[:, m:]) / (2 * h), 1, 2)


def limit_map_estimate(ensemble: GermEnsemble, seed: int, rho: float,
                       grid_size: int | None = None,
                       stride: int | None = None,
                       cauchy_tol: float | None = None,
                       max_n: int = 100_000, search_every: int = 16,
                       diameters: int | None = None) -> LimitMapEstimate:
    """Approximate g = lim f^{n_k} on a grid of the polydisc B_rho.

    Snapshots of f^n on the grid are taken every `stride` steps.  A pair of
    snapshots closer than `cauchy_tol` in sup norm certifies the limit:
    consecutive snapshots are compared at every stride, and all earlier
    snapshots are searched for a close partner every `search_every`
    strides, so recurrent (non-convergent) sequences are caught as well.
    The grid takes `diameters` complex diameters per coordinate.
    """
    size = grid_size if grid_size else Settings().GRID
    stride = stride if stride else Settings().STRIDE
    tol = cauchy_tol if cauchy_tol else Settings().CAUCHY_TOL
    m = ensemble.dimension
    if m > 3:
        raise ConfigError(f"Limit maps are sampled for m <= 3, not {m}")
    if rho <= 0:
        raise ConfigError(f"rho must be positive: {rho}")
    grid = polydisc_grid(rho, size, m,
                         diameters=diameters or Settings().DIAMETERS)
    watch = NP.unique(NP.linspace(0, len(grid) - 1, 9).astype(NP.int64))
    rng = trial_rng(seed, 0)

    z = grid.copy()
    snaps: list[CArray] = []
    feats: list[FArray] = []
    defects: list[float] = []
    choices: list[IArray] = []
    pair: tuple[int, int] | None = None
    pair_defect = NP.inf
    n = 0
    with NP.errstate(over='ignore', invalid='ignore'):
        for block in index_blocks([rng], ensemble.cdf, max_n):
            choices.append(block[0])
            for c in block[0]:
                z = ensemble.evaluators[int(c)](z)
                n += 1
                if n % stride:
                    continue
                if not NP.all(NP.linalg.norm(z, axis=1) <= ensemble.radius):
                    raise NumericalFailure(
                        f"Grid orbits left B_R by step {n}; shrink rho={rho}")
                snaps.append(z.copy())
                feats.append(NP.concatenate([z[watch].real.ravel(),
                                             z[watch].imag.ravel()]))
                k = len(snaps) - 1
                if k:
                    d = float(NP.max(NP.linalg.norm(snaps[k] - snaps[k - 1],
                                                    axis=1)))
                    defects.append(d)
                    if d < tol:
                        pair, pair_defect = (k - 1, k), d
                        break
                if k >= 2 and k % search_every == 0:
                    found = _recurrent_pair(snaps, feats, tol)
                    if found is not None:
                        pair, pair_defect = found
                        break
            if pair is not None:
                break

    seq = (NP.concatenate(choices) if choices
           else NP.zeros(0, dtype=NP.int64))
    if pair is None:
        LG.logger.bind(op='limit_map_estimate', seed=seed).info(
            f"no Cauchy pair before n={n}")
        last = snaps[-1] if snaps else z

        def replay_all(points: CArray) -> CArray:
            return ensemble.replay(seq[:n], points.copy())

        return LimitMapEstimate(grid, last, None, (n, n),
                                defects[-1] if defects else NP.inf,
                                tuple(defects), False, rho, seed, replay_all)

    i, j = pair
    ni, nj = stride * (i + 1), stride * (j + 1)
    head = seq[:nj]

    def replay(points: CArray) -> CArray:
        return ensemble.replay(head, NP.array(points, dtype=NP.complex128))

    jac = _jacobians(replay, grid, rho)
    LG.logger.bind(op='limit_map_estimate', seed=seed).debug(
        f"Cauchy pair n={ni}, {nj} defect {pair_defect:.3e}")
    return LimitMapEstimate(grid, snaps[j], jac, (ni, nj), pair_defect,
                            tuple(defects), True, rho, seed, replay)


def _recurrent_pair(snaps: list[CArray], feats: list[FArray], tol: float
                    ) -> tuple[tuple[int, int], float] | None:
    tree = SSP.cKDTree(NP.array(feats))
    best: tuple[tuple[int, int], float] | None = None
    for a, b in sorted(tree.query_pairs(r=tol, p=NP.inf)):
        d = float(NP.max(NP.linalg.norm(snaps[a] - snaps[b], axis=1)))
        if d < tol and (best is None or max(a, b) > best[0][1]):
            best = ((min(a, b), max(a, b)), d)
    return best


@dataclass(frozen=True, eq=False)
class RankProfile:
    singular_values: FArray          # (G, m), decreasing per row
    degenerate     : bool
    nonvanishing   : bool
    origin_sigma   : FArray
    tol            : float

    def record(self: Self) -> dict[str, Any]:
        return {'degenerate': self.degenerate,
                'nonvanishing': self.nonvanishing,
                'origin_sigma': self.origin_sigma.tolist(),
                'max_sigma_min': float(self.singular_values[:, -1].max()),
                'tol': self.tol}


def _require_converged(estimate: LimitMapEstimate) -> CArray:
    if not estimate.converged or estimate.jacobians is None:
        raise NotConverged("The limit map estimate did not converge",
                           estimate.defects)
    return estimate.jacobians


def rank_profile(estimate: LimitMapEstimate, tol: float | None = None
                 ) -> RankProfile:
    jac = _require_converged(estimate)
    tol = tol if tol is not None else Settings().RANK_TOL
    sv = NP.linalg.svd(jac, compute_uv=False)
    origin = sv[estimate.origin_index]
    return RankProfile(sv, bool(sv[:, -1].max() < tol),
                       bool(origin[0] >= 1 - tol), origin, tol)


@dataclass(frozen=True, eq=False)
class StableSet:
    z        : CArray
    gz       : CArray
    points   : CArray               # (k, m) grid points on the level set
    center   : CArray
    direction: CArray               # unit vector of the fitted complex line
    residual : float                # RMS distance to the fitted line

    def record(self: Self) -> dict[str, Any]:
        return {'points': len(self.points), 'residual': self.residual}


def stable_set(estimate: LimitMapEstimate, z: Point | complex,
               level_tol: float | None = None,
               valid_radius: float | None = None) -> StableSet:
    """Grid points w with ‖g(w) - g(z)‖ < level_tol, with a line fit."""
    _require_converged(estimate)
    m = estimate.grid.shape[1]
    zp = as_point(z, m)
    tol = level_tol if level_tol is not None else Settings().LEVEL_TOL
    gz = estimate.evaluate(zp[None].copy())[0]
    radius = valid_radius if valid_radius is not None else Settings().RADIUS
    if not NP.linalg.norm(gz) <= radius:
        raise ConfigError(
            f"g(z) has norm {NP.linalg.norm(gz):.3g} beyond radius {radius}")
    close = NP.linalg.norm(estimate.values - gz, axis=1) < tol
    pts = estimate.grid[close]
    if not len(pts):
        raise StableSetEmpty(f"No grid point shares the level of g({zp})")
    center = pts.mean(axis=0)
    if len(pts) > 1:
        _, s, vh = NP.linalg.svd(pts - center, full_matrices=False)
        direction = vh[0].conj()
        residual = float(NP.sqrt(NP.sum(s[1:] ** 2) / len(pts)))
    else:
        direction, residual = NP.zeros(m, dtype=NP.complex128), 0.0
    return StableSet(zp, gz, pts, center, direction, residual)
