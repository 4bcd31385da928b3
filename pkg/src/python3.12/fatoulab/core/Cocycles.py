#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Linear cocycles: sampled matrix products and their growth rates.

Products are tracked per trial in the graded form

    M^n Q0 = Q · diag(exp(ell)) · U

with Q unitary, ell the accumulated log scales and U bounded with unit
modulus diagonal.  Q0 is a Haar unitary drawn first from each trial's
stream, so the diagonal of the accumulated triangular factor settles in
decreasing order.  Every PERIOD multiplications the raw block product is
folded into the graded form by a QR factorization; nothing overflows for
the horizons used here (10^6 steps of atoms with norm up to 10^3).

Ensembles with an exactly singular atom are tracked instead as a scalar
normalized product, reporting -inf for the vanished directions.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import (Any, Callable, Final, Iterator, Mapping, Protocol,
                    Self, Sequence)

import numpy           as NP
import scipy.linalg    as SL  # pyright: ignore[reportMissingTypeStubs]
import scipy.integrate as SI  # pyright: ignore[reportMissingTypeStubs]
import loguru          as LG
import rich.repr       as RR

from .Types   import CArray, ConfigError, FArray
from .Streams import index_blocks, map_trials, trial_rngs, cumulative
from .Metrics import TrialStats, describe_trials
from ..config import Settings


DEBUG: Final[bool] = Settings().DEBUG


__all__: list[str] = [
    'MatrixEnsemble', 'Driver', 'IIDDriver', 'RotationDriver', 'CocycleSpec',
    'ProductSample', 'LyapunovSpectrum', 'DetIdentityReport',
    'InvariantForm', 'InvariantFormFailure', 'NormFloor', 'GrowthCheck',
    'expected_log_abs_det', 'sample_product', 'sample_products',
    'lyapunov_exponent', 'lyapunov_spectrum', 'oseledec_matrix',
    'det_identity_residual', 'find_invariant_form', 'operator_norm',
    'min_product_norm', 'log_norm_growth', 'haar_unitary',
]


# Exact SVD is used on a graded block while its log spread stays below this
# (condition number about 1e8).
SPREAD: Final[float] = 18.4


#############################################################################
#  Ensembles and drivers
# -----------------------
#

@dataclass(frozen=True, eq=False)
class MatrixEnsemble:
    atoms        : CArray                 # (K, m, m)
    probabilities: FArray                 # (K,)
    log_abs_dets : FArray = field(init=False)
    cdf          : FArray = field(init=False)

    def __post_init__(self: Self) -> None:
        atoms = NP.array(self.atoms, dtype=NP.complex128)
        probs = NP.array(self.probabilities, dtype=NP.float64)
        if atoms.ndim != 3 or atoms.shape[1] != atoms.shape[2]:
            raise ConfigError(f"Atoms must be square matrices: {atoms.shape}")
        if len(atoms) < 1:
            raise ConfigError("A matrix ensemble needs at least one atom")
        if probs.shape != (len(atoms),):
            raise ConfigError(
                f"{len(probs)} probabilities for {len(atoms)} atoms")
        if NP.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(
                f"Probabilities must be nonnegative and sum to 1: {probs}")
        atoms.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'probabilities', probs)
        logdets = NP.linalg.slogdet(atoms)[1]
        logdets.flags.writeable = False
        object.__setattr__(self, 'log_abs_dets', logdets)
        object.__setattr__(self, 'cdf', cumulative(probs))

    @classmethod
    def from_pairs(cls: type[Self],
                   pairs: Sequence[tuple[Any, float]]) -> Self:
        return cls(NP.array([NP.asarray(m, NP.complex128) for m, _ in pairs]),
                   NP.array([p for _, p in pairs], NP.float64))

    @classmethod
    def uniform(cls: type[Self], matrices: Sequence[Any]) -> Self:
        k = len(matrices)
        return cls(NP.array(matrices, NP.complex128), NP.full(k, 1.0 / k))

    @property
    def dimension(self: Self) -> int:
        return int(self.atoms.shape[1])

    @property
    def invertible(self: Self) -> bool:
        return bool(NP.all(NP.isfinite(self.log_abs_dets)))

    def expected_log_abs_det(self: Self) -> float:
        """Exact probability weighted log|det|; -inf if a singular atom
        carries positive mass."""
        live = self.probabilities > 0
        return float(NP.sum(self.probabilities[live] * self.log_abs_dets[live]))

    def scaled(self: Self, c: complex) -> MatrixEnsemble:
        return MatrixEnsemble(self.atoms * c, self.probabilities)

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'dimension', self.dimension
        yield 'atoms', len(self.atoms)
        yield 'probabilities', self.probabilities.tolist()


class Driver(Protocol):
    @property
    def dimension(self: Self) -> int: ...

    @property
    def invertible(self: Self) -> bool: ...

    def blocks(self: Self, rngs: Sequence[NP.random.Generator], n: int
               ) -> Iterator[tuple[CArray, FArray]]:
        """(trials, k, m, m) matrices and (trials, k) log|det| per block."""
        ...

    def expected_log_abs_det(self: Self) -> float: ...


@dataclass(frozen=True, eq=False)
class IIDDriver:
    ensemble: MatrixEnsemble

    @property
    def dimension(self: Self) -> int:
        return self.ensemble.dimension

    @property
    def invertible(self: Self) -> bool:
        return self.ensemble.invertible

    def blocks(self: Self, rngs: Sequence[NP.random.Generator], n: int
               ) -> Iterator[tuple[CArray, FArray]]:
        ens = self.ensemble
        for idx in index_blocks(rngs, ens.cdf, n):
            yield ens.atoms[idx], ens.log_abs_dets[idx]

    def expected_log_abs_det(self: Self) -> float:
        return self.ensemble.expected_log_abs_det()


@dataclass(frozen=True, eq=False)
class RotationDriver:
    """Deterministic cocycle over x -> x + theta mod 1, x0 uniform.

    `matrix_fn` maps an array of base points of any shape to matrices of
    shape (..., m, m).  Base points are x0 + k·theta reduced mod 1 in
    double precision, so they drift from the exact orbit by about k ulp.
    """
    theta           : float
    matrix_fn       : Callable[[FArray], CArray]
    dim             : int
    label           : str = 'rotation'
    mean_log_abs_det: float | None = None
    params          : Mapping[str, Any] = field(default_factory=
                                                 lambda: dict[str, Any]())

    def __post_init__(self: Self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"Rotation angle must lie in (0, 1): {self.theta}")
        if self.dim < 1:
            raise ConfigError(f"Dimension must be positive: {self.dim}")

    @property
    def dimension(self: Self) -> int:
        return self.dim

    @property
    def invertible(self: Self) -> bool:
        return True

    def orbit(self: Self, x0: FArray, steps: FArray) -> FArray:
        return NP.mod(x0[..., None] + steps * self.theta, 1.0)

    def blocks(self: Self, rngs: Sequence[NP.random.Generator], n: int
               ) -> Iterator[tuple[CArray, FArray]]:
        x0 = NP.array([r.random() for r in rngs])
        block = Settings().BLOCK
        for lo in range(0, n, block):
            ks = NP.arange(lo, min(lo + block, n), dtype=NP.float64)
            mats = NP.asarray(self.matrix_fn(self.orbit(x0, ks)),
                              dtype=NP.complex128)
            yield mats, NP.linalg.slogdet(mats)[1]

    def expected_log_abs_det(self: Self) -> float:
        if self.mean_log_abs_det is not None:
            return self.mean_log_abs_det
        def integrand(x: float) -> float:
            mat = NP.asarray(self.matrix_fn(NP.array([x])))[0]
            return float(NP.linalg.slogdet(mat)[1])
        value, _ = SI.quad(integrand, 0.0, 1.0, limit=200)
        return float(value)


@dataclass(frozen=True, eq=False)
class CocycleSpec:
    driver: IIDDriver | RotationDriver

    @classmethod
    def iid(cls: type[Self], ensemble: MatrixEnsemble) -> Self:
        return cls(IIDDriver(ensemble))

    @classmethod
    def rotation(cls: type[Self], driver: RotationDriver) -> Self:
        return cls(driver)

    @property
    def dimension(self: Self) -> int:
        return self.driver.dimension

    @property
    def ensemble(self: Self) -> MatrixEnsemble:
        if not isinstance(self.driver, IIDDriver):
            raise ConfigError("This cocycle is not driven by an i.i.d. ensemble")
        return self.driver.ensemble

    def __rich_repr__(self: Self) -> RR.Result:
        yield self.driver


def expected_log_abs_det(spec: CocycleSpec) -> float:
    return spec.driver.expected_log_abs_det()


def haar_unitary(rng: NP.random.Generator, m: int) -> CArray:
    z = (rng.standard_normal((m, m))
         + 1j * rng.standard_normal((m, m))) / NP.sqrt(2.0)
    q, r = NP.linalg.qr(z)
    d = NP.diagonal(r)
    return q * (d / NP.abs(d))


#############################################################################
#  Product trackers
# ------------------
#

class _GradedProducts:
    """Batch of M^n Q0 = Q diag(exp(ell)) U, one row per trial."""

    q0    : CArray    # (T, m, m)
    q     : CArray
    ell   : FArray    # (T, m)
    u     : CArray
    logdet: FArray    # (T,)

    def __init__(self: Self, rngs: Sequence[NP.random.Generator], m: int
                 ) -> None:
        t = len(rngs)
        self.q0 = NP.array([haar_unitary(r, m) for r in rngs]
                           ).reshape(t, m, m)
        self.q = self.q0.copy()
        self.ell = NP.zeros((t, m))
        self.u = NP.broadcast_to(NP.eye(m, dtype=NP.complex128),
                                 (t, m, m)).copy()
        self.logdet = NP.zeros(t)
        self._upper = NP.triu(NP.ones((m, m), dtype=bool))

    def absorb(self: Self, block: CArray, logdet: FArray) -> None:
        q, r = NP.linalg.qr(block @ self.q)
        d = NP.abs(NP.diagonal(r, axis1=1, axis2=2))
        ell = self.ell
        gap = NP.where(self._upper, ell[:, None, :] - ell[:, :, None], 0.0)
        self.u = (r * NP.exp(gap)) @ self.u / d[:, :, None]
        self.ell = ell + NP.log(d)
        self.q = q
        self.logdet += logdet

    def log_singular_values(self: Self, t: int) -> FArray:
        return _graded_log_svd(self.ell[t], self.u[t])

    def oseledec(self: Self, t: int, n: int) -> CArray:
        ell, u, q0 = self.ell[t], self.u[t], self.q0[t]
        top = float(NP.max(ell))
        if top - float(NP.min(ell)) < SPREAD:
            _, s, vh = NP.linalg.svd(NP.exp(ell - top)[:, None] * u)
            with NP.errstate(divide='ignore'):
                logs = NP.log(s) + top
            v = vh.conj().T
        else:
            order = NP.argsort(-ell, kind='stable')
            v, _ = NP.linalg.qr(u[order].conj().T)
            logs = NP.sort(_graded_log_svd(ell, u))[::-1]
        lam = (v * NP.exp(logs / n)) @ v.conj().T
        out = q0 @ lam @ q0.conj().T
        return 0.5 * (out + out.conj().T)


class _ScaledProducts:
    """Batch of M^n = exp(scale) · P with P of unit norm (or zero)."""

    p    : CArray
    scale: FArray
    logdet: FArray

    def __init__(self: Self, trials: int, m: int) -> None:
        self.p = NP.broadcast_to(NP.eye(m, dtype=NP.complex128),
                                 (trials, m, m)).copy()
        self.scale = NP.zeros(trials)
        self.logdet = NP.zeros(trials)

    def absorb(self: Self, block: CArray, logdet: FArray) -> None:
        p = block @ self.p
        norm = NP.linalg.norm(p, 2, axis=(1, 2))
        live = norm > 0
        p[live] /= norm[live][:, None, None]
        with NP.errstate(divide='ignore'):
            self.scale += NP.log(norm)
        self.p = p
        self.logdet += logdet

    def log_singular_values(self: Self, t: int) -> FArray:
        s = NP.linalg.svd(self.p[t], compute_uv=False)
        with NP.errstate(divide='ignore'):
            return NP.log(s) + self.scale[t]

    def oseledec(self: Self, t: int, n: int) -> CArray:
        _, s, vh = NP.linalg.svd(self.p[t])
        with NP.errstate(divide='ignore'):
            roots = NP.exp((NP.log(s) + self.scale[t]) / n)
        v = vh.conj().T
        lam = (v * roots) @ v.conj().T
        return 0.5 * (lam + lam.conj().T)


def _graded_log_svd(ell: FArray, u: CArray) -> FArray:
    """Log singular values of diag(exp(ell)) @ u, in decreasing order.

    Two sweeps of X -> (R diag(exp(ell)))* from the QR factorization of
    the row-sorted u* push off-diagonal mass below the grading; clusters
    of close scales are then finished with an ordinary SVD.
    """
    ell, u = ell.copy(), u.copy()
    m = len(ell)
    upper = NP.triu(NP.ones((m, m), dtype=bool))
    for _ in range(2):
        order = NP.argsort(-ell, kind='stable')
        ell, u = ell[order], u[order]
        _, r = NP.linalg.qr(u.conj().T)
        d = NP.abs(NP.diagonal(r))
        gap = NP.where(upper, ell[None, :] - ell[:, None], 0.0)
        u = r * NP.exp(gap) / d[:, None]
        ell = ell + NP.log(d)
    out: list[float] = []
    lo = 0
    for hi in range(1, m + 1):
        if hi == m or abs(ell[hi] - ell[hi - 1]) >= SPREAD:
            block = ell[lo:hi]
            top = float(NP.max(block))
            s = NP.linalg.svd(NP.exp(block - top)[:, None] * u[lo:hi, lo:hi],
                              compute_uv=False)
            out.extend((NP.log(s) + top).tolist())
            lo = hi
    return NP.sort(NP.array(out))[::-1]


def _track(spec: CocycleSpec, n: int, rngs: Sequence[NP.random.Generator],
           period: int) -> _GradedProducts | _ScaledProducts:
    m = spec.dimension
    tracker: _GradedProducts | _ScaledProducts = (
        _GradedProducts(rngs, m) if spec.driver.invertible
        else _ScaledProducts(len(rngs), m))
    eye = NP.broadcast_to(NP.eye(m, dtype=NP.complex128), (len(rngs), m, m))
    acc, ld, count = eye.copy(), NP.zeros(len(rngs)), 0
    for mats, logdets in spec.driver.blocks(rngs, n):
        for s in range(mats.shape[1]):
            acc = mats[:, s] @ acc
            ld = ld + logdets[:, s]
            count += 1
            if count == period:
                tracker.absorb(acc, ld)
                acc, ld, count = eye.copy(), NP.zeros(len(rngs)), 0
    if count:
        tracker.absorb(acc, ld)
    return tracker


#############################################################################
#  Samples
# ---------
#

@dataclass(frozen=True, slots=True)
class ProductSample:
    log_singular_values: tuple[float, ...]
    log_norm           : float
    log_abs_det        : float
    seed               : int
    trial              : int
    n                  : int


def _check_counts(n: int, trials: int = 1) -> None:
    if n < 1:
        raise ConfigError(f"Product length must be at least 1: {n}")
    if trials < 1:
        raise ConfigError(f"Trial count must be at least 1: {trials}")


def sample_products(spec: CocycleSpec, n: int, trials: int, seed: int,
                    period: int | None = None, threads: int | None = None
                    ) -> list[ProductSample]:
    """Products for trials 0..trials-1, trial t on stream mix_seed(seed, t)."""
    _check_counts(n, trials)
    period = period if period else Settings().PERIOD

    def run(block: range) -> list[ProductSample]:
        tracker = _track(spec, n, trial_rngs(seed, block), period)
        out: list[ProductSample] = []
        for i, t in enumerate(block):
            logs = tracker.log_singular_values(i)
            logdet = float(tracker.logdet[i])
            out.append(ProductSample(
                log_singular_values = tuple(float(x) for x in logs),
                log_norm            = float(logs[0]),
                log_abs_det         = logdet,
                seed                = seed,
                trial               = t,
                n                   = n))
        return out

    samples = map_trials(run, trials, threads)

        #       ╭────────────────────────────────────────────────────────╮
    if DEBUG: # │ -- BEGIN IF DEBUG SECTION -- BEGIN IF DEBUG SECTION -- │
        #       ╰────────────────────────────────────────────────────────╯
        for s in samples:
            if NP.isfinite(s.log_abs_det):
                drift = abs(sum(s.log_singular_values) - s.log_abs_det)
                if drift > 1e-6 * n:
                    LG.logger.warning(
                        f"log|det| drift {drift:.3e} in trial {s.trial}")
        #       ╭────────────────────────────────────────────────────────╮
        #       │ ---  END IF DEBUG SECTION --- END IF DEBUG SECTION --- │
        #       ╰────────────────────────────────────────────────────────╯

    return samples


def sample_product(spec: CocycleSpec, n: int, seed: int,
                   period: int | None = None) -> ProductSample:
    return sample_products(spec, n, 1, seed, period)[0]


#############################################################################
#  Exponents and spectra
# -----------------------
#

def lyapunov_exponent(spec: CocycleSpec, n: int, trials: int, seed: int,
                      threads: int | None = None) -> TrialStats:
    """Mean over trials of log‖M^n‖/n; singular trials contribute -inf."""
    samples = sample_products(spec, n, trials, seed, threads=threads)
    stats = describe_trials([s.log_norm / n for s in samples])
    LG.logger.bind(op='lyapunov_exponent', n=n, trials=trials, seed=seed
                   ).debug(f"kappa={stats.mean:.6g} se={stats.stderr:.3g}")
    return stats


@dataclass(frozen=True, slots=True)
class LyapunovSpectrum:
    kappa : tuple[float, ...]
    alpha : tuple[int, ...]
    stderr: tuple[float, ...]
    n     : int
    trials: int
    seed  : int
    gap_threshold: float

    def __post_init__(self: Self) -> None:
        if any(a < 1 for a in self.alpha):
            raise ConfigError(f"Multiplicities must be positive: {self.alpha}")

    @property
    def dimension(self: Self) -> int:
        return sum(self.alpha)

    def weighted_sum(self: Self) -> float:
        return float(sum(a * k for a, k in zip(self.alpha, self.kappa)))

    def record(self: Self) -> dict[str, Any]:
        return {'kappa': list(self.kappa), 'alpha': list(self.alpha),
                'stderr': list(self.stderr), 'n': self.n,
                'trials': self.trials, 'seed': self.seed,
                'gap_threshold': self.gap_threshold}


def _groups(means: FArray, gap: float) -> list[list[int]]:
    groups: list[list[int]] = [[0]]
    for i in range(1, len(means)):
        a, b = means[i - 1], means[i]
        same = (a == b) or (NP.isfinite(a) and NP.isfinite(b)
                            and a - b < gap)
        if same:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def lyapunov_spectrum(spec: CocycleSpec, n: int, trials: int, seed: int,
                      gap_threshold: float | None = None,
                      threads: int | None = None) -> LyapunovSpectrum:
    gap = gap_threshold if gap_threshold is not None else Settings().GAP
    if gap <= 0:
        raise ConfigError(f"Gap threshold must be positive: {gap}")
    samples = sample_products(spec, n, trials, seed, threads=threads)
    per_trial = NP.array([s.log_singular_values for s in samples]) / n
    means = per_trial.mean(axis=0)
    kappa: list[float] = []
    alpha: list[int] = []
    stderr: list[float] = []
    for group in _groups(means, gap):
        stats = describe_trials(per_trial[:, group].mean(axis=1))
        kappa.append(stats.mean)
        alpha.append(len(group))
        stderr.append(stats.stderr)
    spectrum = LyapunovSpectrum(tuple(kappa), tuple(alpha), tuple(stderr),
                                n, trials, seed, gap)
    LG.logger.bind(op='lyapunov_spectrum', n=n, trials=trials, seed=seed
                   ).debug(f"kappa={spectrum.kappa} alpha={spectrum.alpha}")
    return spectrum


def oseledec_matrix(spec: CocycleSpec, seed: int, n: int,
                    period: int | None = None) -> CArray:
    """((M^n)* M^n)^(1/2n) for trial 0 of `seed`."""
    _check_counts(n)
    tracker = _track(spec, n, trial_rngs(seed, range(1)),
                     period if period else Settings().PERIOD)
    return tracker.oseledec(0, n)


@dataclass(frozen=True, slots=True)
class DetIdentityReport:
    residual    : float
    weighted_sum: float
    elogdet     : float
    divergent   : bool
    n           : int
    trials      : int
    seed        : int


def det_identity_residual(spec: CocycleSpec, n: int, trials: int, seed: int,
                          threads: int | None = None) -> DetIdentityReport:
    """|Σ α_i κ_i - E log|det M||; singular atoms give a divergent report."""
    elogdet = expected_log_abs_det(spec)
    if not spec.driver.invertible or not NP.isfinite(elogdet):
        return DetIdentityReport(float('inf'), float('-inf'), elogdet, True,
                                 n, trials, seed)
    spectrum = lyapunov_spectrum(spec, n, trials, seed, threads=threads)
    total = spectrum.weighted_sum()
    return DetIdentityReport(abs(total - elogdet), total, elogdet, False,
                             n, trials, seed)


#############################################################################
#  Invariant Hermitian forms
# ---------------------------
#

@dataclass(frozen=True, slots=True)
class InvariantForm:
    p         : CArray
    h         : CArray
    residual  : float
    iterations: int
    trajectory: tuple[float, ...]

    @property
    def success(self: Self) -> bool:
        return True

    def conjugate(self: Self, m: CArray) -> CArray:
        """H M H^-1, unitary up to the residual."""
        return self.h @ m @ NP.linalg.inv(self.h)


@dataclass(frozen=True, slots=True)
class InvariantFormFailure:
    residual  : float
    reason    : str
    iterations: int
    trajectory: tuple[float, ...]

    @property
    def success(self: Self) -> bool:
        return False


def _form_residual(mats: CArray, p: CArray) -> float:
    diff = NP.conj(NP.swapaxes(mats, 1, 2)) @ p @ mats - p
    return float(NP.max(NP.linalg.norm(diff, 2, axis=(1, 2)))
                 / NP.linalg.norm(p, 2))


def find_invariant_form(generators: Sequence[Any] | CArray,
                        probabilities: Sequence[float] | None = None,
                        max_iters: int | None = None, tol: float = 1e-8,
                        max_cond: float = 1e12
                        ) -> InvariantForm | InvariantFormFailure:
    """Common Hermitian form P with M_i* P M_i = P for all generators.

    Iterates the lazy averaging map P -> (P + Σ p_i M_i* P M_i) / 2 from
    the identity, normalized to trace m, watching both the iterate and its
    running (Cesàro) mean.
    """
    mats = NP.asarray(generators, dtype=NP.complex128)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or not len(mats):
        raise ConfigError(f"Generators must be square matrices: {mats.shape}")
    if not NP.all(NP.isfinite(NP.linalg.slogdet(mats)[1])):
        raise ConfigError("Generators must be invertible")
    k, m = mats.shape[0], mats.shape[1]
    probs = (NP.full(k, 1.0 / k) if probabilities is None
             else NP.asarray(probabilities, dtype=NP.float64))
    max_iters = max_iters if max_iters else Settings().MAX_ITERS
    adj = NP.conj(NP.swapaxes(mats, 1, 2))
    p = NP.eye(m, dtype=NP.complex128)
    mean = NP.zeros_like(p)
    best, best_p = _form_residual(mats, p), p
    trajectory: list[float] = [best]
    reason = 'iterations'
    it = 0
    for it in range(1, max_iters + 1):
        p = 0.5 * (p + NP.einsum('k,kij->ij', probs, adj @ p @ mats))
        p = 0.5 * (p + p.conj().T)
        p *= m / NP.trace(p).real
        mean += (p - mean) / it
        for cand in (p, mean):
            res = _form_residual(mats, cand)
            if res < best:
                best, best_p = res, cand.copy()
        trajectory.append(best)
        if best <= tol:
            break
        if NP.linalg.cond(p) > max_cond:
            reason = 'conditioning'
            break
    if best <= tol:
        w, v = SL.eigh(best_p)
        if float(NP.min(w)) > 0:
            h = (v * NP.sqrt(w)) @ v.conj().T
            LG.logger.bind(op='find_invariant_form'
                           ).debug(f"converged after {it} iterations")
            return InvariantForm(best_p, h, best, it, tuple(trajectory))
        reason = 'indefinite'
    LG.logger.bind(op='find_invariant_form'
                   ).debug(f"failed ({reason}) with residual {best:.3e}")
    return InvariantFormFailure(best, reason, it, tuple(trajectory))


def operator_norm(p: CArray, m: CArray) -> float:
    """Operator norm of m with respect to the Hermitian form p."""
    w, v = SL.eigh(p)
    h = (v * NP.sqrt(w)) @ v.conj().T
    hinv = (v / NP.sqrt(w)) @ v.conj().T
    return float(NP.linalg.norm(h @ m @ hinv, 2))


#############################################################################
#  Norm statistics
# -----------------
#

@dataclass(frozen=True, slots=True)
class NormFloor:
    value    : float
    log_value: float
    trial    : int
    step     : int


def min_product_norm(spec: CocycleSpec, n_max: int, trials: int, seed: int
                     ) -> NormFloor:
    """Minimum of ‖M^n‖ over trials and 1 <= n <= n_max."""
    _check_counts(n_max, trials)
    rngs = trial_rngs(seed, range(trials))
    if spec.driver.invertible:
        # Same stream layout as the graded tracker: the Haar frame first.
        for r in rngs:
            haar_unitary(r, spec.dimension)
    m = spec.dimension
    p = NP.broadcast_to(NP.eye(m, dtype=NP.complex128), (trials, m, m)).copy()
    scale = NP.zeros(trials)
    best, where = NP.inf, (0, 0)
    step = 0
    with NP.errstate(divide='ignore', invalid='ignore'):
        for mats, _ in spec.driver.blocks(rngs, n_max):
            for s in range(mats.shape[1]):
                step += 1
                p = mats[:, s] @ p
                norm = NP.linalg.norm(p, 2, axis=(1, 2))
                live = norm > 0
                p[live] /= norm[live][:, None, None]
                scale = scale + NP.log(norm)
                t = int(NP.argmin(scale))
                if scale[t] < best:
                    best, where = float(scale[t]), (t, step)
    return NormFloor(float(NP.exp(best)), best, *where)


@dataclass(frozen=True, slots=True)
class GrowthCheck:
    mean_n  : TrialStats
    mean_2n : TrialStats

    @property
    def excess(self: Self) -> float:
        """E log‖M^2n‖ - 2 E log‖M^n‖, nonpositive up to noise."""
        return self.mean_2n.mean - 2 * self.mean_n.mean


def log_norm_growth(spec: CocycleSpec, n: int, trials: int, seed: int
                    ) -> GrowthCheck:
    short = sample_products(spec, n, trials, seed)
    long = sample_products(spec, 2 * n, trials, seed)
    return GrowthCheck(describe_trials([s.log_norm for s in short]),
                       describe_trials([s.log_norm for s in long]))
