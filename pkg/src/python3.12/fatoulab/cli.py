#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-

from __future__ import annotations
from datetime import timedelta
import json
from pathlib import Path
from typing import (Annotated, Any, Callable, Concatenate, Final, Literal,
                    Self)

import click_completion  # pyright: ignore[reportMissingTypeStubs]
import humanize, loguru, rich, typer
import rich.console, rich.logging, rich.pretty
from immutables import Map
from pydantic import (BaseModel, ConfigDict, Field, ValidationError,
                      model_validator)

from .config import Settings
from .core import (
    CocycleSpec, ConfigError, ExampleId, GermEnsemble, InvariantForm, Metrics,
    NumericalFailure, build_example, classify_ensemble,
    classify_germ_measure, dumps_record, example_file, fatou_membership,
    find_invariant_form, limit_map_estimate, linear_ensemble, load_ensemble,
    lyapunov_exponent,
    lyapunov_spectrum, orbit_csv, rank_profile, read_ensemble,
    resolve_example, simulate_orbit, stable_set, table_csv, trapping_radius,
    brjuno_partial_sum,
)


__all__: list[str] = ['APP', 'RunConfig', 'run', 'emit']


APP = typer.Typer(name='fatoulab', pretty_exceptions_enable=False)

click_completion.init()  # type: ignore

STDOUT = rich.console.Console(log_path=False)
STDERR = rich.console.Console(
    stderr=True, log_path=False, tab_size=4, soft_wrap=True)

loguru.logger.configure(handlers=[dict(
    level=Settings().LOG_LEVEL,
    sink=rich.logging.RichHandler(
        console=STDERR,
        markup=True,
        show_path=False,
        rich_tracebacks=True,
        tracebacks_show_locals=Settings().DEBUG,
        tracebacks_width=300,
        locals_max_length=100
        ),
    format="{message}",)])
loguru.logger.enable('fatoulab')

def LOG[T, **P](arg: T, dispatch: Callable[Concatenate[str, P], None],
                *logger_args: P.args, **logger_kwargs: P.kwargs) -> T:
    dispatch((arg if type(arg) is str
              else rich.pretty.pretty_repr(arg)),
             *logger_args, **logger_kwargs)
    return arg

# Log expression wrappers
def ERR[T](arg:T, *logger_args: Any, **logger_kwargs: Any) -> T:
    return LOG(arg, dispatch=loguru.logger.error, *logger_args, **logger_kwargs)
def DBG[T](arg: T, *logger_args: Any, **logger_kwargs: Any) -> T:
    return LOG(arg, dispatch=loguru.logger.debug, *logger_args, **logger_kwargs)
def INF[T](arg: T, *logger_args: Any, **logger_kwargs: Any) -> T:
    return LOG(arg, dispatch=loguru.logger.info, *logger_args, **logger_kwargs)
def NOP[T](arg: T, *_: Any, **__: Any) -> T:
    return arg


EXIT_OK    : Final[int] = 0
EXIT_CONFIG: Final[int] = 2
EXIT_NUMERIC: Final[int] = 3


##############################################################################
# Run configuration
# -------------------
#
# Every command is a RunConfig validated before anything is computed.  The
# record written for a run embeds the resolved config, defaults included,
# so the record alone replays the run.  An ensemble read from a file is
# inlined into the config as `source`, so the replay does not depend on the
# file staying where it was.
#_____________________________________________________________________________

type Command = Literal['lyapunov', 'spectrum', 'classify', 'invariant-form',
                       'orbit', 'fatou', 'trap', 'limit-map', 'stable-set',
                       'example', 'brjuno']

_NEEDS_SOURCE: Final[frozenset[str]] = frozenset({
    'lyapunov', 'spectrum', 'classify', 'invariant-form', 'orbit', 'fatou',
    'trap', 'limit-map', 'stable-set'})


def parse_point(text: str) -> list[complex]:
    """'0.1,0.05' or '0.1+0.2i,0' into complex coordinates."""
    try:
        return [complex(part.strip().replace('i', 'j'))
                for part in text.split(',')]
    except ValueError as e:
        raise ConfigError(f"Cannot parse point {text!r}: {e}") from e


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', validate_assignment=False)

    command    : Command
    example    : str | None = None
    ensemble   : Path | None = None
    source     : dict[str, Any] | None = None
    lam        : float | None = Field(default=None, gt=0, lt=1)
    theta      : float | None = Field(default=None, gt=0, lt=1)
    K          : int | None = Field(default=None, ge=1, le=12)
    n          : int = Field(default=10_000, ge=1)
    trials     : int = Field(default=100, ge=1)
    seed       : int = Field(default=0, ge=0)
    steps      : int | None = Field(default=None, ge=0)
    thin       : int = Field(default=1, ge=1)
    z0         : list[tuple[float, float]] | None = None
    delta      : float | None = Field(default=None, gt=0)
    test_points: int = Field(default=1, ge=1)
    eps        : float | None = Field(default=None, gt=0)
    eps_abs    : float | None = Field(default=None, gt=0)
    rho        : float | None = Field(default=None, gt=0)
    grid       : int | None = Field(default=None, ge=2)
    stride     : int | None = Field(default=None, ge=1)
    cauchy_tol : float | None = Field(default=None, gt=0)
    level_tol  : float | None = Field(default=None, gt=0)
    alpha      : float | None = Field(default=None, gt=0, lt=1)
    depth      : int = Field(default=20, ge=1, le=40)
    output     : Path | None = None
    format     : Literal['json', 'csv'] = 'json'
    threads    : int | None = Field(default=None, ge=1)

    @model_validator(mode='after')
    def _resolve(self: Self) -> Self:
        s = Settings()
        if self.command in _NEEDS_SOURCE or self.command == 'example':
            given = [x for x in (self.example, self.ensemble, self.source)
                     if x is not None]
            if len(given) != 1:
                raise ValueError(
                    f"{self.command} needs exactly one of --example or "
                    f"--ensemble")
        if self.example is not None:
            self.example = resolve_example(self.example).value
        required: dict[str, tuple[str, ...]] = {
            'orbit': ('z0',), 'fatou': ('delta',), 'limit-map': ('rho',),
            'stable-set': ('rho', 'z0'), 'brjuno': ('alpha',)}
        for name in required.get(self.command, ()):
            if getattr(self, name) is None:
                raise ValueError(f"{self.command} needs --{name}")
        self.steps = self.steps if self.steps is not None else s.STEPS
        self.eps_abs = self.eps_abs if self.eps_abs is not None else s.EPS_ABS
        self.grid = self.grid if self.grid is not None else s.GRID
        self.stride = self.stride if self.stride is not None else s.STRIDE
        self.cauchy_tol = self.cauchy_tol or s.CAUCHY_TOL
        self.level_tol = self.level_tol or s.LEVEL_TOL
        self.threads = self.threads or s.THREADS
        return self

    @property
    def point(self: Self) -> list[complex]:
        return [complex(re, im) for re, im in (self.z0 or [])]

    def echo(self: Self) -> dict[str, Any]:
        return self.model_dump(mode='json')


def _example_id(config: RunConfig) -> ExampleId:
    params: dict[str, Any] = {'name': config.example}
    for key in ('lam', 'theta', 'K', 'alpha'):
        if getattr(config, key) is not None:
            params[key] = getattr(config, key)
    return ExampleId.model_validate(params)


def _inline(config: RunConfig) -> RunConfig:
    """Replace --ensemble PATH by the document it holds."""
    if config.ensemble is None:
        return config
    read_ensemble(config.ensemble)
    doc = json.loads(config.ensemble.read_text())
    return config.model_copy(update={'ensemble': None, 'source': doc})


def _source(config: RunConfig) -> CocycleSpec | GermEnsemble:
    if config.source is not None:
        return load_ensemble(json.dumps(config.source))
    if config.ensemble is not None:
        return read_ensemble(config.ensemble)
    return build_example(_example_id(config))


def _cocycle(config: RunConfig) -> CocycleSpec:
    src = _source(config)
    if isinstance(src, GermEnsemble):
        return CocycleSpec.iid(linear_ensemble(src))
    return src


def _germs(config: RunConfig) -> GermEnsemble:
    src = _source(config)
    if isinstance(src, CocycleSpec):
        return GermEnsemble.from_cocycle(src)
    return src


##############################################################################
# Handlers
# ----------
#
# Each returns the result record and, for per-step or per-grid data, the
# CSV table.
#_____________________________________________________________________________

type Outcome = tuple[dict[str, Any], str | None]


def _lyapunov(c: RunConfig) -> Outcome:
    stats = lyapunov_exponent(_cocycle(c), c.n, c.trials, c.seed, c.threads)
    return {'kappa': stats.mean, 'stderr': stats.stderr, 'n': c.n,
            'trials': c.trials, 'seed': c.seed}, None


def _spectrum(c: RunConfig) -> Outcome:
    spec = lyapunov_spectrum(_cocycle(c), c.n, c.trials, c.seed,
                             threads=c.threads)
    return spec.record(), None


def _classify(c: RunConfig) -> Outcome:
    src = _source(c)
    if isinstance(src, GermEnsemble):
        found = classify_germ_measure(src, c.n, c.trials, c.seed, c.eps_abs)
    else:
        found = classify_ensemble(src, c.n, c.trials, c.seed, c.eps_abs)
    return found.record(), None


def _invariant_form(c: RunConfig) -> Outcome:
    ens = _cocycle(c).ensemble
    form = find_invariant_form(ens.atoms, ens.probabilities)
    record: dict[str, Any] = {'success': form.success,
                              'residual': form.residual,
                              'iterations': form.iterations}
    if isinstance(form, InvariantForm):
        record['P'] = form.p
    else:
        record['reason'] = form.reason
    return record, None


def _orbit(c: RunConfig) -> Outcome:
    ens = _germs(c)
    orbit = simulate_orbit(ens, c.point, c.steps, c.seed, c.thin)
    record = {'escape_step': orbit.escape_step, 'max_norm': orbit.max_norm,
              'points': len(orbit.points), 'seed': c.seed}
    return record, orbit_csv(orbit, ens.dimension)


def _fatou(c: RunConfig) -> Outcome:
    assert c.delta is not None
    report = fatou_membership(_germs(c), c.delta, c.test_points, c.steps,
                              c.trials, c.seed, c.threads)
    return report.record(), None


def _trap(c: RunConfig) -> Outcome:
    report = trapping_radius(_germs(c), c.eps, seed=c.seed,
                             trials=c.trials, steps=c.steps or 0)
    return report.record(), None


def _limit_map(c: RunConfig) -> Outcome:
    assert c.rho is not None
    est = limit_map_estimate(_germs(c), c.seed, c.rho, c.grid, c.stride,
                             c.cauchy_tol)
    record = est.record()
    if not est.converged:
        record['defects'] = list(est.defects[-10:])
        return record, None
    profile = rank_profile(est)
    record['rank'] = profile.record()
    m = est.grid.shape[1]
    header = [*(f"{p}_{i}" for i in range(1, m + 1) for p in ('re', 'im')),
              *(f"g{p}_{i}" for i in range(1, m + 1) for p in ('re', 'im')),
              *(f"sigma_{i}" for i in range(1, m + 1))]
    rows = [[*_flat(z), *_flat(g), *(float(x) for x in sv)]
            for z, g, sv in zip(est.grid, est.values,
                                profile.singular_values)]
    return record, table_csv(header, rows)


def _stable_set(c: RunConfig) -> Outcome:
    assert c.rho is not None
    est = limit_map_estimate(_germs(c), c.seed, c.rho, c.grid, c.stride,
                             c.cauchy_tol)
    found = stable_set(est, c.point, c.level_tol)
    record = {**found.record(), 'limit_map': est.record(),
              'direction': found.direction}
    m = est.grid.shape[1]
    header = [f"{p}_{i}" for i in range(1, m + 1) for p in ('re', 'im')]
    return record, table_csv(header, [_flat(p) for p in found.points])


def _example(c: RunConfig) -> Outcome:
    return {'example': c.example}, None


def _brjuno(c: RunConfig) -> Outcome:
    return brjuno_partial_sum(c.alpha, c.depth).record(), None


def _flat(z: Any) -> list[float]:
    return [float(x) for v in z for x in (v.real, v.imag)]


_HANDLERS: Final[Map[str, Callable[[RunConfig], Outcome]]] = Map({
    'lyapunov': _lyapunov, 'spectrum': _spectrum, 'classify': _classify,
    'invariant-form': _invariant_form, 'orbit': _orbit, 'fatou': _fatou,
    'trap': _trap, 'limit-map': _limit_map, 'stable-set': _stable_set,
    'example': _example, 'brjuno': _brjuno,
})


def run(config: RunConfig) -> tuple[int, dict[str, Any], str | None]:
    """Dispatch one command; returns exit status, record and CSV table."""
    metrics = Metrics.Singleton()
    path = config.ensemble
    try:
        config = _inline(config)
    except ConfigError as e:
        ERR(f"configuration error: {e}")
        return EXIT_CONFIG, {'command': config.command,
                             'config': config.echo(),
                             'status': 'config-error', 'error': str(e)}, None
    base: dict[str, Any] = {'command': config.command,
                            'config': config.echo()}
    if path is not None:
        base['ensemble_path'] = str(path)
    try:
        with metrics.stopwatch(f"run.{config.command}"):
            result, table = _HANDLERS[config.command](config)
    except (ConfigError, ValidationError) as e:
        ERR(f"configuration error: {e}")
        return EXIT_CONFIG, {**base, 'status': 'config-error',
                             'error': str(e)}, None
    except NumericalFailure as e:
        ERR(f"numerical failure: {e}")
        extra: dict[str, Any] = {}
        for attr in ('k', 'step', 'defects'):
            if hasattr(e, attr):
                extra[attr] = getattr(e, attr)
        return EXIT_NUMERIC, {**base, 'status': 'numerical-failure',
                              'error': str(e), **extra}, None
    metrics.counter('runs')()
    elapsed = metrics.stopwatch(f"run.{config.command}").value()
    INF(f"{config.command} finished in "
        f"{humanize.precisedelta(timedelta(seconds=elapsed))}")
    return EXIT_OK, {**base, 'status': 'ok', 'result': result}, table


def emit(config: RunConfig, record: dict[str, Any], table: str | None
         ) -> None:
    """CSV for tables when asked for, the JSON record otherwise; to the
    output path or stdout.  A CSV table is followed by its record, in
    OUTPUT.record.json or on stderr."""
    if config.command == 'example' and record.get('status') == 'ok':
        text = example_file(_example_id(config))
    elif config.format == 'csv':
        if table is None:
            raise ConfigError(f"{config.command} has no CSV output")
        text = table
    else:
        text = dumps_record(record)
    _write(config.output, text)
    if config.format == 'csv' and config.command != 'example':
        if config.output is None:
            typer.echo(dumps_record(record), nl=False, err=True)
        else:
            _write(record_path(config.output), dumps_record(record))


def record_path(output: Path) -> Path:
    return output.with_name(output.name + '.record.json')


def _write(output: Path | None, text: str) -> None:
    if output is None:
        typer.echo(text, nl=False)
        return
    try:
        output.write_text(text)
    except OSError as e:
        raise ConfigError(f"Cannot write {output}: {e}") from e
    INF(f"wrote {humanize.naturalsize(len(text))} to {output}")


def _main(**params: Any) -> None:
    try:
        raw = {k: v for k, v in params.items() if v is not None}
        if isinstance(raw.get('z0'), str):
            raw['z0'] = [(z.real, z.imag) for z in parse_point(raw['z0'])]
        config = RunConfig.model_validate(raw)
    except (ValidationError, ConfigError) as e:
        ERR(f"invalid arguments: {e}")
        raise typer.Exit(EXIT_CONFIG)
    _finish(config)


def _finish(config: RunConfig) -> None:
    DBG(config)
    status, record, table = run(config)
    if status == EXIT_OK:
        try:
            emit(config, record, table)
        except ConfigError as e:
            ERR(str(e))
            raise typer.Exit(EXIT_CONFIG)
    else:
        typer.echo(dumps_record(record), nl=False, err=True)
    raise typer.Exit(status)


##############################################################################
# Commands
# ----------
#_____________________________________________________________________________

Example = Annotated[str | None, typer.Option(
    '--example', '-e', help='Built-in example, e.g. L1 or E2.')]
Ensemble = Annotated[Path | None, typer.Option(
    '--ensemble', help='Ensemble file.', exists=False)]
N = Annotated[int, typer.Option('--n', help='Product length.')]
Trials = Annotated[int, typer.Option('--trials', help='Monte Carlo trials.')]
Seed = Annotated[int, typer.Option('--seed', help='Master seed.')]
Steps = Annotated[int | None, typer.Option('--steps', help='Orbit horizon.')]
Output = Annotated[Path | None, typer.Option('--output', '-o')]
Format = Annotated[str, typer.Option('--format', help='json or csv.')]
Theta = Annotated[float | None, typer.Option('--theta')]
Lam = Annotated[float | None, typer.Option('--lam')]
Layers = Annotated[int | None, typer.Option('--K', help='Tent layers.')]
Threads = Annotated[int | None, typer.Option(
    '--threads', help='Worker threads (default FATOULAB_THREADS).')]
Point = Annotated[str | None, typer.Option(
    '--z0', help='Comma separated coordinates, e.g. 0.1,0.05.')]
Rho = Annotated[float | None, typer.Option('--rho')]
Grid = Annotated[int | None, typer.Option('--grid')]
Stride = Annotated[int | None, typer.Option('--stride')]


@APP.command()
def lyapunov(example: Example = None, ensemble: Ensemble = None,
             n: N = 10_000, trials: Trials = 100, seed: Seed = 0,
             theta: Theta = None, K: Layers = None, threads: Threads = None,
             output: Output = None) -> None:
    """Top Lyapunov exponent with its standard error."""
    _main(command='lyapunov', **locals())


@APP.command()
def spectrum(example: Example = None, ensemble: Ensemble = None,
             n: N = 10_000, trials: Trials = 100, seed: Seed = 0,
             theta: Theta = None, K: Layers = None, threads: Threads = None,
             output: Output = None) -> None:
    """Distinct exponents, multiplicities and standard errors."""
    _main(command='spectrum', **locals())


@APP.command()
def classify(example: Example = None, ensemble: Ensemble = None,
             n: N = 10_000, trials: Trials = 100, seed: Seed = 0,
             eps_abs: Annotated[float | None, typer.Option('--eps-abs')]
                 = None,
             theta: Theta = None, K: Layers = None, lam: Lam = None,
             output: Output = None) -> None:
    """Attracting, Repelling, Neutral, SemiNeutral or Undetermined."""
    _main(command='classify', **locals())


@APP.command('invariant-form')
def invariant_form(example: Example = None, ensemble: Ensemble = None,
                   output: Output = None) -> None:
    """Hermitian form preserved by every generator, if one exists."""
    _main(command='invariant-form', **locals())


@APP.command()
def orbit(example: Example = None, ensemble: Ensemble = None,
          z0: Point = None, steps: Steps = None, seed: Seed = 0,
          thin: Annotated[int, typer.Option('--thin')] = 1,
          lam: Lam = None, output: Output = None,
          format: Format = 'csv') -> None:
    """One random orbit as CSV."""
    _main(command='orbit', **locals())


@APP.command()
def fatou(example: Example = None, ensemble: Ensemble = None,
          delta: Annotated[float | None, typer.Option('--delta')] = None,
          test_points: Annotated[int, typer.Option('--test-points')] = 1,
          steps: Steps = None, trials: Trials = 100, seed: Seed = 0,
          lam: Lam = None, threads: Threads = None,
          output: Output = None) -> None:
    """Fraction of random orbits from B_delta staying bounded."""
    _main(command='fatou', **locals())


@APP.command()
def trap(example: Example = None, ensemble: Ensemble = None,
         eps: Annotated[float | None, typer.Option('--eps')] = None,
         trials: Trials = 1000, steps: Steps = 100, seed: Seed = 0,
         lam: Lam = None, output: Output = None) -> None:
    """Trapping radius of an attracting germ ensemble."""
    _main(command='trap', **locals())


@APP.command('limit-map')
def limit_map(example: Example = None, ensemble: Ensemble = None,
              rho: Rho = None, grid: Grid = None, stride: Stride = None,
              seed: Seed = 0, output: Output = None,
              format: Format = 'json') -> None:
    """Limit map of the random iterates on a polydisc grid."""
    _main(command='limit-map', **locals())


@APP.command('stable-set')
def stable_set_command(example: Example = None, ensemble: Ensemble = None,
                       z0: Point = None, rho: Rho = None, grid: Grid = None,
                       stride: Stride = None, seed: Seed = 0,
                       level_tol: Annotated[float | None,
                                            typer.Option('--level-tol')]
                           = None,
                       output: Output = None, format: Format = 'json'
                       ) -> None:
    """Level set of the limit map through z0."""
    _main(command='stable-set', **locals())


@APP.command()
def example(example: Annotated[str, typer.Argument(help='Example name.')],
            theta: Theta = None, K: Layers = None, lam: Lam = None,
            alpha: Annotated[float | None, typer.Option('--alpha')] = None,
            output: Output = None) -> None:
    """Write a built-in example as an ensemble file."""
    _main(command='example', **locals())


@APP.command()
def brjuno(alpha: Annotated[float | None, typer.Option('--alpha')] = None,
           depth: Annotated[int, typer.Option('--depth')] = 20,
           output: Output = None) -> None:
    """Partial Brjuno sums from the continued fraction of alpha."""
    _main(command='brjuno', **locals())


@APP.command()
def replay(record: Annotated[Path, typer.Argument(help='Run record.')],
           output: Output = None) -> None:
    """Run again from the config embedded in a record."""
    try:
        data = json.loads(record.read_text())
        config = RunConfig.model_validate({**data['config'], 'output': output})
    except (OSError, ValueError, KeyError, TypeError) as e:
        ERR(f"cannot replay {record}: {e}")
        raise typer.Exit(EXIT_CONFIG)
    _finish(config)


if __name__ == '__main__':
    APP()
