#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Ensemble files and result records.

Matrix ensemble   {"dimension": m,
                   "atoms": [{"matrix": [[[re, im], ...], ...], "prob": p}]}
Germ ensemble     {"dimension": m, "R": radius,
                   "atoms": [{"map": <polynomial map>, "prob": p}]}
                  or {"R": radius, "generator": {"family": "E1", ...}}
Rotation cocycle  {"rotation": {"family": "R1" | "R2", "theta": θ, "K": K}}

Records are JSON with every float written to 17 significant digits, so
values read back are bit-identical.
"""

from __future__ import annotations
import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy  as NP
from pydantic import (BaseModel, ConfigDict, Field, PositiveFloat,
                      ValidationError)

from .Types    import ConfigError
from .Jets     import TermModel, jet_from_model, jet_to_model
from .Cocycles import CocycleSpec, IIDDriver, MatrixEnsemble
from .Germs    import GermEnsemble, OrbitRecord
from .Gallery  import (ExampleId, ExampleName, build_example, e1_generator)


__all__: list[str] = [
    'MatrixAtomModel', 'MatrixFileModel', 'GermAtomModel', 'GeneratorModel',
    'GermFileModel', 'RotationModel', 'RotationFileModel',
    'load_ensemble', 'read_ensemble', 'dump_matrix_ensemble',
    'dump_germ_ensemble', 'dump_example', 'dumps_record', 'orbit_csv',
    'table_csv',
]


#############################################################################
#  Schemas
# ---------
#

class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class MatrixAtomModel(_Strict):
    matrix: list[list[tuple[float, float]]]
    prob  : float = Field(ge=0, le=1)


class MatrixFileModel(_Strict):
    dimension: int = Field(ge=1)
    atoms    : list[MatrixAtomModel] = Field(min_length=1)


class GermAtomModel(_Strict):
    map : list[list[TermModel]]
    prob: float = Field(ge=0, le=1)


class GeneratorModel(_Strict):
    family: Literal['E1']
    lam   : float = Field(default=0.5, gt=0, lt=1)
    cap   : int | None = Field(default=None, ge=1)


class GermFileModel(_Strict):
    dimension: int | None = Field(default=None, ge=1)
    R        : PositiveFloat | None = None
    atoms    : list[GermAtomModel] | None = None
    generator: GeneratorModel | None = None


class RotationModel(_Strict):
    family: Literal['R1', 'R2']
    theta : float = Field(gt=0, lt=1)
    K     : int = Field(default=8, ge=1)


class RotationFileModel(_Strict):
    rotation: RotationModel


#############################################################################
#  Loading
# ---------
#

def read_ensemble(path: str | Path) -> CocycleSpec | GermEnsemble:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    return load_ensemble(text)


def load_ensemble(text: str | bytes) -> CocycleSpec | GermEnsemble:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Ensemble file is not JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Ensemble file must hold a JSON object")
    try:
        if 'rotation' in data:
            return _rotation(RotationFileModel.model_validate(data))
        atoms = data.get('atoms') or []
        if 'generator' in data or (atoms and isinstance(atoms[0], dict)
                                   and 'map' in atoms[0]):
            return _germs(GermFileModel.model_validate(data))
        return _matrices(MatrixFileModel.model_validate(data))
    except ValidationError as e:
        raise ConfigError(f"Ensemble file violates its schema: {e}") from e


def _matrices(model: MatrixFileModel) -> CocycleSpec:
    m = model.dimension
    atoms = []
    for k, atom in enumerate(model.atoms):
        mat = NP.array([[complex(*c) for c in row] for row in atom.matrix])
        if mat.shape != (m, m):
            raise ConfigError(f"Atom {k} has shape {mat.shape}, not {(m, m)}")
        atoms.append(mat)
    return CocycleSpec.iid(MatrixEnsemble(
        NP.array(atoms), NP.array([a.prob for a in model.atoms])))


def _germs(model: GermFileModel) -> GermEnsemble:
    if (model.atoms is None) == (model.generator is None):
        raise ConfigError("A germ file holds either atoms or a generator")
    if model.generator is not None:
        gen = model.generator
        return GermEnsemble.from_generator(e1_generator(gen.lam, gen.cap),
                                           model.R)
    assert model.atoms is not None
    jets = tuple(jet_from_model(a.map) for a in model.atoms)
    if model.dimension is not None and any(
            f.dimension != model.dimension for f in jets):
        raise ConfigError(f"Maps do not have dimension {model.dimension}")
    kwargs: dict[str, Any] = {} if model.R is None else {'radius': model.R}
    return GermEnsemble(jets, NP.array([a.prob for a in model.atoms]),
                        **kwargs)


def _rotation(model: RotationFileModel) -> CocycleSpec:
    rot = model.rotation
    built = build_example(ExampleId(name=ExampleName[rot.family],
                                    theta=rot.theta, K=rot.K))
    assert isinstance(built, CocycleSpec)
    return built


#############################################################################
#  Dumping
# ---------
#

def _float(x: float) -> str:
    if math.isnan(x):
        return 'NaN'
    if math.isinf(x):
        return 'Infinity' if x > 0 else '-Infinity'
    return format(x, '.17g')


def _encode(obj: Any) -> str:
    match obj:
        case bool() | None | str():
            return json.dumps(obj)
        case int() | NP.integer():
            return str(int(obj))
        case float() | NP.floating():
            return _float(float(obj))
        case complex() | NP.complexfloating():
            return f"[{_float(obj.real)}, {_float(obj.imag)}]"
        case NP.ndarray():
            return _encode(obj.tolist())
        case dict():
            return '{' + ', '.join(f"{json.dumps(str(k))}: {_encode(v)}"
                                   for k, v in obj.items()) + '}'
        case list() | tuple():
            return '[' + ', '.join(_encode(v) for v in obj) + ']'
        case _:
            return json.dumps(str(obj))


def dumps_record(record: Any) -> str:
    """JSON text with floats at 17 significant digits."""
    return _encode(record) + '\n'


def dump_matrix_ensemble(ensemble: MatrixEnsemble) -> str:
    return dumps_record({
        'dimension': ensemble.dimension,
        'atoms': [{'matrix': [[[c.real, c.imag] for c in row] for row in a],
                   'prob': float(p)}
                  for a, p in zip(ensemble.atoms, ensemble.probabilities)]})


def dump_germ_ensemble(ensemble: GermEnsemble) -> str:
    gen = ensemble.generator
    if gen is not None:
        return dumps_record({'R': ensemble.radius, 'generator': {
            'family': gen.family, **dict(gen.params), 'cap': gen.cap}})
    return dumps_record({
        'dimension': ensemble.dimension, 'R': ensemble.radius,
        'atoms': [{'map': jet_to_model(f), 'prob': float(p)}
                  for f, p in zip(ensemble.atoms, ensemble.probabilities)]})


def dump_example(eid: ExampleId, built: CocycleSpec | GermEnsemble) -> str:
    if isinstance(built, GermEnsemble):
        return dump_germ_ensemble(built)
    if isinstance(built.driver, IIDDriver):
        return dump_matrix_ensemble(built.driver.ensemble)
    return dumps_record({'rotation': {'family': eid.name.name,
                                      'theta': eid.theta, 'K': eid.K}})


def table_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_float(v) if isinstance(v, float) else v
                         for v in row])
    return out.getvalue()


def orbit_csv(record: OrbitRecord | None, dimension: int) -> str:
    """step, re_1, im_1, ..., norm; a missing record gives the header."""
    header = ['step', *(f"{p}_{i}" for i in range(1, dimension + 1)
                        for p in ('re', 'im')), 'norm']
    return table_csv(header, record.rows() if record is not None else [])
