#!/usr/bin/env python3.12
# https://peps.python.org/pep-0695/

from __future__ import annotations
from enum import StrEnum
from typing import Any, Iterable, Protocol, Self, Sequence, runtime_checkable

import numpy as NP
import numpy.typing as NPT
from rich.repr import Result as rich_repr_Result

__all__: list[str] = [

    # Array aliases
    'CArray', 'FArray', 'IArray', 'BArray', 'Point',

    # Rich Repr-able
    'RichReprable', 'isRichReprable',

    # Verdicts
    'Verdict',

    # Errors
    'FatouLabError', 'ConfigError', 'JetError', 'NotAttractingError',
    'NumericalFailure', 'SeparationFailure', 'TrappingFailure',
    'StableSetEmpty', 'NotConverged', 'MonotonicityViolation',

    'as_point',
]

#############################################################################
#  Arrays
# --------
#

type CArray = NPT.NDArray[NP.complex128]
type FArray = NPT.NDArray[NP.float64]
type IArray = NPT.NDArray[NP.int64]
type BArray = NPT.NDArray[NP.bool_]

type Point = Sequence[complex] | CArray


def as_point(z: Point | complex, dimension: int) -> CArray:
    """Coerce a scalar or sequence into a complex vector of `dimension`."""
    arr = NP.atleast_1d(NP.asarray(z, dtype=NP.complex128))
    if arr.shape != (dimension,):
        raise ConfigError(
            f"Expected a point of dimension {dimension}, got shape {arr.shape}")
    return arr


#############################################################################
#  Rich Repr
# -----------
#

@runtime_checkable
class RichReprable(Protocol):
    def __rich_repr__(self: Self) -> rich_repr_Result:
        raise NotImplementedError

def isRichReprable(obj: Any) -> bool:
    return isinstance(obj, RichReprable)


#############################################################################
#  Verdicts
# ----------
#

class Verdict(StrEnum):
    Attracting   = 'Attracting'
    Repelling    = 'Repelling'
    Neutral      = 'Neutral'
    SemiNeutral  = 'SemiNeutral'
    Undetermined = 'Undetermined'


#############################################################################
#  Errors
# --------
#
#  ConfigError family: the request cannot be honored as stated.
#  NumericalFailure family: the request was fine, the numbers were not.
#

class FatouLabError(Exception):
    pass


class ConfigError(FatouLabError, ValueError):
    pass


class JetError(ConfigError):
    pass


class NotAttractingError(ConfigError):
    pass


class NumericalFailure(FatouLabError, ArithmeticError):
    pass


class SeparationFailure(NumericalFailure):
    k: int

    def __init__(self: Self, k: int, message: str) -> None:
        super().__init__(message)
        self.k = k


class TrappingFailure(NumericalFailure):
    pass


class StableSetEmpty(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    defects: tuple[float, ...]

    def __init__(self: Self, message: str, defects: Iterable[float] = ()
                 ) -> None:
        super().__init__(message)
        self.defects = tuple(defects)


class MonotonicityViolation(NumericalFailure):
    step: int

    def __init__(self: Self, step: int, message: str) -> None:
        super().__init__(message)
        self.step = step
