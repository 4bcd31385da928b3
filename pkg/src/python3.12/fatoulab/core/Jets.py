#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Truncated multivariate complex power series.

A jet of dimension m and degree D stores, for each of its m components,
one complex coefficient per monomial of total degree at most D.  The
monomials are laid out in graded lexicographic order: by total degree,
then lexicographically descending on the exponent tuple, so for m = 2
the layout starts 1, z, w, z², zw, w², ...

Jets are immutable; coefficient arrays are flagged read-only.
"""

from __future__ import annotations
import json
from typing import (Any, ClassVar, Final, Iterable, Iterator, Mapping,
                    Sequence, Self)

import numpy          as NP
import scipy.sparse   as SP  # pyright: ignore[reportMissingTypeStubs]
import sympy          as SY
import rich.repr      as RR
from immutables import Map
from pydantic import (BaseModel, ConfigDict, NonNegativeInt, TypeAdapter,
                      ValidationError)

from .Types   import CArray, IArray, JetError, Point
from ..config import Settings


__all__: list[str] = [
    'MultiIndex', 'MonomialBasis', 'Jet', 'JetEvaluator', 'TermModel',
    'MapModel', 'jet_compose', 'jet_evaluate', 'linear_part', 'jet_iterate',
    'jet_parse', 'jet_dump', 'jet_to_model', 'jet_from_model',
]


type MultiIndex = tuple[int, ...]


#############################################################################
#  Monomial bases
# ----------------
#

def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """All exponent tuples of `parts` entries summing to `total`,
    lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


class MonomialBasis:
    """Graded lexicographic monomial layout shared by all jets of (m, D)."""

    dimension: int
    degree   : int
    exponents: IArray           # (N, m)
    degrees  : IArray           # (N,)
    index    : Map[MultiIndex, int]
    parents  : IArray           # (N,) index of exponent minus e_var
    variables: IArray           # (N,) first variable with positive exponent
    _product : Any              # sparse (N, N*N) truncated product table

    _cache: ClassVar[Map[tuple[int, int], MonomialBasis]] = Map()

    def __init__(self: Self, dimension: int, degree: int) -> None:
        if dimension < 1 or degree < 1:
            raise JetError(
                f"Dimension and degree must be positive: {dimension}, {degree}")
        self.dimension = dimension
        self.degree = degree
        exps = [e for d in range(degree + 1)
                for e in _compositions(d, dimension)]
        self.exponents = NP.array(exps, dtype=NP.int64)
        self.exponents.flags.writeable = False
        self.degrees = self.exponents.sum(axis=1)
        self.index = Map({e: i for i, e in enumerate(exps)})
        n = len(exps)
        parents = NP.zeros(n, dtype=NP.int64)
        variables = NP.zeros(n, dtype=NP.int64)
        for i, e in enumerate(exps[1:], start=1):
            k = next(v for v, p in enumerate(e) if p > 0)
            parent = list(e)
            parent[k] -= 1
            parents[i] = self.index[tuple(parent)]
            variables[i] = k
        self.parents, self.variables = parents, variables
        rows: list[int] = []
        cols: list[int] = []
        for i, a in enumerate(exps):
            for j, b in enumerate(exps):
                if sum(a) + sum(b) <= degree:
                    rows.append(self.index[tuple(x + y for x, y in zip(a, b))])
                    cols.append(i * n + j)
        self._product = SP.csr_matrix(
            (NP.ones(len(rows)), (rows, cols)), shape=(n, n * n))

    @classmethod
    def get(cls: type[Self], dimension: int, degree: int) -> MonomialBasis:
        key = (dimension, degree)
        basis = cls._cache.get(key)
        if basis is None:
            basis = MonomialBasis(dimension, degree)
            cls._cache = cls._cache.set(key, basis)
        return basis

    def __len__(self: Self) -> int:
        return len(self.exponents)

    def multiply(self: Self, a: CArray, b: CArray) -> CArray:
        """Product of two coefficient vectors truncated at the degree."""
        return NP.asarray(self._product @ NP.outer(a, b).ravel(),
                          dtype=NP.complex128)

    def monomials(self: Self, z: CArray) -> CArray:
        """Values of every monomial at points z of shape (..., m)."""
        out = NP.empty((*z.shape[:-1], len(self)), dtype=NP.complex128)
        out[..., 0] = 1.0
        for i in range(1, len(self)):
            out[..., i] = out[..., self.parents[i]] * z[..., self.variables[i]]
        return out

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'dimension', self.dimension
        yield 'degree', self.degree
        yield 'size', len(self)


#############################################################################
#  Jets
# ------
#

class Jet:
    basis : MonomialBasis
    coeffs: CArray              # (m, N), read-only

    __slots__ = ('basis', 'coeffs')

    def __init__(self: Self, basis: MonomialBasis, coeffs: CArray) -> None:
        arr = NP.array(coeffs, dtype=NP.complex128)
        if arr.shape != (basis.dimension, len(basis)):
            raise JetError(
                f"Coefficient shape {arr.shape} does not match "
                f"({basis.dimension}, {len(basis)})")
        arr.flags.writeable = False
        self.basis = basis
        self.coeffs = arr

    @property
    def dimension(self: Self) -> int:
        return self.basis.dimension

    @property
    def degree(self: Self) -> int:
        return self.basis.degree

    @property
    def fixes_origin(self: Self) -> bool:
        return bool(NP.all(self.coeffs[:, 0] == 0))

    # ---- constructors ----

    @classmethod
    def zero(cls: type[Self], dimension: int, degree: int | None = None
             ) -> Self:
        basis = MonomialBasis.get(dimension, degree or Settings().DEGREE)
        return cls(basis, NP.zeros((dimension, len(basis)), NP.complex128))

    @classmethod
    def identity(cls: type[Self], dimension: int, degree: int | None = None
                 ) -> Self:
        return cls.linear(NP.eye(dimension), degree)

    @classmethod
    def linear(cls: type[Self], matrix: Any, degree: int | None = None
               ) -> Self:
        mat = NP.asarray(matrix, dtype=NP.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise JetError(f"Linear part must be square, got {mat.shape}")
        m = mat.shape[0]
        basis = MonomialBasis.get(m, degree or Settings().DEGREE)
        coeffs = NP.zeros((m, len(basis)), NP.complex128)
        coeffs[:, 1:m + 1] = mat
        return cls(basis, coeffs)

    @classmethod
    def from_terms(cls: type[Self],
                   components: Sequence[Mapping[MultiIndex, complex]],
                   degree: int | None = None) -> Self:
        m = len(components)
        if m < 1:
            raise JetError("A jet needs at least one component")
        basis = MonomialBasis.get(m, degree or Settings().DEGREE)
        coeffs = NP.zeros((m, len(basis)), NP.complex128)
        for c, terms in enumerate(components):
            for exps, coeff in terms.items():
                coeffs[c, _locate(basis, exps)] = coeff
        return cls(basis, coeffs)

    @classmethod
    def from_sympy(cls: type[Self], exprs: Sequence[Any],
                   symbols: Sequence[SY.Symbol], degree: int | None = None
                   ) -> Self:
        """Jet of a polynomial map given by sympy expressions."""
        if len(exprs) != len(symbols):
            raise JetError(
                f"{len(exprs)} components for {len(symbols)} variables")
        components: list[dict[MultiIndex, complex]] = []
        for expr in exprs:
            poly = SY.Poly(SY.expand(SY.sympify(expr)), *symbols)
            components.append({
                tuple(int(e) for e in monom): complex(SY.N(coeff, 17))
                for monom, coeff in poly.terms()})
        return cls.from_terms(components, degree)

    # ---- views ----

    def coefficient(self: Self, component: int, exponents: MultiIndex
                    ) -> complex:
        return complex(self.coeffs[component,
                                   _locate(self.basis, exponents)])

    def terms(self: Self) -> tuple[Map[MultiIndex, complex], ...]:
        """Nonzero coefficients per component, keyed by exponent tuple."""
        exps = [tuple(int(x) for x in e) for e in self.basis.exponents]
        return tuple(
            Map({exps[i]: complex(row[i]) for i in NP.flatnonzero(row)})
            for row in self.coeffs)

    def evaluator(self: Self) -> JetEvaluator:
        return JetEvaluator(self)

    def __call__(self: Self, z: Point | CArray) -> CArray:
        return jet_evaluate(self, z)

    def __eq__(self: Self, other: object) -> bool:
        return (isinstance(other, Jet)
                and self.basis is other.basis
                and bool(NP.array_equal(self.coeffs, other.coeffs)))

    def __hash__(self: Self) -> int:
        return hash((self.dimension, self.degree, self.coeffs.tobytes()))

    def __rich_repr__(self: Self) -> RR.Result:
        yield 'dimension', self.dimension
        yield 'degree', self.degree
        yield 'terms', [dict(t) for t in self.terms()]


def _locate(basis: MonomialBasis, exponents: Sequence[int]) -> int:
    exps = tuple(int(e) for e in exponents)
    if len(exps) != basis.dimension:
        raise JetError(
            f"Multi-index {exps} has length {len(exps)}, "
            f"expected {basis.dimension}")
    if any(e < 0 for e in exps):
        raise JetError(f"Negative exponent in {exps}")
    if sum(exps) > basis.degree:
        raise JetError(
            f"Multi-index {exps} has degree {sum(exps)} above {basis.degree}")
    return basis.index[exps]


class JetEvaluator:
    """Pointwise evaluation touching only the monomials a jet uses.

    Each component is summed over its nonzero terms only, so a component
    with a single term is evaluated with a single rounding.
    """

    jet     : Jet
    _order  : tuple[int, ...]
    _terms  : tuple[tuple[tuple[int, complex], ...], ...]

    def __init__(self: Self, jet: Jet) -> None:
        basis = jet.basis
        used: set[int] = set()
        for i in NP.flatnonzero(NP.any(jet.coeffs != 0, axis=0)):
            i = int(i)
            while i > 0 and i not in used:
                used.add(i)
                i = int(basis.parents[i])
        self.jet = jet
        self._order = tuple(sorted(used))
        self._terms = tuple(
            tuple((int(i), complex(row[i])) for i in NP.flatnonzero(row))
            for row in jet.coeffs)

    def __call__(self: Self, z: CArray) -> CArray:
        basis = self.jet.basis
        mono: dict[int, Any] = {}
        for i in self._order:
            p, v = int(basis.parents[i]), int(basis.variables[i])
            mono[i] = z[..., v] if p == 0 else mono[p] * z[..., v]
        out = NP.zeros(z.shape, dtype=NP.complex128)
        for c, terms in enumerate(self._terms):
            acc: Any = None
            for i, coeff in terms:
                term = coeff if i == 0 else (
                    mono[i] if coeff == 1 else coeff * mono[i])
                acc = term if acc is None else acc + term
            if acc is not None:
                out[..., c] = acc
        return out


#############################################################################
#  Operations
# ------------
#

def _check_pair(f: Jet, g: Jet) -> None:
    if f.dimension != g.dimension or f.degree != g.degree:
        raise JetError(
            f"Jets disagree: dimension {f.dimension} vs {g.dimension}, "
            f"degree {f.degree} vs {g.degree}")


def jet_compose(f: Jet, g: Jet) -> Jet:
    """f∘g truncated at the common degree; g must fix the origin."""
    _check_pair(f, g)
    if not g.fixes_origin:
        raise JetError("Inner jet of a composition must fix the origin")
    basis = g.basis
    powers = NP.zeros((len(basis), len(basis)), NP.complex128)
    powers[0, 0] = 1.0
    for i in range(1, len(basis)):
        powers[i] = basis.multiply(powers[basis.parents[i]],
                                   g.coeffs[basis.variables[i]])
    return Jet(basis, f.coeffs @ powers)


def jet_evaluate(f: Jet, z: Point | CArray) -> CArray:
    """Evaluate f at a point, or at a batch of points along the last axis."""
    arr = NP.asarray(z, dtype=NP.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != f.dimension:
        raise JetError(
            f"Point of dimension {arr.shape[-1]} for a jet of "
            f"dimension {f.dimension}")
    return f.basis.monomials(arr) @ f.coeffs.T


def linear_part(f: Jet) -> CArray:
    """df(0), the matrix of degree-one coefficients."""
    m = f.dimension
    return NP.array(f.coeffs[:, 1:m + 1])


def jet_iterate(f: Jet, n: int) -> Jet:
    if n < 0:
        raise JetError(f"Iteration count must be nonnegative: {n}")
    result = Jet.identity(f.dimension, f.degree)
    for _ in range(n):
        result = jet_compose(f, result)
    return result


#############################################################################
#  Serialization
# ---------------
#
#  A map is a list of m components, each a list of
#  {"exponents": [e_1, ..., e_m], "coeff": [re, im]} records.
#

class TermModel(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    exponents: list[NonNegativeInt]
    coeff    : tuple[float, float]


type MapModel = list[list[TermModel]]

_MAP_ADAPTER: Final[TypeAdapter[list[list[TermModel]]]] = TypeAdapter(
    list[list[TermModel]])


def jet_parse(text: str | bytes | Sequence[Any], degree: int | None = None
              ) -> Jet:
    """Parse a serialized polynomial map into a canonical jet."""
    try:
        model = (_MAP_ADAPTER.validate_json(text)
                 if isinstance(text, (str, bytes))
                 else _MAP_ADAPTER.validate_python(text))
    except ValidationError as e:
        raise JetError(f"Malformed polynomial map: {e}") from e
    return jet_from_model(model, degree)


def jet_from_model(model: Sequence[Sequence[TermModel]],
                   degree: int | None = None) -> Jet:
    m = len(model)
    if m < 1:
        raise JetError("A polynomial map needs at least one component")
    components: list[dict[MultiIndex, complex]] = []
    for c, records in enumerate(model):
        terms: dict[MultiIndex, complex] = {}
        for rec in records:
            exps = tuple(rec.exponents)
            if len(exps) != m:
                raise JetError(
                    f"Component {c}: multi-index {exps} has length "
                    f"{len(exps)}, expected {m}")
            if exps in terms:
                raise JetError(f"Component {c}: duplicate monomial {exps}")
            terms[exps] = complex(*rec.coeff)
        components.append(terms)
    return Jet.from_terms(components, degree)


def jet_to_model(f: Jet) -> list[list[dict[str, Any]]]:
    return [[{'exponents': list(e), 'coeff': [c.real, c.imag]}
             for e, c in terms.items()]
            for terms in _canonical_terms(f)]


def _canonical_terms(f: Jet) -> Iterable[dict[MultiIndex, complex]]:
    exps = [tuple(int(x) for x in e) for e in f.basis.exponents]
    for row in f.coeffs:
        yield {exps[i]: complex(row[i]) for i in NP.flatnonzero(row)}


def jet_dump(f: Jet) -> str:
    return json.dumps(jet_to_model(f))
