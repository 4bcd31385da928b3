#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-

import numpy as NP
import sympy as SY
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pytest import mark, raises

from fatoulab.core import *

pytestmark = mark.smoke

DEGREE = 8
SIZE = len(MonomialBasis.get(2, DEGREE))


def shear(degree: int = DEGREE) -> Jet:
    """g(z, w) = (z + zw, w)."""
    return Jet.from_terms([{(1, 0): 1, (1, 1): 1}, {(0, 1): 1}], degree)


def random_germ(rng: NP.random.Generator, scale: float = 0.5,
                degree: int = DEGREE) -> Jet:
    basis = MonomialBasis.get(2, degree)
    coeffs = scale * (rng.uniform(-1, 1, (2, len(basis)))
                      + 1j * rng.uniform(-1, 1, (2, len(basis))))
    coeffs[:, 0] = 0
    return Jet(basis, coeffs)


def close(a: Jet, b: Jet, tol: float = 1e-12, scale: float = 1.0) -> bool:
    scale = max(scale, float(NP.max(NP.abs(a.coeffs))))
    return bool(NP.max(NP.abs(a.coeffs - b.coeffs)) <= tol * scale)


def magnitude(*jets: Jet) -> float:
    """Largest coefficient of the composition of absolute-value jets."""
    absolute = [Jet(f.basis, NP.abs(f.coeffs)) for f in jets]
    acc = absolute[-1]
    for f in reversed(absolute[:-1]):
        acc = jet_compose(f, acc)
    return float(NP.max(acc.coeffs.real))


def associative(f: Jet, g: Jet, h: Jet) -> bool:
    return close(jet_compose(jet_compose(f, g), h),
                 jet_compose(f, jet_compose(g, h)),
                 scale=magnitude(f, g, h))


def test_basis_is_graded_lex():
    basis = MonomialBasis.get(2, 3)
    assert len(basis) == 10
    assert [tuple(e) for e in basis.exponents[:6]] == [
        (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert list(basis.degrees) == sorted(basis.degrees)
    assert MonomialBasis.get(2, 3) is basis
    with raises(JetError):
        MonomialBasis(0, 3)


def test_identity_composition():
    f = random_germ(NP.random.default_rng(0))
    ident = Jet.identity(2, DEGREE)
    assert jet_compose(ident, f) == f
    assert close(jet_compose(f, ident), f)


def test_shear_iterates():
    g = shear()
    for n in range(51):
        gn = jet_iterate(g, n)
        assert gn.coefficient(0, (1, 1)) == n
        assert gn.coefficient(1, (0, 1)) == 1
    assert jet_iterate(g, 1) == g
    assert jet_compose(g, jet_compose(g, g)).coefficient(0, (1, 1)) == 3


def test_iterate_recursion_is_exact():
    g = Jet.from_terms([{(1, 0): 0.5, (2, 0): 1, (1, 1): 0.25},
                        {(0, 1): 0.5j, (0, 2): 1}])
    for n in range(1, 6):
        assert jet_iterate(g, n) == jet_compose(g, jet_iterate(g, n - 1))
    assert jet_iterate(g, 0) == Jet.identity(2, DEGREE)
    with raises(JetError):
        jet_iterate(g, -1)


def test_one_variable_oracle():
    lam = 0.3 + 0.2j
    z = SY.Symbol('z')
    f = Jet.from_terms([{(1,): lam, (2,): 1}], 4)
    g = Jet.from_terms([{(1,): 1, (2,): 1}], 4)
    fg = jet_compose(f, g)
    assert fg.coefficient(0, (1,)) == lam
    assert fg.coefficient(0, (2,)) == lam + 1
    assert fg.coefficient(0, (3,)) == 2
    assert fg.coefficient(0, (4,)) == 1
    oracle = SY.Poly(SY.expand(SY.Rational(3, 10) * z + z**2), z)
    f2 = jet_iterate(Jet.from_sympy([SY.Rational(3, 10) * z + z**2], [z], 4), 2)
    expected = SY.Poly(SY.expand(oracle.as_expr().subs(z, oracle.as_expr())), z)
    for (k,), c in expected.terms():
        if k <= 4:
            assert abs(f2.coefficient(0, (k,)) - float(c)) < 1e-15


def test_linear_part():
    assert NP.array_equal(linear_part(shear()), NP.eye(2))
    half = Jet.from_terms([{(1, 0): 1}, {(0, 1): 0.5}])
    assert NP.array_equal(linear_part(half), NP.diag([1, 0.5]))
    assert NP.array_equal(linear_part(Jet.identity(3, 2)), NP.eye(3))


@seed(1)
@settings(deadline=None)
@given(
    re=arrays(NP.float64, (3, 2, SIZE),
              elements=st.floats(min_value=-0.5, max_value=0.5)),
    im=arrays(NP.float64, (3, 2, SIZE),
              elements=st.floats(min_value=-0.5, max_value=0.5)),
)
def test_composition_laws(re, im):
    coeffs = re + 1j * im
    coeffs[:, :, 0] = 0
    basis = MonomialBasis.get(2, DEGREE)
    f, g, h = (Jet(basis, c) for c in coeffs)
    assert associative(f, g, h)
    assert NP.allclose(linear_part(jet_compose(f, g)),
                       linear_part(f) @ linear_part(g),
                       rtol=0, atol=1e-12)


@mark.slow
def test_associativity_many_triples():
    rng = NP.random.default_rng(2024)
    for _ in range(1000):
        f, g, h = (random_germ(rng) for _ in range(3))
        assert associative(f, g, h)


def test_evaluation():
    ident = Jet.identity(2)
    z = NP.array([0.3, 0.4j])
    assert NP.array_equal(jet_evaluate(ident, z), z)
    assert NP.array_equal(shear()(NP.array([1, 1])), NP.array([2, 1]))
    f = Jet.from_terms([{(1,): 0.5, (2,): 8}])
    assert abs(f(0.01)[0] - 0.0058) < 1e-16
    pts = NP.random.default_rng(3).standard_normal((7, 2)) * 0.1
    assert NP.allclose(shear().evaluator()(pts.astype(NP.complex128)),
                       jet_evaluate(shear(), pts), rtol=0, atol=1e-15)
    with raises(JetError):
        jet_evaluate(shear(), NP.zeros(3))


def test_evaluation_matches_composition_near_origin():
    rng = NP.random.default_rng(5)
    degree = 3
    f, g = random_germ(rng, degree=degree), random_germ(rng, degree=degree)
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    z *= 1e-3 / NP.linalg.norm(z)
    lhs = jet_evaluate(jet_compose(f, g), z)
    rhs = jet_evaluate(f, jet_evaluate(g, z))
    norm_f = float(NP.abs(f.coeffs).sum())
    norm_g = float(NP.abs(g.coeffs).sum())
    bound = norm_f * max(1.0, norm_g) ** (degree + 1) * 1e-3 ** (degree + 1)
    assert NP.max(NP.abs(lhs - rhs)) <= bound + 1e-17


def test_composition_errors():
    with raises(JetError):
        jet_compose(shear(), shear(4))
    with raises(JetError):
        jet_compose(shear(), Jet.identity(3))
    affine = Jet.from_terms([{(0, 0): 1, (1, 0): 1}, {(0, 1): 1}])
    assert not affine.fixes_origin
    jet_compose(affine, shear())
    with raises(JetError):
        jet_compose(shear(), affine)
    with raises(JetError):
        Jet.from_terms([{(9, 0): 1}, {}])


def test_parse_and_dump():
    text = ('[[{"exponents": [1, 0], "coeff": [1, 0]},'
            '  {"exponents": [1, 1], "coeff": [1, 0]}],'
            ' [{"exponents": [0, 1], "coeff": [1, 0]}]]')
    assert jet_parse(text) == shear()
    ident = Jet.identity(2)
    assert jet_parse(jet_dump(ident)) == ident
    f = random_germ(NP.random.default_rng(11))
    assert jet_parse(jet_dump(f)) == f


def test_parse_errors():
    with raises(JetError):
        jet_parse('[[{"exponents": [-1, 0], "coeff": [1, 0]}], []]')
    with raises(JetError):
        jet_parse('[[{"exponents": [1, 0], "coeff": [1, 0]},'
                  '  {"exponents": [1, 0], "coeff": [2, 0]}], []]')
    with raises(JetError):
        jet_parse('[[{"exponents": [3, 0], "coeff": [1, 0]}], []]', degree=2)
    with raises(JetError):
        jet_parse('[[{"exponents": [1], "coeff": [1, 0]}], []]')
    with raises(JetError):
        jet_parse('[]')
    with raises(JetError):
        jet_parse('not json')
