import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import SQ3, random_path
from sigflow.exceptions import DepthError, DomainError, InputError, ShapeError
from sigflow.tensor_algebra import SampledPath, TruncatedTensor, signature
from sigflow.words import (
    WordPoly,
    concat,
    format_word,
    half_shuffle_right,
    pair,
    pair_on_path,
    parse_word,
    shuffle,
    shuffle_power,
)


def e(*letters, c=1.0):
    return WordPoly({tuple(letters): c})


# --- independent oracles -----------------------------------------------------

@lru_cache(maxsize=None)
def shuffle_rec(u, v):
    # ua sh vb = (u sh vb)a + (ua sh v)b
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out = {}
    for w, m in shuffle_rec(u[:-1], v).items():
        out[w + u[-1:]] = out.get(w + u[-1:], 0) + m
    for w, m in shuffle_rec(u, v[:-1]).items():
        out[w + v[-1:]] = out.get(w + v[-1:], 0) + m
    return out


def half_rec(u, v):
    # u > e_j = u e_j ;  u > (w e_j) = (u > w + w > u) e_j
    if len(v) == 1:
        return {u + v: 1}
    w, j = v[:-1], v[-1:]
    out = {}
    for part in (half_rec(u, w), half_rec(w, u)):
        for x, m in part.items():
            out[x + j] = out.get(x + j, 0) + m
    return out


words = st.lists(st.integers(1, 3), min_size=1, max_size=3).map(tuple)
polys = st.dictionaries(words, st.integers(-3, 3), max_size=3).map(lambda d: WordPoly({k: float(v) for k, v in d.items()}))


def test_word_text_form():
    assert format_word((1, 2, 1)) == "1.2.1"
    assert parse_word("1.2.1") == (1, 2, 1)
    assert parse_word("()") == ()
    with pytest.raises(InputError):
        parse_word("1.x")
    f = WordPoly({(2, 1): 0.5, (1,): -1.0, (): 2.0})
    assert WordPoly.parse(str(f)) == f
    assert [w for w, _ in f.items()] == [(), (1,), (2, 1)]


def test_zero_terms_dropped_and_alphabet():
    f = e(1) - e(1)
    assert len(f) == 0 and not f
    with pytest.raises(InputError):
        WordPoly({(3,): 1.0}, dim=2)
    with pytest.raises(ShapeError):
        shuffle(WordPoly({(1,): 1.0}, dim=2), WordPoly({(1,): 1.0}, dim=3))


def test_shuffle_examples():
    assert shuffle(e(1), e(2)) == e(1, 2) + e(2, 1)
    assert shuffle(e(1), e(1)) == e(1, 1, c=2.0)
    u = e(1, 3) + e(2, c=-0.5)
    assert shuffle(WordPoly.empty(), u) == u
    assert shuffle_power(e(2), 3) == e(2, 2, 2, c=6.0)


@given(words, words)
def test_shuffle_matches_recursive_oracle(u, v):
    got = shuffle(WordPoly({u: 1.0}), WordPoly({v: 1.0}))
    assert got == WordPoly({w: float(m) for w, m in shuffle_rec(u, v).items()})
    assert sum(got.terms.values()) == math.comb(len(u) + len(v), len(v))


@given(polys, polys, polys)
def test_shuffle_commutative_associative(a, b, c):
    assert shuffle(a, b) == shuffle(b, a)
    assert shuffle(shuffle(a, b), c) == shuffle(a, shuffle(b, c))


def test_half_shuffle_examples():
    assert half_shuffle_right(e(1), e(2)) == e(1, 2)
    assert half_shuffle_right(e(1), e(2)) + half_shuffle_right(e(2), e(1)) == shuffle(e(1), e(2))
    got = half_shuffle_right(e(1, 2), e(3, 4))
    assert got == WordPoly({w: float(m) for w, m in half_rec((1, 2), (3, 4)).items()})
    with pytest.raises(DomainError):
        half_shuffle_right(e(1), WordPoly.empty())


@given(words, words)
def test_half_shuffle_recursion_and_split(u, v):
    got = half_shuffle_right(WordPoly({u: 1.0}), WordPoly({v: 1.0}))
    assert got == WordPoly({w: float(m) for w, m in half_rec(u, v).items()})
    U, V = WordPoly({u: 1.0}), WordPoly({v: 1.0})
    assert half_shuffle_right(U, V) + half_shuffle_right(V, U) == shuffle(U, V)


def test_concat():
    assert concat(e(1) + e(2), e(3)) == e(1, 3) + e(2, 3)


def test_pair_examples(levy_path):
    S = signature(levy_path, 3)
    assert abs(pair(e(1, 2) - e(2, 1), S) + 6 * SQ3) < 1e-10
    assert pair(WordPoly.empty(), S) == 1.0
    with pytest.raises(DepthError):
        pair(e(1, 1, 1, 1), S)
    with pytest.raises(InputError):
        pair(e(3), S)


@given(words, words, st.integers(0, 2**31))
def test_shuffle_identity_on_paths(u, v, seed):
    rng = np.random.default_rng(seed)
    S = signature(random_path(rng, 5, 3), len(u) + len(v))
    U, V = WordPoly({u: 1.0}), WordPoly({v: 1.0})
    lhs, rhs = pair(shuffle(U, V), S), pair(U, S) * pair(V, S)
    assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs))


def running_coefficient(word, x):
    # <w, S_{0,t}> by nested cumulative trapezoid integration on the samples
    acc = np.ones(len(x))
    for letter in word:
        dx = np.diff(x[:, letter - 1])
        acc = np.concatenate([[0.0], np.cumsum(0.5 * (acc[1:] + acc[:-1]) * dx)])
    return acc


@pytest.mark.parametrize("u,v", [((1,), (2,)), ((2, 1), (3,)), ((1,), (3, 2)), ((3, 1), (2, 2))])
def test_half_shuffle_integral_identity(u, v):
    t = np.linspace(0.0, 1.0, 10_000)
    x = np.stack([t, np.sin(3 * t), np.cos(2 * t) + t**2], axis=1)
    S = signature(SampledPath(t, x), len(u) + len(v))
    lhs = pair(half_shuffle_right(WordPoly({u: 1.0}), WordPoly({v: 1.0})), S)
    # oracle: integral of <u, S_t> d<v, S_t>
    fu, fv = running_coefficient(u, x), running_coefficient(v, x)
    rhs = np.sum(0.5 * (fu[1:] + fu[:-1]) * np.diff(fv))
    assert abs(lhs - rhs) <= 1e-4 * abs(rhs)


def test_pair_on_path():
    p = SampledPath(np.linspace(0, 2 * np.pi, 50), np.stack([np.linspace(0, 2 * np.pi, 50), np.zeros(50)], 1))
    assert abs(pair_on_path(e(1), p) - 2 * np.pi) < 1e-12
    rng = np.random.default_rng(2)
    q = random_path(rng, 8, 3)
    f = e(1, 2, 3, c=0.5) + e(3, 3) + e(2, c=-2.0) + WordPoly.empty()
    assert abs(pair_on_path(f, q) - pair(f, signature(q, 3))) <= 1e-10 * max(1, abs(pair(f, signature(q, 3))))


def test_pair_batched():
    rng = np.random.default_rng(4)
    from sigflow.tensor_algebra import signature_from_increments
    inc = rng.normal(size=(3, 6, 2))
    S = signature_from_increments(inc, 2)
    f = e(1, 2) - e(2, 1)
    vals = pair(f, S)
    assert vals.shape == (3,)
    assert abs(vals[1] - pair(f, signature_from_increments(inc[1], 2))) < 1e-13
    assert isinstance(pair(f, TruncatedTensor.unit(2, 2)), float)
