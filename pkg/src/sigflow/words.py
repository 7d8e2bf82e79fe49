"""Words, linear combinations of words, shuffle products and dual pairings.

A word is a tuple of 1-based letters; the empty tuple is the empty word.
Canonical text form writes letters joined by dots (``"1.2.1"``) and the empty
word as ``"()"``.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .exceptions import DepthError, DomainError, InputError, ShapeError
from .tensor_algebra import PrefixTree, SampledPath, TruncatedTensor, word_index


def format_word(word: Sequence[int]) -> str:
    return ".".join(str(i) for i in word) if word else "()"


def parse_word(text: str) -> tuple:
    text = text.strip()
    if text in ("()", ""):
        return ()
    try:
        letters = tuple(int(p) for p in text.split("."))
    except ValueError as exc:
        raise InputError(f"cannot parse word {text!r}") from exc
    if any(i < 1 for i in letters):
        raise InputError(f"letters must be positive in {text!r}")
    return letters


def canonical_key(word: Sequence[int]) -> tuple:
    """Sort key: length first, then lexicographic."""
    return (len(word), tuple(word))


class WordPoly:
    """A finite real linear combination of words.

    Zero coefficients are dropped on construction. ``dim`` optionally pins the
    alphabet size; operations between polys pinned to different alphabets fail.
    """

    __slots__ = ("terms", "dim")

    def __init__(self, terms: Mapping | Iterable = (), dim: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for w, c in items:
            w = tuple(int(i) for i in w)
            acc[w] = acc.get(w, 0.0) + float(c)
        self.terms = {w: c for w, c in acc.items() if c != 0.0}
        if dim is not None and any(i > dim or i < 1 for w in self.terms for i in w):
            raise InputError(f"letter outside alphabet 1..{dim}")
        self.dim = dim

    @classmethod
    def word(cls, *letters: int, coeff: float = 1.0, dim: int | None = None) -> "WordPoly":
        return cls({tuple(letters): coeff}, dim=dim)

    @classmethod
    def empty(cls, dim: int | None = None) -> "WordPoly":
        return cls({(): 1.0}, dim=dim)

    def _merge_dim(self, other: "WordPoly") -> int | None:
        if self.dim is not None and other.dim is not None and self.dim != other.dim:
            raise ShapeError(f"alphabet mismatch: {self.dim} vs {other.dim}")
        return self.dim if self.dim is not None else other.dim

    def items(self) -> Iterator[tuple[tuple, float]]:
        for w in sorted(self.terms, key=canonical_key):
            yield w, self.terms[w]

    def words(self) -> list[tuple]:
        return sorted(self.terms, key=canonical_key)

    @property
    def max_length(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WordPoly):
            return NotImplemented
        return self.terms == other.terms

    def isclose(self, other: "WordPoly", tol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= tol for k in keys)

    def __add__(self, other: "WordPoly") -> "WordPoly":
        dim = self._merge_dim(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return WordPoly(out, dim)

    def __sub__(self, other: "WordPoly") -> "WordPoly":
        return self + other * -1.0

    def __neg__(self) -> "WordPoly":
        return self * -1.0

    def __mul__(self, scale: float) -> "WordPoly":
        if isinstance(scale, WordPoly):
            raise TypeError("use shuffle() or concat() to multiply word polynomials")
        scale = float(scale)
        return WordPoly({w: c * scale for w, c in self.terms.items()}, self.dim)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"WordPoly({self})"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " ".join(f"{c!r}*{format_word(w)}" for w, c in self.items())

    @classmethod
    def parse(cls, text: str, dim: int | None = None) -> "WordPoly":
        """Inverse of ``str``: whitespace-separated ``coef*word`` terms."""
        text = text.strip()
        if text in ("", "0"):
            return cls({}, dim)
        terms = []
        for tok in text.split():
            if "*" not in tok:
                raise InputError(f"malformed term {tok!r}")
            coef, word = tok.split("*", 1)
            try:
                terms.append((parse_word(word), float(coef)))
            except ValueError as exc:
                raise InputError(f"malformed coefficient in {tok!r}") from exc
        return cls(terms, dim)


@lru_cache(maxsize=200_000)
def shuffle_words(u: tuple, v: tuple) -> tuple:
    """Shuffle of two words as a tuple of (word, multiplicity) pairs."""
    r, s = len(u), len(v)
    out: dict = {}
    for positions in itertools.combinations(range(r + s), r):
        w = [0] * (r + s)
        pos = set(positions)
        iu = iv = 0
        for k in range(r + s):
            if k in pos:
                w[k] = u[iu]
                iu += 1
            else:
                w[k] = v[iv]
                iv += 1
        w = tuple(w)
        out[w] = out.get(w, 0) + 1
    return tuple(out.items())


def shuffle(u: WordPoly, v: WordPoly) -> WordPoly:
    """Bilinear shuffle product."""
    dim = u._merge_dim(v)
    out: dict = {}
    for wu, cu in u.terms.items():
        for wv, cv in v.terms.items():
            for w, m in shuffle_words(wu, wv):
                out[w] = out.get(w, 0.0) + cu * cv * m
    return WordPoly(out, dim)


def shuffle_power(u: WordPoly, k: int) -> WordPoly:
    """``u`` shuffled with itself ``k`` times (empty word for k = 0)."""
    result = WordPoly.empty(u.dim)
    for _ in range(k):
        result = shuffle(result, u)
    return result


def concat(u: WordPoly, v: WordPoly) -> WordPoly:
    """Concatenation product."""
    dim = u._merge_dim(v)
    out: dict = {}
    for wu, cu in u.terms.items():
        for wv, cv in v.terms.items():
            out[wu + wv] = out.get(wu + wv, 0.0) + cu * cv
    return WordPoly(out, dim)


def half_shuffle_right(u: WordPoly, v: WordPoly) -> WordPoly:
    """Right half-shuffle ``u > v``.

    Uses u > (w.j) = (u shuffle w).j, which is the defining recursion with the
    bracketed sum collapsed by the shuffle/half-shuffle relation.
    """
    dim = u._merge_dim(v)
    if () in v.terms:
        raise DomainError("right half-shuffle is undefined with the empty word on the right")
    out: dict = {}
    for wu, cu in u.terms.items():
        for wv, cv in v.terms.items():
            head, last = wv[:-1], wv[-1]
            for w, m in shuffle_words(wu, head):
                key = w + (last,)
                out[key] = out.get(key, 0.0) + cu * cv * m
    return WordPoly(out, dim)


def _check_letters(f: WordPoly, dim: int) -> None:
    for w in f.terms:
        if any(not 1 <= i <= dim for i in w):
            raise InputError(f"word {format_word(w)} uses letters outside 1..{dim}")


def pair(f: WordPoly, A: TruncatedTensor):
    """Dual pairing sum_w f(w) <w, A> (array-valued for batched tensors)."""
    if f.max_length > A.depth:
        raise DepthError(f"word of length {f.max_length} exceeds tensor depth {A.depth}")
    _check_letters(f, A.dim)
    total = np.zeros(A.batch_shape)
    by_level: dict = {}
    for w, c in f.terms.items():
        idx, coef = by_level.setdefault(len(w), ([], []))
        idx.append(word_index(w, A.dim))
        coef.append(c)
    for k, (idx, coef) in by_level.items():
        total = total + A.levels[k][..., np.array(idx)] @ np.array(coef)
    return float(total) if total.ndim == 0 else total


def pair_many(functionals: Sequence[WordPoly], A: TruncatedTensor) -> np.ndarray:
    """Stack of pairings, last axis indexing the functionals."""
    return np.stack([np.asarray(pair(f, A)) for f in functionals], axis=-1)


def functional_tree(functionals: Sequence[WordPoly], dim: int) -> PrefixTree:
    words = set()
    for f in functionals:
        _check_letters(f, dim)
        words.update(f.terms)
    return PrefixTree(words, dim)


def pair_many_on_increments(functionals: Sequence[WordPoly], increments: np.ndarray,
                            tree: PrefixTree | None = None) -> np.ndarray:
    """Evaluate several functionals on (batched) path increments.

    Coefficients are fetched on demand from a shared prefix tree, so no dense
    signature level is ever built.
    """
    inc = np.asarray(increments, dtype=float)
    dim = inc.shape[-1]
    if tree is None:
        tree = functional_tree(functionals, dim)
    values = tree.evaluate(inc)
    batch = inc.shape[:-2]
    out = np.zeros(batch + (len(functionals),))
    for j, f in enumerate(functionals):
        acc = np.zeros(batch)
        for w, c in f.terms.items():
            acc = acc + c * tree.lookup(values, w)
        out[..., j] = acc
    return out


def pair_on_path(f: WordPoly, path: SampledPath) -> float:
    """<f, S(path)> without materializing the dense signature."""
    if not isinstance(path, SampledPath):
        path = SampledPath(*path)
    return float(pair_many_on_increments([f], path.increments())[0])
