"""Truncated tensor algebra over R^d and signatures of piecewise-linear paths.

Coefficients of level ``k`` are stored as a flat block of ``d**k`` values in
row-major order, the first letter of a word being the most significant digit.
Every block may carry leading batch axes, so one :class:`TruncatedTensor` can
hold the signatures of many paths at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DomainError, InputError, MemoryBudgetError, ShapeError

DEFAULT_BUDGET = 2**26

Word = tuple  # tuple of 1-based letters


def tensor_size(dim: int, depth: int) -> int:
    """Number of coefficients in the truncated tensor algebra T^depth(R^dim)."""
    return sum(dim**k for k in range(depth + 1))


def word_index(word: Sequence[int], dim: int) -> int:
    """Flat position of ``word`` inside its level block."""
    idx = 0
    for letter in word:
        idx = idx * dim + (letter - 1)
    return idx


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # batched outer product, flattened row-major
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


class TruncatedTensor:
    """An element of T^n(R^d), optionally batched.

    Parameters
    ----------
    dim, depth : int
        Alphabet size ``d`` and truncation level ``n``.
    levels : sequence of array_like
        ``depth + 1`` blocks; block ``k`` has trailing size ``dim**k`` and all
        blocks share the same leading batch shape.
    """

    __slots__ = ("dim", "depth", "levels")

    def __init__(self, dim: int, depth: int, levels: Sequence):
        if dim < 1 or depth < 0:
            raise ShapeError(f"invalid dim/depth ({dim}, {depth})")
        if len(levels) != depth + 1:
            raise ShapeError(f"expected {depth + 1} levels, got {len(levels)}")
        blocks = []
        batch = None
        for k, lev in enumerate(levels):
            arr = np.array(lev, dtype=float)
            if k == 0 and (arr.ndim == 0 or arr.shape[-1] != 1):
                arr = arr[..., None]
            if arr.shape[-1] != dim**k:
                raise ShapeError(f"level {k} must have {dim**k} entries, got {arr.shape[-1]}")
            if batch is None:
                batch = arr.shape[:-1]
            elif arr.shape[:-1] != batch:
                raise ShapeError("levels disagree on batch shape")
            arr.setflags(write=False)
            blocks.append(arr)
        self.dim = dim
        self.depth = depth
        self.levels = tuple(blocks)

    # construction helpers
    @classmethod
    def zeros(cls, dim: int, depth: int, batch_shape: tuple = ()) -> "TruncatedTensor":
        return cls(dim, depth, [np.zeros(batch_shape + (dim**k,)) for k in range(depth + 1)])

    @classmethod
    def unit(cls, dim: int, depth: int, batch_shape: tuple = ()) -> "TruncatedTensor":
        levels = [np.zeros(batch_shape + (dim**k,)) for k in range(depth + 1)]
        levels[0][...] = 1.0
        return cls(dim, depth, levels)

    @classmethod
    def from_vector(cls, dim: int, depth: int, vector: Sequence[float]) -> "TruncatedTensor":
        """Level-1 element carrying ``vector``; all other levels zero."""
        t = cls.zeros(dim, depth)
        levels = [lev.copy() for lev in t.levels]
        levels[1][...] = np.asarray(vector, dtype=float)
        return cls(dim, depth, levels)

    @property
    def batch_shape(self) -> tuple:
        return self.levels[0].shape[:-1]

    @property
    def scalar(self):
        """Level-0 coefficient."""
        s = self.levels[0][..., 0]
        return float(s) if s.ndim == 0 else s

    def level(self, k: int) -> np.ndarray:
        """Level ``k`` reshaped to a ``(d,)*k`` tensor (after batch axes)."""
        return self.levels[k].reshape(self.batch_shape + (self.dim,) * k)

    def __getitem__(self, word) -> float | np.ndarray:
        word = tuple(word)
        if len(word) > self.depth:
            raise DomainError(f"word {word} longer than depth {self.depth}")
        if any(not 1 <= i <= self.dim for i in word):
            raise InputError(f"letter out of range in {word} for dim {self.dim}")
        v = self.levels[len(word)][..., word_index(word, self.dim)]
        return float(v) if np.ndim(v) == 0 else v

    def to_vector(self) -> np.ndarray:
        return np.concatenate(self.levels, axis=-1)

    def _check_compatible(self, other: "TruncatedTensor") -> None:
        if not isinstance(other, TruncatedTensor):
            raise TypeError(f"expected TruncatedTensor, got {type(other).__name__}")
        if other.dim != self.dim or other.depth != self.depth:
            raise ShapeError(
                f"incompatible tensors: (dim={self.dim}, depth={self.depth}) vs "
                f"(dim={other.dim}, depth={other.depth})"
            )

    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check_compatible(other)
        return TruncatedTensor(self.dim, self.depth, [a + b for a, b in zip(self.levels, other.levels)])

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check_compatible(other)
        return TruncatedTensor(self.dim, self.depth, [a - b for a, b in zip(self.levels, other.levels)])

    def __neg__(self) -> "TruncatedTensor":
        return self * -1.0

    def __mul__(self, scale) -> "TruncatedTensor":
        scale = np.asarray(scale, dtype=float)
        return TruncatedTensor(self.dim, self.depth, [lev * scale[..., None] for lev in self.levels])

    __rmul__ = __mul__

    def allclose(self, other: "TruncatedTensor", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        return all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.levels, other.levels))

    def __repr__(self) -> str:
        b = f", batch={self.batch_shape}" if self.batch_shape else ""
        return f"TruncatedTensor(dim={self.dim}, depth={self.depth}{b})"


def tensor_product(A: TruncatedTensor, B: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product: level k is sum_i A_i (x) B_{k-i}."""
    A._check_compatible(B)
    out = []
    for k in range(A.depth + 1):
        acc = A.levels[0] * B.levels[k]
        for i in range(1, k + 1):
            acc = acc + _outer(A.levels[i], B.levels[k - i])
        out.append(acc)
    return TruncatedTensor(A.dim, A.depth, out)


def _is_level_one_only(L: TruncatedTensor) -> bool:
    return all(not np.any(lev) for lev in L.levels[2:])


def _exp_of_vector(v: np.ndarray, depth: int) -> list[np.ndarray]:
    batch = v.shape[:-1]
    levels = [np.ones(batch + (1,))]
    cur = levels[0]
    for k in range(1, depth + 1):
        cur = _outer(cur, v) / k
        levels.append(cur)
    return levels


def tensor_exp(L: TruncatedTensor) -> TruncatedTensor:
    """Tensor exponential of a Lie element (level-0 coefficient zero)."""
    if np.any(np.abs(L.levels[0]) > 1e-12):
        raise DomainError("tensor_exp requires a zero level-0 coefficient")
    if _is_level_one_only(L):
        return TruncatedTensor(L.dim, L.depth, _exp_of_vector(L.levels[1], L.depth))
    L = TruncatedTensor(L.dim, L.depth, [np.zeros_like(L.levels[0])] + list(L.levels[1:]))
    unit = TruncatedTensor.unit(L.dim, L.depth, L.batch_shape)
    # Horner: 1 + L(1 + L/2(1 + ... (1 + L/n)))
    result = unit
    for k in range(L.depth, 0, -1):
        result = unit + tensor_product(L, result) * (1.0 / k)
    return result


def tensor_log(A: TruncatedTensor) -> TruncatedTensor:
    """Tensor logarithm of a grouplike-type element (level-0 coefficient one)."""
    if np.any(np.abs(A.levels[0] - 1.0) > 1e-12):
        raise DomainError("tensor_log requires a level-0 coefficient equal to 1")
    X = TruncatedTensor(A.dim, A.depth, [np.zeros_like(A.levels[0])] + list(A.levels[1:]))
    unit = TruncatedTensor.unit(A.dim, A.depth, A.batch_shape)
    # Horner on sum_k (-1)^(k-1)/k X^k
    R = unit * ((-1.0) ** (A.depth - 1) / A.depth)
    for k in range(A.depth - 1, 0, -1):
        R = unit * ((-1.0) ** (k - 1) / k) + tensor_product(X, R)
    return tensor_product(X, R)


@dataclass(frozen=True)
class SampledPath:
    """A time series read as the piecewise-linear path through its samples."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2:
            raise InputError("times must be 1-d and values 2-d (samples x channels)")
        if len(times) != len(values):
            raise InputError(f"{len(times)} time stamps but {len(values)} samples")
        if len(times) < 2:
            raise InputError("a path needs at least 2 samples")
        if values.shape[1] < 1:
            raise InputError("a path needs at least one channel")
        if not np.all(np.diff(times) > 0):
            raise InputError("time stamps must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise InputError("path contains non-finite entries")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values, start: float = 0.0, stop: float = 1.0) -> "SampledPath":
        """Path on a uniform time grid over ``[start, stop]``."""
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(start, stop, len(values)), values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def _check_budget(dim: int, depth: int, budget: int) -> None:
    size = tensor_size(dim, depth)
    if size > budget:
        raise MemoryBudgetError(
            f"a dense depth-{depth} signature over R^{dim} has {size} coefficients "
            f"(budget {budget}); use word_coefficient/pair_on_path for functionals"
        )


def signature_from_increments(increments: np.ndarray, depth: int,
                              budget: int = DEFAULT_BUDGET) -> TruncatedTensor:
    """Signature of piecewise-linear paths given their increments.

    ``increments`` has shape ``(..., n_segments, d)``; leading axes are batch
    axes. The result is the product of the segment exponentials.
    """
    inc = np.asarray(increments, dtype=float)
    if inc.ndim < 2:
        raise InputError("increments must have shape (..., n_segments, d)")
    if depth < 1:
        raise DomainError("signature depth must be >= 1")
    dim = inc.shape[-1]
    _check_budget(dim, depth, budget)
    batch = inc.shape[:-2]
    S = [np.ones(batch + (1,))] + [np.zeros(batch + (dim**k,)) for k in range(1, depth + 1)]
    for j in range(inc.shape[-2]):
        delta = inc[..., j, :]
        # S <- S (x) exp(delta), Horner per target level, highest level first
        for k in range(depth, 0, -1):
            acc = S[0]
            for i in range(1, k + 1):
                acc = _outer(acc, delta) * (1.0 / (k - i + 1)) + S[i]
            S[k] = acc
    return TruncatedTensor(dim, depth, S)


def signature(path: SampledPath, depth: int, budget: int = DEFAULT_BUDGET) -> TruncatedTensor:
    """Depth-``depth`` signature of a sampled path (piecewise-linear interpolant)."""
    if not isinstance(path, SampledPath):
        path = SampledPath(*path)
    return signature_from_increments(path.increments(), depth, budget)


class PrefixTree:
    """Prefix closure of a set of words, used to evaluate selected signature
    coefficients without materializing whole levels.

    Node values are the coefficients <w, S> for every prefix ``w``; one pass
    over the path segments updates them all.
    """

    def __init__(self, words: Iterable[Sequence[int]], dim: int):
        words = [tuple(w) for w in words]
        for w in words:
            if any(not 1 <= i <= dim for i in w):
                raise InputError(f"letter out of range in word {w} for dim {dim}")
        self.dim = dim
        self.depth = max((len(w) for w in words), default=0)
        prefixes = {()}
        for w in words:
            for j in range(1, len(w) + 1):
                prefixes.add(w[:j])
        by_level = [[] for _ in range(self.depth + 1)]
        for p in prefixes:
            by_level[len(p)].append(p)
        self.nodes = [sorted(level) for level in by_level]
        self.position = {p: (len(p), i) for level in self.nodes for i, p in enumerate(level)}
        self.parent = [None] + [
            np.array([self.position[p[:-1]][1] for p in level], dtype=np.intp)
            for level in self.nodes[1:]
        ]
        self.letter = [None] + [
            np.array([p[-1] - 1 for p in level], dtype=np.intp) for level in self.nodes[1:]
        ]

    @property
    def size(self) -> int:
        return sum(len(level) for level in self.nodes)

    def evaluate(self, increments: np.ndarray, stream: bool = False) -> list[np.ndarray]:
        """Coefficients of every node, level by level.

        With ``stream=True`` each level array gains an axis (before the node
        axis) holding the values after every sample, starting at the first.
        """
        inc = np.asarray(increments, dtype=float)
        if inc.shape[-1] != self.dim:
            raise ShapeError(f"path has {inc.shape[-1]} channels, words use {self.dim}")
        batch = inc.shape[:-2]
        c = [np.ones(batch + (1,))] + [np.zeros(batch + (len(lv),)) for lv in self.nodes[1:]]
        history = [[lv.copy()] for lv in c] if stream else None
        for j in range(inc.shape[-2]):
            delta = inc[..., j, :]
            new = [c[0]]
            for k in range(1, self.depth + 1):
                acc = c[0]
                for i in range(1, k + 1):
                    acc = acc[..., self.parent[i]] * delta[..., self.letter[i]] * (1.0 / (k - i + 1)) + c[i]
                new.append(acc)
            c = new
            if stream:
                for k in range(self.depth + 1):
                    history[k].append(c[k])
        if stream:
            return [np.stack(h, axis=-2) for h in history]
        return c

    def lookup(self, values: list[np.ndarray], word: Sequence[int]) -> np.ndarray:
        k, i = self.position[tuple(word)]
        return values[k][..., i]


def word_coefficient(path: SampledPath, word: Sequence[int]) -> float:
    """<word, S(path)> computed by dynamic programming over word prefixes."""
    if not isinstance(path, SampledPath):
        path = SampledPath(*path)
    word = tuple(int(i) for i in word)
    if any(not 1 <= i <= path.dim for i in word):
        raise InputError(f"letter out of range in {word} for a {path.dim}-dim path")
    if not word:
        return 1.0
    tree = PrefixTree([word], path.dim)
    return float(tree.lookup(tree.evaluate(path.increments()), word))


def factorial_bound(total_variation: float, k: int) -> float:
    """Upper bound V^k / k! on level-k coefficients of a path of 1-variation V."""
    return total_variation**k / math.factorial(k)
