"""Lyndon basis of the free Lie algebra and log-signature coordinates."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .exceptions import InputError, MemoryBudgetError, ShapeError
from .tensor_algebra import (
    DEFAULT_BUDGET,
    SampledPath,
    TruncatedTensor,
    signature_from_increments,
    tensor_log,
    word_index,
)
from .words import WordPoly, canonical_key, concat, format_word


def mobius(m: int) -> int:
    if m < 1:
        raise ValueError("mobius is defined for positive integers")
    result, p = 1, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def witt_dim(d: int, k: int) -> int:
    """Number of Lyndon words of length exactly ``k`` over ``d`` letters."""
    return sum(mobius(k // i) * d**i for i in range(1, k + 1) if k % i == 0) // k


def beta_dim(d: int, n: int) -> int:
    """Dimension of the free step-n nilpotent Lie algebra over R^d (Witt formula summed over levels)."""
    if d < 1 or n < 1:
        raise InputError("beta_dim needs d >= 1 and n >= 1")
    return sum(witt_dim(d, k) for k in range(1, n + 1))


def is_lyndon(word) -> bool:
    """Strictly smaller than each of its proper rotations."""
    w = tuple(word)
    if not w:
        return False
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def lyndon_words(d: int, n: int) -> list[tuple]:
    """Lyndon words over {1..d} of length <= n, ordered by (length, lexicographic).

    Generated with Duval's algorithm.
    """
    if d < 1 or n < 1:
        raise InputError("lyndon_words needs d >= 1 and n >= 1")
    out = []
    w = [0]
    while w:
        out.append(tuple(i + 1 for i in w))
        m = len(w)
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == d - 1:
            w.pop()
        if w:
            w[-1] += 1
    out.sort(key=canonical_key)
    return out


def standard_factorization(word: tuple) -> tuple[tuple, tuple]:
    """Split a Lyndon word as u.v with v its longest proper Lyndon suffix."""
    for i in range(1, len(word)):
        if is_lyndon(word[i:]):
            return word[:i], word[i:]
    raise InputError(f"{format_word(word)} has no standard factorization")


@lru_cache(maxsize=None)
def bracket_expansion(word: tuple) -> WordPoly:
    """Tensor expansion of the standard bracketing of a Lyndon word."""
    if len(word) == 1:
        return WordPoly({word: 1.0})
    u, v = standard_factorization(word)
    pu, pv = bracket_expansion(u), bracket_expansion(v)
    return concat(pu, pv) - concat(pv, pu)


class LyndonBasis:
    """Lyndon words of L^n(R^d) with their bracket expansions.

    Build through :func:`lyndon_basis` so instances are shared per (d, n).
    """

    def __init__(self, d: int, n: int, budget: int = DEFAULT_BUDGET):
        # dense expansion matrices hold d^k * beta_k floats per level
        size = sum(d**k * witt_dim(d, k) for k in range(1, n + 1))
        if size > budget:
            raise MemoryBudgetError(
                f"the depth-{n} Lyndon basis over R^{d} needs {size} expansion coefficients "
                f"(budget {budget})")
        self.dim = d
        self.depth = n
        self.words = tuple(lyndon_words(d, n))
        self.expansions = tuple(bracket_expansion(w) for w in self.words)
        self.level_slices = []
        self._expand = [None]
        self._lu = [None]
        self._rows = [None]
        start = 0
        for k in range(1, n + 1):
            ws = [w for w in self.words if len(w) == k]
            stop = start + len(ws)
            self.level_slices.append(slice(start, stop))
            E = np.zeros((d**k, len(ws)))
            for j, w in enumerate(ws):
                for term, c in self.expansions[start + j].terms.items():
                    E[word_index(term, d), j] = c
            rows = np.array([word_index(w, d) for w in ws], dtype=np.intp)
            self._expand.append(E)
            self._rows.append(rows)
            self._lu.append(lu_factor(E[rows]))
            start = stop
        self.fingerprint = hashlib.sha256(
            f"{d}:{n}:".encode() + ",".join(format_word(w) for w in self.words).encode()
        ).hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.words)

    @property
    def names(self) -> list[str]:
        return [format_word(w) for w in self.words]

    def expansion_matrix(self, k: int) -> np.ndarray:
        """Dense (d^k, #Lyndon words of length k) expansion block."""
        return self._expand[k]

    def project(self, L: TruncatedTensor, check: bool = False) -> np.ndarray:
        """Lyndon coordinates of a Lie element (batched)."""
        if L.dim != self.dim or L.depth != self.depth:
            raise ShapeError(f"tensor is (d={L.dim}, n={L.depth}), basis is (d={self.dim}, n={self.depth})")
        batch = L.batch_shape
        out = np.zeros(batch + (len(self),))
        for k in range(1, self.depth + 1):
            block = L.levels[k].reshape(-1, self.dim**k)
            coords = lu_solve(self._lu[k], block[:, self._rows[k]].T).T
            if check:
                resid = np.abs(coords @ self._expand[k].T - block).max(initial=0.0)
                scale = max(1.0, np.abs(block).max(initial=0.0))
                if resid > 1e-8 * scale:
                    raise ShapeError(f"level {k} is not a Lie element (residual {resid:.2e})")
            out[..., self.level_slices[k - 1]] = coords.reshape(batch + (-1,))
        return out

    def expand(self, coords: np.ndarray) -> TruncatedTensor:
        """Lie element sum_j coords_j P_j (batched over leading axes)."""
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1:] != (len(self),):
            raise ShapeError(f"expected {len(self)} coordinates, got {coords.shape[-1:]}")
        batch = coords.shape[:-1]
        levels = [np.zeros(batch + (1,))]
        for k in range(1, self.depth + 1):
            levels.append(coords[..., self.level_slices[k - 1]] @ self._expand[k].T)
        return TruncatedTensor(self.dim, self.depth, levels)


@lru_cache(maxsize=64)
def lyndon_basis(d: int, n: int) -> LyndonBasis:
    return LyndonBasis(d, n)


@dataclass(frozen=True)
class LogSignature:
    """Log-signature coordinates in the Lyndon basis (possibly batched)."""

    dim: int
    depth: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 0 or coords.shape[-1] != beta_dim(self.dim, self.depth):
            raise ShapeError(
                f"log-signature over R^{self.dim} at depth {self.depth} needs "
                f"{beta_dim(self.dim, self.depth)} coordinates"
            )
        object.__setattr__(self, "coords", coords)

    @property
    def basis(self) -> LyndonBasis:
        return lyndon_basis(self.dim, self.depth)

    def __add__(self, other: "LogSignature") -> "LogSignature":
        if (other.dim, other.depth) != (self.dim, self.depth):
            raise ShapeError("log-signatures live in different Lie algebras")
        return LogSignature(self.dim, self.depth, self.coords + other.coords)


def log_signature_from_increments(increments: np.ndarray, n: int,
                                  budget: int = DEFAULT_BUDGET) -> LogSignature:
    inc = np.asarray(increments, dtype=float)
    S = signature_from_increments(inc, n, budget)
    return LogSignature(S.dim, n, lyndon_basis(S.dim, n).project(tensor_log(S)))


def log_signature(path: SampledPath, n: int, budget: int = DEFAULT_BUDGET) -> LogSignature:
    """Step-n log-signature of a sampled path in Lyndon coordinates."""
    if not isinstance(path, SampledPath):
        path = SampledPath(*path)
    return log_signature_from_increments(path.increments(), n, budget)


def lyndon_expand(ls: LogSignature) -> TruncatedTensor:
    """Lie element (level-0 coefficient zero) carrying the given coordinates."""
    return ls.basis.expand(ls.coords)
