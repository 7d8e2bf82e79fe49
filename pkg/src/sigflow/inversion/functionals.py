"""Linear functionals on signatures that return basis coefficients.

Fourier functionals act on the 4-channel augmentation
``(t, sin t, cos t - 1, x)`` over ``[0, 2pi]``; polynomial functionals act on
``(t, w(t) x(t))`` (or ``(t, x(t))`` for the Taylor-weight variant).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..exceptions import DepthError, InputError
from ..tensor_algebra import PrefixTree, TruncatedTensor
from ..words import WordPoly, half_shuffle_right, pair_many, shuffle, shuffle_power
from .families import OrthoFamily

# cos(j pi / 2) and sin(j pi / 2) without rounding noise
_COS_QUARTER = (1.0, 0.0, -1.0, 0.0)
_SIN_QUARTER = (0.0, 1.0, 0.0, -1.0)


@dataclass
class FunctionalSet:
    """Functionals ``f_0..f_K`` together with the signature depth they need.

    Evaluation goes through a prefix tree over every word used, built lazily
    and shared by all functionals of the set.
    """

    kind: str
    order: int
    functionals: list
    names: list
    depth: int
    dim: int
    family: OrthoFamily | None = None
    _tree: PrefixTree | None = field(default=None, repr=False)
    _weights: list | None = field(default=None, repr=False)

    def __post_init__(self):
        longest = max((f.max_length for f in self.functionals), default=0)
        if longest > self.depth:
            raise DepthError(f"functional word of length {longest} exceeds declared depth {self.depth}")

    def __len__(self) -> int:
        return len(self.functionals)

    @property
    def tree(self) -> PrefixTree:
        if self._tree is None:
            words = set()
            for f in self.functionals:
                words.update(f.terms)
            self._tree = PrefixTree(words, self.dim)
            # per level: (node index array, coefficient matrix nodes x functionals)
            weights = []
            for k, level in enumerate(self._tree.nodes):
                W = np.zeros((len(level), len(self.functionals)))
                for j, f in enumerate(self.functionals):
                    for w, c in f.terms.items():
                        if len(w) == k:
                            W[self._tree.position[w][1], j] = c
                weights.append(W)
            self._weights = weights
        return self._tree

    def evaluate(self, increments: np.ndarray) -> np.ndarray:
        """Functional values on paths given by increments ``(..., segments, dim)``."""
        tree = self.tree
        values = tree.evaluate(increments)
        out = 0.0
        for k, W in enumerate(self._weights):
            if W.any():
                out = out + values[k] @ W
        return np.asarray(out)

    def pair(self, S: TruncatedTensor) -> np.ndarray:
        """Functional values on a (batched) dense signature."""
        if S.depth < self.depth:
            raise DepthError(f"signature depth {S.depth} < required depth {self.depth}")
        return pair_many(self.functionals, S)


def _e(*letters) -> WordPoly:
    return WordPoly({tuple(letters): 1.0})


@lru_cache(maxsize=None)
def _fourier_kernel(j: int, q: int) -> WordPoly:
    # (e4 sh e2^{sh j} sh e3^{sh q}) > e1
    inner = shuffle(shuffle(_e(4), shuffle_power(_e(2), j)), shuffle_power(_e(3), q))
    return half_shuffle_right(inner, _e(1))


def fourier_functionals(N: int) -> FunctionalSet:
    """Functionals returning ``a_0, a_1, b_1, ..., a_N, b_N``.

    ``a_m`` and ``b_m`` come from the multiple-angle expansion of ``cos(mt)``
    and ``sin(mt)`` in powers of ``sin t`` and ``cos t - 1``.
    """
    if N < 0:
        raise InputError("Fourier order must be >= 0")
    funcs = [_fourier_kernel(0, 0) * (1.0 / (2 * math.pi))]
    names = ["a0"]
    for m in range(1, N + 1):
        a_terms: dict = {}
        b_terms: dict = {}
        for k in range(m + 1):
            j = m - k
            cf, sf = _COS_QUARTER[j % 4], _SIN_QUARTER[j % 4]
            for q in range(k + 1):
                w = math.comb(m, k) * math.comb(k, q) / math.pi
                for word, c in _fourier_kernel(j, q).terms.items():
                    if cf:
                        a_terms[word] = a_terms.get(word, 0.0) + w * cf * c
                    if sf:
                        b_terms[word] = b_terms.get(word, 0.0) + w * sf * c
        funcs += [WordPoly(a_terms), WordPoly(b_terms)]
        names += [f"a{m}", f"b{m}"]
    return FunctionalSet("fourier", N, funcs, names, depth=N + 2, dim=4)


def _recurrence(family: OrthoFamily, N: int, ell0: WordPoly) -> list[WordPoly]:
    a = family.a
    e1 = _e(1)
    ells = [ell0]
    for n in range(1, N + 1):
        r = family.norm(n - 1) / family.norm(n)
        nxt = half_shuffle_right(e1, ells[n - 1]) * (family.A(n) * r)
        nxt = nxt + ells[n - 1] * ((family.A(n) * a + family.B(n)) * r)
        if n >= 2:
            nxt = nxt + ells[n - 2] * (family.C(n) * family.norm(n - 2) / family.norm(n))
        ells.append(nxt)
    return ells


def ortho_functionals(family: OrthoFamily, N: int) -> FunctionalSet:
    """Functionals ``l_0..l_N`` over the augmentation ``(t, w(t) x(t))``."""
    if N < 0:
        raise InputError("polynomial order must be >= 0")
    ell0 = _e(2, 1) * (family.A(0) / family.norm(0))
    ells = _recurrence(family, N, ell0)
    return FunctionalSet("ortho", N, ells, [f"alpha{n}" for n in range(N + 1)],
                         depth=N + 2, dim=2, family=family)


def taylor_weight_functionals(family: OrthoFamily, N: int, M: int) -> FunctionalSet:
    """Functionals over ``(t, x(t))`` with the weight replaced by its order-M
    Taylor polynomial at ``a``.

    Exact when the weight is a polynomial of degree <= M. Convergence of the
    Taylor series on ``[a, b]`` is the caller's responsibility.
    """
    if N < 0 or M < 0:
        raise InputError("orders must be >= 0")
    omega = family.taylor_coefficients(M)
    e1, e2 = _e(1), _e(2)
    ell0 = WordPoly()
    for i in range(M + 1):
        if omega[i] != 0.0:
            c_i = half_shuffle_right(shuffle(e2, shuffle_power(e1, i)), e1)
            ell0 = ell0 + c_i * float(omega[i])
    ell0 = ell0 * (family.A(0) / family.norm(0))
    ells = _recurrence(family, N, ell0)
    return FunctionalSet("taylor", N, ells, [f"alpha{n}" for n in range(N + 1)],
                         depth=N + M + 2, dim=2, family=family)
