"""Orthogonal polynomial families described by their three-term recurrence.

Every family satisfies ``p_0 = 1``, ``p_1 = A_1 t + B_1`` and
``p_n = (A_n t + B_n) p_{n-1} + C_n p_{n-2}`` for ``n >= 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom, eval_hermitenorm

from ..exceptions import DomainError


@dataclass(frozen=True)
class OrthoFamily:
    """Recurrence data, weight and norms of one orthogonal polynomial system.

    Parameters
    ----------
    kind : str
        ``"legendre"``, ``"jacobi"``, ``"chebyshev"`` or ``"hermite"``
        (shift-and-scale Hermite, centred at ``t0`` with width ``eps``).
    params : dict
        ``alpha``/``beta`` for Jacobi, ``t0``/``eps`` for Hermite.
    interval : (float, float)
        Interval ``[a, b]`` the path is reparameterised onto.
    """

    kind: str
    params: dict = field(default_factory=dict)
    interval: tuple = (-1.0, 1.0)

    @property
    def a(self) -> float:
        return float(self.interval[0])

    @property
    def b(self) -> float:
        return float(self.interval[1])

    @property
    def label(self) -> str:
        if self.kind == "jacobi":
            return f"jacobi({self.params['alpha']:g},{self.params['beta']:g})"
        if self.kind == "hermite":
            return f"hermite(eps={self.params['eps']:g})"
        return self.kind

    # recurrence ----------------------------------------------------------
    def A(self, n: int) -> float:
        if n == 0:
            return 1.0
        k = self.kind
        if k == "legendre":
            return (2 * n - 1) / n
        if k == "chebyshev":
            return 1.0 if n == 1 else 2.0
        if k == "hermite":
            return 1.0 / self.params["eps"]
        al, be = self.params["alpha"], self.params["beta"]
        if n == 1:
            return (al + be + 2) / 2
        s = 2 * n + al + be
        return (s - 1) * s / (2 * n * (n + al + be))

    def B(self, n: int) -> float:
        if n == 0:
            return 0.0
        k = self.kind
        if k in ("legendre", "chebyshev"):
            return 0.0
        if k == "hermite":
            return -self.params["t0"] / self.params["eps"]
        al, be = self.params["alpha"], self.params["beta"]
        if n == 1:
            return (al - be) / 2
        s = 2 * n + al + be
        return (s - 1) * (al * al - be * be) / (2 * n * (n + al + be) * (s - 2))

    def C(self, n: int) -> float:
        if n < 2:
            return 0.0
        k = self.kind
        if k == "legendre":
            return -(n - 1) / n
        if k == "chebyshev":
            return -1.0
        if k == "hermite":
            return -(n - 1.0)
        al, be = self.params["alpha"], self.params["beta"]
        s = 2 * n + al + be
        return -(n + al - 1) * (n + be - 1) * s / (n * (n + al + be) * (s - 2))

    def norm(self, n: int) -> float:
        """Squared norm ``(p_n, p_n)`` under the family's weight."""
        k = self.kind
        if k == "legendre":
            return 2.0 / (2 * n + 1)
        if k == "chebyshev":
            return math.pi if n == 0 else math.pi / 2
        if k == "hermite":
            return self.params["eps"] * math.sqrt(2 * math.pi) * math.factorial(n)
        al, be = self.params["alpha"], self.params["beta"]
        if n == 0:
            logv = ((al + be + 1) * math.log(2) + math.lgamma(al + 1) + math.lgamma(be + 1)
                    - math.lgamma(al + be + 2))
        else:
            logv = ((al + be + 1) * math.log(2) + math.lgamma(n + al + 1) + math.lgamma(n + be + 1)
                    - math.log(2 * n + al + be + 1) - math.lgamma(n + al + be + 1)
                    - math.lgamma(n + 1))
        return math.exp(logv)

    # evaluation ----------------------------------------------------------
    def weight(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "legendre":
            return np.ones_like(t)
        if k == "hermite":
            z = (t - self.params["t0"]) / self.params["eps"]
            return np.exp(-0.5 * z * z)
        if k == "chebyshev":
            al = be = -0.5
        else:
            al, be = self.params["alpha"], self.params["beta"]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(1.0 - t, al) * np.power(1.0 + t, be)

    def weight_is_finite(self) -> bool:
        w = self.weight(np.array([self.a, self.b]))
        return bool(np.all(np.isfinite(w)))

    def evaluate(self, N: int, t) -> np.ndarray:
        """Values ``p_0..p_N`` at ``t``; result has shape ``(N+1,) + t.shape``."""
        t = np.asarray(t, dtype=float)
        out = np.empty((N + 1,) + t.shape)
        out[0] = 1.0
        if N >= 1:
            out[1] = self.A(1) * t + self.B(1)
        for n in range(2, N + 1):
            out[n] = (self.A(n) * t + self.B(n)) * out[n - 1] + self.C(n) * out[n - 2]
        return out

    def recentred(self, t0: float, interval: tuple) -> "OrthoFamily":
        """Same Hermite width, new centre and integration window."""
        if self.kind != "hermite":
            raise DomainError("only Hermite families can be recentred")
        return OrthoFamily("hermite", {"t0": float(t0), "eps": self.params["eps"]},
                           (float(interval[0]), float(interval[1])))

    def taylor_coefficients(self, M: int) -> np.ndarray:
        """Coefficients ``w_i`` of ``sum_i w_i (t-a)^i``, the order-M Taylor
        polynomial of the weight at the left end ``a``."""
        k, a = self.kind, self.a
        if k == "legendre":
            w = np.zeros(M + 1)
            w[0] = 1.0
            return w
        if k == "hermite":
            t0, eps = self.params["t0"], self.params["eps"]
            u = (a - t0) / eps
            i = np.arange(M + 1)
            fact = np.array([math.factorial(j) for j in i], dtype=float)
            return (math.exp(-0.5 * u * u) * (-1.0) ** i * eval_hermitenorm(i, u)
                    / (eps ** i * fact))
        if k == "chebyshev":
            raise DomainError("Chebyshev weight is singular at the interval end")
        al, be = self.params["alpha"], self.params["beta"]
        if a != -1.0 or self.b != 1.0:
            raise DomainError("Jacobi Taylor weights are implemented on [-1, 1]")
        if be != int(be) or be < 0:
            raise DomainError("Jacobi weight is not analytic at t=-1 unless beta is a nonnegative integer")
        be = int(be)
        # (1-t)^al (1+t)^be = 2^al (1 - s/2)^al s^be with s = t + 1
        w = np.zeros(M + 1)
        for j in range(0, M + 1 - be):
            w[be + j] = 2.0**al * binom(al, j) * (-0.5) ** j
        return w


def make_family(kind: str, interval: tuple | None = None, **params) -> OrthoFamily:
    """Build and validate an :class:`OrthoFamily`.

    Examples
    --------
    >>> make_family("jacobi", alpha=0.5, beta=0.0).label
    'jacobi(0.5,0)'
    """
    kind = kind.lower().replace("-", "_")
    if kind in ("hermite", "hermite_shift_scale"):
        eps = float(params.get("eps", 0.05))
        if not eps > 0:
            raise DomainError("Hermite width eps must be positive")
        t0 = float(params.get("t0", 0.0))
        return OrthoFamily("hermite", {"t0": t0, "eps": eps},
                           tuple(interval) if interval else (-1.0, 1.0))
    if kind == "jacobi":
        al, be = float(params.get("alpha", 0.0)), float(params.get("beta", 0.0))
        if not (al > -1 and be > -1):
            raise DomainError("Jacobi parameters must satisfy alpha, beta > -1")
        if al == 0.0 and be == 0.0:
            kind = "legendre"
        else:
            return OrthoFamily("jacobi", {"alpha": al, "beta": be}, (-1.0, 1.0))
    if kind in ("legendre", "chebyshev"):
        if interval is not None and tuple(interval) != (-1.0, 1.0):
            raise DomainError(f"{kind} polynomials are defined on [-1, 1]")
        return OrthoFamily(kind, {}, (-1.0, 1.0))
    raise DomainError(f"unknown polynomial family {kind!r}")
