"""Path augmentation, signature inversion and series reconstruction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from ..exceptions import DomainError, InputError
from ..tensor_algebra import SampledPath
from .families import OrthoFamily
from .functionals import FunctionalSet, fourier_functionals, ortho_functionals

TWO_PI = 2.0 * math.pi
HERMITE_WINDOW = 6.0  # half-width of the truncated Hermite weight, in units of eps


@dataclass(frozen=True)
class Augmentation:
    """Bookkeeping that maps original time stamps onto the basis interval.

    ``src_start`` and ``src_stop`` are the (possibly extended) original-time
    span sent affinely onto ``[a, b]``.
    """

    basis: str
    src_start: float
    src_stop: float
    a: float
    b: float
    mirror: bool = False
    prepended: bool = False

    def to_basis(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return self.a + (tau - self.src_start) * (self.b - self.a) / (self.src_stop - self.src_start)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis, "src_start": self.src_start, "src_stop": self.src_stop,
            "a": self.a, "b": self.b, "mirror": self.mirror, "prepended": self.prepended,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Augmentation":
        return cls(d["basis"], float(d["src_start"]), float(d["src_stop"]), float(d["a"]),
                   float(d["b"]), bool(d["mirror"]), bool(d["prepended"]))


def _as_batch(path_or_values, times=None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Normalise input to (times (L,), values (..., L)); flag single paths."""
    if isinstance(path_or_values, SampledPath):
        if path_or_values.dim != 1:
            raise InputError("inversion works channel by channel; pass a univariate path")
        return path_or_values.times, path_or_values.values[:, 0], True
    values = np.asarray(path_or_values, dtype=float)
    if values.ndim == 0 or values.shape[-1] == 0:
        raise InputError("empty path")
    L = values.shape[-1]
    times = np.linspace(0.0, 1.0, L) if times is None else np.asarray(times, dtype=float)
    SampledPath(times, np.zeros(L))  # validates the grid
    if not np.all(np.isfinite(values)):
        raise InputError("path values must be finite")
    return times, values, values.ndim == 1


def _needs_prepend(values: np.ndarray, prepend_zero) -> bool:
    if prepend_zero == "auto":
        return bool(np.any(values[..., 0] != 0.0))
    return bool(prepend_zero)


def _extended_grid(times: np.ndarray, mirror: bool, prepend: bool) -> np.ndarray:
    h = (times[-1] - times[0]) / (len(times) - 1)
    tau = times
    if mirror:
        tau = np.concatenate([times, 2 * times[-1] + h - times[::-1]])
    if prepend:
        tau = np.concatenate([[times[0] - h], tau])
    return tau


def _extended_values(values: np.ndarray, mirror: bool, prepend: bool) -> np.ndarray:
    if mirror:
        values = np.concatenate([values, values[..., ::-1]], axis=-1)
    if prepend:
        values = np.concatenate([np.zeros(values.shape[:-1] + (1,)), values], axis=-1)
    return values


def _prepare(times, values, basis, a, b, mirror, prepend_zero):
    prepend = _needs_prepend(values, prepend_zero)
    tau = _extended_grid(times, mirror, prepend)
    aug = Augmentation(basis, float(tau[0]), float(tau[-1]), float(a), float(b), bool(mirror), prepend)
    return aug.to_basis(tau), _extended_values(values, mirror, prepend), aug


def fourier_channels(t: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Stack ``(t, sin t, cos t - 1, x)`` along a trailing axis."""
    batch = values.shape[:-1]
    fixed = np.stack([t, np.sin(t), np.cos(t) - 1.0], axis=-1)
    fixed = np.broadcast_to(fixed, batch + fixed.shape)
    return np.concatenate([fixed, values[..., None]], axis=-1)


def augment_fourier(path: SampledPath, mirror: bool = False, prepend_zero="auto"
                    ) -> tuple[SampledPath, Augmentation]:
    """Four-channel augmentation used by the Fourier functionals.

    The value channel optionally gets mirror-concatenated, then (when it does
    not already start at zero) a zero sample is prepended one mean step
    before the first sample, and time is mapped affinely onto ``[0, 2pi]``.
    """
    times, values, _ = _as_batch(path)
    t, vals, aug = _prepare(times, values, "fourier", 0.0, TWO_PI, mirror, prepend_zero)
    return SampledPath(t, fourier_channels(t, vals)), aug


def augment_ortho(path: SampledPath, family: OrthoFamily, prepend_zero="auto", weighted: bool = True
                  ) -> tuple[SampledPath, Augmentation]:
    """Two-channel augmentation ``(t, w(t) x(t))`` on the family interval."""
    times, values, _ = _as_batch(path)
    if weighted and not family.weight_is_finite():
        raise DomainError(f"{family.label} weight is not finite on [{family.a}, {family.b}]")
    t, vals, aug = _prepare(times, values, "ortho", family.a, family.b, False, prepend_zero)
    w = family.weight(t) if weighted else np.ones_like(t)
    return SampledPath(t, np.stack([t, w * vals], axis=-1)), aug


@dataclass
class FourierCoeffs:
    """Fourier coefficients ``a_0``, ``a_1..a_N``, ``b_1..b_N`` (batched)."""

    a0: np.ndarray
    a: np.ndarray
    b: np.ndarray
    augmentation: Augmentation | None = None

    def __post_init__(self):
        self.a0 = np.asarray(self.a0, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape:
            raise InputError("a and b must have the same length")

    @property
    def order(self) -> int:
        return self.a.shape[-1]

    def vector(self) -> np.ndarray:
        """``[a0, a1, b1, a2, b2, ...]`` along the last axis."""
        ab = np.stack([self.a, self.b], axis=-1).reshape(self.a.shape[:-1] + (-1,))
        return np.concatenate([self.a0[..., None], ab], axis=-1)

    @classmethod
    def from_vector(cls, vec, augmentation=None) -> "FourierCoeffs":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[..., 0], vec[..., 1::2], vec[..., 2::2], augmentation)

    def names(self) -> list[str]:
        return ["a0"] + [f"{c}{m}" for m in range(1, self.order + 1) for c in "ab"]

    def series(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        m = np.arange(1, self.order + 1)
        ang = t[:, None] * m  # (G, N)
        return (self.a0[..., None] + np.einsum("gn,...n->...g", np.cos(ang), self.a)
                + np.einsum("gn,...n->...g", np.sin(ang), self.b))


@dataclass
class PolyCoeffs:
    """Orthogonal-polynomial coefficients ``alpha_0..alpha_N`` (batched).

    For the pointwise Hermite expansion, ``centers`` holds the basis-time
    centres and ``alpha`` has shape ``(..., n_centers, N + 1)``.
    """

    family: OrthoFamily
    alpha: np.ndarray
    augmentation: Augmentation | None = None
    centers: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if not np.all(np.isfinite(self.alpha)):
            raise InputError("polynomial coefficients must be finite")

    @property
    def order(self) -> int:
        return self.alpha.shape[-1] - 1

    def vector(self) -> np.ndarray:
        return self.alpha if self.centers is None else self.alpha.reshape(self.alpha.shape[:-2] + (-1,))

    def names(self) -> list[str]:
        base = [f"alpha{n}" for n in range(self.order + 1)]
        if self.centers is None:
            return base
        return [f"c{i}_{nm}" for i in range(len(self.centers)) for nm in base]

    def series(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.centers is None:
            P = self.family.evaluate(self.order, t)  # (N+1, G)
            return np.einsum("ng,...n->...g", P, self.alpha)
        # local expansion of the nearest centre
        idx = np.abs(t[:, None] - self.centers[None, :]).argmin(axis=1)
        eps = self.family.params["eps"]
        z = (t - self.centers[idx]) / eps
        P = OrthoFamily("hermite", {"t0": 0.0, "eps": 1.0}).evaluate(self.order, z)  # (N+1, G)
        return np.einsum("ng,...gn->...g", P, self.alpha[..., idx, :])


def invert_fourier(path, N: int, mirror: bool = False, prepend_zero="auto", times=None,
                   functionals: FunctionalSet | None = None) -> FourierCoeffs:
    """Fourier coefficients of a univariate path (or a batch on one grid).

    Parameters
    ----------
    path : SampledPath or array_like
        A univariate path, or values of shape ``(..., L)`` sampled on ``times``
        (uniform on ``[0, 1]`` when omitted).
    N : int
        Highest harmonic; the functionals need signature depth ``N + 2``.
    """
    times, values, _ = _as_batch(path, times)
    fset = functionals if functionals is not None else fourier_functionals(N)
    t, vals, aug = _prepare(times, values, "fourier", 0.0, TWO_PI, mirror, prepend_zero)
    inc = np.diff(fourier_channels(t, vals), axis=-2)
    out = fset.evaluate(inc)
    return FourierCoeffs.from_vector(out, aug)


def _window_samples(t: np.ndarray, vals: np.ndarray, lo: float, hi: float, refine: int):
    inside = t[(t > lo) & (t < hi)]
    grid = np.concatenate([[lo], inside, [hi]])
    if refine > 1:
        frac = np.arange(refine) / refine
        grid = np.concatenate([(grid[:-1, None] + np.diff(grid)[:, None] * frac).ravel(), [hi]])
    # linear interpolation along the last axis, batched
    j = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, len(t) - 2)
    lam = (grid - t[j]) / (t[j + 1] - t[j])
    v = vals[..., j] * (1 - lam) + vals[..., j + 1] * lam
    return grid, v


def _gauss(lo: float, hi: float, n: int = 64):
    x, w = roots_legendre(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _invert_hermite(times, values, family: OrthoFamily, N: int, refine: int) -> PolyCoeffs:
    a, b = family.a, family.b
    eps = family.params["eps"]
    aug = Augmentation("hermite", float(times[0]), float(times[-1]), a, b, False, False)
    t = aug.to_basis(times)
    batch = values.shape[:-1]
    alpha = np.zeros(batch + (len(t), N + 1))
    cache: dict = {}
    for i, c in enumerate(t):
        lo, hi = max(a, c - HERMITE_WINDOW * eps), min(b, c + HERMITE_WINDOW * eps)
        key = (round((lo - c) / eps, 9), round((hi - c) / eps, 9))
        if key not in cache:
            # family recentred at the origin; signatures only see increments
            fam = family.recentred(0.0, (lo - c, hi - c))
            fset = ortho_functionals(fam, N)
            qx, qw = _gauss(lo - c, hi - c)
            P = fam.evaluate(N, qx) * (qw * fam.weight(qx))
            norms = np.array([fam.norm(n) for n in range(N + 1)])
            const = P.sum(axis=1) / norms          # coefficients of the constant 1
            gram = P @ fam.evaluate(N, qx).T       # Gram matrix on the window
            cache[key] = (fset, fam, const, np.linalg.solve(gram, np.diag(norms)))
        fset, fam, const, correct = cache[key]
        grid, v = _window_samples(t, values, lo, hi, refine)
        x0 = v[..., :1]
        y = (v - x0) * fam.weight(grid - c)
        path = np.stack([np.broadcast_to(grid - c, y.shape), y], axis=-1)
        raw = fset.evaluate(np.diff(path, axis=-2)) + x0 * const
        alpha[..., i, :] = raw @ correct.T
    return PolyCoeffs(family, alpha, aug, centers=t)


def invert_ortho(path, family: OrthoFamily, N: int, prepend_zero="auto", times=None,
                 functionals: FunctionalSet | None = None, refine: int = 4) -> PolyCoeffs:
    """Orthogonal-polynomial coefficients of a univariate path (or batch).

    Hermite families run pointwise: one expansion per sample time, centred
    there, with the weight truncated to ``+-6 eps`` inside the path interval.
    """
    times, values, _ = _as_batch(path, times)
    if not family.weight_is_finite():
        raise DomainError(f"{family.label} weight is not finite on [{family.a}, {family.b}]")
    if family.kind == "hermite":
        return _invert_hermite(times, values, family, N, refine)
    fset = functionals if functionals is not None else ortho_functionals(family, N)
    t, vals, aug = _prepare(times, values, "ortho", family.a, family.b, False, prepend_zero)
    weighted = fset.kind != "taylor"
    y = vals * family.weight(t) if weighted else vals
    path2 = np.stack([np.broadcast_to(t, y.shape), y], axis=-1)
    out = fset.evaluate(np.diff(path2, axis=-2))
    return PolyCoeffs(family, out, aug)


def reconstruct_values(coeffs: FourierCoeffs | PolyCoeffs, grid) -> np.ndarray:
    """Evaluate the truncated series at original time stamps ``grid``."""
    grid = np.asarray(grid, dtype=float)
    aug = coeffs.augmentation
    t = aug.to_basis(grid) if aug is not None else grid
    if isinstance(coeffs, FourierCoeffs):
        lo, hi = 0.0, TWO_PI
    else:
        lo, hi = coeffs.family.a, coeffs.family.b
    slack = 1e-9 * (hi - lo)
    if np.any(t < lo - slack) or np.any(t > hi + slack):
        raise DomainError(f"reconstruction grid leaves the basis interval [{lo}, {hi}]")
    return coeffs.series(np.clip(t, lo, hi))


def reconstruct(coeffs: FourierCoeffs | PolyCoeffs, grid) -> SampledPath:
    """Reconstructed univariate path on ``grid`` (original time units)."""
    vals = reconstruct_values(coeffs, grid)
    if vals.ndim != 1:
        raise InputError("reconstruct() returns one path; use reconstruct_values for batches")
    return SampledPath(np.asarray(grid, dtype=float), vals)
