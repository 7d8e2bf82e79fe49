"""Per-channel log-signature embedding of multichannel series and its inverse.

Each channel is augmented on its own (Fourier: ``(t, sin t, cos t - 1, x)``,
polynomial: ``(t, w(t) x(t))``) and embedded as a depth ``N + 2``
log-signature; the channel vectors are concatenated. All coordinates are
kept, including the ones shared by every channel (time and trig channels).
"""
from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, InputError
from .inversion import (
    Augmentation,
    FourierCoeffs,
    PolyCoeffs,
    fourier_channels,
    fourier_functionals,
    ortho_functionals,
    reconstruct_values,
)
from .inversion.invert import TWO_PI, _prepare
from .lie import lyndon_basis
from .tensor_algebra import signature_from_increments, tensor_exp, tensor_log


class LogSigEmbedding:
    """Embedding for series of ``length`` samples on ``times`` with ``channels`` channels.

    Parameters
    ----------
    basis : str
        ``"fourier"`` or a polynomial basis name accepted by
        :func:`sigflow.evaluation.resolve_basis` (pointwise Hermite excluded).
    order : int
        Number of recovered harmonics / polynomial degree ``N``; depth is ``N + 2``.
    mirror : bool
        Mirror augmentation (Fourier only).
    """

    def __init__(self, times, channels: int, basis: str = "fourier", order: int = 2, mirror: bool = False):
        from .evaluation import resolve_basis

        self.times = np.asarray(times, dtype=float)
        self.channels = int(channels)
        self.basis = basis
        self.order = int(order)
        self.mirror = bool(mirror)
        self.kind, self.family = resolve_basis(basis)
        if self.family is not None and self.family.kind == "hermite":
            raise ConfigError("pointwise Hermite inversion has no single-signature embedding")
        if self.family is not None and not self.family.weight_is_finite():
            raise ConfigError(f"{self.family.label} weight is not finite on its interval")
        if self.kind == "fourier":
            self.functionals = fourier_functionals(self.order)
        else:
            self.functionals = ortho_functionals(self.family, self.order)
        self.depth = self.functionals.depth
        self.dim = self.functionals.dim
        self.lie = lyndon_basis(self.dim, self.depth)
        self.augmentation: Augmentation | None = None

    @property
    def width_per_channel(self) -> int:
        return len(self.lie)

    @property
    def width(self) -> int:
        return self.channels * len(self.lie)

    def fingerprint(self) -> dict:
        return {"dim": self.dim, "depth": self.depth, "lyndon": self.lie.fingerprint,
                "channels": self.channels, "basis": self.basis, "order": self.order,
                "mirror": self.mirror, "length": len(self.times)}

    def check_compatible(self, fingerprint: dict | None, width: int | None = None) -> None:
        """Raise :class:`ConfigError` if vectors described by ``fingerprint`` /
        ``width`` were not produced by this embedding."""
        if width is not None and width != self.width:
            raise ConfigError(f"vector width {width} does not match embedding width {self.width}")
        if fingerprint:
            mine = self.fingerprint()
            diff = sorted(k for k in mine if k in fingerprint and fingerprint[k] != mine[k])
            if diff:
                raise ConfigError(f"embedding fingerprint mismatch in {', '.join(diff)}")

    def column_names(self) -> list[str]:
        return [f"ch{c}:{w}" for c in range(self.channels) for w in self.lie.names]

    def _augmented_increments(self, values: np.ndarray) -> np.ndarray:
        # values (n, L, C) -> increments (n, C, segments, dim)
        v = np.moveaxis(values, 2, 1)
        if self.kind == "fourier":
            t, vals, aug = _prepare(self.times, v, "fourier", 0.0, TWO_PI, self.mirror, True)
            path = fourier_channels(t, vals)
        else:
            fam = self.family
            t, vals, aug = _prepare(self.times, v, "ortho", fam.a, fam.b, False, True)
            y = vals * fam.weight(t)
            path = np.stack([np.broadcast_to(t, y.shape), y], axis=-1)
        self.augmentation = aug
        return np.diff(path, axis=-2)

    def embed(self, values) -> np.ndarray:
        """``(n, L, C)`` values -> ``(n, C * beta)`` log-signature coordinates."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1:] != (len(self.times), self.channels):
            raise InputError(f"expected values of shape (n, {len(self.times)}, {self.channels})")
        inc = self._augmented_increments(values)
        S = signature_from_increments(inc, self.depth)
        coords = self.lie.project(tensor_log(S))
        return coords.reshape(values.shape[0], -1)

    def coefficients(self, vectors) -> np.ndarray:
        """Basis coefficients ``(n, C, K)`` from log-signature vectors ``(n, C * beta)``."""
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] != self.width:
            raise InputError(f"expected log-signature vectors of width {self.width}")
        coords = vectors.reshape(vectors.shape[0], self.channels, -1)
        S = tensor_exp(self.lie.expand(coords))
        return self.functionals.pair(S)

    def coeff_objects(self, coeffs: np.ndarray):
        if self.augmentation is None:
            self._augmented_increments(np.zeros((1, len(self.times), self.channels)))
        if self.kind == "fourier":
            return FourierCoeffs.from_vector(coeffs, self.augmentation)
        return PolyCoeffs(self.family, coeffs, self.augmentation)

    def invert(self, vectors) -> np.ndarray:
        """Reconstructed series ``(n, L, C)`` on the embedding's time grid."""
        coeffs = self.coefficients(vectors)
        rec = reconstruct_values(self.coeff_objects(coeffs), self.times)  # (n, C, L)
        return np.moveaxis(rec, 1, 2)
