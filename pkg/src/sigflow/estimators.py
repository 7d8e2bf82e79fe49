"""scikit-learn style wrappers around inversion, embedding and diffusion.

All estimators take path panels ``X`` of shape ``(n, length)`` or
``(n, length, channels)`` sampled on a shared ``times`` grid.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import diffusion
from .embedding import LogSigEmbedding
from .evaluation import resolve_basis
from .exceptions import InputError
from .inversion import (
    Augmentation,
    FourierCoeffs,
    PolyCoeffs,
    invert_fourier,
    invert_ortho,
    reconstruct_values,
)
from .inversion.invert import _needs_prepend


def check_paths(X, times=None, allow_empty: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Validate a path panel and its time grid.

    Returns
    -------
    values : ndarray, shape (n, length, channels)
    times : ndarray, shape (length,)
        ``times`` as given, or a uniform grid on ``[0, 1]``.
    """
    try:
        arr = check_array(X, ensure_2d=False, allow_nd=True, dtype=float,
                          ensure_min_samples=0 if allow_empty else 1)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InputError(f"expected paths of shape (n, length[, channels]), got {arr.shape}")
    if arr.shape[1] < 2:
        raise InputError("paths need at least two samples")
    t = np.linspace(0.0, 1.0, arr.shape[1]) if times is None else np.asarray(times, dtype=float)
    if t.shape != (arr.shape[1],):
        raise InputError(f"times has shape {t.shape}, paths have length {arr.shape[1]}")
    if not np.all(np.diff(t) > 0):
        raise InputError("times must be strictly increasing")
    return arr, t


class SignatureInverter(TransformerMixin, BaseEstimator):
    """Basis coefficients of each channel, computed from the path signature.

    ``transform`` returns ``(n, channels * K)`` coefficients and
    ``inverse_transform`` evaluates the truncated series on the fitted grid.
    With ``prepend_zero="auto"`` the choice is made once, on the data
    passed to ``fit``, so every later call shares one augmentation.

    Parameters
    ----------
    basis : str
        ``fourier``, ``legendre``, ``chebyshev``, ``jacobi(a,b)`` or ``hermite(eps)``.
    order : int
        Highest harmonic or polynomial degree.
    mirror : bool
        Mirror augmentation (Fourier only).
    prepend_zero : {"auto", True, False}
    times : array_like, optional
        Sample times; uniform on ``[0, 1]`` when omitted.
    """

    def __init__(self, basis="fourier", order=2, mirror=False, prepend_zero="auto", times=None):
        self.basis = basis
        self.order = order
        self.mirror = mirror
        self.prepend_zero = prepend_zero
        self.times = times

    def fit(self, X, y=None):
        values, t = check_paths(X, self.times)
        self.kind_, self.family_ = resolve_basis(self.basis)
        self.times_ = t
        self.n_channels_ = values.shape[2]
        self.prepend_ = _needs_prepend(np.moveaxis(values, 2, 1), self.prepend_zero)
        probe = self._coeffs(values[:1])
        self.augmentation_: Augmentation = probe.augmentation
        self.centers_ = getattr(probe, "centers", None)
        self.n_coefficients_ = probe.vector().shape[-1]
        return self

    def _coeffs(self, values):
        v = np.moveaxis(values, 2, 1)  # (n, C, L)
        if self.kind_ == "fourier":
            return invert_fourier(v, int(self.order), mirror=self.mirror, prepend_zero=self.prepend_,
                                  times=self.times_)
        return invert_ortho(v, self.family_, int(self.order), prepend_zero=self.prepend_, times=self.times_)

    def transform(self, X):
        check_is_fitted(self, "augmentation_")
        values, _ = check_paths(X, self.times_)
        if values.shape[2] != self.n_channels_:
            raise InputError(f"expected {self.n_channels_} channels, got {values.shape[2]}")
        return self._coeffs(values).vector().reshape(values.shape[0], -1)

    def inverse_transform(self, C):
        check_is_fitted(self, "augmentation_")
        C = np.asarray(C, dtype=float)
        K = self.n_coefficients_
        if C.ndim != 2 or C.shape[1] != self.n_channels_ * K:
            raise InputError(f"expected coefficients of shape (n, {self.n_channels_ * K})")
        C = C.reshape(C.shape[0], self.n_channels_, K)
        if self.kind_ == "fourier":
            coeffs = FourierCoeffs.from_vector(C, self.augmentation_)
        elif self.centers_ is not None:
            alpha = C.reshape(C.shape[:2] + (len(self.centers_), -1))
            coeffs = PolyCoeffs(self.family_, alpha, self.augmentation_, centers=self.centers_)
        else:
            coeffs = PolyCoeffs(self.family_, C, self.augmentation_)
        return np.moveaxis(reconstruct_values(coeffs, self.times_), 1, 2)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "augmentation_")
        probe = self._coeffs(np.zeros((1, len(self.times_), 1)))
        return np.array([f"ch{c}:{nm}" for c in range(self.n_channels_) for nm in probe.names()])


class LogSignatureEmbedder(TransformerMixin, BaseEstimator):
    """Per-channel log-signature coordinates in the Lyndon basis.

    ``inverse_transform`` maps coordinates back to paths through the
    coefficient functionals.
    """

    def __init__(self, basis="fourier", order=2, mirror=False, times=None):
        self.basis = basis
        self.order = order
        self.mirror = mirror
        self.times = times

    def fit(self, X, y=None):
        values, t = check_paths(X, self.times)
        self.embedding_ = LogSigEmbedding(t, values.shape[2], self.basis, int(self.order), self.mirror)
        self.n_features_out_ = self.embedding_.width
        return self

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        values, _ = check_paths(X, self.embedding_.times)
        return self.embedding_.embed(values)

    def inverse_transform(self, Z):
        check_is_fitted(self, "embedding_")
        return self.embedding_.invert(Z)

    def coefficients(self, Z):
        check_is_fitted(self, "embedding_")
        return self.embedding_.coefficients(Z)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "embedding_")
        return np.array(self.embedding_.column_names())


class ScoreDiffusion(BaseEstimator):
    """Score-based diffusion model on flat vectors; ``sample`` draws new rows."""

    def __init__(self, epochs=1200, batch_size=128, lr=1e-3, hidden=(64, 64), time_dim=16,
                 beta_min=0.1, beta_max=5.0, normalization="pca", skip="auto", steps=128,
                 random_state=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.hidden = hidden
        self.time_dim = time_dim
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.normalization = normalization
        self.skip = skip
        self.steps = steps
        self.random_state = random_state

    def fit(self, X, y=None, fingerprint=None):
        try:
            X = check_array(X, dtype=float)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        self.checkpoint_ = diffusion.train(
            X, epochs=int(self.epochs), batch_size=int(self.batch_size), lr=float(self.lr),
            seed=int(self.random_state), schedule=diffusion.NoiseSchedule(self.beta_min, self.beta_max),
            hidden=tuple(self.hidden), time_dim=int(self.time_dim), normalization=self.normalization,
            skip=self.skip, fingerprint=fingerprint)
        self.loss_history_ = self.checkpoint_.loss_history
        self.n_features_in_ = X.shape[1]
        return self

    def sample(self, n_samples: int, random_state=None) -> np.ndarray:
        check_is_fitted(self, "checkpoint_")
        seed = self.random_state if random_state is None else random_state
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return diffusion.sample(self.checkpoint_, int(n_samples), rng, int(self.steps))


class TimeSeriesGenerator(BaseEstimator):
    """Embed paths as log-signatures, fit a diffusion model, sample and invert."""

    def __init__(self, basis="fourier", order=2, mirror=False, times=None, epochs=1200,
                 batch_size=128, lr=1e-3, hidden=(64, 64), normalization="pca", skip="auto",
                 steps=128, random_state=0):
        self.basis = basis
        self.order = order
        self.mirror = mirror
        self.times = times
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.hidden = hidden
        self.normalization = normalization
        self.skip = skip
        self.steps = steps
        self.random_state = random_state

    def fit(self, X, y=None):
        self.embedder_ = LogSignatureEmbedder(self.basis, self.order, self.mirror, self.times).fit(X)
        Z = self.embedder_.transform(X)
        self.diffusion_ = ScoreDiffusion(self.epochs, self.batch_size, self.lr, self.hidden,
                                         normalization=self.normalization, skip=self.skip,
                                         steps=self.steps,
                                         random_state=self.random_state)
        self.diffusion_.fit(Z, fingerprint=self.embedder_.embedding_.fingerprint())
        return self

    def sample(self, n_samples: int, random_state=None) -> np.ndarray:
        """Generated paths of shape ``(n_samples, length, channels)``."""
        check_is_fitted(self, "diffusion_")
        ckpt = self.diffusion_.checkpoint_
        emb = self.embedder_.embedding_
        emb.check_compatible(ckpt.fingerprint, ckpt.width)
        Z = self.diffusion_.sample(n_samples, random_state)
        if Z.shape[0] == 0:
            return np.zeros((0, len(emb.times), emb.channels))
        return emb.invert(Z)


__all__ = ["check_paths", "SignatureInverter", "LogSignatureEmbedder", "ScoreDiffusion",
           "TimeSeriesGenerator"]
