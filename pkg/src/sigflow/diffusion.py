"""Variance-preserving score diffusion on flat feature vectors.

The score network is a small fully-connected net with hand-written reverse
mode differentiation. It predicts ``r(t, x) ~ -noise`` and the score is
``r / sigma(t)``, so the training objective is the usual sigma^2-weighted
denoising score-matching loss ``E |r + noise|^2``.
"""
from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from .exceptions import ConfigError, DomainError, InputError, NumericalError, ShapeError

CHECKPOINT_VERSION = 1
T_MIN_TRAIN = 1e-5
T_END_SAMPLE = 1e-3


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear ``beta(t)`` on ``[0, 1]`` with closed-form integral ``B(t)``."""

    beta_min: float = 0.1
    beta_max: float = 5.0

    def __post_init__(self):
        if not (0 < self.beta_min <= self.beta_max):
            raise ConfigError("need 0 < beta_min <= beta_max")

    def beta(self, t):
        return self.beta_min + np.asarray(t, dtype=float) * (self.beta_max - self.beta_min)

    def B(self, t):
        t = np.asarray(t, dtype=float)
        return self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t

    def mean_coef(self, t):
        return np.exp(-0.5 * self.B(t))

    def std(self, t):
        return np.sqrt(-np.expm1(-self.B(t)))


def forward_perturb(x0, t, schedule: NoiseSchedule, noise):
    """Sample the VP marginal: ``x_t = x_0 e^{-B/2} + sqrt(1 - e^{-B}) noise``.

    Returns ``(x_t, std)``; the conditional score is ``-noise / std``.
    """
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise DomainError("diffusion time must lie in [0, 1]")
    if x0.shape != noise.shape:
        raise InputError(f"x0 shape {x0.shape} != noise shape {noise.shape}")
    tt = t[..., None] if t.ndim and x0.ndim > t.ndim else t
    std = schedule.std(tt)
    return x0 * schedule.mean_coef(tt) + std * noise, std


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal features ``[sin(f_k t), cos(f_k t)]``, ``f_k`` geometric in [1, 200]."""
    if dim % 2:
        raise ConfigError("time embedding width must be even")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, math.log(200.0), half)) if half > 1 else np.ones(1)
    ang = t[:, None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _silu(z):
    s = expit(z)
    return z * s, s


class ScoreNet:
    """MLP ``[x, emb(t)] -> hidden -> ... -> width`` with SiLU activations.

    Parameters live in one flat vector so optimisers and finite-difference
    checks can treat them uniformly. With ``skip=True`` the output is
    ``MLP(x, t) - sigma(t) x``: a zero MLP then gives the exact score of a
    standard normal target, and training only has to learn the residual.
    """

    def __init__(self, width: int, hidden=(64, 64), time_dim: int = 16, skip: bool = True,
                 schedule: "NoiseSchedule | None" = None):
        if width < 1:
            raise ConfigError("data width must be positive")
        self.skip = bool(skip)
        self.schedule = schedule or NoiseSchedule()
        self.width = int(width)
        self.hidden = tuple(int(h) for h in hidden)
        self.time_dim = int(time_dim)
        sizes = [self.width + self.time_dim, *self.hidden, self.width]
        self.shapes = [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.n_params = sum(a * b + b for a, b in self.shapes)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        chunks = []
        for i, (fan_in, fan_out) in enumerate(self.shapes):
            scale = 1.0 / math.sqrt(fan_in)
            if i == len(self.shapes) - 1:
                scale *= 0.1
            chunks += [rng.normal(0.0, scale, fan_in * fan_out), np.zeros(fan_out)]
        return np.concatenate(chunks)

    def unpack(self, params: np.ndarray):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got {params.shape}")
        out, pos = [], 0
        for a, b in self.shapes:
            W = params[pos:pos + a * b].reshape(a, b)
            pos += a * b
            out.append((W, params[pos:pos + b]))
            pos += b
        return out

    def forward(self, params, x, t, cache: bool = False):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        h = np.concatenate([x, time_embedding(t, self.time_dim)], axis=1)
        layers = self.unpack(params)
        saved = []
        for i, (W, b) in enumerate(layers):
            z = h @ W + b
            if i < len(layers) - 1:
                a, s = _silu(z)
                saved.append((h, z, s))
                h = a
            else:
                saved.append((h, None, None))
                h = z
        if self.skip:
            h = h - self.schedule.std(t)[:, None] * x
        return (h, saved) if cache else h

    def backward(self, params, saved, grad_out) -> np.ndarray:
        layers = self.unpack(params)
        grads = []
        g = grad_out
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            h_in, z, s = saved[i]
            if z is not None:
                g = g * (s * (1.0 + z * (1.0 - s)))
            grads.append((h_in.T @ g, g.sum(axis=0)))
            g = g @ W.T
        flat = []
        for gW, gb in reversed(grads):
            flat += [gW.ravel(), gb]
        return np.concatenate(flat)

    def score(self, params, x, t):
        t = np.broadcast_to(np.asarray(t, dtype=float), (np.shape(x)[0],))
        return self.forward(params, x, t) / self.schedule.std(t)[:, None]


def loss_and_grads(net: ScoreNet, params, x0, t, noise, schedule: NoiseSchedule):
    """Weighted DSM loss ``mean |r(t, x_t) + noise|^2`` for explicit draws, and its gradient."""
    xt, _ = forward_perturb(x0, t, schedule, noise)
    out, saved = net.forward(params, xt, t, cache=True)
    r = out + noise
    loss = float(np.mean(r * r))
    grad_out = 2.0 * r / r.size
    return loss, net.backward(params, saved, grad_out)


def dsm_loss_and_grads(net: ScoreNet, params, batch, schedule: NoiseSchedule, rng: np.random.Generator):
    """Draw ``t ~ U[1e-5, 1]`` and Gaussian noise from ``rng``, then evaluate the loss."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise InputError("batch must be a non-empty (n, width) array")
    t = rng.uniform(T_MIN_TRAIN, 1.0, batch.shape[0])
    noise = rng.standard_normal(batch.shape)
    return loss_and_grads(net, params, batch, t, noise, schedule)


@dataclass
class Normalizer:
    """Affine map between data vectors and the latent space the net sees.

    ``z = ((x - mean) @ components.T) / scale`` and
    ``x = mean + (z * scale) @ components``. Directions with (numerically)
    zero variance are dropped, so generated vectors keep them at the
    training mean.

    ``mode="zscore"`` standardises every non-constant coordinate on its own;
    ``mode="pca"`` whitens along principal axes whose variance exceeds
    ``tol`` times the largest one.
    """

    mean: np.ndarray
    components: np.ndarray  # (k, width), orthonormal rows
    scale: np.ndarray  # (k,)
    mode: str = "pca"

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.components = np.asarray(self.components, dtype=float).reshape(-1, self.mean.size)
        self.scale = np.asarray(self.scale, dtype=float)
        if self.scale.shape != (self.components.shape[0],):
            raise ShapeError("one scale per latent direction expected")
        if np.any(self.scale <= 0):
            raise ConfigError("normalisation scale must be strictly positive")

    @classmethod
    def fit(cls, data, mode: str = "pca", tol: float = 1e-6) -> "Normalizer":
        data = np.asarray(data, dtype=float)
        mean = data.mean(axis=0)
        centred = data - mean
        if mode == "zscore":
            std = centred.std(axis=0)
            keep = np.flatnonzero(std > 1e-8 * np.maximum(1.0, np.abs(mean)))
            comps = np.eye(data.shape[1])[keep]
            return cls(mean, comps, std[keep], mode)
        if mode != "pca":
            raise ConfigError(f"unknown normalisation mode {mode!r}")
        _, sv, vt = np.linalg.svd(centred, full_matrices=False)
        var = sv**2 / max(data.shape[0], 1)
        keep = var > tol * var.max() if var.size and var.max() > 0 else np.zeros(var.shape, bool)
        return cls(mean, vt[keep], np.sqrt(var[keep]), mode)

    @property
    def width(self) -> int:
        return self.mean.size

    @property
    def latent_width(self) -> int:
        return self.components.shape[0]

    def transform(self, x) -> np.ndarray:
        return ((np.asarray(x, dtype=float) - self.mean) @ self.components.T) / self.scale

    def inverse(self, z) -> np.ndarray:
        return self.mean + (np.asarray(z, dtype=float) * self.scale) @ self.components


def _write_npz(path, arrays: dict) -> None:
    # like np.savez, but with fixed zip timestamps so identical runs give identical bytes
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())


@dataclass
class ScoreCheckpoint:
    """Everything needed to sample: weights, schedule, normalisation, provenance."""

    hidden: tuple
    time_dim: int
    params: np.ndarray
    schedule: NoiseSchedule
    normalizer: Normalizer
    skip: bool = True
    fingerprint: dict = field(default_factory=dict)
    seed: int = 0
    epochs: int = 0
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def width(self) -> int:
        return self.normalizer.width

    @property
    def latent_width(self) -> int:
        return self.normalizer.latent_width

    @property
    def net(self) -> ScoreNet:
        return ScoreNet(self.latent_width, self.hidden, self.time_dim, self.skip, self.schedule)

    def save(self, path) -> None:
        meta = {
            "format_version": CHECKPOINT_VERSION,
            "width": self.width, "hidden": list(self.hidden), "time_dim": self.time_dim,
            "skip": self.skip, "normalization": self.normalizer.mode,
            "beta_min": self.schedule.beta_min, "beta_max": self.schedule.beta_max,
            "fingerprint": self.fingerprint, "seed": self.seed, "epochs": self.epochs,
        }
        nz = self.normalizer
        _write_npz(path, {"meta": np.array(json.dumps(meta, sort_keys=True)), "params": self.params,
                          "mean": nz.mean, "components": nz.components, "scale": nz.scale,
                          "loss_history": np.asarray(self.loss_history, dtype=float)})

    @classmethod
    def load(cls, path) -> "ScoreCheckpoint":
        try:
            z = np.load(Path(path), allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read checkpoint {path}: {exc}") from None
        with z:
            try:
                meta = json.loads(str(z["meta"]))
                arrays = {k: z[k].copy() for k in ("params", "mean", "components", "scale", "loss_history")}
            except KeyError as exc:
                raise InputError(f"checkpoint {path} is missing {exc}") from None
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {meta.get('format_version')}")
        nz = Normalizer(arrays["mean"], arrays["components"], arrays["scale"], meta["normalization"])
        ckpt = cls(tuple(meta["hidden"]), meta["time_dim"], arrays["params"],
                   NoiseSchedule(meta["beta_min"], meta["beta_max"]), nz, meta["skip"],
                   meta["fingerprint"], meta["seed"], meta["epochs"], arrays["loss_history"])
        if nz.latent_width and ckpt.params.shape != (ckpt.net.n_params,):
            raise ShapeError("checkpoint parameters do not match the stored architecture")
        return ckpt


def train(data, epochs: int = 1200, batch_size: int = 128, lr: float = 1e-3, seed: int = 0,
          schedule: NoiseSchedule | None = None, hidden=(64, 64), time_dim: int = 16,
          normalization: str = "pca", skip="auto", fingerprint: dict | None = None,
          callback: Callable | None = None) -> ScoreCheckpoint:
    """Fit the score network with Adam on shuffled minibatches.

    Deterministic for a given ``seed``. ``loss_history`` holds the mean
    minibatch loss of every epoch. Data with no variance at all gives a
    checkpoint without a network that reproduces the mean.

    ``skip="auto"`` adds the Gaussian skip (see :class:`ScoreNet`) only when
    the latent width exceeds the narrowest hidden layer, i.e. when the MLP
    alone cannot represent the full-rank linear part of the score.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise InputError("training data must be a non-empty (n, width) array")
    bad = np.argwhere(~np.isfinite(data))
    if len(bad):
        raise InputError(f"non-finite training value at row {bad[0][0]}, coordinate {bad[0][1]}")
    if epochs < 0 or batch_size < 1 or lr <= 0:
        raise ConfigError("need epochs >= 0, batch_size >= 1 and lr > 0")
    schedule = schedule or NoiseSchedule()
    rng = np.random.default_rng(seed)
    nz = Normalizer.fit(data, normalization)
    meta = dict(fingerprint or {})
    if skip == "auto":
        skip = nz.latent_width > min(hidden, default=nz.latent_width)
    skip = bool(skip)
    if nz.latent_width == 0:
        return ScoreCheckpoint(tuple(hidden), time_dim, np.zeros(0), schedule, nz, skip, meta,
                               int(seed), int(epochs), np.zeros(epochs))
    z = nz.transform(data)
    net = ScoreNet(nz.latent_width, hidden, time_dim, skip, schedule)
    params = net.init_params(rng)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    n = z.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            batch = z[order[start:start + batch_size]]
            loss, g = dsm_loss_and_grads(net, params, batch, schedule, rng)
            if not np.isfinite(loss):
                raise NumericalError(f"loss became non-finite at epoch {epoch}")
            step += 1
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            params = params - lr * (m / (1 - b1**step)) / (np.sqrt(v / (1 - b2**step)) + eps)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if callback is not None:
            callback(epoch, history[-1])
    return ScoreCheckpoint(net.hidden, net.time_dim, params, schedule, nz, skip, meta,
                           int(seed), int(epochs), np.array(history))


def probability_flow(score_fn: Callable, x_init: np.ndarray, schedule: NoiseSchedule,
                     steps: int = 128, t_end: float = T_END_SAMPLE) -> np.ndarray:
    """Integrate ``dx = -beta(t)/2 (x + score(t, x)) dt`` from ``t=1`` down to ``t_end`` with RK4."""
    x = np.array(x_init, dtype=float)
    ts = np.linspace(1.0, t_end, steps + 1)

    def f(t, y):
        return -0.5 * schedule.beta(t) * (y + score_fn(t, y))

    for i in range(steps):
        t, h = ts[i], ts[i + 1] - ts[i]
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise NumericalError("probability-flow integration diverged")
    return x


def sample(ckpt: ScoreCheckpoint, count: int, rng: np.random.Generator, steps: int = 128) -> np.ndarray:
    """Draw ``count`` vectors: ``z_1 ~ N(0, I)``, flow to ``t ~ 0``, map back to data space."""
    if count < 0:
        raise InputError("count must be >= 0")
    nz = ckpt.normalizer
    if count == 0 or nz.latent_width == 0:
        return np.repeat(nz.mean[None], count, axis=0)
    net = ckpt.net
    z1 = rng.standard_normal((count, nz.latent_width))
    z = probability_flow(lambda t, y: net.score(ckpt.params, y, t), z1, ckpt.schedule, steps)
    return nz.inverse(z)
