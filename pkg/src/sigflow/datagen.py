"""Synthetic datasets and CSV ingestion.

Every generator returns a :class:`PathSet` (values of shape
``(count, length, channels)`` on a shared time grid) and is a pure function
of its parameters and seed.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, NumericalError


@dataclass
class PathSet:
    times: np.ndarray
    values: np.ndarray  # (count, length, channels)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        if self.values.ndim != 3 or self.values.shape[1] != len(self.times):
            raise InputError("values must be (count, length, channels) matching the time grid")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def _check_sizes(**sizes):
    for name, v in sizes.items():
        if int(v) != v or v < 1:
            raise InputError(f"{name} must be a positive integer")


def gen_sines(count: int, length: int, channels: int = 5, seed: int = 0,
              freq_range=(0.0, 1.0), freq_scale: float = 1.0) -> PathSet:
    """Per channel ``sin(2 pi f u + phi)`` on ``u in [0, 1]``, ``f`` uniform on
    ``freq_scale * freq_range`` and ``phi`` uniform on ``[0, 2 pi]``."""
    _check_sizes(count=count, length=length, channels=channels)
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, length)
    lo, hi = freq_range
    f = rng.uniform(lo, hi, (count, 1, channels)) * freq_scale
    phi = rng.uniform(0.0, 2 * np.pi, (count, 1, channels))
    return PathSet(u, np.sin(2 * np.pi * f * u[None, :, None] + phi))


def gen_noisy_sines(count: int, length: int, terms: int = 3, noise: float = 0.05, seed: int = 0,
                    max_freq: float = 3.0) -> PathSet:
    """Univariate sums of ``terms`` random sines plus Gaussian noise."""
    _check_sizes(count=count, length=length, terms=terms)
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, length)
    amp = rng.uniform(0.5, 1.5, (count, terms, 1))
    f = rng.uniform(0.5, max_freq, (count, terms, 1))
    phi = rng.uniform(0.0, 2 * np.pi, (count, terms, 1))
    x = (amp * np.sin(2 * np.pi * f * u + phi)).sum(axis=1)
    x = x + noise * rng.standard_normal(x.shape)
    return PathSet(u, x[:, :, None])


def lotka_volterra_rhs(z: np.ndarray) -> np.ndarray:
    x, y = z[..., 0], z[..., 1]
    return np.stack([2.0 / 3.0 * x - 2.0 / 3.0 * x * y, x * y - y], axis=-1)


def lotka_volterra_invariant(z: np.ndarray) -> np.ndarray:
    """Conserved quantity ``x - ln x + (2/3)(y - ln y)`` of the system above."""
    x, y = z[..., 0], z[..., 1]
    return x - np.log(x) + 2.0 / 3.0 * (y - np.log(y))


def rk4_integrate(z0: np.ndarray, t: np.ndarray, substeps: int = 10, rhs=lotka_volterra_rhs) -> np.ndarray:
    """Classical RK4 with ``substeps`` equal steps inside every grid interval."""
    z = np.array(z0, dtype=float)
    out = np.empty(z.shape[:-1] + (len(t), z.shape[-1]))
    out[..., 0, :] = z
    for i in range(len(t) - 1):
        h = (t[i + 1] - t[i]) / substeps
        for _ in range(substeps):
            k1 = rhs(z)
            k2 = rhs(z + 0.5 * h * k1)
            k3 = rhs(z + 0.5 * h * k2)
            k4 = rhs(z + h * k3)
            z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[..., i + 1, :] = z
    return out


def gen_predator_prey(count: int, length: int = 1000, seed: int = 0, t_max: float = 10.0,
                      init_box=(0.5, 1.5), substeps: int = 10, initial=None) -> PathSet:
    """Trajectories of ``x' = 2/3 x - 2/3 xy``, ``y' = xy - y`` on ``[0, t_max]``.

    Initial conditions are uniform on ``init_box`` squared unless ``initial``
    (shape ``(count, 2)``) is given.
    """
    _check_sizes(count=count, length=length)
    if length < 2:
        raise InputError("length must be >= 2")
    rng = np.random.default_rng(seed)
    z0 = rng.uniform(init_box[0], init_box[1], (count, 2)) if initial is None else np.asarray(initial, float)
    if np.any(z0 <= 0):
        raise InputError("initial populations must be positive")
    t = np.linspace(0.0, t_max, length)
    return PathSet(t, rk4_integrate(z0, t, substeps))


def fbm_covariance(times: np.ndarray, hurst: float) -> np.ndarray:
    s, t = np.meshgrid(times, times, indexing="ij")
    h2 = 2 * hurst
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)


def _cholesky_with_jitter(cov: np.ndarray, tries: int = 6) -> np.ndarray:
    jitter = 0.0
    scale = np.mean(np.diag(cov))
    for _ in range(tries):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-12 if jitter == 0.0 else jitter * 100
    raise NumericalError("fBM covariance is not numerically positive definite")


def gen_fbm(count: int, length: int, hurst: float, seed: int = 0, t_max: float = 1.0) -> PathSet:
    """Exact fractional Brownian motion via Cholesky of its covariance; starts at 0."""
    _check_sizes(count=count, length=length)
    if not 0 < hurst < 1:
        raise InputError("hurst must lie in (0, 1)")
    if length < 2:
        raise InputError("length must be >= 2")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, t_max, length)
    chol = _cholesky_with_jitter(fbm_covariance(t[1:], hurst))
    x = rng.standard_normal((count, length - 1)) @ chol.T
    x = np.concatenate([np.zeros((count, 1)), x], axis=1)
    return PathSet(t, x[:, :, None])


def read_numeric_csv(path, delimiter: str = ",") -> tuple[list[str] | None, np.ndarray]:
    """Parse a numeric CSV, auto-detecting one header row.

    Raises :class:`InputError` naming the row of any ragged or non-numeric line.
    """
    rows, header = [], None
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh, delimiter=delimiter)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if i == 0 and header is None:
                    header = [c.strip() for c in row]
                    continue
                raise InputError(f"{path}: non-numeric cell in row {i + 1}") from None
            if len(rows[-1]) != len(rows[0]) or (header and len(row) != len(header)):
                raise InputError(f"{path}: row {i + 1} has {len(row)} cells, expected "
                                 f"{len(header) if header else len(rows[0])}")
    return header, np.array(rows, dtype=float).reshape(len(rows), -1)


def ingest_csv(path, length: int, stride: int, channels=None, time_column: int | None = None,
               delimiter: str = ",") -> PathSet:
    """Slice a long multichannel CSV into windows of ``length`` rows every ``stride`` rows.

    The window count is ``floor((rows - length) / stride) + 1``; a file shorter
    than one window yields an empty set with a warning.
    """
    _check_sizes(length=length, stride=stride)
    _, data = read_numeric_csv(path, delimiter)
    cols = list(range(data.shape[1])) if channels is None else [int(c) for c in channels]
    if time_column is not None and channels is None:
        cols = [c for c in cols if c != time_column]
    if data.size and any(not 0 <= c < data.shape[1] for c in cols):
        raise InputError(f"channel index out of range for a {data.shape[1]}-column file")
    rows = data.shape[0]
    n_win = (rows - length) // stride + 1 if rows >= length else 0
    if n_win == 0:
        warnings.warn(f"{path}: {rows} rows is shorter than one window of {length}", stacklevel=2)
        return PathSet(np.linspace(0.0, 1.0, length), np.zeros((0, length, len(cols))))
    starts = np.arange(n_win) * stride
    windows = np.stack([data[s:s + length][:, cols] for s in starts])
    times = np.linspace(0.0, 1.0, length)
    if time_column is not None:
        times = data[:length, time_column] - data[0, time_column]
    return PathSet(times, windows)


def write_paths_csv(ps: PathSet, path) -> None:
    """Long format: one row per (series, time) with columns ``series,time,ch0..``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "time"] + [f"ch{c}" for c in range(ps.channels)])
        for i in range(ps.count):
            for j, t in enumerate(ps.times):
                w.writerow([i, repr(float(t))] + [repr(float(v)) for v in ps.values[i, j]])


def read_paths_csv(path) -> PathSet:
    header, data = read_numeric_csv(path)
    if header is None or header[:2] != ["series", "time"]:
        raise InputError(f"{path}: expected a 'series,time,ch...' header")
    if data.shape[0] == 0:
        raise InputError(f"{path}: no rows")
    series = data[:, 0].astype(int)
    count = series.max() + 1
    length = data.shape[0] // count
    if count * length != data.shape[0] or np.any(series != np.repeat(np.arange(count), length)):
        raise InputError(f"{path}: series blocks must be contiguous and equally long")
    times = data[:length, 1]
    return PathSet(times, data[:, 2:].reshape(count, length, -1))
