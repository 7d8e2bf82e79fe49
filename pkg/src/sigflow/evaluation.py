"""Two-sample KS tests, the batched marginal KS protocol, L2 errors and
approximation-order sweeps."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import InputError
from .inversion import (
    invert_fourier,
    invert_ortho,
    make_family,
    reconstruct_values,
)
from .tensor_algebra import SampledPath

KS_C_ALPHA = 1.358  # asymptotic 5% critical constant


def ks_critical(m: int, n: int) -> float:
    return KS_C_ALPHA * math.sqrt((m + n) / (m * n))


def ks_statistic_batched(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sup-distance between empirical CDFs along the last axis (batched, tie-safe)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape[-1], b.shape[-1]
    if a.shape[:-1] != b.shape[:-1]:
        raise InputError("batched KS samples must share leading axes")
    vals = np.concatenate([a, b], axis=-1)
    from_a = np.concatenate([np.ones(a.shape, dtype=np.int64), np.zeros(b.shape, dtype=np.int64)], axis=-1)
    order = np.argsort(vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    ca = np.cumsum(np.take_along_axis(from_a, order, axis=-1), axis=-1)
    cb = np.arange(1, m + n + 1) - ca
    diff = ca / m - cb / n  # integer counts keep the extremes exact
    # only evaluate where the next value is strictly larger (end of a tie block)
    last = np.ones(vals.shape, dtype=bool)
    last[..., :-1] = vals[..., 1:] > vals[..., :-1]
    return np.max(np.where(last, np.abs(diff), 0.0), axis=-1)


def ks_two_sample(a, b) -> tuple[float, bool]:
    """KS statistic and rejection flag at the 5% level (asymptotic critical value)."""
    a = np.ravel(np.asarray(a, dtype=float))
    b = np.ravel(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise InputError("KS test needs two non-empty samples")
    stat = float(ks_statistic_batched(a, b))
    return stat, bool(stat > ks_critical(a.size, b.size))


@dataclass
class KSReport:
    """Summary of the marginal KS protocol.

    ``per_timepoint`` maps each timepoint to its mean statistic and rejection
    rate, averaged over channels.
    """

    mean_ks: float
    type1_rate: float
    repeats: int
    batch: int
    per_timepoint: dict = field(default_factory=dict)
    draws: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timepoint", "mean_ks", "type1_rate"])
            for tp, row in sorted(self.per_timepoint.items(), key=lambda kv: int(kv[0])):
                w.writerow([tp, f"{row['mean_ks']:.6f}", f"{row['type1_rate']:.6f}"])
            w.writerow(["all", f"{self.mean_ks:.6f}", f"{self.type1_rate:.6f}"])


def _as_panel(paths) -> np.ndarray:
    arr = np.asarray(paths, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise InputError("path sets must be non-empty arrays of shape (n, length[, channels])")
    return arr


def ks_marginal_protocol(real_paths, gen_paths, timepoints, repeats: int = 1000, batch: int = 64,
                         rng: np.random.Generator | int | None = 0) -> KSReport:
    """Bootstrap KS test on marginals.

    For every timepoint and channel, ``repeats`` times draw ``batch`` paths
    with replacement from each set and test the two marginal samples.
    """
    real = _as_panel(real_paths)
    gen = _as_panel(gen_paths)
    if real.shape[2] != gen.shape[2]:
        raise InputError("real and generated paths have different channel counts")
    length = min(real.shape[1], gen.shape[1])
    tps = [int(tp) for tp in timepoints]
    if any(not 0 <= tp < length for tp in tps):
        raise InputError(f"timepoints must lie in [0, {length})")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    crit = ks_critical(batch, batch)
    per = {}
    stats_all, rej_all = [], []
    for tp in tps:
        s_tp, r_tp = [], []
        for ch in range(real.shape[2]):
            ia = rng.integers(0, real.shape[0], (repeats, batch))
            ib = rng.integers(0, gen.shape[0], (repeats, batch))
            stats = ks_statistic_batched(real[ia, tp, ch], gen[ib, tp, ch])
            s_tp.append(stats)
            r_tp.append(stats > crit)
        s_tp, r_tp = np.concatenate(s_tp), np.concatenate(r_tp)
        per[str(tp)] = {"mean_ks": float(s_tp.mean()), "type1_rate": float(r_tp.mean())}
        stats_all.append(s_tp)
        rej_all.append(r_tp)
    stats_all, rej_all = np.concatenate(stats_all), np.concatenate(rej_all)
    return KSReport(float(stats_all.mean()), float(rej_all.mean()), repeats, batch, per,
                    draws=int(2 * stats_all.size * batch))


def l2_error(x, y, times=None) -> float | np.ndarray:
    """Root of the trapezoid-weighted mean squared difference.

    Accepts two :class:`SampledPath` objects on one grid, or value arrays
    ``(..., L)`` with a shared ``times`` grid (uniform on [0, 1] by default).
    """
    if isinstance(x, SampledPath) or isinstance(y, SampledPath):
        if not (isinstance(x, SampledPath) and isinstance(y, SampledPath)):
            raise InputError("compare two SampledPaths or two arrays")
        if x.times.shape != y.times.shape or not np.allclose(x.times, y.times, rtol=0, atol=1e-12):
            raise InputError("paths must share one time grid")
        if x.dim != y.dim:
            raise InputError("paths must have the same number of channels")
        sq = np.sum((x.values - y.values) ** 2, axis=1)
        t = x.times
    else:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != y.shape[-1]:
            raise InputError("paths must share one time grid")
        L = x.shape[-1]
        t = np.linspace(0.0, 1.0, L) if times is None else np.asarray(times, dtype=float)
        if t.shape != (L,):
            raise InputError("times do not match the path length")
        sq = (x - y) ** 2
    integral = np.sum(0.5 * (sq[..., 1:] + sq[..., :-1]) * np.diff(t), axis=-1)
    out = np.sqrt(integral / (t[-1] - t[0]))
    return float(out) if np.ndim(out) == 0 else out


def resolve_basis(spec: str, **overrides):
    """Parse ``fourier``, ``legendre``, ``chebyshev``, ``jacobi(a,b)``,
    ``hermite`` or ``hermite(eps)`` into ``("fourier", None)`` or ``("ortho", family)``."""
    s = spec.strip().lower().replace(" ", "")
    if s == "fourier":
        return "fourier", None
    name, _, rest = s.partition("(")
    args = [float(v) for v in rest.rstrip(")").split(",") if v] if rest else []
    if name == "jacobi":
        if len(args) != 2:
            raise InputError("jacobi basis needs two parameters, e.g. jacobi(0.5,0)")
        return "ortho", make_family("jacobi", alpha=args[0], beta=args[1])
    if name == "hermite":
        eps = args[0] if args else overrides.get("eps", 0.05)
        return "ortho", make_family("hermite", eps=eps)
    if name in ("legendre", "chebyshev"):
        return "ortho", make_family(name)
    raise InputError(f"unknown basis {spec!r}")


def invert_and_reconstruct(values, times, basis: str, order: int, mirror: bool = False):
    """Invert every path in ``values`` (``(n, L)``) and evaluate on ``times``."""
    kind, family = resolve_basis(basis)
    if kind == "fourier":
        coeffs = invert_fourier(values, order, mirror=mirror, times=times)
    else:
        coeffs = invert_ortho(values, family, order, times=times)
    return reconstruct_values(coeffs, times)


def approximation_sweep(paths, bases, orders, times=None, mirror: bool = True) -> list[dict]:
    """Mean L2 reconstruction error for every (basis, order) pair.

    ``mirror`` applies to the Fourier basis only.
    """
    values = np.asarray(paths, dtype=float)
    if values.ndim == 1:
        values = values[None]
    if values.ndim != 2 or values.shape[0] == 0:
        raise InputError("paths must be a non-empty (n, length) array")
    t = np.linspace(0.0, 1.0, values.shape[1]) if times is None else np.asarray(times, dtype=float)
    rows = []
    for basis in bases:
        for N in orders:
            rec = invert_and_reconstruct(values, t, basis, int(N), mirror=mirror)
            err = np.atleast_1d(l2_error(values, rec, t))
            rows.append({"basis": basis, "order": int(N), "mean_l2": float(err.mean()),
                         "std_l2": float(err.std()), "paths": int(len(err))})
    return rows


def write_table(rows: list[dict], path) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
