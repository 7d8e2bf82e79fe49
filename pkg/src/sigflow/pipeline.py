"""End-to-end generation pipeline, configuration files and artifact I/O.

Stages: data -> embed -> train -> sample -> invert -> evaluate. Every stage
writes its artifact into the output directory, and ``manifest.json``
records the resolved config, its hash, the root seed, the embedding
fingerprint, library versions and a SHA-256 per artifact. Nothing
time-dependent is written, so identical configs give identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import zlib
from pathlib import Path

import numpy as np

from . import __version__, datagen, diffusion
from .embedding import LogSigEmbedding
from .evaluation import ks_marginal_protocol
from .exceptions import ConfigError, InputError, SigflowError

DEFAULT_CONFIG = {
    "dataset": "sines",          # sines | noisy_sines | predator_prey | fbm | csv
    "n_series": 256,
    "length": 100,
    "channels": 5,
    "hurst": 0.7,
    "csv_path": "",
    "csv_stride": 1,
    "csv_channels": "",
    "basis": "fourier",
    "order": 2,
    "mirror": False,
    "epochs": 200,
    "batch_size": 128,
    "lr": 1e-3,
    "hidden": "64,64",
    "time_dim": 16,
    "beta_min": 0.1,
    "beta_max": 5.0,
    "normalization": "pca",
    "skip": "auto",              # auto | true | false
    "count": 256,
    "steps": 128,
    "timepoints": "25,50,75",
    "repeats": 1000,
    "ks_batch": 64,
    "seed": 0,
}


class StageError(SigflowError):
    """A pipeline stage failed; ``cause`` keeps the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def seed_for(root_seed: int, name: str) -> int:
    """Integer seed of the named stream derived from ``root_seed``."""
    ss = np.random.SeedSequence([int(root_seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stream(root_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(seed_for(root_seed, name))


def _coerce(key: str, raw):
    default = DEFAULT_CONFIG[key]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then ``key = value`` lines from ``path``, then ``overrides``.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    cfg = dict(DEFAULT_CONFIG)
    entries = []
    if path is not None:
        try:
            lines = Path(path).read_text().splitlines()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        for n, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{n}: expected key = value")
            entries.append((key.strip(), value))
    entries += list((overrides or {}).items())
    for key, value in entries:
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, value)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    for key in ("n_series", "length", "channels", "batch_size", "steps", "repeats", "ks_batch", "time_dim"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("epochs", "count", "order"):
        if cfg[key] < 0:
            raise ConfigError(f"{key} must be >= 0")
    if cfg["dataset"] not in ("sines", "noisy_sines", "predator_prey", "fbm", "csv"):
        raise ConfigError(f"unknown dataset {cfg['dataset']!r}")
    int_list(cfg["hidden"], "hidden")
    _skip(cfg["skip"])
    int_list(cfg["timepoints"], "timepoints")


def int_list(text, name: str = "list") -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers") from None


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def write_config(cfg: dict, path) -> None:
    lines = [f"{k} = {str(v).lower() if isinstance(v, bool) else v}" for k, v in sorted(cfg.items())]
    Path(path).write_text("\n".join(lines) + "\n")


# ---- artifact I/O -----------------------------------------------------------

def write_matrix(path, matrix: np.ndarray, header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.asarray(matrix, dtype=float):
            w.writerow([repr(float(v)) for v in row])


def read_matrix(path) -> tuple[list[str], np.ndarray]:
    header, data = datagen.read_numeric_csv(path)
    if header is None:
        raise InputError(f"{path}: expected a header row")
    return header, data.reshape(-1, len(header))


def sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def embedding_meta(emb: LogSigEmbedding) -> dict:
    return {"fingerprint": emb.fingerprint(), "times": [float(t) for t in emb.times],
            "channels": emb.channels, "basis": emb.basis, "order": emb.order, "mirror": emb.mirror,
            "columns": emb.column_names()}


def embedding_from_meta(meta: dict) -> LogSigEmbedding:
    try:
        emb = LogSigEmbedding(meta["times"], meta["channels"], meta["basis"], meta["order"], meta["mirror"])
    except KeyError as exc:
        raise InputError(f"embedding metadata lacks {exc}") from None
    emb.check_compatible(meta.get("fingerprint"))
    return emb


def write_coefficients(emb: LogSigEmbedding, vectors: np.ndarray, path) -> None:
    """Basis coefficients of generated vectors, one row per series, plus a
    JSON sidecar with the augmentation needed to evaluate them."""
    coeffs = emb.coefficients(vectors)
    obj = emb.coeff_objects(coeffs)
    names = obj.names()
    header = [f"ch{c}:{nm}" for c in range(emb.channels) for nm in names]
    write_matrix(path, coeffs.reshape(coeffs.shape[0], -1), header)
    write_json(sidecar(path), {"basis": emb.basis, "order": emb.order, "names": names,
                               "channels": emb.channels, "augmentation": obj.augmentation.to_dict()})


# ---- stages -----------------------------------------------------------------

def make_dataset(cfg: dict) -> datagen.PathSet:
    seed = seed_for(cfg["seed"], "data")
    kind = cfg["dataset"]
    if kind == "sines":
        return datagen.gen_sines(cfg["n_series"], cfg["length"], cfg["channels"], seed)
    if kind == "noisy_sines":
        return datagen.gen_noisy_sines(cfg["n_series"], cfg["length"], seed=seed)
    if kind == "predator_prey":
        return datagen.gen_predator_prey(cfg["n_series"], cfg["length"], seed)
    if kind == "fbm":
        return datagen.gen_fbm(cfg["n_series"], cfg["length"], cfg["hurst"], seed)
    if not cfg["csv_path"]:
        raise ConfigError("dataset = csv needs csv_path")
    chans = int_list(cfg["csv_channels"], "csv_channels") or None
    return datagen.ingest_csv(cfg["csv_path"], cfg["length"], cfg["csv_stride"], chans)


def train_checkpoint(cfg: dict, vectors: np.ndarray, fingerprint: dict) -> diffusion.ScoreCheckpoint:
    return diffusion.train(
        vectors, epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
        seed=seed_for(cfg["seed"], "train"),
        schedule=diffusion.NoiseSchedule(cfg["beta_min"], cfg["beta_max"]),
        hidden=tuple(int_list(cfg["hidden"])), time_dim=cfg["time_dim"],
        normalization=cfg["normalization"], skip=_skip(cfg["skip"]), fingerprint=fingerprint)


def _skip(value):
    v = str(value).strip().lower()
    if v == "auto":
        return "auto"
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigError(f"skip must be auto, true or false, not {value!r}")


def sample_vectors(ckpt: diffusion.ScoreCheckpoint, count: int, root_seed: int, steps: int) -> np.ndarray:
    return diffusion.sample(ckpt, count, stream(root_seed, "sample"), steps)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: dict, out_dir) -> dict:
    """Run every stage, writing artifacts to ``out_dir``; returns the manifest.

    A failing stage raises :class:`StageError`; artifacts written by earlier
    stages stay on disk.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    stages: list[str] = []
    state: dict = {}

    def put(name: str) -> Path:
        files[name] = ""
        return out / name

    def stage(name, fn):
        try:
            fn()
        except (SigflowError, ValueError, ArithmeticError, MemoryError, OSError) as exc:
            raise StageError(name, exc) from exc
        stages.append(name)

    write_config(cfg, put("config.txt"))

    def s_data():
        ps = make_dataset(cfg)
        if ps.count == 0:
            raise InputError("dataset is empty")
        state["data"] = ps
        datagen.write_paths_csv(ps, put("data.csv"))

    def s_embed():
        ps = state["data"]
        emb = LogSigEmbedding(ps.times, ps.channels, cfg["basis"], cfg["order"], cfg["mirror"])
        state["emb"], state["vectors"] = emb, emb.embed(ps.values)
        write_matrix(put("embedding.csv"), state["vectors"], emb.column_names())
        write_json(put("embedding.json"), embedding_meta(emb))

    def s_train():
        emb = state["emb"]
        state["ckpt"] = train_checkpoint(cfg, state["vectors"], emb.fingerprint())
        state["ckpt"].save(put("checkpoint.npz"))
        write_matrix(put("loss_history.csv"), state["ckpt"].loss_history[:, None], ["loss"])

    def s_sample():
        emb, ckpt = state["emb"], state["ckpt"]
        state["gen_vectors"] = sample_vectors(ckpt, cfg["count"], cfg["seed"], cfg["steps"])
        write_matrix(put("samples.csv"), state["gen_vectors"], emb.column_names())
        write_json(put("samples.json"), {"fingerprint": ckpt.fingerprint, "count": cfg["count"]})

    def s_invert():
        emb = state["emb"]
        emb.check_compatible(state["ckpt"].fingerprint, state["gen_vectors"].shape[1])
        write_coefficients(emb, state["gen_vectors"], put("coefficients.csv"))
        files["coefficients.json"] = ""
        state["gen"] = datagen.PathSet(emb.times, emb.invert(state["gen_vectors"]))
        datagen.write_paths_csv(state["gen"], put("generated.csv"))

    def s_eval():
        report = ks_marginal_protocol(state["data"].values, state["gen"].values,
                                      int_list(cfg["timepoints"]), cfg["repeats"], cfg["ks_batch"],
                                      stream(cfg["seed"], "eval"))
        put("ks_report.json").write_text(report.to_json() + "\n")
        report.write_csv(put("ks_report.csv"))
        state["report"] = report

    stage("data", s_data)
    stage("embed", s_embed)
    stage("train", s_train)
    if cfg["count"] > 0:
        stage("sample", s_sample)
        stage("invert", s_invert)
        stage("eval", s_eval)

    manifest = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "fingerprint": state["emb"].fingerprint(),
        "versions": {"sigflow": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "stages": stages,
        "files": {name: _sha256(out / name) for name in sorted(files)},
    }
    if "report" in state:
        manifest["ks"] = {"mean_ks": state["report"].mean_ks, "type1_rate": state["report"].type1_rate}
    write_json(out / "manifest.json", manifest)
    return manifest
