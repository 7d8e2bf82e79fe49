"""Command-line interface.

Every subcommand reads the same ``key = value`` configuration as the
pipeline (``--config FILE`` plus repeated ``--set key=value``); dedicated
flags are shortcuts for the matching keys. Stages that need randomness use
the named seed streams of :mod:`sigflow.pipeline`, so running the stages one
by one reproduces the pipeline's artifacts.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, datagen, diffusion, pipeline
from .evaluation import approximation_sweep, ks_marginal_protocol, write_table
from .exceptions import ConfigError, InputError, MemoryBudgetError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag -> (config key, argparse kwargs)
_FLAGS = {
    "dataset": ("dataset", {"choices": ["sines", "noisy_sines", "predator_prey", "fbm", "csv"]}),
    "n-series": ("n_series", {"type": int}),
    "length": ("length", {"type": int}),
    "channels": ("channels", {"type": int}),
    "hurst": ("hurst", {"type": float}),
    "csv": ("csv_path", {}),
    "stride": ("csv_stride", {"type": int}),
    "columns": ("csv_channels", {"help": "comma-separated column indices"}),
    "basis": ("basis", {"help": "fourier, legendre, chebyshev, jacobi(a,b)"}),
    "order": ("order", {"type": int}),
    "mirror": ("mirror", {"action": "store_const", "const": "true"}),
    "epochs": ("epochs", {"type": int}),
    "batch-size": ("batch_size", {"type": int}),
    "lr": ("lr", {"type": float}),
    "hidden": ("hidden", {"help": "comma-separated layer widths"}),
    "normalization": ("normalization", {"choices": ["pca", "zscore"]}),
    "skip": ("skip", {"choices": ["auto", "true", "false"], "help": "Gaussian skip connection"}),
    "count": ("count", {"type": int}),
    "steps": ("steps", {"type": int}),
    "timepoints": ("timepoints", {"help": "comma-separated sample indices"}),
    "repeats": ("repeats", {"type": int}),
    "ks-batch": ("ks_batch", {"type": int}),
}

_STAGE_FLAGS = {
    "gen-data": ["dataset", "n-series", "length", "channels", "hurst", "csv", "stride", "columns"],
    "embed": ["basis", "order", "mirror"],
    "train": ["epochs", "batch-size", "lr", "hidden", "normalization", "skip"],
    "sample": ["count", "steps"],
    "invert": [],
    "eval": ["timepoints", "repeats", "ks-batch"],
    "pipeline": list(_FLAGS),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sigflow", description="Signature inversion and log-signature diffusion.")
    parser.add_argument("--version", action="version", version=f"sigflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--seed", type=int, help="root seed")
        for flag in _STAGE_FLAGS[name]:
            key, kw = _FLAGS[flag]
            if kw.get("action") != "store_const":
                kw = {"metavar": key.upper(), **kw}
            p.add_argument(f"--{flag}", dest=f"cfg_{key}", **kw)
        return p

    p = add("gen-data", "generate a synthetic dataset or window a CSV file")
    p.add_argument("--out", required=True, help="output CSV (series,time,ch0,...)")

    p = add("embed", "per-channel log-signature embedding of a path CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="embedding CSV; metadata goes to the .json sidecar")

    p = add("train", "train the score model on an embedding CSV")
    p.add_argument("--embedding", required=True)
    p.add_argument("--out", required=True, help="checkpoint file (.npz)")

    p = add("sample", "sample log-signature vectors from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embedding-meta", help="embedding .json sidecar, for column names and checks")
    p.add_argument("--out", required=True)

    p = add("invert", "map log-signature vectors back to paths")
    p.add_argument("--samples", required=True)
    p.add_argument("--embedding-meta", required=True)
    p.add_argument("--out", required=True, help="generated path CSV")
    p.add_argument("--coefficients", help="also write basis coefficients to this CSV")

    p = add("eval", "KS marginal protocol, or an approximation sweep with --sweep")
    p.add_argument("--real", help="reference path CSV")
    p.add_argument("--generated", help="generated path CSV")
    p.add_argument("--sweep", action="store_true", help="L2 reconstruction error table instead of KS")
    p.add_argument("--data", help="path CSV for --sweep")
    p.add_argument("--bases", default="fourier,legendre", help="bases for --sweep, ';'-separated if "
                   "any contains a comma")
    p.add_argument("--orders", default="2,4,6,8,10")
    p.add_argument("--no-mirror", action="store_true", help="disable Fourier mirroring in --sweep")
    p.add_argument("--out", required=True)

    p = add("pipeline", "run every stage and write all artifacts")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _config(args) -> dict:
    overrides = pipeline.parse_overrides(args.set)
    for name, value in vars(args).items():
        if name.startswith("cfg_") and value is not None:
            overrides[name[4:]] = str(value)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return pipeline.load_config(args.config, overrides)


def _split_bases(text: str) -> list[str]:
    if ";" in text:
        return [b.strip() for b in text.split(";") if b.strip()]
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def cmd_gen_data(args, cfg):
    ps = pipeline.make_dataset(cfg)
    datagen.write_paths_csv(ps, args.out)
    print(f"wrote {ps.count} series x {ps.length} samples x {ps.channels} channels to {args.out}")


def cmd_embed(args, cfg):
    ps = datagen.read_paths_csv(args.data)
    emb = pipeline.LogSigEmbedding(ps.times, ps.channels, cfg["basis"], cfg["order"], cfg["mirror"])
    vectors = emb.embed(ps.values)
    pipeline.write_matrix(args.out, vectors, emb.column_names())
    pipeline.write_json(pipeline.sidecar(args.out), pipeline.embedding_meta(emb))
    print(f"wrote {vectors.shape[0]} vectors of width {emb.width} (depth {emb.depth}) to {args.out}")


def cmd_train(args, cfg):
    _, vectors = pipeline.read_matrix(args.embedding)
    meta_path = pipeline.sidecar(args.embedding)
    fingerprint = pipeline.read_json(meta_path)["fingerprint"] if meta_path.exists() else {}
    ckpt = pipeline.train_checkpoint(cfg, vectors, fingerprint)
    ckpt.save(args.out)
    last = f", final loss {ckpt.loss_history[-1]:.4f}" if len(ckpt.loss_history) else ""
    print(f"trained {cfg['epochs']} epochs on {vectors.shape[0]} vectors{last}; saved {args.out}")


def cmd_sample(args, cfg):
    ckpt = diffusion.ScoreCheckpoint.load(args.checkpoint)
    header = [f"x{i}" for i in range(ckpt.width)]
    if args.embedding_meta:
        emb = pipeline.embedding_from_meta(pipeline.read_json(args.embedding_meta))
        emb.check_compatible(ckpt.fingerprint, ckpt.width)
        header = emb.column_names()
    vectors = pipeline.sample_vectors(ckpt, cfg["count"], cfg["seed"], cfg["steps"])
    pipeline.write_matrix(args.out, vectors, header)
    pipeline.write_json(pipeline.sidecar(args.out), {"fingerprint": ckpt.fingerprint, "count": cfg["count"]})
    print(f"wrote {vectors.shape[0]} samples to {args.out}")


def cmd_invert(args, cfg):
    emb = pipeline.embedding_from_meta(pipeline.read_json(args.embedding_meta))
    _, vectors = pipeline.read_matrix(args.samples)
    meta_path = pipeline.sidecar(args.samples)
    fingerprint = pipeline.read_json(meta_path).get("fingerprint") if meta_path.exists() else None
    emb.check_compatible(fingerprint, vectors.shape[1])
    if args.coefficients:
        pipeline.write_coefficients(emb, vectors, args.coefficients)
    ps = datagen.PathSet(emb.times, emb.invert(vectors) if len(vectors) else
                         np.zeros((0, len(emb.times), emb.channels)))
    datagen.write_paths_csv(ps, args.out)
    print(f"wrote {ps.count} reconstructed series to {args.out}")


def cmd_eval(args, cfg):
    if args.sweep:
        if not args.data:
            raise ConfigError("--sweep needs --data")
        ps = datagen.read_paths_csv(args.data)
        values = np.moveaxis(ps.values, 2, 1).reshape(-1, ps.length)
        rows = approximation_sweep(values, _split_bases(args.bases),
                                   pipeline.int_list(args.orders, "orders"), ps.times,
                                   mirror=not args.no_mirror)
        write_table(rows, args.out)
        for r in rows:
            print(f"{r['basis']:>16s}  N={r['order']:<3d} mean L2 {r['mean_l2']:.6f}")
        return
    if not (args.real and args.generated):
        raise ConfigError("KS evaluation needs --real and --generated")
    real = datagen.read_paths_csv(args.real)
    gen = datagen.read_paths_csv(args.generated)
    report = ks_marginal_protocol(real.values, gen.values, pipeline.int_list(cfg["timepoints"]),
                                  cfg["repeats"], cfg["ks_batch"], pipeline.stream(cfg["seed"], "eval"))
    out = Path(args.out)
    out.write_text(report.to_json() + "\n")
    report.write_csv(out.with_suffix(".csv"))
    print(f"mean KS {report.mean_ks:.4f}, type I rate {report.type1_rate:.4f}")


def cmd_pipeline(args, cfg):
    manifest = pipeline.run_pipeline(cfg, args.out)
    print(f"stages: {', '.join(manifest['stages'])}")
    if "ks" in manifest:
        print(f"mean KS {manifest['ks']['mean_ks']:.4f}, type I rate {manifest['ks']['type1_rate']:.4f}")
    print(json.dumps({"config_hash": manifest["config_hash"], "out": str(args.out)}))


COMMANDS = {"gen-data": cmd_gen_data, "embed": cmd_embed, "train": cmd_train, "sample": cmd_sample,
            "invert": cmd_invert, "eval": cmd_eval, "pipeline": cmd_pipeline}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, pipeline.StageError):
        exc = exc.cause
    if isinstance(exc, (NumericalError, MemoryBudgetError, ArithmeticError, MemoryError)):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except (InputError, ConfigError, ValueError, OSError, KeyError, ArithmeticError, MemoryError,
            pipeline.StageError) as exc:
        print(f"sigflow {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
