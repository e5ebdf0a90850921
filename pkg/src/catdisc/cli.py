"""Command-line pipeline: synth, train, assign, eval, and the full run.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Artifacts are written under a `.incomplete` suffix and renamed on success,
so an interrupted run leaves only suffixed partial files behind.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .data import (
    EmbeddingIOError,
    SplitSpec,
    SynthSpec,
    generate_synthetic,
    load_embeddings,
    make_split,
    save_embeddings,
)
from .evaluation import evaluate, format_report, format_report_kv
from .graph import Partition, build_graph, dump_edges, louvain
from .trainer import (
    TrainingDiverged,
    embed,
    load_checkpoint,
    save_checkpoint,
    train,
)


@contextlib.contextmanager
def artifact(path: Path):
    """Yield a `.incomplete` path; rename to the target only on success."""
    tmp = path.with_name(path.name + ".incomplete")
    yield tmp
    tmp.replace(path)


def _write_config(cfg: RunConfig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.to_text(), encoding="utf-8")


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            v = getattr(args, f.name)
            if v is not None:
                setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau-sup", type=float, dest="tau_sup")
    p.add_argument("--tau-u", type=float, dest="tau_u")
    p.add_argument("--sinkhorn-epsilon", type=float, dest="sinkhorn_epsilon")
    p.add_argument("--sinkhorn-iters", type=int, dest="sinkhorn_iters")
    p.add_argument("--weak-noise-sigma", type=float, dest="weak_noise_sigma")
    p.add_argument("--strong-noise-sigma", type=float, dest="strong_noise_sigma")
    p.add_argument("--strong-mask-fraction", type=float, dest="strong_mask_fraction")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--k-proto", type=int, dest="k_proto")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--out-dim", type=int, dest="out_dim")
    p.add_argument("--seed", type=int)
    p.add_argument("--m", type=int, dest="m_neighbors")
    p.add_argument("--min-gain", type=float, dest="min_gain")
    for term in ("sup", "js", "swapped"):
        group = p.add_mutually_exclusive_group()
        group.add_argument(
            f"--enable-{term}", dest=f"enable_{term}", action="store_true", default=None
        )
        group.add_argument(
            f"--disable-{term}", dest=f"enable_{term}", action="store_false", default=None
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catdisc",
        description="Generalized category discovery over precomputed embeddings",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a split synthetic dataset file")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--stddev", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--known-class-fraction", type=float, default=0.5)
    p.add_argument("--labeled-fraction", type=float, default=0.5)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("train", help="train the projection head and prototypes")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("-o", "--out-dir", required=True, dest="out_dir")
    _add_config_flags(p)

    p = sub.add_parser("assign", help="embed, build the graph, run Louvain")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--m", type=int, default=5, dest="m_neighbors")
    p.add_argument("--min-gain", type=float, default=1e-7, dest="min_gain")
    p.add_argument("--graph-dump", dest="graph_dump")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("eval", help="score a partition file against ground truth")
    p.add_argument("--partition", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")

    p = sub.add_parser("pipeline", help="train, assign, and evaluate in one run")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("-o", "--out-dir", required=True, dest="out_dir")
    p.add_argument("--graph-dump", dest="graph_dump")
    _add_config_flags(p)
    return parser


def cmd_synth(args) -> int:
    spec = SynthSpec(
        num_classes=args.classes,
        points_per_class=args.per_class,
        dim=args.dim,
        center_separation=args.separation,
        cluster_stddev=args.stddev,
        seed=args.seed,
    )
    split = SplitSpec(
        known_class_fraction=args.known_class_fraction,
        labeled_instance_fraction=args.labeled_fraction,
        seed=args.seed,
    )
    dataset = make_split(generate_synthetic(spec), split)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = out.with_name(out.name + ".config.txt")
    sidecar.write_text(
        "".join(
            f"{k}={v}\n"
            for k, v in vars(args).items()
            if k not in ("command", "func") and v is not None
        ),
        encoding="utf-8",
    )
    with artifact(out) as tmp:
        save_embeddings(dataset, tmp, format=args.format)
    print(f"wrote {out} (N={dataset.n}, D={dataset.dim})")
    return 0


def write_history(path: Path, history) -> None:
    with artifact(path) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in history:
                fh.write(
                    f"epoch={rec.epoch} total={rec.total:.6f} sup={rec.sup:.6f} "
                    f"js={rec.js:.6f} swap={rec.swap:.6f} lr={rec.lr:.6f}\n"
                )


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    cfg.data = args.data
    cfg.out_dir = args.out_dir
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_config(cfg, out_dir / "config.txt")
    dataset = load_embeddings(args.data, format=args.format)
    head, protos, history = train(dataset, cfg.train_spec())
    with artifact(out_dir / "checkpoint.gcdh") as tmp:
        save_checkpoint(tmp, head, protos, cfg.train_spec())
    write_history(out_dir / "history.txt", history)
    print(f"wrote {out_dir / 'checkpoint.gcdh'} ({len(history)} epochs)")
    return 0


def write_partition(path: Path, partition: Partition) -> None:
    with artifact(path) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            for i, c in enumerate(partition.labels):
                fh.write(f"{i}\t{int(c)}\n")
            fh.write(f"k={partition.num_communities}\n")


def load_partition(path: str | Path) -> Partition:
    labels = {}
    footer_k = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("k="):
            footer_k = int(line[2:])
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ValueError(f"{path}: line {lineno}: expected id<TAB>community")
        instance = int(cells[0])
        if instance in labels:
            raise ValueError(f"{path}: line {lineno}: duplicate instance id {instance}")
        labels[instance] = int(cells[1])
    if footer_k is None:
        raise ValueError(f"{path}: missing k= footer")
    n = len(labels)
    if sorted(labels) != list(range(n)):
        raise ValueError(f"{path}: instance ids must be exactly 0..{n - 1}")
    arr = np.array([labels[i] for i in range(n)], dtype=np.int64)
    if np.unique(arr).size != footer_k:
        raise ValueError(f"{path}: footer k={footer_k} != {np.unique(arr).size} distinct ids")
    return Partition(labels=arr, num_communities=footer_k)


def _assign(head, dataset, m: int, min_gain: float, graph_dump: str | None):
    z = embed(dataset, head)
    graph = build_graph(z, dataset, m)
    if graph_dump:
        dump_path = Path(graph_dump)
        with artifact(dump_path) as tmp:
            tmp.write_text(dump_edges(graph), encoding="utf-8")
    return louvain(graph, min_gain=min_gain)


def cmd_assign(args) -> int:
    head, _, _ = load_checkpoint(args.checkpoint)
    dataset = load_embeddings(args.data, format=args.format)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = out.with_name(out.name + ".config.txt")
    sidecar.write_text(
        f"checkpoint={args.checkpoint}\ndata={args.data}\nm_neighbors={args.m_neighbors}\n"
        f"min_gain={args.min_gain}\n",
        encoding="utf-8",
    )
    partition = _assign(head, dataset, args.m_neighbors, args.min_gain, args.graph_dump)
    write_partition(out, partition)
    print(f"wrote {out} (k={partition.num_communities})")
    return 0


def cmd_eval(args) -> int:
    partition = load_partition(args.partition)
    dataset = load_embeddings(args.data, format=args.format)
    if partition.labels.shape[0] != dataset.n:
        raise ValueError(
            f"partition has {partition.labels.shape[0]} instances, data file has {dataset.n}"
        )
    report = evaluate(partition, dataset)
    print(format_report(report), end="")
    print(format_report_kv(report), end="")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args)
    cfg.data = args.data
    cfg.out_dir = args.out_dir
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_config(cfg, out_dir / "config.txt")
    dataset = load_embeddings(args.data, format=args.format)
    head, protos, history = train(dataset, cfg.train_spec())
    with artifact(out_dir / "checkpoint.gcdh") as tmp:
        save_checkpoint(tmp, head, protos, cfg.train_spec())
    write_history(out_dir / "history.txt", history)
    partition = _assign(head, dataset, cfg.m_neighbors, cfg.min_gain, args.graph_dump)
    write_partition(out_dir / "partition.tsv", partition)
    report = evaluate(partition, dataset)
    with artifact(out_dir / "report.txt") as tmp:
        tmp.write_text(format_report(report) + format_report_kv(report), encoding="utf-8")
    print(format_report(report), end="")
    print(format_report_kv(report), end="")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "assign": cmd_assign,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EmbeddingIOError, OSError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
