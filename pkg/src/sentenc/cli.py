"""Command-line surface: mine, train, encode, eval.

Exit codes: 0 success, 1 I/O failure, 2 config error, 3 numeric divergence.
Every command is deterministic given (config, seed); the master seed feeds
each stage through a named sub-stream, so --threads never changes outputs
(work is executed in a fixed serial order regardless of the cap).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ConfigError, RunConfig, load_run_config
from .corpus import (
    CorpusError,
    read_eval_dataset,
    read_pairs,
    read_parallel_moses,
    read_parallel_tsv,
    write_pairs,
)
from .encoder import encode, build_vocabulary, init_model, load_model, save_model
from .evalharness import EvalTask, evaluate
from .mining import MiningStats, hashed_ngram_encoder, mine, precomputed_encoder
from .numeric import SeededRng, _derive_seed
from .training import DivergenceError, train, write_loss_csv

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _filter_encoder(config: RunConfig):
    fe = config.filter_encoder
    if fe.type == "hashed_ngram":
        return hashed_ngram_encoder(fe.dimension)
    return precomputed_encoder(fe.path)


def _corpus_reader(config: RunConfig):
    paths = config.paths
    if paths.corpus_tsv:
        return read_parallel_tsv(paths.corpus_tsv)
    if paths.corpus_source and paths.corpus_target:
        return read_parallel_moses(paths.corpus_source, paths.corpus_target)
    raise ConfigError("config must set paths.corpus_tsv or both Moses paths")


def cmd_mine(config: RunConfig) -> int:
    reader = _corpus_reader(config)
    enc = _filter_encoder(config)
    stats = MiningStats()
    config.mining.seed = _derive_seed(config.seed, "mine")
    pairs = mine(reader, enc, config.mining, stats)
    write_pairs(pairs, config.paths.pairs)
    print(f"input pairs:        {stats.input_pairs}")
    print(f"filtered survivors: {stats.kept_pairs}")
    print(f"groups >= 2:        {stats.groups}")
    print(f"emitted pairs:      {stats.emitted_pairs}")
    print(f"skipped lines:      {reader.skipped}")
    return EXIT_OK


def cmd_train(config: RunConfig) -> int:
    pairs = read_pairs(config.paths.pairs)
    if not pairs:
        raise CorpusError(f"no training pairs in {config.paths.pairs}")
    texts = [p.a for p in pairs] + [p.b for p in pairs]
    vocab = build_vocabulary(texts, config.min_count)
    rng = SeededRng(config.seed).substream("init")
    model = init_model(config.encoder, vocab, rng)
    config.training.seed = _derive_seed(config.seed, "train")
    history = train(pairs, model, config.training)
    save_model(model, config.paths.checkpoint)
    write_loss_csv(history, config.paths.loss_csv)
    print(f"trained {len(history)} steps; checkpoint at {config.paths.checkpoint}")
    return EXIT_OK


def cmd_encode(config: RunConfig, input_path: str, output_path: str) -> int:
    model = load_model(config.paths.checkpoint)
    try:
        lines = open(input_path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read input file {input_path}: {exc}") from exc
    with open(output_path, "w", encoding="utf-8", newline="\n") as out:
        for line in lines:
            vec = encode(line, model)
            out.write(line.replace("\t", " "))
            out.write("\t")
            out.write(" ".join(repr(v) for v in vec.tolist()))
            out.write("\n")
    print(f"encoded {len(lines)} sentences to {output_path}")
    return EXIT_OK


def cmd_eval(config: RunConfig) -> int:
    model = load_model(config.paths.checkpoint)
    seed = _derive_seed(config.seed, "probe") % 2**64
    rows = []
    for task_cfg in config.eval.tasks:
        task = EvalTask(
            name=task_cfg.name,
            kind=task_cfg.kind,
            arity=task_cfg.arity,
            train=read_eval_dataset(task_cfg.train, task_cfg.kind, task_cfg.arity),
            validation=read_eval_dataset(
                task_cfg.validation, task_cfg.kind, task_cfg.arity
            ),
            test=read_eval_dataset(task_cfg.test, task_cfg.kind, task_cfg.arity),
        )
        result = evaluate(
            model,
            task,
            lambda_grid=config.eval.lambda_grid,
            seed=seed,
            hidden=config.eval.hidden,
        )
        rows.append(result)
        print(f"{result.task}: {result.metric}={result.value:.4f} (l2={result.l2})")
    with open(config.paths.eval_report, "w", encoding="utf-8", newline="\n") as out:
        out.write("task,metric,value,lambda\n")
        for r in rows:
            out.write(f"{r.task},{r.metric},{r.value!r},{r.l2!r}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentenc",
        description="Mine paraphrases from bitext and train a sentence encoder.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mine", "train", "encode", "eval"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=1, help="worker cap")
        if name == "encode":
            p.add_argument("--input", required=True, help="one sentence per line")
            p.add_argument("--output", required=True, help="embeddings TSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.command == "mine":
            return cmd_mine(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "encode":
            return cmd_encode(config, args.input, args.output)
        return cmd_eval(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (CorpusError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
