"""Command-line entry point.

One subcommand per workflow step: analyze, split, build-vocab, train,
translate, evaluate, cms-serve, cms-export. Machine-readable output goes
to stdout and is byte-identical across runs with the same inputs and
seeds; diagnostics go to stderr, with verbosity picked by the FFR_LOG
environment variable (debug, info, warn).

Exit codes: 0 success, 1 usage error, 2 data or IO error, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import SplitSpec, analyze, load_corpus, save_corpus, split
from .errors import (
    FfrError,
    NonFiniteGradientError,
    NotRecordedError,
    ShapeError,
)
from .metrics import evaluate_files
from .model import ModelConfig, greedy_decode
from .tokenizer import DiacriticMode, build_vocab, encode, tokenize
from .training import (
    TrainConfig,
    load_checkpoint,
    parse_train_config_file,
    save_checkpoint,
    train,
)

log = logging.getLogger("ffr")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_INTERNAL_ERRORS = (ShapeError, NotRecordedError, NonFiniteGradientError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _mode(value: str) -> DiacriticMode:
    return DiacriticMode(value)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ffr", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("analyze", help="length-bucket statistics of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("split", help="seeded train/val/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train", required=True, type=int)
    p.add_argument("--val", required=True, type=int)
    p.add_argument("--test", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-vocab", help="frequency-ordered vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--side", required=True, choices=["src", "tgt"])
    p.add_argument("--diacritics", required=True,
                   choices=["preserve", "strip"])
    p.add_argument("--min-count", required=True, type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a translation model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("translate", help="greedy-decode a file of sentences")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-len", type=int, default=None)

    p = sub.add_parser("evaluate", help="BLEU/GLEU against a reference file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--mode", choices=["corpus", "sentence"], default="corpus")
    p.add_argument("--metric", choices=["bleu", "gleu", "both"],
                   default="both")
    p.add_argument("--diacritics", required=True,
                   choices=["preserve", "strip"])
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("cms-serve", help="run the scoring service")
    p.add_argument("--port", required=True, type=int)
    p.add_argument("--data-dir", required=True)

    p = sub.add_parser("cms-export", help="write a session's scores as CSV")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_analyze(args) -> int:
    corpus = load_corpus(args.corpus)
    log.info("loaded %d pairs from %s", len(corpus.pairs), args.corpus)
    stats = analyze(corpus)
    sys.stdout.write(stats.to_json() + "\n" if args.json else stats.to_text())
    return EXIT_OK


def _cmd_split(args) -> int:
    corpus = load_corpus(args.corpus)
    spec = SplitSpec(train_n=args.train, val_n=args.val,
                     test_n=args.test, seed=args.seed)
    parts = split(corpus, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        path = out_dir / f"{name}.tsv"
        save_corpus(part, path)
        sys.stdout.write(f"{name}\t{len(part.pairs)}\t{path}\n")
    return EXIT_OK


def _cmd_build_vocab(args) -> int:
    corpus = load_corpus(args.corpus)
    mode = _mode(args.diacritics)
    texts = (
        [pair.source for pair in corpus.pairs]
        if args.side == "src"
        else [pair.target for pair in corpus.pairs]
    )
    vocab = build_vocab(texts, mode, min_count=args.min_count)
    vocab.save(args.out)
    sys.stdout.write(f"{len(vocab)}\t{args.out}\n")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = parse_train_config_file(args.config)
    mode = _mode(cfg.get("diacritics", "preserve"))
    train_corpus = load_corpus(cfg["train_corpus"])
    val_corpus = load_corpus(cfg["val_corpus"])
    min_count = cfg.get("min_count", 1)
    src_vocab = build_vocab((p.source for p in train_corpus.pairs), mode,
                            min_count=min_count)
    tgt_vocab = build_vocab((p.target for p in train_corpus.pairs), mode,
                            min_count=min_count)
    log.info("vocabulary sizes: src %d, tgt %d", len(src_vocab), len(tgt_vocab))

    model_config = ModelConfig(
        src_vocab_size=len(src_vocab),
        tgt_vocab_size=len(tgt_vocab),
        emb_dim=cfg.get("emb_dim", 512),
        hidden_dim=cfg.get("hidden_dim", 128),
        attn_dim=cfg.get("attn_dim", 30),
        max_decode_len=cfg.get("max_decode_len", 112),
    )
    train_config = TrainConfig(
        epochs=cfg["epochs"],
        learning_rate=cfg.get("learning_rate", 1e-3),
        batch_size=cfg.get("batch_size", 32),
        teacher_forcing_ratio=cfg.get("teacher_forcing_ratio", 1.0),
        grad_clip_norm=cfg.get("grad_clip_norm", 5.0),
        seed=cfg.get("seed", 0),
        patience=cfg.get("patience"),
    )
    sys.stdout.write(f"src_vocab\t{len(src_vocab)}\n"
                     f"tgt_vocab\t{len(tgt_vocab)}\n")
    checkpoint, report = train(train_corpus, val_corpus,
                               (src_vocab, tgt_vocab),
                               model_config, train_config)
    for i, epoch in enumerate(report.epochs, start=1):
        sys.stdout.write(
            f"epoch\t{i}\ttrain_loss\t{epoch.train_loss:.6f}"
            f"\tval_loss\t{epoch.val_loss:.6f}\n"
        )
        log.debug("epoch %d took %.2fs", i, epoch.wall_seconds)
    save_checkpoint(checkpoint, args.out)
    sys.stdout.write(f"checkpoint\t{args.out}\n")
    return EXIT_OK


def _cmd_translate(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    params = checkpoint.to_params()
    mode = checkpoint.mode
    src_vocab, tgt_vocab = checkpoint.src_vocab, checkpoint.tgt_vocab
    text = Path(args.input).read_text(encoding="utf-8")
    if text.startswith("﻿"):
        text = text[1:]
    out_lines = []
    for line in text.splitlines():
        if not line.strip():
            out_lines.append("")
            continue
        encoded = encode(tokenize(line, mode), src_vocab)
        ids = greedy_decode(encoded, params, max_len=args.max_len)
        out_lines.append(" ".join(tgt_vocab.tokens[i] for i in ids))
    Path(args.output).write_text(
        "".join(line + "\n" for line in out_lines), encoding="utf-8"
    )
    log.info("translated %d lines", len(out_lines))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    report = evaluate_files(
        args.hyp, args.ref, mode=args.mode,
        diacritics=_mode(args.diacritics), metric=args.metric,
    )
    sys.stdout.write(report.to_json() + "\n" if args.json else report.to_text())
    return EXIT_OK


def _cmd_cms_serve(args) -> int:
    import uvicorn

    from .cms.app import create_app

    app = create_app(args.data_dir)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_cms_export(args) -> int:
    from .cms.store import CmsStore

    store = CmsStore(args.data_dir)
    csv_text = store.export_csv(args.session)
    Path(args.out).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(f"{args.out}\n")
    return EXIT_OK


_COMMANDS = {
    "analyze": _cmd_analyze,
    "split": _cmd_split,
    "build-vocab": _cmd_build_vocab,
    "train": _cmd_train,
    "translate": _cmd_translate,
    "evaluate": _cmd_evaluate,
    "cms-serve": _cmd_cms_serve,
    "cms-export": _cmd_cms_export,
}

_LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO,
               "warn": logging.WARNING}


def _configure_logging() -> None:
    raw = os.environ.get("FFR_LOG", "warn").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        print(f"ffr: ignoring unknown FFR_LOG value {raw!r}", file=sys.stderr)
        level = logging.WARNING
    # configure only our own logger so embedding (tests, other apps)
    # keeps its root handlers; rebuild so the current stderr is used
    log.setLevel(level)
    log.propagate = False
    for handler in list(log.handlers):
        log.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter("%(levelname)s %(name)s: %(message)s")
    )
    log.addHandler(handler)


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ffr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except _INTERNAL_ERRORS as exc:
        print(f"ffr: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (FfrError, OSError, UnicodeDecodeError) as exc:
        print(f"ffr: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - true bugs land here
        print(f"ffr: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
