"""Command-line entry point: ``affinecrack {generate,train,eval,attack,reference,sweep}``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, cipher
from .attack import ReferenceFrequencies, attack_accuracy, brute_force_attack, compute_reference
from .dataset import DatasetConfig, build_dataset, load_dataset, preprocess_corpus, read_corpus, save_dataset
from .errors import AffineCrackError, ConfigError, InputError, ShapeError
from .network import ModelConfig, load_params, save_params
from .training import CURVE_HEADER, TrainConfig, evaluate, train

log = logging.getLogger("affinecrack")

DEFAULT_SWEEP_LENGTHS = (100, 500, 1000)
LONG_LENGTH = 10_000
BUNDLED = "bundled"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _split(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}") from None
    if len(parts) != 3 or min(parts) < 0 or abs(sum(parts) - 1) > 1e-9:
        raise argparse.ArgumentTypeError("split must be three non-negative fractions summing to 1")
    return parts


def _lengths(text: str) -> list[int]:
    return [_positive_int(p) for p in text.split(",") if p.strip()]


def _corpus_arg(value: str | None) -> str | None:
    return None if value in (None, BUNDLED) else value


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_manifest(path: Path, args: argparse.Namespace, started: str, inputs: dict, outputs: dict, **extra) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "argv": sys.argv[1:],
        "started_at": started,
        "finished_at": _now(),
        **extra,
    }
    _atomic_write(path, json.dumps(manifest, indent=2, default=str) + "\n")


@contextmanager
def _figures_enabled(args):
    # matplotlib is imported lazily; plain CSV runs do not pay for it
    if getattr(args, "no_figures", True):
        yield None
    else:
        from . import plotting

        yield plotting


def cmd_generate(args) -> int:
    started = _now()
    cfg = DatasetConfig(
        seq_len=args.length,
        num_samples=args.samples,
        split_fractions=args.split,
        seed=args.seed,
        corpus_path=_corpus_arg(args.corpus),
    )
    ds = build_dataset(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    write_manifest(
        out.with_name(out.name + ".manifest.json"), args, started,
        inputs={"corpus": args.corpus}, outputs={"dataset": str(out)},
        corpus_digest=ds.corpus_digest,
    )
    n_train, n_val, n_test = ds.sizes
    print(f"wrote {out}: L={cfg.seq_len} train={n_train} validation={n_val} test={n_test}")
    return 0


def _train_to_dir(ds, mcfg: ModelConfig, tcfg: TrainConfig, out: Path, figures, figure_format: str):
    out.mkdir(parents=True, exist_ok=True)
    curves_path = out / "curves.csv"
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)

        def emit(rec):
            writer.writerow(rec.csv_row())
            fh.flush()

        params, report = train(ds, mcfg, tcfg, on_epoch=emit)
    save_params(params, mcfg, out / "model.afnn")
    _atomic_write(out / "report.json", report.to_json() + "\n")
    outputs = {
        "checkpoint": str(out / "model.afnn"),
        "curves": str(curves_path),
        "report": str(out / "report.json"),
    }
    if figures is not None:
        fig = figures.plot_learning_curves(
            report.epochs, out / f"curves.{figure_format}", title=f"L = {mcfg.seq_len}"
        )
        outputs["figure"] = str(fig)
    return params, report, outputs


def cmd_train(args) -> int:
    started = _now()
    ds = load_dataset(args.data)
    if args.length is not None and args.length != ds.config.seq_len:
        raise ConfigError(f"--length {args.length} but {args.data} holds L={ds.config.seq_len}")
    mcfg = ModelConfig(seq_len=ds.config.seq_len, embed_dim=args.embed, hidden_dim=args.hidden)
    tcfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        seed=args.seed, select_best_val=args.best_val,
    )
    out = Path(args.out)
    with _figures_enabled(args) as figures:
        _, report, outputs = _train_to_dir(ds, mcfg, tcfg, out, figures, args.figure_format)
    write_manifest(out / "manifest.json", args, started, inputs={"data": args.data}, outputs=outputs)
    print(f"test_accuracy={report.test_accuracy:.6g} test_loss={report.test_loss:.6g} -> {out}")
    return 0


def cmd_eval(args) -> int:
    ds = load_dataset(args.data)
    try:
        params, mcfg = load_params(args.checkpoint, seq_len=ds.config.seq_len)
    except ShapeError as exc:
        raise ConfigError(str(exc)) from exc
    part = ds.partition(args.partition)
    loss, acc = evaluate(params, mcfg, part)
    print(f"partition={args.partition} samples={len(part)} loss={loss:.6g} accuracy={acc:.6g}")
    return 0


def _reference(path: str | None) -> ReferenceFrequencies:
    if path is None:
        return compute_reference(read_corpus())
    return ReferenceFrequencies.load(path)


def parse_ciphertext(text: str) -> np.ndarray:
    letters = "".join(text.split())
    if not letters:
        raise InputError("ciphertext is empty")
    if not all("A" <= ch <= "Z" for ch in letters.upper()):
        raise InputError("ciphertext may only contain letters A-Z and whitespace")
    return preprocess_corpus(letters)


def cmd_attack(args) -> int:
    if args.input == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.input).read_text(errors="replace")
    tokens = parse_ciphertext(text)
    result = brute_force_attack(tokens, _reference(args.reference))
    best = result.best_key
    print(f"best key: a={best.a} b={best.b} index={result.best_index}")
    print("top candidates:")
    for rank, (idx, key, score) in enumerate(result.ranked(5), 1):
        print(f"  {rank}. index={idx:3d} a={key.a:2d} b={key.b:2d} chi2={score:.4f}")
    preview = cipher.render(cipher.decrypt(tokens[:60], best))
    print(f"plaintext: {preview}{'...' if tokens.size > 60 else ''}")
    return 0


def cmd_reference(args) -> int:
    ref = compute_reference(read_corpus(_corpus_arg(args.corpus)))
    ref.save(args.out)
    print(f"wrote {args.out} (corpus digest {ref.source_digest[:12]})")
    return 0


def derive_seed(master: int, length: int) -> int:
    return int(np.random.SeedSequence([master, length]).generate_state(1, np.uint64)[0])


def cmd_sweep(args) -> int:
    started = _now()
    lengths = list(args.lengths)
    if args.include_long and LONG_LENGTH not in lengths:
        lengths.append(LONG_LENGTH)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = read_corpus(_corpus_arg(args.corpus))
    reference = compute_reference(corpus)
    rows = []
    with _figures_enabled(args) as figures:
        for length in lengths:
            seed = derive_seed(args.seed, length)
            row = {"length": length, "test_accuracy": "", "classical_accuracy": "", "status": "ok"}
            try:
                if length >= LONG_LENGTH:
                    log.warning("L=%d: accuracy is expected to collapse at this length", length)
                cfg = DatasetConfig(
                    seq_len=length, num_samples=args.samples, seed=seed,
                    corpus_path=_corpus_arg(args.corpus),
                )
                ds = build_dataset(cfg, corpus=corpus)
                run_dir = out / f"L{length}"
                run_dir.mkdir(exist_ok=True)
                save_dataset(ds, run_dir / "data.afds")
                mcfg = ModelConfig(seq_len=length, embed_dim=args.embed, hidden_dim=args.hidden)
                tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=seed)
                params, report, _ = _train_to_dir(ds, mcfg, tcfg, run_dir, figures, args.figure_format)
                _, row["test_accuracy"] = evaluate(params, mcfg, ds.test)
                row["classical_accuracy"] = attack_accuracy(ds.test.ciphertext, ds.test.key_index, reference)
            except (AffineCrackError, OSError, MemoryError) as exc:
                log.error("L=%d failed: %s", length, exc)
                row["status"] = f"failed: {exc}"
            rows.append(row)
            log.info("L=%d %s", length, row)
        sweep_path = out / "sweep.csv"
        with open(sweep_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, ["length", "test_accuracy", "classical_accuracy", "status"], lineterminator="\n"
            )
            writer.writeheader()
            for row in rows:
                writer.writerow({k: f"{v:.6g}" if isinstance(v, float) else v for k, v in row.items()})
        outputs = {"sweep": str(sweep_path)}
        if figures is not None:
            outputs["figure"] = str(figures.plot_accuracy_vs_length(rows, out / f"accuracy_vs_length.{args.figure_format}"))
    write_manifest(out / "manifest.json", args, started, inputs={"corpus": args.corpus}, outputs=outputs)
    print(sweep_path.read_text(), end="")
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--batch-size", type=_positive_int, default=128)
    p.add_argument("--hidden", type=_positive_int, default=128)
    p.add_argument("--embed", type=_positive_int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--no-figures", action="store_true", help="skip rendering matplotlib figures")
    p.add_argument("--figure-format", choices=("png", "svg", "pdf"), default="png")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="BLAS threads; 1 is the bit-reproducible reference mode")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="affinecrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="build a .afds dataset")
    p.add_argument("--corpus", required=True, help=f"plain-text corpus, or '{BUNDLED}'")
    p.add_argument("--length", type=_positive_int, required=True)
    p.add_argument("--samples", type=_positive_int, default=20_000)
    p.add_argument("--split", type=_split, default=(0.8, 0.1, 0.1))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train the hybrid network")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--length", type=_positive_int, help="assert the dataset's sequence length")
    p.add_argument("--best-val", action="store_true", help="keep the best-validation epoch")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", choices=("train", "validation", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", parents=[common], help="chi-square brute-force attack")
    p.add_argument("--input", required=True, help="ciphertext file, or - for stdin")
    p.add_argument("--reference", help="reference table from 'affinecrack reference' (default: bundled corpus)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("reference", parents=[common], help="write an English letter-frequency table")
    p.add_argument("--corpus", default=BUNDLED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("sweep", parents=[common], help="accuracy vs. ciphertext length")
    p.add_argument("--lengths", type=_lengths, default=list(DEFAULT_SWEEP_LENGTHS))
    p.add_argument("--include-long", action="store_true", help=f"also run L={LONG_LENGTH}")
    p.add_argument("--samples", type=_positive_int, default=20_000)
    p.add_argument("--corpus", default=BUNDLED)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except (AffineCrackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
