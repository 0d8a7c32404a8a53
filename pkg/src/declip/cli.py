"""Command-line interface: clip, declip, train, eval, region-report, make-corpus.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .metrics import NoClippedRegionError, sdr, sdr_c, total_loss
from .signal import ClipMask, Waveform, clip, find_threshold, mask_from_clipped
from .wavio import WavError, read_mask, read_wav, write_mask, write_wav

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ["schema_version", "method", "sdr_level", "n_clips", "sdr", "sdr_c",
               "loss_l1", "loss_sc", "loss_mag", "loss_total"]
METHODS = ("identity-clipped", "aspade", "model")
DEFAULT_LEVELS = (1.0, 3.0, 7.0, 15.0, math.inf)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _level(text: str) -> float:
    if text.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _fmt_db(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.4f}"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DECLIP_NUM_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- clip

def cmd_clip(args) -> int:
    x, rate = read_wav(args.input)
    if args.theta is not None:
        theta = args.theta
    else:
        theta = find_threshold(x, args.target_sdr)
    y, mask = clip(Waveform(x, rate), theta)
    write_wav(args.output, y.samples, rate, fmt=args.format)
    write_mask(args.mask, mask)
    # report against what was actually written
    written, _ = read_wav(args.output, expected_rate=rate)
    print(f"theta: {theta:.6g}")
    print(f"clipped samples: {mask.n_clipped} / {len(mask)}")
    achieved = sdr(x, written)
    print(f"achieved SDR: {'INF' if math.isinf(achieved) else f'{achieved:.4f} dB'}")
    return EXIT_OK


# ---------------------------------------------------------------- declip

def _mask_for(y: np.ndarray, args) -> ClipMask:
    if args.mask:
        mask = read_mask(args.mask)
        if len(mask) != y.size:
            raise WavError(f"mask has {len(mask)} labels but the audio has {y.size} samples")
        return mask
    theta = args.theta if args.theta is not None else float(np.max(np.abs(y)))
    return mask_from_clipped(y, theta, eps=args.eps)


def cmd_declip(args) -> int:
    y, rate = read_wav(args.input)
    if args.method == "aspade":
        from .aspade import SpadeParams, declip_aspade

        params = SpadeParams(max_iters=args.max_iters)
        out, report = declip_aspade(Waveform(y, rate), _mask_for(y, args), params, return_report=True)
        print(f"frames solved: {report.n_solved}, converged: {report.n_converged}")
    else:
        if not args.checkpoint:
            raise ConfigError("--method model requires --checkpoint")
        from .nn import declip_forward, load_checkpoint

        model, _ = load_checkpoint(args.checkpoint)
        out = declip_forward(model, Waveform(y, rate))
    write_wav(args.output, out.samples, rate, fmt=args.format)
    return EXIT_OK


# ---------------------------------------------------------------- train

def _corpus_clips(args, split: str) -> list[np.ndarray]:
    from .train import CorpusSpec, generate_split, load_split

    if args.corpus:
        return load_split(args.corpus, split)
    spec = CorpusSpec(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test, seed=args.corpus_seed)
    return list(generate_split(spec, split))


def cmd_train(args) -> int:
    from .nn import DeclipModel, ModelConfig
    from .train import TrainConfig, train

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mcfg = ModelConfig(channels=args.channels, n_blocks=args.blocks, n_heads=args.heads,
                       use_tgram=not args.no_tgram, seed=args.seed)
    tcfg = TrainConfig(lr=args.lr, batch=args.batch, epochs=args.epochs, seed=args.seed,
                       crop=args.crop, patience=args.patience, grad_clip=args.grad_clip)
    model = DeclipModel(mcfg)
    report = train(model, _corpus_clips(args, "train"), _corpus_clips(args, "val"), tcfg,
                   checkpoint=out / "best.ckpt", report_path=out / "report.jsonl",
                   log=None if args.quiet else print)
    print(f"best epoch {report.best_epoch} (val loss {report.best_val:.6f}); {report.stopped}")
    print(f"checkpoint: {out / 'best.ckpt'}")
    if report.stopped.startswith("diverged"):
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- eval

def evaluate(clips, methods, levels, model=None, aspade_params=None) -> list[dict]:
    """One row per (method, level) with metric means over ``clips`` (file order)."""
    from .aspade import declip_aspade
    from .nn import declip_forward

    def one_clip(x):
        rows = {}
        for level in levels:
            theta = find_threshold(x, level)
            y, mask = clip(x, theta)
            for method in methods:
                if method == "identity-clipped":
                    est = y.samples
                elif method == "aspade":
                    est = declip_aspade(y, mask, aspade_params).samples
                else:
                    est = declip_forward(model, y).samples
                tot, parts = total_loss(x, est)
                try:
                    c = sdr_c(x, est, mask)
                except NoClippedRegionError:
                    c = math.nan
                rows[(method, level)] = (sdr(x, est), c, parts["l1"], sum(parts["sc"]), sum(parts["mag"]), tot)
        return rows

    clips = [np.asarray(c, dtype=np.float64) for c in clips]
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            per_clip = list(ex.map(one_clip, clips))
    else:
        per_clip = [one_clip(x) for x in clips]

    table = []
    for method in methods:
        for level in levels:
            vals = np.array([r[(method, level)] for r in per_clip])
            c = vals[:, 1]
            table.append({
                "method": method,
                "sdr_level": level,
                "n_clips": len(clips),
                "sdr": float(np.mean(vals[:, 0])),
                "sdr_c": math.nan if math.isinf(level) or np.isnan(c).any() else float(np.mean(c)),
                "loss_l1": float(np.mean(vals[:, 2])),
                "loss_sc": float(np.mean(vals[:, 3])),
                "loss_mag": float(np.mean(vals[:, 4])),
                "loss_total": float(np.mean(vals[:, 5])),
            })
    return table


def table_to_csv(table: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in table:
        w.writerow([
            CSV_SCHEMA_VERSION,
            row["method"],
            "INF" if math.isinf(row["sdr_level"]) else f"{row['sdr_level']:g}",
            row["n_clips"],
            _fmt_db(row["sdr"]),
            "" if math.isnan(row["sdr_c"]) else _fmt_db(row["sdr_c"]),
            f"{row['loss_l1']:.6f}",
            f"{row['loss_sc']:.6f}",
            f"{row['loss_mag']:.6f}",
            f"{row['loss_total']:.6f}",
        ])
    return buf.getvalue()


def table_to_text(table: list[dict]) -> str:
    levels = []
    for r in table:
        if r["sdr_level"] not in levels:
            levels.append(r["sdr_level"])
    head = ["INF" if math.isinf(v) else f"{v:g} dB" for v in levels]
    lines = []
    for metric in ("sdr", "sdr_c"):
        lines.append(f"{metric.upper():<18}" + "".join(f"{h:>10}" for h in head))
        for method in dict.fromkeys(r["method"] for r in table):
            cells = []
            for lv in levels:
                r = next(r for r in table if r["method"] == method and r["sdr_level"] == lv)
                v = r[metric]
                cells.append("-" if math.isnan(v) else ("inf" if math.isinf(v) else f"{v:.2f}"))
            lines.append(f"{method:<18}" + "".join(f"{c:>10}" for c in cells))
        lines.append("")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    levels = args.levels or list(DEFAULT_LEVELS)
    model = None
    if "model" in methods:
        if not args.checkpoint:
            raise ConfigError("the model method needs --checkpoint")
        from .nn import load_checkpoint

        model, _ = load_checkpoint(args.checkpoint)
    clips = _corpus_clips(args, "test")
    if args.max_clips:
        clips = clips[:args.max_clips]
    table = evaluate(clips, methods, levels, model)
    text = table_to_csv(table)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.pretty:
        print(table_to_text(table))
    return EXIT_OK


# ---------------------------------------------------------------- region report

def region_report(ref: np.ndarray, est: np.ndarray, mask: ClipMask) -> dict:
    if not (ref.size == est.size == len(mask)):
        raise ValueError(f"length mismatch: ref {ref.size}, est {est.size}, mask {len(mask)}")
    err = (ref - est) ** 2
    clipped = mask.clipped
    return {
        "n_samples": ref.size,
        "n_clipped": int(clipped.sum()),
        "unclipped_error": float(err[~clipped].sum()),
        "clipped_error": float(err[clipped].sum()),
    }


def region_dump(ref, est, mask: ClipMask, theta: float, sample_rate: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "ref", "est", "label", "theta_pos", "theta_neg"])
    th = f"{theta:.9g}" if math.isfinite(theta) else ""
    nth = f"{-theta:.9g}" if math.isfinite(theta) else ""
    for i in range(ref.size):
        w.writerow([f"{i / sample_rate:.6f}", f"{ref[i]:.9g}", f"{est[i]:.9g}", int(mask.labels[i]), th, nth])
    return buf.getvalue()


def cmd_region_report(args) -> int:
    ref, rate = read_wav(args.ref)
    est, _ = read_wav(args.est, expected_rate=rate)
    mask = read_mask(args.mask)
    rep = region_report(ref, est, mask)
    for k, v in rep.items():
        print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    if args.dump:
        theta = args.theta if args.theta is not None else math.inf
        Path(args.dump).write_text(region_dump(ref, est, mask, theta, rate))
    return EXIT_OK


def cmd_make_corpus(args) -> int:
    from .train import CorpusSpec, materialize

    spec = CorpusSpec(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test, seed=args.corpus_seed)
    root = materialize(spec, args.out_dir)
    print(f"wrote corpus to {root}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _corpus_args(p, n_train=200, n_val=20, n_test=20):
    p.add_argument("--corpus", help="directory with train/val/test WAV folders (default: synthetic)")
    p.add_argument("--n-train", type=int, default=n_train)
    p.add_argument("--n-val", type=int, default=n_val)
    p.add_argument("--n-test", type=int, default=n_test)
    p.add_argument("--corpus-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="declip", description="Speech declipping toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("clip", help="hard-clip a WAV at a threshold or target SDR")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("mask", help="output mask sidecar path")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target-sdr", type=_level)
    g.add_argument("--theta", type=float)
    p.add_argument("--format", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; clipping is deterministic")
    p.set_defaults(func=cmd_clip)

    p = sub.add_parser("declip", help="restore a clipped WAV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=("aspade", "model"), default="aspade")
    p.add_argument("--mask", help="mask sidecar written by 'clip'")
    p.add_argument("--theta", type=float, help="clipping level used to infer a mask when --mask is absent")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--checkpoint")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--format", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_declip)

    p = sub.add_parser("train", help="train the declipping model")
    p.add_argument("out_dir")
    _corpus_args(p)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--crop", type=int, default=1024)
    p.add_argument("--grad-clip", type=float, default=1.0, help="global gradient-norm clip (0 disables)")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--no-tgram", action="store_true", help="zero the temporal-feature channel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate methods over clipping levels, write CSV")
    _corpus_args(p)
    p.add_argument("--methods", default="identity-clipped,aspade")
    p.add_argument("--levels", type=_level, nargs="+")
    p.add_argument("--checkpoint")
    p.add_argument("--max-clips", type=int)
    p.add_argument("--out")
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("region-report", help="per-region error energies and plot data")
    p.add_argument("ref")
    p.add_argument("est")
    p.add_argument("mask")
    p.add_argument("--theta", type=float)
    p.add_argument("--dump", help="write columnar plot data here")
    p.set_defaults(func=cmd_region_report)

    p = sub.add_parser("make-corpus", help="write the synthetic corpus as WAV folders")
    p.add_argument("out_dir")
    _corpus_args(p)
    p.set_defaults(func=cmd_make_corpus)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"declip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"declip: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"declip: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
