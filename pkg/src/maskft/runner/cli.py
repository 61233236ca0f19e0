"""Command-line entry point: ``maskft <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .. import datagen
from ..evalkit import FitError, Paradigm, evaluate, fit_convergence, read_csv
from . import checkpoint as ckpt
from .config import PRESETS, RunConfig
from .pipeline import (
    decode_cfg, ensure_base, finetune, model_config, pretrain, run_corpora, run_vocab, sweep, write_loss_curve,
)
from .report import curve, report

log = logging.getLogger("maskft")

DEFAULT_CACHE = "runs/cache"


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides --config and --preset)")
    g.add_argument("--config", help="INI file with run settings")
    g.add_argument("--preset", choices=sorted(PRESETS), default="full")
    g.add_argument("--toy", action="store_const", const="toy", dest="preset", help="same as --preset toy")
    for f in dataclasses.fields(RunConfig):
        typ = {"int": int, "float": float, "float | None": float}.get(f.type, str)
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=typ, default=None)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
                 if getattr(args, f.name, None) is not None}
    paradigm = overrides.get("paradigm", "AR")
    cfg = PRESETS[args.preset](paradigm)
    if args.config:
        cfg = RunConfig.load(args.config, base=cfg)
    return cfg.replace(**overrides)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    if args.dataset == "NameDescription":
        recs = datagen.gen_name_description_set(args.n, args.paras, seed=args.seed)
    elif args.dataset == "Biography":
        recs = datagen.gen_biography(args.n, args.paras, seed=args.seed)
    else:
        recs = datagen.gen_article(args.n, seed=args.seed, n_same=args.paras, n_permute=args.paras)
    datagen.write_corpus(recs, args.out)
    print(f"wrote {len(recs)} records to {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = resolve_config(args)
    base, hist = pretrain(cfg, kind=args.kind)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(base, out)
    write_loss_curve(hist, out.with_suffix(".loss.csv"))
    print(f"saved {out} (final loss {hist.losses[-1]:.4f})" if hist.losses else f"saved {out}")
    return 0


def _seeds(args, cfg: RunConfig) -> list[int]:
    return [int(s) for s in _floats(args.seeds)] if args.seeds else [cfg.seed]


def cmd_finetune(args) -> int:
    cfg = resolve_config(args)
    base = ensure_base(cfg, args.cache_dir)
    seeds = _seeds(args, cfg)
    for seed in seeds:
        out = Path(cfg.out_dir) / f"seed{seed}" if len(seeds) > 1 else Path(cfg.out_dir)
        res = finetune(base, cfg.replace(seed=seed), out)
        b = res.best
        print(f"{out}: best step {b.step} fwd {b.forward:.3f} bwd {b.backward:.3f} total {b.total:.3f}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    vocab = run_vocab(cfg)
    ck = ckpt.load(args.checkpoint, expect=model_config(cfg, vocab))
    corpus = datagen.read_corpus(args.corpus) if args.corpus else run_corpora(cfg).knowledge
    rep = evaluate(ck.params, corpus, Paradigm(cfg.paradigm), vocab, decode_cfg(cfg), step=ck.step)
    print(json.dumps({"step": rep.step, "total": rep.total, **rep.per_category}, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    base = ensure_base(cfg, args.cache_dir)
    outcomes = sweep(cfg, args.axis, _floats(args.values), base, parallelism=args.parallel)
    failed = [o for o in outcomes if o.error]
    for o in outcomes:
        status = o.error or f"best total {o.result.best.total:.3f} at step {o.result.best.step}"
        print(f"{args.axis}={o.value:g}: {status}")
    return 1 if failed else 0


def cmd_report(args) -> int:
    summaries = report(args.runs, args.out)
    print((Path(args.out) / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0 if summaries else 1


def cmd_fit(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise FileNotFoundError(f"metrics file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        head = next(csv.reader(fh), [])
    if "category" in head:
        points = curve(read_csv(path), args.category)
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            points = [(float(r["step"]), float(r["accuracy"])) for r in csv.DictReader(fh)]
    try:
        fit = fit_convergence(points)
    except FitError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        fit = exc.best
    print(f"A={fit.A:.6g} k={fit.k:.6g} rms={fit.residual:.4g}" + (" (degenerate)" if fit.degenerate else ""))
    return 0


def cmd_gen_remote(args) -> int:
    from .. import genclient as gc

    cfg = gc.EndpointCfg(base_url=args.base_url, model=args.model, parallelism=args.parallel)
    recs = datagen.read_corpus(args.corpus)
    task = {"same_order": gc.gen_same_order_paras, "permute_order": gc.gen_permute_order_paras,
            "qa": gc.gen_qas}[args.task]
    with gc.ChatClient(cfg) as client:
        results = gc.map_ordered(lambda p: task(p, client), [r.original for r in recs], cfg.parallelism)
    failures = 0
    for rec, res in zip(recs, results):
        if isinstance(res, Exception):
            failures += 1
            log.error("%s: %s", rec.id, res)
        elif args.task == "qa":
            rec.qas = res
        else:
            # the first entry echoes the original passage
            setattr(rec, f"{args.task}_paras", [p for p in res if p != rec.original])
    datagen.write_corpus(recs, args.out)
    print(f"wrote {len(recs)} records to {args.out} ({failures} failed)")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maskft", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic corpus as JSON lines")
    p.add_argument("--dataset", choices=["NameDescription", "Biography", "Wiki"], default="NameDescription")
    p.add_argument("--n", type=int, default=30, help="records (per kind for NameDescription)")
    p.add_argument("--paras", type=int, default=30, help="paraphrases per record")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("pretrain", help="train a base model on the generic corpus")
    _add_config_flags(p)
    p.add_argument("--kind", choices=["causal", "diffusion"], help="default follows --paradigm")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("finetune", help="fine-tune a base on the knowledge facts")
    _add_config_flags(p)
    p.add_argument("--cache-dir", default=DEFAULT_CACHE, help="where pretrained bases are cached")
    p.add_argument("--seeds", help="comma-separated seeds, one run directory each")
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", help="corpus file (default: the run's knowledge facts)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="one fine-tune per value of an axis")
    _add_config_flags(p)
    p.add_argument("--axis", choices=["lr", "fixed_t", "seed"], required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--cache-dir", default=DEFAULT_CACHE)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="summary table and plots for run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("fit", help="fit A(1 - exp(-k step)) to an accuracy curve")
    p.add_argument("csv", help="metrics CSV, or a CSV with step,accuracy columns")
    p.add_argument("--category", default="Fwd")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("gen-remote", help="paraphrases or QA from a chat-completion endpoint")
    p.add_argument("--corpus", required=True, help="input corpus; each record's original is sent")
    p.add_argument("--task", choices=["same_order", "permute_order", "qa"], required=True)
    p.add_argument("--base-url", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--parallel", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_remote)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (FileNotFoundError, ValueError, ckpt.CheckpointError, datagen.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
