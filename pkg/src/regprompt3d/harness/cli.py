"""Command line entry point: ``regprompt3d <command> ...``.

Every RunConfig field is also a flag (``--epochs 20``, ``--no-mac``,
``--seeds 1,2,3``); ``--config FILE`` reads a ``[run]`` section whose keys
override the flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from ..data.descriptions import DescriptionBank
from ..data.manifest import materialize, save_cloud, save_manifest
from ..data.splits import sample_few_shot
from ..encoders import checkpoint
from .config import RunConfig, load_config, parse_value
from .surrogate import PretrainConfig, default_cache_dir, get_surrogate

log = logging.getLogger("regprompt3d")

BENCHMARKS = {
    "base-to-new": "base_to_new",
    "cross-dataset": "cross_domain",
    "corruption": "corruption",
    "few-shot": "few_shot",
    "ablation": "ablation",
}


def _add_run_flags(p: argparse.ArgumentParser, skip=()) -> None:
    g = p.add_argument_group("run configuration")
    for f in fields(RunConfig):
        if f.name in skip:
            continue
        flag = "--" + f.name.replace("_", "-")
        if str(f.type) == "bool":
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
        else:
            g.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, metavar=f.name.upper(),
                           type=lambda raw, name=f.name: parse_value(name, raw))
    g.add_argument("--config", type=Path, default=None, help="INI file with a [run] section (wins over flags)")


def _run_config(args, **fixed) -> RunConfig:
    # only flags given on the command line are present (SUPPRESS default)
    values = {f.name: getattr(args, f.name) for f in fields(RunConfig) if hasattr(args, f.name)}
    values.update(fixed)
    return load_config(args.config, **values)


def _cache_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache-dir", type=Path, default=None,
                   help="surrogate cache (default $REGPROMPT3D_CACHE or ~/.cache/regprompt3d)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regprompt3d", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write split manifests, the description bank and optional cloud caches")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--clouds", action="store_true", help="also cache every cloud as a float32 binary")
    _add_run_flags(p)

    p = sub.add_parser("pretrain-frozen", help="build (or load) the cached frozen surrogate")
    _cache_flag(p)
    p.add_argument("--per-class", type=int, default=PretrainConfig.per_class)
    p.add_argument("--point-epochs", type=int, default=PretrainConfig.point_epochs)
    p.add_argument("--text-steps", type=int, default=PretrainConfig.text_steps)
    p.add_argument("--seed", type=int, default=PretrainConfig.seed)

    p = sub.add_parser("train", help="tune prompts for one seed and save them")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", dest="run_seed", type=int, default=None, help="defaults to the first of --seeds")
    _cache_flag(p)
    _add_run_flags(p)

    p = sub.add_parser("benchmark", help="run a protocol over all seeds and emit a report")
    p.add_argument("protocol", choices=sorted(BENCHMARKS))
    p.add_argument("--out", type=Path, required=True)
    _cache_flag(p)
    _add_run_flags(p, skip=("kind",))

    p = sub.add_parser("report", help="print the table of an emitted report")
    p.add_argument("path", type=Path, help="report directory or report.json")
    p.add_argument("--json", action="store_true", help="print the structured report instead")
    return parser


# ---------------------------------------------------------------- commands


def cmd_gen_data(args) -> int:
    from .benchmark import build_split

    cfg = _run_config(args).resolved()
    split = build_split(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for name, recs in split.manifests.items():
        save_manifest(out / f"{name.replace(':', '-')}.jsonl", recs)
    DescriptionBank.build(cfg.classes, cfg.n_t, seed=cfg.data_seed).save(out / "descriptions.txt")
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    n = sum(len(v) for v in split.manifests.values())
    if args.clouds:
        cloud_dir = out / "clouds"
        cloud_dir.mkdir(exist_ok=True)
        for recs in split.manifests.values():
            for rec in recs:
                tag = f"-{rec.corruption}{rec.severity}" if rec.corruption else ""
                save_cloud(cloud_dir / f"{rec.domain}-{rec.seed}{tag}.pc", materialize(rec).points)
    print(f"wrote {len(split.manifests)} manifests ({n} records) to {out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = PretrainConfig(per_class=args.per_class, point_epochs=args.point_epochs,
                         text_steps=args.text_steps, seed=args.seed)
    root = args.cache_dir or default_cache_dir()
    enc = get_surrogate(cfg, root, progress=True)
    print(f"surrogate {cfg.key()} ready in {root} ({enc.n_parameters()} frozen parameters)")
    return 0


def cmd_train(args) -> int:
    from .benchmark import build_split, train_data
    from .features import TokenCache
    from .training import train_prompts

    cfg = _run_config(args).resolved()
    seed = args.run_seed if args.run_seed is not None else cfg.seeds[0]
    enc = get_surrogate(cache_dir=args.cache_dir, progress=True)
    split = build_split(cfg)
    shots = cfg.shots or (16 if cfg.kind == "few_shot" else None)
    if shots:
        split = sample_few_shot(split, shots, seed)
    res = train_prompts(enc, train_data(TokenCache(enc), split, cfg), cfg, seed,
                        progress=lambda r: print(_epoch_line(r), flush=True))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out / "prompts.ckpt", {k: t.data for k, t in res.prompts.named().items()}, "prompt")
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    (out / "history.json").write_text(json.dumps(res.history, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"final train terms: {json.dumps(res.final_terms, sort_keys=True)}")
    print(f"saved prompts to {out / 'prompts.ckpt'}")
    return 0


def _epoch_line(row: dict) -> str:
    keys = ("loss", "ce", "L_p", "L_t", "L_D", "val_acc")
    return "  ".join([f"epoch {row['epoch']}"] + [f"{k} {row[k]:.4f}" for k in keys if k in row])


def cmd_benchmark(args) -> int:
    from .benchmark import run_ablation, run_benchmark
    from .report import emit_report, render_table

    kind = BENCHMARKS[args.protocol]
    cfg = _run_config(args, kind="base_to_new" if kind == "ablation" else kind)
    enc = get_surrogate(cache_dir=args.cache_dir, progress=True)
    runner = run_ablation if kind == "ablation" else run_benchmark
    report = runner(cfg, enc, progress=lambda msg: print(msg, flush=True))
    paths = emit_report(report, args.out)
    print(render_table(report))
    print(f"report written to {paths['json']}")
    return 0


def cmd_report(args) -> int:
    from .report import load_report, render_table

    report = load_report(args.path)
    print(report.to_json() if args.json else render_table(report), end="")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain-frozen": cmd_pretrain,
    "train": cmd_train,
    "benchmark": cmd_benchmark,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
