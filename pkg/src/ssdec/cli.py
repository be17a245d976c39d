"""Command-line front end.

Exit codes: 0 success, 1 a verification property failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import bench, config as runcfg
from .models import (FitError, FormatError, VocabularyError, cross_entropy, derive_draft,
                     fit_tabular, load_model, read_corpus, save_model)
from .scenarios import SCENARIO_NAMES, load_scenario
from .ssd import ConfigError, ssd_decode
from .verify import LEVELS, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _list_arg(parser):
    def convert(text):
        try:
            return parser(text)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return convert


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value run configuration file")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output path")


def _models_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=SCENARIO_NAMES, help="bundled target/draft pair")
    p.add_argument("--target", type=Path, help="target model file")
    p.add_argument("--draft", type=Path, help="draft model file")
    p.add_argument("--prefix", type=_list_arg(lambda t: runcfg.parse_value("prefix", t)),
                   help="prompt tokens, e.g. '0 1'")
    p.add_argument("--draft-len", type=int)
    p.add_argument("--target-len", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--c-draft", type=float)
    p.add_argument("--c-target", type=float)
    p.add_argument("--c-target-serial", type=float)
    p.add_argument("--token-duration", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssdec", description="Speculative decoding over tabular token models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a tabular model to a corpus")
    _common(p)
    p.add_argument("corpus", nargs="?", type=Path)
    p.add_argument("--order", type=int)
    p.add_argument("--smoothing", type=float)

    p = sub.add_parser("derive-draft", help="collapse a target model to a shorter context")
    _common(p)
    p.add_argument("--target", type=Path)
    p.add_argument("--corpus", type=Path, help="reference corpus for context weights")
    p.add_argument("--order", type=int)
    p.add_argument("--smoothing", type=float)

    p = sub.add_parser("decode", help="run one speculative decode and report metrics")
    _common(p)
    _models_args(p)

    p = sub.add_parser("verify", help="run the oracle property suites")
    _common(p)
    p.add_argument("--level", choices=sorted(LEVELS), default="quick")

    p = sub.add_parser("sweep", help="sweep beta or draft length, write CSV")
    _common(p)
    _models_args(p)
    p.add_argument("--kind", required=True, choices=["beta", "draft_len", "draft-len"])
    p.add_argument("--betas", type=_list_arg(lambda t: runcfg.parse_value("betas", t)))
    p.add_argument("--draft-lens", type=_list_arg(lambda t: runcfg.parse_value("draft_lens", t)))
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    return parser


_OVERRIDE_KEYS = ("seed", "out", "scenario", "target", "draft", "corpus", "prefix", "order",
                  "smoothing", "draft_len", "target_len", "beta", "c_draft", "c_target",
                  "c_target_serial", "token_duration", "betas", "draft_lens", "trials",
                  "workers")


def load_run_config(args) -> runcfg.RunConfig:
    file_values = runcfg.read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    cfg = runcfg.build_config(file_values, overrides)
    cfg.check_files()
    return cfg


def _emit(text: str, out: Path | None) -> None:
    sys.stdout.write(text)
    if out is not None:
        out.write_text(text, encoding="utf-8")


def _models(cfg: runcfg.RunConfig):
    if cfg.scenario:
        if cfg.target or cfg.draft:
            raise UsageError("give either a scenario or target/draft model files, not both")
        sc = load_scenario(cfg.scenario)
        prefix = cfg.prefix if cfg.prefix is not None else sc.prefix
        return sc.target, sc.draft, list(prefix)
    if not (cfg.target and cfg.draft):
        raise UsageError("need --scenario, or both --target and --draft model files")
    target, draft = load_model(cfg.target), load_model(cfg.draft)
    return target, draft, list(cfg.prefix or ())


def cmd_fit(args) -> int:
    cfg = load_run_config(args)
    corpus_path = args.corpus or cfg.corpus
    if corpus_path is None:
        raise UsageError("fit needs a corpus path")
    if cfg.order is None:
        raise UsageError("fit needs --order")
    if cfg.out is None:
        raise UsageError("fit needs --out")
    corpus = read_corpus(corpus_path)
    model = fit_tabular(corpus, cfg.order, cfg.smoothing)
    save_model(model, cfg.out)
    print(f"order = {model.order}")
    print(f"contexts = {len(model.table)}")
    print(f"cross_entropy = {cross_entropy(model, corpus):.6g} nats/token")
    return EXIT_OK


def cmd_derive_draft(args) -> int:
    cfg = load_run_config(args)
    if cfg.target is None or cfg.corpus is None or cfg.order is None or cfg.out is None:
        raise UsageError("derive-draft needs --target, --corpus, --order and --out")
    target = load_model(cfg.target)
    corpus = read_corpus(cfg.corpus)
    draft = derive_draft(target, cfg.order, corpus, cfg.smoothing)
    save_model(draft, cfg.out)
    print(f"order = {draft.order}")
    print(f"target_cross_entropy = {cross_entropy(target, corpus):.6g} nats/token")
    print(f"draft_cross_entropy = {cross_entropy(draft, corpus):.6g} nats/token")
    return EXIT_OK


def format_decode(result, metrics: bench.Metrics) -> str:
    lines = ["tokens: " + " ".join(map(str, result.tokens)),
             "cycle drafted accepted resample bonus"]
    for i, c in enumerate(result.cycles):
        drafted = ",".join(str(d.token) for d in c.draft_tokens)
        flags = "".join("+" if ok else "x" for ok in c.accept_flags)
        res = f"{c.resampled[1]}@{c.resampled[0]}" if c.resampled else "-"
        bonus = str(c.bonus) if c.bonus is not None else "-"
        lines.append(f"{i} {drafted} {flags} {res} {bonus}")
    lines.append(f"accepted_tokens = {result.accepted_tokens}")
    lines.append(f"residual_fallbacks = {result.residual_fallbacks}")
    for name, val in vars(metrics).items():
        lines.append(f"{name} = {bench._fmt(val)}")
    return "\n".join(lines) + "\n"


def cmd_decode(args) -> int:
    cfg = load_run_config(args)
    target, draft, prefix = _models(cfg)
    result = ssd_decode(target, draft, prefix, cfg.ssd_config())
    _emit(format_decode(result, bench.simulate_cost(result, cfg.cost_model())), cfg.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    results = run_suite(args.level)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed "
          f"({args.level}, {time.perf_counter() - start:.1f}s)")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_run_config(args)
    target, draft, prefix = _models(cfg)
    base, cost = cfg.ssd_config(), cfg.cost_model()
    if args.kind == "beta":
        if not cfg.betas:
            raise UsageError("empty beta list")
        rows = bench.sweep_beta(target, draft, prefix, base, cfg.betas, cost, cfg.trials,
                                workers=cfg.workers)
    else:
        if not cfg.draft_lens:
            raise UsageError("empty draft length list")
        rows = bench.sweep_draft_len(target, draft, prefix, base, cfg.draft_lens, cost,
                                     cfg.trials, workers=cfg.workers)
    text = bench.rows_to_csv(rows)
    out = cfg.out or Path(f"sweep_{args.kind.replace('-', '_')}.csv")
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror}") from None
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "derive-draft": cmd_derive_draft, "decode": cmd_decode,
            "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FormatError, FitError, VocabularyError, ValueError) as exc:
        print(f"ssdec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
