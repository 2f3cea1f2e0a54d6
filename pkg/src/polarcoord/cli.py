"""Command line entry point: ``polarcoord {construct,run,summarize,check-model,selftest}``.

Flags mirror :class:`~polarcoord.simharness.ExperimentConfig`; a JSON config
file may be given and individual flags override it. ``POLARCOORD_OUTPUT_DIR``
redirects relative output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .model import check_region_membership, derive_marginals
from .simharness import (
    CONFIG_SCHEMA,
    ExperimentConfig,
    build_construction,
    format_summary,
    read_records,
    run_experiment,
    summarize,
)

OUTPUT_ENV = "POLARCOORD_OUTPUT_DIR"


def _out(path) -> Path:
    path = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    return path if path.is_absolute() or not base else Path(base) / path


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--model", help="preset name or JSON file with the five probability tables")
    p.add_argument("--m-exponents", type=int, nargs="+", help="log2 of the block lengths")
    p.add_argument("--k-values", type=int, nargs="+")
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-v", type=float)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--trials-per-point", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--genie-mode", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--include-last-block-in-type", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--allow-infeasible", "--force", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--cache-dir")
    p.add_argument("--record-runtime", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--output", "-o")


def _load_model_arg(value: str):
    if Path(value).is_file():
        return json.loads(Path(value).read_text())
    return value


def config_from_args(args) -> ExperimentConfig:
    d = json.loads(Path(args.config).read_text()) if args.config else {"schema": CONFIG_SCHEMA}
    for key in ExperimentConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            d[key] = _load_model_arg(val) if key == "model" else val
    return ExperimentConfig.from_dict(d)


def cmd_construct(args) -> int:
    cfg = config_from_args(args)
    model = cfg.build_model()
    if cfg.cache_dir is None:
        cfg.cache_dir = str(_out("construction-cache"))
    else:
        cfg.cache_dir = str(_out(cfg.cache_dir))
    for n in cfg.sizes:
        con = build_construction(model, cfg, n)
        s = con.sets
        print(
            f"n={n}: |A1|={s.a1.size} |A2|={s.a2.size} |A3|={s.a3.size} |A4|={s.a4.size} "
            f"|V_V|S|/n={s.v_v_given_s.size / n:.4f} |H_V|Y|/n={s.h_v_given_y.size / n:.4f} "
            f"feasible={s.feasible}"
        )
    print(f"cached under {cfg.cache_dir}")
    return 0


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    out = _out(cfg.output)
    if cfg.cache_dir is not None:
        cfg.cache_dir = str(_out(cfg.cache_dir))
    records = run_experiment(cfg, out)
    print(format_summary(summarize(records, args.epsilon), args.epsilon))
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_summarize(args) -> int:
    print(format_summary(summarize(read_records(args.csv), args.epsilon), args.epsilon))
    return 0


def cmd_check_model(args) -> int:
    cfg = config_from_args(args)
    model = cfg.build_model()
    dm = derive_marginals(model)
    rc = check_region_membership(model)
    print(f"I(U;S) = {dm.i_us:.6f} bits")
    print(f"I(U;Y) = {dm.i_uy:.6f} bits")
    print(f"I(X;Y) = {dm.i_xy:.6f} bits")
    print(f"margin I(U;Y) - I(U;S) = {rc.margin:.6f} bits")
    print(f"|U| <= {rc.cardinality_bound} (ok: {rc.cardinality_ok})")
    print("accepted" if rc.member else "rejected: I(U;S) > I(U;Y)")
    return 0 if rc.member else 1


def cmd_selftest(args) -> int:
    from . import selftest

    return 0 if selftest.run(np.random.default_rng(args.seed), verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarcoord", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build and cache index sets")
    _config_args(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("run", help="run a seeded sweep and write its CSV")
    _config_args(p)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="summarize a CSV of run records")
    p.add_argument("csv")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("check-model", help="test I(U;S) <= I(U;Y); exit status 1 if violated")
    _config_args(p)
    p.set_defaults(func=cmd_check_model)

    p = sub.add_parser("selftest", help="oracle and lemma suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
