"""Command-line surface.

Subcommands: ``synth`` (generate a synthetic environment file), ``prep``
(build one from a tag-assignment dataset), ``run`` (regret experiment over
one or more algorithms), ``sweep`` (conversation-frequency or dimension
ablations), and ``plot`` (render aggregate CSVs into an SVG chart).

Configuration is a flat ``key = value`` text file; every key is also a flag
and flags win.  Unknown keys are rejected.  Progress goes to stderr, the
machine-readable summary to stdout.  Exit codes: 0 success, 1 configuration
error, 2 runtime error.  ``CONDUEL_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

from .dueling import DEFAULT_RADIUS_SCALE, DuelConfig
from .env import Schedule, SyntheticConfig, gen_synthetic
from .envfile import export_environment, import_environment
from .errors import ConduelError, ConfigError
from .harness import ALL_KINDS, config_fingerprint, regret_kind_of, run_experiment
from .hetrec import IngestConfig, build_environment, parse_hetrec
from .mnl import DEFAULT_MNL_RADIUS_SCALE, MnlConfig
from .report import read_aggregate_csv, render_chart, write_aggregate_csv, write_trace_csv
from .spanner import build_spanner

__all__ = ["RunConfig", "main"]

FREQUENCY_VALUES = (1, 5, 10, 20)
FREQUENCY_FAMILIES = ("linear", "log")
DIMENSION_VALUES = (20, 30, 40, 50)


@dataclass
class RunConfig:
    # environment source: a file, or the synthetic spec below
    env: str = ""
    link: str = "sigmoid"
    n_users: int = 200
    n_keyterms: int = 500
    n_arms: int = 5000
    d: int = 10
    max_arms_per_keyterm: int = 10
    env_seed: int = 0
    # experiment
    algorithms: str = "conduel"
    t: int = 1000
    seeds: str = "0:10"
    users: int = 1
    schedule: str = "linear:10"
    pool_size: int = 50
    workers: int = 0  # 0: one per processor
    out: str = ""
    # dueling estimator
    lam: float = 1.0
    delta: float = 0.1
    kappa1: str = "auto"
    tol: float = 1e-8
    max_iters: int = 100
    radius_scale: float = DEFAULT_RADIUS_SCALE
    pair_mode: str = "sampled_first"
    # choice model
    q: int = 4
    t0: int = 50
    kappa2: float = 0.005
    mnl_radius_scale: float = DEFAULT_MNL_RADIUS_SCALE


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value: str):
    field = _FIELDS[key]
    try:
        if field.type in ("int",):
            return int(value)
        if field.type in ("float",):
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def parse_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    out = {}
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, eq, value = body.partition("=")
        key = key.strip().replace("-", "_")
        if not eq or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in _FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, _coerce(key, flag))
    if not cfg.out:
        cfg.out = os.environ.get("CONDUEL_OUT", ".")
    return cfg


def parse_seed_spec(spec: str) -> list:
    spec = str(spec).strip()
    if ":" in spec:
        lo, _, hi = spec.partition(":")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError as exc:
            raise ConfigError(f"bad seed range {spec!r}") from exc
        if hi_i <= lo_i:
            raise ConfigError(f"empty seed range {spec!r}")
        return list(range(lo_i, hi_i))
    try:
        return [int(s) for s in spec.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {spec!r}") from exc


def _algorithms(cfg: RunConfig) -> list:
    algos = [a.strip() for a in cfg.algorithms.split(",") if a.strip()]
    if not algos:
        raise ConfigError("no algorithms listed")
    for a in algos:
        if a not in ALL_KINDS:
            raise ConfigError(f"unknown algorithm {a!r}; known: {', '.join(ALL_KINDS)}")
    return algos


def _duel_config(cfg: RunConfig) -> DuelConfig:
    kappa1 = None if cfg.kappa1 == "auto" else float(cfg.kappa1)
    return DuelConfig(
        lam=cfg.lam,
        delta=cfg.delta,
        kappa1=kappa1,
        radius_scale=cfg.radius_scale,
        pair_mode=cfg.pair_mode,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
    )


def _mnl_config(cfg: RunConfig) -> MnlConfig:
    return MnlConfig(
        q=cfg.q,
        t0=cfg.t0,
        kappa2=cfg.kappa2,
        radius_scale=cfg.mnl_radius_scale,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
    )


def _load_envset(cfg: RunConfig):
    if cfg.env:
        return import_environment(cfg.env)
    spec = SyntheticConfig(
        n_users=cfg.n_users,
        n_keyterms=cfg.n_keyterms,
        n_arms=cfg.n_arms,
        dim=cfg.d,
        max_arms_per_keyterm=cfg.max_arms_per_keyterm,
        link=cfg.link,
    )
    return gen_synthetic(spec, cfg.env_seed)


def _progress(tag, done, total):
    print(f"{tag}: {done}/{total} cells", file=sys.stderr, flush=True)


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_synth(args) -> int:
    cfg = load_config(args)
    envset = _load_envset(dataclasses.replace(cfg, env=""))
    os.makedirs(os.path.dirname(os.path.abspath(args.out_file)), exist_ok=True)
    digest = export_environment(envset, args.out_file)
    _emit(
        {
            "environment": args.out_file,
            "checksum": digest,
            "n_arms": envset.n_arms,
            "n_keyterms": envset.n_keyterms,
            "n_users": envset.n_users,
            "d": envset.dim,
        }
    )
    return 0


def cmd_prep(args) -> int:
    cfg = load_config(args)
    raw = parse_hetrec(args.tags)
    ingest = IngestConfig(
        n_items=args.items,
        n_users=args.top_users,
        tags_per_item=args.tags_per_item,
        dim=cfg.d,
        link=cfg.link,
    )
    envset = build_environment(raw, ingest, seed=cfg.env_seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out_file)), exist_ok=True)
    digest = export_environment(envset, args.out_file)
    _emit(
        {
            "environment": args.out_file,
            "checksum": digest,
            "n_raw_records": raw.n_raw,
            "n_arms": envset.n_arms,
            "n_keyterms": envset.n_keyterms,
            "n_users": envset.n_users,
            "d": envset.dim,
        }
    )
    return 0


def _run_algorithms(cfg: RunConfig, envset, out_dir, schedule: Schedule) -> dict:
    algos = _algorithms(cfg)
    seeds = parse_seed_spec(cfg.seeds)
    duel_cfg = _duel_config(cfg)
    mnl_cfg = _mnl_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    spanner = build_spanner(envset.keyterm_feats)
    summary = {}
    for algo in algos:
        trace = run_experiment(
            envset,
            algo,
            cfg.t,
            seeds,
            schedule,
            pool_size=cfg.pool_size,
            users=cfg.users,
            duel_config=duel_cfg,
            mnl_config=mnl_cfg,
            spanner=spanner,
            workers=cfg.workers,
            progress=_progress,
        )
        trace_path = os.path.join(out_dir, f"{algo}.csv")
        agg_path = os.path.join(out_dir, f"{algo}_agg.csv")
        write_trace_csv(trace_path, trace)
        write_aggregate_csv(agg_path, trace)
        summary[algo] = {
            "final_mean_cum_regret": trace.final_mean(),
            "final_stderr": trace.final_stderr(),
            "regret_kind": trace.regret_kind,
            "trace_csv": trace_path,
            "aggregate_csv": agg_path,
            "fingerprint": trace.fingerprint,
        }
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args)
    envset = _load_envset(cfg)
    schedule = Schedule.parse(cfg.schedule)
    summary = _run_algorithms(cfg, envset, cfg.out, schedule)
    summary_path = os.path.join(cfg.out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(summary)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    values = [int(v) for v in args.values.split(",")] if args.values else None
    summary = {}
    if args.axis == "frequency":
        envset = _load_envset(cfg)
        for fam in FREQUENCY_FAMILIES:
            for n in values or FREQUENCY_VALUES:
                cell = f"freq_{fam}_{n}"
                schedule = Schedule(fam, float(n))
                out_dir = os.path.join(cfg.out, cell)
                summary[cell] = _run_algorithms(cfg, envset, out_dir, schedule)
    elif args.axis == "dimension":
        if cfg.env:
            raise ConfigError("dimension sweep regenerates synthetic environments; remove env=")
        for d in values or DIMENSION_VALUES:
            cell = f"dim_{d}"
            cell_cfg = dataclasses.replace(cfg, d=int(d))
            envset = _load_envset(cell_cfg)
            out_dir = os.path.join(cfg.out, cell)
            summary[cell] = _run_algorithms(cell_cfg, envset, out_dir, Schedule.parse(cfg.schedule))
    else:
        raise ConfigError(f"unknown sweep axis {args.axis!r}")
    if not summary:
        raise ConfigError("sweep produced no cells; check the values list")
    summary_path = os.path.join(cfg.out, f"sweep_{args.axis}_summary.json")
    os.makedirs(cfg.out, exist_ok=True)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(summary)
    return 0


def cmd_plot(args) -> int:
    curves = []
    absolute = []
    for path in args.csvs:
        t, mean, err = read_aggregate_csv(path)
        label = os.path.basename(path)
        for suffix in ("_agg.csv", ".csv"):
            if label.endswith(suffix):
                label = label[: -len(suffix)]
                break
        curves.append((label, t, mean, err))
        if regret_kind_of_label(label) == "absolute":
            absolute.append(label)
    render_chart(curves, args.out_file, absolute_labels=absolute)
    _emit({"chart": args.out_file, "curves": [c[0] for c in curves]})
    return 0


def regret_kind_of_label(label: str) -> str:
    base = label.split("/")[-1]
    for kind in ALL_KINDS:
        if base == kind or base.startswith(kind):
            return regret_kind_of(kind)
    return "dueling"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are config errors
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conduel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", "-c", help="flat key = value config file")
        for name in _FIELDS:
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)

    p_synth = sub.add_parser("synth", help="generate a synthetic environment file")
    add_config_flags(p_synth)
    p_synth.add_argument("--out-file", required=True, help="environment file to write")
    p_synth.set_defaults(func=cmd_synth)

    p_prep = sub.add_parser("prep", help="build an environment from tag assignments")
    add_config_flags(p_prep)
    p_prep.add_argument("--tags", required=True, help="user/item/tag assignment file")
    p_prep.add_argument("--out-file", required=True)
    p_prep.add_argument("--items", type=int, default=2000, help="items to keep")
    p_prep.add_argument("--top-users", type=int, default=100, help="users to keep")
    p_prep.add_argument("--tags-per-item", type=int, default=20)
    p_prep.set_defaults(func=cmd_prep)

    p_run = sub.add_parser("run", help="run a regret experiment")
    add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="frequency or dimension ablation")
    add_config_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=("frequency", "dimension"))
    p_sweep.add_argument("--values", help="override the default axis values (csv)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_plot = sub.add_parser("plot", help="render aggregate CSVs as an SVG chart")
    p_plot.add_argument("csvs", nargs="+", help="aggregate regret CSV paths")
    p_plot.add_argument("--out-file", required=True)
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except ConduelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
