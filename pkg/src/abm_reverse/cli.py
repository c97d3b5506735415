"""Command-line entry point: ``abm-reverse {predict,blackbox,report,defaults}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .blackbox import PlantedSpec, run_blackbox
from .evaluation import EmptyInput, _as_date, label_days, regime_breakdown
from .ga import ConfigError
from .market_data import MarketDataError, load_prices, to_returns
from .pipeline import PipelineError, read_records, run_experiment, write_records

log = logging.getLogger("abm_reverse")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
RECORDS = "records.jsonl"
RESOLVED = "config.resolved.yaml"


class ValidationError(Exception):
    pass


def _load(args) -> config_mod.RunConfig:
    try:
        cfg = config_mod.load_config(args.config)
        return config_mod.with_overrides(cfg, seed=args.seed, workers=args.workers,
                                         variants=args.variant)
    except (ConfigError, ValueError) as exc:
        raise ValidationError(str(exc)) from None


def _prediction_days(cfg, series) -> list[int]:
    p = cfg.predict
    m = max(cfg.ga_config(v, s).memory for v in cfg.variants for s in cfg.param_sets)
    first_ok = cfg.window.in_sample_days + m
    if "dates" in p:
        try:
            idx = [series.index_of(_as_date(d)) for d in p["dates"]]
        except KeyError as exc:
            raise ValidationError(str(exc)) from None
    elif "start" in p or "end" in p:
        start = _as_date(p.get("start", series.dates[0]))
        end = _as_date(p.get("end", series.dates[-1]))
        idx = [i for i, d in enumerate(series.dates) if start <= d <= end]
    elif "last" in p:
        n = int(p["last"])
        idx = list(range(max(0, len(series) - n), len(series)))
    else:
        raise ValidationError("predict needs one of: dates, start/end, last")
    if not idx:
        raise ValidationError("no prediction days selected")
    bad = [i for i in idx if i < first_ok]
    if bad:
        raise ValidationError(f"{len(bad)} prediction day(s) lack {cfg.window.in_sample_days} in-sample "
                              f"days plus {m} warm-up symbols (earliest usable: {series.dates[first_ok] if first_ok < len(series) else 'none'})")
    return idx


def _prepare_output(cfg, resume: bool) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    resolved = out / RESOLVED
    text = cfg.dump()
    if resolved.exists() and resume:
        old = config_mod.yaml.safe_load(resolved.read_text())
        new = config_mod.yaml.safe_load(text)
        old.pop("workers", None), new.pop("workers", None)
        if old != new:
            raise ValidationError(f"{out} holds a run with a different configuration; "
                                  "use another output_dir or --no-resume")
    resolved.write_text(text)
    return out


def _regimes_for(records, cfg):
    days = sorted({r.date: r.realized_return for r in records}.items())
    return label_days([d for d, _ in days], [x for _, x in days], cfg.regimes)


def _write_report(records, cfg, out: Path) -> None:
    if not records:
        raise EmptyInput("no records to report")
    report = regime_breakdown(records, _regimes_for(records, cfg),
                              n_strategies=cfg.null_strategies, seed=cfg.seed)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "report.txt").write_text(report.render())


def cmd_predict(args) -> int:
    cfg = _load(args)
    if cfg.data is None:
        raise ValidationError("config has no data path")
    try:
        series = to_returns(load_prices(cfg.data, cfg.date_column, cfg.close_column), cfg.returns)
    except (OSError, MarketDataError) as exc:
        raise ValidationError(str(exc)) from None
    days = _prediction_days(cfg, series)
    out = _prepare_output(cfg, args.resume)
    ckpt = out / RECORDS
    if not args.resume and ckpt.exists():
        ckpt.unlink()
    total = len(cfg.variants) * len(cfg.param_sets) * len(days)
    count = [0]

    def progress(rec):
        count[0] += 1
        log.info("[%d/%d] %s %s %s: predicted %+d realized %+d", count[0], total, rec.variant.value,
                 rec.param_set, rec.date, rec.predicted_sign, rec.realized_sign)

    for variant in cfg.variants:
        for name in cfg.param_sets:
            run_experiment(series, days, cfg.window, cfg.ga_config(variant, name),
                           workers=cfg.n_workers, checkpoint=ckpt, param_set=name, progress=progress)
    _write_report(read_records(ckpt), cfg, out)
    print(f"{total} predictions -> {ckpt}")
    print((out / "report.txt").read_text(), end="")
    return EXIT_OK


def cmd_blackbox(args) -> int:
    cfg = _load(args)
    bb = cfg.blackbox
    try:
        planted = PlantedSpec.from_dict(bb.get("planted", {}))
        ga = cfg.ga_config(planted.build().variant)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid blackbox settings: {exc}") from None
    if planted.build().memory != ga.memory:
        raise ValidationError("planted memory must equal the GA memory")
    out = _prepare_output(cfg, args.resume)
    exp = run_blackbox(planted, ga, cfg.window, int(bb.get("holdout_days", 50)), seed=cfg.seed,
                       n_random=int(bb.get("random_genomes", 10000)), workers=cfg.n_workers)
    (out / "blackbox.json").write_text(exp.to_json() + "\n")
    write_records(out / "blackbox_records.jsonl", exp.records)
    print(json.dumps(exp.scorecard.to_dict(), indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load(args)
    path = Path(args.records) if args.records else cfg.output_dir / RECORDS
    if not path.exists():
        raise ValidationError(f"records file {path} does not exist")
    try:
        records = read_records(path)
    except PipelineError as exc:
        raise ValidationError(str(exc)) from None
    if not records:
        raise ValidationError(f"EmptyInput: {path} holds no records")
    out = path.parent
    _write_report(records, cfg, out)
    print((out / "report.txt").read_text(), end="")
    return EXIT_OK


def cmd_defaults(args) -> int:
    print(config_mod.default_config_yaml(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abm-reverse",
                                     description="Reverse-engineer a return series with evolved agent games.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help="worker processes (0 = CPU count)")
        p.add_argument("--variant", action="append", help="game variant to run (repeatable)")
        p.add_argument("--resume", dest="resume", action="store_true", default=True)
        p.add_argument("--no-resume", dest="resume", action="store_false")
        p.add_argument("-q", "--quiet", action="store_true")

    p = sub.add_parser("predict", help="sliding-window next-day predictions")
    common(p)
    p.set_defaults(func=cmd_predict)
    p = sub.add_parser("blackbox", help="plant, generate, recover, score")
    common(p)
    p.set_defaults(func=cmd_blackbox)
    p = sub.add_parser("report", help="rebuild report.json/report.txt from records")
    common(p)
    p.add_argument("--records", help="records file (default: <output_dir>/records.jsonl)")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("defaults", help="print the default configuration")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
