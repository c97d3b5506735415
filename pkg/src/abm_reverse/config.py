"""Run configuration: YAML in, validated dataclasses out."""
from __future__ import annotations

import datetime as dt
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from .abm import GameVariant
from .ga import ConfigError, GAConfig
from .pipeline import PipelineError, WindowSpec

DEFAULTS = {
    "data": None,
    "date_column": "date",
    "close_column": "close",
    "returns": "log",
    "variants": ["GCMjG"],
    "window": {"in_sample_days": 25, "ensemble_runs": 10, "combiner": "mean"},
    "ga": {k: v for k, v in GAConfig().to_dict().items() if k not in ("seed", "variant")},
    "param_sets": {"default": {}},
    "predict": {"last": 20},
    "regimes": [],
    "output_dir": "run",
    "seed": 0,
    "workers": 0,
    "null_strategies": 1000,
    "blackbox": {
        "planted": {"variant": "GCMjG", "n_agents": 15, "n_strategies": 2, "memory": 3,
                    "threshold": 0.0, "seed": 0},
        "holdout_days": 50,
        "random_genomes": 10000,
    },
}


def default_config_yaml() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)


@dataclass
class RunConfig:
    data: Optional[Path]
    date_column: str
    close_column: str
    returns: str
    variants: list[GameVariant]
    window: WindowSpec
    ga: dict
    param_sets: dict
    predict: dict
    regimes: list
    output_dir: Path
    seed: int
    workers: int
    null_strategies: int
    blackbox: dict
    source: Optional[Path] = field(default=None, repr=False)

    def ga_config(self, variant: GameVariant, param_set: str = "default") -> GAConfig:
        settings = {**self.ga, **self.param_sets[param_set], "variant": variant, "seed": self.seed}
        return GAConfig.from_dict(settings)

    def validate(self) -> None:
        if self.returns not in ("log", "simple"):
            raise ConfigError("returns must be 'log' or 'simple'")
        if not self.variants:
            raise ConfigError("at least one variant is required")
        if not self.param_sets:
            raise ConfigError("param_sets must not be empty")
        if self.null_strategies < 1:
            raise ConfigError("null_strategies must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        for v in self.variants:
            for name in self.param_sets:
                cfg = self.ga_config(v, name)
                try:
                    self.window.validate(cfg.memory)
                except PipelineError as exc:
                    raise ConfigError(str(exc)) from None
        for r in self.regimes:
            if "start" not in r or "end" not in r:
                raise ConfigError("each regime range needs start and end")

    @property
    def n_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    def to_dict(self) -> dict:
        return {
            "data": str(self.data) if self.data is not None else None,
            "date_column": self.date_column,
            "close_column": self.close_column,
            "returns": self.returns,
            "variants": [v.value for v in self.variants],
            "window": {"in_sample_days": self.window.in_sample_days,
                       "ensemble_runs": self.window.ensemble_runs,
                       "combiner": self.window.combiner},
            "ga": dict(self.ga),
            "param_sets": {k: dict(v) for k, v in self.param_sets.items()},
            "predict": _plain(self.predict),
            "regimes": _plain(self.regimes),
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "workers": self.workers,
            "null_strategies": self.null_strategies,
            "blackbox": _plain(self.blackbox),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_plain(v) for v in x]
    if isinstance(x, dt.date):
        return x.isoformat()
    return x


_REPLACED_WHOLE = {"param_sets", "predict", "planted"}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown setting '{path}{k}'")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in _REPLACED_WHOLE:
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def config_from_dict(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    d = _merge(DEFAULTS, raw)
    try:
        variants = [GameVariant.parse(v) for v in (d["variants"] if isinstance(d["variants"], list) else [d["variants"]])]
        window = WindowSpec(**d["window"])
        unknown = set(d["ga"]) - set(GAConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown GA settings: {sorted(unknown)}")
        data = d["data"]
        out = d["output_dir"]
        cfg = RunConfig(
            data=(base_dir / data).resolve() if data else None,
            date_column=d["date_column"], close_column=d["close_column"], returns=d["returns"],
            variants=variants, window=window, ga=dict(d["ga"]),
            param_sets={str(k): dict(v or {}) for k, v in d["param_sets"].items()},
            predict=dict(d["predict"]), regimes=list(d["regimes"] or []),
            output_dir=(base_dir / out).resolve(), seed=int(d["seed"]), workers=int(d["workers"]),
            null_strategies=int(d["null_strategies"]), blackbox=dict(d["blackbox"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    cfg = config_from_dict(raw, path.parent)
    cfg.source = path
    return cfg


def with_overrides(cfg: RunConfig, seed=None, workers=None, variants=None) -> RunConfig:
    out = replace(cfg)
    if seed is not None:
        out.seed = int(seed)
    if workers is not None:
        out.workers = int(workers)
    if variants:
        out.variants = [GameVariant.parse(v) for v in variants]
    out.validate()
    return out
