"""Flat ``key = value`` run configuration with dotted sections.

The format is intentionally trivial: one assignment per line, ``#``
comments, sections spelled as dotted prefixes (``train.batch_size = 32``).
Unknown keys are rejected outright so a typo cannot silently fall back to a
default, and command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import TextIO

from .augment import ALL_TRANSFORMS, AugmentConfig
from .corpus import SplitSpec
from .model import ModelConfig
from .sampler import RatioConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse_bool(raw: str, key: str) -> bool:
    try:
        return _BOOLS[raw.lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}") from None


@dataclass
class RunConfig:
    taxonomy: str | None = None  # None -> bundled default
    corpus: str | None = None
    vectors: str | None = None
    synonyms: str | None = None
    stopwords: str | None = None
    out: str = "out"
    seed: int = 0
    oov_policy: str = "subword_hash"
    min_support: int = 0
    lenient: bool = False
    protocol: str = "both"
    sweep_totals: tuple[int, ...] = (0, 10, 40)
    synth_samples_per_label: int = 40
    synth_multi_label_fraction: float = 0.15
    serve_host: str = "127.0.0.1"
    serve_port: int = 8765
    serve_data_dir: str = "annotation-logs"
    split: SplitSpec = field(default_factory=lambda: SplitSpec(0.8, 0, 0))
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ratios: RatioConfig = field(default_factory=RatioConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def validate_paths(self) -> None:
        for name in ("taxonomy", "corpus", "vectors", "synonyms", "stopwords"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name}: path does not exist: {value}")


_TOP_KEYS = {
    "taxonomy": str,
    "corpus": str,
    "vectors": str,
    "synonyms": str,
    "stopwords": str,
    "out": str,
    "seed": int,
    "oov_policy": str,
    "protocol": str,
}
_SECTION_KEYS = {
    "corpus.min_support": ("min_support", int),
    "corpus.lenient": ("lenient", bool),
    "sweep.totals": ("sweep_totals", "int_list"),
    "synth.samples_per_label": ("synth_samples_per_label", int),
    "synth.multi_label_fraction": ("synth_multi_label_fraction", float),
    "serve.host": ("serve_host", str),
    "serve.port": ("serve_port", int),
    "serve.data_dir": ("serve_data_dir", str),
}
# split.seed and train.seed are not configurable separately: the top-level
# seed threads through every stochastic step
_SPLIT_FIELDS = {"train_fraction": float, "dev_count": int, "test_count": int}
_MODEL_FIELDS = {f.name: f.type for f in fields(ModelConfig)}
_TRAIN_FIELDS = {f.name: f.type for f in fields(TrainConfig) if f.name != "seed"}
_RATIO_FIELDS = {"mildly": int, "negative": int, "strictly": int}
_AUGMENT_FIELDS = {"strength": float, "kinds": "kinds", "stacked": int}


def _coerce(raw: str, kind, key: str):
    if kind is int or kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if kind is float or kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if kind is bool or kind == "bool":
        return _parse_bool(raw, key)
    if kind == "int_list":
        try:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers") from None
    if kind == "kinds":
        names = {t.value: t for t in ALL_TRANSFORMS}
        out = []
        for part in raw.split(","):
            part = part.strip()
            if part not in names:
                raise ConfigError(f"{key}: unknown transform {part!r}")
            out.append(names[part])
        if not out:
            raise ConfigError(f"{key}: empty transform list")
        return tuple(out)
    return raw


def parse_config_text(stream: TextIO) -> dict[str, object]:
    """Raw key -> coerced value pairs; rejects unknown keys and bad syntax."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if value == "":
            continue  # blank value leaves the default in place
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce_key(key, value)
    return values


def _coerce_key(key: str, value: str):
    if key in _TOP_KEYS:
        return _coerce(value, _TOP_KEYS[key], key)
    if key in _SECTION_KEYS:
        _, kind = _SECTION_KEYS[key]
        return _coerce(value, kind, key)
    section, _, name = key.partition(".")
    table = {
        "split": _SPLIT_FIELDS,
        "model": _MODEL_FIELDS,
        "train": _TRAIN_FIELDS,
        "ratios": _RATIO_FIELDS,
        "augment": _AUGMENT_FIELDS,
    }.get(section)
    if table is None or name not in table:
        raise ConfigError(f"unknown key {key!r}")
    kind = table[name]
    if isinstance(kind, str) and kind not in ("kinds", "int_list"):
        # dataclass field annotations arrive as strings under future imports
        kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, str)
    return _coerce(value, kind, key)


def build_run_config(values: dict[str, object]) -> RunConfig:
    """Assemble a validated RunConfig from parsed key/value pairs."""
    cfg = RunConfig()
    split_kw: dict = {}
    model_kw: dict = {}
    train_kw: dict = {}
    ratio_kw: dict = {}
    augment_kw: dict = {}
    for key, value in values.items():
        if key in _TOP_KEYS:
            setattr(cfg, key, value)
        elif key in _SECTION_KEYS:
            setattr(cfg, _SECTION_KEYS[key][0], value)
        else:
            section, _, name = key.partition(".")
            {"split": split_kw, "model": model_kw, "train": train_kw,
             "ratios": ratio_kw, "augment": augment_kw}[section][name] = value
    try:
        split_kw.setdefault("seed", cfg.seed)
        cfg.split = SplitSpec(**{**_spec_defaults(cfg.split), **split_kw})
        if model_kw:
            cfg.model = ModelConfig(**{**_spec_defaults(cfg.model), **model_kw})
        train_kw.setdefault("seed", cfg.seed)
        cfg.train = TrainConfig(**{**_spec_defaults(cfg.train), **train_kw})
        if ratio_kw:
            cfg.ratios = RatioConfig(**{**_spec_defaults(cfg.ratios), **ratio_kw})
        if augment_kw:
            base = {"strength": cfg.augment.strength, "kinds": cfg.augment.kinds, "stacked": cfg.augment.stacked}
            base.update(augment_kw)
            cfg.augment = AugmentConfig(stopwords=cfg.augment.stopwords, **base)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _spec_defaults(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj) if f.name != "stopwords"}


def load_run_config(path: str | None, overrides: dict[str, object] | None = None) -> RunConfig:
    """Config file (optional) plus override pairs, later values winning."""
    values: dict[str, object] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = _coerce_key(key, str(value)) if isinstance(value, str) else value
    return build_run_config(values)
