"""Run configuration: a sectioned TOML file mapped onto one flat dataclass."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .predictor import LOSS_MODES

VARIANTS = ("mle", "mle_vae", "mle_cascading", "ccrec")
STAGES = ("prepare", "train_mle", "train_vae", "train_ccrec", "evaluate", "ablate")

SECTIONS = {
    "dataset": ("source_kind", "paths", "features_path", "feature_numeric", "feature_categorical",
                "event_types", "time_format", "year", "window_days", "window_semantics",
                "cutoff", "leave_last", "max_past", "max_future", "test_max_past",
                "test_fraction", "user_holdout"),
    "model": ("k", "d1", "num_heads", "num_layers", "ff_dim", "pooling", "vae_latent",
              "vae_hidden", "d2", "hash_dim", "r_size", "candidate_sampling", "n", "beta",
              "loss_mode"),
    "train": ("lr", "epochs", "batch_size", "mle_epochs", "vae_epochs", "ccrec_epochs", "seed"),
    "eval": ("ks",),
    "run": ("variant", "stages", "ablation_variants", "r_size_sweep"),
}


@dataclass
class RunConfig:
    source_kind: str = "canonical"
    paths: list = field(default_factory=list)
    features_path: str | None = None
    feature_numeric: list = field(default_factory=list)
    feature_categorical: list = field(default_factory=list)
    event_types: list = field(default_factory=list)
    time_format: str = "mmdd"
    year: int = 2014
    window_days: float = 5.0
    window_semantics: str = "anchor"
    cutoff: int | None = None
    leave_last: int | None = 1
    max_past: int | None = None
    max_future: int | None = None
    test_max_past: int | None = None
    test_fraction: float = 0.1
    user_holdout: bool = True

    k: int = 10
    d1: int = 64
    num_heads: int = 2
    num_layers: int = 1
    ff_dim: int | None = None
    pooling: str = "mean"
    vae_latent: int = 256
    vae_hidden: int = 256
    d2: int = 64
    hash_dim: int = 512
    r_size: int = 10
    candidate_sampling: str = "top"
    n: int = 5
    beta: float = 1.0
    loss_mode: str = "weighted_score"

    lr: float = 1e-4
    epochs: int = 100
    batch_size: int = 256
    mle_epochs: int | None = None
    vae_epochs: int | None = None
    ccrec_epochs: int | None = None
    seed: int = 0

    ks: list = field(default_factory=lambda: [1, 3, 5])

    variant: str = "ccrec"
    stages: list = field(default_factory=lambda: list(STAGES[:5]))
    ablation_variants: list = field(default_factory=lambda: list(VARIANTS))
    r_size_sweep: list = field(default_factory=list)

    def validate(self):
        for name in ("k", "d1", "num_heads", "num_layers", "vae_latent", "vae_hidden", "d2",
                     "hash_dim", "r_size", "n", "epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.d1 % self.num_heads:
            raise ConfigError("d1 must be divisible by num_heads")
        if self.d1 % 2:
            raise ConfigError("d1 must be even for the positional encoding")
        if self.lr <= 0 or self.window_days <= 0 or self.beta < 0:
            raise ConfigError("lr and window_days must be positive, beta non-negative")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        for v in self.ablation_variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown ablation variant {v!r}")
        for s in self.stages:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}")
        if self.pooling not in ("mean", "last"):
            raise ConfigError("pooling must be mean or last")
        if self.candidate_sampling not in ("top", "sample"):
            raise ConfigError("candidate_sampling must be top or sample")
        if self.window_semantics not in ("anchor", "gap"):
            raise ConfigError("window_semantics must be anchor or gap")
        if (self.cutoff is None) == (self.leave_last is None):
            raise ConfigError("set exactly one of cutoff or leave_last")
        if not self.ks or any(k <= 0 for k in self.ks):
            raise ConfigError("ks must be positive integers")
        return self

    def stage_epochs(self, stage):
        override = {"train_mle": self.mle_epochs, "train_vae": self.vae_epochs,
                    "train_ccrec": self.ccrec_epochs}.get(stage)
        return override if override is not None else self.epochs

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate()

    # --- serialization ---------------------------------------------------

    def to_sections(self):
        d = asdict(self)
        return {sec: {k: d[k] for k in keys if d[k] is not None} for sec, keys in SECTIONS.items()}

    def dumps(self):
        lines = []
        for sec, values in self.to_sections().items():
            lines.append(f"[{sec}]")
            for key, value in values.items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def loads(cls, text):
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        known = {f.name for f in fields(cls)}
        flat = {}
        for key, value in data.items():
            if isinstance(value, dict):
                if key not in SECTIONS:
                    raise ConfigError(f"unknown section [{key}]")
                for k2, v2 in value.items():
                    if k2 not in SECTIONS[key]:
                        raise ConfigError(f"unknown key {k2!r} in [{key}]")
                    flat[k2] = v2
            elif key in known:
                flat[key] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
        if "cutoff" in flat and "leave_last" not in flat:
            flat["leave_last"] = None
        return cls(**flat).validate()

    @classmethod
    def load(cls, path):
        path = Path(path)
        cfg = cls.loads(path.read_text())
        base = path.parent
        cfg.paths = [str(p if Path(p).is_absolute() else (base / p)) for p in cfg.paths]
        if cfg.features_path and not Path(cfg.features_path).is_absolute():
            cfg.features_path = str(base / cfg.features_path)
        return cfg

    def hash(self, exclude=()):
        d = {k: v for k, v in asdict(self).items() if k not in exclude}
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")
