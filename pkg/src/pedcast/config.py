"""Run configuration: strict schema over a YAML file with paper-constant defaults.

Every tunable constant (batch size 64, 400 epochs, learning rates 1e-3/1e-4,
20 samples, KL weight 10, hidden size 32, 16-dim latent, 8 observed / 12
predicted steps) lives in the dataclass defaults below so the whole
configuration surface is auditable in one place. Unknown keys are rejected,
never ignored.
"""

import dataclasses
from dataclasses import dataclass, field

import yaml


class ConfigError(Exception):
    """Invalid configuration (bad key, bad value, missing file/path)."""


@dataclass
class SyntheticConfig:
    kinds: list = field(default_factory=lambda: ["linear", "turn"])
    windows_per_kind: int = 10
    n_ped: int = 2
    held_out_windows: int = 4


@dataclass
class DatasetConfig:
    format: str = "synthetic"  # synthetic | ethucy | sdd
    root: str = ""
    held_out: str = ""
    dt: float = 0.0  # 0 means "use the format default" (0.4 s ETH/UCY, 0.5 s SDD)
    downsample_every: int = 1
    t_obs: int = 8
    t_pred: int = 12
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)


@dataclass
class TrainSection:
    batch_size: int = 64
    epochs: int = 400
    lr_main: float = 0.001
    lr_latent: float = 0.0001
    samples: int = 20
    kl_weight: float = 10.0
    clip_norm: float = 10.0


@dataclass
class ModelSection:
    hidden_dim: int = 32
    embed_dim: int = 16
    latent_hidden_dim: int = 32
    use_temporal_attention: bool = True
    use_graph_attention: bool = True
    social_mode: str = "soft"  # none | hard | soft
    use_latent_predictor: bool = True
    social_per_step: bool = False


@dataclass
class EvalSection:
    k: int = 20
    density_samples: int = 300
    density_bins: int = 64
    density_margin: float = 2.0
    density_window: int = 0


@dataclass
class RunConfig:
    seed: int = 1
    output_dir: str = "runs/out"
    single_thread: bool = False
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainSection = field(default_factory=TrainSection)
    model: ModelSection = field(default_factory=ModelSection)
    eval: EvalSection = field(default_factory=EvalSection)


_FORMATS = ("synthetic", "ethucy", "sdd")
_SOCIAL_MODES = ("none", "hard", "soft")


def _fill(cls, data, section):
    """Build dataclass `cls` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            where = section or "top level"
            raise ConfigError(f"unknown config key '{key}' in {where}")
        ftype = fields[key].type
        if dataclasses.is_dataclass(_resolve(ftype)):
            kwargs[key] = _fill(_resolve(ftype), value, f"{section}.{key}" if section else key)
        else:
            kwargs[key] = _coerce(key, value, ftype, section)
    return cls(**kwargs)


def _resolve(ftype):
    # dataclass field types arrive as classes here (no string annotations used)
    return ftype


def _coerce(key, value, ftype, section):
    where = f"{section}.{key}" if section else key
    if ftype is bool or ftype == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"'{where}' must be a boolean, got {value!r}")
        return value
    if ftype is int or ftype == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{where}' must be an integer, got {value!r}")
        return value
    if ftype is float or ftype == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{where}' must be a number, got {value!r}")
        return float(value)
    if ftype is str or ftype == "str":
        if not isinstance(value, str):
            raise ConfigError(f"'{where}' must be a string, got {value!r}")
        return value
    if ftype is list or ftype == "list":
        if not isinstance(value, list):
            raise ConfigError(f"'{where}' must be a list, got {value!r}")
        return value
    raise ConfigError(f"unhandled config field type for '{where}'")


def validate_config(cfg: RunConfig):
    if cfg.dataset.format not in _FORMATS:
        raise ConfigError(f"dataset.format must be one of {_FORMATS}, got '{cfg.dataset.format}'")
    if cfg.model.social_mode not in _SOCIAL_MODES:
        raise ConfigError(f"model.social_mode must be one of {_SOCIAL_MODES}, got '{cfg.model.social_mode}'")
    if cfg.model.social_mode != "none" and not cfg.model.use_graph_attention:
        raise ConfigError("model.social_mode requires use_graph_attention (social attention gates graph aggregation)")
    if cfg.dataset.t_obs <= 0 or cfg.dataset.t_pred <= 0:
        raise ConfigError("dataset.t_obs and dataset.t_pred must be positive")
    if cfg.train.samples < 1:
        raise ConfigError("train.samples must be >= 1")
    if cfg.train.kl_weight < 0:
        raise ConfigError("train.kl_weight must be >= 0")
    if cfg.dataset.dt < 0:
        raise ConfigError("dataset.dt must be positive (or 0 for the format default)")
    return cfg


def load_config(path) -> RunConfig:
    """Parse a YAML run configuration, applying defaults for absent keys.

    Raises ConfigError naming the offending key for unknown keys, wrong
    types, or invalid values; missing files raise ConfigError too.
    """
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if data is None:
        data = {}
    cfg = _fill(RunConfig, data, "")
    return validate_config(cfg)


def effective_dt(cfg: RunConfig) -> float:
    """Step duration: explicit override, else the format's sampling-rate default."""
    if cfg.dataset.dt > 0:
        return cfg.dataset.dt
    return {"ethucy": 0.4, "sdd": 0.5, "synthetic": 0.4}[cfg.dataset.format]
