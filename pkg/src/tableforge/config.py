"""Run configuration: defaults, config-file parsing, flag overrides.

Precedence is flags > config file > defaults. The file format is plain
``key = value`` lines; secrets never go in the file, only the *name* of
an environment variable does.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """A config file or flag value cannot be used."""


@dataclass(frozen=True)
class RunConfig:
    corpus: str = ""
    out: str = "out"
    seed: int = 0
    provider: str = "mock"
    endpoint: str = ""
    model: str = ""
    embed_provider: str = "hashed"
    embed_endpoint: str = ""
    embed_model: str = ""
    token_env: str = "TABLEFORGE_API_TOKEN"
    workers: int = 4
    n_targets: int = 2
    batch_size: int = 4
    hard_negatives: int = 15
    token_cap: int = 512
    fusion_weight: float = 0.9
    train_ratio: float = 11 / 14
    validation_ratio: float = 1 / 14
    test_ratio: float = 2 / 14
    temperature: float = 0.7
    max_tokens: int = 1024
    contrastive_temperature: float = 0.05
    learning_rate: float = 0.05
    epochs: int = 3
    embed_dimension: int = 1024
    projection_dim: int = 256
    blank_cells: bool = False
    ks: tuple[int, ...] = (2, 10)

    def __post_init__(self) -> None:
        if self.provider not in ("mock", "remote"):
            raise ConfigError(f"unknown chat provider {self.provider!r}")
        if self.embed_provider not in ("hashed", "remote"):
            raise ConfigError(
                f"unknown embedding provider {self.embed_provider!r}"
            )
        if self.n_targets < 1:
            raise ConfigError("n_targets must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.hard_negatives < 1:
            raise ConfigError("hard_negatives must be >= 1")
        if self.token_cap < 1:
            raise ConfigError("token_cap must be >= 1")
        if not 0.0 <= self.fusion_weight <= 1.0:
            raise ConfigError("fusion_weight must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.ks:
            raise ConfigError("at least one cutoff k is required")
        if any(k < 1 for k in self.ks):
            raise ConfigError("cutoffs must be >= 1")
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))

    @property
    def split_ratios(self) -> tuple[float, float, float]:
        return (self.train_ratio, self.validation_ratio, self.test_ratio)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: cannot read {raw!r} as a boolean")
    if kind == "tuple[int, ...]":
        return tuple(int(x) for x in raw.replace(",", " ").split())
    return raw


def parse_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    path = Path(path)
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{path}:{lineno}: {key}: {e}")
    return values


def build_run_config(
    config_path: str | Path | None = None, overrides: dict | None = None
) -> RunConfig:
    """Merge defaults, optional config file, and flag overrides."""
    values: dict = {}
    if config_path is not None:
        values.update(parse_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    return RunConfig(**values)
