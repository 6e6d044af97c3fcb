"""Key-value experiment configuration.

Plain UTF-8 text, one `key = value` per line, `#` starts a comment.
Unknown keys are rejected so typos fail loudly instead of silently
running with defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

VECTOR_CHANNELS = ("GOFF", "VIF", "Audio")
HISTOGRAM_CHANNELS = ("LogC", "Cuboid")
ALL_CHANNELS = ("GOFF", "VIF", "LogC", "Cuboid", "Audio")
CLASSIFIERS = ("svm_poly", "svm_hist", "simple_mkl", "mkboost")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str
    out_dir: str = "results"
    cache: str | None = None  # default: <out_dir>/features.egf
    channels: tuple[str, ...] = ALL_CHANNELS
    classifier: str = "simple_mkl"
    trials: int = 100
    train_fraction: float = 0.75
    seed: int = 0
    c_grid: tuple[float, ...] = (10.0,)
    codebook_k: int = 300
    pca_dims: int = 128
    ubm_components: int = 16
    boost_rounds: int = 20

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )
        if not self.channels:
            raise ConfigError("at least one feature channel must be enabled")
        for ch in self.channels:
            if ch not in ALL_CHANNELS:
                raise ConfigError(
                    f"unknown channel {ch!r}; valid: {', '.join(ALL_CHANNELS)}"
                )
        if len(set(self.channels)) != len(self.channels):
            raise ConfigError("duplicate channel names")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(
                f"unknown classifier {self.classifier!r}; valid: {', '.join(CLASSIFIERS)}"
            )
        if self.classifier == "svm_hist" and not any(
            ch in HISTOGRAM_CHANNELS for ch in self.channels
        ):
            raise ConfigError("svm_hist needs at least one histogram channel")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("c_grid must be non-empty positive values")
        for name, value in (
            ("codebook_k", self.codebook_k),
            ("pca_dims", self.pca_dims),
            ("ubm_components", self.ubm_components),
            ("boost_rounds", self.boost_rounds),
        ):
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")

    @property
    def cache_path(self) -> str:
        if self.cache is not None:
            return self.cache
        return str(Path(self.out_dir) / "features.egf")

    @property
    def histogram_channels(self) -> tuple[str, ...]:
        return tuple(ch for ch in self.channels if ch in HISTOGRAM_CHANNELS)

    @property
    def vector_channels(self) -> tuple[str, ...]:
        return tuple(ch for ch in self.channels if ch in VECTOR_CHANNELS)


_STR_KEYS = {"manifest", "out_dir", "cache", "classifier"}
_INT_KEYS = {"trials", "seed", "codebook_k", "pca_dims", "ubm_components", "boost_rounds"}
_FLOAT_KEYS = {"train_fraction"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "channels":
            return tuple(part.strip() for part in raw.split(",") if part.strip())
        if key == "c_grid":
            return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def load_config(path: str, **overrides) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "manifest" not in values:
        raise ConfigError(f"{path}: missing required key 'manifest'")
    # relative paths in the file resolve against the file's directory
    base = Path(path).resolve().parent
    for key in ("manifest", "out_dir", "cache"):
        if key in values and values[key] is not None:
            p = Path(values[key])
            if not p.is_absolute():
                values[key] = str(base / p)
    return ExperimentConfig(**values)


def write_config(path: str, config: ExperimentConfig) -> None:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
