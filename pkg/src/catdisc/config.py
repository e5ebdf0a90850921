"""Flat key=value run configuration with CLI-flag override semantics."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .losses import SinkhornSpec, Temperatures
from .trainer import TrainSpec
from .views import ViewSpec


class ConfigError(Exception):
    """Invalid configuration key or value."""


@dataclass
class RunConfig:
    """Every tunable of the pipeline plus input/output paths.

    Serialized as plain-text key=value, one per line, in declaration order;
    unknown keys are rejected on parse.
    """

    alpha: float = 0.3
    tau_sup: float = 0.07
    tau_u: float = 0.05
    sinkhorn_epsilon: float = 0.05
    sinkhorn_iters: int = 3
    weak_noise_sigma: float = 0.02
    strong_noise_sigma: float = 0.15
    strong_mask_fraction: float = 0.25
    batch_size: int = 256
    epochs: int = 30
    learning_rate: float = 0.1
    k_proto: int = 100
    hidden_dim: int = 64
    out_dim: int = 8
    seed: int = 0
    enable_sup: bool = True
    enable_js: bool = True
    enable_swapped: bool = True
    m_neighbors: int = 5
    min_gain: float = 1e-7
    data: str = ""
    out_dir: str = ""

    def validate(self) -> None:
        try:
            self.train_spec()
            if self.m_neighbors < 1:
                raise ValueError("m_neighbors must be >= 1")
            if not self.min_gain > 0:
                raise ValueError("min_gain must be positive")
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def train_spec(self) -> TrainSpec:
        return TrainSpec(
            alpha=self.alpha,
            temps=Temperatures(tau_sup=self.tau_sup, tau_u=self.tau_u),
            sinkhorn=SinkhornSpec(epsilon=self.sinkhorn_epsilon, n_iters=self.sinkhorn_iters),
            view=ViewSpec(
                weak_noise_sigma=self.weak_noise_sigma,
                strong_noise_sigma=self.strong_noise_sigma,
                strong_mask_fraction=self.strong_mask_fraction,
                seed=self.seed,
            ),
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            k_proto=self.k_proto,
            hidden_dim=self.hidden_dim,
            out_dim=self.out_dim,
            seed=self.seed,
            enable_sup=self.enable_sup,
            enable_js=self.enable_js,
            enable_swapped=self.enable_swapped,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        cfg.update_from_text(text, source)
        return cfg

    def update_from_text(self, text: str, source: str = "<config>") -> None:
        types = {f.name: f.type for f in fields(self)}
        defaults = RunConfig()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{source}: line {lineno}: expected key=value")
            if key not in types:
                raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
            setattr(self, key, _convert(key, value.strip(), getattr(defaults, key), source, lineno))

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))


def _convert(key: str, value: str, default, source: str, lineno: int):
    try:
        if isinstance(default, bool):
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"bad boolean {value!r}")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError as e:
        raise ConfigError(f"{source}: line {lineno}: key {key!r}: {e}") from None
