"""Experiment configuration: a JSON document whose defaults reproduce the retina study.

Every key is optional; missing keys take the defaults below.  Unknown keys
and invalid values are rejected together in one :class:`ConfigError`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .composite import CompositeSpec
from .nnet import ACTIVATIONS, MlpSpec
from .optimizer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration: " + "; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    retina_size: int = 10
    max_run: int = 4
    trunk_widths: tuple[int, ...] = (10, 8, 8, 2)
    head_widths: tuple[int, ...] = (2, 4, 1)
    v_dim: int = 2
    activation: str = "sigmoid"
    train: TrainConfig = field(default_factory=TrainConfig)
    n_values: tuple[int, ...] = (1, 5, 9, 13, 17, 21)
    m_values: tuple[int, ...] = tuple(range(1, 152, 10))
    trials: int = 3
    transfer_m_values: tuple[int, ...] = (1, 2, 4, 8, 16, 24, 32, 40)
    transfer_repetitions: int = 32
    gap_n: int = 5
    gap_m_values: tuple[int, ...] = (11, 101)
    gap_alpha: float = 0.3
    gap_nu: float = 0.05
    gap_trials: int = 40
    # bounds sweep; W_F / W_G of None mean "count the configured networks"
    bound_M: float = 1.0
    bound_alpha: float = 0.1
    bound_nu: float = 0.1
    bound_delta: float = 0.01
    bound_W_F: int | None = None
    bound_W_G: int | None = None
    bound_k: float = 10.0
    bound_k_prime: float = 10.0
    bound_n_values: tuple[int, ...] = tuple(range(1, 51))
    out_dir: str = "results"
    seed: int = 0

    def __post_init__(self):
        errors = []
        for name in ("trunk_widths", "head_widths", "n_values", "m_values",
                     "transfer_m_values", "gap_m_values", "bound_n_values"):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if not value:
                errors.append(f"{name} must be non-empty")
            elif any(not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in value):
                errors.append(f"{name} must contain positive integers")
        if len(self.trunk_widths) < 2 or len(self.head_widths) < 2:
            errors.append("trunk_widths and head_widths need an input and an output width")
        elif not errors:
            if self.trunk_widths[0] != self.retina_size:
                errors.append(
                    f"trunk_widths[0]={self.trunk_widths[0]} must equal retina_size={self.retina_size}"
                )
            if self.trunk_widths[-1] != self.v_dim or self.head_widths[0] != self.v_dim:
                errors.append(
                    f"trunk output {self.trunk_widths[-1]} and head input {self.head_widths[0]}"
                    f" must both equal v_dim={self.v_dim}"
                )
            if self.head_widths[-1] != 1:
                errors.append("heads must have a single output")
        if self.activation not in ACTIVATIONS:
            errors.append(f"activation must be one of {ACTIVATIONS}")
        if self.retina_size < 2 or not 1 <= self.max_run < self.retina_size:
            errors.append("need retina_size >= 2 and 1 <= max_run < retina_size")
        for name in ("trials", "transfer_repetitions", "gap_trials", "gap_n"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1")
        if not 0 < self.gap_alpha:
            errors.append("gap_alpha must be > 0")
        if not self.gap_nu > 0:
            errors.append("gap_nu must be > 0")
        if not 0 < self.bound_alpha < 1:
            errors.append(f"bound_alpha must lie in (0, 1) (got {self.bound_alpha})")
        if not 0 < self.bound_delta < 1:
            errors.append(f"bound_delta must lie in (0, 1) (got {self.bound_delta})")
        if not (self.bound_nu > 0 and self.bound_M > 0 and self.bound_k > 0 and self.bound_k_prime > 0):
            errors.append("bound_nu, bound_M, bound_k and bound_k_prime must be > 0")
        for name in ("bound_W_F", "bound_W_G"):
            v = getattr(self, name)
            if v is not None and v < 1:
                errors.append(f"{name} must be a positive integer or null")
        if errors:
            raise ConfigError(errors)

    @property
    def spec(self) -> CompositeSpec:
        return CompositeSpec(
            MlpSpec.from_widths(self.trunk_widths, self.activation),
            MlpSpec.from_widths(self.head_widths, self.activation),
        )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, used as model provenance."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError(["configuration must be a JSON object"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        errors = [f"unknown key {k!r}" for k in unknown]
        kw = {k: v for k, v in d.items() if k in known}
        if "train" in kw:
            train = kw["train"]
            train_known = {f.name for f in fields(TrainConfig)}
            if not isinstance(train, dict):
                errors.append("train must be an object")
                del kw["train"]
            else:
                errors += [f"unknown key 'train.{k}'" for k in sorted(set(train) - train_known)]
                try:
                    kw["train"] = TrainConfig(**{k: v for k, v in train.items() if k in train_known})
                except (TypeError, ValueError) as exc:
                    errors.append(f"train: {exc}")
                    del kw["train"]
        if errors:
            raise ConfigError(errors)
        try:
            cfg = cls(**kw)
        except TypeError as exc:
            raise ConfigError([str(exc)]) from None
        if "train" not in d or "seed" not in d.get("train", {}):
            # the global seed drives training unless the file pins its own
            cfg = replace(cfg, train=replace(cfg.train, seed=cfg.seed))
        return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a config file; ``None`` gives the defaults.

    Raises :class:`ConfigError` for bad content and ``OSError`` if unreadable.
    """
    if path is None:
        return ExperimentConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return ExperimentConfig.from_dict(data)
