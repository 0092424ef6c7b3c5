"""Flat key-value configuration shared by the CLI commands.

One JSON object, no nesting, unknown keys rejected. CLI flags override
file values; environment variables are never read. Numeric constraints are
re-validated here by constructing the owning modules' config types.
"""

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .aggregation import WeightVector, ZSCORE_EPS
from .grpo import GrpoConfig
from .lexical import CueThresholds
from .visual import AlignmentConfig, VARIANT_SENT_TOPK, VARIANTS


class ConfigError(ValueError):
    pass


@dataclass
class KitConfig:
    """All tunables in one place; clip_eps/kl_beta stay None until required."""

    w_sem: float = 1.0
    w_fmt: float = 1.0
    w_vis: float = 0.8
    w_pcg: float = 0.8
    alpha: float = 0.2
    variant: str = VARIANT_SENT_TOPK
    tau_low: float = 0.5
    tau_high: float = 0.8
    zscore_eps: float = ZSCORE_EPS
    clip_eps: float | None = None
    kl_beta: float | None = None
    group_size: int | None = None
    tau_turn: float = 10.0
    tau_round: float = 20.0
    embed_endpoint: str | None = None
    gtll_endpoint: str | None = None
    embed_fixtures: str | None = None
    gtll_fixtures: str | None = None
    embed_dim: int = 16
    request_timeout: float = 10.0
    request_retries: int = 2
    max_in_flight: int = 4
    workers: int = 4

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "KitConfig":
        """Read the flat JSON file (if any), apply overrides, validate."""
        values: dict = {}
        if path is not None:
            try:
                payload = json.loads(Path(path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path}: invalid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise ConfigError(f"config {path}: expected a flat JSON object")
            values.update(payload)
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.weights()
            self.alignment()
            self.thresholds()
            if self.clip_eps is not None or self.kl_beta is not None:
                self.grpo()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not (math.isfinite(self.zscore_eps) and self.zscore_eps > 0):
            raise ConfigError(f"zscore_eps must be > 0, got {self.zscore_eps}")
        if self.group_size is not None and self.group_size < 2:
            raise ConfigError(f"group_size must be >= 2, got {self.group_size}")
        for name in ("tau_turn", "tau_round", "request_timeout"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("embed_dim", "max_in_flight", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.request_retries < 0:
            raise ConfigError(f"request_retries must be >= 0, got {self.request_retries}")

    def weights(self) -> WeightVector:
        return WeightVector(sem=self.w_sem, fmt=self.w_fmt, vis=self.w_vis, pcg=self.w_pcg)

    def alignment(self) -> AlignmentConfig:
        return AlignmentConfig(alpha=self.alpha, variant=self.variant)

    def thresholds(self) -> CueThresholds:
        return CueThresholds(tau_low=self.tau_low, tau_high=self.tau_high)

    def grpo(self) -> GrpoConfig:
        if self.clip_eps is None or self.kl_beta is None:
            raise ConfigError("clip_eps and kl_beta must both be set in the config")
        return GrpoConfig(clip_eps=self.clip_eps, kl_beta=self.kl_beta)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
