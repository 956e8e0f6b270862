"""Experiment configuration: defaults, file loading, flag overrides.

The default configuration reproduces the reference experiment matrix: three
families at sizes 12/16/20 (the lattice family uses the 3x4, 4x4, 4x5
shapes), depths {2, 4}, truncation weights {3, 4}, distillation thresholds
{0, 0.01, 0.3}, five instances per cell, the 11-start initialization roster,
500 surrogate steps, 100 exact steps, Adam at learning rate 0.02 with betas
(0.9, 0.999).

Configs are single JSON documents; any omitted key takes its default and any
command-line flag wins over the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .problems import FAMILIES, GRID_SHAPES
from .train import (
    METHOD_EXACT_ONLY,
    METHOD_SAFE_DISTILL,
    METHOD_SAFE_NODISTILL,
    SweepSpec,
)

METHOD_TOKENS = ("all", "exact-only", "safe", METHOD_SAFE_NODISTILL, METHOD_SAFE_DISTILL)

DEFAULT_SIZES = (12, 16, 20)


@dataclass
class ExperimentConfig:
    families: list[str] = field(default_factory=lambda: list(FAMILIES))
    sizes: dict[str, list[int]] = field(
        default_factory=lambda: {f: list(DEFAULT_SIZES) for f in FAMILIES}
    )
    depths: list[int] = field(default_factory=lambda: [2, 4])
    max_weights: list[int] = field(default_factory=lambda: [3, 4])
    thresholds: list[float] = field(default_factory=lambda: [0.0, 0.01, 0.3])
    methods: list[str] = field(default_factory=lambda: ["exact-only", "safe"])
    n_instances: int = 5
    master_seed: int = 20250
    pretrain_steps: int = 500
    finetune_steps: int = 100
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    relax_steps: int = 50
    edge_prob: float = 0.3
    init_ids: list[str] = field(default_factory=list)
    output_dir: str = "runs"
    workers: int = 0  # 0 -> logical core count

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = ExperimentConfig(**doc)
        if isinstance(cfg.sizes, list):
            cfg.sizes = {f: list(cfg.sizes) for f in cfg.families}
        cfg.sizes = {k: list(v) for k, v in cfg.sizes.items()}
        return cfg

    @staticmethod
    def load(path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(doc)

    def validate(self) -> None:
        for fam in self.families:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown family {fam!r}; choose from {FAMILIES}")
            for n in self.sizes.get(fam, []):
                if n < 2:
                    raise ConfigError(f"size {n} too small for family {fam}")
                if fam == "grid2d" and n not in GRID_SHAPES:
                    raise ConfigError(
                        f"no canonical grid shape for n={n}; supported: {sorted(GRID_SHAPES)}"
                    )
        if not self.depths or any(p < 1 for p in self.depths):
            raise ConfigError("depths must be positive")
        if any(w < 1 for w in self.max_weights):
            raise ConfigError("max_weights must be >= 1")
        if any(t < 0 for t in self.thresholds):
            raise ConfigError("thresholds must be >= 0")
        for m in self.methods:
            if m not in METHOD_TOKENS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHOD_TOKENS}")
        if self.n_instances < 1:
            raise ConfigError("n_instances must be >= 1")
        if not 0.0 < self.edge_prob <= 1.0:
            raise ConfigError("edge_prob must be in (0, 1]")
        if self.pretrain_steps < 0 or self.finetune_steps < 0 or self.relax_steps < 0:
            raise ConfigError("step budgets must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")

    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def sweep_spec(self) -> SweepSpec:
        """Translate the config into the sweep driver's description."""
        self.validate()
        tokens = set(self.methods)
        if "all" in tokens:
            tokens = {"exact-only", "safe"}
        methods = []
        if "exact-only" in tokens:
            methods.append(METHOD_EXACT_ONLY)
        thresholds: list[float] = []
        if "safe" in tokens:
            thresholds = list(self.thresholds)
        else:
            if METHOD_SAFE_NODISTILL in tokens:
                thresholds.append(0.0)
            if METHOD_SAFE_DISTILL in tokens:
                thresholds.extend(t for t in self.thresholds if t > 0)
        if thresholds:
            methods.append(METHOD_SAFE_NODISTILL)
        return SweepSpec(
            families=tuple(self.families),
            sizes={k: tuple(v) for k, v in self.sizes.items()},
            depths=tuple(self.depths),
            max_weights=tuple(self.max_weights),
            thresholds=tuple(dict.fromkeys(thresholds)),
            methods=tuple(methods),
            n_instances=self.n_instances,
            master_seed=self.master_seed,
            pretrain_steps=self.pretrain_steps,
            finetune_steps=self.finetune_steps,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            relax_steps=self.relax_steps,
            edge_prob=self.edge_prob,
            init_ids=tuple(self.init_ids),
        )
