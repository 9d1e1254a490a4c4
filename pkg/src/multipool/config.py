"""Experiment configuration, loaded from and echoed as JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Union

from .simulate import Strategy

DEFAULT_RATES = [0.001, 0.01, 0.03, 0.05, 0.10]


def _default_strategies():
    return ["A", "B", "C", "D", "E", "F"]


@dataclass
class ExperimentConfig:
    population_size: int = 100_000
    rates: List[float] = field(default_factory=lambda: list(DEFAULT_RATES))
    alpha: float = 0.01
    beta: float = 0.15
    strategies: List[Union[str, dict]] = field(default_factory=_default_strategies)
    repetitions: int = 100
    seed: int = 20201
    out_dir: str = "results"
    pilot: bool = False
    pilot_size: int = 10_000
    pilot_batch_size: int = 10
    p_cut: float = 0.30
    workers: int = 1
    plot_data: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("alpha", "beta", "p_cut"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")
        if self.alpha + self.beta >= 1.0:
            raise ValueError("alpha + beta must be < 1")
        if not self.rates:
            raise ValueError("rates must be nonempty")
        for r in self.rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate {r!r} outside [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not self.strategies:
            raise ValueError("strategies must be nonempty")
        labels = [s.label for s in self.strategy_objects()]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate strategy labels: {labels}")

    def strategy_objects(self) -> List[Strategy]:
        return [Strategy.from_dict(s) for s in self.strategies]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
