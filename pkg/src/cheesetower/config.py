"""Run configuration shared by every CLI command."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from cheesetower.geometry import FORMAT_VERSION, canonical_json, check_version


@dataclass
class Tolerances:
    quadrature: float = 1e-12
    lift: float = 1e-9
    transversality: float = 1e-3
    zero_free: float = 1e-3

    def validate(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name} must be positive")


@dataclass
class RunConfig:
    seed: int = 42
    radius_budget: float = 0.5
    hole_count: int = 20
    min_crossing_angle: float = 0.01
    truncations: list = field(default_factory=lambda: [5, 10, 20])
    stages: int = 2
    kind: str = "exp"
    dictionary_size: int = 8
    target_delta: float = 1.0
    tests: int = 50
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = "out"

    def validate(self) -> "RunConfig":
        if not 0 < self.radius_budget < 1:
            raise ValueError("radius_budget must lie in (0, 1)")
        if self.hole_count < 0 or self.stages < 0:
            raise ValueError("hole_count and stages must be nonnegative")
        if self.kind not in ("exp", "sqrt"):
            raise ValueError("kind must be exp or sqrt")
        if self.dictionary_size < 1 or self.tests < 1:
            raise ValueError("dictionary_size and tests must be positive")
        if not self.min_crossing_angle > 0 or not self.target_delta > 0:
            raise ValueError("min_crossing_angle and target_delta must be positive")
        if any(k < 0 for k in self.truncations):
            raise ValueError("truncations must be nonnegative")
        self.tolerances.validate()
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = FORMAT_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "version" in d:
            check_version(d)
            d.pop("version")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        tol = d.pop("tolerances", {})
        cfg = cls(**d, tolerances=Tolerances(**tol))
        cfg.truncations = [int(k) for k in cfg.truncations]
        return cfg

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def merged(self, overrides: dict) -> "RunConfig":
        """A copy with every non-None override applied (tolerance keys prefixed ``tol_``)."""
        d = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key.startswith("tol_"):
                d["tolerances"][key[4:]] = value
            elif key in d:
                d[key] = value
        return RunConfig.from_dict(d)
