"""Finite tower records: stages, dictionaries, fibers and JSON round-trips."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from cheesetower.errors import MissingDictionary, ZeroOfF
from cheesetower.geometry import FORMAT_VERSION, CheeseSpec, canonical_json, check_version
from cheesetower.surface.paths import LiftedPoint
from cheesetower.surface.rational import RationalFunction
from cheesetower.surface.schedule import ScheduleIndex, dictionary_source

TWO_PI = 2.0 * math.pi


@dataclass
class ExpStage:
    level: int
    f: RationalFunction
    c: float
    m: int
    schedule: ScheduleIndex
    dict_source: tuple
    certificate: dict = field(default_factory=dict)

    kind = "exp"

    @property
    def window(self) -> tuple[float, float]:
        return self.c, self.c + TWO_PI * self.m

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "f": self.f.to_dict(),
            "c": repr(self.c),
            "m": self.m,
            "schedule": list(self.schedule),
            "dict_source": list(self.dict_source),
            "certificate": self.certificate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpStage":
        return cls(
            int(d["level"]),
            RationalFunction.from_dict(d["f"]),
            float(d["c"]),
            int(d["m"]),
            ScheduleIndex(*d["schedule"]),
            tuple(d["dict_source"]),
            d.get("certificate", {}),
        )


@dataclass
class SqrtStage:
    level: int
    q: RationalFunction
    alpha: complex
    regular_value_margin: float
    schedule: ScheduleIndex
    dict_source: tuple
    certificate: dict = field(default_factory=dict)

    kind = "sqrt"

    @property
    def f(self) -> RationalFunction:
        return self.q.shifted(self.alpha)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "q": self.q.to_dict(),
            "alpha": [repr(self.alpha.real), repr(self.alpha.imag)],
            "regular_value_margin": self.regular_value_margin,
            "schedule": list(self.schedule),
            "dict_source": list(self.dict_source),
            "certificate": self.certificate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SqrtStage":
        return cls(
            int(d["level"]),
            RationalFunction.from_dict(d["q"]),
            complex(float(d["alpha"][0]), float(d["alpha"][1])),
            float(d["regular_value_margin"]),
            ScheduleIndex(*d["schedule"]),
            tuple(d["dict_source"]),
            d.get("certificate", {}),
        )


@dataclass
class TowerSpec:
    kind: str
    base: CheeseSpec
    stages: list = field(default_factory=list)
    dictionaries: dict = field(default_factory=dict)
    dictionary_certificates: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("exponential", "square_root"):
            raise ValueError(f"unknown tower kind {self.kind!r}")

    @property
    def stage_kind(self) -> str:
        return "exp" if self.kind == "exponential" else "sqrt"

    @property
    def height(self) -> int:
        return len(self.stages)

    def stage_pairs(self, N: int | None = None) -> list[tuple[str, RationalFunction]]:
        N = self.height if N is None else N
        return [(self.stage_kind, s.f) for s in self.stages[:N]]

    def sheet_product(self, N: int) -> int:
        if self.kind != "exponential":
            return 1
        return math.prod(s.m for s in self.stages[:N])

    def truncations(self) -> list[int]:
        return list(self.config.get("truncations", []))

    # serialization ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "base": self.base.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "dictionaries": {
                str(level): [g.to_dict() for g in entries] for level, entries in sorted(self.dictionaries.items())
            },
            "dictionary_certificates": {
                str(level): certs for level, certs in sorted(self.dictionary_certificates.items())
            },
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TowerSpec":
        check_version(doc)
        stage_cls = ExpStage if doc["kind"] == "exponential" else SqrtStage
        return cls(
            kind=doc["kind"],
            base=CheeseSpec.from_dict(doc["base"]),
            stages=[stage_cls.from_dict(s) for s in doc["stages"]],
            dictionaries={
                int(level): [RationalFunction.from_dict(g) for g in entries]
                for level, entries in doc["dictionaries"].items()
            },
            dictionary_certificates={int(k): v for k, v in doc.get("dictionary_certificates", {}).items()},
            config=doc.get("config", {}),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TowerSpec":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def next_function(tower: TowerSpec, N: int) -> RationalFunction:
    """The dictionary entry wired into stage N, viewed as a function of z1..zN.

    For square-root towers this is q_N, before the regular-value shift.
    """
    level, j = dictionary_source(N)
    entries = tower.dictionaries.get(level)
    if entries is None or len(entries) < j:
        raise MissingDictionary(f"stage {N} needs g_{{{level},{j}}} but level {level} has "
                                f"{0 if entries is None else len(entries)} entries")
    return entries[j - 1].with_arity(N)


def exp_fiber_offsets(theta: np.ndarray, c: float, m: int) -> list[np.ndarray]:
    """Integers k with theta + 2 pi k in the closed window [c, c + 2 pi m]."""
    lo = np.ceil((c - theta) / TWO_PI - 1e-12).astype(int)
    hi = np.floor((c + TWO_PI * m - theta) / TWO_PI + 1e-12).astype(int)
    return [np.arange(a, b + 1) for a, b in zip(lo, hi)]


def fiber_array(points, tower: TowerSpec, N: int, zero_tol: float = 1e-12) -> np.ndarray:
    """All points of X_N over the given z1 values, as rows of coordinates."""
    Z = np.asarray(points, dtype=complex).reshape(-1, 1)
    for n, stage in enumerate(tower.stages[:N], start=1):
        val = stage.f(Z[:, :n])
        if np.any(np.abs(val) < zero_tol):
            i = int(np.argmin(np.abs(val)))
            raise ZeroOfF(f"stage {n} function vanishes near z1={Z[i, 0]:.6g}")
        if tower.kind == "square_root":
            w = np.sqrt(val)
            Z = np.concatenate([np.column_stack([Z, w]), np.column_stack([Z, -w])])
        else:
            lv = np.log(val)
            offs = exp_fiber_offsets(lv.imag, stage.c, stage.m)
            rows = np.repeat(np.arange(len(Z)), [len(o) for o in offs])
            ks = np.concatenate(offs) if offs else np.zeros(0)
            Z = np.column_stack([Z[rows], lv[rows] + 2j * math.pi * ks])
    return Z


def fiber(p: complex, tower: TowerSpec, N: int) -> list[LiftedPoint]:
    """Every point of X_N lying over the base point p."""
    Z = fiber_array([p], tower, N)
    pairs = tower.stage_pairs(N)
    out = []
    for row in Z:
        res = []
        for n, (kind, f) in enumerate(pairs, start=1):
            val = complex(f(row[:n]))
            res.append(float(abs(np.exp(row[n]) - val if kind == "exp" else row[n] ** 2 - val)))
        out.append(LiftedPoint(tuple(complex(z) for z in row), tuple(res)))
    return out


def tower_jacobian(tower: TowerSpec, Z: np.ndarray, N: int | None = None) -> np.ndarray:
    """dz_j/dz1 for every coordinate at points of X_N (rows of Z)."""
    N = tower.height if N is None else N
    Z = np.atleast_2d(Z)
    J = np.zeros((len(Z), N + 1), dtype=complex)
    J[:, 0] = 1.0
    for n, (kind, f) in enumerate(tower.stage_pairs(N), start=1):
        val, grad = f.value_and_gradient(Z[:, :n])
        dval = np.einsum("ij,ij->i", grad, J[:, : grad.shape[1]])
        J[:, n] = dval / val if kind == "exp" else dval / (2.0 * Z[:, n])
    return J


def total_derivative(g: RationalFunction, tower: TowerSpec, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values of g and dg/dz1 at points of the tower (rows of Z)."""
    Z = np.atleast_2d(Z)
    J = tower_jacobian(tower, Z, g.arity - 1)
    val, grad = g.value_and_gradient(Z[:, : g.arity])
    return val, np.einsum("ij,ij->i", grad, J[:, : g.arity])
