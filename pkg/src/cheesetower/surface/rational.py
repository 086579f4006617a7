"""Multivariate rational functions with complex coefficients.

Polynomials are stored as sorted tuples of ``(exponents, coefficient)`` terms.
Evaluation takes coordinate arrays shaped ``(..., n)`` with ``n >= arity``;
columns beyond the arity are ignored, which is how a function of z1..zd is
viewed as a function on a higher tower level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _normalize(terms, arity: int) -> tuple:
    acc: dict[tuple, complex] = {}
    for exps, coef in terms:
        exps = tuple(int(e) for e in exps) + (0,) * (arity - len(exps))
        if len(exps) != arity or any(e < 0 for e in exps):
            raise ValueError(f"bad exponent tuple {exps} for arity {arity}")
        acc[exps] = acc.get(exps, 0j) + complex(coef)
    return tuple(sorted((e, c) for e, c in acc.items() if c != 0))


def _poly_mul(p, q, arity):
    out = []
    for e1, c1 in p:
        for e2, c2 in q:
            out.append((tuple(a + b for a, b in zip(e1, e2)), c1 * c2))
    return _normalize(out, arity)


def _poly_eval(terms, Z, arity, grad: bool):
    shape = Z.shape[:-1]
    val = np.zeros(shape, dtype=complex)
    g = np.zeros(shape + (arity,), dtype=complex) if grad else None
    if not terms:
        return val, g
    maxdeg = max(max(e) if e else 0 for e, _ in terms)
    # powers[i][p] = z_i ** p
    powers = [[np.ones(shape, dtype=complex)] for _ in range(arity)]
    for i in range(arity):
        zi = Z[..., i]
        for _ in range(maxdeg):
            powers[i].append(powers[i][-1] * zi)
    for exps, coef in terms:
        mono = np.full(shape, coef, dtype=complex)
        for i, e in enumerate(exps):
            if e:
                mono = mono * powers[i][e]
        val += mono
        if grad:
            for i, e in enumerate(exps):
                if e:
                    part = np.full(shape, coef * e, dtype=complex)
                    for j, f in enumerate(exps):
                        p = f - 1 if j == i else f
                        if p:
                            part = part * powers[j][p]
                    g[..., i] += part
    return val, g


@dataclass(frozen=True)
class RationalFunction:
    numerator: tuple
    denominator: tuple
    arity: int

    def __post_init__(self):
        object.__setattr__(self, "numerator", _normalize(self.numerator, self.arity))
        object.__setattr__(self, "denominator", _normalize(self.denominator, self.arity))
        if not self.denominator:
            raise ValueError("denominator is identically zero")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: complex, arity: int = 1) -> "RationalFunction":
        one = ((0,) * arity, 1.0)
        return cls((((0,) * arity, complex(value)),), (one,), arity)

    @classmethod
    def polynomial(cls, terms, arity: int) -> "RationalFunction":
        return cls(tuple(terms), (((0,) * arity, 1.0),), arity)

    @classmethod
    def mobius(cls, zero: complex, pole: complex, scale: complex = 1.0, arity: int = 1, var: int = 0):
        """``scale * (z_var - zero) / (z_var - pole)``."""
        e1 = tuple(1 if i == var else 0 for i in range(arity))
        e0 = (0,) * arity
        num = ((e1, complex(scale)), (e0, -complex(scale) * zero))
        den = ((e1, 1.0), (e0, -complex(pole)))
        return cls(num, den, arity)

    @classmethod
    def variable(cls, index: int, arity: int) -> "RationalFunction":
        e = tuple(1 if i == index else 0 for i in range(arity))
        return cls.polynomial([(e, 1.0)], arity)

    # algebra -------------------------------------------------------------
    def with_arity(self, arity: int) -> "RationalFunction":
        if arity < self.arity:
            used = {i for e, _ in self.numerator + self.denominator for i, p in enumerate(e) if p}
            if used and max(used) >= arity:
                raise ValueError("cannot drop variables the function depends on")
            trim = lambda t: tuple((e[:arity], c) for e, c in t)
            return RationalFunction(trim(self.numerator), trim(self.denominator), arity)
        return RationalFunction(self.numerator, self.denominator, arity)

    @property
    def native_arity(self) -> int:
        """One more than the highest variable index actually used (at least 1)."""
        used = [i for e, _ in self.numerator + self.denominator for i, p in enumerate(e) if p]
        return max(used) + 1 if used else 1

    def __mul__(self, other: "RationalFunction") -> "RationalFunction":
        n = max(self.arity, other.arity)
        a, b = self.with_arity(n), other.with_arity(n)
        return RationalFunction(
            _poly_mul(a.numerator, b.numerator, n), _poly_mul(a.denominator, b.denominator, n), n
        )

    def shifted(self, alpha: complex) -> "RationalFunction":
        """``self - alpha``."""
        shift = tuple((e, -complex(alpha) * c) for e, c in self.denominator)
        return RationalFunction(self.numerator + shift, self.denominator, self.arity)

    # evaluation ------------------------------------------------------------
    def _prep(self, Z):
        Z = np.asarray(Z, dtype=complex)
        if Z.ndim == 0:
            Z = Z[None]
        if Z.shape[-1] < self.arity:
            raise ValueError(f"need at least {self.arity} coordinates, got shape {Z.shape}")
        return Z[..., : self.arity]

    def __call__(self, Z) -> np.ndarray:
        Z = self._prep(Z)
        p, _ = _poly_eval(self.numerator, Z, self.arity, False)
        q, _ = _poly_eval(self.denominator, Z, self.arity, False)
        return p / q

    def of_z1(self, z) -> np.ndarray:
        """Evaluate an arity-1 function on an array of plain z1 values."""
        return self(np.asarray(z, dtype=complex)[..., None])

    def denominator_value(self, Z) -> np.ndarray:
        return _poly_eval(self.denominator, self._prep(Z), self.arity, False)[0]

    def numerator_value(self, Z) -> np.ndarray:
        return _poly_eval(self.numerator, self._prep(Z), self.arity, False)[0]

    def value_and_gradient(self, Z) -> tuple[np.ndarray, np.ndarray]:
        Z = self._prep(Z)
        p, dp = _poly_eval(self.numerator, Z, self.arity, True)
        q, dq = _poly_eval(self.denominator, Z, self.arity, True)
        val = p / q
        grad = (dp - val[..., None] * dq) / q[..., None]
        return val, grad

    # serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        enc = lambda terms: [
            {"exp": list(e), "re": repr(c.real), "im": repr(c.imag)} for e, c in terms
        ]
        return {"arity": self.arity, "numerator": enc(self.numerator), "denominator": enc(self.denominator)}

    @classmethod
    def from_dict(cls, doc: dict) -> "RationalFunction":
        dec = lambda terms: tuple(
            (tuple(t["exp"]), complex(float(t["re"]), float(t["im"]))) for t in terms
        )
        return cls(dec(doc["numerator"]), dec(doc["denominator"]), int(doc["arity"]))


def random_polynomial(
    rng: np.random.Generator, arity: int, degree: int, scale: float = 1.0, variables: Sequence[int] | None = None
) -> RationalFunction:
    """Random polynomial of total degree <= degree in the chosen variables, no constant term."""
    variables = list(range(arity)) if variables is None else list(variables)
    terms = []
    for d in range(1, degree + 1):
        for _ in range(2):
            e = [0] * arity
            for _ in range(d):
                e[variables[int(rng.integers(len(variables)))]] += 1
            c = complex(rng.normal(), rng.normal()) * scale / (2.0 ** d)
            terms.append((tuple(e), c))
    return RationalFunction.polynomial(terms, arity)
