"""Paths in the z1-plane and their continuous lifts to tower surfaces.

A :class:`LiftedPath` carries a base path (which supplies the first few
coordinates natively) and a table of samples along an ascending parameter.
Every extra coordinate z_{n+1} is the analytic continuation of either
``log f_n`` or ``sqrt f_n`` along the samples.  Samples are dense enough
that ``arg f_n`` moves by at most ``max_step_arg`` between neighbours, so
evaluating at an arbitrary parameter picks the branch nearest to the
interpolated sample values without any risk of a sheet jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from cheesetower.errors import SingularityProximity, StepCollapse

TWO_PI = 2.0 * math.pi
DEFAULT_MAX_STEP_ARG = 0.3
ZERO_TOL = 1e-10


class ArcPath:
    """``center + radius * exp(i t)``; t is the angle."""

    native_depth = 1

    def __init__(self, center: complex, radius: float):
        self.center = complex(center)
        self.radius = float(radius)

    def coords(self, t, ref=None):
        e = np.exp(1j * np.asarray(t, dtype=float))
        return (self.center + self.radius * e)[:, None], (1j * self.radius * e)[:, None]

    def initial_grid(self, t0: float, t1: float) -> np.ndarray:
        n = max(4, int(math.ceil(abs(t1 - t0) / 0.05)))
        return np.linspace(t0, t1, n + 1)


class SegmentPath:
    """Straight segment from z0 (t=0) to z1 (t=1)."""

    native_depth = 1

    def __init__(self, z0: complex, z1: complex):
        self.z0, self.z1 = complex(z0), complex(z1)

    def coords(self, t, ref=None):
        t = np.asarray(t, dtype=float)
        z = self.z0 + t * (self.z1 - self.z0)
        return z[:, None], np.full((len(t), 1), self.z1 - self.z0)

    def initial_grid(self, t0: float, t1: float) -> np.ndarray:
        n = max(4, int(math.ceil(abs(self.z1 - self.z0) * abs(t1 - t0) / 0.02)))
        return np.linspace(t0, t1, n + 1)


class FunctionPath:
    """Arbitrary smooth path given by callables ``z(t)`` and ``dz(t)``."""

    native_depth = 1

    def __init__(self, z, dz, samples: int = 256):
        self._z, self._dz, self._samples = z, dz, samples

    def coords(self, t, ref=None):
        t = np.asarray(t, dtype=float)
        return np.asarray(self._z(t), dtype=complex)[:, None], np.asarray(self._dz(t), dtype=complex)[:, None]

    def initial_grid(self, t0: float, t1: float) -> np.ndarray:
        return np.linspace(t0, t1, self._samples + 1)


@dataclass(frozen=True)
class LiftedPoint:
    coords: tuple
    residuals: tuple = ()

    @property
    def z1(self) -> complex:
        return self.coords[0]


def stage_residuals(coords, stages) -> tuple:
    """Defining-equation residual of every stage at one point."""
    Z = np.asarray(coords, dtype=complex)
    out = []
    for n, (kind, f) in enumerate(stages, start=1):
        val = complex(f(Z[:n]))
        z = Z[n]
        res = np.exp(z) - val if kind == "exp" else z * z - val
        out.append(float(abs(res)))
    return tuple(out)


def continue_column(kind: str, val: np.ndarray, anchor) -> np.ndarray:
    """Continuous log or sqrt of a sampled nonvanishing sequence."""
    if kind == "exp":
        darg = np.angle(val[1:] / val[:-1])
        theta0 = float(np.angle(val[0])) if anchor is None else float(np.imag(anchor))
        theta = theta0 + np.concatenate([[0.0], np.cumsum(darg)])
        return np.log(np.abs(val)) + 1j * theta
    raw = np.sqrt(val)
    same = np.abs(raw[1:] - raw[:-1]) <= np.abs(raw[1:] + raw[:-1])
    out = raw * np.cumprod(np.concatenate([[1.0], np.where(same, 1.0, -1.0)]))
    if anchor is not None and abs(out[0] + anchor) < abs(out[0] - anchor):
        out = -out
    return out


def branch_nearest(kind: str, val: np.ndarray, ref: np.ndarray) -> np.ndarray:
    if kind == "exp":
        lv = np.log(val)
        k = np.round((ref.imag - lv.imag) / TWO_PI)
        return lv + 2j * math.pi * k
    s = np.sqrt(val)
    return np.where(np.abs(s - ref) <= np.abs(s + ref), s, -s)


@dataclass
class LiftedPath:
    base: object
    t: np.ndarray
    Z: np.ndarray
    stages: tuple = ()
    max_step_arg: float = DEFAULT_MAX_STEP_ARG
    meta: dict = field(default_factory=dict)

    # construction -------------------------------------------------------------
    @classmethod
    def from_base(cls, base, t0: float, t1: float, max_step_arg: float = DEFAULT_MAX_STEP_ARG, grid=None):
        t = np.asarray(base.initial_grid(t0, t1) if grid is None else grid, dtype=float)
        Z, _ = base.coords(t, None)
        return cls(base, t, np.asarray(Z, dtype=complex), (), max_step_arg)

    @property
    def depth(self) -> int:
        return self.Z.shape[1]

    @property
    def native_depth(self) -> int:
        return self.base.native_depth

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def _ref(self, t: np.ndarray) -> np.ndarray:
        ref = np.empty((len(t), self.depth), dtype=complex)
        for j in range(self.depth):
            ref[:, j] = np.interp(t, self.t, self.Z[:, j].real) + 1j * np.interp(t, self.t, self.Z[:, j].imag)
        return ref

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates and their parameter derivatives at arbitrary t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ref = self._ref(t)
        nd = self.native_depth
        Zb, dZb = self.base.coords(t, ref[:, :nd])
        Z = np.empty((len(t), self.depth), dtype=complex)
        dZ = np.empty_like(Z)
        Z[:, :nd], dZ[:, :nd] = Zb, dZb
        for j in range(nd, self.depth):
            kind, f = self.stages[j - nd]
            val, grad = f.value_and_gradient(Z[:, :j])
            dval = np.einsum("ij,ij->i", grad, dZ[:, : grad.shape[1]])
            Z[:, j] = branch_nearest(kind, val, ref[:, j])
            dZ[:, j] = dval / val if kind == "exp" else dval / (2.0 * Z[:, j])
        return Z, dZ

    def restrict(self, a: float, b: float) -> "LiftedPath":
        inner = (self.t > a) & (self.t < b)
        ends, _ = self.evaluate([a, b])
        t = np.concatenate([[a], self.t[inner], [b]])
        Z = np.concatenate([ends[:1], self.Z[inner], ends[1:]])
        return replace(self, t=t, Z=Z, meta=dict(self.meta))

    def shifted(self, column: int, delta: complex) -> "LiftedPath":
        Z = self.Z.copy()
        Z[:, column] += delta
        return replace(self, Z=Z, meta=dict(self.meta))

    def extend(self, kind: str, f, anchor=None, zero_tol: float = ZERO_TOL, min_dt: float = 1e-13, max_rounds: int = 40):
        """Append the continuation of ``log f`` or ``sqrt f`` as a new column.

        ``anchor`` fixes the branch at the first sample (principal if None).
        Samples are refined until ``arg f`` moves by at most ``max_step_arg``
        between neighbours.
        """
        j = self.depth
        t, Z = self.t, self.Z
        for _ in range(max_rounds):
            den = f.denominator_value(Z[:, :j])
            val = f(Z[:, :j])
            if np.any(np.abs(den) < zero_tol) or not np.all(np.isfinite(val)):
                i = int(np.argmin(np.abs(den)))
                raise SingularityProximity(f"pole of stage function near z1={Z[i, 0]:.6g}")
            if np.any(np.abs(val) < zero_tol):
                i = int(np.argmin(np.abs(val)))
                raise SingularityProximity(f"zero of stage function near z1={Z[i, 0]:.6g}")
            bad = np.abs(np.angle(val[1:] / val[:-1])) > self.max_step_arg
            if not bad.any():
                break
            idx = np.nonzero(bad)[0]
            if np.min(t[idx + 1] - t[idx]) < min_dt:
                i = int(idx[np.argmin(t[idx + 1] - t[idx])])
                raise StepCollapse(f"argument step collapse near z1={Z[i, 0]:.6g}", point=complex(Z[i, 0]))
            mids = 0.5 * (t[idx] + t[idx + 1])
            Zm, _ = self.evaluate(mids)
            order = np.argsort(np.concatenate([t, mids]), kind="stable")
            t = np.concatenate([t, mids])[order]
            Z = np.concatenate([Z, Zm])[order]
        else:
            raise StepCollapse("argument refinement did not settle", point=complex(Z[0, 0]))
        col = continue_column(kind, val, anchor)
        return LiftedPath(self.base, t, np.column_stack([Z, col]), self.stages + ((kind, f),), self.max_step_arg, dict(self.meta))

    def point(self, i: int) -> LiftedPoint:
        return LiftedPoint(tuple(complex(z) for z in self.Z[i]))


def lift_path(
    base,
    stages,
    branch_seed: LiftedPoint,
    t0: float = 0.0,
    t1: float = 1.0,
    max_step_arg: float = DEFAULT_MAX_STEP_ARG,
    residual_tol: float = 1e-9,
) -> LiftedPath:
    """Continue the tower coordinates along ``base`` from ``branch_seed``.

    ``stages`` is a sequence of ``(kind, f_n)`` pairs with kind ``"exp"``
    (exp z_{n+1} = f_n) or ``"sqrt"`` (z_{n+1}^2 = f_n).
    """
    stages = tuple(stages)
    seed = np.asarray(branch_seed.coords, dtype=complex)
    res = stage_residuals(seed, stages)
    if any(r > residual_tol * max(1.0, abs(seed[i + 1])) for i, r in enumerate(res)):
        raise ValueError(f"branch seed violates defining equations: residuals {res}")
    path = LiftedPath.from_base(base, t0, t1, max_step_arg)
    if abs(path.Z[0, 0] - seed[0]) > 1e-9:
        raise ValueError("branch seed does not lie over the start of the base path")
    for n, (kind, f) in enumerate(stages, start=1):
        path = path.extend(kind, f, anchor=seed[n])
    return path


@dataclass
class Piece:
    """An oriented piece of a lifted boundary.

    ``sign`` is +1 when the boundary orientation follows increasing
    parameter.  ``role`` is ``"I"`` for lifts of the previous boundary,
    ``"J"`` for cut copies created at ``stage``; base arcs use stage 0.
    """

    path: LiftedPath
    sign: int
    role: str
    stage: int
    label: str

    @property
    def start(self) -> np.ndarray:
        return self.path.Z[0] if self.sign > 0 else self.path.Z[-1]

    @property
    def end(self) -> np.ndarray:
        return self.path.Z[-1] if self.sign > 0 else self.path.Z[0]


def path_to_csv(path: LiftedPath) -> str:
    """CSV with t and every coordinate as a re/im column pair."""
    head = ["t"] + [f"z{j + 1}_{part}" for j in range(path.depth) for part in ("re", "im")]
    lines = [",".join(head)]
    for t, z in zip(path.t, path.Z):
        cells = [repr(float(t))]
        for v in z:
            cells += [repr(float(v.real)), repr(float(v.imag))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
