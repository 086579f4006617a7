"""Oriented boundaries of the truncated exponential surfaces X_N^k.

The boundary of X_N^k is assembled stage by stage.  E_I: each piece of the
previous boundary is split where arg f_N meets the cut level and every
sub-piece is lifted to the m_N sheets of the window.  E_J: every component
of the cut set {arg f_N = c_N} in X_{N-1}^k appears twice, at
Im z_{N+1} = c_N (following increasing log|f_N|) and at c_N + 2 pi m_N
(reversed).
"""

from __future__ import annotations

import math

import numpy as np

from cheesetower.geometry import CheeseSpec, boundary_chain
from cheesetower.quadrature import chain_pieces
from cheesetower.surface.cuts import TraceRegion, arg_profile, find_crossings, trace_cut_curves
from cheesetower.surface.paths import Piece

TWO_PI = 2.0 * math.pi


def split_and_lift(piece: Piece, f, c: float, m: int, crossings, stage: int) -> list[Piece]:
    """Lift one piece to all m sheets of a stage, splitting at its cut crossings."""
    path = piece.path
    cuts = sorted(x.t for x in crossings)
    bounds = [path.t0] + cuts + [path.t1]
    out = []
    for idx, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        if b - a <= 1e-14:
            continue
        sub = path if (a, b) == (path.t0, path.t1) else path.restrict(a, b)
        sub = sub.extend("exp", f)
        mid, _ = sub.evaluate([0.5 * (a + b)])
        shift = TWO_PI * math.floor((mid[0, -1].imag - c) / TWO_PI)
        sub = sub.shifted(-1, -1j * shift)
        for s in range(m):
            lifted = sub.shifted(-1, 1j * TWO_PI * s) if s else sub
            out.append(Piece(lifted, piece.sign, "I", stage, f"{piece.label}/{stage}.{idx}#{s}"))
    return out


def piece_crossings(piece: Piece, f, c: float, index: int = 0):
    return find_crossings(arg_profile(piece.path, f), c, index, piece.sign)


class ExpBoundaryModel:
    """Lazily computed boundary pieces, crossings and cut curves of a growing exp tower.

    ``stages`` is the tower's (mutable) stage list; ``choices`` may hold the
    crossing cache produced when each cut level was chosen.
    """

    def __init__(self, spec: CheeseSpec, stages: list, ds_max: float = 0.02):
        self.spec = spec
        self.stages = stages
        self.ds_max = ds_max
        self.choices: dict = {}
        self._boundary: dict = {}
        self._crossings: dict = {}
        self._cuts: dict = {}

    def invalidate_from(self, n: int):
        for cache in (self._boundary, self._crossings, self._cuts):
            for key in [key for key in cache if key[0] >= n]:
                del cache[key]

    # --- stage data ---------------------------------------------------------
    def stage(self, n: int):
        return self.stages[n - 1]

    def native_depth(self, n: int) -> int:
        return self.stage(n).f.native_arity

    def multiplicity(self, n: int) -> int:
        """Number of sheets of X_{n-1} over each point of X_{d-1}, d the native depth of f_n."""
        d = self.native_depth(n)
        return math.prod(self.stage(j).m for j in range(d, n))

    # --- boundaries -----------------------------------------------------------
    def boundary(self, n: int, k: int) -> list[Piece]:
        key = (n, k)
        if key not in self._boundary:
            if n == 0:
                pieces = chain_pieces(boundary_chain(self.spec, k))
            else:
                st = self.stage(n)
                prev = self.boundary(n - 1, k)
                xs = self.crossings(n, k)
                pieces = []
                for piece, lst in zip(prev, xs):
                    pieces += split_and_lift(piece, st.f, st.c, st.m, lst, n)
                pieces += self.cut_pieces(n, k)
            self._boundary[key] = pieces
        return self._boundary[key]

    def crossings(self, n: int, k: int) -> list[list]:
        """Crossings of arg f_n with the cut level along each piece of boundary(n-1, k)."""
        key = (n, k)
        if key not in self._crossings:
            choice = self.choices.get(n)
            if choice is not None and k in choice.crossings:
                self._crossings[key] = choice.crossings[k]
            else:
                st = self.stage(n)
                self._crossings[key] = [
                    piece_crossings(p, st.f, st.c, i) for i, p in enumerate(self.boundary(n - 1, k))
                ]
        return self._crossings[key]

    # --- cuts -------------------------------------------------------------------
    def cut_components(self, n: int, k: int, f=None, c=None):
        """Cut curves of stage n traced natively on X_{d-1}^k (parameter log|f_n|)."""
        key = (n, k)
        if f is None and key in self._cuts:
            return self._cuts[key]
        if f is None:
            st = self.stage(n)
            f, c = st.f, st.c
        d = f.native_arity
        fd = f.with_arity(d)
        seeds = []
        for i, piece in enumerate(self.boundary(d - 1, k)):
            seeds += piece_crossings(piece, fd, c, i)
        lower = [self.stage(j).f.with_arity(j) for j in range(1, d)]
        windows = tuple((self.stage(j).c, self.stage(j).m) for j in range(1, d))
        region = TraceRegion(self.spec, k, windows)
        comps = trace_cut_curves(fd, c, seeds, region, lower, ds_max=self.ds_max)
        if key not in self._cuts and n <= len(self.stages) and self.stage(n).f == f:
            self._cuts[key] = comps
        return comps

    def native_cut_length(self, n: int, k: int, f=None, c=None) -> float:
        return math.fsum(p.meta["length"] for p in self.cut_components(n, k, f, c))

    def cut_length(self, n: int, k: int) -> float:
        """Length of the cut set of stage n inside X_{n-1}^k (all sheets)."""
        return self.multiplicity(n) * self.native_cut_length(n, k)

    def cut_pieces(self, n: int, k: int) -> list[Piece]:
        st = self.stage(n)
        d = st.f.native_arity
        pieces = [Piece(p, 1, "J", n, f"cut{n}.{i}") for i, p in enumerate(self.cut_components(n, k))]
        for j in range(d, n):
            lower = self.stage(j)
            lifted = []
            for piece in pieces:
                xs = piece_crossings(piece, lower.f, lower.c)
                lifted += split_and_lift(piece, lower.f, lower.c, lower.m, xs, j)
            pieces = [Piece(p.path, p.sign, "J", n, p.label) for p in lifted]
        out = []
        for piece in pieces:
            ext = piece.path.extend("exp", st.f)
            theta0 = ext.Z[0, -1].imag
            ext = ext.shifted(-1, -1j * TWO_PI * round((theta0 - st.c) / TWO_PI))
            out.append(Piece(ext, 1, "J", n, f"{piece.label}@lo"))
            out.append(Piece(ext.shifted(-1, 1j * TWO_PI * st.m), -1, "J", n, f"{piece.label}@hi"))
        return out

    def closure_defect(self, n: int, k: int) -> float:
        """Largest distance from an oriented piece end to the nearest piece start."""
        pieces = self.boundary(n, k)
        starts = np.array([p.start for p in pieces])
        worst = 0.0
        for p in pieces:
            worst = max(worst, float(np.min(np.max(np.abs(starts - p.end), axis=1))))
        return worst
