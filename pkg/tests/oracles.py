"""Independent brute-force reference implementations used by the tests."""

import itertools
import math

import numpy as np


def brute_schedule(count: int) -> list[tuple[int, int]]:
    """First ``count`` pairs of {(0,0)} and {(r,s): 1<=s<=r}, generated then sorted."""
    r_max = 1
    while r_max * (r_max + 1) // 2 + 1 < count:
        r_max += 1
    pairs = [(0, 0)] + [(r, s) for r in range(1, r_max + 1) for s in range(1, r_max + 1) if s <= r]
    return sorted(pairs)[:count]


def pair_scan(circles):
    """Crossing angles of every crossing pair, from center distances and radii alone."""
    out = {}
    for (i, (c1, r1)), (j, (c2, r2)) in itertools.combinations(enumerate(circles), 2):
        d = abs(c1 - c2)
        if abs(r1 - r2) < d < r1 + r2:
            # angle between the radii at an intersection point, folded into (0, pi/2]
            gamma = math.acos((r1 * r1 + r2 * r2 - d * d) / (2 * r1 * r2))
            out[(i, j)] = min(gamma, math.pi - gamma)
    return out


def on_boundary(z: np.ndarray, circles, k: int, tol: float = 1e-9) -> np.ndarray:
    """Points of circle samples that are not inside any open disc of the first k holes (nor outside the unit disc)."""
    z = np.asarray(z)
    keep = np.abs(z) <= 1 + tol
    for c, r in circles[1 : k + 1]:
        keep &= np.abs(z - c) >= r - tol
    return keep


def mc_area(circles, k: int, n: int, seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    hit = np.abs(z) <= 1
    for c, r in circles[1 : k + 1]:
        hit &= np.abs(z - c) >= r
    p = hit.mean()
    return 4 * p, 4 * math.sqrt(p * (1 - p) / n)


def fd_derivative(fn, z: complex, h: float = 1e-6) -> complex:
    return (fn(z + h) - fn(z - h)) / (2 * h)


def critical_points_newton(q, alpha, starts, iters: int = 60) -> list[complex]:
    """Multistart Newton on the system q(z) = alpha, q'(z) = 0, returning converged joint zeros."""
    found = []
    for z in starts:
        z = complex(z)
        for _ in range(iters):
            val, grad = q.value_and_gradient(np.array([[z]]))
            dq = grad[0, 0]
            h = 1e-6
            _, g2 = q.value_and_gradient(np.array([[z + h]]))
            d2q = (g2[0, 0] - dq) / h
            if d2q == 0:
                break
            z -= dq / d2q
        val, grad = q.value_and_gradient(np.array([[z]]))
        if abs(grad[0, 0]) < 1e-10 and abs(val[0] - alpha) < 1e-8:
            found.append(z)
    return found
