"""Shared test utilities."""
from __future__ import annotations

import numpy as np

from regge.metric import is_valid

# (criterion number, verdict, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_valid_metric(K, z, rng, rel: float = 0.1, tries: int = 60) -> np.ndarray:
    """Multiplicative perturbation ``z (1 + rel u)`` with u uniform in
    [-1, 1], shrinking ``rel`` until the result is valid."""
    z = np.asarray(z, dtype=float)
    for _ in range(tries):
        w = z * (1.0 + rel * rng.uniform(-1.0, 1.0, z.size))
        if is_valid(K, w):
            return w
        rel *= 0.7
    raise RuntimeError("could not draw a valid metric")


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def fd_gradient(f, z, h) -> np.ndarray:
    """Central differences with one Richardson step."""
    z = np.asarray(z, dtype=float)
    g = np.empty_like(z)
    for i in range(z.size):
        def d(step):
            zp, zm = z.copy(), z.copy()
            zp[i] += step
            zm[i] -= step
            return (f(zp) - f(zm)) / (2 * step)
        g[i] = (4 * d(h / 2) - d(h)) / 3
    return g
