"""Matrix-free conjugate gradient for Hermitian positive (semi)definite systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class CGInfo:
    iterations: int
    residual: float  # relative residual ||b - A x|| / ||b||
    converged: bool
    stagnated: bool


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iters: int = 500,
) -> tuple[np.ndarray, CGInfo]:
    """Solve ``A x = b`` for Hermitian positive semidefinite ``A``.

    Works on arrays of any shape; inner products run over all entries.
    Stops when ``||r|| <= tol * ||b||``.  A non-positive curvature
    ``<p, A p>`` is reported as stagnation, which for a consistent
    semidefinite system means the remaining residual lies in the null space.
    """
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), CGInfo(0, 0.0, True, False)

    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_a(x)
    p = r.copy()
    rr = np.vdot(r, r).real
    target = (tol * b_norm) ** 2

    it = 0
    stagnated = False
    while rr > target and it < max_iters:
        ap = apply_a(p)
        curv = np.vdot(p, ap).real
        if not curv > 0.0:
            stagnated = True
            break
        alpha = rr / curv
        x += alpha * p
        r -= alpha * ap
        rr_new = np.vdot(r, r).real
        p *= rr_new / rr
        p += r
        rr = rr_new
        it += 1

    res = np.sqrt(rr) / b_norm
    return x, CGInfo(it, float(res), rr <= target, stagnated)
