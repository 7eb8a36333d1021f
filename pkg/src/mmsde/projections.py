"""Generalized projections onto the domain closure.

A generalized projection fixes the domain closure pointwise and is
1-Lipschitz.  Three kinds are provided: the classical nearest-point map, the
elastic map p - c (z - p) that rebounds a fraction c of the overshoot off the
boundary, and the iterated elastic limit.  A single elastic step may exit the
domain (that is why the iteration exists), so range containment is only
guaranteed for the classical and iterated kinds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError
from .operators import MonotoneOperator

__all__ = [
    "Projection",
    "project_classical",
    "project_elastic",
    "project_elastic_iterated",
    "DEFAULT_ITER_TOL",
    "DEFAULT_ITER_MAX",
]

DEFAULT_ITER_TOL = 1e-10
DEFAULT_ITER_MAX = 100_000

_KINDS = ("classical", "elastic", "elastic_iterated")


def project_classical(op: MonotoneOperator, z) -> np.ndarray:
    """Nearest point of the domain closure (exact identity inside)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return np.asarray(op.domain_projection(z), dtype=float)


def project_elastic(op: MonotoneOperator, c: float, z) -> np.ndarray:
    """p - c (z - p) with p the classical projection; c in [0, 1].

    c = 0 collapses to the classical projection, c = 1 is the mirror
    reflection through the nearest boundary point.
    """
    c = float(c)
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"elasticity must lie in [0, 1], got {c}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    p = np.asarray(op.domain_projection(z), dtype=float)
    if c == 0.0:
        return p
    return p - c * (z - p)


def project_elastic_iterated(op: MonotoneOperator, c: float, z,
                             tol: float = DEFAULT_ITER_TOL,
                             max_iter: int = DEFAULT_ITER_MAX) -> np.ndarray:
    """Limit of repeated elastic projections.

    Iterates w <- elastic(w) until the iterate lies in the domain closure
    within ``tol`` or moves by less than ``tol``; either condition certifies
    a fixed point of the iteration to tolerance.  Once an iterate lands
    inside, further elastic steps fix it, so the stopped value equals the
    true limit there.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = np.atleast_1d(np.asarray(z, dtype=float))
    for _ in range(max_iter):
        nxt = project_elastic(op, c, w)
        if op.in_domain(nxt, tol):
            return nxt
        if float(np.linalg.norm(nxt - w)) < tol:
            return nxt
        w = nxt
    residual = op.domain_distance(w)
    raise NonConvergenceError(
        f"iterated elastic projection did not stabilize in {max_iter} steps "
        f"(domain distance {residual:.3e})",
        last=w, residual=residual,
    )


@dataclass(frozen=True)
class Projection:
    """Dispatchable projection specification (kind + parameters).

    Instances are immutable and call through to the pure projection
    functions, so they are safe to share between threads.
    """

    kind: str = "classical"
    c: float = 0.0
    tol: float = DEFAULT_ITER_TOL
    max_iter: int = DEFAULT_ITER_MAX

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown projection kind {self.kind!r}; choose from {_KINDS}")
        if self.kind != "classical" and not (0.0 <= self.c <= 1.0):
            raise ValueError(f"elasticity must lie in [0, 1], got {self.c}")

    def __call__(self, op: MonotoneOperator, z) -> np.ndarray:
        if self.kind == "classical":
            return project_classical(op, z)
        if self.kind == "elastic":
            return project_elastic(op, self.c, z)
        return project_elastic_iterated(op, self.c, z, self.tol, self.max_iter)

    @property
    def spec(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "classical":
            out["c"] = self.c
        if self.kind == "elastic_iterated":
            out["tol"] = self.tol
            out["max_iter"] = self.max_iter
        return out
