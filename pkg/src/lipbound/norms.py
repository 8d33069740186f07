"""Induced operator norms for p in {1, 2, inf} and norm-achieving witnesses.

p=1 is the max column absolute sum, p=inf the max row absolute sum, and
p=2 the largest singular value. The spectral norm is computed by power
iteration on A^T A with a deterministic start so repeated calls agree
bitwise; the final iterate doubles as the right singular-vector witness.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import ActivationPattern, MlpNetwork, jacobian

INF = math.inf
NORM_KINDS = (1, 2, INF)

_POWER_MAX_ITERS = 10_000
_STALL_REL = 1e-14
_STALL_RUN = 5


class PowerIterationWarning(UserWarning):
    """Spectral-norm power iteration hit its iteration cap; estimate may be low."""


def check_norm_kind(p) -> float:
    """Normalize p to one of 1, 2, inf; reject anything else."""
    if p in (1, 2):
        return int(p)
    if p == INF or p == np.inf or (isinstance(p, str) and p.lower() == "inf"):
        return INF
    raise ValueError(f"unsupported norm order {p!r}; expected 1, 2, or inf")


@dataclass(frozen=True)
class SpectralResult:
    value: float
    witness: np.ndarray
    converged: bool


def _power_run(B: np.ndarray, v: np.ndarray) -> tuple[float, np.ndarray, bool]:
    """One power-iteration run from start v; returns (rayleigh, vector, converged)."""
    r_prev = -1.0
    stall = 0
    converged = False
    for _ in range(_POWER_MAX_ITERS):
        w = B @ v
        r = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            converged = True  # v is an exact null direction of B
            break
        if abs(r - r_prev) <= _STALL_REL * max(abs(r), 1.0):
            stall += 1
            if stall >= _STALL_RUN:
                converged = True
                break
        else:
            stall = 0
        r_prev = r
        v = w / nw
    r = max(float(v @ (B @ v)), 0.0)
    return r, v, converged


def _spectral(A: np.ndarray) -> SpectralResult:
    # Power iteration on B = A^T A with a deterministic all-ones start. A
    # run that settles strictly below the Frobenius envelope (trace B bounds
    # the top eigenvalue) may have started orthogonal to the top pair, so
    # one restart from e_1 is tried and the larger Rayleigh quotient wins.
    n = A.shape[1]
    B = A.T @ A
    fro2 = float(np.trace(B))
    e1 = np.zeros(n)
    e1[0] = 1.0
    if fro2 == 0.0:
        return SpectralResult(0.0, e1, True)
    r1, v1, ok1 = _power_run(B, np.full(n, 1.0 / math.sqrt(n)))
    if r1 < fro2 * (1.0 - 1e-12):
        r2, v2, ok2 = _power_run(B, e1)
        if r2 > r1:
            return SpectralResult(math.sqrt(r2), v2, ok2)
    return SpectralResult(math.sqrt(r1), v1, ok1)


def operator_norm(A: Sequence, p) -> float:
    """Induced p-norm of a dense matrix."""
    p = check_norm_kind(p)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    if p == 1:
        return float(np.abs(A).sum(axis=0).max())
    if p == INF:
        return float(np.abs(A).sum(axis=1).max())
    res = _spectral(A)
    if not res.converged:
        warnings.warn(
            f"power iteration hit {_POWER_MAX_ITERS} iterations; "
            f"best estimate {res.value}",
            PowerIterationWarning,
        )
    return res.value


def pattern_norm(net: MlpNetwork, sigma: ActivationPattern, p) -> float:
    """Induced p-norm of the Jacobian selected by the pattern."""
    return operator_norm(jacobian(net, sigma), p)


def norm_witness(A: Sequence, p) -> np.ndarray:
    """Unit-p-norm vector y with ||A y||_p equal to the induced norm.

    Ties (p=1 column choice, p=inf row choice) resolve to the lowest index.
    A zero matrix yields e_1 with a warning; any unit vector is as good.
    """
    p = check_norm_kind(p)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    n = A.shape[1]
    if not np.any(A):
        warnings.warn("zero matrix: witness is arbitrary", UserWarning)
        y = np.zeros(n)
        y[0] = 1.0
        return y
    if p == 1:
        j = int(np.abs(A).sum(axis=0).argmax())
        y = np.zeros(n)
        y[j] = 1.0
        return y
    if p == INF:
        i = int(np.abs(A).sum(axis=1).argmax())
        y = np.where(A[i] >= 0.0, 1.0, -1.0)
        return y
    return _spectral(A).witness
