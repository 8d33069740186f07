"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves  max c.x  subject to rows  a_i.x (<=, >=, =) b_i  and optional
per-variable lower/upper bounds. Free variables are split internally,
finite lower/upper bounds are shifted or reflected into the nonnegative
orthant. Everything is floating point with fixed tolerances; no exact
arithmetic. Unbounded problems report an improving ray together with the
basic feasible point it emanates from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import SimplexBreakdownError

LE, GE, EQ = "<=", ">=", "="

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9  # ratio-test threshold
PIVOT_MIN = 1e-12  # below this a pivot is numerically meaningless
_MAX_ITERS = 50_000


@dataclass
class LinearProgram:
    """max objective.x subject to rows and per-variable bounds.

    rows: list of (coeffs, relation, rhs); bounds: per-variable (lower,
    upper) with None meaning unbounded on that side.
    """

    objective: np.ndarray
    rows: list[tuple[np.ndarray, str, float]]
    bounds: list[tuple[Optional[float], Optional[float]]]

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = self.objective.shape[0]
        if len(self.bounds) != n:
            raise ValueError(f"{len(self.bounds)} bounds for {n} variables")
        if not np.isfinite(self.objective).all():
            raise ValueError("objective has non-finite entries")
        clean = []
        for i, (a, rel, b) in enumerate(self.rows):
            a = np.atleast_1d(np.asarray(a, dtype=float))
            if a.shape != (n,):
                raise ValueError(f"row {i}: {a.shape[0]} coefficients for {n} variables")
            if rel not in (LE, GE, EQ):
                raise ValueError(f"row {i}: unknown relation {rel!r}")
            b = float(b)
            if not (np.isfinite(a).all() and np.isfinite(b)):
                raise ValueError(f"row {i}: non-finite entry")
            clean.append((a, rel, b))
        self.rows = clean
        for j, (lo, up) in enumerate(self.bounds):
            if lo is not None and up is not None and lo > up:
                raise ValueError(f"variable {j}: lower bound {lo} exceeds upper bound {up}")

    @property
    def n(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "unbounded" | "infeasible"
    value: Optional[float]
    x: Optional[np.ndarray]  # optimum, or the feasible point a ray emanates from
    ray: Optional[np.ndarray]  # improving direction when unbounded


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, c] = 0.0
    T[r, c] = 1.0


def _run_simplex(T: np.ndarray, basis: list[int], ncols: int):
    """Iterate to optimality. Returns ("optimal", None) or ("unbounded", col)."""
    m = T.shape[0] - 1
    for _ in range(_MAX_ITERS):
        cost = T[-1, :ncols]
        negative = np.flatnonzero(cost < -OPT_TOL)
        if negative.size == 0:
            return "optimal", None
        c = int(negative[0])  # Bland: lowest index
        if m == 0:
            return "unbounded", c
        col = T[:-1, c]
        eligible = np.flatnonzero(col > PIVOT_TOL)
        if eligible.size == 0:
            eligible = np.flatnonzero(col > PIVOT_MIN)
            if eligible.size == 0:
                return "unbounded", c
        ratios = T[eligible, -1] / col[eligible]
        best = ratios.min()
        ties = eligible[np.flatnonzero(ratios <= best + 1e-12)]
        r = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index
        _pivot(T, r, c)
        basis[r] = c
    raise SimplexBreakdownError(f"simplex did not finish within {_MAX_ITERS} iterations")


def lp_solve(lp: LinearProgram) -> LpSolution:
    """Solve the LP. Returned points satisfy every constraint within 1e-8."""
    n = lp.n

    # Shift/reflect/split variables into s >= 0.
    trans: list[tuple] = []
    ns = 0
    extra_rows: list[tuple[np.ndarray, str, float]] = []
    for j, (lo, up) in enumerate(lp.bounds):
        if lo is not None:
            trans.append(("shift", ns, float(lo)))
            if up is not None:
                extra_rows.append((j, up - lo))
            ns += 1
        elif up is not None:
            trans.append(("neg", ns, float(up)))
            ns += 1
        else:
            trans.append(("split", ns, ns + 1))
            ns += 2

    def to_s(a: np.ndarray) -> tuple[np.ndarray, float]:
        """Rewrite a.x as coeffs.s + const."""
        out = np.zeros(ns)
        const = 0.0
        for j, t in enumerate(trans):
            if t[0] == "shift":
                out[t[1]] = a[j]
                const += a[j] * t[2]
            elif t[0] == "neg":
                out[t[1]] = -a[j]
                const += a[j] * t[2]
            else:
                out[t[1]] = a[j]
                out[t[2]] = -a[j]
        return out, const

    def from_s(s: np.ndarray, with_const: bool) -> np.ndarray:
        x = np.zeros(n)
        for j, t in enumerate(trans):
            if t[0] == "shift":
                x[j] = s[t[1]] + (t[2] if with_const else 0.0)
            elif t[0] == "neg":
                x[j] = (t[2] if with_const else 0.0) - s[t[1]]
            else:
                x[j] = s[t[1]] - s[t[2]]
        return x

    rows_s: list[tuple[np.ndarray, str, float]] = []
    for a, rel, b in lp.rows:
        sa, const = to_s(a)
        rows_s.append((sa, rel, b - const))
    for j, ub in extra_rows:
        e = np.zeros(ns)
        e[trans[j][1]] = 1.0
        rows_s.append((e, LE, float(ub)))
    c_s, _ = to_s(lp.objective)

    # Equality standard form with rhs >= 0; slack basis where available.
    m = len(rows_s)
    n_slack = sum(1 for _, rel, _ in rows_s if rel != EQ)
    A = np.zeros((m, ns + n_slack))
    rhs = np.zeros(m)
    needs_art = []
    si = 0
    basis: list[int] = [-1] * m
    for i, (a, rel, b) in enumerate(rows_s):
        if b < 0:
            a, b = -a, -b
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        A[i, :ns] = a
        rhs[i] = b
        if rel == LE:
            A[i, ns + si] = 1.0
            basis[i] = ns + si
            si += 1
        elif rel == GE:
            A[i, ns + si] = -1.0
            si += 1
            needs_art.append(i)
        else:
            needs_art.append(i)
    ncols = ns + n_slack
    n_art = len(needs_art)

    if n_art:
        Tab = np.zeros((m + 1, ncols + n_art + 1))
        Tab[:m, :ncols] = A
        Tab[:m, -1] = rhs
        for k, i in enumerate(needs_art):
            Tab[i, ncols + k] = 1.0
            basis[i] = ncols + k
        Tab[-1, ncols : ncols + n_art] = 1.0  # phase-1 cost: sum of artificials
        for i in needs_art:
            Tab[-1] -= Tab[i]
        status, _ = _run_simplex(Tab, basis, ncols + n_art)
        if status != "optimal":
            raise SimplexBreakdownError("phase 1 reported unbounded; artificial cost is bounded")
        if -Tab[-1, -1] > FEAS_TOL:
            return LpSolution("infeasible", None, None, None)
        # Drive leftover artificials out of the basis or drop redundant rows.
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= ncols:
                choices = np.flatnonzero(np.abs(Tab[i, :ncols]) > PIVOT_MIN)
                if choices.size:
                    _pivot(Tab, i, int(choices[0]))
                    basis[i] = int(choices[0])
                else:
                    keep[i] = False
        rowmask = np.append(keep, True)
        Tab = Tab[rowmask][:, np.r_[0:ncols, Tab.shape[1] - 1]]
        basis = [b for i, b in enumerate(basis) if keep[i]]
        m = len(basis)
    else:
        Tab = np.zeros((m + 1, ncols + 1))
        Tab[:m, :ncols] = A
        Tab[:m, -1] = rhs

    # Phase 2: minimize -c_s . s
    Tab[-1, :] = 0.0
    Tab[-1, :ns] = -c_s
    for i in range(m):
        cb = Tab[-1, basis[i]]
        if cb != 0.0:
            Tab[-1] -= cb * Tab[i]

    status, enter = _run_simplex(Tab, basis, ncols)

    s = np.zeros(ncols)
    for i in range(m):
        s[basis[i]] = max(Tab[i, -1], 0.0)
    x = from_s(s[:ns], with_const=True)

    if status == "unbounded":
        ray_s = np.zeros(ncols)
        ray_s[enter] = 1.0
        for i in range(m):
            ray_s[basis[i]] = -Tab[i, enter]
        ray_s[np.abs(ray_s) <= PIVOT_MIN] = 0.0
        ray = from_s(ray_s[:ns], with_const=False)
        return LpSolution("unbounded", None, x, ray)

    value = float(lp.objective @ x)
    return LpSolution("optimal", value, x, None)
