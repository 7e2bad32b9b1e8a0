"""Linear programs behind polyhedral dual norms.

For a polyhedral norm N(x) = max_j <|x|, f_j> with nonnegative atoms f_j
(the rows of ``atoms``), the dual norm of g is

    min  sum(lam)   s.t.  atoms.T @ lam >= |g|,  lam >= 0
  = max  <|g|, y>   s.t.  atoms @ y <= 1,        y >= 0.

The float path solves with HiGHS and turns the solution into a certified
bracket.  The exact path rationalizes that solution and verifies primal and
dual feasibility in rational arithmetic, falling back to a Fraction simplex
when verification fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .tsirelson import prune_dominated

__all__ = [
    "LPInfeasible",
    "DualLPResult",
    "polyhedral_dual",
    "polyhedral_dual_exact",
    "fraction_simplex_max",
]


class LPInfeasible(RuntimeError):
    """Raised when the covering LP has no solution (some coordinate is uncovered)."""


@dataclass(frozen=True)
class DualLPResult:
    value: float
    lower: float
    upper: float
    y: np.ndarray  # primal point of the max form (a vector of the unit ball)
    lam: np.ndarray  # multipliers on the atoms (a certificate for the upper bound)

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _check_cover(atoms: np.ndarray, gabs: np.ndarray) -> None:
    need = gabs > 0
    covered = (atoms > 0).any(axis=0)
    if np.any(need & ~covered):
        bad = np.flatnonzero(need & ~covered) + 1
        raise LPInfeasible(f"coordinates {bad.tolist()} are not covered by any atom")


def polyhedral_dual(atoms: np.ndarray, g: np.ndarray, tol: float = 1e-11) -> DualLPResult:
    """Float dual norm with a certified [lower, upper] bracket."""
    atoms = np.asarray(atoms, dtype=float)
    gabs = np.abs(np.asarray(g, dtype=float))
    _check_cover(atoms, gabs)
    n = gabs.size
    if not np.any(gabs):
        return DualLPResult(0.0, 0.0, 0.0, np.zeros(n), np.zeros(len(atoms)))
    # restrict to the support of g: other coordinates of y are free to be 0
    S = np.flatnonzero(gabs)
    A = atoms[:, S]
    rows = np.flatnonzero(A.max(axis=1) > 0)
    A = A[rows]
    res = linprog(
        -gabs[S],
        A_ub=A,
        b_ub=np.ones(len(rows)),
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status != 0:
        raise LPInfeasible(f"HiGHS failed: {res.message}")
    yS = np.clip(res.x, 0.0, None)
    lam_r = np.clip(-res.ineqlin.marginals, 0.0, None)

    # lower bound: rescale y into the feasible region
    worst = float((A @ yS).max()) if len(A) else 0.0
    lower = float(gabs[S] @ yS) / max(1.0, worst)
    # upper bound: rescale lam until it covers |g|
    cover = A.T @ lam_r
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(cover > 0, gabs[S] / cover, np.inf)
    scale = max(1.0, float(need.max()))
    upper = float(lam_r.sum()) * scale

    y = np.zeros(n)
    y[S] = yS / max(1.0, worst)
    lam = np.zeros(len(atoms))
    lam[rows] = lam_r * scale
    return DualLPResult(upper, lower, upper, y, lam)


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    return Fraction(float(v))


def _rationalize(v: float, max_den: int) -> Fraction:
    return Fraction(float(v)).limit_denominator(max_den)


def _verify_exact(
    atoms_q: Sequence[Sequence[Fraction]],
    atoms_f: np.ndarray,
    gq: Sequence[Fraction],
    y: Sequence[Fraction],
    lam: dict[int, Fraction],
) -> bool:
    n = len(gq)
    if any(v < 0 for v in y) or any(v < 0 for v in lam.values()):
        return False
    # primal feasibility atoms @ y <= 1; rows far from active are safe in floats
    yf = np.array([float(v) for v in y])
    slack = 1.0 - atoms_f @ yf
    near = np.flatnonzero(slack < 1e-7)
    if np.any(slack < -1e-7):
        return False
    for j in near:
        row = atoms_q[j]
        if sum(row[i] * y[i] for i in range(n) if y[i]) > 1:
            return False
    # dual feasibility atoms.T @ lam >= |g|
    cover = [Fraction(0)] * n
    for j, lj in lam.items():
        if lj:
            row = atoms_q[j]
            for i in range(n):
                if row[i]:
                    cover[i] += lj * row[i]
    if any(cover[i] < abs(gq[i]) for i in range(n)):
        return False
    primal = sum(abs(gq[i]) * y[i] for i in range(n))
    dual = sum(lam.values(), Fraction(0))
    return primal == dual


def polyhedral_dual_exact(
    atoms_q: Sequence[Sequence[Fraction]],
    g: Sequence,
    max_den: int = 1 << 20,
) -> Fraction:
    """Exact rational dual norm of ``g`` for rational atoms."""
    atoms_q = [[_to_fraction(v) for v in row] for row in atoms_q]
    gq = [_to_fraction(v) for v in g]
    atoms_f = np.array([[float(v) for v in row] for row in atoms_q])
    res = polyhedral_dual(atoms_f, np.array([float(v) for v in gq]))
    y = [_rationalize(v, max_den) for v in res.y]
    lam = {j: _rationalize(v, max_den) for j, v in enumerate(res.lam) if v > 1e-13}
    if _verify_exact(atoms_q, atoms_f, gq, y, lam):
        return sum(abs(gq[i]) * y[i] for i in range(len(gq)))
    # fallback: solve the max form exactly on the support of g, first over the
    # undominated rows only, then confirm the point against every row
    S = [i for i in range(len(gq)) if gq[i]]
    rows = [[r[i] for i in S] for r in atoms_q if any(r[i] for i in S)]
    c = [abs(gq[i]) for i in S]
    rf = np.array([[float(v) for v in r] for r in rows])
    by_float = {}
    for r, f in zip(rows, map(tuple, rf)):
        by_float.setdefault(f, r)
    kept = [by_float[tuple(f)] for f in prune_dominated(rf)]
    value, y = fraction_simplex_max(c, kept, [Fraction(1)] * len(kept))
    if all(sum(a * b for a, b in zip(r, y) if a and b) <= 1 for r in rows):
        return value
    value, _ = fraction_simplex_max(c, rows, [Fraction(1)] * len(rows))
    return value


def fraction_simplex_max(
    c: Sequence[Fraction],
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
) -> tuple[Fraction, list[Fraction]]:
    """Maximize c.y subject to A y <= b, y >= 0 with b >= 0, in exact arithmetic.

    Dense tableau with Bland's rule; the origin is feasible so no phase one.
    Raises LPInfeasible if the problem is unbounded.
    """
    m, n = len(A), len(c)
    if any(bi < 0 for bi in b):
        raise ValueError("fraction_simplex_max needs b >= 0")
    T = [[_to_fraction(v) for v in row] + [Fraction(int(i == r)) for i in range(m)] + [_to_fraction(b[r])]
         for r, row in enumerate(A)]
    obj = [-_to_fraction(v) for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + r for r in range(m)]
    width = n + m
    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for r in range(m):
            a = T[r][enter]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            raise LPInfeasible("unbounded LP")
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for k in range(m):
            if k != r and T[k][enter]:
                f = T[k][enter]
                T[k] = [a - f * p for a, p in zip(T[k], T[r])]
        if obj[enter]:
            f = obj[enter]
            obj = [a - f * p for a, p in zip(obj, T[r])]
        basis[r] = enter
    y = [Fraction(0)] * n
    for r, j in enumerate(basis):
        if j < n:
            y[j] = T[r][-1]
    return obj[-1], y
