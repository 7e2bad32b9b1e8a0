"""Finite Tsirelson norming sets.

The norming set on {1..n} is the smallest set containing the coordinate
functionals and closed under f = (f_1 + ... + f_k)/2 whenever the supports
are successive and k <= min supp f_1.  Only its coordinatewise-maximal
elements matter for the norm, so we build those directly by an interval
recursion:

    atoms(a, b)      maximal functionals supported in [a, b]
    partial(s, b, j) maximal sums of j successive functionals in [s, b]

and prune dominated rows at every level.  All entries are dyadic, so the
float arithmetic is exact.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import CapExceeded, settings

__all__ = ["tsirelson_atoms", "prune_dominated", "implicit_norm_gap"]


def prune_dominated(V: np.ndarray, block: int = 256) -> np.ndarray:
    """Drop duplicate rows and rows coordinatewise <= another row."""
    if len(V) <= 1:
        return V
    V = np.unique(V, axis=0)
    V = V[np.argsort(-V.sum(axis=1), kind="stable")]
    kept = np.zeros((0, V.shape[1]))
    for lo in range(0, len(V), block):
        blk = V[lo: lo + block]
        alive = np.ones(len(blk), dtype=bool)
        # a strict dominator has a larger sum, so it is already kept or in this block
        for k0 in range(0, len(kept), 4096):
            K = kept[k0: k0 + 4096]
            alive &= ~np.any(np.all(K[None, :, :] >= blk[:, None, :], axis=2), axis=1)
        D = np.all(blk[None, :, :] >= blk[:, None, :], axis=2)
        np.fill_diagonal(D, False)
        alive &= ~np.any(D, axis=1)
        kept = np.vstack([kept, blk[alive]])
    return kept


@lru_cache(maxsize=None)
def _materialize(n: int) -> np.ndarray:
    eye = np.eye(n)
    empty = np.zeros((0, n))

    @lru_cache(maxsize=None)
    def atoms(a: int, b: int) -> np.ndarray:
        rows = [eye[a - 1: b]]
        for k in range(2, b - a + 2):
            s = max(a, k)
            if b - s + 1 < k:
                break
            P = partial(s, b, k)
            if len(P):
                rows.append(0.5 * P)
        return prune_dominated(np.vstack(rows))

    @lru_cache(maxsize=None)
    def partial(s: int, b: int, j: int) -> np.ndarray:
        if j == 1:
            return atoms(s, b)
        out = []
        for c in range(s, b - j + 2):
            A, P = atoms(s, c), partial(c + 1, b, j - 1)
            out.append((A[:, None, :] + P[None, :, :]).reshape(-1, n))
        return prune_dominated(np.vstack(out)) if out else empty

    A = atoms(1, n)
    A.setflags(write=False)
    return A


def tsirelson_atoms(n: int) -> np.ndarray:
    """Maximal elements of the Tsirelson norming set on {1..n}, one per row."""
    if n < 1:
        raise ValueError("dimension must be positive")
    if n > settings.tsirelson_cap:
        raise CapExceeded("tsirelson_cap", n, settings.tsirelson_cap)
    return _materialize(n).copy()


def implicit_norm_gap(atoms: np.ndarray, X: np.ndarray) -> float:
    """Largest |N(x) - max(|x|_inf, 1/2 max sum_j N(E_j x))| over the rows of X.

    N is the polyhedral norm of ``atoms``; the inner max runs over admissible
    interval partitions k <= E_1 < ... < E_k, found by a small DP on intervals.
    """
    X = np.abs(np.atleast_2d(np.asarray(X, dtype=float)))
    n = X.shape[1]
    worst = 0.0
    for x in X:
        # seg[a][b] = N(x restricted to [a, b]), 1-based inclusive
        seg = np.zeros((n + 2, n + 2))
        for a in range(1, n + 1):
            for b in range(a, n + 1):
                y = np.zeros(n)
                y[a - 1: b] = x[a - 1: b]
                seg[a, b] = max(y.max(), float((atoms @ y).max()))
        best = 0.0
        for k in range(2, n + 1):
            # F[j][t]: best sum of j successive intervals covering part of [k, t]
            F = np.full((k + 1, n + 1), -np.inf)
            F[0, k - 1:] = 0.0
            for j in range(1, k + 1):
                for t in range(k, n + 1):
                    F[j, t] = max(F[j, t - 1], max(F[j - 1, s] + seg[s + 1, t] for s in range(k - 1, t)))
            best = max(best, float(F[1:, n].max()))
        rhs = max(float(x.max()), best / 2)
        worst = max(worst, abs(float(max(x.max(), (atoms @ x).max())) - rhs))
    return worst
