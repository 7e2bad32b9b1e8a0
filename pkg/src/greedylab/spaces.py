"""1-unconditional norms on R^n: evaluation, dual norms and norming functionals.

Every space is a small immutable object exposing

* ``batch(X)``      norms of the rows of X (the workhorse; everything is vectorized),
* ``dual_bracket(g)`` a certified ``(lower, upper)`` bracket for the dual norm,
* ``functional(x)`` a dual vector z with <x, z> = N(x) and N*(z) <= 1.

Polyhedral spaces (those with an explicit atom list) get exact LP dual norms.
Other composites are bracketed: lower bounds come from primal test vectors,
upper bounds from explicit splittings of g across the parts, both polished
with a conic solve when the cheap candidates do not close the gap.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from . import lp
from .config import CapExceeded, settings
from .families import SetFamily, indicator_matrix, popcounts

__all__ = [
    "DimensionMismatch",
    "NormingCertificate",
    "Space",
    "Lp",
    "Polyhedral",
    "Tsirelson",
    "HaarLp",
    "UnconditionalHull",
    "MaxOf",
    "ScaledSum",
    "AugmentedPolyhedral",
    "TopKWeighted",
    "DisjointFamilySum",
    "norm_eval",
    "dual_norm_eval",
    "norming_functional",
    "build_prop33_space",
    "FamilyTooPoor",
    "scaled",
    "top_k_sums",
]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class NormingCertificate:
    functional: np.ndarray
    attained_value: float


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != n:
        raise DimensionMismatch(f"expected a vector of length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("coefficient vectors must be finite")
    return x


def top_k_sums(X: np.ndarray) -> np.ndarray:
    """S[:, k-1] = sum of the k largest moduli of each row."""
    A = -np.sort(-np.abs(X), axis=-1)
    return np.cumsum(A, axis=-1)


class Space:
    """Base class; subclasses set ``dim`` and implement ``batch``."""

    variant = "abstract"
    unconditional = True

    # -- evaluation -------------------------------------------------------
    def batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def norm(self, x) -> float:
        x = _as_vector(x, self.dim)
        return float(self.batch(x[None, :])[0])

    __call__ = norm

    def _check_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected rows of length {self.dim}, got {X.shape[-1]}")
        return X

    # -- polyhedral view ----------------------------------------------------
    def atom_matrix(self) -> np.ndarray | None:
        """Rows f >= 0 with N(x) = max_f <|x|, f>, or None if unavailable."""
        return None

    def exact_atoms(self) -> list[list[Fraction]] | None:
        A = self.atom_matrix()
        if A is None:
            return None
        return [[_snap(float(v)) for v in row] for row in A]

    # -- duality ------------------------------------------------------------
    def dual_bracket(self, g) -> tuple[float, float]:
        g = _as_vector(g, self.dim)
        if not np.any(g):
            return 0.0, 0.0
        key = ("dual", g.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        A = self.atom_matrix()
        if A is not None:
            res = lp.polyhedral_dual(A, g)
            out = (res.lower, res.upper)
        else:
            out = _generic_dual_bracket(self, g)
        self._cache[key] = out
        return out

    def dual(self, g) -> float:
        """Dual norm; the certified upper end of the bracket."""
        return self.dual_bracket(g)[1]

    def dual_exact(self, g) -> Fraction:
        atoms = self.exact_atoms()
        if atoms is None:
            raise TypeError(f"{self.variant} has no exact polyhedral description")
        return lp.polyhedral_dual_exact(atoms, [Fraction(float(v)) for v in _as_vector(g, self.dim)])

    def _dual_upper_candidates(self, g: np.ndarray) -> list[float]:
        return []

    # -- norming functionals -------------------------------------------------
    def functional(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def norming(self, x) -> NormingCertificate:
        x = _as_vector(x, self.dim)
        if not np.any(x):
            raise ValueError("the zero vector has no norming functional")
        z = np.asarray(self.functional(x), dtype=float)
        if self.unconditional:
            # restrict to supp(x) and align signs; keeps <x,z> and cannot raise N*(z)
            z = np.where(x != 0, np.sign(x) * np.abs(z), 0.0)
        return NormingCertificate(z, float(x @ z))

    # -- conic forms (bracket polishing) --------------------------------------
    def cvx_primal(self, x):
        raise NotImplementedError

    def cvx_dual(self, g):
        """(expression, constraints, rebuild) where rebuild(g_value) is a certified upper bound."""
        A = self.atom_matrix()
        if A is None:
            raise NotImplementedError
        import cvxpy as cp

        lam = cp.Variable(len(A), nonneg=True)
        return cp.sum(lam), [A.T @ lam >= cp.abs(g)], lambda gv: self.dual_bracket(gv)[1]

    # -- identity ----------------------------------------------------------
    def to_dict(self) -> dict:
        raise NotImplementedError

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def unit_vector_norms(self) -> np.ndarray:
        return self.batch(np.eye(self.dim))


def _snap(v: float) -> Fraction:
    """The small-denominator rational that rounds to v, else v's exact binary value."""
    r = Fraction(v).limit_denominator(1 << 20)
    return r if float(r) == v else Fraction(v)


def _space(cls):
    """dataclass(eq=False) plus a private per-instance cache."""
    cls = dataclass(eq=False)(cls)
    orig_init = cls.__init__

    def __init__(self, *a, **kw):
        orig_init(self, *a, **kw)
        object.__setattr__(self, "_cache", {})

    cls.__init__ = __init__
    return cls


def _num(v: float):
    """JSON-friendly number: exact rational string when the float is a short dyadic."""
    f = Fraction(float(v))
    if f.denominator == 1:
        return str(f.numerator)
    if f.denominator <= 1 << 20:
        return f"{f.numerator}/{f.denominator}"
    return repr(float(v))


# ---------------------------------------------------------------------------
# leaves
# ---------------------------------------------------------------------------


@_space
class Lp(Space):
    p: float
    dim: int
    variant = "lp"

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError("p must lie in [1, inf]")

    @property
    def q(self) -> float:
        p = self.p
        if p == 1:
            return np.inf
        if np.isinf(p):
            return 1.0
        return p / (p - 1)

    def batch(self, X):
        X = self._check_batch(X)
        return np.linalg.norm(X, ord=self.p, axis=-1)

    def atom_matrix(self):
        if self.p == np.inf:
            return np.eye(self.dim)
        if self.p == 1 and self.dim <= 16:
            return np.vstack([np.eye(self.dim), np.ones((1, self.dim))])
        return None

    def dual_bracket(self, g):
        g = _as_vector(g, self.dim)
        v = float(np.linalg.norm(g, ord=self.q))
        return v, v

    def functional(self, x):
        p = self.p
        if np.isinf(p):
            z = np.zeros_like(x)
            i = int(np.argmax(np.abs(x)))
            z[i] = np.sign(x[i])
            return z
        if p == 1:
            return np.sign(x)
        a = np.abs(x) / np.max(np.abs(x))
        w = np.sign(x) * a ** (p - 1)
        return w / np.linalg.norm(a, ord=p) ** (p - 1)

    def cvx_primal(self, x):
        import cvxpy as cp

        return cp.norm(x, "inf" if np.isinf(self.p) else self.p)

    def cvx_dual(self, g):
        import cvxpy as cp

        q = self.q
        return cp.norm(g, "inf" if np.isinf(q) else q), [], lambda gv: self.dual_bracket(gv)[1]

    def to_dict(self):
        return {"variant": "lp", "p": "inf" if np.isinf(self.p) else self.p, "dim": self.dim}


@_space
class Polyhedral(Space):
    """N(x) = max(||x||_inf, max_j <|x|, atoms[j]>); coordinate functionals are implicit."""

    atoms: np.ndarray
    dim: int
    variant = "polyhedral"

    def __post_init__(self):
        A = np.asarray(self.atoms, dtype=float).reshape(-1, self.dim)
        if np.any(A < 0):
            raise ValueError("polyhedral atoms must be coordinatewise nonnegative")
        object.__setattr__(self, "atoms", A)

    def batch(self, X):
        X = np.abs(self._check_batch(X))
        out = X.max(axis=-1)
        if len(self.atoms):
            At = self.atoms.T
            flat = X.reshape(-1, self.dim)
            res = out.reshape(-1)
            step = max(1, 4_000_000 // len(self.atoms))  # bounds the product block
            for lo in range(0, len(flat), step):
                blk = (flat[lo: lo + step] @ At).max(axis=-1)
                res[lo: lo + step] = np.maximum(res[lo: lo + step], blk)
            out = res.reshape(out.shape)
        return out

    def atom_matrix(self):
        return np.vstack([np.eye(self.dim), self.atoms])

    def norm_exact(self, x: Sequence) -> Fraction:
        xq = [abs(Fraction(v)) for v in x]
        best = max(xq)
        for row in self.exact_atoms()[self.dim:]:
            best = max(best, sum(a * b for a, b in zip(row, xq) if a and b))
        return best

    def functional(self, x):
        ax = np.abs(x)
        z = np.zeros(self.dim)
        i = int(np.argmax(ax))
        best = ax[i]
        if len(self.atoms):
            vals = self.atoms @ ax
            j = int(np.argmax(vals))
            if vals[j] > best:
                return self.atoms[j].copy()
        z[i] = 1.0
        return z

    def cvx_primal(self, x):
        import cvxpy as cp

        terms = [cp.norm(x, "inf")]
        if len(self.atoms):
            terms.append(cp.max(self.atoms @ cp.abs(x)))
        return cp.max(cp.hstack(terms))

    def to_dict(self):
        return {
            "variant": "polyhedral",
            "dim": self.dim,
            "atoms": [[_num(v) for v in row] for row in self.atoms],
        }


class Tsirelson(Polyhedral):
    """Polyhedral norm whose atoms are the saturated Tsirelson norming set on {1..n}."""

    variant = "tsirelson"

    def __init__(self, dim: int):
        from .tsirelson import tsirelson_atoms

        Polyhedral.__init__(self, tsirelson_atoms(dim), dim)

    def to_dict(self):
        return {"variant": "tsirelson", "dim": self.dim}


def haar_matrix(level: int, p: float) -> np.ndarray:
    """H[i, c] = value of the i-th L_p-normalized Haar function on dyadic cell c."""
    N = 1 << level
    H = np.zeros((N, N))
    H[0] = 1.0
    i = 1
    for j in range(level):
        width = N >> j
        for k in range(1 << j):
            lo = k * width
            amp = 2.0 ** (j / p)
            H[i, lo: lo + width // 2] = amp
            H[i, lo + width // 2: lo + width] = -amp
            i += 1
    return H


@_space
class HaarLp(Space):
    """Coefficients w.r.t. the L_p-normalized Haar system on [0,1], truncated at ``level``."""

    p: float
    level: int
    variant = "haar_lp"
    unconditional = False

    def __post_init__(self):
        if not (1 < self.p < np.inf):
            raise ValueError("HaarLp needs 1 < p < inf")
        object.__setattr__(self, "dim", 1 << self.level)
        object.__setattr__(self, "H", haar_matrix(self.level, self.p))

    @property
    def q(self) -> float:
        return self.p / (self.p - 1)

    def batch(self, X):
        X = self._check_batch(X)
        F = X @ self.H
        return np.mean(np.abs(F) ** self.p, axis=-1) ** (1 / self.p)

    def _dual_function(self, g: np.ndarray) -> np.ndarray:
        # step function G with integral(h_i G) = g_i
        return self.dim * np.linalg.solve(self.H, g)

    def dual_bracket(self, g):
        g = _as_vector(g, self.dim)
        G = self._dual_function(g)
        v = float(np.mean(np.abs(G) ** self.q) ** (1 / self.q))
        return v, v

    def functional(self, x):
        F = x @ self.H
        nF = float(np.mean(np.abs(F) ** self.p) ** (1 / self.p))
        G = np.sign(F) * (np.abs(F) / nF) ** (self.p - 1)
        return (self.H @ G) / self.dim

    def cvx_primal(self, x):
        import cvxpy as cp

        return cp.norm(self.H.T @ x, self.p) * self.dim ** (-1 / self.p)

    def cvx_dual(self, g):
        import cvxpy as cp

        M = self.dim * np.linalg.inv(self.H)
        return cp.norm(M @ g, self.q) * self.dim ** (-1 / self.q), [], lambda gv: self.dual_bracket(gv)[1]

    def to_dict(self):
        return {"variant": "haar_lp", "p": self.p, "level": self.level}


@_space
class TopKWeighted(Space):
    """N(x) = max_k weights[k-1] * S_k(|x|), S_k the sum of the k largest moduli."""

    weights: np.ndarray
    dim: int
    variant = "topk_weighted"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.dim,) or np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be a nonnegative, nonzero vector of length dim")
        object.__setattr__(self, "weights", w)

    def batch(self, X):
        X = self._check_batch(X)
        return (top_k_sums(X) * self.weights).max(axis=-1)

    def atom_matrix(self):
        n = self.dim
        if n > 14:
            return None
        key = "atoms"
        if key not in self._cache:
            pc = popcounts(n)
            masks = np.arange(1, 1 << n)
            w = self.weights[pc[masks] - 1]
            keep = w > 0
            self._cache[key] = indicator_matrix(masks[keep], n) * w[keep, None]
        return self._cache[key]

    def functional(self, x):
        ax = np.abs(x)
        order = np.argsort(-ax, kind="stable")
        S = np.cumsum(ax[order])
        k = int(np.argmax(S * self.weights)) + 1
        z = np.zeros(self.dim)
        z[order[:k]] = self.weights[k - 1]
        return z

    def cvx_primal(self, x):
        import cvxpy as cp

        terms = [w * cp.sum_largest(cp.abs(x), k) for k, w in enumerate(self.weights, start=1) if w > 0]
        return cp.max(cp.hstack(terms))

    def to_dict(self):
        return {"variant": "topk_weighted", "dim": self.dim, "weights": [_num(v) for v in self.weights]}


@_space
class DisjointFamilySum(Space):
    """N(x) = max over up to m pairwise disjoint members A_i of ``family`` of
    sum_i c(A_i) <|x|, 1_{A_i}>, with c(A) = size_weights[|A|-1]."""

    family: SetFamily
    size_weights: np.ndarray
    m: int
    variant = "disjoint_family_sum"

    def __post_init__(self):
        n = self.family.n
        if n > settings.dp_cap:
            raise CapExceeded("dp_cap", n, settings.dp_cap)
        w = np.asarray(self.size_weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("size_weights must be nonnegative of length n")
        object.__setattr__(self, "size_weights", w)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "_full", self.family.is_full())
        masks = np.asarray(self.family.masks, dtype=np.int64)
        object.__setattr__(self, "_masks", masks)
        object.__setattr__(self, "_mask_ind", indicator_matrix(masks, n))
        object.__setattr__(self, "_mask_w", w[popcounts(n)[masks] - 1])

    # sorted-prefix DP: valid when every subset is a member and weights depend on size only
    def _prefix_dp(self, X, want_arg=False):
        n, m = self.dim, self.m
        A = -np.sort(-np.abs(X), axis=-1)
        P = np.concatenate([np.zeros((len(A), 1)), np.cumsum(A, axis=-1)], axis=-1)
        c = self.size_weights
        F = np.full((m + 1, n + 1, len(A)), -np.inf)
        F[0, 0] = 0.0
        arg = np.zeros((m + 1, n + 1, len(A)), dtype=np.int64) if want_arg else None
        for j in range(1, m + 1):
            for t in range(1, n + 1):
                best = np.full(len(A), -np.inf)
                bs = np.zeros(len(A), dtype=np.int64)
                for s in range(0, t):
                    cand = F[j - 1, s] + c[t - s - 1] * (P[:, t] - P[:, s])
                    upd = cand > best
                    best = np.where(upd, cand, best)
                    if want_arg:
                        bs = np.where(upd, s, bs)
                F[j, t] = best
                if want_arg:
                    arg[j, t] = bs
        flat = F[1:, 1:].reshape(m * n, len(A))
        val = np.maximum(flat.max(axis=0), 0.0)
        if want_arg:
            return val, F, arg
        return val

    def _bitmask_best(self, ax: np.ndarray) -> tuple[float, list[int]]:
        n, m = self.dim, self.m
        size = 1 << n
        vals = np.full(size, -np.inf)
        vals[self._masks] = self._mask_w * (self._mask_ind @ ax)
        full = size - 1
        # layer 1: best single member inside each mask
        best = [np.zeros(size)]
        choice = [np.zeros(size, dtype=np.int64)]
        b1 = np.where(np.isfinite(vals), vals, 0.0)
        ch1 = np.where(np.isfinite(vals), np.arange(size), 0)
        for b in range(n):
            idx = np.arange(size)
            hi = idx[(idx >> b) & 1 == 1]
            lo = hi ^ (1 << b)
            take = b1[lo] > b1[hi]
            b1[hi] = np.where(take, b1[lo], b1[hi])
            ch1[hi] = np.where(take, ch1[lo], ch1[hi])
        best.append(b1)
        choice.append(ch1)
        pairs = self._pairs()
        for j in range(2, m + 1):
            sub, sup = pairs
            cand = vals[sub] + best[j - 1][sup ^ sub]
            bj = best[j - 1].copy()
            cj = np.full(size, -1, dtype=np.int64)
            order = np.lexsort((-cand, sup))
            first = np.ones(len(order), dtype=bool)
            first[1:] = sup[order][1:] != sup[order][:-1]
            top = order[first]
            upd = cand[top] > bj[sup[top]]
            bj[sup[top][upd]] = cand[top][upd]
            cj[sup[top][upd]] = sub[top][upd]
            best.append(bj)
            choice.append(cj)
        # backtrack from the full mask
        sets, M, j = [], full, m
        while j >= 1 and M:
            if j == 1:
                a = int(choice[1][M])
                if best[1][M] > 0:
                    sets.append(a)
                break
            a = int(choice[j][M])
            if a < 0:
                j -= 1
                continue
            sets.append(a)
            M ^= a
            j -= 1
        return float(max(best[m][full], 0.0)), sets

    def _pairs(self):
        if "pairs" not in self._cache:
            n = self.dim
            full = (1 << n) - 1
            subs, sups = [], []
            for a in self._masks:
                rest = full ^ int(a)
                s = rest
                while True:
                    subs.append(int(a))
                    sups.append(int(a) | s)
                    if s == 0:
                        break
                    s = (s - 1) & rest
            self._cache["pairs"] = (np.array(subs, dtype=np.int64), np.array(sups, dtype=np.int64))
        return self._cache["pairs"]

    def batch(self, X):
        X = self._check_batch(X)
        if self._full:
            out = np.empty(len(X))
            for lo in range(0, len(X), 4096):
                out[lo: lo + 4096] = self._prefix_dp(X[lo: lo + 4096])
            return out
        return np.array([self._bitmask_best(np.abs(x))[0] for x in X])

    def selection(self, x) -> list[int]:
        """Masks of an optimal disjoint selection for |x|."""
        ax = np.abs(_as_vector(x, self.dim))
        if not self._full:
            return self._bitmask_best(ax)[1]
        val, F, arg = self._prefix_dp(ax[None, :], want_arg=True)
        if val[0] <= 0:
            return []
        order = np.argsort(-ax, kind="stable")
        jt = np.unravel_index(int(np.argmax(F[1:, 1:, 0])), (self.m, self.dim))
        j, t = jt[0] + 1, jt[1] + 1
        sets = []
        while j >= 1 and t > 0:
            s = int(arg[j, t, 0])
            sets.append(int(sum(1 << int(i) for i in order[s:t])))
            t, j = s, j - 1
        return sets

    def functional(self, x):
        z = np.zeros(self.dim)
        for a in self.selection(x):
            k = bin(a).count("1")
            z += self.size_weights[k - 1] * ((a >> np.arange(self.dim)) & 1)
        return z

    def atom_matrix(self):
        if "atoms" in self._cache:
            return self._cache["atoms"]
        rows: list[np.ndarray] = []
        masks, ind, w = self._masks, self._mask_ind, self._mask_w
        limit = settings.atom_cap

        def rec(start, used, acc, depth):
            if len(rows) > limit:
                return
            for t in range(start, len(masks)):
                a = int(masks[t])
                if a & used:
                    continue
                v = acc + w[t] * ind[t]
                rows.append(v)
                if depth + 1 < self.m:
                    rec(t + 1, used | a, v, depth + 1)

        rec(0, 0, np.zeros(self.dim), 0)
        out = None if len(rows) > limit else np.array(rows)
        if out is not None and not (out > 0).any(axis=0).all():
            out = np.vstack([out, np.eye(self.dim) * 0])  # keep the shape; cover check fails loudly
        self._cache["atoms"] = out
        return out

    def cvx_primal(self, x):
        import cvxpy as cp

        A = self.atom_matrix()
        if A is None:
            raise NotImplementedError
        return cp.max(A @ cp.abs(x))

    def to_dict(self):
        return {
            "variant": "disjoint_family_sum",
            "dim": self.dim,
            "m": self.m,
            "family": "full" if self._full else self.family.to_lists(),
            "size_weights": [_num(v) for v in self.size_weights],
        }


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------


def _sign_patterns(n: int) -> np.ndarray:
    # first coordinate fixed to +1: N(-x) = N(x)
    rest = np.array(list(product((1.0, -1.0), repeat=n - 1))).reshape(-1, n - 1)
    return np.hstack([np.ones((len(rest), 1)), rest])


@_space
class UnconditionalHull(Space):
    """N(x) = max over sign patterns e of base(e * x)."""

    base: Space
    variant = "unconditional_hull"

    def __post_init__(self):
        n = self.base.dim
        if n > settings.hull_cap:
            raise CapExceeded("hull_cap", n, settings.hull_cap)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "signs", _sign_patterns(n))

    def batch(self, X):
        X = self._check_batch(X)
        E = self.signs
        out = np.empty(len(X))
        step = max(1, 200_000 // len(E))
        for lo in range(0, len(X), step):
            Y = (X[lo: lo + step, None, :] * E[None, :, :]).reshape(-1, self.dim)
            out[lo: lo + step] = self.base.batch(Y).reshape(-1, len(E)).max(axis=1)
        return out

    def functional(self, x):
        vals = self.base.batch(x[None, :] * self.signs)
        e = self.signs[int(np.argmax(vals))]
        return e * self.base.functional(e * x)

    def _dual_upper_candidates(self, g):
        return [min(self.base.dual_bracket(e * g)[1] for e in self.signs)]

    def cvx_primal(self, x):
        import cvxpy as cp

        return cp.max(cp.hstack([self.base.cvx_primal(cp.multiply(e, x)) for e in self.signs]))

    def cvx_dual(self, g):
        import cvxpy as cp

        parts = [cp.Variable(self.dim) for _ in self.signs]
        exprs, cons, rebuilds = [], [g == sum(parts)], []
        for e, gi in zip(self.signs, parts):
            ex, c, rb = self.base.cvx_dual(cp.multiply(e, gi))
            exprs.append(ex)
            cons += c
            rebuilds.append(rb)

        def rebuild(gv):
            vals = [p.value for p in parts]
            vals[-1] = gv - sum(vals[:-1])
            return sum(rb(e * v) for rb, e, v in zip(rebuilds, self.signs, vals))

        return sum(exprs), cons, rebuild

    def to_dict(self):
        return {"variant": "unconditional_hull", "base": self.base.to_dict()}


@_space
class MaxOf(Space):
    parts: tuple
    variant = "max_of"

    def __post_init__(self):
        parts = tuple(self.parts)
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionMismatch("parts of MaxOf must share a dimension")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "dim", dims.pop())
        object.__setattr__(self, "unconditional", all(p.unconditional for p in parts))

    def batch(self, X):
        X = self._check_batch(X)
        return np.max([p.batch(X) for p in self.parts], axis=0)

    def atom_matrix(self):
        mats = [p.atom_matrix() for p in self.parts]
        if any(m is None for m in mats):
            return None
        return np.vstack(mats)

    def functional(self, x):
        vals = [p.norm(x) for p in self.parts]
        return self.parts[int(np.argmax(vals))].functional(x)

    def _dual_upper_candidates(self, g):
        return [p.dual_bracket(g)[1] for p in self.parts]

    def cvx_primal(self, x):
        import cvxpy as cp

        return cp.max(cp.hstack([p.cvx_primal(x) for p in self.parts]))

    def cvx_dual(self, g):
        import cvxpy as cp

        pieces = [cp.Variable(self.dim) for _ in self.parts]
        exprs, cons, rebuilds = [], [g == sum(pieces)], []
        for p, gi in zip(self.parts, pieces):
            ex, c, rb = p.cvx_dual(gi)
            exprs.append(ex)
            cons += c
            rebuilds.append(rb)

        def rebuild(gv):
            vals = [v.value for v in pieces]
            vals[-1] = gv - sum(vals[:-1])
            return sum(rb(v) for rb, v in zip(rebuilds, vals))

        return sum(exprs), cons, rebuild

    def to_dict(self):
        return {"variant": "max_of", "parts": [p.to_dict() for p in self.parts]}


@_space
class ScaledSum(Space):
    """N(x) = sum_i w_i N_i(x) with w_i >= 0."""

    parts: tuple  # of (weight, Space)
    variant = "scaled_sum"

    def __post_init__(self):
        parts = tuple((float(w), s) for w, s in self.parts)
        if any(w < 0 for w, _ in parts) or not any(w > 0 for w, _ in parts):
            raise ValueError("ScaledSum weights must be nonnegative and not all zero")
        dims = {s.dim for _, s in parts}
        if len(dims) != 1:
            raise DimensionMismatch("parts of ScaledSum must share a dimension")
        parts = tuple((w, s) for w, s in parts if w > 0)
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "dim", dims.pop())
        object.__setattr__(self, "unconditional", all(s.unconditional for _, s in parts))

    def batch(self, X):
        X = self._check_batch(X)
        return sum(w * s.batch(X) for w, s in self.parts)

    def atom_matrix(self):
        if len(self.parts) == 1:
            A = self.parts[0][1].atom_matrix()
            return None if A is None else self.parts[0][0] * A
        return None

    def functional(self, x):
        return sum(w * s.functional(x) for w, s in self.parts)

    def _dual_upper_candidates(self, g):
        his = [s.dual_bracket(g)[1] for _, s in self.parts]
        if any(h == 0 for h in his):
            return []
        # split g proportionally: g_i = c_i g with c_i proportional to w_i / ||g||*_i
        return [1.0 / sum(w / h for (w, _), h in zip(self.parts, his))]

    def cvx_primal(self, x):
        return sum(w * s.cvx_primal(x) for w, s in self.parts)

    def cvx_dual(self, g):
        import cvxpy as cp

        pieces = [cp.Variable(self.dim) for _ in self.parts]
        t = cp.Variable()
        cons, rebuilds = [g == sum(pieces)], []
        for (w, s), gi in zip(self.parts, pieces):
            ex, c, rb = s.cvx_dual(gi)
            cons += c + [ex <= w * t]
            rebuilds.append(rb)

        def rebuild(gv):
            vals = [v.value for v in pieces]
            vals[-1] = gv - sum(vals[:-1])
            return max(rb(v) / w for rb, v, (w, _) in zip(rebuilds, vals, self.parts))

        return t, cons, rebuild

    def to_dict(self):
        return {"variant": "scaled_sum", "parts": [[_num(w), s.to_dict()] for w, s in self.parts]}


@_space
class AugmentedPolyhedral(Space):
    """N(x) = max(base(x), max_j <|x|, atoms[j]>)."""

    base: Space
    atoms: np.ndarray
    variant = "augmented_polyhedral"

    def __post_init__(self):
        n = self.base.dim
        A = np.asarray(self.atoms, dtype=float).reshape(-1, n)
        if np.any(A < 0):
            raise ValueError("atoms must be nonnegative")
        object.__setattr__(self, "atoms", A)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "unconditional", self.base.unconditional)

    def _extra(self, X):
        if not len(self.atoms):
            return np.zeros(len(X))
        return (np.abs(X) @ self.atoms.T).max(axis=-1)

    def batch(self, X):
        X = self._check_batch(X)
        return np.maximum(self.base.batch(X), self._extra(X))

    def atom_matrix(self):
        B = self.base.atom_matrix()
        return None if B is None else np.vstack([B, self.atoms])

    def functional(self, x):
        ax = np.abs(x)
        if len(self.atoms):
            vals = self.atoms @ ax
            j = int(np.argmax(vals))
            if vals[j] > self.base.norm(x):
                return self.atoms[j].copy()
        return self.base.functional(x)

    def _extra_space(self) -> Space:
        # the atoms alone, without coordinate functionals
        return _AtomsOnly(self.atoms, self.dim)

    def _dual_upper_candidates(self, g):
        out = [self.base.dual_bracket(g)[1]]
        if (self.atoms > 0).any(axis=0).all():
            out.append(self._extra_space().dual_bracket(g)[1])
        return out

    def cvx_primal(self, x):
        import cvxpy as cp

        terms = [self.base.cvx_primal(x)]
        if len(self.atoms):
            terms.append(cp.max(self.atoms @ cp.abs(x)))
        return cp.max(cp.hstack(terms))

    def cvx_dual(self, g):
        return MaxOf((self.base, self._extra_space())).cvx_dual(g)

    def to_dict(self):
        return {
            "variant": "augmented_polyhedral",
            "base": self.base.to_dict(),
            "atoms": [[_num(v) for v in row] for row in self.atoms],
        }


@_space
class _AtomsOnly(Space):
    atoms: np.ndarray
    dim: int
    variant = "atoms_only"

    def batch(self, X):
        X = self._check_batch(X)
        return (np.abs(X) @ self.atoms.T).max(axis=-1)

    def atom_matrix(self):
        return self.atoms

    def functional(self, x):
        return self.atoms[int(np.argmax(self.atoms @ np.abs(x)))].copy()

    def cvx_primal(self, x):
        import cvxpy as cp

        return cp.max(self.atoms @ cp.abs(x))

    def to_dict(self):
        return {"variant": "atoms_only", "dim": self.dim, "atoms": [[_num(v) for v in r] for r in self.atoms]}


def scaled(c: float, space: Space) -> Space:
    return ScaledSum(((c, space),))


# ---------------------------------------------------------------------------
# generic dual bracket
# ---------------------------------------------------------------------------


def _primal_candidates(g: np.ndarray) -> np.ndarray:
    n = g.size
    s = np.sign(g)
    a = np.abs(g)
    cands = [g, s]
    for r in (0.5, 1.0 / 3.0, 2.0, 3.0):
        cands.append(s * a ** r)
    order = np.argsort(-a, kind="stable")
    for k in range(1, n + 1):
        v = np.zeros(n)
        v[order[:k]] = s[order[:k]]
        cands.append(v)
    return np.array(cands)


def _generic_dual_bracket(space: Space, g: np.ndarray) -> tuple[float, float]:
    C = _primal_candidates(g)
    C = C[np.any(C != 0, axis=1)]
    N = space.batch(C)
    lower = float(np.max((C @ g) / N))
    uppers = space._dual_upper_candidates(g)
    upper = min(uppers) if uppers else np.inf
    tol = settings.tol
    if upper - lower <= tol * max(1.0, upper):
        return lower, upper
    lo2, up2 = _conic_polish(space, g)
    return max(lower, lo2), min(upper, up2)


def _conic_polish(space: Space, g: np.ndarray) -> tuple[float, float]:
    import cvxpy as cp

    lower, upper = -np.inf, np.inf
    try:
        x = cp.Variable(space.dim)
        prob = cp.Problem(cp.Maximize(g @ x), [space.cvx_primal(x) <= 1])
        prob.solve(solver=cp.CLARABEL)
        if x.value is not None:
            xv = np.asarray(x.value)
            nv = space.norm(xv)
            if nv > 0:
                lower = float(xv @ g) / nv
    except (NotImplementedError, cp.error.SolverError):
        pass
    try:
        gpar = cp.Parameter(space.dim, value=g)
        expr, cons, rebuild = space.cvx_dual(gpar)
        prob = cp.Problem(cp.Minimize(expr), cons)
        prob.solve(solver=cp.CLARABEL)
        if prob.status in ("optimal", "optimal_inaccurate"):
            upper = float(rebuild(g))
    except (NotImplementedError, cp.error.SolverError):
        pass
    return lower, upper


# ---------------------------------------------------------------------------
# spaces with a prescribed fundamental function
# ---------------------------------------------------------------------------


class FamilyTooPoor(ValueError):
    pass


def build_prop33_space(phi, family: SetFamily, n: int | None = None, strict: bool = True) -> Polyhedral:
    """||x|| = max(||x||_inf, max_{A in family} (phi(|A|)/|A|) sum_{i in A} |x_i|).

    The fundamental function of the result is k -> max(1, max{phi(|A|): A in family, |A| <= k}),
    so it reproduces phi on 1..n exactly when that max equals phi(k) for every k
    (always true if the family has a set of every size).  ``strict`` raises otherwise.
    """
    n = family.n if n is None else n
    if n != family.n:
        raise DimensionMismatch("family lives on a different dimension")
    v = np.asarray(phi(np.arange(1, n + 1, dtype=float)), dtype=float)
    if abs(v[0] - 1.0) > 1e-12:
        raise ValueError("rescale phi so that phi(1) = 1")
    lam = v / np.arange(1, n + 1)
    if np.any(np.diff(v) < -1e-12) or np.any(np.diff(lam) > 1e-12):
        raise ValueError("phi must be increasing with phi(x)/x decreasing")
    reach = np.ones(n)
    for size in set(family.sizes()):
        reach[size - 1:] = np.maximum(reach[size - 1:], v[size - 1])
    if strict and np.any(np.abs(reach - v) > 1e-12):
        k = int(np.flatnonzero(np.abs(reach - v) > 1e-12)[0]) + 1
        raise FamilyTooPoor(f"no member of size <= {k} attains phi({k}); the family cannot reproduce phi")
    masks = [m for m in family.masks if bin(m).count("1") > 1]
    ind = indicator_matrix(masks, n) if masks else np.zeros((0, n))
    w = lam[ind.sum(axis=1).astype(int) - 1] if masks else np.zeros(0)
    out = Polyhedral(ind * w[:, None], n)
    object.__setattr__(out, "provenance", {"construction": "family_weighted", "phi": v.tolist(), "family_size": len(family)})
    return out


# ---------------------------------------------------------------------------
# functional API
# ---------------------------------------------------------------------------


def norm_eval(space: Space, x) -> float:
    return space.norm(x)


def dual_norm_eval(space: Space, g) -> float:
    return space.dual(g)


def norming_functional(space: Space, x) -> NormingCertificate:
    return space.norming(x)
