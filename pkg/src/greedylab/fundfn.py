"""Fundamental functions: increasing phi on [1, inf) with phi(x)/x decreasing.

Representations
  ClosedForm   a named formula (power, identity, sqrt, x_over_log, constant)
  Grid         samples at 1..N, linear in between, with an explicit tail rule
  GeometricStep  one step of the non-flattening construction: lambda is kept
               below n0 and at the knots n0*M^(2k), and interpolated
               geometrically in between

Every object is callable on real arrays and exposes ``lam`` (phi(x)/x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import CapExceeded, settings
from .families import popcounts

__all__ = [
    "FundamentalFunction",
    "ClosedForm",
    "Grid",
    "GeometricStep",
    "DeltaProfile",
    "InvalidFundamentalFunction",
    "ConstructionInfeasible",
    "check_fundamental",
    "from_dict",
    "indicator_norms",
    "fundamental_function",
    "dual_fundamental_function",
    "bidemocracy_constant",
    "democracy_constant",
    "delta_profile",
    "make_alternating_fundfn",
    "concave_envelope",
    "lemma31_construct",
    "equivalence",
    "urp_check",
    "weak_urp_constant",
]

REL = 1e-12


class InvalidFundamentalFunction(ValueError):
    pass


class ConstructionInfeasible(ValueError):
    pass


class FundamentalFunction:
    kind = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def lam(self, x):
        x = np.asarray(x, dtype=float)
        return self(x) / x

    def samples(self, N: int) -> np.ndarray:
        return np.asarray(self(np.arange(1, N + 1, dtype=float)), dtype=float)

    def to_dict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# representations
# ---------------------------------------------------------------------------

_FORMULAS = {
    "identity": lambda x, p: x,
    "sqrt": lambda x, p: np.sqrt(x),
    "power": lambda x, p: x ** p["alpha"],
    "x_over_log": lambda x, p: x / (1.0 + np.log(x)),
    "constant": lambda x, p: np.full_like(x, p.get("c", 1.0)),
}


@dataclass(frozen=True)
class ClosedForm(FundamentalFunction):
    formula: str
    params: dict = field(default_factory=dict)
    cap: int | None = None
    kind = "closed"

    def __post_init__(self):
        if self.formula not in _FORMULAS:
            raise InvalidFundamentalFunction(f"unknown formula {self.formula!r}")
        if self.formula == "power" and not (0.0 <= self.params.get("alpha", -1) <= 1.0):
            raise InvalidFundamentalFunction("power needs 0 <= alpha <= 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _FORMULAS[self.formula](np.maximum(x, 1.0), self.params)

    def to_dict(self):
        return {"kind": "closed", "formula": {"name": self.formula, **self.params}, "cap": self.cap}


_TAILS = ("ratio", "slope", "flat")


@dataclass(frozen=True, eq=False)
class Grid(FundamentalFunction):
    """Samples phi(1..N); beyond N the tail keeps phi/x ("ratio"), the last
    slope ("slope"), or phi itself ("flat") constant."""

    values: np.ndarray
    tail: str = "ratio"
    tail_slope: float | None = None
    kind = "grid"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0 or not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise InvalidFundamentalFunction("samples must be positive and finite")
        if self.tail not in _TAILS:
            raise ValueError(f"tail must be one of {_TAILS}")
        object.__setattr__(self, "values", v)
        if self.tail == "slope" and self.tail_slope is None:
            object.__setattr__(self, "tail_slope", float(v[-1] - v[-2]) if v.size > 1 else 0.0)

    @property
    def cap(self) -> int:
        return int(self.values.size)

    def __call__(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 1.0)
        v = self.values
        N = v.size
        grid = np.interp(x, np.arange(1, N + 1), v)
        over = x > N
        if np.any(over):
            if self.tail == "ratio":
                t = v[-1] * x / N
            elif self.tail == "slope":
                t = v[-1] + self.tail_slope * (x - N)
            else:
                t = np.full_like(x, v[-1])
            grid = np.where(over, t, grid)
        return grid

    def to_dict(self):
        d = {"kind": "grid", "samples": [float(a) for a in self.values], "cap": self.cap, "tail": self.tail}
        if self.tail == "slope":
            d["tail_slope"] = float(self.tail_slope)
        return d


@dataclass(frozen=True, eq=False)
class GeometricStep(FundamentalFunction):
    """psi(x) = x*mu(x) with mu = lambda on [1, n0] and at knots n0*M^(2k),
    mu(n^(1-t) (M^2 n)^t) = lambda(n)^(1-t) lambda(M^2 n)^t in between."""

    base: FundamentalFunction
    M: int
    n0: int
    delta: float
    kind = "geometric_step"

    def mu(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 1.0)
        lam = self.base.lam
        r = float(self.M) ** 2
        out = np.array(lam(x), dtype=float, copy=True)
        hi = x > self.n0
        if np.any(hi):
            xs = x[hi]
            k = np.floor(np.log(xs / self.n0) / np.log(r) + 1e-12)
            n = self.n0 * r ** k
            # guard against round-off putting x just below its knot
            k = np.where(n > xs, k - 1, k)
            n = self.n0 * r ** k
            theta = np.clip(np.log(xs / n) / np.log(r), 0.0, 1.0)
            lo_v, hi_v = lam(np.rint(n)), lam(np.rint(n * r))
            out[hi] = lo_v ** (1 - theta) * hi_v ** theta
        return out

    def __call__(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 1.0)
        return x * self.mu(x)

    def lam(self, x):
        return self.mu(x)

    def check(self, cap: int, per_segment: int = 64) -> dict:
        """Grid check of: (i) mu decreasing and x*mu increasing per segment,
        (ii) delta*lam <= mu <= M^2*lam, (iii) mu(Mx) >= sqrt(delta)*mu(x)."""
        r = float(self.M) ** 2
        lam = self.base.lam
        res = {"i": True, "ii": True, "iii": True, "segments": 0}
        n = float(self.n0)
        while n * r * self.M <= cap:
            t = np.linspace(0.0, 1.0, per_segment)
            x = n * r ** t
            mu = self.mu(x)
            xm = x * mu
            res["i"] &= bool(np.all(np.diff(mu) <= REL * mu[:-1]) and np.all(np.diff(xm) >= -REL * xm[:-1]))
            lx = lam(x)
            res["ii"] &= bool(np.all(self.delta * lx <= mu * (1 + REL)) and np.all(mu <= r * lx * (1 + REL)))
            res["iii"] &= bool(np.all(self.mu(self.M * x) >= math.sqrt(self.delta) * mu * (1 - REL)))
            res["segments"] += 1
            n *= r
        return res

    def to_dict(self):
        return {"kind": "geometric_step", "M": self.M, "n0": self.n0, "delta": self.delta, "base": self.base.to_dict()}


def from_dict(d: dict) -> FundamentalFunction:
    kind = d.get("kind")
    if kind == "closed":
        f = dict(d["formula"])
        name = f.pop("name")
        return ClosedForm(name, f, d.get("cap"))
    if kind == "grid":
        return Grid(np.asarray(d["samples"], dtype=float), d.get("tail", "ratio"), d.get("tail_slope"))
    if kind == "geometric_step":
        return GeometricStep(from_dict(d["base"]), int(d["M"]), int(d["n0"]), float(d["delta"]))
    raise InvalidFundamentalFunction(f"unknown fundamental-function kind {kind!r}")


def check_fundamental(phi, N: int, tol: float = 1e-9, pairs: int = 200, seed: int = 0) -> dict:
    """Increasing, phi(x)/x decreasing, and subadditive on sampled pairs (grid 1..N)."""
    v = np.asarray(phi(np.arange(1, N + 1, dtype=float)), dtype=float)
    lam = v / np.arange(1, N + 1)
    rng = np.random.default_rng(seed)
    a = rng.uniform(1, max(1, N / 2), pairs)
    b = rng.uniform(1, max(1, N / 2), pairs)
    sub = np.asarray(phi(a + b)) <= np.asarray(phi(a)) + np.asarray(phi(b)) + tol
    return {
        "positive": bool(np.all(v > 0)),
        "increasing": bool(np.all(np.diff(v) >= -tol)),
        "ratio_decreasing": bool(np.all(np.diff(lam) <= tol)),
        "subadditive": bool(np.all(sub)),
    }


def _require_valid(phi, N):
    c = check_fundamental(phi, N)
    if not all(c.values()):
        raise InvalidFundamentalFunction(f"not a fundamental function on 1..{N}: {c}")


# ---------------------------------------------------------------------------
# from spaces
# ---------------------------------------------------------------------------


def indicator_norms(space) -> np.ndarray:
    """||1_A|| for every bitmask A in 0..2^n-1 (cached on the space)."""
    n = space.dim
    if n > settings.enum_cap:
        raise CapExceeded("enum_cap", n, settings.enum_cap)
    key = "indicator_norms"
    if key not in space._cache:
        out = np.zeros(1 << n)
        chunk = 1 << 14
        for lo in range(1, 1 << n, chunk):
            masks = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
            X = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
            out[masks] = space.batch(X)
        space._cache[key] = out
    return space._cache[key]


def _by_size_max(vals: np.ndarray, n: int) -> np.ndarray:
    pc = popcounts(n)
    out = np.full(n, -np.inf)
    np.maximum.at(out, pc[1:] - 1, vals[1:])
    return np.maximum.accumulate(out)


def fundamental_function(space) -> Grid:
    """phi(k) = max_{|A| <= k} ||1_A|| by exhaustive enumeration."""
    return Grid(_by_size_max(indicator_norms(space), space.dim), tail="ratio")


def dual_indicator_norms(space) -> np.ndarray:
    n = space.dim
    if n > settings.enum_cap:
        raise CapExceeded("enum_cap", n, settings.enum_cap)
    key = "dual_indicator_norms"
    if key not in space._cache:
        out = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            g = ((mask >> np.arange(n)) & 1).astype(float)
            out[mask] = space.dual(g)
        space._cache[key] = out
    return space._cache[key]


def dual_fundamental_function(space) -> Grid:
    """phi*(k) = max_{|A| <= k} ||1_A||*; saturates (flat tail) beyond dim."""
    return Grid(_by_size_max(dual_indicator_norms(space), space.dim), tail="flat")


def bidemocracy_constant(space) -> float:
    n = space.dim
    k = np.arange(1, n + 1)
    return float(np.max(fundamental_function(space).values * dual_fundamental_function(space).values / k))


def democracy_constant(space) -> float:
    """max_k max_{|A|=k} ||1_A|| / min_{|B|=k} ||1_B|| (equal to the |A| <= |B| form
    for 1-unconditional norms, where ||1_B|| only grows with B)."""
    n = space.dim
    vals = indicator_norms(space)
    pc = popcounts(n)
    hi = np.full(n, -np.inf)
    lo = np.full(n, np.inf)
    np.maximum.at(hi, pc[1:] - 1, vals[1:])
    np.minimum.at(lo, pc[1:] - 1, vals[1:])
    return float(np.max(hi / lo))


# ---------------------------------------------------------------------------
# growth parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaProfile:
    values: dict  # m -> truncated estimate of delta_phi(m)
    estimate: float  # value at the largest m
    cap: int
    windows: dict  # m -> (n_lo, n_hi)
    label: str = "truncated estimate"


def delta_profile(phi, m_grid, cap: int) -> DeltaProfile:
    """min over n in [ceil(cap/(2m)), floor(cap/m)] of lambda(mn)/lambda(n)."""
    vals, wins = {}, {}
    for m in sorted(int(v) for v in m_grid):
        if m < 1:
            raise ValueError("m must be a positive integer")
        if cap < 4 * m:
            raise ValueError(f"cap {cap} too small for m={m} (need >= {4 * m})")
        lo, hi = -(-cap // (2 * m)), cap // m
        n = np.arange(lo, hi + 1, dtype=float)
        vals[m] = float(np.min(phi.lam(m * n) / phi.lam(n)))
        wins[m] = (int(lo), int(hi))
    return DeltaProfile(vals, vals[max(vals)], cap, wins)


def make_alternating_fundfn(breakpoints, cap: int | None = None) -> Grid:
    """phi(1) = 1; phi/x constant on [n_k, n_{k+1}] for odd k, phi constant for even k."""
    b = [int(v) for v in breakpoints]
    if len(b) < 1 or b[0] != 1 or any(y <= x for x, y in zip(b, b[1:])):
        raise ValueError("breakpoints must be strictly increasing integers starting at 1")
    N = max(b[-1], cap or 0)
    if N > 10_000_000:
        raise CapExceeded("grid", N, 10_000_000)
    x = np.arange(1, N + 1, dtype=float)
    phi = np.ones(N)
    # interval k (1-based) is [b[k-1], b[k]]; the last rule continues past b[-1]
    edges = b + [N + 1] if b[-1] < N else b
    val = 1.0
    for k in range(1, len(edges)):
        lo, hi = edges[k - 1], min(edges[k], N)
        seg = x[lo - 1: hi]
        phi[lo - 1: hi] = val * seg / lo if k % 2 == 1 else val
        val = phi[hi - 1]
    last = len(b)  # index of the interval that starts at b[-1]
    return Grid(phi, tail="ratio" if last % 2 == 1 else "flat")


def concave_envelope(phi, N: int | None = None) -> Grid:
    """Least concave majorant of phi on the integer grid 1..N.

    Hull vertices are integers, so linear interpolation of the hull samples is
    exactly the envelope on [1, N]; beyond N it continues along the last hull
    segment, which keeps it concave, increasing, and with psi(x)/x decreasing.
    """
    if N is None:
        N = getattr(phi, "cap", None)
        if N is None:
            raise ValueError("closed forms must be sampled: pass N")
    v = np.asarray(phi(np.arange(1, N + 1, dtype=float)), dtype=float)
    _require_valid(phi, N)
    hull: list[int] = []
    for i in range(N):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below the chord a..i
            if (v[b] - v[a]) * (i - a) <= (v[i] - v[a]) * (b - a):
                hull.pop()
            else:
                break
        hull.append(i)
    psi = np.interp(np.arange(N), hull, v[hull])
    psi = np.maximum(psi, v)  # exact on the vertices; guards interpolation round-off
    slope = float(psi[-1] - psi[-2]) if N > 1 else 0.0
    if np.any(psi > 2 * v * (1 + 1e-12)):
        raise AssertionError("envelope exceeds twice the input; the input is not a fundamental function")
    return Grid(psi, tail="slope", tail_slope=slope)


def equivalence(phi, psi, N: int) -> tuple[float, float]:
    """(a, b) with a*phi <= psi <= b*phi on 1..N."""
    x = np.arange(1, N + 1, dtype=float)
    r = np.asarray(psi(x)) / np.asarray(phi(x))
    return float(r.min()), float(r.max())


def lemma31_construct(phi, m: int, eps: float, cap: int = 100_000, max_steps: int = 6):
    """Equivalent fundamental function psi with delta_psi(m) > 1/(1+eps).

    Picks the smallest k >= 1 with (0.99*delta_phi(m^(2^k)))^(1/2^k) > 1/(1+eps),
    then applies k geometric-interpolation steps with bases m^(2^(k-1-j)).
    Returns the final GeometricStep; ``.chain`` lists all steps.
    """
    if m < 2 or eps <= 0:
        raise ValueError("need m >= 2 and eps > 0")
    target = 1.0 / (1.0 + eps)
    chosen = None
    for k in range(1, max_steps + 1):
        y = m ** (2 ** k)
        if cap < 4 * y:
            break
        d = 0.99 * delta_profile(phi, [y], cap).estimate
        if d > 0 and d ** (1.0 / 2 ** k) > target:
            chosen = (k, d)
            break
    if chosen is None:
        raise ConstructionInfeasible(
            f"no chain length k <= {max_steps} with measured delta large enough within cap {cap}"
        )
    k, delta = chosen
    cur = phi
    chain = []
    for j in range(k):
        M = m ** (2 ** (k - 1 - j))
        dj = delta ** (1.0 / 2 ** j)
        r = M * M
        top = cap // r
        x = np.arange(1, top + 1, dtype=float)
        ok = cur.lam(r * x) > dj * cur.lam(x) * (1 + REL)
        if not ok[-1]:
            raise ConstructionInfeasible(f"no n0 within cap {cap} for step {j} (M={M})")
        bad = np.flatnonzero(~ok)
        n0 = int(bad[-1]) + 2 if bad.size else 1
        cur = GeometricStep(cur, M, n0, dj)
        chain.append(cur)
    object.__setattr__(cur, "chain", tuple(chain))
    object.__setattr__(cur, "chain_delta", delta)
    return cur


def urp_check(phi, N: int):
    """Smallest integer r > 2 with phi(rn) <= r*phi(n)/2 for all n with rn <= N, or None."""
    for r in range(3, N + 1):
        n = np.arange(1, N // r + 1, dtype=float)
        if np.all(np.asarray(phi(r * n)) <= 0.5 * r * np.asarray(phi(n)) * (1 + REL)):
            return r
    return None


def weak_urp_constant(phi, N: int) -> float:
    """max_n (1/n) sum_{k<=n} phi(n)/phi(k)."""
    v = np.asarray(phi(np.arange(1, N + 1, dtype=float)), dtype=float)
    return float(np.max(v * np.cumsum(1.0 / v) / np.arange(1, N + 1)))
