"""Renorming constructions and the flat-norming-functional extraction.

Each construction returns a new space; ``space.provenance`` records the
parameters chosen and the digest of the source space.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import CapExceeded, settings
from .families import SetFamily, members, popcounts
from .fundfn import (
    ConstructionInfeasible,
    concave_envelope,
    delta_profile,
    democracy_constant,
    dual_fundamental_function,
    dual_indicator_norms,
    equivalence,
    fundamental_function,
    lemma31_construct,
)
from .spaces import (
    DisjointFamilySum,
    MaxOf,
    AugmentedPolyhedral,
    ScaledSum,
    Space,
    TopKWeighted,
    scaled,
)

__all__ = [
    "PreconditionFailed",
    "PipelineInfeasible",
    "RenormParams",
    "ExtractionStep",
    "ExtractionTrace",
    "AdmissibleFamily",
    "renorm_thm21",
    "property_A_intermediate",
    "renorm_thm23",
    "choose_delta",
    "lemma41_family",
    "lemma41_extract",
    "renorm_thm42",
    "renorm_thm43",
    "smallest_m",
]

GRID_CAP = 20_000_000  # longest sampled fundamental-function grid


class PreconditionFailed(ValueError):
    pass


class PipelineInfeasible(ValueError):
    pass


def _tag(space: Space, construction: str, source: Space, **params) -> Space:
    object.__setattr__(space, "provenance", {"construction": construction, "source": source.digest(), **params})
    return space


# ---------------------------------------------------------------------------
# 1-bidemocratic renorming
# ---------------------------------------------------------------------------


def renorm_thm21(space: Space) -> Space:
    """max(||x||, max_k (phi(k)/k) S_k(|x|)) with phi the fundamental function of ``space``."""
    phi = fundamental_function(space).values
    k = np.arange(1, space.dim + 1)
    out = MaxOf((space, TopKWeighted(phi / k, space.dim)))
    return _tag(out, "thm21", space, phi=[float(v) for v in phi])


def property_A_intermediate(space: Space, eps: float, tol: float | None = None) -> Space:
    """eps*||x|| + max_k S_k(|x|)/phi*(k): the joint sup over x* in eps*B and |A| = k separates."""
    tol = settings.tol if tol is None else tol
    if eps <= 0:
        raise ValueError("eps must be positive")
    phis = dual_fundamental_function(space).values
    phi = fundamental_function(space).values
    k = np.arange(1, space.dim + 1)
    bidem = float(np.max(phi * phis / k))
    if bidem > 1 + tol:
        raise PreconditionFailed(f"space is not 1-bidemocratic (constant {bidem:.12g}); apply renorm_thm21 first")
    out = ScaledSum(((eps, space), (1.0, TopKWeighted(1.0 / phis, space.dim))))
    return _tag(out, "property_A_intermediate", space, eps=eps, phi_star=[float(v) for v in phis])


def renorm_thm23(space: Space, eps: float, tol: float | None = None) -> Space:
    """Intermediate norm scaled by 1/(1+eps), then made 1-bidemocratic again."""
    mid = property_A_intermediate(space, eps, tol)
    out = renorm_thm21(scaled(1.0 / (1.0 + eps), mid))
    return _tag(out, "thm23", space, eps=eps)


# ---------------------------------------------------------------------------
# flat norming functionals
# ---------------------------------------------------------------------------


def choose_delta(C: float, Delta: float, q: float, jmin: int = -30, jmax: int = 30) -> float:
    """Smallest dyadic delta = 2^j with C > (1+delta)*Delta/(delta*q*(1-q)).

    Smaller delta means fewer extraction steps; (1+delta)/delta decreases in
    delta, so the admissible set is an up-ray and its least dyadic is unique.
    """
    for j in range(jmin, jmax + 1):
        d = 2.0 ** j
        if C > (1 + d) * Delta / (d * q * (1 - q)):
            return d
    raise PreconditionFailed(f"no admissible delta: C={C} must exceed Delta/(q(1-q))={Delta / (q * (1 - q))}")


@dataclass(frozen=True)
class AdmissibleFamily:
    sets: SetFamily
    C: float
    q: float
    phi: np.ndarray

    def __contains__(self, mask: int) -> bool:
        return mask in self.sets


def lemma41_family(space: Space, q: float, C: float, Delta: float | None = None) -> AdmissibleFamily:
    """All A with ||(phi(|A|)/|A|) 1_A||* <= C, with richness checked over every E."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    Delta = democracy_constant(space) if Delta is None else Delta
    if not C > Delta / (q * (1 - q)):
        raise PreconditionFailed(f"C={C} must exceed Delta/(q(1-q))={Delta / (q * (1 - q))}")
    n = space.dim
    phi = fundamental_function(space).values
    pc = popcounts(n)
    masks = np.arange(1, 1 << n)
    w = phi[pc[masks] - 1] / pc[masks]
    # ||1_A||* <= |A| (coordinate functionals), so phi(|A|) <= C certifies membership
    certain = w * pc[masks] <= C + settings.tol
    if np.all(certain):
        keep = masks
    else:
        duals = dual_indicator_norms(space)
        keep = masks[certain | (w * duals[masks] <= C + settings.tol)]
    fam = SetFamily(n, tuple(int(m) for m in keep))
    within = fam.largest_member_within()
    short = np.flatnonzero(within[masks] < q * pc[masks] - 1e-12)
    if short.size:
        E = int(masks[short[0]])
        raise PreconditionFailed(f"richness fails at E={members(E)}: dual norms or C are inconsistent")
    return AdmissibleFamily(fam, C, q, phi)


@dataclass
class ExtractionStep:
    F: list[int]
    z: np.ndarray
    E: list[int]


@dataclass
class ExtractionTrace:
    steps: list[ExtractionStep]
    A: list[int]
    delta: float
    step_bound: float
    dual_value: float  # ||(phi(|A|)/|A|) 1_A||*

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def lemma41_extract(space: Space, E, q: float, C: float, Delta: float | None = None,
                    delta: float | None = None) -> ExtractionTrace:
    """Peel off coordinates where accumulated norming functionals reach delta.

    E is a collection of 1-based coordinates.  Stops once fewer than (1-q)|E|
    coordinates remain; A is the union of the peeled sets.
    """
    n = space.dim
    E = sorted(set(int(i) for i in E))
    if not E or E[0] < 1 or E[-1] > n:
        raise ValueError("E must be a nonempty subset of 1..n")
    Delta = democracy_constant(space) if Delta is None else Delta
    delta = choose_delta(C, Delta, q) if delta is None else delta
    phi = fundamental_function(space).values
    size = len(E)
    bound = (1 + delta) * Delta / (1 - q) * size / phi[size - 1]
    acc = np.zeros(n)
    F = np.zeros(n, dtype=bool)
    F[np.asarray(E) - 1] = True
    steps: list[ExtractionStep] = []
    limit = int(math.floor(bound * (1 + 1e-12)))
    while F.sum() >= (1 - q) * size:
        if len(steps) >= limit:
            raise AssertionError(f"extraction exceeded its step bound {bound:.6g}; the norming functionals are wrong")
        cert = space.norming(F.astype(float))
        z = cert.functional
        if np.any(z < -1e-15) or np.any(z[~F] != 0):
            raise AssertionError("norming functional is not nonnegative on F")
        acc += z
        Ek = F & (acc >= delta)
        steps.append(ExtractionStep((np.flatnonzero(F) + 1).tolist(), z, (np.flatnonzero(Ek) + 1).tolist()))
        F &= ~Ek
    A = sorted(i for s in steps for i in s.E)
    g = np.zeros(n)
    g[np.asarray(A, dtype=int) - 1] = 1.0
    dual = float(phi[len(A) - 1] / len(A) * space.dual(g)) if A else 0.0
    return ExtractionTrace(steps, A, delta, bound, dual)


# ---------------------------------------------------------------------------
# (1+eps)-democratic renorming
# ---------------------------------------------------------------------------


def _flat_atoms(fam: AdmissibleFamily, weights: np.ndarray) -> np.ndarray:
    n = fam.sets.n
    masks = np.asarray(fam.sets.masks, dtype=np.int64)
    ind = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    return ind * weights[ind.sum(axis=1).astype(int) - 1][:, None]


def renorm_thm42(space: Space, eps: float) -> Space:
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = 1.0 / (1.0 + eps)
    Delta = democracy_constant(space)
    C = 1.01 * Delta / (q * (1 - q))
    fam = lemma41_family(space, q, C, Delta)
    k = np.arange(1, space.dim + 1)
    atoms = _flat_atoms(fam, fam.phi / k)
    out = AugmentedPolyhedral(space, atoms)
    return _tag(out, "thm42", space, eps=eps, q=q, C=C, Delta=Delta, family_size=len(fam.sets))


# ---------------------------------------------------------------------------
# (1+4eps)-greedy renorming
# ---------------------------------------------------------------------------


@dataclass
class RenormParams:
    eps: float
    q: float
    C: float
    Delta: float
    delta: float
    m: int
    a: float
    b: float
    n0: int
    s: float
    L: float
    psi: list = field(default_factory=list)
    psi_one: float = 1.0
    normalizer: float = 1.0
    family_size: int = 0
    interpolation_steps: list = field(default_factory=list)
    delta_psi_m: float = 0.0
    degenerate: bool = False
    floor_hit: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def smallest_m(eps: float) -> int:
    m = 2
    while m / (m - 1) > 1 + eps + 1e-15:
        m += 1
    return m


def renorm_thm43(space: Space, eps: float, allow_degenerate: bool = False):
    """Returns (normalized space, params); ``params`` also carries the unscaled space."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = space.dim
    q = 1.0 / (1.0 + eps)
    Delta = democracy_constant(space)
    C = 1.01 * Delta / (q * (1 - q))
    fam = lemma41_family(space, q, C, Delta)
    m = smallest_m(eps)
    start = int(math.floor(1.0 / eps)) + 1
    if start > n and not allow_degenerate:
        raise PipelineInfeasible(
            f"n0 exceeds dimension: n0 must exceed 1/eps = {1 / eps:g} but the dimension is {n}"
        )
    phi = fundamental_function(space)  # ratio tail beyond dim
    # extended domain large enough for the delta profile of m^(2^k), k <= 2
    cap = 4 * n * m ** 4
    if cap > GRID_CAP:
        raise CapExceeded("fundfn_grid", cap, GRID_CAP)
    try:
        step = lemma31_construct(phi, m, eps, cap=cap, max_steps=2)
    except ConstructionInfeasible as exc:
        raise PipelineInfeasible(f"non-flattening step failed: {exc}") from exc
    psi = concave_envelope(step, cap)
    prof = delta_profile(psi, [m], cap).estimate
    if not prof > q:
        raise PipelineInfeasible(f"delta_psi({m}) = {prof} does not exceed q = {q}")
    a, b = equivalence(phi, psi, n)
    # n0: smallest integer > 1/eps with psi(x) > q*m*psi(x/m) on the grid n0..dim
    x = np.arange(1, n + 1, dtype=float)
    ok = psi(x) > q * m * psi(np.maximum(x / m, 1.0)) * (1 + 1e-12)
    n0 = None
    for c in range(start, n + 1):
        if np.all(ok[c - 1:]):
            n0 = c
            break
    degenerate = False
    if n0 is None:
        if not allow_degenerate:
            raise PipelineInfeasible(
                f"n0 exceeds dimension: no n0 in [{start}, {n}] satisfies the growth test (1/eps = {1 / eps:g})"
            )
        n0, degenerate = n, True
    floor_hit = n0 < m
    s = eps * a / (1 + eps)
    L = m * float(psi(1.0)) / eps
    k = np.arange(1, n + 1)
    psi_w = psi(k.astype(float)) / k
    top = np.zeros(n)
    top[min(n0, n) - 1] = 1.0
    unscaled = ScaledSum((
        (s, space),
        (1.0, DisjointFamilySum(fam.sets, psi_w, m)),
        (L, TopKWeighted(top, n)),
    ))
    unit = unscaled.unit_vector_norms()
    normalizer = s * float(space.unit_vector_norms().max()) + float(psi(1.0)) + L
    out = scaled(1.0 / normalizer, unscaled)
    params = RenormParams(
        eps=eps, q=q, C=C, Delta=Delta, delta=choose_delta(C, Delta, q), m=m, a=a, b=b, n0=int(n0),
        s=s, L=L, psi=[float(v) for v in psi(k.astype(float))], psi_one=float(psi(1.0)),
        normalizer=normalizer, family_size=len(fam.sets),
        interpolation_steps=[{"M": st.M, "n0": st.n0, "delta": st.delta} for st in step.chain],
        delta_psi_m=prof, degenerate=degenerate, floor_hit=floor_hit,
    )
    object.__setattr__(params, "unscaled", unscaled)
    object.__setattr__(params, "unit_norms_unscaled", unit)
    _tag(out, "thm43", space, **params.to_dict())
    return out, params
