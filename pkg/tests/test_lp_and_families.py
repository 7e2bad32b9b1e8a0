from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

import oracles
from greedylab import lp
from greedylab.families import (
    SetFamily,
    all_subsets,
    initial_segments,
    mask_of,
    members,
    popcounts,
    schreier_family,
    subset_max,
)
from greedylab.tsirelson import implicit_norm_gap, prune_dominated, tsirelson_atoms


def test_fraction_simplex_small():
    # max x + y subject to x + 2y <= 4, 3x + y <= 6
    val, x = lp.fraction_simplex_max([Fraction(1), Fraction(1)],
                                     [[Fraction(1), Fraction(2)], [Fraction(3), Fraction(1)]],
                                     [Fraction(4), Fraction(6)])
    assert val == Fraction(14, 5) and x == [Fraction(8, 5), Fraction(6, 5)]


def test_exact_dual_matches_float_and_gauge():
    rng = np.random.default_rng(0)
    for _ in range(8):
        atoms = rng.integers(0, 5, size=(4, 5)) / 4
        # the LP layer takes the full atom list, coordinate functionals included
        full = np.vstack([np.eye(5), atoms])
        atoms_q = [[Fraction(int(v * 4), 4) for v in r] for r in full]
        g = rng.integers(-4, 5, size=5)
        if not g.any():
            continue
        exact = lp.polyhedral_dual_exact(atoms_q, [Fraction(int(v)) for v in g])
        res = lp.polyhedral_dual(full, g.astype(float))
        assert res.lower <= float(exact) + 1e-12 and float(exact) <= res.upper + 1e-12
        assert float(exact) == pytest.approx(oracles.gauge_dual(atoms, g), abs=1e-9)


def test_bitmask_helpers():
    assert mask_of([1, 3]) == 0b101 and members(0b101) == [1, 3]
    assert list(popcounts(3)) == [0, 1, 1, 2, 1, 2, 2, 3]
    v = np.arange(8, dtype=float)[::-1]
    sm = subset_max(v, 3)
    for mask in range(8):
        subs = [s for s in range(8) if s & mask == s]
        assert sm[mask] == max(v[s] for s in subs)


def test_schreier_family_membership():
    fam = schreier_family(6)
    for mask in range(1, 64):
        idx = members(mask)
        assert (mask in fam) == (len(idx) <= idx[0])


def test_largest_member_within_against_enumeration():
    for fam in (schreier_family(7), initial_segments(6), all_subsets(5)):
        n = fam.n
        got = fam.largest_member_within()
        members_set = set(fam.masks)
        for E in range(1 << n):
            best = max((bin(A).count("1") for A in members_set if A & E == A), default=0)
            assert got[E] == best


def test_family_lists_round_trip():
    fam = SetFamily.from_lists(4, [[1], [2, 3], [4]])
    assert SetFamily.from_lists(4, fam.to_lists()).masks == fam.masks
    assert not fam.is_full()


def test_prune_dominated():
    V = np.array([[1, 1, 0], [0.5, 0.5, 0], [1, 1, 0], [0, 0, 1]])
    P = prune_dominated(V)
    assert len(P) == 2
    assert {tuple(r) for r in P} == {(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)}


def test_tsirelson_atom_counts_and_nonnegativity():
    counts = [len(tsirelson_atoms(n)) for n in range(1, 9)]
    assert counts == [1, 2, 4, 9, 15, 39, 83, 203]
    A = tsirelson_atoms(8)
    assert np.all(A >= 0) and np.all(A.max(axis=0) > 0)


def test_tsirelson_atoms_satisfy_implicit_equation():
    rng = np.random.default_rng(1)
    for n in (4, 6, 8):
        X = rng.standard_normal((20, n))
        assert implicit_norm_gap(tsirelson_atoms(n), X) <= 1e-12


def test_tsirelson_atoms_against_naive_closure():
    # every atom value is a lower bound for the naive norm, and the maximum is attained
    rng = np.random.default_rng(2)
    for n in (5, 6):
        A = tsirelson_atoms(n)
        for _ in range(5):
            x = rng.standard_normal(n)
            val = max(np.abs(x).max(), float(np.max(A @ np.abs(x))))
            assert val == pytest.approx(oracles.tsirelson_norm_naive(x), abs=1e-12)


def test_subsets_enumerated_once():
    n = 5
    seen = set()
    for k in range(n + 1):
        for c in combinations(range(1, n + 1), k):
            seen.add(mask_of(c))
    assert len(seen) == 32
