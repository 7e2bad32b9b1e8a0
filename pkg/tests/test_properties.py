"""Property-based invariants over random vectors and random polyhedral norms."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from greedylab.fundfn import ClosedForm, Grid, check_fundamental, concave_envelope, fundamental_function
from greedylab.greedy import greedy_approximant, sigma_m
from greedylab.renorm import renorm_thm21
from greedylab.spaces import Lp, Polyhedral, Tsirelson

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vectors(n):
    return arrays(np.float64, n, elements=finite)


@st.composite
def polyhedral(draw, n=5):
    k = draw(st.integers(0, 4))
    atoms = draw(arrays(np.float64, (k, n), elements=st.sampled_from([0.0, 0.25, 0.5, 1.0])))
    return Polyhedral(atoms, n)


@settings(max_examples=60, deadline=None)
@given(polyhedral(), vectors(5), vectors(5))
def test_norm_axioms(space, x, y):
    nx, ny = space.norm(x), space.norm(y)
    assert space.norm(x + y) <= nx + ny + 1e-9 * (1 + nx + ny)
    assert np.isclose(space.norm(-2.5 * x), 2.5 * nx)
    assert nx >= np.abs(x).max() - 1e-12


@settings(max_examples=60, deadline=None)
@given(polyhedral(), vectors(5), st.integers(0, 5))
def test_greedy_and_best_term_errors(space, x, m):
    err = space.norm(x - greedy_approximant(x, m))
    sig = sigma_m(space, x, m)
    assert sig <= err + 1e-12
    assert sig <= space.norm(x) + 1e-12


@settings(max_examples=40, deadline=None)
@given(vectors(6), st.integers(0, 6))
def test_greedy_is_optimal_in_lp(x, m):
    for p in (1.0, 2.0, np.inf):
        sp = Lp(p, 6)
        assert np.isclose(sp.norm(x - greedy_approximant(x, m)), sigma_m(sp, x, m), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(vectors(6))
def test_bidemocratic_renorming_dominates_and_is_equivalent(x):
    T = Tsirelson(6)
    R = renorm_thm21(T)
    assert T.norm(x) - 1e-12 <= R.norm(x) <= 2 * T.norm(x) + 1e-12


@settings(max_examples=30, deadline=None)
@given(polyhedral())
def test_fundamental_function_shape(space):
    phi = fundamental_function(space).values
    k = np.arange(1, space.dim + 1)
    assert np.all(np.diff(phi) >= -1e-12)
    assert np.all(np.diff(phi / k) <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=25))
def test_envelope_of_random_fundamental_functions(increments):
    # build phi with phi increasing and phi(n)/n decreasing
    v = [1.0]
    for t in increments:
        n = len(v)
        v.append(v[-1] + t * v[-1] / n)
    phi = Grid(np.array(v), "ratio")
    check_fundamental(phi, len(v))
    psi = concave_envelope(phi, len(v))
    x = np.arange(1, len(v) + 1, dtype=float)
    assert np.all(psi(x) >= phi(x) - 1e-12) and np.all(psi(x) <= 2 * phi(x) + 1e-12)
    assert np.all(np.diff(psi(x), 2) <= 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0))
def test_power_functions_are_fundamental(alpha):
    check_fundamental(ClosedForm("power", {"alpha": alpha}), 500)
