import math
from itertools import product

import numpy as np
import pytest

from dircount import intlattice as il
from dircount.calculus import hessian_log_lambda, nabla_matrix
from dircount.fixtures import fixture_names, load_fixture
from dircount.graph import (LabelledGraph, base_graph, cycle, enumerate_paths, full_shift, occurrence)
from dircount.growth import psi, x_g
from dircount.lattice import (NormalizerMap, build_lattice_frame, build_normalizer, lattice_sigma,
                              normalizer_violations, sofic_sublattice, variance_factor,
                              variance_factor_sofic)
from dircount.transfer import perron_data

from oracles import FIB_E0_GENERATOR, fib_sigma


def test_fibonacci_frame(fib):
    frame = build_lattice_frame(fib)
    assert frame.r == 1
    assert frame.lattice_E0 in ((FIB_E0_GENERATOR,), (tuple(-v for v in FIB_E0_GENERATOR),))


def test_cycle_frame():
    frame = build_lattice_frame(cycle(3))
    assert frame.r == 0 and frame.lattice_E0 == ()


def test_full_shift_frame():
    frame = build_lattice_frame(full_shift(2))
    assert frame.lattice_E0 == ((1, -1),)
    assert build_normalizer(frame).R == ((0, 0),)


def test_frame_invariants(any_fixture):
    g = any_fixture
    frame = build_lattice_frame(g)
    nab = np.array(nabla_matrix(g), dtype=np.int64)
    for v in frame.lattice_E0:
        v = np.array(v)
        assert v.sum() == 0 and not np.any(nab.T @ v)
    assert all(isinstance(v, int) for v in frame.f0)
    # every small integer vector of E0 is an integer combination of the basis
    span = range(-2, 3) if g.num_edges <= 5 else range(-1, 2)
    for v in product(span, repeat=g.num_edges):
        v = np.array(v)
        if v.sum() == 0 and not np.any(nab.T @ v):
            assert il.in_lattice([list(b) for b in frame.lattice_E0], v.tolist())


@pytest.mark.parametrize("name", fixture_names())
def test_normalizer_properties(name):
    g = base_graph(load_fixture(name))
    R = build_normalizer(build_lattice_frame(g))
    assert normalizer_violations(R, g) == []


def test_normalizer_checker_rejects_bad_map(fib):
    assert normalizer_violations(NormalizerMap(R=((0, 0, 0), (0, 0, 0))), fib)


def test_paper_normalizer_is_valid(fib):
    assert normalizer_violations(NormalizerMap(R=((0, 0, 0), (1, 0, -1))), fib) == []


def test_path_identity(any_fixture):
    g = any_fixture
    frame = build_lattice_frame(g)
    R = build_normalizer(frame)
    nab = np.array(nabla_matrix(g), dtype=np.int64)
    for n in range(0, 9):
        for q in range(g.num_vertices):
            for qq in range(g.num_vertices):
                for w in enumerate_paths(g, n, q, qq):
                    x = np.array(R.normalize(occurrence(w, g), q, qq))
                    assert not np.any(nab.T @ x)
                    assert R.length(x, q, qq) == n


def test_variance_factor_cycle():
    g = cycle(3)
    th = np.zeros(3)
    hess = hessian_log_lambda(perron_data(g, th), g, th)
    assert variance_factor(hess, build_lattice_frame(g)).sigma == 1.0


def test_variance_factor_fibonacci_against_closed_form(fib):
    for x1, x2 in [(1, 1), (2, 1), (0.3, 0.7), (5, 1)]:
        prof = psi(fib, [x1, x2, x2])
        hess = hessian_log_lambda(perron_data(fib, prof.theta_star), fib, prof.theta_star)
        sigma = variance_factor(hess, build_lattice_frame(fib)).sigma
        assert math.isclose(sigma, fib_sigma(x1, x2), rel_tol=1e-6)


def test_variance_factor_full_shift_two():
    g = full_shift(2)
    th = np.full(2, math.log(2))
    hess = hessian_log_lambda(perron_data(g, th), g, th)
    assert math.isclose(variance_factor(hess, build_lattice_frame(g)).sigma, 0.5, rel_tol=1e-12)


def test_variance_factor_unimodular_invariance():
    g = load_fixture("three_state")
    frame = build_lattice_frame(g)
    th = np.array([0.3, -0.2, 0.5, 0.1, 0.0])
    hess = hessian_log_lambda(perron_data(g, th), g, th)
    base = lattice_sigma(hess.matrix, frame.lattice_E0).sigma
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.integers(-3, 4, 2)
        u = np.array([[1, a], [0, 1]]) @ np.array([[1, 0], [b, 1]])
        if rng.random() < 0.5:
            u = u[::-1]
        other = (u @ np.array(frame.lattice_E0)).tolist()
        assert abs(lattice_sigma(hess.matrix, other).sigma - base) <= 1e-10 * base


def test_sofic_sublattice_fibonacci(fib_labelled):
    frame = build_lattice_frame(fib_labelled.base)
    sl = sofic_sublattice(frame, fib_labelled)
    assert sl.s == 1
    assert sl.basis == ((1, -1),)


def test_sofic_sublattice_identity_labelling():
    g = load_fixture("three_state")
    lg = LabelledGraph(g, tuple(f"b{i}" for i in range(g.num_edges)), tuple(range(g.num_edges)))
    frame = build_lattice_frame(g)
    assert sofic_sublattice(frame, lg).s == frame.r


def test_sofic_sublattice_single_letter():
    g = cycle(3)
    lg = LabelledGraph(g, ("b",), (0, 0, 0))
    assert sofic_sublattice(build_lattice_frame(g), lg).s == 0


def test_sofic_variance_matches_finite_when_projection_is_injective(fib, fib_labelled):
    th = psi(fib, x_g(fib)).theta_star
    hess = hessian_log_lambda(perron_data(fib, th), fib, th)
    frame = build_lattice_frame(fib)
    finite = variance_factor(hess, frame).sigma
    sofic = variance_factor_sofic(hess, sofic_sublattice(frame, fib_labelled), fib_labelled).sigma
    assert math.isclose(finite, sofic, rel_tol=1e-12)
