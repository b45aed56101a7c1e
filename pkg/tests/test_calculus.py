import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dircount.calculus import (balance_residual, balanced_decompose, e0_basis, gauge_basis,
                               grad_lambda, hessian_log_lambda, nabla, nabla_matrix)
from dircount.fixtures import load_fixture
from dircount.graph import base_graph, is_cyclic
from dircount.transfer import log_lambda, perron_data


def fd_hessian(g, th, h=1e-4):
    eye = np.eye(g.num_edges)
    out = np.zeros((g.num_edges, g.num_edges))
    for i in range(g.num_edges):
        for j in range(g.num_edges):
            ei, ej = h * eye[i], h * eye[j]
            out[i, j] = (log_lambda(g, th + ei + ej) - log_lambda(g, th + ei - ej)
                         - log_lambda(g, th - ei + ej) + log_lambda(g, th - ei - ej)) / (4 * h * h)
    return out


def test_gradient_against_central_differences(any_fixture):
    g = any_fixture
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(5):
        th = rng.uniform(-2, 2, g.num_edges)
        sd = perron_data(g, th)
        grad = grad_lambda(sd, g, th)
        fd = np.array([(perron_data(g, th + h * e).lam - perron_data(g, th - h * e).lam) / (2 * h)
                       for e in np.eye(g.num_edges)])
        assert np.max(np.abs(grad.grad_lambda - fd)) <= 1e-6 * np.max(np.abs(fd))
        assert abs(grad.drift.sum() - 1) < 1e-12


def test_hessian_against_finite_differences(any_fixture):
    g = any_fixture
    rng = np.random.default_rng(4)
    th = rng.uniform(-1.5, 1.5, g.num_edges)
    hess = hessian_log_lambda(perron_data(g, th), g, th)
    assert np.max(np.abs(hess.matrix - fd_hessian(g, th))) < 1e-6


def test_hessian_kernel_and_definiteness(any_fixture):
    g = any_fixture
    rng = np.random.default_rng(5)
    for _ in range(5):
        th = rng.uniform(-2, 2, g.num_edges)
        hess = hessian_log_lambda(perron_data(g, th), g, th)
        for v in gauge_basis(g).T:
            assert abs(hess(v)) <= 1e-9
            assert np.max(np.abs(hess.matrix @ v)) <= 1e-9
        if not is_cyclic(g):
            assert np.min(np.linalg.eigvalsh(hess.e0_gram)) > 0


def test_dimension_of_e0(any_fixture):
    g = any_fixture
    assert e0_basis(g).shape[1] == g.num_edges - g.num_vertices


def test_gauge_invariance_of_lambda(any_fixture):
    g = any_fixture
    rng = np.random.default_rng(6)
    for _ in range(10):
        th = rng.uniform(-2, 2, g.num_edges)
        c = rng.uniform(-1, 1)
        xi = rng.uniform(-1, 1, g.num_vertices)
        assert abs(log_lambda(g, th + c + nabla(xi, g)) - (log_lambda(g, th) - c)) < 1e-10


@given(arrays(float, 5, elements=st.floats(-2, 2)), arrays(float, 5, elements=st.floats(-3, 3)))
def test_balanced_decomposition(theta, xi):
    g = load_fixture("three_state")
    sd = perron_data(g, theta)
    dec = balanced_decompose(xi, sd, g, theta)
    assert dec.g[0] == 0
    assert np.allclose(dec.c + nabla(dec.g, g) + dec.balanced, xi, atol=1e-10)
    assert np.max(np.abs(balance_residual(dec.balanced, sd, g, theta))) < 1e-9 * max(1, np.max(np.abs(xi)))


def test_nabla_matrix(fib):
    xi = np.array([0.3, -1.2])
    assert np.allclose(nabla_matrix(fib) @ xi, nabla(xi, fib))
    assert np.allclose(nabla(xi, fib), [0.0, -1.5, 1.5])
