"""First and second derivatives of the Perron value.

The Hessian of log lambda is assembled without differentiating eigenvectors:
every edge indicator is split into a constant, a gradient ``nabla g`` and a
theta-balanced remainder, and on balanced functions the form is the diagonal
quadratic form weighted by the drift.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import DirectedGraph
from .transfer import SpectralData

RANK_TOL = 1e-10


def nabla(g_fn, graph: DirectedGraph) -> np.ndarray:
    """(nabla g)(a) = g(goal a) - g(source a)."""
    g_fn = np.asarray(g_fn)
    return g_fn[np.asarray(graph.goal)] - g_fn[np.asarray(graph.source)]


@lru_cache(maxsize=256)
def nabla_matrix(graph: DirectedGraph) -> np.ndarray:
    """Matrix of nabla, shape (|A|, |Q|)."""
    m = np.zeros((graph.num_edges, graph.num_vertices))
    for a, (s, t) in enumerate(zip(graph.source, graph.goal)):
        m[a, t] += 1.0
        m[a, s] -= 1.0
    m.flags.writeable = False
    return m


@lru_cache(maxsize=256)
def gauge_basis(graph: DirectedGraph) -> np.ndarray:
    """Orthonormal basis (columns) of R1 + nabla V."""
    span = np.column_stack([np.ones(graph.num_edges), nabla_matrix(graph)])
    u, s, _ = np.linalg.svd(span, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    out = u[:, :rank].copy()
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def e0_basis(graph: DirectedGraph) -> np.ndarray:
    """Orthonormal basis (columns) of E0 = (R1 + nabla V)^perp."""
    span = np.column_stack([np.ones(graph.num_edges), nabla_matrix(graph)])
    u, s, _ = np.linalg.svd(span, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    out = u[:, rank:].copy()
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def nabla_v_basis(graph: DirectedGraph) -> np.ndarray:
    """Orthonormal basis (columns) of nabla V."""
    u, s, _ = np.linalg.svd(nabla_matrix(graph), full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0] if s.size else 1.0)))
    out = u[:, :rank].copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GradientData:
    grad_lambda: np.ndarray
    drift: np.ndarray


@dataclass(frozen=True)
class BalancedDecomposition:
    c: float
    g: np.ndarray
    balanced: np.ndarray


@dataclass(frozen=True)
class HessianForm:
    """d^2 log lambda at theta, as a symmetric |A| x |A| matrix.

    ``e0_gram`` is the matrix restricted to the orthonormal basis of E0.
    """

    matrix: np.ndarray
    e0_gram: np.ndarray

    def __call__(self, xi, eta=None) -> float:
        xi = np.asarray(xi, dtype=float)
        eta = xi if eta is None else np.asarray(eta, dtype=float)
        return float(xi @ self.matrix @ eta)


def grad_lambda(sd: SpectralData, graph: DirectedGraph, theta) -> GradientData:
    """Gradient of lambda and drift x_theta = -grad log lambda."""
    drift = sd.edge_weights(graph, theta)
    return GradientData(grad_lambda=-sd.lam * drift, drift=drift)


def drift(sd: SpectralData, graph: DirectedGraph, theta) -> np.ndarray:
    return sd.edge_weights(graph, theta)


def _balance_operator(sd: SpectralData, graph: DirectedGraph, theta) -> tuple[np.ndarray, np.ndarray]:
    # columns: lam f (for c) and L(1_q f) - lam 1_q f for q != 0 (g pinned at 0)
    theta = np.asarray(theta, dtype=float)
    scale = np.exp(-theta - sd.log_lam)  # e^{-theta}/lam, avoids overflow
    nq = graph.num_vertices
    lmat = np.zeros((nq, nq))
    np.add.at(lmat, (np.asarray(graph.source), np.asarray(graph.goal)), scale)
    # lmat = L_theta / lam
    cols = [sd.f]
    for q in range(1, nq):
        e = np.zeros(nq)
        e[q] = sd.f[q]
        cols.append(lmat @ e - e)
    return np.column_stack(cols), scale


def balanced_decompose(xi, sd: SpectralData, graph: DirectedGraph, theta) -> BalancedDecomposition:
    """Split xi = c 1 + nabla g + psi with psi theta-balanced, g(0) = 0."""
    xi = np.asarray(xi, dtype=float)
    op, scale = _balance_operator(sd, graph, theta)
    rhs = np.zeros(graph.num_vertices)
    np.add.at(rhs, np.asarray(graph.source), scale * xi * sd.f[np.asarray(graph.goal)])
    sol = np.linalg.solve(op, rhs)
    c = float(sol[0])
    g_fn = np.concatenate([[0.0], sol[1:]])
    psi = xi - c - nabla(g_fn, graph)
    return BalancedDecomposition(c=c, g=g_fn, balanced=psi)


def balance_residual(psi, sd: SpectralData, graph: DirectedGraph, theta) -> np.ndarray:
    """sum_{source a = q} e^{-theta a} psi(a) f(goal a) / lam, per vertex q."""
    theta = np.asarray(theta, dtype=float)
    scale = np.exp(-theta - sd.log_lam)
    out = np.zeros(graph.num_vertices)
    np.add.at(out, np.asarray(graph.source), scale * np.asarray(psi) * sd.f[np.asarray(graph.goal)])
    return out


def balanced_projector(sd: SpectralData, graph: DirectedGraph, theta) -> np.ndarray:
    """Linear map xi -> balanced part of xi, as an |A| x |A| matrix."""
    op, scale = _balance_operator(sd, graph, theta)
    src, dst = np.asarray(graph.source), np.asarray(graph.goal)
    na, nq = graph.num_edges, graph.num_vertices
    rhs = np.zeros((nq, na))
    rhs[src, np.arange(na)] = scale * sd.f[dst]
    sol = np.linalg.solve(op, rhs)
    g_fns = np.vstack([np.zeros((1, na)), sol[1:]])
    return np.eye(na) - np.ones((na, 1)) @ sol[:1] - nabla_matrix(graph) @ g_fns


def hessian_log_lambda(sd: SpectralData, graph: DirectedGraph, theta) -> HessianForm:
    """d^2 log lambda at theta.

    On theta-balanced xi, eta the form is sum_a x_theta(a) xi(a) eta(a), with
    x_theta(a) = phi(source a) e^{-theta a} f(goal a) / lam; it vanishes on
    R1 + nabla V, which fixes it everywhere.
    """
    proj = balanced_projector(sd, graph, theta)
    w = sd.edge_weights(graph, theta)
    mat = proj.T @ (w[:, None] * proj)
    mat = 0.5 * (mat + mat.T)
    u = e0_basis(graph)
    return HessianForm(matrix=mat, e0_gram=u.T @ mat @ u)
