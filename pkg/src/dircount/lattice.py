"""Integer lattices attached to a graph and the normalizer map R.

Exact arithmetic (Python ints) is used for every lattice basis; floating
point only enters when a Hessian is evaluated on a basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import intlattice as il
from .calculus import HessianForm, e0_basis
from .graph import DirectedGraph, LabelledGraph, PeriodData
from .transfer import period_of


@dataclass(frozen=True)
class LatticeFrame:
    """Subspaces and lattices of E = R^A for one connected graph.

    ``lattice_E0`` is an integer basis of Lambda cap E0 (rows);
    ``circulations`` an integer basis of Lambda cap (nabla V)^perp;
    ``section`` is the integer |Q| x |A| matrix of S, with S(Lambda) in Delta.
    """

    graph: DirectedGraph
    period: PeriodData
    basis_nablaV: tuple[tuple[int, ...], ...]
    basis_E0: np.ndarray
    lattice_E0: tuple[tuple[int, ...], ...]
    circulations: tuple[tuple[int, ...], ...]
    f0: tuple[int, ...]
    section: tuple[tuple[int, ...], ...]

    @property
    def r(self) -> int:
        return len(self.lattice_E0)

    def dual_E0(self) -> np.ndarray:
        return dual_basis(self.lattice_E0, self.graph.num_edges)


@dataclass(frozen=True)
class NormalizerMap:
    """Integer vector R(q) per vertex, see :func:`build_normalizer`."""

    R: tuple[tuple[int, ...], ...]

    def offset(self, q: int, q_prime: int) -> np.ndarray:
        """R(q') - R(q)."""
        return np.array(self.R[q_prime], dtype=np.int64) - np.array(self.R[q], dtype=np.int64)

    def normalize(self, occ, q: int, q_prime: int) -> tuple[int, ...]:
        """P(w) - R(q') + R(q) for a word from q to q'."""
        return tuple(int(v) for v in np.asarray(occ, dtype=np.int64) - self.offset(q, q_prime))

    def length(self, x, q: int, q_prime: int) -> int:
        """Word length n matching a normalized target: <1, x + R(q') - R(q)> = n."""
        return int(np.sum(np.asarray(x, dtype=np.int64)) + np.sum(self.offset(q, q_prime)))

    def denormalize(self, x, q: int, q_prime: int) -> tuple[int, ...]:
        """Occurrence vector P(w) = x + R(q') - R(q)."""
        return tuple(int(v) for v in np.asarray(x, dtype=np.int64) + self.offset(q, q_prime))


@dataclass(frozen=True)
class VarianceFactor:
    sigma: float
    gram: np.ndarray


@dataclass(frozen=True)
class SoficLattice:
    """Lattice pi(Lambda cap E0) in the label space F, with rank s."""

    basis: tuple[tuple[int, ...], ...]
    circulations: tuple[tuple[int, ...], ...]

    @property
    def s(self) -> int:
        return len(self.basis)


def _nabla_rows(g: DirectedGraph) -> list[list[int]]:
    rows = []
    for q in range(g.num_vertices):
        rows.append([int(t == q) - int(s == q) for s, t in zip(g.source, g.goal)])
    return rows


@lru_cache(maxsize=128)
def build_lattice_frame(g: DirectedGraph) -> LatticeFrame:
    """Lattice frame with the section S built in three stages.

    S is the pinned inverse of nabla on nabla V (g(q0) = 0, q0 = vertex 0),
    S(f0) = 0 for f0 = nabla g0 - 1/p, and S is extended to Z^A by completing
    an integer basis of Lambda cap (nabla V + R1) to one of Z^A.
    """
    period = period_of(g)
    p = period.p
    na, nq = g.num_edges, g.num_vertices
    nab = _nabla_rows(g)
    basis_nablaV = [nab[q] for q in range(1, nq)]
    f0 = []
    for s, t in zip(g.source, g.goal):
        num = period.phase[t] - period.phase[s] - 1
        if num % p:
            raise ArithmeticError("phase map inconsistent with the period")
        f0.append(num // p)
    # columns: nabla 1_q (q != 0) then f0; targets: 1_q and 0
    k_cols = il.transpose(basis_nablaV + [f0])
    target = [[int(q == qq) for qq in range(1, nq)] + [0] for q in range(nq)]
    section = il.solve_left_unimodular(k_cols, target)
    lattice_E0 = il.integer_kernel([[1] * na] + nab, na)
    circulations = il.integer_kernel(nab, na)
    return LatticeFrame(
        graph=g,
        period=period,
        basis_nablaV=tuple(tuple(v) for v in basis_nablaV),
        basis_E0=e0_basis(g),
        lattice_E0=tuple(tuple(v) for v in lattice_E0),
        circulations=tuple(tuple(v) for v in circulations),
        f0=tuple(f0),
        section=tuple(tuple(row) for row in section),
    )


def build_normalizer(frame: LatticeFrame) -> NormalizerMap:
    """R(q) = S*(1_q): row q of the section matrix."""
    return NormalizerMap(R=frame.section)


def normalizer(g: DirectedGraph) -> NormalizerMap:
    return build_normalizer(build_lattice_frame(g))


def normalizer_violations(R: NormalizerMap, g: DirectedGraph) -> list[str]:
    """Exact integer check of both defining properties of R; [] if valid."""
    period = period_of(g)
    nab = _nabla_rows(g)
    bad = []
    for a in range(g.num_edges):
        v = [int(b == a) for b in range(g.num_edges)]
        v = [x - y + z for x, y, z in zip(v, R.R[g.goal[a]], R.R[g.source[a]])]
        for q, row in enumerate(nab):
            if sum(x * y for x, y in zip(row, v)):
                bad.append(f"(i) fails on edge {a} against nabla 1_{q}")
    for q in range(g.num_vertices):
        for qq in range(g.num_vertices):
            if period.phase[q] == period.phase[qq] and sum(R.R[q]) != sum(R.R[qq]):
                bad.append(f"(ii) fails for vertices {q}, {qq}")
    return bad


def dual_basis(basis, dim: int) -> np.ndarray:
    """Columns d_i in span(basis) with <d_i, b_j> = delta_ij."""
    if len(basis) == 0:
        return np.zeros((dim, 0))
    b = np.array(basis, dtype=float).T
    return b @ np.linalg.inv(b.T @ b)


def lattice_sigma(cov: np.ndarray, basis) -> VarianceFactor:
    """sqrt det of a covariance form on the dual basis of an integer lattice.

    This is the inverse of the local Gaussian mass per lattice cell, so it
    does not depend on which basis of the lattice is passed.
    """
    d = dual_basis(basis, cov.shape[0])
    gram = d.T @ cov @ d
    if gram.size == 0:
        return VarianceFactor(sigma=1.0, gram=gram)
    ev = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    if ev[0] <= 0:
        raise ArithmeticError(f"Hessian is not positive definite on the lattice (min eigenvalue {ev[0]:.3g})")
    return VarianceFactor(sigma=float(np.sqrt(np.prod(ev))), gram=gram)


def variance_factor(hessian: HessianForm, frame: LatticeFrame) -> VarianceFactor:
    return lattice_sigma(hessian.matrix, frame.lattice_E0)


def sofic_sublattice(frame: LatticeFrame, lg: LabelledGraph) -> SoficLattice:
    pi = lg.projection().tolist()
    gens = il.matmul(frame.lattice_E0, il.transpose(pi)) if frame.r else []
    circ = il.matmul(frame.circulations, il.transpose(pi)) if frame.circulations else []
    return SoficLattice(
        basis=tuple(tuple(v) for v in il.lattice_basis(gens)),
        circulations=tuple(tuple(v) for v in il.lattice_basis(circ)),
    )


def variance_factor_sofic(hessian: HessianForm, sl: SoficLattice, lg: LabelledGraph) -> VarianceFactor:
    pi = lg.projection().astype(float)
    return lattice_sigma(pi @ hessian.matrix @ pi.T, sl.basis)
