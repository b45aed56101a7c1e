"""Exact directional word counts and their local-limit predictions.

Exact counts come from dynamic programming over (vertex, partial occurrence
vector) states with Python integers; literal path enumeration is kept as an
independent oracle for small lengths.
"""
from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import intlattice as il
from .calculus import hessian_log_lambda
from .graph import (DirectedGraph, LabelledGraph, base_graph, enumerate_paths, occurrence,
                    path_count_matrix)
from .growth import GrowthProfile, psi, psi_sofic
from .lattice import (LatticeFrame, NormalizerMap, SoficLattice, build_lattice_frame,
                      build_normalizer, sofic_sublattice, variance_factor,
                      variance_factor_sofic)
from .transfer import perron_data, power_asymptotics

DEFAULT_MAX_LENGTH = 40
DEFAULT_BUDGET_MB = 1024
_BYTES_PER_STATE = 160
_PARALLEL_MIN_PATHS = 200_000


class BudgetExceeded(RuntimeError):
    """The exact oracle would exceed its length or memory budget."""


def budget_bytes() -> int:
    raw = os.environ.get("DIRCOUNT_BUDGET_MB")
    mb = float(raw) if raw else DEFAULT_BUDGET_MB
    return int(mb * 2**20)


@dataclass(frozen=True)
class CountingContext:
    """Graph plus the lattice data every query needs; built once per graph."""

    graph: DirectedGraph
    labelled: LabelledGraph | None
    frame: LatticeFrame
    normalizer: NormalizerMap
    sofic: SoficLattice | None

    @property
    def period(self) -> int:
        return self.frame.period.p


@lru_cache(maxsize=64)
def build_context(g: DirectedGraph | LabelledGraph) -> CountingContext:
    base = base_graph(g)
    frame = build_lattice_frame(base)
    lg = g if isinstance(g, LabelledGraph) else None
    return CountingContext(
        graph=base, labelled=lg, frame=frame, normalizer=build_normalizer(frame),
        sofic=sofic_sublattice(frame, lg) if lg is not None else None,
    )


@dataclass(frozen=True)
class CountQuery:
    """How many length-n words from q to q_prime have normalized occurrence
    vector ``target`` (edge counts, or label counts in sofic mode)."""

    n: int
    q: int
    q_prime: int
    target: tuple[int, ...]
    mode: str = "finite"

    def __post_init__(self):
        if self.mode not in ("finite", "sofic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n < 0:
            raise ValueError("length must be nonnegative")
        object.__setattr__(self, "target", tuple(int(v) for v in self.target))


@dataclass(frozen=True)
class Screen:
    feasible: bool
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class Prediction:
    value: float | None
    psi: float | None = None
    theta_star: np.ndarray | None = None
    sigma: float | None = None
    dim: int | None = None
    reason: str | None = None


@dataclass(frozen=True)
class CountReport:
    n: int
    q: int
    q_prime: int
    target: tuple[int, ...]
    mode: str
    exact: int
    predicted: float | None
    ratio: float | None
    psi_value: float | None
    theta_star: tuple[float, ...] | None
    sigma: float | None
    r_or_s: int
    reasons: tuple[str, ...] = ()


def _is_sofic(query: CountQuery) -> bool:
    return query.mode == "sofic"


def _label_offset(ctx: CountingContext, q: int, q_prime: int) -> np.ndarray:
    return ctx.labelled.projection() @ ctx.normalizer.offset(q, q_prime)


def _require_labelled(ctx: CountingContext) -> LabelledGraph:
    if ctx.labelled is None:
        raise ValueError("sofic mode needs a labelled graph")
    return ctx.labelled


def prescreen(query: CountQuery, ctx: CountingContext) -> Screen:
    """Necessary conditions for a nonzero count; reasons name each failure."""
    g = ctx.graph
    reasons = []
    for v in (query.q, query.q_prime):
        if not 0 <= v < g.num_vertices:
            raise ValueError(f"vertex id {v} out of range")
    phase = ctx.frame.period.phase
    if (phase[query.q_prime] - phase[query.q] - query.n) % ctx.period:
        reasons.append("phase")
    total = sum(query.target) + int(np.sum(ctx.normalizer.offset(query.q, query.q_prime)))
    if total != query.n:
        reasons.append("length")
    if _is_sofic(query):
        lg = _require_labelled(ctx)
        if len(query.target) != lg.num_labels:
            raise ValueError(f"target must have {lg.num_labels} label counts")
        if not il.in_lattice([list(v) for v in ctx.sofic.circulations], list(query.target)):
            reasons.append("lattice")
        counts = np.array(query.target) + _label_offset(ctx, query.q, query.q_prime)
    else:
        if len(query.target) != g.num_edges:
            raise ValueError(f"target must have {g.num_edges} edge counts")
        if not il.in_lattice([list(v) for v in ctx.frame.circulations], list(query.target)):
            reasons.append("lattice")
        counts = np.array(ctx.normalizer.denormalize(query.target, query.q, query.q_prime))
    if np.any(counts < 0):
        reasons.append("negative")
    return Screen(feasible=not reasons, reasons=tuple(reasons))


# --- exact oracles ---------------------------------------------------------------

def _check_budget(n: int, state_bound: float, max_length: int) -> None:
    if n > max_length:
        raise BudgetExceeded(f"length {n} exceeds the exact-count limit {max_length}")
    if state_bound * _BYTES_PER_STATE > budget_bytes():
        raise BudgetExceeded(
            f"dynamic program needs about {state_bound * _BYTES_PER_STATE / 2**20:.0f} MB, "
            f"budget is {budget_bytes() / 2**20:.0f} MB (set DIRCOUNT_BUDGET_MB)"
        )


def _count_with_occurrence(g: DirectedGraph, n: int, q: int, q_prime: int,
                           counts: Sequence[int], max_length: int) -> int:
    """Paths q -> q' whose occurrence vector equals ``counts`` exactly."""
    if any(c < 0 for c in counts) or sum(counts) != n:
        return 0
    # flow balance is a property of the target alone; check it once
    balance = [0] * g.num_vertices
    for a, c in enumerate(counts):
        balance[g.goal[a]] += c
        balance[g.source[a]] -= c
    balance[q_prime] -= 1 if n else 0
    balance[q] += 1 if n else 0
    if any(balance):
        return 0
    if n == 0:
        return int(q == q_prime)
    _check_budget(n, g.num_vertices * math.prod(c + 1 for c in counts), max_length)
    layer: dict[tuple[int, tuple[int, ...]], int] = {(q, tuple([0] * g.num_edges)): 1}
    for _ in range(n):
        nxt: dict[tuple[int, tuple[int, ...]], int] = {}
        for (v, used), ways in layer.items():
            for a in g.out_edges[v]:
                if used[a] < counts[a]:
                    key = (g.goal[a], used[:a] + (used[a] + 1,) + used[a + 1:])
                    nxt[key] = nxt.get(key, 0) + ways
        layer = nxt
    return layer.get((q_prime, tuple(counts)), 0)


def _count_with_labels(lg: LabelledGraph, n: int, q: int, q_prime: int,
                       counts: Sequence[int], max_length: int) -> int:
    """Paths q -> q' whose label-count vector equals ``counts``."""
    g = lg.base
    if any(c < 0 for c in counts) or sum(counts) != n:
        return 0
    if n == 0:
        return int(q == q_prime)
    _check_budget(n, g.num_vertices * math.prod(c + 1 for c in counts), max_length)
    layer: dict[tuple[int, tuple[int, ...]], int] = {(q, tuple([0] * lg.num_labels)): 1}
    for _ in range(n):
        nxt: dict[tuple[int, tuple[int, ...]], int] = {}
        for (v, used), ways in layer.items():
            for a in g.out_edges[v]:
                b = lg.labelling[a]
                if used[b] < counts[b]:
                    key = (g.goal[a], used[:b] + (used[b] + 1,) + used[b + 1:])
                    nxt[key] = nxt.get(key, 0) + ways
        layer = nxt
    return layer.get((q_prime, tuple(counts)), 0)


def count_exact(query: CountQuery, g: DirectedGraph | LabelledGraph,
                max_length: int = DEFAULT_MAX_LENGTH) -> int:
    """Exact N_n(x, q, q') (or its sofic analogue) as a Python int."""
    ctx = build_context(g)
    if query.n > max_length:
        raise BudgetExceeded(f"length {query.n} exceeds the exact-count limit {max_length}")
    if _is_sofic(query):
        lg = _require_labelled(ctx)
        counts = [int(v) for v in np.array(query.target) + _label_offset(ctx, query.q, query.q_prime)]
        return _count_with_labels(lg, query.n, query.q, query.q_prime, counts, max_length)
    counts = ctx.normalizer.denormalize(query.target, query.q, query.q_prime)
    return _count_with_occurrence(ctx.graph, query.n, query.q, query.q_prime, counts, max_length)


def occurrence_distribution(g: DirectedGraph, n: int, q: int,
                            max_length: int = DEFAULT_MAX_LENGTH) -> dict[tuple[int, tuple[int, ...]], int]:
    """{(q', P(w)): number of length-n words from q} by forward DP."""
    _check_budget(n, g.num_vertices * math.comb(n + g.num_edges - 1, g.num_edges - 1), max_length)
    layer = {(q, tuple([0] * g.num_edges)): 1}
    for _ in range(n):
        nxt: dict[tuple[int, tuple[int, ...]], int] = {}
        for (v, used), ways in layer.items():
            for a in g.out_edges[v]:
                key = (g.goal[a], used[:a] + (used[a] + 1,) + used[a + 1:])
                nxt[key] = nxt.get(key, 0) + ways
        layer = nxt
    return layer


def _enumerate_chunk(args) -> Counter:
    g, n, q, first = args
    out: Counter = Counter()
    for qq in range(g.num_vertices):
        for w in enumerate_paths(g, n, q, qq, first_edges=first):
            out[(qq, occurrence(w, g))] += 1
    return out


def enumeration_distribution(g: DirectedGraph, n: int, q: int, threads: int = 1) -> Counter:
    """Same table as :func:`occurrence_distribution` by listing every path."""
    if n == 0:
        return Counter({(q, tuple([0] * g.num_edges)): 1})
    chunks = [(g, n, q, [a]) for a in g.out_edges[q]]
    # a process pool only pays off for large listings
    big = sum(path_count_matrix(g, n)[q]) > _PARALLEL_MIN_PATHS
    if threads > 1 and len(chunks) > 1 and big:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_enumerate_chunk, chunks))
    else:
        parts = [_enumerate_chunk(c) for c in chunks]
    total: Counter = Counter()
    for part in parts:
        total.update(part)
    return total


# --- predictions -----------------------------------------------------------------

@lru_cache(maxsize=4096)
def _psi_cached(g: DirectedGraph, x: tuple[float, ...]) -> GrowthProfile:
    return psi(g, np.array(x))


@lru_cache(maxsize=4096)
def _psi_sofic_cached(lg: LabelledGraph, y: tuple[float, ...]) -> GrowthProfile:
    return psi_sofic(lg, np.array(y))


def llt_prefactor(ctx: CountingContext, theta: np.ndarray, q: int, q_prime: int) -> float:
    """p e^{<theta, R(q') - R(q)>} phi(q') f(q) at a weight with lambda = 1."""
    sd = perron_data(ctx.graph, theta)
    offset = ctx.normalizer.offset(q, q_prime)
    return ctx.period * math.exp(float(theta @ offset)) * float(sd.phi[q_prime]) * float(sd.f[q])


def count_predicted(query: CountQuery, g: DirectedGraph | LabelledGraph,
                    theta: np.ndarray | None = None) -> Prediction:
    """Leading local-limit term for the query, or a refusal with a reason.

    ``theta`` replaces the computed minimizer; any weight in its nabla V orbit
    gives the same value.
    """
    ctx = build_context(g)
    screen = prescreen(query, ctx)
    if not screen.feasible:
        return Prediction(value=None, reason=",".join(screen.reasons))
    sofic = _is_sofic(query)
    if sofic:
        lg = _require_labelled(ctx)
        prof = _psi_sofic_cached(lg, tuple(float(v) for v in query.target))
    else:
        prof = _psi_cached(ctx.graph, tuple(float(v) for v in query.target))
    if not prof.is_finite or prof.psi <= 0 or prof.boundary or prof.theta_star is None:
        return Prediction(value=None, psi=prof.psi, reason="psi<=0 or boundary direction")
    th = prof.theta_star if theta is None else np.asarray(theta, dtype=float)
    sd = perron_data(ctx.graph, th)
    hess = hessian_log_lambda(sd, ctx.graph, th)
    if sofic:
        vf = variance_factor_sofic(hess, ctx.sofic, ctx.labelled)
        dim = ctx.sofic.s
    else:
        vf = variance_factor(hess, ctx.frame)
        dim = ctx.frame.r
    n = query.n
    log_value = (-0.5 * dim * math.log(2 * math.pi * n) - math.log(vf.sigma) + prof.psi
                 + math.log(llt_prefactor(ctx, th, query.q, query.q_prime)))
    return Prediction(value=math.exp(log_value), psi=prof.psi, theta_star=th, sigma=vf.sigma, dim=dim)


def count_report(query: CountQuery, g: DirectedGraph | LabelledGraph, force: bool = False,
                 max_length: int = DEFAULT_MAX_LENGTH) -> CountReport:
    ctx = build_context(g)
    screen = prescreen(query, ctx)
    exact = count_exact(query, g, max_length) if (screen.feasible or force) else 0
    pred = count_predicted(query, g)
    dim = (ctx.sofic.s if _is_sofic(query) else ctx.frame.r)
    ratio = exact / pred.value if pred.value else None
    return CountReport(
        n=query.n, q=query.q, q_prime=query.q_prime, target=query.target, mode=query.mode,
        exact=exact, predicted=pred.value, ratio=ratio, psi_value=pred.psi,
        theta_star=None if pred.theta_star is None else tuple(float(v) for v in pred.theta_star),
        sigma=pred.sigma, r_or_s=dim, reasons=screen.reasons,
    )


def global_count_predicted(g: DirectedGraph, n: int, q: int) -> float:
    """p e^{delta n} <phi, 1_{Q_n^q}> f(q) with eigendata at theta = 0."""
    sd = perron_data(g, np.zeros(g.num_edges))
    return power_asymptotics(sd, g, n, q, np.ones(g.num_vertices))


# --- CLT diagnostic --------------------------------------------------------------

@dataclass(frozen=True)
class CltReport:
    n: int
    mass: float
    mass_predicted: float
    first_moment: np.ndarray
    second_moment: np.ndarray
    covariance: np.ndarray

    @property
    def first_moment_norm(self) -> float:
        return float(np.linalg.norm(self.first_moment))

    @property
    def covariance_error(self) -> float:
        """Relative Frobenius distance between the empirical and limiting forms."""
        denom = max(float(np.linalg.norm(self.covariance)), 1e-300)
        return float(np.linalg.norm(self.second_moment / max(self.mass, 1e-300) - self.covariance)) / denom


def clt_diagnostic(g: DirectedGraph, theta, q: int, n: int, tol: float = 1e-8,
                   max_length: int = DEFAULT_MAX_LENGTH) -> CltReport:
    """Weighted moments of P(w) - n x_theta over all words of length n from q."""
    theta = np.asarray(theta, dtype=float)
    sd = perron_data(g, theta)
    if abs(sd.lam - 1.0) > tol:
        raise ValueError(f"theta must satisfy lambda(theta) = 1 (got {sd.lam:.12g})")
    drift = sd.edge_weights(g, theta)
    u = build_lattice_frame(g).basis_E0
    dist = occurrence_distribution(g, n, q, max_length)
    mass, first = 0.0, np.zeros(g.num_edges)
    second = np.zeros((u.shape[1], u.shape[1]))
    for (_, occ), ways in dist.items():
        occ = np.array(occ, dtype=float)
        weight = ways * math.exp(-float(theta @ occ))
        dev = occ - n * drift
        mass += weight
        first += weight * dev
        proj = u.T @ dev
        second += weight * np.outer(proj, proj) / n
    hess = hessian_log_lambda(sd, g, theta)
    return CltReport(
        n=n, mass=mass,
        mass_predicted=power_asymptotics(sd, g, n, q, np.ones(g.num_vertices)),
        first_moment=first / n, second_moment=second, covariance=hess.e0_gram,
    )


# --- targets along a direction ---------------------------------------------------

def _nearest_point(x0: np.ndarray, basis: Sequence[Sequence[int]], goal: np.ndarray) -> np.ndarray | None:
    """Nonnegative point of x0 + Z-span(basis) nearest to goal, or None."""
    if not basis:
        return x0 if np.all(x0 >= 0) else None
    b = np.array(basis, dtype=float)
    coef = np.linalg.lstsq(b.T, goal - x0, rcond=None)[0]
    base = np.round(coef)
    best, best_d = None, math.inf
    k = len(basis)
    offsets = (np.array(np.meshgrid(*[[-1, 0, 1]] * k)).reshape(k, -1).T if k <= 4
               else np.vstack([np.zeros(k)] + [s * np.eye(k)[i] for i in range(k) for s in (-1, 1)]))
    for off in offsets:
        x = x0 + (base + off) @ np.array(basis, dtype=np.int64)
        if np.any(x < 0):
            continue
        d = float(np.sum((x - goal) ** 2))
        if d < best_d - 1e-12:
            best, best_d = x, d
    return None if best is None else np.rint(best).astype(np.int64)


def target_near(ctx: CountingContext, direction, n: int, q: int, q_prime: int,
                mode: str = "finite") -> tuple[int, ...] | None:
    """Normalized target at length n closest to the ray through ``direction``.

    Returns None when no target at length n can be realized (phase, lattice
    or sign obstruction).
    """
    direction = np.asarray(direction, dtype=float)
    if (ctx.frame.period.phase[q_prime] - ctx.frame.period.phase[q] - n) % ctx.period:
        return None
    offset = ctx.normalizer.offset(q, q_prime)
    total = n - int(np.sum(offset))
    if total < 0:
        return None
    goal = direction * total / float(np.sum(direction))
    if mode == "sofic":
        gens = [list(v) for v in ctx.sofic.circulations]
    else:
        gens = [list(v) for v in ctx.frame.circulations]
    sums = [[sum(v) for v in gens]]
    coeffs = il.solve_integer(sums, [total])
    if coeffs is None:
        return None
    x0 = np.array(il.matmul([coeffs], gens)[0], dtype=np.int64) if gens else np.zeros(len(direction), np.int64)
    kernel = il.integer_kernel(sums, len(gens))
    basis = il.lattice_basis(il.matmul(kernel, gens)) if kernel and gens else []
    basis = il.size_reduce(basis) if basis else []
    point = _nearest_point(x0, basis, goal)
    return None if point is None else tuple(int(v) for v in point)


# --- convergence report ----------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    target: tuple[int, ...]
    exact: int
    predicted: float | None
    ratio: float | None
    psi: float | None
    sigma: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    direction: tuple[float, ...]
    q: int
    q_prime: int
    mode: str
    dim: int
    rows: tuple[ConvergenceRow, ...]
    growth_rate: float | None
    growth_rate_expected: float | None
    exponent: float | None
    exponent_expected: float
    notes: tuple[str, ...] = field(default=())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "exact", "predicted", "ratio", "psi", "r", "sigma"])
        for row in self.rows:
            writer.writerow([row.n, row.exact, _fmt(row.predicted), _fmt(row.ratio),
                             _fmt(row.psi), self.dim, _fmt(row.sigma)])
        return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else format(v, ".17g")


def _integer_ray(ctx: CountingContext, direction: np.ndarray, mode: str) -> bool:
    if not np.all(direction == np.round(direction)):
        return False
    gens = ctx.sofic.circulations if mode == "sofic" else ctx.frame.circulations
    return il.in_lattice([list(v) for v in gens], [int(v) for v in direction])


def convergence_report(g: DirectedGraph | LabelledGraph, direction, q: int, q_prime: int,
                       lengths: Iterable[int], mode: str = "finite",
                       max_length: int = DEFAULT_MAX_LENGTH) -> ConvergenceReport:
    """Exact vs predicted counts along a direction, with fitted rates.

    An integer direction that is itself a feasible lattice vector is followed
    exactly (targets m * direction); any other direction is tracked by the
    nearest feasible lattice point at each length. Lengths with no feasible
    target are skipped.
    """
    ctx = build_context(g)
    direction = np.asarray(direction, dtype=float)
    exact_ray = _integer_ray(ctx, direction, mode)
    offset_sum = int(np.sum(ctx.normalizer.offset(q, q_prime)))
    rows = []
    for n in sorted(set(int(n) for n in lengths)):
        if exact_ray:
            total = n - offset_sum
            step = int(round(direction.sum()))
            if total <= 0 or total % step:
                continue
            target = tuple(int(v) * (total // step) for v in direction)
        else:
            target = target_near(ctx, direction, n, q, q_prime, mode)
            if target is None:
                continue
        query = CountQuery(n=n, q=q, q_prime=q_prime, target=target, mode=mode)
        if not prescreen(query, ctx).feasible:
            continue
        exact = count_exact(query, g, max_length)
        pred = count_predicted(query, g)
        ratio = exact / pred.value if pred.value else None
        rows.append(ConvergenceRow(n=n, target=target, exact=exact, predicted=pred.value,
                                   ratio=ratio, psi=pred.psi, sigma=pred.sigma))
    dim = ctx.sofic.s if mode == "sofic" else ctx.frame.r
    if mode == "sofic":
        ref = _psi_sofic_cached(ctx.labelled, tuple(direction))
    else:
        ref = _psi_cached(ctx.graph, tuple(direction))
    expected_rate = ref.psi / float(direction.sum()) if ref.is_finite else None
    rate, exponent = _fit_rates([r for r in rows if r.exact > 0 and r.psi is not None])
    return ConvergenceReport(
        direction=tuple(float(v) for v in direction), q=q, q_prime=q_prime, mode=mode, dim=dim,
        rows=tuple(rows), growth_rate=rate, growth_rate_expected=expected_rate,
        exponent=exponent, exponent_expected=-dim / 2,
    )


def _fit_rates(rows: Sequence[ConvergenceRow]) -> tuple[float | None, float | None]:
    """Growth rate from log N = a + b n + c log n; exponent from log N - psi = a + c log n."""
    if len(rows) < 3:
        return None, None
    n = np.array([r.n for r in rows], dtype=float)
    log_exact = np.array([math.log(r.exact) for r in rows])
    design = np.column_stack([np.ones_like(n), n, np.log(n)])
    rate = float(np.linalg.lstsq(design, log_exact, rcond=None)[0][1])
    resid = log_exact - np.array([r.psi for r in rows])
    exponent = float(np.polyfit(np.log(n), resid, 1)[0])
    return rate, exponent


def gauge_shift(g: DirectedGraph, xi) -> np.ndarray:
    """nabla xi as an edge vector."""
    xi = np.asarray(xi, dtype=float)
    return xi[np.asarray(g.goal)] - xi[np.asarray(g.source)]


__all__ = [
    "BudgetExceeded", "CountQuery", "CountReport", "CountingContext", "ConvergenceReport",
    "ConvergenceRow", "CltReport", "Prediction", "Screen", "build_context", "clt_diagnostic",
    "convergence_report", "count_exact", "count_predicted", "count_report",
    "enumeration_distribution", "gauge_shift", "global_count_predicted", "llt_prefactor",
    "occurrence_distribution", "prescreen", "target_near",
]
