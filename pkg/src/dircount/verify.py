"""Randomized property sweeps over one graph.

Each suite draws its cases from a seeded generator and records the first
failing input in full precision so the failure can be replayed.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import e0_basis, gauge_basis, hessian_log_lambda, nabla_matrix
from .counting import (CountQuery, build_context, count_predicted, enumeration_distribution,
                       occurrence_distribution, target_near)
from .graph import DirectedGraph, LabelledGraph, base_graph, is_cyclic, path_count_matrix
from .growth import omega_contains, psi, psi_sofic
from .lattice import normalizer_violations
from .transfer import SpectralData, build_transfer, log_lambda, perron_data


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: int = 0
    reproducer: str | None = None
    detail: str | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, reproducer: Callable[[], str], detail: Callable[[], str]) -> None:
        self.cases += 1
        if not ok:
            self.failures += 1
            if self.reproducer is None:
                self.reproducer = reproducer()
                self.detail = detail()


@dataclass
class VerifyReport:
    seed: int
    suites: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


def _vec(v) -> str:
    return "[" + ", ".join(format(float(x), ".17g") for x in np.ravel(v)) + "]"


class _Spectral:
    """Perron data provider; ``lam_scale`` corrupts lambda for negative tests."""

    def __init__(self, g: DirectedGraph, lam_scale: float = 1.0):
        self.g = g
        self.shift = math.log(lam_scale)

    def __call__(self, theta) -> SpectralData:
        sd = perron_data(self.g, theta)
        if self.shift == 0.0:
            return sd
        return dataclasses.replace(sd, lam=sd.lam * math.exp(self.shift), log_lam=sd.log_lam + self.shift)

    def log_lambda(self, theta) -> float:
        return log_lambda(self.g, theta) + self.shift


def _random_theta(rng: np.random.Generator, g: DirectedGraph) -> np.ndarray:
    return rng.uniform(-2.0, 2.0, g.num_edges)


def suite_eigen(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("eigenpair")
    for _ in range(cases):
        th = _random_theta(rng, g)
        sd = spectral(th)
        m = build_transfer(g, th)
        err_r = np.max(np.abs(m @ sd.f - sd.lam * sd.f)) / (sd.lam * np.max(sd.f))
        err_l = np.max(np.abs(m.T @ sd.phi - sd.lam * sd.phi)) / (sd.lam * np.max(sd.phi))
        ok = err_r <= 1e-9 and err_l <= 1e-9 and abs(sd.phi.sum() - 1) <= 1e-12 and abs(sd.phi @ sd.f - 1) <= 1e-12
        res.record(ok, lambda th=th: f"theta={_vec(th)}",
                   lambda e=(err_r, err_l): f"eigen-equation residuals {e[0]:.3g}, {e[1]:.3g}")
    return res


def suite_gradient(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("gradient")
    h = 1e-5
    for _ in range(cases):
        th = _random_theta(rng, g)
        sd = spectral(th)
        analytic = -sd.lam * sd.edge_weights(g, th)
        fd = np.array([(math.exp(spectral.log_lambda(th + h * e)) - math.exp(spectral.log_lambda(th - h * e))) / (2 * h)
                       for e in np.eye(g.num_edges)])
        rel = float(np.max(np.abs(analytic - fd)) / max(np.max(np.abs(fd)), 1e-300))
        res.record(rel <= 1e-6, lambda th=th: f"theta={_vec(th)}",
                   lambda rel=rel: f"relative gradient error {rel:.3g}")
    return res


def suite_hessian(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("hessian")
    h = 1e-4
    gauge = gauge_basis(g)
    u = e0_basis(g)
    eye = np.eye(g.num_edges)
    for _ in range(cases):
        th = _random_theta(rng, g)
        hess = hessian_log_lambda(spectral(th), g, th).matrix
        fd = np.zeros_like(hess)
        for i in range(g.num_edges):
            for j in range(i, g.num_edges):
                ei, ej = h * eye[i], h * eye[j]
                fd[i, j] = fd[j, i] = (spectral.log_lambda(th + ei + ej) - spectral.log_lambda(th + ei - ej)
                                       - spectral.log_lambda(th - ei + ej) + spectral.log_lambda(th - ei - ej)) / (4 * h * h)
        err = float(np.max(np.abs(hess - fd)))
        kernel = float(np.max(np.abs(gauge.T @ hess @ gauge))) if gauge.size else 0.0
        min_eig = float(np.min(np.linalg.eigvalsh(u.T @ hess @ u))) if u.size else 1.0
        ok = err <= 1e-5 * max(1.0, float(np.max(np.abs(fd)))) and kernel <= 1e-9 and min_eig > 0
        res.record(ok, lambda th=th: f"theta={_vec(th)}",
                   lambda v=(err, kernel, min_eig): f"fd error {v[0]:.3g}, kernel value {v[1]:.3g}, min eigenvalue on E0 {v[2]:.3g}")
    return res


def suite_gauge(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("gauge invariance")
    nab = nabla_matrix(g)
    for _ in range(cases):
        th = _random_theta(rng, g)
        c = float(rng.uniform(-1, 1))
        xi = rng.uniform(-1, 1, g.num_vertices)
        moved = th + c + nab @ xi
        diff = abs(spectral.log_lambda(moved) - (spectral.log_lambda(th) - c))
        res.record(diff <= 1e-10, lambda v=(th, c, xi): f"theta={_vec(v[0])} c={v[1]!r} xi={_vec(v[2])}",
                   lambda d=diff: f"log lambda mismatch {d:.3g}")
    return res


def suite_duality(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("duality")
    if is_cyclic(g):
        return res
    for _ in range(cases):
        # drifts of random weights are interior points of the cone
        th = _random_theta(rng, g)
        x = perron_data(g, th).edge_weights(g, th) * float(rng.uniform(0.5, 3.0))
        prof = psi(g, x)
        lam_star = math.exp(spectral.log_lambda(prof.theta_star))
        gap = abs(float(prof.theta_star @ x) - prof.psi)
        members = []
        for _ in range(5):
            t = _random_theta(rng, g)
            members.append(t + log_lambda(g, t) + abs(rng.normal()))
        weak = min(float(t @ x) - prof.psi for t in members)
        ok = (abs(lam_star - 1) <= 1e-9 and gap <= 1e-9 * max(1.0, abs(prof.psi))
              and prof.residual <= 1e-8 and weak >= -1e-8 and prof.psi > 0)
        res.record(ok, lambda x=x: f"x={_vec(x)}",
                   lambda v=(lam_star, gap, prof.residual, weak): (
                       f"lambda(theta*)={v[0]!r}, duality gap {v[1]:.3g}, stationarity {v[2]:.3g}, "
                       f"weak duality slack {v[3]:.3g}"))
    return res


def suite_closed_forms(g, spectral, rng, cases) -> SuiteResult:
    """Full shifts (one vertex): entropy formula and the Omega predicate."""
    res = SuiteResult("closed forms")
    if g.num_vertices != 1:
        return res
    for _ in range(cases):
        x = rng.uniform(0, 1, g.num_edges)
        x[rng.integers(g.num_edges)] *= rng.integers(2)
        want = sum(v * math.log(x.sum() / v) for v in x if v > 0)
        got = psi(g, x).psi
        th = rng.uniform(-3, 3, g.num_edges)
        s = float(np.sum(np.exp(-th)))
        agrees = abs(s - 1) <= 1e-9 or (s <= 1) == omega_contains(g, th)
        member_ok = agrees and abs(math.exp(spectral.log_lambda(th)) - s) <= 1e-9 * s
        ok = abs(got - want) <= 1e-8 * max(1.0, abs(want)) and member_ok
        res.record(ok, lambda v=(x, th): f"x={_vec(v[0])} theta={_vec(v[1])}",
                   lambda v=(got, want, s): f"psi {v[0]!r} vs {v[1]!r}; sum e^-theta {v[2]!r}")
    return res


def suite_oracle(g, spectral, rng, max_n: int, threads: int = 1) -> SuiteResult:
    res = SuiteResult("exact-count oracles")
    for n in range(max_n + 1):
        powers = path_count_matrix(g, n)
        for q in range(g.num_vertices):
            dp = occurrence_distribution(g, n, q)
            listed = enumeration_distribution(g, n, q, threads=threads)
            per_end = [sum(c for (qq, _), c in dp.items() if qq == t) for t in range(g.num_vertices)]
            ok = dict(listed) == dp and per_end == powers[q]
            res.record(ok, lambda v=(n, q): f"n={v[0]} q={v[1]}", lambda: "DP, enumeration and matrix powers disagree")
    return res


def suite_normalizer(g, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("normalizer")
    ctx = build_context(g)
    bad = normalizer_violations(ctx.normalizer, g)
    res.record(not bad, lambda: f"R={ctx.normalizer.R}", lambda: "; ".join(bad[:3]))
    if is_cyclic(g) or ctx.frame.r == 0:
        return res
    nab = nabla_matrix(g)
    for _ in range(cases):
        th = _random_theta(rng, g)
        drift = perron_data(g, th).edge_weights(g, th)
        q, qq = int(rng.integers(g.num_vertices)), int(rng.integers(g.num_vertices))
        n = int(rng.integers(15, 30))
        x = target_near(ctx, drift, n, q, qq)
        if x is None:
            continue
        query = CountQuery(n=n, q=q, q_prime=qq, target=tuple(int(v) for v in x))
        base = count_predicted(query, g)
        if base.value is None:
            continue
        xi = rng.normal(size=g.num_vertices)
        moved = count_predicted(query, g, theta=base.theta_star + nab @ xi)
        rel = abs(moved.value / base.value - 1)
        res.record(rel <= 1e-8, lambda v=(x, q, qq, xi): f"x={_vec(v[0])} q={v[1]} q'={v[2]} xi={_vec(v[3])}",
                   lambda rel=rel: f"prediction changed by {rel:.3g} under a gauge shift")
    return res


def suite_sofic(lg: LabelledGraph, spectral, rng, cases) -> SuiteResult:
    res = SuiteResult("sofic")
    g = lg.base
    pi = lg.projection()
    if is_cyclic(g):
        return res
    for _ in range(cases):
        th = _random_theta(rng, g)
        x = perron_data(g, th).edge_weights(g, th)
        val_x = psi(g, x).psi
        val_y = psi_sofic(lg, pi @ x).psi
        res.record(val_y >= val_x - 1e-8, lambda x=x: f"x={_vec(x)}",
                   lambda v=(val_x, val_y): f"psi_A(pi x) = {v[1]!r} below psi(x) = {v[0]!r}")
    return res


def run_verify(graph: DirectedGraph | LabelledGraph, seed: int = 0, cases: int = 20,
               max_n: int = 8, lam_scale: float = 1.0, threads: int = 1) -> VerifyReport:
    g = base_graph(graph)
    rng = np.random.default_rng(seed)
    spectral = _Spectral(g, lam_scale)
    report = VerifyReport(seed=seed)
    report.suites.append(suite_eigen(g, spectral, rng, cases))
    report.suites.append(suite_gradient(g, spectral, rng, cases))
    report.suites.append(suite_hessian(g, spectral, rng, max(cases // 4, 1)))
    report.suites.append(suite_gauge(g, spectral, rng, cases))
    report.suites.append(suite_duality(g, spectral, rng, cases))
    report.suites.append(suite_closed_forms(g, spectral, rng, cases))
    report.suites.append(suite_oracle(g, spectral, rng, max_n, threads))
    report.suites.append(suite_normalizer(g, spectral, rng, max(cases // 4, 1)))
    if isinstance(graph, LabelledGraph):
        report.suites.append(suite_sofic(graph, spectral, rng, max(cases // 2, 1)))
    return report
