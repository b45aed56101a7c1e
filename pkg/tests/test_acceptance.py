"""Acceptance criteria 1-10, each at its stated tolerance and time budget."""
import math
import os
import time

import numpy as np

from dircount.calculus import gauge_basis, hessian_log_lambda, grad_lambda
from dircount.counting import (CountQuery, build_context, convergence_report, count_exact,
                               count_predicted, count_report, enumeration_distribution,
                               global_count_predicted, occurrence_distribution, target_near)
from dircount.fixtures import fixture_names, load_fixture
from dircount.graph import base_graph, full_shift, path_count_matrix
from dircount.growth import delta_g, omega_contains, psi, psi_sofic, x_g
from dircount.lattice import normalizer, normalizer_violations
from dircount.transfer import period_of, perron_data

from oracles import (FIB_DELTA, FIB_XG, entropy_psi, fib_omega_margin, fib_omega_member, fib_psi,
                     fib_sofic_psi, stirling_central)

THREADS = os.cpu_count() or 1


def test_golden_ratio(criterion):
    g = load_fixture("fibonacci")
    uncached = delta_g.__wrapped__
    uncached(g)
    times = []
    for _ in range(21):
        start = time.perf_counter()
        value = uncached(g)
        times.append(time.perf_counter() - start)
    err = abs(value - FIB_DELTA)
    ms = 1e3 * float(np.median(times))
    ok = err <= 1e-10 and ms < 1.0
    criterion(1, ok, f"|delta - log golden| = {err:.2e}, median {ms:.3f} ms")
    assert ok


def test_omega_membership(criterion):
    g = load_fixture("fibonacci")
    rng = np.random.default_rng(2)
    thetas = rng.uniform(-3, 3, (1000, 3))
    start = time.perf_counter()
    bad = sum(omega_contains(g, th) != fib_omega_member(th)
              for th in thetas if fib_omega_margin(th) > 1e-9)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 1.0
    criterion(2, ok, f"{bad} disagreements on 1000 theta, {elapsed:.3f} s")
    assert ok


def test_psi_closed_forms(criterion):
    g = load_fixture("fibonacci")
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        x1, x2 = rng.uniform(0.01, 5, 2)
        got = psi(g, [x1, x2, x2]).psi
        worst = max(worst, abs(got / fib_psi(x1, x2) - 1))
    finite = 0
    for _ in range(200):
        x1, x2, x3 = rng.uniform(0.01, 5, 3)
        finite += psi(g, [x1, x2, x3]).psi != -math.inf
    shift_err = 0.0
    for k in (2, 3, 4):
        fs = full_shift(k)
        for _ in range(20):
            x = rng.uniform(0.01, 5, k)
            shift_err = max(shift_err, abs(psi(fs, x).psi / entropy_psi(x) - 1))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and finite == 0 and shift_err <= 1e-7 and elapsed < 10
    criterion(3, ok, f"fibonacci rel err {worst:.1e}, {finite} finite off x2=x3, "
                     f"full shift rel err {shift_err:.1e}, {elapsed:.2f} s")
    assert ok


def test_entropy_maximizer(criterion):
    g = load_fixture("fibonacci")
    xg = x_g(g)
    err_x = float(np.max(np.abs(xg - FIB_XG)))
    err_psi = abs(psi(g, xg).psi - delta_g(g))
    ok = err_x <= 1e-8 and err_psi <= 1e-8
    criterion(4, ok, f"|x_G - closed form| = {err_x:.1e}, |psi(x_G) - delta| = {err_psi:.1e}")
    assert ok


def test_gradient_and_hessian(criterion):
    rng = np.random.default_rng(5)
    names = [n for n in fixture_names() if n != "cycle3"]
    worst_grad = worst_kernel = 0.0
    min_eig = math.inf
    h = 1e-5
    for case in range(50):
        g = base_graph(load_fixture(names[case % len(names)]))
        th = rng.uniform(-1, 1, g.num_edges)
        sd = perron_data(g, th)
        grad = grad_lambda(sd, g, th).grad_lambda
        fd = np.empty(g.num_edges)
        for a in range(g.num_edges):
            e = np.zeros(g.num_edges)
            e[a] = h
            fd[a] = (perron_data(g, th + e).lam - perron_data(g, th - e).lam) / (2 * h)
        worst_grad = max(worst_grad, float(np.max(np.abs(grad - fd)) / np.max(np.abs(grad))))
        hess = hessian_log_lambda(sd, g, th)
        for v in gauge_basis(g).T:
            worst_kernel = max(worst_kernel, abs(hess(v)) / float(v @ v))
        if hess.e0_gram.size:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(hess.e0_gram)[0]))
    ok = worst_grad <= 1e-6 and worst_kernel <= 1e-9 and min_eig > 0
    criterion(5, ok, f"gradient rel err {worst_grad:.1e}, kernel form {worst_kernel:.1e}, "
                     f"min E0 eigenvalue {min_eig:.3g}")
    assert ok


def test_exact_counts_match_enumeration(criterion):
    start = time.perf_counter()
    mismatches = checked = 0
    for name in fixture_names():
        g = load_fixture(name)
        base = base_graph(g)
        ctx = build_context(g)
        for n in range(13):
            for q in range(base.num_vertices):
                listed = enumeration_distribution(base, n, q, threads=THREADS)
                mismatches += dict(listed) != occurrence_distribution(base, n, q)
                for (qq, occ), ways in listed.items():
                    target = ctx.normalizer.normalize(occ, q, qq)
                    mismatches += count_exact(CountQuery(n, q, qq, target), base) != ways
                    checked += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    criterion(6, ok, f"{mismatches} mismatches over {checked} targets, {elapsed:.1f} s")
    assert ok


def test_llt_convergence(criterion):
    start = time.perf_counter()
    g = load_fixture("fibonacci")
    rep = convergence_report(g, FIB_XG, 0, 0, range(10, 41))
    rows = [r for r in rep.rows if r.ratio is not None]
    last = rows[-1]
    errs = [abs(r.ratio - 1) for r in rows[-3:]]
    band = 0.9 <= last.ratio <= 1.1
    trend = errs[0] > errs[1] > errs[2]
    expo = abs(rep.exponent - (-0.5)) <= 0.15
    fs = full_shift(2)
    stir = count_report(CountQuery(36, 0, 0, (18, 18)), fs)
    stir_ok = (abs(stir.ratio - 1) <= 0.02
               and math.isclose(stir.predicted, stirling_central(36), rel_tol=1e-10))
    elapsed = time.perf_counter() - start
    ok = band and trend and expo and stir_ok and elapsed < 60
    criterion(7, ok, f"ratio {last.ratio:.4f} at n={last.n}, last errors "
                     f"{', '.join(f'{e:.4f}' for e in errs)}, exponent {rep.exponent:.3f}, "
                     f"Stirling ratio {stir.ratio:.4f}, {elapsed:.1f} s")
    assert ok


def test_period_and_parity(criterion):
    g = load_fixture("bipartite_p2")
    period = period_of(g)
    odd_nonzero = 0
    for n in range(1, 31, 2):
        powers = path_count_matrix(g, n)
        for q in range(g.num_vertices):
            for qq in range(g.num_vertices):
                if period.phase[q] == period.phase[qq]:
                    odd_nonzero += powers[q][qq] != 0
    powers = path_count_matrix(g, 30)
    worst = max(abs(sum(powers[q]) / global_count_predicted(g, 30, q) - 1) for q in range(g.num_vertices))
    classes = {period.phase[q] for q in range(g.num_vertices)}
    ok = period.p == 2 and odd_nonzero == 0 and worst <= 0.02 and classes == {0, 1}
    criterion(8, ok, f"p = {period.p}, {odd_nonzero} nonzero odd same-phase counts, "
                     f"global rel err {worst:.1e} at n=30")
    assert ok


def test_normalizer_and_gauge(criterion):
    violations = []
    for name in fixture_names():
        g = base_graph(load_fixture(name))
        violations += normalizer_violations(normalizer(g), g)
    g = load_fixture("fibonacci")
    ctx = build_context(g)
    target = target_near(ctx, FIB_XG, 30, 0, 1)
    query = CountQuery(30, 0, 1, target)
    base = count_predicted(query, g)
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        xi = rng.normal(size=g.num_vertices)
        shift = xi[list(g.goal)] - xi[list(g.source)]
        moved = count_predicted(query, g, theta=base.theta_star + shift)
        worst = max(worst, abs(moved.value / base.value - 1))
    ok = not violations and worst <= 1e-8
    criterion(9, ok, f"{len(violations)} normalizer violations, gauge rel change {worst:.1e}")
    assert ok


def test_sofic_layer(criterion):
    lg = load_fixture("fibonacci_labelled")
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(200):
        y1 = rng.uniform(0.01, 5)
        y2 = y1 * rng.uniform(0.001, 0.999)
        got = psi_sofic(lg, [y1, y2]).psi
        worst = max(worst, abs(got / fib_sofic_psi(y1, y2) - 1))
    pi = lg.projection()
    ctx = build_context(lg)
    fiber_bad = 0
    for n in range(13):
        for q in range(2):
            fibers = {}
            for (qq, occ), ways in occurrence_distribution(lg.base, n, q).items():
                y = tuple(int(v) for v in pi @ np.array(ctx.normalizer.normalize(occ, q, qq)))
                fibers[(qq, y)] = fibers.get((qq, y), 0) + ways
            for (qq, y), total in fibers.items():
                fiber_bad += count_exact(CountQuery(n, q, qq, y, mode="sofic"), lg) != total
    rep = convergence_report(lg, pi @ FIB_XG, 0, 0, range(1, 41), mode="sofic")
    last = [r for r in rep.rows if r.ratio is not None][-1]
    band = 0.85 <= last.ratio <= 1.15
    ok = worst <= 1e-7 and fiber_bad == 0 and band
    criterion(10, ok, f"sofic psi rel err {worst:.1e}, {fiber_bad} fiber-sum mismatches, "
                      f"ratio {last.ratio:.4f} at n={last.n}")
    assert ok
