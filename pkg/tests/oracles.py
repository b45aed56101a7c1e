"""Independent reference values: closed forms, frozen numbers, brute force.

Nothing here imports the package's numerical code.
"""
from __future__ import annotations

import math
from itertools import product

import numpy as np

GOLDEN = (1 + math.sqrt(5)) / 2
FIB_DELTA = math.log(GOLDEN)
FIB_XG = np.array([1 / math.sqrt(5), (1 - 1 / math.sqrt(5)) / 2, (1 - 1 / math.sqrt(5)) / 2])
FIB_E0_GENERATOR = (2, -1, -1)


def fib_omega_member(theta) -> bool:
    return math.exp(-theta[0]) + math.exp(-theta[1] - theta[2]) <= 1


def fib_omega_margin(theta) -> float:
    return abs(math.exp(-theta[0]) + math.exp(-theta[1] - theta[2]) - 1)


def fib_psi(x1: float, x2: float) -> float:
    """Growth indicator of the Fibonacci graph at (x1, x2, x2)."""
    total = x1 + x2
    return sum(v * math.log(total / v) for v in (x1, x2) if v > 0)


def fib_sofic_psi(y1: float, y2: float) -> float:
    """Sofic indicator of the labelled Fibonacci graph, y1 >= y2 >= 0."""
    out = 0.0
    if y1 > y2:
        out += (y1 - y2) * math.log(y1 / (y1 - y2))
    if y2 > 0:
        out += y2 * math.log(y1 / y2)
    return out


def entropy_psi(x) -> float:
    """Full shift: sum x_i log(sum x / x_i)."""
    total = float(np.sum(x))
    return sum(v * math.log(total / v) for v in x if v > 0)


def fib_loop_count(x1: int, x2: int) -> int:
    """Words q1 -> q1 with x1 loops and x2 blocks a2 a3: free interleavings."""
    return math.comb(x1 + x2, x2)


def stirling_central(n: int) -> float:
    return 2.0**n * math.sqrt(2 / (math.pi * n))


def fib_sigma(x1: float, x2: float, h: float = 1e-4) -> float:
    """|d^2/dt^2 psi(x + t b)|^{-1/2} for b = (2,-1,-1), by central differences
    of the closed form at the direction normalized to total mass 1."""
    s = x1 + 2 * x2
    x1, x2 = x1 / s, x2 / s
    f = lambda t: fib_psi(x1 + 2 * t, x2 - t)
    second = (f(h) - 2 * f(0) + f(-h)) / (h * h)
    return abs(second) ** -0.5


def brute_paths(source, goal, num_vertices, n):
    """All length-n edge sequences that are paths, by filtering A^n."""
    edges = range(len(source))
    for w in product(edges, repeat=n):
        if all(goal[a] == source[b] for a, b in zip(w, w[1:])):
            yield w


def matrix_power_counts(source, goal, num_vertices, n):
    m = [[0] * num_vertices for _ in range(num_vertices)]
    for s, t in zip(source, goal):
        m[s][t] += 1
    out = [[int(i == j) for j in range(num_vertices)] for i in range(num_vertices)]
    for _ in range(n):
        out = [[sum(out[i][k] * m[k][j] for k in range(num_vertices)) for j in range(num_vertices)]
               for i in range(num_vertices)]
    return out
