"""Weighted transfer operators on functions over the vertex set.

For a weight vector theta on edges, ``L_theta`` acts on f: Q -> C by
``(L f)(q) = sum_{source(a) = q} exp(-theta[a]) f(goal(a))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import DirectedGraph, PeriodData, compute_period

DENSE_LIMIT = 64
MAX_ITER = 100_000
_EXP_LIMIT = 700.0


class ConvergenceError(RuntimeError):
    """An iterative eigensolver or optimizer ran out of budget."""


@dataclass(frozen=True)
class SpectralData:
    """Perron data of L_theta.

    ``f`` and ``phi`` are normalized so that <phi, 1> = 1 and <phi, f> = 1.
    ``log_lam`` is kept separately because lam itself may over/underflow for
    extreme theta. ``gap`` is |mu_2| / lam over the non-peripheral spectrum,
    or None when it was not computed.
    """

    lam: float
    log_lam: float
    f: np.ndarray
    phi: np.ndarray
    gap: float | None
    period: PeriodData

    def edge_weights(self, g: DirectedGraph, theta: np.ndarray) -> np.ndarray:
        """exp(-theta[a]) * phi(source a) * f(goal a) / lam; sums to 1."""
        theta = np.asarray(theta, dtype=float)
        src, dst = np.asarray(g.source), np.asarray(g.goal)
        return self.phi[src] * np.exp(-theta - self.log_lam) * self.f[dst]


@lru_cache(maxsize=256)
def period_of(g: DirectedGraph) -> PeriodData:
    return compute_period(g)


def build_transfer(g: DirectedGraph, theta) -> np.ndarray:
    """Matrix of L_theta; complex theta gives a complex matrix.

    Raises OverflowError if some exp(-theta[a]) is not representable.
    """
    theta = np.asarray(theta)
    if theta.shape != (g.num_edges,):
        raise ValueError(f"theta must have {g.num_edges} entries")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    if np.any(-theta.real > _EXP_LIMIT):
        raise OverflowError("exp(-theta) overflows for some edge")
    dtype = complex if np.iscomplexobj(theta) else float
    m = np.zeros((g.num_vertices, g.num_vertices), dtype=dtype)
    np.add.at(m, (np.asarray(g.source), np.asarray(g.goal)), np.exp(-theta))
    return m


def _shifted_transfer(g: DirectedGraph, theta: np.ndarray) -> tuple[np.ndarray, float]:
    # L_{theta - m} = e^{m} L_theta with m = min theta keeps entries <= 1
    shift = float(np.min(theta))
    return build_transfer(g, theta - shift), shift


def _dense_perron(m: np.ndarray, p: int) -> tuple[float, np.ndarray, np.ndarray, float]:
    w, vr = np.linalg.eig(m)
    k = int(np.argmax(w.real))
    lam = float(w[k].real)
    f = np.abs(vr[:, k].real)
    wl, vl = np.linalg.eig(m.T)
    kl = int(np.argmax(wl.real))
    phi = np.abs(vl[:, kl].real)
    f, phi = _polish(m, lam, f, phi)
    mods = np.sort(np.abs(w))[::-1]
    rest = mods[p:]
    gap = float(rest[0] / lam) if rest.size else 0.0
    return lam, f, phi, gap


def _polish(m: np.ndarray, lam: float, f: np.ndarray, phi: np.ndarray):
    # two steps of the fixed-point map f <- L f / lam; harmless at convergence,
    # cleans up eigenvector round-off in badly scaled cases
    for _ in range(2):
        f = m @ f
        f /= np.max(f)
        phi = m.T @ phi
        phi /= np.max(phi)
    return f, phi


def _power_perron(m: np.ndarray, period: PeriodData, tol: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Power iteration on L^p restricted to phase class 0.

    L^p preserves each phase class and is primitive there, so the Perron root
    of the block is simple and strictly dominant.
    """
    p = period.p
    classes = period.classes()
    c0 = np.array(classes[0])
    mp = np.linalg.matrix_power(m, p)
    block = mp[np.ix_(c0, c0)]

    def iterate(b: np.ndarray) -> tuple[float, np.ndarray]:
        v = np.ones(b.shape[0])
        mu = 0.0
        for _ in range(MAX_ITER):
            w = b @ v
            mu_new = float(np.max(w))
            w /= mu_new
            if np.max(np.abs(w - v)) <= tol and abs(mu_new - mu) <= tol * mu_new:
                return mu_new, w
            v, mu = w, mu_new
        raise ConvergenceError(f"power iteration did not converge in {MAX_ITER} steps (last estimate {mu})")

    mu, v0 = iterate(block)
    lam = mu ** (1.0 / p)
    n = m.shape[0]
    f = np.zeros(n)
    f[c0] = v0
    # f on class j is determined by f on class j+1 through L f = lam f
    for j in range(p - 1, 0, -1):
        cj = np.array(classes[j])
        f[cj] = (m[cj, :] @ f) / lam
    _, u0 = iterate(block.T)
    phi = np.zeros(n)
    phi[c0] = u0
    for j in range(1, p):
        cj = np.array(classes[j])
        phi[cj] = (m[:, cj].T @ phi) / lam
    return lam, f, phi


def perron_data(g: DirectedGraph, theta, tol: float = 1e-12,
                dense_limit: int = DENSE_LIMIT) -> SpectralData:
    """Perron value and normalized eigenvectors of L_theta for real theta."""
    theta = np.asarray(theta, dtype=float)
    period = period_of(g)
    m, shift = _shifted_transfer(g, theta)
    if g.num_vertices <= dense_limit:
        lam_s, f, phi, gap = _dense_perron(m, period.p)
    else:
        lam_s, f, phi = _power_perron(m, period, tol)
        gap = None
    phi = phi / phi.sum()
    f = f / float(phi @ f)
    log_lam = math.log(lam_s) - shift
    lam = math.exp(log_lam) if log_lam < _EXP_LIMIT else math.inf
    return SpectralData(lam=lam, log_lam=log_lam, f=f, phi=phi, gap=gap, period=period)


def log_lambda(g: DirectedGraph, theta) -> float:
    """log of the spectral radius of L_theta (real theta), overflow safe."""
    theta = np.asarray(theta, dtype=float)
    m, shift = _shifted_transfer(g, theta)
    return math.log(float(np.max(np.abs(np.linalg.eigvals(m))))) - shift


def spectral_radius_complex(g: DirectedGraph, theta) -> float:
    """Spectral radius of L_theta for complex theta."""
    m = build_transfer(g, np.asarray(theta, dtype=complex))
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def power_asymptotics(sd: SpectralData, g: DirectedGraph, n: int, q: int, f0) -> float:
    """Leading term p lam^n <phi, f0 1_{Q_n^q}> f(q) of (L_theta^n f0)(q)."""
    f0 = np.asarray(f0, dtype=float)
    mask = sd.period.reachable_class(q, n)
    return sd.period.p * sd.lam ** n * float(sd.phi @ (f0 * mask)) * float(sd.f[q])
