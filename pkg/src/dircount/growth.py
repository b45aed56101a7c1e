"""Growth indicator psi, its dual region and the sofic indicator.

psi(x) = inf_theta [<theta, x> + <1, x> log lambda(theta)] is solved by
Newton's method on E0 after the gauge directions R1 + nabla V are quotiented
out. Directions outside the cone of nonnegative circulations are recognized
exactly and come with a ray along which the objective is unbounded below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog, minimize

from .calculus import e0_basis, gauge_basis, hessian_log_lambda, nabla_matrix, nabla_v_basis
from .graph import (DirectedGraph, GraphError, LabelledGraph, edge_components, is_cyclic,
                    require_connected, restrict_labels)
from .transfer import ConvergenceError, log_lambda, perron_data

GRAD_TOL = 1e-10
MAX_NEWTON = 200
CONE_TOL = 1e-10
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class GrowthProfile:
    """Result of a psi evaluation.

    ``direction`` is the input normalized to <1, x> = 1 (None when it cannot
    be). ``psi`` is the value at the input itself, -inf outside the cone.
    ``certificate`` is a ray theta along which the objective decreases
    without bound when psi = -inf. ``boundary`` marks directions with zero
    coordinates, where the infimum is not attained and theta_star is None.
    """

    direction: np.ndarray | None
    psi: float
    theta_star: np.ndarray | None
    converged: bool
    iterations: int
    drift: np.ndarray | None = None
    boundary: bool = False
    certificate: np.ndarray | None = None
    residual: float = 0.0
    label_weights: np.ndarray | None = None
    attaining: np.ndarray | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.psi)


@dataclass(frozen=True)
class DualRegion:
    """Membership oracle for {theta : lambda(theta) <= 1}."""

    graph: DirectedGraph
    tol: float = 1e-12

    def __contains__(self, theta) -> bool:
        return omega_contains(self.graph, theta, self.tol)


def omega_contains(g: DirectedGraph, theta, tol: float = 1e-12) -> bool:
    return log_lambda(g, theta) <= math.log1p(tol)


@lru_cache(maxsize=256)
def delta_g(g: DirectedGraph) -> float:
    """Global growth rate log lambda(0)."""
    require_connected(g)
    if is_cyclic(g):
        # the transfer matrix is a permutation matrix
        return 0.0
    return perron_data(g, np.zeros(g.num_edges)).log_lam


def x_g(g: DirectedGraph) -> np.ndarray:
    """Entropy-maximizing direction: the drift at theta = delta_G * 1."""
    require_connected(g)
    if is_cyclic(g):
        direction = np.full(g.num_edges, 1.0 / g.num_edges)
        raise GraphError(
            "cyclic graph: psi is supported on the single direction "
            f"{np.array2string(direction, precision=6)}"
        )
    theta = np.full(g.num_edges, delta_g(g))
    return perron_data(g, theta).edge_weights(g, theta)


# --- finite graphs -------------------------------------------------------------

def _minus_infinity(x, certificate, note: str) -> GrowthProfile:
    return GrowthProfile(direction=None, psi=-math.inf, theta_star=None, converged=True,
                         iterations=0, certificate=certificate, notes=(note,))


def cone_certificate(g: DirectedGraph, x: np.ndarray, tol: float = CONE_TOL) -> tuple[np.ndarray, str] | None:
    """A ray theta with <theta, x> < 0 and lambda(t theta) bounded, or None.

    None means x is (up to tol) a nonnegative nonzero circulation.
    """
    scale = max(1.0, float(np.max(np.abs(x))))
    nv = nabla_v_basis(g)
    along = nv @ (nv.T @ x)
    if np.linalg.norm(along) > tol * scale:
        # lambda is constant along nabla V
        return -along / np.linalg.norm(along), "x has a component along nabla V"
    neg = int(np.argmin(x))
    if x[neg] < -tol * scale:
        ray = np.zeros(g.num_edges)
        ray[neg] = 1.0
        return ray, f"negative coordinate on edge {g.edge_names[neg]}"
    if float(np.sum(x)) <= tol * scale:
        return np.ones(g.num_edges), "x is not a nonzero nonnegative vector"
    return None


def _newton(g: DirectedGraph, basis: np.ndarray, xn: np.ndarray, gtol: float,
            z0: np.ndarray | None = None, weights_map: np.ndarray | None = None):
    """Minimize <theta, xn> + log lambda(theta) over theta = basis @ z.

    ``weights_map`` maps the drift into the space where xn lives (the label
    projection in the sofic case); xn is then compared to pi x_theta.
    Returns (z, iterations, gradient norm, converged).
    """
    k = basis.shape[1]
    proj = weights_map
    z = np.zeros(k) if z0 is None else np.asarray(z0, dtype=float)
    if k == 0:
        return z, 0, 0.0, True
    full_basis = basis if proj is None else proj.T @ basis
    linear = basis.T @ xn

    def objective(zz: np.ndarray) -> float:
        return float(linear @ zz) + log_lambda(g, full_basis @ zz)

    current = objective(z)
    gnorm = math.inf
    for it in range(1, MAX_NEWTON + 1):
        theta = full_basis @ z
        sd = perron_data(g, theta)
        drift = sd.edge_weights(g, theta)
        mapped = drift if proj is None else proj @ drift
        grad = basis.T @ (xn - mapped)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= gtol:
            return z, it - 1, gnorm, True
        hess = full_basis.T @ hessian_log_lambda(sd, g, theta).matrix @ full_basis
        try:
            np.linalg.cholesky(hess)
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if -slope < 1e-10:
            # quadratic regime: objective differences are below round-off here
            z = z + step
            current = objective(z)
            continue
        t = 1.0
        while True:
            trial = z + t * step
            try:
                val = objective(trial)
            except OverflowError:
                val = math.inf
            if val <= current + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if t < 1e-12:
            # no descent possible at working precision: accept if tiny gradient
            return z, it, gnorm, gnorm <= 1e3 * gtol
        z, current = trial, val
    return z, MAX_NEWTON, gnorm, False


def _psi_interior(g: DirectedGraph, xn: np.ndarray, gtol: float) -> GrowthProfile:
    basis = e0_basis(g)
    z, iters, gnorm, ok = _newton(g, basis, xn, gtol)
    if not ok:
        raise ConvergenceError(f"Newton did not converge (gradient norm {gnorm:.3g} after {iters} steps)")
    theta = basis @ z
    theta_star = theta + log_lambda(g, theta)
    sd = perron_data(g, theta_star)
    drift = sd.edge_weights(g, theta_star)
    return GrowthProfile(
        direction=xn, psi=float(theta_star @ xn), theta_star=theta_star, converged=True,
        iterations=iters, drift=drift, residual=float(np.max(np.abs(xn - drift))),
    )


def psi(g: DirectedGraph, x, gtol: float = GRAD_TOL) -> GrowthProfile:
    """Growth indicator at x, with the minimizing weight theta*.

    The returned ``psi`` is for x itself; ``direction`` and ``theta_star``
    refer to x / <1, x>, since psi is homogeneous of degree one.
    """
    require_connected(g)
    x = np.asarray(x, dtype=float)
    if x.shape != (g.num_edges,):
        raise ValueError(f"direction must have {g.num_edges} coordinates")
    if not np.any(x):
        raise ValueError("direction must be nonzero")
    cert = cone_certificate(g, x)
    if cert is not None:
        return _minus_infinity(x, *cert)
    total = float(np.sum(x))
    xn = np.clip(x / total, 0.0, None)
    # restore exact circulation after clipping round-off
    nv = nabla_v_basis(g)
    xn = xn - nv @ (nv.T @ xn)
    xn = np.where(x > 0, xn, 0.0)
    xn /= xn.sum()
    support = np.flatnonzero(xn > 0)
    if support.size == g.num_edges:
        prof = _psi_interior(g, xn, gtol)
        return GrowthProfile(**{**prof.__dict__, "psi": total * prof.psi})
    pieces, crossing = edge_components(g, support.tolist())
    if crossing:
        raise ConvergenceError("support of x is not a union of cycles")
    value, iters = 0.0, 0
    for piece in pieces:
        sub_x = xn[list(piece.edges)]
        sub = psi(piece.graph, sub_x, gtol)
        value += sub.psi
        iters += sub.iterations
    return GrowthProfile(direction=xn, psi=total * value, theta_star=None, converged=True,
                         iterations=iters, boundary=True,
                         notes=("zero coordinates: value assembled from the strongly connected pieces of the support",))


# --- sofic ---------------------------------------------------------------------

@lru_cache(maxsize=128)
def _label_basis(lg: LabelledGraph) -> np.ndarray:
    """Orthonormal basis of label weights f whose pull-back leaves R1 + nabla V."""
    pi_t = lg.projection().T.astype(float)
    gb = gauge_basis(lg.base)
    residual = pi_t - gb @ (gb.T @ pi_t)
    _, s, vt = np.linalg.svd(residual, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)))
    out = vt[:rank].T.copy()
    out.flags.writeable = False
    return out


def _circulation_lp(lg: LabelledGraph, y: np.ndarray, objective: np.ndarray | None = None):
    """LP over {x >= t, circulation, pi x = y}; maximizes t by default."""
    g = lg.base
    na = g.num_edges
    pi = lg.projection().astype(float)
    nab = nabla_matrix(g).T
    a_eq = np.vstack([np.hstack([nab, np.zeros((g.num_vertices, 1))]),
                      np.hstack([pi, np.zeros((lg.num_labels, 1))])])
    b_eq = np.concatenate([np.zeros(g.num_vertices), y])
    a_ub = np.hstack([-np.eye(na), np.ones((na, 1))])
    c = np.zeros(na + 1)
    if objective is None:
        c[-1] = -1.0
    else:
        c[:na] = objective
    return linprog(c, A_ub=a_ub, b_ub=np.zeros(na), A_eq=a_eq, b_eq=b_eq,
                   bounds=[(0, None)] * na + [(0, 1)], method="highs")


def _farkas_ray(lg: LabelledGraph, y: np.ndarray) -> np.ndarray:
    """Label weights d with pi* d - nabla g >= 0 and <d, y> < 0."""
    g = lg.base
    nb, nq = lg.num_labels, g.num_vertices
    pi_t = lg.projection().T.astype(float)
    nab = nabla_matrix(g)
    # variables (d, h); -(pi* d - nabla h) <= 0 ; minimize <d, y>
    a_ub = np.hstack([-pi_t, nab])
    c = np.concatenate([y, np.zeros(nq)])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(g.num_edges),
                  bounds=[(-1, 1)] * (nb + nq), method="highs")
    return res.x[:nb]


def psi_sofic(lg: LabelledGraph, y, gtol: float = GRAD_TOL) -> GrowthProfile:
    """Sofic indicator: sup of psi_G over occurrence directions labelled y."""
    g = lg.base
    require_connected(g)
    y = np.asarray(y, dtype=float)
    if y.shape != (lg.num_labels,):
        raise ValueError(f"direction must have {lg.num_labels} coordinates")
    if not np.any(y):
        raise ValueError("direction must be nonzero")
    total = float(np.sum(y))
    if total <= 0 or np.min(y) < -CONE_TOL * max(1.0, float(np.max(np.abs(y)))):
        ray = np.zeros(lg.num_labels)
        if total <= 0:
            ray[:] = 1.0
        else:
            ray[int(np.argmin(y))] = 1.0
        return _minus_infinity(y, ray, "y is not a nonzero nonnegative vector")
    yn = np.clip(y / total, 0.0, None)
    yn /= yn.sum()
    lp = _circulation_lp(lg, yn)
    if lp.status == 2:
        return _minus_infinity(y, _farkas_ray(lg, yn), "no nonnegative circulation has this label count")
    if lp.status != 0:
        raise ConvergenceError(f"feasibility LP failed: {lp.message}")
    if lp.x[-1] > 1e-9:
        prof = _psi_sofic_interior(lg, yn, gtol)
    else:
        prof = _psi_sofic_boundary(lg, yn, gtol)
    return GrowthProfile(**{**prof.__dict__, "psi": total * prof.psi})


def _psi_sofic_interior(lg: LabelledGraph, yn: np.ndarray, gtol: float) -> GrowthProfile:
    g = lg.base
    basis = _label_basis(lg)
    pi = lg.projection().astype(float)
    z, iters, gnorm, ok = _newton(g, basis, yn, gtol, weights_map=pi)
    if not ok:
        raise ConvergenceError(f"Newton did not converge (gradient norm {gnorm:.3g} after {iters} steps)")
    f = basis @ z
    shift = log_lambda(g, pi.T @ f)
    f = f + shift
    theta_star = pi.T @ f
    drift = perron_data(g, theta_star).edge_weights(g, theta_star)
    return GrowthProfile(
        direction=yn, psi=float(f @ yn), theta_star=theta_star, converged=True, iterations=iters,
        drift=drift, residual=float(np.max(np.abs(yn - pi @ drift))), label_weights=f,
        attaining=drift,
    )


def _support_edges(lg: LabelledGraph, yn: np.ndarray) -> list[int]:
    # an edge is in the face iff some feasible circulation uses it
    out = []
    for a in range(lg.base.num_edges):
        c = np.zeros(lg.base.num_edges)
        c[a] = -1.0
        res = _circulation_lp(lg, yn, objective=c)
        if res.status == 0 and -res.fun > 1e-9:
            out.append(a)
    return out


def _psi_sofic_boundary(lg: LabelledGraph, yn: np.ndarray, gtol: float) -> GrowthProfile:
    g = lg.base
    pieces, _ = edge_components(g, _support_edges(lg, yn))
    if len(pieces) == 1 and pieces[0].graph.num_edges > 0:
        sub_lg, used = restrict_labels(lg, pieces[0])
        if len(used) == lg.num_labels or not np.any(yn[[b for b in range(lg.num_labels) if b not in used]]):
            sub = psi_sofic(sub_lg, yn[list(used)], gtol)
            attaining = None
            if sub.attaining is not None:
                attaining = np.zeros(g.num_edges)
                attaining[list(pieces[0].edges)] = sub.attaining
            return GrowthProfile(direction=yn, psi=sub.psi, theta_star=None, converged=sub.converged,
                                 iterations=sub.iterations, boundary=True, attaining=attaining,
                                 notes=("face of the cone: solved on its strongly connected support",))
    return _psi_sofic_pieces(lg, yn, pieces)


def _psi_sofic_pieces(lg: LabelledGraph, yn: np.ndarray, pieces) -> GrowthProfile:
    """inf <f, y> subject to lambda_i(pi* f) <= 1 on every piece (SLSQP)."""
    labels = [np.array([lg.labelling[a] for a in piece.edges]) for piece in pieces]
    start = max(delta_g(piece.graph) if not is_cyclic(piece.graph) else 0.0 for piece in pieces)
    f0 = np.full(lg.num_labels, start + 1.0)
    cons = [{"type": "ineq", "fun": (lambda f, pc=pc, lb=lb: -log_lambda(pc.graph, f[lb]))}
            for pc, lb in zip(pieces, labels)]
    res = minimize(lambda f: float(f @ yn), f0, jac=lambda f: yn, constraints=cons,
                   method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    if not res.success:
        raise ConvergenceError(f"constrained solve on a disconnected face failed: {res.message}")
    return GrowthProfile(direction=yn, psi=float(res.fun), theta_star=None, converged=True,
                         iterations=int(res.nit), boundary=True, label_weights=res.x,
                         notes=(f"disconnected face: value accurate to about {BOUNDARY_TOL:g}",))
