"""Exact integer linear algebra on small dense matrices.

Everything here works on lists of Python ints so results are exact; the
matrices handled by the package have a few dozen entries at most.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

IntMatrix = list[list[int]]


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, s, t) with s*a + t*b = g = gcd(a, b) >= 0."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if a < 0:
        return -a, -s0, -t0
    return a, s0, t0


def identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def transpose(m: Sequence[Sequence[int]], ncols: int | None = None) -> IntMatrix:
    if not m:
        return [[] for _ in range(ncols or 0)]
    return [list(col) for col in zip(*m)]


def matmul(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> IntMatrix:
    bt = transpose(b)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def hermite_form(m: Sequence[Sequence[int]]) -> tuple[IntMatrix, IntMatrix, int]:
    """Row-style Hermite normal form with unimodular transform.

    Returns ``(H, U, rank)`` with ``U @ m == H``, ``U`` unimodular, ``H`` in
    row echelon form with positive pivots and reduced entries above each
    pivot. Rows ``rank:`` of ``H`` are zero.
    """
    h = [[int(v) for v in row] for row in m]
    nrows = len(h)
    ncols = len(h[0]) if h else 0
    u = identity(nrows)
    rank = 0
    for c in range(ncols):
        if rank == nrows:
            break
        for i in range(rank + 1, nrows):
            b = h[i][c]
            if b == 0:
                continue
            a = h[rank][c]
            g, s, t = xgcd(a, b)
            pa, pb = a // g, b // g
            for mat in (h, u):
                ri, rr = mat[i], mat[rank]
                mat[rank] = [s * x + t * y for x, y in zip(rr, ri)]
                mat[i] = [-pb * x + pa * y for x, y in zip(rr, ri)]
        piv = h[rank][c]
        if piv == 0:
            continue
        if piv < 0:
            h[rank] = [-x for x in h[rank]]
            u[rank] = [-x for x in u[rank]]
            piv = -piv
        for i in range(rank):
            q = h[i][c] // piv
            if q:
                h[i] = [x - q * y for x, y in zip(h[i], h[rank])]
                u[i] = [x - q * y for x, y in zip(u[i], u[rank])]
        rank += 1
    return h, u, rank


def integer_kernel(m: Sequence[Sequence[int]], ncols: int) -> IntMatrix:
    """Basis (as rows) of the lattice ``{x in Z^ncols : m x = 0}``."""
    if not m:
        return identity(ncols)
    mt = transpose(m)
    _, u, rank = hermite_form(mt)
    basis = [row for row in u[rank:]]
    return size_reduce(basis)


def lattice_basis(generators: Sequence[Sequence[int]]) -> IntMatrix:
    """Basis (as rows) of the Z-span of the given integer row vectors."""
    if not generators:
        return []
    h, _, rank = hermite_form(generators)
    return [row for row in h[:rank]]


def size_reduce(basis: IntMatrix) -> IntMatrix:
    """Cheap LLL-style size reduction; keeps the lattice, shortens vectors."""
    b = [row[:] for row in basis]
    changed = True
    while changed:
        changed = False
        b.sort(key=lambda v: (sum(x * x for x in v), v))
        for i in range(len(b)):
            for j in range(len(b)):
                if i == j:
                    continue
                nj = sum(x * x for x in b[j])
                if nj == 0:
                    continue
                dot = sum(x * y for x, y in zip(b[i], b[j]))
                q = round(Fraction(dot, nj))
                if q:
                    cand = [x - q * y for x, y in zip(b[i], b[j])]
                    if sum(x * x for x in cand) < sum(x * x for x in b[i]):
                        b[i] = cand
                        changed = True
    # canonical sign: first nonzero entry positive
    out = []
    for v in b:
        lead = next((x for x in v if x), 0)
        out.append([-x for x in v] if lead < 0 else v)
    return out


def solve_integer(a: Sequence[Sequence[int]], rhs: Sequence[int]) -> list[int] | None:
    """One integer solution of ``a x = rhs`` or None if there is none."""
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    if ncols == 0:
        return [] if all(v == 0 for v in rhs) else None
    # U a^T = H, so a x = sum_k y_k H[k] for x = U^T y
    h, u, rank = hermite_form(transpose(a))
    resid = [int(v) for v in rhs]
    y = [0] * ncols
    for k in range(rank):
        c = next(j for j in range(nrows) if h[k][j] != 0)
        if any(resid[j] for j in range(c)):
            return None
        q, rem = divmod(resid[c], h[k][c])
        if rem:
            return None
        y[k] = q
        resid = [r - q * v for r, v in zip(resid, h[k])]
    if any(resid):
        return None
    return [sum(u[k][j] * y[k] for k in range(rank)) for j in range(ncols)]


def solve_left_unimodular(k_cols: IntMatrix, target: IntMatrix) -> IntMatrix:
    """Integer ``S`` with ``S @ K == T`` for a primitive integer basis ``K``.

    ``k_cols`` is K given column-wise as an n x k matrix whose columns span a
    saturated sublattice of Z^n; ``target`` is m x k. The completion of the
    columns of K to a basis of Z^n is implicit in the unimodular transform.
    """
    n = len(k_cols)
    k = len(k_cols[0]) if k_cols else 0
    h, u, rank = hermite_form(k_cols)
    if rank != k:
        raise ArithmeticError("basis columns are linearly dependent")
    top = [row[:k] for row in h[:k]]
    det = 1
    for i in range(k):
        det *= top[i][i]
    if abs(det) != 1:
        raise ArithmeticError("basis does not span a saturated sublattice")
    top_inv = _inverse_unitriangular(top)
    # S = T @ top^{-1} @ [I_k | 0] @ U
    t_inv = matmul(target, top_inv) if k else [[] for _ in target]
    return [[sum(row[i] * u[i][j] for i in range(k)) for j in range(n)] for row in t_inv]


def _inverse_unitriangular(top: IntMatrix) -> IntMatrix:
    k = len(top)
    inv = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    # back substitution on the upper triangular matrix with unit pivots
    for col in range(k):
        for i in range(k - 1, -1, -1):
            s = inv[i][col] - sum(top[i][j] * inv[j][col] for j in range(i + 1, k))
            inv[i][col] = s / top[i][i]
    out = [[int(v) for v in row] for row in inv]
    assert all(Fraction(out[i][j]) == inv[i][j] for i in range(k) for j in range(k))
    return out


def in_lattice(basis: IntMatrix, v: Sequence[int]) -> bool:
    """Exact membership of ``v`` in the Z-span of the rows of ``basis``."""
    if not basis:
        return all(x == 0 for x in v)
    return solve_integer(transpose(basis), list(v)) is not None
