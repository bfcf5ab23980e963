"""Built-in problem families: classic and extended Fuller, the Hamiltonian
family with quadratic kinetic energy, and the time-optimal double integrator."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .polyalg import Poly, PolyVec, as_rational
from .system import AffineSystem

Matrix = tuple[tuple[Fraction, ...], ...]


class ContractError(ValueError):
    """A family hypothesis is violated; the message names which one."""


def as_matrix(rows, name: str = "matrix") -> Matrix:
    try:
        mat = tuple(tuple(as_rational(v) for v in row) for row in rows)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ContractError(f"{name}: entries must be rationals ({exc})") from exc
    if not mat or any(len(r) != len(mat) for r in mat):
        raise ContractError(f"{name}: must be a non-empty square matrix")
    return mat


def load_matrix(path: str | Path, name: str = "matrix") -> Matrix:
    return as_matrix(json.loads(Path(path).read_text()), name)


def identity(n: int) -> Matrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0])))
        for i in range(len(a))
    )


def det(a: Sequence[Sequence]) -> Fraction:
    """Exact determinant by fraction Gaussian elimination."""
    m = [[Fraction(v) for v in row] for row in a]
    n = len(m)
    out = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            out = -out
        out *= m[c][c]
        for r in range(c + 1, n):
            factor = m[r][c] / m[c][c]
            if factor:
                for k in range(c, n):
                    m[r][k] -= factor * m[c][k]
    return out


def is_symmetric(a: Matrix) -> bool:
    return all(a[i][j] == a[j][i] for i in range(len(a)) for j in range(i))


def is_positive_definite(a: Matrix) -> bool:
    """Sylvester's criterion, exact; assumes ``a`` symmetric."""
    return all(det([row[:k] for row in a[:k]]) > 0 for k in range(1, len(a) + 1))


def _require_spd(a: Matrix, name: str) -> None:
    if not is_symmetric(a):
        raise ContractError(f"{name} must be symmetric")
    if not is_positive_definite(a):
        raise ContractError(f"{name} must be positive definite")


def _require_sym_invertible(a: Matrix, name: str) -> None:
    if not is_symmetric(a):
        raise ContractError(f"{name} must be symmetric")
    if det(a) == 0:
        raise ContractError(f"{name} must be invertible")


def _linear(mat: Matrix, cols: Sequence[int], nvars: int) -> list[Poly]:
    """Components of ``mat @ (variables at cols)``."""
    xs = [Poly.var(c, nvars) for c in cols]
    return [sum((row[j] * xs[j] for j in range(len(xs))), Poly.zero(nvars)) for row in mat]


def fuller_classic() -> AffineSystem:
    """min int x^2/2,  x' = v, v' = u, |u| <= 1."""
    sys = fuller_multi(identity(1), identity(1))
    return _renamed(sys, "fuller-classic")


def fuller_multi(M1, M2) -> AffineSystem:
    """min int |x|^2/2,  x' = M1 v, v' = M2 u, |u_i| <= 1; state (x, v)."""
    M1 = as_matrix(M1, "M1")
    M2 = as_matrix(M2, "M2")
    if len(M1) != len(M2):
        raise ContractError("M1 and M2 must have the same size")
    _require_spd(M1, "M1")
    _require_sym_invertible(M2, "M2")
    k = len(M1)
    nv = 2 * k
    xs = range(k)
    vs = range(k, nv)
    x = [Poly.var(i, nv) for i in xs]
    f0 = sum((xi * xi for xi in x), Poly.zero(nv)) * Fraction(1, 2)
    f = PolyVec(_linear(M1, vs, nv) + [Poly.zero(nv)] * k)
    g = tuple(
        PolyVec([Poly.zero(nv)] * k + [Poly.const(M2[r][i], nv) for r in range(k)]) for i in range(k)
    )
    g0 = tuple(Poly.zero(nv) for _ in range(k))
    return AffineSystem(n=nv, m=k, f=f, g=g, f0=f0, g0=g0, K=Poly.const(1, 1), name="fuller-multi")


def hamiltonian_family(T, M, Q: Poly, c: Poly) -> AffineSystem:
    """min int c(x),  x' = T v, v' = P(x) + M u with P = -grad Q; state (x, v).

    ``Q`` and ``c`` are polynomials in the ``n`` position variables.
    """
    T = as_matrix(T, "T")
    M = as_matrix(M, "M")
    k = len(T)
    if len(M) != k:
        raise ContractError("T and M must have the same size")
    if Q.nvars != k or c.nvars != k:
        raise ContractError(f"Q and c must be polynomials in {k} position variables")
    _require_spd(T, "T")
    _require_sym_invertible(M, "M")
    origin = [0] * k
    P = [-q for q in Q.gradient()]
    if any(pi.eval(origin) != 0 for pi in P):
        raise ContractError("P(0) != 0: the force P = -grad Q must vanish at the origin")
    if c.eval(origin) != 0:
        raise ContractError(
            "c(0) != 0: fully singular arcs excluded; with c(0) != 0 the cone has "
            "full dimension and no singular arc can be optimal"
        )
    grad = c.gradient()
    if any(gc.eval(origin) != 0 for gc in grad):
        raise ContractError("dc/dx(0) != 0: the running cost must be stationary at the origin")
    hess = tuple(tuple(gc.partial(j).eval(origin) for j in range(k)) for gc in grad)
    if not is_positive_definite(hess):
        raise ContractError("d2c/dx2(0) not positive definite: the running cost needs a strict minimum at the origin")
    nv = 2 * k
    xmap = list(range(k))
    f0 = c.embed(nv, xmap)
    f = PolyVec(_linear(T, range(k, nv), nv) + [pi.embed(nv, xmap) for pi in P])
    g = tuple(
        PolyVec([Poly.zero(nv)] * k + [Poly.const(M[r][i], nv) for r in range(k)]) for i in range(k)
    )
    g0 = tuple(Poly.zero(nv) for _ in range(k))
    return AffineSystem(n=nv, m=k, f=f, g=g, f0=f0, g0=g0, K=Poly.const(1, 1), name="hamiltonian")


def quadratic_form(C, scale=Fraction(1, 2)) -> Poly:
    """``scale * x^T C x`` as a polynomial in ``len(C)`` variables."""
    C = as_matrix(C, "C")
    k = len(C)
    x = Poly.variables(k)
    acc = Poly.zero(k)
    for i in range(k):
        for j in range(k):
            if C[i][j]:
                acc = acc + C[i][j] * x[i] * x[j]
    return acc * scale


def time_optimal_di() -> AffineSystem:
    """min int 1 dt,  x' = v, v' = u, |u| <= 1."""
    nv = 2
    x, v = Poly.variables(nv)
    f = PolyVec([v, Poly.zero(nv)])
    g = (PolyVec([Poly.zero(nv), Poly.const(1, nv)]),)
    return AffineSystem(
        n=nv, m=1, f=f, g=g, f0=Poly.const(1, nv), g0=(Poly.zero(nv),), K=Poly.const(1, 1),
        name="time-optimal-di",
    )


def _renamed(sys: AffineSystem, name: str) -> AffineSystem:
    return AffineSystem(n=sys.n, m=sys.m, f=sys.f, g=sys.g, f0=sys.f0, g0=sys.g0, K=sys.K, name=name)
