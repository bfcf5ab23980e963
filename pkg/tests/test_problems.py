from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuller import problems
from fuller.liecone import ab_matrices, pairing
from fuller.polyalg import Poly
from fuller.problems import ContractError
from fuller.system import augment

M1 = [[2, 1], [1, 2]]
M2 = [[1, 0], [0, 3]]


def test_classic_shape():
    sys = problems.fuller_classic()
    assert (sys.n, sys.m, sys.name) == (2, 1, "fuller-classic")
    assert sys.f0 == Poly.var(0, 2) ** 2 / 2
    assert sys.K == 1


def test_multi_scalar_equals_classic():
    a, b = problems.fuller_multi([[1]], [[1]]), problems.fuller_classic()
    assert (a.f, a.g, a.f0, a.g0, a.K) == (b.f, b.g, b.f0, b.g0, b.K)


@pytest.mark.parametrize("m1, m2, msg", [
    ([[1, 2], [2, 1]], M2, "M1 must be positive definite"),
    ([[1, 1], [0, 1]], M2, "M1 must be symmetric"),
    (M1, [[1, 2], [2, 4]], "M2 must be invertible"),
    (M1, [[1, 2], [0, 1]], "M2 must be symmetric"),
    (M1, [[1]], "same size"),
    ([[1, 0]], M2, "square"),
])
def test_multi_contract(m1, m2, msg):
    with pytest.raises(ContractError, match=msg):
        problems.fuller_multi(m1, m2)


def _vars(N, k):
    allv = Poly.variables(2 * N)
    x = allv[1:1 + k]
    v = allv[1 + k:N]
    p1 = allv[N + 1:N + 1 + k]
    p2 = allv[N + 1 + k:]
    return x, v, p1, p2


def _apply(mat, vec, nvars):
    return [sum((Fraction(mat[i][j]) * vec[j] for j in range(len(vec))), Poly.zero(nvars)) for i in range(len(mat))]


def test_multi_ladder_closed_forms():
    k = 2
    aug = augment(problems.fuller_multi(M1, M2))
    N = aug.N
    rep = ab_matrices(aug)
    x, v, p1, p2 = _vars(N, k)
    M1M1 = problems.matmul(problems.as_matrix(M1), problems.as_matrix(M1))
    M2M1 = problems.matmul(problems.as_matrix(M2), problems.as_matrix(M1))
    M2M1M1 = problems.matmul(problems.as_matrix(M2), M1M1)
    expected = [
        _apply(M2, p2, 2 * N),
        [-e for e in _apply(M2M1, p1, 2 * N)],
        [-e for e in _apply(M2M1, x, 2 * N)],
        [-e for e in _apply(M2M1M1, v, 2 * N)],
    ]
    for level, exp in enumerate(expected):
        got = [pairing(b.field).subs({N: -1}) for b in rep.ladder[level]]
        assert got == exp, level


def test_hamiltonian_quadratic_B_formula():
    T, M, C = [[1, 0], [0, 2]], [[1, 1], [1, 3]], [[2, 1], [1, 3]]
    rep = ab_matrices(augment(problems.hamiltonian_family(T, M, Poly.zero(2), problems.quadratic_form(C))))
    chain = problems.as_matrix(M)
    for a in (T, C, T, M):
        chain = problems.matmul(chain, problems.as_matrix(a))
    assert rep.B_constant() == [[-e for e in row] for row in chain]


@pytest.mark.parametrize("T, M, Q, c, msg", [
    ([[1, 2], [2, 1]], [[1, 0], [0, 1]], "0", "x0^2 + x1^2", "T"),
    ([[1, 0], [0, 1]], [[1, 1], [1, 1]], "0", "x0^2 + x1^2", "M"),
    ([[1, 0], [0, 1]], [[1, 0], [0, 1]], "x0", "x0^2 + x1^2", "P\\(0\\)"),
    ([[1, 0], [0, 1]], [[1, 0], [0, 1]], "0", "1", "c\\(0\\).*fully singular arcs excluded"),
    ([[1, 0], [0, 1]], [[1, 0], [0, 1]], "0", "x0 + x0^2 + x1^2", "dc/dx"),
    ([[1, 0], [0, 1]], [[1, 0], [0, 1]], "0", "x0^2 - x1^2", "positive definite"),
])
def test_hamiltonian_contract(T, M, Q, c, msg):
    with pytest.raises(ContractError, match=msg):
        problems.hamiltonian_family(T, M, Poly.parse(Q, 2), Poly.parse(c, 2))


def test_hamiltonian_quartic_potential_accepted():
    sys = problems.hamiltonian_family([[1]], [[1]], Poly.var(0, 1) ** 4 / 4, problems.quadratic_form([[1]]))
    assert sys.f[1] == -Poly.var(0, 2) ** 3


def test_time_optimal_shape():
    sys = problems.time_optimal_di()
    assert sys.f0 == 1 and sys.g0[0].is_zero() and sys.K == 1


def test_exact_matrix_helpers():
    assert problems.det([[2, 1], [1, 2]]) == 3
    assert problems.det([[0, 1], [1, 0]]) == -1
    assert problems.is_positive_definite(problems.as_matrix([[2, -1], [-1, 2]]))
    assert not problems.is_positive_definite(problems.as_matrix([[1, 2], [2, 1]]))


def test_load_matrix(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('[["1/2", "0"], ["0", "3"]]')
    assert problems.load_matrix(path) == ((Fraction(1, 2), 0), (0, 3))
    path.write_text('[["a", "0"], ["0", "3"]]')
    with pytest.raises(ContractError):
        problems.load_matrix(path)


@st.composite
def spd(draw, n):
    L = [[Fraction(draw(st.integers(-3, 3)), draw(st.integers(1, 3))) if j < i else Fraction(0)
          for j in range(n)] for i in range(n)]
    for i in range(n):
        L[i][i] = Fraction(draw(st.integers(1, 4)))
    Lt = [list(r) for r in zip(*L)]
    return [list(r) for r in problems.matmul(L, Lt)]


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(spd(n), spd(n))))
def test_builtins_satisfy_own_contracts(pair):
    a, b = pair
    sys = problems.fuller_multi(a, b)
    sys.check_bound(5.0)
    rep = ab_matrices(augment(sys))
    A, B = problems.as_matrix(a), problems.as_matrix(b)
    expected = problems.matmul(problems.matmul(problems.matmul(B, A), A), B)
    assert rep.B_constant() == [[-e for e in row] for row in expected]
    assert np.all(np.isfinite(augment(sys).f_at(np.ones(sys.n + 1))))
