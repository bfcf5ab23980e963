import json
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fuller import problems
from fuller.liecone import lie_bracket
from fuller.polyalg import Poly, PolyVec
from fuller.system import (
    AffineSystem,
    ProblemError,
    adjoint,
    augment,
    extremal_rhs,
    hamiltonian_eval,
    switching_vector,
)

from conftest import random_poly
from flowcheck import flow_derivative

BUILTINS = {
    "fuller-classic": problems.fuller_classic,
    "fuller-multi": lambda: problems.fuller_multi([[2, 1], [1, 2]], [[1, 0], [0, 3]]),
    "hamiltonian": lambda: problems.hamiltonian_family(
        [[1, 0], [0, 2]], [[1, 1], [1, 3]],
        Poly.var(0, 2) ** 4 / 4, problems.quadratic_form([[2, 1], [1, 3]]),
    ),
    "time-optimal-di": problems.time_optimal_di,
}


def test_augment_classic_fuller():
    aug = augment(problems.fuller_classic())
    x0, x, v = Poly.variables(3)
    assert aug.N == 3
    assert aug.fbar == PolyVec([x * x / 2, v, Poly.zero(3)])
    assert aug.gbar == (PolyVec([Poly.zero(3), Poly.zero(3), Poly.const(1, 3)]),)


def test_augment_zero_cost():
    x, v = Poly.variables(2)
    sys = AffineSystem(n=2, m=1, f=PolyVec([v, -x]), g=(PolyVec([Poly.zero(2), x]),),
                       f0=Poly.zero(2), g0=(Poly.zero(2),))
    aug = augment(sys)
    assert aug.fbar[0].is_zero() and aug.gbar[0][0].is_zero()
    assert aug.fbar[1] == Poly.var(2, 3) and aug.gbar[0][2] == Poly.var(1, 3)


def test_fuller_multi_scalar_is_classic():
    a = augment(problems.fuller_multi([[1]], [[1]]))
    b = augment(problems.fuller_classic())
    assert a.fbar == b.fbar and a.gbar == b.gbar


def test_hamiltonian_classic():
    aug = augment(problems.fuller_classic())
    z, p, u = [0.0, 0.7, -0.4], [-1.0, 0.3, 1.9], [1.0]
    assert hamiltonian_eval(aug, z, p, u) == pytest.approx(-0.7**2 / 2 + 0.3 * -0.4 + 1.9)
    assert hamiltonian_eval(aug, z, [0, 0, 0], u) == 0
    assert hamiltonian_eval(augment(problems.time_optimal_di()), [0, 0, 0], [0, 1, 1], [0]) == 0


def test_extremal_rhs_classic_point():
    aug = augment(problems.fuller_classic())
    dz, dp = extremal_rhs(aug, [0, 1, 0], [-1, 0, 1], [1])
    np.testing.assert_array_equal(dz, [0.5, 0, 1])
    np.testing.assert_array_equal(dp, [0, 1, 0])
    _, dp0 = extremal_rhs(aug, [0, 1, 0], [0, 0, 0], [0])
    np.testing.assert_array_equal(dp0, 0)


def test_extremal_rhs_fuller_multi():
    M1 = np.array([[2, 1], [1, 2]], float)
    M2 = np.array([[1, 0], [0, 3]], float)
    aug = augment(problems.fuller_multi(M1.astype(int).tolist(), M2.astype(int).tolist()))
    rng = np.random.default_rng(3)
    x, vv, p1, p2, u = (rng.normal(size=2) for _ in range(5))
    dz, dp = extremal_rhs(aug, np.r_[0, x, vv], np.r_[-1, p1, p2], u)
    np.testing.assert_allclose(dz, np.r_[x @ x / 2, M1 @ vv, M2 @ u])
    np.testing.assert_allclose(dp, np.r_[0, x, -M1 @ p1])
    np.testing.assert_allclose(switching_vector(aug, np.r_[0, x, vv], np.r_[-1, p1, p2]), M2 @ p2)


def test_switching_vector_examples():
    aug = augment(problems.fuller_classic())
    np.testing.assert_array_equal(switching_vector(aug, [0, 1, 1], [-1, 3, 7]), [7])
    np.testing.assert_array_equal(switching_vector(aug, [0, 1, 1], [0, 0, 0]), [0])


def test_dimension_mismatch():
    aug = augment(problems.fuller_classic())
    with pytest.raises(ValueError):
        hamiltonian_eval(aug, [0, 1], [0, 0, 0], [1])
    with pytest.raises(ValueError):
        extremal_rhs(aug, [0, 1, 0], [0, 0, 0], [1, 1])


def test_adjoint_convention():
    np.testing.assert_array_equal(adjoint([2, 3], lam=1), [-1, 2, 3])


def test_problem_json_round_trip(tmp_path):
    sys = problems.fuller_multi([[2, 1], [1, 2]], [[1, 0], [0, 3]])
    path = tmp_path / "p.json"
    path.write_text(json.dumps(sys.to_json()))
    back = AffineSystem.load(path)
    assert back.f == sys.f and back.g == sys.g and back.f0 == sys.f0 and back.K == sys.K


@pytest.mark.parametrize("data, field", [
    ({"n": 2, "m": 1, "f": ["x1"], "g": [["0", "1"]]}, "f"),
    ({"n": 2, "m": 1, "f": ["x1", "0"], "g": []}, "g"),
    ({"n": 2, "m": 1, "f": ["x1", "0"], "g": [["0", "x9"]]}, "g[0][1]"),
    ({"m": 1, "f": ["x1", "0"], "g": [["0", "1"]]}, "n"),
    ({"n": 2, "m": 1, "f": ["x1", "0"], "g": [["0", "1"]], "g0": []}, "g0"),
])
def test_malformed_problem_names_field(data, field):
    with pytest.raises(ProblemError, match=rf"^{re.escape(field)}"):
        AffineSystem.from_json(data)


def test_bound_must_be_positive():
    t = Poly.var(0, 1)
    sys = AffineSystem.from_json({"n": 1, "m": 1, "f": ["0"], "g": [["1"]], "K": "1 - x0"})
    with pytest.raises(ProblemError, match="K"):
        sys.check_bound(2.0)
    assert sys.K == 1 - t


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_cost_coordinate_never_evolves_adjoint(name):
    aug = augment(BUILTINS[name]())
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, dp = extremal_rhs(aug, rng.normal(size=aug.N), rng.normal(size=aug.N),
                             rng.uniform(-1, 1, aug.m))
        assert dp[0] == 0


@pytest.mark.parametrize("name", sorted(BUILTINS))
@given(seed=st.integers(0, 2**32 - 1))
def test_hamiltonian_is_pairing_with_velocity(name, seed):
    aug = augment(BUILTINS[name]())
    rng = np.random.default_rng(seed)
    z, p, u = rng.normal(size=aug.N), rng.normal(size=aug.N), rng.uniform(-1, 1, aug.m)
    dz, _ = extremal_rhs(aug, z, p, u)
    assert hamiltonian_eval(aug, z, p, u) == pytest.approx(float(p @ dz), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_pairing_derivative_matches_brackets(name):
    aug = augment(BUILTINS[name]())
    rng = np.random.default_rng(11)
    for _ in range(3):
        h = PolyVec([random_poly(rng, aug.N) for _ in range(aug.N)])
        z, p = rng.uniform(-1, 1, aug.N), rng.uniform(-1, 1, aug.N)
        u = rng.choice([-1.0, 1.0], aug.m)
        target = lie_bracket(aug.fbar, h)
        for ui, gi in zip(u, aug.gbar):
            target = target + lie_bracket(gi, h) * int(ui)
        expected = float(p @ np.array(target.eval(list(z)), dtype=float))
        fd = flow_derivative(aug, lambda zz, pp: float(pp @ np.array(h.eval(list(zz)), dtype=float)), z, p, u)
        assert fd == pytest.approx(expected, rel=1e-6, abs=1e-9)
