"""Affine optimal-control problems and their cost-augmented form.

The problem is

    minimize  int f0(x) + sum_i g0_i(x) u_i dt
    s.t.      x' = f(x) + sum_i g_i(x) u_i,   |u_i| <= K(t).

Augmenting with the running cost ``x_0`` gives fields ``fbar = (f0, f)`` and
``gbar_i = (g0_i, g_i)`` on ``z = (x_0, x)``.  The adjoint stores ``p[0] = -lambda``
so that ``H = <p, fbar> + sum_i <p, gbar_i> u_i`` holds with no extra sign.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .polyalg import Poly, PolyError, PolyVec, lambdify


class ProblemError(ValueError):
    """Malformed problem data; the message names the offending field."""


@dataclass(frozen=True)
class AffineSystem:
    n: int
    m: int
    f: PolyVec
    g: tuple[PolyVec, ...]
    f0: Poly
    g0: tuple[Poly, ...]
    K: Poly = field(default_factory=lambda: Poly.const(1, 1))
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "g0", tuple(self.g0))
        if self.n < 1:
            raise ProblemError("n: state dimension must be positive")
        if self.m < 0:
            raise ProblemError("m: input count must be non-negative")
        if self.f.dim != self.n or self.f.nvars != self.n:
            raise ProblemError(f"f: expected {self.n} components over {self.n} variables")
        if len(self.g) != self.m:
            raise ProblemError(f"g: expected {self.m} control fields, got {len(self.g)}")
        for i, gi in enumerate(self.g):
            if gi.dim != self.n or gi.nvars != self.n:
                raise ProblemError(f"g[{i}]: expected {self.n} components over {self.n} variables")
        if self.f0.nvars != self.n:
            raise ProblemError(f"f0: expected a polynomial over {self.n} variables")
        if len(self.g0) != self.m:
            raise ProblemError(f"g0: expected {self.m} cost terms, got {len(self.g0)}")
        for i, c in enumerate(self.g0):
            if c.nvars != self.n:
                raise ProblemError(f"g0[{i}]: expected a polynomial over {self.n} variables")
        if self.K.nvars != 1:
            raise ProblemError("K: control bound must be a polynomial in the single variable t")

    def check_bound(self, horizon: float, samples: int = 101) -> None:
        """Assert K(t) > 0 on sampled points of [0, horizon]."""
        for t in np.linspace(0.0, horizon, samples):
            if not self.K.eval([float(t)]) > 0:
                raise ProblemError(f"K: control bound not strictly positive at t={t:g}")

    # JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "f": [p.to_json() for p in self.f],
            "g": [[p.to_json() for p in gi] for gi in self.g],
            "f0": self.f0.to_json(),
            "g0": [p.to_json() for p in self.g0],
            "K": self.K.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict, name: str = "custom") -> "AffineSystem":
        for key in ("n", "m", "f", "g"):
            if key not in data:
                raise ProblemError(f"{key}: missing")
        try:
            n, m = int(data["n"]), int(data["m"])
        except (TypeError, ValueError) as exc:
            raise ProblemError("n/m: must be integers") from exc

        def poly(value, where, nvars=n):
            try:
                return Poly.from_json(value, nvars)
            except (PolyError, KeyError, TypeError, ValueError) as exc:
                raise ProblemError(f"{where}: {exc}") from exc

        def vec(values, where):
            if not isinstance(values, list) or len(values) != n:
                raise ProblemError(f"{where}: expected a list of {n} polynomials")
            return PolyVec(poly(v, f"{where}[{j}]") for j, v in enumerate(values))

        if not isinstance(data["g"], list) or len(data["g"]) != m:
            raise ProblemError(f"g: expected {m} control fields")
        f = vec(data["f"], "f")
        g = [vec(gi, f"g[{i}]") for i, gi in enumerate(data["g"])]
        f0 = poly(data.get("f0", []), "f0")
        g0_raw = data.get("g0", [[] for _ in range(m)])
        if not isinstance(g0_raw, list) or len(g0_raw) != m:
            raise ProblemError(f"g0: expected {m} cost terms")
        g0 = [poly(c, f"g0[{i}]") for i, c in enumerate(g0_raw)]
        K = poly(data.get("K", "1"), "K", nvars=1)
        return cls(n=n, m=m, f=f, g=tuple(g), f0=f0, g0=tuple(g0), K=K, name=name)

    @classmethod
    def load(cls, path: str | Path) -> "AffineSystem":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ProblemError(f"problem file {path}: invalid JSON ({exc})") from exc
        return cls.from_json(data, name=Path(path).stem)


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Cost-augmented system on ``z = (x_0, x)``; nothing depends on ``x_0``."""

    N: int
    m: int
    fbar: PolyVec
    gbar: tuple[PolyVec, ...]
    K: Poly
    source: AffineSystem | None = None

    @cached_property
    def _f_num(self):
        return lambdify(list(self.fbar), self.N)

    @cached_property
    def _g_num(self):
        polys = [p for gi in self.gbar for p in gi]
        fn = lambdify(polys, self.N) if polys else None
        N, m = self.N, self.m
        return lambda z: fn(z).reshape(m, N) if fn else np.zeros((0, N))

    @cached_property
    def _df_num(self):
        fn = lambdify([p for row in self.fbar.jacobian() for p in row], self.N)
        N = self.N
        return lambda z: fn(z).reshape(N, N)

    @cached_property
    def _dg_num(self):
        polys = [p for gi in self.gbar for row in gi.jacobian() for p in row]
        fn = lambdify(polys, self.N) if polys else None
        N, m = self.N, self.m
        return lambda z: fn(z).reshape(m, N, N) if fn else np.zeros((0, N, N))

    def f_at(self, z) -> np.ndarray:
        return self._f_num(np.asarray(z, dtype=float))

    def g_at(self, z) -> np.ndarray:
        """Control fields at ``z`` as an (m, N) array."""
        return self._g_num(np.asarray(z, dtype=float))

    def bound(self, t: float) -> float:
        return float(self.K.eval([float(t)]))

    def _check(self, z, p=None, u=None):
        if len(z) != self.N:
            raise ValueError(f"z has length {len(z)}, expected {self.N}")
        if p is not None and len(p) != self.N:
            raise ValueError(f"p has length {len(p)}, expected {self.N}")
        if u is not None and len(u) != self.m:
            raise ValueError(f"u has length {len(u)}, expected {self.m}")


def augment(sys: AffineSystem) -> AugmentedSystem:
    N = sys.n + 1
    shift = list(range(1, N))
    fbar = PolyVec([sys.f0.embed(N, shift)] + [p.embed(N, shift) for p in sys.f])
    gbar = tuple(
        PolyVec([c.embed(N, shift)] + [p.embed(N, shift) for p in gi])
        for c, gi in zip(sys.g0, sys.g)
    )
    return AugmentedSystem(N=N, m=sys.m, fbar=fbar, gbar=gbar, K=sys.K, source=sys)


def hamiltonian_eval(aug: AugmentedSystem, z, p, u) -> float:
    aug._check(z, p, u)
    p = np.asarray(p, dtype=float)
    return float(p @ aug.f_at(z) + (aug.g_at(z) @ p) @ np.asarray(u, dtype=float))


def extremal_rhs(aug: AugmentedSystem, z, p, u) -> tuple[np.ndarray, np.ndarray]:
    aug._check(z, p, u)
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    dz = aug.f_at(z) + u @ aug.g_at(z)
    jac = aug._df_num(z) + np.tensordot(u, aug._dg_num(z), axes=1)
    dp = -(p @ jac)
    return dz, dp


def switching_vector(aug: AugmentedSystem, z, p) -> np.ndarray:
    aug._check(z, p)
    return aug.g_at(z) @ np.asarray(p, dtype=float)


@dataclass(frozen=True)
class ExtremalPoint:
    t: float
    z: np.ndarray
    p: np.ndarray | None
    u: np.ndarray


def adjoint(p_state: Sequence[float], lam: float = 1.0) -> np.ndarray:
    """Full augmented adjoint ``(-lambda, p)``."""
    return np.concatenate([[-float(lam)], np.asarray(p_state, dtype=float)])
