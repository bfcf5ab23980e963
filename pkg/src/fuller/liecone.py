"""Lie-bracket machinery for singular arcs of multi-input affine systems.

Bracket convention: ``[a, b] = (Db) a - (Da) b``.  With it, along an extremal,
``d/dt <p, h> = <p, [f, h] + sum_i u_i [g_i, h]>`` with no sign correction.

Polynomials in the adjoint live in the space ``(z, p)`` of ``2N`` variables:
indices ``0..N-1`` are ``z`` and ``N..2N-1`` are ``p`` (``p[0] = -lambda``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polyalg import Poly, PolyVec, as_rational
from .system import AugmentedSystem

TAU_EIG = 1e-9
TAU_RANK = 1e-9
MAX_DEPTH = 12


class LadderError(ValueError):
    """Some switching functions reach the control at a level where others do not."""

    def __init__(self, level: int, word: str, message: str):
        super().__init__(message)
        self.level = level
        self.word = word


class GLCInapplicable(ValueError):
    pass


def lie_bracket(a: PolyVec, b: PolyVec) -> PolyVec:
    if a.dim != b.dim or a.nvars != b.nvars:
        raise ValueError(f"bracket of fields with shapes ({a.dim},{a.nvars}) and ({b.dim},{b.nvars})")
    return b.directional(a) - a.directional(b)


@dataclass(frozen=True)
class BracketField:
    word: str
    field: PolyVec

    def is_zero(self) -> bool:
        return self.field.is_zero()


def _ad_word(level: int, i: int) -> str:
    if level == 0:
        return f"g_{i + 1}"
    if level == 1:
        return f"ad_f g_{i + 1}"
    return f"ad_f^{level} g_{i + 1}"


def pairing(field: PolyVec) -> Poly:
    """``<p, field(z)>`` as a polynomial on the ``(z, p)`` space."""
    N = field.dim
    ident = list(range(N))
    acc = Poly.zero(2 * N)
    for k, comp in enumerate(field):
        if not comp.is_zero():
            acc = acc + Poly.var(N + k, 2 * N) * comp.embed(2 * N, ident)
    return acc


def ad_ladder(aug: AugmentedSystem, max_depth: int = MAX_DEPTH) -> list[BracketField]:
    """``ad_f^l g_i`` for ``l = 0..max_depth`` (ordered by level, then input)."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    out = []
    level = list(aug.gbar)
    for l in range(max_depth + 1):
        out.extend(BracketField(_ad_word(l, i), h) for i, h in enumerate(level))
        if l < max_depth:
            level = [lie_bracket(aug.fbar, h) for h in level]
    return out


@dataclass(frozen=True)
class LadderReport:
    N: int
    m: int
    k: int | None
    ladder: tuple[tuple[BracketField, ...], ...]
    A_fields: tuple[BracketField, ...] = ()
    B_fields: tuple[tuple[BracketField, ...], ...] = ()
    status: str = "ok"
    lower_B_identically_zero: bool = True
    note: str = ""

    @property
    def q(self) -> int | None:
        if self.k is None or self.k % 2:
            return None
        return self.k // 2

    @property
    def odd_order(self) -> bool:
        """Order-parity violation: u first appears at an odd derivative."""
        return self.k is not None and self.k % 2 == 1

    def A_polys(self) -> list[Poly]:
        return [pairing(b.field) for b in self.A_fields]

    def B_polys(self) -> list[list[Poly]]:
        return [[pairing(b.field) for b in row] for row in self.B_fields]

    def B_normal(self, lam=1) -> list[list[Poly]]:
        """B with ``p[0] = -lam`` substituted."""
        sub = {self.N: -as_rational(lam)}
        return [[e.subs(sub) for e in row] for row in self.B_polys()]

    def A_normal(self, lam=1) -> list[Poly]:
        sub = {self.N: -as_rational(lam)}
        return [e.subs(sub) for e in self.A_polys()]

    def B_constant(self, lam=1) -> list[list[Fraction]] | None:
        """The exact B matrix if it is constant for this lambda, else None."""
        mat = self.B_normal(lam)
        if all(e.is_constant() for row in mat for e in row):
            return [[e.constant_term for e in row] for row in mat]
        return None

    def B_at(self, z, p) -> np.ndarray:
        zp = list(np.asarray(z, dtype=float)) + list(np.asarray(p, dtype=float))
        return np.array([[e.eval(zp) for e in row] for row in self.B_polys()], dtype=float)

    def A_at(self, z, p) -> np.ndarray:
        zp = list(np.asarray(z, dtype=float)) + list(np.asarray(p, dtype=float))
        return np.array([e.eval(zp) for e in self.A_polys()], dtype=float)

    def B_identically_singular(self) -> bool:
        if not self.B_fields:
            return False
        return _poly_det(self.B_polys(), 2 * self.N).is_zero()

    def all_fields(self) -> list[BracketField]:
        return [b for level in self.ladder for b in level]


def ab_matrices(aug: AugmentedSystem, max_depth: int = MAX_DEPTH) -> LadderReport:
    """Climb the ad-ladder until some ``[g_j, ad_f^{k-1} g_i]`` is nonzero."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    m, N = aug.m, aug.N
    levels: list[tuple[BracketField, ...]] = []
    current = [BracketField(_ad_word(0, i), h) for i, h in enumerate(aug.gbar)]
    for l in range(max_depth):
        levels.append(tuple(current))
        B = tuple(
            tuple(
                BracketField(f"[g_{j + 1}, {current[i].word}]", lie_bracket(aug.gbar[j], current[i].field))
                for j in range(m)
            )
            for i in range(m)
        )
        nonzero_rows = [any(not b.is_zero() for b in row) for row in B]
        if any(nonzero_rows):
            k = l + 1
            if not all(nonzero_rows):
                i = nonzero_rows.index(False)
                hit = next(b for row in B for b in row if not b.is_zero())
                raise LadderError(
                    k,
                    hit.word,
                    f"mixed ladder at derivative {k}: {hit.word} != 0 but row {i + 1} of B_{k} "
                    f"is identically zero",
                )
            A = tuple(
                BracketField(_ad_word(k, i), lie_bracket(aug.fbar, b.field)) for i, b in enumerate(current)
            )
            levels.append(A)
            note = "order parity violated: k is odd" if k % 2 else ""
            return LadderReport(N=N, m=m, k=k, ladder=tuple(levels), A_fields=A, B_fields=B, note=note)
        nxt = [BracketField(_ad_word(l + 1, i), lie_bracket(aug.fbar, b.field)) for i, b in enumerate(current)]
        current = nxt
        if all(b.is_zero() for b in current):
            levels.append(tuple(current))
            return LadderReport(
                N=N, m=m, k=None, ladder=tuple(levels), status="order-undetected",
                note=f"ad_f^{l + 1} g_i vanish identically; u never appears",
            )
    levels.append(tuple(current))
    return LadderReport(
        N=N, m=m, k=None, ladder=tuple(levels), status="order-undetected",
        note=f"order undetected up to depth {max_depth}",
    )


def glc_verdict(B: np.ndarray, q: int, tol: float = TAU_EIG) -> str:
    """Classify ``(-1)^q B`` (symmetric part): strict / semidefinite / violated."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    S = (-1) ** q * 0.5 * (B + B.T)
    eig = np.linalg.eigvalsh(S) if S.size else np.zeros(0)
    if eig.size and eig.max() < -tol:
        return "strict"
    if not eig.size or eig.max() <= tol:
        return "semidefinite"
    return "violated"


def glc_check(report: LadderReport, z, p, tol: float = TAU_EIG) -> str:
    if report.q is None:
        raise GLCInapplicable(f"GLC needs an even k (got k={report.k})")
    return glc_verdict(report.B_at(z, p), report.q, tol)


def delta_basis(aug: AugmentedSystem, report: LadderReport) -> list[BracketField]:
    """``f`` and ``ad_f^l g_i`` for ``l < k`` (all computed nonzero levels if k is unknown)."""
    basis = [BracketField("f", aug.fbar)]
    if report.k is not None:
        levels = report.ladder[: report.k]
    else:
        levels = report.ladder
    for level in levels:
        basis.extend(b for b in level if report.k is not None or not b.is_zero())
    return basis


# ---------------------------------------------------------------------------
# First Pontryagin cone


@dataclass(frozen=True)
class DeltaReport:
    N: int
    basis_fields: tuple[BracketField, ...]
    sample_points: tuple[tuple, ...]
    ranks: tuple[int, ...]
    annihilators: tuple[np.ndarray | None, ...]
    annihilators_exact: tuple[tuple[Fraction, ...] | None, ...]
    tol: float = TAU_RANK
    membership_queries: dict = field(default_factory=dict)
    decidable: str | None = None

    @property
    def rank(self) -> int:
        return max(self.ranks)

    @property
    def annihilator(self) -> np.ndarray | None:
        if self.rank != self.N - 1:
            return None
        return next((a for a in self.annihilators if a is not None), None)

    @property
    def no_singular_arc(self) -> bool:
        """Full-dimensional cone forces p = 0, which the maximum principle forbids."""
        return self.rank == self.N


def _field_values(basis: Sequence[BracketField], point) -> np.ndarray:
    pt = [float(x) for x in point]
    return np.array([[float(c.eval(pt)) for c in b.field] for b in basis], dtype=float).T


def _exact_nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : rows @ x = 0}`` by exact reduced row echelon form."""
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        lead = m[r][c]
        m[r] = [v / lead for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                fac = m[i][c]
                m[i] = [a - fac * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    out = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -m[i][fc]
        out.append(vec)
    return out


def _normalize(a):
    """Scale so that ``a[0] = -1`` when possible, else unit norm with a positive lead."""
    if isinstance(a[0], Fraction):
        if a[0]:
            return tuple(-v / a[0] for v in a)
        lead = next(v for v in a if v)
        return tuple(v / lead for v in a)
    a = np.asarray(a, dtype=float)
    if abs(a[0]) > TAU_RANK * np.abs(a).max():
        return -a / a[0]
    a = a / np.linalg.norm(a)
    lead = a[np.argmax(np.abs(a) > TAU_RANK)]
    return a * np.sign(lead)


def delta_rank(basis: Sequence[BracketField], points: Sequence[Sequence], tol: float = TAU_RANK) -> DeltaReport:
    if not points:
        raise ValueError("delta_rank needs at least one sample point")
    N = basis[0].field.dim
    ranks, annis, exact = [], [], []
    for pt in points:
        if len(pt) != N:
            raise ValueError(f"sample point has length {len(pt)}, expected {N}")
        V = _field_values(basis, pt)
        U, s, _ = np.linalg.svd(V, full_matrices=True)
        smax = s.max() if s.size else 0.0
        rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
        ranks.append(rank)
        if rank == N - 1:
            annis.append(_normalize(U[:, N - 1]))
            ex = None
            if all(isinstance(x, (int, Fraction)) for x in pt):
                rows = [[as_rational(c.eval(list(pt))) for c in b.field] for b in basis]
                null = _exact_nullspace(rows, N)
                if len(null) == 1:
                    ex = _normalize(null[0])
            exact.append(ex)
        else:
            annis.append(None)
            exact.append(None)
    return DeltaReport(
        N=N, basis_fields=tuple(basis), sample_points=tuple(tuple(p) for p in points),
        ranks=tuple(ranks), annihilators=tuple(annis), annihilators_exact=tuple(exact), tol=tol,
    )


def _as_field(obj) -> PolyVec:
    return obj.field if isinstance(obj, BracketField) else obj


def delta_membership(fld, delta: DeltaReport, extra: Sequence[PolyVec] = ()) -> bool:
    """Whether the field lies in span(Delta [+ extra]) at every sample point."""
    vec = _as_field(fld)
    basis = list(delta.basis_fields) + [BracketField("extra", e) for e in extra]
    for pt in delta.sample_points:
        V = _field_values(basis, pt)
        w = np.array([float(c.eval([float(x) for x in pt])) for c in vec], dtype=float)
        if V.size:
            coef, *_ = np.linalg.lstsq(V, w, rcond=None)
            resid = np.linalg.norm(V @ coef - w)
        else:
            resid = np.linalg.norm(w)
        if resid > delta.tol * np.linalg.norm(w):
            return False
    return True


def refined_nonorthogonal(h, delta: DeltaReport, direction) -> bool:
    """If ``<p, direction> != 0`` is known, any ``h`` in span{direction, Delta} \\ Delta
    pairs nonzero with ``p``."""
    return delta_membership(h, delta, extra=[_as_field(direction)]) and not delta_membership(h, delta)


def _rationalize(a: np.ndarray, max_den: int = 10**6) -> tuple[Fraction, ...]:
    return tuple(Fraction(float(v)).limit_denominator(max_den) for v in a)


def classify_B_entries(report: LadderReport, delta: DeltaReport) -> list[list[tuple]]:
    """Tag each B entry as ("zero",), ("const", value) or ("unknown",)."""
    annis = []
    if delta.rank == delta.N - 1:
        for a, ex in zip(delta.annihilators, delta.annihilators_exact):
            if ex is not None:
                annis.append(ex)
            elif a is not None:
                annis.append(_rationalize(a))
    tags = []
    for row in report.B_fields:
        out = []
        for b in row:
            if delta_membership(b, delta):
                out.append(("zero",))
                continue
            consts = set()
            for a in annis:
                entry = sum((ai * c for ai, c in zip(a, b.field) if ai), Poly.zero(b.field.nvars))
                consts.add(entry.constant_term if entry.is_constant() else None)
            if len(consts) == 1 and None not in consts:
                out.append(("const", consts.pop()))
            else:
                out.append(("unknown",))
        tags.append(out)
    return tags


def _poly_det(mat: Sequence[Sequence[Poly]], nvars: int) -> Poly:
    n = len(mat)
    if n == 0:
        return Poly.const(1, nvars)
    if n == 1:
        return mat[0][0]
    acc = Poly.zero(nvars)
    for j in range(n):
        if mat[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in mat[1:]]
        term = mat[0][j] * _poly_det(minor, nvars)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def tagged_determinant(tags: Sequence[Sequence[tuple]]) -> Poly:
    """Determinant with every unknown entry replaced by its own free variable."""
    unknowns = sum(t[0] == "unknown" for row in tags for t in row)
    mat, idx = [], 0
    for row in tags:
        out = []
        for t in row:
            if t[0] == "zero":
                out.append(Poly.zero(unknowns))
            elif t[0] == "const":
                out.append(Poly.const(t[1], unknowns))
            else:
                out.append(Poly.var(idx, unknowns))
                idx += 1
        mat.append(out)
    return _poly_det(mat, unknowns)


def delta_inverse_decidable(report: LadderReport, delta: DeltaReport) -> str:
    if not report.B_fields:
        return "undecidable"
    d = tagged_determinant(classify_B_entries(report, delta))
    if d.is_zero():
        return "singular"
    if d.is_constant():
        return "invertible"
    return "undecidable"


def singular_necessary(aug: AugmentedSystem, z, p, tol: float = 1e-9) -> bool:
    """Necessary for a singular arc: <p, f> = 0 and every switching function vanishes."""
    p = np.asarray(p, dtype=float)
    if abs(p @ aug.f_at(z)) > tol:
        return False
    return bool(np.all(np.abs(aug.g_at(z) @ p) <= tol))


@dataclass(frozen=True)
class Certificate:
    verdict: str
    failing: str | None
    ladder: LadderReport
    delta: DeltaReport


def default_points(aug: AugmentedSystem) -> list[tuple[int, ...]]:
    """The candidate singular point: the origin of the augmented space."""
    return [(0,) * aug.N]


def fuller_certificate(
    aug: AugmentedSystem,
    points: Sequence[Sequence] | None = None,
    max_depth: int = MAX_DEPTH,
    tol: float = TAU_RANK,
) -> Certificate:
    ladder = ab_matrices(aug, max_depth)
    basis = delta_basis(aug, ladder)
    delta = delta_rank(basis, points or default_points(aug), tol)
    if delta.no_singular_arc:
        return Certificate("no-singular-arc", None, ladder, delta)
    if ladder.k is None:
        return Certificate("inconclusive", "order-undetected", ladder, delta)
    if ladder.odd_order:
        return Certificate("inconclusive", "odd-k", ladder, delta)
    if ladder.q % 2:
        return Certificate("inconclusive", "q-odd", ladder, delta)
    queries = {b.word: delta_membership(b, delta) for b in ladder.A_fields}
    delta = replace(delta, membership_queries=queries)
    if not all(queries.values()):
        bad = next(w for w, ok in queries.items() if not ok)
        return Certificate("inconclusive", f"{bad} not in Delta", ladder, delta)
    decidable = delta_inverse_decidable(ladder, delta)
    delta = replace(delta, decidable=decidable)
    if decidable != "invertible":
        return Certificate("inconclusive", f"B {decidable}", ladder, delta)
    return Certificate("fuller", None, ladder, delta)


# ---------------------------------------------------------------------------
# Junction parity


@dataclass(frozen=True)
class JunctionVerdict:
    q: int
    r: int | None
    parity_ok: bool | None
    corollary1: bool
    corollary2: bool
    conclusion: str


def parity_oracle(
    q: int,
    r: int | None = None,
    A=None,
    B=None,
    K: float = 1.0,
    A_identically_zero: bool = False,
    tol: float = 1e-12,
) -> JunctionVerdict:
    """Junction conclusions for order ``q`` and first discontinuous control derivative ``r``.

    An analytic junction needs ``q + r`` odd.  For even ``q`` the junction is
    non-analytic when ``A + K B v != 0`` for every sign vector ``v``, or when
    ``A`` vanishes identically.
    """
    if q < 1:
        raise ValueError("q must be a positive integer")
    parity_ok = None if r is None else (q + r) % 2 == 1
    even = q % 2 == 0
    cor2 = even and A_identically_zero
    cor1 = False
    if even and B is not None:
        Bm = np.atleast_2d(np.asarray(B, dtype=float))
        Av = np.zeros(Bm.shape[0]) if A is None or A_identically_zero else np.asarray(A, dtype=float)
        cor1 = all(
            np.linalg.norm(Av + K * Bm @ np.array(v)) > tol
            for v in itertools.product((-1.0, 1.0), repeat=Bm.shape[1])
        )
    forced = cor1 or cor2 or parity_ok is False
    return JunctionVerdict(
        q=q, r=r, parity_ok=parity_ok, corollary1=cor1, corollary2=cor2,
        conclusion="non-analytic-forced" if forced else "analytic-possible",
    )


# ---------------------------------------------------------------------------
# Derivative of <p, h> along the extremal flow


def lie_derivative_identity(aug: AugmentedSystem, h: PolyVec) -> tuple[Poly, Poly]:
    """Both sides of ``d/dt <p,h> = <p, [f,h] + sum u_i [g_i,h]>`` on the ``(z, p, u)`` space.

    The left side is the chain-rule time derivative using the state and adjoint
    equations; the right side uses brackets.  They agree identically.
    """
    N, m = aug.N, aug.m
    nv = 2 * N + m
    zmap = list(range(N))
    u = [Poly.var(2 * N + i, nv) for i in range(m)]
    p = [Poly.var(N + k, nv) for k in range(N)]

    def lift(poly: Poly) -> Poly:
        return poly.embed(nv, zmap)

    fields = [aug.fbar] + list(aug.gbar)
    weights = [Poly.const(1, nv)] + u
    zdot = [sum((w * lift(fl[j]) for w, fl in zip(weights, fields)), Poly.zero(nv)) for j in range(N)]
    pdot = [
        -sum((p[k] * w * lift(fl[k].partial(j)) for w, fl in zip(weights, fields) for k in range(N)),
             Poly.zero(nv))
        for j in range(N)
    ]
    hl = [lift(c) for c in h]
    pairing_h = sum((pk * hk for pk, hk in zip(p, hl)), Poly.zero(nv))
    lhs = Poly.zero(nv)
    for j in range(N):
        lhs = lhs + pairing_h.partial(j) * zdot[j] + pairing_h.partial(N + j) * pdot[j]
    rhs_field = lie_bracket(aug.fbar, h)
    rhs = sum((p[k] * lift(rhs_field[k]) for k in range(N)), Poly.zero(nv))
    for ui, gi in zip(u, aug.gbar):
        br = lie_bracket(gi, h)
        rhs = rhs + ui * sum((p[k] * lift(br[k]) for k in range(N)), Poly.zero(nv))
    return lhs, rhs
