"""Exact sparse multivariate polynomials with rational coefficients.

Everything symbolic in the package is built on :class:`Poly` and
:class:`PolyVec`.  Coefficients are :class:`fractions.Fraction`, so a bracket
or a switching-function derivative is decided to be identically zero without
any tolerance.

Text format (round-trips exactly)::

    3/2 * x0^2 * x1 + -1 * x2 + 5

JSON format: ``[{"coeff": "3/2", "exps": [2, 1, 0]}, ...]``.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Exps = tuple[int, ...]


class PolyError(ValueError):
    pass


def as_rational(value) -> Fraction:
    """Coerce ints, Fractions, decimal/ratio strings and floats (exactly)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    if isinstance(value, np.integer):
        return Fraction(int(value))
    raise TypeError(f"cannot convert {value!r} to a rational")


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


def _grlex_key(exps: Exps):
    return (sum(exps), exps)


class Poly:
    """Immutable sparse polynomial in ``nvars`` variables ``x0 .. x{nvars-1}``."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], object] | None = None):
        if nvars < 0:
            raise PolyError("nvars must be non-negative")
        clean: dict[Exps, Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise PolyError(f"exponent vector {exps} does not have length {nvars}")
            if any(e < 0 for e in exps):
                raise PolyError(f"negative exponent in {exps}")
            c = as_rational(c)
            if c:
                c = clean.get(exps, 0) + c
                if c:
                    clean[exps] = c
                else:
                    clean.pop(exps, None)
        self.nvars = nvars
        self._terms = dict(sorted(clean.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True))
        self._hash = None

    @classmethod
    def _raw(cls, nvars: int, terms: dict[Exps, Fraction]) -> "Poly":
        # terms already validated and zero-free
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj._terms = dict(sorted(terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True))
        obj._hash = None
        return obj

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls._raw(nvars, {})

    @classmethod
    def const(cls, value, nvars: int) -> "Poly":
        c = as_rational(value)
        return cls._raw(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def var(cls, index: int, nvars: int) -> "Poly":
        if not 0 <= index < nvars:
            raise PolyError(f"variable index {index} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[index] = 1
        return cls._raw(nvars, {tuple(exps): Fraction(1)})

    @classmethod
    def variables(cls, nvars: int) -> list["Poly"]:
        return [cls.var(i, nvars) for i in range(nvars)]

    # inspection ---------------------------------------------------------

    @property
    def terms(self) -> dict[Exps, Fraction]:
        """Copy of the term map in graded-lex order (highest first)."""
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def depends_on(self, index: int) -> bool:
        return any(e[index] for e in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise PolyError(f"variable-count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Poly.const(other, self.nvars)

    def __add__(self, other) -> "Poly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for e, c in other._terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Poly._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "Poly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            try:
                c = as_rational(other)
            except TypeError:
                return NotImplemented
            if not c:
                return Poly.zero(self.nvars)
            return Poly._raw(self.nvars, {e: a * c for e, a in self._terms.items()})
        other = self._coerce(other)
        out: dict[Exps, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly._raw(self.nvars, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Poly":
        c = as_rational(other)
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return self * (1 / c)

    def __pow__(self, k: int) -> "Poly":
        if not isinstance(k, int) or k < 0:
            raise PolyError("only non-negative integer powers are supported")
        result = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self._terms == other._terms
        try:
            return self == Poly.const(other, self.nvars)
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, tuple(self._terms.items())))
        return self._hash

    # calculus / evaluation ---------------------------------------------

    def partial(self, index: int) -> "Poly":
        if not 0 <= index < self.nvars:
            raise PolyError(f"variable index {index} out of range for {self.nvars} variables")
        out = {}
        for e, c in self._terms.items():
            k = e[index]
            if k:
                d = list(e)
                d[index] = k - 1
                out[tuple(d)] = c * k
        return Poly._raw(self.nvars, out)

    def gradient(self) -> list["Poly"]:
        return [self.partial(i) for i in range(self.nvars)]

    def eval(self, point: Sequence):
        """Evaluate at ``point``; exact Fraction if every coordinate is exact, else float."""
        if len(point) != self.nvars:
            raise PolyError(f"point has length {len(point)}, expected {self.nvars}")
        if all(_is_exact(x) for x in point):
            pt = [Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x) for x in point]
            total = Fraction(0)
            for e, c in self._terms.items():
                term = c
                for x, k in zip(pt, e):
                    if k:
                        term *= x**k
                total += term
            return total
        pt = [float(x) for x in point]
        total = 0.0
        for e, c in self._terms.items():
            term = float(c)
            for x, k in zip(pt, e):
                if k:
                    term *= x**k
            total += term
        return total

    __call__ = eval

    def subs(self, values: Mapping[int, object]) -> "Poly":
        """Substitute exact values for some variables; the variable space is kept."""
        vals = {i: as_rational(v) for i, v in values.items()}
        for i in vals:
            if not 0 <= i < self.nvars:
                raise PolyError(f"variable index {i} out of range")
        out: dict[Exps, Fraction] = {}
        for e, c in self._terms.items():
            d = list(e)
            for i, v in vals.items():
                if d[i]:
                    c = c * v ** d[i]
                    d[i] = 0
            if c:
                key = tuple(d)
                out[key] = out.get(key, 0) + c
        return Poly._raw(self.nvars, {e: c for e, c in out.items() if c})

    def compose(self, images: Sequence["Poly"]) -> "Poly":
        """Replace variable ``i`` by ``images[i]`` (all images share one variable space)."""
        if len(images) != self.nvars:
            raise PolyError("need one image per variable")
        if not images:
            return self
        target = images[0].nvars
        out = Poly.zero(target)
        for e, c in self._terms.items():
            term = Poly.const(c, target)
            for img, k in zip(images, e):
                if k:
                    term = term * img**k
            out = out + term
        return out

    def embed(self, nvars: int, mapping: Sequence[int]) -> "Poly":
        """Move into a larger space: old variable ``i`` becomes new variable ``mapping[i]``."""
        if len(mapping) != self.nvars:
            raise PolyError("mapping must list a target index per variable")
        out = {}
        for e, c in self._terms.items():
            d = [0] * nvars
            for i, k in zip(mapping, e):
                d[i] += k
            out[tuple(d)] = c
        return Poly._raw(nvars, out)

    # serialization ------------------------------------------------------

    def render(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms.items():
            factors = [str(c)]
            factors += [f"x{i}^{k}" if k > 1 else f"x{i}" for i, k in enumerate(e) if k]
            parts.append(" * ".join(factors))
        return " + ".join(parts)

    __str__ = render

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {self.render()!r})"

    @classmethod
    def parse(cls, text: str, nvars: int) -> "Poly":
        return parse_poly(text, nvars)

    def to_json(self) -> list[dict]:
        return [{"coeff": str(c), "exps": list(e)} for e, c in self._terms.items()]

    @classmethod
    def from_json(cls, data, nvars: int | None = None) -> "Poly":
        if isinstance(data, str):
            if nvars is None:
                raise PolyError("text polynomials need an explicit variable count")
            return parse_poly(data, nvars)
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            if nvars is None:
                raise PolyError("constant polynomials need an explicit variable count")
            return cls.const(data, nvars)
        terms: dict[Exps, Fraction] = {}
        widths = {len(t["exps"]) for t in data}
        if nvars is None:
            if len(widths) != 1:
                raise PolyError("cannot infer the variable count of an empty or ragged term list")
            nvars = widths.pop()
        for t in data:
            e = tuple(t["exps"])
            terms[e] = terms.get(e, 0) + as_rational(t["coeff"])
        return cls(nvars, terms)

    def to_expr(self, name: str = "z") -> str:
        """Python source evaluating the polynomial in floats, e.g. for code generation."""
        if not self._terms:
            return "0.0"
        parts = []
        for e, c in self._terms.items():
            factors = [repr(float(c))]
            for i, k in enumerate(e):
                if k == 1:
                    factors.append(f"{name}[{i}]")
                elif k:
                    factors.append(f"{name}[{i}]**{k}")
            parts.append("*".join(factors))
        return " + ".join(parts)


_TERM_SPLIT = re.compile(r"\s*([+-])\s*")
_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_poly(text: str, nvars: int) -> Poly:
    """Parse the text format; also accepts ``-`` separators and implicit unit coefficients."""
    src = text.strip()
    if not src:
        raise PolyError("empty polynomial text")
    # Split on top-level +/-, keeping unary signs attached to their term.
    tokens = []
    sign = 1
    buf = ""
    i = 0
    while i < len(src):
        ch = src[i]
        if ch in "+-" and (not buf.strip() or not buf.rstrip().endswith(("*", "^", "/"))):
            if buf.strip():
                tokens.append((sign, buf.strip()))
                buf = ""
                sign = 1
            if ch == "-":
                sign = -sign
        else:
            buf += ch
        i += 1
    if buf.strip():
        tokens.append((sign, buf.strip()))
    elif not tokens:
        raise PolyError(f"no terms in {text!r}")
    else:
        raise PolyError(f"dangling sign in {text!r}")
    terms: dict[Exps, Fraction] = {}
    for sign, body in tokens:
        coeff = Fraction(sign)
        exps = [0] * nvars
        for factor in body.split("*"):
            factor = factor.strip()
            m = _FACTOR.match(factor)
            if m:
                idx = int(m.group(1))
                if idx >= nvars:
                    raise PolyError(f"variable x{idx} out of range for {nvars} variables")
                exps[idx] += int(m.group(2) or 1)
            else:
                try:
                    coeff *= Fraction(factor)
                except (ValueError, ZeroDivisionError) as exc:
                    raise PolyError(f"bad factor {factor!r} in {text!r}") from exc
        key = tuple(exps)
        terms[key] = terms.get(key, 0) + coeff
    return Poly(nvars, terms)


class PolyVec:
    """Immutable tuple of polynomials sharing one variable space (a vector field)."""

    __slots__ = ("entries", "nvars")

    def __init__(self, entries: Iterable[Poly]):
        entries = tuple(entries)
        if not entries:
            raise PolyError("PolyVec needs at least one entry")
        nv = {e.nvars for e in entries}
        if len(nv) != 1:
            raise PolyError(f"entries use different variable counts: {sorted(nv)}")
        self.entries = entries
        self.nvars = nv.pop()

    @classmethod
    def zero(cls, dim: int, nvars: int) -> "PolyVec":
        return cls(Poly.zero(nvars) for _ in range(dim))

    @classmethod
    def constant(cls, values: Sequence, nvars: int) -> "PolyVec":
        return cls(Poly.const(v, nvars) for v in values)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i) -> Poly:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def _check(self, other: "PolyVec"):
        if not isinstance(other, PolyVec):
            raise TypeError("expected a PolyVec")
        if other.dim != self.dim or other.nvars != self.nvars:
            raise PolyError(
                f"shape mismatch: dim {self.dim}/{other.dim}, nvars {self.nvars}/{other.nvars}"
            )

    def __add__(self, other: "PolyVec") -> "PolyVec":
        self._check(other)
        return PolyVec(a + b for a, b in zip(self, other))

    def __sub__(self, other: "PolyVec") -> "PolyVec":
        self._check(other)
        return PolyVec(a - b for a, b in zip(self, other))

    def __neg__(self) -> "PolyVec":
        return PolyVec(-a for a in self)

    def __mul__(self, scalar) -> "PolyVec":
        return PolyVec(a * scalar for a in self)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyVec) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.entries)

    def jacobian(self) -> list[list[Poly]]:
        return [[e.partial(j) for j in range(self.nvars)] for e in self.entries]

    def directional(self, direction: "PolyVec") -> "PolyVec":
        """``(D self) · direction``: derivative of this field along ``direction``."""
        if direction.dim != self.nvars or direction.nvars != self.nvars:
            raise PolyError("direction must be a field on the same space with dim == nvars")
        out = []
        for e in self.entries:
            acc = Poly.zero(self.nvars)
            for j, d in enumerate(direction):
                if not d.is_zero() and e.depends_on(j):
                    acc = acc + e.partial(j) * d
            out.append(acc)
        return PolyVec(out)

    def dot(self, other: Sequence[Poly]) -> Poly:
        acc = Poly.zero(self.nvars)
        for a, b in zip(self.entries, other):
            acc = acc + a * b
        return acc

    def eval(self, point: Sequence) -> list:
        return [e.eval(point) for e in self.entries]

    def embed(self, nvars: int, mapping: Sequence[int]) -> "PolyVec":
        return PolyVec(e.embed(nvars, mapping) for e in self.entries)

    def subs(self, values: Mapping[int, object]) -> "PolyVec":
        return PolyVec(e.subs(values) for e in self.entries)

    def render(self) -> list[str]:
        return [e.render() for e in self.entries]

    def to_json(self) -> list[list[dict]]:
        return [e.to_json() for e in self.entries]

    def __repr__(self) -> str:
        return f"PolyVec({self.render()})"


def lambdify(polys: Sequence[Poly], nvars: int, name: str = "z") -> Callable[[np.ndarray], np.ndarray]:
    """Compile polynomials into one float function ``z -> array``."""
    for p in polys:
        if p.nvars != nvars:
            raise PolyError("all polynomials must live in the given variable space")
    body = ", ".join(p.to_expr(name) for p in polys)
    src = f"lambda {name}: _np.array(({body}{',' if len(polys) == 1 else ''}), dtype=float)"
    return eval(src, {"_np": np})  # noqa: S307 - source generated from Poly terms only
