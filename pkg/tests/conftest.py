from fractions import Fraction

from hypothesis import settings, strategies as st

from fuller.polyalg import Poly, PolyVec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

small_rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def polys(draw, nvars=2, max_terms=4, max_exp=3):
    n_terms = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n_terms):
        e = tuple(draw(st.lists(st.integers(0, max_exp), min_size=nvars, max_size=nvars)))
        terms[e] = draw(small_rationals)
    return Poly(nvars, terms)


@st.composite
def polyvecs(draw, dim=2, nvars=2, max_terms=3, max_exp=2):
    return PolyVec([draw(polys(nvars, max_terms, max_exp)) for _ in range(dim)])


def random_poly(rng, nvars, degree=3, n_terms=4):
    """Random polynomial with small rational coefficients and total degree <= degree."""
    terms = {}
    for _ in range(n_terms):
        e = [0] * nvars
        for _ in range(int(rng.integers(0, degree + 1))):
            e[int(rng.integers(nvars))] += 1
        terms[tuple(e)] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
    return Poly(nvars, terms)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
