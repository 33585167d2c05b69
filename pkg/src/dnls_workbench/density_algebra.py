"""Exact differential-polynomial algebra for the conserved-density hierarchy.

The hierarchy lives in the ring of polynomials over the formal symbols

    q, q_x, q_xx, ...      r, r_x, r_xx, ...

with coefficients that are complex numbers with exact rational real and
imaginary parts.  Densities are produced by the recurrence

    Z[n+1] = sum_{k=1}^{n-1} Z[k] Z[n-k]  +  i q r Z[n]  +  q d/dx(Z[n] / q)

seeded by Z[1] = -(1/4) q^2 r^2 + (i/2) q r_x.  The zeroth density q r is
reserved for the mass and never enters the quadratic sum.  The transport
term is expanded as d/dx(Z) - (q_x/q) Z with a formal inverse power of q
that must cancel monomial by monomial; a residual inverse power means the
input density was not divisible by q and is reported as an error.

Odd and even densities integrate to the momentum and energy hierarchies:

    P_n = 2 Re Int Z[2n-1],      E_n = -2 Im Int Z[2n].

Substitution along the unit-speed algebraic soliton (r the conjugate of q,
profile phi with phi'' = phi^3/2 - (3/16) phi^5 and first integral
phi_x^2 = phi^4/4 - phi^6/16) maps a density to a polynomial in the two
real symbols (phi, phi_x), where closed moment formulas integrate it
exactly; the factor of pi stays symbolic throughout.  Speeds other than 1
are recovered externally through the scaling of the profile family.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import zip_longest
from typing import Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

from .spectral_core import GridFunction, derivative, integrate

Rational = Union[int, Fraction]


@dataclass(frozen=True)
class ExactComplex:
    """Complex number with exact rational real and imaginary parts."""

    real: Fraction = Fraction(0)
    imag: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "real", Fraction(self.real))
        object.__setattr__(self, "imag", Fraction(self.imag))

    def __add__(self, other: "ExactComplex") -> "ExactComplex":
        other = as_exact(other)
        return ExactComplex(self.real + other.real, self.imag + other.imag)

    __radd__ = __add__

    def __sub__(self, other: "ExactComplex") -> "ExactComplex":
        other = as_exact(other)
        return ExactComplex(self.real - other.real, self.imag - other.imag)

    def __neg__(self) -> "ExactComplex":
        return ExactComplex(-self.real, -self.imag)

    def __mul__(self, other) -> "ExactComplex":
        other = as_exact(other)
        return ExactComplex(
            self.real * other.real - self.imag * other.imag,
            self.real * other.imag + self.imag * other.real,
        )

    __rmul__ = __mul__

    def conjugate(self) -> "ExactComplex":
        return ExactComplex(self.real, -self.imag)

    def __bool__(self) -> bool:
        return bool(self.real) or bool(self.imag)

    def __complex__(self) -> complex:
        return complex(float(self.real), float(self.imag))

    def text(self) -> str:
        """Stable rendering: a/b, a/b·i, or a/b + c/d·i."""
        if not self.imag:
            return str(self.real)
        if not self.real:
            return f"{self.imag}·i"
        sign = "+" if self.imag > 0 else "-"
        return f"{self.real} {sign} {abs(self.imag)}·i"


I_UNIT = ExactComplex(0, 1)


def as_exact(value) -> ExactComplex:
    if isinstance(value, ExactComplex):
        return value
    if isinstance(value, (int, Fraction)):
        return ExactComplex(Fraction(value), Fraction(0))
    raise TypeError(f"cannot interpret {value!r} as an exact complex number")


def _trimmed(powers) -> Tuple[int, ...]:
    powers = tuple(int(p) for p in powers)
    while powers and powers[-1] == 0:
        powers = powers[:-1]
    return powers


def _symbol_run(base: str, powers: Tuple[int, ...]) -> list:
    parts = []
    for order, power in enumerate(powers):
        if power == 0:
            continue
        name = base if order == 0 else base + "_" + "x" * order
        parts.append(name if power == 1 else f"{name}^{power}")
    return parts


@dataclass(frozen=True)
class Monomial:
    """Product of derivative symbols with an exact complex coefficient.

    ``q_powers[k]`` and ``r_powers[k]`` hold the exponent of the k-th
    x-derivative of q and r (index 0 is the undifferentiated symbol).
    ``q_inverse`` counts formal powers of 1/q; it appears only transiently
    inside the recurrence and must have cancelled by the time a density is
    finalized.  Construction normalizes: trailing zero exponents are
    trimmed and q^a·q^{-m} is reduced.
    """

    coefficient: ExactComplex
    q_powers: Tuple[int, ...] = ()
    r_powers: Tuple[int, ...] = ()
    q_inverse: int = 0

    def __post_init__(self) -> None:
        coeff = as_exact(self.coefficient)
        if not coeff:
            raise ValueError("monomials carry nonzero coefficients")
        q_powers = _trimmed(self.q_powers)
        r_powers = _trimmed(self.r_powers)
        inverse = int(self.q_inverse)
        if inverse < 0 or any(p < 0 for p in q_powers + r_powers):
            raise ValueError("exponents are nonnegative integers")
        if inverse and q_powers and q_powers[0]:
            cancel = min(inverse, q_powers[0])
            inverse -= cancel
            q_powers = _trimmed((q_powers[0] - cancel,) + q_powers[1:])
        object.__setattr__(self, "coefficient", coeff)
        object.__setattr__(self, "q_powers", q_powers)
        object.__setattr__(self, "r_powers", r_powers)
        object.__setattr__(self, "q_inverse", inverse)

    @property
    def degree(self) -> int:
        return sum(self.q_powers) + sum(self.r_powers) + self.q_inverse

    @property
    def max_order(self) -> int:
        return max(len(self.q_powers), len(self.r_powers)) - 1

    def key(self):
        return (self.q_powers, self.r_powers, self.q_inverse)

    def sort_key(self):
        return (self.degree, self.q_inverse, self.q_powers, self.r_powers)

    def times(self, other: "Monomial") -> "Monomial":
        q_powers = tuple(
            a + b for a, b in zip_longest(self.q_powers, other.q_powers, fillvalue=0)
        )
        r_powers = tuple(
            a + b for a, b in zip_longest(self.r_powers, other.r_powers, fillvalue=0)
        )
        return Monomial(
            self.coefficient * other.coefficient,
            q_powers,
            r_powers,
            self.q_inverse + other.q_inverse,
        )

    def text(self) -> str:
        parts = _symbol_run("q", self.q_powers)
        if self.q_inverse:
            parts.append(f"q^-{self.q_inverse}")
        parts.extend(_symbol_run("r", self.r_powers))
        coeff = self.coefficient
        body = "·".join(parts)
        if not body:
            return coeff.text()
        if coeff.imag:
            return f"({coeff.text()})·{body}"
        return f"{coeff.text()}·{body}"


class DensityPolynomial:
    """Fully combined sum of monomials in a fixed graded-lexicographic order.

    Equality compares the term maps; the ``label`` (position in the
    hierarchy) is annotation only.  Instances are immutable: every
    operation returns a new polynomial.
    """

    __slots__ = ("_terms", "label")

    def __init__(self, monomials: Iterable[Monomial] = (), label=None):
        terms = {}
        for monomial in monomials:
            key = monomial.key()
            acc = terms.get(key)
            coeff = monomial.coefficient if acc is None else acc + monomial.coefficient
            if coeff:
                terms[key] = coeff
            elif acc is not None:
                del terms[key]
        object.__setattr__(self, "_terms", terms)
        object.__setattr__(self, "label", label)

    def __setattr__(self, name, value):
        raise AttributeError("densities are immutable once normalized")

    @property
    def monomials(self) -> Tuple[Monomial, ...]:
        built = [
            Monomial(coeff, qp, rp, inv) for (qp, rp, inv), coeff in self._terms.items()
        ]
        return tuple(sorted(built, key=Monomial.sort_key))

    def relabel(self, label) -> "DensityPolynomial":
        return DensityPolynomial(self.monomials, label=label)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DensityPolynomial):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def __add__(self, other: "DensityPolynomial") -> "DensityPolynomial":
        if not isinstance(other, DensityPolynomial):
            return NotImplemented
        return DensityPolynomial(self.monomials + other.monomials)

    def __sub__(self, other: "DensityPolynomial") -> "DensityPolynomial":
        return self + (-other)

    def __neg__(self) -> "DensityPolynomial":
        return DensityPolynomial(
            [
                Monomial(-m.coefficient, m.q_powers, m.r_powers, m.q_inverse)
                for m in self.monomials
            ]
        )

    def __mul__(self, other):
        if isinstance(other, DensityPolynomial):
            products = [
                a.times(b) for a in self.monomials for b in other.monomials
            ]
            return DensityPolynomial(products)
        try:
            scale = as_exact(other)
        except TypeError:
            return NotImplemented
        if not scale:
            return DensityPolynomial()
        return DensityPolynomial(
            [
                Monomial(scale * m.coefficient, m.q_powers, m.r_powers, m.q_inverse)
                for m in self.monomials
            ]
        )

    __rmul__ = __mul__

    def text(self) -> str:
        terms = self.monomials
        if not terms:
            return "0"
        return " + ".join(m.text() for m in terms)

    def __repr__(self) -> str:
        return f"DensityPolynomial({self.text()!r}, label={self.label!r})"


MASS_DENSITY = DensityPolynomial([Monomial(ExactComplex(1), (1,), (1,))], label=0)

SEED_DENSITY = DensityPolynomial(
    [
        Monomial(ExactComplex(Fraction(-1, 4)), (2,), (2,)),
        Monomial(ExactComplex(0, Fraction(1, 2)), (1,), (0, 1)),
    ],
    label=1,
)

# q_x / q, the formal slope subtracted when the transport term is expanded.
_LOG_SLOPE = DensityPolynomial([Monomial(ExactComplex(1), (0, 1), (), 1)])


def formal_derivative(z: DensityPolynomial) -> DensityPolynomial:
    """Leibniz x-derivative over the formal symbols.

    ∂x maps q -> q_x -> q_xx -> ... and r likewise; a formal inverse power
    differentiates as d/dx q^{-m} = -m q^{-m-1} q_x.
    """
    produced = []
    for m in z.monomials:
        for side, powers in (("q", m.q_powers), ("r", m.r_powers)):
            for order, power in enumerate(powers):
                if power == 0:
                    continue
                shifted = list(powers)
                shifted[order] -= 1
                if len(shifted) <= order + 1:
                    shifted.extend([0] * (order + 2 - len(shifted)))
                shifted[order + 1] += 1
                coeff = m.coefficient * power
                if side == "q":
                    produced.append(
                        Monomial(coeff, tuple(shifted), m.r_powers, m.q_inverse)
                    )
                else:
                    produced.append(
                        Monomial(coeff, m.q_powers, tuple(shifted), m.q_inverse)
                    )
        if m.q_inverse:
            bumped = list(m.q_powers) or [0]
            if len(bumped) < 2:
                bumped.extend([0] * (2 - len(bumped)))
            bumped[1] += 1
            produced.append(
                Monomial(
                    m.coefficient * (-m.q_inverse),
                    tuple(bumped),
                    m.r_powers,
                    m.q_inverse + 1,
                )
            )
    return DensityPolynomial(produced)


def recurrence_step(history: Sequence[DensityPolynomial]) -> DensityPolynomial:
    """One step of the density recurrence.

    ``history`` is [Z1, ..., Zn]; the return value is Z(n+1).  The
    transport term q·∂x(Z/q) is expanded as ∂x(Z) - (q_x/q)·Z; every
    formal inverse power must cancel in the normalized result.
    """
    history = list(history)
    if not history or history[0] != SEED_DENSITY:
        raise ValueError("history must begin with the seed density Z1")
    n = len(history)
    newest = history[-1]
    total = DensityPolynomial()
    for k in range(1, n):
        total = total + history[k - 1] * history[n - k - 1]
    total = total + MASS_DENSITY * newest * I_UNIT
    total = total + formal_derivative(newest) - _LOG_SLOPE * newest
    offending = [m.text() for m in total.monomials if m.q_inverse]
    if offending:
        raise ValueError("density not divisible by q: " + "; ".join(offending))
    return total.relabel(n + 1)


def generate_densities(n_max: int, budget: int = 8) -> list:
    """Return [Z1, ..., Z(n_max)] by iterating the recurrence."""
    if not 1 <= n_max <= budget:
        raise ValueError(
            f"n_max must lie in 1..{budget} (budget={budget}); got {n_max}"
        )
    densities = [SEED_DENSITY]
    while len(densities) < n_max:
        densities.append(recurrence_step(densities))
    return densities


def evaluate_on_grid(z: DensityPolynomial, u: GridFunction) -> GridFunction:
    """Evaluate a density pointwise with q = u, r = conj(u).

    Derivatives are spectral; r inherits them by conjugation.  The result
    is a complex grid function; consumers integrate it.
    """
    monomials = z.monomials
    if any(m.q_inverse for m in monomials):
        raise ValueError("cannot evaluate a density with residual inverse powers")
    if not monomials:
        return u.with_values(np.zeros(u.grid.n, dtype=complex))
    max_order = max(m.max_order for m in monomials)
    q_side = [u.values]
    for order in range(1, max_order + 1):
        q_side.append(derivative(u, order).values)
    r_side = [np.conj(values) for values in q_side]
    total = np.zeros(u.grid.n, dtype=complex)
    for m in monomials:
        factor = np.full(u.grid.n, complex(m.coefficient))
        for order, power in enumerate(m.q_powers):
            if power:
                factor = factor * q_side[order] ** power
        for order, power in enumerate(m.r_powers):
            if power:
                factor = factor * r_side[order] ** power
        total += factor
    return u.with_values(total)


class PhiPolynomial:
    """Exact-coefficient polynomial in the real symbols (phi, phi_x).

    Terms are keyed by the pair of exponents and kept fully combined; the
    canonical order is ascending (phi_x power, phi power).  Immutable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Union[Mapping, Iterable] = ()):
        if isinstance(terms, Mapping):
            terms = terms.items()
        combined = {}
        for (phi_power, phix_power), coeff in terms:
            phi_power = int(phi_power)
            phix_power = int(phix_power)
            if phi_power < 0 or phix_power < 0:
                raise ValueError("exponents are nonnegative integers")
            coeff = as_exact(coeff)
            key = (phi_power, phix_power)
            acc = combined.get(key)
            coeff = coeff if acc is None else acc + coeff
            if coeff:
                combined[key] = coeff
            elif acc is not None:
                del combined[key]
        object.__setattr__(self, "_terms", combined)

    def __setattr__(self, name, value):
        raise AttributeError("phi polynomials are immutable")

    @property
    def terms(self) -> Tuple:
        """Canonically ordered ((phi_power, phix_power), coefficient) pairs."""
        order = sorted(self._terms, key=lambda key: (key[1], key[0]))
        return tuple((key, self._terms[key]) for key in order)

    @property
    def phix_degree(self) -> int:
        return max((key[1] for key in self._terms), default=0)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhiPolynomial):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def __add__(self, other: "PhiPolynomial") -> "PhiPolynomial":
        if not isinstance(other, PhiPolynomial):
            return NotImplemented
        return PhiPolynomial(list(self._terms.items()) + list(other._terms.items()))

    def __sub__(self, other: "PhiPolynomial") -> "PhiPolynomial":
        return self + (-other)

    def __neg__(self) -> "PhiPolynomial":
        return PhiPolynomial({key: -coeff for key, coeff in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, PhiPolynomial):
            produced = []
            for (m1, j1), c1 in self._terms.items():
                for (m2, j2), c2 in other._terms.items():
                    produced.append(((m1 + m2, j1 + j2), c1 * c2))
            return PhiPolynomial(produced)
        try:
            scale = as_exact(other)
        except TypeError:
            return NotImplemented
        if not scale:
            return PhiPolynomial()
        return PhiPolynomial({key: scale * c for key, c in self._terms.items()})

    __rmul__ = __mul__

    def conjugate(self) -> "PhiPolynomial":
        return PhiPolynomial({key: c.conjugate() for key, c in self._terms.items()})

    def real_part(self) -> "PhiPolynomial":
        return PhiPolynomial(
            {key: ExactComplex(c.real) for key, c in self._terms.items() if c.real}
        )

    def imag_part(self) -> "PhiPolynomial":
        return PhiPolynomial(
            {key: ExactComplex(c.imag) for key, c in self._terms.items() if c.imag}
        )

    def x_derivative(self) -> "PhiPolynomial":
        """Formal x-derivative closed by the profile equation.

        phi differentiates to phi_x and phi_x to phi^3/2 - (3/16) phi^5;
        powers of phi_x are not reduced here.
        """
        produced = []
        for (m, j), c in self._terms.items():
            if m:
                produced.append(((m - 1, j + 1), c * m))
            if j:
                produced.append(((m + 3, j - 1), c * j * Fraction(1, 2)))
                produced.append(((m + 5, j - 1), c * j * Fraction(-3, 16)))
        return PhiPolynomial(produced)

    def reduce_phix(self) -> "PhiPolynomial":
        """Eliminate even phi_x powers with phi_x^2 = phi^4/4 - phi^6/16."""
        terms = dict(self._terms)
        while any(j >= 2 for (_, j) in terms):
            produced = []
            for (m, j), c in terms.items():
                if j >= 2:
                    produced.append(((m + 4, j - 2), c * Fraction(1, 4)))
                    produced.append(((m + 6, j - 2), c * Fraction(-1, 16)))
                else:
                    produced.append(((m, j), c))
            terms = PhiPolynomial(produced)._terms
        return PhiPolynomial(terms)

    def quotient_by_phi(self) -> "PhiPolynomial":
        blockers = [key for key in self._terms if key[0] == 0]
        if blockers:
            rendered = ", ".join(_phi_term_text(key, self._terms[key]) for key in blockers)
            raise ValueError(f"not divisible by phi: {rendered}")
        return PhiPolynomial({(m - 1, j): c for (m, j), c in self._terms.items()})

    def text(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(_phi_term_text(key, coeff) for key, coeff in self.terms)

    def __repr__(self) -> str:
        return f"PhiPolynomial({self.text()!r})"


def _phi_term_text(key, coeff: ExactComplex) -> str:
    m, j = key
    parts = []
    if m:
        parts.append("phi" if m == 1 else f"phi^{m}")
    if j:
        parts.append("phi_x" if j == 1 else f"phi_x^{j}")
    body = "·".join(parts)
    if not body:
        return coeff.text()
    if coeff.imag:
        return f"({coeff.text()})·{body}"
    return f"{coeff.text()}·{body}"


PHI = PhiPolynomial({(1, 0): 1})
PHI_X = PhiPolynomial({(0, 1): 1})

# i·(phase slope) of the standing wave: i(-1/2 + (3/4) phi^2).
_I_THETA_PRIME = PhiPolynomial(
    {(0, 0): ExactComplex(0, Fraction(-1, 2)), (2, 0): ExactComplex(0, Fraction(3, 4))}
)

# i q r - q_x/q along the soliton: -phi_x/phi + i(1/2 + phi^2/4); the
# polynomial half lives here, the slope half is applied via quotient_by_phi.
_I_HALF_PLUS_QUARTER = PhiPolynomial(
    {(0, 0): ExactComplex(0, Fraction(1, 2)), (2, 0): ExactComplex(0, Fraction(1, 4))}
)

_PROFILE_TABLE = [PHI]


def _profile_derivative(order: int) -> PhiPolynomial:
    """Row k of the substituted derivative table: q_k = row(k)·e^{i·phase}.

    Rows are generated by row(k+1) = D(row(k)) + i·phase'·row(k); the first
    four reproduce a hand-checked table exactly (see tests).
    """
    while len(_PROFILE_TABLE) <= order:
        newest = _PROFILE_TABLE[-1]
        _PROFILE_TABLE.append(newest.x_derivative() + newest * _I_THETA_PRIME)
    return _PROFILE_TABLE[order]


def substitute_soliton(
    z: DensityPolynomial, *, reduce: bool = True, extend_table: bool = False
) -> PhiPolynomial:
    """Substitute the unit-speed soliton into a density.

    q becomes phi·e^{i·phase} and r its conjugate; the oscillatory phase
    cancels because every monomial of a density balances q and r factors.
    With ``reduce`` set, even phi_x powers are eliminated through the first
    integral, leaving phi_x-degree at most 1 (the printed decompositions of
    the low densities keep their raw phi_x powers; pass reduce=False to
    match them).  Derivative rows above 4 exceed the hand-checked table and
    require ``extend_table``.
    """
    monomials = z.monomials
    if any(m.q_inverse for m in monomials):
        raise ValueError("cannot substitute into a density with residual inverse powers")
    max_order = max((m.max_order for m in monomials), default=0)
    if max_order > 4 and not extend_table:
        raise ValueError(
            f"derivative order {max_order} exceeds the checked table (order 4); "
            "pass extend_table=True to generate higher rows"
        )
    result = PhiPolynomial()
    for m in monomials:
        if sum(m.q_powers) != sum(m.r_powers):
            raise ValueError(
                f"oscillatory phase does not cancel for monomial {m.text()}"
            )
        term = PhiPolynomial({(0, 0): m.coefficient})
        for order, power in enumerate(m.q_powers):
            row = _profile_derivative(order)
            for _ in range(power):
                term = term * row
        for order, power in enumerate(m.r_powers):
            row = _profile_derivative(order).conjugate()
            for _ in range(power):
                term = term * row
        result = result + term
    return result.reduce_phix() if reduce else result


def phi_moment(k: int) -> Fraction:
    """Exact value of Int phi^{2k} dx in units of pi.

    The unit-speed profile obeys Int phi^{2k} = 4^k·pi·(2k-3)!!/(2k-2)!!.
    """
    if k < 1:
        raise ValueError("moments are defined for k >= 1")
    return Fraction(4) ** k * Fraction(_double_factorial(2 * k - 3), _double_factorial(2 * k - 2))


def _double_factorial(n: int) -> int:
    product = 1
    while n > 1:
        product *= n
        n -= 2
    return product


def integrate_phi_polynomial(p: PhiPolynomial) -> ExactComplex:
    """Integrate a substituted density over the line, exactly, in units of pi.

    Even phi_x powers are first eliminated through the first integral.
    Surviving terms with a single phi_x factor vanish by parity (phi is
    even, phi_x odd); pure even phi powers use the closed moment formula.
    Odd phi powers and bare constants have no closed moment and raise.
    """
    reduced = p.reduce_phix()
    total = ExactComplex()
    for (m, j), coeff in reduced.terms:
        if j == 1:
            continue
        if j != 0:
            raise ValueError("reduction left an even phi_x power behind")
        if m == 0:
            raise ValueError("constant term does not decay; no finite integral")
        if m % 2:
            raise ValueError(f"odd power phi^{m} has no closed moment")
        total = total + coeff * phi_moment(m // 2)
    return total


def soliton_density_integral(n: int, *, extend_table: bool = False) -> ExactComplex:
    """Exact Int Z[n] dx along the unit-speed soliton, in units of pi.

    For n >= 5 the recurrence is split under the integral sign: the exact
    x-derivative drops, and i q r - q_x/q collapses to
    -phi_x/phi + i(1/2 + phi^2/4), so only rows up to n-1 of the
    derivative table are needed (n = 6 therefore requires extend_table).
    """
    if n < 0:
        raise ValueError("density index is nonnegative")
    if n == 0:
        return ExactComplex(phi_moment(1))
    if n <= 4:
        z = generate_densities(n)[-1]
        return integrate_phi_polynomial(substitute_soliton(z, reduce=False))
    previous = n - 1
    substituted = [
        substitute_soliton(z, reduce=False, extend_table=extend_table)
        for z in generate_densities(previous, budget=max(8, previous))
    ]
    assembled = PhiPolynomial()
    for k in range(1, previous):
        assembled = assembled + substituted[k - 1] * substituted[previous - k - 1]
    newest = substituted[previous - 1]
    assembled = assembled + newest * _I_HALF_PLUS_QUARTER
    assembled = assembled - newest.quotient_by_phi() * PHI_X
    return integrate_phi_polynomial(assembled)


@dataclass(frozen=True)
class P3CheckReport:
    """Exact reconstruction of the third momentum along the soliton.

    ``components`` holds, in order, 2Re(Z1·Z3), Re(Z2)^2, (phi_x/phi)Re(Z4)
    and (1/2 + phi^2/4)Im(Z4); the integrand is the first two minus the
    last two.  ``partial_sums`` are the three bracketed groups of the
    term-by-term integration (collecting the sixteenth-, eighth- and
    sixty-fourth-valued contributions) and ``total`` their sum, all in
    units of pi.  The check passes when total is exactly zero.
    """

    total: Fraction
    partial_sums: Tuple[Fraction, Fraction, Fraction]
    integrand: PhiPolynomial
    components: Tuple[PhiPolynomial, PhiPolynomial, PhiPolynomial, PhiPolynomial]


_PARTIAL_SUM_GROUPS = ((0, 1, 3, 7), (2, 4, 6, 8), (5, 9, 10))


def p3_appendix_check() -> P3CheckReport:
    """Assemble (1/2)P3 along the soliton from the first four densities.

    The fifth density's real integral is rebuilt in (phi, phi_x) space from
    the substituted Z1..Z4 (no order-5 derivative row enters) and
    integrated term by term with the closed moments.
    """
    substituted = [
        substitute_soliton(z, reduce=False) for z in generate_densities(4)
    ]
    z1, z2, z3, z4 = substituted
    cross = (z1 * z3).real_part() * 2
    square = (z2 * z2).real_part()
    slope = z4.real_part().quotient_by_phi() * PHI_X
    phase = z4.imag_part() * PhiPolynomial(
        {(0, 0): Fraction(1, 2), (2, 0): Fraction(1, 4)}
    )
    integrand = cross + square - slope - phase
    term_values = [
        integrate_phi_polynomial(PhiPolynomial({key: coeff})).real
        for key, coeff in integrand.terms
    ]
    if len(term_values) != len(
        {index for group in _PARTIAL_SUM_GROUPS for index in group}
    ):
        raise RuntimeError("integrand term count drifted from the checked grouping")
    partial_sums = tuple(
        sum((term_values[index] for index in group), Fraction(0))
        for group in _PARTIAL_SUM_GROUPS
    )
    return P3CheckReport(
        total=sum(partial_sums, Fraction(0)),
        partial_sums=partial_sums,
        integrand=integrand,
        components=(cross, square, slope, phase),
    )
