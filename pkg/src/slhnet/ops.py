"""Symbolic algebra for polynomials in bosonic ladder operators.

Expressions are stored in a canonical normal-ordered form: every monomial
has all creation operators to the left of all annihilation operators, with
modes sorted by their registry ordinal.  A monomial is encoded as a tuple
of ``(mode_index, creation_power, annihilation_power)`` triples; the empty
tuple is the identity (scalar) monomial.  Because the form is canonical,
two expressions are equal iff their term maps match, which is what makes
exact regression tests on composed networks possible.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "ModeId",
    "ModeRegistry",
    "OperatorExpr",
    "RegistryMismatchError",
    "DimensionCapError",
    "NonlinearExprError",
]

# coefficients with magnitude at or below this are dropped during
# canonicalization (floating point dust from cancellations)
DROP_EPS = 1e-15

# to_matrix refuses joint Fock dimensions above this unless overridden
DEFAULT_DIM_CAP = 4096


class RegistryMismatchError(ValueError):
    """Raised when two expressions over different mode registries are combined."""


class DimensionCapError(ValueError):
    """Raised when a requested Fock-space dimension exceeds the configured cap."""


class NonlinearExprError(ValueError):
    """Raised when an operation requires an affine expression but finds a
    higher-degree monomial.  Carries the offending monomial's text form."""

    def __init__(self, message: str, monomial: str):
        super().__init__(message)
        self.monomial = monomial


class ModeId:
    """A registered bosonic mode: a short name plus a dense 0-based ordinal."""

    __slots__ = ("name", "index")

    def __init__(self, name: str, index: int):
        self.name = name
        self.index = index

    def __repr__(self):
        return f"ModeId({self.name!r}, {self.index})"

    def __eq__(self, other):
        return (isinstance(other, ModeId)
                and other.name == self.name and other.index == self.index)

    def __hash__(self):
        return hash((self.name, self.index))


class ModeRegistry:
    """Ordered collection of named modes.

    Mode names must be unique; ordinals are assigned contiguously in
    registration order and fix the canonical mode order of every
    expression built over this registry.
    """

    def __init__(self, names: Iterable[str] = ()):
        self._modes: list[ModeId] = []
        self._by_name: dict[str, ModeId] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> ModeId:
        if name in self._by_name:
            raise ValueError(f"mode {name!r} already registered")
        mode = ModeId(name, len(self._modes))
        self._modes.append(mode)
        self._by_name[name] = mode
        return mode

    def get(self, name: str) -> ModeId:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown mode {name!r}") from None

    def __len__(self):
        return len(self._modes)

    def __iter__(self):
        return iter(self._modes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self._modes)

    def compatible(self, other: "ModeRegistry") -> bool:
        return self is other or self.names == other.names


# A monomial is a tuple of (mode_index, cre_power, ann_power), sorted by
# mode_index, with no all-zero entries.  () is the scalar monomial.
Monomial = tuple[tuple[int, int, int], ...]

SCALAR_MONO: Monomial = ()


def _check_same_registry(a: "OperatorExpr", b: "OperatorExpr") -> None:
    if not a.registry.compatible(b.registry):
        raise RegistryMismatchError(
            f"expressions use different mode registries: "
            f"{a.registry.names} vs {b.registry.names}")


class OperatorExpr:
    """Immutable normal-ordered polynomial in ladder operators.

    Do not mutate ``terms`` after construction; all algebra returns new
    expressions.  Construct via the factory classmethods or the module
    functions on a registry.
    """

    __slots__ = ("registry", "terms")

    def __init__(self, registry: ModeRegistry,
                 terms: Mapping[Monomial, complex] | None = None):
        self.registry = registry
        cleaned: dict[Monomial, complex] = {}
        if terms:
            for mono, coef in terms.items():
                c = complex(coef)
                if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                    raise ValueError(f"non-finite coefficient {c} for {mono}")
                if abs(c) > DROP_EPS:
                    cleaned[mono] = c
        self.terms = cleaned

    # ---- constructors ----

    @classmethod
    def zero(cls, registry: ModeRegistry) -> "OperatorExpr":
        return cls(registry)

    @classmethod
    def scalar(cls, registry: ModeRegistry, value: complex) -> "OperatorExpr":
        return cls(registry, {SCALAR_MONO: complex(value)})

    @classmethod
    def annihilation(cls, registry: ModeRegistry, mode: ModeId | str) -> "OperatorExpr":
        m = registry.get(mode) if isinstance(mode, str) else mode
        if m.index >= len(registry) or registry.names[m.index] != m.name:
            raise KeyError(f"mode {m.name!r} not in registry")
        return cls(registry, {((m.index, 0, 1),): 1.0 + 0.0j})

    @classmethod
    def creation(cls, registry: ModeRegistry, mode: ModeId | str) -> "OperatorExpr":
        return cls.annihilation(registry, mode).adjoint()

    # ---- basic queries ----

    def is_zero(self) -> bool:
        return not self.terms

    def is_scalar(self) -> bool:
        return all(m == SCALAR_MONO for m in self.terms)

    def scalar_value(self) -> complex:
        """Value of a scalar expression (0 for the zero expression)."""
        if not self.is_scalar():
            raise NonlinearExprError(
                "expression is not a scalar", self._worst_monomial_str())
        return self.terms.get(SCALAR_MONO, 0.0 + 0.0j)

    def _worst_monomial_str(self) -> str:
        non_scalar = [m for m in self.terms if m != SCALAR_MONO]
        return monomial_str(self.registry, max(non_scalar, key=_mono_degree)) \
            if non_scalar else "1"

    # ---- algebra ----

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = OperatorExpr.scalar(self.registry, other)
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        _check_same_registry(self, other)
        out = dict(self.terms)
        for mono, coef in other.terms.items():
            out[mono] = out.get(mono, 0.0) + coef
        return OperatorExpr(self.registry, out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = OperatorExpr.scalar(self.registry, other)
        return self + other.scale(-1.0)

    def __rsub__(self, other):
        return (self.scale(-1.0)) + other

    def scale(self, c: complex) -> "OperatorExpr":
        c = complex(c)
        return OperatorExpr(self.registry,
                            {m: coef * c for m, coef in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        _check_same_registry(self, other)
        out: dict[Monomial, complex] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                for mono, factor in _mono_product(m1, m2):
                    key = mono
                    out[key] = out.get(key, 0.0) + c1 * c2 * factor
        return OperatorExpr(self.registry, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def __neg__(self):
        return self.scale(-1.0)

    def adjoint(self) -> "OperatorExpr":
        """Hermitian conjugate: conjugate coefficients, swap powers.

        The swapped monomial a^d a!^c re-normal-orders to exactly
        ad^d a^c, so no commutator terms appear.
        """
        out = {}
        for mono, coef in self.terms.items():
            key = tuple((idx, ann, cre) for idx, cre, ann in mono)
            out[key] = coef.conjugate()
        return OperatorExpr(self.registry, out)

    def hermitian_part_imag(self) -> "OperatorExpr":
        """Im{X} = (X - X†) / 2i, the operator-valued imaginary part."""
        return (self - self.adjoint()).scale(1.0 / 2.0j)

    # ---- comparison ----

    def equals_canonical(self, other: "OperatorExpr", eps: float = 0.0) -> bool:
        """Canonical equality with coefficient tolerance ``eps``.

        The tolerance is scale-aware: coefficients c1, c2 match when
        |c1 - c2| <= eps * max(1, |c1|, |c2|).  With eps = 0 this is exact
        equality of the term maps.  (Physical coefficients here are rad/s
        quantities of magnitude up to ~1e15, where an absolute tolerance
        would be meaningless.)
        """
        if eps < 0:
            raise ValueError("eps must be >= 0")
        _check_same_registry(self, other)
        for mono in self.terms.keys() | other.terms.keys():
            c1 = self.terms.get(mono, 0.0)
            c2 = other.terms.get(mono, 0.0)
            if abs(c1 - c2) > eps * max(1.0, abs(c1), abs(c2)):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self.registry.compatible(other.registry) and self.terms == other.terms

    def __hash__(self):
        return hash((self.registry.names, frozenset(self.terms.items())))

    # ---- degree / structure inspection ----

    def max_degree(self) -> int:
        return max((_mono_degree(m) for m in self.terms), default=0)

    def affine_parts(self) -> tuple[complex, np.ndarray]:
        """Split an affine expression into (constant, annihilation coefficients).

        Only valid for expressions of the form  c0 + sum_i c_i a_i ; raises
        NonlinearExprError on creation operators or higher-degree monomials,
        naming the offending monomial.
        """
        n = len(self.registry)
        const = 0.0 + 0.0j
        lin = np.zeros(n, dtype=complex)
        for mono, coef in self.terms.items():
            if mono == SCALAR_MONO:
                const = coef
            elif len(mono) == 1 and mono[0][1] == 0 and mono[0][2] == 1:
                lin[mono[0][0]] = coef
            else:
                raise NonlinearExprError(
                    f"expression is not affine in annihilation operators; "
                    f"offending monomial: {monomial_str(self.registry, mono)}",
                    monomial_str(self.registry, mono))
        return const, lin

    def eval_coherent(self, amplitudes: np.ndarray) -> complex:
        """Evaluate an affine expression at per-mode coherent amplitudes."""
        const, lin = self.affine_parts()
        return const + complex(np.dot(lin, np.asarray(amplitudes, dtype=complex)))

    # ---- matrix representation ----

    def to_matrix(self, dims, cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
        """Dense matrix on the joint truncated Fock space.

        ``dims`` is one per-mode truncation (>= 2 each), ordered by mode
        ordinal; a single int is broadcast.  Mode 0 is the leftmost tensor
        factor.  The annihilation operator maps |n> -> sqrt(n)|n-1>.
        """
        n = len(self.registry)
        if isinstance(dims, int):
            dims = (dims,) * n
        dims = tuple(int(d) for d in dims)
        if len(dims) != n:
            raise ValueError(f"need {n} truncation dims, got {len(dims)}")
        if any(d < 2 for d in dims):
            raise ValueError("per-mode truncation must be >= 2")
        total = 1
        for d in dims:
            total *= d
        if total > cap:
            raise DimensionCapError(
                f"joint Fock dimension {total} exceeds cap {cap}")

        ladders = [_ladder(d) for d in dims]
        out = np.zeros((total, total), dtype=complex)
        for mono, coef in self.terms.items():
            powers = {idx: (cre, ann) for idx, cre, ann in mono}
            factors = []
            for i, d in enumerate(dims):
                cre, ann = powers.get(i, (0, 0))
                a = ladders[i]
                f = np.linalg.matrix_power(a.conj().T, cre) @ \
                    np.linalg.matrix_power(a, ann) if (cre or ann) else np.eye(d)
                factors.append(f)
            m = factors[0]
            for f in factors[1:]:
                m = np.kron(m, f)
            out += coef * m
        return out

    # ---- formatting ----

    def __repr__(self):
        return f"OperatorExpr({pretty(self)!r})"

    def __str__(self):
        return pretty(self)


def _mono_degree(mono: Monomial) -> int:
    return sum(c + a for _, c, a in mono)


def _ladder(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        a[k - 1, k] = math.sqrt(k)
    return a


def _pair_product(d1: int, c2: int):
    """Normal-order a^d1 * ad^c2 for one mode.

    a^m ad^n = sum_k k! C(m,k) C(n,k) ad^(n-k) a^(m-k); the integer
    factors are exact.
    """
    for k in range(min(d1, c2) + 1):
        factor = math.factorial(k) * math.comb(d1, k) * math.comb(c2, k)
        yield c2 - k, d1 - k, factor


def _mono_product(m1: Monomial, m2: Monomial):
    """All normal-ordered monomials of m1*m2 with their integer factors.

    Distinct modes commute, so the expansion is the per-mode cartesian
    product of single-mode reorderings.
    """
    p1 = {idx: (c, a) for idx, c, a in m1}
    p2 = {idx: (c, a) for idx, c, a in m2}
    results: list[tuple[list[tuple[int, int, int]], int]] = [([], 1)]
    for idx in sorted(p1.keys() | p2.keys()):
        c1, d1 = p1.get(idx, (0, 0))
        c2, d2 = p2.get(idx, (0, 0))
        options = []
        for cre_mid, ann_mid, factor in _pair_product(d1, c2):
            cre = c1 + cre_mid
            ann = ann_mid + d2
            options.append(((idx, cre, ann) if (cre or ann) else None, factor))
        new_results = []
        for partial, pf in results:
            for entry, factor in options:
                lst = partial if entry is None else partial + [entry]
                new_results.append((lst, pf * factor))
        results = new_results
    for entries, factor in results:
        yield tuple(entries), factor


# ---- pretty printing ----

def _fmt_float(x: float) -> str:
    s = f"{x:.12g}"
    return s


def _fmt_coef(c: complex) -> str:
    if c.imag == 0.0:
        return _fmt_float(c.real)
    if c.real == 0.0:
        return _fmt_float(c.imag) + "i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({_fmt_float(c.real)}{sign}{_fmt_float(abs(c.imag))}i)"


def monomial_str(registry: ModeRegistry, mono: Monomial) -> str:
    if mono == SCALAR_MONO:
        return "1"
    parts = []
    for idx, cre, ann in mono:
        name = registry.names[idx]
        if cre:
            parts.append(f"{name}d" + (f"^{cre}" if cre > 1 else ""))
        if ann:
            parts.append(f"{name}" + (f"^{ann}" if ann > 1 else ""))
    return "*".join(parts)


def pretty(expr: OperatorExpr) -> str:
    """Readable canonical form, e.g. ``0.5i*ad*b - 0.5i*a*bd``.

    Terms are ordered by monomial key, so the output is stable and usable
    in golden-file comparisons.
    """
    if not expr.terms:
        return "0"

    def order(mono: Monomial):
        # scalars first, then creation-heavy monomials (ad*b before a*bd)
        return tuple((idx, -cre, -ann) for idx, cre, ann in mono)

    pieces = []
    for mono in sorted(expr.terms, key=order):
        coef = expr.terms[mono]
        mstr = monomial_str(expr.registry, mono)
        # pull a leading minus out of pure-real / pure-imag coefficients
        neg = (coef.imag == 0 and coef.real < 0) or \
              (coef.real == 0 and coef.imag < 0)
        mag = -coef if neg else coef
        cstr = _fmt_coef(mag)
        if mono == SCALAR_MONO:
            body = cstr
        elif cstr == "1":
            body = mstr
        else:
            body = f"{cstr}*{mstr}"
        if not pieces:
            pieces.append(("-" if neg else "") + body)
        else:
            pieces.append(("- " if neg else "+ ") + body)
    return " ".join(pieces)
