"""The regular-open completion of a finite poset as a concrete Boolean algebra.

The algebra is materialized eagerly: its elements are all regular cuts of the
base poset, one per subset of the atoms, with meet = intersection, join =
regularize-of-union and complement = incompatibility complement.  Eager
materialization is what lets the law suite and the completeness checker be
exhaustive instead of sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .config import DEFAULT_CAPS, CapExceeded
from .poset import (Poset, _mask_bits, complement_cut, cut_of_atom_set,
                    is_separative, regularize, separative_quotient)


class AlgebraError(ValueError):
    """Mixed-algebra operands or a non-member cut."""


class BoolAlgebra:
    """All regular cuts of a separative base poset.

    ``elements`` are cut masks sorted ascending; ``zero`` is the empty cut
    and ``one`` the full one.  If the input poset was not separative it is
    quotiented first: ``original``/``quotient_map`` report that, and the
    algebra's cuts are cuts of ``base`` (the quotient).
    """

    __slots__ = ("base", "original", "quotient_map", "elements", "index",
                 "zero", "one", "_atomset_of", "_cut_of_atomset", "_nonzero")

    def __init__(self, base: Poset, original: Poset | None = None,
                 quotient_map: tuple[int, ...] | None = None):
        self.base = base
        self.original = original
        self.quotient_map = quotient_map
        atoms = base.atoms
        k = len(atoms)
        cut_of: dict[int, int] = {}
        atomset_of: dict[int, int] = {}
        for bits in range(1 << k):
            am = 0
            for i in range(k):
                if (bits >> i) & 1:
                    am |= 1 << atoms[i]
            cut = cut_of_atom_set(am, base)
            cut_of[am] = cut
            atomset_of[cut] = am
        self.elements = tuple(sorted(atomset_of))
        self.index = {c: i for i, c in enumerate(self.elements)}
        self.zero = 0
        self.one = base.full_mask
        self._atomset_of = atomset_of
        self._cut_of_atomset = cut_of
        self._nonzero = tuple(c for c in self.elements if c)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, cut: int) -> bool:
        return cut in self._atomset_of

    @property
    def nonzero(self) -> tuple[int, ...]:
        return self._nonzero

    def _require(self, cut: int) -> int:
        try:
            return self._atomset_of[cut]
        except KeyError:
            raise AlgebraError(f"cut {cut:#x} is not a regular cut of this algebra")

    def meet(self, a: int, b: int) -> int:
        return self._cut_of_atomset[self._require(a) & self._require(b)]

    def join(self, a: int, b: int) -> int:
        return self._cut_of_atomset[self._require(a) | self._require(b)]

    def complement(self, a: int) -> int:
        self._require(a)
        return complement_cut(a, self.base)

    def product(self, family: Iterable[int]) -> int:
        """Meet of the whole family; the empty product is one."""
        acc = self._atomset_of[self.one]
        for c in family:
            acc &= self._require(c)
        return self._cut_of_atomset[acc]

    def sum(self, family: Iterable[int]) -> int:
        """Join of the whole family (regularize of the union); empty sum is zero."""
        acc = 0
        for c in family:
            acc |= self._require(c)
        return self._cut_of_atomset[acc]

    def leq(self, a: int, b: int) -> bool:
        return self.meet(a, b) == a

    def principal(self, p: int) -> int:
        return self.base.principal_cut(p)


def ro_algebra(poset: Poset, max_base: int | None = None) -> BoolAlgebra:
    """The regular-open algebra of a poset.

    Non-separative inputs are quotiented first and the quotient map is kept
    on the result.  Posets above the enumeration bound are rejected.
    """
    bound = DEFAULT_CAPS.algebra_max_base if max_base is None else max_base
    if poset.n > bound:
        raise CapExceeded(
            f"poset has {poset.n} elements, above the algebra enumeration bound {bound}")
    if is_separative(poset):
        return BoolAlgebra(poset)
    quot, mapping = separative_quotient(poset)
    return BoolAlgebra(quot, original=poset, quotient_map=mapping)


# -- law suite ------------------------------------------------------------


def boolean_law_violations(algebra: BoolAlgebra) -> list[tuple]:
    """Exhaustively check the Boolean-algebra laws; returns violations.

    Covers associativity, commutativity, distributivity, De Morgan, double
    complement and absorption, each quantified over all element pairs or
    triples of the algebra.
    """
    A = algebra
    out: list[tuple] = []
    els = A.elements
    for a in els:
        if A.complement(A.complement(a)) != a:
            out.append(("double-complement", a))
        if A.meet(a, A.complement(a)) != A.zero:
            out.append(("complement-meet", a))
        if A.join(a, A.complement(a)) != A.one:
            out.append(("complement-join", a))
    for a in els:
        for b in els:
            if A.meet(a, b) != A.meet(b, a):
                out.append(("meet-commutativity", a, b))
            if A.join(a, b) != A.join(b, a):
                out.append(("join-commutativity", a, b))
            if A.complement(A.meet(a, b)) != A.join(A.complement(a), A.complement(b)):
                out.append(("de-morgan-meet", a, b))
            if A.complement(A.join(a, b)) != A.meet(A.complement(a), A.complement(b)):
                out.append(("de-morgan-join", a, b))
            if A.meet(a, A.join(a, b)) != a:
                out.append(("absorption-meet", a, b))
            if A.join(a, A.meet(a, b)) != a:
                out.append(("absorption-join", a, b))
    for a in els:
        for b in els:
            for c in els:
                if A.meet(A.meet(a, b), c) != A.meet(a, A.meet(b, c)):
                    out.append(("meet-associativity", a, b, c))
                if A.join(A.join(a, b), c) != A.join(a, A.join(b, c)):
                    out.append(("join-associativity", a, b, c))
                if A.meet(a, A.join(b, c)) != A.join(A.meet(a, b), A.meet(a, c)):
                    out.append(("distributivity", a, b, c))
    return out


def dense_embedding_violations(algebra: BoolAlgebra) -> list[int]:
    """Nonzero algebra elements with no principal cut below them."""
    base = algebra.base
    bad = []
    for b in algebra.nonzero:
        if not any(not base.principal_cut(p) & ~b for p in range(base.n)):
            bad.append(b)
    return bad


# -- completeness checker ---------------------------------------------------


@dataclass
class HomReport:
    """Outcome of the exhaustive complete-homomorphism check.

    ``counterexamples`` holds up to ``kept`` entries of
    (kind, input family tuple, expected, got); ``violation_count`` is the
    full count.  A preserves_* flag is True iff its kind has no violations.
    """

    preserves_zero_one: bool = True
    preserves_complement: bool = True
    preserves_all_products: bool = True
    preserves_all_sums: bool = True
    counterexamples: list[tuple] = field(default_factory=list)
    violation_count: int = 0
    families_checked: int = 0
    kept: int = 32

    @property
    def ok(self) -> bool:
        return (self.preserves_zero_one and self.preserves_complement
                and self.preserves_all_products and self.preserves_all_sums)

    def _hit(self, kind: str, payload: tuple, expected: int, got: int):
        self.violation_count += 1
        if len(self.counterexamples) < self.kept:
            self.counterexamples.append((kind, payload, expected, got))


def check_complete_hom(h: Mapping[int, int] | Callable[[int], int],
                       A: BoolAlgebra, B: BoolAlgebra,
                       family_cap: int | None = None) -> HomReport:
    """Exhaustively test that h preserves complement and the product and sum
    of every subfamily of A.

    The algebras are finite, so checking every subfamily certifies full
    Sigma-completeness.  Violations are data, not errors; the report lists
    them.  The subfamily sweep is 2^|A| families, guarded by ``family_cap``.
    """
    cap = DEFAULT_CAPS.hom_family_cap if family_cap is None else family_cap
    els = A.elements
    k = len(els)
    if 1 << k > cap:
        raise CapExceeded(
            f"algebra has {k} elements: 2^{k} subfamilies exceed the cap {cap}")
    hv = []
    for c in els:
        v = h[c] if isinstance(h, Mapping) else h(c)
        B._require(v)
        hv.append(v)
    rep = HomReport()
    if hv[A.index[A.zero]] != B.zero:
        rep.preserves_zero_one = False
        rep._hit("zero", (A.zero,), B.zero, hv[A.index[A.zero]])
    if hv[A.index[A.one]] != B.one:
        rep.preserves_zero_one = False
        rep._hit("one", (A.one,), B.one, hv[A.index[A.one]])
    for i, c in enumerate(els):
        got = hv[A.index[A.complement(c)]]
        want = B.complement(hv[i])
        if got != want:
            rep.preserves_complement = False
            rep._hit("complement", (c,), want, got)
    # DP over subfamily bitmasks in atom-set space: O(1) per family per side
    a_atom = [A._atomset_of[c] for c in els]
    b_atom = [B._atomset_of[v] for v in hv]
    n_fam = 1 << k
    a_prod = [0] * n_fam
    a_sum = [0] * n_fam
    b_prod = [0] * n_fam
    b_sum = [0] * n_fam
    a_prod[0] = A._atomset_of[A.one]
    b_prod[0] = B._atomset_of[B.one]
    for m in range(1, n_fam):
        low = m & -m
        i = low.bit_length() - 1
        rest = m ^ low
        a_prod[m] = a_prod[rest] & a_atom[i]
        a_sum[m] = a_sum[rest] | a_atom[i]
        b_prod[m] = b_prod[rest] & b_atom[i]
        b_sum[m] = b_sum[rest] | b_atom[i]
    h_of = {A._atomset_of[c]: B._atomset_of[v] for c, v in zip(els, hv)}
    for m in range(n_fam):
        want = h_of[a_prod[m]]
        if want != b_prod[m]:
            rep.preserves_all_products = False
            fam = tuple(els[i] for i in _mask_bits(m))
            rep._hit("product", fam,
                     B._cut_of_atomset[b_prod[m]],
                     B._cut_of_atomset[want])
        want = h_of[a_sum[m]]
        if want != b_sum[m]:
            rep.preserves_all_sums = False
            fam = tuple(els[i] for i in _mask_bits(m))
            rep._hit("sum", fam,
                     B._cut_of_atomset[b_sum[m]],
                     B._cut_of_atomset[want])
    rep.families_checked = n_fam
    return rep
