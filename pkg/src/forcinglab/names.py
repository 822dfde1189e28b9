"""Boolean-valued names over a regular-open algebra, and their semantics.

A name is a hereditarily finite set of (name, regular cut) pairs.  Canonical
form: entries with cut zero are dropped and duplicate sub-names merge by
joining their cuts, neither of which changes any truth value.  Truth values
follow the atomic clauses

    ||x in y|| = Sum_{t in dom y} ||t = x|| * y(t)
    ||x = y||  = Prod_{t in dom x} (-x(t) + ||t in y||)
               * Prod_{t in dom y} (-y(t) + ||t in x||)

with connectives mapped to algebra operations and the existential quantifier
bounded over an explicitly supplied finite universe.  The recursion is
memoized on name pairs, mirroring the rank-pair induction that makes the
clauses well founded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .boolalg import BoolAlgebra
from .config import DEFAULT_CAPS, CapExceeded
from .formula import (And, Const, Equality, Exists, ForAll, Formula,
                      FormulaError, Implies, Membership, Not, Or, Term,
                      free_variables)
from .hfset import HFSet, element_code, element_code_value


class UniverseCapExceeded(CapExceeded):
    pass


class Name:
    """Canonical Boolean-valued name.  Immutable and structurally hashable."""

    __slots__ = ("entries", "key", "rank")

    def __init__(self, entries: Iterable[tuple["Name", int]], algebra: BoolAlgebra):
        merged: dict[Name, int] = {}
        for sub, cut in entries:
            if cut == algebra.zero:
                continue
            algebra._require(cut)
            if sub in merged:
                merged[sub] = algebra.join(merged[sub], cut)
            else:
                merged[sub] = cut
        es = tuple(sorted(merged.items(), key=lambda e: e[0].key))
        self.entries = es
        self.key = tuple((sub.key, cut) for sub, cut in es)
        self.rank = 0 if not es else 1 + max(sub.rank for sub, _ in es)

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, Name) and self.key == other.key

    def __repr__(self):
        if not self.entries:
            return "{}"
        return "{" + ", ".join(f"({sub!r},{cut:#x})" for sub, cut in self.entries) + "}"


def make_name(entries: Iterable[tuple[Name, int]], algebra: BoolAlgebra) -> Name:
    return Name(entries, algebra)


def empty_name(algebra: BoolAlgebra) -> Name:
    return Name((), algebra)


def check_name(x: HFSet, algebra: BoolAlgebra,
               _memo: dict | None = None) -> Name:
    """The canonical ground name for x: entries {(y-check, one) : y in x}."""
    memo = _memo if _memo is not None else {}
    got = memo.get(x)
    if got is None:
        got = Name(((check_name(y, algebra, memo), algebra.one) for y in x.members),
                   algebra)
        memo[x] = got
    return got


def evaluate(name: Name, generic_mask: int, _memo: dict | None = None) -> HFSet:
    """i_G: a member enters the evaluation when its cut meets the filter."""
    memo = _memo if _memo is not None else {}
    key = (name, generic_mask)
    got = memo.get(key)
    if got is None:
        got = HFSet(evaluate(sub, generic_mask, memo)
                    for sub, cut in name.entries if cut & generic_mask)
        memo[key] = got
    return got


def mix_name(values: Sequence[tuple[int, Name]], algebra: BoolAlgebra) -> Name:
    """A name evaluating to values[i][1] under the generic of atom values[i][0].

    Classic mixing over the antichain of atoms: every entry of each branch
    name is restricted to that branch's principal cut.
    """
    entries: list[tuple[Name, int]] = []
    for atom, branch in values:
        u = algebra.base.principal_cut(atom)
        for sub, cut in branch.entries:
            entries.append((sub, algebra.meet(u, cut)))
    return Name(entries, algebra)


def pair_name(a: Name, b: Name, algebra: BoolAlgebra) -> Name:
    """Name of the Kuratowski pair of the denotations of a and b."""
    single = Name(((a, algebra.one),), algebra)
    double = Name(((a, algebra.one), (b, algebra.one)), algebra)
    return Name(((single, algebra.one), (double, algebra.one)), algebra)


@dataclass(frozen=True)
class NameUniverse:
    """All names of rank <= rank_bound over one algebra, canonically ordered."""

    algebra: BoolAlgebra
    rank_bound: int
    names: tuple[Name, ...]
    exhaustive: bool = True

    def __len__(self):
        return len(self.names)

    def constant(self, k: int) -> Name:
        try:
            return self.names[k]
        except IndexError:
            raise FormulaError(f"constant ${k} outside the active universe")


def universe_size(algebra: BoolAlgebra, rank_bound: int) -> int:
    """Size of the full rank-bounded universe, computed without materializing."""
    count = 1
    options = len(algebra.nonzero) + 1
    for _ in range(rank_bound):
        count = options ** count
    return count


def name_universe(algebra: BoolAlgebra, rank_bound: int,
                  cap: int | None = None) -> NameUniverse:
    """Materialize every canonical name of rank <= rank_bound.

    Sizes grow doubly exponentially; the configured cap aborts rather than
    thrash.
    """
    limit = DEFAULT_CAPS.universe_cap if cap is None else cap
    size = universe_size(algebra, rank_bound)
    if size > limit:
        raise UniverseCapExceeded(
            f"universe of rank {rank_bound} has {size} names, above the cap {limit}")
    layer: list[Name] = [empty_name(algebra)]
    for _ in range(rank_bound):
        nxt: set[Name] = set()
        # a canonical name of the next layer is a partial map layer -> nonzero
        per_sub = [len(algebra.nonzero) + 1] * len(layer)
        for choice in itertools.product(*[range(c) for c in per_sub]):
            entries = []
            for sub, pick in zip(layer, choice):
                if pick:
                    entries.append((sub, algebra.nonzero[pick - 1]))
            nxt.add(Name(entries, algebra))
        layer = sorted(nxt, key=lambda n: n.key)
    return NameUniverse(algebra, rank_bound, tuple(layer))


def sampled_universe(algebra: BoolAlgebra, rank_bound: int,
                     cap: int | None = None,
                     max_entries: int = 2) -> NameUniverse:
    """Deterministic structured fallback when the full universe is over cap.

    Takes the largest fully-materializable rank r < rank_bound, then extends
    it with every name of <= max_entries entries over that layer, capped.
    Flagged non-exhaustive.
    """
    limit = DEFAULT_CAPS.universe_cap if cap is None else cap
    r = rank_bound
    while r > 0 and universe_size(algebra, r) > limit:
        r -= 1
    base = name_universe(algebra, r, cap=limit)
    if r == rank_bound:
        return base
    names = set(base.names)
    pool = sorted(names, key=lambda n: n.key)
    for count in range(1, max_entries + 1):
        for subs in itertools.combinations(pool, count):
            for cuts in itertools.product(algebra.nonzero, repeat=count):
                if len(names) >= limit:
                    break
                names.add(Name(tuple(zip(subs, cuts)), algebra))
            if len(names) >= limit:
                break
        if len(names) >= limit:
            break
    ordered = tuple(sorted(names, key=lambda n: (n.rank, n.key)))
    return NameUniverse(algebra, rank_bound, ordered, exhaustive=False)


# -- truth values ----------------------------------------------------------


class TruthSession:
    """Memoized truth-value computation over one algebra and universe.

    Sessions are independent; share nothing mutable between concurrent ones.
    """

    def __init__(self, universe: NameUniverse,
                 constants: Sequence[Name] | None = None):
        self.universe = universe
        self.algebra = universe.algebra
        self.constants = constants
        self._in: dict[tuple, int] = {}
        self._eq: dict[tuple, int] = {}

    def member_value(self, x: Name, y: Name) -> int:
        key = (x.key, y.key)
        got = self._in.get(key)
        if got is None:
            A = self.algebra
            got = A.sum(A.meet(self.equal_value(t, x), cut)
                        for t, cut in y.entries)
            self._in[key] = got
        return got

    def equal_value(self, x: Name, y: Name) -> int:
        key = (x.key, y.key)
        got = self._eq.get(key)
        if got is None:
            A = self.algebra
            left = A.product(
                A.join(A.complement(cut), self.member_value(t, y))
                for t, cut in x.entries)
            right = A.product(
                A.join(A.complement(cut), self.member_value(t, x))
                for t, cut in y.entries)
            got = A.meet(left, right)
            self._eq[key] = got
        return got

    def value(self, f: Formula, env: dict[str, Name] | None = None) -> int:
        env = env or {}
        A = self.algebra

        def term(t: Term) -> Name:
            if isinstance(t, Const):
                if self.constants is not None:
                    try:
                        return self.constants[t.index]
                    except IndexError:
                        raise FormulaError(f"constant ${t.index} outside the supplied tuple")
                return self.universe.constant(t.index)
            if t.name not in env:
                raise FormulaError(f"open formula: unbound variable {t.name!r}")
            return env[t.name]

        if isinstance(f, Membership):
            return self.member_value(term(f.left), term(f.right))
        if isinstance(f, Equality):
            return self.equal_value(term(f.left), term(f.right))
        if isinstance(f, Not):
            return A.complement(self.value(f.body, env))
        if isinstance(f, And):
            return A.meet(self.value(f.left, env), self.value(f.right, env))
        if isinstance(f, Or):
            return A.join(self.value(f.left, env), self.value(f.right, env))
        if isinstance(f, Implies):
            return A.join(A.complement(self.value(f.left, env)),
                          self.value(f.right, env))
        if isinstance(f, Exists):
            return A.sum(self.value(f.body, {**env, f.var: n})
                         for n in self.universe.names)
        if isinstance(f, ForAll):
            return A.complement(A.sum(
                A.complement(self.value(f.body, {**env, f.var: n}))
                for n in self.universe.names))
        raise TypeError(f"not a formula: {f!r}")


def truth_value(f: Formula, universe: NameUniverse) -> int:
    """||f|| as a regular cut; f must be closed over the universe."""
    free = free_variables(f)
    if free:
        raise FormulaError(f"open formula: unbound variables {sorted(free)}")
    return TruthSession(universe).value(f)


def holds_in_extension(f: Formula, universe: NameUniverse, generic_mask: int,
                       constants: Sequence[Name] | None = None) -> bool:
    """Two-valued truth of f over the evaluations of the universe under G."""
    from .formula import eval_classical

    memo: dict = {}
    pool = universe.names if constants is None else constants
    consts = [evaluate(n, generic_mask, memo) for n in pool]
    domain = sorted({evaluate(n, generic_mask, memo) for n in universe.names},
                    key=lambda h: h.code)
    return eval_classical(f, domain, consts)


# -- numeral helpers used by the iteration machinery ------------------------


def element_name(element: int, algebra: BoolAlgebra,
                 _memo: dict | None = None) -> Name:
    """Check-name of the flat encoding of a step-poset element id."""
    return check_name(element_code(element), algebra, _memo)


def decode_element(x: HFSet) -> int | None:
    return element_code_value(x)
