"""Finite partial orders with a maximal element, and the cut calculus on them.

Conventions used throughout the library:

    - Elements of a poset are the dense integers 0..n-1; user-facing ids live
      in ``labels``.
    - Subsets of a poset (cuts, filters, dense sets) are int bitmasks over
      those indexes: bit p set means element p is in the subset.
    - ``below[p]`` is the lower cone of p (including p itself), ``above[p]``
      the upper cone, ``compat[p]`` the set of elements compatible with p
      (sharing a lower bound).  All three are precomputed on construction.

A cut is a downward-closed bitmask.  A regular cut additionally satisfies
u == -(-u), where -u is the set of elements incompatible with everything in
u.  In a finite poset the regular cuts are exactly the sets
``{p : atoms(p) <= A}`` for a subset A of the atoms (minimal elements), which
is what makes exhaustive Boolean-algebra work feasible here.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Iterator, Sequence


class PosetError(ValueError):
    """Raised when the input relation is not a partial order with top."""


def _mask_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class Poset:
    """Immutable finite partial order with a maximal element.

    ``below`` must already be reflexive, transitive and antisymmetric; use
    :func:`validate_poset` to build one from raw pairs.  Instances are safe
    to share between concurrent workers; nothing is mutated after
    construction.
    """

    __slots__ = (
        "n", "top", "labels", "below", "above", "compat",
        "full_mask", "atom_mask", "_atoms", "_canonical_key", "_separative",
    )

    def __init__(self, below: Sequence[int], top: int,
                 labels: Sequence[str] | None = None):
        n = len(below)
        if n == 0:
            raise PosetError("poset needs at least one element")
        full = (1 << n) - 1
        below = tuple(below)
        for p in range(n):
            if not (below[p] >> p) & 1:
                raise PosetError(f"relation is not reflexive at {p}")
            if below[p] & ~full:
                raise PosetError(f"dangling element bits below {p}")
        for p in range(n):
            for q in _mask_bits(below[p]):
                if q != p and (below[q] >> p) & 1:
                    raise PosetError(f"cycle detected between {p} and {q}")
                if below[q] & ~below[p]:
                    raise PosetError(f"relation is not transitive at {q} <= {p}")
        if below[top] != full:
            raise PosetError(f"top {top} is not above every element")
        self.n = n
        self.top = top
        self.full_mask = full
        self.below = below
        above = [0] * n
        for p in range(n):
            for q in _mask_bits(below[p]):
                above[q] |= 1 << p
        self.above = tuple(above)
        # p compatible q  iff  their lower cones intersect
        compat = [0] * n
        for p in range(n):
            m = 0
            for q in range(n):
                if below[p] & below[q]:
                    m |= 1 << q
            compat[p] = m
        self.compat = tuple(compat)
        self.atom_mask = 0
        atoms = []
        for p in range(n):
            if below[p] == 1 << p:
                atoms.append(p)
                self.atom_mask |= 1 << p
        self._atoms = tuple(atoms)
        self.labels = tuple(labels) if labels is not None else tuple(
            f"e{p}" for p in range(n))
        if len(self.labels) != n:
            raise PosetError("label count does not match element count")
        self._canonical_key = None
        self._separative = None

    # -- basic queries -------------------------------------------------

    def leq(self, p: int, q: int) -> bool:
        return bool((self.below[q] >> p) & 1)

    def incompatible(self, p: int, q: int) -> bool:
        return not self.below[p] & self.below[q]

    @property
    def atoms(self) -> tuple[int, ...]:
        """Minimal elements."""
        return self._atoms

    def atoms_below(self, p: int) -> int:
        return self.below[p] & self.atom_mask

    def principal_cut(self, p: int) -> int:
        """U_p = the lower cone of p, always a regular cut when separative."""
        return self.below[p]

    def is_downward_closed(self, mask: int) -> bool:
        acc = 0
        for p in _mask_bits(mask):
            acc |= self.below[p]
        return acc == mask

    def downward_closure(self, mask: int) -> int:
        acc = 0
        for p in _mask_bits(mask):
            acc |= self.below[p]
        return acc

    def upward_closure(self, mask: int) -> int:
        acc = 0
        for p in _mask_bits(mask):
            acc |= self.above[p]
        return acc

    def __repr__(self) -> str:
        pairs = [f"{self.labels[p]}<{self.labels[q]}"
                 for p in range(self.n) for q in range(self.n)
                 if p != q and self.leq(p, q)]
        return f"Poset({self.n}; top={self.labels[self.top]}; {', '.join(pairs)})"

    # -- isomorphism machinery ----------------------------------------

    def relabel(self, perm: Sequence[int]) -> "Poset":
        """Copy with element p renamed perm[p]."""
        n = self.n
        below = [0] * n
        labels = [""] * n
        for p in range(n):
            m = 0
            for q in _mask_bits(self.below[p]):
                m |= 1 << perm[q]
            below[perm[p]] = m
            labels[perm[p]] = self.labels[p]
        return Poset(below, perm[self.top], labels)

    def canonical_key(self, perm_max: int = 9):
        """Isomorphism-invariant key: lexicographically least relation matrix.

        Brute force over permutations, pruned by local invariants; intended
        for desk-scale posets only (n <= perm_max).
        """
        if self._canonical_key is not None:
            return self._canonical_key
        n = self.n
        if n > perm_max:
            raise CanonicalFormError(
                f"canonical form by permutation search capped at {perm_max} elements")
        inv = self._invariants()
        groups: dict[tuple, list[int]] = {}
        for p in range(n):
            groups.setdefault(inv[p], []).append(p)
        ordered_groups = [groups[k] for k in sorted(groups)]
        best = None
        for perm in self._group_perms(ordered_groups):
            key = self._matrix_key(perm)
            if best is None or key < best:
                best = key
        self._canonical_key = (n, best)
        return self._canonical_key

    def _invariants(self) -> list[tuple]:
        n = self.n
        base = [(bin(self.below[p]).count("1"),
                 bin(self.above[p]).count("1"),
                 bin(self.compat[p]).count("1")) for p in range(n)]
        # one refinement round: multiset of neighbour invariants
        ref = []
        for p in range(n):
            down = tuple(sorted(base[q] for q in _mask_bits(self.below[p])))
            up = tuple(sorted(base[q] for q in _mask_bits(self.above[p])))
            ref.append(base[p] + (down, up))
        return ref

    def _group_perms(self, groups: list[list[int]]) -> Iterator[list[int]]:
        """All permutations mapping each invariant group onto a block of slots."""
        slots = []
        start = 0
        for g in groups:
            slots.append(list(range(start, start + len(g))))
            start += len(g)
        perm = [0] * self.n
        def rec(i: int) -> Iterator[list[int]]:
            if i == len(groups):
                yield perm
                return
            for assignment in itertools.permutations(slots[i]):
                for p, s in zip(groups[i], assignment):
                    perm[p] = s
                yield from rec(i + 1)
        yield from rec(0)

    def _matrix_key(self, perm: Sequence[int]) -> bytes:
        n = self.n
        out = bytearray(n * n)
        for p in range(n):
            row = self.below[p]
            for q in _mask_bits(row):
                out[perm[q] * n + perm[p]] = 1
        return bytes(out)

    def automorphisms(self) -> list[tuple[int, ...]]:
        """All order-preserving permutations of the elements."""
        n = self.n
        inv = self._invariants()
        cand = [[q for q in range(n) if inv[q] == inv[p]] for p in range(n)]
        out: list[tuple[int, ...]] = []
        perm = [-1] * n
        used = [False] * n
        def rec(p: int):
            if p == n:
                out.append(tuple(perm))
                return
            for q in cand[p]:
                if used[q]:
                    continue
                ok = True
                for r in range(p):
                    if self.leq(r, p) != self.leq(perm[r], q) or \
                       self.leq(p, r) != self.leq(q, perm[r]):
                        ok = False
                        break
                if ok:
                    perm[p] = q
                    used[q] = True
                    rec(p + 1)
                    used[q] = False
            perm[p] = -1
        rec(0)
        return out


class CanonicalFormError(RuntimeError):
    pass


# -- construction -------------------------------------------------------


def validate_poset(elements: Iterable, leq_pairs: Iterable[tuple], top) -> Poset:
    """Build a poset from raw `x <= y` pairs.

    The relation is closed reflexively and transitively (so Hasse-diagram
    input is fine); a closure that fails antisymmetry, a non-maximal top or a
    pair mentioning an unknown element is an error.
    """
    labels = [str(e) for e in elements]
    if not labels:
        raise PosetError("poset needs at least one element")
    if len(set(labels)) != len(labels):
        raise PosetError("duplicate element ids")
    index = {lab: i for i, lab in enumerate(labels)}
    if str(top) not in index:
        raise PosetError(f"dangling element id {top!r} used as top")
    n = len(labels)
    below = [1 << p for p in range(n)]
    for x, y in leq_pairs:
        if str(x) not in index:
            raise PosetError(f"dangling element id {x!r}")
        if str(y) not in index:
            raise PosetError(f"dangling element id {y!r}")
        below[index[str(y)]] |= 1 << index[str(x)]
    # transitive closure over the mask representation
    changed = True
    while changed:
        changed = False
        for p in range(n):
            acc = below[p]
            for q in _mask_bits(below[p]):
                acc |= below[q]
            if acc != below[p]:
                below[p] = acc
                changed = True
    for p in range(n):
        for q in _mask_bits(below[p]):
            if q != p and (below[q] >> p) & 1:
                raise PosetError(
                    f"cycle detected: {labels[p]} and {labels[q]} are mutually below each other")
    t = index[str(top)]
    if below[t] != (1 << n) - 1:
        raise PosetError(f"top {top!r} is not above every element")
    return Poset(below, t, labels)


# -- separativity and quotients -----------------------------------------


def is_separative(poset: Poset) -> bool:
    """Whenever p is not below q, some extension of p is incompatible with q."""
    if poset._separative is not None:
        return poset._separative
    ok = True
    for p in range(poset.n):
        for q in range(poset.n):
            if not poset.leq(p, q) and not poset.below[p] & ~poset.compat[q]:
                ok = False
                break
        if not ok:
            break
    poset._separative = ok
    return ok


def separative_quotient(poset: Poset) -> tuple[Poset, tuple[int, ...]]:
    """Quotient by "compatible with the same elements", ordered by
    "every extension of x is compatible with y".

    Returns the quotient poset and the class map (element -> class index).
    The result is separative, the map is order-preserving and sends top to
    top.
    """
    classes: dict[int, int] = {}
    mapping = []
    members: list[list[int]] = []
    for p in range(poset.n):
        key = poset.compat[p]
        if key not in classes:
            classes[key] = len(classes)
            members.append([])
        mapping.append(classes[key])
        members[classes[key]].append(p)
    m = len(classes)
    reps = [mem[0] for mem in members]
    below = [0] * m
    for ci in range(m):
        for cj in range(m):
            # [x] <= [y]  iff  every extension of x is compatible with y
            if not poset.below[reps[ci]] & ~poset.compat[reps[cj]]:
                below[cj] |= 1 << ci
    labels = ["+".join(sorted(poset.labels[p] for p in mem)) for mem in members]
    quot = Poset(below, mapping[poset.top], labels)
    if not is_separative(quot):
        raise AssertionError("separative quotient failed to be separative")
    return quot, tuple(mapping)


# -- cut calculus --------------------------------------------------------


def is_dense_below(s: int, p: int, poset: Poset) -> bool:
    """True iff every q <= p has an extension inside s."""
    if not 0 <= p < poset.n:
        raise PosetError(f"element {p} not in poset")
    for q in _mask_bits(poset.below[p]):
        if not poset.below[q] & s:
            return False
    return True


def complement_cut(u: int, poset: Poset) -> int:
    """-u = elements incompatible with everything in u; always a regular cut."""
    out = 0
    for p in range(poset.n):
        if not poset.compat[p] & u:
            out |= 1 << p
    return out


def regularize(u: int, poset: Poset) -> int:
    """-(-u): the least regular cut containing u.  Idempotent."""
    return complement_cut(complement_cut(u, poset), poset)


def is_regular_cut(u: int, poset: Poset) -> bool:
    return poset.is_downward_closed(u) and regularize(u, poset) == u


def cut_of_atom_set(atom_mask: int, poset: Poset) -> int:
    """The regular cut {p : atoms(p) <= atom_mask}."""
    out = 0
    for p in range(poset.n):
        if not poset.atoms_below(p) & ~atom_mask:
            out |= 1 << p
    return out


# -- small builders and isomorph-reduced generation ----------------------


def antichain_with_top(k: int) -> Poset:
    """k pairwise-incompatible atoms under a common top."""
    below = [1 << p for p in range(k)]
    below.append((1 << (k + 1)) - 1)
    labels = [chr(ord("a") + p) for p in range(k)] + ["1"]
    return Poset(below, k, labels)


def chain_poset(k: int) -> Poset:
    """A k-element chain, element 0 at the bottom."""
    below = [(1 << (p + 1)) - 1 for p in range(k)]
    return Poset(below, k - 1, [f"c{p}" for p in range(k)])


def diamond_poset() -> Poset:
    """Top over two elements over a single bottom."""
    return validate_poset(["1", "a", "b", "c"],
                          [("c", "a"), ("c", "b"), ("a", "1"), ("b", "1")], "1")


def point_poset() -> Poset:
    return Poset([1], 0, ["1"])


@lru_cache(maxsize=None)
def _posets_on(k: int) -> tuple[Poset, ...]:
    """All posets on k labeled-then-canonicalized elements, one per iso class.

    Every finite poset has a linear extension, so each iso class has a
    representative whose strict relation sits in the upper triangle; we
    enumerate those and deduplicate by canonical form.
    """
    if k == 0:
        return ()
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    seen: dict = {}
    for bits in range(1 << len(pairs)):
        below = [1 << p for p in range(k)]
        for idx, (i, j) in enumerate(pairs):
            if (bits >> idx) & 1:
                below[j] |= 1 << i
        changed = True
        while changed:
            changed = False
            for p in range(k):
                acc = below[p]
                for q in _mask_bits(below[p]):
                    acc |= below[q]
                if acc != below[p]:
                    below[p] = acc
                    changed = True
        # upper-triangular strict part: antisymmetry is automatic
        post = _PosetNoTop(tuple(below))
        key = post.key()
        if key not in seen:
            seen[key] = tuple(below)
    return tuple(seen.values())


class _PosetNoTop:
    """Throwaway wrapper so canonical keys work without a top element."""

    def __init__(self, below: tuple[int, ...]):
        self.below = below

    def key(self):
        n = len(self.below)
        best = None
        for perm in itertools.permutations(range(n)):
            out = bytearray(n * n)
            for p in range(n):
                for q in _mask_bits(self.below[p]):
                    out[perm[q] * n + perm[p]] = 1
            b = bytes(out)
            if best is None or b < best:
                best = b
        return (n, best)


def all_posets_with_top(max_size: int) -> Iterator[Poset]:
    """All posets with a maximal element, sizes 1..max_size, one per iso
    class, in a deterministic order."""
    for n in range(1, max_size + 1):
        k = n - 1
        if k == 0:
            yield point_poset()
            continue
        for below_rest in sorted(_posets_on(k)):
            below = list(below_rest)
            below.append((1 << n) - 1)
            labels = [f"e{p}" for p in range(k)] + ["1"]
            yield Poset(below, k, labels)


def all_separative_posets(max_size: int) -> Iterator[Poset]:
    for p in all_posets_with_top(max_size):
        if is_separative(p):
            yield p


def product_poset(components: Sequence[Poset]) -> tuple[Poset, tuple[tuple[int, ...], ...]]:
    """Componentwise-ordered product; returns the poset and the element tuples."""
    if not components:
        return point_poset(), ((),)
    tuples = list(itertools.product(*[range(c.n) for c in components]))
    index = {t: i for i, t in enumerate(tuples)}
    below = [0] * len(tuples)
    for ti, t in enumerate(tuples):
        for si, s in enumerate(tuples):
            if all(c.leq(s[k], t[k]) for k, c in enumerate(components)):
                below[ti] |= 1 << si
    top = index[tuple(c.top for c in components)]
    labels = ["(" + ",".join(components[k].labels[t[k]]
                             for k in range(len(components))) + ")" for t in tuples]
    return Poset(below, top, labels), tuple(tuples)
