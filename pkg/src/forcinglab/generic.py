"""Dense sets, filters and generic filters on finite posets.

At desk scale the "ground model" sees every subset, so a generic filter is
one meeting every dense subset outright.  For a finite poset those are
exactly the upward closures of the minimal elements; :func:`enumerate_generics`
computes both characterizations and cross-checks them on small posets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .config import DEFAULT_CAPS, Caps
from .poset import Poset, _mask_bits


@dataclass(frozen=True)
class Filter:
    """Upward-closed, downward-directed subset containing top."""

    poset: Poset
    mask: int

    def __post_init__(self):
        if not is_filter(self.mask, self.poset):
            raise ValueError("mask is not a filter")

    def __contains__(self, p: int) -> bool:
        return bool((self.mask >> p) & 1)


@dataclass(frozen=True)
class GenericSet:
    """A filter meeting every dense subset, with a witness certificate.

    ``certificate`` maps each enumerated dense subset (as a mask) to a member
    of the filter inside it; it is materialized only for posets small enough
    to sweep (see ``Caps.dense_enum_max``), and ``certified`` records that.
    """

    poset: Poset
    mask: int
    atom: int
    certificate: dict = field(default_factory=dict, compare=False)
    certified: bool = field(default=False, compare=False)

    def __contains__(self, p: int) -> bool:
        return bool((self.mask >> p) & 1)


def is_filter(mask: int, poset: Poset) -> bool:
    if not (mask >> poset.top) & 1:
        return False
    for p in _mask_bits(mask):
        if poset.above[p] & ~mask:
            return False
    for p in _mask_bits(mask):
        for q in _mask_bits(mask):
            if not any((mask >> r) & 1
                       for r in _mask_bits(poset.below[p] & poset.below[q])):
                return False
    return True


def dense_subsets(poset: Poset) -> Iterator[int]:
    """All dense subsets, streamed.

    A subset is dense iff it meets every lower cone; since atoms have
    singleton cones, the dense subsets are exactly the supersets of the atom
    set, and every superset of the atoms is dense.
    """
    rest = poset.full_mask & ~poset.atom_mask
    free = list(_mask_bits(rest))
    for bits in range(1 << len(free)):
        extra = 0
        for i, p in enumerate(free):
            if (bits >> i) & 1:
                extra |= 1 << p
        yield poset.atom_mask | extra


def is_dense(mask: int, poset: Poset) -> bool:
    for p in range(poset.n):
        if not poset.below[p] & mask:
            return False
    return True


def enumerate_generics(poset: Poset, caps: Caps = DEFAULT_CAPS) -> list[GenericSet]:
    """All generic filters: one per atom, cross-checked against the
    meets-every-dense-set characterization on small posets."""
    out = []
    for a in poset.atoms:
        mask = poset.above[a]
        cert: dict = {}
        certified = False
        if poset.n <= caps.dense_enum_max:
            cert = {d: a for d in dense_subsets(poset)}
            certified = True
        out.append(GenericSet(poset, mask, a, cert, certified))
    if poset.n <= caps.filter_crosscheck_max:
        brute = _filters_meeting_all_dense(poset)
        if brute != sorted(g.mask for g in out):
            raise AssertionError(
                "generic-filter characterizations disagree on "
                f"{poset!r}: atoms give {[g.mask for g in out]}, brute force gives {brute}")
    return out


def _filters_meeting_all_dense(poset: Poset) -> list[int]:
    dense = list(dense_subsets(poset))
    found = []
    for mask in range(1, 1 << poset.n):
        if not is_filter(mask, poset):
            continue
        if all(mask & d for d in dense):
            found.append(mask)
    return sorted(found)


def generic_containing(generics: list[GenericSet], p: int) -> list[GenericSet]:
    return [g for g in generics if p in g]


def forces(p: int, formula, universe) -> bool:
    """p forces f  iff  the principal cut of p lies inside ||f||.

    ``universe`` is a :class:`forcinglab.names.NameUniverse`; for posets that
    were quotiented on algebra construction, p is mapped through the quotient
    first.
    """
    from .names import truth_value

    algebra = universe.algebra
    value = truth_value(formula, universe)
    base = algebra.base
    if algebra.quotient_map is not None and p < len(algebra.quotient_map):
        p = algebra.quotient_map[p]
    cut = base.principal_cut(p)
    return not cut & ~value
