"""Finite-stage definable iterations, condition canonicalization, collapse
posets and the toy rank-ladder iteration.

Conditions are stored in *function representation*: a stage-n condition is a
tuple of n coordinates, where coordinate k is either the symbol ``TAIL_ONE``
or a total map from the stage-k generics containing the prefix to elements
of the step poset provided under each generic.  Trailing ones are trimmed
(so earlier-stage conditions literally reappear inside later stages) and an
all-top map is identified with ``TAIL_ONE``.  This is the mutual-order
quotient at finite scale: two literal name tails are equivalent exactly when
they evaluate identically under every generic containing the prefix, i.e.
when they induce the same map.  The literal name-based construction is kept
alongside in the test suite as the cross-validating oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .config import DEFAULT_CAPS, CapExceeded, Caps
from .formula import Formula, FormulaError, eval_classical, free_variables
from .generic import GenericSet, enumerate_generics
from .hfset import (HFSet, encode_function, numeral, rank_segment,
                    transitive_closure)
from .poset import Poset, _mask_bits, is_separative, product_poset
from .report import SuiteReport


class ProviderError(ValueError):
    """A step provider broke its contract (e.g. a non-separative step poset)."""


class _TailOne:
    __slots__ = ()

    def __repr__(self):
        return "1"


TAIL_ONE = _TailOne()

# a coordinate is TAIL_ONE or a sorted tuple of (generic index, element) pairs
Coordinate = _TailOne | tuple
Condition = tuple


def trim(cond: Condition) -> Condition:
    while cond and cond[-1] is TAIL_ONE:
        cond = cond[:-1]
    return cond


def coordinate(cond: Condition, k: int):
    return cond[k] if k < len(cond) else TAIL_ONE


def _cond_label(cond: Condition) -> str:
    if not cond:
        return "<>"
    parts = []
    for coord in cond:
        if coord is TAIL_ONE:
            parts.append("1")
        else:
            parts.append("{" + ",".join(f"{g}:{e}" for g, e in coord) + "}")
    return "<" + ";".join(parts) + ">"


@dataclass
class Stage:
    """One stage of a built iteration: canonical conditions plus the data
    needed to extend it (generics, their paths, and the step posets)."""

    index: int
    conditions: tuple[Condition, ...]
    poset: Poset
    generics: list[GenericSet]
    paths: list[tuple]
    gen_masks: tuple[int, ...]        # per condition: generics containing it
    prev: "Stage | None" = None
    steps: list[Poset | None] = field(default_factory=list)
    path_index: dict = field(default_factory=dict)

    def cond_index(self, cond: Condition) -> int:
        return self._index[cond]

    def __post_init__(self):
        self._index = {c: i for i, c in enumerate(self.conditions)}
        self.path_index = {p: i for i, p in enumerate(self.paths)}

    def gens_of(self, cond_idx: int) -> Iterable[int]:
        return _mask_bits(self.gen_masks[cond_idx])


@dataclass
class StepContext:
    """What a provider rule sees when asked for the next step poset."""

    stage: Stage
    gen_index: int
    path: tuple
    stages: "list[Stage]"

    @property
    def generic(self) -> GenericSet:
        return self.stage.generics[self.gen_index]


class StepProvider:
    """Rule mapping (stage index, generic of that stage) to a separative step
    poset with top, or None for "no unique poset is defined here"."""

    stage_count: int

    def step(self, n: int, ctx: StepContext) -> Poset | None:
        raise NotImplementedError


class TableProvider(StepProvider):
    """Provider backed by literal tables keyed by generic paths."""

    def __init__(self, tables: Sequence[dict]):
        self.tables = [dict(t) for t in tables]
        self.stage_count = len(self.tables)

    def step(self, n: int, ctx: StepContext) -> Poset | None:
        return self.tables[n].get(ctx.path)


@dataclass
class Iteration:
    """A built iteration: stages[0] is the trivial root, stages[k] is P_k."""

    stages: list[Stage]
    provider: StepProvider
    caps: Caps
    partial: bool = False
    context_cache: dict = field(default_factory=dict)

    @property
    def final(self) -> Stage:
        return self.stages[-1]

    def __len__(self):
        return len(self.stages) - 1


def root_stage() -> Stage:
    poset = Poset([1], 0, ["<>"])
    generics = enumerate_generics(poset)
    return Stage(0, ((),), poset, generics, [()], (1,))


def _tail_leq(prev: Stage, gens_i: Iterable[int], tail_i, tail_j) -> bool:
    """Order on tail coordinates below a prefix with generic set gens_i."""
    if tail_j is TAIL_ONE:
        return True
    tj = dict(tail_j)
    if tail_i is TAIL_ONE:
        # acts as the top name only where the step poset exists everywhere
        for g in gens_i:
            q = prev.steps[g]
            if q is None or tj[g] != q.top:
                return False
        return True
    ti = dict(tail_i)
    for g in gens_i:
        if not prev.steps[g].leq(ti[g], tj[g]):
            return False
    return True


def _canonical_tail(prev: Stage, prev_idx: int, tail) -> "Coordinate":
    """Restrict a raw tail map to the prefix's generics; all-top becomes 1."""
    if tail is TAIL_ONE:
        return TAIL_ONE
    tmap = dict(tail)
    gens = list(prev.gens_of(prev_idx))
    out = []
    all_top = True
    for g in gens:
        q = prev.steps[g]
        if q is None:
            raise ProviderError(
                f"tail given where stage {prev.index} has no step poset under generic {g}")
        if g not in tmap:
            raise ProviderError(f"tail map missing generic {g}")
        e = tmap[g]
        if not 0 <= e < q.n:
            raise ProviderError(f"tail value {e} outside step poset under generic {g}")
        if e != q.top:
            all_top = False
        out.append((g, e))
    if all_top:
        return TAIL_ONE
    return tuple(out)


def extend_stage(prev: Stage, steps: Sequence[Poset | None], caps: Caps,
                 explicit_tails: Sequence[tuple[int, object]] | None = None,
                 ) -> Stage | tuple[Stage, list[int]]:
    """Build stage n+1 from stage n.

    With ``explicit_tails`` None, every tail map is enumerated (the
    Definition-1 successor clause); otherwise only the supplied
    (prefix index, raw tail) pairs are admitted and their placement is
    returned alongside the stage.
    """
    n = prev.index
    prev.steps = list(steps)
    conditions: list[Condition] = list(prev.conditions)
    index = {c: i for i, c in enumerate(conditions)}
    placement: list[int] = []

    def place(cond: Condition) -> int:
        got = index.get(cond)
        if got is None:
            got = len(conditions)
            index[cond] = got
            conditions.append(cond)
        return got

    if explicit_tails is None:
        for ci, cond in enumerate(prev.conditions):
            gens = list(prev.gens_of(ci))
            if any(steps[g] is None for g in gens):
                continue
            for combo in itertools.product(*[range(steps[g].n) for g in gens]):
                if all(e == steps[g].top for e, g in zip(combo, gens)):
                    continue
                coord = tuple(zip(gens, combo))
                padded = cond + (TAIL_ONE,) * (n - len(cond)) + (coord,)
                place(padded)
    else:
        for prev_idx, tail in explicit_tails:
            coord = _canonical_tail(prev, prev_idx, tail)
            cond = prev.conditions[prev_idx]
            if coord is TAIL_ONE:
                placement.append(place(cond))
            else:
                padded = cond + (TAIL_ONE,) * (n - len(cond)) + (coord,)
                placement.append(place(padded))

    if len(conditions) > caps.max_stage_conditions:
        raise CapExceeded(
            f"stage {n + 1} has {len(conditions)} conditions, above the cap "
            f"{caps.max_stage_conditions}")

    # order: prefixes compare at stage n, tails pointwise under the prefix
    prev_of = []
    tail_of = []
    for cond in conditions:
        prev_of.append(prev.cond_index(trim(cond[:n])))
        tail_of.append(cond[n] if len(cond) == n + 1 else TAIL_ONE)
    m = len(conditions)
    below = [0] * m
    prev_below = prev.poset.below
    for i in range(m):
        pi = prev_of[i]
        gens_i = list(prev.gens_of(pi))
        for j in range(m):
            if not (prev_below[prev_of[j]] >> pi) & 1:
                continue
            if _tail_leq(prev, gens_i, tail_of[i], tail_of[j]):
                below[j] |= 1 << i
    poset = Poset(below, index[()], [_cond_label(c) for c in conditions])
    generics = enumerate_generics(poset, caps)
    paths = []
    for g in generics:
        atom_cond = conditions[g.atom]
        p_idx = prev_of[g.atom]
        tail = tail_of[g.atom]
        prev_gen = None
        for pg in range(len(prev.generics)):
            if (prev.gen_masks[p_idx] >> pg) & 1:
                prev_gen = pg
                break
        if tail is TAIL_ONE:
            paths.append(prev.paths[prev_gen] + (None,))
        else:
            paths.append(prev.paths[prev_gen] + (dict(tail)[prev_gen],))
    gen_masks = []
    for i in range(m):
        mask = 0
        for gi, g in enumerate(generics):
            if (g.mask >> i) & 1:
                mask |= 1 << gi
        gen_masks.append(mask)
    stage = Stage(n + 1, tuple(conditions), poset, generics, paths,
                  tuple(gen_masks), prev=prev)
    if explicit_tails is None:
        return stage
    return stage, placement


def build_iteration(provider: StepProvider, caps: Caps = DEFAULT_CAPS,
                    allow_partial: bool = False) -> Iteration:
    """Run the staged construction: P_1 from the base clause, P_{n+1} from
    canonical (condition, tail) pairs, quotiented by mutual order."""
    if provider.stage_count > caps.max_stages:
        raise CapExceeded(
            f"provider has {provider.stage_count} stages, above the cap {caps.max_stages}")
    stages = [root_stage()]
    partial = False
    for n in range(provider.stage_count):
        stage = stages[-1]
        steps: list[Poset | None] = []
        for gi in range(len(stage.generics)):
            q = provider.step(n, StepContext(stage, gi, stage.paths[gi], stages))
            if q is not None and not is_separative(q):
                raise ProviderError(
                    f"step poset at stage {n}, generic {gi} is not separative")
            steps.append(q)
        try:
            stages.append(extend_stage(stage, steps, caps))
        except CapExceeded:
            if not allow_partial:
                raise
            partial = True
            break
    return Iteration(stages, provider, caps, partial=partial)


def canonicalize_condition(raw: Sequence, iteration: Iteration, stage_index: int
                           ) -> Condition:
    """Canonical representative of a raw coordinate sequence at a stage.

    Trailing ones are trimmed, all-top tail maps become 1, and each tail map
    is restricted to the generics containing its prefix (the mutual-order
    quotient in function form).
    """
    if len(raw) > stage_index:
        raise ValueError(f"condition has {len(raw)} coordinates at stage {stage_index}")
    cond: Condition = ()
    for k, coord in enumerate(raw):
        prev = iteration.stages[k]
        prev_idx = prev.cond_index(trim(cond))
        canon = _canonical_tail(prev, prev_idx, coord)
        if canon is not TAIL_ONE:
            cond = cond + (TAIL_ONE,) * (k - len(cond)) + (canon,)
    return cond


def tail_from_name(prev: Stage, prev_idx: int, name, algebra) -> "Coordinate":
    """Turn a literal name tail into its function form under a prefix.

    The name must evaluate, under every generic containing the prefix, to the
    numeral of an element of the step poset provided there.
    """
    from .names import decode_element, evaluate

    out = []
    for g in prev.gens_of(prev_idx):
        q = prev.steps[g]
        if q is None:
            raise ProviderError(
                f"no step poset under generic {g}; only the literal 1 tail is valid")
        hf = evaluate(name, prev.generics[g].mask)
        e = decode_element(hf)
        if e is None or not 0 <= e < q.n:
            raise ProviderError(
                f"name does not denote a step-poset element under generic {g}: {hf!r}")
        out.append((g, e))
    return _canonical_tail(prev, prev_idx, tuple(out))


# -- collapse posets --------------------------------------------------------


@dataclass(frozen=True)
class CollapseSpec:
    """Collapse the finite set X to size m: injections of size < m."""

    X: tuple
    m: int


def collapse_conditions(spec: CollapseSpec) -> list[frozenset]:
    """All partial injections X -> {0..m-1} of size < m, as frozensets of
    (x, value) pairs; deterministic order."""
    if spec.m < 1:
        raise ValueError("collapse target must be >= 1")
    xs = list(spec.X)
    out = [frozenset()]
    max_size = min(len(xs), spec.m - 1)
    for size in range(1, max_size + 1):
        for dom in itertools.combinations(range(len(xs)), size):
            for ran in itertools.permutations(range(spec.m), size):
                out.append(frozenset((xs[d], r) for d, r in zip(dom, ran)))
    return out


def collapse_poset(spec: CollapseSpec) -> tuple[Poset, list[frozenset]]:
    """The collapse ordering: reverse inclusion of partial injections,
    empty map on top.  Returns the poset plus the condition payloads."""
    conds = collapse_conditions(spec)
    n = len(conds)
    below = [0] * n
    for i, p in enumerate(conds):
        for j, q in enumerate(conds):
            if q <= p:
                below[j] |= 1 << i
    labels = ["{}" if not c else
              "{" + ",".join(f"{x!r}:{v}" for x, v in sorted(c, key=lambda e: (repr(e[0]), e[1]))) + "}"
              for c in conds]
    return Poset(below, 0, labels), conds


# -- toy rank-ladder iteration ----------------------------------------------


@dataclass
class CifsStepInfo:
    """What the toy iteration provided at one (stage, generic path)."""

    poset: Poset
    element_tuples: tuple
    components: list[Poset]
    payloads: list[list[frozenset]]
    structure: tuple[HFSet, ...]
    witnesses: list[HFSet | None]


class CifsProvider(StepProvider):
    """Stagewise product of collapse components driven by one-free-variable
    formulas evaluated over the extension's materialized rank segment.

    Component 0 collapses the rank segment itself; component i collapses the
    unique witness of the i-th formula in that structure when one exists and
    is trivial otherwise.  The materialized segment is the ground fragment
    plus the hereditary content of the earlier collapse generics, restricted
    to the ladder rank, so later stages genuinely see stage-dependent
    structures.
    """

    def __init__(self, formulas: Sequence[Formula], ladder: Sequence[tuple[int, int]],
                 caps: Caps = DEFAULT_CAPS):
        for f in formulas:
            fv = free_variables(f)
            if len(fv) != 1:
                raise FormulaError(
                    f"toy-iteration formulas need exactly one free variable, got {sorted(fv)}")
        if ladder and ladder[0][0] > caps.cifs_rank_max:
            # only the ground fragment is materialized rank-segment-wise;
            # later rungs merely filter the transitive closure
            raise CapExceeded(
                f"ground rank {ladder[0][0]} above the cap {caps.cifs_rank_max}")
        for rank, m in ladder:
            if m < 1:
                raise ValueError("ladder cardinal surrogate must be >= 1")
            if m > 5:
                # collapse values are encoded as numerals, whose codes top out
                raise CapExceeded(f"cardinal surrogate {m} above the encodable bound 5")
        ms = [m for _, m in ladder]
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError("ladder cardinal surrogates must be strictly increasing")
        self.formulas = list(formulas)
        self.free_vars = [next(iter(free_variables(f))) for f in formulas]
        self.ladder = list(ladder)
        self.stage_count = len(ladder)
        self.caps = caps
        self.info: dict[tuple[int, tuple], CifsStepInfo] = {}

    def _generic_debris(self, ctx: StepContext) -> list[HFSet]:
        """HF encodings of the collapse functions the generic path fixed."""
        out = []
        for j, choice in enumerate(ctx.path):
            if choice is None:
                continue
            info = self.info.get((j, ctx.path[:j]))
            if info is None:
                continue
            tup = info.element_tuples[choice]
            for comp_idx, cond_idx in enumerate(tup):
                payload = info.payloads[comp_idx][cond_idx]
                if payload:
                    out.append(encode_function(
                        (x, numeral(v)) for x, v in payload))
        return out

    def step(self, n: int, ctx: StepContext) -> Poset | None:
        key = (n, ctx.path)
        if key in self.info:
            return self.info[key].poset
        rank, m = self.ladder[n]
        # the extension's materialized universe: the stage-0 ground fragment
        # plus the hereditary content of the collapse generics fixed so far,
        # cut at this rung's rank
        ground = rank_segment(self.ladder[0][0])
        debris = self._generic_debris(ctx)
        universe = transitive_closure(tuple(ground) + tuple(debris))
        structure = tuple(x for x in universe if x.rank < rank)
        components: list[Poset] = []
        payloads: list[list[frozenset]] = []
        witnesses: list[HFSet | None] = []
        p0, c0 = collapse_poset(CollapseSpec(structure, m))
        components.append(p0)
        payloads.append(c0)
        for f, var in zip(self.formulas, self.free_vars):
            hits = [x for x in structure
                    if eval_classical(f, structure, [], {var: x})]
            if len(hits) == 1:
                witnesses.append(hits[0])
                pc, cc = collapse_poset(CollapseSpec(tuple(hits[0].members), m))
            else:
                witnesses.append(None)
                pc, cc = collapse_poset(CollapseSpec((), 1))
            components.append(pc)
            payloads.append(cc)
        poset, tuples = product_poset(components)
        self.info[key] = CifsStepInfo(poset, tuples, components, payloads,
                                      structure, witnesses)
        return poset


def cifs_toy_iteration(formulas: Sequence[Formula],
                       ladder: Sequence[tuple[int, int]],
                       caps: Caps = DEFAULT_CAPS) -> CifsProvider:
    """Step provider for the toy collapse iteration over a finite rank ladder."""
    return CifsProvider(formulas, ladder, caps)


# -- stagewise separativity -------------------------------------------------


def check_lemma1(iteration: Iteration, instance: str = "adhoc") -> SuiteReport:
    """Every stage poset of a built iteration must be separative."""
    report = SuiteReport()
    for stage in iteration.stages[1:]:
        sep = is_separative(stage.poset)
        detail: dict = {"conditions": stage.poset.n}
        if not sep:
            for p in range(stage.poset.n):
                for q in range(stage.poset.n):
                    if not stage.poset.leq(p, q) and \
                       not stage.poset.below[p] & ~stage.poset.compat[q]:
                        detail["witness"] = (stage.poset.labels[p],
                                             stage.poset.labels[q])
                        break
                if "witness" in detail:
                    break
        report.record("lemma1", f"stage-{stage.index}-separative", instance,
                      sep, {"stage": stage.index}, detail)
    return report
