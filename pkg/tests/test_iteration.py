import itertools

import pytest

from forcinglab.boolalg import ro_algebra
from forcinglab.config import DEFAULT_CAPS, CapExceeded
from forcinglab.formula import parse_formula
from forcinglab.hfset import EMPTY, HFSet, element_code, hfset
from forcinglab.iteration import (TAIL_ONE, CollapseSpec, Iteration,
                                  ProviderError, StepContext, TableProvider,
                                  build_iteration, canonicalize_condition,
                                  check_lemma1, cifs_toy_iteration,
                                  collapse_poset, tail_from_name, trim)
from forcinglab.hfset import kpair
from forcinglab.names import (NameUniverse, TruthSession, check_name,
                              element_name, empty_name, evaluate, mix_name,
                              pair_name)
from forcinglab.poset import (Poset, antichain_with_top, chain_poset,
                              is_separative, point_poset)

A2 = antichain_with_top(2)
PT = point_poset()


def two_stage_constant():
    return build_iteration(TableProvider([{(): A2}, {(0,): A2, (1,): A2}]))


# -- collapse posets ----------------------------------------------------------


def brute_force_injection_count(n: int, m: int) -> int:
    """Oracle written against the raw definition: count the partial maps
    {0..n-1} -> {0..m-1} that are injective and of size < m, by enumerating
    every partial map outright."""
    count = 0
    for dom_bits in range(1 << n):
        dom = [i for i in range(n) if (dom_bits >> i) & 1]
        if len(dom) >= m:
            continue
        for values in itertools.product(range(m), repeat=len(dom)):
            if len(set(values)) == len(values):
                count += 1
    return count


class TestCollapse:
    def test_two_into_two_gives_five(self):
        poset, _ = collapse_poset(CollapseSpec((0, 1), 2))
        assert poset.n == 5

    def test_one_into_one_is_trivial(self):
        poset, conds = collapse_poset(CollapseSpec((0,), 1))
        assert poset.n == 1 and conds == [frozenset()]

    def test_two_into_three_gives_thirteen(self):
        poset, _ = collapse_poset(CollapseSpec((0, 1), 3))
        assert poset.n == 13

    def test_counts_match_brute_force(self):
        for n in range(0, 4):
            for m in range(1, 5):
                poset, _ = collapse_poset(CollapseSpec(tuple(range(n)), m))
                assert poset.n == brute_force_injection_count(n, m)

    def test_always_separative_with_empty_map_on_top(self):
        for n in range(0, 4):
            for m in range(1, 4):
                poset, conds = collapse_poset(CollapseSpec(tuple(range(n)), m))
                assert is_separative(poset)
                assert conds[poset.top] == frozenset()

    def test_order_is_reverse_inclusion(self):
        poset, conds = collapse_poset(CollapseSpec((0, 1), 3))
        for i, p in enumerate(conds):
            for j, q in enumerate(conds):
                assert poset.leq(i, j) == (q <= p)


# -- stage construction -------------------------------------------------------


class TestBuildIteration:
    def test_single_point_step(self):
        it = build_iteration(TableProvider([{(): PT}]))
        assert it.stages[1].poset.n == 1

    def test_two_stage_antichain_count(self):
        # frozen from the literal-name oracle below: 1 top, 2 short
        # conditions, 4 one-generic tails, 8 two-generic tails
        it = two_stage_constant()
        assert it.stages[2].poset.n == 15
        assert len(it.stages[2].poset.atoms) == 4

    def test_undefined_step_keeps_the_stage(self):
        it = build_iteration(TableProvider([{(): A2}, {}]))
        assert it.stages[2].conditions == it.stages[1].conditions

    def test_stage_posets_contain_earlier_stages(self):
        it = two_stage_constant()
        assert set(it.stages[1].conditions) <= set(it.stages[2].conditions)

    def test_non_separative_step_rejected(self):
        with pytest.raises(ProviderError):
            build_iteration(TableProvider([{(): chain_poset(2)}]))

    def test_stage_cap(self):
        tables = [{(): A2}, {(0,): A2, (1,): A2},
                  {p: A2 for p in [(0, 0), (0, 1), (1, 0), (1, 1)]}]
        with pytest.raises(CapExceeded):
            build_iteration(TableProvider(tables))
        it = build_iteration(TableProvider(tables), allow_partial=True)
        assert it.partial and len(it) == 2

    def test_prefix_monotonicity(self):
        it = two_stage_constant()
        s1, s2 = it.stages[1], it.stages[2]
        for i, ci in enumerate(s2.conditions):
            for j, cj in enumerate(s2.conditions):
                if s2.poset.leq(i, j):
                    pi = s1.cond_index(trim(ci[:1]))
                    pj = s1.cond_index(trim(cj[:1]))
                    assert s1.poset.leq(pi, pj)

    def test_all_stage_posets_are_posets(self):
        # antisymmetry of the canonical order is exactly the mutual-order
        # quotient working; Poset's constructor enforces it
        it = two_stage_constant()
        for stage in it.stages:
            assert stage.poset.n == len(stage.conditions)


class TestCanonicalization:
    def setup_method(self):
        self.it = two_stage_constant()
        self.s1 = self.it.stages[1]

    def test_trailing_ones_trim(self):
        cond = canonicalize_condition(
            (((0, 0),), TAIL_ONE), self.it, 2)
        assert cond == (((0, 0),),)

    def test_top_valued_tail_becomes_one(self):
        top = A2.top
        cond = canonicalize_condition(
            (((0, 0),), ((0, top),)), self.it, 2)
        assert cond == (((0, 0),),)

    def test_tail_restricted_to_prefix_generics(self):
        # a tail defined on both generics, attached below the atom that only
        # generic 0 contains, keeps only the generic-0 value
        cond = canonicalize_condition(
            (((0, 0),), ((0, 1), (1, 0))), self.it, 2)
        assert cond == (((0, 0),), ((0, 1),))

    def test_names_with_equal_evaluations_share_a_condition(self):
        A = ro_algebra(self.s1.poset, max_base=self.s1.poset.n)
        gens = self.s1.generics
        atom_a = self.s1.cond_index((((0, 0),),))
        mixed = mix_name([(gens[g].atom, element_name(0, A))
                          for g in self.s1.gens_of(atom_a)], A)
        plain = element_name(0, A)
        t1 = tail_from_name(self.s1, atom_a, mixed, A)
        t2 = tail_from_name(self.s1, atom_a, plain, A)
        assert t1 == t2


# -- the literal name-based representation, used as the order oracle ----------


def literal_second_stage(it: Iteration):
    """Rebuild stage 2 from literal names: tails are names over r.o.(P_1),
    validity is the forced membership in the step-poset name, order is the
    forced pair-membership in the order-relation name, and conditions are
    identified when they evaluate identically under every generic containing
    the prefix.  Returns (classes, leq) with classes as frozen descriptors."""
    s1 = it.stages[1]
    A = ro_algebra(s1.poset, max_base=s1.poset.n)
    gens = s1.generics
    sess = TruthSession(NameUniverse(A, 0, (empty_name(A),)))

    def branch(g, hf):
        return (gens[g].atom, check_name(hf, A))

    # the step-poset name and its order-relation name, mixed over generics
    qdot_branches, rdot_branches = [], []
    for g, q in enumerate(s1.steps):
        if q is None:
            continue
        elems = HFSet(element_code(e) for e in range(q.n))
        order = HFSet(kpair(element_code(e1), element_code(e2))
                      for e1 in range(q.n) for e2 in range(q.n)
                      if q.leq(e1, e2))
        qdot_branches.append(branch(g, elems))
        rdot_branches.append(branch(g, order))
    qdot = mix_name(qdot_branches, A)
    rdot = mix_name(rdot_branches, A)

    def forced_below(prefix_idx, value):
        return not s1.poset.principal_cut(prefix_idx) & ~value

    # candidate tails: every mixed assignment plus shapes that should merge
    candidates = []
    for ci in range(s1.poset.n):
        gens_ci = list(s1.gens_of(ci))
        candidates.append((ci, TAIL_ONE))
        if any(s1.steps[g] is None for g in gens_ci):
            continue
        for combo in itertools.product(*[range(s1.steps[g].n) for g in gens_ci]):
            nm = mix_name([(gens[g].atom, element_name(e, A))
                           for g, e in zip(gens_ci, combo)], A)
            candidates.append((ci, nm))
            if len(set(combo)) == 1:
                candidates.append((ci, element_name(combo[0], A)))

    # validity: prefix forces membership in the step-poset name
    valid = []
    for ci, nm in candidates:
        if nm is TAIL_ONE:
            valid.append((ci, nm))
            continue
        if forced_below(ci, sess.member_value(nm, qdot)):
            valid.append((ci, nm))

    def evaluation_class(ci, nm):
        if nm is TAIL_ONE:
            return (ci, TAIL_ONE)
        vec = []
        for g in s1.gens_of(ci):
            hf = evaluate(nm, gens[g].mask)
            vec.append((g, hf.code))
        q_tops = all(evaluate(nm, gens[g].mask) == element_code(s1.steps[g].top)
                     for g in s1.gens_of(ci))
        if q_tops:
            return (ci, TAIL_ONE)
        return (ci, tuple(vec))

    def leq_pair(a, b):
        (ci, ni), (cj, nj) = a, b
        if not s1.poset.leq(ci, cj):
            return False
        if nj is TAIL_ONE:
            return True
        if ni is TAIL_ONE:
            if any(s1.steps[g] is None for g in s1.gens_of(ci)):
                return False
            ni_eff = mix_name([(gens[g].atom, element_name(s1.steps[g].top, A))
                               for g in s1.gens_of(ci)], A)
        else:
            ni_eff = ni
        pair = pair_name(ni_eff, nj, A)
        return forced_below(ci, sess.member_value(pair, rdot))

    classes: dict = {}
    for ci, nm in valid:
        classes.setdefault(evaluation_class(ci, nm), []).append((ci, nm))
    keys = sorted(classes, key=str)
    # mutual order must agree with evaluation classes (the Remark-1 quotient)
    for ka, kb in itertools.product(keys, repeat=2):
        for a in classes[ka]:
            for b in classes[kb]:
                mutual = leq_pair(a, b) and leq_pair(b, a)
                assert mutual == (ka == kb), (a, b)
    leq = {}
    for ka, kb in itertools.product(keys, repeat=2):
        vals = {leq_pair(a, b) for a in classes[ka] for b in classes[kb]}
        assert len(vals) == 1, "order must be class-invariant"
        leq[(ka, kb)] = vals.pop()
    return keys, leq


PROVIDERS_FOR_ORACLE = [
    TableProvider([{(): A2}, {(0,): A2, (1,): A2}]),
    TableProvider([{(): A2}, {(0,): A2}]),
    TableProvider([{(): A2}, {(0,): A2, (1,): PT}]),
    TableProvider([{(): A2}, {(0,): antichain_with_top(3), (1,): A2}]),
    TableProvider([{(): antichain_with_top(3)},
                   {(0,): A2, (1,): PT, (2,): A2}]),
    TableProvider([{(): PT}, {(None,): A2}]),
]


@pytest.mark.parametrize("provider", PROVIDERS_FOR_ORACLE,
                         ids=lambda p: "prov" + str(PROVIDERS_FOR_ORACLE.index(p)))
def test_literal_representation_matches_function_representation(provider):
    caps = DEFAULT_CAPS.with_(max_stage_conditions=128)
    it = build_iteration(provider, caps)
    keys, leq = literal_second_stage(it)
    s2 = it.stages[2]
    assert len(keys) == s2.poset.n
    # the natural map: the literal class descriptor names the prefix and the
    # per-generic evaluation, which is exactly the function-form coordinate
    s1 = it.stages[1]
    numeral_code_to_element = {element_code(e).code: e for e in range(8)}

    def as_condition(key):
        ci, tail = key
        prefix = s1.conditions[ci]
        if tail is TAIL_ONE:
            return prefix
        coord = tuple((g, numeral_code_to_element[code]) for g, code in tail)
        return prefix + (TAIL_ONE,) * (1 - len(prefix)) + (coord,)
    mapping = {key: s2.cond_index(as_condition(key)) for key in keys}
    assert sorted(mapping.values()) == list(range(s2.poset.n))
    for ka, kb in itertools.product(keys, repeat=2):
        assert leq[(ka, kb)] == s2.poset.leq(mapping[ka], mapping[kb])


# -- lemma 1 -----------------------------------------------------------------


class TestLemma1:
    def test_all_stages_separative(self):
        it = two_stage_constant()
        assert check_lemma1(it).ok

    def test_trivial_steps(self):
        it = build_iteration(TableProvider([{(): PT}, {(None,): PT}]))
        assert check_lemma1(it).ok

    def test_corrupted_stage_is_detected_with_witness(self):
        it = two_stage_constant()
        broken = Iteration([it.stages[0]], it.provider, it.caps)

        class FakeStage:
            index = 1
            poset = chain_poset(3)
        broken.stages.append(FakeStage())
        rep = check_lemma1(broken)
        assert not rep.ok
        assert "witness" in rep.failures[0].detail


# -- toy rank-ladder iteration -------------------------------------------------


class TestCifs:
    def test_never_unique_witness_gives_trivial_component(self):
        prov = cifs_toy_iteration([parse_formula("x = x")], [(2, 2)])
        build_iteration(prov, DEFAULT_CAPS.with_(max_stage_conditions=64))
        info = prov.info[(0, ())]
        assert info.witnesses == [None]
        assert info.components[1].n == 1

    def test_empty_set_witness(self):
        prov = cifs_toy_iteration(
            [parse_formula("forall z (! (z in x))")], [(2, 2)])
        build_iteration(prov, DEFAULT_CAPS.with_(max_stage_conditions=64))
        info = prov.info[(0, ())]
        assert info.witnesses == [EMPTY]
        # collapsing the empty set is the one-point poset
        assert info.components[1].n == 1

    def test_tables_differ_between_generics_when_debris_visible(self):
        psi = parse_formula(
            "exists y (y in x) & forall y (y in x -> exists z (z in y & exists w (w in z)))")
        prov = cifs_toy_iteration([psi], [(1, 2), (6, 3)])
        it = build_iteration(prov, DEFAULT_CAPS.with_(max_stage_conditions=16),
                             allow_partial=True)
        s1 = it.stages[1]
        infos = []
        for gi in range(len(s1.generics)):
            prov.step(1, StepContext(s1, gi, s1.paths[gi], it.stages))
            infos.append(prov.info[(1, s1.paths[gi])])
        assert len({tuple(h.code for h in i.structure) for i in infos}) > 1
        assert len({i.witnesses[0] for i in infos}) > 1

    def test_formula_arity_enforced(self):
        with pytest.raises(Exception):
            cifs_toy_iteration([parse_formula("x in y")], [(1, 2)])

    def test_ladder_must_increase(self):
        with pytest.raises(ValueError):
            cifs_toy_iteration([parse_formula("x = x")], [(1, 2), (1, 2)])

    def test_full_pipeline_small_ladder(self):
        prov = cifs_toy_iteration(
            [parse_formula("forall z (! (z in x))"),
             parse_formula("exists z (z in x)")],
            [(1, 2), (1, 3)])
        it = build_iteration(prov, DEFAULT_CAPS.with_(max_stage_conditions=128))
        assert len(it) == 2
        assert check_lemma1(it).ok
