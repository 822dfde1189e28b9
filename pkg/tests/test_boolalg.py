import itertools

import pytest

from forcinglab.boolalg import (AlgebraError, boolean_law_violations,
                                check_complete_hom,
                                dense_embedding_violations, ro_algebra)
from forcinglab.config import CapExceeded
from forcinglab.poset import (all_separative_posets, antichain_with_top,
                              chain_poset, point_poset)


class TestRoAlgebra:
    def test_antichain_two_atoms_gives_four_cuts(self):
        A = ro_algebra(antichain_with_top(2))
        assert len(A) == 4
        a = A.base.principal_cut(A.base.labels.index("a"))
        b = A.base.principal_cut(A.base.labels.index("b"))
        assert set(A.elements) == {A.zero, a, b, A.one}

    def test_single_point_gives_two(self):
        assert len(ro_algebra(point_poset())) == 2

    def test_antichain_sizes_are_powers_of_two(self):
        for k in range(1, 5):
            assert len(ro_algebra(antichain_with_top(k))) == 2 ** k

    def test_non_separative_input_is_quotiented_and_reported(self):
        A = ro_algebra(chain_poset(3))
        assert A.original is not None
        assert A.quotient_map is not None
        assert A.base.n == 1 and len(A) == 2

    def test_size_cap(self):
        with pytest.raises(CapExceeded):
            ro_algebra(antichain_with_top(4), max_base=3)


class TestProductSum:
    def setup_method(self):
        self.A = ro_algebra(antichain_with_top(2))
        base = self.A.base
        self.ua = base.principal_cut(base.labels.index("a"))
        self.ub = base.principal_cut(base.labels.index("b"))

    def test_product_idempotent(self):
        assert self.A.product([self.ua, self.ua]) == self.ua

    def test_product_with_zero(self):
        assert self.A.product([self.A.zero, self.ua]) == self.A.zero

    def test_product_of_the_two_atoms_is_zero(self):
        assert self.A.product([self.ua, self.ub]) == self.A.zero

    def test_empty_product_is_one(self):
        assert self.A.product([]) == self.A.one

    def test_sum_of_the_two_atoms_is_one(self):
        assert self.A.sum([self.ua, self.ub]) == self.A.one

    def test_singleton_sum(self):
        assert self.A.sum([self.ua]) == self.ua

    def test_sum_of_zero(self):
        assert self.A.sum([self.A.zero]) == self.A.zero

    def test_foreign_cut_rejected(self):
        with pytest.raises(AlgebraError):
            self.A.sum([0b101010])

    def test_family_ops_agree_with_binary_folds(self):
        for p in all_separative_posets(5):
            A = ro_algebra(p)
            for fam in itertools.combinations(A.elements, 3):
                want_meet = A.meet(A.meet(fam[0], fam[1]), fam[2])
                want_join = A.join(A.join(fam[0], fam[1]), fam[2])
                assert A.product(fam) == want_meet
                assert A.sum(fam) == want_join


class TestLawSuite:
    def test_all_small_separative_algebras_satisfy_the_laws(self):
        for p in all_separative_posets(5):
            A = ro_algebra(p)
            assert boolean_law_violations(A) == []
            assert dense_embedding_violations(A) == []


class TestCompleteHom:
    def setup_method(self):
        self.A = ro_algebra(antichain_with_top(2))

    def test_identity_is_a_complete_hom(self):
        rep = check_complete_hom({c: c for c in self.A.elements},
                                 self.A, self.A)
        assert rep.ok
        assert rep.counterexamples == []
        assert rep.families_checked == 16

    def test_constant_one_breaks_complement_at_zero(self):
        rep = check_complete_hom({c: self.A.one for c in self.A.elements},
                                 self.A, self.A)
        assert not rep.preserves_complement
        kinds = {c[0] for c in rep.counterexamples}
        assert "complement" in kinds
        complement_hits = [c for c in rep.counterexamples if c[0] == "complement"]
        assert any(c[1] == (self.A.zero,) for c in complement_hits)

    def test_flags_imply_empty_lists(self):
        rep = check_complete_hom({c: c for c in self.A.elements},
                                 self.A, self.A)
        assert rep.preserves_all_products and rep.preserves_all_sums
        assert rep.violation_count == 0

    def test_family_cap(self):
        big = ro_algebra(antichain_with_top(4), max_base=12)
        with pytest.raises(CapExceeded):
            check_complete_hom({c: c for c in big.elements}, big, big,
                               family_cap=8)

    def test_atom_collapse_breaks_sums(self):
        # send both atoms to the same atom: binary meets survive but the
        # sum of the two atoms lands strictly below one
        base = self.A.base
        ua = base.principal_cut(base.labels.index("a"))
        ub = base.principal_cut(base.labels.index("b"))
        h = {self.A.zero: self.A.zero, ua: ua, ub: ua, self.A.one: self.A.one}
        rep = check_complete_hom(h, self.A, self.A)
        assert not rep.ok
        assert not rep.preserves_all_sums or not rep.preserves_complement
