import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyadic_bellman import (AtomFunction, DegenerateInputError, ProbTree, doob_ratio,
                            maximal_operator, weak_type_report)
from dyadic_bellman.fuzz import fuzz_corpus
from dyadic_bellman.maximal import (maximal_values, node_averages, weak_type_levels,
                                    weak_type_violations_exact)

from conftest import trees_with_values


def ancestor_max_oracle(tree, values):
    """Per leaf, loop over every ancestor and average its leaves directly."""
    leaves = list(tree.leaves)
    below = {leaf: set(tree.ancestors(leaf)) for leaf in leaves}
    out = []
    for leaf in leaves:
        best = -np.inf
        for node in below[leaf]:
            members = [j for j, other in enumerate(leaves) if node in below[other]]
            mass = tree.leaf_measure[members].sum()
            best = max(best, np.dot(tree.leaf_measure[members], values[members]) / mass)
        out.append(best)
    return np.array(out)


def test_hand_example(binary2):
    res = maximal_operator(binary2, AtomFunction(binary2, [4, 2, 1, 1]))
    np.testing.assert_allclose(res.values, [4, 3, 2, 2])


def test_ties_go_to_the_shallowest_node(binary2):
    res = maximal_operator(binary2, AtomFunction(binary2, [2.0] * 4))
    np.testing.assert_array_equal(res.values, 2.0)
    np.testing.assert_array_equal(res.argmax, 0)


@given(st.lists(st.floats(0, 1e3), min_size=8, max_size=8))
def test_matches_ancestor_oracle_binary3(vals):
    tree = ProbTree.uniform(2, 3)
    vals = np.array(vals)
    np.testing.assert_allclose(maximal_operator(tree, vals).values,
                               ancestor_max_oracle(tree, vals), rtol=1e-12, atol=1e-12)


def test_matches_oracle_on_fuzz_trees():
    for inst in fuzz_corpus(7, 15, max_depth=4):
        np.testing.assert_allclose(maximal_operator(inst.tree, inst.phi).values,
                                   ancestor_max_oracle(inst.tree, inst.phi.values), rtol=1e-12)


@given(trees_with_values())
def test_batched_equals_single(tv):
    tree, vals = tv
    stack = np.stack([vals, vals[::-1], 2 * vals])
    got = maximal_values(tree, stack)
    for row, v in zip(got, stack):
        np.testing.assert_allclose(row, maximal_operator(tree, v).values, rtol=1e-14)


@given(trees_with_values())
def test_dominates_phi_and_root_average(tv):
    tree, vals = tv
    m = maximal_operator(tree, vals).values
    assert np.all(m >= vals * (1 - 1e-12))
    assert np.all(m >= node_averages(tree, vals)[0] * (1 - 1e-12))


class TestWeakType:
    def test_hand_example(self, binary2):
        rep = weak_type_report(binary2, AtomFunction(binary2, [4, 2, 1, 1]), 2.5)
        assert rep.level_measure == pytest.approx(0.5)
        assert rep.bound == pytest.approx(0.6)
        assert rep.holds

    def test_constant_empty_level_set(self, binary2):
        rep = weak_type_report(binary2, AtomFunction(binary2, [1.5] * 4), 1.5)
        assert rep == (0.0, 0.0)

    def test_full_space_level_set(self, binary2):
        phi = AtomFunction(binary2, [4, 2, 1, 1])
        rep = weak_type_report(binary2, phi, 1.0)
        assert rep.level_measure == 1.0
        assert rep.bound == pytest.approx(2.0)

    @given(trees_with_values(), st.floats(1e-3, 1e3), st.booleans())
    def test_holds(self, tv, lam, strict):
        tree, vals = tv
        assert weak_type_report(tree, vals, lam, strict).holds

    @given(trees_with_values())
    def test_critical_levels_dominate_arbitrary_levels(self, tv):
        tree, vals = tv
        lam, level, bound = weak_type_levels(tree, vals)
        worst = np.max(level / bound)
        for x in np.geomspace(1e-2, 1e2, 25):
            rep = weak_type_report(tree, vals, x)
            if rep.bound > 0:
                assert rep.level_measure / rep.bound <= worst * (1 + 1e-12)

    def test_exact_check_on_corpus_sample(self):
        assert sum(weak_type_violations_exact(i.tree, i.phi)
                   for i in fuzz_corpus(11, 40, max_depth=4)) == 0


class TestDoob:
    def test_hand_example(self, binary2):
        r = doob_ratio(binary2, AtomFunction(binary2, [4, 2, 1, 1]), 2)
        assert r == pytest.approx(np.sqrt(33 / 4) / (2 * np.sqrt(22 / 4)), rel=1e-14)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_constant(self, binary2, p):
        assert doob_ratio(binary2, [2.0] * 4, p) == pytest.approx((p - 1) / p, rel=1e-14)

    def test_zero_is_degenerate(self, binary2):
        with pytest.raises(DegenerateInputError):
            doob_ratio(binary2, [0.0] * 4, 2)

    def test_random_trials(self):
        rng = np.random.default_rng(5)
        tree = ProbTree.uniform(2, 5)
        vals = rng.exponential(size=(1000, tree.n_leaves)) ** 3
        for i, v in enumerate(vals):
            p = (1.5, 2.0, 3.0)[i % 3]
            assert doob_ratio(tree, v, p) <= 1.0
