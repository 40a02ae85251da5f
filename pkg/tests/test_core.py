from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyadic_bellman import (AtomFunction, BelowMeanLevelError, DomainError, MalformedInputError,
                            ProbTree, StepFunction, beta_lambda, build_tree,
                            decreasing_rearrangement, hardy_average, read_atom_csv, read_step_csv,
                            write_atom_csv, write_step_csv)
from dyadic_bellman.core import step_power_integral

from conftest import step_functions


class TestTrees:
    def test_uniform_binary_depth_two(self):
        t = build_tree(arity=2, depth=2)
        assert t.n_leaves == 4
        np.testing.assert_allclose(t.leaf_measure, 0.25)

    def test_explicit_root_split(self):
        t = build_tree(splits=[0.6, 0.4])
        assert t.n_leaves == 2
        np.testing.assert_allclose(t.leaf_measure, [0.6, 0.4])

    def test_children_sum_to_parent(self):
        t = build_tree(arity=2, depth=3)
        assert t.n_leaves == 8
        for node in range(t.n_nodes):
            kids = t.children(node)
            if kids.size:
                assert t.measure[kids].sum() == pytest.approx(t.measure[node], rel=1e-15)

    def test_nested_exact_splits(self):
        t = ProbTree.from_splits([(Fraction(1, 3), [Fraction(1, 6), Fraction(1, 6)]),
                                  Fraction(2, 3)])
        assert t.n_leaves == 3 and t.max_depth == 2
        assert list(t.ancestors(2)) == [2, 1, 0]

    def test_exact_split_mismatch(self):
        with pytest.raises(MalformedInputError):
            ProbTree.from_splits([Fraction(1, 3), Fraction(1, 3)])

    @pytest.mark.parametrize("measure,parent", [
        ([1.0, 0.5, 0.4], [-1, 0, 0]),      # children short of the parent
        ([1.0, 1.0], [-1, 0]),              # single child
        ([1.0, 0.5, -0.5, 1.0], [-1, 0, 0, 0]),
        ([0.9, 0.45, 0.45], [-1, 0, 0]),    # root not 1
    ])
    def test_rejects_malformed(self, measure, parent):
        with pytest.raises(MalformedInputError):
            ProbTree(np.array(measure), np.array(parent))

    def test_children_within_tolerance(self):
        ProbTree(np.array([1.0, 0.3 + 1e-14, 0.7]), np.array([-1, 0, 0]))


class TestRearrangement:
    def test_uniform_atoms(self, binary2):
        g = decreasing_rearrangement(AtomFunction(binary2, [1, 4, 2, 1]))
        assert g.pairs() == [(0.25, 4.0), (0.25, 2.0), (0.25, 1.0), (0.25, 1.0)]

    def test_constant_is_one_piece_up_to_merging(self, binary2):
        g = decreasing_rearrangement(AtomFunction(binary2, [3.0] * 4))
        assert np.all(g.values == 3.0) and g.total == pytest.approx(1.0)

    def test_unequal_atoms(self):
        t = build_tree(splits=[0.6, 0.4])
        g = decreasing_rearrangement(AtomFunction(t, [1.0, 3.0]))
        assert g.pairs() == [(0.4, 3.0), (0.6, 1.0)]

    @given(st.lists(st.floats(0, 100), min_size=9, max_size=9))
    def test_equimeasurable(self, vals):
        t = ProbTree.uniform(3, 2)
        phi = AtomFunction(t, vals)
        g = decreasing_rearrangement(phi)
        assert g.integral() == pytest.approx(phi.integral(), rel=1e-12, abs=1e-12)
        assert step_power_integral(g, 2) == pytest.approx(phi.moment(2), rel=1e-12, abs=1e-12)
        assert np.all(np.diff(g.values) <= 0)


class TestHardyAverage:
    def test_examples(self, two_step):
        assert hardy_average(two_step, 0.75) == pytest.approx(1.25 / 0.75, rel=1e-15)
        assert hardy_average(two_step, 1.0) == pytest.approx(1.5, rel=1e-15)
        assert hardy_average(StepFunction.constant(2.5), [0.1, 0.7, 1.0]) == pytest.approx(2.5)

    def test_domain(self, two_step):
        with pytest.raises(DomainError):
            hardy_average(two_step, 0.0)
        with pytest.raises(DomainError):
            hardy_average(two_step, 1.5)

    @given(step_functions(), st.floats(1e-6, 1.0))
    def test_matches_quadrature_of_cumulative(self, g, t):
        # independent path: explicit sum over the pieces left of t
        cut = np.minimum(g.breaks[1:], t) - np.minimum(g.breaks[:-1], t)
        expected = np.sum(cut * g.values) / t
        assert hardy_average(g, t) == pytest.approx(expected, rel=1e-12)

    @given(step_functions(), st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
    def test_non_increasing(self, g, s, t):
        lo, hi = min(s, t), max(s, t)
        assert hardy_average(g, lo) >= hardy_average(g, hi) * (1 - 1e-12)


class TestPowerIntegral:
    def test_examples(self, two_step):
        assert step_power_integral(two_step, 2, 1.0) == pytest.approx(2.5)
        assert step_power_integral(two_step, 1, 1.0) == pytest.approx(1.5)

    @given(step_functions())
    def test_q1_agrees_with_average_at_breaks(self, g):
        b = g.breaks[1:]
        np.testing.assert_allclose(step_power_integral(g, 1, b), hardy_average(g, b) * b, rtol=1e-12)


class TestBeta:
    def test_examples(self, two_step, four_step):
        assert beta_lambda(two_step, 1.8) == pytest.approx(0.625, rel=1e-14)
        assert beta_lambda(two_step, 2.0) == pytest.approx(0.5, rel=1e-14)
        assert beta_lambda(four_step, 3.0) == pytest.approx(0.5, rel=1e-14)

    def test_signals(self, two_step):
        with pytest.raises(BelowMeanLevelError):
            beta_lambda(two_step, 1.5)
        assert beta_lambda(two_step, 2.5) == 0.0

    @given(step_functions(), st.floats(0.0, 1.0))
    def test_is_largest_root(self, g, frac):
        f = g.integral()
        if g.values[0] <= f * (1 + 1e-9):
            return
        lam = f + frac * (g.values[0] - f)
        if lam <= f:
            return
        beta = beta_lambda(g, lam)
        assert hardy_average(g, beta) == pytest.approx(lam, rel=1e-10)
        if beta < 1:
            later = np.linspace(beta, 1.0, 50)[1:]
            assert np.all(hardy_average(g, later) <= lam * (1 + 1e-12))


class TestStepFunction:
    def test_rejects_increasing(self):
        with pytest.raises(MalformedInputError):
            StepFunction([0.5, 0.5], [1.0, 2.0])

    def test_rejects_negative_values(self):
        with pytest.raises(MalformedInputError):
            StepFunction([1.0], [-1.0])


class TestCsv:
    @given(step_functions())
    def test_step_round_trip(self, tmp_path_factory, g):
        path = tmp_path_factory.mktemp("csv") / "g.csv"
        write_step_csv(g, path)
        assert read_step_csv(path) == g
        assert path.read_text().splitlines()[0] == "length,value"

    def test_atom_round_trip(self, tmp_path, binary2):
        phi = AtomFunction(binary2, [4.0, 2.0, 1.0, 1.0])
        write_atom_csv(phi, tmp_path / "a.csv")
        back = read_atom_csv(tmp_path / "a.csv", binary2)
        np.testing.assert_array_equal(back.values, phi.values)

    @pytest.mark.parametrize("text", [
        "length,value\n0.5,2\n0.4,1\n",          # total 0.9
        "length,value\n0.5,x\n0.5,1\n",
        "len,value\n0.5,2\n0.5,1\n",
        "length,value\n0.5,1\n0.5,2\n",          # increasing
    ])
    def test_malformed_step_csv(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(MalformedInputError):
            read_step_csv(p)
