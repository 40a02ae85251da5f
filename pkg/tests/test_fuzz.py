import numpy as np
import pytest

from dyadic_bellman.core import ProbTree, StepFunction
from dyadic_bellman.fuzz import SEED_ENV, default_seed, fuzz_corpus

GOLDEN_SEED_42 = "30b6494b8cb10e92db243f9921b7c7de0319becaa8446ebbfe2d844a4599f99d"


def test_golden_instance():
    inst = next(fuzz_corpus(42, 1))
    assert inst.digest() == GOLDEN_SEED_42


def test_deterministic():
    a = [i.digest() for i in fuzz_corpus(9, 20)]
    b = [i.digest() for i in fuzz_corpus(9, 20)]
    assert a == b
    assert len(set(a)) == 20


def test_count_zero_rejected():
    with pytest.raises(ValueError):
        list(fuzz_corpus(1, 0))


def test_env_seed(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "123")
    assert default_seed() == 123
    assert next(fuzz_corpus(None, 1)).digest() == next(fuzz_corpus(123, 1)).digest()


def test_instances_satisfy_invariants():
    depths, arities, pieces = set(), set(), set()
    for inst in fuzz_corpus(2, 300):
        tree = inst.tree
        # reconstructing re-runs every ProbTree and StepFunction check
        ProbTree(tree.measure, tree.parent)
        StepFunction(inst.step.lengths, inst.step.values)
        assert 1 <= tree.max_depth <= 6
        kids = tree.n_children[tree.n_children > 0]
        arities.update(kids.tolist())
        depths.add(tree.max_depth)
        pieces.add(inst.step.n_pieces)
        assert np.all((inst.phi.values >= 1e-3) & (inst.phi.values <= 1e3))
        assert 1 <= inst.step.n_pieces <= 64
        assert inst.step.total == pytest.approx(1.0, abs=1e-12)
    assert arities == {2, 3, 4}
    assert depths == set(range(1, 7))
    assert min(pieces) < 8 and max(pieces) > 56
