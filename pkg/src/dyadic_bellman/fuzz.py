"""Deterministic random instances for property sweeps."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .core import AtomFunction, ProbTree, StepFunction

SEED_ENV = "DYADIC_BELLMAN_SEED"
FALLBACK_SEED = 20130601


def default_seed():
    return int(os.environ.get(SEED_ENV, FALLBACK_SEED))


def random_tree(rng, max_depth=6, arity=(2, 4), leaf_prob=0.15):
    """Random tree built level by level; internal nodes below the root may stop early."""
    depth = int(rng.integers(1, max_depth + 1))
    measure, parent = [np.ones(1)], [np.array([-1])]
    level = np.array([0])
    level_mass = np.ones(1)
    n = 1
    for d in range(depth):
        if d > 0:
            grow = rng.random(level.size) >= leaf_prob
            if not grow.any():
                break
            level, level_mass = level[grow], level_mass[grow]
        k = rng.integers(arity[0], arity[1] + 1, size=level.size)
        w = rng.random(int(k.sum())) + 0.05
        starts = np.concatenate(([0], np.cumsum(k)[:-1]))
        share = w / np.repeat(np.add.reduceat(w, starts), k)
        mass = np.repeat(level_mass, k) * share
        parent.append(np.repeat(level, k))
        measure.append(mass)
        level = np.arange(n, n + mass.size)
        level_mass = mass
        n += mass.size
    return ProbTree(np.concatenate(measure), np.concatenate(parent))


def log_uniform(rng, size, lo=1e-3, hi=1e3):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def random_step(rng, max_pieces=64, lo=1e-3, hi=1e3):
    n = int(rng.integers(1, max_pieces + 1))
    lengths = rng.random(n) + 0.05
    lengths /= lengths.sum()
    return StepFunction(lengths, np.sort(log_uniform(rng, n, lo, hi))[::-1])


@dataclass(frozen=True)
class FuzzInstance:
    index: int
    tree: ProbTree
    phi: AtomFunction
    step: StepFunction

    def digest(self):
        h = hashlib.sha256()
        for arr in (self.tree.measure, self.tree.parent, self.phi.values,
                    self.step.lengths, self.step.values):
            h.update(";".join(f"{x:.12e}" for x in np.asarray(arr, dtype=float)).encode())
            h.update(b"|")
        return h.hexdigest()


def fuzz_corpus(seed=None, count=1, max_depth=6, arity=(2, 4), value_range=(1e-3, 1e3),
                max_pieces=64):
    """Yield ``count`` instances, each a (tree, phi) pair plus an independent step function."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    lo, hi = value_range
    for i in range(count):
        tree = random_tree(rng, max_depth, arity)
        phi = AtomFunction(tree, log_uniform(rng, tree.n_leaves, lo, hi))
        yield FuzzInstance(i, tree, phi, random_step(rng, max_pieces, lo, hi))


def random_g_kind(rng, scale=1.0):
    """One of the four non-decreasing G kinds with random parameters."""
    from .symmetrize import Constant, Identity, Power, PowerOfMax

    kind = int(rng.integers(4))
    if kind == 0:
        return Power(float(rng.uniform(0.5, 3.0)))
    if kind == 1:
        return PowerOfMax(float(rng.uniform(0.5, 3.0)), float(scale * rng.uniform(0.2, 2.0)))
    if kind == 2:
        return Identity()
    return Constant(float(rng.uniform(0.5, 2.0)))


def random_spec(rng, scale=1.0, weight_prob=0.25):
    """A FunctionalSpec with a composed G2 or, with probability ``weight_prob``, a step weight."""
    from .symmetrize import FunctionalSpec

    g1 = random_g_kind(rng, scale)
    if rng.random() < weight_prob:
        return FunctionalSpec.weighted(g1, random_step(rng, max_pieces=8, lo=0.1, hi=10.0))
    return FunctionalSpec(g1, random_g_kind(rng, scale))
