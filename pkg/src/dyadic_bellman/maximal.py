"""The tree maximal operator and the two classical inequalities it satisfies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import AtomFunction, DomainError, MalformedInputError, ProbTree


class DegenerateInputError(DomainError):
    """The input is identically zero where a norm must be positive."""


@dataclass(frozen=True)
class MaximalResult:
    """Per-leaf value of the maximal function and the node attaining it.

    On ties the shallowest (largest) node wins.
    """

    values: np.ndarray
    argmax: np.ndarray


def node_averages(tree: ProbTree, values):
    """Average of the atom values over every node; ``values`` may carry leading batch axes."""
    values = np.asarray(values, dtype=float)
    batch = values.shape[:-1]
    integ = np.zeros(batch + (tree.n_nodes,))
    integ[..., tree.leaves] = values * tree.leaf_measure
    for lvl in reversed(tree.levels[1:]):
        if values.ndim == 1:
            integ += np.bincount(tree.parent[lvl], weights=integ[lvl], minlength=tree.n_nodes)
        else:
            np.add.at(integ, (Ellipsis, tree.parent[lvl]), integ[..., lvl])
    return integ / tree.measure


def _path_max(tree: ProbTree, avg):
    best = avg.copy()
    arg = np.broadcast_to(np.arange(tree.n_nodes), avg.shape).copy()
    for lvl in tree.levels[1:]:
        up = tree.parent[lvl]
        keep = best[..., up] >= avg[..., lvl]
        best[..., lvl] = np.where(keep, best[..., up], avg[..., lvl])
        arg[..., lvl] = np.where(keep, arg[..., up], lvl)
    return best[..., tree.leaves], arg[..., tree.leaves]


def maximal_operator(tree: ProbTree, phi) -> MaximalResult:
    """M_T phi on every leaf: the largest node average along the root-to-leaf path."""
    values = _values_on(tree, phi)
    best, arg = _path_max(tree, node_averages(tree, np.abs(values)))
    return MaximalResult(best, arg)


def maximal_values(tree: ProbTree, values):
    """Batched M_T: ``values`` of shape (..., n_leaves) to the same shape."""
    return _path_max(tree, node_averages(tree, np.abs(values)))[0]


def _values_on(tree, phi):
    if isinstance(phi, AtomFunction):
        if phi.tree is not tree:
            raise MalformedInputError("phi is defined on a different tree")
        return phi.values
    values = np.asarray(phi, dtype=float)
    if values.shape != (tree.n_leaves,):
        raise MalformedInputError(f"expected {tree.n_leaves} leaf values, got {values.shape}")
    return values


class WeakTypeReport(NamedTuple):
    level_measure: float
    bound: float

    @property
    def holds(self):
        return self.level_measure <= self.bound * (1 + 1e-12)


def weak_type_report(tree: ProbTree, phi, lam, strict=True) -> WeakTypeReport:
    """Both sides of the weak (1,1) inequality at level ``lam``.

    ``strict`` selects {M_T phi > lam}; otherwise {M_T phi >= lam}.
    """
    if not lam > 0:
        raise DomainError("lam must be positive")
    values = _values_on(tree, phi)
    m = maximal_operator(tree, values).values
    mask = m > lam if strict else m >= lam
    mu = tree.leaf_measure
    return WeakTypeReport(float(mu[mask].sum()), float(np.dot(mu[mask], np.abs(values[mask])) / lam))


def lp_norm(tree: ProbTree, values, p):
    return float(np.dot(tree.leaf_measure, np.abs(values) ** p) ** (1.0 / p))


def doob_ratio(tree: ProbTree, phi, p) -> float:
    """||M_T phi||_p / (p/(p-1) ||phi||_p); never exceeds 1."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    values = _values_on(tree, phi)
    denom = lp_norm(tree, values, p)
    if denom == 0:
        raise DegenerateInputError("phi vanishes identically")
    m = maximal_operator(tree, values).values
    return lp_norm(tree, m, p) / (p / (p - 1) * denom)


def weak_type_levels(tree: ProbTree, phi):
    """Both sides of the weak (1,1) inequality at every critical level.

    The set {M phi > lam} only changes as lam crosses a value of M phi, and
    within such a gap the bound decreases in lam, so the non-strict sets
    {M phi >= m_j} at lam = m_j cover the worst case.  Returns arrays
    ``(lam, level_measure, bound)``.
    """
    values = np.abs(_values_on(tree, phi))
    m = maximal_operator(tree, values).values
    order = np.argsort(-m, kind="stable")
    ms = m[order]
    mu = tree.leaf_measure[order]
    cum_mu = np.cumsum(mu)
    cum_phi = np.cumsum(mu * values[order])
    # last index of each run of equal values closes the set {M >= m_j}
    last = np.flatnonzero(np.append(ms[1:] != ms[:-1], True))
    lam = ms[last]
    pos = lam > 0
    return lam[pos], cum_mu[last][pos], cum_phi[last][pos] / lam[pos]


def weak_type_violations_exact(tree: ProbTree, phi):
    """Count critical levels where the weak (1,1) inequality fails, in rational arithmetic.

    Leaf measures and values are taken as the exact rationals of their
    floats; internal node measures are the exact sums of their leaves.
    """
    from fractions import Fraction

    leaves = tree.leaves.tolist()
    values = [abs(Fraction(float(x))) for x in _values_on(tree, phi)]
    n = tree.n_nodes
    mass = [Fraction(0)] * n
    integ = [Fraction(0)] * n
    for leaf, v in zip(leaves, values):
        mass[leaf] = Fraction(float(tree.measure[leaf]))
        integ[leaf] = mass[leaf] * v
    for node in range(n - 1, 0, -1):
        up = int(tree.parent[node])
        mass[up] += mass[node]
        integ[up] += integ[node]
    best = [integ[0] / mass[0]] + [None] * (n - 1)
    for node in range(1, n):
        best[node] = max(best[int(tree.parent[node])], integ[node] / mass[node])
    order = sorted(range(len(leaves)), key=lambda j: best[leaves[j]], reverse=True)
    bad, level, total = 0, Fraction(0), Fraction(0)
    for pos, j in enumerate(order):
        level += mass[leaves[j]]
        total += integ[leaves[j]]
        lam = best[leaves[j]]
        closes = pos + 1 == len(order) or best[leaves[order[pos + 1]]] != lam
        if closes and lam > 0 and level * lam > total:
            bad += 1
    return bad
