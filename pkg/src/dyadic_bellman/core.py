"""Probability trees, simple functions on their atoms, and step-function calculus.

A tree is stored as flat arrays in any order where a parent precedes its
children (node 0 is the root).  Leaves are the atoms of the space; an
``AtomFunction`` assigns one value per leaf, in the order the leaves appear
in the node array.

A ``StepFunction`` is a non-increasing step function on ``(0, total]``.  On
piece ``i``, which covers ``(s_i, s_{i+1}]`` with value ``v_i``, the Hardy
average has the exact form::

    (1/t) * int_0^t g = v_i + C_i / t,   C_i = sum_{j<i} len_j * (v_j - v_i) >= 0

and everything downstream (averages, level crossings, closed-form integrals)
is expressed through the pair ``(v_i, C_i)``.
"""
from __future__ import annotations

import csv
from fractions import Fraction
from pathlib import Path

import numpy as np

REL_TOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class BelowMeanLevelError(DomainError):
    """A level at or below the mean of g has no crossing inside (0, 1)."""


class MalformedInputError(ValueError):
    """A CSV file or tree description does not satisfy its schema."""


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Trees
# --------------------------------------------------------------------------

class ProbTree:
    """Finite truncation of a tree of measurable sets on a probability space.

    ``measure[i]`` is the mass of node ``i`` and ``parent[i]`` its parent
    (``-1`` for the root).  Every internal node must have at least two
    children whose masses add up to its own.
    """

    def __init__(self, measure, parent, rel_tol=REL_TOL):
        measure = np.asarray(measure, dtype=float)
        parent = np.asarray(parent, dtype=np.int64)
        n = measure.size
        if n == 0 or parent.shape != measure.shape:
            raise MalformedInputError("measure and parent must be non-empty arrays of equal length")
        if parent[0] != -1:
            raise MalformedInputError("node 0 must be the root (parent -1)")
        if np.any(parent[1:] >= np.arange(1, n)) or np.any(parent[1:] < 0):
            raise MalformedInputError("every parent must precede its child")
        if np.any(~(measure > 0)):
            raise MalformedInputError("all node measures must be positive")
        if abs(measure[0] - 1.0) > rel_tol:
            raise MalformedInputError(f"root measure must be 1, got {measure[0]!r}")

        n_children = np.bincount(parent[1:], minlength=n)
        if np.any(n_children == 1):
            bad = int(np.flatnonzero(n_children == 1)[0])
            raise MalformedInputError(f"node {bad} has a single child; at least two are required")
        child_mass = np.bincount(parent[1:], weights=measure[1:], minlength=n)
        internal = n_children > 0
        err = np.abs(child_mass - measure)[internal]
        if np.any(err > rel_tol * measure[internal]):
            bad = int(np.flatnonzero(internal)[np.argmax(err / measure[internal])])
            raise MalformedInputError(
                f"children of node {bad} sum to {child_mass[bad]!r}, expected {measure[bad]!r}")

        depth = np.zeros(n, dtype=np.int64)
        if n > 1:
            while True:
                new = depth.copy()
                new[1:] = depth[parent[1:]] + 1
                if np.array_equal(new, depth):
                    break
                depth = new

        self.measure = _readonly(measure)
        self.parent = _readonly(parent, np.int64)
        self.depth = _readonly(depth, np.int64)
        self.n_children = _readonly(n_children, np.int64)
        self.leaves = _readonly(np.flatnonzero(n_children == 0), np.int64)
        order = np.argsort(depth, kind="stable")
        cuts = np.flatnonzero(np.diff(depth[order])) + 1
        self.levels = tuple(_readonly(lvl, np.int64) for lvl in np.split(order, cuts))

    @property
    def n_nodes(self):
        return self.measure.size

    @property
    def n_leaves(self):
        return self.leaves.size

    @property
    def max_depth(self):
        return int(self.depth.max())

    @property
    def leaf_measure(self):
        return self.measure[self.leaves]

    def children(self, node):
        return np.flatnonzero(self.parent == node)

    def ancestors(self, node):
        """Node ids on the path from ``node`` up to the root, ``node`` first."""
        path = [int(node)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path

    def __repr__(self):
        return f"ProbTree(nodes={self.n_nodes}, leaves={self.n_leaves}, depth={self.max_depth})"

    # constructors ---------------------------------------------------------

    @classmethod
    def uniform(cls, arity, depth):
        """Every node split into ``arity`` equal children, down to ``depth``."""
        if int(arity) < 2:
            raise MalformedInputError("arity must be at least 2")
        if int(depth) < 1:
            raise MalformedInputError("depth must be at least 1")
        measure, parent = [np.ones(1)], [np.array([-1])]
        start, width = 0, 1
        for _ in range(depth):
            parents = np.repeat(np.arange(start, start + width), arity)
            parent.append(parents)
            measure.append(np.repeat(measure[-1] / arity, arity))
            start, width = start + width, width * arity
        return cls(np.concatenate(measure), np.concatenate(parent))

    @classmethod
    def from_splits(cls, splits):
        """Build a tree from nested explicit masses.

        ``splits`` lists the root's children.  Each child is either a number
        (a leaf of that mass) or a pair ``(mass, [grandchildren...])``.
        When every mass is an ``int`` or ``Fraction`` the children sums are
        checked exactly; otherwise to relative tolerance 1e-12.
        """
        measure, parent = [Fraction(1)], [-1]
        exact = True

        def visit(children, pid):
            nonlocal exact
            if len(children) < 2:
                raise MalformedInputError(f"node {pid} needs at least two children")
            ids = []
            for child in children:
                mass, sub = (child, None) if np.isscalar(child) else child
                if not isinstance(mass, (int, Fraction)):
                    exact = False
                if not mass > 0:
                    raise MalformedInputError(f"non-positive mass {mass!r} under node {pid}")
                measure.append(mass)
                parent.append(pid)
                nid = len(measure) - 1
                ids.append(nid)
                if sub is not None:
                    visit(sub, nid)
            if exact and sum(measure[i] for i in ids) != measure[pid]:
                raise MalformedInputError(f"children of node {pid} do not sum exactly to its mass")

        # preorder: a child's subtree is emitted before its next sibling
        visit(list(splits), 0)
        return cls(np.array([float(m) for m in measure]), np.array(parent))


def build_tree(arity=None, depth=None, splits=None):
    """Either a uniform ``arity``-ary tree of the given depth, or explicit ``splits``."""
    if splits is not None:
        if arity is not None or depth is not None:
            raise MalformedInputError("give either arity/depth or splits, not both")
        return ProbTree.from_splits(splits)
    if arity is None or depth is None:
        raise MalformedInputError("uniform trees need both arity and depth")
    return ProbTree.uniform(arity, depth)


class AtomFunction:
    """A nonnegative simple function: one value per leaf of ``tree``."""

    def __init__(self, tree: ProbTree, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (tree.n_leaves,):
            raise MalformedInputError(
                f"expected {tree.n_leaves} leaf values, got shape {values.shape}")
        if np.any(~(values >= 0)):
            raise MalformedInputError("atom values must be nonnegative")
        self.tree = tree
        self.values = _readonly(values)

    @property
    def measures(self):
        return self.tree.leaf_measure

    def integral(self):
        return float(np.dot(self.measures, self.values))

    def moment(self, q):
        return float(np.dot(self.measures, self.values ** q))

    def scaled(self, c):
        return AtomFunction(self.tree, c * self.values)

    def __repr__(self):
        return f"AtomFunction({self.tree!r}, mean={self.integral():.6g})"


# --------------------------------------------------------------------------
# Step functions
# --------------------------------------------------------------------------

class StepFunction:
    """Non-increasing step function with pieces ``(length, value)``."""

    def __init__(self, lengths, values):
        lengths = np.asarray(lengths, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if lengths.size == 0 or lengths.shape != values.shape:
            raise MalformedInputError("lengths and values must be non-empty and equally long")
        if np.any(~(lengths > 0)):
            raise MalformedInputError("piece lengths must be positive")
        if np.any(~(values >= 0)):
            raise MalformedInputError("step values must be nonnegative")
        if np.any(np.diff(values) > 0):
            raise MalformedInputError("step values must be non-increasing")
        breaks = np.concatenate(([0.0], np.cumsum(lengths)))
        cum = np.concatenate(([0.0], np.cumsum(lengths * values)))
        excess = np.concatenate(([0.0], np.cumsum(breaks[1:-1] * (values[:-1] - values[1:]))))
        self.lengths = _readonly(lengths)
        self.values = _readonly(values)
        self.breaks = _readonly(breaks)
        self.cum = _readonly(cum)
        self.excess = _readonly(excess)

    @classmethod
    def constant(cls, value, length=1.0):
        return cls([length], [value])

    @classmethod
    def from_pairs(cls, pairs):
        lengths, values = zip(*pairs)
        return cls(lengths, values)

    @property
    def n_pieces(self):
        return self.lengths.size

    @property
    def total(self):
        return float(self.breaks[-1])

    def integral(self):
        return float(self.cum[-1])

    def pairs(self):
        return list(zip(self.lengths.tolist(), self.values.tolist()))

    def piece_index(self, t):
        """Index of the piece containing ``t`` (pieces are right-closed)."""
        idx = np.searchsorted(self.breaks, t, side="left") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def __call__(self, t):
        return self.values[self.piece_index(t)]

    def cumulative(self, t):
        """int_0^t g, exact."""
        return np.interp(t, self.breaks, self.cum)

    def scaled(self, c):
        return StepFunction(self.lengths, c * self.values)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (np.array_equal(self.lengths, other.lengths)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"StepFunction(pieces={self.n_pieces}, total={self.total:.6g}, mean={self.integral():.6g})"


def _check_t(g: StepFunction, t):
    t = np.asarray(t, dtype=float)
    top = g.total * (1 + REL_TOL)
    if np.any(~(t > 0)) or np.any(t > top):
        raise DomainError(f"t must lie in (0, {g.total}]")
    return np.minimum(t, g.total)


def decreasing_rearrangement(phi: AtomFunction) -> StepFunction:
    """Atoms sorted by value, largest first; ties keep the original leaf order."""
    order = np.argsort(-phi.values, kind="stable")
    return StepFunction(phi.measures[order], phi.values[order])


def hardy_average(g: StepFunction, t):
    """(1/t) int_0^t g, evaluated exactly; ``t`` may be an array."""
    t = _check_t(g, t)
    i = g.piece_index(t)
    out = g.values[i] + g.excess[i] / t
    return float(out) if out.ndim == 0 else out


def step_power_integral(g: StepFunction, q, t=None):
    """int_0^t g^q, closed form (the partial piece is prorated)."""
    t = g.total if t is None else t
    t = _check_t(g, t)
    cum_q = np.concatenate(([0.0], np.cumsum(g.lengths * g.values ** q)))
    out = np.interp(t, g.breaks, cum_q)
    return float(out) if np.ndim(out) == 0 else out


def beta_lambda(g: StepFunction, lam):
    """The largest t in (0, 1] with hardy_average(g, t) = lam.

    Raises ``BelowMeanLevelError`` when ``lam`` does not exceed the mean of
    g.  Returns ``0.0`` when ``lam`` exceeds the top value of g, since the
    level is then never reached.
    """
    lam = float(lam)
    f = g.integral()
    if not lam > f:
        raise BelowMeanLevelError(f"level {lam!r} must exceed the mean {f!r} of g")
    if lam > g.values[0]:
        return 0.0
    avg_at_breaks = g.cum[1:] / g.breaks[1:]
    # last breakpoint whose average still reaches lam; the root is in the next piece
    j = int(np.flatnonzero(avg_at_breaks >= lam)[-1]) + 1
    v, c = g.values[j], g.excess[j]
    t = c / (lam - v)
    return float(min(max(t, g.breaks[j]), g.breaks[j + 1]))


def merged_breaks(*steps, upto=None):
    """Sorted union of the breakpoints of several step functions within (0, upto]."""
    upto = min(s.total for s in steps) if upto is None else upto
    pts = np.unique(np.concatenate([s.breaks for s in steps] + [[0.0, upto]]))
    return pts[pts <= upto]


def step_product_integral(g1: StepFunction, g2: StepFunction):
    """int_0^T g1 g2 over the common domain, exact."""
    pts = merged_breaks(g1, g2)
    mid = 0.5 * (pts[:-1] + pts[1:])
    return float(np.sum(np.diff(pts) * g1(mid) * g2(mid)))


def rearrange_values(tree: ProbTree, values):
    """Shorthand for the decreasing rearrangement of a value vector on ``tree``."""
    return decreasing_rearrangement(AtomFunction(tree, values))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def write_step_csv(g: StepFunction, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["length", "value"])
        for length, value in g.pairs():
            w.writerow([repr(length), repr(value)])


def read_step_csv(path, total_tol=1e-9) -> StepFunction:
    rows = _read_rows(path, ["length", "value"])
    try:
        lengths = [float(r["length"]) for r in rows]
        values = [float(r["value"]) for r in rows]
    except ValueError as exc:
        raise MalformedInputError(f"{path}: non-numeric entry ({exc})") from None
    if abs(sum(lengths) - 1.0) > total_tol:
        raise MalformedInputError(f"{path}: lengths sum to {sum(lengths)!r}, expected 1")
    return StepFunction(lengths, values)


def write_atom_csv(phi: AtomFunction, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["leaf_index", "measure", "value"])
        for i, (m, v) in enumerate(zip(phi.measures.tolist(), phi.values.tolist())):
            w.writerow([i, repr(m), repr(v)])


def read_atom_csv(path, tree: ProbTree) -> AtomFunction:
    rows = _read_rows(path, ["leaf_index", "measure", "value"])
    try:
        index = [int(r["leaf_index"]) for r in rows]
        measure = np.array([float(r["measure"]) for r in rows])
        values = [float(r["value"]) for r in rows]
    except ValueError as exc:
        raise MalformedInputError(f"{path}: non-numeric entry ({exc})") from None
    if index != list(range(tree.n_leaves)):
        raise MalformedInputError(f"{path}: leaf_index must run 0..{tree.n_leaves - 1} in order")
    if np.any(np.abs(measure - tree.leaf_measure) > 1e-9 * tree.leaf_measure):
        raise MalformedInputError(f"{path}: measures do not match the tree's leaves")
    return AtomFunction(tree, values)


def _read_rows(path, header):
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != header:
            raise MalformedInputError(f"{path}: header must be {','.join(header)}")
        rows = [{k.strip(): v for k, v in r.items()} for r in reader]
    if not rows:
        raise MalformedInputError(f"{path}: no data rows")
    return rows
