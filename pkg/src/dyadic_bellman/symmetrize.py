"""Both sides of the rearrangement identity for G1(M_T phi) G2(phi).

The right side integrates ``G1(hardy_average(g, t)) * w(t)`` over ``(0, k]``
where ``w`` is either ``G2(g(t))`` or an explicit non-increasing weight.  The
left side integrates ``G1(M_T phi) G2(phi)`` over the best set of measure
``k``.  Three routes connect them: exhaustive search over rearrangements on
small uniform trees, the dominance inequality for arbitrary phi, and a
family of chain-shaped trees whose functional values approach the right
side as the splitting parameter ``a`` goes to 0.
"""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from more_itertools import distinct_permutations
from scipy.integrate import quad_vec

from .core import (AtomFunction, DomainError, MalformedInputError, ProbTree, StepFunction,
                   decreasing_rearrangement, merged_breaks)
from .maximal import maximal_values, node_averages

QUAD_RTOL = 1e-10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
MAX_BRUTE_FORCE_ATOMS = 10


# --------------------------------------------------------------------------
# Increasing functions on [0, inf)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Power:
    q: float

    def __post_init__(self):
        if not self.q >= 0:
            raise DomainError("Power exponent must be >= 0 to keep G non-decreasing")

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** self.q


@dataclass(frozen=True)
class PowerOfMax:
    """x -> max(x, L)^q."""

    q: float
    L: float

    def __post_init__(self):
        if not (self.q >= 0 and self.L >= 0):
            raise DomainError("PowerOfMax needs q >= 0 and L >= 0")

    def __call__(self, x):
        return np.maximum(np.asarray(x, dtype=float), self.L) ** self.q


@dataclass(frozen=True)
class Identity:
    def __call__(self, x):
        return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError("Constant must be nonnegative")

    def __call__(self, x):
        return np.full(np.shape(x), float(self.c))


_KINDS = (Power, PowerOfMax, Identity, Constant)


@dataclass(frozen=True)
class FunctionalSpec:
    """G1 paired with either a composed G2 or an explicit weight h."""

    g1: object
    g2: object = Constant(1.0)
    weight: StepFunction | None = None

    def __post_init__(self):
        if not isinstance(self.g1, _KINDS):
            raise DomainError(f"unsupported G1 {self.g1!r}")
        if self.weight is None:
            if not isinstance(self.g2, _KINDS):
                raise DomainError(f"unsupported G2 {self.g2!r}")
        elif not isinstance(self.weight, StepFunction):
            raise DomainError("weight must be a StepFunction (non-increasing by construction)")

    @classmethod
    def weighted(cls, g1, h: StepFunction):
        return cls(g1, None, h)

    @property
    def is_weighted(self):
        return self.weight is not None


# --------------------------------------------------------------------------
# int G(v + C/t) dt on [t1, t2]
# --------------------------------------------------------------------------

def _log_ratio(t1, t2):
    return np.log1p((t2 - t1) / t1)


def _power_closed(q, v, C, t1, t2):
    """Binomial expansion of (v + C/t)^q for integer q; requires t1 > 0 where C > 0."""
    out = binom_term = v ** q * (t2 - t1)
    for j in range(1, q + 1):
        if j == 1:
            integral = _log_ratio(t1, t2)
        else:
            # int t^-j = t1^(1-j) (1 - (t1/t2)^(j-1)) / (j-1), without cancellation
            integral = -t1 ** (1 - j) * np.expm1((j - 1) * np.log(t1 / t2)) / (j - 1)
        binom_term = math.comb(q, j) * v ** (q - j) * C ** j * integral
        out = out + binom_term
    return out


def _power_quad(q, v, C, t1, t2):
    """Adaptive quadrature of (v + C/t)^q in the variable log t, all rows at once."""
    lo, width = np.log(t1), _log_ratio(t1, t2)

    def integrand(x):
        t = np.exp(lo + x * width)
        return (v + C / t) ** q * t * width

    # rows are scaled by a coarse estimate so the relative tolerance applies to each
    guess = sum(w * integrand(0.5 * (x + 1)) for x, w in zip(_GL_NODES, _GL_WEIGHTS)) * 0.5
    scale = np.where(guess > 0, guess, 1.0)
    res, _ = quad_vec(lambda x: integrand(x) / scale, 0.0, 1.0, epsrel=QUAD_RTOL * 1e-2,
                      epsabs=0.0, norm="max", limit=200)
    return res * scale


def power_of_average_integral(q, v, C, t1, t2):
    """int_{t1}^{t2} (v + C/t)^q dt for arrays of (v, C, t1, t2); rows with C = 0 may have t1 = 0."""
    v, C, t1, t2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (v, C, t1, t2)))
    out = np.zeros(v.shape)
    flat = (C <= 0) | (q == 0)
    out[flat] = (v[flat] ** q) * (t2[flat] - t1[flat])
    rest = ~flat & (t2 > t1)
    if np.any(rest):
        args = (v[rest], C[rest], t1[rest], t2[rest])
        if float(q).is_integer():
            out[rest] = _power_closed(int(q), *args)
        else:
            out[rest] = _power_quad(q, *args)
    return out


def g_of_average_integral(G, v, C, t1, t2):
    """int_{t1}^{t2} G(v + C/t) dt, where v + C/t is the Hardy average on a piece."""
    v, C, t1, t2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (v, C, t1, t2)))
    if isinstance(G, Constant):
        return G.c * (t2 - t1)
    if isinstance(G, Identity):
        return power_of_average_integral(1, v, C, t1, t2)
    if isinstance(G, Power):
        return power_of_average_integral(G.q, v, C, t1, t2)
    if isinstance(G, PowerOfMax):
        # the average decreases in t and meets L at t = C / (L - v)
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(v >= G.L, np.inf, np.where(C > 0, C / (G.L - v), 0.0))
        mid = np.clip(cross, t1, t2)
        high = power_of_average_integral(G.q, v, C, t1, mid)
        return high + G.L ** G.q * (t2 - mid)
    raise DomainError(f"unsupported G {G!r}")


# --------------------------------------------------------------------------
# Right side
# --------------------------------------------------------------------------

def _check_k(k):
    if not 0 < k <= 1 + 1e-12:
        raise DomainError(f"k must lie in (0, 1], got {k!r}")
    return min(float(k), 1.0)


def _rhs_segments(g: StepFunction, spec: FunctionalSpec, k):
    """Split (0, k] into intervals where both the average form and the weight are fixed."""
    k = min(k, g.total)
    if spec.is_weighted:
        pts = merged_breaks(g, spec.weight, upto=k)
    else:
        pts = np.unique(np.concatenate((g.breaks[g.breaks < k], [k])))
    t1, t2 = pts[:-1], pts[1:]
    mid = 0.5 * (t1 + t2)
    i = g.piece_index(mid)
    w = spec.weight(mid) if spec.is_weighted else spec.g2(g.values[i])
    return g.values[i], g.excess[i], t1, t2, w


def rhs_integral(g: StepFunction, spec: FunctionalSpec, k=1.0) -> float:
    """int_0^k G1(hardy_average(g, t)) w(t) dt, piece by piece."""
    k = _check_k(k)
    v, C, t1, t2, w = _rhs_segments(g, spec, k)
    live = w != 0
    return float(np.sum(w[live] * g_of_average_integral(spec.g1, v[live], C[live], t1[live], t2[live])))


# --------------------------------------------------------------------------
# Left side
# --------------------------------------------------------------------------

def _greedy_fill(integrand, mu, k):
    """Best integral of a nonnegative integrand over a set of measure k (boundary atom prorated)."""
    order = np.argsort(-integrand, axis=-1, kind="stable")
    vals = np.take_along_axis(integrand, order, axis=-1)
    m = np.broadcast_to(mu, integrand.shape)
    m = np.take_along_axis(m, order, axis=-1)
    before = np.cumsum(m, axis=-1) - m
    take = np.clip(k - before, 0.0, m)
    return np.sum(take * vals, axis=-1)


def _weighted_fill(g1_of_m, mu, h: StepFunction, k):
    """int_0^k G1(M*)(t) h(t) dt: sort atoms by G1(M), then integrate h over their slots."""
    order = np.argsort(-g1_of_m, axis=-1, kind="stable")
    vals = np.take_along_axis(g1_of_m, order, axis=-1)
    m = np.take_along_axis(np.broadcast_to(mu, g1_of_m.shape), order, axis=-1)
    cum = np.cumsum(m, axis=-1)
    ends = np.minimum(cum, k)
    starts = np.minimum(cum - m, k)
    H = lambda t: np.interp(t, h.breaks, h.cum)  # noqa: E731
    return np.sum(vals * (H(ends) - H(starts)), axis=-1)


def lhs_batch(tree: ProbTree, values, spec: FunctionalSpec, k=1.0):
    """The left functional for a stack of value vectors of shape (..., n_leaves)."""
    k = _check_k(k)
    values = np.asarray(values, dtype=float)
    m = maximal_values(tree, values)
    mu = tree.leaf_measure
    if spec.is_weighted:
        return _weighted_fill(spec.g1(m), mu, spec.weight, k)
    return _greedy_fill(spec.g1(m) * spec.g2(values), mu, k)


def lhs_functional(tree: ProbTree, phi: AtomFunction, spec: FunctionalSpec, k=1.0) -> float:
    """sup over K with mu(K) = k of int_K G1(M_T phi) G2(phi).

    In weight mode this is int_0^k G1((M_T phi)*) h instead, whose best K
    is (0, k] since both factors are non-increasing.
    """
    if phi.tree is not tree:
        raise MalformedInputError("phi is defined on a different tree")
    return float(lhs_batch(tree, phi.values, spec, k))


# --------------------------------------------------------------------------
# Exhaustive search
# --------------------------------------------------------------------------

class SearchTooLargeError(DomainError):
    pass


def brute_force_sup(g: StepFunction, tree: ProbTree, spec: FunctionalSpec, k=1.0,
                    block=4096, workers=1):
    """Maximum of the left functional over every distinct placement of g's values on the leaves.

    Returns ``(value, assignment)``.
    """
    n = g.n_pieces
    if n > MAX_BRUTE_FORCE_ATOMS:
        raise SearchTooLargeError(
            f"{n} atoms means up to {n}! placements; use build_extremizer / "
            "extremizer_lower_bound for bounds at this size")
    if tree.n_leaves != n:
        raise MalformedInputError(f"tree has {tree.n_leaves} leaves, g has {n} pieces")
    if not (np.allclose(g.lengths, 1.0 / n, rtol=1e-12)
            and np.allclose(tree.leaf_measure, 1.0 / n, rtol=1e-12)):
        raise MalformedInputError("brute force needs equal pieces and uniform leaves")

    perms = distinct_permutations(g.values.tolist())
    blocks = iter(lambda: list(itertools.islice(perms, block)), [])

    def best_in(chunk):
        arr = np.array(chunk)
        vals = lhs_batch(tree, arr, spec, k)
        j = int(np.argmax(vals))
        return float(vals[j]), tuple(arr[j].tolist())

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(best_in, blocks))
    else:
        results = [best_in(b) for b in blocks]
    return max(results, key=lambda r: r[0])


# --------------------------------------------------------------------------
# Chain extremizers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremizerTree:
    """Chain tree I_0 > I_1 > ... > I_M with blocks A_m = I_m minus I_(m+1).

    ``tau[m] = (1-a)^m`` is the mass of I_m, ``theta[m]`` the average of
    phi_a over I_m and ``gamma[m]`` its average over A_m.
    """

    tree: ProbTree
    a: float
    levels: int
    tau: np.ndarray
    chain: np.ndarray
    blocks: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray


def levels_for_tail(g: StepFunction, a, tail_tol=1e-6):
    """Smallest M with int_0^{(1-a)^M} g below tail_tol times the mean of g."""
    _check_a(a)
    target = tail_tol * g.integral()
    if g.cumulative(g.total) <= target:
        return 0
    bound = max(1, math.ceil(math.log(target / g.values[0]) / math.log1p(-a)) + 1)
    tau = np.power(1.0 - a, np.arange(bound + 1))
    below = np.flatnonzero(g.cumulative(tau) < target)
    return int(below[0])


def _check_a(a):
    if not 0 < a < 1:
        raise DomainError(f"a must lie in (0, 1), got {a!r}")


def _tau(a, levels):
    return np.power(1.0 - a, np.arange(levels + 1, dtype=float))


def build_extremizer(g: StepFunction, a, levels, tail_tol=1e-6, check=True):
    """Chain tree with parameter ``a`` and a rearrangement phi_a of g on it.

    A_m receives g restricted to ((1-a)^(m+1), (1-a)^m], one leaf per piece
    of g inside that window.  Everything below (1-a)^levels collapses into a
    single terminal atom carrying its average.  ``tail_tol=None`` skips the
    tail-size precondition.
    """
    _check_a(a)
    if int(levels) < 1:
        raise DomainError("levels must be at least 1")
    levels = int(levels)
    if abs(g.total - 1.0) > 1e-9:
        raise DomainError("g must live on (0, 1]")
    f = g.integral()
    tau = _tau(a, levels)
    if tail_tol is not None and g.cumulative(tau[-1]) >= tail_tol * f:
        need = levels_for_tail(g, a, tail_tol)
        raise DomainError(f"levels={levels} leaves tail mass {g.cumulative(tau[-1]):.3g}; "
                          f"need at least {need} levels for tail_tol={tail_tol}")

    measure, parent, leaf_value = [1.0], [-1], {}
    chain, blocks = [0], []
    for m in range(levels):
        lo, hi = tau[m + 1], tau[m]
        nxt = len(measure)
        measure.append(lo)
        parent.append(chain[-1])
        blk = len(measure)
        measure.append(hi - lo)
        parent.append(chain[-1])
        inner = g.breaks[(g.breaks > lo) & (g.breaks < hi)]
        pts = np.concatenate(([lo], inner, [hi]))
        vals = g((pts[:-1] + pts[1:]) * 0.5)
        if pts.size == 2:
            leaf_value[blk] = float(vals[0])
        else:
            # order-preserving copy of the window
            for length, value in zip(np.diff(pts), vals):
                leaf_value[len(measure)] = float(value)
                measure.append(length)
                parent.append(blk)
        chain.append(nxt)
        blocks.append(blk)
    leaf_value[chain[-1]] = float(g.cumulative(tau[-1]) / tau[-1])

    tree = ProbTree(np.array(measure), np.array(parent))
    phi = AtomFunction(tree, [leaf_value[int(i)] for i in tree.leaves])
    theta = g.cumulative(tau) / tau
    gamma = (g.cumulative(tau[:-1]) - g.cumulative(tau[1:])) / (tau[:-1] - tau[1:])
    ext = ExtremizerTree(tree, float(a), levels, tau, np.array(chain), np.array(blocks), theta, gamma)
    if check:
        _self_check(ext, phi, g)
    return ext, phi


def truncated_step(g: StepFunction, cut):
    """g with (0, cut] flattened to its average there."""
    keep = g.breaks[1:] > cut
    lengths = np.concatenate(([cut], g.breaks[1:][keep] - np.maximum(g.breaks[:-1][keep], cut)))
    values = np.concatenate(([g.cumulative(cut) / cut], g.values[keep]))
    if values.size > 1:
        # the head average can round just below the value that follows it
        values[0] = max(values[0], values[1])
    pos = lengths > 0
    return StepFunction(lengths[pos], values[pos])


def _self_check(ext: ExtremizerTree, phi: AtomFunction, g: StepFunction, tol=1e-9):
    avg = node_averages(ext.tree, phi.values)
    scale = max(g.values[0], 1e-300)
    if np.max(np.abs(avg[ext.chain] - ext.theta)) > tol * scale:
        raise RuntimeError("chain averages do not reproduce theta_m")
    if ext.blocks.size and np.max(np.abs(avg[ext.blocks] - ext.gamma)) > tol * scale:
        raise RuntimeError("block averages do not reproduce gamma_m")
    ref = truncated_step(g, ext.tau[-1])
    got = decreasing_rearrangement(phi)
    pts = merged_breaks(ref, got, upto=1.0)
    mid = 0.5 * (pts[:-1] + pts[1:])
    if np.sum(np.diff(pts) * np.abs(ref(mid) - got(mid))) > tol * max(g.integral(), 1e-300):
        raise RuntimeError("phi_a is not a rearrangement of the truncated g")


def extremizer_lower_bound(g: StepFunction, a, levels, spec: FunctionalSpec, tail_tol=1e-6):
    """sum_m G1(theta_m) int_{A_m} G2(phi_a), a lower bound for the left side on the chain tree."""
    if spec.is_weighted:
        raise DomainError("the chain lower bound is defined for the composed G2 mode")
    _check_a(a)
    tau = _tau(a, int(levels))
    f = g.integral()
    if tail_tol is not None and g.cumulative(tau[-1]) >= tail_tol * f:
        raise DomainError(f"levels={levels} too small for tail_tol={tail_tol}")
    theta = g.cumulative(tau) / tau
    cum_g2 = np.concatenate(([0.0], np.cumsum(g.lengths * spec.g2(g.values))))
    chunk = np.interp(tau[:-1], g.breaks, cum_g2) - np.interp(tau[1:], g.breaks, cum_g2)
    g1 = spec.g1(theta)
    tail = g1[-1] * spec.g2(theta[-1]) * tau[-1]
    return float(np.sum(g1[:-1] * chunk) + tail)


@dataclass(frozen=True)
class SweepRecord:
    a: float
    levels: int
    lower_bound: float
    rhs: float
    rel_gap: float


def extremizer_sweep(g: StepFunction, spec: FunctionalSpec, a_values, tail_tol=1e-6):
    """Lower bound versus the right side for each ``a``, sorted by decreasing ``a``."""
    rhs = rhs_integral(g, spec, 1.0)
    out = []
    for a in sorted(a_values, reverse=True):
        levels = max(1, levels_for_tail(g, a, tail_tol))
        lb = extremizer_lower_bound(g, a, levels, spec, tail_tol)
        out.append(SweepRecord(float(a), levels, lb, rhs, (rhs - lb) / rhs if rhs else 0.0))
    return out


def write_sweep_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "M_trunc", "lower_bound", "rhs", "rel_gap"])
        for r in records:
            w.writerow([repr(r.a), r.levels, repr(r.lower_bound), repr(r.rhs), repr(r.rel_gap)])
