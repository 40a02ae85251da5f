"""The functionals v_g(L), u_g(L), the power-law extremals and the sharpness sequence.

For non-increasing g with mean f and L >= f::

    v_g(L) = int_0^1 max(Av g(t), L)^p dt
    u_g(L) = int_0^1 g(t) max(Av g(t), L)^(p-1) dt

where ``Av g(t) = (1/t) int_0^t g``.  Below the threshold L0 = p/(p-1) f the
function ``K t^(-1+1/c)`` on (0, gamma], continued by the constant L/c,
makes ``max(Av g, L) = c g`` and attains the Bellman function.  Above it a
sequence of such functions with L_n increasing to L0 approaches the bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bellman import BellmanPoint, bellman3, conjugate, hp, omega
from .core import DomainError, StepFunction, beta_lambda
from .symmetrize import (FunctionalSpec, Identity, Power, PowerOfMax, g_of_average_integral,
                         rhs_integral)

GAMMA_CLAMP = 1e-12


class WrongBranchError(DomainError):
    """The threshold L is on the other side of L0 for the requested construction."""


# --------------------------------------------------------------------------
# Power-law extremal
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawExtremal:
    """g(t) = K t^(-1+1/c) on (0, gamma], L/c on (gamma, 1]."""

    p: float
    f: float
    F: float
    L: float
    b: float
    c: float
    gamma: float
    K: float

    @property
    def exponent(self):
        return -1.0 + 1.0 / self.c

    @property
    def tail_value(self):
        return self.L / self.c

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            head = self.K * t ** self.exponent
        return np.where(t <= self.gamma, head, self.tail_value)

    def cumulative(self, t):
        """int_0^t g."""
        t = np.asarray(t, dtype=float)
        head = self.K * self.c * np.minimum(t, self.gamma) ** (1.0 / self.c)
        return head + self.tail_value * np.maximum(t - self.gamma, 0.0)

    def hardy_average(self, t):
        t = np.asarray(t, dtype=float)
        return self.cumulative(t) / t

    def power_integral(self, q, t=1.0):
        """int_0^t g^q; finite while q (1 - 1/c) < 1."""
        t = np.asarray(t, dtype=float)
        e = 1.0 + q * self.exponent
        if e <= 0:
            raise DomainError(f"int g^{q} diverges at 0 for c={self.c}")
        s = np.minimum(t, self.gamma)
        head = self.K ** q * s ** e / e if self.K > 0 else np.zeros_like(s)
        return head + self.tail_value ** q * np.maximum(t - self.gamma, 0.0)

    def head_moment(self):
        """int_0^gamma g^p, written as L^p gamma / H_p(c) to avoid the small exponent."""
        if self.gamma == 0:
            return 0.0
        return self.L ** self.p * self.gamma / hp(self.p, self.c)

    def crossing(self, lam):
        """The t in (0, gamma] where Av g(t) = lam, for lam >= L."""
        if self.gamma == 0 or self.c == 1:
            return 0.0
        return float((lam / (self.c * self.K)) ** (self.c / (1.0 - self.c)))

    def to_step(self, ratio=0.9, tail_tol=1e-6, max_pieces=200_000) -> StepFunction:
        """Discretize on the geometric grid gamma * ratio^j.

        Each grid cell becomes two equal half-pieces whose values reproduce
        the cell's integrals of g and g^p exactly.  Below the last grid point
        g is flattened to its average; the grid is extended until that tail
        carries less than ``tail_tol`` of both int g and int g^p.
        """
        if self.gamma == 0:
            return StepFunction([1.0], [self.tail_value])
        p = self.p
        e = hp(p, self.c) / self.c ** p
        # int_0^s g^p = head_moment * (s/gamma)^e  and  int_0^s g = L gamma (s/gamma)^(1/c)
        need_p = math.log(tail_tol) / (e * math.log(ratio))
        need_1 = math.log(tail_tol * self.f / (self.L * self.gamma)) / (math.log(ratio) / self.c)
        cells = max(1, math.ceil(max(need_p, need_1, 1.0)))
        if 2 * cells + 2 > max_pieces:
            raise DomainError(f"{2 * cells} pieces needed for tail_tol={tail_tol}; "
                              "the instance is too close to L0 for a step discretization")
        grid = self.gamma * ratio ** np.arange(cells + 1, dtype=float)
        if grid[-1] < 1e-200:
            raise DomainError(f"tail_tol={tail_tol} pushes the grid below 1e-200; "
                              "not representable in double precision")
        hi, lo = grid[:-1], grid[1:]
        width = hi - lo
        mean = (self.cumulative(hi) - self.cumulative(lo)) / width
        pmean = self.head_moment() * ((hi / self.gamma) ** e - (lo / self.gamma) ** e) / width
        with np.errstate(over="ignore", invalid="ignore"):
            finite = np.all(np.isfinite(mean ** p)) and np.all(np.isfinite(pmean))
        if not finite:
            raise DomainError("cell moments overflow; raise tail_tol")
        delta = _two_point_spread(p, mean, pmean)
        # left to right: tail block, then cells from 0 outward, then the flat part
        lengths = [grid[-1]]
        values = [float(self.cumulative(grid[-1]) / grid[-1])]
        for j in range(cells - 1, -1, -1):
            lengths += [width[j] / 2, width[j] / 2]
            values += [mean[j] + delta[j], mean[j] - delta[j]]
        if self.gamma < 1:
            lengths.append(1.0 - self.gamma)
            values.append(self.tail_value)
        return StepFunction(lengths, values)


def _two_point_spread(p, mean, pmean, iters=200):
    """delta >= 0 with ((m+d)^p + (m-d)^p) / 2 = P, by bisection on [0, m]."""
    target = np.maximum(pmean, mean ** p)
    lo, hi = np.zeros_like(mean), mean.copy()
    if np.any(((2 * mean) ** p) / 2 < target * (1 - 1e-12)):
        raise DomainError("cell too heterogeneous for a two-point moment match")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        big = ((mean + mid) ** p + (mean - mid) ** p) / 2 > target
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
        if np.all(hi - lo <= 1e-15 * mean):
            break
    return 0.5 * (lo + hi)


def solve_extremal_g(p, f, F, L, rtol=1e-9) -> PowerLawExtremal:
    """The power-law g with int g = f, int g^p = F and max(Av g, L) = c g, for f <= L < L0."""
    pt = BellmanPoint(p, f, F, L)
    if not L < pt.L0:
        raise WrongBranchError(f"L={L} >= L0={pt.L0}; use sharpness_sequence for this branch")
    b = pt.b
    if not 0 < b <= 1 + 1e-12:
        raise DomainError(f"b={b} outside (0, 1]")
    b = min(b, 1.0)
    c = omega(p, b)
    if c == 1.0 or b == 1.0:
        # only the constant function has F = f^p
        return PowerLawExtremal(p, f, F, L, b, 1.0, 0.0, float(f))

    gamma_F = (F - L ** p / c ** p) / (L ** p * (1.0 / b - 1.0 / c ** p))
    gamma_f = (f - L / c) / (L * (1.0 - 1.0 / c))
    if abs(gamma_F - gamma_f) > rtol * max(1.0, abs(gamma_f)):
        raise RuntimeError(f"gamma formulas disagree: {gamma_F!r} vs {gamma_f!r}")
    gamma = gamma_F
    if gamma < 0:
        if gamma < -GAMMA_CLAMP:
            raise RuntimeError(f"gamma={gamma!r} < 0")
        gamma = 0.0
    if gamma > 1:
        if gamma > 1 + GAMMA_CLAMP:
            raise RuntimeError(f"gamma={gamma!r} > 1")
        gamma = 1.0
    K = (L / c) * gamma ** (1.0 - 1.0 / c) if gamma > 0 else 0.0
    g = PowerLawExtremal(p, f, F, L, b, c, gamma, K)
    _verify_extremal(g, rtol)
    return g


def _verify_extremal(g: PowerLawExtremal, rtol):
    mean = float(g.cumulative(1.0))
    moment = g.head_moment() + g.tail_value ** g.p * (1.0 - g.gamma)
    if abs(mean - g.f) > rtol * g.f:
        raise RuntimeError(f"int g = {mean!r}, expected {g.f!r}")
    if abs(moment - g.F) > rtol * g.F:
        raise RuntimeError(f"int g^p = {moment!r}, expected {g.F!r}")
    if g.gamma > 0:
        at_gamma = g.K * g.c * g.gamma ** g.exponent
        if abs(at_gamma - g.L) > rtol * g.L:
            raise RuntimeError("g is not continuous at gamma")
    t = np.linspace(1e-3, 1.0, 1000)
    lhs = np.maximum(g.hardy_average(t), g.L)
    if np.max(np.abs(lhs - g.c * g(t)) / lhs) > rtol:
        raise RuntimeError("max(Av g, L) != c g on the check grid")


# --------------------------------------------------------------------------
# v_g and u_g
# --------------------------------------------------------------------------

def vu_functionals(g, p, L):
    """(v_g(L), u_g(L)) for a StepFunction or a PowerLawExtremal."""
    if isinstance(g, PowerLawExtremal):
        return _vu_power_law(g, p, L)
    if not isinstance(g, StepFunction):
        raise TypeError("g must be a StepFunction or a PowerLawExtremal")
    f = g.integral()
    if L < f:
        warnings.warn(f"L={L} below the mean {f}; the maximum never reaches L", stacklevel=2)
    if L <= f:
        beta = g.total
    elif L > g.values[0]:
        beta = 0.0
    else:
        beta = beta_lambda(g, L)
    v_head = u_head = 0.0
    if beta > 0:
        v_head = rhs_integral(g, FunctionalSpec(Power(p)), beta)
        u_head = rhs_integral(g, FunctionalSpec(Power(p - 1), Identity()), beta)
    rest = g.total - beta
    v = v_head + L ** p * rest
    u = u_head + L ** (p - 1) * (f - float(g.cumulative(beta)))
    return v, u


def _vu_power_law(g: PowerLawExtremal, p, L):
    if p != g.p:
        raise DomainError("closed forms need the extremal's own exponent")
    if g.c == 1.0 or g.gamma == 0:
        level = max(g.tail_value, L)
        return level ** p, g.tail_value * level ** (p - 1)
    if L >= g.L:
        s = g.crossing(L)
        head = g.head_moment() * (s / g.gamma) ** (hp(p, g.c) / g.c ** p)
        v = g.c ** p * head + L ** p * (1.0 - s)
        u = g.c ** (p - 1) * head + L ** (p - 1) * (g.f - float(g.cumulative(s)))
        return v, u
    # past gamma the average is L/c + C/t with C = L gamma (1 - 1/c)
    head = g.head_moment()
    C = g.L * g.gamma * (1.0 - 1.0 / g.c)
    v_tail = g_of_average_integral(PowerOfMax(p, L), g.tail_value, C, g.gamma, 1.0)
    u_tail = g.tail_value * g_of_average_integral(PowerOfMax(p - 1, L), g.tail_value, C, g.gamma, 1.0)
    return g.c ** p * head + float(v_tail), g.c ** (p - 1) * head + float(u_tail)


def lemma41_rhs(f, p, L, u):
    return L ** p - conjugate(p) * f * L ** (p - 1) + conjugate(p) * u


def lemma41_residual(g, p, L):
    """v_g(L) minus L^p - p/(p-1) f L^(p-1) + p/(p-1) u_g(L); zero up to rounding."""
    f = g.integral() if isinstance(g, StepFunction) else g.f
    v, u = vu_functionals(g, p, L)
    return v - lemma41_rhs(f, p, L, u)


# --------------------------------------------------------------------------
# Second branch
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SharpnessTerm:
    n: int
    L_n: float
    b_n: float
    c_n: float
    gamma_n: float
    k_n: float
    v_gn: float
    a_n: float
    a_bound: float
    target: float

    @property
    def rel_gap(self):
        return (self.target - self.v_gn) / self.target


@dataclass(frozen=True)
class SharpnessSequence:
    p: float
    f: float
    F: float
    L: float
    terms: list = field(default_factory=list)

    @property
    def target(self):
        return bellman3(self.p, self.f, self.F, self.L)

    @property
    def values(self):
        return np.array([t.v_gn for t in self.terms])


def default_schedule(L0, n):
    return L0 * (1.0 - 2.0 ** -n)


def _a_n(g: PowerLawExtremal, L0, L):
    """int_{L0}^{L} p lam^(p-2) (int over {Av g > lam} of g) d lam, closed form."""
    p, c = g.p, g.c
    if L <= L0 or g.gamma == 0:
        return 0.0
    s = c / (1.0 - c)
    e = p + s
    scale = p * (c * g.K) ** (-s)
    if abs(e) < 1e-14:
        return scale * math.log(L / L0)
    return scale * (L ** e - L0 ** e) / e


def sharpness_sequence(p, f, F, L, n_terms=20, schedule=default_schedule) -> SharpnessSequence:
    """Build g_n at levels L_n increasing to L0 and evaluate v_{g_n}(L).

    Each v_{g_n}(L) is obtained from the decomposition
    ``L^p - L0^p + v_{g_n}(L0) - a_n(L)`` and cross-checked against the
    direct closed form.  Terms whose L_n falls below f are skipped.
    """
    pt = BellmanPoint(p, f, F, L)
    L0 = pt.L0
    if L < L0:
        raise WrongBranchError(f"L={L} < L0={L0}; use solve_extremal_g for this branch")
    target = bellman3(p, f, F, L)
    theta_L = conjugate(p) * (L ** (p - 1) - L0 ** (p - 1))
    terms = []
    for n in range(1, n_terms + 1):
        L_n = float(schedule(L0, n))
        if L_n < f or L_n >= L0:
            continue
        g = solve_extremal_g(p, f, F, L_n)
        v_L0, _ = vu_functionals(g, p, L0)
        a_n = _a_n(g, L0, L)
        v = L ** p - L0 ** p + v_L0 - a_n
        direct, _ = vu_functionals(g, p, L)
        if abs(direct - v) > 1e-9 * max(1.0, abs(direct)):
            raise RuntimeError(f"decomposition {v!r} disagrees with direct value {direct!r}")
        a_bound = theta_L * float(g.cumulative(g.crossing(L0)))
        terms.append(SharpnessTerm(n, L_n, g.b, g.c, g.gamma, g.K, v, a_n, a_bound, target))
    return SharpnessSequence(p, f, F, L, terms)
