"""H_p, its inverse omega_p, and the closed-form Bellman functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError

_DOMAIN_SLACK = 1e-12


def conjugate(p):
    """p / (p - 1)."""
    return p / (p - 1.0)


def _check_p(p):
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p!r}")


def hp(p, z):
    """H_p(z) = -(p-1) z^p + p z^(p-1) on [1, p/(p-1)], in factored form."""
    _check_p(p)
    z = np.asarray(z, dtype=float)
    hi = conjugate(p)
    if np.any(z < 1 - _DOMAIN_SLACK) or np.any(z > hi * (1 + _DOMAIN_SLACK)):
        raise DomainError(f"z must lie in [1, {hi}]")
    out = z ** (p - 1) * (p - (p - 1) * z)
    return float(out) if out.ndim == 0 else out


def _hp_raw(p, z):
    return z ** (p - 1) * (p - (p - 1) * z)


def omega(p, b, width=1e-14):
    """The inverse of H_p: the z in [1, p/(p-1)] with H_p(z) = b.

    Vectorized bisection down to ``width`` followed by one guarded Newton
    step; H_p is strictly decreasing on the bracket.
    """
    _check_p(p)
    b = np.asarray(b, dtype=float)
    if np.any(b < -_DOMAIN_SLACK) or np.any(b > 1 + _DOMAIN_SLACK):
        raise DomainError("b must lie in [0, 1]")
    b = np.clip(b, 0.0, 1.0)
    lo = np.ones_like(b)
    hi = np.full_like(b, conjugate(p))
    while np.any(hi - lo > width * hi):
        mid = 0.5 * (lo + hi)
        above = _hp_raw(p, mid) > b
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(mid == lo) and np.all(mid == hi):
            break
    z = 0.5 * (lo + hi)
    # Newton polish; H_p'(z) = p(p-1) z^(p-2) (1 - z) vanishes at z = 1
    deriv = p * (p - 1) * z ** (p - 2) * (1 - z)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = (_hp_raw(p, z) - b) / deriv
    polished = z - step
    ok = np.isfinite(polished) & (polished >= lo) & (polished <= hi)
    ok &= np.abs(_hp_raw(p, np.where(ok, polished, z)) - b) <= np.abs(_hp_raw(p, z) - b)
    z = np.where(ok, polished, z)
    z = np.where(b == 1.0, 1.0, np.where(b == 0.0, conjugate(p), z))
    return float(z) if z.ndim == 0 else z


def omega2_closed_form(b):
    """omega_2(b) = 1 + sqrt(1 - b); used as a test oracle."""
    return 1.0 + np.sqrt(1.0 - np.asarray(b, dtype=float))


def h_level(p, f, t):
    """p t^(p-1) f - (p-1) t^p, strictly decreasing for t > f."""
    t = np.asarray(t, dtype=float)
    out = t ** (p - 1) * (p * f - (p - 1) * t)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BellmanPoint:
    """Arguments (p, f, F, L) of the three-variable Bellman function."""

    p: float
    f: float
    F: float
    L: float | None = None

    def __post_init__(self):
        _check_p(self.p)
        if not self.f > 0:
            raise DomainError("f must be positive")
        if self.f ** self.p > self.F * (1 + _DOMAIN_SLACK):
            raise DomainError("need f^p <= F")
        if self.L is not None and self.L < self.f * (1 - _DOMAIN_SLACK):
            raise DomainError("need L >= f")

    @property
    def L0(self):
        """Threshold p/(p-1) f separating the two branches."""
        return conjugate(self.p) * self.f

    @property
    def b(self):
        """(p L^(p-1) f - (p-1) L^p) / F, at most f^p / F."""
        L = self.f if self.L is None else self.L
        return h_level(self.p, self.f, L) / self.F


def bellman2(p, f, F):
    pt = BellmanPoint(p, f, F)
    return F * omega(p, min(1.0, pt.f ** p / pt.F)) ** p


def bellman3(p, f, F, L):
    pt = BellmanPoint(p, f, F, L)
    if L < pt.L0:
        b = pt.b
        # h decreases past f, so b <= f^p / F <= 1 under the preconditions
        assert b <= 1 + 1e-12, b
        return F * omega(p, min(max(b, 0.0), 1.0)) ** p
    return L ** p + conjugate(p) ** p * (F - f ** p)
