"""
Exact moments of the deferred continuous life annuity.

Y is the present value at age x of 1 p.a. paid continuously from the
retirement age until death, and nothing if the member dies first. A rating
shifts both the current and the retirement age, so the deferral period
``ret - x`` is unchanged.

Under UDD the age at death has a piecewise-constant density, so E[Y] and
E[Y^2] reduce to sums of closed-form integrals of the annuity-certain and its
square over each year of age. There is no quadrature anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lifetable import AgeOutOfRangeError, LifeTable, MortalityBasis, check_rated_age


@dataclass(frozen=True)
class DiscountBasis:
    """Constant force of interest ``delta`` (continuously compounded)."""

    delta: float = 0.04

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta}")

    @property
    def v(self) -> float:
        return math.exp(-self.delta)


def annuity_certain(delta: float, t):
    """(1 - e^{-delta t}) / delta, or t itself when delta = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("annuity term must be non-negative")
    out = t.copy() if delta == 0 else -np.expm1(-delta * t) / delta
    return float(out) if out.ndim == 0 else out


def _antiderivative(delta: float, s: np.ndarray, m: int) -> np.ndarray:
    """F with F(0) = 0 and F'(s) = annuity_certain(delta, s) ** m."""
    if delta == 0:
        return s**2 / 2 if m == 1 else s**3 / 3
    a1 = -np.expm1(-delta * s) / delta
    if m == 1:
        return (s - a1) / delta
    a2 = -np.expm1(-2 * delta * s) / (2 * delta)
    return (s - 2 * a1 + a2) / delta**2


def _death_segments(table: LifeTable, start: float):
    """Year pieces [lo, hi] from ``start`` to omega with the death probability in each."""
    first = math.floor(start) + 1
    knots = np.concatenate(([start], np.arange(first, table.omega + 1, dtype=float)))
    if knots.size > 1 and knots[1] == knots[0]:
        knots = knots[1:]
    l = table.l_at(knots)
    return knots[:-1], knots[1:], l[:-1] - l[1:]


def retirement_moments(table: LifeTable, ret_age: float, delta: float) -> tuple[float, float]:
    """E[a(S)] and E[a(S)^2] for remaining lifetime S at (rated) age ``ret_age``."""
    l0 = table.l_at(ret_age)
    if l0 == 0:
        return 0.0, 0.0
    lo, hi, deaths = _death_segments(table, ret_age)
    width = hi - lo
    dens = deaths / (l0 * width)
    s_lo, s_hi = lo - ret_age, hi - ret_age
    out = []
    for m in (1, 2):
        pieces = dens * (_antiderivative(delta, s_hi, m) - _antiderivative(delta, s_lo, m))
        out.append(math.fsum(pieces))
    return out[0], out[1]


def continuous_life_annuity(table: LifeTable, age: float, delta: float) -> float:
    """
    Whole-life continuous annuity value from the l column directly.

    integral of e^{-delta t} l(age+t)/l(age) dt, with l linear in each year.
    Independent of :func:`retirement_moments`; the two agree by parts.
    """
    l0 = table.l_at(age)
    if l0 == 0:
        return 0.0
    lo, hi, _ = _death_segments(table, age)
    la, lb = table.l_at(lo), table.l_at(hi)
    t0, h = lo - age, hi - lo
    slope = (lb - la) / h
    disc = np.exp(-delta * t0)
    if delta == 0:
        pieces = la * h + slope * h**2 / 2
    else:
        # integral over [0, h] of e^{-delta u} (la + slope u) du
        e = np.exp(-delta * h)
        pieces = la * (1 - e) / delta + slope * (1 - e - delta * h * e) / delta**2
    return math.fsum(disc * pieces) / l0


@dataclass(frozen=True)
class AnnuityMoments:
    """E[Y] and E[Y^2] for one rating, with the context they were computed in."""

    m1: float
    m2: float
    x: float
    ret: float
    delta: float
    rating: float = 0.0

    @property
    def variance(self) -> float:
        return max(self.m2 - self.m1**2, 0.0)

    @property
    def context(self) -> tuple[float, float, float]:
        return (self.x, self.ret, self.delta)


def _check_ages(table: LifeTable, rating: float, x: float, ret: float) -> tuple[float, float]:
    if x > ret:
        raise ValueError(f"current age {x} is after retirement age {ret}")
    rx = check_rated_age(table, x, rating)
    return rx, ret + rating


def scenario_moments(
    table: LifeTable, rating: float, discount: DiscountBasis, x: float, ret: float
) -> AnnuityMoments:
    """Both moments of Y under a single rating."""
    rx, rret = _check_ages(table, rating, x, ret)
    if rret >= table.omega:
        return AnnuityMoments(0.0, 0.0, x, ret, discount.delta, rating)
    survival = table.l_at(rret) / table.l_at(rx)
    if survival == 0:
        return AnnuityMoments(0.0, 0.0, x, ret, discount.delta, rating)
    e1, e2 = retirement_moments(table, rret, discount.delta)
    vd = math.exp(-discount.delta * (ret - x))
    return AnnuityMoments(vd * survival * e1, vd * vd * survival * e2, x, ret, discount.delta, rating)


def scenario_moment(
    table: LifeTable, rating: float, discount: DiscountBasis, x: float, ret: float, m: int
) -> float:
    """E[Y^m] for m in {1, 2}."""
    if m not in (1, 2):
        raise ValueError(f"moment order must be 1 or 2, got {m}")
    mom = scenario_moments(table, rating, discount, x, ret)
    return mom.m1 if m == 1 else mom.m2


def expected_pv(table: LifeTable, rating: float, discount: DiscountBasis, x: float, ret: float) -> float:
    """v^{ret-x} * survival * whole-life annuity at the rated retirement age."""
    rx, rret = _check_ages(table, rating, x, ret)
    if rret >= table.omega:
        return 0.0
    survival = table.l_at(rret) / table.l_at(rx)
    return math.exp(-discount.delta * (ret - x)) * survival * continuous_life_annuity(
        table, rret, discount.delta
    )


@dataclass(frozen=True)
class MixtureMoments:
    """
    Moments of Y_1 under a scenario mixture.

    ``cov_pair`` is Cov(Y_1, Y_2) for two distinct members, which is the
    between-scenario variance of E[Y | scenario].
    """

    m1: float
    m2: float
    variance: float
    cov_pair: float
    scenarios: tuple[AnnuityMoments, ...] = ()

    @property
    def idiosyncratic_variance(self) -> float:
        return self.variance - self.cov_pair


def mixture_moments(weighted: Sequence[tuple[AnnuityMoments, float]]) -> MixtureMoments:
    if not weighted:
        raise ValueError("no scenarios to mix")
    weights = [float(w) for _, w in weighted]
    if any(w <= 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValueError(f"scenario weights {weights} are not a probability vector")
    contexts = {mom.context for mom, _ in weighted}
    if len(contexts) != 1:
        raise ValueError(f"scenario moments computed under different contexts: {sorted(contexts)}")

    m1 = math.fsum(w * mom.m1 for mom, w in weighted)
    m2 = math.fsum(w * mom.m2 for mom, w in weighted)
    cov = math.fsum(w * (mom.m1 - m1) ** 2 for mom, w in weighted)
    within = math.fsum(w * mom.variance for mom, w in weighted)
    return MixtureMoments(
        m1=m1,
        m2=m2,
        variance=within + cov,
        cov_pair=cov,
        scenarios=tuple(mom for mom, _ in weighted),
    )


def basis_moments(
    table: LifeTable, basis: MortalityBasis, discount: DiscountBasis, x: float, ret: float
) -> MixtureMoments:
    return mixture_moments(
        [(scenario_moments(table, r, discount, x, ret), w) for r, w in basis.scenarios]
    )


__all__ = [
    "AgeOutOfRangeError",
    "AnnuityMoments",
    "DiscountBasis",
    "MixtureMoments",
    "annuity_certain",
    "basis_moments",
    "continuous_life_annuity",
    "expected_pv",
    "mixture_moments",
    "retirement_moments",
    "scenario_moment",
    "scenario_moments",
]
