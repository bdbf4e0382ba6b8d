"""
Scheme population, benefit structures and the coefficient of variation.

With all members the same age, L_N = sum_n B_n Y_n and, whatever the
mortality basis,

    E(L_N)   = (sum B) E(Y)
    Var(L_N) = (sum B^2) (Var Y - C) + (sum B)^2 C,   C = Cov(Y_1, Y_2)

so every scheme-level quantity needs only the three mixture moments of Y
and the first two power sums of the benefit vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .annuity import DiscountBasis, MixtureMoments, basis_moments
from .lifetable import LifeTable, MortalityBasis


class UndefinedVcoError(ArithmeticError):
    """Expected liability is zero, so the coefficient of variation has no value."""


def executive_count(alpha: float, n_members: int) -> int:
    """round(alpha * N), halves rounded up."""
    return int(math.floor(alpha * n_members + 0.5 + 1e-9))


@dataclass(frozen=True)
class SchemeSpec:
    """
    N members of common age ``x`` retiring at ``ret``.

    Build with :meth:`homogeneous`, :meth:`executive` or :meth:`explicit`.
    Executive members come first in ``benefits``.
    """

    benefits: np.ndarray
    x: float = 40.0
    ret: float = 65.0
    kind: str = "explicit"
    alpha: float | None = None
    k: float | None = None
    n_exec: int = 0
    base: float = 1.0

    def __post_init__(self) -> None:
        b = np.asarray(self.benefits, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("a scheme needs at least one member")
        if np.any(~np.isfinite(b)) or np.any(b <= 0):
            raise ValueError("benefits must be positive and finite")
        if self.x > self.ret:
            raise ValueError(f"age {self.x} is after retirement age {self.ret}")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "benefits", b)

    @classmethod
    def homogeneous(cls, n_members: int, benefit: float = 1.0, x: float = 40.0, ret: float = 65.0):
        _check_count(n_members)
        return cls(np.full(n_members, float(benefit)), x, ret, kind="homogeneous", base=float(benefit))

    @classmethod
    def executive(cls, n_members: int, alpha: float, k: float, x: float = 40.0, ret: float = 65.0):
        """A fraction ``alpha`` of members receive ``k`` units, the rest 1."""
        _check_count(n_members)
        if not 0 <= alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        if not k >= 1:
            raise ValueError(f"k must be >= 1, got {k}")
        n_exec = executive_count(alpha, n_members)
        b = np.ones(n_members)
        b[:n_exec] = k
        return cls(b, x, ret, kind="executive", alpha=float(alpha), k=float(k), n_exec=n_exec)

    @classmethod
    def explicit(cls, benefits: Sequence[float], x: float = 40.0, ret: float = 65.0):
        return cls(np.asarray(benefits, dtype=float), x, ret, kind="explicit")

    @property
    def n_members(self) -> int:
        return int(self.benefits.size)

    @property
    def total_benefit(self) -> float:
        return math.fsum(self.benefits)

    @property
    def total_benefit_sq(self) -> float:
        return math.fsum(self.benefits**2)

    @property
    def is_tiered(self) -> bool:
        return self.kind in ("homogeneous", "executive")

    def resize(self, n_members: int) -> SchemeSpec:
        """Same structure with a different membership."""
        if self.kind == "homogeneous":
            return SchemeSpec.homogeneous(n_members, self.base, self.x, self.ret)
        if self.kind == "executive":
            return SchemeSpec.executive(n_members, self.alpha, self.k, self.x, self.ret)
        raise ValueError("an explicit benefit vector cannot be resized")


def _check_count(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"member count must be a positive integer, got {n}")


def f_factor(alpha: float, k: float) -> float:
    """(alpha k^2 + 1 - alpha) / (alpha k + 1 - alpha)^2; at least 1."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not k >= 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return (alpha * k * k + 1 - alpha) / (alpha * k + 1 - alpha) ** 2


def benefit_factor(benefits: Sequence[float]) -> float:
    """N sum(B^2) / (sum B)^2, the exact counterpart of :func:`f_factor`."""
    b = np.asarray(benefits, dtype=float)
    return b.size * math.fsum(b**2) / math.fsum(b) ** 2


@dataclass(frozen=True)
class LiabilityMoments:
    expected: float
    variance: float
    sd: float
    vco: float
    cov_pair: float
    systematic_vco: float
    idiosyncratic_vco: float
    y: MixtureMoments = field(repr=False)


def _vco_terms(y: MixtureMoments, s1, s2):
    """Expected value and variance of L for benefit power sums s1, s2."""
    idio = max(y.variance - y.cov_pair, 0.0)
    return s1 * y.m1, s2 * idio + s1 * s1 * y.cov_pair


def moments_from_y(spec: SchemeSpec, y: MixtureMoments) -> LiabilityMoments:
    s1, s2 = spec.total_benefit, spec.total_benefit_sq
    expected, variance = _vco_terms(y, s1, s2)
    if not expected > 0:
        raise UndefinedVcoError("expected liability is zero: nobody survives to retirement")
    sd = math.sqrt(variance)
    vco = sd / expected
    systematic = math.sqrt(y.cov_pair) / y.m1
    return LiabilityMoments(
        expected=expected,
        variance=variance,
        sd=sd,
        vco=vco,
        cov_pair=y.cov_pair,
        systematic_vco=systematic,
        idiosyncratic_vco=vco - systematic,
        y=y,
    )


def liability_moments(
    spec: SchemeSpec, basis: MortalityBasis, table: LifeTable, discount: DiscountBasis
) -> LiabilityMoments:
    return moments_from_y(spec, basis_moments(table, basis, discount, spec.x, spec.ret))


def default_n_grid() -> list[int]:
    return list(range(1, 1000)) + list(range(1000, 10001, 100))


@dataclass(frozen=True)
class VcoCurve:
    n: np.ndarray
    vco: np.ndarray
    systematic_vco: np.ndarray

    def rows(self):
        return list(zip(self.n.tolist(), self.vco.tolist(), self.systematic_vco.tolist()))


def vco_curve(
    template: SchemeSpec,
    basis: MortalityBasis,
    table: LifeTable,
    discount: DiscountBasis,
    n_values: Sequence[int] | None = None,
    exact_headcount: bool = True,
) -> VcoCurve:
    """
    Vco of the scheme for each membership size in ``n_values``.

    For an executive template the headcount is ``round(alpha N)`` and the
    benefit sums are exact. With ``exact_headcount=False`` the continuous
    factor f(alpha, k) is used instead, as if alpha N were always integral.
    """
    n = np.asarray(default_n_grid() if n_values is None else list(n_values), dtype=np.int64)
    if n.size == 0:
        raise ValueError("empty N grid")
    if np.any(n < 1):
        raise ValueError("N values must be positive")
    if np.any(np.diff(n) <= 0):
        raise ValueError("N values must be strictly increasing")
    if template.kind == "explicit":
        raise ValueError("an explicit benefit vector has a fixed N; use liability_moments")

    y = basis_moments(table, basis, discount, template.x, template.ret)
    if not y.m1 > 0:
        raise UndefinedVcoError("expected liability is zero: nobody survives to retirement")
    nf = n.astype(float)
    if template.kind == "homogeneous":
        s1, s2 = template.base * nf, template.base**2 * nf
    elif exact_headcount:
        k = template.k
        n_exec = np.floor(template.alpha * nf + 0.5 + 1e-9)
        s1 = n_exec * k + (nf - n_exec)
        s2 = n_exec * k * k + (nf - n_exec)
    else:
        a, k = template.alpha, template.k
        s1 = nf * (a * k + 1 - a)
        s2 = nf * (a * k * k + 1 - a)
    expected, variance = _vco_terms(y, s1, s2)
    vco = np.sqrt(variance) / expected
    systematic = np.full(n.size, math.sqrt(y.cov_pair) / y.m1)
    return VcoCurve(n=n, vco=vco, systematic_vco=systematic)
