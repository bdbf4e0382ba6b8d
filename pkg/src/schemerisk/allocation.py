"""
Euler (covariance) allocation of SD(L_N) to members and sections.

Cov(X_n, L_N) = B_n^2 (Var Y - C) + B_n (sum B) C, so member n receives

    pi_n = B_n [B_n (Var Y - C) + (sum B) C] / SD(L_N)

and the pi_n add up to SD(L_N). The systematic part of pi_n is B_n sqrt(C);
the rest is idiosyncratic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .annuity import DiscountBasis, MixtureMoments, basis_moments
from .lifetable import LifeTable, MortalityBasis
from .scheme import SchemeSpec, executive_count


@dataclass(frozen=True)
class AllocationReport:
    """
    Risk capital by member and by section.

    The per-member figures ``pi_norm`` and ``pi_exec`` are the allocations to
    a member with benefit 1 and with benefit k; they are only filled for
    homogeneous and executive schemes. ``degenerate`` is set when SD(L_N) is
    zero, in which case nothing is allocated.
    """

    total_sd: float
    n_members: int
    n_exec: int
    k: float | None
    pi: np.ndarray = field(repr=False)
    systematic: np.ndarray = field(repr=False)
    cov_pair: float = 0.0
    degenerate: bool = False
    pi_norm: float | None = None
    pi_exec: float | None = None
    lambda_exec: float | None = None
    rho_exec: float | None = None
    systematic_per_norm: float | None = None
    systematic_per_exec: float | None = None

    @property
    def idiosyncratic(self) -> np.ndarray:
        return self.pi - self.systematic

    @property
    def idiosyncratic_per_norm(self) -> float | None:
        if self.pi_norm is None:
            return None
        return self.pi_norm - self.systematic_per_norm

    @property
    def idiosyncratic_per_exec(self) -> float | None:
        if self.pi_exec is None:
            return None
        return self.pi_exec - self.systematic_per_exec

    @property
    def systematic_total(self) -> float:
        return math.fsum(self.systematic)

    def section_capital(self) -> dict[str, float]:
        if self.degenerate:
            return {}
        exec_part = math.fsum(self.pi[: self.n_exec])
        return {"exec": exec_part, "norm": math.fsum(self.pi[self.n_exec :])}


def member_capital(benefits: np.ndarray, y: MixtureMoments) -> tuple[float, np.ndarray]:
    """SD(L_N) and the Euler allocation pi_n for each member."""
    b = np.asarray(benefits, dtype=float)
    s1 = math.fsum(b)
    s2 = math.fsum(b * b)
    idio = max(y.variance - y.cov_pair, 0.0)
    sd = math.sqrt(s2 * idio + s1 * s1 * y.cov_pair)
    if sd == 0:
        return 0.0, np.empty(0)
    return sd, b * (b * idio + s1 * y.cov_pair) / sd


def allocate(spec: SchemeSpec, y: MixtureMoments) -> AllocationReport:
    b = spec.benefits
    sd, pi = member_capital(b, y)
    root_c = math.sqrt(y.cov_pair)
    tiered = spec.is_tiered
    k = spec.k if spec.kind == "executive" else (1.0 if tiered else None)
    if sd == 0:
        return AllocationReport(
            total_sd=0.0, n_members=spec.n_members, n_exec=spec.n_exec, k=k,
            pi=np.empty(0), systematic=np.empty(0), cov_pair=y.cov_pair, degenerate=True,
        )

    report = dict(
        total_sd=sd, n_members=spec.n_members, n_exec=spec.n_exec, k=k,
        pi=pi, systematic=b * root_c, cov_pair=y.cov_pair,
    )
    if tiered:
        s1 = spec.total_benefit
        idio = max(y.variance - y.cov_pair, 0.0)
        unit = spec.base if spec.kind == "homogeneous" else 1.0
        kk = k * unit
        pi_norm = unit * (unit * idio + s1 * y.cov_pair) / sd
        pi_exec = kk * (kk * idio + s1 * y.cov_pair) / sd
        report.update(
            pi_norm=pi_norm,
            pi_exec=pi_exec,
            lambda_exec=math.fsum(pi[: spec.n_exec]) / sd,
            rho_exec=math.fsum(b[: spec.n_exec]) / s1,
            systematic_per_norm=unit * root_c,
            systematic_per_exec=kk * root_c,
        )
    return AllocationReport(**report)


def euler_allocation(
    spec: SchemeSpec, basis: MortalityBasis, table: LifeTable, discount: DiscountBasis
) -> AllocationReport:
    return allocate(spec, basis_moments(table, basis, discount, spec.x, spec.ret))


def deterministic_exec_share(alpha: float, k: float) -> float:
    """alpha k^2 / (alpha k^2 + 1 - alpha)."""
    return alpha * k * k / (alpha * k * k + 1 - alpha)


def benefit_weighted_share(alpha: float, k: float) -> float:
    """alpha k / (alpha k + 1 - alpha)."""
    return alpha * k / (alpha * k + 1 - alpha)


def _section_shares(y: MixtureMoments, n: int, n_exec: int, k: float) -> tuple[float, float]:
    """lambda_exec and rho_exec for a two-tier scheme without building the vector."""
    s1 = n_exec * k + (n - n_exec)
    s2 = n_exec * k * k + (n - n_exec)
    idio = max(y.variance - y.cov_pair, 0.0)
    var = s2 * idio + s1 * s1 * y.cov_pair
    if var == 0:
        return float("nan"), n_exec * k / s1
    lam = n_exec * k * (k * idio + s1 * y.cov_pair) / var
    return lam, n_exec * k / s1


@dataclass(frozen=True)
class ShareRow:
    n_members: int
    alpha: float
    k: float
    n_exec: int
    lambda_exec: float
    rho_exec: float


def allocation_vs_k_curve(
    spec: SchemeSpec,
    basis: MortalityBasis,
    table: LifeTable,
    discount: DiscountBasis,
    k_values: Sequence[float] | None = None,
) -> list[ShareRow]:
    """Euler and benefit-weighted executive shares as k varies, alpha fixed."""
    if spec.kind != "executive":
        raise ValueError("sweeping k needs an executive-tier scheme")
    ks = list(range(1, 21)) if k_values is None else list(k_values)
    if not ks:
        raise ValueError("empty k grid")
    if min(ks) < 1:
        raise ValueError("k values must be >= 1")
    y = basis_moments(table, basis, discount, spec.x, spec.ret)
    n, n_exec = spec.n_members, spec.n_exec
    rows = []
    for k in ks:
        lam, rho = _section_shares(y, n, n_exec, float(k))
        rows.append(ShareRow(n, spec.alpha, float(k), n_exec, lam, rho))
    return rows


def allocation_vs_alpha_curve(
    spec: SchemeSpec,
    basis: MortalityBasis,
    table: LifeTable,
    discount: DiscountBasis,
    alpha_values: Sequence[float] | None = None,
) -> list[ShareRow]:
    """Euler and benefit-weighted executive shares as alpha varies, k fixed."""
    if spec.kind != "executive":
        raise ValueError("sweeping alpha needs an executive-tier scheme")
    alphas = [i / 100 for i in range(51)] if alpha_values is None else list(alpha_values)
    if not alphas:
        raise ValueError("empty alpha grid")
    if min(alphas) < 0 or max(alphas) > 1:
        raise ValueError("alpha values must lie in [0, 1]")
    y = basis_moments(table, basis, discount, spec.x, spec.ret)
    n, k = spec.n_members, spec.k
    rows = []
    for alpha in alphas:
        n_exec = executive_count(alpha, n)
        lam, rho = _section_shares(y, n, n_exec, k)
        rows.append(ShareRow(n, float(alpha), k, n_exec, lam, rho))
    return rows


def systematic_total(
    spec: SchemeSpec, basis: MortalityBasis, table: LifeTable, discount: DiscountBasis
) -> float:
    """(sum B) sqrt(Cov(Y_1, Y_2)): the non-diversifiable part of the risk capital."""
    y = basis_moments(table, basis, discount, spec.x, spec.ret)
    return spec.total_benefit * math.sqrt(y.cov_pair)
