"""
Monte Carlo oracle for the liability distribution.

Each path draws one rating scenario for the whole scheme, then an independent
lifetime for every member by exact inverse-CDF sampling under UDD. Paths are
generated in fixed-size chunks; chunk ``i`` uses the numpy ``SeedSequence``
child with spawn key ``(i,)`` of the configured seed, so the output depends
only on (seed, n_paths, chunk_size, antithetic) and never on how many worker
threads ran the chunks.

Standard errors use the delta method: every estimator is a smooth function of
sample means, and its per-path influence value is averaged over independent
sampling units (single paths, or antithetic pairs) before taking the sample
variance. See docs/math.md.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annuity import DiscountBasis
from .lifetable import LifeTable, MortalityBasis, check_rated_age
from .scheme import SchemeSpec

DEFAULT_CHUNK = 8192
_HALF_ULP = 2.0**-54


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int
    seed: int = 0
    antithetic: bool = False
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self) -> None:
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 2 or self.chunk_size % 2:
            raise ValueError("chunk_size must be an even integer >= 2")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class LifetimeSampler:
    """
    Inverse CDF of the future lifetime at a fixed (rated) age.

    Under UDD l is piecewise linear, so solving l(age + t) = (1 - u) l(age)
    means finding the bracketing year and interpolating. The year is found
    through a uniform bucket grid over [0, l(age)]: each bucket stores a
    lower bound on the year index, and a few forward steps finish the search.
    """

    buckets = 1 << 16

    def __init__(self, table: LifeTable, age: float):
        if not table.first_age <= age < table.omega:
            raise ValueError(f"age {age} outside table [{table.first_age}, {table.omega})")
        knots = np.concatenate(([age], np.arange(math.floor(age) + 1, table.omega + 1, dtype=float)))
        if knots.size > 1 and knots[1] == knots[0]:
            knots = knots[1:]
        self.age = age
        self.knots = knots
        self.l = table.l_at(knots)
        g = self.buckets
        tops = np.arange(1, g + 1) * (self.l[0] / g)
        start = np.searchsorted(-self.l, -tops, side="right") - 1
        # shifted one bucket up so a rounding slip in the bucket index stays a lower bound
        self._start = np.minimum(np.append(start[1:], start[-1]), self.l.size - 2)
        self._scale = g / self.l[0]
        deaths = self.l[:-1] - self.l[1:]
        with np.errstate(divide="ignore"):
            self._inv = np.where(deaths > 0, np.diff(knots) / deaths, 0.0)
        self._offset = knots[:-1] - age

    def segment(self, target: np.ndarray) -> np.ndarray:
        """Index j with l[j] >= target > l[j+1], for 0 < target <= l[0]."""
        b = (target * self._scale).astype(np.int64)
        np.clip(b, 0, self.buckets - 1, out=b)
        j = self._start[b]
        todo = np.flatnonzero(self.l[j + 1] >= target)
        while todo.size:
            j[todo] += 1
            todo = todo[self.l[j[todo] + 1] >= target[todo]]
        return j

    def time_to_death(self, u: np.ndarray) -> np.ndarray:
        target = (1.0 - u) * self.l[0]
        flat = target.ravel()
        j = self.segment(flat)
        t = self.l[j] - flat
        t *= self._inv[j]
        t += self._offset[j]
        return t.reshape(target.shape)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("uniform draws must lie strictly inside (0, 1)")
        t = self.time_to_death(np.atleast_1d(u))
        return float(t[0]) if u.ndim == 0 else t


def sample_lifetime(table: LifeTable, rating: float, age: float, u):
    """Time to death t with _{t}p = 1 - u, for a member rated by ``rating`` years."""
    return LifetimeSampler(table, check_rated_age(table, age, rating))(u)


@dataclass(frozen=True)
class EmpiricalMoments:
    mean: float
    variance: float
    sd: float
    vco: float
    se_mean: float
    se_variance: float
    se_sd: float
    se_vco: float
    n_paths: int

    def estimate(self, name: str) -> tuple[float, float]:
        return getattr(self, name), getattr(self, "se_" + name)


@dataclass(frozen=True)
class SectionEstimate:
    """Sample Cov(X_section, L)/SD(L) and the share of SD(L) it represents."""

    name: str
    members: int
    capital: float
    se_capital: float
    share: float
    se_share: float


@dataclass
class SimulationResult:
    moments: EmpiricalMoments
    sections: dict[str, SectionEstimate]
    config: SimulationConfig
    liability: np.ndarray = field(repr=False)
    scenario: np.ndarray = field(repr=False)
    ratings: tuple[float, ...] = ()

    @property
    def scenario_rating(self) -> np.ndarray:
        return np.asarray(self.ratings)[self.scenario]


def _sections(spec: SchemeSpec) -> list[tuple[str, np.ndarray]]:
    idx = np.arange(spec.n_members)
    if spec.kind == "executive":
        return [("exec", idx[: spec.n_exec]), ("norm", idx[spec.n_exec :])]
    if spec.kind == "homogeneous":
        return [("all", idx)]
    return [(f"member_{n + 1}", idx[n : n + 1]) for n in idx]


class _Engine:
    def __init__(self, spec, basis, table, discount, config):
        self.spec = spec
        self.config = config
        self.deferral = spec.ret - spec.x
        self.delta = discount.delta
        self.v_def = math.exp(-discount.delta * self.deferral)
        self.cum_w = np.cumsum(basis.weights)
        self.cum_w[-1] = 1.0
        self.samplers = [LifetimeSampler(table, check_rated_age(table, spec.x, r)) for r in basis.ratings]
        self.sections = _sections(spec)
        self.root = np.random.SeedSequence(config.seed)

    def _payoff(self, sampler: LifetimeSampler, u: np.ndarray) -> np.ndarray:
        after = sampler.time_to_death(u)
        after -= self.deferral
        np.maximum(after, 0.0, out=after)
        if self.delta > 0:
            pay = np.expm1(-self.delta * after)
            pay *= -self.v_def / self.delta
            return pay
        return after * self.v_def

    def _y(self, scen: np.ndarray, u: np.ndarray) -> np.ndarray:
        if len(self.samplers) == 1:
            return self._payoff(self.samplers[0], u)
        y = np.empty_like(u)
        for s, sampler in enumerate(self.samplers):
            rows = scen == s
            if rows.any():
                y[rows] = self._payoff(sampler, u[rows])
        return y

    def run_chunk(self, i: int, start: int, size: int, out_l, out_x, out_s) -> None:
        child = np.random.SeedSequence(self.root.entropy, spawn_key=(i,))
        rng = np.random.Generator(np.random.PCG64(child))
        n = self.spec.n_members
        if self.config.antithetic:
            half = size // 2
            scen = np.searchsorted(self.cum_w, rng.random(half), side="right")
            u = rng.random((half, n)) + _HALF_ULP
            scen = np.repeat(scen, 2)
            u = np.stack([u, 1.0 - u], axis=1).reshape(size, n)
        else:
            scen = np.searchsorted(self.cum_w, rng.random(size), side="right")
            u = rng.random((size, n)) + _HALF_ULP
        y = self._y(scen, u)
        b = self.spec.benefits
        sl = slice(start, start + size)
        out_l[sl] = y @ b
        for j, (_, idx) in enumerate(self.sections):
            out_x[j, sl] = y[:, idx] @ b[idx]
        out_s[sl] = scen


def _influence_se(values: np.ndarray, unit: int) -> float:
    """Standard error of the mean of ``values`` over independent units of ``unit`` paths."""
    per_unit = values.reshape(-1, unit).mean(axis=1) if unit > 1 else values
    n = per_unit.size
    if n < 2:
        return float("nan")
    return float(np.std(per_unit, ddof=1) / math.sqrt(n))


def simulate(
    spec: SchemeSpec,
    basis: MortalityBasis,
    table: LifeTable,
    discount: DiscountBasis,
    config: SimulationConfig,
) -> SimulationResult:
    engine = _Engine(spec, basis, table, discount, config)
    n_paths = config.n_paths
    out_l = np.empty(n_paths)
    out_x = np.empty((len(engine.sections), n_paths))
    out_s = np.empty(n_paths, dtype=np.int64)
    plan = [
        (i, start, min(config.chunk_size, n_paths - start))
        for i, start in enumerate(range(0, n_paths, config.chunk_size))
    ]
    if config.workers == 1:
        for i, start, size in plan:
            engine.run_chunk(i, start, size, out_l, out_x, out_s)
    else:
        with ThreadPoolExecutor(config.workers) as pool:
            list(pool.map(lambda c: engine.run_chunk(*c, out_l, out_x, out_s), plan))

    unit = 2 if config.antithetic else 1
    mean = float(np.mean(out_l))
    dev = out_l - mean
    var = float(np.mean(dev * dev))
    sd = math.sqrt(var)
    if_mean = dev
    if_var = dev * dev - var
    if sd > 0 and mean != 0:
        if_sd = if_var / (2 * sd)
        vco = sd / mean
        if_vco = if_sd / mean - vco * if_mean / mean
        se_sd, se_vco = _influence_se(if_sd, unit), _influence_se(if_vco, unit)
    else:
        vco = sd / mean if mean != 0 else float("nan")
        se_sd = se_vco = float("nan")
    moments = EmpiricalMoments(
        mean=mean,
        variance=var,
        sd=sd,
        vco=vco,
        se_mean=_influence_se(if_mean, unit),
        se_variance=_influence_se(if_var, unit),
        se_sd=se_sd,
        se_vco=se_vco,
        n_paths=n_paths,
    )

    sections = {}
    for j, (name, idx) in enumerate(engine.sections):
        xdev = out_x[j] - np.mean(out_x[j])
        prod = xdev * dev
        cov = float(np.mean(prod))
        if sd > 0:
            if_cov = prod - cov
            cap, share = cov / sd, cov / var
            se_cap = _influence_se(if_cov / sd - cap * (if_var / (2 * sd)) / sd, unit)
            se_share = _influence_se(if_cov / var - share * if_var / var, unit)
        else:
            cap = share = se_cap = se_share = float("nan")
        sections[name] = SectionEstimate(name, int(idx.size), cap, se_cap, share, se_share)

    return SimulationResult(
        moments=moments,
        sections=sections,
        config=config,
        liability=out_l,
        scenario=out_s,
        ratings=basis.ratings,
    )


def simulate_liability(spec, basis, table, discount, config) -> EmpiricalMoments:
    return simulate(spec, basis, table, discount, config).moments


def empirical_euler(spec, basis, table, discount, config) -> dict[str, SectionEstimate]:
    return simulate(spec, basis, table, discount, config).sections


def write_paths_csv(result: SimulationResult, path: str | Path) -> None:
    """Raw path dump with columns ``path,scenario_rating,L``."""
    ratings = result.scenario_rating
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "scenario_rating", "L"])
        for i, (r, val) in enumerate(zip(ratings.tolist(), result.liability.tolist())):
            w.writerow([i, f"{r:.12g}", f"{val:.12g}"])
