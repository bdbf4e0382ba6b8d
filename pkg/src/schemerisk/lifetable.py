"""
Integer-age life tables with fractional ages under UDD.

Survivorship l is derived from q with radix 1 at the first tabulated age and
interpolated linearly in age between integers, which is exactly the uniform
distribution of deaths (UDD) assumption. Age ratings are signed shifts of the
age at which the table is read: +r treats a member as r years older.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12


class LifeTableError(ValueError):
    """Base class for life-table ingestion and lookup failures."""


class EmptyTableError(LifeTableError):
    pass


class MalformedRowError(LifeTableError):
    pass


class NonContiguousAgesError(LifeTableError):
    pass


class RateOutOfRangeError(LifeTableError):
    pass


class AgeOutOfRangeError(LifeTableError):
    """A (possibly rated) age falls outside the table's domain."""


@dataclass(frozen=True)
class LifeTable:
    """
    Annual mortality rates q_a for a = first_age .. omega-1.

    ``omega`` is the first age with zero survivors. ``l`` has one more entry
    than ``q`` and runs from l_{first_age} = 1 down to l_omega = 0.
    """

    name: str
    first_age: int
    q: np.ndarray
    notes: tuple[str, ...] = ()
    l: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise EmptyTableError(f"{self.name}: table has no mortality rates")
        if np.any(~np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
            bad = int(np.flatnonzero(~((q >= 0.0) & (q <= 1.0)))[0])
            raise RateOutOfRangeError(
                f"{self.name}: q at age {self.first_age + bad} is {q[bad]!r}, outside [0, 1]"
            )
        if q[-1] != 1.0:
            raise LifeTableError(f"{self.name}: table does not close (last q must be 1)")
        if np.any(q[:-1] >= 1.0):
            raise LifeTableError(f"{self.name}: q = 1 before the final age")
        q = q.copy()
        q.flags.writeable = False
        l = np.empty(q.size + 1)
        l[0] = 1.0
        for i, qa in enumerate(q):
            l[i + 1] = l[i] * (1.0 - qa)
        l.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "l", l)

    @property
    def omega(self) -> int:
        return self.first_age + self.q.size

    @property
    def ages(self) -> np.ndarray:
        """Integer ages first_age .. omega at which ``l`` is tabulated."""
        return np.arange(self.first_age, self.omega + 1, dtype=float)

    def q_at(self, age: int) -> float:
        if not self.first_age <= age < self.omega:
            raise AgeOutOfRangeError(f"age {age} outside [{self.first_age}, {self.omega})")
        return float(self.q[age - self.first_age])

    def l_at(self, age):
        """Survivorship at real age(s); linear within each year, 0 from omega on."""
        a = np.asarray(age, dtype=float)
        if np.any(a < self.first_age):
            raise AgeOutOfRangeError(f"age below first tabulated age {self.first_age}")
        out = np.interp(a, self.ages, self.l, right=0.0)
        return float(out) if out.ndim == 0 else out


def _close(ages: list[int], qs: list[float], name: str) -> tuple[list[float], list[str]]:
    notes = []
    if 1.0 in qs[:-1]:
        cut = qs.index(1.0)
        dropped = len(qs) - cut - 1
        notes.append(
            f"{name}: q = 1 at age {ages[cut]}; dropped {dropped} unreachable row(s), omega = {ages[cut] + 1}"
        )
        qs = qs[: cut + 1]
    elif qs[-1] < 1.0:
        notes.append(
            f"{name}: last listed q_{ages[-1]} = {qs[-1]} < 1; appended q_{ages[-1] + 1} = 1, "
            f"omega = {ages[-1] + 2}"
        )
        qs = qs + [1.0]
    return qs, notes


def parse_life_table(text: str, name: str = "table") -> LifeTable:
    """Parse an ``age,qx`` CSV document into a closed, validated table."""
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyTableError(f"{name}: empty document")
    header = [cell.strip().lower() for cell in rows[0]]
    if header != ["age", "qx"]:
        raise MalformedRowError(f"{name}: expected header 'age,qx', got {','.join(rows[0])!r}")
    body = rows[1:]
    if not body:
        raise EmptyTableError(f"{name}: header but no rows")

    ages: list[int] = []
    qs: list[float] = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != 2:
            raise MalformedRowError(f"{name} line {lineno}: expected 2 fields, got {len(row)}")
        try:
            age_f = float(row[0])
            qx = float(row[1])
        except ValueError as exc:
            raise MalformedRowError(f"{name} line {lineno}: {exc}") from None
        if not age_f.is_integer():
            raise MalformedRowError(f"{name} line {lineno}: age {row[0]!r} is not an integer")
        age = int(age_f)
        if not (0.0 <= qx <= 1.0):
            raise RateOutOfRangeError(f"{name} line {lineno}: q_{age} = {qx} outside [0, 1]")
        if ages and age != ages[-1] + 1:
            raise NonContiguousAgesError(
                f"{name} line {lineno}: age {age} does not follow {ages[-1]}"
            )
        ages.append(age)
        qs.append(qx)

    qs, notes = _close(ages, qs, name)
    for note in notes:
        logger.info(note)
    return LifeTable(name=name, first_age=ages[0], q=np.array(qs), notes=tuple(notes))


def load_life_table(source: str | Path) -> LifeTable:
    """Load a UTF-8 ``age,qx`` CSV file."""
    path = Path(source)
    return parse_life_table(path.read_text(encoding="utf-8"), name=path.stem)


def pma92c10() -> LifeTable:
    """The bundled PMA92C10 table (see data/PROVENANCE.md)."""
    text = resources.files("schemerisk").joinpath("data/pma92c10.csv").read_text(encoding="utf-8")
    return parse_life_table(text, name="PMA92C10")


def from_rates(q: Sequence[float], first_age: int, name: str = "table") -> LifeTable:
    """Build a table from raw rates, applying the same closure rule as the loader."""
    ages = list(range(first_age, first_age + len(q)))
    if not ages:
        raise EmptyTableError(f"{name}: no rates")
    qs, notes = _close(ages, [float(v) for v in q], name)
    return LifeTable(name=name, first_age=first_age, q=np.array(qs), notes=tuple(notes))


def survival_probability(table: LifeTable, age: float, duration: float) -> float:
    """_{duration}p_{age} under UDD; zero once age + duration reaches omega."""
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    if age < table.first_age:
        raise AgeOutOfRangeError(f"age {age} below first tabulated age {table.first_age}")
    if age >= table.omega:
        raise AgeOutOfRangeError(f"age {age} at or beyond limiting age {table.omega}")
    if duration == 0:
        return 1.0
    return table.l_at(age + duration) / table.l_at(age)


def check_rated_age(table: LifeTable, age: float, rating: float) -> float:
    rated = age + rating
    if not math.isfinite(rated) or rated < table.first_age or rated >= table.omega:
        raise AgeOutOfRangeError(
            f"rated age {age} + ({rating}) = {rated} outside [{table.first_age}, {table.omega})"
        )
    return rated


def rated_survival(table: LifeTable, rating: float, age: float, duration: float) -> float:
    """Survival read from the table at ``age + rating`` (+ means older)."""
    return survival_probability(table, check_rated_age(table, age, rating), duration)


@dataclass(frozen=True)
class MortalityBasis:
    """
    A discrete distribution over age ratings.

    All members share the same (unknown) rating: conditional on the scenario,
    lifetimes are independent.
    """

    scenarios: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        scen = tuple((float(r), float(w)) for r, w in self.scenarios)
        if not scen:
            raise ValueError("a mortality basis needs at least one scenario")
        for r, w in scen:
            if not math.isfinite(r):
                raise ValueError(f"rating {r} is not finite")
            if not (w > 0 and math.isfinite(w)):
                raise ValueError(f"scenario weight {w} must be positive")
        total = math.fsum(w for _, w in scen)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"scenario weights sum to {total!r}, not 1")
        object.__setattr__(self, "scenarios", scen)

    @classmethod
    def deterministic(cls) -> MortalityBasis:
        return cls(((0.0, 1.0),))

    @classmethod
    def two_point(cls, r: float) -> MortalityBasis:
        """Rating +r or -r with probability 1/2 each; r = 0 is deterministic."""
        if r == 0:
            return cls.deterministic()
        r = abs(float(r))
        return cls(((r, 0.5), (-r, 0.5)))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> MortalityBasis:
        return cls(tuple(pairs))

    @property
    def ratings(self) -> tuple[float, ...]:
        return tuple(r for r, _ in self.scenarios)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for _, w in self.scenarios)

    @property
    def is_deterministic(self) -> bool:
        return len(self.scenarios) == 1

    def label(self) -> str:
        if self.is_deterministic:
            r = self.scenarios[0][0]
            return "deterministic" if r == 0 else f"rating {r:g}"
        if len(self.scenarios) == 2 and self.weights == (0.5, 0.5) and self.ratings[0] == -self.ratings[1]:
            return f"two-point r={abs(self.ratings[0]):g}"
        return "mixture(" + ", ".join(f"{r:g}:{w:g}" for r, w in self.scenarios) + ")"
