"""Problem-instance definition, validation, and shared lattice primitives.

An instance is a fixed set of m energy levels with strictly increasing
rational energies, level weights g_i summing to 1, a per-particle energy
cap E, and a degeneracy schedule N -> G(N) whose growth regime selects
which limiting statistics apply.  Energies are kept as exact rationals so
the energy constraint can be evaluated in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-12

# Probe points used to sanity-check a schedule against its declared regime.
_REGIME_PROBES = (10_000, 40_000)


class Regime(str, Enum):
    """Asymptotic behaviour of G(N)/N."""

    HIGH_DEGENERACY = "high_degeneracy"  # G(N)/N -> infinity
    PROPORTIONAL = "proportional"        # G(N)/N -> c > 0
    LOW_DEGENERACY = "low_degeneracy"    # G(N)/N -> 0


class SpecValidationError(ValueError):
    """An ensemble spec violates one or more invariants (all reported)."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class EnumerationBudgetError(RuntimeError):
    """State space too large to enumerate; use the sampler module."""


class SolverError(RuntimeError):
    """A numeric solver failed to converge within its iteration cap."""


def _as_fraction(value) -> Fraction:
    # Strings ("3/2", "1.4") are parsed exactly; floats keep their binary value.
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class DegeneracySchedule:
    """Named rule mapping N to the total degeneracy G(N).

    kind "power":  G(N) = ceil(N**p)
    kind "linear": G(N) = ceil(c*N)
    """

    kind: str
    p: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.p is None or self.p <= 0:
                raise SpecValidationError(["power schedule requires p > 0"])
        elif self.kind == "linear":
            if self.c is None or self.c <= 0:
                raise SpecValidationError(["linear schedule requires c > 0"])
        else:
            raise SpecValidationError([f"unknown schedule kind {self.kind!r}"])

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"N must be >= 1, got {n}")
        if self.kind == "power":
            return math.ceil(n**self.p)
        return math.ceil(self.c * n)


def default_schedule(regime: Regime, c: float | None = None,
                     p: float | None = None) -> DegeneracySchedule:
    """Built-in schedule for a regime (power p=2 / linear c / power p=1/2)."""
    if regime is Regime.HIGH_DEGENERACY:
        return DegeneracySchedule("power", p=2.0 if p is None else p)
    if regime is Regime.PROPORTIONAL:
        if c is None:
            raise SpecValidationError(["proportional regime requires c"])
        return DegeneracySchedule("linear", c=c)
    return DegeneracySchedule("power", p=0.5 if p is None else p)


@dataclass(frozen=True)
class EnsembleSpec:
    """A bounded-energy occupancy ensemble instance.

    energies are exact Fractions (strictly increasing), weights are reals in
    (0, 1] summing to 1, energy_cap is the per-particle cap E as a Fraction.
    """

    energies: tuple[Fraction, ...]
    weights: tuple[float, ...]
    energy_cap: Fraction
    regime: Regime
    schedule: DegeneracySchedule
    c: float | None = None

    @property
    def m(self) -> int:
        return len(self.energies)

    @cached_property
    def q(self) -> int:
        """Least common denominator of the level energies."""
        q = 1
        for e in self.energies:
            q = q * e.denominator // math.gcd(q, e.denominator)
        return q

    @cached_property
    def energy_units(self) -> tuple[int, ...]:
        """Level energies as integers in units of 1/q."""
        return tuple(int(e * self.q) for e in self.energies)

    @cached_property
    def energies_float(self) -> np.ndarray:
        return np.array([float(e) for e in self.energies])

    @cached_property
    def weights_array(self) -> np.ndarray:
        return np.array(self.weights)

    def energy_cap_units(self, n: int) -> int:
        """Integer energy bound floor(q*E*N); ties in the cap are included."""
        return math.floor(self.q * self.energy_cap * n)

    def degeneracy_total(self, n: int) -> int:
        return self.schedule(n)


def make_spec(energies, weights, energy_cap, regime, c=None, p=None,
              schedule=None) -> EnsembleSpec:
    """Build and validate an EnsembleSpec from loosely-typed inputs."""
    regime = Regime(regime)
    energies = tuple(_as_fraction(e) for e in energies)
    weights = tuple(float(w) for w in weights)
    if schedule is None:
        schedule = default_schedule(regime, c=c, p=p)
    spec = EnsembleSpec(
        energies=energies,
        weights=weights,
        energy_cap=_as_fraction(energy_cap),
        regime=regime,
        schedule=schedule,
        c=float(c) if c is not None else None,
    )
    return validate_spec(spec)


def validate_spec(spec: EnsembleSpec) -> EnsembleSpec:
    """Return the spec iff every invariant holds, else report all violations."""
    violations = []
    m = spec.m
    if m < 1:
        raise SpecValidationError(["m must be >= 1"])
    if len(spec.weights) != m:
        violations.append(
            f"weights length {len(spec.weights)} != energies length {m}")
    for a, b in zip(spec.energies, spec.energies[1:]):
        if not a < b:
            violations.append("energies not strictly increasing")
            break
    if any(not (0.0 < w <= 1.0) for w in spec.weights):
        violations.append("weights must lie in (0, 1]")
    elif abs(math.fsum(spec.weights) - 1.0) > WEIGHT_SUM_TOL:
        violations.append(
            f"weight sum {math.fsum(spec.weights)!r} differs from 1 "
            f"by more than {WEIGHT_SUM_TOL}")
    if not spec.energy_cap > spec.energies[0]:
        violations.append("empty domain: E <= eps_1")
    if spec.regime is Regime.PROPORTIONAL:
        if spec.c is None or spec.c <= 0:
            violations.append("proportional regime requires c > 0")
    violations.extend(_schedule_violations(spec))
    if violations:
        raise SpecValidationError(violations)
    return spec


def _schedule_violations(spec: EnsembleSpec) -> list[str]:
    n1, n2 = _REGIME_PROBES
    try:
        g1, g2 = spec.schedule(n1), spec.schedule(n2)
    except SpecValidationError as exc:
        return list(exc.violations)
    out = []
    if g2 < g1:
        out.append("schedule G(N) not nondecreasing")
    r1, r2 = g1 / n1, g2 / n2
    if spec.regime is Regime.HIGH_DEGENERACY and not r2 > r1:
        out.append("regime/schedule mismatch: G(N)/N not increasing "
                   "for high-degeneracy regime")
    elif spec.regime is Regime.LOW_DEGENERACY and not r2 < r1:
        out.append("regime/schedule mismatch: G(N)/N not decreasing "
                   "for low-degeneracy regime")
    elif spec.regime is Regime.PROPORTIONAL and spec.c is not None:
        # ceil-based linear schedules satisfy |G/N - c| <= 1/N.
        tol = 2.0 / n1 + 1e-9 * spec.c
        if abs(r1 - spec.c) > tol or abs(r2 - spec.c) > tol:
            out.append("regime/schedule mismatch: G(N)/N not near c "
                       "for proportional regime")
    return out


@dataclass(frozen=True)
class Occupancy:
    """An integer occupancy vector (N_1, ..., N_m) with sum N."""

    total: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.total < 1:
            raise ValueError(f"total must be positive, got {self.total}")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative occupancy in {self.counts}")
        if sum(self.counts) != self.total:
            raise ValueError(
                f"counts {self.counts} sum to {sum(self.counts)}, "
                f"expected {self.total}")

    def fractions(self) -> np.ndarray:
        return np.array(self.counts) / self.total


def occupancy_energy_units(spec: EnsembleSpec, counts) -> int:
    """Total energy of a count vector in integer 1/q units."""
    return int(np.asarray(counts, dtype=np.int64) @
               np.array(spec.energy_units, dtype=np.int64))


def assert_feasible(spec: EnsembleSpec, occ: Occupancy) -> Occupancy:
    """Check the energy-cap invariant of an occupancy against a spec."""
    if len(occ.counts) != spec.m:
        raise ValueError(f"occupancy has {len(occ.counts)} levels, spec has {spec.m}")
    used = occupancy_energy_units(spec, occ.counts)
    cap = spec.energy_cap_units(occ.total)
    if used > cap:
        raise ValueError(
            f"occupancy {occ.counts} violates energy cap: {used} > {cap} (1/q units)")
    return occ


def fraction_vector(spec: EnsembleSpec, x) -> np.ndarray:
    """Validate a point of the fraction simplex under the energy cap."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.m,):
        raise ValueError(f"expected shape ({spec.m},), got {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"fractions must lie in [0, 1]: {x}")
    if abs(x.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"fractions sum to {x.sum()!r}, expected 1")
    if float(x @ spec.energies_float) > float(spec.energy_cap) + 1e-12:
        raise ValueError(
            f"mean energy {x @ spec.energies_float} exceeds cap {float(spec.energy_cap)}")
    return x


@dataclass(frozen=True)
class DegeneracyAssignment:
    """Per-level degeneracies G_1..G_m summing to G(N)."""

    total: int
    per_level: tuple[int, ...]

    def __post_init__(self):
        if sum(self.per_level) != self.total:
            raise ValueError(
                f"per-level degeneracies {self.per_level} sum to "
                f"{sum(self.per_level)}, expected {self.total}")
        if any(g < 1 for g in self.per_level):
            raise ValueError(f"every level needs G_i >= 1, got {self.per_level}")

    @property
    def as_array(self) -> np.ndarray:
        return np.array(self.per_level, dtype=np.int64)


def degeneracies_for(spec: EnsembleSpec, n: int) -> DegeneracyAssignment:
    """Split G(N) over levels as G_i ~ g_i*G(N) by largest-remainder rounding.

    Every G_i is floored at 1 and the exact sum G(N) is preserved.
    """
    total = spec.schedule(n)
    m = spec.m
    if total < m:
        raise SpecValidationError(
            [f"schedule yields G(N)={total} < m={m} at N={n}"])
    target = spec.weights_array * total
    base = np.floor(target).astype(np.int64)
    short = total - int(base.sum())
    # Stable sort on descending remainder keeps rounding deterministic.
    order = np.argsort(-(target - base), kind="stable")
    base[order[:short]] += 1
    while np.any(base == 0):
        base[int(np.argmax(base))] -= 1
        base[int(np.argmin(base))] += 1
    assignment = DegeneracyAssignment(total=total, per_level=tuple(int(v) for v in base))
    drift = np.max(np.abs(assignment.as_array - target))
    if drift > 1.0 + 1e-9:
        raise SpecValidationError(
            [f"degeneracy rounding drift {drift:.3f} exceeds 1 at N={n}; "
             f"weights too small for G(N)={total}"])
    return assignment


def threshold_energy(spec: EnsembleSpec) -> float:
    """Energy sum(g_i * eps_i) separating interior from boundary maxima.

    At or above this value the limiting distribution sits at x* = g strictly
    inside the energy cap; below it the cap is active.
    """
    return float(np.dot(spec.weights_array, spec.energies_float))
