"""Exact and limiting entropy of occupancy arrangements.

The exact entropy of a count vector is the log of the number of unordered
arrangements over degenerate sub-boxes,

    S(counts, degs) = sum_i ln[ (N_i + G_i - 1)! / (N_i! (G_i - 1)!) ],

computed from a memoized table of cumulative ln k sums.  The three limit
entropies (one per degeneracy regime) and their derivatives back the
multiplier solver and the fluctuation predictions; a truncated Stirling
series exists to validate the asymptotic approximation the limits rely on.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import (
    DegeneracyAssignment,
    EnsembleSpec,
    Occupancy,
    Regime,
    degeneracies_for,
)

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class _LogFactorialTable:
    """Cumulative sums of ln k, grown geometrically and then read-only."""

    def __init__(self):
        self._values = np.zeros(2)  # ln 0! = ln 1! = 0
        self._lock = threading.Lock()

    def ensure(self, n: int) -> np.ndarray:
        if n < self._values.size:
            return self._values
        with self._lock:
            if n >= self._values.size:
                new_top = max(n + 1, 2 * self._values.size)
                ks = np.arange(self._values.size, new_top, dtype=np.float64)
                tail = self._values[-1] + np.cumsum(np.log(ks))
                self._values = np.concatenate([self._values, tail])
        return self._values

    def take(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if np.any(ns < 0):
            raise ValueError("log factorial requires nonnegative arguments")
        table = self.ensure(int(ns.max(initial=0)))
        return table[ns]


_TABLE = _LogFactorialTable()


def log_factorial(n: int) -> float:
    """ln(n!) from the cumulative table; exact up to double rounding."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return float(_TABLE.ensure(n)[n])


def log_factorial_array(ns) -> np.ndarray:
    """Vectorized ln(n!) lookup."""
    return _TABLE.take(ns)


def stirling_log_gamma(lam: float, order: int) -> float:
    """Truncated Stirling approximation of ln Gamma(lam).

    order selects how many correction terms of the series
    [1 + 1/(12 lam) + 1/(288 lam^2)] are kept (0, 1 or 2).
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    series = 1.0
    if order >= 1:
        series += 1.0 / (12.0 * lam)
    if order >= 2:
        series += 1.0 / (288.0 * lam * lam)
    return (-lam + (lam - 0.5) * math.log(lam) + _HALF_LOG_TWO_PI
            + math.log(series))


def log_multiplicity(counts, degs) -> np.ndarray | float:
    """Exact entropy of count vectors; vectorized over leading axes.

    counts may be (..., m) and degs (m,); all arguments are integers so the
    result comes from exact log-factorial differences.
    """
    counts = np.asarray(counts, dtype=np.int64)
    degs = np.asarray(degs, dtype=np.int64)
    top = log_factorial_array(counts + degs - 1)
    bottom = log_factorial_array(counts) + log_factorial_array(degs - 1)
    return (top - bottom).sum(axis=-1)


def entropy_exact(occ: Occupancy, deg: DegeneracyAssignment) -> float:
    """Exact entropy of an occupancy under a degeneracy assignment."""
    if len(occ.counts) != len(deg.per_level):
        raise ValueError(
            f"occupancy has {len(occ.counts)} levels, assignment has "
            f"{len(deg.per_level)}")
    return float(log_multiplicity(occ.counts, deg.per_level))


@dataclass(frozen=True)
class EntropyModel:
    """Limit entropy s_l for one degeneracy regime.

    high_degeneracy: s(x) = sum x_i ln(g_i/x_i) + x_i
    proportional:    s(x) = sum (x_i + g_i c) ln(x_i + g_i c) - x_i ln x_i
    low_degeneracy:  s(x) = sum g_i ln x_i + g_i

    Summands with x_i = 0 contribute 0.  The Hessian is diagonal in full
    coordinates and strictly negative on the open simplex.
    """

    regime: Regime
    g: tuple[float, ...]
    c: float | None = None

    def __post_init__(self):
        if self.regime is Regime.PROPORTIONAL and (self.c is None or self.c <= 0):
            raise ValueError("proportional entropy model requires c > 0")


def entropy_model_for(spec: EnsembleSpec) -> EntropyModel:
    return EntropyModel(regime=spec.regime, g=spec.weights, c=spec.c)


def limit_entropy(model: EntropyModel, x) -> np.ndarray | float:
    """s_l(x), vectorized over leading axes; zero components contribute 0."""
    x = np.asarray(x, dtype=float)
    g = np.array(model.g)
    positive = x > 0.0
    xs = np.where(positive, x, 1.0)  # placeholder keeps logs finite
    if model.regime is Regime.HIGH_DEGENERACY:
        terms = xs * np.log(g / xs) + xs
    elif model.regime is Regime.PROPORTIONAL:
        gc = g * model.c
        terms = (xs + gc) * np.log(xs + gc) - xs * np.log(xs)
    else:
        terms = g * np.log(xs) + g
    return np.where(positive, terms, 0.0).sum(axis=-1)


def _require_interior(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("limit-entropy derivatives need x_i > 0 for all i")
    return x


def limit_entropy_grad(model: EntropyModel, x) -> np.ndarray:
    """Per-coordinate first derivative of s_l; requires x > 0."""
    x = _require_interior(x)
    g = np.array(model.g)
    if model.regime is Regime.HIGH_DEGENERACY:
        return np.log(g / x)
    if model.regime is Regime.PROPORTIONAL:
        return np.log1p(g * model.c / x)
    return g / x


def limit_entropy_hessian_diag(model: EntropyModel, x) -> np.ndarray:
    """Diagonal of the (diagonal) second derivative of s_l; requires x > 0."""
    x = _require_interior(x)
    g = np.array(model.g)
    if model.regime is Regime.HIGH_DEGENERACY:
        return -1.0 / x
    if model.regime is Regime.PROPORTIONAL:
        gc = g * model.c
        return -gc / (x * (x + gc))
    return -g / (x * x)


def scaling_factor(spec: EnsembleSpec, n: int) -> float:
    """Entropy growth prefactor h(N): N for regimes 1-2, G(N) for regime 3."""
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if spec.regime is Regime.LOW_DEGENERACY:
        return float(spec.schedule(n))
    return float(n)


def _entropy_gammaln(spec: EnsembleSpec, n: int, x: np.ndarray) -> float:
    # Continuous extension of the exact entropy; needed because the
    # reference point g*N is generally not an integer vector.
    degs = degeneracies_for(spec, n).as_array.astype(float)
    counts = x * n
    return float(np.sum(gammaln(counts + degs) - gammaln(counts + 1.0)
                        - gammaln(degs)))


def approximation_error(spec: EnsembleSpec, n: int, x) -> float:
    """Deviation of S(x,N)/h(N) from s_l(x) after removing the N-offset.

    The x-independent offset is eliminated by differencing against the
    reference point x_ref = g, so the result measures the empirical decay
    rate of the limit-entropy approximation.
    """
    x = np.asarray(x, dtype=float)
    counts = x * n
    if np.max(np.abs(counts - np.round(counts))) > 1e-9:
        raise ValueError(f"x={x} is not representable at N={n} (x_i*N not integer)")
    model = entropy_model_for(spec)
    h = scaling_factor(spec, n)
    x_ref = spec.weights_array

    def scaled_gap(point):
        return (_entropy_gammaln(spec, n, point) / h
                - float(limit_entropy(model, point)))

    return abs(scaled_gap(x) - scaled_gap(x_ref))
