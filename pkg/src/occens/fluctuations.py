"""Limiting fluctuation laws around the maximum-entropy point.

Interior maxima give a Gaussian law for sqrt(h(N))*(X_N - x*) in the m-1
reduced coordinates (the last fraction is eliminated through the simplex
constraint); its covariance is the inverse negative reduced Hessian of the
limit entropy.  Boundary maxima mix a geometric law across exact
energy-slack layers along the cap normal with a Gaussian in the in-plane
rotated coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .core import EnsembleSpec, Regime
from .ensemble import ExactDistribution, layer_decomposition
from .entropy import entropy_model_for, limit_entropy_hessian_diag, scaling_factor
from .maxent import MaximumKind, MaxEntSolution, classify_maximum, solve

_ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class FluctuationPrediction:
    """Predicted limit law: Gaussian block and/or boundary layer ratio."""

    kind: MaximumKind
    covariance: np.ndarray           # (m-1)x(m-1) interior, (m-2)x(m-2) boundary
    rotation: np.ndarray | None = None      # boundary only
    layer_log_ratio: float | None = None    # boundary only; negative


def reduced_hessian(spec: EnsembleSpec, x: np.ndarray) -> np.ndarray:
    """Hessian of s_l in the m-1 free coordinates after x_m = 1 - sum x_i.

    The full Hessian is diagonal, so eliminating the last coordinate adds
    its (negative) curvature to every entry of the reduced block.
    """
    model = entropy_model_for(spec)
    diag = limit_entropy_hessian_diag(model, x)
    m = spec.m
    return np.diag(diag[: m - 1]) + diag[m - 1]


def predict_interior(spec: EnsembleSpec) -> FluctuationPrediction:
    """Gaussian covariance (-H_reduced)^-1 at the interior maximum x* = g."""
    if classify_maximum(spec) is not MaximumKind.INTERIOR:
        raise ValueError("wrong kind: boundary instance; use predict_boundary")
    h_red = reduced_hessian(spec, spec.weights_array)
    cov = np.linalg.inv(-h_red)
    cov = 0.5 * (cov + cov.T)
    _check_positive_definite(cov)
    cov.setflags(write=False)
    return FluctuationPrediction(kind=MaximumKind.INTERIOR, covariance=cov)


def _check_positive_definite(mat: np.ndarray) -> None:
    if mat.size and np.min(np.linalg.eigvalsh(mat)) <= 0.0:
        raise ArithmeticError(f"covariance block not positive definite:\n{mat}")


def rotation_basis(spec: EnsembleSpec) -> np.ndarray:
    """Orthonormal basis of the reduced space, first axis normal to the cap.

    In reduced coordinates the energy hyperplane is
    sum (eps_i - eps_m) x_i = E - eps_m, so the first basis vector is the
    normalized (eps_i - eps_m) direction; the rest come from Gram-Schmidt
    over canonical directions.
    """
    m = spec.m
    if m < 2:
        raise ValueError("rotation basis needs m >= 2")
    w = spec.energies_float[: m - 1] - spec.energies_float[m - 1]
    norm = float(np.linalg.norm(w))
    if norm < 1e-12:
        raise ValueError("degenerate normal: energies do not separate levels")
    cols = [w / norm]
    for k in range(m - 1):
        if len(cols) == m - 1:
            break
        v = np.zeros(m - 1)
        v[k] = 1.0
        for _ in range(2):  # second pass keeps orthonormality at 1e-12
            for u in cols:
                v = v - (u @ v) * u
        nv = float(np.linalg.norm(v))
        if nv > 1e-8:
            cols.append(v / nv)
    basis = np.column_stack(cols)
    gram_err = float(np.max(np.abs(basis.T @ basis - np.eye(m - 1))))
    if gram_err > _ORTHONORMAL_TOL:
        raise ArithmeticError(f"rotation basis lost orthonormality: {gram_err:.2e}")
    basis.setflags(write=False)
    return basis


def energy_lattice_step(spec: EnsembleSpec) -> int:
    """Spacing (in 1/q units) between realized total energies at fixed N.

    Single-particle moves change the total energy by differences of the
    integer level energies, so realized layers are gcd-of-differences apart.
    """
    e = spec.energy_units
    if len(e) < 2:
        raise ValueError("energy lattice step needs m >= 2")
    diffs = [e[i] - e[0] for i in range(1, len(e))]
    return reduce(math.gcd, diffs)


def predict_boundary(spec: EnsembleSpec, n: int) -> FluctuationPrediction:
    """Boundary mixture: geometric layer law plus in-plane Gaussian block.

    The log-ratio between adjacent layer masses is the inter-layer step
    along the cap normal times the directional derivative of the scaled
    entropy there; through the stationarity conditions this collapses to
    -lam * d/q * h(N)/N with d the energy lattice step.
    """
    if classify_maximum(spec) is not MaximumKind.BOUNDARY:
        raise ValueError("wrong kind: interior instance; use predict_interior")
    sol = solve(spec)
    basis = rotation_basis(spec)
    m = spec.m
    w = spec.energies_float[: m - 1] - spec.energies_float[m - 1]
    w_norm = float(np.linalg.norm(w))
    # derivative of s_l along the inward normal; grad s_l(x*) = lam*eps + nu
    s_prime = -sol.lam * w_norm
    step_v1 = energy_lattice_step(spec) / (spec.q * n * w_norm)
    layer_log_ratio = scaling_factor(spec, n) * s_prime * step_v1
    if not layer_log_ratio < 0.0:
        raise ArithmeticError(
            f"layer log-ratio {layer_log_ratio} not negative; lam={sol.lam}")
    if m > 2:
        in_plane = basis[:, 1:]
        h_red = reduced_hessian(spec, sol.x_star)
        block = np.linalg.inv(-(in_plane.T @ h_red @ in_plane))
        block = 0.5 * (block + block.T)
        _check_positive_definite(block)
    else:
        block = np.zeros((0, 0))
    block.setflags(write=False)
    return FluctuationPrediction(kind=MaximumKind.BOUNDARY, covariance=block,
                                 rotation=basis, layer_log_ratio=layer_log_ratio)


def predict(spec: EnsembleSpec, n: int) -> FluctuationPrediction:
    """Dispatch on the maximum type."""
    if classify_maximum(spec) is MaximumKind.INTERIOR:
        return predict_interior(spec)
    return predict_boundary(spec, n)


@dataclass(frozen=True)
class FluctuationSummary:
    """Empirical scaled moments of an exact distribution.

    Interior: covariance and third standardized moments of
    sqrt(h(N))*(X - x*) in reduced coordinates.  Boundary: layer masses by
    ascending slack plus the covariance of the sqrt(N)-scaled in-plane
    rotated coordinates.
    """

    kind: MaximumKind
    scaled_covariance: np.ndarray
    third_std_moments: np.ndarray | None = None
    layer_slacks: tuple[int, ...] | None = None
    layer_masses: np.ndarray | None = None


def _weighted_covariance(y: np.ndarray, pmf: np.ndarray) -> np.ndarray:
    mean = pmf @ y
    centered = y - mean
    cov = (centered * pmf[:, None]).T @ centered
    return 0.5 * (cov + cov.T)


def empirical_fluctuations(dist: ExactDistribution, sol: MaxEntSolution,
                           spec: EnsembleSpec) -> FluctuationSummary:
    """Scaled empirical moments matching the prediction conventions."""
    m = spec.m
    x_red = dist.fractions()[:, : m - 1]
    center = sol.x_star[: m - 1]
    if sol.kind is MaximumKind.INTERIOR:
        y = math.sqrt(scaling_factor(spec, dist.n)) * (x_red - center)
        cov = _weighted_covariance(y, dist.pmf)
        mean = dist.pmf @ y
        centered = y - mean
        variances = np.diag(cov)
        third = np.zeros(m - 1)
        nonzero = variances > 0
        third[nonzero] = ((dist.pmf @ centered[:, nonzero] ** 3)
                          / variances[nonzero] ** 1.5)
        return FluctuationSummary(kind=sol.kind, scaled_covariance=cov,
                                  third_std_moments=third)
    layers = layer_decomposition(dist)
    if m > 2:
        in_plane = rotation_basis(spec)[:, 1:]
        y_hat = math.sqrt(dist.n) * (x_red - center) @ in_plane
        cov = _weighted_covariance(y_hat, dist.pmf)
    else:
        cov = np.zeros((0, 0))
    return FluctuationSummary(kind=sol.kind, scaled_covariance=cov,
                              layer_slacks=layers.slacks,
                              layer_masses=layers.masses)
