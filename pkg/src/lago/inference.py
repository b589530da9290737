"""Pointwise mean CIs, the confidence set for the optimal package, and
Scheffe-style simultaneous bands.

All intervals are built on the linear-predictor scale with the sandwich
variance sigma^2(x, z) = v' Cov(beta_hat) v, v = (1, x', z'), then mapped
through the (monotone) inverse link. The band multiplier is the square root
of the 0.95 chi-squared quantile at df = number of estimated coefficients,
so df = 1 bands coincide with the pointwise intervals exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import FitResult
from .links import Link, inverse
from .model import CenterCovariates, ComponentBounds, InterventionPackage, TargetSpec
from .optimizer import grid_axes, iter_grid
from .quantiles import chi2_quantile, two_sided_z


@dataclass(frozen=True)
class MeanInterval:
    x: InterventionPackage
    mean_hat: float
    lower: float
    upper: float
    se_eta: float


@dataclass(frozen=True)
class ConfidenceSet:
    grid_increment: float
    members: list
    total_grid_points: int

    @property
    def set_percentage(self) -> float:
        return len(self.members) / self.total_grid_points


@dataclass(frozen=True)
class ConfidenceBands:
    grid_increment: float
    entries: list  # (doses tuple, band_lower, band_upper)
    multiplier: float


def _check_fit(fit: FitResult) -> None:
    if not fit.converged:
        raise ValueError("fit did not converge")
    eig = np.linalg.eigvalsh(fit.covariance)
    if eig.min() < -1e-8 * max(np.trace(fit.covariance), 1e-300):
        raise ValueError("covariance is not positive semidefinite")


def eta_and_se(fit: FitResult, doses: np.ndarray, z: CenterCovariates):
    """Vectorized (eta_hat, se_eta) for an (N, P) block of packages at fixed z."""
    doses = np.atleast_2d(np.asarray(doses, dtype=float))
    n = len(doses)
    zz = np.tile(z.values, (n, 1)) if len(z) else np.zeros((n, 0))
    head = [np.ones((n, 1))] if fit.beta_hat.has_intercept else []
    V = np.hstack(head + [doses, zz])
    eta = V @ fit.beta_hat.as_array() + (0.0 if fit.beta_hat.has_intercept
                                         else fit.beta_hat.intercept)
    var = np.einsum("ij,jk,ik->i", V, fit.covariance, V)
    return eta, np.sqrt(np.maximum(var, 0.0))


def mean_ci(fit: FitResult, link: Link, x: InterventionPackage, z: CenterCovariates,
            level: float = 0.95) -> MeanInterval:
    _check_fit(fit)
    eta, se = eta_and_se(fit, x.doses, z)
    zcrit = two_sided_z(level)
    lo = float(inverse(link, eta[0] - zcrit * se[0]))
    hi = float(inverse(link, eta[0] + zcrit * se[0]))
    return MeanInterval(x=x, mean_hat=float(inverse(link, eta[0])),
                        lower=lo, upper=hi, se_eta=float(se[0]))


def confidence_set(fit: FitResult, link: Link, bounds: ComponentBounds,
                   z: CenterCovariates, target: TargetSpec,
                   increment: float = 0.1, level: float = 0.95) -> ConfidenceSet:
    """All grid packages whose mean CI contains the target theta."""
    _check_fit(fit)
    zcrit = two_sided_z(level)
    members = []
    total = 0
    for block in iter_grid(bounds, increment):
        total += len(block)
        eta, se = eta_and_se(fit, block, z)
        lo = inverse(link, eta - zcrit * se)
        hi = inverse(link, eta + zcrit * se)
        inside = (lo <= target.theta) & (target.theta <= hi)
        members.extend(InterventionPackage(row) for row in block[inside])
    return ConfidenceSet(grid_increment=increment, members=members,
                         total_grid_points=total)


def confidence_bands(fit: FitResult, link: Link, bounds: ComponentBounds,
                     z: CenterCovariates, increment: float = 0.1,
                     level: float = 0.95) -> ConfidenceBands:
    """Simultaneous bands over the package grid at fixed covariates."""
    _check_fit(fit)
    mult = float(np.sqrt(chi2_quantile(level, fit.beta_hat.n_free)))
    entries = []
    for block in iter_grid(bounds, increment):
        eta, se = eta_and_se(fit, block, z)
        lo = inverse(link, eta - mult * se)
        hi = inverse(link, eta + mult * se)
        entries.extend((tuple(map(float, row)), float(l), float(h))
                       for row, l, h in zip(block, lo, hi))
    return ConfidenceBands(grid_increment=increment, entries=entries, multiplier=mult)


def bands_cover(fit: FitResult, link: Link, bounds: ComponentBounds,
                z: CenterCovariates, true_mean_fn, increment: float = 0.1,
                level: float = 0.95) -> bool:
    """Whether the bands contain a reference mean surface at every grid point."""
    mult = float(np.sqrt(chi2_quantile(level, fit.beta_hat.n_free)))
    for block in iter_grid(bounds, increment):
        eta, se = eta_and_se(fit, block, z)
        lo = inverse(link, eta - mult * se)
        hi = inverse(link, eta + mult * se)
        truth = true_mean_fn(block)
        if np.any(truth < lo) or np.any(truth > hi):
            return False
    return True


def set_covers(fit: FitResult, link: Link, bounds: ComponentBounds, z: CenterCovariates,
               target: TargetSpec, x_opt: np.ndarray, increment: float = 0.1,
               level: float = 0.95) -> bool:
    """Whether the confidence set contains the grid point nearest to x_opt."""
    axes = grid_axes(bounds, increment)
    snapped = np.array([ax[np.argmin(np.abs(ax - v))] for ax, v in zip(axes, x_opt)])
    eta, se = eta_and_se(fit, snapped, z)
    zcrit = two_sided_z(level)
    lo = inverse(link, eta[0] - zcrit * se[0])
    hi = inverse(link, eta[0] + zcrit * se[0])
    return bool(lo <= target.theta <= hi)


def set_summary(fit: FitResult, link: Link, bounds: ComponentBounds, z: CenterCovariates,
                target: TargetSpec, increment: float = 0.1, level: float = 0.95):
    """(member count, total grid points) without materializing packages."""
    zcrit = two_sided_z(level)
    count = 0
    total = 0
    for block in iter_grid(bounds, increment):
        total += len(block)
        eta, se = eta_and_se(fit, block, z)
        lo = inverse(link, eta - zcrit * se)
        hi = inverse(link, eta + zcrit * se)
        count += int(np.sum((lo <= target.theta) & (target.theta <= hi)))
    return count, total


def set_cost_quartiles(cs: ConfidenceSet, cf) -> tuple:
    """First, second, and third quartiles of the package cost over the
    confidence set, with linear interpolation between order statistics."""
    if not cs.members:
        raise ValueError("confidence set is empty")
    costs = cf.evaluate_grid(np.vstack([m.doses for m in cs.members]))
    q1, q2, q3 = np.quantile(costs, [0.25, 0.5, 0.75], method="linear")
    return float(q1), float(q2), float(q3)
