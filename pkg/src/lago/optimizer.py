"""Cost-minimizing recommended packages.

Solves  min C(x)  s.t.  E[Y | x, z] >= theta  over the bounds box, with the
linear-cost ranking algorithm (raise components in decreasing beta1_p / c_p
order, solving the binding constraint exactly for the active component) and
a streamed grid search for general polynomial costs. When the target is
unattainable the recommendation falls back to the all-upper-bounds package
with ``feasible=False``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import FitResult
from .links import Link, link_apply, valid_mean
from .model import (CenterCovariates, ComponentBounds, CostFunction, DimensionError,
                    InterventionPackage, ParameterVector, TargetSpec, cost,
                    mean_response)
from .quantiles import normal_cdf, normal_quantile, two_sided_z

GRID_CELL_CAP = 10 ** 8
GRID_CHUNK = 2 ** 18


class GridTooLargeError(ValueError):
    def __init__(self, cells: int):
        super().__init__(f"grid has {cells} cells (cap {GRID_CELL_CAP}); "
                         "use a coarser increment")


@dataclass(frozen=True)
class Recommendation:
    package: InterventionPackage
    projected_mean: float
    cost: float
    feasible: bool
    method: str  # linear_ranking | grid_search | fallback_upper_bounds
    z: CenterCovariates

    def as_dict(self) -> dict:
        return {
            "package": [float(v) for v in self.package.doses],
            "projected_mean": self.projected_mean,
            "cost": self.cost,
            "feasible": self.feasible,
            "method": self.method,
        }


def _check_dims(beta: ParameterVector, z: CenterCovariates, bounds: ComponentBounds,
                cf: CostFunction) -> None:
    if len(bounds) != beta.p:
        raise DimensionError("bounds", beta.p, len(bounds))
    if cf.n_components != beta.p:
        raise DimensionError("cost function", beta.p, cf.n_components)
    if len(z) != beta.q:
        raise DimensionError("covariates", beta.q, len(z))


def _fallback(beta, z, bounds, cf, link) -> Recommendation:
    pkg = InterventionPackage(bounds.upper)
    return Recommendation(
        package=pkg,
        projected_mean=mean_response(link, beta, pkg, z),
        cost=cost(cf, pkg),
        feasible=False,
        method="fallback_upper_bounds",
        z=z,
    )


def recommend_linear(beta: ParameterVector, z: CenterCovariates, bounds: ComponentBounds,
                     cf: CostFunction, target: TargetSpec, link: Link) -> Recommendation:
    """Cost-efficiency ranking algorithm for linear costs."""
    if cf.kind != "linear":
        raise ValueError("recommend_linear requires a linear cost function")
    _check_dims(beta, z, bounds, cf)
    target.validate_for(link)

    eta_target = link_apply(link, target.theta)
    base = beta.intercept + (beta.covariate_effects @ z.values if beta.q else 0.0)
    x = bounds.lower.copy()
    eta = base + beta.effects @ x
    if eta >= eta_target:
        pkg = InterventionPackage(x)
        return Recommendation(pkg, mean_response(link, beta, pkg, z), cost(cf, pkg),
                              True, "linear_ranking", z)

    efficiency = beta.effects / cf.unit_costs
    # negative-effect components stay at their lower bound; ties break by index
    order = [p for p in np.argsort(-efficiency, kind="stable") if beta.effects[p] > 0]
    for p in order:
        eta_at_upper = eta + beta.effects[p] * (bounds.upper[p] - x[p])
        if eta_at_upper >= eta_target:
            x[p] += (eta_target - eta) / beta.effects[p]
            x[p] = min(x[p], bounds.upper[p])
            pkg = InterventionPackage(x)
            return Recommendation(pkg, mean_response(link, beta, pkg, z), cost(cf, pkg),
                                  True, "linear_ranking", z)
        x[p] = bounds.upper[p]
        eta = eta_at_upper
    return _fallback(beta, z, bounds, cf, link)


def grid_axes(bounds: ComponentBounds, increment: float) -> list[np.ndarray]:
    if increment <= 0:
        raise ValueError("increment must be positive")
    axes = []
    for lo, hi in zip(bounds.lower, bounds.upper):
        count = int(np.floor((hi - lo) / increment + 1e-9)) + 1
        axes.append(lo + increment * np.arange(count))
    return axes


def grid_size(bounds: ComponentBounds, increment: float) -> int:
    return int(np.prod([len(ax) for ax in grid_axes(bounds, increment)]))


def iter_grid(bounds: ComponentBounds, increment: float, chunk: int = GRID_CHUNK):
    """Yield (N, P) dose blocks enumerating the grid in row-major order."""
    axes = grid_axes(bounds, increment)
    sizes = [len(ax) for ax in axes]
    total = int(np.prod(sizes))
    if total > GRID_CELL_CAP:
        raise GridTooLargeError(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        block = np.empty((len(idx), len(axes)))
        rem = idx
        for p in range(len(axes) - 1, -1, -1):
            block[:, p] = axes[p][rem % sizes[p]]
            rem = rem // sizes[p]
        yield block


def recommend_grid(beta: ParameterVector, z: CenterCovariates, bounds: ComponentBounds,
                   cf: CostFunction, target: TargetSpec, link: Link,
                   increment: float = 0.01) -> Recommendation:
    """Exhaustive streamed grid search; ties broken by lexicographically
    smallest package."""
    _check_dims(beta, z, bounds, cf)
    target.validate_for(link)
    eta_target = link_apply(link, target.theta)
    base = beta.intercept + (beta.covariate_effects @ z.values if beta.q else 0.0)

    best_cost = np.inf
    best = None
    for block in iter_grid(bounds, increment):
        eta = base + block @ beta.effects
        feas = eta >= eta_target
        if not feas.any():
            continue
        costs = cf.evaluate_grid(block[feas])
        cand = block[feas]
        i = int(np.argmin(costs))
        ties = np.nonzero(costs == costs[i])[0]
        if len(ties) > 1:
            # row-major enumeration makes the first tie lexicographically smallest
            i = int(ties[0])
        if costs[i] < best_cost or (costs[i] == best_cost and best is not None
                                    and tuple(cand[i]) < best):
            best_cost = float(costs[i])
            best = tuple(cand[i])
    if best is None:
        return _fallback(beta, z, bounds, cf, link)
    pkg = InterventionPackage(best)
    return Recommendation(pkg, mean_response(link, beta, pkg, z), best_cost,
                          True, "grid_search", z)


def recommend(beta: ParameterVector, z: CenterCovariates, bounds: ComponentBounds,
              cf: CostFunction, target: TargetSpec, link: Link,
              increment: float = 0.01) -> Recommendation:
    """Dispatch on the cost kind: ranking for linear, grid otherwise."""
    if cf.kind == "linear":
        return recommend_linear(beta, z, bounds, cf, target, link)
    return recommend_grid(beta, z, bounds, cf, target, link, increment)


class GridRecommender:
    """Reusable grid search for repeated queries on one (bounds, cost, grid).

    The dose grid and its cost ordering are precomputed once; each new
    coefficient vector costs one pass to build a running-maximum of the
    package effect along the cost order, after which every covariate query
    is a binary search. Results are identical to ``recommend_grid``.
    """

    def __init__(self, bounds: ComponentBounds, cf: CostFunction,
                 increment: float = 0.01, max_cells: int = 2 ** 24):
        total = grid_size(bounds, increment)
        if total > max_cells:
            raise GridTooLargeError(total)
        self.bounds = bounds
        self.cf = cf
        self.increment = increment
        doses = np.vstack(list(iter_grid(bounds, increment)))
        costs = cf.evaluate_grid(doses)
        keys = tuple(doses[:, p] for p in range(doses.shape[1] - 1, -1, -1))
        order = np.lexsort(keys + (costs,))
        self.doses = doses[order]
        self.costs = costs[order]
        self._effects_for = None
        self._running_max = None

    def prepare(self, effects: np.ndarray) -> None:
        effects = np.asarray(effects, dtype=float)
        self._effects_for = effects
        self._running_max = np.maximum.accumulate(self.doses @ effects)

    def query(self, beta: ParameterVector, z: CenterCovariates, target: TargetSpec,
              link: Link) -> Recommendation:
        if (self._effects_for is None
                or not np.array_equal(self._effects_for, beta.effects)):
            self.prepare(beta.effects)
        base = beta.intercept + (beta.covariate_effects @ z.values if beta.q else 0.0)
        need = link_apply(link, target.theta) - base
        idx = int(np.searchsorted(self._running_max, need, side="left"))
        if idx >= len(self.costs):
            return _fallback(beta, z, self.bounds, self.cf, link)
        pkg = InterventionPackage(self.doses[idx])
        return Recommendation(pkg, mean_response(link, beta, pkg, z),
                              float(self.costs[idx]), True, "grid_search", z)


def project_power(fit: FitResult, candidate: Recommendation, planned_n_per_arm: int,
                  alpha: float = 0.05) -> float:
    """Two-sample z-test power for detecting the candidate's effect over control.

    The control mean comes from the fitted model at a zero package with the
    candidate's covariates; the noise scale is the fit's residual variance.
    """
    if planned_n_per_arm < 2:
        raise ValueError("planned_n_per_arm must be >= 2")
    if fit.residual_variance <= 0:
        raise ValueError("residual variance estimate must be positive")
    zero = InterventionPackage(np.zeros(fit.beta_hat.p))
    control_mean = mean_response(fit.link, fit.beta_hat, zero, candidate.z)
    effect = candidate.projected_mean - control_mean
    se = np.sqrt(fit.residual_variance * 2.0 / planned_n_per_arm)
    zcrit = two_sided_z(1.0 - alpha)
    shift = effect / se
    return float(normal_cdf(shift - zcrit) + normal_cdf(-shift - zcrit))


def recommend_with_power(fit: FitResult, z: CenterCovariates, bounds: ComponentBounds,
                         cf: CostFunction, target: TargetSpec, link: Link,
                         planned_n_per_arm: int, power_target: float = 0.9,
                         alpha: float = 0.05, increment: float = 0.01) -> Recommendation:
    """theta-minimal package escalated along the cost-efficiency order until the
    projected power reaches the target or the bounds are hit.

    Escalation reuses the optimizer with a raised mean target, which walks the
    same cost-efficiency path beyond the theta-minimal point.
    """
    beta = fit.beta_hat
    rec = recommend(beta, z, bounds, cf, target, link, increment)
    if not rec.feasible:
        return rec
    if project_power(fit, rec, planned_n_per_arm, alpha) >= power_target:
        return rec
    # mean target that would give exactly the requested power
    zero = InterventionPackage(np.zeros(beta.p))
    control_mean = mean_response(link, beta, zero, z)
    se = np.sqrt(fit.residual_variance * 2.0 / planned_n_per_arm)
    needed = control_mean + se * (two_sided_z(1.0 - alpha) + normal_quantile(power_target))
    if valid_mean(link, needed) and needed > target.theta:
        hi = recommend(beta, z, bounds, cf, TargetSpec(needed), link, increment)
        if hi.feasible:
            return hi
    # power target unattainable inside the box: raise every positive-effect
    # component to its upper bound (bounds hit), keep feasibility w.r.t. theta
    doses = np.where(beta.effects > 0, bounds.upper, bounds.lower)
    pkg = InterventionPackage(doses)
    projected = mean_response(link, beta, pkg, z)
    return Recommendation(pkg, projected, cost(cf, pkg),
                          projected >= target.theta, rec.method, z)
