"""Core domain types: packages, bounds, coefficients, costs, targets.

All types are immutable value objects; every operation here is a pure
function, so everything in this module is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .links import Link, inverse, valid_mean


class DimensionError(ValueError):
    """Raised when vector lengths are inconsistent with the model."""

    def __init__(self, what: str, expected: int, got: int):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected length {expected}, got {got}")


def _frozen_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite, got {arr}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class InterventionPackage:
    """Dose vector for the P intervention components (e.g. days, visits)."""

    doses: np.ndarray

    def __init__(self, doses):
        # zero-component packages are permitted only so intercept-only models
        # can flow through the fitting and interval machinery
        object.__setattr__(self, "doses", _frozen_vector(doses, "doses"))

    def __len__(self) -> int:
        return len(self.doses)

    def __iter__(self):
        return iter(self.doses)


@dataclass(frozen=True)
class ComponentBounds:
    """Per-component dose interval [lower_p, upper_p]."""

    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, lower, upper):
        lo = _frozen_vector(lower, "lower bounds")
        hi = _frozen_vector(upper, "upper bounds")
        if len(lo) != len(hi):
            raise DimensionError("upper bounds", len(lo), len(hi))
        if np.any(lo >= hi):
            bad = int(np.argmax(lo >= hi))
            raise ValueError(f"component {bad}: lower {lo[bad]} must be < upper {hi[bad]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self) -> int:
        return len(self.lower)

    def contains(self, x: InterventionPackage, tol: float = 1e-9) -> bool:
        if len(x) != len(self):
            raise DimensionError("package", len(self), len(x))
        return bool(np.all(x.doses >= self.lower - tol) and np.all(x.doses <= self.upper + tol))

    def clamp(self, doses) -> np.ndarray:
        return np.clip(np.asarray(doses, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class CenterCovariates:
    """Fixed center-level characteristics (may be empty, Q = 0)."""

    values: np.ndarray

    def __init__(self, values=()):
        object.__setattr__(self, "values", _frozen_vector(values, "covariates"))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ParameterVector:
    """Coefficients (beta0, beta1, beta2) of the mean model.

    ``has_intercept=False`` marks models fitted without an intercept
    (the intercept is then fixed at 0 and carries no uncertainty).
    """

    intercept: float
    effects: np.ndarray
    covariate_effects: np.ndarray
    has_intercept: bool = True

    def __init__(self, intercept, effects, covariate_effects=(), has_intercept=True):
        object.__setattr__(self, "intercept", float(intercept))
        object.__setattr__(self, "effects", _frozen_vector(effects, "effects"))
        object.__setattr__(self, "covariate_effects",
                           _frozen_vector(covariate_effects, "covariate effects"))
        object.__setattr__(self, "has_intercept", bool(has_intercept))

    @property
    def p(self) -> int:
        return len(self.effects)

    @property
    def q(self) -> int:
        return len(self.covariate_effects)

    @property
    def n_free(self) -> int:
        """Number of estimated coefficients."""
        return self.p + self.q + (1 if self.has_intercept else 0)

    def as_array(self) -> np.ndarray:
        """Free coefficients in design order (intercept first when present)."""
        head = [self.intercept] if self.has_intercept else []
        return np.concatenate([head, self.effects, self.covariate_effects])

    @classmethod
    def from_array(cls, arr, p: int, q: int, has_intercept: bool = True) -> "ParameterVector":
        arr = np.asarray(arr, dtype=float).reshape(-1)
        want = p + q + (1 if has_intercept else 0)
        if len(arr) != want:
            raise DimensionError("coefficient array", want, len(arr))
        if has_intercept:
            return cls(arr[0], arr[1:1 + p], arr[1 + p:], True)
        return cls(0.0, arr[:p], arr[p:], False)


def linear_predictor(beta: ParameterVector, x: InterventionPackage,
                     z: CenterCovariates) -> float:
    if len(x) != beta.p:
        raise DimensionError("package", beta.p, len(x))
    if len(z) != beta.q:
        raise DimensionError("covariates", beta.q, len(z))
    return float(beta.intercept + beta.effects @ x.doses
                 + (beta.covariate_effects @ z.values if beta.q else 0.0))


def mean_response(link: Link, beta: ParameterVector, x: InterventionPackage,
                  z: CenterCovariates) -> float:
    """E[Y | x, z] = g^{-1}(beta0 + beta1'x + beta2'z)."""
    return float(inverse(link, linear_predictor(beta, x, z)))


@dataclass(frozen=True)
class CostFunction:
    """Dollar cost of a package.

    linear: ``fixed_cost + sum_p unit_costs[p] * x_p`` with positive unit costs.
    cubic:  ``sum_p a_p x^3 + b_p x^2 + c_p x + d_p`` (per-component polynomial,
    no cross terms).
    """

    kind: str
    unit_costs: np.ndarray = field(default=None)
    fixed_cost: float = 0.0
    cubic_coeffs: np.ndarray = field(default=None)  # rows (a_p, b_p, c_p, d_p)

    def __init__(self, kind, unit_costs=None, fixed_cost=0.0, cubic_coeffs=None):
        kind = str(kind).lower()
        if kind not in ("linear", "cubic"):
            raise ValueError(f"unknown cost kind {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "fixed_cost", float(fixed_cost))
        if kind == "linear":
            if unit_costs is None:
                raise ValueError("linear cost requires unit_costs")
            c = _frozen_vector(unit_costs, "unit costs")
            if np.any(c <= 0):
                raise ValueError("linear unit costs must be positive")
            object.__setattr__(self, "unit_costs", c)
            object.__setattr__(self, "cubic_coeffs", None)
        else:
            if cubic_coeffs is None:
                raise ValueError("cubic cost requires cubic_coeffs")
            coeffs = np.asarray(cubic_coeffs, dtype=float)
            if coeffs.ndim != 2 or coeffs.shape[1] != 4:
                raise ValueError("cubic_coeffs must have shape (P, 4): rows (a, b, c, d)")
            if not np.all(np.isfinite(coeffs)):
                raise ValueError("cubic coefficients must be finite")
            coeffs.flags.writeable = False
            object.__setattr__(self, "cubic_coeffs", coeffs)
            object.__setattr__(self, "unit_costs", None)

    @property
    def n_components(self) -> int:
        return len(self.unit_costs) if self.kind == "linear" else len(self.cubic_coeffs)

    def evaluate_grid(self, doses: np.ndarray) -> np.ndarray:
        """Vectorized cost for an (N, P) array of dose rows."""
        doses = np.asarray(doses, dtype=float)
        if doses.shape[-1] != self.n_components:
            raise DimensionError("package", self.n_components, doses.shape[-1])
        if self.kind == "linear":
            return self.fixed_cost + doses @ self.unit_costs
        a, b, c, d = (self.cubic_coeffs[:, i] for i in range(4))
        return self.fixed_cost + np.sum(
            ((a * doses + b) * doses + c) * doses + d, axis=-1)


def cost(cf: CostFunction, x: InterventionPackage) -> float:
    """Evaluate the cost polynomial at a single package."""
    return float(cf.evaluate_grid(x.doses[np.newaxis, :])[0])


@dataclass(frozen=True)
class TargetSpec:
    """Absolute target for the mean outcome (theta of the optimization)."""

    theta: float
    mode: str = "absolute"

    def __post_init__(self):
        if self.mode != "absolute":
            raise ValueError("only absolute targets are supported")

    def validate_for(self, link: Link) -> None:
        if not valid_mean(link, self.theta):
            raise ValueError(f"target {self.theta} is outside the range of link {link.value}")
