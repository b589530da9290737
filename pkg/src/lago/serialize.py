"""JSON-facing converters shared by the CLI and the HTTP service."""

from __future__ import annotations

import numpy as np

from .estimation import FitResult, TestResult
from .links import Link
from .model import (CenterCovariates, ComponentBounds, CostFunction,
                    InterventionPackage, ParameterVector)
from .optimizer import Recommendation

SCHEMA_VERSION = 1


def fit_to_dict(fit: FitResult) -> dict:
    from .quantiles import two_sided_z
    z = two_sided_z(0.95)
    free = fit.beta_hat.as_array()
    se = fit.standard_errors
    return {
        "schema_version": SCHEMA_VERSION,
        "link": fit.link.value,
        "include_intercept": fit.beta_hat.has_intercept,
        "beta": {
            "intercept": fit.beta_hat.intercept,
            "effects": fit.beta_hat.effects.tolist(),
            "covariate_effects": fit.beta_hat.covariate_effects.tolist(),
        },
        "coefficient_names": _coef_names(fit),
        "coefficients": free.tolist(),
        "standard_errors": se.tolist(),
        "coefficient_cis": [[float(b - z * s), float(b + z * s)]
                            for b, s in zip(free, se)],
        "covariance": fit.covariance.tolist(),
        "n_total": fit.n_total,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "final_residual_norm": fit.final_residual_norm,
        "residual_variance": fit.residual_variance,
    }


def _coef_names(fit: FitResult) -> list:
    names = ["intercept"] if fit.beta_hat.has_intercept else []
    names += [f"a_{i + 1}" for i in range(fit.beta_hat.p)]
    names += [f"z_{i + 1}" for i in range(fit.beta_hat.q)]
    return names


def fit_from_dict(doc: dict) -> FitResult:
    beta = ParameterVector(
        doc["beta"]["intercept"],
        doc["beta"]["effects"],
        doc["beta"].get("covariate_effects", ()),
        has_intercept=doc.get("include_intercept", True),
    )
    return FitResult(
        beta_hat=beta,
        covariance=np.asarray(doc["covariance"], dtype=float),
        n_total=int(doc["n_total"]),
        converged=bool(doc["converged"]),
        iterations=int(doc.get("iterations", 0)),
        final_residual_norm=float(doc.get("final_residual_norm", 0.0)),
        link=Link.parse(doc["link"]),
        residual_variance=float(doc.get("residual_variance", 0.0)),
    )


def test_to_dict(t: TestResult) -> dict:
    out = {"kind": t.kind, "statistic": t.statistic, "df": t.df, "p_value": t.p_value}
    out.update(t.extra)
    return out


def recommendation_to_dict(rec: Recommendation) -> dict:
    doc = rec.as_dict()
    doc["schema_version"] = SCHEMA_VERSION
    doc["z"] = rec.z.values.tolist()
    return doc


def parse_cost(text_or_doc) -> CostFunction:
    """Accept ``linear:8,2``, ``cubic:a,b,c,d;...``, or a config mapping."""
    if isinstance(text_or_doc, dict):
        doc = text_or_doc
        kind = doc.get("kind")
        if kind == "linear":
            return CostFunction("linear", doc["unit_costs"], doc.get("fixed_cost", 0.0))
        if kind == "cubic":
            return CostFunction("cubic", fixed_cost=doc.get("fixed_cost", 0.0),
                                cubic_coeffs=doc["cubic_coeffs"])
        raise ValueError(f"cost.kind must be linear or cubic, got {kind!r}")
    text = str(text_or_doc)
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    if kind == "linear":
        return CostFunction("linear", [float(v) for v in body.split(",") if v])
    if kind == "cubic":
        rows = [[float(v) for v in row.split(",")] for row in body.split(";") if row]
        return CostFunction("cubic", cubic_coeffs=rows)
    raise ValueError(f"cost must look like linear:8,2 or cubic:a,b,c,d;..., got {text!r}")


def parse_bounds(text_or_doc) -> ComponentBounds:
    """Accept ``0:2,0:8`` or a config mapping with lower/upper arrays."""
    if isinstance(text_or_doc, dict):
        return ComponentBounds(text_or_doc["lower"], text_or_doc["upper"])
    pairs = [p for p in str(text_or_doc).split(",") if p]
    lo, hi = [], []
    for p in pairs:
        a, _, b = p.partition(":")
        lo.append(float(a))
        hi.append(float(b))
    return ComponentBounds(lo, hi)


def parse_z(text) -> CenterCovariates:
    if text is None or text == "":
        return CenterCovariates(())
    if isinstance(text, (list, tuple)):
        return CenterCovariates(text)
    return CenterCovariates([float(v) for v in str(text).split(",") if v != ""])


def parse_beta(doc: dict) -> ParameterVector:
    return ParameterVector(
        doc.get("intercept", 0.0),
        doc["effects"],
        doc.get("covariate_effects", ()),
        has_intercept=doc.get("include_intercept", True),
    )


def package_to_list(x: InterventionPackage) -> list:
    return [float(v) for v in x.doses]


__all__ = [
    "SCHEMA_VERSION", "fit_to_dict", "fit_from_dict", "test_to_dict",
    "recommendation_to_dict", "parse_cost", "parse_bounds", "parse_z",
    "parse_beta", "package_to_list",
]
