"""Multi-stage trial simulation engine.

Generates sequential (learn-as-you-go), factorial, and screening-then-RCT
studies under a known truth, runs the estimation/optimization pipeline on
each replication, and aggregates the operating characteristics (bias,
coverage, optimizer error, confidence-set/band coverage, test power).

Replications draw from counter-based Philox streams keyed by
``(seed, replication)``, so results are bitwise identical no matter how the
replications are scheduled across workers.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import TrialDataset, from_center_blocks
from .estimation import (FitError, FitResult, fit_gee, two_sample_means_test,
                         wald_component_test)
from .inference import bands_cover, set_covers, set_summary
from .links import Link, inverse
from .model import (CenterCovariates, ComponentBounds, CostFunction,
                    InterventionPackage, ParameterVector, TargetSpec,
                    mean_response)
from .optimizer import Recommendation, recommend, recommend_with_power

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StageSpec:
    """Arm sizes for one stage: centers and patients per center."""

    n_intervention_centers: int
    n_control_centers: int
    n_per_center: int


@dataclass(frozen=True)
class Adherence:
    """Multiplicative dose perturbation U[lo, hi] per component, per center."""

    lo: float = 0.9
    hi: float = 1.1

    def apply(self, doses: np.ndarray, rng: np.random.Generator,
              bounds: ComponentBounds) -> np.ndarray:
        factors = rng.uniform(self.lo, self.hi, size=len(doses))
        return bounds.clamp(doses * factors)


@dataclass(frozen=True)
class PowerSteering:
    """Escalate recommendations until the projected two-sample power reaches
    the target (used by the power-constrained sequential design)."""

    target: float = 0.9
    planned_n_per_arm: int = 50
    alpha: float = 0.05


@dataclass(frozen=True)
class DesignSpec:
    kind: str                       # clago | uvlago | factorial | most
    link: Link
    beta_true: ParameterVector
    bounds: ComponentBounds
    cost: CostFunction
    target: TargetSpec
    stages: tuple                   # tuple[StageSpec, ...]
    sigma: float
    stage1_package: tuple = None            # fixed stage-1 doses, or None
    factorial_packages: tuple = None        # choices for factorial assignment
    z_dist: str = "normal"                  # normal | none | empirical
    z_values: tuple = ()                    # pool for the empirical generator
    stage1_adherence: Adherence = None
    later_adherence: Adherence = None       # applied to stage >= 2 recommendations
    tailored: bool = True                   # center-specific recommendations
    rec_increment: float = 0.01             # grid step for non-linear costs
    set_increment: float = 0.1              # grid step for sets/bands
    power_steering: PowerSteering = None
    most_rct_n: int = 0                     # RCT size for the screening design
    compute_grid_metrics: bool = True       # confidence set / bands per replication
    replications: int = 300
    seed: int = 0
    z_ref: tuple = None                     # covariates at which metrics are evaluated

    def __post_init__(self):
        if self.kind not in ("clago", "uvlago", "factorial", "most"):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.z_ref is None:
            object.__setattr__(self, "z_ref", (0.0,) * self.beta_true.q)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def reference_covariates(self) -> CenterCovariates:
        return CenterCovariates(self.z_ref)

    def true_optimum(self) -> Recommendation:
        return recommend(self.beta_true, self.reference_covariates(), self.bounds,
                         self.cost, self.target, self.link, self.rec_increment)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(rep)]))


def _draw_z(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    q = spec.beta_true.q
    if q == 0 or spec.z_dist == "none":
        return np.zeros(q)
    if spec.z_dist == "normal":
        return rng.standard_normal(q)
    if spec.z_dist == "empirical":
        if not spec.z_values:
            raise ValueError("empirical z generator needs z_values")
        return np.atleast_1d(np.asarray(spec.z_values, dtype=float)[
            rng.integers(0, len(spec.z_values))])
    raise ValueError(f"unknown z generator {spec.z_dist!r}")


def _center_outcomes(spec: DesignSpec, doses: np.ndarray, z: np.ndarray, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    mu = mean_response(spec.link, spec.beta_true, InterventionPackage(doses),
                       CenterCovariates(z))
    eps = rng.standard_normal(n) * spec.sigma if spec.sigma > 0 else np.zeros(n)
    return mu + eps


def _fit(spec: DesignSpec, ds: TrialDataset) -> FitResult:
    return fit_gee(ds, spec.link, include_intercept=spec.beta_true.has_intercept)


def _recommend_from_fit(spec: DesignSpec, fit: FitResult, z: CenterCovariates,
                        bounds: ComponentBounds = None) -> Recommendation:
    if bounds is None:
        bounds = spec.bounds
    if spec.power_steering is not None:
        ps = spec.power_steering
        return recommend_with_power(fit, z, bounds, spec.cost, spec.target,
                                    spec.link, ps.planned_n_per_arm, ps.target,
                                    ps.alpha, spec.rec_increment)
    if spec.cost.kind != "linear" and bounds is spec.bounds:
        # repeated tailored grid searches share one precomputed cost ordering
        return _grid_recommender(spec).query(fit.beta_hat, z, spec.target, spec.link)
    return recommend(fit.beta_hat, z, bounds, spec.cost, spec.target,
                     spec.link, spec.rec_increment)


@dataclass
class LagoReplication:
    dataset: TrialDataset
    stage_fits: list            # fit after each stage (pooled through stage k)
    stage_recs: list            # recommendation (at z_ref) computed after each stage
    final_fit: FitResult
    final_rec: Recommendation


def simulate_lago(spec: DesignSpec, rep: int) -> LagoReplication:
    """One sequential replication: stage 1 fixed packages, later stages use the
    pooled fit through the previous stage."""
    rng = replication_rng(spec.seed, rep)
    zref = spec.reference_covariates()
    blocks = []
    center_no = 0
    stage_fits: list[FitResult] = []
    stage_recs: list[Recommendation] = []
    fit = None

    for k, st in enumerate(spec.stages, start=1):
        for j in range(st.n_intervention_centers):
            center_no += 1
            z = _draw_z(spec, rng)
            if k == 1:
                doses = _stage1_doses(spec, rng)
                if spec.stage1_adherence is not None:
                    doses = spec.stage1_adherence.apply(doses, rng, spec.bounds)
            else:
                zc = CenterCovariates(z) if spec.tailored else zref
                rec = _recommend_from_fit(spec, fit, zc)
                doses = rec.package.doses
                if spec.later_adherence is not None:
                    doses = spec.later_adherence.apply(doses, rng, spec.bounds)
            y = _center_outcomes(spec, doses, z, st.n_per_center, rng)
            arm = bool(np.any(doses != 0.0))
            blocks.append((k, f"c{center_no:04d}", arm, doses, z, y))
        for j in range(st.n_control_centers):
            center_no += 1
            z = _draw_z(spec, rng)
            doses = np.zeros(spec.beta_true.p)
            y = _center_outcomes(spec, doses, z, st.n_per_center, rng)
            blocks.append((k, f"c{center_no:04d}", False, doses, z, y))

        ds = from_center_blocks(blocks)
        fit = _fit(spec, ds)
        stage_fits.append(fit)
        stage_recs.append(_recommend_from_fit(spec, fit, zref))

    ds = from_center_blocks(blocks)
    return LagoReplication(dataset=ds, stage_fits=stage_fits, stage_recs=stage_recs,
                           final_fit=stage_fits[-1], final_rec=stage_recs[-1])


def _stage1_doses(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.factorial_packages is not None:
        choices = np.asarray(spec.factorial_packages, dtype=float)
        return choices[rng.integers(0, len(choices))].copy()
    if spec.stage1_package is None:
        raise ValueError("sequential designs need stage1_package or factorial_packages")
    return np.asarray(spec.stage1_package, dtype=float).copy()


def simulate_factorial(spec: DesignSpec, rep: int) -> LagoReplication:
    """Single- or multi-stage design that keeps the factorial assignment
    throughout; centers drawing the all-zero cell are the control arm."""
    rng = replication_rng(spec.seed, rep)
    blocks = []
    center_no = 0
    choices = np.asarray(spec.factorial_packages, dtype=float)
    for k, st in enumerate(spec.stages, start=1):
        for j in range(st.n_intervention_centers + st.n_control_centers):
            center_no += 1
            z = _draw_z(spec, rng)
            doses = choices[rng.integers(0, len(choices))].copy()
            y = _center_outcomes(spec, doses, z, st.n_per_center, rng)
            arm = bool(np.any(doses != 0.0))
            blocks.append((k, f"c{center_no:04d}", arm, doses, z, y))
    ds = from_center_blocks(blocks)
    fit = _fit(spec, ds)
    rec = _recommend_from_fit(spec, fit, spec.reference_covariates())
    return LagoReplication(dataset=ds, stage_fits=[fit], stage_recs=[rec],
                           final_fit=fit, final_rec=rec)


@dataclass
class MostReplication:
    proceeded: bool
    screen_fit: FitResult
    rct_package: np.ndarray = None
    true_effect: float = 0.0
    effect_hat: float = 0.0
    effect_se: float = 0.0
    rejected: bool = False
    covered: bool = False


def simulate_most(spec: DesignSpec, rep: int) -> MostReplication:
    """Screening-then-RCT comparison design.

    Stage 1 is the factorial screen. The trial proceeds only when at least one
    estimated component effect is positive; components with nonpositive
    estimates are dropped to their lower bound. The confirmatory RCT
    randomizes 1:1 and is analyzed on its own outcomes only.
    """
    rng = replication_rng(spec.seed, rep)
    st = spec.stages[0]
    blocks = []
    choices = np.asarray(spec.factorial_packages, dtype=float)
    for j in range(st.n_intervention_centers + st.n_control_centers):
        z = _draw_z(spec, rng)
        doses = choices[rng.integers(0, len(choices))].copy()
        y = _center_outcomes(spec, doses, z, st.n_per_center, rng)
        blocks.append((1, f"s{j:04d}", bool(np.any(doses != 0.0)), doses, z, y))
    screen_fit = _fit(spec, from_center_blocks(blocks))

    b1 = screen_fit.beta_hat.effects
    if not np.any(b1 > 0):
        return MostReplication(proceeded=False, screen_fit=screen_fit)

    # pin nonpositive components at their lower bound by shrinking their box,
    # then recommend exactly as the sequential design would
    keep = b1 > 0
    bounds = ComponentBounds(spec.bounds.lower,
                             np.where(keep, spec.bounds.upper,
                                      spec.bounds.lower + 1e-12))
    rec = _recommend_from_fit(spec, screen_fit, spec.reference_covariates(), bounds)
    pkg = np.where(keep, rec.package.doses, spec.bounds.lower)

    n_arm = spec.most_rct_n // 2
    zr = np.asarray(spec.z_ref, dtype=float)
    y_ctrl = _center_outcomes(spec, np.zeros(spec.beta_true.p), zr, n_arm, rng)
    y_trt = _center_outcomes(spec, pkg, zr, n_arm, rng)
    diff = float(y_trt.mean() - y_ctrl.mean())
    se = float(np.sqrt(y_trt.var(ddof=1) / n_arm + y_ctrl.var(ddof=1) / n_arm))
    zcrit = 1.959963984540054
    true_effect = (mean_response(spec.link, spec.beta_true, InterventionPackage(pkg),
                                 spec.reference_covariates())
                   - mean_response(spec.link, spec.beta_true,
                                   InterventionPackage(np.zeros(spec.beta_true.p)),
                                   spec.reference_covariates()))
    return MostReplication(
        proceeded=True,
        screen_fit=screen_fit,
        rct_package=pkg,
        true_effect=true_effect,
        effect_hat=diff,
        effect_se=se,
        rejected=abs(diff) > zcrit * se,
        covered=abs(diff - true_effect) <= zcrit * se,
    )


# ---------------------------------------------------------------------------
# per-replication reduction and study-level aggregation
# ---------------------------------------------------------------------------

_GRID_CACHE: dict = {}


def _grid_recommender(spec: DesignSpec):
    from .optimizer import GridRecommender
    cf = spec.cost
    key = (tuple(spec.bounds.lower), tuple(spec.bounds.upper), cf.kind,
           cf.fixed_cost,
           tuple(cf.unit_costs) if cf.kind == "linear" else tuple(map(tuple, cf.cubic_coeffs)),
           spec.rec_increment)
    rec = _GRID_CACHE.get(key)
    if rec is None:
        rec = GridRecommender(spec.bounds, cf, spec.rec_increment)
        _GRID_CACHE[key] = rec
    return rec


def _coef_record(fit: FitResult) -> dict:
    return {"beta": fit.beta_hat.as_array().tolist(),
            "se": fit.standard_errors.tolist()}


def _true_mean_at(spec: DesignSpec, doses) -> float:
    return mean_response(spec.link, spec.beta_true, InterventionPackage(doses),
                         spec.reference_covariates())


def _true_optimum_doses(spec: DesignSpec) -> np.ndarray:
    if spec.cost.kind != "linear":
        rec = _grid_recommender(spec).query(spec.beta_true, spec.reference_covariates(),
                                            spec.target, spec.link)
        return rec.package.doses
    return spec.true_optimum().package.doses


def run_replication(spec: DesignSpec, rep: int) -> dict:
    """Reduce one replication to the scalar record the aggregator needs."""
    if spec.kind == "most":
        r = simulate_most(spec, rep)
        out = {"rep": rep, "proceeded": r.proceeded,
               "stage1": _coef_record(r.screen_fit)}
        if r.proceeded:
            out.update({
                "rejected": bool(r.rejected),
                "covered": bool(r.covered),
                "true_effect": float(r.true_effect),
                "rct_package": [float(v) for v in r.rct_package],
            })
        return out

    if spec.kind == "factorial":
        r = simulate_factorial(spec, rep)
    else:
        r = simulate_lago(spec, rep)

    zref = spec.reference_covariates()
    fit = r.final_fit
    wald = wald_component_test(fit)
    two = two_sample_means_test(r.dataset)
    out = {
        "rep": rep,
        "stage1": _coef_record(r.stage_fits[0]),
        "final": _coef_record(fit),
        "stage1_rec": [float(v) for v in r.stage_recs[0].package.doses],
        "final_rec": [float(v) for v in r.final_rec.package.doses],
        "final_rec_feasible": bool(r.final_rec.feasible),
        "mean_opt1": _true_mean_at(spec, r.stage_recs[0].package.doses),
        "mean_opt2": _true_mean_at(spec, r.final_rec.package.doses),
        "p_wald": wald.p_value,
        "p_two_sample": two.p_value,
    }
    if spec.compute_grid_metrics:
        x_true = _true_optimum_doses(spec)
        n_set, n_grid = set_summary(fit, spec.link, spec.bounds, zref, spec.target,
                                    spec.set_increment)

        def truth_fn(block):
            eta = (block @ spec.beta_true.effects + spec.beta_true.intercept
                   + (spec.beta_true.covariate_effects @ zref.values
                      if spec.beta_true.q else 0.0))
            return inverse(spec.link, eta)

        out["set_covered"] = bool(set_covers(fit, spec.link, spec.bounds, zref,
                                             spec.target, x_true, spec.set_increment))
        out["set_perc"] = n_set / n_grid
        out["bands_covered"] = bool(bands_cover(fit, spec.link, spec.bounds, zref,
                                                truth_fn, spec.set_increment))
    return out


def _coef_names(spec: DesignSpec) -> list:
    names = ["beta0"] if spec.beta_true.has_intercept else []
    names += [f"beta1{i + 1}" for i in range(spec.beta_true.p)]
    names += [f"beta2{i + 1}" for i in range(spec.beta_true.q)]
    return names


def _summarize_coefs(records: list, key: str, spec: DesignSpec) -> dict:
    zcrit = 1.959963984540054
    beta_true = spec.beta_true.as_array()
    names = _coef_names(spec)
    B = np.array([r[key]["beta"] for r in records])
    S = np.array([r[key]["se"] for r in records])
    out = {}
    for i, name in enumerate(names):
        b, s, t = B[:, i], S[:, i], beta_true[i]
        emp_sd = float(b.std(ddof=1))
        covered = np.abs(b - t) <= zcrit * s
        out[name] = {
            "true": float(t),
            "mean": float(b.mean()),
            "bias": float(b.mean() - t),
            "rel_bias_pct": float(100.0 * (b.mean() - t) / t) if t != 0 else None,
            "mean_se": float(s.mean()),
            "emp_sd": emp_sd,
            "se_over_emp_sd_x100": float(100.0 * s.mean() / emp_sd) if emp_sd > 0 else None,
            "cp95": float(np.mean(covered)),
        }
    return out


def _quantiles(values: np.ndarray) -> dict:
    return {"q2_5": float(np.quantile(values, 0.025)),
            "q97_5": float(np.quantile(values, 0.975))}


def _opt_summary(records: list, key: str, x_true: np.ndarray) -> dict:
    X = np.array([r[key] for r in records])
    bias = X.mean(axis=0) - x_true
    rmse = float(np.sqrt(np.mean(np.sum((X - x_true) ** 2, axis=1))))
    return {"bias_x100": [float(100.0 * v) for v in bias],
            "rmse_x100": float(100.0 * rmse)}


def aggregate(spec: DesignSpec, records: list, failures: int) -> dict:
    """Fold replication records into the study-metrics document."""
    alpha = 0.05
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": spec.kind,
        "replications": len(records),
        "failures": failures,
        "seed": spec.seed,
    }
    if spec.kind == "most":
        proceeded = [r for r in records if r["proceeded"]]
        out["stage1_coefficients"] = _summarize_coefs(records, "stage1", spec)
        out["proceed_fraction"] = len(proceeded) / len(records) if records else 0.0
        rejected = sum(1 for r in proceeded if r["rejected"])
        out["power"] = {"two_sample_z": rejected / len(records) if records else 0.0}
        if proceeded:
            eff = np.array([r["true_effect"] for r in proceeded])
            out["effect_cp95"] = float(np.mean([r["covered"] for r in proceeded]))
            out["effect_median"] = float(np.median(eff))
            out["effect_iqr"] = [float(np.quantile(eff, 0.25)),
                                 float(np.quantile(eff, 0.75))]
        return out

    x_true = _true_optimum_doses(spec)
    out["true_optimum"] = [float(v) for v in x_true]
    out["stage1_coefficients"] = _summarize_coefs(records, "stage1", spec)
    out["coefficients"] = _summarize_coefs(records, "final", spec)
    out["optimizer"] = {
        "stage1": _opt_summary(records, "stage1_rec", x_true),
        "final": _opt_summary(records, "final_rec", x_true),
    }
    out["mean_opt1"] = _quantiles(np.array([r["mean_opt1"] for r in records]))
    out["mean_opt2"] = _quantiles(np.array([r["mean_opt2"] for r in records]))
    if spec.compute_grid_metrics:
        out["set_cp95"] = float(np.mean([r["set_covered"] for r in records]))
        out["set_perc"] = float(np.mean([r["set_perc"] for r in records]))
        out["bands_cp95"] = float(np.mean([r["bands_covered"] for r in records]))
    out["power"] = {
        "wald_chisq": float(np.mean([r["p_wald"] < alpha for r in records])),
        "two_sample_z": float(np.mean([r["p_two_sample"] < alpha for r in records])),
    }
    return out


def _worker(args):
    spec, rep = args
    try:
        return rep, run_replication(spec, rep), None
    except FitError as exc:
        return rep, None, f"rep {rep}: {exc}"


def thread_budget() -> int:
    raw = os.environ.get("LAGO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_study(spec: DesignSpec, workers: int = None) -> dict:
    """Run all replications (optionally in parallel) and aggregate metrics.

    Identical ``(spec, seed)`` produce identical metrics for any worker
    count: every replication owns a counter-based stream and aggregation
    happens in replication order.
    """
    if spec.replications < 2:
        raise ValueError("need at least 2 replications")
    if workers is None:
        workers = thread_budget()
    jobs = [(spec, rep) for rep in range(spec.replications)]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=8))
    else:
        results = [_worker(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    records = [r for _, r, err in results if err is None]
    errors = [err for _, _, err in results if err is not None]
    if not records:
        raise FitError(f"all {spec.replications} replications failed; first: {errors[0]}")
    metrics = aggregate(spec, records, failures=len(errors))
    if errors:
        metrics["failure_messages"] = errors[:10]
    return metrics


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"
