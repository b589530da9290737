"""Estimating-equation solver and robust (sandwich) covariance.

The coefficient estimate solves, over all observations pooled across stages,

    0 = U(beta) = (1/n) sum_i  m'(eta_i) xt_i (y_i - m(eta_i)),

with m = g^{-1} the inverse link and xt_i = (1, a_i', z_i')' (the leading 1
dropped for intercept-free models). This is the independence-working-
correlation GEE score; with the identity link it reduces to least squares.

The covariance is the plug-in sandwich J^{-1} V J^{-1} / n with

    J = (1/n) sum_i m'(eta_i)^2 xt_i xt_i',
    V = (1/n) sum_i m'(eta_i)^2 (y_i - m(eta_i))^2 xt_i xt_i'.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .data import TrialDataset
from .links import Link, inverse, inverse_deriv, inverse_deriv2
from .model import ParameterVector
from .quantiles import chi2_sf

MAX_ITER = 100
MAX_HALVINGS = 30
TOL = 1e-10
JITTER = 1e-10
MAX_CONDITION = 1e12


class FitError(RuntimeError):
    pass


class RankDeficientError(FitError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design is rank deficient; collinear columns: {self.columns}")


class ConvergenceError(FitError):
    def __init__(self, beta_last, residual_norm, iterations):
        self.beta_last = beta_last
        self.residual_norm = residual_norm
        self.iterations = iterations
        super().__init__(f"no convergence after {iterations} iterations; "
                         f"max|U| = {residual_norm:.3e}")


@dataclass(frozen=True)
class FitResult:
    beta_hat: ParameterVector
    covariance: np.ndarray          # (n_free, n_free), J^{-1} V J^{-1} / n
    n_total: int
    converged: bool
    iterations: int
    final_residual_norm: float
    link: Link
    residual_variance: float        # mean squared residual on the response scale

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def effect_block(self) -> tuple[np.ndarray, np.ndarray]:
        """(beta1_hat, covariance block) for the package-effect coordinates."""
        off = 1 if self.beta_hat.has_intercept else 0
        p = self.beta_hat.p
        return (self.beta_hat.effects,
                self.covariance[off:off + p, off:off + p])

    def contrast_vector(self, x, z) -> np.ndarray:
        """Design row (1?, x', z') matching the free-coefficient layout."""
        x = np.asarray(x, dtype=float).reshape(-1)
        z = np.asarray(z, dtype=float).reshape(-1)
        head = [np.ones(1)] if self.beta_hat.has_intercept else []
        return np.concatenate(head + [x, z])


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    kind: str
    extra: dict = field(default_factory=dict)


def design_matrix(ds: TrialDataset, include_intercept: bool = True) -> np.ndarray:
    parts = []
    if include_intercept:
        parts.append(np.ones((ds.n_total, 1)))
    parts.append(ds.a)
    parts.append(ds.z)
    return np.hstack(parts)


def _column_names(ds: TrialDataset, include_intercept: bool) -> list[str]:
    names = ["intercept"] if include_intercept else []
    names += [f"a_{i + 1}" for i in range(ds.n_components)]
    names += [f"z_{i + 1}" for i in range(ds.n_covariates)]
    return names


def _check_rank(xtx: np.ndarray, names: list[str]) -> None:
    # jittered Cholesky as the cheap pass, condition number as the verdict
    jitter = JITTER * max(np.trace(xtx), 1.0)
    try:
        np.linalg.cholesky(xtx + jitter * np.eye(len(xtx)))
        cond = np.linalg.cond(xtx)
        if cond < MAX_CONDITION:
            return
    except np.linalg.LinAlgError:
        pass
    # name the columns living in the null space
    _, s, vt = np.linalg.svd(xtx)
    null = vt[s < s[0] / MAX_CONDITION] if s[0] > 0 else vt
    involved = sorted({names[j] for row in null for j in np.nonzero(np.abs(row) > 1e-6)[0]})
    raise RankDeficientError(involved or names)


def fit_gee(data: TrialDataset, link: Link, include_intercept: bool = True,
            tol: float = TOL, max_iter: int = MAX_ITER) -> FitResult:
    """Solve U(beta) = 0 by damped Newton with the analytic Jacobian."""
    X = design_matrix(data, include_intercept)
    y = data.y
    n, k = X.shape
    if n <= k:
        raise FitError(f"need more than {k} observations to fit {k} coefficients, got {n}")
    _check_rank(X.T @ X, _column_names(data, include_intercept))

    beta = np.zeros(k)
    u = _score(X, y, beta, link)
    norm = float(np.max(np.abs(u)))
    converged = norm <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        jac = _score_jacobian(X, y, beta, link)
        try:
            step = np.linalg.solve(jac, u)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, u, rcond=None)[0]
        # Newton direction is -J^{-1} u with J = dU/dbeta
        trial = beta - step
        new_u = _score(X, y, trial, link)
        new_norm = float(np.max(np.abs(new_u)))
        halvings = 0
        while not np.isfinite(new_norm) or (new_norm >= norm and new_norm > tol):
            halvings += 1
            if halvings > MAX_HALVINGS:
                break
            step = step / 2.0
            trial = beta - step
            new_u = _score(X, y, trial, link)
            new_norm = float(np.max(np.abs(new_u)))
        if not np.isfinite(new_norm) or new_norm >= norm and new_norm > tol:
            raise ConvergenceError(beta, norm, it)
        beta, u, norm = trial, new_u, new_norm
        converged = norm <= tol
    if not converged:
        raise ConvergenceError(beta, norm, it)

    eta = X @ beta
    mu = inverse(link, eta)
    d = inverse_deriv(link, eta)
    resid = y - mu
    Xd = X * d[:, None]
    J = (Xd.T @ Xd) / n
    V = (Xd.T @ (Xd * (resid ** 2)[:, None])) / n
    Jinv = np.linalg.inv(J)
    cov = Jinv @ V @ Jinv / n
    cov = (cov + cov.T) / 2.0

    beta_hat = ParameterVector.from_array(beta, data.n_components, data.n_covariates,
                                          include_intercept)
    return FitResult(
        beta_hat=beta_hat,
        covariance=cov,
        n_total=n,
        converged=True,
        iterations=it,
        final_residual_norm=norm,
        link=link,
        residual_variance=float(np.mean(resid ** 2)),
    )


def _score(X, y, beta, link):
    eta = X @ beta
    w = inverse_deriv(link, eta) * (y - inverse(link, eta))
    return X.T @ w / len(y)


def _score_jacobian(X, y, beta, link):
    eta = X @ beta
    mu = inverse(link, eta)
    d1 = inverse_deriv(link, eta)
    d2 = inverse_deriv2(link, eta)
    w = d2 * (y - mu) - d1 ** 2
    return (X * w[:, None]).T @ X / len(y)


def score_norm(data: TrialDataset, fit: FitResult) -> float:
    """max|U(beta_hat)| on the fitted dataset; solver fixed-point check."""
    X = design_matrix(data, fit.beta_hat.has_intercept)
    return float(np.max(np.abs(_score(X, data.y, fit.beta_hat.as_array(), fit.link))))


def wald_component_test(fit: FitResult, component_indices=None) -> TestResult:
    """Chi-squared test of the selected package-effect coefficients being 0."""
    b1, sigma = fit.effect_block()
    if component_indices is None:
        idx = np.arange(len(b1))
    else:
        idx = np.asarray(sorted(component_indices), dtype=int)
        if len(idx) == 0 or idx.min() < 0 or idx.max() >= len(b1):
            raise ValueError(f"component indices must be within 0..{len(b1) - 1}")
    b = b1[idx]
    s = sigma[np.ix_(idx, idx)]
    try:
        stat = float(b @ np.linalg.solve(s, b))
    except np.linalg.LinAlgError:
        raise FitError("effect covariance block is singular") from None
    df = len(idx)
    return TestResult(statistic=stat, df=df, p_value=chi2_sf(stat, df), kind="wald_chisq")


def _center_means(data: TrialDataset, arm_value: bool) -> np.ndarray:
    mask = data.arm == arm_value
    sums: dict[tuple, list] = {}
    for i in np.nonzero(mask)[0]:
        key = (int(data.stage[i]), data.center_id[i])
        acc = sums.setdefault(key, [0.0, 0])
        acc[0] += float(data.y[i])
        acc[1] += 1
    return np.array([s / m for s, m in sums.values()])


def two_sample_means_test(data: TrialDataset) -> TestResult:
    """Welch z test of the arm means, pooled across stages.

    The units are (stage, center) mean outcomes, which keeps the level honest
    when centers share covariates the test does not adjust for; with
    one-observation centers this is exactly the classic Welch statistic.
    The p-value uses the Welch-Satterthwaite t reference.
    """
    mi = _center_means(data, True)
    mc = _center_means(data, False)
    if len(mi) < 2 or len(mc) < 2:
        raise FitError("both arms need at least two (stage, center) groups")
    vi, vc = mi.var(ddof=1), mc.var(ddof=1)
    diff = float(mi.mean() - mc.mean())
    se2 = vi / len(mi) + vc / len(mc)
    if se2 == 0.0:
        stat = 0.0 if diff == 0.0 else float(np.sign(diff) * np.inf)
        df = 1.0
    else:
        stat = diff / float(np.sqrt(se2))
        df = se2 ** 2 / (vi ** 2 / (len(mi) ** 2 * (len(mi) - 1))
                         + vc ** 2 / (len(mc) ** 2 * (len(mc) - 1)))
    p = _student_two_sided(stat, df)
    return TestResult(statistic=float(stat), df=1, p_value=p, kind="two_sample_z",
                      extra={"mean_diff": diff, "se": float(np.sqrt(se2)),
                             "satterthwaite_df": float(df)})


def _student_two_sided(stat: float, df: float) -> float:
    if not np.isfinite(stat):
        return 0.0
    x = df / (df + stat * stat)
    return float(min(max(betainc(df / 2.0, 0.5, x), 0.0), 1.0))


def adjusted_group_test(data: TrialDataset, link: Link) -> TestResult:
    """Wald test of gamma = 0 in g(E[Y]) = beta0 + beta2'z + gamma*R."""
    if not (data.arm.any() and (~data.arm).any()):
        raise FitError("both arms must be present")
    r = data.arm.astype(float)[:, None]
    surrogate = TrialDataset(
        stage=data.stage,
        center_id=data.center_id,
        arm=data.arm,
        a=r,
        z=data.z,
        y=data.y,
    )
    fit = fit_gee(surrogate, link, include_intercept=True)
    gamma = float(fit.beta_hat.effects[0])
    var = float(fit.effect_block()[1][0, 0])
    stat = gamma * gamma / var
    return TestResult(statistic=stat, df=1, p_value=chi2_sf(stat, 1),
                      kind="adjusted_gamma", extra={"gamma": gamma, "se": float(np.sqrt(var))})
