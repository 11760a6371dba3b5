"""Classical baselines: the one-way F test and a likelihood-ratio test
for equal treatment effects in a random-intercept model."""

from dataclasses import dataclass, field
from math import log, pi

import numpy as np
from scipy.special import betainc
from scipy.stats import chi2

from .designs import Dataset
from .errors import NonConvergenceError, NumericError, ValidationError

__all__ = [
    "FTestResult",
    "LRTestResult",
    "oneway_f_test",
    "lr_test_equal_treatments",
]


@dataclass(frozen=True)
class FTestResult:
    """One-way analysis of variance F test."""

    f_stat: float
    df1: int
    df2: int
    p_value: float
    ss_between: float
    ss_within: float
    ms_between: float
    ms_within: float
    degenerate: bool = False


def _coerce_groups(data) -> list[np.ndarray]:
    if isinstance(data, Dataset):
        groups = data.treatment_groups()
    else:
        groups = [np.asarray(g, dtype=float) for g in data]
    if len(groups) < 2:
        raise ValidationError("need at least two treatment groups")
    for i, g in enumerate(groups):
        if g.ndim != 1 or g.size == 0:
            raise ValidationError(f"group {i + 1} must be a nonempty vector")
        if not np.all(np.isfinite(g)):
            raise ValidationError(f"group {i + 1} contains non-finite values")
    return groups


def oneway_f_test(data) -> FTestResult:
    """Classic one-way F test on a dataset (grouped by treatment) or on a
    sequence of per-group value arrays.

    The p value comes from the regularized incomplete beta form of the F
    survival function. Zero within-group variance is flagged as
    degenerate: the statistic is infinite when the group means differ and
    undefined when they do not.
    """
    groups = _coerce_groups(data)
    k = len(groups)
    counts = np.array([g.size for g in groups], dtype=float)
    n = int(counts.sum())
    if n - k < 1:
        raise ValidationError("need more observations than groups")
    means = np.array([g.mean() for g in groups])
    grand = float(np.concatenate(groups).mean())
    ss_between = float(np.sum(counts * (means - grand) ** 2))
    ss_within = float(sum(np.sum((g - m) ** 2) for g, m in zip(groups, means)))
    df1 = k - 1
    df2 = n - k
    ms_between = ss_between / df1
    ms_within = ss_within / df2
    if ms_within == 0.0:
        f_stat = np.inf if ms_between > 0 else np.nan
        p_value = 0.0 if ms_between > 0 else np.nan
        return FTestResult(
            f_stat=float(f_stat),
            df1=df1,
            df2=df2,
            p_value=float(p_value),
            ss_between=ss_between,
            ss_within=ss_within,
            ms_between=ms_between,
            ms_within=ms_within,
            degenerate=True,
        )
    f_stat = ms_between / ms_within
    p_value = float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat)))
    return FTestResult(
        f_stat=float(f_stat),
        df1=df1,
        df2=df2,
        p_value=p_value,
        ss_between=ss_between,
        ss_within=ss_within,
        ms_between=ms_between,
        ms_within=ms_within,
    )


@dataclass(frozen=True)
class LRTestResult:
    """Likelihood-ratio test of equal treatment effects in the
    random-intercept model, with the chi-square reference on k - 1
    degrees of freedom."""

    lr_stat: float
    df: int
    p_value: float
    loglik_full: float
    loglik_null: float
    n_iter_full: int
    n_iter_null: int
    meta: dict = field(default_factory=dict)


@dataclass
class _MixedFit:
    coef: np.ndarray
    tau2: float
    sigma2: float
    loglik: float
    n_iter: int
    trace: list[float]
    at_boundary: bool


def _marginal_loglik(
    y, x, machine, n_machines, coef, tau2, sigma2
) -> float:
    """Exact marginal log likelihood of the random-intercept model,
    machine by machine."""
    r = y - x @ coef
    total = 0.0
    for m in range(n_machines):
        rm = r[machine == m]
        nm = rm.size
        rbar = float(rm.mean())
        ss_dev = float(np.sum((rm - rbar) ** 2))
        denom = sigma2 + nm * tau2
        total += -0.5 * (
            nm * log(2.0 * pi)
            + (nm - 1) * log(sigma2)
            + log(denom)
            + ss_dev / sigma2
            + nm * rbar**2 / denom
        )
    return total


def _ols(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(x, y, rcond=None)[0]


def _iid_fit(y, x, machine, n_machines) -> _MixedFit:
    """The tau2 = 0 boundary: ordinary least squares with iid noise."""
    coef = _ols(x, y)
    resid = y - x @ coef
    sigma2 = float(np.mean(resid**2))
    if sigma2 <= 0:
        raise NumericError("response is perfectly fit; likelihood unbounded")
    loglik = _marginal_loglik(y, x, machine, n_machines, coef, 0.0, sigma2)
    return _MixedFit(
        coef=coef,
        tau2=0.0,
        sigma2=sigma2,
        loglik=loglik,
        n_iter=0,
        trace=[loglik],
        at_boundary=True,
    )


def _em_fit(y, x, machine, n_machines, tol, max_iter) -> _MixedFit:
    """EM for the random-intercept model, treating the intercepts as the
    missing data. Each iteration cannot decrease the marginal likelihood;
    the fit is compared against the tau2 = 0 boundary and the better one
    is returned."""
    n = y.size
    counts = np.bincount(machine, minlength=n_machines).astype(float)
    coef = _ols(x, y)
    resid = y - x @ coef
    mach_means = np.bincount(machine, weights=resid, minlength=n_machines) / counts
    sigma2 = float(np.mean((resid - mach_means[machine]) ** 2))
    var_y = float(np.var(y))
    if sigma2 <= 0:
        sigma2 = max(1e-8 * var_y, 1e-12)
    tau2 = float(np.var(mach_means))
    floor = max(1e-10 * var_y, 1e-300)
    tau2 = max(tau2, 10 * floor)

    trace = [
        _marginal_loglik(y, x, machine, n_machines, coef, tau2, sigma2)
    ]
    converged = False
    hit_floor = False
    for _ in range(max_iter):
        v = 1.0 / (1.0 / tau2 + counts / sigma2)
        resid = y - x @ coef
        u_hat = v * np.bincount(machine, weights=resid, minlength=n_machines) / sigma2
        coef = _ols(x, y - u_hat[machine])
        resid = y - x @ coef
        tau2 = float(np.mean(u_hat**2 + v))
        sigma2 = float(
            np.mean((resid - u_hat[machine]) ** 2) + np.sum(counts * v) / n
        )
        if sigma2 <= 0:
            raise NumericError("response is perfectly fit; likelihood unbounded")
        trace.append(
            _marginal_loglik(y, x, machine, n_machines, coef, tau2, sigma2)
        )
        if tau2 < floor:
            hit_floor = True
            break
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    fit = _MixedFit(
        coef=coef,
        tau2=tau2,
        sigma2=sigma2,
        loglik=trace[-1],
        n_iter=len(trace) - 1,
        trace=trace,
        at_boundary=False,
    )
    boundary = _iid_fit(y, x, machine, n_machines)
    boundary.trace = trace
    boundary.n_iter = fit.n_iter
    if boundary.loglik >= fit.loglik:
        return boundary
    if hit_floor:
        fit.at_boundary = True
        return fit
    if not converged:
        raise NonConvergenceError(
            f"EM did not reach tolerance {tol} in {max_iter} iterations",
            last_iterate=fit,
        )
    return fit


def lr_test_equal_treatments(
    data: Dataset, *, tol: float = 1e-8, max_iter: int = 5000
) -> LRTestResult:
    """Likelihood-ratio test that all treatment effects are equal, in the
    model with a random intercept per machine.

    Both the full model (intercept plus treatment dummies) and the null
    (intercept only) are fit by EM on the exact marginal likelihood; a
    machine variance estimate that collapses is pinned to zero and the
    model refit there. The statistic is compared to chi-square with
    k - 1 degrees of freedom.
    """
    if data.schema != "nested":
        raise ValidationError("expected a nested-schema dataset")
    machine = data.factors["machine"]
    treatment = data.factors["treatment"]
    n_machines = data.levels["machine"]
    k = data.levels["treatment"]
    if k < 2:
        raise ValidationError("need at least two treatment groups")
    for m in range(n_machines):
        if np.unique(treatment[machine == m]).size > 1:
            raise ValidationError(
                f"machine {m + 1} appears under several treatments"
            )
    y = data.y
    x_null = np.ones((data.n, 1))
    x_full = np.hstack(
        [x_null, (treatment[:, None] == np.arange(1, k)[None, :]).astype(float)]
    )
    full = _em_fit(y, x_full, machine, n_machines, tol, max_iter)
    null = _em_fit(y, x_null, machine, n_machines, tol, max_iter)
    lr = max(2.0 * (full.loglik - null.loglik), 0.0)
    df = k - 1
    p_value = float(chi2.sf(lr, df))
    return LRTestResult(
        lr_stat=float(lr),
        df=df,
        p_value=p_value,
        loglik_full=full.loglik,
        loglik_null=null.loglik,
        n_iter_full=full.n_iter,
        n_iter_null=null.n_iter,
        meta={
            "coef_full": full.coef.tolist(),
            "tau2_full": full.tau2,
            "sigma2_full": full.sigma2,
            "tau2_null": null.tau2,
            "sigma2_null": null.sigma2,
            "boundary_full": full.at_boundary,
            "boundary_null": null.at_boundary,
            "trace_full": full.trace,
            "trace_null": null.trace,
        },
    )
