"""Marginal likelihoods, Bayes factors, and prior sensitivity.

Two estimators are provided for constrained one-way models:

* ``direct_marginal``: average the likelihood over draws from the
  (possibly constrained) prior, in log space.
* ``encompassing_bf``: the Bayes factor of a constrained model against
  the unconstrained one is the posterior fraction of draws satisfying the
  constraint divided by its exact prior proportion.

For variance-structure models on a whole design, the likelihood with all
effect batches integrated out is a zero-mean multivariate normal whose
covariance is a low-rank update of the identity; it is evaluated both
densely (with a Cholesky factor) and in a batched low-rank form used by
the Monte Carlo evidence and prior-sensitivity routines.
"""

from dataclasses import dataclass, field
from math import log, pi, sqrt

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .constraints import ConstraintSet, exact_prior_proportion, indicator_matrix
from .designs import Dataset, LatinSquareDesign, NestedDesign
from .diagnostics import effective_sample_size
from .errors import DegenerateEstimateError, NumericError, ValidationError
from .rngtools import substream
from .samplers import ChainConfig, OneWayStats, PosteriorDraws, PriorSpec, gibbs_oneway

__all__ = [
    "ModelEvidence",
    "EncompassingBF",
    "ModelComparison",
    "VarCompPriors",
    "VarianceModelSpec",
    "LindleyRow",
    "LindleyResult",
    "direct_marginal",
    "encompassing_bf",
    "bf_from_draws",
    "posterior_model_probs",
    "compare_constrained_models",
    "integrated_likelihood_varcomps",
    "varcomp_loglik_gradient",
    "variance_model_evidence",
    "lindley_sensitivity",
]


@dataclass(frozen=True)
class ModelEvidence:
    """A log marginal likelihood estimate with its Monte Carlo error.

    For ``method="encompassing"`` the value is relative: the log Bayes
    factor against the encompassing model, whose own marginal cancels in
    any comparison across models sharing it.
    """

    log_marginal: float
    mc_se_log: float
    n_draws: int
    method: str
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EncompassingBF:
    """Bayes factor of a constrained model against the encompassing one.

    Iterating yields ``(bf, se)``. When no kept draw satisfies the
    constraint, ``bf`` is 0 with ``at_lower_bound`` set and ``meta``
    carries a rough upper bound implied by seeing zero successes.
    """

    bf: float
    se: float
    posterior_fraction: float
    prior_proportion: float
    ess: float
    n_draws: int
    at_lower_bound: bool = False
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.bf, self.se))


@dataclass(frozen=True)
class ModelComparison:
    """Posterior model probabilities and the pairwise Bayes factor matrix."""

    labels: tuple[str, ...]
    prior_probs: np.ndarray
    posterior_probs: np.ndarray
    bayes_factors: np.ndarray
    evidences: tuple[ModelEvidence, ...]

    def __post_init__(self):
        m = len(self.labels)
        if not (
            self.prior_probs.shape == (m,)
            and self.posterior_probs.shape == (m,)
            and self.bayes_factors.shape == (m, m)
        ):
            raise ValidationError("comparison arrays have inconsistent shapes")
        if abs(float(self.prior_probs.sum()) - 1.0) > 1e-12:
            raise ValidationError("prior model probabilities must sum to 1")
        if abs(float(self.posterior_probs.sum()) - 1.0) > 1e-12:
            raise ValidationError("posterior model probabilities must sum to 1")
        bf = self.bayes_factors
        # 0 * inf pairs (a model with no surviving draws) are legitimate.
        with np.errstate(invalid="ignore"):
            for i in range(m):
                for j in range(m):
                    prod = bf[i, j] * bf[j, i]
                    if np.isfinite(prod) and abs(prod - 1.0) > 1e-9:
                        raise ValidationError(
                            "Bayes factor matrix is not reciprocal-symmetric"
                        )


def direct_marginal(
    data: Dataset | None,
    prior: PriorSpec,
    cs: ConstraintSet | None = None,
    n: int = 100_000,
    seed: int = 0,
    *,
    k: int | None = None,
    fix_sigma2: float | None = None,
    stream: tuple = ("direct-marginal",),
) -> ModelEvidence:
    """Estimate the log marginal likelihood by prior Monte Carlo.

    Draws ``n`` parameter vectors from the encompassing prior on the
    stream ``(seed, *stream)`` (effects first, then residual variances),
    keeps those satisfying the constraint, and averages their likelihoods
    in log space with a max shift. Dividing by the exact constraint
    proportion converts the result to the truncated, renormalized prior.
    The reported ``mc_se_log`` is the delta-method standard error.

    ``data=None`` is a calibration mode in which the likelihood is
    identically 1, so the true answer is a log marginal of 0.

    Raises
    ------
    DegenerateEstimateError
        If no draw satisfies the constraint; rerun with a larger ``n``.
    """
    if not isinstance(n, int) or n < 2:
        raise ValidationError("n must be an integer >= 2")
    if data is None:
        if k is None and cs is None:
            raise ValidationError("need k or a constraint when data is omitted")
        k = k if k is not None else cs.k
        stats = None
    else:
        stats = OneWayStats.from_dataset(data)
        if k is not None and k != stats.k:
            raise ValidationError("k disagrees with the data")
        k = stats.k
    if cs is not None and cs.k != k:
        raise ValidationError(f"constraint is over {cs.k} effects, data has {k}")

    rng = substream(seed, *stream)
    beta = rng.normal(prior.beta_mean, sqrt(prior.beta_var), size=(n, k))
    if fix_sigma2 is not None:
        if not np.isfinite(fix_sigma2) or fix_sigma2 <= 0:
            raise ValidationError("fix_sigma2 must be positive")
        sigma2 = np.full(n, float(fix_sigma2))
    else:
        sigma2 = prior.nu0 * prior.s0sq / rng.chisquare(prior.nu0, size=n)

    if cs is not None:
        keep = indicator_matrix(cs, beta)
        proportion = float(exact_prior_proportion(cs))
    else:
        keep = np.ones(n, dtype=bool)
        proportion = 1.0
    accepted = int(keep.sum())
    if accepted == 0:
        raise DegenerateEstimateError(
            "no prior draw satisfied the constraint; increase n"
        )

    if stats is None:
        ll = np.zeros(accepted)
    else:
        ll = stats.log_likelihood_grid(beta[keep], sigma2[keep])
    shift = float(ll.max())
    w = np.exp(ll - shift)
    mean_w = float(w.sum()) / n
    sq_w = float((w**2).sum()) / n
    var_w = max(sq_w - mean_w**2, 0.0) * n / (n - 1)
    se_log = sqrt(var_w / n) / mean_w
    log_marginal = shift + log(mean_w) - log(proportion)
    return ModelEvidence(
        log_marginal=float(log_marginal),
        mc_se_log=float(se_log),
        n_draws=n,
        method="direct-prior-MC",
        meta={"accepted": accepted, "prior_proportion": proportion},
    )


def bf_from_draws(draws: PosteriorDraws, cs: ConstraintSet) -> EncompassingBF:
    """Encompassing Bayes factor from existing unconstrained draws.

    The posterior fraction satisfying the constraint is divided by its
    exact prior proportion. The standard error treats the indicator chain
    as binomial with its effective sample size.
    """
    ok = indicator_matrix(cs, draws.beta)
    m = ok.size
    frac = float(ok.mean())
    proportion = float(exact_prior_proportion(cs))
    ess = effective_sample_size(ok.astype(float))
    if frac == 0.0:
        return EncompassingBF(
            bf=0.0,
            se=0.0,
            posterior_fraction=0.0,
            prior_proportion=proportion,
            ess=ess,
            n_draws=m,
            at_lower_bound=True,
            meta={"bf_upper_hint": 3.0 / (m * proportion)},
        )
    se_frac = sqrt(frac * (1.0 - frac) / ess)
    return EncompassingBF(
        bf=frac / proportion,
        se=se_frac / proportion,
        posterior_fraction=frac,
        prior_proportion=proportion,
        ess=ess,
        n_draws=m,
    )


def encompassing_bf(
    data: Dataset | None,
    prior: PriorSpec,
    cs: ConstraintSet,
    config: ChainConfig,
    *,
    prior_only: bool = False,
) -> EncompassingBF:
    """Bayes factor of the constrained model against the encompassing one,
    from one unconstrained Gibbs chain.

    With ``prior_only`` the chain targets the prior, so the Bayes factor
    estimates 1; this is a self-check mode.
    """
    draws = gibbs_oneway(
        data, prior, config, prior_only=prior_only, k=cs.k if prior_only else None
    )
    if draws.k != cs.k:
        raise ValidationError(f"constraint is over {cs.k} effects, data has {draws.k}")
    return bf_from_draws(draws, cs)


def posterior_model_probs(
    evidences,
    prior_probs=None,
    labels: tuple[str, ...] | None = None,
) -> ModelComparison:
    """Combine model evidences into posterior probabilities.

    Evidences must be on a shared scale: all absolute log marginals, or
    all relative to the same encompassing model. ``-inf`` log marginals
    (a constrained model with no surviving draws) get probability 0.
    """
    evidences = tuple(evidences)
    m = len(evidences)
    if m < 1:
        raise ValidationError("need at least one model")
    if prior_probs is None:
        prior_probs = np.full(m, 1.0 / m)
    else:
        prior_probs = np.asarray(prior_probs, dtype=float)
        if prior_probs.shape != (m,) or np.any(prior_probs < 0):
            raise ValidationError("prior_probs must be m nonnegative reals")
        total = float(prior_probs.sum())
        if total <= 0:
            raise ValidationError("prior_probs must not all be zero")
        prior_probs = prior_probs / total
    if labels is None:
        labels = tuple(f"M{i + 1}" for i in range(m))
    lm = np.array([e.log_marginal for e in evidences])
    if np.any(np.isnan(lm)) or np.all(np.isneginf(lm)):
        raise NumericError("no model has positive evidence")
    shift = float(lm[np.isfinite(lm)].max())
    weights = prior_probs * np.exp(lm - shift)
    posterior = weights / weights.sum()
    with np.errstate(invalid="ignore"):
        bf = np.exp(lm[:, None] - lm[None, :])
    np.fill_diagonal(bf, 1.0)
    return ModelComparison(
        labels=tuple(labels),
        prior_probs=prior_probs,
        posterior_probs=posterior,
        bayes_factors=bf,
        evidences=evidences,
    )


def compare_constrained_models(
    data: Dataset,
    models,
    prior: PriorSpec,
    method: str = "encompassing",
    *,
    config: ChainConfig | None = None,
    n: int = 100_000,
    seed: int = 0,
    prior_probs=None,
) -> ModelComparison:
    """Compare constrained one-way models on one dataset.

    ``models`` is a sequence of ``(label, constraint_or_None)`` pairs;
    ``None`` stands for the unconstrained model. With
    ``method="encompassing"`` a single unconstrained chain (under
    ``config``) serves every model and the evidences are log Bayes
    factors against it; with ``method="direct"`` each model gets its own
    prior Monte Carlo estimate with ``n`` draws on the stream
    ``(seed, "direct-marginal", index)``.
    """
    models = list(models)
    labels = tuple(label for label, _ in models)
    if len(labels) != len(set(labels)):
        raise ValidationError("model labels must be unique")
    evidences = []
    if method == "encompassing":
        chain_config = config or ChainConfig(seed=seed)
        draws = gibbs_oneway(data, prior, chain_config)
        for label, cs in models:
            if cs is None:
                evidences.append(
                    ModelEvidence(0.0, 0.0, len(draws), "encompassing",
                                  meta={"label": label})
                )
                continue
            est = bf_from_draws(draws, cs)
            log_bf = log(est.bf) if est.bf > 0 else -np.inf
            se_log = est.se / est.bf if est.bf > 0 else np.inf
            evidences.append(
                ModelEvidence(
                    log_bf,
                    se_log,
                    est.n_draws,
                    "encompassing",
                    meta={
                        "label": label,
                        "posterior_fraction": est.posterior_fraction,
                        "prior_proportion": est.prior_proportion,
                        "at_lower_bound": est.at_lower_bound,
                    },
                )
            )
    elif method == "direct":
        for i, (label, cs) in enumerate(models):
            est = direct_marginal(
                data, prior, cs, n=n, seed=seed, stream=("direct-marginal", i)
            )
            est.meta["label"] = label
            evidences.append(est)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return posterior_model_probs(evidences, prior_probs, labels)


# ---------------------------------------------------------------------------
# Variance-structure models on a whole design.


@dataclass(frozen=True)
class VarCompPriors:
    """Half-normal scales for every batch sd and the residual sd, plus the
    variance of the normal prior on the grand mean."""

    sd_scales: dict[str, float]
    residual_scale: float
    mean_prior_var: float = 1000.0

    def __post_init__(self):
        for name, scale in self.sd_scales.items():
            if not np.isfinite(scale) or scale <= 0:
                raise ValidationError(f"scale for {name!r} must be positive")
        if not np.isfinite(self.residual_scale) or self.residual_scale <= 0:
            raise ValidationError("residual_scale must be positive")
        if not np.isfinite(self.mean_prior_var) or self.mean_prior_var <= 0:
            raise ValidationError("mean_prior_var must be positive")

    def replacing(self, name: str, scale: float) -> "VarCompPriors":
        scales = dict(self.sd_scales)
        scales[name] = scale
        return VarCompPriors(
            sd_scales=scales,
            residual_scale=self.residual_scale,
            mean_prior_var=self.mean_prior_var,
        )


@dataclass(frozen=True)
class VarianceModelSpec:
    """A variance-structure hypothesis: which batch sds are pinned to
    zero, an optional ordering chain over the remaining batch sds, and the
    priors for everything left free."""

    name: str
    priors: VarCompPriors
    zero: frozenset = frozenset()
    sd_order: tuple[frozenset, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "zero", frozenset(self.zero))
        if self.sd_order is not None:
            chain = tuple(frozenset(g) for g in self.sd_order)
            if len(chain) < 2:
                raise ValidationError("an sd ordering needs at least 2 groups")
            seen = set()
            for group in chain:
                if not group:
                    raise ValidationError("sd ordering groups must be nonempty")
                if seen & group:
                    raise ValidationError("a batch appears twice in the sd ordering")
                seen |= group
            if seen & self.zero:
                raise ValidationError("ordered batches cannot also be pinned to zero")
            object.__setattr__(self, "sd_order", chain)


def _design_batches(design) -> tuple[str, ...]:
    if isinstance(design, LatinSquareDesign):
        return ("row", "col", "treatment")
    if isinstance(design, NestedDesign):
        return ("treatment", "machine")
    raise ValidationError(f"unsupported design type {type(design).__name__}")


def _check_design_data(design, data: Dataset) -> None:
    if isinstance(design, LatinSquareDesign):
        if data.schema != "latin":
            raise ValidationError("design and data schema disagree")
        for name in ("row", "col", "treatment"):
            if data.levels[name] != design.order:
                raise ValidationError(f"{name} levels disagree with the design")
    else:
        if data.schema != "nested":
            raise ValidationError("design and data schema disagree")
        if data.levels["machine"] != design.n_machines:
            raise ValidationError("machine count disagrees with the design")
        if data.levels["treatment"] != design.n_groups:
            raise ValidationError("group count disagrees with the design")


def _indicator_columns(data: Dataset, names) -> tuple[np.ndarray, list[slice]]:
    """Stack per-batch indicator matrices and the all-ones mean column."""
    blocks = []
    spans = []
    start = 0
    for name in names:
        levels = data.levels[name]
        z = np.zeros((data.n, levels))
        z[np.arange(data.n), data.factors[name]] = 1.0
        blocks.append(z)
        spans.append(slice(start, start + levels))
        start += levels
    blocks.append(np.ones((data.n, 1)))
    return np.hstack(blocks), spans


def integrated_likelihood_varcomps(
    data: Dataset,
    design,
    varcomps: dict[str, float],
    residual_var: float,
    mean_prior_var: float,
) -> float:
    """Exact log density of the observations with all effects integrated
    out: a zero-mean normal whose covariance is the residual variance on
    the diagonal plus one rank-``levels`` block per batch plus the grand
    mean block.

    ``varcomps`` maps every batch of the design to its effect variance
    (zero pins the batch).

    Raises
    ------
    NumericError
        If the covariance is not positive definite even after adding a
        1e-10 diagonal jitter.
    """
    names = _design_batches(design)
    _check_design_data(design, data)
    if set(varcomps) != set(names):
        raise ValidationError(f"varcomps must have exactly the keys {set(names)}")
    if not np.isfinite(residual_var) or residual_var <= 0:
        raise ValidationError("residual_var must be positive")
    for name, v in varcomps.items():
        if not np.isfinite(v) or v < 0:
            raise ValidationError(f"variance for {name!r} must be >= 0")
    n = data.n
    cov = residual_var * np.eye(n) + mean_prior_var * np.ones((n, n))
    for name in names:
        lab = data.factors[name]
        cov += varcomps[name] * (lab[:, None] == lab[None, :])
    y = data.y
    try:
        cf = cho_factor(cov, lower=True)
    except np.linalg.LinAlgError:
        try:
            cf = cho_factor(cov + 1e-10 * np.eye(n), lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                "covariance not positive definite after jitter"
            ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    alpha = cho_solve(cf, y)
    return float(-0.5 * (n * log(2.0 * pi) + logdet + float(y @ alpha)))


def varcomp_loglik_gradient(
    data: Dataset,
    design,
    varcomps: dict[str, float],
    residual_var: float,
    mean_prior_var: float,
) -> dict[str, float]:
    """Analytic gradient of :func:`integrated_likelihood_varcomps` with
    respect to each batch variance, plus entries ``"residual"`` and
    ``"mean"`` for the residual variance and the grand-mean prior
    variance. For covariance ``S = sum_j theta_j B_j`` the derivative in
    ``theta_j`` is ``(a' B_j a - tr(S^-1 B_j)) / 2`` with ``a = S^-1 y``.
    """
    names = _design_batches(design)
    _check_design_data(design, data)
    n = data.n
    cov = residual_var * np.eye(n) + mean_prior_var * np.ones((n, n))
    for name in names:
        lab = data.factors[name]
        cov += varcomps[name] * (lab[:, None] == lab[None, :])
    cf = cho_factor(cov, lower=True)
    alpha = cho_solve(cf, data.y)
    grads: dict[str, float] = {}
    for name in names:
        levels = data.levels[name]
        z = np.zeros((n, levels))
        z[np.arange(n), data.factors[name]] = 1.0
        za = z.T @ alpha
        trace = float(np.sum(cho_solve(cf, z) * z))
        grads[name] = 0.5 * (float(za @ za) - trace)
    trace_inv = float(np.trace(cho_solve(cf, np.eye(n))))
    grads["residual"] = 0.5 * (float(alpha @ alpha) - trace_inv)
    ones = np.ones(n)
    s1 = float(ones @ cho_solve(cf, ones))
    grads["mean"] = 0.5 * (float(alpha.sum()) ** 2 - s1)
    return grads


def _lowrank_loglik(
    y: np.ndarray,
    u: np.ndarray,
    col_var: np.ndarray,
    resid_var: np.ndarray,
) -> np.ndarray:
    """Marginal log likelihood for many variance draws at once.

    ``u`` is the (n, r) stacked indicator matrix (mean column included),
    ``col_var`` gives each draw's variance per column, ``resid_var`` each
    draw's residual variance. Uses the matrix inversion lemma on
    ``S = resid * (I + W W')`` with ``W = u sqrt(D) / sqrt(resid)``.
    """
    n, r = u.shape
    g = u.T @ u
    h = u.T @ y
    yty = float(y @ y)
    out = np.empty(col_var.shape[0])
    chunk = 16384
    for lo in range(0, col_var.shape[0], chunk):
        cv = col_var[lo : lo + chunk]
        rv = resid_var[lo : lo + chunk]
        sd = np.sqrt(cv)
        cmat = np.eye(r) + (sd[:, :, None] * sd[:, None, :]) * g[None, :, :] / rv[
            :, None, None
        ]
        chol = np.linalg.cholesky(cmat)
        logdet_c = 2.0 * np.sum(
            np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1
        )
        b = sd * h[None, :]
        w = np.linalg.solve(cmat, b[:, :, None])[:, :, 0]
        quad = yty / rv - np.sum(b * w, axis=1) / rv**2
        out[lo : lo + chunk] = -0.5 * (
            n * np.log(2.0 * pi * rv) + logdet_c + quad
        )
    return out


def variance_model_evidence(
    data: Dataset,
    design,
    model: VarianceModelSpec,
    n: int = 100_000,
    seed: int = 0,
) -> ModelEvidence:
    """Monte Carlo evidence for a variance-structure model.

    Batch sds and the residual sd are drawn from their half-normal priors
    on the stream ``(seed, "evidence", model.name)`` (free batches in
    design order, then the residual). Draws violating the model's sd
    ordering are discarded and the average likelihood is divided by the
    ordering's prior probability: exact when the ordered batches share one
    prior scale, otherwise estimated from fresh draws on the stream
    ``(seed, "evidence-prop", model.name)``.
    """
    if not isinstance(n, int) or n < 2:
        raise ValidationError("n must be an integer >= 2")
    names = _design_batches(design)
    _check_design_data(design, data)
    unknown = model.zero - set(names)
    if unknown:
        raise ValidationError(f"unknown zero components: {sorted(unknown)}")
    free = [name for name in names if name not in model.zero]
    missing = set(free) - set(model.priors.sd_scales)
    if missing:
        raise ValidationError(f"missing prior scales for: {sorted(missing)}")

    rng = substream(seed, "evidence", model.name)
    sds = {
        name: np.abs(rng.normal(0.0, model.priors.sd_scales[name], size=n))
        for name in free
    }
    resid_sd = np.abs(rng.normal(0.0, model.priors.residual_scale, size=n))

    proportion = 1.0
    prop_se = 0.0
    keep = np.ones(n, dtype=bool)
    if model.sd_order is not None:
        order_names = sorted(set().union(*model.sd_order))
        unknown = set(order_names) - set(free)
        if unknown:
            raise ValidationError(
                f"ordered batches are not free in this model: {sorted(unknown)}"
            )
        for left, right in zip(model.sd_order[:-1], model.sd_order[1:]):
            left_max = np.max([sds[b] for b in sorted(left)], axis=0)
            right_min = np.min([sds[b] for b in sorted(right)], axis=0)
            keep &= left_max < right_min
        scales = {model.priors.sd_scales[b] for b in order_names}
        if len(scales) == 1:
            num = 1.0
            for group in model.sd_order:
                for i in range(2, len(group) + 1):
                    num *= i
            denom = 1.0
            for i in range(2, len(order_names) + 1):
                denom *= i
            proportion = num / denom
        else:
            prng = substream(seed, "evidence-prop", model.name)
            hits = 0
            for b_lo in range(0, n, 1_000_000):
                m = min(1_000_000, n - b_lo)
                draws = {
                    b: np.abs(prng.normal(0.0, model.priors.sd_scales[b], size=m))
                    for b in order_names
                }
                ok = np.ones(m, dtype=bool)
                for left, right in zip(model.sd_order[:-1], model.sd_order[1:]):
                    lmax = np.max([draws[b] for b in sorted(left)], axis=0)
                    rmin = np.min([draws[b] for b in sorted(right)], axis=0)
                    ok &= lmax < rmin
                hits += int(ok.sum())
            if hits == 0:
                raise DegenerateEstimateError(
                    "no prior draw satisfied the sd ordering; increase n"
                )
            proportion = hits / n
            prop_se = sqrt(proportion * (1.0 - proportion) / n)

    accepted = int(keep.sum())
    if accepted == 0:
        raise DegenerateEstimateError(
            "no prior draw satisfied the sd ordering; increase n"
        )
    u, spans = _indicator_columns(data, names)
    col_var = np.zeros((accepted, u.shape[1]))
    for i, name in enumerate(names):
        if name in model.zero:
            continue
        col_var[:, spans[i]] = (sds[name][keep] ** 2)[:, None]
    col_var[:, -1] = model.priors.mean_prior_var
    ll = _lowrank_loglik(data.y, u, col_var, resid_sd[keep] ** 2)

    shift = float(ll.max())
    w = np.exp(ll - shift)
    mean_w = float(w.sum()) / n
    sq_w = float((w**2).sum()) / n
    var_w = max(sq_w - mean_w**2, 0.0) * n / (n - 1)
    se_num = sqrt(var_w / n) / mean_w
    se_log = sqrt(se_num**2 + (prop_se / proportion) ** 2)
    return ModelEvidence(
        log_marginal=float(shift + log(mean_w) - log(proportion)),
        mc_se_log=float(se_log),
        n_draws=n,
        method="direct-prior-MC",
        meta={
            "model": model.name,
            "accepted": accepted,
            "prior_proportion": proportion,
        },
    )


@dataclass(frozen=True)
class LindleyRow:
    """One prior scale in a sensitivity sweep and the resulting log Bayes
    factor of the zero-variance model against the free one."""

    scale: float
    log_bf: float
    se: float
    log_evidence_zero: float
    log_evidence_free: float


@dataclass(frozen=True)
class LindleyResult:
    """Prior-sensitivity sweep for one batch."""

    batch: str
    rows: tuple[LindleyRow, ...]
    meta: dict = field(default_factory=dict)


def lindley_sensitivity(
    data: Dataset,
    design,
    batch: str,
    prior_scales,
    n: int = 100_000,
    seed: int = 0,
    *,
    base_priors: VarCompPriors,
) -> LindleyResult:
    """How the zero-vs-free Bayes factor for one batch depends on the
    width of the free model's prior.

    The zero model pins ``batch`` to variance zero; each free model gives
    its sd a half-normal prior with one of ``prior_scales``. Everything
    else follows ``base_priors`` in both models, so the prior scale of the
    tested batch is the only moving part. Spreading that prior dilutes the
    free model's average likelihood, so the Bayes factor drifts toward the
    zero model as the scale grows, whatever the data say; reporting the
    whole sweep makes that sensitivity visible.
    """
    names = _design_batches(design)
    if batch not in names:
        raise ValidationError(f"unknown batch {batch!r}; design has {names}")
    scales = [float(s) for s in prior_scales]
    if not scales:
        raise ValidationError("need at least one prior scale")
    for s in scales:
        if not np.isfinite(s) or s <= 0:
            raise ValidationError("prior scales must be positive")

    zero_model = VarianceModelSpec(
        name="lindley-zero", priors=base_priors, zero=frozenset({batch})
    )
    zero_ev = variance_model_evidence(data, design, zero_model, n=n, seed=seed)
    rows = []
    for i, s in enumerate(scales):
        free_model = VarianceModelSpec(
            name=f"lindley-free-{i}",
            priors=base_priors.replacing(batch, s),
        )
        free_ev = variance_model_evidence(data, design, free_model, n=n, seed=seed)
        log_bf = zero_ev.log_marginal - free_ev.log_marginal
        se = sqrt(zero_ev.mc_se_log**2 + free_ev.mc_se_log**2)
        rows.append(
            LindleyRow(
                scale=s,
                log_bf=float(log_bf),
                se=float(se),
                log_evidence_zero=zero_ev.log_marginal,
                log_evidence_free=free_ev.log_marginal,
            )
        )
    return LindleyResult(
        batch=batch,
        rows=tuple(rows),
        meta={"n_draws": n, "seed": seed},
    )
