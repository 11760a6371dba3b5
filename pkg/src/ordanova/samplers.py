"""One-way normal means model: prior, likelihood, and conjugate Gibbs.

The model has one mean per treatment group with independent normal priors,
and a common residual variance with a scaled inverse chi-square prior. Both
full conditionals are available in closed form, so the Gibbs sweep is exact
conjugate sampling.
"""

from dataclasses import dataclass, field
from math import lgamma, log, pi
from pathlib import Path

import numpy as np

from . import _kernels
from .constraints import ConstraintSet, exact_prior_proportion, indicator
from .designs import Dataset
from .errors import ValidationError
from .rngtools import substream

__all__ = [
    "PriorSpec",
    "Theta",
    "ChainConfig",
    "PosteriorDraws",
    "OneWayStats",
    "scaled_inv_chisq_sample",
    "scaled_inv_chisq_logpdf",
    "log_likelihood",
    "log_prior_density",
    "sample_prior",
    "gibbs_oneway",
]


def backend() -> str:
    """Which Gibbs kernel backend is active."""
    return "compiled" if _kernels.is_compiled() else "interpreted"


@dataclass(frozen=True)
class PriorSpec:
    """Encompassing prior: iid normal effects and a scaled inverse
    chi-square residual variance with ``nu0`` degrees of freedom and scale
    ``s0sq``."""

    beta_mean: float = 0.0
    beta_var: float = 1000.0
    nu0: float = 1.0
    s0sq: float = 10.0

    def __post_init__(self):
        if not np.isfinite(self.beta_mean):
            raise ValidationError("beta_mean must be finite")
        for name in ("beta_var", "nu0", "s0sq"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class Theta:
    """One parameter point: treatment effects and residual variance."""

    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.size == 0 or not np.all(np.isfinite(beta)):
            raise ValidationError("beta must be a finite vector")
        object.__setattr__(self, "beta", beta)
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValidationError("sigma2 must be positive")


@dataclass(frozen=True)
class ChainConfig:
    """Length, burn-in, thinning and seed of one Gibbs chain."""

    iterations: int = 15000
    burn_in: int = 5000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("iterations", "burn_in", "thin", "seed"):
            if not isinstance(getattr(self, name), int):
                raise ValidationError(f"{name} must be an integer")
        if self.burn_in < 0 or self.iterations <= self.burn_in:
            raise ValidationError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")

    @property
    def n_kept(self) -> int:
        """Number of stored draws: one per ``thin`` sweeps after burn-in."""
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin


@dataclass
class PosteriorDraws:
    """Stored draws of the one-way model, one row per kept sweep."""

    beta: np.ndarray
    sigma2: np.ndarray
    burn_in: int
    thin: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        if self.beta.ndim != 2 or self.sigma2.shape != (self.beta.shape[0],):
            raise ValidationError("beta must be (m, k) and sigma2 (m,)")

    @property
    def k(self) -> int:
        return self.beta.shape[1]

    def __len__(self) -> int:
        return self.beta.shape[0]

    def __getitem__(self, i: int) -> Theta:
        return Theta(beta=self.beta[i], sigma2=float(self.sigma2[i]))

    def to_csv(self, path) -> None:
        """Write draws as CSV (columns ``beta_1..beta_k, sigma2``), with
        full ``repr`` precision."""
        header = [f"beta_{i + 1}" for i in range(self.k)] + ["sigma2"]
        lines = [",".join(header)]
        for i in range(len(self)):
            cells = [repr(float(v)) for v in self.beta[i]]
            cells.append(repr(float(self.sigma2[i])))
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class OneWayStats:
    """Sufficient statistics of a dataset grouped by treatment."""

    n: int
    counts: np.ndarray
    sums: np.ndarray
    ss_within: float

    @classmethod
    def from_dataset(cls, data: Dataset) -> "OneWayStats":
        lab = data.factors["treatment"]
        k = data.levels["treatment"]
        counts = np.bincount(lab, minlength=k).astype(float)
        sums = np.bincount(lab, weights=data.y, minlength=k)
        means = np.divide(sums, counts, out=np.zeros(k), where=counts > 0)
        ss_within = float(np.sum((data.y - means[lab]) ** 2))
        return cls(n=data.n, counts=counts, sums=sums, ss_within=ss_within)

    @property
    def k(self) -> int:
        return self.counts.size

    def log_likelihood_grid(
        self, beta: np.ndarray, sigma2: np.ndarray
    ) -> np.ndarray:
        """Log likelihood at every row of an (m, k) effects array with
        matching (m,) residual variances."""
        means = np.divide(
            self.sums, self.counts, out=np.zeros(self.k), where=self.counts > 0
        )
        dev = np.sum(self.counts * (beta - means) ** 2, axis=1) + self.ss_within
        return -0.5 * (self.n * np.log(2.0 * pi * sigma2) + dev / sigma2)


def scaled_inv_chisq_sample(nu: float, s2: float, rng, size=None):
    """Draw from the scaled inverse chi-square: ``nu * s2 / X`` with
    ``X`` chi-square on ``nu`` degrees of freedom."""
    if nu <= 0 or s2 <= 0:
        raise ValidationError("nu and s2 must be positive")
    draw = nu * s2 / rng.chisquare(nu, size=size)
    return float(draw) if size is None else draw


def scaled_inv_chisq_logpdf(v, nu: float, s2: float):
    """Log density of the scaled inverse chi-square at variance ``v``."""
    if nu <= 0 or s2 <= 0:
        raise ValidationError("nu and s2 must be positive")
    v = np.asarray(v, dtype=float)
    half = nu / 2.0
    out = np.where(
        v > 0,
        half * np.log(half * s2)
        - lgamma(half)
        - (1.0 + half) * np.log(np.where(v > 0, v, 1.0))
        - half * s2 / np.where(v > 0, v, 1.0),
        -np.inf,
    )
    return float(out) if out.ndim == 0 else out


def log_likelihood(theta: Theta, data: Dataset) -> float:
    """Normal log likelihood of a dataset grouped by treatment."""
    if data.levels["treatment"] != theta.beta.size:
        raise ValidationError(
            f"theta has {theta.beta.size} effects but data has "
            f"{data.levels['treatment']} treatment levels"
        )
    resid = data.y - theta.beta[data.factors["treatment"]]
    return float(
        -0.5 * data.n * log(2.0 * pi * theta.sigma2)
        - 0.5 * np.sum(resid**2) / theta.sigma2
    )


def log_prior_density(
    theta: Theta, prior: PriorSpec, cs: ConstraintSet | None = None
) -> float:
    """Log density of the encompassing prior at ``theta``; with a
    constraint, the truncated and renormalized prior (``-inf`` outside
    the constrained region)."""
    if cs is not None:
        if cs.k != theta.beta.size:
            raise ValidationError("constraint and theta dimensions differ")
        if not indicator(cs, theta.beta):
            return -np.inf
    dev = theta.beta - prior.beta_mean
    log_beta = (
        -0.5 * theta.beta.size * log(2.0 * pi * prior.beta_var)
        - 0.5 * float(np.sum(dev**2)) / prior.beta_var
    )
    total = log_beta + scaled_inv_chisq_logpdf(theta.sigma2, prior.nu0, prior.s0sq)
    if cs is not None:
        total -= log(float(exact_prior_proportion(cs)))
    return float(total)


def sample_prior(prior: PriorSpec, k: int, n: int, seed: int) -> PosteriorDraws:
    """``n`` iid draws from the encompassing prior, on the stream
    ``(seed, "prior-sample")``: effects first, then residual variances."""
    if k < 1 or n < 1:
        raise ValidationError("k and n must be positive")
    rng = substream(seed, "prior-sample")
    beta = rng.normal(prior.beta_mean, np.sqrt(prior.beta_var), size=(n, k))
    sigma2 = prior.nu0 * prior.s0sq / rng.chisquare(prior.nu0, size=n)
    return PosteriorDraws(
        beta=beta,
        sigma2=sigma2,
        burn_in=0,
        thin=1,
        seed=seed,
        meta={"method": "prior-iid"},
    )


def gibbs_oneway(
    data: Dataset | None,
    prior: PriorSpec,
    config: ChainConfig,
    *,
    fix_sigma2: float | None = None,
    prior_only: bool = False,
    k: int | None = None,
) -> PosteriorDraws:
    """Run one conjugate Gibbs chain for the one-way model.

    Parameters
    ----------
    data : Dataset or None
        Observations grouped by treatment. May be None only with
        ``prior_only``.
    fix_sigma2 : float, optional
        Hold the residual variance at this value instead of sampling it.
    prior_only : bool
        Target the prior instead of the posterior (the data term is
        dropped); useful for validating the sampler.
    k : int, optional
        Number of effects; required when ``data`` is None.

    Notes
    -----
    Randomness comes from the stream ``(config.seed, "gibbs-oneway")``:
    one block of normals for all sweeps, then one block of chi-squares.
    The chain starts at the group means (prior mean for empty groups) and
    the mean squared residual.
    """
    if prior_only:
        if k is None and data is None:
            raise ValidationError("prior_only needs k when data is omitted")
        k = k if k is not None else data.levels["treatment"]
        stats = OneWayStats(
            n=0, counts=np.zeros(k), sums=np.zeros(k), ss_within=0.0
        )
        y = np.empty(0)
        group = np.empty(0, dtype=np.intp)
    else:
        if data is None:
            raise ValidationError("data is required unless prior_only")
        stats = OneWayStats.from_dataset(data)
        if k is not None and k != stats.k:
            raise ValidationError("k disagrees with the data")
        k = stats.k
        if np.any(stats.counts == 0):
            empty = int(np.flatnonzero(stats.counts == 0)[0]) + 1
            raise ValidationError(f"treatment group {empty} has no observations")
        y = np.ascontiguousarray(data.y, dtype=float)
        group = np.ascontiguousarray(data.factors["treatment"], dtype=np.intp)
    if fix_sigma2 is not None and (
        not np.isfinite(fix_sigma2) or fix_sigma2 <= 0
    ):
        raise ValidationError("fix_sigma2 must be positive")

    rng = substream(config.seed, "gibbs-oneway")
    iters = config.iterations
    z = rng.standard_normal((iters, k))
    if fix_sigma2 is None:
        chisq = rng.chisquare(prior.nu0 + stats.n, size=iters)
    else:
        chisq = np.ones(iters)

    beta0 = np.where(
        stats.counts > 0,
        np.divide(stats.sums, stats.counts, out=np.zeros(k), where=stats.counts > 0),
        prior.beta_mean,
    )
    if fix_sigma2 is not None:
        s2_start = float(fix_sigma2)
    elif stats.n > 0:
        resid = y - beta0[group]
        s2_start = max(float(np.mean(resid**2)), 1e-12)
    else:
        s2_start = prior.nu0 * prior.s0sq / (prior.nu0 + 2.0)

    kept = config.n_kept
    out_beta = np.empty((kept, k))
    out_sigma2 = np.empty(kept)
    rc = _kernels.oneway_chain(
        y,
        group,
        np.ascontiguousarray(stats.counts),
        np.ascontiguousarray(stats.sums),
        beta0.copy(),
        s2_start,
        float(prior.beta_mean),
        float(prior.beta_var),
        float(prior.nu0 * prior.s0sq),
        1 if fix_sigma2 is not None else 0,
        z,
        chisq,
        config.burn_in,
        config.thin,
        out_beta,
        out_sigma2,
    )
    if rc != 0:
        raise RuntimeError(f"gibbs kernel failed with code {rc}")
    return PosteriorDraws(
        beta=out_beta,
        sigma2=out_sigma2,
        burn_in=config.burn_in,
        thin=config.thin,
        seed=config.seed,
        meta={
            "method": "prior-gibbs" if prior_only else "gibbs-oneway",
            "backend": backend(),
            "iterations": iters,
            "k": k,
            "n": stats.n,
        },
    )
