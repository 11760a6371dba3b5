"""Hierarchical additive models and variance component summaries.

Every model here has the form ``y = mu + sum of batch effects + noise``.
A *varying* batch has exchangeable normal effects constrained to sum to
zero, with its own standard deviation parameter under a half-normal or
uniform prior. A *fixed* batch has independent effects under a diffuse
normal prior, optionally with the first level pinned to zero so the rest
are contrasts against it.

Sum-to-zero batches are updated exactly: each level is drawn from its
unconstrained normal full conditional and the vector is then conditioned
on the zero-sum constraint (subtracting the conditional-variance-weighted
mean, which reduces to plain centering when the batch is balanced). The
batch sd conditional correspondingly lives in one fewer dimension than the
batch has levels.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .designs import Dataset, validate_latin_dataset
from .errors import NumericError, SchemaError, ValidationError
from .rngtools import substream
from .samplers import ChainConfig, backend

__all__ = [
    "SdPrior",
    "BatchSpec",
    "HierDraws",
    "VarCompRow",
    "VarCompSummary",
    "default_sd_prior",
    "finite_pop_sd",
    "gibbs_latin",
    "gibbs_two_level_dummies",
    "gibbs_three_level",
    "anova_display",
]

# Uniforms available per sd update and per sweep; exhausting the row is an
# error rather than a silent extra draw, which keeps backends identical.
_UCAP = 64


@dataclass(frozen=True)
class SdPrior:
    """Prior for a standard deviation: ``half-normal`` with a scale, or
    ``uniform`` on (0, upper)."""

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in ("half-normal", "uniform"):
            raise ValidationError(f"unknown sd prior kind {self.kind!r}")
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValidationError("sd prior scale must be positive")

    @classmethod
    def half_normal(cls, scale: float) -> "SdPrior":
        return cls("half-normal", float(scale))

    @classmethod
    def uniform(cls, upper: float) -> "SdPrior":
        return cls("uniform", float(upper))


@dataclass(frozen=True)
class BatchSpec:
    """A named effect batch: its level count and its sd prior."""

    name: str
    levels: int
    sd_prior: SdPrior

    def __post_init__(self):
        if self.levels < 2:
            raise ValidationError("a batch needs at least 2 levels")


@dataclass
class HierDraws:
    """Stored draws of a hierarchical additive model.

    ``effects[name]`` has one column per level; varying batches sum to
    zero in every draw, and a pinned fixed batch has its first column
    identically zero. ``sds`` holds the batch sd draws for varying batches
    only.
    """

    mu: np.ndarray
    effects: dict[str, np.ndarray]
    sds: dict[str, np.ndarray]
    residual_sd: np.ndarray
    kinds: dict[str, str]
    order: tuple[str, ...]
    burn_in: int
    thin: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.mu.size

    def to_csv(self, path) -> None:
        """Write draws as CSV: ``mu``, each batch's levels in order, each
        varying batch's sd, then the residual sd."""
        header = ["mu"]
        columns = [self.mu]
        for name in self.order:
            eff = self.effects[name]
            for lvl in range(eff.shape[1]):
                header.append(f"{name}_{lvl + 1}")
                columns.append(eff[:, lvl])
        for name in self.order:
            if name in self.sds:
                header.append(f"sd_{name}")
                columns.append(self.sds[name])
        header.append("sigma")
        columns.append(self.residual_sd)
        lines = [",".join(header)]
        for i in range(len(self)):
            lines.append(",".join(repr(float(col[i])) for col in columns))
        Path(path).write_text("\n".join(lines) + "\n")


def default_sd_prior(y: np.ndarray) -> SdPrior:
    """Weakly informative default: half-normal scaled to twice the sample
    sd of the response (or 1 when the response is constant)."""
    y = np.asarray(y, dtype=float)
    sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
    return SdPrior.half_normal(2.0 * sd if sd > 0 else 1.0)


def finite_pop_sd(effect_draws: np.ndarray) -> np.ndarray:
    """Finite-population sd: for each draw, the sample sd (ddof 1) of the
    realized effect vector."""
    arr = np.asarray(effect_draws, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValidationError("need an (m, levels) array with >= 2 levels")
    return np.std(arr, axis=1, ddof=1)


@dataclass(frozen=True)
class _BatchPlan:
    name: str
    labels: np.ndarray
    levels: int
    varying: bool
    pin_first: bool
    sd_prior: SdPrior | None


def _run_hier(
    data: Dataset,
    plans: list[_BatchPlan],
    residual_prior: SdPrior,
    mu_prior_var: float,
    fixed_var: float,
    config: ChainConfig,
    stream_label: str,
) -> HierDraws:
    if not np.isfinite(mu_prior_var) or mu_prior_var <= 0:
        raise ValidationError("mu_prior_var must be positive")
    n = data.n
    y = np.ascontiguousarray(data.y, dtype=float)
    nbatch = len(plans)
    offsets = np.zeros(nbatch + 1, dtype=np.intp)
    for i, plan in enumerate(plans):
        offsets[i + 1] = offsets[i] + plan.levels
    total = int(offsets[-1])
    labels = np.zeros((nbatch, n), dtype=np.intp)
    counts = np.zeros(total)
    kinds = np.zeros(nbatch, dtype=np.intp)
    pin = np.zeros(nbatch, dtype=np.intp)
    slot_of = np.full(nbatch, -1, dtype=np.intp)

    varying = [p for p in plans if p.varying]
    nslot = len(varying) + 1
    sd_kind = np.zeros(nslot, dtype=np.intp)
    sd_param = np.zeros(nslot)
    sd_dim = np.zeros(nslot)

    slot = 0
    nz = 1
    for i, plan in enumerate(plans):
        labels[i] = plan.labels
        counts[offsets[i] : offsets[i + 1]] = np.bincount(
            plan.labels, minlength=plan.levels
        )
        if plan.varying:
            kinds[i] = 0
            slot_of[i] = slot
            prior = plan.sd_prior
            sd_kind[slot] = 0 if prior.kind == "half-normal" else 1
            sd_param[slot] = prior.scale
            sd_dim[slot] = plan.levels - 1
            if prior.kind == "uniform" and plan.levels < 3:
                raise ValidationError(
                    f"batch {plan.name!r}: a uniform sd prior needs >= 3 levels"
                )
            slot += 1
            nz += plan.levels
        else:
            kinds[i] = 1
            pin[i] = 1 if plan.pin_first else 0
            nz += plan.levels - (1 if plan.pin_first else 0)
    sd_kind[-1] = 0 if residual_prior.kind == "half-normal" else 1
    sd_param[-1] = residual_prior.scale
    sd_dim[-1] = n
    if residual_prior.kind == "uniform" and n < 2:
        raise ValidationError("a uniform residual prior needs >= 2 observations")

    s_y = float(np.std(y, ddof=1)) if n > 1 else 0.0
    if s_y <= 0:
        s_y = 1e-3
    sds0 = np.empty(nslot)
    for s in range(nslot):
        start = s_y if s == nslot - 1 else 0.5 * s_y
        if sd_kind[s] == 1:
            start = min(start, 0.5 * sd_param[s])
        sds0[s] = start

    rng = substream(config.seed, stream_label)
    iters = config.iterations
    z = rng.standard_normal((iters, nz))
    unis = rng.random((iters, nslot, _UCAP))

    kept = config.n_kept
    out_mu = np.empty(kept)
    out_eff = np.empty((kept, total))
    out_sds = np.empty((kept, nslot))
    max_l = max(p.levels for p in plans)
    rc = _kernels.hier_chain(
        y,
        labels,
        offsets,
        counts,
        kinds,
        pin,
        slot_of,
        sd_kind,
        sd_param,
        sd_dim,
        float(mu_prior_var),
        float(fixed_var),
        float(np.mean(y)),
        np.zeros(total),
        sds0,
        z,
        unis,
        config.burn_in,
        config.thin,
        out_mu,
        out_eff,
        out_sds,
        np.empty(n),
        np.empty(max_l),
        np.empty(max_l),
    )
    if rc == 1:
        raise NumericError(
            "a slice update exhausted its uniform budget; the posterior "
            "for an sd parameter is badly scaled"
        )
    if rc != 0:
        raise RuntimeError(f"hierarchical kernel failed with code {rc}")

    effects = {}
    sds = {}
    kind_names = {}
    for i, plan in enumerate(plans):
        effects[plan.name] = out_eff[:, offsets[i] : offsets[i + 1]]
        kind_names[plan.name] = "varying" if plan.varying else "fixed"
        if plan.varying:
            sds[plan.name] = out_sds[:, slot_of[i]]
    return HierDraws(
        mu=out_mu,
        effects=effects,
        sds=sds,
        residual_sd=out_sds[:, -1],
        kinds=kind_names,
        order=tuple(p.name for p in plans),
        burn_in=config.burn_in,
        thin=config.thin,
        seed=config.seed,
        meta={
            "backend": backend(),
            "iterations": iters,
            "stream": stream_label,
            "n": n,
        },
    )


def _resolve_priors(
    data: Dataset, names: tuple[str, ...], given: dict | None
) -> dict[str, SdPrior]:
    given = dict(given or {})
    unknown = set(given) - set(names)
    if unknown:
        raise ValidationError(f"sd priors for unknown batches: {sorted(unknown)}")
    fallback = default_sd_prior(data.y)
    return {name: given.get(name, fallback) for name in names}


def _validate_nested(data: Dataset) -> None:
    if data.schema != "nested":
        raise SchemaError("expected a nested-schema dataset")
    machine = data.factors["machine"]
    treatment = data.factors["treatment"]
    counts = np.bincount(treatment, minlength=data.levels["treatment"])
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0]) + 1
        raise ValidationError(f"treatment group {empty} has no machines")
    for m in range(data.levels["machine"]):
        groups = np.unique(treatment[machine == m])
        if groups.size > 1:
            raise ValidationError(
                f"machine {m + 1} appears under several treatments"
            )


def gibbs_latin(
    data: Dataset,
    config: ChainConfig,
    *,
    batch_priors: dict[str, SdPrior] | None = None,
    residual_prior: SdPrior | None = None,
    mu_prior_var: float = 1000.0,
) -> HierDraws:
    """Fit the additive row + column + treatment model to a latin-schema
    dataset, all three batches varying with their own sds.

    Randomness comes from the stream ``(config.seed, "gibbs-latin")``.
    """
    if data.schema != "latin":
        raise SchemaError("expected a latin-schema dataset")
    validate_latin_dataset(data)
    names = ("row", "col", "treatment")
    priors = _resolve_priors(data, names, batch_priors)
    plans = [
        _BatchPlan(
            name=name,
            labels=data.factors[name],
            levels=data.levels[name],
            varying=True,
            pin_first=False,
            sd_prior=priors[name],
        )
        for name in names
    ]
    return _run_hier(
        data,
        plans,
        residual_prior or default_sd_prior(data.y),
        mu_prior_var,
        1000.0,
        config,
        "gibbs-latin",
    )


def gibbs_two_level_dummies(
    data: Dataset,
    config: ChainConfig,
    *,
    machine_prior: SdPrior | None = None,
    residual_prior: SdPrior | None = None,
    mu_prior_var: float = 1000.0,
    fixed_var: float = 1000.0,
) -> HierDraws:
    """Fit the two-level model with treatment dummies: fixed treatment
    contrasts against level 1 (pinned to zero), plus a varying machine
    batch.

    Randomness comes from the stream ``(config.seed, "gibbs-two-level")``.
    """
    _validate_nested(data)
    plans = [
        _BatchPlan(
            name="treatment",
            labels=data.factors["treatment"],
            levels=data.levels["treatment"],
            varying=False,
            pin_first=True,
            sd_prior=None,
        ),
        _BatchPlan(
            name="machine",
            labels=data.factors["machine"],
            levels=data.levels["machine"],
            varying=True,
            pin_first=False,
            sd_prior=machine_prior or default_sd_prior(data.y),
        ),
    ]
    return _run_hier(
        data,
        plans,
        residual_prior or default_sd_prior(data.y),
        mu_prior_var,
        fixed_var,
        config,
        "gibbs-two-level",
    )


def gibbs_three_level(
    data: Dataset,
    config: ChainConfig,
    *,
    treatment_prior: SdPrior | None = None,
    machine_prior: SdPrior | None = None,
    residual_prior: SdPrior | None = None,
    mu_prior_var: float = 1000.0,
) -> HierDraws:
    """Fit the three-level model: varying treatment effects over varying
    machine effects, so treatment effects shrink toward each other.

    Randomness comes from the stream ``(config.seed, "gibbs-three-level")``.
    """
    _validate_nested(data)
    if data.levels["treatment"] < 2:
        raise ValidationError(
            "the treatment sd needs at least 2 treatments to be identified"
        )
    plans = [
        _BatchPlan(
            name="treatment",
            labels=data.factors["treatment"],
            levels=data.levels["treatment"],
            varying=True,
            pin_first=False,
            sd_prior=treatment_prior or default_sd_prior(data.y),
        ),
        _BatchPlan(
            name="machine",
            labels=data.factors["machine"],
            levels=data.levels["machine"],
            varying=True,
            pin_first=False,
            sd_prior=machine_prior or default_sd_prior(data.y),
        ),
    ]
    return _run_hier(
        data,
        plans,
        residual_prior or default_sd_prior(data.y),
        mu_prior_var,
        1000.0,
        config,
        "gibbs-three-level",
    )


@dataclass(frozen=True)
class VarCompRow:
    """One display row: a batch sd, a fixed-batch contrast, or the
    residual sd."""

    name: str
    kind: str
    median: float
    q25: float
    q75: float
    q025: float
    q975: float


@dataclass(frozen=True)
class VarCompSummary:
    """Quantile summary of an ANOVA-style display."""

    rows: tuple[VarCompRow, ...]

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "name": row.name,
                    "kind": row.kind,
                    "median": _round4(row.median),
                    "interval50": [_round4(row.q25), _round4(row.q75)],
                    "interval95": [_round4(row.q025), _round4(row.q975)],
                }
                for row in self.rows
            ]
        }


def _round4(v: float) -> float:
    """Round to 4 significant digits (the table precision)."""
    return float(f"{v:.4g}")


def _quantile_row(name: str, kind: str, series: np.ndarray) -> VarCompRow:
    q = np.quantile(series, [0.025, 0.25, 0.5, 0.75, 0.975])
    return VarCompRow(
        name=name,
        kind=kind,
        median=float(q[2]),
        q25=float(q[1]),
        q75=float(q[3]),
        q025=float(q[0]),
        q975=float(q[4]),
    )


def anova_display(draws: HierDraws) -> tuple[VarCompSummary, str]:
    """Summarize a fit as an ANOVA-style display.

    Varying batches get a finite-population sd row; fixed batches get one
    contrast row per non-reference level; the residual sd closes the
    table. Returns the summary and a fixed-width text table whose numbers
    match the summary JSON at 4 significant digits.
    """
    rows = []
    for name in draws.order:
        if draws.kinds[name] == "varying":
            rows.append(
                _quantile_row(name, "sd", finite_pop_sd(draws.effects[name]))
            )
        else:
            eff = draws.effects[name]
            for lvl in range(1, eff.shape[1]):
                rows.append(
                    _quantile_row(f"{name}[{lvl + 1}]", "contrast", eff[:, lvl])
                )
    rows.append(_quantile_row("residual", "residual", draws.residual_sd))
    summary = VarCompSummary(rows=tuple(rows))

    name_w = max(len("component"), max(len(r.name) for r in rows)) + 2
    def fmt(v: float) -> str:
        return f"{_round4(v):g}"

    lines = [
        f"{'component':<{name_w}}{'kind':<10}{'median':>10}  "
        f"{'50% interval':>21}  {'95% interval':>21}"
    ]
    for r in rows:
        i50 = f"[{fmt(r.q25)}, {fmt(r.q75)}]"
        i95 = f"[{fmt(r.q025)}, {fmt(r.q975)}]"
        lines.append(
            f"{r.name:<{name_w}}{r.kind:<10}{fmt(r.median):>10}  "
            f"{i50:>21}  {i95:>21}"
        )
    return summary, "\n".join(lines) + "\n"
