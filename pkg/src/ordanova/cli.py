"""Command line interface.

Subcommands: ``simulate``, ``compare``, ``fit``, ``lindley``,
``classical``, and ``rerun``. Every run writes its outputs plus a
``manifest.json`` holding the fully resolved configuration; ``rerun``
replays a manifest (the input data files are assumed unchanged) and
reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
degeneracy, 4 file error.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from math import isfinite
from pathlib import Path

import numpy as np

from . import __version__
from .classical import lr_test_equal_treatments, oneway_f_test
from .constraints import parse_constraints
from .designs import (
    SimulationTruth,
    design_from_dataset,
    load_csv,
    make_latin_square,
    make_nested_design,
    simulate_latin,
    simulate_nested,
    write_csv,
)
from .errors import (
    CsvError,
    DegenerateEstimateError,
    NonConvergenceError,
    NumericError,
    OrdanovaError,
    ValidationError,
)
from .evidence import (
    VarCompPriors,
    compare_constrained_models,
    lindley_sensitivity,
)
from .hierarchical import (
    SdPrior,
    anova_display,
    gibbs_latin,
    gibbs_three_level,
    gibbs_two_level_dummies,
)
from .samplers import ChainConfig, PriorSpec

__all__ = ["RunConfig", "main", "entry_point"]

_ARTIFACT = "ordanova"


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: the subcommand plus every argument it needs,
    as written into the manifest."""

    subcommand: str
    args: dict

    def manifest_dict(self) -> dict:
        return {
            "artifact": _ARTIFACT,
            "version": __version__,
            "subcommand": self.subcommand,
            "args": self.args,
        }

    @classmethod
    def from_manifest(cls, path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except OSError as exc:
            raise CsvError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(payload, dict) or payload.get("artifact") != _ARTIFACT:
            raise ValidationError(f"{path} is not a manifest of this tool")
        sub = payload.get("subcommand")
        args = payload.get("args")
        if sub not in _COMMANDS or not isinstance(args, dict):
            raise ValidationError(f"manifest names unknown subcommand {sub!r}")
        return cls(subcommand=sub, args=args)


def _clean(obj):
    """Make a payload strict-JSON safe: non-finite floats become null."""
    if isinstance(obj, dict):
        return {key: _clean(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(val) for val in obj]
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if isfinite(val) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    )


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Path, run: RunConfig) -> None:
    _write_json(out / "manifest.json", run.manifest_dict())


def _require_params(params: dict, required: set, optional: set) -> None:
    if not isinstance(params, dict):
        raise ValidationError("params must be a JSON object")
    missing = required - set(params)
    if missing:
        raise ValidationError(f"params missing fields: {sorted(missing)}")
    unknown = set(params) - required - optional
    if unknown:
        raise ValidationError(f"params has unknown fields: {sorted(unknown)}")


def cmd_simulate(cfg: dict) -> None:
    params = cfg["params"]
    seed = cfg["seed"]
    if cfg["design"] == "latin":
        _require_params(
            params,
            {"order", "grand_mean", "effect_sds", "residual_sd"},
            {"fixed_effects"},
        )
    else:
        _require_params(
            params,
            {
                "n_machines",
                "n_groups",
                "n_measures",
                "grand_mean",
                "effect_sds",
                "residual_sd",
            },
            {"fixed_effects"},
        )
    if not isinstance(params["effect_sds"], dict):
        raise ValidationError("effect_sds must map batch names to sds")
    fixed = params.get("fixed_effects")
    truth = SimulationTruth(
        grand_mean=float(params["grand_mean"]),
        effect_sds={k: float(v) for k, v in params["effect_sds"].items()},
        residual_sd=float(params["residual_sd"]),
        fixed_effects=None if fixed is None else np.asarray(fixed, dtype=float),
    )
    if cfg["design"] == "latin":
        design = make_latin_square(int(params["order"]), seed)
        data = simulate_latin(design, truth, seed)
    else:
        design = make_nested_design(
            int(params["n_machines"]),
            int(params["n_groups"]),
            int(params["n_measures"]),
        )
        data = simulate_nested(design, truth, seed)
    out = _out_dir(cfg)
    write_csv(data, out / "data.csv")
    _finish(out, RunConfig("simulate", cfg))


def cmd_compare(cfg: dict) -> None:
    data = load_csv(cfg["data"])
    k = data.levels["treatment"]
    entries = cfg["models"]
    if not isinstance(entries, list) or not entries:
        raise ValidationError("models must be a nonempty JSON array")
    models = []
    prior_probs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "label" not in entry:
            raise ValidationError(f"models[{i}] needs a label")
        text = entry.get("constraint")
        cs = None if text is None else parse_constraints(text, k)
        models.append((str(entry["label"]), cs))
        prior_probs.append(entry.get("prior_prob"))
    if any(p is None for p in prior_probs):
        if any(p is not None for p in prior_probs):
            raise ValidationError(
                "give prior_prob for every model or for none"
            )
        prior_probs = None
    prior = PriorSpec(
        beta_mean=cfg["beta_mean"],
        beta_var=cfg["beta_var"],
        nu0=cfg["nu0"],
        s0sq=cfg["s0sq"],
    )
    comparison = compare_constrained_models(
        data,
        models,
        prior,
        cfg["method"],
        config=ChainConfig(
            iterations=cfg["iterations"],
            burn_in=cfg["burn_in"],
            thin=cfg["thin"],
            seed=cfg["seed"],
        ),
        n=cfg["draws"],
        seed=cfg["seed"],
        prior_probs=prior_probs,
    )
    out = _out_dir(cfg)
    payload = {
        "method": cfg["method"],
        "labels": list(comparison.labels),
        "prior_probs": comparison.prior_probs.tolist(),
        "posterior_probs": comparison.posterior_probs.tolist(),
        "log_marginals": [e.log_marginal for e in comparison.evidences],
        "mc_se_log": [e.mc_se_log for e in comparison.evidences],
        "bayes_factors": comparison.bayes_factors.tolist(),
        "at_lower_bound": [
            bool(e.meta.get("at_lower_bound", False))
            for e in comparison.evidences
        ],
    }
    _write_json(out / "comparison.json", payload)
    lines = [
        f"{'model':<12}{'prior':>10}{'posterior':>12}{'log marginal':>16}"
        f"{'mc se':>10}"
    ]
    for i, label in enumerate(comparison.labels):
        lm = comparison.evidences[i].log_marginal
        lm_txt = f"{lm:.6g}" if isfinite(lm) else "-inf"
        se = comparison.evidences[i].mc_se_log
        se_txt = f"{se:.3g}" if isfinite(se) else "n/a"
        lines.append(
            f"{label:<12}{comparison.prior_probs[i]:>10.4f}"
            f"{comparison.posterior_probs[i]:>12.6f}{lm_txt:>16}{se_txt:>10}"
        )
    (out / "comparison.txt").write_text("\n".join(lines) + "\n")
    _finish(out, RunConfig("compare", cfg))


def _parse_sd_prior(text: str) -> SdPrior:
    kind, sep, value = text.partition(":")
    if not sep:
        raise ValidationError(
            "sd prior must look like 'half-normal:SCALE' or 'uniform:UPPER'"
        )
    try:
        scale = float(value)
    except ValueError:
        raise ValidationError(f"bad sd prior scale {value!r}") from None
    return SdPrior(kind=kind, scale=scale)


def cmd_fit(cfg: dict) -> None:
    data = load_csv(cfg["data"])
    config = ChainConfig(
        iterations=cfg["iterations"],
        burn_in=cfg["burn_in"],
        thin=cfg["thin"],
        seed=cfg["seed"],
    )
    sd_prior = (
        None if cfg["sd_prior"] is None else _parse_sd_prior(cfg["sd_prior"])
    )
    residual_prior = (
        None
        if cfg["residual_prior"] is None
        else _parse_sd_prior(cfg["residual_prior"])
    )
    mu_var = cfg["mu_prior_var"]
    model = cfg["model"]
    if model == "latin":
        batch_priors = (
            None
            if sd_prior is None
            else {name: sd_prior for name in ("row", "col", "treatment")}
        )
        draws = gibbs_latin(
            data,
            config,
            batch_priors=batch_priors,
            residual_prior=residual_prior,
            mu_prior_var=mu_var,
        )
    elif model == "two-level":
        draws = gibbs_two_level_dummies(
            data,
            config,
            machine_prior=sd_prior,
            residual_prior=residual_prior,
            mu_prior_var=mu_var,
        )
    elif model == "three-level":
        draws = gibbs_three_level(
            data,
            config,
            treatment_prior=sd_prior,
            machine_prior=sd_prior,
            residual_prior=residual_prior,
            mu_prior_var=mu_var,
        )
    else:
        raise ValidationError(f"unknown model {model!r}")
    out = _out_dir(cfg)
    draws.to_csv(out / "draws.csv")
    summary, table = anova_display(draws)
    _write_json(out / "summary.json", summary.to_json_dict())
    (out / "summary.txt").write_text(table)
    _finish(out, RunConfig("fit", cfg))


def cmd_lindley(cfg: dict) -> None:
    data = load_csv(cfg["data"])
    design = design_from_dataset(data)
    base = VarCompPriors(
        sd_scales={
            name: cfg["base_scale"]
            for name in (
                ("row", "col", "treatment")
                if data.schema == "latin"
                else ("treatment", "machine")
            )
        },
        residual_scale=cfg["residual_scale"],
        mean_prior_var=cfg["mean_prior_var"],
    )
    result = lindley_sensitivity(
        data,
        design,
        cfg["batch"],
        cfg["scales"],
        n=cfg["draws"],
        seed=cfg["seed"],
        base_priors=base,
    )
    out = _out_dir(cfg)
    payload = {
        "batch": result.batch,
        "scales": [row.scale for row in result.rows],
        "log_bf_zero_vs_free": [row.log_bf for row in result.rows],
        "mc_se": [row.se for row in result.rows],
        "log_evidence_zero": result.rows[0].log_evidence_zero,
        "log_evidence_free": [row.log_evidence_free for row in result.rows],
    }
    _write_json(out / "lindley.json", payload)
    lines = [f"{'scale':>10}{'log BF(zero vs free)':>24}{'mc se':>10}"]
    for row in result.rows:
        lines.append(f"{row.scale:>10.6g}{row.log_bf:>24.6g}{row.se:>10.3g}")
    (out / "lindley.txt").write_text("\n".join(lines) + "\n")
    _finish(out, RunConfig("lindley", cfg))


def cmd_classical(cfg: dict) -> None:
    data = load_csv(cfg["data"])
    out = _out_dir(cfg)
    if cfg["test"] == "f":
        res = oneway_f_test(data)
        payload = {
            "test": "f",
            "f_stat": res.f_stat,
            "df1": res.df1,
            "df2": res.df2,
            "p_value": res.p_value,
            "ss_between": res.ss_between,
            "ss_within": res.ss_within,
            "ms_between": res.ms_between,
            "ms_within": res.ms_within,
            "degenerate": res.degenerate,
        }
        text = (
            f"F({res.df1}, {res.df2}) = "
            f"{res.f_stat:.6g}, p = {res.p_value:.6g}"
            + (" (degenerate)" if res.degenerate else "")
            + "\n"
        )
    else:
        res = lr_test_equal_treatments(data, tol=cfg["tol"])
        payload = {
            "test": "lr",
            "lr_stat": res.lr_stat,
            "df": res.df,
            "p_value": res.p_value,
            "loglik_full": res.loglik_full,
            "loglik_null": res.loglik_null,
            "n_iter_full": res.n_iter_full,
            "n_iter_null": res.n_iter_null,
            "tau2_full": res.meta["tau2_full"],
            "sigma2_full": res.meta["sigma2_full"],
            "at_boundary_full": res.meta["boundary_full"],
            "at_boundary_null": res.meta["boundary_null"],
        }
        text = (
            f"LR = {res.lr_stat:.6g} on {res.df} df, p = {res.p_value:.6g}\n"
        )
    _write_json(out / "classical.json", payload)
    (out / "classical.txt").write_text(text)
    _finish(out, RunConfig("classical", cfg))


_COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "fit": cmd_fit,
    "lindley": cmd_lindley,
    "classical": cmd_classical,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordanova",
        description=(
            "Bayesian evaluation of order-constrained treatment effects "
            "and hierarchical variance components"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a design")
    p.add_argument("--design", choices=("latin", "nested"), required=True)
    p.add_argument(
        "--params",
        required=True,
        help="JSON file with the design and truth parameters",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser(
        "compare", help="compare constrained treatment-effect models"
    )
    p.add_argument("--data", required=True)
    p.add_argument(
        "--models",
        required=True,
        help="JSON array of {label, constraint, prior_prob?}",
    )
    p.add_argument(
        "--method", choices=("encompassing", "direct"), default="encompassing"
    )
    p.add_argument("--iterations", type=int, default=15000)
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--draws", type=int, default=100000,
                   help="prior draws for the direct method")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta-mean", type=float, default=0.0)
    p.add_argument("--beta-var", type=float, default=1000.0)
    p.add_argument("--nu0", type=float, default=1.0)
    p.add_argument("--s0sq", type=float, default=10.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a hierarchical variance model")
    p.add_argument("--data", required=True)
    p.add_argument(
        "--model", choices=("latin", "two-level", "three-level"), required=True
    )
    p.add_argument("--iterations", type=int, default=15000)
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--sd-prior",
        default=None,
        help="prior for every varying batch sd, e.g. half-normal:2.5 "
        "or uniform:10 (default: half-normal scaled to the data)",
    )
    p.add_argument(
        "--residual-prior",
        default=None,
        help="prior for the residual sd, same syntax as --sd-prior",
    )
    p.add_argument("--mu-prior-var", type=float, default=1000.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser(
        "lindley", help="prior-sensitivity sweep for one batch sd"
    )
    p.add_argument("--data", required=True)
    p.add_argument("--batch", required=True)
    p.add_argument(
        "--scales",
        required=True,
        help="comma-separated prior scales for the tested batch",
    )
    p.add_argument("--draws", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base-scale", type=float, required=True,
                   help="half-normal scale for the other batch sds")
    p.add_argument("--residual-scale", type=float, required=True)
    p.add_argument("--mean-prior-var", type=float, default=1000.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("classical", help="classical tests")
    p.add_argument("--data", required=True)
    p.add_argument("--test", choices=("f", "lr"), required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output directory")
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    sub = args.subcommand
    if sub == "simulate":
        try:
            params = json.loads(Path(args.params).read_text())
        except OSError as exc:
            raise CsvError(f"cannot read params {args.params}: {exc}") from exc
        cfg = {
            "design": args.design,
            "params": params,
            "seed": args.seed,
            "out": str(Path(args.out).resolve()),
        }
    elif sub == "compare":
        try:
            models = json.loads(Path(args.models).read_text())
        except OSError as exc:
            raise CsvError(f"cannot read models {args.models}: {exc}") from exc
        cfg = {
            "data": str(Path(args.data).resolve()),
            "models": models,
            "method": args.method,
            "iterations": args.iterations,
            "burn_in": args.burn_in,
            "thin": args.thin,
            "draws": args.draws,
            "seed": args.seed,
            "beta_mean": args.beta_mean,
            "beta_var": args.beta_var,
            "nu0": args.nu0,
            "s0sq": args.s0sq,
            "out": str(Path(args.out).resolve()),
        }
    elif sub == "fit":
        cfg = {
            "data": str(Path(args.data).resolve()),
            "model": args.model,
            "iterations": args.iterations,
            "burn_in": args.burn_in,
            "thin": args.thin,
            "seed": args.seed,
            "sd_prior": args.sd_prior,
            "residual_prior": args.residual_prior,
            "mu_prior_var": args.mu_prior_var,
            "out": str(Path(args.out).resolve()),
        }
    elif sub == "lindley":
        try:
            scales = [float(s) for s in args.scales.split(",") if s.strip()]
        except ValueError:
            raise ValidationError(
                f"bad --scales value {args.scales!r}"
            ) from None
        if len(scales) < 2:
            raise ValidationError("need at least two scales for a sweep")
        cfg = {
            "data": str(Path(args.data).resolve()),
            "batch": args.batch,
            "scales": scales,
            "draws": args.draws,
            "seed": args.seed,
            "base_scale": args.base_scale,
            "residual_scale": args.residual_scale,
            "mean_prior_var": args.mean_prior_var,
            "out": str(Path(args.out).resolve()),
        }
    elif sub == "classical":
        cfg = {
            "data": str(Path(args.data).resolve()),
            "test": args.test,
            "tol": args.tol,
            "out": str(Path(args.out).resolve()),
        }
    else:
        run = RunConfig.from_manifest(args.manifest)
        cfg = dict(run.args)
        if args.out is not None:
            cfg["out"] = str(Path(args.out).resolve())
        return RunConfig(run.subcommand, cfg)
    return RunConfig(sub, cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        run = _resolve(args)
        _COMMANDS[run.subcommand](run.args)
    except (DegenerateEstimateError, NonConvergenceError, NumericError) as exc:
        print(f"ordanova: degenerate: {exc}", file=sys.stderr)
        return 3
    except CsvError as exc:
        print(f"ordanova: file error: {exc}", file=sys.stderr)
        return 4
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"ordanova: error: {exc}", file=sys.stderr)
        return 2
    except OrdanovaError as exc:
        print(f"ordanova: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ordanova: file error: {exc}", file=sys.stderr)
        return 4
    return 0


def entry_point() -> None:
    sys.exit(main(sys.argv[1:]))
