"""Hierarchical Gibbs fits and the variance-component display."""

import re

import numpy as np
import pytest

from ordanova.designs import (
    Dataset,
    SimulationTruth,
    make_latin_square,
    make_nested_design,
    simulate_latin,
    simulate_nested,
)
from ordanova.diagnostics import mcse_mean
from ordanova.errors import SchemaError, ValidationError
from ordanova.hierarchical import (
    BatchSpec,
    HierDraws,
    SdPrior,
    anova_display,
    default_sd_prior,
    finite_pop_sd,
    gibbs_latin,
    gibbs_three_level,
    gibbs_two_level_dummies,
)
from ordanova.samplers import ChainConfig


def latin_data(sds=(1.0, 1.0, 1.0), residual_sd=1.0, grand_mean=0.0, seed=0,
               order=5, fixed=None):
    effect_sds = {"row": sds[0], "col": sds[1]}
    if fixed is None:
        effect_sds["treatment"] = sds[2]
    truth = SimulationTruth(
        grand_mean=grand_mean,
        effect_sds=effect_sds,
        residual_sd=residual_sd,
        fixed_effects=fixed,
    )
    return simulate_latin(make_latin_square(order, seed), truth, seed=seed + 1)


def nested_data(fixed, sd_machine, residual_sd, seed, n_machines=20, n_groups=4,
                n_measures=6):
    truth = SimulationTruth(
        grand_mean=0.0,
        effect_sds={"machine": sd_machine},
        residual_sd=residual_sd,
        fixed_effects=np.asarray(fixed, dtype=float),
    )
    design = make_nested_design(n_machines, n_groups, n_measures)
    return simulate_nested(design, truth, seed=seed)


class TestFinitePopSd:
    def test_constant_vector_is_zero(self):
        draws = np.tile([2.0, 2.0, 2.0], (5, 1))
        assert np.all(finite_pop_sd(draws) == 0.0)

    def test_two_point_formula(self):
        draws = np.array([[-1.0, 1.0]])
        assert abs(finite_pop_sd(draws)[0] - np.sqrt(2.0)) < 1e-15

    def test_four_point_value(self):
        draws = np.array([[0.0, 1.0, 2.0, 3.0]])
        assert abs(finite_pop_sd(draws)[0] - 1.2909944487358056) < 1e-12

    def test_single_level_rejected(self):
        with pytest.raises(ValidationError):
            finite_pop_sd(np.zeros((5, 1)))


class TestSdPrior:
    def test_kinds(self):
        assert SdPrior.half_normal(2.0).kind == "half-normal"
        assert SdPrior.uniform(5.0).kind == "uniform"
        with pytest.raises(ValidationError):
            SdPrior("lognormal", 1.0)
        with pytest.raises(ValidationError):
            SdPrior.half_normal(0.0)

    def test_default_tracks_sample_sd(self):
        y = np.array([0.0, 2.0, 4.0, 6.0])
        prior = default_sd_prior(y)
        assert prior.kind == "half-normal"
        assert abs(prior.scale - 2.0 * y.std(ddof=1)) < 1e-12
        assert default_sd_prior(np.full(4, 7.0)).scale == 1.0

    def test_batch_spec_levels(self):
        with pytest.raises(ValidationError):
            BatchSpec("row", 1, SdPrior.half_normal(1.0))


def synthetic_draws():
    m = 40
    rng = np.random.default_rng(3)
    return HierDraws(
        mu=rng.normal(size=m),
        effects={
            "row": np.tile([-np.sqrt(2.0), np.sqrt(2.0)], (m, 1)),
            "treatment": np.column_stack(
                [np.zeros(m), rng.normal(1.0, 0.1, m), rng.normal(2.0, 0.1, m)]
            ),
        },
        sds={"row": np.full(m, 2.0)},
        residual_sd=rng.uniform(0.5, 1.5, m),
        kinds={"row": "varying", "treatment": "fixed"},
        order=("row", "treatment"),
        burn_in=0,
        thin=1,
        seed=0,
    )


class TestAnovaDisplay:
    def test_constant_sd_series(self):
        summary, _ = anova_display(synthetic_draws())
        row = summary.rows[0]
        assert row.name == "row" and row.kind == "sd"
        for v in (row.median, row.q25, row.q75, row.q025, row.q975):
            assert abs(v - 2.0) < 1e-12

    def test_fixed_batch_contrast_rows(self):
        summary, _ = anova_display(synthetic_draws())
        names = [r.name for r in summary.rows]
        assert names == ["row", "treatment[2]", "treatment[3]", "residual"]
        kinds = [r.kind for r in summary.rows]
        assert kinds == ["sd", "contrast", "contrast", "residual"]

    def test_interval_nesting(self):
        summary, _ = anova_display(synthetic_draws())
        for r in summary.rows:
            assert r.q025 <= r.q25 <= r.median <= r.q75 <= r.q975

    def test_json_and_table_numbers_match(self):
        summary, table = anova_display(synthetic_draws())
        blob = summary.to_json_dict()
        lines = table.splitlines()[1:]
        assert len(lines) == len(blob["rows"])
        for line, row in zip(lines, blob["rows"]):
            numbers = [float(tok) for tok in re.findall(r"-?\d+\.?\d*(?:e-?\d+)?", line.split(None, 2)[2])]
            expected = [row["median"], *row["interval50"], *row["interval95"]]
            assert numbers == expected


class TestGibbsLatin:
    def test_deterministic(self):
        data = latin_data(seed=4)
        config = ChainConfig(iterations=800, burn_in=200, seed=9)
        a = gibbs_latin(data, config)
        b = gibbs_latin(data, config)
        assert np.array_equal(a.mu, b.mu)
        for name in a.effects:
            assert np.array_equal(a.effects[name], b.effects[name])
        c = gibbs_latin(data, ChainConfig(800, 200, 1, 10))
        assert not np.array_equal(a.mu, c.mu)

    def test_zero_sum_every_draw(self):
        data = latin_data(seed=5)
        draws = gibbs_latin(data, ChainConfig(1200, 200, 1, 0))
        for name in ("row", "col", "treatment"):
            sums = draws.effects[name].sum(axis=1)
            assert np.max(np.abs(sums)) < 1e-10

    def test_constant_data_concentrates_near_zero(self):
        order = 5
        design = make_latin_square(order, seed=0)
        rows, cols = np.divmod(np.arange(order * order), order)
        data = Dataset.latin(
            y=np.full(order * order, 3.2),
            row=rows,
            col=cols,
            treatment=design.assignment[rows, cols],
        )
        draws = gibbs_latin(data, ChainConfig(6000, 1000, 1, 1))
        for name in ("row", "col", "treatment"):
            assert np.median(finite_pop_sd(draws.effects[name])) < 0.1
        assert np.median(draws.residual_sd) < 0.1

    def test_treatment_sd_ranked_highest_single_replication(self):
        data = latin_data(sds=(0.1, 0.1, 5.0), residual_sd=1.0, seed=12)
        draws = gibbs_latin(data, ChainConfig(6000, 1000, 1, 2))
        med = {
            name: np.median(finite_pop_sd(draws.effects[name]))
            for name in ("row", "col", "treatment")
        }
        assert med["treatment"] > med["row"]
        assert med["treatment"] > med["col"]

    def test_location_invariance(self):
        data = latin_data(seed=6, grand_mean=0.0)
        shifted = Dataset.latin(
            y=data.y + 10.0,
            row=data.factors["row"],
            col=data.factors["col"],
            treatment=data.factors["treatment"],
        )
        config = ChainConfig(12000, 2000, 1, 3)
        a = gibbs_latin(data, config)
        b = gibbs_latin(shifted, config)
        tol = 4 * np.hypot(mcse_mean(a.mu), mcse_mean(b.mu))
        assert abs((b.mu.mean() - a.mu.mean()) - 10.0) < tol
        for name in ("row", "col", "treatment"):
            fa, fb = finite_pop_sd(a.effects[name]), finite_pop_sd(b.effects[name])
            tol = 4 * np.hypot(mcse_mean(fa), mcse_mean(fb))
            assert abs(np.median(fa) - np.median(fb)) < tol

    def test_scale_equivariance(self):
        lam = 3.0
        data = latin_data(seed=7)
        scaled = Dataset.latin(
            y=data.y * lam,
            row=data.factors["row"],
            col=data.factors["col"],
            treatment=data.factors["treatment"],
        )
        config = ChainConfig(12000, 2000, 1, 4)
        a = gibbs_latin(data, config)
        b = gibbs_latin(scaled, config)
        for name in ("row", "col", "treatment"):
            fa, fb = finite_pop_sd(a.effects[name]), finite_pop_sd(b.effects[name])
            tol = 4 * np.hypot(lam * mcse_mean(fa), mcse_mean(fb))
            assert abs(lam * np.median(fa) - np.median(fb)) < tol
        tol = 4 * np.hypot(lam * mcse_mean(a.residual_sd), mcse_mean(b.residual_sd))
        assert abs(lam * np.median(a.residual_sd) - np.median(b.residual_sd)) < tol

    def test_rejects_wrong_schema_and_broken_square(self):
        nested = nested_data([0.0, 1.0], 1.0, 1.0, seed=0, n_machines=4,
                             n_groups=2, n_measures=2)
        with pytest.raises(SchemaError):
            gibbs_latin(nested, ChainConfig(100, 10, 1, 0))
        order = 3
        rows, cols = np.divmod(np.arange(9), order)
        broken = Dataset.latin(
            y=np.arange(9.0),
            row=rows,
            col=cols,
            treatment=np.zeros(9, dtype=int),
            levels={"row": 3, "col": 3, "treatment": 3},
        )
        with pytest.raises(ValidationError):
            gibbs_latin(broken, ChainConfig(100, 10, 1, 0))

    def test_uniform_prior_needs_three_levels(self):
        data = latin_data(order=2, seed=8)
        with pytest.raises(ValidationError, match="uniform"):
            gibbs_latin(
                data,
                ChainConfig(100, 10, 1, 0),
                batch_priors={"row": SdPrior.uniform(5.0)},
            )

    def test_unknown_batch_prior_rejected(self):
        data = latin_data(seed=8)
        with pytest.raises(ValidationError, match="unknown"):
            gibbs_latin(
                data,
                ChainConfig(100, 10, 1, 0),
                batch_priors={"machine": SdPrior.half_normal(1.0)},
            )

    def test_uniform_priors_run(self):
        data = latin_data(seed=9)
        draws = gibbs_latin(
            data,
            ChainConfig(2000, 500, 1, 5),
            batch_priors={name: SdPrior.uniform(20.0) for name in
                          ("row", "col", "treatment")},
            residual_prior=SdPrior.uniform(20.0),
        )
        for name, series in draws.sds.items():
            assert np.all(series > 0.0) and np.all(series < 20.0)


class TestGibbsTwoLevel:
    def test_reference_contrast_pinned(self):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 0.01, 0.1, seed=1)
        draws = gibbs_two_level_dummies(data, ChainConfig(2000, 500, 1, 0))
        assert np.all(draws.effects["treatment"][:, 0] == 0.0)
        assert draws.kinds["treatment"] == "fixed"
        assert "treatment" not in draws.sds and "machine" in draws.sds

    def test_contrast_recovery(self):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 0.01, 0.1, seed=2)
        draws = gibbs_two_level_dummies(data, ChainConfig(8000, 2000, 1, 1))
        means = draws.effects["treatment"].mean(axis=0)
        assert np.all(np.abs(means[1:] - np.array([1.0, 2.0, 3.0])) < 0.2)

    def test_relabeling_permutes_contrasts(self):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 0.5, 0.5, seed=3)
        perm = np.array([0, 2, 1, 3])  # swap treatments 2 and 3, keep reference
        relabeled = Dataset.nested(
            y=data.y,
            machine=data.factors["machine"],
            treatment=perm[data.factors["treatment"]],
            measure=data.factors["measure"],
        )
        config = ChainConfig(12000, 2000, 1, 2)
        a = gibbs_two_level_dummies(data, config)
        b = gibbs_two_level_dummies(relabeled, config)
        for new_lvl in range(4):
            old_lvl = int(perm[new_lvl])
            ea = a.effects["treatment"][:, old_lvl]
            eb = b.effects["treatment"][:, new_lvl]
            tol = 4 * np.hypot(mcse_mean(ea), mcse_mean(eb)) + 1e-12
            assert abs(ea.mean() - eb.mean()) < tol

    def test_machine_under_two_treatments_rejected(self):
        data = nested_data([0.0, 1.0], 1.0, 1.0, seed=0, n_machines=4,
                           n_groups=2, n_measures=2)
        bad = Dataset.nested(
            y=data.y,
            machine=np.zeros(data.n, dtype=int),
            treatment=data.factors["treatment"],
            measure=data.factors["measure"],
        )
        with pytest.raises(ValidationError, match="several treatments"):
            gibbs_two_level_dummies(bad, ChainConfig(100, 10, 1, 0))

    def test_empty_treatment_group_rejected(self):
        data = nested_data([0.0, 1.0], 1.0, 1.0, seed=0, n_machines=4,
                           n_groups=2, n_measures=2)
        bad = Dataset.nested(
            y=data.y,
            machine=data.factors["machine"],
            treatment=data.factors["treatment"],
            measure=data.factors["measure"],
            levels={"machine": 4, "treatment": 3, "measure": 2},
        )
        with pytest.raises(ValidationError, match="no machines"):
            gibbs_two_level_dummies(bad, ChainConfig(100, 10, 1, 0))


class TestGibbsThreeLevel:
    def test_treatment_sd_recovery_interval(self):
        # Truth (0,1,2,3) has finite-population sd 1.291.
        data = nested_data([0.0, 1.0, 2.0, 3.0], 1.0, 1.0, seed=4)
        draws = gibbs_three_level(data, ChainConfig(8000, 2000, 1, 3))
        med = np.median(finite_pop_sd(draws.effects["treatment"]))
        assert 0.5 < med < 3.0

    def test_shrinkage_relative_to_two_level(self):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 1.0, 1.0, seed=5)
        config = ChainConfig(8000, 2000, 1, 4)
        three = gibbs_three_level(data, config)
        two = gibbs_two_level_dummies(data, config)
        eff3 = three.effects["treatment"].mean(axis=0)
        eff2 = two.effects["treatment"].mean(axis=0)
        dev3 = np.abs(eff3 - eff3.mean()).mean()
        dev2 = np.abs(eff2 - eff2.mean()).mean()
        assert dev3 < dev2

    def test_flat_treatment_prior_matches_two_level(self):
        # With the machine batch priced out and a huge treatment sd prior,
        # the two parameterizations identify the same centered effects.
        data = nested_data([0.0, 1.0, 2.0, 3.0], 0.0, 0.3, seed=6)
        tiny = SdPrior.half_normal(1e-6)
        config = ChainConfig(17000, 2000, 1, 5)
        three = gibbs_three_level(
            data, config,
            treatment_prior=SdPrior.half_normal(1000.0),
            machine_prior=tiny,
        )
        two = gibbs_two_level_dummies(data, config, machine_prior=tiny)
        eff3 = three.effects["treatment"].mean(axis=0)
        eff2 = two.effects["treatment"].mean(axis=0)
        assert np.max(np.abs((eff3 - eff3.mean()) - (eff2 - eff2.mean()))) < 0.05

    def test_single_treatment_rejected(self):
        data = nested_data([0.0], 1.0, 1.0, seed=0, n_machines=4, n_groups=1,
                           n_measures=2)
        with pytest.raises(ValidationError, match="at least 2 treatments"):
            gibbs_three_level(data, ChainConfig(100, 10, 1, 0))

    def test_deterministic(self):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 1.0, 1.0, seed=7)
        config = ChainConfig(600, 100, 1, 6)
        a = gibbs_three_level(data, config)
        b = gibbs_three_level(data, config)
        assert np.array_equal(a.effects["treatment"], b.effects["treatment"])
        assert np.array_equal(a.sds["treatment"], b.sds["treatment"])


class TestHierDrawsCsv:
    def test_column_layout(self, tmp_path):
        data = nested_data([0.0, 1.0, 2.0, 3.0], 1.0, 1.0, seed=8,
                           n_machines=4, n_groups=4, n_measures=2)
        draws = gibbs_three_level(data, ChainConfig(300, 100, 1, 0))
        path = tmp_path / "draws.csv"
        draws.to_csv(path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "mu"
        assert header[1:5] == ["treatment_1", "treatment_2", "treatment_3",
                               "treatment_4"]
        assert header[5:9] == ["machine_1", "machine_2", "machine_3",
                               "machine_4"]
        assert header[9:] == ["sd_treatment", "sd_machine", "sigma"]
        body = path.read_text().splitlines()[1:]
        assert len(body) == len(draws)
        first = [float(c) for c in body[0].split(",")]
        assert first[0] == draws.mu[0]
