"""Command line surface: files, exit codes, and manifest replay."""

import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import groups_dataset
from ordanova.cli import main
from ordanova.designs import load_csv, write_csv

LATIN_PARAMS = {
    "order": 5,
    "grand_mean": 0.0,
    "effect_sds": {"row": 1.0, "col": 1.0, "treatment": 2.0},
    "residual_sd": 1.0,
}
NESTED_PARAMS = {
    "n_machines": 20,
    "n_groups": 4,
    "n_measures": 6,
    "grand_mean": 5.0,
    "effect_sds": {"treatment": 2.0, "machine": 1.0},
    "residual_sd": 0.5,
}
TWO_MODELS = [
    {"label": "M_A", "constraint": "b1<b2<b3<b4<b5"},
    {"label": "M_B", "constraint": "{b1,b4}<{b2,b3,b5}"},
]


def write_params(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture(scope="module")
def latin_csv(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("latin")
    params = write_params(tmp, "params.json", LATIN_PARAMS)
    out = tmp / "sim"
    assert main(["simulate", "--design", "latin", "--params", params,
                 "--seed", "1", "--out", str(out)]) == 0
    return str(out / "data.csv")


@pytest.fixture(scope="module")
def nested_csv(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("nested")
    params = write_params(tmp, "params.json", NESTED_PARAMS)
    out = tmp / "sim"
    assert main(["simulate", "--design", "nested", "--params", params,
                 "--seed", "1", "--out", str(out)]) == 0
    return str(out / "data.csv")


class TestSimulate:
    def test_latin_writes_25_rows_and_sidecars(self, tmp_path):
        params = write_params(tmp_path, "p.json", LATIN_PARAMS)
        out = tmp_path / "run"
        assert main(["simulate", "--design", "latin", "--params", params,
                     "--seed", "1", "--out", str(out)]) == 0
        lines = (out / "data.csv").read_text().splitlines()
        assert len(lines) == 26
        assert lines[0] == "y,row,col,treatment"
        assert (out / "data.truth.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["args"]["seed"] == 1
        assert manifest["artifact"] == "ordanova"
        assert "version" in manifest

    def test_nested_default_shape_is_120_rows(self, nested_csv):
        data = load_csv(nested_csv)
        assert data.n == 120
        assert data.levels["machine"] == 20
        assert data.levels["measure"] == 6

    def test_same_flags_same_bytes(self, tmp_path):
        params = write_params(tmp_path, "p.json", LATIN_PARAMS)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["simulate", "--design", "latin", "--params", params,
                         "--seed", "9", "--out", str(out)]) == 0
        assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
        assert (a / "data.truth.json").read_bytes() == (
            b / "data.truth.json").read_bytes()

    def test_missing_param_field_is_named(self, tmp_path, capsys):
        bad = dict(LATIN_PARAMS)
        del bad["order"]
        params = write_params(tmp_path, "p.json", bad)
        code = main(["simulate", "--design", "latin", "--params", params,
                     "--out", str(tmp_path / "x")])
        assert code == 2
        assert "order" in capsys.readouterr().err

    def test_unknown_param_field_is_named(self, tmp_path, capsys):
        params = write_params(tmp_path, "p.json",
                              dict(LATIN_PARAMS, typo_field=3))
        code = main(["simulate", "--design", "latin", "--params", params,
                     "--out", str(tmp_path / "x")])
        assert code == 2
        assert "typo_field" in capsys.readouterr().err

    def test_missing_params_file_is_a_file_error(self, tmp_path):
        code = main(["simulate", "--design", "latin",
                     "--params", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "x")])
        assert code == 4


class TestCompare:
    def test_two_models_posterior_sums_to_one(self, latin_csv, tmp_path):
        models = write_params(tmp_path, "m.json", TWO_MODELS)
        out = tmp_path / "cmp"
        assert main(["compare", "--data", latin_csv, "--models", models,
                     "--iterations", "4000", "--burn-in", "500",
                     "--seed", "4", "--out", str(out)]) == 0
        payload = json.loads((out / "comparison.json").read_text())
        assert payload["labels"] == ["M_A", "M_B"]
        assert payload["posterior_probs"][0] == pytest.approx(
            1.0 - payload["posterior_probs"][1])
        assert sum(payload["posterior_probs"]) == pytest.approx(1.0)
        text = (out / "comparison.txt").read_text().splitlines()
        assert len(text) == 3
        assert text[0].startswith("model")

    def test_single_unconstrained_model_gets_probability_one(
        self, latin_csv, tmp_path
    ):
        models = write_params(
            tmp_path, "m.json", [{"label": "any", "constraint": None}]
        )
        out = tmp_path / "cmp"
        assert main(["compare", "--data", latin_csv, "--models", models,
                     "--iterations", "2000", "--burn-in", "500",
                     "--out", str(out)]) == 0
        payload = json.loads((out / "comparison.json").read_text())
        assert payload["posterior_probs"] == [1.0]

    def test_prior_probs_must_be_all_or_none(self, latin_csv, tmp_path):
        models = write_params(tmp_path, "m.json", [
            {"label": "A", "constraint": None, "prior_prob": 0.5},
            {"label": "B", "constraint": "b1<b2<b3<b4<b5"},
        ])
        code = main(["compare", "--data", latin_csv, "--models", models,
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_constraint_parse_failure_names_the_position(
        self, latin_csv, tmp_path, capsys
    ):
        models = write_params(tmp_path, "m.json", [
            {"label": "A", "constraint": "b1<<b2"},
            {"label": "B", "constraint": None},
        ])
        code = main(["compare", "--data", latin_csv, "--models", models,
                     "--out", str(tmp_path / "x")])
        assert code == 2
        assert "position" in capsys.readouterr().err

    def test_degenerate_direct_estimate_exits_3(self, latin_csv, tmp_path):
        models = write_params(tmp_path, "m.json", TWO_MODELS)
        code = main(["compare", "--data", latin_csv, "--models", models,
                     "--method", "direct", "--draws", "30", "--seed", "0",
                     "--out", str(tmp_path / "x")])
        assert code == 3

    def test_missing_data_file_exits_4(self, tmp_path):
        models = write_params(tmp_path, "m.json", TWO_MODELS)
        code = main(["compare", "--data", str(tmp_path / "absent.csv"),
                     "--models", models, "--out", str(tmp_path / "x")])
        assert code == 4


class TestFit:
    def row_pairs(self, out):
        rows = json.loads((out / "summary.json").read_text())["rows"]
        return [(r["name"], r["kind"]) for r in rows]

    def test_latin_fit_reports_all_batches(self, latin_csv, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", "--data", latin_csv, "--model", "latin",
                     "--iterations", "2000", "--burn-in", "400",
                     "--seed", "2", "--out", str(out)]) == 0
        assert self.row_pairs(out) == [
            ("row", "sd"), ("col", "sd"), ("treatment", "sd"),
            ("residual", "residual"),
        ]
        assert (out / "draws.csv").exists()
        table = (out / "summary.txt").read_text()
        assert table.splitlines()[0].startswith("component")

    def test_two_level_fit_has_contrasts_but_no_treatment_sd(
        self, nested_csv, tmp_path
    ):
        out = tmp_path / "fit"
        assert main(["fit", "--data", nested_csv, "--model", "two-level",
                     "--iterations", "2000", "--burn-in", "400",
                     "--seed", "3", "--out", str(out)]) == 0
        pairs = self.row_pairs(out)
        assert ("treatment[2]", "contrast") in pairs
        assert ("machine", "sd") in pairs
        assert ("treatment", "sd") not in pairs

    def test_three_level_fit_has_a_treatment_sd(self, nested_csv, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", "--data", nested_csv, "--model", "three-level",
                     "--iterations", "2000", "--burn-in", "400",
                     "--seed", "3", "--out", str(out)]) == 0
        pairs = self.row_pairs(out)
        assert ("treatment", "sd") in pairs
        assert ("machine", "sd") in pairs

    def test_schema_model_mismatch_exits_2(self, latin_csv, tmp_path):
        code = main(["fit", "--data", latin_csv, "--model", "two-level",
                     "--iterations", "2000", "--burn-in", "400",
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_explicit_priors_are_accepted(self, latin_csv, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", "--data", latin_csv, "--model", "latin",
                     "--iterations", "1500", "--burn-in", "300",
                     "--sd-prior", "half-normal:2.5",
                     "--residual-prior", "uniform:10",
                     "--out", str(out)]) == 0

    def test_malformed_prior_exits_2(self, latin_csv, tmp_path, capsys):
        code = main(["fit", "--data", latin_csv, "--model", "latin",
                     "--sd-prior", "half-normal", "--out",
                     str(tmp_path / "x")])
        assert code == 2
        assert "half-normal:SCALE" in capsys.readouterr().err


class TestLindley:
    def test_four_scales_give_four_rows(self, latin_csv, tmp_path):
        out = tmp_path / "lin"
        assert main(["lindley", "--data", latin_csv, "--batch", "row",
                     "--scales", "1,10,100,1000", "--draws", "4000",
                     "--base-scale", "2", "--residual-scale", "2",
                     "--seed", "6", "--out", str(out)]) == 0
        payload = json.loads((out / "lindley.json").read_text())
        assert payload["scales"] == [1.0, 10.0, 100.0, 1000.0]
        assert len(payload["log_bf_zero_vs_free"]) == 4
        assert payload["batch"] == "row"
        text = (out / "lindley.txt").read_text().splitlines()
        assert len(text) == 5

    def test_same_seed_same_table(self, latin_csv, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["lindley", "--data", latin_csv, "--batch", "row",
                         "--scales", "1,10", "--draws", "2000",
                         "--base-scale", "2", "--residual-scale", "2",
                         "--seed", "6", "--out", str(out)]) == 0
        assert (a / "lindley.json").read_bytes() == (
            b / "lindley.json").read_bytes()
        assert (a / "lindley.txt").read_bytes() == (
            b / "lindley.txt").read_bytes()

    def test_fewer_than_two_scales_exits_2(self, latin_csv, tmp_path, capsys):
        code = main(["lindley", "--data", latin_csv, "--batch", "row",
                     "--scales", "5", "--base-scale", "2",
                     "--residual-scale", "2", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "two scales" in capsys.readouterr().err

    def test_unknown_batch_exits_2(self, latin_csv, tmp_path):
        code = main(["lindley", "--data", latin_csv, "--batch", "machine",
                     "--scales", "1,10", "--base-scale", "2",
                     "--residual-scale", "2", "--out", str(tmp_path / "x")])
        assert code == 2


class TestClassical:
    def test_hand_worked_f_fixture(self, tmp_path):
        data = groups_dataset([1.0, 2.0], [2.0, 3.0])
        csv = tmp_path / "groups.csv"
        write_csv(data, csv)
        out = tmp_path / "cls"
        assert main(["classical", "--data", str(csv), "--test", "f",
                     "--out", str(out)]) == 0
        payload = json.loads((out / "classical.json").read_text())
        assert payload["f_stat"] == pytest.approx(2.0, abs=1e-13)
        assert payload["df1"] == 1
        assert payload["df2"] == 2
        assert not payload["degenerate"]
        assert "F(1, 2) = 2" in (out / "classical.txt").read_text()

    def test_identical_groups_give_p_one(self, tmp_path):
        data = groups_dataset([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        csv = tmp_path / "groups.csv"
        write_csv(data, csv)
        out = tmp_path / "cls"
        assert main(["classical", "--data", str(csv), "--test", "f",
                     "--out", str(out)]) == 0
        payload = json.loads((out / "classical.json").read_text())
        assert payload["f_stat"] == 0.0
        assert payload["p_value"] == 1.0

    def test_lr_passthrough_on_nested_data(self, nested_csv, tmp_path):
        out = tmp_path / "cls"
        assert main(["classical", "--data", nested_csv, "--test", "lr",
                     "--out", str(out)]) == 0
        payload = json.loads((out / "classical.json").read_text())
        assert payload["test"] == "lr"
        assert payload["df"] == 3
        assert payload["lr_stat"] >= 0.0
        assert 0.0 <= payload["p_value"] <= 1.0
        assert payload["loglik_full"] >= payload["loglik_null"]


class TestRerun:
    def test_compare_replay_is_byte_identical(self, latin_csv, tmp_path):
        models = write_params(tmp_path, "m.json", TWO_MODELS)
        out = tmp_path / "cmp"
        assert main(["compare", "--data", latin_csv, "--models", models,
                     "--iterations", "3000", "--burn-in", "500",
                     "--seed", "4", "--out", str(out)]) == 0
        replay = tmp_path / "replay"
        assert main(["rerun", str(out / "manifest.json"),
                     "--out", str(replay)]) == 0
        for name in ("comparison.json", "comparison.txt"):
            assert (out / name).read_bytes() == (replay / name).read_bytes()

    def test_replaying_into_the_same_directory_is_stable(
        self, latin_csv, tmp_path
    ):
        out = tmp_path / "cmp"
        models = write_params(tmp_path, "m.json", TWO_MODELS)
        assert main(["compare", "--data", latin_csv, "--models", models,
                     "--iterations", "3000", "--burn-in", "500",
                     "--seed", "4", "--out", str(out)]) == 0
        before = (out / "manifest.json").read_bytes()
        assert main(["rerun", str(out / "manifest.json")]) == 0
        assert (out / "manifest.json").read_bytes() == before

    def test_non_manifest_json_is_rejected(self, tmp_path):
        bogus = tmp_path / "m.json"
        bogus.write_text(json.dumps({"hello": 1}))
        assert main(["rerun", str(bogus)]) == 2

    def test_missing_manifest_exits_4(self, tmp_path):
        assert main(["rerun", str(tmp_path / "absent.json")]) == 4


class TestEntryPoints:
    def test_version_flag(self):
        assert main(["--version"]) == 0

    def test_no_subcommand_is_a_usage_error(self):
        assert main([]) == 2

    def test_module_invocation_works_in_a_subprocess(self, tmp_path):
        params = tmp_path / "p.json"
        params.write_text(json.dumps(LATIN_PARAMS))
        out = tmp_path / "run"
        proc = subprocess.run(
            [sys.executable, "-m", "ordanova", "simulate", "--design",
             "latin", "--params", str(params), "--seed", "1",
             "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "data.csv").exists()
