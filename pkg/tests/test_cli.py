"""End-to-end tests for the command line interface.

Everything runs in-process through ``cli.main(argv) -> int`` so exit
codes can be asserted directly; one subprocess test checks the
installed console script.  File outputs are compared by bytes where
determinism is part of the contract.
"""

import json
import subprocess
import sys

import pytest

from catbond.cli import main

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_NUMERIC = 4


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Workspace with one nonlinear and one zero-noise linear dataset."""
    d = tmp_path_factory.mktemp("cli")
    nl = d / "nl.csv"
    lin = d / "lin.csv"
    assert run("synth", "--n", 120, "--seed", 3, "--out", nl) == EXIT_OK
    assert run("synth", "--n", 80, "--seed", 1, "--truth", "linear",
               "--noise-sd", 0, "--out", lin) == EXIT_OK
    # evaluate exercises the full design; give it enough rows to keep
    # every interaction column identifiable on 0.8 train splits
    assert run("synth", "--n", 250, "--seed", 4,
               "--out", d / "eval.csv") == EXIT_OK
    return d


# ---------------------------------------------------------------- synth


def test_synth_row_count_and_determinism(ws, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run("synth", "--n", 40, "--seed", 9, "--out", a) == EXIT_OK
    assert run("synth", "--n", 40, "--seed", 9, "--out", b) == EXIT_OK
    assert run("synth", "--n", 40, "--seed", 10, "--out", c) == EXIT_OK
    lines = a.read_text().splitlines()
    assert len(lines) == 41 and lines[0].startswith("EL,")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_synth_meta_sidecar(tmp_path):
    out, meta = tmp_path / "x.csv", tmp_path / "x.json"
    assert run("synth", "--n", 10, "--seed", 2, "--out", out,
               "--meta", meta) == EXIT_OK
    doc = json.loads(meta.read_text())
    assert doc["n"] == 10 and doc["seed"] == 2
    assert doc["format"].startswith("catbond-synth-meta/")


def test_synth_rejects_nonpositive_n(tmp_path):
    assert run("synth", "--n", 0, "--out", tmp_path / "x.csv") == EXIT_USAGE


def test_synth_rejects_bad_noise(tmp_path):
    assert run("synth", "--n", 5, "--noise-sd", -1,
               "--out", tmp_path / "x.csv") == EXIT_USAGE


# ---------------------------------------------------------------- fit


def test_fit_ols_el_only_recovers_linear_truth(ws, tmp_path):
    model, report = tmp_path / "m.json", tmp_path / "r.txt"
    assert run("fit", "--data", ws / "lin.csv", "--model", "ols",
               "--features", "EL", "--out", model, "--report", report) == EXIT_OK
    doc = json.loads(model.read_text())
    assert doc["format"].startswith("catbond-linear/")
    text = report.read_text()
    assert "R2=1.0000" in text and "(intercept)" in text


def test_fit_model_json_is_byte_deterministic(ws, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run("fit", "--data", ws / "nl.csv", "--model", "gbm",
                   "--seed", 5, "--params", _gbm_params(tmp_path),
                   "--out", out) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def _gbm_params(d):
    p = d / "params.json"
    p.write_text(json.dumps({"n_rounds": 5, "max_depth": 3,
                             "learning_rate": 0.3}))
    return p


def test_fit_gbm_params_file_sets_rounds(ws, tmp_path):
    model, report = tmp_path / "g.json", tmp_path / "g.txt"
    assert run("fit", "--data", ws / "nl.csv", "--model", "gbm",
               "--params", _gbm_params(tmp_path), "--out", model,
               "--report", report) == EXIT_OK
    doc = json.loads(model.read_text())
    assert len(doc["trees"]) == 5
    assert report.read_text().startswith("gbm: 5 trees")


def test_fit_stepwise_report_lists_selection_and_trace(ws, tmp_path):
    model, report = tmp_path / "s.json", tmp_path / "s.txt"
    assert run("fit", "--data", ws / "nl.csv", "--model", "stepwise",
               "--features", "main", "--out", model,
               "--report", report) == EXIT_OK
    text = report.read_text()
    assert "selected:" in text and "search trace:" in text and "AIC=" in text


def test_fit_unknown_feature_is_usage_error(ws, tmp_path):
    assert run("fit", "--data", ws / "nl.csv", "--model", "ols",
               "--features", "BOGUS", "--out", tmp_path / "m.json") == EXIT_USAGE


def test_fit_missing_data_file(tmp_path):
    assert run("fit", "--data", tmp_path / "absent.csv", "--model", "ols",
               "--out", tmp_path / "m.json") == EXIT_MISSING_FILE


def test_fit_bad_hyperparams_is_usage_error(ws, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"learning_rate": -2}))
    assert run("fit", "--data", ws / "nl.csv", "--model", "gbm",
               "--params", p, "--out", tmp_path / "m.json") == EXIT_USAGE


# ---------------------------------------------------------------- predict


@pytest.fixture(scope="module")
def ols_model(ws):
    model = ws / "ols_main.json"
    assert run("fit", "--data", ws / "nl.csv", "--model", "ols",
               "--features", "main", "--out", model) == EXIT_OK
    return model


def test_predict_point_only_columns(ws, ols_model, tmp_path):
    out = tmp_path / "p.csv"
    assert run("predict", "--model", ols_model, "--data", ws / "nl.csv",
               "--out", out) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "point_bps,spread_bps"
    assert len(lines) == 121


def test_predict_normal_interval_and_alpha_ordering(ws, ols_model, tmp_path):
    wide, narrow = tmp_path / "w.csv", tmp_path / "n.csv"
    for alpha, out in ((0.05, wide), (0.5, narrow)):
        assert run("predict", "--model", ols_model, "--data", ws / "nl.csv",
                   "--method", "normal", "--alpha", alpha,
                   "--out", out) == EXIT_OK

    def lengths(path):
        rows = path.read_text().splitlines()
        assert rows[0] == "point_bps,lower_bps,upper_bps,spread_bps,covered"
        return [float(r.split(",")[2]) - float(r.split(",")[1])
                for r in rows[1:]]

    lw, ln = lengths(wide), lengths(narrow)
    assert all(a > b > 0 for a, b in zip(lw, ln))


def test_predict_conformal_requires_train(ws, ols_model, tmp_path):
    assert run("predict", "--model", ols_model, "--data", ws / "nl.csv",
               "--method", "jackknife_plus",
               "--out", tmp_path / "p.csv") == EXIT_USAGE


def test_predict_jackknife_plus_parallel_identical(ws, ols_model, tmp_path):
    outs = []
    for jobs in (1, 2):
        out = tmp_path / f"j{jobs}.csv"
        assert run("predict", "--model", ols_model, "--data", ws / "nl.csv",
                   "--method", "jackknife_plus", "--train", ws / "nl.csv",
                   "--jobs", jobs, "--out", out) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    header = outs[0].decode().splitlines()[0]
    assert header == "point_bps,lower_bps,upper_bps,spread_bps,covered"


def test_predict_split_conformal_seeded(ws, ols_model, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("predict", "--model", ols_model, "--data", ws / "nl.csv",
                   "--method", "split", "--train", ws / "nl.csv",
                   "--seed", 4, "--out", out) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_predict_normal_rejects_gbm(ws, tmp_path):
    model = tmp_path / "g.json"
    assert run("fit", "--data", ws / "nl.csv", "--model", "gbm",
               "--params", _gbm_params(tmp_path), "--out", model) == EXIT_OK
    assert run("predict", "--model", model, "--data", ws / "nl.csv",
               "--method", "normal", "--out", tmp_path / "p.csv") == EXIT_USAGE


def test_predict_schema_mismatch_names_column(ws, ols_model, tmp_path, capsys):
    rows = (ws / "nl.csv").read_text().splitlines()
    cells = [r.split(",") for r in rows]
    drop = cells[0].index("EL")
    trimmed = "\n".join(",".join(c[:drop] + c[drop + 1:]) for c in cells) + "\n"
    bad = tmp_path / "noel.csv"
    bad.write_text(trimmed)
    assert run("predict", "--model", ols_model, "--data", bad,
               "--out", tmp_path / "p.csv") == EXIT_USAGE
    err = capsys.readouterr().err
    assert "schema mismatch" in err and "EL" in err


def test_predict_single_row(ws, ols_model, tmp_path):
    rows = (ws / "nl.csv").read_text().splitlines()
    one = tmp_path / "one.csv"
    one.write_text("\n".join(rows[:2]) + "\n")
    out = tmp_path / "p.csv"
    assert run("predict", "--model", ols_model, "--data", one,
               "--out", out) == EXIT_OK
    assert len(out.read_text().splitlines()) == 2


def test_predict_missing_model_file(ws, tmp_path):
    assert run("predict", "--model", tmp_path / "absent.json",
               "--data", ws / "nl.csv",
               "--out", tmp_path / "p.csv") == EXIT_MISSING_FILE


# ---------------------------------------------------------------- interpret


def test_interpret_writes_requested_artifacts(ws, tmp_path):
    model = tmp_path / "g.json"
    assert run("fit", "--data", ws / "nl.csv", "--model", "gbm",
               "--params", _gbm_params(tmp_path), "--out", model) == EXIT_OK
    out = tmp_path / "interp"
    assert run("interpret", "--model", model, "--data", ws / "nl.csv",
               "--out-dir", out, "--importance", "--ale", "EL",
               "--ale2", "EL", "SIZE", "--conditional", "EL",
               "--scenario", "ROLX", "--bins", 8, "--bins2", 5,
               "--grid", 12) == EXIT_OK
    imp = (out / "importance.csv").read_text().splitlines()
    assert imp[0] == "feature,importance"
    total = sum(float(r.split(",")[1]) for r in imp[1:])
    assert total == pytest.approx(1.0) or total == 0.0
    ale = (out / "ale_EL.csv").read_text().splitlines()
    assert ale[0] == "edge,effect,count" and len(ale) == 10
    assert (out / "ale2_EL_SIZE.csv").read_text().splitlines()[0] == \
        "x_edge,y_edge,effect,count"
    for label in ("soft", "normal", "hard"):
        path = out / f"conditional_EL_by_ROLX_{label}.csv"
        lines = path.read_text().splitlines()
        assert lines[0] == "grid,value,extrapolated" and len(lines) == 13


def test_interpret_importance_needs_gbm(ws, ols_model, tmp_path):
    assert run("interpret", "--model", ols_model, "--data", ws / "nl.csv",
               "--out-dir", tmp_path / "o", "--importance") == EXIT_USAGE


def test_interpret_without_actions_is_usage_error(ws, ols_model, tmp_path):
    assert run("interpret", "--model", ols_model, "--data", ws / "nl.csv",
               "--out-dir", tmp_path / "o") == EXIT_USAGE


# ---------------------------------------------------------------- evaluate


def test_evaluate_report_and_rows(ws, tmp_path):
    out, rows = tmp_path / "cv.json", tmp_path / "rows.csv"
    assert run("evaluate", "--data", ws / "eval.csv", "--models", "mean,ols",
               "--splits", 3, "--seed", 11, "--out", out,
               "--rows", rows) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["format"].startswith("catbond-cvreport/")
    assert doc["n_splits"] == 3 and doc["models"] == ["mean", "ols"]
    assert all(row["error"] is None for row in doc["rows"])
    lines = rows.read_text().splitlines()
    assert lines[0] == "split,model,mse,coverage,length_bps,n_test,error"
    assert len(lines) == 1 + 3 * 2


def test_evaluate_unknown_model_kind(ws, tmp_path):
    assert run("evaluate", "--data", ws / "nl.csv", "--models", "forest",
               "--out", tmp_path / "cv.json") == EXIT_USAGE


def test_evaluate_missing_data(tmp_path):
    assert run("evaluate", "--data", tmp_path / "absent.csv",
               "--models", "ols",
               "--out", tmp_path / "cv.json") == EXIT_MISSING_FILE


def test_evaluate_requires_response_column(ws, ols_model, tmp_path):
    rows = (ws / "nl.csv").read_text().splitlines()
    cells = [r.split(",") for r in rows]
    drop = cells[0].index("SPREAD")
    bad = tmp_path / "nospread.csv"
    bad.write_text("\n".join(",".join(c[:drop] + c[drop + 1:])
                             for c in cells) + "\n")
    assert run("evaluate", "--data", bad, "--models", "ols",
               "--out", tmp_path / "cv.json") == EXIT_NUMERIC


# ---------------------------------------------------------------- config file


def test_config_layering_cli_wins(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 50, "seed": 7}))
    via_cfg = tmp_path / "a.csv"
    explicit = tmp_path / "b.csv"
    assert run("synth", "--config", cfg, "--n", 30,
               "--out", via_cfg) == EXIT_OK
    assert run("synth", "--n", 30, "--seed", 7, "--out", explicit) == EXIT_OK
    assert via_cfg.read_bytes() == explicit.read_bytes()
    assert len(via_cfg.read_text().splitlines()) == 31


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_rows": 50}))
    assert run("synth", "--config", cfg,
               "--out", tmp_path / "x.csv") == EXIT_USAGE


def test_config_must_be_object(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    assert run("synth", "--config", cfg,
               "--out", tmp_path / "x.csv") == EXIT_USAGE


def test_required_argument_enforced_after_config(tmp_path):
    # fit with no --data anywhere: usage error, not a crash
    assert run("fit", "--model", "ols",
               "--out", tmp_path / "m.json") == EXIT_USAGE


# ---------------------------------------------------------------- parser


def test_unknown_flag_exits_2():
    assert run("synth", "--frobnicate", 1) == EXIT_USAGE


def test_missing_subcommand_exits_2():
    assert run() == EXIT_USAGE


def test_version_flag_exits_0():
    assert run("--version") == EXIT_OK


def test_console_script_roundtrip(tmp_path):
    out = tmp_path / "cli.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "catbond.cli", "synth", "--n", "12",
         "--seed", "6", "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 13
