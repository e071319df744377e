import json
import math

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli.main import cli, main
from src.engine.gridfn import save_grid_function
from src.engine.verify.report import REPORT_COLUMNS

EXAMPLE_TWO = {
    "kernel": {"d": 2, "ell": 2, "alpha": 1.0, "tilde_k": "identity"},
    "phi": {"family": "quadratic_form", "params": {"a11": 1.0, "a12": 0.0, "a22": 1.0}},
}


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


def test_verify_is_deterministic(runner, tmp_path, write_config, tiny_config):
    config = write_config(tiny_config)
    first = invoke(runner, "verify", "--config", config, "--out", tmp_path / "a")
    second = invoke(runner, "verify", "--config", config, "--out", tmp_path / "b", "--threads", 3)
    assert first.exit_code == 0
    assert second.exit_code == 0
    a = (tmp_path / "a" / "verify.csv").read_bytes()
    assert a == (tmp_path / "b" / "verify.csv").read_bytes()
    assert a.decode("utf-8").splitlines()[0] == ",".join(REPORT_COLUMNS)


def test_verify_rows_are_scale_invariant(runner, tmp_path, write_config, tiny_config):
    invoke(runner, "verify", "--config", write_config(tiny_config), "--out", tmp_path)
    df = pd.read_csv(tmp_path / "verify.csv")
    assert len(df) == 4
    assert list(df["n"]) == [-1, -1, -1, -1]
    main_rows = df[df["statement_id"] == "main"].set_index("f_id")["ratio"]
    assert main_rows["dipole-w0.125*2"] == pytest.approx(main_rows["dipole-w0.125"], rel=1e-9)
    assert df["config_digest"].nunique() == 1


def test_empty_suite_writes_the_header(runner, tmp_path, write_config, tiny_config):
    tiny_config["suite"]["statements"] = []
    result = invoke(runner, "verify", "--config", write_config(tiny_config), "--out", tmp_path)
    assert result.exit_code == 0
    assert (tmp_path / "verify.csv").read_text(encoding="utf-8") == ",".join(REPORT_COLUMNS) + "\n"


def test_check_cancellation_exit_codes(runner, tmp_path, write_config):
    cancelling = invoke(runner, "check-cancellation", "--config", write_config({}, "ex1.yaml"),
                        "--out", tmp_path / "ex1")
    assert cancelling.exit_code == 0

    result = invoke(runner, "check-cancellation", "--config", write_config(EXAMPLE_TWO, "ex2.yaml"),
                    "--out", tmp_path / "ex2")
    assert result.exit_code == 2
    df = pd.read_csv(tmp_path / "ex2" / "cancellation.csv")
    assert list(df["sign"]) == ["+", "-"]
    assert abs(df["residual"][0] - 2.0 * math.pi) <= 1e-10
    assert list(df["verdict"]) == ["fails", "fails"]


def test_config_errors_exit_with_one(runner, tmp_path, write_config):
    result = runner.invoke(cli, ["verify", "--config", str(write_config({"grid": {"cels": 4}}))])
    assert result.exit_code == 1
    assert "grid.cels" in result.output
    missing = runner.invoke(cli, ["verify", "--config", str(tmp_path / "missing.yaml")])
    assert missing.exit_code == 1
    assert main(["verify", "--config", str(tmp_path / "missing.yaml")]) == 1


def test_convolve_reports_the_far_field_tail(runner, tmp_path, write_config, small_dipole):
    source = save_grid_function(small_dipole, tmp_path / "dipole.grid")
    result = invoke(runner, "convolve", source, "--config", write_config({}), "--out", tmp_path / "out")
    assert result.exit_code == 0
    record = json.loads([line for line in result.output.splitlines() if line.startswith("{")][-1])
    assert record["band_range"] == "(-inf,12]"
    assert record["effective_lo"] == -2
    assert record["omitted_radius"] == 4.0
    assert record["pointwise_tail_bound"] == pytest.approx(1.0, rel=1e-9)
    assert (tmp_path / "out" / "dipole.grid.conv").exists()


def test_plot_writes_svgs(runner, tmp_path, write_config, tiny_config):
    invoke(runner, "verify", "--config", write_config(tiny_config), "--out", tmp_path)
    result = invoke(runner, "plot", tmp_path / "verify.csv", "--out", tmp_path / "plots")
    assert result.exit_code == 0
    for name in ("ratio_vs_n.svg", "ratio_vs_width.svg"):
        assert (tmp_path / "plots" / name).read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_extremize_writes_report_and_trace(runner, tmp_path, write_config, tiny_config):
    tiny_config["extremize"] = {"budget": 7}
    tiny_config["output"] = {"formats": ["csv", "json"]}
    result = invoke(runner, "extremize", "--config", write_config(tiny_config), "--out", tmp_path)
    assert result.exit_code == 0
    df = pd.read_csv(tmp_path / "extremize.csv")
    assert list(df["statement_id"]) == ["extremize"]
    trace = json.loads((tmp_path / "extremize_trace.json").read_text(encoding="utf-8"))
    assert trace["evaluations"] == 7
    assert trace["config_digest"] == df["config_digest"][0]


def test_probe_needs_force_for_cancelling_phi(runner, tmp_path, write_config, tiny_config):
    result = runner.invoke(cli, ["probe-necessity", "--config", str(write_config(tiny_config)),
                                 "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "ProbeInconclusiveError" in result.output


def test_version():
    assert main(["--version"]) == 0
