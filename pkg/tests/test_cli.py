"""CLI contract tests: subcommands, file outputs, exit codes."""

import json

import pytest

from riskbound.cli import main
from riskbound.harness import builtin_scenario, save_scenario
from riskbound.sysmodel import ConstantWind, WorldConfig


def run_cli(*args):
    return main(list(args))


@pytest.fixture
def trace_file(tmp_path):
    code = run_cli(
        "simulate", "--config", "noise_free", "--seed", "1",
        "--out-dir", str(tmp_path),
    )
    assert code == 0
    return tmp_path / "trace_noise-free_baseline_seed1.jsonl"


def test_simulate_writes_trace_and_metrics(tmp_path, trace_file):
    assert trace_file.exists()
    metrics = json.loads(
        (tmp_path / "metrics_noise-free_baseline_seed1.json").read_text()
    )
    assert metrics["completed"] is True
    lines = trace_file.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["kind"] == "run_trace"
    step = json.loads(lines[1])
    assert set(step) == {"j", "x_hat", "u_hat", "delta", "waypoint", "flags"}


def test_fit_then_eval_and_verify(tmp_path, trace_file, capsys):
    model_path = tmp_path / "model.json"
    code = run_cli(
        "fit", "--trace", str(trace_file), "--n", "60", "--beta", "0.1",
        "--out", str(model_path), "--json",
    )
    assert code == 0
    fit_payload = json.loads(capsys.readouterr().out)
    assert fit_payload["iterations"] >= 1
    assert json.loads(model_path.read_text())["kind"] == "sar_model"

    code = run_cli(
        "eval", "--model", str(model_path), "--scenario", "noise_free",
        "--grid", "4", "--samples", "20", "--json",
    )
    assert code == 0
    eval_payload = json.loads(capsys.readouterr().out)
    assert eval_payload["n_points"] == 16
    assert 0.0 <= eval_payload["coverage"] <= 1.0

    code = run_cli(
        "verify-assumption", "--trace", str(trace_file), "--n", "60",
        "--alpha", "3.0", "--beta", "0.05",
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "alpha_D" in out and "beta_D" in out


def test_simulate_augmented_requires_model(tmp_path):
    code = run_cli(
        "simulate", "--config", "noise_free", "--phase", "augmented",
        "--out-dir", str(tmp_path),
    )
    assert code == 1


def test_experiment_writes_report(tmp_path, capsys):
    code = run_cli(
        "experiment", "--config", "noise_free", "--seed", "7",
        "--out-dir", str(tmp_path), "--json",
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["kind"] == "experiment_report"
    report_path = tmp_path / "report_noise-free_seed7.json"
    assert json.loads(report_path.read_text()) == report
    assert (tmp_path / "batch_diagnostics.csv").exists()


def test_export_sar_vs_samples(tmp_path):
    code = run_cli(
        "export", "--kind", "sar-vs-samples", "--paths", "200",
        "--out-dir", str(tmp_path),
    )
    assert code == 0
    assert (tmp_path / "sar_vs_samples_wiener.csv").exists()
    assert (tmp_path / "sar_vs_samples_binomial.csv").exists()


def test_export_requires_inputs(tmp_path):
    assert run_cli("export", "--kind", "surface-slice", "--out-dir", str(tmp_path)) == 1
    assert run_cli("export", "--kind", "course-3d", "--out-dir", str(tmp_path)) == 1


def test_usage_errors_exit_one(tmp_path):
    assert run_cli("simulate") == 1  # missing --config
    assert run_cli("frobnicate") == 1  # unknown subcommand
    assert run_cli() == 1  # no subcommand
    assert run_cli("fit", "--trace", str(tmp_path / "missing.jsonl")) == 1
    assert run_cli("simulate", "--config", "no_such_scenario") == 1


def test_help_exits_zero():
    assert run_cli("--help") == 0
    assert run_cli("experiment", "--help") == 0


def test_divergence_exits_two(tmp_path):
    scn = builtin_scenario("noise_free")
    from dataclasses import replace

    windy = replace(
        scn,
        world=WorldConfig(
            kind="integrator",
            initial_position=(0.0, 0.0, 1.5),
            fields=(ConstantWind((8.0, 0.0, 0.0)),),
        ),
    )
    path = tmp_path / "diverging.json"
    save_scenario(windy, path)
    code = run_cli("simulate", "--config", str(path), "--out-dir", str(tmp_path))
    assert code == 2
