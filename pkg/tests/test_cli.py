"""Tests for the command-line interface: argument handling, output formats,
and exit codes."""

from __future__ import annotations

import numpy as np
import pytest

from aggsim.cli import main
from aggsim.graph import CommGraph
from aggsim.model import EventTrace
from aggsim.online import threshold_full, threshold_none


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def two_event_csv(tmp_path):
    p = tmp_path / "two.csv"
    EventTrace([0.0, 1.0], [[1.0], [1.0]]).to_csv(p)
    return str(p)


# ------------------------------------------------------------------- theta


def test_theta_single_system(capsys):
    code, out, _ = run_cli(
        capsys, "theta", "--mode", "none", "--N", "1", "--alpha", "1",
        "--rho", "0.5",
    )
    assert code == 0
    assert "theta=1.0" in out
    assert "CR=2.0" in out


def test_theta_full_hundred(capsys):
    code, out, _ = run_cli(
        capsys, "theta", "--mode", "full", "--N", "100", "--rho", "0.5",
    )
    assert code == 0
    assert "phi=10.0" in out
    assert "CR=11.0" in out
    assert f"theta={repr(threshold_full(100, 1, 1.0, 0.5))}" in out


def test_theta_partial_needs_x(capsys):
    code, _, err = run_cli(
        capsys, "theta", "--mode", "partial", "--N", "10", "--rho", "0.5",
    )
    assert code == 1
    assert "--x" in err
    code, out, _ = run_cli(
        capsys, "theta", "--mode", "partial", "--N", "10", "--rho", "0.5",
        "--x", "10",
    )
    assert code == 0
    assert f"theta={repr(threshold_none(10, 1, 1.0, 0.5))}" in out


def test_theta_invalid_setting(capsys):
    code, _, err = run_cli(
        capsys, "theta", "--mode", "none", "--N", "0", "--rho", "0.5",
    )
    assert code == 1 and "error:" in err


# ------------------------------------------------------------ oracle / run


def test_oracle_two_event_example(capsys, two_event_csv):
    code, out, _ = run_cli(
        capsys, "oracle", "--trace", two_event_csv, "--K", "1", "--rho", "0.5",
    )
    assert code == 0
    assert out.strip() == "1.0"


def test_run_reports_breakdown_and_beats_oracle(capsys, two_event_csv):
    code, out, _ = run_cli(
        capsys, "run", "--alg", "thb", "--trace", two_event_csv,
        "--K", "1", "--rho", "0.5", "--theta", "1.0",
    )
    assert code == 0
    total = float(next(l for l in out.splitlines() if l.startswith("total=")).split("=")[1])
    code, out, _ = run_cli(
        capsys, "oracle", "--trace", two_event_csv, "--K", "1", "--rho", "0.5",
    )
    assert total >= float(out.strip()) - 1e-9


def test_run_default_theta_is_the_bound_formula(capsys, two_event_csv):
    code, out, _ = run_cli(
        capsys, "run", "--alg", "thb", "--trace", two_event_csv, "--rho", "0.5",
    )
    assert code == 0
    assert f"theta={repr(threshold_none(1, 1, 1.0, 0.5))}" in out


def test_run_writes_schedule_csv(capsys, tmp_path):
    trace_path = tmp_path / "t.csv"
    EventTrace([0.0, 0.2, 5.0], [[1.0], [1.0], [1.0]]).to_csv(trace_path)
    out_path = tmp_path / "sched.csv"
    code, _, _ = run_cli(
        capsys, "run", "--alg", "thb", "--trace", str(trace_path),
        "--theta", "0.7", "--out", str(out_path),
    )
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "system,report_index,time,event_ids"
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0"
    assert first[3] == "0;1"  # batched events are semicolon-joined


def test_run_net_requires_matching_graph(capsys, tmp_path, two_event_csv):
    code, _, err = run_cli(
        capsys, "run", "--alg", "net", "--trace", two_event_csv,
    )
    assert code == 1 and "--graph" in err
    gpath = tmp_path / "g.txt"
    CommGraph.complete(3).save(gpath)
    code, _, err = run_cli(
        capsys, "run", "--alg", "net", "--trace", two_event_csv,
        "--graph", str(gpath),
    )
    assert code == 1 and "3 nodes" in err


def test_run_net_end_to_end(capsys, tmp_path):
    trace_path = tmp_path / "t.csv"
    EventTrace([0.0, 1.0], [[1.0, 0.5], [0.5, 1.0]]).to_csv(trace_path)
    gpath = tmp_path / "g.txt"
    CommGraph.complete(2).save(gpath)
    code, out, _ = run_cli(
        capsys, "run", "--alg", "net", "--trace", str(trace_path),
        "--graph", str(gpath), "--theta", "0.4",
    )
    assert code == 0 and "total=" in out


# -------------------------------------------------------------- generators


def test_gen_trace_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = (
        "gen-trace", "--arrivals", "weibull", "--events", "30",
        "--systems", "3", "--seed", "5",
    )
    assert run_cli(capsys, *args, "--out", str(a))[0] == 0
    assert run_cli(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    tr = EventTrace.from_csv(a)
    assert tr.n_events == 30 and tr.n_systems == 3


def test_gen_trace_ensure_k(capsys, tmp_path):
    p = tmp_path / "t.csv"
    code, _, _ = run_cli(
        capsys, "gen-trace", "--arrivals", "constant", "--events", "12",
        "--systems", "4", "--seed", "2", "--ensure-k", "2", "--out", str(p),
    )
    assert code == 0
    EventTrace.from_csv(p).check_k_feasible(2)


def test_gen_trace_rejects_bad_spec(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "gen-trace", "--events", "0", "--systems", "2",
        "--out", str(tmp_path / "x.csv"),
    )
    assert code == 1 and "error:" in err


def test_gen_graph(capsys, tmp_path):
    p = tmp_path / "g.txt"
    code, out, _ = run_cli(
        capsys, "gen-graph", "--nodes", "30", "--avg-degree", "6",
        "--seed", "2", "--roles", "mis", "--out", str(p),
    )
    assert code == 0
    assert "x=" in out
    g = CommGraph.load(p)
    assert g.n == 30
    assert 5.0 <= g.avg_degree <= 7.0
    assert len(g.forward_nodes()) > 0


def test_gen_graph_infeasible(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "gen-graph", "--nodes", "5", "--avg-degree", "5",
        "--out", str(tmp_path / "g.txt"),
    )
    assert code == 1 and "error:" in err


# ------------------------------------------------------------------- sweep


def write_config(tmp_path, text):
    p = tmp_path / "cfg.json"
    p.write_text(text)
    return str(p)


def test_sweep_outputs_and_reproducibility(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        '{"scenario": "SPU", "mode": "none", "N": [5], "K": [1],'
        ' "rho": [0.5], "runs": 2, "n_events": 30, "seed": 1}',
    )
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    assert run_cli(capsys, "sweep", "--config", cfg, "--out", str(out1))[0] == 0
    assert run_cli(capsys, "sweep", "--config", cfg, "--out", str(out2))[0] == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "r1.summary.csv").exists()
    header = out1.read_text().splitlines()[0]
    assert header.startswith("scenario_code,mode,N,K,rho,theta,seed")


def test_sweep_timing_breaks_no_columns(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        '{"scenario": "SPU", "mode": "none", "N": [4], "K": [1],'
        ' "rho": [0.5], "runs": 1, "n_events": 10, "seed": 0}',
    )
    out = tmp_path / "r.csv"
    assert run_cli(
        capsys, "sweep", "--config", cfg, "--out", str(out), "--timing"
    )[0] == 0
    row = out.read_text().splitlines()[1].split(",")
    assert row[10] != ""


def test_sweep_bad_config(capsys, tmp_path):
    cfg = write_config(tmp_path, "{oops")
    code, _, err = run_cli(
        capsys, "sweep", "--config", cfg, "--out", str(tmp_path / "r.csv")
    )
    assert code == 1 and "line" in err


# ------------------------------------------------------------- exit status


def test_malformed_trace_gives_line_diagnostic(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("event_id,time,w_1\n0,0.0,1.0\n1,zero,1.0\n")
    code, _, err = run_cli(capsys, "oracle", "--trace", str(p))
    assert code == 1
    assert "line 3" in err


def test_missing_file_is_runtime_error(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "oracle", "--trace", str(tmp_path / "nope.csv")
    )
    assert code == 2 and "error:" in err


def test_unknown_flag_rejected(capsys):
    assert run_cli(capsys, "oracle", "--bogus", "x")[0] == 1


def test_help_exits_zero(capsys):
    assert run_cli(capsys, "--help")[0] == 0
