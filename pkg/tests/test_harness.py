import json
import math

import pytest
import yaml

from conftest import GHZ
from mcpgate import cli
from mcpgate.harness import (
    COLUMNS,
    ConfigError,
    ResultRow,
    SweepPointError,
    build_params,
    emit_results,
    fig7_source,
    load_config,
    parse_config,
    preset_names,
    run_encodings_report,
    run_fig7_sweep,
    run_table1_check,
)
from mcpgate.harness.config import parse_quantity
from mcpgate.harness.io import ResultsIOError, render_results

SMALL_FIG7 = {
    "scenario": "small",
    "base": "fig7",
    "encoding": {"kind": "fock", "m": 1},
    "sweep": {"axis": "delta1_over_g1", "values": [20, 32, 40]},
    "truncation": 3,
    "fast_truncation": 3,
}


def _row(**kw):
    base = dict(scenario="s", axis="kappa_inv_us", value=35.0, fidelity=0.97, drift=1e-12,
                gate_time=2.6e-7, truncation=6, convergence_delta=2e-5, wall_time=1.0)
    base.update(kw)
    return ResultRow(**base)


# -- config ------------------------------------------------------------------

@pytest.mark.parametrize("text,kind,expected", [
    ("6.5 GHz", "frequency", 2 * math.pi * 6.5e9),
    ("1.63 MHz", "frequency", 2 * math.pi * 1.63e6),
    ("35 us", "time", 35e-6),
    ("20 µs", "time", 20e-6),
    ("0.26 ns", "time", 0.26e-9),
    (32, "dimensionless", 32.0),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("text,kind", [(6.5, "frequency"), ("6.5", "frequency"), ("6.5 GHz", "time"),
                                       ("35 furlongs", "time"), ("inf", "time"), ("3 GHz", "dimensionless")])
def test_parse_quantity_rejects(text, kind):
    with pytest.raises(ConfigError):
        parse_quantity(text, kind)


def test_inf_allowed_for_rates():
    assert math.isinf(parse_quantity("inf", "time", allow_inf=True))
    cfg = load_config("fig7")
    assert math.isinf(cfg.system.kappa_inv) and math.isinf(cfg.system.T)


def test_presets_load():
    assert {"table1", "fig6", "fig7", "verify_ideal"} <= set(preset_names())
    for name in preset_names():
        load_config(name)
    t1 = load_config("table1")
    assert t1.system.omega_eg == pytest.approx(6.5 * GHZ)
    assert t1.system.kappa_inv == pytest.approx(35e-6)
    fig6 = load_config("fig6")
    assert fig6.sweep.axis == "kappa_inv"
    assert [round(v * 1e6) for v in fig6.sweep.values] == [10, 20, 35, 50, 75, 100]
    assert len(fig6.variant_configs()) == 3


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"base": "table1", "colour": "red"})
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"base": "table1", "system": {"omega_x": "1 GHz"}})


def test_single_sweep_axis():
    with pytest.raises(ConfigError):
        parse_config({"base": "table1", "sweep": {"axis": ["kappa_inv", "T"], "values": ["1 us"]}})
    with pytest.raises(ConfigError):
        parse_config({"base": "table1", "sweep": {"axis": "g1", "values": [1]}})


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(SMALL_FIG7))
    cfg = load_config(path)
    assert cfg.scenario == "small" and cfg.truncation == 3
    assert cfg.system.coupler_levels == 2
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        load_config("no_such_preset")


# -- parameters ----------------------------------------------------------------

def test_build_params_table1():
    p, sch = build_params(load_config("table1").system)
    assert p.n_cavities == 3 and p.coupler_levels == 3
    assert p.g_prime == pytest.approx(p.g)
    assert p.Omega_p_prime == pytest.approx(p.Omega_p) and p.Omega_p == pytest.approx(sch.Omega_p)
    assert p.kappa == pytest.approx((1 / 35e-6,) * 3)
    assert (p.gamma_eg, p.gamma_fe, p.gamma_fg) == pytest.approx((1 / 40e-6, 1 / 40e-6, 1 / 20e-6))
    assert (p.gamma_e_phi, p.gamma_f_phi) == pytest.approx((1 / 20e-6, 1 / 20e-6))


def test_fig7_ladder():
    src = load_config("fig7").system
    for ratio in (10, 32, 50):
        p, sch = build_params(fig7_source(src, ratio))
        g1 = p.g[0]
        d = p.delta
        assert d[0] == pytest.approx(ratio * g1, rel=1e-12)
        assert d[1] == pytest.approx(d[0] + 10 * g1, rel=1e-12)
        assert d[2] == pytest.approx(d[0] + 20 * g1, rel=1e-12)
        assert p.g[2] == pytest.approx(math.sqrt(d[2] / d[0]) * g1, rel=1e-12)
        assert min(p.omega_c) > 0


def test_table1_check_passes():
    report = run_table1_check()
    assert report.passed
    names = {l.name for l in report.lines}
    assert len(names) == len(report.lines) >= 9


def test_encodings_report_passes():
    rows = run_encodings_report()
    assert rows and all(r.passed for r in rows)


# -- result rows and files -----------------------------------------------------

def test_result_row_validation():
    assert _row(convergence_delta=2e-4).flagged
    assert not _row().flagged
    with pytest.raises(ValueError):
        _row(fidelity=1.2)


def test_emit_header_only(tmp_path):
    path = emit_results([], tmp_path / "empty.csv")
    assert path.read_text().strip().split(",") == list(COLUMNS)


def test_emit_csv_two_rows(tmp_path):
    rows = [_row(value=10.0), _row(value=35.0, fidelity=0.99)]
    text = emit_results(rows, tmp_path / "out.csv").read_text()
    lines = text.strip().split("\n")
    assert len(lines) == 3
    assert lines[2].split(",")[:4] == ["s", "kappa_inv_us", "35", "0.99"]
    again = emit_results(rows, tmp_path / "again.csv").read_bytes()
    assert again == text.encode()


def test_emit_json(tmp_path):
    data = json.loads(emit_results([_row()], tmp_path / "out.json", "json").read_text())
    assert list(data[0]) == list(COLUMNS)
    assert data[0]["gate_time_us"] == pytest.approx(0.26)


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ResultsIOError, match="file"):
        emit_results([_row()], blocker / "sub" / "out.csv")
    with pytest.raises(ValueError):
        render_results([_row()], "xml")


# -- sweeps and CLI ---------------------------------------------------------------

def test_fig7_small_sweep_deterministic_across_workers():
    cfg = parse_config(SMALL_FIG7)
    one = run_fig7_sweep(cfg, workers=1, convergence=False)
    two = run_fig7_sweep(cfg, workers=2, convergence=False)
    assert [r.value for r in one] == [20, 32, 40]
    assert render_results(one) == render_results(two)
    assert all(0 < r.fidelity <= 1 for r in one)


def test_sweep_point_error_names_point():
    cfg = parse_config(dict(SMALL_FIG7, encoding={"kind": "fock", "m": 5}))
    with pytest.raises(SweepPointError, match="delta1_over_g1=20"):
        run_fig7_sweep(cfg, convergence=False)


def test_cli_check_table1(capsys):
    assert cli.main(["check-table1"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["fig7", "--config", "no_such_preset"]) == 2
    assert cli.main(["fig7", "--workers", "0"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["not-a-command"])


def test_cli_fig7_writes_file(tmp_path):
    cfg = tmp_path / "small.yaml"
    cfg.write_text(yaml.safe_dump(SMALL_FIG7))
    out = tmp_path / "r.csv"
    rc = cli.main(["fig7", "--config", str(cfg), "--output", str(out), "--no-convergence"])
    assert rc == 0
    assert out.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert len(out.read_text().splitlines()) == 4


def test_cli_verify_ideal_fock_reports_failure(capsys):
    # the effective-model check misses 1e-6 (see the decisions ledger), so the exit code is 1
    rc = cli.main(["verify-ideal", "-n", "2", "--encoding", "fock", "--m", "1"])
    out = capsys.readouterr()
    assert rc == 1
    assert out.out.splitlines()[0] == "state,fidelity,norm_drift,passed"
    assert "verification failed" in out.err


def test_cli_encodings_report(tmp_path):
    out = tmp_path / "enc.json"
    assert cli.main(["encodings-report", "--format", "json", "--output", str(out)]) == 0
    assert json.loads(out.read_text())
