import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import pytest

import app
import config
import lab_engine
from engines.collar_model.asymptotics import mcmullen_target
from utils import (
    CSV_COLUMNS,
    CheckRecord,
    ReportWriteError,
    SuiteReport,
    emit_report,
    parse_json,
    render_csv,
    render_json,
    render_markdown,
)


def _record(check_id: str, u: float, passed: bool = True, report_only: bool = False) -> CheckRecord:
    return CheckRecord(
        suite="lengths",
        check_id=check_id,
        u=u,
        t_abs=None,
        measured=1.0 + 0.5j,
        target=1.0 + 0j,
        rel_err=0.5,
        passed=passed,
        report_only=report_only,
    )


def _write_config(tmp_path: Path, **changes) -> Path:
    data = json.loads(config.DEFAULT_CONFIG.read_text(encoding="utf-8"))
    data.update(changes)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ---------- 配置 ----------
def test_default_config_loads() -> None:
    cfg = config.load_run_config(config.DEFAULT_CONFIG)
    assert cfg.suites == list(config.SUITE_IDS)
    assert cfg.sweep.us() == pytest.approx([0.1, 0.05, 0.025, 0.0125])
    assert cfg.sweep.reference_index() == 2
    assert cfg.model.perturbation == [1.0, 10.0]
    assert tuple(lab_engine.SUITES) == config.SUITE_IDS


@pytest.mark.parametrize(
    "changes",
    [
        {"sweep": {"u_min": 0.05, "u_max": 0.01}},
        {"sweep": {"points": 3}},
        {"grid": {"n_tau": 128}},
        {"suites": ["no-such-suite"]},
        {"output": {"formats": ["pdf"]}},
        {"collars": [{"c": 0.5, "u": 0.05, "t": 0.001}]},
        {"collars": [{"c": 0.5, "t": 0.5}]},
        {"tolerances": {"ricci-diag": 2.0}},
        {"model": {"kappa": 50.0}},
        {"model": {"coefficient_bound": 0}},
        {"model": {"laurent": {"1": 100.0}}},
        {"unknown_key": 1},
    ],
)
def test_invalid_config(tmp_path: Path, changes: dict) -> None:
    with pytest.raises(config.ConfigError) as info:
        config.load_run_config(_write_config(tmp_path, **changes))
    assert info.value.problems


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(config.ConfigError):
        config.load_run_config(tmp_path / "missing.json")


def test_collar_us_with_pinned_t(tmp_path: Path) -> None:
    path = _write_config(tmp_path, collars=[{"c": 0.5}, {"c": 0.5, "t": [0.0, 4.5399929762484854e-05]}])
    cfg = config.load_run_config(path)
    us, phases = config.collar_us(cfg, 0.05)
    assert us[0] == 0.05
    assert us[1] == pytest.approx(math.pi / 10.0)
    assert phases[1] == pytest.approx(1j)


def test_worker_count(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(config.WORKERS_ENV, raising=False)
    assert config.worker_count() == 1
    monkeypatch.setenv(config.WORKERS_ENV, "many")
    with pytest.raises(config.ConfigError):
        config.worker_count()
    monkeypatch.setenv(config.WORKERS_ENV, "0")
    with pytest.raises(config.ConfigError):
        config.worker_count()


def test_schema_matches_config() -> None:
    schema = json.loads(config.SCHEMA_FILE.read_text(encoding="utf-8"))
    props = schema["properties"]

    def names(cls) -> set:
        return {f.name for f in dataclasses.fields(cls)}

    assert set(props) == names(config.RunConfig)
    assert set(props["collars"]["items"]["properties"]) == names(config.CollarConfig)
    sections = {
        "grid": config.GridConfig,
        "cutoff": config.CutoffConfig,
        "sweep": config.SweepConfig,
        "model": config.ModelFamilyConfig,
        "output": config.OutputConfig,
    }
    for name, cls in sections.items():
        assert set(props[name]["properties"]) == names(cls), name
        for key, entry in props[name]["properties"].items():
            if "default" in entry:
                assert entry["default"] == getattr(cls(), key), f"{name}.{key}"
    for key in ("seed", "random_fields", "operator_configs"):
        assert props[key]["default"] == getattr(config.RunConfig(), key)

    assert tuple(props["suites"]["items"]["enum"]) == config.SUITE_IDS
    assert tuple(props["output"]["properties"]["formats"]["items"]["enum"]) == config.OUTPUT_FORMATS
    assert props["grid"]["properties"]["n_tau"]["minimum"] == config.MIN_N_TAU
    assert props["sweep"]["properties"]["points"]["minimum"] == config.MIN_SWEEP_POINTS
    assert props["sweep"]["properties"]["u_max"]["maximum"] == config.U_CEILING
    assert props["collars"]["items"]["properties"]["u"]["maximum"] == config.U_CEILING

    default = json.loads(config.DEFAULT_CONFIG.read_text(encoding="utf-8"))
    assert set(default) <= set(props)


# ---------- 报告 ----------
def test_render_csv() -> None:
    report = SuiteReport("lengths", [_record("length-derivative", 0.05)])
    rows = list(csv.reader(io.StringIO(render_csv([report]))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1][0] == "lengths"
    assert rows[1][-1] == "true"
    assert rows[1][3] == ""
    assert render_csv([]).strip() == ",".join(CSV_COLUMNS)


def test_json_round_trip() -> None:
    report = SuiteReport("lengths", [_record("length-derivative", 0.05), _record("x", 0.1, passed=False)])
    parsed = parse_json(render_json([report]))
    assert parsed[0].records == report.records
    assert json.loads(render_json([report]))["passed"] is False


def test_report_only_does_not_fail_suite() -> None:
    report = SuiteReport("lengths", [_record("a", 0.1), _record("b", 0.1, passed=False, report_only=True)])
    assert report.passed
    assert report.failing_ids() == []
    report.records.append(_record("c", 0.1, passed=False))
    assert not report.passed
    assert report.failing_ids() == ["c"]


def test_markdown() -> None:
    assert "未选择任何 suite" in render_markdown([])
    report = SuiteReport("lengths", [_record("c", 0.1, passed=False)])
    text = render_markdown([report])
    assert "| lengths |" in text
    assert "`c`" in text


def test_emit_report(tmp_path: Path) -> None:
    records = [_record("a-1", 0.1), _record("a-1", 0.05), _record("b-2", 0.1, passed=False)]
    written = emit_report([SuiteReport("lengths", records)], ["csv", "json", "markdown", "svg-lines"], tmp_path)
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "report.md").exists()
    assert len(written["svg-lines"]) == 2
    assert sorted(p.name for p in (tmp_path / "svg").glob("*.svg")) == ["a-1.svg", "b-2.svg"]
    assert "<svg" in (tmp_path / "svg" / "a-1.svg").read_text(encoding="utf-8")


def test_emit_report_unwritable(tmp_path: Path) -> None:
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ReportWriteError):
        emit_report([], ["csv"], blocker / "out")


# ---------- 命令行 ----------
def test_cli_bad_config_exits_2(tmp_path: Path) -> None:
    path = _write_config(tmp_path, grid={"n_tau": 16})
    assert app.main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == app.EXIT_CONFIG
    assert app.main(["run", "--config", str(tmp_path / "missing.json")]) == app.EXIT_CONFIG


def test_cli_unknown_suite_exits_2(tmp_path: Path) -> None:
    argv = ["run", "--config", str(config.DEFAULT_CONFIG), "--suite", "nope", "--out", str(tmp_path)]
    assert app.main(argv) == app.EXIT_CONFIG


def test_cli_unwritable_output_exits_2(tmp_path: Path) -> None:
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    path = _write_config(tmp_path, suites=[])
    assert app.main(["run", "--config", str(path), "--out", str(blocker / "out")]) == app.EXIT_CONFIG


def test_cli_empty_suites(tmp_path: Path) -> None:
    path = _write_config(tmp_path, suites=[])
    out = tmp_path / "out"
    assert app.main(["run", "--config", str(path), "--out", str(out), "--format", "csv"]) == app.EXIT_OK
    lines = (out / "report.csv").read_text(encoding="utf-8").splitlines()
    assert lines == [",".join(CSV_COLUMNS)]


def test_cli_lengths_suite(tmp_path: Path) -> None:
    out = tmp_path / "out"
    argv = ["run", "--config", str(config.DEFAULT_CONFIG), "--suite", "lengths", "--out", str(out), "--format", "csv,json"]
    assert app.main(argv) == app.EXIT_OK
    data = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert data["passed"] is True
    ids = {r["check_id"] for r in data["suites"][0]["records"]}
    assert {"length-derivative", "log-length-derivative-sq", "length-derivative-oracle"} <= ids


def test_cli_reports_are_deterministic(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(config.WORKERS_ENV, raising=False)
    path = _write_config(
        tmp_path,
        grid={"n_tau": 1024},
        sweep={"u_min": 0.025, "u_max": 0.1, "points": 4},
        random_fields=3,
    )
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = [
            "run", "--config", str(path),
            "--suite", "lengths", "--suite", "green-props",
            "--seed", "7", "--out", str(out), "--format", "csv,json",
        ]
        code = app.main(argv)
        runs.append((code, (out / "report.csv").read_bytes(), (out / "report.json").read_bytes()))
    assert runs[0][0] in (app.EXIT_OK, app.EXIT_FAILED)
    assert runs[0] == runs[1]


def test_mcmullen_variation_carries_note() -> None:
    cfg = config.RunConfig()
    checks = lab_engine.CheckSet("equivalence", cfg)
    points = [
        {"u": u, "poincare": 3.0, "mcmullen": mcmullen_target(u), "slope": 2.0 * math.pi**2 / 3.0}
        for u in cfg.sweep.us()
    ]
    lab_engine._equivalence_assemble(checks, points)
    by_id = {r.check_id: r for r in checks.records}
    raw = by_id["mcmullen-ratio:variation"]
    assert raw.report_only
    assert "mcmullen-slope:variation" in raw.notes
    assert by_id["mcmullen-slope:variation"].passed
    assert not by_id["mcmullen-slope:variation"].notes
    text = render_markdown([SuiteReport("equivalence", checks.records)])
    assert "## 说明" in text
    assert "`mcmullen-ratio:variation`" in text
