"""
实用函数：检查记录、suite 报告，以及 csv / json / markdown / svg-lines 报告的落盘。

所有文件先写临时文件再 os.replace，保证一次写完。
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

logger = logging.getLogger("collarlab")

CSV_COLUMNS = (
    "suite",
    "check_id",
    "u",
    "t_abs",
    "measured_re",
    "measured_im",
    "target_re",
    "target_im",
    "rel_err",
    "pass",
)


class ReportWriteError(OSError):
    """输出目录不可写。"""


@dataclass
class CheckRecord:
    """一条检查：测得值、目标值、相对误差与是否通过。

    report_only 的记录只做报告，不影响 suite 的总体结论。
    """

    suite: str
    check_id: str
    u: Optional[float]
    t_abs: Optional[float]
    measured: complex
    target: Optional[complex]
    rel_err: Optional[float]
    passed: bool
    report_only: bool = False
    notes: str = ""

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["measured"] = [self.measured.real, self.measured.imag]
        data["target"] = None if self.target is None else [self.target.real, self.target.imag]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CheckRecord":
        data = dict(data)
        data["measured"] = complex(*data["measured"])
        if data.get("target") is not None:
            data["target"] = complex(*data["target"])
        return cls(**data)


@dataclass
class SuiteReport:
    """一个 suite 的全部检查。wall_clock 只写入 markdown 与日志。"""

    suite: str
    records: List[CheckRecord] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records if not r.report_only)

    def failing_ids(self) -> List[str]:
        seen: List[str] = []
        for r in self.records:
            if not r.report_only and not r.passed and r.check_id not in seen:
                seen.append(r.check_id)
        return seen

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SuiteReport":
        return cls(suite=data["suite"], records=[CheckRecord.from_dict(r) for r in data["records"]])


def relative_error(measured: complex, target: complex) -> float:
    """|measured − target| / |target|；target 为 0 时返回 |measured|。"""
    if target == 0:
        return float(abs(measured))
    return float(abs(measured - target) / abs(target))


def overall_passed(reports: Iterable[SuiteReport]) -> bool:
    return all(r.passed for r in reports)


# ---------- 落盘 ----------
def _prepare_dir(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportWriteError(f"无法创建输出目录 {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ReportWriteError(f"输出目录不可写: {out_dir}")
    return out_dir


def atomic_write_text(path: Path, text: str) -> Path:
    """写入同目录临时文件后替换目标文件。"""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise ReportWriteError(f"写入 {path} 失败: {exc}") from exc
    return path


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def render_csv(reports: Sequence[SuiteReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        for r in report.records:
            target = r.target
            writer.writerow(
                [
                    r.suite,
                    r.check_id,
                    _fmt(r.u),
                    _fmt(r.t_abs),
                    _fmt(r.measured.real),
                    _fmt(r.measured.imag),
                    _fmt(None if target is None else target.real),
                    _fmt(None if target is None else target.imag),
                    _fmt(r.rel_err),
                    "true" if r.passed else "false",
                ]
            )
    return buf.getvalue()


def render_json(reports: Sequence[SuiteReport]) -> str:
    data = {
        "passed": overall_passed(reports),
        "suites": [r.to_dict() for r in reports],
    }
    return json.dumps(data, indent=2, ensure_ascii=False)


def parse_json(text: str) -> List[SuiteReport]:
    return [SuiteReport.from_dict(s) for s in json.loads(text)["suites"]]


def render_markdown(reports: Sequence[SuiteReport]) -> str:
    lines = ["# CollarLab 运行报告", ""]
    if not reports:
        lines.append("（未选择任何 suite）")
        return "\n".join(lines) + "\n"
    lines += ["| suite | 检查数 | 失败数 | 结论 | 用时 (s) |", "|---|---|---|---|---|"]
    for report in reports:
        failing = [r for r in report.records if not r.report_only and not r.passed]
        status = "通过" if report.passed else "失败"
        lines.append(f"| {report.suite} | {len(report.records)} | {len(failing)} | {status} | {report.wall_clock:.1f} |")
    for report in reports:
        if report.passed:
            continue
        lines += ["", f"## {report.suite} 失败项", ""]
        for check_id in report.failing_ids():
            lines.append(f"- `{check_id}`")
    notes = {}
    for report in reports:
        for r in report.records:
            if r.notes:
                notes.setdefault((report.suite, r.check_id), r.notes)
    if notes:
        lines += ["", "## 说明", ""]
        for (suite, check_id), text in notes.items():
            lines.append(f"- {suite} `{check_id}`: {text}")
    return "\n".join(lines) + "\n"


def emit_report(
    reports: Sequence[SuiteReport],
    formats: Sequence[str],
    out_dir: Path,
) -> Dict[str, List[Path]]:
    """按格式写出报告文件。

    Args:
        reports: suite 报告列表
        formats: csv / json / markdown / svg-lines 的子集
        out_dir: 输出目录

    Returns:
        格式 → 写出的文件列表
    """
    out_dir = _prepare_dir(out_dir)
    written: Dict[str, List[Path]] = {}
    if "csv" in formats:
        written["csv"] = [atomic_write_text(out_dir / "report.csv", render_csv(reports))]
    if "json" in formats:
        written["json"] = [atomic_write_text(out_dir / "report.json", render_json(reports))]
    if "markdown" in formats:
        written["markdown"] = [atomic_write_text(out_dir / "report.md", render_markdown(reports))]
    if "svg-lines" in formats:
        from Visualize_report.utils.draw_utils import draw_rel_err_lines

        svg_dir = _prepare_dir(out_dir / "svg")
        records = [r for report in reports for r in report.records]
        written["svg-lines"] = draw_rel_err_lines(records, svg_dir)
    for fmt, paths in written.items():
        logger.info("报告 %s: %s", fmt, ", ".join(p.name for p in paths[:5]) + (" ..." if len(paths) > 5 else ""))
    return written


def finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)
