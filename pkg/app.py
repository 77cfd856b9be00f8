"""
命令行入口：读取运行配置、执行所选 suite、写出报告。
运行：
    python app.py run --config data/configs/default.json --suite wp-asymptotics --format csv,json

退出码：0 全部通过；1 有非 report-only 的检查未通过；2 配置错误或输出目录不可写。
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import config
import lab_engine
import utils

logger = logging.getLogger("collarlab")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _formats(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collarlab", description="CollarLab: 双曲 collar 上的曲率渐近数值实验")
    sub = p.add_subparsers(dest="cmd", required=True)
    pr = sub.add_parser("run", help="执行 suite 并写出报告")
    pr.add_argument("--config", type=Path, default=config.DEFAULT_CONFIG, help="运行配置 (JSON)")
    pr.add_argument(
        "--suite",
        action="append",
        default=None,
        help=f"suite 编号，可重复；缺省取配置中的 suites。可选: {', '.join(config.SUITE_IDS)}",
    )
    pr.add_argument("--out", type=Path, default=None, help="输出目录，覆盖 output.directory")
    pr.add_argument("--format", type=_formats, default=None, help="逗号分隔: csv,json,markdown,svg-lines")
    pr.add_argument("--seed", type=int, default=None, help="green-props 等随机输入的种子")
    return p


def load_config(args: argparse.Namespace) -> config.RunConfig:
    """配置文件 + 命令行覆盖，校验失败抛 ConfigError。"""
    cfg = config.load_run_config(args.config, overrides={"suites": args.suite, "seed": args.seed})
    if args.out is not None:
        cfg.output.directory = args.out
    if args.format is not None:
        cfg.output.formats = args.format
    problems = config.validate_run_config(cfg)
    if problems:
        raise config.ConfigError(problems)
    return cfg


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args)
        config.worker_count()
    except config.ConfigError as exc:
        for problem in exc.problems:
            logger.error("配置错误: %s", problem)
        return EXIT_CONFIG

    logger.info("运行 suites: %s (种子 %d)", ", ".join(cfg.suites) or "（无）", cfg.seed)
    reports = lab_engine.run_suites(cfg)
    try:
        written = utils.emit_report(reports, cfg.output.formats, cfg.output.directory)
    except utils.ReportWriteError as exc:
        logger.error("报告写出失败: %s", exc)
        return EXIT_CONFIG
    for fmt, paths in written.items():
        print(f"{fmt}: {len(paths)} 个文件 -> {Path(cfg.output.directory).resolve()}")

    if utils.overall_passed(reports):
        logger.info("全部检查通过")
        return EXIT_OK
    for report in reports:
        for check_id in report.failing_ids():
            logger.error("未通过: %s/%s", report.suite, check_id)
    return EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    config.setup_logging()
    config.ensure_dirs()
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        return cmd_run(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
