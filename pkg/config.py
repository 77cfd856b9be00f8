"""
项目配置：路径、网格 / 扫描 / 模型族参数，以及运行配置文件的加载与校验。
运行配置是一个 JSON 文件，schema 见 docs/run_config.schema.json，默认值见 data/configs/default.json。
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple


BASE_DIR = Path(__file__).resolve().parent
# 运行配置与报告统一放到 data 目录
DATA_DIR = BASE_DIR / "data"
CONFIG_DIR = DATA_DIR / "configs"
REPORT_DIR = DATA_DIR / "reports"
LOG_DIR = BASE_DIR / "logs"
LOG_FILE = LOG_DIR / "collarlab.log"
DEFAULT_CONFIG = CONFIG_DIR / "default.json"
SCHEMA_FILE = BASE_DIR / "docs" / "run_config.schema.json"

WORKERS_ENV = "COLLARLAB_WORKERS"
U_CEILING = 0.15
MIN_N_TAU = 512
MIN_SWEEP_POINTS = 4
OUTPUT_FORMATS = ("csv", "json", "markdown", "svg-lines")
SUITE_IDS = (
    "verify-calculus",
    "wp-asymptotics",
    "ricci-asymptotics",
    "green-props",
    "approximants",
    "holo-curvature",
    "perturbed",
    "lengths",
    "equivalence",
    "g2-bounds",
    "operator-identities",
)


class ConfigError(ValueError):
    """运行配置不合法，列出全部违规项。"""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("运行配置不合法:\n  - " + "\n  - ".join(self.problems))


@dataclass
class GridConfig:
    """τ 网格。n_modes 为 None 时带宽取 2K + 8。"""

    n_tau: int = 2048
    n_modes: Optional[int] = None
    panel_order: int = 4
    end_scale: float = 2.0


@dataclass
class CutoffConfig:
    c: float = 0.5
    c1: float = 0.35
    c2: float = 0.25


@dataclass
class SweepConfig:
    """u 扫描，点按 u 递减排列。"""

    u_min: float = 0.0125
    u_max: float = 0.1
    points: int = 4
    spacing: str = "geometric"
    reference_u: float = 0.025  # 常数带检查所在的 u

    def us(self) -> List[float]:
        steps = range(self.points)
        if self.spacing == "geometric":
            ratio = self.u_min / self.u_max
            return [self.u_max * ratio ** (k / (self.points - 1)) for k in steps]
        span = self.u_max - self.u_min
        return [self.u_max - span * k / (self.points - 1) for k in steps]

    def reference_index(self) -> int:
        us = self.us()
        return min(range(len(us)), key=lambda k: abs(math.log(us[k] / self.reference_u)))


@dataclass
class CollarConfig:
    """一个退化 collar。u / t 都不给时随扫描变化，给出则固定。"""

    c: float = 0.5
    phase: complex = 1.0
    u: Optional[float] = None
    t: Optional[complex] = None


@dataclass
class ModelFamilyConfig:
    """pure 模型族参数（见 differentials.model_family）。"""

    kappa: float = 1.0
    n_nondegenerate: int = 0
    nondegenerate_kappa: float = 1.0
    nondegenerate_scale: float = 1.0
    ricci_scale: float = 1.0
    laurent: Dict[int, complex] = field(default_factory=dict)
    perturbation: List[float] = field(default_factory=lambda: [1.0, 10.0])
    coefficient_bound: float = 10.0  # Laurent 系数上界 M


@dataclass
class OutputConfig:
    directory: Path = REPORT_DIR
    formats: List[str] = field(default_factory=lambda: ["csv", "json", "markdown"])


@dataclass
class RunConfig:
    """一次运行的全部参数。"""

    collars: List[CollarConfig] = field(default_factory=lambda: [CollarConfig()])
    grid: GridConfig = field(default_factory=GridConfig)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    model: ModelFamilyConfig = field(default_factory=ModelFamilyConfig)
    suites: List[str] = field(default_factory=list)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    random_fields: int = 100
    operator_configs: int = 20

    def tolerance(self, check_id: str, default: float) -> float:
        return self.tolerances.get(check_id, default)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["output"]["directory"] = str(self.output.directory)
        for collar in data["collars"]:
            for key in ("phase", "t"):
                if isinstance(collar[key], complex):
                    collar[key] = [collar[key].real, collar[key].imag]
        data["model"]["laurent"] = {str(k): [v.real, v.imag] for k, v in self.model.laurent.items()}
        return data


run_config = RunConfig()


def ensure_dirs() -> None:
    """确保必要的持久化目录存在。"""
    for path in (DATA_DIR, CONFIG_DIR, REPORT_DIR, LOG_DIR):
        path.mkdir(parents=True, exist_ok=True)


def setup_logging(level: int = logging.INFO) -> None:
    """配置全局日志，文件 + 控制台输出。"""
    ensure_dirs()
    fmt = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
    logging.basicConfig(
        level=level,
        format=fmt,
        handlers=[
            logging.FileHandler(LOG_FILE, encoding="utf-8"),
            logging.StreamHandler(),
        ],
        force=True,  # 覆盖已有配置，避免重复 handler
    )


def worker_count() -> int:
    """环境变量 COLLARLAB_WORKERS，默认 1（进程内执行）。"""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError([f"{WORKERS_ENV}={raw!r} 不是整数"]) from None
    if value < 1:
        raise ConfigError([f"{WORKERS_ENV} 必须 ≥ 1，实际 {value}"])
    return value


# ---------- 解析 ----------
def _complex(value: Any, where: str, problems: List[str]) -> Optional[complex]:
    """数字或 [re, im]。"""
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value):
        return complex(value[0], value[1])
    problems.append(f"{where}: 需要数字或 [re, im]，实际 {value!r}")
    return None


def _section(cls, data: Any, where: str, problems: List[str]):
    """按 dataclass 字段读取一个 JSON 对象，未知键记为违规。"""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        problems.append(f"{where}: 需要对象，实际 {type(data).__name__}")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in sorted(set(data) - known):
        problems.append(f"{where}.{key}: 未知字段")
    return cls(**{k: v for k, v in data.items() if k in known})


def _parse_collars(data: Any, problems: List[str]) -> List[CollarConfig]:
    if data is None:
        return [CollarConfig()]
    if not isinstance(data, list) or not data:
        problems.append("collars: 需要非空列表")
        return [CollarConfig()]
    out = []
    for k, item in enumerate(data):
        where = f"collars[{k}]"
        collar = _section(CollarConfig, item, where, problems)
        phase = _complex(collar.phase, f"{where}.phase", problems)
        collar.phase = 1.0 if phase is None else phase
        collar.t = _complex(collar.t, f"{where}.t", problems)
        if collar.u is not None and collar.t is not None:
            problems.append(f"{where}: u 与 t 只能给一个")
        if not 0.0 < collar.c < 1.0:
            problems.append(f"{where}.c: 需在 (0, 1) 内，实际 {collar.c}")
        if collar.phase == 0:
            problems.append(f"{where}.phase: 不能为 0")
        if collar.t is not None and not 0.0 < abs(collar.t) < collar.c**2:
            problems.append(f"{where}.t: 需要 0 < |t| < c²，实际 |t|={abs(collar.t):.3g}")
        if collar.u is not None and not 0.0 < collar.u <= U_CEILING:
            problems.append(f"{where}.u: 需在 (0, {U_CEILING}] 内，实际 {collar.u}")
        out.append(collar)
    return out


def _parse_model(data: Any, problems: List[str]) -> ModelFamilyConfig:
    model = _section(ModelFamilyConfig, data, "model", problems)
    laurent = {}
    for key, value in dict(model.laurent or {}).items():
        try:
            order = int(key)
        except (TypeError, ValueError):
            problems.append(f"model.laurent: 键 {key!r} 不是整数")
            continue
        coeff = _complex(value, f"model.laurent[{key}]", problems)
        if coeff is not None:
            laurent[order] = coeff
    model.laurent = laurent
    if model.n_nondegenerate < 0:
        problems.append(f"model.n_nondegenerate: 需 ≥ 0，实际 {model.n_nondegenerate}")
    if any(c < 0 for c in model.perturbation):
        problems.append(f"model.perturbation: C 必须非负，实际 {model.perturbation}")
    if not model.coefficient_bound > 0:
        problems.append(f"model.coefficient_bound: 需 > 0，实际 {model.coefficient_bound}")
    return model


def _model_bound_problems(cfg: RunConfig) -> List[str]:
    """pure 族系数相对 M 的检查：b 的耦合系数与对角 Laurent 系数和。"""
    model = cfg.model
    bound = model.coefficient_bound
    if not bound > 0:
        return []
    problems = []
    for name in ("kappa", "nondegenerate_kappa"):
        value = getattr(model, name)
        if abs(value) > bound:
            problems.append(f"model.{name}: |{value}| 超过 coefficient_bound={bound}")
    c = max((collar.c for collar in cfg.collars), default=cfg.cutoff.c)
    total = sum(abs(v) * c ** abs(k) for k, v in model.laurent.items() if k != 0)
    if total > bound * math.pi:
        problems.append(f"model.laurent: Σ|a_k|c^|k| = {total:.3g} 超过 π·coefficient_bound")
    return problems


def validate_run_config(cfg: RunConfig) -> List[str]:
    """返回全部违规项（空列表表示合法）。"""
    problems = []
    sweep = cfg.sweep
    if not 0.0 < sweep.u_min < sweep.u_max <= U_CEILING:
        problems.append(f"sweep: 需要 0 < u_min < u_max ≤ {U_CEILING}，实际 ({sweep.u_min}, {sweep.u_max})")
    if sweep.points < MIN_SWEEP_POINTS:
        problems.append(f"sweep.points: 需 ≥ {MIN_SWEEP_POINTS}，实际 {sweep.points}")
    if sweep.spacing not in ("geometric", "linear"):
        problems.append(f"sweep.spacing: 未知取值 {sweep.spacing!r}")
    if cfg.grid.n_tau < MIN_N_TAU:
        problems.append(f"grid.n_tau: 需 ≥ {MIN_N_TAU}，实际 {cfg.grid.n_tau}")
    if cfg.grid.n_modes is not None and cfg.grid.n_modes < 1:
        problems.append(f"grid.n_modes: 需 ≥ 1，实际 {cfg.grid.n_modes}")
    cut = cfg.cutoff
    if not 0.0 < cut.c2 < cut.c1 < cut.c < 1.0:
        problems.append(f"cutoff: 需要 0 < c2 < c1 < c < 1，实际 ({cut.c2}, {cut.c1}, {cut.c})")
    for collar in cfg.collars:
        if collar.c < cut.c:
            problems.append(f"collars: c={collar.c} 小于 cutoff.c={cut.c}")
    unknown = [s for s in cfg.suites if s not in SUITE_IDS]
    if unknown:
        problems.append(f"suites: 未知 suite {unknown}，可选 {list(SUITE_IDS)}")
    bad_formats = [f for f in cfg.output.formats if f not in OUTPUT_FORMATS]
    if bad_formats:
        problems.append(f"output.formats: 未知格式 {bad_formats}，可选 {list(OUTPUT_FORMATS)}")
    for check_id, tol in cfg.tolerances.items():
        if not isinstance(tol, (int, float)) or not 0.0 < tol < 1.0:
            problems.append(f"tolerances.{check_id}: 需在 (0, 1) 内，实际 {tol!r}")
    if cfg.random_fields < 1 or cfg.operator_configs < 1:
        problems.append("random_fields / operator_configs 必须 ≥ 1")
    problems.extend(_model_bound_problems(cfg))
    return problems


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """由 JSON 对象构造并校验 RunConfig。"""
    problems: List[str] = []
    if not isinstance(data, dict):
        raise ConfigError([f"顶层需要对象，实际 {type(data).__name__}"])
    known = {f.name for f in fields(RunConfig)}
    for key in sorted(set(data) - known):
        problems.append(f"{key}: 未知字段")
    try:
        output = _section(OutputConfig, data.get("output"), "output", problems)
        output.directory = Path(output.directory)
        cfg = RunConfig(
            collars=_parse_collars(data.get("collars"), problems),
            grid=_section(GridConfig, data.get("grid"), "grid", problems),
            cutoff=_section(CutoffConfig, data.get("cutoff"), "cutoff", problems),
            sweep=_section(SweepConfig, data.get("sweep"), "sweep", problems),
            model=_parse_model(data.get("model"), problems),
            suites=list(data.get("suites", [])),
            tolerances=dict(data.get("tolerances", {})),
            output=output,
            seed=int(data.get("seed", 0)),
            random_fields=int(data.get("random_fields", 100)),
            operator_configs=int(data.get("operator_configs", 20)),
        )
        problems.extend(validate_run_config(cfg))
    except (TypeError, ValueError) as exc:
        problems.append(f"字段类型错误: {exc}")
        cfg = None
    if problems:
        raise ConfigError(problems)
    return cfg


def load_run_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """读取 JSON 运行配置；overrides 覆盖顶层字段（命令行参数）。"""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"配置文件不存在: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: JSON 解析失败 ({exc})"]) from None
    if isinstance(data, dict) and overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return run_config_from_dict(data)


def collar_us(cfg: RunConfig, u: float) -> Tuple[List[float], List[complex]]:
    """扫描点 u 处各 collar 的 (u_j, 相位)。固定 t 的 collar 取 u = −π/log|t|。"""
    us, phases = [], []
    for collar in cfg.collars:
        if collar.t is not None:
            us.append(-math.pi / math.log(abs(collar.t)))
            phases.append(collar.t / abs(collar.t))
        else:
            us.append(collar.u if collar.u is not None else u)
            phases.append(collar.phase)
    return us, phases


if __name__ == "__main__":
    print(f"BASE_DIR: {BASE_DIR}")
    print(f"DATA_DIR: {DATA_DIR}")
    print(f"CONFIG_DIR: {CONFIG_DIR}")
    print(f"REPORT_DIR: {REPORT_DIR}")
    print(f"LOG_FILE: {LOG_FILE}")
    print(f"SCHEMA_FILE: {SCHEMA_FILE}")
    print(f"sweep: {run_config.sweep.us()}")
