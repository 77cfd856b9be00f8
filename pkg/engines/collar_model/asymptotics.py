#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
渐近分析：cutoff η / η₁、显式近似 ẽ、f̃、d_i，主项目标表，幂律拟合，
Poincaré / McMullen 比较，测地线长度导数检查，G₂ 抽查，以及积分恒等式的闭式解。

测得值都在 |t|-归一化坐标下，因此与目标比较时只需除以 u 的幂次。
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from engines.collar_model.collar import (
    CollarParams,
    TauGrid,
    collar_from_t,
    smooth_step,
    taper_window,
    volume_integral,
)
from engines.collar_model.curvature import CurvatureEngine
from engines.collar_model.differentials import BeltramiSet, UnknownCaseError, pure_diagonal_b
from engines.collar_model.fields import CollarField
from engines.collar_model.green import apply_box1

logger = logging.getLogger("collarlab")

R2_THRESHOLD = 0.9


class DegenerateFitError(ValueError):
    """样本不足、u 非严格递减或含零值。"""


# ---------- cutoff ----------
@dataclass(frozen=True)
class CutoffSpec:
    """外截断 c > c₁ > c₂；η 过渡区 [log c₁, log c]，η₁ 过渡区 [log c₂, log c₁]。"""

    c: float = 0.5
    c1: float = 0.35
    c2: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.c2 < self.c1 < self.c < 1.0:
            raise ValueError(f"需要 0 < c₂ < c₁ < c < 1: ({self.c2}, {self.c1}, {self.c})")


def cutoff_eval(spec: CutoffSpec, which: str, x: float, derivative: int = 0) -> float:
    """η(x) 或 η₁(x) 及其对 x 的 0..2 阶导数。"""
    if which == "eta":
        lo, hi = spec.c1, spec.c
    elif which == "eta1":
        lo, hi = spec.c2, spec.c1
    else:
        raise ValueError(f"which 只能是 eta 或 eta1: {which}")
    width = math.log(hi / lo)
    y = (x - math.log(lo)) / width
    return float(smooth_step(y, derivative)) / width**derivative


def transition_curvature_integral(grid: TauGrid, spec: CutoffSpec) -> float:
    """∫|η″(x)| dx，由外端过渡区的 u·∫|∂²_τ 窗| dτ 求得。"""
    second = taper_window(grid, spec.c, spec.c1, derivative=2)
    outer = grid.nodes > -0.5 * math.pi
    return float(grid.params.u * np.dot(grid.weights[outer], np.abs(second[outer])))


# ---------- 近似函数 ----------
def _half_sin2(grid: TauGrid, coeff: complex, spec: CutoffSpec, bandwidth: int) -> CollarField:
    profile = 0.5 * grid.sin2 * coeff * taper_window(grid, spec.c, spec.c1)
    return CollarField.from_profile(grid, 0, profile, bandwidth=bandwidth)


def _b(bset: BeltramiSet, i: int, j: int) -> complex:
    spec = bset.spec(i, j)
    return 0j if spec is None else complex(spec.b)


def build_approximants(i: int, j: int, bset: BeltramiSet, cut: CutoffSpec = CutoffSpec()) -> Dict[str, object]:
    """ẽ_{i j̄}、f̃_{i j̄} = (□+1)ẽ，i = j 时还有 d_i。每项是按 collar 排列的场列表。

    三种情形：i 退化且 j 非退化；i、j 都退化且 i ≠ j；i = j 退化。
    """
    m = bset.m
    if not 0 <= i < m or not 0 <= j < bset.n:
        raise UnknownCaseError(f"({i}, {j}) 不属于近似函数的三种情形 (m={m}, n={bset.n})")
    bw = bset.bandwidth
    e_tilde = [CollarField.zeros(g, bandwidth=bw) for g in bset.grids]
    grid_i = bset.grids[i]
    b_i = _b(bset, i, i)
    if i == j:
        e_tilde[i] = _half_sin2(grid_i, abs(b_i) ** 2, cut, bw)
    else:
        e_tilde[i] = _half_sin2(grid_i, np.conj(b_i) * _b(bset, j, i), cut, bw)
        if j < m:
            e_tilde[j] = _half_sin2(bset.grids[j], np.conj(_b(bset, i, j)) * _b(bset, j, j), cut, bw)
    out: Dict[str, object] = {
        "e": e_tilde,
        "f": [apply_box1(x) if not x.is_zero() else x for x in e_tilde],
        "d": None,
    }
    if i == j:
        d = [CollarField.zeros(g, bandwidth=bw) for g in bset.grids]
        window = taper_window(grid_i, cut.c1, cut.c2)
        cos2 = np.cos(2.0 * grid_i.nodes)
        profile = -0.125 * grid_i.sin2 * cos2 * abs(b_i) ** 2 * np.conj(b_i) * window
        d[i] = CollarField.from_profile(grid_i, 0, profile, bandwidth=bw)
        out["d"] = d
    return out


# ---------- 目标表 ----------
@dataclass(frozen=True)
class AsymptoticTarget:
    """主项预测 value ≈ constant·u^{u_exp}·|t|^{t_exp}。

    constant 为 None 时只检查 u 指数（exponent_band 内）；profile 给出非纯幂律的主项。
    """

    id: str
    constant: Optional[complex]
    u_exp: float
    t_exp: float
    source: str
    tolerance: float = 0.15
    exponent_band: float = 0.3
    profile: Optional[Callable[..., float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("u_exp", "t_exp"):
            if not float(2 * getattr(self, name)).is_integer():
                raise ValueError(f"{self.id}: {name} 必须是整数或半整数")
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError(f"{self.id}: tolerance 需在 (0, 1) 内")

    def expected(self, u: float, **kwargs) -> complex:
        """|t|-归一化坐标下的主项值。"""
        if self.profile is not None:
            return self.profile(u, **kwargs)
        if self.constant is None:
            raise ValueError(f"{self.id} 只有指数目标")
        return self.constant * u**self.u_exp

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data.pop("profile")
        if isinstance(self.constant, complex):
            data["constant"] = [self.constant.real, self.constant.imag]
        return data


def perturbed_target(u: float, C: float) -> float:
    """P_{i ī i ī} 主项（归一化）。"""
    pi4 = math.pi**4
    g1 = (9.0 / (16.0 * pi4) - 3.0 / (16.0 * pi4) / (1.0 + 2.0 * math.pi**2 * C * u / 3.0)) * u**4
    return g1 + 3.0 * C / (8.0 * math.pi**2) * u**5


def perturbed_metric_target(u: float, C: float) -> float:
    """τ̃_{i ī} 主项（归一化）。"""
    return u * u * (3.0 / (4.0 * math.pi**2) + C * u / 2.0)


def mcmullen_target(u: float) -> float:
    """pure 族 [h + ¼|b|²]/τ = 1/3 + 2π²u/3。"""
    return 1.0 / 3.0 + 2.0 * math.pi**2 * u / 3.0


def target_table() -> Dict[str, AsymptoticTarget]:
    pi, pi2, pi4 = math.pi, math.pi**2, math.pi**4
    rows = [
        AsymptoticTarget("wp-cometric-diag", 2.0, -3, 2, "WP 余度量对角"),
        AsymptoticTarget("wp-metric-diag", 0.5, 3, -2, "WP 度量对角"),
        AsymptoticTarget("A-sup", 1.0 / pi, 1, -1, "‖A_i‖₀"),
        AsymptoticTarget("f-sup", 1.0 / pi2, 2, -2, "‖f_{i ī}‖₀"),
        AsymptoticTarget("f-L2-sq", 5.0 / (16.0 * pi2), 5, -4, "|f_{i ī}|²_{L²}"),
        AsymptoticTarget("P-etilde-L1", (pi / 3.0 + 2.0 * math.sqrt(3.0)) / (2.0 * pi), 3, -2, "|P(ẽ_{i ī})|_{L¹}"),
        AsymptoticTarget("etilde-ftilde-pairing", 3.0 / (16.0 * pi2), 5, -4, "∫ẽ f̃ dv"),
        AsymptoticTarget("wp-curv-diag", 3.0 / (8.0 * pi2), 5, -4, "R_{i ī i ī}"),
        AsymptoticTarget("wp-curv-contracted", 3.0 / (4.0 * pi2), 2, -2, "h^{i ī}R_{i ī i ī}"),
        AsymptoticTarget("ricci-diag", 3.0 / (4.0 * pi2), 2, -2, "τ_{i ī}"),
        AsymptoticTarget("ricci-inverse-diag", 4.0 * pi2 / 3.0, -2, 2, "τ^{i ī}"),
        AsymptoticTarget("xi-pairing", -1.0 / (32.0 * pi**3), 6, -5, "∫ξ_i(e_{i ī})e_{i ī} dv"),
        AsymptoticTarget("t-pairing", 3.0 / (256.0 * pi4), 7, -6, "∫T(ξ_i(e_{i ī}))ξ̄_i(e_{i ī}) dv"),
        AsymptoticTarget("q-pairing", -3.0 / (64.0 * pi4), 7, -6, "∫Q_{i ī}(e_{i ī})e_{i ī} dv"),
        AsymptoticTarget("g1-term1", 9.0 / (16.0 * pi4), 4, -4, "24h^{i ī}∫T(ξ)ξ̄"),
        AsymptoticTarget("g1-term2", -9.0 / (16.0 * pi4), 4, -4, "6h^{i ī}∫Q(e)e"),
        AsymptoticTarget("g1-term3", -3.0 / (16.0 * pi4), 4, -4, "−36τ^{i ī}(h^{i ī})²|∫ξ(e)e|²"),
        AsymptoticTarget("g1-term4", 9.0 / (16.0 * pi4), 4, -4, "τ_{i ī}h^{i ī}R_{i ī i ī}"),
        AsymptoticTarget("holo-sec-diag", 3.0 / (8.0 * pi4), 4, -4, "R̃_{i ī i ī}"),
        AsymptoticTarget("ricci-normalized-holo", 2.0 / 3.0, 0, 0, "R̃_{i ī i ī}/τ_{i ī}²"),
        AsymptoticTarget("wp-normalized-holo", 3.0 / (2.0 * pi2), -1, 0, "R_{i ī i ī}/h_{i ī}²"),
        AsymptoticTarget("perturbed-metric-diag", None, 2, -2, "τ̃_{i ī}", profile=perturbed_metric_target),
        AsymptoticTarget("perturbed-holo", None, 4, -4, "P_{i ī i ī}", profile=perturbed_target),
        AsymptoticTarget("perturbed-normalized-holo", 2.0 / 3.0, 0, 0, "P_{i ī i ī}/τ̃_{i ī}²"),
        AsymptoticTarget("length-derivative", 1.0, 2, -1, "∂_t l = −πu b̄"),
        AsymptoticTarget("log-length-derivative-sq", 1.0 / (4.0 * pi2), 2, -2, "|∂ log l|² = ¼|b|²"),
        AsymptoticTarget("poincare-ratio", 3.0, 0, 0, "τ_{i ī}/p_model"),
        AsymptoticTarget("mcmullen-ratio", None, 0, 0, "[h + ¼|b|²]/τ", profile=mcmullen_target),
        AsymptoticTarget("e-approx-error", None, 4, -2, "‖e_{i ī} − ẽ_{i ī}‖₀"),
        AsymptoticTarget("xi-d-error", None, 5, -3, "‖ξ_i(ẽ) − (□+1)d_i‖₀"),
        AsymptoticTarget("t-xi-d-error", None, 5, -3, "‖Tξ_i(ẽ) − d_i‖₀"),
        AsymptoticTarget("g2-bound", None, 5, -4, "|G₂|"),
    ]
    return {row.id: row for row in rows}


def u0_gauge(us: Sequence[float], ss: Sequence[complex] = ()) -> float:
    """u₀ = Σu_j + Σ|s_j|。"""
    return float(sum(us) + sum(abs(s) for s in ss))


# ---------- 拟合 ----------
@dataclass
class FitResult:
    constant: float
    exponent: float
    r2: float
    residuals: List[float]
    correction: float = 0.0
    degenerate: bool = False

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def fit_power_law(
    samples: Sequence[Tuple[float, complex]],
    t_exponent: float = 0.0,
    correction: bool = True,
) -> FitResult:
    """log|v| + t_exponent·π/u 对 log u 的最小二乘拟合。

    correction=True 时加入一阶修正项 γu：log|v| = log C + a·log u + γu，
    返回的 C 是 u → 0 的外推常数。

    Args:
        samples: (u, value) 序列，u 严格递减
        t_exponent: value 中 |t| 的幂次（|t| = e^{−π/u}）
        correction: 是否带 γu 修正

    Returns:
        FitResult
    """
    if len(samples) < 4:
        raise DegenerateFitError(f"至少需要 4 个样本，实际 {len(samples)}")
    us = np.array([s[0] for s in samples], dtype=float)
    values = np.array([abs(complex(s[1])) for s in samples])
    if np.any(np.diff(us) >= 0.0):
        raise DegenerateFitError("u 必须严格递减")
    if np.any(values == 0.0) or not np.all(np.isfinite(values)):
        raise DegenerateFitError("样本值含零或非有限值")

    y = np.log(values) + t_exponent * math.pi / us
    columns = [np.ones_like(us), np.log(us)]
    if correction:
        columns.append(us)
    design = np.column_stack(columns)
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coeffs
    ss_res = float(np.dot(residuals, residuals))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    result = FitResult(
        constant=float(math.exp(coeffs[0])),
        exponent=float(coeffs[1]),
        r2=r2,
        residuals=[float(r) for r in residuals],
        correction=float(coeffs[2]) if correction else 0.0,
        degenerate=r2 < R2_THRESHOLD,
    )
    if result.degenerate:
        logger.warning("幂律拟合退化: r²=%.3f < %.1f", r2, R2_THRESHOLD)
    return result


# ---------- 测地线长度 ----------
@dataclass
class LengthCheck:
    u: float
    t_abs: float
    fd: complex
    predicted: complex
    log_derivative_sq: float
    log_target: float

    @property
    def rel_err(self) -> float:
        return abs(self.fd - self.predicted) / abs(self.fd)

    @property
    def log_rel_err(self) -> float:
        return abs(self.log_derivative_sq - self.log_target) / self.log_target


def geodesic_length(t_abs: float) -> float:
    """l = 2πu = −2π²/log|t|。"""
    return -2.0 * math.pi**2 / math.log(t_abs)


def geodesic_length_derivative_check(
    ts: Sequence[complex],
    c: float = 0.5,
    rel_step: float = 1e-6,
) -> List[LengthCheck]:
    """比较 ∂_t l 的有限差分与 −πu b̄（b 取 pure 族对角系数）。

    l 只依赖 |t|，∂_t l = (dl/d|t|)·t̄/(2|t|)；dl/d|t| 用中心差分。
    """
    rows = []
    for t in ts:
        params: CollarParams = collar_from_t(t, c)
        rho = params.rho
        step = rel_step * rho
        radial = (geodesic_length(rho + step) - geodesic_length(rho - step)) / (2.0 * step)
        fd = radial * np.conj(params.t) / (2.0 * rho)
        b_raw = pure_diagonal_b(params) / rho
        predicted = -math.pi * params.u * np.conj(b_raw)
        l_value = geodesic_length(rho)
        rows.append(
            LengthCheck(
                u=params.u,
                t_abs=rho,
                fd=complex(fd),
                predicted=complex(predicted),
                log_derivative_sq=float(abs(fd / l_value) ** 2 * rho**2),
                log_target=0.25 * abs(pure_diagonal_b(params)) ** 2,
            )
        )
        logger.debug("长度导数 u=%.4g: FD=%.6g, 预测=%.6g", params.u, abs(fd), abs(predicted))
    return rows


# ---------- 等价比 ----------
@dataclass
class EquivalenceRow:
    u: float
    poincare: float
    mcmullen: float

    @property
    def mcmullen_slope(self) -> float:
        """(McMullen 比 − 1/3)/u。"""
        return (self.mcmullen - 1.0 / 3.0) / self.u


def poincare_model(u: float) -> float:
    """p_model = 1/(4|t|²log²|t|)，归一化后为 u²/(4π²)。"""
    return u * u / (4.0 * math.pi**2)


def equivalence_ratios(engines: Sequence[CurvatureEngine], index: int = 0) -> List[EquivalenceRow]:
    rows = []
    for engine in engines:
        bset = engine.bset
        u = bset.grids[index].params.u
        tau = engine.tau.matrix[index, index].real
        h = engine.h.matrix[index, index].real
        log_part = sum(0.25 * abs(_b(bset, index, j)) ** 2 for j in range(bset.m))
        rows.append(EquivalenceRow(u=u, poincare=tau / poincare_model(u), mcmullen=(h + log_part) / tau))
        logger.info("等价比 u=%.4g: Poincaré %.4f, McMullen %.4f", u, rows[-1].poincare, rows[-1].mcmullen)
    return rows


# ---------- G₂ ----------
G2_CASES = {"case1": "d", "case2": "a", "case3": "c", "case4": "b"}


@dataclass
class G2Report:
    us: List[float]
    values: Dict[str, List[complex]]
    fits: Dict[str, Optional[FitResult]]

    def vanishes(self) -> bool:
        return all(v == 0 for vals in self.values.values() for v in vals)


def g2_spotcheck(engines: Sequence[CurvatureEngine], index: int = 0) -> G2Report:
    """二 collar 模型上 G₂ 四类项（非主项部分）的 u 指数。

    case1: τ_{p j̄}h^{p q̄}R 中 (p, q) ≠ (i, i)；case2: 块 (a)；case3: 块 (c)；case4: 块 (b)。
    """
    us, values = [], {case: [] for case in G2_CASES}
    for engine in engines:
        us.append(engine.grids[index].params.u)
        blocks = engine.blocks(index, index, index, index, split=index)
        for case, block in G2_CASES.items():
            values[case].append(blocks.rest[block])
    fits: Dict[str, Optional[FitResult]] = {}
    for case, vals in values.items():
        if all(v == 0 for v in vals):
            fits[case] = None
            continue
        fits[case] = fit_power_law(list(zip(us, vals)))
        logger.info("G2 %s: 指数 %.3f", case, fits[case].exponent)
    return G2Report(us=us, values=values, fits=fits)


# ---------- 积分恒等式 ----------
def radial_moment_field(grid: TauGrid, k: int) -> CollarField:
    """体积分等于 ∫ r^{k−1} sin²τ dr 的场：e^{kτ/u} sin⁴τ/(πu²)。"""
    u = grid.params.u
    profile = np.exp(k * grid.nodes / u) * grid.sin2**2 / (math.pi * u * u)
    return CollarField.from_profile(grid, 0, profile)


def radial_moment_exact(params: CollarParams, k: int) -> float:
    """∫_{c⁻¹ρ}^{c} r^{k−1} sin²τ dr 的闭式解。"""
    u = params.u
    lo, hi = params.tau_interval
    if k == 0:

        def anti(tau: float) -> float:
            return tau / 2.0 - math.sin(2.0 * tau) / 4.0

    else:
        a = k / u

        def anti(tau: float) -> float:
            growth = math.exp(a * tau)
            return growth / (2.0 * a) - growth * (a * math.cos(2.0 * tau) + 2.0 * math.sin(2.0 * tau)) / (
                2.0 * (a * a + 4.0)
            )

    return (anti(hi) - anti(lo)) / u


def calculus_identity(grid: TauGrid, k: int) -> Tuple[float, float]:
    """(求积值, 闭式值)。"""
    measured = volume_integral(radial_moment_field(grid, k)).real
    return float(measured), radial_moment_exact(grid.params, k)


def collar_area_exact(params: CollarParams) -> float:
    """∫ 1 dv = 2πu·cot(u log(1/c))。"""
    return 2.0 * math.pi * params.u / math.tan(params.cut_width)


def collar_area(grid: TauGrid) -> float:
    return float(volume_integral(CollarField.constant(grid, 1.0)).real)
