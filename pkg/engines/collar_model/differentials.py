#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
collar 上的全纯二次微分与调和 Beltrami 微分（Laurent 系数数据），以及
Weil–Petersson 度量 / 余度量的求积。

所有系数都在 |t|-归一化坐标 w_i = t_i/|t_i| 下给出：退化指标 i 的每个
张量槽位带一个 |t_i| 因子，例如对角 b̂_i = −(u_i/π)·t_i/|t_i|。
指标从 0 开始编号，前 m 个为退化方向（指标 i ↔ collar i）。
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from engines.collar_model.collar import CollarParams, TauGrid, collar_from_u, volume_integral
from engines.collar_model.fields import CollarField, default_bandwidth, sum_fields

logger = logging.getLogger("collarlab")

HERMITIAN_TOLERANCE = 1e-12
DEFAULT_COEFFICIENT_BOUND = 10.0  # M


class CoefficientBoundError(ValueError):
    """Laurent 系数违反配置的上界。"""


class UnknownCaseError(ValueError):
    """指标组合不属于三种情形之一。"""


class SingularMetricError(ValueError):
    """度量矩阵非正定。"""


class NonHermitianError(ValueError):
    """度量矩阵超出容差地非 Hermite。"""


class Case(str, Enum):
    DIAGONAL = "diagonal"  # i = j ≤ m
    DEGENERATE = "degenerate"  # i ≤ m, i ≠ j
    NONDEGENERATE = "nondegenerate"  # i ≥ m+1


class MetricKind(str, Enum):
    WP = "WP"
    WP_COMETRIC = "WP-cometric"
    RICCI = "Ricci"
    PERTURBED_RICCI = "perturbed-Ricci"


def case_of(i: int, j: int, m: int) -> Case:
    """指标 i 在 collar j 上的情形。"""
    if not 0 <= j < m:
        raise UnknownCaseError(f"collar {j} 不存在 (m={m})")
    if i < 0:
        raise UnknownCaseError(f"非法指标 {i}")
    if i >= m:
        return Case.NONDEGENERATE
    return Case.DIAGONAL if i == j else Case.DEGENERATE


def _laurent_sums(coeffs: Mapping[int, complex], c: float) -> Tuple[float, float]:
    neg = sum(abs(a) * c ** (-k) for k, a in coeffs.items() if k < 0)
    pos = sum(abs(a) * c**k for k, a in coeffs.items() if k > 0)
    return neg, pos


@dataclass(frozen=True)
class QuadDiffSpec:
    """φ_i 在 collar j 上的 Laurent 数据 (α_k, β)。"""

    index: int
    collar: int
    case: Case
    beta: complex = 0j
    alpha: Mapping[int, complex] = field(default_factory=dict)

    @property
    def laurent_order(self) -> int:
        return max((abs(k) for k in self.alpha), default=0)

    def validate(self, c: float, bound: float) -> None:
        """Σ_{k<0}|α_k|c^{−k} ≤ M 且 Σ_{k>0}|α_k|c^k ≤ M。"""
        neg, pos = _laurent_sums(self.alpha, c)
        if neg > bound or pos > bound:
            raise CoefficientBoundError(
                f"φ_{self.index} 于 collar {self.collar}: 系数和 ({neg:.3g}, {pos:.3g}) 超过 M={bound:.3g}"
            )


@dataclass(frozen=True)
class BeltramiSpec:
    """A_i 在 collar j 上的 Laurent 数据 (a_k, b)。"""

    index: int
    collar: int
    case: Case
    b: complex = 0j
    a: Mapping[int, complex] = field(default_factory=dict)

    @property
    def laurent_order(self) -> int:
        return max((abs(k) for k in self.a), default=0)

    def validate(self, c: float, u_collar: float, u_index: float, bound: float) -> None:
        """按情形检查系数和（|t|-归一化后的量级）。

        nondegenerate: Σ ≤ M·u_j⁻²，|b| ≤ M·u_j
        degenerate:    Σ ≤ M·u_j⁻²·u_i³，|b| ≤ M·u_j·u_i³
        diagonal:      Σ_{k≥1} ≤ M·u_j，|b| ≤ M·u_j
        """
        neg, pos = _laurent_sums(self.a, c)
        if self.case is Case.NONDEGENERATE:
            limit, b_limit = bound / u_collar**2, bound * u_collar
        elif self.case is Case.DEGENERATE:
            limit, b_limit = bound * u_index**3 / u_collar**2, bound * u_collar * u_index**3
        else:
            limit, b_limit = bound * u_collar, bound * u_collar
        if neg + pos > limit or abs(self.b) > b_limit:
            raise CoefficientBoundError(
                f"A_{self.index} 于 collar {self.collar} ({self.case.value}): "
                f"Σ={neg + pos:.3g} (上界 {limit:.3g}), |b|={abs(self.b):.3g} (上界 {b_limit:.3g})"
            )


@dataclass(frozen=True, eq=False)
class BeltramiSet:
    """一组 Beltrami 数据：collar 网格 + (i, j) → BeltramiSpec + 非退化常数块。"""

    grids: Tuple[TauGrid, ...]
    specs: Mapping[Tuple[int, int], BeltramiSpec]
    n: int
    nondegenerate_wp: Optional[np.ndarray] = None
    nondegenerate_ricci: Optional[np.ndarray] = None
    bandwidth: int = default_bandwidth()
    coefficient_bound: Optional[float] = None  # M；None 时不检查

    @property
    def m(self) -> int:
        return len(self.grids)

    def spec(self, i: int, j: int) -> Optional[BeltramiSpec]:
        return self.specs.get((i, j))

    def index_u(self, i: int, j: int) -> float:
        """退化指标 i 自己的 u_i；非退化指标取 collar j 的 u。"""
        return self.grids[i if i < self.m else j].params.u

    def validate(self) -> None:
        if self.coefficient_bound is None:
            return
        for (i, j), spec in self.specs.items():
            grid = self.grids[j]
            spec.validate(grid.params.c, grid.params.u, self.index_u(i, j), self.coefficient_bound)


@dataclass(frozen=True, eq=False)
class QuadDiffSet:
    """一组二次微分数据；remainder 为紧部分的常数余项（默认零）。"""

    grids: Tuple[TauGrid, ...]
    specs: Mapping[Tuple[int, int], QuadDiffSpec]
    n: int
    remainder: Optional[np.ndarray] = None
    bandwidth: int = default_bandwidth()
    coefficient_bound: Optional[float] = None

    @property
    def m(self) -> int:
        return len(self.grids)

    def spec(self, i: int, j: int) -> Optional[QuadDiffSpec]:
        return self.specs.get((i, j))

    def validate(self) -> None:
        if self.coefficient_bound is None:
            return
        for (_, j), spec in self.specs.items():
            spec.validate(self.grids[j].params.c, self.coefficient_bound)


@dataclass(frozen=True)
class MetricMatrix:
    """n×n Hermite 度量矩阵 M[i, j] = g_{i j̄}。"""

    matrix: np.ndarray
    kind: MetricKind

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def hermitian_defect(self) -> float:
        scale = max(float(np.max(np.abs(self.matrix))), 1e-300)
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) / scale

    def is_positive_definite(self) -> bool:
        if not np.all(np.isfinite(self.matrix)):
            return False
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return bool(np.all(np.linalg.eigvalsh(herm) > 0.0))

    def inverse(self) -> np.ndarray:
        """逆矩阵 G[α, β] = g^{α β̄}，满足 Σ_β g^{α β̄} g_{γ β̄} = δ_{αγ}。"""
        return np.linalg.inv(self.matrix.T)


def check_metric(matrix: np.ndarray, kind: MetricKind) -> MetricMatrix:
    metric = MetricMatrix(matrix=matrix, kind=kind)
    defect = metric.hermitian_defect()
    if defect > HERMITIAN_TOLERANCE:
        raise NonHermitianError(f"{kind.value} 矩阵 Hermite 偏差 {defect:.3g}")
    return metric


def beltrami_field(
    spec: Optional[BeltramiSpec],
    grid: TauGrid,
    bandwidth: int = default_bandwidth(),
    bound: Optional[float] = None,
    u_index: Optional[float] = None,
) -> CollarField:
    """A_i = (z/z̄) sin²τ (p̄ + b̄)，p(z) = Σ_{k≤−1} a_k ρ^{−k} z^k + Σ_{k≥1} a_k z^k。

    z/z̄ 贡献角向 mode +2；conj(a_k) z̄^k 进入 mode 2 − k。
    给出 bound 时先按情形检查系数和，违反抛 CoefficientBoundError；
    u_index 是退化情形下指标 i 的 u_i，默认取本 collar 的 u。
    """
    if spec is not None and bound is not None:
        u_j = grid.params.u
        spec.validate(grid.params.c, u_j, u_j if u_index is None else u_index, bound)
    if spec is None or (spec.b == 0 and not any(spec.a.values())):
        return CollarField.zeros(grid, bandwidth=bandwidth)
    u = grid.params.u
    s2 = grid.sin2
    modes: Dict[int, np.ndarray] = {}

    def put(n: int, profile: np.ndarray) -> None:
        modes[n] = modes[n] + profile if n in modes else profile

    if spec.b != 0:
        put(2, np.conj(spec.b) * s2.astype(complex))
    for k, a_k in spec.a.items():
        if k == 0 or a_k == 0:
            continue
        if k > 0:
            radial = np.exp(k * grid.nodes / u)
        else:
            # ρ^{|k|} r^{−|k|} = e^{−|k|(τ+π)/u}
            radial = np.exp(-abs(k) * (grid.nodes + math.pi) / u)
        put(2 - k, np.conj(a_k) * radial * s2)
    return CollarField(grid=grid, modes=modes, r_power=0, bandwidth=bandwidth)


def qdiff_prefactor(spec: QuadDiffSpec, phases: Sequence[complex]) -> complex:
    """情形 (1)–(3) 的前因子：1、−t_j/π、−t_i/π（归一化坐标下 t → t/|t|）。"""
    if spec.case is Case.NONDEGENERATE:
        return 1.0 + 0j
    if spec.case is Case.DIAGONAL:
        return -phases[spec.collar] / math.pi
    if spec.case is Case.DEGENERATE:
        return -phases[spec.index] / math.pi
    raise UnknownCaseError(f"未知情形: {spec.case}")


def qdiff_field(
    spec: Optional[QuadDiffSpec],
    grid: TauGrid,
    phases: Sequence[complex],
    bandwidth: int = default_bandwidth(),
    bound: Optional[float] = None,
) -> CollarField:
    """φ_i 在 collar j 上：prefactor·z⁻²(q + β)，q(z) = Σ_{k<0} α_k t_j^{−k} z^k + Σ_{k>0} α_k z^k。

    返回 r 幂次 −2 的场，z^{k−2} 进入 mode k − 2。
    """
    if spec is not None and bound is not None:
        spec.validate(grid.params.c, bound)
    if spec is None or (spec.beta == 0 and not any(spec.alpha.values())):
        return CollarField.zeros(grid, r_power=-2, bandwidth=bandwidth)
    if not isinstance(spec.case, Case):
        raise UnknownCaseError(f"未知情形: {spec.case}")
    pref = qdiff_prefactor(spec, phases)
    u = grid.params.u
    phase_j = phases[spec.collar]
    modes: Dict[int, np.ndarray] = {}
    if spec.beta != 0:
        modes[-2] = np.full(grid.resolution, pref * spec.beta, dtype=complex)
    for k, alpha in spec.alpha.items():
        if k == 0 or alpha == 0:
            continue
        if k > 0:
            profile = pref * alpha * np.exp(k * grid.nodes / u)
        else:
            profile = pref * alpha * phase_j ** abs(k) * np.exp(-abs(k) * (grid.nodes + math.pi) / u)
        n = k - 2
        modes[n] = modes[n] + profile if n in modes else profile
    return CollarField(grid=grid, modes=modes, r_power=-2, bandwidth=bandwidth)


def pure_diagonal_b(params: CollarParams) -> complex:
    """pure 族对角系数 b̂_i = −(u_i/π)·t_i/|t_i|。"""
    return -(params.u / math.pi) * params.phase


def _phases(grids: Sequence[TauGrid]) -> List[complex]:
    return [g.params.phase for g in grids]


def beltrami_fields(bset: BeltramiSet, i: int) -> List[CollarField]:
    """A_i 在每个 collar 上的场。"""
    return [
        beltrami_field(bset.spec(i, j), grid, bset.bandwidth, bset.coefficient_bound, bset.index_u(i, j))
        for j, grid in enumerate(bset.grids)
    ]


def qdiff_fields(qset: QuadDiffSet, i: int) -> List[CollarField]:
    phases = _phases(qset.grids)
    return [
        qdiff_field(qset.spec(i, j), grid, phases, qset.bandwidth, qset.coefficient_bound)
        for j, grid in enumerate(qset.grids)
    ]


def wp_metric(bset: BeltramiSet) -> MetricMatrix:
    """h_{i j̄} = Σ_collars ∫ A_i Ā_j dv（非退化块加上常数块）。"""
    fields = [beltrami_fields(bset, i) for i in range(bset.n)]
    matrix = np.zeros((bset.n, bset.n), dtype=complex)
    for i in range(bset.n):
        for j in range(bset.n):
            matrix[i, j] = sum(volume_integral(a * b.conj()) for a, b in zip(fields[i], fields[j]))
    if bset.nondegenerate_wp is not None and bset.n > bset.m:
        matrix[bset.m :, bset.m :] += bset.nondegenerate_wp
    return check_metric(matrix, MetricKind.WP)


def wp_cometric(qset: QuadDiffSet) -> MetricMatrix:
    """h^{i j̄} = Σ_collars ∫ φ_i φ̄_j λ⁻² dv。"""
    fields = [qdiff_fields(qset, i) for i in range(qset.n)]
    inv_sq = [CollarField.inverse_metric(g, qset.bandwidth) for g in qset.grids]
    inv_sq = [w * w for w in inv_sq]
    matrix = np.zeros((qset.n, qset.n), dtype=complex)
    for i in range(qset.n):
        for j in range(qset.n):
            matrix[i, j] = sum(
                volume_integral(a * b.conj() * w) for a, b, w in zip(fields[i], fields[j], inv_sq)
            )
    if qset.remainder is not None:
        matrix += qset.remainder
    metric = check_metric(matrix, MetricKind.WP_COMETRIC)
    if not metric.is_positive_definite():
        raise SingularMetricError("WP 余度量非正定")
    return metric


@dataclass
class DualityEntry:
    index: int
    collar: int
    distance: float
    norm: float

    @property
    def relative(self) -> float:
        if self.norm == 0.0:
            return 0.0 if self.distance == 0.0 else math.inf
        return self.distance / self.norm


@dataclass
class DualityReport:
    entries: List[DualityEntry]

    @property
    def max_relative(self) -> float:
        return max((e.relative for e in self.entries), default=0.0)


def dual_fields(qset: QuadDiffSet, h: MetricMatrix, i: int) -> List[CollarField]:
    """A_i^{dual} = λ⁻¹ Σ_l h_{i l̄} φ̄_l，逐 collar。"""
    q_all = [qdiff_fields(qset, l) for l in range(qset.n)]
    out = []
    for j, grid in enumerate(qset.grids):
        lam_inv = CollarField.inverse_metric(grid, qset.bandwidth)
        acc = sum_fields((q_all[l][j].conj() * h.matrix[i, l] for l in range(qset.n)), grid)
        out.append(lam_inv * acc if not acc.is_zero() else CollarField.zeros(grid, bandwidth=qset.bandwidth))
    return out


def duality_check(qset: QuadDiffSet, bset: BeltramiSet, h: MetricMatrix) -> DualityReport:
    """比较 λ⁻¹hφ̄ 与 beltrami_field，报告 sup 距离。"""
    entries = []
    for i in range(bset.n):
        duals = dual_fields(qset, h, i)
        for j, grid in enumerate(bset.grids):
            direct = beltrami_field(bset.spec(i, j), grid, bset.bandwidth)
            entries.append(DualityEntry(i, j, (duals[j] - direct).sup(), direct.sup()))
    report = DualityReport(entries)
    logger.info("对偶检查: 最大相对距离 %.3g", report.max_relative)
    return report


def induced_beltrami(qset: QuadDiffSet, h: MetricMatrix) -> BeltramiSet:
    """由 A_i = λ⁻¹ Σ_l h_{i l̄} φ̄_l 反推 Beltrami 系数。

    λ⁻¹ z̄⁻² = (2/u²) sin²τ (z/z̄)，故 b_i = (2/u²) Σ_l conj(h_{i l̄})·pref_l·β_l，
    a_k 同理（k < 0 时多一个 (t/|t|)^{|k|}）。
    """
    phases = _phases(qset.grids)
    specs: Dict[Tuple[int, int], BeltramiSpec] = {}
    for i in range(qset.n):
        for j, grid in enumerate(qset.grids):
            scale = 2.0 / grid.params.u**2
            b = 0j
            a: Dict[int, complex] = {}
            for l in range(qset.n):
                q = qset.spec(l, j)
                if q is None:
                    continue
                weight = scale * np.conj(h.matrix[i, l]) * qdiff_prefactor(q, phases)
                b += weight * q.beta
                for k, alpha in q.alpha.items():
                    extra = phases[j] ** abs(k) if k < 0 else 1.0
                    a[k] = a.get(k, 0j) + weight * alpha * extra
            if b != 0 or any(a.values()):
                specs[(i, j)] = BeltramiSpec(index=i, collar=j, case=case_of(i, j, qset.m), b=complex(b), a=a)
    return BeltramiSet(grids=qset.grids, specs=specs, n=qset.n, bandwidth=qset.bandwidth)


def model_family(
    us: Sequence[float],
    c: float = 0.5,
    n_tau: int = 2048,
    kappa: float = 1.0,
    n_nondegenerate: int = 0,
    nondegenerate_kappa: float = 1.0,
    nondegenerate_scale: float = 1.0,
    ricci_scale: float = 1.0,
    laurent: Optional[Mapping[int, complex]] = None,
    phases: Optional[Sequence[complex]] = None,
    bandwidth: Optional[int] = None,
    grids: Optional[Sequence[TauGrid]] = None,
    coefficient_bound: Optional[float] = DEFAULT_COEFFICIENT_BOUND,
    **grid_options,
) -> BeltramiSet:
    """pure 模型族：p ≡ 0，b_i = −(u_i/π)·t_i/|t_i|。

    Args:
        us: 每个退化 collar 的 u
        c: 外截断
        n_tau: 网格分辨率
        kappa: 退化非对角耦合 b_i^j = κ·u_j·u_i³
        n_nondegenerate: 非退化指标个数
        nondegenerate_kappa: 非退化指标在 collar j 上 b = κ_nd·u_j
        nondegenerate_scale: h 非退化常数块 = 单位阵 × scale
        ricci_scale: τ 非退化常数块 = 单位阵 × scale
        laurent: 对角 A_i 的相对 Laurent 系数，实际 a_k = (u_i/π)·laurent[k]
        phases: 各 t_i 的相位，默认 1
        bandwidth: 角向带宽，默认 2K + 8
        grids: 复用已有网格（忽略 us/c/n_tau）
        coefficient_bound: 系数上界 M，构造后逐项检查；None 跳过

    Returns:
        BeltramiSet
    """
    if grids is None:
        phases = list(phases) if phases is not None else [1.0] * len(us)
        grids = [TauGrid.build(collar_from_u(u, c, ph), n_tau, **grid_options) for u, ph in zip(us, phases)]
    grids = tuple(grids)
    m = len(grids)
    n = m + n_nondegenerate
    laurent = dict(laurent or {})
    order = max((abs(k) for k in laurent), default=0)
    bandwidth = bandwidth or default_bandwidth(order)
    specs: Dict[Tuple[int, int], BeltramiSpec] = {}
    for j, grid in enumerate(grids):
        u_j = grid.params.u
        for i in range(n):
            case = case_of(i, j, m)
            if case is Case.DIAGONAL:
                a = {k: (u_j / math.pi) * v for k, v in laurent.items()}
                specs[(i, j)] = BeltramiSpec(i, j, case, b=pure_diagonal_b(grid.params), a=a)
            elif case is Case.DEGENERATE and kappa != 0.0:
                u_i = grids[i].params.u
                specs[(i, j)] = BeltramiSpec(i, j, case, b=kappa * u_j * u_i**3)
            elif case is Case.NONDEGENERATE and nondegenerate_kappa != 0.0:
                specs[(i, j)] = BeltramiSpec(i, j, case, b=nondegenerate_kappa * u_j)
    nd_wp = nd_ricci = None
    if n_nondegenerate:
        nd_wp = np.eye(n_nondegenerate, dtype=complex) * nondegenerate_scale
        nd_ricci = np.eye(n_nondegenerate, dtype=complex) * ricci_scale
    bset = BeltramiSet(
        grids=grids,
        specs=specs,
        n=n,
        nondegenerate_wp=nd_wp,
        nondegenerate_ricci=nd_ricci,
        bandwidth=bandwidth,
        coefficient_bound=coefficient_bound,
    )
    bset.validate()
    return bset


def qdiff_family(bset: BeltramiSet, kappa: float = 0.0) -> QuadDiffSet:
    """与 pure 族配对的二次微分：q ≡ 0，对角 β = 1，非对角 β = κ·|t_j|^{1/2}。"""
    specs: Dict[Tuple[int, int], QuadDiffSpec] = {}
    for j, grid in enumerate(bset.grids):
        for i in range(bset.n):
            case = case_of(i, j, bset.m)
            if case is Case.DIAGONAL:
                specs[(i, j)] = QuadDiffSpec(i, j, case, beta=1.0)
            elif kappa != 0.0:
                specs[(i, j)] = QuadDiffSpec(i, j, case, beta=kappa * math.sqrt(grid.params.rho))
    return QuadDiffSet(
        grids=bset.grids,
        specs=specs,
        n=bset.n,
        bandwidth=bset.bandwidth,
        coefficient_bound=bset.coefficient_bound,
    )
