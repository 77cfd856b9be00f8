#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
曲率张量装配：WP 曲率、Ricci 度量、Ricci 度量的曲率（四个块 + 对称化），
以及扰动 Ricci 度量 τ̃ = τ + C·h 与其曲率。

所有量都在 |t|-归一化坐标下计算。e_{i j̄} 逐 collar 用 Dirichlet T 求解，
collar 之间不耦合。
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from engines.collar_model.collar import volume_integral
from engines.collar_model.differentials import (
    BeltramiSet,
    MetricKind,
    MetricMatrix,
    beltrami_fields,
    check_metric,
    wp_metric,
)
from engines.collar_model.fields import CollarField
from engines.collar_model.green import SolverConfig, solve_T, solver_config
from engines.collar_model.operators import IndexTuple, q_operator, symmetrize, xi

logger = logging.getLogger("collarlab")

G1_TARGETS = tuple(c / (16.0 * math.pi**4) for c in (9.0, -9.0, -3.0, 9.0))
G1_SUM_TARGET = 3.0 / (8.0 * math.pi**4)
TENSOR_SYMMETRY_TOLERANCE = 1e-9

Fields = List[CollarField]


class PositiveDefinitenessError(ValueError):
    """Ricci / 扰动 Ricci 度量非正定。"""


class SymmetryError(ValueError):
    """曲率张量的 Hermite / 配对对称性超出容差。"""


@dataclass(frozen=True)
class CurvatureTensor:
    """R[i, j, k, l] = R_{i j̄ k l̄}。kind: WP / Ricci-metric / perturbed。"""

    array: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return self.array.shape[0]

    def entry(self, i: int, j: int, k: int, l: int) -> complex:
        return complex(self.array[i, j, k, l])

    def _scale(self) -> float:
        return max(float(np.max(np.abs(self.array))), 1e-300)

    def hermitian_defect(self) -> float:
        """max |R_{i j̄ k l̄} − conj(R_{j ī l k̄})| / max|R|。"""
        mirror = self.array.transpose(1, 0, 3, 2).conj()
        return float(np.max(np.abs(self.array - mirror))) / self._scale()

    def pair_symmetry_defect(self) -> float:
        """R_{i j̄ k l̄} = R_{k j̄ i l̄} = R_{i l̄ k j̄} 的最大相对偏差。"""
        swap_holo = np.max(np.abs(self.array - self.array.transpose(2, 1, 0, 3)))
        swap_anti = np.max(np.abs(self.array - self.array.transpose(0, 3, 2, 1)))
        return float(max(swap_holo, swap_anti)) / self._scale()

    def check(self, tolerance: float = TENSOR_SYMMETRY_TOLERANCE) -> None:
        defect = self.hermitian_defect()
        if self.kind == "WP":
            defect = max(defect, self.pair_symmetry_defect())
        if defect > tolerance:
            raise SymmetryError(f"{self.kind} 曲率张量对称性偏差 {defect:.3g} > {tolerance:.1g}")


@dataclass
class G1Report:
    """对角全纯截面曲率的主项分解（四项 + 余项 G₂）。"""

    index: int
    u: float
    terms: Tuple[complex, complex, complex, complex]
    g2: complex
    ricci: complex
    targets: Tuple[float, ...] = G1_TARGETS
    sum_target: float = G1_SUM_TARGET

    @property
    def total(self) -> complex:
        return sum(self.terms)

    @property
    def scale(self) -> float:
        return self.u**4

    @property
    def relative_errors(self) -> Tuple[float, ...]:
        return tuple(abs(t / self.scale - c) / abs(c) for t, c in zip(self.terms, self.targets))

    @property
    def sum_relative_error(self) -> float:
        return abs(self.total / self.scale - self.sum_target) / self.sum_target

    @property
    def decomposition_defect(self) -> float:
        """|G₁ + G₂ − R̃| / |R̃|。"""
        return abs(self.total + self.g2 - self.ricci) / max(abs(self.ricci), 1e-300)

    def to_dict(self) -> Dict[str, object]:
        return {
            "index": self.index,
            "u": self.u,
            "terms": [[t.real, t.imag] for t in self.terms],
            "targets": list(self.targets),
            "relative_errors": list(self.relative_errors),
            "g1": [self.total.real, self.total.imag],
            "g2": [self.g2.real, self.g2.imag],
            "ricci": [self.ricci.real, self.ricci.imag],
        }


@dataclass
class BlockValues:
    """一个曲率分量的四个块；lead 为所有求和指标都等于 split 的那部分，rest 为其余部分。"""

    lead: Dict[str, complex] = field(default_factory=lambda: dict.fromkeys("abcd", 0j))
    rest: Dict[str, complex] = field(default_factory=lambda: dict.fromkeys("abcd", 0j))
    extra: complex = 0j

    def block(self, name: str) -> complex:
        return self.lead[name] + self.rest[name]

    @property
    def total(self) -> complex:
        return sum(self.block(name) for name in "abcd") + self.extra

    @property
    def g2(self) -> complex:
        return sum(self.rest.values())

    def add(self, name: str, value: complex, leading: bool) -> None:
        (self.lead if leading else self.rest)[name] += value

    def to_dict(self) -> Dict[str, complex]:
        out = {name: self.block(name) for name in "abcd"}
        out["C*R"] = self.extra
        out["total"] = self.total
        return out


class CurvatureEngine:
    """对一个 BeltramiSet 缓存 A、f、e、ξ(e)、T(ξ(e)) 以及各类配对积分。"""

    def __init__(self, bset: BeltramiSet, solver: Optional[SolverConfig] = None):
        self.bset = bset
        # f_{i j̄} 在 collar 端点不为零，T 的支撑前提不适用
        self.solver = replace(solver or solver_config, check_support=False)
        self._memo: Dict[Tuple, object] = {}

    # ---------- 缓存 ----------
    def _cached(self, key: Tuple, build: Callable[[], object]):
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    @property
    def n(self) -> int:
        return self.bset.n

    @property
    def grids(self):
        return self.bset.grids

    def _zeros(self) -> Fields:
        return [CollarField.zeros(g, bandwidth=self.bset.bandwidth) for g in self.grids]

    @staticmethod
    def _integrate(fields: Fields) -> complex:
        return complex(sum(volume_integral(x) for x in fields))

    # ---------- 场 ----------
    def A(self, i: int) -> Fields:
        return self._cached(("A", i), lambda: beltrami_fields(self.bset, i))

    def f(self, a: int, b: int) -> Fields:
        """f_{a b̄} = A_a Ā_b。"""
        return self._cached(("f", a, b), lambda: [x * y.conj() for x, y in zip(self.A(a), self.A(b))])

    def e(self, a: int, b: int) -> Fields:
        """e_{a b̄} = T(f_{a b̄})。"""

        def build() -> Fields:
            mirror = self._memo.get(("e", b, a))
            if mirror is not None:
                # e_{b ā} = conj(e_{a b̄})
                return [x.conj() for x in mirror]
            return [x if x.is_zero() else solve_T(x, self.solver) for x in self.f(a, b)]

        return self._cached(("e", a, b), build)

    def xi_e(self, k: int, a: int, b: int) -> Fields:
        """ξ_k(e_{a b̄})。"""
        return self._cached(("xi", k, a, b), lambda: [xi(A, e) for A, e in zip(self.A(k), self.e(a, b))])

    def t_xi_e(self, k: int, a: int, b: int) -> Fields:
        """T(ξ_k(e_{a b̄}))。"""
        return self._cached(
            ("txi", k, a, b),
            lambda: [x if x.is_zero() else solve_T(x, self.solver) for x in self.xi_e(k, a, b)],
        )

    # ---------- 度量 ----------
    @property
    def h(self) -> MetricMatrix:
        return self._cached(("h",), lambda: wp_metric(self.bset))

    @property
    def h_inv(self) -> np.ndarray:
        return self._cached(("h_inv",), lambda: self.h.inverse())

    def _pair(self, x: Tuple[int, int], y: Tuple[int, int]) -> complex:
        """∫ e_x f_y dv，取 ½(∫T(f_x)f_y + ∫f_x T(f_y)) 使离散配对对称。"""
        key = ("pair",) + tuple(sorted([x, y]))

        def build() -> complex:
            left = self._integrate([e * f for e, f in zip(self.e(*x), self.f(*y))])
            right = self._integrate([f * e for f, e in zip(self.f(*x), self.e(*y))])
            return 0.5 * (left + right)

        return self._cached(key, build)

    @property
    def wp_tensor(self) -> CurvatureTensor:
        """R_{i j̄ k l̄} = ∫(e_{i j̄}f_{k l̄} + e_{i l̄}f_{k j̄}) dv。"""

        def build() -> CurvatureTensor:
            n = self.n
            R = np.zeros((n, n, n, n), dtype=complex)
            for i, j, k, l in itertools.product(range(n), repeat=4):
                R[i, j, k, l] = self._pair((i, j), (k, l)) + self._pair((i, l), (k, j))
            return CurvatureTensor(R, "WP")

        return self._cached(("R",), build)

    @property
    def tau(self) -> MetricMatrix:
        """τ_{i j̄} = h^{α β̄} R_{i j̄ α β̄}（非退化块加常数）。"""

        def build() -> MetricMatrix:
            matrix = np.einsum("ab,ijab->ij", self.h_inv, self.wp_tensor.array)
            m = self.bset.m
            if self.bset.nondegenerate_ricci is not None and self.n > m:
                matrix[m:, m:] += self.bset.nondegenerate_ricci
            metric = check_metric(matrix, MetricKind.RICCI)
            if not metric.is_positive_definite():
                raise PositiveDefinitenessError("Ricci 度量非正定")
            return metric

        return self._cached(("tau",), build)

    @property
    def tau_inv(self) -> np.ndarray:
        return self._cached(("tau_inv",), lambda: self.tau.inverse())

    def perturbed_metric(self, C: float) -> MetricMatrix:
        """τ̃ = τ + C·h。"""
        if C < 0.0:
            raise ValueError(f"C 必须非负: {C}")
        metric = MetricMatrix(self.tau.matrix + C * self.h.matrix, MetricKind.PERTURBED_RICCI)
        if not metric.is_positive_definite():
            raise PositiveDefinitenessError(f"扰动 Ricci 度量非正定 (C={C})")
        return metric

    # ---------- 配对积分 ----------
    def _t_pairing(self, k: int, i: int, j: int, l: int, a: int, b: int) -> complex:
        """∫ T(ξ_k(e_{i j̄}))·ξ̄_l(e_{a b̄}) dv，ξ̄_l(e_{a b̄}) = conj(ξ_l(e_{b ā}))。"""

        def build() -> complex:
            x, y = self.xi_e(k, i, j), self.xi_e(l, b, a)
            tx, ty = self.t_xi_e(k, i, j), self.t_xi_e(l, b, a)
            left = self._integrate([p * q.conj() for p, q in zip(tx, y)])
            right = self._integrate([p * q.conj() for p, q in zip(x, ty)])
            return 0.5 * (left + right)

        return self._cached(("tp", k, i, j, l, a, b), build)

    def _q_pairing(self, k: int, l: int, i: int, j: int, a: int, b: int) -> complex:
        """∫ Q_{k l̄}(e_{i j̄}) e_{a b̄} dv。"""

        def build() -> complex:
            total = 0j
            for e_kl, f_kl, e_lk, e_ij, e_ab in zip(
                self.e(k, l), self.f(k, l), self.e(l, k), self.e(i, j), self.e(a, b)
            ):
                if e_ij.is_zero() or e_ab.is_zero():
                    continue
                total += volume_integral(q_operator(e_kl, f_kl, e_ij, e_lk=e_lk) * e_ab)
            return total

        return self._cached(("qp", k, l, i, j, a, b), build)

    def _xi_pairing(self, i: int, k: int, a: int, q: int, b: int) -> complex:
        """∫ ξ_k(e_{i q̄}) e_{a b̄} dv。"""
        return self._cached(
            ("xp", i, k, a, q, b),
            lambda: self._integrate([x * e for x, e in zip(self.xi_e(k, i, q), self.e(a, b))]),
        )

    def _sigma1_xi(self, i: int, k: int, a: int, q: int, b: int) -> complex:
        base = IndexTuple(i, k, a, q, 0, b)
        return symmetrize(lambda t: self._xi_pairing(t.i, t.k, t.alpha, t.j, t.beta), "sigma1", base)

    def xi_pairing(self, i: int) -> complex:
        """∫ ξ_i(e_{i ī}) e_{i ī} dv。"""
        return self._xi_pairing(i, i, i, i, i)

    def t_pairing(self, i: int) -> complex:
        """∫ T(ξ_i(e_{i ī}))·ξ̄_i(e_{i ī}) dv。"""
        return self._t_pairing(i, i, i, i, i, i)

    def q_pairing(self, i: int) -> complex:
        """∫ Q_{i ī}(e_{i ī}) e_{i ī} dv。"""
        return self._q_pairing(i, i, i, i, i, i)

    # ---------- Ricci 度量的曲率 ----------
    def blocks(
        self,
        i: int,
        j: int,
        k: int,
        l: int,
        split: Optional[int] = None,
        C: Optional[float] = None,
    ) -> BlockValues:
        """四个块 (a)–(d)。C 给出时块 (c) 用 τ̃^{p q̄}，并加上 C·R_{i j̄ k l̄}。

        Args:
            i, j, k, l: 曲率分量指标（0 起）
            split: 主项指标；求和指标全部等于它的项记入 lead
            C: 扰动常数

        Returns:
            BlockValues
        """
        IndexTuple(i, k, 0, j, l, 0).check(self.n)
        n = self.n
        G = self.h_inv
        tau_inv = self.tau_inv if C is None else self.perturbed_metric(C).inverse()
        out = BlockValues()

        def u_a(t: IndexTuple) -> complex:
            return self._t_pairing(t.k, t.i, t.j, t.l, t.alpha, t.beta) + self._t_pairing(
                t.k, t.i, t.j, t.beta, t.alpha, t.l
            )

        def u_b(t: IndexTuple) -> complex:
            return self._q_pairing(t.k, t.l, t.i, t.j, t.alpha, t.beta)

        for a, b in itertools.product(range(n), repeat=2):
            weight = G[a, b]
            if weight == 0:
                continue
            base = IndexTuple(i, k, a, j, l, b)
            leading = a == b == split
            value_a = symmetrize(lambda t: symmetrize(u_a, "sigma2", t), "sigma1", base)
            out.add("a", weight * value_a, leading)
            out.add("b", weight * symmetrize(u_b, "sigma1", base), leading)

        # (c): −τ^{p q̄} [h^{α β̄} σ₁∫ξ_k(e_{i q̄})e_{α β̄}] [h^{γ δ̄} σ̃₁∫ξ̄_l(e_{p j̄})e_{γ δ̄}]
        # 第二个因子等于 conj(σ₁∫ξ_l(e_{j p̄})e_{δ γ̄})
        for p, q in itertools.product(range(n), repeat=2):
            if tau_inv[p, q] == 0:
                continue
            for a, b, g, d in itertools.product(range(n), repeat=4):
                weight = G[a, b] * G[g, d]
                if weight == 0:
                    continue
                first = self._sigma1_xi(i, k, a, q, b)
                second = np.conj(self._sigma1_xi(j, l, d, p, g))
                leading = split is not None and p == q == a == b == g == d == split
                out.add("c", -tau_inv[p, q] * weight * first * second, leading)

        R = self.wp_tensor.array
        tau = self.tau.matrix
        for p, q in itertools.product(range(n), repeat=2):
            out.add("d", tau[p, j] * G[p, q] * R[i, q, k, l], p == q == split)

        if C is not None:
            out.extra = C * R[i, j, k, l]
        return out

    def ricci_curvature(self, i: int, j: int, k: int, l: int) -> complex:
        return self.blocks(i, j, k, l).total

    def perturbed_curvature(self, i: int, j: int, k: int, l: int, C: float) -> complex:
        return self.blocks(i, j, k, l, C=C).total

    def ricci_tensor(self, C: Optional[float] = None) -> CurvatureTensor:
        n = self.n
        arr = np.zeros((n, n, n, n), dtype=complex)
        for i, j, k, l in itertools.product(range(n), repeat=4):
            arr[i, j, k, l] = self.blocks(i, j, k, l, C=C).total
        return CurvatureTensor(arr, "Ricci-metric" if C is None else "perturbed")

    def g1_terms(self, i: int, C: Optional[float] = None) -> G1Report:
        """R̃_{i ī i ī} = G₁ + G₂（C 给出时为 G̃₁、G̃₂，ricci 字段为 P_{i ī i ī} − C·R）。"""
        if not 0 <= i < self.bset.m:
            raise ValueError(f"G₁ 分解只对退化指标定义: {i}")
        vals = self.blocks(i, i, i, i, split=i, C=C)
        terms = tuple(vals.lead[name] for name in "abcd")
        report = G1Report(
            index=i,
            u=self.grids[i].params.u,
            terms=terms,
            g2=vals.g2,
            ricci=vals.total - vals.extra,
        )
        logger.info(
            "G1 (i=%d, u=%.4g): %s, 相对误差 %s",
            i,
            report.u,
            ", ".join(f"{t.real:.4g}" for t in terms),
            ", ".join(f"{r:.3f}" for r in report.relative_errors),
        )
        return report

    def determinant_ratio(self, C: float) -> float:
        """det τ̃ / [Π_i u_i²(3/(4π²) + C u_i/2) · det(A + C B)]。"""
        m = self.bset.m
        expected = 1.0
        for grid in self.grids:
            u = grid.params.u
            expected *= u * u * (3.0 / (4.0 * math.pi**2) + C * u / 2.0)
        if self.n > m:
            A = self.bset.nondegenerate_ricci
            B = self.bset.nondegenerate_wp
            A = np.zeros((self.n - m,) * 2) if A is None else A
            B = np.zeros((self.n - m,) * 2) if B is None else B
            expected *= np.linalg.det(A + C * B).real
        return float(np.linalg.det(self.perturbed_metric(C).matrix).real / expected)


@lru_cache(maxsize=8)
def get_engine(bset: BeltramiSet) -> CurvatureEngine:
    return CurvatureEngine(bset)


def e_of(i: int, j: int, bset: BeltramiSet) -> Fields:
    """e_{i j̄} = T(f_{i j̄})，逐 collar。"""
    return get_engine(bset).e(i, j)


def wp_curvature(bset: BeltramiSet, tolerance: float = TENSOR_SYMMETRY_TOLERANCE) -> CurvatureTensor:
    tensor = get_engine(bset).wp_tensor
    tensor.check(tolerance)
    return tensor


def ricci_metric(bset: BeltramiSet) -> MetricMatrix:
    return get_engine(bset).tau


def ricci_curvature(i: int, j: int, k: int, l: int, bset: BeltramiSet) -> complex:
    return get_engine(bset).ricci_curvature(i, j, k, l)


def g1_terms(i: int, bset: BeltramiSet) -> G1Report:
    return get_engine(bset).g1_terms(i)


def perturbed_metric(bset: BeltramiSet, C: float) -> MetricMatrix:
    return get_engine(bset).perturbed_metric(C)


def perturbed_curvature(i: int, j: int, k: int, l: int, bset: BeltramiSet, C: float) -> complex:
    return get_engine(bset).perturbed_curvature(i, j, k, l, C)
