#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
collar 场上的微分算子：Maass 算子 K_p / L_p、P、□、ξ_k、Q_{k l̄}、Cᵏ 范数，
以及指标对称化 σ₁ / σ₂ / σ̃₁。

共形因子取 ρ_conf = λ^{1/2}，从而 P = K₁K₀。
ξ_k(f) = −λ⁻¹∂_z(A_k ∂_z f)；A 调和时等于 −A_k·P(f)。
"""

import functools
import itertools
import logging
import operator
from dataclasses import dataclass, fields as dc_fields, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from engines.collar_model.collar import volume_integral
from engines.collar_model.fields import CollarField, wirtinger

logger = logging.getLogger("collarlab")

SYMMETRIZER_SLOTS = {
    "sigma1": ("i", "k", "alpha"),
    "sigma2": ("j", "beta"),
    "sigma1_tilde": ("j", "l", "beta"),
}


class UnsupportedNormOrderError(ValueError):
    """ck_norm 仅支持 k ≤ 2。"""


@dataclass(frozen=True)
class IndexTuple:
    """(i, k, α; j̄, l̄, β̄)。"""

    i: int
    k: int
    alpha: int
    j: int
    l: int
    beta: int

    def check(self, n: int) -> None:
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if not 0 <= value < n:
                raise ValueError(f"指标 {f.name}={value} 超出范围 0..{n - 1}")


def maass(p: int, f: CollarField, which: str = "K") -> CollarField:
    """K_p(f) = ρ^{p−1}∂_z(ρ^{−p}f)，L_p(f) = ρ^{−p−1}∂_z̄(ρ^p f)。"""
    grid, bw = f.grid, f.bandwidth
    if which == "K":
        inner = CollarField.conformal_power(grid, -p, bw) * f
        return CollarField.conformal_power(grid, p - 1, bw) * wirtinger(inner, "dz")
    if which == "L":
        inner = CollarField.conformal_power(grid, p, bw) * f
        return CollarField.conformal_power(grid, -p - 1, bw) * wirtinger(inner, "dzbar")
    raise ValueError(f"which 只能是 K 或 L: {which}")


def op_P(f: CollarField) -> CollarField:
    """P(f) = ∂_z(λ⁻¹∂_z f)。"""
    lam_inv = CollarField.inverse_metric(f.grid, f.bandwidth)
    return wirtinger(lam_inv * wirtinger(f, "dz"), "dz")


def op_P_bar(f: CollarField) -> CollarField:
    """P̄(f) = conj(P(conj f)) = ∂_z̄(λ⁻¹∂_z̄ f)。"""
    return op_P(f.conj()).conj()


def box(f: CollarField) -> CollarField:
    """□f = −λ⁻¹∂_z∂_z̄ f，要求 r 幂次为 0。

    对 mode n：□ₙg = −½ sin²τ (g″ − n²g/u²)，与 Green 算子求解使用同一套二阶模板。
    """
    if f.r_power != 0:
        raise ValueError(f"□ 只作用于函数 (r 幂次 0)，实际 {f.r_power}")
    grid = f.grid
    u = grid.params.u
    half_s2 = 0.5 * grid.sin2
    modes = {n: -half_s2 * (grid.d2 @ g - (n * n / (u * u)) * g) for n, g in f.modes.items()}
    return replace(f, modes=modes)


def xi(A: CollarField, f: CollarField) -> CollarField:
    """ξ(f) = −λ⁻¹∂_z(A ∂_z f)。"""
    lam_inv = CollarField.inverse_metric(f.grid, max(A.bandwidth, f.bandwidth))
    return -(lam_inv * wirtinger(A * wirtinger(f, "dz"), "dz"))


def xi_bar(A: CollarField, f: CollarField) -> CollarField:
    """ξ̄(f) = conj(ξ(conj f))。"""
    return xi(A, f.conj()).conj()


def q_operator(e_kl: CollarField, f_kl: CollarField, f: CollarField, e_lk: Optional[CollarField] = None) -> CollarField:
    """Q_{k l̄}(f) = P̄(e_{k l̄})P(f) − 2f_{k l̄}□f + λ⁻¹∂_z f_{k l̄}·∂_z̄ f。

    P̄(e_{k l̄}) = conj(P(e_{l k̄}))；未给出 e_lk 时取 conj(e_kl)。
    """
    e_lk = e_kl.conj() if e_lk is None else e_lk
    lam_inv = CollarField.inverse_metric(f.grid, f.bandwidth)
    first = op_P(e_lk).conj() * op_P(f)
    second = f_kl * box(f) * 2.0
    third = lam_inv * wirtinger(f_kl, "dz") * wirtinger(f, "dzbar")
    return first - second + third


def k0(f: CollarField) -> CollarField:
    """K₀f = ρ⁻¹∂_z f。"""
    return maass(0, f, "K")


def k0_bar(f: CollarField) -> CollarField:
    """K̄₀f = ρ⁻¹∂_z̄ f（即 L₀）。"""
    return maass(0, f, "L")


def symmetrize(U: Callable[[IndexTuple], Any], which: str, idx: IndexTuple) -> Any:
    """对槽位的所有排列求和：σ₁ 6 项，σ₂ 2 项，σ̃₁ 6 项。"""
    slots = SYMMETRIZER_SLOTS.get(which)
    if slots is None:
        raise ValueError(f"未知对称化算子: {which}")
    values = [getattr(idx, s) for s in slots]
    terms = []
    for perm in itertools.permutations(values):
        terms.append(U(replace(idx, **dict(zip(slots, perm)))))
    return functools.reduce(operator.add, terms)


def _norm_tree(f: CollarField, p: int, k: int) -> List[CollarField]:
    """所有 ≤ k 重 K/L 复合。"""
    level: List[Tuple[CollarField, int]] = [(f, p)]
    out = [f]
    for _ in range(k):
        nxt = []
        for g, weight in level:
            nxt.append((maass(weight, g, "K"), weight + 1))
            nxt.append((maass(weight, g, "L"), weight - 1))
        out.extend(g for g, _ in nxt)
        level = nxt
    return out


def ck_norm(
    f: CollarField,
    k: int = 0,
    region: Optional[Tuple[float, float]] = None,
    p: int = 0,
) -> float:
    """‖f‖_k = Σ_{|Q|≤k} sup|Q f|。

    Args:
        f: S(p) 中的截面（Beltrami 系数 p = −2，函数 p = 0）
        k: 阶数 0..2
        region: 可选的 τ 子区间
        p: 截面权重

    Returns:
        范数值
    """
    if not 0 <= k <= 2:
        raise UnsupportedNormOrderError(f"仅支持 k ≤ 2: {k}")
    if f.is_zero():
        return 0.0
    mask = None
    if region is not None:
        lo, hi = region
        mask = (f.grid.nodes >= lo) & (f.grid.nodes <= hi)
    return float(sum(g.sup(mask) for g in _norm_tree(f, p, k)))


def l1_norm(f: CollarField) -> float:
    """|f|_{L¹} = ∫|f| dv，按 θ 均匀采样求平均。"""
    grid = f.grid
    if f.r_power != 0:
        raise ValueError("L¹ 范数只对 r 幂次 0 的场定义")
    mean_abs = np.mean(np.abs(f.angular_samples()), axis=0)
    return float(np.pi * grid.params.u * np.dot(grid.weights, mean_abs / grid.sin2))


def l2_norm_sq(f: CollarField) -> float:
    """|f|²_{L²} = ∫|f|² dv。"""
    return float(volume_integral(f * f.conj()).real)


def qkl_sides(
    e_ij: CollarField,
    e_ab: CollarField,
    e_kl: CollarField,
    f_kl: CollarField,
) -> Dict[str, complex]:
    """Q 配对的分部积分恒等式两边（要求 (□+1)e_kl = f_kl 且紧支）。

    左边 ∫Q_{k l̄}(e_ij)e_ab dv；右边
    −∫f_kl(K₀e_ij·K̄₀e_ab + K̄₀e_ij·K₀e_ab) dv − ∫(□e_ij·K₀e_ab·K̄₀e_kl + □e_ab·K₀e_ij·K̄₀e_kl) dv。
    """
    lhs = volume_integral(q_operator(e_kl, f_kl, e_ij) * e_ab)
    k_ij, kb_ij = k0(e_ij), k0_bar(e_ij)
    k_ab, kb_ab = k0(e_ab), k0_bar(e_ab)
    kb_kl = k0_bar(e_kl)
    rhs = -volume_integral(f_kl * (k_ij * kb_ab + kb_ij * k_ab))
    rhs -= volume_integral(box(e_ij) * k_ab * kb_kl + box(e_ab) * k_ij * kb_kl)
    return {"lhs": lhs, "rhs": rhs}
