#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
collar 模型：rs 坐标下的真实 collar、模型度量密度、τ 网格与体积积分。

约定:
1. ρ = |t| 精确成立，u = −π/log|t|，l = 2πu
2. τ = u·log r，collar (c⁻¹ρ, c) 对应 τ ∈ (−π − u log c, u log c) ⊂ (−π, 0)
3. 所有径向采样与积分都在 τ 上进行
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.special import roots_legendre

if TYPE_CHECKING:
    from engines.collar_model.fields import CollarField

logger = logging.getLogger("collarlab")

STENCIL_WIDTH = 7  # 内部 6 阶中心差分，端点附近单侧

ArrayLike = Union[float, np.ndarray]


class DomainEmptyError(ValueError):
    """|t| ≥ c²，annulus 为空。"""


class InvalidCutError(ValueError):
    """c 不在 (0, 1) 内。"""


class OutOfDomainError(ValueError):
    """τ 不在 collar 的开区间内。"""


class GridMismatchError(ValueError):
    """参与运算的场不在同一个 TauGrid 上。"""


@dataclass(frozen=True)
class CollarParams:
    """一个退化 collar 的参数。t 为复 pinching 参数，ρ = |t|。"""

    t: complex
    u: float
    rho: float
    c: float

    @property
    def t_abs(self) -> float:
        return self.rho

    @property
    def phase(self) -> complex:
        """t/|t|，|t|-归一化坐标下的相位。"""
        return complex(self.t) / self.rho

    @property
    def cut_width(self) -> float:
        """u·log(1/c)，τ 区间到 −π、0 的距离。"""
        return self.u * math.log(1.0 / self.c)

    @property
    def tau_interval(self) -> Tuple[float, float]:
        width = self.cut_width
        return (-math.pi + width, -width)

    @property
    def length(self) -> float:
        """测地线长度 l = 2πu。"""
        return 2.0 * math.pi * self.u


def _check_cut(c: float) -> None:
    if not 0.0 < c < 1.0:
        raise InvalidCutError(f"c 必须在 (0, 1) 内: {c}")


def collar_from_t(t: complex, c: float) -> CollarParams:
    """由 pinching 参数 t 构造 collar。"""
    _check_cut(c)
    rho = abs(t)
    if not 0.0 < rho < c * c:
        raise DomainEmptyError(f"|t| = {rho:.6g} 需满足 0 < |t| < c² = {c * c:.6g}")
    u = -math.pi / math.log(rho)
    return CollarParams(t=complex(t), u=u, rho=rho, c=c)


def collar_from_u(u: float, c: float, phase: complex = 1.0) -> CollarParams:
    """由宽度 u 构造 collar，t = phase·e^{−π/u}。"""
    _check_cut(c)
    if u <= 0.0:
        raise DomainEmptyError(f"u 必须为正: {u}")
    rho = math.exp(-math.pi / u)
    if rho == 0.0:
        raise DomainEmptyError(f"u = {u} 太小，ρ 下溢")
    if rho >= c * c:
        raise DomainEmptyError(f"u = {u} 使 ρ = {rho:.6g} ≥ c²")
    phase = complex(phase) / abs(phase)
    return CollarParams(t=phase * rho, u=u, rho=rho, c=c)


def _check_tau(p: CollarParams, tau: ArrayLike) -> np.ndarray:
    tau_arr = np.asarray(tau, dtype=float)
    lo, hi = p.tau_interval
    if np.any(tau_arr <= lo) or np.any(tau_arr >= hi):
        raise OutOfDomainError(f"τ 超出 collar 区间 ({lo:.6g}, {hi:.6g})")
    return tau_arr


def log_metric_density(p: CollarParams, tau: ArrayLike) -> ArrayLike:
    """log λ，小 u 时 λ 本身会溢出。"""
    tau_arr = _check_tau(p, tau)
    out = math.log(0.5 * p.u**2) - 2.0 * tau_arr / p.u - 2.0 * np.log(np.abs(np.sin(tau_arr)))
    return float(out) if np.ndim(out) == 0 else out


def metric_density(p: CollarParams, tau: ArrayLike) -> ArrayLike:
    """λ(r) = ½u²r⁻²csc²τ，|dz|² 的系数。"""
    with np.errstate(over="ignore"):
        out = np.exp(log_metric_density(p, tau))
    return float(out) if np.ndim(out) == 0 else out


def geodesic_circle(p: CollarParams) -> float:
    """闭测地线所在半径 r* = e^{−π/(2u)} = √ρ。"""
    return math.exp(-math.pi / (2.0 * p.u))


def ke_defect(p: CollarParams, tau: ArrayLike, step: float = 1e-3) -> np.ndarray:
    """∂_z∂_z̄ log λ 与 λ 的相对偏差，log λ 的 τ 二阶导用 5 点中心差分。

    λ 径向对称时 ∂_z∂_z̄ = (u²/4r²)∂²_τ，相对偏差化为 |½ sin²τ·(log λ)_ττ − 1|。
    τ ± 2·step 必须仍在 collar 内。
    """
    tau_arr = np.asarray(tau, dtype=float)

    def f(shift: float) -> np.ndarray:
        return np.asarray(log_metric_density(p, tau_arr + shift * step))

    # log λ 含 −2τ/u 项，小 u 时量级很大，步长不能太小
    second = (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0)) / (12.0 * step**2)
    return np.abs(0.5 * np.sin(tau_arr) ** 2 * second - 1.0)


def smooth_step(y: ArrayLike, derivative: int = 0) -> np.ndarray:
    """C^∞ 过渡 S(y)：y ≤ 0 时为 1，y ≥ 1 时为 0，基于 ψ(x) = e^{−1/x}。

    Args:
        y: 过渡变量
        derivative: 0、1 或 2 阶导数

    Returns:
        S 或其导数在 y 处的值
    """
    y = np.asarray(y, dtype=float)

    def psi(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = x > 0.0
        xs = np.where(pos, x, 1.0)
        val = np.where(pos, np.exp(-1.0 / xs), 0.0)
        d1 = np.where(pos, val / xs**2, 0.0)
        d2 = np.where(pos, val * (1.0 - 2.0 * xs) / xs**4, 0.0)
        return val, d1, d2

    a, a_d, a_dd = psi(1.0 - y)
    b, b_d, b_dd = psi(y)
    # a(y) = ψ(1−y)，链式法则带一个负号
    a1, a2 = -a_d, a_dd
    s = a + b
    if derivative == 0:
        return a / s
    num = a1 * b - a * b_d
    if derivative == 1:
        return num / s**2
    if derivative == 2:
        num_d = a2 * b - a * b_dd
        return num_d / s**2 - 2.0 * num * (a1 + b_d) / s**3
    raise ValueError(f"仅支持 0..2 阶导数: {derivative}")


def stencil_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """批量计算有限差分权重（泰勒矩阵求解）。

    Args:
        offsets: (n, W) 各模板节点相对目标点的位移
        order: 导数阶数

    Returns:
        (n, W) 权重
    """
    n, width = offsets.shape
    scale = np.max(np.abs(offsets), axis=1)
    s = offsets / scale[:, None]
    powers = np.arange(width)
    factorials = np.array([math.factorial(k) for k in powers], dtype=float)
    # A[r, p, i] = s_i^p / p!
    taylor = s[:, None, :] ** powers[None, :, None] / factorials[None, :, None]
    rhs = np.zeros((n, width))
    rhs[:, order] = 1.0
    weights = np.linalg.solve(taylor, rhs[..., None])[..., 0]
    return weights / scale[:, None] ** order


def _stencil_starts(center: np.ndarray, size: int) -> np.ndarray:
    half = STENCIL_WIDTH // 2
    return np.clip(center - half, 0, size - STENCIL_WIDTH)


@dataclass(frozen=True, eq=False)
class TauGrid:
    """collar 的 τ 网格：分段 Gauss–Legendre 节点，端点附近按 u 尺度加密。"""

    params: CollarParams
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int

    @classmethod
    def build(
        cls,
        params: CollarParams,
        n_tau: int = 2048,
        panel_order: int = 4,
        end_scale: float = 2.0,
    ) -> "TauGrid":
        """构造网格。

        s ∈ [0, 1] 上均匀分段，每段 panel_order 个 Gauss 点；映射 τ(s) 在两端
        以 δ = end_scale·u 为尺度指数渐变，中点 s = ½ 恰为段边界。

        Args:
            params: collar 参数
            n_tau: 目标节点数，向上取整到 2·panel_order 的倍数
            panel_order: 每段 Gauss 点数
            end_scale: 端点加密区宽度（以 u 为单位）

        Returns:
            TauGrid
        """
        if n_tau < 2 * STENCIL_WIDTH:
            raise ValueError(f"n_tau 太小: {n_tau}")
        block = 2 * panel_order
        n = int(math.ceil(n_tau / block)) * block
        n_panels = n // panel_order
        tau_a, tau_b = params.tau_interval
        span = tau_b - tau_a
        delta = end_scale * params.u
        kappa = 2.0 * math.log1p(span / (2.0 * delta))

        x, w = roots_legendre(panel_order)
        left = np.arange(n_panels)[:, None] / n_panels
        s = (left + (x[None, :] + 1.0) / (2.0 * n_panels)).ravel()
        ds = np.tile(w / (2.0 * n_panels), n_panels)

        lower = s <= 0.5
        s_mirror = np.where(lower, s, 1.0 - s)
        grow = np.exp(kappa * s_mirror)
        offset = delta * (grow - 1.0)
        nodes = np.where(lower, tau_a + offset, tau_b - offset)
        jacobian = delta * kappa * grow

        logger.debug("TauGrid: u=%.5g, N=%d, kappa=%.4g", params.u, n, kappa)
        return cls(params=params, nodes=nodes, weights=ds * jacobian, resolution=n)

    @property
    def tau_a(self) -> float:
        return self.params.tau_interval[0]

    @property
    def tau_b(self) -> float:
        return self.params.tau_interval[1]

    @cached_property
    def sin(self) -> np.ndarray:
        return np.sin(self.nodes)

    @cached_property
    def sin2(self) -> np.ndarray:
        return self.sin**2

    @cached_property
    def log_r(self) -> np.ndarray:
        return self.nodes / self.params.u

    def r_power(self, w: float) -> np.ndarray:
        """r^w 在节点上的值（可能溢出为 inf）。"""
        with np.errstate(over="ignore"):
            return np.exp(w * self.log_r)

    def _difference_matrix(self, order: int) -> sparse.csr_matrix:
        n = self.resolution
        starts = _stencil_starts(np.arange(n), n)
        cols = starts[:, None] + np.arange(STENCIL_WIDTH)[None, :]
        offsets = self.nodes[cols] - self.nodes[:, None]
        vals = stencil_weights(offsets, order)
        rows = np.repeat(np.arange(n), STENCIL_WIDTH)
        return sparse.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, n))

    @cached_property
    def d1(self) -> sparse.csr_matrix:
        """d/dτ 的差分矩阵。"""
        return self._difference_matrix(1)

    @cached_property
    def d2(self) -> sparse.csr_matrix:
        """d²/dτ² 的差分矩阵。"""
        return self._difference_matrix(2)

    @cached_property
    def dirichlet_d2(self) -> Tuple[np.ndarray, int]:
        """两端补零值虚节点后的 d²/dτ²，返回 (带状存储, 半带宽)。

        带状存储按 scipy.linalg.solve_banded 的 (l, u) = (half, half) 格式。
        """
        n = self.resolution
        ext = np.concatenate(([self.tau_a], self.nodes, [self.tau_b]))
        centers = np.arange(1, n + 1)
        starts = _stencil_starts(centers, n + 2)
        cols_ext = starts[:, None] + np.arange(STENCIL_WIDTH)[None, :]
        vals = stencil_weights(ext[cols_ext] - ext[centers][:, None], 2)
        cols = cols_ext - 1
        rows = np.broadcast_to(np.arange(n)[:, None], cols.shape)
        keep = (cols >= 0) & (cols < n)
        half = int(np.max(np.abs(cols[keep] - rows[keep])))
        band = np.zeros((2 * half + 1, n))
        # ab[half + i − j, j] = A[i, j]
        band[half + rows[keep] - cols[keep], cols[keep]] = vals[keep]
        return band, half

    def integrate(self, values: np.ndarray) -> complex:
        """∫ g(τ) dτ。"""
        return complex(np.dot(self.weights, values))

    def end_strip(self, width: float) -> np.ndarray:
        """距任一端点 τ-距离 ≤ width 的节点掩码。"""
        return (self.nodes - self.tau_a <= width) | (self.tau_b - self.nodes <= width)


def taper_window(grid: TauGrid, c_outer: float, c_inner: float, derivative: int = 0) -> np.ndarray:
    """两端对称的 cutoff 窗 η(x)·η(log ρ − x)，过渡区为 [log c_inner, log c_outer]。

    derivative 给出对 τ 的导数（0..2）。
    """
    u = grid.params.u
    width = math.log(c_outer / c_inner)
    y_out = (grid.log_r - math.log(c_inner)) / width
    # 内端镜像：log ρ − x = −(π + τ)/u
    y_in = (-(math.pi + grid.nodes) / u - math.log(c_inner)) / width
    scale = 1.0 / (u * width)
    f0, g0 = smooth_step(y_out), smooth_step(y_in)
    if derivative == 0:
        return f0 * g0
    f1, g1 = smooth_step(y_out, 1) * scale, -smooth_step(y_in, 1) * scale
    if derivative == 1:
        return f1 * g0 + f0 * g1
    f2, g2 = smooth_step(y_out, 2) * scale**2, smooth_step(y_in, 2) * scale**2
    return f2 * g0 + 2.0 * f1 * g1 + f0 * g2


def volume_integral(f: "CollarField") -> complex:
    """∫ f dv。只有 mode 0 的径向剖面贡献：πu ∫ f₀(τ) csc²τ dτ。"""
    if f.r_power != 0:
        raise GridMismatchError(f"体积分要求 r 幂次为 0，实际为 {f.r_power}")
    profile = f.modes.get(0)
    if profile is None:
        return 0j
    grid = f.grid
    return math.pi * grid.params.u * grid.integrate(profile / grid.sin2)


if __name__ == "__main__":
    # 简单演示：u = π/10 的 collar
    demo = collar_from_t(math.exp(-10.0), 0.5)
    print(f"u = {demo.u:.6f}, rho = {demo.rho:.6g}")
    print(f"tau interval = {demo.tau_interval}")
    print(f"r* = {geodesic_circle(demo):.6g}")
    grid = TauGrid.build(demo, n_tau=512)
    print(f"interval length by quadrature: {grid.integrate(np.ones(grid.resolution)).real:.12f}")
