#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
collar 上的复值函数：角向 Fourier mode × τ 网格径向剖面。

一个 CollarField 表示 r^w · Σ_n e^{inθ} g_n(τ)，w 为因子化出来的 r 幂次
（小 u 时 r^{±k} 会溢出，剖面本身保持有界）。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Union

import numpy as np

from engines.collar_model.collar import GridMismatchError, TauGrid

logger = logging.getLogger("collarlab")

DEFAULT_BANDWIDTH = 8
TAIL_ENERGY_TOLERANCE = 1e-8

Scalar = Union[int, float, complex]


class UnderResolvedFieldError(ValueError):
    """场在截断带宽边缘仍有不可忽略的能量。"""


def default_bandwidth(laurent_order: int = 0) -> int:
    """N_modes = 2K + 8。"""
    return 2 * laurent_order + DEFAULT_BANDWIDTH


@dataclass(frozen=True, eq=False)
class CollarField:
    """collar 上的场。modes: 角向指标 n → 复剖面（共享 grid）。"""

    grid: TauGrid
    modes: Dict[int, np.ndarray] = field(default_factory=dict)
    r_power: int = 0
    bandwidth: int = DEFAULT_BANDWIDTH
    real: bool = False
    truncated: bool = False

    # ---------- 构造 ----------
    @classmethod
    def zeros(cls, grid: TauGrid, r_power: int = 0, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        return cls(grid=grid, modes={}, r_power=r_power, bandwidth=bandwidth, real=True)

    @classmethod
    def from_profile(
        cls,
        grid: TauGrid,
        n: int,
        profile: np.ndarray,
        r_power: int = 0,
        bandwidth: int = DEFAULT_BANDWIDTH,
    ) -> "CollarField":
        """单一角向 mode 的场。"""
        profile = np.asarray(profile, dtype=complex)
        if profile.shape != grid.nodes.shape:
            raise GridMismatchError(f"剖面长度 {profile.shape} 与网格 {grid.nodes.shape} 不符")
        real = n == 0 and not np.any(profile.imag)
        return cls(grid=grid, modes={n: profile}, r_power=r_power, bandwidth=bandwidth, real=real)

    @classmethod
    def constant(cls, grid: TauGrid, value: Scalar, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        return cls.from_profile(grid, 0, np.full(grid.resolution, value, dtype=complex), bandwidth=bandwidth)

    @classmethod
    def coordinate_z(cls, grid: TauGrid, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        """z = r e^{iθ}。"""
        return cls.from_profile(grid, 1, np.ones(grid.resolution), r_power=1, bandwidth=bandwidth)

    @classmethod
    def coordinate_zbar(cls, grid: TauGrid, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        return cls.from_profile(grid, -1, np.ones(grid.resolution), r_power=1, bandwidth=bandwidth)

    @classmethod
    def metric(cls, grid: TauGrid, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        """λ = ½u²r⁻²csc²τ。"""
        u = grid.params.u
        return cls.from_profile(grid, 0, 0.5 * u * u / grid.sin2, r_power=-2, bandwidth=bandwidth)

    @classmethod
    def inverse_metric(cls, grid: TauGrid, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        """λ⁻¹ = 2r²sin²τ/u²。"""
        u = grid.params.u
        return cls.from_profile(grid, 0, 2.0 * grid.sin2 / (u * u), r_power=2, bandwidth=bandwidth)

    @classmethod
    def conformal_power(cls, grid: TauGrid, p: int, bandwidth: int = DEFAULT_BANDWIDTH) -> "CollarField":
        """ρ_conf^p，ρ_conf = λ^{1/2} = u/(√2·r·|sin τ|)。"""
        u = grid.params.u
        base = u / (math.sqrt(2.0) * np.abs(grid.sin))
        return cls.from_profile(grid, 0, base**p, r_power=-p, bandwidth=bandwidth)

    # ---------- 基本属性 ----------
    def mode(self, n: int) -> np.ndarray:
        profile = self.modes.get(n)
        return np.zeros(self.grid.resolution, dtype=complex) if profile is None else profile

    @property
    def mode_indices(self) -> list:
        return sorted(self.modes)

    def is_zero(self) -> bool:
        return all(not np.any(g) for g in self.modes.values())

    def _check_grid(self, other: "CollarField") -> None:
        if other.grid is not self.grid:
            raise GridMismatchError("场不在同一个 TauGrid 上")

    # ---------- 算术 ----------
    def __add__(self, other: Union["CollarField", Scalar]) -> "CollarField":
        if not isinstance(other, CollarField):
            return self + CollarField.constant(self.grid, other, self.bandwidth)
        self._check_grid(other)
        if other.r_power != self.r_power:
            if other.is_zero():
                return self
            if self.is_zero():
                return other
            raise ValueError(f"r 幂次不一致: {self.r_power} vs {other.r_power}")
        modes = {n: g.copy() for n, g in self.modes.items()}
        for n, g in other.modes.items():
            modes[n] = modes[n] + g if n in modes else g.copy()
        return CollarField(
            grid=self.grid,
            modes=modes,
            r_power=self.r_power,
            bandwidth=max(self.bandwidth, other.bandwidth),
            real=self.real and other.real,
            truncated=self.truncated or other.truncated,
        )

    __radd__ = __add__

    def __neg__(self) -> "CollarField":
        return self.scale(-1.0)

    def __sub__(self, other: Union["CollarField", Scalar]) -> "CollarField":
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "CollarField":
        return (-self) + other

    def scale(self, factor: Scalar) -> "CollarField":
        real = self.real and complex(factor).imag == 0.0
        return replace(self, modes={n: factor * g for n, g in self.modes.items()}, real=real)

    def __mul__(self, other: Union["CollarField", Scalar]) -> "CollarField":
        if not isinstance(other, CollarField):
            return self.scale(other)
        self._check_grid(other)
        bandwidth = max(self.bandwidth, other.bandwidth)
        modes: Dict[int, np.ndarray] = {}
        dropped = 0.0
        for n1, g1 in self.modes.items():
            for n2, g2 in other.modes.items():
                n = n1 + n2
                prod = g1 * g2
                if abs(n) > bandwidth:
                    dropped = max(dropped, float(np.max(np.abs(prod))))
                    continue
                modes[n] = modes[n] + prod if n in modes else prod
        truncated = self.truncated or other.truncated
        if dropped > 0.0:
            logger.warning("乘积超出带宽 %d，已截断 (最大丢弃幅值 %.3g)", bandwidth, dropped)
            truncated = True
        return CollarField(
            grid=self.grid,
            modes=modes,
            r_power=self.r_power + other.r_power,
            bandwidth=bandwidth,
            real=self.real and other.real,
            truncated=truncated,
        )

    __rmul__ = __mul__

    def conj(self) -> "CollarField":
        """复共轭：n → −n，剖面取共轭。"""
        return replace(self, modes={-n: np.conj(g) for n, g in self.modes.items()})

    # ---------- 求值 ----------
    def evaluate(self, node_index: Union[int, np.ndarray], theta: Union[float, np.ndarray]) -> np.ndarray:
        """在 (τ_j, θ) 处重建函数值 r^w Σ g_n e^{inθ}。"""
        idx = np.asarray(node_index)
        theta = np.asarray(theta, dtype=float)
        total = np.zeros(np.broadcast(idx, theta).shape, dtype=complex)
        for n, g in self.modes.items():
            total = total + g[idx] * np.exp(1j * n * theta)
        return total * self.grid.r_power(self.r_power)[idx]

    def angular_samples(self, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """在均匀 θ 采样上重建剖面（不含 r^w），形状 (M, N)。"""
        if not self.modes:
            size = self.grid.resolution if mask is None else int(np.count_nonzero(mask))
            return np.zeros((1, size), dtype=complex)
        top = max(abs(n) for n in self.modes)
        count = max(8, 4 * (top + 1))
        theta = 2.0 * math.pi * np.arange(count) / count
        indices = np.array(sorted(self.modes))
        profiles = np.array([self.modes[n] for n in indices])
        if mask is not None:
            profiles = profiles[:, mask]
        phases = np.exp(1j * np.outer(theta, indices))
        return phases @ profiles

    def sup(self, mask: Optional[np.ndarray] = None, include_r_power: bool = True) -> float:
        """‖f‖₀ 的网格探针近似。"""
        samples = np.abs(self.angular_samples(mask))
        if include_r_power and self.r_power != 0:
            factor = self.grid.r_power(self.r_power)
            samples = samples * (factor if mask is None else factor[mask])
        return float(np.max(samples)) if samples.size else 0.0

    def tail_energy_ratio(self, edge: int = 1) -> float:
        """带宽边缘 edge 个 mode 内的能量占比。"""
        total = sum(float(np.dot(self.grid.weights, np.abs(g) ** 2)) for g in self.modes.values())
        if total == 0.0:
            return 0.0
        tail = sum(
            float(np.dot(self.grid.weights, np.abs(g) ** 2))
            for n, g in self.modes.items()
            if abs(n) > self.bandwidth - edge
        )
        return tail / total


def field_arith(a: CollarField, b: Optional[Union[CollarField, Scalar]], op: str) -> CollarField:
    """逐点算术：add / mul / conj / scale。"""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "conj":
        return a.conj()
    if op == "scale":
        return a.scale(b)
    raise ValueError(f"未知运算: {op}")


def wirtinger(f: CollarField, which: str = "dz") -> CollarField:
    """Wirtinger 导数。

    对 r^w e^{inθ} g(τ)：
        ∂_z  → r^{w−1} e^{i(n−1)θ} · ½[(w+n)g + u g_τ]
        ∂_z̄ → r^{w−1} e^{i(n+1)θ} · ½[(w−n)g + u g_τ]
    """
    if which not in ("dz", "dzbar"):
        raise ValueError(f"which 只能是 dz 或 dzbar: {which}")
    if f.truncated and f.tail_energy_ratio() > TAIL_ENERGY_TOLERANCE:
        raise UnderResolvedFieldError(f"带宽 {f.bandwidth} 边缘能量占比 {f.tail_energy_ratio():.3g}")
    u = f.grid.params.u
    w = f.r_power
    d1 = f.grid.d1
    shift = -1 if which == "dz" else 1
    sign = 1 if which == "dz" else -1
    modes = {}
    for n, g in f.modes.items():
        modes[n + shift] = 0.5 * ((w + sign * n) * g + u * (d1 @ g))
    return CollarField(
        grid=f.grid,
        modes=modes,
        r_power=w - 1,
        bandwidth=f.bandwidth,
        real=False,
        truncated=f.truncated,
    )


def sum_fields(fields: Iterable[CollarField], grid: TauGrid) -> CollarField:
    total = CollarField.zeros(grid)
    for item in fields:
        total = total + item
    return total
