#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Green 算子 T = (□+1)⁻¹：逐角向 mode 的两点边值问题 + 带状线性求解。

mode n 上：−½ sin²τ g″ + (1 + n² sin²τ/(2u²)) g = f_n，两端 Dirichlet 零边界。
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from engines.collar_model.collar import TauGrid, collar_from_u, taper_window, volume_integral
from engines.collar_model.fields import CollarField, default_bandwidth
from engines.collar_model.operators import box, ck_norm, k0, l2_norm_sq

logger = logging.getLogger("collarlab")


class ResidualError(ValueError):
    """‖(□+1)g − f‖₀ 超出容差。"""


@dataclass(frozen=True)
class SolverConfig:
    """Green 算子求解配置。

    support_strip: 支撑前提检查的端点带宽度（以 u 为单位）。
    """

    boundary: str = "dirichlet"
    resolution: Optional[int] = None
    mode_cutoff: Optional[int] = None
    tolerance: float = 1e-10
    residual_tolerance: float = 1e-6
    support_strip: float = 0.01
    check_support: bool = True
    check_residual: bool = True

    def __post_init__(self) -> None:
        if self.boundary != "dirichlet":
            raise ValueError(f"仅支持 Dirichlet 零边界: {self.boundary}")
        if self.tolerance > 1e-10:
            raise ValueError(f"线性求解容差需 ≤ 1e-10: {self.tolerance}")


solver_config = SolverConfig()


def _row_scaled_band(grid: TauGrid, n: int) -> tuple:
    band, half = grid.dirichlet_d2
    u = grid.params.u
    n_nodes = grid.resolution
    ab = np.zeros_like(band)
    cols = np.arange(n_nodes)
    for offset in range(-half, half + 1):
        rows = cols - offset
        valid = (rows >= 0) & (rows < n_nodes)
        # ab[half + (i − j), j]，offset = j − i
        ab[half - offset, cols[valid]] = -0.5 * grid.sin2[rows[valid]] * band[half - offset, cols[valid]]
    ab[half, :] += 1.0 + (n * n / (2.0 * u * u)) * grid.sin2
    return ab, half


def support_violation(f: CollarField, cfg: SolverConfig = solver_config) -> float:
    """端点带内 |f| 的上确界与 ‖f‖₀ 之比。"""
    norm = f.sup()
    if norm == 0.0:
        return 0.0
    strip = f.grid.end_strip(cfg.support_strip * f.grid.params.u)
    if not np.any(strip):
        return 0.0
    return f.sup(strip) / norm


def apply_box1(g: CollarField) -> CollarField:
    """(□+1)g。"""
    return box(g) + g


def solve_T(f: CollarField, cfg: SolverConfig = solver_config) -> CollarField:
    """g = T(f)，逐 mode 带状求解。

    Args:
        f: r 幂次为 0 的场
        cfg: 求解配置

    Returns:
        满足 (□+1)g = f、两端为零的场
    """
    if f.r_power != 0:
        raise ValueError(f"T 只作用于函数 (r 幂次 0)，实际 {f.r_power}")
    grid = f.grid
    if cfg.resolution is not None and cfg.resolution < grid.resolution:
        raise ValueError(f"求解分辨率 {cfg.resolution} 低于输入网格 {grid.resolution}")
    if cfg.check_support:
        ratio = support_violation(f, cfg)
        if ratio > 1e-6:
            logger.warning("T 的输入在端点带内不为零 (比值 %.3g)，边界偏差不受控", ratio)

    modes = {}
    for n, rhs in f.modes.items():
        if cfg.mode_cutoff is not None and abs(n) > cfg.mode_cutoff:
            continue
        if not np.any(rhs):
            modes[n] = np.zeros_like(rhs)
            continue
        ab, half = _row_scaled_band(grid, n)
        modes[n] = solve_banded((half, half), ab, rhs)
    g = replace(f, modes=modes)

    if cfg.check_residual and not f.is_zero():
        residual = (apply_box1(g) - f).sup()
        scale = f.sup()
        logger.debug("T 残差 %.3g (相对 %.3g)", residual, residual / scale)
        if residual > cfg.residual_tolerance * scale:
            raise ResidualError(f"T 残差 {residual:.3g} 超过 {cfg.residual_tolerance:.1g}·‖f‖₀")
    return g


def random_compact_field(
    grid: TauGrid,
    rng: np.random.Generator,
    n_modes: int = 2,
    c_outer: float = 0.5,
    c_inner: float = 0.35,
    bandwidth: int = default_bandwidth(),
) -> CollarField:
    """随机的紧支实值场：低阶 τ 多项式 × 两端 cutoff 窗，mode ±n 共轭对称。"""
    window = taper_window(grid, c_outer, c_inner)
    mid = 0.5 * (grid.tau_a + grid.tau_b)
    half = 0.5 * (grid.tau_b - grid.tau_a)
    x = (grid.nodes - mid) / half
    modes = {}
    for n in range(n_modes + 1):
        coeffs = rng.normal(size=4) + (1j * rng.normal(size=4) if n else 0.0)
        profile = np.polynomial.polynomial.polyval(x, coeffs) * window
        if n == 0:
            modes[0] = profile.real.astype(complex)
        else:
            modes[n] = profile.astype(complex)
            modes[-n] = np.conj(profile).astype(complex)
    return CollarField(grid=grid, modes=modes, r_power=0, bandwidth=bandwidth, real=True)


# ---------- 性质检查 ----------
@dataclass
class SpectralPairing:
    """∫|Tf|² ≤ Re∫Tf·f̄ ≤ ∫|f|²。"""

    tf_sq: float
    tf_f: float
    f_sq: float

    def slack(self) -> float:
        """两个不等式中较大的相对违反量（≤ 0 表示成立）。"""
        return max(self.tf_sq - self.tf_f, self.tf_f - self.f_sq) / self.f_sq


def spectral_pairing(f: CollarField, cfg: SolverConfig = solver_config) -> SpectralPairing:
    g = solve_T(f, cfg)
    return SpectralPairing(
        tf_sq=l2_norm_sq(g),
        tf_f=float(volume_integral(g * f.conj()).real),
        f_sq=l2_norm_sq(f),
    )


def self_adjoint_defect(f: CollarField, h: CollarField, cfg: SolverConfig = solver_config) -> float:
    """|∫T(f)·h̄ − ∫f·conj(T(h))| / |∫T(f)·h̄|。"""
    left = volume_integral(solve_T(f, cfg) * h.conj())
    right = volume_integral(f * solve_T(h, cfg).conj())
    return float(abs(left - right) / max(abs(left), 1e-300))


def bochner_ratio(f: CollarField, cfg: SolverConfig = solver_config) -> float:
    """|K₀Tf|_{L²} / |K₀f|_{L²}。"""
    denom = l2_norm_sq(k0(f))
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(l2_norm_sq(k0(solve_T(f, cfg))) / denom))


def schauder_ratio(f: CollarField, cfg: SolverConfig = solver_config) -> float:
    """‖Tf‖₂ / ‖f‖₁，常数未知，只做监测。"""
    denom = ck_norm(f, 1)
    if denom == 0.0:
        return 0.0
    return ck_norm(solve_T(f, cfg), 2) / denom


def boundary_sensitivity(
    u: float,
    c: float = 0.5,
    shrink: float = 0.9,
    c_outer: float = 0.35,
    c_inner: float = 0.25,
    n_tau: int = 2048,
    cfg: SolverConfig = solver_config,
) -> float:
    """把外截断 c 换成 shrink·c 后 ∫T(f)·h̄ dv 的相对变化。

    f = sin²τ·窗，h = sin⁴τ·窗，窗的过渡区为 [c_inner, c_outer]，两个 collar 都完整包含支撑。
    """
    if not c_outer < shrink * c:
        raise ValueError(f"窗外端 {c_outer} 必须小于缩小后的截断 {shrink * c}")
    values = []
    for cut in (c, shrink * c):
        grid = TauGrid.build(collar_from_u(u, cut), n_tau)
        window = taper_window(grid, c_outer, c_inner)
        f = CollarField.from_profile(grid, 0, grid.sin2 * window)
        h = CollarField.from_profile(grid, 0, grid.sin2**2 * window)
        values.append(volume_integral(solve_T(f, cfg) * h.conj()))
    change = abs(values[1] - values[0]) / abs(values[0])
    logger.debug("边界敏感度 u=%.4g: %.3g", u, change)
    return float(change)
