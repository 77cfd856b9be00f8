import math

import numpy as np
import pytest

from engines.collar_model.collar import (
    DomainEmptyError,
    GridMismatchError,
    InvalidCutError,
    OutOfDomainError,
    TauGrid,
    collar_from_t,
    collar_from_u,
    geodesic_circle,
    ke_defect,
    log_metric_density,
    metric_density,
    smooth_step,
    taper_window,
    volume_integral,
)
from engines.collar_model.asymptotics import calculus_identity, collar_area, collar_area_exact
from engines.collar_model.fields import CollarField


def test_collar_from_t_oracle() -> None:
    p = collar_from_t(math.exp(-10.0), 0.5)
    assert p.u == pytest.approx(math.pi / 10.0, rel=1e-14)
    assert p.rho == pytest.approx(math.exp(-10.0), rel=1e-14)
    assert p.length == pytest.approx(2.0 * math.pi**2 / 10.0, rel=1e-14)
    lo, hi = p.tau_interval
    assert hi == pytest.approx(-p.u * math.log(2.0))
    assert lo == pytest.approx(-math.pi + p.u * math.log(2.0))


def test_collar_from_t_rejects_empty_annulus() -> None:
    with pytest.raises(DomainEmptyError):
        collar_from_t(0.3, 0.5)
    with pytest.raises(DomainEmptyError):
        collar_from_t(0.0, 0.5)


@pytest.mark.parametrize("c", [0.0, 1.0, 1.2, -0.5])
def test_invalid_cut(c: float) -> None:
    with pytest.raises(InvalidCutError):
        collar_from_u(0.1, c)


def test_collar_from_u_normalizes_phase() -> None:
    p = collar_from_u(0.1, 0.5, phase=2j)
    assert p.phase == pytest.approx(1j)
    assert abs(p.t) == pytest.approx(math.exp(-math.pi / 0.1))


def test_metric_density_at_geodesic_circle() -> None:
    p = collar_from_u(0.1, 0.5)
    r_star = geodesic_circle(p)
    # τ = −π/2 处 sin²τ = 1，λ r² = ½u²
    assert metric_density(p, -math.pi / 2.0) * r_star**2 == pytest.approx(0.5 * p.u**2, rel=1e-12)


def test_metric_density_out_of_domain() -> None:
    p = collar_from_u(0.1, 0.5)
    with pytest.raises(OutOfDomainError):
        metric_density(p, 0.0)
    with pytest.raises(OutOfDomainError):
        log_metric_density(p, np.array([-1.0, -math.pi]))


@pytest.mark.parametrize("u", [0.1, 0.0125])
def test_ke_equation_interior(u: float) -> None:
    p = collar_from_u(u, 0.5)
    tau = np.linspace(-5.0 * math.pi / 6.0, -math.pi / 6.0, 41)
    assert np.max(ke_defect(p, tau)) <= 1e-5


def test_smooth_step_limits_and_symmetry() -> None:
    y = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    s = smooth_step(y)
    assert s[0] == 1.0 and s[1] == 1.0
    assert s[3] == 0.0 and s[4] == 0.0
    assert s[2] == pytest.approx(0.5)


def test_smooth_step_derivative_matches_difference() -> None:
    y = np.linspace(0.1, 0.9, 9)
    h = 1e-6
    fd = (smooth_step(y + h) - smooth_step(y - h)) / (2.0 * h)
    assert np.allclose(smooth_step(y, 1), fd, rtol=1e-6, atol=1e-8)
    fd2 = (smooth_step(y + 1e-4, 1) - smooth_step(y - 1e-4, 1)) / 2e-4
    assert np.allclose(smooth_step(y, 2), fd2, rtol=1e-5, atol=1e-6)
    with pytest.raises(ValueError):
        smooth_step(y, 3)


def test_grid_nodes_and_weights(grid_u01: TauGrid) -> None:
    assert grid_u01.resolution % 8 == 0
    assert grid_u01.resolution >= 1024
    assert np.all(np.diff(grid_u01.nodes) > 0.0)
    assert grid_u01.nodes[0] > grid_u01.tau_a and grid_u01.nodes[-1] < grid_u01.tau_b
    span = grid_u01.tau_b - grid_u01.tau_a
    assert grid_u01.integrate(np.ones(grid_u01.resolution)).real == pytest.approx(span, rel=1e-12)


def test_difference_matrices(grid_u01: TauGrid) -> None:
    tau = grid_u01.nodes
    assert np.allclose(grid_u01.d1 @ np.sin(tau), np.cos(tau), atol=1e-8)
    assert np.allclose(grid_u01.d2 @ np.sin(tau), -np.sin(tau), atol=1e-6)


def test_collar_area_matches_closed_form(grid_u01: TauGrid) -> None:
    assert collar_area(grid_u01) == pytest.approx(collar_area_exact(grid_u01.params), rel=1e-9)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_calculus_identities(grid_u005: TauGrid, k: int) -> None:
    measured, exact = calculus_identity(grid_u005, k)
    assert measured == pytest.approx(exact, rel=1e-9)


def test_inverse_radius_moment_is_half_pi(grid_u005: TauGrid) -> None:
    measured, _ = calculus_identity(grid_u005, 0)
    u = grid_u005.params.u
    assert abs(u * measured - math.pi / 2.0) / (math.pi / 2.0) <= 2.0 * u


def test_volume_integral_requires_function(grid_u01: TauGrid) -> None:
    with pytest.raises(GridMismatchError):
        volume_integral(CollarField.metric(grid_u01))


def test_taper_window(grid_u01: TauGrid) -> None:
    window = taper_window(grid_u01, 0.5, 0.35)
    middle = np.argmin(np.abs(grid_u01.nodes + math.pi / 2.0))
    assert window[middle] == pytest.approx(1.0)
    assert np.all((window >= 0.0) & (window <= 1.0))
    assert window[0] < 1e-12 and window[-1] < 1e-12
