import math

import pytest

from engines.collar_model.asymptotics import (
    AsymptoticTarget,
    CutoffSpec,
    DegenerateFitError,
    EquivalenceRow,
    build_approximants,
    cutoff_eval,
    equivalence_ratios,
    fit_power_law,
    g2_spotcheck,
    geodesic_length,
    geodesic_length_derivative_check,
    mcmullen_target,
    perturbed_metric_target,
    perturbed_target,
    target_table,
    u0_gauge,
)
from engines.collar_model.curvature import CurvatureEngine
from engines.collar_model.differentials import UnknownCaseError, model_family

US = [0.1, 0.05, 0.025, 0.0125]


def test_target_table_ids() -> None:
    table = target_table()
    for key in ("wp-metric-diag", "ricci-diag", "g1-term1", "g1-term4", "holo-sec-diag", "g2-bound"):
        assert key in table
    assert all(key == row.id for key, row in table.items())
    assert table["wp-metric-diag"].expected(0.1) == pytest.approx(0.5e-3)
    with pytest.raises(ValueError):
        table["g2-bound"].expected(0.1)


def test_asymptotic_target_validation() -> None:
    with pytest.raises(ValueError):
        AsymptoticTarget("bad-exp", 1.0, 0.3, 0, "非半整数指数")
    with pytest.raises(ValueError):
        AsymptoticTarget("bad-tol", 1.0, 2, 0, "容差", tolerance=1.5)
    AsymptoticTarget("half", 1.0, 2.5, -0.5, "半整数")


def test_perturbed_targets() -> None:
    u = 0.02
    assert perturbed_target(u, 0.0) == pytest.approx(3.0 * u**4 / (8.0 * math.pi**4), rel=1e-12)
    assert perturbed_metric_target(u, 0.0) == pytest.approx(3.0 * u**2 / (4.0 * math.pi**2), rel=1e-12)
    # C 很大时趋于 9u⁴/(16π⁴) + 3Cu⁵/(8π²)
    C = 1e8
    limit = 9.0 * u**4 / (16.0 * math.pi**4) + 3.0 * C * u**5 / (8.0 * math.pi**2)
    assert perturbed_target(u, C) == pytest.approx(limit, rel=1e-6)
    assert mcmullen_target(0.0) == pytest.approx(1.0 / 3.0)


def test_fit_power_law_exact() -> None:
    samples = [(u, 2.5 * u**3) for u in US]
    fit = fit_power_law(samples, correction=False)
    assert fit.exponent == pytest.approx(3.0, abs=1e-10)
    assert fit.constant == pytest.approx(2.5, rel=1e-10)
    assert not fit.degenerate


def test_fit_power_law_with_correction() -> None:
    samples = [(u, 0.7 * u**2 * math.exp(4.0 * u)) for u in US]
    fit = fit_power_law(samples)
    assert fit.exponent == pytest.approx(2.0, abs=1e-8)
    assert fit.correction == pytest.approx(4.0, abs=1e-6)
    assert fit.constant == pytest.approx(0.7, rel=1e-8)


def test_fit_power_law_strips_t_factor() -> None:
    samples = [(u, 1.5 * u**5 * math.exp(-2.0 * math.pi / u)) for u in US]
    fit = fit_power_law(samples, t_exponent=2.0, correction=False)
    assert fit.exponent == pytest.approx(5.0, abs=1e-8)


@pytest.mark.parametrize(
    "samples",
    [
        [(0.1, 1.0), (0.05, 1.0), (0.025, 1.0)],
        [(0.1, 1.0), (0.05, 1.0), (0.05, 1.0), (0.01, 1.0)],
        [(0.1, 1.0), (0.05, 0.0), (0.025, 1.0), (0.01, 1.0)],
        [(0.1, 1.0), (0.05, math.nan), (0.025, 1.0), (0.01, 1.0)],
    ],
)
def test_fit_power_law_degenerate(samples: list) -> None:
    with pytest.raises(DegenerateFitError):
        fit_power_law(samples)


def test_length_derivative_oracle() -> None:
    (row,) = geodesic_length_derivative_check([math.exp(-10.0)])
    assert row.u == pytest.approx(math.pi / 10.0)
    assert abs(row.fd) == pytest.approx(math.pi**2 * math.exp(10.0) / 100.0, rel=1e-2)
    assert abs(row.fd) == pytest.approx(2174.0, rel=1e-2)
    assert row.rel_err <= 1e-6
    assert row.log_rel_err <= 1e-6


def test_length_derivative_phase() -> None:
    rows = geodesic_length_derivative_check([1j * math.exp(-20.0), -math.exp(-40.0)])
    for row in rows:
        assert row.rel_err <= 1e-6


def test_geodesic_length() -> None:
    assert geodesic_length(math.exp(-10.0)) == pytest.approx(2.0 * math.pi**2 / 10.0)


def test_cutoff_eval() -> None:
    spec = CutoffSpec()
    assert cutoff_eval(spec, "eta", math.log(0.3)) == 1.0
    assert cutoff_eval(spec, "eta", math.log(0.6)) == 0.0
    assert cutoff_eval(spec, "eta1", math.log(0.2)) == 1.0
    assert cutoff_eval(spec, "eta1", math.log(0.4)) == 0.0
    assert cutoff_eval(spec, "eta", math.log(0.42), derivative=1) < 0.0
    with pytest.raises(ValueError):
        cutoff_eval(spec, "eta2", 0.0)
    with pytest.raises(ValueError):
        CutoffSpec(c=0.5, c1=0.2, c2=0.3)


def test_build_approximants_cases() -> None:
    bset = model_family([0.1, 0.08], n_tau=512, n_nondegenerate=1)
    diag = build_approximants(0, 0, bset)
    assert diag["d"] is not None
    assert not diag["e"][0].is_zero() and diag["e"][1].is_zero()
    off = build_approximants(0, 1, bset)
    assert off["d"] is None
    assert not off["e"][0].is_zero() and not off["e"][1].is_zero()
    nondeg = build_approximants(1, 2, bset)
    assert nondeg["d"] is None
    assert not nondeg["e"][1].is_zero() and nondeg["e"][0].is_zero()
    with pytest.raises(UnknownCaseError):
        build_approximants(2, 0, bset)
    with pytest.raises(UnknownCaseError):
        build_approximants(0, 3, bset)


def test_equivalence_rows(engine_u0025: CurvatureEngine) -> None:
    (row,) = equivalence_ratios([engine_u0025])
    assert isinstance(row, EquivalenceRow)
    assert row.poincare == pytest.approx(3.0, rel=0.15)
    assert 0.1 <= row.mcmullen <= 1.0
    assert row.mcmullen == pytest.approx(mcmullen_target(0.025), rel=0.15)


def test_u0_gauge() -> None:
    assert u0_gauge([0.1, 0.05]) == pytest.approx(0.15)
    assert u0_gauge([0.1], [0.03 + 0.04j]) == pytest.approx(0.15)


def test_g2_vanishes_without_coupling() -> None:
    engines = [CurvatureEngine(model_family([u, 0.05], n_tau=512, kappa=0.0)) for u in US]
    report = g2_spotcheck(engines)
    assert report.vanishes()
    assert all(fit is None for fit in report.fits.values())
    assert report.us == pytest.approx(US)
