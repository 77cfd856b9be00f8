import math

import numpy as np
import pytest

from engines.collar_model.asymptotics import perturbed_metric_target, target_table
from engines.collar_model.curvature import (
    G1_SUM_TARGET,
    G1_TARGETS,
    CurvatureEngine,
    CurvatureTensor,
    SymmetryError,
    get_engine,
)
from engines.collar_model.differentials import model_family

BAND = 0.15


def _within_band(measured: complex, target: complex) -> bool:
    return abs(measured - target) <= BAND * abs(target)


def test_wp_tensor_symmetries(engine_u0025: CurvatureEngine) -> None:
    R = engine_u0025.wp_tensor
    assert R.hermitian_defect() <= 1e-9
    assert R.pair_symmetry_defect() <= 1e-9
    R.check()


def test_wp_curvature_leading_terms(engine_u0025: CurvatureEngine) -> None:
    table = target_table()
    u = 0.025
    R = engine_u0025.wp_tensor.entry(0, 0, 0, 0)
    h = engine_u0025.h.matrix[0, 0]
    assert _within_band(R.real, table["wp-curv-diag"].expected(u))
    assert _within_band((R / h**2).real, table["wp-normalized-holo"].expected(u))
    assert abs(R.imag) <= 1e-9 * abs(R)


def test_ricci_metric(engine_u0025: CurvatureEngine) -> None:
    u = 0.025
    tau = engine_u0025.tau
    assert tau.is_positive_definite()
    assert _within_band(tau.matrix[0, 0].real, 3.0 * u**2 / (4.0 * math.pi**2))
    assert engine_u0025.tau_inv[0, 0] == pytest.approx(1.0 / tau.matrix[0, 0])


def test_g1_decomposition_single_collar(engine_u0025: CurvatureEngine) -> None:
    report = engine_u0025.g1_terms(0)
    # 单 collar 时所有求和指标都等于 0，没有余项
    assert report.g2 == 0
    assert report.decomposition_defect <= 1e-10
    assert report.sum_relative_error <= BAND
    for term, target in zip(report.terms, G1_TARGETS):
        assert np.sign(term.real) == np.sign(target)
    with pytest.raises(ValueError):
        engine_u0025.g1_terms(1)


def test_holomorphic_sectional_curvature(engine_u0025: CurvatureEngine) -> None:
    u = 0.025
    value = engine_u0025.ricci_curvature(0, 0, 0, 0)
    tau = engine_u0025.tau.matrix[0, 0].real
    assert _within_band(value.real, G1_SUM_TARGET * u**4)
    assert _within_band(value.real / tau**2, 2.0 / 3.0)
    assert engine_u0025.ricci_tensor().entry(0, 0, 0, 0) == pytest.approx(value)


def test_perturbed_metric(engine_u0025: CurvatureEngine) -> None:
    u = 0.025
    C = 10.0
    perturbed = engine_u0025.perturbed_metric(C)
    expected = engine_u0025.tau.matrix + C * engine_u0025.h.matrix
    assert np.allclose(perturbed.matrix, expected, rtol=1e-14)
    assert _within_band(perturbed.matrix[0, 0].real, perturbed_metric_target(u, C))
    assert perturbed.inverse()[0, 0].real <= engine_u0025.tau_inv[0, 0].real
    assert engine_u0025.determinant_ratio(C) == pytest.approx(1.0, rel=BAND)
    with pytest.raises(ValueError):
        engine_u0025.perturbed_metric(-1.0)


def test_perturbed_curvature_at_zero_matches_ricci(engine_u0025: CurvatureEngine) -> None:
    plain = engine_u0025.ricci_curvature(0, 0, 0, 0)
    assert engine_u0025.perturbed_curvature(0, 0, 0, 0, 0.0) == pytest.approx(plain, rel=1e-12)
    blocks = engine_u0025.blocks(0, 0, 0, 0, C=1.0)
    assert blocks.extra == pytest.approx(engine_u0025.wp_tensor.entry(0, 0, 0, 0))


def test_block_indices_checked(engine_u0025: CurvatureEngine) -> None:
    with pytest.raises(ValueError):
        engine_u0025.blocks(0, 0, 0, 1)


def test_two_collar_model_is_consistent() -> None:
    engine = CurvatureEngine(model_family([0.05, 0.04], n_tau=512))
    engine.wp_tensor.check()
    assert engine.tau.is_positive_definite()
    assert engine.tau.hermitian_defect() <= 1e-12
    report = engine.g1_terms(1)
    assert report.decomposition_defect <= 1e-10


def test_symmetry_error() -> None:
    tensor = CurvatureTensor(np.full((1, 1, 1, 1), 1j), "Ricci-metric")
    with pytest.raises(SymmetryError):
        tensor.check()


def test_get_engine_is_cached() -> None:
    bset = model_family([0.1], n_tau=512)
    assert get_engine(bset) is get_engine(bset)
