import math

import numpy as np
import pytest

from engines.collar_model.collar import TauGrid
from engines.collar_model.differentials import (
    DEFAULT_COEFFICIENT_BOUND,
    BeltramiSet,
    BeltramiSpec,
    Case,
    CoefficientBoundError,
    MetricKind,
    MetricMatrix,
    NonHermitianError,
    QuadDiffSet,
    QuadDiffSpec,
    SingularMetricError,
    UnknownCaseError,
    beltrami_field,
    case_of,
    check_metric,
    duality_check,
    induced_beltrami,
    model_family,
    pure_diagonal_b,
    qdiff_family,
    qdiff_field,
    wp_cometric,
    wp_metric,
)


def test_case_of() -> None:
    assert case_of(0, 0, 2) is Case.DIAGONAL
    assert case_of(1, 0, 2) is Case.DEGENERATE
    assert case_of(2, 0, 2) is Case.NONDEGENERATE
    with pytest.raises(UnknownCaseError):
        case_of(0, 2, 2)
    with pytest.raises(UnknownCaseError):
        case_of(-1, 0, 2)


def test_coefficient_bounds() -> None:
    ok = BeltramiSpec(0, 0, Case.DIAGONAL, b=0.05, a={1: 0.01})
    ok.validate(0.5, u_collar=0.1, u_index=0.1, bound=1.0)
    too_big = BeltramiSpec(0, 0, Case.DIAGONAL, b=1.0)
    with pytest.raises(CoefficientBoundError):
        too_big.validate(0.5, u_collar=0.1, u_index=0.1, bound=1.0)
    with pytest.raises(CoefficientBoundError):
        QuadDiffSpec(0, 0, Case.DIAGONAL, beta=1.0, alpha={1: 3.0}).validate(0.5, bound=1.0)
    QuadDiffSpec(0, 0, Case.DIAGONAL, beta=1.0, alpha={2: 1.0}).validate(0.5, bound=1.0)


def test_beltrami_field_diagonal(grid_u01: TauGrid) -> None:
    b = pure_diagonal_b(grid_u01.params)
    A = beltrami_field(BeltramiSpec(0, 0, Case.DIAGONAL, b=b), grid_u01)
    assert A.mode_indices == [2]
    assert np.allclose(A.mode(2), np.conj(b) * grid_u01.sin2)
    assert A.sup() == pytest.approx(abs(b), rel=1e-3)
    assert beltrami_field(None, grid_u01).is_zero()


def test_qdiff_field_diagonal(grid_u01: TauGrid) -> None:
    phases = [grid_u01.params.phase]
    phi = qdiff_field(QuadDiffSpec(0, 0, Case.DIAGONAL, beta=1.0), grid_u01, phases)
    assert phi.r_power == -2
    assert np.allclose(phi.mode(-2), -1.0 / math.pi)


def test_pure_family_wp_metric_and_cometric(grid_u01: TauGrid) -> None:
    bset = model_family([0.1], grids=[grid_u01])
    u = 0.1
    h = wp_metric(bset)
    assert h.kind is MetricKind.WP
    assert h.matrix[0, 0].real == pytest.approx(0.5 * u**3, rel=3.0 * u)
    cometric = wp_cometric(qdiff_family(bset))
    assert cometric.matrix[0, 0].real == pytest.approx(2.0 / u**3, rel=3.0 * u)


def test_duality_recovers_beltrami(grid_u01: TauGrid) -> None:
    bset = model_family([0.1], grids=[grid_u01])
    qset = qdiff_family(bset)
    h = wp_metric(bset)
    report = duality_check(qset, bset, h)
    assert report.max_relative <= 3.0 * 0.1
    induced = induced_beltrami(qset, h)
    assert abs(induced.spec(0, 0).b - bset.spec(0, 0).b) <= 3.0 * 0.1 * abs(bset.spec(0, 0).b)


def test_singular_cometric(grid_u01: TauGrid) -> None:
    qset = QuadDiffSet(grids=(grid_u01,), specs={}, n=1)
    with pytest.raises(SingularMetricError):
        wp_cometric(qset)


def test_check_metric_rejects_non_hermitian() -> None:
    with pytest.raises(NonHermitianError):
        check_metric(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), MetricKind.WP)


def test_metric_inverse_convention() -> None:
    M = np.array([[2.0, 0.5 + 0.5j], [0.5 - 0.5j, 1.0]])
    metric = MetricMatrix(M, MetricKind.RICCI)
    assert metric.is_positive_definite()
    G = metric.inverse()
    # Σ_β g^{α β̄} g_{γ β̄} = δ_{αγ}
    assert np.allclose(G @ M.T, np.eye(2))


def test_model_family_with_nondegenerate_block() -> None:
    bset = model_family([0.1, 0.08], n_tau=512, n_nondegenerate=1, nondegenerate_scale=2.0)
    assert bset.m == 2 and bset.n == 3
    assert bset.spec(0, 1).case is Case.DEGENERATE
    assert bset.spec(2, 0).case is Case.NONDEGENERATE
    h = wp_metric(bset)
    assert h.is_positive_definite()
    assert h.matrix[2, 2].real > 2.0
    assert h.hermitian_defect() <= 1e-12


def test_model_family_laurent_bandwidth() -> None:
    bset = model_family([0.1], n_tau=512, laurent={1: 0.1, -1: 0.1})
    assert bset.bandwidth == 10
    A = beltrami_field(bset.spec(0, 0), bset.grids[0], bset.bandwidth)
    assert set(A.mode_indices) == {1, 2, 3}


def test_field_builders_enforce_bound(grid_u01: TauGrid) -> None:
    loud = BeltramiSpec(0, 0, Case.DIAGONAL, b=1e6, a={1: 1e6})
    with pytest.raises(CoefficientBoundError):
        beltrami_field(loud, grid_u01, bound=DEFAULT_COEFFICIENT_BOUND)
    with pytest.raises(CoefficientBoundError):
        qdiff_field(
            QuadDiffSpec(0, 0, Case.DIAGONAL, beta=1.0, alpha={1: 1e9}),
            grid_u01,
            [1.0],
            bound=DEFAULT_COEFFICIENT_BOUND,
        )
    # 不给上界时照常构造
    assert not beltrami_field(loud, grid_u01).is_zero()
    # 退化情形按 u_i³ 缩放
    coupled = BeltramiSpec(1, 0, Case.DEGENERATE, b=2.0 * 0.1 * 0.08**3)
    beltrami_field(coupled, grid_u01, bound=3.0, u_index=0.08)
    with pytest.raises(CoefficientBoundError):
        beltrami_field(coupled, grid_u01, bound=1.0, u_index=0.08)


def test_sets_enforce_bound(grid_u01: TauGrid) -> None:
    bset = BeltramiSet(
        grids=(grid_u01,),
        specs={(0, 0): BeltramiSpec(0, 0, Case.DIAGONAL, b=1.0)},
        n=1,
        coefficient_bound=1.0,
    )
    with pytest.raises(CoefficientBoundError):
        wp_metric(bset)
    qset = QuadDiffSet(
        grids=(grid_u01,),
        specs={(0, 0): QuadDiffSpec(0, 0, Case.DIAGONAL, beta=1.0, alpha={1: 1e9})},
        n=1,
        coefficient_bound=1.0,
    )
    with pytest.raises(CoefficientBoundError):
        wp_cometric(qset)


def test_model_family_checks_coupling() -> None:
    with pytest.raises(CoefficientBoundError):
        model_family([0.1, 0.08], n_tau=512, kappa=50.0)
    bset = model_family([0.1, 0.08], n_tau=512, kappa=50.0, coefficient_bound=None)
    assert bset.spec(1, 0).b == pytest.approx(50.0 * 0.1 * 0.08**3)
    assert model_family([0.1], n_tau=512).coefficient_bound == DEFAULT_COEFFICIENT_BOUND
