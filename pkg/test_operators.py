import math

import numpy as np
import pytest

from engines.collar_model.asymptotics import collar_area
from engines.collar_model.collar import TauGrid
from engines.collar_model.differentials import BeltramiSpec, Case, beltrami_field
from engines.collar_model.fields import CollarField
from engines.collar_model.green import apply_box1, random_compact_field
from engines.collar_model.operators import (
    IndexTuple,
    UnsupportedNormOrderError,
    box,
    ck_norm,
    k0,
    k0_bar,
    l1_norm,
    maass,
    op_P,
    op_P_bar,
    qkl_sides,
    symmetrize,
    xi,
    xi_bar,
)


def test_P_is_composed_maass(grid_u01: TauGrid, rng: np.random.Generator) -> None:
    f = random_compact_field(grid_u01, rng)
    composed = maass(1, maass(0, f, "K"), "K")
    direct = op_P(f)
    assert (composed - direct).sup() <= 1e-10 * direct.sup()


def test_P_bar_is_conjugate(grid_u01: TauGrid, rng: np.random.Generator) -> None:
    f = random_compact_field(grid_u01, rng)
    # f 实值：P̄f = conj(P f)
    assert (op_P_bar(f) - op_P(f).conj()).sup() <= 1e-12 * op_P(f).sup()


def test_maass_rejects_unknown_kind(grid_u01: TauGrid) -> None:
    with pytest.raises(ValueError):
        maass(0, CollarField.constant(grid_u01, 1.0), "M")


def test_k0_of_constant_vanishes(grid_u01: TauGrid) -> None:
    one = CollarField.constant(grid_u01, 1.0)
    assert k0(one).sup() <= 1e-8
    assert k0_bar(one).sup() <= 1e-8


def test_box_of_constant(grid_u01: TauGrid) -> None:
    one = CollarField.constant(grid_u01, 1.0)
    assert box(one).sup() <= 1e-8
    assert np.allclose(apply_box1(one).mode(0), 1.0, atol=1e-8)
    with pytest.raises(ValueError):
        box(CollarField.coordinate_z(grid_u01))


def test_xi_on_harmonic_beltrami(grid_u01: TauGrid, rng: np.random.Generator) -> None:
    u = grid_u01.params.u
    f = random_compact_field(grid_u01, rng)
    A = beltrami_field(BeltramiSpec(0, 0, Case.DIAGONAL, b=(0.3 - 0.7j) * u / math.pi), grid_u01)
    xi_f = xi(A, f)
    assert (xi_f + A * op_P(f)).sup() <= 1e-6 * xi_f.sup()
    assert (xi_bar(A, f) - xi_f.conj()).sup() <= 1e-12 * xi_f.sup()


def test_symmetrize_term_counts() -> None:
    idx = IndexTuple(0, 1, 2, 0, 1, 2)
    assert symmetrize(lambda _: 1, "sigma1", idx) == 6
    assert symmetrize(lambda _: 1, "sigma2", idx) == 2
    assert symmetrize(lambda _: 1, "sigma1_tilde", idx) == 6
    # σ₂ 交换 j 与 β
    seen = []
    symmetrize(lambda t: seen.append((t.j, t.beta)) or 0, "sigma2", idx)
    assert sorted(seen) == [(0, 2), (2, 0)]
    with pytest.raises(ValueError):
        symmetrize(lambda _: 1, "sigma3", idx)


def test_index_tuple_range() -> None:
    IndexTuple(0, 1, 0, 1, 0, 1).check(2)
    with pytest.raises(ValueError):
        IndexTuple(0, 0, 0, 0, 0, 3).check(2)


def test_ck_norm(grid_u01: TauGrid, rng: np.random.Generator) -> None:
    f = random_compact_field(grid_u01, rng)
    assert ck_norm(f, 0) == pytest.approx(f.sup())
    assert ck_norm(f, 2) >= ck_norm(f, 1) >= ck_norm(f, 0)
    assert ck_norm(CollarField.zeros(grid_u01), 2) == 0.0
    with pytest.raises(UnsupportedNormOrderError):
        ck_norm(f, 3)


def test_l1_norm_of_one_is_area(grid_u01: TauGrid) -> None:
    assert l1_norm(CollarField.constant(grid_u01, 1.0)) == pytest.approx(collar_area(grid_u01), rel=1e-12)
    with pytest.raises(ValueError):
        l1_norm(CollarField.coordinate_z(grid_u01))


def test_q_pairing_integration_by_parts(grid_u01: TauGrid, rng: np.random.Generator) -> None:
    fields = [random_compact_field(grid_u01, rng, c_inner=0.1) for _ in range(3)]
    e_kl = fields[2]
    sides = qkl_sides(fields[0], fields[1], e_kl, apply_box1(e_kl))
    assert abs(sides["lhs"] - sides["rhs"]) <= 1e-4 * abs(sides["lhs"])
