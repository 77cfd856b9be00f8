"""pytest 公共夹具：低分辨率 collar 网格与 pure 模型引擎（模块内复用）。"""
import numpy as np
import pytest

from engines.collar_model.collar import TauGrid, collar_from_u
from engines.collar_model.curvature import CurvatureEngine
from engines.collar_model.differentials import model_family

TEST_N_TAU = 1024


@pytest.fixture(scope="module")
def grid_u01() -> TauGrid:
    return TauGrid.build(collar_from_u(0.1, 0.5), TEST_N_TAU)


@pytest.fixture(scope="module")
def grid_u005() -> TauGrid:
    return TauGrid.build(collar_from_u(0.05, 0.5), TEST_N_TAU)


@pytest.fixture(scope="module")
def engine_u0025() -> CurvatureEngine:
    """单 collar pure 模型，u = 0.025（常数带检查所在的 u）。"""
    return CurvatureEngine(model_family([0.025], n_tau=TEST_N_TAU))


@pytest.fixture(scope="module")
def engine_u005() -> CurvatureEngine:
    return CurvatureEngine(model_family([0.05], n_tau=TEST_N_TAU))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
