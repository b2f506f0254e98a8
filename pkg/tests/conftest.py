from __future__ import annotations

import json
from collections.abc import Callable, Iterator
from pathlib import Path
from typing import Any

import pytest

from segmarket.core.config import get_settings
from segmarket.core.signal import SignalModel
from segmarket.core.valuation import calibrate_to_unit_values, derive_valuations
from segmarket.schemas.params import ModelParams

# Shared primitives of every worked example; w_h and y_h are calibrated
BASE_CALIBRATION: dict[str, float] = {"r": 0.75, "y_l": 0.5, "w_l": 0.495, "b": 0.2}


def calibrated(beta: float, phi: float, psi: float = 0.25, **extra: float) -> ModelParams:
    c = BASE_CALIBRATION
    return calibrate_to_unit_values(beta, phi, c["r"], c["y_l"], c["w_l"], c["b"], psi=psi, **extra)


@pytest.fixture(autouse=True)
def fresh_caches() -> Iterator[None]:
    yield
    get_settings.cache_clear()
    derive_valuations.cache_clear()


@pytest.fixture(scope="session")
def calibrate() -> Callable[..., ModelParams]:
    return calibrated


@pytest.fixture(scope="session")
def triangular() -> SignalModel:
    return SignalModel.triangular()


@pytest.fixture(scope="session")
def example1() -> ModelParams:
    """Unique equilibrium: both sectors active, qualified workers refuse low tech."""
    return calibrated(0.9, 0.06)


@pytest.fixture(scope="session")
def example2() -> ModelParams:
    """Three equilibria: refuse, mix and accept."""
    return calibrated(0.99, 0.08)


@pytest.fixture(scope="session")
def low_tech_example() -> ModelParams:
    return calibrated(0.99, 0.15, psi=0.075)


@pytest.fixture(scope="session")
def high_tech_example() -> ModelParams:
    return calibrated(0.99, 0.15, psi=0.75)


@pytest.fixture(scope="session")
def accept_example() -> ModelParams:
    return calibrated(0.8, 0.06)


@pytest.fixture(scope="session")
def female_mixing_example() -> ModelParams:
    """Example 1 with a scarcer qualified population; group f mixes at equal masses."""
    return calibrated(0.9, 0.06, psi=0.15)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    def _write(document: dict[str, Any], name: str = "run.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def example1_config() -> dict[str, Any]:
    return {"calibrate": {"beta": 0.9, "phi": 0.06, "psi": 0.25, **BASE_CALIBRATION}}


@pytest.fixture
def example2_config() -> dict[str, Any]:
    return {"calibrate": {"beta": 0.99, "phi": 0.08, "psi": 0.25, **BASE_CALIBRATION}}
