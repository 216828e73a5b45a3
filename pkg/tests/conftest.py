from __future__ import annotations

import json
from pathlib import Path as FsPath
from typing import Any, Callable

import numpy as np
import pytest

from omtube.model import DriftModel, SdeSystem
from omtube.simulate import Path


@pytest.fixture
def double_well() -> SdeSystem:
    return SdeSystem(DriftModel.from_preset("double-well"), c=1.0, l=5.0, x0=-1.0, xf=1.0)


@pytest.fixture
def brownian() -> SdeSystem:
    return SdeSystem(DriftModel.from_preset("brownian"), c=1.0, l=5.0, x0=0.0, xf=1.0)


@pytest.fixture
def ou() -> SdeSystem:
    # not metastable at xf; used where validation is not involved
    return SdeSystem(DriftModel.from_preset("ou"), c=1.0, l=5.0, x0=0.0, xf=1.0)


@pytest.fixture
def make_line() -> Callable[..., Path]:
    """Straight path x0 -> xf over [0, T] with n steps."""

    def _line(x0: float, xf: float, T: float, n: int = 200) -> Path:
        return Path(0.0, T / n, np.linspace(x0, xf, n + 1))

    return _line


@pytest.fixture
def write_config(tmp_path: FsPath) -> Callable[..., FsPath]:
    def _write(name: str = "run.json", **overrides: Any) -> FsPath:
        target = tmp_path / name
        target.write_text(json.dumps(overrides))
        return target

    return _write


@pytest.fixture
def brownian_config(write_config: Callable[..., FsPath]) -> FsPath:
    return write_config(
        "brownian.json",
        drift={"preset": "brownian"},
        x0=0.0,
        xf=1.0,
        sim={"dt": 0.01, "horizon": 0.1, "seed": 3},
    )
