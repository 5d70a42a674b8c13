import numpy as np
import pytest

from qdpc.fields import Shape
from qdpc.optics import OpticalConfig, build_transfer_functions

# Stock bench geometry: green LED, 0.3 NA, x10 objective, 3.46 um camera.
STOCK = dict(wavelength_um=0.53, na=0.3, magnification=10.0, camera_pixel_um=3.46)


def stock_config(n: int) -> OpticalConfig:
    return OpticalConfig(shape=Shape(n, n), **STOCK)


@pytest.fixture(scope="session")
def tfs16():
    return build_transfer_functions(stock_config(16))


@pytest.fixture(scope="session")
def tfs32():
    return build_transfer_functions(stock_config(32))


@pytest.fixture(scope="session")
def tfs64():
    return build_transfer_functions(stock_config(64))
