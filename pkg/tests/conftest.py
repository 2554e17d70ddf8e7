import numpy as np
import pytest

from torusmf import Field, TorusSpec, grid_coordinates, make_spec, random_low_mode_field


@pytest.fixture(scope="session")
def spec64() -> TorusSpec:
    return make_spec(1, 64)


@pytest.fixture(scope="session")
def spec32() -> TorusSpec:
    return make_spec(1, 32)


def cos_mode(spec: TorusSpec, axis: int = 0, freq: int = 1) -> Field:
    """cos(2 pi freq x_axis) sampled on the grid."""
    x = grid_coordinates(spec)[axis]
    vals = np.broadcast_to(np.cos(2.0 * np.pi * freq * x), spec.shape).copy()
    return Field(spec, vals)


def sin_mode(spec: TorusSpec, axis: int = 0, freq: int = 1) -> Field:
    x = grid_coordinates(spec)[axis]
    vals = np.broadcast_to(np.sin(2.0 * np.pi * freq * x), spec.shape).copy()
    return Field(spec, vals)


def smooth_field(spec: TorusSpec, seed: int, norm: float = 1.0) -> Field:
    """Deterministic random band-limited mean-zero field with given H^m norm."""
    return random_low_mode_field(spec, np.random.default_rng(seed), norm, max_wavenumber=3)
