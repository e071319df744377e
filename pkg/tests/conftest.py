import numpy as np
import pytest
import yaml

from src.engine.gridfn import DipoleSpec, GridParams, make_dipole
from src.engine.kernel import ConvolutionSettings, KernelSpec
from src.engine.phi import PhiSpec
from src.engine.verify.convolver import VerifyOptions


@pytest.fixture
def sign_kernel():
    """K(x) = |x|^{-1/2} sign(x) on the line, p = 2."""
    return KernelSpec(d=1, ell=1, alpha=0.5, tilde_k="sign")


@pytest.fixture
def signed_square():
    """Phi(t) = t|t|, cancels against the sign profile."""
    return PhiSpec(ell=1, p=2.0, family="signed_power")


@pytest.fixture
def square():
    """Phi(t) = t^2, never cancels."""
    return PhiSpec(ell=1, p=2.0, family="norm_power")


@pytest.fixture
def identity_kernel_2d():
    """K(x) = x / |x|^2 in the plane, p = 2."""
    return KernelSpec(d=2, ell=2, alpha=1.0, tilde_k="identity")


@pytest.fixture
def small_grid():
    return GridParams(d=1, half_width=0.5, cells_per_axis=128)


@pytest.fixture
def default_grid():
    return GridParams(d=1, half_width=0.5, cells_per_axis=1024)


@pytest.fixture
def options():
    return VerifyOptions()


@pytest.fixture
def small_dipole(small_grid):
    return make_dipole(DipoleSpec.symmetric((0.5,), 0.0625), small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML config from a dict and return its path."""
    def _write(data, name="run.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def tiny_config():
    return {
        "grid": {"cells_per_axis": 64},
        "suite": {"statements": ["main", "pair_moment"], "n_values": [0]},
        "family": {"widths": [0.125], "scales": [1.0, 2.0], "random_members": 0},
        "output": {"formats": ["csv"]},
    }


@pytest.fixture
def coarse_settings():
    return ConvolutionSettings(far_field_radius=1.0, subgrid_bands="absorb")
