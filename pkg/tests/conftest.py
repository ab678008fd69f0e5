import warnings

import numpy as np
import pytest

from polybeam.acoustics import FreeFieldModel, RigidSphereModel
from polybeam.design import DesignSpec, design_beamformer
from polybeam.fir import RealizationWarning, realize_fir
from polybeam.geometry import make_pld_grid, spherical_cap_array

# acceptance outcomes, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def desk_spec(model, **kw):
    args = dict(fs=16000.0, fir_length=128, P=2, R=2,
                plds=make_pld_grid([60, 120], [60, 120], 30), gamma=0.01,
                beamwidth_3db=20.0, grid_step=10.0)
    args.update(kw)
    return DesignSpec(model, **args)


@pytest.fixture(scope="session")
def cap_array():
    return spherical_cap_array()


@pytest.fixture(scope="session")
def free_field(cap_array):
    return FreeFieldModel(cap_array)


@pytest.fixture(scope="session")
def rigid_sphere(cap_array):
    return RigidSphereModel.from_geometry(cap_array)


@pytest.fixture(scope="session")
def desk_free(free_field):
    spec = desk_spec(free_field)
    fw = design_beamformer(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RealizationWarning)
        bf = realize_fir(fw)
    return spec, fw, bf


@pytest.fixture(scope="session")
def desk_sphere(rigid_sphere):
    spec = desk_spec(rigid_sphere)
    fw = design_beamformer(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RealizationWarning)
        bf = realize_fir(fw)
    return spec, fw, bf


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
