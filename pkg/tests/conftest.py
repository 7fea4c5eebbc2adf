import numpy as np
import pytest

from dme_dpd.plant import PlantModel
from dme_dpd.waveform import PulseSpec, SampledWaveform, generate_gaussian, generate_sfol_surrogate

FS = 40e6


@pytest.fixture(scope="session")
def sfol():
    return generate_sfol_surrogate(PulseSpec())


@pytest.fixture(scope="session")
def gaussian():
    return generate_gaussian(PulseSpec(kind="gaussian", width_us=3.5))


@pytest.fixture(scope="session")
def reference_plant():
    return PlantModel.reference()


def triangle(base_us=4.0, fs=FS, pad_us=4.0):
    """Symmetric triangle with unit peak on an exact sample."""
    half = int(round(base_us / 2 * 1e-6 * fs))
    pad = int(round(pad_us * 1e-6 * fs))
    edge = np.arange(half + 1) / half
    s = np.concatenate([np.zeros(pad), edge, edge[-2::-1], np.zeros(pad)])
    return SampledWaveform(s, fs, t0=-(pad + half) / fs)
