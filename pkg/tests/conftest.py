import numpy as np
import pytest

from echopanel.signals import Signal
from echopanel.sigproc import generate_sweep


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_sweep():
    return generate_sweep(duration=0.1)


def impulse(n, at, fs=96000, amp=1.0):
    x = np.zeros(n)
    x[at] = amp
    return Signal(x, fs, "impulse_response")
