import numpy as np
import pytest

from friedrichs import geometry


def smooth_bump(xs, center=0.5, width=0.2, amplitude=1.0):
    """C^∞ bump supported in |x - center| < width."""
    s = (np.asarray(xs) - center) / width
    out = np.zeros_like(s, dtype=float)
    inside = np.abs(s) < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@pytest.fixture
def strip():
    return geometry.minkowski_strip((0.0, 1.0), (1.0,))


@pytest.fixture
def short_strip():
    return geometry.minkowski_strip((0.0, 0.4), (1.0,))


@pytest.fixture
def curved_strip():
    return geometry.ultrastatic((0.0, 1.0), (1.0,), eps=0.3)
