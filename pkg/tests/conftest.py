"""Shared fixtures: the microwave bench geometry used across the suite.

Central frequency 2.4 GHz in vacuum (wavelength 0.125 m), a square receiver
array of side 20 wavelengths in the x3 = 0 plane, imaging window of side 30
wavelengths centered 100 wavelengths above the array, and an off-axis source
one window-distance away.
"""

import numpy as np
import pytest

import polarmig as pm

LAMBDA0 = 0.125
L = 100 * LAMBDA0
OMEGA0 = 2 * np.pi * 2.4e9
BANDWIDTH = 2 * np.pi * 2.4e9
K0 = 2 * np.pi / LAMBDA0

ALPHA_1 = np.array(
    [[2 + 1j, -1j, 1], [-1j, 1 + 2j, 1j], [1, 1j, 1 + 1j]], dtype=complex
)
ALPHA_2 = np.array(
    [[2 + 2j, -1 + 1j, 0.5j], [-1 + 1j, 1 + 2j, 0], [0.5j, 0, 1]], dtype=complex
)
ALPHA_3 = np.array(
    [[2 - 2j, 1 + 1j, 0], [1 + 1j, 1 + 2j, (1 - 1j) / 2], [0, (1 - 1j) / 2, 1j]],
    dtype=complex,
)
DIPOLE_POSITIONS = [
    np.array([-6, -5, 100]) * LAMBDA0,
    np.array([7, -5, 100]) * LAMBDA0,
    np.array([5, 8, 106]) * LAMBDA0,
]
DIPOLE_TENSORS = [ALPHA_1, ALPHA_2, ALPHA_3]


def bench_source() -> pm.SourceSpec:
    return pm.SourceSpec(
        position=[L / 2, 0, L * (1 - np.sqrt(3 / 4))],
        reference_point=[0, 0, L],
    )


def bench_window() -> pm.ImagingWindow:
    return pm.ImagingWindow(
        center=[0, 0, L], cross_range=30 * LAMBDA0, range_extent=30 * LAMBDA0
    )


def bench_scene(scatterers, n: int = 31) -> pm.Scene:
    return pm.Scene(
        source=bench_source(),
        geom=pm.ArrayGeom(side=20 * LAMBDA0, n1=n, n2=n),
        window=bench_window(),
        scatterers=scatterers,
    )


def single_dipole_scene(n: int = 31) -> pm.Scene:
    return bench_scene([pm.Scatterer([0, 0, L], ALPHA_1)], n=n)


def three_dipole_scene(n: int = 31) -> pm.Scene:
    return bench_scene(
        [pm.Scatterer(p, a) for p, a in zip(DIPOLE_POSITIONS, DIPOLE_TENSORS)], n=n
    )


def band(count: int, width: float = BANDWIDTH) -> pm.FrequencyBand:
    return pm.FrequencyBand(center=OMEGA0, width=width, count=count)


def single_freq_band() -> pm.FrequencyBand:
    return pm.FrequencyBand(center=OMEGA0, width=0.0, count=1)


def projected_truth(alpha: np.ndarray, source: pm.SourceSpec) -> np.ndarray:
    return pm.CROSS_RANGE_BASIS.T @ alpha @ source.basis()


def random_symmetric_tensor(rng, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    return scale * (a + a.T) / 2


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
