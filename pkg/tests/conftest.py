import warnings

import numpy as np
import pytest

from pseudolattice.diophantine import DiophantineParams
from pseudolattice.geometry import AnnularSector, Rect
from pseudolattice.models import champagne_bottle, flat_model
from pseudolattice.monodromy import covering_from_domains
from pseudolattice.pipeline import SpectralSettings, spectral_monodromy
from pseudolattice.spectrum import EmptyRectangle, SynthesisOptions

ANNULUS_LOOP = ["A", "B", "C", "D"]
DISK_LOOP = ["P", "Q", "S", "R"]

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    print(line)
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_empty_rectangles():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyRectangle)
        yield


def annulus_covering():
    sector = lambda a, b: AnnularSector((0.0, 0.0), 0.13, 0.17, a, b)  # noqa: E731
    return covering_from_domains([("A", sector(-40, 110)), ("B", sector(50, 190)), ("C", sector(90, 250)), ("D", sector(200, 340))])


def disk_covering(center=(1.0, 0.5), half=0.05, overlap=0.01):
    E, G = center
    lo, hi = -half, half
    return covering_from_domains(
        [
            ("P", Rect(E + lo, E + overlap, G + lo, G + overlap)),
            ("Q", Rect(E - overlap, E + hi, G + lo, G + overlap)),
            ("R", Rect(E + lo, E + overlap, G - overlap, G + hi)),
            ("S", Rect(E - overlap, E + hi, G - overlap, G + hi)),
        ]
    )


@pytest.fixture(scope="session")
def champagne():
    return champagne_bottle()


@pytest.fixture(scope="session")
def identity_model():
    return flat_model(np.eye(2))


@pytest.fixture(scope="session")
def params():
    return DiophantineParams(0.05)


_runs: dict = {}


def annulus_run(jitter=8, lam=0.0):
    """Cached spectral pipeline over the annulus covering (h = 1e-3, eps = 1e-2)."""
    key = (jitter, lam)
    if key not in _runs:
        model = champagne_bottle().with_perturbation(lam)
        settings = SpectralSettings(options=SynthesisOptions(jitter))
        _runs[key] = spectral_monodromy(model, annulus_covering(), ANNULUS_LOOP, settings, DiophantineParams(0.05))
    return _runs[key]


@pytest.fixture(scope="session")
def annulus():
    return annulus_run()
