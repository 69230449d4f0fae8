import numpy as np
import pytest
from hypothesis import strategies as st

from oamtransfer.hilbert import PhotonState

# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def qubits(draw):
    """Normalized random qubit, never too close to the zero vector."""
    re = draw(st.lists(finite, min_size=2, max_size=2))
    im = draw(st.lists(finite, min_size=2, max_size=2))
    v = np.array(re) + 1j * np.array(im)
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([1.0, 0.0], dtype=complex), 1.0
    return v / n


@st.composite
def photon_states(draw, m_max=6, support=2):
    """Normalized single-path state with OAM content inside ``|m| <= support``."""
    n = 2 * (2 * support + 1)
    re = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    im = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    v = (re + 1j * im).reshape(2, 2 * support + 1)
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        v = np.zeros_like(v)
        v[0, support] = 1
        norm = 1.0
    amps = np.zeros((3, 2, 2 * m_max + 1), dtype=complex)
    amps[0, :, m_max - support : m_max + support + 1] = v / norm
    return PhotonState(amps)


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
