import numpy as np
import pytest

from micropolar import field as fd
from micropolar.synth import random_field


def brute_dft(f):
    """O(n^4) forward DFT with the package normalization (constant c -> c)."""
    n = f.shape[0]
    x = 2 * np.pi * np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    F = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            phase = np.exp(-1j * (k[a] * x[:, None] + k[b] * x[None, :]))
            F[a, b] = np.sum(f * phase) / n**2
    return F


def brute_idft(F):
    n = F.shape[0]
    x = 2 * np.pi * np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    f = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            f += F[a, b] * np.exp(1j * (k[a] * x[:, None] + k[b] * x[None, :]))
    return f


def trig_interpolant(F, x1, x2):
    """Evaluate the trigonometric interpolant of F at off-grid points."""
    n = F.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    out = np.zeros(np.shape(x1), dtype=complex)
    for a in range(n):
        for b in range(n):
            if F[a, b] != 0:
                out = out + F[a, b] * np.exp(1j * (k[a] * x1 + k[b] * x2))
    return out.real


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid64():
    return fd.get_grid(64)


def smooth(n, rng, **kw):
    kw.setdefault("kmax", min(8, n // 2 - 1))
    return random_field(n, rng, **kw)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Collects one status line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
