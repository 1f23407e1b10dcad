import json
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).resolve().parents[1] / "src" / "hjflow" / "data"


def load_doc(name: str) -> dict:
    return json.loads((DATA / name).read_text())


@pytest.fixture
def data_dir() -> Path:
    return DATA


def free_kernel_oracle(spec, delta: float, params, x, y):
    """Periodic free propagator on the grid's momentum lattice, summed mode
    by mode (no FFT):  (1/L) sum_k exp(i k (x - y)) exp(i delta (k^2 + m^2)/(2 pi_+))."""
    ks = 2 * np.pi / spec.l * np.arange(-spec.n // 2, spec.n // 2)
    d = np.subtract.outer(np.asarray(x, float), np.asarray(y, float))
    out = np.zeros(d.shape, dtype=complex)
    for k in ks:
        out += np.exp(1j * k * d) * np.exp(1j * delta * (k * k + params.m ** 2) / (2 * params.pi_plus))
    return out / spec.l
