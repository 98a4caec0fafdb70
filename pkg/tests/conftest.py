import numpy as np
import pytest

from rydsim.metrics import ghz_values
from rydsim.model import THREE_LEVEL, PhysParams, build_eliminated_h, collapse_ops
from rydsim.qkernel import AtomBasis


def eliminated_system(n_atoms, delta, gamma=0.0, u=None):
    """Shift-absorbed three-level Hamiltonian at resonant U, in units of Omega_eff."""
    basis = AtomBasis(THREE_LEVEL, n_atoms)
    p = PhysParams.effective(n_atoms, delta, u, gamma)
    return build_eliminated_h(p, absorb_shifts=True, basis=basis), collapse_ops(p, basis), basis


def ghz_curve(h, basis, times):
    """Closed-system GHZ fidelity from ``|1..1>`` by eigendecomposition."""
    w, v = np.linalg.eigh(h)
    c0 = v[basis.all_ones_index()].conj()
    states = (v[None, :, :] * (np.exp(-1j * np.outer(times, w)) * c0)[:, None, :]).sum(-1)
    return ghz_values(states, "pure", basis)


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
