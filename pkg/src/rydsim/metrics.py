"""Fidelities for GHZ preparation and the multi-qubit phase gate."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid, lindblad_map, propagate_density, propagator_matrix
from .model import THREE_LEVEL, GateTarget, build_gate_target
from .qkernel import AtomBasis, QuantumState

DIAGONAL_DOMINANCE = 0.1


class GateError(ValueError):
    """Extracted gate is too far from diagonal for phase extraction."""


@dataclass(frozen=True)
class ExtractedGate:
    n_qubits: int
    matrix: np.ndarray
    leakage: float


def state_fidelity(state: QuantumState, target: QuantumState) -> float:
    """``|<phi|psi>|^2`` or ``<phi|rho|phi>`` for a pure ``target``."""
    if target.kind != "pure":
        raise ValueError("target must be a pure state")
    if state.dim != target.dim:
        raise ValueError(f"dimension mismatch: {state.dim} vs {target.dim}")
    phi = target.data
    if state.kind == "pure":
        return float(abs(np.vdot(phi, state.data)) ** 2)
    return float(np.vdot(phi, state.data @ phi).real)


def ghz_values(states: np.ndarray, kind: str, basis) -> np.ndarray:
    """GHZ fidelity for a stack of states (see :func:`ghz_fidelity`)."""
    i1, ir = basis.all_ones_index(), basis.all_rydberg_index()
    if kind == "pure":
        a, b = states[..., i1], states[..., ir]
        plus = np.abs(a - 1j * b) ** 2 / 2
        minus = np.abs(a + 1j * b) ** 2 / 2
    else:
        base = 0.5 * (states[..., i1, i1].real + states[..., ir, ir].real)
        cross = states[..., i1, ir]
        plus = base + (1j * cross).real
        minus = base - (1j * cross).real
    return np.maximum(plus, minus)


def ghz_fidelity(state: QuantumState, n_atoms: int) -> float:
    """Overlap with ``(|1..1> + e^{i phi} |r..r>)/sqrt(2)``, maximized over ``phi = +-pi/2``.

    The sign of the relative phase depends on the sign conventions of the
    couplings; taking the larger of the two keeps the figure convention-free.
    """
    if getattr(state.basis, "n_atoms", None) != n_atoms:
        raise ValueError(f"state basis {state.basis.tag} is not an {n_atoms}-atom basis")
    return float(ghz_values(state.data, state.kind, state.basis))


def extract_gate(h, n_qubits: int, t: float, basis: AtomBasis | None = None) -> ExtractedGate:
    """Evolve every computational string for time ``t`` and project back.

    ``leakage`` is the largest probability any input string loses from the
    computational subspace.
    """
    basis = basis or AtomBasis(THREE_LEVEL, n_qubits)
    if basis.dim != np.shape(h)[0]:
        raise ValueError(f"H dim {np.shape(h)[0]} does not match basis dim {basis.dim}")
    idx = basis.computational_indices()
    g = propagator_matrix(h, t)[np.ix_(idx, idx)]
    leak = max(0.0, float(np.max(1.0 - np.sum(np.abs(g) ** 2, axis=0))))
    return ExtractedGate(n_qubits, g, leak)


def gate_curve(h, n_qubits: int, times, basis: AtomBasis | None = None) -> np.ndarray:
    """Projected gate matrices at each time, shape ``(len(times), 2^N, 2^N)``."""
    basis = basis or AtomBasis(THREE_LEVEL, n_qubits)
    idx = basis.computational_indices()
    w, v = np.linalg.eigh(np.asarray(h, dtype=complex))
    vc = v[idx]
    phases = np.exp(-1j * np.outer(np.asarray(times), w))
    return np.einsum("ik,tk,jk->tij", vc, phases, vc.conj())


def _check_sizes(gate: ExtractedGate, target: GateTarget) -> None:
    if gate.matrix.shape != target.matrix.shape:
        raise ValueError(f"gate {gate.matrix.shape} vs target {target.matrix.shape}")


def unitary_gate_fidelity(gate: ExtractedGate, target: GateTarget) -> float:
    """``|tr(U^dag U_target)| / 2^N``."""
    _check_sizes(gate, target)
    d = target.matrix.shape[0]
    return float(abs(np.trace(gate.matrix.conj().T @ target.matrix)) / d)


def extract_alpha(gate: ExtractedGate) -> float:
    """Single-qubit phase, averaged over the strings with one ``|1>``, in ``[0, 2 pi)``."""
    m = gate.matrix
    off = np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0)
    if gate.leakage + off >= DIAGONAL_DOMINANCE:
        raise GateError(f"gate not diagonal-dominant: leakage {gate.leakage:.3g}, "
                        f"max off-diagonal {off:.3g}")
    return single_qubit_phase(m, gate.n_qubits)


def single_qubit_phase(matrix, n_qubits: int) -> float:
    """Circular mean phase of the diagonal entries with exactly one ``|1>``."""
    single = [1 << (n_qubits - 1 - q) for q in range(n_qubits)]
    d = np.diag(matrix)[single]
    return float(np.mod(np.angle(np.mean(d / np.abs(d))), 2 * np.pi))


def equal_weight_input(n_qubits: int, basis: AtomBasis) -> np.ndarray:
    """Equal superposition of all computational strings, as a vector in ``basis``."""
    v = np.zeros(basis.dim, dtype=complex)
    v[basis.computational_indices()] = 2 ** (-n_qubits / 2)
    return v


def ideal_output(target: GateTarget, basis: AtomBasis) -> np.ndarray:
    v = np.zeros(basis.dim, dtype=complex)
    v[basis.computational_indices()] = np.diag(target.matrix) * 2 ** (-target.n_qubits / 2)
    return v


def dissipative_gate_fidelity(h, collapse, target: GateTarget, t: float,
                              basis: AtomBasis | None = None, tol: float = 1e-8) -> float:
    """Input-state gate fidelity under the master equation.

    The equal-weight computational superposition is evolved to ``t`` and
    compared with the ideal output ``U_target |Psi(0)>``.
    """
    basis = basis or AtomBasis(THREE_LEVEL, target.n_qubits)
    psi0 = QuantumState(equal_weight_input(target.n_qubits, basis), basis)
    traj = propagate_density(h, collapse, psi0, TimeGrid(0.0, t, 2), tol=tol)
    ideal = QuantumState(ideal_output(target, basis), basis)
    return state_fidelity(traj.final(), ideal)


def process_gate_fidelity(h, collapse, target: GateTarget, t: float,
                          basis: AtomBasis | None = None) -> float:
    """Trace-overlap gate fidelity of the channel restricted to the qubit subspace.

    Square root of the process fidelity ``sum_ij <i|T^dag E(|i><j|) T|j> / d^2``;
    for a unitary channel this equals ``|tr(U^dag T)| / d``.
    """
    basis = basis or AtomBasis(THREE_LEVEL, target.n_qubits)
    idx = basis.computational_indices()
    dim = basis.dim
    chan = lindblad_map(h, collapse, t)
    tdiag = np.diag(target.matrix)
    total = 0.0 + 0.0j
    for (a, i), (b, j) in itertools.product(enumerate(idx), repeat=2):
        col = chan[:, i * dim + j]
        total += np.conj(tdiag[a]) * tdiag[b] * col[i * dim + j]
    f = total.real / len(idx) ** 2
    return float(np.sqrt(max(f, 0.0)))


def fitted_target(gate: ExtractedGate) -> GateTarget:
    """Diagonal target whose single-qubit phase is read off ``gate``."""
    return build_gate_target(gate.n_qubits, extract_alpha(gate))
