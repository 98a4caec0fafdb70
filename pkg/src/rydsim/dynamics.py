"""Fixed-step time propagation for closed (Schroedinger) and open (Lindblad) systems.

The integrator is classical fourth-order Runge-Kutta on a uniform grid with
internal substepping. Because every generator here is time independent, one
RK4 step is the fixed linear map ``1 + A + A^2/2 + A^3/6 + A^4/24`` with
``A = L h``; we build that map once and raise it to the substep count, which
is the same arithmetic as stepping but runs in ``O(log substeps)`` products.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .qkernel import QuantumState

DEFAULT_TOL = 1e-8
STEPS_PER_UNIT = 50
MAX_REFINEMENTS = 8
# Largest Hilbert dimension whose Lindblad superoperator (dim^2 x dim^2) we build.
SUPEROP_MAX_DIM = 32


class IntegrationError(RuntimeError):
    """Tolerance not met within the step-count budget."""


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)


@dataclass
class Trajectory:
    """States on a time grid; ``states`` is stacked along axis 0."""

    grid: TimeGrid
    states: np.ndarray
    kind: str
    basis: object
    substeps: int = 0

    def __len__(self):
        return self.grid.n_points

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def state(self, i: int) -> QuantumState:
        return QuantumState(self.states[i], self.basis, self.kind)

    def final(self) -> QuantumState:
        return self.state(len(self) - 1)

    def populations(self) -> np.ndarray:
        """Shape ``(n_points, dim)``."""
        if self.kind == "pure":
            return np.abs(self.states) ** 2
        return np.einsum("tii->ti", self.states).real


def _rk4_map(a: np.ndarray) -> np.ndarray:
    """One RK4 step of ``dx/dt = G x`` as a matrix, with ``a = G h``."""
    eye = np.eye(a.shape[0], dtype=complex)
    a2 = a @ a
    a3 = a2 @ a
    return eye + a + a2 / 2 + a3 / 6 + (a3 @ a) / 24


def _default_substeps(dt: float, scale: float) -> int:
    return max(1, ceil(dt * STEPS_PER_UNIT * scale - 1e-9))


def _generator_scale(h: np.ndarray, collapse) -> float:
    """Largest entry of ``H`` or of ``sum O^dag O``; sets the substep size."""
    loss = sum((o.conj().T @ o for o in collapse), np.zeros_like(h))
    return max(float(np.max(np.abs(h), initial=0.0)), float(np.max(np.abs(loss), initial=0.0)))


def _check_hermitian(h: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10 * scale:
        raise ValueError("Hamiltonian is not Hermitian")


def _as_state(state, kind: str) -> QuantumState:
    if not isinstance(state, QuantumState):
        raise TypeError("initial state must be a QuantumState")
    if kind == "mixed" and state.kind == "pure":
        state = QuantumState(state.density(), state.basis, "mixed")
    if state.kind != kind:
        raise ValueError(f"expected a {kind} state, got {state.kind}")
    return state


def propagate_state(h, psi0: QuantumState, grid: TimeGrid, tol: float = DEFAULT_TOL,
                    substeps: int | None = None, method: str = "rk4",
                    allow_nonhermitian: bool = False) -> Trajectory:
    """Solve ``dpsi/dt = -i H psi`` on ``grid``.

    Parameters
    ----------
    h : ndarray
        Generator, Hermitian unless ``allow_nonhermitian`` (no-jump runs,
        where the norm check is skipped).
    psi0 : QuantumState
        Pure initial state, placed at ``grid.t_start``.
    tol : float
        Allowed norm drift. The substep count is doubled until it holds;
        accepted Hermitian runs are then renormalized.
    substeps : int, optional
        Fix the RK4 substeps per grid interval and skip refinement.
    method : {"rk4", "eig"}
        ``"eig"`` steps with the exact propagator instead.
    """
    h = np.asarray(h, dtype=complex)
    psi0 = _as_state(psi0, "pure")
    if h.shape != (psi0.dim, psi0.dim):
        raise ValueError(f"H shape {h.shape} does not match state dim {psi0.dim}")
    if not allow_nonhermitian:
        _check_hermitian(h)
    dt = grid.dt

    if method == "eig":
        maps = [(propagator_matrix(h, dt) if not allow_nonhermitian
                 else _nonhermitian_propagator(h, dt), 0)]
    elif method == "rk4":
        scale = float(np.max(np.abs(h), initial=0.0))
        s = substeps or _default_substeps(dt, scale)
        maps = None
    else:
        raise ValueError(f"unknown method {method!r}")

    for attempt in range(MAX_REFINEMENTS + 1):
        if method == "rk4":
            step = _rk4_map(-1j * h * (dt / s))
            grid_map = np.linalg.matrix_power(step, s)
        else:
            grid_map, s = maps[0]
        states = np.empty((grid.n_points, psi0.dim), dtype=complex)
        states[0] = psi0.data
        for k in range(1, grid.n_points):
            states[k] = grid_map @ states[k - 1]
        if not np.all(np.isfinite(states)):
            raise IntegrationError("non-finite amplitudes during propagation")
        if allow_nonhermitian or method == "eig" or substeps is not None:
            break
        drift = np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0))
        if drift <= tol:
            break
        s *= 2
    else:
        raise IntegrationError(
            f"norm drift {drift:.3g} > tol {tol:.3g} after {MAX_REFINEMENTS} refinements"
        )
    if not allow_nonhermitian:
        states /= np.linalg.norm(states, axis=1, keepdims=True)
    return Trajectory(grid, states, "pure", psi0.basis, s)


def _nonhermitian_propagator(h: np.ndarray, t: float) -> np.ndarray:
    from scipy.linalg import expm

    return expm(-1j * h * t)


def lindblad_superoperator(h, collapse) -> np.ndarray:
    """Generator acting on row-major ``rho.reshape(-1)``.

    Uses ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for o in collapse:
        o = np.asarray(o, dtype=complex)
        od = o.conj().T @ o
        sup += np.kron(o, o.conj()) - 0.5 * np.kron(od, eye) - 0.5 * np.kron(eye, od.T)
    return sup


def _lindblad_rhs(h, collapse, loss):
    def rhs(rho):
        out = -1j * (h @ rho - rho @ h) - 0.5 * (loss @ rho + rho @ loss)
        for o in collapse:
            out += o @ rho @ o.conj().T
        return out
    return rhs


def _density_ok(rho: np.ndarray) -> float:
    """Worst violation of trace, Hermiticity and positivity (scaled) bounds."""
    tr = abs(np.trace(rho).real - 1.0)
    herm = np.max(np.abs(rho - rho.conj().T))
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    neg = max(0.0, -lo) / 10.0
    return max(tr, herm, neg)


def propagate_density(h, collapse, rho0: QuantumState, grid: TimeGrid,
                      tol: float = DEFAULT_TOL, substeps: int | None = None) -> Trajectory:
    """Solve the Lindblad master equation on ``grid``.

    ``drho/dt = -i[H, rho] + sum_k (O_k rho O_k^dag - {O_k^dag O_k, rho}/2)``.
    Trace and Hermiticity must hold within ``tol`` and the smallest eigenvalue
    must stay above ``-10 tol`` at every grid point; otherwise the substep
    count is doubled. Accepted states are symmetrized and trace-normalized.
    """
    h = np.asarray(h, dtype=complex)
    collapse = [np.asarray(o, dtype=complex) for o in collapse]
    rho0 = _as_state(rho0, "mixed")
    d = rho0.dim
    if h.shape != (d, d):
        raise ValueError(f"H shape {h.shape} does not match state dim {d}")
    for o in collapse:
        if o.shape != (d, d):
            raise ValueError(f"collapse operator shape {o.shape} != ({d}, {d})")
    _check_hermitian(h)
    loss = sum((o.conj().T @ o for o in collapse), np.zeros_like(h))
    dt = grid.dt
    s = substeps or _default_substeps(dt, _generator_scale(h, collapse))
    sup = lindblad_superoperator(h, collapse) if d <= SUPEROP_MAX_DIM else None
    rhs = None if sup is not None else _lindblad_rhs(h, collapse, loss)

    for attempt in range(MAX_REFINEMENTS + 1):
        states = np.empty((grid.n_points, d, d), dtype=complex)
        states[0] = rho0.data
        if sup is not None:
            grid_map = np.linalg.matrix_power(_rk4_map(sup * (dt / s)), s)
            for k in range(1, grid.n_points):
                states[k] = (grid_map @ states[k - 1].reshape(-1)).reshape(d, d)
        else:
            hs = dt / s
            rho = states[0].copy()
            for k in range(1, grid.n_points):
                for _ in range(s):
                    k1 = rhs(rho)
                    k2 = rhs(rho + 0.5 * hs * k1)
                    k3 = rhs(rho + 0.5 * hs * k2)
                    k4 = rhs(rho + hs * k3)
                    rho = rho + hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                states[k] = rho
        if not np.all(np.isfinite(states)):
            raise IntegrationError("non-finite density matrix during propagation")
        if substeps is not None:
            break
        worst = max(_density_ok(r) for r in states)
        if worst <= tol:
            break
        s *= 2
    else:
        raise IntegrationError(
            f"density invariants violated by {worst:.3g} > tol {tol:.3g} "
            f"after {MAX_REFINEMENTS} refinements"
        )
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))
    states /= np.einsum("tii->t", states).real[:, None, None]
    return Trajectory(grid, states, "mixed", rho0.basis, s)


def propagator_matrix(h, t: float) -> np.ndarray:
    """``exp(-i H t)`` by Hermitian eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def lindblad_map(h, collapse, t: float, substeps: int | None = None) -> np.ndarray:
    """RK4 superoperator taking row-major ``vec(rho(0))`` to ``vec(rho(t))``."""
    h = np.asarray(h, dtype=complex)
    if h.shape[0] > SUPEROP_MAX_DIM:
        raise ValueError(f"dim {h.shape[0]} too large for a dense superoperator")
    _check_hermitian(h)
    sup = lindblad_superoperator(h, collapse)
    s = substeps or _default_substeps(t, _generator_scale(h, collapse))
    return np.linalg.matrix_power(_rk4_map(sup * (t / s)), s)
