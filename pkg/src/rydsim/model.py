"""Hamiltonians, collapse operators and gate targets for the Rydberg scheme.

All frequencies are in units of the effective two-photon Rabi frequency
(Omega = 1) unless a caller deliberately works in lab units; nothing here
depends on the unit choice. Decay is carried by Lindblad collapse operators,
with :func:`nonhermitian_h` available for no-jump cross-checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .qkernel import AtomBasis, embed, projector

FOUR_LEVEL = ("0", "1", "p", "r")
THREE_LEVEL = ("0", "1", "r")


@dataclass(frozen=True)
class InteractionSpec:
    c3: float
    r: float


@dataclass
class PhysParams:
    """Laser, detuning, interaction and decay parameters of the scheme.

    Parameters
    ----------
    omega_r, omega_b : float
        Red (``|1>-|p>``) and blue (``|p>-|r>``) Rabi frequencies.
    delta_big : float
        One-photon detuning of ``|p>``.
    delta : float
        Two-photon detuning of ``|r>``.
    u : float or array_like
        Uniform pair interaction, or an ``N x N`` symmetric matrix with zero
        diagonal.
    gamma_p, gamma_r : float
        Decay rates of ``|p>`` and ``|r>``.
    gamma0, gamma1 : float, optional
        Branching of ``|r>`` decay into ``|0>`` and ``|1>``. Default to an equal
        split of ``gamma_r``.
    p_branch0 : float
        Fraction of ``|p>`` decay going to ``|0>`` (rest to ``|1>``).
    """

    omega_r: float = 1.0
    omega_b: float = 1.0
    delta_big: float = 1.0
    delta: float = 0.0
    u: float | np.ndarray = 0.0
    gamma_p: float = 0.0
    gamma_r: float = 0.0
    gamma0: float | None = None
    gamma1: float | None = None
    n_atoms: int = 3
    p_branch0: float = 0.5

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.gamma0 is None and self.gamma1 is None:
            self.gamma0 = self.gamma1 = self.gamma_r / 2
        elif self.gamma0 is None or self.gamma1 is None:
            raise ValueError("give both gamma0 and gamma1, or neither")
        elif abs(self.gamma0 + self.gamma1 - self.gamma_r) > 1e-12:
            raise ValueError(
                f"gamma0 + gamma1 = {self.gamma0 + self.gamma1!r} != gamma_r = {self.gamma_r!r}"
            )
        for name in ("gamma_p", "gamma_r", "gamma0", "gamma1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.p_branch0 <= 1.0:
            raise ValueError("p_branch0 must lie in [0, 1]")
        self.u_matrix()

    @classmethod
    def effective(cls, n_atoms: int, delta: float, u: float | None = None, gamma: float = 0.0):
        """Parameters whose eliminated model has Omega_eff = 1.

        With ``omega_r = omega_b = delta_big = 1`` the effective coupling is 1;
        the accompanying Stark shifts are meant to be dropped via
        ``absorb_shifts=True``. ``u`` defaults to the resonant value.
        """
        if u is None:
            u = resonance_u(n_atoms, delta)
        return cls(omega_r=1.0, omega_b=1.0, delta_big=1.0, delta=delta, u=u,
                   gamma_r=gamma, n_atoms=n_atoms)

    def u_matrix(self) -> np.ndarray:
        n = self.n_atoms
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 0:
            m = np.full((n, n), float(u))
            np.fill_diagonal(m, 0.0)
            return m
        if u.shape != (n, n):
            raise ValueError(f"u matrix shape {u.shape} != ({n}, {n})")
        if np.max(np.abs(u - u.T)) > 0 or np.any(np.diag(u) != 0):
            raise ValueError("u matrix must be symmetric with zero diagonal")
        return u


@dataclass(frozen=True)
class GateTarget:
    n_qubits: int
    alpha: float
    matrix: np.ndarray


def rydberg_u(spec: InteractionSpec) -> float:
    """Dipole-dipole interaction ``C3 / r**3``."""
    if spec.r <= 0:
        raise ValueError(f"interatomic distance must be > 0, got {spec.r}")
    return spec.c3 / spec.r**3


def resonance_u(n_atoms: int, delta: float) -> float:
    """Interaction making ``|1..1>`` and ``|r..r>`` degenerate: ``C(N,2) U = N delta``."""
    if n_atoms < 2:
        raise ValueError(f"resonance needs n_atoms >= 2, got {n_atoms}")
    return n_atoms * delta / comb(n_atoms, 2)


def _pair_interaction(params: PhysParams, basis: AtomBasis) -> np.ndarray:
    u = params.u_matrix()
    rr = projector(basis, "r", "r")
    n_r = [np.diag(embed(rr, i, basis)).real for i in range(basis.n_atoms)]
    diag = np.zeros(basis.dim)
    for i, j in itertools.combinations(range(basis.n_atoms), 2):
        if u[i, j]:
            diag += u[i, j] * n_r[i] * n_r[j]
    return np.diag(diag).astype(complex)


def _check_basis(params: PhysParams, basis: AtomBasis, required) -> None:
    if basis.n_atoms != params.n_atoms:
        raise ValueError(f"basis has {basis.n_atoms} atoms, params {params.n_atoms}")
    missing = set(required) - set(basis.levels)
    if missing:
        raise ValueError(f"basis {basis.levels} lacks levels {sorted(missing)}")


def build_full_h(params: PhysParams, basis: AtomBasis | None = None):
    """Four-level rotating-frame Hamiltonian and its collapse operators.

    Returns
    -------
    h : ndarray
        Hermitian part: per-atom ``-Delta|p><p| - delta|r><r|`` plus the red
        and blue couplings, and ``U_ij |rr><rr|`` for every pair ``i < j``.
    collapse : list of ndarray
        ``|p>`` and ``|r>`` decay channels, see :func:`collapse_ops`.
    """
    basis = basis or AtomBasis(FOUR_LEVEL, params.n_atoms)
    _check_basis(params, basis, ("1", "p", "r"))
    local = (
        -params.delta_big * projector(basis, "p", "p")
        - params.delta * projector(basis, "r", "r")
        + params.omega_r * (projector(basis, "1", "p") + projector(basis, "p", "1"))
        + params.omega_b * (projector(basis, "p", "r") + projector(basis, "r", "p"))
    )
    h = sum(embed(local, i, basis) for i in range(basis.n_atoms))
    h = h + _pair_interaction(params, basis)
    return h, collapse_ops(params, basis)


def build_eliminated_h(params: PhysParams, absorb_shifts: bool = False,
                       basis: AtomBasis | None = None) -> np.ndarray:
    """Hamiltonian with ``|p>`` adiabatically eliminated to second order.

    Per atom: ``(-delta + Omega_B**2/Delta)|r><r| + Omega_R**2/Delta |1><1|``
    and the effective coupling ``Omega_R Omega_B / Delta`` between ``|1>`` and
    ``|r>``. With ``absorb_shifts`` both Stark terms are dropped and ``delta``
    is read as the shift-corrected two-photon detuning.
    """
    if params.delta_big == 0:
        raise ValueError("delta_big = 0: elimination of |p> is undefined")
    basis = basis or AtomBasis(THREE_LEVEL, params.n_atoms)
    _check_basis(params, basis, ("1", "r"))
    d = params.delta_big
    omega_eff = params.omega_r * params.omega_b / d
    shift_r = 0.0 if absorb_shifts else params.omega_b**2 / d
    shift_1 = 0.0 if absorb_shifts else params.omega_r**2 / d
    local = (
        (-params.delta + shift_r) * projector(basis, "r", "r")
        + shift_1 * projector(basis, "1", "1")
        + omega_eff * (projector(basis, "1", "r") + projector(basis, "r", "1"))
    )
    h = sum(embed(local, i, basis) for i in range(basis.n_atoms))
    return h + _pair_interaction(params, basis)


def build_ladder_h(n_atoms: int, delta: float, u: float, omega: float = 1.0) -> np.ndarray:
    """Tridiagonal Hamiltonian on the symmetric ladder ``|N^0> ... |N^N>``.

    Diagonal ``C(k,2) U - k delta``; the coupling between ``|N^k>`` and
    ``|N^(k+1)>`` is the collective matrix element ``sqrt((k+1)(N-k)) omega``.
    """
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
    k = np.arange(n_atoms + 1)
    h = np.diag(k * (k - 1) / 2 * u - k * delta).astype(complex)
    g = omega * np.sqrt((k[:-1] + 1) * (n_atoms - k[:-1]))
    h += np.diag(g, 1) + np.diag(g, -1)
    return h


def raman_h(g_eff: float, shift: float) -> np.ndarray:
    """Two-level Raman model on ``{|1..1>, |r..r>}``."""
    return np.array([[shift, g_eff], [g_eff, shift]], dtype=complex)


def build_effective_h(delta: float) -> np.ndarray:
    """Closed-form three-atom Raman Hamiltonian (Omega = 1)."""
    if delta == 0:
        raise ValueError("delta = 0: effective model undefined")
    return raman_h(6.0 / delta**2, 3.0 / delta)


def collapse_ops(params: PhysParams, basis: AtomBasis) -> list[np.ndarray]:
    """Embedded decay operators, one per atom and channel; zero rates omitted.

    ``|r>`` decays to ``|0>`` (rate ``gamma0``) and ``|1>`` (``gamma1``). If the
    basis has ``|p>``, it decays with ``gamma_p`` split by ``p_branch0``.
    """
    channels = []
    if "r" in basis.levels:
        channels += [("0", "r", params.gamma0), ("1", "r", params.gamma1)]
    if "p" in basis.levels:
        channels += [("0", "p", params.gamma_p * params.p_branch0),
                     ("1", "p", params.gamma_p * (1 - params.p_branch0))]
    ops = []
    for i in range(basis.n_atoms):
        for ket, bra, rate in channels:
            if rate == 0:
                continue
            if ket not in basis.levels:
                raise ValueError(f"decay into |{ket}> needs that level in the basis")
            ops.append(np.sqrt(rate) * embed(projector(basis, ket, bra), i, basis))
    return ops


def nonhermitian_h(h, collapse) -> np.ndarray:
    """No-jump generator ``H - (i/2) sum O^dag O``."""
    h = np.asarray(h, dtype=complex)
    loss = sum((o.conj().T @ o for o in collapse), np.zeros_like(h))
    return h - 0.5j * loss


def build_gate_target(n_qubits: int, alpha: float) -> GateTarget:
    """Diagonal phase gate: ``exp(i m alpha)`` for ``m`` ones, extra -1 on all-ones."""
    if n_qubits < 2:
        raise ValueError(f"gate needs n_qubits >= 2, got {n_qubits}")
    ones = np.array([sum(b) for b in itertools.product((0, 1), repeat=n_qubits)])
    diag = np.exp(1j * ones * alpha)
    diag[-1] *= -1
    return GateTarget(n_qubits, float(alpha), np.diag(diag))
