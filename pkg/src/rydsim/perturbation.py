"""Effective models: optical-level elimination, Raman coupling, timing rules.

The three-atom Raman coupling ``6 Omega^3 / delta^2`` and Stark shift
``3 Omega^2 / delta`` are available in closed form. For other atom numbers the
coupling is read off the resonant ladder numerically: its mirror symmetry
forces the two dressed states built on ``|N^0>`` and ``|N^N>`` into a
symmetric/antisymmetric pair, and half their splitting is the coupling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import brentq

from .model import PhysParams, build_full_h, build_ladder_h, resonance_u
from .qkernel import AtomBasis

PAIR_OVERLAP_MIN = 0.8


class RegimeError(ValueError):
    """Parameters outside the dispersive regime the effective model needs."""


@dataclass(frozen=True)
class EliminationResult:
    omega_eff: float
    shift_1: float
    shift_r: float
    valid: bool


@dataclass(frozen=True)
class EffectiveModel:
    g_eff: float
    shift: float
    n_atoms: int
    delta: float
    source: str


def eliminate_optical(params: PhysParams) -> EliminationResult:
    """Second-order coefficients after eliminating ``|p>``.

    ``valid`` is False (and a warning is issued) when ``Delta`` is less than
    ten times the larger Rabi frequency.
    """
    d = params.delta_big
    if d == 0:
        raise ValueError("delta_big = 0: elimination of |p> is undefined")
    valid = abs(d) >= 10 * max(abs(params.omega_r), abs(params.omega_b))
    if not valid:
        warnings.warn(f"|Delta| = {abs(d)} is not >> Omega_R, Omega_B; elimination is unreliable",
                      stacklevel=2)
    return EliminationResult(
        omega_eff=params.omega_r * params.omega_b / d,
        shift_1=params.omega_r**2 / d,
        shift_r=params.omega_b**2 / d,
        valid=valid,
    )


def dressed_pair(h, i_ground: int, i_top: int):
    """Eigenpairs of ``h`` with the largest weight on the two end states.

    Returns ``(energies, vectors)`` for the two states, lower energy first.
    """
    w, v = np.linalg.eigh(np.asarray(h))
    overlap = np.abs(v[i_ground]) ** 2 + np.abs(v[i_top]) ** 2
    pick = np.argsort(-overlap)[:2]
    pick = pick[np.argsort(w[pick])]
    return w[pick], v[:, pick], overlap[pick]


def numeric_effective_model(n_atoms: int, delta: float) -> EffectiveModel:
    """Raman coupling and shift from exact diagonalization of the resonant ladder."""
    if n_atoms < 2:
        raise ValueError(f"n_atoms must be >= 2, got {n_atoms}")
    _check_regime(delta)
    h = build_ladder_h(n_atoms, delta, resonance_u(n_atoms, delta))
    w, _, overlap = dressed_pair(h, 0, n_atoms)
    if np.any(overlap <= PAIR_OVERLAP_MIN):
        raise RegimeError(
            f"dressed pair overlaps {overlap.round(3).tolist()} <= {PAIR_OVERLAP_MIN} "
            f"at N={n_atoms}, delta={delta}: not dispersive"
        )
    return EffectiveModel(g_eff=float(w[1] - w[0]) / 2, shift=float(w.mean()),
                          n_atoms=n_atoms, delta=delta, source="numeric")


def _check_regime(delta: float) -> None:
    if delta <= 2.0:
        raise RegimeError(f"delta = {delta} violates delta >> 2 Omega")


def effective_model(n_atoms: int, delta: float, numeric: bool = False) -> EffectiveModel:
    """Effective Raman model between ``|1..1>`` and ``|r..r>`` at resonance.

    Three atoms use the closed form unless ``numeric`` is set.
    """
    _check_regime(delta)
    if n_atoms == 3 and not numeric:
        return EffectiveModel(g_eff=6.0 / delta**2, shift=3.0 / delta,
                              n_atoms=3, delta=delta, source="closed_form")
    return numeric_effective_model(n_atoms, delta)


def _check_coupling(model: EffectiveModel) -> None:
    if model.g_eff <= 0:
        raise ValueError(f"g_eff must be > 0, got {model.g_eff}")


def ghz_time(model: EffectiveModel, k: int = 0) -> float:
    """Time ``(k + 1/4) pi / g_eff`` at which the Raman oscillation makes a GHZ state."""
    _check_coupling(model)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return (k + 0.25) * np.pi / model.g_eff


def gate_time(model: EffectiveModel) -> float:
    """Duration of one full Raman oscillation of ``|1..1>``."""
    _check_coupling(model)
    return np.pi / model.g_eff


def predicted_alpha(delta: float) -> float:
    """Single-qubit phase of the three-atom gate, ``-pi delta / 6``, in ``[0, 2 pi)``."""
    return float(np.mod(-np.pi * delta / 6.0, 2 * np.pi))


@dataclass(frozen=True)
class FullModelCalibration:
    """Four-level parameters realizing a target effective model.

    ``params`` is in units of the dressed effective Rabi frequency
    ``omega_dressed`` (given in the caller's units).
    """

    params: PhysParams
    omega_dressed: float
    delta_laser: float
    rydberg_weight: float


def _single_atom_effective(omega_r, omega_b, delta_big, delta_laser):
    """Exact 2x2 effective Hamiltonian of one atom on ``{|1>, |r>}``.

    Block-diagonalizes the ``(1, p, r)`` Hamiltonian onto the two dressed
    states with the least ``|p>`` weight (des Cloizeaux projection).
    Returns the effective matrix and the ``|r>`` weight of the dressed
    Rydberg state.
    """
    h1 = np.array([[0.0, omega_r, 0.0],
                   [omega_r, -delta_big, omega_b],
                   [0.0, omega_b, -delta_laser]])
    w, v = np.linalg.eigh(h1)
    keep = np.argsort(np.abs(v[1]) ** 2)[:2]
    x = v[[0, 2]][:, keep]
    s = np.linalg.inv(sqrtm(x @ x.conj().T))
    h_eff = (s @ x @ np.diag(w[keep]) @ x.conj().T @ s).real
    dressed = v[:, keep] @ x.conj().T @ s
    return h_eff, float(np.abs(dressed[2, 1]) ** 2)


def calibrate_full_params(omega_r: float, omega_b: float, delta_big: float,
                          delta_eff: float, n_atoms: int = 3) -> FullModelCalibration:
    """Choose four-level detuning and interaction so the dressed dynamics is resonant.

    The Raman coupling between ``|1..1>`` and ``|r..r>`` is far smaller than the
    fourth-order corrections to the Stark shifts, so second-order shifts
    alone cannot place the full model on resonance. We instead

    1. pick the laser two-photon detuning so that the exact single-atom
       effective detuning equals ``delta_eff`` times the dressed coupling;
    2. rescale all frequencies to that dressed coupling;
    3. tune the pair interaction until the full-model dressed pair on
       ``|1..1>`` / ``|r..r>`` is balanced.

    Frequencies are in any consistent unit with ``delta_big`` of the sign
    used in :func:`rydsim.model.build_full_h`.
    """
    if delta_big == 0:
        raise ValueError("delta_big = 0")
    _check_regime(delta_eff)

    def detuning_mismatch(dl):
        h_eff, _ = _single_atom_effective(omega_r, omega_b, delta_big, dl)
        return (h_eff[1, 1] - h_eff[0, 0]) / abs(h_eff[0, 1]) + delta_eff

    omega2 = omega_r * omega_b / delta_big
    guess = delta_eff * omega2 + (omega_b**2 - omega_r**2) / delta_big
    width = 0.5 * abs(delta_eff * omega2) + 1e-12
    lo, hi = guess - width, guess + width
    if np.sign(detuning_mismatch(lo)) == np.sign(detuning_mismatch(hi)):
        raise RegimeError("could not bracket the laser detuning; is |Delta| >> Omega?")
    dl = brentq(detuning_mismatch, lo, hi, xtol=1e-14, rtol=1e-14)
    h_eff, weight_r = _single_atom_effective(omega_r, omega_b, delta_big, dl)
    om = abs(h_eff[0, 1])

    basis = AtomBasis(("1", "p", "r"), n_atoms)
    i1, ir = basis.all_ones_index(), basis.all_rydberg_index()

    def make(u):
        return PhysParams(omega_r=omega_r / om, omega_b=omega_b / om,
                          delta_big=delta_big / om, delta=dl / om, u=u, n_atoms=n_atoms)

    def imbalance(u):
        h, _ = build_full_h(make(u), basis)
        _, vec, _ = dressed_pair(h, i1, ir)
        return abs(vec[i1, 0]) ** 2 - abs(vec[ir, 0]) ** 2

    u0 = resonance_u(n_atoms, delta_eff) / weight_r**2
    us = u0 * np.linspace(0.95, 1.05, 41)
    vals = np.array([imbalance(u) for u in us])
    flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if flips.size == 0:
        raise RegimeError("could not bracket the resonant interaction")
    j = flips[np.argmin(np.abs(us[flips] - u0))]
    u = brentq(imbalance, us[j], us[j + 1], xtol=1e-13, rtol=1e-13)

    return FullModelCalibration(params=make(u), omega_dressed=om, delta_laser=dl,
                                rydberg_weight=weight_r)
