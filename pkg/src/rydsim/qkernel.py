"""Dense linear-algebra substrate for multi-atom Hilbert spaces.

Operators are plain complex ``numpy`` arrays. Basis bookkeeping lives in the
small basis classes below, which every state carries so that figures of merit
can locate ``|1...1>`` and ``|r...r>`` regardless of the representation.

Index convention: in a product basis the leftmost atom is the most
significant digit, i.e. for levels ``(a, b, ...)`` the string ``s`` maps to
``sum_i s_i * d**(N-1-i)``. This matches ``numpy.kron`` and
``numpy.ravel_multi_index``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

LEVELS = ("0", "1", "p", "r")

NORM_TOL = 1e-9
EIG_TOL = 1e-8


@dataclass(frozen=True)
class AtomBasis:
    """Product basis of ``n_atoms`` atoms, each with the given local levels."""

    levels: tuple[str, ...]
    n_atoms: int

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("levels must be non-empty")
        unknown = set(levels) - set(LEVELS)
        if unknown:
            raise ValueError(f"unknown levels {sorted(unknown)}; allowed {LEVELS}")
        if len(set(levels)) != len(levels):
            raise ValueError(f"duplicate levels in {levels}")
        if "1" not in levels or "r" not in levels:
            raise ValueError("levels must contain '1' and 'r'")
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")

    @property
    def local_dim(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_atoms

    @property
    def tag(self) -> str:
        return f"product[{''.join(self.levels)}]^{self.n_atoms}"

    def level_index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise ValueError(f"level {label!r} not in basis {self.levels}") from None

    def index(self, labels) -> int:
        """Flat index of a product state given per-atom labels, e.g. ``"1r1"``."""
        labels = tuple(labels)
        if len(labels) != self.n_atoms:
            raise ValueError(f"expected {self.n_atoms} labels, got {len(labels)}")
        digits = [self.level_index(lab) for lab in labels]
        return int(np.ravel_multi_index(digits, (self.local_dim,) * self.n_atoms))

    def labels(self, index: int) -> str:
        digits = np.unravel_index(index, (self.local_dim,) * self.n_atoms)
        return "".join(self.levels[d] for d in digits)

    def count(self, label: str) -> np.ndarray:
        """Per basis state, the number of atoms sitting in ``label``."""
        k = self.level_index(label)
        grid = np.indices((self.local_dim,) * self.n_atoms).reshape(self.n_atoms, -1)
        return (grid == k).sum(axis=0)

    def all_ones_index(self) -> int:
        return self.index("1" * self.n_atoms)

    def all_rydberg_index(self) -> int:
        return self.index("r" * self.n_atoms)

    def computational_indices(self) -> list[int]:
        """Indices of the ``{0,1}^N`` strings in binary order (``00..0`` first)."""
        if "0" not in self.levels:
            raise ValueError("basis has no |0> level; no computational subspace")
        return [self.index(s) for s in itertools.product("01", repeat=self.n_atoms)]


@dataclass(frozen=True)
class LadderBasis:
    """Symmetric Dicke ladder ``|N^k>``, k = 0..N Rydberg excitations."""

    n_atoms: int

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    @property
    def tag(self) -> str:
        return f"ladder^{self.n_atoms}"

    def all_ones_index(self) -> int:
        return 0

    def all_rydberg_index(self) -> int:
        return self.n_atoms


@dataclass(frozen=True)
class RamanBasis:
    """Two-state basis ``{|1...1>, |r...r>}`` of the effective Raman model."""

    n_atoms: int

    @property
    def dim(self) -> int:
        return 2

    @property
    def tag(self) -> str:
        return f"raman^{self.n_atoms}"

    def all_ones_index(self) -> int:
        return 0

    def all_rydberg_index(self) -> int:
        return 1


@dataclass
class QuantumState:
    """Pure state vector or density matrix, tagged with its basis.

    Construction validates normalization (pure) or Hermiticity, unit trace
    and positivity (mixed).
    """

    data: np.ndarray
    basis: AtomBasis | LadderBasis | RamanBasis
    kind: str = field(default="")

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if not self.kind:
            self.kind = "pure" if data.ndim == 1 else "mixed"
        d = self.basis.dim
        if self.kind == "pure":
            if data.shape != (d,):
                raise ValueError(f"pure state shape {data.shape} != ({d},)")
            norm = np.linalg.norm(data)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state not normalized: |psi| = {norm!r}")
        elif self.kind == "mixed":
            if data.shape != (d, d):
                raise ValueError(f"density matrix shape {data.shape} != ({d}, {d})")
            if np.max(np.abs(data - data.conj().T)) > NORM_TOL:
                raise ValueError("density matrix not Hermitian")
            tr = np.trace(data).real
            if abs(tr - 1.0) > NORM_TOL:
                raise ValueError(f"density matrix trace {tr!r} != 1")
            lo = np.linalg.eigvalsh(data).min()
            if lo < -EIG_TOL:
                raise ValueError(f"density matrix has negative eigenvalue {lo!r}")
        else:
            raise ValueError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")
        if not np.all(np.isfinite(data)):
            raise ValueError("state contains NaN/Inf")
        self.data = data

    @property
    def dim(self) -> int:
        return self.basis.dim

    def density(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data

    def populations(self) -> np.ndarray:
        if self.kind == "pure":
            return np.abs(self.data) ** 2
        return np.diag(self.data).real.copy()

    @classmethod
    def basis_state(cls, basis, index: int) -> QuantumState:
        v = np.zeros(basis.dim, dtype=complex)
        v[index] = 1.0
        return cls(v, basis)


def kron(a, b) -> np.ndarray:
    """Tensor product with index ``i_a * dim_b + i_b``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def embed(local_op, atom_index: int, basis: AtomBasis) -> np.ndarray:
    """Lift a single-atom operator to the ``basis`` product space.

    The operator acts on atom ``atom_index`` (0 is the leftmost, most
    significant atom) and as the identity elsewhere.
    """
    local_op = np.asarray(local_op, dtype=complex)
    d = basis.local_dim
    if local_op.shape != (d, d):
        raise ValueError(f"local operator shape {local_op.shape} != ({d}, {d})")
    if not 0 <= atom_index < basis.n_atoms:
        raise IndexError(f"atom_index {atom_index} out of range for {basis.n_atoms} atoms")
    left = np.eye(d**atom_index)
    right = np.eye(d ** (basis.n_atoms - atom_index - 1))
    return kron(kron(left, local_op), right)


def projector(basis: AtomBasis, ket: str, bra: str) -> np.ndarray:
    """Single-atom ``|ket><bra|`` in the local levels of ``basis``."""
    op = np.zeros((basis.local_dim, basis.local_dim), dtype=complex)
    op[basis.level_index(ket), basis.level_index(bra)] = 1.0
    return op


def symmetric_projector(basis: AtomBasis) -> list[QuantumState]:
    """Normalized symmetric Dicke states ``|N^k>`` for k = 0..N.

    ``k`` counts atoms in ``|r>``; each state is the equal superposition of the
    ``C(N, k)`` product strings with exactly ``k`` Rydberg atoms.
    """
    if set(basis.levels) != {"1", "r"}:
        raise ValueError(f"Dicke states need levels {{1, r}}, got {basis.levels}")
    n = basis.n_atoms
    n_r = basis.count("r")
    states = []
    for k in range(n + 1):
        v = np.where(n_r == k, 1.0, 0.0).astype(complex)
        v /= np.sqrt(comb(n, k))
        states.append(QuantumState(v, basis))
    return states


def dicke_isometry(basis: AtomBasis) -> np.ndarray:
    """Columns are the Dicke states of :func:`symmetric_projector`."""
    return np.column_stack([s.data for s in symmetric_projector(basis)])


def is_hermitian(op, atol: float = 1e-12) -> bool:
    op = np.asarray(op)
    return op.shape[0] == op.shape[1] and bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= atol)
