"""Register-state bases, initial states and the two-qubit partial trace.

Bit convention: qubit 1 is the most significant bit of the integer label and
``sigma^z |0> = +|0>``, ``sigma^z |1> = -|1>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np

from entlat.errors import ConfigurationError, DataLossError, DimensionError, PhysicalityError

__all__ = [
    "Basis",
    "FullBasis",
    "SectorBasis",
    "StateVector",
    "TwoQubitDensityMatrix",
    "MAX_QUBITS",
    "build_full_basis",
    "build_sector_basis",
    "initial_state",
    "reduce_to_pair",
    "reduce_to_pair_many",
    "PairTracer",
    "embed_sector",
    "project_sector",
    "magnetization",
    "save_state",
    "load_state",
]

MAX_QUBITS = 20
_LOSS_TOL = 1e-10


def bit(states, qubit: int, n: int):
    """Value of ``qubit`` (0-based, qubit 0 = most significant) in ``states``."""
    return (states >> (n - 1 - qubit)) & 1


@dataclass(frozen=True, eq=False)
class Basis:
    n: int
    states: np.ndarray = field(repr=False)
    kind: str = "full"

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, states) -> np.ndarray | int:
        """Position of each register state in the basis; KeyError if absent."""
        arr = np.asarray(states, dtype=np.int64)
        if self.kind == "full":
            idx = arr.copy()
            ok = (arr >= 0) & (arr < self.dim)
        else:
            idx = np.searchsorted(self.states, arr)
            idx = np.minimum(idx, self.dim - 1)
            ok = self.states[idx] == arr
        if not np.all(ok):
            raise KeyError(f"register state(s) not in {self.kind} basis")
        return int(idx) if idx.ndim == 0 else idx

    @cached_property
    def bits(self) -> np.ndarray:
        """``(dim, n)`` array of 0/1 occupations, column ``i`` = qubit ``i``."""
        shifts = np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return ((self.states[:, None] >> shifts[None, :]) & 1).astype(np.int8)

    def same_as(self, other: "Basis") -> bool:
        return self.kind == other.kind and self.n == other.n

    def tag(self) -> str:
        return self.kind


class FullBasis(Basis):
    pass


class SectorBasis(Basis):
    pass


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise ConfigurationError(f"n must be an even integer >= 2, got {n!r}")
    if n > MAX_QUBITS:
        raise ConfigurationError(f"n = {n} exceeds the cap of {MAX_QUBITS} qubits")


def build_full_basis(n: int) -> FullBasis:
    if n < 1 or n > MAX_QUBITS:
        raise ConfigurationError(f"n = {n} outside 1..{MAX_QUBITS}")
    states = np.arange(2**n, dtype=np.int64)
    states.setflags(write=False)
    return FullBasis(n=int(n), states=states, kind="full")


def build_sector_basis(n: int) -> SectorBasis:
    """All ``n``-bit strings with ``n/2`` ones, in ascending order."""
    _check_n(n)
    states = np.fromiter(
        (sum(1 << (n - 1 - q) for q in ones) for ones in combinations(range(n), n // 2)),
        dtype=np.int64,
        count=comb(n, n // 2),
    )
    states.sort()
    states.setflags(write=False)
    return SectorBasis(n=int(n), states=states, kind="sector")


@dataclass(eq=False)
class StateVector:
    basis: Basis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise DimensionError(
                f"amplitudes of shape {self.amplitudes.shape} do not match basis dim {self.basis.dim}"
            )

    @property
    def n(self) -> int:
        return self.basis.n

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())


@dataclass(frozen=True, eq=False)
class TwoQubitDensityMatrix:
    """Reduced state of a qubit pair in the basis ``|00>, |01>, |10>, |11>``."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (4, 4):
            raise DimensionError(f"expected a 4x4 matrix, got {m.shape}")
        object.__setattr__(self, "entries", m)

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10, psd_tol: float = 1e-10) -> None:
        m = self.entries
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise PhysicalityError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise PhysicalityError(f"trace {np.trace(m).real:.3g} differs from 1")
        if np.linalg.eigvalsh(m).min() < -psd_tol:
            raise PhysicalityError("density matrix has a negative eigenvalue")


def _filler_bits(n: int) -> list[int]:
    # qubits 3..n in the pattern 0101...01
    return [k % 2 for k in range(n - 2)]


def _label(bits: list[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def initial_state(kind: str, basis: Basis | str = "sector", n: int | None = None) -> StateVector:
    """Bell or separable pair on qubits 1, 2 times ``|0101...01>`` on the rest.

    ``basis`` may be a :class:`Basis` or one of ``"full"``/``"sector"`` (then
    ``n`` is required).
    """
    if isinstance(basis, str):
        if n is None:
            raise ConfigurationError("n is required when basis is given by name")
        if basis == "full":
            basis = build_full_basis(n)
        elif basis == "sector":
            basis = build_sector_basis(n)
        else:
            raise ConfigurationError(f"unknown basis {basis!r}")
    n = basis.n
    if n < 2 or n % 2:
        raise ConfigurationError(f"n must be even, got {n}")
    rest = _filler_bits(n)
    s01 = _label([0, 1] + rest)
    s10 = _label([1, 0] + rest)
    amps = np.zeros(basis.dim, dtype=complex)
    try:
        if kind == "bell":
            idx = basis.index_of([s01, s10])
            amps[idx] = 1.0 / np.sqrt(2.0)
        elif kind == "separable":
            amps[basis.index_of(s01)] = 1.0
        else:
            raise ConfigurationError(f"unknown initial state kind {kind!r}")
    except KeyError as exc:
        raise ConfigurationError(f"{kind} state not representable in {basis.kind} basis") from exc
    return StateVector(basis, amps)


def magnetization(state: StateVector) -> float:
    """Expectation value of the total ``sigma^z``."""
    weights = np.abs(state.amplitudes) ** 2
    s = 1 - 2 * state.basis.bits.astype(float)
    return float(weights @ s.sum(axis=1))


class PairTracer:
    """Precomputed scatter map from a basis onto a ``(4, 2**(n-2))`` grid.

    Row index is the two-bit label ``a1 a2`` of the selected pair, column the
    remaining bits in their original order.
    """

    def __init__(self, basis: Basis, pair: tuple[int, int] = (0, 1)):
        n = basis.n
        i, j = pair
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ConfigurationError(f"invalid qubit pair {pair} for n={n}")
        b = basis.bits
        self.basis = basis
        self.pair = (i, j)
        self.row = (2 * b[:, i] + b[:, j]).astype(np.int64)
        others = [q for q in range(n) if q not in (i, j)]
        weights = 1 << np.arange(len(others) - 1, -1, -1, dtype=np.int64)
        self.col = (b[:, others].astype(np.int64) @ weights) if others else np.zeros(basis.dim, np.int64)
        self.n_rest = 1 << len(others)

    def __call__(self, amplitudes: np.ndarray, chunk: int = 256) -> np.ndarray:
        """Reduced matrices for a single vector ``(dim,)`` or a stack ``(T, dim)``."""
        amps = np.asarray(amplitudes)
        single = amps.ndim == 1
        if single:
            amps = amps[None, :]
        out = np.empty((amps.shape[0], 4, 4), dtype=complex)
        for start in range(0, amps.shape[0], chunk):
            block = amps[start : start + chunk]
            m = np.zeros((block.shape[0], 4, self.n_rest), dtype=complex)
            m[:, self.row, self.col] = block
            out[start : start + chunk] = m @ m.conj().transpose(0, 2, 1)
        return out[0] if single else out


def reduce_to_pair(state: StateVector, pair: tuple[int, int] = (0, 1)) -> TwoQubitDensityMatrix:
    """Trace out every qubit except ``pair`` (0-based; default qubits 1 and 2)."""
    return TwoQubitDensityMatrix(PairTracer(state.basis, pair)(state.amplitudes))


def reduce_to_pair_many(basis: Basis, amplitudes: np.ndarray, pair=(0, 1)) -> np.ndarray:
    return PairTracer(basis, pair)(amplitudes)


def embed_sector(state: StateVector) -> StateVector:
    if state.basis.kind != "sector":
        raise DimensionError("embed_sector expects a sector state")
    full = build_full_basis(state.n)
    amps = np.zeros(full.dim, dtype=complex)
    amps[state.basis.states] = state.amplitudes
    return StateVector(full, amps)


def project_sector(state: StateVector, sector: SectorBasis | None = None) -> StateVector:
    if state.basis.kind != "full":
        raise DimensionError("project_sector expects a full-space state")
    sector = sector or build_sector_basis(state.n)
    if sector.n != state.n:
        raise DimensionError("sector basis built for a different n")
    kept = state.amplitudes[sector.states]
    lost = state.norm() ** 2 - float(np.vdot(kept, kept).real)
    if lost > _LOSS_TOL:
        raise DataLossError(f"state carries weight {lost:.3g} outside the zero-magnetization sector")
    return StateVector(sector, kept.copy())


def save_state(path, state: StateVector) -> None:
    """JSON dump: basis header plus ``[re, im]`` pairs."""
    doc = {
        "basis": state.basis.kind,
        "n": state.n,
        "amplitudes": [[float(z.real), float(z.imag)] for z in state.amplitudes],
    }
    Path(path).write_text(json.dumps(doc))


def load_state(path) -> StateVector:
    doc = json.loads(Path(path).read_text())
    n = int(doc["n"])
    basis = build_full_basis(n) if doc["basis"] == "full" else build_sector_basis(n)
    amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
    return StateVector(basis, amps)
