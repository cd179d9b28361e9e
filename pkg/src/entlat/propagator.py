"""Time evolution ``|psi(t)> = exp(-iHt)|psi(0)>`` (hbar = 1).

Two routes: dense eigendecomposition for dimensions up to ``DENSE_CAP`` and
short-time Lanczos (Krylov) stepping for anything larger.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg as sla

from entlat.errors import ConfigurationError, DimensionError
from entlat.hamiltonian import SparseHamiltonian
from entlat.hilbert import Basis, StateVector

__all__ = [
    "DENSE_CAP",
    "Eigensystem",
    "TimeGrid",
    "Trajectory",
    "default_grid",
    "diagonalize",
    "evolve_exact",
    "evolve_krylov",
    "krylov_propagate",
]

DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class Eigensystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    basis: Basis | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def coefficients(self, psi0: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ psi0

    def states_at(self, coeffs: np.ndarray, times: np.ndarray) -> np.ndarray:
        """``(len(times), dim)`` array of evolved amplitudes."""
        phases = np.exp(-1j * np.outer(times, self.eigenvalues))
        return (phases * coeffs[None, :]) @ self.eigenvectors.T


@dataclass(frozen=True, eq=False)
class TimeGrid:
    samples: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 1:
            raise ConfigurationError("time grid needs at least one sample")
        if s[0] != 0.0:
            raise ConfigurationError("time grid must start at t = 0")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            raise ConfigurationError("time samples must be strictly increasing")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def uniform(cls, t_max: float, n_samples: int = 2000) -> "TimeGrid":
        if t_max <= 0 or n_samples < 2:
            raise ConfigurationError("uniform grid needs t_max > 0 and >= 2 samples")
        return cls(np.linspace(0.0, t_max, n_samples))

    @classmethod
    def logarithmic(cls, t_min: float, t_max: float, n_samples: int = 2000) -> "TimeGrid":
        """``t = 0`` followed by ``n_samples - 1`` log-spaced points in ``[t_min, t_max]``."""
        if not 0 < t_min < t_max or n_samples < 3:
            raise ConfigurationError("log grid needs 0 < t_min < t_max and >= 3 samples")
        return cls(np.concatenate([[0.0], np.geomspace(t_min, t_max, n_samples - 1)]))

    @property
    def t_max(self) -> float:
        return float(self.samples[-1])

    def __len__(self) -> int:
        return len(self.samples)

    def scaled(self, factor: float) -> "TimeGrid":
        return TimeGrid(self.samples * factor)


def default_grid(
    delta: float,
    j_strength: float,
    n_samples: int = 2000,
    spacing: str = "linear",
    t_min: float = 1e-2,
) -> TimeGrid:
    """Grid up to ``max(50/delta, 20/J)``; zero scales are ignored.

    ``spacing="log"`` resolves short times, starting the log ramp at ``t_min``.
    """
    candidates = [50.0 / delta if delta > 0 else 0.0, 20.0 / j_strength if j_strength > 0 else 0.0]
    t_max = max(candidates)
    if t_max == 0.0:
        t_max = 100.0
    if spacing == "log":
        return TimeGrid.logarithmic(t_min, t_max, n_samples)
    if spacing != "linear":
        raise ConfigurationError(f"unknown grid spacing {spacing!r}")
    return TimeGrid.uniform(t_max, n_samples)


@dataclass(eq=False)
class Trajectory:
    """Evolved amplitudes at every grid sample, one row per time."""

    basis: Basis
    times: np.ndarray
    amplitudes: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k: int) -> StateVector:
        return StateVector(self.basis, self.amplitudes[k])

    def __iter__(self) -> Iterator[StateVector]:
        for k in range(len(self)):
            yield self[k]

    @property
    def final(self) -> StateVector:
        return self[len(self) - 1]


def diagonalize(h: SparseHamiltonian, dense_cap: int = DENSE_CAP) -> Eigensystem:
    """Full real-symmetric eigendecomposition, eigenvalues ascending."""
    if h.dim > dense_cap:
        raise DimensionError(
            f"dimension {h.dim} exceeds the dense cap {dense_cap}; use evolve_krylov instead"
        )
    evals, evecs = sla.eigh(h.toarray(), driver="evd")
    return Eigensystem(evals, evecs, h.basis)


def evolve_exact(es: Eigensystem, psi0: StateVector, grid: TimeGrid) -> Trajectory:
    if psi0.amplitudes.shape[0] != es.dim:
        raise DimensionError("initial state and eigensystem dimensions differ")
    times = grid.samples
    coeffs = es.coefficients(psi0.amplitudes)
    amps = es.states_at(coeffs, times)
    amps[times == 0.0] = psi0.amplitudes
    return Trajectory(psi0.basis, times.copy(), amps)


def _lanczos(matvec, v: np.ndarray, m: int):
    """Orthonormal Krylov basis ``Q`` and tridiagonal coefficients (full reorthogonalization)."""
    beta0 = np.linalg.norm(v)
    q = np.zeros((m + 1, v.size), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    q[0] = v / beta0
    k_used = m
    for k in range(m):
        w = matvec(q[k])
        alpha[k] = np.vdot(q[k], w).real
        w = w - alpha[k] * q[k] - (beta[k - 1] * q[k - 1] if k else 0.0)
        w -= q[: k + 1].T @ (q[: k + 1].conj() @ w)
        b = np.linalg.norm(w)
        beta[k] = b
        if b < 1e-12 * max(1.0, abs(alpha[k])):
            k_used = k + 1
            break
        q[k + 1] = w / b
    return q, alpha[:k_used], beta[:k_used], beta0, k_used < m or beta[k_used - 1] == 0.0


def krylov_propagate(
    h: SparseHamiltonian | np.ndarray,
    psi: np.ndarray,
    t: float,
    m: int = 30,
    dt: float | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """``exp(-i H t) psi`` by adaptive Lanczos substeps; ``t`` may be negative."""
    if m < 4:
        raise ConfigurationError("Krylov order must be at least 4")
    mat = h.matrix if isinstance(h, SparseHamiltonian) else h
    matvec = mat.__matmul__
    norm_h = h.norm_bound() if isinstance(h, SparseHamiltonian) else float(abs(mat).sum(axis=1).max())
    if dt is None:
        dt = m / (2.0 * max(norm_h, 1e-300))
    psi = np.asarray(psi, dtype=complex).copy()
    direction = 1.0 if t >= 0 else -1.0
    remaining = abs(t)
    step = min(dt, remaining) if remaining else 0.0
    while remaining > 0:
        step = min(step, remaining)
        q, alpha, beta, beta0, exact = _lanczos(matvec, psi, m)
        k = alpha.size
        tri = np.diag(alpha) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        while True:
            small = sla.expm(-1j * direction * step * tri)[:, 0]
            # a-posteriori estimate: weight leaking past the last Krylov vector
            err = 0.0 if exact else beta0 * beta[k - 1] * abs(small[-1])
            if err <= tol * step or step < 1e-12 * dt:
                break
            step *= 0.5
        psi = beta0 * (small @ q[:k])
        psi /= np.linalg.norm(psi)
        remaining -= step
        step = min(dt, step * 1.5)
    return psi


def evolve_krylov(
    h: SparseHamiltonian,
    psi0: StateVector,
    grid: TimeGrid,
    m: int = 30,
    dt: float | None = None,
    tol: float = 1e-12,
) -> Trajectory:
    """Step from sample to sample with :func:`krylov_propagate`."""
    if psi0.amplitudes.shape[0] != h.dim:
        raise DimensionError("initial state and Hamiltonian dimensions differ")
    times = grid.samples
    out = np.empty((times.size, h.dim), dtype=complex)
    psi = psi0.amplitudes.copy()
    out[0] = psi
    for k in range(1, times.size):
        psi = krylov_propagate(h, psi, times[k] - times[k - 1], m=m, dt=dt, tol=tol)
        out[k] = psi
    return Trajectory(psi0.basis, times.copy(), out)
