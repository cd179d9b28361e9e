"""Concurrence, fidelity, eigenstate entropy and derived time-series scalars."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from entlat.errors import ConfigurationError, DimensionError, PhysicalityError
from entlat.hilbert import StateVector, TwoQubitDensityMatrix

__all__ = [
    "ConcurrenceResult",
    "TimeSeries",
    "concurrence",
    "concurrence_values",
    "fidelity",
    "eigenstate_entropy",
    "saturation_value",
    "is_saturated",
    "concurrence_timescale",
    "SATURATION_FRACTION",
    "TC_THRESHOLD",
]

SATURATION_FRACTION = 0.1
TC_THRESHOLD = 0.96
_NEG_TOL = 1e-10
# spectral values below this are rounding noise; their square roots (~1e-8)
# would otherwise leak into lambda_k and spoil pure-state results
_NOISE_FLOOR = 16 * np.finfo(float).eps

# sigma^y (x) sigma^y in the standard two-qubit basis
_SIGMA_YY = np.array(
    [[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
    dtype=complex,
)


@dataclass(frozen=True)
class ConcurrenceResult:
    value: float
    lambdas: tuple[float, float, float, float]

    def __float__(self) -> float:
        return self.value


@dataclass(eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = "other"
    stderr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DimensionError("times and values must be 1-D arrays of equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("time series contains non-finite values")

    def __len__(self) -> int:
        return self.times.size

    def to_csv(self, path) -> None:
        """Two columns ``t,value``; numbers in 16-significant-digit exponent form."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                writer.writerow([f"{t:.15e}", f"{v:.15e}"])

    @classmethod
    def from_csv(cls, path, label: str = "other") -> "TimeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], label)


def _spin_flipped(rhos: np.ndarray) -> np.ndarray:
    return _SIGMA_YY @ rhos.conj() @ _SIGMA_YY


def _lambdas(rhos: np.ndarray) -> np.ndarray:
    """Descending square roots of the spectrum of ``rho rho~`` for a stack of matrices.

    Uses the Hermitian similar matrix ``sqrt(rho) rho~ sqrt(rho)``.
    """
    w, v = np.linalg.eigh(rhos)
    if np.any(w < -_NEG_TOL):
        raise PhysicalityError("density matrix has a negative eigenvalue")
    w = np.where(w < _NOISE_FLOOR, 0.0, w)
    root = (v * np.sqrt(w)[..., None, :]) @ v.conj().swapaxes(-1, -2)
    mu = np.linalg.eigvalsh(root @ _spin_flipped(rhos) @ root)
    if np.any(mu < -_NEG_TOL):
        raise PhysicalityError("rho * rho~ has a negative eigenvalue")
    mu = np.where(mu < _NOISE_FLOOR, 0.0, mu)
    return np.sqrt(mu)[..., ::-1]


def concurrence_values(rhos: np.ndarray) -> np.ndarray:
    """Concurrence for a ``(..., 4, 4)`` stack of density matrices (no validation)."""
    lam = _lambdas(np.asarray(rhos, dtype=complex))
    return np.maximum(lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3], 0.0)


def concurrence(rho: TwoQubitDensityMatrix | np.ndarray) -> ConcurrenceResult:
    if not isinstance(rho, TwoQubitDensityMatrix):
        rho = TwoQubitDensityMatrix(rho)
    rho.check()
    lam = _lambdas(rho.entries[None])[0]
    value = max(lam[0] - lam[1] - lam[2] - lam[3], 0.0)
    return ConcurrenceResult(float(value), tuple(float(x) for x in lam))


def fidelity(psi0: StateVector, psit: StateVector) -> float:
    """Squared overlap ``|<psi0|psi_t>|^2``."""
    if not psi0.basis.same_as(psit.basis):
        raise DimensionError("states live in different bases")
    return float(abs(np.vdot(psi0.amplitudes, psit.amplitudes)) ** 2)


def eigenstate_entropy(es, basis=None) -> np.ndarray:
    """Shannon entropy (bits) of each eigenvector's weights over register states."""
    vecs = es.eigenvectors if hasattr(es, "eigenvectors") else np.asarray(es)
    p = np.abs(vecs) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return np.clip(-terms.sum(axis=0), 0.0, None)


def saturation_value(series: TimeSeries, fraction: float = SATURATION_FRACTION) -> float:
    """Trapezoidal time average over the trailing ``fraction`` of the grid."""
    if not 0 < fraction <= 1:
        raise ConfigurationError("fraction must lie in (0, 1]")
    t = series.times
    start = t[-1] - fraction * (t[-1] - t[0])
    sel = t >= start - 1e-12 * max(abs(t[-1]), 1.0)
    if sel.sum() < 10:
        raise ConfigurationError(
            f"only {int(sel.sum())} samples in the averaging window; need at least 10"
        )
    tw, vw = t[sel], series.values[sel]
    return float(trapezoid(vw, tw) / (tw[-1] - tw[0]))


def is_saturated(value: float, doubled_value: float, tol: float = 0.02) -> bool:
    """Stability check: the trailing average moves by at most ``tol`` when the horizon doubles."""
    return abs(value - doubled_value) <= tol


def concurrence_timescale(series: TimeSeries, threshold: float = TC_THRESHOLD) -> float | None:
    """First time the series drops below ``threshold``, linearly interpolated."""
    below = np.flatnonzero(series.values < threshold)
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(series.times[0])
    t0, t1 = series.times[k - 1], series.times[k]
    v0, v1 = series.values[k - 1], series.values[k]
    return float(t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0))
