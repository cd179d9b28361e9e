"""Regime models and fits for scan outputs."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from entlat.errors import ConfigurationError, FitError
from entlat.lattice import DisorderRealization, ModelParams
from entlat.observables import TimeSeries

__all__ = [
    "FitResult",
    "RegimeEstimates",
    "fit_power_law",
    "fit_exponential_cinf",
    "model_fidelity_gaussian",
    "model_survival_amplitude",
    "model_decay_rates",
    "fgr_window",
    "ergodic_window",
    "two_qubit_oracle",
    "save_fits",
]


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    window: tuple[float, float]
    residual_norm: float
    n_points: int
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.params[key]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegimeEstimates:
    """Order-of-magnitude regime scales (no fitted constants)."""

    j_p: float
    j_e: float
    gamma_c: float
    rho_c: float
    rho_f: float
    gamma_f: float


def _linear_fit(x: np.ndarray, y: np.ndarray):
    """Ordinary least squares ``y = a x + b``; returns (a, b, cov, residual norm)."""
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = len(x) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return float(coef[0]), float(coef[1]), cov, float(np.linalg.norm(resid))


def _in_window(x: np.ndarray, y: np.ndarray, window):
    lo, hi = window if window is not None else (x.min(), x.max())
    rel = 1e-9 * max(abs(lo), abs(hi), 1e-300)
    sel = (x >= lo - rel) & (x <= hi + rel)
    return x[sel], y[sel], (float(lo), float(hi))


def fit_power_law(j_values, t_values, window=None, min_points: int = 4) -> FitResult:
    """Fit ``t = prefactor * J**exponent`` by least squares in log-log coordinates.

    Points with a missing or non-positive ``t`` are dropped before the count
    against ``min_points``.
    """
    x = np.asarray(j_values, dtype=float)
    y = np.array([np.nan if v is None else v for v in t_values], dtype=float)
    x, y, window = _in_window(x, y, window)
    ok = np.isfinite(y) & (y > 0) & (x > 0)
    x, y = x[ok], y[ok]
    if x.size < min_points:
        raise FitError(f"power-law fit needs {min_points} points in {window}, found {x.size}")
    slope, intercept, cov, res = _linear_fit(np.log(x), np.log(y))
    pref = float(np.exp(intercept))
    return FitResult(
        model="power_law",
        params={"exponent": slope, "prefactor": pref},
        stderr={"exponent": float(np.sqrt(cov[0, 0])), "prefactor": float(pref * np.sqrt(cov[1, 1]))},
        window=window,
        residual_norm=res,
        n_points=int(x.size),
    )


def fit_exponential_cinf(j_values, c_values, window=None, min_points: int = 3) -> FitResult:
    """Fit ``C_inf(J) = exp(-A (J - J0))`` via a straight line in ``ln C_inf``."""
    x = np.asarray(j_values, dtype=float)
    y = np.asarray(c_values, dtype=float)
    x, y, window = _in_window(x, y, window)
    bad = ~(y > 0)
    if bad.any():
        warnings.warn(f"excluding {int(bad.sum())} non-positive C_inf value(s) from the fit", stacklevel=2)
        x, y = x[~bad], y[~bad]
    if x.size < min_points:
        raise FitError(f"exponential fit needs {min_points} points in {window}, found {x.size}")
    slope, intercept, cov, res = _linear_fit(x, np.log(y))
    a = -slope
    j0 = intercept / a
    # J0 = b / A with A = -a_slope: gradient wrt (slope, intercept)
    grad = np.array([intercept / slope**2, -1.0 / slope])
    return FitResult(
        model="exponential_cinf",
        params={"A": a, "J0": float(j0)},
        stderr={"A": float(np.sqrt(cov[0, 0])), "J0": float(np.sqrt(grad @ cov @ grad))},
        window=window,
        residual_norm=res,
        n_points=int(x.size),
    )


def model_survival_amplitude(disorder: DisorderRealization | np.ndarray, t) -> np.ndarray | float:
    """Product of ``cos(J_ij t)`` over bonds.

    This is the return amplitude of a register state when every bond acts as
    an independent two-level flip; squaring it gives the fidelity.
    """
    couplings = disorder.couplings if isinstance(disorder, DisorderRealization) else np.asarray(disorder)
    t_arr = np.asarray(t, dtype=float)
    out = np.prod(np.cos(np.multiply.outer(t_arr, couplings)), axis=-1)
    return float(out) if t_arr.ndim == 0 else out


def model_fidelity_gaussian(disorder: DisorderRealization | np.ndarray, t) -> np.ndarray | float:
    """Strong-coupling reference fidelity ``prod_ij cos^2(J_ij t)``.

    At short times this is ``exp(-sum_ij J_ij^2 t^2)``. Exact for a single
    bond started in ``|01>`` with degenerate levels.
    """
    return model_survival_amplitude(disorder, t) ** 2


def model_decay_rates(params: ModelParams) -> RegimeEstimates:
    if params.delta <= 0:
        raise ConfigurationError("regime estimates are undefined for delta = 0")
    d, n, j = params.delta, params.n, params.j_strength
    return RegimeEstimates(
        j_p=d / n,
        j_e=d,
        gamma_c=j * j / d,
        rho_c=1.0 / d,
        rho_f=n / d,
        gamma_f=j * j * n / d,
    )


def fgr_window(est: RegimeEstimates) -> tuple[float, float]:
    return (est.j_p, est.j_e / 2.0)


def ergodic_window(est: RegimeEstimates, j_max: float) -> tuple[float, float]:
    return (2.0 * est.j_e, j_max)


def two_qubit_oracle(d: float, j: float, grid) -> TimeSeries:
    """Closed-form concurrence of an isolated pair started in ``|01>``.

    ``d`` is the level asymmetry ``delta_1 - delta_2`` (the two states sit at
    ``+-d``), ``j`` the coupling. With ``Omega = sqrt(d^2 + j^2)`` the flipped
    weight is ``w = (j/Omega)^2 sin^2(Omega t)`` and ``C = 2 sqrt(w (1 - w))``.
    """
    if d == 0 and j == 0:
        raise ConfigurationError("oracle undefined for d = j = 0")
    times = grid.samples if hasattr(grid, "samples") else np.asarray(grid, dtype=float)
    omega = np.hypot(d, j)
    w = (j / omega) ** 2 * np.sin(omega * times) ** 2
    return TimeSeries(times, 2.0 * np.sqrt(np.clip(w * (1.0 - w), 0.0, None)), "concurrence")


def save_fits(path, fits: dict[str, FitResult | None], extra: dict | None = None) -> None:
    doc = {name: (fit.to_dict() if fit is not None else None) for name, fit in fits.items()}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, default=float))
