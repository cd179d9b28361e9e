"""Disorder ensembles and parameter scans.

Realization ``r`` of every ensemble draws its disorder from
``child_seed(master_seed, r)``, so scans over ``J`` reuse the same underlying
uniform variates at every point (common random numbers) and results never
depend on worker scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from entlat import __version__
from entlat.errors import ConfigurationError, EntlatError
from entlat.hamiltonian import build as build_hamiltonian
from entlat.hilbert import PairTracer, build_full_basis, build_sector_basis, initial_state
from entlat.lattice import ModelParams, build_geometry, child_seed, draw_disorder
from entlat.observables import (
    SATURATION_FRACTION,
    TC_THRESHOLD,
    TimeSeries,
    concurrence_timescale,
    concurrence_values,
    is_saturated,
    saturation_value,
)
from entlat.propagator import (
    DENSE_CAP,
    TimeGrid,
    default_grid,
    diagonalize,
    krylov_propagate,
)

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "RealizationError",
    "ScanPoint",
    "ScanResult",
    "run_ensemble",
    "scan_j",
    "scan_n",
    "write_scan",
    "resolve_workers",
]

log = logging.getLogger(__name__)

_CHUNK = 256


class RealizationError(EntlatError, RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        super().__init__(f"realization {index} (seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed


@dataclass(frozen=True)
class EnsembleConfig:
    params: ModelParams
    initial: str = "bell"
    n_realizations: int = 50
    master_seed: int = 0
    grid: TimeGrid | None = None
    n_samples: int = 2000
    spacing: str = "linear"
    t_min: float = 1e-2
    evolution: str = "sector"
    propagator: str = "auto"
    check_stability: bool = True
    krylov_order: int = 30

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            raise ConfigurationError("n_realizations must be >= 1")
        if self.initial not in ("bell", "separable"):
            raise ConfigurationError(f"unknown initial state {self.initial!r}")
        if self.evolution not in ("sector", "full"):
            raise ConfigurationError(f"unknown evolution space {self.evolution!r}")
        if self.propagator not in ("auto", "exact", "krylov"):
            raise ConfigurationError(f"unknown propagator {self.propagator!r}")
        if self.spacing not in ("linear", "log"):
            raise ConfigurationError(f"unknown grid spacing {self.spacing!r}")

    def time_grid(self) -> TimeGrid:
        if self.grid is not None:
            return self.grid
        return default_grid(self.params.delta, self.params.j_strength, self.n_samples, self.spacing, self.t_min)

    def with_params(self, **changes) -> "EnsembleConfig":
        return replace(self, params=self.params.replace(**changes))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["params"] = self.params.to_dict()
        data["grid"] = None if self.grid is None else {"t_max": self.grid.t_max, "n_samples": len(self.grid)}
        return data


def _tail_times(samples: np.ndarray) -> np.ndarray:
    """Trailing-window samples of the same grid stretched to twice its horizon."""
    t_max = samples[-1]
    window = samples[samples >= t_max - SATURATION_FRACTION * t_max - 1e-12 * t_max]
    return 2.0 * window


def _realization(config: EnsembleConfig, index: int) -> dict:
    seed = child_seed(config.master_seed, index)
    try:
        return _realization_unchecked(config, seed)
    except EntlatError:
        raise
    except Exception as exc:  # attach realization context
        raise RealizationError(index, seed, exc) from exc


def _basis_for(config: EnsembleConfig):
    n = config.params.n
    return build_sector_basis(n) if config.evolution == "sector" else build_full_basis(n)


def _realization_unchecked(config: EnsembleConfig, seed: int) -> dict:
    params = config.params
    geometry = build_geometry(params)
    disorder = draw_disorder(params, geometry, seed)
    basis = _basis_for(config)
    h = build_hamiltonian(params, geometry, disorder, config.evolution, basis)
    psi0 = initial_state(config.initial, basis)
    tracer = PairTracer(basis)
    times = config.time_grid().samples
    tail = _tail_times(times) if config.check_stability else np.empty(0)

    use_exact = config.propagator == "exact" or (config.propagator == "auto" and h.dim <= DENSE_CAP)
    if use_exact:
        es = diagonalize(h, dense_cap=max(DENSE_CAP, h.dim))
        coeffs = es.coefficients(psi0.amplitudes)

        def amplitudes(ts):
            for start in range(0, ts.size, _CHUNK):
                block = ts[start : start + _CHUNK]
                amps = es.states_at(coeffs, block)
                amps[block == 0.0] = psi0.amplitudes
                yield amps

    else:
        state = {"t": 0.0, "psi": psi0.amplitudes.copy()}

        def amplitudes(ts):
            # continues from the last propagated time, so calls must be time-ordered
            for start in range(0, ts.size, _CHUNK):
                block = ts[start : start + _CHUNK]
                out = np.empty((block.size, h.dim), dtype=complex)
                for k, t in enumerate(block):
                    state["psi"] = krylov_propagate(h, state["psi"], t - state["t"], m=config.krylov_order)
                    state["t"] = t
                    out[k] = state["psi"]
                yield out

    c_vals, f_vals = [], []
    for amps in amplitudes(times):
        c_vals.append(concurrence_values(tracer(amps)))
        f_vals.append(np.abs(amps @ psi0.amplitudes.conj()) ** 2)
    c_tail = [concurrence_values(tracer(amps)) for amps in amplitudes(tail)] if tail.size else []
    return {
        "seed": seed,
        "C": np.concatenate(c_vals),
        "f": np.concatenate(f_vals),
        "C_tail": np.concatenate(c_tail) if c_tail else np.empty(0),
    }


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("ENTLAT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _execute(tasks: list[tuple[EnsembleConfig, int]], workers: int | None) -> list[dict]:
    workers = min(resolve_workers(workers), len(tasks))
    if workers <= 1:
        return [_realization(cfg, r) for cfg, r in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        configs, indices = zip(*tasks)
        chunk = max(1, len(tasks) // (4 * workers))
        return list(pool.map(_realization, configs, indices, chunksize=chunk))


def _stderr(samples: np.ndarray) -> np.ndarray:
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    return samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])


@dataclass(eq=False)
class EnsembleResult:
    config: EnsembleConfig
    times: np.ndarray
    concurrence: np.ndarray  # (N_r, T)
    fidelity: np.ndarray  # (N_r, T)
    seeds: list[int]
    tail_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    tail_concurrence: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    wall_time: float = 0.0

    @classmethod
    def from_records(cls, config, records, wall_time=0.0) -> "EnsembleResult":
        times = config.time_grid().samples
        tail = _tail_times(times) if config.check_stability else np.empty(0)
        return cls(
            config=config,
            times=times.copy(),
            concurrence=np.vstack([r["C"] for r in records]),
            fidelity=np.vstack([r["f"] for r in records]),
            seeds=[int(r["seed"]) for r in records],
            tail_times=tail,
            tail_concurrence=np.vstack([r["C_tail"] for r in records]) if tail.size else np.empty((0, 0)),
            wall_time=wall_time,
        )

    @property
    def n_realizations(self) -> int:
        return self.concurrence.shape[0]

    @property
    def C(self) -> TimeSeries:
        return TimeSeries(self.times, self.concurrence.mean(axis=0), "concurrence", _stderr(self.concurrence))

    @property
    def f(self) -> TimeSeries:
        return TimeSeries(self.times, self.fidelity.mean(axis=0), "fidelity", _stderr(self.fidelity))

    def realization_series(self, r: int, label: str = "concurrence") -> TimeSeries:
        data = self.concurrence if label == "concurrence" else self.fidelity
        return TimeSeries(self.times, data[r], label)

    def c_inf_per_realization(self) -> np.ndarray:
        return np.array(
            [saturation_value(self.realization_series(r)) for r in range(self.n_realizations)]
        )

    def c_inf(self) -> float:
        return saturation_value(self.C)

    def c_inf_stderr(self) -> float:
        return float(_stderr(self.c_inf_per_realization()[:, None])[0])

    def c_inf_doubled(self) -> float | None:
        if not self.tail_times.size:
            return None
        tail = TimeSeries(self.tail_times, self.tail_concurrence.mean(axis=0), "concurrence")
        return saturation_value(tail, fraction=1.0)

    def is_stable(self) -> bool | None:
        doubled = self.c_inf_doubled()
        return None if doubled is None else is_saturated(self.c_inf(), doubled)

    def t_c(self, mode: str = "averaged", threshold: float = TC_THRESHOLD) -> float | None:
        """Concurrence time scale.

        ``averaged`` reads the crossing off the disorder-averaged curve.
        ``per_realization`` takes the median of per-realization crossing
        times, counting realizations that never cross as infinite.
        """
        if mode == "averaged":
            return concurrence_timescale(self.C, threshold)
        if mode != "per_realization":
            raise ConfigurationError(f"unknown t_c mode {mode!r}")
        tcs = [concurrence_timescale(self.realization_series(r), threshold) for r in range(self.n_realizations)]
        med = float(np.median([np.inf if t is None else t for t in tcs]))
        return None if np.isinf(med) else med


def run_ensemble(config: EnsembleConfig, workers: int | None = None) -> EnsembleResult:
    start = time.perf_counter()
    records = _execute([(config, r) for r in range(config.n_realizations)], workers)
    return EnsembleResult.from_records(config, records, time.perf_counter() - start)


@dataclass(eq=False)
class ScanPoint:
    n: int
    j: float
    gamma: float
    ensemble: EnsembleResult
    c_inf: float
    c_inf_stderr: float
    c_inf_doubled: float | None
    stable: bool | None
    t_c: float | None

    @classmethod
    def from_ensemble(cls, ens: EnsembleResult, tc_mode: str = "averaged") -> "ScanPoint":
        p = ens.config.params
        return cls(
            n=p.n,
            j=p.j_strength,
            gamma=p.gamma,
            ensemble=ens,
            c_inf=ens.c_inf(),
            c_inf_stderr=ens.c_inf_stderr(),
            c_inf_doubled=ens.c_inf_doubled(),
            stable=ens.is_stable(),
            t_c=ens.t_c(tc_mode),
        )


@dataclass(eq=False)
class ScanResult:
    axis: str
    points: list[ScanPoint]
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(p, name) is None else getattr(p, name) for p in self.points], dtype=float)

    def select(self, **match) -> "ScanResult":
        pts = [p for p in self.points if all(np.isclose(getattr(p, k), v) for k, v in match.items())]
        return ScanResult(self.axis, pts, self.wall_time)

    def table(self) -> list[dict]:
        return [
            {
                "J": p.j,
                "n": p.n,
                "gamma": p.gamma,
                "C_inf": p.c_inf,
                "C_inf_stderr": p.c_inf_stderr,
                "t_c": p.t_c,
                "stable_flag": p.stable,
            }
            for p in self.points
        ]


def _scan(configs: list[EnsembleConfig], axis: str, workers, tc_mode) -> ScanResult:
    start = time.perf_counter()
    tasks = [(cfg, r) for cfg in configs for r in range(cfg.n_realizations)]
    records = _execute(tasks, workers)
    points, pos = [], 0
    for cfg in configs:
        chunk = records[pos : pos + cfg.n_realizations]
        pos += cfg.n_realizations
        ens = EnsembleResult.from_records(cfg, chunk)
        points.append(ScanPoint.from_ensemble(ens, tc_mode))
        log.info("n=%d J=%.3g: C_inf=%.4f t_c=%s", cfg.params.n, cfg.params.j_strength, points[-1].c_inf, points[-1].t_c)
    return ScanResult(axis, points, time.perf_counter() - start)


def scan_j(
    config: EnsembleConfig,
    j_values,
    workers: int | None = None,
    tc_mode: str = "averaged",
) -> ScanResult:
    """One ensemble per coupling strength; grids follow each ``J`` unless fixed in ``config``."""
    j_values = [float(j) for j in j_values]
    if any(j <= 0 for j in j_values) or j_values != sorted(j_values):
        raise ConfigurationError("j_values must be positive and ascending")
    configs = [config.with_params(j_strength=j) for j in j_values]
    return _scan(configs, "J", workers, tc_mode)


def scan_n(
    config: EnsembleConfig,
    n_values,
    j_values,
    workers: int | None = None,
    realizations: dict[int, int] | None = None,
    tc_mode: str = "averaged",
) -> ScanResult:
    """``J`` scans repeated for several lattice sizes (default ``2 x n/2`` ladders)."""
    if any(int(n) % 2 for n in n_values):
        raise ConfigurationError("all n must be even")
    configs = []
    for n in n_values:
        base = config.with_params(n=int(n), rows=None, cols=None)
        if realizations and int(n) in realizations:
            base = replace(base, n_realizations=int(realizations[int(n)]))
        configs.extend(base.with_params(j_strength=float(j)) for j in j_values)
    return _scan(configs, "n", workers, tc_mode)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.15e}"


def _write_series_csv(path: Path, scan: ScanResult, label: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "J", "gamma", "t", "value", "stderr"])
        for p in scan.points:
            series = p.ensemble.C if label == "C" else p.ensemble.f
            for t, v, e in zip(series.times, series.values, series.stderr):
                writer.writerow([p.n, _fmt(p.j), _fmt(p.gamma), _fmt(t), _fmt(v), _fmt(e)])


def write_scan(scan: ScanResult, outdir, manifest_extra: dict | None = None, archive: bool = True) -> Path:
    """Persist a scan: ``manifest.json``, ``avg_C.csv``, ``avg_f.csv``, ``scan_table.csv``.

    Per-realization curves go to ``realizations/point_XXX.npz`` when ``archive``.
    """
    import scipy

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    _write_series_csv(out / "avg_C.csv", scan, "C")
    _write_series_csv(out / "avg_f.csv", scan, "f")
    with open(out / "scan_table.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        cols = ["J", "n", "gamma", "C_inf", "C_inf_stderr", "t_c", "stable_flag"]
        writer.writerow(cols)
        for row in scan.table():
            writer.writerow([_fmt(row[c]) for c in cols])
    if archive:
        arch = out / "realizations"
        arch.mkdir(exist_ok=True)
        for k, p in enumerate(scan.points):
            ens = p.ensemble
            np.savez_compressed(
                arch / f"point_{k:03d}.npz",
                times=ens.times,
                concurrence=ens.concurrence,
                fidelity=ens.fidelity,
                seeds=np.array(ens.seeds, dtype=np.uint64),
                tail_times=ens.tail_times,
                tail_concurrence=ens.tail_concurrence,
            )
    manifest = {
        "axis": scan.axis,
        "points": [
            {
                "n": p.n,
                "J": p.j,
                "gamma": p.gamma,
                "n_realizations": p.ensemble.n_realizations,
                "seeds": [str(s) for s in p.ensemble.seeds],
                "ensemble": p.ensemble.config.to_dict(),
            }
            for p in scan.points
        ],
        "versions": {"entlat": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": scan.wall_time,
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return out
