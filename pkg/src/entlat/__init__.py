"""Pairwise entanglement dynamics in a disordered qubit lattice."""

__version__ = "0.1.0"

from entlat.errors import (  # noqa: E402
    ConfigurationError,
    DataLossError,
    DimensionError,
    EntlatError,
    FitError,
    PhysicalityError,
)
from entlat.lattice import ModelParams, build_geometry, draw_disorder  # noqa: E402
from entlat.hilbert import build_sector_basis, initial_state, reduce_to_pair  # noqa: E402
from entlat.hamiltonian import build_full, build_sector  # noqa: E402
from entlat.propagator import TimeGrid, diagonalize, evolve_exact, evolve_krylov  # noqa: E402
from entlat.observables import concurrence, fidelity  # noqa: E402
from entlat.ensemble import EnsembleConfig, run_ensemble, scan_j, scan_n  # noqa: E402

__all__ = [
    "__version__",
    "ConfigurationError",
    "DataLossError",
    "DimensionError",
    "EntlatError",
    "FitError",
    "PhysicalityError",
    "ModelParams",
    "build_geometry",
    "draw_disorder",
    "build_sector_basis",
    "initial_state",
    "reduce_to_pair",
    "build_full",
    "build_sector",
    "TimeGrid",
    "diagonalize",
    "evolve_exact",
    "evolve_krylov",
    "concurrence",
    "fidelity",
    "EnsembleConfig",
    "run_ensemble",
    "scan_j",
    "scan_n",
]
