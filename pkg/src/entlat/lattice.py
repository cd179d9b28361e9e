"""Lattice geometry and disorder realizations.

Sites are numbered row-major starting at the top-left corner, so sites 1 and 2
(indices 0 and 1 internally) are horizontal neighbours on the lattice border.
Boundaries are open.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from entlat.errors import ConfigurationError

__all__ = [
    "ModelParams",
    "LatticeGeometry",
    "DisorderRealization",
    "build_geometry",
    "draw_disorder",
    "child_seed",
    "realization_to_dict",
    "realization_from_dict",
    "save_realization",
    "load_realization",
]


def _default_rows(n: int) -> int:
    return 1 if n < 4 else 2


@dataclass(frozen=True)
class ModelParams:
    """Static model knobs. Energies are in units of ``delta0``.

    ``rows``/``cols`` default to a two-leg ladder (``2 x n/2``); ``n=2``
    falls back to a single row.
    """

    n: int
    gamma: float = 1.0
    delta: float = 0.2
    j_strength: float = 0.0
    delta0: float = 1.0
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self) -> None:
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
            raise ConfigurationError(f"n must be an even integer >= 2, got {n!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.delta < 0:
            raise ConfigurationError(f"delta must be >= 0, got {self.delta}")
        if self.j_strength < 0:
            raise ConfigurationError(f"j_strength must be >= 0, got {self.j_strength}")
        if self.delta0 <= 0:
            raise ConfigurationError(f"delta0 must be > 0, got {self.delta0}")
        rows, cols = self.rows, self.cols
        if rows is None and cols is None:
            rows = _default_rows(n)
            cols = n // rows
        elif rows is None:
            rows = n // cols if cols and n % cols == 0 else 0
        elif cols is None:
            cols = n // rows if rows and n % rows == 0 else 0
        if not rows or not cols or rows * cols != n:
            raise ConfigurationError(
                f"lattice {self.rows}x{self.cols} does not hold n={n} sites"
            )
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "rows", int(rows))
        object.__setattr__(self, "cols", int(cols))

    def replace(self, **changes) -> "ModelParams":
        """Copy with ``changes`` applied; changing ``n`` resets the lattice shape."""
        data = self.to_dict()
        if "n" in changes and not {"rows", "cols"} & changes.keys():
            data["rows"] = data["cols"] = None
        data.update(changes)
        return ModelParams(**data)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "delta": self.delta,
            "j_strength": self.j_strength,
            "delta0": self.delta0,
            "rows": self.rows,
            "cols": self.cols,
        }


@dataclass(frozen=True)
class LatticeGeometry:
    rows: int
    cols: int
    sites: tuple[tuple[int, int], ...]
    bonds: tuple[tuple[int, int], ...]  # 0-based site indices, i < j

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def bond_array(self) -> np.ndarray:
        return np.asarray(self.bonds, dtype=np.int64).reshape(-1, 2)

    def is_border(self, site: int) -> bool:
        r, c = self.sites[site]
        return r in (0, self.rows - 1) or c in (0, self.cols - 1)


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of on-site offsets and bond couplings.

    ``couplings[k]`` belongs to ``geometry.bonds[k]``.
    """

    deltas: np.ndarray = field(repr=False)
    couplings: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self) -> None:
        deltas = np.array(self.deltas, dtype=float)
        couplings = np.array(self.couplings, dtype=float)
        deltas.setflags(write=False)
        couplings.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "couplings", couplings)

    def level_spacings(self, delta0: float = 1.0) -> np.ndarray:
        """Per-qubit level parameters ``delta0 + delta_i``."""
        return delta0 + self.deltas

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DisorderRealization):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.deltas, other.deltas)
            and np.array_equal(self.couplings, other.couplings)
        )

    __hash__ = None  # type: ignore[assignment]


def build_geometry(params: ModelParams) -> LatticeGeometry:
    """Rectangular ``rows x cols`` lattice with open boundaries."""
    rows, cols = params.rows, params.cols
    if rows * cols != params.n:
        raise ConfigurationError(f"rows*cols = {rows * cols} != n = {params.n}")
    sites = tuple((r, c) for r in range(rows) for c in range(cols))
    bonds = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                bonds.append((i, i + 1))
            if r + 1 < rows:
                bonds.append((i, i + cols))
    return LatticeGeometry(rows=rows, cols=cols, sites=sites, bonds=tuple(sorted(bonds)))


def child_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for realization ``index`` of an ensemble."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_disorder(params: ModelParams, geometry: LatticeGeometry, seed: int) -> DisorderRealization:
    """Draw i.i.d. uniform offsets and couplings from a PCG64 stream.

    The offsets are drawn first, then the couplings, each as an affine map of
    standard uniforms, so realizations with the same seed but different
    ``delta``/``j_strength`` share their underlying variates.
    """
    if geometry.n != params.n:
        raise ConfigurationError("geometry does not match params.n")
    rng = np.random.Generator(np.random.PCG64(seed))
    u_site = rng.random(params.n)
    u_bond = rng.random(geometry.n_bonds)
    deltas = params.delta * (u_site - 0.5)
    couplings = params.j_strength * (2.0 * u_bond - 1.0)
    return DisorderRealization(deltas=deltas, couplings=couplings, seed=int(seed))


def realization_to_dict(
    params: ModelParams, geometry: LatticeGeometry, disorder: DisorderRealization
) -> dict:
    return {
        "n": params.n,
        "rows": geometry.rows,
        "cols": geometry.cols,
        "bonds": [[i + 1, j + 1] for i, j in geometry.bonds],
        "deltas": [float(x) for x in disorder.deltas],
        "couplings": [float(x) for x in disorder.couplings],
        "seed": int(disorder.seed),
        "params": params.to_dict(),
    }


def realization_from_dict(data: dict) -> tuple[ModelParams, LatticeGeometry, DisorderRealization]:
    pdata = dict(data.get("params") or {"n": data["n"]})
    pdata.update(n=data["n"], rows=data["rows"], cols=data["cols"])
    params = ModelParams(**pdata)
    geometry = build_geometry(params)
    bonds = [tuple(int(x) - 1 for x in b) for b in data["bonds"]]
    if bonds != list(geometry.bonds):
        raise ConfigurationError("stored bond list does not match the lattice shape")
    disorder = DisorderRealization(
        deltas=data["deltas"], couplings=data["couplings"], seed=int(data["seed"])
    )
    return params, geometry, disorder


def save_realization(path, params, geometry, disorder) -> None:
    Path(path).write_text(json.dumps(realization_to_dict(params, geometry, disorder), indent=2))


def load_realization(path):
    return realization_from_dict(json.loads(Path(path).read_text()))
