"""Sparse assembly of the disordered XY/Ising lattice Hamiltonian.

    H = sum_i Delta_i sz_i
        + sum_<ij> J_ij [ (1+g)/2 sx_i sx_j + (1-g)/2 sy_i sy_j ]

In the register basis a bond with antiparallel spins contributes a flip-flop
element ``J_ij``; a bond with parallel spins contributes a double flip
``g * J_ij``, which changes the magnetization by two and is therefore absent
from the zero-magnetization block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from entlat.errors import DimensionError
from entlat.hilbert import Basis, StateVector, build_full_basis, build_sector_basis
from entlat.lattice import DisorderRealization, LatticeGeometry, ModelParams

__all__ = [
    "SparseHamiltonian",
    "build_full",
    "build_sector",
    "build",
    "apply",
    "save_triplets",
    "load_triplets",
]


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    matrix: sp.csr_matrix = field(repr=False)
    basis: Basis = field(repr=False)
    params: ModelParams | None = None
    disorder: DisorderRealization | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def kind(self) -> str:
        return self.basis.kind

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_bound(self) -> float:
        """Upper bound on the spectral radius (max absolute row sum)."""
        return float(abs(self.matrix).sum(axis=1).max())


def _assemble(
    basis: Basis,
    geometry: LatticeGeometry,
    disorder: DisorderRealization,
    delta0: float,
    double_flip: float | None,
) -> sp.csr_matrix:
    n, dim = basis.n, basis.dim
    bits = basis.bits
    spins = 1.0 - 2.0 * bits
    levels = delta0 + disorder.deltas
    # fixed summation order keeps the diagonal bitwise identical across bases
    diag = np.zeros(dim)
    for i in range(n):
        diag += levels[i] * spins[:, i]

    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag]
    src = np.arange(dim)
    for (i, j), coupling in zip(geometry.bonds, disorder.couplings):
        if coupling == 0.0:
            continue
        mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        anti = bits[:, i] != bits[:, j]
        k = src[anti]
        rows.append(basis.index_of(basis.states[k] ^ mask))
        cols.append(k)
        vals.append(np.full(k.size, coupling))
        if double_flip:
            k = src[~anti]
            rows.append(basis.index_of(basis.states[k] ^ mask))
            cols.append(k)
            vals.append(np.full(k.size, double_flip * coupling))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def build_full(
    params: ModelParams,
    geometry: LatticeGeometry,
    disorder: DisorderRealization,
    basis: Basis | None = None,
) -> SparseHamiltonian:
    """Hamiltonian on all ``2**n`` register states."""
    basis = basis if basis is not None else build_full_basis(params.n)
    mat = _assemble(basis, geometry, disorder, params.delta0, params.gamma)
    return SparseHamiltonian(mat, basis, params, disorder)


def build_sector(
    params: ModelParams,
    geometry: LatticeGeometry,
    disorder: DisorderRealization,
    basis: Basis | None = None,
) -> SparseHamiltonian:
    """Zero-magnetization block. Independent of ``gamma`` by construction."""
    basis = basis if basis is not None else build_sector_basis(params.n)
    if basis.kind != "sector":
        raise DimensionError("build_sector needs a sector basis")
    mat = _assemble(basis, geometry, disorder, params.delta0, None)
    return SparseHamiltonian(mat, basis, params, disorder)


def build(params, geometry, disorder, evolution: str = "sector", basis: Basis | None = None):
    if evolution == "sector":
        return build_sector(params, geometry, disorder, basis)
    if evolution == "full":
        return build_full(params, geometry, disorder, basis)
    raise ValueError(f"unknown evolution space {evolution!r}")


def apply(h: SparseHamiltonian, v: StateVector | np.ndarray):
    """``H @ v``; returns the same kind of object it was given."""
    if isinstance(v, StateVector):
        if not v.basis.same_as(h.basis):
            raise DimensionError(f"state in {v.basis.kind} basis, Hamiltonian in {h.kind} basis")
        return StateVector(h.basis, h.matrix @ v.amplitudes)
    arr = np.asarray(v)
    if arr.shape[0] != h.dim:
        raise DimensionError(f"vector length {arr.shape[0]} != dimension {h.dim}")
    return h.matrix @ arr


def save_triplets(path, h: SparseHamiltonian) -> None:
    """Write ``row col value`` lines, 1-based, full double precision."""
    lines = [f"{r + 1} {c + 1} {v:.17g}" for r, c, v in h.entries]
    Path(path).write_text("\n".join(lines) + "\n")


def load_triplets(path, dim: int | None = None) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    r = data[:, 0].astype(int) - 1
    c = data[:, 1].astype(int) - 1
    size = dim if dim is not None else int(max(r.max(), c.max())) + 1
    return sp.coo_matrix((data[:, 2], (r, c)), shape=(size, size)).tocsr()
