"""Oracle checks behind ``entlat verify``.

Each check compares the library against something built independently:
closed forms, dense Kronecker-product operators, or a second propagator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np
import scipy.linalg as sla

from entlat.analysis import two_qubit_oracle
from entlat.hamiltonian import build_full, build_sector
from entlat.hilbert import build_full_basis, initial_state, reduce_to_pair, StateVector
from entlat.lattice import DisorderRealization, ModelParams, build_geometry, child_seed, draw_disorder
from entlat.observables import concurrence, concurrence_values
from entlat.propagator import TimeGrid, diagonalize, evolve_exact, evolve_krylov, krylov_propagate

__all__ = ["CheckResult", "dense_pauli_hamiltonian", "run_checks", "CHECKS"]

_I2 = np.eye(2)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.diag([1.0, -1.0]).astype(complex)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op if k == site else _I2 for k in range(n)])


def dense_pauli_hamiltonian(params: ModelParams, disorder: DisorderRealization) -> np.ndarray:
    """Full-space Hamiltonian from explicit Kronecker products of Pauli matrices."""
    n, g = params.n, params.gamma
    geom = build_geometry(params)
    h = sum((params.delta0 + disorder.deltas[i]) * _site_op(_SZ, i, n) for i in range(n))
    for (i, j), c in zip(geom.bonds, disorder.couplings):
        xx = _site_op(_SX, i, n) @ _site_op(_SX, j, n)
        yy = _site_op(_SY, i, n) @ _site_op(_SY, j, n)
        h = h + c * ((1 + g) / 2 * xx + (1 - g) / 2 * yy)
    return h


def _werner(p: float) -> np.ndarray:
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    return p * np.outer(singlet, singlet) + (1 - p) / 4 * np.eye(4)


def check_werner(n_cap: int) -> tuple[bool, str]:
    worst = 0.0
    for p in (0.0, 0.4, 1.0):
        expected = max(0.0, (3 * p - 1) / 2)
        worst = max(worst, abs(concurrence(_werner(p)).value - expected))
    return worst <= 1e-9, f"max error {worst:.2e}"


def check_partial_trace(n_cap: int) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    n = 4
    basis = build_full_basis(n)
    worst = 0.0
    for _ in range(100):
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.linalg.norm(psi)
        full = np.outer(psi, psi.conj()).reshape(4, 4, 4, 4)
        dense = np.einsum("ajbj->ab", full)
        got = reduce_to_pair(StateVector(basis, psi)).entries
        worst = max(worst, float(np.abs(got - dense).max()))
    return worst <= 1e-12, f"max error {worst:.2e}"


def check_two_qubit(n_cap: int) -> tuple[bool, str]:
    grid = TimeGrid.uniform(200.0, 801)
    worst = 0.0
    for d, j in [(0.07, 0.01), (0.0, 0.03), (-0.05, 0.02)]:
        p = ModelParams(n=2, delta=0.2, j_strength=0.1)
        disorder = DisorderRealization(deltas=[d, 0.0], couplings=[j])
        h = build_full(p, build_geometry(p), disorder)
        psi0 = initial_state("separable", h.basis)
        amps = evolve_exact(diagonalize(h), psi0, grid).amplitudes
        # for two qubits the pair density matrix is the full projector
        got = concurrence_values(np.einsum("ti,tj->tij", amps, amps.conj()))
        worst = max(worst, float(np.abs(got - two_qubit_oracle(d, j, grid).values).max()))
    return worst <= 1e-9, f"max error {worst:.2e}"


def check_hamiltonian(n_cap: int) -> tuple[bool, str]:
    worst = 0.0
    for n, gamma in [(2, 1.0), (4, 0.3), (4, 0.0)]:
        p = ModelParams(n=n, gamma=gamma, delta=0.2, j_strength=0.1)
        d = draw_disorder(p, build_geometry(p), child_seed(11, n))
        got = build_full(p, build_geometry(p), d).toarray()
        worst = max(worst, float(np.abs(got - dense_pauli_hamiltonian(p, d)).max()))
    return worst <= 1e-12, f"max error {worst:.2e}"


def check_propagators(n_cap: int) -> tuple[bool, str]:
    n = min(8, n_cap)
    p = ModelParams(n=n, delta=0.2, j_strength=0.1)
    d = draw_disorder(p, build_geometry(p), child_seed(3, 0))
    h = build_sector(p, build_geometry(p), d)
    psi0 = initial_state("bell", h.basis)
    grid = TimeGrid.uniform(20.0, 21)
    exact = evolve_exact(diagonalize(h), psi0, grid).amplitudes
    kry = evolve_krylov(h, psi0, grid).amplitudes
    expm = np.array([sla.expm(-1j * t * h.toarray()) @ psi0.amplitudes for t in grid.samples])
    err = max(float(np.abs(exact - kry).max()), float(np.abs(exact - expm).max()))
    return err <= 1e-8, f"n={n}, max deviation {err:.2e}"


def check_conservation(n_cap: int) -> tuple[bool, str]:
    n = min(10, n_cap)
    p = ModelParams(n=n, delta=0.2, j_strength=0.2)
    d = draw_disorder(p, build_geometry(p), child_seed(5, 0))
    h = build_sector(p, build_geometry(p), d)
    psi0 = initial_state("bell", h.basis)
    grid = TimeGrid.uniform(100.0, 51)
    amps = evolve_exact(diagonalize(h), psi0, grid).amplitudes
    norm_err = float(np.abs(np.linalg.norm(amps, axis=1) - 1).max())
    e0 = np.vdot(psi0.amplitudes, h.matrix @ psi0.amplitudes).real
    energies = np.einsum("ti,ti->t", amps.conj(), (h.matrix @ amps.T).T).real
    e_err = float(np.abs(energies - e0).max() / max(abs(e0), 1.0))
    back = krylov_propagate(h, krylov_propagate(h, psi0.amplitudes, 30.0), -30.0)
    rt_err = float(np.abs(back - psi0.amplitudes).max())
    ok = norm_err <= 1e-10 and e_err <= 1e-8 and rt_err <= 1e-8
    return ok, f"n={n}: norm {norm_err:.1e}, energy {e_err:.1e}, round trip {rt_err:.1e}"


CHECKS: dict[str, Callable[[int], tuple[bool, str]]] = {
    "werner_concurrence": check_werner,
    "partial_trace_dense": check_partial_trace,
    "two_qubit_closed_form": check_two_qubit,
    "hamiltonian_pauli": check_hamiltonian,
    "propagator_cross_check": check_propagators,
    "conservation": check_conservation,
}


def run_checks(n_cap: int = 10, names=None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        start = time.perf_counter()
        try:
            ok, detail = fn(n_cap)
        except Exception as exc:  # any crash is a failed oracle
            ok, detail = False, f"raised {exc!r}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
