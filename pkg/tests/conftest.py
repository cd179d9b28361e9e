from functools import reduce

import numpy as np
import pytest

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(n, ops):
    """Dense kron product; ``ops`` maps 0-based qubit -> Pauli label (qubit 0 leftmost)."""
    return reduce(np.kron, [PAULI[ops.get(q, "I")] for q in range(n)])


def dense_hamiltonian(n, bonds, levels, couplings, gamma):
    """Independent dense construction of the lattice Hamiltonian from Pauli matrices."""
    h = sum(lv * pauli_string(n, {i: "Z"}) for i, lv in enumerate(levels))
    for (i, j), jij in zip(bonds, couplings):
        h = h + jij * (
            (1 + gamma) / 2 * pauli_string(n, {i: "X", j: "X"})
            + (1 - gamma) / 2 * pauli_string(n, {i: "Y", j: "Y"})
        )
    return h


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def report_criterion(request, capsys):
    """Record a one-line pass/fail verdict; all verdicts are echoed in the summary."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}: {detail}"
        request.config.stash.setdefault(_CRITERIA, {})[number] = line
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
