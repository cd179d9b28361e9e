from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entlat.errors import ConfigurationError, DataLossError
from entlat.hilbert import (
    StateVector,
    TwoQubitDensityMatrix,
    build_full_basis,
    build_sector_basis,
    embed_sector,
    initial_state,
    load_state,
    magnetization,
    project_sector,
    reduce_to_pair,
    save_state,
)

from conftest import random_state


def dense_partial_trace(psi, n):
    """Brute force: |psi><psi| as a 2^n x 2^n matrix, trace over qubits 3..n."""
    rho = np.outer(psi, psi.conj()).reshape(4, 2 ** (n - 2), 4, 2 ** (n - 2))
    out = np.zeros((4, 4), dtype=complex)
    for k in range(2 ** (n - 2)):
        out += rho[:, k, :, k]
    return out


def test_sector_n2():
    b = build_sector_basis(2)
    assert b.states.tolist() == [0b01, 0b10]


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12, 14])
def test_sector_dimension_matches_count(n):
    b = build_sector_basis(n)
    brute = [s for s in range(2**n) if bin(s).count("1") == n // 2]
    assert b.states.tolist() == brute
    assert b.dim == comb(n, n // 2)


def test_sector_known_dims():
    assert build_sector_basis(10).dim == 252
    assert build_sector_basis(14).dim == 3432


def test_index_maps_are_inverse():
    b = build_sector_basis(8)
    idx = b.index_of(b.states)
    assert np.array_equal(idx, np.arange(b.dim))
    with pytest.raises(KeyError):
        b.index_of(0b00000001)


@pytest.mark.parametrize("n", [3, 22])
def test_sector_bad_n(n):
    with pytest.raises(ConfigurationError):
        build_sector_basis(n)


def test_bell_n4_full():
    psi = initial_state("bell", "full", n=4)
    nz = np.flatnonzero(psi.amplitudes)
    assert nz.tolist() == [0b0101, 0b1001]
    np.testing.assert_allclose(psi.amplitudes[nz], 1 / np.sqrt(2))


def test_separable_n4_full():
    psi = initial_state("separable", "full", n=4)
    assert np.flatnonzero(psi.amplitudes).tolist() == [0b0101]
    assert psi.amplitudes[0b0101] == 1


def test_bell_n10_sector_two_entries():
    psi = initial_state("bell", "sector", n=10)
    assert psi.basis.dim == 252
    assert np.count_nonzero(psi.amplitudes) == 2


@pytest.mark.parametrize("kind", ["bell", "separable"])
@pytest.mark.parametrize("n", [2, 4, 6, 10])
def test_initial_states_have_zero_magnetization(kind, n):
    assert magnetization(initial_state(kind, "full", n=n)) == 0.0
    assert magnetization(initial_state(kind, "sector", n=n)) == 0.0


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        initial_state("ghz", "sector", n=4)


def test_reduce_bell_and_separable():
    rho = reduce_to_pair(initial_state("bell", "sector", n=6)).entries
    expected = np.zeros((4, 4))
    expected[1, 1] = expected[1, 2] = expected[2, 1] = expected[2, 2] = 0.5
    np.testing.assert_allclose(rho, expected, atol=1e-15)
    rho = reduce_to_pair(initial_state("separable", "full", n=6)).entries
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    np.testing.assert_allclose(rho, expected, atol=1e-15)


def test_reduce_matches_dense_oracle(rng):
    full = build_full_basis(4)
    for _ in range(100):
        psi = random_state(rng, 16)
        rho = reduce_to_pair(StateVector(full, psi))
        np.testing.assert_allclose(rho.entries, dense_partial_trace(psi, 4), atol=1e-12, rtol=0)
        rho.check()


def test_reduce_sector_matches_embedded(rng):
    sector = build_sector_basis(8)
    psi = StateVector(sector, random_state(rng, sector.dim))
    a = reduce_to_pair(psi).entries
    b = dense_partial_trace(embed_sector(psi).amplitudes, 8)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_trace_equals_squared_norm(rng):
    full = build_full_basis(6)
    v = 0.7 * random_state(rng, 64)
    rho = reduce_to_pair(StateVector(full, v)).entries
    assert abs(np.trace(rho) - np.vdot(v, v)) < 1e-14


def test_other_pair(rng):
    full = build_full_basis(4)
    psi = random_state(rng, 16)
    # swap qubits (1,2) <-> (3,4) then trace with the default pair
    swapped = psi.reshape(4, 4).T.reshape(-1)
    a = reduce_to_pair(StateVector(full, psi), pair=(2, 3)).entries
    np.testing.assert_allclose(a, dense_partial_trace(swapped, 4), atol=1e-14)


def test_embed_project_round_trip():
    psi = initial_state("bell", "sector", n=4)
    back = project_sector(embed_sector(psi))
    assert np.array_equal(back.amplitudes, psi.amplitudes)


def test_project_one_hot():
    full = build_full_basis(4)
    amps = np.zeros(16, complex)
    amps[0b0101] = 1
    out = project_sector(StateVector(full, amps))
    assert np.count_nonzero(out.amplitudes) == 1
    assert out.amplitudes[out.basis.index_of(0b0101)] == 1


def test_project_data_loss():
    full = build_full_basis(4)
    amps = np.zeros(16, complex)
    amps[0b0001] = 1
    with pytest.raises(DataLossError):
        project_sector(StateVector(full, amps))


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000))
def test_density_matrix_invariants(seed):
    rng = np.random.default_rng(seed)
    sector = build_sector_basis(6)
    rho = reduce_to_pair(StateVector(sector, random_state(rng, sector.dim)))
    m = rho.entries
    assert np.max(np.abs(m - m.conj().T)) <= 1e-12
    assert abs(np.trace(m) - 1) <= 1e-10
    assert np.linalg.eigvalsh(m).min() >= -1e-10


def test_state_json_round_trip(tmp_path, rng):
    sector = build_sector_basis(6)
    psi = StateVector(sector, random_state(rng, sector.dim))
    save_state(tmp_path / "psi.json", psi)
    back = load_state(tmp_path / "psi.json")
    assert back.basis.kind == "sector"
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)


def test_density_matrix_shape_check():
    with pytest.raises(Exception):
        TwoQubitDensityMatrix(np.eye(3))
