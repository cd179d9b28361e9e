"""Acceptance criteria 1-9, each at its stated tolerance.

Expensive ensembles are shared through module-scoped fixtures. Run alone with
``pytest tests/test_acceptance.py -v``; a verdict line per criterion is printed
in the terminal summary.
"""

import time
from math import comb, log2

import numpy as np
import pytest

from entlat.analysis import (
    ergodic_window,
    fgr_window,
    fit_exponential_cinf,
    fit_power_law,
    model_decay_rates,
    two_qubit_oracle,
)
from entlat.cli import build_run_config, execute
from entlat.ensemble import EnsembleConfig, run_ensemble, scan_j, scan_n
from entlat.hamiltonian import build_full, build_sector
from entlat.hilbert import (
    StateVector,
    build_full_basis,
    embed_sector,
    initial_state,
    reduce_to_pair,
)
from entlat.lattice import DisorderRealization, ModelParams, build_geometry, child_seed, draw_disorder
from entlat.observables import concurrence, concurrence_values, eigenstate_entropy
from entlat.propagator import TimeGrid, diagonalize, evolve_exact, evolve_krylov, krylov_propagate

from conftest import dense_hamiltonian, random_state

pytestmark = pytest.mark.slow

DELTA = 0.2


def _fmt_window(w):
    return f"[{w[0]:.3g}, {w[1]:.3g}]"


# --- shared ensembles --------------------------------------------------------------------


@pytest.fixture(scope="module")
def bell_scan():
    """n=10, gamma=1, Bell start, 50 realizations over the fig2 preset coupling list."""
    cfg = build_run_config({"preset": "fig2", "figures": False})
    return execute(cfg)


@pytest.fixture(scope="module")
def separable_scan():
    cfg = build_run_config({"preset": "fig4", "n": 10, "n_realizations": 50, "figures": False})
    return execute(cfg)


# --- 1: oracle suite ---------------------------------------------------------------------


def test_criterion_1_oracles(report_criterion):
    start = time.perf_counter()
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    werner_err = 0.0
    for p in (0.0, 0.4, 1.0):
        rho = p * np.outer(singlet, singlet) + (1 - p) / 4 * np.eye(4)
        werner_err = max(werner_err, abs(concurrence(rho).value - max(0.0, (3 * p - 1) / 2)))

    rng = np.random.default_rng(2024)
    basis = build_full_basis(4)
    trace_err = 0.0
    for _ in range(100):
        psi = random_state(rng, 16)
        dense = np.einsum("ajbj->ab", np.outer(psi, psi.conj()).reshape(4, 4, 4, 4))
        trace_err = max(trace_err, float(np.abs(reduce_to_pair(StateVector(basis, psi)).entries - dense).max()))

    rabi_err = 0.0
    grid = TimeGrid.uniform(300.0, 1501)
    for d, j in [(0.1, 0.01), (0.0, 0.05), (-0.03, 0.02), (0.2, -0.004)]:
        p = ModelParams(n=2, delta=DELTA, j_strength=0.1)
        h = build_full(p, build_geometry(p), DisorderRealization(deltas=[d, 0.0], couplings=[j]))
        psi0 = initial_state("separable", h.basis)
        amps = evolve_exact(diagonalize(h), psi0, grid).amplitudes
        omega = np.hypot(d, j)
        flipped = (j / omega) ** 2 * np.sin(omega * grid.samples) ** 2
        rabi_err = max(rabi_err, float(np.abs(np.abs(amps[:, 2]) ** 2 - flipped).max()))
        c = concurrence_values(np.einsum("ti,tj->tij", amps, amps.conj()))
        rabi_err = max(rabi_err, float(np.abs(c - two_qubit_oracle(d, j, grid).values).max()))
    elapsed = time.perf_counter() - start

    ok = werner_err <= 1e-9 and trace_err <= 1e-12 and rabi_err <= 1e-9 and elapsed < 60
    report_criterion(1, ok, f"Werner err {werner_err:.1e} (<=1e-9); partial trace err {trace_err:.1e} "
                            f"(<=1e-12); n=2 Rabi/concurrence err {rabi_err:.1e} (<=1e-9); {elapsed:.1f}s (<60s)")
    assert ok


# --- 2: conservation ---------------------------------------------------------------------


def test_criterion_2_conservation(report_criterion):
    start = time.perf_counter()
    norm_err = energy_err = leak = reversal_err = 0.0
    magnetization_exact = True
    grid = TimeGrid.uniform(200.0, 101)
    for n in (4, 6, 8, 10):
        p = ModelParams(n=n, gamma=1.0, delta=DELTA, j_strength=0.1)
        g = build_geometry(p)
        d = draw_disorder(p, g, child_seed(99, n))
        for h in (build_sector(p, g, d), build_full(p, g, d)):
            psi0 = initial_state("bell", h.basis)
            for traj in (evolve_exact(diagonalize(h), psi0, grid), evolve_krylov(h, psi0, grid.scaled(0.1))):
                amps = traj.amplitudes
                norm_err = max(norm_err, float(np.abs(np.linalg.norm(amps, axis=1) - 1).max()))
                hv = (h.matrix @ amps.T).T
                e = np.einsum("ti,ti->t", amps.conj(), hv).real
                energy_err = max(energy_err, float(np.abs(e - e[0]).max() / abs(e[0])))
                if h.kind == "sector":
                    # every component lives on a zero-magnetization register state
                    full = embed_sector(traj.final)
                    support = full.basis.states[np.abs(full.amplitudes) > 0]
                    ones = np.array([bin(int(s)).count("1") for s in support])
                    magnetization_exact &= bool(np.all(ones == n // 2))
            back = krylov_propagate(h, krylov_propagate(h, psi0.amplitudes, 50.0), -50.0)
            reversal_err = max(reversal_err, float(np.abs(back - psi0.amplitudes).max()))
        # gamma = 0 in the full space must not leave the sector
        p0 = p.replace(gamma=0.0)
        hf = build_full(p0, g, d)
        psi0 = initial_state("bell", hf.basis)
        amps = evolve_exact(diagonalize(hf), psi0, grid).amplitudes
        outside = hf.basis.bits.sum(axis=1) != n // 2
        leak = max(leak, float((np.abs(amps[:, outside]) ** 2).sum(axis=1).max()))
    elapsed = time.perf_counter() - start

    ok = (norm_err <= 1e-10 and energy_err <= 1e-8 and magnetization_exact and leak <= 1e-12
          and reversal_err <= 1e-8 and elapsed < 300)
    report_criterion(2, ok, f"n<=10: norm {norm_err:.1e} (<=1e-10); energy {energy_err:.1e} (<=1e-8 rel); "
                            f"sector magnetization exact={magnetization_exact}, gamma=0 full-space leak "
                            f"{leak:.1e}; round trip {reversal_err:.1e} (<=1e-8); {elapsed:.0f}s (<300s)")
    assert ok


# --- 3: t_c scaling ----------------------------------------------------------------------


def test_criterion_3_tc_scaling(bell_scan, report_criterion):
    est = model_decay_rates(ModelParams(n=10, delta=DELTA))
    j = bell_scan.column("j")
    tc = [p.t_c for p in bell_scan.points]
    fgr = fit_power_law(j, tc, fgr_window(est))
    erg = fit_power_law(j, tc, ergodic_window(est, j.max()), min_points=3)
    ok_fgr = abs(fgr["exponent"] + 2) <= 0.3
    ok_erg = abs(erg["exponent"] + 1) <= 0.3
    report_criterion(3, ok_fgr and ok_erg,
                     f"FGR slope {fgr['exponent']:.3f}±{fgr.stderr['exponent']:.3f} on {_fmt_window(fgr.window)} "
                     f"(target -2±0.3, {'ok' if ok_fgr else 'miss'}); ergodic slope {erg['exponent']:.3f}"
                     f"±{erg.stderr['exponent']:.3f} on {_fmt_window(erg.window)} "
                     f"(target -1±0.3, {'ok' if ok_erg else 'miss'})")
    assert ok_fgr and ok_erg


# --- 4: C_inf fit, collapse, perturbative stability --------------------------------------


def test_criterion_4_cinf(bell_scan, report_criterion):
    est = model_decay_rates(ModelParams(n=10, delta=DELTA))
    j = bell_scan.column("j")
    c = bell_scan.column("c_inf")
    fit = fit_exponential_cinf(j, c, (est.j_p, est.j_e))
    ok_a = 14 <= fit["A"] <= 26
    ok_j0 = 5e-4 <= fit["J0"] <= 2e-3
    strong = j >= 0.2 - 1e-12
    worst = float(c[strong].max())
    ok_collapse = worst < 0.02
    pert = fit_power_law(j, 1 - c, (j.min(), est.j_p), min_points=3)
    ok_pert = abs(pert["exponent"] - 2) <= 0.5
    ok = ok_a and ok_j0 and ok_collapse and ok_pert
    report_criterion(4, ok,
                     f"A={fit['A']:.2f}±{fit.stderr['A']:.2f} in [14,26] {'ok' if ok_a else 'miss'}; "
                     f"J0={fit['J0']:.2e}±{fit.stderr['J0']:.1e} in [5e-4,2e-3] {'ok' if ok_j0 else 'miss'} "
                     f"(fit on {_fmt_window(fit.window)}); max C_inf(J>=0.2)={worst:.4f} (<0.02) "
                     f"{'ok' if ok_collapse else 'miss'}; 1-C_inf slope {pert['exponent']:.2f}"
                     f"±{pert.stderr['exponent']:.2f} for J<={est.j_p:.3g} (2±0.5) {'ok' if ok_pert else 'miss'}")
    assert ok


# --- 5: short-time generation ------------------------------------------------------------


def test_criterion_5_short_time_law(report_criterion):
    grid = TimeGrid.uniform(0.1 / DELTA, 51)
    worst = 0.0
    for j in (1e-4, 1e-3, 1e-2):
        cfg = EnsembleConfig(ModelParams(n=10, delta=DELTA, j_strength=j), initial="separable",
                             n_realizations=50, grid=grid, check_stability=False)
        series = run_ensemble(cfg).C
        ratio = series.values[1:] / (j * series.times[1:])
        worst = max(worst, float(np.abs(ratio - 1).max()))
    ok = worst <= 0.15
    report_criterion(5, ok, f"max |C(t)/(J t) - 1| = {worst:.3f} for t<={0.1 / DELTA:g}, "
                            f"J in {{1e-4,1e-3,1e-2}} (<=0.15)")
    assert ok


# --- 6: crossover generation -------------------------------------------------------------


def test_criterion_6_crossover_generation(separable_scan, report_criterion):
    est = model_decay_rates(ModelParams(n=10, delta=DELTA))
    j = separable_scan.column("j")
    c = separable_scan.column("c_inf")
    window = (j >= est.j_p - 1e-12) & (j <= est.j_e + 1e-12)
    peak = float(c[window].max())
    ok_peak = 0.15 <= peak <= 0.4
    pert = fit_power_law(j, c, (j.min(), est.j_p), min_points=3)
    ok_slope = abs(pert["exponent"] - 1) <= 0.3
    report_criterion(6, ok_peak and ok_slope,
                     f"max C_inf on [{est.j_p:g},{est.j_e:g}] = {peak:.3f} (in [0.15,0.4]) "
                     f"{'ok' if ok_peak else 'miss'}; C_inf slope {pert['exponent']:.3f}"
                     f"±{pert.stderr['exponent']:.3f} for J<={est.j_p:g} (1±0.3) {'ok' if ok_slope else 'miss'}")
    assert ok_peak and ok_slope


# --- 7: gamma insensitivity --------------------------------------------------------------


def test_criterion_7_gamma_insensitivity(report_criterion):
    p = ModelParams(n=10, delta=DELTA, j_strength=0.1)
    g = build_geometry(p)
    d = draw_disorder(p, g, child_seed(0, 0))
    mats = [build_sector(p.replace(gamma=gamma), g, d).matrix for gamma in (0.0, 0.37, 1.0)]
    identical = all(
        np.array_equal(m.data, mats[0].data)
        and np.array_equal(m.indices, mats[0].indices)
        and np.array_equal(m.indptr, mats[0].indptr)
        for m in mats[1:]
    )
    j_values = [2e-3, 2e-2, 0.1, 0.2]
    base = EnsembleConfig(ModelParams(n=10, delta=DELTA), initial="bell", n_realizations=50, evolution="full")
    c = {gamma: scan_j(base.with_params(gamma=gamma), j_values).column("c_inf") for gamma in (0.0, 1.0)}
    diff = np.abs(c[0.0] - c[1.0])
    ok = identical and bool(np.all(diff <= 0.05))
    report_criterion(7, ok, f"sector matrix gamma-independent={identical}; full-space max |dC_inf| "
                            f"{diff.max():.4f} over J={j_values} (<=0.05)")
    assert ok


# --- 8: eigenstate entropy ---------------------------------------------------------------


def test_criterion_8_entropy(report_criterion):
    s_max = log2(comb(8, 4))
    medians = {}
    for j in (1.0, 1e-3):
        p = ModelParams(n=8, delta=DELTA, j_strength=j)
        g = build_geometry(p)
        pooled = np.concatenate([
            eigenstate_entropy(diagonalize(build_sector(p, g, draw_disorder(p, g, child_seed(0, r)))))
            for r in range(50)
        ])
        medians[j] = float(np.median(pooled))
    ok_erg = medians[1.0] >= 0.75 * s_max
    ok_loc = medians[1e-3] <= 0.2 * s_max
    report_criterion(8, ok_erg and ok_loc,
                     f"median S at J=1: {medians[1.0]:.3f} = {medians[1.0] / s_max:.3f} log2(70) (>=0.75); "
                     f"at J=1e-3: {medians[1e-3]:.3f} = {medians[1e-3] / s_max:.3f} log2(70) (<=0.2)")
    assert ok_erg and ok_loc


# --- 9: size independence ----------------------------------------------------------------


def test_criterion_9_size_collapse(report_criterion):
    # J inside the FGR window of every size: [delta/4, delta/2]
    j_values = [0.05, 0.07, 0.1]
    base = EnsembleConfig(ModelParams(n=10, delta=DELTA), initial="bell", n_realizations=50)
    scan = scan_n(base, [4, 6, 8, 10], j_values)
    ratios = []
    for j in j_values:
        tcs = scan.select(j=j).column("t_c")
        ratios.append(float(np.nanmax(tcs) / np.nanmin(tcs)))
    ok = max(ratios) <= 2.0 and not np.isnan(scan.column("t_c")).any()
    report_criterion(9, ok, "max/min t_c over n in {4,6,8,10}: "
                            + ", ".join(f"J={j:g}: {r:.2f}" for j, r in zip(j_values, ratios)) + " (<=2)")
    assert ok
