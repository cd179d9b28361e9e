"""PNG renderings of scan outputs (non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from entlat.analysis import FitResult  # noqa: E402
from entlat.ensemble import ScanResult  # noqa: E402

__all__ = ["plot_timescale", "plot_saturation", "plot_curves", "render_preset"]

_MARKERS = "^<vosDph*"


def _groups(scan: ScanResult):
    keys = sorted({(p.n, p.gamma) for p in scan.points})
    for k, (n, gamma) in enumerate(keys):
        pts = [p for p in scan.points if p.n == n and p.gamma == gamma]
        yield f"n={n}, γ={gamma:g}", _MARKERS[k % len(_MARKERS)], pts


def _finish(fig, ax, path: Path) -> Path:
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _guide(ax, j: np.ndarray, anchor_j: float, anchor_y: float, power: float, style: str, label: str):
    ax.plot(j, anchor_y * (j / anchor_j) ** power, style, color="gray", lw=1, label=label)


def plot_timescale(scan: ScanResult, path, fits: dict[str, FitResult | None] | None = None) -> Path:
    """``t_c`` against ``J`` on log axes with ``J^-1`` and ``J^-2`` guides."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, marker, pts in _groups(scan):
        j = np.array([p.j for p in pts if p.t_c is not None])
        t = np.array([p.t_c for p in pts if p.t_c is not None])
        ax.loglog(j, t, marker, ls="none", label=label)
    j_all = np.array(sorted({p.j for p in scan.points}))
    drawn = False
    for key, style in (("tc_fgr", "--"), ("tc_ergodic", "-")):
        fit = (fits or {}).get(key)
        if fit is not None:
            lo, hi = fit.window
            jj = np.geomspace(lo, hi, 20)
            ax.plot(jj, fit["prefactor"] * jj ** fit["exponent"], style, color="k", lw=1,
                    label=f"{key}: slope {fit['exponent']:.2f}")
            drawn = True
    if j_all.size and not drawn:
        mid = j_all[j_all.size // 2]
        ref = [p.t_c for p in scan.points if p.j == mid and p.t_c is not None]
        if ref:
            _guide(ax, j_all, mid, ref[0], -1.0, "-", "∝ 1/J")
            _guide(ax, j_all, mid, ref[0], -2.0, "--", "∝ 1/J²")
    ax.set_xlabel("J")
    ax.set_ylabel("t_c")
    return _finish(fig, ax, Path(path))


def plot_saturation(
    scan: ScanResult,
    path,
    exp_fit: FitResult | None = None,
    linear_guide: bool = False,
) -> Path:
    """``C_inf`` against ``J`` (log ``J``) with optional exponential fit and ``∝ J`` guide."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, marker, pts in _groups(scan):
        ax.errorbar([p.j for p in pts], [p.c_inf for p in pts], yerr=[p.c_inf_stderr for p in pts],
                    fmt=marker, ls="none", ms=4, capsize=2, label=label)
    j_all = np.array(sorted({p.j for p in scan.points}))
    if exp_fit is not None and j_all.size:
        jj = np.geomspace(j_all[0], j_all[-1], 200)
        ax.plot(jj, np.exp(-exp_fit["A"] * (jj - exp_fit["J0"])), "--", color="k", lw=1,
                label=f"exp fit: A={exp_fit['A']:.1f}")
    ax.set_xscale("log")
    if linear_guide and j_all.size:
        ax.set_yscale("log")
        low = [p for p in scan.points if p.j == j_all[0] and p.c_inf > 0]
        if low:
            _guide(ax, j_all, j_all[0], low[0].c_inf, 1.0, "-", "∝ J")
    ax.set_xlabel("J")
    ax.set_ylabel("C∞")
    return _finish(fig, ax, Path(path))


def plot_curves(
    scan: ScanResult,
    path,
    n: int | None = None,
    j_values=None,
    loglog: bool = False,
    jt_lines: bool = False,
) -> Path:
    """Disorder-averaged ``C(t)`` for each ``J`` at one lattice size."""
    n = n if n is not None else max(p.n for p in scan.points)
    pts = [p for p in scan.points if p.n == n]
    if j_values is not None:
        pts = [p for p in pts if any(np.isclose(p.j, j) for j in j_values)]
    fig, ax = plt.subplots(figsize=(5, 4))
    for p in pts:
        c = p.ensemble.C
        sel = c.times > 0 if loglog else slice(None)
        line, = ax.plot(c.times[sel], c.values[sel], lw=1, label=f"J={p.j:g}, γ={p.gamma:g}")
        if jt_lines:
            t = c.times[sel]
            ax.plot(t, np.clip(p.j * t, None, 1.0), ":", color=line.get_color(), lw=1)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_ylim(bottom=1e-6)
    ax.set_xlabel("t")
    ax.set_ylabel("C(t)")
    ax.set_title(f"n={n}")
    return _finish(fig, ax, Path(path))


def render_preset(preset: str, scan: ScanResult, fits: dict[str, FitResult | None], outdir) -> list[Path]:
    """Write the PNGs that belong to a figure preset; returns their paths.

    ``fits`` holds the fits of the reference group (largest lattice).
    """
    out = Path(outdir)
    if preset == "fig1":
        return [
            plot_timescale(scan, out / "fig1.png", fits),
            plot_curves(scan, out / "fig1_inset.png", j_values=[2e-3, 5e-3, 1e-2, 2e-2, 3e-2]),
        ]
    if preset == "fig2":
        return [plot_saturation(scan, out / "fig2.png", exp_fit=fits.get("cinf_exponential"))]
    if preset == "fig3":
        return [plot_curves(scan, out / "fig3.png", loglog=True, jt_lines=True)]
    if preset == "fig4":
        return [plot_saturation(scan, out / "fig4.png", linear_guide=True)]
    return [
        plot_timescale(scan, out / "timescale.png", fits),
        plot_saturation(scan, out / "saturation.png", exp_fit=fits.get("cinf_exponential")),
        plot_curves(scan, out / "curves.png"),
    ]
