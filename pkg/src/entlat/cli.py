"""Command-line front end: ``entlat run`` and ``entlat verify``.

A run is described by a YAML file. Keys not given fall back to the chosen
preset, and every key can be overridden by a flag of the same name whose
value is parsed as YAML (``--j_values "[0.01, 0.02]"``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from entlat import __version__
from entlat.analysis import (
    FitResult,
    ergodic_window,
    fgr_window,
    fit_exponential_cinf,
    fit_power_law,
    model_decay_rates,
    save_fits,
)
from entlat.ensemble import EnsembleConfig, ScanResult, scan_j, scan_n, write_scan
from entlat.errors import ConfigurationError, EntlatError, FitError
from entlat.lattice import ModelParams
from entlat.propagator import TimeGrid

log = logging.getLogger("entlat")

_FIG1_J = [1e-3, 2e-3, 3e-3, 5e-3, 7e-3, 1e-2, 2e-2, 3e-2, 5e-2, 7e-2,
           0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0]
_FIG3_J = [m * 10.0**e for e in range(-4, 0) for m in (1, 2)]
_FIG4_J = [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 3e-2, 5e-2, 0.1, 0.2, 0.5]
_REALIZATIONS = {4: 50, 6: 50, 8: 50, 10: 50, 12: 30, 14: 20}

DEFAULTS: dict = {
    "preset": "custom",
    "n": 10,
    "rows": None,
    "cols": None,
    "gamma": 1.0,
    "delta": 0.2,
    "delta0": 1.0,
    "initial": "bell",
    "j_values": None,
    "n_realizations": 50,
    "master_seed": 0,
    "n_samples": 2000,
    "spacing": "linear",
    "t_min": 1e-2,
    "t_max": None,
    "evolution": "sector",
    "propagator": "auto",
    "krylov_order": 30,
    "check_stability": True,
    "tc_mode": "averaged",
    "fit_windows": {},
    "out": "entlat-out",
    "workers": None,
    "figures": True,
    "archive": True,
}

PRESETS: dict[str, dict] = {
    "fig1": {"n": [4, 6, 8, 10], "gamma": 1.0, "initial": "bell", "j_values": _FIG1_J,
             "n_realizations": dict(_REALIZATIONS)},
    "fig2": {"n": 10, "gamma": 1.0, "initial": "bell", "j_values": _FIG1_J, "n_realizations": 50},
    "fig3": {"n": 10, "gamma": 1.0, "initial": "separable", "j_values": _FIG3_J, "n_realizations": 50,
             "spacing": "log"},
    "fig4": {"n": [4, 6, 8, 10], "gamma": 0.0, "initial": "separable", "j_values": _FIG4_J,
             "n_realizations": dict(_REALIZATIONS)},
    "custom": {},
}

FIT_NAMES = ("tc_fgr", "tc_ergodic", "cinf_exponential", "perturbative")


class ConfigError(ConfigurationError):
    """Configuration problem tied to a key (and hence a line) of the config file."""

    def __init__(self, key: str | None, message: str):
        super().__init__(message)
        self.key = key
        self.message = message


@dataclass
class RunConfig:
    preset: str
    n_values: list[int]
    gammas: list[float]
    j_values: list[float]
    realizations: dict[int, int]
    ensemble: EnsembleConfig
    tc_mode: str
    fit_windows: dict[str, tuple[float, float]]
    out: Path
    workers: int | None
    figures: bool
    archive: bool
    raw: dict = field(default_factory=dict)


# --- parsing -------------------------------------------------------------------------


def _key_lines(path: Path, text: str) -> tuple[dict, dict[str, int]]:
    """Parse YAML and remember the line of every top-level key (1-based)."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        reason = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(None, f"{path}:{line}: invalid YAML: {reason}") from exc
    if root is None:
        raise ConfigError(None, f"{path}:1: empty configuration")
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(None, f"{path}:{root.start_mark.line + 1}: configuration must be a mapping")
    data = yaml.safe_load(text)
    lines = {k.value: k.start_mark.line + 1 for k, _ in root.value}
    if isinstance(data.get("run_config"), dict):
        # a manifest from an earlier run: re-run its configuration
        node = next(v for k, v in root.value if k.value == "run_config")
        lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
        data = data["run_config"]
    if not data:
        raise ConfigError(None, f"{path}:1: empty configuration")
    return data, lines


def _as_list(value, kind, key: str) -> list:
    items = value if isinstance(value, list) else [value]
    try:
        out = [kind(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(key, f"{key} must be a {kind.__name__} or a list of them") from None
    if not out:
        raise ConfigError(key, f"{key} must not be empty")
    return out


def _number(raw: dict, key: str, kind=float, minimum=None, allow_none=False):
    value = raw[key]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"{key} must be a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(key, f"{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(key, f"{key} must be >= {minimum}, got {value!r}")
    return kind(value)


def _choice(raw: dict, key: str, options) -> str:
    if raw[key] not in options:
        raise ConfigError(key, f"{key} must be one of {', '.join(options)}; got {raw[key]!r}")
    return raw[key]


def _flag(raw: dict, key: str) -> bool:
    if not isinstance(raw[key], bool):
        raise ConfigError(key, f"{key} must be true or false")
    return raw[key]


def build_run_config(raw_in: dict) -> RunConfig:
    """Merge preset defaults with ``raw_in`` and validate everything."""
    unknown = sorted(set(raw_in) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key {unknown[0]!r}")
    preset = raw_in.get("preset", "custom")
    if preset not in PRESETS:
        raise ConfigError("preset", f"preset must be one of {', '.join(PRESETS)}; got {preset!r}")
    raw = {**DEFAULTS, **PRESETS[preset], **raw_in}

    n_values = _as_list(raw["n"], int, "n")
    if any(n < 2 or n % 2 for n in n_values):
        raise ConfigError("n", "every n must be even and >= 2")
    if n_values != sorted(set(n_values)):
        raise ConfigError("n", "n values must be distinct and ascending")
    gammas = _as_list(raw["gamma"], float, "gamma")
    if raw["j_values"] is None:
        raise ConfigError("j_values", "j_values is required for a custom run")
    j_values = _as_list(raw["j_values"], float, "j_values")
    if any(j <= 0 for j in j_values) or j_values != sorted(j_values):
        raise ConfigError("j_values", "j_values must be positive and ascending")

    nr = raw["n_realizations"]
    if isinstance(nr, dict):
        try:
            realizations = {int(k): int(v) for k, v in nr.items()}
        except (TypeError, ValueError):
            raise ConfigError("n_realizations", "n_realizations map must be n: count") from None
        missing = [n for n in n_values if n not in realizations]
        if missing:
            raise ConfigError("n_realizations", f"no realization count for n={missing[0]}")
        realizations = {n: realizations[n] for n in n_values}
    else:
        count = _number(raw, "n_realizations", int, minimum=1)
        realizations = {n: count for n in n_values}
    if any(v < 1 for v in realizations.values()):
        raise ConfigError("n_realizations", "realization counts must be >= 1")

    for key in ("rows", "cols"):
        if raw[key] is not None and len(n_values) > 1:
            raise ConfigError(key, f"{key} can only be set for a single n")
    try:
        params = ModelParams(
            n=n_values[0],
            gamma=gammas[0],
            delta=_number(raw, "delta", minimum=0.0),
            j_strength=0.0,
            delta0=_number(raw, "delta0"),
            rows=_number(raw, "rows", int, 1, allow_none=True),
            cols=_number(raw, "cols", int, 1, allow_none=True),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("n", str(exc)) from None

    spacing = _choice(raw, "spacing", ("linear", "log"))
    n_samples = _number(raw, "n_samples", int, minimum=3)
    t_min = _number(raw, "t_min", minimum=0.0)
    t_max = _number(raw, "t_max", minimum=0.0, allow_none=True)
    grid = None
    if t_max is not None:
        try:
            grid = (TimeGrid.logarithmic(t_min, t_max, n_samples) if spacing == "log"
                    else TimeGrid.uniform(t_max, n_samples))
        except ConfigurationError as exc:
            raise ConfigError("t_max", str(exc)) from None
    ensemble = EnsembleConfig(
        params=params,
        initial=_choice(raw, "initial", ("bell", "separable")),
        n_realizations=realizations[n_values[0]],
        master_seed=_number(raw, "master_seed", int, minimum=0),
        grid=grid,
        n_samples=n_samples,
        spacing=spacing,
        t_min=t_min,
        evolution=_choice(raw, "evolution", ("sector", "full")),
        propagator=_choice(raw, "propagator", ("auto", "exact", "krylov")),
        check_stability=_flag(raw, "check_stability"),
        krylov_order=_number(raw, "krylov_order", int, minimum=4),
    )

    windows = raw["fit_windows"] or {}
    if not isinstance(windows, dict):
        raise ConfigError("fit_windows", "fit_windows must be a mapping of fit name to [lo, hi]")
    fit_windows = {}
    for name, win in windows.items():
        if name not in FIT_NAMES:
            raise ConfigError("fit_windows", f"unknown fit {name!r}; expected one of {', '.join(FIT_NAMES)}")
        if win in (None, "auto"):
            continue
        if not (isinstance(win, list) and len(win) == 2 and all(isinstance(x, (int, float)) for x in win)
                and 0 < win[0] < win[1]):
            raise ConfigError("fit_windows", f"window for {name} must be [lo, hi] with 0 < lo < hi")
        fit_windows[name] = (float(win[0]), float(win[1]))

    workers = _number(raw, "workers", int, minimum=1, allow_none=True)
    if not isinstance(raw["out"], str) or not raw["out"]:
        raise ConfigError("out", "out must be a directory path")
    out = Path(raw["out"])
    if out.exists() and not out.is_dir():
        raise ConfigError("out", f"output path {out} exists and is not a directory")

    return RunConfig(
        preset=preset,
        n_values=n_values,
        gammas=gammas,
        j_values=j_values,
        realizations=realizations,
        ensemble=ensemble,
        tc_mode=_choice(raw, "tc_mode", ("averaged", "per_realization")),
        fit_windows=fit_windows,
        out=out,
        workers=workers,
        figures=_flag(raw, "figures"),
        archive=_flag(raw, "archive"),
        raw=raw,
    )


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read, merge and validate; errors carry ``file:LINE:`` anchors."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(None, f"{path}:1: cannot read configuration: {exc.strerror}") from None
    data, lines = _key_lines(path, text)
    merged = {**data, **(overrides or {})}
    try:
        return build_run_config(merged)
    except ConfigError as exc:
        if exc.key in (overrides or {}):
            raise ConfigError(exc.key, f"--{exc.key}: {exc.message}") from None
        line = lines.get(exc.key, 1)
        raise ConfigError(exc.key, f"{path}:{line}: {exc.message}") from None


def resolved_dict(cfg: RunConfig) -> dict:
    """The fully merged configuration, suitable for writing back as a config file."""
    raw = dict(cfg.raw)
    raw["n"] = cfg.n_values if len(cfg.n_values) > 1 else cfg.n_values[0]
    raw["gamma"] = cfg.gammas if len(cfg.gammas) > 1 else cfg.gammas[0]
    raw["j_values"] = cfg.j_values
    raw["n_realizations"] = {str(k): v for k, v in cfg.realizations.items()}
    raw["fit_windows"] = {k: list(v) for k, v in cfg.fit_windows.items()}
    raw["out"] = str(cfg.out)
    return raw


# --- execution -----------------------------------------------------------------------


def execute(cfg: RunConfig) -> ScanResult:
    points, wall = [], 0.0
    for gamma in cfg.gammas:
        base = cfg.ensemble.with_params(gamma=gamma)
        if len(cfg.n_values) == 1:
            scan = scan_j(base, cfg.j_values, cfg.workers, cfg.tc_mode)
        else:
            scan = scan_n(base, cfg.n_values, cfg.j_values, cfg.workers, cfg.realizations, cfg.tc_mode)
        points.extend(scan.points)
        wall += scan.wall_time
    return ScanResult("n" if len(cfg.n_values) > 1 else "J", points, wall)


def _try_fit(fn, *args, **kw) -> tuple[FitResult | None, str | None]:
    try:
        return fn(*args, **kw), None
    except FitError as exc:
        return None, str(exc)


def compute_fits(cfg: RunConfig, scan: ScanResult) -> tuple[dict[str, dict], dict, list[str]]:
    """Per (n, gamma) group: t_c power laws, exponential C_inf fit, perturbative slope."""
    groups: dict[str, dict] = {}
    estimates: dict[str, dict] = {}
    skipped: list[str] = []
    for n in cfg.n_values:
        for gamma in cfg.gammas:
            sub = scan.select(n=n, gamma=gamma)
            if not sub.points:
                continue
            label = f"n={n},gamma={gamma:g}"
            est = model_decay_rates(cfg.ensemble.params.replace(n=n))
            estimates[label] = {"J_p": est.j_p, "J_E": est.j_e}
            j = sub.column("j")
            tc = [p.t_c for p in sub.points]
            c = sub.column("c_inf")
            win = cfg.fit_windows
            pert_y = 1.0 - c if cfg.ensemble.initial == "bell" else c
            fits = {}
            for name, fn, args, window, kw in (
                ("tc_fgr", fit_power_law, (j, tc), win.get("tc_fgr", fgr_window(est)), {}),
                ("tc_ergodic", fit_power_law, (j, tc), win.get("tc_ergodic", ergodic_window(est, j.max())),
                 {"min_points": 3}),
                ("cinf_exponential", fit_exponential_cinf, (j, c),
                 win.get("cinf_exponential", (est.j_p, est.j_e)), {}),
                ("perturbative", fit_power_law, (j, pert_y), win.get("perturbative", (j.min(), est.j_p)),
                 {"min_points": 3}),
            ):
                fits[name], why = _try_fit(fn, *args, window=window, **kw)
                if why:
                    skipped.append(f"{label}:{name}: {why}")
            groups[label] = fits
    return groups, estimates, skipped


def run(cfg: RunConfig) -> Path:
    scan = execute(cfg)
    out = write_scan(
        scan,
        cfg.out,
        manifest_extra={"preset": cfg.preset, "run_config": resolved_dict(cfg), "entlat": __version__},
        archive=cfg.archive,
    )
    groups, estimates, skipped = compute_fits(cfg, scan)
    flat = {f"{label}:{name}": fit for label, fits in groups.items() for name, fit in fits.items()}
    save_fits(out / "fits.json", flat, extra={"regime_estimates": estimates, "skipped": skipped})
    if cfg.figures:
        from entlat.plotting import render_preset

        reference = groups.get(f"n={cfg.n_values[-1]},gamma={cfg.gammas[0]:g}", {})
        for path in render_preset(cfg.preset, scan, reference, out):
            log.info("wrote %s", path)
    return out


# --- argument handling ---------------------------------------------------------------


def _yaml_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entlat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"entlat {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a preset or custom scan from a YAML config")
    run_p.add_argument("--config", required=True, help="YAML file (a previous manifest.json also works)")
    run_p.add_argument("--seed", dest="master_seed", type=_yaml_value, help="alias for --master_seed")
    for key in DEFAULTS:
        if key == "master_seed":
            run_p.add_argument("--master_seed", dest="master_seed", type=_yaml_value, help=argparse.SUPPRESS)
            continue
        run_p.add_argument(f"--{key}", dest=key, type=_yaml_value, metavar="VALUE",
                           help=f"override '{key}' (YAML syntax)")

    ver = sub.add_parser("verify", help="run the oracle self-test suite")
    ver.add_argument("--self-test", action="store_true", help="accepted for compatibility; always on")
    ver.add_argument("--n-cap", type=int, default=10, help="largest lattice used by the checks")
    return parser


def _verify(n_cap: int) -> int:
    from entlat.selftest import run_checks

    results = run_checks(n_cap=n_cap)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} [{r.seconds:.2f}s]")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} oracles passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return _verify(args.n_cap)

    overrides = {k: getattr(args, k) for k in DEFAULTS if getattr(args, k, None) is not None}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"entlat: config error: {exc.message}", file=sys.stderr)
        return 2
    try:
        out = run(cfg)
    except EntlatError as exc:
        print(f"entlat: run failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"entlat: run failed: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
