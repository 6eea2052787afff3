"""Command-line interface for spectral scans and trajectory ensembles.

The entry point is :func:`main`, installed as the ``trispin`` console
script.  Every subcommand reads a YAML configuration file, writes CSV
files with a provenance header into an output directory, and returns a
process exit code:

=======  ======================================================
 code     meaning
=======  ======================================================
 0        success
 2        configuration or value error (bad inputs)
 3        numerical check failure (degenerate or complex leading
          eigenvalue, structural checks)
=======  ======================================================

Outputs are deterministic: rerunning a subcommand with the same
configuration (including ``master_seed``) produces byte-identical
files, independent of the number of worker processes.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .spin_algebra import CONVENTIONS, ModelParams
from .spectral import (
    NumericalCheckError,
    activity_hf,
    dark_subspace,
    theta_scan,
)
from .trajectories import (
    empirical_ft,
    ensemble_stats,
    net_activity,
    sample_ensemble,
)

__all__ = [
    "ConfigError",
    "ScanSettings",
    "EnsembleSettings",
    "RunConfig",
    "PROFILES",
    "load_config",
    "run",
    "main",
]


class ConfigError(ValueError):
    """Raised when a configuration file is malformed or incomplete."""


#: Named parameter bundles supplying ensemble defaults.  Explicit keys in
#: the configuration file override profile values.
PROFILES = {
    "fast": {"n_trajectories": 400, "n_jumps": 1000},
    "paper": {"n_trajectories": 2000, "n_jumps": 10000},
}

_TOP_KEYS = ("model", "scan", "ensemble", "output", "profile")
_MODEL_KEYS = ("alpha", "b_field", "gamma_coll", "gamma_single", "nbar", "convention")
_SCAN_KEYS = ("s_min", "s_max", "n_points")
_ENSEMBLE_KEYS = ("n_trajectories", "stop", "master_seed", "burn_in_fraction")
_STOP_KEYS = ("t_max", "n_jumps")
_OUTPUT_KEYS = ("directory",)

#: Number of example trajectories whose full event lists are exported.
_N_EVENT_RECORDS = 3


@dataclass(frozen=True)
class ScanSettings:
    """Grid for the tilted-generator scan.

    Attributes
    ----------
    s_min, s_max : float
        Endpoints of the counting-field interval.
    n_points : int
        Number of evenly spaced grid points (at least 3).
    """

    s_min: float = -1.0
    s_max: float = 1.0
    n_points: int = 201

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ConfigError("scan.s_min must be smaller than scan.s_max")
        if self.n_points < 3:
            raise ConfigError("scan.n_points must be at least 3")

    def grid(self):
        """Return the scan grid as an array of floats."""
        return np.linspace(self.s_min, self.s_max, self.n_points)


@dataclass(frozen=True)
class EnsembleSettings:
    """Stochastic-ensemble settings.

    Attributes
    ----------
    n_trajectories : int
        Number of trajectories to sample.
    stop : dict
        Stopping rule with exactly one of ``t_max`` or ``n_jumps``.
    master_seed : int
        Root seed for the counter-based generator.  Required; there is
        no wall-clock fallback, so runs are always reproducible.
    burn_in_fraction : float
        Initial fraction of each trajectory discarded from activity
        estimates.
    """

    n_trajectories: int
    stop: dict
    master_seed: int
    burn_in_fraction: float = 0.1

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("ensemble.n_trajectories must be at least 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigError("ensemble.burn_in_fraction must lie in [0, 1)")
        if not isinstance(self.stop, dict) or len(self.stop) != 1:
            raise ConfigError(
                "ensemble.stop must contain exactly one of 't_max' or 'n_jumps'"
            )


@dataclass(frozen=True)
class RunConfig:
    """Complete validated configuration for one CLI invocation."""

    model: ModelParams
    scan: ScanSettings
    ensemble: EnsembleSettings
    output_dir: Path
    profile: str | None = None

    def config_hash(self):
        """Return a hex digest identifying the scientific inputs.

        The hash covers the model, scan, and ensemble sections plus the
        profile name; it deliberately excludes the output directory and
        the worker count, which do not affect results.
        """
        payload = {
            "model": dataclasses.asdict(self.model),
            "scan": dataclasses.asdict(self.scan),
            "ensemble": dataclasses.asdict(self.ensemble),
            "profile": self.profile,
        }
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _check_keys(section, mapping, allowed):
    """Raise :class:`ConfigError` naming any unknown key in ``mapping``."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    for key in mapping:
        if key not in allowed:
            dotted = f"{section}.{key}" if section else str(key)
            raise ConfigError(f"unknown configuration key '{dotted}'")


def load_config(path, profile=None, seed=None, output_dir=None):
    """Read and validate a YAML configuration file.

    Parameters
    ----------
    path : str or Path
        Configuration file location.
    profile : str, optional
        Profile name overriding the file's ``profile`` entry.
    seed : int, optional
        Master seed overriding ``ensemble.master_seed``.
    output_dir : str, optional
        Output directory overriding ``output.directory``.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        If the file has unknown keys, missing required entries, or
        values outside their allowed ranges.
    """
    with open(path, "r") as handle:
        raw = yaml.safe_load(handle)
    if raw is None:
        raw = {}
    _check_keys("", raw, _TOP_KEYS)

    profile_name = profile if profile is not None else raw.get("profile")
    if profile_name is not None and profile_name not in PROFILES:
        known = ", ".join(sorted(PROFILES))
        raise ConfigError(f"unknown profile '{profile_name}' (choose from {known})")
    defaults = PROFILES[profile_name] if profile_name else {}

    model_raw = raw.get("model", {})
    _check_keys("model", model_raw, _MODEL_KEYS)
    try:
        model = ModelParams(**model_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model section: {exc}") from exc

    scan_raw = raw.get("scan", {})
    _check_keys("scan", scan_raw, _SCAN_KEYS)
    scan = ScanSettings(
        s_min=float(scan_raw.get("s_min", -1.0)),
        s_max=float(scan_raw.get("s_max", 1.0)),
        n_points=int(scan_raw.get("n_points", 201)),
    )

    ens_raw = dict(raw.get("ensemble", {}))
    _check_keys("ensemble", ens_raw, _ENSEMBLE_KEYS)
    if seed is not None:
        ens_raw["master_seed"] = seed
    if "master_seed" not in ens_raw:
        raise ConfigError(
            "ensemble.master_seed is required (no wall-clock seeding)"
        )
    stop_raw = ens_raw.get("stop")
    if stop_raw is None:
        if "n_jumps" in defaults:
            stop_raw = {"n_jumps": defaults["n_jumps"]}
        else:
            raise ConfigError(
                "ensemble.stop must contain exactly one of 't_max' or 'n_jumps'"
            )
    _check_keys("ensemble.stop", stop_raw, _STOP_KEYS)
    n_traj = ens_raw.get("n_trajectories", defaults.get("n_trajectories"))
    if n_traj is None:
        raise ConfigError("ensemble.n_trajectories is required without a profile")
    ensemble = EnsembleSettings(
        n_trajectories=int(n_traj),
        stop={k: v for k, v in stop_raw.items()},
        master_seed=int(ens_raw["master_seed"]),
        burn_in_fraction=float(ens_raw.get("burn_in_fraction", 0.1)),
    )

    out_raw = raw.get("output", {})
    _check_keys("output", out_raw, _OUTPUT_KEYS)
    directory = output_dir if output_dir is not None else out_raw.get("directory", "out")

    return RunConfig(
        model=model,
        scan=scan,
        ensemble=ensemble,
        output_dir=Path(directory),
        profile=profile_name,
    )


def _fmt(value):
    """Format one CSV cell deterministically."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _header_lines(config, subcommand, extra=None):
    """Provenance header written at the top of every CSV file."""
    lines = [
        f"# trispin {__version__}",
        f"# subcommand: {subcommand}",
        f"# config_hash: {config.config_hash()}",
        f"# master_seed: {config.ensemble.master_seed}",
        f"# convention: {config.model.convention}",
        f"# profile: {config.profile if config.profile else 'none'}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {_fmt(value)}")
    return lines


def _write_csv(path, config, subcommand, columns, rows, extra=None):
    """Write one CSV file with provenance header, returning its path."""
    lines = _header_lines(config, subcommand, extra)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _run_spectrum(config, workers):
    scan = theta_scan(config.model, config.scan.grid())
    _write_csv(
        config.output_dir / "scan.csv",
        config,
        "spectrum",
        ("s", "theta", "activity"),
        zip(scan.s_values, scan.theta, scan.activity),
    )
    _write_csv(
        config.output_dir / "kinks.csv",
        config,
        "spectrum",
        ("location", "activity_left", "activity_right", "delta_activity"),
        (
            (k.location, k.activity_left, k.activity_right, k.delta_activity)
            for k in scan.kinks
        ),
        extra={"n_kinks": len(scan.kinks)},
    )


def _run_trajectories(config, workers):
    records = sample_ensemble(
        config.model,
        config.ensemble.n_trajectories,
        config.ensemble.master_seed,
        config.ensemble.stop,
        workers=workers,
    )
    frac = config.ensemble.burn_in_fraction
    stats = ensemble_stats(records, burn_in_fraction=frac)
    rows = []
    for rec in records:
        rows.append(
            (
                rec.index,
                rec.n_events,
                int(rec.weights.sum()),
                rec.total_time,
                rec.dark_trapped,
                net_activity(rec, burn_in=frac * rec.total_time),
            )
        )
    _write_csv(
        config.output_dir / "activities.csv",
        config,
        "trajectories",
        ("index", "n_events", "net_count", "total_time", "dark_trapped", "activity"),
        rows,
    )
    _write_csv(
        config.output_dir / "histogram.csv",
        config,
        "trajectories",
        ("bin_left", "bin_right", "count"),
        zip(stats.bin_edges[:-1], stats.bin_edges[1:], stats.counts),
        extra={
            "mean": stats.mean,
            "std": stats.std,
            "std_error": stats.std_error,
            "zero_fraction": stats.zero_fraction,
            "bimodality_ratio": stats.bimodality_ratio,
        },
    )
    event_rows = []
    for rec in records[:_N_EVENT_RECORDS]:
        for j in range(rec.n_events):
            event_rows.append(
                (rec.index, rec.times[j], int(rec.channels[j]), int(rec.weights[j]))
            )
    _write_csv(
        config.output_dir / "events.csv",
        config,
        "trajectories",
        ("trajectory_index", "time", "channel_id", "count_weight"),
        event_rows,
    )


def _run_dark(config, workers):
    dark = dark_subspace(config.model)
    rows = []
    for v in range(dark.dimension):
        row = [v, dark.energies[v], dark.residuals[v]]
        for amp in dark.basis[:, v]:
            row.extend((amp.real, amp.imag))
        rows.append(tuple(row))
    columns = ["vector", "energy", "residual"]
    for i in range(dark.basis.shape[0]):
        columns.extend((f"c{i}_re", f"c{i}_im"))
    _write_csv(
        config.output_dir / "dark.csv",
        config,
        "dark",
        tuple(columns),
        rows,
        extra={
            "dimension": dark.dimension,
            "min_lowering_singular_value": dark.min_lowering_singular_value,
            "single_site_kernel_dimension": dark.single_site_kernel_dimension,
            "max_residual": float(np.max(dark.residuals)) if dark.dimension else 0.0,
        },
    )


def _run_ft(config, workers, window=None):
    records = sample_ensemble(
        config.model,
        config.ensemble.n_trajectories,
        config.ensemble.master_seed,
        config.ensemble.stop,
        workers=workers,
    )
    result = empirical_ft(records, window=window)
    _write_csv(
        config.output_dir / "ft.csv",
        config,
        "ft",
        ("K", "log_ratio", "predicted"),
        zip(result.k_values, result.log_ratio, result.predicted),
        extra={
            "window": result.window,
            "slope": result.slope,
            "s0": result.s0,
            "n_windows": result.n_windows,
            "n_negative_windows": result.n_negative_windows,
            "omitted": " ".join(str(k) for k in result.omitted) or "none",
        },
    )


def _run_compare(config, workers, nbar_list):
    rows = []
    for nb in nbar_list:
        pn = dataclasses.replace(config.model, nbar=float(nb))
        k0 = activity_hf(pn, 0.0)
        records = sample_ensemble(
            pn,
            config.ensemble.n_trajectories,
            config.ensemble.master_seed,
            config.ensemble.stop,
            workers=workers,
        )
        stats = ensemble_stats(
            records, burn_in_fraction=config.ensemble.burn_in_fraction
        )
        z = (stats.mean - k0) / stats.std_error if stats.std_error > 0 else np.nan
        rows.append((float(nb), k0, stats.mean, stats.std, stats.std_error, z))
    _write_csv(
        config.output_dir / "compare.csv",
        config,
        "compare",
        ("nbar", "spectral_k0", "ensemble_mean", "ensemble_std", "std_error", "z"),
        rows,
    )


def run(subcommand, config, workers=1, nbar_list=None, ft_window=None):
    """Execute one subcommand against a validated configuration.

    Parameters
    ----------
    subcommand : str
        One of ``spectrum``, ``trajectories``, ``dark``, ``ft``,
        ``compare``.
    config : RunConfig
        Validated configuration.
    workers : int
        Worker processes for ensemble sampling (the results do not
        depend on this value).
    nbar_list : sequence of float, optional
        Bath occupations for ``compare`` (default ``[0, 1, 2, 5]``).
    ft_window : float, optional
        Counting-window override for ``ft``.

    Returns
    -------
    int
        Process exit code (0, 2, or 3).
    """
    config.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        if subcommand == "spectrum":
            _run_spectrum(config, workers)
        elif subcommand == "trajectories":
            _run_trajectories(config, workers)
        elif subcommand == "dark":
            _run_dark(config, workers)
        elif subcommand == "ft":
            _run_ft(config, workers, window=ft_window)
        elif subcommand == "compare":
            if nbar_list is None:
                nbar_list = [0.0, 1.0, 2.0, 5.0]
            _run_compare(config, workers, nbar_list)
        else:
            raise ConfigError(f"unknown subcommand '{subcommand}'")
    except NumericalCheckError as exc:
        _report_error(config.output_dir, subcommand, exc)
        return 3
    except (ConfigError, ValueError) as exc:
        _report_error(config.output_dir, subcommand, exc)
        return 2
    return 0


def _report_error(output_dir, subcommand, exc):
    """Record a failure both on stderr and as ``errors.json``."""
    payload = {
        "subcommand": subcommand,
        "error_type": type(exc).__name__,
        "message": str(exc),
    }
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        (output_dir / "errors.json").write_text(json.dumps(payload, indent=2) + "\n")
    except OSError:
        pass
    print(f"trispin {subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)


def _parse_nbar_list(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid --nbar-list '{text}'") from exc
    if not values:
        raise ConfigError("--nbar-list must contain at least one value")
    return values


def main(argv=None):
    """Console entry point; returns the process exit code."""
    parser = argparse.ArgumentParser(
        prog="trispin",
        description="Spectral and trajectory analysis of a dissipative three-spin model",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
        ("spectrum", "scan the tilted generator and locate activity kinks"),
        ("trajectories", "sample a stochastic-wavefunction ensemble"),
        ("dark", "analyze the dissipation-free subspace"),
        ("ft", "test the counting fluctuation symmetry on trajectories"),
        ("compare", "cross-validate spectral and trajectory activities"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--profile",
            default=None,
            choices=sorted(PROFILES),
            help="named parameter bundle supplying ensemble defaults",
        )
        p.add_argument(
            "--seed", type=int, default=None, help="master seed override"
        )
        p.add_argument(
            "--workers",
            type=int,
            default=1,
            help="worker processes (does not affect results)",
        )
        if name == "ft":
            p.add_argument(
                "--window", type=float, default=None, help="counting window override"
            )
        if name == "compare":
            p.add_argument(
                "--nbar-list",
                default="0,1,2,5",
                help="comma-separated bath occupations",
            )
    args = parser.parse_args(argv)

    try:
        config = load_config(
            args.config,
            profile=args.profile,
            seed=args.seed,
            output_dir=args.out,
        )
        nbar_list = (
            _parse_nbar_list(args.nbar_list) if hasattr(args, "nbar_list") else None
        )
    except (ConfigError, ValueError) as exc:
        print(f"trispin: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"trispin: cannot read config: {exc}", file=sys.stderr)
        return 2

    return run(
        args.subcommand,
        config,
        workers=args.workers,
        nbar_list=nbar_list,
        ft_window=getattr(args, "window", None),
    )


if __name__ == "__main__":
    sys.exit(main())
