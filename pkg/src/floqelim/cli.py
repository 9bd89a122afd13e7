"""Command line entry point: ``floqelim <verb> --config run.json --out results/``.

Exit status is 0 on success, 2 when the input is invalid and 3 when a
numerical check fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND_NAME
from .eliminate import (
    SubspacePartition,
    adiabatic_ratio,
    classify_regime,
    decay_fit,
    effective_stroboscopic_coupling,
    project_effective,
)
from .errors import ConfigError, NumericalError
from .experiments import (
    ExperimentConfig,
    render_intensity_map,
    run_finite_size_experiment,
    run_gauge_experiment,
    run_propagation_experiment,
    run_sweep_experiment,
    write_json,
    write_rows_csv,
)
from .floquet import Thresholds
from .model import build_hamiltonian, static_reference

log = logging.getLogger("floqelim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _base_summary(verb, cfg):
    return {
        "verb": verb,
        "version": __version__,
        "backend": BACKEND_NAME,
        "lattice": cfg.lattice.to_dict(),
        "experiment": cfg.to_dict(),
        "thresholds": cfg.thresholds.to_dict(),
    }


def _workers(cfg):
    workers = cfg.extras.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")
    return workers


def cmd_propagate(cfg, out):
    record, report = run_propagation_experiment(cfg)
    record.write_csv(out / "propagation.csv")
    return {"report": report.to_dict(), "n_samples": len(record), "dz": record.meta["dz"]}


def cmd_render(cfg, out):
    record, report = run_propagation_experiment(cfg)
    fmt = cfg.extras.get("format", "pgm")
    if fmt not in ("pgm", "svg"):
        raise ConfigError("format must be 'pgm' or 'svg'")
    image = render_intensity_map(record, out / f"intensity.{fmt}",
                                 cell_width=cfg.extras.get("cell_width", 4),
                                 cell_height=cfg.extras.get("cell_height", 8), fmt=fmt)
    return {"report": report.to_dict(), "image": image.name}


def cmd_gauge(cfg, out):
    grid = run_gauge_experiment(cfg, max_workers=_workers(cfg))
    rows = grid.rows()
    write_rows_csv(out / "gauge.csv", rows)
    return {"cells": rows, "flags": list(grid.flags), "pattern_margin": grid.pattern_margin()}


def cmd_spectrum(cfg, out):
    if "grid" not in cfg.extras:
        raise ConfigError("spectrum needs a 'grid'")
    cls = cfg.extras.get("classification")
    thresholds = None
    if cls is not None:
        if not isinstance(cls, dict) or set(cls) != {"tol_zero", "tol_pi", "w_min"}:
            raise ConfigError("classification needs exactly tol_zero, tol_pi and w_min")
        thresholds = Thresholds(**cls)
    sweep, summary = run_sweep_experiment(cfg.lattice, cfg.extras["grid"], thresholds=thresholds,
                                      max_workers=_workers(cfg))
    sweep_csv = out / "spectrum.csv"
    sweep.write_csv(sweep_csv)
    return summary


def cmd_finite_size(cfg, out):
    sizes = cfg.extras.get("sizes")
    if not isinstance(sizes, list):
        raise ConfigError("finite-size needs a 'sizes' list")
    rows = [r.to_dict() for r in run_finite_size_experiment(cfg, sizes)]
    write_rows_csv(out / "finite_size.csv", rows)
    return {"rows": rows}


def cmd_eliminate(cfg, out):
    lat = cfg.lattice
    h = static_reference(lat) if lat.is_driven else build_hamiltonian(lat, 0.0)
    kept = cfg.extras.get("kept", [1, lat.n_sites])
    if not isinstance(kept, list):
        raise ConfigError("kept must be a list of 1-based site indices")
    heff = project_effective(h, SubspacePartition.from_kept(lat.n_sites, kept))
    (out / "effective_hamiltonian.json").write_text(heff.to_json(indent=2) + "\n")
    eff = effective_stroboscopic_coupling(lat)
    summary = {
        "effective_coupling": eff,
        "adiabatic_ratio": adiabatic_ratio(lat.kappa0, eff),
        "regime": classify_regime(lat).value,
        "effective_hamiltonian": heff.to_dict(),
    }
    sizes = cfg.extras.get("decay_sizes")
    if sizes is not None:
        if not isinstance(sizes, list):
            raise ConfigError("decay_sizes must be a list")
        fit = decay_fit(lat.replace(dkappa1=0.0), sizes)
        (out / "decay_fit.json").write_text(fit.to_json(indent=2) + "\n")
        summary["decay_fit"] = fit.to_dict()
    return summary


COMMANDS = {
    "propagate": cmd_propagate,
    "render": cmd_render,
    "gauge": cmd_gauge,
    "spectrum": cmd_spectrum,
    "finite-size": cmd_finite_size,
    "eliminate": cmd_eliminate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floqelim",
                                     description="Driven waveguide lattice experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in COMMANDS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
    return parser


def run(verb: str, config_path: Path, out: Path) -> int:
    try:
        text = config_path.read_text()
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_json(text, verb)
        out.mkdir(parents=True, exist_ok=True)
        summary = _base_summary(verb, cfg)
        summary.update(COMMANDS[verb](cfg, out))
        write_json(out / "summary.json", summary)
    except (ConfigError, ZeroDivisionError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return run(args.verb, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())

