"""Command-line entry point: ``rtnqubit --config run.json --out results/``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, emit_config, parse_config
from .ensemble import EnsembleConfig, default_threads
from .propagator import PiecewiseDrive, det_defect, evolve_disentangled, evolve_exact, unitarity_defect
from .pulsegen import PRESETS
from .rtn import sample_trajectory
from .sweep import AxisAssignment, sequence_scan, tau_sweep, time_grid, time_sweep

log = logging.getLogger("rtnqubit")

UNITARITY_TOLERANCE = 1e-6
SIDECAR = "run.json"


def _fmt(value) -> str:
    return f"{float(value):.12g}"


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _ensemble(config: RunConfig, threads: int) -> EnsembleConfig:
    return EnsembleConfig((), config.rtn, config.n_trajectories, config.method, config.substep, threads)


def _times(config: RunConfig) -> np.ndarray:
    return time_grid(*config.time_grid)


def _run_time_sweep(config, out, threads):
    result = time_sweep(config.assignment(), _times(config), _ensemble(config, threads))
    write_csv(out / "time_sweep.csv", ["t", "fidelity", "stderr"], result.rows)


def _run_tau_sweep(config, out, threads):
    result = tau_sweep(config.assignment(), config.gate_time, config.tau_grid, _ensemble(config, threads))
    write_csv(out / "tau_sweep.csv", ["tau", "fidelity", "stderr"], result.rows)


def _run_sequence_scan(config, out, threads):
    sequences = [AxisAssignment.from_label(label) for label in config.sequences]
    scan = sequence_scan(sequences, _times(config), config.tau_grid, _ensemble(config, threads),
                         threshold=config.threshold)
    summary = []
    for outcome in scan.outcomes:
        label = outcome.assignment.label
        write_csv(out / f"time_{label}.csv", ["t", "fidelity", "stderr"], outcome.time_curve.rows)
        tau_curve = outcome.tau_curve
        write_csv(out / f"tau_{label}.csv", ["tau", "fidelity", "stderr"], tau_curve.rows)
        worst = int(np.argmin(tau_curve.fidelity))
        summary.append((label, outcome.optimum, outcome.peak_fidelity,
                        tau_curve.fidelity[worst], tau_curve.stderr[worst]))
        log.info("%s: optimum t=%.4f F=%.5f, min over tau %.5f", label, outcome.optimum,
                 outcome.peak_fidelity, tau_curve.fidelity[worst])
    write_csv(out / "sequence_scan.csv",
              ["sequence", "optimal_time", "peak_fidelity", "min_tau_fidelity", "min_tau_stderr"], summary)


def validate_unitarity(config: RunConfig) -> dict[str, dict]:
    """Both routes on one noise trajectory per pulse; defects over the time grid."""
    times = _times(config)
    if config.pulses:
        assignments = [config.assignment()]
    else:
        assignments = [AxisAssignment(x=name) for name in PRESETS]
    report = {}
    for assignment in assignments:
        noise = sample_trajectory(config.rtn, float(times[-1]) + 1.0, 0) if config.rtn.delta else None
        drive = PiecewiseDrive.from_sources(assignment.pulses(), noise, float(times[-1]), times)
        exact = evolve_exact(drive, times)
        disentangled, _ = evolve_disentangled(drive, times, config.substep)
        report[assignment.label] = {
            "times": times,
            "exact": exact,
            "disentangled": disentangled,
            "unitarity_defect": max(unitarity_defect(exact), unitarity_defect(disentangled)),
            "det_defect": max(det_defect(exact), det_defect(disentangled)),
            "route_gap": float(np.max(np.abs(exact - disentangled))),
        }
    return report


def _run_validate(config, out, threads):
    report = validate_unitarity(config)
    worst = 0.0
    for label, entry in report.items():
        u = entry["disentangled"]
        gram = np.conj(np.swapaxes(u, -1, -2)) @ u
        per_t_unitarity = np.max(np.abs(gram - np.eye(2)), axis=(1, 2))
        per_t_det = np.abs(np.linalg.det(u) - 1.0)
        per_t_gap = np.max(np.abs(u - entry["exact"]), axis=(1, 2))
        rows = zip(entry["times"], *np.abs(u).reshape(-1, 4).T, per_t_unitarity, per_t_det, per_t_gap)
        write_csv(out / f"unitarity_{label}.csv",
                  ["t", "abs_u11", "abs_u12", "abs_u21", "abs_u22", "unitarity_defect", "det_defect", "route_gap"],
                  rows)
        defect = max(entry["unitarity_defect"], entry["det_defect"], entry["route_gap"])
        worst = max(worst, defect)
        print(f"{label}: unitarity {entry['unitarity_defect']:.3e}  det {entry['det_defect']:.3e}  "
              f"route gap {entry['route_gap']:.3e}")
    print(f"max defect {worst:.3e} (tolerance {UNITARITY_TOLERANCE:g})")
    if worst > UNITARITY_TOLERANCE:
        raise RuntimeError(f"unitarity defect {worst:.3e} exceeds {UNITARITY_TOLERANCE:g}")


_RUNNERS = {
    "time-sweep": _run_time_sweep,
    "tau-sweep": _run_tau_sweep,
    "sequence-scan": _run_sequence_scan,
    "validate-unitarity": _run_validate,
}


def run(config: RunConfig, out_dir, threads: int = 1) -> int:
    """Execute ``config``, writing CSV output plus a JSON sidecar into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = {"version": __version__, "seed": config.seed, "config": emit_config(config)}
    (out / SIDECAR).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    try:
        _RUNNERS[config.experiment](config, out, threads)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="rtnqubit",
                                     description="Spin-flip fidelity of a pulsed qubit under random telegraph noise")
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", default=Path("results"), type=Path, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: available cores)")
    parser.add_argument("--seed", type=int, default=None, help="master seed, overrides the config")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        config = parse_config(args.config.read_text(), seed=args.seed)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    return run(config, args.out, threads)


if __name__ == "__main__":
    sys.exit(main())
