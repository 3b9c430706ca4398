"""Command-line front end.

Subcommands map one-to-one onto the library pipeline stages; every
command reads a config file, optionally overridden by flags, and emits
a versioned JSON (or CSV) document.  Exit codes: 0 success/pass, 2
bounded-search not-found, 3 verification or certification failure, 1
input error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys as _sys

import numpy as np

from oseledets_lab import systems as _systems
from oseledets_lab.config import RunConfig, parse_config
from oseledets_lab.errors import (
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    EstimationError,
    GroupingError,
    InputError,
)
from oseledets_lab.harness import run_full_verification
from oseledets_lab.oseledets import estimate_splitting, lyapunov_qr
from oseledets_lab.periodic import search_periodic
from oseledets_lab.pesin import pesin_check
from oseledets_lab.grassmann import direct_sum

SCHEMA = "oseledets-lab/1"

_EXIT_OK = 0
_EXIT_INPUT = 1
_EXIT_NOT_FOUND = 2
_EXIT_FAIL = 3

_DOMAIN_ERRORS = (
    DegeneracyError,
    DivergenceError,
    ConvergenceError,
    EstimationError,
    GroupingError,
)


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(config: RunConfig, text: str) -> None:
    if config.output is None:
        _sys.stdout.write(text)
    else:
        with open(config.output, "w", newline="") as fh:
            fh.write(text)


def _emit_json(config: RunConfig, command: str, result) -> None:
    payload = {"schema": SCHEMA, "command": command, "result": result}
    _emit(config, _canonical_json(payload))


def _csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _parse_point(text: str, dim: int) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"could not parse --point {text!r}: {exc}") from None
    if len(values) != dim:
        raise InputError(
            f"--point has {len(values)} coordinates, system needs {dim}"
        )
    return np.asarray(values, dtype=float)


def cmd_exponents(config: RunConfig) -> int:
    sys_ = config.system
    x0 = _systems.random_phase_point(sys_, config.seed, "reference-orbit")
    est = lyapunov_qr(sys_, x0, config.horizons.orbit)
    if config.format == "csv":
        rows = [(i, repr(v)) for i, v in enumerate(est.values)]
        _emit(config, _csv_text(["index", "exponent"], rows))
    else:
        _emit_json(config, "exponents", est.to_json_dict())
    return _EXIT_OK


def cmd_splitting(config: RunConfig, point: np.ndarray) -> int:
    sample = estimate_splitting(
        config.system, point, config.horizons.splitting, seed=config.seed
    )
    if config.format == "csv":
        rows = []
        for b, space in enumerate(sample.spaces):
            for vec in space.basis.T:
                rows.append([b] + [repr(float(v)) for v in vec])
        d = sample.spaces[0].ambient_dim
        _emit(config, _csv_text(["block"] + [f"v{i}" for i in range(d)], rows))
    else:
        _emit_json(config, "splitting", sample.to_json_dict())
    return _EXIT_OK


def cmd_periodic(config: RunConfig) -> int:
    result = search_periodic(
        config.system, config.search, seed=config.seed, threads=config.threads
    )
    if config.format == "csv":
        rows = [
            [po.period, repr(po.residual), int(po.hyperbolic)]
            + [repr(float(v)) for v in po.exponents]
            for po in result.orbits
        ]
        d = config.system.ambient_dim
        header = ["period", "residual", "hyperbolic"] + [
            f"exponent{i}" for i in range(d)
        ]
        _emit(config, _csv_text(header, rows))
    else:
        _emit_json(config, "periodic", result.to_json_dict())
    return _EXIT_OK if result.orbits else _EXIT_NOT_FOUND


def cmd_pesin(config: RunConfig, point: np.ndarray, audit: bool = False) -> int:
    sys_ = config.system
    sample = estimate_splitting(
        sys_, point, config.horizons.splitting, seed=config.seed
    )
    if sample.exponent_estimates is None:
        raise EstimationError(
            "block exponent estimates are too close to sign the splitting"
        )
    stable = [s for s, m in zip(sample.spaces, sample.exponent_estimates) if m < 0]
    unstable = [s for s, m in zip(sample.spaces, sample.exponent_estimates) if m > 0]
    if not stable or not unstable:
        raise DegeneracyError(
            "splitting has no contracting or no expanding block; "
            "nonuniform certification needs both"
        )
    report = pesin_check(
        sys_,
        point,
        direct_sum(stable),
        direct_sum(unstable),
        config.pesin,
        audit=audit,
    )
    if config.format == "csv":
        if report.audit is None:
            raise InputError("csv output for the pesin command requires --audit")
        rows = []
        m_values = report.audit["m_values"]
        n_values = report.audit["n_values"]
        a = np.asarray(report.audit["a"])
        b = np.asarray(report.audit["b"])
        c = np.asarray(report.audit["c"])
        for mi, m in enumerate(m_values):
            rows.append(["c", m, "", repr(float(c[mi]))])
            for ni, n in enumerate(n_values):
                rows.append(["a", m, n, repr(float(a[mi, ni]))])
                rows.append(["b", m, n, repr(float(b[mi, ni]))])
        _emit(config, _csv_text(["condition", "m", "n", "margin"], rows))
    else:
        _emit_json(config, "pesin", report.to_json_dict())
    return _EXIT_OK if report.passed else _EXIT_FAIL


def cmd_verify(config: RunConfig) -> int:
    report = run_full_verification(config.system, config)
    if config.format == "csv":
        if report.coverage is None:
            raise EstimationError(
                "verification produced no per-sample distances to export"
            )
        import io

        buf = io.StringIO()
        _coverage_csv(report.coverage, buf)
        _emit(config, buf.getvalue())
    else:
        _emit_json(config, "verify", report.to_json_dict())
    verdicts = report.verdicts.values()
    if any(v == "fail" for v in verdicts):
        return _EXIT_FAIL
    if any(v == "not-found" for v in verdicts):
        return _EXIT_NOT_FOUND
    return _EXIT_OK


def _coverage_csv(coverage, fh) -> None:
    d = coverage.sample_points.shape[1] if coverage.sample_points.size else 0
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(
        [f"x{i}" for i in range(d)]
        + ["base_distance", "fiber_distance", "nearest_cycle_index", "covered"]
    )
    for i in range(coverage.n_samples):
        point = [repr(float(v)) for v in coverage.sample_points[i]]
        if np.isnan(coverage.fiber_distances[i]):
            writer.writerow(point + ["", "", "", ""])
        else:
            writer.writerow(
                point
                + [
                    repr(float(coverage.base_distances[i])),
                    repr(float(coverage.fiber_distances[i])),
                    int(coverage.nearest_cycle_index[i]),
                    int(coverage.fiber_distances[i] < coverage.eta),
                ]
            )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oseledets-lab",
        description="Splitting statistics and periodic-orbit verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("exponents", "Lyapunov spectrum of a long orbit"),
        ("splitting", "splitting blocks at one point"),
        ("periodic", "bounded periodic-orbit search"),
        ("pesin", "nonuniform-hyperbolicity certificate at one point"),
        ("verify", "full approximation report"),
    ):
        cmd = sub.add_parser(name, help=help_)
        cmd.add_argument("--config", required=True, help="path to a config file")
        cmd.add_argument("--output", default=None, help="write here instead of stdout")
        cmd.add_argument("--format", default=None, choices=("json", "csv"))
        cmd.add_argument("--threads", default=None, type=int)
        cmd.add_argument("--seed", default=None, type=int)
        if name in ("splitting", "pesin"):
            cmd.add_argument(
                "--point",
                required=True,
                help="phase-space point, comma- or space-separated",
            )
        if name == "pesin":
            cmd.add_argument(
                "--audit",
                action="store_true",
                help="include every per-(m, n) margin in the report",
            )
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    updates = {}
    if args.output is not None:
        updates["output"] = args.output
    if args.format is not None:
        updates["format"] = args.format
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.seed is not None:
        updates["seed"] = args.seed
    return dataclasses.replace(config, **updates) if updates else config


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _EXIT_OK if exc.code == 0 else _EXIT_INPUT
    try:
        config = _apply_overrides(parse_config(args.config), args)
        if args.command == "exponents":
            return cmd_exponents(config)
        if args.command == "splitting":
            point = _parse_point(args.point, config.system.ambient_dim)
            return cmd_splitting(config, point)
        if args.command == "periodic":
            return cmd_periodic(config)
        if args.command == "pesin":
            point = _parse_point(args.point, config.system.ambient_dim)
            return cmd_pesin(config, point, audit=args.audit)
        if args.command == "verify":
            return cmd_verify(config)
        raise InputError(f"unknown command {args.command!r}")
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return _EXIT_INPUT
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return _EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
