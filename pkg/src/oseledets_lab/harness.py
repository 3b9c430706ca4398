"""End-to-end check that a periodic orbit shadows a long orbit's statistics.

The pipeline builds reference statistics from a long sampled orbit,
searches for hyperbolic periodic orbits, picks the best structural
match, and compares: the full Lyapunov spectra, the mean pairwise
block distances, the independence numbers, and — pointwise over a
Pesin-certified sample — how closely the cycle's invariant splitting
approximates the estimated splitting field.  A trigonometric-moment
discrepancy between the orbit and cycle averages is reported alongside
as a weak-convergence proxy.

Outcomes are three-valued.  A bounded search that finds no structurally
matching hyperbolic orbit reports "not-found" — approximation claims
are asymptotic in the period, so a bounded miss refutes nothing.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from oseledets_lab import _kernels as _k
from oseledets_lab import systems as _systems
from oseledets_lab.errors import (
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    EstimationError,
    GroupingError,
    InputError,
)
from oseledets_lab.grassmann import direct_sum, subspace_distance
from oseledets_lab.oseledets import (
    MeasureStats,
    cluster_exponents,
    lyapunov_qr,
    splitting_field,
    stats_from_samples,
)
from oseledets_lab.periodic import (
    PeriodicOrbit,
    cycle_splittings,
    orbit_stats,
    search_periodic,
)
from oseledets_lab.pesin import PesinParams, pesin_check

__all__ = [
    "GapReport",
    "CoverageReport",
    "ApproximationReport",
    "verify_exponents",
    "verify_mean_distance",
    "verify_independence",
    "verify_splitting_approx",
    "weak_star_discrepancy",
    "run_full_verification",
]

_VERDICTS = ("pass", "fail", "not-found")
_CHECKED_QUANTITIES = ("exponents", "mean_distance", "independence", "splitting")
_GAP_QUANTUM = 1e-10
_STAGE_ERRORS = (
    InputError,
    DegeneracyError,
    DivergenceError,
    ConvergenceError,
    EstimationError,
    GroupingError,
)


@dataclass(slots=True)
class GapReport:
    """One scalar/entrywise comparison between reference and cycle statistics."""

    quantity: str
    gaps: np.ndarray | None
    max_gap: float | None
    epsilon: float
    verdict: str
    note: str = ""

    def __post_init__(self):
        if self.verdict not in _VERDICTS:
            raise InputError(f"verdict must be one of {_VERDICTS}")
        if self.max_gap is not None and not self.max_gap >= 0:
            raise InputError("gaps must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "gaps": None if self.gaps is None else np.asarray(self.gaps).tolist(),
            "max_gap": self.max_gap,
            "epsilon": self.epsilon,
            "verdict": self.verdict,
            "note": self.note,
        }


def _structural_note(reference: MeasureStats, po: PeriodicOrbit) -> str:
    """Empty string when block structures agree, else a mismatch description."""
    d_ref = int(sum(reference.block_dims))
    if d_ref != po.ambient_dim:
        return f"ambient dimension mismatch: reference {d_ref}, orbit {po.ambient_dim}"
    if tuple(reference.block_dims) != tuple(po.splitting.dims):
        return (
            f"block structure mismatch: reference {tuple(reference.block_dims)}, "
            f"orbit {tuple(po.splitting.dims)}"
        )
    return ""


def _mismatch(quantity: str, epsilon: float, note: str) -> GapReport:
    return GapReport(
        quantity=quantity,
        gaps=None,
        max_gap=None,
        epsilon=epsilon,
        verdict="not-found",
        note=note,
    )


def verify_exponents(
    reference: MeasureStats, po: PeriodicOrbit, epsilon: float
) -> GapReport:
    """Compare full sorted Lyapunov spectra (with multiplicity) per index."""
    note = _structural_note(reference, po)
    if note:
        return _mismatch("exponents", epsilon, note)
    gaps = np.abs(np.asarray(reference.exponents.values) - np.asarray(po.exponents))
    max_gap = float(gaps.max())
    return GapReport(
        quantity="exponents",
        gaps=gaps,
        max_gap=max_gap,
        epsilon=epsilon,
        verdict="pass" if max_gap < epsilon else "fail",
    )


def verify_mean_distance(
    reference: MeasureStats, po: PeriodicOrbit, epsilon: float
) -> GapReport:
    """Compare mean pairwise block-distance matrices entrywise."""
    note = _structural_note(reference, po)
    if note:
        return _mismatch("mean_distance", epsilon, note)
    stats_z = orbit_stats(po)
    gaps = np.abs(reference.mean_distance - stats_z.mean_distance)
    max_gap = float(gaps.max())
    return GapReport(
        quantity="mean_distance",
        gaps=gaps,
        max_gap=max_gap,
        epsilon=epsilon,
        verdict="pass" if max_gap < epsilon else "fail",
    )


def verify_independence(
    reference: MeasureStats, po: PeriodicOrbit, epsilon: float
) -> GapReport:
    """Compare mean independence numbers."""
    note = _structural_note(reference, po)
    if note:
        return _mismatch("independence", epsilon, note)
    stats_z = orbit_stats(po)
    gap = abs(reference.independence - stats_z.independence)
    return GapReport(
        quantity="independence",
        gaps=np.array([gap]),
        max_gap=float(gap),
        epsilon=epsilon,
        verdict="pass" if gap < epsilon else "fail",
    )


@dataclass(slots=True)
class CoverageReport:
    """Pointwise splitting-approximation outcome over a sample set.

    For each sample point the splitting field is compared against the
    cycle's splitting at its best cycle point; ``fiber_distances`` holds
    the minimized blockwise subspace distance, ``base_distances`` the
    phase-space distance to that same cycle point (reported for
    plotting, not part of the pass criterion).
    """

    coverage: float
    eta: float
    n_samples: int
    n_valid: int
    n_failed: int
    verdict: str
    sample_points: np.ndarray
    fiber_distances: np.ndarray
    base_distances: np.ndarray
    nearest_cycle_index: np.ndarray
    note: str = ""

    def __post_init__(self):
        if self.verdict not in _VERDICTS:
            raise InputError(f"verdict must be one of {_VERDICTS}")
        if not 0.0 <= self.coverage <= 1.0:
            raise InputError("coverage must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "eta": self.eta,
            "n_samples": self.n_samples,
            "n_valid": self.n_valid,
            "n_failed": self.n_failed,
            "verdict": self.verdict,
            "note": self.note,
            "fiber_distances": self.fiber_distances.tolist(),
            "base_distances": self.base_distances.tolist(),
            "nearest_cycle_index": self.nearest_cycle_index.tolist(),
        }

    def to_csv(self, path) -> None:
        """Per-sample distances, one row per sampled point."""
        d = self.sample_points.shape[1] if self.sample_points.size else 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"x{i}" for i in range(d)]
                + ["base_distance", "fiber_distance", "nearest_cycle_index", "covered"]
            )
            for i in range(self.n_samples):
                point = [repr(float(v)) for v in self.sample_points[i]]
                if np.isnan(self.fiber_distances[i]):
                    writer.writerow(point + ["", "", "", ""])
                else:
                    writer.writerow(
                        point
                        + [
                            repr(float(self.base_distances[i])),
                            repr(float(self.fiber_distances[i])),
                            int(self.nearest_cycle_index[i]),
                            int(self.fiber_distances[i] < self.eta),
                        ]
                    )


def _empty_coverage(eta: float, verdict: str, note: str) -> CoverageReport:
    return CoverageReport(
        coverage=0.0,
        eta=eta,
        n_samples=0,
        n_valid=0,
        n_failed=0,
        verdict=verdict,
        sample_points=np.empty((0, 0)),
        fiber_distances=np.empty(0),
        base_distances=np.empty(0),
        nearest_cycle_index=np.empty(0, dtype=int),
        note=note,
    )


def verify_splitting_approx(
    sys: _systems.SystemSpec,
    sample_points,
    po: PeriodicOrbit,
    eta: float,
    samples=None,
    splitting_horizon: int = 50,
    seed: int = 0,
    threads: int = 1,
) -> CoverageReport:
    """Fraction of sample points whose splitting some cycle point approximates.

    Each sampled point's splitting (estimated here unless precomputed
    ``samples`` are handed in) is compared against the cycle splitting
    at every cycle point; the match quality is the blockwise subspace
    distance, maximized over blocks and minimized over cycle points.
    Coverage is the fraction of valid samples with distance below
    ``eta``; the check passes when coverage exceeds 1 - eta.  Samples
    whose splitting estimation fails are excluded from the denominator
    and counted in ``n_failed``.
    """
    if not eta > 0:
        raise InputError("eta must be positive")
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.size == 0:
        return _empty_coverage(eta, "not-found", "no sample points supplied")
    count = pts.shape[0]
    dims = tuple(po.splitting.dims)
    cycle = cycle_splittings(po)
    if samples is None:
        samples = [None] * count

        def estimate(i: int) -> None:
            _, got, _ = splitting_field(
                sys, pts[i], 1, splitting_horizon, dims, seed=seed
            )
            samples[i] = got[0]

        if threads == 1 or count == 1:
            for i in range(count):
                estimate(i)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(estimate, range(count)))
    else:
        samples = list(samples)
        if len(samples) != count:
            raise InputError("precomputed samples must align with sample_points")
        for sample in samples:
            if sample is not None and tuple(sample.dims) != dims:
                return _empty_coverage(
                    eta,
                    "not-found",
                    f"block structure mismatch: samples {tuple(sample.dims)}, "
                    f"orbit {dims}",
                )
    fiber = np.full(count, np.nan)
    base = np.full(count, np.nan)
    nearest = np.full(count, -1, dtype=int)
    for i, sample in enumerate(samples):
        if sample is None:
            continue
        best = np.inf
        best_j = -1
        for j, zed in enumerate(cycle):
            dist = max(
                subspace_distance(a, b) for a, b in zip(sample.spaces, zed.spaces)
            )
            if dist < best:
                best = dist
                best_j = j
        fiber[i] = best
        nearest[i] = best_j
        base[i] = _systems.phase_distance(sys, pts[i], po.points[best_j])
    valid = int(np.sum(~np.isnan(fiber)))
    n_failed = count - valid
    if valid == 0:
        report = _empty_coverage(eta, "not-found", "all splitting estimates failed")
        report.n_samples = count
        report.n_failed = n_failed
        report.sample_points = pts
        report.fiber_distances = fiber
        report.base_distances = base
        report.nearest_cycle_index = nearest
        return report
    covered = int(np.sum(fiber[~np.isnan(fiber)] < eta))
    coverage = covered / valid
    return CoverageReport(
        coverage=coverage,
        eta=eta,
        n_samples=count,
        n_valid=valid,
        n_failed=n_failed,
        verdict="pass" if coverage > 1.0 - eta else "fail",
        sample_points=pts,
        fiber_distances=fiber,
        base_distances=base,
        nearest_cycle_index=nearest,
    )


def weak_star_discrepancy(orbit_points, po: PeriodicOrbit) -> float:
    """Worst trigonometric-moment gap between orbit and cycle averages.

    The test family is the real and imaginary parts of x -> e^{2 pi i
    (k . x)} over all nonzero integer k with max-norm at most 2 — a
    fixed, separating family of smooth observables, so a small value is
    evidence (not proof) of weak closeness of the two empirical
    measures.
    """
    pts = np.asarray(orbit_points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InputError("orbit_points must be a nonempty (n, d) array")
    cyc = po.points
    d = pts.shape[1]
    if cyc.shape[1] != d:
        raise InputError("phase-space dimensions differ")
    modes = np.array(
        [k for k in itertools.product(range(-2, 3), repeat=d) if any(k)], dtype=float
    )
    worst = 0.0
    for chunk in np.array_split(modes, max(1, len(modes) // 128)):
        orbit_mean = np.exp(2j * np.pi * (pts @ chunk.T)).mean(axis=0)
        cycle_mean = np.exp(2j * np.pi * (cyc @ chunk.T)).mean(axis=0)
        delta = orbit_mean - cycle_mean
        worst = max(
            worst, float(np.abs(delta.real).max()), float(np.abs(delta.imag).max())
        )
    return worst


@dataclass(slots=True)
class ApproximationReport:
    """Combined outcome of one full verification run."""

    system: _systems.SystemSpec
    reference: MeasureStats | None
    orbit: PeriodicOrbit | None
    epsilon: float
    eta: float
    exponent_gap: float | None
    mean_distance_gap: float | None
    independence_gap: float | None
    splitting_coverage: float | None
    weak_star_discrepancy: float | None
    verdicts: dict
    coverage: CoverageReport | None
    search_candidates: int
    search_failed: int
    search_orbits: int
    pesin_rejected: int
    notes: tuple = ()

    def __post_init__(self):
        if set(self.verdicts) != set(_CHECKED_QUANTITIES):
            raise InputError(f"verdicts must cover exactly {_CHECKED_QUANTITIES}")
        for key, value in self.verdicts.items():
            if value not in _VERDICTS:
                raise InputError(f"verdict {key}={value!r} not in {_VERDICTS}")
        for name in ("exponent_gap", "mean_distance_gap", "independence_gap"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise InputError(f"{name} must be nonnegative")
        if self.splitting_coverage is not None and not (
            0.0 <= self.splitting_coverage <= 1.0
        ):
            raise InputError("splitting_coverage must lie in [0, 1]")
        self.notes = tuple(self.notes)

    def to_json_dict(self) -> dict:
        return {
            "system": self.system.to_json_dict(),
            "reference": None if self.reference is None else self.reference.to_json_dict(),
            "orbit": None if self.orbit is None else self.orbit.to_json_dict(),
            "epsilon": self.epsilon,
            "eta": self.eta,
            "exponent_gap": self.exponent_gap,
            "mean_distance_gap": self.mean_distance_gap,
            "independence_gap": self.independence_gap,
            "splitting_coverage": self.splitting_coverage,
            "weak_star_discrepancy": self.weak_star_discrepancy,
            "verdicts": dict(self.verdicts),
            "search": {
                "candidates": self.search_candidates,
                "failed": self.search_failed,
                "orbits": self.search_orbits,
            },
            "splitting_detail": (
                None
                if self.coverage is None
                else {
                    "n_samples": self.coverage.n_samples,
                    "n_valid": self.coverage.n_valid,
                    "n_failed": self.coverage.n_failed,
                    "pesin_rejected": self.pesin_rejected,
                }
            ),
            "notes": list(self.notes),
        }


def _split_directions(sample, means):
    """(stable, unstable) direct sums of a sample's blocks by exponent sign."""
    negative = [i for i, m in enumerate(means) if m < 0.0]
    positive = [i for i, m in enumerate(means) if m > 0.0]
    if not negative or not positive:
        return None, None
    stable = direct_sum([sample.spaces[i] for i in negative])
    unstable = direct_sum([sample.spaces[i] for i in positive])
    return stable, unstable


def _pesin_filter(sys, points, samples, means, params: PesinParams, threads: int):
    """Boolean keep-mask over samples via the block-membership check."""
    count = len(samples)
    keep = np.zeros(count, dtype=bool)
    if not any(m < 0.0 for m in means) or not any(m > 0.0 for m in means):
        return (
            np.ones(count, dtype=bool),
            "uniformity filter skipped: no contracting or no expanding block",
        )

    def one(i: int) -> None:
        stable, unstable = _split_directions(samples[i], means)
        try:
            keep[i] = pesin_check(sys, points[i], stable, unstable, params).passed
        except _STAGE_ERRORS:
            keep[i] = False

    if threads == 1 or count == 1:
        for i in range(count):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(count)))
    return keep, ""


def _select_best(reference: MeasureStats, orbits, quantum: float = _GAP_QUANTUM):
    """Lexicographic best structural match: exponent gap, period, points."""
    ref_values = np.asarray(reference.exponents.values)

    def key(po: PeriodicOrbit):
        gap = float(np.max(np.abs(ref_values - np.asarray(po.exponents))))
        return (round(gap / quantum), po.period, tuple(po.points.ravel().tolist()))

    return min(orbits, key=key)


def run_full_verification(sys: _systems.SystemSpec, config) -> ApproximationReport:
    """Reference statistics, periodic search, all comparisons, one report.

    Deterministic for a fixed config seed (for any thread count); stage
    failures are folded into the report as not-found verdicts with
    notes, never raised.
    """
    seed = config.seed
    threads = config.threads
    eps = config.epsilon
    eta = config.eta
    notes: list = []
    verdicts = {name: "not-found" for name in _CHECKED_QUANTITIES}
    reference = None
    best = None
    coverage = None
    exponent_gap = mean_distance_gap = independence_gap = None
    splitting_coverage = None
    weak = None
    n_candidates = n_search_failed = n_orbits = 0
    pesin_rejected = 0

    def build() -> ApproximationReport:
        return ApproximationReport(
            system=sys,
            reference=reference,
            orbit=best,
            epsilon=eps,
            eta=eta,
            exponent_gap=exponent_gap,
            mean_distance_gap=mean_distance_gap,
            independence_gap=independence_gap,
            splitting_coverage=splitting_coverage,
            weak_star_discrepancy=weak,
            verdicts=dict(verdicts),
            coverage=coverage,
            search_candidates=n_candidates,
            search_failed=n_search_failed,
            search_orbits=n_orbits,
            pesin_rejected=pesin_rejected,
            notes=notes,
        )

    start = _systems.random_phase_point(sys, seed, "reference-orbit")
    try:
        exponents = lyapunov_qr(sys, start, config.horizons.orbit)
        dims, means = cluster_exponents(exponents.values)
        points, samples, failures = splitting_field(
            sys,
            start,
            config.horizons.stats,
            config.horizons.splitting,
            dims,
            block_means=means,
            seed=seed,
            threads=threads,
        )
        if failures:
            step = min(failures)
            raise EstimationError(
                f"splitting estimation failed at orbit step {step}: {failures[step]}"
            )
        reference = stats_from_samples(samples, exponents, dims)
    except _STAGE_ERRORS as exc:
        notes.append(f"reference statistics failed: {exc}")
        return build()

    try:
        search = search_periodic(sys, config.search, seed=seed, threads=threads)
    except _STAGE_ERRORS as exc:
        notes.append(f"periodic search failed: {exc}")
        return build()
    n_candidates = search.n_candidates
    n_search_failed = search.n_failed
    n_orbits = len(search.orbits)
    matches = [
        po
        for po in search.orbits
        if po.hyperbolic and tuple(po.splitting.dims) == tuple(reference.block_dims)
    ]
    if not matches:
        notes.append(
            "no hyperbolic periodic orbit with matching block structure within "
            f"max_period {config.search.max_period}"
        )
        return build()
    best = _select_best(reference, matches)

    report_e = verify_exponents(reference, best, eps)
    verdicts["exponents"] = report_e.verdict
    exponent_gap = report_e.max_gap
    try:
        report_md = verify_mean_distance(reference, best, eps)
        report_tau = verify_independence(reference, best, eps)
        verdicts["mean_distance"] = report_md.verdict
        mean_distance_gap = report_md.max_gap
        verdicts["independence"] = report_tau.verdict
        independence_gap = report_tau.max_gap
    except _STAGE_ERRORS as exc:
        notes.append(f"cycle statistics failed: {exc}")

    keep, filter_note = _pesin_filter(sys, points, samples, means, config.pesin, threads)
    if filter_note:
        notes.append(filter_note)
    pesin_rejected = int(np.sum(~keep))
    kept_points = points[keep]
    kept_samples = [s for s, flag in zip(samples, keep) if flag]
    try:
        coverage = verify_splitting_approx(
            sys,
            kept_points,
            best,
            eta,
            samples=kept_samples,
            splitting_horizon=config.horizons.splitting,
            seed=seed,
            threads=threads,
        )
        verdicts["splitting"] = coverage.verdict
        splitting_coverage = coverage.coverage
    except _STAGE_ERRORS as exc:
        notes.append(f"splitting approximation failed: {exc}")

    try:
        code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
        orbit_pts, status = _k.orbit_forward(
            code, mat, delta, ha, hb, start, config.horizons.orbit - 1
        )
        if status >= 0:
            raise DivergenceError(f"orbit escaped at step {status}")
        weak = weak_star_discrepancy(orbit_pts, best)
    except _STAGE_ERRORS as exc:
        notes.append(f"weak-star comparison failed: {exc}")
    return build()
