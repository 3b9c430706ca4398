"""Finite-horizon Lyapunov exponents, splitting estimation, orbit statistics.

The exponent estimator is the standard discrete QR method: propagate an
orthonormal frame through the Jacobian cocycle with per-step
re-orthonormalization, accumulate the logs of the triangular diagonal,
and average.  Splittings are estimated by intersecting two filtrations:
pushing a generic frame backward from far in the future aligns its
leading columns with the slow subspaces, pushing one forward from far
in the past aligns them with the fast subspaces, and the block of
intermediate growth rate is the principal-vector intersection of the
matching levels.  This is exact for constant-matrix systems and
self-consistent (equivariant under one map step) for the perturbed
ones.

Orbit statistics — mean pairwise distance and angle between blocks and
the mean independence number — are plain Birkhoff means over a sampled
stretch of orbit, estimated pointwise and reduced in a fixed order so
that multi-threaded runs reproduce single-threaded output bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from oseledets_lab import _kernels as _k
from oseledets_lab import rng
from oseledets_lab import systems as _systems
from oseledets_lab.cocycle import FlagSample, OrbitSegment, SplittingSample
from oseledets_lab.errors import (
    DegeneracyError,
    DivergenceError,
    EstimationError,
    InputError,
)
from oseledets_lab.grassmann import (
    Subspace,
    independence_number,
    min_angle,
    orthonormal_columns,
    subspace_distance,
    subspace_intersection,
)

__all__ = [
    "ExponentEstimate",
    "MeasureStats",
    "FlagGrowthRates",
    "lyapunov_qr",
    "cluster_exponents",
    "compose_block_subspaces",
    "estimate_splitting",
    "splitting_field",
    "birkhoff_average",
    "pairwise_stats",
    "stats_from_samples",
    "measure_stats",
    "filtration_growth_check",
]

_MIN_EXPONENT_HORIZON = 100
_DEFAULT_WARMUP = 100
_INTERSECT_TOL = 1e-6


@dataclass(slots=True)
class ExponentEstimate:
    """QR-method Lyapunov exponent estimate.

    ``values`` are sorted increasing.  ``residual`` is the largest drift
    of the running per-direction averages over the last 10% of the
    horizon — a convergence indicator, not an error bound.
    """

    values: tuple
    horizon: int
    renorm_period: int
    residual: float

    def __post_init__(self):
        self.values = tuple(float(v) for v in self.values)
        if any(b < a for a, b in zip(self.values[:-1], self.values[1:])):
            raise InputError("exponent values must be sorted increasing")
        if not np.isfinite(self.residual):
            raise InputError("residual must be finite")

    def to_json_dict(self) -> dict:
        return {
            "values": list(self.values),
            "horizon": self.horizon,
            "renorm_period": self.renorm_period,
            "residual": self.residual,
        }


def _raise_cocycle_failure(sys: _systems.SystemSpec, step: int, x0) -> None:
    if sys.kind == "henon":
        raise DivergenceError(f"orbit from {np.asarray(x0)} escaped near step {step}")
    raise DegeneracyError(f"cocycle frame collapsed at step {step}")


def lyapunov_qr(
    sys: _systems.SystemSpec,
    x0,
    n: int,
    renorm_period: int = 1,
    warmup: int = _DEFAULT_WARMUP,
) -> ExponentEstimate:
    """Full Lyapunov spectrum along the orbit of x0 by the QR method.

    The cocycle is factored step by step (one QR per step) regardless of
    ``renorm_period``; the period only sets the granularity at which log
    diagonals are accumulated into windows, so estimates are independent
    of it to rounding.  ``warmup`` steps are spent aligning the frame
    before accumulation starts (an unaligned start biases the trailing
    exponents at the 1e-5 level on a 1e4 horizon).

    Parameters
    ----------
    sys : SystemSpec
    x0 : array_like
        Starting point.
    n : int
        Accumulation horizon, at least 100.
    renorm_period : int, optional
        Steps per accumulation window.
    warmup : int, optional
        Alignment steps excluded from the averages.
    """
    if n < _MIN_EXPONENT_HORIZON:
        raise InputError(f"exponent horizon must be >= {_MIN_EXPONENT_HORIZON}, got {n}")
    if renorm_period < 1 or warmup < 0:
        raise InputError("renorm_period must be >= 1 and warmup >= 0")
    pt = np.asarray(x0, dtype=float)
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    hist, _, status = _k.qr_log_history(
        code, mat, delta, ha, hb, pt, n, renorm_period, warmup
    )
    if status >= 0:
        _raise_cocycle_failure(sys, status, pt)
    nwin = hist.shape[0]
    counts = np.full(nwin, renorm_period, dtype=float)
    counts[-1] = n - renorm_period * (nwin - 1)
    cum = np.cumsum(hist, axis=0)
    steps = np.cumsum(counts)
    final = cum[-1] / n
    tail = steps >= 0.9 * n
    if np.sum(tail) > 1:
        running = cum[tail] / steps[tail, None]
        residual = float(np.max(np.abs(running - final[None, :])))
    else:
        residual = 0.0
    return ExponentEstimate(
        values=tuple(np.sort(final)),
        horizon=n,
        renorm_period=renorm_period,
        residual=residual,
    )


def cluster_exponents(values, gap: float = 1e-2):
    """Group sorted exponent estimates into blocks.

    Consecutive values closer than ``gap`` belong to one block
    (single-link).  Returns (block_dims, block_means), both ordered by
    increasing exponent.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        raise InputError("cannot cluster an empty exponent list")
    dims = [1]
    sums = [vals[0]]
    for prev, value in zip(vals[:-1], vals[1:]):
        if value - prev < gap:
            dims[-1] += 1
            sums[-1] += value
        else:
            dims.append(1)
            sums.append(value)
    means = tuple(s / d for s, d in zip(sums, dims))
    return tuple(dims), means


def _grouped_means(values, block_dims):
    vals = np.sort(np.asarray(values, dtype=float))
    if int(np.sum(block_dims)) != vals.size:
        raise InputError(
            f"block dims {tuple(block_dims)} do not account for {vals.size} exponents"
        )
    means = []
    at = 0
    for dim in block_dims:
        means.append(float(np.mean(vals[at : at + dim])))
        at += dim
    return tuple(means)


def compose_block_subspaces(slow_frame, fast_frame, dims, tol: float = _INTERSECT_TOL):
    """Assemble splitting blocks from slow/fast filtration frames.

    ``slow_frame`` columns must be ordered so that the leading l_i span
    the i-th slow filtration level; ``fast_frame`` mirrors this from the
    fast side.  The slowest block is read off the slow frame, the
    fastest off the fast frame, and every intermediate block is the
    principal-vector intersection of the enclosing slow level with the
    complementary fast level.  Returns (spaces, None) on success or
    (None, reason) when an intersection has the wrong dimension or a
    block degenerates.
    """
    dims = tuple(int(v) for v in dims)
    d = slow_frame.shape[0]
    levels = np.cumsum(dims)
    try:
        spaces = [Subspace(slow_frame[:, : levels[0]])]
        for i in range(1, len(dims) - 1):
            slow_level = Subspace(slow_frame[:, : levels[i]])
            fast_level = Subspace(fast_frame[:, : d - levels[i - 1]])
            shared = subspace_intersection(slow_level, fast_level, tol)
            if shared is None or shared.dim != dims[i]:
                got = 0 if shared is None else shared.dim
                return None, f"level {i + 1} intersection dimension {got} != {dims[i]}"
            spaces.append(shared)
        if len(dims) > 1:
            spaces.append(Subspace(fast_frame[:, : dims[-1]]))
    except (InputError, DegeneracyError) as exc:
        return None, str(exc)
    return tuple(spaces), None


def splitting_field(
    sys: _systems.SystemSpec,
    x0,
    count: int,
    splitting_horizon: int,
    block_dims,
    block_means=None,
    seed: int = 0,
    threads: int = 1,
):
    """Estimate the splitting at each of the first ``count`` orbit points.

    Shared engine behind :func:`estimate_splitting`, :func:`measure_stats`
    and the verification harness.  One backward and one forward orbit stretch
    of length ``splitting_horizon`` is attached around every sample, and
    a single seeded generic frame is pushed through both.  Returns
    (points, samples, failures) where ``samples[j]`` is a
    :class:`SplittingSample` or None and ``failures`` maps failing orbit
    indices to reasons.
    """
    if count < 1 or splitting_horizon < 1:
        raise InputError("count and splitting_horizon must be >= 1")
    if threads < 1:
        raise InputError("threads must be >= 1")
    d = sys.ambient_dim
    dims = tuple(int(v) for v in block_dims)
    if sum(dims) != d or any(v < 1 for v in dims):
        raise InputError(f"block dims {dims} invalid for ambient dimension {d}")
    levels = np.cumsum(dims)
    h = splitting_horizon
    pt = np.asarray(x0, dtype=float)
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    bwd, status_b = _k.orbit_backward(code, mat, matinv, delta, ha, hb, pt, h)
    if status_b >= 0:
        _raise_cocycle_failure(sys, -status_b, pt)
    fwd, status_f = _k.orbit_forward(code, mat, delta, ha, hb, pt, count - 1 + h)
    if status_f >= 0:
        _raise_cocycle_failure(sys, status_f, pt)
    window = np.concatenate([bwd[h:0:-1], fwd])
    frame = rng.random_orthonormal(seed, "splitting-frame", d)
    samples: list = [None] * count
    failures: dict = {}

    def one(j: int) -> None:
        slow_base = np.ascontiguousarray(window[h + j : h + j + h][::-1])
        fast_base = np.ascontiguousarray(window[j : j + h])
        slow_frame, _, st1 = _k.push_frame(
            code, mat, delta, ha, hb, slow_base, frame, True
        )
        fast_frame, _, st2 = _k.push_frame(
            code, mat, delta, ha, hb, fast_base, frame, False
        )
        if st1 >= 0 or st2 >= 0:
            failures[j] = "frame collapse during filtration push"
            return
        spaces, reason = compose_block_subspaces(slow_frame, fast_frame, dims)
        if spaces is None:
            failures[j] = reason
            return
        try:
            samples[j] = SplittingSample(
                base=window[h + j],
                spaces=spaces,
                dims=dims,
                exponent_estimates=block_means,
            )
        except (InputError, DegeneracyError) as exc:
            failures[j] = str(exc)

    if threads == 1 or count == 1:
        for j in range(count):
            one(j)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(count)))
    return window[h : h + count], samples, failures


def estimate_splitting(
    sys: _systems.SystemSpec,
    x,
    n: int,
    block_dims=None,
    gap: float = 1e-2,
    seed: int = 0,
    exponent_horizon: int | None = None,
) -> SplittingSample:
    """Oseledets splitting estimate at one point.

    ``n`` is the filtration horizon (forward and backward stretch
    length).  Block dimensions are inferred by clustering a QR exponent
    estimate unless given explicitly.  Raises an estimation error with
    diagnostics when the two filtrations do not intersect consistently.
    """
    horizon = exponent_horizon if exponent_horizon is not None else max(2 * n, 200)
    exponents = lyapunov_qr(sys, x, horizon)
    if block_dims is None:
        dims, means = cluster_exponents(exponents.values, gap)
    else:
        dims = tuple(int(v) for v in block_dims)
        means = _grouped_means(exponents.values, dims)
    _, samples, failures = splitting_field(
        sys, x, 1, n, dims, block_means=means, seed=seed
    )
    if samples[0] is None:
        raise EstimationError(
            f"splitting estimation failed at {np.asarray(x)}: {failures[0]}",
            diagnostics={"reason": failures[0], "block_dims": dims, "horizon": n},
        )
    return samples[0]


def birkhoff_average(orbit: OrbitSegment, observable) -> float:
    """Arithmetic mean of ``observable(i, point_i, jacobian_i)`` over the orbit.

    The observable is evaluated at steps i = 0..n-1 (the final point
    carries no Jacobian and is excluded, matching one-sided ergodic
    sums).
    """
    n = orbit.horizon
    total = 0.0
    for i in range(n):
        total += float(observable(i, orbit.points[i], orbit.jacobians[i]))
    return total / n


@dataclass(slots=True)
class MeasureStats:
    """Orbit-averaged splitting statistics.

    ``mean_distance`` and ``mean_angle`` are s x s symmetric matrices of
    Birkhoff means of the pairwise projector-gap distance and smallest
    principal angle between blocks (zero diagonal); ``independence`` is
    the mean smallest eigenvalue of the pairwise-cosine matrix.
    """

    mean_distance: np.ndarray
    mean_angle: np.ndarray
    independence: float
    exponents: ExponentEstimate
    block_dims: tuple
    horizon: int

    def __post_init__(self):
        self.mean_distance = np.asarray(self.mean_distance, dtype=float)
        self.mean_angle = np.asarray(self.mean_angle, dtype=float)
        self.block_dims = tuple(int(v) for v in self.block_dims)
        s = len(self.block_dims)
        if self.mean_distance.shape != (s, s) or self.mean_angle.shape != (s, s):
            raise InputError("statistics matrices must be s x s for s blocks")
        if np.max(np.abs(self.mean_distance - self.mean_distance.T)) > 1e-12:
            raise InputError("mean_distance must be symmetric")
        if np.any(self.mean_distance < -1e-15) or np.any(self.mean_distance > 1 + 1e-12):
            raise InputError("mean_distance entries must lie in [0, 1]")

    @property
    def block_count(self) -> int:
        return len(self.block_dims)

    def to_json_dict(self) -> dict:
        return {
            "exponents": list(self.exponents.values),
            "block_dims": list(self.block_dims),
            "mean_distance": self.mean_distance.tolist(),
            "mean_angle": self.mean_angle.tolist(),
            "independence": self.independence,
            "horizon": self.horizon,
        }


def pairwise_stats(spaces):
    """(distance matrix, angle matrix, independence) for one splitting."""
    s = len(spaces)
    dist = np.zeros((s, s))
    ang = np.zeros((s, s))
    for i in range(s):
        for j in range(i + 1, s):
            dist[i, j] = dist[j, i] = subspace_distance(spaces[i], spaces[j])
            ang[i, j] = ang[j, i] = min_angle(spaces[i], spaces[j])
    return dist, ang, independence_number(spaces)


def stats_from_samples(samples, exponents: ExponentEstimate, block_dims) -> MeasureStats:
    """Average per-point splitting statistics into a MeasureStats.

    The reduction order is fixed (sample-major mean), so results do not
    depend on how the samples were computed or on thread count.
    """
    n = len(samples)
    if n == 0:
        raise InputError("cannot average statistics over zero samples")
    s = len(block_dims)
    dist = np.empty((n, s, s))
    ang = np.empty((n, s, s))
    tau = np.empty(n)
    for j, sample in enumerate(samples):
        dist[j], ang[j], tau[j] = pairwise_stats(sample.spaces)
    return MeasureStats(
        mean_distance=dist.mean(axis=0),
        mean_angle=ang.mean(axis=0),
        independence=float(tau.mean()),
        exponents=exponents,
        block_dims=block_dims,
        horizon=n,
    )


def measure_stats(
    sys: _systems.SystemSpec,
    x0,
    n: int,
    splitting_horizon: int,
    exponent_horizon: int | None = None,
    gap: float = 1e-2,
    seed: int = 0,
    threads: int = 1,
) -> MeasureStats:
    """Mean splitting statistics over the first ``n`` orbit points of x0.

    At every sampled point the splitting is estimated at horizon
    ``splitting_horizon`` and the pairwise block distance, angle and
    independence number are evaluated; the returned statistics are their
    plain means.  Exponents are estimated once along the same orbit
    (horizon ``exponent_horizon``, default max(n, 1000)) and attached.
    A failed splitting estimate anywhere raises an estimation error
    naming the failing step.
    """
    if n < 1:
        raise InputError(f"statistics horizon must be >= 1, got {n}")
    e_horizon = exponent_horizon if exponent_horizon is not None else max(n, 1000)
    exponents = lyapunov_qr(sys, x0, e_horizon)
    block_dims, block_means = cluster_exponents(exponents.values, gap)
    _, samples, failures = splitting_field(
        sys,
        x0,
        n,
        splitting_horizon,
        block_dims,
        block_means=block_means,
        seed=seed,
        threads=threads,
    )
    if failures:
        step = min(failures)
        raise EstimationError(
            f"splitting estimation failed at orbit step {step}: {failures[step]}",
            diagnostics={"failed_steps": dict(sorted(failures.items()))},
        )
    return stats_from_samples(samples, exponents, block_dims)


@dataclass(slots=True)
class FlagGrowthRates:
    """Per-level volume growth rates of a flag pushed along an orbit."""

    filtration_rates: tuple
    cofiltration_rates: tuple
    horizon: int


def _nested_frame(spaces) -> np.ndarray:
    """Orthonormal frame adapted to an increasing chain of subspaces."""
    frame = spaces[0].basis
    for space in spaces[1:]:
        resid = space.basis - frame @ (frame.T @ space.basis)
        extra = orthonormal_columns(resid, rank=space.dim - frame.shape[1])
        frame = np.column_stack([frame, extra])
    return frame


def filtration_growth_check(
    sys: _systems.SystemSpec, x0, n: int, flag: FlagSample
) -> FlagGrowthRates:
    """Push a flag along an orbit and report per-level log-volume rates.

    Level i of the filtration accumulates (1/n) sum of log |det| of the
    cocycle restricted to the pushed level — the finite-horizon shadow
    of the partial-sum exponent identities: the rate is bounded below by
    the sum of the i slowest exponents, with equality exactly when the
    level matches the slow Oseledets subspace, and generic levels drift
    up to the complementary (fast) sum.  Cofiltration levels mirror this
    from above.

    The flag must be based at x0.  Rates are computed from one pushed
    frame adapted to the nested levels, whose leading-column spans
    follow the pushed levels exactly (QR nesting), so a level's rate
    equals the stepwise accumulation of its restricted determinants.
    """
    if n < 1:
        raise InputError(f"growth horizon must be >= 1, got {n}")
    pt = np.asarray(x0, dtype=float)
    if _systems.phase_distance(sys, flag.base, pt) > 1e-10:
        raise InputError("flag is not based at the requested starting point")
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    fwd, status = _k.orbit_forward(code, mat, delta, ha, hb, pt, n)
    if status >= 0:
        _raise_cocycle_failure(sys, status, pt)
    base = np.ascontiguousarray(fwd[:n])
    d = sys.ambient_dim
    k = flag.level_count

    slow_frame = _nested_frame(flag.filtration)
    _, slow_logs, st1 = _k.push_frame(code, mat, delta, ha, hb, base, slow_frame, False)
    fast_frame = _nested_frame(tuple(reversed(flag.cofiltration)))
    _, fast_logs, st2 = _k.push_frame(code, mat, delta, ha, hb, base, fast_frame, False)
    if st1 >= 0 or st2 >= 0:
        raise DegeneracyError("flag level collapsed during the push")
    filtration_rates = tuple(
        float(np.sum(slow_logs[: flag.level_dims[i]])) / n for i in range(k)
    )
    cofiltration_rates = tuple(
        float(np.sum(fast_logs[: d - flag.level_dims[i]])) / n for i in range(k)
    )
    return FlagGrowthRates(
        filtration_rates=filtration_rates,
        cofiltration_rates=cofiltration_rates,
        horizon=n,
    )
