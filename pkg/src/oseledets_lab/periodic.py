"""Hyperbolic periodic orbits: detection, refinement, spectral splitting.

Candidates come from close returns along a long sample orbit and are
polished by Newton iteration on the full cycle (all points at once, one
map step per equation).  Solving the cycle system rather than iterating
f^p keeps every residual evaluation at single-step roundoff, so long
periods converge to 1e-13 residuals even when the monodromy itself is
numerically singular.

Cycle spectra are likewise never read off the explicit monodromy
product: its small eigenvalue moduli drown in rounding once the
condition number passes 1/eps.  Exponents come from a re-orthonormalized
frame looped around the cycle, and invariant blocks come either from an
ordered real Schur form of the monodromy (well-conditioned case) or
from slow/fast filtration pushes around the loop (stiff case).  The
explicit monodromy is still stored and validated literally whenever the
spectral spread keeps that comparison meaningful.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from oseledets_lab import _kernels as _k
from oseledets_lab import rng
from oseledets_lab import systems as _systems
from oseledets_lab.cocycle import (
    FlagSample,
    OrbitSegment,
    SplittingSample,
    flag_to_splitting,
    generate_orbit,
    push_subspace,
    splitting_to_flag,
)
from oseledets_lab.errors import (
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    EstimationError,
    GroupingError,
    InputError,
)
from oseledets_lab.grassmann import Subspace, subspace_distance
from oseledets_lab.oseledets import (
    ExponentEstimate,
    MeasureStats,
    compose_block_subspaces,
    pairwise_stats,
)

__all__ = [
    "PeriodicOrbit",
    "SearchConfig",
    "SearchResult",
    "close_returns",
    "newton_refine",
    "eigensplit",
    "cycle_splittings",
    "orbit_stats",
    "search_periodic",
]

_RESIDUAL_TOL = 1e-10
_HYPERBOLIC_TOL = 1e-8
_INVARIANCE_TOL = 1e-8
# Adjacent eigenvalue moduli with relative separation below the lower edge
# are one block, above the upper edge two; ratios inside the decade band
# around the nominal 1e-6 tolerance are reported as ambiguous.
_JOIN_RTOL = 1e-7
_SPLIT_RTOL = 1e-5
# Explicit-monodromy arithmetic (dets, eigenvector pushes) is trusted only
# while the spectral spread keeps the product well conditioned: the error
# of both scales like e^spread * eps, so 1e-8 checks need spread below
# log(1e8) with an order of margin to spare.
_LITERAL_SPREAD = np.log(1e7)
_MAX_NEWTON_UNKNOWNS = 2000
_MERGEABLE_ESTIMATE_GAP = 1.1e-6


@dataclass(slots=True)
class SearchConfig:
    """Knobs for the close-return + Newton periodic-orbit search."""

    max_period: int
    seed_orbit_length: int
    return_radius: float
    newton_max_iters: int = 50
    newton_tol: float = 1e-13
    dedup_tol: float = 1e-8

    def __post_init__(self):
        self.max_period = int(self.max_period)
        self.seed_orbit_length = int(self.seed_orbit_length)
        self.newton_max_iters = int(self.newton_max_iters)
        if self.max_period < 0:
            raise InputError("max_period must be >= 0")
        if self.seed_orbit_length < 1 or self.newton_max_iters < 1:
            raise InputError("seed_orbit_length and newton_max_iters must be positive")
        if not (self.return_radius > 0 and self.newton_tol > 0 and self.dedup_tol > 0):
            raise InputError("radii and tolerances must be positive")


def _wrap_rows(delta: np.ndarray, toral: bool) -> np.ndarray:
    if toral:
        return delta - np.round(delta)
    return delta


def _row_norms(delta: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(delta * delta, axis=1))


def _cycle_jacobians(sys: _systems.SystemSpec, points: np.ndarray) -> np.ndarray:
    return np.array([_systems.jacobian(sys, pt) for pt in points])


def _cycle_residual(sys: _systems.SystemSpec, points: np.ndarray) -> float:
    images = np.array([_systems.apply(sys, pt) for pt in points])
    delta = _wrap_rows(images - np.roll(points, -1, axis=0), sys.is_toral)
    return float(_row_norms(delta).max())


@dataclass(slots=True)
class PeriodicOrbit:
    """A refined periodic cycle with its invariant splitting.

    ``monodromy`` is the literal Jacobian product around the cycle from
    ``points[0]``; ``eigen_moduli`` and ``exponents`` are its spectrum
    on the log scale, obtained stably (see module docstring) and sorted
    increasing with multiplicity.  ``splitting`` lives at ``points[0]``.
    Construction re-validates the defining properties: cycle residual
    below 1e-10, the hyperbolicity flag consistent with the exponents,
    modulus product matching the cycle determinant, and invariance of
    the splitting under one trip around the cycle.
    """

    points: np.ndarray
    period: int
    monodromy: np.ndarray
    eigen_moduli: tuple
    exponents: tuple
    splitting: SplittingSample
    hyperbolic: bool
    residual: float
    system: _systems.SystemSpec

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.monodromy = np.asarray(self.monodromy, dtype=float)
        self.eigen_moduli = tuple(float(v) for v in self.eigen_moduli)
        self.exponents = tuple(float(v) for v in self.exponents)
        self.period = int(self.period)
        self.residual = float(self.residual)
        self.hyperbolic = bool(self.hyperbolic)
        d = self.system.ambient_dim
        p = self.period
        if self.points.ndim != 2 or self.points.shape != (p, d):
            raise InputError(f"points must have shape ({p}, {d})")
        if self.monodromy.shape != (d, d):
            raise InputError(f"monodromy must be {d} x {d}")
        if len(self.eigen_moduli) != d or len(self.exponents) != d:
            raise InputError(f"need {d} moduli and exponents")
        if any(m <= 0 for m in self.eigen_moduli):
            raise InputError("eigenvalue moduli must be positive")
        if any(b < a for a, b in zip(self.exponents[:-1], self.exponents[1:])):
            raise InputError("exponents must be sorted increasing")
        for mod, lam in zip(self.eigen_moduli, self.exponents):
            if abs(np.log(mod) - p * lam) > 1e-9 * max(1.0, abs(p * lam)):
                raise InputError("eigen_moduli inconsistent with exponents")
        if self.residual >= _RESIDUAL_TOL:
            raise InputError(f"cycle residual {self.residual:.3e} >= {_RESIDUAL_TOL}")
        recomputed = _cycle_residual(self.system, self.points)
        if recomputed >= _RESIDUAL_TOL or abs(recomputed - self.residual) > 1e-11:
            raise InputError("stored residual does not match the cycle")
        hyper = min(abs(v) for v in self.exponents) > _HYPERBOLIC_TOL
        if self.hyperbolic != hyper:
            raise InputError("hyperbolic flag inconsistent with the exponents")
        if _systems.phase_distance(self.system, self.splitting.base, self.points[0]) > 1e-9:
            raise InputError("splitting must be based at points[0]")
        if self.splitting.ambient_dim != d:
            raise InputError("splitting dimension mismatch")
        self._validate_determinant()
        self._validate_invariance()

    def _validate_determinant(self) -> None:
        jacs = _cycle_jacobians(self.system, self.points)
        log_det = float(np.sum(np.log(np.abs(np.linalg.det(jacs)))))
        log_prod = self.period * float(np.sum(self.exponents))
        scale = float(np.exp(min(log_det, 200.0)))
        if abs(np.exp(min(log_prod, 200.0)) - scale) > 1e-8 * max(1.0, scale):
            raise InputError(
                "product of eigenvalue moduli does not match the cycle determinant"
            )
        spread = self.period * (self.exponents[-1] - self.exponents[0])
        if spread < _LITERAL_SPREAD:
            literal = abs(np.linalg.det(self.monodromy))
            if abs(np.exp(log_prod) - literal) > 1e-8 * max(1.0, literal):
                raise InputError(
                    "product of eigenvalue moduli does not match |det(monodromy)|"
                )

    def _validate_invariance(self) -> None:
        if self.splitting.block_count == 1:
            return
        jacs = _cycle_jacobians(self.system, self.points)
        inverses = [np.linalg.inv(j) for j in jacs]
        flag = splitting_to_flag(self.splitting)
        for level in flag.filtration:
            current = level
            for j in reversed(range(self.period)):
                current = push_subspace(inverses[j], current)
            if subspace_distance(current, level) > _INVARIANCE_TOL:
                raise InputError("slow filtration level is not cycle-invariant")
        for level in flag.cofiltration:
            current = level
            for j in range(self.period):
                current = push_subspace(jacs[j], current)
            if subspace_distance(current, level) > _INVARIANCE_TOL:
                raise InputError("fast cofiltration level is not cycle-invariant")
        spread = self.period * (self.exponents[-1] - self.exponents[0])
        if spread < _LITERAL_SPREAD:
            for space in self.splitting.spaces:
                image = push_subspace(self.monodromy, space)
                if subspace_distance(image, space) > _INVARIANCE_TOL:
                    raise InputError("splitting block not invariant under the monodromy")

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "period": self.period,
            "points": self.points.tolist(),
            "exponents": list(self.exponents),
            "block_dims": list(self.splitting.dims),
            "residual": self.residual,
            "hyperbolic": self.hyperbolic,
        }


def close_returns(
    orbit: OrbitSegment, cfg: SearchConfig, system: _systems.SystemSpec | None = None
):
    """Scan an orbit for near-returns: seeds for the periodic-orbit search.

    Returns all (point, candidate_period) pairs with the orbit returning
    within ``cfg.return_radius`` of itself after 1..max_period steps,
    deduplicated per period at ``cfg.dedup_tol`` (exactly periodic
    orbits would otherwise repeat every revisit).  Distances wrap on the
    torus unless ``system`` says the phase space is a plane.
    """
    if orbit.horizon < cfg.max_period + 1:
        raise InputError("orbit horizon must be at least max_period + 1")
    toral = system.is_toral if system is not None else True
    pts = orbit.points
    found: list = []
    for period in range(1, cfg.max_period + 1):
        delta = _wrap_rows(pts[period:] - pts[:-period], toral)
        hits = np.nonzero(_row_norms(delta) < cfg.return_radius)[0]
        kept: list = []
        for j in hits:
            candidate = pts[j]
            dup = False
            for other in kept:
                gap = _wrap_rows((candidate - other)[None, :], toral)
                if _row_norms(gap)[0] <= cfg.dedup_tol:
                    dup = True
                    break
            if not dup:
                kept.append(candidate)
                found.append((candidate.copy(), period))
    return found


def _estimates_or_none(means):
    gaps = np.diff(np.asarray(means, dtype=float))
    if gaps.size and float(gaps.min()) <= _MERGEABLE_ESTIMATE_GAP:
        return None
    return tuple(float(v) for v in means)


def _cycle_exponents(sys: _systems.SystemSpec, points: np.ndarray) -> np.ndarray:
    """Lyapunov exponents of a cycle via a frame looped around it.

    The orbit is never re-iterated (instability would walk it off the
    cycle); the cocycle is evaluated on the refined points directly,
    tiled for alignment plus measurement loops.
    """
    p, d = points.shape
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    warm_loops = max(2, int(np.ceil(240.0 / p)))
    meas_loops = max(4, int(np.ceil(400.0 / p)))
    frame = rng.random_orthonormal(0, "cycle-qr", d)
    warm_base = np.tile(points, (warm_loops, 1))
    aligned, _, status = _k.push_frame(code, mat, delta, ha, hb, warm_base, frame, False)
    if status >= 0:
        raise DegeneracyError("cycle cocycle collapsed while aligning the frame")
    meas_base = np.tile(points, (meas_loops, 1))
    _, logs, status = _k.push_frame(code, mat, delta, ha, hb, meas_base, aligned, False)
    if status >= 0:
        raise DegeneracyError("cycle cocycle collapsed while measuring exponents")
    return np.sort(logs / (meas_loops * p))


def _group_cycle_exponents(lam: np.ndarray, period: int):
    """Block dims/means from cycle exponents, split by modulus ratio."""
    dims = [1]
    sums = [lam[0]]
    for prev, value in zip(lam[:-1], lam[1:]):
        rel = float(np.expm1(period * (value - prev)))
        if rel <= _JOIN_RTOL:
            dims[-1] += 1
            sums[-1] += value
        elif rel >= _SPLIT_RTOL:
            dims.append(1)
            sums.append(value)
        else:
            raise GroupingError(
                f"eigenvalue modulus ratio 1 + {rel:.3e} falls in the ambiguity band "
                f"[{_JOIN_RTOL:g}, {_SPLIT_RTOL:g}]"
            )
    means = tuple(s / n for s, n in zip(sums, dims))
    return tuple(dims), means


def _cycle_block_spaces(sys, points, monodromy, lam, dims, means):
    """Invariant block subspaces at points[0] for grouped cycle exponents."""
    p, d = points.shape
    if len(dims) == 1:
        return (Subspace(np.eye(d)),)
    spread = p * (lam[-1] - lam[0])
    if spread < _LITERAL_SPREAD:
        sample = eigensplit(monodromy, p)
        if sample.dims != tuple(dims):
            raise GroupingError(
                f"monodromy eigensplit dims {sample.dims} disagree with the "
                f"loop-cocycle grouping {tuple(dims)}"
            )
        return sample.spaces
    min_gap = float(np.diff(np.asarray(means)).min())
    loops = int(min(500, max(3, np.ceil(120.0 / (p * min_gap)))))
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    frame = rng.random_orthonormal(0, "cycle-splitting", d)
    bwd_base = np.tile(points[::-1], (loops, 1))
    fwd_base = np.tile(points, (loops, 1))
    slow, _, st1 = _k.push_frame(code, mat, delta, ha, hb, bwd_base, frame, True)
    fast, _, st2 = _k.push_frame(code, mat, delta, ha, hb, fwd_base, frame, False)
    if st1 >= 0 or st2 >= 0:
        raise DegeneracyError("filtration frame collapsed while looping the cycle")
    spaces, reason = compose_block_subspaces(slow, fast, dims, tol=1e-8)
    if spaces is None:
        raise EstimationError(
            f"cycle splitting blocks inconsistent: {reason}",
            diagnostics={"dims": tuple(dims), "period": p, "loops": loops},
        )
    return spaces


def newton_refine(
    sys: _systems.SystemSpec, seed, period: int, cfg: SearchConfig
) -> PeriodicOrbit:
    """Refine a candidate periodic point into a certified cycle.

    Newton iteration on the simultaneous cycle equations
    f(x_j) = x_{j+1 mod p} (residuals wrapped to the nearest integer
    image on the torus — the continuous-lift residual), starting from
    the orbit segment of ``seed``.  The refined cycle is reduced to its
    primitive period, rotated so points[0] is lexicographically
    smallest, and returned with spectrum and invariant splitting.
    """
    if period < 1:
        raise InputError("period must be >= 1")
    pt = np.asarray(seed, dtype=float).ravel()
    d = sys.ambient_dim
    if pt.shape != (d,):
        raise InputError(f"seed must have dimension {d}")
    if period * d > _MAX_NEWTON_UNKNOWNS:
        raise InputError(
            f"cycle system with {period * d} unknowns exceeds the dense-solve cap"
        )
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    cycle, status = _k.orbit_forward(code, mat, delta, ha, hb, pt, period - 1)
    if status >= 0:
        raise DivergenceError(f"seed orbit escaped at step {status}")
    points = np.array(cycle[:period])
    toral = sys.is_toral
    eye = np.eye(d)
    residual = np.inf
    for iteration in range(cfg.newton_max_iters + 1):
        images = np.array([_systems.apply(sys, row) for row in points])
        gap = _wrap_rows(images - np.roll(points, -1, axis=0), toral)
        residual = float(_row_norms(gap).max())
        if residual < cfg.newton_tol:
            break
        if iteration == cfg.newton_max_iters:
            raise ConvergenceError(
                f"Newton did not reach {cfg.newton_tol:g} within "
                f"{cfg.newton_max_iters} iterations",
                iterations=iteration,
                residual=residual,
            )
        system_matrix = np.zeros((period * d, period * d))
        for j in range(period):
            rows = slice(j * d, (j + 1) * d)
            system_matrix[rows, rows] = _systems.jacobian(sys, points[j])
        for j in range(period):
            rows = slice(j * d, (j + 1) * d)
            nxt = (j + 1) % period
            system_matrix[rows, nxt * d : (nxt + 1) * d] -= eye
        try:
            step = np.linalg.solve(system_matrix, -gap.ravel())
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError(
                "singular Newton system: candidate is not hyperbolic"
            ) from exc
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > 0.5:
            raise ConvergenceError(
                "Newton step left the contraction basin",
                iterations=iteration,
                residual=residual,
            )
        points = points + step.reshape(period, d)
        if toral:
            points = _systems._mod1(points)
    # primitive-period reduction
    for q in range(1, period):
        if period % q:
            continue
        tiled = np.tile(points[:q], (period // q, 1))
        if _row_norms(_wrap_rows(points - tiled, toral)).max() < 1e-9:
            points = points[:q]
            period = q
            break
    order = np.lexsort(tuple(points[:, c] for c in reversed(range(d))))
    points = np.roll(points, -order[0], axis=0)
    residual = _cycle_residual(sys, points)
    if residual >= _RESIDUAL_TOL:
        raise ConvergenceError(
            f"refined cycle residual {residual:.3e} above {_RESIDUAL_TOL}",
            iterations=cfg.newton_max_iters,
            residual=residual,
        )
    jacs = _cycle_jacobians(sys, points)
    monodromy = eye.copy()
    for j in range(period):
        monodromy = jacs[j] @ monodromy
    lam = _cycle_exponents(sys, points)
    dims, means = _group_cycle_exponents(lam, period)
    spaces = _cycle_block_spaces(sys, points, monodromy, lam, dims, means)
    splitting = SplittingSample(
        base=points[0],
        spaces=spaces,
        dims=dims,
        exponent_estimates=_estimates_or_none(means),
    )
    hyperbolic = bool(min(abs(v) for v in lam) > _HYPERBOLIC_TOL)
    return PeriodicOrbit(
        points=points,
        period=period,
        monodromy=monodromy,
        eigen_moduli=tuple(np.exp(period * lam)),
        exponents=tuple(lam),
        splitting=splitting,
        hyperbolic=hyperbolic,
        residual=residual,
        system=sys,
    )


def eigensplit(monodromy, period: int, base=None) -> SplittingSample:
    """Group a monodromy's spectrum by modulus into real invariant blocks.

    Eigenvalue moduli are clustered at relative tolerance 1e-6 (with a
    decade guard band on either side: ratios inside it raise a grouping
    error rather than silently committing to a side).  Each cluster's
    real invariant subspace — spanning real eigenvectors, the real
    planes of complex-conjugate pairs, and generalized eigenvectors of
    defective blocks alike — is read off an ordered real Schur form.
    Blocks are sorted by (1/period) log modulus, increasing.
    """
    m = np.asarray(monodromy, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError("monodromy must be a square matrix")
    if period < 1:
        raise InputError("period must be >= 1")
    if not np.all(np.isfinite(m)):
        raise InputError("monodromy entries must be finite")
    d = m.shape[0]
    moduli = np.sort(np.abs(np.linalg.eigvals(m)))
    if moduli[0] <= 0.0:
        raise InputError("monodromy must be nonsingular")
    dims = [1]
    for prev, value in zip(moduli[:-1], moduli[1:]):
        rel = value / prev - 1.0
        if rel <= _JOIN_RTOL:
            dims[-1] += 1
        elif rel >= _SPLIT_RTOL:
            dims.append(1)
        else:
            raise GroupingError(
                f"eigenvalue moduli {prev:.12g} and {value:.12g} have relative gap "
                f"{rel:.3e}, inside the ambiguity band [{_JOIN_RTOL:g}, {_SPLIT_RTOL:g}]"
            )
    # geometric midpoints between adjacent clusters bound each selection band
    edges = [0.0]
    at = 0
    tops = []
    bottoms = []
    for n in dims:
        bottoms.append(moduli[at])
        tops.append(moduli[at + n - 1])
        at += n
    for i in range(len(dims) - 1):
        edges.append(float(np.sqrt(tops[i] * bottoms[i + 1])))
    edges.append(np.inf)
    spaces = []
    means = []
    at = 0
    for i, n in enumerate(dims):
        lo, hi = edges[i], edges[i + 1]

        def select(re, im, lo=lo, hi=hi):
            rho = np.hypot(re, im)
            return bool(lo <= rho < hi)

        _, z, sdim = scipy.linalg.schur(m, output="real", sort=select)
        if sdim != n:
            raise GroupingError(
                f"Schur reordering selected {sdim} eigenvalues for the modulus "
                f"cluster of size {n} in ({lo:.6g}, {hi:.6g})"
            )
        spaces.append(Subspace(z[:, :sdim].copy()))
        means.append(float(np.mean(np.log(moduli[at : at + n])) / period))
        at += n
    return SplittingSample(
        base=np.zeros(d) if base is None else np.asarray(base, dtype=float),
        spaces=tuple(spaces),
        dims=tuple(dims),
        exponent_estimates=_estimates_or_none(means),
    )


def cycle_splittings(po: PeriodicOrbit):
    """The orbit's invariant splitting at every cycle point.

    Slow filtration levels are transported backward around the loop and
    fast cofiltration levels forward (each direction is the one that
    damps its own alignment error), then blocks are re-intersected at
    every point.  Element j is based at po.points[j]; element 0
    reproduces po.splitting up to roundoff.
    """
    p = po.period
    d = po.ambient_dim
    estimates = po.splitting.exponent_estimates
    if po.splitting.block_count == 1:
        return tuple(
            SplittingSample(
                base=po.points[j],
                spaces=(Subspace(np.eye(d)),),
                dims=(d,),
                exponent_estimates=estimates,
            )
            for j in range(p)
        )
    flag0 = splitting_to_flag(po.splitting)
    jacs = _cycle_jacobians(po.system, po.points)
    inverses = [np.linalg.inv(j) for j in jacs]
    filtration = [None] * p
    filtration[0] = flag0.filtration
    current = flag0.filtration
    for j in reversed(range(1, p)):
        current = tuple(push_subspace(inverses[j], lvl) for lvl in current)
        filtration[j] = current
    cofiltration = [None] * p
    cofiltration[0] = flag0.cofiltration
    current = flag0.cofiltration
    for j in range(1, p):
        current = tuple(push_subspace(jacs[j - 1], lvl) for lvl in current)
        cofiltration[j] = current
    samples = []
    for j in range(p):
        flag = FlagSample(
            base=po.points[j],
            filtration=filtration[j],
            cofiltration=cofiltration[j],
            level_dims=flag0.level_dims,
        )
        samples.append(flag_to_splitting(flag, exponent_estimates=estimates))
    return tuple(samples)


def orbit_stats(po: PeriodicOrbit) -> MeasureStats:
    """Exact splitting statistics of the cycle's atomic invariant measure.

    Uniform averages of the pairwise block distance, angle and the
    independence number over the cycle points — the integrals against
    the measure weighting each cycle point 1/p.  Cyclic relabeling of
    the points cannot change them.
    """
    if not po.hyperbolic:
        raise InputError("orbit statistics require a hyperbolic cycle")
    samples = cycle_splittings(po)
    p = po.period
    s = po.splitting.block_count
    dist = np.empty((p, s, s))
    ang = np.empty((p, s, s))
    tau = np.empty(p)
    for j, sample in enumerate(samples):
        dist[j], ang[j], tau[j] = pairwise_stats(sample.spaces)
    exponents = ExponentEstimate(
        values=po.exponents, horizon=po.period, renorm_period=1, residual=0.0
    )
    return MeasureStats(
        mean_distance=dist.mean(axis=0),
        mean_angle=ang.mean(axis=0),
        independence=float(tau.mean()),
        exponents=exponents,
        block_dims=po.splitting.dims,
        horizon=p,
    )


@dataclass(slots=True)
class SearchResult:
    """Outcome of a periodic-orbit search."""

    orbits: tuple
    n_candidates: int
    n_failed: int

    def to_json_dict(self) -> dict:
        return {
            "orbits": [po.to_json_dict() for po in self.orbits],
            "n_candidates": self.n_candidates,
            "n_failed": self.n_failed,
        }


_REFINEMENT_ERRORS = (
    InputError,
    DegeneracyError,
    DivergenceError,
    ConvergenceError,
    EstimationError,
    GroupingError,
)


def _search_start(sys: _systems.SystemSpec, seed: int) -> np.ndarray:
    if sys.is_toral:
        return _systems.random_phase_point(sys, seed, "periodic-seed")
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    for attempt in range(20):
        start = _systems.random_phase_point(sys, seed, "periodic-seed", attempt)
        pts, status = _k.orbit_forward(code, mat, delta, ha, hb, start, 200)
        if status < 0:
            return pts[-1]
    raise DivergenceError("no bounded transient found for the plane map")


def _same_cycle(a: PeriodicOrbit, b: PeriodicOrbit, tol: float, toral: bool) -> bool:
    if a.period != b.period:
        return False
    for shift in range(a.period):
        delta = _wrap_rows(a.points - np.roll(b.points, -shift, axis=0), toral)
        if _row_norms(delta).max() < tol:
            return True
    return False


def search_periodic(
    sys: _systems.SystemSpec, cfg: SearchConfig, seed: int = 0, threads: int = 1
) -> SearchResult:
    """Close-return candidates, refined, deduplicated, deterministically ordered.

    Refinement failures (divergent Newton, ambiguous grouping, escaped
    seeds) are counted, not raised.  Orbits are sorted by (period,
    points) after canonical rotation, so output order is independent of
    the thread count.
    """
    if threads < 1:
        raise InputError("threads must be >= 1")
    if cfg.max_period < 1:
        return SearchResult(orbits=(), n_candidates=0, n_failed=0)
    start = _search_start(sys, seed)
    orbit = generate_orbit(sys, start, max(cfg.seed_orbit_length, cfg.max_period + 1))
    candidates = close_returns(orbit, cfg, system=sys)
    results: list = [None] * len(candidates)

    def refine(i: int) -> None:
        point, period = candidates[i]
        try:
            results[i] = newton_refine(sys, point, period, cfg)
        except _REFINEMENT_ERRORS:
            results[i] = None

    if threads == 1 or len(candidates) <= 1:
        for i in range(len(candidates)):
            refine(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(refine, range(len(candidates))))
    n_failed = sum(1 for r in results if r is None)
    refined = [r for r in results if r is not None]
    refined.sort(key=lambda po: (po.period, *po.points.ravel().tolist()))
    unique: list = []
    for po in refined:
        if not any(_same_cycle(po, kept, cfg.dedup_tol, sys.is_toral) for kept in unique):
            unique.append(po)
    return SearchResult(
        orbits=tuple(unique), n_candidates=len(candidates), n_failed=n_failed
    )
