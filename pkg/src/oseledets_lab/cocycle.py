"""Orbits and the derivative cocycle acting on subspaces, splittings, flags.

An :class:`OrbitSegment` is the finite carrier of every ergodic average
in the package: iterates x_0..x_n plus the Jacobians J_i = Df(x_i) for
i < n.  A :class:`SplittingSample` is an ordered direct-sum
decomposition of the tangent space at one base point, blocks arranged
by increasing growth rate; a :class:`FlagSample` is the associated pair
of nested filtrations (partial sums from the slow end, and the
complementary sums from the fast end).  The conversion between the two
and the log-determinant functionals of a map restricted to flag levels
live here as well.

Volume growth is always accumulated in log space (raw products
overflow near horizon 700), and every pushed frame is re-orthonormalized
immediately, since cocycle iteration collapses frames onto the dominant
directions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from oseledets_lab import _kernels as _k
from oseledets_lab import systems as _systems
from oseledets_lab.errors import DegeneracyError, DivergenceError, InputError
from oseledets_lab.grassmann import (
    Subspace,
    det_restricted,
    direct_sum,
    independence_number,
    orthonormal_columns,
    subspace_intersection,
    vol,
)

__all__ = [
    "MERGE_GAP",
    "OrbitSegment",
    "SplittingSample",
    "FlagSample",
    "generate_orbit",
    "push_subspace",
    "push_splitting",
    "splitting_to_flag",
    "flag_to_splitting",
    "filtration_log_det",
    "cofiltration_log_det",
]

# exponent estimates closer than this are one block, not two
MERGE_GAP = 1e-6
_NEST_TOL = 1e-10


@dataclass(slots=True)
class OrbitSegment:
    """A finite orbit x_0..x_n with the Jacobians J_0..J_{n-1}.

    ``points`` has shape (n+1, d) and ``jacobians`` (n, d, d).  The
    segment is a plain data carrier; :meth:`validate` replays the
    dynamics to confirm internal consistency against a system.
    """

    points: np.ndarray
    jacobians: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        jacs = np.asarray(self.jacobians, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise InputError(f"points must be (n+1, d) with n >= 1, got {pts.shape}")
        d = pts.shape[1]
        if jacs.shape != (pts.shape[0] - 1, d, d):
            raise InputError(
                f"jacobians shape {jacs.shape} inconsistent with points {pts.shape}"
            )
        self.points = pts
        self.jacobians = jacs

    @property
    def horizon(self) -> int:
        return self.points.shape[0] - 1

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def validate(self, sys: _systems.SystemSpec, tol: float = 1e-12) -> None:
        """Replay the orbit under ``sys``; raise on any step inconsistency."""
        for i in range(self.horizon):
            step = _systems.phase_distance(
                sys, _systems.apply(sys, self.points[i]), self.points[i + 1]
            )
            if step >= tol:
                raise InputError(f"points[{i + 1}] deviates from the map by {step:.3e}")
            dev = np.max(np.abs(self.jacobians[i] - _systems.jacobian(sys, self.points[i])))
            if dev >= tol:
                raise InputError(f"jacobians[{i}] deviates from analytic by {dev:.3e}")

    def to_csv(self, path) -> None:
        """Write one row per point: coordinates, then the Jacobian row-major.

        The final point has no stored Jacobian; its matrix cells are
        left empty.
        """
        d = self.ambient_dim
        header = [f"x{c}" for c in range(d)]
        header += [f"j{r}{c}" for r in range(d) for c in range(d)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.horizon):
                row = [repr(float(v)) for v in self.points[i]]
                row += [repr(float(v)) for v in self.jacobians[i].ravel()]
                writer.writerow(row)
            writer.writerow([repr(float(v)) for v in self.points[-1]] + [""] * d * d)

    @classmethod
    def from_csv(cls, path) -> "OrbitSegment":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        d = sum(1 for name in header if name.startswith("x"))
        if d == 0 or len(header) != d + d * d or len(rows) < 2:
            raise InputError(f"malformed orbit CSV {path!r}")
        points = np.empty((len(rows), d))
        jacobians = np.empty((len(rows) - 1, d, d))
        for i, row in enumerate(rows):
            points[i] = [float(v) for v in row[:d]]
            cells = row[d:]
            if i < len(rows) - 1:
                jacobians[i] = np.reshape([float(v) for v in cells], (d, d))
            elif any(cells):
                raise InputError("final CSV row must not carry a Jacobian")
        return cls(points=points, jacobians=jacobians)


def generate_orbit(sys: _systems.SystemSpec, x0, n: int) -> OrbitSegment:
    """Iterate the system n times from x0 and attach analytic Jacobians."""
    if n < 1:
        raise InputError(f"orbit horizon must be >= 1, got {n}")
    pt = np.asarray(x0, dtype=float)
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    points, status = _k.orbit_forward(code, mat, delta, ha, hb, pt, n)
    if status >= 0:
        raise DivergenceError(f"orbit escaped at step {status} from {pt}")
    d = sys.ambient_dim
    if sys.kind == "toral_automorphism":
        jacobians = np.broadcast_to(mat, (n, d, d)).copy()
    elif sys.kind == "perturbed_toral":
        jacobians = np.broadcast_to(mat, (n, d, d)).copy()
        jacobians[:, 0, 1] += delta * np.cos(2.0 * np.pi * points[:n, 1])
    else:
        jacobians = np.zeros((n, 2, 2))
        jacobians[:, 0, 0] = -2.0 * ha * points[:n, 0]
        jacobians[:, 0, 1] = 1.0
        jacobians[:, 1, 0] = hb
    return OrbitSegment(points=points, jacobians=jacobians)


def push_subspace(matrix, space: Subspace) -> Subspace:
    """Image of a subspace under a nonsingular map, re-orthonormalized."""
    mat = np.asarray(matrix, dtype=float)
    image = mat @ space.basis
    if vol(image) < 1e-12:
        raise DegeneracyError("map collapses the subspace (image volume < 1e-12)")
    return Subspace(orthonormal_columns(image, rank=space.dim))


@dataclass(slots=True)
class SplittingSample:
    """Direct-sum decomposition of the tangent space at one point.

    ``spaces`` are ordered by increasing growth rate; ``dims`` are their
    dimensions (summing to the ambient dimension).  When exponent
    estimates are attached they must be strictly increasing with gaps
    above :data:`MERGE_GAP` — nearer blocks should have been merged.
    """

    base: np.ndarray
    spaces: tuple
    dims: tuple
    exponent_estimates: tuple | None = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.spaces = tuple(self.spaces)
        self.dims = tuple(int(v) for v in self.dims)
        if not self.spaces:
            raise InputError("a splitting needs at least one block")
        d = self.spaces[0].ambient_dim
        if self.base.shape != (d,):
            raise InputError(
                f"base point shape {self.base.shape} does not match ambient R^{d}"
            )
        if self.dims != tuple(s.dim for s in self.spaces):
            raise InputError(
                f"dims {self.dims} disagree with block dimensions "
                f"{tuple(s.dim for s in self.spaces)}"
            )
        if sum(self.dims) != d:
            raise InputError(f"block dimensions {self.dims} do not sum to {d}")
        direct_sum(self.spaces)  # raises DegeneracyError unless independent
        if self.exponent_estimates is not None:
            est = tuple(float(v) for v in self.exponent_estimates)
            if len(est) != len(self.spaces):
                raise InputError("one exponent estimate per block required")
            gaps = np.diff(est)
            if len(est) > 1 and np.min(gaps) <= MERGE_GAP:
                raise InputError(
                    f"exponent estimates {est} are not separated by more than "
                    f"{MERGE_GAP:g}; merge the blocks instead"
                )
            self.exponent_estimates = est

    @property
    def ambient_dim(self) -> int:
        return self.spaces[0].ambient_dim

    @property
    def block_count(self) -> int:
        return len(self.spaces)

    def independence(self) -> float:
        """Smallest eigenvalue of the blocks' pairwise-cosine matrix."""
        return independence_number(self.spaces)

    def to_json_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "block_dims": list(self.dims),
            "exponent_estimates": (
                None
                if self.exponent_estimates is None
                else list(self.exponent_estimates)
            ),
            "blocks": [space.basis.T.tolist() for space in self.spaces],
        }


def push_splitting(matrix, sample: SplittingSample, new_base) -> SplittingSample:
    """Push every block through the map and rebase the splitting.

    Transversality is re-checked by the constructor; a collapsed block
    propagates as a degeneracy error.
    """
    pushed = tuple(push_subspace(matrix, s) for s in sample.spaces)
    return SplittingSample(
        base=np.asarray(new_base, dtype=float),
        spaces=pushed,
        dims=sample.dims,
        exponent_estimates=sample.exponent_estimates,
    )


@dataclass(slots=True)
class FlagSample:
    """Nested filtration pair induced by a splitting at one point.

    ``filtration[i]`` is the sum of the slowest blocks up to level i+1
    and grows with i; ``cofiltration[i]`` is the sum of the remaining
    fast blocks and shrinks.  Both have k = (block count - 1) levels;
    ``level_dims`` are the filtration dimensions l_1 < ... < l_k.
    """

    base: np.ndarray
    filtration: tuple
    cofiltration: tuple
    level_dims: tuple

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.filtration = tuple(self.filtration)
        self.cofiltration = tuple(self.cofiltration)
        self.level_dims = tuple(int(v) for v in self.level_dims)
        k = len(self.filtration)
        if k == 0 or len(self.cofiltration) != k or len(self.level_dims) != k:
            raise InputError("filtration, cofiltration and level_dims must share k >= 1")
        d = self.filtration[0].ambient_dim
        if self.base.shape != (d,):
            raise InputError(
                f"base point shape {self.base.shape} does not match ambient R^{d}"
            )
        for i in range(k):
            if self.filtration[i].dim != self.level_dims[i]:
                raise InputError(
                    f"filtration level {i + 1} has dim {self.filtration[i].dim}, "
                    f"expected {self.level_dims[i]}"
                )
            if self.cofiltration[i].dim != d - self.level_dims[i]:
                raise InputError(
                    f"cofiltration level {i + 1} has dim {self.cofiltration[i].dim}, "
                    f"expected {d - self.level_dims[i]}"
                )
        if any(b <= a for a, b in zip(self.level_dims[:-1], self.level_dims[1:])):
            raise InputError(f"level dims {self.level_dims} must increase strictly")
        for i in range(k - 1):
            if not self.filtration[i + 1].contains(self.filtration[i], _NEST_TOL):
                raise InputError(f"filtration level {i + 1} not nested in level {i + 2}")
            if not self.cofiltration[i].contains(self.cofiltration[i + 1], _NEST_TOL):
                raise InputError(f"cofiltration level {i + 2} not nested in level {i + 1}")

    @property
    def ambient_dim(self) -> int:
        return self.filtration[0].ambient_dim

    @property
    def level_count(self) -> int:
        return len(self.filtration)


def splitting_to_flag(sample: SplittingSample) -> FlagSample:
    """Partial direct sums of a splitting, from both ends.

    A splitting with s blocks yields k = s - 1 levels: level i sums the
    i slowest blocks (filtration) and the s - i fastest (cofiltration).
    """
    s = sample.block_count
    if s < 2:
        raise InputError("a single-block splitting induces an empty flag")
    filtration = []
    cofiltration = []
    level_dims = []
    for i in range(1, s):
        filtration.append(direct_sum(sample.spaces[:i]))
        cofiltration.append(direct_sum(sample.spaces[i:]))
        level_dims.append(sum(sample.dims[:i]))
    return FlagSample(
        base=sample.base,
        filtration=tuple(filtration),
        cofiltration=tuple(cofiltration),
        level_dims=tuple(level_dims),
    )


def flag_to_splitting(
    flag: FlagSample, exponent_estimates=None, tol: float = 1e-8
) -> SplittingSample:
    """Recover the splitting whose partial sums produced a flag.

    The first block is the first filtration level, the last block the
    last cofiltration level, and each middle block the intersection of
    a filtration level with the previous cofiltration level (computed
    through principal vectors).  Raises an input error when an
    intersection does not have the dimension forced by the level
    dimensions — the flag is then not in the image of any splitting.
    """
    k = flag.level_count
    d = flag.ambient_dim
    spaces = [flag.filtration[0]]
    for i in range(1, k):
        expected = flag.level_dims[i] - flag.level_dims[i - 1]
        shared = subspace_intersection(flag.filtration[i], flag.cofiltration[i - 1], tol)
        got = 0 if shared is None else shared.dim
        if got != expected:
            raise InputError(
                f"flag level {i + 1}: intersection dimension {got} != {expected}; "
                "flag does not come from a splitting"
            )
        spaces.append(shared)
    spaces.append(flag.cofiltration[k - 1])
    dims = tuple(s.dim for s in spaces)
    return SplittingSample(
        base=flag.base,
        spaces=tuple(spaces),
        dims=dims,
        exponent_estimates=exponent_estimates,
    )


def _flag_level(flag: FlagSample, level: int, which: tuple) -> Subspace:
    if not 1 <= level <= flag.level_count:
        raise InputError(
            f"level {level} out of range 1..{flag.level_count} (levels are 1-based)"
        )
    return which[level - 1]


def filtration_log_det(level: int, matrix, flag: FlagSample) -> float:
    """log |det| of a map restricted to filtration level ``level`` (1-based)."""
    space = _flag_level(flag, level, flag.filtration)
    return _restricted_det_checked(np.asarray(matrix, dtype=float), space)


def cofiltration_log_det(level: int, matrix, flag: FlagSample) -> float:
    """log |det| of a map restricted to cofiltration level ``level`` (1-based)."""
    space = _flag_level(flag, level, flag.cofiltration)
    return _restricted_det_checked(np.asarray(matrix, dtype=float), space)


def _restricted_det_checked(matrix: np.ndarray, space: Subspace) -> float:
    value = det_restricted(matrix, space)
    if value <= 0.0:
        raise DegeneracyError("map is singular on the requested flag level")
    return float(np.log(value))
