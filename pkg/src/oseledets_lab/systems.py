"""Hyperbolic model systems on flat phase spaces.

Three families share one small descriptor type: integer unimodular
torus automorphisms x -> A x (mod 1), their sine-sheared perturbations
x -> A x + (delta/2pi) sin(2pi x_2) e_1 (mod 1), and the quadratic
plane map (x_1, x_2) -> (1 - a x_1^2 + x_2, b x_1).  Points are plain
float arrays; torus coordinates are reduced into [0, 1) after every
application.  All maps are invertible: the torus kinds by exact integer
inverse matrices (the perturbed inverse solved by fixed-point
iteration), the plane map in closed form.

The perturbed family is intended for small amplitudes (delta <= 0.1);
larger values are accepted but nothing guarantees hyperbolicity there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oseledets_lab import _kernels as _k
from oseledets_lab import rng
from oseledets_lab.errors import DivergenceError, InputError
from oseledets_lab.grassmann import MAX_AMBIENT_DIM

__all__ = [
    "KIND_NAMES",
    "SystemSpec",
    "SpectrumReport",
    "toral_automorphism",
    "perturbed_toral",
    "henon",
    "cat2",
    "a3",
    "apply",
    "apply_inverse",
    "apply_lift",
    "jacobian",
    "validate_hyperbolic",
    "phase_distance",
    "torus_delta",
    "random_phase_point",
]

KIND_NAMES = ("toral_automorphism", "perturbed_toral", "henon")
_KIND_CODES = {
    "toral_automorphism": _k.KIND_TORAL,
    "perturbed_toral": _k.KIND_PERTURBED,
    "henon": _k.KIND_HENON,
}
_UNIT_MODULUS_TOL = 1e-8


def _validate_toral_matrix(matrix) -> np.ndarray:
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"torus matrix must be square, got shape {mat.shape}")
    d = mat.shape[0]
    if not (2 <= d <= MAX_AMBIENT_DIM):
        raise InputError(f"torus dimension must be in [2, {MAX_AMBIENT_DIM}], got {d}")
    if not np.allclose(mat, np.round(mat), atol=1e-12):
        raise InputError("torus matrix entries must be integers")
    mat = np.round(mat)
    det = round(float(np.linalg.det(mat)))
    if abs(det) != 1:
        raise InputError(f"torus matrix must be unimodular, |det| = {abs(det)}")
    moduli = np.abs(np.linalg.eigvals(mat))
    if np.any(np.abs(moduli - 1.0) < _UNIT_MODULUS_TOL):
        raise InputError(
            "torus matrix is not hyperbolic: eigenvalue modulus within "
            f"{_UNIT_MODULUS_TOL:g} of 1 (moduli {np.sort(moduli)})"
        )
    return mat


@dataclass(slots=True)
class SystemSpec:
    """Descriptor of one model system.

    ``matrix`` is the integer matrix of the torus kinds (ignored for the
    plane map); ``delta`` the shear amplitude of the perturbed kind;
    ``henon_a``/``henon_b`` the plane-map coefficients.  Validation at
    construction enforces unimodularity and hyperbolicity of torus
    matrices, nonnegative ``delta``, and nonzero ``henon_b``.
    """

    kind: str
    matrix: np.ndarray | None = None
    delta: float = 0.0
    henon_a: float = 1.4
    henon_b: float = 0.3

    def __post_init__(self):
        if self.kind not in KIND_NAMES:
            raise InputError(f"unknown system kind {self.kind!r} (expected {KIND_NAMES})")
        if self.kind == "henon":
            if self.henon_b == 0.0:
                raise InputError("plane map requires a nonzero second coefficient")
            self.matrix = None
        else:
            if self.matrix is None:
                raise InputError(f"kind {self.kind!r} requires an integer matrix")
            self.matrix = _validate_toral_matrix(self.matrix)
            if self.kind == "perturbed_toral":
                if not np.isfinite(self.delta) or self.delta < 0.0:
                    raise InputError(f"perturbation amplitude must be >= 0, got {self.delta}")
            else:
                self.delta = 0.0

    @property
    def ambient_dim(self) -> int:
        return 2 if self.kind == "henon" else self.matrix.shape[0]

    @property
    def is_toral(self) -> bool:
        return self.kind != "henon"

    def matrix_inverse(self) -> np.ndarray:
        """Exact integer inverse of the torus matrix (unimodularity)."""
        if self.matrix is None:
            raise InputError("plane map has no torus matrix")
        inv = np.round(np.linalg.inv(self.matrix))
        if not np.array_equal(self.matrix @ inv, np.eye(self.ambient_dim)):
            raise InputError("integer inverse verification failed")
        return inv

    def to_json_dict(self) -> dict:
        if self.kind == "henon":
            return {"kind": self.kind, "a": self.henon_a, "b": self.henon_b}
        out = {"kind": self.kind, "matrix": self.matrix.astype(int).tolist()}
        if self.kind == "perturbed_toral":
            out["delta"] = self.delta
        return out


def toral_automorphism(matrix) -> SystemSpec:
    """Torus automorphism x -> A x (mod 1) for a unimodular hyperbolic A."""
    return SystemSpec(kind="toral_automorphism", matrix=matrix)


def perturbed_toral(matrix, delta: float) -> SystemSpec:
    """Sheared automorphism x -> A x + (delta/2pi) sin(2pi x_2) e_1 (mod 1)."""
    return SystemSpec(kind="perturbed_toral", matrix=matrix, delta=delta)


def henon(a: float = 1.4, b: float = 0.3) -> SystemSpec:
    """Quadratic plane map (x_1, x_2) -> (1 - a x_1^2 + x_2, b x_1)."""
    return SystemSpec(kind="henon", henon_a=a, henon_b=b)


def cat2() -> SystemSpec:
    """The standard 2-d hyperbolic automorphism [[2, 1], [1, 1]]."""
    return toral_automorphism([[2, 1], [1, 1]])


def a3() -> SystemSpec:
    """A 3-d unimodular symmetric example with three distinct exponents."""
    return toral_automorphism([[1, 1, 1], [1, 2, 2], [1, 2, 3]])


def kernel_args(sys: SystemSpec):
    """(kind code, matrix, inverse matrix, delta, a, b) for the kernel layer."""
    code = _KIND_CODES[sys.kind]
    if sys.is_toral:
        mat = sys.matrix
        matinv = sys.matrix_inverse()
    else:
        mat = np.eye(2)
        matinv = np.eye(2)
    return code, mat, matinv, sys.delta, sys.henon_a, sys.henon_b


def _mod1(x: np.ndarray) -> np.ndarray:
    y = x - np.floor(x)
    y[y >= 1.0] -= 1.0
    return y


def _check_point(sys: SystemSpec, x) -> np.ndarray:
    pt = np.asarray(x, dtype=float)
    if pt.shape != (sys.ambient_dim,):
        raise InputError(
            f"point of shape {pt.shape} does not live in the {sys.ambient_dim}-d "
            "phase space"
        )
    return pt


def apply(sys: SystemSpec, x) -> np.ndarray:
    """One application of the map; torus output reduced into [0, 1)^d."""
    pt = _check_point(sys, x)
    if sys.kind == "henon":
        return np.array([1.0 - sys.henon_a * pt[0] ** 2 + pt[1], sys.henon_b * pt[0]])
    return _mod1(apply_lift(sys, pt))


def apply_lift(sys: SystemSpec, x) -> np.ndarray:
    """The map without the final mod-1 reduction (torus kinds).

    The shear term sin(2 pi x_2) is 1-periodic, so the lift formula is
    the plane formula verbatim; useful for Newton iterations that must
    act on a continuous function.
    """
    pt = _check_point(sys, x)
    if sys.kind == "henon":
        return apply(sys, pt)
    y = sys.matrix @ pt
    if sys.kind == "perturbed_toral":
        y[0] += sys.delta / (2.0 * np.pi) * np.sin(2.0 * np.pi * pt[1])
    return y


def apply_inverse(sys: SystemSpec, x) -> np.ndarray:
    """One application of the inverse map.

    The perturbed-torus inverse solves f(y) = x by fixed-point iteration
    (a contraction for delta well below 1); non-convergence after 100
    sweeps raises a divergence error.
    """
    pt = _check_point(sys, x)
    code, mat, matinv, delta, ha, hb = kernel_args(sys)
    pts, status = _k.orbit_backward(code, mat, matinv, delta, ha, hb, pt, 1)
    if status >= 0:
        raise DivergenceError(
            f"inverse application failed at {pt} (fixed-point iteration stalled "
            "or orbit escaped)"
        )
    return pts[1]


def jacobian(sys: SystemSpec, x) -> np.ndarray:
    """Exact analytic Jacobian of the map at a point."""
    pt = _check_point(sys, x)
    if sys.kind == "toral_automorphism":
        return sys.matrix.copy()
    if sys.kind == "perturbed_toral":
        jac = sys.matrix.copy()
        jac[0, 1] += sys.delta * np.cos(2.0 * np.pi * pt[1])
        return jac
    return np.array([[-2.0 * sys.henon_a * pt[0], 1.0], [sys.henon_b, 0.0]])


@dataclass(slots=True)
class SpectrumReport:
    """Eigen-spectrum summary of a linear torus map.

    ``exponents`` are the logs of the eigenvalue moduli sorted
    increasing; ``block_dims`` the multiplicities of the distinct
    exponents (grouped at 1e-8).
    """

    moduli: tuple
    exponents: tuple
    block_dims: tuple

    @property
    def block_count(self) -> int:
        return len(self.block_dims)


def validate_hyperbolic(system_or_matrix) -> SpectrumReport:
    """Spectrum report for a torus matrix; rejects non-hyperbolic input.

    Accepts a torus-kind :class:`SystemSpec` or a raw integer matrix.
    Raises an input error when the matrix is not unimodular or has an
    eigenvalue of modulus within 1e-8 of 1 (equivalently an exponent
    within 1e-8 of 0).
    """
    if isinstance(system_or_matrix, SystemSpec):
        if not system_or_matrix.is_toral:
            raise InputError("spectrum validation applies to torus kinds only")
        mat = system_or_matrix.matrix
    else:
        mat = _validate_toral_matrix(system_or_matrix)
    moduli = np.sort(np.abs(np.linalg.eigvals(mat)))
    exponents = np.log(moduli)
    dims = [1]
    for prev, value in zip(exponents[:-1], exponents[1:]):
        if abs(value - prev) < 1e-8:
            dims[-1] += 1
        else:
            dims.append(1)
    return SpectrumReport(
        moduli=tuple(float(m) for m in moduli),
        exponents=tuple(float(e) for e in exponents),
        block_dims=tuple(dims),
    )


def torus_delta(x, y) -> np.ndarray:
    """Coordinatewise minimal circle displacement x - y on the torus."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return diff - np.round(diff)


def phase_distance(sys: SystemSpec, x, y) -> float:
    """Distance in the system's phase space.

    Torus kinds use the flat metric (minimal circle distance per
    coordinate, then the Euclidean norm); the plane map uses the plain
    Euclidean distance.
    """
    px, py = _check_point(sys, x), _check_point(sys, y)
    if sys.is_toral:
        return float(np.linalg.norm(torus_delta(px, py)))
    return float(np.linalg.norm(px - py))


def random_phase_point(sys: SystemSpec, seed: int, tag: str, *indices) -> np.ndarray:
    """Deterministic seeded point in the system's phase space.

    Torus kinds draw uniformly from [0, 1)^d; the plane map jitters
    around the origin (well inside the standard basin for the default
    coefficients).
    """
    gen = rng.stream(seed, tag, *indices)
    if sys.is_toral:
        return gen.random(sys.ambient_dim)
    return 0.01 * gen.standard_normal(2)
