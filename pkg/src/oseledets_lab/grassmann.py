"""Numerical geometry of linear subspaces of low-dimensional R^d.

Frames, volumes, restricted determinants, principal angles, the
projector-gap metric on Grassmannians, and the cosine Gram matrix whose
smallest eigenvalue quantifies how independent (transversal) a tuple of
subspaces is.  Everything here is dense double-precision linear algebra
on ambient dimensions up to :data:`MAX_AMBIENT_DIM`; all functions are
pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from oseledets_lab.errors import DegeneracyError, InputError

__all__ = [
    "MAX_AMBIENT_DIM",
    "DEGENERACY_TOL",
    "Frame",
    "Subspace",
    "GramAngleMatrix",
    "vol",
    "det_restricted",
    "min_angle",
    "normalized_projection",
    "subspace_distance",
    "gram_angle_matrix",
    "independence_number",
    "direct_sum",
    "orthonormal_columns",
    "subspace_intersection",
]

MAX_AMBIENT_DIM = 8
DEGENERACY_TOL = 1e-10
_FRAME_VOL_TOL = 1e-12
_ORTHO_TOL = 1e-12


def _as_column_matrix(vectors) -> np.ndarray:
    """Coerce a (d, p) array or a sequence of p vectors to a (d, p) matrix."""
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim == 2 and not isinstance(vectors, np.ndarray):
        # sequence-of-vectors input: rows are vectors, transpose to columns
        arr = arr.T
    if arr.ndim != 2:
        raise InputError(f"expected vectors forming a 2-d array, got shape {arr.shape}")
    return arr


def _raw_vol(matrix: np.ndarray) -> float:
    """Product of singular values of a (d, p) matrix (Gram-determinant root)."""
    if matrix.shape[1] > matrix.shape[0]:
        return 0.0
    return float(np.prod(np.linalg.svd(matrix, compute_uv=False)))


@dataclass(slots=True)
class Frame:
    """An ordered tuple of p linearly independent vectors in R^d.

    ``vectors`` is stored as a d x p matrix whose columns are the frame
    vectors.  Construction rejects dependent frames (volume below
    1e-12); use :func:`vol` directly for possibly-degenerate inputs.
    """

    vectors: np.ndarray

    def __post_init__(self):
        mat = _as_column_matrix(self.vectors)
        if mat.shape[0] > MAX_AMBIENT_DIM:
            raise InputError(
                f"ambient dimension {mat.shape[0]} exceeds the supported "
                f"maximum {MAX_AMBIENT_DIM}"
            )
        if mat.shape[1] > mat.shape[0] or mat.shape[1] == 0:
            raise InputError(
                f"frame of {mat.shape[1]} vectors in R^{mat.shape[0]} is not valid"
            )
        if not np.all(np.isfinite(mat)):
            raise InputError("frame vectors must be finite")
        if _raw_vol(mat) <= _FRAME_VOL_TOL:
            raise DegeneracyError("frame vectors are linearly dependent")
        self.vectors = mat

    @classmethod
    def from_vectors(cls, *vectors) -> "Frame":
        return cls(np.column_stack([np.asarray(v, dtype=float) for v in vectors]))

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def count(self) -> int:
        return self.vectors.shape[1]


@dataclass(slots=True)
class Subspace:
    """A p-dimensional linear subspace of R^d, held as an orthonormal basis.

    ``basis`` is a d x p matrix with orthonormal columns (checked to
    1e-12 at construction).  Use :meth:`from_spanning` to build one from
    an arbitrary spanning set, or :meth:`line` for one-dimensional
    spans.
    """

    basis: np.ndarray

    def __post_init__(self):
        mat = np.array(self.basis, dtype=float)
        if mat.ndim == 1:
            mat = mat[:, None]
        if mat.ndim != 2:
            raise InputError(f"basis must be a matrix, got shape {mat.shape}")
        d, p = mat.shape
        if not (1 <= p <= d):
            raise InputError(f"subspace dimension {p} invalid in R^{d}")
        if d > MAX_AMBIENT_DIM:
            raise InputError(
                f"ambient dimension {d} exceeds the supported maximum {MAX_AMBIENT_DIM}"
            )
        gram = mat.T @ mat
        if np.max(np.abs(gram - np.eye(p))) >= _ORTHO_TOL:
            raise InputError("basis columns are not orthonormal (deviation >= 1e-12)")
        self.basis = mat

    @classmethod
    def from_spanning(cls, vectors) -> "Subspace":
        """Orthonormalize an arbitrary spanning set (rank-revealing)."""
        mat = _as_column_matrix(vectors)
        basis = orthonormal_columns(mat)
        if basis.shape[1] == 0:
            raise DegeneracyError("spanning set has numerical rank 0")
        return cls(basis)

    @classmethod
    def line(cls, vector) -> "Subspace":
        v = np.asarray(vector, dtype=float)
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise InputError("cannot span a line with the zero vector")
        return cls((v / nrm)[:, None])

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """The d x d orthogonal projector onto this subspace."""
        return self.basis @ self.basis.T

    def contains(self, other: "Subspace", tol: float = DEGENERACY_TOL) -> bool:
        """Whether ``other`` is contained in this subspace, up to ``tol``.

        Witnessed by the residual of other's basis under this
        subspace's projector.
        """
        _check_same_ambient(self, other)
        if other.dim > self.dim:
            return False
        resid = other.basis - self.projector() @ other.basis
        return float(np.linalg.norm(resid, 2)) < tol


@dataclass(slots=True)
class GramAngleMatrix:
    """Pairwise-cosine matrix of a subspace tuple, with its bottom eigenvalue.

    Entry (i, j) for i != j is the cosine of the smallest principal
    angle between the i-th and j-th subspaces; the diagonal is
    identically 1 (unit-volume normalization, so the matrix measures
    transversality only).  The smallest eigenvalue is positive exactly
    when the tuple forms a direct sum.
    """

    entries: np.ndarray
    smallest_eigenvalue: float = field(default=np.nan)

    def __post_init__(self):
        mat = np.array(self.entries, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise InputError("entries must form a nonempty square matrix")
        if np.max(np.abs(mat - mat.T)) >= _ORTHO_TOL:
            raise InputError("gram angle matrix must be symmetric")
        if np.max(np.abs(np.diag(mat) - 1.0)) >= _ORTHO_TOL:
            raise InputError("gram angle matrix diagonal must be 1")
        self.entries = mat
        if np.isnan(self.smallest_eigenvalue):
            self.smallest_eigenvalue = float(np.linalg.eigvalsh(mat)[0])


def _check_same_ambient(*spaces: Subspace) -> int:
    dims = {s.ambient_dim for s in spaces}
    if len(dims) != 1:
        raise InputError(f"subspaces live in different ambient dimensions {sorted(dims)}")
    return dims.pop()


def vol(frame) -> float:
    """Volume of a frame: the product of its singular values.

    Equals |det A| for the transition matrix A expressing the frame over
    any orthonormal frame of its span (equivalently the square root of
    the Gram determinant), and is independent of that choice.  Accepts a
    :class:`Frame`, a d x p matrix of columns, or a sequence of vectors;
    dependent inputs return 0.0.
    """
    if isinstance(frame, Frame):
        mat = frame.vectors
    else:
        mat = _as_column_matrix(frame)
    if not np.all(np.isfinite(mat)):
        raise InputError("frame vectors must be finite")
    return _raw_vol(mat)


def det_restricted(matrix, space: Subspace) -> float:
    """|det| of a linear map restricted to a subspace.

    Computed as vol(L b) for an orthonormal basis b of the subspace;
    independent of the basis choice.  Returns 0.0 when the map collapses
    the subspace.
    """
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] != space.ambient_dim:
        raise InputError(
            f"matrix acts on R^{mat.shape[0]} but subspace lives in "
            f"R^{space.ambient_dim}"
        )
    return _raw_vol(mat @ space.basis)


def min_angle(first: Subspace, second: Subspace) -> float:
    """Smallest principal angle between two subspaces, in [0, pi/2].

    Zero exactly when the subspaces intersect nontrivially; realized as
    the arcsine of the infimum of normalized wedge-product norms over
    vector pairs.
    """
    _check_same_ambient(first, second)
    angles = subspace_angles(first.basis, second.basis)
    return float(np.min(angles)) if angles.size else 0.0


def normalized_projection(vector, space: Subspace) -> np.ndarray:
    """Orthogonal projection of v/||v|| onto the subspace; 0 maps to 0."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (space.ambient_dim,):
        raise InputError(
            f"vector of shape {v.shape} does not live in R^{space.ambient_dim}"
        )
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        return np.zeros(space.ambient_dim)
    return space.basis @ (space.basis.T @ (v / nrm))


def subspace_distance(first: Subspace, second: Subspace) -> float:
    """Gap metric between subspaces: operator norm of the projector difference.

    For equal dimensions this equals the sine of the largest principal
    angle; for unequal dimensions it is identically 1.  A genuine metric
    on each fixed-dimension Grassmannian, with values in [0, 1].
    Symmetry is exact: the operands are ordered canonically before the
    difference is formed, so both argument orders evaluate the same
    matrix.
    """
    _check_same_ambient(first, second)
    if first.dim != second.dim:
        return 1.0
    pa, pb = first.projector(), second.projector()
    if pa.tobytes() <= pb.tobytes():
        diff = pb - pa
    else:
        diff = pa - pb
    return min(float(np.linalg.norm(diff, 2)), 1.0)


def gram_angle_matrix(spaces) -> GramAngleMatrix:
    """Pairwise cosine matrix of a tuple of subspaces.

    Off-diagonal entries are cosines of smallest principal angles
    (largest singular value of the product of orthonormal bases computed
    directly, avoiding an arccos/cos round trip); the diagonal is 1.
    """
    spaces = list(spaces)
    if not spaces:
        raise InputError("gram_angle_matrix requires at least one subspace")
    _check_same_ambient(*spaces)
    t = len(spaces)
    entries = np.eye(t)
    for i in range(t):
        for j in range(i + 1, t):
            prod = spaces[i].basis.T @ spaces[j].basis
            cosine = float(np.linalg.svd(prod, compute_uv=False)[0]) if prod.size else 0.0
            entries[i, j] = entries[j, i] = min(cosine, 1.0)
    return GramAngleMatrix(entries)


def independence_number(spaces) -> float:
    """Smallest eigenvalue of the pairwise-cosine matrix of the tuple.

    Strictly positive exactly when the subspaces form a direct sum; for
    two lines at angle theta it equals 1 - cos(theta), reaching 1 for
    orthogonal lines.
    """
    return gram_angle_matrix(spaces).smallest_eigenvalue


def direct_sum(spaces, tol: float = DEGENERACY_TOL) -> Subspace:
    """Orthonormalized span of a tuple of subspaces forming a direct sum.

    Raises a degeneracy error when the concatenated bases have volume
    below ``tol`` (the tuple is not independent).
    """
    spaces = list(spaces)
    if not spaces:
        raise InputError("direct_sum requires at least one subspace")
    d = _check_same_ambient(*spaces)
    stacked = np.column_stack([s.basis for s in spaces])
    if stacked.shape[1] > d or _raw_vol(stacked) < tol:
        raise DegeneracyError(
            f"subspaces of dimensions {[s.dim for s in spaces]} do not form a "
            f"direct sum in R^{d}"
        )
    return Subspace(orthonormal_columns(stacked, rank=stacked.shape[1]))


def orthonormal_columns(matrix, rank: int | None = None, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column span of a matrix, via SVD.

    With ``rank`` given, exactly that many leading singular directions
    are returned (no thresholding); otherwise the numerical rank at
    relative tolerance ``tol`` decides.
    """
    mat = np.asarray(matrix, dtype=float)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if rank is None:
        cutoff = tol * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > cutoff))
    return u[:, :rank]


def subspace_intersection(
    first: Subspace, second: Subspace, tol: float = 1e-8
) -> Subspace | None:
    """Intersection of two subspaces via principal vectors.

    Directions whose principal cosine exceeds 1 - tol are taken as
    shared; returns None when the intersection is trivial.
    """
    _check_same_ambient(first, second)
    u, s, _ = np.linalg.svd(first.basis.T @ second.basis)
    count = int(np.sum(s >= 1.0 - tol))
    if count == 0:
        return None
    shared = first.basis @ u[:, :count]
    return Subspace(orthonormal_columns(shared, rank=count))
