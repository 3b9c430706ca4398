"""Finite-window uniformity-block membership tests.

A nonuniformly hyperbolic point belongs to the k-th uniformity block
for rates (alpha, beta) and slack epsilon when, along its whole orbit,
iterates of the cocycle contract the stable bundle and (backwards) the
unstable bundle at the stated rates up to e^{epsilon k}-loose constants
that may degrade like e^{epsilon |m|} along the orbit, while the angle
between the bundles stays bounded below in the same loose sense.

A desk-scale test can only certify a finite window m in [-M, M],
n in [1, N]; the report always carries that window.  Margins are the
worst log-scale slack of each family of inequalities (negative means a
violation), so the dependence on k is exactly affine with slope
epsilon — which :func:`smallest_k` exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oseledets_lab import _kernels as _k
from oseledets_lab import systems as _systems
from oseledets_lab.errors import DegeneracyError, DivergenceError, InputError
from oseledets_lab.grassmann import Subspace, direct_sum, min_angle

__all__ = ["PesinParams", "PesinReport", "pesin_check", "smallest_k"]

_MAX_BLOCK_INDEX = 64
_RIGHT_ANGLE_GUARD = 1e-12


@dataclass(slots=True)
class PesinParams:
    """Rates, slack, block index, and check window.

    ``alpha`` is the demanded backward contraction rate of the unstable
    bundle, ``beta`` the forward contraction rate of the stable bundle,
    and ``epsilon`` the slack; "much larger" is operationalized as a
    factor of ten, so alpha >= 10 epsilon and beta >= 10 epsilon are
    required.  ``m_range``/``n_range`` bound the along-orbit shifts and
    iterate counts actually tested.
    """

    alpha: float
    beta: float
    epsilon: float
    k: int
    m_range: int
    n_range: int

    def __post_init__(self):
        self.alpha = float(self.alpha)
        self.beta = float(self.beta)
        self.epsilon = float(self.epsilon)
        self.k = int(self.k)
        self.m_range = int(self.m_range)
        self.n_range = int(self.n_range)
        for name in ("alpha", "beta", "epsilon"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InputError(f"{name} must be positive and finite")
        if self.alpha < 10.0 * self.epsilon or self.beta < 10.0 * self.epsilon:
            raise InputError("alpha and beta must both be at least 10 * epsilon")
        if self.k < 1:
            raise InputError("block index k must be a positive integer")
        if self.m_range < 0 or self.n_range < 1:
            raise InputError("m_range must be >= 0 and n_range >= 1")

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "k": self.k,
            "m_range": self.m_range,
            "n_range": self.n_range,
        }


@dataclass(slots=True)
class PesinReport:
    """Outcome of one block-membership check.

    ``worst_margins`` holds the minimal log-scale slack of the stable
    contraction (a), unstable backward contraction (b), and angle (c)
    inequalities over the tested window; the check passes when all
    three are nonnegative.  ``audit``, when requested, maps each margin
    family to its full per-(m, n) grid.
    """

    passed: bool
    worst_margins: tuple
    params: PesinParams
    audit: dict | None = None

    def to_json_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "worst_margins": {
                "a": self.worst_margins[0],
                "b": self.worst_margins[1],
                "c": self.worst_margins[2],
            },
            "params": self.params.to_json_dict(),
        }
        if self.audit is not None:
            out["audit"] = {
                "m_values": list(self.audit["m_values"]),
                "n_values": list(self.audit["n_values"]),
                "a": np.asarray(self.audit["a"]).tolist(),
                "b": np.asarray(self.audit["b"]).tolist(),
                "c": np.asarray(self.audit["c"]).tolist(),
            }
        return out


def _transport_bundle(sys, fwd_pts, bwd_pts, basis, depth):
    """Orthonormal frames and one-step factors of a bundle along the orbit.

    Returns (frames, factors) where frames[depth + m] spans the
    transported bundle at f^m x for m in [-depth, depth] and
    factors[depth + j] is the upper-triangular matrix of the one-step
    cocycle from frame j to frame j+1, for j in [-depth, depth - 1].
    Restricted norms over any step window are then singular values of a
    product of these small triangular factors — no transported vector
    is ever longer than one step from an orthonormal anchor.
    """
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    p = basis.shape[1]
    frames_f, rfacs_f, status = _k.push_frame_steps(
        code, mat, delta, ha, hb, np.ascontiguousarray(fwd_pts[:depth]), basis, False
    )
    if status >= 0:
        raise DegeneracyError(f"degenerate forward transport at step {status}")
    frames_b, rfacs_b, status = _k.push_frame_steps(
        code, mat, delta, ha, hb, np.ascontiguousarray(bwd_pts[1:]), basis, True
    )
    if status >= 0:
        raise DegeneracyError(f"degenerate backward transport at step {status}")
    d = basis.shape[0]
    frames = np.empty((2 * depth + 1, d, p))
    factors = np.empty((2 * depth, p, p))
    for m in range(depth + 1):
        frames[depth + m] = frames_f[m]
        if m > 0:
            frames[depth - m] = frames_b[m]
    for j in range(depth):
        factors[depth + j] = rfacs_f[j]
    for j in range(depth):
        # backward factor k solves J(y_{-(k+1)}) Q_{-(k+1)} = Q_{-k} R^{-1}
        factors[depth - 1 - j] = np.linalg.inv(rfacs_b[j])
    return frames, factors


def _largest_sv(matrix: np.ndarray) -> float:
    if matrix.shape == (1, 1):
        return abs(float(matrix[0, 0]))
    return float(np.linalg.svd(matrix, compute_uv=False)[0])


def _smallest_sv(matrix: np.ndarray) -> float:
    if matrix.shape == (1, 1):
        return abs(float(matrix[0, 0]))
    return float(np.linalg.svd(matrix, compute_uv=False)[-1])


def pesin_check(
    sys: _systems.SystemSpec,
    x,
    stable: Subspace,
    unstable: Subspace,
    params: PesinParams,
    audit: bool = False,
) -> PesinReport:
    """Test membership of x in the k-th uniformity block over a finite window.

    The given stable/unstable subspaces at x are transported literally
    along the orbit (forward and backward pushes through the Jacobian
    cocycle).  For every shift m in [-M, M] the check requires, for all
    n in [1, N]:

    - restricted forward iterates contract the stable bundle:
      ||Df^n| restricted to the stable space at f^m x|| <=
      e^{epsilon k} e^{-(beta - epsilon) n} e^{epsilon |m|};
    - restricted backward iterates contract the unstable bundle at
      rate alpha in the same loose sense;
    - tan of the angle between the bundles at f^m x stays above
      e^{-epsilon k} e^{-epsilon |m|}.

    Restricted norms are largest singular values.  Note the forward
    transport of a stable space (and backward transport of an unstable
    one) amplifies input error exponentially; certifying large windows
    therefore demands correspondingly accurate input subspaces.
    """
    pt = np.asarray(x, dtype=float)
    d = sys.ambient_dim
    if pt.shape != (d,):
        raise InputError(f"point must have dimension {d}")
    if stable.ambient_dim != d or unstable.ambient_dim != d:
        raise InputError("subspace ambient dimension mismatch")
    if stable.dim + unstable.dim != d:
        raise InputError("stable and unstable dimensions must sum to the ambient")
    direct_sum((stable, unstable))
    big_m = params.m_range
    big_n = params.n_range
    depth = big_m + big_n
    code, mat, matinv, delta, ha, hb = _systems.kernel_args(sys)
    fwd_pts, status = _k.orbit_forward(code, mat, delta, ha, hb, pt, depth)
    if status >= 0:
        raise DivergenceError(f"forward orbit escaped at step {status}")
    bwd_pts, status = _k.orbit_backward(code, mat, matinv, delta, ha, hb, pt, depth)
    if status >= 0:
        raise DivergenceError(f"backward orbit failed at step {status}")
    s_frames, s_factors = _transport_bundle(sys, fwd_pts, bwd_pts, stable.basis, depth)
    u_frames, u_factors = _transport_bundle(sys, fwd_pts, bwd_pts, unstable.basis, depth)
    eps = params.epsilon
    loose = eps * params.k
    m_values = np.arange(-big_m, big_m + 1)
    n_values = np.arange(1, big_n + 1)
    a_margins = np.empty((m_values.size, big_n))
    b_margins = np.empty((m_values.size, big_n))
    c_margins = np.empty(m_values.size)
    for mi, m in enumerate(m_values):
        allowance = loose + eps * abs(int(m))
        prod = np.eye(stable.dim)
        for ni, n in enumerate(n_values):
            prod = s_factors[depth + m + n - 1] @ prod
            a_margins[mi, ni] = (
                allowance - (params.beta - eps) * n - np.log(_largest_sv(prod))
            )
        prod = np.eye(unstable.dim)
        for ni, n in enumerate(n_values):
            prod = prod @ u_factors[depth + m - n]
            # ||Df^{-n}| restricted|| is the reciprocal smallest singular
            # value of the forward product over [m - n, m)
            b_margins[mi, ni] = (
                allowance - (params.alpha - eps) * n + np.log(_smallest_sv(prod))
            )
        angle = min_angle(Subspace(s_frames[depth + m]), Subspace(u_frames[depth + m]))
        angle = min(angle, np.pi / 2 - _RIGHT_ANGLE_GUARD)
        # a fully collapsed angle is reported as margin -inf, not a warning
        with np.errstate(divide="ignore"):
            c_margins[mi] = np.log(np.tan(angle)) + allowance
    worst = (
        float(a_margins.min()),
        float(b_margins.min()),
        float(c_margins.min()),
    )
    report_audit = None
    if audit:
        report_audit = {
            "m_values": m_values.tolist(),
            "n_values": n_values.tolist(),
            "a": a_margins,
            "b": b_margins,
            "c": c_margins,
        }
    return PesinReport(
        passed=bool(min(worst) >= 0.0),
        worst_margins=worst,
        params=params,
        audit=report_audit,
    )


def smallest_k(
    sys: _systems.SystemSpec,
    x,
    stable: Subspace,
    unstable: Subspace,
    alpha: float,
    beta: float,
    epsilon: float,
    m_range: int,
    n_range: int,
):
    """Smallest block index k <= 64 certifying x over the given window.

    Margins are affine in k with slope epsilon, so the index is found
    in closed form from the k = 1 margins and confirmed with a single
    additional check.  Returns None when no admissible index suffices.
    """
    base = PesinParams(
        alpha=alpha, beta=beta, epsilon=epsilon, k=1, m_range=m_range, n_range=n_range
    )
    report = pesin_check(sys, x, stable, unstable, base)
    worst = min(report.worst_margins)
    if worst >= 0.0:
        return 1
    candidate = 1 + int(np.ceil(-worst / base.epsilon - 1e-12))
    while candidate <= _MAX_BLOCK_INDEX:
        params = PesinParams(
            alpha=alpha,
            beta=beta,
            epsilon=epsilon,
            k=candidate,
            m_range=m_range,
            n_range=n_range,
        )
        if pesin_check(sys, x, stable, unstable, params).passed:
            return candidate
        candidate += 1
    return None
