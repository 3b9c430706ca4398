import numpy as np
import pytest

from oseledets_lab import cocycle, oseledets, systems
from oseledets_lab.errors import DegeneracyError, DivergenceError, InputError
from oseledets_lab.grassmann import Subspace
from oseledets_lab.pesin import PesinParams, pesin_check, smallest_k

CAT2_LOG = np.log((3 + np.sqrt(5)) / 2)


def cat2_bundles():
    _, vecs = np.linalg.eigh(np.array([[2.0, 1.0], [1.0, 1.0]]))
    return Subspace.line(vecs[:, 0]), Subspace.line(vecs[:, 1])


X0 = np.array([0.2, 0.4])


# ---------------------------------------------------------------------------
# parameter validation


def test_params_require_dominating_rates():
    # "rates much larger than the slack" is a factor of ten
    PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=1, m_range=0, n_range=1)
    with pytest.raises(InputError, match="10"):
        PesinParams(alpha=0.4, beta=0.5, epsilon=0.05, k=1, m_range=0, n_range=1)
    with pytest.raises(InputError, match="10"):
        PesinParams(alpha=0.5, beta=0.49, epsilon=0.05, k=1, m_range=0, n_range=1)


def test_params_reject_bad_values():
    good = dict(alpha=0.5, beta=0.5, epsilon=0.05, k=1, m_range=0, n_range=1)
    for bad in (
        dict(good, alpha=0.0),
        dict(good, epsilon=-0.01),
        dict(good, beta=np.inf),
        dict(good, k=0),
        dict(good, m_range=-1),
        dict(good, n_range=0),
    ):
        with pytest.raises(InputError):
            PesinParams(**bad)


def test_params_json_round_trip_fields():
    p = PesinParams(alpha=0.5, beta=0.6, epsilon=0.05, k=3, m_range=2, n_range=4)
    assert p.to_json_dict() == {
        "alpha": 0.5,
        "beta": 0.6,
        "epsilon": 0.05,
        "k": 3,
        "m_range": 2,
        "n_range": 4,
    }


# ---------------------------------------------------------------------------
# membership checks on the exactly known cat-map bundles


def test_exact_bundles_pass_with_slack_to_spare():
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=4, m_range=3, n_range=10)
    report = pesin_check(systems.cat2(), X0, slow, fast, params)
    assert report.passed
    # a uniformly hyperbolic line contracts at exactly the eigen rate,
    # so the binding margin is analytic: eps*k - (beta - eps) + rate
    want = 0.05 * 4 - 0.45 + CAT2_LOG
    assert report.worst_margins[0] == pytest.approx(want, abs=1e-10)
    assert report.worst_margins[1] == pytest.approx(want, abs=1e-10)
    assert report.worst_margins[2] > 27.0  # orthogonal bundles: angle margin huge


def test_overdemanding_rates_fail():
    # beta - eps = 0.99 exceeds the true contraction rate 0.9624, so
    # the deficit grows linearly in n and swamps the k = 1 allowance
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=1.0, beta=1.0, epsilon=0.01, k=1, m_range=1, n_range=10)
    report = pesin_check(systems.cat2(), X0, slow, fast, params)
    assert not report.passed
    want = 0.01 - 0.99 * 10 + 10 * CAT2_LOG
    assert report.worst_margins[0] == pytest.approx(want, abs=1e-9)
    assert report.worst_margins[0] < 0
    assert report.worst_margins[2] > 0  # the angle clause alone still holds


def test_margins_depend_on_m_only_through_the_allowance():
    # for a uniformly hyperbolic system the (m, n) margin minus the
    # eps*|m| allowance is the same at every along-orbit shift
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=4, m_range=3, n_range=6)
    report = pesin_check(systems.cat2(), X0, slow, fast, params, audit=True)
    m_values = np.asarray(report.audit["m_values"])
    assert m_values.tolist() == [-3, -2, -1, 0, 1, 2, 3]
    for family in ("a", "b"):
        grid = np.asarray(report.audit[family])
        detrended = grid - params.epsilon * np.abs(m_values)[:, None]
        assert np.abs(detrended - detrended[3]).max() < 1e-10
    c = np.asarray(report.audit["c"]) - params.epsilon * np.abs(m_values)
    assert np.abs(c - c[3]).max() < 1e-10


def test_audit_grids_have_window_shape():
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=2, m_range=2, n_range=5)
    report = pesin_check(systems.cat2(), X0, slow, fast, params, audit=True)
    assert np.shape(report.audit["a"]) == (5, 5)
    assert np.shape(report.audit["b"]) == (5, 5)
    assert np.shape(report.audit["c"]) == (5,)
    assert report.audit["n_values"] == [1, 2, 3, 4, 5]
    assert report.worst_margins[0] == np.asarray(report.audit["a"]).min()
    assert report.worst_margins[1] == np.asarray(report.audit["b"]).min()
    assert report.worst_margins[2] == np.asarray(report.audit["c"]).min()


def test_report_json_structure():
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=2, m_range=1, n_range=2)
    payload = pesin_check(systems.cat2(), X0, slow, fast, params, audit=True).to_json_dict()
    assert sorted(payload) == ["audit", "params", "passed", "worst_margins"]
    assert sorted(payload["worst_margins"]) == ["a", "b", "c"]
    assert payload["params"]["k"] == 2
    assert len(payload["audit"]["a"]) == 3
    no_audit = pesin_check(systems.cat2(), X0, slow, fast, params).to_json_dict()
    assert "audit" not in no_audit


def test_check_input_validation():
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.5, beta=0.5, epsilon=0.05, k=1, m_range=1, n_range=2)
    with pytest.raises(InputError):
        pesin_check(systems.cat2(), [0.1, 0.2, 0.3], slow, fast, params)
    plane = Subspace.from_spanning(np.eye(2))
    with pytest.raises(InputError, match="sum"):
        pesin_check(systems.cat2(), X0, plane, fast, params)
    with pytest.raises(DegeneracyError):
        pesin_check(systems.cat2(), X0, slow, slow, params)


def test_check_needs_a_bounded_orbit():
    slow, fast = cat2_bundles()
    params = PesinParams(alpha=0.1, beta=0.1, epsilon=0.01, k=1, m_range=1, n_range=2)
    with pytest.raises(DivergenceError):
        pesin_check(systems.henon(1.4, 0.3), [10.0, 0.0], slow, fast, params)


# ---------------------------------------------------------------------------
# smallest certifying block index


def test_smallest_index_is_one_with_easy_rates():
    slow, fast = cat2_bundles()
    assert smallest_k(systems.cat2(), X0, slow, fast, 0.5, 0.5, 0.05, 3, 10) == 1


def test_smallest_index_from_affine_margins():
    # the k = 1 deficit is 0.05 - 10*(1.0 - 0.9624...) and each unit of
    # k buys 0.05 of slack, which lands exactly on k = 8
    slow, fast = cat2_bundles()
    assert smallest_k(systems.cat2(), X0, slow, fast, 1.05, 1.05, 0.05, 0, 10) == 8


def test_no_admissible_index_returns_none():
    slow, fast = cat2_bundles()
    assert smallest_k(systems.cat2(), X0, slow, fast, 1.5, 1.5, 0.15, 0, 30) is None


def test_smallest_index_is_tight_on_the_plane_map():
    sysh = systems.henon(1.4, 0.3)
    seg = cocycle.generate_orbit(sysh, [0.1, 0.1], 1000)
    x = seg.points[-1]
    stable, unstable = oseledets.estimate_splitting(sysh, x, 12).spaces
    k = smallest_k(sysh, x, stable, unstable, 0.2, 0.2, 0.02, 2, 5)
    assert k is not None and k >= 1
    at_k = PesinParams(alpha=0.2, beta=0.2, epsilon=0.02, k=k, m_range=2, n_range=5)
    assert pesin_check(sysh, x, stable, unstable, at_k).passed
    if k > 1:
        below = PesinParams(
            alpha=0.2, beta=0.2, epsilon=0.02, k=k - 1, m_range=2, n_range=5
        )
        assert not pesin_check(sysh, x, stable, unstable, below).passed
