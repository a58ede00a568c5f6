import math

import numpy as np
import pytest

from fracorder.soe import (
    SoeApprox,
    SoeConstructionError,
    build_soe,
    certified_sup_error,
    eval_soe,
    load_soe,
    save_soe,
)


def test_build_flagship_case():
    a = build_soe(0.5, 1e-4, 100.0, 1e-8)
    assert a.certified_error <= 1e-8
    assert 0 < len(a) < 2000
    assert np.all(a.nodes > 0.0)
    assert np.all(np.diff(a.nodes) > 0.0)
    assert np.all(a.weights > 0.0)


def test_build_beta_above_one():
    a = build_soe(1.5, 1e-3, 100.0, 1e-7)
    assert a.certified_error <= 1e-7


def test_node_count_monotone_in_difficulty():
    easy = build_soe(0.5, 1e-2, 1.0, 1e-4)
    hard = build_soe(0.5, 1e-4, 100.0, 1e-8)
    assert len(easy) < len(hard)


def test_eval_matches_kernel_at_anchor_points():
    a = build_soe(0.75, 1e-3, 10.0, 1e-6)
    for t in [a.delta, math.sqrt(a.delta * a.horizon), a.horizon]:
        assert abs(eval_soe(a, t) - t ** (-a.beta)) <= a.tol


def test_eval_vectorized_and_range_checked():
    a = build_soe(0.5, 1e-3, 10.0, 1e-6)
    t = np.geomspace(1e-3, 10.0, 7)
    vals = eval_soe(a, t)
    assert vals.shape == t.shape
    assert np.max(np.abs(vals - t ** (-0.5))) <= 1e-6
    with pytest.raises(ValueError):
        eval_soe(a, 0.4 * a.delta)
    with pytest.raises(ValueError):
        eval_soe(a, 2.1 * a.horizon)


def test_certificate_stable_under_grid_doubling():
    a = build_soe(0.5, 1e-3, 10.0, 1e-6)
    doubled = certified_sup_error(a, 20_000)
    assert abs(doubled - a.certified_error) < 0.1 * a.certified_error + 1e-16


def test_round_trip_is_exact(tmp_path):
    a = build_soe(1.25, 1e-3, 20.0, 1e-7)
    path = tmp_path / "kernel.txt"
    save_soe(a, path)
    b = load_soe(path)
    assert b.beta == a.beta and b.delta == a.delta
    assert b.horizon == a.horizon and b.tol == a.tol
    assert b.certified_error == a.certified_error
    assert np.array_equal(b.nodes, a.nodes)
    assert np.array_equal(b.weights, a.weights)


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text("not a table\n")
    with pytest.raises(ValueError):
        load_soe(path)


@pytest.mark.parametrize(
    "beta,delta,horizon,tol",
    [(0.0, 1e-3, 1.0, 1e-6), (2.0, 1e-3, 1.0, 1e-6),
     (0.5, 1.0, 0.5, 1e-6), (0.5, 1e-3, 1.0, 1.5)],
)
def test_build_rejects_bad_parameters(beta, delta, horizon, tol):
    with pytest.raises(ValueError):
        build_soe(beta, delta, horizon, tol)


def test_build_fails_honestly_below_roundoff():
    # delta**(-beta) ~ 1e6, so an absolute sup error of 1e-15 sits far below
    # the double-precision floor; the escalation ladder must give up.
    with pytest.raises(SoeConstructionError):
        build_soe(1.5, 1e-4, 1.0, 1e-15)


def test_invariants_enforced_on_construction():
    with pytest.raises(ValueError):
        SoeApprox(0.5, 1e-3, 1.0, 1e-6, np.array([2.0, 1.0]),
                  np.array([1.0, 1.0]), 1e-7)
    with pytest.raises(ValueError):
        SoeApprox(0.5, 1e-3, 1.0, 1e-6, np.array([1.0, 2.0]),
                  np.array([1.0, -1.0]), 1e-7)
