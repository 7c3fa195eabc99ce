import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.spatial.distance import cdist

from harmzero import catalog
from harmzero.strata import (
    EmptyZeroSetError,
    covering_number,
    derivative_labels,
    mdim_estimate,
    singular_set_sample,
    stratify,
    stratum_cloud,
    tube_slope,
    tube_volume,
)
from harmzero.zeroset import excess


def brute_greedy(P, s):
    """Same greedy cover with a dense distance matrix."""
    D = cdist(P, P)
    covered = np.zeros(len(P), dtype=bool)
    count = 0
    for i in range(len(P)):
        if not covered[i]:
            count += 1
            covered |= D[i] <= s
    return count


def test_covering_number_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(10):
        P = rng.random((300, int(rng.integers(1, 4))))
        s = float(rng.uniform(0.05, 0.4))
        assert covering_number(P, s) == brute_greedy(P, s)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_covering_number_bounds(seed):
    rng = np.random.default_rng(seed)
    P = rng.random((120, 2))
    s = float(rng.uniform(0.05, 0.5))
    N = covering_number(P, s, seed=seed)
    assert 1 <= N <= len(P)
    # greedy centres are more than s apart, so no s/2-ball holds two of them
    # and every cover by s/2-balls needs at least N balls
    assert covering_number(P, s / 2, seed=seed + 1) >= N


def test_mdim_segment_and_torus():
    t = np.linspace(0, 1, 20_001)
    seg = np.stack([t, 0.3 * t], axis=1)
    fit = mdim_estimate(seg, [0.005, 0.01, 0.02, 0.04])
    assert_allclose(fit.slope, 1.0, atol=0.05)
    # a flat torus in R^4 has no boundary term in its covering numbers
    u, v = np.random.default_rng(0).uniform(0, 2 * np.pi, (2, 60_000))
    torus = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=1) / math.sqrt(2)
    fit = mdim_estimate(torus, [0.04, 0.08, 0.16, 0.32])
    assert_allclose(fit.slope, 2.0, atol=0.1)
    with pytest.raises(ValueError):
        mdim_estimate(torus, [0.1, 0.2])


def test_derivative_labels_cross3():
    # x1 x2 in R^3: degree 2 on the x3 axis, 1 elsewhere
    p = catalog.cross(3)
    X = np.array([[0, 0, 0.3], [0, 0, -0.7], [0.3, 0, 0.1], [0, -0.5, 0.2]])
    k, z = derivative_labels(p, X, 0.02)
    assert k.tolist() == [2, 2, 1, 1]
    assert np.isnan(z[:2]).all() and (z[2:] < 1).all()


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_derivative_labels_re_zk_origin(k):
    p = catalog.re_zk(k, 0.3)
    lab, _ = derivative_labels(p, np.zeros((1, 2)), 0.01)
    assert lab[0] == k


def test_stratify_linear_is_all_bottom_stratum():
    cloud, labels = stratify(catalog.linear(3), [0, 0, 0], 0.5, 0.05, cross_check=0)
    assert len(labels) == len(cloud) > 0
    assert {lab.k for lab in labels} == {1}


def test_stratify_cross_openness_and_density():
    h = 0.01
    cloud, labels = stratify(catalog.cross(2), [0, 0], 0.5, h, cross_check=0)
    k = np.array([lab.k for lab in labels])
    r = np.linalg.norm(cloud.points, axis=1)
    # the singular set is the origin: higher labels stay in a few pitches of it
    assert (k[r > 4 * h] == 1).all()
    assert (k[r < 1e-12] == 2).all()
    # the bottom stratum is dense in the zero set
    top = stratum_cloud(cloud, labels, 1)
    assert excess(cloud.points, top.points) <= 4 * h
    assert all(lab.certificate["criterion"] == "derivative-test" for lab in labels)


def test_stratify_cross_check_records_agreement():
    cloud, labels = stratify(catalog.re_zk(2), [0, 0], 0.5, 0.02, scales=[1.0, 0.5, 0.1],
                             cross_check=6)
    checked = [lab for lab in labels if "agrees" in lab.certificate]
    assert len(checked) == 6
    assert all(lab.certificate["agrees"] for lab in checked)
    assert any(lab.k == 2 for lab in checked)


def test_stratify_empty_region():
    with pytest.raises(EmptyZeroSetError):
        stratify(catalog.linear(2), [5, 0], 1.0, 0.05)


def test_singular_sample_cross3_axis():
    S = singular_set_sample(catalog.cross(3), [0, 0, 0], 0.5, 0.02)
    assert len(S) > 0
    assert np.abs(S[:, :2]).max() < 1e-9
    axis = np.stack([np.zeros(201), np.zeros(201), np.linspace(-0.49, 0.49, 201)], axis=1)
    assert excess(axis, S) < 0.02


def test_tube_volume_slab_closed_form():
    R = 0.5
    rows = tube_volume(catalog.linear(3), [0.01, 0.02, 0.04], N=300_000, region=R)
    for r, vol, se in rows:
        exact = 2 * math.pi * (R * R * r - r ** 3 / 3)
        assert abs(vol - exact) <= 4 * se
    assert_allclose(tube_slope(rows), 1.0, atol=0.03)


def test_tube_volume_singular_cylinder_closed_form():
    R = 0.5
    rows = tube_volume(catalog.cross(3), [0.02, 0.04, 0.08], mode="singular-set",
                       N=300_000, region=R)
    for r, vol, se in rows:
        # cylinder of radius r about the axis, cut by the ball
        exact = 4 * math.pi / 3 * (R ** 3 - (R * R - r * r) ** 1.5)
        assert abs(vol - exact) <= 4 * se + 0.01 * exact
    with pytest.raises(ValueError):
        tube_volume(catalog.linear(2), [0.1], mode="singular-set")
    with pytest.raises(ValueError):
        tube_volume(catalog.linear(2), [0.1], mode="other")
