import numpy as np
import pytest
from numpy.testing import assert_allclose

from harmzero import catalog
from harmzero.poly import MultiPoly
from harmzero.topology import (
    AllZeroFieldError,
    component_graph,
    components,
    corkscrew_estimate,
    grid_field,
    invariant_subspace,
    parse_box,
    sign_bipartite_check,
)
from harmzero.zeroset import ResourceError


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_re_zk_has_k_nodal_domains_of_each_sign(k):
    # 2k sectors about the origin, alternating in sign
    c = components(catalog.re_zk(k, 0.1), (-1, 1), 0.01)
    assert c.counts == (k, k)


def test_szulkin_splits_space_in_two():
    c = components(catalog.szulkin(), (-1, 1), 0.02)
    assert c.counts == (1, 1)


def test_cross3_and_triple_cross():
    assert components(catalog.cross(3), (-1, 1), 0.05).counts == (2, 2)
    assert components(catalog.triple_cross(), (-1, 1), 0.05).counts == (4, 4)


def test_grid_field_band_and_axes():
    gf = grid_field(catalog.linear(2), (-1, 1), 0.1)
    assert gf.shape == (21, 21)
    # |x1| <= pitch * |grad p| = 0.1 puts the three middle columns in the band
    assert (gf.signs[9:12] == 0).all()
    assert (gf.signs[:9] == -1).all() and (gf.signs[12:] == 1).all()
    assert_allclose(gf.coords([[0, 0], [20, 20]]), [[-1, -1], [1, 1]])


def test_grid_cap_and_box_errors():
    with pytest.raises(ResourceError):
        grid_field(catalog.szulkin(), (-1, 1), 0.01, max_vertices=10_000)
    with pytest.raises(ValueError):
        parse_box([1, -1], 2)
    with pytest.raises(AllZeroFieldError):
        components(MultiPoly.zero(2), (-1, 1), 0.1)


def test_bipartite_re_z3_is_a_six_cycle():
    ok, info = sign_bipartite_check(catalog.re_zk(3), (-1, 1), 0.01, full_output=True)
    assert ok and info["crossings"] > 0 and info["same_sign"] == 0
    assert len(info["edges"]) == 6
    adj = component_graph(catalog.re_zk(3), (-1, 1), 0.01)
    assert all(len(v) == 2 for v in adj.values())
    # walk the cycle
    start = next(iter(adj))
    seen, prev, cur = [start], None, start
    while True:
        nxt = [v for v in adj[cur] if v != prev][0]
        if nxt == start:
            break
        seen.append(nxt)
        prev, cur = cur, nxt
    assert len(seen) == 6


def test_bipartite_linear_and_szulkin():
    assert sign_bipartite_check(catalog.linear(3), (-1, 1), 0.05)
    assert sign_bipartite_check(catalog.szulkin(), (-1, 1), 0.04)


def test_invariant_subspace():
    V = invariant_subspace(catalog.cross(3))
    assert V.shape == (3, 1)
    assert_allclose(abs(V[2, 0]), 1.0, atol=1e-12)
    assert invariant_subspace(catalog.szulkin()).shape == (3, 0)
    assert invariant_subspace(catalog.two_plane_quadric()).shape == (4, 0)
    Q = catalog.rotation(3, np.random.default_rng(0))
    W = invariant_subspace(catalog.rotated(catalog.cross(3), Q))
    assert_allclose(abs(W[:, 0] @ Q[:, 2]), 1.0, atol=1e-10)
    assert invariant_subspace(catalog.linear(3)).shape == (3, 2)
    with pytest.raises(ValueError):
        invariant_subspace(catalog.logunov_malinnikova())


def test_corkscrew_half_plane():
    # Q on the line x1 = 0: the farthest point of B(Q, r) from the line sits
    # at distance r, and the largest ball inside B(Q, r) on one side has
    # radius r / 2
    p = catalog.linear(2)
    Q = [[0.0, 0.0], [0.0, 0.3]]
    dist = corkscrew_estimate(p, (-1, 1), 0.005, [0.1, 0.2], mode="distance", Q=Q)
    assert_allclose([dist.M_pos, dist.M_neg], 1.0, atol=0.06)
    cont = corkscrew_estimate(p, (-1, 1), 0.005, [0.1, 0.2], mode="contained", Q=Q)
    assert_allclose([cont.M_pos, cont.M_neg], 2.0, atol=0.11)
    assert cont.M_pos >= dist.M_pos
    with pytest.raises(ValueError):
        corkscrew_estimate(p, (-1, 1), 0.05, [0.1], mode="other")
