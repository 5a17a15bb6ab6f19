"""The njit lane and the vectorized numpy lane must agree."""

import numpy as np
import pytest

import symdyn
from symdyn import _kernels as K


@pytest.mark.parametrize("name", ["doubling", "tent", "quadratic", "gauss"])
def test_scalar_vs_vectorized_eval(name):
    m = symdyn.built_in(name)
    rng = np.random.default_rng(7)
    xs = m.draw_regular_points(500, rng)
    bids = K.branch_index_vec(m.map_kind, m.table, xs)
    fv = K.fwd_vec(m.map_kind, m.table, bids, xs)
    dv = K.dfwd_vec(m.map_kind, m.table, bids, xs)
    sv = K.sing_dist_vec(m.map_kind, m.table, m.sing, xs)
    for i, x in enumerate(xs):
        b = K.branch_index(m.map_kind, m.table, x)
        assert b == bids[i]
        assert K.fwd(m.map_kind, m.table, b, x) == fv[i]
        assert K.dfwd(m.map_kind, m.table, b, x) == dv[i]
        assert K.sing_dist(m.map_kind, m.table, m.sing, x) == sv[i]
        y = fv[i]
        assert K.inv(m.map_kind, m.table, b, y) == K.inv_vec(
            m.map_kind, m.table, np.array([b]), np.array([y]))[0]
        assert K.dinv(m.map_kind, m.table, b, y) == K.dinv_vec(
            m.map_kind, m.table, np.array([b]), np.array([y]))[0]


def test_forward_orbit_consistency():
    # dyadic maps shift mantissa bits out, so keep the horizon short
    m = symdyn.built_in("tent")
    pts, bids, ld, sg, done, ok = K.forward_orbit(
        m.map_kind, m.table, 0.123, 20, m.exclusion, m.sing)
    assert ok and done == 20
    for k in range(20):
        assert K.fwd(m.map_kind, m.table, bids[k], pts[k]) == pts[k + 1]
        assert np.exp(ld[k]) == pytest.approx(2.0, rel=1e-12)


def test_forward_orbit_long_nondyadic():
    m = symdyn.built_in("quadratic")
    pts, bids, ld, sg, done, ok = K.forward_orbit(
        m.map_kind, m.table, 0.1234567, 200, m.exclusion, m.sing)
    assert ok and done == 200
    for k in range(0, 200, 17):
        assert K.fwd(m.map_kind, m.table, bids[k], pts[k]) == pts[k + 1]


def test_backward_orbit_validates_branches():
    m = symdyn.built_in("doubling")
    word = np.array([0, 1, 0, 1], dtype=np.int64)
    pts, done, ok = K.backward_orbit(m.map_kind, m.table, 0.3, word,
                                     m.exclusion, m.sing)
    assert ok
    x = pts[-1]
    for b in word[::-1]:
        x = K.fwd(m.map_kind, m.table, b, x)
    assert x == pytest.approx(0.3, abs=1e-12)


def test_periodic_roots_lanes_agree():
    m = symdyn.built_in("doubling")
    words = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    r1, f1 = K.periodic_roots(m.map_kind, m.table, words)
    r2, f2 = K.periodic_roots_numpy(m.map_kind, m.table, words)
    assert list(f1) == list(f2)
    for a, b, ok in zip(r1, r2, f1):
        if ok:
            assert a == pytest.approx(b, abs=1e-12)


def test_warmup_runs():
    m = symdyn.built_in("doubling")
    K.warmup(m.map_kind, m.table, m.sing)
    mg = symdyn.built_in("gauss")
    K.warmup(mg.map_kind, mg.table, mg.sing)
