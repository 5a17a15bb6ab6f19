import math

import numpy as np
import pytest

import symdyn
from symdyn import coarse_grain as cg
from symdyn import natural_extension as ne
from symdyn import pesin
from symdyn import shadowing as sh

CHI2 = 0.5 * math.log(2.0)


@pytest.fixture(scope="module")
def doubling():
    return symdyn.built_in("doubling")


@pytest.fixture(scope="module")
def cfg():
    return pesin.PesinConfig(chi=CHI2, epsilon=0.1)


@pytest.fixture(scope="module")
def cyc(doubling):
    return ne.make_periodic_window(doubling, 1 / 6, [0, 1], 64, 64)


@pytest.fixture(scope="module")
def alphabet(doubling, cfg, cyc):
    return cg.build_alphabet(doubling, [cyc.shift(k) for k in range(2)], cfg)


@pytest.fixture(scope="module")
def gpo(doubling, cfg, cyc, alphabet):
    g, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-20, hi=20)
    return g


def test_shadow_period2_exact(doubling, cfg, gpo, cyc):
    res = sh.shadow(doubling, gpo, cfg)
    assert res.tau0 == 0.0 and res.t0 == 0.0
    for n in range(-10, 10):
        assert res.point.x(n) == cyc.x(n)
    assert res.worst_containment <= 1.0


def test_shadow_requires_forward(doubling, cfg, gpo):
    head = sh.Gpo(charts=gpo.charts[:1], n_lo=0)
    with pytest.raises(ValueError):
        sh.shadow(doubling, head, cfg)


def test_shadow_fixed_point_tent(cfg):
    m = symdyn.built_in("tent")
    w = ne.make_periodic_window(m, 1 / 3, [1], 64, 64)
    # float rounding turns the attracting fixed point into a 2-cycle
    assert w.period in (1, 2)
    cfgt = pesin.PesinConfig(chi=CHI2, epsilon=0.1)
    al = cg.build_alphabet(m, [w.shift(k) for k in range(w.period)], cfgt)
    g, _ = cg.sufficiency_encode(m, w, al, cfgt, lo=0, hi=8)
    res = sh.shadow(m, g, cfgt)
    assert res.point.x0 == w.x0
    assert res.point.x0 == pytest.approx(1 / 3, abs=1e-12)


def test_shadow_uniqueness_under_bracketing(doubling, cfg, cyc, alphabet):
    # enough forward length for the nested intervals to reach the tolerance
    deep, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-4, hi=55)
    r1 = sh.shadow(doubling, deep, cfg, init_interval=(-1.0, 1.0))
    r2 = sh.shadow(doubling, deep, cfg, init_interval=(-0.25, 1.0))
    assert abs(r1.tau0 - r2.tau0) <= 2.0 * sh.REL_TOL


def test_shadow_contraction_ratios(doubling, cfg, gpo):
    res = sh.shadow(doubling, gpo, cfg)
    assert res.contraction_ratios
    for r in res.contraction_ratios:
        assert r == pytest.approx(0.5, rel=1e-12)  # = e^{-chi} for doubling
        assert r <= math.exp(-cfg.chi / 2.0)


def test_shadow_error_bound(doubling, cfg, gpo):
    res = sh.shadow(doubling, gpo, cfg)
    c0 = gpo.chart(0)
    assert res.log_error_bound == pytest.approx(
        math.log(2.0) + c0.log_p - cfg.chi * gpo.n_hi / 2.0)


def test_unstable_interval_halving(doubling, cfg, gpo):
    ui = sh.unstable_interval(doubling, gpo, cfg)
    taus = ui.reconstruct(0.8, depth=10)
    for k in range(0, -10, -1):
        assert taus[k - 1] == pytest.approx(taus[k] * 0.5, rel=1e-9)


def test_unstable_interval_center_evaluation(doubling, cfg, gpo, cyc):
    # evaluation at tau = 0 follows the backward orbit of the chart centers
    ui = sh.unstable_interval(doubling, cfg=cfg, g=gpo)
    taus = ui.reconstruct(0.0, depth=8)
    assert all(t == 0.0 for t in taus.values())


def test_unstable_images_nested(doubling, cfg, gpo):
    # Lemma edge(1): G(R[p]) inside R[q]
    ui = sh.unstable_interval(doubling, gpo, cfg)
    for n in range(-1, -8, -1):
        lo, hi = ui.image_interval(n)
        assert -1.0 <= lo < hi <= 1.0


def test_hyperbolicity_along_unstable(doubling, cfg, gpo):
    # chart-coordinate separation after k backward steps <= e^{-chi k/2} x initial
    ui = sh.unstable_interval(doubling, gpo, cfg)
    a = ui.reconstruct(0.9, depth=12)
    b = ui.reconstruct(-0.7, depth=12)
    d0 = abs(a[0] - b[0])
    for k in range(1, 12):
        sep = abs(a[-k] - b[-k])
        p_ratio = math.exp(gpo.chart(-k).log_p - gpo.chart(0).log_p)
        assert sep * p_ratio <= d0 * math.exp(-cfg.chi * k / 2.0) * (1 + 1e-9)


def test_shadow_invariance_under_shift(doubling, cfg, gpo):
    res = sh.shadow(doubling, gpo, cfg)
    shifted = sh.Gpo(charts=gpo.charts[1:], n_lo=gpo.n_lo)
    res2 = sh.shadow(doubling, shifted, cfg)
    for n in range(gpo.n_lo, gpo.n_hi - 1):
        assert res2.point.x(n) == res.point.shift(1).x(n)


# -- brackets ------------------------------------------------------------------

def test_bracket_idempotent(doubling, cfg, gpo):
    res = sh.shadow(doubling, gpo, cfg)
    w = sh.bracket(doubling, res, res)
    assert np.array_equal(w.points, res.point.points)


def test_bracket_mixed_windows(doubling, cfg, cyc, alphabet):
    # forward data from a short forward chain, backward word from the deep cycle
    g_short, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-2, hi=12)
    g_deep, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-30, hi=4)
    r_short = sh.shadow(doubling, g_short, cfg)
    r_deep = sh.shadow(doubling, g_deep, cfg)
    w = sh.bracket(doubling, r_short, r_deep)
    # the bracket extends the period-2 forward data with the periodic past
    assert w.back_len == 30
    for n in range(-30, 12):
        assert w.x(n) == cyc.x(n)


def test_bracket_of_bracket_collapses(doubling, cfg, cyc, alphabet):
    g1, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-4, hi=10)
    g2, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=-20, hi=10)
    r1 = sh.shadow(doubling, g1, cfg)
    r2 = sh.shadow(doubling, g2, cfg)
    w_xy = sh.bracket(doubling, r1, r2)
    # re-bracketing with the same unstable data is definitionally idempotent
    w_again = sh.bracket_windows(doubling, w_xy, r2.point)
    assert np.array_equal(w_again.points, w_xy.points)


def test_bracket_requires_shared_vertex(doubling, cfg, cyc, alphabet):
    g1, _ = cg.sufficiency_encode(doubling, cyc, alphabet, cfg, lo=0, hi=8)
    g2, _ = cg.sufficiency_encode(doubling, cyc.shift(1), alphabet, cfg, lo=0, hi=8)
    r1 = sh.shadow(doubling, g1, cfg)
    r2 = sh.shadow(doubling, g2, cfg)
    with pytest.raises(ValueError):
        sh.bracket(doubling, r1, r2)


# -- inverse audit ---------------------------------------------------------------

def test_inverse_check_identity(doubling, cfg, gpo):
    rep = sh.inverse_check(doubling, gpo, gpo, cfg)
    assert rep.passed
    for name, (ok, wit) in rep.clauses.items():
        assert ok, name
    assert rep.clauses["2 u ratio"][1].value == 0.0
    assert rep.clauses["4 p ratio"][1].value == 0.0


def test_inverse_check_depth_variant_families(doubling, cfg):
    wa = ne.make_periodic_window(doubling, 1 / 6, [0, 1], 64, 40, u_depth=30)
    wb = ne.make_periodic_window(doubling, 1 / 6, [0, 1], 64, 40, u_depth=34)
    samples = [wa.shift(k) for k in range(2)] + [wb.shift(k) for k in range(2)]
    al = cg.build_alphabet(doubling, samples, cfg)
    assert len(al.centers) == 4  # two families, not net-merged
    g1, _ = cg.sufficiency_encode(doubling, wa, al, cfg, lo=-4, hi=10)
    g2, _ = cg.sufficiency_encode(doubling, wb, al, cfg, lo=-4, hi=10)
    assert g1.charts[0].u != g2.charts[0].u
    rep = sh.inverse_check(doubling, g1, g2, cfg)
    assert rep.passed, "\n".join(rep.lines())
    assert rep.recurrence["g1"]["repeats_forward"]
    assert rep.recurrence["g1"]["repeats_backward"]


def test_inverse_check_rejects_mismatch(doubling, cfg, alphabet, cyc):
    cyc3 = ne.make_periodic_window(doubling, 1 / 14, [0, 0, 1], 64, 40)
    al = cg.build_alphabet(
        doubling, [cyc.shift(k) for k in range(2)] + [cyc3.shift(k) for k in range(3)], cfg)
    g1, _ = cg.sufficiency_encode(doubling, cyc, al, cfg, lo=0, hi=6)
    g2, _ = cg.sufficiency_encode(doubling, cyc3, al, cfg, lo=0, hi=6)
    with pytest.raises(sh.NotDoubleCoding) as exc:
        sh.inverse_check(doubling, g1, g2, cfg)
    assert "recurrence" in str(exc.value)  # failure carries the diagnostic


def test_lemma_edge_unique_preimage_in_chart(doubling, cfg, gpo):
    # for x in the w-chart, the edge's branch preimage is the unique
    # preimage landing inside the v-chart: exhaustive branch scan
    for i in range(3):
        v = gpo.charts[i]
        w = gpo.charts[i + 1]
        x = w.theta0
        hits = []
        for b in doubling.branches:
            y = b.inv(x)
            if not (b.lo <= y <= b.hi):
                continue
            d = abs(y - v.theta0) * v.u
            from symdyn.coarse_grain import lt_log_threshold
            if lt_log_threshold(d, v.log_p, strict=False):
                hits.append(b.id)
        assert hits == [w.center.branch(w.shift - 1)]
