import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import symdyn
from symdyn import analysis as an
from symdyn import coarse_grain as cg
from symdyn import library
from symdyn import natural_extension as ne
from symdyn import pesin

CHI2 = 0.5 * math.log(2.0)


def test_loop_count_self_loop():
    adj = {0: [0]}
    for n in (1, 3, 7):
        assert an.loop_count(adj, 0, n) == 1


def test_loop_count_two_shift():
    adj = {0: [0, 1], 1: [0, 1]}
    for n in range(1, 8):
        assert an.closed_paths(adj, n) == 2 ** n
    assert an.loop_count(adj, 0, 1) == 1


def test_loop_count_disconnected():
    adj = {0: [1], 1: [0], 2: []}
    assert an.loop_count(adj, 2, 4) == 0


@given(st.integers(min_value=0, max_value=2**30), st.integers(min_value=1, max_value=6))
@settings(max_examples=30, deadline=None)
def test_loop_count_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(2, 12))
    adj = {v: sorted(set(rng.integers(0, nv, size=rng.integers(0, 4)).tolist()))
           for v in range(nv)}
    v = int(rng.integers(0, nv))
    assert an.loop_count(adj, v, n) == an.brute_force_loops(adj, v, n)


def test_spectral_radius_two_shift():
    adj = {0: [0, 1], 1: [0, 1]}
    assert abs(an.spectral_radius(adj) - 2.0) < 1e-6
    est = an.gurevich_entropy(adj)
    assert abs(math.log(est.spectral_radius) - math.log(2.0)) < 1e-6


def test_gurevich_single_cycle_is_zero():
    adj = {0: [1], 1: [2], 2: [0]}
    est = an.gurevich_entropy(adj, vertex=0, n_max=9)
    assert est.loop_growth == 0.0  # log(1)/n: polynomial loop growth
    assert an.spectral_radius(adj) == pytest.approx(1.0, abs=1e-9)


def test_entropy_monotone_under_edge_addition():
    rng = np.random.default_rng(5)
    for _ in range(20):
        nv = int(rng.integers(2, 8))
        adj = {v: sorted(set(rng.integers(0, nv, size=2).tolist())) for v in range(nv)}
        u, w = int(rng.integers(0, nv)), int(rng.integers(0, nv))
        bigger = {v: list(e) for v, e in adj.items()}
        if w not in bigger[u]:
            bigger[u] = sorted(bigger[u] + [w])
        assert an.spectral_radius(bigger) >= an.spectral_radius(adj) - 1e-9


def test_map_periodic_points_doubling_exact():
    m = symdyn.built_in("doubling")
    for n in range(1, 13):
        assert len(an.map_periodic_points(m, n)) == 2 ** n - 1


def test_map_periodic_points_doubling_small():
    m = symdyn.built_in("doubling")
    assert an.map_periodic_points(m, 1) == [0.0]
    pts = an.map_periodic_points(m, 2)
    assert pts == pytest.approx([0.0, 1 / 6, 1 / 3], abs=1e-12)


def test_map_periodic_points_tent_two():
    m = symdyn.built_in("tent")
    pts = an.map_periodic_points(m, 2)
    assert len(pts) == 4
    assert pts == pytest.approx([0.0, 0.2, 1 / 3, 0.4], abs=1e-12)


def test_map_periodic_points_quadratic():
    m = symdyn.built_in("quadratic")
    # conjugate of the full logistic map: same counts as the tent map
    assert len(an.map_periodic_points(m, 1)) == 2
    assert len(an.map_periodic_points(m, 2)) == 4
    from symdyn import _kernels as K
    for x in an.map_periodic_points(m, 3):
        if m.singular_distance(x) <= 1e-9:
            continue  # the fixed point 0 is in the singular set
        y = x
        for _ in range(3):
            y = K.fwd(m.map_kind, m.table, K.branch_index(m.map_kind, m.table, y), y)
        assert y == pytest.approx(x, abs=1e-7)


def test_growth_report_doubling():
    m = symdyn.built_in("doubling")
    lib = library.periodic_library(m, CHI2, 6, back_depth=64, fwd_len=14)
    cfg = pesin.PesinConfig(chi=CHI2, epsilon=0.1)
    al = cg.build_alphabet(m, lib.windows, cfg)
    pg, _ = cg.prune_relevant(cg.build_graph(al))
    rep = an.growth_report(m, pg, n_max=6)
    for n, mc, sc, _ in rep.rows:
        assert mc == 2 ** n - 1
        assert sc == 2 ** n - 2  # the fixed point at 0 is singular, not coded
    # short fit range (n <= 6) overshoots; the acceptance run uses n <= 10
    assert abs(rep.map_slope - math.log(2)) < 0.2
    assert abs(rep.symbolic_slope - math.log(2)) < 0.2


def test_growth_report_empty_graph_flags():
    m = symdyn.built_in("doubling")
    rep = an.growth_report(m, {}, n_max=3)
    assert rep.flags
    assert all(r[2] == 0 for r in rep.rows)


def test_holder_modulus_contraction_fixture():
    # windows sharing a backward word prefix: d-hat ~ 2^{-k}, coding ~ e^{-k}
    pairs = []
    m = symdyn.built_in("doubling")
    base_word = [1, 0] * 30
    wa = ne.make_window(m, 0.3, base_word, fwd_len=4)
    for k in range(6, 40, 3):
        word = base_word[:k] + [1 - b for b in base_word[k:]]
        try:
            wb = ne.make_window(m, 0.3, word, fwd_len=4)
        except symdyn.SingularPoint:
            continue
        d = ne.hat_distance(wa, wb, depth=min(wa.back_len, wb.back_len))
        pairs.append((math.exp(-k), d))
    est = an.holder_modulus(pairs)
    assert not est.flagged
    assert est.exponent > 0.3  # positive modulus; ~ln 2 contraction per level
    assert est.exponent == pytest.approx(math.log(2), abs=0.25)


def test_holder_modulus_degenerate_inputs():
    assert an.holder_modulus([]).flagged
    assert an.holder_modulus([(0.5, 0.0)] * 20).flagged  # identical gpos excluded
    est = an.holder_modulus([(1.0, 0.3)] * 20)  # unrelated gpos: no spread
    assert est.flagged


def test_growth_report_tent():
    # the tent fixed point closes as a float 2-cycle; counts shift to even
    # lengths but the growth rate is unchanged
    m = symdyn.built_in("tent")
    lib = library.periodic_library(m, CHI2, 8, back_depth=64, fwd_len=14)
    cfg = pesin.PesinConfig(chi=CHI2, epsilon=0.1)
    al = cg.build_alphabet(m, lib.windows, cfg)
    pg, _ = cg.prune_relevant(cg.build_graph(al))
    rep = an.growth_report(m, pg, n_max=8)
    for n, mc, _, _ in rep.rows:
        assert mc == 2 ** n
    assert abs(rep.symbolic_slope - math.log(2)) < 0.1
    assert abs(rep.entropy.loop_growth - math.log(2)) < 0.1
