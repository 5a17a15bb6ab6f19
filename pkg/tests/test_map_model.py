import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import symdyn
from symdyn import _kernels as K
from symdyn.map_model import (
    MapFileError,
    MapModel,
    SingularPoint,
    built_in,
    load_map,
    parse_map_file,
)

ALL_MAPS = ["doubling", "tent", "quadratic", "gauss"]


def test_singular_distance_doubling_sixth():
    m = built_in("doubling")
    # min of |1/6 - 0| and |1/6 - 1/4|
    assert m.singular_distance(1 / 6) == pytest.approx(1 / 12, abs=1e-15)


def test_singular_distance_at_singular_point():
    m = built_in("doubling")
    assert m.singular_distance(0.25) == 0.0
    assert m.singular_distance(0.0) == 0.0


def test_gauss_distance_matches_enumeration():
    m = built_in("gauss")
    # brute-force oracle: enumerate {0} u {1/(2n)} far enough and take the min
    pts = np.array([0.0] + [1.0 / (2.0 * n) for n in range(1, 4000)])
    rng = np.random.default_rng(3)
    for x in rng.uniform(1e-3, 0.5, size=200):
        oracle = float(np.min(np.abs(pts - x)))
        assert m.singular_distance(x) == pytest.approx(oracle, abs=0, rel=0)


def test_gauss_distance_near_branch_endpoint():
    m = built_in("gauss")
    x = 0.25 - 1e-4  # just below the endpoint 1/(2*2)
    assert m.singular_distance(x) == pytest.approx(1e-4, rel=1e-9)


def test_branch_at_doubling():
    m = built_in("doubling")
    assert m.branch_at(0.1) == 0
    assert m.branch_at(0.3) == 1
    with pytest.raises(SingularPoint):
        m.branch_at(0.25)


def test_branch_at_exclusion_radius():
    m = built_in("doubling")
    with pytest.raises(SingularPoint):
        m.branch_at(0.25 + 1e-13)


def test_gauss_branches_are_full():
    m = built_in("gauss")
    for n in (1, 2, 5):
        b = m.branch_by_id(n)
        assert b.fwd(b.hi) == pytest.approx(0.0, abs=1e-12)
        assert b.fwd(b.lo) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("name", ALL_MAPS)
def test_branch_inverse_roundtrip(name):
    m = built_in(name)
    rng = np.random.default_rng(11)
    xs = m.draw_regular_points(300, rng)
    for x in xs:
        b = m.branch_by_id(m.branch_at(x))
        assert abs(b.inv(b.fwd(x)) - x) < 1e-10
        assert b.dinv(b.fwd(x)) * b.dfwd(x) == pytest.approx(1.0, rel=1e-9)


@given(st.floats(min_value=1e-6, max_value=0.2499))
@settings(max_examples=60, deadline=None)
def test_doubling_inverse_roundtrip_property(x):
    m = built_in("doubling")
    b = m.branch_by_id(0)
    assert abs(b.inv(b.fwd(x)) - x) < 1e-10


def test_domain_diameter_enforced():
    with pytest.raises(ValueError):
        MapModel(name="bad", map_kind=K.MAPKIND_TABLE, domain=(0.0, 1.5),
                 a=1.0, beta=0.5, kappa=2.0,
                 table=np.zeros((1, 8)), sing=np.zeros(1))


@pytest.mark.parametrize("name", ALL_MAPS)
def test_regularity_passes_builtin(name):
    m = built_in(name)
    rep = m.verify_regularity(2000, seed=5)
    assert rep.passed, "\n".join(rep.lines())


def test_regularity_quadratic_small_a_fails_near_critical():
    base = built_in("quadratic")
    weak = MapModel(name="quadratic-a1", map_kind=base.map_kind, domain=base.domain,
                    a=1.0, beta=base.beta, kappa=base.kappa,
                    table=base.table.copy(), sing=base.sing.copy())
    rep = weak.verify_regularity(4000, seed=5)
    assert not rep.passed
    bad = [c for c in rep.clauses.values() if not c.passed]
    # the failing witnesses sit next to the critical point 0.25
    assert any(abs(c.worst_x - 0.25) < 0.1 for c in bad)


def test_regularity_empty_report():
    m = built_in("doubling")
    rep = m.verify_regularity(0, seed=1)
    assert rep.passed and rep.sample_count == 0


def test_doubling_constant_derivative_holder_quotient_zero():
    # df is constant so the A3 quotient is identically 0: huge margin
    m = built_in("doubling")
    rep = m.verify_regularity(500, seed=2)
    assert rep.clauses["A3"].worst_margin > 100


DOUBLING_FILE = """
# a user map equal to the doubling built-in
[map]
name = mydoubling
a = 1.0
beta = 0.5
kappa = 2.0
domain = 0.0 0.5
singular = 0.0 0.25
[branch]
dom = 0.0 0.25
kind = affine
coef = 0.0 2.0
[branch]
dom = 0.25 0.5
kind = affine
coef = -0.5 2.0
"""


def test_map_file_parse():
    m = parse_map_file(DOUBLING_FILE)
    assert m.name == "mydoubling"
    assert m.f(0.1) == built_in("doubling").f(0.1)
    assert m.branch_at(0.3) == 1


def test_map_file_errors():
    with pytest.raises(MapFileError):
        parse_map_file("[map]\nname = x\n")  # missing constants
    with pytest.raises(MapFileError):
        parse_map_file("a = 1\n")  # stray line


def test_load_map_builtin_and_file(tmp_path):
    assert load_map("tent").name == "tent"
    p = tmp_path / "m.map"
    p.write_text(DOUBLING_FILE, encoding="utf-8")
    assert load_map(str(p)).name == "mydoubling"
    with pytest.raises(KeyError):
        load_map("no-such-map")


def test_radius_rule_cutoff():
    m = built_in("quadratic")
    # near-critical points whose radius falls under the exclusion cutoff
    with pytest.raises(SingularPoint):
        m.radius(0.25 + 1e-4)
    # but ordinary points have a radius in (exclusion, 1)
    r = m.radius(0.1)
    assert m.exclusion < r < 1.0


def test_difference_forms_against_mpmath():
    # stable forms g(y+s)-g(y), g'(y+s)-g'(y) vs 60-digit direct evaluation
    import mpmath

    cases = []
    mq = built_in("quadratic")
    cases.append((mq.branch_by_id(0), 0.3))
    cases.append((mq.branch_by_id(1), 0.3))
    mg = built_in("gauss")
    cases.append((mg.branch_by_id(1), 0.2))
    cases.append((mg.branch_by_id(3), 0.2))
    md = built_in("doubling")
    cases.append((md.branch_by_id(1), 0.3))

    def oracle(br, y, s, d):
        # enough digits to resolve y + s for the tiniest s below
        with mpmath.workdps(250):
            yy = mpmath.mpf(repr(y))
            ss = mpmath.mpf(repr(s))
            c = [mpmath.mpf(repr(v)) for v in (list(br.coef) + [0.0] * 4)[:4]]
            if br.kind == 0:
                g = lambda t: (t - c[0]) / c[1]
                dg = lambda t: 1 / c[1]
            elif br.kind == 1:
                sg = mpmath.mpf(repr(br.inv_sign))
                disc = lambda t: c[1] ** 2 - 4 * c[2] * (c[0] - t)
                g = lambda t: (-c[1] + sg * mpmath.sqrt(disc(t))) / (2 * c[2])
                dg = lambda t: sg / mpmath.sqrt(disc(t))
            else:
                g = lambda t: (c[0] - c[2] * t) / (c[3] * t - c[1])
                dg = lambda t: (c[1] * c[2] - c[0] * c[3]) / (c[3] * t - c[1]) ** 2
            fn = g if d == 0 else dg
            return float(fn(yy + ss) - fn(yy))

    for br, y in cases:
        for s in (1e-3, 1e-12, 1e-40, 1e-150, -1e-40):
            got = br.inv_diff(y, s)
            want = oracle(br, y, s, 0)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-320), (br.kind, s)
            got_d = br.dinv_diff(y, s)
            want_d = oracle(br, y, s, 1)
            assert got_d == pytest.approx(want_d, rel=1e-9, abs=1e-320), (br.kind, s)
