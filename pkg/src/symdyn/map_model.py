"""Piecewise interval maps with controlled singularities.

A map model is an interval map f on a domain of diameter < 1, given by
monotone branches from a fixed closed-form catalogue (affine, quadratic,
moebius), together with its singular set, the regularity constants
(a, beta, kappa) and a canonical radius rule

    r(x) = 0.5 * min(d(x,S)^a, d(f(x),S)^a, 1),

cut off below at the exclusion radius: points whose radius would fall
under ``exclusion`` are treated as singular.  ``verify_regularity``
checks the three regularity clauses (injectivity on 2r-balls, derivative
bounds, Hölder continuity of df and dg) on random samples and reports
worst-case witnesses; failures are report entries, not errors.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._kernels import (
    KIND_AFFINE,
    KIND_MOEBIUS,
    KIND_QUADRATIC,
    MAPKIND_GAUSS,
    MAPKIND_TABLE,
)

EXCLUSION_RADIUS = 1e-12

KIND_NAMES = {KIND_AFFINE: "affine", KIND_QUADRATIC: "quadratic", KIND_MOEBIUS: "moebius"}
KIND_IDS = {v: k for k, v in KIND_NAMES.items()}


class SingularPoint(ValueError):
    """Raised when a point is singular or inside the exclusion radius."""


class MapFileError(ValueError):
    """Raised on malformed map definition files."""


@dataclass(frozen=True)
class Branch:
    """One monotone branch: forward map, derivative, inverse, and stable
    difference forms g(y+s)-g(y), g'(y+s)-g'(y) used by the chart maps."""

    id: int
    lo: float
    hi: float
    kind: int
    coef: tuple
    inv_sign: float = 1.0

    def _row(self):
        c = self.coef + (0.0,) * (4 - len(self.coef))
        return np.array([[self.kind, self.lo, self.hi, c[0], c[1], c[2], c[3], self.inv_sign]])

    def fwd(self, x):
        return K.fwd(MAPKIND_TABLE, self._row(), 0, x)

    def dfwd(self, x):
        return K.dfwd(MAPKIND_TABLE, self._row(), 0, x)

    def inv(self, y):
        return K.inv(MAPKIND_TABLE, self._row(), 0, y)

    def dinv(self, y):
        return K.dinv(MAPKIND_TABLE, self._row(), 0, y)

    def inv_diff(self, y, s):
        """g(y+s) - g(y), stable for tiny s."""
        c = self.coef
        if self.kind == KIND_AFFINE:
            return s / c[1]
        if self.kind == KIND_QUADRATIC:
            c0, c1, c2 = c[0], c[1], c[2]
            da = c1 * c1 - 4.0 * c2 * (c0 - (y + s))
            db = c1 * c1 - 4.0 * c2 * (c0 - y)
            return 2.0 * self.inv_sign * s / (math.sqrt(max(da, 0.0)) + math.sqrt(max(db, 0.0)))
        c0, c1, c2, c3 = c[0], c[1], c[2], c[3]
        return (c1 * c2 - c0 * c3) * s / ((c3 * (y + s) - c1) * (c3 * y - c1))

    def dinv_diff(self, y, s):
        """g'(y+s) - g'(y), stable for tiny s."""
        c = self.coef
        if self.kind == KIND_AFFINE:
            return 0.0
        if self.kind == KIND_QUADRATIC:
            c0, c1, c2 = c[0], c[1], c[2]
            a = c1 * c1 - 4.0 * c2 * (c0 - (y + s))
            b = c1 * c1 - 4.0 * c2 * (c0 - y)
            sa, sb = math.sqrt(max(a, 0.0)), math.sqrt(max(b, 0.0))
            return self.inv_sign * (-4.0 * c2 * s) / (sa * sb * (sa + sb))
        c0, c1, c2, c3 = c[0], c[1], c[2], c[3]
        kk = c1 * c2 - c0 * c3
        a = c3 * (y + s) - c1
        b = c3 * y - c1
        return kk * (-c3 * s) * (a + b) / (a * a * b * b)

    def ddinv(self, y):
        """g''(y) in closed form (for log-mode curvature bounds)."""
        c = self.coef
        if self.kind == KIND_AFFINE:
            return 0.0
        if self.kind == KIND_QUADRATIC:
            c0, c1, c2 = c[0], c[1], c[2]
            disc = c1 * c1 - 4.0 * c2 * (c0 - y)
            return -2.0 * self.inv_sign * c2 / max(disc, 0.0) ** 1.5
        c0, c1, c2, c3 = c[0], c[1], c[2], c[3]
        return -2.0 * (c1 * c2 - c0 * c3) * c3 / (c3 * y - c1) ** 3


def _gauss_branch(n):
    lo = 1.0 / (2.0 * (n + 1))
    hi = 1.0 / (2.0 * n)
    return Branch(id=n, lo=lo, hi=hi, kind=KIND_MOEBIUS, coef=(1.0, -2.0 * n, 0.0, 4.0))


@dataclass(frozen=True)
class MapModel:
    """A piecewise map with singular-set oracle and regularity constants."""

    name: str
    map_kind: int
    domain: tuple
    a: float
    beta: float
    kappa: float
    table: np.ndarray = field(repr=False)
    sing: np.ndarray = field(repr=False)
    exclusion: float = EXCLUSION_RADIUS

    def __post_init__(self):
        lo, hi = self.domain
        if not hi - lo < 1.0:
            raise ValueError("domain diameter must be < 1")
        if self.a < 1.0 or not (0.0 < self.beta < 1.0) or self.kappa <= 1.0:
            raise ValueError("need a >= 1, beta in (0,1), kappa > 1")
        self.table.setflags(write=False)
        self.sing.setflags(write=False)

    # -- branch access ------------------------------------------------

    @property
    def branches(self):
        if self.map_kind == MAPKIND_GAUSS:
            return [_gauss_branch(n) for n in range(1, 17)]
        out = []
        for i in range(self.table.shape[0]):
            row = self.table[i]
            out.append(
                Branch(id=i, lo=float(row[1]), hi=float(row[2]), kind=int(row[0]),
                       coef=tuple(float(c) for c in row[3:7]), inv_sign=float(row[7]))
            )
        return out

    def branch_by_id(self, bid):
        if self.map_kind == MAPKIND_GAUSS:
            if bid < 1:
                raise KeyError(bid)
            return _gauss_branch(int(bid))
        if not 0 <= bid < self.table.shape[0]:
            raise KeyError(bid)
        return self.branches[int(bid)]

    def branch_at(self, x):
        """Id of the unique branch whose domain contains x.

        Raises SingularPoint if x is within the exclusion radius of the
        singular set (or outside every branch domain).
        """
        if self.singular_distance(x) <= self.exclusion:
            raise SingularPoint(f"x={x!r} is within the exclusion radius of the singular set")
        b = K.branch_index(self.map_kind, self.table, x)
        if b < 0:
            raise SingularPoint(f"x={x!r} lies in no branch domain")
        return int(b)

    # -- pointwise dynamics --------------------------------------------

    def singular_distance(self, x):
        return float(K.sing_dist(self.map_kind, self.table, self.sing, x))

    def f(self, x):
        return float(K.fwd(self.map_kind, self.table, self.branch_at(x), x))

    def df(self, x):
        return float(K.dfwd(self.map_kind, self.table, self.branch_at(x), x))

    def preimage(self, y, bid):
        """g_bid(y): the preimage of y through the given inverse branch."""
        return float(K.inv(self.map_kind, self.table, bid, y))

    def radius(self, x):
        """Canonical r(x); raises SingularPoint below the exclusion cutoff."""
        dx = self.singular_distance(x)
        if dx <= self.exclusion:
            raise SingularPoint(f"x={x!r} singular")
        fx = K.fwd(self.map_kind, self.table, K.branch_index(self.map_kind, self.table, x), x)
        dfx = self.singular_distance(fx)
        if dfx <= self.exclusion:
            raise SingularPoint(f"f(x)={fx!r} singular")
        r = 0.5 * min(dx**self.a, dfx**self.a, 1.0)
        if r < self.exclusion:
            raise SingularPoint(f"radius at x={x!r} falls under the exclusion cutoff")
        return r

    def finite_table(self, n_branches=None):
        """(map_kind, table) with GAUSS restricted to its first branches.

        Needed by word-enumeration routines (periodic points); table maps
        return themselves.
        """
        if self.map_kind == MAPKIND_TABLE:
            return MAPKIND_TABLE, self.table
        n = 16 if n_branches is None else n_branches
        rows = []
        for m in range(1, n + 1):
            b = _gauss_branch(m)
            rows.append([b.kind, b.lo, b.hi, *b.coef, 1.0])
        return MAPKIND_TABLE, np.array(rows)

    # -- regularity ----------------------------------------------------

    def window_chartable(self, points):
        """True iff every cached coordinate admits a radius above the cutoff.

        points must be consecutive orbit values; the radius at x_i uses
        d(x_i, S) and d(x_{i+1}, S), both available in the cache.
        """
        import numpy as np

        d = K.sing_dist_vec(self.map_kind, self.table, self.sing, points)
        if np.any(d <= self.exclusion):
            return False
        r = 0.5 * np.minimum(np.minimum(d[:-1] ** self.a, d[1:] ** self.a), 1.0)
        return bool(np.all(r >= self.exclusion))

    def draw_regular_points(self, count, rng, max_tries=200):
        """Sample points uniformly on the domain, rejecting singular ones
        (including points with no admissible radius)."""
        lo, hi = self.domain
        out = np.empty(0)
        tries = 0
        while out.size < count and tries < max_tries:
            tries += 1
            x = rng.uniform(lo, hi, size=max(64, 2 * (count - out.size)))
            dx = K.sing_dist_vec(self.map_kind, self.table, self.sing, x)
            ok = dx > self.exclusion
            b = K.branch_index_vec(self.map_kind, self.table, x)
            ok &= b >= 0
            fx = K.fwd_vec(self.map_kind, self.table, np.maximum(b, 0), x)
            dfx = K.sing_dist_vec(self.map_kind, self.table, self.sing, fx)
            ok &= dfx > self.exclusion
            r = 0.5 * np.minimum(np.minimum(dx**self.a, dfx**self.a), 1.0)
            ok &= r >= self.exclusion
            out = np.concatenate([out, x[ok]])
        return out[:count]

    def verify_regularity(self, sample_count, seed, inner=9):
        return verify_regularity(self, sample_count, seed, inner)


# ---------------------------------------------------------------------------
# regularity report
# ---------------------------------------------------------------------------

@dataclass
class ClauseResult:
    name: str
    passed: bool
    checked: int
    violations: int
    worst_margin: float
    worst_x: float
    worst_inner: float
    note: str = ""


@dataclass
class RegularityReport:
    map_name: str
    sample_count: int
    clauses: dict
    extreme_x: float = math.nan       # sample with the most extreme derivative
    extreme_value: float = math.nan   # max(|dg|, 1/|df|) over inner samples

    @property
    def passed(self):
        return all(c.passed for c in self.clauses.values())

    def lines(self):
        out = [f"regularity report: map={self.map_name} samples={self.sample_count}"]
        for c in self.clauses.values():
            status = "pass" if c.passed else "FAIL"
            out.append(
                f"  {c.name}: {status} checked={c.checked} violations={c.violations} "
                f"worst_margin={c.worst_margin:.6g} at x={c.worst_x:.12g} inner={c.worst_inner:.12g}"
            )
        if not math.isnan(self.extreme_x):
            out.append(f"  extreme derivative {self.extreme_value:.6g} at x={self.extreme_x:.12g}")
        return out


def verify_regularity(m, sample_count, seed, inner=9):
    """Sampled check of the three regularity clauses.

    Draws points x with x, f(x) regular; on each ball D_x = B(x, 2r(x)) and
    E_x = B(f(x), 2r(x)) checks branch monotonicity (A1), the derivative
    bounds d(x,S)^a <= |df|,|dg| <= d(x,S)^-a (A2) and the Hölder quotients
    |df_y - df_z| / |y-z|^beta <= kappa (A3), over ``inner`` deterministic
    inner points per ball.
    """
    empty = lambda name: ClauseResult(name, True, 0, 0, math.inf, math.nan, math.nan)
    if sample_count <= 0:
        return RegularityReport(m.name, 0, {"A1": empty("A1"), "A2": empty("A2"), "A3": empty("A3")})

    rng = np.random.default_rng(seed)
    x = m.draw_regular_points(sample_count, rng)
    n = x.size
    mk, tab, sing = m.map_kind, m.table, m.sing

    bid = K.branch_index_vec(mk, tab, x)
    fx = K.fwd_vec(mk, tab, bid, x)
    dx = K.sing_dist_vec(mk, tab, sing, x)
    dfx = K.sing_dist_vec(mk, tab, sing, fx)
    r = 0.5 * np.minimum(np.minimum(dx**m.a, dfx**m.a), 1.0)

    lo, hi = m.domain
    d_lo, d_hi = np.maximum(x - 2 * r, lo), np.minimum(x + 2 * r, hi)
    e_lo, e_hi = np.maximum(fx - 2 * r, lo), np.minimum(fx + 2 * r, hi)

    # branch domain endpoints per sample
    if mk == MAPKIND_GAUSS:
        b_lo = 1.0 / (2.0 * (bid + 1))
        b_hi = 1.0 / (2.0 * bid)
        img_lo, img_hi = np.zeros(n), np.full(n, 0.5)
    else:
        b_lo = tab[bid, 1]
        b_hi = tab[bid, 2]
        f_at_lo = K.fwd_vec(mk, tab, bid, b_lo)
        f_at_hi = K.fwd_vec(mk, tab, bid, b_hi)
        img_lo = np.minimum(f_at_lo, f_at_hi)
        img_hi = np.maximum(f_at_lo, f_at_hi)

    # (A1): D_x inside the covering branch domain, E_x inside its image.
    tol = 1e-15
    a1_margin = np.minimum(
        np.minimum(d_lo - b_lo, b_hi - d_hi),
        np.minimum(e_lo - img_lo, img_hi - e_hi),
    )
    a1_ok = a1_margin >= -tol

    # inner sample grids (deterministic, endpoints inset by a relative hair)
    t = (np.arange(inner) + 0.5) / inner
    ys = d_lo[:, None] + (d_hi - d_lo)[:, None] * t[None, :]
    zs = e_lo[:, None] + (e_hi - e_lo)[:, None] * t[None, :]
    bcol = np.broadcast_to(bid[:, None], ys.shape)

    dfy = K.dfwd_vec(mk, tab, bcol, ys)
    dgz = K.dinv_vec(mk, tab, bcol, zs)

    logd = np.log(dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        ldfy = np.log(np.abs(dfy))
        ldgz = np.log(np.abs(dgz))
    ldfy = np.where(np.isfinite(ldfy), ldfy, -np.inf)
    ldgz = np.where(np.isfinite(ldgz), ldgz, np.inf)  # |dg| = inf breaks the upper bound

    a2_mlo = np.minimum((ldfy - m.a * logd[:, None]).min(axis=1),
                        (np.where(np.isfinite(ldgz), ldgz, -np.inf) - m.a * logd[:, None]).min(axis=1))
    a2_mhi = np.minimum((-m.a * logd[:, None] - ldfy).min(axis=1),
                        (-m.a * logd[:, None] - ldgz).min(axis=1))
    a2_margin = np.minimum(a2_mlo, a2_mhi)
    a2_ok = a2_margin >= 0.0

    # (A3): Hölder quotients over all inner pairs, forward and inverse.
    def worst_quotient(vals, pts):
        dv = np.abs(vals[:, :, None] - vals[:, None, :])
        dp = np.abs(pts[:, :, None] - pts[:, None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = dv / dp**m.beta
        q = np.where(dp > 0, q, 0.0)
        q = np.nanmax(np.where(np.isfinite(q), q, np.inf), axis=(1, 2))
        return q

    q_fwd = worst_quotient(dfy, ys)
    q_inv = worst_quotient(np.where(np.isfinite(dgz), dgz, np.inf), zs)
    quot = np.maximum(q_fwd, q_inv)
    a3_margin = math.log(m.kappa) - np.log(np.maximum(quot, 1e-300))
    a3_ok = quot <= m.kappa

    def clause(name, ok, margin, inner_pts):
        w = int(np.argmin(margin))
        return ClauseResult(
            name=name, passed=bool(ok.all()), checked=n, violations=int((~ok).sum()),
            worst_margin=float(margin[w]), worst_x=float(x[w]), worst_inner=float(inner_pts[w]),
        )

    a3_inner = np.where(q_inv >= q_fwd, zs[np.arange(n), 0], ys[np.arange(n), 0])
    rep = RegularityReport(
        map_name=m.name,
        sample_count=n,
        clauses={
            "A1": clause("A1", a1_ok, a1_margin, x),
            "A2": clause("A2", a2_ok, a2_margin, x),
            "A3": clause("A3", a3_ok, a3_margin, a3_inner),
        },
    )
    # extreme-derivative witness: the most violent |dg| or 1/|df| seen
    extremes = np.maximum(np.max(np.abs(np.where(np.isfinite(dgz), dgz, 0.0)), axis=1),
                          1.0 / np.maximum(np.min(np.abs(dfy), axis=1), 1e-300))
    wi = int(np.argmax(extremes))
    rep.extreme_x = float(x[wi])
    rep.extreme_value = float(extremes[wi])
    return rep


# ---------------------------------------------------------------------------
# built-in maps (affinely conjugated onto [0, 0.5])
# ---------------------------------------------------------------------------

def _table_model(name, rows, sing, a, beta, kappa, domain=(0.0, 0.5)):
    return MapModel(
        name=name, map_kind=MAPKIND_TABLE, domain=domain, a=a, beta=beta, kappa=kappa,
        table=np.array(rows, dtype=np.float64), sing=np.array(sing, dtype=np.float64),
    )


def built_in(name):
    """Built-in maps: doubling, tent, quadratic, gauss."""
    if name == "doubling":
        return _table_model(
            "doubling",
            [[KIND_AFFINE, 0.0, 0.25, 0.0, 2.0, 0.0, 0.0, 1.0],
             [KIND_AFFINE, 0.25, 0.5, -0.5, 2.0, 0.0, 0.0, 1.0]],
            sing=[0.0, 0.25], a=1.0, beta=0.5, kappa=2.0,
        )
    if name == "tent":
        return _table_model(
            "tent",
            [[KIND_AFFINE, 0.0, 0.25, 0.0, 2.0, 0.0, 0.0, 1.0],
             [KIND_AFFINE, 0.25, 0.5, 1.0, -2.0, 0.0, 0.0, 1.0]],
            sing=[0.0, 0.25], a=1.0, beta=0.5, kappa=2.0,
        )
    if name == "quadratic":
        # 4y(1-2y): the logistic map 4x(1-x) conjugated by y = x/2
        return _table_model(
            "quadratic",
            [[KIND_QUADRATIC, 0.0, 0.25, 0.0, 4.0, -8.0, 0.0, 1.0],
             [KIND_QUADRATIC, 0.25, 0.5, 0.0, 4.0, -8.0, 0.0, -1.0]],
            sing=[0.0, 0.25, 0.5], a=2.5, beta=0.5, kappa=16.0,
        )
    if name == "gauss":
        # 1/x mod 1 conjugated by y = x/2; singular set {0} u {1/(2n)}
        return MapModel(
            name="gauss", map_kind=MAPKIND_GAUSS, domain=(0.0, 0.5),
            a=3.0, beta=0.5, kappa=8.0,
            table=np.zeros((0, 8)), sing=np.zeros(0),
        )
    raise KeyError(f"unknown built-in map {name!r}")


BUILT_IN_NAMES = ("doubling", "tent", "quadratic", "gauss")


# ---------------------------------------------------------------------------
# map definition files
# ---------------------------------------------------------------------------

def parse_map_file(text):
    """Parse the UTF-8 key-value map format (see README); returns a MapModel."""
    sections = []
    cur = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            cur = {"__section__": line[1:-1]}
            sections.append(cur)
            continue
        if cur is None or "=" not in line:
            raise MapFileError(f"stray line outside a section: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        cur[key] = val

    header = [s for s in sections if s["__section__"] == "map"]
    if len(header) != 1:
        raise MapFileError("need exactly one [map] section")
    h = header[0]
    try:
        name = h.get("name", "custom")
        a = float(h["a"])
        beta = float(h["beta"])
        kappa = float(h["kappa"])
        domain = tuple(float(v) for v in h["domain"].split())
        sing = [float(v) for v in h.get("singular", "").split()]
    except (KeyError, ValueError) as e:
        raise MapFileError(f"bad [map] section: {e}") from e

    rows = []
    for s in sections:
        if s["__section__"] != "branch":
            continue
        try:
            lo, hi = (float(v) for v in s["dom"].split())
            kind = KIND_IDS[s["kind"]]
            coef = [float(v) for v in s["coef"].split()]
            inv_sign = float(s.get("inv_sign", "1"))
        except (KeyError, ValueError) as e:
            raise MapFileError(f"bad [branch] section: {e}") from e
        coef = coef + [0.0] * (4 - len(coef))
        rows.append([kind, lo, hi, *coef[:4], inv_sign])
    if not rows:
        raise MapFileError("no [branch] sections")
    return _table_model(name, rows, sing, a, beta, kappa, domain=domain)


def load_map(spec):
    """Resolve a map by built-in name or by path to a definition file."""
    if spec in BUILT_IN_NAMES:
        return built_in(spec)
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            return parse_map_file(fh.read())
    except OSError as e:
        raise KeyError(f"unknown map {spec!r} (not a built-in, not a readable file)") from e
