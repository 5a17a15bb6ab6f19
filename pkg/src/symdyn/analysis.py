"""Quantitative consequences: loop counting, entropy estimates, periodic
points of the map, growth comparison, and the coding-modulus estimate."""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _kernels as K


def _adjacency(g):
    """Adjacency dict from a GpoGraph / TmsGraph / plain dict."""
    if isinstance(g, dict):
        return g
    if hasattr(g, "out_edges") and hasattr(g, "alphabet"):
        return {v: list(g.out_edges[v]) for v in range(g.n_vertices())
                if g.out_edges[v] or g.in_edges[v]}
    if hasattr(g, "adjacency"):
        return g.adjacency()
    raise TypeError(f"no adjacency in {type(g)!r}")


def loop_count(g, vertex, n):
    """Closed paths of length n through a vertex (exact integer count)."""
    if n < 1:
        raise ValueError("need n >= 1")
    adj = _adjacency(g)
    vec = {vertex: 1}
    for _ in range(n):
        new = {}
        for u, c in vec.items():
            for w in adj.get(u, ()):
                new[w] = new.get(w, 0) + c
        vec = new
    return vec.get(vertex, 0)


def closed_paths(g, n):
    """trace(A^n): total closed paths of length n (exact integers)."""
    adj = _adjacency(g)
    return sum(loop_count(adj, v, n) for v in adj)


def brute_force_loops(g, vertex, n):
    """Oracle: enumerate all length-n paths from the vertex back to itself."""
    adj = _adjacency(g)
    total = 0
    stack = [(vertex, 0)]
    while stack:
        u, d = stack.pop()
        if d == n:
            total += u == vertex
            continue
        for w in adj.get(u, ()):
            stack.append((w, d + 1))
    return total


@dataclass
class EntropyEstimate:
    loop_growth: float        # (1/n) log loop_count at the largest feasible n
    trace_slope: float        # lsq slope of log trace(A^n) over n
    spectral_radius: float
    n_used: int

    def lines(self):
        return [
            f"entropy estimates: loop growth {self.loop_growth:.6g}, "
            f"aggregate trace slope {self.trace_slope:.6g}, "
            f"spectral radius {self.spectral_radius:.6g} "
            f"(log {math.log(self.spectral_radius):.6g} at n <= {self.n_used})"
            if self.spectral_radius > 0 else
            f"entropy estimates: loop growth {self.loop_growth:.6g}, "
            f"trace slope {self.trace_slope:.6g}, spectral radius 0",
        ]


def spectral_radius(g, iters=200):
    """Power-iteration estimate of the adjacency spectral radius.

    The per-step norm growth oscillates on periodic graphs, so the
    geometric mean over the second half of the iteration is returned.
    """
    adj = _adjacency(g)
    keys = sorted(adj)
    pos = {v: i for i, v in enumerate(keys)}
    nv = len(keys)
    if nv == 0:
        return 0.0
    vec = np.ones(nv)
    norms = []
    for _ in range(iters):
        new = np.zeros(nv)
        for u in keys:
            cu = vec[pos[u]]
            if cu:
                for w in adj.get(u, ()):
                    if w in pos:
                        new[pos[w]] += cu
        nrm = float(np.linalg.norm(new))
        if nrm == 0.0:
            return 0.0
        norms.append(nrm)
        vec = new / nrm
    k = len(norms) // 2
    return float(np.exp(np.mean(np.log(norms[k:]))))


def gurevich_entropy(g, vertex=None, n_max=10):
    """Loop-growth and spectral estimates of the shift entropy.

    On non-transitive desk-scale graphs (disjoint cycles) the per-vertex
    loop growth is 0; the aggregate trace slope is the estimator with
    content there, so all three numbers are reported.
    """
    adj = _adjacency(g)
    if vertex is None:
        loop_growth = 0.0
        best = 0
        for n in range(n_max, 0, -1):
            c = closed_paths(adj, n)
            if c > 0:
                loop_growth = math.log(c) / n
                best = n
                break
    else:
        loop_growth = 0.0
        best = 0
        for n in range(n_max, 0, -1):
            c = loop_count(adj, vertex, n)
            if c > 0:
                loop_growth = math.log(c) / n
                best = n
                break
    ns = []
    logs = []
    for n in range(1, n_max + 1):
        c = closed_paths(adj, n)
        if c > 0:
            ns.append(n)
            logs.append(math.log(c))
    slope = _lsq_slope(ns, logs) if len(ns) >= 2 else 0.0
    return EntropyEstimate(loop_growth=loop_growth, trace_slope=slope,
                           spectral_radius=spectral_radius(adj), n_used=best)


def _lsq_slope(xs, ys):
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    xm, ym = x.mean(), y.mean()
    den = float(((x - xm) ** 2).sum())
    if den == 0.0:
        return 0.0
    return float(((x - xm) * (y - ym)).sum() / den)


# ---------------------------------------------------------------------------
# periodic points of the map
# ---------------------------------------------------------------------------

DEDUP_TOL = 1e-9


def map_periodic_points(m, n, branch_limit=None):
    """All solutions of f^n(x) = x, one per admissible branch word.

    Convention: the orbit must respect the half-open branch domains
    [lo, hi) at every step (so domain right endpoints are excluded, and
    maps with countably many branches are restricted to the finite
    sub-table).  Roots are deduplicated within 1e-9.
    """
    mk, table = m.finite_table(branch_limit)
    nb = table.shape[0]
    words = np.array(list(product(range(nb), repeat=n)), dtype=np.int64)
    roots, found = K.periodic_roots(mk, table, words)
    out = []
    for r, ok, word in zip(roots, found, words):
        if not ok:
            continue
        x = r
        good = True
        for k in range(n):
            b = word[k]
            if not (table[b, 1] <= x < table[b, 2]):
                good = False
                break
            x = K.fwd(mk, table, int(b), x)
        if not good or abs(x - r) > DEDUP_TOL:
            continue
        out.append(float(r))
    out.sort()
    dedup = []
    for r in out:
        if not dedup or r - dedup[-1] > DEDUP_TOL:
            dedup.append(r)
    return dedup


@dataclass
class GrowthReport:
    rows: list              # (n, map_count, symbolic_count, ratio)
    map_slope: float
    symbolic_slope: float
    entropy: EntropyEstimate
    flags: list

    def lines(self):
        out = ["periodic growth report: n  map_count  closed_paths  ratio"]
        for n, mc, sc, r in self.rows:
            out.append(f"  {n:3d}  {mc:9d}  {sc:12d}  {r:.4g}")
        out.append(f"  map slope {self.map_slope:.6g}, symbolic slope "
                   f"{self.symbolic_slope:.6g}, ln 2 = {math.log(2):.6g}")
        out.extend(self.entropy.lines())
        out.extend(f"  flag: {f}" for f in self.flags)
        return out


def growth_report(m, g, n_max, branch_limit=None):
    """Map periodic counts vs symbolic closed-path counts, with slopes."""
    adj = _adjacency(g) if g is not None else {}
    rows = []
    flags = []
    for n in range(1, n_max + 1):
        mc = len(map_periodic_points(m, n, branch_limit))
        sc = closed_paths(adj, n) if adj else 0
        rows.append((n, mc, sc, (mc / sc) if sc else math.inf))
    if not adj or all(r[2] == 0 for r in rows):
        flags.append("symbolic counts are zero (empty or cycle-free graph)")
    ns = [r[0] for r in rows if r[1] > 0]
    ms = [math.log(r[1]) for r in rows if r[1] > 0]
    nss = [r[0] for r in rows if r[2] > 0]
    ss = [math.log(r[2]) for r in rows if r[2] > 0]
    ent = gurevich_entropy(adj, n_max=n_max) if adj else EntropyEstimate(0, 0, 0, 0)
    return GrowthReport(rows=rows,
                        map_slope=_lsq_slope(ns, ms) if len(ns) >= 2 else 0.0,
                        symbolic_slope=_lsq_slope(nss, ss) if len(ss) >= 2 else 0.0,
                        entropy=ent, flags=flags)


# ---------------------------------------------------------------------------
# coding-modulus estimate
# ---------------------------------------------------------------------------

@dataclass
class HolderEstimate:
    exponent: float
    intercept: float
    residual: float
    pairs_used: int
    flagged: bool
    note: str = ""


def holder_modulus(pairs):
    """Regress log(hat-distance) against log(coding distance).

    An estimate of the coding modulus, never a certificate.  Degenerate
    inputs (fewer than 10 usable pairs, or no spread in the coding
    distances) are flagged instead of fitted.
    """
    xs = []
    ys = []
    for cd, hd in pairs:
        if cd > 0.0 and hd > 0.0:
            xs.append(math.log(cd))
            ys.append(math.log(hd))
    if len(xs) < 10:
        return HolderEstimate(math.nan, math.nan, math.nan, len(xs), True,
                              "fewer than 10 usable pairs")
    x = np.asarray(xs)
    y = np.asarray(ys)
    if float(x.var()) == 0.0:
        return HolderEstimate(math.nan, math.nan, math.nan, len(xs), True,
                              "no spread in coding distances")
    slope = _lsq_slope(x, y)
    inter = float(y.mean() - slope * x.mean())
    resid = float(np.sqrt(np.mean((y - (slope * x + inter)) ** 2)))
    return HolderEstimate(exponent=slope, intercept=inter, residual=resid,
                          pairs_used=len(xs), flagged=False)
