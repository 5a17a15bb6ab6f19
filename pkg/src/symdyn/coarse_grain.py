"""Coarse graining: the discretized chart alphabet and the gpo graph.

Charts are binned by integer data (distance, u, cover element, Q and
q-size bins, all natural-e bins); inside a bin a greedy net admits a
center unless an already-admitted one matches it to within the net
thresholds.  Admitted centers spawn one chart per admissible grid size.
Weak and strong edges are the overlap/parameter clauses evaluated in log
space with exact integer arithmetic on the size grid.

At working precision the metric thresholds ((p1 p2)^4, e^{-8(j+2)}, q^8)
sit far below the smallest positive double, so they are satisfiable only
by exact float equality of the compared data; the implementation
evaluates the written formulas literally (linear space above underflow,
log space beneath), and the graph inherits the resulting structure.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field

from . import pesin
from .map_model import SingularPoint
from .pesin import Chart, PesinConfig, window_tables
from .shadowing import Gpo


class NoNetVertex(LookupError):
    """A shifted sample falls in a bin with no net representative."""


BinKey = namedtuple("BinKey", ["k", "l", "a", "m", "j"])


def lt_log_threshold(value, log_thr, strict=True):
    """value < e^{log_thr} (or <=), usable when the threshold underflows."""
    if value == 0.0:
        return True
    thr = math.exp(log_thr) if log_thr < 700.0 else math.inf
    if thr > 0.0:
        return value < thr if strict else value <= thr
    lv = math.log(value)
    return lv < log_thr if strict else lv <= log_thr


@dataclass(frozen=True)
class Gamma:
    """Finitely many parameters of a window shift: coordinates, u and Q."""

    theta: tuple   # (x_{-1}, x_0, x_1)
    u: tuple       # (u(f^-1), u, u(f))
    idxQ: int


def net_match(g1, g2, j):
    """Net conditions: per-coordinate closeness under e^{-8(j+2)} and
    Q ratio within one grid step (e^{+-eps/3})."""
    if abs(g1.idxQ - g2.idxQ) > 1:
        return False
    thr = -8.0 * (j + 2)
    for i in range(3):
        metric = abs(g1.theta[i] - g2.theta[i]) + abs(1.0 / g1.u[i] - 1.0 / g2.u[i])
        if not lt_log_threshold(metric, thr):
            return False
    return True


# ---------------------------------------------------------------------------
# cover of the domain by radius-rule balls on dyadic grids
# ---------------------------------------------------------------------------

def cover_id(m, x, max_level=64):
    """Id of a canonical cover element containing x.

    Scans dyadic grids coarse to fine and returns the first grid center
    whose radius-rule ball contains x; encoded as (level << 32) | index.
    """
    lo, hi = m.domain
    width = hi - lo
    for level in range(max_level):
        h = width / (1 << level)
        i = int((x - lo) / h)
        i = min(max(i, 0), (1 << level) - 1)
        z = lo + (i + 0.5) * h
        try:
            r = m.radius(z)
        except SingularPoint:
            continue
        if abs(x - z) < 2.0 * r:
            return (level << 32) | i
    raise SingularPoint(f"no cover element found for x={x!r}")


# ---------------------------------------------------------------------------
# overlap and edges
# ---------------------------------------------------------------------------

def _overlap_raw(theta1, u1, i1, theta2, u2, i2, eps):
    if abs(i1 - i2) > 3:  # p1/p2 = e^{+-eps} on the grid
        return False
    metric = abs(theta1 - theta2) + abs(1.0 / u1 - 1.0 / u2)
    log_thr = -(4.0 * eps / 3.0) * (i1 + i2)  # log (p1 p2)^4
    return lt_log_threshold(metric, log_thr)


def overlap_test(c1, c2):
    """The overlap relation between two charts (strict metric inequality)."""
    eps = c1.params.epsilon
    return _overlap_raw(c1.theta0, c1.u, c1.idx_p, c2.theta0, c2.u, c2.idx_p, eps)


def _edge_clauses(cfg, idx_delta,
                  theta_prev_w, u_prev_w, idxQ_w, theta0_w, u_w, ip,
                  theta0_v, u_v, theta1_v, u_next_v, iq, strong):
    eps = cfg.epsilon
    # (WE1)/(E1): overlap of the pulled-back chart with v, both at size q
    if not _overlap_raw(theta_prev_w, u_prev_w, iq, theta0_v, u_v, iq, eps):
        return False
    if not strong:
        return ip >= iq - 3  # (WE2) p <= e^eps q
    # (E2.1) d(theta_1[y], theta_0[x]) < q
    if not lt_log_threshold(abs(theta1_v - theta0_w), cfg.grid_log(iq)):
        return False
    # (E2.2) u(f y)/u(x) = e^{+-q}
    if u_next_v != u_w:
        r = abs(math.log(u_next_v / u_w))
        if not lt_log_threshold(r, cfg.grid_log(iq), strict=False):
            return False
    # (E2.3) p = min(e^eps q, delta_eps Q(x)) exactly on the grid
    return ip == max(iq - 3, idx_delta + idxQ_w)


def edge_test(m, v, w, cfg, strong=True):
    """Edge v <- w between charts (v = Psi_y^q, w = Psi_x^p).

    Evaluates the overlap clause on the f^{-1}-shifted chart of w against v
    and then the parameter clauses; the size equality of (E2.3) is exact
    integer arithmetic on the grid.
    """
    theta_prev_w = w.center.x(w.shift - 1)
    u_prev_w = w.params.u_prev
    theta1_v = v.center.x(v.shift + 1)
    u_next_v = pesin.u_at(v.center, cfg.chi, v.shift + 1)
    return _edge_clauses(cfg, cfg.delta_index,
                         theta_prev_w, u_prev_w, w.params.idxQ, w.theta0, w.u, w.idx_p,
                         v.theta0, v.u, theta1_v, u_next_v, v.idx_p, strong)


# ---------------------------------------------------------------------------
# alphabet
# ---------------------------------------------------------------------------

@dataclass
class Center:
    cid: int
    window: object
    shift: int
    gamma: Gamma
    params: pesin.PesinParams
    key: BinKey
    j_bins: set
    seen_q: set = field(default_factory=set)  # greedy q indices seen in samples
    sizes: list = field(default_factory=list)


@dataclass
class Vertex:
    vid: int
    cid: int
    chart: Chart
    gamma: Gamma

    @property
    def idx_p(self):
        return self.chart.idx_p


@dataclass
class Alphabet:
    cfg: PesinConfig
    centers: list
    bins: dict                 # BinKey -> [cid]
    vertices: list             # Vertex
    vertex_index: dict         # (cid, idx_p) -> vid
    e1_index: dict             # (theta0, 1/u) -> [cid]
    skipped: int               # samples rejected by the certificate

    def find_center(self, gamma, key):
        for cid in self.bins.get(key, ()):
            c = self.centers[cid]
            if c.gamma.idxQ == gamma.idxQ and net_match(gamma, c.gamma, key.j):
                return c
        return None


def _gamma_and_bin(m, cfg, tables, k):
    w = tables.w
    theta = (w.x(k - 1), w.x(k), w.x(k + 1))
    u3 = (tables.u[k - 1], tables.u[k], tables.u[k + 1])
    gamma = Gamma(theta=theta, u=u3, idxQ=tables.idxQ[k])
    kbins = tuple(int(math.ceil(-math.log(m.singular_distance(t)))) - 1 for t in theta)
    lbins = tuple(int(math.floor(math.log(ui))) for ui in u3)
    abins = tuple(cover_id(m, t) for t in theta)
    mbin = int(math.ceil((cfg.epsilon / 3.0) * tables.idxQ[k])) - 1
    j = tables.j_bin(k)
    return gamma, BinKey(k=kbins, l=lbins, a=abins, m=mbin, j=j)


def _size_indices(cfg, j, idxQ, cap=None):
    """Grid indices allowed by (CG2): p in [e^{-j-2}, e^{-j+2}], p <= delta Q.

    A cap keeps the largest admissible sizes; callers must re-add any
    canonical sizes the cap may drop (build_alphabet unions the greedy q
    indices seen in the samples).
    """
    lo_idx = int(math.ceil(3.0 * (j - 2) / cfg.epsilon))
    hi_idx = int(math.floor(3.0 * (j + 2) / cfg.epsilon))
    lo_idx = max(lo_idx, cfg.delta_index + idxQ)
    idxs = range(lo_idx, hi_idx + 1)
    if cap is not None and len(idxs) > cap:
        idxs = idxs[:cap]
    return list(idxs)


def _group_samples(samples):
    """Group shifted views of a shared underlying window."""
    groups = {}
    for w in samples:
        key = (id(w.points), w.u_depth)
        groups.setdefault(key, []).append(w)
    return groups


def build_alphabet(m, samples, cfg, sizes_per_center=None):
    """Discretize a library of certified windows into a chart alphabet.

    Each sample contributes its index-0 data; samples failing the
    expansion certificate are skipped and counted.  Samples are processed
    in serialized-key order so the greedy net is reproducible.
    """
    entries = []  # (sort_key, tables, k)
    skipped = 0
    for group in _group_samples(samples).values():
        base = min(group, key=lambda w: w.off)
        tabs = window_tables(m, base, cfg)
        if not tabs.certified:
            skipped += len(group)
            continue
        for w in group:
            k = w.off - base.off
            if not (tabs.lo <= k <= tabs.hi):
                skipped += 1
                continue
            entries.append((w.record(), tabs, k))
    entries.sort(key=lambda e: e[0])

    centers = []
    bins = {}
    for _, tabs, k in entries:
        gamma, key = _gamma_and_bin(m, cfg, tabs, k)
        hit = None
        for cid in bins.get(key, ()):
            if net_match(gamma, centers[cid].gamma, key.j):
                hit = centers[cid]
                break
        if hit is None:
            hit = Center(cid=len(centers), window=tabs.w, shift=k, gamma=gamma,
                         params=tabs.params_at(k), key=key, j_bins=set())
            centers.append(hit)
            bins.setdefault(key, []).append(hit.cid)
        hit.j_bins.add(key.j)
        hit.seen_q.add(tabs.idx_q[k])

    vertices = []
    vertex_index = {}
    e1_index = {}
    for c in centers:
        sizes = set(c.seen_q)
        for j in sorted(c.j_bins):
            sizes.update(_size_indices(cfg, j, c.gamma.idxQ, cap=sizes_per_center))
        c.sizes = sorted(sizes)
        e1_index.setdefault((c.gamma.theta[1], 1.0 / c.gamma.u[1]), []).append(c.cid)
        for ip in c.sizes:
            chart = Chart(center=c.window, shift=c.shift, params=c.params, idx_p=ip)
            v = Vertex(vid=len(vertices), cid=c.cid, chart=chart, gamma=c.gamma)
            vertices.append(v)
            vertex_index[(c.cid, ip)] = v.vid

    return Alphabet(cfg=cfg, centers=centers, bins=bins, vertices=vertices,
                    vertex_index=vertex_index, e1_index=e1_index, skipped=skipped)


# ---------------------------------------------------------------------------
# the gpo graph
# ---------------------------------------------------------------------------

@dataclass
class GpoGraph:
    """Strong-edge adjacency over the alphabet's charts.

    Successor lists follow shift order (an edge v -> w in the adjacency
    means the chart w may follow v in a gpo, i.e. the construction's
    v <- w).  Weak edges are exposed as a predicate plus lazy enumeration;
    they are a superset of the strong edges.
    """

    alphabet: Alphabet
    out_edges: list            # vid -> sorted list of successor vids
    in_edges: list
    bin_index: dict            # BinKey -> [vid]

    @property
    def vertices(self):
        return self.alphabet.vertices

    def n_vertices(self):
        return len(self.alphabet.vertices)

    def n_edges(self):
        return sum(len(o) for o in self.out_edges)

    def weak_successors(self, vid):
        """Lazy (WE1)+(WE2) successors of a vertex."""
        al = self.alphabet
        v = al.vertices[vid]
        out = []
        for w in al.vertices:
            key = (w.gamma.theta[0], 1.0 / w.gamma.u[0])
            if key != (v.gamma.theta[1], 1.0 / v.gamma.u[1]):
                continue
            if _edge_test_vertices(al.cfg, v, w, strong=False):
                out.append(w.vid)
        return out

    def log_p(self, vid):
        return self.alphabet.vertices[vid].chart.log_p

    def vertices_with_log_p_above(self, t_log):
        """Discreteness enumeration through the bin index."""
        j_max = 2.0 - t_log
        out = []
        for key, vids in self.bin_index.items():
            if key.j <= j_max:
                out.extend(v for v in vids if self.log_p(v) > t_log)
        return sorted(out)


def _edge_test_vertices(cfg, v, w, strong=True):
    return _edge_clauses(
        cfg, cfg.delta_index,
        w.gamma.theta[0], w.gamma.u[0], w.gamma.idxQ,
        w.gamma.theta[1], w.gamma.u[1], w.idx_p,
        v.gamma.theta[1], v.gamma.u[1], v.gamma.theta[2], v.gamma.u[2],
        v.idx_p, strong,
    )


def build_graph(alphabet):
    """Materialize strong edges.

    For a successor chart w of size p, (E2.3) forces either q = e^{-eps} p
    (one candidate size) or, when p is capped at delta Q(x), any q >=
    e^{-eps} p; candidates are found through the exact-match center index.
    """
    cfg = alphabet.cfg
    nd = cfg.delta_index
    nv = len(alphabet.vertices)
    out_edges = [[] for _ in range(nv)]
    in_edges = [[] for _ in range(nv)]
    for w in alphabet.vertices:
        key = (w.gamma.theta[0], 1.0 / w.gamma.u[0])
        cap = nd + w.gamma.idxQ
        ip = w.idx_p
        if ip < cap:
            continue  # (E2.3) unreachable
        for cid in alphabet.e1_index.get(key, ()):
            c = alphabet.centers[cid]
            if ip > cap:
                cand = [ip + 3] if (c.cid, ip + 3) in alphabet.vertex_index else []
            else:
                cand = [iq for iq in c.sizes if iq <= ip + 3]
            for iq in cand:
                v = alphabet.vertices[alphabet.vertex_index[(cid, iq)]]
                if _edge_test_vertices(cfg, v, w, strong=True):
                    out_edges[v.vid].append(w.vid)
                    in_edges[w.vid].append(v.vid)
    bin_index = {}
    for c in alphabet.centers:
        for ip in c.sizes:
            bin_index.setdefault(c.key, []).append(alphabet.vertex_index[(c.cid, ip)])
    for lst in out_edges:
        lst.sort()
    for lst in in_edges:
        lst.sort()
    return GpoGraph(alphabet=alphabet, out_edges=out_edges, in_edges=in_edges,
                    bin_index=bin_index)


def prune_relevant(g):
    """Keep exactly the vertices on some bi-infinite strong path.

    Iteratively deletes vertices lacking an incoming or outgoing strong
    edge (the finite-graph proxy for relevance); returns (pruned graph,
    kept vertex ids).
    """
    nv = g.n_vertices()
    alive = [bool(g.out_edges[v]) and bool(g.in_edges[v]) for v in range(nv)]
    out_deg = [len(g.out_edges[v]) for v in range(nv)]
    in_deg = [len(g.in_edges[v]) for v in range(nv)]
    stack = [v for v in range(nv) if not alive[v]]
    while stack:
        v = stack.pop()
        for w in g.out_edges[v]:
            if alive[w]:
                in_deg[w] -= 1
                if in_deg[w] == 0:
                    alive[w] = False
                    stack.append(w)
        for u in g.in_edges[v]:
            if alive[u]:
                out_deg[u] -= 1
                if out_deg[u] == 0:
                    alive[u] = False
                    stack.append(u)
        alive[v] = False
    kept = [v for v in range(nv) if alive[v]]
    keep = set(kept)
    out_edges = [[w for w in g.out_edges[v] if w in keep] if v in keep else []
                 for v in range(nv)]
    in_edges = [[u for u in g.in_edges[v] if u in keep] if v in keep else []
                for v in range(nv)]
    bin_index = {key: [v for v in vids if v in keep]
                 for key, vids in g.bin_index.items()}
    bin_index = {k: v for k, v in bin_index.items() if v}
    pruned = GpoGraph(alphabet=g.alphabet, out_edges=out_edges, in_edges=in_edges,
                      bin_index=bin_index)
    return pruned, kept


# ---------------------------------------------------------------------------
# the canonical sufficiency encoding
# ---------------------------------------------------------------------------

def sufficiency_encode(m, w, alphabet, cfg, lo=None, hi=None, tables=None):
    """Encode a certified window as a chart chain over the alphabet.

    For each index the net representative of the shifted data is selected
    and the chart size follows the window-truncated greedy rule; strong
    edges between consecutive entries are verified and any failure is
    recorded on the returned gpo.
    """
    tabs = tables or window_tables(m, w, cfg, lo=lo, hi=hi)
    if not tabs.certified:
        raise ValueError("window fails the expansion certificate")
    lo = tabs.lo if lo is None else max(lo, tabs.lo)
    hi = tabs.hi if hi is None else min(hi, tabs.hi)

    charts = []
    vids = []
    for n in range(lo, hi + 1):
        gamma, key = _gamma_and_bin(m, cfg, tabs, n)
        center = alphabet.find_center(gamma, key)
        if center is None:
            raise NoNetVertex(f"no net representative for index {n} (bin {key})")
        ip = tabs.idx_q[n]
        vid = alphabet.vertex_index.get((center.cid, ip))
        if vid is None:
            raise NoNetVertex(
                f"size index {ip} missing for center {center.cid} at index {n}")
        charts.append(alphabet.vertices[vid].chart)
        vids.append(vid)

    failures = []
    strengths = []
    for i in range(len(charts) - 1):
        v, x = alphabet.vertices[vids[i]], alphabet.vertices[vids[i + 1]]
        ok = _edge_test_vertices(cfg, v, x, strong=True)
        strengths.append("strong" if ok else "broken")
        if not ok:
            failures.append(lo + i)
    return Gpo(charts=tuple(charts), n_lo=lo, strengths=tuple(strengths),
               edge_failures=tuple(failures)), vids
