"""Versioned text artifacts: window libraries, chart/graph dumps, reports.

Every machine-readable file starts with a ``# symdyn-<kind> <version>``
header line.  Writers iterate in deterministic order and render floats
with repr (round-trip exact), so identical runs produce identical bytes.
"""

import json
import math

from . import natural_extension as ne

VERSION = 1


def _header(kind):
    return f"# symdyn-{kind} {VERSION}\n"


def write_windows(path, windows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header("windows"))
        for w in windows:
            fh.write(w.record() + "\n")


def read_windows(path, m):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.readline()
        if not head.startswith("# symdyn-windows"):
            raise ValueError(f"{path}: not a window library")
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(ne.parse_record(m, line))
    return out


def chart_record(chart):
    w = chart.center
    word = ",".join(str(b) for b in
                    (w.branch_ids[w.off + chart.shift - k] for k in range(1, w.back_len + chart.shift + 1)))
    return (f"x0={chart.theta0!r} u={chart.u!r} logQ={chart.params.logQ!r} "
            f"log_p={chart.log_p!r} idx_p={chart.idx_p} back={word}")


def write_alphabet(path, alphabet):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header("alphabet"))
        fh.write(f"# centers={len(alphabet.centers)} charts={len(alphabet.vertices)}\n")
        for v in alphabet.vertices:
            fh.write(f"V{v.vid} c{v.cid} " + chart_record(v.chart) + "\n")


def write_graph(path, g, include_weak_limit=2000):
    """Line-oriented graph export: vertex records then edge records.

    Weak edges are enumerated only for graphs at or under the given vertex
    count (the weak relation is ~100x denser than the strong one).
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header("graph"))
        for v in g.alphabet.vertices:
            if g.out_edges[v.vid] or g.in_edges[v.vid]:
                fh.write(f"V {v.vid} x0={v.chart.theta0!r} u={v.chart.u!r} "
                         f"idx_p={v.chart.idx_p}\n")
        for vid, outs in enumerate(g.out_edges):
            for w in outs:
                fh.write(f"E {vid} {w} S\n")
        if g.n_vertices() <= include_weak_limit:
            strong = {(v, w) for v, outs in enumerate(g.out_edges) for w in outs}
            for vid in range(g.n_vertices()):
                if not (g.out_edges[vid] or g.in_edges[vid]):
                    continue
                for w in g.weak_successors(vid):
                    if (vid, w) not in strong:
                        fh.write(f"E {vid} {w} W\n")


def write_dot(path, adjacency, name="g"):
    """Graphviz export of an adjacency dict."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"// symdyn-dot {VERSION}\n")
        fh.write(f"digraph {name} {{\n")
        for v in sorted(adjacency):
            for w in adjacency[v]:
                fh.write(f"  n{v} -> n{w};\n")
        fh.write("}\n")


def write_partition(path, cells, tg):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header("partition"))
        for c in cells:
            sig = ";".join(f"{i},{j}:{ab}" for (i, j), ab in c.signature)
            members = ";".join(f"{i},{pi}" for i, pi in c.members)
            fh.write(f"C {c.cell_id} rect={c.rect} sig={sig} members={members}\n")
        for r, outs in enumerate(tg.out_edges):
            for s in outs:
                fh.write(f"E {r} {s}\n")


def write_shadows(path, results):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header("shadows"))
        for r in results:
            fh.write(r.point.record() +
                     f" tau0={r.tau0!r} log_p0={r.log_p0!r}"
                     f" log_err={r.log_error_bound!r}\n")


def _jsonable(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    return x


def write_report(path, kind, lines, records):
    """Human-readable lines plus machine-readable JSON-lines records."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header(kind))
        for ln in lines:
            fh.write("# " + ln + "\n")
        for rec in records:
            fh.write(json.dumps({k: _jsonable(v) for k, v in rec.items()},
                                sort_keys=True) + "\n")
