"""Batch front end: subcommands over a config file, deterministic artifacts.

    symdyn <subcommand> [--config FILE] [--out DIR] [--map NAME] [overrides]

Subcommands: verify-map, sample-orbits, alphabet, graph, shadow,
inverse-audit, refine, entropy, periodic-report, full-pipeline.  Every
artifact is a versioned text file under --out; reruns with the same
config and seed are byte-identical.
"""

import argparse
import json
import os
import sys
import traceback

from . import analysis, coarse_grain, formats, library, markov_refine, shadowing
from .config import RunConfig, load_config, parse_config
from .map_model import load_map
from .pesin import PesinConfig


def _pesin_cfg(cfg):
    return PesinConfig(chi=cfg.chi, epsilon=cfg.epsilon, n_min=cfg.n_min)


def _ensure_out(out):
    os.makedirs(out, exist_ok=True)
    return out


def _say(quiet, *parts):
    if not quiet:
        print(*parts)


# ---------------------------------------------------------------------------
# pipeline stages (each returns data for downstream stages)
# ---------------------------------------------------------------------------

def stage_verify(m, cfg, out, quiet):
    rep = m.verify_regularity(cfg.samples, seed=cfg.seed)
    recs = [{"clause": c.name, "passed": c.passed, "checked": c.checked,
             "violations": c.violations, "worst_margin": c.worst_margin,
             "worst_x": c.worst_x} for c in rep.clauses.values()]
    recs.append({"clause": "extreme", "x": rep.extreme_x, "value": rep.extreme_value})
    formats.write_report(os.path.join(out, "regularity.report"), "regularity",
                         rep.lines(), recs)
    for ln in rep.lines():
        _say(quiet, ln)
    if not rep.passed:
        raise RuntimeError("regularity verification failed")
    return rep


def stage_library(m, cfg, out, quiet, u_depth=None):
    lib = library.periodic_library(
        m, cfg.chi, cfg.max_period, back_depth=cfg.back_depth,
        fwd_len=max(cfg.fwd_len, cfg.encode_hi + 2), u_depth=u_depth,
        n_min=cfg.n_min)
    formats.write_windows(os.path.join(out, "windows.txt"), lib.windows)
    for ln in lib.lines():
        _say(quiet, ln)
    return lib


def stage_alphabet(m, cfg, pcfg, windows, out, quiet):
    al = coarse_grain.build_alphabet(
        m, windows, pcfg, sizes_per_center=cfg.sizes_per_center or None)
    formats.write_alphabet(os.path.join(out, "alphabet.txt"), al)
    _say(quiet, f"alphabet: {len(al.centers)} centers, {len(al.vertices)} charts, "
                f"{al.skipped} samples skipped")
    return al


def stage_graph(m, cfg, pcfg, al, out, quiet):
    g = coarse_grain.build_graph(al)
    pg, kept = coarse_grain.prune_relevant(g)
    formats.write_graph(os.path.join(out, "graph.txt"), pg)
    formats.write_dot(os.path.join(out, "graph.dot"),
                      {v: pg.out_edges[v] for v in kept})
    _say(quiet, f"graph: {g.n_edges()} strong edges; pruned to {len(kept)} "
                f"relevant vertices, {pg.n_edges()} edges")
    return g, pg, kept


def stage_shadow(m, cfg, pcfg, al, windows, out, quiet):
    groups = {}
    for w in windows:
        groups.setdefault(id(w.points), []).append(w)
    reps = sorted((min(g, key=lambda w: w.off) for g in groups.values()),
                  key=lambda w: w.record())
    results = []
    failures = 0
    for w in reps:
        hi = min(cfg.encode_hi, w.fwd_len - 1)
        try:
            gpo, _ = coarse_grain.sufficiency_encode(m, w, al, pcfg,
                                                     lo=cfg.encode_lo, hi=hi)
            results.append(shadowing.shadow(m, gpo, pcfg))
        except (coarse_grain.NoNetVertex, shadowing.EdgeBroken):
            failures += 1
    formats.write_shadows(os.path.join(out, "shadows.txt"), results)
    worst = max((r.worst_containment for r in results), default=0.0)
    _say(quiet, f"shadow: {len(results)} gpos shadowed, {failures} failures, "
                f"worst containment {worst:.3g}")
    return results


def stage_inverse(m, cfg, pcfg, out, quiet):
    """Double-coding audit: two u-truncation families over the same orbits."""
    base = min(cfg.back_depth, 30)
    libs = [stage_library(m, cfg, out, True, u_depth=d) for d in (base, base + 4)]
    windows = libs[0].windows + libs[1].windows
    al = coarse_grain.build_alphabet(m, windows, pcfg,
                                     sizes_per_center=cfg.sizes_per_center or None)
    lines = []
    records = []
    audited = 0
    failed = 0
    hi = cfg.encode_hi

    def reps(lib):
        groups = {}
        for w in lib.windows:
            groups.setdefault(id(w.points), []).append(w)
        return {round(min(g, key=lambda w: w.off).x0, 9): min(g, key=lambda w: w.off)
                for g in groups.values()}

    reps_a, reps_b = reps(libs[0]), reps(libs[1])
    for key in sorted(set(reps_a) & set(reps_b)):
        wa, wb = reps_a[key], reps_b[key]
        try:
            g1, _ = coarse_grain.sufficiency_encode(m, wa, al, pcfg, lo=0, hi=hi)
            g2, _ = coarse_grain.sufficiency_encode(m, wb, al, pcfg, lo=0, hi=hi)
            rep = shadowing.inverse_check(m, g1, g2, pcfg)
        except (coarse_grain.NoNetVertex, shadowing.NotDoubleCoding,
                shadowing.EdgeBroken) as e:
            lines.append(f"orbit x0={wa.x0!r}: {type(e).__name__}: {e}")
            failed += 1
            continue
        audited += 1
        if not rep.passed:
            failed += 1
        lines.extend(rep.lines())
        records.append({"x0": wa.x0, "passed": rep.passed,
                        "recurrence": json.dumps(rep.recurrence, sort_keys=True)})
    lines.insert(0, f"double codings audited: {audited}, failures: {failed}")
    formats.write_report(os.path.join(out, "inverse.report"), "inverse",
                         lines, records)
    _say(quiet, lines[0])
    if failed:
        raise RuntimeError("inverse audit failed")
    return audited


def stage_refine(m, cfg, pcfg, pg, out, quiet):
    cover, dropped = markov_refine.build_cover(
        m, pg, pcfg, paths_per_vertex=cfg.paths_per_vertex,
        window=cfg.cover_window, seed=cfg.seed)
    cells = markov_refine.refine(cover)
    tg = markov_refine.hat_graph(cover, cells)
    audit = markov_refine.audits(tg)
    formats.write_partition(os.path.join(out, "partition.txt"), cells, tg)
    formats.write_dot(os.path.join(out, "sigma_hat.dot"), tg.adjacency(),
                      name="sigma_hat")
    formats.write_report(os.path.join(out, "markov.report"), "markov",
                         audit.lines(),
                         [{"rectangles": len(cover), "cells": len(cells),
                           "dropped": dropped,
                           "markov_failures": audit.markov_failures,
                           "preimage_max": audit.preimage_max}])
    for ln in audit.lines():
        _say(quiet, ln)
    if not audit.passed:
        raise RuntimeError("markov audit failed")
    return cover, cells, tg, audit


def stage_entropy(m, cfg, pg, out, quiet, tg=None):
    est = analysis.gurevich_entropy(pg)
    lines = est.lines()
    if tg is not None:
        lines += ["refined shift:"] + analysis.gurevich_entropy(tg).lines()
    formats.write_report(os.path.join(out, "entropy.report"), "entropy", lines,
                         [{"loop_growth": est.loop_growth,
                           "trace_slope": est.trace_slope,
                           "spectral_radius": est.spectral_radius}])
    for ln in lines:
        _say(quiet, ln)
    return est


def stage_growth(m, cfg, pg, out, quiet):
    rep = analysis.growth_report(m, pg, n_max=min(cfg.max_period + 2, 12))
    formats.write_report(os.path.join(out, "growth.report"), "growth",
                         rep.lines(),
                         [{"n": n, "map_count": mc, "closed_paths": sc}
                          for n, mc, sc, _ in rep.rows])
    for ln in rep.lines():
        _say(quiet, ln)
    return rep


# ---------------------------------------------------------------------------
# CLI plumbing
# ---------------------------------------------------------------------------

COMMANDS = ("verify-map", "sample-orbits", "alphabet", "graph", "shadow",
            "inverse-audit", "refine", "entropy", "periodic-report",
            "full-pipeline")


def build_parser():
    p = argparse.ArgumentParser(prog="symdyn", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="path to a run-config file")
    p.add_argument("--out", default="symdyn-out", help="artifact directory")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--map", dest="map_name", help="built-in name or map file")
    p.add_argument("--chi", type=float)
    p.add_argument("--eps", "--epsilon", dest="epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--max-period", dest="max_period", type=int)
    p.add_argument("--workers", type=int)
    return p


def resolve_config(args):
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    overrides = []
    for key, attr in (("map", "map_name"), ("chi", "chi"), ("epsilon", "epsilon"),
                      ("seed", "seed"), ("samples", "samples"),
                      ("max_period", "max_period"), ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            overrides.append(f"{key} = {val}")
    if overrides:
        cfg = parse_config("\n".join(overrides), base=cfg)
    return cfg


def run(command, cfg, out, quiet=False):
    out = _ensure_out(out)
    m = load_map(cfg.map)
    pcfg = _pesin_cfg(cfg)

    if command == "verify-map":
        stage_verify(m, cfg, out, quiet)
        return
    if command == "inverse-audit":
        stage_inverse(m, cfg, pcfg, out, quiet)
        return

    lib = stage_library(m, cfg, out, quiet)
    if command == "sample-orbits":
        return
    samples = []
    for w in lib.windows:
        samples.append(w)
    al = stage_alphabet(m, cfg, pcfg, samples, out, quiet)
    if command == "alphabet":
        _discreteness_audit(al, quiet)
        return
    g, pg, kept = stage_graph(m, cfg, pcfg, al, out, quiet)
    if command == "graph":
        return
    if command == "shadow":
        stage_shadow(m, cfg, pcfg, al, lib.windows, out, quiet)
        return
    if command == "refine":
        stage_refine(m, cfg, pcfg, pg, out, quiet)
        return
    if command == "entropy":
        stage_entropy(m, cfg, pg, out, quiet)
        return
    if command == "periodic-report":
        stage_growth(m, cfg, pg, out, quiet)
        return
    if command == "full-pipeline":
        stage_verify(m, cfg, out, quiet)
        stage_shadow(m, cfg, pcfg, al, lib.windows, out, quiet)
        cover, cells, tg, audit = stage_refine(m, cfg, pcfg, pg, out, quiet)
        stage_entropy(m, cfg, pg, out, quiet, tg=tg)
        stage_growth(m, cfg, pg, out, quiet)
        return
    raise ValueError(f"unhandled command {command!r}")


def _discreteness_audit(al, quiet):
    g = coarse_grain.build_graph(al)
    kept = 0
    for t in (-1e9, -500.0, -380.0):
        via_bins = g.vertices_with_log_p_above(t)
        brute = sorted(v.vid for v in al.vertices if v.chart.log_p > t)
        if via_bins != brute:
            raise RuntimeError(f"discreteness enumeration mismatch at t={t}")
        kept = len(via_bins)
    _say(quiet, f"discreteness audit passed ({kept} charts above the last threshold)")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        run(args.command, cfg, args.out, quiet=args.quiet)
    except (KeyError, ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}),
              file=sys.stderr)
        return 2
    except Exception as e:  # module errors: structured record, nonzero exit
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}),
              file=sys.stderr)
        if os.environ.get("SYMDYN_DEBUG"):
            traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
