"""Orbit libraries: periodic cycles and certified random windows.

The periodic library enumerates periodic orbits up to a given period,
closes each into its bitwise backward cycle, and emits one window per
phase (all phases share the cycle arrays, so the coarse-graining net
dedupes them consistently).  Orbits passing through the singular set's
exclusion zone are skipped and counted.
"""

from dataclasses import dataclass

import numpy as np

from . import natural_extension as ne
from .analysis import map_periodic_points
from .map_model import MAPKIND_GAUSS, SingularPoint
from .pesin import expansion_certificate

ORBIT_TOL = 1e-9


@dataclass
class LibraryReport:
    windows: list
    orbits: int
    skipped_singular: int
    skipped_uncertified: int

    def lines(self):
        return [
            f"library: {len(self.windows)} windows from {self.orbits} orbits "
            f"({self.skipped_singular} orbits skipped near the singular set, "
            f"{self.skipped_uncertified} samples failed the certificate)"
        ]


def _minimal_period(m, x, n):
    orbit = [x]
    for _ in range(n - 1):
        orbit.append(m.f(orbit[-1]))
    for p in range(1, n):
        if n % p == 0 and abs(m.f(orbit[p - 1]) - x) <= ORBIT_TOL:
            return p, orbit[:p]
    return n, orbit


def periodic_library(m, chi, max_period, back_depth=64, fwd_len=64,
                     u_depth=None, n_min=6, branch_limit=None):
    """Windows along every periodic orbit of period <= max_period.

    One bitwise cycle per orbit, one window per phase; uncertified cycles
    (expansion below chi somewhere along the orbit) are dropped.
    """
    seen = []
    windows = []
    orbits = 0
    skipped_singular = 0
    skipped_uncert = 0
    for n in range(1, max_period + 1):
        for x in map_periodic_points(m, n, branch_limit):
            if any(abs(x - s) <= ORBIT_TOL for s in seen):
                continue
            try:
                p, orbit = _minimal_period(m, x, n)
            except SingularPoint:
                skipped_singular += 1
                continue
            if p != n:
                continue  # picked up at its own period already
            seen.extend(orbit)
            try:
                word = [m.branch_at(c) for c in orbit]
                w = ne.make_periodic_window(m, x, word, back_depth, fwd_len,
                                            u_depth=u_depth)
            except SingularPoint:
                skipped_singular += 1
                continue
            if not m.window_chartable(w.points):
                skipped_singular += 1
                continue
            if not expansion_certificate(w, chi, n_min).ok:
                skipped_uncert += p
                continue
            orbits += 1
            # emit one window per phase of the *float* cycle, which may be
            # a multiple of the orbit period (rounding oscillation)
            windows.extend(w.shift(k) for k in range(w.period))
    return LibraryReport(windows=windows, orbits=orbits,
                         skipped_singular=skipped_singular,
                         skipped_uncertified=skipped_uncert)


def _draw_back_word(m, rng, depth, gauss_branch_limit=12):
    if m.map_kind == MAPKIND_GAUSS:
        ns = np.arange(1, gauss_branch_limit + 1, dtype=np.float64)
        wts = 1.0 / (ns * (ns + 1.0))
        wts /= wts.sum()
        return rng.choice(np.arange(1, gauss_branch_limit + 1), size=depth, p=wts)
    nb = m.table.shape[0]
    return rng.integers(0, nb, size=depth)


def random_library(m, chi, count, back_depth=40, fwd_len=40, seed=0,
                   n_min=6, max_tries=None):
    """Certified random windows: uniform base points, random backward words."""
    rng = np.random.default_rng(seed)
    windows = []
    skipped_singular = 0
    skipped_uncert = 0
    tries = 0
    cap = max_tries or 50 * max(count, 1)
    while len(windows) < count and tries < cap:
        tries += 1
        x0 = m.draw_regular_points(1, rng)
        if x0.size == 0:
            skipped_singular += 1
            continue
        word = np.asarray(_draw_back_word(m, rng, back_depth), dtype=np.int64)
        try:
            w = ne.make_window(m, float(x0[0]), word, fwd_len)
        except (SingularPoint, ValueError):
            skipped_singular += 1
            continue
        if not m.window_chartable(w.points):
            skipped_singular += 1
            continue
        if not expansion_certificate(w, chi, n_min).ok:
            skipped_uncert += 1
            continue
        windows.append(w)
    return LibraryReport(windows=windows, orbits=len(windows),
                         skipped_singular=skipped_singular,
                         skipped_uncertified=skipped_uncert)
