"""Hot numeric kernels: branch-table map evaluation, orbit iteration and
periodic-point bisection.

Maps are encoded for the kernels as a ``(map_kind, table, sing)`` triple:

* ``map_kind == MAPKIND_TABLE``: ``table`` has one row per branch,
  ``[kind, lo, hi, c0, c1, c2, c3, inv_sign]`` with ``kind`` one of
  affine ``c0 + c1*x``, quadratic ``c0 + c1*x + c2*x**2`` or moebius
  ``(c0 + c1*x)/(c2 + c3*x)``; ``sing`` is the finite singular set.
* ``map_kind == MAPKIND_GAUSS``: branch ``n >= 1`` is the moebius map
  ``1/(4x) - n/2`` on ``(1/(2n+2), 1/(2n)]``; the singular set
  ``{0} u {1/(2n)}`` has a closed-form distance.

The sequential kernels exist in two lanes with identical semantics: a
numba ``@njit`` build and a pure-numpy/Python fallback.  Setting
``SYMDYN_NO_NUMBA=1`` in the environment selects the fallback lane;
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

MAPKIND_TABLE = 0
MAPKIND_GAUSS = 1

KIND_AFFINE = 0
KIND_QUADRATIC = 1
KIND_MOEBIUS = 2

_NO_NUMBA = os.environ.get("SYMDYN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _NO_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _NO_NUMBA = True

USE_NUMBA = not _NO_NUMBA


# ---------------------------------------------------------------------------
# scalar branch evaluation (compiled when numba is on; see rebinding below)
# ---------------------------------------------------------------------------

def _branch_index(map_kind, table, x):
    if map_kind == MAPKIND_GAUSS:
        n = int(np.floor(1.0 / (2.0 * x)))
        if n < 1:
            n = 1
        # floating floor can land one branch off near an endpoint
        if x <= 1.0 / (2.0 * (n + 1)):
            n += 1
        elif x > 1.0 / (2.0 * n):
            n -= 1
        return n
    nb = table.shape[0]
    for i in range(nb):
        if table[i, 1] <= x < table[i, 2]:
            return i
    if x == table[nb - 1, 2]:
        return nb - 1
    return -1


def _fwd(map_kind, table, bid, x):
    if map_kind == MAPKIND_GAUSS:
        return (1.0 - 2.0 * bid * x) / (4.0 * x)
    kind = int(table[bid, 0])
    c0 = table[bid, 3]
    c1 = table[bid, 4]
    c2 = table[bid, 5]
    c3 = table[bid, 6]
    if kind == KIND_AFFINE:
        return c0 + c1 * x
    if kind == KIND_QUADRATIC:
        return c0 + c1 * x + c2 * x * x
    return (c0 + c1 * x) / (c2 + c3 * x)


def _dfwd(map_kind, table, bid, x):
    if map_kind == MAPKIND_GAUSS:
        return -1.0 / (4.0 * x * x)
    kind = int(table[bid, 0])
    c0 = table[bid, 3]
    c1 = table[bid, 4]
    c2 = table[bid, 5]
    c3 = table[bid, 6]
    if kind == KIND_AFFINE:
        return c1
    if kind == KIND_QUADRATIC:
        return c1 + 2.0 * c2 * x
    den = c2 + c3 * x
    return (c1 * c2 - c0 * c3) / (den * den)


def _inv(map_kind, table, bid, y):
    if map_kind == MAPKIND_GAUSS:
        return 1.0 / (4.0 * y + 2.0 * bid)
    kind = int(table[bid, 0])
    c0 = table[bid, 3]
    c1 = table[bid, 4]
    c2 = table[bid, 5]
    c3 = table[bid, 6]
    if kind == KIND_AFFINE:
        return (y - c0) / c1
    if kind == KIND_QUADRATIC:
        s = table[bid, 7]
        disc = c1 * c1 - 4.0 * c2 * (c0 - y)
        if disc < 0.0:
            disc = 0.0
        return (-c1 + s * np.sqrt(disc)) / (2.0 * c2)
    return (c0 - c2 * y) / (c3 * y - c1)


def _dinv(map_kind, table, bid, y):
    if map_kind == MAPKIND_GAUSS:
        d = 4.0 * y + 2.0 * bid
        return -4.0 / (d * d)
    kind = int(table[bid, 0])
    c0 = table[bid, 3]
    c1 = table[bid, 4]
    c2 = table[bid, 5]
    c3 = table[bid, 6]
    if kind == KIND_AFFINE:
        return 1.0 / c1
    if kind == KIND_QUADRATIC:
        s = table[bid, 7]
        disc = c1 * c1 - 4.0 * c2 * (c0 - y)
        if disc <= 0.0:
            return np.inf
        return s / np.sqrt(disc)
    d = c3 * y - c1
    return (c1 * c2 - c0 * c3) / (d * d)


def _sing_dist(map_kind, table, sing, x):
    if map_kind == MAPKIND_GAUSS:
        best = abs(x)  # distance to 0
        if x > 0.0:
            n = int(np.floor(1.0 / (2.0 * x)))
            if n < 1:
                n = 1
            for m in range(n - 1, n + 2):
                if m >= 1:
                    d = abs(x - 1.0 / (2.0 * m))
                    if d < best:
                        best = d
        return best
    best = np.inf
    for i in range(sing.shape[0]):
        d = abs(x - sing[i])
        if d < best:
            best = d
    return best


# ---------------------------------------------------------------------------
# forward / backward orbits
# ---------------------------------------------------------------------------

def _forward_orbit(map_kind, table, x0, nsteps, exclusion, sing):
    """Iterate f; returns (points[n+1], branches[n], logderivs[n], signs[n],
    steps_done, ok).  Stops early (ok=False) if an iterate comes within
    ``exclusion`` of the singular set or leaves every branch domain."""
    pts = np.empty(nsteps + 1)
    bids = np.empty(nsteps, dtype=np.int64)
    ld = np.empty(nsteps)
    sg = np.empty(nsteps, dtype=np.int64)
    pts[0] = x0
    x = x0
    for k in range(nsteps):
        if _sing_dist(map_kind, table, sing, x) <= exclusion:
            return pts, bids, ld, sg, k, False
        b = _branch_index(map_kind, table, x)
        if b < 0:
            return pts, bids, ld, sg, k, False
        d = _dfwd(map_kind, table, b, x)
        if d == 0.0 or not np.isfinite(d):
            return pts, bids, ld, sg, k, False
        bids[k] = b
        ld[k] = np.log(abs(d))
        sg[k] = 1 if d > 0.0 else -1
        x = _fwd(map_kind, table, b, x)
        pts[k + 1] = x
    if _sing_dist(map_kind, table, sing, x) <= exclusion:
        return pts, bids, ld, sg, nsteps, False
    return pts, bids, ld, sg, nsteps, True


def _backward_orbit(map_kind, table, x0, word, exclusion, sing):
    """Iterate inverse branches along ``word``; word[k] is the branch that
    must contain x_{-k-1}.  Returns (points with points[k] = x_{-k},
    steps_done, ok)."""
    n = word.shape[0]
    pts = np.empty(n + 1)
    pts[0] = x0
    y = x0
    for k in range(n):
        b = word[k]
        y = _inv(map_kind, table, b, y)
        if _sing_dist(map_kind, table, sing, y) <= exclusion:
            return pts, k, False
        if _branch_index(map_kind, table, y) != b:
            return pts, k, False
        pts[k + 1] = y
    return pts, n, True


# ---------------------------------------------------------------------------
# periodic points: per-word cylinder + bisection on f^n(x) - x
# ---------------------------------------------------------------------------

def _compose_fwd(map_kind, table, word, x):
    for k in range(word.shape[0]):
        x = _fwd(map_kind, table, word[k], x)
    return x


def _periodic_root(map_kind, table, word, iters):
    """Root of f^n(x) = x on the cylinder of ``word``; returns (root, found).

    The cylinder is refined backward through inverse branches; the
    composition is monotone there, so bisection finds the unique root."""
    n = word.shape[0]
    lo = table[word[n - 1], 1]
    hi = table[word[n - 1], 2]
    for k in range(n - 2, -1, -1):
        b = word[k]
        a = _inv(map_kind, table, b, lo)
        c = _inv(map_kind, table, b, hi)
        if a > c:
            t = a
            a = c
            c = t
        if a < table[b, 1]:
            a = table[b, 1]
        if c > table[b, 2]:
            c = table[b, 2]
        if not a < c:
            return 0.0, False
        lo = a
        hi = c
    flo = _compose_fwd(map_kind, table, word, lo) - lo
    fhi = _compose_fwd(map_kind, table, word, hi) - hi
    if flo == 0.0:
        return lo, True
    if fhi == 0.0:
        return hi, True
    if (flo > 0.0) == (fhi > 0.0):
        return 0.0, False
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = _compose_fwd(map_kind, table, word, mid) - mid
        if fm == 0.0:
            return mid, True
        if (fm > 0.0) == (flo > 0.0):
            lo = mid
            flo = fm
        else:
            hi = mid
    return 0.5 * (lo + hi), True


if USE_NUMBA:
    _branch_index = njit(cache=True)(_branch_index)
    _fwd = njit(cache=True)(_fwd)
    _dfwd = njit(cache=True)(_dfwd)
    _inv = njit(cache=True)(_inv)
    _dinv = njit(cache=True)(_dinv)
    _sing_dist = njit(cache=True)(_sing_dist)
    _forward_orbit = njit(cache=True)(_forward_orbit)
    _backward_orbit = njit(cache=True)(_backward_orbit)
    _compose_fwd = njit(cache=True)(_compose_fwd)
    _periodic_root = njit(cache=True)(_periodic_root)

branch_index = _branch_index
fwd = _fwd
dfwd = _dfwd
inv = _inv
dinv = _dinv
sing_dist = _sing_dist
forward_orbit = _forward_orbit
backward_orbit = _backward_orbit
periodic_root = _periodic_root


# ---------------------------------------------------------------------------
# vectorized numpy lane for batch evaluation
# ---------------------------------------------------------------------------

def branch_index_vec(map_kind, table, x):
    x = np.asarray(x, dtype=np.float64)
    if map_kind == MAPKIND_GAUSS:
        safe = np.where(x > 1e-15, x, 1e-15)
        n = np.minimum(np.floor(1.0 / (2.0 * safe)), 1e18).astype(np.int64)
        n = np.maximum(n, 1)
        n = np.where(x <= 1.0 / (2.0 * (n + 1)), n + 1, n)
        n = np.where(x > 1.0 / (2.0 * n), n - 1, n)
        return n
    out = np.full(x.shape, -1, dtype=np.int64)
    for i in range(table.shape[0]):
        hit = (table[i, 1] <= x) & (x < table[i, 2])
        out = np.where(hit, i, out)
    out = np.where((out < 0) & (x == table[-1, 2]), table.shape[0] - 1, out)
    return out


def _coef_vec(map_kind, table, bid):
    if map_kind == MAPKIND_GAUSS:
        b = np.asarray(bid, dtype=np.float64)
        one = np.ones_like(b)
        return (
            np.full(b.shape, KIND_MOEBIUS, dtype=np.int64),
            one,
            -2.0 * b,
            np.zeros_like(b),
            4.0 * one,
            one,
        )
    rows = table[np.asarray(bid, dtype=np.int64)]
    return (
        rows[..., 0].astype(np.int64),
        rows[..., 3],
        rows[..., 4],
        rows[..., 5],
        rows[..., 6],
        rows[..., 7],
    )


def fwd_vec(map_kind, table, bid, x):
    kind, c0, c1, c2, c3, _ = _coef_vec(map_kind, table, bid)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        aff = c0 + c1 * x
        quad = c0 + c1 * x + c2 * x * x
        moe = (c0 + c1 * x) / (c2 + c3 * x)
    return np.where(kind == KIND_AFFINE, aff, np.where(kind == KIND_QUADRATIC, quad, moe))


def dfwd_vec(map_kind, table, bid, x):
    kind, c0, c1, c2, c3, _ = _coef_vec(map_kind, table, bid)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        den = c2 + c3 * x
        moe = (c1 * c2 - c0 * c3) / (den * den)
    return np.where(kind == KIND_AFFINE, c1, np.where(kind == KIND_QUADRATIC, c1 + 2.0 * c2 * x, moe))


def inv_vec(map_kind, table, bid, y):
    kind, c0, c1, c2, c3, s = _coef_vec(map_kind, table, bid)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        aff = (y - c0) / np.where(c1 == 0.0, np.nan, c1)
        disc = np.maximum(c1 * c1 - 4.0 * c2 * (c0 - y), 0.0)
        quad = (-c1 + s * np.sqrt(disc)) / (2.0 * np.where(c2 == 0.0, np.nan, c2))
        moe = (c0 - c2 * y) / (c3 * y - c1)
    return np.where(kind == KIND_AFFINE, aff, np.where(kind == KIND_QUADRATIC, quad, moe))


def dinv_vec(map_kind, table, bid, y):
    kind, c0, c1, c2, c3, s = _coef_vec(map_kind, table, bid)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        aff = 1.0 / np.where(c1 == 0.0, np.nan, c1)
        disc = c1 * c1 - 4.0 * c2 * (c0 - y)
        quad = np.where(disc > 0.0, s / np.sqrt(np.abs(disc)), np.inf)
        den = c3 * y - c1
        moe = (c1 * c2 - c0 * c3) / (den * den)
    return np.where(kind == KIND_AFFINE, aff, np.where(kind == KIND_QUADRATIC, quad, moe))


def sing_dist_vec(map_kind, table, sing, x):
    x = np.asarray(x, dtype=np.float64)
    if map_kind == MAPKIND_GAUSS:
        best = np.abs(x)
        safe = np.where(x > 1e-15, x, 1e-15)
        n = np.minimum(np.floor(1.0 / (2.0 * safe)), 1e18).astype(np.int64)
        n = np.maximum(n, 1)
        for off in (-1, 0, 1):
            m = n + off
            valid = m >= 1
            d = np.abs(x - 1.0 / (2.0 * np.where(valid, m, 1)))
            best = np.where(valid & (d < best), d, best)
        return best
    if sing.shape[0] == 0:
        return np.full(x.shape, np.inf)
    return np.min(np.abs(x[..., None] - sing[None, :]), axis=-1)


def periodic_roots_numpy(map_kind, table, words, iters=200):
    """Vectorized cylinder refinement + bisection over a batch of words."""
    words = np.asarray(words, dtype=np.int64)
    w, n = words.shape
    lo = table[words[:, n - 1], 1].copy()
    hi = table[words[:, n - 1], 2].copy()
    alive = np.ones(w, dtype=bool)
    for k in range(n - 2, -1, -1):
        b = words[:, k]
        a = inv_vec(map_kind, table, b, lo)
        c = inv_vec(map_kind, table, b, hi)
        a2 = np.maximum(np.minimum(a, c), table[b, 1])
        c2 = np.minimum(np.maximum(a, c), table[b, 2])
        alive &= a2 < c2
        lo = np.where(alive, a2, 0.0)
        hi = np.where(alive, c2, 1.0)

    def compose(x):
        for k in range(n):
            x = fwd_vec(map_kind, table, words[:, k], x)
        return x

    flo = compose(lo) - lo
    fhi = compose(hi) - hi
    exact_lo = flo == 0.0
    exact_hi = (fhi == 0.0) & ~exact_lo
    root_exact = np.where(exact_lo, lo, np.where(exact_hi, hi, 0.0))
    alive &= exact_lo | exact_hi | ((flo > 0.0) != (fhi > 0.0))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = compose(mid) - mid
        same = (fm > 0.0) == (flo > 0.0)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    roots = np.where(exact_lo | exact_hi, root_exact, 0.5 * (lo + hi))
    return roots, alive


def periodic_roots(map_kind, table, words, iters=200):
    """Dispatch: njit per-word loop when numba is on, else vectorized numpy."""
    words = np.asarray(words, dtype=np.int64)
    if not USE_NUMBA:
        return periodic_roots_numpy(map_kind, table, words, iters)
    roots = np.empty(words.shape[0])
    found = np.empty(words.shape[0], dtype=bool)
    for i in range(words.shape[0]):
        r, ok = _periodic_root(map_kind, table, words[i], iters)
        roots[i] = r
        found[i] = ok
    return roots, found


def warmup(map_kind, table, sing):
    """Trigger JIT compilation of the scalar kernels (no-op on the numpy lane)."""
    if not USE_NUMBA:
        return
    x = 0.5 * (table[0, 1] + table[0, 2]) if map_kind == MAPKIND_TABLE else 0.3
    b = branch_index(map_kind, table, x)
    fwd(map_kind, table, b, x)
    dfwd(map_kind, table, b, x)
    y = fwd(map_kind, table, b, x)
    inv(map_kind, table, b, y)
    dinv(map_kind, table, b, y)
    sing_dist(map_kind, table, sing, x)
    forward_orbit(map_kind, table, x, 4, 1e-15, sing)
    backward_orbit(map_kind, table, x, np.array([b, b], dtype=np.int64), 1e-15, sing)
    if map_kind == MAPKIND_TABLE:
        _periodic_root(map_kind, table, np.array([0], dtype=np.int64), 8)
