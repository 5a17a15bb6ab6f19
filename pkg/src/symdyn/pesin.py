"""Pesin-theoretic parameters and charts.

The hyperbolicity parameter u, the chart scale ladder (Q-tilde, Q, the
grid I_eps = {e^{-eps*n/3}}, delta_eps, the greedy q), affine charts
Psi(t) = t/u + x0, and the inverse-branch chart maps G = Psi_to^{-1} o g
o Psi_from with their linear + residual decomposition.

Scales routinely sit far below double precision (log Q is typically a few
hundred negative), so every size is carried as a natural log plus an exact
integer index on the grid I_eps, and chart maps are evaluated either in
linear space with cancellation-free difference forms (when the scale is
representable) or through analytic curvature bounds in log space.
"""

import math
from dataclasses import dataclass

import numpy as np

from .natural_extension import OrbitWindow

LOG10 = math.log(10.0)
LINEAR_MODE_FLOOR = -600.0  # below this log-scale, fall back to log-mode bounds


class TailDiverges(RuntimeError):
    """compute_u called on a window whose expansion margin is non-positive."""


class DomainViolation(RuntimeError):
    """A chart-map precondition (domain inclusion) failed."""


@dataclass(frozen=True)
class PesinConfig:
    """Run parameters for the chart machinery.

    The lemmas behind the construction hold only "for epsilon small
    enough" with no explicit threshold; 0.1 is the default working value
    and the test suite flags epsilon values at which assertions fail.
    """

    chi: float
    epsilon: float = 0.1
    n_min: int = 6          # smallest block length tested by the certificate

    def __post_init__(self):
        if not (self.chi > 0 and 0 < self.epsilon < 1):
            raise ValueError("need chi > 0 and epsilon in (0,1)")

    def grid_log(self, idx):
        """log of the I_eps grid point with integer index idx."""
        return -(self.epsilon / 3.0) * idx

    @property
    def delta_index(self):
        """Grid index of delta_eps = e^{-eps*n}, n minimal with e^{-eps*n} < eps."""
        t = -math.log(self.epsilon) / self.epsilon
        return 3 * (int(math.floor(t)) + 1)

    @property
    def log_delta(self):
        return self.grid_log(self.delta_index)


def delta_eps(epsilon):
    """delta_eps value (linear); always < epsilon."""
    cfg = PesinConfig(chi=1.0, epsilon=epsilon)
    return math.exp(cfg.log_delta)


# ---------------------------------------------------------------------------
# expansion certificates and u
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    ok: bool
    margin: float        # min over tested blocks of (average log|df| - chi)
    fwd_min_avg: float
    back_min_avg: float
    worst_n: int


def expansion_certificate(w, chi, n_min=6):
    """Finite-window stand-in for chi-expansion.

    True iff every forward block average (1/n) log|df^(n)| with
    n in [n_min, F] and every backward block average with n in [n_min, N]
    exceeds chi.  Returns the worst margin.
    """
    S = w.cumlog
    j = w.off
    fwd_avgs = []
    for n in range(min(n_min, w.fwd_len), w.fwd_len + 1):
        if n >= 1:
            fwd_avgs.append(((S[j + n] - S[j]) / n, n))
    back_avgs = []
    for n in range(min(n_min, w.back_len), w.back_len + 1):
        if n >= 1:
            back_avgs.append(((S[j] - S[j - n]) / n, n))
    if not fwd_avgs and not back_avgs:
        return Certificate(False, -math.inf, -math.inf, -math.inf, 0)
    # a window with no data on one side is tested on the other side only
    fmin, fn = min(fwd_avgs) if fwd_avgs else (math.inf, 0)
    bmin, bn = min(back_avgs) if back_avgs else (math.inf, 0)
    margin = min(fmin, bmin) - chi
    worst = fn if fmin <= bmin else -bn
    return Certificate(bool(margin > 0), margin, fmin, bmin, worst)


def _u_terms(S, j, depth, chi):
    n = np.arange(depth + 1, dtype=np.float64)
    idx = j - np.arange(depth + 1)
    logt = 2.0 * chi * n - 2.0 * (S[j] - S[idx])
    return logt


def u_at(w, chi, k=0, depth=None):
    """u at the k-th shift, truncating the defining series at ``depth``.

    Defaults to the window's fixed u_depth (periodic windows) or the full
    available backward depth.  Periodic windows are evaluated by phase from
    the canonical tiled cycle, so the value is independent of k mod period.
    """
    if w.period:
        table = _u_phase_table(w, chi, depth)
        return float(table[(k + w.off) % w.period])
    avail = w.back_len + k
    d = avail if (depth or w.u_depth) == 0 else min(depth or w.u_depth, avail)
    if d < 0:
        raise IndexError(f"shift {k} has no backward data")
    logt = _u_terms(w.cumlog, w.off + k, d, chi)
    m = float(np.max(logt))
    if m > 500.0:  # keep exp in range; u itself is then astronomically large
        return math.exp(0.5 * (m + math.log(float(np.sum(np.exp(logt - m))))))
    return math.sqrt(float(np.sum(np.exp(logt))))


def _u_phase_table(w, chi, depth=None):
    P = w.period
    d = depth or w.u_depth or w.back_len
    ld_phase = np.empty(P)
    for p in range(P):
        ld_phase[p] = w.logderivs[w.off + ((p - w.off) % P)]
    # phase of array slot i is (i - off) mod P; ld_phase[p] = log|df| at phase p
    out = np.empty(P)
    for p in range(P):
        rev = ld_phase[(p - 1 - np.arange(d)) % P]
        S = np.concatenate([[0.0], np.cumsum(rev)])
        logt = 2.0 * chi * np.arange(d + 1) - 2.0 * S
        out[p] = math.sqrt(float(np.sum(np.exp(logt))))
    return out


def compute_u(w, chi, depth=None, n_min=6):
    """(u, tail_bound): truncated series for u plus the extrapolated tail.

    tail_bound is e^{2N(chi-m)} / (1 - e^{2(chi-m)}) for the worst backward
    block average m; it bounds the dropped part of u^2 assuming the observed
    margin persists beyond the window.  Raises TailDiverges when the
    certificate margin is non-positive.
    """
    cert = expansion_certificate(w, chi, n_min=n_min)
    if cert.margin <= 0 or not math.isfinite(cert.margin):
        raise TailDiverges(f"expansion margin {cert.margin:g} is not positive")
    u = u_at(w, chi, 0, depth=depth)
    d = depth or w.u_depth or w.back_len
    m = cert.back_min_avg if math.isfinite(cert.back_min_avg) else cert.fwd_min_avg
    tail = math.exp(2.0 * d * (chi - m)) / -math.expm1(2.0 * (chi - m))
    return u, tail


def u_recursion_step(u, dfx, chi):
    """u(f̂(x̂)) from u(x̂) and df at the zeroth coordinate."""
    if dfx == 0.0:
        raise ZeroDivisionError("df = 0")
    return math.sqrt(1.0 + math.exp(2.0 * chi) / (dfx * dfx) * u * u)


# ---------------------------------------------------------------------------
# chart sizes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PesinParams:
    chi: float
    epsilon: float
    u: float
    u_prev: float
    rho: float
    logQtilde: float
    idxQ: int
    log_delta_eps: float
    idx_q: int           # grid index of the greedy q at this index

    @property
    def logQ(self):
        return -(self.epsilon / 3.0) * self.idxQ

    @property
    def log_q(self):
        return -(self.epsilon / 3.0) * self.idx_q


def compute_Q(u, u_prev, rho, epsilon, a, beta):
    """(logQtilde, idxQ): the raw chart scale and its I_eps grid rounding.

    logQtilde = (3/b) ln(eps) + min(-(24/b) ln u, -(12/b) ln u' + (72a/b) ln rho),
    idxQ = ceil(-3 logQtilde / eps), so the grid point never exceeds Qtilde.
    """
    if u < 1.0 or u_prev < 1.0 or rho <= 0.0:
        raise ValueError("need u, u' >= 1 and rho > 0")
    lq = (3.0 / beta) * math.log(epsilon) + min(
        -(24.0 / beta) * math.log(u),
        -(12.0 / beta) * math.log(u_prev) + (72.0 * a / beta) * math.log(rho),
    )
    idx = int(math.ceil(-3.0 * lq / epsilon))
    return lq, idx


def q_greedy(idxQ_seq, cfg):
    """Greedy q indices along a window, seeded at the earliest index.

    Index form of q_n = min(e^eps q_{n-1}, delta_eps Q_n): larger grid index
    = smaller value, so the recursion is idx_n = max(idx_{n-1} - 3,
    delta_idx + idxQ_n).
    """
    nd = cfg.delta_index
    out = []
    prev = None
    for iq in idxQ_seq:
        cur = nd + int(iq) if prev is None else max(prev - 3, nd + int(iq))
        out.append(cur)
        prev = cur
    return out


def q_greedy_periodic(idxQ_cycle, cfg):
    """Exact periodic greedy solution q_n = delta * min_{k<=0} e^{eps|k|} Q_{n+k}."""
    P = len(idxQ_cycle)
    nd = cfg.delta_index
    spread = max(idxQ_cycle) - min(idxQ_cycle)
    reach = P + spread // 3 + 2
    out = []
    for n in range(P):
        best = max(int(idxQ_cycle[(n - k) % P]) - 3 * k for k in range(reach))
        out.append(nd + best)
    return out


# ---------------------------------------------------------------------------
# window-level parameter tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowTables:
    """Per-index chart data for a window: u, rho, Q and greedy q indices.

    Valid index range is [lo, hi]; u is additionally available at lo-1 and
    hi+1 (needed for u', u(f̂·) comparisons).
    """

    w: OrbitWindow
    cfg: PesinConfig
    lo: int
    hi: int
    u: dict
    rho: dict
    logQtilde: dict
    idxQ: dict
    idx_q: dict
    certified: bool
    cert: Certificate

    def params_at(self, k):
        return PesinParams(
            chi=self.cfg.chi, epsilon=self.cfg.epsilon,
            u=self.u[k], u_prev=self.u[k - 1], rho=self.rho[k],
            logQtilde=self.logQtilde[k], idxQ=self.idxQ[k],
            log_delta_eps=self.cfg.log_delta, idx_q=self.idx_q[k],
        )

    def j_bin(self, k):
        """q-size bin: j with q in [e^{-j-1}, e^{-j+1}); canonical floor(-ln q)."""
        return int(math.floor((self.cfg.epsilon / 3.0) * self.idx_q[k]))


def window_tables(m, w, cfg, lo=None, hi=None):
    """Compute chart data for every index of a window (or a subrange)."""
    full_lo = -w.back_len + 1
    full_hi = w.fwd_len - 1
    lo = full_lo if lo is None else max(lo, full_lo)
    hi = full_hi if hi is None else min(hi, full_hi)
    cert = expansion_certificate(w, cfg.chi, cfg.n_min)

    u = {}
    if w.period:
        table = _u_phase_table(w, cfg.chi)
        for k in range(full_lo - 1, hi + 2):
            u[k] = float(table[(k + w.off) % w.period])
    else:
        for k in range(full_lo - 1, hi + 2):
            u[k] = u_at(w, cfg.chi, k)
    rho = {}
    logQt = {}
    idxQ = {}
    for k in range(full_lo, hi + 1):
        rho[k] = min(m.singular_distance(w.x(k + i)) for i in (-1, 0, 1))
        lq, iq = compute_Q(u[k], u[k - 1], rho[k], cfg.epsilon, m.a, m.beta)
        logQt[k] = lq
        idxQ[k] = iq

    idx_q = {}
    if w.period and hi - full_lo + 1 >= w.period:
        # canonical periodic greedy, independent of the window truncation
        phase_idxQ = [0] * w.period
        for k in range(lo, lo + w.period):
            kk = k if k <= hi else k - w.period
            phase_idxQ[(kk + w.off) % w.period] = idxQ[kk]
        per = q_greedy_periodic(phase_idxQ, cfg)
        for k in range(full_lo, hi + 1):
            idx_q[k] = per[(k + w.off) % w.period]
    else:
        seq = q_greedy([idxQ[k] for k in range(full_lo, hi + 1)], cfg)
        for i, k in enumerate(range(full_lo, hi + 1)):
            idx_q[k] = seq[i]

    return WindowTables(w=w, cfg=cfg, lo=lo, hi=hi, u=u, rho=rho,
                        logQtilde=logQt, idxQ=idxQ, idx_q=idx_q,
                        certified=cert.ok, cert=cert)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """An affine chart Psi(t) = t/u + x0 restricted to [-p, p], p on I_eps."""

    center: OrbitWindow
    shift: int           # chart lives at the shift-th coordinate of center
    params: PesinParams
    idx_p: int

    def __post_init__(self):
        if self.idx_p < self.params.idxQ:
            raise ValueError("chart size exceeds Q")

    @property
    def u(self):
        return self.params.u

    @property
    def theta0(self):
        return self.center.x(self.shift)

    @property
    def log_p(self):
        return -(self.params.epsilon / 3.0) * self.idx_p

    def psi(self, t):
        """Psi(t); absorbs to the center for |t| under the float resolution."""
        return self.theta0 + t / self.params.u


# ---------------------------------------------------------------------------
# chart maps G = Psi_to^{-1} o g o Psi_from
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GDecomposition:
    """Sampled linear + residual decomposition G(t) = A t + h(t).

    A is the intrinsic slope dg(x0) u(f̂^{-1}x̂)/u(x̂); h0 and dh0 are the
    residual offset G(0) and slope mismatch dG(0) - A.  Sup norms are
    reported as logs (the underlying scale R = 10 Q_eps is often not
    representable); mode records whether sampling ran in linear space or
    through analytic curvature bounds.
    """

    A: float
    A_obs: float
    h0: float
    dh0: float
    log_h0: float
    log_dh0: float
    log_h_sup: float
    log_dh_sup: float
    dG_sup: float
    log_holder: float    # sampled Hol_{beta/2}(dG) quotient, log
    log_R: float
    mode: str


def _chebyshev(n):
    i = np.arange(n)
    return np.cos(math.pi * (2 * i + 1) / (2 * n))


def chart_G(m, c_from, c_to, branch_id, samples=None):
    """Evaluate the inverse branch between two charts on R[10 Q_eps(from)].

    Preconditions are the three domain inclusions guaranteeing that the
    branch inverse is defined on the chart range (DomainViolation if not).
    """
    cfg_eps = c_from.params.epsilon
    chi = c_from.params.chi
    n = samples or 1000
    w = c_from.center
    x0 = c_from.theta0
    xm1 = w.x(c_from.shift - 1)
    log_R = LOG10 + c_from.params.logQ

    # domain inclusions, in log space
    try:
        r0 = m.radius(x0)
        rm1 = m.radius(xm1)
    except Exception as e:
        raise DomainViolation(f"no admissible radius at a center: {e}") from e
    d0 = m.singular_distance(x0)
    dm1 = m.singular_distance(xm1)
    checks = [
        ("chart range inside D(x0)", log_R < math.log(2.0 * r0)),
        ("chart range inside E(x-1)", log_R < math.log(2.0 * rm1)),
        ("inverse image inside D(x-1)", log_R - m.a * math.log(dm1) < math.log(rm1)),
        ("chart range inside g(E(x0))", log_R < math.log(2.0 * r0) + m.a * math.log(d0)),
    ]
    for name, ok in checks:
        if not ok:
            raise DomainViolation(f"inclusion failed: {name}")

    br = m.branch_by_id(branch_id)
    u_from = c_from.u
    u_prev = c_from.params.u_prev
    u_to = c_to.u
    y0 = c_to.theta0

    dg0 = br.dinv(x0)
    A = dg0 * u_prev / u_from
    A_obs = dg0 * u_to / u_from
    # centers that are consecutive orbit points have offset exactly 0; the
    # float g carries a spurious ulp when the cache is forward-consistent
    offset0 = 0.0 if br.fwd(y0) == x0 else br.inv(x0) - y0
    h0 = u_to * offset0
    dh0 = A_obs - A
    log_h0 = math.log(abs(h0)) if h0 != 0.0 else -math.inf
    log_dh0 = math.log(abs(dh0)) if dh0 != 0.0 else -math.inf

    beta = m.beta
    tau = _chebyshev(n)

    if log_R - math.log(u_from) > LINEAR_MODE_FLOOR:
        R = math.exp(log_R)
        s = (R / u_from) * tau
        dgdiff = np.array([br.dinv_diff(x0, si) for si in s])
        invdiff = np.array([br.inv_diff(x0, si) for si in s])
        h = u_to * (offset0 + invdiff) - A * (u_from * s)
        dh = (u_to * (dg0 + dgdiff) - u_prev * dg0) / u_from
        dG = (u_to / u_from) * (dg0 + dgdiff)
        with np.errstate(divide="ignore"):
            log_h_sup = float(np.log(np.max(np.abs(h)))) if np.any(h != 0) else -math.inf
            log_dh_sup = float(np.log(np.max(np.abs(dh)))) if np.any(dh != 0) else -math.inf
        dG_sup = float(np.max(np.abs(dG)))
        # sampled Hölder-(beta/2) quotient of dG over node pairs at dyadic gaps
        best = -math.inf
        for gap in (1, 2, 4, 8, n // 4, n // 2, n - 1):
            if not 1 <= gap < n:
                continue
            i = np.arange(0, n - gap)
            num = np.abs(dG[i + gap] - dG[i])
            den = np.abs(u_from * (s[i + gap] - s[i])) ** (beta / 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(den > 0, num / den, 0.0)
            if q.size and np.max(q) > 0:
                best = max(best, math.log(float(np.max(q))))
        mode = "linear"
    else:
        # analytic curvature bounds: |dg(x0+s) - dg(x0)| <= |ddg| |s| nearby
        log_s_max = log_R - math.log(u_from)
        ddg = abs(br.ddinv(x0))
        log_ddg = math.log(ddg) if ddg > 0 else -math.inf
        log_du = math.log(u_to / u_from) if u_to != u_from else 0.0
        log_dh_sup = log_du + log_ddg + log_s_max
        log_curv = log_ddg + 2.0 * log_s_max - math.log(2.0)
        log_h_sup = max(log_h0, math.log(u_to) + log_curv,
                        log_dh0 + log_R if math.isfinite(log_dh0) else -math.inf)
        dG_sup = abs(A_obs) + math.exp(min(log_dh_sup, 0.0)) if math.isfinite(log_dh_sup) else abs(A_obs)
        best = (log_ddg + math.log(u_to / u_from) + (1.0 - beta / 2.0) *
                (math.log(2.0) + log_s_max)) if math.isfinite(log_ddg) else -math.inf
        mode = "log"

    # theorem-normalized contraction check value
    return GDecomposition(A=A, A_obs=A_obs, h0=h0, dh0=dh0, log_h0=log_h0,
                          log_dh0=log_dh0, log_h_sup=log_h_sup,
                          log_dh_sup=log_dh_sup, dG_sup=dG_sup,
                          log_holder=best, log_R=log_R, mode=mode)


def linear_reduction_slope(u, u_next, dfx):
    """(dF)_0 for F = Psi_{f̂x̂}^{-1} o f o Psi_x̂: df * u(f̂x̂)/u(x̂)."""
    return dfx * u_next / u
