"""Tail bounds on age of information and checks of those bounds on traces.

A :class:`TailBound` is a complementary CDF ``m -> P(tau_bar > m)`` on the
natural numbers. Single edges get the renewal-type bound
``p^(sqrt(m+1)-2) + sqrt(m) q^sqrt(m)``; paths are built by splitting the age
budget in half across a decomposition.

Second moments follow the convention ``E[tau^2] = sum_m 2m P(tau > m)``. For
an integer variable the exact identity is ``sum_m (2m+1) P(tau > m)``, so the
convention undercounts by ``E[tau]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceDetected, InvalidInput

_MAX_CUTOFF = 1 << 62
_NEGLIGIBLE = 1e-18


class TailBound:
    """Nonincreasing CCDF on ``m = 0, 1, 2, ...`` with ``ccdf(m) = 1`` for ``m < cutoff``.

    ``ccdf`` accepts scalars or integer arrays. Bounds built by
    :func:`single_edge_tail` and :func:`compose_tails` keep their structure,
    which lets :func:`second_moment` sum them exactly without enumerating
    every ``m``.
    """

    def __init__(self, ccdf: Callable, cutoff: int, *, kind: str = "custom",
                 parts: tuple = (), params: dict | None = None):
        self._ccdf = ccdf
        self.cutoff = int(cutoff)
        self.kind = kind
        self.parts = parts
        self.params = params or {}

    def ccdf(self, m):
        m_arr = np.asarray(m)
        if np.any(m_arr < 0):
            raise InvalidInput("m must be nonnegative")
        out = np.asarray(self._ccdf(m_arr.astype(np.int64)), dtype=float)
        out = np.clip(out, 0.0, 1.0)
        out = np.where(m_arr < self.cutoff, 1.0, out)
        return float(out) if out.ndim == 0 else out

    __call__ = ccdf

    def __repr__(self):
        return f"TailBound(kind={self.kind!r}, cutoff={self.cutoff})"

    @staticmethod
    def zero() -> "TailBound":
        """The bound of a variable that is identically 0."""
        return TailBound(lambda m: np.zeros(np.shape(m)), 0, kind="zero")

    @staticmethod
    def step(cutoff: int) -> "TailBound":
        """``ccdf(m) = 1`` for ``m < cutoff`` and 0 after."""
        return TailBound(lambda m: np.zeros(np.shape(m)), cutoff, kind="step")

    @staticmethod
    def from_values(values: Sequence[float]) -> "TailBound":
        """Finite table ``values[m]``; zero beyond the table."""
        v = np.asarray(values, dtype=float)
        if np.any(np.diff(v) > 1e-15) or np.any(v < 0) or np.any(v > 1):
            raise InvalidInput("values must be a nonincreasing sequence in [0, 1]")
        cut = int(np.argmax(v < 1.0)) if np.any(v < 1.0) else len(v)

        def f(m):
            m = np.asarray(m)
            return np.where(m < len(v), v[np.minimum(m, len(v) - 1)], 0.0)

        return TailBound(f, cut, kind="table", params={"values": v})


# --------------------------------------------------------------------------
# Single edge


def _edge_expr(p: float, q: float, m):
    m = np.asarray(m, dtype=float)
    s = np.sqrt(m)
    with np.errstate(over="ignore", under="ignore"):
        return p ** (np.sqrt(m + 1.0) - 2.0) + s * q ** s


def _decreasing_from(q: float) -> int:
    """Index beyond which ``sqrt(m) q^sqrt(m)`` is nonincreasing."""
    return int(math.ceil(1.0 / math.log(1.0 / q) ** 2))


@lru_cache(maxsize=256)
def _edge_tables(p: float, q: float):
    m_star = _decreasing_from(q)
    # first m >= m_star with expr <= 1; expr is decreasing there
    lo, hi = m_star, max(m_star, 1)
    while _edge_expr(p, q, hi) > 1.0:
        lo, hi = hi, hi * 2
        if hi > _MAX_CUTOFF:
            raise DivergenceDetected("single-edge bound never drops below 1")
    if _edge_expr(p, q, lo) <= 1.0:
        hi = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _edge_expr(p, q, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    m_cross = hi
    head = _edge_expr(p, q, np.arange(m_cross + 1))
    above = np.nonzero(head > 1.0)[0]
    cutoff = int(above[-1]) + 1 if len(above) else 0
    # monotone envelope up to m_star, where the second term may still rise
    upto = max(m_star, cutoff) + 1
    env = _edge_expr(p, q, np.arange(upto))
    env = np.maximum.accumulate(env[::-1])[::-1]
    env = np.minimum(env, 1.0)
    return cutoff, m_star, env


def single_edge_tail(p_tilde: float, q: float) -> TailBound:
    """``min(1, p^(sqrt(m+1)-2) + sqrt(m) q^sqrt(m))``, cut off at the smallest
    ``M`` such that the expression is at most 1 for every ``m >= M``.

    Between ``M`` and the point where ``sqrt(m) q^sqrt(m)`` starts to decrease
    the expression is replaced by its running maximum from the right, which
    keeps the CCDF monotone and never lowers it.
    """
    for name, v in (("p_tilde", p_tilde), ("q", q)):
        if not 0.0 < v < 1.0:
            raise InvalidInput(f"{name} must lie in (0, 1), got {v}")
    p, q = float(p_tilde), float(q)
    cutoff, m_star, env = _edge_tables(p, q)

    def f(m):
        m = np.asarray(m, dtype=np.int64)
        raw = np.minimum(_edge_expr(p, q, m), 1.0)
        inside = m < len(env)
        return np.where(inside, env[np.minimum(m, len(env) - 1)], raw)

    return TailBound(f, cutoff, kind="edge", params={"p_tilde": p, "q": q})


# --------------------------------------------------------------------------
# Composition


def compose_tails(t1: TailBound, t2: TailBound) -> TailBound:
    """``min(1, t1(floor(m/2)) + t2(floor(m/2)))``; the cutoff is the first
    ``m`` at which the sum drops below 1."""
    def s(h):
        return t1.ccdf(h) + t2.ccdf(h)

    lo, hi = 0, max(t1.cutoff, t2.cutoff, 1)
    if s(0) < 1.0:
        hi = 0
    else:
        while s(hi) >= 1.0:
            lo, hi = hi, hi * 2
            if hi > _MAX_CUTOFF // 4:
                raise DivergenceDetected("composed bound never drops below 1")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if s(mid) < 1.0:
                hi = mid
            else:
                lo = mid
    h0 = hi
    cutoff = 2 * h0

    def f(m):
        h = np.asarray(m, dtype=np.int64) // 2
        return np.minimum(t1.ccdf(h) + t2.ccdf(h), 1.0)

    return TailBound(f, cutoff, kind="composed", parts=(t1, t2))


def path_bound(edge_params: Sequence[tuple[float, float]]) -> TailBound:
    """Left fold of :func:`compose_tails` over the single-edge bounds of a path."""
    if len(edge_params) == 0:
        raise InvalidInput("path needs at least one edge")
    bounds = [single_edge_tail(p, q) for p, q in edge_params]
    out = bounds[0]
    for b in bounds[1:]:
        out = compose_tails(out, b)
    return out


# --------------------------------------------------------------------------
# Moments


def _edge_prefix(p: float, q: float):
    """Prefix sums of ``ccdf`` and ``m * ccdf`` up to where the tail is negligible.

    Beyond the table the CCDF decays at least like ``r^sqrt(m)`` with
    ``r = max(p, q)`` (up to a ``sqrt(m)`` factor), which gives the stopping rule.
    """
    t = single_edge_tail(p, q)
    r = max(p, q)
    n = max(1024, 2 * t.cutoff + 2, 2 * _decreasing_from(q) + 2)
    while True:
        m = np.arange(n + 1, dtype=np.int64)
        c = t.ccdf(m)
        s1 = float(np.sum(m * c))
        width = 2.0 * math.sqrt(n) / math.log(1.0 / r) + 1.0
        tail = c[-1] * (n + width) * width * (1.0 + math.sqrt(n))
        if tail <= 1e-12 * max(1.0, s1):
            break
        n *= 2
        if n > 1 << 28:
            raise DivergenceDetected("single-edge tail decays too slowly to tabulate")
    return np.concatenate([[0.0], np.cumsum(c)]), np.concatenate([[0.0], np.cumsum(m * c)])


_edge_prefix = lru_cache(maxsize=256)(_edge_prefix)


def _tail_sums(t: TailBound, K: int) -> tuple[float, float]:
    """``(sum_{m>=K} ccdf(m), sum_{m>=K} m ccdf(m))`` for structured bounds."""
    K = max(int(K), 0)
    if t.kind == "zero":
        return 0.0, 0.0
    if t.kind == "step":
        M = t.cutoff
        if K >= M:
            return 0.0, 0.0
        return float(M - K), (M - 1 + K) * (M - K) / 2.0
    if t.kind == "edge":
        c0, c1 = _edge_prefix(t.params["p_tilde"], t.params["q"])
        n = len(c0) - 1
        if K >= n:
            return 0.0, 0.0
        return float(c0[-1] - c0[K]), float(c1[-1] - c1[K])
    if t.kind == "composed":
        M = t.cutoff
        head0 = head1 = 0.0
        if K < M:
            head0 = float(M - K)
            head1 = (M - 1 + K) * (M - K) / 2.0
            K = M
        # beyond the cutoff ccdf(m) = c(floor(m/2)) with c = t1 + t2
        extra0 = extra1 = 0.0
        if K % 2:
            h = (K - 1) // 2
            ch = t.parts[0].ccdf(h) + t.parts[1].ccdf(h)
            extra0 += ch
            extra1 += K * ch
            K += 1
        k0 = K // 2
        s0 = s1 = 0.0
        for part in t.parts:
            a0, a1 = _tail_sums(part, k0)
            s0 += a0
            s1 += a1
        # sum_{k>=k0} [c(k) at m=2k and 2k+1] -> 2 c(k) and (4k+1) c(k)
        return head0 + extra0 + 2.0 * s0, head1 + extra1 + 4.0 * s1 + s0
    raise InvalidInput(f"no exact summation for bound kind {t.kind!r}")


def _direct_sum(t: TailBound, upto: int) -> float:
    total = 0.0
    step = 1 << 20
    for start in range(0, upto + 1, step):
        m = np.arange(start, min(upto, start + step - 1) + 1, dtype=np.int64)
        total += float(np.sum(2.0 * m * t.ccdf(m)))
    return total


def second_moment(t: TailBound, truncation: int | None = None) -> float:
    """``sum_{m=0}^{truncation} 2m ccdf(m)``.

    With ``truncation=None`` structured bounds are summed exactly over all
    ``m`` and other bounds are summed with doubling truncation until the
    increment falls below 1e-9. A truncation whose doubling still changes the
    sum by more than 1e-6 (relative) raises :class:`DivergenceDetected`.
    """
    if truncation is None:
        if t.kind in ("zero", "step", "edge", "composed"):
            return 2.0 * _tail_sums(t, 0)[1]
        n = 1 << 10
        prev = _direct_sum(t, n)
        while n < 1 << 26:
            n *= 2
            cur = _direct_sum(t, n)
            if cur - prev < 1e-9 * max(1.0, cur):
                return cur
            prev = cur
        raise DivergenceDetected("second moment does not settle under truncation doubling")
    truncation = int(truncation)
    if truncation < 0:
        raise InvalidInput("truncation must be nonnegative")
    s = _direct_sum(t, truncation)
    if t.kind in ("zero", "step", "edge", "composed"):
        rest = 2.0 * _tail_sums(t, truncation + 1)[1]
    else:
        m = np.arange(truncation + 1, 2 * truncation + 2, dtype=np.int64)
        rest = float(np.sum(2.0 * m * t.ccdf(m)))
    if rest > 1e-6 * max(1.0, s):
        raise DivergenceDetected(
            f"tail beyond truncation {truncation} still contributes {rest:.3g}")
    return s


def ccdf_sum(t: TailBound) -> float:
    """``sum_m ccdf(m)``, which equals ``E[tau]`` for an integer variable."""
    return _tail_sums(t, 0)[0]


@dataclass
class CompositionMomentCheck:
    composed: float
    parts: tuple[float, float]
    slack: float
    factor_two_bound: float
    factor_four_bound: float

    @property
    def passed(self) -> bool:
        """The halving inequality with factor 2 plus floor-rounding slack."""
        return self.composed <= self.factor_two_bound * (1 + 1e-12)

    @property
    def passed_factor_four(self) -> bool:
        return self.composed <= self.factor_four_bound * (1 + 1e-12)


def composition_moment_check(t1: TailBound, t2: TailBound) -> CompositionMomentCheck:
    """Compare the composed second moment with ``2 (E1 + E2)``.

    Without the clamp at 1, ``sum_m 2m c(floor(m/2)) = 4 sum_k 2k c(k) + 2 sum_k c(k)``
    exactly, so the floor rounding costs ``2 (sum c1 + sum c2)``. The report
    includes the factor-4 form as well.
    """
    comp = compose_tails(t1, t2)
    e = second_moment(comp)
    e1, e2 = second_moment(t1), second_moment(t2)
    slack = 2.0 * (ccdf_sum(t1) + ccdf_sum(t2))
    return CompositionMomentCheck(e, (e1, e2), slack, 2.0 * (e1 + e2) + slack,
                                  4.0 * (e1 + e2) + slack)


def cascade_moment_bound(edge_params: Sequence[tuple[float, float]], factor: float = 2.0,
                         with_slack: bool = True) -> float:
    """Bound on the left-folded path second moment obtained by applying the
    composition inequality once per fold: ``E_k <= factor (E_{k-1} + e_k) + slack_k``."""
    bounds = [single_edge_tail(p, q) for p, q in edge_params]
    if not bounds:
        raise InvalidInput("path needs at least one edge")
    acc_bound = bounds[0]
    acc = second_moment(acc_bound)
    acc_sum = ccdf_sum(acc_bound)
    for b in bounds[1:]:
        e_b, s_b = second_moment(b), ccdf_sum(b)
        slack = 2.0 * (acc_sum + s_b) if with_slack else 0.0
        acc = factor * (acc + e_b) + slack
        # mean bound of the composed variable, used for the next slack term
        acc_sum = 2.0 * (acc_sum + s_b) + 1.0
    return acc


# --------------------------------------------------------------------------
# Empirical tails


@dataclass
class EmpiricalCcdf:
    m: np.ndarray
    ccdf: np.ndarray
    se: np.ndarray
    samples: np.ndarray  # effective sample count per m


def empirical_ccdf(samples_by_replication: Sequence[np.ndarray], m_max: int,
                   effective: Sequence[np.ndarray] | None = None) -> EmpiricalCcdf:
    """Pooled ``P(tau > m)`` with a standard error taken across replications.

    ``effective[r][m]`` optionally gives the number of independent samples
    behind ``m`` in replication ``r``; by default every observation counts.
    """
    m = np.arange(m_max + 1)
    per_rep = []
    counts = []
    for r, s in enumerate(samples_by_replication):
        s = np.asarray(s)
        hist = np.bincount(np.minimum(s, m_max + 1), minlength=m_max + 2)
        above = len(s) - np.cumsum(hist)[: m_max + 1]
        per_rep.append(above / max(len(s), 1))
        counts.append(np.asarray(effective[r]) if effective is not None
                      else np.full(m_max + 1, len(s)))
    per_rep = np.array(per_rep)
    mean = per_rep.mean(axis=0)
    R = len(per_rep)
    se = per_rep.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean)
    return EmpiricalCcdf(m, mean, se, np.sum(counts, axis=0))


def renewal_cycle_counts(success: np.ndarray, m_max: int) -> np.ndarray:
    """Number of failure runs longer than ``m`` for ``m = 0..m_max``.

    Each maximal run of failures between successes is one renewal cycle of
    the edge age; ages above ``m`` are observed only inside runs longer
    than ``m``.
    """
    s = np.asarray(success, dtype=bool)
    padded = np.concatenate([[True], s, [True]])
    idx = np.nonzero(padded)[0]
    runs = np.diff(idx) - 1
    runs = runs[runs > 0]
    hist = np.bincount(np.minimum(runs, m_max + 1), minlength=m_max + 2)
    return len(runs) - np.cumsum(hist)[: m_max + 1]


@dataclass
class DominanceReport:
    m: np.ndarray
    empirical: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    samples: np.ndarray
    min_samples: int

    @property
    def checked(self) -> np.ndarray:
        return self.samples >= self.min_samples

    @property
    def violations(self) -> np.ndarray:
        bad = self.empirical > self.bound + 3.0 * self.se
        return self.m[bad & self.checked]

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0


def dominance_check(emp: EmpiricalCcdf, bound: TailBound, min_samples: int = 100) -> DominanceReport:
    return DominanceReport(emp.m, emp.ccdf, emp.se, bound.ccdf(emp.m), emp.samples, min_samples)


# --------------------------------------------------------------------------
# Square-root scaling


@dataclass
class SqrtScalingReport:
    slots: np.ndarray
    normalized_curve: np.ndarray  # max over pairs of tau(n) / sqrt(n)
    normalized_mean: np.ndarray  # mean over pairs of tau(n) / sqrt(n)
    exceed_previous: int
    exceed_count: int
    window: int

    @property
    def passed(self) -> bool:
        return self.exceed_count <= self.exceed_previous


def sqrt_scaling_check(aoi, window: int) -> SqrtScalingReport:
    """Normalized AoI series and a finitely-often proxy for ``tau(n) > sqrt(n)``.

    Exceedances of the max pair age over ``sqrt(n)`` are counted in the
    trailing ``window`` slots and in the window before it; the check passes
    when the count does not grow.
    """
    mx = np.asarray(aoi.max_offdiag(), dtype=float)
    mean = np.asarray(aoi.mean_offdiag(), dtype=float)
    N = len(mx)
    if N < 1000:
        raise InvalidInput("trace must cover at least 1000 slots")
    window = int(window)
    if not 1 <= window <= N // 2:
        raise InvalidInput("window must lie in [1, N/2]")
    n = np.arange(1, N + 1, dtype=float)
    root = np.sqrt(n)
    exceed = mx > root
    last = int(exceed[N - window:].sum())
    prev = int(exceed[N - 2 * window: N - window].sum())
    return SqrtScalingReport(n.astype(np.int64), mx / root, mean / root, prev, last, window)


# --------------------------------------------------------------------------
# Dependency decay


@dataclass
class LagEstimate:
    lag: int
    gap: float
    se: float
    available: bool
    samples: int

    @property
    def significant(self) -> bool:
        return self.available and self.gap > 3.0 * self.se


@dataclass
class DecayEstimate:
    lags: list[LagEstimate]
    q_fit: float  # least-squares geometric rate over significant lags
    q_envelope: float  # max over significant lags of gap^(1/lag)
    fit_lags: int

    @property
    def geometric(self) -> bool:
        return self.fit_lags >= 2 and 0.0 <= self.q_fit < 1.0


def dependency_decay_estimate(success_trace, lags: Sequence[int],
                              min_bin_samples: int = 1000) -> DecayEstimate:
    """Gap between ``P(A^n)`` and ``P(A^n | A^(n-lag))`` per lag.

    The history is bucketed on the outcome ``lag`` slots earlier; the gap is
    the larger of the two bucket deviations. ``success_trace`` is a boolean
    series or a (T, E) array of edges. Deviations are taken from each edge's
    own marginal and then pooled, so edges with different success rates do
    not create a spurious gap. A bucket with fewer than ``min_bin_samples``
    entries makes its lag unavailable.
    """
    A = np.asarray(success_trace, dtype=bool)
    if A.ndim == 1:
        A = A[:, None]
    T = A.shape[0]
    out = []
    for lag in lags:
        lag = int(lag)
        if lag < 1 or lag >= T:
            out.append(LagEstimate(lag, math.nan, math.nan, False, 0))
            continue
        now = A[lag:]
        before = A[:-lag]
        p_col = now.mean(axis=0)
        best_gap, best_se, ok, nmin = 0.0, 0.0, True, now.size
        for b in (False, True):
            sel = before == b
            k_col = sel.sum(axis=0)
            k = int(k_col.sum())
            nmin = min(nmin, k)
            if k < min_bin_samples:
                ok = False
                break
            hits = (now & sel).sum(axis=0)
            dev = float(np.sum(hits - k_col * p_col)) / k
            with np.errstate(invalid="ignore", divide="ignore"):
                pc = np.where(k_col > 0, hits / np.maximum(k_col, 1), 0.0)
            var = float(np.sum(k_col * pc * (1 - pc))) / k ** 2
            var += float(np.sum(p_col * (1 - p_col) / len(now))) / A.shape[1] ** 2
            gap, se = abs(dev), math.sqrt(max(var, 1e-24))
            if gap > best_gap or (gap == best_gap and se > best_se):
                best_gap, best_se = gap, se
        if not ok:
            out.append(LagEstimate(lag, math.nan, math.nan, False, nmin))
        else:
            out.append(LagEstimate(lag, float(best_gap), float(best_se), True, nmin))
    sig = [e for e in out if e.significant]
    if len(sig) >= 2:
        x = np.array([e.lag for e in sig], dtype=float)
        y = np.log([e.gap for e in sig])
        slope = np.polyfit(x, y, 1)[0]
        q_fit = float(min(math.exp(slope), 1.0))
    elif len(sig) == 1:
        q_fit = float(sig[0].gap ** (1.0 / sig[0].lag))
    else:
        q_fit = 0.0
    q_env = max((e.gap ** (1.0 / e.lag) for e in sig), default=0.0)
    return DecayEstimate(out, q_fit, float(q_env), len(sig))


# --------------------------------------------------------------------------
# Path containment on recorded ages


@dataclass
class ContainmentReport:
    m_values: np.ndarray
    violations: np.ndarray  # count per m
    premises: np.ndarray  # slots where both premises held, per m

    @property
    def passed(self) -> bool:
        return int(self.violations.sum()) == 0


def containment_check(tau_first: np.ndarray, link_second: np.ndarray, tau_path: np.ndarray,
                      m_max: int) -> ContainmentReport:
    """Check ``{tau_1(n-h) <= h} and {link_2(n) <= h}  =>  {tau(n) <= m}``, ``h = floor(m/2)``.

    Arrays are indexed by slot ``n = 1..N`` at position ``n-1``. ``tau_first``
    is the age of the origin's value at the relay, ``link_second`` the age of
    the newest relay state conveyed over the second hop, ``tau_path`` the
    end-to-end age.
    """
    a = np.asarray(tau_first)
    b = np.asarray(link_second)
    c = np.asarray(tau_path)
    N = len(c)
    ms = np.arange(m_max + 1)
    viol = np.zeros(len(ms), dtype=np.int64)
    prem = np.zeros(len(ms), dtype=np.int64)
    for k, m in enumerate(ms):
        h = m // 2
        if h >= N:
            continue
        # n runs over h+1..N so that n-h >= 1
        first_ok = a[: N - h] <= h
        second_ok = b[h:] <= h
        both = first_ok & second_ok
        prem[k] = int(both.sum())
        viol[k] = int((both & (c[h:] > m)).sum())
    return ContainmentReport(ms, viol, prem)


def replay_ages(log, agent_count: int, slot_count: int) -> np.ndarray:
    """Recompute pair ages from an event log, independently of the engine's books.

    ``log`` holds tuples ``("produce", slot, agent)`` and
    ``("deliver", slot, sender, receiver, [(origin, production_slot), ...])``.
    Returns ``ages[n-1, src, dst]``.
    """
    held = np.zeros((agent_count, agent_count), dtype=np.int64)
    ages = np.zeros((slot_count, agent_count, agent_count), dtype=np.int64)
    by_slot: dict[int, list] = {}
    for ev in log:
        by_slot.setdefault(ev[1], []).append(ev)
    for n in range(1, slot_count + 1):
        for ev in by_slot.get(n, ()):
            if ev[0] == "produce":
                held[ev[2], ev[2]] = max(held[ev[2], ev[2]], n)
            elif ev[0] == "deliver":
                _, _, s, r, items = ev
                for origin, prod in items:
                    if prod > held[origin, r]:
                        held[origin, r] = prod
        ages[n - 1] = n - held
    return ages


def replay_link_ages(log, edge: tuple[int, int], slot_count: int) -> np.ndarray:
    """Link ages of ``edge`` from ``("flush", slot, sender, receiver)`` events."""
    last = 0
    flushes = {ev[1] for ev in log if ev[0] == "flush" and (ev[2], ev[3]) == tuple(edge)}
    out = np.zeros(slot_count, dtype=np.int64)
    for n in range(1, slot_count + 1):
        if n in flushes:
            last = n - 1
        out[n - 1] = n - last
    return out
