"""Asynchronous penalty-based SGD: schedules, the local update, clocks and
assumption validators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInput, StabilityViolation

PASS = "pass"
HEURISTIC_PASS = "heuristic-pass"
FAIL = "fail"


@dataclass(frozen=True)
class InversePower:
    """``1 / ((nu + shift)**exponent / scale + offset)``."""

    exponent: float = 1.0
    scale: float = 1000.0
    offset: float = 10.0
    shift: float = 0.0

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = 1.0 / ((nu + self.shift) ** self.exponent / self.scale + self.offset)
        return float(out) if out.ndim == 0 else out

    def to_config(self):
        return {"kind": "inverse_power", "exponent": self.exponent, "scale": self.scale,
                "offset": self.offset, "shift": self.shift}


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = np.full(nu.shape, self.value)
        return float(out) if out.ndim == 0 else out

    def to_config(self):
        return {"kind": "constant", "value": self.value}


def sequence_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "inverse_power":
        return InversePower(float(cfg.get("exponent", 1.0)), float(cfg.get("scale", 1.0)),
                            float(cfg.get("offset", 0.0)), float(cfg.get("shift", 0.0)))
    if kind == "constant":
        return Constant(float(cfg["value"]))
    raise InvalidInput(f"unknown sequence kind {kind!r}")


@dataclass(frozen=True)
class StepSchedule:
    a: Callable = field(default_factory=lambda: InversePower(1.0, 1000.0, 10.0))
    b: Callable = field(default_factory=lambda: InversePower(2.0 / 3.0, 1000.0, 10.0))
    kappa: float = 1.0


def experiment_schedule() -> StepSchedule:
    """a(nu) = 1/(nu/1000 + 10), b(nu) = 1/(nu^(2/3)/1000 + 10)."""
    return StepSchedule()


def step_size(schedule: StepSchedule, nu) -> float:
    if np.any(np.asarray(nu) < 0):
        raise InvalidInput("nu must be nonnegative")
    return schedule.a(nu)


def penalty_param(schedule: StepSchedule, nu) -> float:
    if np.any(np.asarray(nu) < 0):
        raise InvalidInput("nu must be nonnegative")
    return schedule.b(nu)


@dataclass
class ClauseResult:
    status: str
    detail: dict

    @property
    def ok(self) -> bool:
        return self.status in (PASS, HEURISTIC_PASS)


def _doubling_increments(values: np.ndarray, H: int):
    c = np.concatenate([[0.0], np.cumsum(values)])
    inc_hi = c[H + 1] - c[H // 2 + 1]
    inc_lo = c[H // 2 + 1] - c[H // 4 + 1]
    return float(c[H + 1]), float(inc_hi), float(inc_lo)


def validate_schedule(schedule: StepSchedule, horizon: int = 10**6, *,
                      divergence_margin: float = 1.0, divergence_ratio: float = 0.97,
                      cauchy_ratio: float = 0.75,
                      regularity_x: float = 0.1) -> dict[str, ClauseResult]:
    """Numerical checks of the step-size / penalty-parameter conditions.

    Divergence of a series cannot be certified from finitely many terms; the
    sum conditions use doubling windows instead. A divergent series of
    ``n**-p`` (p <= 1) keeps increments of at least the same size across
    windows ``(H/4, H/2]`` and ``(H/2, H]``, a convergent one shrinks them by
    about ``2**(1-p)``. A sum counts as divergent when its last-half increment
    reaches ``divergence_margin`` or the increment ratio reaches
    ``divergence_ratio``; the squared sum counts as convergent when the ratio
    is at most ``cauchy_ratio``.
    """
    H = int(horizon)
    if H < 1000:
        raise InvalidInput("horizon must be at least 1000")
    nu = np.arange(H + 1, dtype=float)
    a = np.asarray(schedule.a(nu), dtype=float)
    b = np.asarray(schedule.b(nu), dtype=float)
    out: dict[str, ClauseResult] = {}

    sum_a, inc_a, inc_a_lo = _doubling_increments(a, H)
    sum_b, inc_b, inc_b_lo = _doubling_increments(b, H)
    sum_a2, inc2_hi, inc2_lo = _doubling_increments(a * a, H)
    ratio2 = inc2_hi / inc2_lo if inc2_lo > 0 else 0.0

    def diverges(hi, lo):
        # large last-half increment, or increments that do not shrink
        return bool(hi >= divergence_margin or (lo > 0 and hi / lo >= divergence_ratio))

    a_div = diverges(inc_a, inc_a_lo)
    b_div = diverges(inc_b, inc_b_lo)
    a2_conv = ratio2 <= cauchy_ratio
    out["A3(i)"] = ClauseResult(
        HEURISTIC_PASS if (a_div and b_div and a2_conv) else FAIL,
        {"sum_a": sum_a, "sum_a_last_half": inc_a, "sum_a_diverges": a_div,
         "sum_b": sum_b, "sum_b_last_half": inc_b, "sum_b_diverges": b_div,
         "sum_a2": sum_a2, "sum_a2_doubling_ratio": ratio2, "sum_a2_converges": a2_conv})

    b_noninc = bool(np.all(np.diff(b) <= 0.0))
    ratio = b / a
    tail = ratio[H // 2:]
    ratio_decreasing = bool(np.all(np.diff(tail) <= 0.0)) and ratio[H] < ratio[H // 2] * (1 - 1e-3)
    out["A3(ii)"] = ClauseResult(
        PASS if (b_noninc and ratio_decreasing) else FAIL,
        {"b_nonincreasing": b_noninc, "ratio_b_over_a_at_half": float(ratio[H // 2]),
         "ratio_b_over_a_at_horizon": float(ratio[H]), "ratio_decreasing": ratio_decreasing})

    def sup_ratio(n):
        ys = np.linspace(regularity_x, 1.0, 201)
        idx = np.floor(ys * n).astype(int)
        return float(np.max(a[idx] / a[n]))

    r_quarter, r_half, r_full = sup_ratio(H // 4), sup_ratio(H // 2), sup_ratio(H)
    # bounded if flat, or if increments shrink geometrically across doublings
    d_lo, d_hi = r_half - r_quarter, r_full - r_half
    flat = r_full <= r_half * 1.01 + 1e-12
    settling = d_hi <= cauchy_ratio * max(d_lo, 0.0)
    bounded = bool(np.isfinite(r_full) and (flat or settling))
    out["A3(iii)"] = ClauseResult(PASS if bounded else FAIL,
                                  {"x": regularity_x, "sup_ratio_at_quarter": r_quarter,
                                   "sup_ratio_at_half": r_half, "sup_ratio_at_horizon": r_full})

    amax = float(a.max())
    out["A3(iv)"] = ClauseResult(PASS if amax <= 1.0 else FAIL, {"max_a": amax})

    running_min = np.minimum.accumulate(a)
    kappa_hat = float(np.max(a / running_min))
    ok = np.isfinite(kappa_hat) and kappa_hat <= schedule.kappa * (1 + 1e-12)
    out["A3(v)"] = ClauseResult(PASS if ok else FAIL,
                                {"kappa_empirical": kappa_hat, "kappa": schedule.kappa})

    # closed forms are cheap to evaluate far beyond the horizon
    grid = np.logspace(2, 12, 11)
    qs = np.abs(np.asarray(schedule.b(grid + 1)) - np.asarray(schedule.b(grid))) / np.asarray(schedule.a(grid))
    trending = bool(qs[-1] <= qs[-2] and qs[-1] <= 0.1 * qs.max()) if qs.max() > 0 else True
    out["b_quasi_stationarity"] = ClauseResult(
        PASS if trending else FAIL, {"nu": grid, "ratio": qs})
    return out


@dataclass
class AgentState:
    x: np.ndarray
    nu: int = 1
    clock_rate: float = 0.2
    error_bound: float = 0.0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)


@dataclass
class UpdateInfo:
    a: float
    b: float
    grad_f_norm: float
    grad_p_norm: float
    error_norm: float


def ball_error(dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the closed ball of ``radius``; no draws when radius is 0."""
    if radius <= 0:
        return np.zeros(dim)
    g = rng.standard_normal(dim)
    g /= np.linalg.norm(g)
    return g * radius * rng.random() ** (1.0 / dim)


def sgd_step(agent: AgentState, belief, xi, problem, schedule: StepSchedule,
             rng: np.random.Generator, error_rng: np.random.Generator | None = None):
    """One local update; returns ``(new_x, UpdateInfo)`` and increments ``agent.nu``.

    ``problem.agent_gradients(values, i, xi, rng)`` supplies the partial
    gradients of the sampled objective and the penalty at the belief values.
    """
    i = belief.owner
    values = belief.values()
    gf, gp = problem.agent_gradients(values, i, xi, rng)
    err = ball_error(agent.x.size, agent.error_bound, error_rng if error_rng is not None else rng)
    if not (np.all(np.isfinite(gf)) and np.all(np.isfinite(gp))):
        raise StabilityViolation(f"non-finite gradient at agent {i}")
    a = schedule.a(agent.nu)
    b = schedule.b(agent.nu)
    new_x = agent.x - a * (b * gf + gp + err)
    if not np.all(np.isfinite(new_x)):
        raise StabilityViolation(f"non-finite iterate at agent {i}")
    agent.x = new_x
    agent.nu += 1
    info = UpdateInfo(a, b, float(np.linalg.norm(gf)), float(np.linalg.norm(gp)),
                      float(np.linalg.norm(err)))
    return new_x, info


def sgd_update(agent: AgentState, belief, xi, problem, schedule: StepSchedule,
               rng: np.random.Generator) -> np.ndarray:
    return sgd_step(agent, belief, xi, problem, schedule, rng)[0]


@dataclass
class TickTrace:
    slots: np.ndarray  # distinct slots (1-based) with at least one tick
    raw_ticks: int

    @property
    def coalesced_fraction(self) -> float:
        if self.raw_ticks == 0:
            return 0.0
        return 1.0 - len(self.slots) / self.raw_ticks


def poisson_clock_ticks(rate: float, horizon_slots: int, slot_duration: float,
                        rng: np.random.Generator, warn_above: float = 0.01) -> TickTrace:
    """Poisson clock of ``rate`` ticks per unit time projected onto slots.

    A tick at time ``t`` falls in slot ``ceil(t / slot_duration)``; several
    ticks in one slot become a single update.
    """
    if not rate > 0:
        raise InvalidInput("rate must be positive")
    T = horizon_slots * slot_duration
    expected = rate * T
    times = []
    t = 0.0
    chunk = max(16, int(expected + 4 * math.sqrt(expected + 1)) + 16)
    while t <= T:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        c = t + np.cumsum(gaps)
        times.append(c)
        t = c[-1]
    times = np.concatenate(times)
    times = times[times <= T]
    slots = np.ceil(times / slot_duration).astype(np.int64)
    slots = np.maximum(slots, 1)
    uniq = np.unique(slots)
    trace = TickTrace(uniq, len(slots))
    if trace.coalesced_fraction > warn_above:
        warnings.warn(f"{trace.coalesced_fraction:.1%} of clock ticks coalesced into shared slots; "
                      "the slot duration is too coarse for this clock rate", RuntimeWarning)
    return trace


def every_slot_ticks(horizon_slots: int) -> TickTrace:
    slots = np.arange(1, horizon_slots + 1, dtype=np.int64)
    return TickTrace(slots, horizon_slots)


@dataclass
class RateReport:
    estimates: np.ndarray
    floor: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.estimates > self.floor))


def async_rate_check(update_counts: np.ndarray, floor: float = 0.01) -> RateReport:
    """Minimum of ``nu(n, i) / n`` over the trailing half of the trace.

    ``update_counts[n-1, i]`` is the number of local updates of agent ``i``
    completed by the end of slot ``n``.
    """
    counts = np.asarray(update_counts, dtype=float)
    if counts.ndim == 1:
        counts = counts[:, None]
    N = counts.shape[0]
    if N < 1000:
        raise InvalidInput("trace must cover at least 1000 slots")
    n = np.arange(1, N + 1, dtype=float)[:, None]
    frac = counts / n
    return RateReport(frac[N // 2:].min(axis=0), floor)
