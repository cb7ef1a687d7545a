"""Link physics: SINR, Markov fading banks, Chernoff bound, power schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import BoundUnavailable, InvalidInput

CONSTANT = "constant"
SQRT_DECAY = "sqrt_decay"
BOUND_FLOOR = 1e-300


@dataclass(frozen=True)
class LinkPhysics:
    noise_floor: float = 1.0
    sinr_threshold: float = 1.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if not self.noise_floor > 0:
            raise InvalidInput("noise_floor must be positive")
        if not self.sinr_threshold > 0:
            raise InvalidInput("sinr_threshold must be positive")
        if not self.bandwidth > 0:
            raise InvalidInput("bandwidth must be positive")


def sinr(edge: tuple[int, int], transmitters: Mapping[int, tuple[float, float]],
         physics: LinkPhysics) -> float:
    """Instantaneous SINR of ``edge = (i, j)``.

    ``transmitters`` maps each node transmitting in the slot to
    ``(tx_power, attenuation toward j)``. Sender and receiver are left out
    of the interference sum.
    """
    i, j = edge
    if physics.noise_floor <= 0:
        raise InvalidInput("noise_floor must be positive")
    if i not in transmitters:
        raise InvalidInput(f"sender {i} is not transmitting")
    p, a = transmitters[i]
    if p < 0 or a < 0:
        raise InvalidInput("power and attenuation must be nonnegative")
    interference = 0.0
    for node in sorted(transmitters):
        if node in (i, j):
            continue
        pk, ak = transmitters[node]
        if pk < 0 or ak < 0:
            raise InvalidInput("power and attenuation must be nonnegative")
        interference += pk * ak
    return p * a / (interference + physics.noise_floor)


def success_event(sinr_value: float, beta: float) -> bool:
    return sinr_value >= beta


def shannon_rate_bound(bandwidth: float, beta: float) -> float:
    if not bandwidth > 0:
        raise InvalidInput("bandwidth must be positive")
    return bandwidth * math.log2(1.0 + beta)


# --------------------------------------------------------------------------
# Markov fading


def _check_stochastic(P: np.ndarray, name: str) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInput(f"{name} must be square")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
        raise InvalidInput(f"{name} is not row-stochastic")


def is_ergodic(P: np.ndarray) -> bool:
    """Irreducible and aperiodic, i.e. some power of P is strictly positive.

    Wielandt: for a primitive n x n matrix the exponent is at most
    (n - 1)**2 + 1.
    """
    n = P.shape[0]
    A = (P > 0).astype(np.int64)
    M = A.copy()
    for _ in range((n - 1) ** 2 + 1):
        if np.all(M > 0):
            return True
        M = np.minimum(M @ A, 1)
    return bool(np.all(M > 0))


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def second_eigenvalue_modulus(P: np.ndarray) -> float:
    ev = np.sort(np.abs(np.linalg.eigvals(np.asarray(P, dtype=float))))[::-1]
    return float(ev[1]) if len(ev) > 1 else 0.0


@dataclass
class FadingChannelBank:
    """Correlated Markov fading channels.

    A latent chain moves first each slot; every channel then moves under the
    transition matrix selected by the new latent state. Success probability
    of a channel in state ``s`` is ``success_scale[channel, s]``, optionally
    multiplied by ``1 - exp(-1/sqrt(n))``.
    """

    latent_matrix: np.ndarray
    channel_matrices: np.ndarray  # (latent states, channel states, channel states)
    success_scale: np.ndarray  # (channels, channel states)
    decay_mode: str = CONSTANT
    latent_state: int = 0
    channel_states: np.ndarray | None = None

    def __post_init__(self):
        self.latent_matrix = np.asarray(self.latent_matrix, dtype=float)
        self.channel_matrices = np.asarray(self.channel_matrices, dtype=float)
        if self.channel_matrices.ndim == 2:
            self.channel_matrices = self.channel_matrices[None, :, :]
        self.success_scale = np.atleast_2d(np.asarray(self.success_scale, dtype=float))
        _check_stochastic(self.latent_matrix, "latent_matrix")
        L = self.latent_matrix.shape[0]
        if self.channel_matrices.shape[0] != L:
            raise InvalidInput("need one channel matrix per latent state")
        for k, P in enumerate(self.channel_matrices):
            _check_stochastic(P, f"channel_matrices[{k}]")
            if not is_ergodic(P):
                raise InvalidInput(f"channel chain under latent state {k} is not ergodic")
        if not is_ergodic(self.latent_matrix):
            raise InvalidInput("latent chain is not ergodic")
        S = self.channel_matrices.shape[1]
        if self.success_scale.shape[1] != S:
            raise InvalidInput("success_scale needs one column per channel state")
        if np.any(self.success_scale <= 0) or np.any(self.success_scale >= 1):
            raise InvalidInput("success scales must lie in (0, 1)")
        if self.decay_mode not in (CONSTANT, SQRT_DECAY):
            raise InvalidInput(f"unknown decay_mode {self.decay_mode!r}")
        if not 0 <= self.latent_state < L:
            raise InvalidInput("latent_state out of range")
        if self.channel_states is None:
            self.channel_states = np.zeros(self.n_channels, dtype=np.int64)
        self.channel_states = np.asarray(self.channel_states, dtype=np.int64).copy()

    @property
    def n_channels(self) -> int:
        return self.success_scale.shape[0]

    @property
    def n_states(self) -> int:
        return self.channel_matrices.shape[1]

    def copy(self) -> "FadingChannelBank":
        return FadingChannelBank(self.latent_matrix, self.channel_matrices,
                                 self.success_scale, self.decay_mode,
                                 self.latent_state, self.channel_states.copy())


def decay_factor(slot) -> np.ndarray | float:
    """``1 - exp(-sqrt(n)/n)``; slot 0 is treated as slot 1."""
    n = np.maximum(np.asarray(slot, dtype=float), 1.0)
    out = -np.expm1(-1.0 / np.sqrt(n))
    return float(out) if out.ndim == 0 else out


def success_probabilities(bank: FadingChannelBank, states: np.ndarray, slot) -> np.ndarray:
    """Per-channel success probabilities for given channel states.

    ``states`` may be (C,) for one slot or (T, C) with ``slot`` of shape (T,).
    """
    states = np.asarray(states)
    scale = bank.success_scale[np.arange(bank.n_channels), states]
    if bank.decay_mode == SQRT_DECAY:
        f = decay_factor(slot)
        scale = scale * (np.asarray(f)[..., None] if states.ndim == 2 else f)
    return scale


@dataclass
class FadingStep:
    latent_state: int
    channel_states: np.ndarray
    success_probability: np.ndarray


def step_fading(bank: FadingChannelBank, slot: int, rng: np.random.Generator) -> FadingStep:
    """Advance ``bank`` by one slot; draws ``1 + n_channels`` uniforms."""
    u = rng.random(1 + bank.n_channels)
    latent, states = kernels.markov_walk(
        _cdf(bank.latent_matrix), _cdf(bank.channel_matrices),
        bank.latent_state, bank.channel_states, u[None, :])
    bank.latent_state = int(latent[0])
    bank.channel_states = states[0].copy()
    probs = success_probabilities(bank, bank.channel_states, slot)
    return FadingStep(bank.latent_state, bank.channel_states.copy(), probs)


@dataclass
class FadingTrace:
    slots: np.ndarray
    latent: np.ndarray
    states: np.ndarray
    success_probability: np.ndarray


def simulate_fading(bank: FadingChannelBank, slots: np.ndarray,
                    rng: np.random.Generator) -> FadingTrace:
    """Batch equivalent of repeated :func:`step_fading`; consumes the same
    uniforms in the same order, so both paths agree exactly."""
    slots = np.asarray(slots, dtype=np.int64)
    u = rng.random((len(slots), 1 + bank.n_channels))
    latent, states = kernels.markov_walk(
        _cdf(bank.latent_matrix), _cdf(bank.channel_matrices),
        bank.latent_state, bank.channel_states, u)
    if len(slots):
        bank.latent_state = int(latent[-1])
        bank.channel_states = states[-1].copy()
    probs = success_probabilities(bank, states, slots)
    return FadingTrace(slots, latent, states, probs)


def _cdf(P: np.ndarray) -> np.ndarray:
    c = np.cumsum(P, axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def joint_stationary(bank: FadingChannelBank) -> np.ndarray:
    """Stationary law of (latent state, one channel's state), shape (L, S)."""
    L, S = bank.latent_matrix.shape[0], bank.n_states
    T = np.zeros((L * S, L * S))
    for l in range(L):
        for s in range(S):
            for l2 in range(L):
                T[l * S + s, l2 * S:(l2 + 1) * S] = bank.latent_matrix[l, l2] * bank.channel_matrices[l2, s]
    return stationary_distribution(T).reshape(L, S)


def channel_state_occupancy(bank: FadingChannelBank) -> np.ndarray:
    return joint_stationary(bank).sum(axis=0)


def stationary_failure_probability(bank: FadingChannelBank, channel: int,
                                   active_probability: float = 1.0) -> float:
    """Long-run P(no success) for one channel in constant mode.

    Law of total probability over the edge being scheduled and the channel
    state; an unscheduled slot counts as a failure.
    """
    pi = channel_state_occupancy(bank)
    p_success = float(pi @ bank.success_scale[channel])
    return 1.0 - active_probability * p_success


# --------------------------------------------------------------------------
# Verifiability checks


def mean_sinr_condition(mean_signal: float, mean_interference_terms: Sequence[float],
                        noise_floor: float, beta: float) -> bool:
    if not noise_floor > 0:
        raise InvalidInput("noise_floor must be positive")
    return mean_signal / (math.fsum(mean_interference_terms) + noise_floor) > beta


def exponential_mgf(rate: float) -> Callable[[float], float]:
    """MGF of Exp(rate); +inf for t >= rate."""
    def M(t):
        return rate / (rate - t) if t < rate else math.inf
    M.mean = 1.0 / rate
    return M


def uniform_mgf(lo: float, hi: float) -> Callable[[float], float]:
    def M(t):
        if t == 0 or hi == lo:
            return math.exp(t * lo) if hi == lo else 1.0
        w = t * (hi - lo)
        try:
            return math.exp(t * lo) * math.expm1(w) / w
        except OverflowError:
            return math.inf
    M.mean = 0.5 * (lo + hi)
    return M


def point_mass_mgf(value: float) -> Callable[[float], float]:
    def M(t):
        try:
            return math.exp(t * value)
        except OverflowError:
            return math.inf
    M.mean = value
    return M


def scaled_mgf(mgf: Callable[[float], float], c: float) -> Callable[[float], float]:
    """MGF of ``c * X`` given the MGF of ``X`` (e.g. transmit power times attenuation)."""
    def M(t):
        return mgf(c * t)
    if hasattr(mgf, "mean"):
        M.mean = c * mgf.mean
    return M


def _safe_log(v: float) -> float:
    if v == math.inf or v != v:
        return math.inf
    if v <= 0.0:
        return -math.inf
    return math.log(v)


def chernoff_log_g(t: float, mgf_signal, mgf_interferers, noise_floor: float,
                   beta: float) -> float:
    out = 2.0 * beta * noise_floor * t + _safe_log(mgf_signal(-2.0 * t))
    for M in mgf_interferers:
        if out == math.inf:
            break
        out += _safe_log(M(2.0 * beta * t))
    return out


def chernoff_failure_bound(mgf_signal, mgf_interferers, noise_floor: float, beta: float,
                           *, t_start: float = 1e-3, tol: float = 1e-10,
                           floor: float = BOUND_FLOOR) -> float:
    """Upper bound on P(SINR < beta) from inf_t sqrt(g(t)).

    ``log g`` is convex in ``t``, so a bracket is grown geometrically until
    ``log g`` turns upward (or leaves its domain) and then ternary-searched.
    Returns 1.0 when the infimum is attained at ``t -> 0``.
    """
    if not noise_floor > 0:
        raise InvalidInput("noise_floor must be positive")
    mgf_interferers = list(mgf_interferers)

    def f(t):
        return chernoff_log_g(t, mgf_signal, mgf_interferers, noise_floor, beta)

    t = t_start
    while f(t) == math.inf:
        t *= 0.5
        if t < 1e-300:
            raise BoundUnavailable("MGF product diverges on the whole search interval")
    if f(t) == -math.inf:
        return floor

    lo, hi = 0.0, t
    prev = f(t)
    while True:
        nxt = 2.0 * hi
        val = f(nxt)
        if val == -math.inf:
            return floor
        if val >= prev or nxt > 1e300:
            hi = nxt
            break
        lo, hi, prev = hi * 0.5, nxt, val
    lo = 0.0 if lo < t_start else lo
    best = min(prev, 0.0)

    while hi - lo > tol * max(1.0, hi):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1, f2 = f(m1), f(m2)
        if f1 == -math.inf or f2 == -math.inf:
            return floor
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
        best = min(best, f1, f2)
    if best >= -1e-12:
        return 1.0
    value = math.exp(0.5 * best)
    return max(min(value, 1.0), floor)


def epsilon_greedy_power(mean_interference_plus_noise: float, mean_attenuation: float,
                         beta: float, epsilon: float, delta: float,
                         fallback_power: float, rng: np.random.Generator) -> float:
    """With probability ``epsilon`` transmit at ``beta * E[IN] / E[alpha] + delta``."""
    if not mean_attenuation > 0:
        raise InvalidInput("mean_attenuation must be positive")
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidInput("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return beta * mean_interference_plus_noise / mean_attenuation + delta
    return fallback_power


@dataclass
class SinrLinkModel:
    """Analytic SINR channel path used by the engine.

    Attenuations are exponential (Rayleigh power) with the configured means;
    every node with an outgoing edge in the active topology transmits, and
    its power follows the epsilon-greedy rule toward its first out-neighbour.
    """

    physics: LinkPhysics
    signal_mean: float
    interference_mean: float
    epsilon: float = 0.1
    delta: float = 0.1
    fallback_power: float = 1.0
    extra: dict = field(default_factory=dict)

    def mean_condition(self, interferers: int, power: float) -> bool:
        return mean_sinr_condition(power * self.signal_mean,
                                   [power * self.interference_mean] * interferers,
                                   self.physics.noise_floor, self.physics.sinr_threshold)

    def greedy_power(self, interferers: int) -> float:
        """Power of the greedy branch, computed with fallback-power interferers."""
        mean_in = interferers * self.fallback_power * self.interference_mean + self.physics.noise_floor
        return self.physics.sinr_threshold * mean_in / self.signal_mean + self.delta
