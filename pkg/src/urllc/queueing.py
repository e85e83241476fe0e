"""Latency and freshness: effective capacity, the availability-latency-power
trade-off, stochastic network calculus bounds and age of information.

Rates and exponents are per channel use (symbol) unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, UnstableError


@dataclass(frozen=True)
class QosModel:
    theta: float
    effective_capacity: float
    symbol_period: float = 1.0

    def __post_init__(self):
        if not self.theta > 0 or self.effective_capacity < 0:
            raise DomainError("need theta > 0 and C_e >= 0")


def delay_outage(model: QosModel, delta_max: float) -> float:
    """Pr[delay > delta_max] under the exponential delay-tail model."""
    if delta_max < 0:
        raise DomainError("delta_max must be non-negative")
    return math.exp(-model.theta * model.effective_capacity * delta_max)


def max_delay(model: QosModel, p_out: float) -> float:
    """Largest delay bound met with violation probability ``p_out``."""
    if not 0 < p_out < 1:
        raise DomainError("p_out must lie in (0, 1)")
    return -math.log(p_out) / (model.theta * model.effective_capacity)


def effcap_fixed_rate(r: float, epsilon: float, theta: float, N: int) -> float:
    """Effective capacity of rate-r blocks of N symbols lost with probability ε."""
    if not 0 <= epsilon <= 1:
        raise DomainError("epsilon must lie in [0, 1]")
    if epsilon == 0:
        return float(r)
    if epsilon == 1:
        return 0.0
    a = theta * N * r
    if a > 1:
        log_m = np.logaddexp(math.log(epsilon), math.log1p(-epsilon) - a)
    else:
        log_m = math.log1p((1 - epsilon) * math.expm1(-a))
    return float(-log_m / (theta * N))


def rayleigh_outage(r: float, rho: float) -> float:
    """Outage of a rate-r transmission over Rayleigh fading at mean SNR ρ."""
    if r < 0 or rho <= 0:
        raise DomainError("need r >= 0 and rho > 0")
    return -math.expm1(-(2**r - 1) / rho)


class TradeoffPoint(NamedTuple):
    rho: float
    delta_max: float
    epsilon: float
    theta: float
    availability: float
    status: str  # "ok", "infeasible" or "saturated"


THETA_BRACKET = (1e-6, 1e3)


def _solve_theta(target: float, r: float, eps: float, N: int) -> tuple[float, str]:
    lo, hi = (math.log(t) for t in THETA_BRACKET)
    f = lambda lt: effcap_fixed_rate(r, eps, math.exp(lt), N) - target
    if eps == 0 or f(hi) > 0:
        return math.inf, "saturated"
    if f(lo) < 0:
        return math.nan, "infeasible"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return math.exp(0.5 * (lo + hi)), "ok"


def availability_latency_power(C_e_target: float, N: int, r: float,
                               rho_grid: Sequence[float],
                               delta_grid: Sequence[float]) -> list[TradeoffPoint]:
    """Availability reached at each (transmit SNR, delay bound) pair.

    For each SNR the QoS exponent θ* making the effective capacity equal
    ``C_e_target`` is found; then A = 1 - exp(-θ* C_e δ_max). Delays are in
    symbols.
    """
    if not (len(rho_grid) and len(delta_grid)):
        raise DomainError("grids must be non-empty")
    if not 0 < C_e_target < r:
        raise DomainError("need 0 < C_e_target < r")
    out = []
    for rho in rho_grid:
        eps = rayleigh_outage(r, rho)
        theta, status = _solve_theta(C_e_target, r, eps, N)
        for d in delta_grid:
            if status == "ok":
                a = -math.expm1(-theta * C_e_target * d)
            else:
                a = 1.0 if status == "saturated" else math.nan
            out.append(TradeoffPoint(float(rho), float(d), eps, theta, a, status))
    return out


@dataclass(frozen=True)
class OnOffSource:
    """Two-state Markov source emitting ``r`` bits per block when ON.

    With ``p11`` (stay OFF) and ``p22`` (stay ON) the full Markov form is
    used; otherwise blocks are independent and ON with probability ``s``.
    """

    s: float
    r: float
    p11: float | None = None
    p22: float | None = None

    def __post_init__(self):
        if not (0 < self.s <= 1 and self.r > 0):
            raise DomainError("need 0 < s <= 1 and r > 0")

    @classmethod
    def from_transitions(cls, p11: float, p22: float, r: float) -> "OnOffSource":
        if not (0 <= p11 <= 1 and 0 <= p22 <= 1) or p11 + p22 >= 2:
            raise DomainError("invalid transition probabilities")
        return cls((1 - p11) / (2 - p11 - p22), r, p11, p22)


def effective_bandwidth_onoff(src: OnOffSource, theta: float) -> float:
    """Effective bandwidth (bits per block) at QoS exponent θ."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    rt = src.r * theta
    if src.p11 is None:
        if src.s == 1:
            return src.r
        if rt < 1:
            return math.log1p(src.s * math.expm1(rt)) / theta
        return float(np.logaddexp(math.log1p(-src.s), math.log(src.s) + rt)) / theta
    p11, p22 = src.p11, src.p22
    # largest eigenvalue of the MGF-weighted transition matrix, scaled by e^{-rθ}
    a = p11 * math.exp(-rt) + p22
    disc = a * a - 4 * (p11 + p22 - 1) * math.exp(-rt)
    return (rt + math.log(0.5 * (a + math.sqrt(max(disc, 0.0))))) / theta


def max_arrival_rate(s: float, theta: float, C_e: float) -> float:
    """Largest mean rate of an ON-OFF source whose effective bandwidth at θ
    fits in effective capacity ``C_e``."""
    if not (0 < s <= 1 and theta > 0 and C_e >= 0):
        raise DomainError("need 0 < s <= 1, theta > 0, C_e >= 0")
    return s / theta * math.log1p(math.expm1(theta * C_e) / s)


@dataclass(frozen=True)
class SncEnvelope:
    """MGF envelope E[e^{±θX(τ,t)}] <= e^{θ(ρ(t-τ) ± b)} (sign per role)."""

    rate: float
    burst: float
    theta: float

    def __post_init__(self):
        if self.rate < 0 or self.burst < 0 or not self.theta > 0:
            raise DomainError("need rate, burst >= 0 and theta > 0")


def snc_delay_violation(arrival: SncEnvelope, service: SncEnvelope, w: float) -> float:
    """Steady-state bound on Pr[W > w] from arrival and service MGF envelopes."""
    if not math.isclose(arrival.theta, service.theta):
        raise DomainError("envelopes must share theta")
    if arrival.rate >= service.rate:
        raise UnstableError("arrival rate must be below service rate")
    th = arrival.theta
    log_b = th * (arrival.burst + service.burst - service.rate * w) \
        - math.log(-math.expm1(th * (arrival.rate - service.rate)))
    return min(1.0, math.exp(log_b))


AOI_KINDS = ("MM1", "MG1", "MG11", "MM11", "MM12", "LCFS_preempt")


@dataclass(frozen=True)
class AoiModel:
    """Status-update queue. ``service_second_moment`` is E[S²] for the MG kinds
    (defaults to 1/μ²)."""

    kind: str
    lam: float
    mu: float
    service_second_moment: float | None = None

    def __post_init__(self):
        if self.kind not in AOI_KINDS:
            raise DomainError(f"unknown AoI model {self.kind!r}")
        if not (self.lam > 0 and self.mu > 0):
            raise DomainError("rates must be positive")

    @property
    def load(self) -> float:
        return self.lam / self.mu


def peak_aoi(model: AoiModel) -> float:
    """Average peak age of information."""
    lam, mu, rho = model.lam, model.mu, model.load
    kind = model.kind
    if kind in ("MM1", "MG1") and rho >= 1:
        raise UnstableError("infinite-buffer queue needs load below one")
    if kind == "MM1":
        return (1 + 1 / rho + rho / (1 - rho)) / mu
    if kind == "MG1":
        es2 = model.service_second_moment or 1 / mu**2
        return 1 / lam + 1 / mu + lam * es2 / (2 * (1 - rho))
    if kind == "MG11":
        return 1 / mu + rho * (1 + 1 / lam)
    if kind == "MM11":
        return 1 / lam + 2 / mu
    if kind == "MM12":
        return 3 / mu + 1 / lam + 2 / (lam + mu)
    # LCFS with preemption: inter-delivery 1/λ + 1/μ plus the system time
    # of a delivered update, Exp(λ + μ)
    return 1 / lam + 1 / mu + 1 / (lam + mu)


def jit_peak_aoi(service_times) -> float:
    """Peak age when each update is generated just as the previous one is
    delivered."""
    d = np.asarray(service_times, dtype=float)
    if d.size < 2:
        raise DomainError("need at least two service times")
    return float(np.mean(d[:-1] + d[1:]))


def age_survival_lcfs(lam: float, mu: float, t: float) -> float:
    """Pr[age > t] for an M/M/1 last-come first-served queue with preemption."""
    if not (lam > 0 and mu > 0) or t < 0:
        raise DomainError("need positive rates and t >= 0")
    if abs(lam - mu) / mu < 1e-9:
        return (lam * t + 1) * math.exp(-lam * t)
    return (lam * math.exp(-mu * t) - mu * math.exp(-lam * t)) / (lam - mu)
