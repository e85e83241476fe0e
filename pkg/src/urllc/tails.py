"""Concentration bounds, SINR outage in Rayleigh interference networks and the
Markov-inequality precoder test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtri

from ._rng import as_generator
from .errors import CapabilityError, DomainError

BOUND_KINDS = (
    "markov_simple",
    "chebyshev",
    "chernoff",
    "moment",
    "cantelli",
    "paley_zygmund",
    "vysochanskij_petunin",
    "hoeffding",
)


@dataclass(frozen=True)
class MomentSummary:
    """What is known about a random variable X.

    ``mgf_theta_max`` is the supremum of the interval where the MGF is
    finite and ``moment_order_max`` caps the raw-moment search. For
    Hoeffding, ``addend_bounds`` lists the support ``(a_i, b_i)`` of each
    independent addend of X and ``mean`` is E[X] of the sum.
    """

    mean: float
    variance: float
    raw_moment: Callable[[float], float] | None = None
    mgf: Callable[[float], float] | None = None
    mgf_theta_max: float = math.inf
    moment_order_max: float = 100.0
    addend_bounds: Sequence[tuple[float, float]] | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise DomainError("variance must be non-negative")
        if self.mgf is not None and not math.isclose(self.mgf(0.0), 1.0, rel_tol=1e-9):
            raise DomainError("mgf(0) must equal 1")

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean**2


def _log_infimum(log_obj: Callable[[float], float], hi: float) -> float:
    """min over θ in [0, hi) of a log-objective, by grid scan plus Brent polish."""

    def safe(t):
        try:
            v = log_obj(t)
        except (OverflowError, ZeroDivisionError, ValueError):
            return math.inf
        return v if np.isfinite(v) else math.inf

    grid = np.concatenate([[0.0], hi * np.geomspace(1e-8, 1 - 1e-12, 400)])
    vals = np.array([safe(t) for t in grid])
    i = int(np.argmin(vals))
    best = vals[i]
    lo_t, hi_t = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi_t > lo_t:
        res = minimize_scalar(safe, bounds=(lo_t, hi_t), method="bounded",
                              options={"xatol": 1e-12 * max(hi_t, 1e-300)})
        if res.fun < best:
            best = res.fun
    return best


def concentration_bound(kind: str, m: MomentSummary, x: float) -> float:
    """Tail bound of the requested ``kind`` at level ``x``.

    Upper bounds apply to Pr[X >= x] except chebyshev and
    vysochanskij_petunin, which bound Pr[|X - E[X]| >= x]. paley_zygmund
    returns a lower bound on Pr[X > x] for 0 <= x <= E[X].
    """
    if kind == "markov_simple":
        if x <= 0:
            raise DomainError("markov bound needs x > 0")
        return min(1.0, m.mean / x)
    if kind == "chebyshev":
        if x <= 0:
            raise DomainError("chebyshev bound needs x > 0")
        return min(1.0, m.variance / x**2)
    if kind == "cantelli":
        if x <= m.mean:
            raise DomainError("cantelli bound needs x > E[X]")
        d2 = (x - m.mean) ** 2
        return m.variance / (m.variance + d2)
    if kind == "vysochanskij_petunin":
        if x <= 0 or x < math.sqrt(8 * m.variance / 3):
            raise DomainError("vysochanskij_petunin needs x >= sqrt(8V/3)")
        return min(1.0, 4 * m.variance / (9 * x**2))
    if kind == "paley_zygmund":
        if not 0 <= x <= m.mean:
            raise DomainError("paley_zygmund needs 0 <= x <= E[X]")
        if m.second_moment == 0:
            return 0.0
        return (m.mean - x) ** 2 / m.second_moment
    if kind == "hoeffding":
        if m.addend_bounds is None:
            raise CapabilityError("hoeffding needs per-addend support bounds")
        if x <= m.mean:
            raise DomainError("hoeffding bound needs x > E[X]")
        spread = sum((b - a) ** 2 for a, b in m.addend_bounds)
        if spread == 0:
            return 0.0
        return math.exp(-2 * (x - m.mean) ** 2 / spread)
    if kind == "chernoff":
        if m.mgf is None:
            raise CapabilityError("chernoff needs the moment generating function")
        hi = m.mgf_theta_max
        if not np.isfinite(hi):
            hi = 50.0 / max(abs(x), math.sqrt(m.variance), 1e-12)
        return min(1.0, math.exp(_log_infimum(lambda t: math.log(m.mgf(t)) - t * x, hi)))
    if kind == "moment":
        if m.raw_moment is None:
            raise CapabilityError("moment bound needs raw moments")
        if x <= 0:
            raise DomainError("moment bound needs x > 0")
        lx = math.log(x)
        return min(1.0, math.exp(_log_infimum(
            lambda t: math.log(m.raw_moment(t)) - t * lx, m.moment_order_max)))
    raise DomainError(f"unknown bound kind {kind!r}")


@dataclass(frozen=True)
class SinrNetwork:
    """Rayleigh-faded link of mean SNR ``gamma0_bar`` with interferers of mean
    received SNR ``interferer_bars``."""

    gamma0_bar: float
    interferer_bars: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "interferer_bars", tuple(float(g) for g in self.interferer_bars))
        if self.gamma0_bar <= 0 or any(g <= 0 for g in self.interferer_bars):
            raise DomainError("mean SNRs must be positive")

    @property
    def asinr(self) -> float:
        """Average signal to average interference-plus-noise ratio."""
        return self.gamma0_bar / (1 + sum(self.interferer_bars))


def sinr_outage_exact(net: SinrNetwork, gamma_th):
    g = np.asarray(gamma_th, dtype=float)
    gk = np.asarray(net.interferer_bars)
    log_s = -g / net.gamma0_bar - np.log1p(np.multiply.outer(g, gk) / net.gamma0_bar).sum(-1)
    out = -np.expm1(log_s)
    return float(out) if out.ndim == 0 else out


def sinr_outage_tail_approx(net: SinrNetwork, gamma_th):
    """Outage assuming exponential SINR with mean equal to the ASINR; an upper
    bound on the exact outage."""
    out = -np.expm1(-np.asarray(gamma_th, dtype=float) / net.asinr)
    return float(out) if out.ndim == 0 else out


def required_snr_ultra_reliable(gamma_bar: float, gamma_th: float, xi: float) -> tuple[float, float]:
    """Minimum intended-link mean SNR meeting outage ``xi`` under total mean
    interference ``gamma_bar``.

    Returns the exact value and the small-``xi`` form ``(1+γ̄)γ_th/ξ``.
    """
    if not 0 < xi < 1:
        raise DomainError("xi must lie in (0, 1)")
    scale = (1 + gamma_bar) * gamma_th
    return -scale / math.log1p(-xi), scale / xi


@dataclass(frozen=True)
class ChannelHistory:
    """``entries`` is an (L, M) complex array of channel vectors."""

    entries: np.ndarray
    noise_power: float

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        if h.shape[0] < 1 or h.shape[1] < 1:
            raise DomainError("history needs at least one entry of dimension >= 1")
        if self.noise_power <= 0:
            raise DomainError("noise power must be positive")
        object.__setattr__(self, "entries", h)

    @property
    def L(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]

    def gains(self, w) -> np.ndarray:
        """|wᴴh_l|² for every entry."""
        w = np.asarray(w, dtype=complex)
        if w.shape != (self.M,):
            raise DomainError(f"beamformer must have dimension {self.M}")
        return np.abs(self.entries @ w.conj()) ** 2


class MarkovCheck(NamedTuple):
    feasible: bool
    statistic: float
    margin: float


def precoder_markov_feasible(hist: ChannelHistory, w, gamma_th: float, xi: float,
                             confidence: float | None = None) -> MarkovCheck:
    """Markov-inequality outage test over a channel history.

    ``confidence`` replaces the sample mean by a central-limit upper
    confidence bound at that level.
    """
    g = hist.gains(w)
    if np.any(g == 0):
        return MarkovCheck(False, math.inf, math.inf)
    terms = hist.noise_power * gamma_th / g
    stat = float(terms.mean())
    if confidence is not None and hist.L > 1:
        stat += float(ndtri(confidence) * terms.std(ddof=1) / math.sqrt(hist.L))
    return MarkovCheck(stat <= xi, stat, stat / xi)


def rician_history(M: int, L: int, k_factor: float, rng, noise_power: float = 1.0,
                   los_angle: float | None = None) -> ChannelHistory:
    """Unit-gain Rician channels with a uniform-linear-array LOS component."""
    rng = as_generator(rng)
    if los_angle is None:
        los_angle = rng.uniform(-math.pi / 2, math.pi / 2)
    los = np.exp(1j * math.pi * np.arange(M) * math.sin(los_angle))
    diffuse = (rng.standard_normal((L, M)) + 1j * rng.standard_normal((L, M))) / math.sqrt(2)
    h = math.sqrt(k_factor / (1 + k_factor)) * los + math.sqrt(1 / (1 + k_factor)) * diffuse
    return ChannelHistory(h, noise_power)


def random_directions(M: int, count: int, rng) -> np.ndarray:
    """``count`` unit-norm complex directions, isotropically distributed."""
    rng = as_generator(rng)
    u = rng.standard_normal((count, M)) + 1j * rng.standard_normal((count, M))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def min_power_markov_beamformer(hist: ChannelHistory, gamma_th: float, xi: float,
                                candidates: int = 10_000, rng=0) -> np.ndarray:
    """Lowest-power Markov-feasible beamformer among random directions.

    The test statistic scales as 1/‖w‖², so each direction u is feasible
    with minimum power stat(u)/ξ.
    """
    dirs, power = markov_ranked_directions(hist, gamma_th, xi, candidates, rng)
    # a few ulps above the boundary so the returned w passes the test itself
    return dirs[0] * math.sqrt(power[0] * (1 + 1e-12))


def markov_ranked_directions(hist: ChannelHistory, gamma_th: float, xi: float,
                             candidates: int = 10_000, rng=0) -> tuple[np.ndarray, np.ndarray]:
    """Random unit directions sorted by their Markov-feasible minimum power,
    with those powers."""
    dirs = random_directions(hist.M, candidates, rng)
    inv = 1.0 / (np.abs(hist.entries.conj() @ dirs.T) ** 2)
    power = hist.noise_power * gamma_th * inv.mean(axis=0) / xi
    order = np.argsort(power, kind="stable")
    return dirs[order], power[order]


def empirical_outage(h: np.ndarray, w, noise_power: float, gamma_th: float) -> float:
    """Fraction of channels in ``h`` with SNR |wᴴh|²/N below ``gamma_th``."""
    g = np.abs(np.asarray(h) @ np.asarray(w).conj()) ** 2
    return float(np.mean(g / noise_power < gamma_th))
