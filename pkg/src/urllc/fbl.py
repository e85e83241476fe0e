"""Finite-blocklength performance of AWGN and block-fading channels.

Rates are in bits per channel use (bpcu), SNRs are linear unless a name
ends in ``_db``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, stats
from scipy.special import erfc, ndtri

from .errors import DomainError, NonConvergenceError

LOG2E_SQ = math.log2(math.e) ** 2


def Q(x):
    """Gaussian tail function."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2))


def Qinv(eps):
    """Inverse of :func:`Q`."""
    return -ndtri(np.asarray(eps, dtype=float))


def awgn_capacity_dispersion(gamma):
    """Capacity C and channel dispersion V of the complex AWGN channel."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("SNR must be non-negative")
    C = np.log1p(g) / math.log(2)
    V = g * (2 + g) / (1 + g) ** 2 * LOG2E_SQ
    if C.ndim == 0:
        return float(C), float(V)
    return C, V


def _check_eps(eps):
    if not 0 < eps < 1:
        raise DomainError("error probability must lie in (0, 1)")


class MaxRate(NamedTuple):
    rate: float
    clipped: bool


def max_rate(N: int, epsilon: float, gamma: float, correction: bool = True) -> MaxRate:
    """Normal approximation of the largest rate at blocklength N and error ε.

    ``correction`` adds the log2(N)/(2N) third-order term. Negative rates
    are clipped to zero and flagged.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    _check_eps(epsilon)
    C, V = awgn_capacity_dispersion(gamma)
    r = C - math.sqrt(V / N) * float(Qinv(epsilon))
    if correction:
        r += math.log2(N) / (2 * N)
    return MaxRate(max(r, 0.0), r < 0)


def error_prob(N: int, k: float, gamma):
    """Block error probability of k bits over N channel uses at SNR γ."""
    if N < 1 or k <= 0:
        raise DomainError("need N >= 1 and k > 0")
    C, V = awgn_capacity_dispersion(gamma)
    C, V = np.asarray(C), np.asarray(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(V > 0, (C - k / N) / np.sqrt(V / N), -np.inf)
    out = Q(arg)
    return float(out) if out.ndim == 0 else out


class RequiredSnr(NamedTuple):
    gamma: float
    iterations: int
    history: tuple[float, ...]


def required_snr(k: float, N: int, epsilon: float, tol: float = 1e-6,
                 max_iter: int = 200) -> RequiredSnr:
    """SNR at which k bits over N uses achieve error ε, by fixed-point iteration.

    The iteration starts from the high-SNR dispersion log2(e)². ``history``
    holds every iterate, the starting value first.
    """
    if not 0 < epsilon < 0.5:
        raise DomainError("required_snr needs 0 < epsilon < 0.5; for epsilon >= 0.5 use 2**(k/N) - 1")
    if N < 1 or k <= 0:
        raise DomainError("need N >= 1 and k > 0")
    r = k / N
    step = float(Qinv(epsilon)) / math.sqrt(N)
    gamma = 2 ** (r + math.sqrt(LOG2E_SQ) * step) - 1
    history = [gamma]
    for it in range(1, max_iter + 1):
        _, V = awgn_capacity_dispersion(gamma)
        new = 2 ** (r + math.sqrt(V) * step) - 1
        history.append(new)
        if abs(new - gamma) <= tol * abs(new):
            return RequiredSnr(new, it, tuple(history))
        gamma = new
    raise NonConvergenceError("fixed point did not converge", partial=gamma)


def snr_penalty(r: float, N: int, epsilon: float) -> tuple[float, float]:
    """Ratio δ of the finite-blocklength to the asymptotic required SNR, and
    its high-rate limit δ₀ = exp(Q⁻¹(ε)/√N)."""
    _check_eps(epsilon)
    if r <= 0:
        raise DomainError("rate must be positive")
    delta0 = math.exp(float(Qinv(epsilon)) / math.sqrt(N))
    if epsilon == 0.5:
        return 1.0, delta0
    if epsilon > 0.5:
        raise DomainError("snr_penalty needs epsilon <= 0.5")
    gamma = required_snr(r * N, N, epsilon).gamma
    return gamma / (2**r - 1), delta0


@dataclass(frozen=True)
class FadingSpec:
    """Block-fading SNR law: ``rayleigh`` or ``rician`` with linear K-factor."""

    family: str
    mean_snr: float
    los_factor: float = 0.0

    def __post_init__(self):
        if self.family not in ("rayleigh", "rician"):
            raise DomainError(f"unknown fading family {self.family!r}")
        if not self.mean_snr > 0:
            raise DomainError("mean SNR must be positive")
        if self.los_factor < 0:
            raise DomainError("LOS factor must be non-negative")

    def distribution(self):
        """Frozen scipy distribution of the instantaneous SNR."""
        if self.family == "rayleigh" or self.los_factor == 0:
            return stats.expon(scale=self.mean_snr)
        K = self.los_factor
        return stats.ncx2(df=2, nc=2 * K, scale=self.mean_snr / (2 * (K + 1)))


def avg_error_fading(spec: FadingSpec, k: float, N: int, method: str = "expectation") -> float:
    """Block error probability averaged over the fading SNR.

    ``expectation`` integrates the AWGN error probability over the SNR law;
    ``asymptotic_outage`` returns Pr[γ < 2^(k/N) - 1].
    """
    dist = spec.distribution()
    g0 = 2 ** (k / N) - 1
    if method == "asymptotic_outage":
        return float(dist.cdf(g0))
    if method != "expectation":
        raise DomainError(f"unknown method {method!r}")
    # integrate over t = ln γ; mass below g_min is counted as errors
    g_min = g0 * 1e-6
    g_max = float(dist.isf(1e-17))
    if g_max <= g_min:
        return float(error_prob(N, k, spec.mean_snr))
    head = float(dist.cdf(g_min))
    qs = dist.ppf([1e-9, 1e-3, 0.5, 0.999])
    pts = sorted({math.log(p) for p in (*qs, g0) if g_min < p < g_max})

    def integrand(t):
        g = math.exp(t)
        return float(error_prob(N, k, g)) * float(dist.pdf(g)) * g

    val, err = 0.0, 0.0
    edges = [math.log(g_min), *pts, math.log(g_max)]
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            # the accumulated error estimate is checked below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-9, limit=200)
        val += v
        err += e
    total = head + val
    if err > 1e-4 * total + 1e-300:
        raise NonConvergenceError("fading quadrature did not converge",
                                  partial=(total - err, total + err))
    return total


def success_with_metadata(P_em: float, P_ed: float, P_ef: float, n: int = 0) -> float:
    """Success probability with metadata errors and ``n`` retransmissions.

    A retransmission happens only if metadata decoded, data failed and the
    feedback arrived; slots are independent.
    """
    for p in (P_em, P_ed, P_ef):
        if not 0 <= p <= 1:
            raise DomainError("probabilities must lie in [0, 1]")
    if n < 0:
        raise DomainError("n must be non-negative")
    first = (1 - P_em) * (1 - P_ed)
    retry = (1 - P_em) * P_ed * (1 - P_ef)
    return first * sum(retry**i for i in range(n + 1))
