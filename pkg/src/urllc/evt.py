"""Extreme-value tools: GEV distribution, peaks-over-threshold GPD fitting,
Hill estimation and an EVT-based precoder certificate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from ._rng import as_generator
from .errors import DomainError, FitError, InsufficientDataError
from .tails import ChannelHistory, random_directions

MIN_EXCEEDANCES = 30


def _log1p_ratio(k, s):
    """log1p(k*s)/k with the k -> 0 limit s."""
    k = np.asarray(k, dtype=float)
    s = np.asarray(s, dtype=float)
    ks = k * s
    small = np.abs(ks) < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.log1p(ks) / np.where(k == 0, 1.0, k)
    series = s * (1 - ks / 2 + ks**2 / 3)
    return np.where(small, series, exact)


@dataclass(frozen=True)
class GevParams:
    location: float
    scale: float
    shape: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("GEV scale must be positive")


def gev_cdf(p: GevParams, z):
    s = (np.asarray(z, dtype=float) - p.location) / p.scale
    t = 1 + p.shape * s
    inside = t > 0
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.exp(-np.exp(-_log1p_ratio(p.shape, np.where(inside, s, 0.0))))
    outside = 0.0 if p.shape > 0 else 1.0
    out = np.where(inside, val, outside)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GpdFit:
    """Peaks-over-threshold fit. ``exceedance_fraction`` is the share of
    samples strictly above ``threshold``."""

    threshold: float
    exceedance_fraction: float
    kappa: float
    sigma: float
    ci_kappa: tuple[float, float]
    ci_sigma: tuple[float, float]
    ci_level: float
    n_exceedances: int
    se_kappa: float
    se_sigma: float


def _gpd_sf(y, kappa: float, sigma: float):
    """Survival function of GPD(κ, σ) at excess ``y >= 0``."""
    y = np.asarray(y, dtype=float)
    t = 1 + kappa * y / sigma
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.exp(-_log1p_ratio(kappa, np.where(t > 0, y / sigma, 0.0)))
    return np.where(t > 0, val, 0.0)


def _gpd_nll(kappa: float, sigma: float, y: np.ndarray) -> float:
    if sigma <= 0 or kappa < -1:
        return math.inf
    t = kappa * y / sigma
    if np.any(t <= -1):
        return math.inf
    return float(len(y) * math.log(sigma) + np.sum(np.log1p(t) + _log1p_ratio(kappa, y / sigma)))


def _fit_excesses(y: np.ndarray) -> tuple[float, float]:
    scale = float(np.mean(y))
    z = y / scale
    m, v = float(np.mean(z)), float(np.var(z))
    k0 = float(np.clip(0.5 * (1 - m * m / v), -0.9, 0.9)) if v > 0 else 0.0
    s0 = max(0.5 * m * (m * m / v + 1) if v > 0 else m, 1e-3)
    zmax = float(np.max(z))
    if k0 < 0:
        s0 = max(s0, -k0 * zmax * 1.01)

    def obj(p):
        return _gpd_nll(p[0], math.exp(p[1]), z)

    best = None
    for start in ((k0, math.log(s0)), (0.0, math.log(m)), (-0.5, math.log(0.51 * zmax))):
        if not np.isfinite(obj(start)):
            continue
        res = minimize(obj, start, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise FitError("GPD likelihood maximisation failed: no finite starting point")
    kappa, sigma = float(best.x[0]), math.exp(best.x[1]) * scale
    return kappa, sigma


def _observed_cov(kappa: float, sigma: float, y: np.ndarray) -> np.ndarray | None:
    hk, hs = 1e-4, 1e-4 * sigma
    f = lambda k, s: _gpd_nll(k, s, y)
    f0 = f(kappa, sigma)
    fkk = (f(kappa + hk, sigma) - 2 * f0 + f(kappa - hk, sigma)) / hk**2
    fss = (f(kappa, sigma + hs) - 2 * f0 + f(kappa, sigma - hs)) / hs**2
    fks = (f(kappa + hk, sigma + hs) - f(kappa + hk, sigma - hs)
           - f(kappa - hk, sigma + hs) + f(kappa - hk, sigma - hs)) / (4 * hk * hs)
    H = np.array([[fkk, fks], [fks, fss]])
    if not np.all(np.isfinite(H)) or np.linalg.det(H) <= 0 or fkk <= 0:
        return None
    return np.linalg.inv(H)


def _expected_cov(kappa: float, sigma: float, n: int) -> np.ndarray:
    a = 1 + kappa
    return np.array([[a * a, -sigma * a], [-sigma * a, 2 * sigma**2 * a]]) / n


def gpd_fit(samples, rho: float = 0.05, ci_level: float = 0.95) -> GpdFit:
    """Fit a GPD to the excesses over the empirical (1 - rho)-quantile.

    The shape κ and scale σ̄ are maximum-likelihood estimates; confidence
    intervals use the observed information (the expected information is
    the fallback when the Hessian is not positive definite, e.g. κ̂ near -1).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    if not 0 < ci_level < 1:
        raise DomainError("ci_level must lie in (0, 1)")
    u = float(np.quantile(x, 1 - rho))
    y = x[x > u] - u
    if len(y) < MIN_EXCEEDANCES:
        raise InsufficientDataError(f"{len(y)} exceedances above u, need {MIN_EXCEEDANCES}")
    kappa, sigma = _fit_excesses(y)
    cov = _observed_cov(kappa, sigma, y)
    if cov is None:
        cov = _expected_cov(max(kappa, -1 + 1e-9), sigma, len(y))
    se_k, se_s = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    z = float(ndtri(0.5 * (1 + ci_level)))
    return GpdFit(
        threshold=u,
        exceedance_fraction=len(y) / len(x),
        kappa=kappa,
        sigma=sigma,
        ci_kappa=(kappa - z * se_k, kappa + z * se_k),
        ci_sigma=(max(sigma - z * se_s, 1e-12 * sigma), sigma + z * se_s),
        ci_level=ci_level,
        n_exceedances=len(y),
        se_kappa=se_k,
        se_sigma=se_s,
    )


def gpd_tail_prob(fit: GpdFit, x, kappa: float | None = None, sigma: float | None = None):
    """Pr[X > x] from the fitted tail, for ``x >= threshold``.

    ``kappa`` and ``sigma`` override the point estimates.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < fit.threshold):
        raise DomainError("x must not lie below the threshold")
    k = fit.kappa if kappa is None else kappa
    s = fit.sigma if sigma is None else sigma
    out = fit.exceedance_fraction * _gpd_sf(x - fit.threshold, k, s)
    return float(out) if out.ndim == 0 else out


def hill_tail_index(samples, k: int) -> float:
    """Hill estimate of 1/β from the ``k`` largest order statistics."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if np.any(x <= 0):
        raise DomainError("Hill estimator needs positive samples")
    n = len(x)
    if not 2 <= k < n:
        raise DomainError("need 2 <= k < n")
    return float(np.mean(np.log(x[n - k:])) - math.log(x[n - k - 1]))


class EvtCertificate(NamedTuple):
    feasible: bool
    worst_tail: float
    fit: GpdFit | None


def precoder_evt_feasible(hist: ChannelHistory, w, gamma_th: float, xi: float,
                          rho: float = 0.05, ci_level: float = 0.95,
                          transform: Callable = np.log1p) -> EvtCertificate:
    """Certify Pr[|wᴴh|²/N < γ_th] <= ξ from a GPD fit of Θ = f(N/|wᴴh|²).

    The fitted conditional tail at f(1/γ_th) must stay below ξ/ρ for every
    (κ, σ̄) in the confidence rectangle. ``transform`` is the increasing
    concave map f.
    """
    g = hist.gains(w)
    if np.any(g == 0):
        return EvtCertificate(False, math.inf, None)
    theta = transform(hist.noise_power / g)
    target = float(transform(1.0 / gamma_th))
    if np.ptp(theta) == 0:
        ok = bool(theta[0] < target)
        return EvtCertificate(ok, 0.0 if ok else 1.0, None)
    fit = gpd_fit(theta, rho, ci_level)
    if fit.threshold >= target:
        return EvtCertificate(False, 1.0, fit)
    d = target - fit.threshold
    klo, khi = fit.ci_kappa
    slo, shi = fit.ci_sigma
    corners = [_gpd_sf(d, k, s) for k in (klo, khi) for s in (slo, shi)]
    along = _gpd_sf(d, np.linspace(klo, khi, 33), shi)
    worst = float(max(max(corners), np.max(along)))
    return EvtCertificate(worst <= xi / fit.exceedance_fraction, worst, fit)


def min_power_evt_beamformer(hist: ChannelHistory, gamma_th: float, xi: float,
                             rho: float = 0.05, ci_level: float = 0.95,
                             candidates: int = 50, rng=0, steps: int = 30,
                             directions=None, transform: Callable = np.log1p):
    """Lowest-power EVT-certified beamformer among candidate directions.

    Directions are ``candidates`` isotropic draws unless unit-norm
    ``directions`` (one per row) are given. For each direction the certified
    power is located by bisection on the log of the power. Returns ``None``
    if no direction certifies.
    """
    if directions is None:
        dirs = random_directions(hist.M, candidates, as_generator(rng))
    else:
        dirs = np.atleast_2d(np.asarray(directions, dtype=complex))
    best, best_lp = None, math.inf
    for u in dirs:
        def ok(lp):
            w = u * math.exp(0.5 * lp)
            return precoder_evt_feasible(hist, w, gamma_th, xi, rho, ci_level, transform).feasible

        markov_power = hist.noise_power * gamma_th * float(np.mean(1 / hist.gains(u))) / xi
        hi = math.log(markov_power) + 1.0
        if best is not None:
            hi = min(hi, best_lp)
        if not ok(hi):
            continue
        lo = hi - 30.0
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        if hi < best_lp:
            best_lp, best = hi, u * math.exp(0.5 * hi)
    return best
