"""Rare-event probability estimation.

Crude Monte Carlo, importance sampling, Metropolis-Hastings and subset
simulation for probabilities of the form Pr[S(X) >= x_th].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammainc

from ._rng import generator, substreams
from .errors import DomainError, NonConvergenceError, UrllcError

DEFAULT_BATCH = 1 << 16


class EstimationError(UrllcError, ValueError):
    """Importance weights are not finite."""


@dataclass(frozen=True)
class TargetEvent:
    """The event {S(X) >= threshold} for X drawn by ``sampler``.

    ``score`` maps an (m, d) array to m scores and ``sampler(rng, m)``
    returns an (m, d) array. Subset simulation additionally needs
    ``component_logpdf``, the elementwise log-density of the independent
    components of X.
    """

    dimension: int
    score: Callable[[np.ndarray], np.ndarray]
    threshold: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    component_logpdf: Callable[[np.ndarray], np.ndarray] | None = None

    def hits(self, x: np.ndarray) -> np.ndarray:
        return self.score(x) >= self.threshold


@dataclass(frozen=True)
class RareEventEstimate:
    p_hat: float
    variance_hat: float
    cov: float
    samples_used: int
    levels: int = 1
    thresholds: tuple[float, ...] = ()


@dataclass
class Tally:
    """Mergeable running sums of a per-sample estimator."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, values: np.ndarray) -> "Tally":
        values = np.asarray(values, dtype=float)
        self.count += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.square(values).sum())
        return self

    def merge(self, other: "Tally") -> "Tally":
        return Tally(self.count + other.count, self.total + other.total,
                     self.total_sq + other.total_sq)

    def estimate(self, levels: int = 1) -> RareEventEstimate:
        if self.count < 1:
            raise DomainError("no samples")
        p = self.total / self.count
        var = max(self.total_sq / self.count - p * p, 0.0) / self.count
        cov = math.sqrt(var) / p if p > 0 else math.inf
        return RareEventEstimate(p, var, cov, self.count, levels)


def _batches(N: int, batch: int):
    while N > 0:
        m = min(N, batch)
        yield m
        N -= m


def cmc_estimate(ev: TargetEvent, N: int, seed: int = 0, batch: int = DEFAULT_BATCH) -> RareEventEstimate:
    """Crude Monte Carlo: the fraction of N draws inside the event."""
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = generator(seed)
    tally = Tally()
    for m in _batches(N, batch):
        tally.add(ev.hits(ev.sampler(rng, m)))
    return tally.estimate()


def is_estimate(ev: TargetEvent, proposal: Callable[[np.random.Generator, int], np.ndarray],
                log_weight: Callable[[np.ndarray], np.ndarray], N: int, seed: int = 0,
                batch: int = DEFAULT_BATCH) -> RareEventEstimate:
    """Importance sampling with draws from ``proposal`` and weights
    exp(log_weight(y)) = f(y)/g(y)."""
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = generator(seed)
    tally = Tally()
    for m in _batches(N, batch):
        y = proposal(rng, m)
        hit = ev.hits(y)
        lw = np.asarray(log_weight(y), dtype=float)
        if np.any(np.isnan(lw) | np.isposinf(lw)):
            raise EstimationError("non-finite importance weight: proposal does not dominate target")
        tally.add(np.where(hit, np.exp(lw), 0.0))
    return tally.estimate()


def required_cmc_samples(p: float, cov: float) -> float:
    """Crude Monte Carlo sample size giving coefficient of variation ``cov``."""
    return (1 - p) / (cov**2 * p)


@dataclass(frozen=True)
class ProposalSpec:
    """Metropolis-Hastings proposal.

    ``random_walk_symmetric`` adds ``scale``-sized Gaussian steps unless a
    custom symmetric ``step(rng, x)`` is supplied. ``independence`` draws
    from ``sampler(rng)`` with log-density ``log_density``.
    """

    kind: str = "random_walk_symmetric"
    scale: float | np.ndarray = 1.0
    step: Callable | None = None
    sampler: Callable | None = None
    log_density: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("random_walk_symmetric", "independence"):
            raise DomainError(f"unknown proposal kind {self.kind!r}")
        if self.kind == "independence" and (self.sampler is None or self.log_density is None):
            raise DomainError("independence proposal needs sampler and log_density")


def mh_chain(log_target: Callable, proposal: ProposalSpec, x0, N: int,
             burn_in: int | None = None, seed: int = 0) -> np.ndarray:
    """N post-burn-in Metropolis-Hastings states (burn-in defaults to N/10)."""
    if burn_in is None:
        burn_in = N // 10
    rng = generator(seed)
    x = np.asarray(x0, dtype=float) if proposal.step is None else x0
    lf = log_target(x)
    if not np.isfinite(lf):
        raise DomainError("log_target must be finite at x0")
    out = []
    for i in range(burn_in + N):
        if proposal.kind == "independence":
            y = proposal.sampler(rng)
            log_a = log_target(y) - lf + proposal.log_density(x) - proposal.log_density(y)
        else:
            if proposal.step is not None:
                y = proposal.step(rng, x)
            else:
                y = x + proposal.scale * rng.standard_normal(np.shape(x))
            log_a = log_target(y) - lf
        if log_a >= 0 or math.log(rng.random()) < log_a:
            x, lf = y, log_target(y)
        if i >= burn_in:
            out.append(x)
    return np.asarray(out)


def subset_simulation(ev: TargetEvent, n: int = 10_000, q: float = 0.1, seed: int = 0,
                      max_levels: int = 50, thinning: int = 1) -> RareEventEstimate:
    """Subset simulation with adaptive intermediate thresholds.

    Each level keeps the ``n*q`` samples closest to the target as seeds and
    grows a component-wise Metropolis-Hastings chain of length ``1/q`` from
    each (the seed included), so every level holds ``n`` samples. The
    random-walk spread of each component equals the spread of the seeds.
    Sampling stops once at least ``n*q`` samples of a level reach the target.

    ``thinning`` MH sweeps are run between retained chain states. Deep
    ladders (tens of levels) accumulate an upward bias from inter-level
    correlation that thinning removes; every sweep counts towards
    ``samples_used``.
    """
    if ev.component_logpdf is None:
        raise DomainError("subset simulation needs component_logpdf")
    if thinning < 1:
        raise DomainError("thinning must be at least 1")
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    n_seeds = n * q
    chain_len = 1 / q
    if abs(n_seeds - round(n_seeds)) > 1e-9 or abs(chain_len - round(chain_len)) > 1e-9:
        raise DomainError("n*q and 1/q must be integers")
    n_seeds, chain_len = int(round(n_seeds)), int(round(chain_len))
    streams = substreams(seed, max_levels + 1)
    x = ev.sampler(streams[0], n)
    y = ev.score(x)
    used = n
    thresholds: list[float] = []
    level_probs: list[float] = []
    for level in range(max_levels + 1):
        hits = int(np.sum(y >= ev.threshold))
        if hits >= n_seeds:
            p_final = hits / n
            level_probs.append(p_final)
            p = q ** len(thresholds) * p_final
            cov2 = sum((1 - pl) / (n * pl) for pl in level_probs)
            return RareEventEstimate(p, cov2 * p * p, math.sqrt(cov2), used,
                                     len(thresholds) + 1, tuple(thresholds))
        if level == max_levels:
            break
        order = np.argsort(-y, kind="stable")
        y_star = 0.5 * (y[order[n_seeds - 1]] + y[order[n_seeds]])
        thresholds.append(float(y_star))
        level_probs.append(q)
        seeds, seed_y = x[order[:n_seeds]], y[order[:n_seeds]]
        x, y = _conditional_chains(ev, seeds, seed_y, y_star, chain_len, streams[level + 1],
                                   thinning)
        used += n_seeds * (chain_len - 1) * thinning
    raise NonConvergenceError(
        f"target threshold not reached after {max_levels} levels",
        partial={"thresholds": tuple(thresholds), "p_upper": q ** len(thresholds),
                 "samples_used": used},
    )


def _conditional_chains(ev: TargetEvent, seeds: np.ndarray, seed_y: np.ndarray, y_star: float,
                        chain_len: int, rng: np.random.Generator, thinning: int = 1):
    spread = seeds.std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    cur, cur_y = seeds.copy(), seed_y.copy()
    cur_lp = ev.component_logpdf(cur)
    xs, ys = [cur.copy()], [cur_y.copy()]
    for sweep in range(1, (chain_len - 1) * thinning + 1):
        cand = cur + spread * rng.standard_normal(cur.shape)
        cand_lp = ev.component_logpdf(cand)
        with np.errstate(invalid="ignore"):
            accept = np.log(rng.random(cur.shape)) < cand_lp - cur_lp
        prop = np.where(accept, cand, cur)
        prop_lp = np.where(accept, cand_lp, cur_lp)
        prop_y = ev.score(prop)
        inside = prop_y > y_star
        cur = np.where(inside[:, None], prop, cur)
        cur_lp = np.where(inside[:, None], prop_lp, cur_lp)
        cur_y = np.where(inside, prop_y, cur_y)
        if sweep % thinning:
            continue
        xs.append(cur.copy())
        ys.append(cur_y.copy())
    return np.concatenate(xs), np.concatenate(ys)


def mrc_outage_event(d: int, gamma_bar: float, r: float) -> TargetEvent:
    """Outage of d-branch maximum-ratio combining over i.i.d. Rayleigh fading.

    The event Σ|h_i|² < (2^r - 1)/γ̄ is written as S(x) = -Σx_i >= x_th.
    """
    def sampler(rng, m):
        return rng.exponential(size=(m, d))

    def logpdf(x):
        return np.where(x >= 0, -x, -np.inf)

    return TargetEvent(d, lambda x: -x.sum(axis=1), -(2**r - 1) / gamma_bar, sampler, logpdf)


def mrc_outage_closed_form(d: int, gamma_bar: float, r: float) -> float:
    """Pr[Gamma(d, 1) < (2^r - 1)/γ̄], the regularized lower incomplete gamma."""
    if d < 1 or int(d) != d:
        raise DomainError("d must be a positive integer")
    return float(gammainc(d, (2**r - 1) / gamma_bar))
