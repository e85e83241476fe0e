"""Network-scale reliability: the SIR meta-distribution of Poisson fields,
collision-aware access scheduling and AMP-based activity detection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate
from scipy.special import erfc

from ._rng import as_generator, generator, substreams
from .errors import DivergenceError, DomainError

# ---------------------------------------------------------------- meta-distribution


@dataclass(frozen=True)
class MetaDistQuery:
    """Typical link of length ``r0`` in a Poisson field of density ``density``
    (nodes/m²) with path-loss exponent ``alpha``, no fading on interferers."""

    density: float
    gamma_th: float
    r0: float
    alpha: float = 4.0
    xi: float = 0.01

    def __post_init__(self):
        if not (self.density > 0 and self.r0 > 0 and self.gamma_th > 0):
            raise DomainError("density, r0 and gamma_th must be positive")
        if not self.alpha > 2:
            raise DomainError("alpha must exceed 2")
        if not 0 < self.xi < 1:
            raise DomainError("xi must lie in (0, 1)")

    @property
    def interference_threshold(self) -> float:
        """Largest interference V = Σ‖x‖^{-α} with conditional success >= 1 - ξ."""
        return -math.log1p(-self.xi) / (self.gamma_th * self.r0**self.alpha)


def interference_pdf_alpha4(lam: float, v):
    """Density of the unfaded interference of a Poisson field with α = 4."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("v must be positive")
    out = math.pi * lam / (2 * v**1.5) * np.exp(-math.pi**3 * lam**2 / (4 * v))
    return float(out) if out.ndim == 0 else out


def interference_cdf_alpha4(lam: float, v):
    v = np.asarray(v, dtype=float)
    out = erfc(np.sqrt(math.pi**3 * lam**2 / (4 * v)))
    return float(out) if out.ndim == 0 else out


def metadist_closed_form_alpha4(q: MetaDistQuery) -> float:
    """Fraction of links whose conditional success probability is >= 1 - ξ."""
    if q.alpha != 4:
        raise DomainError("closed form needs alpha = 4; use metadist_mc")
    return interference_cdf_alpha4(q.density, q.interference_threshold)


def truncation_radius(q: MetaDistQuery, tol: float = 1e-3) -> float:
    """Window radius beyond which the interference fluctuation has standard
    deviation ``tol`` times the interference threshold."""
    a = q.alpha
    spread = math.sqrt(math.pi * q.density / (a - 1))
    return (spread / (tol * q.interference_threshold)) ** (1 / (a - 1))


def far_field_mean(q: MetaDistQuery, radius: float) -> float:
    """Mean interference from nodes farther than ``radius``."""
    a = q.alpha
    return 2 * math.pi * q.density * radius ** (2 - a) / (a - 2)


class MetaDistEstimate(NamedTuple):
    estimate: float
    std_error: float
    window_radius: float


def metadist_mc(q: MetaDistQuery, realizations: int = 100_000, window_radius: float | None = None,
                seed: int = 0, chunk: int = 10_000) -> MetaDistEstimate:
    """Monte Carlo meta-distribution over Poisson fields.

    Nodes are drawn in a disc; the mean interference from outside it is
    added as a constant.
    """
    if realizations < 1:
        raise DomainError("realizations must be at least 1")
    R = truncation_radius(q) if window_radius is None else window_radius
    v_th = q.interference_threshold
    v_far = far_field_mean(q, R)
    mean_pts = q.density * math.pi * R * R
    hits = 0
    n_chunks = -(-realizations // chunk)
    for i, rng in enumerate(substreams(seed, n_chunks)):
        m = min(chunk, realizations - i * chunk)
        counts = rng.poisson(mean_pts, size=m)
        r = R * np.sqrt(rng.random(int(counts.sum())))
        owner = np.repeat(np.arange(m), counts)
        V = v_far + np.bincount(owner, weights=r ** (-q.alpha), minlength=m)
        hits += int(np.sum(V <= v_th))
    p = hits / realizations
    return MetaDistEstimate(p, math.sqrt(p * (1 - p) / realizations), R)


def success_prob_from_meta(meta: Callable[[float], float], grid: Sequence[float] | None = None) -> float:
    """Mean success probability as the integral of p_m(ξ) over ξ in (0, 1).

    With ``grid`` the trapezoidal rule on those ξ nodes is used, otherwise
    adaptive quadrature.
    """
    if grid is not None:
        xi = np.asarray(grid, dtype=float)
        vals = np.array([meta(x) for x in xi])
        return float(np.trapezoid(vals, xi))
    val, _ = integrate.quad(meta, 0.0, 1.0, limit=200, epsabs=1e-12, epsrel=1e-10)
    return float(val)


def meta_alpha4(density: float, gamma_th: float, r0: float) -> Callable[[float], float]:
    """ξ ↦ p_m(ξ) for the α = 4 closed form."""
    def f(xi):
        if xi <= 0:
            return 0.0
        if xi >= 1:
            return 1.0
        return metadist_closed_form_alpha4(MetaDistQuery(density, gamma_th, r0, 4.0, xi))
    return f


# ---------------------------------------------------------------- scheduling


@dataclass(frozen=True)
class ActivationMatrix:
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise DomainError("activation matrix must be square and symmetric")
        d = np.diag(A)
        if np.any(A < 0) or np.any(A > np.minimum.outer(d, d) + 1e-12):
            raise DomainError("need 0 <= A_ij <= min(A_ii, A_jj)")
        object.__setattr__(self, "A", A)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @classmethod
    def harmonic(cls, N: int) -> "ActivationMatrix":
        """A_ij = 1/(i + j + |i - j|) for devices numbered from 1."""
        i = np.arange(1, N + 1)
        return cls(1.0 / (i[:, None] + i[None, :] + np.abs(i[:, None] - i[None, :])))


@dataclass(frozen=True)
class Allocation:
    pools: tuple[tuple[int, ...], ...]

    @classmethod
    def from_labels(cls, labels: Sequence[int], L: int) -> "Allocation":
        labels = np.asarray(labels)
        return cls(tuple(tuple(int(i) for i in np.flatnonzero(labels == l)) for l in range(L)))

    def validate(self, N: int) -> None:
        seen = sorted(i for pool in self.pools for i in pool)
        if seen != list(range(N)):
            raise DomainError("pools must partition the devices")


def collision_probability(A: ActivationMatrix, alloc: Allocation) -> tuple[list[float], float]:
    """Probability that some pair in each pool is simultaneously active, and
    the mean over pools."""
    alloc.validate(A.N)
    per_pool = []
    for pool in alloc.pools:
        idx = np.asarray(pool, dtype=int)
        if len(idx) < 2:
            per_pool.append(0.0)
            continue
        sub = A.A[np.ix_(idx, idx)]
        iu = np.triu_indices(len(idx), 1)
        per_pool.append(float(-np.expm1(np.sum(np.log1p(-sub[iu])))))
    return per_pool, float(np.mean(per_pool))


def random_allocation(N: int, L: int, rng) -> Allocation:
    """Each device picks one of the L pools uniformly at random."""
    return Allocation.from_labels(as_generator(rng).integers(0, L, size=N), L)


def _assign(d: np.ndarray, medoids: list[int]) -> np.ndarray:
    N, L = d.shape[0], len(medoids)
    labels = np.full(N, -1)
    sizes = np.zeros(L, dtype=int)
    for l, m in enumerate(medoids):
        labels[m] = l
        sizes[l] += 1
    dm = d[:, medoids]
    for i in range(N):
        if labels[i] >= 0:
            continue
        best = dm[i].min()
        tied = np.flatnonzero(dm[i] <= best)
        l = int(tied[np.argmin(sizes[tied])])
        labels[i] = l
        sizes[l] += 1
    return labels


def kmedoids_schedule(A: ActivationMatrix, L: int, seed: int = 0, max_iter: int = 100,
                      return_trace: bool = False):
    """Cluster devices into L pools with K-medoids under d_ij = 1{i≠j} A_ij.

    Medoids start from a greedy farthest-point sweep; ties when assigning a
    device go to the smallest tied pool. With ``return_trace`` the PAM
    objective after each iteration is returned as well.
    """
    N = A.N
    if not 1 <= L <= N:
        raise DomainError("need 1 <= L <= N")
    d = A.A.copy()
    np.fill_diagonal(d, 0.0)
    rng = generator(seed)
    medoids = [int(rng.integers(N))]
    while len(medoids) < L:
        gap = d[:, medoids].min(axis=1)
        gap[medoids] = -np.inf
        medoids.append(int(np.argmax(gap)))
    trace = []
    seen = set()
    for _ in range(max_iter):
        labels = _assign(d, medoids)
        trace.append(float(d[np.arange(N), np.asarray(medoids)[labels]].sum()))
        new = []
        for l in range(L):
            idx = np.flatnonzero(labels == l)
            cost = d[np.ix_(idx, idx)].sum(axis=1)
            cand = medoids[l] if cost[idx == medoids[l]][0] <= cost.min() else int(idx[np.argmin(cost)])
            new.append(cand)
        key = tuple(new)
        if new == medoids or key in seen:
            break
        seen.add(tuple(medoids))
        medoids = new
    alloc = Allocation.from_labels(labels, L)
    return (alloc, trace) if return_trace else alloc


# ---------------------------------------------------------------- activity detection


@dataclass(frozen=True)
class AmpProblem:
    """Y = sqrt(τ_p γ̄) Φ Sᵀ + W with unit-norm pilot columns Φ (τ_p x N)."""

    Y: np.ndarray
    Phi: np.ndarray
    gamma_bar: float

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=complex))
        Phi = np.atleast_2d(np.asarray(self.Phi))
        Phi = Phi.real.astype(float) if not np.any(np.imag(Phi)) else Phi.astype(complex)
        if Y.shape[0] != Phi.shape[0]:
            raise DomainError("Y and Phi must have tau_p rows")
        if not np.allclose(np.linalg.norm(Phi, axis=0), 1.0, atol=1e-9):
            raise DomainError("pilot columns must have unit norm")
        if not self.gamma_bar > 0:
            raise DomainError("gamma_bar must be positive")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Phi", Phi)

    @property
    def tau_p(self) -> int:
        return self.Phi.shape[0]

    @property
    def N(self) -> int:
        return self.Phi.shape[1]

    @property
    def M(self) -> int:
        return self.Y.shape[1]


def bernoulli_pilots(tau_p: int, N: int, rng) -> np.ndarray:
    """i.i.d. ±1/√τ_p pilot entries."""
    return (2.0 * as_generator(rng).integers(0, 2, size=(tau_p, N)) - 1) / math.sqrt(tau_p)


def simulate_activity(tau_p: int, M: int, N: int, gamma_bar: float, eps: float, rng):
    """Draw one uplink identification phase with i.i.d. activity and
    Rayleigh channels. Returns the problem, the true activity and S."""
    rng = as_generator(rng)
    Phi = bernoulli_pilots(tau_p, N, rng)
    active = rng.random(N) < eps
    H = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / math.sqrt(2)
    S = H * active[:, None]
    W = (rng.standard_normal((tau_p, M)) + 1j * rng.standard_normal((tau_p, M))) / math.sqrt(2)
    Y = math.sqrt(tau_p * gamma_bar) * Phi @ S + W
    return AmpProblem(Y, Phi, gamma_bar), active, S


def _amp(p: AmpProblem, iterations: int, c: float) -> np.ndarray:
    """Row-sparse AMP with a group soft-threshold; returns the effective
    channel estimates (N x M)."""
    # divergence is detected explicitly below
    with np.errstate(invalid="ignore", over="ignore"):
        return _amp_iterate(p, iterations, c)


def _amp_iterate(p: AmpProblem, iterations: int, c: float) -> np.ndarray:
    Phi, Y, tau, M = p.Phi, p.Y, p.tau_p, p.M
    real_pilots = not np.iscomplexobj(Phi)
    S = np.zeros((p.N, M), dtype=complex)
    R = Y.copy()
    for t in range(iterations):
        U = Phi.conj().T @ R + S
        thr = c * np.linalg.norm(R) / math.sqrt(tau)
        norms = np.linalg.norm(U, axis=1)
        on = norms > thr
        safe = np.where(on, norms, 1.0)
        gain = np.where(on, 1 - thr / safe, 0.0)
        S = U * gain[:, None]
        if real_pilots:
            # real sensing matrix: the Onsager term needs the full Jacobian
            # of the denoiser over the stacked real and imaginary parts
            V = np.hstack([U.real, U.imag])[on]
            J = gain.sum() * np.eye(2 * M) + (V.T * (thr / safe[on] ** 3)) @ V
            corr = np.hstack([R.real, R.imag]) @ J / tau
            onsager = corr[:, :M] + 1j * corr[:, M:]
        else:
            div = np.where(on, 1 - thr * (2 * M - 1) / (2 * M * safe), 0.0)
            onsager = R * (div.sum() / tau)
        R = Y - Phi @ S + onsager
        if not np.all(np.isfinite(R)):
            raise DivergenceError(f"AMP residual diverged at iteration {t + 1}", partial=t + 1)
    return S / math.sqrt(tau * p.gamma_bar)


def amp_detect(p: AmpProblem, iterations: int = 30, psi: float = 1.0, c: float = 1.5) -> np.ndarray:
    """Declare device n active when its estimated channel norm reaches ψ.

    ``c`` scales the soft threshold relative to the residual noise level
    ‖R‖/√τ_p per antenna.
    """
    if iterations < 1 or psi < 0:
        raise DomainError("need iterations >= 1 and psi >= 0")
    return np.linalg.norm(_amp(p, iterations, c), axis=1) >= psi


def amp_detect_known_sparsity(p: AmpProblem, iterations: int = 30, k_active: int = 0,
                              c: float = 1.5) -> np.ndarray:
    """Declare the ``k_active`` devices with the strongest estimated channels."""
    if not 0 <= k_active <= p.N:
        raise DomainError("need 0 <= k_active <= N")
    out = np.zeros(p.N, dtype=bool)
    if k_active == 0:
        return out
    norms = np.linalg.norm(_amp(p, iterations, c), axis=1)
    out[np.argsort(-norms, kind="stable")[:k_active]] = True
    return out


def amp_norms(p: AmpProblem, iterations: int = 30, c: float = 1.5) -> np.ndarray:
    """Estimated channel norm of every device (for threshold sweeps)."""
    return np.linalg.norm(_amp(p, iterations, c), axis=1)
