"""Reliability primitives: structure functions, the Gilbert-Elliot channel and
minimum-duration-outage (MDO) margins.

All rates are in 1/s, durations in s and Doppler spreads in Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb

from .errors import BoundInvalidError, DomainError, ResourceError

MAX_EXPLICIT_ITEMS = 25
MDO_XI_LIMIT = 2e-3


@dataclass(frozen=True)
class TwoStateMarkov:
    """Up/down Markov fading channel with failure rate λ and repair rate μ."""

    failure_rate: float
    repair_rate: float

    def __post_init__(self):
        if not (self.failure_rate > 0 and self.repair_rate > 0):
            raise DomainError("failure and repair rates must be positive")

    @property
    def transition_matrix(self) -> np.ndarray:
        lam, mu = self.failure_rate, self.repair_rate
        return np.array([[-lam, lam], [mu, -mu]])


@dataclass(frozen=True)
class DependabilitySummary:
    availability: float
    mttf: float
    mut: float
    mdt: float


@dataclass(frozen=True)
class MdoProblem:
    """Target MDO probability ``xi`` for bursts of duration ``burst_duration``."""

    xi: float
    burst_duration: float
    doppler: float

    def __post_init__(self):
        if not 0 < self.xi:
            raise DomainError("xi must be positive")
        if self.xi >= MDO_XI_LIMIT:
            raise BoundInvalidError(
                f"MDO bound only valid for xi < {MDO_XI_LIMIT}; use outage_only_margin"
            )
        if not (self.burst_duration > 0 and self.doppler > 0):
            raise DomainError("burst duration and Doppler must be positive")


@dataclass(frozen=True)
class StructureSpec:
    """Coherent structure function over ``n`` items.

    ``truth_table`` (explicit kind) maps a tuple of 0/1 item states to a
    truthy value; alternatively an array of length ``2**n`` indexed by the
    state integer whose bit ``i`` is the state of item ``i``.
    """

    kind: str
    n: int
    k: int | None = None
    truth_table: Callable[[tuple[int, ...]], bool] | Sequence[bool] | None = None

    def __post_init__(self):
        if self.kind not in ("series", "parallel", "k_out_of_n", "explicit"):
            raise DomainError(f"unknown structure kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if self.kind == "k_out_of_n" and (self.k is None or not 1 <= self.k <= self.n):
            raise DomainError("k_out_of_n needs 1 <= k <= n")
        if self.kind == "explicit" and self.truth_table is None:
            raise DomainError("explicit structure needs a truth table")

    @classmethod
    def series(cls, n: int) -> "StructureSpec":
        return cls("series", n)

    @classmethod
    def parallel(cls, n: int) -> "StructureSpec":
        return cls("parallel", n)

    @classmethod
    def k_out_of_n(cls, k: int, n: int) -> "StructureSpec":
        return cls("k_out_of_n", n, k=k)

    @classmethod
    def explicit(cls, n: int, truth_table, check_coherent: bool = True) -> "StructureSpec":
        spec = cls("explicit", n, truth_table=truth_table)
        if check_coherent and n <= 16:
            table = spec.table()
            states = np.arange(2**n)
            for i in range(n):
                off = states[(states >> i) & 1 == 0]
                if np.any(table[off] & ~table[off | (1 << i)]):
                    raise DomainError("truth table is not monotone (system not coherent)")
        return spec

    def table(self) -> np.ndarray:
        """Boolean array of φ over all ``2**n`` state integers."""
        if self.n > MAX_EXPLICIT_ITEMS:
            raise ResourceError(f"enumeration limited to {MAX_EXPLICIT_ITEMS} items")
        states = np.arange(2**self.n)
        if self.kind == "explicit":
            tt = self.truth_table
            if callable(tt):
                bits = ((states[:, None] >> np.arange(self.n)) & 1).tolist()
                return np.fromiter((bool(tt(tuple(b))) for b in bits), bool, len(states))
            arr = np.asarray(tt, dtype=bool)
            if arr.shape != (2**self.n,):
                raise DomainError("truth table must have 2**n entries")
            return arr
        ups = np.zeros(len(states), dtype=np.int64)
        for i in range(self.n):
            ups += (states >> i) & 1
        need = {"series": self.n, "parallel": 1, "k_out_of_n": self.k}[self.kind]
        return ups >= need


def relay_bridge() -> StructureSpec:
    """Two-relay bridge network.

    Links 1 and 2 connect the source to relays R1 and R2, link 3 joins the
    relays and links 4 and 5 connect R1 and R2 to the destination.
    """

    def phi(x):
        x1, x2, x3, x4, x5 = x
        return (x1 and x4) or (x2 and x5) or (x1 and x3 and x5) or (x2 and x3 and x4)

    return StructureSpec.explicit(5, phi)


def gilbert_elliot_rates(gamma_th: float, gamma_bar: float, f_D: float) -> TwoStateMarkov:
    """Failure and repair rates of a Rayleigh channel thresholded at ``gamma_th``."""
    if not (gamma_th > 0 and gamma_bar > 0 and f_D > 0):
        raise DomainError("gamma_th, gamma_bar and f_D must be positive")
    x = gamma_th / gamma_bar
    lam = math.sqrt(2 * math.pi * x) * f_D
    return TwoStateMarkov(lam, lam / math.expm1(x))


def steady_quantities(model: TwoStateMarkov) -> DependabilitySummary:
    lam, mu = model.failure_rate, model.repair_rate
    return DependabilitySummary(
        availability=mu / (lam + mu), mttf=1 / lam, mut=1 / lam, mdt=1 / mu
    )


def reliability_at(model: TwoStateMarkov, t: float) -> float:
    """Probability of no failure during ``[0, t]``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    return math.exp(-model.failure_rate * t)


def structure_availability(spec: StructureSpec, p: Sequence[float]) -> float:
    """E[φ(X)] for independent item states X_i ~ Bernoulli(p_i)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (spec.n,):
        raise DomainError(f"expected {spec.n} item availabilities")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("availabilities must lie in [0, 1]")
    if spec.kind == "series":
        return float(np.prod(p))
    if spec.kind == "parallel":
        return float(1 - np.prod(1 - p))
    if spec.kind == "k_out_of_n" and np.allclose(p, p[0]):
        j = np.arange(spec.k, spec.n + 1)
        return float(np.sum(comb(spec.n, j) * p[0] ** j * (1 - p[0]) ** (spec.n - j)))
    return _enumerate(spec, p)


def _enumerate(spec: StructureSpec, p: np.ndarray) -> float:
    table = spec.table()
    total = 0.0
    chunk = 1 << 18
    for start in range(0, len(table), chunk):
        states = np.arange(start, min(start + chunk, len(table)))
        up = states[table[states]]
        if up.size == 0:
            continue
        bits = (up[:, None] >> np.arange(spec.n)) & 1
        total += float(np.sum(np.prod(np.where(bits == 1, p, 1 - p), axis=1)))
    return total


def mdo_probability_bound(model: TwoStateMarkov, uT_s: float, f_D: float, F: float) -> float:
    """Upper bound on the probability of an outage lasting longer than ``uT_s``.

    Raises
    ------
    BoundInvalidError
        If the mean down time is not shorter than the tolerated burst.
    """
    if not (uT_s > 0 and f_D > 0 and F > 0):
        raise DomainError("uT_s, f_D and F must be positive")
    if 1 / model.repair_rate >= uT_s:
        raise BoundInvalidError("MDT >= uT_s: MDO bound not valid, use outage_only_margin")
    return _mdo_bound(F, uT_s * f_D)


def _mdo_bound(F: float, ut_fd: float) -> float:
    # cosh(y) - 1 = 2 sinh(y/2)^2 keeps precision for large F
    return math.sqrt(2 * F / math.pi) * 2 * math.sinh(0.5 / F) ** 2 / ut_fd


def mdo_margin(problem: MdoProblem) -> tuple[float, float]:
    """SNR margin meeting the MDO target, by bisection and in closed form.

    Returns
    -------
    (F_root, F_closed_form)
        Linear margins. The closed form is the large-F Taylor approximation.
    """
    ut_fd = problem.burst_duration * problem.doppler
    target = math.log(problem.xi)

    def g(logF):
        return math.log(_mdo_bound(math.exp(logF), ut_fd)) - target

    lo, hi = 0.0, 12 * math.log(10)
    if g(lo) < 0 or g(hi) > 0:
        raise BoundInvalidError("no MDO margin between 0 and 120 dB")
    while hi - lo > 1e-10 * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    F_root = math.exp(0.5 * (lo + hi))
    F_closed = (2 * math.pi * problem.xi**2 * ut_fd**2) ** (-1 / 3)
    model = gilbert_elliot_rates(1.0, F_root, problem.doppler)
    if 1 / model.repair_rate >= problem.burst_duration:
        raise BoundInvalidError("MDT >= uT_s at the solution; use outage_only_margin")
    return F_root, F_closed


def outage_only_margin(xi: float) -> float:
    """Margin F with 1 - exp(-1/F) = xi (Rayleigh outage only)."""
    if not 0 < xi < 1:
        raise DomainError("xi must lie in (0, 1)")
    return -1 / math.log1p(-xi)


def to_db(x: float) -> float:
    return 10 * math.log10(x)


def from_db(x_db: float) -> float:
    return 10 ** (x_db / 10)
