"""Short codes: polar codes with successive-cancellation decoding, and GRAND
(guessing random additive noise decoding) for the binary symmetric channel.

Polar bit positions are reported 1..N, left to right in the decoding tree;
arrays are 0-indexed as usual.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from ._rng import generator
from .errors import DomainError
from .fbl import Q, error_prob

MODULATION_BITS = {"BPSK": 1, "QPSK": 2}


@dataclass(frozen=True)
class PolarCode:
    N: int
    K: int
    frozen: np.ndarray  # bool mask, True = frozen
    construction_param: float = 0.5

    def __post_init__(self):
        mask = np.asarray(self.frozen, dtype=bool)
        if self.N < 1 or self.N & (self.N - 1):
            raise DomainError("N must be a power of two")
        if mask.shape != (self.N,) or int((~mask).sum()) != self.K:
            raise DomainError("frozen mask must have N entries and K free positions")
        object.__setattr__(self, "frozen", mask)

    @property
    def frozen_indices(self) -> tuple[int, ...]:
        """Frozen positions, numbered from 1."""
        return tuple(int(i) + 1 for i in np.flatnonzero(self.frozen))

    @property
    def info_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)


def bhattacharyya(N: int, z0: float = 0.5) -> np.ndarray:
    """Bhattacharyya parameters of the N synthetic channels of a BEC(z0)."""
    z = np.array([z0])
    while len(z) < N:
        nxt = np.empty(2 * len(z))
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def polar_construct(N: int, K: int, design_param: float = 0.5) -> PolarCode:
    """Freeze the N - K synthetic channels with the largest Bhattacharyya
    parameter (ties go to the lower position)."""
    if N < 1 or N & (N - 1):
        raise DomainError("N must be a power of two")
    if not 0 <= K <= N:
        raise DomainError("need 0 <= K <= N")
    if not 0 < design_param < 1:
        raise DomainError("design parameter must lie in (0, 1)")
    z = bhattacharyya(N, design_param)
    order = np.argsort(-z, kind="stable")
    frozen = np.zeros(N, dtype=bool)
    frozen[order[: N - K]] = True
    return PolarCode(N, K, frozen, design_param)


def polar_transform(u: np.ndarray) -> np.ndarray:
    """u G^{⊗m} over GF(2) with G = [[1, 0], [1, 1]]; batches along axis 0."""
    u = np.array(u, dtype=np.uint8)
    single = u.ndim == 1
    x = np.atleast_2d(u).copy()
    B, N = x.shape
    m = int(math.log2(N))
    x = x.reshape((B,) + (2,) * m)
    for axis in range(1, m + 1):
        lo = [slice(None)] * (m + 1)
        hi = list(lo)
        lo[axis], hi[axis] = 0, 1
        x[tuple(lo)] ^= x[tuple(hi)]
    x = x.reshape(B, N)
    return x[0] if single else x


def polar_encode(code: PolarCode, info_bits) -> np.ndarray:
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape[-1] != code.K:
        raise DomainError(f"expected {code.K} information bits")
    u = np.zeros(info.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., code.info_positions] = info
    return polar_transform(u)


def _sc(alpha: np.ndarray, frozen: np.ndarray):
    n = alpha.shape[1]
    if frozen.all():
        z = np.zeros_like(alpha, dtype=np.uint8)
        return z, z
    if n == 1:
        u = (alpha < 0).astype(np.uint8)
        return u, u
    h = n // 2
    a, b = alpha[:, :h], alpha[:, h:]
    left = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    u_l, beta_l = _sc(left, frozen[:h])
    right = b + (1 - 2 * beta_l.astype(float)) * a
    u_r, beta_r = _sc(right, frozen[h:])
    return np.concatenate([u_l, u_r], 1), np.concatenate([beta_l ^ beta_r, beta_r], 1)


def polar_sc_decode(code: PolarCode, llrs) -> np.ndarray:
    """Successive-cancellation decoding of channel LLRs log P(0)/P(1).

    Accepts one block of N LLRs or a (B, N) batch and returns the K
    decoded information bits of each block.
    """
    alpha = np.asarray(llrs, dtype=float)
    single = alpha.ndim == 1
    alpha = np.atleast_2d(alpha)
    if alpha.shape[1] != code.N:
        raise DomainError(f"expected {code.N} LLRs per block")
    u, _ = _sc(alpha, code.frozen)
    info = u[:, code.info_positions]
    return info[0] if single else info


def modulate_llrs(bits: np.ndarray, snr: float, modulation: str, rng) -> np.ndarray:
    """Channel LLRs for coded bits sent over complex AWGN at symbol SNR ``snr``.

    BPSK puts one bit on the real axis; QPSK Gray-maps bit pairs onto the
    two axes with half the symbol energy each.
    """
    sigma2 = 1 / (2 * snr)  # noise variance per real dimension
    amp = 1.0 if modulation == "BPSK" else 1 / math.sqrt(2)
    tx = amp * (1 - 2 * bits.astype(float))
    y = tx + math.sqrt(sigma2) * rng.standard_normal(bits.shape)
    return 2 * amp * y / sigma2


class BlerEstimate(NamedTuple):
    bler: float
    errors: int
    trials: int


def polar_bler_sim(code: PolarCode, snr_db: float, modulation: str = "BPSK",
                   trials: int = 10_000, seed: int = 0, batch: int = 4096) -> BlerEstimate:
    """Monte Carlo block error rate of SC-decoded polar codes over AWGN."""
    if modulation not in MODULATION_BITS:
        raise DomainError(f"modulation must be one of {sorted(MODULATION_BITS)}")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    snr = 10 ** (snr_db / 10)
    n_batches = -(-trials // batch)
    errors = 0
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        rng = generator(ss)
        m = min(batch, trials - i * batch)
        info = rng.integers(0, 2, size=(m, code.K), dtype=np.uint8)
        llr = modulate_llrs(polar_encode(code, info), snr, modulation, rng)
        errors += int(np.any(polar_sc_decode(code, llr) != info, axis=1).sum())
    return BlerEstimate(errors / trials, errors, trials)


def fbl_reference_bler(code: PolarCode, snr_db: float, modulation: str = "BPSK") -> float:
    """Normal-approximation error probability for K bits over the channel uses
    the code occupies at this modulation."""
    uses = code.N // MODULATION_BITS[modulation]
    return float(error_prob(uses, code.K, 10 ** (snr_db / 10)))


def uncoded_bpsk_bler(N: int, snr_db: float) -> float:
    p = float(Q(math.sqrt(2 * 10 ** (snr_db / 10))))
    return 1 - (1 - p) ** N


# ---------------------------------------------------------------- GRAND

def gf2_rank(M: np.ndarray) -> int:
    A = np.array(M, dtype=np.uint8) % 2
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if A[r, c]), None)
        if piv is None:
            continue
        A[[rank, piv]] = A[[piv, rank]]
        for r in range(rows):
            if r != rank and A[r, c]:
                A[r] ^= A[rank]
        rank += 1
    return rank


def gf2_nullspace(G: np.ndarray) -> np.ndarray:
    """Basis (rows) of {x : G x = 0} over GF(2)."""
    A = np.array(G, dtype=np.uint8) % 2
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if A[i, c]), None)
        if piv is None:
            continue
        A[[r, piv]] = A[[piv, r]]
        for i in range(rows):
            if i != r and A[i, c]:
                A[i] ^= A[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for i, p in enumerate(pivots):
            v[p] = A[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


@dataclass(frozen=True)
class BinaryCodebook:
    """A binary code known only through its membership oracle."""

    n: int
    contains: Callable[[np.ndarray], bool]
    generator: np.ndarray | None = None

    @classmethod
    def from_generator(cls, G) -> "BinaryCodebook":
        G = np.array(G, dtype=np.uint8) % 2
        H = gf2_nullspace(G)

        def contains(c):
            return not np.any((H @ np.asarray(c, dtype=np.int64)) % 2)

        return cls(G.shape[1], contains, G)

    def codewords(self) -> np.ndarray:
        if self.generator is None:
            raise DomainError("codeword listing needs a generator matrix")
        k = self.generator.shape[0]
        msgs = (np.arange(2**k)[:, None] >> np.arange(k)) & 1
        return (msgs @ self.generator) % 2


def random_linear_code(n: int, k: int, rng) -> BinaryCodebook:
    """Random binary [n, k] code with a full-rank generator."""
    rng = generator(rng) if not isinstance(rng, np.random.Generator) else rng
    while True:
        G = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
        if gf2_rank(G) == k:
            return BinaryCodebook.from_generator(G)


@dataclass(frozen=True)
class NoiseQueryOrder:
    """Noise patterns of a BSC(p) from most to least likely.

    Patterns of equal weight come in lexicographic order of flip positions.
    """

    n: int
    p: float = 0.05

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise DomainError("crossover probability must lie in [0, 1]")

    def __iter__(self) -> Iterator[np.ndarray]:
        weights = range(self.n + 1) if self.p <= 0.5 else range(self.n, -1, -1)
        for w in weights:
            for flips in itertools.combinations(range(self.n), w):
                z = np.zeros(self.n, dtype=np.uint8)
                z[list(flips)] = 1
                yield z


class GrandResult(NamedTuple):
    codeword: np.ndarray | None
    queries: int
    abandoned: bool


def grand_decode(book: BinaryCodebook, y, order: NoiseQueryOrder | None = None,
                 max_queries: int | None = None) -> GrandResult:
    """Guess noise patterns until y ⊕ z is a codeword."""
    y = np.asarray(y, dtype=np.uint8)
    if y.shape != (book.n,):
        raise DomainError(f"received word must have {book.n} bits")
    order = NoiseQueryOrder(book.n) if order is None else order
    for q, z in enumerate(order, start=1):
        if max_queries is not None and q > max_queries:
            return GrandResult(None, max_queries, True)
        c = y ^ z
        if book.contains(c):
            return GrandResult(c, q, False)
    return GrandResult(None, 2**book.n, True)
