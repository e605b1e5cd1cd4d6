"""Turnstile sketches built on short-integer-solution hardness.

L0SisSketch keeps A * f_chunk mod q for every chunk of n^eps coordinates
and counts the nonzero chunks. RankSketch keeps H * A mod q for an n x n
matrix A under entry updates and decides whether rank(A) >= k.
"""
from __future__ import annotations

import enum
import itertools
import math
from functools import lru_cache
from typing import Sequence

import sympy

from .crypto_prims import RandomOracleMatrix
from .stream_core import Decoder, Encoder, RandomTape, StreamAlgorithm, StreamError, register

L0_MODULUS = (1 << 61) - 1


def int_power_ceil(n: int, e: float) -> int:
    """ceil(n^e) without being fooled by float noise (16^0.5 is 4, not 5)."""
    r = round(n ** e)
    return r if abs(r - n ** e) < 1e-9 else math.ceil(n ** e)


@register
class L0SisSketch(StreamAlgorithm):
    """Counts chunks of [n] whose sketch A * f_chunk mod q is nonzero.

    Unless a short kernel vector of A occurs (SIS), estimate <= L0(f) <= estimate * n^eps.
    """

    algorithm_id = "l0_sis"

    def __init__(self, n: int, eps: float = 0.5, c: float = 0.25, q: int = L0_MODULUS, seed: int = 0,
                 max_magnitude: int | None = None):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 < c < 0.5:
            raise ValueError("c must lie in (0, 1/2)")
        self.n, self.eps, self.c, self.q, self.seed = n, float(eps), float(c), q, seed
        self.max_magnitude = max_magnitude or n ** 3
        self.width = max(1, int_power_ceil(n, eps))
        self.chunks = -(-n // self.width)
        self.rows = max(1, int_power_ceil(n, c * eps))
        self.A = RandomOracleMatrix(seed, self.rows, self.width, q)
        self._rbytes = max(1, ((q - 1).bit_length() + 7) // 8)
        self.acc = [[0] * self.rows for _ in range(self.chunks)]

    def locate(self, coordinate: int) -> tuple[int, int]:
        """(chunk index from 0, column of A from 1)."""
        return (coordinate - 1) // self.width, (coordinate - 1) % self.width + 1

    def process(self, update, tape: RandomTape | None = None) -> None:
        coord, delta = update
        if not 1 <= coord <= self.n:
            raise StreamError(f"coordinate {coord} outside [1, {self.n}]")
        if abs(delta) > self.max_magnitude:
            raise StreamError(f"|delta| = {abs(delta)} exceeds max_magnitude {self.max_magnitude}")
        chunk, col = self.locate(coord)
        acc = self.acc[chunk]
        q = self.q
        for r, a in enumerate(self.A.column(col)):
            acc[r] = (acc[r] + delta * a) % q

    def estimate(self) -> int:
        return sum(1 for acc in self.acc if any(acc))

    answer = estimate

    def approximation_factor(self) -> int:
        return self.width

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).float64(self.eps).float64(self.c).uint(self.q).uint(self.seed).uint(self.max_magnitude)
        nb = self._rbytes
        for acc in self.acc:
            for v in acc:
                enc.fixed(v, nb)

    @classmethod
    def decode(cls, dec: Decoder) -> "L0SisSketch":
        n, eps, c, q, seed, mm = dec.uint(), dec.float64(), dec.float64(), dec.uint(), dec.uint(), dec.uint()
        self = cls(n, eps, c, q, seed, mm)
        nb = self._rbytes
        self.acc = [[dec.fixed(nb) for _ in range(self.rows)] for _ in range(self.chunks)]
        return self

    def clone(self) -> "L0SisSketch":
        other = object.__new__(L0SisSketch)
        other.__dict__.update(self.__dict__)
        other.acc = [a[:] for a in self.acc]
        return other

    def expected_state_bits(self) -> int:
        """Residue payload only: chunks * rows * residue width."""
        return 8 * self._rbytes * self.chunks * self.rows


# ---------------------------------------------------------------- rank


class RankDecision(enum.Enum):
    AT_LEAST_K = "rank>=k"
    BELOW_K = "rank<k"
    INCONCLUSIVE = "inconclusive"


@lru_cache(maxsize=None)
def default_rank_modulus(n: int, k: int) -> int:
    bound = n ** (k * max(1, math.ceil(math.log2(n)))) if n > 1 else 1
    return int(sympy.nextprime(max(bound, 1 << 61)))


@lru_cache(maxsize=None)
def _shell_vectors(k: int, B: int) -> tuple[tuple[int, ...], ...]:
    """Nonzero x in [-B, B]^k up to sign, ordered by growing max-norm."""
    out = []
    for b in range(1, B + 1):
        for x in itertools.product(range(-b, b + 1), repeat=k):
            if max(abs(v) for v in x) != b:
                continue
            first = next(v for v in x if v)
            if first > 0:
                out.append(x)
    return tuple(out)


def _independent_mod_q(cols: Sequence[Sequence[int]], q: int) -> bool:
    """Whether the k given length-k vectors are linearly independent over Z_q."""
    m = [list(c) for c in cols]
    k = len(m)
    for c in range(k):
        piv = next((r for r in range(c, k) if m[r][c] % q), None)
        if piv is None:
            return False
        m[c], m[piv] = m[piv], m[c]
        inv = pow(m[c][c], -1, q)
        for r in range(c + 1, k):
            f = m[r][c] * inv % q
            if f:
                m[r] = [(a - f * b) % q for a, b in zip(m[r], m[c])]
    return True


@register
class RankSketch(StreamAlgorithm):
    """H * A mod q for a dim x dim integer matrix A built from entry updates.

    Deciding rank >= k checks every k-subset of nonzero sketch columns for a
    short integer combination x (max-norm <= B) with H A x = 0 mod q. All
    subsets dependent means rank < k; any subset without such x means its k
    columns are independent, so rank >= k. Too many columns or too many
    candidate vectors gives INCONCLUSIVE rather than a guess.
    """

    algorithm_id = "rank"

    def __init__(self, dim: int, k: int, seed: int = 0, q: int | None = None, bound: int = 4,
                 max_columns: int = 8, budget: int = 10 ** 6):
        if not 1 <= k <= dim:
            raise ValueError("need 1 <= k <= dim")
        self.dim, self.k, self.seed = dim, k, seed
        self.q = q or default_rank_modulus(dim, k)
        self.bound, self.max_columns, self.budget = bound, max_columns, budget
        self.H = RandomOracleMatrix(seed, k, dim, self.q)
        self.HA = [[0] * dim for _ in range(k)]  # HA[row][col]

    def update_entry(self, i: int, j: int, delta: int) -> None:
        """A[i][j] += delta (1-indexed): column j of HA gains delta * H[:, i]."""
        if not (1 <= i <= self.dim and 1 <= j <= self.dim):
            raise StreamError(f"entry ({i}, {j}) outside {self.dim}x{self.dim}")
        q = self.q
        for r, h in enumerate(self.H.column(i)):
            self.HA[r][j - 1] = (self.HA[r][j - 1] + delta * h) % q

    def process(self, update, tape: RandomTape | None = None) -> None:
        coord, delta = update
        if not 1 <= coord <= self.dim * self.dim:
            raise StreamError(f"coordinate {coord} outside [1, {self.dim * self.dim}]")
        i, j = divmod(coord - 1, self.dim)
        self.update_entry(i + 1, j + 1, delta)

    def columns(self) -> list[tuple[int, ...]]:
        return [tuple(self.HA[r][j] for r in range(self.k)) for j in range(self.dim)]

    def decide(self) -> RankDecision:
        cols = [c for c in self.columns() if any(c)]
        k, q = self.k, self.q
        if len(cols) < k:
            return RankDecision.BELOW_K
        if len(cols) > self.max_columns:
            return RankDecision.INCONCLUSIVE
        vectors = _shell_vectors(k, self.bound)
        spent = 0
        for subset in itertools.combinations(cols, k):
            if _independent_mod_q(subset, q):
                # no nonzero x at all, short or not
                return RankDecision.AT_LEAST_K
            found = False
            for x in vectors:
                spent += 1
                if spent > self.budget:
                    return RankDecision.INCONCLUSIVE
                if all(sum(xi * col[r] for xi, col in zip(x, subset)) % q == 0 for r in range(k)):
                    found = True
                    break
            if not found:
                return RankDecision.AT_LEAST_K
        return RankDecision.BELOW_K

    answer = decide

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.dim).uint(self.k).uint(self.seed).uint(self.q).uint(self.bound)
        enc.uint(self.max_columns).uint(self.budget)
        for row in self.HA:
            for v in row:
                enc.uint(v)

    @classmethod
    def decode(cls, dec: Decoder) -> "RankSketch":
        dim, k, seed, q, bound, mc, budget = (dec.uint() for _ in range(7))
        self = cls(dim, k, seed, q, bound, mc, budget)
        self.HA = [[dec.uint() for _ in range(dim)] for _ in range(k)]
        return self

    def clone(self) -> "RankSketch":
        other = object.__new__(RankSketch)
        other.__dict__.update(self.__dict__)
        other.HA = [row[:] for row in self.HA]
        return other


def rank_decide(sketch: RankSketch) -> RankDecision:
    return sketch.decide()


def exact_rank(matrix: Sequence[Sequence[int]]) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination."""
    a = [list(map(int, row)) for row in matrix]
    if not a:
        return 0
    rows, cols = len(a), len(a[0])
    rank, prev = 0, 1
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if a[r][col]), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        for r in range(rank + 1, rows):
            for c in range(col + 1, cols):
                a[r][c] = (a[r][c] * a[rank][col] - a[r][col] * a[rank][c]) // prev
            a[r][col] = 0
        prev = a[rank][col]
        rank += 1
        if rank == rows:
            break
    return rank


def matrix_updates(matrix: Sequence[Sequence[int]]):
    """Entry updates (as StreamUpdates over [dim^2]) that build the matrix from zero."""
    from .stream_core import StreamUpdate

    dim = len(matrix)
    return [StreamUpdate(i * dim + j + 1, v) for i, row in enumerate(matrix) for j, v in enumerate(row) if v]
