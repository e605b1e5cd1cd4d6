"""Identical-neighborhood detection in the vertex-arrival model.

Each arriving vertex carries its whole neighbor list. The digest keeps one
discrete-log fingerprint per vertex, h(N(v)) = g^x with x the n-bit
incidence vector of N(v) read big-endian (bit u has weight 2^(n-u)).
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

from .crypto_prims import DlFingerprinter
from .stream_core import Decoder, Encoder, RandomTape, StreamAlgorithm, StreamError, register


class VertexArrival(NamedTuple):
    vertex: int
    neighbors: tuple[int, ...]


class DuplicateVertexError(StreamError):
    pass


@lru_cache(maxsize=64)
def _weight_table(n: int, p: int, g: int, order: int) -> tuple[int, ...]:
    """table[u] = g^(2^(n-u)) mod p for u in 1..n (index 0 unused)."""
    table = [0] * (n + 1)
    h = g
    for u in range(n, 0, -1):
        table[u] = h
        h = h * h % p
    return tuple(table)


@register
class NeighborhoodDigest(StreamAlgorithm):
    algorithm_id = "neighborhoods"

    def __init__(self, n: int, fp: DlFingerprinter | None = None):
        if n < 1:
            raise ValueError("need at least one vertex")
        self.n = n
        self.fp = fp or DlFingerprinter()
        self.digest: dict[int, int] = {}
        self._nbytes = (self.fp.p.bit_length() + 7) // 8

    def _weights(self) -> tuple[int, ...]:
        fp = self.fp
        return _weight_table(self.n, fp.p, fp.g, fp.order)

    def fingerprint_of(self, neighbors: Iterable[int]) -> int:
        """Product of g^(2^(n-u)) over the distinct neighbors u."""
        table, p = self._weights(), self.fp.p
        h = 1
        for u in sorted(set(neighbors)):
            if not 1 <= u <= self.n:
                raise StreamError(f"neighbor {u} outside [1, {self.n}]")
            h = h * table[u] % p
        return h

    def fingerprint_bitwise(self, neighbors: Iterable[int]) -> int:
        """Same value, computed one incidence bit at a time."""
        nb = set(neighbors)
        return self.fp.fingerprint(int(u in nb) for u in range(1, self.n + 1))

    def ingest(self, v: int, neighbors: Sequence[int]) -> None:
        if not 1 <= v <= self.n:
            raise StreamError(f"vertex {v} outside [1, {self.n}]")
        if v in self.digest:
            raise DuplicateVertexError(f"vertex {v} already arrived")
        self.digest[v] = self.fingerprint_of(neighbors)

    def process(self, update, tape: RandomTape | None = None) -> None:
        v, neighbors = update
        self.ingest(v, neighbors)

    def classes(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for v in sorted(self.digest):
            groups.setdefault(self.digest[v], []).append(v)
        return sorted(groups.values())

    answer = classes

    def encode(self, enc: Encoder) -> None:
        fp = self.fp
        enc.uint(self.n).text(fp.mode).uint(fp.p).uint(fp.g)
        enc.uint(len(self.digest))
        for v in sorted(self.digest):
            enc.uint(v).fixed(self.digest[v], self._nbytes)

    @classmethod
    def decode(cls, dec: Decoder) -> "NeighborhoodDigest":
        n, mode, p, g = dec.uint(), dec.text(), dec.uint(), dec.uint()
        fp = DlFingerprinter.custom(p, g) if mode == "custom" else _known_fingerprinter(mode, p, g)
        self = cls(n, fp)
        for _ in range(dec.uint()):
            v = dec.uint()
            self.digest[v] = dec.fixed(self._nbytes)
        return self

    def clone(self) -> "NeighborhoodDigest":
        other = NeighborhoodDigest(self.n, self.fp)
        other.digest = dict(self.digest)
        return other


def _known_fingerprinter(mode: str, p: int, g: int) -> DlFingerprinter:
    if mode == "secure":
        return DlFingerprinter("secure")
    return DlFingerprinter("test", prime_bits=p.bit_length())


def ingest_vertex(digest: NeighborhoodDigest, v: int, neighbors: Sequence[int]) -> NeighborhoodDigest:
    digest.ingest(v, neighbors)
    return digest


def identical_neighborhood_classes(digest: NeighborhoodDigest) -> list[list[int]]:
    return digest.classes()


def exact_neighborhood_classes(adjacency: dict[int, Iterable[int]]) -> list[list[int]]:
    """Reference partition by direct comparison of neighbor sets."""
    groups: dict[frozenset, list[int]] = {}
    for v in sorted(adjacency):
        groups.setdefault(frozenset(adjacency[v]), []).append(v)
    return sorted(groups.values())


def parse_graph_lines(lines: Iterable[str]) -> list[VertexArrival]:
    """`v: u1 u2 ...` per arriving vertex; blank lines and # comments are skipped."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, tail = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'v: neighbors'")
        try:
            out.append(VertexArrival(int(head), tuple(int(t) for t in tail.split())))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def format_graph_lines(arrivals: Iterable[VertexArrival]) -> str:
    return "".join(f"{v}: {' '.join(map(str, nb))}\n".replace(" \n", "\n") for v, nb in arrivals)


def symmetric_arrivals(adjacency: dict[int, Iterable[int]]) -> list[VertexArrival]:
    return [VertexArrival(v, tuple(sorted(adjacency[v]))) for v in sorted(adjacency)]
