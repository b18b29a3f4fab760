"""Digit streams over an s-adic alphabet and exact prefix statistics."""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from . import kernels
from .errors import DomainError, StreamFormatError

RationalLike = Fraction | int | str

CHUNK = 1 << 14
PACKED_MAGIC = b"ADIC"
PACKED_HEADER = struct.Struct("<4sBBQ2x")


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce ``value`` to an exact rational.

    Accepts ``Fraction``, ``int`` and strings such as ``"3/10"``. Floats are
    rejected: floor brackets of binary floats are not reproducible.
    """
    if isinstance(value, bool):
        raise DomainError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"not a rational: {value!r}") from exc
    raise DomainError(f"expected an exact rational, got {type(value).__name__} {value!r}")


@dataclass(frozen=True)
class Alphabet:
    s: int = 4

    def __post_init__(self):
        if not isinstance(self.s, int) or isinstance(self.s, bool) or self.s < 2:
            raise DomainError(f"radix must be an integer >= 2, got {self.s!r}")
        if self.s > 64:
            raise DomainError("radix above 64 is not supported")

    @property
    def digits(self) -> range:
        return range(self.s)


@dataclass(frozen=True)
class PrefixStats:
    """Counts N_i and digit sum of the first ``n`` digits of a stream."""

    n: int
    counts: tuple[int, ...]
    digit_sum: int

    @classmethod
    def empty(cls, radix: int) -> PrefixStats:
        return cls(0, (0,) * radix, 0)

    @classmethod
    def from_counts(cls, counts) -> PrefixStats:
        counts = tuple(int(c) for c in counts)
        return cls(sum(counts), counts, sum(i * c for i, c in enumerate(counts)))

    @property
    def radix(self) -> int:
        return len(self.counts)

    def updated(self, digits: np.ndarray) -> PrefixStats:
        added = np.bincount(np.asarray(digits, dtype=np.intp), minlength=self.radix)
        if len(added) > self.radix:
            raise DomainError("digit outside the alphabet")
        counts = tuple(c + int(a) for c, a in zip(self.counts, added))
        return PrefixStats.from_counts(counts)

    def frequencies(self) -> tuple[Fraction, ...]:
        return tuple(relative_frequency(self, i) for i in range(self.radix))

    def mean(self) -> Fraction:
        return relative_mean(self)


def relative_frequency(stats: PrefixStats, i: int) -> Fraction:
    if stats.n < 1:
        raise DomainError("relative frequency of an empty prefix")
    if not 0 <= i < stats.radix:
        raise DomainError(f"digit {i} outside alphabet of size {stats.radix}")
    return Fraction(stats.counts[i], stats.n)


def relative_mean(stats: PrefixStats) -> Fraction:
    if stats.n < 1:
        raise DomainError("relative mean of an empty prefix")
    return Fraction(stats.digit_sum, stats.n)


def digits_of_rational(numerator: int, denominator: int, alphabet: Alphabet, count: int) -> list[int]:
    """First ``count`` digits of numerator/denominator in base ``alphabet.s``.

    Long division never produces a tail of s-1 digits, so s-adic rationals come
    out in their period-(0) form.
    """
    _check_unit_interval(numerator, denominator)
    if count < 0:
        raise DomainError("count must be non-negative")
    s = alphabet.s
    out = []
    rem = numerator
    for _ in range(count):
        rem *= s
        d, rem = divmod(rem, denominator)
        out.append(d)
    return out


def _check_unit_interval(numerator: int, denominator: int) -> None:
    if denominator == 0:
        raise DomainError("denominator is zero")
    if denominator < 0:
        numerator, denominator = -numerator, -denominator
    if numerator < 0 or numerator >= denominator:
        raise DomainError(f"{numerator}/{denominator} is outside [0, 1)")


# -- sources ---------------------------------------------------------------


class DigitSource:
    """Immutable recipe for a digit stream.

    ``segments()`` returns a fresh iterator of uint8 arrays; block-structured
    sources yield exactly one array per block.
    """

    radix: int = 4
    block_structured: bool = False

    def segments(self) -> Iterator[np.ndarray]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__}

    def open(self) -> DigitStream:
        return DigitStream(self)


@dataclass(frozen=True)
class RationalSource(DigitSource):
    numerator: int
    denominator: int
    radix: int = 4

    def __post_init__(self):
        Alphabet(self.radix)
        _check_unit_interval(self.numerator, self.denominator)

    def segments(self):
        num, den = self.numerator, self.denominator
        if den < 0:
            num, den = -num, -den
        s = self.radix
        seen: dict[int, int] = {}
        digits: list[int] = []
        rem = num
        # remainders repeat after at most `den` steps; then tile the cycle
        while rem not in seen and len(digits) < CHUNK * 64:
            seen[rem] = len(digits)
            rem *= s
            d, rem = divmod(rem, den)
            digits.append(d)
        if rem in seen:
            start = seen[rem]
            head = np.array(digits[:start], dtype=np.uint8)
            cycle = np.array(digits[start:], dtype=np.uint8)
            yield from _eventually_periodic(head, cycle)
            return
        yield np.array(digits, dtype=np.uint8)
        while True:
            chunk = []
            for _ in range(CHUNK):
                rem *= s
                d, rem = divmod(rem, den)
                chunk.append(d)
            yield np.array(chunk, dtype=np.uint8)

    def describe(self):
        return {"kind": "rational", "value": f"{self.numerator}/{self.denominator}", "radix": self.radix}


@dataclass(frozen=True)
class PeriodicSource(DigitSource):
    """The digits ``head`` followed by ``pattern`` repeated forever."""

    pattern: tuple[int, ...]
    radix: int = 4
    head: tuple[int, ...] = ()

    def __post_init__(self):
        Alphabet(self.radix)
        if not self.pattern:
            raise DomainError("periodic pattern is empty")
        for d in (*self.head, *self.pattern):
            if not 0 <= d < self.radix:
                raise DomainError(f"digit {d} outside alphabet of size {self.radix}")

    def segments(self):
        yield from _eventually_periodic(
            np.array(self.head, dtype=np.uint8), np.array(self.pattern, dtype=np.uint8)
        )

    def describe(self):
        return {"kind": "periodic", "head": list(self.head), "pattern": list(self.pattern), "radix": self.radix}


def _eventually_periodic(head: np.ndarray, cycle: np.ndarray) -> Iterator[np.ndarray]:
    if len(head):
        yield head
    reps = max(1, CHUNK // len(cycle))
    tile = np.tile(cycle, reps)
    while True:
        yield tile


@dataclass(frozen=True)
class FiniteSource(DigitSource):
    """A finite digit string, e.g. read from a file."""

    data: bytes
    radix: int = 4
    label: str = ""

    def __post_init__(self):
        Alphabet(self.radix)
        if self.data and max(self.data) >= self.radix:
            raise DomainError("digit outside alphabet")

    @classmethod
    def from_digits(cls, digits, radix: int = 4, label: str = "") -> FiniteSource:
        return cls(bytes(np.asarray(digits, dtype=np.uint8)), radix, label)

    def __len__(self):
        return len(self.data)

    def segments(self):
        if self.data:
            yield np.frombuffer(self.data, dtype=np.uint8)

    def describe(self):
        return {"kind": "file", "label": self.label, "length": len(self.data), "radix": self.radix}


# -- streams ---------------------------------------------------------------


class DigitStream:
    """Single-consumer cursor over a ``DigitSource``.

    ``advance(k)`` returns the next ``k`` digits and the cumulative statistics
    from position 0. Re-opening the source gives an identical stream.
    """

    def __init__(self, source: DigitSource):
        self.source = source
        self.alphabet = Alphabet(source.radix)
        self.position = 0
        self.stats = PrefixStats.empty(source.radix)
        self._segments = source.segments()
        self._pending: deque[np.ndarray] = deque()
        self._pulled = 0
        self._boundaries: list[int] = []

    def reopen(self) -> DigitStream:
        return DigitStream(self.source)

    @property
    def block_boundaries(self) -> list[int]:
        """Cumulative block-end positions materialized so far (block sources only)."""
        return list(self._boundaries)

    def _pull(self) -> bool:
        seg = next(self._segments, None)
        if seg is None:
            return False
        self._pending.append(seg)
        self._pulled += len(seg)
        if self.source.block_structured:
            self._boundaries.append(self._pulled)
        return True

    def advance(self, k: int) -> tuple[np.ndarray, PrefixStats]:
        if k < 0:
            raise DomainError("cannot advance by a negative count")
        parts = []
        need = k
        while need:
            if not self._pending and not self._pull():
                raise DomainError(f"stream exhausted after {self.position + k - need} digits")
            seg = self._pending[0]
            if len(seg) <= need:
                parts.append(self._pending.popleft())
                need -= len(seg)
            else:
                parts.append(seg[:need])
                self._pending[0] = seg[need:]
                need = 0
        out = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
        self.position += k
        self.stats = self.stats.updated(out)
        return out, self.stats

    def boundaries_through(self, n: int) -> list[int]:
        """Block ends <= n, materializing blocks as needed."""
        if not self.source.block_structured:
            return []
        while self._pulled < n and self._pull():
            pass
        return [b for b in self._boundaries if b <= n]


@dataclass(frozen=True)
class Prefix:
    digits: np.ndarray = field(repr=False)
    boundaries: np.ndarray = field(repr=False)
    radix: int = 4

    def __len__(self):
        return len(self.digits)


def materialize(source: DigitSource, n: int) -> Prefix:
    """First ``n`` digits of ``source`` plus the block ends inside them."""
    if n < 0:
        raise DomainError("prefix length must be non-negative")
    parts = []
    ends = []
    total = 0
    gen = source.segments()
    while total < n:
        seg = next(gen, None)
        if seg is None:
            raise DomainError(f"stream exhausted after {total} digits")
        parts.append(seg)
        total += len(seg)
        if source.block_structured:
            ends.append(total)
    digits = np.concatenate(parts)[:n] if parts else np.zeros(0, dtype=np.uint8)
    bounds = np.array([e for e in ends if e <= n], dtype=np.int64)
    return Prefix(np.ascontiguousarray(digits, dtype=np.uint8), bounds, source.radix)


def stats_at(digits: np.ndarray, radix: int, positions) -> list[PrefixStats]:
    """PrefixStats of ``digits`` at each checkpoint position."""
    pos = np.ascontiguousarray(positions, dtype=np.int64)
    table = kernels.checkpoint_counts(np.ascontiguousarray(digits, dtype=np.uint8), radix, pos)
    return [PrefixStats.from_counts(row) for row in table.tolist()]


# -- files -----------------------------------------------------------------


def encode_ascii(digits) -> bytes:
    arr = np.asarray(digits, dtype=np.uint8)
    if arr.size and arr.max() > 9:
        raise DomainError("ASCII stream format holds digits 0-9 only")
    return (arr + np.uint8(48)).tobytes() + b"\n"


def decode_ascii(data: bytes, radix: int = 4) -> np.ndarray:
    Alphabet(radix)
    if radix > 10:
        raise DomainError("ASCII stream format holds radix <= 10 only")
    body = data[:-1] if data.endswith(b"\n") else data
    if not body:
        raise StreamFormatError("empty digit stream")
    digits, bad = kernels.parse_ascii(body, radix)
    if bad >= 0:
        raise StreamFormatError(f"bad digit character {body[bad:bad + 1]!r}", bad)
    return np.asarray(digits, dtype=np.uint8)


def encode_packed(digits, radix: int = 4, flags: int = 0) -> bytes:
    if radix != 4:
        raise DomainError("packed format is defined for radix 4 only")
    arr = np.ascontiguousarray(digits, dtype=np.uint8)
    if arr.size and arr.max() > 3:
        raise DomainError("digit outside alphabet")
    return PACKED_HEADER.pack(PACKED_MAGIC, radix, flags, len(arr)) + kernels.pack2(arr)


def decode_packed(data: bytes) -> np.ndarray:
    if len(data) < PACKED_HEADER.size:
        raise StreamFormatError("truncated packed header", len(data))
    magic, radix, _flags, count = PACKED_HEADER.unpack_from(data)
    if magic != PACKED_MAGIC:
        raise StreamFormatError("bad packed magic", 0)
    if radix != 4:
        raise StreamFormatError(f"unsupported packed radix {radix}", 4)
    payload = data[PACKED_HEADER.size:]
    if len(payload) * 4 < count:
        raise StreamFormatError("packed payload shorter than digit count", len(data))
    if count == 0:
        raise StreamFormatError("empty digit stream")
    return np.asarray(kernels.unpack2(payload, count), dtype=np.uint8)


def write_digits(path, digits, fmt: str = "ascii", radix: int = 4) -> None:
    data = encode_packed(digits, radix) if fmt == "packed" else encode_ascii(digits)
    Path(path).write_bytes(data)


def read_digits(path, radix: int = 4) -> np.ndarray:
    """Read a digit file, detecting the packed format by its magic bytes."""
    data = Path(path).read_bytes()
    if data.startswith(PACKED_MAGIC):
        return decode_packed(data)
    return decode_ascii(data, radix)


def file_source(path, radix: int = 4) -> FiniteSource:
    return FiniteSource.from_digits(read_digits(path, radix), radix, label=str(path))
