"""Finite-prefix convergence analysis of digit frequencies and the mean.

Membership in the level-set classes is a tail property, so every verdict here
is an empirical heuristic. Verdicts carry the ladder, delta and tail fraction
they were computed with.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from decimal import Context
from fractions import Fraction
from typing import Iterable, Sequence

from .constructors import run_boundaries
from .digitcore import DigitSource, PrefixStats, RationalLike, as_fraction, materialize, stats_at
from .errors import DomainError, InfeasibleError

DEFAULT_DELTA = Fraction(1, 20)
DEFAULT_TAIL = Fraction(1, 2)
DEFAULT_N0 = 100
DEFAULT_RATIO = Fraction(3, 2)

THETA1, THETA2, THETA3, INCONSISTENT = "Theta1", "Theta2", "Theta3", "inconsistent"


@dataclass(frozen=True)
class CheckpointLadder:
    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if not pos:
            raise DomainError("empty checkpoint ladder")
        if pos[0] < 1:
            raise DomainError("first checkpoint must be >= 1")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise DomainError("checkpoints must be strictly increasing")

    @classmethod
    def of(cls, positions: Iterable[int]) -> CheckpointLadder:
        return cls(tuple(sorted(set(int(p) for p in positions))))

    @classmethod
    def geometric(cls, upto: int, n0: int = DEFAULT_N0, ratio: RationalLike = DEFAULT_RATIO) -> CheckpointLadder:
        """round(n0 * ratio**t) for t = 0, 1, ... up to ``upto``, plus ``upto`` itself."""
        ratio = as_fraction(ratio)
        if ratio <= 1:
            raise DomainError("geometric ladder ratio must exceed 1")
        if upto < 1:
            raise DomainError("ladder horizon must be >= 1")
        out = []
        x = Fraction(n0)
        while x <= upto:
            out.append(round(x))
            x *= ratio
        out.append(upto)
        return cls.of(out)

    def __len__(self):
        return len(self.positions)

    @property
    def last(self) -> int:
        return self.positions[-1]

    def union(self, other: Iterable[int]) -> CheckpointLadder:
        return CheckpointLadder.of((*self.positions, *other))


def default_ladder(source: DigitSource, horizon: int) -> CheckpointLadder:
    """Geometric ladder, plus the regime-switch positions of constructed streams."""
    ladder = CheckpointLadder.geometric(horizon)
    return ladder.union(b for b in run_boundaries(source, horizon) if b >= 1)


# -- tracking ----------------------------------------------------------------


@dataclass(frozen=True)
class Row:
    n: int
    counts: tuple[int, ...]
    freqs: tuple[Fraction, ...]
    mean: Fraction

    @classmethod
    def from_stats(cls, stats: PrefixStats) -> Row:
        return cls(stats.n, stats.counts, stats.frequencies(), stats.mean())


def track_digits(digits, radix: int, ladder: CheckpointLadder) -> list[Row]:
    if ladder.last > len(digits):
        raise DomainError(f"ladder reaches {ladder.last} but only {len(digits)} digits are available")
    return [Row.from_stats(s) for s in stats_at(digits, radix, ladder.positions)]


def track(source: DigitSource, ladder: CheckpointLadder) -> list[Row]:
    """One row of exact counts, frequencies and mean per checkpoint."""
    prefix = materialize(source, ladder.last)
    return track_digits(prefix.digits, source.radix, ladder)


_DEC = Context(prec=12)


def decimal12(x: Fraction) -> str:
    d = _DEC.divide(_DEC.create_decimal(x.numerator), _DEC.create_decimal(x.denominator))
    return format(d, "g") if d != 0 else "0"


def rows_to_csv(rows: Sequence[Row]) -> str:
    radix = len(rows[0].counts) if rows else 4
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = (
        ["n"] + [f"N{i}" for i in range(radix)] + [f"v{i}" for i in range(radix)] + ["r"]
        + [f"v{i}_dec" for i in range(radix)] + ["r_dec"]
    )
    w.writerow(head)
    for row in rows:
        exact = [_frac(v) for v in (*row.freqs, row.mean)]
        approx = [decimal12(v) for v in (*row.freqs, row.mean)]
        w.writerow([row.n, *row.counts, *exact, *approx])
    return buf.getvalue()


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# -- verdicts ----------------------------------------------------------------


@dataclass(frozen=True)
class Converges:
    estimate: Fraction
    band: Fraction
    status = "converges"

    def to_json(self) -> dict:
        return {"status": self.status, "estimate": _frac(self.estimate), "band": _frac(self.band)}


@dataclass(frozen=True)
class Oscillates:
    lo: Fraction
    hi: Fraction
    status = "oscillates"

    def to_json(self) -> dict:
        return {"status": self.status, "lo": _frac(self.lo), "hi": _frac(self.hi)}


Status = Converges | Oscillates


def oscillation_verdict(
    series: Sequence[RationalLike],
    delta: RationalLike = DEFAULT_DELTA,
    tail_fraction: RationalLike = DEFAULT_TAIL,
) -> Status:
    """Finite Cauchy test over the trailing ``tail_fraction`` of the series."""
    if not series:
        raise DomainError("empty series")
    delta = as_fraction(delta)
    tail_fraction = as_fraction(tail_fraction)
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail_fraction must lie in (0, 1]")
    m = len(series)
    take = max(1, math.ceil(tail_fraction * m))
    tail = [as_fraction(v) for v in series[m - take:]]
    lo, hi = min(tail), max(tail)
    if hi - lo > delta:
        return Oscillates(lo, hi)
    return Converges((lo + hi) / 2, hi - lo)


def recover_frequencies(
    theta: RationalLike, known: Sequence[tuple[int, RationalLike]]
) -> dict[int, Fraction]:
    """Solve the two linear identities for the two unknown 4-adic frequencies.

    The identities are sum(v_i) = 1 and v_1 + 2 v_2 + 3 v_3 = theta. The
    closed forms for the (0, j) cases printed with the derivation carry sign
    slips (they miss the uniform point at theta = 3/2), so this solves the
    system directly.
    """
    theta = as_fraction(theta)
    if len(known) != 2:
        raise DomainError("exactly two known frequencies are required")
    (i, vi), (j, vj) = ((int(a), as_fraction(b)) for a, b in known)
    if i == j:
        raise DomainError(f"known digit indices must differ, got {i} twice")
    for d, v in ((i, vi), (j, vj)):
        if not 0 <= d <= 3:
            raise DomainError(f"digit {d} outside the 4-adic alphabet")
        if not 0 <= v <= 1:
            raise DomainError(f"frequency {v} of digit {d} outside [0, 1]")
    u, w = (d for d in range(4) if d not in (i, j))
    mass = 1 - vi - vj
    moment = theta - i * vi - j * vj
    # v_u + v_w = mass, u v_u + w v_w = moment
    vw = (moment - u * mass) / (w - u)
    vu = mass - vw
    out = {u: vu, w: vw}
    for d, v in out.items():
        if not 0 <= v <= 1:
            raise InfeasibleError(f"recovered frequency of digit {d} is {v}, outside [0, 1]")
    return out


@dataclass(frozen=True)
class ConvergenceVerdict:
    per_digit: tuple[Status, ...]
    mean: Status
    class_guess: str
    delta: Fraction
    tail_fraction: Fraction
    ladder: tuple[int, ...]
    horizon: int
    empirical: bool = True

    @property
    def oscillating(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.per_digit) if isinstance(s, Oscillates))

    def to_json(self) -> dict:
        return {
            "per_digit": [dict(digit=i, **s.to_json()) for i, s in enumerate(self.per_digit)],
            "mean": self.mean.to_json(),
            "class_guess": self.class_guess,
            "empirical": self.empirical,
            "parameters": {
                "delta": _frac(self.delta),
                "tail_fraction": _frac(self.tail_fraction),
                "ladder": list(self.ladder),
                "horizon": self.horizon,
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def class_pattern(per_digit: Sequence[Status], mean: Status) -> str:
    """Map a per-digit pattern to a class; the admissible patterns need a converging mean."""
    if isinstance(mean, Oscillates):
        return INCONSISTENT
    n_osc = sum(isinstance(s, Oscillates) for s in per_digit)
    return {0: THETA1, 3: THETA2, 4: THETA3}.get(n_osc, INCONSISTENT)


@dataclass(frozen=True)
class Lemma1Report:
    ok: bool
    oscillating: tuple[int, ...]
    message: str


def lemma1_check(verdict: ConvergenceVerdict) -> Lemma1Report:
    """Flag patterns the frequency identities forbid.

    One lone oscillating frequency is impossible (the other three sum to one
    minus it). With a converging mean, exactly two oscillating frequencies are
    impossible too: two converging frequencies and the mean pin the other two.
    """
    osc = verdict.oscillating
    mean_converges = isinstance(verdict.mean, Converges)
    if len(osc) == 1:
        return Lemma1Report(False, osc, f"only digit {osc[0]} oscillates; at least one more must")
    if mean_converges and len(osc) == 2:
        return Lemma1Report(
            False, osc, f"mean converges but exactly digits {osc} oscillate; two converging frequencies force all four"
        )
    return Lemma1Report(True, osc, "admissible pattern")


def verdict_from_rows(
    rows: Sequence[Row],
    delta: RationalLike = DEFAULT_DELTA,
    tail_fraction: RationalLike = DEFAULT_TAIL,
) -> ConvergenceVerdict:
    if not rows:
        raise DomainError("no checkpoints")
    delta, tail_fraction = as_fraction(delta), as_fraction(tail_fraction)
    radix = len(rows[0].counts)
    per_digit = tuple(
        oscillation_verdict([r.freqs[i] for r in rows], delta, tail_fraction) for i in range(radix)
    )
    mean = oscillation_verdict([r.mean for r in rows], delta, tail_fraction)
    return ConvergenceVerdict(
        per_digit, mean, class_pattern(per_digit, mean), delta, tail_fraction,
        tuple(r.n for r in rows), rows[-1].n,
    )


def classify(
    source: DigitSource,
    horizon: int | None = None,
    ladder: CheckpointLadder | None = None,
    delta: RationalLike = DEFAULT_DELTA,
    tail_fraction: RationalLike = DEFAULT_TAIL,
) -> ConvergenceVerdict:
    """Empirical class guess for the stream from its checkpoint statistics."""
    if ladder is None:
        if horizon is None:
            raise DomainError("give a horizon or a ladder")
        ladder = default_ladder(source, horizon)
    elif horizon is not None and ladder.last > horizon:
        raise DomainError("horizon does not cover the ladder")
    return verdict_from_rows(track(source, ladder), delta, tail_fraction)


def classify_digits(
    digits, radix: int = 4, ladder: CheckpointLadder | None = None,
    delta: RationalLike = DEFAULT_DELTA, tail_fraction: RationalLike = DEFAULT_TAIL,
) -> ConvergenceVerdict:
    ladder = ladder or CheckpointLadder.geometric(len(digits))
    return verdict_from_rows(track_digits(digits, radix, ladder), delta, tail_fraction)
