"""Explicit 4-adic constructions with a prescribed digit mean.

Everything here is exact: columns are rational, every floor ``[c*n]`` is computed
with integer arithmetic, and every generated block is validated as it is emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .digitcore import DigitSource, DigitStream, RationalLike, as_fraction
from .errors import HorizonExhausted, InfeasibleError, SpecError

RADIX = 4
DIGITS = np.arange(RADIX, dtype=np.uint8)
MAX_EMPTY_RUN = 10_000


def floor_mul(c: Fraction, n: int) -> int:
    """``[c*n]`` for a rational ``c`` and integer ``n``."""
    return (c.numerator * n) // c.denominator


def bracket_step(c: Fraction, k: int, i: int) -> int:
    """``[c*k*(i+1)] - [c*k*i]``."""
    return floor_mul(c, k * (i + 1)) - floor_mul(c, k * i)


def _theta_open(theta: Fraction) -> Fraction:
    theta = as_fraction(theta)
    if not 0 < theta < 3:
        raise SpecError(
            f"theta must lie strictly inside (0, 3), got {theta}; "
            "at theta = 0 or 3 every frequency is forced to exist"
        )
    return theta


@dataclass(frozen=True)
class StochasticVector:
    entries: tuple[Fraction, ...]

    def __post_init__(self):
        entries = tuple(as_fraction(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise SpecError("empty probability vector")
        if any(e < 0 for e in entries):
            raise SpecError(f"vector {self.render()} has a negative entry")
        if sum(entries) != 1:
            raise SpecError(f"vector {self.render()} sums to {sum(entries)}, not 1")

    @classmethod
    def of(cls, *values: RationalLike) -> StochasticVector:
        return cls(tuple(values))

    def __getitem__(self, i: int) -> Fraction:
        return self.entries[i]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def mean(self) -> Fraction:
        return sum(i * p for i, p in enumerate(self.entries))

    def render(self) -> str:
        return "(" + ", ".join(str(e) for e in self.entries) + ")"


# -- length schedules ------------------------------------------------------


@dataclass(frozen=True)
class LinearLengths:
    """s_k = scale * k."""

    scale: int = 1

    def __post_init__(self):
        if self.scale < 1:
            raise SpecError("length scale must be a positive integer")

    def __call__(self, k: int) -> int:
        return self.scale * k

    def describe(self) -> dict:
        return {"kind": "linear", "scale": self.scale}


@dataclass(frozen=True)
class ExplicitLengths:
    values: tuple[int, ...]

    def __post_init__(self):
        if any(int(v) != v or v < 1 for v in self.values):
            raise SpecError("explicit block lengths must be positive integers")

    def __call__(self, k: int) -> int:
        if k > len(self.values):
            raise SpecError(f"length schedule exhausted at block {k}")
        return self.values[k - 1]

    def describe(self) -> dict:
        return {"kind": "explicit", "values": list(self.values)}


@dataclass(frozen=True)
class ScheduleReport:
    horizon: int
    last_length: int
    k_over_total: Fraction
    next_over_total: Fraction
    ok: bool


def check_schedule(lengths: Callable[[int], int], horizon: int, tolerance: Fraction = Fraction(1, 10)) -> ScheduleReport:
    """Finite-horizon check that s_k grows and k/S_k, s_{k+1}/S_k are small."""
    values = [lengths(k) for k in range(1, horizon + 2)]
    if any(v < 1 for v in values):
        raise SpecError("block lengths must be positive")
    total = sum(values[:-1])
    k_ratio = Fraction(horizon, total)
    next_ratio = Fraction(values[-1], total)
    growing = values[horizon - 1] > max(values[: max(1, horizon // 2)])
    return ScheduleReport(
        horizon, values[horizon - 1], k_ratio, next_ratio,
        growing and k_ratio < tolerance and next_ratio < tolerance,
    )


# -- block form ------------------------------------------------------------


@dataclass(frozen=True)
class BlockPlan:
    """Columns tau_{.k} and lengths s_k for the block-form number.

    ``columns`` is a zero-argument factory returning a fresh iterator, so a plan
    can be replayed any number of times.
    """

    columns: Callable[[], Iterator[StochasticVector]]
    lengths: Callable[[int], int] = LinearLengths()
    label: str = "block"
    params: dict = field(default_factory=dict, compare=False, hash=False)
    switch_flags: Callable[[], Iterator[bool]] | None = None

    @classmethod
    def constant(cls, column: StochasticVector, lengths=LinearLengths(), **params) -> BlockPlan:
        return cls.cyclic([column], lengths, **params)

    @classmethod
    def cyclic(cls, columns: Sequence[StochasticVector], lengths=LinearLengths(), **params) -> BlockPlan:
        cols = tuple(c if isinstance(c, StochasticVector) else StochasticVector(tuple(c)) for c in columns)
        if not cols:
            raise SpecError("block plan needs at least one column")
        for c in cols:
            if len(c) != RADIX:
                raise SpecError(f"column {c.render()} must have {RADIX} entries")

        def factory():
            k = 0
            while True:
                yield cols[k % len(cols)]
                k += 1

        return cls(factory, lengths, "block", {"columns": [c.render() for c in cols], **params})


def block_counts(column: StochasticVector, length: int) -> tuple[int, ...]:
    return tuple(floor_mul(p, length) for p in column)


@dataclass(frozen=True)
class BlockSource(DigitSource):
    plan: BlockPlan
    radix: int = RADIX
    allow_empty: bool = False
    block_structured = True

    def segments(self):
        empty_run = 0
        for k, column in enumerate(self.plan.columns(), start=1):
            counts = block_counts(column, self.plan.lengths(k))
            if sum(counts) == 0:
                if not self.allow_empty:
                    raise SpecError(
                        f"degenerate block {k}: column {column.render()} emits no digits at s_k={self.plan.lengths(k)}"
                    )
                empty_run += 1
                if empty_run > MAX_EMPTY_RUN:
                    raise SpecError(f"degenerate plan: {empty_run} consecutive empty blocks ending at block {k}")
                continue
            empty_run = 0
            yield np.repeat(DIGITS, counts)

    def run_boundaries(self, n: int) -> list[int]:
        """Digit positions <= n at which the plan switched regime."""
        if self.plan.switch_flags is None:
            return []
        out = []
        pos = 0
        for k, (column, flag) in enumerate(zip(self.plan.columns(), self.plan.switch_flags()), start=1):
            pos += sum(block_counts(column, self.plan.lengths(k)))
            if pos > n:
                break
            if flag:
                out.append(pos)
        return out

    def describe(self):
        lengths = getattr(self.plan.lengths, "describe", lambda: {"kind": "custom"})()
        return {"kind": self.plan.label, "lengths": lengths, **_jsonable(self.plan.params)}


def block_number(plan: BlockPlan) -> DigitStream:
    """Stream of blocks ``0^[t0 s_k] 1^[t1 s_k] 2^[t2 s_k] 3^[t3 s_k]``."""
    return DigitStream(BlockSource(plan))


def _jsonable(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, Fraction):
            out[key] = str(value)
        elif isinstance(value, StochasticVector):
            out[key] = [str(v) for v in value]
        elif isinstance(value, (list, tuple)):
            out[key] = [str(v) if isinstance(v, Fraction) else v for v in value]
        else:
            out[key] = value
    return out


# -- greedy oscillation ----------------------------------------------------


@dataclass
class OscillatorRun:
    a: list[Fraction]
    b: list[Fraction]
    switches: list[int]
    a_sums: list[int]
    b_sums: list[int]
    totals: list[int]

    def ratio_a(self, n: int) -> Fraction:
        return Fraction(self.a_sums[n - 1], self.totals[n - 1])

    def ratio_b(self, n: int) -> Fraction:
        return Fraction(self.b_sums[n - 1], self.totals[n - 1])


def _check_pair(lo_hi: tuple[Fraction, Fraction], epsilon: Fraction, name: str) -> None:
    x1, x2 = lo_hi
    if x1 < 0 or x2 < 0:
        raise SpecError(f"{name} values must be non-negative")
    if x1 == x2:
        raise SpecError(f"{name}1 == {name}2 ({x1}); the two regimes must differ")
    if not epsilon < abs(x2 - x1) / 2:
        raise SpecError(f"epsilon {epsilon} too large: need epsilon < |{name}2 - {name}1|/2 = {abs(x2 - x1) / 2}")


def oscillate(
    lengths: Callable[[int], int],
    alphas: tuple[RationalLike, RationalLike],
    betas: tuple[RationalLike, RationalLike],
    epsilon: RationalLike,
    denominators: Callable[[int, Fraction, Fraction], int] | None = None,
) -> Iterator[tuple[Fraction, Fraction, int, int, int, bool]]:
    """Lazily choose a_i in alphas and b_i in betas block by block.

    Phases alternate between the larger values (odd phases) and the smaller
    ones (even phases). A phase ends at the first block where both running
    ratios sum[a_i s_i]/sum(d_i) and sum[b_i s_i]/sum(d_i) have come within
    ``epsilon`` of the active values from the far side; d_i is ``s_i`` unless
    ``denominators`` supplies the block length actually emitted.

    Yields ``(a_i, b_i, A_i, B_i, D_i, switched)`` with cumulative sums.
    """
    alphas = tuple(as_fraction(x) for x in alphas)
    betas = tuple(as_fraction(x) for x in betas)
    epsilon = as_fraction(epsilon)
    if epsilon <= 0:
        raise SpecError("epsilon must be positive")
    _check_pair(alphas, epsilon, "alpha")
    _check_pair(betas, epsilon, "beta")
    a_lo, a_hi = sorted(alphas)
    b_lo, b_hi = sorted(betas)
    a_sum = b_sum = total = 0
    phase = 1
    crossed_a = crossed_b = False
    i = 0
    while True:
        i += 1
        high = phase % 2 == 1
        a, b = (a_hi, b_hi) if high else (a_lo, b_lo)
        s = lengths(i)
        if s < 1:
            raise SpecError(f"block length s_{i} = {s} is not positive")
        a_sum += floor_mul(a, s)
        b_sum += floor_mul(b, s)
        total += s if denominators is None else denominators(i, a, b)
        if high:
            crossed_a = crossed_a or a_sum > (a_hi - epsilon) * total
            crossed_b = crossed_b or b_sum > (b_hi - epsilon) * total
        else:
            crossed_a = crossed_a or a_sum < (a_lo + epsilon) * total
            crossed_b = crossed_b or b_sum < (b_lo + epsilon) * total
        switched = crossed_a and crossed_b
        yield a, b, a_sum, b_sum, total, switched
        if switched:
            phase += 1
            crossed_a = crossed_b = False


def greedy_oscillator(
    lengths: Callable[[int], int],
    alpha1: RationalLike,
    alpha2: RationalLike,
    beta1: RationalLike,
    beta2: RationalLike,
    epsilon: RationalLike,
    horizon: int,
    phases: int | None = None,
    denominators: Callable[[int, Fraction, Fraction], int] | None = None,
) -> OscillatorRun:
    """Run :func:`oscillate` for ``horizon`` blocks.

    With ``phases`` set, fewer than that many completed phases raises
    :class:`HorizonExhausted` carrying the partial run.
    """
    if horizon < 1:
        raise SpecError("horizon must be at least one block")
    run = OscillatorRun([], [], [], [], [], [])
    gen = oscillate(lengths, (alpha1, alpha2), (beta1, beta2), epsilon, denominators)
    for i, (a, b, asum, bsum, tot, switched) in zip(range(1, horizon + 1), gen):
        run.a.append(a)
        run.b.append(b)
        run.a_sums.append(asum)
        run.b_sums.append(bsum)
        run.totals.append(tot)
        if switched:
            run.switches.append(i)
            if phases is not None and len(run.switches) >= phases:
                return run
    if phases is not None and len(run.switches) < phases:
        raise HorizonExhausted(len(run.switches) + 1, run)
    return run


# -- witnesses ---------------------------------------------------------------


def theta2_column(theta: Fraction, p0: Fraction, a: Fraction) -> tuple[Fraction, ...]:
    """Column with tau_0 = p0, tau_1 = a and mean ``theta``."""
    return (p0, a, 3 - 3 * p0 - theta - 2 * a, theta + a - 2 + 2 * p0)


def theta3_column(theta: Fraction, a: Fraction, b: Fraction) -> tuple[Fraction, ...]:
    """Column with tau_0 = a, tau_1 = b and mean ``theta``.

    tau_2 carries the coefficient -2 on tau_1 that the elimination gives; with -1
    the column would sum to 1 + b.
    """
    return (a, b, 3 - theta - 3 * a - 2 * b, theta - 2 + 2 * a + b)


def theta2_source(
    theta: RationalLike,
    p: StochasticVector | Sequence[RationalLike],
    q: StochasticVector | Sequence[RationalLike],
    lengths: Callable[[int], int] = LinearLengths(),
    epsilon: RationalLike | None = None,
) -> BlockSource:
    theta = _theta_open(theta)
    p = p if isinstance(p, StochasticVector) else StochasticVector(tuple(p))
    q = q if isinstance(q, StochasticVector) else StochasticVector(tuple(q))
    for name, v in (("p", p), ("q", q)):
        if len(v) != RADIX:
            raise SpecError(f"{name} must have {RADIX} entries")
        if v.mean != theta:
            raise SpecError(f"{name} = {v.render()} has mean {v.mean}, not theta = {theta}")
    if p[0] != q[0]:
        raise SpecError(f"p0 = {p[0]} and q0 = {q[0]} must be equal")
    if p[0] <= 0:
        raise SpecError("p0 must be positive")
    if p[1] == q[1]:
        raise SpecError(f"p1 == q1 == {p[1]}; the coordinate-1 regimes must differ")
    columns = {}
    for a in (p[1], q[1]):
        col = theta2_column(theta, p[0], a)
        if any(c < 0 for c in col):
            raise SpecError(f"incompatible vectors: derived column {tuple(map(str, col))} has a negative entry")
        columns[a] = StochasticVector(col)
    eps = as_fraction(epsilon) if epsilon is not None else abs(p[1] - q[1]) / 4

    def emitted(i, a, _b):
        return sum(block_counts(columns[a], lengths(i)))

    def steps():
        return oscillate(lengths, (p[1], q[1]), (p[1], q[1]), eps, emitted)

    def factory():
        for a, *_ in steps():
            yield columns[a]

    def flags():
        for *_, switched in steps():
            yield switched

    next(steps())  # fail fast on epsilon / regime problems
    plan = BlockPlan(factory, lengths, "theta2", {"theta": theta, "p": p, "q": q, "epsilon": eps}, flags)
    # with s_k = k the first few floors vanish; those blocks are simply empty
    return BlockSource(plan, allow_empty=True)


def theta2_witness(theta, p, q, lengths=LinearLengths(), epsilon=None) -> DigitStream:
    """Mean ``theta``, frequency of 0 equal to p0, frequency of 1 oscillating."""
    return DigitStream(theta2_source(theta, p, q, lengths, epsilon))


def theta3_source(
    theta: RationalLike,
    p0: RationalLike,
    q0: RationalLike,
    p1: RationalLike,
    q1: RationalLike,
    lengths: Callable[[int], int] = LinearLengths(),
    epsilon: RationalLike | None = None,
) -> BlockSource:
    theta = _theta_open(theta)
    p0, q0, p1, q1 = (as_fraction(v) for v in (p0, q0, p1, q1))
    if not p0 > q0 > 0:
        raise SpecError(f"need p0 > q0 > 0, got p0={p0}, q0={q0}")
    if not p1 > q1 > 0:
        raise SpecError(f"need p1 > q1 > 0, got p1={p1}, q1={q1}")
    columns = {}
    for a in (p0, q0):
        for b in (p1, q1):
            col = theta3_column(theta, a, b)
            if any(c <= 0 for c in col):
                raise SpecError(
                    f"regime (tau0={a}, tau1={b}) gives column {tuple(map(str, col))} "
                    "with a non-positive entry"
                )
            columns[a, b] = StochasticVector(col)
    eps = as_fraction(epsilon) if epsilon is not None else min(p0 - q0, p1 - q1) / 4

    def emitted(i, a, b):
        return sum(block_counts(columns[a, b], lengths(i)))

    def steps():
        return oscillate(lengths, (p0, q0), (p1, q1), eps, emitted)

    def factory():
        for a, b, *_ in steps():
            yield columns[a, b]

    def flags():
        for *_, switched in steps():
            yield switched

    next(steps())
    plan = BlockPlan(
        factory, lengths, "theta3",
        {"theta": theta, "p0": p0, "q0": q0, "p1": p1, "q1": q1, "epsilon": eps},
        flags,
    )
    return BlockSource(plan, allow_empty=True)


def theta3_witness(theta, p0, q0, p1, q1, lengths=LinearLengths(), epsilon=None) -> DigitStream:
    """Mean ``theta`` with the frequencies of 0 and 1 both oscillating."""
    return DigitStream(theta3_source(theta, p0, q0, p1, q1, lengths, epsilon))


# -- epsilon-indexed blocks ------------------------------------------------


@dataclass(frozen=True)
class LiteralBits:
    """Given bits, then zeros forever."""

    bits: str

    def __post_init__(self):
        if set(self.bits) - {"0", "1"}:
            raise SpecError("literal eps bits must be a 0/1 string")

    def __iter__(self):
        for ch in self.bits:
            yield int(ch)
        while True:
            yield 0

    def describe(self):
        return {"kind": "literal", "bits": self.bits}


@dataclass(frozen=True)
class PeriodicBits:
    pattern: str

    def __post_init__(self):
        if not self.pattern or set(self.pattern) - {"0", "1"}:
            raise SpecError("periodic eps pattern must be a non-empty 0/1 string")

    def __iter__(self):
        bits = [int(ch) for ch in self.pattern]
        while True:
            yield from bits

    def describe(self):
        return {"kind": "periodic", "pattern": self.pattern}


@dataclass(frozen=True)
class SeededBits:
    seed: int
    p: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        if not 0 <= self.p <= 1:
            raise SpecError("eps bit probability must lie in [0, 1]")

    def __iter__(self):
        rng = np.random.default_rng(self.seed)
        threshold = float(self.p)
        while True:
            yield from (rng.random(4096) < threshold).astype(int).tolist()

    def describe(self):
        return {"kind": "seeded", "seed": self.seed, "p": str(self.p)}


EpsilonBits = LiteralBits | PeriodicBits | SeededBits


@dataclass(frozen=True)
class EpsilonBlockSpec:
    """Blocks of exactly ``k`` digits: a free bit, then runs of 0, 1, 2, 3.

    ``mode="theta2"`` keeps the count of 0 on a shared value and drives the
    count of 3; ``mode="theta3"`` drives the counts of both 0 and 3. The active
    regime flips whenever every driven running frequency has come within
    ``delta`` of the active regime's value. Without ``vector_b`` the stream
    stays in regime a forever.
    """

    theta: Fraction
    vector_a: StochasticVector
    vector_b: StochasticVector | None = None
    eps_bits: EpsilonBits = LiteralBits("")
    mode: str = "theta2"
    k: int | None = None
    delta: Fraction | None = None
    k_min: int = 64
    k_max: int = 4096
    validation_horizon: int = 10_000
    single_regime: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theta", _theta_open(self.theta))
        if self.vector_b is None:
            object.__setattr__(self, "single_regime", True)
            object.__setattr__(self, "vector_b", self.vector_a)
        for name in ("vector_a", "vector_b"):
            v = getattr(self, name)
            if not isinstance(v, StochasticVector):
                object.__setattr__(self, name, StochasticVector(tuple(v)))
        if self.delta is not None:
            object.__setattr__(self, "delta", as_fraction(self.delta))
        a, b = self.vector_a, self.vector_b
        for name, v in (("vector_a", a), ("vector_b", b)):
            if len(v) != RADIX:
                raise SpecError(f"{name} must have {RADIX} entries")
            if v.mean != self.theta:
                raise SpecError(f"{name} = {v.render()} has mean {v.mean}, not theta = {self.theta}")
        if self.mode not in ("theta2", "theta3"):
            raise SpecError(f"unknown eps-block mode {self.mode!r}")
        if self.single_regime:
            pass
        elif self.mode == "theta2":
            if a[0] != b[0]:
                raise SpecError("theta2 mode needs vector_a[0] == vector_b[0]")
            if a[3] == b[3]:
                raise SpecError("theta2 mode needs vector_a[3] != vector_b[3]")
        elif self.mode == "theta3":
            same = [c for c in range(RADIX) if a[c] == b[c]]
            if same:
                raise SpecError(f"theta3 mode needs every coordinate to differ; equal at {same}")
        for c in self.driven:
            if self.single_regime:
                break
            if self.delta is not None and not 0 < self.delta < abs(a[c] - b[c]) / 2:
                raise SpecError(f"delta must lie in (0, |a{c} - b{c}|/2)")
        if self.k is not None and self.k < 2:
            raise SpecError("block length k must be at least 2")

    @property
    def driven(self) -> tuple[int, ...]:
        return (3,) if self.mode == "theta2" else (0, 3)

    def delta_for(self, c: int) -> Fraction:
        if self.delta is not None:
            return self.delta
        return abs(self.vector_a[c] - self.vector_b[c]) / 4

    def describe(self) -> dict:
        return {
            "kind": f"eps-block-{self.mode}",
            "theta": str(self.theta),
            "vector_a": [str(v) for v in self.vector_a],
            "vector_b": None if self.single_regime else [str(v) for v in self.vector_b],
            "eps_bits": self.eps_bits.describe(),
            "k": self.k,
            "delta": None if self.delta is None else str(self.delta),
        }


def solve_block(k: int, theta: Fraction, regime: StochasticVector, i: int, eps: int) -> tuple[int, int, int, int]:
    """Counts (x, y, z, t) of 0s, 1s, 2s, 3s following the bit in block ``i``.

    x and t are floor steps of the regime's 0 and 3 entries; (y, z) solve
    x+y+z+t = k-1 and eps + y+2z+3t = [theta k(i+1)] - [theta k i]. The bit's
    contribution is taken out of both the zero count and the digit sum, so
    boundary counts of 0 and the boundary digit sums do not depend on it.
    """
    x = bracket_step(regime[0], k, i) - (1 - eps)
    t = bracket_step(regime[3], k, i)
    weighted = bracket_step(theta, k, i) - eps - 3 * t
    rest = k - 1 - x - t
    z = weighted - rest
    y = rest - z
    return x, y, z, t


def block_period(spec: EpsilonBlockSpec, k: int) -> int:
    """Period in i of all floor steps used by :func:`solve_block`."""
    vals = {spec.theta, spec.vector_a[0], spec.vector_a[3], spec.vector_b[0], spec.vector_b[3]}
    return math.lcm(*((v * k).denominator for v in vals))


def first_infeasible(spec: EpsilonBlockSpec, k: int, horizon: int | None = None) -> tuple[int, str, int] | None:
    """First (block, regime, bit) with a negative count, or None.

    Block counts are periodic in the block index, so when the period fits in
    the horizon the check covers every block.
    """
    horizon = spec.validation_horizon if horizon is None else horizon
    span = min(block_period(spec, k), horizon)
    for i in range(1, span + 1):
        for name, regime in (("a", spec.vector_a), ("b", spec.vector_b)):
            for eps in (0, 1):
                if min(solve_block(k, spec.theta, regime, i, eps)) < 0:
                    return i, name, eps
    return None


def resolve_k(spec: EpsilonBlockSpec) -> EpsilonBlockSpec:
    """Return ``spec`` with ``k`` fixed, searching upward from ``k_min`` if unset."""
    if spec.k is not None:
        bad = first_infeasible(spec, spec.k)
        if bad:
            i, name, eps = bad
            raise InfeasibleError(f"k={spec.k}: negative count in block {i} of regime {name} (eps={eps})")
        return spec
    last = None
    for k in range(max(2, spec.k_min), spec.k_max + 1):
        last = first_infeasible(spec, k)
        if last is None:
            return replace(spec, k=k)
    i, name, eps = last
    raise InfeasibleError(
        f"k too small: no k in [{spec.k_min}, {spec.k_max}] works; "
        f"at k={spec.k_max} block {i} of regime {name} (eps={eps}) is infeasible"
    )


def epsilon_blocks(spec: EpsilonBlockSpec) -> Iterator[tuple[int, str, int, tuple[int, int, int, int], bool]]:
    """Per block: (index, regime name, bit, counts, switched after this block)."""
    if spec.k is None:
        raise SpecError("resolve k before generating blocks")
    k = spec.k
    regimes = {"a": spec.vector_a, "b": spec.vector_b}
    other = {"a": "b", "b": "a"}
    active = "a"
    crossed = {c: False for c in spec.driven}
    totals = {0: 0, 3: 0}
    bits = iter(spec.eps_bits)
    j = 0
    while True:
        j += 1
        eps = next(bits)
        counts = solve_block(k, spec.theta, regimes[active], j, eps)
        if min(counts) < 0:
            raise InfeasibleError(f"negative count {counts} in block {j} of regime {active}")
        totals[0] += counts[0] + (1 - eps)
        totals[3] += counts[3]
        n = k * j
        cur, alt = regimes[active], regimes[other[active]]
        for c in spec.driven:
            d = spec.delta_for(c)
            if cur[c] > alt[c]:
                crossed[c] = crossed[c] or totals[c] > (cur[c] - d) * n
            else:
                crossed[c] = crossed[c] or totals[c] < (cur[c] + d) * n
        switched = not spec.single_regime and all(crossed.values())
        yield j, active, eps, counts, switched
        if switched:
            active = other[active]
            crossed = {c: False for c in spec.driven}


@dataclass(frozen=True)
class EpsilonBlockSource(DigitSource):
    spec: EpsilonBlockSpec
    radix: int = RADIX
    block_structured = True

    def __post_init__(self):
        object.__setattr__(self, "spec", resolve_k(self.spec))

    def segments(self):
        for _j, _name, eps, counts, _sw in epsilon_blocks(self.spec):
            yield np.concatenate(([eps], np.repeat(DIGITS, counts))).astype(np.uint8)

    def switches(self, blocks: int) -> list[int]:
        out = []
        for j, _name, _eps, _counts, sw in epsilon_blocks(self.spec):
            if j > blocks:
                break
            if sw:
                out.append(j)
        return out

    def run_boundaries(self, n: int) -> list[int]:
        return [self.spec.k * j for j in self.switches(n // self.spec.k)]

    def describe(self):
        return self.spec.describe()


def epsilon_block_number(spec: EpsilonBlockSpec) -> DigitStream:
    return DigitStream(EpsilonBlockSource(spec))


# -- block permutations ----------------------------------------------------


@dataclass(frozen=True)
class IdentityRearrangement:
    def __call__(self, j: int, body: np.ndarray) -> np.ndarray:
        return body

    def describe(self):
        return {"kind": "identity"}


@dataclass(frozen=True)
class ReverseRearrangement:
    blocks: frozenset[int] | None = None

    def __call__(self, j, body):
        if self.blocks is None or j in self.blocks:
            return body[::-1]
        return body

    def describe(self):
        return {"kind": "reverse", "blocks": None if self.blocks is None else sorted(self.blocks)}


@dataclass(frozen=True)
class ShuffleRearrangement:
    """Uniform shuffle of each selected block, seeded per (seed, block)."""

    seed: int
    fraction: Fraction = Fraction(1)

    def __call__(self, j, body):
        rng = np.random.default_rng([self.seed, j])
        if rng.random() < float(self.fraction):
            return rng.permutation(body)
        return body

    def describe(self):
        return {"kind": "shuffle", "seed": self.seed, "fraction": str(self.fraction)}


@dataclass(frozen=True)
class ExplicitRearrangement:
    """New non-leading digits for the listed blocks."""

    mapping: tuple[tuple[int, tuple[int, ...]], ...]

    @classmethod
    def of(cls, mapping: dict[int, Sequence[int]]) -> ExplicitRearrangement:
        return cls(tuple(sorted((j, tuple(v)) for j, v in mapping.items())))

    def __call__(self, j, body):
        for block, digits in self.mapping:
            if block == j:
                return np.array(digits, dtype=np.uint8)
        return body

    def describe(self):
        return {"kind": "explicit", "blocks": {str(j): list(d) for j, d in self.mapping}}


@dataclass(frozen=True)
class PermutedSource(DigitSource):
    base: DigitSource
    rearrangement: Callable[[int, np.ndarray], np.ndarray]
    keep_leading: bool = True
    radix: int = RADIX
    block_structured = True

    def __post_init__(self):
        if not self.base.block_structured:
            raise SpecError("block permutation needs a block-structured stream")

    def segments(self):
        lead = 1 if self.keep_leading else 0
        for j, block in enumerate(self.base.segments(), start=1):
            body = block[lead:]
            new = np.asarray(self.rearrangement(j, body.copy()), dtype=np.uint8)
            if len(new) != len(body) or not np.array_equal(
                np.bincount(new, minlength=RADIX), np.bincount(body, minlength=RADIX)
            ):
                raise SpecError(f"rearrangement of block {j} changes its digit multiset")
            yield np.concatenate((block[:lead], new))

    def run_boundaries(self, n: int) -> list[int]:
        return run_boundaries(self.base, n)

    def describe(self):
        return {"kind": "permuted", "base": self.base.describe(), "rearrangement": self.rearrangement.describe()}


def permute_blocks(stream: DigitStream | DigitSource, rearrangement) -> DigitStream:
    """Rearrange digits inside blocks; the leading bit of eps-blocks stays put."""
    source = stream.source if isinstance(stream, DigitStream) else stream
    keep = isinstance(source, EpsilonBlockSource) or (
        isinstance(source, PermutedSource) and source.keep_leading
    )
    return DigitStream(PermutedSource(source, rearrangement, keep))


def run_boundaries(source: DigitSource, n: int) -> list[int]:
    """Regime-switch positions <= n for constructed sources, else []."""
    fn = getattr(source, "run_boundaries", None)
    return fn(n) if fn else []
