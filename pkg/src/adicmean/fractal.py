"""Dimension formulas, exact cylinder-cover volumes and empirical box counting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .constructors import (
    BlockPlan,
    BlockSource,
    EpsilonBlockSource,
    EpsilonBlockSpec,
    LinearLengths,
    PermutedSource,
    SeededBits,
    ShuffleRearrangement,
    StochasticVector,
)
from .digitcore import RationalLike, as_fraction, decode_ascii, materialize
from .errors import DomainError, SpecError, StreamFormatError

RADIX = 4
SATURATION = Fraction(1, 10)


def besicovitch_eggleston_dimension(tau: Sequence[RationalLike] | StochasticVector, s: int = RADIX) -> float:
    """-(sum tau_i ln tau_i) / ln s, with 0 ln 0 = 0."""
    try:
        vec = tau if isinstance(tau, StochasticVector) else StochasticVector(tuple(tau))
    except SpecError as exc:
        raise DomainError(str(exc)) from None
    if len(vec) != s:
        raise DomainError(f"tau has {len(vec)} entries, radix is {s}")
    h = -sum(float(t) * math.log(t) for t in vec if t)
    return h / math.log(s)


@dataclass(frozen=True)
class CylinderCoverSpec:
    """Covers of the eps-indexed set: one free bit per block of ``k`` base-4 digits."""

    k: int
    radix: int = RADIX
    branch_count_per_block: int = 2

    def __post_init__(self):
        if self.k < 2:
            raise DomainError("block length k must be at least 2")
        if self.radix != RADIX or self.branch_count_per_block != 2:
            raise DomainError("only the base-4, two-branch cover is supported")

    def split(self, m: int) -> tuple[int, int]:
        """Write m = k t - j with j in 0..k-1."""
        if m < 1:
            raise DomainError("rank must be >= 1")
        t = -(-m // self.k)
        return t, self.k * t - m


def cover_alpha_volume(spec: CylinderCoverSpec, m: int, alpha: RationalLike) -> Fraction:
    """log2 of the alpha-volume of the rank-m cylinder cover, exactly.

    The volume is 2^(t-1) (4^-(kt-j))^alpha for m = kt - j, j >= 1, and
    2^t (4^-kt)^alpha for m = kt. Working in log2 keeps large t exact.
    """
    alpha = as_fraction(alpha)
    t, j = spec.split(m)
    if j == 0:
        return t - 2 * alpha * spec.k * t
    return (t - 1) - 2 * alpha * (spec.k * t - j)


def volume_slope(spec: CylinderCoverSpec, alpha: RationalLike) -> Fraction:
    """Growth of log2 R at ranks kt per unit step in t; equals 1 - 2 k alpha."""
    alpha = as_fraction(alpha)
    k = spec.k
    return cover_alpha_volume(spec, 2 * k, alpha) - cover_alpha_volume(spec, k, alpha)


def crossover_dimension(spec: CylinderCoverSpec) -> Fraction:
    """1/(2k), confirmed by the volume dichotomy on either side of it."""
    a0 = Fraction(1, 2 * spec.k)
    if volume_slope(spec, a0) != 0:
        raise AssertionError("volumes are not flat at the crossover")
    above, below = a0 * Fraction(3, 2), a0 / 2
    if not (volume_slope(spec, above) < 0 < volume_slope(spec, below)):
        raise AssertionError("volume dichotomy fails around the crossover")
    return a0


@dataclass(frozen=True)
class ImprovabilityRow:
    p: int
    r: int
    l: int
    covering_log2: Fraction
    cylinder_log2: Fraction

    @property
    def ok(self) -> bool:
        return self.covering_log2 <= self.cylinder_log2


def improvability_check(
    spec: CylinderCoverSpec, alpha: RationalLike, grid: Iterable[tuple[int, int, int]]
) -> list[ImprovabilityRow]:
    """Compare refined covers of a single cylinder against the cylinder itself.

    A cylinder of rank kp - r has log2 volume -2 alpha (kp - r). Refining the
    part of the set inside it to rank k(p + l) - 1 gives log2 volume
    (l - 1) - 2 alpha (k(p + l) - 1). At alpha = 1/(2k) the refinement never
    wins, so the equal-rank cover cannot be improved.
    """
    alpha = as_fraction(alpha)
    k = spec.k
    rows = []
    for p, r, l in grid:
        if p < 1 or l < 1 or not 0 <= r < k or k * p - r < 1:
            raise DomainError(f"bad grid point (p={p}, r={r}, l={l})")
        cover = (l - 1) - 2 * alpha * (k * (p + l) - 1)
        cyl = -2 * alpha * (k * p - r)
        rows.append(ImprovabilityRow(p, r, l, cover, cyl))
    return rows


# -- box counting ------------------------------------------------------------


def _frac_or_float(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


@dataclass(frozen=True)
class DimensionEstimate:
    value: Fraction | float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "value": _frac_or_float(self.value),
            "diagnostics": self.diagnostics,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def prefix_counts(points: np.ndarray, max_rank: int, radix: int = RADIX) -> list[int]:
    """M(n): distinct length-n prefixes for n = 1..max_rank."""
    if max_rank * math.log2(radix) > 62:
        raise DomainError(f"max_rank {max_rank} too deep for 64-bit prefix codes")
    codes = kernels.prefix_codes(np.ascontiguousarray(points, dtype=np.uint8), max_rank, radix)
    return [int(np.unique(codes[:, r]).size) for r in range(max_rank)]


def box_counting_estimate(
    points, max_rank: int, radix: int = RADIX, saturation: RationalLike = SATURATION
) -> DimensionEstimate:
    """Slope of log M(n) against n log(radix), fitted on the upper half of usable ranks.

    Ranks whose count exceeds ``saturation`` times the sample size are
    dropped: there the count is limited by the sample, not by the set.
    """
    pts = np.asarray(points, dtype=np.uint8)
    if pts.ndim != 2:
        raise DomainError("points must be a 2-d array of digit prefixes")
    if pts.shape[0] < 2:
        raise DomainError("need at least two points")
    if max_rank < 1 or pts.shape[1] < max_rank:
        raise DomainError(f"prefixes of length {pts.shape[1]} do not reach rank {max_rank}")
    if pts.size and int(pts.max()) >= radix:
        raise DomainError(f"digit outside 0..{radix - 1}")
    counts = prefix_counts(pts, max_rank, radix)
    limit = as_fraction(saturation) * pts.shape[0]
    usable = [n for n in range(1, max_rank + 1) if counts[n - 1] <= limit]
    top = max(usable, default=0)
    window = [n for n in usable if n >= math.ceil(top / 2)]
    if len(window) < 2:
        raise DomainError(f"only {len(window)} usable rank(s) in the fit window; add points or ranks")
    x = np.array([n * math.log(radix) for n in window])
    y = np.array([math.log(counts[n - 1]) for n in window])
    slope, icept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icept)) ** 2)))
    return DimensionEstimate(
        float(slope),
        "box-count",
        {
            "ranks": list(range(1, max_rank + 1)),
            "counts": counts,
            "fit_ranks": window,
            "residual": resid,
            "sample_size": int(pts.shape[0]),
            "depth": int(pts.shape[1]),
            "saturation": _frac_or_float(as_fraction(saturation)),
        },
    )


def read_points(path, radix: int = RADIX) -> np.ndarray:
    """One ASCII digit string per line; rows are cut to the shortest line."""
    with open(path, "rb") as fh:
        data = fh.read()
    rows, offset = [], 0
    for line in data.split(b"\n"):
        body = line.rstrip(b"\r")
        if body:
            try:
                rows.append(decode_ascii(body, radix))
            except StreamFormatError as exc:
                bad = offset + exc.offset
                raise StreamFormatError(f"bad digit character {data[bad:bad + 1]!r}", bad) from None
        offset += len(line) + 1
    if not rows:
        raise DomainError(f"{path}: no points")
    depth = min(len(r) for r in rows)
    return np.stack([r[:depth] for r in rows])


# -- samplers ----------------------------------------------------------------


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2**63 - 1, count)]


def sample_uniform(count: int, depth: int, seed: int = 0) -> np.ndarray:
    """Independent uniform digits: prefixes of Lebesgue-typical points."""
    return np.random.default_rng(seed).integers(0, RADIX, (count, depth), dtype=np.uint8)


def sample_block_shuffles(
    tau: Sequence[RationalLike], count: int, depth: int, seed: int = 0, scale: int = 64
) -> np.ndarray:
    """Prefixes of constant-column block numbers with every block shuffled independently."""
    plan = BlockPlan.constant(StochasticVector(tuple(tau)), LinearLengths(scale))
    base = BlockSource(plan)
    out = np.empty((count, depth), dtype=np.uint8)
    for i, s in enumerate(_child_seeds(seed, count)):
        src = PermutedSource(base, ShuffleRearrangement(s), keep_leading=False)
        out[i] = materialize(src, depth).digits
    return out


# A k = 4 two-regime family whose blocks exist for every bit pattern.
C1_THETA = Fraction(5, 4)
C1_A = (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(0))
C1_B = (Fraction(1, 4), Fraction(3, 8), Fraction(1, 4), Fraction(1, 8))


def sample_c1(
    count: int, depth: int, seed: int = 0, k: int = 4,
    theta: RationalLike = C1_THETA, vector_a=C1_A, vector_b=C1_B,
) -> np.ndarray:
    """Prefixes of eps-block numbers with independent fair bits."""
    out = np.empty((count, depth), dtype=np.uint8)
    for i, s in enumerate(_child_seeds(seed, count)):
        spec = EpsilonBlockSpec(as_fraction(theta), vector_a, vector_b, SeededBits(s), k=k)
        out[i] = materialize(EpsilonBlockSource(spec), depth).digits
    return out
