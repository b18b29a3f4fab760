"""Built-in verification suites run by ``adicmean verify``.

Each check is a finite-horizon surrogate for an asymptotic property and reports
the tolerance it used. Checks scale their horizons down with ``horizon`` and
widen tolerances by the floor-loss estimate when they do.
"""

from __future__ import annotations

import hashlib
import random
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .classify import (
    THETA1,
    THETA2,
    THETA3,
    CheckpointLadder,
    Oscillates,
    classify,
    default_ladder,
    oscillation_verdict,
    recover_frequencies,
)
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
    theta2_source,
    theta3_column,
    theta3_source,
)
from .digitcore import DigitSource, PrefixStats, materialize, stats_at
from .errors import InfeasibleError
from .fractal import (
    CylinderCoverSpec,
    besicovitch_eggleston_dimension,
    box_counting_estimate,
    cover_alpha_volume,
    crossover_dimension,
    sample_block_shuffles,
    sample_c1,
    sample_uniform,
)

FULL_HORIZON = 10**6
F = Fraction

# Acceptance instances.
THETA2_ARGS = (F(8, 5), (F(1, 5), F(3, 10), F(1, 5), F(3, 10)), (F(1, 5), F(1, 10), F(3, 5), F(1, 10)))
THETA2_EPS = F(1, 20)
THETA3_ARGS = (F(2), F(19, 100), F(1, 100), F(19, 100), F(1, 100))
THETA3_EPS = F(1, 40)


def theta2_instance() -> BlockSource:
    return theta2_source(*THETA2_ARGS, epsilon=THETA2_EPS)


def theta3_instance() -> BlockSource:
    return theta3_source(*THETA3_ARGS, epsilon=THETA3_EPS)


def eps_block_instance(seed: int = 0) -> EpsilonBlockSource:
    theta, p, q = THETA2_ARGS
    return EpsilonBlockSource(EpsilonBlockSpec(theta, p, q, SeededBits(seed)))


@dataclass(frozen=True)
class VerifyConfig:
    horizon: int = FULL_HORIZON
    seed: int = 0
    inject_fault: bool = False


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    tolerance: str = "exact"
    notes: list[str] = field(default_factory=list)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.detail} (tolerance {self.tolerance})"


# -- helpers -----------------------------------------------------------------


def _rand_frac(rng: random.Random, max_den: int = 20) -> Fraction:
    den = rng.randint(1, max_den)
    return F(rng.randint(0, den), den)


def random_column_family(rng: random.Random, size: int) -> tuple[Fraction, list[StochasticVector]]:
    """Columns sharing one mean, built from random (tau0, tau1) pairs."""
    while True:
        theta = F(rng.randint(1, 59), 20)
        cols = []
        for _ in range(200):
            col = theta3_column(theta, _rand_frac(rng), _rand_frac(rng))
            if all(c >= 0 for c in col):
                cols.append(StochasticVector(col))
                if len(cols) == size:
                    return theta, cols


def random_streams(seed: int, count: int) -> list[DigitSource]:
    """A mix of random block plans and seeded eps-block streams."""
    rng = random.Random(seed)
    out: list[DigitSource] = []
    for i in range(count):
        if i % 4 == 3:
            out.append(eps_block_instance(rng.randrange(2**32)))
            continue
        _theta, cols = random_column_family(rng, rng.randint(1, 3))
        plan = BlockPlan.cyclic(cols, LinearLengths(rng.randint(1, 3)))
        out.append(BlockSource(plan, allow_empty=True))
    return out


def low_mean_streams() -> list[DigitSource]:
    a = StochasticVector((1 - F(1, 6000), F(0), F(0), F(1, 6000)))
    b = StochasticVector((1 - F(1, 2000), F(1, 2000), F(0), F(0)))
    c = StochasticVector((1 - F(1, 4000), F(0), F(1, 4000), F(0)))
    return [
        BlockSource(BlockPlan.cyclic([a, b], LinearLengths(1000))),
        BlockSource(BlockPlan.cyclic([b, c, a], LinearLengths(1000))),
        BlockSource(BlockPlan.constant(StochasticVector((1, 0, 0, 0)))),
    ]


def checkpoints(source: DigitSource, n: int, block_ends) -> list[int]:
    ladder = default_ladder(source, n).union(int(b) for b in block_ends if 0 < b <= n)
    return list(ladder.positions)


def floor_loss_bound(n: int) -> Fraction:
    """Floor-loss estimate for the mean of an s_k = k block number at n digits."""
    k, total = 0, 0
    while total + k + 1 <= n:
        k += 1
        total += k
    return F(6 * k + 3 * (k + 1), max(1, total - 3 * k))


def scaled_tolerance(base: Fraction, n: int) -> Fraction:
    """``base`` at the full horizon, widened by the floor-loss estimate below it."""
    if n >= FULL_HORIZON:
        return base
    return max(base, base * floor_loss_bound(n) / floor_loss_bound(FULL_HORIZON))


def tail_amplitude(series) -> Fraction:
    v = oscillation_verdict(series, delta=0)
    return v.hi - v.lo if isinstance(v, Oscillates) else F(0)


# -- checks ------------------------------------------------------------------


def check_identities(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    bad = []
    for idx, src in enumerate(random_streams(cfg.seed, 20)):
        pre = materialize(src, n)
        for s in stats_at(pre.digits, 4, checkpoints(src, n, pre.boundaries)):
            freqs = s.frequencies()
            if sum(freqs) != 1 or s.mean() != freqs[1] + 2 * freqs[2] + 3 * freqs[3]:
                bad.append((idx, s.n))
    return CheckResult(
        "frequencies sum to one and weight to the mean",
        not bad,
        f"20 streams x {n} digits" + (f"; first failure {bad[0]}" if bad else ""),
    )


def _cramer(theta: Fraction, known) -> dict[int, Fraction]:
    (i, vi), (j, vj) = known
    u, w = (d for d in range(4) if d not in (i, j))
    # [1 1; u w] [vu; vw] = [1 - vi - vj; theta - i vi - j vj]
    b1, b2 = 1 - vi - vj, theta - i * vi - j * vj
    det = w - u
    return {u: (b1 * w - b2) / det, w: (b2 - u * b1) / det}


def check_recovery(cfg: VerifyConfig) -> CheckResult:
    rng = random.Random(cfg.seed + 1)
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    checked = 0
    mismatches = []
    while checked < 1000:
        i, j = pairs[checked % 6]
        full = [_rand_frac(rng, 30) for _ in range(4)]
        total = sum(full)
        if total == 0:
            continue
        nu = [x / total for x in full]
        theta = nu[1] + 2 * nu[2] + 3 * nu[3]
        known = ((i, nu[i]), (j, nu[j]))
        got = recover_frequencies(theta, known)
        if got != _cramer(theta, known) or any(got[d] != nu[d] for d in got):
            mismatches.append((i, j, theta))
        checked += 1
    quarter = F(1, 4)
    fixed = all(
        recover_frequencies(F(3, 2), ((i, quarter), (j, quarter))) == {d: quarter for d in range(4) if d not in (i, j)}
        for i, j in pairs
    )
    return CheckResult(
        "two unknown frequencies recovered from two known ones and the mean",
        not mismatches and fixed,
        f"1000 instances over 6 index pairs, uniform point fixed={fixed}"
        + (f"; first mismatch {mismatches[0]}" if mismatches else ""),
    )


def check_mean_pinning(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    tol = scaled_tolerance(F(1, 100), n)
    rng = random.Random(cfg.seed + 2)
    worst = F(0)
    for _ in range(20):
        theta, cols = random_column_family(rng, rng.randint(1, 4))
        src = BlockSource(BlockPlan.cyclic(cols), allow_empty=True)
        s = stats_at(materialize(src, n).digits, 4, [n])[0]
        worst = max(worst, abs(s.mean() - theta))
    widened = " (widened for reduced horizon)" if tol > F(1, 100) else ""
    return CheckResult(
        "block numbers with mean-theta columns have digit mean near theta",
        worst < tol,
        f"20 families at n={n}, worst |r_n - theta| = {float(worst):.3e}",
        f"{float(tol):.4g}{widened}",
    )


def check_theta2_witness(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    src = theta2_instance()
    ladder = default_ladder(src, n)
    pre = materialize(src, n)
    rows = stats_at(pre.digits, 4, ladder.positions)
    v0 = rows[-1].frequencies()[0]
    amp = tail_amplitude([r.frequencies()[1] for r in rows])
    guess = classify(src, ladder=ladder).class_guess
    tol = scaled_tolerance(F(1, 100), n)
    ok = abs(v0 - F(1, 5)) < tol and amp >= F(1, 10) and guess == THETA2
    return CheckResult(
        "shared-zero witness keeps the frequency of 0 and swings the frequency of 1",
        ok,
        f"|v0 - 1/5| = {float(abs(v0 - F(1, 5))):.3e}, v1 tail amplitude {float(amp):.4f} (need >= 0.1), class {guess}",
        f"{float(tol):.4g}",
    )


def check_theta3_witness(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    src = theta3_instance()
    ladder = default_ladder(src, n)
    rows = stats_at(materialize(src, n).digits, 4, ladder.positions)
    err = abs(rows[-1].mean() - THETA3_ARGS[0])
    amps = [tail_amplitude([r.frequencies()[c] for r in rows]) for c in (0, 1)]
    guess = classify(src, ladder=ladder).class_guess
    tol = scaled_tolerance(F(1, 100), n)
    ok = err < tol and min(amps) >= F(1, 10) and guess == THETA3
    return CheckResult(
        "two-coordinate witness pins the mean and swings the frequencies of 0 and 1",
        ok,
        f"|r_n - 2| = {float(err):.3e}, tail amplitudes {[round(float(a), 4) for a in amps]} (need >= 0.1), class {guess}",
        f"{float(tol):.4g}",
    )


def _squeeze_ok(s: PrefixStats) -> bool:
    d, n, c = s.digit_sum, s.n, s.counts
    return all(c[i] <= d for i in (1, 2, 3)) and all(c[i] <= 3 * n - d for i in (0, 1, 2))


def check_squeeze(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    streams = random_streams(cfg.seed + 3, 8) + [theta2_instance(), theta3_instance()]
    lows = low_mean_streams()
    violations, small, wrong = [], 0, []
    for idx, src in enumerate(streams + lows):
        pre = materialize(src, n)
        pos = checkpoints(src, n, pre.boundaries)
        rows = stats_at(pre.digits, 4, pos)
        violations += [(idx, s.n) for s in rows if not _squeeze_ok(s)]
        if rows[-1].mean() < F(1, 1000):
            small += 1
            guess = classify(src, ladder=CheckpointLadder.of(pos)).class_guess
            if guess != THETA1:
                wrong.append((idx, guess))
    ok = not violations and not wrong and small >= len(lows)
    return CheckResult(
        "each frequency is squeezed by the mean and by 3 minus the mean",
        ok,
        f"{len(streams) + len(lows)} streams; {small} with r_n < 1e-3, all Theta1={not wrong}"
        + (f"; violation at {violations[0]}" if violations else ""),
    )


def check_permutation(cfg: VerifyConfig) -> CheckResult:
    n = min(cfg.horizon, 10**5)
    base = eps_block_instance(cfg.seed)
    pre = materialize(base, n)
    ref = stats_at(pre.digits, 4, pre.boundaries)
    failures = []
    for v in range(100):
        var = materialize(PermutedSource(base, ShuffleRearrangement(cfg.seed * 1000 + v)), n)
        digits = var.digits
        if cfg.inject_fault and v == 0:
            digits = digits.copy()
            pos = int(pre.boundaries[len(pre.boundaries) // 2]) - 2
            digits[pos] = (digits[pos] + 1) % 4
        got = stats_at(digits, 4, pre.boundaries)
        if got != ref:
            first = next(i for i, (a, b) in enumerate(zip(got, ref)) if a != b)
            failures.append((v, int(pre.boundaries[first])))
    return CheckResult(
        "rearranging digits inside blocks leaves block-boundary statistics unchanged",
        not failures,
        f"100 variants x {n} digits, {len(pre.boundaries)} boundaries"
        + (f"; variant {failures[0][0]} differs at n={failures[0][1]}" if failures else ""),
    )


def check_crossover(cfg: VerifyConfig) -> CheckResult:
    rng = random.Random(cfg.seed + 4)
    problems = []
    for k in (2, 4, 8, 16):
        spec = CylinderCoverSpec(k)
        a0 = F(1, 2 * k)
        if any(cover_alpha_volume(spec, k * t, a0) != 0 for t in range(1, 51)):
            problems.append(f"k={k}: nonzero volume at crossover")
        for side in (1, -1):
            for _ in range(20):
                alpha = a0 + side * F(rng.randint(1, 999), 1000) * (1 - a0 if side > 0 else a0)
                logs = [cover_alpha_volume(spec, k * t, alpha) for t in range(1, 51)]
                diffs = {b - a for a, b in zip(logs, logs[1:])}
                expect = 1 - 2 * k * alpha
                if diffs != {expect} or (expect > 0) != (side < 0):
                    problems.append(f"k={k}, alpha={alpha}")
    c8 = crossover_dimension(CylinderCoverSpec(8))
    return CheckResult(
        "cylinder-cover volumes are flat exactly at alpha = 1/(2k)",
        not problems and c8 == F(1, 16),
        f"k in 2,4,8,16, t <= 50, 40 random alphas each; crossover(k=8) = {c8}"
        + (f"; {problems[0]}" if problems else ""),
    )


def check_box_counting(cfg: VerifyConfig) -> CheckResult:
    count = 10**4
    half = (F(1, 2), F(1, 2), F(0), F(0))
    estimates = {
        "full": (box_counting_estimate(sample_uniform(count, 10, cfg.seed), 10).value, 1.0),
        "tau=(1/2,1/2,0,0)": (
            box_counting_estimate(sample_block_shuffles(half, count, 10, cfg.seed), 10).value,
            besicovitch_eggleston_dimension(half),
        ),
        "eps-blocks k=4": (box_counting_estimate(sample_c1(count, 10, cfg.seed), 10).value, 1 / 8),
    }
    ok = all(abs(v - want) <= 0.05 for v, want in estimates.values())
    detail = ", ".join(f"{name} {v:.3f} vs {want:.3f}" for name, (v, want) in estimates.items())
    return CheckResult("box-count slopes match the dimension formulas", ok, detail, "0.05")


DETERMINISM_SPECS = [
    {"construction": "theta2", "theta": "8/5", "p": ["1/5", "3/10", "1/5", "3/10"],
     "q": ["1/5", "1/10", "3/5", "1/10"], "epsilon": "1/20"},
    {"construction": "theta3", "theta": "2", "p0": "19/100", "q0": "1/100", "p1": "19/100", "q1": "1/100"},
    {"construction": "eps-block-theta2", "theta": "8/5", "vector_a": ["1/5", "3/10", "1/5", "3/10"],
     "vector_b": ["1/5", "1/10", "3/5", "1/10"], "eps_bits": {"kind": "seeded"}},
    {"construction": "block", "columns": [["1/4", "1/4", "1/4", "1/4"], ["1/2", "0", "0", "1/2"]],
     "lengths": {"kind": "linear", "scale": 4}, "permutation": {"kind": "shuffle"}},
    {"construction": "rational", "value": "1/3"},
]


def check_determinism(cfg: VerifyConfig) -> CheckResult:
    import json

    from . import cli

    n = min(cfg.horizon, 10**5)
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        for i, doc in enumerate(DETERMINISM_SPECS):
            spec_path = root / f"spec{i}.json"
            spec_path.write_text(json.dumps(doc))
            digests = []
            for run in (0, 1):
                out = root / f"run{run}_{i}"
                args = ["--spec", str(spec_path), "--horizon", str(n), "--seed", str(cfg.seed)]
                codes = (
                    cli.main(["generate", *args, "--out", str(out / "s.txt")]),
                    cli.main(["analyze", *args, "--out", str(out / "s.csv")]),
                )
                if codes != (0, 0):
                    raise AssertionError(f"config {i} exited with {codes}")
                digests.append(
                    [hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.iterdir())]
                )
            if digests[0] != digests[1]:
                differing.append(i)
    return CheckResult(
        "generate and analyze are byte-identical across reruns",
        not differing,
        f"5 configs at {n} digits" + (f"; config {differing[0]} differs" if differing else ""),
    )


def check_no_lone_oscillation(cfg: VerifyConfig) -> CheckResult:
    n = cfg.horizon
    flagged = []
    sources = [theta2_instance(), theta3_instance(), eps_block_instance(cfg.seed)]
    for idx, src in enumerate(sources):
        lone = []
        for h in (n // 2, n):
            v = classify(src, h)
            lone.append(len(v.oscillating) == 1 and not isinstance(v.mean, Oscillates))
        if all(lone):
            flagged.append(idx)
    return CheckResult(
        "no stream shows exactly one oscillating frequency at two doubling horizons",
        not flagged,
        f"{len(sources)} constructed streams at n/2 and n" + (f"; stream {flagged[0]} flagged" if flagged else ""),
    )


CHECKS: list[Callable[[VerifyConfig], CheckResult]] = [
    check_identities,
    check_recovery,
    check_mean_pinning,
    check_theta2_witness,
    check_theta3_witness,
    check_squeeze,
    check_permutation,
    check_crossover,
    check_box_counting,
    check_determinism,
    check_no_lone_oscillation,
]


def run_all(cfg: VerifyConfig) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            results.append(check(cfg))
        except (InfeasibleError, ValueError, AssertionError) as exc:
            results.append(CheckResult(check.__name__.removeprefix("check_"), False, f"raised {exc!r}"))
    return results
