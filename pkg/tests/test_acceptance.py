"""Acceptance criteria at full scale.

Each test checks library output against an oracle computed here: numpy
counting for frequencies, exact elimination for the linear solve, exact power
identities for cover volumes, and the entropy formula for dimensions.
"""

import hashlib
import json
import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from adicmean.classify import CheckpointLadder, classify, default_ladder, recover_frequencies
from adicmean.cli import main
from adicmean.constructors import (
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
    theta3_source,
)
from adicmean.digitcore import RationalSource, materialize, stats_at
from adicmean.fractal import (
    CylinderCoverSpec,
    box_counting_estimate,
    cover_alpha_volume,
    crossover_dimension,
    sample_block_shuffles,
    sample_c1,
    sample_uniform,
    volume_slope,
)

N = 10**6
P2 = (F(1, 5), F(3, 10), F(1, 5), F(3, 10))
Q2 = (F(1, 5), F(1, 10), F(3, 5), F(1, 10))
THETA3 = (F(2), F(19, 100), F(1, 100), F(19, 100), F(1, 100))


# -- oracles --------------------------------------------------------------------


def count_table(digits, positions):
    """Exact digit counts at each position, by cumulative sums."""
    cum = np.zeros((len(digits) + 1, 4), dtype=np.int64)
    for d in range(4):
        cum[1:, d] = np.cumsum(digits == d)
    return cum[np.asarray(positions, dtype=np.int64)]


def tail_half(values):
    return values[len(values) - math.ceil(len(values) / 2):]


def elimination_solve(theta, known):
    """Gauss-Jordan over Fractions on the full 4x4 system with two rows pinned."""
    rows = [[F(1)] * 4 + [F(1)], [F(0), F(1), F(2), F(3), F(theta)]]
    for i, v in known:
        rows.append([F(int(j == i)) for j in range(4)] + [F(v)])
    for col in range(4):
        piv = next(r for r in range(col, 4) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        rows[col] = [x / rows[col][col] for x in rows[col]]
        for r in range(4):
            if r != col and rows[r][col] != 0:
                rows[r] = [a - rows[r][col] * b for a, b in zip(rows[r], rows[col])]
    return {j: rows[j][4] for j in range(4) if j not in dict(known)}


def random_rational(rng, den_max=20):
    den = rng.randint(1, den_max)
    return F(rng.randint(0, den), den)


def mean_theta_family(rng, size):
    """Random columns that all have mean theta."""
    while True:
        theta = F(rng.randint(1, 59), 20)
        cols = []
        for _ in range(500):
            v0, v1 = random_rational(rng), random_rational(rng)
            v3 = theta - v1 - 2 * (1 - v0 - v1)
            v2 = 1 - v0 - v1 - v3
            if min(v0, v1, v2, v3) >= 0:
                cols.append((v0, v1, v2, v3))
                if len(cols) == size:
                    return theta, cols


def generated_streams(seed, count):
    rng = random.Random(seed)
    out = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            _, cols = mean_theta_family(rng, rng.randint(1, 4))
            out.append(BlockSource(BlockPlan.cyclic(cols, LinearLengths(rng.randint(1, 3))), allow_empty=True))
        elif kind == 1:
            spec = EpsilonBlockSpec(F(8, 5), P2, Q2, SeededBits(rng.randrange(2**32)))
            out.append(EpsilonBlockSource(spec))
        elif kind == 2:
            out.append(theta2_source(F(8, 5), P2, Q2, epsilon=F(1, 20)))
        else:
            den = rng.randint(3, 10**6)
            out.append(RationalSource(rng.randint(1, den - 1), den))
    return out


# -- criteria -------------------------------------------------------------------


def test_c1_prefix_identities(report):
    start = time.perf_counter()
    bad = []
    checked = 0
    for idx, src in enumerate(generated_streams(11, 20)):
        pre = materialize(src, N)
        pos = list(default_ladder(src, N).union(int(b) for b in pre.boundaries if b > 0).positions)
        counts = count_table(pre.digits, pos)
        for s, row, n in zip(stats_at(pre.digits, 4, pos), counts, pos):
            v = [F(int(c), n) for c in row]
            r = F(int(row[1] + 2 * row[2] + 3 * row[3]), n)
            checked += 1
            if s.counts != tuple(int(c) for c in row) or sum(s.frequencies()) != 1 or s.mean() != r:
                bad.append((idx, n))
            elif sum(v) != 1 or r != v[1] + 2 * v[2] + 3 * v[3]:
                bad.append((idx, n))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed <= 30
    report("1 frequency identities", ok, f"20 streams x 10^6 digits, {checked} checkpoints, {elapsed:.1f}s")
    assert ok, bad[:5]


def test_c2_frequency_recovery(report):
    rng = random.Random(2)
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    mismatches, done = 0, 0
    while done < 1000:
        w = [rng.randint(0, 30) for _ in range(4)]
        if not any(w):
            continue
        nu = [F(x, sum(w)) for x in w]
        theta = nu[1] + 2 * nu[2] + 3 * nu[3]
        known = [(i, nu[i]) for i in pairs[done % 6]]
        if recover_frequencies(theta, known) != elimination_solve(theta, known):
            mismatches += 1
        done += 1
    fixed = all(
        recover_frequencies(F(3, 2), [(i, F(1, 4)), (j, F(1, 4))]) == {d: F(1, 4) for d in range(4) if d not in (i, j)}
        for i, j in pairs
    )
    ok = mismatches == 0 and fixed
    report("2 frequency recovery", ok, f"1000 instances, {mismatches} mismatches, uniform point fixed={fixed}")
    assert ok


def test_c3_mean_pinning(report):
    rng = random.Random(3)
    start = time.perf_counter()
    worst = F(0)
    for _ in range(20):
        theta, cols = mean_theta_family(rng, rng.randint(1, 5))
        for c in cols:
            assert c[1] + 2 * c[2] + 3 * c[3] == theta
        digits = materialize(BlockSource(BlockPlan.cyclic(cols, LinearLengths(1)), allow_empty=True), N).digits
        worst = max(worst, abs(F(int(digits.sum(dtype=np.int64)), N) - theta))
    elapsed = time.perf_counter() - start
    ok = worst < F(1, 100) and elapsed <= 60
    report("3 mean pinning", ok, f"20 families, worst |r_N - theta| = {float(worst):.2e} (< 1e-2), {elapsed:.1f}s")
    assert ok


def test_c4_theta2_witness(report):
    src = theta2_source(F(8, 5), P2, Q2, epsilon=F(1, 20))
    digits = materialize(src, N).digits
    pos = default_ladder(src, N).positions
    counts = count_table(digits, pos)
    v0_err = abs(F(int(counts[-1, 0]), N) - F(1, 5))
    v1 = tail_half([F(int(c), n) for c, n in zip(counts[:, 1], pos)])
    amp = max(v1) - min(v1)
    guess = classify(src, N).class_guess
    ok = v0_err < F(1, 100) and amp >= F(1, 10) and guess == "Theta2"
    report("4 Theta2 witness", ok, f"|v0 - 1/5| = {float(v0_err):.2e}, v1 amplitude {float(amp):.4f}, class {guess}")
    assert ok


def test_c5_theta3_witness(report):
    src = theta3_source(*THETA3, epsilon=F(1, 40))
    digits = materialize(src, N).digits
    pos = default_ladder(src, N).positions
    counts = count_table(digits, pos)
    mean_err = abs(F(int(digits.sum(dtype=np.int64)), N) - THETA3[0])
    amps = []
    for d in (0, 1):
        series = tail_half([F(int(c), n) for c, n in zip(counts[:, d], pos)])
        amps.append(max(series) - min(series))
    guess = classify(src, N).class_guess
    ok = mean_err < F(1, 100) and min(amps) >= F(1, 10) and guess == "Theta3"
    report(
        "5 Theta3 witness", ok,
        f"|r_N - 2| = {float(mean_err):.2e}, amplitudes {[round(float(a), 4) for a in amps]}, class {guess}",
    )
    assert ok


def low_mean_streams():
    a = StochasticVector((1 - F(1, 6000), F(0), F(0), F(1, 6000)))
    b = StochasticVector((1 - F(1, 2000), F(1, 2000), F(0), F(0)))
    c = StochasticVector((1 - F(1, 4000), F(0), F(1, 4000), F(0)))
    return [
        BlockSource(BlockPlan.cyclic([a, b], LinearLengths(1000))),
        BlockSource(BlockPlan.cyclic([b, c, a], LinearLengths(1000))),
        RationalSource(1, 4**12),
    ]


def test_c6_boundary_squeeze(report):
    streams = generated_streams(6, 12) + [theta3_source(*THETA3, epsilon=F(1, 40))] + low_mean_streams()
    violations, small, guesses = 0, 0, []
    for src in streams:
        pre = materialize(src, N)
        pos = list(default_ladder(src, N).union(int(b) for b in pre.boundaries if b > 0).positions)
        counts = count_table(pre.digits, pos)
        for row, n in zip(counts, pos):
            total = int(row[1] + 2 * row[2] + 3 * row[3])
            # v_i <= r_n and v_i <= 3 - r_n, multiplied through by n
            violations += sum(int(row[i]) > total for i in (1, 2, 3))
            violations += sum(int(row[i]) > 3 * n - total for i in (0, 1, 2))
        if F(int(pre.digits.sum(dtype=np.int64)), N) < F(1, 1000):
            small += 1
            guesses.append(classify(src, ladder=CheckpointLadder.of(pos)).class_guess)
    ok = violations == 0 and small >= 3 and all(g == "Theta1" for g in guesses)
    report("6 boundary squeeze", ok, f"{len(streams)} streams, {violations} violations, low-mean classes {guesses}")
    assert ok


def test_c7_block_permutation_invariance(report):
    n = 10**5
    base = EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P2, Q2, SeededBits(7)))
    pre = materialize(base, n)
    ends = np.asarray(pre.boundaries, dtype=np.int64)
    ref = count_table(pre.digits, ends)
    differing, mismatched = 0, []
    for v in range(100):
        digits = materialize(PermutedSource(base, ShuffleRearrangement(v)), n).digits
        differing += not np.array_equal(digits, pre.digits)
        if not np.array_equal(count_table(digits, ends), ref):
            mismatched.append(v)
    ok = not mismatched and differing == 100
    report("7 block permutation invariance", ok,
           f"100 variants, {len(ends)} boundaries up to 10^5, {len(mismatched)} mismatches")
    assert ok


def log2_volume_at_block_end(k, t, alpha):
    """log2 of 2^t (4^(-kt))^alpha from the integer R^q, where alpha = p/q."""
    p, q = alpha.numerator, alpha.denominator
    power = F(2 ** (t * q), 4 ** (k * t * p))
    num, den = power.numerator, power.denominator
    assert num & (num - 1) == 0 and den & (den - 1) == 0
    return F(num.bit_length() - den.bit_length(), q)


def test_c8_crossover_dimension(report):
    rng = random.Random(8)
    flat = True
    for k in (2, 4, 8, 16):
        spec = CylinderCoverSpec(k)
        for t in range(1, 51):
            got = cover_alpha_volume(spec, k * t, F(1, 2 * k))
            flat &= got == 0 and got == log2_volume_at_block_end(k, t, F(1, 2 * k))
    signs = True
    for k in (2, 4, 8, 16):
        spec = CylinderCoverSpec(k)
        a0 = F(1, 2 * k)
        alphas = [a0 * F(rng.randint(1, 999), 1000) for _ in range(20)]
        alphas += [a0 + (1 - a0) * F(rng.randint(1, 999), 1000) for _ in range(20)]
        for a in alphas:
            want = (1 - 2 * k * a > 0) - (1 - 2 * k * a < 0)
            step = log2_volume_at_block_end(k, 2, a) - log2_volume_at_block_end(k, 1, a)
            signs &= (step > 0) - (step < 0) == want and volume_slope(spec, a) == step
    exact = crossover_dimension(CylinderCoverSpec(8)) == F(1, 16)
    ok = flat and signs and exact
    report("8 crossover dimension", ok, f"flat at 1/(2k)={flat}, slope signs={signs}, crossover(k=8)=1/16 {exact}")
    assert ok


def entropy_dimension(tau):
    return -sum(t * math.log(t, 4) for t in tau if t)


def test_c9_box_counting(report):
    start = time.perf_counter()
    m, rank = 10**4, 10
    full = box_counting_estimate(sample_uniform(m, rank, seed=9), rank).value
    half = box_counting_estimate(sample_block_shuffles((F(1, 2), F(1, 2), 0, 0), m, rank, seed=9), rank).value
    c1 = box_counting_estimate(sample_c1(m, rank, seed=9, k=4), rank).value
    targets = [(full, entropy_dimension([0.25] * 4)), (half, entropy_dimension([0.5, 0.5])), (c1, 1 / (2 * 4))]
    elapsed = time.perf_counter() - start
    ok = all(abs(v - t) <= 0.05 for v, t in targets) and elapsed <= 120
    report("9 box counting", ok,
           ", ".join(f"{v:.3f} vs {t:.3f}" for v, t in targets) + f" (tolerance 0.05), {elapsed:.1f}s")
    assert ok


DETERMINISM = [
    {"construction": "theta2", "theta": "8/5", "p": ["1/5", "3/10", "1/5", "3/10"],
     "q": ["1/5", "1/10", "3/5", "1/10"], "epsilon": "1/20"},
    {"construction": "theta3", "theta": "2", "p0": "19/100", "q0": "1/100", "p1": "19/100", "q1": "1/100"},
    {"construction": "eps-block-theta2", "theta": "8/5", "vector_a": ["1/5", "3/10", "1/5", "3/10"],
     "vector_b": ["1/5", "1/10", "3/5", "1/10"], "eps_bits": {"kind": "seeded"}},
    {"construction": "block", "columns": [["1/4", "1/4", "1/4", "1/4"], ["1/2", "0", "0", "1/2"]],
     "lengths": {"kind": "linear", "scale": 4}, "permutation": {"kind": "shuffle"}},
    {"construction": "rational", "value": "5/17"},
]


def test_c10_determinism(tmp_path, capsys, report):
    same = []
    for i, doc in enumerate(DETERMINISM):
        spec = tmp_path / f"spec{i}.json"
        spec.write_text(json.dumps(doc))
        digests = []
        for run in range(2):
            out = tmp_path / f"run{run}" / f"s{i}.txt"
            csv_out = tmp_path / f"run{run}" / f"s{i}.csv"
            assert main(["generate", "--spec", str(spec), "--out", str(out), "--horizon", "200000", "--seed", "4"]) == 0
            assert main(["analyze", "--input", str(out), "--out", str(csv_out)]) == 0
            digests.append([hashlib.sha256(p.read_bytes()).hexdigest() for p in (out, csv_out)])
        same.append(digests[0] == digests[1])
    capsys.readouterr()
    ok = all(same)
    report("10 determinism", ok, f"{sum(same)}/5 configs byte-identical for generate and analyze")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
