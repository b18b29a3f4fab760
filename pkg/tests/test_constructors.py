from fractions import Fraction as F

import numpy as np
import pytest

from adicmean.classify import classify
from adicmean.constructors import (
    BlockPlan,
    BlockSource,
    EpsilonBlockSource,
    EpsilonBlockSpec,
    ExplicitLengths,
    ExplicitRearrangement,
    IdentityRearrangement,
    LinearLengths,
    LiteralBits,
    PeriodicBits,
    PermutedSource,
    ReverseRearrangement,
    SeededBits,
    ShuffleRearrangement,
    StochasticVector,
    block_number,
    check_schedule,
    epsilon_block_number,
    epsilon_blocks,
    floor_mul,
    greedy_oscillator,
    permute_blocks,
    solve_block,
    theta2_column,
    theta2_source,
    theta2_witness,
    theta3_column,
    theta3_source,
    theta3_witness,
)
from adicmean.digitcore import materialize, stats_at
from adicmean.errors import HorizonExhausted, InfeasibleError, SpecError

P = (F(1, 5), F(3, 10), F(1, 5), F(3, 10))
Q = (F(1, 5), F(1, 10), F(3, 5), F(1, 10))
UNIFORM = StochasticVector.of(F(1, 4), F(1, 4), F(1, 4), F(1, 4))


def floor_(x: F) -> int:
    return x.numerator // x.denominator


# -- stochastic vectors and block numbers --------------------------------------


def test_stochastic_vector_validation():
    assert StochasticVector.of("1/2", "1/2", 0, 0).mean == F(1, 2)
    with pytest.raises(SpecError, match="sums to"):
        StochasticVector.of("1/2", "1/3", 0, 0)
    with pytest.raises(SpecError, match="negative"):
        StochasticVector.of("3/2", "-1/2", 0, 0)


def test_uniform_block_number_first_blocks():
    stream = block_number(BlockPlan.constant(UNIFORM, LinearLengths(4)))
    digits, _ = stream.advance(12)
    assert digits.tolist() == [0, 1, 2, 3, 0, 0, 1, 1, 2, 2, 3, 3]
    assert stream.boundaries_through(12) == [4, 12]


def test_all_zero_column_gives_zero_stream():
    digits, stats = block_number(BlockPlan.constant(StochasticVector.of(1, 0, 0, 0))).advance(500)
    assert not digits.any() and stats.counts == (500, 0, 0, 0)


def test_block_lengths_use_floors():
    col = StochasticVector.of(F(1, 3), F(1, 3), F(1, 3), 0)
    pre = materialize(BlockSource(BlockPlan.constant(col, LinearLengths(3))), 200)
    lengths = np.diff(np.concatenate(([0], pre.boundaries)))
    assert lengths.tolist() == [3 * k for k in range(1, 1 + len(lengths))]
    col = StochasticVector.of(F(1, 3), F(1, 3), F(1, 6), F(1, 6))
    pre = materialize(BlockSource(BlockPlan.constant(col, LinearLengths(6)), allow_empty=True), 500)
    lengths = np.diff(np.concatenate(([0], pre.boundaries)))
    # s_k = 6k: floors are 2k, 2k, k, k
    assert lengths.tolist() == [6 * k for k in range(1, 1 + len(lengths))]
    col = StochasticVector.of(F(1, 4), F(1, 4), F(1, 4), F(1, 4))
    pre = materialize(BlockSource(BlockPlan.constant(col, LinearLengths(2)), allow_empty=True), 500)
    lengths = np.diff(np.concatenate(([0], pre.boundaries)))
    # [k/2] of each digit: odd blocks lose their remainder
    assert lengths.tolist()[:4] == [4 * ((2 * k) // 4) for k in (2, 3, 4, 5)]


def test_degenerate_block_is_a_spec_error():
    with pytest.raises(SpecError, match="degenerate block 1"):
        materialize(BlockSource(BlockPlan.constant(UNIFORM)), 10)


def test_non_stochastic_column_is_rejected():
    with pytest.raises(SpecError):
        BlockPlan.cyclic([(F(1, 2), F(1, 2), F(1, 2), 0)])


def test_explicit_lengths_run_out():
    plan = BlockPlan.constant(UNIFORM, ExplicitLengths((4, 8)))
    with pytest.raises(SpecError, match="exhausted"):
        materialize(BlockSource(plan), 20)


def test_schedule_check():
    assert check_schedule(LinearLengths(), 2000).ok
    assert not check_schedule(lambda k: 5, 2000).ok


def test_columns_converging_to_a_limit():
    lam = StochasticVector.of(F(1, 10), F(2, 5), F(3, 10), F(1, 5))
    e0 = (1, 0, 0, 0)

    def columns():
        k = 0
        while True:
            k += 1
            yield StochasticVector(tuple((1 - F(1, k)) * l + F(e, k) for l, e in zip(lam, e0)))

    pre = materialize(BlockSource(BlockPlan(columns), allow_empty=True), 10**5)
    rows = stats_at(pre.digits, 4, pre.boundaries)
    for K, s in enumerate(rows, start=1):
        if K < 50:
            continue
        total = K * (K + 1) // 2
        tol = 4 * F(K + K + 1, total)
        for j in range(4):
            assert abs(s.frequencies()[j] - lam[j]) <= tol


# -- greedy oscillator -----------------------------------------------------------


def naive_switches(lengths, lo, hi, eps, blocks):
    # direct transcription of the alternating threshold rule
    out, phase, total, acc, crossed = [], 1, 0, 0, False
    for i in range(1, blocks + 1):
        a = hi if phase % 2 else lo
        s = lengths(i)
        acc += floor_(a * s)
        total += s
        r = F(acc, total)
        crossed = crossed or (r > hi - eps if phase % 2 else r < lo + eps)
        if crossed:
            out.append(i)
            phase += 1
            crossed = False
    return out


def test_oscillator_matches_naive_simulation():
    run = greedy_oscillator(LinearLengths(), F(3, 10), F(1, 10), F(3, 10), F(1, 10), F(1, 20), 10**4)
    assert run.switches == naive_switches(LinearLengths(), F(1, 10), F(3, 10), F(1, 20), 10**4)
    assert len(run.switches) >= 5


def test_oscillator_ratios_cross_both_thresholds():
    run = greedy_oscillator(LinearLengths(), F(3, 10), F(1, 10), F(3, 10), F(1, 10), F(1, 20), 10**4)
    for j, n in enumerate(run.switches):
        r = run.ratio_a(n)
        assert r > F(1, 4) if j % 2 == 0 else r < F(3, 20)


def test_identical_regimes_share_switch_points():
    run = greedy_oscillator(LinearLengths(), F(1, 2), F(1, 5), F(1, 2), F(1, 5), F(1, 20), 3000)
    assert run.a == run.b and run.a_sums == run.b_sums


def test_oscillator_errors():
    with pytest.raises(SpecError):
        greedy_oscillator(LinearLengths(), F(1, 5), F(1, 5), F(1, 2), F(1, 5), F(1, 20), 100)
    with pytest.raises(SpecError, match="too large"):
        greedy_oscillator(LinearLengths(), F(3, 10), F(1, 10), F(3, 10), F(1, 10), F(1, 10), 100)
    with pytest.raises(HorizonExhausted) as err:
        greedy_oscillator(LinearLengths(), F(3, 10), F(1, 10), F(3, 10), F(1, 10), F(1, 20), 30, phases=20)
    assert err.value.phase >= 1 and len(err.value.partial.a) == 30


# -- witnesses --------------------------------------------------------------------


def solve_system(theta, v0, v1):
    # v2 + v3 = 1 - v0 - v1 and 2 v2 + 3 v3 = theta - v1
    v3 = (theta - v1) - 2 * (1 - v0 - v1)
    return v0, v1, (1 - v0 - v1) - v3, v3


def test_theta2_columns_example():
    theta = F(8, 5)
    assert theta2_column(theta, F(1, 5), F(3, 10))[2:] == (F(1, 5), F(3, 10))
    assert theta2_column(theta, F(1, 5), F(1, 10))[2:] == (F(3, 5), F(1, 10))
    for a in (F(3, 10), F(1, 10)):
        assert theta2_column(theta, F(1, 5), a) == solve_system(theta, F(1, 5), a)


def test_theta3_column_solves_the_system():
    for theta, a, b in [(F(3, 2), F(27, 100), F(1, 4)), (F(2), F(19, 100), F(1, 100)), (F(7, 5), F(1, 3), F(1, 7))]:
        assert theta3_column(theta, a, b) == solve_system(theta, a, b)


def test_theta2_precondition_errors():
    with pytest.raises(SpecError, match="must differ"):
        theta2_source(F(8, 5), P, P)
    with pytest.raises(SpecError):
        theta2_source(0, P, Q)
    with pytest.raises(SpecError, match="mean"):
        theta2_source(F(3, 2), P, Q)
    with pytest.raises(SpecError):
        theta2_source(F(8, 5), P, (F(1, 10), F(2, 5), F(3, 10), F(1, 5)))


def test_theta3_examples():
    # the derived tau_2 entry is 0 here, so the instance is refused
    with pytest.raises(SpecError, match="non-positive"):
        theta3_source(F(3, 2), F(3, 10), F(1, 5), F(3, 10), F(1, 5))
    src = theta3_source(F(3, 2), F(27, 100), F(1, 4), F(27, 100), F(1, 4))
    for a in (F(27, 100), F(1, 4)):
        for b in (F(27, 100), F(1, 4)):
            col = theta3_column(F(3, 2), a, b)
            assert sum(col) == 1 and min(col) > 0
    assert materialize(src, 1000).digits.max() <= 3
    with pytest.raises(SpecError):
        theta3_source(3, F(27, 100), F(1, 4), F(27, 100), F(1, 4))
    with pytest.raises(SpecError):
        theta3_source(F(3, 2), F(1, 4), F(27, 100), F(27, 100), F(1, 4))


def test_theta2_witness_tracks_p0_and_mean():
    stream = theta2_witness(F(8, 5), P, Q, epsilon=F(1, 20))
    _, stats = stream.advance(2 * 10**5)
    assert abs(stats.frequencies()[0] - F(1, 5)) < F(1, 100)
    assert abs(stats.mean() - F(8, 5)) < F(1, 100)


def test_theta3_witness_mean():
    _, stats = theta3_witness(2, F(19, 100), F(1, 100), F(19, 100), F(1, 100), epsilon=F(1, 40)).advance(2 * 10**5)
    assert abs(stats.mean() - 2) < F(1, 50)


# -- epsilon blocks ---------------------------------------------------------------


def test_eps_blocks_have_k_digits():
    spec = EpsilonBlockSpec(F(8, 5), P, Q, SeededBits(3))
    src = EpsilonBlockSource(spec)
    for j, _name, eps, counts, _sw in epsilon_blocks(src.spec):
        assert 1 + sum(counts) == src.spec.k and min(counts) >= 0
        if j == 3000:
            break


def test_single_regime_counts_telescope():
    theta = F(8, 5)
    src = EpsilonBlockSource(EpsilonBlockSpec(theta, P, eps_bits=LiteralBits("")))
    k = src.spec.k
    pre = materialize(src, 500 * k)
    for j, s in enumerate(stats_at(pre.digits, 4, pre.boundaries), start=1):
        assert s.counts[0] == floor_mul(P[0], k * (j + 1)) - floor_mul(P[0], k)
        assert s.counts[3] == floor_mul(P[3], k * (j + 1)) - floor_mul(P[3], k)
        assert s.digit_sum == floor_mul(theta, k * (j + 1)) - floor_mul(theta, k)
        assert abs(s.mean() - theta) < F(1, k * j) + F(2, j)
    last = stats_at(pre.digits, 4, [pre.boundaries[-1]])[0].frequencies()
    assert all(abs(v - p) < F(1, 100) for v, p in zip(last, P))


def test_eps_block_mean_is_pinned_at_boundaries():
    theta = F(8, 5)
    src = EpsilonBlockSource(EpsilonBlockSpec(theta, P, Q, SeededBits(11)))
    k = src.spec.k
    pre = materialize(src, 2000 * k)
    for j, s in enumerate(stats_at(pre.digits, 4, pre.boundaries), start=1):
        assert s.mean() == F(floor_mul(theta, k * (j + 1)) - floor_mul(theta, k), k * j)


def test_flipping_an_eps_bit_keeps_boundary_stats():
    bits = "0110100110010110" * 8
    j = 37
    flipped = bits[: j - 1] + ("1" if bits[j - 1] == "0" else "0") + bits[j:]
    a = materialize(EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q, LiteralBits(bits))), 128 * 64)
    b = materialize(EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q, LiteralBits(flipped))), 128 * 64)
    assert np.array_equal(a.boundaries, b.boundaries)
    assert stats_at(a.digits, 4, a.boundaries) == stats_at(b.digits, 4, b.boundaries)
    diff = np.flatnonzero(a.digits != b.digits)
    k = 64
    assert diff.size and diff.min() >= (j - 1) * k and diff.max() < j * k
    assert diff.min() == (j - 1) * k  # the bit itself


def test_eps_block_validation():
    with pytest.raises(SpecError, match="vector_a\\[0\\]"):
        EpsilonBlockSpec(F(8, 5), P, (F(1, 10), F(2, 5), F(3, 10), F(1, 5)))
    with pytest.raises(SpecError, match="every coordinate"):
        EpsilonBlockSpec(F(8, 5), P, Q, mode="theta3")
    with pytest.raises(SpecError, match="mean"):
        EpsilonBlockSpec(F(3, 2), P, Q)
    with pytest.raises(SpecError):
        EpsilonBlockSpec(F(8, 5), P, Q, delta=F(1, 10))


def test_k_search_and_errors():
    spec = EpsilonBlockSpec(F(8, 5), P, Q, k_min=2, k_max=4)
    with pytest.raises(InfeasibleError, match="k too small"):
        EpsilonBlockSource(spec)
    with pytest.raises(InfeasibleError, match="negative count in block 1"):
        EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q, k=3))
    assert EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q, k=10)).spec.k == 10
    assert EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q)).spec.k == 64


def test_solve_block_balances():
    theta = F(8, 5)
    for i in range(1, 200):
        for eps in (0, 1):
            x, y, z, t = solve_block(64, theta, StochasticVector(Q), i, eps)
            assert x + y + z + t == 63
            assert eps + y + 2 * z + 3 * t == floor_mul(theta, 64 * (i + 1)) - floor_mul(theta, 64 * i)


def test_distinct_regime_pairs_give_distinct_streams():
    other = (F(1, 5), F(1, 5), F(2, 5), F(1, 5))
    a = materialize(EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, Q, LiteralBits(""))), 10**6).digits
    b = materialize(EpsilonBlockSource(EpsilonBlockSpec(F(8, 5), P, other, LiteralBits(""))), 10**6).digits
    assert not np.array_equal(a, b)


def test_theta3_mode_classifies_theta3():
    a = (F(3, 10), F(1, 5), F(1, 5), F(3, 10))
    b = (F(1, 5), F(3, 10), F(3, 10), F(1, 5))
    src = EpsilonBlockSource(EpsilonBlockSpec(F(3, 2), a, b, PeriodicBits("01"), mode="theta3"))
    assert classify(src, 10**6).class_guess == "Theta3"


# -- permutations -----------------------------------------------------------------


def eps_stream(seed=0):
    return epsilon_block_number(EpsilonBlockSpec(F(8, 5), P, Q, SeededBits(seed)))


def test_identity_permutation_is_identity():
    base = eps_stream().source
    a = materialize(base, 20000).digits
    b = materialize(permute_blocks(base, IdentityRearrangement()).source, 20000).digits
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "rearrangement",
    [ReverseRearrangement(frozenset({1})), ReverseRearrangement(), ShuffleRearrangement(4, F(1, 2))],
)
def test_permutations_keep_boundary_stats(rearrangement):
    base = eps_stream(2).source
    a = materialize(base, 30000)
    b = materialize(permute_blocks(base, rearrangement).source, 30000)
    assert stats_at(a.digits, 4, a.boundaries) == stats_at(b.digits, 4, a.boundaries)
    assert np.array_equal(a.digits[a.boundaries[:-1]], b.digits[a.boundaries[:-1]])


def test_swapping_runs_changes_digits_mid_block():
    base = eps_stream(1).source
    block1 = materialize(base, 64).digits
    body = block1[1:]
    zeros, ones = body[body == 0], body[body == 1]
    swapped = np.concatenate((ones, zeros, body[body > 1]))
    perm = ExplicitRearrangement.of({1: swapped.tolist()})
    a = materialize(base, 640)
    b = materialize(permute_blocks(base, perm).source, 640)
    assert stats_at(a.digits, 4, a.boundaries) == stats_at(b.digits, 4, a.boundaries)
    assert not np.array_equal(a.digits[:64], b.digits[:64])


def test_multiset_change_is_rejected():
    base = eps_stream().source
    bad = ExplicitRearrangement.of({2: [0] * 63})
    with pytest.raises(SpecError, match="multiset"):
        materialize(permute_blocks(base, bad).source, 200)


def test_block_number_permutations_move_leading_digit():
    base = BlockSource(BlockPlan.constant(UNIFORM, LinearLengths(4)))
    src = permute_blocks(base, ReverseRearrangement(frozenset({1}))).source
    assert isinstance(src, PermutedSource) and not src.keep_leading
    assert materialize(src, 4).digits.tolist() == [3, 2, 1, 0]
