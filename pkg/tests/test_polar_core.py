import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarcoord.construction import build_sets, estimate_profile
from polarcoord.model import bsc_source_model
from polarcoord.polar_core import (
    AlphabetMismatch,
    FrozenOverlap,
    IndexOutOfRange,
    LengthNotPowerOfTwo,
    PairSource,
    TooLarge,
    brute_posterior,
    frozen_array,
    polar_transform,
    sc_decode,
    sc_posterior,
    sc_posteriors,
    sc_sample,
    transform_matrix,
)

UNIFORM_INDEP = PairSource(np.full((2, 2), 0.25))
EQUAL = PairSource(np.array([[0.5, 0.0], [0.0, 0.5]]))


def noisy_copy(p):
    return PairSource(0.5 * np.array([[1 - p, p], [p, 1 - p]]))


def test_transform_small_cases():
    assert polar_transform(np.array([1], np.int8)).tolist() == [1]
    assert polar_transform(np.array([1, 0], np.int8)).tolist() == [1, 0]
    assert polar_transform(np.array([0, 1], np.int8)).tolist() == [1, 1]


def test_transform_matches_kronecker(rng):
    for n in (2, 4, 8, 16, 32):
        u = rng.integers(0, 2, n)
        assert np.array_equal(polar_transform(u), (u @ transform_matrix(n)) % 2)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_transform_involution(m, seed):
    u = np.random.default_rng(seed).integers(0, 2, 1 << m, dtype=np.int8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_transform_rejects_bad_length():
    with pytest.raises(LengthNotPowerOfTwo):
        polar_transform(np.zeros(6, np.int8))


def test_transform_batched(rng):
    u = rng.integers(0, 2, (5, 16))
    v = polar_transform(u)
    for row_u, row_v in zip(u, v):
        assert np.array_equal(polar_transform(row_u), row_v)


def test_posterior_uniform_independent(rng):
    n = 8
    w = rng.integers(0, 2, n)
    v = rng.integers(0, 2, n)
    for j in range(n):
        assert sc_posterior(j, v[:j], w, UNIFORM_INDEP) == pytest.approx(0.5, abs=1e-12)


def test_posterior_deterministic_source(rng):
    n = 8
    w = rng.integers(0, 2, n)
    v = polar_transform(w)
    for j in range(n):
        p0 = sc_posterior(j, v[:j], w, EQUAL)
        assert p0 == pytest.approx(1.0 - v[j], abs=1e-12)


def test_posterior_matches_oracle_bsc(rng):
    src = noisy_copy(0.1)
    for _ in range(50):
        b, w = src.sample((4,), rng)
        v = polar_transform(b)
        j = int(rng.integers(0, 4))
        assert sc_posterior(j, v[:j], w, src) == pytest.approx(brute_posterior(j, v[:j], w, src), abs=1e-10)


@given(st.sampled_from([2, 4, 8, 16]), st.integers(0, 2**32 - 1))
def test_posterior_matches_oracle_random_sources(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    src = PairSource(rng.dirichlet(np.ones(2 * k)).reshape(2, k))
    b, w = src.sample((n,), rng)
    v = polar_transform(b)
    j = int(rng.integers(0, n))
    assert sc_posterior(j, v[:j], w, src) == pytest.approx(brute_posterior(j, v[:j], w, src), abs=1e-10)


def test_posteriors_batch_agrees_with_single(rng):
    src = noisy_copy(0.2)
    b, w = src.sample((3, 8), rng)
    v = polar_transform(b)
    p0, p1 = sc_posteriors(v, w, src)
    assert np.allclose(p0 + p1, 1.0)
    for r in range(3):
        for j in range(8):
            assert p0[r, j] == pytest.approx(sc_posterior(j, v[r, :j], w[r], src), abs=1e-12)


def test_posterior_errors():
    with pytest.raises(IndexOutOfRange):
        sc_posterior(4, np.zeros(4), np.zeros(4, int), EQUAL)
    with pytest.raises(AlphabetMismatch):
        sc_posterior(0, [], np.array([0, 5]), EQUAL)


def test_brute_oracle_edge_cases():
    w = np.array([0, 1, 1, 0])
    assert brute_posterior(2, [0, 1], w, UNIFORM_INDEP) == pytest.approx(0.5)
    point = PairSource(np.array([[1.0], [0.0]]))
    assert brute_posterior(1, [0], np.zeros(4, int), point) in (0.0, 1.0)
    with pytest.raises(TooLarge):
        brute_posterior(0, [], np.zeros(32, int), EQUAL)


def test_sample_all_frozen_returns_map(rng):
    bits = rng.integers(0, 2, 16, dtype=np.int8)
    fm = frozen_array(16, (np.arange(16), bits))
    assert np.array_equal(sc_sample(fm, rng.integers(0, 2, 16), noisy_copy(0.1), rng), bits)
    assert np.array_equal(sc_decode(fm, rng.integers(0, 2, 16), noisy_copy(0.1)), bits)


def test_sample_uniform_frequencies():
    rng = np.random.default_rng(7)
    n, draws = 8, 100_000
    fm = frozen_array(n)
    w = np.zeros((draws, n), np.int64)
    v = sc_sample(fm, w, UNIFORM_INDEP, rng)
    freq = v.mean(axis=0)
    sigma = np.sqrt(0.25 / draws)
    assert np.all(np.abs(freq - 0.5) < 3 * sigma)


def test_sample_deterministic_given_seed():
    src = noisy_copy(0.1)
    w = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    a = sc_sample(frozen_array(8), w, src, np.random.default_rng(3))
    b = sc_sample(frozen_array(8), w, src, np.random.default_rng(3))
    assert a.tobytes() == b.tobytes()


def test_frozen_overlap():
    with pytest.raises(FrozenOverlap):
        frozen_array(8, ([1, 2], [0, 1]), ([2], [1]))


def test_decode_deterministic_source_recovers_transform(rng):
    w = rng.integers(0, 2, 32)
    assert np.array_equal(sc_decode(frozen_array(32), w, EQUAL), polar_transform(w))


def test_decode_beats_blind_guessing():
    # H positions are free and decoded, all other positions frozen to the truth
    n, trials = 8, 1000
    src = noisy_copy(0.05)
    model = bsc_source_model(0.0, 0.05)
    prof = estimate_profile(model, n, exact=True)
    sets = build_sets(prof, 0.25, allow_infeasible=True)
    free = sets.h_v_given_y
    frozen_pos = np.setdiff1d(np.arange(n), free)
    rng = np.random.default_rng(11)
    b, w = src.sample((trials, n), rng)
    v = polar_transform(b)
    errors = 0
    for t in range(trials):
        fm = frozen_array(n, (frozen_pos, v[t, frozen_pos]))
        errors += np.count_nonzero(sc_decode(fm, w[t], src)[free] != v[t, free])
    assert free.size > 0
    assert errors / (trials * free.size) < 0.5
