import math

import numpy as np
import pytest
from oracles import awgn_mi_gauss_hermite

from starsic.air import (
    awgn_air_gaussian,
    awgn_air_starqam,
    memoryless_baseline_air,
    sic_air,
    source_bits,
    stage_air,
)
from starsic.constellation import build_star_qam, sample_sequence
from starsic.cpan import CpanParams, fit_awgn_variance, simulate
from starsic.sic import PosteriorTable, SicSchedule


def test_gaussian_capacity_closed_form():
    assert awgn_air_gaussian(0.0) == 1.0
    assert awgn_air_gaussian(10.0) == pytest.approx(3.4594, abs=5e-5)
    assert awgn_air_gaussian(20.0) == pytest.approx(6.6582, abs=5e-5)


def test_stage_air_perfect_posteriors():
    M, n = 16, 1000
    truth = np.random.default_rng(0).integers(M, size=n)
    probs = np.eye(M)[truth]
    res = stage_air(PosteriorTable(probs, np.arange(n)), truth, np.full(M, 1 / M))
    assert res.bits == pytest.approx(4.0)
    assert not res.clamped and res.n_inf == 0


def test_stage_air_uninformative():
    prior = np.array([0.1, 0.2, 0.7])
    truth = np.random.default_rng(1).choice(3, size=500, p=prior)
    probs = np.tile(prior, (500, 1))
    res = stage_air(PosteriorTable(probs, np.arange(500)), truth, prior)
    assert res.bits == pytest.approx(0.0, abs=1e-12)


def test_stage_air_scales_with_share():
    truth = np.zeros(10, dtype=int)
    probs = np.tile([1.0, 0.0], (10, 1))
    res = stage_air(PosteriorTable(probs, np.arange(10)), truth, [0.5, 0.5], symbols_per_use=0.25)
    assert res.bits == pytest.approx(0.25)


def test_stage_air_clamps_and_flags_zero_mass():
    truth = np.array([0, 1, 0, 1])
    probs = np.array([[0.0, 1.0], [1.0, 0.0], [0.9, 0.1], [0.9, 0.1]])
    res = stage_air(PosteriorTable(probs, np.arange(4)), truth, [0.5, 0.5])
    assert res.n_inf == 2
    assert res.clamped and res.bits == 0.0


def test_stage_air_rejects_zero_prior():
    with pytest.raises(ValueError):
        stage_air(PosteriorTable(np.eye(2), np.arange(2)), [0, 1], [1.0, 0.0])


def test_awgn_starqam_matches_gauss_hermite():
    c = build_star_qam(2, 2, 1.0)
    ref = awgn_mi_gauss_hermite(c.points, c.point_pmf, 0.1)
    res = awgn_air_starqam(c, 10.0, 200_000, 3)
    assert abs(res.total_bits - ref) < 0.01
    assert abs(res.total_bits - ref) < 4 * res.std_error + 1e-3


def test_awgn_starqam_limits():
    c = build_star_qam(4, 8, 1.0)
    low = awgn_air_starqam(c, -60.0, 20_000, 1)
    assert low.total_bits <= 3 * low.std_error
    high = awgn_air_starqam(c, 80.0, 20_000, 2)
    assert high.total_bits == pytest.approx(source_bits(c), abs=0.02)


def test_awgn_starqam_needs_samples():
    with pytest.raises(ValueError):
        awgn_air_starqam(build_star_qam(2, 2, 1.0), 10.0, 999, 0)


def test_awgn_starqam_deterministic():
    c = build_star_qam(8, 16, 1.0)
    a = awgn_air_starqam(c, 12.0, 10_000, 5)
    b = awgn_air_starqam(c, 12.0, 10_000, 5)
    assert a.total_bits == b.total_bits


def test_standard_error_scales_inverse_sqrt():
    c = build_star_qam(8, 16, 1.0)
    se1 = awgn_air_starqam(c, 10.0, 25_000, 7).std_error
    se4 = awgn_air_starqam(c, 10.0, 100_000, 8).std_error
    assert se1 / se4 == pytest.approx(2.0, rel=0.2)


def _cpan(sth, n_seq=4, n=8192, sn=0.01, n_r=8, n_p=32, seed=0):
    c = build_star_qam(n_r, n_p, 1.0)
    p = CpanParams.from_steady_state(0.97 if sth > 0 else 0.0, sth, sn)
    xs, ys = [], []
    for s in np.random.SeedSequence(seed).spawn(n_seq):
        sx, sy = s.spawn(2)
        x = sample_sequence(c, n, sx)
        xs.append(x)
        ys.append(simulate(p, x, sy).y)
    return c, p, xs, ys


def _concat(xs):
    from starsic.constellation import SymbolSequence

    return SymbolSequence(
        np.concatenate([x.radius_idx for x in xs]),
        np.concatenate([x.phase_idx for x in xs]),
        np.concatenate([x.values for x in xs]),
        xs[0].n_p,
    )


def test_memoryless_baseline_equals_awgn_without_phase_noise():
    c, p, xs, ys = _cpan(0.0, n_seq=6, sn=0.1)
    res = memoryless_baseline_air(np.concatenate(ys), _concat(xs), c, 0.1)
    ref = awgn_air_starqam(c, 10.0, 50_000, 9)
    assert abs(res.total_bits - ref.total_bits) < 3 * math.hypot(res.std_error, ref.std_error)


def test_memoryless_baseline_noiseless_is_entropy():
    c = build_star_qam(4, 8, 1.0)
    x = sample_sequence(c, 20_000, 1)
    res = memoryless_baseline_air(x.values, x, c, 1e-8)
    assert res.total_bits == pytest.approx(source_bits(c), abs=0.03)


def test_memoryless_baseline_rejects_bad_variance():
    c = build_star_qam(2, 2, 1.0)
    x = sample_sequence(c, 10, 1)
    with pytest.raises(ValueError):
        memoryless_baseline_air(x.values, x, c, 0.0)


def test_memoryless_below_sic_with_phase_noise():
    c, p, xs, ys = _cpan(0.01, n_seq=8, sn=1e-3, n_r=16, n_p=64)
    s2 = fit_awgn_variance(list(zip(xs, ys)))
    groups = np.repeat(np.arange(len(ys)), len(ys[0]))
    mem = memoryless_baseline_air(np.concatenate(ys), _concat(xs), c, s2, groups)
    sic = sic_air(ys, xs, SicSchedule(2), c, p)
    assert sic.total_bits - mem.total_bits > 3 * math.hypot(sic.std_error, mem.std_error)


def test_sic_air_invariants():
    c, p, xs, ys = _cpan(0.01, n_seq=3, n=2048)
    h = source_bits(c)
    prev = -np.inf
    for S in (1, 2, 4):
        res = sic_air(ys, xs, SicSchedule(S), c, p)
        assert len(res.per_stage_bits) == S + 1
        assert res.total_bits == pytest.approx(sum(res.per_stage_bits), abs=1e-12)
        assert res.total_bits >= 0 and res.std_error >= 0
        assert res.total_bits <= h + 3 * res.std_error
        assert all(b <= h for b in res.per_stage_bits)
        assert res.total_bits >= prev - 2 * res.std_error
        prev = res.total_bits
        assert res.n_symbols_used == 3 * 2048


def test_sic_air_short_sequence_with_many_stages():
    c, p, xs, ys = _cpan(0.01, n_seq=1, n=5)
    res = sic_air(ys, xs, SicSchedule(8), c, p)
    assert res.per_stage_bits[6:] == [0.0, 0.0, 0.0]


def test_sic_air_rejects_mismatch():
    c, p, xs, ys = _cpan(0.01, n_seq=2, n=64)
    with pytest.raises(ValueError):
        sic_air(ys, xs[:1], SicSchedule(2), c, p)
