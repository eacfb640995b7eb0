import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starsic.constellation import (
    Constellation,
    SymbolSequence,
    build_star_qam,
    sample_sequence,
    source_entropy,
)


def test_full_scale_alphabet_size():
    c = build_star_qam(32, 128, 1e-3)
    assert c.size == 4096
    assert c.points.shape == (4096,)


def test_single_ring_qpsk():
    c = build_star_qam(1, 4, 1.0, truncation=1.0)
    np.testing.assert_allclose(c.radii, [1.0])
    np.testing.assert_allclose(c.radial_pmf, [1.0])
    np.testing.assert_allclose(c.phase_set, [0, math.pi / 2, math.pi, 3 * math.pi / 2])


def test_two_ring_pmf_by_hand():
    c = build_star_qam(2, 1, 1.0, truncation=1.0)
    w = np.array([0.5 * math.exp(-0.25), 1.0 * math.exp(-1.0)])
    np.testing.assert_allclose(c.radial_pmf, w / w.sum(), rtol=1e-12)
    np.testing.assert_allclose(c.radial_pmf, [0.5142, 0.4858], atol=1e-4)
    # rescaling keeps the spacing uniform
    assert c.radii[1] == pytest.approx(2 * c.radii[0])


@pytest.mark.parametrize(
    "args",
    [(0, 4, 1.0), (4, 0, 1.0), (4, 4, 0.0), (4, 4, -1.0)],
)
def test_rejects_nonpositive(args):
    with pytest.raises(ValueError):
        build_star_qam(*args)


def test_rejects_nonpositive_truncation():
    with pytest.raises(ValueError):
        build_star_qam(4, 4, 1.0, truncation=0.0)


def test_rejects_pmf_underflow():
    with pytest.raises(ValueError, match="underflow"):
        build_star_qam(64, 4, 1.0, truncation=60.0)


@given(
    n_r=st.integers(1, 64),
    n_p=st.integers(1, 256),
    ptx=st.floats(1e-6, 1e3),
    trunc=st.floats(0.5, 5.0),
    placement=st.sampled_from(["uniform", "quantile"]),
)
def test_power_and_pmf_invariants(n_r, n_p, ptx, trunc, placement):
    c = build_star_qam(n_r, n_p, ptx, trunc, placement)
    assert abs(c.radial_pmf.sum() - 1) < 1e-12
    assert np.all(c.radial_pmf > 0)
    assert np.all(np.diff(c.radii) > 0) and c.radii[0] > 0
    assert abs(c.average_power - ptx) <= 1e-9 * ptx
    assert len(c.phase_set) == n_p and c.phase_set[0] == 0
    np.testing.assert_allclose(np.diff(c.phase_set), 2 * math.pi / n_p)


@given(n_r=st.integers(1, 16), n_p=st.integers(1, 64))
def test_phase_rotation_symmetry(n_r, n_p):
    c = build_star_qam(n_r, n_p, 1.0)
    pts = c.points
    rot = pts * np.exp(2j * math.pi / n_p)
    key = lambda z: np.sort_complex(np.round(z, 9))  # noqa: E731
    np.testing.assert_allclose(key(rot), key(pts), atol=1e-8)


def test_more_rings_more_entropy():
    h32, _ = source_entropy(build_star_qam(32, 8, 1.0))
    h64, _ = source_entropy(build_star_qam(64, 8, 1.0))
    assert h64 > h32


def test_quantile_placement_is_nearly_equiprobable():
    c = build_star_qam(16, 8, 2.0, placement="quantile")
    assert abs(c.average_power - 2.0) < 1e-9 * 2.0
    assert c.radial_pmf.max() / c.radial_pmf.min() < 1.5


def test_entropies():
    assert source_entropy(build_star_qam(4, 128, 1.0))[1] == pytest.approx(7.0)
    assert source_entropy(build_star_qam(1, 4, 1.0))[0] == 0.0
    c = Constellation(np.array([1.0, 2.0]), np.array([0.5, 0.5]), 4, 2.5)
    assert source_entropy(c)[0] == pytest.approx(1.0)


def test_single_phase_sequence():
    c = build_star_qam(4, 1, 1.0)
    x = sample_sequence(c, 1000, 7)
    assert np.all(x.phase_idx == 0)


def test_sampling_matches_pmf():
    c = build_star_qam(2, 4, 1.0)
    n = 10**6
    x = sample_sequence(c, n, 123)
    p = c.radial_pmf[0]
    count = np.sum(x.radius_idx == 0)
    assert abs(count - n * p) < 3 * math.sqrt(n * p * (1 - p))


def test_sampling_is_deterministic():
    c = build_star_qam(8, 16, 1.0)
    a, b = sample_sequence(c, 500, 99), sample_sequence(c, 500, 99)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.radius_idx, b.radius_idx)
    assert not np.array_equal(a.values, sample_sequence(c, 500, 100).values)


def test_values_consistent_with_indices():
    c = build_star_qam(8, 16, 0.3)
    x = sample_sequence(c, 2000, 1)
    expected = c.radii[x.radius_idx] * np.exp(1j * c.phase_set[x.phase_idx])
    assert np.array_equal(x.values, expected)
    y = SymbolSequence.from_indices(c, x.radius_idx, x.phase_idx)
    assert np.array_equal(y.values, x.values)
    np.testing.assert_array_equal(c.points[x.point_idx], x.values)


def test_rejects_empty_sequence():
    with pytest.raises(ValueError):
        sample_sequence(build_star_qam(2, 2, 1.0), 0, 1)


def test_constellation_round_trip(tmp_path):
    c = build_star_qam(8, 32, 0.01)
    c.save(tmp_path / "c.json")
    d = Constellation.load(tmp_path / "c.json")
    assert np.array_equal(d.radii, c.radii)
    assert np.array_equal(d.radial_pmf, c.radial_pmf)
    assert (d.n_p, d.ptx) == (c.n_p, c.ptx)


def test_constellation_is_immutable():
    c = build_star_qam(4, 4, 1.0)
    with pytest.raises(ValueError):
        c.radii[0] = 5.0


def test_rejects_invalid_constellation():
    with pytest.raises(ValueError):
        Constellation(np.array([2.0, 1.0]), np.array([0.5, 0.5]), 4, 1.0)
    with pytest.raises(ValueError):
        Constellation(np.array([1.0, 2.0]), np.array([0.6, 0.6]), 4, 1.0)
