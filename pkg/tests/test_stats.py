import math

import numpy as np
import pytest
from scipy.integrate import quad

from virtiso import haar, stats
from virtiso.errors import DegenerateInterval, InsufficientSamples, WindowViolation


def test_kernel_examples():
    assert stats.kernel_finite(0.0, 7) == pytest.approx(7 / (2 * math.pi), abs=1e-15)
    assert abs(stats.kernel_finite(2 * math.pi / 8, 8)) < 1e-15
    assert abs(stats.kernel_finite(math.pi, 2)) < 1e-15
    assert stats.kernel_sine(0.0) == 1
    assert abs(stats.kernel_sine(1.0)) < 1e-16
    assert stats.kernel_sine(0.5) == pytest.approx(2 / math.pi, abs=1e-15)
    assert stats.kernel_scaled(0.0, 9) == pytest.approx(1.0, abs=1e-15)


def test_finite_kernel_integrals():
    n = 9
    # the one-point density n/2pi integrates to n, and K reproduces itself
    assert abs(quad(lambda t: stats.kernel_finite(0.0, n), 0, 2 * math.pi)[0] - n) < 1e-8
    sq = quad(lambda t: stats.kernel_finite(t, n) ** 2, 0, 2 * math.pi, limit=200)[0]
    assert abs(sq - n / (2 * math.pi)) < 1e-8


def test_correlation_determinants():
    assert stats.rho_r([0.3]) == pytest.approx(1.0, abs=1e-15)
    assert abs(stats.rho_r([0.7, 0.7])) < 1e-15
    assert stats.rho_r([0.0, 0.5]) == pytest.approx(1 - 4 / math.pi**2, abs=1e-14)
    g = np.random.default_rng(0)
    for _ in range(50):
        y = g.uniform(-3, 3, 3)
        for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
            assert abs(stats.rho_r(y) - stats.rho_r(y[perm])) < 1e-12
            assert abs(stats.rho_r(y, 40) - stats.rho_r(y[perm], 40)) < 1e-12


def test_gap_boundaries_and_errors():
    for n in (1, 5, 30):
        assert stats.gap_probability(n, 0.0, 2 * math.pi)[0] == 0.0
        assert stats.gap_probability(n, 1.0, 1.0)[0] == 1.0
    for a, b in ((2.0, 1.0), (-0.1, 1.0), (0.0, 7.0)):
        with pytest.raises(DegenerateInterval):
            stats.gap_probability(4, a, b)


def test_gap_monotone_and_bounded():
    for n in (3, 12, 40):
        prev = 1.0
        for length in np.linspace(0.05, 2 * math.pi - 0.05, 40):
            p, bound = stats.gap_probability(n, 0.5, min(0.5 + length, 2 * math.pi))
            assert p <= prev + 1e-14 and p <= bound
            prev = p


def test_gap_probability_against_recursion_samples():
    n, count = 12, 20_000
    a, b = 1.0, 1.0 + math.pi / 6
    ang = haar.angle_samples(41, count, n)
    empty = ~np.any((ang >= a) & (ang <= b), axis=1)
    p, _ = stats.gap_probability(n, a, b)
    se = empty.std(ddof=1) / math.sqrt(count)
    assert abs(empty.mean() - p) <= 3 * se


def test_scaled_points():
    y = stats.scaled_points([0.1, 3.0, 6.0])
    assert np.all(np.diff(y) > 0) and np.all(y > -1.5) and np.all(y <= 1.5)


@pytest.fixture(scope="module")
def pair_hist():
    pts = np.array([stats.scaled_points(a) for a in haar.angle_samples(43, 2000, 64)])
    return stats.empirical_pair_correlation(pts)


def test_pair_correlation_repulsion_and_far_bin(pair_hist):
    h = pair_hist
    th = h.theory()
    assert h.density[0] < 0.1 and th[0] < 0.1
    i = int(np.searchsorted(h.edges, 3.0, side="right") - 1)
    assert h.edges[i] <= 3.0 < h.edges[i + 1]
    assert abs(h.density[i] - th[i]) <= 3 * h.sigma[i]
    assert np.all(h.density >= 0) and np.all(np.diff(h.edges) > 0)


def test_pair_correlation_needs_samples():
    with pytest.raises(InsufficientSamples):
        stats.empirical_pair_correlation(np.zeros((10, 4)))


def test_bin_stats_merge_is_order_free():
    g = np.random.default_rng(1)
    parts = [g.normal(size=(int(g.integers(1, 20)), 5)) for _ in range(6)]
    whole = stats.BinStats.empty(5).add(np.vstack(parts))
    a = stats.BinStats.empty(5)
    for p in parts:
        a = a.merge(stats.BinStats.empty(5).add(p))
    b = stats.BinStats.empty(5)
    for p in reversed(parts):
        b = stats.BinStats.empty(5).add(p).merge(b)
    for acc in (a, b):
        assert acc.count == whole.count
        assert np.allclose(acc.mean, whole.mean, atol=1e-14)
        assert np.allclose(acc.stderr, whole.stderr, atol=1e-14)


def test_trace_moments():
    ang = haar.angle_samples(44, 20_000, 16)
    for j, m, se in stats.trace_moments(ang, 5):
        assert abs(m - j) <= 3 * se
    with pytest.raises(WindowViolation):
        stats.trace_moments(ang[:, :8], 5)


def test_ks_self_test_gives_uniform_p_values():
    g = np.random.default_rng(2)
    n = 10
    ps = [stats.beta_delocalization_test(g.beta(1, n - 1, 1000), n)[1] for _ in range(300)]
    assert stats.ks_test(ps, lambda x: np.clip(x, 0, 1))[1] > 0.01
    x = g.beta(1, n - 1, 5000)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - 1 / n) <= 3 * se
    with pytest.raises(InsufficientSamples):
        stats.beta_delocalization_test(x[:999], n)


def test_ks_detects_the_wrong_law():
    x = np.random.default_rng(3).beta(1, 20, 2000)
    assert stats.beta_delocalization_test(x, 10)[1] < 1e-6


def test_event_flags_on_constructed_logs():
    angles = np.array([0.5, 1.0, 1.0, 2.0])
    mu = np.full(4, 0.4 + 0j)
    flags, summary = stats.event_diagnostics([(80, angles, mu, 0.1 + 0j)], n_min=64)
    assert not flags[0].e0 and summary["e0"]["violations"] == 1 and summary["e0"]["last"] == 80
    # small n is only logged
    flags, summary = stats.event_diagnostics([(8, angles, mu, 0.1 + 0j)], n_min=64)
    assert not flags[0].e0 and summary["e0"]["violations"] == 0
    good = np.linspace(0.1, 2 * math.pi - 0.1, 6)
    f = stats.event_flags(6, good, np.full(6, 0.3 + 0j), 0.2 + 0j, eps=0.1)
    assert f.e0 and f.e1 and f.e2 and f.e3_low


def test_csv_metadata_lines(tmp_path):
    p = tmp_path / "t.csv"
    stats.write_csv(p, ["a", "b"], [(1, 2), (3, 4)], {"seed": 5, "n": 64})
    lines = p.read_text().splitlines()
    assert lines[:3] == ["# seed: 5", "# n: 64", "a,b"] and lines[3] == "1,2"
