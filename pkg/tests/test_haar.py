import numpy as np
import pytest

from virtiso import haar, stats
from virtiso.errors import DegenerateCoefficient, DimMismatch
from virtiso.rng import stream


def test_sphere_norm_and_small_cases():
    rng = stream(1, 0)
    z = haar.sample_sphere(1, rng)
    assert z.shape == (1,) and abs(abs(z[0]) - 1) < 1e-15
    for n in (2, 5, 40):
        assert abs(np.linalg.norm(haar.sample_sphere(n, rng)) - 1) < 1e-14
    with pytest.raises(DimMismatch):
        haar.sample_sphere(0, rng)


def test_sphere_coordinate_moments_and_beta_marginal():
    rng = stream(2, 0)
    X = np.array([haar.sample_sphere(8, rng) for _ in range(100_000)])
    w = np.abs(X) ** 2
    # E|x_j|^2 = 1/8 with standard error sqrt(Var/N), Var of Beta(1,7) = 7/(64 * 9)
    se = np.sqrt(7 / (64 * 9) / X.shape[0])
    assert np.all(np.abs(w.mean(axis=0) - 1 / 8) < 4 * se)
    assert stats.ks_test(w[:, 0], stats.beta_cdf(8))[1] > 0.01
    # phases are uniform and independent of the moduli
    ph = np.angle(X[:, 3]) % (2 * np.pi) / (2 * np.pi)
    assert stats.ks_test(ph, lambda x: x)[1] > 0.01


def test_update_coeffs_normalised_and_uniform():
    c = haar.sample_update_coeffs(1, stream(3, 1))
    assert abs(abs(c.mu[0]) ** 2 + abs(c.nu) ** 2 - 1) < 1e-15
    assert haar.coeffs_for_step(4, 16).check().n == 16
    mu1 = np.array([abs(haar.sample_update_coeffs(16, stream(5, s)).mu[0]) ** 2 for s in range(20_000)])
    se = np.sqrt(16 / (17**2 * 18) / mu1.size)
    assert abs(mu1.mean() - 1 / 17) < 4 * se
    assert stats.ks_test(mu1, stats.beta_cdf(17))[1] > 0.01


def test_coeffs_are_deterministic_per_seed_and_step():
    a = haar.coeffs_for_step(7, 10)
    b = haar.coeffs_for_step(7, 10)
    c = haar.coeffs_for_step(8, 10)
    assert np.array_equal(a.mu, b.mu) and a.nu == b.nu
    assert not np.array_equal(a.mu, c.mu)


def test_degenerate_coefficients_rejected():
    bad = haar.UpdateCoeffs(np.array([0.0 + 0j, 0.6]), 0.8 + 0j)
    with pytest.raises(DegenerateCoefficient):
        bad.check()
    with pytest.raises(DegenerateCoefficient):
        haar.UpdateCoeffs(np.array([0.5 + 0j]), 0.5 + 0j).check()


def test_next_matrix_structure():
    rng = stream(9, 0)
    rs, u = haar.next_matrix([], rng)
    assert u.shape == (1, 1) and abs(abs(u[0, 0]) - 1) < 1e-15
    for n in range(1, 12):
        prev = np.eye(n + 1, dtype=complex)
        prev[:n, :n] = u
        rs, u = haar.next_matrix(rs, stream(9, n))
        assert np.abs(u.conj().T @ u - np.eye(n + 1)).max() < 1e-13
        sv = np.linalg.svd(u - prev, compute_uv=False)
        assert sv[1] < 1e-13
        e = np.zeros(n + 1)
        e[-1] = 1
        assert np.allclose(u @ e, rs[-1](e.astype(complex)), atol=1e-14)
    assert np.allclose(haar.matrix_from_reflections(rs), u, atol=1e-13)


def test_extend_matrix_dimension_guard():
    rs, _ = haar.next_matrix([], stream(1, 0))
    with pytest.raises(DimMismatch):
        haar.extend_matrix(np.eye(3, dtype=complex), rs[0])


def test_coeff_and_matrix_modes_agree_in_distribution():
    n = 8
    coeff = haar.angle_samples(31, 10_000, n)
    mat = np.empty((10_000, n))
    for s in range(10_000):
        t = haar.MatrixTower(1000 + s)
        for _ in range(n):
            t.step()
        mat[s] = np.sort(np.angle(np.linalg.eigvals(t.u)) % (2 * np.pi))
    for col in (0, n // 2, n - 1):
        assert stats.two_sample_ks(coeff[:, col], mat[:, col])[1] > 0.01
    tr = lambda a: np.abs(np.exp(1j * a).sum(axis=1)) ** 2
    assert stats.two_sample_ks(tr(coeff), tr(mat))[1] > 0.01


def test_angle_samples_sorted_and_reproducible():
    a = haar.angle_samples(5, 300, 12, chunk=128)
    b = haar.angle_samples(5, 300, 12, chunk=128)
    assert np.array_equal(a, b)
    assert np.all(np.diff(a, axis=1) > 0) and a.min() > 0 and a.max() < 2 * np.pi
