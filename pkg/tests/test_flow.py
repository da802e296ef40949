import cmath
import math

import numpy as np
import pytest

from virtiso import flow, haar
from virtiso.eigenpath import EigenPath, scaled_angle
from virtiso.errors import ModeError, QuadratureTooCoarse, TruncationTooCoarse
from virtiso.rng import stream
from virtiso.runner import Trajectory
from virtiso.secular import SpectralState, initial_state, solve_secular, step


def element():
    return flow.FlowElement({1: 1 + 2j, -2: 0.5j, 3: -1.0}, {1: 0.8, -2: -1.3, 3: 2.6})


def test_apply_U_identity_semigroup_and_single_path():
    e = element()
    assert flow.apply_U(0.0, e).coeffs == e.coeffs
    a = flow.apply_U(0.3, flow.apply_U(-1.1, e))
    b = flow.apply_U(-0.8, e)
    for k in e.coeffs:
        assert abs(a.coeffs[k] - b.coeffs[k]) <= 1e-14 * abs(e.coeffs[k])
        assert abs(abs(a.coeffs[k]) - abs(e.coeffs[k])) <= 1e-15 * abs(e.coeffs[k])
    one = flow.FlowElement({2: 1.5 + 0j}, {2: 1.7})
    assert abs(flow.apply_U(0.4, one).coeffs[2] - 1.5 * cmath.exp(2j * math.pi * 0.4 * 1.7)) < 1e-15


def test_prefix_and_weight():
    e = element()
    e.prefixes = {1: np.array([1, 0, 1j]), -2: np.array([0, 1, 0]), 3: np.array([1, 1, 1, 9])}
    assert np.allclose(e.prefix(), [(1 + 2j) - 1, 0.5j - 1, (1 + 2j) * 1j - 1])
    assert abs(e.weight(0.5) - (2 * 5 + (1 + 2**1.5) * 0.25 + (1 + 3**1.5))) < 1e-12


@pytest.fixture(scope="module")
def full_tower():
    """FULL states of one COEFF tower at 64 and 256, and g_1 with its angle at 512."""
    st = initial_state(np.exp(2j))
    path = EigenPath(1, L=1).start(st)
    states = {}
    for m in range(1, 512):
        c = haar.coeffs_for_step(3, m)
        new, rep = step(st, c)
        path.record_step(st, new, c, rep)
        st = new
        if st.n in (16, 64, 256):
            states[st.n] = st
    return states, path.D * st.vectors[:, 0], scaled_angle(st, 1)


def test_flow_residual_of_exact_eigenvector(full_tower):
    states, _, _ = full_tower
    st = states[64]
    for alpha in (0.5, 1 / 3, 0.77):
        for k in (1, 5, 40):
            f = st.vectors[:, k - 1]
            y = scaled_angle(st, k)
            th = st.angles[k - 1]
            m = math.floor(alpha * 64)
            exact = abs(cmath.exp(1j * m * th) - cmath.exp(2j * math.pi * alpha * y))
            r = flow.flow_residual(st, f, alpha, y)
            assert abs(r - exact) < 1e-12 and r <= th + 1e-12
    assert flow.flow_residual(st, st.vectors[:, 0], 0.0, 0.3) == 0.0


def test_component_residual_cauchy_schwarz(full_tower):
    states, g, y = full_tower
    st = states[64]
    rng = stream(1, 0)
    for _ in range(50):
        w = rng.complex_normals(64)
        alpha, gamma = rng.uniforms(2) * 2 - 1
        ell = 1 + int(rng.uniforms(1)[0] * 64)
        c = flow.component_residual(st, w, alpha, gamma, ell, y)
        r = flow.flow_residual(st, w, alpha, y)
        assert c <= r * np.linalg.norm(w) + 1e-12
    assert flow.component_residual(st, g, 0.0, 0.0, 1, y) == 0.0


def test_flow_needs_full_vectors(full_tower):
    states, g, y = full_tower
    with pytest.raises(ModeError):
        flow.flow_residual(SpectralState(states[64].angles), g, 0.5, y)


def test_backward_projection_matches_full_eigencoords():
    st = initial_state(np.exp(0.4j))
    hist, states = {}, {}
    for m in range(1, 40):
        c = haar.coeffs_for_step(17, m)
        hist[m] = (st.angles, c.mu, solve_secular(st, c))
        st, _ = step(st, c)
        states[st.n] = st
    top = stream(17, 99).complex_normals(40)
    v = st.vectors @ top
    got = flow.backward_coords(hist, top, [10, 20, 30, 40])
    for n in (10, 20, 30):
        ref = flow.eigencoords(states[n], v)
        assert np.abs(got[n] - ref).max() <= 1e-12 * np.abs(ref).max()
    assert np.array_equal(got[40], top)


def test_component_residual_decreases_along_the_ladder():
    levels = (64, 128, 256)
    top_n = 512
    med = {n: [] for n in levels}
    for s in range(50):
        tr = Trajectory(700 + s, "COEFF", L=1, window=(1,), history=True)
        rows = {}
        for _ in tr.run(top_n):
            if tr.n in levels:
                rows[tr.n] = tr.state.vectors[:, 0].copy()
        path = tr.paths[1]
        top = np.zeros(top_n, dtype=complex)
        top[0] = path.D
        eta = flow.backward_coords(tr.steps, top, levels)
        y = path.y_estimate
        for n in levels:
            med[n].append(flow.component_residual_eig(tr.steps[n][0], eta[n], rows[n], 1 / 3, 0.0, y))
    m = [np.median(med[n]) for n in levels]
    assert m[0] > m[1] > m[2], m


def gaussian_pair(seed, n):
    rng = stream(seed, 0)
    z = rng.complex_normals(2 * n).reshape(2, n)
    return z[0], z[1]


def test_cesaro_examples():
    ones = np.ones(50)
    assert flow.cesaro_inner(ones, ones).value == 1
    w, w2 = gaussian_pair(1, 10_000)
    assert abs(flow.cesaro_inner(w, w2).value) <= 0.05
    assert abs(flow.cesaro_inner(w, w).value - 1) <= 0.05
    a, b = flow.cesaro_inner(w, w2).value, flow.cesaro_inner(w2, w).value
    assert a == b.conjugate()
    with pytest.raises(ValueError):
        flow.cesaro_inner(w, w2[:-1])


def test_cauchy_schwarz_on_every_evaluation():
    for s in range(100):
        n = 1 + s * 7
        w, w2 = gaussian_pair(100 + s, n)
        c = flow.cesaro_inner(w, w2).value
        assert abs(c) ** 2 <= flow.cesaro_inner(w, w).value.real * flow.cesaro_inner(w2, w2).value.real + 1e-12


def test_abel_geometric_series_and_guards():
    s = 0.9
    N = flow.abel_terms(s)
    est = flow.abel_inner(np.ones(N), np.ones(N), s)
    assert abs(est.value - (1 - s**N)) < 1e-13
    assert est.params["tail"] < flow.TRUNCATION_TOL
    with pytest.raises(TruncationTooCoarse):
        flow.abel_inner(np.ones(100), np.ones(100), 0.99)
    with pytest.raises(TruncationTooCoarse):
        flow.abel_inner(np.ones(10), np.ones(10), 0.5, N=20)
    with pytest.raises(ValueError):
        flow.abel_inner(np.ones(10), np.ones(10), 1.0)


@pytest.fixture(scope="module")
def proxies():
    N = flow.abel_terms(0.9999, 100.0) + 1
    return gaussian_pair(2, N)


def test_abel_approaches_cesaro(proxies):
    w, w2 = proxies
    for a, b in ((w, w2), (w, w)):
        ces = flow.cesaro_inner(a[:10_000], b[:10_000]).value
        errs = [abs(flow.abel_inner(a, b, s).value - ces) for s in (0.99, 0.999, 0.9999)]
        assert errs[-1] <= 0.05, errs


def test_holo_examples(proxies):
    s = 0.9
    e1 = np.zeros(40, dtype=complex)
    e1[0] = 1
    assert abs(flow.holo_inner(e1, e1, s).value - 2 * (1 - s)) < 1e-14
    w, w2 = gaussian_pair(3, 400)
    h = flow.holo_inner(w, w2, s)
    assert abs(h.value - flow.abel_matched(w, w2, s).value) <= 1e-10
    with pytest.raises(QuadratureTooCoarse):
        flow.holo_inner(w, w2, s, M=800)
    w, w2 = proxies
    ces = flow.cesaro_inner(w[:10_000], w2[:10_000]).value
    assert abs(flow.holo_inner(w, w2, 0.9999).value - ces) <= 0.05


def test_moving_average_examples():
    for p in (1, 2, 17, 1000):
        assert abs(flow.moving_average_M(p, 1.0 + 0j) - 1) < 1e-15
    assert abs(flow.moving_average_M(2, -1.0 + 0j)) < 1e-15
    # the series branch and the closed form meet at the switch
    for p in (3, 50, 999):
        for phase in (0.9e-8, 1.1e-8, 1e-5):
            lam = cmath.exp(1j * phase)
            ref = sum(lam**j for j in range(p)) / p
            assert abs(flow.moving_average_M(p, lam) - ref) < 1e-12


def test_moving_average_bound_sweep():
    margin, c_max, failures = flow.mp_bound_sweep(10_000, stream(5, 0), c=0.01)
    assert failures == 0 and margin >= 0 and c_max > 0.01


def test_alpha_grid():
    assert flow.alpha_grid(0.5, 256, 0.15) == sorted({128, 128 - 55, 128 + 55, 128 - 111, 128 + 111})


def test_eigenpath_is_a_member_at_calibrated_constant(full_tower):
    states, g, y = full_tower
    for alpha, gamma, ell in ((0.5, 0.0, 1), (0.25, 0.1, 2)):
        Vw = cmath.exp(2j * math.pi * alpha * y) * g
        C = flow.calibrate_membership(flow.f_membership_check(g, Vw, states[64], alpha, gamma, ell))
        assert flow.f_membership_check(g, Vw, states[256], alpha, gamma, ell, C=C).member


def test_first_basis_vector_is_not_a_member(full_tower):
    # the component supremum of e_1 stays near 1 while C n^{-0.1} decays very slowly
    states, g, y = full_tower
    alpha, gamma, ell = 0.5, 0.0, 1
    Vw = cmath.exp(2j * math.pi * alpha * y) * g
    C = flow.calibrate_membership(flow.f_membership_check(g, Vw, states[64], alpha, gamma, ell))
    e1 = np.zeros(512, dtype=complex)
    e1[0] = 1
    assert not flow.f_membership_check(e1, e1, states[256], alpha, gamma, ell, C=C).member


def test_zero_flow_component_is_finite(full_tower):
    states, g, y = full_tower
    rep = flow.f_membership_check(g, g, states[64], 0.0, 0.2, 1)
    assert np.isfinite(rep.component_sup) and np.isfinite(rep.norm_sup)
    with pytest.raises(ModeError):
        flow.f_membership_check(g, g, SpectralState(states[64].angles), 0.0, 0.2, 1)
