"""The acceptance suite: eleven checks shared by ``virtiso verify`` and the tests."""
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from . import flow, haar, rng as rngmod, stats
from .eigenpath import martingale_phase_test
from .errors import VirtisoError
from .runner import RunConfig, Trajectory, run_trajectory
from .secular import DEFAULT_TOL, decompose_in_eigenbasis, initial_state, step

SEED = 20240601


@dataclass
class Result:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f} s of {self.limit:.0f} s)"


def worked_case(tol=DEFAULT_TOL):
    st = initial_state(-1.0)
    x = np.array([-1 / math.sqrt(2), 1 / math.sqrt(2)], dtype=np.complex128)
    coeffs = decompose_in_eigenbasis(x, st)
    new, report = step(st, coeffs, tol)
    u2 = new.matrix()
    errs = {
        "angles": float(np.abs(new.angles - [np.pi / 4, 7 * np.pi / 4]).max()),
        "h1": abs(report.h[0] - (1 - 1 / math.sqrt(2))),
        "trace": abs(np.trace(u2) - math.sqrt(2)),
        "det": abs(np.linalg.det(u2) - 1),
    }
    worst = max(errs.values())
    return worst <= 1e-12, "max error %.2e over %s" % (worst, ", ".join(errs))


def oracle_equivalence(seeds=100, n=48, tol=DEFAULT_TOL, seed=SEED):
    worst = {"angle_err": 0.0, "vector_err": 0.0, "interlace_violations": 0, "sigma2": 0.0}
    failures = []
    for s in range(seed, seed + seeds):
        try:
            tr = Trajectory(s, "MATRIX", L=0, window=(), tol=tol, oracle=True)
            for row in tr.run(n):
                d = row["diagnostics"]
                for key in ("angle_err", "vector_err", "sigma2"):
                    worst[key] = max(worst[key], d[key])
                worst["interlace_violations"] += d["interlace_violations"]
        except VirtisoError as exc:
            failures.append(f"{s}: {type(exc).__name__}")
    ok = (
        not failures
        and worst["angle_err"] <= 1e-9
        and worst["vector_err"] <= 1e-7
        and worst["interlace_violations"] == 0
        and worst["sigma2"] <= 1e-10
    )
    detail = "angles %.1e, vectors %.1e, interlacing violations %d, sigma2 %.1e" % (
        worst["angle_err"], worst["vector_err"], worst["interlace_violations"], worst["sigma2"])
    if failures:
        detail += "; failed seeds " + ", ".join(failures[:5])
    return ok, detail


def haar_traces(samples=100_000, n=16, jmax=5, seed=SEED):
    ang = haar.angle_samples(seed, samples, n)
    rows = stats.trace_moments(ang, jmax)
    z = [abs(m - j) / se for j, m, se in rows]
    return max(z) <= 3, "max |mean - j|/sigma = %.2f; means %s" % (max(z), ", ".join("%.3f" % m for _, m, _ in rows))


def pair_correlation(samples=20_000, n=64, seed=SEED + 1):
    ang = haar.angle_samples(seed, samples, n)
    pts = np.array([stats.scaled_points(a) for a in ang])
    hist = stats.empirical_pair_correlation(pts, window=4.0, width=0.25, start=0.25)
    dev = np.abs(hist.density - hist.theory())
    tol = np.maximum(0.03, 4 * hist.sigma)
    i = int(np.argmax(dev / tol))
    return bool(np.all(dev <= tol)), "worst bin [%.2f, %.2f]: |dev| %.4f vs allowed %.4f; max |dev| %.4f" % (
        hist.edges[i], hist.edges[i + 1], dev[i], tol[i], dev.max())


def dense_haar_angles(seed, count, n, chunk=5000):
    """Eigenangles of dense Haar matrices from the QR sampler, independent of the recursion."""
    gen = rngmod.stream(seed, 0, rngmod.AUX).generator()
    out = []
    for s0 in range(0, count, chunk):
        U = unitary_group.rvs(n, size=min(chunk, count - s0), random_state=gen)
        out.append(np.mod(np.angle(np.linalg.eigvals(U)), 2 * np.pi))
    return np.concatenate(out)


def gap_check(samples=100_000, n=12, seed=SEED + 2):
    a = 1.0
    b = a + np.pi / 6
    p, bound = stats.gap_probability(n, a, b)
    ang = dense_haar_angles(seed, samples, n)
    hit = np.any((ang >= a) & (ang <= b), axis=1)
    freq = 1 - hit.mean()
    se = math.sqrt(freq * (1 - freq) / samples)
    empty = stats.gap_probability(n, 2.0, 2.0)[0]
    full = stats.gap_probability(n, 0.0, 2 * np.pi)[0]
    ok = abs(freq - p) <= 3 * se and empty == 1.0 and full == 0.0 and p <= bound
    return ok, "det %.5f, MC %.5f +- %.5f (%.2f sigma), bound %.4f, empty %g, full %g" % (
        p, freq, se, abs(freq - p) / se, bound, empty, full)


def delocalization(seeds=2000, n=64, seed=SEED):
    x = np.empty(seeds)
    for i, s in enumerate(range(seed, seed + seeds)):
        tr = Trajectory(s, "COEFF", L=1, window=())
        for _ in tr.run(n):
            pass
        x[i] = abs(tr.state.coords(1)[0]) ** 2
    D, p = stats.beta_delocalization_test(x, n)
    t2 = n * x
    De, pe = stats.ks_test(t2, stats.exp_cdf)
    ok = p >= 0.01 and pe >= 0.01
    return ok, "Beta(1, %d): D %.4f p %.3f; Exp(1): D %.4f p %.3f; mean n x %.4f" % (n - 1, D, p, De, pe, t2.mean())


def coupled_convergence(seeds=50, ladder=(256, 512, 1024), seed=SEED):
    top = 2 * ladder[-1]
    y = {n: [] for n in ladder + (top,)}
    g = {n: [] for n in ladder + (top,)}
    ratios = []
    failures = []
    for s in range(seed, seed + seeds):
        try:
            tr = run_trajectory(RunConfig(seed=s, n_max=top, L=1, window=(1,)), write=False)
        except VirtisoError as exc:
            failures.append(f"{s}: {type(exc).__name__}")
            continue
        for n in y:
            smp = tr.snapshots[n][1]
            y[n].append(smp.scaled_angle)
            g[n].append(complex(smp.g[0]))
        ratios.append(tr.snapshots[ladder[-1]][1].ratio)
    dy = [float(np.median(np.abs(np.subtract(y[n], y[2 * n])))) for n in ladder]
    dg = [float(np.median(np.abs(np.subtract(g[n], g[2 * n])))) for n in ladder]
    r = float(np.median(ratios))
    ok = (
        not failures
        and all(a > b for a, b in zip(dy, dy[1:]))
        and all(a > b for a, b in zip(dg, dg[1:]))
        and abs(r - 1) <= 0.2
    )
    detail = "median |dy| %s, median |dg| %s, median ratio %.3f" % (
        ", ".join("%.4f" % v for v in dy), ", ".join("%.4f" % v for v in dg), r)
    if failures:
        detail += "; failed seeds " + ", ".join(failures[:5])
    return ok, detail


def martingale(redraws=10_000, n=16, seed=SEED):
    tr = Trajectory(seed, "MATRIX", L=n, window=(1, 2))
    for _ in tr.run(n):
        pass
    state = tr.state
    tr.tower.step()
    coeffs = decompose_in_eigenbasis(tr.tower.last_column, state)
    worst = 0.0
    parts = []
    for k in (1, 2):
        path = tr.paths[k]
        for ell in (1, 2):
            prev = path.D * state.coords(k)[ell - 1]
            rng = rngmod.stream(seed, 100 * k + ell, rngmod.PHASES)
            mean, se, _, _ = martingale_phase_test(state, coeffs, rng, k, ell, redraws, D=path.D)
            z = abs(mean - prev) / se
            worst = max(worst, z)
            parts.append("(%d,%d) %.2f" % (k, ell, z))
    return worst <= 3, "|mean - previous|/sigma: " + ", ".join(parts)


def flow_ladder(seed, levels=(64, 128, 256, 512), top=1024, alpha=0.5, k=1):
    """Flow residuals of the eigenpath of k at each level, by backward projection from ``top``."""
    tr = Trajectory(seed, "COEFF", L=0, window=(k,), history=True)
    for _ in tr.run(top):
        pass
    path = tr.paths[k]
    coords = np.zeros(top, dtype=np.complex128)
    coords[(k - 1) % top] = path.D
    y_hat = path.y_estimate
    eta = flow.backward_coords(tr.steps, coords, levels)
    angles = {n: tr.steps[n][0] for n in levels}
    res = [flow.flow_residual_eig(angles[n], eta[n], alpha, y_hat) for n in levels]
    zero = [flow.flow_residual_eig(angles[n], eta[n], 0.0, y_hat) for n in levels]
    return res, zero


def flow_residuals(seeds=50, levels=(64, 128, 256, 512), seed=SEED):
    res = []
    zero = []
    for s in range(seed, seed + seeds):
        r, z = flow_ladder(s, levels)
        res.append(r)
        zero.append(z)
    med = np.median(np.array(res), axis=0)
    ok = bool(np.all(np.diff(med) <= 0) and med[-1] < med[0] and np.all(np.array(zero) == 0.0))
    return ok, "median residual %s; alpha = 0 max %g" % (", ".join("%.4f" % v for v in med), np.max(zero))


def inner_products(n=10_000, s=0.9999, seed=SEED):
    length = flow.abel_terms(s, 100.0) + 1
    rng = rngmod.stream(seed, 0, rngmod.AUX)
    w = rng.complex_normals(length)
    w2 = rng.complex_normals(length)
    same = flow.cesaro_inner(w[:n], w[:n]).value
    cross = flow.cesaro_inner(w[:n], w2[:n]).value
    abel_same = flow.abel_inner(w, w, s, flow.abel_terms(s, np.abs(w).max() ** 2)).value
    abel_cross = flow.abel_inner(w, w2, s, flow.abel_terms(s, np.abs(w * w2).max())).value
    N = length - 1
    holo = flow.holo_inner(w, w2, s, N=N).value
    matched = flow.abel_matched(w, w2, s, N=N).value
    holo_same = flow.holo_inner(w, w, s, N=N).value
    matched_same = flow.abel_matched(w, w, s, N=N).value
    e1 = max(abs(same - 1), abs(cross))
    e2 = max(abs(same - abel_same), abs(cross - abel_cross))
    e3 = max(abs(holo - matched), abs(holo_same - matched_same))
    ok = e1 <= 0.05 and e2 <= 0.05 and e3 <= 1e-10
    return ok, "|cesaro - delta| %.4f, |cesaro - abel| %.4f, |abel - holo| %.2e (N = %d)" % (e1, e2, e3, N)


def mp_sweep(count=100_000, c=0.01, seed=SEED):
    rng = rngmod.stream(seed, 0, rngmod.AUX)
    margin, c_max, bad = flow.mp_bound_sweep(count, rng, c)
    return bad == 0, "c = %g: %d failures, worst margin %.3e, largest passing c %.4f" % (c, bad, margin, c_max)


CRITERIA = [
    (1, "worked closed-form case", worked_case, 1, True),
    (2, "dense oracle equivalence", oracle_equivalence, 120, True),
    (3, "Haar trace moments", haar_traces, 120, True),
    (4, "sine-kernel pair correlation", pair_correlation, 300, False),
    (5, "gap probability", gap_check, 120, True),
    (6, "delocalization", delocalization, 180, True),
    (7, "coupled convergence", coupled_convergence, 600, False),
    (8, "martingale property", martingale, 120, True),
    (9, "flow residuals", flow_residuals, 300, False),
    (10, "inner products", inner_products, 60, True),
    (11, "M_p bound sweep", mp_sweep, 60, True),
]


def run_one(number, **kwargs):
    num, name, fn, limit, _ = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        ok, detail = fn(**kwargs)
    except VirtisoError as exc:
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    if dt > limit:
        ok = False
        detail += "; over the time limit"
    return Result(num, name, bool(ok), detail, dt, limit)


def run_all(quick=False, only=None, tol=None, echo=print):
    results = []
    for num, name, fn, limit, fast in CRITERIA:
        if only and num not in only:
            continue
        if quick and not fast:
            continue
        kwargs = {"tol": tol} if tol is not None and num in (1, 2) else {}
        r = run_one(num, **kwargs)
        if echo:
            echo(r.line())
        results.append(r)
    return results
