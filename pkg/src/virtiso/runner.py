"""Configuration, trajectories, checkpoints and ensembles."""
import hashlib
import json
import logging
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import haar, rng as rngmod, stats
from .eigenpath import WINDOW, EigenPath, first_dimension
from .errors import ConfigError, VirtisoError
from .secular import DEFAULT_TOL, Mode, decompose_in_eigenbasis, initial_state, step, to_coords

log = logging.getLogger("virtiso")

OUT_ENV = "VIRTISO_OUT"
MATRIX_LIMIT = 512
L_LIMIT = 64
MODES = ("MATRIX", "COEFF")


@dataclass
class RunConfig:
    seed: int = 0
    mode: str = "COEFF"
    n_max: int = 256
    window: tuple = WINDOW
    L: int = 8
    secular_tol: float = DEFAULT_TOL
    ortho_tol: float = 1e-10
    eps: float = 0.1
    out: str | None = None
    size: int = 1
    workers: int = 1
    oracle: bool = False
    trajectories: bool = True

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")
        if self.mode == "MATRIX" and self.n_max > MATRIX_LIMIT:
            raise ConfigError(f"MATRIX mode is limited to n_max <= {MATRIX_LIMIT}")
        if not 0 <= self.L <= L_LIMIT:
            raise ConfigError(f"L must lie in [0, {L_LIMIT}]")
        if self.size < 1 or self.workers < 1:
            raise ConfigError("ensemble size and workers must be positive")
        if self.oracle and self.mode != "MATRIX":
            raise ConfigError("the dense oracle needs MATRIX mode")
        if not 0 < self.secular_tol < 1:
            raise ConfigError("secular_tol must lie in (0, 1)")
        if 0 in self.window:
            raise ConfigError("index 0 is not in the window")
        self.window = tuple(int(k) for k in self.window)
        return self

    def outdir(self):
        return Path(self.out or os.environ.get(OUT_ENV) or "virtiso-out")

    def as_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def digest(self, exclude=()):
        # where the files land does not change what they hold
        d = {k: v for k, v in self.as_dict().items() if k not in exclude and k != "out"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def trajectory_key(self):
        """Hash of everything that determines the trajectory itself; n_max excluded so runs can extend."""
        return self.digest(exclude=("n_max", "out", "size", "workers", "trajectories", "oracle", "eps", "ortho_tol"))


def build_id():
    """Hash of the package sources, stable within one build."""
    h = hashlib.sha256()
    root = Path(__file__).parent
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def angles_digest(angles):
    return hashlib.sha256(np.ascontiguousarray(angles, dtype=np.float64).tobytes()).hexdigest()[:16]


def is_milestone(n):
    return n & (n - 1) == 0


def oracle_check(u, before, after):
    """Dense-eigensolver comparison for one MATRIX step.

    Returns angle error, phase-aligned eigenvector error, interlacing
    violations and the second singular value of u_{n+1} - diag(u_n, 1)
    rebuilt from the recursion.
    """
    w, V = np.linalg.eig(u)
    ang = np.mod(np.angle(w), 2 * np.pi)
    order = np.argsort(ang)
    ang = ang[order]
    V = V[:, order]
    F = after.vectors
    ph = np.sum(V.conj() * F, axis=0)
    ph /= np.abs(ph)
    vec_err = float(np.abs(F - V * ph).max())
    t = after.angles
    old = before.angles
    bad = int(np.sum(t[:-1] >= old) + np.sum(old >= t[1:]) + (t[0] <= 0) + (t[-1] >= 2 * np.pi))
    n = before.n
    prev = np.eye(n + 1, dtype=np.complex128)
    prev[:n, :n] = before.matrix()
    sv = np.linalg.svd(after.matrix() - prev, compute_uv=False)
    return {
        "angle_err": float(np.abs(ang - t).max()),
        "vector_err": vec_err,
        "interlace_violations": bad,
        "sigma2": float(sv[1]) if sv.size > 1 else 0.0,
    }


@dataclass(eq=False)
class Trajectory:
    """One tower followed by the recursion, with eigenpaths on a window of indices."""

    seed: int
    mode: str = "COEFF"
    L: int = 8
    window: tuple = WINDOW
    tol: float = DEFAULT_TOL
    eps: float = 0.1
    oracle: bool = False
    history: bool = False
    impl: str | None = None
    state: object = None
    tower: object = None
    paths: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def __post_init__(self):
        if self.state is not None:
            return
        if self.mode == "MATRIX":
            self.tower = haar.MatrixTower(self.seed)
            u1 = self.tower.step()[0, 0]
            self.state = initial_state(u1, Mode.FULL)
        else:
            u1 = haar.sample_sphere(1, rngmod.stream(self.seed, 0, rngmod.SPHERE))[0]
            self.state = initial_state(u1, Mode.FULL if self.L else Mode.NONE)
        self.paths = {k: EigenPath(k, self.L, keep=False) for k in self.window}
        self._start_paths()
        self._snapshot()

    @property
    def n(self):
        return self.state.n

    def _start_paths(self):
        for k, p in self.paths.items():
            if first_dimension(k) == self.n:
                p.start(self.state)

    def _snapshot(self):
        if is_milestone(self.n):
            self.snapshots[self.n] = {k: p.samples[-1] for k, p in self.paths.items() if p.samples}

    def coeffs(self):
        if self.mode == "MATRIX":
            self.tower.step()
            return decompose_in_eigenbasis(self.tower.last_column, self.state)
        return haar.coeffs_for_step(self.seed, self.n)

    def advance(self):
        before = self.state
        n = before.n
        coeffs = self.coeffs()
        after, report = step(before, coeffs, self.tol, self.impl)
        diag = {
            "max_resid": float(report.residuals.max()),
            "mean_iters": float(report.iterations.mean()),
            "min_offset": float(np.minimum(report.xl, -report.xr).min()),
        }
        if self.oracle:
            diag.update(oracle_check(self.tower.u, before, after))
        flags = stats.event_flags(n, before.angles, coeffs.mu, coeffs.nu, self.eps)
        self.events.append(flags)
        if self.history:
            self.steps[n] = (before.angles, coeffs.mu, report)
        for p in self.paths.values():
            if p.samples:
                p.record_step(before, after, coeffs, report)
        if self.mode == "COEFF" and after.mode is Mode.FULL and after.n >= self.L:
            after = to_coords(after, self.L)
        self.state = after
        self._start_paths()
        self._snapshot()
        return self.row(diag, flags)

    def row(self, diag=None, flags=None):
        per_k = {}
        for k, p in self.paths.items():
            if not p.samples:
                continue
            s = p.samples[-1]
            entry = {"y": s.scaled_angle, "log_abs_D": p.log_abs_D, "arg_D": float(np.angle(p.phase)), "ratio": s.ratio}
            if s.g.size:
                entry["g"] = [[float(z.real), float(z.imag)] for z in s.g[:2]]
            per_k[str(k)] = entry
        row = {"n": self.n, "angles_digest": angles_digest(self.state.angles), "k": per_k}
        if diag is not None:
            row["diagnostics"] = dict(diag, events=[flags.e0, flags.e1, flags.e2, flags.e3_low, flags.e3_high])
        return row

    def run(self, n_max):
        while self.n < n_max:
            yield self.advance()


def _dump(row):
    return json.dumps(_clean(row), allow_nan=False, separators=(",", ":"))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def metadata(config, **extra):
    return {
        "seed": config.seed,
        "generator": rngmod.GENERATOR_NAME,
        "mode": config.mode,
        "n_max": config.n_max,
        "build_id": build_id(),
        "config_hash": config.digest(),
        "config": config.as_dict(),
        **extra,
    }


def _paths(config):
    d = config.outdir()
    return d / f"trajectory-{config.seed}.jsonl", d / f"checkpoint-{config.seed}.pkl", d / f"trajectory-{config.seed}.json"


def _load_checkpoint(path, config):
    try:
        with open(path, "rb") as fh:
            key, traj = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError):
        return None
    if key != config.trajectory_key() or traj.n > config.n_max:
        return None
    return traj


def _save_checkpoint(path, config, traj):
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump((config.trajectory_key(), traj), fh)
    os.replace(tmp, path)


def run_trajectory(config, write=True, resume=True, history=False):
    """Run one tower to config.n_max and return the Trajectory.

    With ``write`` the JSONL rows, a metadata JSON and a checkpoint at every
    power of two land in the output directory.  An existing checkpoint with
    the same trajectory key is resumed; the rows after it are regenerated.
    """
    config.validate()
    traj = None
    jsonl, ckpt, meta = _paths(config)
    rows = []
    if write:
        jsonl.parent.mkdir(parents=True, exist_ok=True)
        if resume and ckpt.exists() and not history:
            traj = _load_checkpoint(ckpt, config)
        if traj is not None:
            with open(jsonl) as fh:
                rows = [ln for ln in fh.read().splitlines()[1:] if json.loads(ln)["n"] <= traj.n]
            log.info("seed %d: resumed at n = %d", config.seed, traj.n)
    if traj is None:
        traj = Trajectory(
            config.seed, config.mode, config.L, config.window, config.secular_tol, config.eps, config.oracle, history
        )
        rows = [_dump(traj.row())]
    header = _dump({"meta": {"config_hash": config.digest(), "build_id": build_id(), "seed": config.seed}})
    t0 = time.perf_counter()
    fh = None
    if write:
        fh = open(jsonl, "w")
        fh.write(header + "\n")
        fh.writelines(r + "\n" for r in rows)
    try:
        for row in traj.run(config.n_max):
            n = row["n"]
            if write:
                fh.write(_dump(row) + "\n")
            if is_milestone(n):
                log.info("seed %d: n = %d after %.3f s", config.seed, n, time.perf_counter() - t0)
                if write:
                    fh.flush()
                    _save_checkpoint(ckpt, config, traj)
            if config.oracle:
                check_oracle_row(row, config)
    except VirtisoError as exc:
        raise type(exc)(f"seed {config.seed}, dimension {traj.n}: {exc}") from exc
    finally:
        if fh is not None:
            fh.close()
    if write:
        summary = stats.summarize_events(traj.events)
        with open(meta, "w") as fh2:
            json.dump(_clean(metadata(config, final_n=traj.n, events=summary)), fh2, indent=1, sort_keys=True)
    return traj


ORACLE_LIMITS = {"angle_err": 1e-9, "vector_err": 1e-7, "interlace_violations": 0, "sigma2": 1e-10}


class OracleMismatch(VirtisoError):
    pass


def check_oracle_row(row, config):
    d = row["diagnostics"]
    for key, lim in ORACLE_LIMITS.items():
        if d[key] > lim:
            raise OracleMismatch(f"{key} = {d[key]:.3g} exceeds {lim} at n = {row['n']}")


@dataclass
class SeedResult:
    seed: int
    traces: stats.BinStats
    pairs: stats.BinStats
    events: dict
    paths: list
    error: str | None = None


def _pair_edges(width=0.25, window=4.0):
    return np.arange(0.0, window + width / 2, width)


def _seed_task(args):
    config, seed = args
    cfg = RunConfig(**dict(config.as_dict(), seed=seed))
    cfg.window = tuple(cfg.window)
    n = cfg.n_max
    jmax = n // 2
    try:
        traj = run_trajectory(cfg, write=cfg.trajectories)
    except VirtisoError as exc:
        return SeedResult(seed, None, None, {}, [], f"{type(exc).__name__}: {exc}")
    th = traj.state.angles
    tr = stats.BinStats.empty(jmax).add(np.abs(np.exp(1j * np.outer(np.arange(1, jmax + 1), th)).sum(axis=1)) ** 2)
    edges = _pair_edges()
    pr = stats.BinStats.empty(edges.size - 1).add(stats.pair_counts(stats.scaled_points(th), edges))
    rows = []
    for k, p in traj.paths.items():
        if p.samples:
            s = p.samples[-1]
            g = complex(s.g[0]) if s.g.size else complex("nan")
            rows.append((seed, k, s.n, s.scaled_angle, s.abs_D**2 / s.n, g.real, g.imag))
    return SeedResult(seed, tr, pr, stats.summarize_events(traj.events), rows)


def run_ensemble(config):
    """Run seeds config.seed .. config.seed + size - 1 and merge their statistics.

    Results are merged in seed order, so the merged files do not depend on
    the number of workers.  Failed seeds are listed, not fatal.
    """
    config.validate()
    seeds = range(config.seed, config.seed + config.size)
    tasks = [(config, s) for s in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            results = list(ex.map(_seed_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        results = [_seed_task(t) for t in tasks]
    good = [r for r in results if r.error is None]
    failed = [{"seed": r.seed, "error": r.error} for r in results if r.error is not None]
    jmax = config.n_max // 2
    traces = stats.BinStats.empty(jmax)
    edges = _pair_edges()
    pairs = stats.BinStats.empty(edges.size - 1)
    events = {}
    for r in good:
        traces = traces.merge(r.traces)
        pairs = pairs.merge(r.pairs)
        for name, v in r.events.items():
            e = events.setdefault(name, {"violations": 0, "seeds": 0})
            e["violations"] += v["violations"]
            e["seeds"] += v["violations"] > 0
    out = config.outdir()
    out.mkdir(parents=True, exist_ok=True)
    meta = metadata(config, seeds=[config.seed, config.seed + config.size - 1], completed=len(good))
    head = {"config_hash": meta["config_hash"], "build_id": meta["build_id"],
            "seeds": f"{config.seed}..{config.seed + config.size - 1}", "n": config.n_max}
    if good and jmax:
        stats.write_csv(
            out / "trace_moments.csv",
            ["j", "mean", "stderr", "target"],
            [(j + 1, m, s, j + 1) for j, (m, s) in enumerate(zip(traces.mean, traces.stderr))],
            head,
        )
    if good:
        theory = stats.pair_correlation_theory(edges)
        stats.write_csv(
            out / "pair_correlation.csv",
            ["lo", "hi", "density", "stderr", "theory"],
            [(edges[i], edges[i + 1], pairs.mean[i], pairs.stderr[i], theory[i]) for i in range(theory.size)],
            dict(head, bin_width=0.25),
        )
        stats.write_csv(
            out / "paths.csv",
            ["seed", "k", "n", "y", "D2_over_n", "g_re", "g_im"],
            [row for r in good for row in r.paths],
            head,
        )
    report = dict(meta, events=events, failed=failed)
    with open(out / "ensemble.json", "w") as fh:
        json.dump(_clean(report), fh, indent=1, sort_keys=True)
    return {"traces": traces, "pairs": pairs, "events": events, "failed": failed, "results": results}
