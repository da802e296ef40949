"""Command line: simulate, ensemble, stats, flow and verify.

Exit codes: 0 success, 1 acceptance or run failure, 2 configuration error.
"""
import argparse
import json
import logging
import sys

import numpy as np

from . import acceptance, haar, stats
from .errors import ConfigError, VirtisoError
from .runner import RunConfig, run_ensemble, run_trajectory

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("MATRIX", "COEFF"), type=str.upper, default="COEFF")
    p.add_argument("--nmax", type=int, default=256)
    p.add_argument("--L", type=int, default=8)
    p.add_argument("--out", default=None, help="output directory (default $VIRTISO_OUT or ./virtiso-out)")
    p.add_argument("--tol", type=float, default=None, help="secular tolerance")
    p.add_argument("--window", default=None, help="comma-separated signed indices, e.g. -2,-1,1,2")


def _config(args, **extra):
    cfg = RunConfig(seed=args.seed, mode=args.mode, n_max=args.nmax, L=args.L, out=args.out, **extra)
    if args.tol is not None:
        cfg.secular_tol = args.tol
    if args.window:
        try:
            cfg.window = tuple(int(k) for k in args.window.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad window {args.window!r}") from exc
    return cfg.validate()


def cmd_simulate(args):
    cfg = _config(args, oracle=args.oracle)
    tr = run_trajectory(cfg, resume=not args.fresh)
    print(f"seed {cfg.seed}: reached n = {tr.n}; files in {cfg.outdir()}")
    for k, p in sorted(tr.paths.items()):
        if p.samples:
            s = p.samples[-1]
            print(f"  k = {k:3d}  y = {s.scaled_angle:.6f}  |D|^2/n = {s.abs_D ** 2 / s.n:.6f}")
    return EXIT_OK


def cmd_ensemble(args):
    cfg = _config(args, size=args.size, workers=args.workers, trajectories=args.trajectories)
    res = run_ensemble(cfg)
    print(f"{cfg.size - len(res['failed'])} of {cfg.size} seeds completed; reports in {cfg.outdir()}")
    for f in res["failed"]:
        print(f"  seed {f['seed']} failed: {f['error']}")
    return EXIT_FAIL if res["failed"] else EXIT_OK


def cmd_stats(args):
    cfg = _config(args)
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    n = cfg.n_max
    ang = haar.angle_samples(cfg.seed, args.samples, n)
    meta = {"seed": cfg.seed, "samples": args.samples, "n": n, "config_hash": cfg.digest()}
    jmax = min(args.jmax, n // 2)
    if jmax:
        rows = stats.trace_moments(ang, jmax)
        stats.write_csv(out / "trace_moments.csv", ["j", "mean", "stderr", "target"], [r + (r[0],) for r in rows], meta)
        for j, m, se in rows:
            print(f"  E|tr u^{j}|^2 = {m:.4f} +- {se:.4f}  (target {j})")
    if args.samples >= 1000 and n >= 2:
        pts = np.array([stats.scaled_points(a) for a in ang])
        h = stats.empirical_pair_correlation(pts, window=args.window_width, width=args.bin)
        th = h.theory()
        stats.write_csv(
            out / "pair_correlation.csv",
            ["lo", "hi", "density", "stderr", "theory"],
            [(h.edges[i], h.edges[i + 1], h.density[i], h.sigma[i], th[i]) for i in range(th.size)],
            dict(meta, bin_width=args.bin),
        )
        print(f"  pair correlation: max |empirical - theory| = {np.abs(h.density - th).max():.4f}")
    print(f"tables in {out}")
    return EXIT_OK


def cmd_flow(args):
    cfg = _config(args)
    levels = [n for n in (64, 128, 256, 512, 1024, 2048) if 2 * n <= cfg.n_max]
    if not levels:
        raise ConfigError("flow needs --nmax of at least 128")
    res, _ = acceptance.flow_ladder(cfg.seed, levels, top=cfg.n_max, alpha=args.alpha, k=args.k)
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    stats.write_csv(
        out / f"flow-{cfg.seed}.csv",
        ["n", "residual"],
        list(zip(levels, res)),
        {"seed": cfg.seed, "alpha": args.alpha, "k": args.k, "top": cfg.n_max, "config_hash": cfg.digest()},
    )
    for n, r in zip(levels, res):
        print(f"  n = {n:5d}  residual {r:.5f}")
    return EXIT_OK


def cmd_verify(args):
    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = acceptance.run_all(quick=args.quick, only=only, tol=args.tol)
    passed = sum(r.passed for r in results)
    print(f"{passed} of {len(results)} criteria passed")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.__dict__ for r in results], fh, indent=1)
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def parser():
    p = argparse.ArgumentParser(prog="virtiso", description="Eigenvalue recursion along random unitary towers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one trajectory")
    _common(s)
    s.add_argument("--oracle", action="store_true", help="compare every step with a dense eigensolver")
    s.add_argument("--fresh", action="store_true", help="ignore existing checkpoints")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("ensemble", help="run many seeds and merge statistics")
    _common(e)
    e.add_argument("--size", type=int, default=16)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--trajectories", action="store_true", help="also write per-seed trajectory files")
    e.set_defaults(func=cmd_ensemble)

    t = sub.add_parser("stats", help="batched angle samples: trace moments and pair correlation")
    _common(t)
    t.add_argument("--samples", type=int, default=10_000)
    t.add_argument("--jmax", type=int, default=5)
    t.add_argument("--bin", type=float, default=0.25)
    t.add_argument("--window-width", type=float, default=4.0)
    t.set_defaults(func=cmd_stats)

    f = sub.add_parser("flow", help="flow residuals of one eigenpath")
    _common(f)
    f.add_argument("--alpha", type=float, default=0.5)
    f.add_argument("--k", type=int, default=1)
    f.set_defaults(func=cmd_flow)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true", help="skip the three slow criteria")
    v.add_argument("--only", default=None, help="comma-separated criterion numbers")
    v.add_argument("--tol", type=float, default=None, help="secular tolerance for the oracle criteria")
    v.add_argument("--json", default=None, help="write results to this file")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if getattr(args, "nmax", 1) < 1:
            raise ConfigError("--nmax must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VirtisoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
