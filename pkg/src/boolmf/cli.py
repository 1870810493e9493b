"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 size/limit error, 3 no convergence
(only with ``--strict``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import boolean_product, reconstruction_error
from .engine import TABLES, EngineConfig, run_map
from .errors import BoolMFError, InstanceTooLargeError
from .formats import (
    ingest_ratings,
    load_observation,
    message_histogram,
    read_pbm,
    read_ratings,
    read_triplets,
    split_observation,
    write_dense,
    write_histogram_csv,
    write_marginals_csv,
    write_pbm,
    write_sweep_csv,
    write_triplets,
)
from .marginal import VARIANTS, DecimationConfig, run_marginal_map
from .model import Channel, Observation, Priors, posterior_log_score
from .oracle import exact_map, exact_marginals
from .synth import SweepGrid, run_sweep

log = logging.getLogger("boolmf")

EXIT_OK, EXIT_INPUT, EXIT_LIMIT, EXIT_NONCONVERGED = 0, 1, 2, 3


def parse_channel(text: str) -> Channel:
    """``symmetric:c`` or ``table:p00,p10,pE0,p01,p11,pE1`` (``pOZ = P(o | z)``)."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "symmetric":
            return Channel.symmetric(float(rest))
        if kind == "table":
            return Channel.from_values(rest.replace(",", " ").split())
    except ValueError as exc:
        raise BoolMFError(f"bad channel {text!r}: {exc}") from None
    raise BoolMFError(f"bad channel {text!r}; use symmetric:c or table:<6 values>")


def _engine_args(p, rank_required=True):
    p.add_argument("--rank", "-k", type=int, required=rank_required, help="number of factors K")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--damping", type=float, default=0.4)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--prior-x", type=float, default=0.5)
    p.add_argument("--prior-y", type=float, default=0.5)
    p.add_argument("--channel", default="symmetric:0.9", type=parse_channel)
    p.add_argument("--mode", choices=("map", "marginal"), default="map")
    p.add_argument("--decimation-batch", type=int, default=1)
    p.add_argument("--sp-variant", choices=VARIANTS, default="derived",
                   help="sum-product constraint-message form (marginal mode)")
    p.add_argument("--threads", type=int, default=1, help="worker cap")
    p.add_argument("--strict", action="store_true", help="exit 3 if BP does not converge")


def _config(args, rank=None):
    return EngineConfig(rank=rank if rank is not None else args.rank,
                        max_iters=args.max_iters, damping=args.damping, eps=args.eps,
                        seed=args.seed, init_scale=args.init_scale)


def _solve(args, obs):
    pr = Priors(args.prior_x, args.prior_y)
    cfg = _config(args)
    if args.mode == "map":
        return run_map(obs, pr, args.channel, cfg)
    return run_marginal_map(obs, pr, args.channel, cfg,
                            DecimationConfig(batch=args.decimation_batch),
                            variant=args.sp_variant)


def _write_result(out_dir: Path, res, image=False):
    out_dir.mkdir(parents=True, exist_ok=True)
    Zhat = boolean_product(res.X, res.Y)
    write_dense(out_dir / "X.txt", res.X)
    write_dense(out_dir / "Y.txt", res.Y)
    write_dense(out_dir / "Z.txt", Zhat)
    if image:
        write_pbm(out_dir / "Z.pbm", Zhat)
    with open(out_dir / "marginals_x.csv", "w", newline="") as fh:
        write_marginals_csv(fh, res.gamma_x, ("m", "k", "gamma"))
    with open(out_dir / "marginals_y.csv", "w", newline="") as fh:
        write_marginals_csv(fh, res.gamma_y, ("k", "n", "gamma"))
    return Zhat


def _summary(path: Path, data):
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    path.write_text(text)
    sys.stdout.write(text)


def _finish(args, res):
    if args.strict and not res.converged:
        log.error("message passing did not converge")
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_factorize(args):
    obs = load_observation(args.input)
    if len(obs) != obs.shape[0] * obs.shape[1]:
        raise BoolMFError("factorize expects a fully observed matrix; use 'complete'")
    res = _solve(args, obs)
    Z = obs.to_dense().astype(np.uint8)
    out = Path(args.out_dir)
    Zhat = _write_result(out, res, image=str(args.input).lower().endswith(".pbm"))
    _summary(out / "summary.json", {
        "mode": args.mode,
        "rank": args.rank,
        "iterations": res.iterations_run,
        "converged": bool(res.converged),
        "reconstruction_error": reconstruction_error(Z, Zhat),
    })
    return _finish(args, res)


def cmd_complete(args):
    obs = load_observation(args.input)
    res = _solve(args, obs)
    out = Path(args.out_dir)
    Zhat = _write_result(out, res, image=args.image)
    summary = {
        "mode": args.mode,
        "rank": args.rank,
        "observed": len(obs),
        "iterations": res.iterations_run,
        "converged": bool(res.converged),
        "train_error": float(np.mean(Zhat[obs.rows, obs.cols] != obs.values)),
    }
    if args.test:
        test = read_triplets(args.test)
        if test.shape != obs.shape:
            raise BoolMFError(f"test grid {test.shape} differs from {obs.shape}")
        summary["test_entries"] = len(test)
        summary["test_error"] = (float(np.mean(Zhat[test.rows, test.cols] != test.values))
                                 if len(test) else 0.0)
    _summary(out / "summary.json", summary)
    return _finish(args, res)


def _load_sweep_config(path, args):
    cfg = json.loads(Path(path).read_text())
    try:
        grid = SweepGrid(
            M=int(cfg["M"]), N=int(cfg["N"]),
            ranks=tuple(int(k) for k in cfg["ranks"]),
            obs_fractions=tuple(float(f) for f in cfg["obs_fractions"]),
            repeats=int(cfg.get("repeats", 10)),
            channel=parse_channel(cfg.get("channel", "symmetric:0.9")),
            seed=int(cfg.get("seed", args.seed)),
        )
    except (KeyError, TypeError) as exc:
        raise BoolMFError(f"sweep config {path}: missing or invalid field {exc}") from None
    engine = EngineConfig(
        rank=grid.ranks[0],
        max_iters=int(cfg.get("max_iters", args.max_iters)),
        damping=float(cfg.get("damping", args.damping)),
        eps=float(cfg.get("eps", args.eps)),
        init_scale=float(cfg.get("init_scale", args.init_scale)),
    )
    return grid, engine


def cmd_sweep(args):
    grid, engine = _load_sweep_config(args.config, args)
    rows = run_sweep(grid, engine, threads=args.threads)
    if args.out == "-":
        write_sweep_csv(sys.stdout, rows)
    else:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(fh, rows)
    return EXIT_OK


def cmd_oracle_check(args):
    obs = load_observation(args.input)
    pr = Priors(args.prior_x, args.prior_y)
    K = args.rank
    X, Y, best, unique = exact_map(obs, K, pr, args.channel)
    res = _solve(args, obs)
    score = posterior_log_score(res.X, res.Y, obs, pr, args.channel)
    report = {
        "mode": args.mode,
        "rank": K,
        "engine_score": score,
        "oracle_score": best,
        "oracle_unique": bool(unique),
        "map_agree": bool(score >= best - 1e-6),
        "engine_converged": bool(res.converged),
    }
    if args.mode == "marginal":
        gx, gy = exact_marginals(obs, K, pr, args.channel)
        report["marginal_sign_agree"] = bool(
            np.array_equal(gx > 0, res.X == 1) and np.array_equal(gy > 0, res.Y == 1))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ingest(args):
    if args.ratings:
        train, test = ingest_ratings(read_ratings(args.ratings), args.alpha, args.seed)
    else:
        full = Observation.full(read_pbm(args.image))
        train, test = split_observation(full, args.alpha, args.seed)
    write_triplets(args.train, train)
    write_triplets(args.test, test)
    sys.stdout.write(f"grid {train.shape[0]}x{train.shape[1]}: "
                     f"{len(train)} train, {len(test)} test\n")
    return EXIT_OK


def cmd_diag(args):
    obs = load_observation(args.input)
    pr = Priors(args.prior_x, args.prior_y)
    wanted = sorted(set(args.at))
    snapshots = []

    def grab(state):
        if state.t in wanted:
            snapshots.append((state.t, message_histogram(state, args.bins, args.table)))

    res = run_map(obs, pr, args.channel, _config(args), callback=grab)
    if not snapshots or snapshots[-1][0] != res.iterations_run:
        snapshots.append((res.iterations_run,
                          message_histogram(res.state, args.bins, args.table)))
    with open(args.out, "w", newline="") as fh:
        write_histogram_csv(fh, snapshots)
    return _finish(args, res)


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1); exit 2 is kept for size limits."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="boolmf",
        description="Boolean matrix factorization and completion by message passing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="factorize a fully observed matrix")
    p.add_argument("input", help="dense matrix text or .pbm bitmap")
    p.add_argument("--out-dir", "-o", required=True)
    _engine_args(p)
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("complete", help="complete a sparsely observed matrix")
    p.add_argument("input", help="triplet file (or dense/.pbm)")
    p.add_argument("--out-dir", "-o", required=True)
    p.add_argument("--test", help="held-out triplet file to score")
    p.add_argument("--image", action="store_true", help="also write Z.pbm")
    _engine_args(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("sweep", help="completion phase sweep from a JSON grid")
    p.add_argument("config")
    p.add_argument("--out", "-o", default="-")
    _engine_args(p, rank_required=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle-check", help="compare the engine with exhaustive search")
    p.add_argument("input")
    p.add_argument("--out", "-o")
    _engine_args(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("ingest", help="split ratings or a bitmap into train/test triplets")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ratings", help="tab-separated user item rating timestamp")
    src.add_argument("--image", help="plain PBM bitmap")
    p.add_argument("--alpha", type=float, required=True, help="observed fraction in (0, 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("diag", help="histogram of max-sum messages at chosen iterations")
    p.add_argument("input")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--table", choices=TABLES, default="ahat", help="message table to histogram")
    p.add_argument("--at", type=lambda s: [int(x) for x in s.split(",")],
                   default=[2, 20, 200], help="comma-separated iterations to snapshot")
    _engine_args(p)
    p.set_defaults(func=cmd_diag)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InstanceTooLargeError as exc:
        log.error("%s", exc)
        return EXIT_LIMIT
    except (BoolMFError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
