"""Command-line entry point: ``mixspec {simulate,estimate,bound,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage or domain error,
3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import bounds, harness, io
from .estimators import batch_estimate, data_budget
from .exceptions import DataFileError, DomainError, InsufficientDataError, MixspecError
from .mixing import MarkovChainModel, filter_profile, markov_profile, two_state_example
from .models import INNOVATIONS, simulate

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
PRESETS = {"two-state": two_state_example}

log = logging.getLogger("mixspec")


class UsageError(MixspecError):
    pass


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _ints(text):
    try:
        return [int(float(x)) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _echo(cmd, cfg):
    print(json.dumps({"command": cmd, **cfg}, default=str), file=sys.stderr)


def _model(args):
    if getattr(args, "model", None) and getattr(args, "preset", None):
        raise UsageError("give either --model or --preset, not both")
    if getattr(args, "model", None):
        return io.load_model(args.model)
    if getattr(args, "preset", None):
        return PRESETS[args.preset]()
    return None


def _add_model(p, required=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--model", help="model file (TOML with [markov] or [linear], or Markov CSV)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in model")


def _add_spec(p, defaults=True):
    p.add_argument("--method", choices=["bartlett", "welch"], default="bartlett" if defaults else None)
    p.add_argument("--segment-len", type=int, default=5 if defaults else None, help="samples per segment")
    p.add_argument("--hop", type=int, default=None, help="samples between segment starts (default: segment length)")
    p.add_argument("--window", default=None, help="rect, hann or a one-column CSV of weights (default rect)")


def _spec(args):
    return io.window_spec(args.method, args.segment_len, args.hop, args.window or "rect")


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    model = _model(args)
    if model is None:
        raise UsageError("simulate needs --model or --preset")
    _echo("simulate", {"model": args.model or args.preset, "n": args.n, "seed": args.seed,
                       "innovation": args.innovation, "out": args.out})
    y = simulate(model, args.n, args.seed, args.innovation)
    io.write_timeseries_csv(y, args.out)
    mean = y.data.mean(axis=0) if len(y) else np.zeros(y.n)
    print(f"samples: {len(y)}")
    print("mean: " + ", ".join(f"{m:.6g}" for m in mean))
    return EXIT_OK


def cmd_estimate(args) -> int:
    spec = _spec(args)
    y = io.read_timeseries_csv(args.input, header=args.header)
    M, K = spec.segment_len, spec.hop
    if args.segments is None:
        L = (len(y) - M) // K + 1 if len(y) >= M else 0
        if L < 1:
            raise InsufficientDataError(M, len(y))
    else:
        L = args.segments
        if L < 1:
            raise DomainError(f"--segments must be >= 1, got {L}")
    need = data_budget(L, M, K)
    if len(y) < need:
        raise InsufficientDataError(need, len(y))
    freqs = list(np.linspace(-0.5, 0.5, args.freq_grid)) if args.freq_grid else [args.freq]
    _echo("estimate", {"input": args.input, "method": spec.method, "segment_len": M, "hop": K,
                       "window": args.window or "rect", "freqs": [float(f) for f in freqs],
                       "segments": L, "out": args.out})
    ests = [batch_estimate(y, spec, s, L) for s in freqs]
    io.write_estimates_csv(ests, args.out)
    if y.n == 1 and len(ests) == 1:
        print(f"estimate at s={ests[0].freq:g} from {L} segments: {ests[0].value:.10g}")
    else:
        print(f"wrote {len(ests)} estimates from {L} segments to {args.out}")
    return EXIT_OK


def _profile(args):
    if args.profile:
        if args.model or args.preset:
            raise UsageError("give --profile or a model, not both")
        return io.read_profile_csv(args.profile)
    model = _model(args)
    if model is None:
        raise UsageError("bound needs --model, --preset or --profile")
    return markov_profile(model) if isinstance(model, MarkovChainModel) else filter_profile(model)


def cmd_bound(args) -> int:
    if not 0 < args.nu < 1:
        raise DomainError(f"--nu must lie in (0, 1), got {args.nu}")
    if args.k < 4:
        raise DomainError(f"--k must be >= 4: the deviation bound is only asserted for k >= 4 (got {args.k})")
    spec = _spec(args)
    profile = _profile(args)
    _echo("bound", {"profile": profile.label, "method": spec.method, "segment_len": spec.segment_len,
                    "hop": spec.hop, "q": args.q, "k": args.k, "nu": args.nu, "freq": args.freq,
                    "q_grid": args.q_grid, "tail_tol": args.tail_tol, "out": args.out})
    rep = bounds.bound_report(profile, spec, args.k, args.nu, args.q, args.freq, args.q_grid, args.tail_tol)
    print(rep.render())
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(bounds.REPORT_FIELDS)
            w.writerow([repr(x) if isinstance(x, float) else x for x in rep.row()])
    return EXIT_OK


def _verify_config(args):
    conf = io.load_config(args.config) if args.config else {}
    model = _model(args) or conf.get("model")
    if model is None:
        raise UsageError("verify needs a model (--model, --preset or config file)")
    pick = lambda flag, key, default=None: flag if flag is not None else conf.get(key, default)  # noqa: E731
    method = pick(args.method, "method", "bartlett")
    M = pick(args.segment_len, "segment_len", 5)
    spec = io.window_spec(method, M, pick(args.hop, "hop"), pick(args.window, "window", "rect"))
    seed = pick(args.seed, "seed")
    if seed is None:
        raise UsageError("verify requires --seed (or 'seed' in the config file)")
    if args.full_scale:
        checkpoints = harness.FULL_CHECKPOINTS
    else:
        checkpoints = pick(args.checkpoints, "checkpoints", harness.DESK_CHECKPOINTS)
    profile_path = pick(args.profile, "profile")
    profile = io.read_profile_csv(profile_path) if profile_path else None
    cfg = harness.ExperimentConfig(
        model=model,
        spec=spec,
        freq=pick(args.freq, "freq", 0.5),
        checkpoints=tuple(checkpoints),
        replications=pick(args.replications, "replications", 200),
        nu=pick(args.nu, "nu", 0.1),
        q_grid=tuple(pick(args.q_grid, "q_grid", bounds.DEFAULT_Q_GRID)),
        seed=int(seed),
        innovation=pick(args.innovation, "innovation", "gaussian"),
        profile=profile,
    )
    workers = int(pick(args.workers, "workers", 1))
    return cfg, workers, profile_path


def cmd_verify(args) -> int:
    cfg, workers, profile_path = _verify_config(args)
    _echo("verify", {"model": args.model or args.preset or args.config, "method": cfg.spec.method,
                     "segment_len": cfg.spec.segment_len, "hop": cfg.spec.hop, "freq": cfg.freq,
                     "checkpoints": list(cfg.checkpoints), "replications": cfg.replications, "nu": cfg.nu,
                     "q_grid": list(cfg.q_grid), "seed": cfg.seed, "profile": profile_path,
                     "workers": workers, "out": args.out})
    res = harness.run_experiment(cfg, workers=workers)
    harness.export_result(res, args.out)
    print(f"{'k':>9} {'median':>12} {'quantile':>12} {'max':>12} {'epsilon':>12} {'exceed':>6}")
    for i, k in enumerate(res.checkpoints):
        print(f"{k:>9d} {res.median[i]:>12.4e} {res.quantile[i]:>12.4e} {res.max[i]:>12.4e} "
              f"{res.epsilon[i]:>12.4e} {res.exceedances[i]:>6d}")
    print(f"bias bound: {res.bias_bound:.4e}   fit: c={res.fit.c:.4e} r={res.fit.r:.4f}")
    failing = res.failing_checkpoints()
    if failing:
        print(f"FAIL: (1-nu)-quantile error exceeds the radius at k = {failing}")
        return EXIT_VERIFY
    print(f"PASS: quantile error below the radius at every checkpoint (min margin {res.margin:.3g}x on max error)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixspec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated series to CSV")
    _add_model(p)
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--innovation", choices=INNOVATIONS, default="gaussian", help="linear models only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Bartlett/Welch estimate of a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--header", action="store_true", help="skip one header line")
    p.add_argument("--method", choices=["bartlett", "welch"], required=True)
    p.add_argument("--segment-len", type=int, required=True)
    p.add_argument("--hop", type=int, default=None)
    p.add_argument("--window", default=None, help="rect, hann or a one-column CSV of weights")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--freq", type=float, default=0.5, help="normalized frequency in [-1/2, 1/2]")
    g.add_argument("--freq-grid", type=int, default=None, help="G equispaced frequencies on [-1/2, 1/2]")
    p.add_argument("--segments", type=int, default=None, help="segment count (default: all complete segments)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", help="print the error certificates")
    _add_model(p)
    p.add_argument("--profile", help="CSV of q,M_q,Gamma_dq[,gamma_0,...] instead of a model")
    _add_spec(p)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--k", type=int, required=True, help="segment count (>= 4)")
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--freq", type=float, default=0.5)
    p.add_argument("--q-grid", type=_floats, default=list(bounds.DEFAULT_Q_GRID))
    p.add_argument("--tail-tol", type=float, default=1e-12)
    p.add_argument("--out", help="write the report as a CSV row")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="replicated experiment against the certificates")
    p.add_argument("--config", help="experiment TOML file; flags override it")
    _add_model(p)
    p.add_argument("--profile", default=None, help="override the model's mixing profile with a CSV table")
    _add_spec(p, defaults=False)
    p.add_argument("--freq", type=float, default=None)
    p.add_argument("--checkpoints", type=_ints, default=None, help="comma-separated segment counts")
    p.add_argument("--full-scale", action="store_true", help="extend checkpoints to 10^7 segments")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--q-grid", type=_floats, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--innovation", choices=INNOVATIONS, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="result CSV")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (InsufficientDataError, DataFileError) as exc:
        print(f"mixspec {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MixspecError as exc:
        print(f"mixspec {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mixspec {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
