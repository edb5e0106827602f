"""Command line entry point: generate, preprocess, train, eval, gradcheck."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}") from None
    return w, h


def cmd_generate(args):
    from .dataset import GenerationConfig, generate_dataset

    w, h = args.size
    cfg = GenerationConfig(count=args.count, width=w, height=h, times=args.times,
                           weathers=args.weathers, seed=args.seed, sampling=args.sampling,
                           workers=args.workers)
    manifest = generate_dataset(cfg, args.out)
    print(f"wrote {len(manifest)} frames to {args.out}")


def cmd_preprocess(args):
    from .dataset import preprocess_dataset

    manifest = preprocess_dataset(args.inp, args.out, args.mode)
    print(f"wrote {len(manifest)} {args.mode} frames to {args.out}")


def cmd_train(args):
    from .training import TrainConfig, train

    cfg = TrainConfig(data_dir=args.data, epochs=args.epochs, batch_size=args.batch,
                      base_lr=args.lr, decay_every=args.decay_every, alpha=args.alpha,
                      num_scales=args.scales, channels=args.channels, blocks=args.blocks,
                      ratio=args.ratio, seed=args.seed, mode=args.mode)
    log_path = args.log or args.out + ".log.txt"
    result = train(cfg, log_path=log_path, checkpoint_path=args.out)
    last = result.log_rows[-1]
    print(f"trained {result.iteration} iterations; final L_SI={last[2]:.6f} "
          f"L_TV={last[3]:.6f} L_Total={last[4]:.6f}; checkpoint {args.out}, log {log_path}")


def cmd_eval(args):
    from .training import evaluate_checkpoint

    dims = None if args.channels is None else (args.channels, args.blocks, args.ratio)
    report = evaluate_checkpoint(args.ckpt, args.data, expected_dims=dims)
    print(report.format_table())


def cmd_gradcheck(args):
    from .nnet import model_gradcheck
    from .objectives import finite_diff_check, si_loss, tv_loss

    rng = np.random.default_rng(args.seed)
    worst_si = worst_tv = 0.0
    for _ in range(args.trials):
        log_gt = rng.uniform(np.log(0.5), np.log(2000.0), size=(16, 16))
        log_pred = log_gt + 0.01 * rng.standard_normal((16, 16))
        worst_si = max(worst_si, finite_diff_check(si_loss, log_pred, log_gt))
        worst_tv = max(worst_tv, finite_diff_check(lambda p, g: tv_loss(p, g, 3), log_pred, log_gt))
    worst_model = model_gradcheck(rng)
    ok = worst_si < 1e-5 and worst_tv < 1e-5 and worst_model < 1e-4
    print(f"si_loss   max rel err {worst_si:.3e}  (bound 1e-5)")
    print(f"tv_loss   max rel err {worst_tv:.3e}  (bound 1e-5)")
    print(f"model     max rel err {worst_model:.3e}  (bound 1e-4)")
    if not ok:
        raise RuntimeError("gradient check failed")


def build_parser():
    p = argparse.ArgumentParser(prog="gamedepth", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic RGB + depth dataset")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=_size, default=(64, 64))
    g.add_argument("--times", type=_floats, default=(12.0,))
    g.add_argument("--weathers", type=_names, default=("sunny",))
    g.add_argument("--sampling", choices=("cartesian", "sampled"), default="cartesian")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    pp = sub.add_parser("preprocess", help="write a normalised copy of a dataset")
    pp.add_argument("--mode", choices=("histeq", "log", "standardize"), required=True)
    pp.add_argument("--in", dest="inp", required=True)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_preprocess)

    t = sub.add_parser("train", help="train the residual depth network")
    t.add_argument("--data", required=True)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--lr", type=float, default=4e-4)
    t.add_argument("--decay-every", type=int, default=200)
    t.add_argument("--alpha", type=float, default=0.5)
    t.add_argument("--scales", type=int, default=3)
    t.add_argument("--channels", type=int, default=16)
    t.add_argument("--blocks", type=int, default=4)
    t.add_argument("--ratio", type=int, default=4, choices=(1, 2, 4))
    t.add_argument("--mode", choices=("standardize", "histeq", "log"), default="standardize")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log", default=None, help="loss log path (default: CKPT.log.txt)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--channels", type=int, default=None,
                   help="expected model width; with --blocks/--ratio, checked against the checkpoint")
    e.add_argument("--blocks", type=int, default=4)
    e.add_argument("--ratio", type=int, default=4)
    e.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    gc.add_argument("--trials", type=int, default=10)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"gamedepth {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
