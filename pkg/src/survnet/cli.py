"""Command-line entry point: simulate, fit, evaluate, compare.

Every command prints a JSON report on stdout. Errors are printed as a single
JSON line on stderr with a stable ``code`` field; the exit status is 0 on
success, 1 for usage errors, 2 for data errors and 3 for numerical errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import metrics
from .data import SurvivalDataset, read_csv
from .errors import (
    BadConfig,
    BrierWithCoxModel,
    SurvError,
    UsageError,
)
from .km import censoring_distribution
from .losses import get_loss, weibull_survival
from .net import (
    Checkpoint,
    MomentumConfig,
    TrainConfig,
    check_compatible,
    init,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .simulate import SimConfig, simulate_weibull_cox, write_simulation

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise BadConfig(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise BadConfig(f"expected comma-separated integers, got {text!r}") from None


def _emit(report: dict, args, out_path=None) -> None:
    text = json.dumps(report, indent=2 if args.pretty else None)
    print(text)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> dict:
    grid = 0.0
    if args.ties:
        kind, _, value = args.ties.partition(":")
        if kind != "grid" or not value:
            raise BadConfig(f"--ties must look like grid:STEP, got {args.ties!r}")
        grid = _floats(value)[0]
    beta = _floats(args.beta)
    config = SimConfig(n=args.n, p=len(beta), beta=beta, shape=args.shape, scale=args.scale,
                       censoring_rate=args.censoring_rate, grid=grid, seed=args.seed)
    sim = simulate_weibull_cox(config)
    truth = args.truth or str(Path(args.out).with_suffix(".truth.json"))
    write_simulation(sim, args.out, truth)
    ds = sim.dataset
    return {
        "command": "simulate",
        "n": ds.n,
        "events": int(ds.event.sum()),
        "event_fraction": float(ds.event.mean()),
        "out": str(args.out),
        "truth": truth,
        "seed": args.seed,
    }


# -- fit ----------------------------------------------------------------------

def cmd_fit(args) -> dict:
    started = _time.perf_counter()
    ds = read_csv(args.train)
    out_dim, _ = get_loss(args.loss)
    layers = _ints(args.arch) if args.arch else [out_dim]
    momentum = MomentumConfig.parse(args.momentum) if args.momentum else None
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch, seed=args.seed,
                         shuffle=not args.no_shuffle, loss=args.loss, lr=args.lr,
                         optimizer=args.optimizer, reduction=args.reduction, momentum=momentum)
    mlp = init([ds.p, *layers], seed=args.seed)
    check_compatible(mlp, args.loss)
    result = train(ds, mlp, config)
    target = result.momentum.target if result.momentum is not None else None
    save_checkpoint(args.out, result.model, args.loss, target, momentum)

    report = {
        "command": "fit",
        "config": {**config.to_dict(), "arch": [ds.p, *layers], "train": str(args.train)},
        "dataset": ds.fingerprint(),
        "losses": result.losses,
        "final_loss": result.losses[-1],
        "skipped_batches": result.skipped_batches,
        "checkpoint": str(args.out),
        "seed": args.seed,
    }
    if result.momentum is not None:
        bank = len(result.momentum.bank)
        report["momentum"] = {"batch": args.batch, "bank_size": bank,
                              "effective_batch": args.batch + bank}
    if args.timing:
        report["duration_s"] = _time.perf_counter() - started
    return report


# -- evaluate / compare -------------------------------------------------------

def _risk_and_metric(ckpt: Checkpoint, ds: SurvivalDataset, args, times):
    """Compute the requested metric for one checkpoint on ``ds``."""
    out = predict(ckpt.model, ds.covariates)
    weighting = "ipcw" if (args.ipcw or args.ipcw_from) else None
    censoring = censoring_distribution(*_ipcw_sample(args.ipcw_from)) if args.ipcw_from else None
    kw = dict(censoring=censoring, B=args.B, seed=args.seed)

    if args.metric == "brier":
        if ckpt.is_cox:
            raise BrierWithCoxModel(
                "the Brier score needs a survival function, which a Cox checkpoint does not provide"
            )
        surv = weibull_survival(out, times)
        return metrics.brier(surv, ds.event, ds.time, times, weights="ipcw", **kw)
    if args.metric == "auc":
        scores = out[:, 0] if ckpt.is_cox else 1.0 - weibull_survival(out, times)
        return metrics.auc(scores, ds.event, ds.time, weighting, times, **kw)
    if args.metric == "cindex":
        scores = out[:, 0] if ckpt.is_cox else 1.0 - weibull_survival(out, ds.time)
        return metrics.concordance_index(scores, ds.event, ds.time, weighting, **kw)
    raise BadConfig(f"unknown metric {args.metric!r}")


def _ipcw_sample(path):
    ds = read_csv(path)
    return ds.event, ds.time


def _eval_times(args, ds: SurvivalDataset):
    if args.metric == "cindex":
        return None
    if args.new_time:
        return np.asarray(_floats(args.new_time))
    return metrics.default_times(ds.event, ds.time)


def cmd_evaluate(args) -> dict:
    ckpt = load_checkpoint(args.model)
    ds = read_csv(args.test)
    result = _risk_and_metric(ckpt, ds, args, _eval_times(args, ds))
    return result.report(alpha=args.alpha, alternative=args.alternative)


def cmd_compare(args) -> dict:
    ds_a = read_csv(args.test)
    ds_b = read_csv(args.test_b) if args.test_b else ds_a
    times = _eval_times(args, ds_a)
    res_a = _risk_and_metric(load_checkpoint(args.model_a), ds_a, args, times)
    res_b = _risk_and_metric(load_checkpoint(args.model_b), ds_b, args, times)
    alternative = args.alternative or "greater"
    diff, se, p = metrics.paired_test(res_a, res_b, alternative)
    return {
        "metric": args.metric,
        "estimate_a": float(res_a.estimate),
        "estimate_b": float(res_b.estimate),
        "difference": diff,
        "se": se,
        "p_value": p,
        "alternative": alternative,
        "B": args.B,
        "seed": args.seed,
    }


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="survnet", description=__doc__.splitlines()[0])
    parser.add_argument("--pretty", action="store_true", help="indent JSON output")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic Weibull-Cox dataset")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--beta", default="1.0", help="comma-separated true coefficients")
    p.add_argument("--shape", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--censoring-rate", type=float, default=0.0)
    p.add_argument("--ties", default=None, help="grid:STEP rounds times up to the grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sim.csv")
    p.add_argument("--truth", default=None, help="ground-truth JSON path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="train a network with a survival loss")
    p.add_argument("--train", required=True)
    p.add_argument("--loss", choices=["cox-breslow", "cox-efron", "weibull"], default="cox-efron")
    p.add_argument("--arch", default=None,
                   help="comma-separated hidden and output sizes, e.g. 16,1 (default: linear)")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--reduction", choices=["mean", "sum"], default="mean")
    p.add_argument("--momentum", default=None, help="m:K, e.g. 0.999:512")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.add_argument("--report", default=None)
    p.add_argument("--timing", action="store_true", help="add wall-clock duration to the report")
    p.set_defaults(func=cmd_fit)

    def metric_flags(p):
        p.add_argument("--metric", choices=["auc", "cindex", "brier"], default="cindex")
        p.add_argument("--ipcw", action="store_true", help="IPCW weights estimated on the test set")
        p.add_argument("--ipcw-from", default=None, help="estimate censoring on this CSV instead")
        p.add_argument("--new-time", default=None, help="comma-separated evaluation times")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--alternative", choices=["two_sided", "greater", "less"], default=None)
        p.add_argument("--B", type=int, default=metrics.DEFAULT_B)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)

    p = sub.add_parser("evaluate", help="metric report for one checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    metric_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired test between two checkpoints")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--test-b", default=None, help="test set for model B (must match --test)")
    metric_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        report = args.func(args)
        out_path = {"fit": args.report if args.command == "fit" else None,
                    "evaluate": getattr(args, "out", None),
                    "compare": getattr(args, "out", None)}.get(args.command)
        _emit(report, args, out_path)
        return 0
    except SurvError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"code": "IOError", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
