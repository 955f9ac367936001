"""Command-line entry point: synth, edges, train, eval, gradcheck, bench, compare.

Exit codes: 0 success, 1 usage error, 2 runtime failure. The resolved
configuration of every run is printed as JSON on stderr before it executes.
Training flags are generated from :class:`TrainConfig` fields, so names and
defaults have a single source.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from . import edges as edge_mod
from .data.joints import DEFAULT_CUBE_MM

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
GRADCHECK_TOL = 1e-6
E2E_TOL = 1e-4


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_train_flags(p):
    from .train import TrainConfig

    aliases = {"arch_id": ["--arch"], "max_iters": ["--iters"]}
    helps = {
        "arch_id": "network architecture",
        "batch_size": "minibatch size",
        "lr": "learning rate",
        "momentum": "SGD momentum",
        "max_iters": "training iterations",
        "seed": "seed for initialisation and shuffling",
        "data": "training FTDS dataset",
        "include_palm": "regress the palm centre as a sixth joint",
        "tied": "share conv weights between the depth and edge streams",
        "log_every": "loss log cadence in iterations",
        "checkpoint_every": "write an intermediate checkpoint every k iterations (0 = off)",
        "lr_step": "multiply lr by lr-gamma every lr-step iterations (0 = constant lr)",
        "lr_gamma": "step decay factor",
    }
    for f in dataclasses.fields(TrainConfig):
        names = [_flag(f.name)] + aliases.get(f.name, [])
        h = helps.get(f.name, "")
        if f.type in ("bool", bool):
            # BooleanOptionalAction appends the default itself
            p.add_argument(*names, dest=f.name, default=f.default, action=argparse.BooleanOptionalAction, help=h)
        else:
            typ = {"int": int, "float": float, "str": str}[f.type if isinstance(f.type, str) else f.type.__name__]
            kw = {"required": True} if f.name == "data" else {}
            if f.name != "data":
                h += " (default: %(default)s)"
            if f.name == "arch_id":
                from .netzoo import ARCH_IDS

                kw["choices"] = ARCH_IDS
                kw["metavar"] = "ARCH"
                h += "; one of " + ", ".join(ARCH_IDS)
            p.add_argument(*names, dest=f.name, type=typ, default=f.default, help=h, **kw)


def build_parser() -> Parser:
    from .netzoo import ARCH_IDS

    ap = Parser(prog="fingerfusion", description="Depth and edge CNNs for 3D fingertip regression.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--threads", type=int, default=None, help="BLAS thread limit (default: library default)")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic FTDS dataset")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output FTDS path")
    p.add_argument("--cube-size", type=float, default=DEFAULT_CUBE_MM, help="crop cube edge in mm (default: %(default)s)")
    p.add_argument("--with-edges", action=argparse.BooleanOptionalAction, default=True, help="store edge images")
    p.add_argument("--edge-method", default="gradient", choices=edge_mod.methods(), help="edge extractor (default: %(default)s)")

    p = sub.add_parser("edges", help="recompute edge images of an FTDS dataset")
    p.add_argument("--data", required=True, help="input FTDS path")
    p.add_argument("--out", required=True, help="output FTDS path")
    p.add_argument("--method", default="gradient", choices=edge_mod.methods(), help="edge extractor (default: %(default)s)")
    p.add_argument("--saturation", type=float, default=edge_mod.DEFAULT_SATURATION, help="saturation constant k (default: %(default)s)")

    p = sub.add_parser("train", help="train a network")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output FTCK checkpoint")
    p.add_argument("--loss-log", default=None, help="CSV loss log path (default: none)")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, help="FTCK checkpoint")
    p.add_argument("--data", required=True, help="FTDS dataset with targets")
    p.add_argument("--out", default=None, help="report prefix: writes PREFIX.csv, PREFIX_errors.csv, PREFIX_mp.dat")
    p.add_argument("--discard-over-mm", type=float, default=None, help="exclude pairs above this error from err_f (default: off)")
    p.add_argument("--mp-tau", type=float, default=10.0, help="threshold of the scalar mP in mm (default: %(default)s)")
    p.add_argument("--method", default=None, help="label in reports (default: arch id)")
    p.add_argument("--bench-n", type=int, default=0, help="also time N single-image forwards (default: off)")

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--all", action="store_true", help="per-layer suite (the default when no mode is given)")
    p.add_argument("--e2e", action="store_true", help="end-to-end check of whole networks on reduced inputs")
    p.add_argument("--arch", action="append", choices=ARCH_IDS, help="architecture for --e2e, repeatable (default: all)")
    p.add_argument("--eps", type=float, default=None, help="finite-difference step (default: 1e-4 per layer, 1e-5 end to end)")
    p.add_argument("--tol", type=float, default=None, help=f"pass threshold (default: {GRADCHECK_TOL:g} per layer, {E2E_TOL:g} end to end)")
    p.add_argument("--probes", type=int, default=20, help="parameters probed per network (default: %(default)s)")
    p.add_argument("--input-size", type=int, default=24, help="reduced input size for --e2e (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="probe seed (default: %(default)s)")

    p = sub.add_parser("bench", help="time single-image inference")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--checkpoint", help="FTCK checkpoint")
    g.add_argument("--arch", choices=ARCH_IDS, help="time a freshly initialised network instead")
    p.add_argument("--n", type=int, default=50, help="timed runs after 3 warmups (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed of the input crop (default: %(default)s)")
    p.add_argument("--out", default=None, help="write stats as JSON here (default: stdout)")

    p = sub.add_parser("compare", help="comparison table over several checkpoints on one dataset")
    p.add_argument("--checkpoint", action="append", required=True, help="FTCK checkpoint, repeatable")
    p.add_argument("--data", required=True, help="shared FTDS dataset")
    p.add_argument("--mp-tau", type=float, default=10.0, help="threshold of the mP column in mm (default: %(default)s)")
    p.add_argument("--discard-over-mm", type=float, default=None, help="exclude pairs above this error from err_f (default: off)")
    p.add_argument("--bench-n", type=int, default=0, help="time N forwards per network for the time column (default: off)")
    p.add_argument("--sort", action="store_true", help="sort rows by err_f ascending")
    p.add_argument("--out", default=None, help="also write the CSV table here")
    return ap


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "verbose"}


# commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    from .data.synth import SynthConfig, synth_generate

    if args.n < 0:
        raise UsageError("--n must be >= 0")
    cfg = SynthConfig(cube_size=args.cube_size, with_edges=args.with_edges, edge_method=args.edge_method)
    if args.n == 0:
        from .data.ftds import write_dataset

        write_dataset(args.out, [])
        count = 0
    else:
        count = synth_generate(args.out, args.seed, args.n, cfg)
    print(f"wrote {count} samples to {args.out}")
    return EXIT_OK


def cmd_edges(args) -> int:
    from .data.ftds import read_dataset, write_dataset

    def recompute():
        for s in read_dataset(args.data):
            s.edge = edge_mod.extract_edges(s.depth, args.method, saturation=args.saturation)
            yield s

    count = write_dataset(args.out, recompute())
    print(f"wrote {count} samples with {args.method} edges to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .train import TrainConfig, train, write_loss_log

    cfg = TrainConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(TrainConfig)})
    rows: List[tuple] = []

    def save_intermediate(it, ck):
        path = f"{args.out}.{it}"
        ck.save(path)
        logging.getLogger(__name__).info("checkpoint %s", path)

    ck = train(cfg, loss_log=rows, on_checkpoint=save_intermediate)
    ck.save(args.out)
    if args.loss_log:
        write_loss_log(args.loss_log, rows)
    print(f"wrote {args.out} ({cfg.arch_id}, {cfg.max_iters} iterations, final loss {rows[-1][1]:.6g})")
    return EXIT_OK


def _timing(net, n: int, seed: int = 0) -> Optional[dict]:
    if n <= 0:
        return None
    from .bench import bench

    return bench(net, n=n, seed=seed)["single"]


def cmd_eval(args) -> int:
    from .evaluate import evaluate, summary_rows, write_report
    from .netzoo.checkpoint import Checkpoint

    net = Checkpoint.load(args.checkpoint).to_network()
    report = evaluate(net, args.data, discard_over_mm=args.discard_over_mm, mp_tau=args.mp_tau, method=args.method)
    report.timing = _timing(net, args.bench_n)
    for k, v in summary_rows(report):
        print(f"{k}\t{v}")
    if args.out:
        for path in write_report(report, args.out):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    ok = True
    if args.all or not args.e2e:
        from .core.gradcheck import run_suite

        tol = args.tol if args.tol is not None else GRADCHECK_TOL
        results = run_suite(eps=args.eps or 1e-4)
        for name, err in results.items():
            good = err < tol
            ok &= good
            print(f"{name:<16} {err:.3e}  {'ok' if good else 'FAIL'}")
    if args.e2e:
        from .netzoo import ARCH_IDS
        from .netzoo.verify import network_grad_check

        tol = args.tol if args.tol is not None else E2E_TOL
        for arch in args.arch or ARCH_IDS:
            worst, _, redrawn = network_grad_check(arch, args.input_size, args.probes, eps=args.eps or 1e-5, seed=args.seed)
            good = worst < tol
            ok &= good
            print(f"{arch:<16} {worst:.3e}  {'ok' if good else 'FAIL'}  (redrawn {redrawn})")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_bench(args) -> int:
    from .bench import bench
    from .netzoo import build
    from .netzoo.checkpoint import Checkpoint

    net = Checkpoint.load(args.checkpoint).to_network() if args.checkpoint else build(args.arch, seed=args.seed)
    if args.n < 10:
        raise UsageError("--n must be >= 10")
    out = bench(net, n=args.n, threads=args.threads, seed=args.seed)
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .data.ftds import load_arrays
    from .evaluate import compare_table, evaluate
    from .netzoo.checkpoint import Checkpoint

    arrays = load_arrays(args.data)
    reports = []
    for path in args.checkpoint:
        net = Checkpoint.load(path).to_network()
        r = evaluate(net, arrays, discard_over_mm=args.discard_over_mm, mp_tau=args.mp_tau)
        r.timing = _timing(net, args.bench_n)
        reports.append(r)
    text, csv_text = compare_table(reports, tau=args.mp_tau, sort_by_err=args.sort)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(csv_text)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "edges": cmd_edges,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
    "compare": cmd_compare,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    print(json.dumps({"fingerfusion": __version__, **_resolved(args)}, sort_keys=True, default=str), file=sys.stderr)
    np.seterr(over="ignore", invalid="ignore")
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"fingerfusion {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, KeyError) as e:
        print(f"fingerfusion {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
