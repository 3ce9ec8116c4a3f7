"""Command-line interface: ``cdbn infer|simulate|evaluate|study``.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .data import (
    InterventionDesign,
    InterventionKind,
    InterventionScheme,
    NetworkPrior,
    load_dataset,
    load_edge_list,
    load_intervention_design,
    write_dataset,
    write_edge_list,
    write_intervention_design,
)
from .design import ColumnBank
from .errors import CDBNError, DataError, NumericalError
from .evaluate import descendancy_sets, roc_descendancy_pooled, roc_edges
from .inference import count_models, fitted_values, infer_network
from .outputs import (
    posterior_summary,
    read_matrix_csv,
    roc_summary,
    sha256,
    write_dot,
    write_json,
    write_matrix_csv,
    write_roc_csv,
)
from .simulate import DEFAULT_NODES, SimulationConfig, default_topology, sample_coefficients, simulate_dataset, substream
from .study import METHODS, REGIMES, run_study

logger = logging.getLogger("cdbn")


def _manifest(args, inputs: dict, outputs: list[Path], argv, root: Path) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "version": __version__,
        "kernel_backend": _kernels.default_backend(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": {name: {"path": str(p), "sha256": sha256(p)} for name, p in inputs.items() if p},
        "outputs": {p.relative_to(root).as_posix(): sha256(p) for p in outputs},
    }


def _scheme(args) -> InterventionScheme:
    return InterventionScheme.parse(args.scheme, args.direction)


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def run_infer(args, argv=()) -> int:
    if args.indegree < 0:
        raise DataError("--indegree must be nonnegative")
    if args.lam < 0:
        raise DataError("--lambda must be nonnegative")
    if not 0.0 <= args.threshold <= 1.0:
        raise DataError("--threshold must lie in [0, 1]")
    if args.lam > 0 and not args.prior:
        raise DataError("--lambda > 0 requires --prior (a parent,child edge list)")

    data = load_dataset(args.data, log_transform=args.log_transform)
    scheme = _scheme(args)
    if args.design:
        design = load_intervention_design(args.design, scheme)
    else:
        if scheme.kind is not InterventionKind.NONE:
            raise DataError(f"scheme {scheme} needs --design")
        design = InterventionDesign({}, scheme)
    design.inhibited(data)  # resolve names and condition labels up front
    prior = NetworkPrior(load_edge_list(args.prior, data.node_names), args.lam) if args.prior else None

    m = min(args.indegree, data.p)
    logger.info("scoring %d models per node for %d nodes", count_models(data.p, m), data.p)
    probs, posteriors = infer_network(data, design, prior, m, workers=args.workers)
    fitted = fitted_values(posteriors, data, design)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = data.node_names
    files = [out / "edge_probabilities.csv", out / "posterior.json", out / "fitted.csv", out / "network.dot"]
    write_matrix_csv(probs, names, files[0])
    write_json(posterior_summary(posteriors, names, args.top_k), files[1])
    write_dataset(data.with_values(fitted), files[2])
    write_dot(probs, names, files[3], args.threshold)
    if args.dump_design:
        dump = {}
        for j in range(data.p):
            bank = ColumnBank(data, design, j)
            dump[names[j]] = {
                "columns": [t.describe(data) for t in bank.tags],
                "always_included": [bank.tags[k].describe(data) for k in bank.always],
            }
        files.append(out / "design_columns.json")
        write_json(dump, files[-1])
    manifest = _manifest(args, {"data": args.data, "design": args.design, "prior": args.prior}, files, argv, out)
    write_json(manifest, out / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _topology(args):
    if not args.topology:
        return default_topology()
    with open(args.topology, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    names = []
    for row in rows:
        for name in row[:2]:
            name = name.strip()
            if name and name not in names:
                names.append(name)
    return tuple(names), load_edge_list(args.topology, names)


def _conditions(targets):
    a, b = targets
    return (("none", ()), (a, (a,)), (b, (b,)), (f"{a}+{b}", (a, b)))


def run_simulate(args, argv=()) -> int:
    names, topo = _topology(args)
    targets = [t.strip() for t in args.targets.split(",")]
    if len(targets) != 2 or any(t not in names for t in targets):
        raise DataError(f"--targets must name two nodes of the topology, got {args.targets!r}")
    kind = InterventionKind.NONE if args.regime == "none" else REGIMES[args.regime]
    cfg = SimulationConfig(
        T=args.T, conditions=_conditions(targets), kind=kind, shift=args.shift, seed=args.seed,
        replicates=args.replicates,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r in range(cfg.replicates):
        wg = sample_coefficients(topo, substream(cfg.seed, "coefficients", r), names, args.sigma)
        data, design = simulate_dataset(wg, cfg, r)
        rep = out / f"rep_{r + 1:03d}"
        rep.mkdir(exist_ok=True)
        write_dataset(data, rep / "data.csv")
        write_intervention_design(design, rep / "design.json", data.conditions)
        write_edge_list(topo, names, rep / "truth.csv")
        write_matrix_csv(wg.coef, names, rep / "coefficients.csv")
        files += [rep / "data.csv", rep / "design.json", rep / "truth.csv", rep / "coefficients.csv"]
    manifest = _manifest(args, {"topology": args.topology}, files, argv, out)
    write_json(manifest, out / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def run_evaluate(args, argv=()) -> int:
    names, probs = read_matrix_csv(args.edges)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"edges": args.edges, "truth": args.truth, "data": args.data}
    if args.truth:
        truth = load_edge_list(args.truth, names)
        curve = roc_edges(probs, truth, include_self=not args.exclude_self)
        summary = {"mode": "edges", **roc_summary(curve)}
    else:
        if not (args.data and args.contrast):
            raise DataError("evaluate needs --truth, or --data with at least one --contrast")
        data = load_dataset(args.data, log_transform=args.log_transform)
        if tuple(names) != data.node_names:
            raise DataError("edge-probability matrix nodes do not match the dataset")
        instances, sets = [], {}
        for contrast in args.contrast:
            parts = contrast.split(":")
            if len(parts) != 3:
                raise DataError(f"--contrast must be TARGET:BASELINE:INHIBITED, got {contrast!r}")
            target, base, inh = parts
            D = descendancy_sets(data, target, base, inh, args.alpha)
            t = data.node_index(target)
            instances.append((probs, t, D))
            sets[contrast] = sorted(names[k] for k in D)
        curve = roc_descendancy_pooled(instances, args.mode)
        summary = {"mode": args.mode, "descendancy_sets": sets, **roc_summary(curve)}
    files = [out / "roc.csv", out / "summary.json"]
    write_roc_csv(curve, files[0])
    write_json(summary, files[1])
    write_json(_manifest(args, inputs, files, argv, out), out / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# study
# ---------------------------------------------------------------------------


def run_study_cmd(args, argv=()) -> int:
    regimes = args.regimes.split(",") if args.regimes else list(REGIMES)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    names, topo = _topology(args)
    res = run_study(
        regimes, methods, replicates=args.replicates, seed=args.seed, m=args.indegree, sigma=args.sigma,
        shift=args.shift, T=args.T, topology=topo, node_names=names, workers=args.workers,
    )
    out = Path(args.out)
    (out / "roc").mkdir(parents=True, exist_ok=True)
    files = [out / "auc_mean.csv", out / "auc_replicates.csv"]
    means = res.mean_auc()
    with files[0].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["regime", *methods])
        for reg in regimes:
            w.writerow([reg, *(repr(means[(reg, m)]) for m in methods)])
    with files[1].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["regime", "method", "replicate", "auc"])
        for reg in regimes:
            for m in methods:
                for r, a in enumerate(res.auc[(reg, m)]):
                    w.writerow([reg, m, r + 1, repr(a)])
    for reg in regimes:
        if not res.truths[reg]:
            continue
        for m in methods:
            path = out / "roc" / f"{reg}__{m}.csv"
            write_roc_csv(res.pooled_roc(reg, m), path)
            files.append(path)
    summary = {
        "mean_auc": {reg: {m: means[(reg, m)] for m in methods} for reg in regimes},
        "best": {reg: sorted(res.best_method(reg)[1]) for reg in regimes if res.truths[reg]},
        "failures": [{"regime": a, "replicate": r, "method": m, "error": e} for a, r, m, e in res.failures],
    }
    files.append(out / "summary.json")
    write_json(summary, files[-1])
    manifest = _manifest(args, {"topology": args.topology}, files, argv, out)
    write_json(manifest, out / "manifest.json")
    print(files[0].read_text(encoding="utf-8"), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdbn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="posterior edge probabilities for a dataset")
    p.add_argument("--data", required=True, help="wide CSV: condition,time,<nodes...>")
    p.add_argument("--design", help="JSON map condition -> [inhibited node names]")
    p.add_argument("--scheme", default="none", choices=[k.value for k in InterventionKind])
    p.add_argument("--direction", default="out", choices=["in", "out"])
    p.add_argument("--indegree", type=int, default=2, help="maximum parent-set size m")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="prior network strength")
    p.add_argument("--prior", help="prior network edge list (parent,child)")
    p.add_argument("--threshold", type=float, default=0.5, help="edge threshold for the DOT network")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--top-k", type=int, default=10, help="models per node in posterior.json")
    p.add_argument("--log-transform", action="store_true", help="take natural logs of the input values")
    p.add_argument("--dump-design", action="store_true", help="write design column tags per node")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_infer)

    p = sub.add_parser("simulate", help="synthetic interventional time courses")
    p.add_argument("--regime", default="perfect-fixed", choices=["none", *REGIMES])
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--shift", type=float, default=-1.0, help="fixed-effect shift on children of inhibited nodes")
    p.add_argument("--topology", help="edge list CSV; default is the bundled 15-node graph")
    p.add_argument("--targets", default="A,B", help="the two inhibited nodes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("evaluate", help="ROC/AUC of edge probabilities")
    p.add_argument("--edges", required=True, help="edge-probability CSV written by infer")
    p.add_argument("--truth", help="true edge list (parent,child)")
    p.add_argument("--exclude-self", action="store_true", help="ignore self-edges in edge ROC")
    p.add_argument("--data", help="dataset for descendancy mode")
    p.add_argument("--log-transform", action="store_true")
    p.add_argument("--contrast", action="append", help="TARGET:BASELINE:INHIBITED (repeat to pool)")
    p.add_argument("--mode", default="descendants", choices=["descendants", "children"])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("study", help="simulation study: generating regimes x analysis methods")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regimes", help=f"comma list from {','.join(REGIMES)}")
    p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--indegree", type=int, default=3)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--shift", type=float, default=-1.0)
    p.add_argument("--topology", help="edge list CSV containing nodes A and B")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_study_cmd)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except DataError as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    except CDBNError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
