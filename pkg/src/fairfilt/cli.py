"""Batch command-line interface.

Flags-first with an optional JSON config file (``--config``); flags
override the file, the file overrides built-in defaults. Every run is
deterministic given its resolved options, and every emitted file gets a
``<name>.meta.json`` sidecar recording those options.

Exit codes: 0 success, 1 usage problems, 2 data errors, 3 solver errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .data import SbmSpec, generate_sbm, load_dataset, save_dataset, split
from .design import (DesignConfig, FilterSpec, all_pass, design_closed_form, design_direct,
                     design_polynomial, filter_from_json, filter_to_json, objective_report)
from .errors import (ConvergenceFailure, DimensionMismatch, DomainError, EmptyCell,
                     EmptyClass, EmptyGroup, FairfiltError, GenerationFailure,
                     IndexOutOfRange, IsolatedNode, NonBinarySensitive, NonFiniteLoss,
                     ParseError, SelfLoop)
from .filtering import apply_frequency, effective_operator
from .graph import normalized_operators
from .learners import (GcnConfig, LabelPropConfig, gcn_scores, label_propagation,
                       postprocess_predictions, train_gcn, write_curve_csv,
                       write_predictions_csv)
from .metrics import bias_context, bias_metric, group_fairness
from .spectral import decompose, spectrum_table, write_spectrum_csv


class UsageError(Exception):
    """Bad flag combination or value; maps to exit code 1."""


DATA_ERRORS = (ParseError, NonBinarySensitive, IsolatedNode, IndexOutOfRange, SelfLoop,
               EmptyGroup, EmptyCell, EmptyClass, DimensionMismatch, GenerationFailure,
               FileNotFoundError)
SOLVER_ERRORS = (ConvergenceFailure, NonFiniteLoss)

DEFAULTS = {
    "config": None,
    "edges": None,
    "nodes": None,
    "sbm": None,
    "out": ".",
    "seed": 0,
    "seeds": 5,
    "method": "direct",
    "tau": 0.0004,
    "order": 40,
    "basis": "monomial",
    "placement": "both",
    "splits": "0.4,0.3,0.3",
    "learner": "gcn",
    "figures": True,
    "filter": None,
    "tau_grid": "0.0003,0.0004,0.0005,0.0006",
    "order_grid": None,
    "hidden": 64,
    "epochs": 300,
    "learning_rate": 0.01,
    "weight_decay": 1e-5,
    "alpha": 0.9,
    "threshold": 0.0,
    "export_matrix": False,
    "sizes": "200,200",
    "p_intra": 0.2,
    "p_inter": 0.02,
    "label_align": 0.8,
    "features": 4,
    "snr": 1.0,
}

COMMAND_DEFAULTS = {
    "label-prop": {"splits": "0.4,0.0,0.6"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--edges", help="edge CSV (header src,dst)")
    sub.add_argument("--nodes", help="node CSV (header id,s,y,f1..fF)")
    sub.add_argument("--sbm", help="inline JSON synthetic-benchmark spec")
    sub.add_argument("--out", help="output directory (default .)")
    sub.add_argument("--seed", type=int, help="base seed")
    sub.add_argument("--no-figures", dest="figures", action="store_false", default=None,
                     help="skip PNG rendering next to delimited outputs")


def _add_design_flags(sub):
    sub.add_argument("--method", choices=["direct", "lp", "poly"])
    sub.add_argument("--tau", type=float, help="information budget in [0, 1]")
    sub.add_argument("--order", type=int, help="polynomial coefficient count")
    sub.add_argument("--basis", choices=["monomial", "chebyshev"])


def _add_learner_flags(sub):
    sub.add_argument("--splits", help="train,val,test fractions, e.g. 0.4,0.3,0.3")
    sub.add_argument("--hidden", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float)
    sub.add_argument("--alpha", type=float, help="label-propagation diffusion weight")
    sub.add_argument("--threshold", type=float, help="decision threshold on soft scores")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairfilt",
                     description="Fairness-aware graph filter design and evaluation")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("spectrum", parents=[], help="per-frequency signal magnitudes")
    _add_common(sub)

    sub = commands.add_parser("design", help="design a fairness-aware filter")
    _add_common(sub)
    _add_design_flags(sub)

    sub = commands.add_parser("apply", help="filter the node features")
    _add_common(sub)
    sub.add_argument("--filter", help="designed filter JSON", required=False)

    sub = commands.add_parser("label-prop", help="diffuse labels, optionally post-filter")
    _add_common(sub)
    _add_learner_flags(sub)
    sub.add_argument("--filter", help="designed filter JSON for post-processing")

    sub = commands.add_parser("train-gcn", help="train the two-layer GCN")
    _add_common(sub)
    _add_learner_flags(sub)
    sub.add_argument("--filter", help="designed filter JSON for pre-processing")
    sub.add_argument("--placement", choices=["pre1", "pre2", "both", "none"])

    sub = commands.add_parser("eval", help="paired with/without-filter evaluation")
    _add_common(sub)
    _add_design_flags(sub)
    _add_learner_flags(sub)
    sub.add_argument("--filter", help="designed filter JSON (else designed inline)")
    sub.add_argument("--placement", choices=["pre1", "pre2", "both", "post", "none"])
    sub.add_argument("--learner", choices=["gcn", "label-prop"])
    sub.add_argument("--seeds", type=int, help="number of consecutive seeds")

    sub = commands.add_parser("sweep", help="hyperparameter sensitivity table")
    _add_common(sub)
    _add_design_flags(sub)
    _add_learner_flags(sub)
    sub.add_argument("--placement", choices=["pre1", "pre2", "both", "post", "none"])
    sub.add_argument("--learner", choices=["gcn", "label-prop"])
    sub.add_argument("--seeds", type=int)
    sub.add_argument("--tau-grid", dest="tau_grid", help="comma list of tau values")
    sub.add_argument("--order-grid", dest="order_grid", help="comma list of orders")

    sub = commands.add_parser("effective", help="intra/inter weights of the operator")
    _add_common(sub)
    _add_design_flags(sub)
    sub.add_argument("--filter", help="designed filter JSON (else designed inline)")
    sub.add_argument("--export-matrix", dest="export_matrix", action="store_true",
                     default=None, help="also write the dense operator matrix CSV")

    sub = commands.add_parser("sbm-gen", help="generate a synthetic benchmark dataset")
    _add_common(sub)
    sub.add_argument("--sizes", help="group sizes, e.g. 200,200")
    sub.add_argument("--p-intra", dest="p_intra", type=float)
    sub.add_argument("--p-inter", dest="p_inter", type=float)
    sub.add_argument("--label-align", dest="label_align", type=float)
    sub.add_argument("--features", type=int)
    sub.add_argument("--snr", type=float)

    return parser


class RunContext:
    """Resolved options for one invocation plus output bookkeeping."""

    def __init__(self, command: str, options: dict):
        self.command = command
        self.options = options
        self.out_dir = Path(options["out"])
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name)

    def emit(self, filename: str) -> Path:
        """Reserve an output path and drop the config sidecar next to it."""
        path = self.out_dir / filename
        sidecar = {"command": self.command, "options": self.options}
        with open(f"{path}.meta.json", "w") as fh:
            json.dump(sidecar, fh, indent=2, default=str)
        return path


def resolve_options(args: argparse.Namespace) -> RunContext:
    options = dict(DEFAULTS)
    options.update(COMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        with open(args.config) as fh:
            file_options = json.load(fh)
        unknown = set(file_options) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        options.update(file_options)
    for key, value in vars(args).items():
        if key in ("command",) or value is None:
            continue
        options[key] = value
    return RunContext(args.command, options)


def _parse_fractions(text: str):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad fractions {text!r}")
    if len(parts) != 3:
        raise UsageError("need exactly three split fractions")
    return parts


def _parse_grid(text):
    if text is None:
        return []
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad grid {text!r}")


def load_context_dataset(ctx: RunContext):
    """Materialize the single configured data source."""
    has_csv = ctx.edges is not None or ctx.nodes is not None
    has_sbm = ctx.sbm is not None
    if has_csv == has_sbm:
        raise UsageError("configure exactly one data source: --edges/--nodes or --sbm")
    if has_csv:
        if ctx.edges is None or ctx.nodes is None:
            raise UsageError("--edges and --nodes must be given together")
        return load_dataset(ctx.edges, ctx.nodes)
    raw = ctx.sbm if isinstance(ctx.sbm, dict) else json.loads(ctx.sbm)
    try:
        spec = SbmSpec(**raw)
    except TypeError as exc:
        raise UsageError(f"bad sbm spec: {exc}")
    return generate_sbm(spec)


def design_filter(ctx: RunContext, bias_ctx, method: str | None = None) -> FilterSpec:
    method = method or ctx.method
    cfg = DesignConfig(tau=ctx.tau, order=ctx.order, basis=ctx.basis)
    if method == "direct":
        return design_direct(bias_ctx, cfg)
    if method == "lp":
        return design_closed_form(bias_ctx, cfg)
    if method == "poly":
        return design_polynomial(bias_ctx, cfg)
    raise UsageError(f"unknown method {method!r}")


def _load_filter(path) -> FilterSpec:
    return filter_from_json(Path(path).read_text())


def _percent(mean: float, std: float) -> str:
    return f"{100 * mean:.2f} ± {100 * std:.2f}"


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std}


def _run_learner(ctx, dataset, ops, spec, filt, placement, seed):
    """One learner run; returns the test-split EvalReport."""
    fractions = _parse_fractions(ctx.splits)
    train_idx, val_idx, test_idx = split(dataset, fractions, seed=seed, stratify=True)
    signals = dataset.signals
    if ctx.learner == "gcn":
        gcn_placement = "none" if filt is None or placement == "none" else placement
        if gcn_placement == "post":
            raise UsageError("placement 'post' applies to the label-prop learner")
        cfg = GcnConfig(hidden=ctx.hidden, learning_rate=ctx.learning_rate,
                        epochs=ctx.epochs, weight_decay=ctx.weight_decay, seed=seed)
        _, predictions = train_gcn(ops, spec, signals, (train_idx, val_idx, test_idx), cfg,
                                   filt=filt, placement=gcn_placement)
    else:
        seed_labels = np.zeros(dataset.graph.n)
        seed_labels[train_idx] = signals.y[train_idx]
        _require_both_classes(seed_labels)
        lp_cfg = LabelPropConfig(alpha=ctx.alpha, threshold=ctx.threshold)
        result = label_propagation(ops, seed_labels, lp_cfg)
        if filt is None or placement == "none":
            predictions = np.where(result.scores > ctx.threshold, 1, -1)
        else:
            predictions = postprocess_predictions(spec, filt, result.scores,
                                                  threshold=ctx.threshold)
    return group_fairness(predictions[test_idx], signals.y[test_idx], signals.s[test_idx])


def _require_both_classes(seed_labels):
    if not (np.any(seed_labels == 1.0) and np.any(seed_labels == -1.0)):
        raise EmptyClass("training split must label both classes")


def _require_full_labels(dataset):
    if not bool(dataset.signals.y_mask.all()):
        raise DomainError("this command needs labels on every node")


def cmd_spectrum(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    _require_full_labels(dataset)
    spec = decompose(normalized_operators(dataset.graph))
    table = spectrum_table(spec, dataset.signals.s.astype(float),
                           dataset.signals.y.astype(float))
    write_spectrum_csv(ctx.emit("spectrum.csv"), table)
    if ctx.figures:
        from .report import spectrum_figure
        spectrum_figure(table, ctx.emit("spectrum.png"))
    return 0


def cmd_design(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    spec = decompose(normalized_operators(dataset.graph))
    bias_ctx = bias_context(spec, dataset.signals.s.astype(float))
    filt = design_filter(ctx, bias_ctx)
    ctx.emit("filter.json").write_text(filter_to_json(filt))

    after = objective_report(bias_ctx, filt)
    payload = {
        "rho_before": bias_metric(bias_ctx, np.ones(spec.n)),
        "rho_after": after.rho,
        "bound_after": after.bound,
        "budget_slack": after.budget_slack,
    }
    ctx.emit("design_report.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload, indent=2))
    if ctx.figures:
        from .report import response_figure
        response_figure(spec.eigenvalues, filt.response, ctx.emit("response.png"))
    return 0


def cmd_apply(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    if ctx.filter is None:
        raise UsageError("apply needs --filter")
    filt = _load_filter(ctx.filter)
    spec = decompose(normalized_operators(dataset.graph))
    filtered = apply_frequency(spec, filt, dataset.signals.features)
    path = ctx.emit("filtered.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id"] + [f"f{k}" for k in range(1, filtered.shape[1] + 1)])
        for node in range(filtered.shape[0]):
            writer.writerow([node] + [repr(float(x)) for x in filtered[node]])
    return 0


def cmd_label_prop(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    ops = normalized_operators(dataset.graph)
    fractions = _parse_fractions(ctx.splits)
    train_idx, _, _ = split(dataset, fractions, seed=ctx.seed, stratify=True)
    seed_labels = np.zeros(dataset.graph.n)
    seed_labels[train_idx] = dataset.signals.y[train_idx]
    _require_both_classes(seed_labels)
    result = label_propagation(ops, seed_labels,
                               LabelPropConfig(alpha=ctx.alpha, threshold=ctx.threshold))
    scores = result.scores
    if ctx.filter is not None:
        spec = decompose(ops)
        filt = _load_filter(ctx.filter)
        scores = apply_frequency(spec, filt, result.scores)
    predictions = np.where(scores > ctx.threshold, 1, -1)
    write_predictions_csv(ctx.emit("predictions.csv"), predictions, scores)
    if not result.converged:
        print(f"warning: diffusion hit the iteration cap ({result.iterations})",
              file=sys.stderr)
        return 3
    return 0


def cmd_train_gcn(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    ops = normalized_operators(dataset.graph)
    spec = decompose(ops)
    filt = _load_filter(ctx.filter) if ctx.filter else None
    placement = ctx.placement if filt is not None else "none"
    fractions = _parse_fractions(ctx.splits)
    split_idx = split(dataset, fractions, seed=ctx.seed, stratify=True)
    cfg = GcnConfig(hidden=ctx.hidden, learning_rate=ctx.learning_rate, epochs=ctx.epochs,
                    weight_decay=ctx.weight_decay, seed=ctx.seed)
    model, predictions = train_gcn(ops, spec, dataset.signals, split_idx, cfg,
                                   filt=filt, placement=placement)
    scores = gcn_scores(model, ops, spec, dataset.signals, filt=filt)
    write_predictions_csv(ctx.emit("predictions.csv"), predictions, scores)
    write_curve_csv(ctx.emit("training_curve.csv"), model.curve)
    return 0


def cmd_eval(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    ops = normalized_operators(dataset.graph)
    spec = decompose(ops)
    bias_ctx = bias_context(spec, dataset.signals.s.astype(float))
    filt = _load_filter(ctx.filter) if ctx.filter else design_filter(ctx, bias_ctx)
    placement = ctx.placement
    if ctx.learner == "label-prop":
        placement = "post"

    seeds = [ctx.seed + k for k in range(ctx.seeds)]
    per_seed = []
    for seed in seeds:
        with_report = _run_learner(ctx, dataset, ops, spec, filt, placement, seed)
        without_report = _run_learner(ctx, dataset, ops, spec, None, "none", seed)
        per_seed.append({"seed": seed, "with": with_report.to_dict(),
                         "without": without_report.to_dict()})

    payload = {"learner": ctx.learner, "placement": placement, "seeds": seeds,
               "rho_after": bias_metric(bias_ctx, filt.response),
               "per_seed": per_seed}
    for arm in ("with", "without"):
        payload[arm] = {metric: _mean_std([row[arm][metric] for row in per_seed])
                        for metric in ("accuracy", "delta_sp", "delta_eo")}
    payload["delta"] = {metric: payload["with"][metric]["mean"]
                        - payload["without"][metric]["mean"]
                        for metric in ("accuracy", "delta_sp", "delta_eo")}
    ctx.emit("eval_report.json").write_text(json.dumps(payload, indent=2))

    header = f"{'':12s}{'accuracy':>16s}{'delta_sp':>16s}{'delta_eo':>16s}"
    print(header)
    for arm in ("without", "with"):
        row = payload[arm]
        print(f"{arm:12s}"
              f"{_percent(row['accuracy']['mean'], row['accuracy']['std']):>16s}"
              f"{_percent(row['delta_sp']['mean'], row['delta_sp']['std']):>16s}"
              f"{_percent(row['delta_eo']['mean'], row['delta_eo']['std']):>16s}")
    return 0


def cmd_sweep(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    ops = normalized_operators(dataset.graph)
    spec = decompose(ops)
    bias_ctx = bias_context(spec, dataset.signals.s.astype(float))

    order_grid = _parse_grid(ctx.order_grid)
    grid = ([("order", int(value)) for value in order_grid] if order_grid
            else [("tau", value) for value in _parse_grid(ctx.tau_grid)])
    if not grid:
        raise UsageError("empty hyperparameter grid")

    placement = "post" if ctx.learner == "label-prop" else ctx.placement
    seeds = [ctx.seed + k for k in range(ctx.seeds)]
    rows = []
    for param, value in grid:
        if param == "order":
            cfg = DesignConfig(tau=ctx.tau, order=value, basis=ctx.basis)
            filt = design_polynomial(bias_ctx, cfg)
        else:
            ctx_like = dict(ctx.options, tau=value)
            filt = design_filter(RunContext(ctx.command, ctx_like), bias_ctx)
        reports = [_run_learner(ctx, dataset, ops, spec, filt, placement, seed)
                   for seed in seeds]
        row = {"param": param, "value": value}
        for metric in ("accuracy", "delta_sp", "delta_eo"):
            stats = _mean_std([getattr(r, metric) for r in reports])
            row[f"{metric}_mean"] = stats["mean"]
            row[f"{metric}_std"] = stats["std"]
        rho = bias_metric(bias_ctx, filt.response)
        row["rho_mean"] = rho
        row["rho_std"] = 0.0
        rows.append(row)

    columns = ["param", "value", "accuracy_mean", "accuracy_std", "delta_sp_mean",
               "delta_sp_std", "delta_eo_mean", "delta_eo_std", "rho_mean", "rho_std"]
    path = ctx.emit("sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row["param"]] + [repr(float(row[c])) if c != "value" else row[c]
                                              for c in columns[1:]])
    print(f"{'param':8s}{'value':>12s}{'accuracy':>16s}{'delta_sp':>16s}{'delta_eo':>16s}")
    for row in rows:
        print(f"{row['param']:8s}{row['value']:>12g}"
              f"{_percent(row['accuracy_mean'], row['accuracy_std']):>16s}"
              f"{_percent(row['delta_sp_mean'], row['delta_sp_std']):>16s}"
              f"{_percent(row['delta_eo_mean'], row['delta_eo_std']):>16s}")
    if ctx.figures:
        from .report import sweep_figure
        sweep_figure(rows, rows[0]["param"], ctx.emit("sweep.png"))
    return 0


def cmd_effective(ctx: RunContext) -> int:
    dataset = load_context_dataset(ctx)
    spec = decompose(normalized_operators(dataset.graph))
    s = dataset.signals.s.astype(float)
    bias_ctx = bias_context(spec, s)
    filt = _load_filter(ctx.filter) if ctx.filter else design_filter(ctx, bias_ctx)
    before = effective_operator(spec, all_pass(spec.n), s)
    after = effective_operator(spec, filt, s)
    payload = {"intra_before": before.intra_weight, "inter_before": before.inter_weight,
               "intra_after": after.intra_weight, "inter_after": after.inter_weight}
    ctx.emit("effective.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload, indent=2))
    if ctx.export_matrix:
        path = ctx.emit("effective_matrix.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in after.matrix:
                writer.writerow([repr(float(x)) for x in row])
    if ctx.figures:
        from .report import effective_figure
        effective_figure(before.to_dict(), after.to_dict(), ctx.emit("effective.png"))
    return 0


def cmd_sbm_gen(ctx: RunContext) -> int:
    try:
        size_neg, size_pos = (int(x) for x in ctx.sizes.split(","))
    except ValueError:
        raise UsageError(f"bad sizes {ctx.sizes!r}")
    spec = SbmSpec(size_neg=size_neg, size_pos=size_pos, p_intra=ctx.p_intra,
                   p_inter=ctx.p_inter, label_align=ctx.label_align,
                   n_features=ctx.features, feature_snr=ctx.snr, seed=ctx.seed)
    dataset = generate_sbm(spec)
    save_dataset(dataset, ctx.emit("edges.csv"), ctx.emit("nodes.csv"))
    print(f"wrote {dataset.graph.n} nodes, {dataset.graph.edge_count} edges "
          f"({dataset.provenance})")
    return 0


HANDLERS = {
    "spectrum": cmd_spectrum,
    "design": cmd_design,
    "apply": cmd_apply,
    "label-prop": cmd_label_prop,
    "train-gcn": cmd_train_gcn,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "effective": cmd_effective,
    "sbm-gen": cmd_sbm_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        ctx = resolve_options(args)
        return HANDLERS[args.command](ctx)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FairfiltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
