"""Command-line pipeline: generate, optimize, evaluate, compare, predict.

Every subcommand is deterministic given its inputs and the master seed;
all randomness flows from that one seed. Exit codes: 0 success, 1 runtime
failure, 2 usage or validation error.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import elm, features, metrics, simkit, swarm

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

DEFAULT_SPLIT_FRACTION = 2200.0 / 3300.0
DEFAULT_HIDDEN = 50


class UsageError(Exception):
    pass


def _load_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            key, _, value = ln.partition("=")
            values[key.strip()] = value.strip()
    return values


def _merge_config(args, keys):
    """File values fill in flags the user left at None."""
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        for key, cast in keys.items():
            if getattr(args, key, None) is None and key in file_values:
                setattr(args, key, cast(file_values[key]))


def _sidecar_path(csv_path):
    return str(Path(csv_path).with_suffix(".meta"))


def _require(path, what):
    if not path:
        raise UsageError(f"missing required {what}")
    if not Path(path).exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _swarm_config(args, seed):
    kwargs = {"seed": seed}
    for flag, name in (("population", "population"),
                       ("iterations", "max_iterations"),
                       ("target", "fitness_target")):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[name] = value
    return swarm.SwarmConfig(**kwargs)


def cmd_generate(args):
    _merge_config(args, {"model": str, "grid": str, "out": str, "seed": int})
    model_path = _require(args.model, "model file")
    grid_path = _require(args.grid, "grid spec")
    if not args.out:
        raise UsageError("missing --out path for the knowledge base")
    model = simkit.load_model(model_path)
    spec = simkit.load_grid_spec(grid_path)
    if args.seed is not None:
        spec["seed"] = args.seed
    try:
        scenarios = simkit.build_scenario_grid(**spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    trajectories = [simkit.simulate_trajectory(model, sc)
                    for sc in scenarios]
    kb = features.build_knowledge_base(
        trajectories, model.n_generators, spec["seed"],
        provenance=f"{model.name}:{Path(grid_path).name}")
    features.save_knowledge_base(kb, args.out, _sidecar_path(args.out))
    n_stable = int(np.sum(kb.labels == features.STABLE))
    print(f"seed {spec['seed']}")
    print(f"wrote {kb.n_samples} samples ({kb.n_features} features) "
          f"to {args.out}")
    print(f"class balance: {n_stable} stable / "
          f"{kb.n_samples - n_stable} unstable")
    return EXIT_OK


def _prepare_training(args):
    kb_path = _require(args.kb, "knowledge base")
    kb = features.load_knowledge_base(kb_path, _sidecar_path(kb_path))
    if len(set(kb.labels.tolist())) < 2:
        raise UsageError("knowledge base contains a single class")
    seed = args.seed if args.seed is not None else kb.seed
    fraction = args.split_fraction or DEFAULT_SPLIT_FRACTION
    split = features.split_train_test(kb, fraction, seed)
    standardized = features.standardize(kb, train_indices=split.train)
    return kb, standardized, split, seed


def _optimize_once(standardized, split, seed, optimizer, args):
    hidden = args.hidden or DEFAULT_HIDDEN
    spec = swarm.EncodingSpec(n_features=standardized.n_features,
                              hidden=hidden)
    ctx = swarm.FitnessContext.build(
        standardized.samples[split.train],
        standardized.labels[split.train], spec, n_folds=5, seed=seed)
    config = _swarm_config(args, seed)
    t0 = time.perf_counter()
    result = swarm.OPTIMIZERS[optimizer](ctx, spec.dim, config)
    elapsed = time.perf_counter() - t0
    arch, mask = swarm.decode_particle(result.best_position, spec)
    model = elm.train(arch, standardized.samples[split.train][:, mask],
                      standardized.labels[split.train])
    model = elm.ElmModel(architecture=model.architecture,
                         output_weights=model.output_weights,
                         feature_mask=mask,
                         means=standardized.means,
                         stds=standardized.stds)
    return result, model, elapsed


def cmd_optimize(args):
    _merge_config(args, {"kb": str, "out": str, "optimizer": str,
                         "seed": int, "split_fraction": float,
                         "population": int, "iterations": int,
                         "hidden": int, "target": float})
    if not args.out:
        raise UsageError("missing --out directory")
    kb, standardized, split, seed = _prepare_training(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    optimizer = args.optimizer or "ipso"
    if optimizer not in swarm.OPTIMIZERS:
        raise UsageError(f"unknown optimizer '{optimizer}'")
    result, model, elapsed = _optimize_once(standardized, split, seed,
                                            optimizer, args)
    model_path = out_dir / "model.elm"
    trace_path = out_dir / "trace.csv"
    elm.save_model(model, model_path)
    swarm.save_trace(result.trace, trace_path)
    print(f"seed {seed}")
    print(f"optimizer {optimizer}: best CV fitness "
          f"{result.best_fitness:.4f} after {len(result.trace) - 1} "
          f"iterations ({result.evaluations} evaluations, {elapsed:.2f}s)")
    print(f"effective hidden nodes: "
          f"{model.architecture.effective_hidden_size}")
    print(f"wrote {model_path} and {trace_path}")
    return EXIT_OK


def cmd_evaluate(args):
    _merge_config(args, {"kb": str, "model": str, "out": str, "seed": int,
                         "split_fraction": float})
    model_path = _require(args.model, "model file")
    if not args.out:
        raise UsageError("missing --out directory")
    kb, _, split, seed = _prepare_training(args)
    model = elm.load_model(model_path)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def report_for(rows):
        t0 = time.perf_counter()
        scores = elm.predict_full(model, kb.samples[rows])
        predict_time = time.perf_counter() - t0
        predicted = np.where(scores >= 0.0, 1, -1)
        cm = metrics.ConfusionMatrix.from_labels(kb.labels[rows], predicted)
        acc = metrics.accuracy(cm)
        kap = metrics.kappa(cm)
        try:
            auc_value = metrics.auc(scores, kb.labels[rows])
            eta_value = metrics.eta(acc, kap, auc_value)
            note = ""
        except metrics.SingleClassError as exc:
            auc_value = eta_value = None
            note = f"AUC undefined: {exc}"
        return metrics.EvaluationReport(
            confusion=cm, acc=acc, kap=kap, auc=auc_value, eta=eta_value,
            train_time_s=0.0, predict_time_s=predict_time, note=note)

    rows = [("test", report_for(split.test)),
            ("train", report_for(split.train))]
    metrics.save_report_csv(rows, out_dir / "metrics.csv")
    text = (f"seed {seed}\n"
            + metrics.render_table(rows, include_time=False)
            + f"prediction time: {rows[0][1].predict_time_s * 1e3:.3f} ms "
            f"({len(split.test)} test samples)\n")
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_compare(args):
    _merge_config(args, {"kb": str, "out": str, "seed": int,
                         "split_fraction": float, "repeats": int,
                         "population": int, "iterations": int,
                         "hidden": int, "target": float})
    if not args.out:
        raise UsageError("missing --out path for the comparison CSV")
    repeats = args.repeats if args.repeats is not None else 1
    if repeats < 1:
        raise UsageError("repeats must be at least 1")
    kb, standardized, split, seed = _prepare_training(args)
    runs = {name: [] for name in swarm.OPTIMIZERS}
    for name in swarm.OPTIMIZERS:
        for r in range(repeats):
            run_args = argparse.Namespace(**vars(args))
            run_args.seed = seed + r
            result, model, elapsed = _optimize_once(
                standardized, split, seed + r, name, run_args)
            runs[name].append(
                (result.best_fitness,
                 model.architecture.effective_hidden_size, elapsed))
    best_overall = max(f for rows in runs.values() for f, _, _ in rows)
    threshold = 0.95 * best_overall
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    det_lines = ["algorithm,mean_best_fitness,success_rate,"
                 "mean_effective_nodes"]
    full_lines = ["algorithm,mean_train_time_s,mean_best_fitness,"
                  "success_rate,mean_effective_nodes"]
    for name, rows in runs.items():
        fits = [f for f, _, _ in rows]
        nodes = [n for _, n, _ in rows]
        times = [t for _, _, t in rows]
        success = sum(f >= threshold for f in fits) / len(fits)
        mean_fit = float(np.mean(fits))
        mean_nodes = float(np.mean(nodes))
        det_lines.append(f"{name},{mean_fit!r},{success!r},{mean_nodes!r}")
        full_lines.append(f"{name},{float(np.mean(times)):.3f},"
                          f"{mean_fit!r},{success!r},{mean_nodes!r}")
    out_path.write_text("\n".join(full_lines) + "\n", encoding="utf-8")
    det_path = out_path.with_name(out_path.stem + "_deterministic.csv")
    det_path.write_text("\n".join(det_lines) + "\n", encoding="utf-8")
    print(f"seed {seed} (repeats {repeats})")
    print("\n".join(full_lines))
    return EXIT_OK


def cmd_predict(args):
    _merge_config(args, {"model": str, "input": str})
    model_path = _require(args.model, "model file")
    model = elm.load_model(model_path)
    n_full = model.feature_mask.shape[0]
    if args.row:
        raw_rows = [args.row]
    elif args.input:
        _require(args.input, "input file")
        with open(args.input, encoding="utf-8") as fh:
            raw_rows = [ln.strip() for ln in fh if ln.strip()]
        if raw_rows and raw_rows[0].startswith("label"):
            raw_rows = raw_rows[1:]
    else:
        raise UsageError("provide --row or --input")
    for raw in raw_rows:
        try:
            values = [float(v) for v in raw.split(",")]
        except ValueError as exc:
            raise UsageError(f"malformed sample row: {exc}") from exc
        if len(values) == n_full + 1:
            values = values[1:]  # leading label column from a KB CSV
        if len(values) != n_full:
            raise UsageError(
                f"sample has {len(values)} values, model expects {n_full}")
        t0 = time.perf_counter()
        score = float(elm.predict_full(model, values)[0])
        latency_ms = (time.perf_counter() - t0) * 1e3
        label = 1 if score >= 0.0 else -1
        print(f"{label:+d} score={score!r} latency_ms={latency_ms:.3f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tspred",
        description="Transient stability prediction with a swarm-optimized "
                    "extreme learning machine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value defaults file")
        p.add_argument("--seed", type=int, help="master seed")

    p = sub.add_parser("generate", help="simulate a scenario grid into a "
                                        "knowledge base CSV")
    common(p)
    p.add_argument("--model", help="power-system model (.sys)")
    p.add_argument("--grid", help="scenario grid spec (.grid)")
    p.add_argument("--out", help="knowledge base CSV path")
    p.set_defaults(func=cmd_generate)

    def training_flags(p):
        common(p)
        p.add_argument("--kb", help="knowledge base CSV")
        p.add_argument("--split-fraction", dest="split_fraction", type=float)
        p.add_argument("--population", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--target", type=float)

    p = sub.add_parser("optimize", help="fit the classifier with the "
                                        "selected optimizer")
    training_flags(p)
    p.add_argument("--optimizer", choices=sorted(swarm.OPTIMIZERS))
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="score the held-out rows of a "
                                        "knowledge base")
    training_flags(p)
    p.add_argument("--model", help="trained model (.elm)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run ipso/pso/ga repeatedly and "
                                       "tabulate the comparison")
    training_flags(p)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", help="comparison CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="score one raw sample with a "
                                       "persisted model")
    common(p)
    p.add_argument("--model", help="trained model (.elm)")
    p.add_argument("--row", help="comma-separated raw feature row")
    p.add_argument("--input", help="file of comma-separated rows")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (simkit.SimkitError, features.FeatureError, elm.ElmError,
            metrics.MetricsError, ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
