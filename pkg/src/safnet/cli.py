"""Command-line front end: cv, train, eval, gridsearch, synth, gradcheck.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or ingestion error.
Seeds are mandatory wherever randomness is involved; nothing is written
outside paths given on the command line.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines, dataio, evaluation, model, training
from .linalg import Matrix

CONFIG_KEYS = {
    "learning_rate", "epochs", "batch_mode", "class_weight_pos", "class_weight_neg",
    "adam_beta1", "adam_beta2", "adam_epsilon", "threshold",
    "d_model", "d_k", "knn_k", "mlp_hidden", "folds", "jobs",
}


def _merge_config(args: argparse.Namespace) -> dict:
    """Flags override JSON config file values, which override defaults."""
    merged: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(file_cfg)
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _train_config(merged: dict, seed: int) -> training.TrainConfig:
    kwargs = {
        k: merged[k]
        for k in (
            "learning_rate", "epochs", "batch_mode", "class_weight_pos",
            "class_weight_neg", "adam_beta1", "adam_beta2", "adam_epsilon", "threshold",
        )
        if k in merged
    }
    return training.TrainConfig(seed=seed, **kwargs)


def _model_spec(name: str, merged: dict, grid: bool) -> evaluation.ModelSpec:
    spec = evaluation.ModelSpec(kind=name)
    for key in ("d_model", "d_k", "knn_k", "mlp_hidden"):
        if key in merged:
            spec = replace(spec, **{key: merged[key]})
    if grid:
        if name != "knn":
            raise ValueError("--grid is only supported for --model knn")
        spec = replace(spec, knn_grid=(1, 3, 5, 7, 9, 11))
    return spec


def _load_dataset(path: str, standardize: bool) -> dataio.Dataset:
    dataset = dataio.load_feature_csv(path)
    if not dataset.samples:
        raise dataio.IngestionError(f"{path}: no samples")
    return dataio.standardize(dataset) if standardize else dataset


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _emit_report(report: evaluation.MetricReport, model_name: str, seed: int, out: str | None) -> None:
    text = evaluation.report_to_text(report, model_name)
    sys.stdout.write(text)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "report.json", evaluation.report_to_json(report, model_name, seed))
        _write_json(out_dir / "confusion.json", evaluation.confusion_to_json(report))
        (out_dir / "report.txt").write_text(text, encoding="utf-8")


def _cmd_cv(args: argparse.Namespace) -> int:
    merged = _merge_config(args)
    dataset = _load_dataset(args.features, args.standardize)
    config = _train_config(merged, args.seed)
    spec = _model_spec(args.model, merged, args.grid)
    report = evaluation.run_experiment(
        dataset.samples, spec, config,
        k=merged.get("folds", 10), jobs=merged.get("jobs", 1),
    )
    _emit_report(report, args.model, args.seed, args.out)
    return 0


def _params_to_json(params: model.SafNetParams) -> dict:
    d = params.dims
    return {
        "kind": "safnet",
        "dims": {"d_in": d.d_in, "d_model": d.d_model, "d_k": d.d_k, "n_views": d.n_views},
        "tensors": {name: t.tolist() for name, t in params.tensors().items()},
    }


def _params_from_json(doc: dict):
    kind = doc["kind"]
    if kind == "safnet":
        dims = model.ModelDims(**doc["dims"])
        tensors = {name: np.array(vals) for name, vals in doc["tensors"].items()}
        return kind, model.SafNetParams.from_tensors(tensors, dims)
    if kind == "mlp":
        t = doc["tensors"]
        return kind, baselines.MlpBaseline(
            w1=np.array(t["w1"]), b1=np.array(t["b1"]), w2=np.array(t["w2"]), b2=t["b2"]
        )
    if kind == "knn":
        return kind, baselines.KnnModel(
            points=np.array(doc["points"]), labels=np.array(doc["labels"]), k=doc["k"]
        )
    raise ValueError(f"unknown model kind {kind!r} in params file")


def _cmd_train(args: argparse.Namespace) -> int:
    merged = _merge_config(args)
    dataset = _load_dataset(args.features, args.standardize)
    config = _train_config(merged, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.model == "safnet":
        dims = model.ModelDims(
            d_in=dataset.d_in, d_model=merged.get("d_model", 64), d_k=merged.get("d_k", 32)
        )
        params, history = training.train_model(dataset.samples, config, dims)
        _write_json(out_dir / "params.json", _params_to_json(params))
        _write_json(out_dir / "history.json", {"losses": list(history.losses)})
    elif args.model == "mlp":
        mlp = baselines.mlp_train(dataset.samples, config, hidden=merged.get("mlp_hidden", 128))
        _write_json(out_dir / "params.json", {
            "kind": "mlp",
            "tensors": {
                "w1": mlp.w1.tolist(), "b1": mlp.b1.tolist(),
                "w2": mlp.w2.tolist(), "b2": mlp.b2,
            },
        })
    else:
        knn = baselines.knn_fit(dataset.samples, merged.get("knn_k", 5))
        _write_json(out_dir / "params.json", {
            "kind": "knn", "points": knn.points.tolist(),
            "labels": knn.labels.tolist(), "k": knn.k,
        })
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    merged = _merge_config(args)
    dataset = _load_dataset(args.features, args.standardize)
    with open(args.params, "r", encoding="utf-8") as fh:
        kind, params = _params_from_json(json.load(fh))
    threshold = merged.get("threshold", 0.5)
    if kind == "safnet":
        probs = [model.predict_prob(s, params) for s in dataset.samples]
    elif kind == "mlp":
        probs = [baselines.mlp_predict_prob(params, baselines.flatten_features(s)) for s in dataset.samples]
    else:
        probs = [baselines.knn_predict(params, baselines.flatten_features(s))[1] for s in dataset.samples]
    cm = evaluation.confusion(probs, dataset.labels(), threshold)
    metrics = evaluation.metrics_from_cm(cm)
    report = evaluation.aggregate_folds([(cm, metrics)])
    _emit_report(report, kind, 0, args.out)
    return 0


def _cmd_gridsearch(args: argparse.Namespace) -> int:
    merged = _merge_config(args)
    dataset = _load_dataset(args.features, args.standardize)
    config = _train_config(merged, args.seed)
    spec = _model_spec(args.model, merged, grid=False)
    if args.model == "knn":
        grid = [{"knn_k": k} for k in args.grid_k]
    elif args.model == "mlp":
        grid = [{"mlp_hidden": h} for h in args.grid_hidden]
    else:
        raise ValueError("gridsearch supports --model knn or mlp")
    result = evaluation.grid_search(spec, grid, dataset.samples, seed=args.seed, config=config)
    payload = {
        "best": result.best,
        "best_index": result.best_index,
        "mean_accuracies": list(result.mean_accuracies),
    }
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "gridsearch.json", payload)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = dataio.SynthSpec(
        n_samples=args.n, n_pos=args.pos, d_in=args.dim, mode=args.mode,
        signal_strength=args.signal, noise_sigma=args.noise, seed=args.seed,
    )
    dataset = dataio.synth_generate(spec)
    dataio.write_feature_csv(dataset, args.out)
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    dims = model.ModelDims(d_in=args.din, d_model=args.dmodel, d_k=args.dk)
    params = model.init_params(dims, rng)
    samples = [
        model.MultiViewSample(
            patient_id=f"G{i}", label=int(i % 2), features=Matrix(rng.normal(size=(args.din, 2)))
        )
        for i in range(args.samples)
    ]
    report = training.grad_check(params, samples, rel_tolerance=args.tolerance)
    for name in model.PARAM_FIELDS:
        status = "FAIL" if name in report.failed else "ok"
        sys.stdout.write(f"{name:<8} max_rel_error={report.max_rel_error[name]:.3e}  {status}\n")
    sys.stdout.write(f"tolerance={args.tolerance:g} -> {'PASS' if report.passed else 'FAIL'}\n")
    return 0 if report.passed else 1


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _add_common(p: argparse.ArgumentParser, features: bool = True) -> None:
    if features:
        p.add_argument("--features", required=True, help="feature CSV path")
    p.add_argument("--seed", type=int, required=True, help="deterministic RNG seed")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output directory for report files")
    p.add_argument("--standardize", action="store_true", help="per-feature z-scoring before use")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--d-model", dest="d_model", type=int)
    p.add_argument("--d-k", dest="d_k", type=int)
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--mlp-hidden", dest="mlp_hidden", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    _add_common(p)
    p.add_argument("--model", choices=("safnet", "knn", "mlp"), default="safnet")
    p.add_argument("--folds", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--grid", action="store_true", help="inner 3-fold grid search per outer fold (knn)")
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("train", help="train one model on the whole file")
    _add_common(p)
    p.add_argument("--model", choices=("safnet", "knn", "mlp"), default="safnet")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate saved parameters on a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--params", required=True, help="params.json written by train")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output directory for report files")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gridsearch", help="3-fold grid search over the whole file")
    _add_common(p)
    p.add_argument("--model", choices=("knn", "mlp"), default="knn")
    p.add_argument("--grid-k", dest="grid_k", type=_int_list, default=[1, 3, 5, 7, 9, 11])
    p.add_argument("--grid-hidden", dest="grid_hidden", type=_int_list, default=[32, 64, 128])
    p.set_defaults(func=_cmd_gridsearch)

    p = sub.add_parser("synth", help="generate a synthetic feature CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pos", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--mode", choices=("linear", "interaction"), default="linear")
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    p.add_argument("--din", type=int, default=20)
    p.add_argument("--dmodel", type=int, default=8)
    p.add_argument("--dk", type=int, default=4)
    p.add_argument("--samples", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and not args.out:
        parser.error("train requires --out")
    try:
        return args.func(args)
    except (dataio.IngestionError, FileNotFoundError, IsADirectoryError, ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"safnet {args.command}: error: {exc}\n")
        return 2
    except Exception as exc:  # numeric or internal failure
        sys.stderr.write(f"safnet {args.command}: failure: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
