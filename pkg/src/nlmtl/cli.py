"""Command-line interface.

Subcommands: synth, train, predict, eval, experiment, rank-fit, rank-decode,
qconst.  Configs and specs are JSON (inline or @-free file paths), datasets
are headed CSV.  Column conventions:

    datasets:     x0..x{d-1}, y0..y{T-1}
    queries:      x0..x{d-1}
    predictions:  y0..y{T-1}, gamma_residual
    ranking data: x0..x{d-1}, p, q, label

Any error exits nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import harness, ranking
from .constraints import ConstraintSpec, gamma_residual
from .estimator import (
    LossSpec,
    MultitaskData,
    NlMtlModel,
    ViolationParams,
    fit,
    predict_many,
    predict_perturbed,
    predict_robust,
    prediction_metadata,
    q_constant,
)
from .kernels import KernelSpec
from .scores import lambda_preset


def _load_json_arg(value: str, base_dir_out: list | None = None) -> dict:
    """Accept inline JSON or a path to a JSON file."""
    value = value.strip()
    if value.startswith("{"):
        return json.loads(value)
    with open(value) as fh:
        if base_dir_out is not None:
            base_dir_out.append(os.path.dirname(os.path.abspath(value)))
        return json.load(fh)


def _parse_kernel(value: str) -> KernelSpec:
    return KernelSpec.from_dict(_load_json_arg(value))


def _parse_constraint(value: str) -> ConstraintSpec:
    base = []
    d = _load_json_arg(value, base)
    return ConstraintSpec.from_dict(d, base_dir=base[0] if base else os.getcwd())


def _read_csv(path: str) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=float)


def _columns(header: list, prefix: str) -> list:
    cols = [i for i, name in enumerate(header) if name.startswith(prefix)]
    if not cols:
        raise ValueError(f"no '{prefix}*' columns found in header {header}")
    return cols


def _write_csv(path: str, header: list, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _cmd_synth(args) -> int:
    ds = harness.gen_synthetic(args.curve, args.n, args.sigma, args.seed)
    header = [f"x{j}" for j in range(ds.x.shape[1])] + [f"y{t}" for t in range(ds.y.shape[1])]
    _write_csv(args.out, header, np.hstack([ds.x, ds.y]))
    if args.truth_out:
        _write_csv(args.truth_out, header, np.hstack([ds.x, ds.truth]))
    return 0


def _cmd_train(args) -> int:
    header, data = _read_csv(args.data)
    xcols = _columns(header, "x")
    ycols = _columns(header, "y")
    x, Y = data[:, xcols], data[:, ycols]
    kernel = _parse_kernel(args.kernel)
    constraint = _parse_constraint(args.constraint)
    if args.ridge_preset:
        lam = lambda_preset(args.ridge_preset, x.shape[0])
    else:
        lam = args.ridge
    model = fit(MultitaskData.from_vvr(x, Y), kernel, lam, constraint, LossSpec(args.loss))
    model.save(args.out)
    print(f"trained {Y.shape[1]}-task model on {x.shape[0]} samples -> {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = NlMtlModel.load(args.model)
    header, data = _read_csv(args.queries)
    X = data[:, _columns(header, "x")]
    params = None
    if args.delta is not None or args.mu is not None:
        params = ViolationParams(delta=args.delta, mu=args.mu)
    if params is None:
        preds = predict_many(model, X)
        meta = prediction_metadata("exact")
    elif params.delta is not None:
        preds = np.array([predict_robust(model, X[j], params.delta) for j in range(X.shape[0])])
        meta = prediction_metadata("robust", delta=params.delta)
    else:
        preds = np.array([predict_perturbed(model, X[j], params.mu) for j in range(X.shape[0])])
        meta = prediction_metadata("perturbed", mu=params.mu)
    resid = np.array([gamma_residual(model.constraint, preds[j]) for j in range(preds.shape[0])])
    out_header = [f"y{t}" for t in range(preds.shape[1])] + ["gamma_residual"]
    _write_csv(args.out, out_header, np.hstack([preds, resid[:, None]]))
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return 0


def _cmd_eval(args) -> int:
    phead, pdata = _read_csv(args.pred)
    thead, tdata = _read_csv(args.truth)
    pred = pdata[:, _columns(phead, "y")]
    truth = tdata[:, _columns(thead, "y")]
    metrics = {
        "mse": harness.mse(pred, truth),
        "explained_variance": harness.explained_variance(pred, truth),
    }
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_experiment(args) -> int:
    cfg = harness.ExperimentConfig.from_dict(_load_json_arg(args.config))
    result = harness.run_experiment(cfg)
    with open(args.out, "w") as fh:
        fh.write(result.to_json() + "\n")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(result.to_csv())
    print(json.dumps(result.summary(), indent=2, sort_keys=True))
    return 0


def _cmd_rank_fit(args) -> int:
    header, data = _read_csv(args.data)
    xcols = _columns(header, "x")
    p_col = header.index("p")
    q_col = header.index("q")
    l_col = header.index("label")
    pair_data = ranking.build_pair_datasets(
        args.docs, data[:, xcols], data[:, p_col], data[:, q_col], data[:, l_col]
    )
    model = ranking.fit_ranking(args.docs, pair_data, _parse_kernel(args.kernel),
                                args.ridge, weighted=args.weighted)
    model.save(args.out)
    informed = sum(m is not None for m in model.pair_models)
    print(f"fitted {informed}/{len(model.pair_models)} informed pairs -> {args.out}")
    return 0


def _cmd_rank_decode(args) -> int:
    model = ranking.RankingModel.load(args.model)
    header, data = _read_csv(args.queries)
    X = data[:, _columns(header, "x")]
    decoded = [ranking.decode(model, X[j], exact=args.exact).to_dict()
               for j in range(X.shape[0])]
    text = json.dumps(decoded, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_qconst(args) -> int:
    spec = _parse_constraint(args.constraint)
    print(json.dumps({"q_constant": q_constant(spec, args.samples)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlmtl",
        description="Multitask kernel ridge regression with nonlinear output constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic curve dataset CSV")
    p.add_argument("--curve", choices=["circle", "lemniscate"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None, help="also write the noiseless outputs")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit a constrained multitask model")
    p.add_argument("--data", required=True, help="CSV with x* and y* columns")
    p.add_argument("--kernel", required=True, help="kernel spec JSON (inline or path)")
    p.add_argument("--constraint", required=True, help="constraint spec JSON (inline or path)")
    p.add_argument("--ridge", type=float, default=1e-3, help="shared ridge parameter")
    p.add_argument("--ridge-preset", choices=["n^-1/4", "n^-1/2"], default=None)
    p.add_argument("--loss", choices=["square", "hinge", "logistic"], default="square")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict on a query CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True, help="CSV with x* columns")
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, default=None, help="robust radius (>= 0)")
    p.add_argument("--mu", type=float, default=None, help="distance-penalty weight (> 0)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="score predictions against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run the seeded synthetic benchmark")
    p.add_argument("--config", required=True, help="experiment config JSON (inline or path)")
    p.add_argument("--out", required=True, help="results JSON path")
    p.add_argument("--csv", default=None, help="optional per-trial CSV (includes runtimes)")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("rank-fit", help="fit per-pair ranking score models")
    p.add_argument("--data", required=True, help="CSV with x*, p, q, label columns")
    p.add_argument("--docs", type=int, required=True, help="number of documents D")
    p.add_argument("--kernel", required=True)
    p.add_argument("--ridge", type=float, default=1e-3)
    p.add_argument("--weighted", action="store_true",
                   help="treat labels as real-valued weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rank_fit)

    p = sub.add_parser("rank-decode", help="decode rankings for query points")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--exact", action="store_true", help="exhaustive order search (D <= 8)")
    p.set_defaults(func=_cmd_rank_decode)

    p = sub.add_parser("qconst", help="comparison constant of a constraint set")
    p.add_argument("--constraint", required=True)
    p.add_argument("--samples", type=int, default=4096)
    p.set_defaults(func=_cmd_qconst)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface everything as a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
