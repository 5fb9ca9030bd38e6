"""Command-line interface: simulate, fit, predict, emulate, benchmark.

Every run writes its resolved parameters to ``run_config.json`` in the
output directory (execution details like the output path and thread count
excluded); re-running the same subcommand with ``--config`` pointing at
that echo reproduces every output byte for byte.  Randomness always flows
from the single ``--seed`` through documented sub-seed derivation, so the
thread count never changes results.

Exit codes: 0 success, 1 invalid input, 2 fit flagged as non-converged.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import studies
from ._util import STREAM_QUERY_POINT, derive_int_seed
from .estimation import FitOptions, FittedModel, fit
from .inference import coef_report
from .kernel import KernelSpec
from .panel import ModelOrder, PanelDataError, load_panel, standardize_design
from .prediction import MHConfig, emulate_series, predict_at, sample_chain
from .simgen import gen_demo_1d, gen_friedman_panel, gen_gp_panel, reference_gp_truth

log = logging.getLogger("binarygp.cli")

CONFIG_SCHEMA_VERSION = 1


class CliError(Exception):
    """User-facing input problem; maps to exit code 1."""


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if isinstance(value, (np.bool_, bool)):
        return str(bool(value)).lower()
    return value


def write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def write_matrix_csv(path, matrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(matrix):
            writer.writerow([_fmt(float(v)) for v in row])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v != ""]
    except ValueError:
        raise CliError(f"cannot parse {text!r} as comma-separated numbers") from None


def _parse_binary(text):
    values = _parse_floats(text)
    if any(v not in (0.0, 1.0) for v in values):
        raise CliError(f"history must be 0/1 values, got {text!r}")
    return [int(v) for v in values]


def _merged(args, keys):
    """Resolve parameters: CLI flag if given, else --config value, else default."""
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
    resolved = {}
    for key, default in keys.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            resolved[key] = cli_val
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _out_dir(args):
    if not args.out_dir:
        raise CliError("--out-dir is required")
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(out, subcommand, params):
    write_json(out / "run_config.json", {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "subcommand": subcommand,
        **params,
    })


def _mh_from(params):
    return MHConfig(
        n_samples=int(params["mh_samples"]),
        burn_in=int(params["mh_burnin"]),
        thin=int(params["mh_thin"]),
        seed=int(params["seed"]),
    )


def cmd_simulate(args):
    params = _merged(args, {
        "generator": "gp", "n": 50, "t": 10, "n_test": 0, "seed": 0,
    })
    out = _out_dir(args)
    gen_name = params["generator"]
    n, t, n_test, seed = int(params["n"]), int(params["t"]), int(params["n_test"]), int(params["seed"])
    if gen_name == "gp":
        sim = gen_gp_panel(replace(reference_gp_truth(), seed=seed), n, t, n_test=n_test)
    elif gen_name == "friedman":
        sim = gen_friedman_panel(n, t, seed, n_test=n_test)
    elif gen_name == "demo1d":
        sim = gen_demo_1d(n, seed)
    else:
        raise CliError(f"unknown generator {gen_name!r}")
    write_matrix_csv(out / "inputs.csv", sim.design.sites)
    write_matrix_csv(out / "panel.csv", sim.panel.y)
    write_matrix_csv(out / "true_p.csv", sim.true_p)
    if sim.test_design is not None:
        write_matrix_csv(out / "test_inputs.csv", sim.test_design.sites)
        write_matrix_csv(out / "test_panel.csv", sim.test_panel.y)
        write_matrix_csv(out / "test_true_p.csv", sim.test_true_p)
    write_json(out / "truth.json", sim.spec.to_dict())
    _echo_config(out, "simulate", params)
    return 0


def cmd_fit(args):
    params = _merged(args, {
        "inputs": None, "panel": None, "header": False, "standardize": False,
        "order_r": 0, "order_l": 0, "kernel_power": 2.0, "seed": 0,
        "max_outer": None, "optimizer_max_evals": None, "fix_sigma2": None,
    })
    if not params["inputs"] or not params["panel"]:
        raise CliError("fit requires --inputs and --panel")
    out = _out_dir(args)
    design, panel = load_panel(params["inputs"], params["panel"], header=bool(params["header"]))
    scaling = None
    if params["standardize"]:
        design, scaling = standardize_design(design)
    order = ModelOrder(R=int(params["order_r"]), L=int(params["order_l"]))
    kernel_spec = KernelSpec(lengthscales=np.ones(design.d), power=float(params["kernel_power"]))
    opts = FitOptions()
    if params["max_outer"] is not None:
        opts = replace(opts, outer_max_iter=int(params["max_outer"]))
    if params["optimizer_max_evals"] is not None:
        opts = replace(opts, optimizer_max_evals=int(params["optimizer_max_evals"]))
    if params["fix_sigma2"] is not None:
        from .estimation import CovParams

        opts = replace(opts, fix_cov=CovParams(
            sigma2=float(params["fix_sigma2"]), theta=np.ones(design.d)))
    model = fit(design, panel, order, kernel_spec, opts)
    model.input_scaling = scaling
    model.save(out / "model.json")
    report = coef_report(model)
    report.to_csv(out / "coefficients.csv")
    write_json(out / "fit_summary.json", {
        "converged": model.report.converged,
        "convergence": model.report.to_dict(),
        "cov": model.cov.to_dict(),
        "coefficients": report.to_dict(),
    })
    _echo_config(out, "fit", params)
    return 0 if model.report.converged else 2


def _load_model(params):
    if not params["model"]:
        raise CliError("a --model file is required")
    try:
        return FittedModel.load(params["model"])
    except FileNotFoundError:
        raise CliError(f"model file not found: {params['model']}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _check_point(point, model):
    if len(point) != model.design.d:
        raise CliError(
            f"query point has {len(point)} coordinates but the model "
            f"expects {model.design.d}"
        )
    return np.asarray(point, dtype=float)


def cmd_predict(args):
    params = _merged(args, {
        "model": None, "xnew": None, "xnew_file": None, "history": None,
        "mh_samples": 1000, "mh_burnin": 500, "mh_thin": 2, "seed": 0,
        "quantiles": "0.025,0.5,0.975",
    })
    out = _out_dir(args)
    model = _load_model(params)
    quantiles = _parse_floats(params["quantiles"])
    cfg = _mh_from(params)
    points = []
    if params["xnew"] is not None:
        points.append(_parse_floats(params["xnew"]))
    if params["xnew_file"]:
        points.extend(np.loadtxt(params["xnew_file"], delimiter=",", ndmin=2).tolist())
    if not points:
        raise CliError("predict requires --xnew or --xnew-file")
    history = _parse_binary(params["history"]) if params["history"] else []
    if history and len(points) > 1:
        raise CliError("--history applies to a single --xnew point")
    rows = []
    chain = None
    if not history:
        chain = sample_chain(model, cfg)
    for idx, point in enumerate(points):
        summary = predict_at(
            model, _check_point(point, model), history=history, cfg=cfg,
            quantiles=quantiles, chain=chain,
            draw_seed=derive_int_seed(cfg.seed, STREAM_QUERY_POINT, idx),
        )
        row = {"point": idx, "time_step": summary.time_step,
               "mean": summary.mean, "variance": summary.variance}
        for q in quantiles:
            row[f"q{q}"] = summary.quantiles[float(q)]
        row["acceptance_rate"] = summary.acceptance_rate
        row["split_rhat"] = summary.split_rhat
        rows.append(row)
    write_csv(out / "prediction.csv", rows[0].keys(), rows)
    write_json(out / "prediction.json", {"points": [
        {**{"x": points[i]}, **rows[i]} for i in range(len(points))
    ]})
    _echo_config(out, "predict", params)
    return 0


def cmd_emulate(args):
    params = _merged(args, {
        "model": None, "xnew": None, "t_out": None,
        "mh_samples": 1000, "mh_burnin": 500, "mh_thin": 2, "seed": 0,
        "quantiles": "0.025,0.5,0.975",
    })
    if params["xnew"] is None:
        raise CliError("emulate requires --xnew")
    out = _out_dir(args)
    model = _load_model(params)
    t_out = int(params["t_out"]) if params["t_out"] is not None else model.panel.T
    quantiles = _parse_floats(params["quantiles"])
    cfg = _mh_from(params)
    emu = emulate_series(
        model, _check_point(_parse_floats(params["xnew"]), model), t_out,
        cfg=cfg, quantiles=quantiles,
    )
    rows = []
    for i, t in enumerate(emu.times):
        row = {"t": int(t), "p_median": emu.p_median[i], "y_median": emu.y_median[i]}
        for q in quantiles:
            row[f"p_q{q}"] = emu.p_quantiles[float(q)][i]
        rows.append(row)
    write_csv(out / "emulation.csv", rows[0].keys(), rows)
    write_json(out / "emulation.json", {
        "acceptance_rate": emu.acceptance_rate,
        "split_rhat": emu.split_rhat,
        "mh": emu.config.to_dict(),
        "t_out": t_out,
    })
    _echo_config(out, "emulate", params)
    return 0


def cmd_benchmark(args):
    params = _merged(args, {"study": None, "seed": None})
    study = args.study or params["study"]
    if not study:
        raise CliError("benchmark requires a study name")
    out = _out_dir(args)
    study_cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            study_cfg = json.load(fh)
        study_cfg.pop("schema_version", None)
        study_cfg.pop("subcommand", None)
        study_cfg.pop("study", None)
    if params["seed"] is not None:
        study_cfg["seed"] = int(params["seed"])
    rows, summary = studies.run_study(study, study_cfg, threads=args.threads or 1)
    fieldnames = sorted({k for row in rows for k in row}, key=lambda k: (k != "replicate", k))
    write_csv(out / "results.csv", fieldnames, [
        {k: row.get(k, "") for k in fieldnames} for row in rows
    ])
    write_json(out / "summary.json", summary)
    _echo_config(out, "benchmark", {
        "study": study, **studies._merge_config(study, study_cfg),
    })
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="binarygp",
        description="Binary time-series Gaussian process modeling and emulation",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--out-dir", help="directory for outputs")
        p.add_argument("--config", help="JSON file of stored parameters (CLI flags win)")
        p.add_argument("--seed", type=int, default=None, help="master random seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes for replicate-level parallelism")

    p = sub.add_parser("simulate", help="generate synthetic panels")
    common(p)
    p.add_argument("--generator", choices=("gp", "friedman", "demo1d"), default=None)
    p.add_argument("--n", type=int, default=None, help="number of input sites")
    p.add_argument("--t", type=int, default=None, help="series length")
    p.add_argument("--n-test", dest="n_test", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model to a data pair")
    common(p)
    p.add_argument("--inputs", help="CSV of input sites (n x d)")
    p.add_argument("--panel", help="CSV of binary responses (n x T)")
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                   help="rescale each input column to [0, 1] before fitting")
    p.add_argument("--order-r", dest="order_r", type=int, default=None)
    p.add_argument("--order-l", dest="order_l", type=int, default=None)
    p.add_argument("--kernel-power", dest="kernel_power", type=float, default=None)
    p.add_argument("--max-outer", dest="max_outer", type=int, default=None)
    p.add_argument("--optimizer-max-evals", dest="optimizer_max_evals", type=int, default=None)
    p.add_argument("--fix-sigma2", dest="fix_sigma2", type=float, default=None,
                   help="skip covariance estimation, pinning sigma^2 (theta = 1)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predictive distribution at new inputs")
    common(p)
    p.add_argument("--model", help="fitted model JSON")
    p.add_argument("--xnew", help="comma-separated coordinates of one input")
    p.add_argument("--xnew-file", dest="xnew_file", help="CSV of query points")
    p.add_argument("--history", help="comma-separated 0/1 responses already seen")
    p.add_argument("--mh-samples", dest="mh_samples", type=int, default=None)
    p.add_argument("--mh-burnin", dest="mh_burnin", type=int, default=None)
    p.add_argument("--mh-thin", dest="mh_thin", type=int, default=None)
    p.add_argument("--quantiles", help="comma-separated levels in (0,1)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("emulate", help="emulate new series at an input")
    common(p)
    p.add_argument("--model", help="fitted model JSON")
    p.add_argument("--xnew", help="comma-separated coordinates of one input")
    p.add_argument("--t-out", dest="t_out", type=int, default=None)
    p.add_argument("--mh-samples", dest="mh_samples", type=int, default=None)
    p.add_argument("--mh-burnin", dest="mh_burnin", type=int, default=None)
    p.add_argument("--mh-thin", dest="mh_thin", type=int, default=None)
    p.add_argument("--quantiles", help="comma-separated levels in (0,1)")
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("benchmark", help="run a named study")
    common(p)
    p.add_argument("study", nargs="?", choices=studies.STUDIES)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    level = os.environ.get("BINARYGP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, PanelDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
