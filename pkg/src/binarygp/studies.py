"""Named benchmark studies runnable from the CLI or the test suite.

Each study draws replicate datasets from a fixed truth, fits models, and
writes a tidy row-per-result CSV plus a JSON summary.  Replicate r of a
study with master seed s uses the sub-seed (s, STREAM_REPLICATE, r), so a
process pool over replicates returns exactly the serial results.

Studies
-------
``table1``    coefficient / covariance-parameter recovery on GP panels
``table3``    same replicates plus emulated-prediction RMSPE at held-out
              inputs (``table1`` with ``n_test = 0`` skips prediction)
``friedman``  RMSPE comparison of the GP model against the glm / glm_ts
              logistic baselines on Friedman-surface panels
``cv-scores`` site-wise cross-validated proper scores on one Friedman panel
"""

import concurrent.futures
from dataclasses import replace

import numpy as np

from ._util import STREAM_REPLICATE, derive_int_seed
from .estimation import FitOptions, fit
from .kernel import KernelSpec
from .metrics import (cross_validate, fit_baseline, marginal_panel,
                      predicted_panel, rmspe)
from .panel import ModelOrder
from .prediction import MHConfig, sample_chain
from .simgen import gen_friedman_panel, gen_gp_panel, reference_gp_truth

__all__ = ["STUDIES", "study_defaults", "run_study"]

STUDIES = ("table1", "table3", "friedman", "cv-scores")

# The single-site chain mixes slowly under strong spatial correlation, so
# the study defaults thin aggressively; the chain is cheap next to the fit.
_COMMON_DEFAULTS = {
    "replicates": 10,
    "seed": 0,
    "mh": {"n_samples": 500, "burn_in": 2000, "thin": 10, "seed": 0},
    "fit": {},
}

_DEFAULTS = {
    "table1": {**_COMMON_DEFAULTS, "n": 200, "t": 20, "n_test": 0},
    "table3": {**_COMMON_DEFAULTS, "n": 200, "t": 20, "n_test": 20},
    "friedman": {
        **_COMMON_DEFAULTS,
        "n": 100,
        "t": 10,
        "n_test": 50,
        "mh": {"n_samples": 1000, "burn_in": 3000, "thin": 10, "seed": 0},
    },
    "cv-scores": {
        **_COMMON_DEFAULTS,
        "n": 40,
        "t": 10,
        "folds": 10,
        "methods": ["binarygp", "glm", "glm_ts"],
    },
}


def study_defaults(name):
    if name not in _DEFAULTS:
        raise ValueError(f"unknown study {name!r}; available: {STUDIES}")
    return {k: (dict(v) if isinstance(v, dict) else v) for k, v in _DEFAULTS[name].items()}


def _merge_config(name, config):
    merged = study_defaults(name)
    for key, value in (config or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def _fit_options(cfg):
    return FitOptions(**cfg.get("fit", {}))


def _gp_replicate(args):
    """One GP-panel replicate: generate, fit, optionally score prediction."""
    rep, cfg = args
    rep_seed = derive_int_seed(cfg["seed"], STREAM_REPLICATE, rep)
    truth = replace(reference_gp_truth(), seed=rep_seed)
    sim = gen_gp_panel(truth, cfg["n"], cfg["t"], n_test=cfg["n_test"])
    model = fit(sim.design, sim.panel, truth.order,
                KernelSpec(lengthscales=np.ones(5)), _fit_options(cfg))
    row = {
        "replicate": rep,
        "converged": model.report.converged,
        "sigma2": model.cov.sigma2,
    }
    for name, value in zip(model.coefficient_names, model.coefficients.to_vector()):
        row[name] = float(value)
    for j, th in enumerate(model.cov.theta, start=1):
        row[f"theta{j}"] = float(th)
    if cfg["n_test"]:
        mh = MHConfig(**{**cfg["mh"], "seed": derive_int_seed(rep_seed, 1)})
        chain = sample_chain(model, mh)
        pred = predicted_panel(model, sim.test_design, sim.test_panel, chain=chain)
        row["rmspe"] = rmspe(sim.test_true_p, pred)
    return row


def _friedman_replicate(args):
    """One Friedman replicate: RMSPE for the GP model and both baselines.

    All three methods forecast held-out sites with no access to their
    responses, so every predictor is the lag-marginalized predictive mean.
    """
    rep, cfg = args
    rep_seed = derive_int_seed(cfg["seed"], STREAM_REPLICATE, rep)
    sim = gen_friedman_panel(cfg["n"], cfg["t"], rep_seed, n_test=cfg["n_test"])
    order = ModelOrder(R=1, L=0)
    t_out = sim.panel.T
    model = fit(sim.design, sim.panel, order,
                KernelSpec(lengthscales=np.ones(5)), _fit_options(cfg))
    mh = MHConfig(**{**cfg["mh"], "seed": derive_int_seed(rep_seed, 1)})
    chain = sample_chain(model, mh)
    pred_gp = marginal_panel(model, sim.test_design, t_out, chain=chain)
    glm = fit_baseline(sim.design, sim.panel, kind="glm")
    glm_ts = fit_baseline(sim.design, sim.panel, order, kind="glm_ts")
    pred_glm = glm.predict_new(sim.test_design, t_out)
    pred_glm_ts = glm_ts.predict_new(sim.test_design, t_out)
    return {
        "replicate": rep,
        "converged": model.report.converged,
        "rmspe_binarygp": rmspe(sim.test_true_p, pred_gp),
        "rmspe_glm": rmspe(sim.test_true_p, pred_glm),
        "rmspe_glm_ts": rmspe(sim.test_true_p, pred_glm_ts),
    }


def _map_replicates(fn, cfg, threads):
    args = [(rep, cfg) for rep in range(cfg["replicates"])]
    if threads and threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def _mean_sd(values):
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _gp_summary(rows, cfg):
    coef_names = [k for k in rows[0] if k.startswith(("alpha", "phi"))]
    theta_names = sorted(
        (k for k in rows[0] if k.startswith("theta")), key=lambda s: int(s[5:])
    )
    summary = {"replicates": len(rows), "n": cfg["n"], "t": cfg["t"]}
    summary["coefficients"] = {
        name: dict(zip(("mean", "sd"), _mean_sd([r[name] for r in rows])))
        for name in coef_names
    }
    summary["sigma2"] = dict(zip(("mean", "sd"), _mean_sd([r["sigma2"] for r in rows])))
    summary["theta"] = {
        name: dict(zip(("mean", "sd"), _mean_sd([r[name] for r in rows])))
        for name in theta_names
    }
    ordered = sum(
        1
        for r in rows
        if all(
            r[theta_names[j]] < r[theta_names[j + 1]]
            for j in range(len(theta_names) - 1)
        )
    )
    summary["theta_order_preserved"] = ordered
    if "rmspe" in rows[0]:
        summary["rmspe"] = dict(zip(("mean", "sd"), _mean_sd([r["rmspe"] for r in rows])))
        summary["rmspe"]["values"] = [float(r["rmspe"]) for r in rows]
    return summary


def run_study(name, config=None, threads=1):
    """Execute a named study; returns (rows, summary)."""
    cfg = _merge_config(name, config)
    if name in ("table1", "table3"):
        rows = _map_replicates(_gp_replicate, cfg, threads)
        return rows, _gp_summary(rows, cfg)
    if name == "friedman":
        rows = _map_replicates(_friedman_replicate, cfg, threads)
        wins = sum(
            1
            for r in rows
            if r["rmspe_binarygp"] < r["rmspe_glm"]
            and r["rmspe_binarygp"] < r["rmspe_glm_ts"]
        )
        summary = {
            "replicates": len(rows),
            "n": cfg["n"],
            "t": cfg["t"],
            "wins_binarygp": wins,
        }
        for key in ("rmspe_binarygp", "rmspe_glm", "rmspe_glm_ts"):
            summary[key] = dict(zip(("mean", "sd"), _mean_sd([r[key] for r in rows])))
        return rows, summary
    if name == "cv-scores":
        sim = gen_friedman_panel(cfg["n"], cfg["t"], cfg["seed"])
        report = cross_validate(
            sim.design,
            sim.panel,
            ModelOrder(R=1, L=0),
            folds=cfg["folds"],
            methods=tuple(cfg["methods"]),
            seed=cfg["seed"],
            mh_config=MHConfig(**cfg["mh"]),
            fit_options=_fit_options(cfg),
        )
        rows = []
        for k, fold in enumerate(report.fold_scores):
            for method, scores in fold.items():
                rows.append({"fold": k, "method": method, **scores})
        summary = report.to_dict()
        return rows, summary
    raise ValueError(f"unknown study {name!r}; available: {STUDIES}")
