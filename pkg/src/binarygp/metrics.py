"""Evaluation harness: RMSPE, proper scoring rules, logistic baselines, CV.

Scoring conventions follow the larger-is-better orientation for all four
rules:

* brier        = -mean((y - p)^2),                     in [-1, 0]
* logarithmic  = mean(y log p + (1 - y) log(1 - p)),   <= 0
* spherical    = mean((y p + (1-y)(1-p)) / ||(p, 1-p)||_2),  in [0, 1]
* zero_one     = mean(1{predict(p) == y}) with predict(p) = 1{p >= c}
                 (ties at the threshold predict 1).

Two reference methods accompany the GP model: a plain logistic regression
on the inputs ("glm") and a logistic regression with the same
autoregressive/interaction mean function but no latent field ("glm_ts").
Cross-validation partitions *sites*, never time steps, and scores each
held-out site's full series from emulated predictions.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.special import expit

from ._util import (STREAM_CV_CHAIN, STREAM_SITE_PATHS, clamp_prob,
                    derive_int_seed, generator)
from .estimation import FitOptions, fit
from .kernel import KernelSpec
from .panel import BinaryPanel, InputDesign, build_design, lagged_response
from .prediction import MHConfig, emulate_series, sample_chain

__all__ = [
    "rmspe",
    "proper_scores",
    "ScoreReport",
    "BaselineFit",
    "fit_baseline",
    "baseline_glm",
    "emulated_panel",
    "marginal_panel",
    "predicted_panel",
    "cross_validate",
    "SCORE_RULES",
]

SCORE_RULES = ("brier", "spherical", "logarithmic", "zero_one")
BASELINE_RIDGE = 1e-6


def rmspe(true_p, pred_p):
    """Root mean squared prediction error between probability panels."""
    true_p = np.asarray(true_p, dtype=float)
    pred_p = np.asarray(pred_p, dtype=float)
    if true_p.shape != pred_p.shape:
        raise ValueError(
            f"shape mismatch: {true_p.shape} vs {pred_p.shape}"
        )
    return float(np.sqrt(np.mean((true_p - pred_p) ** 2)))


def proper_scores(y, p_hat, threshold=0.5):
    """All four proper scores of probability forecasts for binary outcomes."""
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(p_hat, dtype=float).ravel()
    if y.shape != p.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {p.shape}")
    p_log = np.clip(p, 1e-12, 1.0 - 1e-12)
    norm = np.sqrt(p**2 + (1.0 - p) ** 2)
    return {
        "brier": float(-np.mean((y - p) ** 2)),
        "spherical": float(np.mean((y * p + (1.0 - y) * (1.0 - p)) / norm)),
        "logarithmic": float(np.mean(y * np.log(p_log) + (1.0 - y) * np.log1p(-p_log))),
        "zero_one": float(np.mean((p >= threshold) == (y == 1.0))),
    }


@dataclass(frozen=True)
class BaselineFit:
    """Logistic-regression baseline; 'glm' pools time steps with a linear
    input mean, 'glm_ts' adds the autoregressive/interaction terms."""

    kind: str
    beta: np.ndarray
    order: object
    d: int
    ridge_used: bool = False

    def predict_insample(self, design, panel):
        """Predicted p panel on the training data, shape (n, T).

        glm_ts uses observed lags; steps before the first response use the
        zero-lag convention.
        """
        n, T = panel.n, panel.T
        if self.kind == "glm":
            p_col = expit(self.beta[0] + design.sites @ self.beta[1:])
            return np.tile(p_col[:, None], (1, T))
        out = np.empty((n, T))
        for t in range(1, T + 1):
            out[:, t - 1] = expit(self._eta_at(design.sites, panel, t))
        return out

    def _eta_at(self, sites, panel, t):
        order = self.order
        eta = self.beta[0] + np.zeros(sites.shape[0])
        col = 1
        for r in range(1, order.R + 1):
            eta = eta + self.beta[col] * lagged_response(panel, t, r)
            col += 1
        eta = eta + sites @ self.beta[col:col + self.d]
        col += self.d
        for lag in range(1, order.L + 1):
            eta = eta + (sites @ self.beta[col:col + self.d]) * lagged_response(panel, t, lag)
            col += self.d
        return eta

    def predict_new(self, design_new, t_out):
        """Predictive-mean p panel at new sites, shape (n_new, t_out).

        glm forecasts are constant over time; glm_ts marginalizes its own
        unknown lagged responses exactly (pre-series lags are 0), matching
        the forecast convention used for the GP model.
        """
        sites = np.asarray(design_new.sites, dtype=float)
        n_new = sites.shape[0]
        if self.kind == "glm":
            p_col = expit(self.beta[0] + sites @ self.beta[1:])
            return np.tile(p_col[:, None], (1, t_out))
        order = self.order
        R, L = order.R, order.L
        phi = list(self.beta[1:1 + R])
        alpha = self.beta[1 + R:1 + R + self.d]
        gambeta = self.beta[1 + R + self.d:].reshape(L, self.d)
        base_col = self.beta[0] + sites @ alpha  # (n_new,)
        gamma_x = sites @ gambeta.T if L else np.zeros((n_new, 0))
        out = np.empty((n_new, t_out))
        for i in range(n_new):
            means = _marginal_recursion(
                [np.float64(base_col[i])] * t_out,
                lambda t, m: expit(m),
                phi,
                list(gamma_x[i]),
                t_out,
            )
            out[i] = means
        return out

    def predict_conditional(self, design_new, panel_new):
        """Forecasts at new sites given their observed responses, (n, T)."""
        out = np.empty((panel_new.n, panel_new.T))
        if self.kind == "glm":
            return self.predict_new(design_new, panel_new.T)
        for t in range(1, panel_new.T + 1):
            out[:, t - 1] = expit(self._eta_at(design_new.sites, panel_new, t))
        return out


def _irls(X, y, ridge=0.0, max_iter=100, tol=1e-8):
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        p = clamp_prob(expit(X @ beta))
        w = p * (1.0 - p)
        z = X @ beta + (y - p) / w
        a = X.T @ (w[:, None] * X)
        if ridge:
            a = a + ridge * np.eye(a.shape[0])
        beta_new = scipy.linalg.solve(a, X.T @ (w * z), assume_a="pos")
        if not np.all(np.isfinite(beta_new)):
            raise scipy.linalg.LinAlgError("diverged")
        delta = np.max(np.abs(beta_new - beta))
        beta = beta_new
        if delta < tol:
            return beta, True
    return beta, False


def fit_baseline(design, panel, order=None, kind="glm"):
    """Fit a logistic baseline by IRLS; falls back to a small ridge with a
    warning when the solve is singular or separation blows the fit up."""
    if kind not in ("glm", "glm_ts"):
        raise ValueError(f"unknown baseline kind {kind!r}")
    if kind == "glm":
        T = panel.T
        X = np.column_stack(
            [np.ones(design.n * T), np.tile(design.sites, (T, 1))]
        )
        y = panel.y.T.ravel().astype(float)
        order_used = None
    else:
        dm = build_design(design, panel, order)
        X = dm.X
        y = panel.y[:, order.max_lag:].T.ravel().astype(float)
        order_used = order
    ridge_used = False
    try:
        beta, converged = _irls(X, y)
        if not converged or np.max(np.abs(beta)) > 1e6:
            raise scipy.linalg.LinAlgError("separation suspected")
    except scipy.linalg.LinAlgError:
        warnings.warn(
            f"{kind} baseline hit separation or a singular solve; "
            f"refitting with ridge {BASELINE_RIDGE}",
            stacklevel=2,
        )
        beta, _ = _irls(X, y, ridge=BASELINE_RIDGE)
        ridge_used = True
    return BaselineFit(
        kind=kind, beta=beta, order=order_used, d=design.d, ridge_used=ridge_used
    )


def baseline_glm(design, panel, order):
    """In-sample predicted p panels for both baselines, shape (n, T) each."""
    out = {}
    for kind in ("glm", "glm_ts"):
        fit_ = fit_baseline(design, panel, order if kind == "glm_ts" else None, kind)
        out[kind] = fit_.predict_insample(design, panel)
    return out


def emulated_panel(model, test_design, t_out, mh_cfg, chain=None, seed_tag=0,
                   aggregate="mean"):
    """Emulated p panel at held-out sites, shape (n_test, t_out).

    One chain backs all sites; each site's paths use a distinct sub-seed
    derived from (chain seed, seed_tag, site index).  ``aggregate`` picks
    the pointwise path summary: "mean" (the squared-error-optimal forecast)
    or "median" (the emulator's own display summary).
    """
    if chain is None:
        chain = sample_chain(model, mh_cfg)
    agg = {"mean": np.mean, "median": np.median}[aggregate]
    out = np.empty((test_design.n, t_out))
    for i in range(test_design.n):
        path_seed = derive_int_seed(chain.config.seed, STREAM_SITE_PATHS, seed_tag, i)
        emu = emulate_series(
            model, test_design.sites[i], t_out, chain=chain, path_seed=path_seed
        )
        out[i] = agg(emu.p_paths, axis=0)
    return out


MAX_EXACT_LAG = 6  # 2^max_lag state space for the exact lag recursion


def _marginal_recursion(base, cond_mean, phi, gamma_x, t_out):
    """Predictive means with the unknown lagged responses marginalized out.

    ``base[t]`` is the lag-free part of the latent mean at step t+1 (any
    shape, e.g. one value per posterior draw); ``cond_mean(t, m)`` maps
    latent means at step t+1 to conditional response probabilities.  The forward recursion
    tracks the exact distribution of the last max(R, L) responses (bit k of
    a state is the response k+1 steps back), so the result carries no
    path-simulation noise.
    """
    max_lag = max(len(phi), len(gamma_x))
    if max_lag == 0:
        return [cond_mean(t, base[t]) for t in range(t_out)]
    n_states = 1 << max_lag
    shifts = np.zeros(n_states)
    for s in range(n_states):
        for r, coef in enumerate(phi):
            shifts[s] += coef * ((s >> r) & 1)
        for lag, coef in enumerate(gamma_x):
            shifts[s] += coef * ((s >> lag) & 1)
    head = base[0] * 0.0
    prob = np.zeros((n_states,) + np.shape(head))
    prob[0] = 1.0  # pre-series lags are zero
    out = []
    mask = n_states - 1
    for t in range(t_out):
        k = np.stack([cond_mean(t, base[t] + shifts[s]) for s in range(n_states)])
        out.append((prob * k).sum(axis=0))
        nxt = np.zeros_like(prob)
        for s in range(n_states):
            nxt[((s << 1) | 1) & mask] += prob[s] * k[s]
            nxt[(s << 1) & mask] += prob[s] * (1.0 - k[s])
        prob = nxt
    return out


def marginal_panel(model, test_design, t_out, mh_cfg=None, chain=None):
    """Predictive-mean p panel at new sites with no observed responses.

    Entry (i, t) estimates E[p_t(x_i) | training responses], the
    squared-error-optimal forecast when the site's own series is unknown:
    the conditional mean given each posterior draw of the training
    probabilities is averaged over draws, with the unknown lagged
    responses marginalized exactly (lag state space up to 2^MAX_EXACT_LAG;
    larger orders fall back to mean-aggregated emulation paths).
    """
    from .logitnormal import moments
    from .prediction import _mu_training, _predictive_weights

    if chain is None:
        chain = sample_chain(model, mh_cfg)
    coefs = model.coefficients
    if model.order.max_lag > MAX_EXACT_LAG:
        return emulated_panel(model, test_design, t_out, mh_cfg, chain=chain)
    T = model.panel.T
    horizon = min(T, t_out)
    resids = [chain.eta[t - 1] - _mu_training(model, t) for t in range(1, horizon + 1)]
    j_total = chain.config.n_samples
    out = np.empty((test_design.n, t_out))
    for i in range(test_design.n):
        x = model.scale_input(test_design.sites[i])
        w, v, matched = _predictive_weights(model, x)
        mu0 = coefs.alpha0 + float(x @ coefs.alpha)
        base = []
        for t in range(1, t_out + 1):
            if t <= horizon:
                rc = resids[t - 1][:, matched] if matched is not None else resids[t - 1] @ w
                base.append(mu0 + rc)
            else:
                base.append(np.full(j_total, mu0))
        gamma_x = [float(x @ g) for g in coefs.gamma]

        def cond_mean(t, m, v_near=v):
            return moments(m, v_near if t < horizon else model.cov.sigma2)[0]

        means = _marginal_recursion(base, cond_mean, list(coefs.phi), gamma_x, t_out)
        out[i] = [m.mean() for m in means]
    return out


def predicted_panel(model, test_design, test_panel, mh_cfg=None, chain=None):
    """MMSPE predictions at held-out sites given their observed responses.

    Entry (i, s) is the predictive mean of p_s at test site i conditioning
    on the training panel and the site's own responses before time s.  The
    latent field is independent across time steps, so earlier responses at
    the new site carry no information about the same-time training block;
    one training-state chain therefore serves every (site, time) pair.
    """
    from .logitnormal import moments
    from .prediction import _history_lags, _mu_point, _mu_training, _predictive_weights

    if chain is None:
        chain = sample_chain(model, mh_cfg)
    if test_design.n != test_panel.n:
        raise ValueError("test design and panel disagree on the number of sites")
    T = test_panel.T
    if T > model.panel.T:
        raise ValueError("test panel extends beyond the training horizon")
    max_lag = model.order.max_lag
    out = np.empty((test_design.n, T))
    resids = [chain.eta[s - 1] - _mu_training(model, s) for s in range(1, T + 1)]
    for i in range(test_design.n):
        x = model.scale_input(test_design.sites[i])
        w, v, matched = _predictive_weights(model, x)
        history = test_panel.y[i]
        for s in range(1, T + 1):
            rc = resids[s - 1][:, matched] if matched is not None else resids[s - 1] @ w
            mu_new = _mu_point(
                model.coefficients, x, _history_lags(history, s, max_lag)
            )
            kap, _ = moments(mu_new + rc, v)
            out[i, s - 1] = kap.mean()
    return out


@dataclass(frozen=True)
class ScoreReport:
    """Per-fold proper scores and their medians, one entry per method."""

    methods: tuple
    fold_scores: list
    medians: dict
    fold_sites: list
    single_class_folds: tuple = ()

    def to_dict(self):
        return {
            "methods": list(self.methods),
            "fold_scores": self.fold_scores,
            "medians": self.medians,
            "fold_sites": [list(map(int, f)) for f in self.fold_sites],
            "single_class_folds": list(self.single_class_folds),
        }


def cross_validate(design, panel, order, kernel_spec=None, folds=10,
                   methods=("binarygp", "glm", "glm_ts"), seed=0,
                   mh_config=None, fit_options=None, threshold=0.5):
    """Site-wise K-fold evaluation of probability forecasts.

    Sites are shuffled once (seeded) and partitioned; each fold's models
    never see the held-out sites' responses.  Held-out series are
    predicted over the full horizon (the GP model via emulation) and
    scored with the four proper rules; the report carries per-fold scores
    and their medians.  Folds whose held-out responses are single-class
    are scored anyway but flagged.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > design.n:
        raise ValueError("more folds than sites")
    mh_config = mh_config or MHConfig()
    fit_options = fit_options or FitOptions()
    if kernel_spec is None:
        kernel_spec = KernelSpec(lengthscales=np.ones(design.d))
    rng = generator(seed, 0)
    perm = rng.permutation(design.n)
    fold_sites = [np.sort(f) for f in np.array_split(perm, folds)]
    all_scores = []
    flagged = []
    T = panel.T
    for k, test_idx in enumerate(fold_sites):
        train_idx = np.setdiff1d(np.arange(design.n), test_idx)
        assert np.intersect1d(train_idx, test_idx).size == 0
        tr_design = InputDesign(sites=design.sites[train_idx], names=design.names)
        tr_panel = BinaryPanel(y=panel.y[train_idx])
        te_design = InputDesign(sites=design.sites[test_idx], names=design.names)
        te_y = panel.y[test_idx]
        if te_y.min() == te_y.max():
            flagged.append(k)
        fold_result = {}
        for method in methods:
            if method == "binarygp":
                model = fit(tr_design, tr_panel, order, kernel_spec, fit_options)
                cfg = replace(
                    mh_config, seed=derive_int_seed(seed, STREAM_CV_CHAIN, k)
                )
                pred = emulated_panel(model, te_design, T, cfg, seed_tag=k)
            elif method in ("glm", "glm_ts"):
                bl = fit_baseline(
                    tr_design, tr_panel, order if method == "glm_ts" else None, method
                )
                pred = bl.predict_new(te_design, T)
            else:
                raise ValueError(f"unknown method {method!r}")
            fold_result[method] = proper_scores(te_y, pred, threshold)
        all_scores.append(fold_result)
    medians = {
        m: {
            rule: float(np.median([fs[m][rule] for fs in all_scores]))
            for rule in SCORE_RULES
        }
        for m in methods
    }
    return ScoreReport(
        methods=tuple(methods),
        fold_scores=all_scores,
        medians=medians,
        fold_sites=[f.tolist() for f in fold_sites],
        single_class_folds=tuple(flagged),
    )
