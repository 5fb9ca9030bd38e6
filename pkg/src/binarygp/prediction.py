"""Predictive distributions at untried inputs.

Three layers, from most to least information:

* given the latent probabilities at the training sites, the predictive law
  at a new input is logit-normal with closed-form (m, v)
  (:func:`conditional_law`); its mean/variance are the quadrature moments
  (:func:`mmspe_given_p`) and it interpolates exactly at training sites;
* given only the binary panel, the latent probabilities are integrated out
  by Monte Carlo: a single-site Metropolis-Hastings chain samples them
  (:func:`mh_sample_probs`) and :func:`predict_at` averages the
  conditional moments over the samples;
* with no response history at the new input, :func:`emulate_series`
  generates whole new series by alternating logit-normal probability draws
  and Bernoulli response draws along each sampled path.

The latent field is independent across time steps, so the chain factorizes
into per-time blocks that are advanced independently (and could run
concurrently); block b of a chain draws its randomness from the sub-seed
``(seed, STREAM_MH, b)`` so results never depend on scheduling.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit, logit

from . import backend
from ._util import STREAM_MH, STREAM_PATHS, STREAM_PREDICTIVE, generator
from .kernel import cross_corr
from .logitnormal import moments
from .panel import lagged_response

__all__ = [
    "MHConfig",
    "ConditionalLaw",
    "PredictiveSummary",
    "ChainResult",
    "ChainSamples",
    "EmulationResult",
    "conditional_law",
    "mmspe_given_p",
    "sample_chain",
    "mh_sample_probs",
    "predict_at",
    "emulate_series",
    "bootstrap_binary",
]

# v values in [-1e-10, 0) are round-off; anything lower is a real defect.
V_SLACK = -1e-10


@dataclass(frozen=True)
class MHConfig:
    """Chain controls: J retained samples after burn-in, thinned."""

    n_samples: int = 1000
    burn_in: int = 500
    thin: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(d[k]) for k in ("n_samples", "burn_in", "thin", "seed")})


@dataclass(frozen=True)
class ConditionalLaw:
    """Logit-normal parameters of p(new input) given training probabilities."""

    m: float
    v: float


@dataclass(frozen=True)
class PredictiveSummary:
    mean: float
    variance: float
    quantiles: dict
    n_mc: int
    seed: int
    time_step: int
    acceptance_rate: float = None
    split_rhat: float = None

    def to_dict(self):
        return {
            "mean": self.mean,
            "variance": self.variance,
            "quantiles": {str(q): v for q, v in self.quantiles.items()},
            "n_mc": self.n_mc,
            "seed": self.seed,
            "time_step": self.time_step,
            "acceptance_rate": self.acceptance_rate,
            "split_rhat": self.split_rhat,
        }


@dataclass(frozen=True)
class ChainResult:
    """Latent-probability samples: ``samples[j, t - 1, i]`` is draw j of
    p_t at training site i."""

    samples: np.ndarray
    acceptance_rate: float
    split_rhat: float
    config: MHConfig


@dataclass(frozen=True)
class ChainSamples:
    """Raw per-block logit samples, reusable across prediction targets.

    The chain depends only on the fitted model and the binary panel, not on
    the prediction input, so one chain can back predictions and emulations
    at many new inputs.
    """

    eta: list
    acceptance_rate: float
    split_rhat: float
    config: MHConfig


@dataclass(frozen=True)
class EmulationResult:
    """Replicate series at a new input plus pointwise summaries."""

    times: np.ndarray
    p_median: np.ndarray
    y_median: np.ndarray
    p_quantiles: dict
    p_paths: np.ndarray
    y_paths: np.ndarray
    acceptance_rate: float
    split_rhat: float
    config: MHConfig


@dataclass(frozen=True)
class _Block:
    """One time step of the chain state."""

    q: np.ndarray
    mu: np.ndarray
    y: np.ndarray


def _corr_cho(model):
    if "corr_cho" not in model._cache:
        model._cache["corr_cho"] = scipy.linalg.cho_factor(
            model.corr().regularized(), lower=True
        )
    return model._cache["corr_cho"]


def _fitted_kernel(model):
    return model.kernel.with_lengthscales(model.cov.theta)


def _mu_training(model, t):
    """Prior mean of the latent logits at the training sites at time t.

    Lags reaching before the first observed step are zero (fresh-series
    convention, shared with the generators).
    """
    coefs = model.coefficients
    sites = model.design.sites
    mu = coefs.alpha0 + sites @ coefs.alpha
    for r in range(1, coefs.phi.size + 1):
        mu = mu + coefs.phi[r - 1] * lagged_response(model.panel, t, r)
    for lag in range(1, coefs.gamma.shape[0] + 1):
        mu = mu + (sites @ coefs.gamma[lag - 1]) * lagged_response(model.panel, t, lag)
    return mu


def _mu_point(coefs, x, lag_values):
    """Prior mean of the latent logit at one input; ``lag_values[r-1]`` is
    the response r steps back (0.0 for pre-series lags)."""
    mu = coefs.alpha0 + float(x @ coefs.alpha)
    for r in range(1, coefs.phi.size + 1):
        mu += coefs.phi[r - 1] * lag_values[r - 1]
    for lag in range(1, coefs.gamma.shape[0] + 1):
        mu += float(x @ coefs.gamma[lag - 1]) * lag_values[lag - 1]
    return mu


def _history_lags(history, t, max_lag):
    """Lag vector (y_{t-1}, ..., y_{t-max_lag}) from a chronological history."""
    out = []
    for r in range(1, max_lag + 1):
        s = t - r
        out.append(float(history[s - 1]) if s >= 1 else 0.0)
    return out


def _match_site(sites, x):
    """Index of a training site exactly equal to x, or None."""
    hits = np.nonzero((sites == x).all(axis=1))[0]
    return int(hits[0]) if hits.size else None


def conditional_law(model, xnew, p_s, s=1, history=()):
    """Logit-normal law of p_s(new input) given training probabilities p_s.

    ``history`` is the chronological response series observed at the new
    input (length >= s - 1 entries are not required; missing lags are 0).
    Probabilities exactly at 0 or 1 have no logit; clamp them upstream.
    When the new input coincides with a training site the law degenerates
    to a point mass at that site's probability (exact interpolation), so
    the matched case bypasses the linear solve entirely.
    """
    x = model.scale_input(xnew)
    p_s = np.asarray(p_s, dtype=float)
    if p_s.shape != (model.design.n,):
        raise ValueError(
            f"p_s must have one entry per training site ({model.design.n})"
        )
    if np.any(p_s <= 0.0) or np.any(p_s >= 1.0):
        raise ValueError(
            "p_s contains values at 0 or 1 whose logit is undefined; "
            "clamp probabilities upstream before calling conditional_law"
        )
    max_lag = model.order.max_lag
    mu_new = _mu_point(model.coefficients, x, _history_lags(history, s, max_lag))
    mu_s = _mu_training(model, s)
    resid = logit(p_s) - mu_s
    i = _match_site(model.design.sites, x)
    if i is not None:
        return ConditionalLaw(m=float(mu_new + resid[i]), v=0.0)
    r = cross_corr(_fitted_kernel(model), model.design.sites, x)
    cho = _corr_cho(model)
    w = scipy.linalg.cho_solve(cho, r)
    v = model.cov.sigma2 * (1.0 - float(r @ w))
    if v < V_SLACK:
        warnings.warn(f"conditional variance {v:.3e} below numerical slack", stacklevel=2)
    m = mu_new + float(w @ resid)
    return ConditionalLaw(m=float(m), v=max(v, 0.0))


def mmspe_given_p(law):
    """Minimum-MSPE predictor and its variance under a conditional law."""
    return moments(law.m, law.v)


def _training_blocks(model):
    q = np.ascontiguousarray(model.precision())
    panel = model.panel
    return [
        _Block(
            q=q,
            mu=np.ascontiguousarray(_mu_training(model, t)),
            y=np.ascontiguousarray(panel.y[:, t - 1], dtype=np.int8),
        )
        for t in range(1, panel.T + 1)
    ]


def _augmented_blocks(model, x, history):
    """Chain blocks when s - 1 past responses exist at the new input.

    Times t <= s - 1 carry the new site as an extra last component; its
    latent probability is part of the chain state.
    """
    blocks = _training_blocks(model)
    s = len(history) + 1
    if s == 1:
        return blocks
    coefs = model.coefficients
    max_lag = model.order.max_lag
    T = model.panel.T
    if s - 1 >= 1 and T >= 1:
        r = cross_corr(_fitted_kernel(model), model.design.sites, x)
        n = model.design.n
        r_aug = np.empty((n + 1, n + 1))
        r_aug[:n, :n] = model.corr().values
        r_aug[:n, n] = r
        r_aug[n, :n] = r
        r_aug[n, n] = 1.0
        r_aug += model.corr().nugget * np.eye(n + 1)
        cho = scipy.linalg.cho_factor(r_aug, lower=True)
        q_aug = np.ascontiguousarray(scipy.linalg.cho_solve(cho, np.eye(n + 1)))
    for t in range(1, s):
        mu_new = _mu_point(coefs, x, _history_lags(history, t, max_lag))
        y_new = np.int8(history[t - 1])
        if t <= T:
            b = blocks[t - 1]
            blocks[t - 1] = _Block(
                q=q_aug,
                mu=np.ascontiguousarray(np.append(b.mu, mu_new)),
                y=np.ascontiguousarray(np.append(b.y, y_new)),
            )
        else:
            # Beyond the training horizon the new site has no partners.
            q1 = np.array([[1.0 / (1.0 + model.corr().nugget)]])
            blocks.append(
                _Block(q=q1, mu=np.array([mu_new]), y=np.array([y_new], dtype=np.int8))
            )
    return blocks


def _split_rhat(samples):
    """Split-R-hat over the retained draws of one block, max over sites."""
    j = samples.shape[0]
    half = j // 2
    if half < 2:
        return np.nan
    chains = np.stack([samples[:half], samples[half:2 * half]])
    means = chains.mean(axis=1)
    variances = chains.var(axis=1, ddof=1)
    w = variances.mean(axis=0)
    b = half * means.var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        var_plus = (half - 1) / half * w + b / half
        rhat = np.sqrt(var_plus / w)
    rhat = np.where((w == 0) & (b == 0), 1.0, rhat)
    return float(np.nanmax(rhat)) if np.isfinite(rhat).any() else np.nan


def _run_chain(model, blocks, cfg, impl=None):
    """Advance every block's chain; returns per-block (J, nb) logit samples.

    Each block starts at its prior mean and uses its own deterministic
    random stream, so sequential and concurrent execution agree.
    """
    impl = impl or backend.get_impl()
    sigma2 = model.cov.sigma2
    j_total = cfg.n_samples
    accepted = 0
    proposals = 0
    eta_samples = []
    rhats = []
    for b_idx, block in enumerate(blocks):
        nb = block.mu.size
        gen = generator(cfg.seed, STREAM_MH, b_idx)
        eta = block.mu.copy()
        qd = np.zeros(nb)
        remaining = cfg.burn_in
        while remaining > 0:
            c = min(remaining, 256)
            accepted += impl.run_sweeps(
                block.q, block.mu, block.y, eta, qd, sigma2,
                gen.standard_normal((c, nb)), gen.random((c, nb)),
            )
            remaining -= c
        out = np.empty((j_total, nb))
        for j in range(j_total):
            accepted += impl.run_sweeps(
                block.q, block.mu, block.y, eta, qd, sigma2,
                gen.standard_normal((cfg.thin, nb)), gen.random((cfg.thin, nb)),
            )
            out[j] = eta
        eta_samples.append(out)
        proposals += nb * (cfg.burn_in + j_total * cfg.thin)
        rhats.append(_split_rhat(out))
    rhat = float(np.nanmax(rhats)) if np.isfinite(rhats).any() else np.nan
    return eta_samples, accepted / proposals, rhat


def sample_chain(model, cfg=None, impl=None):
    """Run the training-state chain once; reusable across new inputs."""
    cfg = cfg or MHConfig()
    blocks = _training_blocks(model)
    eta_samples, rate, rhat = _run_chain(model, blocks, cfg, impl)
    return ChainSamples(
        eta=eta_samples, acceptance_rate=rate, split_rhat=rhat, config=cfg
    )


def mh_sample_probs(model, cfg=None, impl=None):
    """Sample the latent training probabilities given the binary panel.

    Returns a :class:`ChainResult` whose ``samples[j, t-1, i]`` is the j-th
    retained draw of p_t at site i; bit-reproducible per seed.
    """
    chain = sample_chain(model, cfg, impl)
    stacked = np.stack(chain.eta, axis=1)  # (J, T, n)
    return ChainResult(
        samples=expit(stacked),
        acceptance_rate=chain.acceptance_rate,
        split_rhat=chain.split_rhat,
        config=chain.config,
    )


def _predictive_weights(model, x):
    """(r-weights, conditional variance, matched-site index) for one input."""
    i = _match_site(model.design.sites, x)
    if i is not None:
        return None, 0.0, i
    r = cross_corr(_fitted_kernel(model), model.design.sites, x)
    w = scipy.linalg.cho_solve(_corr_cho(model), r)
    v = model.cov.sigma2 * (1.0 - float(r @ w))
    if v < V_SLACK:
        warnings.warn(f"conditional variance {v:.3e} below numerical slack", stacklevel=2)
    return w, max(v, 0.0), None


def predict_at(model, xnew, history=(), cfg=None, quantiles=(0.025, 0.5, 0.975),
               chain=None, draw_seed=None):
    """Monte Carlo MMSPE prediction of p_s at a new input given binary data.

    ``history`` is the chronological 0/1 series already observed at the new
    input; the prediction targets the next step s = len(history) + 1.  The
    predictive mean averages the conditional-law means over the sampled
    latent probabilities; the variance adds the spread of those means to
    the average conditional variance; quantiles are sample quantiles of one
    logit-normal draw per chain sample (stream ``(draw_seed,
    STREAM_PREDICTIVE)``, with ``draw_seed`` defaulting to the chain seed).

    A precomputed ``chain`` (from :func:`sample_chain`) can be supplied only
    when ``history`` is empty; past responses at the new input enter the
    chain state itself.
    """
    if any(float(v) not in (0.0, 1.0) for v in history):
        raise ValueError("history must contain only 0/1 responses")
    history = [int(v) for v in history]
    x = model.scale_input(xnew)
    s = len(history) + 1
    T = model.panel.T
    if chain is not None:
        if history:
            raise ValueError("a precomputed chain cannot serve a nonempty history")
        cfg = chain.config
        eta_samples, rate, rhat = chain.eta, chain.acceptance_rate, chain.split_rhat
    else:
        cfg = cfg or MHConfig()
        blocks = _augmented_blocks(model, x, history)
        eta_samples, rate, rhat = _run_chain(model, blocks, cfg, impl=None)
    j_total = cfg.n_samples
    mu_new = _mu_point(
        model.coefficients, x, _history_lags(history, s, model.order.max_lag)
    )
    if s <= T:
        eta_s = eta_samples[s - 1][:, :model.design.n]
        mu_s = _mu_training(model, s)
        w, v, matched = _predictive_weights(model, x)
        resid = eta_s - mu_s
        if matched is not None:
            m = mu_new + resid[:, matched]
        else:
            m = mu_new + resid @ w
    else:
        # No same-time training block: the prior law applies.
        m = np.full(j_total, mu_new)
        v = model.cov.sigma2
    kap, ta = moments(m, v)
    mean = float(kap.mean())
    variance = float(ta.mean() + (kap.var(ddof=1) if j_total > 1 else 0.0))
    gen = generator(cfg.seed if draw_seed is None else draw_seed, STREAM_PREDICTIVE)
    draws = expit(m + np.sqrt(v) * gen.standard_normal(j_total))
    qs = {float(q): float(np.quantile(draws, q)) for q in quantiles}
    return PredictiveSummary(
        mean=mean,
        variance=variance,
        quantiles=qs,
        n_mc=j_total,
        seed=cfg.seed,
        time_step=s,
        acceptance_rate=rate,
        split_rhat=rhat,
    )


def emulate_series(model, xnew, t_out, cfg=None, quantiles=(0.025, 0.975),
                   chain=None, path_seed=None):
    """Emulate new binary series at an untried input, one path per sample.

    Each of the J paths rides on one chain draw of the training
    probabilities: sequentially for t = 1..t_out the path draws p_t from
    its conditional logit-normal law (conditioning on the same-time
    training block while t is within the training horizon, on the prior
    beyond it) and then y_t ~ Bernoulli(p_t).  Pre-series lags are 0.
    Path j consumes the sub-stream (path_seed, STREAM_PATHS, j), so paths
    may run concurrently without changing results; ``path_seed`` defaults
    to the chain seed and should differ across inputs when one chain backs
    several emulations.
    """
    if t_out < 1:
        raise ValueError("t_out must be >= 1")
    x = model.scale_input(xnew)
    T = model.panel.T
    coefs = model.coefficients
    if chain is None:
        cfg = cfg or MHConfig()
        chain = sample_chain(model, cfg, impl=None)
    cfg = chain.config
    eta_samples, rate, rhat = chain.eta, chain.acceptance_rate, chain.split_rhat
    if path_seed is None:
        path_seed = cfg.seed
    j_total = cfg.n_samples
    w, v_cond, matched = _predictive_weights(model, x)

    # r' R^-1 (eta_t - mu_t) per (time, sample): the only part of the
    # conditional mean that depends on the chain.
    horizon = min(T, t_out)
    rc = np.empty((horizon, j_total))
    for t in range(1, horizon + 1):
        resid = eta_samples[t - 1] - _mu_training(model, t)  # (J, n)
        if matched is not None:
            rc[t - 1] = resid[:, matched]
        else:
            rc[t - 1] = resid @ w

    normals = np.empty((j_total, t_out))
    unifs = np.empty((j_total, t_out))
    for j in range(j_total):
        gen = generator(path_seed, STREAM_PATHS, j)
        normals[j] = gen.standard_normal(t_out)
        unifs[j] = gen.random(t_out)

    x_alpha = coefs.alpha0 + float(x @ coefs.alpha)
    gamma_x = np.array([float(x @ g) for g in coefs.gamma])
    R, L = coefs.phi.size, coefs.gamma.shape[0]
    max_lag = max(R, L)
    y_lag = np.zeros((j_total, max_lag)) if max_lag else None  # col r-1 = y_{t-r}
    p_paths = np.empty((j_total, t_out))
    y_paths = np.empty((j_total, t_out), dtype=np.int8)
    sigma2 = model.cov.sigma2
    for t in range(1, t_out + 1):
        mu_t = np.full(j_total, x_alpha)
        for r in range(1, R + 1):
            mu_t += coefs.phi[r - 1] * y_lag[:, r - 1]
        for lag in range(1, L + 1):
            mu_t += gamma_x[lag - 1] * y_lag[:, lag - 1]
        if t <= horizon:
            m = mu_t + rc[t - 1]
            v = v_cond
        else:
            m = mu_t
            v = sigma2
        p_t = expit(m + np.sqrt(v) * normals[:, t - 1])
        y_t = (unifs[:, t - 1] < p_t).astype(np.int8)
        p_paths[:, t - 1] = p_t
        y_paths[:, t - 1] = y_t
        if max_lag:
            y_lag[:, 1:] = y_lag[:, :-1]
            y_lag[:, 0] = y_t
    return EmulationResult(
        times=np.arange(1, t_out + 1),
        p_median=np.median(p_paths, axis=0),
        y_median=np.median(y_paths, axis=0),
        p_quantiles={float(q): np.quantile(p_paths, q, axis=0) for q in quantiles},
        p_paths=p_paths,
        y_paths=y_paths,
        acceptance_rate=rate,
        split_rhat=rhat,
        config=cfg,
    )


def bootstrap_binary(p_samples, rng):
    """Bernoulli draws, one per probability sample (bootstrap predictive
    distribution of the binary outcome)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(int(rng)))
    p = np.asarray(p_samples, dtype=float)
    return (rng.random(p.shape) < p).astype(np.int8)
