"""Synthetic binary-panel generators for estimation and prediction studies.

Three data-generating processes:

* ``gen_gp_panel`` draws panels from the full latent-GP model: inputs are
  subsampled from a regular grid on [0,1]^d, one independent Gaussian field
  is drawn per time step, and responses follow the autoregressive logistic
  recursion with pre-series lags fixed at 0;
* ``gen_friedman_panel`` uses a rescaled Friedman surface plus a unit
  lag-1 response term on the logit scale;
* ``gen_demo_1d`` is a one-dimensional damped-cosine probability curve
  observed once per site.

Every generator returns the true probabilities alongside the binary data
so prediction error against the truth can be scored, and is bit-for-bit
reproducible from its seed.  Test inputs, when requested, are untried
points from the same input law as the training sites, and their series
are generated jointly with the training data (the latent field is shared
within each time step).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from ._util import generator
from .estimation import Coefficients, CovParams
from .kernel import DEFAULT_NUGGET, KernelSpec, corr_matrix
from .panel import BinaryPanel, InputDesign, ModelOrder

__all__ = [
    "TruthSpec",
    "SimulatedPanel",
    "reference_gp_truth",
    "gen_gp_panel",
    "gen_friedman_panel",
    "gen_demo_1d",
    "friedman_logit",
    "demo_curve",
]

GRID_LEVELS = 4  # regular-grid resolution per dimension for GP inputs


@dataclass(frozen=True)
class TruthSpec:
    """Data-generating configuration echoed next to every simulation."""

    generator: str
    seed: int
    coefficients: Coefficients = None
    cov: CovParams = None
    kernel: KernelSpec = None
    order: ModelOrder = None

    def to_dict(self):
        d = {"generator": self.generator, "seed": self.seed}
        if self.coefficients is not None:
            d["coefficients"] = [float(v) for v in self.coefficients.to_vector()]
            d["order"] = self.order.to_dict()
        if self.cov is not None:
            d["cov"] = self.cov.to_dict()
        if self.kernel is not None:
            d["kernel"] = self.kernel.to_dict()
        return d


@dataclass(frozen=True)
class SimulatedPanel:
    """Generated data: training triple plus optional held-out test sites."""

    design: InputDesign
    panel: BinaryPanel
    true_p: np.ndarray
    spec: TruthSpec
    test_design: InputDesign = None
    test_panel: BinaryPanel = None
    test_true_p: np.ndarray = None


def reference_gp_truth(seed=0):
    """The 5-input benchmark truth used throughout the estimation studies.

    alpha0 = 0.5, alpha = (-3, 2, -2, 1, 0.5), one AR term phi_1 = 0.8,
    sigma^2 = 1, power-exponential kernel with p = 2 and
    theta = (0.5, 1.0, 1.5, 2.0, 2.5).
    """
    coefs = Coefficients(
        alpha0=0.5,
        phi=np.array([0.8]),
        alpha=np.array([-3.0, 2.0, -2.0, 1.0, 0.5]),
        gamma=np.zeros((0, 5)),
    )
    return TruthSpec(
        generator="gp",
        seed=seed,
        coefficients=coefs,
        cov=CovParams(sigma2=1.0, theta=np.array([0.5, 1.0, 1.5, 2.0, 2.5])),
        kernel=KernelSpec(lengthscales=np.array([0.5, 1.0, 1.5, 2.0, 2.5]), power=2.0),
        order=ModelOrder(R=1, L=0),
    )


def _grid_subsample(rng, n, d):
    """n distinct sites from a regular grid on [0,1]^d.

    Grid resolution is GRID_LEVELS per dimension, raised when the grid
    would hold fewer than n points.
    """
    levels = GRID_LEVELS
    while levels**d < n:
        levels += 1
    axes = np.linspace(0.0, 1.0, levels)
    idx = rng.choice(levels**d, size=n, replace=False)
    unraveled = np.unravel_index(idx, (levels,) * d)
    return np.column_stack([axes[u] for u in unraveled])


def gen_gp_panel(spec, n, T, n_test=0):
    """Panel drawn from the latent-GP model of the given truth.

    Training and held-out test inputs are drawn together, without
    replacement, from the regular grid (test inputs are untried grid
    points).  The field Z_t is drawn independently for each time step over
    the union of sites; responses follow the logistic recursion with y
    values before the first step fixed at 0.
    """
    if spec.generator != "gp":
        raise ValueError("gen_gp_panel requires a 'gp' truth spec")
    coefs, cov, kspec = spec.coefficients, spec.cov, spec.kernel
    d = coefs.alpha.size
    rng = generator(spec.seed, 0)
    x_all = _grid_subsample(rng, n + n_test, d)
    sites, x_test = x_all[:n], x_all[n:]
    n_all = x_all.shape[0]
    corr = corr_matrix(kspec.with_lengthscales(cov.theta), x_all, nugget=DEFAULT_NUGGET)
    chol = scipy.linalg.cholesky(corr.regularized(), lower=True)
    scale = np.sqrt(cov.sigma2)

    R, L = coefs.phi.size, coefs.gamma.shape[0]
    max_lag = max(R, L)
    base = coefs.alpha0 + x_all @ coefs.alpha
    gamma_x = x_all @ coefs.gamma.T if L else None  # (n_all, L)
    y = np.zeros((n_all, T), dtype=np.int8)
    p = np.empty((n_all, T))
    y_lag = np.zeros((n_all, max_lag)) if max_lag else None
    for t in range(1, T + 1):
        z = scale * (chol @ rng.standard_normal(n_all))
        eta = base + z
        for r in range(1, R + 1):
            eta = eta + coefs.phi[r - 1] * y_lag[:, r - 1]
        for lag in range(1, L + 1):
            eta = eta + gamma_x[:, lag - 1] * y_lag[:, lag - 1]
        p_t = expit(eta)
        y_t = (rng.random(n_all) < p_t).astype(np.int8)
        p[:, t - 1] = p_t
        y[:, t - 1] = y_t
        if max_lag:
            y_lag[:, 1:] = y_lag[:, :-1]
            y_lag[:, 0] = y_t
    return SimulatedPanel(
        design=InputDesign(sites=sites),
        panel=BinaryPanel(y=y[:n]),
        true_p=p[:n],
        spec=spec,
        test_design=InputDesign(sites=x_test) if n_test else None,
        test_panel=BinaryPanel(y=y[n:]) if n_test else None,
        test_true_p=p[n:] if n_test else None,
    )


def friedman_logit(x, y_prev):
    """Latent logit of the rescaled Friedman surface with a lag-1 term."""
    x = np.asarray(x, dtype=float)
    f = (
        10.0 * np.sin(np.pi * x[..., 0] * x[..., 1])
        + 20.0 * (x[..., 2] - 0.5) ** 2
        + 10.0 * x[..., 3]
        + 5.0 * x[..., 4]
    )
    return np.asarray(y_prev, dtype=float) + f / 3.0 - 5.0


def gen_friedman_panel(n, T, seed, n_test=0):
    """Panel from the Friedman-surface recursion; inputs uniform on [0,1]^5.

    The first step uses y_0 = 0 at every site.
    """
    rng = generator(seed, 0)
    d = 5
    n_all = n + n_test
    x_all = rng.random((n_all, d))
    y = np.zeros((n_all, T), dtype=np.int8)
    p = np.empty((n_all, T))
    y_prev = np.zeros(n_all)
    for t in range(1, T + 1):
        p_t = expit(friedman_logit(x_all, y_prev))
        y_t = (rng.random(n_all) < p_t).astype(np.int8)
        p[:, t - 1] = p_t
        y[:, t - 1] = y_t
        y_prev = y_t.astype(float)
    spec = TruthSpec(generator="friedman", seed=seed)
    return SimulatedPanel(
        design=InputDesign(sites=x_all[:n]),
        panel=BinaryPanel(y=y[:n]),
        true_p=p[:n],
        spec=spec,
        test_design=InputDesign(sites=x_all[n:]) if n_test else None,
        test_panel=BinaryPanel(y=y[n:]) if n_test else None,
        test_true_p=p[n:] if n_test else None,
    )


def demo_curve(x):
    """Damped-cosine probability curve used by the one-input demo."""
    x = np.asarray(x, dtype=float)
    return 0.4 * np.exp(-1.2 * x) * np.cos(3.5 * np.pi * x) + 0.4


def gen_demo_1d(n_sites=12, seed=0):
    """Single Bernoulli observation at each of n evenly spaced sites."""
    if n_sites < 2:
        raise ValueError("n_sites must be >= 2")
    rng = generator(seed, 0)
    x = np.linspace(0.0, 1.0, n_sites)
    p = demo_curve(x)
    y = (rng.random(n_sites) < p).astype(np.int8)
    spec = TruthSpec(generator="demo1d", seed=seed)
    return SimulatedPanel(
        design=InputDesign(sites=x[:, None]),
        panel=BinaryPanel(y=y[:, None]),
        true_p=p[:, None],
        spec=spec,
    )
