"""Logit-normal distribution: quadrature moments, quantiles, and sampling.

If X ~ Normal(m, v) then P = logistic(X) is logit-normal.  Its mean
``kappa(m, v)`` and variance ``tau(m, v)`` have no closed form and are
computed by numerical quadrature; quantiles are available in closed form
as logistic(m + z_q * sqrt(v)).

Quadrature scheme: Gauss-Hermite handles small spreads, where the normal
weight concentrates the integrand; for v above the cutover the moments are
rewritten as

    E[g(logistic(X))] = P(X > 0) + E[g(logistic(X)) - 1{X > 0}]

whose correction integrand decays like exp(-|x|) inside a fixed window
around 0 regardless of v, and is integrated by Gauss-Legendre panels on
each side of the kink.  Both branches are accurate to ~1e-13 over their
ranges (validated against high-precision and Monte Carlo oracles in the
test suite).
"""

import numpy as np
from scipy.special import expit, ndtr, ndtri

__all__ = ["kappa", "tau", "moments", "quantile", "sample", "GH_ORDER"]

GH_ORDER = 64
HEAVY_V = 2.0  # Gauss-Hermite above this spread under-resolves the logistic
GL_ORDER = 200
GL_HALF_WIDTH = 40.0

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(GH_ORDER)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(np.pi)


def _gl_panels(order):
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in [(-GL_HALF_WIDTH, 0.0), (0.0, GL_HALF_WIDTH)]:
        nodes.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


_GL_NODES, _GL_WEIGHTS = _gl_panels(GL_ORDER)
_GL_SIGM = expit(_GL_NODES)
_GL_STEP = (_GL_NODES > 0).astype(float)


def _gh_moments(m, v, order=None):
    """Moments of logistic(X) by Gauss-Hermite quadrature (small v)."""
    if order is None:
        nodes, weights = _GH_NODES, _GH_WEIGHTS
    else:
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        weights = weights / np.sqrt(np.pi)
    x = m[..., None] + np.sqrt(2.0 * v)[..., None] * nodes
    p = expit(x)
    return p @ weights, (p * p) @ weights


def _heavy_moments(m, v, order=None):
    """Moments for wide spreads via the step-plus-correction identity."""
    if order is None:
        nodes, weights = _GL_NODES, _GL_WEIGHTS
        sigm, step = _GL_SIGM, _GL_STEP
    else:
        nodes, weights = _gl_panels(order)
        sigm, step = expit(nodes), (nodes > 0).astype(float)
    sd = np.sqrt(v)
    base = ndtr(m / sd)
    dens = np.exp(-0.5 * ((nodes - m[..., None]) / sd[..., None]) ** 2)
    dens *= weights / (sd[..., None] * np.sqrt(2.0 * np.pi))
    k1 = base + dens @ (sigm - step)
    k2 = base + dens @ (sigm * sigm - step)
    return k1, k2


def moments(m, v, gh_order=None):
    """(mean, variance) of logistic(Normal(m, v)); broadcasts over arrays.

    ``gh_order`` doubles as the node-count override for either quadrature
    branch (used by the convergence checks).
    """
    m_in = np.asarray(m, dtype=float)
    v_in = np.asarray(v, dtype=float)
    if np.any(v_in < 0.0):
        raise ValueError("variance must be nonnegative")
    scalar = m_in.ndim == 0 and v_in.ndim == 0
    m_b, v_b = np.broadcast_arrays(np.atleast_1d(m_in), np.atleast_1d(v_in))
    m_b = np.ascontiguousarray(m_b, dtype=float)
    v_b = np.ascontiguousarray(v_b, dtype=float)
    k1 = np.empty_like(m_b)
    k2 = np.empty_like(m_b)
    degenerate = v_b == 0.0
    heavy = v_b > HEAVY_V
    regular = ~degenerate & ~heavy
    if degenerate.any():
        p = expit(m_b[degenerate])
        k1[degenerate] = p
        k2[degenerate] = p * p
    if regular.any():
        k1[regular], k2[regular] = _gh_moments(m_b[regular], v_b[regular], gh_order)
    if heavy.any():
        k1[heavy], k2[heavy] = _heavy_moments(m_b[heavy], v_b[heavy], gh_order)
    var = np.maximum(k2 - k1 * k1, 0.0)
    if scalar:
        return float(k1[0]), float(var[0])
    return k1, var


def kappa(m, v, gh_order=None):
    """Mean of the logit-normal law; in (0, 1), exactly logistic(m) at v=0."""
    return moments(m, v, gh_order)[0]


def tau(m, v, gh_order=None):
    """Variance of the logit-normal law; in [0, 1/4)."""
    return moments(m, v, gh_order)[1]


def quantile(m, v, q):
    """q-th quantile: logistic(m + z_q * sqrt(v)) with z_q standard normal."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise ValueError("variance must be nonnegative")
    out = expit(np.asarray(m, dtype=float) + ndtri(q) * np.sqrt(v))
    return float(out) if out.ndim == 0 else out


def sample(m, v, rng, size=None):
    """Draw logistic(normal) variates; reproducible for a seeded generator."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise ValueError("variance must be nonnegative")
    if size is None:
        size = np.broadcast(np.asarray(m, dtype=float), v).shape
    z = rng.standard_normal(size)
    out = expit(np.asarray(m, dtype=float) + np.sqrt(v) * z)
    return float(out) if out.ndim == 0 else out
