"""Pure-Python twin of the compiled Metropolis-Hastings sweep kernel.

Selected automatically when the compiled extension is unavailable (or when
``BINARYGP_BACKEND=python`` forces it).  Every floating-point operation
mirrors ``_mh_core.pyx`` in the same order, so the two backends produce
bit-identical chains from identical random inputs; the row update uses a
numpy elementwise multiply-add, which performs the same IEEE operations as
the compiled per-element loop.
"""

import math


def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def run_sweeps(q, mu, y, eta, qd, sigma2, normals, uniforms):
    """Advance one block's chain by ``normals.shape[0]`` full sweeps.

    ``eta`` and ``qd = q @ (eta - mu)`` are modified in place; returns the
    number of accepted proposals.
    """
    n_sweeps, nb = normals.shape
    accepted = 0
    for s in range(n_sweeps):
        zrow = normals[s]
        urow = uniforms[s]
        for k in range(nb):
            qkk = q[k, k]
            cond_m = mu[k] - (qd[k] - qkk * (eta[k] - mu[k])) / qkk
            cond_sd = math.sqrt(sigma2 / qkk)
            eta_prop = cond_m + cond_sd * zrow[k]
            if y[k]:
                llr = _softplus(-eta[k]) - _softplus(-eta_prop)
            else:
                llr = _softplus(eta[k]) - _softplus(eta_prop)
            if math.log(urow[k]) < llr:
                delta = eta_prop - eta[k]
                qd += q[k] * delta
                eta[k] = eta_prop
                accepted += 1
    return accepted
