# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-site Metropolis-Hastings sweep kernel.

Updates one latent logit per step within one time block: the proposal is the
Gaussian conditional of the latent field given the other sites (row k of the
precision matrix), and the acceptance ratio is the Bernoulli likelihood
ratio only (the proposal cancels the prior).

The arithmetic here must stay operation-for-operation identical to
``_mh_fallback.run_sweeps`` so that both backends produce bit-identical
chains from the same random inputs; keep the two in sync and compile with
-ffp-contract=off.
"""

from libc.math cimport exp, log, log1p, sqrt


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def run_sweeps(double[:, ::1] q, double[::1] mu, const signed char[::1] y,
               double[::1] eta, double[::1] qd, double sigma2,
               double[:, ::1] normals, double[:, ::1] uniforms):
    """Advance one block's chain by ``normals.shape[0]`` full sweeps.

    ``eta`` holds the latent logits and ``qd = q @ (eta - mu)`` is kept
    incrementally up to date; both are modified in place.  Returns the
    number of accepted proposals.
    """
    cdef Py_ssize_t n_sweeps = normals.shape[0]
    cdef Py_ssize_t nb = eta.shape[0]
    cdef Py_ssize_t s, k, j
    cdef double qkk, cond_m, cond_sd, eta_prop, delta, llr
    cdef long accepted = 0
    for s in range(n_sweeps):
        for k in range(nb):
            qkk = q[k, k]
            cond_m = mu[k] - (qd[k] - qkk * (eta[k] - mu[k])) / qkk
            cond_sd = sqrt(sigma2 / qkk)
            eta_prop = cond_m + cond_sd * normals[s, k]
            if y[k]:
                llr = _softplus(-eta[k]) - _softplus(-eta_prop)
            else:
                llr = _softplus(eta[k]) - _softplus(eta_prop)
            if log(uniforms[s, k]) < llr:
                delta = eta_prop - eta[k]
                for j in range(nb):
                    qd[j] = qd[j] + q[k, j] * delta
                eta[k] = eta_prop
                accepted += 1
    return accepted
