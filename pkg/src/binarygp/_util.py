"""Shared numerical helpers: stable logistic transforms and seed derivation."""

import numpy as np

# Probabilities entering a logit are clamped to this band everywhere.
PROB_EPS = 1e-6


def clamp_prob(p, eps=PROB_EPS):
    """Clip probabilities into [eps, 1 - eps]."""
    return np.clip(p, eps, 1.0 - eps)


def derive_seed(master, *key):
    """Deterministic sub-seed: SeedSequence((master, *key)).

    All randomized operations derive their streams this way, so parallel
    and serial execution over replicates/paths consume identical streams.
    """
    parts = [int(master)] + [int(k) for k in key]
    return np.random.SeedSequence(parts)


def generator(master, *key):
    """PCG64 generator seeded by :func:`derive_seed`."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *key)))


# Stream tags for sub-seed derivation (documented splitting rule).
STREAM_MH = 0
STREAM_PATHS = 1
STREAM_PREDICTIVE = 2
STREAM_BASELINE = 3
STREAM_REPLICATE = 4
STREAM_CV_CHAIN = 5
STREAM_CV_BASELINE = 6
STREAM_SITE_PATHS = 7
STREAM_QUERY_POINT = 8


def derive_int_seed(master, *key):
    """32-bit integer sub-seed (for APIs that take plain int seeds)."""
    return int(derive_seed(master, *key).generate_state(1)[0])
