"""Correlation functions between input sites and correlation-matrix assembly.

The default family is the power exponential correlation

    R(x, x') = exp{ -sum_l |x_l - x'_l|^p / theta_l },

with per-dimension lengthscales ``theta`` and a fixed power ``p in (0, 2]``.
Additional families can be registered through :func:`register_family`; they
must map (spec, A, B) to the cross-correlation matrix between the rows of A
and B.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelSpec",
    "CorrMatrix",
    "kernel_eval",
    "corr_matrix",
    "cross_corr",
    "register_family",
    "DEFAULT_NUGGET",
]

# Added to the diagonal before any factorization; keeps Cholesky solvable
# on near-duplicate sites.
DEFAULT_NUGGET = 1e-8

POWER_EXPONENTIAL = "power_exponential"


@dataclass(frozen=True)
class KernelSpec:
    """Correlation-function specification.

    Parameters
    ----------
    lengthscales : array_like, shape (d,)
        Positive per-dimension decay parameters.
    power : float
        Exponent p in (0, 2]; fixed, never estimated.
    family : str
        Registered family name; only ``"power_exponential"`` ships built in.
    """

    lengthscales: np.ndarray
    power: float = 2.0
    family: str = POWER_EXPONENTIAL

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("lengthscales must be a 1-d vector")
        if not np.all(np.isfinite(theta)) or np.any(theta <= 0.0):
            raise ValueError("lengthscales must be positive and finite")
        if not (0.0 < self.power <= 2.0):
            raise ValueError(f"power must lie in (0, 2], got {self.power}")
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; "
                f"registered: {sorted(_FAMILIES)}"
            )
        object.__setattr__(self, "lengthscales", theta)

    @property
    def dim(self):
        return self.lengthscales.size

    def with_lengthscales(self, theta):
        return KernelSpec(np.asarray(theta, dtype=float), self.power, self.family)

    def to_dict(self):
        return {
            "family": self.family,
            "power": float(self.power),
            "lengthscales": [float(t) for t in self.lengthscales],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["lengthscales"], dtype=float), float(d["power"]), d["family"])


@dataclass(frozen=True)
class CorrMatrix:
    """Pairwise correlation matrix over a design, unit diagonal.

    ``values`` never includes the nugget; call :meth:`regularized` before
    factorizing.
    """

    values: np.ndarray
    nugget: float = DEFAULT_NUGGET
    _reg: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.values.shape[0]

    def regularized(self):
        """Correlation matrix with the nugget added to the diagonal (cached)."""
        if self._reg is None:
            reg = self.values + self.nugget * np.eye(self.n)
            object.__setattr__(self, "_reg", reg)
        return self._reg


def pe_distance_powers(a, b, power):
    """|a_il - b_jl|^power stacked as an (n, m, d) array.

    Precomputing this once lets optimizers rebuild the power exponential
    correlation for many lengthscale values without re-touching the design.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a[:, None, :] - b[None, :, :]) ** power


def pe_corr_from_powers(dist_powers, lengthscales):
    """Power exponential correlation from precomputed distance powers."""
    return np.exp(-dist_powers @ (1.0 / np.asarray(lengthscales, dtype=float)))


def _power_exponential(spec, a, b):
    return pe_corr_from_powers(pe_distance_powers(a, b, spec.power), spec.lengthscales)


_FAMILIES = {POWER_EXPONENTIAL: _power_exponential}


def register_family(name, cross_fn):
    """Register a correlation family.

    ``cross_fn(spec, A, B)`` must return the matrix of correlations between
    the rows of A (n x d) and B (m x d), with value 1 at zero distance.
    """
    _FAMILIES[name] = cross_fn


def _check_dim(spec, x, what="point"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != spec.dim:
        raise ValueError(
            f"{what} has dimension {x.size}, kernel expects {spec.dim}"
        )
    return x


def kernel_eval(spec, xi, xj):
    """Correlation between two input points; symmetric, 1 at zero distance."""
    xi = _check_dim(spec, xi)
    xj = _check_dim(spec, xj)
    out = _FAMILIES[spec.family](spec, xi[None, :], xj[None, :])
    return float(out[0, 0])


def corr_matrix(spec, x, nugget=DEFAULT_NUGGET):
    """Pairwise correlation matrix of a design.

    Duplicated input sites are permitted but flagged with a warning, since
    they make the matrix singular up to the nugget.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("design must be an n x d matrix")
    if x.shape[1] != spec.dim:
        raise ValueError(
            f"design has dimension {x.shape[1]}, kernel expects {spec.dim}"
        )
    r = _FAMILIES[spec.family](spec, x, x)
    np.fill_diagonal(r, 1.0)
    n = r.shape[0]
    if n > 1:
        off = r[~np.eye(n, dtype=bool)]
        if np.any(off >= 1.0):
            warnings.warn(
                "duplicated (or coincident) input sites produce a "
                "near-singular correlation matrix; relying on the nugget",
                stacklevel=2,
            )
    return CorrMatrix(values=r, nugget=nugget)


def cross_corr(spec, x, xnew):
    """Vector of correlations between one new point and each design site."""
    x = np.asarray(x, dtype=float)
    xnew = _check_dim(spec, xnew, what="new point")
    if x.shape[1] != spec.dim:
        raise ValueError(
            f"design has dimension {x.shape[1]}, kernel expects {spec.dim}"
        )
    return _FAMILIES[spec.family](spec, xnew[None, :], x)[0]
