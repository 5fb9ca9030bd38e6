"""Asymptotic standard errors, Z scores, and p values for the mean function.

The sampling variance of the coefficient estimates comes from the sample
information matrix

    Lambda_N = (1/N) sum_it X_it X_it' p_it (1 - p_it)

evaluated at the fitted probabilities; standard deviations are the square
roots of the diagonal of ``(N Lambda_N)^-1`` and tests are two-sided
against the standard normal.  Covariance-parameter uncertainty is not
reported; only point estimates of (sigma^2, theta) are.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import ndtr

__all__ = ["CoefReport", "information_matrix", "coef_report"]


@dataclass(frozen=True)
class CoefReport:
    """Per-coefficient estimates with normal-theory uncertainty.

    ``flagged`` lists columns whose variance could not be computed because
    the information matrix is singular; their std_dev/z/p are NaN rather
    than silently pseudo-inverted.
    """

    names: tuple
    estimates: np.ndarray
    std_devs: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    flagged: tuple = ()

    def rows(self):
        for i, name in enumerate(self.names):
            yield {
                "name": name,
                "value": float(self.estimates[i]),
                "std_dev": float(self.std_devs[i]),
                "z_score": float(self.z_scores[i]),
                "p_value": float(self.p_values[i]),
            }

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "Value", "Standard deviation", "Z score", "p value"])
            for row in self.rows():
                writer.writerow(
                    [row["name"], repr(row["value"]), repr(row["std_dev"]),
                     repr(row["z_score"]), repr(row["p_value"])]
                )

    def to_dict(self):
        return {
            "columns": ["Value", "Standard deviation", "Z score", "p value"],
            "rows": list(self.rows()),
            "flagged": list(self.flagged),
        }


def information_matrix(model):
    """Sample information matrix of the mean-function coefficients.

    Symmetric positive semidefinite by construction (a weighted sum of
    outer products with nonnegative weights).
    """
    X = model.design_matrix().X
    w = model.state.W
    return (X.T @ (w[:, None] * X)) / X.shape[0]


def two_sided_p(z):
    """Two-sided normal p value, 2 * (1 - Phi(|z|))."""
    return 2.0 * ndtr(-np.abs(z))


def coef_report(model):
    """Wald-style coefficient table from a fitted model.

    std_dev is sqrt(diag((N Lambda_N)^-1)); a singular information matrix
    flags the collinear columns and reports NaN for them while the
    remaining block is inverted exactly.
    """
    names = model.coefficient_names
    est = model.coefficients.to_vector()
    X = model.design_matrix().X
    n_rows = X.shape[0]
    info = information_matrix(model) * n_rows  # N * Lambda_N
    m = info.shape[0]
    keep = np.arange(m)
    flagged = []
    try:
        c = scipy.linalg.cho_factor(info, lower=True)
        cov = scipy.linalg.cho_solve(c, np.eye(m))
    except scipy.linalg.LinAlgError:
        _, r, piv = scipy.linalg.qr(info, pivoting=True)
        diag = np.abs(np.diag(r))
        tol = diag.max() * m * np.finfo(float).eps
        rank = int((diag > tol).sum())
        flagged = sorted(int(j) for j in piv[rank:])
        keep = np.array([j for j in range(m) if j not in flagged], dtype=int)
        cov = np.full((m, m), np.nan)
        if keep.size:
            sub = scipy.linalg.inv(info[np.ix_(keep, keep)])
            cov[np.ix_(keep, keep)] = sub
    sd = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(sd > 0, est / sd, np.nan)
    p = np.where(np.isfinite(z), two_sided_p(np.nan_to_num(z)), np.nan)
    return CoefReport(
        names=tuple(names),
        estimates=est,
        std_devs=sd,
        z_scores=z,
        p_values=p,
        flagged=tuple(names[j] for j in flagged),
    )
