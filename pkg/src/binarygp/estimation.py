"""Penalized quasi-likelihood fitting of the binary time-series GP model.

The latent model is

    logit(p) = X beta + Z,    Z ~ Normal(0, sigma^2 * blockdiag_t(R_theta)),

with the Gaussian field independent across time steps and correlated across
sites within a step.  Fitting alternates two loops:

* an inner iterated weighted least squares (IWLS) fixed point in
  ``(beta, Z)`` at fixed covariance parameters, solving
  ``(X' V^-1 X) beta = X' V^-1 eta~`` with ``V = W^-1 + sigma^2 R`` and the
  working response ``eta~ = logit(p) + (y - p) / (p (1 - p))``;
* an outer restricted-likelihood (REML) minimization over
  ``omega = (sigma^2, theta)`` at the current working quantities, by a
  bounded Nelder-Mead search in log parameters.

All linear algebra runs block-by-block over time steps; a dense N x N
system is never formed.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import Bounds, minimize
from scipy.special import expit, logit

from . import kernel as kern
from ._util import clamp_prob
from .panel import BinaryPanel, InputDesign, ModelOrder, build_design, coefficient_names

__all__ = [
    "CovParams",
    "Coefficients",
    "FitState",
    "FitOptions",
    "ConvergenceReport",
    "FittedModel",
    "SingularDesignError",
    "working_response",
    "iwls_step",
    "reml_negloglik",
    "fit",
]

log = logging.getLogger("binarygp.estimation")

MODEL_SCHEMA_VERSION = 1


class SingularDesignError(ValueError):
    """Collinear model matrix; names the deficient columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "model matrix is rank deficient; collinear columns: "
            + ", ".join(self.columns)
        )


@dataclass(frozen=True)
class CovParams:
    """GP variance sigma^2 and kernel lengthscales theta (all positive)."""

    sigma2: float
    theta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if self.sigma2 <= 0.0 or not np.isfinite(self.sigma2):
            raise ValueError("sigma2 must be positive and finite")
        if np.any(theta <= 0.0) or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be positive and finite")
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "theta", theta)

    def log_vector(self):
        return np.concatenate(([np.log(self.sigma2)], np.log(self.theta)))

    @classmethod
    def from_log_vector(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(sigma2=float(np.exp(u[0])), theta=np.exp(u[1:]))

    def to_dict(self):
        return {"sigma2": self.sigma2, "theta": [float(t) for t in self.theta]}

    @classmethod
    def from_dict(cls, d):
        return cls(sigma2=d["sigma2"], theta=np.asarray(d["theta"], dtype=float))


@dataclass(frozen=True)
class Coefficients:
    """Mean-function parameters (AR terms, intercept, inputs, interactions).

    The flat vector order matches the model-matrix columns:
    ``(alpha0, phi_1..phi_R, alpha_1..alpha_d, gamma_1..gamma_L by input)``.
    """

    alpha0: float
    phi: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray  # shape (L, d)

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float)) if np.size(self.phi) else np.zeros(0)
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1, alpha.size) if np.size(self.gamma) else np.zeros((0, alpha.size))
        for arr in (phi, alpha, gamma):
            if not np.all(np.isfinite(arr)):
                raise ValueError("coefficients must be finite")
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)

    @property
    def order(self):
        return ModelOrder(R=self.phi.size, L=self.gamma.shape[0])

    def to_vector(self):
        return np.concatenate(([self.alpha0], self.phi, self.alpha, self.gamma.ravel()))

    @classmethod
    def from_vector(cls, v, order, d):
        v = np.asarray(v, dtype=float)
        if v.size != order.n_coefficients(d):
            raise ValueError(
                f"coefficient vector has length {v.size}, expected "
                f"{order.n_coefficients(d)}"
            )
        alpha0 = v[0]
        phi = v[1:1 + order.R]
        alpha = v[1 + order.R:1 + order.R + d]
        gamma = v[1 + order.R + d:].reshape(order.L, d)
        return cls(alpha0=alpha0, phi=phi, alpha=alpha, gamma=gamma)


@dataclass(frozen=True)
class FitState:
    """Converged working quantities on the stacked effective rows."""

    p: np.ndarray
    eta_tilde: np.ndarray
    Z: np.ndarray
    W: np.ndarray


@dataclass(frozen=True)
class FitOptions:
    """Tolerances and optimizer controls for :func:`fit`."""

    inner_tol: float = 1e-6
    inner_max_iter: int = 100
    outer_tol_beta: float = 1e-4
    outer_tol_log_cov: float = 1e-4
    outer_max_iter: int = 50
    prob_eps: float = 1e-6
    nugget: float = kern.DEFAULT_NUGGET
    optimizer_max_evals: int = 400
    optimizer_xatol: float = 1e-5
    optimizer_fatol: float = 1e-9
    log_theta_bounds: tuple = (-6.0, 6.0)
    log_sigma2_bounds: tuple = (-12.0, 6.0)
    # Deterministic first-sweep restarts: offsets added to log(omega).
    restart_offsets: tuple = (0.0, -1.0, 1.0)
    fix_cov: CovParams = None


@dataclass
class ConvergenceReport:
    converged: bool
    n_outer: int
    inner_iterations: list
    delta_beta: float
    delta_log_cov: float
    reml_value: float
    reml_history: list
    separation: bool = False
    message: str = ""

    def to_dict(self):
        return {
            "converged": self.converged,
            "n_outer": self.n_outer,
            "inner_iterations": list(self.inner_iterations),
            "delta_beta": self.delta_beta,
            "delta_log_cov": self.delta_log_cov,
            "reml_value": self.reml_value,
            "reml_history": list(self.reml_history),
            "separation": self.separation,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def working_response(y, p, eps=1e-6):
    """Working response eta~ = logit(p) + (y - p) / (p (1 - p))."""
    y = np.asarray(y, dtype=float)
    p = clamp_prob(np.asarray(p, dtype=float), eps)
    return logit(p) + (y - p) / (p * (1.0 - p))


def _deficient_columns(X, names):
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return list(names)
    tol = diag.max() * max(X.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    return [names[j] for j in sorted(piv[rank:])]


class _BlockSystem:
    """One factorization pass of V = W^-1 + sigma^2 R over the time blocks.

    Collects the normal equations ``A = X' V^-1 X`` and ``b = X' V^-1 eta``,
    log|V|, and eta' V^-1 eta from per-block Cholesky factors; V is never
    assembled as a dense N x N matrix.
    """

    def __init__(self, X, eta, W, sigma2, r_reg, n, t_eff):
        m = X.shape[1]
        self.X, self.eta, self.W = X, eta, W
        self.sigma2, self.r_reg, self.n, self.t_eff = sigma2, r_reg, n, t_eff
        self.A = np.zeros((m, m))
        self.b = np.zeros(m)
        self.logdet_v = 0.0
        self.quad_eta = 0.0
        self.vinv_eta = np.empty_like(eta)
        self.vinv_x = np.empty_like(X)
        for t in range(t_eff):
            rows = slice(t * n, (t + 1) * n)
            v_t = sigma2 * r_reg + np.diag(1.0 / W[rows])
            c, low = scipy.linalg.cho_factor(v_t, lower=True)
            self.logdet_v += 2.0 * np.log(np.diag(c)).sum()
            rhs = np.column_stack([X[rows], eta[rows]])
            sol = scipy.linalg.cho_solve((c, low), rhs)
            self.vinv_x[rows] = sol[:, :-1]
            self.vinv_eta[rows] = sol[:, -1]
            self.A += X[rows].T @ sol[:, :-1]
            self.b += X[rows].T @ sol[:, -1]
            self.quad_eta += eta[rows] @ sol[:, -1]

    def solve_beta(self, names):
        try:
            c = scipy.linalg.cho_factor(self.A, lower=True)
            return scipy.linalg.cho_solve(c, self.b)
        except scipy.linalg.LinAlgError:
            raise SingularDesignError(_deficient_columns(self.X, names)) from None

    def z_hat(self, beta):
        """Random-effect prediction Z = sigma^2 R V^-1 (eta - X beta)."""
        vinv_resid = self.vinv_eta - self.vinv_x @ beta
        z = np.empty_like(self.eta)
        for t in range(self.t_eff):
            rows = slice(t * self.n, (t + 1) * self.n)
            z[rows] = self.sigma2 * (self.r_reg @ vinv_resid[rows])
        return z

    def reml_value(self, logdet_xtx):
        n_rows, m = self.X.shape
        sign, logdet_a = np.linalg.slogdet(self.A)
        if sign <= 0:
            return np.inf
        quad = self.quad_eta - self.b @ np.linalg.solve(self.A, self.b)
        return (
            0.5 * (n_rows - m) * np.log(2.0 * np.pi)
            - 0.5 * logdet_xtx
            + 0.5 * self.logdet_v
            + 0.5 * logdet_a
            + 0.5 * quad
        )


def iwls_step(dm, eta_tilde, W, cov, corr, order=None):
    """One weighted least-squares solve for (Coefficients, Z).

    Parameters
    ----------
    dm : DesignMatrix
    eta_tilde, W : ndarray, shape (n * t_eff,)
        Working response and diagonal weights, time-major.
    cov : CovParams
    corr : CorrMatrix
        Site correlation matrix shared by all time blocks.
    """
    sys = _BlockSystem(
        dm.X, np.asarray(eta_tilde, float), np.asarray(W, float),
        cov.sigma2, corr.regularized(), dm.n, dm.t_eff,
    )
    beta = sys.solve_beta(dm.names)
    z = sys.z_hat(beta)
    if order is None:
        return beta, z
    d = (dm.m - 1 - order.R) // (1 + order.L)
    return Coefficients.from_vector(beta, order, d), z


def reml_negloglik(cov, dm, eta_tilde, W, kernel_spec, design):
    """Restricted-likelihood objective L(omega) at fixed working quantities.

    Equals, up to shared constants, -2x the restricted log-likelihood of the
    working linear mixed model; factorization failure yields +inf so that a
    derivative-free optimizer treats the point as infeasible.
    """
    corr = kern.corr_matrix(kernel_spec.with_lengthscales(cov.theta), design.sites)
    sign, logdet_xtx = np.linalg.slogdet(dm.X.T @ dm.X)
    if sign <= 0:
        raise SingularDesignError(_deficient_columns(dm.X, dm.names))
    try:
        sys = _BlockSystem(
            dm.X, np.asarray(eta_tilde, float), np.asarray(W, float),
            cov.sigma2, corr.regularized(), dm.n, dm.t_eff,
        )
    except scipy.linalg.LinAlgError:
        return np.inf
    return float(sys.reml_value(logdet_xtx))


@dataclass
class FittedModel:
    """Everything needed to report, persist, and predict from one fit."""

    coefficients: Coefficients
    cov: CovParams
    kernel: kern.KernelSpec
    order: ModelOrder
    state: FitState
    design: InputDesign
    panel: BinaryPanel
    report: ConvergenceReport
    input_scaling: tuple = None
    options: FitOptions = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def coefficient_names(self):
        return coefficient_names(self.order, self.design.column_names())

    def design_matrix(self):
        return build_design(self.design, self.panel, self.order)

    def corr(self):
        """Training-site correlation matrix (cached)."""
        if "corr" not in self._cache:
            self._cache["corr"] = kern.corr_matrix(
                self.kernel.with_lengthscales(self.cov.theta), self.design.sites,
                nugget=self.options.nugget if self.options else kern.DEFAULT_NUGGET,
            )
        return self._cache["corr"]

    def precision(self):
        """Inverse of the regularized correlation matrix (cached)."""
        if "precision" not in self._cache:
            r = self.corr().regularized()
            c = scipy.linalg.cho_factor(r, lower=True)
            self._cache["precision"] = scipy.linalg.cho_solve(c, np.eye(r.shape[0]))
        return self._cache["precision"]

    def scale_input(self, x):
        from .panel import apply_scaling

        return apply_scaling(x, self.input_scaling)

    def to_dict(self):
        d = {
            "schema_version": MODEL_SCHEMA_VERSION,
            "order": self.order.to_dict(),
            "kernel": self.kernel.to_dict(),
            "coefficients": {
                "names": list(self.coefficient_names),
                "values": [float(v) for v in self.coefficients.to_vector()],
            },
            "cov": self.cov.to_dict(),
            "state": {
                "p": [float(v) for v in self.state.p],
                "Z": [float(v) for v in self.state.Z],
            },
            "design": {
                "sites": self.design.sites.tolist(),
                "names": list(self.design.names) if self.design.names else None,
            },
            "panel": self.panel.y.tolist(),
            "convergence": self.report.to_dict(),
            "input_scaling": None,
        }
        if self.input_scaling is not None:
            d["input_scaling"] = {
                "mins": [float(v) for v in self.input_scaling[0]],
                "ranges": [float(v) for v in self.input_scaling[1]],
            }
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValueError(
                f"model schema version {d.get('schema_version')!r} does not "
                f"match supported version {MODEL_SCHEMA_VERSION}"
            )
        order = ModelOrder.from_dict(d["order"])
        kernel_spec = kern.KernelSpec.from_dict(d["kernel"])
        design = InputDesign(
            sites=np.asarray(d["design"]["sites"], dtype=float),
            names=tuple(d["design"]["names"]) if d["design"]["names"] else None,
        )
        panel = BinaryPanel(y=np.asarray(d["panel"]))
        coefs = Coefficients.from_vector(
            np.asarray(d["coefficients"]["values"], dtype=float), order, design.d
        )
        p = np.asarray(d["state"]["p"], dtype=float)
        z = np.asarray(d["state"]["Z"], dtype=float)
        y_eff = panel.y[:, order.max_lag:].T.ravel().astype(float)
        state = FitState(p=p, eta_tilde=working_response(y_eff, p), Z=z, W=p * (1.0 - p))
        scaling = None
        if d.get("input_scaling"):
            scaling = (
                np.asarray(d["input_scaling"]["mins"], dtype=float),
                np.asarray(d["input_scaling"]["ranges"], dtype=float),
            )
        return cls(
            coefficients=coefs,
            cov=CovParams.from_dict(d["cov"]),
            kernel=kernel_spec,
            order=order,
            state=state,
            design=design,
            panel=panel,
            report=ConvergenceReport.from_dict(d["convergence"]),
            input_scaling=scaling,
        )

    def save(self, path):
        import json

        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        import json

        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _iwls_inner(X, yv, p, eta, cov, r_reg, n, t_eff, names, opts):
    """Run the IWLS fixed point to convergence of the working response."""
    beta = None
    z = None
    converged = False
    iters = 0
    for iters in range(1, opts.inner_max_iter + 1):
        W = p * (1.0 - p)
        sys = _BlockSystem(X, eta, W, cov.sigma2, r_reg, n, t_eff)
        beta = sys.solve_beta(names)
        z = sys.z_hat(beta)
        p = clamp_prob(expit(X @ beta + z), opts.prob_eps)
        eta_new = working_response(yv, p, opts.prob_eps)
        delta = float(np.max(np.abs(eta_new - eta)))
        eta = eta_new
        if delta < opts.inner_tol:
            converged = True
            break
    return beta, z, p, eta, p * (1.0 - p), iters, converged


def fit(design, panel, order=None, kernel_spec=None, options=None):
    """Fit (beta, omega) by alternating IWLS and bounded REML minimization.

    Deterministic given data and options.  Non-convergence after the outer
    iteration budget returns the best iterate flagged (not an exception);
    a panel whose responses are all identical triggers a separation
    warning but still returns the penalized solution.

    Returns
    -------
    FittedModel
    """
    order = order or ModelOrder()
    options = options or FitOptions()
    if kernel_spec is None:
        kernel_spec = kern.KernelSpec(lengthscales=np.ones(design.d))
    dm = build_design(design, panel, order)
    yv = panel.y[:, order.max_lag:].T.ravel().astype(float)

    separation = bool(yv.min() == yv.max())
    if separation:
        warnings.warn(
            "all responses are identical; coefficients are only weakly "
            "identified (penalized solution returned)",
            stacklevel=2,
        )

    # Rank check up front so collinearity surfaces as a clear error.
    sign, logdet_xtx = np.linalg.slogdet(dm.X.T @ dm.X)
    if sign <= 0:
        raise SingularDesignError(_deficient_columns(dm.X, dm.names))

    fast_pe = kernel_spec.family == kern.POWER_EXPONENTIAL
    if fast_pe:
        dist_powers = kern.pe_distance_powers(design.sites, design.sites, kernel_spec.power)
    eye = options.nugget * np.eye(design.n)

    def corr_reg(theta):
        if fast_pe:
            r = kern.pe_corr_from_powers(dist_powers, theta)
            np.fill_diagonal(r, 1.0)
            return r + eye
        return kern.corr_matrix(
            kernel_spec.with_lengthscales(theta), design.sites, nugget=options.nugget
        ).regularized()

    cov = options.fix_cov or CovParams(sigma2=1.0, theta=np.ones(design.d))
    p = (yv + 0.5) / 2.0
    eta = working_response(yv, p, options.prob_eps)

    lo = np.concatenate(([options.log_sigma2_bounds[0]], np.full(design.d, options.log_theta_bounds[0])))
    hi = np.concatenate(([options.log_sigma2_bounds[1]], np.full(design.d, options.log_theta_bounds[1])))

    def optimize_cov(eta_fix, w_fix, current, first_sweep):
        def objective(u):
            c = CovParams.from_log_vector(u)
            try:
                sys = _BlockSystem(dm.X, eta_fix, w_fix, c.sigma2, corr_reg(c.theta), dm.n, dm.t_eff)
            except scipy.linalg.LinAlgError:
                return np.inf
            return sys.reml_value(logdet_xtx)

        u0 = current.log_vector()
        starts = [u0 + off for off in options.restart_offsets] if first_sweep else [u0]
        best_u, best_f = u0, objective(u0)
        for start in starts:
            res = minimize(
                objective,
                np.clip(start, lo, hi),
                method="Nelder-Mead",
                bounds=Bounds(lo, hi),
                options={
                    "maxfev": options.optimizer_max_evals,
                    "xatol": options.optimizer_xatol,
                    "fatol": options.optimizer_fatol,
                    "adaptive": True,
                },
            )
            if res.fun < best_f:
                best_u, best_f = res.x, float(res.fun)
        return CovParams.from_log_vector(best_u), best_f, float(objective(u0))

    beta_prev = None
    inner_iters = []
    reml_history = []
    delta_beta = np.inf
    delta_log_cov = np.inf
    converged = False
    reml_value = np.nan
    n_outer = 0

    for n_outer in range(1, options.outer_max_iter + 1):
        r_reg = corr_reg(cov.theta)
        beta, z, p, eta, W, iters, inner_ok = _iwls_inner(
            dm.X, yv, p, eta, cov, r_reg, dm.n, dm.t_eff, dm.names, options
        )
        inner_iters.append(iters)
        if options.fix_cov is None:
            cov_new, reml_new, reml_old = optimize_cov(eta, W, cov, n_outer == 1)
            reml_history.append({"at_previous": reml_old, "at_accepted": reml_new})
            delta_log_cov = float(np.max(np.abs(cov_new.log_vector() - cov.log_vector())))
            cov = cov_new
            reml_value = reml_new
        else:
            delta_log_cov = 0.0
        if beta_prev is not None:
            delta_beta = float(np.max(np.abs(beta - beta_prev)))
        beta_prev = beta
        log.debug(
            "outer %d: inner_iters=%d delta_beta=%.3g delta_log_cov=%.3g",
            n_outer, iters, delta_beta, delta_log_cov,
        )
        if (
            inner_ok
            and delta_beta < options.outer_tol_beta
            and delta_log_cov < options.outer_tol_log_cov
        ):
            converged = True
            break

    # Final pass at the accepted covariance so the stored state is exactly
    # the IWLS fixed point of the returned parameters.
    r_reg = corr_reg(cov.theta)
    beta, z, p, eta, W, iters, inner_ok = _iwls_inner(
        dm.X, yv, p, eta, cov, r_reg, dm.n, dm.t_eff, dm.names, options
    )
    inner_iters.append(iters)
    converged = converged and inner_ok

    if not converged:
        warnings.warn(
            f"fit did not converge within {options.outer_max_iter} outer "
            f"iterations (delta_beta={delta_beta:.3g}, "
            f"delta_log_cov={delta_log_cov:.3g})",
            stacklevel=2,
        )

    report = ConvergenceReport(
        converged=converged,
        n_outer=n_outer,
        inner_iterations=inner_iters,
        delta_beta=float(delta_beta),
        delta_log_cov=float(delta_log_cov),
        reml_value=float(reml_value) if np.isfinite(reml_value) else None,
        reml_history=reml_history,
        separation=separation,
        message="" if converged else "outer iteration budget exhausted",
    )
    coefs = Coefficients.from_vector(beta, order, design.d)
    state = FitState(p=p, eta_tilde=eta, Z=z, W=p * (1.0 - p))
    return FittedModel(
        coefficients=coefs,
        cov=cov,
        kernel=kernel_spec,
        order=order,
        state=state,
        design=design,
        panel=panel,
        report=report,
        options=options,
    )
