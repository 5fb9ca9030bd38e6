"""Data model for binary time-series panels and model-matrix construction.

A panel holds one binary series per input site.  The model matrix stacks,
time-major, one row per (site, time step) over the effective time range
``t = max(R, L) + 1 .. T``: the first ``max(R, L)`` steps are conditioned
on and appear only as lagged regressors, never as response rows.  Row
``(t - t0 - 1) * n + i`` belongs to site i at time t, i.e. sites vary
fastest within a time block.
"""

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PanelDataError",
    "InputDesign",
    "BinaryPanel",
    "ModelOrder",
    "DesignMatrix",
    "build_design",
    "load_panel",
    "standardize_design",
    "apply_scaling",
]


class PanelDataError(ValueError):
    """Invalid input/panel data; message cites 1-based row/column."""


@dataclass(frozen=True)
class InputDesign:
    """n input sites in d-dimensional space."""

    sites: np.ndarray
    names: tuple = None

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float)
        if sites.ndim == 1:
            sites = sites[:, None]
        if sites.ndim != 2 or sites.shape[0] < 1 or sites.shape[1] < 1:
            raise PanelDataError("input design must be a nonempty n x d matrix")
        if not np.all(np.isfinite(sites)):
            bad = np.argwhere(~np.isfinite(sites))[0]
            raise PanelDataError(
                f"non-finite input value at row {bad[0] + 1}, column {bad[1] + 1}"
            )
        object.__setattr__(self, "sites", sites)
        if self.names is not None:
            names = tuple(str(c) for c in self.names)
            if len(names) != sites.shape[1]:
                raise PanelDataError("number of column names must match d")
            object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.sites.shape[0]

    @property
    def d(self):
        return self.sites.shape[1]

    def column_names(self):
        if self.names is not None:
            return self.names
        return tuple(f"x{j + 1}" for j in range(self.d))


@dataclass(frozen=True)
class BinaryPanel:
    """n x T matrix of 0/1 responses; column t is time step t."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise PanelDataError("panel must be a nonempty n x T matrix")
        if not np.isin(y, (0, 1)).all():
            flat = ~np.isin(y, (0, 1))
            bad = np.argwhere(flat)[0]
            raise PanelDataError(
                f"non-binary response {y[bad[0], bad[1]]!r} at "
                f"row {bad[0] + 1}, column {bad[1] + 1}"
            )
        object.__setattr__(self, "y", y.astype(np.int8))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class ModelOrder:
    """Autoregressive order R and input-interaction order L."""

    R: int = 0
    L: int = 0

    def __post_init__(self):
        if self.R < 0 or self.L < 0:
            raise ValueError("orders must be nonnegative")
        object.__setattr__(self, "R", int(self.R))
        object.__setattr__(self, "L", int(self.L))

    @property
    def max_lag(self):
        return max(self.R, self.L)

    def validate_for(self, T):
        if T == 1 and self.max_lag > 0:
            raise ValueError("R = L = 0 is required when T = 1")
        if T > 1 and self.max_lag >= T:
            raise ValueError(
                f"order max(R, L) = {self.max_lag} leaves no response rows "
                f"for T = {T}"
            )

    def n_coefficients(self, d):
        return 1 + self.R + d + d * self.L

    def to_dict(self):
        return {"R": self.R, "L": self.L}

    @classmethod
    def from_dict(cls, dct):
        return cls(int(dct["R"]), int(dct["L"]))


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked model matrix over the effective time range.

    Attributes
    ----------
    X : ndarray, shape (n * t_eff, m)
        Row layout per time block: (1, y lags 1..R, x, x * y lag 1..L).
    names : tuple of str
        Coefficient names aligned with the columns.
    t_start : int
        First modeled time step (1-based), ``max(R, L) + 1``.
    """

    X: np.ndarray
    names: tuple
    t_start: int
    n: int
    t_eff: int

    @property
    def m(self):
        return self.X.shape[1]


def coefficient_names(order, input_names):
    """Column names: alpha0, phi_r, alpha per input, gamma_l per input."""
    names = ["alpha0"]
    names += [f"phi{r}" for r in range(1, order.R + 1)]
    names += [f"alpha_{c}" for c in input_names]
    for lag in range(1, order.L + 1):
        names += [f"gamma{lag}_{c}" for c in input_names]
    return tuple(names)


def lagged_response(panel, t, lag):
    """y_{., t-lag} as a float vector, zero before the first time step.

    Times are 1-based; lags reaching t - lag < 1 use the convention
    y_{., s} = 0 for s < 1 (fresh-series semantics, shared with the
    generators and the emulator).
    """
    s = t - lag
    if s < 1:
        return np.zeros(panel.n)
    return panel.y[:, s - 1].astype(float)


def build_design(design, panel, order):
    """Assemble the model matrix for a panel.

    Rows cover t = max(R, L) + 1 .. T, time-major; the conditioned-on
    initial steps contribute lag columns only.
    """
    if design.n != panel.n:
        raise PanelDataError(
            f"inputs have {design.n} rows but panel has {panel.n}"
        )
    order.validate_for(panel.T)
    n, d, T = design.n, design.d, panel.T
    t0 = order.max_lag
    t_eff = T - t0
    m = order.n_coefficients(d)
    X = np.empty((n * t_eff, m))
    for b, t in enumerate(range(t0 + 1, T + 1)):
        rows = slice(b * n, (b + 1) * n)
        X[rows, 0] = 1.0
        col = 1
        for r in range(1, order.R + 1):
            X[rows, col] = lagged_response(panel, t, r)
            col += 1
        X[rows, col:col + d] = design.sites
        col += d
        for lag in range(1, order.L + 1):
            X[rows, col:col + d] = design.sites * lagged_response(panel, t, lag)[:, None]
            col += d
    return DesignMatrix(
        X=X,
        names=coefficient_names(order, design.column_names()),
        t_start=t0 + 1,
        n=n,
        t_eff=t_eff,
    )


def _read_csv_matrix(path, header):
    rows = []
    names = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for idx, row in enumerate(reader):
            if not row or all(c.strip() == "" for c in row):
                continue
            if header and names is None:
                names = [c.strip() for c in row]
                continue
            rows.append([c.strip() for c in row])
    if not rows:
        raise PanelDataError(f"{path}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise PanelDataError(
                f"{path}: row {i + 1} has {len(row)} columns, expected {width}"
            )
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise PanelDataError(
                    f"{path}: cannot parse {cell!r} at row {i + 1}, "
                    f"column {j + 1}"
                ) from None
    return values, names


def load_panel(inputs_path, panel_path, header=False):
    """Load and validate an (inputs CSV, panel CSV) pair.

    Rejects NaN, non-{0,1} responses, and row-count mismatches with
    messages citing the offending 1-based cell.
    """
    xvals, xnames = _read_csv_matrix(inputs_path, header)
    if not np.all(np.isfinite(xvals)):
        bad = np.argwhere(~np.isfinite(xvals))[0]
        raise PanelDataError(
            f"{inputs_path}: non-finite value at row {bad[0] + 1}, "
            f"column {bad[1] + 1}"
        )
    yvals, _ = _read_csv_matrix(panel_path, header)
    bad_mask = ~np.isin(yvals, (0.0, 1.0))
    if bad_mask.any():
        bad = np.argwhere(bad_mask)[0]
        raise PanelDataError(
            f"{panel_path}: non-binary response {yvals[bad[0], bad[1]]!r} "
            f"at row {bad[0] + 1}, column {bad[1] + 1}"
        )
    if xvals.shape[0] != yvals.shape[0]:
        raise PanelDataError(
            f"shape mismatch: {inputs_path} has {xvals.shape[0]} rows but "
            f"{panel_path} has {yvals.shape[0]}"
        )
    design = InputDesign(sites=xvals, names=tuple(xnames) if xnames else None)
    return design, BinaryPanel(y=yvals.astype(np.int8))


def standardize_design(design):
    """Rescale every input column to [0, 1]; returns (design, scaling).

    The scaling ``(mins, ranges)`` must be stored with the fitted model so
    that prediction-time inputs receive the identical transform.  Constant
    columns map to 0.
    """
    mins = design.sites.min(axis=0)
    ranges = design.sites.max(axis=0) - mins
    safe = np.where(ranges > 0.0, ranges, 1.0)
    scaled = (design.sites - mins) / safe
    return InputDesign(sites=scaled, names=design.names), (mins, safe)


def apply_scaling(x, scaling):
    """Apply a stored standardization to new input points."""
    if scaling is None:
        return np.asarray(x, dtype=float)
    mins, ranges = scaling
    return (np.asarray(x, dtype=float) - mins) / ranges
