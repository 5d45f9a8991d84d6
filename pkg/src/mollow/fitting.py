"""Levenberg-Marquardt least squares with parameter bounds and covariance estimates."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError

_FD_STEP = 6e-6  # ~ eps**(1/3), central differences


@dataclass
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray = None
    x_unit: str = ""
    y_unit: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if self.y_err is not None:
            self.y_err = np.asarray(self.y_err, dtype=float)
            if self.y_err.shape != self.y.shape:
                raise ValueError("y_err must match y in length")
            if np.any(self.y_err <= 0):
                raise ValueError("y_err must be positive")

    def __len__(self):
        return self.x.size


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    sigmas: np.ndarray
    reduced_chi2: float
    covariance: np.ndarray
    converged: bool = True
    n_iter: int = 0
    flags: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def __iter__(self):
        return iter(self.values)

    def sigma(self, name):
        return self.sigmas[self.names.index(name)]

    def correlation(self):
        d = np.sqrt(np.diag(self.covariance))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.covariance / np.outer(d, d)

    def as_dict(self):
        return {
            "names": list(self.names),
            "values": [float(v) for v in self.values],
            "sigmas": [float(s) for s in self.sigmas],
            "reduced_chi2": float(self.reduced_chi2),
            "converged": bool(self.converged),
            "flags": list(self.flags),
        }


def _jacobian(fun, p, f0, lower, upper, scale):
    J = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = _FD_STEP * max(abs(p[j]), scale[j])
        lo, hi = p.copy(), p.copy()
        lo[j] = max(p[j] - h, lower[j])
        hi[j] = min(p[j] + h, upper[j])
        if hi[j] == lo[j]:
            J[:, j] = 0.0
            continue
        J[:, j] = (fun(hi) - fun(lo)) / (hi[j] - lo[j])
    return J


def _covariance(J):
    A = J.T @ J
    d = np.sqrt(np.diag(A))
    if np.any(d == 0) or not np.all(np.isfinite(A)):
        raise DegenerateFitError("a parameter has no influence on the model at the solution")
    C = A / np.outer(d, d)
    if np.linalg.cond(C) > 1e13:
        raise DegenerateFitError("curvature matrix is singular; parameters are not separately determined")
    return np.linalg.inv(C) / np.outer(d, d)


def least_squares(model, data, p0, bounds=None, names=None, jac=None, xtol=1e-8, max_iter=200):
    """Minimize sum(((y - model(x, *p)) / y_err)**2) by damped Gauss-Newton steps.

    Stops once an accepted step changes every parameter by less than `xtol`
    relative, or after `max_iter` iterations (then ``converged`` is False and the
    best point is returned).  Parameter sigmas come from the inverse curvature
    scaled by the reduced chi-square.  `jac`, if given, returns d model / d p with
    shape (n_points, n_params).
    """
    x, y = data.x, data.y
    w = 1.0 / data.y_err if data.y_err is not None else np.ones_like(y)
    p = np.array(p0, dtype=float)
    n_par = p.size
    if names is None:
        names = tuple(f"p{k}" for k in range(n_par))
    lower, upper = (np.full(n_par, -np.inf), np.full(n_par, np.inf)) if bounds is None else (
        np.asarray(bounds[0], float), np.asarray(bounds[1], float))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data must be finite")
    if np.any(p < lower) or np.any(p > upper):
        raise ValueError("initial guess lies outside the bounds")
    scale = np.where(p != 0, np.abs(p), 1.0)

    def resid(q):
        return (y - model(x, *q)) * w

    def jacobian(q, r):
        if jac is not None:
            return -np.asarray(jac(x, *q)) * w[:, None]
        return _jacobian(resid, q, r, lower, upper, scale)

    r = resid(p)
    chi2 = r @ r
    lam = 1e-3
    converged = False
    it = 0
    J = jacobian(p, r)
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-300)
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= 10
            continue
        trial = np.clip(p + step, lower, upper)
        r_new = resid(trial)
        chi2_new = r_new @ r_new
        if np.isfinite(chi2_new) and chi2_new <= chi2:
            delta = trial - p
            p, r, chi2 = trial, r_new, chi2_new
            lam = max(lam / 10, 1e-12)
            if np.all(np.abs(delta) <= xtol * (np.abs(p) + 1e-300)):
                converged = True
                break
            J = jacobian(p, r)
        else:
            lam *= 10
            if lam > 1e16:
                # no downhill direction left at machine precision
                converged = True
                break
    dof = max(y.size - n_par, 1)
    red = float(chi2 / dof)
    J = jacobian(p, r)
    cov = _covariance(J) * (red if red > 0 else 1.0)
    flags = [] if converged else [f"no convergence after {max_iter} iterations"]
    return FitResult(tuple(names), p, np.sqrt(np.diag(cov)), red, cov, converged, it, flags)
