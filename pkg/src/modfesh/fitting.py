"""Damped least-squares (Levenberg-Marquardt) engine and closed-form linear fits.

The LM driver works on a residual vector r(p) (already whitened by the caller
when measurement sigmas are known) and an optional analytic Jacobian; without
one it falls back to forward differences with step h = sqrt(eps) max(|x|, 1).

Convergence is declared on a scale-invariant gradient test,
max_i |g_i| max(|p_i|, 1) <= tol * max(1, cost), or on a machine-precision
step stall; running out of iterations raises ConvergenceError carrying the
last iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = ["LMResult", "levenberg_marquardt", "finite_difference_jacobian",
           "LinearFit", "weighted_linear_fit"]

_SQRT_EPS = math.sqrt(np.finfo(float).eps)


def finite_difference_jacobian(residual, params, r0=None):
    """Forward-difference Jacobian with step h = sqrt(eps) * max(|x|, 1)."""
    p = np.asarray(params, dtype=float)
    if r0 is None:
        r0 = np.asarray(residual(p), dtype=float)
    jac = np.empty((r0.size, p.size))
    for i in range(p.size):
        h = _SQRT_EPS * max(abs(p[i]), 1.0)
        p_step = p.copy()
        p_step[i] += h
        jac[:, i] = (np.asarray(residual(p_step), dtype=float) - r0) / h
    return jac


@dataclass
class LMResult:
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float      # ||r|| at the solution
    iterations: int
    gradient_norm: float      # scale-invariant gradient measure at exit
    condition: float          # cond(J^T J) at the solution


def _covariance(jac, residual_norm, n_points, n_params):
    jtj = jac.T @ jac
    dof = max(n_points - n_params, 1)
    s2 = residual_norm ** 2 / dof
    try:
        cov = s2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = s2 * np.linalg.pinv(jtj)
    return cov, float(np.linalg.cond(jtj))


def levenberg_marquardt(residual, x0, jacobian=None, *,
                        max_iter: int = 200, grad_tol: float = 1e-10,
                        lambda0: float = 1e-3) -> LMResult:
    """Minimize 0.5 ||r(p)||^2 from x0; returns parameters and covariance.

    The covariance is s^2 (J^T J)^-1 with s^2 the reduced chi-square, so it is
    meaningful both for whitened residuals (s ~ 1) and raw ones.
    """
    p = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(p), dtype=float)
    cost = 0.5 * float(r @ r)
    lam = lambda0
    n_points = r.size

    def jac_at(p, r):
        if jacobian is not None:
            return np.asarray(jacobian(p), dtype=float)
        return finite_difference_jacobian(residual, p, r)

    for iteration in range(1, max_iter + 1):
        jac = jac_at(p, r)
        grad = jac.T @ r
        scale = np.maximum(np.abs(p), 1.0)
        grad_measure = float(np.max(np.abs(grad) * scale))
        if grad_measure <= grad_tol * max(1.0, cost):
            cov, cond = _covariance(jac, math.sqrt(2.0 * cost), n_points, p.size)
            return LMResult(p, cov, math.sqrt(2.0 * cost), iteration, grad_measure, cond)

        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = max(diag.max(), 1e-30)
        accepted = False
        while lam < 1e14:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + step
            r_new = np.asarray(residual(p_new), dtype=float)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                rel_step = float(np.max(np.abs(step) / scale))
                p, r, cost = p_new, r_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if rel_step < 1e-14:
                    jac = jac_at(p, r)
                    grad = jac.T @ r
                    grad_measure = float(np.max(np.abs(grad) * np.maximum(np.abs(p), 1.0)))
                    cov, cond = _covariance(jac, math.sqrt(2.0 * cost), n_points, p.size)
                    return LMResult(p, cov, math.sqrt(2.0 * cost), iteration, grad_measure, cond)
                break
            lam *= 10.0
        if not accepted:
            # damping maxed out with no acceptable step: the iterate is
            # stationary to working precision, return it (MINPACK-style)
            cov, cond = _covariance(jac, math.sqrt(2.0 * cost), n_points, p.size)
            return LMResult(p, cov, math.sqrt(2.0 * cost), iteration, grad_measure, cond)

    raise ConvergenceError(
        f"no convergence within {max_iter} iterations "
        f"(gradient measure {grad_measure:.3e}, cost {cost:.6e})",
        last=p, diagnostics={"cost": cost, "gradient": grad_measure})


@dataclass
class LinearFit:
    intercept: float
    slope: float
    intercept_stderr: float
    slope_stderr: float
    covariance: np.ndarray
    residual_norm: float


def weighted_linear_fit(x, y, sigma=None) -> LinearFit:
    """Closed-form (weighted) ordinary least squares y = intercept + slope x.

    Standard errors come from the residual variance: cov = (X^T W X)^-1 chi2_red.
    With n == 2 points the fit is exact and the errors are zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise DomainError("need at least two (x, y) points")
    if np.all(x == x[0]):
        raise DomainError("all abscissas equal: rank-deficient linear fit")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise DomainError("sigmas must be positive")
        w = 1.0 / sigma ** 2
    else:
        w = np.ones_like(x)
    design = np.column_stack([np.ones_like(x), x])
    xtw = design.T * w
    normal = xtw @ design
    try:
        cov_unscaled = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        raise DomainError("rank-deficient linear fit") from None
    beta = cov_unscaled @ (xtw @ y)
    residuals = y - design @ beta
    chi2 = float(residuals @ (w * residuals))
    dof = x.size - 2
    chi2_red = chi2 / dof if dof > 0 else 0.0
    cov = cov_unscaled * chi2_red
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return LinearFit(intercept=float(beta[0]), slope=float(beta[1]),
                     intercept_stderr=float(err[0]), slope_stderr=float(err[1]),
                     covariance=cov, residual_norm=math.sqrt(chi2))
