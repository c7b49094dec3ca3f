"""Ground-truth error functionals and log-log rate-slope estimation.

``excess_risk`` integrates |2 eta - 1| between the estimate and the true
threshold in closed form (the regression family is piecewise a power law);
``excess_risk_quadrature`` recomputes it by adaptive Simpson integration of
the regression function itself as an independent cross-check.
``fit_rate_slope`` regresses log error on log budget to estimate empirical
convergence rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import OutOfDomain, TncProblem, UcFunction

F_ERROR_ATOL = 1e-12


@dataclass
class ErrorRecord:
    """Errors of one run outcome against ground truth."""

    point_error: float
    excess_risk: float | None = None
    f_error: float | None = None
    queries_used: int | None = None
    seed: int | None = None
    budget: int | None = None


def excess_risk(problem: TncProblem, estimate: float) -> float:
    """Risk gap of the threshold classifier at ``estimate`` versus the true one.

    Equals the integral of |2 eta - 1| between the estimate and the
    threshold.  On the power-law region that is (2 mu / k) |d|^k; once the
    margin saturates the remaining stretch contributes 2 cap per unit
    length.
    """
    if not problem.interval.contains(estimate):
        raise OutOfDomain("estimate outside the problem interval")
    d = abs(float(estimate) - problem.threshold)
    k, mu, cap = problem.exponent, problem.mu, problem.cap
    if d == 0.0:
        return 0.0
    if k == 1.0:
        return 2.0 * min(mu, cap) * d
    clamp_dist = (cap / mu) ** (1.0 / (k - 1.0))
    if d <= clamp_dist:
        return (2.0 * mu / k) * d ** k
    return (2.0 * mu / k) * clamp_dist ** k + 2.0 * cap * (d - clamp_dist)


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int) -> float:
    """Adaptive Simpson quadrature with absolute tolerance."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        lm = 0.5 * (x0 + x1)
        rm = 0.5 * (x1 + x2)
        flm, frm = f(lm), f(rm)
        left = simpson(x0, x1, f0, flm, f1)
        right = simpson(x1, x2, f1, frm, f2)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(x0, x1, f0, flm, f1, left, tol / 2.0, depth - 1)
                + recurse(x1, x2, f1, frm, f2, right, tol / 2.0, depth - 1))

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def excess_risk_quadrature(problem: TncProblem, estimate: float,
                           tol: float = 1e-10, max_depth: int = 50) -> float:
    """Numeric cross-check of :func:`excess_risk` via adaptive Simpson."""
    if not problem.interval.contains(estimate):
        raise OutOfDomain("estimate outside the problem interval")
    a = min(float(estimate), problem.threshold)
    b = max(float(estimate), problem.threshold)

    def gap(x: float) -> float:
        return abs(2.0 * problem.eta_at(x) - 1.0)

    return _adaptive_simpson(gap, a, b, tol, max_depth)


def error_record(target, estimate, queries_used: int | None = None,
                 seed: int | None = None, budget: int | None = None) -> ErrorRecord:
    """Fill point error plus risk (1-D problems) or function error (test functions)."""
    if isinstance(target, TncProblem):
        est = float(estimate)
        return ErrorRecord(
            point_error=abs(est - target.threshold),
            excess_risk=excess_risk(target, est),
            queries_used=queries_used, seed=seed, budget=budget,
        )
    if isinstance(target, UcFunction):
        est = np.asarray(estimate, dtype=float)
        raw = target.value(est) - target.f_min
        f_err = 0.0 if raw <= F_ERROR_ATOL else float(raw)
        return ErrorRecord(
            point_error=float(np.linalg.norm(est - target.x_star)),
            f_error=f_err,
            queries_used=queries_used, seed=seed, budget=budget,
        )
    raise TypeError(f"cannot compute errors for {type(target).__name__}")


@dataclass
class RateFit:
    """OLS fit of log error against log budget."""

    slope: float
    intercept: float
    max_residual: float
    n_used: int
    n_excluded: int


def fit_rate_slope(points) -> RateFit:
    """Fit ln(error) = intercept + slope * ln(budget) by ordinary least squares.

    Points with non-positive error cannot enter the log fit; they are
    excluded and counted.  Requires at least two usable points and budgets
    of at least 2.
    """
    points = [(int(t), float(e)) for t, e in points]
    if any(t < 2 for t, _ in points):
        raise ValueError("all budgets must be at least 2")
    usable = [(t, e) for t, e in points if e > 0.0]
    n_excluded = len(points) - len(usable)
    if len(usable) < 2:
        raise ValueError(
            f"need at least 2 points with positive error, have {len(usable)} "
            f"({n_excluded} excluded)"
        )
    log_t = np.log([t for t, _ in usable])
    log_e = np.log([e for _, e in usable])
    slope, intercept = np.polyfit(log_t, log_e, 1)
    resid = np.max(np.abs(log_e - (intercept + slope * log_t)))
    return RateFit(slope=float(slope), intercept=float(intercept),
                   max_residual=float(resid), n_used=len(usable),
                   n_excluded=n_excluded)
