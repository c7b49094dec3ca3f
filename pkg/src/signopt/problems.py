"""Synthetic threshold problems and convex test functions with analytic ground truth.

One-dimensional threshold problems expose a regression function
``eta(x) = P(label = + | x)`` that crosses 1/2 at a unique threshold and
grows away from it like ``mu * |x - t|**(k - 1)`` until it saturates at
``1/2 +- cap``.  The d-dimensional test functions (separable powers,
quadratics, ridge least squares) provide exact values, per-coordinate
gradients, directional minimizers and certified convexity constants, so
learner and optimizer errors are measurable without estimation.

Exponents are restricted to moderate ranges (``k in [1, 8]`` for threshold
problems, ``k in [2, 8]`` for test functions): the powers ``|u|**(k - 1)``
underflow near the threshold for much larger exponents.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

POSITIVE_RIGHT = "positive-right"
POSITIVE_LEFT = "positive-left"
ORIENTATIONS = (POSITIVE_RIGHT, POSITIVE_LEFT)

TNC_EXPONENT_RANGE = (1.0, 8.0)
UC_EXPONENT_RANGE = (2.0, 8.0)


class OutOfDomain(ValueError):
    """A query point lies outside the declared domain."""


class DimensionMismatch(ValueError):
    """A point or coordinate index does not match the declared dimension."""


def _tol(*values: float) -> float:
    return 1e-12 * max(1.0, *(abs(v) for v in values))


def orientation_sign(orientation: str) -> float:
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    return 1.0 if orientation == POSITIVE_RIGHT else -1.0


@dataclass(frozen=True)
class Interval:
    """A nondegenerate closed interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.hi > self.lo:
            raise ValueError(f"interval needs hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> bool:
        t = _tol(self.lo, self.hi)
        a = np.asarray(x, dtype=float)
        return bool(np.all((a >= self.lo - t) & (a <= self.hi + t)))

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class TncProblem:
    """A 1-D threshold-learning instance with power-law label noise.

    The regression function is

        eta(x) = 1/2 + s(x) * min(mu * |x - threshold|**(exponent - 1), cap)

    where ``s`` is +1 on the orientation's positive side of the threshold,
    -1 on the other side and 0 at the threshold itself.  The margin
    ``|eta - 1/2|`` therefore matches the power law exactly (both growth
    bounds hold with the same coefficient) until it saturates at ``cap``.
    """

    interval: Interval
    threshold: float
    exponent: float
    mu: float
    cap: float
    orientation: str = POSITIVE_RIGHT

    def __post_init__(self):
        if not self.interval.contains(self.threshold):
            raise ValueError(
                f"threshold {self.threshold} outside interval "
                f"[{self.interval.lo}, {self.interval.hi}]"
            )
        lo_k, hi_k = TNC_EXPONENT_RANGE
        if not lo_k <= self.exponent <= hi_k:
            raise ValueError(f"noise exponent must lie in [{lo_k}, {hi_k}], got {self.exponent}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 < self.cap <= 0.5:
            raise ValueError(f"cap must lie in (0, 1/2], got {self.cap}")
        orientation_sign(self.orientation)  # validates

    def eta_at(self, x):
        """P(label = + | x); accepts scalars or arrays."""
        if np.ndim(x) == 0:
            # scalar fast path: this sits inside every sequential learner loop
            x = float(x)
            lo, hi = self.interval.lo, self.interval.hi
            t = _tol(lo, hi)
            if not lo - t <= x <= hi + t:
                raise OutOfDomain(f"query outside [{lo}, {hi}]")
            d = min(max(x, lo), hi) - self.threshold
            if d == 0.0:
                return 0.5
            margin = min(self.mu * abs(d) ** (self.exponent - 1.0), self.cap)
            sign = 1.0 if d > 0 else -1.0
            return 0.5 + orientation_sign(self.orientation) * sign * margin
        arr = np.asarray(x, dtype=float)
        if not self.interval.contains(arr):
            raise OutOfDomain(
                f"query outside [{self.interval.lo}, {self.interval.hi}]"
            )
        arr = self.interval.clip(arr)
        d = arr - self.threshold
        margin = np.minimum(self.mu * np.abs(d) ** (self.exponent - 1.0), self.cap)
        return 0.5 + orientation_sign(self.orientation) * np.sign(d) * margin


def make_tnc_problem(interval, threshold, exponent, mu, cap,
                     orientation=POSITIVE_RIGHT) -> TncProblem:
    """Validated constructor; ``interval`` may be an Interval or a (lo, hi) pair."""
    if not isinstance(interval, Interval):
        lo, hi = interval
        interval = Interval(float(lo), float(hi))
    return TncProblem(interval, float(threshold), float(exponent), float(mu),
                      float(cap), orientation)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box domain, stored as per-coordinate bound arrays.

    Zero-width coordinates are permitted (the optimizer skips them) but
    every other consumer assumes hi > lo.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch(f"box bounds must be 1-d arrays of equal length, "
                                    f"got shapes {lo.shape} and {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(hi < lo):
            raise ValueError("box needs hi >= lo in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> bool:
        a = np.asarray(x, dtype=float)
        t = 1e-12 * np.maximum(1.0, np.maximum(np.abs(self.lo), np.abs(self.hi)))
        return bool(np.all((a >= self.lo - t) & (a <= self.hi + t)))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def segment(self, x, j: int) -> tuple[float, float]:
        """Feasible step range along coordinate j from x: {a : x + a*e_j in box}."""
        return float(self.lo[j] - x[j]), float(self.hi[j] - x[j])


def box_from_bounds(lo, hi, dim: int | None = None) -> Box:
    """Build a Box, broadcasting scalar bounds to ``dim`` coordinates."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if dim is not None:
        if lo.size == 1:
            lo = np.full(dim, lo[0])
        if hi.size == 1:
            hi = np.full(dim, hi[0])
    return Box(lo, hi)


class UcFunction(abc.ABC):
    """A uniformly convex test function over a box domain.

    ``uc_modulus`` (with ``uc_exponent`` k) certifies the growth bound

        f(y) >= f(x) + <grad f(x), y - x> + (uc_modulus / 2) * ||y - x||^k

    on the box, and ``lkss_bound`` certifies that the magnitude of each
    gradient coordinate is at most ``lkss_bound * |a*|**(k - 1)`` where a*
    is the step to the minimizer along that coordinate line.  Coordinate
    indices are 0-based.
    """

    def __init__(self, box: Box, uc_exponent: float, uc_modulus: float,
                 lkss_bound: float, lipschitz: float | None = None,
                 smoothness: float | None = None):
        lo_k, hi_k = UC_EXPONENT_RANGE
        if not lo_k <= uc_exponent <= hi_k:
            raise ValueError(f"convexity exponent must lie in [{lo_k}, {hi_k}], "
                             f"got {uc_exponent}")
        if uc_modulus <= 0:
            raise ValueError("uc_modulus must be positive")
        if not lkss_bound > uc_modulus / 2:
            raise ValueError("lkss_bound must exceed uc_modulus / 2")
        self.box = box
        self.uc_exponent = float(uc_exponent)
        self.uc_modulus = float(uc_modulus)
        self.lkss_bound = float(lkss_bound)
        self.lipschitz = lipschitz
        self.smoothness = smoothness

    @property
    def dim(self) -> int:
        return self.box.dim

    def _point(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        if a.shape != (self.dim,):
            raise DimensionMismatch(f"expected point of shape ({self.dim},), got {a.shape}")
        if not self.box.contains(a):
            raise OutOfDomain("point outside the domain box")
        return a

    def _index(self, j: int) -> int:
        j = int(j)
        if not 0 <= j < self.dim:
            raise IndexError(f"coordinate index {j} out of range for dim {self.dim}")
        return j

    @abc.abstractmethod
    def value(self, x) -> float:
        """Exact function value."""

    @abc.abstractmethod
    def grad(self, x) -> np.ndarray:
        """Exact full gradient."""

    @abc.abstractmethod
    def grad_coord(self, x, j: int) -> float:
        """Exact j-th partial derivative."""

    @abc.abstractmethod
    def grad_coord_line(self, x, j: int, alphas) -> np.ndarray:
        """j-th partial derivative at x + alpha * e_j for a vector of alphas."""

    @abc.abstractmethod
    def _directional_min_free(self, x, j: int) -> float:
        """Unconstrained minimizer step along coordinate j."""

    def directional_min(self, x, j: int, clip: bool = True) -> float:
        """Step a* minimizing f(x + a*e_j), clipped to the box by default."""
        x = self._point(x)
        j = self._index(j)
        a = self._directional_min_free(x, j)
        if clip:
            alo, ahi = self.box.segment(x, j)
            a = min(max(a, alo), ahi)
        return float(a)


class SeparablePower(UcFunction):
    """f(x) = sum_j coeffs[j] * |x_j - x_star[j]|**k with k in [2, 8]."""

    def __init__(self, coeffs, x_star, box: Box, exponent: float = 2.0):
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
        if coeffs.shape != x_star.shape or coeffs.shape[0] != box.dim:
            raise DimensionMismatch("coeffs, x_star and box must share one dimension")
        if np.any(coeffs <= 0):
            raise ValueError("all coefficients must be positive")
        if not box.contains(x_star):
            raise ValueError("x_star must lie inside the domain box")
        k = float(exponent)
        d = box.dim
        # Conservative certified constants: per-coordinate growth of |u|^k
        # contributes at least 2^(1-k) |du|^k, and ||.||_k^k >= d^(1-k/2) ||.||_2^k.
        uc_modulus = float(np.min(coeffs)) * 2.0 ** (2.0 - k) * d ** (1.0 - k / 2.0)
        lkss_bound = k * float(np.max(coeffs))
        span = np.maximum(np.abs(box.lo - x_star), np.abs(box.hi - x_star))
        lipschitz = float(np.linalg.norm(coeffs * k * span ** (k - 1.0)))
        smoothness = float(k * (k - 1.0) * np.max(coeffs) * np.max(span) ** (k - 2.0)) \
            if k > 2.0 else float(2.0 * np.max(coeffs))
        super().__init__(box, k, uc_modulus, lkss_bound, lipschitz, smoothness)
        self.coeffs = coeffs
        self.x_star = x_star
        self.f_min = 0.0

    def value(self, x) -> float:
        u = self._point(x) - self.x_star
        return float(np.sum(self.coeffs * np.abs(u) ** self.uc_exponent))

    def grad(self, x) -> np.ndarray:
        u = self._point(x) - self.x_star
        k = self.uc_exponent
        return self.coeffs * k * np.abs(u) ** (k - 1.0) * np.sign(u)

    def grad_coord(self, x, j: int) -> float:
        u = float(self._point(x)[self._index(j)] - self.x_star[j])
        k = self.uc_exponent
        return float(self.coeffs[j] * k * abs(u) ** (k - 1.0) * math.copysign(1.0, u)) \
            if u != 0.0 else 0.0

    def grad_coord_line(self, x, j: int, alphas) -> np.ndarray:
        x = self._point(x)
        j = self._index(j)
        v = (x[j] - self.x_star[j]) + np.asarray(alphas, dtype=float)
        k = self.uc_exponent
        return self.coeffs[j] * k * np.abs(v) ** (k - 1.0) * np.sign(v)

    def _directional_min_free(self, x, j: int) -> float:
        return float(self.x_star[j] - x[j])


class Quadratic(UcFunction):
    """f(x) = (x - x_star)' A (x - x_star) / 2 for symmetric positive definite A."""

    def __init__(self, matrix, x_star, box: Box):
        A = np.asarray(matrix, dtype=float)
        x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
        if A.shape != (box.dim, box.dim) or x_star.shape[0] != box.dim:
            raise DimensionMismatch("matrix, x_star and box must share one dimension")
        if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
            raise ValueError("matrix must be symmetric")
        eigs = np.linalg.eigvalsh(A)
        if eigs[0] <= 0:
            raise ValueError(f"matrix must be positive definite, min eigenvalue {eigs[0]}")
        if not box.contains(x_star):
            raise ValueError("x_star must lie inside the domain box")
        span = np.maximum(np.abs(box.lo - x_star), np.abs(box.hi - x_star))
        super().__init__(box, 2.0, float(eigs[0]), float(np.max(np.diag(A))),
                         lipschitz=float(eigs[-1] * np.linalg.norm(span)),
                         smoothness=float(eigs[-1]))
        self.matrix = A
        self.x_star = x_star
        self.f_min = 0.0

    def value(self, x) -> float:
        u = self._point(x) - self.x_star
        return float(0.5 * u @ self.matrix @ u)

    def grad(self, x) -> np.ndarray:
        return self.matrix @ (self._point(x) - self.x_star)

    def grad_coord(self, x, j: int) -> float:
        u = self._point(x) - self.x_star
        return float(self.matrix[self._index(j)] @ u)

    def grad_coord_line(self, x, j: int, alphas) -> np.ndarray:
        x = self._point(x)
        j = self._index(j)
        g0 = float(self.matrix[j] @ (x - self.x_star))
        return g0 + self.matrix[j, j] * np.asarray(alphas, dtype=float)

    def _directional_min_free(self, x, j: int) -> float:
        return -float(self.matrix[j] @ (x - self.x_star)) / float(self.matrix[j, j])


class Ridge(UcFunction):
    """f(x) = ||A x - b||^2 / 2 + ||x||^2 / 2 for an n x d design matrix A.

    The global minimizer solves (A'A + I) x = A'b; it is computed once at
    construction by a direct solve and checked to residual 1e-10.  The
    j-th gradient coordinate is A_j'(Ax - b) + x_j; use :class:`RidgeState`
    to evaluate it in O(n) across single-coordinate updates.
    """

    def __init__(self, design, targets, box: Box | None = None):
        A = np.asarray(design, dtype=float)
        b = np.atleast_1d(np.asarray(targets, dtype=float))
        if A.ndim != 2 or b.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"need design (n, d) and targets (n,), "
                                    f"got {A.shape} and {b.shape}")
        d = A.shape[1]
        Q = A.T @ A + np.eye(d)
        rhs = A.T @ b
        x_star = np.linalg.solve(Q, rhs)
        resid = np.linalg.norm(Q @ x_star - rhs)
        if resid > 1e-10 * max(1.0, np.linalg.norm(rhs)):
            raise ValueError(f"minimizer solve residual {resid:.3e} exceeds tolerance")
        if box is None:
            half = np.maximum(1.0, 2.0 * np.abs(x_star))
            box = Box(x_star - half, x_star + half)
        elif box.dim != d:
            raise DimensionMismatch("box dimension does not match the design matrix")
        elif not box.contains(x_star):
            raise ValueError("the global minimizer must lie inside the domain box")
        eigs = np.linalg.eigvalsh(Q)
        col_sq = np.sum(A * A, axis=0)
        span = np.maximum(np.abs(box.lo - x_star), np.abs(box.hi - x_star))
        super().__init__(box, 2.0, float(eigs[0]), float(np.max(col_sq) + 1.0),
                         lipschitz=float(eigs[-1] * np.linalg.norm(span)),
                         smoothness=float(eigs[-1]))
        self.design = A
        self.targets = b
        self.x_star = x_star
        self._hess_diag = col_sq + 1.0
        self.f_min = self._value_unchecked(x_star)

    def _value_unchecked(self, x) -> float:
        r = self.design @ x - self.targets
        return float(0.5 * (r @ r) + 0.5 * (x @ x))

    def value(self, x) -> float:
        return self._value_unchecked(self._point(x))

    def grad(self, x) -> np.ndarray:
        x = self._point(x)
        return self.design.T @ (self.design @ x - self.targets) + x

    def grad_coord(self, x, j: int) -> float:
        x = self._point(x)
        j = self._index(j)
        r = self.design @ x - self.targets
        return float(self.design[:, j] @ r + x[j])

    def grad_coord_line(self, x, j: int, alphas) -> np.ndarray:
        x = self._point(x)
        j = self._index(j)
        r = self.design @ x - self.targets
        g0 = float(self.design[:, j] @ r + x[j])
        return g0 + self._hess_diag[j] * np.asarray(alphas, dtype=float)

    def _directional_min_free(self, x, j: int) -> float:
        r = self.design @ x - self.targets
        g0 = float(self.design[:, j] @ r + x[j])
        return -g0 / float(self._hess_diag[j])


class RidgeState:
    """Residual cache for cheap coordinate gradients of a Ridge function.

    Owns a mutable iterate; after each single-coordinate update the cached
    residual r = Ax - b changes by delta * A_j, an O(n) refresh, so
    ``grad_coord`` costs O(n) instead of O(n d).  Single-owner: never share
    one state across concurrent runs.
    """

    def __init__(self, fn: Ridge, x0):
        self.fn = fn
        self.x = fn._point(x0).copy()
        self.residual = fn.design @ self.x - fn.targets

    def grad_coord(self, j: int) -> float:
        j = self.fn._index(j)
        return float(self.fn.design[:, j] @ self.residual + self.x[j])

    def update_coord(self, j: int, new_value: float) -> None:
        j = self.fn._index(j)
        delta = float(new_value) - self.x[j]
        self.residual += delta * self.fn.design[:, j]
        self.x[j] = float(new_value)

    def value(self) -> float:
        return float(0.5 * (self.residual @ self.residual) + 0.5 * (self.x @ self.x))


def load_ridge_text(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ridge design from plain text.

    Format: first line ``n d``, then n rows of d whitespace-separated
    decimals (the design matrix), then one row of n decimals (the targets).
    """
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: expected a header line 'n d'")
    n, d = int(tokens[0]), int(tokens[1])
    need = 2 + n * d + n
    if len(tokens) != need:
        raise ValueError(f"{path}: expected {need} numbers for n={n}, d={d}, "
                         f"found {len(tokens)}")
    values = np.asarray([float(t) for t in tokens[2:]], dtype=float)
    A = values[: n * d].reshape(n, d)
    b = values[n * d:]
    return A, b
