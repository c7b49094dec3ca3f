"""Stochastic label and gradient-sign oracles with seeded streams and budgets.

All randomness flows through counter-based Philox generators keyed by tuples
of integers, so distinct replications and distinct roles inside one run draw
from independent streams and every run is replayable bit for bit.  Oracles
count every query and enforce an optional hard budget; batch queries charge
all-or-nothing.

Each oracle instance owns a mutable generator and counter, so it belongs to
one run at a time; the problem or function it references is immutable and
freely shared.  Labels are the integers +1 and -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import OutOfDomain, TncProblem, UcFunction

LABEL_POSITIVE = 1
LABEL_NEGATIVE = -1

# Stream roles: keep these distinct so label noise, sample placement and
# coordinate choices never share a generator.
ROLE_LABELS = 0
ROLE_SAMPLING = 1
ROLE_COORDS = 2


class BudgetExhausted(RuntimeError):
    """The oracle's query budget would be exceeded."""


def seeded_rng(*entropy: int) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of integers."""
    seq = np.random.SeedSequence(tuple(int(e) for e in entropy))
    return np.random.Generator(np.random.Philox(seq))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return seeded_rng(int(rng))


class _CountingOracle:
    """Shared query counting and budget enforcement."""

    def __init__(self, rng, budget: int | None):
        self.rng = _as_rng(rng)
        if budget is not None:
            budget = int(budget)
            if budget < 0:
                raise ValueError("budget must be non-negative")
        self.budget = budget
        self.queries_used = 0

    def _charge(self, n: int) -> None:
        if self.budget is not None and self.queries_used + n > self.budget:
            raise BudgetExhausted(
                f"budget {self.budget} exhausted ({self.queries_used} used, "
                f"{n} more requested)"
            )
        self.queries_used += n

    @property
    def remaining(self) -> int | None:
        if self.budget is None:
            return None
        return self.budget - self.queries_used


class LabelOracle(_CountingOracle):
    """Draws noisy binary labels from a threshold problem's regression function."""

    def __init__(self, problem: TncProblem, rng, budget: int | None = None):
        super().__init__(rng, budget)
        self.problem = problem

    @property
    def interval(self):
        return self.problem.interval

    def label_sample(self, x: float) -> int:
        p = self.problem.eta_at(x)  # validates the domain before any charge
        self._charge(1)
        return LABEL_POSITIVE if self.rng.random() < p else LABEL_NEGATIVE

    def label_sample_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        p = self.problem.eta_at(xs)
        self._charge(xs.size)
        u = self.rng.random(xs.size)
        return np.where(u < p, LABEL_POSITIVE, LABEL_NEGATIVE)


def _phi(t: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(t / math.sqrt(2.0)))


@dataclass(frozen=True)
class GaussianNoise:
    """Additive centered gaussian noise on the gradient before taking the sign."""

    sigma: float
    name = "additive-gaussian"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def probability_positive(self, g):
        return np.vectorize(_phi)(np.asarray(g, dtype=float) / self.sigma)

    def draw_many(self, g: np.ndarray, rng) -> np.ndarray:
        s = g + rng.normal(0.0, self.sigma, size=g.shape)
        return _signs_with_fair_ties(s, rng)


@dataclass(frozen=True)
class UniformNoise:
    """Additive noise uniform on [-halfwidth, halfwidth]."""

    halfwidth: float
    name = "additive-uniform"

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise ValueError("halfwidth must be positive")

    def probability_positive(self, g):
        g = np.asarray(g, dtype=float)
        return np.clip(0.5 + g / (2.0 * self.halfwidth), 0.0, 1.0)

    def draw_many(self, g: np.ndarray, rng) -> np.ndarray:
        s = g + rng.uniform(-self.halfwidth, self.halfwidth, size=g.shape)
        return _signs_with_fair_ties(s, rng)


@dataclass(frozen=True)
class DirectBernoulli:
    """Bernoulli sign with success probability clamped around 1/2.

    P(+) = clamp(1/2 + slope * g, 1/2 - cap, 1/2 + cap).
    """

    slope: float = 1.0
    cap: float = 0.5
    name = "direct-bernoulli"

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError("slope must be positive")
        if not 0.0 < self.cap <= 0.5:
            raise ValueError("cap must lie in (0, 1/2]")

    def probability_positive(self, g):
        g = np.asarray(g, dtype=float)
        return np.clip(0.5 + self.slope * g, 0.5 - self.cap, 0.5 + self.cap)

    def draw_many(self, g: np.ndarray, rng) -> np.ndarray:
        p = self.probability_positive(g)
        u = rng.random(g.shape)
        return np.where(u < p, LABEL_POSITIVE, LABEL_NEGATIVE)


@dataclass(frozen=True)
class ExactSign:
    """True gradient sign; an exactly zero gradient resolves by a fair coin."""

    name = "exact"

    def probability_positive(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g > 0, 1.0, np.where(g < 0, 0.0, 0.5))

    def draw_many(self, g: np.ndarray, rng) -> np.ndarray:
        return _signs_with_fair_ties(g, rng)


@dataclass(frozen=True)
class QuantizedSign:
    """Sign of the gradient rounded to a fixed number of decimals.

    Rounding never flips a nonzero sign; a magnitude that rounds to zero
    falls back to the true sign (truncating it to zero would lose the sign).
    A gradient that is exactly zero resolves by a fair coin.
    """

    decimals: int
    name = "quantized"

    def __post_init__(self):
        if self.decimals < 0:
            raise ValueError("decimals must be non-negative")

    def probability_positive(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g > 0, 1.0, np.where(g < 0, 0.0, 0.5))

    def draw_many(self, g: np.ndarray, rng) -> np.ndarray:
        scale = 10.0 ** self.decimals
        q = np.sign(g) * np.round(np.abs(g) * scale) / scale
        rounded_out = q == 0.0
        q[rounded_out] = g[rounded_out]
        return _signs_with_fair_ties(q, rng)


def _signs_with_fair_ties(s: np.ndarray, rng) -> np.ndarray:
    labels = np.where(s > 0, LABEL_POSITIVE, LABEL_NEGATIVE)
    ties = s == 0.0
    n_ties = int(np.count_nonzero(ties))
    if n_ties:
        coins = rng.random(n_ties) < 0.5
        labels[ties] = np.where(coins, LABEL_POSITIVE, LABEL_NEGATIVE)
    return labels


SIGN_MODES = (GaussianNoise, UniformNoise, DirectBernoulli, ExactSign, QuantizedSign)


class SignOracle(_CountingOracle):
    """Noisy sign of one gradient coordinate of a convex test function."""

    def __init__(self, fn: UcFunction, mode, rng, budget: int | None = None):
        if not isinstance(mode, SIGN_MODES):
            raise TypeError(f"unknown sign-oracle mode {mode!r}")
        super().__init__(rng, budget)
        self.fn = fn
        self.mode = mode

    def sign_sample(self, x, j: int) -> int:
        g = self.fn.grad_coord(x, j)  # validates point and index
        self._charge(1)
        return int(self.mode.draw_many(np.asarray([g]), self.rng)[0])

    def sign_sample_line(self, x, j: int, alphas) -> np.ndarray:
        """Batch of sign queries at x + alpha * e_j for each alpha."""
        x = self.fn._point(x)
        j = self.fn._index(j)
        alphas = np.asarray(alphas, dtype=float)
        alo, ahi = self.fn.box.segment(x, j)
        pad = 1e-12 * max(1.0, abs(alo), abs(ahi))
        if np.any(alphas < alo - pad) or np.any(alphas > ahi + pad):
            raise OutOfDomain("step leaves the domain box")
        g = self.fn.grad_coord_line(x, j, np.clip(alphas, alo, ahi))
        self._charge(alphas.size)
        return self.mode.draw_many(g, self.rng)

    def probability_positive(self, x, j: int):
        """Analytic P(+) at a point; used for calibration checks, free of charge."""
        return float(np.asarray(
            self.mode.probability_positive(self.fn.grad_coord(x, j))))


class BudgetedOracle:
    """A view on an oracle that caps the queries made through (or beside) it.

    The view shares the base oracle's generator and counter: it allows
    ``budget`` more queries counted from its creation, whoever issues them.
    """

    def __init__(self, base, budget: int):
        budget = int(budget)
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.base = base
        self.budget = budget
        self._start = base.queries_used

    @property
    def queries_used(self) -> int:
        return self.base.queries_used

    @property
    def rng(self):
        return self.base.rng

    def _check(self, n: int) -> None:
        if self.base.queries_used - self._start + n > self.budget:
            raise BudgetExhausted(
                f"view budget {self.budget} exhausted "
                f"({self.base.queries_used - self._start} used, {n} more requested)"
            )

    def label_sample(self, x):
        self._check(1)
        return self.base.label_sample(x)

    def label_sample_many(self, xs):
        self._check(np.asarray(xs).size)
        return self.base.label_sample_many(xs)

    def sign_sample(self, x, j):
        self._check(1)
        return self.base.sign_sample(x, j)

    def sign_sample_line(self, x, j, alphas):
        self._check(np.asarray(alphas).size)
        return self.base.sign_sample_line(x, j, alphas)

    def __getattr__(self, name):
        return getattr(self.base, name)


def with_budget(oracle, budget: int) -> BudgetedOracle:
    """Wrap an oracle so that at most ``budget`` further queries succeed."""
    return BudgetedOracle(oracle, budget)
