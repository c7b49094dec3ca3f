"""Randomized coordinate descent driven by gradient signs.

Each epoch picks a coordinate uniformly at random, treats the gradient sign
along that line as a noisy binary label whose crossing point is the
directional minimum, and delegates the step choice to a one-dimensional
threshold learner over the feasible segment.  With the default schedule of
ceil(d * ln(T)**2) epochs the per-epoch query budget is floor(T / E) and no
convexity or smoothness constants are needed anywhere.

A single run is strictly sequential (each epoch starts from the last
iterate); independent replications parallelize with independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .learners import (LearnerConfig, POSITIVE_RIGHT, adaptive_learner,
                       bisect_noiseless, bz_learner, passive_erm)
from .oracles import ROLE_COORDS, ROLE_SAMPLING, SignOracle, seeded_rng
from .problems import Interval, UcFunction

PAPER_DEFAULT = "paper-default"
LINE_SEARCHES = ("adaptive", "bisect", "passive", "bz")


def default_epoch_count(dim: int, budget: int) -> int:
    """Epoch schedule ceil(d * ln(T)**2) of the default descent configuration."""
    if budget < 2:
        return max(1, dim)
    return math.ceil(dim * math.log(budget) ** 2)


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def coordinate_rng(seed) -> np.random.Generator:
    """Stream that draws the per-epoch coordinate choices."""
    return seeded_rng(*_seed_tuple(seed), ROLE_COORDS)


def line_search_rng(seed, epoch: int) -> np.random.Generator:
    """Stream that places the line-search queries of one epoch."""
    return seeded_rng(*_seed_tuple(seed), ROLE_SAMPLING, epoch)


@dataclass
class OptimizerConfig:
    """Budget, epoch rule, line-search choice and seed of one descent run.

    ``epoch_rule`` is either ``"paper-default"`` (ceil(d ln^2 T) epochs) or an
    explicit positive epoch count.  ``line_search_options`` feeds extra
    LearnerConfig fields (c_delta, grid_size, bz_k, bz_mu, ...) to the
    per-epoch learner; its budget and orientation are always set by the
    optimizer.
    """

    budget: int
    epoch_rule: int | str = PAPER_DEFAULT
    line_search: str = "adaptive"
    line_search_options: dict = field(default_factory=dict)
    seed: int | tuple = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if isinstance(self.epoch_rule, str):
            if self.epoch_rule != PAPER_DEFAULT:
                raise ValueError(f"unknown epoch rule {self.epoch_rule!r}")
        elif int(self.epoch_rule) < 1:
            raise ValueError("explicit epoch count must be at least 1")
        if self.line_search not in LINE_SEARCHES:
            raise ValueError(f"line_search must be one of {LINE_SEARCHES}")

    def epoch_count(self, dim: int) -> int:
        if self.epoch_rule == PAPER_DEFAULT:
            return default_epoch_count(dim, self.budget)
        return int(self.epoch_rule)


@dataclass
class EpochStep:
    coordinate: int
    step: float
    f_value: float


@dataclass
class OptRunResult:
    x_final: np.ndarray
    f_error: float
    queries_used: int
    trace: list[EpochStep] = field(repr=False, default_factory=list)


class LineLabelOracle:
    """Label oracle over the step range of one coordinate line.

    Adapts a gradient-sign oracle at a fixed base point and coordinate to
    the 1-D learner interface: the label at step ``a`` is the noisy sign of
    the gradient coordinate at ``x + a * e_j``.  Convexity makes that sign
    switch from - to + at the directional minimum, so the induced threshold
    problem is always positive-right.  Queries share the sign oracle's
    budget and counter.
    """

    def __init__(self, sign_oracle: SignOracle, x, j: int):
        fn = sign_oracle.fn
        self.base = sign_oracle
        self._x = fn._point(x).copy()
        self._j = fn._index(j)
        alo, ahi = fn.box.segment(self._x, self._j)
        self._alo, self._ahi = alo, ahi
        self.degenerate = not ahi > alo
        self.sole_step = alo if self.degenerate else None
        self.interval = None if self.degenerate else Interval(alo, ahi)

    @property
    def queries_used(self) -> int:
        return self.base.queries_used

    @property
    def rng(self):
        return self.base.rng

    def label_sample(self, alpha: float) -> int:
        box = self.base.fn.box
        q = self._x.copy()
        # clamp against end-point roundoff; the adjustment is at ulp scale
        q[self._j] = min(max(q[self._j] + alpha, box.lo[self._j]), box.hi[self._j])
        return self.base.sign_sample(q, self._j)

    def label_sample_many(self, alphas) -> np.ndarray:
        return self.base.sign_sample_line(self._x, self._j, alphas)


def line_label_oracle(sign_oracle: SignOracle, x, j: int) -> LineLabelOracle:
    """View one coordinate line of a sign oracle as a 1-D label oracle."""
    return LineLabelOracle(sign_oracle, x, j)


def _run_line_search(name: str, oracle: LineLabelOracle, budget: int,
                     options: dict, rng: np.random.Generator) -> float:
    if name == "bisect":
        return bisect_noiseless(oracle, oracle.interval, budget)
    if name == "passive":
        return passive_erm(oracle, oracle.interval, budget, POSITIVE_RIGHT, rng)
    cfg = LearnerConfig(budget=budget, orientation=POSITIVE_RIGHT, **options)
    if name == "adaptive":
        return adaptive_learner(oracle, oracle.interval, cfg, rng).point
    if name == "bz":
        return bz_learner(oracle, oracle.interval, cfg).point
    raise ValueError(f"unknown line search {name!r}")


def rssgd(fn: UcFunction, sign_oracle: SignOracle, config: OptimizerConfig,
          x0=None) -> OptRunResult:
    """Minimize ``fn`` from gradient signs alone by randomized coordinate descent.

    Runs E epochs; each epoch draws a coordinate uniformly at random, builds
    the line label oracle at the current iterate and moves to the step
    returned by the configured 1-D learner under a budget of floor(T / E)
    queries.  Returns the final iterate with its exact function error.
    Raises if the budget cannot cover one query per epoch; leftover queries
    beyond E * N are not spent.
    """
    if sign_oracle.fn is not fn:
        raise ValueError("the sign oracle must query the function being minimized")
    epochs = config.epoch_count(fn.dim)
    budget = int(config.budget)
    if budget < epochs:
        raise ValueError(
            f"budget {budget} cannot cover {epochs} epochs; increase the budget "
            f"or set an explicit epoch count"
        )
    per_epoch = budget // epochs
    x = fn.box.center if x0 is None else np.asarray(x0, dtype=float).copy()
    x = fn._point(x).copy()
    coord_rng = coordinate_rng(config.seed)
    used_before = sign_oracle.queries_used
    trace: list[EpochStep] = []
    for epoch in range(1, epochs + 1):
        j = int(coord_rng.integers(fn.dim))
        line = line_label_oracle(sign_oracle, x, j)
        if line.degenerate:
            step = line.sole_step
        else:
            step = _run_line_search(config.line_search, line, per_epoch,
                                    config.line_search_options,
                                    line_search_rng(config.seed, epoch))
        x[j] += step
        x = fn.box.clip(x)  # absorbs end-point roundoff only
        trace.append(EpochStep(coordinate=j, step=float(step), f_value=fn.value(x)))
    return OptRunResult(
        x_final=x,
        f_error=max(0.0, fn.value(x) - fn.f_min),
        queries_used=sign_oracle.queries_used - used_before,
        trace=trace,
    )
