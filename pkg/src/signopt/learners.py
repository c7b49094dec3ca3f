"""One-dimensional threshold learners.

``passive_erm`` fits the best threshold cut to uniformly sampled labels;
``bz_learner`` runs grid-based probabilistic bisection and needs the noise
parameters up front; ``adaptive_learner`` wraps the passive subroutine in
epochs with halving search radii and needs no noise parameters at all;
``bisect_noiseless`` is plain binary search for deterministic signs.

Every learner takes an oracle (anything exposing ``label_sample`` /
``label_sample_many``), an explicit search interval and, where it places
its own queries, an explicit numpy Generator, so runs are replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import (Interval, POSITIVE_LEFT, POSITIVE_RIGHT,
                       orientation_sign)

ORIENTATION_AUTO = "auto"

_SQRT2 = math.sqrt(2.0)


@dataclass
class LearnerConfig:
    """Parameters of a 1-D learner run.

    ``c_delta`` is the epoch-count constant of the adaptive learner and must
    exceed sqrt(2).  ``confidence`` is carried for bookkeeping; the failure
    probability only enters through ``c_delta``.  ``grid_size``, ``bz_k`` and
    ``bz_mu`` configure probabilistic bisection only.
    """

    budget: int
    confidence: float = 0.05
    c_delta: float = 2.0
    orientation: str = POSITIVE_RIGHT
    grid_size: int | None = None
    bz_k: float | None = None
    bz_mu: float | None = None

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if not self.c_delta > _SQRT2:
            raise ValueError(f"c_delta must exceed sqrt(2), got {self.c_delta}")
        if self.orientation not in (POSITIVE_RIGHT, POSITIVE_LEFT, ORIENTATION_AUTO):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.grid_size is not None and self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


@dataclass
class EpochRecord:
    center: float
    radius: float
    estimate: float


@dataclass
class ThresholdEstimate:
    point: float
    queries_used: int
    epochs: int
    trace: list[EpochRecord] | None = field(default=None, repr=False)


def erm_cut(positions, labels, search: Interval,
            orientation: str = POSITIVE_RIGHT) -> float:
    """Empirical-risk-minimizing threshold cut for labelled sample positions.

    Candidate cuts are the search endpoints plus the midpoints of
    consecutive sorted positions.  For positive-right orientation the
    empirical error of a cut c is #{+ samples left of c} + #{- samples
    right of c}; ties resolve to the leftmost minimizing candidate.
    """
    positions = np.asarray(positions, dtype=float)
    labels = np.asarray(labels)
    if positions.size == 0:
        return search.midpoint
    order = np.argsort(positions, kind="stable")
    p = positions[order]
    y = labels[order]
    pos = (y > 0) if orientation_sign(orientation) > 0 else (y < 0)
    left_pos = np.concatenate(([0], np.cumsum(pos)))
    left_neg = np.concatenate(([0], np.cumsum(~pos)))
    boundaries = np.nonzero(p[1:] > p[:-1])[0] + 1  # splits between distinct values
    cands = np.concatenate(([search.lo],
                            0.5 * (p[boundaries - 1] + p[boundaries]),
                            [search.hi]))
    # a cut c classifies x >= c as the positive side
    split = np.searchsorted(p, cands, side="left")
    err = left_pos[split] + (left_neg[-1] - left_neg[split])
    return float(cands[int(np.argmin(err))])


def passive_erm(oracle, search: Interval, n_samples: int, orientation: str,
                rng: np.random.Generator) -> float:
    """Query labels at n uniform positions on the search interval, return the ERM cut."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if search.width <= 0:
        raise ValueError("search interval has zero length")
    xs = rng.uniform(search.lo, search.hi, size=n_samples)
    labels = oracle.label_sample_many(xs)
    return erm_cut(xs, labels, search, orientation)


def adaptive_epoch_schedule(budget: int, c_delta: float) -> tuple[int, int]:
    """Epoch count and per-epoch budget of the adaptive learner.

    E = floor(log2 sqrt(2 T / (c^2 log2 T))), clamped to at least one epoch;
    N = floor(T / E).  Budgets below 4 degrade to a single passive epoch.
    """
    budget = int(budget)
    if budget < 4:
        return 1, budget
    inner = 2.0 * budget / (c_delta ** 2 * math.log2(budget))
    epochs = max(1, math.floor(math.log2(math.sqrt(inner)))) if inner > 1.0 else 1
    return epochs, budget // epochs


def _auto_orientation(oracle, search: Interval, n_probe: int,
                      rng: np.random.Generator) -> str:
    """Probe labels on each half of the interval; the plus-heavy half wins."""
    xs = rng.uniform(search.lo, search.hi, size=n_probe)
    labels = oracle.label_sample_many(xs)
    right = xs >= search.midpoint
    frac_right = labels[right].mean() if right.any() else 0.0
    frac_left = labels[~right].mean() if (~right).any() else 0.0
    return POSITIVE_RIGHT if frac_right >= frac_left else POSITIVE_LEFT


def adaptive_learner(oracle, search: Interval, config: LearnerConfig,
                     rng: np.random.Generator) -> ThresholdEstimate:
    """Epoch-based threshold learner that adapts to unknown noise parameters.

    Runs the passive subroutine for E epochs with a per-epoch budget of
    N = floor(T / E) queries; epoch e searches the ball of radius R_e around
    the previous estimate intersected with the original interval, and the
    radius halves between epochs starting from the interval width.  Leftover
    queries T - E*N are not spent.
    """
    budget = int(config.budget)
    if budget < 1:
        raise ValueError("adaptive learner needs a positive budget")
    epochs, per_epoch = adaptive_epoch_schedule(budget, config.c_delta)

    orientation = config.orientation
    probe_used = 0
    if orientation == ORIENTATION_AUTO:
        n_probe = min(20, per_epoch, budget - epochs)
        if n_probe >= 1:
            orientation = _auto_orientation(oracle, search, n_probe, rng)
            probe_used = n_probe
            per_epoch = (budget - probe_used) // epochs
        else:
            orientation = POSITIVE_RIGHT  # no budget to spare for probing

    x = search.midpoint
    radius = search.width
    trace: list[EpochRecord] = []
    for _ in range(epochs):
        lo = max(search.lo, x - radius)
        hi = min(search.hi, x + radius)
        x = passive_erm(oracle, Interval(lo, hi), per_epoch, orientation, rng)
        trace.append(EpochRecord(center=0.5 * (lo + hi), radius=radius, estimate=x))
        radius *= 0.5
    return ThresholdEstimate(point=x, queries_used=epochs * per_epoch + probe_used,
                             epochs=epochs, trace=trace)


def bz_learner(oracle, search: Interval, config: LearnerConfig) -> ThresholdEstimate:
    """Probabilistic bisection on a uniform grid with known noise parameters.

    Maintains a probability vector over the grid cells, queries the interior
    grid boundary nearest the posterior median, and reweights the side
    consistent with the observed label by (1 + g) against (1 - g), where
    g = min(1/2, bz_mu * cell_width**(bz_k - 1)).  After the budget is spent
    it returns the midpoint of the cell containing the posterior median.
    """
    if config.grid_size is None or config.bz_k is None or config.bz_mu is None:
        raise ValueError("bz_learner needs grid_size, bz_k and bz_mu")
    cells = int(config.grid_size)
    if cells < 2:
        raise ValueError("grid_size must be at least 2")
    budget = int(config.budget)
    if budget == 0:
        return ThresholdEstimate(point=search.midpoint, queries_used=0, epochs=0)

    probe_used = 0
    orientation = config.orientation
    if orientation == ORIENTATION_AUTO:
        # Deterministic quarter-point probes; no sampling stream needed.
        n_probe = min(20, budget)
        x_left = search.lo + 0.25 * search.width
        x_right = search.lo + 0.75 * search.width
        right_labels, left_labels = [], []
        for i in range(n_probe):
            if i % 2 == 0:
                right_labels.append(oracle.label_sample(x_right))
            else:
                left_labels.append(oracle.label_sample(x_left))
        mean_right = float(np.mean(right_labels)) if right_labels else 0.0
        mean_left = float(np.mean(left_labels)) if left_labels else 0.0
        orientation = POSITIVE_RIGHT if mean_right >= mean_left else POSITIVE_LEFT
        probe_used = n_probe
    osign = orientation_sign(orientation)

    delta = search.width / cells
    gamma = min(0.5, config.bz_mu * delta ** (config.bz_k - 1.0))
    # Work with unnormalized weights and rescale one side only: the posterior
    # is proportional either way and the loop runs once per label query.
    ratio = (1.0 + gamma) / (1.0 - gamma)
    weights = np.full(cells, 1.0 / cells)

    for _ in range(budget - probe_used):
        cum = np.cumsum(weights)
        half = 0.5 * cum[-1]
        idx = int(np.searchsorted(cum, half))
        inside = (half - (cum[idx] - weights[idx])) / weights[idx] if weights[idx] > 0 else 0.5
        boundary = int(round(idx + inside))
        boundary = min(max(boundary, 1), cells - 1)
        label = oracle.label_sample(search.lo + boundary * delta)
        if osign * label > 0:
            # A plus label favours the threshold lying left of the boundary.
            weights[:boundary] *= ratio
        else:
            weights[boundary:] *= ratio
        if cum[-1] > 1e250:
            weights /= cum[-1]

    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
    point = search.lo + (idx + 0.5) * delta
    return ThresholdEstimate(point=float(point), queries_used=budget, epochs=0)


def bisect_noiseless(oracle, search: Interval, budget: int,
                     orientation: str = POSITIVE_RIGHT) -> float:
    """Classic bisection against deterministic single-crossing labels.

    Uses exactly ``budget`` queries and returns the final midpoint, whose
    distance to the crossing is at most width * 2**-(budget + 1).
    """
    osign = orientation_sign(orientation)
    lo, hi = search.lo, search.hi
    for _ in range(int(budget)):
        mid = 0.5 * (lo + hi)
        if osign * oracle.label_sample(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def auto_grid_size(budget: int, bz_k: float, dither: int = 0) -> int:
    """Grid resolution matching the point-error scale of bisection at this budget.

    M ~ (T / ln T)^(1 / (2k - 2)) balances the cell width against the
    posterior concentration rate; the bounded-noise case k = 1 gets a linear
    grid.  ``dither`` (any integer, e.g. a replication index) spreads the
    resolution over [M, 2M) so that aggregate error statistics are not an
    artifact of where one fixed grid's midpoints happen to fall.
    """
    budget = int(budget)
    if budget < 2:
        return 2
    log_t = max(1.0, math.log(budget))
    if bz_k <= 1.0 + 1e-9:
        base = max(2, math.ceil(budget / log_t))
    else:
        base = max(2, math.ceil((budget / log_t) ** (1.0 / (2.0 * bz_k - 2.0))))
    return base + (int(dither) * 2654435761) % base
