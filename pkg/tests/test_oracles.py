import numpy as np
import pytest
from scipy.stats import norm

from signopt import (BudgetExhausted, DirectBernoulli, ExactSign,
                     GaussianNoise, LabelOracle, OutOfDomain, Quadratic,
                     QuantizedSign, SeparablePower, SignOracle, UniformNoise,
                     box_from_bounds, make_tnc_problem, seeded_rng,
                     with_budget)

from _checks import binomial_band

N_DRAWS = 100_000


def _problem(**kw):
    args = dict(interval=(0.0, 1.0), threshold=0.5, exponent=2.0, mu=1.0, cap=0.4)
    args.update(kw)
    return make_tnc_problem(args["interval"], args["threshold"], args["exponent"],
                            args["mu"], args["cap"])


def _quad_fn():
    box = box_from_bounds(-2.0, 2.0, dim=2)
    return Quadratic(np.eye(2), np.zeros(2), box)


# ---------------------------------------------------------------------------
# label oracles

def test_deterministic_labels_on_the_positive_side():
    oracle = LabelOracle(_problem(mu=1e12, cap=0.5), seeded_rng(0, 0, 0))
    assert all(oracle.label_sample(0.7) == 1 for _ in range(200))
    assert all(oracle.label_sample(0.3) == -1 for _ in range(200))


def test_label_frequency_at_threshold():
    oracle = LabelOracle(_problem(), seeded_rng(1, 0, 0))
    labels = oracle.label_sample_many(np.full(N_DRAWS, 0.5))
    frac = np.mean(labels == 1)
    assert abs(frac - 0.5) <= binomial_band(N_DRAWS)


def test_label_frequency_matches_eta():
    problem = _problem()
    oracle = LabelOracle(problem, seeded_rng(2, 0, 0))
    labels = oracle.label_sample_many(np.full(N_DRAWS, 0.6))
    frac = np.mean(labels == 1)
    assert problem.eta_at(0.6) == pytest.approx(0.6)
    assert abs(frac - 0.6) <= binomial_band(N_DRAWS)


def test_label_oracle_rejects_outside_queries():
    oracle = LabelOracle(_problem(), seeded_rng(3, 0, 0))
    with pytest.raises(OutOfDomain):
        oracle.label_sample(1.5)
    assert oracle.queries_used == 0  # failed queries are not charged


# ---------------------------------------------------------------------------
# sign oracles

def test_exact_sign_of_positive_gradient():
    oracle = SignOracle(_quad_fn(), ExactSign(), seeded_rng(4, 0, 0))
    assert oracle.sign_sample(np.array([1.0, 0.0]), 0) == 1
    assert oracle.sign_sample(np.array([-1.0, 0.0]), 0) == -1


def test_gaussian_sign_is_fair_at_a_zero_gradient():
    oracle = SignOracle(_quad_fn(), GaussianNoise(1.0), seeded_rng(5, 0, 0))
    labels = oracle.sign_sample_line(np.zeros(2), 0, np.zeros(N_DRAWS))
    assert abs(np.mean(labels == 1) - 0.5) <= binomial_band(N_DRAWS)


def test_gaussian_sign_frequency_matches_normal_cdf():
    # At gradient 0.5 with sigma 1 the analytic P(+) is Phi(0.5); scipy is the
    # independent reference for the implementation's erf-based value.
    fn = _quad_fn()
    oracle = SignOracle(fn, GaussianNoise(1.0), seeded_rng(6, 0, 0))
    x = np.array([0.5, 0.0])
    expected = norm.cdf(0.5)
    assert oracle.probability_positive(x, 0) == pytest.approx(expected, abs=1e-12)
    labels = oracle.sign_sample_line(x, 0, np.zeros(N_DRAWS))
    assert abs(np.mean(labels == 1) - expected) <= binomial_band(N_DRAWS)


@pytest.mark.parametrize("mode,analytic", [
    (GaussianNoise(0.7), lambda g: norm.cdf(g / 0.7)),
    (UniformNoise(2.0), lambda g: np.clip(0.5 + g / 4.0, 0.0, 1.0)),
    (DirectBernoulli(slope=0.8, cap=0.3), lambda g: np.clip(0.5 + 0.8 * g, 0.2, 0.8)),
    (ExactSign(), lambda g: 1.0 if g > 0 else (0.0 if g < 0 else 0.5)),
    (QuantizedSign(3), lambda g: 1.0 if g > 0 else (0.0 if g < 0 else 0.5)),
])
def test_calibration_of_every_mode(mode, analytic):
    fn = _quad_fn()
    oracle = SignOracle(fn, mode, seeded_rng(7, 0, 0))
    for point in ([0.3, 0.0], [0.0, 0.0], [-0.9, 0.0]):
        x = np.asarray(point)
        g = fn.grad_coord(x, 0)
        labels = oracle.sign_sample_line(x, 0, np.zeros(N_DRAWS))
        frac = np.mean(labels == 1)
        assert abs(frac - float(analytic(g))) <= binomial_band(N_DRAWS), \
            f"{mode} at g={g}"


def test_quantized_mode_never_flips_a_nonzero_sign():
    box = box_from_bounds(-1.0, 1.0, dim=3)
    fn = SeparablePower([1.0, 0.5, 2.0], [0.0, 0.1, -0.2], box, exponent=2.0)
    oracle = SignOracle(fn, QuantizedSign(3), seeded_rng(8, 0, 0))
    rng = np.random.default_rng(9)
    total = 0
    for _ in range(200):
        x = rng.uniform(fn.box.lo, fn.box.hi)
        j = int(rng.integers(3))
        alo, ahi = fn.box.segment(x, j)
        alphas = rng.uniform(alo, ahi, size=500)
        true_signs = np.sign(fn.grad_coord_line(x, j, alphas))
        labels = oracle.sign_sample_line(x, j, alphas)
        nonzero = true_signs != 0
        assert np.array_equal(labels[nonzero], true_signs[nonzero])
        total += int(nonzero.sum())
    assert total >= 99_000


def test_quantized_rounding_to_zero_keeps_the_true_sign():
    # gradient 2e-4 rounds to zero at 3 decimals; the sign must survive
    box = box_from_bounds(-1.0, 1.0, dim=1)
    fn = SeparablePower([1.0], [0.0], box, exponent=2.0)
    oracle = SignOracle(fn, QuantizedSign(3), seeded_rng(10, 0, 0))
    for _ in range(50):
        assert oracle.sign_sample(np.array([1e-4]), 0) == 1
        assert oracle.sign_sample(np.array([-1e-4]), 0) == -1


def test_tnc_transfer_along_a_coordinate_line():
    # With gaussian sign noise on a k-uniformly-convex separable function,
    # the induced regression function along a line satisfies the two-sided
    # power-law margin condition near the directional minimum.  Verified
    # against the scipy normal CDF and the known gradient.
    sigma = 1.0
    for k in (2.0, 3.0):
        box = box_from_bounds(-1.0, 1.0, dim=2)
        fn = SeparablePower([1.0, 1.5], [0.1, -0.2], box, exponent=k)
        x = np.array([0.3, 0.2])
        j = 1
        a_star = fn.directional_min(x, j)
        offsets = np.linspace(-0.2, 0.2, 401)
        offsets = offsets[np.abs(offsets) > 1e-3]
        g = fn.grad_coord_line(x, j, a_star + offsets)
        eta = norm.cdf(g / sigma)
        ratio = np.abs(eta - 0.5) / np.abs(offsets) ** (k - 1.0)
        assert ratio.min() > 0.0
        assert ratio.max() / ratio.min() <= 1.5  # tight two-sided growth


# ---------------------------------------------------------------------------
# budgets

def test_budget_zero_raises_immediately():
    oracle = LabelOracle(_problem(), seeded_rng(11, 0, 0), budget=0)
    with pytest.raises(BudgetExhausted):
        oracle.label_sample(0.5)


def test_budget_boundary_and_counter():
    oracle = LabelOracle(_problem(), seeded_rng(12, 0, 0), budget=5)
    for _ in range(3):
        oracle.label_sample(0.5)
    assert oracle.queries_used == 3
    oracle.label_sample(0.5)
    oracle.label_sample(0.5)
    with pytest.raises(BudgetExhausted):
        oracle.label_sample(0.5)
    assert oracle.queries_used == 5


def test_batch_overflow_charges_nothing():
    oracle = LabelOracle(_problem(), seeded_rng(13, 0, 0), budget=10)
    oracle.label_sample_many(np.full(8, 0.5))
    with pytest.raises(BudgetExhausted):
        oracle.label_sample_many(np.full(3, 0.5))
    assert oracle.queries_used == 8
    oracle.label_sample_many(np.full(2, 0.5))
    assert oracle.queries_used == 10


def test_with_budget_view_semantics():
    base = LabelOracle(_problem(), seeded_rng(14, 0, 0))
    view = with_budget(base, 0)
    with pytest.raises(BudgetExhausted):
        view.label_sample(0.5)
    view = with_budget(base, 5)
    for _ in range(5):
        view.label_sample(0.5)
    with pytest.raises(BudgetExhausted):
        view.label_sample(0.5)
    # the view shares the base counter
    assert view.queries_used == base.queries_used == 5
    view2 = with_budget(base, 3)
    view2.label_sample_many(np.full(3, 0.5))
    with pytest.raises(BudgetExhausted):
        view2.label_sample(0.5)
    assert base.queries_used == 8


# ---------------------------------------------------------------------------
# determinism

def test_identical_seeds_give_identical_streams():
    for make in (lambda s: LabelOracle(_problem(), seeded_rng(15, s, 0)),
                 lambda s: SignOracle(_quad_fn(), GaussianNoise(1.0),
                                      seeded_rng(15, s, 0))):
        a, b = make(0), make(0)
        if isinstance(a, LabelOracle):
            seq_a = [a.label_sample(0.5) for _ in range(50)]
            seq_a += list(a.label_sample_many(np.linspace(0.1, 0.9, 40)))
            seq_b = [b.label_sample(0.5) for _ in range(50)]
            seq_b += list(b.label_sample_many(np.linspace(0.1, 0.9, 40)))
        else:
            x = np.array([0.2, -0.1])
            seq_a = [a.sign_sample(x, 0) for _ in range(50)]
            seq_a += list(a.sign_sample_line(x, 1, np.linspace(-0.5, 0.5, 40)))
            seq_b = [b.sign_sample(x, 0) for _ in range(50)]
            seq_b += list(b.sign_sample_line(x, 1, np.linspace(-0.5, 0.5, 40)))
        assert seq_a == seq_b


def test_distinct_roles_give_distinct_streams():
    a = seeded_rng(7, 0, 0).random(32)
    b = seeded_rng(7, 0, 1).random(32)
    c = seeded_rng(7, 1, 0).random(32)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, seeded_rng(7, 0, 0).random(32))
