import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom, norm

from ccfr.constraints import (
    ConstraintError,
    ConstraintSet,
    LinearConstraint,
    MaxLinearConstraint,
    QuadraticConstraint,
    build_risk_constraint,
    linear_constraint,
    normal_quantile,
    patroller_risk,
    wilson_bound,
    wilson_interval,
)
from ccfr.games import build_transit
from ccfr.regret import as_bilinear

from oracles import central_difference, off_base_by_paths, wilson_by_score_inversion

seeds = st.integers(0, 2**32 - 1)


# -- linear ---------------------------------------------------------------------
def test_linear_value_and_subgradient():
    c = LinearConstraint([2, 0], [3.0, -1.0], 0.5, 4)
    x = np.array([0.2, 9.0, 0.1, 9.0])
    assert c.value(x) == pytest.approx(-0.2 + 0.3 - 0.5)
    assert np.array_equal(c.subgradient(x), [-1.0, 0.0, 3.0, 0.0])
    assert list(c.index) == [0, 2]           # stored sorted


def test_linear_negated():
    c = LinearConstraint([1], [2.0], 1.0, 3)
    x = np.array([1.0, 0.7, 0.0])
    assert c.negated().value(x) == pytest.approx(-c.value(x))


def test_linear_constraint_builders():
    a = linear_constraint(np.array([0.0, 1.5, 0.0, -2.0]), 0.3)
    b = linear_constraint({3: -2.0, 1: 1.5}, 0.3, size=4)
    x = np.array([1.0, 0.4, 0.2, 0.1])
    assert a.value(x) == pytest.approx(b.value(x))
    assert list(a.index) == [1, 3]


@pytest.mark.parametrize("args", [
    ([0, 1], [1.0], 0.0, 3),                 # length mismatch
    ([3], [1.0], 0.0, 3),                    # out of range
    ([1, 1], [1.0, 2.0], 0.0, 3),            # duplicate
])
def test_linear_rejects(args):
    with pytest.raises(ConstraintError):
        LinearConstraint(*args)


def test_mapping_needs_size():
    with pytest.raises(ConstraintError):
        linear_constraint({0: 1.0}, 0.0)


# -- nonlinear --------------------------------------------------------------------
def test_quadratic_example():
    q = QuadraticConstraint([0, 2], [0.5, 0.0], 0.1, 3, weights=[2.0, 1.0])
    x = np.array([1.0, 5.0, 0.3])
    assert q.value(x) == pytest.approx(2 * 0.25 + 0.09 - 0.1)
    assert q.subgradient(x) == pytest.approx([2.0, 0.0, 0.6])


def test_quadratic_rejects_negative_weights():
    with pytest.raises(ConstraintError):
        QuadraticConstraint([0], [0.0], 1.0, 2, weights=[-1.0])


def test_max_linear_picks_first_maximizer():
    p1 = LinearConstraint([0], [1.0], 0.0, 2, "a")
    p2 = LinearConstraint([1], [1.0], 0.0, 2, "b")
    m = MaxLinearConstraint([p1, p2])
    assert m.value(np.array([0.3, 0.3])) == pytest.approx(0.3)
    assert np.array_equal(m.subgradient(np.array([0.3, 0.3])), [1.0, 0.0])
    assert np.array_equal(m.subgradient(np.array([0.1, 0.3])), [0.0, 1.0])


def test_max_linear_rejects_mixed_sizes():
    with pytest.raises(ConstraintError):
        MaxLinearConstraint([LinearConstraint([], [], 0, 2), LinearConstraint([], [], 0, 3)])
    with pytest.raises(ConstraintError):
        MaxLinearConstraint([])


def random_constraints(rng, n):
    idx = rng.choice(n, size=3, replace=False)
    lin = LinearConstraint(idx, rng.normal(size=3), rng.normal(), n)
    quad = QuadraticConstraint(idx, rng.uniform(size=3), 0.2, n, weights=rng.uniform(0.1, 2, 3))
    pieces = [LinearConstraint(rng.choice(n, 2, replace=False), rng.normal(size=2), rng.normal(), n)
              for _ in range(3)]
    return [lin, quad, MaxLinearConstraint(pieces)]


@given(seeds, st.floats(0, 1))
def test_convexity_along_segments(seed, theta):
    rng = np.random.default_rng(seed)
    n = 8
    x, y = rng.uniform(size=n), rng.uniform(size=n)
    for c in random_constraints(rng, n):
        mid = c.value(theta * x + (1 - theta) * y)
        assert mid <= theta * c.value(x) + (1 - theta) * c.value(y) + 1e-12


@given(seeds)
def test_subgradient_inequality(seed):
    rng = np.random.default_rng(seed)
    n = 8
    x, y = rng.uniform(size=n), rng.uniform(size=n)
    for c in random_constraints(rng, n):
        assert c.value(y) >= c.value(x) + c.subgradient(x) @ (y - x) - 1e-12


@given(seeds)
def test_subgradient_matches_central_difference(seed):
    rng = np.random.default_rng(seed)
    n = 8
    x = rng.uniform(size=n)
    for c in random_constraints(rng, n):
        assert np.abs(central_difference(c.value, x) - c.subgradient(x)).max() <= 1e-6


# -- sets ---------------------------------------------------------------------------
def test_constraint_set_basics():
    n = 4
    a = LinearConstraint([0], [1.0], 0.2, n, "a")
    b = LinearConstraint([1, 3], [1.0, 1.0], 0.5, n, "b")
    cs = ConstraintSet([a, b], n)
    x = np.array([0.5, 0.1, 0.0, 0.1])
    assert cs.names == ["a", "b"] and cs.linear
    assert cs.values(x) == pytest.approx([0.3, -0.3])
    assert cs.total_violation(x) == pytest.approx(0.3)
    lam = np.array([2.0, 0.5])
    assert cs.tilt(x, lam) == pytest.approx([2.0, 0.5, 0.0, 0.5])
    C, d = cs.matrix()
    assert np.allclose(C @ x - d, cs.values(x))


def test_constraint_set_rejects_wrong_size():
    with pytest.raises(ConstraintError):
        ConstraintSet([LinearConstraint([], [], 0.0, 3)], 4)


def test_empty_set_tilt_is_zero():
    assert np.array_equal(ConstraintSet([], 5).tilt(np.ones(5), np.zeros(0)), np.zeros(5))


def test_matrix_rejects_nonlinear():
    cs = ConstraintSet([QuadraticConstraint([0], [0.0], 1.0, 2)], 2)
    with pytest.raises(ConstraintError):
        cs.matrix()


def test_bound_constants_linear_exact(kuhn_tree):
    space = as_bilinear(kuhn_tree).spaces[0]
    n = space.num_sequences
    s = space.sequence_labels().index("P1:J|:b")
    cs = ConstraintSet([LinearConstraint([s], [2.0], 0.5, n)], n)
    F, G, exact = cs.bound_constants(space)
    # x[s] ranges over [0, 1], so f ranges over [-0.5, 1.5]
    assert (F, G, exact) == (2.0, 1.5, True)


def test_bound_constants_sampled_nonlinear(kuhn_tree):
    space = as_bilinear(kuhn_tree).spaces[0]
    n = space.num_sequences
    cs = ConstraintSet([QuadraticConstraint([1, 2], [0.5, 0.5], 0.0, n)], n)
    F, G, exact = cs.bound_constants(space, samples=200)
    assert not exact
    # vertices put both sequences at 0 or 1: f = 0.5, gradient L1 = 2
    assert G == pytest.approx(0.5) and F == pytest.approx(2.0)


# -- normal quantile and Wilson -------------------------------------------------------
@given(st.floats(1e-12, 1 - 1e-12))
def test_normal_quantile_vs_scipy(p):
    assert abs(normal_quantile(p) - norm.ppf(p)) <= 1e-8 * max(1.0, abs(norm.ppf(p)))


def test_normal_quantile_examples():
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.125) == -normal_quantile(0.875)     # 1 - p exact in binary
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            normal_quantile(bad)


def test_wilson_edges():
    z = normal_quantile(0.975)
    lo, hi = wilson_interval(0, 10, 0.95)
    assert lo == 0.0 and hi == pytest.approx(z * z / (10 + z * z), abs=1e-12)
    lo, hi = wilson_interval(10, 10, 0.95)
    assert hi == 1.0 and lo == pytest.approx(10 / (10 + z * z), abs=1e-12)


def test_wilson_worked_example():
    # 5 of 10 at 95%: center 0.5, half width z * sqrt(0.025 + z^2/400) / (1 + z^2/10)
    lo, hi = wilson_interval(5, 10, 0.95)
    assert (lo, hi) == pytest.approx((0.236593090512564, 0.763406909487436), abs=1e-9)


@given(st.integers(1, 2000), st.floats(0, 1), st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_wilson_vs_score_inversion(n, frac, conf):
    k = int(round(frac * n))
    lo, hi = wilson_interval(k, n, conf)
    ref = wilson_by_score_inversion(k, n, norm.ppf(0.5 * (1 + conf)))
    assert (lo, hi) == pytest.approx(ref, abs=1e-9)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_wilson_rejects():
    for args in ((1, 0, 0.9), (-1, 5, 0.9), (6, 5, 0.9), (1, 5, 1.0)):
        with pytest.raises(ValueError):
            wilson_interval(*args)


def test_wilson_bound_record():
    b = wilson_bound("fold-rate", 3, 12, 0.9)
    assert b.proportion == 0.25
    assert (b.lower, b.upper) == wilson_interval(3, 12, 0.9)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.5, 0.8])
def test_wilson_exact_coverage(p):
    n, conf = 200, 0.95
    ks = np.arange(n + 1)
    covered = [lo <= p <= hi for lo, hi in (wilson_interval(int(k), n, conf) for k in ks)]
    coverage = float(binom.pmf(ks, n, p)[covered].sum())
    assert coverage >= 0.93


# -- transit risk ---------------------------------------------------------------------
@pytest.fixture(scope="module")
def transit_short():
    return build_transit(2, horizon=4)


def test_risk_bound_one_is_vacuous(transit2):
    c = build_risk_constraint(transit2, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert c.value(transit2.patroller_space.sample_point(rng)) <= 1e-12


def test_stay_at_base_has_zero_risk(transit2):
    space = transit2.patroller_space
    behav = np.zeros(space.num_sequences)
    behav[0] = 1.0
    for j in range(space.num_infosets):
        k = [lab for lab, _ in transit2.state_actions(1, j)].index("stay")
        behav[space.action_ptr[j] + k] = 1.0
    x = space.realize(behav)
    assert patroller_risk(transit2, x) == 0.0
    assert build_risk_constraint(transit2, 0.3).value(x) == pytest.approx(-0.3)


@given(seeds)
def test_risk_vs_path_enumeration(seed):
    game = build_transit(2, horizon=4)
    space = game.patroller_space
    rng = np.random.default_rng(seed)
    x = space.sample_point(rng)
    behav = space.behavioral(x)
    assert abs(patroller_risk(game, x) - off_base_by_paths(game, behav)) <= 1e-10


def test_risk_vs_forward_distribution(transit2):
    space = transit2.patroller_space
    x = space.sample_point(np.random.default_rng(5))
    final = transit2.patroller_distribution(space.behavioral(x))[-1]
    assert patroller_risk(transit2, x) == pytest.approx(1.0 - final.get(transit2.base, 0.0),
                                                        abs=1e-12)


def test_risk_support_is_last_step(transit2):
    c = build_risk_constraint(transit2, 0.1)
    last = set(transit2.sequences_at(1, transit2.horizon - 1).tolist())
    assert set(c.index.tolist()) <= last
    assert (c.coef > 0).all() and (c.coef <= 1.0).all()


@pytest.mark.parametrize("b", [-0.01, 1.5])
def test_risk_bound_range(transit2, b):
    with pytest.raises(ValueError):
        build_risk_constraint(transit2, b)


def test_risk_gradient_central_difference(transit2):
    c = build_risk_constraint(transit2, 0.1)
    x = transit2.patroller_space.sample_point(np.random.default_rng(2))
    assert np.abs(central_difference(c.value, x) - c.subgradient(x)).max() <= 1e-6
    assert math.isclose(c.value(x), patroller_risk(transit2, x) - 0.1, abs_tol=1e-15)
