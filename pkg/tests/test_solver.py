import csv
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccfr.constraints import (
    ConstraintSet,
    LinearConstraint,
    MaxLinearConstraint,
    QuadraticConstraint,
)
from ccfr.efg import random_strategy, seq_of
from ccfr.lp import constrained_equilibrium
from ccfr.regret import CfrSolver, as_bilinear
from ccfr.solver import (
    CcfrConfig,
    CcfrSolver,
    LagrangeState,
    beta_doubling_solve,
    checkpoint_schedule,
    compute_bound_constants,
    corollary_lambda_regret,
    lambda_update,
    measure_lambda_regret,
    recurrence_tilted_values,
    regularized_objective,
    solve,
    guarantee_bounds,
    tilt,
    tilted_values_closed_form,
)

from conftest import matching_pennies
from oracles import central_difference, pure_strategies

seeds = st.integers(0, 2**32 - 1)
LAMBDA_STAR = 1.0 / 6.0            # J-calls >= 0.2 on Kuhn, from the LP (see test_lp)


def j_calls(view, b=0.2):
    s1 = view.spaces[0]
    i = s1.sequence_labels().index("P1:J|kb:c")
    return LinearConstraint([i], [-1.0], -b, s1.num_sequences, "J-calls")


# -- multiplier updates ------------------------------------------------------------
@pytest.mark.parametrize("lam, f, beta, expected", [
    ([0.5], [0.3], 10.0, [0.8]),
    ([0.9], [0.5], 1.0, [1.0]),          # clamped at beta
    ([0.2], [-0.5], 1.0, [0.0]),         # projected at zero
    ([0.0, 2.0], [1.0, -1.0], 5.0, [1.0, 1.0]),
])
def test_lambda_update_examples(lam, f, beta, expected):
    s = lambda_update(LagrangeState(lam, beta), f)
    assert s.lam == pytest.approx(expected)
    assert s.t == 1 and s.mean == pytest.approx(expected)


def test_lambda_update_decaying_and_unclamped():
    s = LagrangeState([0.0], 1.0, step="decaying", alpha=2.0, t=3)
    assert lambda_update(s, [1.0]).lam == pytest.approx([1.0])     # 2 / sqrt(4)
    s = LagrangeState([0.9], 1.0, clamp=False)
    assert lambda_update(s, [0.5]).lam == pytest.approx([1.4])


def test_lambda_update_shape_check():
    with pytest.raises(ValueError):
        lambda_update(LagrangeState([0.0, 0.0], 1.0), [1.0])


def test_tilt_example():
    n = 4
    cs = ConstraintSet([LinearConstraint([1], [2.0], 0.0, n), LinearConstraint([1, 3], [1.0, -1.0], 0.0, n)], n)
    assert tilt(cs, np.array([0.5, 3.0]), np.zeros(n)) == pytest.approx([0.0, 4.0, 0.0, -3.0])


@given(seeds)
def test_tilt_is_gradient_of_weighted_constraints(seed):
    rng = np.random.default_rng(seed)
    n = 6
    cs = ConstraintSet([QuadraticConstraint([0, 2, 5], rng.uniform(size=3), 0.1, n),
                        LinearConstraint([1, 4], rng.normal(size=2), 0.3, n)], n)
    lam = rng.uniform(0, 3, size=2)
    x = rng.uniform(size=n)
    fd = central_difference(lambda z: float(lam @ cs.values(z)), x)
    assert np.abs(fd - tilt(cs, lam, x)).max() <= 1e-6


# -- unconstrained equivalence --------------------------------------------------------
def test_zero_constraints_bitwise_matches_cfr(kuhn_tree):
    cc = CcfrSolver(kuhn_tree, None, CcfrConfig(iterations=500))
    cc.advance(500)
    cfr = CfrSolver(kuhn_tree).run(500)
    for p in (0, 1):
        assert np.array_equal(cc.xbar[p], cfr.state.xbar[p])
        assert np.array_equal(cc.regrets[p], cfr.state.regrets[p])


def test_zero_constraints_python_path_matches(kuhn_tree):
    a = CcfrSolver(kuhn_tree, None, CcfrConfig(iterations=200))
    b = CcfrSolver(kuhn_tree, None, CcfrConfig(iterations=200))
    a.advance(200)
    for _ in range(200):
        b.iterate()
    for p in (0, 1):
        assert np.array_equal(a.xbar[p], b.xbar[p])


# -- tilted values ---------------------------------------------------------------------
@given(seeds)
def test_tilted_values_closed_form_vs_recurrence(seed):
    from ccfr.games import kuhn_poker

    tree = kuhn_poker().tree
    rng = np.random.default_rng(seed)
    prof = (random_strategy(tree, 1, rng), random_strategy(tree, 2, rng))
    idx = tree.seq_index(1)
    c = rng.normal(size=idx.num_sequences)
    vals, iv = recurrence_tilted_values(tree, prof, c)
    for j in range(idx.num_infosets):
        assert abs(tilted_values_closed_form(tree, prof, c, j) - iv[j]) <= 1e-10
        for a in range(idx.action_ptr[j + 1] - idx.action_ptr[j]):
            assert abs(tilted_values_closed_form(tree, prof, c, j, a)
                       - vals[idx.action_ptr[j] + a]) <= 1e-10


@given(seeds)
def test_tilted_regret_telescopes(seed):
    """Tilted utility gap to any deviation equals its reach-weighted local advantages."""
    from ccfr.games import kuhn_poker

    tree = kuhn_poker().tree
    view = as_bilinear(tree)
    s1 = view.spaces[0]
    rng = np.random.default_rng(seed)
    prof = (random_strategy(tree, 1, rng), random_strategy(tree, 2, rng))
    c = rng.normal(size=s1.num_sequences)
    vals, iv = recurrence_tilted_values(tree, prof, c)
    x = seq_of(prof[0], tree).x
    g = view.gradient(1, seq_of(prof[1], tree).x)
    dev = s1.sample_point(rng, vertex=bool(rng.integers(2)))
    bdev, mass = s1.behavioral(dev), s1.infoset_mass(dev)
    rhs = 0.0
    for j in range(s1.num_infosets):
        lo, hi = s1.action_ptr[j], s1.action_ptr[j + 1]
        rhs += mass[j] * (bdev[lo:hi] @ vals[lo:hi] - iv[j])
    assert abs((g - c) @ (dev - x) - rhs) <= 1e-10


@given(seeds, st.floats(0, 5), st.floats(0, 5))
def test_larger_multiplier_lowers_tilted_values(seed, l1, l2):
    from ccfr.games import kuhn_poker

    tree = kuhn_poker().tree
    rng = np.random.default_rng(seed)
    prof = (random_strategy(tree, 1, rng), random_strategy(tree, 2, rng))
    a = rng.uniform(0, 1, size=tree.seq_index(1).num_sequences)      # nonnegative gradient
    lo, hi = sorted((l1, l2))
    v_lo, _ = recurrence_tilted_values(tree, prof, lo * a)
    v_hi, _ = recurrence_tilted_values(tree, prof, hi * a)
    assert (v_hi <= v_lo + 1e-12).all()


def test_multipliers_stay_in_box(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    n = view.spaces[0].num_sequences
    impossible = LinearConstraint([0], [1.0], 0.5, n, "root<=0.5")       # x[root] = 1 always
    s = CcfrSolver(view, [impossible], CcfrConfig(iterations=50, beta=3.0, alpha=1.0))
    for _ in range(50):
        s.iterate()
        assert 0.0 <= s.lam[0] <= 3.0
    assert s.lam[0] == 3.0
    free = CcfrSolver(view, [impossible], CcfrConfig(iterations=50, beta=3.0, clamp=False))
    free.advance(50)
    assert free.lam[0] == pytest.approx(25.0)


# -- multiplier regret ---------------------------------------------------------------
def test_measure_lambda_regret_example():
    # f sums to zero so lam* = 0; the played multipliers scored -1 in total
    assert measure_lambda_regret([[0.0], [1.0]], [[1.0], [-1.0]], 2.0) == pytest.approx(0.5)
    # positive sum: lam* = beta
    assert measure_lambda_regret([[0.0], [0.0]], [[1.0], [0.5]], 2.0) == pytest.approx(1.5)


def test_measure_lambda_regret_rejects():
    with pytest.raises(ValueError):
        measure_lambda_regret(np.zeros((2, 1)), np.zeros((3, 1)), 1.0)


@given(seeds)
def test_measure_lambda_regret_vs_grid(seed):
    rng = np.random.default_rng(seed)
    T, k, beta = 7, 2, 1.5
    lams = rng.uniform(0, beta, size=(T, k))
    fs = rng.normal(size=(T, k))
    grid = np.linspace(0, beta, 31)
    best = max(float(np.sum((np.array(l) - lams) * fs)) for l in itertools.product(grid, repeat=k))
    assert measure_lambda_regret(lams, fs, beta) == pytest.approx(best / T, abs=1e-12)


def test_solver_lambda_regret_matches_history(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    s = CcfrSolver(view, [j_calls(view)], CcfrConfig(iterations=300, beta=2.0, alpha=0.5))
    lams, fs = [], []
    for _ in range(300):
        s.iterate()
        lams.append(s.lam.copy())
        fs.append(s.f_prev.copy())
    assert s.lambda_regret == pytest.approx(measure_lambda_regret(lams, fs, 2.0), abs=1e-12)


@pytest.mark.parametrize("T", [100, 2000])
def test_corollary_step_meets_lambda_regret_bound(kuhn_tree, T):
    view = as_bilinear(kuhn_tree)
    s1 = view.spaces[0]
    labels = s1.sequence_labels()
    cons = [j_calls(view, 0.3),
            LinearConstraint([labels.index("P1:Q|:b")], [1.0], 0.1, s1.num_sequences, "Q-bets")]
    s = CcfrSolver(view, cons, CcfrConfig(iterations=T, beta=1.0, step="corollary"))
    s.advance(T)
    bound = corollary_lambda_regret(s.report, T, s.beta)
    assert bound == pytest.approx(len(cons) * s.beta * s.report.G / math.sqrt(T))
    assert s.lambda_regret <= bound + 1e-9


def test_regularized_objective_maximizer_by_grid():
    """With beta above the multiplier the penalized max-min picks the constrained optimum."""
    tree = matching_pennies()
    view = as_bilinear(tree)
    n = view.spaces[0].num_sequences
    heads = LinearConstraint([1], [-1.0], -0.7, n, "H>=0.7")
    grid = np.linspace(0, 1, 1001)
    objs = [regularized_objective(tree, heads, 10.0, np.array([1.0, p, 1 - p])) for p in grid]
    p_best = grid[int(np.argmax(objs))]
    assert p_best == pytest.approx(0.7, abs=0.01)
    lp = constrained_equilibrium(view, [heads])
    assert max(objs) == pytest.approx(lp.value, abs=0.01)
    assert lp.value == pytest.approx(-0.4, abs=1e-9)        # -|2p - 1| at p = 0.7


# -- bound constants ------------------------------------------------------------------
def test_bound_constants_single_infoset():
    rep = compute_bound_constants(matching_pennies())
    assert (rep.delta_u, rep.M, rep.max_actions, rep.k) == (2.0, 1.0, 2, 0)


def test_bound_constants_kuhn_vs_enumeration(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    best = 0.0
    for p in (1, 2):
        space = view.spaces[p - 1]
        for b in pure_strategies(kuhn_tree, p):
            best = max(best, float(space.infoset_mass(space.realize(b)).sum()))
    rep = compute_bound_constants(kuhn_tree, [j_calls(view)])
    assert rep.M == best == 6.0
    assert rep.delta_u == 4.0 and rep.k == 1
    assert (rep.F, rep.G, rep.exact) == (1.0, 0.8, True)


def test_guarantee_bounds_without_constraints():
    rep = compute_bound_constants(matching_pennies())
    tb = guarantee_bounds(rep, 100, 50.0)
    assert tb.lambda_regret == 0.0
    assert tb.expl == pytest.approx(4 * 2.0 * 1.0 * math.sqrt(2) / 10)
    assert tb.viol == pytest.approx((2.0 * math.sqrt(2) / 10 + 2.0) / 50.0)


def test_dual_violation_bound_needs_beta_above_multiplier(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    rep = compute_bound_constants(view, [j_calls(view)])
    tb = guarantee_bounds(rep, 10_000, 1.0, 0.0, np.array([2.0]))
    assert np.isinf(tb.dual_viol[0]) and np.isinf(tb.corollary_violation[0])
    tb = guarantee_bounds(rep, 10_000, 1.0, 0.0, np.array([LAMBDA_STAR]))
    assert np.isfinite(tb.dual_viol[0])


def test_checkpoint_schedule():
    pts = checkpoint_schedule(1000, 4)
    assert pts == [1, 10, 100, 1000]
    assert checkpoint_schedule(7, 25)[-1] == 7
    assert checkpoint_schedule(1, 5) == [1]


# -- beta doubling ---------------------------------------------------------------------
def test_no_doubling_when_beta_is_large(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    res = beta_doubling_solve(view, [j_calls(view)],
                              CcfrConfig(iterations=5000, beta=5.0, beta_doubling=True, checkpoints=2))
    assert len(res.doubling_trace) == 1 and res.beta == 5.0 and not res.flagged


def test_doubling_from_zero_and_tight_beta(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    cfg = dict(iterations=5000, beta_doubling=True, checkpoints=2)
    res = beta_doubling_solve(view, [j_calls(view)], CcfrConfig(beta=0.0, **cfg))
    assert [t["beta"] for t in res.doubling_trace] == [0.0, 1.0]
    res = beta_doubling_solve(view, [j_calls(view)], CcfrConfig(beta=0.05, **cfg))
    assert res.doubling_trace[0]["near_beta"] and res.beta == 1.0
    assert res.lam_bar[0] < 0.9 * res.beta


def test_doubling_cap_flags(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    n = view.spaces[0].num_sequences
    impossible = LinearConstraint([0], [1.0], 0.5, n)
    res = beta_doubling_solve(view, [impossible],
                              CcfrConfig(iterations=200, beta=1.0, doubling_cap=2, checkpoints=1))
    assert res.flagged and [t["beta"] for t in res.doubling_trace] == [1.0, 2.0, 4.0]


# -- other configurations ----------------------------------------------------------------
def test_constrained_player_two(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    s2 = view.spaces[1]
    i = s2.sequence_labels().index("P2:J|b:c")
    con = LinearConstraint([i], [-1.0], -0.3, s2.num_sequences, "P2-J-calls")
    res = solve(view, [con], CcfrConfig(iterations=100_000, constrained_player=2, checkpoints=3))
    ref = constrained_equilibrium(view.negated(), [con])
    assert res.final["max_violation"] <= 0.002
    assert res.xbar[1][i] >= 0.3 - 0.002                         # player 2 slot in original seats
    assert res.final["value"] == pytest.approx(ref.value, abs=0.005)
    assert res.sequence_labels[1][i] == "P2:J|b:c"


def test_nonlinear_path_matches_compiled_linear(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    lin = j_calls(view)
    wrapped = MaxLinearConstraint([lin], "J-calls")             # same function, Python path
    a = CcfrSolver(view, [lin], CcfrConfig(iterations=2000, beta=2.0))
    b = CcfrSolver(view, [wrapped], CcfrConfig(iterations=2000, beta=2.0))
    assert a._cargs is not None and b._cargs is None
    a.advance(2000)
    b.advance(2000)
    for p in (0, 1):
        assert np.abs(a.xbar[p] - b.xbar[p]).max() <= 1e-9
    assert a.lam == pytest.approx(b.lam, abs=1e-9)


def test_quadratic_constraint_is_met(kuhn_tree):
    view = as_bilinear(kuhn_tree)
    s1 = view.spaces[0]
    labels = s1.sequence_labels()
    idx = [labels.index("P1:K|:b"), labels.index("P1:J|:b")]
    q = QuadraticConstraint(idx, [0.5, 0.5], 0.02, s1.num_sequences)
    res = solve(view, [q], CcfrConfig(iterations=20_000, beta=5.0, checkpoints=2))
    assert res.final["max_violation"] <= 0.01
    assert res.bounds.exact is False


def test_result_save_and_csv(kuhn_tree, tmp_path):
    view = as_bilinear(kuhn_tree)
    res = solve(view, [j_calls(view)], CcfrConfig(iterations=1000, beta=2.0, checkpoints=3))
    res.save(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["format"] == "ccfr-result/1"
    assert data["iterations"] == 1000 and data["constraints"] == ["J-calls"]
    assert len(data["diagnostics"]) == len(res.diagnostics)
    assert "wall_time" not in data["diagnostics"][0]
    sf = data["strategies"]["player1"]["sequence_form"]
    assert sf["P1:J|kb:c"] == pytest.approx(res.xbar[0][labels_index(view, "P1:J|kb:c")])
    res.write_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0].startswith("# units: iteration=count")
    rows = list(csv.reader(lines[1:]))
    assert rows[0][-3:] == ["f[J-calls]", "lambda[J-calls]", "lambda_bar[J-calls]"]
    assert [int(r[0]) for r in rows[1:]] == [d["iteration"] for d in res.diagnostics]


def labels_index(view, label):
    return view.spaces[0].sequence_labels().index(label)


def test_config_validation():
    for bad in (dict(iterations=0), dict(beta=-1.0), dict(step="adam"), dict(alpha=0.0),
                dict(constrained_player=3), dict(doubling_threshold=1.0)):
        with pytest.raises(ValueError):
            CcfrConfig(**bad).validate()
