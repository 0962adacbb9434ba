"""Sequence-form linear programs solved by a dense-tableau simplex.

The simplex is a plain two-phase tableau method with Bland's rule.  It is
meant as an auditable ground-truth oracle for games with at most a few
thousand sequences, not as a fast solver.

For ``max_x min_y x @ A @ y`` with ``Y = {y >= 0 : F y = e0}`` the inner
minimum is replaced by its LP dual, giving

    max  q[0]
    s.t. F.T @ q - A.T @ x <= 0      (one row per player-2 sequence)
         E @ x = e0                  (player-1 flow constraints)
         C @ x <= d                  (extra linear constraints)
         x >= 0, q free

The duals of the first block are player 2's equilibrium realization plan and
the duals of the last block are the constraint multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraints.base import ConstraintError, ConstraintSet, LinearConstraint
from .space import BilinearGame, StrategySpace

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
MAX_SEQUENCES = 5000


class ScaleGuardError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """``max c @ z`` s.t. ``A_ub z <= b_ub``, ``A_eq z = b_eq``, ``z >= 0`` except ``free``."""

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    free: np.ndarray | None = None
    col_names: list[str] | None = None
    row_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = len(self.c)
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.free = np.zeros(n, dtype=bool) if self.free is None else np.asarray(self.free, bool)

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_rows(self) -> int:
        return len(self.b_ub) + len(self.b_eq)

    def to_text(self) -> str:
        """Plain-text dump: one line per column, one line per row (nonzeros only)."""
        cols = self.col_names or [f"z{j}" for j in range(self.num_vars)]
        rows = self.row_names or ([f"ub{i}" for i in range(len(self.b_ub))]
                                  + [f"eq{i}" for i in range(len(self.b_eq))])
        out = ["# ccfr-lp/1", "# maximize c.z subject to the rows below",
               f"COLUMNS {self.num_vars}", "# name lower upper objective"]
        for j, name in enumerate(cols):
            lo = "-inf" if self.free[j] else "0"
            out.append(f"{name} {lo} inf {self.c[j]!r}")
        out += [f"ROWS {self.num_rows}", "# name sense rhs column:coefficient ..."]
        blocks = [(self.A_ub, self.b_ub, "<="), (self.A_eq, self.b_eq, "=")]
        i = 0
        for A, b, sense in blocks:
            for r in range(len(b)):
                nz = np.flatnonzero(A[r])
                terms = " ".join(f"{cols[j]}:{A[r, j]!r}" for j in nz)
                out.append(f"{rows[i]} {sense} {b[r]!r} {terms}".rstrip())
                i += 1
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: str
    z: np.ndarray | None = None
    objective: float = float("nan")
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    pivots: int = 0


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if len(nz):
        T[nz] -= np.outer(col[nz], T[r])


def simplex_solve(lp: LinearProgram, pivot_tol: float = PIVOT_TOL, feas_tol: float = FEAS_TOL,
                  max_pivots: int = 200_000) -> LpSolution:
    """Two-phase dense tableau simplex with Bland's rule.

    Free variables are split into a difference of two nonnegative columns.
    Duals are shadow prices ``d objective / d rhs`` read from the columns of
    the initial identity basis, so ``<=`` rows of a maximization get
    nonnegative duals.  Deterministic: identical inputs give identical pivots.
    """
    n = lp.num_vars
    free_idx = np.flatnonzero(lp.free)
    A = np.vstack([lp.A_ub, lp.A_eq]) if lp.num_rows else np.zeros((0, n))
    b = np.concatenate([lp.b_ub, lp.b_eq])
    m_ub, m = len(lp.b_ub), len(b)
    # structural columns: z (n) then negative parts of free variables
    A = np.hstack([A, -A[:, free_idx]])
    c = np.concatenate([lp.c, -lp.c[free_idx]])
    n_struct = A.shape[1]
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    slack_rows = np.arange(m_ub)
    slack_sign = sign[:m_ub]           # +1 slack stays basic-feasible, -1 became surplus
    # basis seeds: slack where it enters with +1, artificial everywhere else
    art_rows = [r for r in range(m) if r >= m_ub or slack_sign[r] < 0]
    n_slack, n_art = m_ub, len(art_rows)
    ncols = n_struct + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n_struct] = A
    T[slack_rows, n_struct + slack_rows] = slack_sign
    init_col = np.empty(m, dtype=np.int64)
    for r in range(m_ub):
        init_col[r] = n_struct + r
    for k, r in enumerate(art_rows):
        T[r, n_struct + n_slack + k] = 1.0
        init_col[r] = n_struct + n_slack + k
    T[:m, -1] = b
    basis = init_col.copy()
    is_art = np.zeros(ncols, dtype=bool)
    is_art[n_struct + n_slack:] = True
    pivots = 0

    def run(cost: np.ndarray, allowed: np.ndarray) -> str:
        nonlocal pivots
        # objective row holds reduced costs c_j - c_B B^-1 a_j
        T[m, :ncols] = cost - cost[basis] @ T[:m, :ncols]
        T[m, -1] = -(cost[basis] @ T[:m, -1])
        while True:
            red = T[m, :ncols]
            cand = np.flatnonzero((red > feas_tol) & allowed)
            cand = cand[~np.isin(cand, basis)]
            if len(cand) == 0:
                return OPTIMAL
            j = int(cand[0])
            col = T[:m, j]
            rows = np.flatnonzero(col > pivot_tol)
            if len(rows) == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(ties[np.argmin(basis[ties])])
            _pivot(T, r, j)
            basis[r] = j
            pivots += 1
            if pivots >= max_pivots:
                return ITERATION_LIMIT

    if n_art:
        cost1 = np.where(is_art, -1.0, 0.0)
        status = run(cost1, np.ones(ncols, dtype=bool))
        if status == ITERATION_LIMIT:
            return LpSolution(ITERATION_LIMIT, pivots=pivots)
        if -T[m, -1] < -feas_tol * max(1.0, np.abs(b).max(initial=0.0)):
            return LpSolution(INFEASIBLE, pivots=pivots)
        # drive zero-level artificials out of the basis where possible
        for r in range(m):
            if is_art[basis[r]]:
                cand = np.flatnonzero((np.abs(T[r, :ncols]) > pivot_tol) & ~is_art)
                if len(cand):
                    j = int(cand[0])
                    _pivot(T, r, j)
                    basis[r] = j
                    pivots += 1
    cost2 = np.zeros(ncols)
    cost2[:n_struct] = c
    status = run(cost2, ~is_art)
    if status != OPTIMAL:
        return LpSolution(status, pivots=pivots)

    zs = np.zeros(ncols)
    zs[basis] = T[:m, -1]
    z = zs[:n].copy()
    z[free_idx] -= zs[n:n_struct]
    Binv = T[:m, init_col]
    y = (cost2[basis] @ Binv) * sign
    return LpSolution(OPTIMAL, z=z, objective=float(c @ zs[:n_struct]),
                      duals_ub=y[:m_ub], duals_eq=y[m_ub:], pivots=pivots)


# ------------------------------------------------------------ sequence form
def flow_matrix(space: StrategySpace) -> tuple[np.ndarray, np.ndarray]:
    """``(E, e)`` with rows ``x_empty = 1`` and ``sum_a x[(I,a)] - inflow(I) = 0``."""
    n_info, n = space.num_infosets, space.num_sequences
    E = np.zeros((n_info + 1, n))
    E[0, 0] = 1.0
    for j in range(n_info):
        E[j + 1, space.action_ptr[j]:space.action_ptr[j + 1]] = 1.0
        for k in range(space.in_ptr[j], space.in_ptr[j + 1]):
            E[j + 1, space.in_seq[k]] -= space.in_w[k]
    e = np.zeros(n_info + 1)
    e[0] = 1.0
    return E, e


@dataclass
class SequenceLp:
    lp: LinearProgram
    n1: int
    n2: int
    num_extra: int
    constant: float = 0.0
    x_slice: slice = field(init=False)
    q_slice: slice = field(init=False)

    def __post_init__(self):
        self.x_slice = slice(0, self.n1)
        self.q_slice = slice(self.n1, self.lp.num_vars)


def _as_linear_set(constraints, size: int) -> ConstraintSet:
    if constraints is None:
        return ConstraintSet([], size)
    cs = constraints if isinstance(constraints, ConstraintSet) else ConstraintSet(list(constraints), size)
    if not cs.linear:
        bad = [c.name for c in cs if not isinstance(c, LinearConstraint)]
        raise ConstraintError(f"the LP accepts linear constraints only; got {bad}")
    return cs


def check_scale(game: BilinearGame, limit: int = MAX_SEQUENCES) -> None:
    sizes = [s.num_sequences for s in game.spaces]
    if max(sizes) > limit:
        raise ScaleGuardError(
            f"{game.name}: {sizes[0]} x {sizes[1]} sequences exceeds the dense LP limit of "
            f"{limit} per player")


def build_sequence_lp(game: BilinearGame, extra: ConstraintSet | Sequence[LinearConstraint] | None = None,
                      lagrangian: np.ndarray | None = None) -> SequenceLp:
    """Constrained max-min LP for player 1.

    ``lagrangian`` (multipliers for the ``extra`` rows) moves those rows into
    the objective instead: ``max q[0] - lam @ (C x - d)`` without the rows.
    """
    s1, s2 = game.spaces
    n1, n2 = s1.num_sequences, s2.num_sequences
    cs = _as_linear_set(extra, n1)
    E, e = flow_matrix(s1)
    F, _ = flow_matrix(s2)
    nq = F.shape[0]
    A = game.payoff.toarray()
    top = np.hstack([-A.T, F.T])
    c = np.zeros(n1 + nq)
    c[n1] = 1.0
    ub_rows, ub_rhs = [top], [np.zeros(n2)]
    row_names = [f"y:{lab}" for lab in s2.sequence_labels()]
    const = 0.0
    if len(cs):
        C, d = cs.matrix()
        C = C.toarray()
        if lagrangian is None:
            ub_rows.append(np.hstack([C, np.zeros((len(cs), nq))]))
            ub_rhs.append(d)
            row_names += [f"c:{name}" for name in cs.names]
        else:
            lam = np.asarray(lagrangian, dtype=float)
            c[:n1] -= lam @ C
            const = float(lam @ d)
    free = np.zeros(n1 + nq, dtype=bool)
    free[n1:] = True
    lp = LinearProgram(
        c=c, A_ub=np.vstack(ub_rows), b_ub=np.concatenate(ub_rhs),
        A_eq=np.hstack([E, np.zeros((E.shape[0], nq))]), b_eq=e, free=free,
        col_names=[f"x:{lab}" for lab in s1.sequence_labels()] + [f"q{j}" for j in range(nq)],
        row_names=row_names + [f"flow{j}" for j in range(E.shape[0])],
    )
    return SequenceLp(lp, n1, n2, 0 if lagrangian is not None else len(cs), const)


@dataclass
class EquilibriumResult:
    status: str
    x: np.ndarray | None
    y: np.ndarray | None
    value: float
    lam: np.ndarray
    pivots: int


def constrained_equilibrium(game: BilinearGame, constraints=None,
                            limit: int = MAX_SEQUENCES) -> EquilibriumResult:
    """Exact constrained max-min for player 1 with multipliers from the LP duals.

    ``y`` is player 2's realization plan from the duals of the value rows.
    """
    check_scale(game, limit)
    slp = build_sequence_lp(game, constraints)
    sol = simplex_solve(slp.lp)
    if sol.status != OPTIMAL:
        return EquilibriumResult(sol.status, None, None, float("nan"),
                                 np.zeros(slp.num_extra), sol.pivots)
    n2 = slp.n2
    x = np.clip(sol.z[slp.x_slice], 0.0, None)
    y = np.clip(sol.duals_ub[:n2], 0.0, None)
    lam = np.clip(sol.duals_ub[n2:], 0.0, None)
    return EquilibriumResult(OPTIMAL, x, y, sol.objective, lam, sol.pivots)


def lagrangian_value(game: BilinearGame, constraints, lam: np.ndarray) -> float:
    """``max_x min_y x @ A @ y - lam @ f(x)`` for linear constraints."""
    slp = build_sequence_lp(game, constraints, lagrangian=lam)
    sol = simplex_solve(slp.lp)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"Lagrangian LP ended with status {sol.status}")
    return sol.objective + slp.constant


def nash_equilibrium(game: BilinearGame, limit: int = MAX_SEQUENCES) -> EquilibriumResult:
    return constrained_equilibrium(game, None, limit)


def export_lp(path, slp: SequenceLp) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(slp.lp.to_text())



def min_total_violation(space: StrategySpace, constraints,
                        limit: int = MAX_SEQUENCES) -> tuple[float, np.ndarray]:
    """``f* = min_x sum_i max(0, f_i(x))`` over one player's polytope, with a minimizer.

    Zero exactly when the constraints are jointly feasible.
    """
    if space.num_sequences > limit:
        raise ScaleGuardError(
            f"{space.num_sequences} sequences exceed the LP limit of {limit}")
    n = space.num_sequences
    cs = _as_linear_set(constraints, n)
    k = len(cs)
    if k == 0:
        return 0.0, space.realize(space.uniform())
    C, d = cs.matrix()
    E, e = flow_matrix(space)
    c = np.concatenate([np.zeros(n), -np.ones(k)])
    lp = LinearProgram(
        c=c, A_ub=np.hstack([C.toarray(), -np.eye(k)]), b_ub=d,
        A_eq=np.hstack([E, np.zeros((E.shape[0], k))]), b_eq=e,
        free=np.zeros(n + k, dtype=bool),
        col_names=[f"x:{lab}" for lab in space.sequence_labels()] + [f"s:{nm}" for nm in cs.names],
        row_names=[f"c:{nm}" for nm in cs.names] + [f"flow{j}" for j in range(E.shape[0])],
    )
    sol = simplex_solve(lp)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"violation LP ended with status {sol.status}")
    return max(0.0, -sol.objective), np.clip(sol.z[:n], 0.0, None)


def constrained_best_response(space: StrategySpace, g: np.ndarray, constraints=None,
                              limit: int = MAX_SEQUENCES) -> tuple[str, float, np.ndarray | None]:
    """``max g @ x`` over the feasible part of one player's polytope.

    Returns ``(status, value, x)``; an infeasible constraint set gives
    status ``infeasible`` and value ``-inf``.
    """
    if space.num_sequences > limit:
        raise ScaleGuardError(
            f"{space.num_sequences} sequences exceed the LP limit of {limit}")
    n = space.num_sequences
    cs = _as_linear_set(constraints, n)
    E, e = flow_matrix(space)
    if len(cs):
        C, d = cs.matrix()
        A_ub, b_ub = C.toarray(), d
    else:
        A_ub, b_ub = np.zeros((0, n)), np.zeros(0)
    lp = LinearProgram(c=np.asarray(g, dtype=float), A_ub=A_ub, b_ub=b_ub, A_eq=E, b_eq=e,
                       free=np.zeros(n, dtype=bool),
                       col_names=[f"x:{lab}" for lab in space.sequence_labels()],
                       row_names=[f"c:{nm}" for nm in cs.names]
                       + [f"flow{j}" for j in range(E.shape[0])])
    sol = simplex_solve(lp)
    if sol.status != OPTIMAL:
        return sol.status, float("-inf"), None
    return OPTIMAL, sol.objective, np.clip(sol.z, 0.0, None)
