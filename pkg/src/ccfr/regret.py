"""Vanilla CFR: regret matching, alternating self-play, best responses."""

from __future__ import annotations

import weakref
from typing import Sequence

import numpy as np

from . import _kernels as K
from .efg import BehavioralStrategy, GameTree, Profile, seq_of
from .space import BilinearGame, from_tree

_VIEWS: "weakref.WeakKeyDictionary[GameTree, BilinearGame]" = weakref.WeakKeyDictionary()


def as_bilinear(game) -> BilinearGame:
    """Solver view of a game tree (cached), a transit game, or a ready view."""
    if isinstance(game, BilinearGame):
        return game
    if isinstance(game, GameTree):
        view = _VIEWS.get(game)
        if view is None:
            view = _VIEWS[game] = from_tree(game)
        return view
    if hasattr(game, "bilinear"):
        return game.bilinear()
    if hasattr(game, "tree"):
        return as_bilinear(game.tree)
    raise TypeError(f"cannot build a solver view of {type(game).__name__}")


def regret_match(regrets: Sequence[float]) -> np.ndarray:
    """Distribution proportional to positive regret; uniform if none is positive."""
    r = np.asarray(regrets, dtype=float)
    if r.size == 0:
        raise ValueError("regret matching needs at least one action")
    pos = np.clip(r, 0.0, None)
    total = pos.sum()
    return pos / total if total > 0 else np.full(r.size, 1.0 / r.size)


class CfrState:
    """Regrets, current strategies and averages for both players of a view."""

    def __init__(self, game: BilinearGame):
        self.game = game
        s1, s2 = game.spaces
        self.behav = [s1.uniform(), s2.uniform()]
        self.x = [s1.realize(self.behav[0]), s2.realize(self.behav[1])]
        self.regrets = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        self.xbar = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        self.ssum = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        self.t = 0
        a_ptr, a_idx, a_val, at_ptr, at_idx, at_val = game.kernel_payoff
        self._rows = (a_ptr, a_idx, a_val)
        self._cols = (at_ptr, at_idx, at_val)

    def gradient(self, player: int) -> np.ndarray:
        """Per-sequence payoff of ``player`` against the opponent's current strategy."""
        if player == 1:
            g = np.empty(len(self.x[0]))
            K.spmv(*self._rows, self.x[1], g, 1.0)
        else:
            g = np.empty(len(self.x[1]))
            K.spmv(*self._cols, self.x[0], g, -1.0)
        return g


def cfr_iterate(state: CfrState, player: int, tilt: np.ndarray | None = None) -> None:
    """One regret update of ``player`` against the opponent's current strategy.

    Accumulates ``v(I,a) - v(I)`` (minus ``tilt`` where given), replaces the
    player's current strategy by regret matching and refreshes its
    realization plan.  Averages are left to the caller.
    """
    space = state.game.spaces[player - 1]
    p = player - 1
    g = state.gradient(player)
    if tilt is None:
        tilt = np.zeros(space.num_sequences)
    vals = np.empty(space.num_sequences)
    iv = np.empty(space.num_infosets)
    K.regret_update(space.action_ptr, space.succ_ptr, space.succ_info, space.succ_w,
                    state.behav[p], state.regrets[p], g, tilt, vals, iv)
    K.realization(space.action_ptr, space.in_ptr, space.in_seq, space.in_w,
                  state.behav[p], state.x[p])


def accumulate_average(state: CfrState) -> None:
    state.t += 1
    inv = 1.0 / state.t
    for p in (1, 0):
        state.xbar[p] += (state.x[p] - state.xbar[p]) * inv
        state.ssum[p] += state.x[p]


class CfrSolver:
    """Alternating vanilla CFR (player 2 first, then player 1, as in the CCFR loop)."""

    def __init__(self, game):
        self.game = as_bilinear(game)
        self.state = CfrState(self.game)

    @property
    def t(self) -> int:
        return self.state.t

    def iterate(self) -> None:
        cfr_iterate(self.state, 2)
        cfr_iterate(self.state, 1)
        accumulate_average(self.state)

    def run(self, iterations: int) -> "CfrSolver":
        """``iterations`` steps through the compiled loop (same arithmetic as :meth:`iterate`)."""
        st = self.state
        s1, s2 = self.game.spaces
        empty_i = np.zeros(1, dtype=np.int64)
        K.ccfr_chunk(*s1.kernel_args, *s2.kernel_args, *self.game.kernel_payoff,
                     np.zeros(1, dtype=np.int64), empty_i[:0], np.zeros(0), np.zeros(0),
                     np.zeros(s1.num_sequences + 1, dtype=np.int64), empty_i[:0], np.zeros(0),
                     st.behav[0], st.behav[1], st.regrets[0], st.regrets[1], st.x[0], st.x[1],
                     st.xbar[0], st.xbar[1], st.ssum[0], st.ssum[1],
                     np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(1),
                     st.t, int(iterations), K.STEP_CONSTANT, 0.0, 0.0, False)
        st.t += int(iterations)
        return self

    def average(self, player: int) -> np.ndarray:
        return average_strategy(self.state, player)

    def exploitability(self) -> float:
        return self.game.exploitability(self.average(1), self.average(2))


def average_strategy(state: CfrState, player: int) -> np.ndarray:
    """Running mean of the realization plans produced so far."""
    if state.t == 0:
        raise ValueError("no iterations have been run")
    return state.xbar[player - 1].copy()


def behavioral_average(state: CfrState, player: int) -> np.ndarray:
    """Average behavioral strategy from the cumulative sequence-weighted sums."""
    if state.t == 0:
        raise ValueError("no iterations have been run")
    return state.game.spaces[player - 1].behavioral(state.ssum[player - 1])


# ------------------------------------------------------------ best responses
def _tree_view(game: GameTree, player: int) -> BilinearGame:
    game.require_recall(player)
    return as_bilinear(game)


def exact_best_response(game: GameTree, opponent: BehavioralStrategy, player: int
                        ) -> tuple[float, BehavioralStrategy]:
    """Best-response value for ``player`` and a pure strategy attaining it.

    Ties go to the lowest action index.
    """
    if opponent.player == player:
        raise ValueError("opponent strategy belongs to the responding player")
    view = _tree_view(game, player)
    other = seq_of(opponent, game).x
    value, behav = view.best_response(player, other)
    return value, BehavioralStrategy(player, behav)


def exploitability(game: GameTree, profile: Profile) -> float:
    """``(max_x u(x, y) - min_y u(x, y)) / 2`` for a behavioral profile."""
    view = _tree_view(game, 1)
    game.require_recall(2)
    x = seq_of(profile[0], game).x
    y = seq_of(profile[1], game).x
    return view.exploitability(x, y)


def approximate_best_response(game, opponent: np.ndarray, player: int, iterations: int
                              ) -> tuple[float, np.ndarray]:
    """Regret matching for ``player`` alone against a fixed opponent realization.

    Returns the best value reached by the running-average strategy (checked
    at every iteration) and that average's realization plan.
    """
    view = as_bilinear(game)
    space = view.spaces[player - 1]
    g = view.gradient(player, opponent)
    behav = space.uniform()
    reg = np.zeros(space.num_sequences)
    x = space.realize(behav)
    xbar = np.zeros(space.num_sequences)
    zero = np.zeros(space.num_sequences)
    vals = np.empty(space.num_sequences)
    iv = np.empty(space.num_infosets)
    best, best_x = -np.inf, x.copy()
    for t in range(1, iterations + 1):
        K.regret_update(space.action_ptr, space.succ_ptr, space.succ_info, space.succ_w,
                        behav, reg, g, zero, vals, iv)
        K.realization(space.action_ptr, space.in_ptr, space.in_seq, space.in_w, behav, x)
        xbar += (x - xbar) / t
        v = float(xbar @ g)
        if v > best:
            best, best_x = v, xbar.copy()
    return best, best_x

