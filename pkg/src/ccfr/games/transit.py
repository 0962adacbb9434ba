"""Transit game: an evader crosses a 2w x w grid while a patroller guards it.

Both players act on an 8-connected grid for ``d = 2w + 4`` steps and see
only their own position and the clock, so each strategy is a Markov policy
over (cell, time) states.  Its sequence form is the occupancy measure of
(cell, time, action) triples, a flow polytope in which the state ``(c, t+1)``
is fed by every ``(s, a, t)`` with weight ``T(s, a, c)``.

Because neither player observes the other, their position chains are
independent, and the expected utility is bilinear in the two occupancy
measures.  Meeting in cell ``c`` after step ``t`` has probability
``P_p(c, t+1) * P_e(c, t+1)``, so the payoff matrix is assembled per step
as ``sum_c T_p(., ., c) T_e(., ., c)``.

Rules fixed here:

* A failed move (probability ``fail_prob``) leaves the mover in place;
  staying never fails.
* The evader starts outside the grid and its first action picks a west
  column cell, which it enters with certainty.
* Reaching the east column is an escape: +1 to the evader, after which it
  leaves the game (no more encounters or step costs).
* Every co-location after a step costs the evader 1, and every step that
  ends with the evader still on the grid costs it 0.02.
* The patroller starts at its base, by default the middle cell of the
  south edge, and receives the negated evader utility.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..space import BilinearGame, StrategySpace

ENCOUNTER = 1.0
ESCAPE = 1.0
STEP_COST = 0.02
FAIL_PROB = 0.1

MOVES = {
    "stay": (0, 0), "N": (0, 1), "NE": (1, 1), "E": (1, 0), "SE": (1, -1),
    "S": (0, -1), "SW": (-1, -1), "W": (-1, 0), "NW": (-1, 1),
}

Cell = tuple[int, int]


@dataclass
class _Side:
    """State/action layout of one player (states in time order)."""

    states: list[tuple[Cell | None, int]]          # (cell, t); cell None = outside
    actions: list[list[tuple[str, Cell]]]          # per state: (label, intended target)
    action_ptr: np.ndarray = field(default=None)

    def __post_init__(self):
        sizes = [len(a) for a in self.actions]
        self.action_ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
        self.action_ptr[0] = 1
        self.action_ptr[1:] = 1 + np.cumsum(sizes)

    @property
    def num_sequences(self) -> int:
        return int(self.action_ptr[-1])


class TransitGame:
    """Transit game of width ``w``; player 1 is the patroller, player 2 the evader."""

    def __init__(self, w: int, horizon: int | None = None, fail_prob: float = FAIL_PROB,
                 base: Cell | None = None):
        if w < 2:
            raise ValueError(f"transit game needs w >= 2, got {w}")
        if not 0.0 <= fail_prob < 1.0:
            raise ValueError("fail_prob must lie in [0, 1)")
        self.w = int(w)
        self.cols, self.rows = 2 * self.w, self.w
        self.horizon = 2 * self.w + 4 if horizon is None else int(horizon)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        self.fail_prob = float(fail_prob)
        self.base: Cell = (self.w, 0) if base is None else tuple(base)
        if not self.in_grid(self.base):
            raise ValueError(f"base {self.base} is off the grid")
        self.name = f"transit-w{self.w}-d{self.horizon}"
        self._patroller = self._build_patroller()
        self._evader = self._build_evader()
        self.payoff = self._build_payoff()
        self.utility_range = ESCAPE + self.horizon * (ENCOUNTER + STEP_COST)
        self._view: BilinearGame | None = None

    # -- geometry -------------------------------------------------------------
    def in_grid(self, c: Cell) -> bool:
        return 0 <= c[0] < self.cols and 0 <= c[1] < self.rows

    def is_exit(self, c: Cell) -> bool:
        return c[0] == self.cols - 1

    @property
    def cells(self) -> list[Cell]:
        return [(x, y) for x in range(self.cols) for y in range(self.rows)]

    def moves(self, c: Cell) -> list[tuple[str, Cell]]:
        out = []
        for label, (dx, dy) in MOVES.items():
            t = (c[0] + dx, c[1] + dy)
            if self.in_grid(t):
                out.append((label, t))
        return out

    def kernel(self, c: Cell | None, target: Cell) -> dict[Cell, float]:
        """``T(c, a, .)`` for the action aimed at ``target``; entering from outside is certain."""
        if c is None or target == c or self.fail_prob == 0.0:
            return {target: 1.0}
        return {target: 1.0 - self.fail_prob, c: self.fail_prob}

    # -- strategy spaces ------------------------------------------------------
    def _build_patroller(self) -> _Side:
        states, actions = [], []
        frontier = {self.base}
        for t in range(self.horizon):
            for c in sorted(frontier):
                states.append((c, t))
                actions.append(self.moves(c))
            frontier = {m for c in frontier for _, m in self.moves(c)}
        return _Side(states, actions)

    def _build_evader(self) -> _Side:
        entry = [(f"enter{y}", (0, y)) for y in range(self.rows)]
        states, actions = [(None, 0)], [entry]
        frontier = {c for _, c in entry}
        for t in range(1, self.horizon):
            for c in sorted(frontier):
                states.append((c, t))
                actions.append(self.moves(c))
            frontier = {m for c in frontier for _, m in self.moves(c) if not self.is_exit(m)}
        return _Side(states, actions)

    def _space(self, side: _Side, tag: str) -> StrategySpace:
        index = {st: j for j, st in enumerate(side.states)}
        inflow: list[list[tuple[int, float]]] = [[] for _ in side.states]
        inflow[0].append((0, 1.0))
        for j, (c, t) in enumerate(side.states):
            for k, (_, target) in enumerate(side.actions[j]):
                s = int(side.action_ptr[j]) + k
                for c2, p in self.kernel(c, target).items():
                    nxt = index.get((c2, t + 1))
                    if nxt is not None:
                        inflow[nxt].append((s, p))
        in_ptr = np.zeros(len(inflow) + 1, dtype=np.int64)
        in_ptr[1:] = np.cumsum([len(f) for f in inflow])
        in_seq = np.array([s for f in inflow for s, _ in f], dtype=np.int64)
        in_w = np.array([p for f in inflow for _, p in f], dtype=float)
        keys = [f"{tag}:{'out' if c is None else f'{c[0]},{c[1]}'}@{t}" for c, t in side.states]
        labels = [tuple(lab for lab, _ in acts) for acts in side.actions]
        return StrategySpace(side.action_ptr, in_ptr, in_seq, in_w, keys, labels)

    def _landing(self, side: _Side, t: int) -> sp.csr_matrix:
        """``seq x cell`` matrix of ``T(s, a, c)`` for the step taken at time ``t``."""
        col = {c: i for i, c in enumerate(self.cells)}
        rows, cols, vals = [], [], []
        for j, (c, tt) in enumerate(side.states):
            if tt != t:
                continue
            for k, (_, target) in enumerate(side.actions[j]):
                s = int(side.action_ptr[j]) + k
                for c2, p in self.kernel(c, target).items():
                    rows.append(s)
                    cols.append(col[c2])
                    vals.append(p)
        return sp.csr_matrix((vals, (rows, cols)), shape=(side.num_sequences, len(col)))

    def _build_payoff(self) -> sp.csr_matrix:
        exit_mask = np.array([self.is_exit(c) for c in self.cells])
        stay = sp.diags((~exit_mask).astype(float))
        A = sp.csr_matrix((self._patroller.num_sequences, self._evader.num_sequences))
        evader_only = np.zeros(self._evader.num_sequences)
        for t in range(self.horizon):
            P = self._landing(self._patroller, t)
            E = self._landing(self._evader, t)
            A = A + ENCOUNTER * (P @ stay @ E.T)
            escape = np.asarray(E[:, exit_mask].sum(axis=1)).ravel()
            remain = np.asarray(E[:, ~exit_mask].sum(axis=1)).ravel()
            evader_only += ESCAPE * escape - STEP_COST * remain
        A = A.tolil()
        A[0, :] = A[0, :].toarray() - evader_only
        A = A.tocsr()
        A.eliminate_zeros()
        return A

    # -- views ---------------------------------------------------------------
    @property
    def patroller_space(self) -> StrategySpace:
        return self.bilinear().spaces[0]

    @property
    def evader_space(self) -> StrategySpace:
        return self.bilinear().spaces[1]

    def bilinear(self) -> BilinearGame:
        if self._view is None:
            self._view = BilinearGame(self._space(self._patroller, "P"),
                                      self._space(self._evader, "E"),
                                      self.payoff, self.utility_range, self.name)
        return self._view

    def states(self, player: int) -> list[tuple[Cell | None, int]]:
        return list((self._patroller if player == 1 else self._evader).states)

    def state_actions(self, player: int, j: int) -> list[tuple[str, Cell]]:
        return list((self._patroller if player == 1 else self._evader).actions[j])

    def sequences_at(self, player: int, t: int) -> np.ndarray:
        side = self._patroller if player == 1 else self._evader
        out = [np.arange(side.action_ptr[j], side.action_ptr[j + 1])
               for j, (_, tt) in enumerate(side.states) if tt == t]
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def game_hash(self) -> str:
        desc = {"w": self.w, "horizon": self.horizon, "fail": self.fail_prob,
                "base": list(self.base), "encounter": ENCOUNTER, "escape": ESCAPE,
                "step": STEP_COST, "moves": list(MOVES), "entry": "west", "exit": "east"}
        return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()[:16]

    # -- reference computations (test oracles) ----------------------------------
    def patroller_distribution(self, behav: np.ndarray) -> list[dict[Cell, float]]:
        """Position distribution at times ``0..d`` under a patroller policy."""
        return self._positions(self._patroller, behav)

    def _positions(self, side: _Side, behav: np.ndarray) -> list[dict]:
        index = {st: j for j, st in enumerate(side.states)}
        start = side.states[0][0]
        dists = [{start: 1.0}]
        for t in range(self.horizon):
            nxt: dict = {}
            for c, p in dists[-1].items():
                if c == "escaped":
                    nxt["escaped"] = nxt.get("escaped", 0.0) + p
                    continue
                j = index[(c, t)]
                for k, (_, target) in enumerate(side.actions[j]):
                    q = p * behav[side.action_ptr[j] + k]
                    for c2, pt in self.kernel(c, target).items():
                        key = "escaped" if side is self._evader and self.is_exit(c2) else c2
                        nxt[key] = nxt.get(key, 0.0) + q * pt
            dists.append(nxt)
        return dists

    def joint_value(self, behav_p: np.ndarray, behav_e: np.ndarray) -> float:
        """Patroller's expected utility by propagating the joint position distribution."""
        ip = {st: j for j, st in enumerate(self._patroller.states)}
        ie = {st: j for j, st in enumerate(self._evader.states)}
        joint = {(self.base, None): 1.0}
        total = 0.0
        for t in range(self.horizon):
            nxt: dict = {}
            for (cp, ce), p in joint.items():
                jp = ip[(cp, t)]
                moves_p = [(behav_p[self._patroller.action_ptr[jp] + k], self.kernel(cp, tg))
                           for k, (_, tg) in enumerate(self._patroller.actions[jp])]
                if ce == "escaped":
                    moves_e = [(1.0, {"escaped": 1.0})]
                else:
                    je = ie[(ce, t)]
                    moves_e = [(behav_e[self._evader.action_ptr[je] + k], self.kernel(ce, tg))
                               for k, (_, tg) in enumerate(self._evader.actions[je])]
                for (qp, kp), (qe, ke) in itertools.product(moves_p, moves_e):
                    for (c2p, tp), (c2e, te) in itertools.product(kp.items(), ke.items()):
                        q = p * qp * qe * tp * te
                        if q == 0.0:
                            continue
                        if c2e == "escaped":
                            key = (c2p, "escaped")
                        elif self.is_exit(c2e):
                            total -= ESCAPE * q
                            key = (c2p, "escaped")
                        else:
                            total += STEP_COST * q + (ENCOUNTER * q if c2p == c2e else 0.0)
                            key = (c2p, c2e)
                        nxt[key] = nxt.get(key, 0.0) + q
            joint = nxt
        return total

    def enumerate_paths(self, player: int, behav: np.ndarray, start: int = 0):
        """Yield ``(probability, positions)`` for every trajectory from state ``start``.

        ``positions`` lists the cell at each later time step (``"escaped"``
        once the evader has left).  Exponential in the horizon; for tests.
        """
        side = self._patroller if player == 1 else self._evader
        index = {st: j for j, st in enumerate(side.states)}

        def rec(c, t, p, path):
            if t == self.horizon:
                yield p, path
                return
            if c == "escaped":
                yield from rec(c, t + 1, p, path + ["escaped"])
                return
            j = index[(c, t)]
            for k, (_, target) in enumerate(side.actions[j]):
                q = behav[side.action_ptr[j] + k]
                if q == 0.0:
                    continue
                for c2, pt in self.kernel(c, target).items():
                    nxt = "escaped" if player == 2 and self.is_exit(c2) else c2
                    yield from rec(nxt, t + 1, p * q * pt, path + [nxt])

        c0, t0 = side.states[start]
        yield from rec(c0, t0, 1.0, [])

    def __repr__(self) -> str:
        v = self.bilinear()
        return (f"TransitGame(w={self.w}, d={self.horizon}, patroller={v.spaces[0].num_sequences} "
                f"seqs, evader={v.spaces[1].num_sequences} seqs)")


def build_transit(w: int, horizon: int | None = None, fail_prob: float = FAIL_PROB,
                  base: Cell | None = None) -> TransitGame:
    return TransitGame(w, horizon, fail_prob, base)


def path_utility(game: TransitGame, patroller_path: list, evader_path: list) -> float:
    """Patroller utility of one pair of trajectories (positions at times ``1..d``)."""
    total = 0.0
    escaped = False
    for cp, ce in zip(patroller_path, evader_path):
        if escaped:
            break
        if ce == "escaped":
            total -= ESCAPE
            escaped = True
            continue
        total += STEP_COST + (ENCOUNTER if cp == ce else 0.0)
    return total
