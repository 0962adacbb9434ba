"""Flat strategy spaces and bilinear payoffs consumed by the solvers.

A :class:`StrategySpace` describes one player's strategy polytope.  For a
perfect-recall game tree it is the sequence-form treeplex (each infoset fed
by exactly one parent sequence with weight 1).  For Markov games such as the
transit game it is a flow polytope: a state at time ``t+1`` is fed by every
state-action pair at time ``t`` with the transition probability as weight.
The same kernels run on both.

A :class:`BilinearGame` pairs two spaces with a sparse payoff matrix so that
player 1's utility is ``x @ A @ y`` with ``x[0] = y[0] = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .efg import GameTree


@dataclass
class StrategySpace:
    action_ptr: np.ndarray
    in_ptr: np.ndarray
    in_seq: np.ndarray
    in_w: np.ndarray
    infoset_keys: list[str]
    action_labels: list[tuple[str, ...]]
    succ_ptr: np.ndarray = field(init=False)
    succ_info: np.ndarray = field(init=False)
    succ_w: np.ndarray = field(init=False)

    def __post_init__(self):
        self.action_ptr = np.ascontiguousarray(self.action_ptr, dtype=np.int64)
        self.in_ptr = np.ascontiguousarray(self.in_ptr, dtype=np.int64)
        self.in_seq = np.ascontiguousarray(self.in_seq, dtype=np.int64)
        self.in_w = np.ascontiguousarray(self.in_w, dtype=np.float64)
        n_info = len(self.action_ptr) - 1
        owner = np.repeat(np.arange(n_info), np.diff(self.in_ptr))
        order = np.argsort(self.in_seq, kind="stable")
        self.succ_info = np.ascontiguousarray(owner[order], dtype=np.int64)
        self.succ_w = np.ascontiguousarray(self.in_w[order])
        counts = np.bincount(self.in_seq, minlength=self.num_sequences)
        self.succ_ptr = np.zeros(self.num_sequences + 1, dtype=np.int64)
        self.succ_ptr[1:] = np.cumsum(counts)
        if (self.succ_info <= np.repeat(self._seq_owner(), counts)).any():
            raise ValueError("infosets are not in topological order")

    def _seq_owner(self) -> np.ndarray:
        owner = np.full(self.num_sequences, -1, dtype=np.int64)
        for j in range(self.num_infosets):
            owner[self.action_ptr[j]:self.action_ptr[j + 1]] = j
        return owner

    @property
    def num_sequences(self) -> int:
        return int(self.action_ptr[-1])

    @property
    def num_infosets(self) -> int:
        return len(self.action_ptr) - 1

    @property
    def max_actions(self) -> int:
        return int(np.diff(self.action_ptr).max()) if self.num_infosets else 1

    @property
    def kernel_args(self) -> tuple:
        return (self.action_ptr, self.in_ptr, self.in_seq, self.in_w,
                self.succ_ptr, self.succ_info, self.succ_w)

    # -- strategy helpers ---------------------------------------------------
    def uniform(self) -> np.ndarray:
        b = np.ones(self.num_sequences)
        for j in range(self.num_infosets):
            lo, hi = self.action_ptr[j], self.action_ptr[j + 1]
            b[lo:hi] = 1.0 / (hi - lo)
        return b

    def realize(self, behav: np.ndarray) -> np.ndarray:
        out = np.empty(self.num_sequences)
        K.realization(self.action_ptr, self.in_ptr, self.in_seq, self.in_w,
                      np.ascontiguousarray(behav, dtype=np.float64), out)
        return out

    def infoset_mass(self, x: np.ndarray) -> np.ndarray:
        """Inflow of each infoset under realization ``x``."""
        contrib = self.in_w * np.asarray(x)[self.in_seq]
        return np.add.reduceat(contrib, self.in_ptr[:-1]) if len(contrib) else np.zeros(0)

    def behavioral(self, x: np.ndarray) -> np.ndarray:
        """Behavioral strategy induced by ``x``; uniform where the inflow is 0."""
        x = np.asarray(x, dtype=float)
        b = np.ones(self.num_sequences)
        mass = self.infoset_mass(x)
        for j in range(self.num_infosets):
            lo, hi = self.action_ptr[j], self.action_ptr[j + 1]
            block = np.clip(x[lo:hi], 0.0, None)
            tot = block.sum()
            b[lo:hi] = block / tot if mass[j] > 0 and tot > 0 else 1.0 / (hi - lo)
        return b

    def flow_violation(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        mass = self.infoset_mass(x)
        sums = np.add.reduceat(x, self.action_ptr[:-1]) if self.num_infosets else np.zeros(0)
        viol = np.abs(mass - sums).max(initial=0.0)
        return float(max(viol, abs(x[0] - 1.0), max(0.0, -x.min())))

    def best_response(self, g: np.ndarray) -> tuple[float, np.ndarray]:
        """Maximize ``<g, x>``; returns the value and a pure behavioral strategy."""
        iv = np.empty(self.num_infosets)
        choice = np.zeros(self.num_infosets, dtype=np.int64)
        val = K.best_response(self.action_ptr, self.succ_ptr, self.succ_info, self.succ_w,
                              np.ascontiguousarray(g, dtype=np.float64), iv, choice)
        b = np.zeros(self.num_sequences)
        b[0] = 1.0
        b[self.action_ptr[:-1] + choice] = 1.0
        return float(val), b

    def max_infoset_weight(self) -> float:
        """``max`` over pure strategies of the summed infoset reach (own and flow weights)."""
        m = np.zeros(self.num_infosets)
        for j in range(self.num_infosets - 1, -1, -1):
            best = 0.0
            for s in range(self.action_ptr[j], self.action_ptr[j + 1]):
                lo, hi = self.succ_ptr[s], self.succ_ptr[s + 1]
                best = max(best, float(np.dot(self.succ_w[lo:hi], m[self.succ_info[lo:hi]])))
            m[j] = 1.0 + best
        lo, hi = self.succ_ptr[0], self.succ_ptr[1]
        return float(np.dot(self.succ_w[lo:hi], m[self.succ_info[lo:hi]]))

    def sample_point(self, rng: np.random.Generator, vertex: bool = False) -> np.ndarray:
        b = np.zeros(self.num_sequences)
        b[0] = 1.0
        for j in range(self.num_infosets):
            lo, hi = self.action_ptr[j], self.action_ptr[j + 1]
            if vertex:
                b[lo + rng.integers(hi - lo)] = 1.0
            else:
                b[lo:hi] = rng.dirichlet(np.ones(hi - lo))
        return self.realize(b)

    def sequence_labels(self) -> list[str]:
        out = ["∅"]
        for key, acts in zip(self.infoset_keys, self.action_labels):
            out.extend(f"{key}:{a}" for a in acts)
        return out


def _csr_arrays(m: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = m.tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return (np.ascontiguousarray(m.indptr, dtype=np.int64),
            np.ascontiguousarray(m.indices, dtype=np.int64),
            np.ascontiguousarray(m.data, dtype=np.float64))


class BilinearGame:
    """Zero-sum game ``max_x min_y x @ A @ y`` over two strategy spaces."""

    def __init__(self, space1: StrategySpace, space2: StrategySpace, payoff: sp.spmatrix,
                 utility_range: float, name: str = "game"):
        self.spaces = (space1, space2)
        self.payoff = sp.csr_matrix(payoff)
        if self.payoff.shape != (space1.num_sequences, space2.num_sequences):
            raise ValueError(f"payoff shape {self.payoff.shape} does not match spaces")
        self.utility_range = float(utility_range)
        self.name = name
        self._rows = _csr_arrays(self.payoff)
        self._cols = _csr_arrays(self.payoff.T.tocsr())

    @property
    def kernel_payoff(self) -> tuple:
        return self._rows + self._cols

    def value(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.asarray(x) @ (self.payoff @ np.asarray(y)))

    def gradient(self, player: int, other: np.ndarray) -> np.ndarray:
        """Per-sequence payoff of ``player`` against the opponent realization ``other``."""
        if player == 1:
            return np.asarray(self.payoff @ np.asarray(other)).ravel()
        return -np.asarray(self.payoff.T @ np.asarray(other)).ravel()

    def best_response(self, player: int, other: np.ndarray) -> tuple[float, np.ndarray]:
        """Best-response value (from ``player``'s side) and pure behavioral strategy."""
        return self.spaces[player - 1].best_response(self.gradient(player, other))

    def exploitability(self, x: np.ndarray, y: np.ndarray) -> float:
        """``(max_x' u(x', y) - min_y' u(x, y')) / 2``."""
        v1, _ = self.best_response(1, y)
        v2, _ = self.best_response(2, x)
        return 0.5 * (v1 + v2)

    def negated(self) -> "BilinearGame":
        """Swap seats so the former player 2 becomes the maximizer."""
        return BilinearGame(self.spaces[1], self.spaces[0], -self.payoff.T,
                            self.utility_range, name=f"{self.name}[swapped]")

    @property
    def max_actions(self) -> int:
        return max(s.max_actions for s in self.spaces)


def tree_space(game: GameTree, player: int) -> StrategySpace:
    idx = game.seq_index(player)
    n = idx.num_infosets
    return StrategySpace(
        action_ptr=idx.action_ptr.copy(),
        in_ptr=np.arange(n + 1),
        in_seq=idx.parent.copy(),
        in_w=np.ones(n),
        infoset_keys=[iset.key for iset in game.infosets[player - 1]],
        action_labels=[iset.actions for iset in game.infosets[player - 1]],
    )


def payoff_matrix(game: GameTree) -> sp.csr_matrix:
    """Sequence-form payoff: ``A[s1, s2] = sum pi_c(z) u(z)`` over terminals ending in (s1, s2)."""
    z = game.terminals
    n1 = game.seq_index(1).num_sequences
    n2 = game.seq_index(2).num_sequences
    vals = game.chance_reach[z] * game.utility[z]
    m = sp.coo_matrix((vals, (game.node_seq[0, z], game.node_seq[1, z])), shape=(n1, n2))
    return m.tocsr()


def from_tree(game: GameTree) -> BilinearGame:
    game.require_recall(1)
    game.require_recall(2)
    return BilinearGame(tree_space(game, 1), tree_space(game, 2), payoff_matrix(game),
                        game.utility_range, name=game.name)
