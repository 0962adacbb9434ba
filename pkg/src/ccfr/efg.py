"""Two-player zero-sum extensive-form games.

A :class:`GameTree` is an immutable, index-based arena of nodes stored in
breadth-first order, so every parent precedes its children and every
information set appears after the information sets that lead to it.  Only
player 1's utility is stored; player 2 receives its negation.

Strategies come in two flavours that share one flat layout per player (the
:class:`SequenceIndex`): slot 0 is the empty sequence and each information set
owns a contiguous block of ``(infoset, action)`` slots.

* :class:`BehavioralStrategy` holds ``sigma(I, a)`` in those slots.
* :class:`SequenceFormStrategy` holds realization weights ``x[(I, a)]``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TERMINAL = 0
CHANCE = 1
DECISION = 2

_KIND_NAMES = {TERMINAL: "terminal", CHANCE: "chance", DECISION: "decision"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class GameError(ValueError):
    """Raised for malformed games or strategies that do not fit a game."""


@dataclass(frozen=True)
class Infoset:
    player: int
    key: str
    actions: tuple[str, ...]
    members: tuple[int, ...]

    @property
    def num_actions(self) -> int:
        return len(self.actions)


class SequenceIndex:
    """Dense sequence numbering for one player.

    ``action_ptr[j]:action_ptr[j+1]`` are the sequence ids of infoset ``j``;
    ``parent[j]`` is the sequence that enters infoset ``j`` (0 for the empty
    sequence).  ``infoset_of[s]`` maps a sequence back to its infoset (-1 for
    the empty sequence).
    """

    def __init__(self, player: int, infosets: Sequence[Infoset], parent: Sequence[int]):
        self.player = player
        self.num_infosets = len(infosets)
        sizes = [iset.num_actions for iset in infosets]
        self.action_ptr = np.zeros(self.num_infosets + 1, dtype=np.int64)
        self.action_ptr[0] = 1
        if sizes:
            self.action_ptr[1:] = 1 + np.cumsum(sizes)
        self.num_sequences = int(self.action_ptr[-1])
        self.parent = np.asarray(parent, dtype=np.int64)
        self.infoset_of = np.full(self.num_sequences, -1, dtype=np.int64)
        self.action_of = np.full(self.num_sequences, -1, dtype=np.int64)
        for j in range(self.num_infosets):
            lo, hi = self.action_ptr[j], self.action_ptr[j + 1]
            self.infoset_of[lo:hi] = j
            self.action_of[lo:hi] = np.arange(hi - lo)
        self._labels = ["∅"] + [
            f"{iset.key}:{a}" for iset in infosets for a in iset.actions
        ]

    def seq(self, infoset: int, action: int) -> int:
        return int(self.action_ptr[infoset] + action)

    def actions(self, infoset: int) -> range:
        return range(int(self.action_ptr[infoset]), int(self.action_ptr[infoset + 1]))

    def children_infosets(self, seq: int) -> np.ndarray:
        return np.flatnonzero(self.parent == seq)

    def label(self, seq: int) -> str:
        return self._labels[seq]

    @property
    def labels(self) -> list[str]:
        return list(self._labels)


class GameTree:
    """Immutable extensive-form game; build one with :class:`TreeBuilder`."""

    def __init__(
        self,
        kind: np.ndarray,
        player: np.ndarray,
        infoset: np.ndarray,
        child_ptr: np.ndarray,
        children: np.ndarray,
        edge_prob: np.ndarray,
        utility: np.ndarray,
        labels: list[str],
        infosets: tuple[tuple[Infoset, ...], tuple[Infoset, ...]],
        name: str = "game",
    ):
        self.kind = kind
        self.player = player
        self.infoset = infoset
        self.child_ptr = child_ptr
        self.children = children
        self.edge_prob = edge_prob
        self.utility = utility
        self.labels = labels
        self.infosets = infosets
        self.name = name
        for arr in (kind, player, infoset, child_ptr, children, edge_prob, utility):
            arr.setflags(write=False)

        n = len(kind)
        self.num_nodes = n
        self.parent = np.full(n, -1, dtype=np.int64)
        self.parent_action = np.full(n, -1, dtype=np.int64)
        for h in range(n):
            for k, c in enumerate(self.children_of(h)):
                if self.parent[c] != -1:
                    raise GameError(f"node {c} has two parents")
                self.parent[c] = h
                self.parent_action[c] = k
        if n and (self.parent[1:] < 0).any():
            raise GameError("unreachable node in tree")
        self.depth = np.zeros(n, dtype=np.int64)
        for h in range(1, n):
            self.depth[h] = self.depth[self.parent[h]] + 1
        self._check()
        self.perfect_recall = (self._check_recall(1), self._check_recall(2))
        self._build_sequences()
        self.terminals = np.flatnonzero(self.kind == TERMINAL)
        self.chance_reach = self._chance_reach()

    # ------------------------------------------------------------------ basics
    def children_of(self, h: int) -> np.ndarray:
        return self.children[self.child_ptr[h]:self.child_ptr[h + 1]]

    def chance_probs(self, h: int) -> np.ndarray:
        return self.edge_prob[self.child_ptr[h]:self.child_ptr[h + 1]]

    def infoset_obj(self, h: int) -> Infoset:
        return self.infosets[self.player[h] - 1][self.infoset[h]]

    def num_infosets(self, player: int) -> int:
        return len(self.infosets[player - 1])

    def path(self, h: int) -> list[int]:
        """Nodes from the root down to ``h`` inclusive."""
        out = [h]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    def utility_for(self, z: int, player: int) -> float:
        u = float(self.utility[z])
        return u if player == 1 else -u

    @property
    def utility_range(self) -> float:
        u = self.utility[self.terminals]
        return float(u.max() - u.min()) if len(u) else 0.0

    @property
    def max_actions(self) -> int:
        return max(
            (iset.num_actions for isets in self.infosets for iset in isets), default=1
        )

    # ---------------------------------------------------------------- checking
    def _check(self) -> None:
        for h in range(self.num_nodes):
            k = self.kind[h]
            nchild = self.child_ptr[h + 1] - self.child_ptr[h]
            if k == TERMINAL:
                if nchild:
                    raise GameError(f"terminal node {h} has children")
            elif nchild == 0:
                raise GameError(f"non-terminal node {h} has no children")
            if k == CHANCE:
                p = self.chance_probs(h)
                if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                    raise GameError(f"chance node {h} probabilities invalid: {p}")
            if k == DECISION:
                iset = self.infoset_obj(h)
                if iset.num_actions != nchild:
                    raise GameError(f"node {h} action count differs from its infoset")

    def _own_history(self, h: int, player: int) -> tuple[tuple[int, int], ...]:
        path = self.path(h)
        return tuple(
            (int(self.infoset[node]), int(self.parent_action[nxt]))
            for node, nxt in zip(path[:-1], path[1:])
            if self.kind[node] == DECISION and self.player[node] == player
        )

    def _check_recall(self, player: int) -> bool:
        for iset in self.infosets[player - 1]:
            hists = {self._own_history(h, player) for h in iset.members}
            if len(hists) > 1:
                return False
        return True

    def _build_sequences(self) -> None:
        self.sequences: list[SequenceIndex] = []
        self.node_seq = np.zeros((2, self.num_nodes), dtype=np.int64)
        for p in (1, 2):
            isets = self.infosets[p - 1]
            idx_stub = SequenceIndex(p, isets, [0] * len(isets))
            seq_at = np.zeros(self.num_nodes, dtype=np.int64)
            parent = np.full(len(isets), -1, dtype=np.int64)
            for h in range(self.num_nodes):
                if h > 0:
                    ph = self.parent[h]
                    if self.kind[ph] == DECISION and self.player[ph] == p:
                        seq_at[h] = idx_stub.seq(int(self.infoset[ph]), int(self.parent_action[h]))
                    else:
                        seq_at[h] = seq_at[ph]
                if self.kind[h] == DECISION and self.player[h] == p:
                    j = self.infoset[h]
                    if parent[j] == -1:
                        parent[j] = seq_at[h]
            self.node_seq[p - 1] = seq_at
            self.sequences.append(SequenceIndex(p, isets, parent))
        self.node_seq.setflags(write=False)

    def _chance_reach(self) -> np.ndarray:
        reach = np.ones(self.num_nodes)
        for h in range(self.num_nodes):
            if self.kind[h] == CHANCE:
                kids = self.children_of(h)
                reach[kids] = reach[h] * self.chance_probs(h)
            elif self.kind[h] == DECISION:
                reach[self.children_of(h)] = reach[h]
        reach.setflags(write=False)
        return reach

    def seq_index(self, player: int) -> SequenceIndex:
        return self.sequences[player - 1]

    def require_recall(self, player: int) -> None:
        if not self.perfect_recall[player - 1]:
            raise GameError(f"player {player} does not have perfect recall in {self.name}")

    # ----------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        nodes = []
        for h in range(self.num_nodes):
            k = int(self.kind[h])
            node = {"kind": _KIND_NAMES[k], "label": self.labels[h]}
            if k == TERMINAL:
                node["utility"] = float(self.utility[h])
            else:
                node["children"] = [int(c) for c in self.children_of(h)]
            if k == CHANCE:
                node["probs"] = [float(p) for p in self.chance_probs(h)]
            if k == DECISION:
                node["player"] = int(self.player[h])
                node["infoset"] = self.infoset_obj(h).key
            nodes.append(node)
        infosets = [
            {"player": iset.player, "key": iset.key, "actions": list(iset.actions)}
            for isets in self.infosets
            for iset in isets
        ]
        return {"format": "ccfr-efg/1", "name": self.name, "root": 0,
                "nodes": nodes, "infosets": infosets}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "GameTree":
        if data.get("format") != "ccfr-efg/1":
            raise GameError(f"unknown game format {data.get('format')!r}")
        actions = {(d["player"], d["key"]): tuple(d["actions"]) for d in data["infosets"]}
        b = TreeBuilder(name=data.get("name", "game"))
        nodes = data["nodes"]
        created: dict[int, int] = {}

        # children listed by index; create in post-order
        order = []
        stack = [(data.get("root", 0), False)]
        while stack:
            h, done = stack.pop()
            if done:
                order.append(h)
                continue
            stack.append((h, True))
            for c in reversed(nodes[h].get("children", [])):
                stack.append((c, False))
        for h in order:
            nd = nodes[h]
            kids = [created[c] for c in nd.get("children", [])]
            kind = nd["kind"]
            if kind == "terminal":
                created[h] = b.terminal(nd["utility"], nd.get("label"))
            elif kind == "chance":
                created[h] = b.chance(kids, nd["probs"], nd.get("label"))
            elif kind == "decision":
                key = nd["infoset"]
                created[h] = b.decision(nd["player"], key, actions[(nd["player"], key)],
                                        kids, nd.get("label"))
            else:
                raise GameError(f"unknown node kind {kind!r}")
        return b.build(created[data.get("root", 0)])

    @classmethod
    def from_json(cls, text: str) -> "GameTree":
        return cls.from_dict(json.loads(text))

    def game_hash(self) -> str:
        """Stable digest of topology, probabilities, infosets and utilities."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return (f"GameTree({self.name!r}, nodes={self.num_nodes}, "
                f"terminals={len(self.terminals)}, infosets="
                f"{self.num_infosets(1)}/{self.num_infosets(2)})")


class TreeBuilder:
    """Bottom-up construction: create children first, then their parent.

    >>> b = TreeBuilder()
    >>> z1, z2 = b.terminal(1.0), b.terminal(-1.0)
    >>> root = b.decision(1, "root", ("L", "R"), [z1, z2])
    >>> b.build(root).num_nodes
    3
    """

    def __init__(self, name: str = "game"):
        self.name = name
        self._kind: list[int] = []
        self._player: list[int] = []
        self._key: list[str | None] = []
        self._children: list[list[int]] = []
        self._probs: list[list[float]] = []
        self._utility: list[float] = []
        self._labels: list[str] = []
        self._actions: dict[tuple[int, str], tuple[str, ...]] = {}

    def _add(self, kind, player, key, children, probs, utility, label) -> int:
        self._kind.append(kind)
        self._player.append(player)
        self._key.append(key)
        self._children.append(list(children))
        self._probs.append(list(probs))
        self._utility.append(float(utility))
        self._labels.append(label if label is not None else "")
        return len(self._kind) - 1

    def terminal(self, utility: float, label: str | None = None) -> int:
        return self._add(TERMINAL, 0, None, [], [], utility, label)

    def chance(self, children: Sequence[int], probs: Sequence[float], label: str | None = None) -> int:
        if len(children) != len(probs):
            raise GameError("chance node needs one probability per child")
        return self._add(CHANCE, 0, None, children, [float(p) for p in probs], 0.0, label)

    def decision(self, player: int, key: str, actions: Sequence[str],
                 children: Sequence[int], label: str | None = None) -> int:
        if player not in (1, 2):
            raise GameError(f"player must be 1 or 2, got {player}")
        actions = tuple(actions)
        if len(actions) != len(children):
            raise GameError(f"infoset {key!r}: {len(actions)} actions, {len(children)} children")
        prev = self._actions.setdefault((player, key), actions)
        if prev != actions:
            raise GameError(f"infoset {key!r} has inconsistent action lists {prev} vs {actions}")
        return self._add(DECISION, player, key, children, [], 0.0, label)

    def build(self, root: int) -> GameTree:
        # breadth-first renumbering
        order = [root]
        i = 0
        while i < len(order):
            order.extend(self._children[order[i]])
            i += 1
        if len(set(order)) != len(order):
            raise GameError("node reused: the structure is not a tree")
        new_id = {old: new for new, old in enumerate(order)}
        self.renumbering = new_id
        n = len(order)
        kind = np.array([self._kind[o] for o in order], dtype=np.int8)
        player = np.array([self._player[o] for o in order], dtype=np.int8)
        child_ptr = np.zeros(n + 1, dtype=np.int64)
        children, probs = [], []
        for k, o in enumerate(order):
            children.extend(new_id[c] for c in self._children[o])
            probs.extend(self._probs[o] if self._kind[o] == CHANCE
                         else [np.nan] * len(self._children[o]))
            child_ptr[k + 1] = len(children)
        utility = np.array([self._utility[o] for o in order])

        members: dict[tuple[int, str], list[int]] = {}
        for k, o in enumerate(order):
            if self._kind[o] == DECISION:
                members.setdefault((self._player[o], self._key[o]), []).append(k)
        isets: list[list[Infoset]] = [[], []]
        iset_id = np.full(n, -1, dtype=np.int64)
        for (p, key), mem in members.items():  # dict keeps first-appearance order
            j = len(isets[p - 1])
            isets[p - 1].append(Infoset(p, key, self._actions[(p, key)], tuple(mem)))
            iset_id[mem] = j
        return GameTree(
            kind=kind, player=player, infoset=iset_id, child_ptr=child_ptr,
            children=np.array(children, dtype=np.int64), edge_prob=np.array(probs),
            utility=utility, labels=[self._labels[o] for o in order],
            infosets=(tuple(isets[0]), tuple(isets[1])), name=self.name,
        )


# ---------------------------------------------------------------- strategies
@dataclass
class BehavioralStrategy:
    """Per-infoset action distributions in the player's sequence layout."""

    player: int
    probs: np.ndarray

    def at(self, game: GameTree, infoset: int) -> np.ndarray:
        idx = game.seq_index(self.player)
        lo, hi = idx.action_ptr[infoset], idx.action_ptr[infoset + 1]
        return self.probs[lo:hi]

    def action_prob(self, game: GameTree, h: int, action: int) -> float:
        idx = game.seq_index(self.player)
        return float(self.probs[idx.seq(int(game.infoset[h]), action)])

    def check(self, game: GameTree, tol: float = 1e-12) -> None:
        idx = game.seq_index(self.player)
        if self.probs.shape != (idx.num_sequences,):
            raise GameError("behavioral strategy has wrong length")
        for j in range(idx.num_infosets):
            p = self.at(game, j)
            if (p < -tol).any() or abs(p.sum() - 1.0) > tol:
                raise GameError(
                    f"distribution at {game.infosets[self.player - 1][j].key} "
                    f"is not a probability vector: {p}")

    def to_dict(self, game: GameTree) -> dict:
        return {
            iset.key: dict(zip(iset.actions, map(float, self.at(game, j))))
            for j, iset in enumerate(game.infosets[self.player - 1])
        }


@dataclass
class SequenceFormStrategy:
    player: int
    x: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.x, dtype=dtype)


def uniform_strategy(game: GameTree, player: int) -> BehavioralStrategy:
    idx = game.seq_index(player)
    probs = np.ones(idx.num_sequences)
    for j in range(idx.num_infosets):
        lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
        probs[lo:hi] = 1.0 / (hi - lo)
    return BehavioralStrategy(player, probs)


def pure_strategy(game: GameTree, player: int, choice: Sequence[int]) -> BehavioralStrategy:
    """Behavioral strategy playing action ``choice[j]`` at infoset ``j``."""
    idx = game.seq_index(player)
    probs = np.zeros(idx.num_sequences)
    probs[0] = 1.0
    for j, a in enumerate(choice):
        probs[idx.seq(j, a)] = 1.0
    return BehavioralStrategy(player, probs)


def random_strategy(game: GameTree, player: int, rng: np.random.Generator) -> BehavioralStrategy:
    idx = game.seq_index(player)
    probs = np.ones(idx.num_sequences)
    for j in range(idx.num_infosets):
        lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
        probs[lo:hi] = rng.dirichlet(np.ones(hi - lo))
    return BehavioralStrategy(player, probs)


def seq_of(behavioral: BehavioralStrategy, game: GameTree) -> SequenceFormStrategy:
    """Sequence form: ``x[(I,a)] = pi_i(I) * sigma(I,a)``."""
    p = behavioral.player
    game.require_recall(p)
    behavioral.check(game, tol=1e-9)
    idx = game.seq_index(p)
    x = np.zeros(idx.num_sequences)
    x[0] = 1.0
    for j in range(idx.num_infosets):
        lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
        x[lo:hi] = x[idx.parent[j]] * behavioral.probs[lo:hi]
    return SequenceFormStrategy(p, x)


def behavioral_of(x: SequenceFormStrategy, game: GameTree) -> BehavioralStrategy:
    """Inverse of :func:`seq_of`; unreached infosets get the uniform distribution."""
    idx = game.seq_index(x.player)
    xv = np.asarray(x.x, dtype=float)
    probs = np.ones(idx.num_sequences)
    for j in range(idx.num_infosets):
        lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
        mass = xv[idx.parent[j]]
        if mass > 0:
            block = np.clip(xv[lo:hi], 0.0, None)
            probs[lo:hi] = block / block.sum() if block.sum() > 0 else 1.0 / (hi - lo)
        else:
            probs[lo:hi] = 1.0 / (hi - lo)
    return BehavioralStrategy(x.player, probs)


@dataclass
class ValidationReport:
    empty: float
    nonnegativity: float
    flow: float
    worst_infoset: int = -1

    @property
    def max_violation(self) -> float:
        return max(self.empty, self.nonnegativity, self.flow)

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-9

    def __bool__(self) -> bool:
        return self.ok


def validate(x: SequenceFormStrategy, game: GameTree) -> ValidationReport:
    """Largest violation of ``x_empty = 1``, ``x >= 0`` and the flow equalities."""
    idx = game.seq_index(x.player)
    xv = np.asarray(x.x, dtype=float)
    if xv.shape != (idx.num_sequences,):
        raise GameError(f"expected {idx.num_sequences} entries, got {xv.shape}")
    flow, worst = 0.0, -1
    for j in range(idx.num_infosets):
        lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
        r = abs(xv[idx.parent[j]] - xv[lo:hi].sum())
        if r > flow:
            flow, worst = r, j
    return ValidationReport(
        empty=abs(xv[0] - 1.0),
        nonnegativity=float(max(0.0, -xv.min())),
        flow=float(flow),
        worst_infoset=worst,
    )


# ------------------------------------------------------------ tree semantics
Profile = tuple[BehavioralStrategy, BehavioralStrategy]


@dataclass
class Reach:
    total: float
    player1: float
    player2: float
    chance: float

    def __iter__(self):
        return iter((self.total, self.player1, self.player2, self.chance))


def reach_probability(profile: Profile, h: int, game: GameTree) -> Reach:
    """Reach of node ``h`` split into the two players' and chance's factors."""
    f = {0: 1.0, 1: 1.0, 2: 1.0}
    path = game.path(h)
    for node, nxt in zip(path[:-1], path[1:]):
        a = int(game.parent_action[nxt])
        if game.kind[node] == CHANCE:
            f[0] *= float(game.chance_probs(node)[a])
        else:
            p = int(game.player[node])
            f[p] *= profile[p - 1].action_prob(game, node, a)
    return Reach(f[0] * f[1] * f[2], f[1], f[2], f[0])


def expected_utility(x: SequenceFormStrategy, y: SequenceFormStrategy, game: GameTree) -> float:
    """Player-1 expected utility ``sum_z pi_c(z) x_z y_z u(z)``."""
    z = game.terminals
    xs = np.asarray(x.x)[game.node_seq[0, z]]
    ys = np.asarray(y.x)[game.node_seq[1, z]]
    return float(np.sum(game.chance_reach[z] * xs * ys * game.utility[z]))


def expected_utility_tree(profile: Profile, game: GameTree, h: int = 0) -> float:
    """Recursive evaluation of player-1 utility from node ``h`` (test oracle)."""
    k = game.kind[h]
    if k == TERMINAL:
        return float(game.utility[h])
    kids = game.children_of(h)
    if k == CHANCE:
        w = game.chance_probs(h)
    else:
        w = profile[game.player[h] - 1].at(game, int(game.infoset[h]))
    return float(sum(wi * expected_utility_tree(profile, game, int(c))
                     for wi, c in zip(w, kids) if wi != 0))


def counterfactual_value(game: GameTree, profile: Profile, infoset: int, player: int,
                         action: int | None = None) -> float:
    """Counterfactual value of an infoset (or of one of its actions) for ``player``.

    Sums, over member histories, the opponent-and-chance reach times the
    expected utility of continuing from that history with ``profile``
    (forcing ``action`` at the infoset when given).
    """
    game.require_recall(player)
    iset = game.infosets[player - 1][infoset]

    def cont(h: int, forced: bool) -> float:
        k = game.kind[h]
        if k == TERMINAL:
            return game.utility_for(h, player)
        kids = game.children_of(h)
        if k == CHANCE:
            w = game.chance_probs(h)
        elif forced and game.player[h] == player and game.infoset[h] == infoset:
            w = np.zeros(len(kids))
            w[action] = 1.0
        else:
            w = profile[game.player[h] - 1].at(game, int(game.infoset[h]))
        return sum(wi * cont(int(c), forced) for wi, c in zip(w, kids) if wi != 0)

    total = 0.0
    for h in iset.members:
        r = reach_probability(profile, h, game)
        opp = r.chance * (r.player2 if player == 1 else r.player1)
        if opp == 0:
            continue
        total += opp * cont(h, action is not None)
    return float(total)


def enumerate_pure_strategies(game: GameTree, player: int) -> Iterable[BehavioralStrategy]:
    """All pure behavioral strategies (only for tiny games)."""
    import itertools

    sizes = [iset.num_actions for iset in game.infosets[player - 1]]
    for choice in itertools.product(*[range(s) for s in sizes]):
        yield pure_strategy(game, player, choice)
