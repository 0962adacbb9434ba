"""Kuhn poker and Leduc Hold'em built from one parameterized rule set.

Cards are dealt at rank level: suits never matter for the outcome, so the
private deal is a chance node over ordered rank pairs with probabilities
obtained by counting card orderings.  Each node carries poker annotations
(private ranks, public action sequence, fold/showdown classification) used by
the observation simulator and the opponent-model constraint builder.

Action labels: ``k`` check, ``b`` bet, ``r`` raise, ``c`` call, ``f`` fold.
Public sequences write each betting round's actions, with the board rank
between slashes when one is dealt, e.g. ``"bc/K/kb"``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..efg import DECISION, TERMINAL, GameError, GameTree, TreeBuilder


@dataclass(frozen=True)
class PokerRules:
    ranks: tuple[str, ...]
    suits: int
    ante: float
    bet_sizes: tuple[float, ...]   # one per betting round
    max_raises: int                # bets plus raises allowed per round
    board_cards: int = 0           # public cards dealt before round 2

    @property
    def rounds(self) -> int:
        return len(self.bet_sizes)

    def private_deals(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Every ordered pair of distinct physical cards as ``((rank, suit), ...)``."""
        deck = [(r, s) for r in range(len(self.ranks)) for s in range(self.suits)]
        return list(itertools.permutations(deck, 2))

    def rank_deal_probs(self) -> dict[tuple[int, int], float]:
        deals = self.private_deals()
        out: dict[tuple[int, int], float] = {}
        for (r1, _), (r2, _) in deals:
            out[(r1, r2)] = out.get((r1, r2), 0.0) + 1.0 / len(deals)
        return out

    def board_probs(self, r1: int, r2: int) -> dict[int, float]:
        left = {r: self.suits - (r == r1) - (r == r2) for r in range(len(self.ranks))}
        total = sum(left.values())
        return {r: c / total for r, c in left.items() if c > 0}


KUHN = PokerRules(ranks=("J", "Q", "K"), suits=1, ante=1.0, bet_sizes=(1.0,), max_raises=1)
LEDUC = PokerRules(ranks=("J", "Q", "K"), suits=2, ante=1.0, bet_sizes=(2.0, 4.0),
                   max_raises=2, board_cards=1)

# (player, own rank, board rank or -1, per-round own-visible histories) -> infoset key
KeyFn = Callable[[int, int, int, tuple[str, ...]], str]


def _full_key(rules: PokerRules) -> KeyFn:
    def key(player: int, rank: int, board: int, rounds: tuple[str, ...]) -> str:
        return f"{rules.ranks[rank]}|{_public(rules, board, rounds)}"
    return key


def _public(rules: PokerRules, board: int, rounds: tuple[str, ...]) -> str:
    if board < 0:
        return rounds[0] if rounds else ""
    return f"{rounds[0]}/{rules.ranks[board]}/{rounds[1] if len(rounds) > 1 else ''}"


@dataclass
class PokerGame:
    """A poker :class:`GameTree` plus the annotations needed for opponent modeling."""

    rules: PokerRules
    tree: GameTree
    private: np.ndarray          # (num_nodes, 2) rank of each player's card, -1 before the deal
    public: list[str]            # public action sequence at each node
    fold: np.ndarray             # True at fold terminals
    public_keys: list[str] = field(init=False)

    def __post_init__(self):
        dealt = self.private[:, 0] >= 0
        self.public_keys = sorted({self.public[h] for h in np.flatnonzero(dealt)})
        self._public_id = {s: i for i, s in enumerate(self.public_keys)}

    @property
    def name(self) -> str:
        return self.tree.name

    @property
    def hands(self) -> tuple[str, ...]:
        return self.rules.ranks

    def public_id(self, s: str) -> int:
        return self._public_id[s]

    @property
    def showdown_terminals(self) -> np.ndarray:
        z = self.tree.terminals
        return z[~self.fold[z]]

    @property
    def fold_terminals(self) -> np.ndarray:
        z = self.tree.terminals
        return z[self.fold[z]]

    def node_at(self) -> dict[tuple[int, int, str], int]:
        """Map ``(rank1, rank2, public)`` to the unique node with that state."""
        out: dict[tuple[int, int, str], int] = {}
        for h in range(self.tree.num_nodes):
            if self.private[h, 0] >= 0:
                key = (int(self.private[h, 0]), int(self.private[h, 1]), self.public[h])
                if key in out:
                    raise GameError(f"state {key} appears twice")
                out[key] = h
        return out

    def game_hash(self) -> str:
        return self.tree.game_hash()


def build_poker(rules: PokerRules, name: str, key_fn: KeyFn | None = None) -> PokerGame:
    """Build the full tree for ``rules``; ``key_fn`` overrides infoset keys (abstractions)."""
    if rules.rounds > 1 and rules.board_cards != 1:
        raise GameError("multi-round games need exactly one board card")
    key_fn = key_fn or _full_key(rules)
    b = TreeBuilder(name)
    notes: dict[int, tuple[int, int, str, bool]] = {}
    n_ranks = len(rules.ranks)

    def showdown(r1: int, r2: int, board: int) -> int:
        def strength(r: int) -> tuple[int, int]:
            return (int(r == board), r)
        s1, s2 = strength(r1), strength(r2)
        return (s1 > s2) - (s1 < s2)

    def betting(r1, r2, board, rounds, rnd, hist, contrib, raises, facing):
        """Node for the current betting state; ``hist`` is this round's actions."""
        mover = 1 if len(hist) % 2 == 0 else 2
        all_rounds = rounds + (hist,)
        public = _public(rules, board, all_rounds)
        if facing:
            actions = ["f", "c"] + (["r"] if raises < rules.max_raises else [])
        else:
            actions = ["k", "b"] if raises < rules.max_raises else ["k"]
        kids = []
        for a in actions:
            h2 = hist + a
            c = list(contrib)
            me, opp = mover - 1, 2 - mover
            if a == "f":
                u = -c[0] if mover == 1 else c[1]
                z = b.terminal(u, f"{rules.ranks[r1]}{rules.ranks[r2]}:{public}{a}")
                notes[z] = (r1, r2, _public(rules, board, rounds + (h2,)), True)
                kids.append(z)
                continue
            if a in ("b", "r"):
                c[me] = c[opp] + rules.bet_sizes[rnd]
                kids.append(betting(r1, r2, board, rounds, rnd, h2, tuple(c), raises + 1, True))
                continue
            if a == "c":
                c[me] = c[opp]
            round_over = a == "c" or (a == "k" and len(hist) == 1)
            if not round_over:
                kids.append(betting(r1, r2, board, rounds, rnd, h2, tuple(c), raises, False))
            elif rnd + 1 < rules.rounds:
                kids.append(deal_board(r1, r2, rounds + (h2,), tuple(c)))
            else:
                w = showdown(r1, r2, board)
                u = c[1] if w > 0 else (-c[0] if w < 0 else 0.0)
                pub = _public(rules, board, rounds + (h2,))
                z = b.terminal(u, f"{rules.ranks[r1]}{rules.ranks[r2]}:{pub}")
                notes[z] = (r1, r2, pub, False)
                kids.append(z)
        own = (r1, r2)[mover - 1]
        node = b.decision(mover, f"P{mover}:" + key_fn(mover, own, board, all_rounds), actions,
                          kids, f"{rules.ranks[r1]}{rules.ranks[r2]}:{public}")
        notes[node] = (r1, r2, public, False)
        return node

    def deal_board(r1, r2, rounds, contrib):
        probs = rules.board_probs(r1, r2)
        kids = [betting(r1, r2, r, rounds, len(rounds), "", contrib, 0, False) for r in probs]
        node = b.chance(kids, list(probs.values()),
                        f"{rules.ranks[r1]}{rules.ranks[r2]}:{rounds[0]}/?")
        notes[node] = (r1, r2, rounds[0], False)
        return node

    deals = rules.rank_deal_probs()
    kids = [betting(r1, r2, -1, (), 0, "", (rules.ante, rules.ante), 0, False) for r1, r2 in deals]
    root = b.chance(kids, list(deals.values()), "deal")
    tree = b.build(root)

    n = tree.num_nodes
    private = np.full((n, 2), -1, dtype=np.int64)
    public = [""] * n
    fold = np.zeros(n, dtype=bool)
    for old, (r1, r2, pub, is_fold) in notes.items():
        h = b.renumbering[old]
        private[h] = (r1, r2)
        public[h] = pub
        fold[h] = is_fold
    assert n_ranks == len(rules.ranks)
    return PokerGame(rules, tree, private, public, fold)


def build_kuhn() -> GameTree:
    """Three-card Kuhn poker (ante 1, one bet of 1); game value -1/18."""
    return kuhn_poker().tree


def kuhn_poker() -> PokerGame:
    return build_poker(KUHN, "kuhn")


def build_leduc(bet_sizes: tuple[float, float] = (2.0, 4.0), max_raises: int = 2) -> GameTree:
    return leduc_poker(bet_sizes, max_raises).tree


def leduc_poker(bet_sizes: tuple[float, float] = (2.0, 4.0), max_raises: int = 2) -> PokerGame:
    """Leduc Hold'em: two suits of J, Q, K, ante 1, one board card after round 1."""
    rules = PokerRules(LEDUC.ranks, LEDUC.suits, LEDUC.ante, tuple(bet_sizes), max_raises, 1)
    return build_poker(rules, "leduc")


# ------------------------------------------------------------------ abstraction
ABSTRACTIONS = {
    # preflop buckets, postflop split on pairing the board
    "JQ.K/pair.nopair": {"J": "JQ", "Q": "JQ", "K": "K"},
}


@dataclass
class Abstraction:
    """An information abstraction of Leduc and the lift back to the full game.

    Both trees share node ids; only the infoset partition differs.
    """

    name: str
    full: PokerGame
    abstract: PokerGame
    infoset_map: tuple[np.ndarray, np.ndarray]   # full infoset -> abstract infoset, per player

    def lift(self, probs: np.ndarray, player: int) -> np.ndarray:
        """Full-game behavioral probabilities from abstract ones (flat sequence layout)."""
        fidx = self.full.tree.seq_index(player)
        aidx = self.abstract.tree.seq_index(player)
        out = np.ones(fidx.num_sequences)
        for j, a in enumerate(self.infoset_map[player - 1]):
            out[fidx.action_ptr[j]:fidx.action_ptr[j + 1]] = \
                probs[aidx.action_ptr[a]:aidx.action_ptr[a + 1]]
        return out


def build_leduc_abstraction(name: str = "JQ.K/pair.nopair",
                            bet_sizes: tuple[float, float] = (2.0, 4.0),
                            max_raises: int = 2) -> Abstraction:
    if name not in ABSTRACTIONS:
        raise GameError(f"unknown abstraction {name!r}; known: {sorted(ABSTRACTIONS)}")
    buckets = ABSTRACTIONS[name]
    full = leduc_poker(bet_sizes, max_raises)
    rules = full.rules

    def key(player: int, rank: int, board: int, rounds: tuple[str, ...]) -> str:
        pre = buckets[rules.ranks[rank]]
        if board < 0:
            return f"{pre}|{rounds[0]}"
        paired = "pair" if rank == board else "nopair"
        return f"{pre}.{paired}|{rounds[0]}/{rounds[1]}"

    abstract = build_poker(rules, f"leduc[{name}]", key_fn=key)
    ft, at = full.tree, abstract.tree
    if ft.num_nodes != at.num_nodes or (ft.kind != at.kind).any():
        raise GameError("abstract tree does not share the full tree's shape")
    maps = []
    for p in (1, 2):
        m = np.full(ft.num_infosets(p), -1, dtype=np.int64)
        for j, iset in enumerate(ft.infosets[p - 1]):
            targets = {int(at.infoset[h]) for h in iset.members}
            if len(targets) != 1:
                raise GameError(f"full infoset {iset.key} straddles abstract infosets")
            m[j] = targets.pop()
        maps.append(m)
    return Abstraction(name, full, abstract, (maps[0], maps[1]))


def is_fold_invariant(game: PokerGame) -> bool:
    """Fold terminals with equal public sequences have equal utilities."""
    seen: dict[str, float] = {}
    for z in game.fold_terminals:
        u = float(game.tree.utility[z])
        if seen.setdefault(game.public[z], u) != u:
            return False
    return True


def decision_nodes(game: PokerGame) -> np.ndarray:
    return np.flatnonzero(game.tree.kind == DECISION)


def terminal_nodes(game: PokerGame) -> np.ndarray:
    return np.flatnonzero(game.tree.kind == TERMINAL)
