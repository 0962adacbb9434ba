"""Constraints on an opponent's strategy from partially observed poker games.

We play a probe strategy against the opponent and see our own hand and the
public actions of every game, but the opponent's hand only at showdowns.
Two families of interval constraints on the opponent's realization plan are
built from these logs:

* for each own hand ``c`` and public node ``s``: how often we hold ``c`` and
  ``s`` is reached, ``pi_i(c, s) * sum_o pi_c(c, o, s) x_opp[o, s]``;
* for each showdown terminal ``z``: how often ``z`` is reached,
  ``pi_i(z) * pi_c(z) * x_opp[z]``.

Each frequency gets a Wilson interval ``[L, U]``, which becomes the two
linear constraints ``a @ x - U <= 0`` and ``L - a @ x <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..efg import CHANCE, DECISION
from ..games.poker import PokerGame
from .base import ConstraintError, ConstraintSet, LinearConstraint
from .stats import wilson_interval

LOG_FORMAT = "ccfr-observations/1"
NO_HAND = -1


# ------------------------------------------------------------------ profiles
def probe_strategy(game: PokerGame, player: int) -> np.ndarray:
    """Uniform over the non-fold actions at each of ``player``'s infosets."""
    idx = game.tree.seq_index(player)
    b = np.ones(idx.num_sequences)
    for j, iset in enumerate(game.tree.infosets[player - 1]):
        ok = np.array([a != "f" for a in iset.actions], dtype=float)
        b[idx.action_ptr[j]:idx.action_ptr[j + 1]] = ok / ok.sum()
    return b


def realization(game: PokerGame, player: int, behav: np.ndarray) -> np.ndarray:
    from ..regret import as_bilinear

    return as_bilinear(game.tree).spaces[player - 1].realize(behav)


def node_reach(game: PokerGame, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    t = game.tree
    return t.chance_reach * x1[t.node_seq[0]] * x2[t.node_seq[1]]


# ---------------------------------------------------------------- public tree
@dataclass
class PublicTree:
    """Public-node structure shared by all deals."""

    keys: list[str]                      # public sequences, parents before children
    parent: np.ndarray                   # parent public id (-1 at the root)
    actor: np.ndarray                    # 1/2 for decision nodes, 0 chance, -1 terminal
    prefixes: list[np.ndarray]           # public ids from the root to each node


def public_tree(game: PokerGame) -> PublicTree:
    t = game.tree
    dealt = np.flatnonzero(game.private[:, 0] >= 0)
    order = sorted(dealt, key=lambda h: (t.depth[h], h))
    keys: list[str] = []
    ids: dict[str, int] = {}
    parent, actor = [], []
    for h in order:
        s = game.public[h]
        if s in ids:
            continue
        ids[s] = len(keys)
        keys.append(s)
        p = int(t.parent[h])
        parent.append(ids[game.public[p]] if p >= 0 and game.private[p, 0] >= 0 else -1)
        actor.append(int(t.player[h]) if t.kind[h] == DECISION else (0 if t.kind[h] == CHANCE else -1))
    parent_arr = np.array(parent, dtype=np.int64)
    prefixes = []
    for i in range(len(keys)):
        chain = [i]
        while parent_arr[chain[-1]] >= 0:
            chain.append(int(parent_arr[chain[-1]]))
        prefixes.append(np.array(chain[::-1], dtype=np.int64))
    return PublicTree(keys, parent_arr, np.array(actor, dtype=np.int64), prefixes)


# -------------------------------------------------------------- observations
@dataclass
class ObservationLog:
    """Games seen from the probe player's seat.

    ``records`` rows are ``(own hand, final public-sequence id, opponent hand
    or -1)``; the opponent hand is present exactly at showdowns.
    """

    game_hash: str
    probe_player: int
    probe: str
    public_keys: list[str]
    records: np.ndarray

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=np.int64).reshape(-1, 3)

    @property
    def n(self) -> int:
        return len(self.records)

    def save(self, path) -> None:
        lines = [f"# format: {LOG_FORMAT}",
                 f"# game_hash: {self.game_hash}",
                 f"# probe_player: {self.probe_player}",
                 f"# probe: {self.probe}",
                 f"# public_sequences: {len(self.public_keys)}"]
        lines += [f"# public {i} {s if s else '-'}" for i, s in enumerate(self.public_keys)]
        lines.append("# columns: own_hand public_sequence_id opponent_hand(-1 = hidden)")
        lines += [f"{a} {b} {c}" for a, b, c in self.records]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ObservationLog":
        meta: dict[str, str] = {}
        keys: list[str] = []
        rows = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("# public "):
                _, _, i, s = line.split(" ", 3)
                keys.append("" if s == "-" else s)
            elif line.startswith("#"):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            elif line.strip():
                rows.append([int(v) for v in line.split()])
        if meta.get("format") != LOG_FORMAT:
            raise ValueError(f"{path}: not an observation log")
        return cls(meta["game_hash"], int(meta["probe_player"]), meta["probe"], keys,
                   np.array(rows, dtype=np.int64).reshape(-1, 3))


def simulate_observations(game: PokerGame, target: tuple[np.ndarray, np.ndarray],
                          probe_player: int, n: int, seed: int) -> ObservationLog:
    """Play ``n`` games of the probe against the target's other seat.

    ``target`` holds behavioral strategies for both seats; only the
    opponent's seat is used.  Games are i.i.d., so the terminal counts are
    one multinomial draw from the exact terminal distribution; records are
    then listed in a random order.
    """
    if n < 1:
        raise ValueError("need at least one game")
    if not hasattr(game, "fold"):
        raise ConstraintError("game has no fold/showdown classification")
    rng = np.random.default_rng(seed)
    opp = 3 - probe_player
    beh = [None, None]
    beh[probe_player - 1] = probe_strategy(game, probe_player)
    beh[opp - 1] = np.asarray(target[opp - 1], dtype=float)
    x1, x2 = realization(game, 1, beh[0]), realization(game, 2, beh[1])
    z = game.tree.terminals
    p = np.clip(node_reach(game, x1, x2)[z], 0.0, None)
    counts = rng.multinomial(n, p / p.sum())
    pub = {s: i for i, s in enumerate(game.public_keys)}
    rows = []
    for zi, c in zip(z, counts):
        if c == 0:
            continue
        own = int(game.private[zi, probe_player - 1])
        other = NO_HAND if game.fold[zi] else int(game.private[zi, opp - 1])
        rows.append(np.tile([own, pub[game.public[zi]], other], (int(c), 1)))
    records = np.concatenate(rows)[rng.permutation(n)]
    return ObservationLog(game.game_hash(), probe_player, "uniform over non-fold actions",
                          list(game.public_keys), records)


# -------------------------------------------------------------- constraints
@dataclass
class OpponentModelStats:
    """Frequencies behind each generated interval (for reports and tests)."""

    kind: list[str] = field(default_factory=list)      # "inner" or "showdown"
    label: list[str] = field(default_factory=list)
    successes: list[float] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)


def _own_reach_estimate(counts: dict[tuple[int, int], float], pt: PublicTree, hand: int,
                        s: int, probe_player: int, known: dict[tuple[int, int], float]) -> float:
    """Product of our empirical action frequencies along public node ``s``.

    A conditional with no observations falls back to the probe's known
    probability for that step.
    """
    est = 1.0
    chain = pt.prefixes[s]
    for a, b in zip(chain[:-1], chain[1:]):
        if pt.actor[a] != probe_player:
            continue
        denom = counts.get((hand, int(a)), 0.0)
        if denom > 0:
            est *= counts.get((hand, int(b)), 0.0) / denom
        else:
            est *= known[(hand, int(b))] / known[(hand, int(a))]
    return est


def build_opponent_constraints(log: ObservationLog, game: PokerGame, gamma: float,
                               probe: np.ndarray | None = None, *, known_probe: bool = False
                               ) -> tuple[ConstraintSet, OpponentModelStats]:
    """Interval constraints on the opponent of ``log.probe_player``.

    ``probe`` is the probe's behavioral strategy (defaults to the uniform
    non-fold probe).  Our own reach along each public sequence is estimated
    from the log unless ``known_probe`` is set, in which case the probe's
    true probabilities are used.
    """
    if log is None or log.n == 0:
        raise ConstraintError("empty observation log")
    if log.game_hash != game.game_hash():
        raise ConstraintError("observation log was recorded on a different game")
    return _build(log, game, gamma, probe, known_probe, None, log.probe_player)


def exact_opponent_constraints(game: PokerGame, probe_player: int, target_opp: np.ndarray,
                               probe: np.ndarray | None = None
                               ) -> tuple[ConstraintSet, OpponentModelStats]:
    """Infinite-data constraints: every interval pinned at the exact probability."""
    return _build(None, game, 0.5, probe, True, np.asarray(target_opp, dtype=float), probe_player)


def _build(log, game: PokerGame, gamma: float, probe, known_probe: bool, exact_target,
           me: int) -> tuple[ConstraintSet, OpponentModelStats]:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {gamma}")
    t = game.tree
    opp = 3 - me
    probe = probe_strategy(game, me) if probe is None else np.asarray(probe, dtype=float)
    x_me = realization(game, me, probe)
    n_opp = t.seq_index(opp).num_sequences
    pt = public_tree(game)
    pid = {s: i for i, s in enumerate(pt.keys)}
    hands = range(len(game.rules.ranks))

    # nodes by (own hand, public id) and known own reach
    members: dict[tuple[int, int], list[int]] = {}
    known: dict[tuple[int, int], float] = {}
    for h in np.flatnonzero(game.private[:, 0] >= 0):
        key = (int(game.private[h, me - 1]), pid[game.public[h]])
        members.setdefault(key, []).append(int(h))
        known[key] = float(x_me[t.node_seq[me - 1, h]])

    if exact_target is None:
        n = log.n
        inner: dict[tuple[int, int], float] = {}
        final, cnt = np.unique(log.records, axis=0, return_counts=True)
        log_pid = [pid[s] for s in log.public_keys]
        show: dict[tuple[int, int, int], float] = {}
        for (own, s, other), c in zip(final, cnt):
            s = log_pid[s]
            for a in pt.prefixes[s]:
                inner[(int(own), int(a))] = inner.get((int(own), int(a)), 0.0) + c
            if other != NO_HAND:
                show[(int(own), int(other), s)] = show.get((int(own), int(other), s), 0.0) + c
    else:
        xo = realization(game, opp, exact_target)
        xs = [None, None]
        xs[me - 1], xs[opp - 1] = x_me, xo
        reach = node_reach(game, xs[0], xs[1])
        n = None

    def own_reach(hand: int, s: int) -> float:
        if known_probe or exact_target is not None:
            return known[(hand, s)]
        return _own_reach_estimate(inner, pt, hand, s, me, known)

    def interval(successes: float, exact: float | None) -> tuple[float, float]:
        if exact is not None:
            return exact, exact
        return wilson_interval(int(successes), n, gamma)

    cons: list[LinearConstraint] = []
    stats = OpponentModelStats()

    def emit(kind: str, label: str, coef: dict[int, float], lo: float, hi: float, succ: float):
        idx = np.array(sorted(coef), dtype=np.int64)
        val = np.array([coef[i] for i in idx])
        cons.append(LinearConstraint(idx, val, hi, n_opp, name=f"{kind}:{label}:upper"))
        cons.append(LinearConstraint(idx, -val, -lo, n_opp, name=f"{kind}:{label}:lower"))
        stats.kind.append(kind)
        stats.label.append(label)
        stats.successes.append(float(succ))
        stats.lower.append(lo)
        stats.upper.append(hi)

    ranks = game.rules.ranks
    for s, key in enumerate(pt.keys):
        for hand in hands:
            nodes = members.get((hand, s))
            if not nodes:
                continue
            w = own_reach(hand, s)
            coef: dict[int, float] = {}
            for h in nodes:
                q = int(t.node_seq[opp - 1, h])
                coef[q] = coef.get(q, 0.0) + w * float(t.chance_reach[h])
            if exact_target is None:
                succ = inner.get((hand, s), 0.0)
                lo, hi = interval(succ, None)
            else:
                succ = float(sum(reach[h] for h in nodes))
                lo, hi = interval(0, succ)
            emit("inner", f"{ranks[hand]}|{key or '-'}", coef, lo, hi, succ)

    for z in game.showdown_terminals:
        hand, other = int(game.private[z, me - 1]), int(game.private[z, opp - 1])
        s = pid[game.public[z]]
        w = own_reach(hand, s)
        coef = {int(t.node_seq[opp - 1, z]): w * float(t.chance_reach[z])}
        if exact_target is None:
            succ = show.get((hand, other, s), 0.0)
            lo, hi = interval(succ, None)
        else:
            succ = float(reach[z])
            lo, hi = interval(0, succ)
        emit("showdown", f"{ranks[hand]}{ranks[other]}|{pt.keys[s]}", coef, lo, hi, succ)
    return ConstraintSet(cons, n_opp), stats


# ------------------------------------------------------------ counter-profile
@dataclass
class CounterProfile:
    x1: np.ndarray                       # our realization plan in seat 1
    x2: np.ndarray                       # our realization plan in seat 2
    results: tuple                       # the two solver results


def robust_counter_profile(game, constraints_seat1: ConstraintSet, constraints_seat2: ConstraintSet,
                           config=None) -> CounterProfile:
    """Our best strategy in each seat against every opponent meeting the constraints.

    ``constraints_seat1`` restricts player 2 (our opponent when we sit in
    seat 1) and ``constraints_seat2`` restricts player 1.  Each half is one
    solver run with the opponent as the constrained player; our strategy is
    the unconstrained side's average.
    """
    from ..solver import CcfrConfig, solve

    cfg = config or CcfrConfig(step="decaying", alpha=1000.0)
    base = asdict(cfg)
    r1 = solve(game, constraints_seat1, CcfrConfig(**{**base, "constrained_player": 2}))
    r2 = solve(game, constraints_seat2, CcfrConfig(**{**base, "constrained_player": 1}))
    return CounterProfile(r1.xbar[0], r2.xbar[1], (r1, r2))


def value_against(game, ours: tuple[np.ndarray, np.ndarray],
                  target: tuple[np.ndarray, np.ndarray]) -> float:
    """Seat-averaged utility of our realization plans against the target's."""
    from ..regret import as_bilinear

    view = as_bilinear(game)
    return 0.5 * (view.value(ours[0], target[1]) - view.value(target[0], ours[1]))


def best_response_value(game, target: tuple[np.ndarray, np.ndarray]) -> float:
    """Seat-averaged value of exact best responses to the target."""
    from ..regret import as_bilinear

    view = as_bilinear(game)
    v1, _ = view.best_response(1, target[1])
    v2, _ = view.best_response(2, target[0])
    return 0.5 * (v1 + v2)


def spearman(a, b) -> float:
    """Rank correlation with average ranks for ties."""
    def ranks(v):
        v = np.asarray(v, dtype=float)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(len(v), dtype=float)
        for u in np.unique(v):
            m = v == u
            r[m] = r[m].mean()
        return r
    ra, rb = ranks(a), ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    return float(ra @ rb) / den if den > 0 else 0.0
