"""Constrained CFR: Lagrangian-tilted regret minimization with bounded multipliers.

The constrained player (internally always the maximizer, seat 1) runs CFR on
the tilted utility ``u(x, y) - sum_i lam_i f_i(x)``.  Because the tilt is
linearized at the current strategy it enters the bottom-up value sweep as a
per-sequence penalty ``c(I,a) = sum_i lam_i d f_i / d x[(I,a)]``.  The other
player runs plain CFR, and the multipliers follow projected gradient ascent
on the constraint values, clamped to ``[0, beta]``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .constraints.base import Constraint, ConstraintError, ConstraintSet
from .efg import GameTree, Profile, counterfactual_value, seq_of
from .regret import as_bilinear
from .space import BilinearGame

STEP_RULES = ("constant", "decaying", "corollary")


# ------------------------------------------------------------------ config
@dataclass
class CcfrConfig:
    iterations: int = 10_000
    beta: float | None = None            # None -> 100 * utility range
    step: str = "constant"
    alpha: float = 1.0                   # constant step, or c in c / sqrt(t)
    clamp: bool = True
    constrained_player: int = 1
    beta_doubling: bool = False
    doubling_threshold: float = 0.9
    doubling_cap: int = 10
    checkpoints: int = 25                # log-spaced checkpoint count
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.step not in STEP_RULES:
            raise ValueError(f"step must be one of {STEP_RULES}, got {self.step!r}")
        if self.step != "corollary" and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.constrained_player not in (1, 2):
            raise ValueError("constrained_player must be 1 or 2")
        if not 0.0 < self.doubling_threshold < 1.0:
            raise ValueError("doubling_threshold must lie in (0, 1)")
        if self.doubling_cap < 0 or self.checkpoints < 1:
            raise ValueError("doubling_cap and checkpoints must be positive")


def checkpoint_schedule(iterations: int, count: int) -> list[int]:
    """Roughly log-spaced iteration numbers in ``[1, iterations]`` ending at ``iterations``."""
    pts = np.unique(np.round(np.logspace(0, math.log10(iterations), count)).astype(int))
    pts = [int(p) for p in pts if 1 <= p <= iterations]
    if not pts or pts[-1] != iterations:
        pts.append(iterations)
    return pts


# ------------------------------------------------------------------ bounds
@dataclass
class BoundReport:
    delta_u: float
    k: int
    max_actions: int
    F: float
    G: float
    M: float
    exact: bool                          # False when F, G are sampled estimates

    def guarantee_bounds(self, T: int, beta: float, lambda_regret: float | None = None,
                         lambda_star: np.ndarray | None = None) -> "GuaranteeBounds":
        return guarantee_bounds(self, T, beta, lambda_regret, lambda_star)


@dataclass
class GuaranteeBounds:
    lambda_regret: float
    expl: float                          # constrained exploitability gap
    viol: float                          # per-constraint violation
    dual_viol: np.ndarray | None         # per-constraint violation when beta > lam*
    corollary_violation: np.ndarray | None
    corollary_exploitability: float


def corollary_lambda_regret(report: BoundReport, T: int, beta: float) -> float:
    """Projected-gradient regret bound with ``alpha = beta / (G sqrt T)``, summed over constraints."""
    return report.k * beta * report.G / math.sqrt(T)


def guarantee_bounds(report: BoundReport, T: int, beta: float, lambda_regret: float | None = None,
                     lambda_star: np.ndarray | None = None) -> GuaranteeBounds:
    """Right-hand sides of the convergence guarantees after ``T`` iterations.

    ``lambda_regret`` defaults to the projected-gradient bound.  The
    ``dual_viol``/corollary violation bounds need ``lambda_star`` with
    ``beta > lambda_star``; entries where that fails are ``inf``.
    """
    rt = math.sqrt(T)
    base = report.M * math.sqrt(report.max_actions) / rt
    kbf = report.k * beta * report.F
    rl = corollary_lambda_regret(report, T, beta) if lambda_regret is None else lambda_regret
    expl = 4.0 * (report.delta_u + kbf) * base + 2.0 * rl
    if beta > 0:
        viol = rl / beta + (report.delta_u + 2.0 * kbf) * base / beta + report.delta_u / beta
    else:
        viol = math.inf
    dual_viol = cor = None
    if lambda_star is not None:
        gap = beta - np.asarray(lambda_star, dtype=float)
        with np.errstate(divide="ignore"):
            dual_viol = np.where(gap > 0, (rl + 2.0 * (report.delta_u + kbf) * base) / gap, np.inf)
            cor = np.where(gap > 0,
                           (beta * report.G / rt + 2.0 * (report.delta_u + kbf) * base) / gap,
                           np.inf)
    cor_expl = (4.0 * (report.delta_u + kbf) * report.M * math.sqrt(report.max_actions)
                + 2.0 * beta * report.G) / rt
    return GuaranteeBounds(rl, expl, viol, dual_viol, cor, cor_expl)


def compute_bound_constants(game, constraints: ConstraintSet | Sequence[Constraint] | None = None,
                            player: int = 1, samples: int = 1000, seed: int = 0) -> BoundReport:
    """Utility range, fan-out, subgradient/value bounds and the reach constant ``M``.

    ``M`` is the largest total own-reach ``sum_I pi(I)`` over pure strategies,
    taken over both players since both regret bounds use it.
    """
    view = as_bilinear(game)
    if player == 2:
        view = view.negated()
    cs = _as_set(constraints, view.spaces[0].num_sequences)
    F, G, exact = cs.bound_constants(view.spaces[0], samples, seed)
    M = max(s.max_infoset_weight() for s in view.spaces)
    return BoundReport(view.utility_range, len(cs), view.max_actions, F, G, M, exact)


def measure_lambda_regret(lams: np.ndarray, fs: np.ndarray, beta: float) -> float:
    """Average multiplier regret against the best fixed ``lam*`` in ``[0, beta]^k``.

    ``lams`` and ``fs`` are ``T x k`` histories of multipliers and the
    constraint values they were scored on.  The maximizing ``lam*`` is
    ``beta`` where the summed values are positive and 0 otherwise.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    fs = np.atleast_2d(np.asarray(fs, dtype=float))
    if lams.shape != fs.shape or lams.shape[0] == 0:
        raise ValueError("need matching nonempty histories")
    return lambda_regret_from_sums(fs.sum(axis=0), float(np.sum(lams * fs)), beta, lams.shape[0])


def lambda_regret_from_sums(f_sum: np.ndarray, lamf_sum: float, beta: float, T: int) -> float:
    best = float(np.sum(np.clip(beta * np.asarray(f_sum), 0.0, None)))
    return (best - lamf_sum) / T


# --------------------------------------------------------------- multipliers
@dataclass
class LagrangeState:
    lam: np.ndarray
    beta: float
    step: str = "constant"
    alpha: float = 1.0
    clamp: bool = True
    t: int = 0
    lam_sum: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam_sum is None:
            self.lam_sum = np.zeros_like(self.lam)

    def step_size(self, t: int) -> float:
        return self.alpha / math.sqrt(t) if self.step == "decaying" else self.alpha

    @property
    def mean(self) -> np.ndarray:
        return self.lam_sum / max(self.t, 1)


def lambda_update(state: LagrangeState, violations: np.ndarray) -> LagrangeState:
    """``lam <- clamp(lam + alpha_t f, 0, beta)`` and the running mean update."""
    f = np.asarray(violations, dtype=float)
    if f.shape != state.lam.shape:
        raise ValueError(f"expected {state.lam.shape[0]} constraint values, got {f.shape}")
    t = state.t + 1
    lam = np.maximum(state.lam + state.step_size(t) * f, 0.0)
    if state.clamp:
        lam = np.minimum(lam, state.beta)
    return LagrangeState(lam, state.beta, state.step, state.alpha, state.clamp, t,
                         state.lam_sum + lam)


def tilt(constraints: ConstraintSet, lam: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-sequence tilt ``c(I,a) = sum_i lam_i * grad_(I,a) f_i(x)``."""
    return constraints.tilt(x, lam)


# ------------------------------------------------------------------ results
@dataclass
class CcfrResult:
    game: str
    config: dict
    iterations: int
    beta: float
    xbar: tuple[np.ndarray, np.ndarray]        # original seats
    behavioral: tuple[np.ndarray, np.ndarray]
    lam_bar: np.ndarray
    lam: np.ndarray
    diagnostics: list[dict]
    bounds: BoundReport
    constraint_names: list[str]
    sequence_labels: tuple[list[str], list[str]]
    lambda_regret: float = 0.0
    doubling_trace: list[dict] = field(default_factory=list)
    flagged: bool = False
    wall_time: float = 0.0

    @property
    def final(self) -> dict:
        return self.diagnostics[-1]

    def to_dict(self) -> dict:
        return {
            "format": "ccfr-result/1",
            "game": self.game,
            "config": self.config,
            "iterations": self.iterations,
            "beta": self.beta,
            "lambda_bar": self.lam_bar.tolist(),
            "lambda_final": self.lam.tolist(),
            "lambda_regret": self.lambda_regret,
            "bounds": asdict(self.bounds),
            "constraints": self.constraint_names,
            "doubling_trace": self.doubling_trace,
            "flagged": self.flagged,
            "diagnostics": [_jsonable(d) for d in self.diagnostics],
            "strategies": {
                f"player{p + 1}": {
                    "sequence_form": dict(zip(self.sequence_labels[p], map(float, self.xbar[p]))),
                    "behavioral": dict(zip(self.sequence_labels[p][1:],
                                           map(float, self.behavioral[p][1:]))),
                }
                for p in (0, 1)
            },
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=False)
            fh.write("\n")

    def write_csv(self, path, per_constraint_limit: int = 20) -> None:
        write_diagnostics_csv(path, self.diagnostics, self.constraint_names, per_constraint_limit)


def _jsonable(d: dict) -> dict:
    """Diagnostics row without timing, so same-seed runs serialize identically."""
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()
            if k != "wall_time"}


DIAG_UNITS = {
    "iteration": "count",
    "value": "utility (constrained player)",
    "exploitability": "utility",
    "total_violation": "constraint units",
    "max_violation": "constraint units",
    "lambda_regret": "utility",
    "expl_rhs": "utility",
    "viol_rhs": "constraint units",
}


def write_diagnostics_csv(path, rows: list[dict], names: list[str], per_constraint_limit: int = 20,
                          header_comments: Sequence[str] = ()) -> None:
    per = len(names) <= per_constraint_limit
    cols = ["iteration", "value", "exploitability", "total_violation",
            "max_violation", "lambda_regret", "expl_rhs", "viol_rhs"]
    extra = []
    if per:
        for i, n in enumerate(names):
            extra += [f"f[{n}]", f"lambda[{n}]", f"lambda_bar[{n}]"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write("# units: " + ", ".join(f"{c}={DIAG_UNITS.get(c, '')}" for c in cols) + "\n")
        w = csv.writer(fh)
        w.writerow(cols + extra)
        for r in rows:
            vals = [r["iteration"]] + [repr(float(r[c])) for c in cols[1:]]
            if per:
                for i in range(len(names)):
                    vals += [repr(float(r["f"][i])), repr(float(r["lam"][i])),
                             repr(float(r["lam_bar"][i]))]
            w.writerow(vals)


# ------------------------------------------------------------------- solver
def _as_set(constraints, size: int) -> ConstraintSet:
    if constraints is None:
        return ConstraintSet([], size)
    if isinstance(constraints, ConstraintSet):
        if constraints.size != size:
            raise ConstraintError(
                f"constraints have dimension {constraints.size}, expected {size}")
        return constraints
    return ConstraintSet(list(constraints), size)


class CcfrSolver:
    """Stateful CCFR run; :func:`solve` is the one-shot driver."""

    def __init__(self, game, constraints=None, config: CcfrConfig | None = None,
                 lam0: np.ndarray | None = None):
        self.config = cfg = config or CcfrConfig()
        cfg.validate()
        self.original = as_bilinear(game)
        self.swapped = cfg.constrained_player == 2
        self.game = self.original.negated() if self.swapped else self.original
        s1, s2 = self.game.spaces
        self.constraints = _as_set(constraints, s1.num_sequences)
        self.k = len(self.constraints)
        self.beta = float(100.0 * self.game.utility_range if cfg.beta is None else cfg.beta)
        self.report = compute_bound_constants(self.game, self.constraints, seed=cfg.seed)
        if cfg.step == "corollary":
            G = self.report.G
            self.alpha = self.beta / (G * math.sqrt(cfg.iterations)) if G > 0 else 0.0
        else:
            self.alpha = cfg.alpha
        self.step_kind = K.STEP_DECAYING if cfg.step == "decaying" else K.STEP_CONSTANT

        self.behav = [s1.uniform(), s2.uniform()]
        self.x = [s1.realize(self.behav[0]), s2.realize(self.behav[1])]
        self.regrets = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        self.xbar = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        self.ssum = [np.zeros(s1.num_sequences), np.zeros(s2.num_sequences)]
        lam = np.zeros(self.k) if lam0 is None else np.asarray(lam0, dtype=float).copy()
        if lam.shape != (self.k,):
            raise ValueError("initial multipliers have the wrong length")
        self.lam = np.clip(lam, 0.0, self.beta if cfg.clamp else None)
        self.lam_sum = np.zeros(self.k)
        self.f_prev = self.constraints.values(self.x[0]) if self.k else np.zeros(0)
        self.f_sum = np.zeros(self.k)
        self.lamf_sum = np.zeros(1)
        self.t = 0
        self.diagnostics: list[dict] = []
        self._elapsed = 0.0
        if self.constraints.linear:
            C, d = self.constraints.matrix()
            C = C.tocsr()
            CT = C.T.tocsr()
            self._cargs = (C.indptr.astype(np.int64), C.indices.astype(np.int64),
                           C.data.astype(np.float64), d.astype(np.float64),
                           CT.indptr.astype(np.int64), CT.indices.astype(np.int64),
                           CT.data.astype(np.float64))
        else:
            self._cargs = None

    # -- iteration -------------------------------------------------------------
    def step_size(self, t: int) -> float:
        return self.alpha / math.sqrt(t) if self.step_kind == K.STEP_DECAYING else self.alpha

    def iterate(self) -> None:
        """One iteration through Python-level kernel calls (any constraint type)."""
        g = self.game
        s1, s2 = g.spaces
        t = self.t + 1
        a_ptr, a_idx, a_val, at_ptr, at_idx, at_val = g.kernel_payoff
        # unconstrained player
        g2 = np.empty(s2.num_sequences)
        K.spmv(at_ptr, at_idx, at_val, self.x[0], g2, -1.0)
        K.regret_update(s2.action_ptr, s2.succ_ptr, s2.succ_info, s2.succ_w, self.behav[1],
                        self.regrets[1], g2, np.zeros(s2.num_sequences),
                        np.empty(s2.num_sequences), np.empty(s2.num_infosets))
        K.realization(s2.action_ptr, s2.in_ptr, s2.in_seq, s2.in_w, self.behav[1], self.x[1])
        # multipliers, then the tilt at the previous constrained strategy
        if self.k:
            lam = np.maximum(self.lam + self.step_size(t) * self.f_prev, 0.0)
            if self.config.clamp:
                lam = np.minimum(lam, self.beta)
            self.lam = lam
            self.lam_sum += lam
            c = self.constraints.tilt(self.x[0], lam)
        else:
            c = np.zeros(s1.num_sequences)
        # constrained player
        g1 = np.empty(s1.num_sequences)
        K.spmv(a_ptr, a_idx, a_val, self.x[1], g1, 1.0)
        K.regret_update(s1.action_ptr, s1.succ_ptr, s1.succ_info, s1.succ_w, self.behav[0],
                        self.regrets[0], g1, np.ascontiguousarray(c, dtype=np.float64),
                        np.empty(s1.num_sequences), np.empty(s1.num_infosets))
        K.realization(s1.action_ptr, s1.in_ptr, s1.in_seq, s1.in_w, self.behav[0], self.x[0])
        inv = 1.0 / t
        for p in (1, 0):
            self.xbar[p] += (self.x[p] - self.xbar[p]) * inv
            self.ssum[p] += self.x[p]
        if self.k:
            self.f_prev = self.constraints.values(self.x[0])
            self.f_sum += self.f_prev
            self.lamf_sum[0] += float(self.lam @ self.f_prev)
        self.t = t

    def advance(self, n: int) -> None:
        """``n`` iterations, compiled when all constraints are linear."""
        if n <= 0:
            return
        start = time.perf_counter()
        if self._cargs is None:
            for _ in range(n):
                self.iterate()
        else:
            s1, s2 = self.game.spaces
            K.ccfr_chunk(*s1.kernel_args, *s2.kernel_args, *self.game.kernel_payoff,
                         *self._cargs,
                         self.behav[0], self.behav[1], self.regrets[0], self.regrets[1],
                         self.x[0], self.x[1], self.xbar[0], self.xbar[1],
                         self.ssum[0], self.ssum[1], self.lam, self.lam_sum, self.f_prev,
                         self.f_sum, self.lamf_sum, self.t, int(n), self.step_kind,
                         float(self.alpha), self.beta, bool(self.config.clamp))
            self.t += n
        self._elapsed += time.perf_counter() - start

    # -- diagnostics -----------------------------------------------------------
    @property
    def lambda_regret(self) -> float:
        if self.t == 0 or self.k == 0:
            return 0.0
        return lambda_regret_from_sums(self.f_sum, float(self.lamf_sum[0]), self.beta, self.t)

    def diagnose(self) -> dict:
        g = self.game
        xb, yb = self.xbar
        br1, _ = g.best_response(1, yb)
        br2, _ = g.best_response(2, xb)
        f = self.constraints.values(xb) if self.k else np.zeros(0)
        rl = self.lambda_regret
        tb = guarantee_bounds(self.report, self.t, self.beta, rl)
        return {
            "iteration": self.t,
            "wall_time": self._elapsed,
            "value": g.value(xb, yb),
            "br_value": br1,
            "guaranteed_value": -br2,
            "exploitability": 0.5 * (br1 + br2),
            "f": f,
            "total_violation": float(np.clip(f, 0.0, None).sum()),
            "max_violation": float(f.max()) if self.k else 0.0,
            "lam": self.lam.copy(),
            "lam_bar": self.lam_sum / max(self.t, 1),
            "lambda_regret": rl,
            "expl_rhs": tb.expl,
            "viol_rhs": tb.viol,
        }

    def run(self, iterations: int | None = None, checkpoints: Sequence[int] | None = None) -> None:
        T = iterations or self.config.iterations
        pts = checkpoints or checkpoint_schedule(T, self.config.checkpoints)
        for p in pts:
            self.advance(p - self.t)
            self.diagnostics.append(self.diagnose())

    def result(self) -> CcfrResult:
        s = self.game.spaces
        xb = (self.xbar[0].copy(), self.xbar[1].copy())
        beh = (s[0].behavioral(self.ssum[0]), s[1].behavioral(self.ssum[1]))
        labels = (s[0].sequence_labels(), s[1].sequence_labels())
        if self.swapped:
            xb, beh, labels = xb[::-1], beh[::-1], labels[::-1]
        return CcfrResult(
            game=self.original.name, config=asdict(self.config), iterations=self.t,
            beta=self.beta, xbar=xb, behavioral=beh, lam_bar=self.lam_sum / max(self.t, 1),
            lam=self.lam.copy(), diagnostics=self.diagnostics, bounds=self.report,
            constraint_names=self.constraints.names, sequence_labels=labels,
            lambda_regret=self.lambda_regret, wall_time=self._elapsed,
        )


def solve(game, constraints=None, config: CcfrConfig | None = None,
          lam0: np.ndarray | None = None) -> CcfrResult:
    """Run CCFR for ``config.iterations`` iterations and collect diagnostics.

    Diagnostics are reported from the constrained player's side: with
    ``constrained_player=2`` values are player 2's utilities.
    """
    solver = CcfrSolver(game, constraints, config, lam0)
    solver.run()
    return solver.result()


def beta_doubling_solve(game, constraints=None, config: CcfrConfig | None = None) -> CcfrResult:
    """Rerun with doubled ``beta`` while some average multiplier sits near ``beta``.

    Each rerun resets regrets and averages but starts the multipliers where
    the previous run ended.  After ``doubling_cap`` doublings the last result
    is returned with ``flagged`` set.
    """
    cfg = config or CcfrConfig()
    cfg.validate()
    view = as_bilinear(game)
    beta = float(100.0 * view.utility_range if cfg.beta is None else cfg.beta)
    trace: list[dict] = []
    lam0 = None
    doublings = 0
    while True:
        run_cfg = CcfrConfig(**{**asdict(cfg), "beta": beta})
        res = solve(view, constraints, run_cfg, lam0)
        near = bool(len(res.lam_bar)) and bool(
            (res.lam_bar >= cfg.doubling_threshold * beta).any())
        trace.append({"beta": beta, "max_lambda_bar": float(res.lam_bar.max(initial=0.0)),
                      "max_violation": res.final["max_violation"], "near_beta": near})
        if not near:
            break
        if doublings >= cfg.doubling_cap:
            res.flagged = True
            break
        doublings += 1
        lam0 = res.lam
        beta = max(1.0, 2.0 * beta)
    res.doubling_trace = trace
    return res


# ---------------------------------------------------------- test oracles
def tilted_values_closed_form(game: GameTree, profile: Profile, c: np.ndarray, infoset: int,
                              action: int | None = None) -> float:
    """Tilted counterfactual value of a player-1 infoset from its closed form.

    ``v~(I,a) = v(I,a) - c(I,a) - sum over player-1 sequences (I',a') below
    (I,a) of pi_1(Ia -> I'a') c(I',a')``, where ``pi_1(Ia -> I'a')`` is the
    product of player 1's action probabilities strictly after ``(I,a)`` up to
    and including ``a'``.  The infoset value mixes the action values by
    ``sigma(I, .)``.  ``c`` is a per-sequence tilt vector.
    """
    game.require_recall(1)
    idx = game.seq_index(1)
    probs = profile[0].probs
    if action is None:
        lo, hi = idx.action_ptr[infoset], idx.action_ptr[infoset + 1]
        return float(sum(probs[lo + a] * tilted_values_closed_form(game, profile, c, infoset, a)
                         for a in range(hi - lo)))
    s = idx.seq(infoset, action)
    below = 0.0
    stack = [(s, 1.0)]
    while stack:
        seq, w = stack.pop()
        for j in idx.children_infosets(seq):
            lo, hi = idx.action_ptr[j], idx.action_ptr[j + 1]
            for s2 in range(lo, hi):
                w2 = w * probs[s2]
                below += w2 * c[s2]
                stack.append((s2, w2))
    v = counterfactual_value(game, profile, infoset, 1, action)
    return v - c[s] - below


def recurrence_tilted_values(game, profile: Profile, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sequence and per-infoset tilted values from the bottom-up sweep used by CCFR."""
    view = as_bilinear(game)
    s1 = view.spaces[0]
    y = seq_of(profile[1], game).x if isinstance(game, GameTree) else profile[1]
    g = view.gradient(1, y)
    vals = np.empty(s1.num_sequences)
    iv = np.empty(s1.num_infosets)
    K.tilted_values(s1.action_ptr, s1.succ_ptr, s1.succ_info, s1.succ_w,
                    np.ascontiguousarray(profile[0].probs, dtype=np.float64), g,
                    np.ascontiguousarray(c, dtype=np.float64), vals, iv)
    return vals, iv


def regularized_objective(game, constraint: Constraint, beta: float, x: np.ndarray) -> float:
    """``min_y x @ A @ y - beta * max(f(x), 0)`` for one constraint."""
    view = as_bilinear(game)
    br2, _ = view.best_response(2, x)
    return -br2 - beta * max(constraint.value(x), 0.0)
