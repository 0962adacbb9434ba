"""Experiment configuration files (YAML) and the game/constraint factories they name.

Every section is a dataclass; unknown keys anywhere are an error.  Commented
example configs live in ``configs/`` at the repository root.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .constraints import ConstraintSet, LinearConstraint, build_risk_constraint
from .regret import as_bilinear
from .solver import CcfrConfig

EXPERIMENTS = ("solve", "transit_sweep", "lp_compare", "opponent_model", "bound_audit")
GAMES = ("kuhn", "leduc", "leduc_abstract", "transit")


class ConfigError(ValueError):
    pass


@dataclass
class GameConfig:
    name: str = "kuhn"
    w: int = 3                                   # transit width
    horizon: int | None = None                   # transit horizon (default 2w + 4)
    fail_prob: float = 0.1
    bet_sizes: list[float] = field(default_factory=lambda: [2.0, 4.0])
    max_raises: int = 2
    abstraction: str = "JQ.K/pair.nopair"


@dataclass
class ConstraintConfig:
    """One constraint entry.

    ``linear``: ``sum coeffs[label] * x[label] <= b`` (``sense: ">="`` flips it).
    ``interval``: ``lower <= x[label] <= upper`` as two linear constraints.
    ``risk``: transit off-base probability at most ``bound``.
    """

    type: str = "linear"
    name: str | None = None
    coeffs: dict[str, float] = field(default_factory=dict)
    b: float = 0.0
    sense: str = "<="
    label: str | None = None
    lower: float | None = None
    upper: float | None = None
    bound: float | None = None


@dataclass
class SolverConfig:
    algorithm: str = "ccfr"                      # "cfr" runs the plain engine (no constraints)
    iterations: int = 10_000
    beta: float | None = None
    step: str = "constant"
    alpha: float = 1.0
    clamp: bool = True
    constrained_player: int = 1
    beta_doubling: bool = False
    doubling_threshold: float = 0.9
    doubling_cap: int = 10
    checkpoints: int = 25

    def ccfr(self, seed: int) -> CcfrConfig:
        d = dataclasses.asdict(self)
        d.pop("algorithm")
        return CcfrConfig(**d, seed=seed)


@dataclass
class TransitSweepConfig:
    bounds: list[float] = field(default_factory=lambda: [0.02, 0.1, 0.5])
    max_width: int = 5
    reference_iterations: int | None = None      # unconstrained reference run (default: same T)


@dataclass
class OpponentModelConfig:
    n: list[int] = field(default_factory=lambda: [100, 1000, 10_000, 100_000])
    gamma: list[float] = field(default_factory=lambda: [0.99])
    seeds: int = 10
    infinite: bool = True
    known_probe: bool = False
    target_iterations: int = 100_000
    nash_iterations: int = 100_000


@dataclass
class BoundAuditConfig:
    lp_constrained_br: bool = True               # exact constrained best response via the LP


@dataclass
class ExperimentConfig:
    experiment: str = "solve"
    seed: int = 0
    game: GameConfig = field(default_factory=GameConfig)
    constraints: list[ConstraintConfig] = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)
    transit_sweep: TransitSweepConfig = field(default_factory=TransitSweepConfig)
    opponent_model: OpponentModelConfig = field(default_factory=OpponentModelConfig)
    bound_audit: BoundAuditConfig = field(default_factory=BoundAuditConfig)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.game.name not in GAMES:
            raise ConfigError(f"game.name must be one of {GAMES}, got {self.game.name!r}")
        if self.solver.algorithm not in ("ccfr", "cfr"):
            raise ConfigError("solver.algorithm must be 'ccfr' or 'cfr'")
        if self.solver.algorithm == "cfr" and self.constraints:
            raise ConfigError("solver.algorithm 'cfr' takes no constraints")
        for c in self.constraints:
            if c.type not in ("linear", "interval", "risk"):
                raise ConfigError(f"unknown constraint type {c.type!r}")
            if c.type == "risk" and self.game.name != "transit":
                raise ConfigError("risk constraints need the transit game")
        try:
            self.solver.ccfr(self.seed).validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self) -> str:
        """Canonical one-line JSON of the full config (embedded in every output)."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get((cls, name))
        if sub is list:
            if not isinstance(value, list):
                raise ConfigError(f"{where}.{name}: expected a list")
            kwargs[name] = [_build(ConstraintConfig, v, f"{where}.{name}[{i}]")
                            for i, v in enumerate(value)]
        elif sub is not None:
            kwargs[name] = _build(sub, value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


_SECTIONS = {
    (ExperimentConfig, "game"): GameConfig,
    (ExperimentConfig, "constraints"): list,
    (ExperimentConfig, "solver"): SolverConfig,
    (ExperimentConfig, "transit_sweep"): TransitSweepConfig,
    (ExperimentConfig, "opponent_model"): OpponentModelConfig,
    (ExperimentConfig, "bound_audit"): BoundAuditConfig,
}


def parse_config(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "config")
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_config(data or {})


# ---------------------------------------------------------------- factories
def make_game(gc: GameConfig):
    """The game object named by ``gc`` (poker games come back as :class:`PokerGame`)."""
    from .games import build_leduc_abstraction, build_transit, kuhn_poker, leduc_poker

    if gc.name == "kuhn":
        return kuhn_poker()
    if gc.name == "leduc":
        return leduc_poker(tuple(gc.bet_sizes), gc.max_raises)
    if gc.name == "leduc_abstract":
        return build_leduc_abstraction(gc.abstraction, tuple(gc.bet_sizes), gc.max_raises).abstract
    if gc.name == "transit":
        return build_transit(gc.w, gc.horizon, gc.fail_prob)
    raise ConfigError(f"unknown game {gc.name!r}")


def solver_view(game):
    return as_bilinear(game.tree if hasattr(game, "tree") else game)


def game_hash(game) -> str:
    return game.game_hash()


def make_constraints(game, entries: list[ConstraintConfig], player: int) -> ConstraintSet:
    """Constraints on ``player``'s sequences; linear coefficients are keyed by sequence label."""
    view = solver_view(game)
    space = view.spaces[player - 1]
    labels = space.sequence_labels()
    index = {lab: i for i, lab in enumerate(labels)}
    n = space.num_sequences

    def seq(label: str) -> int:
        if label not in index:
            raise ConfigError(f"unknown sequence label {label!r} for player {player}")
        return index[label]

    out = []
    for i, c in enumerate(entries):
        name = c.name or f"{c.type}{i}"
        if c.type == "linear":
            if not c.coeffs:
                raise ConfigError(f"constraint {name}: linear constraints need coeffs")
            idx = [seq(k) for k in c.coeffs]
            coef = np.array(list(c.coeffs.values()), dtype=float)
            b = float(c.b)
            if c.sense == ">=":
                coef, b = -coef, -b
            elif c.sense != "<=":
                raise ConfigError(f"constraint {name}: sense must be '<=' or '>='")
            out.append(LinearConstraint(idx, coef, b, n, name))
        elif c.type == "interval":
            if c.label is None:
                raise ConfigError(f"constraint {name}: interval constraints need a label")
            s = seq(c.label)
            if c.upper is not None:
                out.append(LinearConstraint([s], [1.0], c.upper, n, f"{name}:upper"))
            if c.lower is not None:
                out.append(LinearConstraint([s], [-1.0], -c.lower, n, f"{name}:lower"))
        elif c.type == "risk":
            if player != 1:
                raise ConfigError("the risk constraint applies to the patroller (player 1)")
            if c.bound is None:
                raise ConfigError(f"constraint {name}: risk constraints need a bound")
            out.append(build_risk_constraint(game, c.bound))
    return ConstraintSet(out, n)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")
