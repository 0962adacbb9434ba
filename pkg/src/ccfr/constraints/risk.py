"""Bound on the patroller's probability of ending the transit game off base."""

from __future__ import annotations

import numpy as np

from ..games.transit import TransitGame
from .base import LinearConstraint


def risk_coefficients(game: TransitGame) -> tuple[np.ndarray, np.ndarray]:
    """Last-step patroller sequences and their off-base mass ``sum_{c != base} T(s, a, c)``."""
    t = game.horizon - 1
    idx, coef = [], []
    for j, (c, tt) in enumerate(game.states(1)):
        if tt != t:
            continue
        lo = int(game.patroller_space.action_ptr[j])
        for k, (_, target) in enumerate(game.state_actions(1, j)):
            off = sum(p for c2, p in game.kernel(c, target).items() if c2 != game.base)
            if off > 0.0:
                idx.append(lo + k)
                coef.append(off)
    return np.array(idx, dtype=np.int64), np.array(coef, dtype=float)


def build_risk_constraint(game: TransitGame, b_r: float) -> LinearConstraint:
    """``f(x) = Pr[patroller not at base at the end] - b_r``.

    The probability is linear in the occupancy measure of the final step, so
    the subgradient is supported on last-step sequences only.
    """
    if not 0.0 <= b_r <= 1.0:
        raise ValueError(f"risk bound must lie in [0, 1], got {b_r}")
    idx, coef = risk_coefficients(game)
    return LinearConstraint(idx, coef, b_r, game.patroller_space.num_sequences,
                            name=f"risk<={b_r:g}")


def patroller_risk(game: TransitGame, x: np.ndarray) -> float:
    idx, coef = risk_coefficients(game)
    return float(coef @ np.asarray(x)[idx])
