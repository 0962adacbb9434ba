"""Built-in benchmark games."""

from .poker import (
    Abstraction,
    PokerGame,
    PokerRules,
    build_kuhn,
    build_leduc,
    build_leduc_abstraction,
    kuhn_poker,
    leduc_poker,
)
from .transit import TransitGame, build_transit

__all__ = [
    "Abstraction",
    "PokerGame",
    "PokerRules",
    "TransitGame",
    "build_kuhn",
    "build_leduc",
    "build_leduc_abstraction",
    "build_transit",
    "kuhn_poker",
    "leduc_poker",
]
