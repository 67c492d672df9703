"""Deterministic annealing of the data term during training."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from bhme.core.errors import InvalidArgumentError


class AnnealingMode(str, enum.Enum):
    # decay for switch_iteration sweeps, then jump to the terminal value
    literal = "literal"
    # decay, never going below the terminal value
    clamped = "clamped"
    none = "none"


@dataclass(frozen=True)
class AnnealingConfig:
    mode: AnnealingMode = AnnealingMode.literal
    initial: float = 5.85
    decay: float = 0.97
    switch_iteration: int = 200
    terminal: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", AnnealingMode(self.mode))
        except ValueError as exc:
            raise InvalidArgumentError(f"Unknown annealing mode {self.mode!r}") from exc
        if self.initial <= 0 or self.decay <= 0 or self.terminal <= 0:
            raise InvalidArgumentError(
                "Annealing initial, decay and terminal values must be positive"
            )
        if self.switch_iteration < 0:
            raise InvalidArgumentError("Annealing switch_iteration must be >= 0")


def annealing_schedule(iteration: int, config: AnnealingConfig) -> float:
    """Inverse temperature applied to the data term at sweep ``iteration``."""
    if iteration < 0:
        raise InvalidArgumentError(f"iteration must be >= 0, got {iteration}")
    if config.mode is AnnealingMode.none:
        return config.terminal
    decayed = config.initial * config.decay**iteration
    if config.mode is AnnealingMode.clamped:
        return max(decayed, config.terminal)
    return decayed if iteration < config.switch_iteration else config.terminal


def is_terminal(iteration: int, config: AnnealingConfig) -> bool:
    """True once the schedule has settled on its terminal value for good."""
    if config.mode is AnnealingMode.none:
        return True
    if config.mode is AnnealingMode.literal:
        return iteration >= config.switch_iteration
    if config.decay >= 1.0 and config.initial > config.terminal:
        return False
    return annealing_schedule(iteration, config) == config.terminal
