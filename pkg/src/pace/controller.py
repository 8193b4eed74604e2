"""Playback speed adaptation: one ±step decision per punchline.

A laugh at a punchline raises the rate by one step, no laugh lowers it,
and the result is clamped to [min_rate, max_rate]. Every new rate is
snapped back onto the step grid so repeated binary-float ±0.1 arithmetic
cannot drift off {0.6, 0.7, 0.8, 0.9, 1.0}. Rate changes take effect at
punchline end, after the laugh window has closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Cause, PlaybackState, SpeedCommand
from .expression import PunchlineResponse

GRID_TOLERANCE = 1e-9


class OffGridError(ValueError):
    """Playback state carries a rate that is not on the controller grid."""


@dataclass(frozen=True)
class ControllerConfig:
    """Step size and rate clamp. Defaults: ±0.1x within [0.6x, 1.0x], start at 1.0x."""

    step: float = 0.1
    min_rate: float = 0.6
    max_rate: float = 1.0
    initial_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.step <= 0.0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not (0.0 < self.min_rate <= self.initial_rate <= self.max_rate):
            raise ValueError(
                f"need 0 < min_rate <= initial_rate <= max_rate, got "
                f"({self.min_rate}, {self.initial_rate}, {self.max_rate})"
            )
        span_steps = (self.max_rate - self.min_rate) / self.step
        if abs(span_steps - round(span_steps)) > GRID_TOLERANCE:
            raise ValueError(
                f"(max_rate - min_rate) must be an integer multiple of step, "
                f"got span {self.max_rate - self.min_rate} with step {self.step}"
            )
        if abs(self.snap(self.initial_rate) - self.initial_rate) > GRID_TOLERANCE:
            raise ValueError(f"initial_rate {self.initial_rate} is not on the step grid")

    def snap(self, rate: float) -> float:
        """Nearest step-grid point, rounded to kill accumulated float noise."""
        steps = round((rate - self.min_rate) / self.step)
        return round(self.min_rate + steps * self.step, 10)

    def on_grid(self, rate: float) -> bool:
        return (
            self.min_rate - GRID_TOLERANCE <= rate <= self.max_rate + GRID_TOLERANCE
            and abs(self.snap(rate) - rate) <= GRID_TOLERANCE
        )


def step(
    state: PlaybackState,
    laughed: bool,
    cfg: ControllerConfig = ControllerConfig(),
    t: float = 0.0,
) -> tuple[PlaybackState, SpeedCommand | None]:
    """Advance the state by one punchline decision.

    Returns the new state and a :class:`SpeedCommand` stamped at media
    time ``t`` iff the rate actually changed (pushing against a clamp
    boundary emits nothing).
    """
    if not cfg.on_grid(state.rate):
        raise OffGridError(
            f"state rate {state.rate} is off the {cfg.step} grid in "
            f"[{cfg.min_rate}, {cfg.max_rate}]"
        )
    delta = cfg.step if laughed else -cfg.step
    new_rate = cfg.snap(min(cfg.max_rate, max(cfg.min_rate, state.rate + delta)))
    new_state = PlaybackState(rate=new_rate, punchlines_seen=state.punchlines_seen + 1)
    if math.isclose(new_rate, state.rate, abs_tol=GRID_TOLERANCE):
        return new_state, None
    cause = Cause.LAUGH if laughed else Cause.NO_LAUGH
    return new_state, SpeedCommand(t=t, rate=new_rate, cause=cause)


def run(
    responses: Sequence[PunchlineResponse],
    cfg: ControllerConfig = ControllerConfig(),
) -> tuple[list[SpeedCommand], PlaybackState]:
    """Fold :func:`step` over a session's punchline responses.

    Each emitted command is stamped at the triggering segment's end.
    """
    state = PlaybackState(rate=cfg.initial_rate, punchlines_seen=0)
    commands: list[SpeedCommand] = []
    for response in responses:
        state, command = step(state, response.laughed, cfg, t=response.segment.end)
        if command is not None:
            commands.append(command)
    return commands, state


def run_flags(
    flags: Iterable[bool], cfg: ControllerConfig = ControllerConfig()
) -> tuple[list[SpeedCommand], PlaybackState]:
    """Fold over bare laughed flags (no segment times; commands at t=0)."""
    state = PlaybackState(rate=cfg.initial_rate, punchlines_seen=0)
    commands: list[SpeedCommand] = []
    for laughed in flags:
        state, command = step(state, laughed, cfg)
        if command is not None:
            commands.append(command)
    return commands, state
