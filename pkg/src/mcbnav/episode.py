"""Episode-boundary management for collision-reset policies.

Separates two notions that conventional pipelines conflate: a *local
termination* (a collision that yields a terminal-flagged, penalized
transition but keeps the scene) and a *global reset* (new start pose and
goal). A per-episode collision counter is held against a budget K; the
single-collision-reset baseline is exactly the K=1 special case.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .world import Scenario, SimOutcome

DEFAULT_T_MAX = 200


class EventKind(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    NONE = "none"


class ResetReason(str, Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget_exhausted"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class EpisodeState:
    t: int  # steps taken so far (0 at episode start)
    c: int  # collisions this episode
    b: bool  # previous event was a collision
    t_max: int
    scenario: Scenario | None = None


@dataclass(frozen=True)
class StepDirective:
    terminal: int  # d: 1 iff event is success or collision
    bridge: int  # 1 iff previous event was a collision and this one is not
    reset: ResetReason | None  # None means continue in the same scene

    @property
    def continues(self) -> bool:
        return self.reset is None


def begin_episode(scenario: Scenario | None,
                  t_max: int = DEFAULT_T_MAX) -> EpisodeState:
    return EpisodeState(t=0, c=0, b=False, t_max=t_max, scenario=scenario)


def classify_event(outcome: SimOutcome, t: int, t_max: int) -> EventKind:
    """Map a simulator outcome at (1-based) step t to its event kind.

    Collision takes precedence over timeout at the horizon: the penalty
    must still be recorded even on the final step.
    """
    if outcome.collided:
        return EventKind.COLLISION
    if outcome.goal_reached:
        return EventKind.SUCCESS
    if t >= t_max:
        return EventKind.TIMEOUT
    return EventKind.NONE


def on_step(state: EpisodeState, event: EventKind,
            k: int) -> tuple[EpisodeState, StepDirective]:
    """Advance counters and decide continue / global reset for one step.

    Terminal flag d marks success and collision only; timeout is
    truncation and keeps d=0 so the critic still bootstraps. A collision
    within budget leaves the scene untouched (local termination); the
    reset fires on success, on the counter reaching k, or at the horizon,
    in that precedence order.
    """
    t_new = state.t + 1
    c_new = state.c + (1 if event is EventKind.COLLISION else 0)
    terminal = 1 if event in (EventKind.SUCCESS, EventKind.COLLISION) else 0
    bridge = 1 if (state.b and event is not EventKind.COLLISION) else 0

    if event is EventKind.SUCCESS:
        reset = ResetReason.SUCCESS
    elif c_new >= k:
        reset = ResetReason.BUDGET_EXHAUSTED
    elif t_new >= state.t_max:
        reset = ResetReason.TIMEOUT
    else:
        reset = None

    new_state = replace(state, t=t_new, c=c_new,
                        b=(event is EventKind.COLLISION))
    return new_state, StepDirective(terminal=terminal, bridge=bridge,
                                    reset=reset)


def scr_mode(state: EpisodeState,
             event: EventKind) -> tuple[EpisodeState, StepDirective]:
    """Single-collision-reset baseline: every collision resets globally."""
    return on_step(state, event, k=1)
