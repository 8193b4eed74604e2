"""Adaptive-playback toolkit: laugh-driven speed control for language learning videos.

Watch comprehension, not the clock: the controller slows playback when a
viewer fails to laugh at punchlines and speeds it back up when they do,
within a 0.6x to 1.0x range in 0.1x steps. The package bundles the full
loop (laugh-track punchline detection, facial-expression gating, the rate
controller, steady-pitch time stretching) plus the evaluation apparatus
(questionnaire scoring, group allocation, rank statistics) and a session
engine with live serving, simulation, logging, and replay.
"""

from .core import (
    AUFrame,
    AUSeries,
    Cause,
    EventKind,
    PlaybackState,
    PunchlineSegment,
    SessionEvent,
    SpeedCommand,
    Timeline,
    validate_timeline,
)
from .controller import ControllerConfig
from .expression import Baseline, LaughEvent, LaughParams, PunchlineResponse
from .laughtrack import AudioBuffer, DetectorConfig, FeatureSeries
from .session import (
    LearnerModel,
    LiveSession,
    SessionConfig,
    SessionLog,
    read_log,
    replay,
    simulate,
    write_log,
)
from .timestretch import WsolaParams, stretch

__version__ = "0.1.0"

__all__ = [
    "AUFrame",
    "AUSeries",
    "AudioBuffer",
    "Baseline",
    "Cause",
    "ControllerConfig",
    "DetectorConfig",
    "EventKind",
    "FeatureSeries",
    "LaughEvent",
    "LaughParams",
    "LearnerModel",
    "LiveSession",
    "PlaybackState",
    "PunchlineResponse",
    "PunchlineSegment",
    "SessionConfig",
    "SessionEvent",
    "SessionLog",
    "SpeedCommand",
    "Timeline",
    "WsolaParams",
    "read_log",
    "replay",
    "simulate",
    "stretch",
    "validate_timeline",
    "write_log",
    "__version__",
]
