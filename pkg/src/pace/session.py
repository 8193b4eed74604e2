"""Viewing-session engine: simulate, run live, log, and replay.

A session walks a punchline timeline with the speed controller. Live
sessions consume wire messages (AU frames, manual markers, media-clock
ticks), decide each punchline when its response window closes, and emit
speed commands. Simulated sessions replace the viewer with a learner
model. Both produce a SessionLog that `replay` can re-derive end to end.

Wire protocol (JSON, one message per frame):
  inbound   {"type": "au", "t": f, "au14": f}
            {"type": "marker", "t": f}
            {"type": "tick", "t": f}
            {"type": "hello", "role": "sensor" | "player"}
  outbound  {"type": "speed", "rate": f, "t": f, "cause": s}
            {"type": "state", "rate": f, "punchlines_seen": n}
            {"type": "error", "code": s}

Logs are JSON Lines: a config header record, one record per session
event, and a closing summary record with the final state and viewing
time. Viewing time is the sum over inter-punchline media spans of
span_duration / rate_in_effect.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .controller import ControllerConfig, GRID_TOLERANCE
from .controller import step as controller_step
from .core import (
    AUFrame,
    AUSeries,
    EventKind,
    PlaybackState,
    SessionEvent,
    Timeline,
    clamp_au,
    timeline_from_dict,
    timeline_to_dict,
    validate_timeline,
)
from .expression import (
    Baseline,
    InsufficientDataError,
    LaughEvent,
    LaughParams,
    calibrate_baseline,
    detect_laugh_events,
    decide_punchline_response,
    marker_event,
    window_coverage,
)

LOG_VERSION = 1
DROPOUT_COVERAGE = 0.5

ERR_BAD_MESSAGE = "bad_message"
ERR_UNKNOWN_TYPE = "unknown_type"
ERR_BAD_FIELD = "bad_field"

WARN_DROPOUT = "sensor_dropout"
WARN_UNCALIBRATED = "uncalibrated"
WARN_NONMONOTONIC_AU = "nonmonotonic_au"
WARN_NONMONOTONIC_TICK = "nonmonotonic_tick"
WARN_AU_CLAMPED = "au_clamped"


class ConfigVersionError(ValueError):
    """Log header declares a version this engine cannot interpret."""


class MalformedLogError(ValueError):
    """Log file lacks the expected header, records, or summary."""


class ReplayMismatchError(ValueError):
    """Replay derived a different decision or command than the log records."""

    def __init__(self, index: int, kind: str, detail: str) -> None:
        super().__init__(f"replay diverged at event {index} ({kind}): {detail}")
        self.index = index
        self.kind = kind
        self.detail = detail


class LearnerKind(str, Enum):
    ALWAYS = "always"
    NEVER = "never"
    THRESHOLD = "threshold"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LearnerModel:
    """Synthetic viewer: maps the current rate to a laugh/no-laugh response.

    `always` and `never` are the two extremes; `threshold` laughs exactly
    when the rate is at or below threshold_rate (a step-function stand-in
    for limited proficiency); `logistic` draws a seeded Bernoulli with
    p = 1 / (1 + exp(slope * (rate - midpoint_rate))).
    """

    kind: LearnerKind
    threshold_rate: float = 0.8
    slope: float = 8.0
    midpoint_rate: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LearnerKind(self.kind))
        if self.threshold_rate <= 0:
            raise ValueError(f"threshold_rate must be positive, got {self.threshold_rate}")

    @classmethod
    def parse(cls, text: str) -> "LearnerModel":
        """Parse CLI shorthand: never | always | threshold:0.8 | logistic:slope=8,midpoint=0.8,seed=0."""
        head, _, arg = text.partition(":")
        kind = LearnerKind(head)
        if kind in (LearnerKind.ALWAYS, LearnerKind.NEVER):
            if arg:
                raise ValueError(f"learner {head!r} takes no argument, got {arg!r}")
            return cls(kind=kind)
        if kind is LearnerKind.THRESHOLD:
            return cls(kind=kind, threshold_rate=float(arg)) if arg else cls(kind=kind)
        fields = {"slope": 8.0, "midpoint": 0.8, "seed": 0}
        if arg:
            for part in arg.split(","):
                key, _, value = part.partition("=")
                if key not in fields:
                    raise ValueError(f"unknown logistic field {key!r}")
                fields[key] = int(value) if key == "seed" else float(value)
        return cls(
            kind=kind,
            slope=float(fields["slope"]),
            midpoint_rate=float(fields["midpoint"]),
            seed=int(fields["seed"]),
        )

    def decide(self, rate: float, rng: random.Random) -> bool:
        if self.kind is LearnerKind.ALWAYS:
            return True
        if self.kind is LearnerKind.NEVER:
            return False
        if self.kind is LearnerKind.THRESHOLD:
            return rate <= self.threshold_rate + GRID_TOLERANCE
        p = 1.0 / (1.0 + math.exp(self.slope * (rate - self.midpoint_rate)))
        return rng.random() < p


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs to be reproduced: timeline plus parameters."""

    timeline: Timeline
    controller: ControllerConfig = ControllerConfig()
    laugh: LaughParams = LaughParams()
    calibration_duration: float = 30.0
    session_id: str = "session"

    def __post_init__(self) -> None:
        validate_timeline(self.timeline)
        if self.calibration_duration <= 0:
            raise ValueError(
                f"calibration_duration must be positive, got {self.calibration_duration}"
            )
        if not self.session_id:
            raise ValueError("session_id must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": LOG_VERSION,
            "session_id": self.session_id,
            "timeline": timeline_to_dict(self.timeline),
            "controller": {
                "step": self.controller.step,
                "min_rate": self.controller.min_rate,
                "max_rate": self.controller.max_rate,
                "initial_rate": self.controller.initial_rate,
            },
            "laugh": {
                "k_sigma": self.laugh.k_sigma,
                "min_hold": self.laugh.min_hold,
                "lead": self.laugh.lead,
                "lag": self.laugh.lag,
            },
            "calibration_duration": self.calibration_duration,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SessionConfig":
        version = data.get("version")
        if version != LOG_VERSION:
            raise ConfigVersionError(f"cannot interpret config version {version!r}")
        return cls(
            timeline=timeline_from_dict(data["timeline"]),
            controller=ControllerConfig(**data["controller"]),
            laugh=LaughParams(**data["laugh"]),
            calibration_duration=float(data["calibration_duration"]),
            session_id=str(data["session_id"]),
        )


@dataclass(frozen=True)
class SessionLog:
    """Complete record of one session: config, ordered events, outcome."""

    config: SessionConfig
    events: tuple[SessionEvent, ...]
    final_state: PlaybackState
    viewing_time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.wall_time < prev.wall_time:
                raise ValueError("events must be ordered by non-decreasing wall_time")

    def events_of(self, kind: EventKind) -> list[SessionEvent]:
        return [e for e in self.events if e.kind is kind]

    @property
    def commands(self) -> list[dict[str, Any]]:
        """Speed-command payloads, in order."""
        return [dict(e.payload) for e in self.events_of(EventKind.SPEED_COMMAND)]


def compute_viewing_time(timeline: Timeline, span_rates: Sequence[float]) -> float:
    """Fold span_duration / rate over the spans between punchline ends.

    span_rates[i] is the rate in effect on the i-th span; spans are
    [0, end_1), [end_1, end_2), ..., [end_n, media_duration].
    """
    boundaries = [seg.end for seg in timeline.segments]
    if len(span_rates) != len(boundaries) + 1:
        raise ValueError(
            f"need {len(boundaries) + 1} span rates for {len(boundaries)} punchlines, "
            f"got {len(span_rates)}"
        )
    total = 0.0
    prev = 0.0
    for boundary, rate in zip(boundaries, span_rates):
        total += (boundary - prev) / rate
        prev = boundary
    return total + (timeline.media_duration - prev) / span_rates[-1]


def _evidence_payload(evidence: LaughEvent | None) -> dict[str, Any] | None:
    if evidence is None:
        return None
    return {
        "start": evidence.start,
        "end": evidence.end,
        # Manual markers carry infinite peak priority; JSON gets null.
        "peak_au14": None if math.isinf(evidence.peak_au14) else evidence.peak_au14,
        "source": "marker" if math.isinf(evidence.peak_au14) else "au",
    }


def _evidence_from_payload(data: Mapping[str, Any] | None) -> LaughEvent | None:
    if data is None:
        return None
    peak = data.get("peak_au14")
    return LaughEvent(
        start=float(data["start"]),
        end=float(data["end"]),
        peak_au14=math.inf if peak is None else float(peak),
    )


@dataclass
class _DecisionOutcome:
    laughed: bool
    evidence: LaughEvent | None
    coverage: float | None
    warnings: list[dict[str, Any]]


def _decide_window(
    cfg: SessionConfig,
    index: int,
    frames: Sequence[AUFrame],
    markers: Sequence[LaughEvent],
    baseline: Baseline | None,
) -> _DecisionOutcome:
    """Shared live/replay decision for one punchline window.

    Positive evidence (an AU excursion or a manual marker) always wins;
    with no evidence, sensor dropout or a missing calibration is flagged
    and the decision errs toward no-laugh, i.e. toward slowing down.
    """
    segment = cfg.timeline.segments[index]
    series = AUSeries(frames=tuple(frames))
    au_events: list[LaughEvent] = []
    if baseline is not None and frames:
        au_events = detect_laugh_events(series, baseline, cfg.laugh)
    events = sorted([*au_events, *markers], key=lambda e: (e.start, e.end))
    window_timeline = Timeline(
        media_duration=cfg.timeline.media_duration, segments=(segment,)
    )
    response = decide_punchline_response(window_timeline, events, cfg.laugh)[0]
    coverage = window_coverage(series, segment, cfg.laugh)

    warnings: list[dict[str, Any]] = []
    if not response.laughed:
        if frames and baseline is None:
            warnings.append({"code": WARN_UNCALIBRATED, "index": index})
        if coverage < DROPOUT_COVERAGE:
            warnings.append({"code": WARN_DROPOUT, "index": index, "coverage": coverage})
    return _DecisionOutcome(
        laughed=response.laughed,
        evidence=response.evidence,
        coverage=coverage,
        warnings=warnings,
    )


def _decision_payload(
    index: int,
    segment: Any,
    laughed: bool,
    rate_before: float,
    rate_after: float,
    evidence: LaughEvent | None,
    coverage: float | None,
) -> dict[str, Any]:
    return {
        "index": index,
        "start": segment.start,
        "end": segment.end,
        "laughed": laughed,
        "rate_before": rate_before,
        "rate_after": rate_after,
        "evidence": _evidence_payload(evidence),
        "coverage": coverage,
    }


def _command_payload(command: Any) -> dict[str, Any]:
    return {"t": command.t, "rate": command.rate, "cause": command.cause.value}


def simulate(cfg: SessionConfig, learner: LearnerModel) -> SessionLog:
    """Run a full session against a learner model; deterministic given the seed.

    Event wall times are the simulated wall clock: media time divided by
    the rate in effect, accumulated span by span.
    """
    if learner.kind is LearnerKind.THRESHOLD and not cfg.controller.on_grid(
        learner.threshold_rate
    ):
        raise ValueError(
            f"threshold_rate {learner.threshold_rate} is off the controller grid"
        )
    state = PlaybackState(rate=cfg.controller.initial_rate, punchlines_seen=0)
    rng = random.Random(learner.seed)
    events: list[SessionEvent] = []
    wall = 0.0
    prev_boundary = 0.0
    for index, segment in enumerate(cfg.timeline.segments):
        wall += (segment.end - prev_boundary) / state.rate
        prev_boundary = segment.end
        laughed = learner.decide(state.rate, rng)
        rate_before = state.rate
        state, command = controller_step(state, laughed, cfg.controller, t=segment.end)
        events.append(
            SessionEvent(
                wall_time=wall,
                kind=EventKind.DECISION,
                payload=_decision_payload(
                    index, segment, laughed, rate_before, state.rate, None, None
                ),
            )
        )
        if command is not None:
            events.append(
                SessionEvent(
                    wall_time=wall,
                    kind=EventKind.SPEED_COMMAND,
                    payload=_command_payload(command),
                )
            )
    wall += (cfg.timeline.media_duration - prev_boundary) / state.rate
    return SessionLog(
        config=cfg, events=tuple(events), final_state=state, viewing_time=wall
    )


@dataclass(frozen=True)
class HandleResult:
    """Messages produced by one inbound message: direct replies plus player broadcasts."""

    replies: tuple[dict[str, Any], ...] = ()
    broadcasts: tuple[dict[str, Any], ...] = ()


class LiveSession:
    """Single-session state machine over the wire protocol.

    Messages are processed strictly in arrival order. The media clock
    comes only from player ticks; a tick that crosses a punchline
    window's close boundary (end + lag) triggers the decision for that
    window and, when the rate changes, a speed broadcast.
    """

    def __init__(
        self, cfg: SessionConfig, wall_clock: Callable[[], float] | None = None
    ) -> None:
        self.cfg = cfg
        self.state = PlaybackState(rate=cfg.controller.initial_rate, punchlines_seen=0)
        self._clock = wall_clock if wall_clock is not None else time.time
        self._events: list[SessionEvent] = []
        self._frames: list[AUFrame] = []
        self._markers: list[LaughEvent] = []
        self._baseline: Baseline | None = None
        self._media_t = 0.0
        self._last_wall = -math.inf
        self._opened = 0
        self._decided = 0
        self._rates_after: list[float] = []

    # -- internals ---------------------------------------------------------

    def _now(self) -> float:
        wall = float(self._clock())
        if wall < self._last_wall:
            wall = self._last_wall
        self._last_wall = wall
        return wall

    def _log(self, kind: EventKind, payload: Mapping[str, Any]) -> None:
        self._events.append(
            SessionEvent(wall_time=self._now(), kind=kind, payload=dict(payload))
        )

    def _error(self, code: str, detail: str) -> HandleResult:
        self._log(EventKind.PROTOCOL_ERROR, {"code": code, "detail": detail})
        return HandleResult(replies=({"type": "error", "code": code},))

    def _ensure_baseline(self) -> None:
        if self._baseline is None and self._frames:
            try:
                self._baseline = calibrate_baseline(
                    AUSeries(frames=tuple(self._frames)), self.cfg.calibration_duration
                )
            except InsufficientDataError:
                self._baseline = None

    def _decide_next_window(self) -> list[dict[str, Any]]:
        index = self._decided
        segment = self.cfg.timeline.segments[index]
        self._ensure_baseline()
        outcome = _decide_window(
            self.cfg, index, self._frames, self._markers, self._baseline
        )
        for warning in outcome.warnings:
            self._log(EventKind.WARNING, warning)
        rate_before = self.state.rate
        self.state, command = controller_step(
            self.state, outcome.laughed, self.cfg.controller, t=segment.end
        )
        self._log(
            EventKind.DECISION,
            _decision_payload(
                index,
                segment,
                outcome.laughed,
                rate_before,
                self.state.rate,
                outcome.evidence,
                outcome.coverage,
            ),
        )
        self._decided += 1
        self._rates_after.append(self.state.rate)
        if command is None:
            return []
        payload = _command_payload(command)
        self._log(EventKind.SPEED_COMMAND, payload)
        return [{"type": "speed", **payload}]

    # -- message handlers --------------------------------------------------

    def handle_message(self, raw: str | bytes | Mapping[str, Any]) -> HandleResult:
        """Process one inbound wire message; never raises on bad input."""
        if isinstance(raw, Mapping):
            msg: Any = dict(raw)
        else:
            try:
                msg = json.loads(raw)
            except (json.JSONDecodeError, UnicodeDecodeError):
                return self._error(ERR_BAD_MESSAGE, "payload is not valid JSON")
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            return self._error(ERR_BAD_MESSAGE, "message must be an object with a type")

        kind = msg["type"]
        if kind == "au":
            return self._handle_au(msg)
        if kind == "marker":
            return self._handle_marker(msg)
        if kind == "tick":
            return self._handle_tick(msg)
        if kind == "hello":
            return self._handle_hello(msg)
        return self._error(ERR_UNKNOWN_TYPE, f"unknown message type {kind!r}")

    def _media_time_field(self, msg: Mapping[str, Any]) -> float | None:
        t = msg.get("t")
        if not isinstance(t, (int, float)) or isinstance(t, bool):
            return None
        t = float(t)
        if not math.isfinite(t) or t < 0.0:
            return None
        return t

    def _handle_au(self, msg: Mapping[str, Any]) -> HandleResult:
        t = self._media_time_field(msg)
        value = msg.get("au14")
        if t is None or not isinstance(value, (int, float)) or isinstance(value, bool):
            return self._error(ERR_BAD_FIELD, "au needs finite numeric t >= 0 and au14")
        if self._frames and t <= self._frames[-1].t:
            self._log(EventKind.WARNING, {"code": WARN_NONMONOTONIC_AU, "t": t})
            return HandleResult()
        au14, clamped = clamp_au(float(value))
        if clamped:
            self._log(EventKind.WARNING, {"code": WARN_AU_CLAMPED, "t": t, "au14": float(value)})
        self._frames.append(AUFrame(t=t, au14=au14))
        self._log(EventKind.AU_FRAME, {"t": t, "au14": au14})
        return HandleResult()

    def _handle_marker(self, msg: Mapping[str, Any]) -> HandleResult:
        t = self._media_time_field(msg)
        if t is None:
            return self._error(ERR_BAD_FIELD, "marker needs finite numeric t >= 0")
        event = marker_event(t)
        self._markers.append(event)
        self._log(EventKind.LAUGH_EVENT, _evidence_payload(event) or {})
        return HandleResult()

    def _handle_tick(self, msg: Mapping[str, Any]) -> HandleResult:
        t = self._media_time_field(msg)
        if t is None:
            return self._error(ERR_BAD_FIELD, "tick needs finite numeric t >= 0")
        if t < self._media_t:
            self._log(EventKind.WARNING, {"code": WARN_NONMONOTONIC_TICK, "t": t})
            return HandleResult()
        self._media_t = t
        segments = self.cfg.timeline.segments
        broadcasts: list[dict[str, Any]] = []
        while self._opened < len(segments) and segments[self._opened].start <= t:
            self._log(
                EventKind.PUNCHLINE_OPEN,
                {
                    "index": self._opened,
                    "start": segments[self._opened].start,
                    "end": segments[self._opened].end,
                },
            )
            self._opened += 1
        while (
            self._decided < len(segments)
            and segments[self._decided].end + self.cfg.laugh.lag <= t
        ):
            index = self._decided
            self._log(
                EventKind.PUNCHLINE_CLOSE,
                {
                    "index": index,
                    "start": segments[index].start,
                    "end": segments[index].end,
                },
            )
            broadcasts.extend(self._decide_next_window())
        return HandleResult(broadcasts=tuple(broadcasts))

    def _handle_hello(self, msg: Mapping[str, Any]) -> HandleResult:
        role = msg.get("role")
        if role not in ("sensor", "player"):
            return self._error(ERR_BAD_FIELD, "hello role must be 'sensor' or 'player'")
        replies: list[dict[str, Any]] = [
            {
                "type": "state",
                "rate": self.state.rate,
                "punchlines_seen": self.state.punchlines_seen,
            }
        ]
        if role == "player":
            replies.append(
                {"type": "speed", "rate": self.state.rate, "t": self._media_t, "cause": "init"}
            )
        return HandleResult(replies=tuple(replies))

    # -- outcome -----------------------------------------------------------

    @property
    def events(self) -> tuple[SessionEvent, ...]:
        return tuple(self._events)

    def finalize(self) -> SessionLog:
        """Close the session and compute the viewing-time summary.

        Punchlines whose windows never closed keep the rate unchanged
        across their span boundary.
        """
        rates = list(self._rates_after)
        carry = rates[-1] if rates else self.cfg.controller.initial_rate
        initial = self.cfg.controller.initial_rate
        span_rates = [initial, *rates]
        while len(span_rates) < len(self.cfg.timeline.segments) + 1:
            span_rates.append(carry)
        return SessionLog(
            config=self.cfg,
            events=tuple(self._events),
            final_state=self.state,
            viewing_time=compute_viewing_time(self.cfg.timeline, span_rates),
        )


# -- persistence -------------------------------------------------------------


def config_record(cfg: SessionConfig) -> dict[str, Any]:
    return {"record": "config", **cfg.to_dict()}


def event_record(event: SessionEvent) -> dict[str, Any]:
    return {
        "record": "event",
        "wall_time": event.wall_time,
        "kind": event.kind.value,
        "payload": event.payload,
    }


def summary_record(final_state: PlaybackState, viewing_time: float) -> dict[str, Any]:
    return {
        "record": "summary",
        "final_state": {
            "rate": final_state.rate,
            "punchlines_seen": final_state.punchlines_seen,
        },
        "viewing_time": viewing_time,
    }


def write_log(log: SessionLog, path: str | Path) -> None:
    """Write a session log as JSON Lines: config header, events, summary."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(config_record(log.config), allow_nan=False))
        fh.write("\n")
        for event in log.events:
            fh.write(json.dumps(event_record(event), allow_nan=False))
            fh.write("\n")
        fh.write(json.dumps(summary_record(log.final_state, log.viewing_time), allow_nan=False))
        fh.write("\n")


def read_log(path: str | Path) -> SessionLog:
    """Read a JSON Lines session log written by write_log."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLogError(f"line {number} is not valid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise MalformedLogError(f"line {number} is not a JSON object")
        records.append(record)
    if not records or records[0].get("record") != "config":
        raise MalformedLogError("log must start with a config record")
    if records[-1].get("record") != "summary":
        raise MalformedLogError("log must end with a summary record")
    cfg = SessionConfig.from_dict(records[0])
    events = []
    for record in records[1:-1]:
        if record.get("record") != "event":
            raise MalformedLogError(f"unexpected record {record.get('record')!r} in log body")
        events.append(
            SessionEvent(
                wall_time=float(record["wall_time"]),
                kind=EventKind(record["kind"]),
                payload=record["payload"],
            )
        )
    summary = records[-1]
    return SessionLog(
        config=cfg,
        events=tuple(events),
        final_state=PlaybackState(
            rate=float(summary["final_state"]["rate"]),
            punchlines_seen=int(summary["final_state"]["punchlines_seen"]),
        ),
        viewing_time=float(summary["viewing_time"]),
    )


# -- replay -------------------------------------------------------------------


def replay(log: SessionLog) -> SessionLog:
    """Re-derive every decision and command in a log and verify they match.

    Logs carrying AU frames or markers are re-decided from that evidence,
    processed in the recorded order so lazy calibration behaves exactly as
    it did live. Evidence-free logs (simulations) treat the recorded
    laughed flags as inputs and re-derive the controller fold. The first
    divergent decision or command raises ReplayMismatchError.
    """
    cfg = log.config
    has_evidence = any(
        e.kind in (EventKind.AU_FRAME, EventKind.LAUGH_EVENT) for e in log.events
    )
    state = PlaybackState(rate=cfg.controller.initial_rate, punchlines_seen=0)
    frames: list[AUFrame] = []
    markers: list[LaughEvent] = []
    baseline: Baseline | None = None
    rates_after: list[float] = []
    rebuilt: list[SessionEvent] = []
    pending_command: dict[str, Any] | None = None
    decided = 0

    def rebuilt_event(source: SessionEvent, payload: dict[str, Any]) -> SessionEvent:
        return SessionEvent(wall_time=source.wall_time, kind=source.kind, payload=payload)

    for position, event in enumerate(log.events):
        if event.kind is EventKind.SPEED_COMMAND:
            if pending_command is None:
                raise ReplayMismatchError(
                    position, event.kind.value, "log has a command the fold did not produce"
                )
            if event.payload != pending_command:
                raise ReplayMismatchError(
                    position,
                    event.kind.value,
                    f"expected {pending_command}, log has {dict(event.payload)}",
                )
            rebuilt.append(rebuilt_event(event, pending_command))
            pending_command = None
            continue
        if pending_command is not None:
            raise ReplayMismatchError(
                position, event.kind.value, f"fold produced a command the log lacks: {pending_command}"
            )
        if event.kind is EventKind.AU_FRAME:
            frames.append(
                AUFrame(t=float(event.payload["t"]), au14=float(event.payload["au14"]))
            )
            rebuilt.append(event)
        elif event.kind is EventKind.LAUGH_EVENT:
            marker = _evidence_from_payload(event.payload)
            if marker is not None:
                markers.append(marker)
            rebuilt.append(event)
        elif event.kind is EventKind.DECISION:
            index = int(event.payload["index"])
            if index != decided or index >= len(cfg.timeline.segments):
                raise ReplayMismatchError(
                    position, event.kind.value, f"decision for index {index}, expected {decided}"
                )
            segment = cfg.timeline.segments[index]
            if has_evidence:
                if baseline is None and frames:
                    try:
                        baseline = calibrate_baseline(
                            AUSeries(frames=tuple(frames)), cfg.calibration_duration
                        )
                    except InsufficientDataError:
                        baseline = None
                outcome = _decide_window(cfg, index, frames, markers, baseline)
                laughed = outcome.laughed
                evidence = outcome.evidence
                coverage = outcome.coverage
            else:
                laughed = bool(event.payload["laughed"])
                evidence = _evidence_from_payload(event.payload.get("evidence"))
                coverage = event.payload.get("coverage")
            rate_before = state.rate
            state, command = controller_step(state, laughed, cfg.controller, t=segment.end)
            rates_after.append(state.rate)
            decided += 1
            payload = _decision_payload(
                index, segment, laughed, rate_before, state.rate, evidence, coverage
            )
            if payload != dict(event.payload):
                raise ReplayMismatchError(
                    position,
                    event.kind.value,
                    f"expected {payload}, log has {dict(event.payload)}",
                )
            rebuilt.append(rebuilt_event(event, payload))
            if command is not None:
                pending_command = _command_payload(command)
        else:
            # open/close markers, warnings, protocol errors: carried through.
            rebuilt.append(event)

    if pending_command is not None:
        raise ReplayMismatchError(
            len(log.events), EventKind.SPEED_COMMAND.value,
            f"fold produced a trailing command the log lacks: {pending_command}",
        )

    initial = cfg.controller.initial_rate
    carry = rates_after[-1] if rates_after else initial
    span_rates = [initial, *rates_after]
    while len(span_rates) < len(cfg.timeline.segments) + 1:
        span_rates.append(carry)
    viewing_time = compute_viewing_time(cfg.timeline, span_rates)
    if abs(viewing_time - log.viewing_time) > 1e-9:
        raise ReplayMismatchError(
            len(log.events), "summary",
            f"viewing_time {viewing_time!r} != logged {log.viewing_time!r}",
        )
    if state != log.final_state:
        raise ReplayMismatchError(
            len(log.events), "summary", f"final state {state} != logged {log.final_state}"
        )
    return SessionLog(
        config=cfg, events=tuple(rebuilt), final_state=state, viewing_time=viewing_time
    )
