"""Shared domain types for the adaptive playback engine.

Media time (seconds into the video at 1.0x speed) is the universal clock
throughout the engine; wall-clock time appears only on session events.
All types here are immutable values and safe to share across threads.

Serialization formats owned by this module:

* Timeline JSON: ``{"media_duration": f, "segments": [{"start": f, "end": f}, ...]}``
* AU CSV: header ``t,au14[,au<NN>...]``, one row per frame, UTF-8, LF.
* Session log: JSON Lines, one event per line (see :mod:`pace.session`
  for the config header / summary footer records that frame them).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

logger = logging.getLogger(__name__)

AU_INTENSITY_MAX = 5.0


class TimelineError(ValueError):
    """A timeline violates one of its structural invariants."""


class OverlapError(TimelineError):
    """Two punchline segments overlap."""


class OutOfBoundsError(TimelineError):
    """A segment extends past the media duration."""


class UnsortedError(TimelineError):
    """Segments are not ordered by start time."""


# ---------------------------------------------------------------------------
# Facial Action Unit streams
# ---------------------------------------------------------------------------


def clamp_au(value: float) -> tuple[float, bool]:
    """Clamp an AU intensity into [0, 5].

    Returns the clamped value and whether clamping happened, so ingestion
    paths can surface a warning instead of rejecting third-party files.
    """
    if value < 0.0:
        return 0.0, True
    if value > AU_INTENSITY_MAX:
        return AU_INTENSITY_MAX, True
    return value, False


@dataclass(frozen=True)
class AUFrame:
    """One timestamped sample of facial Action Unit intensities.

    ``au14`` (the buccinator / dimpler movement) is the smile-and-laugh
    index the controller actually consumes; other AUs ride along in
    ``aux`` for logging and offline analysis but are never acted on.
    """

    t: float
    au14: float
    aux: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.t) or self.t < 0.0:
            raise ValueError(f"frame time must be finite and >= 0, got {self.t}")
        if not (0.0 <= self.au14 <= AU_INTENSITY_MAX):
            raise ValueError(
                f"au14 intensity must be within [0, {AU_INTENSITY_MAX}], got {self.au14}"
            )
        if self.aux is not None and not self.aux:
            object.__setattr__(self, "aux", None)  # normalize {} to None for round-trips


@dataclass(frozen=True)
class AUSeries:
    """An ordered AU14 trace, strictly increasing in media time."""

    frames: tuple[AUFrame, ...]
    sample_rate_hint: float | None = None

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        for prev, cur in zip(frames, frames[1:]):
            if cur.t <= prev.t:
                raise ValueError(
                    f"frame times must be strictly increasing: {prev.t} then {cur.t}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def span(self) -> float:
        """Media time covered, first frame to last."""
        if len(self.frames) < 2:
            return 0.0
        return self.frames[-1].t - self.frames[0].t


# ---------------------------------------------------------------------------
# Punchline timeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PunchlineSegment:
    """A scene where the laugh track plays: one decision point."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.start < self.end):
            raise ValueError(f"segment requires 0 <= start < end, got ({self.start}, {self.end})")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Timeline:
    """All punchline segments of one piece of media.

    Construction does not check cross-segment invariants; run a timeline
    through :func:`validate_timeline` before trusting it.
    """

    media_duration: float
    segments: tuple[PunchlineSegment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not math.isfinite(self.media_duration) or self.media_duration <= 0.0:
            raise ValueError(f"media_duration must be finite and > 0, got {self.media_duration}")


def validate_timeline(timeline: Timeline) -> Timeline:
    """Check ordering, non-overlap, and bounds; return the timeline unchanged.

    Raises :class:`UnsortedError`, :class:`OverlapError` (naming the two
    offending segments), or :class:`OutOfBoundsError`.
    """
    segments = timeline.segments
    for prev, cur in zip(segments, segments[1:]):
        if cur.start < prev.start:
            raise UnsortedError(f"segments out of order: {prev} before {cur}")
        if cur.start < prev.end:
            raise OverlapError(f"segments overlap: {prev} and {cur}")
    for seg in segments:
        if seg.end > timeline.media_duration:
            raise OutOfBoundsError(
                f"segment {seg} ends past media duration {timeline.media_duration}"
            )
    return timeline


# ---------------------------------------------------------------------------
# Playback actuation
# ---------------------------------------------------------------------------


class Cause(str, Enum):
    """Why a speed command was issued."""

    LAUGH = "laugh"
    NO_LAUGH = "no_laugh"
    INIT = "init"


@dataclass(frozen=True)
class PlaybackState:
    """Current playback rate and how many punchlines have been decided.

    The rate is expected to sit on the controller's step grid (multiples
    of 0.1 within [0.6, 1.0] under the default config); the controller
    enforces this on every transition.
    """

    rate: float
    punchlines_seen: int = 0


@dataclass(frozen=True)
class SpeedCommand:
    """A rate-change directive, stamped with the media time of issuance."""

    t: float
    rate: float
    cause: Cause


# ---------------------------------------------------------------------------
# Session audit log
# ---------------------------------------------------------------------------


class EventKind(str, Enum):
    AU_FRAME = "au_frame"
    LAUGH_EVENT = "laugh_event"
    PUNCHLINE_OPEN = "punchline_open"
    PUNCHLINE_CLOSE = "punchline_close"
    DECISION = "decision"
    SPEED_COMMAND = "speed_command"
    PROTOCOL_ERROR = "protocol_error"
    # Advisory conditions (clamped AU values, sensor dropout, dropped
    # out-of-order frames) need a home in the log as well.
    WARNING = "warning"


@dataclass(frozen=True)
class SessionEvent:
    """One append-only record of something a session did or saw."""

    wall_time: float
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)


def event_to_dict(event: SessionEvent) -> dict[str, Any]:
    return {
        "wall_time": event.wall_time,
        "kind": event.kind.value,
        "payload": event.payload,
    }


def event_from_dict(data: Mapping[str, Any]) -> SessionEvent:
    return SessionEvent(
        wall_time=float(data["wall_time"]),
        kind=EventKind(data["kind"]),
        payload=dict(data.get("payload", {})),
    )


# ---------------------------------------------------------------------------
# Timeline JSON
# ---------------------------------------------------------------------------


def timeline_to_dict(timeline: Timeline) -> dict[str, Any]:
    return {
        "media_duration": timeline.media_duration,
        "segments": [{"start": s.start, "end": s.end} for s in timeline.segments],
    }


def timeline_from_dict(data: Mapping[str, Any]) -> Timeline:
    segments = tuple(
        PunchlineSegment(float(s["start"]), float(s["end"])) for s in data["segments"]
    )
    return Timeline(media_duration=float(data["media_duration"]), segments=segments)


def timeline_to_json(timeline: Timeline) -> str:
    return json.dumps(timeline_to_dict(timeline), indent=2)


def timeline_from_json(text: str) -> Timeline:
    return timeline_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# AU CSV
# ---------------------------------------------------------------------------


def write_au_csv(series: AUSeries) -> str:
    """Serialize an AU series to CSV (header ``t,au14[,au<NN>...]``)."""
    aux_keys: list[str] = sorted({k for f in series.frames for k in (f.aux or {})})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "au14", *aux_keys])
    for frame in series.frames:
        aux = frame.aux or {}
        row = [repr(frame.t), repr(frame.au14)]
        row.extend(repr(aux[k]) if k in aux else "" for k in aux_keys)
        writer.writerow(row)
    return buf.getvalue()


def read_au_csv(text: str) -> AUSeries:
    """Parse an AU CSV; out-of-range intensities are clamped with a warning."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("AU CSV is empty") from None
    header = [h.strip() for h in header]
    if header[:2] != ["t", "au14"]:
        raise ValueError(f"AU CSV header must start with 't,au14', got {header[:2]}")
    aux_keys = header[2:]

    frames: list[AUFrame] = []
    clamped = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        t = float(row[0])
        au14, was_clamped = clamp_au(float(row[1]))
        clamped += was_clamped
        aux: dict[str, float] = {}
        for key, cell in zip(aux_keys, row[2:]):
            if cell.strip():
                value, was_clamped = clamp_au(float(cell))
                clamped += was_clamped
                aux[key] = value
        frames.append(AUFrame(t=t, au14=au14, aux=aux or None))
    if clamped:
        logger.warning("AU CSV ingestion clamped %d out-of-range intensities", clamped)
    return AUSeries(frames=tuple(frames))


def load_timeline(path: str) -> Timeline:
    with open(path, encoding="utf-8") as fh:
        return timeline_from_json(fh.read())


def save_timeline(timeline: Timeline, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(timeline_to_json(timeline))
        fh.write("\n")


def load_au_series(path: str) -> AUSeries:
    with open(path, encoding="utf-8") as fh:
        return read_au_csv(fh.read())
