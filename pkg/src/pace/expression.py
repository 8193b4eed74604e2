"""Per-punchline laugh decisions from AU14 time series.

The comprehension proxy: a viewer who follows the story laughs at the
punchlines, so sustained AU14 excursions above a per-user baseline count
as laughter. The baseline is calibrated from the opening seconds of the
session; the excursion threshold, minimum hold time, and the lead/lag
slack around each punchline window are all explicit parameters so every
decision is reproducible from the session log.

Manual markers (e.g. a button in the player) become zero-length events
with infinite peak intensity: they always win evidence selection and
need no calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import AUSeries, PunchlineSegment, Timeline, validate_timeline

SIGMA_FLOOR = 0.05
DEFAULT_CALIBRATION_DURATION = 30.0


class InsufficientDataError(ValueError):
    """The AU series does not cover the requested calibration span."""


@dataclass(frozen=True)
class Baseline:
    """Resting AU14 level of one viewer: mean and (floored) standard deviation."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < SIGMA_FLOOR:
            raise ValueError(f"sigma must be >= the floor {SIGMA_FLOOR}, got {self.sigma}")


@dataclass(frozen=True)
class LaughParams:
    """Thresholding and window slack for laugh detection.

    ``k_sigma`` scales the excursion threshold above baseline, ``min_hold``
    is the shortest run that counts as a laugh, and ``lead``/``lag`` widen
    each punchline window backwards/forwards when matching evidence.
    """

    k_sigma: float = 3.0
    min_hold: float = 0.2
    lead: float = 0.5
    lag: float = 1.0

    def __post_init__(self) -> None:
        if self.k_sigma <= 0.0 or self.min_hold <= 0.0:
            raise ValueError("k_sigma and min_hold must be > 0")
        if self.lead < 0.0 or self.lag < 0.0:
            raise ValueError("lead and lag must be >= 0")


@dataclass(frozen=True)
class LaughEvent:
    """A sustained AU14 excursion (or a zero-length manual marker)."""

    start: float
    end: float
    peak_au14: float

    def __post_init__(self) -> None:
        # start == end is reserved for manual markers.
        if self.start > self.end:
            raise ValueError(f"event start {self.start} after end {self.end}")


@dataclass(frozen=True)
class PunchlineResponse:
    """Whether the viewer laughed at one punchline, with the winning evidence."""

    segment: PunchlineSegment
    laughed: bool
    evidence: LaughEvent | None = None

    def __post_init__(self) -> None:
        if self.laughed != (self.evidence is not None):
            raise ValueError("laughed must be true exactly when evidence is present")


def marker_event(t: float) -> LaughEvent:
    """A manual laugh marker: zero length, always outranks detected events."""
    return LaughEvent(start=t, end=t, peak_au14=math.inf)


def calibrate_baseline(
    series: AUSeries, duration: float = DEFAULT_CALIBRATION_DURATION
) -> Baseline:
    """Mean and population SD of AU14 over the series' first ``duration`` seconds.

    The SD is floored at ``SIGMA_FLOOR`` so a perfectly still calibration
    span cannot produce a hair-trigger threshold.
    """
    if duration <= 0.0:
        raise ValueError(f"calibration duration must be > 0, got {duration}")
    if len(series.frames) == 0 or series.span < duration:
        raise InsufficientDataError(
            f"series covers {series.span:.3f} s, need >= {duration} s for calibration"
        )
    t0 = series.frames[0].t
    values = [f.au14 for f in series.frames if f.t <= t0 + duration]
    mu = sum(values) / len(values)
    var = sum((v - mu) ** 2 for v in values) / len(values)
    return Baseline(mu=mu, sigma=max(math.sqrt(var), SIGMA_FLOOR))


def detect_laugh_events(
    series: AUSeries, baseline: Baseline, params: LaughParams = LaughParams()
) -> list[LaughEvent]:
    """Maximal runs of frames with au14 above mu + k_sigma * sigma.

    A run must span at least ``min_hold`` seconds (first excursion frame
    to last) to become an event; the event carries the run's peak au14.
    """
    threshold = baseline.mu + params.k_sigma * baseline.sigma
    events: list[LaughEvent] = []
    run_start: float | None = None
    run_end = 0.0
    run_peak = 0.0
    for frame in series.frames:
        if frame.au14 > threshold:
            if run_start is None:
                run_start = frame.t
                run_peak = frame.au14
            run_end = frame.t
            run_peak = max(run_peak, frame.au14)
        elif run_start is not None:
            if run_end - run_start >= params.min_hold:
                events.append(LaughEvent(start=run_start, end=run_end, peak_au14=run_peak))
            run_start = None
    if run_start is not None and run_end - run_start >= params.min_hold:
        events.append(LaughEvent(start=run_start, end=run_end, peak_au14=run_peak))
    return events


def decide_punchline_response(
    timeline: Timeline,
    events: Sequence[LaughEvent],
    params: LaughParams = LaughParams(),
) -> list[PunchlineResponse]:
    """One response per segment, in timeline order.

    The response window is [start - lead, end + lag]; the viewer laughed
    iff some event overlaps it, and the evidence is the overlapping event
    with the greatest peak intensity.
    """
    validate_timeline(timeline)
    responses: list[PunchlineResponse] = []
    for segment in timeline.segments:
        w_start = segment.start - params.lead
        w_end = segment.end + params.lag
        overlapping = [e for e in events if e.start <= w_end and e.end >= w_start]
        if overlapping:
            evidence = max(overlapping, key=lambda e: e.peak_au14)
            responses.append(PunchlineResponse(segment=segment, laughed=True, evidence=evidence))
        else:
            responses.append(PunchlineResponse(segment=segment, laughed=False))
    return responses


def window_coverage(
    series: AUSeries, segment: PunchlineSegment, params: LaughParams = LaughParams()
) -> float:
    """Fraction of a punchline's response window covered by AU samples.

    Used to flag sensor dropout: the frame spacing is estimated from the
    series itself (or its rate hint), and coverage is the sampled span as
    a share of the window. Sessions treat coverage below 0.5 as dropout
    and err toward the no-laugh (slow-down) side with a warning.
    """
    w_start = max(0.0, segment.start - params.lead)
    w_end = segment.end + params.lag
    window_len = w_end - w_start
    if window_len <= 0.0:
        return 1.0
    in_window = [f.t for f in series.frames if w_start <= f.t <= w_end]
    if not in_window:
        return 0.0
    if series.sample_rate_hint:
        dt = 1.0 / series.sample_rate_hint
    else:
        gaps = sorted(b.t - a.t for a, b in zip(series.frames, series.frames[1:]))
        dt = gaps[len(gaps) // 2] if gaps else window_len
    return min(1.0, len(in_window) * dt / window_len)
