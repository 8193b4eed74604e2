"""Bundled sample data: the demo timeline and synthetic AU fixtures.

The demo timeline has nine punchline-bearing clips totalling 600 s of
media. The AU fixtures are two synthetic viewer traces over that
timeline: "understood" (smile excursions inside every punchline window)
and "confused" (baseline noise only). They exist so the expression and
analysis pipelines can be exercised without webcam data.
"""

from __future__ import annotations

from importlib.resources import files

from .core import AUSeries, Timeline, read_au_csv, timeline_from_json

AU_LABELS = ("understood", "confused")


def _data_text(name: str) -> str:
    return (files("pace") / "data" / name).read_text(encoding="utf-8")


def demo_timeline() -> Timeline:
    """Nine clips, 600 s, one punchline near the end of each clip."""
    return timeline_from_json(_data_text("demo_timeline.json"))


def au_fixture(label: str) -> AUSeries:
    """Synthetic AU14 trace over the demo timeline: 'understood' or 'confused'."""
    if label not in AU_LABELS:
        raise ValueError(f"label must be one of {AU_LABELS}, got {label!r}")
    return read_au_csv(_data_text(f"au_fixture_{label}.csv"))
