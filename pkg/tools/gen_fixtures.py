"""Regenerate the bundled sample data under src/pace/data/.

Produces the 9-clip demo timeline and a pair of synthetic AU14 traces:
one viewer who laughs at every punchline ("understood") and one who
never does ("confused"). Both traces share the same generative process
(calm first 30 s for calibration, slow wander plus sensor noise); the
understood trace adds a raised-cosine smile excursion inside each
punchline response window.

Deterministic: fixed seeds, values rounded to 4 decimals.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from pace.core import AUFrame, AUSeries, PunchlineSegment, Timeline, save_timeline, write_au_csv

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "pace" / "data"

CLIP_LENGTHS = [70.0, 65.0, 60.0, 75.0, 60.0, 70.0, 65.0, 75.0, 60.0]  # sums to 600
SAMPLE_HZ = 10.0
BASE_MU = 0.3
WANDER_AMP = 0.04
NOISE_SD = 0.04
EXCURSION_PEAK = 1.6
EXCURSION_HALF = 0.9  # seconds each side of the excursion center


def demo_timeline() -> Timeline:
    segments = []
    t = 0.0
    for length in CLIP_LENGTHS:
        t += length
        segments.append(PunchlineSegment(start=t - 8.0, end=t - 4.0))
    return Timeline(media_duration=sum(CLIP_LENGTHS), segments=tuple(segments))


def au_trace(timeline: Timeline, laughs: bool, seed: int) -> AUSeries:
    rng = np.random.default_rng(seed)
    n = int(timeline.media_duration * SAMPLE_HZ) + 1
    t = np.arange(n) / SAMPLE_HZ
    wander = WANDER_AMP * np.sin(2 * math.pi * t / 47.0) + WANDER_AMP * 0.5 * np.sin(
        2 * math.pi * t / 13.0 + 1.0
    )
    au14 = BASE_MU + wander + rng.normal(0.0, NOISE_SD, n)
    if laughs:
        for segment in timeline.segments:
            center = segment.end - 1.0  # inside the [start - lead, end + lag] window
            phase = (t - center) / EXCURSION_HALF
            mask = np.abs(phase) < 1.0
            au14[mask] += EXCURSION_PEAK * 0.5 * (1.0 + np.cos(math.pi * phase[mask]))
    au14 = np.clip(np.round(au14, 4), 0.0, 5.0)
    frames = tuple(AUFrame(t=float(ti), au14=float(v)) for ti, v in zip(t, au14))
    return AUSeries(frames=frames, sample_rate_hint=SAMPLE_HZ)


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    timeline = demo_timeline()
    save_timeline(timeline, DATA_DIR / "demo_timeline.json")
    for label, laughs, seed in (("understood", True, 101), ("confused", False, 202)):
        series = au_trace(timeline, laughs, seed)
        path = DATA_DIR / f"au_fixture_{label}.csv"
        path.write_text(write_au_csv(series), encoding="utf-8")
        print(f"wrote {path} ({len(series.frames)} frames)")
    print(f"wrote {DATA_DIR / 'demo_timeline.json'} ({len(timeline.segments)} segments)")


if __name__ == "__main__":
    main()
