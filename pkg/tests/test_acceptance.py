"""Acceptance gate: one test per shipping criterion, one PASS/FAIL line each.

Every criterion is verified against an oracle written independently of the
implementation (integer folds, pairwise U counting, synthesized ground
truth) and prints a single summary line even under captured output.
"""

from __future__ import annotations

import math
import random
import time
from itertools import combinations

import numpy as np
import pytest

from pace.controller import step
from pace.core import EventKind, PlaybackState, Timeline
from pace.evalkit import (
    SusResponse,
    TlxResponse,
    allocate_groups,
    score_quiz,
    score_sus,
    score_tlx,
)
from pace.expression import LaughParams, calibrate_baseline, decide_punchline_response, detect_laugh_events
from pace.laughtrack import AudioBuffer, DetectorConfig, detect_punchlines, extract_features
from pace.samples import au_fixture, demo_timeline
from pace.session import LearnerKind, LearnerModel, SessionConfig, replay, simulate
from pace.stats import Method, hedges_g, ks_normality, mann_whitney_u
from pace.timestretch import stretch

from _synth import burst_corpus, tone

GRID = (0.6, 0.7, 0.8, 0.9, 1.0)


@pytest.fixture
def report(capsys):
    def emit(name: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, f"{name}: {detail}"

    return emit


# ---------------------------------------------------------------------------
# Controller
# ---------------------------------------------------------------------------


def test_controller_exhaustive_and_property(report):
    t0 = time.perf_counter()

    # exhaustive transition table vs the +-0.1-with-clamp rule in integers
    table_ok = True
    for rate_tenths in range(6, 11):
        for laughed in (False, True):
            rate = rate_tenths / 10.0
            expected_tenths = min(10, max(6, rate_tenths + (1 if laughed else -1)))
            state, cmd = step(PlaybackState(rate=rate), laughed)
            if round(state.rate * 10) != expected_tenths:
                table_ok = False
            changed = expected_tenths != rate_tenths
            if (cmd is not None) != changed:
                table_ok = False

    # property: >= 1e5 random laugh sequences, rate always on-grid in range
    rng = random.Random(20260814)
    property_ok = True
    sequences = 100_000
    for _ in range(sequences):
        state = PlaybackState(rate=1.0)
        for _ in range(rng.randint(1, 8)):
            state, _ = step(state, rng.random() < 0.5)
            if state.rate not in GRID:
                property_ok = False
    elapsed = time.perf_counter() - t0

    report(
        "controller +-0.1 clamp table and 1e5-sequence grid safety",
        table_ok and property_ok and elapsed < 5.0,
        f"{sequences} sequences in {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# Punchline detection
# ---------------------------------------------------------------------------


def test_detection_corpus_precision_recall(report):
    corpus = burst_corpus(20)
    t0 = time.perf_counter()
    timelines = []
    for item in corpus:
        audio = AudioBuffer(item["sample_rate"], item["samples"])
        timelines.append(
            detect_punchlines(extract_features(audio), DetectorConfig(), item["duration"])
        )
    elapsed = time.perf_counter() - t0

    total_audio = sum(item["duration"] for item in corpus)
    hits = misses = spurious = 0
    worst = 0.0
    for item, tl in zip(corpus, timelines):
        truth = list(item["truth"])
        got = list(tl.segments)
        matched = set()
        for t_start, t_end in truth:
            found = None
            for j, seg in enumerate(got):
                if j in matched:
                    continue
                if abs(seg.start - t_start) <= 0.1 and abs(seg.end - t_end) <= 0.1:
                    found = j
                    break
            if found is None:
                misses += 1
            else:
                matched.add(found)
                hits += 1
                seg = got[found]
                worst = max(worst, abs(seg.start - t_start), abs(seg.end - t_end))
        spurious += len(got) - len(matched)

    precision = hits / (hits + spurious) if hits + spurious else 0.0
    recall = hits / (hits + misses) if hits + misses else 0.0
    budget = total_audio / 60.0  # < 1 s per 60 s of audio
    report(
        "detection precision/recall 1.0 within 100 ms on 20-file corpus",
        precision == 1.0 and recall == 1.0 and elapsed < budget,
        f"P={precision:.2f} R={recall:.2f} worst boundary {worst * 1000:.0f} ms, "
        f"{elapsed:.2f}s for {total_audio:.0f}s audio",
    )


# ---------------------------------------------------------------------------
# Time stretch
# ---------------------------------------------------------------------------


def dominant_freq(x: np.ndarray, sample_rate: int) -> float:
    n = len(x)
    core = x[n // 4 : 3 * n // 4]
    windowed = core * np.hanning(len(core))
    spectrum = np.abs(np.fft.rfft(windowed))
    k = int(np.argmax(spectrum[1:])) + 1
    if 1 <= k < len(spectrum) - 1:
        a, b, c = np.log(spectrum[k - 1 : k + 2] + 1e-300)
        shift = 0.5 * (a - c) / (a - 2 * b + c)
    else:
        shift = 0.0
    return (k + shift) * sample_rate / len(core)


def test_stretch_duration_and_pitch_laws(report):
    sr = 16000
    freq = 440.0
    audio = AudioBuffer(sr, tone(freq, 1.0, sr, amp=0.5))
    worst_dur = 0.0
    worst_pitch = 0.0
    for rate in GRID:
        out = stretch(audio, rate)
        expected = len(audio.samples) / rate
        worst_dur = max(worst_dur, abs(len(out.samples) - expected) / expected)
        worst_pitch = max(worst_pitch, abs(dominant_freq(out.samples, sr) - freq))
    report(
        "stretch duration within 2% and sine pitch within 5 Hz at all rates",
        worst_dur <= 0.02 and worst_pitch <= 5.0,
        f"max duration error {worst_dur * 100:.3f}%, max pitch error {worst_pitch:.2f} Hz",
    )


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def u_pairwise(a, b) -> float:
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def test_stats_oracles(report):
    # exact Mann-Whitney vs value-level brute force: every split of the
    # pooled sample 1..n1+n2, for every n1, n2 <= 6
    mw_ok = True
    for n1 in range(1, 7):
        for n2 in range(1, 7):
            pooled = [float(v) for v in range(1, n1 + n2 + 1)]
            splits = list(combinations(range(n1 + n2), n1))
            u_by_split = []
            for idx in splits:
                a = [pooled[i] for i in idx]
                b = [pooled[i] for i in range(n1 + n2) if i not in idx]
                u_by_split.append((u_pairwise(a, b), a, b))
            total = len(splits)
            for u_obs, a, b in u_by_split:
                n_le = sum(u <= u_obs + 1e-9 for u, _, _ in u_by_split)
                n_ge = sum(u >= u_obs - 1e-9 for u, _, _ in u_by_split)
                p_oracle = min(1.0, 2.0 * min(n_le / total, n_ge / total))
                r = mann_whitney_u(a, b)
                if r.method is not Method.EXACT or abs(r.p_value - p_oracle) > 1e-12:
                    mw_ok = False
                if abs(r.statistic - min(u_pairwise(a, b), u_pairwise(b, a))) > 1e-12:
                    mw_ok = False

    # Hedges' g against the direct formula
    g_ok = True
    rng = random.Random(99)
    cases = [([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])] + [
        (
            [rng.uniform(-10, 10) for _ in range(rng.randint(2, 9))],
            [rng.uniform(-10, 10) for _ in range(rng.randint(2, 9))],
        )
        for _ in range(50)
    ]
    for a, b in cases:
        n1, n2 = len(a), len(b)
        ma, mb = sum(a) / n1, sum(b) / n2
        va = sum((x - ma) ** 2 for x in a) / (n1 - 1)
        vb = sum((x - mb) ** 2 for x in b) / (n2 - 1)
        pooled_sd = math.sqrt(((n1 - 1) * va + (n2 - 1) * vb) / (n1 + n2 - 2))
        if pooled_sd == 0.0:
            continue
        expected = (1.0 - 3.0 / (4.0 * (n1 + n2) - 9.0)) * (ma - mb) / pooled_sd
        if abs(hedges_g(a, b) - expected) > 1e-12:
            g_ok = False
    if abs(hedges_g([1, 2, 3], [2, 3, 4]) + 0.8) > 1e-12:
        g_ok = False

    # KS Monte Carlo calibration at 500 points
    normal_draws = np.random.default_rng(42).normal(3.0, 2.0, 500)
    uniform_draws = np.random.default_rng(42).uniform(0.0, 1.0, 500)
    p_normal = ks_normality(list(normal_draws), seed=1).p_value
    p_uniform = ks_normality(list(uniform_draws), seed=1).p_value
    ks_ok = p_normal > 0.05 and p_uniform < 0.01

    report(
        "stats: exact U enumeration (n<=6), Hedges g 1e-12, KS calibration",
        mw_ok and g_ok and ks_ok,
        f"KS p_normal={p_normal:.3f}, p_uniform={p_uniform:.2e}",
    )


# ---------------------------------------------------------------------------
# Group allocation
# ---------------------------------------------------------------------------

TOEIC_SCORES = [
    565, 635, 700, 755, 855,
    550, 690, 755, 760, 815,
    590, 670, 730, 790, 845,
    550, 670, 680, 785, 880,
]


def test_allocation_spread(report):
    out = allocate_groups(TOEIC_SCORES, k=4)
    sizes_ok = all(len(g) == 5 for g in out.groups)
    report(
        "serpentine allocation of 20 TOEIC scores: group-mean spread <= 23",
        sizes_ok and out.mean_spread <= 23.0,
        f"spread {out.mean_spread:.2f}, means "
        + "/".join(f"{m:.1f}" for m in out.group_means),
    )


# ---------------------------------------------------------------------------
# Questionnaire formulas
# ---------------------------------------------------------------------------


def test_questionnaire_formulas(report):
    checks = [
        score_sus(SusResponse((5, 1) * 5)) == 100.0,
        score_sus(SusResponse((3,) * 10)) == 50.0,
        score_sus(SusResponse((4, 2) * 5)) == 75.0,
        score_tlx(TlxResponse((0,) * 6)) == 0.0,
        score_tlx(TlxResponse((60, 20, 40, 30, 50, 10))) == 35.0,
        score_tlx(TlxResponse((40,) * 6, weights=(5, 4, 3, 2, 1, 0))) == 40.0,
        score_quiz(["a"] * 9, ["a"] * 9) == 1.0,
        score_quiz(["b"] * 9, ["a"] * 9) == 0.0,
        abs(score_quiz(["a"] * 6 + ["x"] * 3, ["a"] * 9) - 2.0 / 3.0) <= 1e-9,
    ]
    report(
        "SUS/TLX/quiz formulas exact (all-3s SUS = 50.0)",
        all(checks),
        f"{sum(checks)}/{len(checks)} example checks",
    )


# ---------------------------------------------------------------------------
# End-to-end simulation
# ---------------------------------------------------------------------------


def viewing_time_oracle(timeline: Timeline, rates_after) -> float:
    rates_during = [1.0] + list(rates_after)
    total = 0.0
    prev = 0.0
    for seg, rate in zip(timeline.segments, rates_during):
        total += (seg.end - prev) / rate
        prev = seg.end
    return total + (timeline.media_duration - prev) / rates_during[len(timeline.segments)]


def test_simulation_end_to_end(report):
    tl = demo_timeline()
    assert len(tl.segments) == 9 and tl.media_duration == 600.0
    cfg = SessionConfig(timeline=tl)

    results = {}
    oracle_ok = True
    replay_ok = True
    for name, learner in (
        ("never", LearnerModel(kind=LearnerKind.NEVER)),
        ("threshold", LearnerModel(kind=LearnerKind.THRESHOLD, threshold_rate=0.8)),
        ("always", LearnerModel(kind=LearnerKind.ALWAYS)),
        ("logistic", LearnerModel(kind=LearnerKind.LOGISTIC, seed=5)),
    ):
        log = simulate(cfg, learner)
        results[name] = log.viewing_time
        rates = [d.payload["rate_after"] for d in log.events_of(EventKind.DECISION)]
        if abs(log.viewing_time - viewing_time_oracle(tl, rates)) > 1e-9:
            oracle_ok = False
        if replay(log).commands != log.commands:
            replay_ok = False

    order_ok = (
        results["never"] > results["threshold"] > results["always"]
        and abs(results["always"] - 600.0) <= 1e-9
    )
    report(
        "simulation: never > threshold(0.8) > always = 600 s, oracle 1e-9, replay identical",
        order_ok and oracle_ok and replay_ok,
        f"never {results['never']:.2f}s, threshold {results['threshold']:.2f}s, "
        f"always {results['always']:.2f}s",
    )


# ---------------------------------------------------------------------------
# Expression fixture
# ---------------------------------------------------------------------------


def test_expression_fixture_separation(report):
    tl = demo_timeline()
    params = LaughParams()
    pooled = {}
    for label in ("understood", "confused"):
        series = au_fixture(label)
        values = []
        for seg in tl.segments:
            lo, hi = seg.start - params.lead, seg.end + params.lag
            values.extend(f.au14 for f in series.frames if lo <= f.t <= hi)
        pooled[label] = values

    result = mann_whitney_u(pooled["understood"], pooled["confused"], "a_greater")

    # the full pipeline also separates: 9/9 laughs vs 0/9
    flags = {}
    for label in ("understood", "confused"):
        series = au_fixture(label)
        base = calibrate_baseline(series)
        events = detect_laugh_events(series, base, params)
        flags[label] = [r.laughed for r in decide_punchline_response(tl, events, params)]

    report(
        "AU fixture: one-sided Mann-Whitney p < 0.05 between conditions",
        result.p_value < 0.05 and all(flags["understood"]) and not any(flags["confused"]),
        f"p = {result.p_value:.2e}, laughs {sum(flags['understood'])}/9 vs "
        f"{sum(flags['confused'])}/9",
    )
