"""WAV decoding, frame features, and laugh-track segmentation.

The flatness oracle below is a naive O(N^2) DFT so the production FFT
path is checked against an independently written transform.
"""

from __future__ import annotations

import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pace.core import PunchlineSegment, validate_timeline
from pace.laughtrack import (
    AudioBuffer,
    AudioTooShortError,
    DetectorConfig,
    TruncatedFileError,
    UnsupportedFormatError,
    decode_wav,
    detect_punchlines,
    encode_wav,
    extract_features,
    frame_scores,
    merge_segments,
)

from _synth import burst_audio, make_wav_bytes, tone


# ---------------------------------------------------------------------------
# WAV decoding
# ---------------------------------------------------------------------------


def test_decode_silence():
    data = make_wav_bytes(np.zeros(8000), 8000)
    audio = decode_wav(data)
    assert audio.sample_rate == 8000
    assert len(audio.samples) == 8000
    assert np.all(audio.samples == 0.0)
    assert audio.duration == pytest.approx(1.0)


def test_decode_stereo_downmix_cancels():
    left = np.full(1000, 0.5)
    right = np.full(1000, -0.5)
    interleaved = np.empty(2000)
    interleaved[0::2] = left
    interleaved[1::2] = right
    audio = decode_wav(make_wav_bytes(interleaved, 16000, channels=2))
    assert len(audio.samples) == 1000
    assert np.allclose(audio.samples, 0.0, atol=1 / 32768)


def test_decode_scaling_and_sign():
    x = np.array([0.5, -0.5, 0.25, -1.0])
    audio = decode_wav(make_wav_bytes(x, 8000))
    assert np.allclose(audio.samples, x, atol=1 / 32768)


def test_decode_8bit_unsupported():
    data = make_wav_bytes(np.zeros(100), 8000, sampwidth=1)
    with pytest.raises(UnsupportedFormatError):
        decode_wav(data)


def test_decode_mulaw_unsupported():
    # hand-built RIFF with format tag 7 (mu-law), which wave refuses
    fmt = struct.pack("<HHIIHH", 7, 1, 8000, 8000, 1, 8)
    payload = b"\x00" * 64
    body = b"WAVEfmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    data = b"RIFF" + struct.pack("<I", len(body)) + body
    with pytest.raises(UnsupportedFormatError):
        decode_wav(data)


def test_decode_truncated():
    data = make_wav_bytes(np.zeros(4000), 8000)
    with pytest.raises(TruncatedFileError):
        decode_wav(data[:40])


def test_decode_garbage_unsupported():
    with pytest.raises(UnsupportedFormatError):
        decode_wav(b"not a wav file at all, nothing riff about it")


def test_encode_decode_round_trip():
    x = tone(440.0, 0.5, 16000, amp=0.6)
    back = decode_wav(encode_wav(AudioBuffer(sample_rate=16000, samples=x)))
    assert back.sample_rate == 16000
    assert np.allclose(back.samples, x, atol=1.5 / 32768)


def test_audio_buffer_validation():
    with pytest.raises(ValueError):
        AudioBuffer(sample_rate=0, samples=np.zeros(10))
    with pytest.raises(ValueError):
        AudioBuffer(sample_rate=8000, samples=np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        AudioBuffer(sample_rate=8000, samples=np.array([0.0, 1.5]))
    with pytest.raises(ValueError):
        AudioBuffer(sample_rate=8000, samples=np.zeros((2, 5)))


# ---------------------------------------------------------------------------
# Feature extraction vs naive oracles
# ---------------------------------------------------------------------------


def naive_frame_features(frame: np.ndarray) -> tuple[float, float, int]:
    """rms / flatness / zcr of one frame, written independently.

    Flatness uses a direct O(N^2) DFT over the Hann-tapered frame at the
    next power of two, DC excluded, with the same 1e-30 magnitude floor.
    """
    rms = math.sqrt(float(np.mean(frame**2)))

    tapered = frame * np.hanning(len(frame))
    size = 1
    while size < len(frame):
        size *= 2
    padded = np.zeros(size)
    padded[: len(frame)] = tapered
    n_bins = size // 2 + 1
    mags = []
    for k in range(1, n_bins):  # DC excluded
        re = sum(padded[n] * math.cos(-2 * math.pi * k * n / size) for n in range(size))
        im = sum(padded[n] * math.sin(-2 * math.pi * k * n / size) for n in range(size))
        mags.append(math.hypot(re, im))
    arith = sum(mags) / len(mags)
    if arith <= 1e-12:
        flat = 0.0
    else:
        geo = math.exp(sum(math.log(max(m, 1e-30)) for m in mags) / len(mags))
        flat = geo / arith

    signs = np.signbit(frame)
    zcr = int(np.count_nonzero(signs[1:] != signs[:-1]))
    return rms, flat, zcr


def test_features_match_naive_oracle():
    rng = np.random.default_rng(77)
    sr = 8000
    x = tone(440.0, 0.3, sr, amp=0.3)
    x[800:1600] += rng.uniform(-0.5, 0.5, 800)
    x = np.clip(x, -1.0, 1.0)
    cfg = DetectorConfig()
    feats = extract_features(AudioBuffer(sample_rate=sr, samples=x), cfg)

    frame_n = int(round(cfg.frame_len * sr))
    hop_n = int(round(cfg.hop * sr))
    for idx in [0, 3, 7, 11, 15]:
        frame = x[idx * hop_n : idx * hop_n + frame_n]
        rms, flat, zcr = naive_frame_features(frame)
        assert feats.rms[idx] == pytest.approx(rms, rel=1e-9)
        assert feats.zcr[idx] == zcr
        # FFT vs naive DFT: identical math, looser float tolerance
        assert feats.flatness[idx] == pytest.approx(flat, rel=0.05, abs=1e-6)


def test_features_silence():
    audio = AudioBuffer(sample_rate=8000, samples=np.zeros(8000))
    feats = extract_features(audio)
    assert np.all(feats.rms == 0.0)
    assert np.all(feats.flatness == 0.0)
    assert np.all(feats.zcr == 0)


def test_features_pure_tone_is_peaky():
    audio = AudioBuffer(sample_rate=16000, samples=tone(440.0, 2.0, 16000, amp=1.0))
    feats = extract_features(audio)
    assert float(np.max(feats.flatness[1:-1])) < 0.1


def test_features_white_noise_is_flat():
    rng = np.random.default_rng(5)
    x = np.clip(rng.normal(0.0, 0.3, 32000), -1.0, 1.0)
    feats = extract_features(AudioBuffer(sample_rate=16000, samples=x))
    assert float(np.median(feats.flatness)) > 0.5


def test_features_frame_timing_and_count():
    sr = 16000
    audio = AudioBuffer(sample_rate=sr, samples=np.zeros(sr))  # 1 s
    cfg = DetectorConfig()
    feats = extract_features(audio, cfg)
    # frames start every hop while a full frame fits
    expected = (sr - int(round(cfg.frame_len * sr))) // int(round(cfg.hop * sr)) + 1
    assert len(feats.rms) == expected
    times = feats.times
    assert times[0] == pytest.approx(cfg.frame_len / 2)
    assert times[1] - times[0] == pytest.approx(cfg.hop)


def test_features_too_short_errors():
    audio = AudioBuffer(sample_rate=16000, samples=np.zeros(100))  # < one 50 ms frame
    with pytest.raises(AudioTooShortError):
        extract_features(audio)


def test_detector_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(hop=0.0)
    with pytest.raises(ValueError):
        DetectorConfig(hop=0.06, frame_len=0.05)
    with pytest.raises(ValueError):
        DetectorConfig(on_threshold=0.4, off_threshold=0.6)
    with pytest.raises(ValueError):
        DetectorConfig(min_duration=0.0)
    with pytest.raises(ValueError):
        DetectorConfig(merge_gap=-0.1)


# ---------------------------------------------------------------------------
# Scoring and segmentation
# ---------------------------------------------------------------------------


def test_frame_scores_blend():
    feats = extract_features(
        AudioBuffer(16000, burst_audio([(2.0, 3.0)], 6.0, seed=1))
    )
    scores = frame_scores(feats)
    hot = (feats.times >= 2.1) & (feats.times <= 2.9)
    cold = feats.times <= 1.8
    assert float(np.min(scores[hot])) > 0.6
    assert float(np.max(scores[cold])) < 0.4


def test_detect_silence_has_no_segments():
    audio = AudioBuffer(16000, np.zeros(16000 * 4))
    tl = detect_punchlines(extract_features(audio), DetectorConfig(), 4.0)
    assert tl.segments == ()
    assert tl.media_duration == 4.0


def test_detect_two_bursts_within_tolerance():
    truth = [(2.0, 3.0), (5.0, 6.5)]
    audio = AudioBuffer(16000, burst_audio(truth, 10.0, seed=3))
    tl = detect_punchlines(extract_features(audio), DetectorConfig(), 10.0)
    assert len(tl.segments) == 2
    for seg, (start, end) in zip(tl.segments, truth):
        assert abs(seg.start - start) <= 0.1
        assert abs(seg.end - end) <= 0.1


def test_detect_merges_nearby_bursts():
    audio = AudioBuffer(16000, burst_audio([(2.0, 3.0), (3.2, 4.0)], 10.0, seed=4))
    tl = detect_punchlines(extract_features(audio), DetectorConfig(), 10.0)
    assert len(tl.segments) == 1
    assert abs(tl.segments[0].start - 2.0) <= 0.15
    assert abs(tl.segments[0].end - 4.0) <= 0.15


def test_detect_drops_sub_minimum_bursts():
    # long burst anchors the rms normalization; the 0.3 s one is dropped
    audio = AudioBuffer(16000, burst_audio([(2.0, 3.0), (5.0, 5.3)], 10.0, seed=5))
    tl = detect_punchlines(extract_features(audio), DetectorConfig(), 10.0)
    assert len(tl.segments) == 1
    assert abs(tl.segments[0].start - 2.0) <= 0.1
    assert abs(tl.segments[0].end - 3.0) <= 0.1


def test_detect_scale_robust():
    x = burst_audio([(2.0, 3.0), (5.0, 6.5)], 10.0, seed=6)
    full = detect_punchlines(extract_features(AudioBuffer(16000, x)), DetectorConfig(), 10.0)
    half = detect_punchlines(
        extract_features(AudioBuffer(16000, 0.5 * x)), DetectorConfig(), 10.0
    )
    assert len(full.segments) == len(half.segments)


def test_detect_total_duration_monotone_in_on_threshold():
    x = burst_audio([(1.5, 3.0), (5.0, 6.0), (8.0, 9.2)], 12.0, seed=7)
    feats = extract_features(AudioBuffer(16000, x))
    durations = []
    for on in (0.45, 0.6, 0.75, 0.9):
        cfg = DetectorConfig(on_threshold=on, off_threshold=0.4)
        tl = detect_punchlines(feats, cfg, 12.0)
        durations.append(sum(s.duration for s in tl.segments))
    assert all(a >= b - 1e-9 for a, b in zip(durations, durations[1:]))


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_detect_fuzz_always_valid_timeline(seed):
    rng = np.random.default_rng(seed)
    duration = float(rng.uniform(0.5, 4.0))
    n = int(duration * 8000)
    x = np.clip(rng.normal(0.0, rng.uniform(0.01, 0.5), n), -1.0, 1.0)
    feats = extract_features(AudioBuffer(8000, x))
    tl = detect_punchlines(feats, DetectorConfig(), duration)
    validate_timeline(tl)
    for seg in tl.segments:
        assert seg.duration >= 0.5 - 1e-9


# ---------------------------------------------------------------------------
# merge_segments
# ---------------------------------------------------------------------------


def seg(a, b):
    return PunchlineSegment(a, b)


def test_merge_empty():
    assert merge_segments([], merge_gap=0.4, min_duration=0.5) == []


def test_merge_unions_small_gap():
    out = merge_segments([seg(0, 1), seg(1.2, 2)], merge_gap=0.4, min_duration=0.5)
    assert out == [seg(0, 2)]


def test_merge_keeps_large_gap():
    out = merge_segments([seg(0, 1), seg(1.6, 2.6)], merge_gap=0.4, min_duration=0.5)
    assert out == [seg(0, 1), seg(1.6, 2.6)]


def test_merge_gap_boundary_is_strict():
    # gap exactly equal to merge_gap stays split (0.5 is float-exact)
    out = merge_segments([seg(0, 1), seg(1.5, 2.5)], merge_gap=0.5, min_duration=0.5)
    assert len(out) == 2


def test_merge_drops_short_segments():
    assert merge_segments([seg(0, 0.3)], merge_gap=0.4, min_duration=0.5) == []


def test_merge_union_can_rescue_short_pieces():
    out = merge_segments([seg(0, 0.3), seg(0.5, 0.8)], merge_gap=0.4, min_duration=0.5)
    assert out == [seg(0, 0.8)]


def test_merge_rejects_unsorted():
    from pace.core import UnsortedError

    with pytest.raises(UnsortedError):
        merge_segments([seg(2, 3), seg(0, 1)], merge_gap=0.4, min_duration=0.5)


@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0.0, max_value=5.0),
            st.floats(min_value=0.05, max_value=3.0),
        ),
        max_size=10,
    )
)
@settings(max_examples=100, deadline=None)
def test_merge_idempotent(raw):
    segments = []
    cursor = 0.0
    for gap, length in raw:
        start = cursor + gap + 0.001
        segments.append(seg(start, start + length))
        cursor = start + length
    once = merge_segments(segments, merge_gap=0.4, min_duration=0.5)
    twice = merge_segments(once, merge_gap=0.4, min_duration=0.5)
    assert once == twice
