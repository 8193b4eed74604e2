"""Laugh-track segmentation from a video's audio.

Punchlines are the scenes where a laugh track plays. Laugh tracks are
broadband high-energy bursts, so a frame score built from normalized RMS
energy and spectral flatness separates them from speech and music beds.
Hysteresis thresholding turns the score into segments; close segments are
merged and short blips dropped.

Input audio is RIFF/WAVE, PCM 16-bit, mono or stereo. All operations are
pure functions; callers may process files in parallel.
"""

from __future__ import annotations

import io
import logging
import struct
import wave
from dataclasses import dataclass

import numpy as np

from .core import PunchlineSegment, Timeline, UnsortedError, validate_timeline

logger = logging.getLogger(__name__)

# Score = RMS_WEIGHT * (rms / p95 rms) + FLATNESS_WEIGHT * flatness.
RMS_WEIGHT = 0.5
FLATNESS_WEIGHT = 0.5
RMS_NORM_PERCENTILE = 95.0

# Floor for magnitude bins inside the geometric mean; keeps log() finite
# and pins the flatness of pure tones near zero instead of NaN.
_MAG_FLOOR = 1e-30
_SILENCE_EPS = 1e-12


class UnsupportedFormatError(ValueError):
    """Audio is not PCM16 RIFF/WAVE with 1 or 2 channels."""


class TruncatedFileError(ValueError):
    """Audio container ends before the declared sample data."""


class AudioTooShortError(ValueError):
    """Audio is shorter than a single analysis frame."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono audio with samples in [-1, 1]."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be one-dimensional, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if samples.size and float(np.max(np.abs(samples))) > 1.0 + 1e-9:
            raise ValueError("samples must lie in [-1, 1]")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class DetectorConfig:
    """Framing and thresholding parameters for punchline detection."""

    frame_len: float = 0.05
    hop: float = 0.01
    on_threshold: float = 0.6
    off_threshold: float = 0.4
    min_duration: float = 0.5
    merge_gap: float = 0.4

    def __post_init__(self) -> None:
        if not (0.0 < self.hop <= self.frame_len):
            raise ValueError(f"need 0 < hop <= frame_len, got hop={self.hop} frame_len={self.frame_len}")
        if self.off_threshold > self.on_threshold:
            raise ValueError(
                f"off_threshold {self.off_threshold} must not exceed on_threshold {self.on_threshold}"
            )
        if self.min_duration <= 0:
            raise ValueError(f"min_duration must be positive, got {self.min_duration}")
        if self.merge_gap < 0:
            raise ValueError(f"merge_gap must be non-negative, got {self.merge_gap}")


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """Per-frame features; frame i covers media time [i*hop, i*hop + frame_len)."""

    hop: float
    frame_len: float
    rms: np.ndarray
    flatness: np.ndarray
    zcr: np.ndarray

    def __post_init__(self) -> None:
        if not (0.0 < self.hop <= self.frame_len):
            raise ValueError(f"need 0 < hop <= frame_len, got hop={self.hop} frame_len={self.frame_len}")
        arrays = {}
        for name in ("rms", "flatness", "zcr"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            arrays[name] = arr
        if not (arrays["rms"].shape == arrays["flatness"].shape == arrays["zcr"].shape):
            raise ValueError("rms, flatness, zcr must have identical shapes")
        if arrays["rms"].ndim != 1 or arrays["rms"].size == 0:
            raise ValueError("feature arrays must be non-empty and one-dimensional")
        if np.any(arrays["rms"] < 0):
            raise ValueError("rms must be non-negative")
        if np.any((arrays["flatness"] < 0) | (arrays["flatness"] > 1)):
            raise ValueError("flatness must lie in [0, 1]")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.rms)

    @property
    def times(self) -> np.ndarray:
        """Frame-center times in media seconds."""
        return np.arange(len(self.rms)) * self.hop + self.frame_len / 2.0


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode PCM16 RIFF/WAVE bytes to mono float samples in [-1, 1].

    Stereo is downmixed by per-sample channel average; scaling is 1/32768.
    """
    try:
        with wave.open(io.BytesIO(data), "rb") as reader:
            channels = reader.getnchannels()
            sampwidth = reader.getsampwidth()
            sample_rate = reader.getframerate()
            nframes = reader.getnframes()
            raw = reader.readframes(nframes)
    except EOFError as exc:
        raise TruncatedFileError("WAV data ends before the declared chunk size") from exc
    except wave.Error as exc:
        # wave reports a cut-off file as a missing chunk; tell the cases
        # apart by comparing the declared RIFF size against what arrived
        if (
            len(data) >= 12
            and data[:4] == b"RIFF"
            and data[8:12] == b"WAVE"
            and struct.unpack("<I", data[4:8])[0] > len(data) - 8
        ):
            raise TruncatedFileError(
                "WAV data ends before the declared RIFF size"
            ) from exc
        raise UnsupportedFormatError(f"not a decodable PCM WAV: {exc}") from exc

    if sampwidth != 2:
        raise UnsupportedFormatError(f"only 16-bit PCM is supported, got {8 * sampwidth}-bit")
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"only mono or stereo is supported, got {channels} channels")
    if len(raw) < nframes * channels * 2:
        raise TruncatedFileError(
            f"expected {nframes * channels * 2} bytes of sample data, got {len(raw)}"
        )

    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    if channels == 2:
        pcm = pcm.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(sample_rate=sample_rate, samples=pcm / 32768.0)


def encode_wav(audio: AudioBuffer) -> bytes:
    """Encode mono audio as PCM16 RIFF/WAVE bytes (inverse of decode_wav)."""
    pcm = np.clip(np.rint(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    out = io.BytesIO()
    with wave.open(out, "wb") as writer:
        writer.setnchannels(1)
        writer.setsampwidth(2)
        writer.setframerate(audio.sample_rate)
        writer.writeframes(pcm.tobytes())
    return out.getvalue()


def _frame_matrix(samples: np.ndarray, frame: int, hop: int) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame)
    return windows[::hop]


def extract_features(audio: AudioBuffer, cfg: DetectorConfig = DetectorConfig()) -> FeatureSeries:
    """Compute per-frame RMS, spectral flatness, and zero-crossing rate.

    Flatness is the geometric/arithmetic mean ratio of the Hann-tapered
    magnitude spectrum with the DC bin excluded; the DFT size is the next
    power of two at or above the frame length. Near-silent frames get
    flatness 0 so silence never scores as laughter.
    """
    frame = max(1, round(cfg.frame_len * audio.sample_rate))
    hop = max(1, round(cfg.hop * audio.sample_rate))
    if len(audio.samples) < frame:
        raise AudioTooShortError(
            f"audio has {len(audio.samples)} samples but one frame needs {frame}"
        )

    frames = _frame_matrix(audio.samples, frame, hop)
    rms = np.sqrt(np.mean(np.square(frames), axis=1))

    # Hann taper before the DFT: rectangular leakage would smear pure tones
    # enough to look flat. RMS stays untapered; p95 normalization makes any
    # constant factor moot anyway.
    n_fft = 1 << (frame - 1).bit_length()
    mag = np.abs(np.fft.rfft(frames * np.hanning(frame), n=n_fft, axis=1))[:, 1:]
    arith = mag.mean(axis=1)
    geo = np.exp(np.mean(np.log(np.maximum(mag, _MAG_FLOOR)), axis=1))
    flatness = np.where(arith > _SILENCE_EPS, geo / np.maximum(arith, _SILENCE_EPS), 0.0)
    flatness = np.clip(flatness, 0.0, 1.0)

    signs = np.signbit(frames)
    zcr = np.count_nonzero(signs[:, 1:] != signs[:, :-1], axis=1).astype(np.float64)

    return FeatureSeries(
        hop=hop / audio.sample_rate,
        frame_len=frame / audio.sample_rate,
        rms=rms,
        flatness=flatness,
        zcr=zcr,
    )


def frame_scores(features: FeatureSeries) -> np.ndarray:
    """Per-frame laugh-track score: weighted normalized RMS plus flatness."""
    p95 = float(np.percentile(features.rms, RMS_NORM_PERCENTILE))
    if p95 > 0.0:
        nrms = features.rms / p95
    else:
        nrms = np.zeros_like(features.rms)
    return RMS_WEIGHT * nrms + FLATNESS_WEIGHT * features.flatness


def _merge_spans(
    spans: list[tuple[float, float]], merge_gap: float, min_duration: float
) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for start, end in spans:
        if merged and start - merged[-1][1] < merge_gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return [(s, e) for s, e in merged if e - s >= min_duration]


def merge_segments(
    segments: list[PunchlineSegment], merge_gap: float, min_duration: float
) -> list[PunchlineSegment]:
    """Union segments separated by less than merge_gap, then drop short ones.

    Idempotent: output gaps are all >= merge_gap and lengths >= min_duration.
    """
    for prev, cur in zip(segments, segments[1:]):
        if cur.start < prev.start:
            raise UnsortedError(f"segments out of order: {prev} before {cur}")
    spans = [(seg.start, seg.end) for seg in segments]
    return [PunchlineSegment(start=s, end=e) for s, e in _merge_spans(spans, merge_gap, min_duration)]


def detect_punchlines(
    features: FeatureSeries, cfg: DetectorConfig, media_duration: float
) -> Timeline:
    """Segment laugh-track regions by hysteresis thresholding of frame scores.

    A segment opens when the score reaches cfg.on_threshold and closes when
    it falls below cfg.off_threshold; boundaries are the centers of the
    first and last active frames. Segments closer than cfg.merge_gap are
    merged and those shorter than cfg.min_duration dropped.
    """
    scores = frame_scores(features)
    times = features.times

    raw: list[tuple[float, float]] = []
    open_at: int | None = None
    for i, score in enumerate(scores):
        if open_at is None:
            if score >= cfg.on_threshold:
                open_at = i
        elif score < cfg.off_threshold:
            raw.append((times[open_at], times[i - 1]))
            open_at = None
    if open_at is not None:
        raw.append((times[open_at], times[len(scores) - 1]))

    clamped = [
        (max(0.0, min(s, media_duration)), max(0.0, min(e, media_duration))) for s, e in raw
    ]
    segments = [
        PunchlineSegment(start=s, end=e)
        for s, e in _merge_spans(clamped, cfg.merge_gap, cfg.min_duration)
    ]
    return validate_timeline(Timeline(media_duration=media_duration, segments=tuple(segments)))
