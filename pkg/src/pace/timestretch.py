"""Steady-pitch playback-rate change for audio (WSOLA).

Overlap-add of Hann-windowed grains whose analysis positions advance by
rate * synthesis_hop; each grain is refined within +-search_radius by
maximizing normalized cross-correlation against the natural continuation
of the previous grain, which preserves pitch. Output duration is
input_duration / rate at the input sample rate.

The engine itself is symmetric in rate, but the public operation accepts
only the controller's range [0.6, 1.0]; faster-than-real-time rates stay
gated off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laughtrack import AudioBuffer, AudioTooShortError

MIN_RATE = 0.6
MAX_RATE = 1.0


class RateRangeError(ValueError):
    """Requested rate lies outside the supported playback range."""


@dataclass(frozen=True)
class WsolaParams:
    """Grain geometry: window and search in seconds, overlap as a fraction."""

    window: float = 0.05
    overlap: float = 0.5
    search_radius: float = 0.01

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if not (0.0 < self.overlap < 1.0):
            raise ValueError(f"overlap must be in (0, 1), got {self.overlap}")
        if not (0.0 <= self.search_radius < self.window):
            raise ValueError(
                f"search_radius must be in [0, window), got {self.search_radius}"
            )


def stretch(audio: AudioBuffer, rate: float, params: WsolaParams = WsolaParams()) -> AudioBuffer:
    """Change playback rate by WSOLA while keeping pitch steady.

    rate < 1 slows playback down (longer output). The output has
    round(len(in) / rate) samples at the input sample rate.
    """
    if not (MIN_RATE <= rate <= MAX_RATE):
        raise RateRangeError(f"rate must lie in [{MIN_RATE}, {MAX_RATE}], got {rate}")
    return AudioBuffer(
        sample_rate=audio.sample_rate,
        samples=_wsola(audio.samples, audio.sample_rate, rate, params),
    )


def _wsola(samples: np.ndarray, sample_rate: int, rate: float, params: WsolaParams) -> np.ndarray:
    n_in = len(samples)
    n_window = round(params.window * sample_rate)
    if n_in <= n_window:
        raise AudioTooShortError(
            f"audio has {n_in} samples but one window needs more than {n_window}"
        )

    window = np.hanning(n_window)
    hop_syn = max(1, round(n_window * (1.0 - params.overlap)))
    hop_ana = rate * hop_syn
    search = round(params.search_radius * sample_rate)
    overlap_len = n_window - hop_syn
    n_out = round(n_in / rate)
    last_pos = n_in - n_window

    acc = np.zeros(n_out + n_window)
    win_acc = np.zeros(n_out + n_window)

    pos = 0
    out_at = 0
    k = 0
    while out_at < n_out:
        if k > 0 and overlap_len > 0 and search > 0:
            nominal = min(round(k * hop_ana), last_pos)
            lo = max(0, nominal - search)
            hi = min(last_pos, nominal + search)
            # Reference: where the previous grain would naturally continue.
            ref = samples[pos + hop_syn : pos + hop_syn + overlap_len]
            ref_norm = float(np.dot(ref, ref)) ** 0.5
            if ref_norm > 0.0 and hi > lo:
                cands = np.lib.stride_tricks.sliding_window_view(
                    samples[lo : hi + overlap_len], overlap_len
                )
                dots = cands @ ref
                norms = np.sqrt(np.einsum("ij,ij->i", cands, cands)) * ref_norm
                with np.errstate(invalid="ignore", divide="ignore"):
                    ncc = np.where(norms > 0.0, dots / norms, -1.0)
                # Tiny pull toward the nominal position breaks NCC ties
                # deterministically without disturbing real maxima.
                offsets = np.abs(np.arange(lo, hi + 1) - nominal)
                pos = lo + int(np.argmax(ncc - 1e-9 * offsets))
            else:
                pos = nominal
        elif k > 0:
            pos = min(round(k * hop_ana), last_pos)

        grain = samples[pos : pos + n_window]
        acc[out_at : out_at + n_window] += grain * window
        win_acc[out_at : out_at + n_window] += window
        out_at += hop_syn
        k += 1

    covered = win_acc > 1e-8
    out = np.zeros_like(acc)
    out[covered] = acc[covered] / win_acc[covered]
    return np.clip(out[:n_out], -1.0, 1.0)
