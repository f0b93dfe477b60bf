"""Pitch and tempo modification used to map children's speech toward the
adult acoustic range before scoring.

Implemented as a waveform-similarity overlap-add (WSOLA) time stretch
followed by sinc resampling, which scales tempo and pitch independently.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import audio_io
from .errors import ConfigError

FACTOR_MIN = 0.25
FACTOR_MAX = 4.0

_WSOLA_WINDOW_S = 0.025
_WSOLA_SEARCH_S = 0.005


@dataclass(frozen=True)
class PreprocessConfig:
    """Output pitch = pitch_factor * input pitch; speaking rate likewise."""

    enabled: bool = True
    pitch_factor: float = 0.8
    tempo_factor: float = 0.9

    def __post_init__(self):
        for name in ("pitch_factor", "tempo_factor"):
            value = getattr(self, name)
            if not FACTOR_MIN <= value <= FACTOR_MAX:
                raise ConfigError(
                    f"{name} must be in [{FACTOR_MIN}, {FACTOR_MAX}], got {value}"
                )


def time_stretch(buf, stretch):
    """WSOLA time stretch: output duration = stretch * input duration, pitch kept.

    25 ms Hann windows at 50% overlap; each analysis window is shifted within
    a +/-5 ms tolerance to maximize similarity with the natural continuation
    of the previous one.
    """
    if stretch <= 0:
        raise ConfigError(f"stretch must be positive, got {stretch}")
    if stretch == 1.0:
        return buf

    fs = buf.sample_rate_hz
    win = int(round(_WSOLA_WINDOW_S * fs)) & ~1  # even length
    hop = win // 2
    search = int(round(_WSOLA_SEARCH_S * fs))
    x = buf.samples
    n_out = int(round(len(x) * stretch))
    if len(x) < win or n_out < win:
        # Too short for overlap-add; fall back to sample-domain interpolation.
        pos = np.linspace(0.0, len(x) - 1.0, max(n_out, 1))
        return audio_io.AudioBuffer(np.interp(pos, np.arange(len(x)), x), fs)

    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)
    pad = win + 2 * search + hop + 1
    xp = np.concatenate([np.zeros(search), x, np.zeros(pad)])

    out = np.zeros(n_out + win)
    norm = np.zeros(n_out + win)
    n_frames = n_out // hop + 1
    prev_pos = None
    for k in range(n_frames):
        target = int(round(k * hop / stretch))  # nominal analysis start in x
        if prev_pos is None:
            pos = target
        else:
            ref = xp[search + prev_pos + hop : search + prev_pos + hop + win]
            lo = max(target - search, 0)
            candidates = sliding_window_view(
                xp[search + lo : search + target + search + win + 1], win
            )[: target + search - lo + 1]
            pos = lo + int(np.argmax(candidates @ ref))
        seg = xp[search + pos : search + pos + win]
        out[k * hop : k * hop + win] += seg * window
        norm[k * hop : k * hop + win] += window
        prev_pos = pos

    out = out[:n_out] / np.maximum(norm[:n_out], 1e-6)
    return audio_io.AudioBuffer(out, fs)


def modify_pitch_tempo(audio, cfg):
    """Scale pitch by cfg.pitch_factor and speaking rate by cfg.tempo_factor.

    Stretch by pitch_factor/tempo_factor, then resample-and-relabel by
    pitch_factor; the two stages compose to the requested independent scalings.
    """
    if cfg.pitch_factor == 1.0 and cfg.tempo_factor == 1.0:
        return audio
    stretched = time_stretch(audio, cfg.pitch_factor / cfg.tempo_factor)
    if cfg.pitch_factor == 1.0:
        return stretched
    fs = audio.sample_rate_hz
    shifted = audio_io.resample(stretched, int(round(fs / cfg.pitch_factor)))
    return audio_io.AudioBuffer(shifted.samples, fs)
