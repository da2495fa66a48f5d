"""Audio decoding, per-video-frame MFCC features, and musical beat detection.

Analysis windows are tied to the video frame grid: window length is
1000/fps ms with hop equal to the window, so feature frame i covers video
frame i exactly.  Feature dimension is 13 (DCT coefficients 0-12 over a
26-filter mel bank); the 0th coefficient is kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import DataError, ParseError
from .pose_data import fragment_count

INTERNAL_RATE = 16000
N_MELS = 26
N_MFCC = 13
PREEMPHASIS = 0.97
LOG_EPS = 1e-10

# plausible musical tempo range searched by the tracker
MIN_BPM = 40.0
MAX_BPM = 220.0


@dataclass
class AudioClip:
    """Mono waveform in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if s.size == 0:
            raise DataError("audio clip is empty")
        if self.sample_rate <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate}")
        self.samples = s

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class MfccSequence:
    """Per-video-frame 13-d MFCC vectors."""

    features: np.ndarray  # (n_frames, 13)
    frame_rate: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != N_MFCC:
            raise DataError(f"MFCC features must be (frames, {N_MFCC}), got {f.shape}")
        self.features = f

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class MfccFragment:
    """A fixed-length window of MFCC frames, mirroring pose fragmentation."""

    features: np.ndarray
    frame_rate: int
    source_id: str = ""
    start_frame: int = 0

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class BeatTrack:
    """Detected musical beats in video-frame units plus the tempo estimate."""

    beat_frames: np.ndarray
    tempo_bpm: float

    def __post_init__(self):
        b = np.asarray(self.beat_frames, dtype=np.int64).reshape(-1)
        if b.size and np.any(np.diff(b) <= 0):
            raise DataError("beat frames must be strictly increasing")
        self.beat_frames = b

    def __len__(self) -> int:
        return self.beat_frames.size


# ---------------------------------------------------------------------------
# I/O

def load_audio(path) -> AudioClip:
    """Read a WAV file: average to mono, scale to [-1, 1], resample to 16 kHz.

    Accepts 16-bit PCM and 32-bit float encodings only.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise ParseError(f"{path}: cannot read WAV: {e}") from e
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ParseError(
            f"{path}: unsupported WAV encoding {data.dtype}; "
            "expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != INTERNAL_RATE:
        ratio = Fraction(INTERNAL_RATE, int(rate))
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples, INTERNAL_RATE)


def save_wav(path, samples: np.ndarray, sample_rate: int = INTERNAL_RATE) -> None:
    """Write mono float samples in [-1, 1] as 16-bit PCM."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    wavfile.write(path, sample_rate, (pcm * 32767.0).astype(np.int16))


# ---------------------------------------------------------------------------
# framing and the mel/MFCC chain

def frame_starts(n_samples: int, sample_rate: int, fps: int) -> tuple[np.ndarray, int]:
    """Start offsets (one per video frame) and the window length in samples.

    Starts are computed with exact integer arithmetic so the frame count is
    floor(duration_s * fps) for any clip length.
    """
    win = sample_rate // fps
    n_frames = (n_samples * fps) // sample_rate
    starts = (np.arange(n_frames, dtype=np.int64) * sample_rate) // fps
    return starts, win


def mel_filterbank(
    n_filters: int, nfft: int, sample_rate: int,
    f_low: float = 0.0, f_high: float | None = None,
) -> np.ndarray:
    """Triangular mel-spaced filters over rfft bins, shape (n_filters, nfft//2+1)."""
    if f_high is None:
        f_high = sample_rate / 2.0
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    mel_inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    points = mel_inv(np.linspace(mel(f_low), mel(f_high), n_filters + 2))
    bins = np.floor((nfft + 1) * points / sample_rate).astype(int)
    fb = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for i in range(lo, mid):
            fb[j, i] = (i - lo) / max(mid - lo, 1)
        for i in range(mid, hi):
            fb[j, i] = (hi - i) / max(hi - mid, 1)
    return fb


def _log_mel_frames(clip: AudioClip, video_fps: int) -> np.ndarray:
    """Log mel-band powers per video frame, shape (n_frames, N_MELS)."""
    starts, win = frame_starts(clip.samples.size, clip.sample_rate, video_fps)
    if starts.size < 1:
        raise DataError(
            f"clip of {clip.duration_s:.3f}s is shorter than one "
            f"{1000.0 / video_fps:.2f}ms analysis window"
        )
    emphasized = np.concatenate(
        ([clip.samples[0]], clip.samples[1:] - PREEMPHASIS * clip.samples[:-1])
    )
    nfft = 1
    while nfft < win:
        nfft *= 2
    window = np.hamming(win)
    frames = np.stack([emphasized[s : s + win] for s in starts]) * window
    spectrum = np.fft.rfft(frames, n=nfft, axis=1)
    power = (np.abs(spectrum) ** 2) / nfft
    fb = mel_filterbank(N_MELS, nfft, clip.sample_rate)
    return np.log(power @ fb.T + LOG_EPS)


def compute_mfcc(clip: AudioClip, video_fps: int = 24) -> MfccSequence:
    """13-d MFCC per video frame: pre-emphasis, Hamming-windowed FFT,
    26-filter mel bank, log, DCT-II (orthonormal), coefficients 0-12.
    """
    log_mel = _log_mel_frames(clip, video_fps)
    coeffs = dct(log_mel, type=2, axis=1, norm="ortho")[:, :N_MFCC]
    return MfccSequence(coeffs, frame_rate=video_fps)


# ---------------------------------------------------------------------------
# beat tracking

def onset_envelope(clip: AudioClip, video_fps: int) -> np.ndarray:
    """Spectral-flux onset strength with one value per video frame."""
    log_mel = _log_mel_frames(clip, video_fps)
    flux = np.maximum(np.diff(log_mel, axis=0), 0.0).sum(axis=1)
    return np.concatenate(([0.0], flux))


def detect_beats(clip: AudioClip, video_fps: int = 24) -> BeatTrack:
    """Locate musical beats as video-frame indices.

    Onset envelope -> autocorrelation tempo estimate (parabolic peak
    refinement) -> phase chosen to maximize envelope mass on the periodic
    grid -> each grid point snapped to the local envelope maximum.
    Silence yields an empty track with tempo 0.
    """
    if clip.duration_s < 2.0:
        raise DataError(f"beat detection needs >= 2s of audio, got {clip.duration_s:.2f}s")
    env = onset_envelope(clip, video_fps)
    n = env.size
    if env.max() <= 1e-9:
        return BeatTrack(np.array([], dtype=np.int64), 0.0)

    centered = env - env.mean()
    lag_min = max(2, int(np.ceil(60.0 * video_fps / MAX_BPM)))
    lag_max = min(n - 1, int(np.floor(60.0 * video_fps / MIN_BPM)))
    if lag_max <= lag_min:
        return BeatTrack(np.array([], dtype=np.int64), 0.0)
    full = np.correlate(centered, centered, mode="full")
    acf = full[n - 1 :]
    window = acf[lag_min : lag_max + 1]
    # prefer the shortest near-maximal lag so harmonics do not halve the tempo
    peak = window.max()
    candidates = np.flatnonzero(window >= 0.9 * peak)
    lag = int(candidates[0]) + lag_min
    if 0 < lag < n - 1:
        a, b, c = acf[lag - 1], acf[lag], acf[lag + 1]
        denom = a - 2 * b + c
        if abs(denom) > 1e-12:
            shift = 0.5 * (a - c) / denom
            if abs(shift) <= 1.0:
                lag = lag + shift
    period = float(lag)
    tempo = 60.0 * video_fps / period

    # phase: periodic comb with maximal envelope support
    best_phase, best_score = 0, -np.inf
    for phase in range(int(np.ceil(period))):
        grid = np.round(phase + period * np.arange((n - phase) / period + 1)).astype(int)
        grid = grid[grid < n]
        score = env[grid].sum()
        if score > best_score + 1e-12:
            best_score, best_phase = score, phase

    grid = np.round(best_phase + period * np.arange((n - best_phase) / period + 1)).astype(int)
    grid = grid[grid < n]
    beats = []
    for g in grid:
        lo, hi = max(0, g - 1), min(n, g + 2)
        snapped = lo + int(np.argmax(env[lo:hi]))
        if not beats or snapped > beats[-1]:
            beats.append(snapped)
    return BeatTrack(np.array(beats, dtype=np.int64), tempo)


# ---------------------------------------------------------------------------
# fragmentation

def segment_audio(
    mfcc: MfccSequence, duration_s: int, source_id: str = ""
) -> list[MfccFragment]:
    """Cut an MFCC sequence with the same windowing contract as pose fragments."""
    frag_len = duration_s * mfcc.frame_rate
    out = []
    for k in range(fragment_count(len(mfcc), frag_len)):
        start = k * frag_len
        out.append(
            MfccFragment(
                features=mfcc.features[start : start + frag_len].copy(),
                frame_rate=mfcc.frame_rate,
                source_id=source_id,
                start_frame=start,
            )
        )
    return out
