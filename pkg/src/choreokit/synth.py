"""Synthetic paired keypoint/audio sources with analytically known beats.

Each source is a click track at a fixed BPM plus a skeleton whose limbs
swing on sinusoids phase-locked to the click grid: swing velocity peaks
exactly on the clicks, so the ground-truth pose beats equal the audio
beats by construction.  That makes retrieval and alignment quality
measurable without any real dance footage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_features import save_wav
from .pose_data import PoseSequence, save_keypoint_sequence
from .skeleton import N_JOINTS

FPS = 24
RESOLUTION = (1920, 1080)
SAMPLE_RATE = 16000

# base skeleton (x offset from center, y) at 1920x1080, nose-to-ankle ~520 px
_BASE = {
    0: (0, 380),     # nose
    1: (0, 440),     # neck
    2: (-70, 450), 3: (-110, 520), 4: (-130, 585),   # right arm
    5: (70, 450), 6: (110, 520), 7: (130, 585),      # left arm
    8: (-45, 650), 9: (-50, 780), 10: (-55, 900),    # right leg
    11: (45, 650), 12: (50, 780), 13: (55, 900),     # left leg
    14: (-15, 370), 15: (15, 370), 16: (-35, 380), 17: (35, 380),
}

# horizontal swing amplitude per joint (px); arms carry the beat accents
_SWAY_X = {3: 30.0, 4: 55.0, 6: 30.0, 7: 55.0, 2: 10.0, 5: 10.0,
           0: 6.0, 14: 6.0, 15: 6.0, 16: 6.0, 17: 6.0,
           9: 4.0, 10: 7.0, 12: 4.0, 13: 7.0}
# vertical bob amplitude per joint (px), one cycle per beat
_SWAY_Y = {4: 14.0, 7: 14.0, 3: 8.0, 6: 8.0, 0: 3.0, 1: 3.0}


@dataclass
class SynthSpec:
    n_sources: int = 4
    bpm_list: list[float] = field(default_factory=lambda: [66.0, 76.0, 88.0, 104.0])
    duration_s: float = 25.0
    seed: int = 0
    fps: int = FPS
    resolution: tuple[int, int] = RESOLUTION
    sample_rate: int = SAMPLE_RATE


def click_track(
    bpm: float, duration_s: float, sample_rate: int = SAMPLE_RATE,
    fps: int = FPS, offset_frames: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Audio samples plus the click positions in (fractional) video frames."""
    n_samples = int(round(duration_s * sample_rate))
    samples = np.zeros(n_samples)
    t = np.arange(int(0.030 * sample_rate))
    click = 0.9 * np.sin(2 * np.pi * 1500.0 * t / sample_rate) * np.exp(-t / (0.008 * sample_rate))

    interval = 60.0 * fps / bpm  # frames per beat
    beat_frames = []
    b = offset_frames
    while b * sample_rate / fps < n_samples:
        pos = int(round(b * sample_rate / fps))
        end = min(n_samples, pos + click.size)
        samples[pos:end] += click[: end - pos]
        beat_frames.append(b)
        b += interval
    return np.clip(samples, -1.0, 1.0), np.array(beat_frames)


def dance_pose_sequence(
    bpm: float, n_frames: int, rng: np.random.Generator,
    fps: int = FPS, resolution: tuple[int, int] = RESOLUTION,
    offset_frames: float = 0.0,
) -> PoseSequence:
    """Skeleton swinging on beat-locked sinusoids.

    The swing phase crosses zero at every beat (velocity maximum), with a
    small third harmonic to sharpen the accents; a slow whole-body drift
    adds variety without moving the pose relative to its own neck.
    """
    interval = 60.0 * fps / bpm
    t = np.arange(n_frames, dtype=np.float64)
    phase = np.pi * (t - offset_frames) / interval
    swing = np.sin(phase) + 0.15 * np.sin(3.0 * phase)
    bob = np.sin(2.0 * phase)

    cx = resolution[0] / 2.0
    amp_jitter = 1.0 + rng.uniform(-0.08, 0.08)
    drift_phase = rng.uniform(0.0, 2.0 * np.pi)
    drift_x = 18.0 * np.sin(2.0 * np.pi * 0.11 * t / fps + drift_phase)
    drift_y = 10.0 * np.sin(2.0 * np.pi * 0.07 * t / fps + 1.7 * drift_phase)

    kp = np.zeros((n_frames, N_JOINTS, 3))
    kp[:, :, 2] = 1.0
    for j in range(N_JOINTS):
        bx, by = _BASE[j]
        side = -1.0 if bx < 0 else 1.0
        x = cx + bx + side * _SWAY_X.get(j, 2.0) * amp_jitter * swing + drift_x
        y = by + _SWAY_Y.get(j, 0.0) * amp_jitter * bob + drift_y
        kp[:, j, 0] = x
        kp[:, j, 1] = y
    return PoseSequence(kp, fps=fps, resolution=resolution)


def make_source(
    bpm: float, duration_s: float, rng: np.random.Generator,
    fps: int = FPS, resolution: tuple[int, int] = RESOLUTION,
    sample_rate: int = SAMPLE_RATE,
) -> tuple[PoseSequence, np.ndarray, dict]:
    """One paired (pose sequence, waveform, ground-truth schedule)."""
    interval = 60.0 * fps / bpm
    offset = float(rng.uniform(0.2, interval))
    samples, beat_frames = click_track(bpm, duration_s, sample_rate, fps, offset)
    n_frames = int(round(duration_s * fps))
    seq = dance_pose_sequence(bpm, n_frames, rng, fps, resolution, offset)
    truth = {
        "bpm": float(bpm),
        "fps": int(fps),
        "n_frames": n_frames,
        "offset_frames": offset,
        "beat_frames": [int(round(b)) for b in beat_frames if round(b) < n_frames],
    }
    truth["pose_beat_frames"] = list(truth["beat_frames"])
    return seq, samples, truth


def synth_dataset(spec: SynthSpec, out_dir) -> list[dict]:
    """Write ``n_sources`` paired fixtures; returns per-source manifests.

    Files per source ``i``: ``source_%03d.keypoints.json``,
    ``source_%03d.wav`` and ``source_%03d.truth.json``.  Deterministic
    under ``spec.seed``; BPMs cycle through ``spec.bpm_list``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    manifests = []
    for i in range(spec.n_sources):
        bpm = spec.bpm_list[i % len(spec.bpm_list)]
        seq, samples, truth = make_source(
            bpm, spec.duration_s, rng, spec.fps, spec.resolution, spec.sample_rate
        )
        kp_path = out_dir / f"source_{i:03d}.keypoints.json"
        wav_path = out_dir / f"source_{i:03d}.wav"
        truth_path = out_dir / f"source_{i:03d}.truth.json"
        save_keypoint_sequence(seq, kp_path)
        save_wav(wav_path, samples, spec.sample_rate)
        truth_path.write_text(json.dumps(truth))
        manifests.append(
            {
                "source_id": f"source_{i:03d}",
                "bpm": bpm,
                "keypoints": str(kp_path),
                "audio": str(wav_path),
                "truth": str(truth_path),
            }
        )
    return manifests
