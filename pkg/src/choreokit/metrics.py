"""Evaluation suite: beat alignment score, moving/spacing distribution distances.

Movement histograms use fixed pixel-distance bin edges
[0, 20, 40, 60, 80, 400]; displacements of 400 px or more are clamped into
the last bin.  Distribution distances are symmetric KL divergences with a
small additive smoothing so empty bins stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_features import BeatTrack
from .errors import DataError
from .pose_data import PoseSequence
from .skeleton import ANKLES, WRISTS

BIN_EDGES = np.array([0.0, 20.0, 40.0, 60.0, 80.0, 400.0])
KL_SMOOTHING = 1e-6

_PART_JOINTS = {"hand": WRISTS, "foot": ANKLES}


@dataclass(frozen=True)
class MovementHistogram:
    """Probability mass over the fixed movement-distance bins."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64)
        if m.shape != (len(BIN_EDGES) - 1,):
            raise DataError(f"expected {len(BIN_EDGES) - 1} bin masses, got {m.shape}")
        if m.min() < 0 or abs(m.sum() - 1.0) > 1e-9:
            raise DataError("histogram masses must be non-negative and sum to 1")
        object.__setattr__(self, "mass", m)

    @property
    def edges(self) -> np.ndarray:
        return BIN_EDGES


def _part_indices(part: str) -> tuple[int, int]:
    try:
        return _PART_JOINTS[part]
    except KeyError:
        raise DataError(f"part must be 'hand' or 'foot', got {part!r}") from None


def bin_distances(values: np.ndarray) -> MovementHistogram:
    """Histogram raw pixel distances into the fixed bins, normalized to 1."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise DataError("no distances to bin")
    v = np.minimum(v, BIN_EDGES[-1] - 1e-9)  # clamp overflow into the last bin
    counts, _ = np.histogram(v, bins=BIN_EDGES)
    return MovementHistogram(counts / counts.sum())


def movement_histogram(seq: PoseSequence, part: str) -> MovementHistogram:
    """Distribution of adjacent-frame displacements of the selected joints
    (both wrists for 'hand', both ankles for 'foot')."""
    if len(seq) < 2:
        raise DataError("movement histogram needs at least 2 frames")
    joints = list(_part_indices(part))
    xy = seq.keypoints[:, joints, :2]
    disp = np.linalg.norm(np.diff(xy, axis=0), axis=2)  # (n-1, 2)
    return bin_distances(disp)


def spacing_histogram(seq: PoseSequence, part: str) -> MovementHistogram:
    """Distribution of per-frame left-right joint spacing for the part."""
    if len(seq) < 1:
        raise DataError("spacing histogram needs at least 1 frame")
    a, b = _part_indices(part)
    gap = np.linalg.norm(seq.keypoints[:, a, :2] - seq.keypoints[:, b, :2], axis=1)
    return bin_distances(gap)


def symmetric_kl(p: np.ndarray, q: np.ndarray, smoothing: float = KL_SMOOTHING) -> float:
    """(KL(p||q) + KL(q||p)) / 2 after additive smoothing and renormalization."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise DataError(f"distribution lengths differ: {p.size} vs {q.size}")
    for name, d in (("p", p), ("q", q)):
        if d.min() < 0 or abs(d.sum() - 1.0) > 1e-6:
            raise DataError(f"{name} is not a normalized distribution (sum {d.sum():.8f})")
    ps = p + smoothing
    qs = q + smoothing
    ps /= ps.sum()
    qs /= qs.sum()
    log_ratio = np.log(ps / qs)
    return float(0.5 * (np.sum(ps * log_ratio) + np.sum(qs * -log_ratio)))


def mdd(generated: PoseSequence, reference: PoseSequence, part: str) -> float:
    """Moving Distribution Distance between adjacent-frame displacement
    histograms of the two sequences."""
    h_gen = movement_histogram(generated, part)
    h_ref = movement_histogram(reference, part)
    return symmetric_kl(h_gen.mass, h_ref.mass)


def sdd(generated: PoseSequence, reference: PoseSequence, part: str) -> float:
    """Spacing Distribution Distance between left-right joint gap histograms."""
    h_gen = spacing_histogram(generated, part)
    h_ref = spacing_histogram(reference, part)
    return symmetric_kl(h_gen.mass, h_ref.mass)


def beat_alignment_score(
    audio_beats: BeatTrack | np.ndarray,
    pose_beats,
    tolerance: int = 2,
) -> float:
    """Fraction of audio beats matched by a pose beat within +-tolerance frames.

    Matching is greedy in time order and one-to-one: each audio beat takes
    the nearest unused pose beat inside the tolerance.  Tolerance 0 demands
    exact frame equality.
    """
    if isinstance(audio_beats, BeatTrack):
        audio = audio_beats.beat_frames
    else:
        audio = np.asarray(audio_beats, dtype=np.int64).reshape(-1)
    pose = np.asarray(list(pose_beats), dtype=np.int64).reshape(-1)
    if audio.size == 0:
        raise DataError("beat alignment score needs at least one audio beat")
    used = np.zeros(pose.size, dtype=bool)
    matched = 0
    for a in audio:
        best, best_dist = -1, tolerance + 1
        for j in range(pose.size):
            if used[j]:
                continue
            d = abs(int(pose[j]) - int(a))
            if d < best_dist:
                best, best_dist = j, d
        if best >= 0 and best_dist <= tolerance:
            used[best] = True
            matched += 1
    return matched / audio.size
