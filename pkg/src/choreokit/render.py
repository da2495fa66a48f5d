"""Deterministic stick-figure rendering of pose sequences.

Frames are drawn supersampled with PIL and downscaled for anti-aliasing, so
identical inputs always produce byte-identical PNG files.  The module also
draws the beat-alignment diagnostic (movement curve + beat markers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .alignment import find_pose_beats, movement_curve
from .audio_features import BeatTrack
from .errors import DataError
from .pose_data import PoseFrame, PoseSequence
from .skeleton import EDGES


@dataclass(frozen=True)
class RenderStyle:
    background: tuple = (18, 18, 28)
    bone_color: tuple = (90, 200, 250)
    joint_color: tuple = (250, 120, 90)
    bone_width: int = 3
    joint_radius: int = 4
    min_confidence: float = 0.05
    supersample: int = 2


DEFAULT_STYLE = RenderStyle()


def fit_transform(
    seq: PoseSequence, canvas: tuple[int, int], margin: int = 40
) -> tuple[float, float, float]:
    """(scale, dx, dy) mapping the sequence's keypoint bounding box into the
    canvas with a margin, preserving aspect ratio."""
    kp = seq.keypoints
    valid = kp[:, :, 2] > 0
    xy = kp[:, :, :2][valid] if valid.any() else kp[:, :, :2].reshape(-1, 2)
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    usable = (canvas[0] - 2 * margin, canvas[1] - 2 * margin)
    scale = min(usable[0] / span[0], usable[1] / span[1])
    dx = margin + (usable[0] - span[0] * scale) / 2 - lo[0] * scale
    dy = margin + (usable[1] - span[1] * scale) / 2 - lo[1] * scale
    return float(scale), float(dx), float(dy)


def render_frame(
    pose: PoseFrame,
    canvas: tuple[int, int],
    style: RenderStyle = DEFAULT_STYLE,
    transform: tuple[float, float, float] | None = None,
) -> Image.Image:
    """Draw one skeleton frame onto a fresh image.

    Joints below the confidence floor are omitted, as is any bone touching
    one.  ``transform`` is an optional (scale, dx, dy) from fit_transform.
    """
    w, h = int(canvas[0]), int(canvas[1])
    if w <= 0 or h <= 0:
        raise DataError(f"degenerate canvas {canvas}")
    ss = max(1, style.supersample)
    img = Image.new("RGB", (w * ss, h * ss), style.background)
    draw = ImageDraw.Draw(img)

    kp = pose.keypoints
    if transform is not None:
        scale, dx, dy = transform
    else:
        scale, dx, dy = 1.0, 0.0, 0.0
    pts = kp[:, :2] * scale + np.array([dx, dy])
    pts = pts * ss
    visible = kp[:, 2] >= style.min_confidence

    width = max(1, style.bone_width * ss)
    for a, b in EDGES:
        if visible[a] and visible[b]:
            draw.line(
                [tuple(pts[a]), tuple(pts[b])], fill=style.bone_color, width=width
            )
    r = max(1, style.joint_radius * ss)
    for j in range(kp.shape[0]):
        if visible[j]:
            x, y = pts[j]
            draw.ellipse([x - r, y - r, x + r, y + r], fill=style.joint_color)

    if ss > 1:
        img = img.resize((w, h), Image.LANCZOS)
    return img


def render_video(
    seq: PoseSequence,
    out_dir,
    fps: int | None = None,
    canvas: tuple[int, int] | None = None,
    style: RenderStyle = DEFAULT_STYLE,
    gif_path=None,
) -> dict:
    """Write one PNG per frame plus a manifest; optionally an animated GIF.

    Returns the manifest dict.  Frames are named ``frame_%06d.png``.  When a
    canvas differing from the native resolution is requested the whole
    sequence is fit into it with one shared transform.
    """
    if len(seq) == 0:
        raise DataError("cannot render an empty sequence")
    fps = fps if fps is not None else seq.fps
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if canvas is None:
        canvas = seq.resolution
        transform = None
    else:
        transform = fit_transform(seq, canvas)

    images = []
    for i in range(len(seq)):
        img = render_frame(seq.frame(i), canvas, style, transform)
        img.save(out_dir / f"frame_{i:06d}.png")
        if gif_path is not None:
            images.append(img)

    manifest = {
        "fps": int(fps),
        "frame_count": len(seq),
        "resolution": [int(canvas[0]), int(canvas[1])],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest))
    if gif_path is not None:
        images[0].save(
            gif_path,
            save_all=True,
            append_images=images[1:],
            duration=int(round(1000.0 / fps)),
            loop=0,
        )
    return manifest


def plot_beat_alignment(
    audio_beats: BeatTrack,
    seq: PoseSequence,
    out,
    size: tuple[int, int] = (960, 320),
) -> Image.Image:
    """Movement curve with vertical lines at audio beats and discs at pose
    beats; written to ``out`` and returned."""
    if len(seq) == 0 or len(audio_beats) == 0:
        raise DataError("need a non-empty sequence and beat track to plot")
    move = movement_curve(seq)
    n = move.size
    beats = audio_beats.beat_frames
    spacing = int(np.median(np.diff(beats))) if len(beats) > 1 else max(2, n // 4)
    spacing = max(2, spacing)
    pose_beats = find_pose_beats(seq, spacing) if n >= spacing else []

    w, h = size
    pad = 24
    img = Image.new("RGB", (w, h), (250, 250, 248))
    draw = ImageDraw.Draw(img)

    peak = move.max() if move.max() > 0 else 1.0
    to_x = lambda t: pad + t * (w - 2 * pad) / max(n - 1, 1)
    to_y = lambda v: (h - pad) - v / peak * (h - 2 * pad)

    for b in beats:
        if 0 <= b < n:
            x = to_x(int(b))
            draw.line([(x, pad), (x, h - pad)], fill=(220, 90, 90), width=2)
    pts = [(to_x(t), to_y(move[t])) for t in range(n)]
    draw.line(pts, fill=(40, 40, 60), width=2)
    for mb in pose_beats:
        x, y = to_x(mb), to_y(move[mb])
        draw.ellipse([x - 4, y - 4, x + 4, y + 4], fill=(70, 110, 220))
    draw.line([(pad, h - pad), (w - pad, h - pad)], fill=(120, 120, 120), width=1)

    img.save(out)
    return img
