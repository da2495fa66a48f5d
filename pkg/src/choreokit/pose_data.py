"""Keypoint sequence ingestion, cleanup, fragmentation and the fragment database.

Keypoint file format (one JSON document per source video)::

    { "fps": int, "width": int, "height": int,
      "frames": [ [ [x, y, c] * 18 ], ... ] }

Database file format (``.ckdb``, little-endian)::

    magic "CKDB" | version u32 | fps u32 | width u32 | height u32 |
    n_joints u32 | duration_s u32 | frag_len u32 | count u64 |
    then `count` length-prefixed records:
      record_len u64 | source_id_len u32 | source_id utf8 | start_frame u32 |
      has_embedding u8 | [embed_dim u32 | embed f64*dim] | coords f64*(frag_len*n_joints*3)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParseError, SchemaError
from .skeleton import ANKLES, HAND_FOOT, N_JOINTS, NOSE

DB_MAGIC = b"CKDB"
DB_VERSION = 1

VALID_DURATIONS = (1, 2, 3, 4)


@dataclass(frozen=True)
class PoseFrame:
    """One frame of 2D body keypoints, rows are (x, y, confidence)."""

    keypoints: np.ndarray  # (18, 3)
    frame_index: int

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        if kp.shape != (N_JOINTS, 3):
            raise SchemaError(
                f"frame {self.frame_index}: expected {N_JOINTS} keypoints, got shape {kp.shape}"
            )
        object.__setattr__(self, "keypoints", kp)


@dataclass
class PoseSequence:
    """A contiguous run of pose frames at a fixed fps and resolution.

    ``keypoints`` has shape (n_frames, n_joints, 3); frame indices are the
    array positions (re-indexed after any filtering).
    """

    keypoints: np.ndarray
    fps: int = 24
    resolution: tuple[int, int] = (1920, 1080)

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        if kp.ndim != 3 or kp.shape[2] != 3:
            raise SchemaError(f"keypoints must be (frames, joints, 3), got {kp.shape}")
        self.keypoints = kp

    def __len__(self) -> int:
        return self.keypoints.shape[0]

    @property
    def n_joints(self) -> int:
        return self.keypoints.shape[1]

    def frame(self, i: int) -> PoseFrame:
        return PoseFrame(self.keypoints[i], i)

    def slice(self, start: int, stop: int) -> "PoseSequence":
        return PoseSequence(self.keypoints[start:stop].copy(), self.fps, self.resolution)

    def copy(self) -> "PoseSequence":
        return PoseSequence(self.keypoints.copy(), self.fps, self.resolution)


@dataclass
class PoseFragment:
    """A fixed-duration slice of a source sequence; the retrieval unit."""

    frames: PoseSequence
    duration_s: int
    source_id: str
    start_frame: int = 0
    embedding: np.ndarray | None = None

    def __post_init__(self):
        expected = self.duration_s * self.frames.fps
        if len(self.frames) != expected:
            raise DataError(
                f"fragment from {self.source_id!r}: {len(self.frames)} frames, "
                f"expected {expected} ({self.duration_s}s at {self.frames.fps}fps)"
            )

    def with_embedding(self, emb: np.ndarray) -> "PoseFragment":
        return replace(self, embedding=np.asarray(emb, dtype=np.float64))


@dataclass
class FragmentDatabase:
    """Ordered, immutable-by-convention store of pose fragments."""

    fragments: list[PoseFragment] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    index: dict[int, int] = field(default_factory=dict)  # fragment id -> byte offset

    def __len__(self) -> int:
        return len(self.fragments)

    def embeddings(self) -> np.ndarray:
        if any(f.embedding is None for f in self.fragments):
            raise DataError("database has fragments without embeddings")
        return np.stack([f.embedding for f in self.fragments])


# ---------------------------------------------------------------------------
# keypoint file I/O

def load_keypoint_sequence(path) -> PoseSequence:
    """Parse a keypoint JSON file into a PoseSequence.

    Raises ParseError for malformed JSON, SchemaError for wrong structure
    (naming the offending frame where possible).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    for key in ("fps", "width", "height", "frames"):
        if key not in doc:
            raise SchemaError(f"{path}: missing required key {key!r}")
    fps = int(doc["fps"])
    resolution = (int(doc["width"]), int(doc["height"]))
    if fps <= 0:
        raise SchemaError(f"{path}: fps must be positive, got {fps}")

    frames = doc["frames"]
    if not isinstance(frames, list):
        raise SchemaError(f"{path}: 'frames' must be a list")
    kp = np.zeros((len(frames), N_JOINTS, 3), dtype=np.float64)
    for i, frame in enumerate(frames):
        if not isinstance(frame, list) or len(frame) != N_JOINTS:
            raise SchemaError(
                f"{path}: frame {i} has {len(frame) if isinstance(frame, list) else '?'} "
                f"keypoints, expected {N_JOINTS}"
            )
        for j, triple in enumerate(frame):
            if not isinstance(triple, list) or len(triple) != 3:
                raise SchemaError(f"{path}: frame {i} joint {j} is not an [x, y, c] triple")
            kp[i, j] = triple
    if not np.all(np.isfinite(kp)):
        bad = int(np.argwhere(~np.isfinite(kp))[0][0])
        raise SchemaError(f"{path}: frame {bad} contains non-finite values")
    conf = kp[:, :, 2]
    if kp.size and (conf.min() < 0.0 or conf.max() > 1.0):
        bad = int(np.argwhere((conf < 0) | (conf > 1))[0][0])
        raise SchemaError(f"{path}: frame {bad} has confidence outside [0, 1]")
    return PoseSequence(kp, fps=fps, resolution=resolution)


def save_keypoint_sequence(seq: PoseSequence, path) -> None:
    """Write a PoseSequence in the same JSON schema the loader accepts."""
    doc = {
        "fps": int(seq.fps),
        "width": int(seq.resolution[0]),
        "height": int(seq.resolution[1]),
        "frames": [[[float(v) for v in kp] for kp in frame] for frame in seq.keypoints],
    }
    Path(path).write_text(json.dumps(doc))


# ---------------------------------------------------------------------------
# cleanup

def interpolate_missing(seq: PoseSequence) -> PoseSequence:
    """Fill zero-confidence keypoints by linear interpolation along time.

    Coordinates of missing detections are replaced using the nearest valid
    frames of the same joint (held constant past the ends); confidences are
    left at zero so downstream filtering still sees them.
    """
    kp = seq.keypoints.copy()
    n = len(seq)
    for j in range(seq.n_joints):
        valid = kp[:, j, 2] > 0
        if valid.all() or not valid.any():
            continue
        t_valid = np.flatnonzero(valid)
        t_all = np.arange(n)
        for axis in (0, 1):
            kp[:, j, axis] = np.interp(t_all, t_valid, kp[t_valid, j, axis])
    return PoseSequence(kp, seq.fps, seq.resolution)


def smooth_sequence(seq: PoseSequence, jitter_threshold: float = 10.0) -> PoseSequence:
    """Remove isolated single-frame spikes by neighbor interpolation.

    A keypoint at frame k is a spike when its displacement from the same
    joint at both k-1 and k+1 exceeds ``jitter_threshold`` px; it is replaced
    by the midpoint of those neighbors.  All spikes are decided against the
    original values, everything else is untouched.
    """
    if len(seq) == 0:
        raise DataError("cannot smooth an empty sequence")
    if len(seq) < 3:
        return seq.copy()
    kp = seq.keypoints
    xy = kp[:, :, :2]
    d_prev = np.linalg.norm(xy[1:-1] - xy[:-2], axis=2)
    d_next = np.linalg.norm(xy[1:-1] - xy[2:], axis=2)
    spikes = (d_prev > jitter_threshold) & (d_next > jitter_threshold)  # (n-2, J)

    out = kp.copy()
    frames, joints = np.nonzero(spikes)
    frames = frames + 1
    out[frames, joints, :2] = 0.5 * (xy[frames - 1, joints] + xy[frames + 1, joints])
    return PoseSequence(out, seq.fps, seq.resolution)


def filter_invalid_frames(
    seq: PoseSequence, distance_threshold: float = 100.0
) -> tuple[PoseSequence, list[int]]:
    """Drop undetectable frames, returning the survivors and removed indices.

    A frame is removed when either
      1. its mean per-keypoint displacement from the previous *retained*
         frame exceeds ``distance_threshold`` px (teleporting detections), or
      2. any hand/foot joint (wrists, ankles) has confidence 0.

    Retained frames are re-indexed to stay contiguous.
    """
    if len(seq) == 0:
        raise DataError("cannot filter an empty sequence")
    kp = seq.keypoints
    removed: list[int] = []
    kept: list[int] = []
    last_kept = None
    for i in range(len(seq)):
        if np.any(kp[i, HAND_FOOT, 2] == 0.0):
            removed.append(i)
            continue
        if last_kept is not None:
            mean_disp = float(
                np.mean(np.linalg.norm(kp[i, :, :2] - kp[last_kept, :, :2], axis=1))
            )
            if mean_disp > distance_threshold:
                removed.append(i)
                continue
        kept.append(i)
        last_kept = i
    if not kept:
        raise DataError("all frames removed by filtering")
    return PoseSequence(kp[kept].copy(), seq.fps, seq.resolution), removed


# ---------------------------------------------------------------------------
# fragmentation

def fragment_count(n_frames: int, frames_per_fragment: int) -> int:
    """Number of complete non-overlapping windows; the remainder is dropped."""
    return n_frames // frames_per_fragment


def segment_fragments(
    seq: PoseSequence, duration_s: int, source_id: str = ""
) -> list[PoseFragment]:
    """Cut a sequence into consecutive non-overlapping fixed-length fragments."""
    if duration_s not in VALID_DURATIONS:
        raise DataError(f"duration_s must be one of {VALID_DURATIONS}, got {duration_s}")
    frag_len = duration_s * seq.fps
    out = []
    for k in range(fragment_count(len(seq), frag_len)):
        start = k * frag_len
        out.append(
            PoseFragment(
                frames=seq.slice(start, start + frag_len),
                duration_s=duration_s,
                source_id=source_id,
                start_frame=start,
            )
        )
    return out


def normalize_fragment(frag: PoseFragment, target_height: float = 500.0) -> PoseFragment:
    """Scale a fragment so its maximum nose-to-ankle vertical extent matches
    ``target_height``, expanding x and y equally about the fragment centroid.
    """
    kp = frag.frames.keypoints
    nose_ok = kp[:, NOSE, 2] > 0
    best = 0.0
    for ankle in ANKLES:
        ok = nose_ok & (kp[:, ankle, 2] > 0)
        if np.any(ok):
            dist = np.abs(kp[ok, NOSE, 1] - kp[ok, ankle, 1])
            best = max(best, float(dist.max()))
    if best <= 0.0:
        raise DataError(
            f"fragment from {frag.source_id!r} at {frag.start_frame}: "
            "no usable nose-to-foot extent"
        )
    r = target_height / best
    valid = kp[:, :, 2] > 0
    centroid = kp[:, :, :2][valid].mean(axis=0) if valid.any() else kp[:, :, :2].reshape(-1, 2).mean(axis=0)
    out = kp.copy()
    out[:, :, :2] = centroid + r * (kp[:, :, :2] - centroid)
    return replace(
        frag, frames=PoseSequence(out, frag.frames.fps, frag.frames.resolution)
    )


# ---------------------------------------------------------------------------
# database

def build_database(fragments: list[PoseFragment]) -> FragmentDatabase:
    """Assemble fragments (already normalized) into a database, input order kept."""
    if not fragments:
        return FragmentDatabase(fragments=[], metadata={})
    fps = fragments[0].frames.fps
    duration = fragments[0].duration_s
    resolution = fragments[0].frames.resolution
    for f in fragments:
        if f.frames.fps != fps or f.duration_s != duration:
            raise DataError(
                f"mixed fragment timing: {f.source_id!r} has "
                f"({f.duration_s}s, {f.frames.fps}fps), expected ({duration}s, {fps}fps)"
            )
    meta = {
        "fps": fps,
        "resolution": resolution,
        "duration_s": duration,
        "frag_len": duration * fps,
        "n_joints": fragments[0].frames.n_joints,
    }
    return FragmentDatabase(fragments=list(fragments), metadata=meta)


def save_database(db: FragmentDatabase, path) -> None:
    meta = db.metadata
    fps = int(meta.get("fps", 24))
    w, h = meta.get("resolution", (0, 0))
    duration = int(meta.get("duration_s", 0))
    frag_len = int(meta.get("frag_len", 0))
    n_joints = int(meta.get("n_joints", N_JOINTS))

    db.index.clear()
    with open(path, "wb") as fh:
        fh.write(DB_MAGIC)
        fh.write(struct.pack("<IIIIIIQ", DB_VERSION, fps, int(w), int(h),
                             n_joints, duration, len(db.fragments)))
        fh.write(struct.pack("<I", frag_len))
        for fid, frag in enumerate(db.fragments):
            sid = frag.source_id.encode("utf-8")
            body = struct.pack("<I", len(sid)) + sid
            body += struct.pack("<I", frag.start_frame)
            if frag.embedding is not None:
                emb = np.asarray(frag.embedding, dtype="<f8")
                body += struct.pack("<BI", 1, emb.size) + emb.tobytes()
            else:
                body += struct.pack("<B", 0)
            body += np.ascontiguousarray(frag.frames.keypoints, dtype="<f8").tobytes()
            db.index[fid] = fh.tell()
            fh.write(struct.pack("<Q", len(body)))
            fh.write(body)


def load_database(path) -> FragmentDatabase:
    raw = Path(path).read_bytes()
    if raw[:4] != DB_MAGIC:
        raise FormatError(f"{path}: not a fragment database (bad magic)")
    version = struct.unpack_from("<I", raw, 4)[0]
    if version != DB_VERSION:
        raise FormatError(
            f"{path}: database version {version} is not supported (expected {DB_VERSION})"
        )
    _, fps, w, h, n_joints, duration, count = struct.unpack_from("<IIIIIIQ", raw, 4)
    offset = 4 + struct.calcsize("<IIIIIIQ")
    (frag_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4

    fragments = []
    index = {}
    for fid in range(count):
        index[fid] = offset
        (body_len,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        body = raw[offset : offset + body_len]
        if len(body) != body_len:
            raise FormatError(f"{path}: truncated record {fid}")
        offset += body_len

        pos = 0
        (sid_len,) = struct.unpack_from("<I", body, pos)
        pos += 4
        sid = body[pos : pos + sid_len].decode("utf-8")
        pos += sid_len
        (start_frame,) = struct.unpack_from("<I", body, pos)
        pos += 4
        (has_emb,) = struct.unpack_from("<B", body, pos)
        pos += 1
        embedding = None
        if has_emb:
            (dim,) = struct.unpack_from("<I", body, pos)
            pos += 4
            embedding = np.frombuffer(body, dtype="<f8", count=dim, offset=pos).copy()
            pos += dim * 8
        coords = np.frombuffer(
            body, dtype="<f8", count=frag_len * n_joints * 3, offset=pos
        ).reshape(frag_len, n_joints, 3).copy()
        fragments.append(
            PoseFragment(
                frames=PoseSequence(coords, fps=fps, resolution=(w, h)),
                duration_s=duration,
                source_id=sid,
                start_frame=start_frame,
                embedding=embedding,
            )
        )
    meta = {
        "fps": fps,
        "resolution": (w, h),
        "duration_s": duration,
        "frag_len": frag_len,
        "n_joints": n_joints,
    }
    # an empty database round-trips to the empty metadata build_database produces
    db = FragmentDatabase(fragments=fragments, metadata=meta if fragments else {})
    db.index = index
    return db
