"""Cross-modal embedding of audio and pose fragments into one 16-d space.

The audio branch is a bidirectional LSTM over per-frame MFCC vectors whose
final forward and backward hidden states are concatenated and projected.
The pose branch is a temporal convolution followed by one degree-normalized
graph propagation over the skeleton, global average pooling, and a
projection.  Both branches train jointly under a correlation matching loss
that pulls corresponding pairs together and pushes delayed pairs toward a
fixed per-coordinate offset.  All gradients are computed analytically
(backprop through time for the recurrent branch); training is plain
mini-batch gradient descent with global-norm clipping, fully deterministic
under a seed.

Model file format (``.ckmp``, little-endian)::

    magic "CKMP" | version u32 | tensor_count u32 |
    per tensor: name_len u32 | name utf8 | ndim u32 | dims u64*ndim | f64 data
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio_features import MfccFragment, N_MFCC
from .errors import DataError, FormatError, NumericalError
from .pose_data import FragmentDatabase, PoseFragment
from .skeleton import NECK, adjacency, normalized_adjacency

log = logging.getLogger(__name__)

MODEL_MAGIC = b"CKMP"
MODEL_VERSION = 1

EMBED_DIM = 16
HIDDEN_SIZE = 100
CONV_CHANNELS = 8
CONV_KERNEL = 3
POSE_INPUT_SCALE = 0.005  # px -> network units, applied after neck centering

DELAY_RANGE_S = (2.0, 5.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# parameters

@dataclass
class AudioEncoderParams:
    """Bi-LSTM weights (gates packed [input, forget, cell, output]) plus the
    projection from the concatenated final hidden states."""

    fwd_w: np.ndarray   # (4H, n_in)
    fwd_u: np.ndarray   # (4H, H)
    fwd_b: np.ndarray   # (4H,)
    bwd_w: np.ndarray
    bwd_u: np.ndarray
    bwd_b: np.ndarray
    proj_w: np.ndarray  # (dim, 2H)
    proj_b: np.ndarray  # (dim,)
    dropout: float = 0.1

    @property
    def hidden_size(self) -> int:
        return self.fwd_u.shape[1]

    @property
    def dim(self) -> int:
        return self.proj_w.shape[0]


@dataclass
class PoseEncoderParams:
    """Temporal conv + graph propagation weights over a fixed skeleton graph."""

    conv_w: np.ndarray    # (C_mid, 2, kernel)
    conv_b: np.ndarray    # (C_mid,)
    graph_w: np.ndarray   # (C_mid, C_out)
    adjacency: np.ndarray  # (V, V), 0/1, symmetric, no self-loops
    proj_w: np.ndarray    # (dim, C_out)
    proj_b: np.ndarray    # (dim,)
    norm_adj: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.norm_adj is None:
            self.norm_adj = normalized_adjacency(self.adjacency)

    @property
    def n_joints(self) -> int:
        return self.adjacency.shape[0]

    @property
    def dim(self) -> int:
        return self.proj_w.shape[0]


@dataclass
class ModelParams:
    audio: AudioEncoderParams
    pose: PoseEncoderParams
    margin: float = 1.0
    version: int = MODEL_VERSION

    def __post_init__(self):
        if self.audio.dim != self.pose.dim:
            raise DataError(
                f"branch output dimensions differ: audio {self.audio.dim}, "
                f"pose {self.pose.dim}"
            )

    @property
    def dim(self) -> int:
        return self.audio.dim


@dataclass
class TrainingPair:
    audio_fragment: MfccFragment
    pose_fragment: PoseFragment
    corresponding: bool
    delay_s: float = 0.0

    def __post_init__(self):
        if not self.corresponding and self.delay_s <= 0:
            raise DataError("non-corresponding pairs must carry a positive delay")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    dropout: float = 0.1
    dim: int = EMBED_DIM
    epochs: int = 500
    batch: int = 16
    seed: int = 0
    hidden: int = HIDDEN_SIZE
    margin: float = 1.0
    clip: float = 5.0
    conv_channels: int = CONV_CHANNELS
    kernel: int = CONV_KERNEL


def init_audio_params(
    rng: np.random.Generator,
    n_in: int = N_MFCC,
    hidden: int = HIDDEN_SIZE,
    dim: int = EMBED_DIM,
    dropout: float = 0.1,
    scale: float | None = None,
) -> AudioEncoderParams:
    def mat(rows, cols, fan):
        s = scale if scale is not None else 1.0 / np.sqrt(fan)
        return rng.uniform(-s, s, size=(rows, cols))

    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias keeps early memory open
    return AudioEncoderParams(
        fwd_w=mat(4 * hidden, n_in, n_in),
        fwd_u=mat(4 * hidden, hidden, hidden),
        fwd_b=b.copy(),
        bwd_w=mat(4 * hidden, n_in, n_in),
        bwd_u=mat(4 * hidden, hidden, hidden),
        bwd_b=b.copy(),
        proj_w=mat(dim, 2 * hidden, 2 * hidden),
        proj_b=np.zeros(dim),
        dropout=dropout,
    )


def init_pose_params(
    rng: np.random.Generator,
    adj: np.ndarray | None = None,
    channels: int = CONV_CHANNELS,
    kernel: int = CONV_KERNEL,
    dim: int = EMBED_DIM,
    scale: float | None = None,
) -> PoseEncoderParams:
    if adj is None:
        adj = adjacency()

    def mat(shape, fan):
        s = scale if scale is not None else 1.0 / np.sqrt(fan)
        return rng.uniform(-s, s, size=shape)

    return PoseEncoderParams(
        conv_w=mat((channels, 2, kernel), 2 * kernel),
        conv_b=np.zeros(channels),
        graph_w=mat((channels, channels), channels),
        adjacency=np.asarray(adj, dtype=np.float64),
        proj_w=mat((dim, channels), channels),
        proj_b=np.zeros(dim),
    )


def init_model(cfg: TrainConfig, adj: np.ndarray | None = None, n_in: int = N_MFCC) -> ModelParams:
    rng = np.random.default_rng(cfg.seed)
    return ModelParams(
        audio=init_audio_params(rng, n_in, cfg.hidden, cfg.dim, cfg.dropout),
        pose=init_pose_params(rng, adj, cfg.conv_channels, cfg.kernel, cfg.dim),
        margin=cfg.margin,
    )


# named parameter access (training updates, gradient checks, serialization)

_AUDIO_FIELDS = ("fwd_w", "fwd_u", "fwd_b", "bwd_w", "bwd_u", "bwd_b", "proj_w", "proj_b")
_POSE_FIELDS = ("conv_w", "conv_b", "graph_w", "proj_w", "proj_b")


def named_parameters(model: ModelParams) -> dict[str, np.ndarray]:
    out = {f"audio.{f}": getattr(model.audio, f) for f in _AUDIO_FIELDS}
    out.update({f"pose.{f}": getattr(model.pose, f) for f in _POSE_FIELDS})
    return out


# ---------------------------------------------------------------------------
# forward / backward passes (batch-first, fixed reduction order)

def _lstm_forward(x: np.ndarray, w, u, b):
    bsz, steps, _ = x.shape
    hid = u.shape[1]
    h = np.zeros((bsz, hid))
    c = np.zeros((bsz, hid))
    xw = x @ w.T  # (B, T, 4H)
    states = []
    for t in range(steps):
        z = xw[:, t] + h @ u.T + b
        i = _sigmoid(z[:, :hid])
        f = _sigmoid(z[:, hid : 2 * hid])
        g = np.tanh(z[:, 2 * hid : 3 * hid])
        o = _sigmoid(z[:, 3 * hid :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        states.append((h, c, i, f, g, o, tc))
        h = o * tc
        c = c_new
    return h, (states, x)


def _lstm_backward(d_h_final: np.ndarray, cache, u: np.ndarray):
    states, x = cache
    hid = u.shape[1]
    dw = np.zeros((4 * hid, x.shape[2]))
    du = np.zeros((4 * hid, hid))
    db = np.zeros(4 * hid)
    dh = d_h_final
    dc = np.zeros_like(d_h_final)
    for t in range(len(states) - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = states[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)],
            axis=1,
        )
        dw += dz.T @ x[:, t]
        du += dz.T @ h_prev
        db += dz.sum(axis=0)
        dh = dz @ u
        dc = dc * f
    return dw, du, db


def _audio_forward(p: AudioEncoderParams, feats: np.ndarray, train_mode: bool,
                   masks: np.ndarray | None):
    """feats (B, T, n_in) -> embeddings (B, dim) plus cache."""
    rev = np.ascontiguousarray(feats[:, ::-1])
    h_f, cache_f = _lstm_forward(feats, p.fwd_w, p.fwd_u, p.fwd_b)
    h_b, cache_b = _lstm_forward(rev, p.bwd_w, p.bwd_u, p.bwd_b)
    concat = np.concatenate([h_f, h_b], axis=1)
    if train_mode:
        dropped = concat * masks
    else:
        dropped = concat * (1.0 - p.dropout)
    emb = dropped @ p.proj_w.T + p.proj_b
    return emb, (cache_f, cache_b, concat, dropped, masks)


def _audio_backward(p: AudioEncoderParams, d_emb: np.ndarray, cache, train_mode: bool):
    cache_f, cache_b, concat, dropped, masks = cache
    hid = p.hidden_size
    grads = {
        "proj_w": d_emb.T @ dropped,
        "proj_b": d_emb.sum(axis=0),
    }
    d_dropped = d_emb @ p.proj_w
    d_concat = d_dropped * masks if train_mode else d_dropped * (1.0 - p.dropout)
    dw_f, du_f, db_f = _lstm_backward(d_concat[:, :hid], cache_f, p.fwd_u)
    dw_b, du_b, db_b = _lstm_backward(d_concat[:, hid:], cache_b, p.bwd_u)
    grads.update(
        fwd_w=dw_f, fwd_u=du_f, fwd_b=db_f, bwd_w=dw_b, bwd_u=du_b, bwd_b=db_b
    )
    return grads


def _pose_forward(p: PoseEncoderParams, x: np.ndarray):
    """x (B, 2, T, V) -> embeddings (B, dim) plus cache."""
    bsz, _, steps, joints = x.shape
    if joints != p.n_joints:
        raise DataError(f"pose input has {joints} joints, adjacency expects {p.n_joints}")
    k = p.conv_w.shape[2]
    pad = k // 2
    xp = np.zeros((bsz, x.shape[1], steps + 2 * pad, joints))
    xp[:, :, pad : pad + steps] = x
    g1 = np.zeros((bsz, p.conv_w.shape[0], steps, joints))
    for kk in range(k):
        g1 += np.einsum("mc,bctv->bmtv", p.conv_w[:, :, kk], xp[:, :, kk : kk + steps])
    g1 += p.conv_b[None, :, None, None]
    h1 = np.einsum("bmtu,mq->bqtu", g1, p.graph_w)
    g2 = np.einsum("vu,bqtu->bqtv", p.norm_adj, h1)
    pooled = g2.mean(axis=(2, 3))
    emb = pooled @ p.proj_w.T + p.proj_b
    return emb, (xp, g1, pooled, steps, joints, pad)


def _pose_backward(p: PoseEncoderParams, d_emb: np.ndarray, cache):
    xp, g1, pooled, steps, joints, pad = cache
    grads = {
        "proj_w": d_emb.T @ pooled,
        "proj_b": d_emb.sum(axis=0),
    }
    d_pooled = d_emb @ p.proj_w
    d_g2 = np.broadcast_to(
        d_pooled[:, :, None, None] / (steps * joints),
        (d_emb.shape[0], p.graph_w.shape[1], steps, joints),
    )
    d_h1 = np.einsum("vu,bqtv->bqtu", p.norm_adj, d_g2)
    grads["graph_w"] = np.einsum("bmtu,bqtu->mq", g1, d_h1)
    d_g1 = np.einsum("bqtu,mq->bmtu", d_h1, p.graph_w)
    grads["conv_b"] = d_g1.sum(axis=(0, 2, 3))
    k = p.conv_w.shape[2]
    d_conv_w = np.zeros_like(p.conv_w)
    for kk in range(k):
        d_conv_w[:, :, kk] = np.einsum("bmtv,bctv->mc", d_g1, xp[:, :, kk : kk + steps])
    grads["conv_w"] = d_conv_w
    return grads


# ---------------------------------------------------------------------------
# public encoding ops

def pose_input_tensor(frag: PoseFragment) -> np.ndarray:
    """(2, T, V) network input: neck-centered coordinates in network units."""
    kp = frag.frames.keypoints
    xy = kp[:, :, :2] - kp[:, NECK : NECK + 1, :2]
    return np.transpose(xy * POSE_INPUT_SCALE, (2, 0, 1))


def dropout_mask(rng_or_seed, dropout: float, size: int) -> np.ndarray:
    rng = (
        rng_or_seed
        if isinstance(rng_or_seed, np.random.Generator)
        else np.random.default_rng(rng_or_seed)
    )
    return (rng.random(size) >= dropout).astype(np.float64)


def audio_encode(
    params: AudioEncoderParams,
    frag: MfccFragment | np.ndarray,
    train_mode: bool = False,
    rng_seed: int = 0,
) -> np.ndarray:
    """Embed one MFCC fragment; dropout is applied only in train mode, with a
    mask drawn deterministically from ``rng_seed``."""
    feats = frag.features if isinstance(frag, MfccFragment) else np.asarray(frag)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise DataError(f"audio fragment must be (frames, {N_MFCC}), got {feats.shape}")
    if feats.shape[1] != params.fwd_w.shape[1]:
        raise DataError(
            f"feature dimension {feats.shape[1]} does not match encoder input "
            f"{params.fwd_w.shape[1]}"
        )
    masks = None
    if train_mode:
        masks = dropout_mask(rng_seed, params.dropout, 2 * params.hidden_size)[None, :]
    emb, _ = _audio_forward(params, feats[None], train_mode, masks)
    return emb[0]


def pose_encode(params: PoseEncoderParams, frag: PoseFragment | np.ndarray) -> np.ndarray:
    """Embed one pose fragment (expects normalized, neck-centerable input)."""
    x = pose_input_tensor(frag) if isinstance(frag, PoseFragment) else np.asarray(frag)
    if x.ndim != 3 or x.shape[0] != 2:
        raise DataError(f"pose input must be (2, frames, joints), got {x.shape}")
    emb, _ = _pose_forward(params, x[None])
    return emb[0]


def matching_loss(
    p_emb: np.ndarray, a_emb: np.ndarray, corresponding: bool, margin: float = 1.0
) -> float:
    """Squared distance for corresponding pairs; squared distance to the
    constant offset vector ``margin * 1`` for non-corresponding pairs."""
    p = np.asarray(p_emb, dtype=np.float64).reshape(-1)
    a = np.asarray(a_emb, dtype=np.float64).reshape(-1)
    if p.shape != a.shape:
        raise DataError(f"embedding dimensions differ: {p.shape} vs {a.shape}")
    diff = p - a
    if not corresponding:
        diff = diff - margin
    return float(np.sum(diff * diff))


# ---------------------------------------------------------------------------
# loss + gradients over a batch

def _batch_loss_and_grads(
    model: ModelParams,
    audio_x: np.ndarray,      # (B, T, n_in)
    pose_x: np.ndarray,       # (B, 2, T, V)
    labels: np.ndarray,       # (B,) bool
    train_mode: bool,
    masks: np.ndarray | None,
):
    a_emb, a_cache = _audio_forward(model.audio, audio_x, train_mode, masks)
    p_emb, p_cache = _pose_forward(model.pose, pose_x)
    diff = p_emb - a_emb
    diff[~labels] -= model.margin
    bsz = audio_x.shape[0]
    loss = float(np.sum(diff * diff) / bsz)
    d_diff = 2.0 * diff / bsz
    a_grads = _audio_backward(model.audio, -d_diff, a_cache, train_mode)
    p_grads = _pose_backward(model.pose, d_diff, p_cache)
    grads = {f"audio.{k}": v for k, v in a_grads.items()}
    grads.update({f"pose.{k}": v for k, v in p_grads.items()})
    return loss, grads, a_emb, p_emb


def pair_loss_and_grads(
    model: ModelParams,
    audio_feats: np.ndarray,
    pose_tensor: np.ndarray,
    corresponding: bool,
    train_mode: bool = False,
    rng_seed: int = 0,
):
    """Loss and analytic parameter gradients for a single pair (used by the
    gradient-correctness checks)."""
    masks = None
    if train_mode:
        masks = dropout_mask(rng_seed, model.audio.dropout, 2 * model.audio.hidden_size)[None, :]
    loss, grads, _, _ = _batch_loss_and_grads(
        model,
        np.asarray(audio_feats, dtype=np.float64)[None],
        np.asarray(pose_tensor, dtype=np.float64)[None],
        np.array([corresponding]),
        train_mode,
        masks,
    )
    return loss, grads


# ---------------------------------------------------------------------------
# training data

def make_training_pairs(
    pose_fragments: list[PoseFragment],
    audio_fragments: list[MfccFragment],
    rng_seed: int = 0,
    delay_range_s: tuple[float, float] = DELAY_RANGE_S,
) -> list[TrainingPair]:
    """One positive per aligned index plus one delayed negative.

    Negatives reuse a pose fragment from the same source shifted by a whole
    number of fragments so the delay lies in ``delay_range_s``; fragments
    near a source boundary fall back to an earlier fragment at the same
    delay.  Sources too short for any delay are skipped (warning logged).
    """
    if len(pose_fragments) != len(audio_fragments):
        raise DataError(
            f"pose and audio fragment lists differ in length: "
            f"{len(pose_fragments)} vs {len(audio_fragments)}"
        )
    rng = np.random.default_rng(rng_seed)
    by_source: dict[str, list[int]] = {}
    for idx, frag in enumerate(pose_fragments):
        by_source.setdefault(frag.source_id, []).append(idx)

    lo, hi = delay_range_s
    pairs: list[TrainingPair] = []
    skipped = 0
    for source, indices in by_source.items():
        dur = pose_fragments[indices[0]].duration_s
        offsets = [m for m in range(1, int(hi / dur) + 1) if lo <= m * dur <= hi]
        ns = len(indices)
        for li, idx in enumerate(indices):
            pairs.append(
                TrainingPair(audio_fragments[idx], pose_fragments[idx], True, 0.0)
            )
            forward = [m for m in offsets if li + m < ns]
            backward = [m for m in offsets if li - m >= 0]
            if forward:
                m = forward[rng.integers(len(forward))]
                j = indices[li + m]
            elif backward:
                m = backward[rng.integers(len(backward))]
                j = indices[li - m]
            else:
                skipped += 1
                continue
            pairs.append(
                TrainingPair(audio_fragments[idx], pose_fragments[j], False, m * dur)
            )
    if skipped:
        log.warning("no delayed negative possible for %d fragment(s)", skipped)
    return pairs


def _pair_arrays(pairs: list[TrainingPair]):
    audio_x = np.stack([np.asarray(p.audio_fragment.features, dtype=np.float64) for p in pairs])
    pose_x = np.stack([pose_input_tensor(p.pose_fragment) for p in pairs])
    labels = np.array([p.corresponding for p in pairs], dtype=bool)
    return audio_x, pose_x, labels


# ---------------------------------------------------------------------------
# training

def train(
    pairs: list[TrainingPair],
    hyper: TrainConfig = TrainConfig(),
    model: ModelParams | None = None,
) -> tuple[ModelParams, list[float]]:
    """Minimize the mean matching loss by mini-batch gradient descent.

    Deterministic under ``hyper.seed``; returns the trained parameters and
    the per-epoch mean loss.  Aborts with diagnostics if the loss goes
    non-finite.
    """
    if not pairs:
        raise DataError("cannot train on an empty pair list")
    audio_x, pose_x, labels = _pair_arrays(pairs)
    if model is None:
        n_joints = pose_x.shape[3]
        adj = adjacency() if n_joints == 18 else None
        if adj is None:
            raise DataError(f"no default adjacency for {n_joints} joints; pass a model")
        model = init_model(hyper, adj, n_in=audio_x.shape[2])

    rng = np.random.default_rng(hyper.seed)
    params = named_parameters(model)
    n = len(pairs)
    history: list[float] = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for b0 in range(0, n, hyper.batch):
            sel = order[b0 : b0 + hyper.batch]
            masks = dropout_mask(rng, model.audio.dropout, (len(sel), 2 * model.audio.hidden_size))
            loss, grads, _, _ = _batch_loss_and_grads(
                model, audio_x[sel], pose_x[sel], labels[sel], True, masks
            )
            if not np.isfinite(loss):
                norms = {k: float(np.linalg.norm(v)) for k, v in params.items()}
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {b0 // hyper.batch}; "
                    f"parameter norms: {norms}"
                )
            total += loss * len(sel)
            gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            scale = hyper.lr * (hyper.clip / gnorm if gnorm > hyper.clip else 1.0)
            for key, g in grads.items():
                params[key] -= scale * g
        history.append(total / n)
    return model, history


def correlation_accuracy(
    model: ModelParams, pairs: list[TrainingPair], threshold: float = 1.0
) -> float:
    """Fraction of pairs whose corresponding/non-corresponding judgment by
    the embedding-distance-below-threshold rule matches the label."""
    if not pairs:
        raise DataError("cannot score an empty pair list")
    audio_x, pose_x, labels = _pair_arrays(pairs)
    a_emb, _ = _audio_forward(model.audio, audio_x, False, None)
    p_emb, _ = _pose_forward(model.pose, pose_x)
    dist = np.linalg.norm(p_emb - a_emb, axis=1)
    predicted = dist < threshold
    return float(np.mean(predicted == labels))


# ---------------------------------------------------------------------------
# retrieval

def attach_embeddings(model: ModelParams, db: FragmentDatabase) -> FragmentDatabase:
    """Database with every fragment's pose embedding precomputed (idempotent)."""
    fragments = [f.with_embedding(pose_encode(model.pose, f)) for f in db.fragments]
    return FragmentDatabase(fragments=fragments, metadata=dict(db.metadata), index=dict(db.index))


def retrieve(model: ModelParams, db: FragmentDatabase, audio_frag: MfccFragment) -> PoseFragment:
    """Pose fragment whose stored embedding is nearest to the encoded audio
    (Euclidean); ties break toward the lowest fragment index."""
    if len(db) == 0:
        raise DataError("cannot retrieve from an empty database")
    frag_len = db.metadata.get("frag_len")
    if frag_len is not None and len(audio_frag) != frag_len:
        raise DataError(
            f"audio fragment length {len(audio_frag)} does not match database "
            f"fragment length {frag_len}"
        )
    query = audio_encode(model.audio, audio_frag, train_mode=False)
    dists = np.linalg.norm(db.embeddings() - query, axis=1)
    return db.fragments[int(np.argmin(dists))]


# ---------------------------------------------------------------------------
# model file I/O

def _model_tensors(model: ModelParams) -> dict[str, np.ndarray]:
    out = named_parameters(model)
    out["pose.adjacency"] = model.pose.adjacency
    out["audio.dropout"] = np.array(model.audio.dropout)
    out["margin"] = np.array(model.margin)
    return out


def save_model(model: ModelParams, path) -> None:
    tensors = _model_tensors(model)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            enc = name.encode("utf-8")
            fh.write(struct.pack("<I", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_model(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != MODEL_VERSION:
        raise FormatError(
            f"{path}: model version {version} is not supported (expected {MODEL_VERSION})"
        )
    pos = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", raw, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).copy().reshape(shape)
        pos += size * 8
        tensors[name] = arr
    try:
        audio = AudioEncoderParams(
            fwd_w=tensors["audio.fwd_w"], fwd_u=tensors["audio.fwd_u"],
            fwd_b=tensors["audio.fwd_b"], bwd_w=tensors["audio.bwd_w"],
            bwd_u=tensors["audio.bwd_u"], bwd_b=tensors["audio.bwd_b"],
            proj_w=tensors["audio.proj_w"], proj_b=tensors["audio.proj_b"],
            dropout=float(tensors["audio.dropout"]),
        )
        pose = PoseEncoderParams(
            conv_w=tensors["pose.conv_w"], conv_b=tensors["pose.conv_b"],
            graph_w=tensors["pose.graph_w"], adjacency=tensors["pose.adjacency"],
            proj_w=tensors["pose.proj_w"], proj_b=tensors["pose.proj_b"],
        )
    except KeyError as e:
        raise FormatError(f"{path}: missing tensor {e.args[0]!r}") from e
    return ModelParams(audio=audio, pose=pose, margin=float(tensors["margin"]))
