"""Spatial and temporal repair of concatenated pose fragments.

Spatial alignment detects per-joint jumps between adjacent frames and
rebuilds a small window around each jump from time-series decompositions
(trend + periodic profile + residual) fitted on the preceding frames.
Temporal alignment time-remaps each inter-beat window so the frame of
maximal body movement lands on the musical beat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .audio_features import BeatTrack
from .errors import DataError
from .pose_data import PoseSequence


@dataclass(frozen=True)
class AlignmentWindows:
    """Window sizes: omega_a repairs, omega_b references, omega_c beat search."""

    omega_a: int = 8
    omega_b: int = 24
    omega_c: int = 24

    def __post_init__(self):
        if not (self.omega_b > self.omega_a >= 2):
            raise DataError(
                f"need omega_b > omega_a >= 2, got a={self.omega_a} b={self.omega_b}"
            )
        if self.omega_c < 2:
            raise DataError(f"omega_c must be >= 2, got {self.omega_c}")


@dataclass
class TsdModel:
    """Additive decomposition of a displacement series.

    ``trend`` holds cubic coefficients (a0..a3) over the time coordinate the
    series was fitted against; ``seasonal`` is the per-phase profile of
    length ``period`` anchored at ``phase_origin`` (phase of a time t is
    ``(t - phase_origin) mod period``).  ``period == n_samples`` marks an
    aperiodic series whose profile is identically zero.
    """

    trend: np.ndarray          # (4,) cubic coefficients, low order first
    seasonal: np.ndarray       # (period,)
    period: int
    sigma2: float
    phase_origin: int = 0
    n_samples: int = 0

    @property
    def aperiodic(self) -> bool:
        return self.period >= self.n_samples

    def trend_at(self, times: np.ndarray) -> np.ndarray:
        t = np.asarray(times, dtype=np.float64)
        return self.trend[0] + self.trend[1] * t + self.trend[2] * t**2 + self.trend[3] * t**3

    def seasonal_at(self, times: np.ndarray) -> np.ndarray:
        if self.aperiodic:
            return np.zeros(np.asarray(times).shape)
        phase = (np.asarray(times, dtype=np.int64) - self.phase_origin) % self.period
        return self.seasonal[phase]

    def predict(self, times: np.ndarray) -> np.ndarray:
        # expected value of the residual term is zero
        return self.trend_at(times) + self.seasonal_at(times)


def detect_discontinuities(seq: PoseSequence, threshold: float = 10.0) -> list[int]:
    """Frames where any single joint moved more than ``threshold`` px."""
    if len(seq) < 2:
        raise DataError("discontinuity detection needs at least 2 frames")
    xy = seq.keypoints[:, :, :2]
    step = np.linalg.norm(np.diff(xy, axis=0), axis=2)  # (n-1, J)
    flagged = np.flatnonzero(np.any(step > threshold, axis=1)) + 1
    return [int(k) for k in flagged]


def linear_fit_endpoints(values: np.ndarray) -> np.ndarray:
    """The line through the first and last samples, evaluated at every index.

    Deliberately not least-squares: endpoints are reproduced exactly so the
    residual ``values - line`` vanishes at both ends.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n == 0:
        raise DataError("cannot fit a line to an empty series")
    if n == 1:
        return v.copy()
    u = np.arange(n, dtype=np.float64) / (n - 1)
    shape = (n,) + (1,) * (v.ndim - 1)
    return v[0] + (v[-1] - v[0]) * u.reshape(shape)


def find_period(d: np.ndarray, th: float) -> int:
    """Smallest lag t >= 2 whose mean absolute lag-difference is within th.

    Searches lags 2..len//2; returns len when nothing qualifies (aperiodic).
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.size
    for t in range(2, n // 2 + 1):
        if np.mean(np.abs(d[:-t] - d[t:])) <= th:
            return t
    return n


def tsd_decompose(d: np.ndarray, th: float = 5.0, times: np.ndarray | None = None) -> TsdModel:
    """Split a displacement series into cubic trend, periodic profile, residual.

    The period is found first; lag-T differencing cancels the repeating
    component, the remaining differences determine the cubic's non-constant
    coefficients by least squares, and the constant absorbs the residual
    mean.  The per-phase profile is the phase average of what the trend
    leaves behind, so trend + profile + residual reconstructs ``d`` exactly
    with a zero-mean residual.
    """
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    n = d.size
    if n < 8:
        raise DataError(f"series of {n} samples is too short to decompose (need >= 8)")
    if times is None:
        t = np.arange(n, dtype=np.float64)
        origin = 0
    else:
        t = np.asarray(times, dtype=np.float64).reshape(-1)
        if t.size != n:
            raise DataError("times must match the series length")
        origin = int(round(t[0]))

    period = find_period(d, th)
    if period >= n:
        design = np.stack([np.ones(n), t, t**2, t**3], axis=1)
        alpha, *_ = np.linalg.lstsq(design, d, rcond=None)
        trend = design @ alpha
        resid = d - trend
        return TsdModel(
            trend=alpha, seasonal=np.zeros(n), period=n,
            sigma2=float(np.var(resid)), phase_origin=origin, n_samples=n,
        )

    dd = d[period:] - d[:-period]
    cols = np.stack(
        [
            t[period:] - t[:-period],
            t[period:] ** 2 - t[:-period] ** 2,
            t[period:] ** 3 - t[:-period] ** 3,
        ],
        axis=1,
    )
    a123, *_ = np.linalg.lstsq(cols, dd, rcond=None)
    partial = a123[0] * t + a123[1] * t**2 + a123[2] * t**3
    a0 = float(np.mean(d - partial))
    alpha = np.concatenate(([a0], a123))
    trend = a0 + partial
    resid = d - trend

    phases = np.arange(n) % period
    seasonal = np.zeros(period)
    for p in range(period):
        seasonal[p] = resid[phases == p].mean()
    gamma = resid - seasonal[phases]
    return TsdModel(
        trend=alpha, seasonal=seasonal, period=period,
        sigma2=float(np.var(gamma)), phase_origin=origin, n_samples=n,
    )


def _hermite_bridge(values: np.ndarray, s: int, e: int) -> np.ndarray:
    """Endpoint-anchored cubic across [s, e] with one-sided boundary slopes."""
    v = values
    n = v.shape[0]
    h = float(e - s)
    m0 = (v[s] - v[s - 1]) if s >= 1 else np.zeros_like(v[s])
    m1 = (v[e + 1] - v[e]) if e + 1 < n else np.zeros_like(v[e])
    u = (np.arange(s, e + 1) - s) / h
    u = u.reshape((-1,) + (1,) * (v.ndim - 1))
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return h00 * v[s] + h10 * h * m0 + h01 * v[e] + h11 * h * m1


def _predict_window(
    series: np.ndarray, s: int, e: int, win: AlignmentWindows, th: float
) -> np.ndarray | None:
    """Model-based replacement values for series[s..e], or None without history.

    Decompositions are fitted on full-length reference windows
    [s-omega_b-o, s-o) for offsets o = 0, omega_a, ... < omega_b (as far as
    history allows).  The predicted trend is the mean of the fitted trends,
    the periodic profile is the one with the largest complete-period
    support (nearest window wins ties), and the prediction is re-anchored
    to zero at both window endpoints before adding the endpoint line.
    """
    models = []
    for o in range(0, win.omega_b, win.omega_a):
        w_start = s - win.omega_b - o
        if w_start < 0:
            break
        ref = series[w_start : w_start + win.omega_b]
        d = ref - linear_fit_endpoints(ref)
        t_ref = np.arange(w_start - s, w_start - s + win.omega_b)
        models.append(tsd_decompose(d, th, times=t_ref))
    if not models:
        return None

    t_win = np.arange(0, e - s + 1)
    trend_star = np.mean([m.trend_at(t_win) for m in models], axis=0)

    supports = [
        0 if m.aperiodic else (m.n_samples // m.period) * m.period for m in models
    ]
    best = int(np.argmax(supports))
    seasonal_star = (
        models[best].seasonal_at(t_win) if supports[best] > 0 else np.zeros(t_win.size)
    )

    d_star = trend_star + seasonal_star
    d_star = d_star - linear_fit_endpoints(d_star)  # anchor to clean endpoints

    v_s, v_e = series[s], series[e]
    line = v_s + (v_e - v_s) * t_win / (e - s)
    return line + d_star


def spatial_align(
    seq: PoseSequence,
    win: AlignmentWindows = AlignmentWindows(),
    tsd_th: float = 5.0,
    disc_threshold: float = 10.0,
) -> PoseSequence:
    """Rebuild a small window around every detected discontinuity.

    Each joint coordinate is repaired independently; window endpoints are
    kept exactly and frames outside repaired windows are untouched.  Jumps
    too early in the sequence for a full reference history fall back to an
    endpoint-anchored cubic bridge.
    """
    n = len(seq)
    if n < win.omega_b + win.omega_a:
        raise DataError(
            f"sequence of {n} frames is too short for alignment "
            f"(need >= {win.omega_b + win.omega_a})"
        )
    flags = detect_discontinuities(seq, disc_threshold)
    if not flags:
        return seq.copy()

    out = seq.keypoints.copy()
    half = win.omega_a // 2
    last_end = -1
    for k in flags:
        if k <= last_end:
            continue  # already covered by the previous repair
        s = max(0, k - half)
        e = min(n - 1, k + half)
        if e - s < 2 or s >= k:
            continue
        for j in range(seq.n_joints):
            for axis in (0, 1):
                series = seq.keypoints[:, j, axis]
                repaired = _predict_window(series, s, e, win, tsd_th)
                if repaired is None:
                    repaired = _hermite_bridge(series, s, e)
                out[s : e + 1, j, axis] = repaired
        last_end = e
    return PoseSequence(out, seq.fps, seq.resolution)


# ---------------------------------------------------------------------------
# temporal alignment

def movement_curve(seq: PoseSequence) -> np.ndarray:
    """Total inter-frame movement, summed over joints; index 0 is zero."""
    xy = seq.keypoints[:, :, :2]
    step = np.linalg.norm(np.diff(xy, axis=0), axis=2).sum(axis=1)
    return np.concatenate(([0.0], step))


def find_pose_beats(seq: PoseSequence, omega_c: int) -> list[int]:
    """Frame of maximal movement in each non-overlapping omega_c window.

    Returns exactly len(seq) // omega_c indices, earliest frame on ties;
    frame 0 has no predecessor and is never eligible.
    """
    if len(seq) < omega_c:
        raise DataError(f"sequence shorter than one window of {omega_c} frames")
    move = movement_curve(seq)
    beats = []
    for w in range(len(seq) // omega_c):
        lo = w * omega_c
        hi = lo + omega_c
        start = max(lo, 1)
        beats.append(start + int(np.argmax(move[start:hi])))
    return beats


def _beat_windows(beats: np.ndarray, n: int, omega_c: int) -> list[tuple[int, int, int]]:
    """(lo, beat, hi) spans covering one musical beat each, tiled midpoint
    to midpoint so the window width follows the actual beat spacing."""
    inside = [int(b) for b in beats if 0 <= b < n]
    windows = []
    for idx, b in enumerate(inside):
        if idx > 0:
            lo = (inside[idx - 1] + b) // 2
        else:
            gap = (inside[1] - b) // 2 if len(inside) > 1 else omega_c // 2
            lo = max(0, b - gap)
        if idx < len(inside) - 1:
            hi = (b + inside[idx + 1]) // 2
        else:
            gap = (b - inside[idx - 1]) // 2 if len(inside) > 1 else omega_c // 2
            hi = min(n - 1, b + gap)
        windows.append((lo, b, hi))
    return windows


def temporal_align(seq: PoseSequence, beats: BeatTrack, omega_c: int) -> PoseSequence:
    """Time-remap each beat window so its pose beat lands on the musical beat.

    Within a window [lo, hi] containing musical beat b and pose beat mu,
    the spans [lo, mu] and (mu, hi] are linearly remapped onto [lo, b] and
    (b, hi], and every coordinate is resampled at integer frames with an
    interpolating cubic through the remapped samples.  Window boundaries
    (and hence the total frame count) are preserved; windows whose pose
    beat already sits on the musical beat pass through unchanged.
    """
    if len(beats) == 0:
        raise DataError("temporal alignment needs at least one musical beat")
    n = len(seq)
    move = movement_curve(seq)
    out = seq.keypoints.copy()

    for lo, b, hi in _beat_windows(beats.beat_frames, n, omega_c):
        if hi - lo < 3:
            continue
        b = min(max(b, lo + 1), hi - 1)
        start = max(lo + 1, 1)
        mu = start + int(np.argmax(move[start : hi + 1]))
        mu = min(max(mu, lo + 1), hi - 1)
        if mu == b:
            continue

        xs = np.arange(lo, hi + 1)
        flat = seq.keypoints[lo : hi + 1].reshape(hi - lo + 1, -1)
        spline = CubicSpline(xs, flat, axis=0)

        ys = np.arange(lo, hi + 1, dtype=np.float64)
        src = np.empty_like(ys)
        left = ys <= b
        src[left] = lo + (ys[left] - lo) * (mu - lo) / (b - lo)
        src[~left] = mu + (ys[~left] - b) * (hi - mu) / (hi - b)
        resampled = spline(src).reshape(hi - lo + 1, seq.n_joints, 3)
        # confidences ride along with the remap but must stay in range
        resampled[:, :, 2] = np.clip(resampled[:, :, 2], 0.0, 1.0)
        # resampling must not touch the boundary poses
        resampled[0] = seq.keypoints[lo]
        resampled[-1] = seq.keypoints[hi]
        out[lo : hi + 1] = resampled
    return PoseSequence(out, seq.fps, seq.resolution)
