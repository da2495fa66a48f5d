"""COCO-18 skeleton layout: joint indices, edge list, graph adjacency.

Joint order follows the common 18-keypoint body layout:

    0 nose, 1 neck, 2 r_shoulder, 3 r_elbow, 4 r_wrist,
    5 l_shoulder, 6 l_elbow, 7 l_wrist, 8 r_hip, 9 r_knee,
    10 r_ankle, 11 l_hip, 12 l_knee, 13 l_ankle,
    14 r_eye, 15 l_eye, 16 r_ear, 17 l_ear
"""

from __future__ import annotations

import numpy as np

N_JOINTS = 18

NOSE = 0
NECK = 1
R_WRIST, L_WRIST = 4, 7
R_ANKLE, L_ANKLE = 10, 13

WRISTS = (R_WRIST, L_WRIST)
ANKLES = (R_ANKLE, L_ANKLE)
# "hand/foot" joints used by frame filtering and by the moving/spacing metrics
HAND_FOOT = WRISTS + ANKLES

JOINT_NAMES = [
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
]

# 17 undirected bones drawn by the renderer and wired into the pose graph.
EDGES = [
    (0, 1),
    (1, 2), (2, 3), (3, 4),
    (1, 5), (5, 6), (6, 7),
    (1, 8), (8, 9), (9, 10),
    (1, 11), (11, 12), (12, 13),
    (0, 14), (14, 16),
    (0, 15), (15, 17),
]


def adjacency(n_joints: int = N_JOINTS, edges=None) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix without self-loops."""
    if edges is None:
        edges = EDGES
    a = np.zeros((n_joints, n_joints), dtype=np.float64)
    for i, j in edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    """Degree-normalized propagation matrix with self-loops.

    Computes ``D^{-1/2} (A + I) D^{-1/2}`` where ``D_ii`` is the row sum
    of ``A + I``.  Symmetric, spectral radius <= 1.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if not np.allclose(a, a.T):
        raise ValueError("adjacency must be symmetric")
    a_hat = a + np.eye(a.shape[0])
    deg = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def path_graph(n_joints: int) -> np.ndarray:
    """Adjacency of a simple chain 0-1-...-n, handy for small tests."""
    return adjacency(n_joints, [(i, i + 1) for i in range(n_joints - 1)])
