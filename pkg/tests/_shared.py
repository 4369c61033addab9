"""Constants and helpers shared by the test modules."""

import numpy as np

# rotation matrices given to two decimals in the representation discussion
R1_ROUNDED = np.array([[0.80, -0.28, 0.53], [0.46, 0.85, -0.25], [-0.38, 0.44, 0.81]])
R2_ROUNDED = np.array([[-0.71, 0.52, 0.48], [0.71, 0.46, 0.54], [0.05, 0.72, -0.69]])
R3_ROUNDED = np.array([[-0.61, 0.36, 0.70], [0.50, -0.51, 0.70], [0.61, 0.78, 0.14]])

# axis-angle triple used for the ordering claim
OMEGA_1 = np.array([0.01, 0.0, 0.0])
OMEGA_2 = np.array([0.5, 0.0, 0.0])
OMEGA_3 = np.array([6.27, 0.0, 0.0])


def rel_err(a, n, floor=1e-8):
    a, n = np.ravel(a), np.ravel(n)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(n), floor))


def two_bone_x():
    from kinemotion.skeleton import Bone, SkeletonSpec

    return SkeletonSpec("two", (Bone(-1, (1.0, 0.0, 0.0)), Bone(0, (1.0, 0.0, 0.0))))
