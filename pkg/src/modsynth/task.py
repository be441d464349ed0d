"""Task specification: target locations, tolerances and run mode."""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import Payload
from .kinematics import TargetPose
from .transforms import euler_xyz_to_matrix, matrix_to_quat

MODES = ("full", "conventional_only")


@dataclass(frozen=True)
class Tsl:
    """A task-space location; orientation is intrinsic XYZ Euler angles in degrees."""

    position: tuple
    orientation_deg: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        if len(self.position) != 3:
            raise ValueError("TSL position needs 3 coordinates")
        if self.orientation_deg is not None:
            object.__setattr__(self, "orientation_deg", tuple(float(x) for x in self.orientation_deg))
            if len(self.orientation_deg) != 3:
                raise ValueError("TSL orientation needs 3 Euler angles")

    def target(self) -> TargetPose:
        quat = None
        if self.orientation_deg is not None:
            R = euler_xyz_to_matrix(*(math.radians(a) for a in self.orientation_deg))
            quat = matrix_to_quat(R)
        return TargetPose(np.array(self.position), quat)


@dataclass
class TaskSpec:
    tsls: list
    base_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    payload: Optional[Payload] = None
    pos_tol: float = 1e-3
    ori_tol: float = 1e-2
    mode: str = "full"
    name: str = "task"
    settings: dict = field(default_factory=dict)  # GA overrides carried by the task file
    base_meta: Optional[dict] = field(default=None, compare=False, repr=False)  # base pose as written in the file

    def __post_init__(self):
        if len(self.tsls) < 1:
            raise ValueError("a task needs at least one TSL")
        if not (self.pos_tol > 0 and self.ori_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.base_pose = np.asarray(self.base_pose, dtype=float)

    def targets(self):
        return [t.target() for t in self.tsls]
