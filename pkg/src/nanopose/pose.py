"""Poses on R^3 x S^1 and frame transforms about the shared gravity axis.

Angle differences are always real values in [-pi, pi].
"""

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi]; values already inside pass through unchanged."""
    if -math.pi <= a <= math.pi:
        return a
    return math.atan2(math.sin(a), math.cos(a))


@dataclass
class Pose:
    x: float
    y: float
    z: float
    theta: float

    def as_tuple(self):
        return (self.x, self.y, self.z, self.theta)


def to_odometry(pred_in_drone: Pose, drone_pose: Pose) -> Pose:
    """Express a drone-relative pose in the world-fixed odometry frame."""
    c, s = math.cos(drone_pose.theta), math.sin(drone_pose.theta)
    return Pose(
        x=drone_pose.x + c * pred_in_drone.x - s * pred_in_drone.y,
        y=drone_pose.y + s * pred_in_drone.x + c * pred_in_drone.y,
        z=drone_pose.z + pred_in_drone.z,
        theta=wrap_angle(pred_in_drone.theta + drone_pose.theta),
    )


def to_drone(pose_in_odom: Pose, drone_pose: Pose) -> Pose:
    """Inverse of to_odometry."""
    dx = pose_in_odom.x - drone_pose.x
    dy = pose_in_odom.y - drone_pose.y
    c, s = math.cos(drone_pose.theta), math.sin(drone_pose.theta)
    return Pose(
        x=c * dx + s * dy,
        y=-s * dx + c * dy,
        z=pose_in_odom.z - drone_pose.z,
        theta=wrap_angle(pose_in_odom.theta - drone_pose.theta),
    )
