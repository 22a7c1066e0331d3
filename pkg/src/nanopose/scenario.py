"""Scripted subject motion for the tracking experiment.

Eight phases over 50 s: stand, walk forward and back (2.4 m in 6 s each),
sidestep left and right (2.4 m in 7 s each) without turning, a quarter
circle of radius 2.4 m walked facing the path tangent, a 180-degree
in-place clockwise rotation in 8 s, and a final stand.  The subject starts
at the origin facing +x ("top of the map"); the drone starts 3.6 m in
front, aimed 30 degrees off the subject so it must yaw left to center them.
"""

import math
from dataclasses import dataclass

from .pose import Pose, wrap_angle

WALK_DIST = 2.4
CIRCLE_RADIUS = 2.4
SEPARATION = 3.6
HEADING_OFFSET = math.radians(30.0)


@dataclass
class Phase:
    name: str
    duration: float


@dataclass
class ScenarioScript:
    phases: tuple
    drone_start: Pose
    subject_start: Pose

    @property
    def total_duration(self) -> float:
        return sum(p.duration for p in self.phases)

    def phase_end(self, index: int) -> float:
        return sum(p.duration for p in self.phases[: index + 1])


def default_script() -> ScenarioScript:
    phases = (
        Phase("stand", 5.0),
        Phase("forward", 6.0),
        Phase("backward", 6.0),
        Phase("side_left", 7.0),
        Phase("side_right", 7.0),
        Phase("quarter_circle", 6.0),
        Phase("spin_180", 8.0),
        Phase("stand", 5.0),
    )
    # drone ahead of the subject along its facing axis, yawed 30 deg short
    # of the bearing back to the subject
    drone_start = Pose(SEPARATION, 0.0, 0.0, wrap_angle(math.pi - HEADING_OFFSET))
    return ScenarioScript(phases=phases, drone_start=drone_start,
                          subject_start=Pose(0.0, 0.0, 0.0, 0.0))


def subject_state_at(t: float, script: ScenarioScript = None):
    """Ground-truth subject pose and velocity at time t.

    Returns (Pose, (vx, vy, vz, omega)).  Motion is piecewise analytic, so
    sampling is exact at any instant.
    """
    if t < 0:
        t = 0.0
    v_fwd = WALK_DIST / 6.0
    v_side = WALK_DIST / 7.0
    arc_rate = (math.pi / 2.0) / 6.0
    arc_speed = CIRCLE_RADIUS * arc_rate
    spin_rate = -math.pi / 8.0

    if t < 5.0:
        return Pose(0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0)
    if t < 11.0:
        return Pose(v_fwd * (t - 5.0), 0.0, 0.0, 0.0), (v_fwd, 0.0, 0.0, 0.0)
    if t < 17.0:
        return Pose(WALK_DIST - v_fwd * (t - 11.0), 0.0, 0.0, 0.0), (-v_fwd, 0.0, 0.0, 0.0)
    if t < 24.0:
        return Pose(0.0, v_side * (t - 17.0), 0.0, 0.0), (0.0, v_side, 0.0, 0.0)
    if t < 31.0:
        return Pose(0.0, WALK_DIST - v_side * (t - 24.0), 0.0, 0.0), (0.0, -v_side, 0.0, 0.0)
    if t < 37.0:
        a = arc_rate * (t - 31.0)
        pose = Pose(CIRCLE_RADIUS * math.sin(a), CIRCLE_RADIUS * (1.0 - math.cos(a)), 0.0, a)
        vel = (arc_speed * math.cos(a), arc_speed * math.sin(a), 0.0, arc_rate)
        return pose, vel
    if t < 45.0:
        th = wrap_angle(math.pi / 2.0 + spin_rate * (t - 37.0))
        return Pose(CIRCLE_RADIUS, CIRCLE_RADIUS, 0.0, th), (0.0, 0.0, 0.0, spin_rate)
    return Pose(CIRCLE_RADIUS, CIRCLE_RADIUS, 0.0, -math.pi / 2.0), (0.0, 0.0, 0.0, 0.0)


def target_pose_at(t: float, delta: float) -> Pose:
    """Drone pose the controller is asked to reach: delta ahead of the
    subject, facing back at them."""
    sp, _ = subject_state_at(t)
    return Pose(
        sp.x + delta * math.cos(sp.theta),
        sp.y + delta * math.sin(sp.theta),
        sp.z,
        wrap_angle(sp.theta + math.pi),
    )
