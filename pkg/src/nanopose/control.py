"""Velocity-level tracking control and the drone dynamics proxy.

The high-level controller drives the drone toward a point a fixed distance
in front of the subject within a time horizon tau, feeding forward the
subject's estimated velocity; heading control points the camera at the
subject.  Commands are clamped per axis at 1 m/s and 0.8 rad/s.  The
low-level attitude cascade is proxied by first-order velocity tracking
whose horizontal acceleration is limited by the 12-degree pitch ceiling
(g*sin(12deg) ~= 2.04 m/s^2).
"""

import math
from dataclasses import dataclass

from .pose import Pose, wrap_angle

G_ACCEL = 9.81
PITCH_LIMIT_DEG = 12.0


@dataclass
class ControlConfig:
    delta: float = 1.3                 # standoff distance in front of the subject, m
    tau: float = 0.5                   # control horizon, s
    v_max: float = 1.0                 # per-axis linear clamp, m/s
    omega_max: float = 0.8             # angular clamp, rad/s
    a_max: float = G_ACCEL * math.sin(math.radians(PITCH_LIMIT_DEG))
    t_v: float = 0.3                   # velocity tracking time constant, s
    t_omega: float = 0.15              # yaw-rate tracking time constant, s


@dataclass
class SubjectEstimate:
    pose: Pose
    vel: tuple   # (vx, vy, vz, omega)


def _clamp(v, lim):
    return lim if v > lim else (-lim if v < -lim else v)


def velocity_command(drone: Pose, subject: SubjectEstimate, cfg: ControlConfig):
    """Target linear velocity and yaw rate for the current estimates."""
    ex, ey = math.cos(subject.pose.theta), math.sin(subject.pose.theta)
    tx = subject.pose.x + ex * cfg.delta
    ty = subject.pose.y + ey * cfg.delta
    tz = subject.pose.z
    vx = _clamp((tx - drone.x) / cfg.tau + subject.vel[0], cfg.v_max)
    vy = _clamp((ty - drone.y) / cfg.tau + subject.vel[1], cfg.v_max)
    vz = _clamp((tz - drone.z) / cfg.tau + subject.vel[2], cfg.v_max)
    dx = subject.pose.x - drone.x
    dy = subject.pose.y - drone.y
    if dx * dx + dy * dy < 1e-12:
        omega = 0.0   # bearing undefined, hold the current heading
    else:
        heading_to_subject = math.atan2(dy, dx)
        omega = _clamp(wrap_angle(heading_to_subject - drone.theta) / cfg.tau, cfg.omega_max)
    return (vx, vy, vz), omega


@dataclass
class DroneState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    theta: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    omega: float = 0.0

    def pose(self) -> Pose:
        return Pose(self.x, self.y, self.z, self.theta)


def step_dynamics(state: DroneState, v_cmd, omega_cmd: float, dt: float, cfg: ControlConfig):
    """Integrate one tick of the first-order response proxy.

    Returns the horizontal acceleration magnitude actually applied, so
    callers can assert the pitch-derived bound.
    """
    if dt > 0.010:
        raise ValueError(f"dynamics tick {dt} s exceeds 10 ms")
    ax = (v_cmd[0] - state.vx) / cfg.t_v
    ay = (v_cmd[1] - state.vy) / cfg.t_v
    ah = math.hypot(ax, ay)
    if ah > cfg.a_max:
        scale = cfg.a_max / ah
        ax *= scale
        ay *= scale
        ah = cfg.a_max
    az = (v_cmd[2] - state.vz) / cfg.t_v
    state.vx += ax * dt
    state.vy += ay * dt
    state.vz += az * dt
    state.omega += (omega_cmd - state.omega) / cfg.t_omega * dt
    state.x += state.vx * dt
    state.y += state.vy * dt
    state.z += state.vz * dt
    state.theta = wrap_angle(state.theta + state.omega * dt)
    return ah
