"""Motivation-gated social-force pedestrian interacting with a single vehicle.

The pedestrian is a point mass driven by a goal-seeking force plus three
vehicle-induced fields (shape repulsion, circulating flow, forward-corridor
push). Whether the goal force is active at all is decided by a filtered
"motivation" scalar fed by the time gap the vehicle leaves for crossing.

All functions are pure: they take value objects and return new ones, so a
single parameter set can serve any number of concurrent simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Time-to-collision saturates here instead of diverging for stopped or
# already-passed vehicles; sigmoid(psi^T f) is fully saturated long before.
TTC_CAP = 100.0

NEAR_SIDE = "near"  # spawn on the vehicle-lane side of the road
FAR_SIDE = "far"


@dataclass(frozen=True)
class PedParams:
    """Pedestrian model constants (defaults are the calibrated set)."""

    alpha: float = 0.8          # motivation filter memory, in [0, 1)
    v_d: float = 2.0            # desired walking speed, m/s
    t_r: float = 0.05           # reaction time, s
    psi: tuple[float, float] = (3.0, -0.3)  # feature weights [t_adv, accel]
    theta_f: float = 0.3        # motivation threshold gating the goal force
    beta: float = 2.2           # logistic offset
    k_d: float = 200.0          # navigation gain
    sigma_d: float = 0.09       # direction regulariser, m^2
    shape: tuple[float, float, float] = (800.0, 4.0, 0.1)   # (A, d0, sigma)
    flow: tuple[float, float, float] = (600.0, 6.0, 0.1)    # (A, d0, sigma)
    speed: tuple[float, float, float] = (400.0, 1.0, 0.6)   # (A, dT, sigma_y)
    a_max: float = 3.0          # acceleration clamp, m/s^2
    v_max: float = 4.0          # speed clamp, m/s
    mass: float = 75.0          # kg
    k_v: float = 0.1            # flow/speed blending coefficient, s^2/m^2
    lane_width: float = 3.0     # m; sigma_y defaults to 0.2 * lane_width

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 0.0 < self.theta_f < 1.0:
            raise ValueError(f"theta_f must be in (0, 1), got {self.theta_f}")
        for name in ("v_d", "t_r", "beta", "k_d", "sigma_d", "a_max",
                     "v_max", "mass", "k_v", "lane_width"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("shape", "flow", "speed"):
            if any(v <= 0.0 for v in getattr(self, name)):
                raise ValueError(f"all {name} parameters must be positive")


@dataclass
class PedestrianState:
    p: np.ndarray               # world position, m
    v: np.ndarray               # world velocity, m/s
    motivation: float           # crossing willingness in [0, 1]
    p0: np.ndarray              # spawn position, m
    goal: np.ndarray            # goal position, m
    side: str = NEAR_SIDE       # NEAR_SIDE or FAR_SIDE

    def copy(self) -> "PedestrianState":
        return PedestrianState(self.p.copy(), self.v.copy(), self.motivation,
                               self.p0.copy(), self.goal.copy(), self.side)


@dataclass
class VehiclePose:
    """Vehicle on a straight reference path along +x (heading fixed)."""

    x: float
    y: float
    v: float = 0.0              # longitudinal speed, >= 0
    a: float = 0.0              # commanded longitudinal acceleration
    half_length: float = 2.4    # ellipse semi-axis along x, m
    half_width: float = 0.9     # ellipse semi-axis along y, m


def linear_decay(d: float, amp: float, d0: float, sigma: float) -> float:
    """Smoothed linear ramp from `amp` at d=0 to ~0 beyond d0.

    Total function of d >= 0; strictly decreasing for sigma > 0.
    """
    r = d0 - d
    return amp / (2.0 * d0) * (r + math.sqrt(r * r + sigma))


def elliptical_distance(p_local, a_e: float, b_e: float) -> float:
    """Normalised distance: 1.0 exactly on the vehicle ellipse boundary."""
    x, y = float(p_local[0]), float(p_local[1])
    return math.sqrt((x / a_e) ** 2 + (y / b_e) ** 2)


def advantage_time(d_gap: float, v_v: float, k: int, lane_width: float,
                   params: PedParams, vehicle_passed: bool = False) -> float:
    """Time margin the pedestrian has: TTC minus crossing and reaction time.

    k is 1 when the pedestrian starts on the vehicle-lane side (half the
    road to clear), 2 otherwise. TTC saturates at TTC_CAP for a stopped
    vehicle or once the front bumper has passed the pedestrian.
    """
    if vehicle_passed or v_v <= 0.01:
        ttc = TTC_CAP
    else:
        ttc = min(d_gap / v_v, TTC_CAP)
    return ttc - k * lane_width / params.v_d - params.t_r


def motivation_innovation(t_adv: float, accel: float, params: PedParams) -> float:
    """Instantaneous crossing willingness from the gap/acceleration features."""
    z = params.psi[0] * t_adv + params.psi[1] * accel - params.beta
    return 1.0 / (1.0 + math.exp(-z))


def motivation_update(m_prev: float, m_hat: float, params: PedParams) -> float:
    return params.alpha * m_prev + (1.0 - params.alpha) * m_hat


def desired_velocity(p, goal, params: PedParams) -> np.ndarray:
    """Unit-ish direction to the goal scaled to the preferred walking speed.

    The sigma_d term keeps the direction finite (and the magnitude tapering)
    as p approaches the goal.
    """
    delta = np.asarray(goal, dtype=float) - np.asarray(p, dtype=float)
    denom = math.sqrt(float(delta @ delta) + params.sigma_d)
    return params.v_d * delta / denom


def navigational_force(state: PedestrianState, params: PedParams) -> np.ndarray:
    """Relaxation toward the desired velocity, gated by motivation.

    Returns zero when motivation is at or below the crossing threshold.
    """
    if state.motivation <= params.theta_f:
        return np.zeros(2)
    v_des = desired_velocity(state.p, state.goal, params)
    return state.motivation * params.k_d * (v_des - state.v)


def shape_force(p_local, pose: VehiclePose, params: PedParams) -> np.ndarray:
    """Repulsion along the outward normal of the vehicle ellipse."""
    x, y = float(p_local[0]), float(p_local[1])
    a_e, b_e = pose.half_length, pose.half_width
    gx, gy = 2.0 * x / a_e**2, 2.0 * y / b_e**2
    norm = math.hypot(gx, gy)
    if norm == 0.0:
        return np.zeros(2)  # degenerate interior point
    amp, d0, sigma = params.shape
    mag = linear_decay(elliptical_distance(p_local, a_e, b_e), amp, d0, sigma)
    return np.array([mag * gx / norm, mag * gy / norm])


def path_progress(p, p0, goal) -> float:
    """Projection of the walked displacement onto the spawn-to-goal axis, m."""
    p0 = np.asarray(p0, dtype=float)
    axis = np.asarray(goal, dtype=float) - p0
    dist = math.hypot(axis[0], axis[1])
    return float((np.asarray(p, dtype=float) - p0) @ axis) / dist

def flow_coefficient(p_local, p0_local, goal_local) -> float:
    """Signed circulation coefficient for the flow field.

    Magnitude ramps from 1 at the spawn point to 0 at the goal projection
    (the vehicle should stop steering a pedestrian who has passed it).
    The sign picks the rotation direction with the shorter detour around
    the ellipse, judged by normalised bearings; ties go counterclockwise.
    """
    prog = path_progress(p_local, p0_local, goal_local)
    dist = math.hypot(*(np.asarray(goal_local, dtype=float) - np.asarray(p0_local, dtype=float)))
    if prog < 0.0:
        mag = 1.0
    elif prog > dist:
        return 0.0
    else:
        mag = (dist - prog) / dist
    th_p = math.atan2(float(p_local[1]), float(p_local[0]))
    th_g = math.atan2(float(goal_local[1]), float(goal_local[0]))
    ccw = (th_g - th_p) % (2.0 * math.pi)
    sign = 1.0 if ccw <= 2.0 * math.pi - ccw else -1.0
    return sign * mag


def flow_force(p_local, p0, goal, pose: VehiclePose, params: PedParams) -> np.ndarray:
    """Circulating field steering the pedestrian around a slow vehicle."""
    x, y = float(p_local[0]), float(p_local[1])
    a_e, b_e = pose.half_length, pose.half_width
    wx, wy = -2.0 * y**3 / b_e, 2.0 * x**3 / a_e
    norm = math.hypot(wx, wy)
    if norm == 0.0:
        return np.zeros(2)
    center = np.array([pose.x, pose.y])
    k_f = flow_coefficient(p_local, np.asarray(p0, dtype=float) - center,
                           np.asarray(goal, dtype=float) - center)
    if k_f == 0.0:
        return np.zeros(2)
    amp, d0, sigma = params.flow
    mag = linear_decay(elliptical_distance(p_local, a_e, b_e), amp, d0, sigma)
    return np.array([k_f * mag * wx / norm, k_f * mag * wy / norm])


def speed_force(p_local, v_v: float, params: PedParams,
                half_length: float = 2.4) -> np.ndarray:
    """Lateral push out of the moving vehicle's forward corridor.

    Active only ahead of the front bumper plane of a moving vehicle: the
    longitudinal exponent is clamped to <= 0 behind the bumper, and the
    whole field is off for v_v <= 0.01 m/s. A pedestrian exactly on the
    centerline (y = 0) feels nothing.
    """
    if v_v <= 0.01:
        return np.zeros(2)
    x, y = float(p_local[0]), float(p_local[1])
    if y == 0.0:
        return np.zeros(2)
    amp, d_t, sigma_y = params.speed
    expo = min(0.0, -(x - half_length) / (v_v * d_t))
    fy = amp * math.copysign(1.0, y) * math.exp(expo) * math.exp(-y * y / (2.0 * sigma_y**2))
    return np.array([0.0, fy])


def speed_blend(v: float, params: PedParams) -> float:
    """Weight of the flow field vs the speed field; 1 for a stopped vehicle."""
    return 1.0 / (1.0 + params.k_v * v * v)


def vehicle_force(p_world, state: PedestrianState, pose: VehiclePose,
                  params: PedParams) -> np.ndarray:
    """Superposition of the three vehicle fields, evaluated in local frame.

    The reference path is straight along +x, so the local frame is a pure
    translation and forces map back to world unchanged.
    """
    p_local = np.asarray(p_world, dtype=float) - np.array([pose.x, pose.y])
    f_shape = shape_force(p_local, pose, params)
    f_flow = flow_force(p_local, state.p0, state.goal, pose, params)
    f_speed = speed_force(p_local, pose.v, params, pose.half_length)
    k = speed_blend(pose.v, params)
    return f_shape + k * f_flow + (1.0 - k) * f_speed


def crossing_sides(side: str) -> int:
    """Half-lane multiples the pedestrian must clear before the vehicle lane
    is safe again: 1 from the vehicle-lane side, 2 from the far side."""
    return 1 if side == NEAR_SIDE else 2


def pedestrian_step(state: PedestrianState, pose: VehiclePose,
                    params: PedParams, dt: float, *,
                    force_motivation: float | None = None,
                    vehicle_coupling: bool = True) -> PedestrianState:
    """Advance the pedestrian one step of length dt.

    Order: innovation -> motivation filter -> gated goal force -> vehicle
    fields -> clamped semi-implicit Euler. `force_motivation` pins the
    motivation (reckless/unaware behaviour variants); `vehicle_coupling=False`
    additionally removes every vehicle field.
    """
    if force_motivation is not None:
        m_next = force_motivation
    else:
        x_local = float(state.p[0]) - pose.x
        gap = x_local - pose.half_length
        t_adv = advantage_time(max(0.0, gap), pose.v, crossing_sides(state.side),
                               params.lane_width, params, vehicle_passed=gap < 0.0)
        m_hat = motivation_innovation(t_adv, pose.a, params)
        m_next = motivation_update(state.motivation, m_hat, params)

    gated = replace(state, motivation=m_next)
    f_total = navigational_force(gated, params)
    if vehicle_coupling:
        f_total = f_total + vehicle_force(state.p, state, pose, params)

    accel = f_total / params.mass
    a_norm = math.hypot(accel[0], accel[1])
    if a_norm > params.a_max:
        accel = accel * (params.a_max / a_norm)
    v_new = state.v + accel * dt
    v_norm = math.hypot(v_new[0], v_new[1])
    if v_norm > params.v_max:
        v_new = v_new * (params.v_max / v_norm)
    p_new = state.p + v_new * dt
    return PedestrianState(p_new, v_new, m_next, state.p0.copy(),
                           state.goal.copy(), state.side)
