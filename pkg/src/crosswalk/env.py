"""Single-lane crossing MDP: one controlled vehicle, one pedestrian.

The vehicle drives a straight lane under longitudinal acceleration commands;
the pedestrian follows the motivation-gated social-force model. Rewards are
split into an ego term and a pedestrian term blended by the controller's
social-value angle.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .pedestrian import (
    FAR_SIDE,
    NEAR_SIDE,
    PedParams,
    PedestrianState,
    VehiclePose,
    pedestrian_step,
)

RUNNING = "running"
COLLISION = "collision"
GOAL = "goal"
TIMEOUT = "timeout"


class PedVariant(enum.Enum):
    AWARE = "aware"        # full motivation + force model
    RECKLESS = "reckless"  # always intends to cross, still avoids contact
    UNAWARE = "unaware"    # crosses blindly, ignores the vehicle entirely


@dataclass(frozen=True)
class ScenarioConfig:
    road_length: float = 60.0
    road_width: float = 6.0
    lane_width: float = 3.0
    lane_center_y: float = -1.5     # vehicle lane (bottom)
    pavement_offset: float = 3.5    # |y| of both pavements
    v0_min: float = 0.0
    v0_max: float = 15.0
    goal_spread: float = 2.0        # std of the goal x sampler, m
    dt: float = 0.1
    max_steps: int = 500
    g_accel: float = 9.81
    max_action_g: float = 0.3       # |a_cmd| <= max_action_g * g_accel
    v_ceiling: float = 20.0         # hard longitudinal speed cap
    vehicle_half_length: float = 2.4
    vehicle_half_width: float = 0.9
    collision_margin: float = 0.3   # rectangle inflation for detection, m

    def __post_init__(self):
        if self.road_length <= 0 or self.dt <= 0 or self.max_steps <= 0:
            raise ValueError("road_length, dt and max_steps must be positive")
        if self.v0_min < 0 or self.v0_max <= self.v0_min:
            raise ValueError("need 0 <= v0_min < v0_max")


# fixed normalisation ranges for the 5 observation components
OBS_SCALES = np.array([20.0, 60.0, 6.0, 4.0, 4.0])


@dataclass
class Observation:
    v_ego: float
    p_rel: np.ndarray   # pedestrian position in ego frame, x forward
    v_ped: np.ndarray   # pedestrian ground velocity, ego-frame axes

    def vector(self) -> np.ndarray:
        """Normalised 5-vector fed to the policy network."""
        raw = np.array([self.v_ego, self.p_rel[0], self.p_rel[1],
                        self.v_ped[0], self.v_ped[1]])
        return raw / OBS_SCALES


@dataclass
class RewardBreakdown:
    r_car: float
    r_p: float
    r_total: float
    collision: bool
    goal: bool


# ego reward constants; the time penalty is a rate per SECOND of driving,
# integrated per step (a per-step constant would make ending the episode by
# collision cheaper than braking, inverting the design intent)
R_COLLISION = -100.0
R_GOAL = 40.0
R_TIME_RATE = -4.0
# pedestrian reward shaping: gain, proximity-sigmoid midpoint/scale (m)
K_P = 2.0
PROXIMITY_MID = 4.0
PROXIMITY_SCALE = 1.0


def sample_scenario(rng, scenario: ScenarioConfig, ped_params: PedParams,
                    side: str | None = None) -> tuple[VehiclePose, PedestrianState]:
    """Draw an initial vehicle pose and pedestrian state.

    `rng` is an integer seed or a numpy Generator. The draw order is fixed
    (speed, x, side, goal offset) so forcing `side` keeps everything else
    identical — suites rely on this for paired comparisons.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    v0 = float(rng.uniform(scenario.v0_min, scenario.v0_max))
    x_ped = float(rng.uniform(0.0, scenario.road_length))
    drawn_side = "top" if rng.integers(0, 2) else "bottom"
    goal_dx = float(rng.normal(0.0, scenario.goal_spread))
    if side is not None:
        drawn_side = side

    y_ped = scenario.pavement_offset if drawn_side == "top" else -scenario.pavement_offset
    goal = np.array([
        min(max(x_ped + goal_dx, 0.0), scenario.road_length),
        -y_ped,  # always the opposite pavement
    ])
    # the vehicle lane is the bottom half of the road
    near = (y_ped < 0) == (scenario.lane_center_y < 0)
    ped = PedestrianState(
        p=np.array([x_ped, y_ped]), v=np.zeros(2), motivation=0.0,
        p0=np.array([x_ped, y_ped]), goal=goal,
        side=NEAR_SIDE if near else FAR_SIDE)
    pose = VehiclePose(x=0.0, y=scenario.lane_center_y, v=v0, a=0.0,
                       half_length=scenario.vehicle_half_length,
                       half_width=scenario.vehicle_half_width)
    return pose, ped


def scale_action(u: float, scenario: ScenarioConfig) -> float:
    """Map a normalised command in [-1, 1] to an acceleration in m/s^2."""
    u = min(max(float(u), -1.0), 1.0)
    return u * scenario.max_action_g * scenario.g_accel


def step_vehicle(pose: VehiclePose, a_cmd: float, dt: float,
                 v_ceiling: float = 20.0) -> VehiclePose:
    """Semi-implicit longitudinal update; no reverse, capped forward speed."""
    v_new = min(max(pose.v + a_cmd * dt, 0.0), v_ceiling)
    return VehiclePose(x=pose.x + v_new * dt, y=pose.y, v=v_new, a=a_cmd,
                       half_length=pose.half_length, half_width=pose.half_width)


def observe(pose: VehiclePose, ped: PedestrianState) -> Observation:
    p_rel = np.array([ped.p[0] - pose.x, ped.p[1] - pose.y])
    return Observation(v_ego=pose.v, p_rel=p_rel, v_ped=ped.v.copy())


def front_gap(pose: VehiclePose, ped: PedestrianState) -> float:
    """Longitudinal distance from the front bumper plane to the pedestrian."""
    return max(0.0, float(ped.p[0]) - pose.x - pose.half_length)


def proximity_weight(d_gap: float) -> float:
    """Sigmoid discounting pedestrian reward earned right in front of the car."""
    return 1.0 / (1.0 + math.exp(-(d_gap - PROXIMITY_MID) / PROXIMITY_SCALE))


def pedestrian_progress_reward(pose: VehiclePose, ped: PedestrianState,
                               theta_f: float) -> float:
    """Crossing-speed reward, paid only while the pedestrian both wants to
    cross and is ahead of the front bumper plane."""
    ahead = float(ped.p[0]) - pose.x - pose.half_length > 0.0
    if ped.motivation <= theta_f or not ahead:
        return 0.0
    to_goal = ped.goal - ped.p
    norm = math.hypot(to_goal[0], to_goal[1])
    if norm < 1e-9:
        return 0.0
    speed_to_goal = float(ped.v @ to_goal) / norm
    return K_P * proximity_weight(front_gap(pose, ped)) * speed_to_goal


def compute_reward(pose: VehiclePose, ped: PedestrianState, phi_rad: float,
                   outcome: str, theta_f: float, dt: float) -> RewardBreakdown:
    collided = outcome == COLLISION
    goal = outcome == GOAL
    r_car = R_TIME_RATE * dt + (R_COLLISION if collided else 0.0) \
        + (R_GOAL if goal else 0.0)
    r_p = pedestrian_progress_reward(pose, ped, theta_f)
    r_total = math.cos(phi_rad) * r_car + math.sin(phi_rad) * r_p
    return RewardBreakdown(r_car=r_car, r_p=r_p, r_total=r_total,
                           collision=collided, goal=goal)


def is_terminal(pose: VehiclePose, ped: PedestrianState, step: int,
                scenario: ScenarioConfig) -> str:
    """Episode outcome, checked in safety order: collision, goal, timeout."""
    m = scenario.collision_margin
    if (abs(ped.p[0] - pose.x) <= pose.half_length + m
            and abs(ped.p[1] - pose.y) <= pose.half_width + m):
        return COLLISION
    if pose.x >= scenario.road_length:
        return GOAL
    if step >= scenario.max_steps:
        return TIMEOUT
    return RUNNING


class EpisodeFinished(RuntimeError):
    """Raised when step() is called after the episode has ended."""


class CrossingEnv:
    """Episodic environment; owns its RNG, deterministic under a seed."""

    def __init__(self, scenario: ScenarioConfig | None = None,
                 ped_params: PedParams | None = None, phi_deg: float = 0.0,
                 variant: PedVariant = PedVariant.AWARE, seed: int = 0):
        self.scenario = scenario or ScenarioConfig()
        self.ped_params = ped_params or PedParams()
        self.phi_rad = math.radians(phi_deg)
        self.phi_deg = phi_deg
        self.variant = variant
        self._rng = np.random.default_rng(seed)
        self._pose: VehiclePose | None = None
        self._ped: PedestrianState | None = None
        self._step = 0
        self._done = True

    def reset(self, seed: int | None = None, side: str | None = None) -> np.ndarray:
        """Sample a fresh scenario; explicit `seed` pins it for paired runs."""
        rng = np.random.default_rng(seed) if seed is not None else self._rng
        self._pose, self._ped = sample_scenario(rng, self.scenario,
                                                self.ped_params, side=side)
        self._step = 0
        self._done = False
        return observe(self._pose, self._ped).vector()

    def reset_from(self, pose: VehiclePose, ped: PedestrianState) -> np.ndarray:
        """Start an episode from an explicit state (crafted scenarios)."""
        self._pose = VehiclePose(pose.x, pose.y, pose.v, pose.a,
                                 pose.half_length, pose.half_width)
        self._ped = ped.copy()
        self._step = 0
        self._done = False
        return observe(self._pose, self._ped).vector()

    @property
    def pose(self) -> VehiclePose:
        return self._pose

    @property
    def ped(self) -> PedestrianState:
        return self._ped

    def _step_pedestrian(self, pose: VehiclePose) -> PedestrianState:
        if self.variant is PedVariant.AWARE:
            return pedestrian_step(self._ped, pose, self.ped_params, self.scenario.dt)
        if self.variant is PedVariant.RECKLESS:
            return pedestrian_step(self._ped, pose, self.ped_params,
                                   self.scenario.dt, force_motivation=1.0)
        return pedestrian_step(self._ped, pose, self.ped_params, self.scenario.dt,
                               force_motivation=1.0, vehicle_coupling=False)

    def step(self, u: float):
        """Apply one normalised acceleration command.

        Returns (obs_vector, RewardBreakdown, done, info). Stepping a
        finished episode is a contract violation.
        """
        if self._done:
            raise EpisodeFinished("episode already ended; call reset() first")
        a_cmd = scale_action(u, self.scenario)
        self._pose = step_vehicle(self._pose, a_cmd, self.scenario.dt,
                                  self.scenario.v_ceiling)
        self._ped = self._step_pedestrian(self._pose)
        self._step += 1
        outcome = is_terminal(self._pose, self._ped, self._step, self.scenario)
        breakdown = compute_reward(self._pose, self._ped, self.phi_rad, outcome,
                                   self.ped_params.theta_f, self.scenario.dt)
        self._done = outcome != RUNNING
        info = {
            "step": self._step,
            "event": outcome,
            "a_cmd": a_cmd,
            "d_gap": front_gap(self._pose, self._ped),
            "motivation": self._ped.motivation,
            "x_v": self._pose.x,
            "v_v": self._pose.v,
            "x_p": float(self._ped.p[0]),
            "y_p": float(self._ped.p[1]),
            "vx_p": float(self._ped.v[0]),
            "vy_p": float(self._ped.v[1]),
            "r_car": breakdown.r_car,
            "r_p": breakdown.r_p,
            "r_total": breakdown.r_total,
        }
        return observe(self._pose, self._ped).vector(), breakdown, self._done, info


# ------------------------------------------------------------------ traces

TRACE_STEP_FIELDS = ("t", "x_v", "v_v", "a_cmd", "x_p", "y_p", "vx_p", "vy_p",
                     "M", "r_car", "r_p", "r_total", "event")


def trace_header(seed, config_hash: str, phi_deg: float, variant: str,
                 toolkit_version: str) -> dict:
    return {"type": "header", "version": toolkit_version,
            "config_hash": config_hash, "seed": seed, "phi_deg": phi_deg,
            "variant": variant}


def trace_step_record(info: dict) -> dict:
    rec = {"type": "step", "t": info["step"]}
    for key in TRACE_STEP_FIELDS[1:-1]:
        rec[key] = info[key if key != "M" else "motivation"]
    rec["event"] = info["event"]
    return rec


def format_record(record: dict) -> str:
    """Canonical one-line JSON; shortest-round-trip floats, fixed key order."""
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def write_trace(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")
