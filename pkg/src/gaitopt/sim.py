"""Planar biped simulator: stepping core, episode driver, trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from ._dynamics import bias_forces, mass_matrix, potential_energy
from .robot import Fidelity, RobotModel, SimConfig, SimState, com_position, com_velocity

DECIMATION = 10           # trajectory storage rate = 1 kHz / 10 = 100 Hz
TOUCHDOWN_FORCE = 50.0    # N, normal force threshold for a step event
TOUCHDOWN_HOLD = 10       # consecutive dt samples the force must persist
FALL_HEIGHT_FRACTION = 0.5
FALL_PITCH = 1.0


class NumericalDivergenceError(RuntimeError):
    """Integration produced a non-finite state."""


@njit(cache=True)
def _foot_kinematics(q, dq, lt, ls):
    """Positions and velocities of both point feet; rows = (left, right)."""
    pos = np.empty((2, 2))
    vel = np.empty((2, 2))
    for i in range(2):
        h = q[3 + 2 * i]
        k = q[4 + 2 * i]
        dh = dq[3 + 2 * i]
        dk = dq[4 + 2 * i]
        pos[i, 0] = q[0] + lt * np.sin(h) + ls * np.sin(k)
        pos[i, 1] = q[1] - lt * np.cos(h) - ls * np.cos(k)
        vel[i, 0] = dq[0] + lt * np.cos(h) * dh + ls * np.cos(k) * dk
        vel[i, 1] = dq[1] + lt * np.sin(h) * dh + ls * np.sin(k) * dk
    return pos, vel


@njit(cache=True)
def _com_state(q, dq, p):
    """CoM position and velocity from the dynamics parameter vector."""
    m_t, c_t = p[0], p[1]
    m_th, c_th, l_th = p[3], p[4], p[5]
    m_sh, c_sh = p[7], p[8]
    total = m_t + 2.0 * (m_th + m_sh)
    cx = m_t * (q[0] - c_t * np.sin(q[2]))
    cz = m_t * (q[1] + c_t * np.cos(q[2]))
    cvx = m_t * (dq[0] - c_t * np.cos(q[2]) * dq[2])
    cvz = m_t * (dq[1] - c_t * np.sin(q[2]) * dq[2])
    for i in range(2):
        h = q[3 + 2 * i]
        k = q[4 + 2 * i]
        dh = dq[3 + 2 * i]
        dk = dq[4 + 2 * i]
        cx += m_th * (q[0] + c_th * np.sin(h))
        cz += m_th * (q[1] - c_th * np.cos(h))
        cvx += m_th * (dq[0] + c_th * np.cos(h) * dh)
        cvz += m_th * (dq[1] + c_th * np.sin(h) * dh)
        cx += m_sh * (q[0] + l_th * np.sin(h) + c_sh * np.sin(k))
        cz += m_sh * (q[1] - l_th * np.cos(h) - c_sh * np.cos(k))
        cvx += m_sh * (dq[0] + l_th * np.cos(h) * dh + c_sh * np.cos(k) * dk)
        cvz += m_sh * (dq[1] + l_th * np.sin(h) * dh + c_sh * np.sin(k) * dk)
    return cx / total, cz / total, cvx / total, cvz / total


@njit(cache=True)
def _step_core(s, tau_cmd, p, act, cfg):
    """Advance the packed state by one semi-implicit Euler step.

    Returns (new_state, applied_joint_torques, normal_forces, contact_flags,
    tangential_forces). cfg layout is SimConfig.vector(); act layout is
    RobotModel.actuator_params().
    """
    dt = cfg[0]
    kg, cg, mu = cfg[2], cfg[3], cfg[4]
    boom_frac, boom_drag = cfg[5], cfg[6]
    fidelity = int(cfg[7])
    hip_lim, knee_lim = act[0], act[1]
    gear, rotor_inertia, ks, bf = act[2], act[3], act[4], act[5]

    q = s[0:7].copy()
    dq = s[7:14].copy()
    rq = s[14:18].copy()
    rdq = s[18:22].copy()

    # relative joint coordinates [hipL, kneeL, hipR, kneeR]
    jq = np.empty(4)
    jdq = np.empty(4)
    jq[0] = q[3] - q[2]
    jq[1] = q[4] - q[3]
    jq[2] = q[5] - q[2]
    jq[3] = q[6] - q[5]
    jdq[0] = dq[3] - dq[2]
    jdq[1] = dq[4] - dq[3]
    jdq[2] = dq[5] - dq[2]
    jdq[3] = dq[6] - dq[5]

    tau = np.empty(4)
    limits = np.empty(4)
    limits[0] = hip_lim
    limits[1] = knee_lim
    limits[2] = hip_lim
    limits[3] = knee_lim
    if fidelity >= 1:
        # direct torque command (rotor torque x gear ratio approximation)
        for i in range(4):
            tau[i] = min(max(tau_cmd[i], -limits[i]), limits[i])
    else:
        # series-elastic actuator: geared rotor drives the joint through a
        # spring; gear friction acts on the relative velocity
        j_r = rotor_inertia * gear * gear
        for i in range(4):
            transmitted = ks * (rq[i] - jq[i]) + bf * (rdq[i] - jdq[i])
            tau[i] = min(max(transmitted, -limits[i]), limits[i])
            motor = min(max(tau_cmd[i], -limits[i]), limits[i])
            racc = (motor - transmitted) / j_r
            rdq[i] = rdq[i] + dt * racc
            rq[i] = rq[i] + dt * rdq[i]

    pos, vel = _foot_kinematics(q, dq, p[5], p[9])
    flags = np.zeros(2, np.uint8)
    fn = np.zeros(2)
    ft = np.zeros(2)
    for i in range(2):
        pen = -pos[i, 1]
        if pen >= 0.0:
            flags[i] = 1
        if pen > 0.0:
            f = kg * pen - cg * vel[i, 1]
            if f > 0.0:
                fn[i] = f
                cap = mu * f
                ft[i] = min(max(-cg * vel[i, 0], -cap), cap)

    Q = np.zeros(7)
    # actuator torques: tau_hip acts between torso and thigh, tau_knee
    # between thigh and shank (absolute-angle coordinates)
    Q[2] = -tau[0] - tau[2]
    Q[3] = tau[0] - tau[1]
    Q[4] = tau[1]
    Q[5] = tau[2] - tau[3]
    Q[6] = tau[3]
    lt, ls = p[5], p[9]
    for i in range(2):
        Q[0] += ft[i]
        Q[1] += fn[i]
        h = q[3 + 2 * i]
        k = q[4 + 2 * i]
        Q[3 + 2 * i] += ft[i] * lt * np.cos(h) + fn[i] * lt * np.sin(h)
        Q[4 + 2 * i] += ft[i] * ls * np.cos(k) + fn[i] * ls * np.sin(k)

    if fidelity <= 1:
        total_mass = p[0] + 2.0 * (p[3] + p[7])
        Q[1] += boom_frac * total_mass * p[11]
        Q[0] += -boom_drag * dq[0]

    M = mass_matrix(q, p)
    b = bias_forces(q, dq, p)
    qdd = np.linalg.solve(M, Q - b)

    out = np.empty(22)
    for i in range(7):
        out[7 + i] = dq[i] + dt * qdd[i]
    for i in range(7):
        out[i] = q[i] + dt * out[7 + i]
    out[14:18] = rq
    out[18:22] = rdq
    return out, tau, fn, flags, ft


@njit(cache=True)
def _is_fallen(q, dq, p, z_nominal):
    cx, cz, _, _ = _com_state(q, dq, p)
    return cz < FALL_HEIGHT_FRACTION * z_nominal or abs(q[2]) > FALL_PITCH


def step_dynamics(state: SimState, commanded_torques: np.ndarray,
                  model: RobotModel, config: SimConfig) -> SimState:
    """Advance one timestep; raises NumericalDivergenceError on blow-up."""
    tau_cmd = np.asarray(commanded_torques, float)
    if tau_cmd.shape != (4,):
        raise ValueError("commanded torque vector must have length 4")
    if not state.is_finite():
        raise ValueError("state must be finite")
    s, _, _, flags, _ = _step_core(state.pack(), tau_cmd,
                                   model.dynamics_params(),
                                   model.actuator_params(),
                                   config.vector(model))
    if not np.all(np.isfinite(s)):
        raise NumericalDivergenceError("non-finite state after integration")
    return SimState.unpack(s, flags, state.t + config.dt)


def actuator_torque(command: float, actuator_state, model: RobotModel,
                    fidelity: Fidelity, joint: str = "hip",
                    dt: float = 1.0e-3):
    """Torque delivered at one joint, plus the advanced actuator state.

    actuator_state is (rotor_angle, rotor_velocity, joint_angle,
    joint_velocity); only the rotor components advance, and only at L0.
    """
    limit = model.hip_torque_limit if joint == "hip" else model.knee_torque_limit
    rq, rdq, jq, jdq = actuator_state
    if fidelity is not Fidelity.L0_HARDWARE:
        return float(np.clip(command, -limit, limit)), (rq, rdq, jq, jdq)
    ks, bf = model.spring_stiffness, model.gear_friction
    j_r = model.rotor_inertia * model.gear_ratio ** 2
    transmitted = ks * (rq - jq) + bf * (rdq - jdq)
    tau = float(np.clip(transmitted, -limit, limit))
    motor = float(np.clip(command, -limit, limit))
    rdq = rdq + dt * (motor - transmitted) / j_r
    rq = rq + dt * rdq
    return tau, (rq, rdq, jq, jdq)


def boom_force(state: SimState, config: SimConfig,
               model: RobotModel) -> tuple[float, float]:
    """Planar boom substitute force on the torso: (horizontal, vertical)."""
    if config.fidelity is Fidelity.L2_NO_BOOM:
        return (0.0, 0.0)
    from .robot import GRAVITY
    fz = config.boom_support_fraction * model.total_mass * GRAVITY
    fx = -config.boom_drag * state.dq[0]
    return (fx, fz)


@dataclass
class StepEvent:
    """One detected step: a sustained touchdown of the swing foot."""

    t: float
    foot: int
    clearance: float
    mean_speed: float
    z_start: float
    z_end: float
    pitch_start: float
    pitch_end: float


@dataclass
class Trajectory:
    """Decimated rollout record plus full-rate step/contact telemetry."""

    times: np.ndarray
    states: np.ndarray          # (n, 14): q then dq
    torques: np.ndarray         # (n, 4) applied joint torques
    contact: np.ndarray         # (n, 2) uint8 penetration flags
    normal_forces: np.ndarray   # (n, 2)
    com: np.ndarray             # (n, 4): com x, z, vx, vz
    events: list
    termination: str            # 'completed' | 'fell'
    t_sim: float
    t_max: float
    x_fall: Optional[float]
    duty_factors: np.ndarray    # (2,) per-leg stance-time fraction
    torque_sq_integral: float
    force_flags: np.ndarray = field(default=None, repr=False)  # full rate

    @property
    def walked(self) -> bool:
        return self.termination == "completed"

    @property
    def com_x_end(self) -> float:
        return float(self.com[-1, 0])

    def __post_init__(self):
        if self.termination == "fell":
            if self.t_sim >= self.t_max:
                raise ValueError("fallen trajectory cannot reach the horizon")
            if self.x_fall is None:
                raise ValueError("x_fall required when termination is 'fell'")
        elif self.x_fall is not None:
            raise ValueError("x_fall only defined for fallen trajectories")


def default_initial_state(model: RobotModel) -> SimState:
    """Standing start: left leg under the hip, right leg mid-swing."""
    bend = 0.1
    hip_z = model.leg_length * np.cos(bend) - 0.005
    q = np.array([0.0, hip_z, 0.0, bend, -bend, 0.3, -0.5])
    dq = np.zeros(7)
    rotor_q = np.array([q[3] - q[2], q[4] - q[3], q[5] - q[2], q[6] - q[5]])
    return SimState(q=q, dq=dq, rotor_q=rotor_q, rotor_dq=np.zeros(4))


class _EventTracker:
    """Full-rate step-event and duty-factor bookkeeping for python rollouts."""

    def __init__(self, t0, com_x0, com_z0, pitch0, contact0):
        self.hold = np.zeros(2, int)
        self.in_stance = contact0.astype(bool).copy()
        self.apex = np.zeros(2)
        self.stance_time = np.zeros(2)
        self.prev_t = t0
        self.prev_com_x = com_x0
        self.prev_com_z = com_z0
        self.prev_pitch = pitch0
        self.events = []

    def update(self, t, dt, fn, flags, foot_z, com_x, com_z, pitch):
        for i in range(2):
            if flags[i]:
                self.stance_time[i] += dt
            self.apex[i] = max(self.apex[i], foot_z[i])
            if fn[i] > TOUCHDOWN_FORCE:
                self.hold[i] += 1
            else:
                self.hold[i] = 0
                if fn[i] == 0.0:
                    self.in_stance[i] = False
            if not self.in_stance[i] and self.hold[i] >= TOUCHDOWN_HOLD:
                self.in_stance[i] = True
                span = t - self.prev_t
                speed = (com_x - self.prev_com_x) / span if span > 0 else 0.0
                self.events.append(StepEvent(
                    t=t, foot=i, clearance=self.apex[i], mean_speed=speed,
                    z_start=self.prev_com_z, z_end=com_z,
                    pitch_start=self.prev_pitch, pitch_end=pitch))
                self.apex[i] = foot_z[i]
                self.prev_t = t
                self.prev_com_x = com_x
                self.prev_com_z = com_z
                self.prev_pitch = pitch


def run_episode(policy: Callable[[SimState], np.ndarray], model: RobotModel,
                config: SimConfig,
                initial_state: Optional[SimState] = None) -> Trajectory:
    """Roll out a closed-loop policy until the horizon or a fall.

    The policy maps SimState -> commanded joint torques (4,). A numerical
    divergence is treated as a fall at the last finite state.
    """
    p = model.dynamics_params()
    act = model.actuator_params()
    cfg = config.vector(model)
    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    delay = int(round(config.sensor_delay / dt))

    state = initial_state if initial_state is not None else default_initial_state(model)
    s = state.pack()
    t = state.t
    lt, ls = model.thigh_length, model.shank_length

    pos, _ = _foot_kinematics(s[0:7], s[7:14], lt, ls)
    flags = (pos[:, 1] <= 0.0).astype(np.uint8)
    cx, cz, _, _ = _com_state(s[0:7], s[7:14], p)
    tracker = _EventTracker(t, cx, cz, s[2], flags)

    n_dec = n_steps // DECIMATION + 1
    times = np.empty(n_dec)
    states = np.empty((n_dec, 14))
    torques = np.zeros((n_dec, 4))
    contact = np.zeros((n_dec, 2), np.uint8)
    normal = np.zeros((n_dec, 2))
    com = np.empty((n_dec, 4))
    force_flags = np.zeros((n_steps, 2), np.uint8)

    def snapshot(k, tau, fn, fl):
        times[k] = t
        states[k, 0:7] = s[0:7]
        states[k, 7:14] = s[7:14]
        torques[k] = tau
        contact[k] = fl
        normal[k] = fn
        com[k] = _com_state(s[0:7], s[7:14], p)

    snapshot(0, np.zeros(4), np.zeros(2), flags)
    n_rec = 1
    delay_buf = [(SimState.unpack(s, flags, t))] * (delay + 1)

    tau_sq = 0.0
    termination = "completed"
    t_sim = config.t_max
    x_fall = None

    for i in range(n_steps):
        obs = delay_buf[0]
        tau_cmd = np.asarray(policy(obs), float)
        s_new, tau, fn, flags, _ = _step_core(s, tau_cmd, p, act, cfg)
        t = t + dt
        if not np.all(np.isfinite(s_new)):
            termination = "fell"
            t_sim = t - dt
            cx, _, _, _ = _com_state(s[0:7], s[7:14], p)
            x_fall = float(cx)
            break
        s = s_new
        tau_sq += float(np.dot(tau, tau)) * dt
        pos, _ = _foot_kinematics(s[0:7], s[7:14], lt, ls)
        cx, cz, _, _ = _com_state(s[0:7], s[7:14], p)
        tracker.update(t, dt, fn, flags, pos[:, 1], cx, cz, s[2])
        force_flags[i] = fn > TOUCHDOWN_FORCE
        if (i + 1) % DECIMATION == 0:
            snapshot(n_rec, tau, fn, flags)
            n_rec += 1
        if delay:
            delay_buf.pop(0)
            delay_buf.append(SimState.unpack(s, flags, t))
        else:
            delay_buf[0] = SimState.unpack(s, flags, t)
        if _is_fallen(s[0:7], s[7:14], p, model.z_nominal):
            termination = "fell"
            t_sim = t
            x_fall = float(cx)
            break

    walked_span = t_sim if t_sim > 0 else dt
    duty = tracker.stance_time / walked_span
    return Trajectory(
        times=times[:n_rec], states=states[:n_rec], torques=torques[:n_rec],
        contact=contact[:n_rec], normal_forces=normal[:n_rec],
        com=com[:n_rec], events=tracker.events, termination=termination,
        t_sim=float(t_sim), t_max=config.t_max, x_fall=x_fall,
        duty_factors=np.minimum(duty, 1.0), torque_sq_integral=tau_sq,
        force_flags=force_flags[:int(round(t_sim / dt))])


def total_energy(state: SimState, model: RobotModel) -> float:
    """Kinetic + gravitational potential energy of the linkage."""
    p = model.dynamics_params()
    M = mass_matrix(state.q, p)
    return float(0.5 * state.dq @ M @ state.dq + potential_energy(state.q, p))


def save_trajectory(traj: Trajectory, path) -> None:
    """Line-delimited text: one JSON header record, then CSV samples."""
    header = {
        "termination": traj.termination,
        "t_sim": traj.t_sim,
        "t_max": traj.t_max,
        "x_fall": traj.x_fall,
        "duty_factors": list(traj.duty_factors),
        "torque_sq_integral": traj.torque_sq_integral,
        "events": [vars(e) for e in traj.events],
        "columns": ["t"] + [f"q{i}" for i in range(7)]
        + [f"dq{i}" for i in range(7)] + [f"tau{i}" for i in range(4)]
        + ["c0", "c1", "fn0", "fn1", "comx", "comz", "comvx", "comvz"],
    }
    with open(path, "w") as f:
        f.write("#" + json.dumps(header) + "\n")
        for k in range(len(traj.times)):
            row = np.concatenate([
                [traj.times[k]], traj.states[k], traj.torques[k],
                traj.contact[k].astype(float), traj.normal_forces[k],
                traj.com[k]])
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_trajectory(path) -> Trajectory:
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing trajectory header record")
        header = json.loads(first[1:])
        rows = np.array([[float(v) for v in line.split(",")]
                         for line in f if line.strip()])
    events = [StepEvent(**e) for e in header["events"]]
    return Trajectory(
        times=rows[:, 0], states=rows[:, 1:15], torques=rows[:, 15:19],
        contact=rows[:, 19:21].astype(np.uint8), normal_forces=rows[:, 21:23],
        com=rows[:, 23:27], events=events, termination=header["termination"],
        t_sim=header["t_sim"], t_max=header["t_max"], x_fall=header["x_fall"],
        duty_factors=np.array(header["duty_factors"]),
        torque_sq_integral=header["torque_sq_integral"])
