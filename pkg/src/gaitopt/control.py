"""Reactive stepping controller, parameter space and trajectory costs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .robot import GRAVITY, RobotModel, SimConfig, SimState
from .sim import (DECIMATION, TOUCHDOWN_FORCE, TOUCHDOWN_HOLD, Trajectory,
                  StepEvent, _com_state, _foot_kinematics, _is_fallen,
                  _step_core, default_initial_state)

# fixed (not optimized) swing-leg constants
SWING_KP = 250.0
SWING_KD = 12.0
SWING_CLEARANCE = 0.06
MIN_SWITCH_PHASE = 0.25


@dataclass(frozen=True)
class ReactiveParams:
    """Gains of the reactive stepping policy.

    The 9D space optimizes every field; the 5D space fixes theta_des, K_pz,
    K_dz and z_des at the defaults below and optimizes the rest.

    The defaults are the canonical smoke-test gait, found by random search
    over 1000+ low-discrepancy points and lightly rounded: it walks the full
    horizon at every fidelity level under both bundled speed profiles.
    """

    K_pt: float = 500.0
    K_dt: float = 38.0
    theta_des: float = 0.13
    K_pz: float = 3320.0
    K_dz: float = 370.0
    z_des: float = 0.85
    k: float = 0.055
    C: float = 0.24
    T: float = 0.42
    dims: int = 9

    def vector(self) -> np.ndarray:
        return np.array([
            self.K_pt, self.K_dt, self.theta_des, self.K_pz, self.K_dz,
            self.z_des, self.k, self.C, self.T,
            SWING_KP, SWING_KD, SWING_CLEARANCE, MIN_SWITCH_PHASE,
        ])


_FIXED_5D = {"theta_des": 0.13, "K_pz": 3320.0, "K_dz": 370.0, "z_des": 0.85}

_BOUNDS_9 = [
    ("K_pt", 10.0, 500.0),
    ("K_dt", 1.0, 50.0),
    ("theta_des", -0.2, 0.2),
    ("K_pz", 100.0, 5000.0),
    ("K_dz", 10.0, 500.0),
    ("z_des", 0.765, 0.9),
    ("k", 0.05, 0.5),
    ("C", 0.0, 1.0),
    ("T", 0.2, 0.6),
]
_NAMES_5 = ["K_pt", "K_dt", "k", "C", "T"]


class ParamSpace:
    """Affine map between the unit cube and physical controller gains.

    Supports the 5D and 9D parameterizations plus optional padding with
    inactive dimensions (a dimensionality stress knob).
    """

    def __init__(self, dims: int = 9, padding: int = 0):
        if dims == 9:
            self.bounds = list(_BOUNDS_9)
        elif dims == 5:
            by_name = {n: (n, lo, hi) for n, lo, hi in _BOUNDS_9}
            self.bounds = [by_name[n] for n in _NAMES_5]
        else:
            raise ValueError("controller dimensionality must be 5 or 9")
        self.dims = dims
        self.padding = padding
        self.lo = np.array([b[1] for b in self.bounds])
        self.hi = np.array([b[2] for b in self.bounds])

    @property
    def d(self) -> int:
        return len(self.bounds) + self.padding

    def to_params(self, u: np.ndarray) -> ReactiveParams:
        u = np.asarray(u, float)
        if u.shape != (self.d,):
            raise ValueError(f"expected {self.d} unit-cube coordinates")
        if np.any(u < -1e-12) or np.any(u > 1 + 1e-12):
            raise ValueError("unit-cube coordinates out of [0, 1]")
        phys = self.lo + u[:len(self.bounds)] * (self.hi - self.lo)
        kw = dict(_FIXED_5D) if self.dims == 5 else {}
        kw.update({b[0]: v for b, v in zip(self.bounds, phys)})
        return ReactiveParams(dims=self.dims, **kw)

    def to_unit(self, params: ReactiveParams) -> np.ndarray:
        phys = np.array([getattr(params, b[0]) for b in self.bounds])
        u = (phys - self.lo) / (self.hi - self.lo)
        return np.concatenate([u, np.zeros(self.padding)])

    def describe(self) -> dict:
        return {"dims": self.dims, "padding": self.padding,
                "bounds": [[n, lo, hi] for n, lo, hi in self.bounds]}


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-constant target speed, indexed by step count."""

    segments: Sequence[tuple]  # (step count, target speed m/s)

    def __post_init__(self):
        for n, v in self.segments:
            if n <= 0:
                raise ValueError("segment step counts must be positive")
            if v < 0:
                raise ValueError("target speeds must be non-negative")

    def arrays(self):
        steps = np.array([int(n) for n, _ in self.segments], np.int64)
        speeds = np.array([float(v) for _, v in self.segments])
        return steps, speeds

    def target_for_step(self, step_index: int) -> float:
        acc = 0
        for n, v in self.segments:
            acc += n
            if step_index < acc:
                return float(v)
        return float(self.segments[-1][1])


PROFILES = {
    # the variable-speed hardware profile from the experiments
    "variable": SpeedProfile(((15, 0.4), (15, 1.0), (15, 0.2), (5, 0.0))),
    "steady": SpeedProfile(((30, 0.4),)),
    # early speed-up: the transition falls inside short collection episodes,
    # so learned trajectory features capture transition robustness
    "ramp": SpeedProfile(((8, 0.4), (22, 0.8))),
}


def grf_targets(theta, dtheta, z, dz, params: ReactiveParams):
    """Desired ground reaction force (F_x, F_z) during stance."""
    fx = params.K_pt * (params.theta_des - theta) - params.K_dt * dtheta
    fz = params.K_pz * (params.z_des - z) - params.K_dz * dz
    return fx, fz

def foot_placement(v, v_tgt, d, params: ReactiveParams) -> float:
    """Desired landing offset of the swing foot, ahead of the CoM."""
    return params.k * (v - v_tgt) + params.C * d + 0.5 * v * params.T


def swing_reference(liftoff_pose, x_p, T, clearance, phase):
    """Swing-foot reference: cubic blend in x, sine arch in z."""
    if not 0.0 <= phase <= 1.0:
        raise ValueError("phase must lie in [0, 1]")
    lx, lz = liftoff_pose
    blend = phase * phase * (3.0 - 2.0 * phase)
    x = lx + (x_p - lx) * blend
    z = clearance * np.sin(np.pi * phase) + lz * (1.0 - phase) * (1.0 - 2.0 * phase)
    return x, z


@njit(cache=True)
def _swing_ik(tx, tz, lt, ls):
    """Absolute thigh/shank angles placing the foot at (tx, tz) rel. hip.

    Targets beyond the leg length are clamped to the reachable sphere;
    knee-forward configuration.
    """
    r = np.sqrt(tx * tx + tz * tz)
    r_max = lt + ls - 1.0e-6
    r_min = abs(lt - ls) + 1.0e-6
    if r > r_max:
        tx *= r_max / r
        tz *= r_max / r
        r = r_max
    elif r < r_min:
        if r < 1.0e-12:
            tx, tz, r = 0.0, -r_min, r_min
        else:
            tx *= r_min / r
            tz *= r_min / r
            r = r_min
    gamma = np.arctan2(tx, -tz)
    ca = (lt * lt + r * r - ls * ls) / (2.0 * lt * r)
    ca = min(max(ca, -1.0), 1.0)
    h = gamma + np.arccos(ca)
    kx = tx - lt * np.sin(h)
    kz = tz + lt * np.cos(h)
    k = np.arctan2(kx, -kz)
    return h, k


@njit(cache=True)
def _profile_target(step_idx, prof_steps, prof_speeds):
    acc = 0
    for i in range(prof_steps.shape[0]):
        acc += prof_steps[i]
        if step_idx < acc:
            return prof_speeds[i]
    return prof_speeds[prof_speeds.shape[0] - 1]


@njit(cache=True)
def _reactive_core(t, s, flags, ctrl, prof_steps, prof_speeds, mem, p, lt, ls):
    """One control step; mutates mem = [stance, step_idx, liftoff_t, lx, lz]."""
    q = s[0:7]
    dq = s[7:14]
    k_pt, k_dt, th_des = ctrl[0], ctrl[1], ctrl[2]
    k_pz, k_dz, z_des = ctrl[3], ctrl[4], ctrl[5]
    k_fp, c_fp, t_sw = ctrl[6], ctrl[7], ctrl[8]
    kp_sw, kd_sw, clearance, min_phase = ctrl[9], ctrl[10], ctrl[11], ctrl[12]

    cx, cz, cvx, cvz = _com_state(q, dq, p)
    pos, _ = _foot_kinematics(q, dq, lt, ls)

    stance = int(mem[0])
    swing = 1 - stance
    phase = (t - mem[2]) / t_sw
    if phase > 1.0:
        phase = 1.0
    if flags[swing] == 1 and phase >= min_phase:
        # touchdown: roles swap, old stance foot lifts off
        mem[0] = float(swing)
        mem[1] += 1.0
        mem[2] = t
        mem[3] = pos[stance, 0]
        mem[4] = pos[stance, 1]
        stance, swing = swing, stance
        phase = 0.0

    v_tgt = _profile_target(int(mem[1]), prof_steps, prof_speeds)

    # stance: GRF targets through the stance-leg Jacobian transpose; the
    # torque mapping adds body-weight support (the inverse-dynamics layer
    # it replaces would supply gravity compensation)
    fx = k_pt * (th_des - q[2]) - k_dt * dq[2]
    total_mass = p[0] + 2.0 * (p[3] + p[7])
    fz = k_pz * (z_des - cz) - k_dz * cvz + total_mass * p[11]
    h_st = q[3 + 2 * stance]
    k_st = q[4 + 2 * stance]
    g_h = -(fx * lt * np.cos(h_st) + fz * lt * np.sin(h_st))
    g_k = -(fx * ls * np.cos(k_st) + fz * ls * np.sin(k_st))
    tau_hip_st = g_h + g_k
    tau_knee_st = g_k

    # swing: track the landing reference with joint PD
    d = cx - pos[stance, 0]
    x_p = k_fp * (cvx - v_tgt) + c_fp * d + 0.5 * cvx * t_sw
    target_x = cx + x_p
    lx, lz = mem[3], mem[4]
    blend = phase * phase * (3.0 - 2.0 * phase)
    x_ref = lx + (target_x - lx) * blend
    z_ref = clearance * np.sin(np.pi * phase) \
        + lz * (1.0 - phase) * (1.0 - 2.0 * phase)
    h_ref, k_ref = _swing_ik(x_ref - q[0], z_ref - q[1], lt, ls)
    g_h = kp_sw * (h_ref - q[3 + 2 * swing]) - kd_sw * dq[3 + 2 * swing]
    g_k = kp_sw * (k_ref - q[4 + 2 * swing]) - kd_sw * dq[4 + 2 * swing]
    tau_hip_sw = g_h + g_k
    tau_knee_sw = g_k

    tau = np.empty(4)
    tau[2 * stance] = tau_hip_st
    tau[2 * stance + 1] = tau_knee_st
    tau[2 * swing] = tau_hip_sw
    tau[2 * swing + 1] = tau_knee_sw
    return tau


def make_memory(state: SimState, model: RobotModel) -> np.ndarray:
    """Controller memory: left leg stance, right foot mid-swing."""
    from .robot import foot_positions
    feet = foot_positions(state.q, model)
    return np.array([0.0, 0.0, state.t, feet[1, 0], max(feet[1, 1], 0.0)])


def policy_step(state: SimState, params: ReactiveParams, profile: SpeedProfile,
                memory: np.ndarray, model: RobotModel) -> np.ndarray:
    """Joint torque command [hipL, kneeL, hipR, kneeR]; mutates memory."""
    if not state.is_finite():
        raise ValueError("state must be finite")
    steps, speeds = profile.arrays()
    return _reactive_core(state.t, state.pack(),
                          state.contact.astype(np.uint8), params.vector(),
                          steps, speeds, memory, model.dynamics_params(),
                          model.thigh_length, model.shank_length)


def make_policy(params: ReactiveParams, profile: SpeedProfile,
                model: RobotModel, initial_state: Optional[SimState] = None):
    """Closure suitable for sim.run_episode, with its own memory."""
    state0 = initial_state if initial_state is not None else default_initial_state(model)
    memory = make_memory(state0, model)

    def policy(state: SimState) -> np.ndarray:
        return policy_step(state, params, profile, memory, model)

    return policy


@njit(cache=True)
def _rollout_core(s0, mem, ctrl, prof_steps, prof_speeds, p, act, cfg, delay):
    """Full jitted episode of the reactive controller.

    Mirrors sim.run_episode exactly (same stepping core, same event logic)
    but keeps the control loop compiled.
    """
    dt = cfg[0]
    t_max = cfg[1]
    z_nominal = cfg[8]
    lt, ls = p[5], p[9]
    n_steps = int(round(t_max / dt))
    n_dec = n_steps // DECIMATION + 1

    times = np.empty(n_dec)
    states = np.empty((n_dec, 14))
    torques = np.zeros((n_dec, 4))
    contact = np.zeros((n_dec, 2), np.uint8)
    normal = np.zeros((n_dec, 2))
    com = np.empty((n_dec, 4))
    force_flags = np.zeros((n_steps, 2), np.uint8)
    ev_cap = n_steps // TOUCHDOWN_HOLD + 1
    ev = np.zeros((ev_cap, 8))
    n_ev = 0

    s = s0.copy()
    t = 0.0
    pos, _ = _foot_kinematics(s[0:7], s[7:14], lt, ls)
    flags = np.zeros(2, np.uint8)
    for i in range(2):
        if pos[i, 1] <= 0.0:
            flags[i] = 1
    cx, cz, cvx, cvz = _com_state(s[0:7], s[7:14], p)

    # event tracker state
    hold = np.zeros(2, np.int64)
    in_stance = np.zeros(2, np.uint8)
    in_stance[:] = flags
    apex = np.zeros(2)
    stance_time = np.zeros(2)
    prev_t = t
    prev_cx = cx
    prev_cz = cz
    prev_pitch = s[2]

    times[0] = t
    states[0, 0:7] = s[0:7]
    states[0, 7:14] = s[7:14]
    contact[0] = flags
    com[0, 0], com[0, 1] = cx, cz
    com[0, 2], com[0, 3] = cvx, cvz
    n_rec = 1

    buf_s = np.empty((delay + 1, 22))
    buf_f = np.empty((delay + 1, 2), np.uint8)
    buf_t = np.empty(delay + 1)
    for i in range(delay + 1):
        buf_s[i] = s
        buf_f[i] = flags
        buf_t[i] = t

    tau_sq = 0.0
    term = 0
    t_sim = t_max
    x_fall = np.nan

    for i in range(n_steps):
        tau_cmd = _reactive_core(buf_t[0], buf_s[0], buf_f[0], ctrl,
                                 prof_steps, prof_speeds, mem, p, lt, ls)
        s_new, tau, fn, flags, _ = _step_core(s, tau_cmd, p, act, cfg)
        t = t + dt
        finite = True
        for j in range(22):
            if not np.isfinite(s_new[j]):
                finite = False
                break
        if not finite:
            term = 1
            t_sim = t - dt
            cx, cz, _, _ = _com_state(s[0:7], s[7:14], p)
            x_fall = cx
            break
        s = s_new
        tau_sq += (tau[0] ** 2 + tau[1] ** 2 + tau[2] ** 2 + tau[3] ** 2) * dt
        pos, _ = _foot_kinematics(s[0:7], s[7:14], lt, ls)
        cx, cz, cvx, cvz = _com_state(s[0:7], s[7:14], p)

        for j in range(2):
            if flags[j] == 1:
                stance_time[j] += dt
            if pos[j, 1] > apex[j]:
                apex[j] = pos[j, 1]
            if fn[j] > TOUCHDOWN_FORCE:
                hold[j] += 1
            else:
                hold[j] = 0
                if fn[j] == 0.0:
                    in_stance[j] = 0
            if in_stance[j] == 0 and hold[j] >= TOUCHDOWN_HOLD:
                in_stance[j] = 1
                span = t - prev_t
                speed = (cx - prev_cx) / span if span > 0 else 0.0
                if n_ev < ev_cap:
                    ev[n_ev, 0] = t
                    ev[n_ev, 1] = float(j)
                    ev[n_ev, 2] = apex[j]
                    ev[n_ev, 3] = speed
                    ev[n_ev, 4] = prev_cz
                    ev[n_ev, 5] = cz
                    ev[n_ev, 6] = prev_pitch
                    ev[n_ev, 7] = s[2]
                    n_ev += 1
                apex[j] = pos[j, 1]
                prev_t = t
                prev_cx = cx
                prev_cz = cz
                prev_pitch = s[2]
        force_flags[i, 0] = 1 if fn[0] > TOUCHDOWN_FORCE else 0
        force_flags[i, 1] = 1 if fn[1] > TOUCHDOWN_FORCE else 0

        if (i + 1) % DECIMATION == 0:
            times[n_rec] = t
            states[n_rec, 0:7] = s[0:7]
            states[n_rec, 7:14] = s[7:14]
            torques[n_rec] = tau
            contact[n_rec] = flags
            normal[n_rec] = fn
            com[n_rec, 0] = cx
            com[n_rec, 1] = cz
            com[n_rec, 2] = cvx
            com[n_rec, 3] = cvz
            n_rec += 1

        if delay > 0:
            for j in range(delay):
                buf_s[j] = buf_s[j + 1]
                buf_f[j] = buf_f[j + 1]
                buf_t[j] = buf_t[j + 1]
        buf_s[delay] = s
        buf_f[delay] = flags
        buf_t[delay] = t

        if _is_fallen(s[0:7], s[7:14], p, z_nominal):
            term = 1
            t_sim = t
            x_fall = cx
            break

    return (term, t_sim, x_fall, n_rec, times, states, torques, contact,
            normal, com, n_ev, ev, stance_time, tau_sq, force_flags)


def rollout(params: ReactiveParams, profile: SpeedProfile, model: RobotModel,
            config: SimConfig,
            initial_state: Optional[SimState] = None) -> Trajectory:
    """Fast full-episode rollout of the reactive controller."""
    state0 = initial_state if initial_state is not None else default_initial_state(model)
    mem = make_memory(state0, model)
    steps, speeds = profile.arrays()
    delay = int(round(config.sensor_delay / config.dt))
    (term, t_sim, x_fall, n_rec, times, states, torques, contact, normal,
     com, n_ev, ev, stance_time, tau_sq, force_flags) = _rollout_core(
        state0.pack(), mem, params.vector(), steps, speeds,
        model.dynamics_params(), model.actuator_params(),
        config.vector(model), delay)
    events = [StepEvent(t=ev[i, 0], foot=int(ev[i, 1]), clearance=ev[i, 2],
                        mean_speed=ev[i, 3], z_start=ev[i, 4], z_end=ev[i, 5],
                        pitch_start=ev[i, 6], pitch_end=ev[i, 7])
              for i in range(n_ev)]
    walked_span = t_sim if t_sim > 0 else config.dt
    return Trajectory(
        times=times[:n_rec], states=states[:n_rec], torques=torques[:n_rec],
        contact=contact[:n_rec], normal_forces=normal[:n_rec],
        com=com[:n_rec], events=events,
        termination="fell" if term else "completed", t_sim=float(t_sim),
        t_max=config.t_max, x_fall=float(x_fall) if term else None,
        duty_factors=np.minimum(stance_time / walked_span, 1.0),
        torque_sq_integral=float(tau_sq),
        force_flags=force_flags[:int(round(t_sim / config.dt))])


def _per_step_speed_error(traj: Trajectory, profile: SpeedProfile) -> float:
    if traj.events:
        errs = [abs(e.mean_speed - profile.target_for_step(i))
                for i, e in enumerate(traj.events)]
        return float(np.mean(errs))
    span = traj.t_sim if traj.t_sim > 0 else 1.0
    return abs(traj.com_x_end / span - profile.target_for_step(0))


def cost_hardware(traj: Trajectory, profile: SpeedProfile) -> float:
    """Fall-penalizing tracking cost: the 'hardware' objective."""
    if traj.termination == "fell":
        return 100.0 - traj.x_fall
    return _per_step_speed_error(traj, profile)


def cost_smooth(traj: Trajectory, s_tgt: float = 1.3) -> float:
    """Smooth shaping cost rewarding time and distance walked."""
    t = traj.t_sim
    d = max(traj.com_x_end, 0.0)  # guard against the 1/(1+d) pole
    s = d / t if t > 0 else 0.0
    return 1.0 / (1.0 + t) + 0.3 / (1.0 + d) + 0.01 * (s - s_tgt)


def cost_nonsmooth(traj: Trajectory, profile: SpeedProfile,
                   model: RobotModel) -> float:
    """Discontinuous cost with explicit fall penalty and transport term."""
    if traj.termination == "fell":
        return 300.0 - traj.x_fall
    verr = _per_step_speed_error(traj, profile)
    d = traj.com_x_end
    if d <= 0:
        c_tr = 100.0
    else:
        c_tr = min(traj.torque_sq_integral / (model.total_mass * GRAVITY * d),
                   100.0)
    return 100.0 * verr + c_tr
