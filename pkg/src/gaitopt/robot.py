"""Robot model, simulator configuration and simulator state types."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

GRAVITY = 9.81


class Fidelity(enum.Enum):
    """Simulator fidelity levels, from 'hardware' down to crudest model.

    L0 is the full model (series-elastic actuators + boom support) and plays
    the role of hardware. L1 replaces actuator dynamics with direct torque
    commands. L2 additionally removes the boom support.
    """

    L0_HARDWARE = 0
    L1_SIMPLE_GEAR = 1
    L2_NO_BOOM = 2


@dataclass(frozen=True)
class RobotModel:
    """Planar 5-link biped: torso + 2x(thigh, shank), point feet.

    Lengths in m, masses in kg, inertias in kg m^2 about each link's CoM,
    com offsets measured from the hip (torso) or the proximal joint (legs).
    """

    torso_mass: float = 34.0
    torso_length: float = 0.6
    torso_com: float = 0.25
    torso_inertia: float = 1.5
    thigh_mass: float = 7.0
    thigh_length: float = 0.45
    thigh_com: float = 0.2
    thigh_inertia: float = 0.12
    shank_mass: float = 6.0
    shank_length: float = 0.45
    shank_com: float = 0.22
    shank_inertia: float = 0.13
    hip_torque_limit: float = 150.0
    knee_torque_limit: float = 150.0
    gear_ratio: float = 50.0
    rotor_inertia: float = 1.5e-4
    spring_stiffness: float = 6000.0
    gear_friction: float = 60.0
    z_nominal: float = 0.9

    def __post_init__(self):
        positive = [
            self.torso_mass, self.torso_length, self.torso_com,
            self.torso_inertia, self.thigh_mass, self.thigh_length,
            self.thigh_com, self.thigh_inertia, self.shank_mass,
            self.shank_length, self.shank_com, self.shank_inertia,
            self.hip_torque_limit, self.knee_torque_limit, self.gear_ratio,
            self.rotor_inertia, self.spring_stiffness, self.z_nominal,
        ]
        if any(v <= 0 for v in positive):
            raise ValueError("all masses, lengths, inertias, stiffnesses and "
                             "torque limits must be strictly positive")
        if self.gear_friction < 0:
            raise ValueError("gear friction must be non-negative")

    @property
    def total_mass(self) -> float:
        return self.torso_mass + 2 * (self.thigh_mass + self.shank_mass)

    @property
    def leg_length(self) -> float:
        return self.thigh_length + self.shank_length

    def dynamics_params(self) -> np.ndarray:
        """Parameter vector consumed by the generated dynamics functions."""
        return np.array([
            self.torso_mass, self.torso_com, self.torso_inertia,
            self.thigh_mass, self.thigh_com, self.thigh_length,
            self.thigh_inertia, self.shank_mass, self.shank_com,
            self.shank_length, self.shank_inertia, GRAVITY,
        ])

    def actuator_params(self) -> np.ndarray:
        return np.array([
            self.hip_torque_limit, self.knee_torque_limit, self.gear_ratio,
            self.rotor_inertia, self.spring_stiffness, self.gear_friction,
        ])


@dataclass(frozen=True)
class SimConfig:
    """Simulator configuration; (config, controller) fixes a rollout exactly."""

    fidelity: Fidelity = Fidelity.L0_HARDWARE
    dt: float = 1.0e-3
    t_max: float = 10.0
    ground_stiffness: float = 5.0e4
    ground_damping: float = 500.0
    friction_coeff: float = 0.9
    boom_support_fraction: float = 0.05
    boom_drag: float = 5.0
    sensor_delay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must be at least one timestep")

    def with_fidelity(self, fidelity: Fidelity) -> "SimConfig":
        return replace(self, fidelity=fidelity)

    def vector(self, model: RobotModel) -> np.ndarray:
        """Packed config consumed by the jitted stepping core."""
        return np.array([
            self.dt, self.t_max, self.ground_stiffness, self.ground_damping,
            self.friction_coeff, self.boom_support_fraction, self.boom_drag,
            float(self.fidelity.value), model.z_nominal,
        ])


@dataclass
class SimState:
    """Full simulator state.

    q = [x, z, th, hL, kL, hR, kR]: hip position, torso pitch and absolute
    leg segment angles (CCW positive, 0 = straight down). Rotor states hold
    the series-elastic actuator internals, ordered [hipL, kneeL, hipR, kneeR].
    """

    q: np.ndarray
    dq: np.ndarray
    rotor_q: np.ndarray = field(default_factory=lambda: np.zeros(4))
    rotor_dq: np.ndarray = field(default_factory=lambda: np.zeros(4))
    contact: np.ndarray = field(default_factory=lambda: np.zeros(2, bool))
    t: float = 0.0

    def pack(self) -> np.ndarray:
        out = np.empty(22)
        out[0:7] = self.q
        out[7:14] = self.dq
        out[14:18] = self.rotor_q
        out[18:22] = self.rotor_dq
        return out

    @classmethod
    def unpack(cls, s: np.ndarray, contact: np.ndarray, t: float) -> "SimState":
        return cls(q=s[0:7].copy(), dq=s[7:14].copy(),
                   rotor_q=s[14:18].copy(), rotor_dq=s[18:22].copy(),
                   contact=contact.astype(bool).copy(), t=t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.dq))
                    and np.all(np.isfinite(self.rotor_q))
                    and np.all(np.isfinite(self.rotor_dq)))


def foot_positions(q: np.ndarray, model: RobotModel) -> np.ndarray:
    """World positions of the two point feet, rows = (left, right)."""
    x, z = q[0], q[1]
    lt, ls = model.thigh_length, model.shank_length
    out = np.empty((2, 2))
    for i, (h, k) in enumerate(((q[3], q[4]), (q[5], q[6]))):
        out[i, 0] = x + lt * np.sin(h) + ls * np.sin(k)
        out[i, 1] = z - lt * np.cos(h) - ls * np.cos(k)
    return out


def com_position(q: np.ndarray, model: RobotModel) -> np.ndarray:
    """Whole-body center of mass."""
    m = model
    hip = q[0:2]
    up = np.array([-np.sin(q[2]), np.cos(q[2])])
    total = m.torso_mass * (hip + m.torso_com * up)
    for h, k in ((q[3], q[4]), (q[5], q[6])):
        seg_h = np.array([np.sin(h), -np.cos(h)])
        seg_k = np.array([np.sin(k), -np.cos(k)])
        total = total + m.thigh_mass * (hip + m.thigh_com * seg_h)
        knee = hip + m.thigh_length * seg_h
        total = total + m.shank_mass * (knee + m.shank_com * seg_k)
    return total / m.total_mass


def com_velocity(q: np.ndarray, dq: np.ndarray, model: RobotModel) -> np.ndarray:
    """Whole-body center-of-mass velocity."""
    m = model
    hip_v = dq[0:2]
    total = m.torso_mass * (hip_v + m.torso_com * dq[2]
                            * np.array([-np.cos(q[2]), -np.sin(q[2])]))
    for h, k, dh, dk in ((q[3], q[4], dq[3], dq[4]),
                         (q[5], q[6], dq[5], dq[6])):
        tang_h = np.array([np.cos(h), np.sin(h)])
        tang_k = np.array([np.cos(k), np.sin(k)])
        total = total + m.thigh_mass * (hip_v + m.thigh_com * dh * tang_h)
        total = total + m.shank_mass * (hip_v + m.thigh_length * dh * tang_h
                                        + m.shank_com * dk * tang_k)
    return total / m.total_mass
