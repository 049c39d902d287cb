"""CartPole, MountainCar and Acrobot with the Gym suite's default dynamics.

State is kept in plain Python floats; numpy scalar arithmetic costs more
than the physics at this size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numcore.prng import Prng


class EnvError(RuntimeError):
    pass


@dataclass(slots=True)
class StepResult:
    next_state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated


class Env:
    name = "env"
    n_actions = 0
    obs_dim = 0
    default_max_steps = 0

    def __init__(self, max_steps: int | None = None, seed: int = 0):
        self.max_steps = self.default_max_steps if max_steps is None else int(max_steps)
        self.rng = Prng(seed)
        self.steps = 0
        self._done = True

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Draw a fresh initial state; ``seed`` reseeds the env's own stream."""
        if seed is not None:
            self.rng = Prng(seed)
        self.steps = 0
        self._done = False
        self._reset_state()
        return self.observe()

    def step(self, action: int) -> StepResult:
        if self._done:
            raise EnvError(f"{self.name}: step() after episode end; call reset()")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise EnvError(f"{self.name}: action {action} outside [0, {self.n_actions})")
        reward, terminal = self._advance(action)
        self.steps += 1
        truncated = (not terminal) and self.max_steps > 0 and self.steps >= self.max_steps
        self._done = terminal or truncated
        return StepResult(self.observe(), reward, terminal, truncated)

    def set_state(self, values) -> None:
        """Place the env in an internal state and open a fresh episode."""
        self._set_internal([float(v) for v in values])
        self.steps = 0
        self._done = False

    def _reset_state(self):
        raise NotImplementedError

    def _advance(self, action: int) -> tuple[float, bool]:
        raise NotImplementedError

    def _set_internal(self, values):
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError


def env_reset(env: Env, seed: int) -> np.ndarray:
    return env.reset(seed)


class CartPole(Env):
    name = "cartpole"
    n_actions = 2
    obs_dim = 4
    default_max_steps = 500

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    total_mass = masspole + masscart
    length = 0.5  # half the pole's length
    polemass_length = masspole * length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    def _reset_state(self):
        self.state = self.rng.uniform_array(-0.05, 0.05, 4)

    def _set_internal(self, values):
        if len(values) != 4:
            raise EnvError("cartpole state has 4 entries")
        self.state = values

    def observe(self):
        return np.array(self.state, dtype=np.float64)

    def _advance(self, action):
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if action == 1 else -self.force_mag
        costheta = math.cos(theta)
        sintheta = math.sin(theta)
        temp = (force + self.polemass_length * theta_dot * theta_dot * sintheta) / self.total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta * costheta / self.total_mass)
        )
        xacc = temp - self.polemass_length * thetaacc * costheta / self.total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self.state = [x, x_dot, theta, theta_dot]
        terminal = (
            x < -self.x_threshold or x > self.x_threshold
            or theta < -self.theta_threshold or theta > self.theta_threshold
        )
        return 1.0, terminal


class MountainCar(Env):
    name = "mountaincar"
    n_actions = 3
    obs_dim = 2
    default_max_steps = 200

    min_position = -1.2
    max_position = 0.6
    max_speed = 0.07
    goal_position = 0.5
    goal_velocity = 0.0
    force = 0.001
    gravity = 0.0025

    def _reset_state(self):
        self.state = [self.rng.uniform(-0.6, -0.4), 0.0]

    def _set_internal(self, values):
        if len(values) != 2:
            raise EnvError("mountaincar state has 2 entries")
        self.state = values

    def observe(self):
        return np.array(self.state, dtype=np.float64)

    def _advance(self, action):
        position, velocity = self.state
        velocity += (action - 1) * self.force + math.cos(3 * position) * (-self.gravity)
        velocity = min(max(velocity, -self.max_speed), self.max_speed)
        position += velocity
        position = min(max(position, self.min_position), self.max_position)
        if position == self.min_position and velocity < 0:
            velocity = 0.0
        self.state = [position, velocity]
        terminal = position >= self.goal_position and velocity >= self.goal_velocity
        return -1.0, terminal


def _wrap(x: float, low: float, high: float) -> float:
    diff = high - low
    while x > high:
        x -= diff
    while x < low:
        x += diff
    return x


class Acrobot(Env):
    """Two-link underactuated swing-up, "book" dynamics, RK4 with dt = 0.2."""

    name = "acrobot"
    n_actions = 3
    obs_dim = 6
    default_max_steps = 500

    dt = 0.2
    link_length_1 = 1.0
    link_mass_1 = 1.0
    link_mass_2 = 1.0
    link_com_pos_1 = 0.5
    link_com_pos_2 = 0.5
    link_moi = 1.0
    max_vel_1 = 4 * math.pi
    max_vel_2 = 9 * math.pi
    torques = (-1.0, 0.0, 1.0)

    def _reset_state(self):
        self.state = self.rng.uniform_array(-0.1, 0.1, 4)

    def _set_internal(self, values):
        if len(values) != 4:
            raise EnvError("acrobot internal state is (theta1, theta2, dtheta1, dtheta2)")
        self.state = values

    def observe(self):
        t1, t2, d1, d2 = self.state
        return np.array([math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2), d1, d2])

    def _dsdt(self, s, torque):
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1 = self.link_length_1
        lc1, lc2 = self.link_com_pos_1, self.link_com_pos_2
        i1 = i2 = self.link_moi
        g = 9.8
        theta1, theta2, dtheta1, dtheta2 = s
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
        phi2 = m2 * lc2 * g * math.cos(theta1 + theta2 - math.pi / 2.0)
        phi1 = (
            -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
            - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
            + (m1 * lc1 + m2 * l1) * g * math.cos(theta1 - math.pi / 2)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return (dtheta1, dtheta2, ddtheta1, ddtheta2)

    def _rk4(self, s, torque):
        h = self.dt
        k1 = self._dsdt(s, torque)
        k2 = self._dsdt([a + h / 2 * b for a, b in zip(s, k1)], torque)
        k3 = self._dsdt([a + h / 2 * b for a, b in zip(s, k2)], torque)
        k4 = self._dsdt([a + h * b for a, b in zip(s, k3)], torque)
        return [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4)]

    def _advance(self, action):
        ns = self._rk4(self.state, self.torques[action])
        ns[0] = _wrap(ns[0], -math.pi, math.pi)
        ns[1] = _wrap(ns[1], -math.pi, math.pi)
        ns[2] = min(max(ns[2], -self.max_vel_1), self.max_vel_1)
        ns[3] = min(max(ns[3], -self.max_vel_2), self.max_vel_2)
        self.state = ns
        terminal = -math.cos(ns[0]) - math.cos(ns[1] + ns[0]) > 1.0
        return (0.0 if terminal else -1.0), terminal


def cartpole_step(env: CartPole, action: int) -> StepResult:
    return env.step(action)


def mountaincar_step(env: MountainCar, action: int) -> StepResult:
    return env.step(action)


def acrobot_step(env: Acrobot, action: int) -> StepResult:
    return env.step(action)
