"""Coupled vortex / spray particle dynamics.

Vortices (weights ``a_j``) are massless and follow the induced velocity

    u(z) = sum_j a_j H_delta(z - x_j) + sum_i w_i H_delta(z - h_i),

while spray atoms obey ``h' = xi`` and ``xi' = (xi - u(h))^perp / eps``.
Self terms vanish on their own because ``H_delta(0) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .measures import PhaseAtomCloud, SignedAtomCloud

BLOWUP_THRESHOLD = 1e12
STIFF_FACTOR = 10.0


class BlowUpError(ArithmeticError):
    def __init__(self, index: int, kind: str, time: float):
        self.index = index
        self.kind = kind
        self.time = time
        super().__init__(f"non-finite or runaway {kind} atom {index} at t={time!r}")


@dataclass(frozen=True)
class CouplingParams:
    delta: float = 0.5
    epsilon: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be positive")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True, eq=False)
class SprayState:
    vortices: SignedAtomCloud
    spray: PhaseAtomCloud
    time: float = 0.0

    @classmethod
    def empty(cls, time: float = 0.0) -> "SprayState":
        return cls(SignedAtomCloud.empty(), PhaseAtomCloud.empty(), time)

    def combined(self) -> SignedAtomCloud:
        """Vortices plus spray positions as one signed cloud (omega + rho)."""
        return self.vortices + SignedAtomCloud(self.spray.x, self.spray.weight)

    def with_arrays(self, x, h, xi, time: float) -> "SprayState":
        return SprayState(
            SignedAtomCloud(x, self.vortices.weight),
            PhaseAtomCloud(h, xi, self.spray.weight),
            time,
        )


@dataclass(frozen=True)
class StateDerivative:
    dx: np.ndarray
    dh: np.ndarray
    dxi: np.ndarray


@njit(cache=True)
def _blob_sum(targets, sources, weights, delta2):
    nt = targets.shape[0]
    ns = sources.shape[0]
    out = np.zeros((nt, 2))
    c = 1.0 / (2.0 * math.pi)
    for t in range(nt):
        tx = targets[t, 0]
        ty = targets[t, 1]
        ux = 0.0
        uy = 0.0
        for s in range(ns):
            dx = tx - sources[s, 0]
            dy = ty - sources[s, 1]
            f = weights[s] / (dx * dx + dy * dy + delta2)
            ux -= dy * f
            uy += dx * f
        out[t, 0] = ux * c
        out[t, 1] = uy * c
    return out


def blob_field(targets, sources, weights, delta: float) -> np.ndarray:
    targets = np.ascontiguousarray(np.asarray(targets, dtype=float).reshape(-1, 2))
    sources = np.ascontiguousarray(np.asarray(sources, dtype=float).reshape(-1, 2))
    weights = np.ascontiguousarray(np.asarray(weights, dtype=float).reshape(-1))
    if len(targets) == 0:
        return np.zeros((0, 2))
    return _blob_sum(targets, sources, weights, delta * delta)


def induced_velocity(s: SprayState, targets, k: CouplingParams) -> np.ndarray:
    src = np.vstack([s.vortices.pos, s.spray.x])
    w = np.concatenate([s.vortices.weight, s.spray.weight])
    return blob_field(targets, src, w, k.delta)


def _velocities(x, h, a, w, delta):
    """Induced velocity at the vortex sites and at the spray sites."""
    src = np.vstack([x, h])
    wt = np.concatenate([a, w])
    u = blob_field(src, src, wt, delta)
    return u[: len(x)], u[len(x) :]


def _perp(v):
    return np.column_stack([-v[:, 1], v[:, 0]]) if len(v) else v.copy()


def _rhs_arrays(x, h, xi, a, w, k: CouplingParams):
    ux, uh = _velocities(x, h, a, w, k.delta)
    return ux, xi.copy(), _perp(xi - uh) / k.epsilon


def rhs(s: SprayState, k: CouplingParams) -> StateDerivative:
    dx, dh, dxi = _rhs_arrays(s.vortices.pos, s.spray.x, s.spray.xi, s.vortices.weight, s.spray.weight, k)
    return StateDerivative(dx, dh, dxi)


def _check_finite(x, h, xi, time):
    for kind, arr in (("vortex", x), ("spray", h), ("spray", xi)):
        if len(arr) == 0:
            continue
        bad = ~np.isfinite(arr) | (np.abs(arr) > BLOWUP_THRESHOLD)
        if bad.any():
            raise BlowUpError(int(np.argmax(bad.any(axis=1))), kind, time)


def _rk4_arrays(x, h, xi, a, w, dt, k):
    k1 = _rhs_arrays(x, h, xi, a, w, k)
    k2 = _rhs_arrays(x + 0.5 * dt * k1[0], h + 0.5 * dt * k1[1], xi + 0.5 * dt * k1[2], a, w, k)
    k3 = _rhs_arrays(x + 0.5 * dt * k2[0], h + 0.5 * dt * k2[1], xi + 0.5 * dt * k2[2], a, w, k)
    k4 = _rhs_arrays(x + dt * k3[0], h + dt * k3[1], xi + dt * k3[2], a, w, k)
    sixth = dt / 6.0
    return (
        x + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        h + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        xi + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )


def _slow_arrays(x, h, xi, a, w, dt, k):
    """RK4 on the slow flow: vortices advected by u, spray drifts at frozen xi."""

    def vel(xx, hh):
        return _velocities(xx, hh, a, w, k.delta)[0]

    k1 = vel(x, h)
    k2 = vel(x + 0.5 * dt * k1, h + 0.5 * dt * xi)
    k3 = vel(x + 0.5 * dt * k2, h + 0.5 * dt * xi)
    k4 = vel(x + dt * k3, h + dt * xi)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), h + dt * xi


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.column_stack([c * v[:, 0] - s * v[:, 1], s * v[:, 0] + c * v[:, 1]]) if len(v) else v.copy()


def _split_arrays(x, h, xi, a, w, dt, k):
    x, h = _slow_arrays(x, h, xi, a, w, 0.5 * dt, k)
    if len(h):
        uh = _velocities(x, h, a, w, k.delta)[1]
        xi = uh + _rotate(xi - uh, dt / k.epsilon)
    x, h = _slow_arrays(x, h, xi, a, w, 0.5 * dt, k)
    return x, h, xi


_STEPPERS = {"rk4": _rk4_arrays, "split": _split_arrays}


def _step(s: SprayState, dt: float, k: CouplingParams, scheme: str) -> SprayState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, h, xi = _STEPPERS[scheme](s.vortices.pos, s.spray.x, s.spray.xi, s.vortices.weight, s.spray.weight, dt, k)
    t = s.time + dt
    _check_finite(x, h, xi, t)
    return s.with_arrays(x, h, xi, t)


def step_rk4(s: SprayState, dt: float, k: CouplingParams) -> SprayState:
    return _step(s, dt, k, "rk4")


def step_split(s: SprayState, dt: float, k: CouplingParams) -> SprayState:
    """Strang splitting: slow half step, exact gyration with u frozen, slow half step."""
    return _step(s, dt, k, "split")


def resolve_scheme(scheme: str, k: CouplingParams, dt: float) -> str:
    if scheme == "auto":
        return "split" if k.epsilon <= STIFF_FACTOR * dt else "rk4"
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}")
    return scheme


def n_steps_for(T: float, dt: float) -> int:
    if T <= 0:
        return 0
    return max(1, math.ceil(T / dt - 1e-9))


def integrate(
    s0: SprayState,
    k: CouplingParams,
    T: float,
    dt: float,
    scheme: str = "auto",
    cadence: int = 1,
) -> list[SprayState]:
    """States at steps 0, cadence, 2 cadence, ... and at the final step.

    The step count is ``ceil(T / dt)`` so the final time lies within one
    step of ``T``.  Times are ``t0 + n dt`` (not accumulated sums).
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    scheme = resolve_scheme(scheme, k, dt)
    stepper = _STEPPERS[scheme]
    n = n_steps_for(T, dt)
    a, w = s0.vortices.weight, s0.spray.weight
    x, h, xi = s0.vortices.pos, s0.spray.x, s0.spray.xi
    traj = [s0]
    for step in range(1, n + 1):
        x, h, xi = stepper(x, h, xi, a, w, dt, k)
        t = s0.time + step * dt
        _check_finite(x, h, xi, t)
        if step % cadence == 0 or step == n:
            traj.append(s0.with_arrays(x, h, xi, t))
    return traj


def translate(s: SprayState, shift) -> SprayState:
    shift = np.asarray(shift, dtype=float)
    return replace(
        s,
        vortices=SignedAtomCloud(s.vortices.pos + shift, s.vortices.weight),
        spray=PhaseAtomCloud(s.spray.x + shift, s.spray.xi, s.spray.weight),
    )


def as_pure_vortices(s: SprayState) -> SprayState:
    """Every spray atom becomes a massless vortex of the same weight."""
    return SprayState(s.combined(), PhaseAtomCloud.empty(), s.time)
