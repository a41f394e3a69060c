"""Conserved and modulated quantities along particle trajectories."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .dynamics import CouplingParams, SprayState, induced_velocity
from .kernels import BlobKernel, kernel_bounds
from .measures import SignedAtomCloud, kinetic_moment, merge_coincident

CSV_HEADER = "time,hamiltonian,circ_pos,circ_neg,spray_mass,m2,eps_kinetic,sqrt_eps_j_l1"


class DiagnosticSetupError(ValueError):
    pass


class PairingError(ValueError):
    pass


@njit(cache=True)
def _pair_energy(pos, w, delta2):
    n = pos.shape[0]
    total = 0.0
    for p in range(n):
        for q in range(p + 1, n):
            dx = pos[p, 0] - pos[q, 0]
            dy = pos[p, 1] - pos[q, 1]
            total += w[p] * w[q] * math.log(dx * dx + dy * dy + delta2)
    return 2.0 * total / (4.0 * math.pi)


def interaction_energy(c: SignedAtomCloud, delta: float) -> float:
    """sum over p != q of c_p c_q G_delta(z_p - z_q)."""
    if len(c) < 2:
        return 0.0
    return float(_pair_energy(np.ascontiguousarray(c.pos), np.ascontiguousarray(c.weight), delta * delta))


# -- reference fields --------------------------------------------------------


class ReferenceField:
    """Steady, divergence-free closed-form velocity field."""

    circulation: float | None = None  # integral of curl v over the plane, None if infinite

    def velocity(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        """G[..., i, j] = d v_i / d x_j."""
        raise NotImplementedError

    def curl(self, x) -> np.ndarray:
        g = self.gradient(x)
        return g[..., 1, 0] - g[..., 0, 1]

    def material_derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...ij,...j->...i", self.gradient(x), self.velocity(x))

    def strain(self, x) -> np.ndarray:
        g = self.gradient(x)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def strain_norm(self, x) -> np.ndarray:
        """Spectral radius of the (trace-free) strain."""
        d = self.strain(x)
        return np.hypot(d[..., 0, 0], d[..., 0, 1])

    def strain_sup(self) -> float:
        raise NotImplementedError

    def accel_sup(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class RigidRotation(ReferenceField):
    omega: float = 1.0

    circulation = None

    def velocity(self, x):
        x = np.asarray(x, dtype=float)
        return self.omega * np.stack([-x[..., 1], x[..., 0]], axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 1] = -self.omega
        g[..., 1, 0] = self.omega
        return g

    def strain_sup(self) -> float:
        return 0.0

    def accel_sup(self, radius: float = 1.0) -> float:
        """sup |A(v)| on the disc of the given radius (A(v) = -omega^2 x)."""
        return self.omega**2 * radius


@dataclass(frozen=True)
class BlobVortex(ReferenceField):
    """v = strength * H_sigma: a steady Euler flow with total circulation ``strength``."""

    strength: float = 1.0
    sigma: float = 1.0

    @property
    def circulation(self) -> float:
        return self.strength

    def velocity(self, x):
        return self.strength * BlobKernel(self.sigma).velocity(x)

    def gradient(self, x):
        from .kernels import blob_jacobian

        return self.strength * blob_jacobian(BlobKernel(self.sigma), x)

    def curl(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        r2 = np.sum(x * x, axis=-1)
        return self.strength * s2 / (math.pi * (r2 + s2) ** 2)

    def strain_sup(self) -> float:
        # |d(v)|(x) = |a| r^2 / (2 pi (r^2 + s^2)^2), maximal at r = sigma
        return abs(self.strength) / (8.0 * math.pi * self.sigma**2)

    def accel_sup(self) -> float:
        # |A(v)| = a^2 r / (4 pi^2 (r^2 + s^2)^2), maximal at r^2 = s^2 / 3
        return self.strength**2 * 9.0 / (64.0 * math.pi**2 * math.sqrt(3.0) * self.sigma**3)


# -- energies ----------------------------------------------------------------


def modulated_energy(
    s: SprayState,
    v: ReferenceField | None,
    h_discrete: SignedAtomCloud | None,
    k: CouplingParams,
    mass_tol: float = 1e-6,
) -> float:
    """H_v from the quadratic form

    2 H_v = eps sum_i w_i |xi_i - v(h_i)|^2 - sum_{p != q} c_p c_q G_delta(z_p - z_q),

    ``c`` ranging over vortices, spray positions and ``-h_discrete``.
    With ``v`` and ``h_discrete`` absent this is the Hamiltonian.  Atoms of
    ``h_discrete`` sitting exactly on a state atom are netted against it
    first, so a state matching ``h_discrete`` carries no cross self-energy.
    """
    spray = s.spray
    if len(spray):
        rel = spray.xi if v is None else spray.xi - v.velocity(spray.x)
        kinetic = k.epsilon * float(np.sum(spray.weight * np.sum(rel * rel, axis=1)))
    else:
        kinetic = 0.0
    c = s.combined()
    if h_discrete is not None and len(h_discrete):
        if v is not None and v.circulation is not None:
            if abs(h_discrete.mass - v.circulation) > mass_tol * max(1.0, abs(v.circulation)):
                raise DiagnosticSetupError(
                    f"discretized curl carries mass {h_discrete.mass!r}, field circulation is {v.circulation!r}"
                )
        c = merge_coincident(c - h_discrete)
    return 0.5 * (kinetic - interaction_energy(c, k.delta))


def hamiltonian(s: SprayState, k: CouplingParams) -> float:
    return modulated_energy(s, None, None, k)


def gyration_energy(s: SprayState, k: CouplingParams, v: ReferenceField | None = None) -> float:
    """eps sum_i w_i |xi_i - v(h_i)|^2, with v the induced field when not given."""
    if len(s.spray) == 0:
        return 0.0
    ref = induced_velocity(s, s.spray.x, k) if v is None else v.velocity(s.spray.x)
    rel = s.spray.xi - ref
    return k.epsilon * float(np.sum(s.spray.weight * np.sum(rel * rel, axis=1)))


@dataclass(frozen=True)
class GyrationEnvelope:
    """Bound on eps sum_i w_i |xi_i - u(h_i)|^2 along the exact flow.

    With W = max_i |xi_i - u(h_i)|, U = sup|H_delta| * TV and L = Lip(H_delta),
    d|xi_i - u(h_i)|/dt <= |d u(h_i)/dt| <= 2 L TV (U + W), hence
    U + W(t) <= (U + W(0)) exp(2 L TV t).
    """

    epsilon: float
    mass: float
    u_bound: float
    w0: float
    rate: float

    def __call__(self, t) -> np.ndarray | float:
        w = (self.u_bound + self.w0) * np.exp(self.rate * np.asarray(t, dtype=float)) - self.u_bound
        return self.epsilon * self.mass * w * w


def gyration_envelope(s0: SprayState, k: CouplingParams) -> GyrationEnvelope:
    sup_h, lip_h = kernel_bounds(BlobKernel(k.delta))
    tv = s0.combined().total_variation
    if len(s0.spray):
        rel = s0.spray.xi - induced_velocity(s0, s0.spray.x, k)
        w0 = float(np.max(np.hypot(rel[:, 0], rel[:, 1])))
    else:
        w0 = 0.0
    return GyrationEnvelope(k.epsilon, s0.spray.mass, sup_h * tv, w0, 2.0 * lip_h * tv)


# -- trajectory comparison ----------------------------------------------------


def loeper_divergence(traj1: Sequence[SprayState], traj2: Sequence[SprayState]) -> list[tuple[float, float, float]]:
    """Per observation time: (t, Q, Q~).

    Q = sum_i w_i (|h1_i - h2_i|^2 + |xi1_i - xi2_i|^2) over spray atoms,
    Q~ = sum_j |a_j| |x1_j - x2_j|^2 over vortices.
    """
    if len(traj1) != len(traj2):
        raise PairingError("trajectories have different numbers of observations")
    out = []
    for s1, s2 in zip(traj1, traj2):
        if s1.time != s2.time:
            raise PairingError(f"observation times differ: {s1.time!r} vs {s2.time!r}")
        if not (
            np.array_equal(s1.vortices.weight, s2.vortices.weight) and np.array_equal(s1.spray.weight, s2.spray.weight)
        ):
            raise PairingError("trajectories do not share the same atoms")
        dh = s1.spray.x - s2.spray.x
        dxi = s1.spray.xi - s2.spray.xi
        q = float(np.sum(s1.spray.weight * (np.sum(dh * dh, axis=1) + np.sum(dxi * dxi, axis=1))))
        dx = s1.vortices.pos - s2.vortices.pos
        qt = float(np.sum(np.abs(s1.vortices.weight) * np.sum(dx * dx, axis=1)))
        out.append((s1.time, q, qt))
    return out


# -- observables -------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRow:
    time: float
    hamiltonian: float
    circulation_pos: float
    circulation_neg: float
    spray_mass: float
    m2: float
    eps_kinetic: float
    sqrt_eps_j_l1: float

    def csv(self) -> str:
        return ",".join(format(v, ".17g") for v in astuple(self))



def observables(s: SprayState, k: CouplingParams, v: ReferenceField | None = None) -> DiagnosticsRow:
    f = s.spray
    j_l1 = float(np.sum(f.weight * np.hypot(f.xi[:, 0], f.xi[:, 1]))) if len(f) else 0.0
    return DiagnosticsRow(
        time=float(s.time),
        hamiltonian=hamiltonian(s, k),
        circulation_pos=s.vortices.positive_mass,
        circulation_neg=s.vortices.negative_mass,
        spray_mass=f.mass,
        m2=kinetic_moment(f, 2),
        eps_kinetic=gyration_energy(s, k, v),
        sqrt_eps_j_l1=math.sqrt(k.epsilon) * j_l1,
    )
