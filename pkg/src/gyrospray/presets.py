"""Built-in analytic initial data.

Vorticity presets are closed-form densities on a window (discretized by
midpoint quadrature); spray presets are seeded samplers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import CouplingParams, SprayState, induced_velocity
from .measures import PhaseAtomCloud, SignedAtomCloud, discretize_vorticity, sample_spray


def gaussian_bump(center=(0.0, 0.0), sigma: float = 0.5, circulation: float = 1.0) -> Callable:
    cx, cy = center
    norm = circulation / (2.0 * math.pi * sigma * sigma)

    def omega(x):
        x = np.asarray(x, dtype=float)
        r2 = (x[:, 0] - cx) ** 2 + (x[:, 1] - cy) ** 2
        return norm * np.exp(-r2 / (2.0 * sigma * sigma))

    return omega


# every resolution of a preset shares these reference masses, so clouds at
# different N stay compatible
REFERENCE_CELLS = 512


@dataclass(frozen=True)
class VorticityPreset:
    omega0: Callable[[np.ndarray], np.ndarray]
    window: tuple[float, float, float, float]

    def discretize(self, n_per_side: int) -> SignedAtomCloud:
        return discretize_vorticity(self.omega0, self.window, n_per_side, ref_n_per_side=REFERENCE_CELLS)


def _dipole():
    plus = gaussian_bump((-0.6, 0.0), 0.35, 1.0)
    minus = gaussian_bump((0.6, 0.0), 0.35, -1.0)
    return lambda x: plus(x) + minus(x)


VORTICITY_PRESETS: dict[str, VorticityPreset] = {
    "gaussian": VorticityPreset(gaussian_bump(sigma=0.5), (-2.0, 2.0, -2.0, 2.0)),
    "dipole": VorticityPreset(_dipole(), (-2.0, 2.0, -2.0, 2.0)),
}


def vortex_ring(n: int, radius: float = 1.0, circulation: float = 1.0) -> SignedAtomCloud:
    th = 2.0 * math.pi * np.arange(n) / n
    return SignedAtomCloud(radius * np.column_stack([np.cos(th), np.sin(th)]), np.full(n, circulation / n))


def random_signed_vortices(rng: np.random.Generator, n: int, weight: float = 1.0, spread: float = 1.0) -> SignedAtomCloud:
    """Gaussian positions, alternating weights +weight, -weight."""
    pos = spread * rng.standard_normal((n, 2))
    return SignedAtomCloud(pos, np.where(np.arange(n) % 2 == 0, weight, -weight))


def vortices(name: str, n: int, rng: np.random.Generator) -> SignedAtomCloud:
    """Vortex preset with roughly ``n`` atoms (grid presets use round(sqrt(n))^2)."""
    if n == 0 or name == "none":
        return SignedAtomCloud.empty()
    if name in VORTICITY_PRESETS:
        return VORTICITY_PRESETS[name].discretize(max(1, round(math.sqrt(n))))
    if name == "ring":
        return vortex_ring(n)
    if name == "mixed":
        return random_signed_vortices(rng, n)
    raise KeyError(f"unknown vortex preset {name!r}")


def _gaussian_positions(sigma: float):
    return lambda rng, n: sigma * rng.standard_normal((n, 2))


def spray(name: str, n: int, rng: np.random.Generator, omega: float = 0.5) -> PhaseAtomCloud:
    """Spray preset with ``n`` atoms of weight 1/n.

    * ``gaussian``: positions N(0, 0.5^2), velocities N(0, 0.25^2)
    * ``mixed``: positions N(0, 1), velocities N(0, 0.5^2)
    * ``rotation``: positions N(0, 0.5^2), monokinetic xi = omega x^perp
    * ``uniform_flow``: positions N(0, 0.5^2), xi = (omega, 0) for every atom
    * ``rest``: positions N(0, 0.5^2), xi = 0
    """
    if n == 0 or name == "none":
        return PhaseAtomCloud.empty()
    if name == "gaussian":
        return sample_spray(_gaussian_positions(0.5), n, rng, velocity_sampler=lambda g, x: 0.25 * g.standard_normal(x.shape))
    if name == "mixed":
        return sample_spray(_gaussian_positions(1.0), n, rng, velocity_sampler=lambda g, x: 0.5 * g.standard_normal(x.shape))
    if name == "rotation":
        return sample_spray(_gaussian_positions(0.5), n, rng, velocity_field=lambda x: omega * np.column_stack([-x[:, 1], x[:, 0]]))
    if name == "uniform_flow":
        return sample_spray(_gaussian_positions(0.5), n, rng, velocity_field=lambda x: np.tile([omega, 0.0], (len(x), 1)))
    if name == "rest":
        return sample_spray(_gaussian_positions(0.5), n, rng)
    raise KeyError(f"unknown spray preset {name!r}")


def well_prepared(s: SprayState, k: CouplingParams) -> SprayState:
    """Replace every spray velocity by the induced velocity at its position."""
    if len(s.spray) == 0:
        return s
    xi = induced_velocity(s, s.spray.x, k)
    return SprayState(s.vortices, PhaseAtomCloud(s.spray.x, xi, s.spray.weight), s.time)
