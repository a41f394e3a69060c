"""Biot-Savart kernels on the full plane.

The singular kernel ``H(x) = x^perp / (2 pi |x|^2)`` is only a reference
evaluation; every evolution uses the algebraic blob

    H_delta(x) = x^perp / (2 pi (|x|^2 + delta^2)),
    G_delta(x) = ln(|x|^2 + delta^2) / (4 pi),

with ``grad^perp G_delta = H_delta`` and ``H_delta(0) = 0``.
Functions accept a single point of shape ``(2,)`` or a batch ``(n, 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi


class KernelDomainError(ValueError):
    """Raised when the singular kernel is evaluated at the origin."""


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate by +90 degrees: (v1, v2) -> (-v2, v1)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True)
class BlobKernel:
    delta: float

    def __post_init__(self):
        if not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise ValueError(f"blob scale must be positive and finite, got {self.delta!r}")

    def velocity(self, x):
        return blob_velocity(self, x)

    def stream(self, x):
        return blob_stream(self, x)

    def bounds(self):
        return kernel_bounds(self)


def biot_savart(x) -> np.ndarray:
    """Singular kernel H(x) = x^perp / (2 pi |x|^2); undefined at x = 0."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 == 0.0):
        raise KernelDomainError("singular Biot-Savart kernel evaluated at the origin")
    return perp(x) / (TWO_PI * r2)[..., None]


def blob_velocity(k: BlobKernel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return perp(x) / (TWO_PI * (r2 + k.delta * k.delta))[..., None]


def blob_stream(k: BlobKernel, x):
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return np.log(r2 + k.delta * k.delta) / FOUR_PI


def blob_jacobian(k: BlobKernel, x) -> np.ndarray:
    """Matrix J[..., i, j] = d H_delta_i / d x_j."""
    x = np.asarray(x, dtype=float)
    d2 = k.delta * k.delta
    s = np.sum(x * x, axis=-1) + d2
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    px = perp(x)
    jac = rot / (TWO_PI * s)[..., None, None]
    jac = jac - 2.0 * px[..., :, None] * x[..., None, :] / (TWO_PI * s * s)[..., None, None]
    return jac


def kernel_bounds(k: BlobKernel) -> tuple[float, float]:
    """Certified (sup |H_delta|, Lip(H_delta)).

    |H_delta(x)| = r / (2 pi (r^2 + delta^2)) peaks at r = delta.  The
    Jacobian has singular values 1/(2 pi s) and |delta^2 - r^2|/(2 pi s^2)
    with s = r^2 + delta^2, both maximal at r = 0, so the operator norm
    (and hence the Lipschitz constant on the convex plane) is 1/(2 pi delta^2).
    """
    d = k.delta
    return 1.0 / (FOUR_PI * d), 1.0 / (TWO_PI * d * d)
