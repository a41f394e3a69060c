"""Exact Wasserstein distances for positive and signed discrete measures.

Signed clouds are compared through their Jordan parts:

* ``w1_signed(a, b) = W1(a+ + b-, a- + b+)``
* ``w2_signed(a, b) = sqrt(W2(a+, b+)^2 + W2(a-, b-)^2)``

Both need compatible inputs (equal positive masses and equal negative
masses).  Spray clouds are compared as positive measures on R^4 with the
Euclidean norm on ``(x, xi)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._simplex import TransportSolverError, certify, solve_transport
from .measures import PhaseAtomCloud, SignedAtomCloud, compatible, jordan

MASS_RTOL = 1e-9
ORACLE_MAX_ATOMS = 8

__all__ = [
    "IncompatibleMeasuresError",
    "OracleScopeError",
    "TransportPlan",
    "TransportSolverError",
    "Cones",
    "brute_force_w1",
    "dual_lower_bound",
    "kantorovich_potential",
    "w1_pair",
    "w1_phase",
    "w1_signed",
    "w2_signed",
    "w_p_positive",
    "wasserstein_points",
]


class IncompatibleMeasuresError(ValueError):
    pass


class OracleScopeError(ValueError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    pairs: np.ndarray  # rows (source index, target index, mass)
    cost: float
    order: int
    potentials: np.ndarray | None = None

    @property
    def distance(self) -> float:
        return self.cost ** (1.0 / self.order)

    def marginal_errors(self, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
        i = self.pairs[:, 0].astype(int)
        j = self.pairs[:, 1].astype(int)
        rows = np.bincount(i, weights=self.pairs[:, 2], minlength=len(a))
        cols = np.bincount(j, weights=self.pairs[:, 2], minlength=len(b))
        return float(np.max(np.abs(rows - a), initial=0.0)), float(np.max(np.abs(cols - b), initial=0.0))


def wasserstein_points(xs, a, ys, b, p: int = 1, certify_result: bool = True) -> tuple[float, TransportPlan]:
    """W_p between positive point masses in any dimension."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("transport between empty measures is undefined")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("weights must be positive")
    ma, mb = float(a.sum()), float(b.sum())
    if abs(ma - mb) > MASS_RTOL * ma:
        raise IncompatibleMeasuresError(f"masses differ: {ma!r} vs {mb!r}")
    if ma != mb:
        b = b * (ma / mb)
    pairs, cost, pi, info = solve_transport(xs, a, ys, b, p)
    if certify_result:
        cert = certify(xs, a, ys, b, pairs, pi, p, info["max_cost"])
        if not (cert["feasible"] and cert["dual_feasible"] and cert["complementary"]):
            raise TransportSolverError(f"optimality certificate failed: {cert}")
    plan = TransportPlan(pairs, cost, p, pi)
    return plan.distance, plan


def _require_positive(c: SignedAtomCloud, name: str) -> None:
    if np.any(c.weight < 0):
        raise ValueError(f"{name} must be a positive measure")


def w_p_positive(mu: SignedAtomCloud, nu: SignedAtomCloud, p: int = 1) -> tuple[float, TransportPlan]:
    _require_positive(mu, "mu")
    _require_positive(nu, "nu")
    return wasserstein_points(mu.pos, mu.weight, nu.pos, nu.weight, p)


def _signed_tol(a: SignedAtomCloud, b: SignedAtomCloud) -> float:
    return MASS_RTOL * max(a.total_variation, b.total_variation)


def _check_compatible(a: SignedAtomCloud, b: SignedAtomCloud) -> None:
    if not compatible(a, b, _signed_tol(a, b)):
        raise IncompatibleMeasuresError(
            "signed measures are not compatible: "
            f"masses (+{a.positive_mass!r}, -{a.negative_mass!r}) vs (+{b.positive_mass!r}, -{b.negative_mass!r})"
        )


def signed_sides(a: SignedAtomCloud, b: SignedAtomCloud) -> tuple[SignedAtomCloud, SignedAtomCloud]:
    """The positive measures (a+ + b-, a- + b+) compared by ``w1_signed``."""
    ap, an = jordan(a)
    bp, bn = jordan(b)
    return ap + bn, an + bp


def w1_signed(a: SignedAtomCloud, b: SignedAtomCloud) -> float:
    _check_compatible(a, b)
    src, tgt = signed_sides(a, b)
    if len(src) == 0 and len(tgt) == 0:
        return 0.0
    return w_p_positive(src, tgt, 1)[0]


def _part_cost(x: SignedAtomCloud, y: SignedAtomCloud, p: int) -> float:
    if len(x) == 0 and len(y) == 0:
        return 0.0
    return w_p_positive(x, y, p)[1].cost


def w2_signed(a: SignedAtomCloud, b: SignedAtomCloud) -> float:
    _check_compatible(a, b)
    ap, an = jordan(a)
    bp, bn = jordan(b)
    return math.sqrt(_part_cost(ap, bp, 2) + _part_cost(an, bn, 2))


def w1_phase(f: PhaseAtomCloud, g: PhaseAtomCloud) -> float:
    if len(f) == 0 and len(g) == 0:
        return 0.0
    if len(f) == 0 or len(g) == 0:
        raise IncompatibleMeasuresError("one spray is empty and the other is not")
    return wasserstein_points(f.points(), f.weight, g.points(), g.weight, 1)[0]


def w1_pair(m1: tuple[SignedAtomCloud, PhaseAtomCloud], m2: tuple[SignedAtomCloud, PhaseAtomCloud]) -> float:
    """Vorticity W1 (signed, R^2) plus spray W1 (positive, R^4)."""
    return w1_signed(m1[0], m2[0]) + w1_phase(m1[1], m2[1])


# -- duality -----------------------------------------------------------------


class Cones:
    """1-Lipschitz envelope ``sign * max_k(|x - anchor_k| + offset_k)``.

    With ``mode="min"`` the envelope is ``sign * min_k(...)`` instead.
    Maxima and minima of 1-Lipschitz functions are 1-Lipschitz, and so is
    their negation.
    """

    lipschitz = 1.0

    def __init__(self, anchors, offsets=None, sign: float = 1.0, mode: str = "max"):
        self.anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
        if len(self.anchors) == 0:
            raise ValueError("at least one anchor is required")
        self.offsets = np.zeros(len(self.anchors)) if offsets is None else np.asarray(offsets, dtype=float)
        if self.offsets.shape != (len(self.anchors),):
            raise ValueError("one offset per anchor")
        if sign not in (1.0, -1.0):
            raise ValueError("sign must be +1 or -1")
        if mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")
        self.sign = float(sign)
        self.mode = mode

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        d = np.linalg.norm(x[:, None, :] - self.anchors[None, :, :], axis=2) + self.offsets[None, :]
        env = d.max(axis=1) if self.mode == "max" else d.min(axis=1)
        return self.sign * env


def dual_lower_bound(a: SignedAtomCloud, b: SignedAtomCloud, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """Integral of a 1-Lipschitz test function against a - b."""
    _check_compatible(a, b)
    total = 0.0
    if len(a):
        total += float(np.dot(a.weight, np.asarray(phi(a.pos), dtype=float)))
    if len(b):
        total -= float(np.dot(b.weight, np.asarray(phi(b.pos), dtype=float)))
    return total


def kantorovich_potential(a: SignedAtomCloud, b: SignedAtomCloud) -> Cones:
    """An optimal 1-Lipschitz test function built from the solver's duals.

    With target potentials ``g_j`` the function ``min_j(g_j + |x - y_j|)``
    is 1-Lipschitz and integrates against ``a - b`` to ``w1_signed(a, b)``.
    """
    _check_compatible(a, b)
    src, tgt = signed_sides(a, b)
    if len(src) == 0:
        return Cones(np.zeros((1, 2)))
    _, plan = w_p_positive(src, tgt, 1)
    g = -plan.potentials[len(src) : len(src) + len(tgt)]
    return Cones(tgt.pos, g, sign=1.0, mode="min")


# -- oracle ------------------------------------------------------------------


def brute_force_w1(a: SignedAtomCloud, b: SignedAtomCloud) -> float:
    """W1 by enumerating every matching; equal-weight atoms, at most 8 a side."""
    _check_compatible(a, b)
    src, tgt = signed_sides(a, b)
    if len(src) != len(tgt):
        raise OracleScopeError("combined sides must have the same number of atoms")
    n = len(src)
    if n == 0:
        return 0.0
    if n > ORACLE_MAX_ATOMS:
        raise OracleScopeError(f"at most {ORACLE_MAX_ATOMS} atoms per side, got {n}")
    w = np.concatenate([src.weight, tgt.weight])
    if np.max(w) - np.min(w) > 1e-12 * np.max(w):
        raise OracleScopeError("oracle needs equal-weight atoms")
    unit = float(np.mean(w))
    cost = np.linalg.norm(src.pos[:, None, :] - tgt.pos[None, :, :], axis=2)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return unit * float(totals.min())
