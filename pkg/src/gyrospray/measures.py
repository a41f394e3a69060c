"""Discrete measures: weighted atoms in the plane and in phase space.

``SignedAtomCloud`` carries vorticity-like data (nonzero real weights),
``PhaseAtomCloud`` carries spray data (positions, velocities, positive
weights).  Atoms at identical positions are never merged implicitly;
``merge_coincident`` does it on request.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class DiscretizationError(ValueError):
    """A sign class of the vorticity carries mass but no grid cell sees it."""


class SnapshotFormatError(ValueError):
    pass


def _as_points(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    arr = arr.reshape(-1, 2) if arr.ndim == 1 else arr
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SignedAtomCloud:
    pos: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        pos = _as_points(self.pos, "pos")
        w = np.asarray(self.weight, dtype=float).reshape(-1)
        if len(w) != len(pos):
            raise ValueError("pos and weight lengths differ")
        keep = w != 0.0
        if not keep.all():
            pos, w = pos[keep], w[keep]
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "weight", w)

    @classmethod
    def empty(cls) -> "SignedAtomCloud":
        return cls(np.zeros((0, 2)), np.zeros(0))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[Sequence[float], float]]) -> "SignedAtomCloud":
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        return cls(np.array([p for p, _ in atoms], dtype=float), np.array([w for _, w in atoms], dtype=float))

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weight))

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weight)))

    @property
    def positive_mass(self) -> float:
        return float(np.sum(self.weight[self.weight > 0]))

    @property
    def negative_mass(self) -> float:
        return float(-np.sum(self.weight[self.weight < 0])) + 0.0

    def __add__(self, other: "SignedAtomCloud") -> "SignedAtomCloud":
        return SignedAtomCloud(np.vstack([self.pos, other.pos]), np.concatenate([self.weight, other.weight]))

    def __neg__(self) -> "SignedAtomCloud":
        return SignedAtomCloud(self.pos.copy(), -self.weight)

    def __sub__(self, other: "SignedAtomCloud") -> "SignedAtomCloud":
        return self + (-other)

    def same_as(self, other: "SignedAtomCloud") -> bool:
        """Atom-by-atom bitwise equality."""
        return (
            self.pos.shape == other.pos.shape
            and np.array_equal(self.pos, other.pos)
            and np.array_equal(self.weight, other.weight)
        )


@dataclass(frozen=True, eq=False)
class PhaseAtomCloud:
    x: np.ndarray
    xi: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        x = _as_points(self.x, "x")
        xi = _as_points(self.xi, "xi")
        w = np.asarray(self.weight, dtype=float).reshape(-1)
        if not (len(x) == len(xi) == len(w)):
            raise ValueError("x, xi and weight lengths differ")
        if np.any(w <= 0.0):
            raise ValueError("phase-space weights must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "weight", w)

    @classmethod
    def empty(cls) -> "PhaseAtomCloud":
        return cls(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weight))

    def points(self) -> np.ndarray:
        """Atoms as points of R^4, ordered (x1, x2, xi1, xi2)."""
        return np.hstack([self.x, self.xi])

    def __add__(self, other: "PhaseAtomCloud") -> "PhaseAtomCloud":
        return PhaseAtomCloud(
            np.vstack([self.x, other.x]), np.vstack([self.xi, other.xi]), np.concatenate([self.weight, other.weight])
        )

    def same_as(self, other: "PhaseAtomCloud") -> bool:
        return (
            self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.xi, other.xi)
            and np.array_equal(self.weight, other.weight)
        )


def jordan(c: SignedAtomCloud) -> tuple[SignedAtomCloud, SignedAtomCloud]:
    pos_mask = c.weight > 0
    neg_mask = ~pos_mask
    return (
        SignedAtomCloud(c.pos[pos_mask], c.weight[pos_mask]),
        SignedAtomCloud(c.pos[neg_mask], -c.weight[neg_mask]),
    )


def compatible(a: SignedAtomCloud, b: SignedAtomCloud, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return abs(a.positive_mass - b.positive_mass) <= tol and abs(a.negative_mass - b.negative_mass) <= tol


def pushforward(c: SignedAtomCloud, fmap: Callable[[np.ndarray], np.ndarray]) -> SignedAtomCloud:
    """Move every atom through ``fmap`` (vectorized over an (n, 2) array)."""
    if len(c) == 0:
        return SignedAtomCloud.empty()
    return SignedAtomCloud(np.asarray(fmap(c.pos.copy()), dtype=float), c.weight.copy())


def marginals(f: PhaseAtomCloud) -> tuple[SignedAtomCloud, list[tuple[np.ndarray, np.ndarray]]]:
    """Spatial density and atomic current density (x_i, w_i xi_i)."""
    rho = SignedAtomCloud(f.x.copy(), f.weight.copy())
    current = [(f.x[i].copy(), f.weight[i] * f.xi[i]) for i in range(len(f))]
    return rho, current


def aggregate_current(current: list[tuple[np.ndarray, np.ndarray]]) -> dict[tuple[float, float], np.ndarray]:
    """Sum the current contributions that sit at the same site."""
    out: dict[tuple[float, float], np.ndarray] = {}
    for x, j in current:
        key = (float(x[0]), float(x[1]))
        out[key] = out.get(key, np.zeros(2)) + j
    return out


def kinetic_moment(f: PhaseAtomCloud, alpha: float) -> float:
    if alpha < 0:
        raise ValueError("moment order must be nonnegative")
    if len(f) == 0:
        return 0.0
    speed = np.hypot(f.xi[:, 0], f.xi[:, 1])
    if alpha == 0:
        return f.mass
    if alpha == 2:
        return float(np.sum(f.weight * np.sum(f.xi * f.xi, axis=1)))
    return float(np.sum(f.weight * speed**alpha))


def merge_coincident(c: SignedAtomCloud) -> SignedAtomCloud:
    """Net the weights of atoms sharing a position; zero sums vanish."""
    if len(c) == 0:
        return c
    uniq, inv = np.unique(c.pos, axis=0, return_inverse=True)
    w = np.zeros(len(uniq))
    np.add.at(w, inv.reshape(-1), c.weight)
    return SignedAtomCloud(uniq, w)


def _midpoint_grid(window, n: int) -> tuple[np.ndarray, float]:
    x0, x1, y0, y1 = (float(v) for v in window)
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    xs = x0 + hx * (np.arange(n) + 0.5)
    ys = y0 + hy * (np.arange(n) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), hx * hy


def discretize_vorticity(
    omega0: Callable[[np.ndarray], np.ndarray],
    window: Sequence[float],
    n_per_side: int,
    ref_factor: int = 4,
    ref_n_per_side: int | None = None,
) -> SignedAtomCloud:
    """Midpoint quadrature atoms, renormalized per sign class.

    ``window`` is ``(xmin, xmax, ymin, ymax)``.  Positive atoms are rescaled
    so that they carry exactly the positive mass of ``omega0`` on the window
    as measured by a midpoint rule ``ref_factor`` times finer (or with
    ``ref_n_per_side`` cells a side when given); likewise for the negative
    atoms.  Clouds built at different resolutions are only compatible
    when they share the same reference resolution.
    """
    if n_per_side < 1:
        raise ValueError("n_per_side must be >= 1")
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must have positive extent")
    pts, area = _midpoint_grid(window, n_per_side)
    alpha = np.asarray(omega0(pts), dtype=float) * area

    n_ref = ref_n_per_side if ref_n_per_side is not None else n_per_side * ref_factor
    fine, fine_area = _midpoint_grid(window, n_ref)
    vals = np.asarray(omega0(fine), dtype=float) * fine_area
    ref_pos = float(np.sum(vals[vals > 0]))
    ref_neg = float(-np.sum(vals[vals < 0]))

    beta_pos = float(np.sum(alpha[alpha > 0]))
    beta_neg = float(-np.sum(alpha[alpha < 0]))
    if beta_pos == 0.0 and ref_pos > 0.0:
        raise DiscretizationError("positive vorticity mass is invisible at this resolution")
    if beta_neg == 0.0 and ref_neg > 0.0:
        raise DiscretizationError("negative vorticity mass is invisible at this resolution")

    w = alpha.copy()
    if beta_pos > 0:
        w[alpha > 0] *= ref_pos / beta_pos
    if beta_neg > 0:
        w[alpha < 0] *= ref_neg / beta_neg
    return SignedAtomCloud(pts, w)


def sample_spray(
    position_sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    rng: np.random.Generator | int,
    velocity_field: Callable[[np.ndarray], np.ndarray] | None = None,
    velocity_sampler: Callable[[np.random.Generator, np.ndarray], np.ndarray] | None = None,
) -> PhaseAtomCloud:
    """Empirical spray with N atoms of weight 1/N.

    Velocities come from ``velocity_field(x)`` (monokinetic) or from
    ``velocity_sampler(rng, x)``; with neither, every atom is at rest.
    An integer ``rng`` seeds a fresh PCG64 generator.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    if velocity_field is not None and velocity_sampler is not None:
        raise ValueError("give a velocity field or a velocity sampler, not both")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(rng))
    x = np.asarray(position_sampler(rng, n), dtype=float).reshape(n, 2)
    if velocity_field is not None:
        xi = np.asarray(velocity_field(x), dtype=float).reshape(n, 2)
    elif velocity_sampler is not None:
        xi = np.asarray(velocity_sampler(rng, x), dtype=float).reshape(n, 2)
    else:
        xi = np.zeros((n, 2))
    return PhaseAtomCloud(x, xi, np.full(n, 1.0 / n))


# -- snapshots ---------------------------------------------------------------

SNAPSHOT_FIELDS = ("kind", "x1", "x2", "xi1", "xi2", "weight")


def _fmt(v: float) -> str:
    v = float(v)
    if not np.isfinite(v):
        raise SnapshotFormatError("snapshot values must be finite")
    return format(v, ".17g")


def snapshot_lines(vortices: SignedAtomCloud, spray: PhaseAtomCloud) -> list[str]:
    lines = []
    for (x1, x2), w in zip(vortices.pos, vortices.weight):
        lines.append(
            f'{{"kind": "vortex", "x1": {_fmt(x1)}, "x2": {_fmt(x2)}, "xi1": null, "xi2": null, "weight": {_fmt(w)}}}'
        )
    for (x1, x2), (v1, v2), w in zip(spray.x, spray.xi, spray.weight):
        lines.append(
            f'{{"kind": "spray", "x1": {_fmt(x1)}, "x2": {_fmt(x2)}, '
            f'"xi1": {_fmt(v1)}, "xi2": {_fmt(v2)}, "weight": {_fmt(w)}}}'
        )
    return lines


def write_snapshot(path, vortices: SignedAtomCloud, spray: PhaseAtomCloud) -> None:
    text = "".join(line + "\n" for line in snapshot_lines(vortices, spray))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def parse_snapshot(text: str) -> tuple[SignedAtomCloud, PhaseAtomCloud]:
    vpos, vw, sx, sxi, sw = [], [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict) or set(rec) != set(SNAPSHOT_FIELDS):
            raise SnapshotFormatError(f"line {lineno}: expected fields {', '.join(SNAPSHOT_FIELDS)}")
        kind = rec["kind"]
        try:
            x = (float(rec["x1"]), float(rec["x2"]))
            w = float(rec["weight"])
            if kind == "vortex":
                if rec["xi1"] is not None or rec["xi2"] is not None:
                    raise SnapshotFormatError(f"line {lineno}: vortex records carry null velocities")
                vpos.append(x)
                vw.append(w)
            elif kind == "spray":
                sx.append(x)
                sxi.append((float(rec["xi1"]), float(rec["xi2"])))
                sw.append(w)
            else:
                raise SnapshotFormatError(f"line {lineno}: unknown kind {kind!r}")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SnapshotFormatError):
                raise
            raise SnapshotFormatError(f"line {lineno}: {exc}") from None
    vort = SignedAtomCloud(np.array(vpos).reshape(-1, 2), np.array(vw)) if vpos else SignedAtomCloud.empty()
    try:
        spray = PhaseAtomCloud(np.array(sx), np.array(sxi), np.array(sw)) if sx else PhaseAtomCloud.empty()
    except ValueError as exc:
        raise SnapshotFormatError(str(exc)) from None
    return vort, spray


def read_snapshot(path) -> tuple[SignedAtomCloud, PhaseAtomCloud]:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh.read())
