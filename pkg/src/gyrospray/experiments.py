"""Seeded scenario drivers that turn convergence and stability claims into
pass/fail reports.

Every scenario returns an ``ExperimentReport`` whose verdicts are a pure
function of its metric tables and stated thresholds; ``recompute_verdicts``
re-derives them from a stored report.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import presets
from .config import ConfigError, SimConfig, cell_rng
from .diagnostics import gyration_energy, gyration_envelope, hamiltonian
from .dynamics import (
    STIFF_FACTOR,
    CouplingParams,
    SprayState,
    as_pure_vortices,
    integrate,
    resolve_scheme,
)
from .kernels import BlobKernel, kernel_bounds
from .measures import PhaseAtomCloud, SignedAtomCloud
from .transport import w1_phase, w1_signed

TREND_BAND = 0.10
TREND_INVERSIONS = 1
HYDRO_FACTOR = 3.0
COINCIDENCE_TOL = 1e-12
ORDER_BAND = (8.0, 32.0)
DRIFT_TOL = 1e-6
STABILITY_FACTOR = 4.0
MONOKINETIC = ("rotation", "uniform_flow", "rest", "none")

MASSLESS_NOTE = (
    "The massless limit is a weak convergence statement along subsequences. "
    "D(t) is the W1 distance of the combined clouds, a stronger probe, so a "
    "failed trend here would not by itself contradict that statement."
)


class DegeneratePerturbationError(ValueError):
    """The perturbed initial data coincides with the base data."""


@dataclass
class ExperimentReport:
    scenario: str
    config: dict[str, Any]
    config_hash: str
    seed: int
    grid: dict[str, Any]
    tables: dict[str, dict[str, list]]  # name -> {"columns": [...], "rows": [[...]]}
    thresholds: dict[str, Any]
    verdicts: dict[str, bool | None]
    notes: str = ""

    @property
    def passed(self) -> bool:
        return all(v is not False for v in self.verdicts.values())

    def column(self, table: str, name: str) -> list:
        t = self.tables[table]
        i = t["columns"].index(name)
        return [r[i] for r in t["rows"]]

    def to_json(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "grid": self.grid,
            "tables": self.tables,
            "thresholds": self.thresholds,
            "verdicts": self.verdicts,
            "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @property
    def stem(self) -> str:
        return f"{self.scenario}-{self.config_hash}"

    def write(self, out_dir: str) -> list[str]:
        """Write the JSON report and one CSV per metric table."""
        os.makedirs(out_dir, exist_ok=True)
        paths = [os.path.join(out_dir, f"{self.stem}.report.json")]
        with open(paths[0], "w") as fh:
            fh.write(self.dumps())
        for name, t in self.tables.items():
            p = os.path.join(out_dir, f"{self.stem}.{name}.csv")
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(t["columns"])
                for row in t["rows"]:
                    w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v) for v in row])
            paths.append(p)
        return paths


def _table(columns: list[str], rows: list[list]) -> dict[str, list]:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _report(cfg: SimConfig, grid, tables, thresholds, notes: str = "") -> ExperimentReport:
    config = {k: v for k, v in cfg.to_json().items() if k != "out"}
    rep = ExperimentReport(cfg.scenario, config, cfg.hash(), cfg.seed, grid, tables, thresholds, {}, notes)
    rep.verdicts = VERDICTS[cfg.scenario](rep)
    return rep


def recompute_verdicts(report: ExperimentReport | dict) -> dict[str, bool | None]:
    if isinstance(report, dict):
        report = ExperimentReport(**report)
    return VERDICTS[report.scenario](report)


# -- shared helpers ----------------------------------------------------------


def trend_ok(values, band: float = TREND_BAND, inversions: int = TREND_INVERSIONS, strict: bool = False) -> bool:
    """Non-increasing (or strictly decreasing) up to ``inversions`` steps
    that rise by at most ``band`` relative to their predecessor."""
    values = list(values)
    bad = [i for i in range(len(values) - 1) if (values[i + 1] >= values[i] if strict else values[i + 1] > values[i])]
    if len(bad) > inversions:
        return False
    return all(values[i + 1] <= (1.0 + band) * values[i] for i in bad)


def coupling(cfg: SimConfig, epsilon: float | None = None, delta: float | None = None) -> CouplingParams:
    return CouplingParams(cfg.delta if delta is None else delta, cfg.epsilon if epsilon is None else epsilon)


def initial_state(cfg: SimConfig, rng: np.random.Generator, n: int | None = None, m: int | None = None) -> SprayState:
    n = cfg.N if n is None else n
    m = cfg.M if m is None else m
    return SprayState(presets.vortices(cfg.vortex_preset, n, rng), presets.spray(cfg.spray_preset, m, rng, cfg.omega))


def _observe(cfg: SimConfig, s0: SprayState, k: CouplingParams, dt: float | None = None, scheme: str | None = None):
    dt = cfg.dt if dt is None else dt
    return integrate(s0, k, cfg.T, dt, cfg.scheme if scheme is None else scheme, cfg.cadence_for(dt))


def _median(values) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


# -- mean field --------------------------------------------------------------


def run_meanfield(cfg: SimConfig) -> ExperimentReport:
    """W1 pair distance between N-atom runs and one N_ref-atom run.

    Cell streams are keyed by (seed, replicate, N), so a grid entry equal
    to N_ref reproduces the reference atoms exactly.
    """
    k = coupling(cfg)
    n_grid = sorted(cfg.n_grid)
    n_ref = cfg.n_ref if cfg.n_ref is not None else 4 * max(n_grid)

    def run(rep: int, n: int):
        return _observe(cfg, initial_state(cfg, cell_rng(cfg.seed, rep, n), n, n), k)

    rows = []
    for rep in range(cfg.replicates):
        ref = run(rep, n_ref)
        for n in n_grid:
            traj = run(rep, n)
            for s, r in zip(traj, ref):
                dv = w1_signed(s.vortices, r.vortices)
                ds = w1_phase(s.spray, r.spray)
                rows.append([rep, n, s.time, dv, ds, dv + ds])
    final_time = rows[-1][2]
    final = []
    for n in n_grid:
        vals = [r[5] for r in rows if r[1] == n and r[2] == final_time]
        final.append([n, _median(vals)])
    tables = {
        "distance": _table(["replicate", "N", "time", "w1_vortex", "w1_spray", "w1_pair"], rows),
        "final": _table(["N", "median_w1_pair"], final),
    }
    grid = {"N": n_grid, "N_ref": n_ref, "replicates": cfg.replicates, "delta": cfg.delta, "epsilon": cfg.epsilon, "dt": cfg.dt, "T": cfg.T}
    thresholds = {"trend_band": TREND_BAND, "trend_inversions": TREND_INVERSIONS}
    return _report(cfg, grid, tables, thresholds)


def _meanfield_verdicts(rep: ExperimentReport):
    col = rep.column("final", "median_w1_pair")
    th = rep.thresholds
    return {"nonincreasing_in_N": trend_ok(col, th["trend_band"], th["trend_inversions"])}


# -- stability ---------------------------------------------------------------


def stability_constant(delta: float, tv_vorticity: float) -> float:
    _, lip = kernel_bounds(BlobKernel(delta))
    return STABILITY_FACTOR * max(lip, 1.0) * (1.0 + tv_vorticity)


def _unit_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    th = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([np.cos(th), np.sin(th)])


def perturb(s: SprayState, eta: float, rng: np.random.Generator) -> SprayState:
    """Move every atom (vortex or spray position) by ``eta`` in a random direction."""
    dv = eta * _unit_directions(rng, len(s.vortices))
    ds = eta * _unit_directions(rng, len(s.spray))
    return SprayState(
        SignedAtomCloud(s.vortices.pos + dv, s.vortices.weight),
        PhaseAtomCloud(s.spray.x + ds, s.spray.xi, s.spray.weight),
        s.time,
    )


def _pair_distance(s1: SprayState, s2: SprayState) -> float:
    return w1_signed(s1.vortices, s2.vortices) + w1_phase(s1.spray, s2.spray)


def run_stability(cfg: SimConfig) -> ExperimentReport:
    if cfg.eta == 0:
        raise DegeneratePerturbationError("eta = 0 gives a zero initial distance")
    k = coupling(cfg)
    rows = []
    c_bounds = []
    for rep in range(cfg.replicates):
        base = initial_state(cfg, cell_rng(cfg.seed, rep, 0))
        pert = perturb(base, cfg.eta, cell_rng(cfg.seed, rep, 1))
        c_bound = stability_constant(cfg.delta, base.vortices.total_variation)
        c_bounds.append(c_bound)
        t1 = _observe(cfg, base, k)
        t2 = _observe(cfg, pert, k)
        d0 = _pair_distance(t1[0], t2[0])
        if not d0 > 0:
            raise DegeneratePerturbationError("perturbed data has zero W1 distance to the base data")
        for s1, s2 in zip(t1, t2):
            d = _pair_distance(s1, s2)
            rows.append([rep, s1.time, d, d / d0, math.exp(2.0 * c_bound * s1.time)])
    tables = {"ratio": _table(["replicate", "time", "w1_pair", "ratio", "envelope"], rows)}
    grid = {"replicates": cfg.replicates, "eta": cfg.eta, "delta": cfg.delta, "epsilon": cfg.epsilon, "N": cfg.N, "M": cfg.M, "dt": cfg.dt, "T": cfg.T}
    thresholds = {"C_bound": c_bounds, "stability_factor": STABILITY_FACTOR}
    return _report(cfg, grid, tables, thresholds)


def _stability_verdicts(rep: ExperimentReport):
    c = rep.thresholds["C_bound"]
    ok = all(r <= math.exp(2.0 * c[i] * t) for i, t, r in zip(rep.column("ratio", "replicate"), rep.column("ratio", "time"), rep.column("ratio", "ratio")))
    return {"ratio_below_envelope": ok}


# -- hydrodynamic regime -----------------------------------------------------


def monokinetic_lipschitz(f: PhaseAtomCloud, radius: float) -> float | None:
    """max |xi_i - xi_j| / |h_i - h_j| over pairs with 0 < |h_i - h_j| <= radius."""
    if len(f) < 2:
        return None
    dh = np.linalg.norm(f.x[:, None, :] - f.x[None, :, :], axis=2)
    dxi = np.linalg.norm(f.xi[:, None, :] - f.xi[None, :, :], axis=2)
    mask = (dh > 0) & (dh <= radius)
    if not mask.any():
        return None
    return float(np.max(dxi[mask] / dh[mask]))


def _with_duplicates(f: PhaseAtomCloud, copies: int) -> PhaseAtomCloud:
    """Replace the last ``copies`` atoms by copies of the first ones."""
    n = len(f)
    if copies == 0:
        return f
    if 2 * copies > n:
        raise ConfigError("duplicates", f"at most M/2 = {n // 2} duplicates for M = {n}")
    x = np.vstack([f.x[: n - copies], f.x[:copies]])
    xi = np.vstack([f.xi[: n - copies], f.xi[:copies]])
    return PhaseAtomCloud(x, xi, f.weight)


def run_hydro(cfg: SimConfig) -> ExperimentReport:
    if cfg.spray_preset not in MONOKINETIC:
        raise ConfigError("spray_preset", f"hydro needs a monokinetic preset, one of {list(MONOKINETIC)}")
    k = coupling(cfg)
    s0 = initial_state(cfg, cell_rng(cfg.seed, 0))
    s0 = SprayState(s0.vortices, _with_duplicates(s0.spray, cfg.duplicates), s0.time)
    m = len(s0.spray)
    rows = []
    for s in _observe(cfg, s0, k):
        gap = 0.0
        for i in range(cfg.duplicates):
            j = m - cfg.duplicates + i
            gap = max(gap, float(np.max(np.abs(s.spray.x[i] - s.spray.x[j]))), float(np.max(np.abs(s.spray.xi[i] - s.spray.xi[j]))))
        rows.append([s.time, monokinetic_lipschitz(s.spray, cfg.radius), gap])
    tables = {"lipschitz": _table(["time", "lipschitz_ratio", "duplicate_gap"], rows)}
    grid = {"M": m, "N": len(s0.vortices), "radius": cfg.radius, "omega": cfg.omega, "delta": cfg.delta, "epsilon": cfg.epsilon, "dt": cfg.dt, "T": cfg.T}
    thresholds = {"lipschitz_factor": HYDRO_FACTOR, "coincidence_tol": COINCIDENCE_TOL}
    return _report(cfg, grid, tables, thresholds)


def _hydro_verdicts(rep: ExperimentReport):
    ratios = rep.column("lipschitz", "lipschitz_ratio")
    gaps = rep.column("lipschitz", "duplicate_gap")
    th = rep.thresholds
    first = ratios[0]
    # a zero or undefined initial ratio leaves a relative bound meaningless
    if first is None or first == 0:
        bounded = None
    else:
        bounded = all(r is None or r <= th["lipschitz_factor"] * first for r in ratios)
    return {"lipschitz_bounded": bounded, "duplicates_coincide": all(g <= th["coincidence_tol"] for g in gaps)}


# -- conservation ------------------------------------------------------------


def run_conservation(cfg: SimConfig) -> ExperimentReport:
    """Relative Hamiltonian drift max_t |H(t) - H(0)| / (1 + |H(0)|) on dt, dt/2, ...

    Coarser levels observe every ``cadence`` steps and each halving doubles
    the cadence, so all levels share observation times.
    """
    k = coupling(cfg)
    s0 = initial_state(cfg, cell_rng(cfg.seed, 0))
    h0 = hamiltonian(s0, k)
    base_cadence = cfg.cadence_for(cfg.dt)
    drift_rows, series = [], []
    schemes = []
    for level in range(cfg.dt_levels):
        dt = cfg.dt / 2**level
        scheme = resolve_scheme(cfg.scheme, k, dt)
        schemes.append(scheme)
        traj = integrate(s0, k, cfg.T, dt, scheme, base_cadence * 2**level)
        drift = 0.0
        for s in traj:
            h = hamiltonian(s, k)
            series.append([dt, s.time, h])
            drift = max(drift, abs(h - h0) / (1.0 + abs(h0)))
        prev = drift_rows[-1][1] if drift_rows else None
        ratio = prev / drift if prev is not None and drift > 0 else None
        drift_rows.append([dt, drift, ratio])
    tables = {
        "drift": _table(["dt", "drift", "ratio"], drift_rows),
        "series": _table(["dt", "time", "hamiltonian"], series),
    }
    grid = {"dt": [r[0] for r in drift_rows], "scheme": schemes, "N": len(s0.vortices), "M": len(s0.spray), "delta": cfg.delta, "epsilon": cfg.epsilon, "T": cfg.T}
    thresholds = {"order_band": list(ORDER_BAND), "drift_tol": DRIFT_TOL}
    return _report(cfg, grid, tables, thresholds)


def _conservation_verdicts(rep: ExperimentReport):
    lo, hi = rep.thresholds["order_band"]
    ratios = [r for r in rep.column("drift", "ratio")[1:] if r is not None]
    order = None if not ratios else all(lo <= r <= hi for r in ratios)
    finest = rep.column("drift", "drift")[-1]
    return {"order_ratios_in_band": order, "finest_drift_small": finest <= rep.thresholds["drift_tol"]}


# -- massless limit ----------------------------------------------------------


def run_massless(cfg: SimConfig) -> ExperimentReport:
    """Combined-cloud distance D(t) to the pure-vortex evolution of the same atoms."""
    eps_grid = sorted(cfg.eps_grid, reverse=True)
    if cfg.scheme == "rk4":
        stiff = [e for e in eps_grid if e < STIFF_FACTOR * cfg.dt]
        if stiff:
            raise ConfigError("scheme", f"rk4 is unstable for epsilon {stiff[0]!r} < {STIFF_FACTOR:g} dt; use the split scheme")
    base = initial_state(cfg, cell_rng(cfg.seed, 0))
    base = presets.well_prepared(base, coupling(cfg))
    ref = _observe(cfg, as_pure_vortices(base), coupling(cfg), scheme="rk4")
    rows, final = [], []
    for eps in eps_grid:
        k = coupling(cfg, epsilon=eps)
        env = gyration_envelope(base, k)
        traj = _observe(cfg, base, k)
        for s, r in zip(traj, ref):
            d = w1_signed(s.combined(), r.vortices)
            rows.append([eps, s.time, d, gyration_energy(s, k), float(env(s.time))])
        final.append([eps, rows[-1][2]])
    tables = {
        "distance": _table(["epsilon", "time", "D", "eps_kinetic", "envelope"], rows),
        "final": _table(["epsilon", "D_final"], final),
    }
    grid = {"epsilon": eps_grid, "N": len(base.vortices), "M": len(base.spray), "delta": cfg.delta, "dt": cfg.dt, "T": cfg.T, "scheme": cfg.scheme}
    thresholds = {"trend": "strictly decreasing", "envelope": "eps * mass * ((U + W0) exp(2 L TV t) - U)^2"}
    return _report(cfg, grid, tables, thresholds, MASSLESS_NOTE)


def _massless_verdicts(rep: ExperimentReport):
    times = rep.column("distance", "time")
    d = rep.column("distance", "D")
    kin = rep.column("distance", "eps_kinetic")
    env = rep.column("distance", "envelope")
    t0 = times[0]
    final = rep.column("final", "D_final")
    return {
        "initial_distance_zero": all(x == 0.0 for t, x in zip(times, d) if t == t0),
        "decreasing_in_epsilon": None if len(final) < 2 else trend_ok(final, 0.0, 0, strict=True),
        "kinetic_below_envelope": all(a <= b for a, b in zip(kin, env)),
    }


VERDICTS: dict[str, Callable[[ExperimentReport], dict]] = {
    "meanfield": _meanfield_verdicts,
    "stability": _stability_verdicts,
    "hydro": _hydro_verdicts,
    "conservation": _conservation_verdicts,
    "massless": _massless_verdicts,
}

RUNNERS: dict[str, Callable[[SimConfig], ExperimentReport]] = {
    "meanfield": run_meanfield,
    "stability": run_stability,
    "hydro": run_hydro,
    "conservation": run_conservation,
    "massless": run_massless,
}


def run(cfg: SimConfig) -> ExperimentReport:
    if cfg.scenario not in RUNNERS:
        raise ConfigError("scenario", f"{cfg.scenario!r} is not an experiment")
    return RUNNERS[cfg.scenario](cfg)


__all__ = [
    "DegeneratePerturbationError",
    "ExperimentReport",
    "RUNNERS",
    "monokinetic_lipschitz",
    "perturb",
    "recompute_verdicts",
    "run",
    "run_conservation",
    "run_hydro",
    "run_massless",
    "run_meanfield",
    "run_stability",
    "stability_constant",
    "trend_ok",
]
