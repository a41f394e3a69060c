import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gyrospray.measures import (
    DiscretizationError,
    PhaseAtomCloud,
    SignedAtomCloud,
    SnapshotFormatError,
    aggregate_current,
    compatible,
    discretize_vorticity,
    jordan,
    kinetic_moment,
    marginals,
    merge_coincident,
    parse_snapshot,
    pushforward,
    read_snapshot,
    sample_spray,
    snapshot_lines,
    write_snapshot,
)
from gyrospray.presets import REFERENCE_CELLS, gaussian_bump

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
nonzero = st.floats(-10, 10, allow_nan=False).filter(lambda w: abs(w) > 1e-6)


@st.composite
def signed_clouds(draw, max_atoms=8):
    n = draw(st.integers(0, max_atoms))
    pos = [(draw(finite), draw(finite)) for _ in range(n)]
    w = [draw(nonzero) for _ in range(n)]
    return SignedAtomCloud(np.array(pos, dtype=float).reshape(-1, 2), np.array(w, dtype=float))


def cloud(*atoms):
    return SignedAtomCloud.from_atoms(atoms)


def test_zero_weights_dropped():
    c = SignedAtomCloud([[0, 0], [1, 1], [2, 2]], [1.0, 0.0, -2.0])
    assert len(c) == 2
    assert np.array_equal(c.weight, [1.0, -2.0])


def test_jordan_examples():
    p1, p2, p3 = (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)
    pos, neg = jordan(cloud((p1, 2.0), (p2, -1.0), (p3, 0.5)))
    assert pos.same_as(cloud((p1, 2.0), (p3, 0.5)))
    assert neg.same_as(cloud((p2, 1.0)))
    c = cloud((p1, 1.0), (p2, 3.0))
    pos, neg = jordan(c)
    assert pos.same_as(c) and len(neg) == 0
    pos, neg = jordan(SignedAtomCloud.empty())
    assert len(pos) == 0 and len(neg) == 0


def test_compatible_examples():
    a = cloud(((0, 0), 1.0), ((1, 0), -1.0))
    b = cloud(((5, 5), 1.0), ((2, 3), -1.0))
    assert compatible(a, b)
    assert not compatible(cloud(((0, 0), 1.0)), cloud(((1, 1), 2.0)))
    assert compatible(a, a, 0.0)
    with pytest.raises(ValueError):
        compatible(a, b, -1.0)


def test_pushforward_examples():
    c = pushforward(cloud(((0, 0), 2.0)), lambda x: x + 1.0)
    assert c.same_as(cloud(((1, 1), 2.0)))
    d = cloud(((1, 0), 1.0), ((0, 1), -1.0))
    assert pushforward(d, lambda x: x).same_as(d)
    assert pushforward(d, lambda x: 2 * x).same_as(cloud(((2, 0), 1.0), ((0, 2), -1.0)))


def test_marginals_examples():
    f = PhaseAtomCloud([[0, 0]], [[1, 0]], [1.0])
    rho, j = marginals(f)
    assert rho.same_as(cloud(((0, 0), 1.0)))
    assert len(j) == 1 and np.array_equal(j[0][0], [0, 0]) and np.array_equal(j[0][1], [1, 0])
    g = PhaseAtomCloud([[1, 1], [1, 1]], [[1, 0], [-1, 0]], [0.5, 0.5])
    agg = aggregate_current(marginals(g)[1])
    assert list(agg) == [(1.0, 1.0)] and np.array_equal(agg[(1.0, 1.0)], [0.0, 0.0])
    rho, j = marginals(PhaseAtomCloud.empty())
    assert len(rho) == 0 and j == []


def test_kinetic_moment_examples():
    f = PhaseAtomCloud([[0, 0], [1, 1]], [[1, 0], [-1, 0]], [0.5, 0.5])
    assert kinetic_moment(f, 0) == f.mass == 1.0
    assert kinetic_moment(PhaseAtomCloud([[0, 0]], [[3, 4]], [1.0]), 2) == 25.0
    assert kinetic_moment(f, 2) == 1.0
    assert kinetic_moment(PhaseAtomCloud([[0, 0]], [[3, 4]], [2.0]), 1) == 10.0
    with pytest.raises(ValueError):
        kinetic_moment(f, -1)


def test_phase_cloud_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        PhaseAtomCloud([[0, 0]], [[0, 0]], [0.0])
    with pytest.raises(ValueError):
        PhaseAtomCloud([[0, 0]], [[0, 0]], [-1.0])


def test_discretize_zero_and_constant():
    window = (-1.0, 1.0, -1.0, 1.0)
    assert len(discretize_vorticity(lambda x: np.zeros(len(x)), window, 4)) == 0
    c = discretize_vorticity(lambda x: np.ones(len(x)), window, 2)
    assert len(c) == 4
    np.testing.assert_allclose(c.weight, 1.0, rtol=1e-15)


@pytest.mark.parametrize("n", [8, 16, 32])
def test_discretize_masses_exact(n):
    omega = gaussian_bump((0.2, -0.1), 0.4, 1.5)
    window = (-2.0, 2.0, -2.0, 2.0)
    c = discretize_vorticity(omega, window, n)
    fine = discretize_vorticity(omega, window, 4 * n, ref_factor=1)
    # reference mass is the 4x-finer midpoint sum, reproduced exactly
    assert abs(c.positive_mass - fine.positive_mass) <= 1e-12
    assert c.negative_mass == 0.0
    # and close to the analytic integral over the window
    r2s = 0.4 * math.sqrt(2)
    fx = 0.5 * (math.erf(1.8 / r2s) + math.erf(2.2 / r2s))
    fy = 0.5 * (math.erf(2.1 / r2s) + math.erf(1.9 / r2s))
    assert c.positive_mass == pytest.approx(1.5 * fx * fy, rel=1e-4)


def test_discretize_signed_masses_at_fixed_reference():
    plus = gaussian_bump((-0.6, 0.0), 0.35, 1.0)
    minus = gaussian_bump((0.6, 0.0), 0.35, -0.7)
    omega = lambda x: plus(x) + minus(x)  # noqa: E731
    window = (-2.0, 2.0, -2.0, 2.0)
    clouds = [discretize_vorticity(omega, window, n, ref_n_per_side=REFERENCE_CELLS) for n in (5, 8, 13)]
    for c in clouds[1:]:
        assert abs(c.positive_mass - clouds[0].positive_mass) <= 1e-12
        assert abs(c.negative_mass - clouds[0].negative_mass) <= 1e-12
    # overlapping bumps cancel, only the net circulation is known in closed form
    assert clouds[0].mass == pytest.approx(0.3, rel=1e-3)


def test_discretize_invisible_mass_rejected():
    omega = lambda x: (np.hypot(x[:, 0] - 0.5, x[:, 1] - 0.5) < 0.2).astype(float)  # noqa: E731
    with pytest.raises(DiscretizationError):
        discretize_vorticity(omega, (-1, 1, -1, 1), 1, ref_n_per_side=64)
    with pytest.raises(DiscretizationError):
        discretize_vorticity(lambda x: -omega(x), (-1, 1, -1, 1), 1, ref_n_per_side=64)


def test_discretize_bad_arguments():
    with pytest.raises(ValueError):
        discretize_vorticity(lambda x: np.ones(len(x)), (0, 1, 0, 1), 0)
    with pytest.raises(ValueError):
        discretize_vorticity(lambda x: np.ones(len(x)), (1, 0, 0, 1), 2)


def gauss(rng, n):
    return rng.standard_normal((n, 2))


def test_sample_spray_examples():
    f = sample_spray(gauss, 3, 0, velocity_field=lambda x: np.zeros_like(x))
    assert len(f) == 3 and np.array_equal(f.xi, np.zeros((3, 2)))
    np.testing.assert_array_equal(f.weight, [1 / 3] * 3)
    a = sample_spray(gauss, 50, 42, velocity_sampler=lambda g, x: g.standard_normal(x.shape))
    b = sample_spray(gauss, 50, 42, velocity_sampler=lambda g, x: g.standard_normal(x.shape))
    assert a.same_as(b)
    big = sample_spray(gauss, 10_000, 7)
    # 3 sigma / sqrt(N) with sigma = 1
    assert np.all(np.abs(big.x.mean(axis=0)) < 0.05)


def test_sample_spray_bad_arguments():
    with pytest.raises(ValueError):
        sample_spray(gauss, 0, 0)
    with pytest.raises(ValueError):
        sample_spray(gauss, 2, 0, velocity_field=lambda x: x, velocity_sampler=lambda g, x: x)


def test_merge_coincident():
    c = cloud(((0, 0), 1.0), ((0, 0), -1.0), ((1, 0), 2.0), ((1, 0), 0.5))
    m = merge_coincident(c)
    assert m.same_as(cloud(((1, 0), 2.5)))
    assert len(c) == 4  # never merged implicitly


def _state(rng):
    v = SignedAtomCloud(rng.normal(size=(5, 2)), rng.normal(size=5))
    f = PhaseAtomCloud(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), rng.uniform(0.1, 1, 4))
    return v, f


def test_snapshot_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    v, f = _state(rng)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_snapshot(p1, v, f)
    v2, f2 = read_snapshot(p1)
    assert v2.same_as(v) and f2.same_as(f)
    write_snapshot(p2, v2, f2)
    assert p1.read_bytes() == p2.read_bytes()


def test_snapshot_empty_round_trip(tmp_path):
    p = tmp_path / "e.jsonl"
    write_snapshot(p, SignedAtomCloud.empty(), PhaseAtomCloud.empty())
    v, f = read_snapshot(p)
    assert len(v) == 0 and len(f) == 0


def test_snapshot_records_have_null_vortex_velocity():
    line = snapshot_lines(cloud(((1, 2), -0.5)), PhaseAtomCloud.empty())[0]
    assert '"xi1": null' in line and '"kind": "vortex"' in line


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        '{"kind": "vortex", "x1": 0, "x2": 0, "weight": 1}',
        '{"kind": "vortex", "x1": 0, "x2": 0, "xi1": 1, "xi2": null, "weight": 1}',
        '{"kind": "blob", "x1": 0, "x2": 0, "xi1": null, "xi2": null, "weight": 1}',
        '{"kind": "spray", "x1": 0, "x2": 0, "xi1": null, "xi2": 0, "weight": 1}',
        '{"kind": "spray", "x1": 0, "x2": 0, "xi1": 0, "xi2": 0, "weight": -1}',
        '{"kind": "spray", "x1": 0, "x2": 0, "xi1": 0, "xi2": 0, "weight": 1, "extra": 2}',
    ],
)
def test_snapshot_format_errors(text):
    with pytest.raises(SnapshotFormatError):
        parse_snapshot(text)


def test_snapshot_rejects_non_finite(tmp_path):
    with pytest.raises(SnapshotFormatError):
        write_snapshot(tmp_path / "x.jsonl", cloud(((float("nan"), 0), 1.0)), PhaseAtomCloud.empty())


@given(signed_clouds())
def test_jordan_is_a_partition(c):
    pos, neg = jordan(c)
    assert np.all(pos.weight > 0) and np.all(neg.weight > 0)
    assert len(pos) + len(neg) == len(c)
    back = pos - neg
    order = np.lexsort((back.weight, back.pos[:, 1], back.pos[:, 0])) if len(back) else []
    ref = np.lexsort((c.weight, c.pos[:, 1], c.pos[:, 0])) if len(c) else []
    assert np.array_equal(back.pos[order], c.pos[ref]) and np.array_equal(back.weight[order], c.weight[ref])
    assert pos.mass == c.positive_mass and neg.mass == c.negative_mass


@given(signed_clouds(), st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5))
def test_pushforward_preserves_weights(c, a, b, s):
    d = pushforward(c, lambda x: s * x + np.array([a, b]))
    assert np.array_equal(d.weight, c.weight)
    assert d.total_variation == c.total_variation


@settings(max_examples=50)
@given(signed_clouds(), signed_clouds(), signed_clouds())
def test_compatible_is_an_equivalence_at_fixed_masses(a, b, c):
    assert compatible(a, a, 0.0)
    assert compatible(a, b, 0.0) == compatible(b, a, 0.0)
    if compatible(a, b, 0.0) and compatible(b, c, 0.0):
        assert compatible(a, c, 0.0)


@given(st.integers(1, 20), st.integers(0, 2**32))
def test_kinetic_moment_zero_is_mass(n, seed):
    f = sample_spray(gauss, n, seed, velocity_sampler=lambda g, x: g.standard_normal(x.shape))
    assert kinetic_moment(f, 0) == f.mass
