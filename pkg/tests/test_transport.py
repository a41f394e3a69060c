import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from gyrospray._simplex import certify, solve_transport
from gyrospray.measures import PhaseAtomCloud, SignedAtomCloud, marginals, pushforward
from gyrospray.transport import (
    Cones,
    IncompatibleMeasuresError,
    OracleScopeError,
    brute_force_w1,
    dual_lower_bound,
    kantorovich_potential,
    w1_pair,
    w1_phase,
    w1_signed,
    w2_signed,
    w_p_positive,
    wasserstein_points,
)


def cloud(*atoms):
    return SignedAtomCloud.from_atoms(atoms)


def lp_cost(xs, a, ys, b, p):
    """Transportation LP solved by HiGHS, the independent oracle."""
    m, n = len(a), len(b)
    c = np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=2) ** p
    rows = np.zeros((m + n, m * n))
    for i in range(m):
        rows[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        rows[m + j, j::n] = 1.0
    res = linprog(c.ravel(), A_eq=rows, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def signed_cloud(rng, n_pos, n_neg, pos_mass, neg_mass, spread=1.0, equal=False):
    wp = np.ones(n_pos) if equal else rng.uniform(0.2, 1.0, n_pos)
    wn = np.ones(n_neg) if equal else rng.uniform(0.2, 1.0, n_neg)
    w = np.concatenate([wp * pos_mass / wp.sum() if n_pos else wp, -(wn * neg_mass / wn.sum()) if n_neg else wn])
    return SignedAtomCloud(spread * rng.normal(size=(n_pos + n_neg, 2)), w)


def compatible_triple(rng):
    p, q = rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0)
    nq = lambda: int(rng.integers(1, 5)) if q > 0.3 else 0  # noqa: E731
    q = q if q > 0.3 else 0.0
    return [signed_cloud(rng, int(rng.integers(1, 6)), nq(), p, q) for _ in range(3)]


# -- worked examples ---------------------------------------------------------


def test_positive_examples():
    assert w_p_positive(cloud(((0, 0), 1.0)), cloud(((3, 4), 1.0)), 1)[0] == pytest.approx(5.0, abs=1e-12)
    mu = cloud(((0, 0), 1.0), ((1, 0), 1.0))
    nu = cloud(((0, 1), 1.0), ((2, 0), 1.0))
    d, plan = w_p_positive(mu, nu, 1)
    assert d == pytest.approx(2.0, abs=1e-12)
    pairs = {(int(i), int(j)) for i, j, _ in plan.pairs}
    assert pairs == {(0, 0), (1, 1)}
    for p in (1, 2):
        assert w_p_positive(mu, mu, p)[0] == 0.0


def test_signed_examples():
    a = cloud(((0, 0), 1.0), ((1, 0), -1.0))
    b = cloud(((0.5, 0), 1.0), ((1.5, 0), -1.0))
    assert w1_signed(a, b) == pytest.approx(1.0, abs=1e-12)
    assert w1_signed(a, a) == 0.0
    assert w2_signed(a, b) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert w2_signed(a, a) == 0.0
    mu = cloud(((0, 0), 1.0), ((1, 0), 1.0))
    nu = cloud(((0, 1), 1.0), ((2, 0), 1.0))
    assert w1_signed(mu, nu) == pytest.approx(w_p_positive(mu, nu, 1)[0], abs=1e-12)
    assert w2_signed(mu, nu) == pytest.approx(w_p_positive(mu, nu, 2)[0], abs=1e-12)


def test_pair_examples():
    a = cloud(((0, 0), 1.0), ((1, 0), -1.0))
    b = cloud(((0.5, 0), 1.0), ((1.5, 0), -1.0))
    f = PhaseAtomCloud([[0, 0]], [[0, 0]], [1.0])
    g = PhaseAtomCloud([[1, 0]], [[0, 0]], [1.0])
    assert w1_pair((a, f), (a, f)) == 0.0
    assert w1_pair((a, f), (b, f)) == pytest.approx(1.0, abs=1e-12)
    assert w1_pair((a, f), (a, g)) == pytest.approx(1.0, abs=1e-12)


def test_phase_distance_uses_joint_euclidean_norm():
    f = PhaseAtomCloud([[0, 0]], [[0, 0]], [1.0])
    g = PhaseAtomCloud([[1, 0]], [[0, 2]], [1.0])
    assert w1_phase(f, g) == pytest.approx(math.sqrt(5.0), abs=1e-12)
    assert w1_phase(PhaseAtomCloud.empty(), PhaseAtomCloud.empty()) == 0.0
    with pytest.raises(IncompatibleMeasuresError):
        w1_phase(f, PhaseAtomCloud.empty())


def test_dual_examples():
    a = cloud(((0, 0), 1.0), ((1, 0), -1.0))
    b = cloud(((0.5, 0), 1.0), ((1.5, 0), -1.0))
    assert dual_lower_bound(a, b, lambda x: np.full(len(x), 7.0)) == pytest.approx(0.0, abs=1e-15)
    single = dual_lower_bound(cloud(((0, 0), 1.0)), cloud(((3, 4), 1.0)), Cones([[3, 4]], sign=1.0))
    assert single == pytest.approx(5.0, abs=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(50):
        anchors, offsets = rng.normal(size=(3, 2)), rng.normal(size=3)
        v = dual_lower_bound(a, b, Cones(anchors, offsets, sign=1.0))
        w = dual_lower_bound(a, b, Cones(anchors, offsets, sign=-1.0))
        # phi and -phi are both admissible, so only |v| is bounded by the primal
        assert w == pytest.approx(-v, abs=1e-12)
        assert 0.0 <= max(v, w) <= 1.0 + 1e-9


def test_brute_force_examples():
    a = cloud(((0, 0), 1.0), ((1, 0), -1.0))
    b = cloud(((0.5, 0), 1.0), ((1.5, 0), -1.0))
    assert brute_force_w1(a, b) == pytest.approx(1.0, abs=1e-12)
    assert brute_force_w1(cloud(((0, 0), 1.0)), cloud(((3, 4), 1.0))) == pytest.approx(5.0)
    mu = cloud(((0, 0), 1.0), ((1, 0), 1.0))
    nu = cloud(((0, 1), 1.0), ((2, 0), 1.0))
    assert brute_force_w1(mu, nu) == pytest.approx(2.0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = SignedAtomCloud(rng.normal(size=(3, 2)), np.ones(3))
        y = SignedAtomCloud(rng.normal(size=(3, 2)), np.ones(3))
        assert abs(brute_force_w1(x, y) - w_p_positive(x, y, 1)[0]) <= 1e-9


# -- errors ------------------------------------------------------------------


def test_mass_mismatch_and_empty_inputs():
    with pytest.raises(IncompatibleMeasuresError):
        w_p_positive(cloud(((0, 0), 1.0)), cloud(((1, 0), 2.0)))
    with pytest.raises(ValueError):
        w_p_positive(SignedAtomCloud.empty(), cloud(((1, 0), 1.0)))
    with pytest.raises(ValueError):
        w_p_positive(cloud(((0, 0), -1.0)), cloud(((1, 0), -1.0)))
    with pytest.raises(IncompatibleMeasuresError):
        w1_signed(cloud(((0, 0), 1.0), ((1, 0), -1.0)), cloud(((0, 0), 1.0), ((1, 0), -2.0)))
    with pytest.raises(IncompatibleMeasuresError):
        w2_signed(cloud(((0, 0), 1.0)), cloud(((0, 0), 1.5)))
    with pytest.raises(ValueError):
        wasserstein_points([[0, 0]], [1.0], [[1, 1]], [1.0], p=3)


def test_mismatch_within_tolerance_is_rescaled():
    d, plan = w_p_positive(cloud(((0, 0), 1.0)), cloud(((3, 4), 1.0 + 1e-12)))
    assert d == pytest.approx(5.0, abs=1e-10)


def test_empty_signed_pair_is_zero():
    e = SignedAtomCloud.empty()
    assert w1_signed(e, e) == 0.0 and w2_signed(e, e) == 0.0


def test_oracle_scope():
    big = SignedAtomCloud(np.random.default_rng(0).normal(size=(9, 2)), np.ones(9))
    with pytest.raises(OracleScopeError):
        brute_force_w1(big, big)
    with pytest.raises(OracleScopeError):
        brute_force_w1(cloud(((0, 0), 2.0), ((1, 0), 1.0)), cloud(((0, 1), 3.0)))
    with pytest.raises(OracleScopeError):
        brute_force_w1(cloud(((0, 0), 2.0), ((1, 0), 1.0)), cloud(((0, 1), 1.0), ((2, 1), 2.0)))


def test_cones_validation():
    with pytest.raises(ValueError):
        Cones(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        Cones([[0, 0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Cones([[0, 0]], sign=2.0)
    with pytest.raises(ValueError):
        Cones([[0, 0]], mode="mean")


# -- solver against independent oracles --------------------------------------


@pytest.mark.parametrize("p", [1, 2])
def test_solver_matches_linear_programming(p):
    rng = np.random.default_rng(10 + p)
    for _ in range(40):
        m, n = rng.integers(1, 15, size=2)
        dim = int(rng.choice([2, 4]))
        xs, ys = rng.normal(size=(m, dim)), rng.normal(size=(n, dim))
        a, b = rng.uniform(0.1, 1, m), rng.uniform(0.1, 1, n)
        b *= a.sum() / b.sum()
        _, plan = wasserstein_points(xs, a, ys, b, p)
        ref = lp_cost(xs, a, ys, b, p)
        assert abs(plan.cost - ref) <= 1e-9 * (1 + ref)
        re, ce = plan.marginal_errors(a, b)
        assert re <= 1e-9 * a.sum() and ce <= 1e-9 * a.sum()


def test_solver_on_degenerate_instances():
    rng = np.random.default_rng(3)
    # many coincident points and integer-grid ties
    for _ in range(30):
        m, n = rng.integers(2, 12, size=2)
        xs = rng.integers(0, 3, size=(m, 2)).astype(float)
        ys = rng.integers(0, 3, size=(n, 2)).astype(float)
        a, b = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
        for p in (1, 2):
            _, plan = wasserstein_points(xs, a, ys, b, p)
            assert abs(plan.cost - lp_cost(xs, a, ys, b, p)) <= 1e-9
    same = np.zeros((5, 2))
    assert wasserstein_points(same, np.ones(5), same, np.ones(5))[0] == 0.0


def test_certificate_reports_optimality():
    rng = np.random.default_rng(4)
    xs, ys = rng.normal(size=(60, 2)), rng.normal(size=(45, 2))
    a, b = np.full(60, 1 / 60), np.full(45, 1 / 45)
    pairs, cost, pi, info = solve_transport(xs, a, ys, b, 1)
    cert = certify(xs, a, ys, b, pairs, pi, 1, info["max_cost"])
    assert cert["feasible"] and cert["dual_feasible"] and cert["complementary"]
    # a perturbed plan fails the certificate
    bad = pairs.copy()
    bad[0, 2] *= 1.5
    assert not certify(xs, a, ys, b, bad, pi, 1, info["max_cost"])["feasible"]


def test_moderately_large_instance():
    rng = np.random.default_rng(5)
    xs, ys = rng.normal(size=(800, 4)), rng.normal(size=(600, 4))
    d, plan = wasserstein_points(xs, np.full(800, 1 / 800), ys, np.full(600, 1 / 600), 1)
    assert 0 < d < 10
    assert len(plan.pairs) <= 800 + 600 - 1


def test_oracle_equivalence_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        split = int(rng.integers(0, n + 1))
        # positive part of a plus negative part of b has n unit atoms, and so does the other side
        a = SignedAtomCloud(rng.normal(size=(n, 2)), np.r_[np.ones(split), -np.ones(n - split)])
        b = SignedAtomCloud(rng.normal(size=(n, 2)), np.r_[np.ones(split), -np.ones(n - split)])
        oracle = brute_force_w1(a, b)
        assert abs(w1_signed(a, b) - oracle) <= 1e-9 * (1 + oracle)


# -- metric laws -------------------------------------------------------------


def test_metric_laws_randomized():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a, b, c = compatible_triple(rng)
        ab, bc, ac = w1_signed(a, b), w1_signed(b, c), w1_signed(a, c)
        assert w1_signed(b, a) == pytest.approx(ab, abs=1e-12)
        assert ac <= ab + bc + 1e-9
        # a common cloud cancels exactly
        common = signed_cloud(rng, 3, 2, rng.uniform(0.1, 1), rng.uniform(0.1, 1))
        assert abs(w1_signed(a + common, b + common) - ab) <= 1e-9


def test_subadditivity_randomized():
    rng = np.random.default_rng(8)
    for _ in range(100):
        a, b, _ = compatible_triple(rng)
        c, d, _ = compatible_triple(rng)
        assert w1_signed(a + c, b + d) <= w1_signed(a, b) + w1_signed(c, d) + 1e-9


def test_pushforward_contraction_randomized():
    rng = np.random.default_rng(9)
    for _ in range(100):
        a, b, _ = compatible_triple(rng)
        A = rng.normal(size=(2, 2))
        shift = rng.normal(size=2)
        tau = lambda x: x @ A.T + shift  # noqa: E731
        lip = np.linalg.norm(A, 2)
        assert w1_signed(pushforward(a, tau), pushforward(b, tau)) <= lip * w1_signed(a, b) + 1e-9


def test_marginal_contraction_randomized():
    rng = np.random.default_rng(10)
    for _ in range(100):
        n, m = rng.integers(1, 8, size=2)
        f = PhaseAtomCloud(rng.normal(size=(n, 2)), rng.normal(size=(n, 2)), np.full(n, 1.0 / n))
        g = PhaseAtomCloud(rng.normal(size=(m, 2)), rng.normal(size=(m, 2)), np.full(m, 1.0 / m))
        assert w1_signed(marginals(f)[0], marginals(g)[0]) <= w1_phase(f, g) + 1e-9


def test_duality_gap_and_tight_potential():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b, _ = compatible_triple(rng)
        primal = w1_signed(a, b)
        for _ in range(20):
            k = int(rng.integers(1, 4))
            phi = Cones(rng.normal(size=(k, 2)), rng.normal(size=k), sign=float(rng.choice([-1, 1])))
            assert dual_lower_bound(a, b, phi) <= primal + 1e-9
        phi = kantorovich_potential(a, b)
        assert abs(dual_lower_bound(a, b, phi) - primal) <= 1e-9 * (1 + primal)
        # the potential is 1-Lipschitz on samples
        x, y = rng.normal(size=(200, 2)), rng.normal(size=(200, 2))
        assert np.all(np.abs(phi(x) - phi(y)) <= np.linalg.norm(x - y, axis=1) + 1e-12)


def test_single_atom_per_sign_cones_are_tight():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = SignedAtomCloud(rng.normal(size=(2, 2)), [1.0, -1.0])
        b = SignedAtomCloud(rng.normal(size=(2, 2)), [1.0, -1.0])
        primal = w1_signed(a, b)
        src, tgt = np.vstack([a.pos[:1], b.pos[1:]]), np.vstack([a.pos[1:], b.pos[:1]])
        best = -np.inf
        for i, j in itertools.product(range(2), range(2)):
            for s in (1.0, -1.0):
                best = max(best, dual_lower_bound(a, b, Cones([tgt[i]], sign=s)), dual_lower_bound(a, b, Cones([src[j]], sign=-s)))
        best = max(best, dual_lower_bound(a, b, kantorovich_potential(a, b)))
        assert best >= 0.95 * primal - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_w2_signed_bounds_w1_on_unit_mass(seed):
    # for probability measures W1 <= W2 (Jensen); signed version part by part
    rng = np.random.default_rng(seed)
    a = signed_cloud(rng, int(rng.integers(1, 6)), 0, 1.0, 0.0)
    b = signed_cloud(rng, int(rng.integers(1, 6)), 0, 1.0, 0.0)
    assert w1_signed(a, b) <= w2_signed(a, b) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_translation_of_both_arguments(seed, dx, dy):
    rng = np.random.default_rng(seed)
    a, b, _ = compatible_triple(rng)
    shift = lambda x: x + np.array([dx, dy])  # noqa: E731
    assert abs(w1_signed(pushforward(a, shift), pushforward(b, shift)) - w1_signed(a, b)) <= 1e-9
