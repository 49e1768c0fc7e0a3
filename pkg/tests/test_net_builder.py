from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1fd import net_builder as nb
from l1fd.rng import RandomSeed


def test_rescale_to_unit():
    assert np.array_equal(nb.rescale_to_unit([[2.0, 4.0]], 2.0), [[1.0, 2.0]])
    X = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(nb.rescale_to_unit(X, 1.0), X)
    with pytest.raises(ValueError):
        nb.rescale_to_unit(X, 0.0)


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_rescale_homogeneous(s, r):
    X = np.random.default_rng(s).normal(size=(2, 4))
    Y = nb.rescale_to_unit(X, r)
    assert np.abs(Y[0] - Y[1]).sum() == pytest.approx(np.abs(X[0] - X[1]).sum() / r)


class TestUnary:
    def test_examples(self):
        assert nb.unary_encode(0, 4).tolist() == [0, 0, 0, 0]
        assert nb.unary_encode(3, 5).tolist() == [1, 1, 1, 0, 0]
        assert int(np.sum(nb.unary_encode(2, 6) != nb.unary_encode(5, 6))) == 3

    def test_range(self):
        with pytest.raises(ValueError):
            nb.unary_encode(6, 5)
        with pytest.raises(ValueError):
            nb.unary_encode(-1, 5)

    @given(st.integers(0, 40), st.integers(0, 40))
    def test_hamming_is_difference(self, a, b):
        assert int(np.sum(nb.unary_encode(a, 40) != nb.unary_encode(b, 40))) == abs(a - b)


def test_snapped_hamming_tracks_l1():
    # With side-2 cells and snapping step delta, the concatenated codes of two
    # same-cell points differ in ||p - q||_1 / delta +- d bits.
    d = 6
    cfg = nb.NetBuilderConfig.derive(100, d, 1.0, 2.0, 0)
    tables = nb.LSHTables(d, cfg, RandomSeed(1))
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(400):
        p = rng.uniform(0, 4, size=d)
        q = p + rng.uniform(-0.3, 0.3, size=d)
        cells, z = tables.snap(np.stack([p, q]), 0)
        if not np.array_equal(cells[0], cells[1]):
            continue
        hamming = sum(int(np.sum(nb.unary_encode(int(a), cfg.levels) != nb.unary_encode(int(b), cfg.levels)))
                      for a, b in zip(z[0], z[1]))
        target = np.abs(p - q).sum() / cfg.delta_snap
        assert abs(hamming - target) <= d
        checked += 1
    assert checked > 50


def test_config_fields():
    cfg = nb.NetBuilderConfig.derive(1000, 20, 1.0, 2.0, 0)
    assert cfg.delta_snap > 0 and cfg.num_tables >= 1 and cfg.concat_len >= 1
    assert cfg.levels * cfg.delta_snap == pytest.approx(2.0)
    assert cfg.delta_snap <= 1 / (10 * 20 * 2.0) + 1e-15
    assert cfg.c_prime >= 1
    assert cfg.far_collision <= 1 / 1000 + 1e-12


class TestBuild:
    def test_single_point(self):
        net = nb.build_approx_net([[3.0, 1.0]], 0.5, 2.0)
        assert net.centers.tolist() == [0] and net.assignment.tolist() == [0]

    def test_identical_points(self):
        net = nb.build_approx_net(np.ones((30, 4)), 1.0, 2.0)
        assert net.centers.tolist() == [0]
        assert set(net.assignment.tolist()) == {0}

    def test_worked_1d_example(self):
        X = np.array([[0.0], [0.5], [2.0]])
        net = nb.build_approx_net(X, 1.0, 1.0)
        ref = nb.brute_force_net(X, 1.0)
        assert net.centers.tolist() == ref.centers.tolist() == [0, 2]
        assert net.assignment.tolist() == ref.assignment.tolist() == [0, 0, 2]

    def test_errors(self):
        with pytest.raises(ValueError):
            nb.build_approx_net(np.zeros((0, 3)), 1.0, 2.0)
        with pytest.raises(ValueError):
            nb.build_approx_net(np.zeros((2, 3)), 1.0, 0.5)

    def test_subspace_instance_verifies(self, low_dim_points):
        net = nb.build_approx_net(low_dim_points, 1.0, 2.0, seed=3)
        v = nb.verify_net(low_dim_points, net)
        assert net.certified and v.packing_ok and v.covering_ok
        assert v.worst_cover_ratio <= 2.0
        assert net.stats["max_fp_per_query"] <= net.stats["fp_budget"]

    def test_deterministic(self, low_dim_points):
        a = nb.build_approx_net(low_dim_points, 1.0, 2.0, seed=5)
        b = nb.build_approx_net(low_dim_points, 1.0, 2.0, seed=5)
        assert a.to_json() == b.to_json()

    def test_json_schema(self, low_dim_points):
        net = nb.build_approx_net(low_dim_points[:50], 1.0, 2.0)
        back = nb.NetResult.from_json(net.to_json())
        assert back.centers.tolist() == net.centers.tolist()
        assert set(__import__("json").loads(net.to_json())) == {"r", "c", "centers", "assignment", "certified"}

    def test_covering_rate_on_fuzz(self):
        ok = 0
        for s in range(20):
            rng = np.random.default_rng(s)
            X = rng.uniform(0, 6, size=(200, 3)) @ rng.normal(size=(3, 10))
            net = nb.build_approx_net(X, 1.0, 2.0, seed=s)
            v = nb.verify_net(X, net)
            assert v.packing_ok
            ok += v.covering_ok
        assert ok >= 19


class TestBruteForce:
    def test_single(self):
        assert nb.brute_force_net([[1.0]], 1.0).centers.tolist() == [0]

    def test_close_pair_one_center(self):
        assert nb.brute_force_net([[0.0], [0.5]], 1.0).centers.tolist() == [0]

    def test_far_pair_two_centers(self):
        assert nb.brute_force_net([[0.0], [2.0]], 1.0).centers.tolist() == [0, 1]

    def test_verifies(self, low_dim_points):
        v = nb.verify_net(low_dim_points, nb.brute_force_net(low_dim_points, 1.0))
        assert v.packing_ok and v.covering_ok and v.worst_cover_ratio <= 1.0


def test_verify_flags_coincident_centers():
    X = np.array([[0.0, 0.0], [0.0, 0.0]])
    net = nb.NetResult(np.array([0, 1]), np.array([0, 1]), 1.0, 1.0)
    assert not nb.verify_net(X, net).packing_ok


def test_packing_violations_exact():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 5)) * 2
    centers = np.arange(300)
    got = set(nb.packing_violations(X, centers, 1.5))
    D = np.abs(X[:, None] - X[None]).sum(axis=2)
    want = {(i, j) for i in range(300) for j in range(i + 1, 300) if D[i, j] <= 1.5}
    assert {tuple(sorted(p)) for p in got} == want


def test_collision_monotonicity():
    rng = np.random.default_rng(0)
    d, c = 8, 2.0
    base = rng.uniform(0, 20, size=(1000, d))
    near = base + rng.dirichlet(np.ones(d), size=1000) * rng.uniform(0.2, 1.0, size=(1000, 1))
    far = base + rng.dirichlet(np.ones(d), size=1000) * rng.uniform(c, 2 * c, size=(1000, 1))
    X = np.vstack([base, near, far])
    cfg = nb.NetBuilderConfig.derive(len(X), d, 1.0, c, 0)
    near_rate = nb.collision_rates(X, [(i, 1000 + i) for i in range(1000)], cfg, 1).mean()
    far_rate = nb.collision_rates(X, [(i, 2000 + i) for i in range(1000)], cfg, 1).mean()
    assert near_rate > far_rate
    assert near_rate >= cfg.near_collision * 0.5
