from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1fd import embedding as em
from l1fd.datasets import DatasetSpec, gen_dataset
from l1fd.rng import RandomSeed


def _plan(k: int, eps: float, c: float = 2.0) -> em.DimensionPlan:
    return em.DimensionPlan(k, eps, c, 3.0)


class TestDoubling:
    def test_collinear_small(self):
        X = np.linspace(0, 30, 200)[:, None] * np.array([[1.0, 2.0, -1.0]])
        assert em.estimate_doubling_constant(X, [1, 4, 16], seed=0) <= 5

    def test_identical_points(self):
        assert em.estimate_doubling_constant(np.ones((20, 3)), [1.0], seed=0) == 1.0

    def test_grows_with_dimension(self):
        rng = np.random.default_rng(0)
        low = rng.uniform(0, 4, size=(400, 1)) @ rng.normal(size=(1, 6))
        high = rng.uniform(0, 4, size=(400, 6))
        assert (em.estimate_doubling_constant(high, [2, 4], seed=1)
                > em.estimate_doubling_constant(low, [2, 4], seed=1))

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            em.estimate_doubling_constant(np.zeros((1, 2)), [1.0])


class TestPlan:
    def test_worked_value(self):
        # base = log2(2) log2(8 / 0.25) = 5, exponent 0.5 / 0.25 = 2
        assert em.plan_dimension(2.0, 0.25, 8.0, exponent_cal=0.5).k == 25

    def test_floor_of_two(self):
        assert em.plan_dimension(1.0, 0.25, 8.0, exponent_cal=0.5).k == 4

    @settings(max_examples=50)
    @given(st.floats(1.5, 64), st.floats(0.05, 0.45), st.floats(1, 100))
    def test_monotone(self, lam, eps, scale):
        k = em.plan_dimension(lam, eps, scale, exponent_cal=0.2).k
        assert em.plan_dimension(lam * 2, eps, scale, exponent_cal=0.2).k >= k
        assert em.plan_dimension(lam, eps * 0.9, scale, exponent_cal=0.2).k >= k

    def test_escalate(self):
        small = em.plan_dimension(4.0, 0.25, 2.0, exponent_cal=0.1)
        big = em.plan_dimension(4.0, 0.25, 2.0, exponent_cal=0.1, escalate=True, delta=0.05)
        assert big.k == max(small.k, em.far_point_required_k(4.0, 2.0, 0.25, 0.05))

    def test_errors(self):
        for args in [(2.0, 0.5, 8.0), (0.5, 0.2, 8.0), (2.0, 0.2, 0.5)]:
            with pytest.raises(ValueError):
                em.plan_dimension(*args)


def test_required_k_is_fixed_point():
    for variant in ("net", "grid"):
        k = em.far_point_required_k(3.0, 2.0, 0.25, 0.05, variant=variant, d=64)
        D0 = em.far_radius(k, 0.25)
        if variant == "net":
            rhs = 4 * math.log2(3) * math.log2(2 * D0 / 0.25) + 2 * math.log2(2 * 3 / 0.05)
            assert k > rhs
        else:
            assert k >= 20 * math.log2(3) * math.log2(64 * D0 / (0.25 * 0.05))


def test_far_radius_formula():
    from l1fd.projection import scale_factor
    assert em.far_radius(64, 0.25) == math.ceil(800 * scale_factor(64, 0.25) / 64)


@pytest.mark.parametrize("variant", ["net", "grid"])
def test_representative_error(variant, low_dim_points):
    eps = 0.25
    if variant == "net":
        e, data = em.embed_dataset_net(low_dim_points, eps, 2.0, _plan(32, eps), 1)
    else:
        e, data = em.embed_dataset_grid(low_dim_points, eps, _plan(32, eps, 20), 1)
    err = np.abs(e.representatives - low_dim_points).sum(axis=1)
    assert err.max() <= eps + 1e-12
    assert data.vectors.shape == (len(low_dim_points), 32)


def test_grid_oblivious(low_dim_points):
    eps = 0.25
    e, data = em.embed_dataset_grid(low_dim_points, eps, _plan(16, eps, 20), 2)
    assert np.array_equal(e.embed_point(low_dim_points[7]), data.vectors[7])
    assert np.array_equal(e.embed_point(low_dim_points[:40]), data.vectors[:40])
    fresh = low_dim_points[3] + 0.001
    y = e.embed_point(fresh)
    assert y.shape == (16,)


def test_net_variant_accepts_prebuilt_net(low_dim_points):
    from l1fd.net_builder import build_approx_net
    net = build_approx_net(low_dim_points, 0.125, 2.0, seed=0)
    e, _ = em.embed_dataset_net(low_dim_points, 0.25, 2.0, _plan(8, 0.25), 0, net=net)
    assert e.net is net
    with pytest.raises(ValueError):
        em.embed_dataset_net(low_dim_points, 0.3, 2.0, _plan(8, 0.3), 0, net=net)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_query_map_linear(a, b):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 6))
    e, _ = em.embed_dataset_grid(X, 0.2, _plan(12, 0.2, 6), 0)
    x, y = rng.normal(size=(2, 6))
    lhs = em.embed_query(e, a * x + b * y)
    rhs = a * em.embed_query(e, x) + b * em.embed_query(e, y)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)) * 100)


def test_audit_vacuous_and_deterministic(low_dim_points):
    e, _ = em.embed_dataset_grid(low_dim_points, 0.25, _plan(16, 0.25, 20), 0)
    q = low_dim_points[0]
    rec = em.far_point_audit(e, q, D0_override=1e12)
    assert rec.far_count == 0 and rec.passed and rec.min_far_image == math.inf
    a = em.far_point_audit(e, q, D0_override=2.0)
    b = em.far_point_audit(e, q, D0_override=2.0)
    assert a == b and a.far_count > 0


def test_success_conditions_require_near_point():
    X = np.array([[0.0, 0.0], [10.0, 10.0]])
    e, data = em.embed_dataset_grid(X, 0.25, _plan(64, 0.25, 2), 0)
    with pytest.raises(ValueError):
        em.success_conditions(e, data, [5.0, 5.0])
    near_ok, far_ok = em.success_conditions(e, data, [0.3, 0.2])
    assert isinstance(near_ok, bool) and isinstance(far_ok, bool)


def test_success_rate_reasonable():
    ds = gen_dataset(DatasetSpec(300, 32, planted_queries=20, seed=RandomSeed(4)))
    hits = 0
    for i in range(20):
        e, data = em.embed_dataset_grid(ds.points, 0.25, _plan(64, 0.25, 32), RandomSeed(i))
        hits += all(em.success_conditions(e, data, ds.queries[i]))
    assert hits >= 10


@pytest.mark.parametrize("variant", ["net", "grid"])
def test_save_load_roundtrip(tmp_path, variant, low_dim_points):
    seed = RandomSeed(9)
    if variant == "net":
        e, data = em.embed_dataset_net(low_dim_points, 0.25, 2.0, _plan(16, 0.25), seed)
    else:
        e, data = em.embed_dataset_grid(low_dim_points, 0.25, _plan(16, 0.25, 20), seed)
    em.save_embedding(tmp_path, e, data, seed)
    e2, data2 = em.load_embedding(tmp_path, low_dim_points)
    assert np.array_equal(data2.vectors, data.vectors)
    assert np.array_equal(e2.matrix.entries, e.matrix.entries)
    q = low_dim_points[5] + 0.1
    assert np.array_equal(em.embed_query(e2, q), em.embed_query(e, q))
    if variant == "grid":
        assert np.array_equal(e2.embed_point(q), e.embed_point(q))
