from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1fd import ann_index as ai
from l1fd.datasets import DatasetSpec, gen_dataset
from l1fd.embedding import DimensionPlan
from l1fd.rng import RandomSeed


def _plan(k=32, eps=0.25, c=2.0):
    return DimensionPlan(k, eps, c, 3.0)


def test_repetition_count():
    assert ai.repetition_count(0.25, 0.1) == math.ceil(4 * math.log(10))
    assert ai.repetition_count(0.25, 0.1, a=0.5) == 5
    assert ai.repetition_count(0.49, 0.99) == 1
    with pytest.raises(ValueError):
        ai.repetition_count(0.25, 1.0)


def test_single_point_returns_it():
    idx = ai.build_index([[1.0, 2.0]], 0.25, plan=_plan(8), m=1)
    assert ai.query(idx, [1.0, 2.0]) == 0


def test_all_far_returns_none():
    X = np.random.default_rng(0).normal(size=(50, 4)) * 10 + 100
    idx = ai.build_index(X, 0.25, plan=_plan(16), m=2, seed=1)
    assert ai.query(idx, np.zeros(4)) is None


def test_bad_inputs():
    with pytest.raises(ValueError):
        ai.build_index([[0.0]], 0.6, plan=_plan())
    with pytest.raises(ValueError):
        ai.build_index([[0.0]], 0.25, variant="tree", plan=_plan())
    idx = ai.build_index([[0.0, 0.0]], 0.25, plan=_plan(8), m=1)
    with pytest.raises(ValueError):
        ai.query(idx, [0.0])


@pytest.fixture(scope="module")
def planted():
    return gen_dataset(DatasetSpec(400, 24, planted_queries=15, control_queries=15, seed=RandomSeed(2)))


@pytest.mark.parametrize("variant", ["net", "grid"])
def test_soundness_and_recall(planted, variant):
    eps = 0.25
    idx = ai.build_index(planted.points, eps, variant=variant, plan=_plan(64, eps, 2.0 if variant == "net" else 24),
                         seed=3, a=0.5)
    found = 0
    for q, kind in zip(planted.queries, planted.kinds):
        ans = ai.query(idx, q)
        if ans is not None:
            assert np.abs(planted.points[ans] - q).sum() <= 1 + 9 * eps
        if kind == "control":
            assert ans is None
        else:
            found += ans is not None
    assert found >= 12


def test_deterministic(planted):
    a = ai.build_index(planted.points, 0.25, plan=_plan(), m=3, seed=7)
    b = ai.build_index(planted.points, 0.25, plan=_plan(), m=3, seed=7)
    assert [ai.query(a, q) for q in planted.queries] == [ai.query(b, q) for q in planted.queries]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 3.0))
def test_candidates_match_scan(s, radius):
    rng = np.random.default_rng(s)
    V = rng.normal(size=(80, 3))
    table = ai.BucketTable.build(V, 0.4)
    y = rng.normal(size=3)
    got, _ = table.candidates(y, radius)
    want = np.flatnonzero(np.abs(V - y).sum(axis=1) <= radius)
    assert got.tolist() == want.tolist()


def test_cells_in_ball_limit():
    table = ai.BucketTable.build(np.zeros((1, 6)), 0.01)
    assert table.cells_in_ball(np.zeros(6) + 0.005, 1.0, 10) is None
    cells = ai.BucketTable.build(np.zeros((1, 2)), 1.0).cells_in_ball(np.array([0.5, 0.5]), 0.2, 100)
    assert len(cells) == 1


def test_linear_scan_oracle():
    X = np.array([[0.0], [3.0]])
    assert ai.linear_scan_oracle(X, [2.5], 1.0) == 1
    assert ai.linear_scan_oracle(X, [10.0], 1.0) is None
    assert ai.linear_scan_oracle(np.zeros((0, 1)), [0.0], 1.0) is None


@pytest.mark.parametrize("variant", ["net", "grid"])
def test_save_load(tmp_path, planted, variant):
    idx = ai.build_index(planted.points, 0.25, variant=variant, plan=_plan(32, 0.25, 24), m=2, seed=5)
    ai.save_index(tmp_path, idx)
    back = ai.load_index(tmp_path)
    assert back.m == idx.m and back.k == idx.k and back.variant == variant
    assert [ai.query(back, q) for q in planted.queries] == [ai.query(idx, q) for q in planted.queries]
