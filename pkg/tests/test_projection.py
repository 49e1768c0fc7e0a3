from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1fd import projection as pj
from l1fd.cauchy_stats import sample_cauchy
from l1fd.rng import RandomSeed


def test_scale_factor_frozen_value():
    assert pj.scale_factor(100, 0.1) == pytest.approx(100 / math.pi * math.log(1 + 1e6))
    assert pj.scale_factor(100, 0.1) == pytest.approx(439.77, abs=0.01)


def test_scale_factor_matches_truncated_mean():
    k, eps = 100, 0.1
    x = np.abs(sample_cauchy(4_000_000, RandomSeed(1)))
    trunc_mean = np.where(x <= k / eps, x, 0.0).mean()
    assert k * trunc_mean == pytest.approx(pj.scale_factor(k, eps), rel=0.02)


def test_scale_factor_increasing_in_k():
    vals = [pj.scale_factor(k, 0.2) for k in range(1, 200)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("d, k, eps", [(0, 3, 0.1), (3, 0, 0.1), (3, 3, 0.0), (3, 3, 0.6)])
def test_make_projection_validates(d, k, eps):
    with pytest.raises(ValueError):
        pj.make_projection(d, k, eps, 0)


def test_make_projection_deterministic():
    a = pj.make_projection(7, 5, 0.25, RandomSeed(3))
    b = pj.make_projection(7, 5, 0.25, RandomSeed(3))
    assert np.array_equal(a.entries, b.entries) and a.T == b.T
    assert not a.entries.flags.writeable


def test_project_zero_and_dimension_check():
    m = pj.make_projection(6, 4, 0.5, 1)
    assert np.array_equal(pj.project(m, np.zeros(6)), np.zeros(4))
    with pytest.raises(ValueError):
        pj.project(m, np.zeros(5))


def test_project_matches_matrix_product():
    m = pj.make_projection(30, 9, 0.25, 2)
    x = np.random.default_rng(0).normal(size=(11, 30))
    assert np.allclose(pj.project(m, x), x @ m.entries.T / m.T, rtol=1e-12, atol=1e-12)


def test_project_row_independent_of_batch():
    m = pj.make_projection(40, 13, 0.25, 2)
    x = np.random.default_rng(0).normal(size=(37, 40))
    full = pj.project(m, x)
    assert all(np.array_equal(full[i], pj.project(m, x[i])) for i in range(len(x)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(-100, 100))
def test_linearity(s, alpha):
    rng = np.random.default_rng(s)
    m = pj.make_projection(12, 6, 0.25, s)
    x, y = rng.normal(size=12), rng.normal(size=12)
    fx, fy = pj.project(m, x), pj.project(m, y)
    scale = np.abs(m.entries).sum() / m.T * (np.abs(x).max() + np.abs(y).max() + 1)
    assert np.abs(pj.project(m, x + y) - fx - fy).max() <= 1e-9 * scale
    assert np.abs(pj.project(m, alpha * x) - alpha * fx).max() <= 1e-9 * scale * (abs(alpha) + 1)


def test_project_anchors_matches_two_step():
    from l1fd import grid_partition as gp
    X = np.random.default_rng(1).normal(size=(50, 9)) * 3
    g = gp.make_grid(9, 0.05, 4)
    m = pj.make_projection(9, 5, 0.25, 5)
    assert np.array_equal(pj.project_anchors(m, X, g.t, g.w), pj.project(m, gp.anchor_of(g, gp.cell_of(g, X))))


def test_matrix_roundtrip_bit_exact(tmp_path):
    m = pj.make_projection(17, 6, 0.1, RandomSeed(99))
    path = tmp_path / "m.bin"
    pj.save_matrix(m, path)
    raw = path.read_bytes()
    assert raw[:4] == b"L1FD" and len(raw) == pj._HEADER.size + 8 * 17 * 6
    back = pj.load_matrix(path)
    assert back.k == 6 and back.d == 17 and back.T == m.T and back.seed.value == 99
    assert back.entries.tobytes() == m.entries.tobytes()
    buf = io.BytesIO()
    pj.save_matrix(m, buf)
    buf.seek(0)
    assert pj.load_matrix(buf).entries.tobytes() == m.entries.tobytes()


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        pj.load_matrix(p)


def test_distortion_dimension_formula():
    assert pj.distortion_dimension(0.1, 0.5, 0.05) == math.ceil(math.log(10) ** (1 / 0.45))
    assert pj.distortion_dimension(0.1, 0.5, 0.05, zeta_cal=3) == math.ceil(3 * math.log(10) ** (1 / 0.45))
    with pytest.raises(ValueError):
        pj.distortion_dimension(0.1, 0.2, 0.3)


def test_distortion_probe_rates_are_probabilities():
    rep = pj.distortion_probe(4, 1, 0.5, 0.05, 10_000, 3)
    assert 0 <= rep.contraction_rate <= 1 and 0 <= rep.expansion_rate <= 1
    assert rep.pairs_tested == 10_000


def test_distortion_probe_at_half():
    k = pj.distortion_dimension(0.1, 0.5, 0.05)
    rep = pj.distortion_probe(2, k, 0.5, 0.05, 10_000, 7)
    sigma = math.sqrt(0.1 * 0.9 / 10_000)
    assert rep.contraction_rate <= 0.1 + 3 * sigma
    assert rep.expansion_rate <= 0.7 + 3 * math.sqrt(0.21 / 10_000)


def test_stability_samples_match_cauchy_sum():
    from scipy import stats
    x = np.random.default_rng(3).normal(size=10)
    via = pj.stability_samples(x, 8, 10_000, 0.5, 5)
    direct = np.abs(sample_cauchy((200_000, 8), RandomSeed(6))).sum(axis=1)
    assert stats.ks_2samp(via, direct).statistic < 0.02
