from __future__ import annotations

import numpy as np

from l1fd.rng import RandomSeed, as_seed, open_uniform


def test_same_seed_same_stream():
    a = RandomSeed(5, b"x").generator().random(16)
    b = RandomSeed(5, b"x").generator().random(16)
    assert np.array_equal(a, b)


def test_labels_and_values_separate_streams():
    base = RandomSeed(5).generator().random(16)
    assert not np.array_equal(base, RandomSeed(5, b"x").generator().random(16))
    assert not np.array_equal(base, RandomSeed(6).generator().random(16))


def test_child_labels_compose():
    s = RandomSeed(1).child("a").child(3)
    assert s.stream_label == b"a/3"
    assert RandomSeed.from_json(s.to_json()) == s


def test_child_streams_look_independent():
    x = RandomSeed(9).child("left").generator().random(20000)
    y = RandomSeed(9).child("right").generator().random(20000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03


def test_open_uniform_stays_inside_unit_interval():
    u = open_uniform(RandomSeed(0).generator(), 100000)
    assert u.min() > 0 and u.max() < 1


def test_as_seed_accepts_ints_and_none():
    assert as_seed(4) == RandomSeed(4)
    assert as_seed(None) == RandomSeed(0)
