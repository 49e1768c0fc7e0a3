"""Randomly shifted grids: cell maps, anchor-corner covers, and growth counts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import RandomSeed, as_seed

_MAX_CELL = 2.0**62


@dataclass(frozen=True, eq=False)
class ShiftedGrid:
    w: float
    t: np.ndarray
    seed: RandomSeed

    @property
    def d(self) -> int:
        return self.t.size


def make_grid(d: int, w: float, seed: RandomSeed | int) -> ShiftedGrid:
    if not w > 0:
        raise ValueError("cell width must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    seed = as_seed(seed)
    t = seed.child("grid-offsets").generator().uniform(0.0, w, size=d)
    # uniform() may round up to w itself for tiny w
    t = np.where(t >= w, 0.0, t)
    t.setflags(write=False)
    return ShiftedGrid(float(w), t, seed)


def cell_of(grid: ShiftedGrid, x) -> np.ndarray:
    """floor((x - t) / w) per axis, for one vector or an (n, d) batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != grid.d or x.ndim > 2:
        raise ValueError(f"expected dimension {grid.d}, got shape {x.shape}")
    q = np.floor((x - grid.t) / grid.w)
    if np.any(np.abs(q) >= _MAX_CELL):
        raise ValueError("point too far from the origin for 64-bit cell ids")
    return q.astype(np.int64)


def anchor_of(grid: ShiftedGrid, cell) -> np.ndarray:
    """Lower corner t + w * cell, the representative of a cell."""
    return grid.t + grid.w * np.asarray(cell, dtype=np.float64)


@dataclass
class GridCover:
    grid: ShiftedGrid
    cell_ids: np.ndarray        # (m, d) distinct occupied cells, first-seen order
    representatives: np.ndarray  # (m, d) anchor corners
    member_of: np.ndarray        # point index -> row in cell_ids

    def representative_of_points(self) -> np.ndarray:
        return self.representatives[self.member_of]

    def to_json(self) -> str:
        members: list[list[int]] = [[] for _ in range(len(self.cell_ids))]
        for i, row in enumerate(self.member_of):
            members[row].append(i)
        return json.dumps({
            "w": self.grid.w,
            "seed": self.grid.seed.to_json(),
            "cells": [
                {"id": [int(v) for v in cid], "representative": [float(v) for v in rep],
                 "member_indices": mem}
                for cid, rep, mem in zip(self.cell_ids, self.representatives, members)
            ],
        })


def build_cover(grid: ShiftedGrid, points) -> GridCover:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    cells = cell_of(grid, X)
    uniq, first, inv = np.unique(cells, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    cell_ids = uniq[order]
    return GridCover(grid, cell_ids, anchor_of(grid, cell_ids), rank[inv.ravel()])


def expected_cell_bound(r: float, w: float, d: int) -> float:
    """(1 + 2r/w)^d, the expected-count bound for cells met by an l1 ball of radius r."""
    if not w > 0:
        raise ValueError("w must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    return (1.0 + 2.0 * r / w) ** d


def growth_bound(i: int, lam: float, d: int, radius: float, epsilon: float) -> float:
    """4^(i+3) * lam^(2 log2(d * radius / eps))."""
    return 4.0 ** (i + 3) * lam ** (2.0 * math.log2(d * radius / epsilon))


@dataclass
class GrowthRecord:
    radii: list[float]               # D_{i+1} for i = -1, 0, 1, ...
    counts: np.ndarray               # (trials, len(radii)) |A_i|
    bounds: list[float]
    fraction_all_ok: float           # i >= 0 family holding simultaneously
    fraction_minus_one_ok: float     # |A_{-1}| <= 32 lam^(2 log(d D0 / eps))
    trials: int


def estimate_cover_growth(points, widths: Sequence[float] | float, q, D0: float, trials: int,
                          lam: float, epsilon: float, seed: RandomSeed | int,
                          levels: int | None = None) -> GrowthRecord:
    """Counts of grid representatives inside the annuli radii D_{i+1} = 4^(i+1) D0.

    ``widths`` is either one width (used for every trial) or one per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    X = np.asarray(points, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    n, d = X.shape
    if np.isscalar(widths):
        widths = [float(widths)] * trials
    if len(widths) != trials:
        raise ValueError("need one width per trial")
    far = float(np.abs(X - q).sum(axis=1).max()) if n else 0.0
    if levels is None:
        levels = 1
        while 4.0**levels * D0 < far + d * max(widths):
            levels += 1
    idx = np.arange(-1, levels)
    radii = [4.0 ** (i + 1) * D0 for i in idx]
    bounds = [growth_bound(int(i), lam, d, rad, epsilon) for i, rad in zip(idx, radii)]
    minus_one_bound = 32.0 * lam ** (2.0 * math.log2(d * D0 / epsilon))
    seed = as_seed(seed)
    counts = np.zeros((trials, len(radii)), dtype=np.int64)
    for k in range(trials):
        cover = build_cover(make_grid(d, widths[k], seed.child(f"trial{k}")), X)
        dist = np.abs(cover.representatives - q).sum(axis=1)
        counts[k] = [(dist <= rad).sum() for rad in radii]
    ok_all = np.all(counts[:, 1:] <= np.asarray(bounds[1:]), axis=1)
    ok_m1 = counts[:, 0] <= minus_one_bound
    return GrowthRecord(radii, counts, bounds, float(ok_all.mean()), float(ok_m1.mean()), trials)
