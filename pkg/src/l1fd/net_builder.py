"""Approximate r-nets in l1 via shifted grids and bit-sampling LSH on unary codes.

Pipeline per hash table: shift a side-2 grid at random (after rescaling so
r = 1), snap each in-cell coordinate to a multiple of delta, read the snapped
integer z as the unary code 1^z 0^(2/delta - z), and sample code bits. The
bucket key is a 64-bit hash of (cell id, sampled bits). Greedy marking walks
the points in input order; a surviving point becomes a center and marks
every unmarked colliding point within c*r. Packing is then certified with an
exact sweep and the whole build is repeated on a fresh substream if it fails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .rng import RandomSeed, as_seed

GRID_SIDE = 2.0


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    return X


def l1_to(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.abs(X - y).sum(axis=1)


def rescale_to_unit(points, r: float) -> np.ndarray:
    if not r > 0:
        raise ValueError("r must be positive")
    return _as_points(points) / r


def unary_encode(z: int, levels: int) -> np.ndarray:
    """Bitstring of ``z`` ones followed by ``levels - z`` zeros."""
    if not 0 <= z <= levels:
        raise ValueError(f"z={z} outside [0, {levels}]")
    bits = np.zeros(levels, dtype=np.uint8)
    bits[:z] = 1
    return bits


@dataclass
class NetResult:
    centers: np.ndarray
    assignment: np.ndarray
    r: float
    c: float
    certified: bool = True
    stats: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "r": self.r,
            "c": self.c,
            "centers": [int(i) for i in self.centers],
            "assignment": [int(i) for i in self.assignment],
            "certified": bool(self.certified),
        })

    @classmethod
    def from_json(cls, text: str) -> NetResult:
        obj = json.loads(text)
        return cls(np.asarray(obj["centers"], dtype=np.int64),
                   np.asarray(obj["assignment"], dtype=np.int64),
                   float(obj["r"]), float(obj["c"]), bool(obj["certified"]))


@dataclass(frozen=True)
class NetBuilderConfig:
    """Hashing parameters; build with :meth:`derive` unless you know what you want."""

    c: float
    r: float
    delta_snap: float
    levels: int
    c_prime: float
    num_tables: int
    concat_len: int
    fp_budget: int
    repeats: int
    seed: RandomSeed
    near_collision: float = 0.0
    far_collision: float = 0.0
    grid_side: float = GRID_SIDE

    @classmethod
    def derive(cls, n: int, d: int, r: float, c: float, seed: RandomSeed | int = 0,
               a1: float = 2.0, a2: float = 4.0, repeats: int | None = None,
               c_prime: float | None = None, max_tables: int = 20000) -> NetBuilderConfig:
        if n < 1 or d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if not c >= 1 or not r > 0:
            raise ValueError("need c >= 1 and r > 0")
        delta = 1.0 / (10.0 * d * c)
        levels = math.ceil(2.0 / delta - 1e-9)
        delta_eff = 2.0 / levels
        code_len = d * levels
        # Hamming distance bounds for pairs in the same cell (snapping moves each axis by <= 1/2)
        near_h = 1.0 / delta_eff + d
        far_h = c / delta_eff - d
        if c_prime is None:
            c_prime = max(1.0, far_h / near_h)
        far_bit = min(1.0, c_prime * near_h / code_len)
        ln_n = math.log(max(n, 2))
        concat_len = max(1, math.ceil(ln_n / -math.log1p(-far_bit))) if far_bit < 1 else 1
        near = 0.5 * (1.0 - near_h / code_len) ** concat_len
        far = (1.0 - far_bit) ** concat_len
        num_tables = int(min(max_tables, max(4, math.ceil(a1 * ln_n / near))))
        fp_budget = max(1, math.ceil(a2 * num_tables * n * far))
        if repeats is None:
            repeats = max(2, math.ceil(math.log2(max(n, 2))))
        return cls(c=c, r=r, delta_snap=delta_eff, levels=levels, c_prime=c_prime,
                   num_tables=num_tables, concat_len=concat_len, fp_budget=fp_budget,
                   repeats=repeats, seed=as_seed(seed), near_collision=near,
                   far_collision=far)


@numba.njit(cache=True)
def _hash_tables(YdT, shifts, thr, axis_start, mix, levels, use_lut, out):  # pragma: no cover - compiled
    # YdT is (d, n): one axis at a time keeps the per-axis shift and
    # threshold segment fixed while the point loop vectorizes.
    T, n = out.shape
    d = YdT.shape[0]
    inv_levels = 1.0 / levels
    lut = np.zeros(d * levels if use_lut else 1, dtype=np.int64)
    key = np.empty(n, dtype=np.int64)
    cell = np.empty(n, dtype=np.int64)
    rank = np.empty(n, dtype=np.int64)
    for t in range(T):
        if use_lut:
            lut[:] = 0
            for m in range(thr.shape[1]):
                if thr[t, m] + 1 < d * levels:
                    lut[thr[t, m] + 1] += 1
            for m in range(1, d * levels):
                lut[m] += lut[m - 1]
        for i in range(n):
            out[t, i] = 0
        for j in range(d):
            s = shifts[t, j] - 0.5
            base = j * levels
            for i in range(n):
                g = np.floor(YdT[j, i] - s)
                c = np.floor(g * inv_levels)
                cell[i] = np.int64(c)
                key[i] = base + np.int64(g - c * levels)
            if use_lut:
                for i in range(n):
                    rank[i] = lut[key[i]]
            else:
                for i in range(n):
                    rank[i] = axis_start[t, j]
                for m in range(axis_start[t, j], axis_start[t, j + 1]):
                    b = thr[t, m]
                    for i in range(n):
                        rank[i] += key[i] > b
            m0 = mix[t, 0, j]
            m1 = mix[t, 1, j]
            for i in range(n):
                out[t, i] += numba.uint64(cell[i]) * m0 + numba.uint64(rank[i]) * m1


class LSHTables:
    """The ``num_tables`` independent (cell id, sampled unary bits) hash functions.

    Coordinates are snapped to the delta lattice first and then split into
    side-2 cells, so in-cell codes z lie in [0, levels). Sampled bit i of
    axis j reads 1 iff i < z_j, so the bits sampled on one axis are fixed by
    how many of that axis's thresholds lie below z_j. Codes are never
    materialized.
    """

    def __init__(self, d: int, config: NetBuilderConfig, seed: RandomSeed):
        self.d = d
        self.config = config
        T, K, levels = config.num_tables, config.concat_len, config.levels
        self.shifts = np.empty((T, d))
        self.thresholds = np.empty((T, K), dtype=np.int64)
        self.mix = np.empty((T, 2, d), dtype=np.uint64)
        for t in range(T):
            rng = seed.child(f"table{t}").generator()
            self.shifts[t] = rng.uniform(0.0, config.grid_side, size=d)
            coords = rng.integers(0, d, size=K)
            bits = rng.integers(0, levels, size=K)
            self.thresholds[t] = np.sort(coords * levels + bits)
            self.mix[t] = rng.integers(0, 2**63, size=(2, d), dtype=np.int64).astype(np.uint64) * 2 + 1
        bounds = np.arange(d + 1, dtype=np.int64) * levels
        self.axis_start = np.stack([np.searchsorted(row, bounds) for row in self.thresholds])

    def snap(self, Y: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Cell ids and in-cell snapped integer coordinates of unit-scaled points."""
        levels = self.config.levels
        g = np.floor(Y / self.config.delta_snap - self.shifts[t] / self.config.delta_snap + 0.5)
        cell = np.floor(g / levels)
        return cell.astype(np.int64), (g - cell * levels).astype(np.int64)

    def raw_keys(self, Y: np.ndarray) -> np.ndarray:
        """(num_tables, n) uint64 bucket keys."""
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        out = np.empty((self.config.num_tables, Y.shape[0]), dtype=np.uint64)
        _hash_tables(np.ascontiguousarray((Y / self.config.delta_snap).T), self.shifts / self.config.delta_snap,
                     self.thresholds, self.axis_start, self.mix, self.config.levels,
                     self.config.levels <= 8 * Y.shape[0], out)
        return out

    def labels(self, Y: np.ndarray) -> np.ndarray:
        """(num_tables, n) bucket ids, globally unique across tables."""
        keys = self.raw_keys(Y)
        out = np.empty(keys.shape, dtype=np.int64)
        offset = 0
        for t in range(keys.shape[0]):
            _, inv = np.unique(keys[t], return_inverse=True)
            out[t] = inv.ravel() + offset
            offset += int(inv.max()) + 1
        return out


class _Buckets:
    def __init__(self, labels: np.ndarray):
        self.labels = labels
        n = labels.shape[1]
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        self.members = (order % n).astype(np.int64)
        self.counts = np.bincount(flat)
        self.indptr = np.concatenate([[0], np.cumsum(self.counts)])

    def candidates(self, i: int) -> np.ndarray:
        """Points sharing a bucket with ``i``, in table-scan order, deduplicated."""
        cols = self.labels[:, i]
        lens = self.counts[cols]
        starts = self.indptr[cols]
        total = int(lens.sum())
        base = np.repeat(starts - (np.cumsum(lens) - lens), lens)
        cand = self.members[base + np.arange(total)]
        cand = cand[cand != i]
        _, first = np.unique(cand, return_index=True)
        return cand[np.sort(first)]


def packing_violations(X: np.ndarray, centers: np.ndarray, r: float, limit: int | None = None,
                       seed: RandomSeed | int = 0) -> list[tuple[int, int]]:
    """All center pairs at l1 distance <= r (exact; pivot-pruned sweep)."""
    centers = np.asarray(centers, dtype=np.int64)
    m = centers.size
    if m < 2:
        return []
    C = X[centers]
    rng = as_seed(seed).child("pivots").generator()
    pivots = np.concatenate([[0], rng.integers(0, m, size=2)])
    keys = np.stack([l1_to(C, C[p]) for p in pivots], axis=1)
    order = np.argsort(keys[:, 0], kind="stable")
    ks = keys[order]
    hi = np.searchsorted(ks[:, 0], ks[:, 0] + r, side="right")
    found: list[tuple[int, int]] = []
    block = 4096
    for a0 in range(0, m, block):
        a = np.arange(a0, min(m, a0 + block))
        lens = hi[a] - a - 1
        lens = np.maximum(lens, 0)
        total = int(lens.sum())
        if total == 0:
            continue
        left = np.repeat(a, lens)
        right = left + 1 + (np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens))
        keep = np.all(np.abs(ks[left, 1:] - ks[right, 1:]) <= r, axis=1)
        left, right = left[keep], right[keep]
        for s in range(0, left.size, 1 << 16):
            li = order[left[s:s + (1 << 16)]]
            ri = order[right[s:s + (1 << 16)]]
            dist = np.abs(C[li] - C[ri]).sum(axis=1)
            bad = dist <= r
            for x, y in zip(centers[li[bad]], centers[ri[bad]]):
                found.append((int(min(x, y)), int(max(x, y))))
                if limit is not None and len(found) >= limit:
                    return found
    return sorted(found)


def _greedy(X: np.ndarray, buckets: _Buckets, r: float, c: float, budget: int):
    n = X.shape[0]
    assignment = np.full(n, -1, dtype=np.int64)
    marked = np.zeros(n, dtype=bool)
    is_center = np.zeros(n, dtype=bool)
    centers = []
    max_fp = 0
    exhausted = 0
    for i in range(n):
        if marked[i]:
            continue
        cand = buckets.candidates(i)
        known = cand[is_center[cand]]
        if known.size:
            dist = l1_to(X[known], X[i])
            j = int(np.argmin(dist))
            if dist[j] <= r:
                assignment[i] = known[j]
                marked[i] = True
                continue
        centers.append(i)
        is_center[i] = True
        marked[i] = True
        assignment[i] = i
        open_ = cand[~marked[cand]]
        if open_.size == 0:
            continue
        dist = l1_to(X[open_], X[i])
        fp = dist > c * r
        before = np.cumsum(fp) - fp
        scanned = before < budget
        if not scanned.all():
            exhausted += 1
        max_fp = max(max_fp, int(fp[scanned].sum()))
        hit = open_[scanned & ~fp]
        marked[hit] = True
        assignment[hit] = i
    return np.asarray(centers, dtype=np.int64), assignment, max_fp, exhausted


def build_approx_net(points, r: float, c: float, config: NetBuilderConfig | None = None,
                     seed: RandomSeed | int = 0) -> NetResult:
    """c-approximate r-net of ``points`` with a covering assignment.

    Covering holds by construction (every point is marked by a center within
    c*r or becomes a center). Packing is certified exactly; if a repeat fails
    certification the next repeat uses a fresh substream. When all repeats
    fail, the net with the fewest violations is returned with
    ``certified=False``.
    """
    X = _as_points(points)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot build a net of an empty point set")
    if not r > 0 or not c >= 1:
        raise ValueError("need r > 0 and c >= 1")
    if config is None:
        config = NetBuilderConfig.derive(n, d, r, c, seed)
    Y = rescale_to_unit(X, r)
    best = None
    for rep in range(config.repeats):
        rseed = config.seed.child(f"repeat{rep}")
        tables = LSHTables(d, config, rseed)
        buckets = _Buckets(tables.labels(Y))
        centers, assignment, max_fp, exhausted = _greedy(X, buckets, r, c, config.fp_budget)
        bad = packing_violations(X, centers, r, seed=rseed)
        stats = {
            "num_tables": config.num_tables,
            "concat_len": config.concat_len,
            "c_prime": config.c_prime,
            "fp_budget": config.fp_budget,
            "max_fp_per_query": max_fp,
            "budget_exhaustions": exhausted,
            "packing_violations": len(bad),
            "repeats_used": rep + 1,
        }
        result = NetResult(centers, assignment, r, c, certified=not bad, stats=stats)
        if not bad:
            return result
        if best is None or len(bad) < best.stats["packing_violations"]:
            best = result
    return best


def brute_force_net(points, r: float) -> NetResult:
    """Exact greedy r-net in input order; non-centers go to the nearest earlier center."""
    X = _as_points(points)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot build a net of an empty point set")
    if not r > 0:
        raise ValueError("r must be positive")
    centers: list[int] = []
    assignment = np.empty(n, dtype=np.int64)
    C = np.empty_like(X)
    for i in range(n):
        if centers:
            dist = l1_to(C[:len(centers)], X[i])
            j = int(np.argmin(dist))
            if dist[j] <= r:
                assignment[i] = centers[j]
                continue
        C[len(centers)] = X[i]
        centers.append(i)
        assignment[i] = i
    return NetResult(np.asarray(centers, dtype=np.int64), assignment, r, 1.0)


@dataclass(frozen=True)
class NetVerification:
    packing_ok: bool
    covering_ok: bool
    worst_cover_ratio: float


def verify_net(points, net: NetResult) -> NetVerification:
    X = _as_points(points)
    centers = np.asarray(net.centers, dtype=np.int64)
    assignment = np.asarray(net.assignment, dtype=np.int64)
    if assignment.shape != (X.shape[0],) or np.any(assignment < 0):
        raise ValueError("assignment must map every point to a center")
    is_center = np.zeros(X.shape[0], dtype=bool)
    is_center[centers] = True
    packing_ok = (np.unique(centers).size == centers.size
                  and not packing_violations(X, centers, net.r, limit=1))
    dist = np.abs(X - X[assignment]).sum(axis=1)
    worst = float(dist.max() / net.r) if dist.size else 0.0
    covering_ok = (bool(np.all(is_center[assignment]))
                   and bool(np.all(assignment[centers] == centers))
                   and bool(np.all(dist <= net.c * net.r)))
    return NetVerification(bool(packing_ok), covering_ok, worst)


def collision_rates(points, pairs: Sequence[tuple[int, int]], config: NetBuilderConfig,
                    seed: RandomSeed | int = 0) -> np.ndarray:
    """Fraction of tables in which each listed pair shares a bucket."""
    X = _as_points(points)
    tables = LSHTables(X.shape[1], config, as_seed(seed))
    labels = tables.labels(rescale_to_unit(X, config.r))
    pairs = np.asarray(pairs, dtype=np.int64)
    return np.mean(labels[:, pairs[:, 0]] == labels[:, pairs[:, 1]], axis=0)
