"""Decision-version (c, R=1) near-neighbor index over amplified embeddings.

Each repetition embeds the data set independently and buckets the images on
a uniform grid in R^k. A query scans the buckets that meet the l1 ball of
radius 1 + 3 eps around f(q), then verifies candidates by their true distance
in the original space, so any answer is within 1 + 9 eps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import embedding as em
from .datasets import read_block, write_block
from .rng import RandomSeed, as_seed

# Single-run success on the reference planted instance is at least eps / a.
DEFAULT_AMPLIFICATION = 1.0
MAX_REPETITIONS = 10_000


@dataclass(eq=False)
class BucketTable:
    width: float
    buckets: dict[bytes, np.ndarray]
    vectors: np.ndarray

    @classmethod
    def build(cls, vectors: np.ndarray, width: float) -> BucketTable:
        if not width > 0:
            raise ValueError("bucket width must be positive")
        cells = np.floor(vectors / width).astype(np.int64)
        uniq, inv = np.unique(cells, axis=0, return_inverse=True)
        inv = inv.ravel()
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        buckets = {uniq[b].tobytes(): order[bounds[b]:bounds[b + 1]] for b in range(len(uniq))}
        return cls(width, buckets, vectors)

    def cells_in_ball(self, y: np.ndarray, radius: float, limit: int) -> list[np.ndarray] | None:
        """Cells whose box meets the l1 ball B(y, radius); None once more than ``limit``."""
        k = y.shape[0]
        w = self.width
        home = np.floor(y / w).astype(np.int64)
        lo = y - home * w          # distance to the lower face of the home cell
        hi = (home + 1) * w - y    # distance to the upper face
        # Cells reachable along a single axis already bound the count from below.
        reach = np.floor((radius - lo) / w + 1).clip(min=0) + np.floor((radius - hi) / w + 1).clip(min=0)
        if 1 + reach.sum() > limit:
            return None
        found: list[np.ndarray] = []
        offset = np.zeros(k, dtype=np.int64)

        def visit(axis: int, used: float) -> bool:
            if axis == k:
                found.append(home + offset)
                return len(found) <= limit
            offset[axis] = 0
            if not visit(axis + 1, used):
                return False
            for sign, face in ((1, hi[axis]), (-1, lo[axis])):
                step = 1
                while True:
                    extra = face + (step - 1) * w
                    if used + extra > radius:
                        break
                    offset[axis] = sign * step
                    if not visit(axis + 1, used + extra):
                        return False
                    step += 1
            offset[axis] = 0
            return True

        return found if visit(0, 0.0) else None

    def candidates(self, y: np.ndarray, radius: float) -> tuple[np.ndarray, bool]:
        """Sorted indices with embedded distance <= radius, and whether the scan fell back."""
        n = self.vectors.shape[0]
        cells = self.cells_in_ball(y, radius, 2 * n)
        if cells is None:
            pool = np.arange(n)
            fell_back = True
        else:
            hits = [self.buckets[c.tobytes()] for c in cells if c.tobytes() in self.buckets]
            pool = np.sort(np.concatenate(hits)) if hits else np.zeros(0, dtype=np.int64)
            fell_back = False
        dist = np.abs(self.vectors[pool] - y).sum(axis=1)
        return pool[dist <= radius], fell_back


@dataclass(eq=False)
class Repetition:
    embedding: em.NetEmbedding | em.GridEmbedding
    data: em.EmbeddedDataset
    table: BucketTable
    seed: RandomSeed


@dataclass(eq=False)
class AnnIndex:
    points: np.ndarray
    repetitions: list[Repetition]
    epsilon: float
    c: float
    variant: str
    fail_prob: float
    a: float
    stats: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.repetitions)

    @property
    def k(self) -> int:
        return self.repetitions[0].embedding.matrix.k


def repetition_count(epsilon: float, fail_prob: float, a: float = DEFAULT_AMPLIFICATION) -> int:
    """m = ceil((a / eps) ln(1 / fail_prob)), at least 1."""
    if not 0 < fail_prob < 1:
        raise ValueError("fail_prob must lie in (0, 1)")
    if not a > 0:
        raise ValueError("a must be positive")
    return max(1, math.ceil(a / epsilon * math.log(1.0 / fail_prob)))


def build_index(points, epsilon: float, c: float = 2.0, variant: str = "net",
                fail_prob: float = 0.1, seed: RandomSeed | int = 0,
                plan: em.DimensionPlan | None = None, a: float = DEFAULT_AMPLIFICATION,
                m: int | None = None) -> AnnIndex:
    """Build ``m`` independent embeddings (default from ``fail_prob``) with bucket tables.

    ``plan`` fixes the target dimension; by default it comes from
    :func:`plan_dimension` with an estimated doubling constant.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    if variant not in ("net", "grid"):
        raise ValueError("variant must be 'net' or 'grid'")
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    seed = as_seed(seed)
    if plan is None:
        lam = em.estimate_doubling_constant(X, _default_scales(X), seed=seed.child("lambda")) if len(X) > 1 else 1.0
        scale = c if variant == "net" else X.shape[1]
        plan = em.plan_dimension(lam, epsilon, scale)
    count = m if m is not None else repetition_count(epsilon, fail_prob, a)
    if not 1 <= count <= MAX_REPETITIONS:
        raise ValueError(f"repetition count {count} outside [1, {MAX_REPETITIONS}]")
    width = (1 + 3 * epsilon) / plan.k
    reps = []
    for i in range(count):
        s = seed.child(f"rep{i}")
        if variant == "net":
            e, data = em.embed_dataset_net(X, epsilon, c, plan, s)
        else:
            e, data = em.embed_dataset_grid(X, epsilon, plan, s)
        reps.append(Repetition(e, data, BucketTable.build(data.vectors, width), s))
    return AnnIndex(X, reps, epsilon, c, variant, fail_prob, a)


def _default_scales(X: np.ndarray) -> list[float]:
    return [1.0, 2.0, 4.0, 8.0]


@dataclass(frozen=True)
class QueryTrace:
    answer: int | None
    repetition: int | None
    candidates_scanned: int
    fallbacks: int


def query_trace(index: AnnIndex, q) -> QueryTrace:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.points.shape[1],):
        raise ValueError(f"query must have dimension {index.points.shape[1]}")
    near = 1 + 3 * index.epsilon
    accept = 1 + 9 * index.epsilon
    scanned = fallbacks = 0
    for r, rep in enumerate(index.repetitions):
        cand, fell_back = rep.table.candidates(em.embed_query(rep.embedding, q), near)
        scanned += cand.size
        fallbacks += fell_back
        if cand.size:
            true = np.abs(index.points[cand] - q).sum(axis=1)
            ok = np.flatnonzero(true <= accept)
            if ok.size:
                return QueryTrace(int(cand[ok[0]]), r, scanned, fallbacks)
    return QueryTrace(None, None, scanned, fallbacks)


def query(index: AnnIndex, q) -> int | None:
    """Index of a point within 1 + 9 eps of q, or None.

    Repetitions are tried in order and candidates by point index, so the
    answer is deterministic.
    """
    return query_trace(index, q).answer


def linear_scan_oracle(points, q, threshold: float) -> int | None:
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if X.size == 0:
        return None
    dist = np.abs(X - np.asarray(q, dtype=np.float64)).sum(axis=1)
    best = int(np.argmin(dist))
    return best if dist[best] <= threshold else None


def save_index(directory: str | Path, index: AnnIndex) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_block(out / "points.bin", index.points)
    for i, rep in enumerate(index.repetitions):
        em.save_embedding(out / f"rep{i}", rep.embedding, rep.data, rep.seed)
    manifest = {
        "epsilon": index.epsilon,
        "c": index.c,
        "variant": index.variant,
        "m": index.m,
        "fail_prob": index.fail_prob,
        "seeds": [rep.seed.to_json() for rep in index.repetitions],
        "a": index.a,
        "k": index.k,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_index(directory: str | Path) -> AnnIndex:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    X = read_block(src / "points.bin")
    width = (1 + 3 * manifest["epsilon"]) / manifest["k"]
    reps = []
    for i, s in enumerate(manifest["seeds"]):
        e, data = em.load_embedding(src / f"rep{i}", X)
        reps.append(Repetition(e, data, BucketTable.build(data.vectors, width), RandomSeed.from_json(s)))
    return AnnIndex(X, reps, manifest["epsilon"], manifest["c"], manifest["variant"],
                    manifest["fail_prob"], manifest["a"])
