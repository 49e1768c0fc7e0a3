"""Near-neighbor preserving embeddings h = f o g for doubling subsets of l1.

``g`` snaps each data point to a representative: its net center (net
variant) or the anchor corner of its grid cell at width eps/d (grid
variant). ``f`` is a Cauchy projection. Data points go through ``h``;
queries only through ``f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import grid_partition as gp
from .datasets import read_block, write_block
from .net_builder import NetBuilderConfig, NetResult, build_approx_net
from .projection import (CauchyMatrix, load_matrix, make_projection, project, project_anchors,
                         save_matrix, scale_factor)
from .rng import RandomSeed, as_seed

FIXED_POINT_START = 32
FIXED_POINT_STEPS = 64


def estimate_doubling_constant(points, scales: Sequence[float], samples: int = 64,
                               seed: RandomSeed | int = 0) -> float:
    """Largest greedy (r/2)-cover of a sampled ball B(p, r) ∩ P over centers and scales.

    A heuristic stand-in for the doubling constant: the greedy cover is an
    r/2-packing of the ball, so it over-counts a minimal cover by at most
    the packing slack.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    rng = as_seed(seed).child("doubling").generator()
    picks = np.arange(n) if n <= samples else rng.choice(n, size=samples, replace=False)
    best = 1
    for p in picks:
        dist = np.abs(X - X[p]).sum(axis=1)
        for r in scales:
            ball = X[dist <= r]
            uncovered = np.ones(len(ball), dtype=bool)
            count = 0
            while uncovered.any():
                i = int(np.argmax(uncovered))
                uncovered &= np.abs(ball - ball[i]).sum(axis=1) > r / 2
                count += 1
            best = max(best, count)
    return float(best)


@dataclass(frozen=True)
class DimensionPlan:
    k: int
    epsilon: float
    c: float
    lambda_estimate: float
    zeta_cal: float = 1.0
    exponent_cal: float = 2.0


def plan_dimension(lambda_estimate: float, epsilon: float, scale_param: float,
                   zeta_cal: float = 1.0, exponent_cal: float = 2.0,
                   escalate: bool = False, delta: float | None = None,
                   variant: str = "net", d: int | None = None) -> DimensionPlan:
    """k = ceil(zeta_cal * max(2, log2(lam) log2(scale/eps))^(exponent_cal/eps)).

    With ``escalate`` the result is raised to the explicit far-point
    requirement (see :func:`far_point_required_k`) when it falls short.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    if lambda_estimate < 1 or scale_param < 1:
        raise ValueError("need lambda_estimate >= 1 and scale_param >= 1")
    if zeta_cal <= 0 or exponent_cal <= 0:
        raise ValueError("calibration constants must be positive")
    base = max(2.0, math.log2(lambda_estimate) * math.log2(scale_param / epsilon))
    k = max(1, math.ceil(zeta_cal * base ** (exponent_cal / epsilon)))
    if escalate:
        need = far_point_required_k(lambda_estimate, scale_param, epsilon,
                                 delta if delta is not None else epsilon / 5,
                                 variant=variant, d=d)
        k = max(k, need)
    return DimensionPlan(k, epsilon, scale_param, lambda_estimate, zeta_cal, exponent_cal)


def far_radius(k: int, epsilon: float) -> int:
    """D0 = ceil(800 T / k)."""
    return math.ceil(800.0 * scale_factor(k, epsilon) / k)


def far_point_required_k(lam: float, scale_param: float, epsilon: float, delta: float,
                      variant: str = "net", d: int | None = None) -> int:
    """Smallest k meeting the explicit far-point inequality, by fixed-point iteration.

    net:  k > 4 log2(lam) log2(c D0 / eps) + 2 log2(2 lam / delta)
    grid: k >= 20 log2(lam) log2(d D0 / (eps delta))
    with D0 = ceil(800 T(k) / k) depending on k itself.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")

    def need(k: int) -> int:
        D0 = far_radius(k, min(epsilon, 0.5))
        if variant == "net":
            rhs = 4 * math.log2(lam) * math.log2(scale_param * D0 / epsilon) + 2 * math.log2(2 * lam / delta)
            return math.floor(rhs) + 1
        dd = d if d is not None else scale_param
        return max(1, math.ceil(20 * math.log2(lam) * math.log2(dd * D0 / (epsilon * delta))))

    k = FIXED_POINT_START
    for _ in range(FIXED_POINT_STEPS):
        nxt = max(1, need(k))
        if nxt == k:
            return k
        k = nxt
    raise RuntimeError(
        f"fixed point for k did not settle in {FIXED_POINT_STEPS} steps "
        f"(lam={lam}, scale={scale_param}, eps={epsilon}, delta={delta})")


@dataclass(eq=False)
class NetEmbedding:
    net: NetResult
    matrix: CauchyMatrix
    plan: DimensionPlan
    epsilon: float
    representatives: np.ndarray
    variant: str = "net"

    def embed_query(self, q) -> np.ndarray:
        return embed_query(self, q)


@dataclass(eq=False)
class GridEmbedding:
    cover: gp.GridCover
    matrix: CauchyMatrix
    plan: DimensionPlan
    epsilon: float
    representatives: np.ndarray
    variant: str = "grid"

    def embed_point(self, x) -> np.ndarray:
        """h'(x) for one point or a batch, independent of the data set.

        Snapping and projection run fused: O(d) plus O(d k) per point.
        """
        grid = self.cover.grid
        gp.cell_of(grid, x)  # validates dimension and cell-id range
        return project_anchors(self.matrix, x, grid.t, grid.w)

    def embed_query(self, q) -> np.ndarray:
        return embed_query(self, q)


Embedding = Union[NetEmbedding, GridEmbedding]


@dataclass(eq=False)
class EmbeddedDataset:
    vectors: np.ndarray
    source: np.ndarray
    variant: str
    meta: dict = field(default_factory=dict)


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")


def embed_dataset_net(points, epsilon: float, c: float, plan: DimensionPlan,
                      seed: RandomSeed | int,
                      net_config: NetBuilderConfig | None = None,
                      net: NetResult | None = None) -> tuple[NetEmbedding, EmbeddedDataset]:
    """Net variant: c-approximate (eps/c)-net, then a fresh Cauchy projection.

    A prebuilt ``net`` of radius eps/c may be passed to reuse one covering.
    """
    _check_eps(epsilon)
    if c < 1:
        raise ValueError("c must be >= 1")
    X = np.asarray(points, dtype=np.float64)
    seed = as_seed(seed)
    r = epsilon / c
    if net is None:
        if net_config is None:
            net_config = NetBuilderConfig.derive(X.shape[0], X.shape[1], r, c, seed.child("net"))
        net = build_approx_net(X, r, c, net_config)
    elif not math.isclose(net.r, r):
        raise ValueError(f"net radius {net.r} does not match eps/c = {r}")
    reps = X[net.assignment]
    matrix = make_projection(X.shape[1], plan.k, min(epsilon, 0.5), seed.child("projection"))
    emb = NetEmbedding(net, matrix, plan, epsilon, reps)
    return emb, EmbeddedDataset(project(matrix, reps), X, "net")


def embed_dataset_grid(points, epsilon: float, plan: DimensionPlan,
                       seed: RandomSeed | int) -> tuple[GridEmbedding, EmbeddedDataset]:
    """Grid variant: anchor corners of a shifted grid of width eps/d, then a projection."""
    _check_eps(epsilon)
    X = np.asarray(points, dtype=np.float64)
    d = X.shape[1]
    seed = as_seed(seed)
    grid = gp.make_grid(d, epsilon / d, seed.child("grid"))
    cover = gp.build_cover(grid, X)
    reps = cover.representative_of_points()
    matrix = make_projection(d, plan.k, epsilon, seed.child("projection"))
    emb = GridEmbedding(cover, matrix, plan, epsilon, reps)
    return emb, EmbeddedDataset(project(matrix, reps), X, "grid")


def embed_query(e: Embedding, q) -> np.ndarray:
    return project(e.matrix, q)


@dataclass(frozen=True)
class AuditRecord:
    D0: float
    far_count: int
    violations: int
    min_far_image: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def far_point_audit(e: Embedding, q, D0_override: float | None = None) -> AuditRecord:
    """Check that every representative at distance >= D0 from q maps to distance >= 4 from f(q)."""
    q = np.asarray(q, dtype=np.float64)
    D0 = float(D0_override) if D0_override is not None else float(far_radius(e.matrix.k, min(e.epsilon, 0.5)))
    reps = np.unique(e.representatives, axis=0)
    far = reps[np.abs(reps - q).sum(axis=1) >= D0]
    if far.size == 0:
        return AuditRecord(D0, 0, 0, math.inf)
    img = np.abs(project(e.matrix, far) - project(e.matrix, q)).sum(axis=1)
    return AuditRecord(D0, int(far.shape[0]), int((img < 4.0).sum()), float(img.min()))


def success_conditions(e: Embedding, data: EmbeddedDataset, q, epsilon: float | None = None) -> tuple[bool, bool]:
    """The two near-neighbor conditions for query q (needs a point within distance 1).

    1. ||h(p*) - f(q)|| <= 1 + 3 eps for the nearest point p*;
    2. every p with ||p - q|| > 1 + 9 eps has ||h(p) - f(q)|| > 1 + 3 eps.
    """
    eps = e.epsilon if epsilon is None else epsilon
    q = np.asarray(q, dtype=np.float64)
    true = np.abs(data.source - q).sum(axis=1)
    star = int(np.argmin(true))
    if true[star] > 1.0:
        raise ValueError("query has no point within distance 1")
    emb = np.abs(data.vectors - embed_query(e, q)).sum(axis=1)
    near_ok = bool(emb[star] <= 1 + 3 * eps)
    far = true > 1 + 9 * eps
    far_ok = bool(np.all(emb[far] > 1 + 3 * eps))
    return near_ok, far_ok


def save_embedding(directory: str | Path, e: Embedding, data: EmbeddedDataset, seed: RandomSeed) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(e.matrix, out / "matrix.bin")
    write_block(out / "vectors.bin", data.vectors)
    write_block(out / "representatives.bin", e.representatives)
    manifest = {
        "variant": e.variant,
        "epsilon": e.epsilon,
        "c_or_d": e.plan.c,
        "k": e.matrix.k,
        "seed": seed.to_json(),
        "lambda_estimate": e.plan.lambda_estimate,
    }
    if isinstance(e, NetEmbedding):
        (out / "net.json").write_text(e.net.to_json())
    else:
        manifest["grid_offsets"] = [float(v) for v in e.cover.grid.t]
        manifest["grid_width"] = e.cover.grid.w
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_embedding(directory: str | Path, points) -> tuple[Embedding, EmbeddedDataset]:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    X = np.asarray(points, dtype=np.float64)
    matrix = load_matrix(src / "matrix.bin")
    reps = read_block(src / "representatives.bin")
    plan = DimensionPlan(manifest["k"], manifest["epsilon"], manifest["c_or_d"], manifest["lambda_estimate"])
    seed = RandomSeed.from_json(manifest["seed"])
    if manifest["variant"] == "net":
        net = NetResult.from_json((src / "net.json").read_text())
        e: Embedding = NetEmbedding(net, matrix, plan, manifest["epsilon"], reps)
    else:
        grid = gp.ShiftedGrid(manifest["grid_width"], np.asarray(manifest["grid_offsets"]), seed.child("grid"))
        cover = gp.build_cover(grid, X)
        e = GridEmbedding(cover, matrix, plan, manifest["epsilon"], reps)
    return e, EmbeddedDataset(read_block(src / "vectors.bin"), X, manifest["variant"])
