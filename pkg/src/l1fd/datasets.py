"""Synthetic low-doubling point sets with planted near-neighbor queries.

Points live on a low-dimensional structure (a flat, a union of segments,
or clusters inside a flat) mapped into R^d, plus bounded noise. Each
planted query has exactly one point within ``near_distance`` and every
other point at least ``far_distance`` away; control queries have every
point at least ``far_distance`` away. Both are checked by exact scan.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .rng import RandomSeed, as_seed

HEADER = "l1fd-points v1"
GEOMETRIES = ("subspace", "segment-union", "clustered")
TRIES_PER_QUERY = 200


@dataclass(frozen=True)
class DatasetSpec:
    n: int
    d: int
    intrinsic_dim: int = 3
    geometry: str = "subspace"
    noise: float = 0.0
    planted_queries: int = 100
    near_distance: float = 1.0
    far_distance: float = 6.0
    seed: RandomSeed = field(default_factory=lambda: RandomSeed(0))
    control_queries: int = 0
    # Target fraction of points whose nearest neighbor is at least
    # far_distance + near_distance away; fixes the overall scale.
    isolated_fraction: float = 0.75

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if not 1 <= self.intrinsic_dim <= self.d:
            raise ValueError("need 1 <= intrinsic_dim <= d")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if not 0 < self.near_distance <= 1:
            raise ValueError("near_distance must lie in (0, 1]")
        if not self.near_distance < self.far_distance:
            raise ValueError("near_distance must be below far_distance")
        if self.noise < 0 or self.planted_queries < 0 or self.control_queries < 0:
            raise ValueError("noise and query counts must be nonnegative")
        if not 0 < self.isolated_fraction < 1:
            raise ValueError("isolated_fraction must lie in (0, 1)")

    def to_json(self) -> dict:
        out = asdict(self)
        out["seed"] = self.seed.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> DatasetSpec:
        obj = dict(obj)
        if "seed" in obj:
            s = obj["seed"]
            obj["seed"] = RandomSeed.from_json(s) if isinstance(s, dict) else as_seed(s)
        return cls(**obj)


@dataclass(eq=False)
class Dataset:
    spec: DatasetSpec
    points: np.ndarray
    queries: np.ndarray
    kinds: list[str]          # "planted" or "control" per query
    targets: list[int | None]  # the unique near point of each planted query
    scale: float


def nearest_distances(X: np.ndarray, block: int = 256) -> np.ndarray:
    """Exact l1 distance from each point to its nearest other point."""
    n = X.shape[0]
    out = np.full(n, np.inf)
    for s in range(0, n, block):
        D = np.abs(X[s:s + block, None, :] - X[None, :, :]).sum(axis=2)
        rows = np.arange(D.shape[0])
        D[rows, rows + s] = np.inf
        out[s:s + block] = D.min(axis=1)
    return out


def _latent(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    n, m = spec.n, spec.intrinsic_dim
    if spec.geometry == "subspace":
        return rng.uniform(0.0, 1.0, size=(n, m))
    if spec.geometry == "segment-union":
        pieces = max(2, min(8, n // 16 or 1))
        starts = rng.uniform(0.0, 1.0, size=(pieces, m))
        dirs = rng.normal(size=(pieces, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        which = rng.integers(0, pieces, size=n)
        t = rng.uniform(0.0, 1.0, size=n)
        return starts[which] + t[:, None] * dirs[which]
    clusters = max(2, min(16, n // 32 or 1))
    centers = rng.uniform(0.0, 1.0, size=(clusters, m))
    which = rng.integers(0, clusters, size=n)
    return centers[which] + rng.normal(scale=0.05, size=(n, m))


def _l1_sphere(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    w = rng.exponential(size=d)
    return radius * w / w.sum() * rng.choice([-1.0, 1.0], size=d)


def gen_dataset(spec: DatasetSpec) -> Dataset:
    """Sample points and queries; raises ValueError when the separations cannot be met."""
    seed = as_seed(spec.seed)
    rng = seed.child("points").generator()
    Z = _latent(spec, rng)
    basis = rng.normal(size=(spec.intrinsic_dim, spec.d))
    X = Z @ basis
    scale = 1.0
    if spec.n > 1:
        nn = nearest_distances(X)
        q = np.quantile(nn, 1.0 - spec.isolated_fraction)
        if q > 0:
            scale = (spec.far_distance + spec.near_distance) / q
            X = X * scale
    if spec.noise > 0:
        X = X + rng.uniform(-spec.noise, spec.noise, size=X.shape)

    qrng = seed.child("queries").generator()
    queries: list[np.ndarray] = []
    kinds: list[str] = []
    targets: list[int | None] = []
    for _ in range(spec.planted_queries):
        for _ in range(TRIES_PER_QUERY):
            p = int(qrng.integers(0, spec.n))
            radius = spec.near_distance * qrng.uniform(0.5, 1.0)
            q = X[p] + _l1_sphere(qrng, spec.d, radius)
            dist = np.abs(X - q).sum(axis=1)
            others = np.delete(dist, p)
            if dist[p] <= spec.near_distance and (others.size == 0 or others.min() >= spec.far_distance):
                break
        else:
            raise ValueError(
                f"could not plant a query with one point within {spec.near_distance} and the rest "
                f"beyond {spec.far_distance} after {TRIES_PER_QUERY} tries; lower far_distance, "
                f"noise or isolated_fraction (scale={scale:.4g})")
        queries.append(q)
        kinds.append("planted")
        targets.append(p)
    for _ in range(spec.control_queries):
        for _ in range(TRIES_PER_QUERY):
            p = int(qrng.integers(0, spec.n))
            q = X[p] + _l1_sphere(qrng, spec.d, spec.far_distance * qrng.uniform(1.0, 2.0))
            if np.abs(X - q).sum(axis=1).min() >= spec.far_distance:
                break
        else:
            raise ValueError(f"could not place a control query beyond {spec.far_distance} of every point")
        queries.append(q)
        kinds.append("control")
        targets.append(None)
    Q = np.array(queries) if queries else np.zeros((0, spec.d))
    return Dataset(spec, X, Q, kinds, targets, scale)


def verify_queries(ds: Dataset) -> bool:
    """Re-check every query's separation by exact scan."""
    for q, kind, t in zip(ds.queries, ds.kinds, ds.targets):
        dist = np.abs(ds.points - q).sum(axis=1)
        if kind == "planted":
            if dist[t] > ds.spec.near_distance or np.delete(dist, t).min(initial=np.inf) < ds.spec.far_distance:
                return False
        elif dist.min() < ds.spec.far_distance:
            return False
    return True


def write_points(path: str | Path, X: np.ndarray) -> None:
    """Text form: header, ``<d> <n>``, then one line of 17-digit floats per point.

    A ``.bin`` suffix writes the binary block form instead.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if Path(path).suffix == ".bin":
        write_block(path, X)
        return
    n, d = X.shape
    lines = [HEADER, f"{d} {n}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in X]
    Path(path).write_text("\n".join(lines) + "\n")


def read_points(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".bin":
        return read_block(path)
    text = path.read_text().split("\n")
    if text[0] != HEADER:
        raise ValueError(f"{path}: not an l1fd point file")
    d, n = (int(v) for v in text[1].split())
    rows = [line for line in text[2:] if line.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} points, found {len(rows)}")
    X = np.array([[float(v) for v in line.split()] for line in rows], dtype=np.float64).reshape(n, d)
    return X


def write_block(path: str | Path, vectors: np.ndarray) -> None:
    """Binary form: n u64, k u64, then row-major little-endian float64."""
    v = np.ascontiguousarray(vectors, dtype="<f8")
    n, k = v.shape
    Path(path).write_bytes(struct.pack("<QQ", n, k) + v.tobytes())


def read_block(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError("truncated vector block")
    n, k = struct.unpack_from("<QQ", raw)
    body = raw[16:]
    if len(body) != 8 * n * k:
        raise ValueError("vector block has the wrong length")
    return np.frombuffer(body, dtype="<f8").reshape(n, k).astype(np.float64)


def save_dataset(directory: str | Path, ds: Dataset) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "points.txt", ds.points)
    write_points(out / "queries.txt", ds.queries)
    meta = {"spec": ds.spec.to_json(), "kinds": ds.kinds, "targets": ds.targets, "scale": ds.scale}
    (out / "queries.json").write_text(json.dumps(meta, indent=1, sort_keys=True))


def load_dataset(directory: str | Path) -> Dataset:
    src = Path(directory)
    meta = json.loads((src / "queries.json").read_text())
    Q = read_points(src / "queries.txt") if meta["kinds"] else np.zeros((0, meta["spec"]["d"]))
    return Dataset(DatasetSpec.from_json(meta["spec"]), read_points(src / "points.txt"), Q,
                   meta["kinds"], meta["targets"], meta["scale"])
