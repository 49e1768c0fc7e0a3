"""Cauchy random projections f(u) = A u / T and their distortion probes."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numba
import numpy as np

from .cauchy_stats import cauchy_chunks, sample_cauchy
from .rng import RandomSeed, as_seed

MAGIC = b"L1FD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIdQ")
_NO_OFFSETS = np.zeros(0)


def scale_factor(k: int, epsilon: float) -> float:
    """T = (k/pi) ln(1 + (k/eps)^2): expectation of k |Cauchy| terms truncated at k/eps."""
    return (k / math.pi) * math.log1p((k / epsilon) ** 2)


def _check_params(d: int, k: int, epsilon: float) -> None:
    if d < 1 or k < 1:
        raise ValueError(f"dimensions must be >= 1, got d={d}, k={k}")
    if not 0.0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")


@dataclass(frozen=True, eq=False)
class CauchyMatrix:
    k: int
    d: int
    entries: np.ndarray
    T: float
    seed: RandomSeed

    def __post_init__(self) -> None:
        if self.entries.shape != (self.k, self.d):
            raise ValueError("entries must have shape (k, d)")
        if not self.T > 0:
            raise ValueError("T must be positive")
        self.entries.setflags(write=False)


def make_projection(d: int, k: int, epsilon: float, seed: RandomSeed | int) -> CauchyMatrix:
    _check_params(d, k, epsilon)
    seed = as_seed(seed)
    entries = sample_cauchy((k, d), seed.child("matrix"))
    return CauchyMatrix(k, d, entries, scale_factor(k, epsilon), seed)


def project(m: CauchyMatrix, x) -> np.ndarray:
    """Apply ``A x / T`` to one vector of length d or to an ``(n, d)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.d or x.ndim > 2:
        raise ValueError(f"expected vectors of dimension {m.d}, got shape {x.shape}")
    out = _apply(np.ascontiguousarray(x.reshape(-1, m.d)), m.entries, m.T, _NO_OFFSETS, 1.0, False)
    return out[0] if x.ndim == 1 else out


@numba.njit(cache=True)
def _apply(X, A, T, snap_t, snap_w, snap):  # pragma: no cover - compiled
    # Each output is summed over the axes in ascending order with its own
    # accumulator, so a row's image never depends on the batch it arrives
    # in or on the BLAS build. That keeps reports byte-identical and the
    # grid map oblivious to other points. Blocks of 8 points share each
    # load of a matrix row. With ``snap`` the points are first moved to
    # their grid anchors t + w * floor((x - t) / w) in place.
    n, d = X.shape
    k = A.shape[0]
    out = np.empty((n, k))
    B = 8
    xb = np.empty((d, B))
    acc = np.empty(B)
    for i0 in range(0, n, B):
        b = min(B, n - i0)
        for l in range(d):
            for t in range(B):
                v = X[i0 + t, l] if t < b else 0.0
                if snap and t < b:
                    v = snap_t[l] + snap_w * np.floor((v - snap_t[l]) / snap_w)
                xb[l, t] = v
        for j in range(k):
            for t in range(B):
                acc[t] = 0.0
            for l in range(d):
                a = A[j, l]
                for t in range(B):
                    acc[t] += xb[l, t] * a
            for t in range(b):
                out[i0 + t, j] = acc[t] / T
    return out


def project_anchors(m: CauchyMatrix, x, offsets: np.ndarray, width: float) -> np.ndarray:
    """``project`` applied to grid anchors t + w floor((x - t) / w), fused in one pass.

    Bit-identical to snapping first and projecting after; it skips the
    intermediate arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.d or x.ndim > 2:
        raise ValueError(f"expected vectors of dimension {m.d}, got shape {x.shape}")
    out = _apply(np.ascontiguousarray(x.reshape(-1, m.d)), m.entries, m.T,
                 np.ascontiguousarray(offsets, dtype=np.float64), float(width), True)
    return out[0] if x.ndim == 1 else out


def save_matrix(m: CauchyMatrix, dest: str | Path | BinaryIO) -> None:
    header = _HEADER.pack(MAGIC, VERSION, m.k, m.d, m.T, int(m.seed.value))
    body = np.ascontiguousarray(m.entries, dtype="<f8").tobytes()
    if isinstance(dest, (str, Path)):
        Path(dest).write_bytes(header + body)
    else:
        dest.write(header + body)


def load_matrix(src: str | Path | BinaryIO) -> CauchyMatrix:
    raw = Path(src).read_bytes() if isinstance(src, (str, Path)) else src.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated matrix artifact")
    magic, version, k, d, T, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ValueError("not an l1fd matrix artifact")
    body = raw[_HEADER.size:]
    if len(body) != 8 * k * d:
        raise ValueError("matrix body has the wrong length")
    entries = np.frombuffer(body, dtype="<f8").reshape(k, d).astype(np.float64)
    # the stream label is not part of the artifact
    return CauchyMatrix(k, d, entries, T, RandomSeed(seed))


def distortion_dimension(delta: float, epsilon: float, gamma: float, zeta_cal: float = 1.0) -> int:
    """k = (ln 1/delta)^(1/(eps-gamma)) * zeta_cal, zeta_cal standing in for 1/zeta(gamma)."""
    if not 0.0 < gamma < epsilon <= 0.5:
        raise ValueError("need 0 < gamma < epsilon <= 1/2")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(zeta_cal * math.log(1.0 / delta) ** (1.0 / (epsilon - gamma))))


@dataclass(frozen=True)
class DistortionReport:
    contraction_rate: float
    expansion_rate: float
    pairs_tested: int
    epsilon: float
    gamma: float
    k: int


def _fresh_ratios(k: int, diff: np.ndarray, T: float, pairs: int, seed: RandomSeed) -> np.ndarray:
    """||A diff||_1 / T for ``pairs`` independent k x d Cauchy matrices."""
    d = diff.size
    out = np.empty(pairs)
    pos = 0
    per_block = max(1, (1 << 20) // (k * d))
    for block in cauchy_chunks(pairs, seed, width=k * d, chunk_rows=per_block):
        rows = block.shape[0]
        A = block.reshape(rows, k, d)
        out[pos:pos + rows] = np.abs(A @ diff).sum(axis=1) / T
        pos += rows
    return out


def distortion_probe(d: int, k: int, epsilon: float, gamma: float, pairs: int,
                     seed: RandomSeed | int) -> DistortionReport:
    """Contraction/expansion frequencies of a fixed unit-distance pair over fresh matrices."""
    _check_params(d, k, epsilon)
    if not 0.0 < gamma < epsilon:
        raise ValueError("need 0 < gamma < epsilon")
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    seed = as_seed(seed)
    p = np.zeros(d)
    q = np.full(d, 1.0 / d)
    ratios = _fresh_ratios(k, p - q, scale_factor(k, epsilon), pairs, seed.child("probe"))
    return DistortionReport(
        contraction_rate=float(np.mean(ratios <= 1.0 - epsilon)),
        expansion_rate=float(np.mean(ratios >= 1.0 + epsilon)),
        pairs_tested=pairs,
        epsilon=epsilon,
        gamma=gamma,
        k=k,
    )


def stability_samples(x, k: int, matrices: int, epsilon: float, seed: RandomSeed | int) -> np.ndarray:
    """Samples of ||f(x)||_1 T / ||x||_1 over independent matrices (k x len(x))."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.abs(x).sum()
    if norm == 0:
        raise ValueError("x must be nonzero")
    T = scale_factor(k, epsilon)
    return _fresh_ratios(k, x, T, matrices, as_seed(seed).child("stability")) * T / norm
