"""Standard Cauchy sampling and Monte-Carlo estimators for |X|^(1/2) statistics.

All samplers draw in fixed-size chunks, each chunk from its own named
substream, so output does not depend on how the chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .rng import RandomSeed, as_seed, open_uniform

SQRT2 = math.sqrt(2.0)
CHUNK = 1 << 18


def cauchy_inverse_cdf(u):
    """Inverse CDF of the standard Cauchy law, ``tan(pi * (u - 1/2))``."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("cauchy_inverse_cdf needs 0 < u < 1")
    out = np.tan(np.pi * (arr - 0.5))
    return float(out) if out.ndim == 0 else out


def _chunks(total: int, chunk: int) -> Iterator[tuple[int, int]]:
    for i, start in enumerate(range(0, total, chunk)):
        yield i, min(chunk, total - start)


def cauchy_chunks(n: int, seed: RandomSeed, width: int = 1, chunk_rows: int | None = None):
    """Yield ``(rows, width)`` blocks of i.i.d. Cauchy samples, ``n`` rows in total."""
    seed = as_seed(seed)
    if chunk_rows is None:
        chunk_rows = max(1, CHUNK // max(1, width))
    for i, rows in _chunks(n, chunk_rows):
        rng = seed.child(f"chunk{i}").generator()
        u = open_uniform(rng, (rows, width))
        yield np.tan(np.pi * (u - 0.5))


def sample_cauchy(shape, seed: RandomSeed) -> np.ndarray:
    """Array of i.i.d. standard Cauchy samples with the given shape."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    total = int(np.prod(shape)) if shape else 1
    if total == 0:
        return np.zeros(shape)
    flat = np.concatenate([b.ravel() for b in cauchy_chunks(total, seed)])
    return flat.reshape(shape)


@dataclass(frozen=True)
class SumStats:
    s: float
    s_tilde: float
    k: int

    @classmethod
    def from_values(cls, values: Sequence[float]) -> SumStats:
        v = np.abs(np.asarray(values, dtype=np.float64))
        if v.size == 0:
            raise ValueError("SumStats needs at least one value")
        return cls(float(v.sum()), float(np.sqrt(v).sum()), int(v.size))


def estimate_abs_sqrt_moment(n: int, seed: RandomSeed) -> float:
    """Monte-Carlo mean of |X|^(1/2); the exact value is sqrt(2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 0.0
    for block in cauchy_chunks(n, seed):
        total += float(np.sqrt(np.abs(block)).sum())
    return total / n


def mgf_analytic_bound(beta: float) -> float:
    """Upper bound 2/beta on E[exp(-beta |X|^(1/2))], valid for beta > 1."""
    if not beta > 1.0:
        raise ValueError("the bound is only proven for beta > 1")
    return 2.0 / beta


def estimate_mgf(beta: float, n: int, seed: RandomSeed) -> float:
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 0.0
    for block in cauchy_chunks(n, seed):
        total += float(np.exp(-beta * np.sqrt(np.abs(block))).sum())
    return total / n


def mgf_standard_error_bound(n: int) -> float:
    # exp(-beta*sqrt|X|) lives in [0, 1], so its variance is at most 1/4
    return 0.5 / math.sqrt(n)


def tail_analytic_bound(D: float, k: int) -> float:
    """min(1, (10/D)^k), the bound on Pr[S~ <= E[S~]/D]."""
    if not D > 1.0:
        raise ValueError("D must exceed 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    return min(1.0, (10.0 / D) ** k)


def tail_proof_bound(D: float, k: int) -> float:
    """Tighter value left by the Chernoff argument at beta = D: (2 e^sqrt2 / D)^k."""
    if not D > 1.0:
        raise ValueError("D must exceed 1")
    return min(1.0, (2.0 * math.exp(SQRT2) / D) ** k)


def tail_probabilities(Ds: Sequence[float], k: int, trials: int, seed: RandomSeed) -> dict[float, float]:
    """Empirical Pr[sum_j |X_j|^(1/2) <= sqrt(2) k / D] for several D on shared samples."""
    if k < 1 or trials < 1:
        raise ValueError("k and trials must be >= 1")
    for D in Ds:
        if not D > 1.0:
            raise ValueError("D must exceed 1")
    thresholds = np.array([SQRT2 * k / D for D in Ds])
    hits = np.zeros(len(Ds), dtype=np.int64)
    for block in cauchy_chunks(trials, seed, width=k):
        s_tilde = np.sqrt(np.abs(block)).sum(axis=1)
        hits += (s_tilde[:, None] <= thresholds[None, :]).sum(axis=0)
    return {float(D): int(h) / trials for D, h in zip(Ds, hits)}


def estimate_tail_probability(D: float, k: int, trials: int, seed: RandomSeed) -> float:
    return tail_probabilities([D], k, trials, seed)[float(D)]


def single_term_tail(D: float) -> float:
    """Exact Pr[|X|^(1/2) <= sqrt(2)/D] = (2/pi) arctan(2/D^2)."""
    return (2.0 / math.pi) * math.atan(2.0 / D**2)


def check_norm_sandwich(values: Sequence[float], rtol: float = 1e-12) -> bool:
    """True iff S <= S~^2 <= k S (up to round-off) for S = sum|v|, S~ = sum|v|^(1/2)."""
    st = SumStats.from_values(values)
    sq = st.s_tilde**2
    slack = rtol * max(st.s, sq) * st.k
    return st.s <= sq + slack and sq <= st.k * st.s + slack
