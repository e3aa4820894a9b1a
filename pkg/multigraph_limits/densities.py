"""
Monte Carlo estimators of induced homomorphism densities
"""
import math
from functools import partial
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence

import numpy as np
import structlog

from multigraph_limits.config import get_settings
from multigraph_limits.errors import DomainError
from multigraph_limits.exact_oracle import DistributionTable, pattern_table
from multigraph_limits.generators import RngStream
from multigraph_limits.graph_core import AdjacencyMatrix
from multigraph_limits.models import DensityEstimate
from multigraph_limits.multigraphon import Multigraphon

logger = structlog.get_logger(__name__)

CHUNK_SAMPLES = 1 << 16


def _estimate(total: float, squares: float, samples: int) -> DensityEstimate:
    mean = total / samples
    if samples == 1:
        return DensityEstimate(mean=mean, stderr=0.0, samples=1)
    variance = max(squares - samples * mean * mean, 0.0) / (samples - 1)
    return DensityEstimate(mean=mean, stderr=math.sqrt(variance / samples), samples=samples)


def _chunks(samples: int) -> List[int]:
    if samples < 1:
        raise DomainError("sample count must be at least 1")
    full, rest = divmod(samples, CHUNK_SAMPLES)
    return [CHUNK_SAMPLES] * full + ([rest] if rest else [])


def sample_injections(n: int, k: int, samples: int, generator: np.random.Generator) -> np.ndarray:
    """Uniform injections [k] -> [n] as rows

    Rejection from uniform maps while k <= n / 2, partial Fisher-Yates beyond.
    """
    if k > n:
        raise DomainError(f"cannot inject {k} points into {n}")
    if k <= n / 2:
        maps = generator.integers(n, size=(samples, k))
        while True:
            ordered = np.sort(maps, axis=1)
            clashing = np.nonzero(np.any(ordered[:, 1:] == ordered[:, :-1], axis=1))[0]
            if clashing.size == 0:
                return maps
            maps[clashing] = generator.integers(n, size=(clashing.size, k))
    return np.argsort(generator.random((samples, n)), axis=1)[:, :k]


def hom_density_mc(
    pattern: AdjacencyMatrix, graph: AdjacencyMatrix, samples: int, rng: RngStream, injective: bool = False
) -> DensityEstimate:
    """Average of 1[A(i, j) = B(phi(i), phi(j)) for all i, j] over uniform maps phi"""
    k, n = pattern.n, graph.n
    chunks = _chunks(samples)
    if k == 0:
        return DensityEstimate(mean=1.0, stderr=0.0, samples=samples)
    generator = rng.generator
    rows, cols = np.triu_indices(k)
    wanted = pattern.counts[rows, cols]
    hits = 0
    for size in chunks:
        maps = sample_injections(n, k, size, generator) if injective else generator.integers(n, size=(size, k))
        hits += int(np.all(graph.counts[maps[:, rows], maps[:, cols]] == wanted, axis=1).sum())
    return _estimate(hits, hits, samples)


def graphon_density_mc(pattern: AdjacencyMatrix, kernel: Multigraphon, samples: int, rng: RngStream) -> DensityEstimate:
    """Average of prod_{i <= j} W(U_i, U_j, A(i, j)) over i.i.d. uniform U"""
    total = squares = 0.0
    for size in _chunks(samples):
        weights = kernel.sample_pattern_weights(pattern, size, rng.generator)
        total += float(weights.sum())
        squares += float(np.square(weights).sum())
    return _estimate(total, squares, samples)


def sampled_pattern_distribution(graph: AdjacencyMatrix, k: int, samples: int, rng: RngStream) -> DistributionTable:
    """Empirical law of B[phi, phi] for uniform injections phi: [k] -> [n]"""
    if k > graph.n:
        raise DomainError(f"pattern size {k} exceeds graph size {graph.n}")
    rows, cols = np.triu_indices(k)
    uppers = []
    for size in _chunks(samples):
        maps = sample_injections(graph.n, k, size, rng.generator)
        uppers.append(graph.counts[maps[:, rows], maps[:, cols]])
    stacked = np.concatenate(uppers)
    return pattern_table(k, stacked, np.full(stacked.shape[0], 1.0 / samples))


def degree_sample(graph: AdjacencyMatrix) -> np.ndarray:
    """Rescaled degrees d(B, i) / n"""
    return graph.degrees().degrees / graph.n


def pooled_estimate(estimates: Sequence[DensityEstimate]) -> DensityEstimate:
    return DensityEstimate.pool(estimates)


def _run_part(estimator: Callable[..., DensityEstimate], samples: int, stream: RngStream) -> DensityEstimate:
    return estimator(samples=samples, rng=stream)


def split_streams(
    estimator: Callable[..., DensityEstimate],
    samples: int,
    rng: RngStream,
    streams: int,
    workers: Optional[int] = None,
) -> DensityEstimate:
    """Split `samples` over child streams of `rng` and pool the per-stream estimates

    `estimator` is called as estimator(samples=..., rng=...); bind the other
    arguments with functools.partial. The result depends on the stream set
    only, never on the worker count.
    """
    if streams < 1:
        raise DomainError("need at least one stream")
    base, extra = divmod(samples, streams)
    parts = [(base + (1 if index < extra else 0), rng.child(index)) for index in range(streams)]
    parts = [(size, stream) for size, stream in parts if size > 0]
    workers = workers or get_settings().workers
    task = partial(_run_part, estimator)
    if workers > 1 and len(parts) > 1:
        logger.debug("running estimator streams in a process pool", streams=len(parts), workers=workers)
        with Pool(processes=workers) as pool:
            estimates = pool.starmap(task, parts)
    else:
        estimates = [task(size, stream) for size, stream in parts]
    return pooled_estimate(estimates)
