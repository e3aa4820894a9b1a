"""
Random processes: configuration model, Polya urn, PAG, the two reconnecting
chains and W-random graphs

Every sampler draws from an `RngStream`, so a (seed, key) pair fixes the
output byte for byte.
"""
from typing import List, Literal, Sequence, Tuple, Union

import numpy as np
import structlog

from multigraph_limits.errors import DomainError
from multigraph_limits.graph_core import (
    COUNT_DTYPE,
    AdjacencyMatrix,
    DegreeSequence,
    UrnConfiguration,
    adjacency_to_urn,
    pair_counts,
    urn_to_adjacency,
)
from multigraph_limits.multigraphon import Multigraphon

logger = structlog.get_logger(__name__)

UrnMethod = Literal["dirichlet", "sequential"]


class RngStream:
    """Philox stream identified by a 64-bit seed and a spawn key"""

    def __init__(self, seed: int, key: Sequence[int] = ()):
        if not 0 <= int(seed) < 2**64:
            raise DomainError(f"seed {seed} is not a 64-bit unsigned value")
        self.seed = int(seed)
        self.key = tuple(int(part) for part in key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, index: int) -> "RngStream":
        """Independent stream (seed, key + (index,))"""
        return RngStream(self.seed, self.key + (int(index),))

    def spawn(self, count: int) -> List["RngStream"]:
        return [self.child(index) for index in range(count)]

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key})"


class FenwickTree:
    """Prefix sums over nonnegative float weights with O(log n) update and search"""

    def __init__(self, weights: Sequence[float]):
        values = np.asarray(weights, dtype=float)
        self.size = int(values.size)
        self._tree = np.zeros(self.size + 1)
        self._tree[1:] = values
        for index in range(1, self.size + 1):
            parent = index + (index & -index)
            if parent <= self.size:
                self._tree[parent] += self._tree[index]
        self._top = 1 << (self.size.bit_length() - 1) if self.size else 0

    def add(self, index: int, delta: float) -> None:
        position = index + 1
        while position <= self.size:
            self._tree[position] += delta
            position += position & -position

    def prefix(self, index: int) -> float:
        """Sum of weights[0:index]"""
        total = 0.0
        position = index
        while position > 0:
            total += self._tree[position]
            position -= position & -position
        return total

    def find(self, value: float) -> int:
        """Smallest index whose inclusive prefix sum exceeds value"""
        position = 0
        remaining = value
        step = self._top
        while step:
            candidate = position + step
            if candidate <= self.size and self._tree[candidate] <= remaining:
                position = candidate
                remaining -= self._tree[candidate]
            step >>= 1
        return min(position, self.size - 1)


def _as_degree_sequence(degrees: Union[DegreeSequence, Sequence[int]]) -> DegreeSequence:
    return degrees if isinstance(degrees, DegreeSequence) else DegreeSequence(degrees)


def _check_kappa(kappa: float) -> None:
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")


def configuration_model(degrees: Union[DegreeSequence, Sequence[int]], rng: RngStream) -> AdjacencyMatrix:
    """Uniform matching of stubs: shuffle the stub word, then pair consecutive stubs"""
    sequence = _as_degree_sequence(degrees)
    stubs = np.repeat(np.arange(sequence.n), sequence.degrees)
    word = rng.generator.permutation(stubs)
    return AdjacencyMatrix(pair_counts(sequence.n, word))


def polya_urn(n: int, length: int, kappa: float, rng: RngStream, method: UrnMethod = "dirichlet") -> UrnConfiguration:
    """Polya urn word: ball L+1 has colour i with probability (d_i + kappa) / (L + n kappa)

    "sequential" runs the urn literally. "dirichlet" draws the colour counts
    from the Dirichlet-multinomial law and shuffles them, which gives the same
    law because the urn word is exchangeable.
    """
    _check_kappa(kappa)
    if n < 1 or length < 0:
        raise DomainError("polya_urn needs n >= 1 and a nonnegative length")
    generator = rng.generator
    if method == "sequential":
        tree = FenwickTree(np.full(n, kappa))
        levels = generator.random(length)
        word = np.empty(length, dtype=np.int64)
        for position in range(length):
            colour = tree.find(levels[position] * (position + n * kappa))
            word[position] = colour
            tree.add(colour, 1.0)
        return UrnConfiguration(n, word, validate=False)
    if method != "dirichlet":
        raise DomainError(f"unknown urn method {method!r}")
    if n == 1:
        counts = np.array([length])
    else:
        counts = generator.multinomial(length, generator.dirichlet(np.full(n, kappa)))
    word = generator.permutation(np.repeat(np.arange(n), counts))
    return UrnConfiguration(n, word, validate=False)


def pag(n: int, m: int, kappa: float, rng: RngStream, method: UrnMethod = "dirichlet") -> AdjacencyMatrix:
    """PAG_kappa(n, m): pair the balls of a Polya urn word of length 2m"""
    if m < 0:
        raise DomainError("edge count must be nonnegative")
    return urn_to_adjacency(polya_urn(n, 2 * m, kappa, rng, method))


def _edge_table(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.nonzero(np.triu(counts))
    multiplicity = counts[rows, cols].astype(np.int64)
    multiplicity = np.where(rows == cols, multiplicity // 2, multiplicity)
    return rows, cols, multiplicity


def _remove_edge(counts: np.ndarray, i: int, j: int) -> None:
    if i == j:
        counts[i, i] -= 2
    else:
        counts[i, j] -= 1
        counts[j, i] -= 1


def _add_edge(counts: np.ndarray, i: int, j: int) -> None:
    if i == j:
        counts[i, i] += 2
    else:
        counts[i, j] += 1
        counts[j, i] += 1


def edge_reconnect_step(
    matrix: AdjacencyMatrix, kappa: float, rng: RngStream, detach_first: bool = False
) -> AdjacencyMatrix:
    """One step of the edge reconnecting chain

    A uniform edge loses one endpoint (fair coin), which moves to w with
    probability (d(B, w) + kappa) / (2m + n kappa). With `detach_first` the
    degrees are read after removing the moving stub instead.
    """
    _check_kappa(kappa)
    m = matrix.edge_counts().m
    if m == 0:
        raise DomainError("edge reconnecting needs at least one edge")
    generator = rng.generator
    rows, cols, multiplicity = _edge_table(matrix.counts)
    chosen = int(np.searchsorted(np.cumsum(multiplicity), generator.random() * m, side="right"))
    chosen = min(chosen, rows.size - 1)
    first, second = int(rows[chosen]), int(cols[chosen])
    moving, staying = (first, second) if generator.random() < 0.5 else (second, first)

    weights = matrix.degrees().degrees.astype(float)
    if detach_first:
        weights[moving] -= 1.0
    weights += kappa
    cumulative = np.cumsum(weights)
    target = int(np.searchsorted(cumulative, generator.random() * cumulative[-1], side="right"))
    target = min(target, matrix.n - 1)

    counts = np.array(matrix.counts, dtype=COUNT_DTYPE)
    _remove_edge(counts, first, second)
    _add_edge(counts, staying, target)
    return AdjacencyMatrix(counts)


def ball_replacement_step(psi: UrnConfiguration, kappa: float, rng: RngStream) -> UrnConfiguration:
    """Recolour a uniform position with probability (d(Psi, i) + kappa) / (2m + n kappa), the old ball still counted"""
    _check_kappa(kappa)
    if psi.length == 0:
        raise DomainError("ball replacement needs a nonempty word")
    generator = rng.generator
    position = int(generator.integers(psi.length))
    weights = psi.multiplicities().astype(float) + kappa
    cumulative = np.cumsum(weights)
    colour = int(np.searchsorted(cumulative, generator.random() * cumulative[-1], side="right"))
    word = np.array(psi.word)
    word[position] = min(colour, psi.n - 1)
    return UrnConfiguration(psi.n, word, validate=False)


def run_ball_replacement(psi: UrnConfiguration, kappa: float, steps: int, rng: RngStream) -> UrnConfiguration:
    """`steps` ball-replacement moves with Fenwick-tree colour bookkeeping"""
    _check_kappa(kappa)
    if steps < 0:
        raise DomainError("step count must be nonnegative")
    if steps and psi.length == 0:
        raise DomainError("ball replacement needs a nonempty word")
    generator = rng.generator
    word = np.array(psi.word)
    tree = FenwickTree(psi.multiplicities() + kappa)
    total = psi.length + psi.n * kappa
    positions = generator.integers(psi.length, size=steps) if steps else np.empty(0, dtype=np.int64)
    levels = generator.random(steps)
    for position, level in zip(positions.tolist(), levels.tolist()):
        colour = tree.find(level * total)
        old = int(word[position])
        if colour != old:
            tree.add(old, -1.0)
            tree.add(colour, 1.0)
            word[position] = colour
    logger.debug("ball replacement run finished", steps=steps, n=psi.n, length=psi.length)
    return UrnConfiguration(psi.n, word, validate=False)


def run_edge_reconnect(matrix: AdjacencyMatrix, kappa: float, steps: int, rng: RngStream) -> AdjacencyMatrix:
    """`steps` edge-reconnect moves, run as ball replacement on a preimage word

    A uniform position of the word is a uniform edge plus a fair choice of
    its endpoint, so the image under urn_to_adjacency follows the edge chain.
    """
    if matrix.edge_counts().m == 0 and steps:
        raise DomainError("edge reconnecting needs at least one edge")
    return urn_to_adjacency(run_ball_replacement(adjacency_to_urn(matrix), kappa, steps, rng))


def w_random(kernel: Multigraphon, k: int, rng: RngStream) -> Tuple[AdjacencyMatrix, np.ndarray]:
    """k x k W-random multigraph and the latent uniforms behind it"""
    if k < 0:
        raise DomainError("pattern size must be nonnegative")
    counts, latent = kernel.sample_graph(k, rng.generator)
    return AdjacencyMatrix(counts), latent
