"""
Closed-form laws and brute-force enumeration for tiny instances

Probabilities are products of factorials and rising factorials, so every
formula is assembled in log space and exponentiated once at the end.
Enumeration order is lexicographic: words by their colour sequence,
matrices by their upper triangle.
"""
import itertools
import json
import math
from typing import Callable, Dict, Hashable, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
import structlog
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg
from scipy.special import betaln, gammaln

from multigraph_limits.config import get_settings
from multigraph_limits.errors import (
    BudgetExceededError,
    ConvergenceError,
    DomainError,
    InconsistentDegreeLawError,
    StateSpaceTooLargeError,
)
from multigraph_limits.graph_core import (
    COUNT_DTYPE,
    AdjacencyMatrix,
    DegreeSequence,
    UrnConfiguration,
    urn_to_adjacency,
)
from multigraph_limits.models import ChainKind

logger = structlog.get_logger(__name__)

NORMALIZATION_TOLERANCE = 1e-12
STATIONARY_TOLERANCE = 1e-13
POWER_ITERATIONS = 100_000
_CHUNK_CELLS = 1 << 22


class DistributionTable:
    """Finite law: key -> probability, keys in enumeration order"""

    def __init__(self, entries: Mapping[Hashable, float]):
        self._entries: Dict[Hashable, float] = dict(entries)

    @property
    def entries(self) -> Dict[Hashable, float]:
        return dict(self._entries)

    def __getitem__(self, key: Hashable) -> float:
        return self._entries.get(key, 0.0)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def keys(self):
        return self._entries.keys()

    def total(self) -> float:
        return math.fsum(self._entries.values())

    def is_normalized(self, tolerance: float = NORMALIZATION_TOLERANCE) -> bool:
        return abs(self.total() - 1.0) <= tolerance

    def max_abs_difference(self, other: "DistributionTable") -> float:
        keys = set(self._entries) | set(other._entries)
        return max((abs(self[key] - other[key]) for key in keys), default=0.0)

    def tv_distance(self, other: "DistributionTable") -> float:
        keys = set(self._entries) | set(other._entries)
        return 0.5 * math.fsum(abs(self[key] - other[key]) for key in keys)

    def map(self, function: Callable[[Hashable], Hashable]) -> "DistributionTable":
        """Push the law forward through `function`, merging equal images"""
        pushed: Dict[Hashable, float] = {}
        for key, probability in self._entries.items():
            image = function(key)
            pushed[image] = pushed.get(image, 0.0) + probability
        return DistributionTable(pushed)

    def to_dict(self) -> Dict[str, float]:
        return {_key_string(key): probability for key, probability in self._entries.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __repr__(self) -> str:
        return f"DistributionTable({len(self)} entries, total={self.total():.15g})"


def _key_string(key: Hashable) -> str:
    if isinstance(key, (AdjacencyMatrix, UrnConfiguration)):
        return key.key()
    if isinstance(key, DegreeSequence):
        return " ".join(str(d) for d in key.as_tuple())
    return str(key)


def _check_kappa(kappa: float) -> None:
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")


def _log_polya(counts: np.ndarray, n: int, kappa: float) -> np.ndarray:
    """log of prod_i kappa^(d_i rising) / (n kappa)^(L rising) for rows of colour counts"""
    counts = np.asarray(counts, dtype=float)
    length = counts.sum(axis=-1)
    numerator = np.sum(gammaln(counts + kappa), axis=-1) - n * gammaln(kappa)
    denominator = gammaln(n * kappa + length) - gammaln(n * kappa)
    return numerator - denominator


def _log_pairings(matrix: AdjacencyMatrix) -> float:
    """log of m! 2^m' / (prod_{i<j} B(i,j)! prod_i (B(i,i)/2)!), the number of words with image B"""
    counts = matrix.counts.astype(np.int64)
    m, m_prime = matrix.edge_counts()
    upper = counts[np.triu_indices(matrix.n, k=1)]
    loops = np.diagonal(counts) // 2
    return float(gammaln(m + 1) + m_prime * math.log(2.0) - gammaln(upper + 1).sum() - gammaln(loops + 1).sum())


def polya_probability(psi: UrnConfiguration, kappa: float) -> float:
    """Probability that the Polya urn started empty produces the word psi (any length)"""
    _check_kappa(kappa)
    return float(math.exp(_log_polya(psi.multiplicities(), psi.n, kappa)))


def stationary_probability(matrix: AdjacencyMatrix, kappa: float) -> float:
    """Stationary law of the edge reconnecting chain, equal to the PAG_kappa law"""
    _check_kappa(kappa)
    matrix.validate()
    degrees = matrix.counts.sum(axis=1, dtype=np.int64)
    return float(math.exp(_log_polya(degrees, matrix.n, kappa) + _log_pairings(matrix)))


def configuration_probability(matrix: AdjacencyMatrix) -> float:
    """P(configuration model on the degrees of B returns B)"""
    matrix.validate()
    degrees = matrix.counts.sum(axis=1, dtype=np.int64)
    total = int(degrees.sum())
    log_value = gammaln(degrees + 1).sum() - gammaln(total + 1) + _log_pairings(matrix)
    return float(math.exp(log_value))


def edge_stationary_probability(
    matrix: AdjacencyMatrix, degree_law: Union[DistributionTable, DegreeSequence]
) -> float:
    """P(degrees) times the configuration-model probability of B given its degrees"""
    if isinstance(degree_law, DegreeSequence):
        degree_law = DistributionTable({degree_law: 1.0})
    total = 2 * matrix.edge_counts().m
    for sequence in degree_law:
        if not isinstance(sequence, DegreeSequence):
            raise InconsistentDegreeLawError(f"degree law key {sequence!r} is not a DegreeSequence")
        if sequence.n != matrix.n or sequence.total != total:
            raise InconsistentDegreeLawError(
                f"degree law entry {sequence.as_tuple()} does not fit n={matrix.n}, 2m={total}"
            )
    weight = degree_law[matrix.degrees()]
    if weight == 0.0:
        return 0.0
    return weight * configuration_probability(matrix)


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Nonnegative integer vectors of length `parts` summing to `total`, lexicographically"""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def polya_degree_law(n: int, m: int, kappa: float) -> DistributionTable:
    """Law of the colour counts of a Polya word of length 2m (Dirichlet-multinomial)"""
    _check_kappa(kappa)
    length = 2 * m
    size = math.comb(length + n - 1, n - 1)
    if size > get_settings().word_budget:
        raise BudgetExceededError(f"{size} degree sequences exceed the word budget")
    table: Dict[Hashable, float] = {}
    log_multinomial = gammaln(length + 1)
    for counts in compositions(length, n):
        vector = np.asarray(counts)
        log_value = log_multinomial - gammaln(vector + 1).sum() + _log_polya(vector, n, kappa)
        table[DegreeSequence(vector)] = float(math.exp(log_value))
    return DistributionTable(table)


def _chunked_digits(base: int, width: int, total: int, limit: int, row_cells: int = 0) -> Iterator[np.ndarray]:
    """Rows 0..total-1 written as width base-`base` digits, most significant first"""
    chunk = max(1, _CHUNK_CELLS // max(width + row_cells, 1))
    powers = base ** np.arange(width - 1, -1, -1, dtype=np.int64)
    if total > limit:
        raise BudgetExceededError(f"{total} enumerations exceed the budget {limit}")
    for start in range(0, total, chunk):
        index = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (index[:, None] // powers[None, :]) % base


def enumerate_words(n: int, length: int, row_cells: int = 0) -> Iterator[np.ndarray]:
    """All words in range(n)^length in lexicographic order, as chunks of rows"""
    yield from _chunked_digits(n, length, n**length, get_settings().word_budget, row_cells)


def exact_homdensity(pattern: AdjacencyMatrix, graph: AdjacencyMatrix) -> float:
    """Fraction of maps phi: [k] -> [n] with A(i, j) = B(phi(i), phi(j)) for all i, j"""
    k, n = pattern.n, graph.n
    if k == 0:
        return 1.0
    total = n**k
    hits = 0
    rows, cols = np.triu_indices(k)
    wanted = pattern.counts[rows, cols]
    for maps in _chunked_digits(n, k, total, get_settings().enumeration_budget):
        images = graph.counts[maps[:, rows], maps[:, cols]]
        hits += int(np.all(images == wanted, axis=1).sum())
    return hits / total


def _injections(n: int, k: int) -> Iterator[np.ndarray]:
    total = math.perm(n, k)
    if total > get_settings().enumeration_budget:
        raise BudgetExceededError(f"{total} injections exceed the enumeration budget")
    chunk = max(1, _CHUNK_CELLS // max(k, 1))
    iterator = itertools.permutations(range(n), k)
    while True:
        block = list(itertools.islice(iterator, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64).reshape(len(block), k)


def exact_injective_density(pattern: AdjacencyMatrix, graph: AdjacencyMatrix) -> float:
    """Same as exact_homdensity over injective maps only"""
    k, n = pattern.n, graph.n
    if k > n:
        raise DomainError(f"pattern size {k} exceeds graph size {n}")
    if k == 0:
        return 1.0
    rows, cols = np.triu_indices(k)
    wanted = pattern.counts[rows, cols]
    hits = 0
    for maps in _injections(n, k):
        images = graph.counts[maps[:, rows], maps[:, cols]]
        hits += int(np.all(images == wanted, axis=1).sum())
    return hits / math.perm(n, k)


def _matrix_from_upper(n: int, upper: Tuple[int, ...]) -> AdjacencyMatrix:
    counts = np.zeros((n, n), dtype=COUNT_DTYPE)
    rows, cols = np.triu_indices(n)
    counts[rows, cols] = upper
    counts = counts + np.triu(counts, k=1).T
    return AdjacencyMatrix(counts)


def _aggregate(uppers: np.ndarray, weights: np.ndarray, into: Dict[Tuple[int, ...], float]) -> None:
    unique, inverse = np.unique(uppers, axis=0, return_inverse=True)
    sums = np.bincount(inverse.ravel(), weights=weights, minlength=unique.shape[0])
    for row, value in zip(unique.tolist(), sums.tolist()):
        key = tuple(row)
        into[key] = into.get(key, 0.0) + value


def _table_from_uppers(n: int, totals: Dict[Tuple[int, ...], float]) -> DistributionTable:
    return DistributionTable({_matrix_from_upper(n, key): totals[key] for key in sorted(totals)})


def pattern_table(k: int, uppers: np.ndarray, weights: np.ndarray) -> DistributionTable:
    """Aggregate weighted k x k patterns, given row-wise as upper triangles, into a table"""
    totals: Dict[Tuple[int, ...], float] = {}
    if uppers.shape[0]:
        _aggregate(uppers, weights, totals)
    return _table_from_uppers(k, totals)


def exact_pattern_distribution(graph: AdjacencyMatrix, k: int, injective: bool = True) -> DistributionTable:
    """Law of the k x k pattern B[phi, phi] for a uniform injection (or uniform map) phi"""
    n = graph.n
    if k > n and injective:
        raise DomainError(f"pattern size {k} exceeds graph size {n}")
    rows, cols = np.triu_indices(k)
    totals: Dict[Tuple[int, ...], float] = {}
    if injective:
        batches: Iterator[np.ndarray] = _injections(n, k)
        count = math.perm(n, k)
    else:
        batches = _chunked_digits(n, k, n**k, get_settings().enumeration_budget)
        count = n**k
    for maps in batches:
        uppers = graph.counts[maps[:, rows], maps[:, cols]]
        _aggregate(uppers, np.full(maps.shape[0], 1.0 / count), totals)
    return _table_from_uppers(k, totals)


def exact_pag_distribution(n: int, m: int, kappa: float) -> DistributionTable:
    """PAG_kappa(n, m) law by pushing every Polya word through urn_to_adjacency"""
    _check_kappa(kappa)
    length = 2 * m
    if n**length > get_settings().word_budget:
        raise BudgetExceededError(f"{n}^{length} words exceed the word budget")
    if m == 0:
        return DistributionTable({AdjacencyMatrix.zeros(n): 1.0})
    rows, cols = np.triu_indices(n)
    upper_codes = rows * n + cols
    totals: Dict[Tuple[int, ...], float] = {}
    for words in enumerate_words(n, length, row_cells=n * n + n):
        size = words.shape[0]
        colour_counts = np.zeros((size, n), dtype=np.int64)
        np.add.at(colour_counts, (np.repeat(np.arange(size), length), words.ravel()), 1)
        weights = np.exp(_log_polya(colour_counts, n, kappa))
        first, second = words[:, 0::2], words[:, 1::2]
        codes = np.minimum(first, second) * n + np.maximum(first, second)
        offsets = np.arange(size)[:, None] * (n * n)
        edge_counts = np.bincount((codes + offsets).ravel(), minlength=size * n * n).reshape(size, n * n)
        uppers = edge_counts[:, upper_codes]
        # the diagonal of an adjacency matrix stores twice the loop count
        uppers = np.where(rows == cols, 2 * uppers, uppers)
        _aggregate(uppers, weights, totals)
    return _table_from_uppers(n, totals)


def enumerate_multigraphs(n: int, m: int) -> List[AdjacencyMatrix]:
    """Every matrix in A_n^m (n vertices, m edges), sorted by upper triangle"""
    cells = n * (n + 1) // 2
    size = math.comb(m + cells - 1, cells - 1)
    if size > get_settings().state_budget:
        raise StateSpaceTooLargeError(f"{size} multigraphs exceed the state budget")
    rows, cols = np.triu_indices(n)
    uppers = []
    for multiplicities in compositions(m, cells):
        uppers.append(tuple(2 * c if r == s else c for c, r, s in zip(multiplicities, rows.tolist(), cols.tolist())))
    return [_matrix_from_upper(n, upper) for upper in sorted(uppers)]


def _ball_kernel(n: int, length: int, kappa: float) -> Tuple[List[UrnConfiguration], sparse.csr_matrix]:
    size = n**length
    if size > get_settings().state_budget:
        raise StateSpaceTooLargeError(f"{size} urn words exceed the state budget")
    words = np.concatenate(list(_chunked_digits(n, length, size, size)))
    index = np.arange(size)
    colour_counts = np.stack([(words == colour).sum(axis=1) for colour in range(n)], axis=1)
    denominator = length + n * kappa
    row_parts, col_parts, data_parts = [], [], []
    for position in range(length):
        place = n ** (length - 1 - position)
        base = index - words[:, position] * place
        for colour in range(n):
            row_parts.append(index)
            col_parts.append(base + colour * place)
            data_parts.append((colour_counts[:, colour] + kappa) / denominator / length)
    kernel = sparse.coo_matrix(
        (np.concatenate(data_parts), (np.concatenate(row_parts), np.concatenate(col_parts))), shape=(size, size)
    ).tocsr()
    states = [UrnConfiguration(n, word, validate=False) for word in words]
    return states, kernel


def _edge_kernel(
    n: int, m: int, kappa: float, detach_first: bool
) -> Tuple[List[AdjacencyMatrix], sparse.csr_matrix]:
    states = enumerate_multigraphs(n, m)
    lookup = {state: position for position, state in enumerate(states)}
    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []
    for position, state in enumerate(states):
        counts = state.counts.astype(np.int64)
        degrees = counts.sum(axis=1)
        edge_rows, edge_cols = np.nonzero(np.triu(counts))
        for i, j in zip(edge_rows.tolist(), edge_cols.tolist()):
            multiplicity = counts[i, j] // 2 if i == j else counts[i, j]
            moves = [(i, j, 1.0)] if i == j else [(i, j, 0.5), (j, i, 0.5)]
            for moving, staying, coin in moves:
                weights = degrees.astype(float)
                if detach_first:
                    weights[moving] -= 1.0
                weights += kappa
                weights /= weights.sum()
                for target in range(n):
                    updated = counts.copy()
                    if i == j:
                        updated[i, i] -= 2
                    else:
                        updated[i, j] -= 1
                        updated[j, i] -= 1
                    if staying == target:
                        updated[target, target] += 2
                    else:
                        updated[staying, target] += 1
                        updated[target, staying] += 1
                    rows.append(position)
                    cols.append(lookup[AdjacencyMatrix(updated)])
                    data.append(multiplicity / m * coin * weights[target])
    size = len(states)
    kernel = sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()
    return states, kernel


def transition_kernel(
    n: int, m: int, kappa: float, chain: ChainKind, detach_first: bool = False
) -> Tuple[list, sparse.csr_matrix]:
    """Enumerated states and the exact one-step kernel of a chain

    Ball-replacement states are words of length 2m; edge-reconnect states
    are the matrices of A_n^m.
    """
    _check_kappa(kappa)
    if m < 1:
        raise DomainError("chains need at least one edge")
    if ChainKind(chain) == ChainKind.BALL_REPLACEMENT:
        return _ball_kernel(n, 2 * m, kappa)
    return _edge_kernel(n, m, kappa, detach_first)


def stationary_vector(kernel: sparse.spmatrix, dense_limit: Optional[int] = None) -> np.ndarray:
    """Solve pi K = pi, sum(pi) = 1; LU first, power iteration if the residual is too large"""
    size = kernel.shape[0]
    if size == 1:
        return np.ones(1)
    limit = get_settings().dense_solve_limit if dense_limit is None else dense_limit
    system = (kernel.T - sparse.identity(size, format="csr")).tolil()
    system[size - 1, :] = np.ones(size)
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    with np.errstate(all="ignore"):
        if size <= limit:
            pi = linalg.solve(system.toarray(), rhs)
        else:
            pi = sparse_linalg.spsolve(system.tocsc(), rhs)
    residual = float(np.max(np.abs(kernel.T @ pi - pi))) if np.all(np.isfinite(pi)) else math.inf
    if residual <= STATIONARY_TOLERANCE:
        return pi

    logger.warning("direct stationary solve inaccurate, switching to power iteration", states=size, residual=residual)
    pi = np.full(size, 1.0 / size)
    transpose = kernel.T.tocsr()
    for iteration in range(POWER_ITERATIONS):
        updated = transpose @ pi
        if float(np.max(np.abs(updated - pi))) <= STATIONARY_TOLERANCE:
            logger.info("power iteration converged", states=size, iterations=iteration + 1)
            return updated / updated.sum()
        pi = updated
    raise ConvergenceError(f"power iteration did not reach {STATIONARY_TOLERANCE} in {POWER_ITERATIONS} steps")


def enumerate_and_solve(
    n: int, m: int, kappa: float, chain: ChainKind, detach_first: bool = False
) -> DistributionTable:
    """Exact stationary law of a chain over its enumerated state space"""
    states, kernel = transition_kernel(n, m, kappa, chain, detach_first)
    logger.info("solving stationary law", chain=ChainKind(chain).value, n=n, m=m, kappa=kappa, states=len(states))
    pi = stationary_vector(kernel)
    return DistributionTable(dict(zip(states, pi.tolist())))


def polya_prefix_marginal(n: int, length: int, prefix: List[int], kappa: float) -> float:
    """P(the first len(prefix) balls are `prefix`), summed over every completion of the word"""
    _check_kappa(kappa)
    if len(prefix) > length:
        raise DomainError("prefix is longer than the word")
    wanted = np.asarray(prefix, dtype=np.int64)
    total = 0.0
    for words in enumerate_words(n, length):
        matching = words[np.all(words[:, : wanted.size] == wanted, axis=1)]
        if matching.shape[0]:
            counts = np.stack([(matching == colour).sum(axis=1) for colour in range(n)], axis=1)
            total += float(np.exp(_log_polya(counts, n, kappa)).sum())
    return total


def exact_degree_moment(n: int, m: int, kappa: float, nu: int) -> float:
    """E[(d_1 / n)^nu] under PAG_kappa(n, m); d_1 is beta-binomial(2m, kappa, (n-1) kappa)"""
    _check_kappa(kappa)
    if nu < 0:
        raise DomainError("moment order must be nonnegative")
    length = 2 * m
    if n == 1:
        return float(length**nu)
    k = np.arange(length + 1, dtype=float)
    log_pmf = (
        gammaln(length + 1)
        - gammaln(k + 1)
        - gammaln(length - k + 1)
        + betaln(k + kappa, length - k + (n - 1) * kappa)
        - betaln(kappa, (n - 1) * kappa)
    )
    return float(np.sum(np.exp(log_pmf) * (k / n) ** nu))


def kernel_commutation_gap(n: int, m: int, kappa: float) -> float:
    """max |K_ball P - P K_edge|, P the urn -> adjacency projection; zero when the chains commute"""
    words, ball = transition_kernel(n, m, kappa, ChainKind.BALL_REPLACEMENT)
    graphs, edge = transition_kernel(n, m, kappa, ChainKind.EDGE_RECONNECT)
    lookup = {graph: position for position, graph in enumerate(graphs)}
    image = np.array([lookup[urn_to_adjacency(word)] for word in words])
    projection = sparse.csr_matrix(
        (np.ones(len(words)), (np.arange(len(words)), image)), shape=(len(words), len(graphs))
    )
    gap = (ball @ projection - projection @ edge).toarray()
    return float(np.max(np.abs(gap))) if gap.size else 0.0
