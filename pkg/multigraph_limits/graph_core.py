"""
Labeled multigraphs, urn configurations and the urn -> adjacency map

Indices are 0-based everywhere in the Python API. The edge-list format and
every printed key are 1-based.
"""
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from multigraph_limits.config import get_settings
from multigraph_limits.errors import (
    DomainError,
    EdgeListFormatError,
    InvalidAdjacencyError,
    InvalidUrnError,
    OddDegreeSumError,
)

COUNT_DTYPE = np.int32


class EdgeCounts(NamedTuple):
    """Total edges m(B) and non-loop edges m'(B)"""
    m: int
    m_prime: int


class DegreeSequence:
    """Vector of stub counts, one per vertex or colour"""

    __slots__ = ("_degrees",)

    def __init__(self, degrees: Iterable[int]):
        values = np.array(degrees if isinstance(degrees, np.ndarray) else list(degrees), dtype=np.int64)
        if values.ndim != 1:
            raise DomainError("degree sequence must be one-dimensional")
        if np.any(values < 0):
            raise DomainError("degrees must be nonnegative")
        if int(values.sum()) % 2:
            raise OddDegreeSumError(f"degree sum {int(values.sum())} is odd")
        values.flags.writeable = False
        self._degrees = values

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def n(self) -> int:
        return int(self._degrees.size)

    @property
    def total(self) -> int:
        return int(self._degrees.sum())

    def as_tuple(self) -> tuple:
        return tuple(int(d) for d in self._degrees)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DegreeSequence) and self.as_tuple() == other.as_tuple()

    def __hash__(self) -> int:
        return hash(("DegreeSequence", self.as_tuple()))

    def __repr__(self) -> str:
        return f"DegreeSequence({list(self.as_tuple())})"


class AdjacencyMatrix:
    """Immutable labeled multigraph stored as a symmetric count matrix

    counts[i, j] is the number of edges between i != j; counts[i, i] is twice
    the number of loops at i.
    """

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: "np.ndarray | Sequence[Sequence[int]]", validate: bool = False):
        array = np.array(counts, dtype=COUNT_DTYPE, copy=True)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise InvalidAdjacencyError(f"adjacency matrix must be square, got shape {array.shape}")
        array.flags.writeable = False
        self._counts = array
        self._hash: Optional[int] = None
        if validate or get_settings().validate_matrices:
            self.validate()

    @classmethod
    def zeros(cls, n: int) -> "AdjacencyMatrix":
        return cls(np.zeros((n, n), dtype=COUNT_DTYPE))

    def validate(self) -> "AdjacencyMatrix":
        """Check symmetry, nonnegativity and even diagonal (O(n^2))"""
        counts = self._counts
        if np.any(counts < 0):
            raise InvalidAdjacencyError("edge counts must be nonnegative")
        if not np.array_equal(counts, counts.T):
            raise InvalidAdjacencyError("adjacency matrix must be symmetric")
        if np.any(np.diagonal(counts) % 2):
            raise InvalidAdjacencyError("diagonal entries count loop stubs and must be even")
        return self

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def n(self) -> int:
        return int(self._counts.shape[0])

    def degree(self, i: int) -> int:
        """d(B, i): stubs at vertex i, loops counting twice"""
        if not 0 <= i < self.n:
            raise DomainError(f"vertex {i} out of range for n={self.n}")
        return int(self._counts[i].sum(dtype=np.int64))

    def degrees(self) -> DegreeSequence:
        return DegreeSequence(self._counts.sum(axis=1, dtype=np.int64))

    def edge_counts(self) -> EdgeCounts:
        total = int(self._counts.sum(dtype=np.int64))
        upper = int(np.triu(self._counts, k=1).sum(dtype=np.int64))
        return EdgeCounts(m=total // 2, m_prime=upper)

    def relabel(self, tau: Sequence[int]) -> "AdjacencyMatrix":
        """result[i, j] = counts[tau[i], tau[j]]"""
        perm = np.asarray(tau, dtype=np.int64)
        if perm.shape != (self.n,) or not np.array_equal(np.sort(perm), np.arange(self.n)):
            raise DomainError("tau must be a permutation of range(n)")
        return AdjacencyMatrix(self._counts[np.ix_(perm, perm)])

    def principal_submatrix(self, k: int) -> "AdjacencyMatrix":
        """Restriction to the first k vertices"""
        if not 0 <= k <= self.n:
            raise DomainError(f"k={k} exceeds n={self.n}")
        return AdjacencyMatrix(self._counts[:k, :k])

    def simplify(self) -> "AdjacencyMatrix":
        """Drop loops and keep one copy of every parallel edge"""
        simple = (self._counts > 0).astype(COUNT_DTYPE)
        np.fill_diagonal(simple, 0)
        return AdjacencyMatrix(simple)

    def upper_triangle(self) -> np.ndarray:
        """Entries (i <= j) in row-major order; the lexicographic sort key"""
        rows, cols = np.triu_indices(self.n)
        return self._counts[rows, cols]

    def to_edge_list(self) -> str:
        """Serialize in the edge-list format (1-based, sorted, LF endings)"""
        counts = self._counts
        m = self.edge_counts().m
        lines = [f"{self.n} {m}"]
        rows, cols = np.nonzero(np.triu(counts))
        for i, j in zip(rows.tolist(), cols.tolist()):
            multiplicity = int(counts[i, j]) // 2 if i == j else int(counts[i, j])
            lines.append(f"{i + 1} {j + 1} {multiplicity}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "AdjacencyMatrix":
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines:
            raise EdgeListFormatError("empty edge list")
        try:
            n, m = (int(token) for token in lines[0].split())
        except ValueError as exc:
            raise EdgeListFormatError(f"bad header line: {lines[0]!r}") from exc
        counts = np.zeros((n, n), dtype=COUNT_DTYPE)
        previous = None
        for line in lines[1:]:
            try:
                i, j, c = (int(token) for token in line.split())
            except ValueError as exc:
                raise EdgeListFormatError(f"bad edge line: {line!r}") from exc
            if not (1 <= i <= j <= n) or c < 1:
                raise EdgeListFormatError(f"edge line out of range: {line!r}")
            if previous is not None and (i, j) <= previous:
                raise EdgeListFormatError(f"edge lines must be sorted and unique: {line!r}")
            previous = (i, j)
            if i == j:
                counts[i - 1, i - 1] = 2 * c
            else:
                counts[i - 1, j - 1] = counts[j - 1, i - 1] = c
        matrix = cls(counts, validate=True)
        if matrix.edge_counts().m != m:
            raise EdgeListFormatError(f"header declares m={m}, lines give {matrix.edge_counts().m}")
        return matrix

    def key(self) -> str:
        """Canonical edge-list string, used as a stable table key"""
        return self.to_edge_list()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AdjacencyMatrix) and np.array_equal(self._counts, other._counts)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self._counts.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"AdjacencyMatrix({self._counts.tolist()})"


class UrnConfiguration:
    """A word of ball colours psi in range(n)^length"""

    __slots__ = ("_n", "_word")

    def __init__(self, n: int, word: Iterable[int], validate: bool = True):
        if n < 1:
            raise InvalidUrnError("an urn needs at least one colour")
        array = np.array(word if isinstance(word, np.ndarray) else list(word), dtype=np.int64)
        if array.ndim != 1:
            raise InvalidUrnError("urn word must be one-dimensional")
        if validate and array.size and (array.min() < 0 or array.max() >= n):
            raise InvalidUrnError(f"colours must lie in range({n})")
        array.flags.writeable = False
        self._n = n
        self._word = array

    @property
    def n(self) -> int:
        return self._n

    @property
    def word(self) -> np.ndarray:
        return self._word

    @property
    def length(self) -> int:
        return int(self._word.size)

    def multiplicities(self) -> np.ndarray:
        """d(Psi, i) for every colour"""
        return np.bincount(self._word, minlength=self._n)

    def type_vector(self) -> DegreeSequence:
        return DegreeSequence(self.multiplicities())

    def to_adjacency(self) -> AdjacencyMatrix:
        return urn_to_adjacency(self)

    def key(self) -> str:
        return " ".join(str(colour + 1) for colour in self._word.tolist())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UrnConfiguration) and self._n == other._n and np.array_equal(self._word, other._word)

    def __hash__(self) -> int:
        return hash((self._n, self._word.tobytes()))

    def __repr__(self) -> str:
        return f"UrnConfiguration(n={self._n}, word={self._word.tolist()})"


def pair_counts(n: int, word: np.ndarray) -> np.ndarray:
    """Symmetric count matrix of the consecutive pairs (word[2e], word[2e+1])"""
    first = word[0::2]
    second = word[1::2]
    directed = np.bincount(first * n + second, minlength=n * n).reshape(n, n)
    return (directed + directed.T).astype(COUNT_DTYPE)


def urn_to_adjacency(psi: UrnConfiguration) -> AdjacencyMatrix:
    """Pair consecutive balls into edges; equal colours give a loop (diagonal += 2)"""
    if psi.length % 2:
        raise InvalidUrnError(f"urn word has odd length {psi.length}")
    return AdjacencyMatrix(pair_counts(psi.n, psi.word))


def adjacency_to_urn(matrix: AdjacencyMatrix) -> UrnConfiguration:
    """Canonical preimage word: edges listed in lexicographic order"""
    counts = matrix.counts
    rows, cols = np.nonzero(np.triu(counts))
    multiplicity = counts[rows, cols].astype(np.int64)
    multiplicity = np.where(rows == cols, multiplicity // 2, multiplicity)
    pairs = np.repeat(np.stack([rows, cols], axis=1), multiplicity, axis=0)
    return UrnConfiguration(matrix.n, pairs.reshape(-1))
