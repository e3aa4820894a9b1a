"""
Multigraphon kernels W(x, y, k) and their degree functionals

Kernels are immutable. `pmf` is the vectorised evaluation used by the
samplers and estimators; `eval` is the checked scalar entry point.
"""
import json
from abc import ABC, abstractmethod
from functools import cached_property
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np
import structlog
from pydantic import TypeAdapter

from multigraph_limits.errors import DivergenceError, DomainError
from multigraph_limits.graph_core import COUNT_DTYPE, AdjacencyMatrix
from multigraph_limits.models import EmpiricalSpec, MultigraphonSpec, PoissonGammaSpec
from multigraph_limits.stats import (
    gamma_cdf,
    gamma_quantile,
    poisson_pmf,
    quadrature,
)

logger = structlog.get_logger(__name__)

SERIES_TOLERANCE = 1e-14
QUADRATURE_TOLERANCE = 1e-8
MAX_MULTIPLICITY = 10**6
DEGREE_GRID = 4096
_BLOCK = 64

_SPEC_ADAPTER = TypeAdapter(MultigraphonSpec)


def _check_unit(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name}={value} lies outside [0, 1]")


def _check_count(k: int) -> None:
    if k < 0 or int(k) != k:
        raise DomainError(f"edge multiplicity k={k} must be a nonnegative integer")


class Multigraphon(ABC):
    """Symmetric kernel W(x, y, k) with sum_k W = 1 and W(x, x, odd) = 0"""

    closed_form_quantile: bool = False

    @abstractmethod
    def pmf(self, x: np.ndarray, y: np.ndarray, k: Union[int, np.ndarray], diagonal: bool) -> np.ndarray:
        """Vectorised W(x, y, k); `diagonal` selects the x == y branch"""

    def eval(self, x: float, y: float, k: int) -> float:
        _check_unit(x, "x")
        _check_unit(y, "y")
        _check_count(k)
        value = self.pmf(np.array([x], dtype=float), np.array([y], dtype=float), int(k), diagonal=(x == y))
        return float(value[0])

    def _row_pmf(self, x: float, y: float, diagonal: bool) -> Callable[[np.ndarray], np.ndarray]:
        """k -> W(x, y, k) for a block of multiplicities at one fixed point"""
        xs = np.full(_BLOCK, x, dtype=float)
        ys = np.full(_BLOCK, y, dtype=float)
        return lambda ks: self.pmf(xs, ys, ks, diagonal=diagonal)

    def _series(self, x: float, y: float, diagonal: bool) -> Tuple[float, float, bool]:
        """(sum_k W, sum_k k W, converged) accumulated block by block until the mass reaches 1 - 1e-14"""
        row = self._row_pmf(x, y, diagonal)
        mass = 0.0
        mean = 0.0
        for start in range(0, MAX_MULTIPLICITY, _BLOCK):
            ks = np.arange(start, start + _BLOCK)
            probabilities = row(ks)
            mass += float(probabilities.sum())
            mean += float((ks * probabilities).sum())
            if mass >= 1.0 - SERIES_TOLERANCE:
                return mass, mean, True
        return mass, mean, False

    def mean_multiplicity(self, x: float, y: float) -> float:
        """sum_k k W(x, y, k) off the diagonal"""
        mass, mean, converged = self._series(x, y, diagonal=False)
        if not converged:
            raise DivergenceError(f"multiplicity series at ({x}, {y}) keeps mass {1.0 - mass} beyond k={MAX_MULTIPLICITY}")
        return mean

    def average_degree(self, x: float) -> float:
        """D(W, x) = int_0^1 sum_k k W(x, y, k) dy"""
        _check_unit(x, "x")
        return quadrature(lambda y: self.mean_multiplicity(x, y), 0.0, 1.0, QUADRATURE_TOLERANCE)

    def edge_density(self) -> float:
        """rho(W) = int_0^1 D(W, x) dx"""
        return quadrature(self.average_degree, 0.0, 1.0, QUADRATURE_TOLERANCE)

    @cached_property
    def _degree_grid(self) -> np.ndarray:
        logger.info("tabulating average degree on midpoint grid", kernel=type(self).__name__, points=DEGREE_GRID)
        midpoints = (np.arange(DEGREE_GRID) + 0.5) / DEGREE_GRID
        return np.sort([self.average_degree(float(x)) for x in midpoints])

    def degree_cdf(self, z: float) -> float:
        """F_W(z) = |{x : D(W, x) <= z}|; generic kernels use a midpoint grid"""
        if z < 0:
            raise DomainError("degree CDF is defined for z >= 0")
        grid = self._degree_grid
        return float(np.searchsorted(grid, z, side="right") / grid.size)

    def degree_quantile(self, u: float) -> float:
        """F_W^-1(u) = min{z : F_W(z) >= u}"""
        if not 0.0 < u < 1.0:
            raise DomainError(f"quantile level u={u} must lie in (0, 1)")
        grid = self._degree_grid
        index = int(np.ceil(u * grid.size)) - 1
        return float(grid[max(index, 0)])

    def simple_edge_probability(self, x: float, y: float) -> float:
        """Edge probability between distinct vertices at x, y after merging parallel edges: 1 - W(x, y, 0)"""
        _check_unit(x, "x")
        _check_unit(y, "y")
        return 1.0 - float(self.pmf(np.array([x], dtype=float), np.array([y], dtype=float), 0, diagonal=False)[0])

    def pattern_weights(self, latent: np.ndarray, pattern: AdjacencyMatrix) -> np.ndarray:
        """prod_{i <= j} W(U_i, U_j, A(i, j)) for every row of latent uniforms"""
        k = pattern.n
        weights = np.ones(latent.shape[0])
        for i in range(k):
            for j in range(i, k):
                weights *= self.pmf(latent[:, i], latent[:, j], int(pattern.counts[i, j]), diagonal=(i == j))
        return weights

    def sample_pattern_weights(self, pattern: AdjacencyMatrix, samples: int, generator: np.random.Generator) -> np.ndarray:
        return self.pattern_weights(generator.random((samples, pattern.n)), pattern)

    def _sample_multiplicity(self, x: float, y: float, diagonal: bool, generator: np.random.Generator) -> int:
        level = generator.random()
        row = self._row_pmf(x, y, diagonal)
        cumulative = 0.0
        for start in range(0, MAX_MULTIPLICITY, _BLOCK):
            ks = np.arange(start, start + _BLOCK)
            running = cumulative + np.cumsum(row(ks))
            hit = np.nonzero(running > level)[0]
            if hit.size:
                return int(ks[hit[0]])
            cumulative = float(running[-1])
        raise DivergenceError(f"could not invert the multiplicity law at ({x}, {y})")

    def sample_graph(self, k: int, generator: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """W-random k x k count matrix and its latent uniforms"""
        latent = generator.random(k)
        counts = np.zeros((k, k), dtype=COUNT_DTYPE)
        for i in range(k):
            for j in range(i, k):
                value = self._sample_multiplicity(float(latent[i]), float(latent[j]), i == j, generator)
                counts[i, j] = counts[j, i] = value
        return counts, latent

    def axiom_violations(self, points: int, generator: np.random.Generator, max_k: int = 64) -> Dict[str, float]:
        """Largest breach of symmetry, normalization and odd-diagonal-zero at random points

        Symmetry and parity are compared on k < max_k; normalization sums the
        whole series.
        """
        xs = generator.random(points)
        ys = generator.random(points)
        ks = np.arange(max_k)
        symmetry = normalization = odd_diagonal = 0.0
        for x, y in zip(xs.tolist(), ys.tolist()):
            forward = self.pmf(np.full(ks.size, x), np.full(ks.size, y), ks, diagonal=False)
            backward = self.pmf(np.full(ks.size, y), np.full(ks.size, x), ks, diagonal=False)
            on_diagonal = self.pmf(np.full(ks.size, x), np.full(ks.size, x), ks, diagonal=True)
            symmetry = max(symmetry, float(np.max(np.abs(forward - backward))))
            odd_diagonal = max(odd_diagonal, float(np.max(on_diagonal[1::2])))
            off_mass = self._series(x, y, diagonal=False)[0]
            diagonal_mass = self._series(x, x, diagonal=True)[0]
            normalization = max(normalization, abs(1.0 - off_mass), abs(1.0 - diagonal_mass))
        return {"symmetry": symmetry, "normalization": normalization, "odd_diagonal": odd_diagonal}


class PoissonKernel(Multigraphon):
    """Edge-stationary form: Poisson(F^-1(x) F^-1(y) / rho) off the diagonal, halved loops on it"""

    closed_form_quantile = True

    def __init__(self, rho: float):
        if rho <= 0:
            raise DomainError("edge density rho must be positive")
        self.rho = float(rho)

    @abstractmethod
    def scores(self, u: np.ndarray) -> np.ndarray:
        """Latent degree F^-1(u) for u in [0, 1]; 0 at u = 0 and +inf at u = 1 when unbounded"""

    @abstractmethod
    def sample_scores(self, shape: Union[int, Tuple[int, ...]], generator: np.random.Generator) -> np.ndarray:
        """Scores F^-1(U) for i.i.d. uniform U"""

    @abstractmethod
    def sample_latent(self, shape: Union[int, Tuple[int, ...]], generator: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Latent uniforms together with their scores"""

    @property
    @abstractmethod
    def score_mean(self) -> float:
        """int_0^1 F^-1(u) du"""

    def _pmf_from_scores(self, zx: np.ndarray, zy: np.ndarray, k: Union[int, np.ndarray], diagonal: bool) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            lam = zx * zy / (2.0 * self.rho if diagonal else self.rho)
        lam = np.where(np.isnan(lam), 0.0, lam)
        finite = np.isfinite(lam)
        safe = np.where(finite, lam, 0.0)
        k_arr = np.asarray(k)
        if diagonal:
            values = np.where(k_arr % 2 == 0, poisson_pmf(k_arr // 2, safe), 0.0)
        else:
            values = poisson_pmf(k_arr, safe)
        # an infinite mean pushes all mass past every finite k
        return np.where(finite, values, 0.0)

    def pmf(self, x, y, k, diagonal):
        return self._pmf_from_scores(self.scores(np.asarray(x)), self.scores(np.asarray(y)), k, diagonal)

    def _row_pmf(self, x, y, diagonal):
        zx, zy = self.scores(np.array([x, y], dtype=float))
        return lambda ks: self._pmf_from_scores(np.full(ks.size, zx), np.full(ks.size, zy), ks, diagonal)

    def mean_multiplicity(self, x: float, y: float) -> float:
        return float(self.scores(np.array([x]))[0] * self.scores(np.array([y]))[0] / self.rho)

    def average_degree(self, x: float) -> float:
        _check_unit(x, "x")
        return float(self.scores(np.array([x]))[0]) * self.score_mean / self.rho

    def edge_density(self) -> float:
        return self.score_mean**2 / self.rho

    def _weights_from_scores(self, scores: np.ndarray, pattern: AdjacencyMatrix) -> np.ndarray:
        k = pattern.n
        weights = np.ones(scores.shape[0])
        for i in range(k):
            for j in range(i, k):
                weights *= self._pmf_from_scores(scores[:, i], scores[:, j], int(pattern.counts[i, j]), diagonal=(i == j))
        return weights

    def pattern_weights(self, latent, pattern):
        return self._weights_from_scores(self.scores(latent), pattern)

    def sample_pattern_weights(self, pattern, samples, generator):
        return self._weights_from_scores(self.sample_scores((samples, pattern.n), generator), pattern)

    def sample_graph(self, k, generator):
        latent, scores = self.sample_latent(k, generator)
        means = np.outer(scores, scores) / self.rho
        upper = np.triu(generator.poisson(np.triu(means, k=1)), k=1)
        loops = generator.poisson(scores**2 / (2.0 * self.rho))
        counts = upper + upper.T + np.diag(2 * loops)
        return counts.astype(COUNT_DTYPE), latent


class PoissonGammaMultigraphon(PoissonKernel):
    """Limit of PAG_kappa(n, m) with 2m / n^2 -> rho; latent degrees are Gamma(kappa, kappa / rho)"""

    def __init__(self, kappa: float, rho: float):
        super().__init__(rho)
        if kappa <= 0:
            raise DomainError("kappa must be positive")
        self.kappa = float(kappa)
        self.beta = self.kappa / self.rho

    def scores(self, u):
        u = np.asarray(u, dtype=float)
        result = np.zeros(u.shape)
        result[u >= 1.0] = np.inf
        inner = (u > 0.0) & (u < 1.0)
        if np.any(inner):
            result[inner] = gamma_quantile(u[inner], self.kappa, self.beta)
        return result

    def sample_scores(self, shape, generator):
        return generator.gamma(self.kappa, 1.0 / self.beta, size=shape)

    def sample_latent(self, shape, generator):
        scores = self.sample_scores(shape, generator)
        return np.asarray(gamma_cdf(scores, self.kappa, self.beta)), scores

    @property
    def score_mean(self) -> float:
        # mean of Gamma(kappa, kappa / rho)
        return self.rho

    def degree_cdf(self, z: float) -> float:
        if z < 0:
            raise DomainError("degree CDF is defined for z >= 0")
        return float(gamma_cdf(z * self.rho / self.score_mean, self.kappa, self.beta))

    def degree_quantile(self, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise DomainError(f"quantile level u={u} must lie in (0, 1)")
        return float(gamma_quantile(u, self.kappa, self.beta)) * self.score_mean / self.rho

    def to_spec(self) -> PoissonGammaSpec:
        return PoissonGammaSpec(kappa=self.kappa, rho=self.rho)

    def __repr__(self) -> str:
        return f"PoissonGammaMultigraphon(kappa={self.kappa}, rho={self.rho})"


class EmpiricalEdgeStationaryMultigraphon(PoissonKernel):
    """Edge-stationary kernel built from a right-continuous step degree CDF"""

    def __init__(self, cdf_grid: List[Tuple[float, float]], rho: float):
        super().__init__(rho)
        grid = np.asarray(cdf_grid, dtype=float)
        if grid.ndim != 2 or grid.shape[1] != 2 or grid.shape[0] == 0:
            raise DomainError("cdf_grid must be a nonempty list of [z, F(z)] pairs")
        points, levels = grid[:, 0], grid[:, 1]
        if np.any(points < 0) or np.any(np.diff(points) <= 0):
            raise DomainError("cdf_grid points must be nonnegative and strictly increasing")
        if np.any(np.diff(levels) < 0) or levels[0] < 0 or abs(levels[-1] - 1.0) > 1e-12:
            raise DomainError("cdf_grid levels must be nondecreasing and end at 1")
        levels = levels.copy()
        levels[-1] = 1.0
        self.points = points
        self.levels = levels
        self.points.flags.writeable = False
        self.levels.flags.writeable = False

    @classmethod
    def from_graph(cls, matrix: AdjacencyMatrix) -> "EmpiricalEdgeStationaryMultigraphon":
        """Rescaled degrees d(B, i) / n as the degree law, rho = 2m / n^2"""
        n = matrix.n
        rescaled = matrix.degrees().degrees / n
        values, multiplicity = np.unique(rescaled, return_counts=True)
        levels = np.cumsum(multiplicity) / n
        rho = 2.0 * matrix.edge_counts().m / (n * n)
        return cls(list(zip(values.tolist(), levels.tolist())), rho)

    def _stored_quantile(self, u: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.levels, u, side="left")
        return self.points[np.minimum(index, self.points.size - 1)]

    def scores(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0.0, self._stored_quantile(u), 0.0)

    def sample_scores(self, shape, generator):
        return self.sample_latent(shape, generator)[1]

    def sample_latent(self, shape, generator):
        latent = generator.random(shape)
        return latent, self.scores(latent)

    @cached_property
    def score_mean(self) -> float:
        return float(np.sum(self.points * np.diff(self.levels, prepend=0.0)))

    def degree_cdf(self, z: float) -> float:
        if z < 0:
            raise DomainError("degree CDF is defined for z >= 0")
        scaled = z * self.rho / self.score_mean if self.score_mean > 0 else np.inf
        index = np.searchsorted(self.points, scaled, side="right") - 1
        return float(self.levels[index]) if index >= 0 else 0.0

    def degree_quantile(self, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise DomainError(f"quantile level u={u} must lie in (0, 1)")
        return float(self._stored_quantile(np.array([u]))[0]) * self.score_mean / self.rho

    def to_spec(self) -> EmpiricalSpec:
        return EmpiricalSpec(rho=self.rho, cdf_grid=list(zip(self.points.tolist(), self.levels.tolist())))

    def __repr__(self) -> str:
        return f"EmpiricalEdgeStationaryMultigraphon(points={self.points.size}, rho={self.rho})"


class StepMultigraphon(Multigraphon):
    """W(x, y, k) = 1 iff B(ceil(n x), ceil(n y)) = k; a picture of a finite graph"""

    closed_form_quantile = True

    def __init__(self, matrix: AdjacencyMatrix):
        self.matrix = matrix
        self._rescaled = np.sort(matrix.degrees().degrees / matrix.n)

    def _cells(self, u: np.ndarray) -> np.ndarray:
        n = self.matrix.n
        return np.clip(np.ceil(np.asarray(u) * n).astype(np.int64), 1, n) - 1

    def pmf(self, x, y, k, diagonal):
        entries = self.matrix.counts[self._cells(x), self._cells(y)]
        return (entries == np.asarray(k)).astype(float)

    def mean_multiplicity(self, x, y):
        return float(self.matrix.counts[self._cells(np.array([x]))[0], self._cells(np.array([y]))[0]])

    def average_degree(self, x):
        _check_unit(x, "x")
        return self.matrix.degree(int(self._cells(np.array([x]))[0])) / self.matrix.n

    def edge_density(self):
        return 2.0 * self.matrix.edge_counts().m / self.matrix.n**2

    def degree_cdf(self, z):
        if z < 0:
            raise DomainError("degree CDF is defined for z >= 0")
        return float(np.searchsorted(self._rescaled, z, side="right") / self._rescaled.size)

    def degree_quantile(self, u):
        if not 0.0 < u < 1.0:
            raise DomainError(f"quantile level u={u} must lie in (0, 1)")
        return float(self._rescaled[int(np.ceil(u * self._rescaled.size)) - 1])

    def sample_graph(self, k, generator):
        latent = generator.random(k)
        cells = self._cells(latent)
        return self.matrix.counts[np.ix_(cells, cells)].astype(COUNT_DTYPE), latent


class EmptyMultigraphon(Multigraphon):
    """W(x, y, 0) = 1 everywhere"""

    closed_form_quantile = True

    def pmf(self, x, y, k, diagonal):
        return np.where(np.asarray(k) == 0, 1.0, 0.0) * np.ones_like(np.asarray(x, dtype=float))

    def mean_multiplicity(self, x, y):
        return 0.0

    def average_degree(self, x):
        _check_unit(x, "x")
        return 0.0

    def edge_density(self):
        return 0.0

    def degree_cdf(self, z):
        if z < 0:
            raise DomainError("degree CDF is defined for z >= 0")
        return 1.0

    def degree_quantile(self, u):
        if not 0.0 < u < 1.0:
            raise DomainError(f"quantile level u={u} must lie in (0, 1)")
        return 0.0

    def sample_graph(self, k, generator):
        return np.zeros((k, k), dtype=COUNT_DTYPE), generator.random(k)


def multigraphon_from_spec(spec: Union[PoissonGammaSpec, EmpiricalSpec, Dict[str, Any], str]) -> PoissonKernel:
    """Build a kernel from its JSON document, parsed dict or spec model"""
    if isinstance(spec, str):
        spec = _SPEC_ADAPTER.validate_json(spec)
    elif isinstance(spec, dict):
        spec = _SPEC_ADAPTER.validate_python(spec)
    if isinstance(spec, PoissonGammaSpec):
        return PoissonGammaMultigraphon(spec.kappa, spec.rho)
    return EmpiricalEdgeStationaryMultigraphon(spec.cdf_grid, spec.rho)


def multigraphon_to_json(kernel: Union[PoissonGammaMultigraphon, EmpiricalEdgeStationaryMultigraphon]) -> str:
    return json.dumps(kernel.to_spec().model_dump(mode="json"))
