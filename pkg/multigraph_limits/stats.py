"""
Special functions and goodness-of-fit tests

The regularized incomplete gamma function uses the series expansion for
x < a + 1 and the continued fraction otherwise (Numerical Recipes split),
vectorised over numpy arrays. Everything here is a pure function of its
inputs.
"""
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from multigraph_limits.errors import ConvergenceError, DegenerateBinningError, DivergenceError, DomainError
from multigraph_limits.models import GofReport

GAMMA_TOLERANCE = 1e-14
QUANTILE_TOLERANCE = 1e-12
MAX_ITERATIONS = 100_000
_TINY = 1e-300


def ln_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)"""
    values = np.asarray(x, dtype=float)
    if np.any(values <= 0):
        raise DomainError("ln_gamma is defined here for positive arguments only")
    result = special.gammaln(values)
    return float(result) if result.ndim == 0 else result


def _log_prefactor(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -x + a * np.log(x) - special.gammaln(a)


def _lower_series(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    for _ in range(MAX_ITERATIONS):
        ap += 1.0
        term = term * x / ap
        total += term
        if not np.any(np.abs(term) >= np.abs(total) * GAMMA_TOLERANCE):
            break
    else:
        raise ConvergenceError("incomplete gamma series did not converge")
    return total * np.exp(_log_prefactor(a, x))


def _upper_continued_fraction(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if not np.any(np.abs(delta - 1.0) >= GAMMA_TOLERANCE):
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return np.exp(_log_prefactor(a, x)) * h


def _incomplete_gamma(a, x, upper: bool):
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if np.any(a_arr <= 0):
        raise DomainError("incomplete gamma needs a > 0")
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise DomainError("incomplete gamma needs x >= 0")
    a_flat = a_arr.ravel()
    x_flat = x_arr.ravel()
    lower = np.zeros(x_flat.shape)
    upper_values = np.ones(x_flat.shape)

    infinite = np.isinf(x_flat)
    lower[infinite] = 1.0
    upper_values[infinite] = 0.0

    series = (x_flat < a_flat + 1.0) & ~infinite
    if np.any(series):
        p = _lower_series(a_flat[series], x_flat[series])
        lower[series] = p
        upper_values[series] = 1.0 - p

    fraction = ~series & ~infinite
    if np.any(fraction):
        q = _upper_continued_fraction(a_flat[fraction], x_flat[fraction])
        upper_values[fraction] = q
        lower[fraction] = 1.0 - q

    result = (upper_values if upper else lower).reshape(a_arr.shape)
    result = np.clip(result, 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def regularized_lower_gamma(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a)"""
    return _incomplete_gamma(a, x, upper=False)


def regularized_upper_gamma(a, x):
    """Q(a, x) = 1 - P(a, x), computed directly in the continued-fraction region"""
    return _incomplete_gamma(a, x, upper=True)


def poisson_pmf(k, lam):
    """p(k, lambda) = exp(-lambda) lambda^k / k!, evaluated in log space"""
    k_arr = np.asarray(k)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise DomainError("Poisson mean must be nonnegative")
    if np.any(k_arr < 0) or np.any(np.asarray(k_arr, dtype=float) % 1):
        raise DomainError("Poisson support is the nonnegative integers")
    k_float = k_arr.astype(float)
    log_p = special.xlogy(k_float, lam_arr) - lam_arr - special.gammaln(k_float + 1.0)
    result = np.exp(log_p)
    return float(result) if result.ndim == 0 else result


def poisson_tail(kmax: int, lam: float) -> float:
    """P(X > kmax) for X ~ Poisson(lam): exactly P(kmax + 1, lam)"""
    if lam < 0:
        raise DomainError("Poisson mean must be nonnegative")
    if kmax < 0:
        return 1.0
    if lam == 0:
        return 0.0
    return float(regularized_lower_gamma(kmax + 1.0, lam))


def poisson_truncation_point(lam: float, tolerance: float = 1e-14) -> int:
    """Smallest K with P(X > K) < tolerance"""
    if lam < 0:
        raise DomainError("Poisson mean must be nonnegative")
    low = int(math.floor(lam))
    if poisson_tail(low, lam) < tolerance:
        return low
    step = max(1, int(math.sqrt(lam)) + 1)
    high = low + step
    while poisson_tail(high, lam) >= tolerance:
        low, step = high, step * 2
        high = low + step
    while high - low > 1:
        middle = (low + high) // 2
        if poisson_tail(middle, lam) < tolerance:
            high = middle
        else:
            low = middle
    return high


def _check_gamma_parameters(alpha: float, beta: float) -> None:
    if alpha <= 0 or beta <= 0:
        raise DomainError(f"Gamma parameters must be positive, got alpha={alpha}, beta={beta}")


def gamma_pdf(x, alpha: float, beta: float):
    """g(x, alpha, beta) = x^(alpha-1) beta^alpha exp(-beta x) / Gamma(alpha) for x > 0"""
    _check_gamma_parameters(alpha, beta)
    x_arr = np.asarray(x, dtype=float)
    positive = x_arr > 0
    safe = np.where(positive, x_arr, 1.0)
    log_density = (alpha - 1.0) * np.log(safe) + alpha * math.log(beta) - beta * safe - special.gammaln(alpha)
    result = np.where(positive & np.isfinite(safe), np.exp(log_density), 0.0)
    return float(result) if result.ndim == 0 else result


def gamma_cdf(x, alpha: float, beta: float):
    """Gamma(alpha, beta) distribution function"""
    _check_gamma_parameters(alpha, beta)
    x_arr = np.asarray(x, dtype=float)
    result = np.asarray(regularized_lower_gamma(alpha, np.maximum(x_arr, 0.0) * beta))
    return float(result) if result.ndim == 0 else result


def gamma_quantile(u, alpha: float, beta: float):
    """min{z : F(z) >= u} for the Gamma(alpha, beta) CDF

    Bracketed Newton iteration on P(alpha, t) = u with bisection fallback.
    """
    _check_gamma_parameters(alpha, beta)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0) & (u_arr < 1))):
        raise DomainError("quantile level must lie in the open interval (0, 1)")
    target = u_arr.ravel()

    low = np.zeros_like(target)
    high = np.full_like(target, max(alpha, 1.0))
    while True:
        short = regularized_lower_gamma(alpha, high) < target
        if not np.any(short):
            break
        high = np.where(short, high * 2.0, high)

    # small-t behaviour P(alpha, t) ~ t^alpha / Gamma(alpha + 1) gives the start
    guess = np.exp((np.log(target) + special.gammaln(alpha + 1.0)) / alpha)
    t = np.where((guess > low) & (guess < high), guess, 0.5 * (low + high))
    log_norm = special.gammaln(alpha)
    for _ in range(400):
        f = np.asarray(regularized_lower_gamma(alpha, t)) - target
        low = np.where(f < 0, t, low)
        high = np.where(f >= 0, t, high)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            slope = np.exp((alpha - 1.0) * np.log(t) - t - log_norm)
            newton = t - f / slope
        usable = np.isfinite(newton) & (newton > low) & (newton < high)
        updated = np.where(usable, newton, 0.5 * (low + high))
        step = np.abs(updated - t)
        t = updated
        if np.all((step <= QUANTILE_TOLERANCE * t) | (high - low <= QUANTILE_TOLERANCE * high)):
            break
    else:
        raise ConvergenceError("gamma quantile iteration did not converge")
    result = (t / beta).reshape(u_arr.shape)
    return float(result) if result.ndim == 0 else result


def gamma_moment(kappa: float, rho: float, nu: int) -> float:
    """E[Z^nu] for Z ~ Gamma(kappa, kappa / rho): (rho/kappa)^nu prod_{j<=nu} (kappa + j - 1)"""
    if kappa <= 0 or rho <= 0:
        raise DomainError("kappa and rho must be positive")
    if nu < 0 or int(nu) != nu:
        raise DomainError("moment order must be a nonnegative integer")
    value = 1.0
    for j in range(1, int(nu) + 1):
        value *= (rho / kappa) * (kappa + j - 1)
    return value


def gamma_joint_moment(kappa: float, rho: float, orders: Sequence[int]) -> float:
    """E[prod_i Z_i^nu_i] for i.i.d. Gamma(kappa, kappa / rho) variables"""
    return float(np.prod([gamma_moment(kappa, rho, nu) for nu in orders]))


def ks_distance(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_x |F_emp(x) - cdf(x)|, checking both one-sided gaps at every sample point"""
    values = np.sort(np.asarray(sample, dtype=float))
    size = values.size
    if size == 0:
        raise DomainError("KS distance needs a nonempty sample")
    fitted = np.asarray(cdf(values), dtype=float)
    ranks = np.arange(1, size + 1)
    above = np.max(ranks / size - fitted)
    below = np.max(fitted - (ranks - 1) / size)
    return float(max(above, below, 0.0))


def chi_square_sf(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square distribution"""
    if dof < 1:
        raise DomainError("chi-square needs at least one degree of freedom")
    if statistic <= 0:
        return 1.0
    return float(regularized_upper_gamma(dof / 2.0, statistic / 2.0))


def _merge_bins(
    observed: np.ndarray, expected: np.ndarray, min_expected: float
) -> Tuple[List[float], List[float], List[Tuple[int, Optional[int]]]]:
    merged_obs: List[float] = []
    merged_exp: List[float] = []
    ranges: List[Tuple[int, Optional[int]]] = []
    acc_obs = acc_exp = 0.0
    start = 0
    last = len(observed) - 1
    for index, (obs, exp) in enumerate(zip(observed, expected)):
        acc_obs += obs
        acc_exp += exp
        if acc_exp >= min_expected:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            ranges.append((start, index))
            acc_obs = acc_exp = 0.0
            start = index + 1
    if start <= last:
        if merged_exp:
            merged_obs[-1] += acc_obs
            merged_exp[-1] += acc_exp
            ranges[-1] = (ranges[-1][0], last)
        else:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            ranges.append((start, last))
    return merged_obs, merged_exp, ranges


def chi_square_gof(observed, probabilities, min_expected: float = 5.0) -> GofReport:
    """Pearson test of cell counts against cell probabilities, merging sparse neighbours"""
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    if obs.shape != probs.shape:
        raise DomainError("observed counts and probabilities differ in shape")
    total = float(obs.sum())
    merged_obs, merged_exp, ranges = _merge_bins(obs, total * probs, min_expected)
    if len(merged_exp) < 2:
        raise DegenerateBinningError("all cells merged into one bin; no degrees of freedom")
    statistic = float(sum((o - e) ** 2 / e for o, e in zip(merged_obs, merged_exp)))
    dof = len(merged_exp) - 1
    return GofReport(
        statistic=statistic,
        p_value=chi_square_sf(statistic, dof),
        dof=dof,
        bins=ranges,
        sample_size=int(total),
    )


def chi_square_poisson_gof(counts, lam: float, min_total: int = 50) -> GofReport:
    """Test a histogram (counts[k] = observations equal to k) against Poisson(lam)

    The last cell collects the whole tail k >= len(counts).
    """
    hist = np.asarray(counts, dtype=float)
    total = float(hist.sum())
    if total < min_total:
        raise DomainError(f"chi-square GOF needs at least {min_total} observations, got {int(total)}")
    support = np.arange(hist.size)
    probs = np.append(poisson_pmf(support, lam), poisson_tail(hist.size - 1, lam))
    report = chi_square_gof(np.append(hist, 0.0), probs)
    tail_index = hist.size
    bins = [(low, None if high == tail_index else high) for low, high in report.bins]
    return report.model_copy(update={"bins": bins})


def truncated_mean(sample, threshold: float) -> float:
    """E[X; m] = mean of x * 1[x >= m]"""
    values = np.asarray(sample, dtype=float)
    if values.size == 0:
        raise DomainError("truncated mean of an empty sample")
    if np.any(values < 0):
        raise DomainError("truncated mean is defined for nonnegative samples")
    return float(np.mean(np.where(values >= threshold, values, 0.0)))


def quadrature(function: Callable[[float], float], low: float, high: float, tolerance: float = 1e-8) -> float:
    """Adaptive quadrature with an absolute tolerance; unreliable results are reported"""
    value, error = integrate.quad(function, low, high, epsabs=tolerance, epsrel=0.0, limit=500, full_output=1)[:2]
    if not math.isfinite(value) or error > max(100 * tolerance, 1e-6):
        raise DivergenceError(f"integral over [{low}, {high}] did not converge (estimate {value}, error {error})")
    return float(value)
