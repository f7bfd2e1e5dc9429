"""
The (q, mu, nu)-deformed Binomial distribution phi(j | m).

phi(j|m) = mu^j (nu/mu;q)_j (mu;q)_{m-j} / (nu;q)_m * (q;q)_m / ((q;q)_j (q;q)_{m-j})

for 0 <= j <= m, and its m = infinity extension. The prefactor
mu^j (nu/mu;q)_j is evaluated as prod_{i<j} (mu - nu q^i) so that mu = 0
needs no special case.
"""

import math
import threading
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from logging import getLogger
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .qseries import CompensatedSum, is_exact, qpoch, qpoch_inf_log, qpoch_log
from .utils.constants import SAMPLER_MASS_DEFECT, SAMPLER_MAX_SUPPORT
from .utils.exceptions import DomainError, RangeError, TailBoundError, TailTruncationWarning
from .utils.rng import RngStream

logger = getLogger(__name__)

INFINITY = math.inf
# Integer-array encoding of m = infinity used by the vectorised sampler
INF_SUPPORT = -1

JumpSupport = Union[int, float]


@dataclass(frozen=True)
class ModelParams:
    """The scalars q, mu, nu with 0 <= nu <= mu < 1 and 0 <= q < 1."""

    q: Any
    mu: Any
    nu: Any

    def __post_init__(self):
        if not 0 <= self.q < 1:
            raise DomainError(f"q must lie in [0, 1), got {self.q}")
        if not 0 <= self.nu <= self.mu < 1:
            raise DomainError(
                f"parameters must satisfy 0 <= nu <= mu < 1, got mu={self.mu}, nu={self.nu}"
            )

    @property
    def exact(self) -> bool:
        return is_exact(self.q, self.mu, self.nu)

    def with_mu(self, mu: Any) -> "ModelParams":
        return replace(self, mu=mu)

    def as_float(self) -> "ModelParams":
        return ModelParams(float(self.q), float(self.mu), float(self.nu))

    @property
    def move_probability(self) -> Any:
        """p = (mu - nu) / (1 - nu), the single-particle move probability phi(1|1)."""
        return (self.mu - self.nu) / (1 - self.nu)


def _check_support(j: int, m: JumpSupport) -> None:
    if j < 0 or (m != INFINITY and j > m):
        raise RangeError(f"j = {j} is outside the support 0..{m}")


def _prefactor(j: int, p: ModelParams) -> Any:
    """prod_{i<j} (mu - nu q^i), which equals mu^j (nu/mu;q)_j."""
    result = p.mu * 0 + 1
    q_power = p.q * 0 + 1
    for _ in range(j):
        result = result * (p.mu - p.nu * q_power)
        q_power = q_power * p.q
    return result


def _phi_exact(j: int, m: int, p: ModelParams) -> Fraction:
    q, mu, nu = p.q, p.mu, p.nu
    return (
        _prefactor(j, p)
        * qpoch(mu, q, m - j)
        / qpoch(nu, q, m)
        * qpoch(q, q, m)
        / (qpoch(q, q, j) * qpoch(q, q, m - j))
    )


def _phi_log(j: int, m: JumpSupport, p: ModelParams) -> float:
    """log phi(j|m) in float arithmetic; -inf when the pmf vanishes."""
    q, mu, nu = float(p.q), float(p.mu), float(p.nu)
    if j > 0 and mu == nu:
        return -math.inf

    log_value = 0.0
    q_power = 1.0
    for _ in range(j):
        log_value += math.log(mu - nu * q_power) if mu > 0 else -math.inf
        q_power *= q
    if log_value == -math.inf:
        return log_value

    log_value -= qpoch_log(q, q, j)[0]
    if m == INFINITY:
        log_value += qpoch_inf_log(mu, q) - qpoch_inf_log(nu, q)
    else:
        log_value += (
            qpoch_log(mu, q, m - j)[0]
            - qpoch_log(nu, q, m)[0]
            + qpoch_log(q, q, m)[0]
            - qpoch_log(q, q, m - j)[0]
        )
    return log_value


def phi_pmf(j: int, m: JumpSupport, p: ModelParams) -> Any:
    """
    Evaluates phi(j|m).

    Exact (Fraction) when the parameters are rational and m is finite;
    otherwise a float computed in log space.

    Args:
        j: Number of particles moved
        m: Available particles, or INFINITY
        p: Model parameters

    Returns:
        The probability

    Raises:
        RangeError: If j lies outside 0..m

    Examples:
        >>> phi_pmf(0, 0, ModelParams(0.5, 0.4, 0.1))
        1.0
        >>> phi_pmf(1, 1, ModelParams(Fraction(1, 3), Fraction(1, 2), Fraction(1, 5)))
        Fraction(3, 8)
    """
    _check_support(j, m)
    if m != INFINITY and p.exact:
        return _phi_exact(j, int(m), p)
    return math.exp(_phi_log(j, m, p))


def phi_geometric(j: int, m: int, q: Any, mu: Any) -> Any:
    """
    Closed form of phi(j|m) at nu = 0: the geometric q-TASEP weight.

    mu^j (mu;q)_{m-j} (q;q)_m / ((q;q)_j (q;q)_{m-j})
    """
    _check_support(j, m)
    return mu**j * qpoch(mu, q, m - j) * qpoch(q, q, m) / (qpoch(q, q, j) * qpoch(q, q, m - j))


def phi_row(m: int, p: ModelParams) -> Union[np.ndarray, List[Fraction]]:
    """
    The whole pmf (phi(0|m), ..., phi(m|m)).

    Built from phi(0|m) = (mu;q)_m / (nu;q)_m and the ratio
    phi(j+1|m)/phi(j|m) = (mu - nu q^j)(1 - q^{m-j}) / ((1 - q^{j+1})(1 - mu q^{m-j-1})).

    Returns:
        A list of Fractions for exact parameters, a numpy array otherwise
    """
    if m < 0:
        raise RangeError(f"m must be nonnegative, got {m}")

    if p.exact:
        q, mu, nu = p.q, p.mu, p.nu
        row = [qpoch(mu, q, m) / qpoch(nu, q, m)]
        for j in range(m):
            ratio = (
                (mu - nu * q**j)
                * (1 - q ** (m - j))
                / ((1 - q ** (j + 1)) * (1 - mu * q ** (m - j - 1)))
            )
            row.append(row[-1] * ratio)
        return row

    q, mu, nu = float(p.q), float(p.mu), float(p.nu)
    j = np.arange(m)
    with np.errstate(divide="ignore"):
        log_ratios = (
            np.log(mu - nu * q**j)
            + np.log1p(-(q ** (m - j)))
            - np.log1p(-(q ** (j + 1)))
            - np.log1p(-mu * q ** (m - j - 1))
        )
    log_first = qpoch_log(mu, q, m)[0] - qpoch_log(nu, q, m)[0]
    log_row = np.concatenate(([log_first], log_first + np.cumsum(log_ratios)))
    return np.exp(log_row)


def phi_row_infinite(p: ModelParams, mass_defect: float = SAMPLER_MASS_DEFECT,
                     max_support: int = SAMPLER_MAX_SUPPORT) -> Tuple[np.ndarray, bool]:
    """
    Leading terms of phi(.|infinity) until the enumerated mass reaches 1 - mass_defect.

    Terms are carried as logarithms: phi(0|inf) = (mu;q)_inf / (nu;q)_inf
    underflows for q close to 1, while the mass sits at large j.

    Returns:
        (pmf values, cap_hit), where cap_hit is True if max_support was reached first
    """
    q, mu, nu = float(p.q), float(p.mu), float(p.nu)
    log_first = qpoch_inf_log(mu, q) - qpoch_inf_log(nu, q)
    # log phi(j|inf) = log_first + offset, with offset summed from the term ratios
    offset = CompensatedSum()
    values = [math.exp(log_first)]
    mass = CompensatedSum(values[0])
    q_power = 1.0
    while mass.value < 1 - mass_defect:
        if len(values) >= max_support:
            return np.asarray(values), True
        factor = mu - nu * q_power
        if factor <= 0:
            break
        offset.add(math.log(factor) - math.log1p(-q_power * q))
        values.append(math.exp(log_first + offset.value))
        mass.add(values[-1])
        q_power *= q
    return np.asarray(values), False


# --- duality sums -------------------------------------------------------------


def duality_sum(m: int, y: int, p: ModelParams) -> Any:
    """
    S_{m,y} = sum_j phi(j|m) q^{jy}.

    S_{m,0} = 1 is the normalisation of phi; symmetry S_{m,y} = S_{y,m}
    is the duality identity.
    """
    row = phi_row(m, p)
    if p.exact:
        return sum(value * p.q ** (j * y) for j, value in enumerate(row))
    q = float(p.q)
    return float(np.sum(row * q ** (np.arange(m + 1) * y)))


def verify_duality(m: int, y: int, p: ModelParams) -> Any:
    """Returns |S_{m,y} - S_{y,m}|; exactly zero in rational mode."""
    return abs(duality_sum(m, y, p) - duality_sum(y, m, p))


def infinite_duality_sum(y: int, p: ModelParams, tol: float = 1e-12,
                         max_terms: int = SAMPLER_MAX_SUPPORT) -> Tuple[float, float]:
    """
    Truncated sum_j phi(j|infinity) q^{jy} with a certified tail bound.

    For j >= J the term ratio is at most rho = mu q^y / (1 - q^{J+1}),
    so the tail beyond J is at most t_J rho / (1 - rho). Terms are carried
    as logarithms so that an underflowing phi(0|inf) still sums correctly.

    Returns:
        (partial sum, tail bound)

    Raises:
        TailBoundError: If the bound does not fall below tol/10 within max_terms
    """
    q, mu, nu = float(p.q), float(p.mu), float(p.nu)
    log_first = qpoch_inf_log(mu, q) - qpoch_inf_log(nu, q)
    log_y_power = y * math.log(q) if q > 0 else (0.0 if y == 0 else -math.inf)
    offset = CompensatedSum()
    term = math.exp(log_first)
    total = CompensatedSum(term)
    q_power = 1.0
    bound = math.inf
    for _ in range(max_terms):
        rho = mu * math.exp(log_y_power) / (1 - q_power * q)
        bound = term * rho / (1 - rho) if rho < 1 else math.inf
        if bound <= tol / 10:
            return total.value, bound
        factor = mu - nu * q_power
        if factor <= 0 or log_y_power == -math.inf:
            return total.value, 0.0
        offset.add(math.log(factor) - math.log1p(-q_power * q) + log_y_power)
        term = math.exp(log_first + offset.value)
        total.add(term)
        q_power *= q
    raise TailBoundError(f"tail bound {bound:.3e} above {tol / 10:.3e} after {max_terms} terms")


def verify_duality_infinite(y: int, p: ModelParams, tol: float = 1e-12) -> float:
    """Residual of sum_j phi(j|infinity) q^{jy} - phi(0|y), with a certified truncation."""
    value, bound = infinite_duality_sum(y, p, tol)
    return abs(value - float(phi_pmf(0, y, p.as_float()))) + bound


# --- sampling -----------------------------------------------------------------


class _CdfTable:
    """Cumulative rows of phi(.|m) for one effective mu, grown on demand."""

    def __init__(self, p: ModelParams, max_support: int = SAMPLER_MAX_SUPPORT):
        self.p = p
        self.max_support = max_support
        self.rows: Dict[int, np.ndarray] = {}
        self.infinite_row: Union[np.ndarray, None] = None
        self.cap_hit = False

    def row(self, m: int) -> np.ndarray:
        if m == INF_SUPPORT:
            if self.infinite_row is None:
                values, self.cap_hit = phi_row_infinite(self.p, max_support=self.max_support)
                mass = float(values.sum())
                if self.cap_hit or mass < 1 - SAMPLER_MASS_DEFECT:
                    reason = f"capped at j={len(values) - 1}" if self.cap_hit else "short of mass"
                    warnings.warn(
                        f"phi(.|inf) sampler {reason} with mass {mass:.15f} for mu={self.p.mu}",
                        TailTruncationWarning,
                        stacklevel=3,
                    )
                    logger.warning(f"Infinite-support sampler {reason} for mu={self.p.mu}")
                self.infinite_row = np.cumsum(values)
            return self.infinite_row
        if m not in self.rows:
            self.rows[m] = np.cumsum(phi_row(m, self.p))
        return self.rows[m]


class PhiSampler:
    """
    Vectorised inverse-CDF sampler for phi(.|m) with fixed q and nu.

    CDF tables are cached per effective mu and per m, so repeated draws in a
    simulation only pay for the lookup. A single instance may be shared by
    worker threads.
    """

    def __init__(self, q: float, nu: float, max_support: int = SAMPLER_MAX_SUPPORT):
        self.q = float(q)
        self.nu = float(nu)
        self.max_support = max_support
        self._tables: Dict[float, _CdfTable] = {}
        self._lock = threading.Lock()

    def _table(self, mu: float) -> _CdfTable:
        mu = float(mu)
        table = self._tables.get(mu)
        if table is None:
            table = _CdfTable(ModelParams(self.q, mu, self.nu), self.max_support)
            self._tables[mu] = table
        return table

    def cdf(self, m: int, mu: float) -> np.ndarray:
        with self._lock:
            return self._table(mu).row(m)

    def draw(self, m: np.ndarray, mu: Union[float, np.ndarray], u: np.ndarray) -> np.ndarray:
        """
        Maps uniforms u to jumps j ~ phi(.|m) with parameter mu, elementwise.

        Args:
            m: Integer array of supports, INF_SUPPORT for infinity
            mu: Effective mu, scalar or array broadcastable to m
            u: Uniform draws on [0, 1), same shape as m

        Returns:
            Integer array of jumps, 0 <= j <= m
        """
        m = np.asarray(m, dtype=np.int64)
        u = np.asarray(u, dtype=float)
        mu_arr = np.broadcast_to(np.asarray(mu, dtype=float), m.shape)
        jumps = np.zeros(m.shape, dtype=np.int64)

        active = (m != 0) & (mu_arr > self.nu)
        if not active.any():
            return jumps
        keys = np.stack((mu_arr[active], m[active].astype(float)), axis=-1)
        unique_keys, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        active_u = u[active]
        active_jumps = np.zeros(active_u.shape, dtype=np.int64)
        for index, (mu_value, m_value) in enumerate(unique_keys):
            cdf = self.cdf(int(m_value), mu_value)
            selected = inverse == index
            found = np.searchsorted(cdf, active_u[selected], side="right")
            active_jumps[selected] = np.minimum(found, len(cdf) - 1)
        jumps[active] = active_jumps
        return jumps


@lru_cache(maxsize=64)
def get_sampler(q: float, nu: float) -> PhiSampler:
    """Shared sampler for a (q, nu) pair."""
    return PhiSampler(q, nu)


def phi_sample(m: JumpSupport, p: ModelParams, stream: RngStream) -> int:
    """
    Draws one j ~ phi(.|m).

    Raises:
        TailTruncationWarning: (as a warning) when the infinite-support cap is hit
    """
    sampler = get_sampler(float(p.q), float(p.nu))
    m_code = INF_SUPPORT if m == INFINITY else int(m)
    draw = sampler.draw(np.array([m_code]), float(p.mu), np.array([stream.uniform()]))
    return int(draw[0])
