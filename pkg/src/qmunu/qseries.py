"""
q-Pochhammer symbols, basic hypergeometric series and q-factorials.

Every finite formula works on three scalar backends: float, complex and
fractions.Fraction (exact). Infinite products are float/complex only and
accept numpy arrays, so contour code can evaluate a whole node grid at once.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .utils.constants import DEFAULT_TOL, QPOCH_GUARD_FACTORS
from .utils.exceptions import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    PoleError,
)

logger = getLogger(__name__)

# Relative tolerance used to recognise a = q^{-n} in floating point
TERMINATION_RTOL = 1e-12
MAX_SERIES_TERMS = 100_000


def validate_q(q: Any) -> None:
    """Raises DomainError unless 0 <= q < 1."""
    if isinstance(q, complex) or not 0 <= q < 1:
        raise DomainError(f"q must lie in [0, 1), got {q}")


def is_exact(*values: Any) -> bool:
    """True when every value is an int or Fraction."""
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def qpoch(a: Any, q: Any, n: int) -> Any:
    """
    Computes the finite q-Pochhammer symbol (a;q)_n = prod_{i=0}^{n-1} (1 - a q^i).

    The scalar type of the result follows the inputs: Fractions stay exact,
    complex stays complex and numpy arrays are handled elementwise.

    Args:
        a: Base value
        q: Nome in [0, 1)
        n: Number of factors, n >= 0

    Returns:
        The product; exactly 1 (of the type of a) when n == 0

    Examples:
        >>> qpoch(2.0, 0.5, 2) == 0
        True
        >>> qpoch(Fraction(1, 2), Fraction(1, 3), 2)
        Fraction(5, 12)
    """
    if n < 0:
        raise DomainError(f"qpoch requires n >= 0, got {n}")
    validate_q(q)

    result = a * 0 + 1
    q_power = q * 0 + 1
    for _ in range(n):
        result = result * (1 - a * q_power)
        q_power = q_power * q
    return result


def qpoch_log(a: float, q: float, n: int) -> Tuple[float, int]:
    """
    Returns (log|(a;q)_n|, sign) for real a.

    Used to evaluate long products without underflow. A vanishing factor
    gives (-inf, 0).
    """
    validate_q(q)
    log_abs = 0.0
    sign = 1
    q_power = 1.0
    for _ in range(n):
        factor = 1.0 - a * q_power
        if factor == 0.0:
            return -math.inf, 0
        if factor < 0:
            sign = -sign
        log_abs += math.log1p(-a * q_power) if abs(a * q_power) < 0.5 else math.log(abs(factor))
        q_power *= q
    return log_abs, sign


def infinite_cutoff(abs_a: float, q: float, tol: float) -> int:
    """
    Number of factors kept in a truncated infinite product.

    The smallest i with |a| q^i < tol * (1 - q), plus guard factors.
    """
    if q == 0:
        return 1
    threshold = tol * (1 - q)
    if abs_a < threshold:
        return QPOCH_GUARD_FACTORS
    i_min = math.ceil(math.log(threshold / abs_a) / math.log(q))
    return max(i_min, 0) + QPOCH_GUARD_FACTORS


def qpoch_inf(a: Any, q: float, tol: float = DEFAULT_TOL) -> Any:
    """
    Computes the infinite q-Pochhammer symbol (a;q)_inf by truncation.

    Args:
        a: Scalar (float/complex) or numpy array of base values
        q: Nome in [0, 1)
        tol: Relative tolerance for the neglected tail

    Returns:
        The truncated product, same shape as a

    Raises:
        DomainError: If q is outside [0, 1) or tol is not positive

    Examples:
        >>> qpoch_inf(0.0, 0.5)
        1.0
        >>> qpoch_inf(0.3, 0.0)
        0.7
    """
    validate_q(q)
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")

    q = float(q)
    if isinstance(a, Fraction):
        a = float(a)
    if isinstance(a, np.ndarray):
        abs_a = float(np.max(np.abs(a))) if a.size else 0.0
    else:
        abs_a = abs(a)

    if q == 0:
        return 1 - a

    n_factors = infinite_cutoff(abs_a, q, tol)
    result = a * 0 + 1.0
    q_power = 1.0
    for _ in range(n_factors):
        result = result * (1 - a * q_power)
        q_power *= q
    return result


def qpoch_inf_log(a: Any, q: Any, tol: float = DEFAULT_TOL) -> float:
    """
    log (a;q)_inf for real a < 1, where every factor is positive.

    Stays finite when (a;q)_inf itself underflows, e.g. a = 0.99, q = 0.999.

    Raises:
        DomainError: If a >= 1
    """
    validate_q(q)
    a, q = float(a), float(q)
    if a >= 1:
        raise DomainError(f"log (a;q)_inf needs a < 1, got a={a}")
    if q == 0:
        return math.log1p(-a)
    n_factors = infinite_cutoff(abs(a), q, tol)
    return math.fsum(np.log1p(-a * q ** np.arange(n_factors)))


class CompensatedSum:
    """Running Neumaier sum for long float recurrences."""

    def __init__(self, start: float = 0.0):
        self.total = float(start)
        self.carry = 0.0

    def add(self, value: float) -> None:
        total = self.total + value
        if abs(self.total) >= abs(value):
            self.carry += (self.total - total) + value
        else:
            self.carry += (value - total) + self.total
        self.total = total

    @property
    def value(self) -> float:
        return self.total + self.carry


def qbinomial(m: int, j: int, q: Any) -> Any:
    """Gaussian binomial coefficient (q;q)_m / ((q;q)_j (q;q)_{m-j})."""
    if not 0 <= j <= m:
        return q * 0
    return qpoch(q, q, m) / (qpoch(q, q, j) * qpoch(q, q, m - j))


def q_number(j: int, base: Any) -> Any:
    """
    The q-integer [j]_base = 1 + base + ... + base^{j-1}.

    Examples:
        >>> q_number(1, 2.0)
        1.0
        >>> q_number(3, Fraction(1, 2))
        Fraction(7, 4)
    """
    total = base * 0
    power = base * 0 + 1
    for _ in range(j):
        total = total + power
        power = power * base
    return total


def qfactorial(k: int, q: Any) -> Any:
    """
    The q-factorial k_q! = (q;q)_k / (1-q)^k = [1]_q [2]_q ... [k]_q.

    Computed as a product of q-integers, which is exact for Fractions
    and stays well defined at q = 0.

    Examples:
        >>> qfactorial(2, 0.5)
        1.5
        >>> qfactorial(3, 0)
        1
    """
    if k < 0:
        raise DomainError(f"qfactorial requires k >= 0, got {k}")
    validate_q(q)
    result = q * 0 + 1
    for i in range(1, k + 1):
        result = result * q_number(i, q)
    return result


def terminating_index(a: Any, q: Any) -> Optional[int]:
    """
    Returns n when a = q^{-n} for a nonnegative integer n, else None.

    Exact for Fractions; floats are matched within TERMINATION_RTOL.
    """
    if a == 1:
        return 0
    if isinstance(a, complex):
        if abs(a.imag) > TERMINATION_RTOL * abs(a):
            return None
        a = a.real
    if q == 0 or a <= 1:
        return None

    n = round(math.log(float(a)) / -math.log(float(q)))
    if n < 0:
        return None
    if is_exact(a, q):
        return n if a * q**n == 1 else None
    return n if abs(float(a) * float(q) ** n - 1) < TERMINATION_RTOL else None


def _is_zero(value: Any) -> bool:
    if is_exact(value):
        return value == 0
    return abs(value) < 1e-300


def phi21(a: Any, b: Any, c: Any, q: Any, z: Any, tol: float = DEFAULT_TOL) -> Any:
    """
    Evaluates the basic hypergeometric series 2phi1(a, b; c; q, z).

    Terminating series (a or b equal to q^{-n}) are summed through index n,
    exactly when the inputs are Fractions. Otherwise partial sums are
    accumulated until a term falls below tol relative to the running sum.

    Args:
        a: Numerator parameter
        b: Numerator parameter
        c: Denominator parameter
        q: Nome in [0, 1)
        z: Argument; |z| < 1 unless the series terminates
        tol: Stopping tolerance for the nonterminating case

    Returns:
        The value of the series

    Raises:
        DivergenceError: If |z| >= 1 and the series does not terminate
        PoleError: If (c;q)_n vanishes before termination

    Examples:
        >>> phi21(0.3, 0.2, 0.5, 0.4, 0.0)
        1.0
    """
    validate_q(q)
    n_term = terminating_index(a, q)
    n_term_b = terminating_index(b, q)
    if n_term_b is not None and (n_term is None or n_term_b < n_term):
        n_term = n_term_b

    if n_term is None and abs(z) >= 1:
        raise DivergenceError(f"2phi1 diverges for |z| = {abs(z)} >= 1 without termination")

    term = a * 0 + b * 0 + c * 0 + z * 0 + 1
    total = term
    q_power = q * 0 + 1
    n = 0
    while True:
        if n_term is not None and n >= n_term:
            break
        denominator = (1 - c * q_power) * (1 - q_power * q)
        if _is_zero(1 - c * q_power):
            raise PoleError(f"(c;q)_n vanishes at n = {n + 1} with c = {c}")
        term = term * (1 - a * q_power) * (1 - b * q_power) / denominator * z
        total = total + term
        q_power = q_power * q
        n += 1
        if n_term is None and abs(term) <= tol * max(1.0, abs(total)):
            break
        if n > MAX_SERIES_TERMS:
            raise ConvergenceError(f"2phi1 did not converge within {MAX_SERIES_TERMS} terms")
    return total


# --- identities ---------------------------------------------------------------


@dataclass
class IdentityReport:
    """Max absolute residual per identity, with rejected sample points."""

    max_residual: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)
    rejected: List[Dict[str, Any]] = field(default_factory=list)

    def record(self, identity: str, residual: float) -> None:
        self.checked[identity] = self.checked.get(identity, 0) + 1
        self.max_residual[identity] = max(self.max_residual.get(identity, 0.0), float(residual))

    def reject(self, identity: str, point: Sequence[Any], reason: str) -> None:
        self.rejected.append({"identity": identity, "point": list(point), "reason": reason})

    def passed(self, tol: float) -> bool:
        return all(residual <= tol for residual in self.max_residual.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_residual": self.max_residual,
            "checked": self.checked,
            "rejected": self.rejected,
        }


def _residual(lhs: Any, rhs: Any) -> float:
    return float(abs(lhs - rhs))


def identity_pochhammer_recursion(a: Any, q: Any, n: int) -> float:
    """(a;q)_{n+1} = (a;q)_n (1 - a q^n)."""
    return _residual(qpoch(a, q, n + 1), qpoch(a, q, n) * (1 - a * q**n))


def identity_a(a: Any, q: Any, n: int) -> float:
    """(a;q)_n (a q^n; q)_inf = (a;q)_inf, as a relative residual."""
    rhs = qpoch_inf(a, q)
    lhs = qpoch(a, q, n) * qpoch_inf(a * q**n, q)
    return _residual(lhs, rhs) / max(1.0, abs(rhs))


def identity_b(a: Any, q: Any, n: int) -> float:
    """(a^{-1} q^{1-n};q)_n = (a;q)_n (-a^{-1})^n q^{-n(n-1)/2}."""
    if a == 0 or q == 0:
        raise DomainError("identity (B) requires a != 0 and q != 0")
    lhs = qpoch(q ** (1 - n) / a, q, n)
    rhs = qpoch(a, q, n) * (-1 / a) ** n * q ** (-(n * (n - 1)) // 2)
    return _residual(lhs, rhs) / max(1.0, abs(rhs))


def identity_c(a: Any, q: Any, n: int, k: int) -> float:
    """(a;q)_{n-k} = (a;q)_n / (a^{-1} q^{1-n};q)_k (-q a^{-1})^k q^{k(k-1)/2 - nk}."""
    if a == 0 or q == 0:
        raise DomainError("identity (C) requires a != 0 and q != 0")
    if not 0 <= k <= n:
        raise DomainError(f"identity (C) requires 0 <= k <= n, got k={k}, n={n}")
    denominator = qpoch(q ** (1 - n) / a, q, k)
    if _is_zero(denominator):
        raise DomainError("identity (C) denominator vanishes")
    lhs = qpoch(a, q, n - k)
    rhs = qpoch(a, q, n) / denominator * (-q / a) ** k * q ** ((k * (k - 1)) // 2 - n * k)
    return _residual(lhs, rhs) / max(1.0, abs(rhs))


def identity_q_gauss(a: Any, b: Any, c: Any, q: Any) -> float:
    """2phi1(a,b;c;q,c/ab) equals the four-Pochhammer product, relative residual."""
    if a == 0 or b == 0:
        raise DomainError("q-Gauss requires a, b != 0")
    z = c / (a * b)
    if abs(z) >= 1:
        raise DomainError(f"q-Gauss requires |c/ab| < 1, got {abs(z)}")
    lhs = phi21(float(a), float(b), float(c), float(q), float(z))
    rhs = (
        qpoch_inf(c / a, q)
        * qpoch_inf(c / b, q)
        / (qpoch_inf(c, q) * qpoch_inf(z, q))
    )
    return _residual(lhs, rhs) / max(1.0, abs(rhs))


def identity_q_gauss_degenerate(n: int, b: Any, c: Any, q: Any) -> float:
    """2phi1(q^{-n}, b; c; q, q) = (c/b;q)_n / (c;q)_n b^n; exact for Fractions."""
    if q == 0 or b == 0:
        raise DomainError("degenerate q-Gauss requires q, b != 0")
    denominator = qpoch(c, q, n)
    if _is_zero(denominator):
        raise DomainError("degenerate q-Gauss denominator (c;q)_n vanishes")
    lhs = phi21(q ** (-n), b, c, q, q)
    rhs = qpoch(c / b, q, n) / denominator * b**n
    return _residual(lhs, rhs)


def identity_expansion(a: Any, q: Any, y: int) -> float:
    """(a;q)_y = sum_r (-a)^r q^{r(r-1)/2} [y choose r]_q."""
    lhs = qpoch(a, q, y)
    rhs = sum(
        (-a) ** r * q ** ((r * (r - 1)) // 2) * qbinomial(y, r, q) for r in range(y + 1)
    )
    return _residual(lhs, rhs)


def identity_suite(q: Any, sample_points: Sequence[Tuple[Any, ...]]) -> IdentityReport:
    """
    Checks the classical q-series identities on a list of parameter tuples.

    Each sample point is (a, b, c, n, k). Every identity takes the components
    it needs; points violating an identity's preconditions are recorded in
    the report as rejected and do not stop the suite.

    Args:
        q: Nome in [0, 1)
        sample_points: Parameter tuples (a, b, c, n, k)

    Returns:
        An IdentityReport with the max absolute residual per identity
    """
    validate_q(q)
    report = IdentityReport()
    checks = {
        "pochhammer_recursion": lambda a, b, c, n, k: identity_pochhammer_recursion(a, q, n),
        "A": lambda a, b, c, n, k: identity_a(a, q, n),
        "B": lambda a, b, c, n, k: identity_b(a, q, n),
        "C": lambda a, b, c, n, k: identity_c(a, q, n, k),
        "q_gauss": lambda a, b, c, n, k: identity_q_gauss(a, b, c, q),
        "q_gauss_degenerate": lambda a, b, c, n, k: identity_q_gauss_degenerate(n, b, c, q),
        "expansion": lambda a, b, c, n, k: identity_expansion(a, q, n),
    }

    for point in sample_points:
        a, b, c, n, k = point
        for name, check in checks.items():
            try:
                report.record(name, check(a, b, c, n, k))
            except (DomainError, PoleError, DivergenceError, ZeroDivisionError) as e:
                logger.debug(f"Identity {name} rejected point {point}: {e}")
                report.reject(name, point, str(e))

    logger.info(
        f"q-series identities checked on {len(sample_points)} point(s), "
        f"{len(report.rejected)} rejection(s)"
    )
    return report

