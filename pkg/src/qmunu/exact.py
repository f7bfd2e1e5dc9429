"""
Exact engine for the Boson process on Y^N_k.

Transition operators are sparse row maps whose entries are Fractions when
the parameters are rational and floats otherwise; float operators are
applied through scipy.sparse. The one-step Boson operator is the product
[A]_1 [A]_2 ... [A]_N of site transfer operators, and evolution applies
the factors to the vector one at a time without forming the product.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .chains import ParamSchedule
from .qdist import INFINITY, ModelParams, infinite_duality_sum, phi_pmf, phi_row
from .utils.constants import DEFAULT_STATE_CAP, MAX_BINEXP_DEGREE
from .utils.exceptions import CapacityError, DomainError

logger = getLogger(__name__)

State = Tuple[int, ...]


# --- state spaces -------------------------------------------------------------


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_states(N: int, k: int, cap: int = DEFAULT_STATE_CAP) -> List[State]:
    """
    All occupations (y_0, ..., y_N) with y_0 + ... + y_N = k, in lexicographic order.

    Raises:
        CapacityError: If binomial(N + k, k) exceeds cap

    Examples:
        >>> enumerate_states(1, 1)
        [(0, 1), (1, 0)]
        >>> len(enumerate_states(3, 4))
        35
    """
    if N < 1 or k < 0:
        raise DomainError(f"need N >= 1 and k >= 0, got N={N}, k={k}")
    size = math.comb(N + k, k)
    if size > cap:
        raise CapacityError(f"Y^{N}_{k} has {size} states, above the cap {cap}")
    return list(_compositions(k, N + 1))


@dataclass(frozen=True)
class StateSpace:
    """Y^N_k with its canonical order and the inverse index map."""

    N: int
    k: int
    states: Tuple[State, ...]
    index: Dict[State, int]

    def __hash__(self) -> int:
        return hash((self.N, self.k))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StateSpace) and (self.N, self.k) == (other.N, other.k)

    def __len__(self) -> int:
        return len(self.states)


@lru_cache(maxsize=32)
def state_space(N: int, k: int, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    states = tuple(enumerate_states(N, k, cap))
    return StateSpace(N, k, states, {state: i for i, state in enumerate(states)})


def occupation_from_weyl(nvec: Sequence[int], N: int) -> State:
    """y(n): y_i counts the entries of n equal to i."""
    y = [0] * (N + 1)
    for n in nvec:
        if not 0 <= n <= N:
            raise DomainError(f"entry {n} of {list(nvec)} lies outside [0, {N}]")
        y[n] += 1
    return tuple(y)


def weyl_from_occupation(y: Sequence[int]) -> Tuple[int, ...]:
    """n(y): site labels repeated by occupation, weakly decreasing."""
    return tuple(i for i in range(len(y) - 1, -1, -1) for _ in range(y[i]))


def _check_weyl(nvec: Sequence[int]) -> None:
    if any(a < b for a, b in zip(nvec, nvec[1:])) or any(n < 0 for n in nvec):
        raise DomainError(f"{list(nvec)} is not a weakly decreasing nonnegative vector")


# --- sparse operators ---------------------------------------------------------


class SparseOperator:
    """
    A square operator stored as one {column: weight} dict per row.

    Rows act on functions: (A f)(row) = sum_col A[row][col] f(col).
    """

    def __init__(self, rows: List[Dict[int, Any]], exact: bool):
        self.rows = rows
        self.exact = exact
        self._csr: Optional[sparse.csr_matrix] = None

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, key: Tuple[int, int]) -> Any:
        row, col = key
        return self.rows[row].get(col, Fraction(0) if self.exact else 0.0)

    def to_csr(self) -> sparse.csr_matrix:
        if self._csr is None:
            size = len(self.rows)
            indptr = [0]
            indices: List[int] = []
            data: List[float] = []
            for row in self.rows:
                for col in sorted(row):
                    indices.append(col)
                    data.append(float(row[col]))
                indptr.append(len(indices))
            self._csr = sparse.csr_matrix((data, indices, indptr), shape=(size, size))
        return self._csr

    def apply(self, vector: Sequence[Any]) -> Any:
        if not self.exact:
            return self.to_csr() @ np.asarray(vector, dtype=float)
        return [
            sum((weight * vector[col] for col, weight in row.items()), Fraction(0))
            for row in self.rows
        ]

    def compose(self, other: "SparseOperator") -> "SparseOperator":
        """The product self * other."""
        rows: List[Dict[int, Any]] = []
        for row in self.rows:
            combined: Dict[int, Any] = {}
            for mid, weight in row.items():
                for col, other_weight in other.rows[mid].items():
                    combined[col] = combined.get(col, 0) + weight * other_weight
            rows.append({col: value for col, value in combined.items() if value != 0})
        return SparseOperator(rows, self.exact and other.exact)

    def row_sums(self) -> List[Any]:
        return [sum(row.values(), Fraction(0) if self.exact else 0.0) for row in self.rows]

    def to_dense(self) -> List[List[Any]]:
        size = len(self.rows)
        return [[self[r, c] for c in range(size)] for r in range(size)]


@lru_cache(maxsize=4096)
def _phi_weights(m: int, p: ModelParams) -> Tuple[Any, ...]:
    return tuple(phi_row(m, p))


def site_operator(space: StateSpace, i: int, p: ModelParams) -> SparseOperator:
    """
    The transfer operator [A]_i: site i sends s ~ phi(.|y_i) particles to site i - 1.
    """
    if not 1 <= i <= space.N:
        raise DomainError(f"site {i} outside 1..{space.N}")
    rows: List[Dict[int, Any]] = []
    for y in space.states:
        row: Dict[int, Any] = {}
        for s, weight in enumerate(_phi_weights(y[i], p)):
            if weight == 0:
                continue
            target = list(y)
            target[i] -= s
            target[i - 1] += s
            row[space.index[tuple(target)]] = weight
        rows.append(row)
    return SparseOperator(rows, p.exact)


def _site_operators(space: StateSpace, sched: ParamSchedule, t: int) -> List[SparseOperator]:
    return [site_operator(space, i, sched.params_at(i, t)) for i in range(1, space.N + 1)]


def boson_matrix(
    N: int, k: int, sched: ParamSchedule, t: int = 0, order: str = "ascending",
    cap: int = DEFAULT_STATE_CAP,
) -> SparseOperator:
    """
    One-step transition operator on Y^N_k at time t.

    With order="ascending" this is [A]_1 [A]_2 ... [A]_N, which realises the
    parallel update. order="reversed" gives [A]_N ... [A]_1, a sequential
    update in which site i - 1 already sees the particles sent by site i.

    Raises:
        CapacityError: If the state space is above cap
        ScheduleError: If some a_i mu_{t+1} leaves [nu, 1)
    """
    if order not in ("ascending", "reversed"):
        raise DomainError(f"unknown operator order '{order}'")
    space = state_space(N, k, cap)
    factors = _site_operators(space, sched, t)
    if order == "reversed":
        factors = factors[::-1]
    product = factors[-1]
    for factor in reversed(factors[:-1]):
        product = factor.compose(product)
    return product


def parallel_kernel(N: int, k: int, sched: ParamSchedule, t: int = 0) -> SparseOperator:
    """The parallel Boson update built by enumerating every draw vector (s_1, ..., s_N)."""
    space = state_space(N, k)
    params = [sched.params_at(i, t) for i in range(1, N + 1)]
    rows: List[Dict[int, Any]] = []
    for y in space.states:
        row: Dict[int, Any] = {}
        ranges = [range(y[i] + 1) for i in range(1, N + 1)]
        for draws in itertools.product(*ranges):
            weight = 1
            target = list(y)
            for i, s in enumerate(draws, start=1):
                weight = weight * _phi_weights(y[i], params[i - 1])[s]
                target[i] -= s
                target[i - 1] += s
            if weight != 0:
                col = space.index[tuple(target)]
                row[col] = row.get(col, 0) + weight
        rows.append(row)
    return SparseOperator(rows, sched.exact)


def is_triangular(matrix: SparseOperator, space: StateSpace) -> bool:
    """
    True if every transition weakly lowers all cumulative tails y_i + ... + y_N.
    """
    tails = [tuple(itertools.accumulate(reversed(y))) for y in space.states]
    for row_index, row in enumerate(matrix.rows):
        for col in row:
            if any(a > b for a, b in zip(tails[col], tails[row_index])):
                return False
    return True


# --- evolution ----------------------------------------------------------------


@dataclass
class ExactVector:
    """A function on Y^N_k, one value per state in canonical order."""

    space: StateSpace
    values: Any

    def __getitem__(self, state: Sequence[int]) -> Any:
        return self.values[self.space.index[tuple(state)]]


def evolve_true(h0: ExactVector, t: int, sched: ParamSchedule) -> ExactVector:
    """
    Solves h(s) = P_s h(s - 1) for s = 1..t, where P_s uses mu_s.

    Each step applies [A]_N first and [A]_1 last.
    """
    space = h0.space
    sched.validate(space.N, t)
    operators: Dict[Tuple[int, Any], SparseOperator] = {}
    values = h0.values
    for step in range(t):
        for i in range(space.N, 0, -1):
            p = sched.params_at(i, step)
            key = (i, p.mu)
            if key not in operators:
                operators[key] = site_operator(space, i, p)
            values = operators[key].apply(values)
    return ExactVector(space, values)


def step_data_vector(space: StateSpace, exact: bool) -> ExactVector:
    """h_0(y) = 1{y_0 = 0}, the image of step initial data."""
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    values = [one if y[0] == 0 else zero for y in space.states]
    if not exact:
        values = np.asarray(values)
    return ExactVector(space, values)


def moment_vector(N: int, k: int, t: int, sched: ParamSchedule,
                  cap: int = DEFAULT_STATE_CAP) -> ExactVector:
    """h(t) started from step data; h(t; y(n)) = E[prod_i q^{x_{n_i}(t) + n_i}]."""
    space = state_space(N, k, cap)
    return evolve_true(step_data_vector(space, sched.exact), t, sched)


def qmoment_oracle(nvec: Sequence[int], t: int, sched: ParamSchedule,
                   cap: int = DEFAULT_STATE_CAP) -> Any:
    """
    E[prod_i q^{x_{n_i}(t) + n_i}] for TASEP with step initial data, by duality.

    Args:
        nvec: Weakly decreasing particle labels n_1 >= ... >= n_k >= 0
        t: Horizon
        sched: Parameters; exact when rational

    Returns:
        The expectation, a Fraction for rational parameters

    Examples:
        >>> p = ModelParams(Fraction(1, 3), Fraction(1, 2), Fraction(1, 5))
        >>> qmoment_oracle([1], 1, ParamSchedule(p))
        Fraction(5, 8)
    """
    nvec = tuple(nvec)
    _check_weyl(nvec)
    zero, one = (Fraction(0), Fraction(1)) if sched.exact else (0.0, 1.0)
    if not nvec:
        return one
    if nvec[-1] == 0:
        return zero
    N = nvec[0]
    h = moment_vector(N, len(nvec), t, sched, cap)
    value = h[occupation_from_weyl(nvec, N)]
    return value if sched.exact else float(value)


def moment_table(N: int, k: int, t: int, sched: ParamSchedule) -> Dict[Tuple[int, ...], Any]:
    """qmoment_oracle for every weakly decreasing nvec of length k with entries in [0, N]."""
    h = moment_vector(N, k, t, sched)
    return {weyl_from_occupation(y): h.values[i] for i, y in enumerate(h.space.states)}


# --- intertwining -------------------------------------------------------------


def h_functional(x: Sequence[int], y: Sequence[int], q: Any) -> Any:
    """
    H(x; y) = prod_{i >= 1} q^{y_i (x_i + i)}, and 0 when y_0 > 0.

    x holds x_1..x_N and y holds y_0..y_N.
    """
    one = q * 0 + 1
    if y[0] > 0:
        return one * 0
    value = one
    for i in range(1, len(y)):
        if y[i]:
            value = value * q ** (y[i] * (x[i - 1] + i))
    return value


def intertwining_window(N: int, W: int) -> List[Tuple[int, ...]]:
    """Strictly decreasing x with x_n + n >= 0 and x_1 + 1 <= W."""
    positions = range(W - 2, -N - 1, -1)
    return [
        x for x in itertools.combinations(positions, N)
        if all(x[n] + n + 1 >= 0 for n in range(N))
    ]


def _particle_sum(m: Any, y_n: int, p: ModelParams, exact: bool, tol: float) -> Any:
    """sum_j phi(j|m) q^{j y_n}; for m = infinity the closed form or a certified truncation."""
    if m == INFINITY:
        if exact:
            return phi_pmf(0, y_n, p)
        value, _ = infinite_duality_sum(y_n, p.as_float(), tol)
        return value
    row = phi_row(int(m), p)
    q = p.q if exact else float(p.q)
    return sum(weight * q ** (j * y_n) for j, weight in enumerate(row))


def verify_intertwining(
    N: int, k_max: int, W: int, sched: ParamSchedule, t: int = 0,
    tol: float = 1e-10, mode: str = "exact",
) -> Any:
    """
    Max residual of P^TASEP H - H (P^Boson)^T over a truncated (x, y) grid.

    The TASEP side factorises over particles given x; the first particle's
    infinite sum uses phi(0|y_1) in "exact" mode and a certified geometric
    truncation in "float" mode. The Boson side is the row of boson_matrix
    applied to H(x, .).

    Args:
        N: Number of sites / particles
        k_max: Largest particle count in y
        W: Position window, see intertwining_window
        sched: Parameters including a_i and mu_t
        t: Time index of the step
        tol: Target accuracy; the certified tail must stay below tol / 10
        mode: "exact" (rational parameters) or "float"

    Returns:
        The max absolute residual, exactly 0 in exact mode

    Raises:
        TailBoundError: If the certified tail exceeds tol / 10
    """
    if mode not in ("exact", "float"):
        raise DomainError(f"unknown mode '{mode}'")
    exact = mode == "exact"
    if exact and not sched.exact:
        raise DomainError("exact mode needs rational parameters")
    q = sched.q if exact else float(sched.q)
    particle_params = [sched.params_at(n, t) for n in range(1, N + 1)]
    if not exact:
        particle_params = [p.as_float() for p in particle_params]
        sched = ParamSchedule(
            sched.base.as_float(),
            None if sched.a is None else tuple(float(a) for a in sched.a),
            None if sched.mu_schedule is None else tuple(float(m) for m in sched.mu_schedule),
        )

    window = intertwining_window(N, W)
    sums: Dict[Tuple[int, Any, int], Any] = {}
    worst: Any = Fraction(0) if exact else 0.0

    for k in range(k_max + 1):
        space = state_space(N, k)
        boson = boson_matrix(N, k, sched, t)
        for x in window:
            supports = [INFINITY] + [x[n - 1] - x[n] - 1 for n in range(1, N)]
            h_row = [h_functional(x, y, q) for y in space.states]
            rhs = boson.apply(h_row)
            for index, y in enumerate(space.states):
                if y[0] > 0:
                    lhs = q * 0
                else:
                    lhs = h_row[index]
                    for n in range(1, N + 1):
                        key = (n, supports[n - 1], y[n])
                        if key not in sums:
                            sums[key] = _particle_sum(
                                supports[n - 1], y[n], particle_params[n - 1], exact, tol
                            )
                        lhs = lhs * sums[key]
                worst = max(worst, abs(lhs - rhs[index]))
        logger.debug(f"Intertwining N={N} k={k}: {len(window)} positions, residual {float(worst):.3e}")
    return worst


# --- quadratic algebra ----------------------------------------------------------


@dataclass(frozen=True)
class BoundaryCoeffs:
    """alpha, beta, gamma of the relation BA = alpha AA + beta AB + gamma BB."""

    alpha: Any
    beta: Any
    gamma: Any

    @classmethod
    def from_params(cls, q: Any, nu: Any) -> "BoundaryCoeffs":
        denominator = 1 - q * nu
        return cls(
            alpha=nu * (1 - q) / denominator,
            beta=(q - nu) / denominator,
            gamma=(1 - q) / denominator,
        )


@dataclass
class BinexpResult:
    """Outcome of the degree-m ideal membership test."""

    degree: int
    member: bool
    dimension: int
    generators: int
    rank_ideal: int
    rank_augmented: int


def _to_qq(value: Fraction):
    value = Fraction(value)
    return QQ(value.numerator, value.denominator)


def binexp_difference(m: int, p: ModelParams) -> Dict[int, Fraction]:
    """
    (pA + (1-p)B)^m - sum_j phi(j|m) A^j B^{m-j} in the free-word basis.

    Words of length m are encoded as integers, most significant bit first,
    with A = 0 and B = 1; zero coefficients are dropped.
    """
    move = p.move_probability
    difference: Dict[int, Fraction] = {}
    for word in range(2**m):
        b_count = bin(word).count("1")
        difference[word] = move ** (m - b_count) * (1 - move) ** b_count
    for j, weight in enumerate(phi_row(m, p)):
        word = (1 << (m - j)) - 1
        difference[word] -= weight
    return {word: value for word, value in difference.items() if value != 0}


def binexp_membership(m: int, p: ModelParams) -> BinexpResult:
    """
    Tests whether the binomial-expansion difference lies in the degree-m slice
    of the two-sided ideal generated by R = BA - alpha AA - beta AB - gamma BB.

    The slice is spanned by u R v with |u| + |v| = m - 2; membership is a rank
    comparison over QQ with and without the difference vector.

    Raises:
        CapacityError: If m exceeds the word-space cap
        DomainError: If the parameters are not rational
    """
    if m < 1:
        raise DomainError(f"degree must be positive, got {m}")
    if m > MAX_BINEXP_DEGREE:
        raise CapacityError(f"degree {m} above the cap {MAX_BINEXP_DEGREE}")
    if not p.exact:
        raise DomainError("the binomial expansion check needs rational parameters")

    coeffs = BoundaryCoeffs.from_params(p.q, p.nu)
    relation = {0b10: Fraction(1), 0b00: -coeffs.alpha, 0b01: -coeffs.beta, 0b11: -coeffs.gamma}
    dimension = 2**m

    rows: Dict[int, Dict[int, Any]] = {}
    for left_length in range(m - 1):
        right_length = m - 2 - left_length
        for left in range(2**left_length):
            for right in range(2**right_length):
                row: Dict[int, Any] = {}
                for pair, weight in relation.items():
                    if weight == 0:
                        continue
                    word = (left << (right_length + 2)) | (pair << right_length) | right
                    row[word] = _to_qq(weight)
                rows[len(rows)] = row
    n_generators = len(rows)

    difference = binexp_difference(m, p)
    if not difference:
        rank = DomainMatrix(rows, (n_generators, dimension), QQ).rank() if rows else 0
        return BinexpResult(m, True, dimension, n_generators, rank, rank)

    rank_ideal = DomainMatrix(rows, (n_generators, dimension), QQ).rank() if rows else 0
    rows[n_generators] = {word: _to_qq(value) for word, value in difference.items()}
    rank_augmented = DomainMatrix(rows, (n_generators + 1, dimension), QQ).rank()
    member = rank_augmented == rank_ideal
    logger.debug(f"Binomial expansion m={m}: ranks {rank_ideal} / {rank_augmented}")
    return BinexpResult(m, member, dimension, n_generators, rank_ideal, rank_augmented)


def verify_binexp(m: int, p: ModelParams) -> bool:
    """True if (pA + (1-p)B)^m = sum_j phi(j|m) A^j B^{m-j} modulo the quadratic relation."""
    return binexp_membership(m, p).member
