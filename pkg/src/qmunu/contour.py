"""
Nested contour integral formula for the q-moments of (q, mu, nu)-TASEP.

For step initial data and n_1 >= ... >= n_k,

    E[prod_j q^{x_{n_j}(t) + n_j}] = (-1)^k q^{k(k-1)/2} / (2 pi i)^k
        oint ... oint prod_{A<B} (z_A - z_B) / (z_A - q z_B)
        prod_j ((1 - nu z_j)/(1 - z_j))^{n_j} prod_{s=1}^t (1 - mu_s z_j)/(1 - nu z_j)
        dz_j / (z_j (1 - nu z_j)),

where every circle contains 1, gamma_A contains q gamma_B for A < B, and
all circles exclude 0 and 1/nu. Integrals are evaluated with the
trapezoid rule on circles centred at 1, as one tensor-product sum.
"""

import itertools
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exact import BoundaryCoeffs
from .qdist import ModelParams
from .utils.constants import DEFAULT_CONTOUR_NODES, MAX_NODE_DOUBLINGS, MIN_CONTOUR_NODES
from .utils.exceptions import ContourInfeasible, ConvergenceError, DomainError, ScheduleError

logger = getLogger(__name__)

# Complex entries per cross-factor chunk
CHUNK_ELEMENTS = 2_000_000
# Smallest innermost radius considered by the planner, relative to the outer bound
MIN_INNER_FRACTION = 0.1
MIN_INNER_RADIUS = 0.05

Term = Tuple[Tuple[int, ...], Tuple[float, ...]]


@dataclass(frozen=True)
class ContourSpec:
    """Circles centred at `center`, one radius and node count per variable."""

    radii: Tuple[float, ...]
    nodes: Tuple[int, ...]
    center: float = 1.0
    eps: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if len(self.radii) != len(self.nodes):
            raise DomainError("radii and nodes must have the same length")
        if any(r <= 0 for r in self.radii) or any(m <= 0 or m % 2 for m in self.nodes):
            raise DomainError("radii must be positive and node counts positive and even")

    @property
    def k(self) -> int:
        return len(self.radii)

    def refined(self) -> "ContourSpec":
        return ContourSpec(self.radii, tuple(2 * m for m in self.nodes), self.center,
                           self.eps, self.delta)

    def node_points(self) -> List[np.ndarray]:
        """Trapezoid nodes z_m = c + r exp(2 pi i m / M) on each circle."""
        return [
            self.center + r * np.exp(2j * np.pi * np.arange(m) / m)
            for r, m in zip(self.radii, self.nodes)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radii": list(self.radii),
            "nodes": list(self.nodes),
            "center": self.center,
            "eps": self.eps,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class ObservableSpec:
    """A q-moment observable: the index vector, the horizon and an optional mu schedule."""

    nvec: Tuple[int, ...]
    t: int
    mu_schedule: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "nvec", tuple(int(n) for n in self.nvec))
        if self.t < 0:
            raise DomainError(f"horizon must be nonnegative, got {self.t}")
        if self.mu_schedule is not None:
            object.__setattr__(self, "mu_schedule", tuple(float(m) for m in self.mu_schedule))
            if len(self.mu_schedule) < self.t:
                raise ScheduleError(
                    f"mu_schedule has {len(self.mu_schedule)} entries, horizon is {self.t}"
                )

    def mus(self, p: ModelParams, t: Optional[int] = None) -> Tuple[float, ...]:
        """(mu_1, ..., mu_t) for horizon t, defaulting to this spec's horizon."""
        t = self.t if t is None else t
        if self.mu_schedule is None:
            return (float(p.mu),) * t
        if len(self.mu_schedule) < t:
            raise ScheduleError(f"mu_schedule has {len(self.mu_schedule)} entries, horizon is {t}")
        for mu in self.mu_schedule[:t]:
            if not float(p.nu) <= mu < 1:
                raise ScheduleError(f"mu_t = {mu} leaves [nu, 1)")
        return self.mu_schedule[:t]


@dataclass
class ContourResult:
    """A converged contour value with its diagnostics."""

    value: complex
    nodes: Tuple[int, ...]
    refinement_delta: float
    doublings: int

    @property
    def imag_residual(self) -> float:
        return abs(self.value.imag)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value.real,
            "imag_residual": self.imag_residual,
            "nodes": list(self.nodes),
            "refinement_delta": self.refinement_delta,
            "doublings": self.doublings,
        }


# --- planning -----------------------------------------------------------------


def _outer_bound(nu: float) -> float:
    """Largest admissible radius around 1: distance to 0 and to 1/nu."""
    return min(1.0, 1.0 / nu - 1.0) if nu > 0 else 1.0


def radius_recursion(k: int, q: float, eps: float, delta: float) -> Tuple[float, ...]:
    """r_k = eps and r_j = (1 - q) + q r_{j+1} + delta."""
    radii = [eps]
    for _ in range(k - 1):
        radii.append((1 - q) + q * radii[-1] + delta)
    return tuple(reversed(radii))


def check_feasible(radii: Sequence[float], q: float, nu: float, delta: float = 0.0) -> None:
    """
    Raises ContourInfeasible naming the violated constraint.

    Each circle must exclude 0 and 1/nu, and q gamma_B must lie inside
    gamma_A with margin delta for A < B.
    """
    bound = _outer_bound(nu)
    for j, r in enumerate(radii, start=1):
        if r >= bound - delta:
            raise ContourInfeasible(
                f"circle {j}: radius {r:.6g} must be below min(1, 1/nu - 1) - delta = "
                f"{bound - delta:.6g}"
            )
    for a, b in itertools.combinations(range(len(radii)), 2):
        reach = (1 - q) + q * radii[b]
        if reach + delta > radii[a] + 1e-15:
            raise ContourInfeasible(
                f"q * circle {b + 1} reaches {reach:.6g} from 1, circle {a + 1} has radius "
                f"{radii[a]:.6g} (margin {delta:.3g} required)"
            )


def convergence_ratios(radii: Sequence[float], q: float, nu: float) -> List[float]:
    """
    Geometric trapezoid convergence ratio of each circle.

    Circle j sees the images q gamma_B (B > j) from inside and the sets
    gamma_A / q (A < j), 0 and 1/nu from outside.
    """
    bound = _outer_bound(nu)
    ratios = []
    for j, r in enumerate(radii):
        inner = max(((1 - q) + q * radii[b] for b in range(j + 1, len(radii))), default=0.0)
        outer = bound
        for a in range(j):
            outer = min(outer, abs(radii[a] - (1 - q)) / q if q > 0 else math.inf)
        ratios.append(max(inner / r, r / outer))
    return ratios


def nodes_for_ratio(ratio: float, tol: float) -> int:
    """Smallest even node count with ratio^M below tol / 10, at least MIN_CONTOUR_NODES."""
    if ratio <= 0:
        return MIN_CONTOUR_NODES
    if ratio >= 1:
        raise ContourInfeasible(f"convergence ratio {ratio:.4f} is not below 1")
    count = math.ceil(math.log(tol / 10) / math.log(ratio))
    count = max(MIN_CONTOUR_NODES, count)
    return count + count % 2


def plan_contours(
    k: int,
    q: float,
    nu: float,
    delta: Optional[float] = None,
    eps: Optional[float] = None,
    nodes: Optional[int] = None,
    tol: float = 1e-10,
) -> ContourSpec:
    """
    Builds nested circles around 1 from the radius recursion.

    When eps and delta are both given they are used as is. Otherwise a grid
    search picks the pair with the smallest total node count, where each
    circle's count follows from its convergence ratio. The innermost radius
    is kept at or above max(0.05, 0.1 * min(1, 1/nu - 1)) to limit
    cancellation in (1 - z)^{-n}.

    Args:
        k: Number of variables
        q: Nome in [0, 1)
        nu: The nu parameter
        delta: Nesting margin
        eps: Innermost radius
        nodes: Fixed node count for every circle; estimated from the ratios when omitted
        tol: Target quadrature accuracy for the node estimate

    Returns:
        A feasible ContourSpec

    Raises:
        ContourInfeasible: With the violated inequality when no family fits
    """
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    q, nu = float(q), float(nu)

    if eps is not None and delta is not None:
        radii = radius_recursion(k, q, eps, delta)
        check_feasible(radii, q, nu, delta)
        chosen = (eps, delta, radii)
    else:
        chosen = _search_radii(k, q, nu, eps, delta, tol)

    eps, delta, radii = chosen
    if nodes is not None:
        counts = tuple([nodes + nodes % 2] * k)
    else:
        counts = tuple(nodes_for_ratio(r, tol) for r in convergence_ratios(radii, q, nu))
    logger.debug(f"Planned contours k={k}: radii {radii}, nodes {counts}")
    return ContourSpec(radii, counts, eps=eps, delta=delta)


def _search_radii(k, q, nu, eps, delta, tol):
    bound = _outer_bound(nu)
    eps_min = min(max(MIN_INNER_RADIUS, MIN_INNER_FRACTION * bound), 0.5 * bound)
    eps_grid = [eps] if eps is not None else np.linspace(eps_min, 0.9 * bound, 24)
    delta_grid = [delta] if delta is not None else np.geomspace(1e-3 * bound, 0.5 * bound, 30)

    best = None
    last_error: Optional[ContourInfeasible] = None
    for e, d in itertools.product(eps_grid, delta_grid):
        radii = radius_recursion(k, q, float(e), float(d))
        try:
            check_feasible(radii, q, nu, float(d))
            ratios = convergence_ratios(radii, q, nu)
            cost = math.prod(nodes_for_ratio(r, tol) for r in ratios)
        except ContourInfeasible as error:
            last_error = error
            continue
        if best is None or cost < best[0]:
            best = (cost, float(e), float(d), radii)
    if best is None:
        raise ContourInfeasible(
            f"no nested circles for k={k}, q={q}, nu={nu}: {last_error}"
        )
    return best[1], best[2], best[3]


def contours_from_radii(radii: Sequence[float], q: float, nu: float,
                        nodes: int = DEFAULT_CONTOUR_NODES) -> ContourSpec:
    """User-supplied circles, checked against the nesting and exclusion constraints."""
    radii = tuple(float(r) for r in radii)
    check_feasible(radii, float(q), float(nu))
    return ContourSpec(radii, tuple([nodes + nodes % 2] * len(radii)))


# --- quadrature ---------------------------------------------------------------


def _variable_weights(z: np.ndarray, terms: Sequence[Term], j: int, p: ModelParams,
                      center: float) -> np.ndarray:
    """Per-variable integrand times trapezoid weight (z - c)/M, one column per term."""
    nu = float(p.nu)
    m = len(z)
    base = (z - center) / m / (z * (1 - nu * z))
    ratio = (1 - nu * z) / (1 - z)
    columns = []
    for nvec, mus in terms:
        column = base * ratio ** nvec[j]
        for mu in mus:
            column = column * (1 - mu * z) / (1 - nu * z)
        columns.append(column)
    return np.stack(columns, axis=1)


def _nested_sum(points: List[np.ndarray], weights: List[np.ndarray], q: float) -> np.ndarray:
    """sum over the node grid of the cross factor times prod_j weights_j, per term."""
    k = len(points)
    n_terms = weights[0].shape[1]
    if k == 1:
        return weights[0].sum(axis=0)

    rest = math.prod(len(z) for z in points[1:])
    chunk = max(1, CHUNK_ELEMENTS // rest)
    total = np.zeros(n_terms, dtype=complex)
    for start in range(0, len(points[0]), chunk):
        grids = [points[0][start:start + chunk]] + points[1:]
        shaped = [
            g.reshape([-1 if axis == j else 1 for axis in range(k)]) for j, g in enumerate(grids)
        ]
        cross = np.ones([len(g) for g in grids], dtype=complex)
        for a, b in itertools.combinations(range(k), 2):
            cross = cross * (shaped[a] - shaped[b]) / (shaped[a] - q * shaped[b])

        partial = np.tensordot(cross, weights[k - 1], axes=([k - 1], [0]))
        for j in range(k - 2, -1, -1):
            w = weights[j][start:start + chunk] if j == 0 else weights[j]
            partial = (partial * w.reshape((1,) * j + w.shape)).sum(axis=j)
        total += partial
    return total


def evaluate_terms(terms: Sequence[Term], p: ModelParams, spec: ContourSpec) -> np.ndarray:
    """
    The contour formula for several (nvec, mus) terms sharing one set of circles.

    nvec may be any integer vector of length spec.k; negative entries give
    (1 - nu z)^{-|n|} factors whose pole 1/nu lies outside every circle.
    """
    k = spec.k
    for nvec, _ in terms:
        if len(nvec) != k:
            raise DomainError(f"nvec {nvec} has length {len(nvec)}, contours have {k}")
    q = float(p.q)
    points = spec.node_points()
    weights = [_variable_weights(points[j], terms, j, p, spec.center) for j in range(k)]
    prefactor = (-1) ** k * q ** (k * (k - 1) // 2)
    return prefactor * _nested_sum(points, weights, q)


def _converged_terms(
    terms: Sequence[Term], p: ModelParams, spec: ContourSpec, tol: float, max_doublings: int
) -> Tuple[np.ndarray, ContourSpec, float, int]:
    values = evaluate_terms(terms, p, spec)
    for doubling in range(1, max_doublings + 1):
        finer = spec.refined()
        finer_values = evaluate_terms(terms, p, finer)
        change = float(np.max(np.abs(finer_values - values)))
        if change < tol:
            return finer_values, finer, change, doubling
        logger.debug(f"Contour refinement {finer.nodes}: change {change:.3e}")
        values, spec = finer_values, finer
    raise ConvergenceError(
        f"contour quadrature did not reach {tol:.1e} after {max_doublings} doublings "
        f"(nodes {spec.nodes})"
    )


def _default_spec(k: int, p: ModelParams, tol: float) -> ContourSpec:
    return plan_contours(k, float(p.q), float(p.nu), tol=tol)


def qmoment_contour(
    obs: ObservableSpec,
    p: ModelParams,
    spec: Optional[ContourSpec] = None,
    tol: float = 1e-10,
    max_doublings: int = MAX_NODE_DOUBLINGS,
) -> ContourResult:
    """
    Evaluates the nested contour formula, doubling nodes until two successive
    values differ by less than tol.

    Args:
        obs: Index vector, horizon and optional mu schedule
        p: Model parameters (site weights are all 1)
        spec: Circles; planned automatically when omitted
        tol: Absolute refinement tolerance
        max_doublings: Doublings allowed before giving up

    Returns:
        A ContourResult; value.imag is a quadrature diagnostic

    Raises:
        ContourInfeasible: If no admissible circles exist
        ConvergenceError: If refinement does not settle
    """
    spec = spec or _default_spec(len(obs.nvec), p, tol)
    term = (obs.nvec, obs.mus(p))
    values, final, change, doublings = _converged_terms([term], p, spec, tol, max_doublings)
    return ContourResult(complex(values[0]), final.nodes, change, doublings)


def qmoment_contour_batch(
    observables: Sequence[ObservableSpec],
    p: ModelParams,
    spec: Optional[ContourSpec] = None,
    tol: float = 1e-10,
    max_doublings: int = MAX_NODE_DOUBLINGS,
) -> List[ContourResult]:
    """qmoment_contour for several observables with the same k on one quadrature grid."""
    if not observables:
        return []
    k = len(observables[0].nvec)
    spec = spec or _default_spec(k, p, tol)
    terms = [(obs.nvec, obs.mus(p)) for obs in observables]
    values, final, change, doublings = _converged_terms(terms, p, spec, tol, max_doublings)
    return [ContourResult(complex(v), final.nodes, change, doublings) for v in values]


# --- identities of the proof --------------------------------------------------


def check_free_evolution(
    obs: ObservableSpec,
    p: ModelParams,
    spec: Optional[ContourSpec] = None,
    tol: float = 1e-10,
    max_doublings: int = MAX_NODE_DOUBLINGS,
) -> float:
    """
    |u(t+1; n) - prod_i [nabla]_i u(t; n)| for the contour solution u.

    [nabla]_i u(n) = p u(n - e_i) + (1 - p) u(n) with p = (mu_{t+1} - nu)/(1 - nu);
    the product over i expands into 2^k shifted terms.
    """
    k = len(obs.nvec)
    spec = spec or _default_spec(k, p, tol)
    mus_next = obs.mus(p, obs.t + 1)
    mus_now = mus_next[: obs.t]
    move = (mus_next[-1] - float(p.nu)) / (1 - float(p.nu))

    terms: List[Term] = [(obs.nvec, mus_next)]
    coefficients = [1.0]
    for subset in itertools.product((0, 1), repeat=k):
        shifted = tuple(n - s for n, s in zip(obs.nvec, subset))
        size = sum(subset)
        terms.append((shifted, mus_now))
        coefficients.append(-(move**size) * (1 - move) ** (k - size))

    values, _, _, _ = _converged_terms(terms, p, spec, tol, max_doublings)
    return float(abs(np.dot(coefficients, values)))


def check_boundary(
    obs: ObservableSpec,
    p: ModelParams,
    spec: Optional[ContourSpec] = None,
    i: Optional[int] = None,
    tol: float = 1e-10,
    max_doublings: int = MAX_NODE_DOUBLINGS,
) -> float:
    """
    |alpha u(n_{i,i+1}^-) + beta u(n_{i+1}^-) + gamma u(n) - u(n_i^-)| at an equal pair n_i = n_{i+1}.

    i is 1-based; the first equal adjacent pair is used when omitted.
    """
    nvec = obs.nvec
    k = len(nvec)
    if i is None:
        i = next((j for j in range(1, k) if nvec[j - 1] == nvec[j]), None)
    if i is None or not 1 <= i < k or nvec[i - 1] != nvec[i]:
        raise DomainError(f"{list(nvec)} has no equal adjacent pair at position {i}")

    spec = spec or _default_spec(k, p, tol)
    coeffs = BoundaryCoeffs.from_params(float(p.q), float(p.nu))
    mus = obs.mus(p)

    def shift(*positions: int) -> Tuple[int, ...]:
        shifted = list(nvec)
        for position in positions:
            shifted[position - 1] -= 1
        return tuple(shifted)

    terms = [(shift(i, i + 1), mus), (shift(i + 1), mus), (nvec, mus), (shift(i), mus)]
    values, _, _, _ = _converged_terms(terms, p, spec, tol, max_doublings)
    combination = (
        coeffs.alpha * values[0] + coeffs.beta * values[1] + coeffs.gamma * values[2] - values[3]
    )
    return float(abs(combination))
