"""
Fredholm determinants for the e_q-Laplace transform E[1/(zeta q^{x_n(t)+n}; q)_inf].

Two kernels are discretised with the Nystrom method on a circle in w
(measure dw / (2 pi i), trapezoid nodes):

  - Mellin-Barnes: det(I + K_zeta) on a small circle around 1, where K_zeta
    carries an inner integral over Re s = 1/2 of
    pi / sin(-pi s) (-zeta)^s g(w) / g(q^s w) / (q^s w - w');
  - Cauchy: det(I + zeta K~) / (zeta; q)_inf on a circle around 0 and 1,
    with K~(w, w') = (g(w) / g(qw)) / (q w' - w).

The module also carries the independent moment-series oracle, an exact
inversion of the moment problem for the law of x_n(t) + n, and the checks of
the continuous-time degeneration.
"""

import cmath
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .chains import ParamSchedule
from .exact import qmoment_oracle
from .qdist import ModelParams, phi_pmf, phi_row_infinite
from .qseries import q_number, qfactorial, qpoch_inf
from .utils.constants import (
    DEFAULT_NYSTROM_NODES,
    INVERSION_TAIL,
    MAX_NYSTROM_NODES,
    MIN_MB_RADIUS,
    POLE_GUARD,
)
from .utils.exceptions import (
    ConfigError,
    ConvergenceError,
    DomainError,
    IllConditionedError,
    PoleProximityError,
    TruncationError,
)

logger = getLogger(__name__)

Horizon = Union[int, Sequence[float]]

# Largest support considered when inverting the moment problem
MAX_INVERSION_SUPPORT = 60


def _mus(t: Horizon, p: ModelParams) -> Tuple[float, ...]:
    if isinstance(t, int):
        return (float(p.mu),) * t
    return tuple(float(mu) for mu in t)


# --- g(w) ---------------------------------------------------------------------


def g_eval(w: Any, n: int, t: Horizon, p: ModelParams, guard: float = POLE_GUARD) -> Any:
    """
    g(w) = ((nu w;q)_inf / (w;q)_inf)^n prod_s (mu_s w;q)_inf / (nu w;q)_inf / (nu w;q)_inf.

    Args:
        w: Point or numpy array of points
        n: Particle index
        t: Horizon (constant mu) or the sequence mu_1..mu_t
        p: Model parameters
        guard: Minimal distance to the poles q^{-j} of (w;q)_inf^{-n}

    Raises:
        PoleProximityError: If some w lies within guard of a pole

    Examples:
        >>> g_eval(0.5, 0, 0, ModelParams(0.5, 0.4, 0.0))
        1.0
    """
    q, nu = float(p.q), float(p.nu)
    mus = _mus(t, p)
    w_arr = np.asarray(w)
    if n > 0:
        _check_poles(w_arr, q, guard)
    nu_poch = qpoch_inf(w_arr * nu, q)
    value = (nu_poch / qpoch_inf(w_arr, q)) ** n / nu_poch
    for mu, count in Counter(mus).items():
        value = value * (qpoch_inf(w_arr * mu, q) / nu_poch) ** count
    return value if isinstance(w, np.ndarray) else value.item()


def _check_poles(w: np.ndarray, q: float, guard: float) -> None:
    largest = float(np.max(np.abs(w))) if w.size else 0.0
    j = 0
    while True:
        pole = q ** (-j) if q > 0 else (1.0 if j == 0 else math.inf)
        if pole > 2 * largest + 1:
            return
        if np.min(np.abs(w - pole)) < guard:
            raise PoleProximityError(f"w lies within {guard} of the pole {pole}")
        j += 1


def g_ratio(w: Any, n: int, t: Horizon, p: ModelParams) -> Any:
    """
    g(w) / g(qw) in closed form, using (aw;q)_inf / (aqw;q)_inf = 1 - aw.

    ((1 - nu w)/(1 - w))^n prod_s (1 - mu_s w)/(1 - nu w) / (1 - nu w)
    """
    nu = float(p.nu)
    value = ((1 - nu * w) / (1 - w)) ** n / (1 - nu * w)
    for mu in _mus(t, p):
        value = value * (1 - mu * w) / (1 - nu * w)
    return value


# --- kernels ------------------------------------------------------------------


@dataclass(frozen=True)
class KernelConfig:
    """
    Contour and truncation data for one determinant.

    kind is "mb" or "cauchy". s_half_width and s_step only apply to "mb".
    """

    kind: str
    zeta: complex
    center: float
    radius: float
    nodes: int
    s_half_width: float = 0.0
    s_step: float = 0.0

    def refined(self) -> "KernelConfig":
        return KernelConfig(self.kind, self.zeta, self.center, self.radius, 2 * self.nodes,
                            self.s_half_width, self.s_step)

    def w_nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes on the circle and weights (w - c)/M of dw / (2 pi i)."""
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        w = self.center + self.radius * np.exp(1j * theta)
        return w, (w - self.center) / self.nodes

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "zeta": self.zeta,
            "center": self.center,
            "radius": self.radius,
            "nodes": self.nodes,
            "s_half_width": self.s_half_width,
            "s_step": self.s_step,
        }


def _check_zeta(zeta: complex) -> None:
    if zeta.imag == 0 and zeta.real > 0:
        raise ConfigError(f"zeta = {zeta} lies on the positive real axis")


def mb_radius(q: float, nu: float) -> float:
    """
    Radius of the Mellin-Barnes w-circle around 1.

    min(0.5 (1/q - 1), 0.5 (1/nu - 1), 0.5), further capped by
    0.5 (1 - sqrt q)/(1 + sqrt q) so that q^s w stays off the circle on Re s = 1/2.
    """
    candidates = [0.5, 0.5 * (1 - math.sqrt(q)) / (1 + math.sqrt(q))]
    if q > 0:
        candidates.append(0.5 * (1 / q - 1))
    if nu > 0:
        candidates.append(0.5 * (1 / nu - 1))
    return min(candidates)


def _mb_strip(q: float, radius: float, mu_max: float) -> float:
    """Half-width of the strip around Re s = 1/2 free of integrand singularities."""
    log_q = abs(math.log(q))
    shift = max(math.log((1 + radius) / (1 - radius)), math.log(max(mu_max, 1e-300) * (1 + radius)))
    return 0.5 - shift / log_q


def mb_config(zeta: complex, n: int, t: Horizon, p: ModelParams,
              nodes: int = DEFAULT_NYSTROM_NODES,
              tol: float = 1e-12) -> KernelConfig:
    """
    Mellin-Barnes kernel configuration.

    The s-line step follows from the singularity-free strip half-width d as
    h = 2 pi d / ln(1/tol); the truncation |Im s| <= L uses the decay
    exp(-(pi - |arg(-zeta)|) |Im s|) of the integrand.

    Raises:
        ConfigError: If zeta is on the positive axis, q = 0, or the circle is
            too small to be well conditioned
    """
    zeta = complex(zeta)
    _check_zeta(zeta)
    q, nu = float(p.q), float(p.nu)
    if q == 0:
        raise ConfigError("the Mellin-Barnes kernel needs q > 0")
    radius = mb_radius(q, nu)
    if radius < MIN_MB_RADIUS:
        raise ConfigError(f"Mellin-Barnes circle radius {radius:.2e} below {MIN_MB_RADIUS}")

    mus = _mus(t, p)
    strip = _mb_strip(q, radius, max(mus, default=nu))
    if strip <= 0.02:
        raise ConfigError(f"no usable strip around Re s = 1/2 (half-width {strip:.3f})")
    step = 2 * math.pi * strip / math.log(1 / tol)

    decay = math.pi - abs(cmath.phase(-zeta)) if zeta != 0 else math.pi
    if decay < 0.05:
        raise ConfigError(f"zeta = {zeta} is too close to the positive real axis")
    w = 1 + radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    g_scale = float(np.max(np.abs(g_eval(w, n, mus, p)))) / float(
        np.min(np.abs(g_eval(w * math.sqrt(q), n, mus, p)))
    )
    bound = 2 * math.pi * math.sqrt(abs(zeta)) * g_scale / max(radius * (1 - math.sqrt(q)), 1e-3)
    half_width = max(1.0, math.log(max(bound, 1.0) / tol) / decay)
    return KernelConfig("mb", zeta, 1.0, radius, nodes, half_width, step)


def cauchy_config(zeta: complex, p: ModelParams, nodes: int = DEFAULT_NYSTROM_NODES) -> KernelConfig:
    """Circle centred at 1/2 through radius 1/2 + 1/2 min(1, 1/nu - 1): contains 0 and 1, excludes 1/nu."""
    zeta = complex(zeta)
    _check_zeta(zeta)
    nu = float(p.nu)
    margin = min(1.0, 1 / nu - 1) if nu > 0 else 1.0
    return KernelConfig("cauchy", zeta, 0.5, 0.5 + 0.5 * margin, nodes)


def validate_config(cfg: KernelConfig, p: ModelParams) -> None:
    """Raises ConfigError when the circle breaks the kernel's containment rules."""
    q, nu = float(p.q), float(p.nu)
    _check_zeta(cfg.zeta)
    distance = lambda point: abs(point - cfg.center)  # noqa: E731
    if cfg.kind == "mb":
        if distance(1) >= cfg.radius:
            raise ConfigError("Mellin-Barnes circle must contain 1")
        excluded = [0.0] + ([1 / q] if q > 0 else []) + ([1 / nu] if nu > 0 else [])
        for point in excluded:
            if distance(point) <= cfg.radius:
                raise ConfigError(f"Mellin-Barnes circle must exclude {point:.6g}")
        if cfg.radius >= (1 - math.sqrt(q)) / (1 + math.sqrt(q)):
            raise ConfigError("Mellin-Barnes circle meets its own image under w -> q^s w")
    elif cfg.kind == "cauchy":
        for point in (0.0, 1.0):
            if distance(point) >= cfg.radius:
                raise ConfigError(f"Cauchy circle must contain {point}")
        if nu > 0 and distance(1 / nu) <= cfg.radius:
            raise ConfigError("Cauchy circle must exclude 1/nu")
    else:
        raise ConfigError(f"unknown kernel kind '{cfg.kind}'")


def mb_kernel_matrix(cfg: KernelConfig, n: int, t: Horizon, p: ModelParams) -> np.ndarray:
    """Nystrom matrix K(w_i, w_j) omega_j of the Mellin-Barnes kernel."""
    q = float(p.q)
    mus = _mus(t, p)
    w, omega = cfg.w_nodes()
    count = int(math.ceil(cfg.s_half_width / cfg.s_step))
    y = cfg.s_step * np.arange(-count, count + 1)
    s = 0.5 + 1j * y

    log_minus_zeta = cmath.log(-cfg.zeta)
    line = np.pi / np.sin(-np.pi * s) * np.exp(s * log_minus_zeta) * cfg.s_step / (2 * np.pi)
    q_s = np.exp(s * math.log(q))
    shifted = w[:, None] * q_s[None, :]
    ratio = g_eval(w, n, mus, p)[:, None] / g_eval(shifted, n, mus, p)
    weights = ratio * line[None, :]

    kernel = np.empty((cfg.nodes, cfg.nodes), dtype=complex)
    for i in range(cfg.nodes):
        kernel[i] = (weights[i][:, None] / (shifted[i][:, None] - w[None, :])).sum(axis=0)
    return kernel * omega[None, :]


def cauchy_kernel_matrix(cfg: KernelConfig, n: int, t: Horizon, p: ModelParams) -> np.ndarray:
    """Nystrom matrix zeta K~(w_i, w_j) omega_j of the Cauchy kernel."""
    q = float(p.q)
    w, omega = cfg.w_nodes()
    ratio = g_ratio(w, n, t, p)
    kernel = ratio[:, None] / (q * w[None, :] - w[:, None])
    return cfg.zeta * kernel * omega[None, :]


def fredholm_det(matrix: np.ndarray) -> complex:
    """det(I + matrix) through LU with partial pivoting."""
    lu, pivots = lu_factor(np.eye(matrix.shape[0]) + matrix)
    swaps = np.count_nonzero(pivots != np.arange(len(pivots)))
    return complex(np.prod(np.diag(lu)) * (-1) ** swaps)


@dataclass
class FredholmResult:
    """A determinant value after Nystrom refinement."""

    value: complex
    nodes: int
    change: float
    config: KernelConfig
    history: List[complex] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "nodes": self.nodes,
            "change": self.change,
            "config": self.config.to_dict(),
            "history": self.history,
        }


def _refine(evaluate, cfg: KernelConfig, tol: float) -> FredholmResult:
    value = evaluate(cfg)
    history = [value]
    while cfg.nodes * 2 <= MAX_NYSTROM_NODES:
        finer = cfg.refined()
        finer_value = evaluate(finer)
        history.append(finer_value)
        change = abs(finer_value - value)
        if change < tol:
            return FredholmResult(finer_value, finer.nodes, change, finer, history)
        value, cfg = finer_value, finer
    raise ConvergenceError(
        f"{cfg.kind} determinant did not settle below {tol:.1e} with {cfg.nodes} nodes"
    )


def det_mb(zeta: complex, n: int, t: Horizon, p: ModelParams,
           cfg: Optional[KernelConfig] = None, tol: float = 1e-10,
           nodes: int = DEFAULT_NYSTROM_NODES) -> FredholmResult:
    """
    det(I + K_zeta) with the Mellin-Barnes kernel.

    Without cfg the kernel starts from a circle with the given number of nodes
    and doubles it until successive values agree to tol.

    Raises:
        ConfigError: On contour constraint violations
        ConvergenceError: If node doubling fails
    """
    zeta = complex(zeta)
    if zeta == 0:
        cfg = cfg or KernelConfig("mb", zeta, 1.0, mb_radius(float(p.q), float(p.nu)), 0)
        return FredholmResult(1.0 + 0j, 0, 0.0, cfg, [1.0 + 0j])
    cfg = cfg or mb_config(zeta, n, t, p, nodes=nodes, tol=tol * 1e-2)
    validate_config(cfg, p)
    return _refine(lambda c: fredholm_det(mb_kernel_matrix(c, n, t, p)), cfg, tol)


def det_cauchy(zeta: complex, n: int, t: Horizon, p: ModelParams,
               cfg: Optional[KernelConfig] = None, tol: float = 1e-10,
               nodes: int = DEFAULT_NYSTROM_NODES) -> FredholmResult:
    """
    det(I + zeta K~) / (zeta; q)_inf with the Cauchy-type kernel.

    Raises:
        ConfigError: On contour constraint violations
        ConvergenceError: If node doubling fails
    """
    zeta = complex(zeta)
    cfg = cfg or cauchy_config(zeta, p, nodes)
    validate_config(cfg, p)
    normaliser = qpoch_inf(zeta, float(p.q))

    def evaluate(c: KernelConfig) -> complex:
        return fredholm_det(cauchy_kernel_matrix(c, n, t, p)) / normaliser

    return _refine(evaluate, cfg, tol)


# --- moment series ------------------------------------------------------------


def laplace_series_oracle(zeta: complex, n: int, t: int, sched: ParamSchedule,
                          k_max: int = 40, tol: float = 1e-12) -> complex:
    """
    sum_k mu_k zeta^k / (q;q)_k = sum_k mu_k (zeta / (1-q))^k / k_q!, with
    mu_k = E[q^{k (x_n(t) + n)}] from the duality oracle in float arithmetic.

    Summation stops once two consecutive terms fall below tol.

    Raises:
        TruncationError: If the last term at k_max is still above tol
    """
    zeta = complex(zeta)
    if zeta == 0:
        return 1.0 + 0j
    float_sched = _float_schedule(sched)
    q = float(sched.q)
    scaled = zeta / (1 - q)
    total = 0j
    small_terms = 0
    term = 1.0 + 0j
    for k in range(k_max + 1):
        moment = float(qmoment_oracle((n,) * k, t, float_sched))
        term = moment * scaled**k / qfactorial(k, q)
        total += term
        small_terms = small_terms + 1 if abs(term) < tol else 0
        if small_terms >= 2:
            return total
    if abs(term) > tol:
        raise TruncationError(f"laplace series term {abs(term):.3e} above {tol:.1e} at k={k_max}")
    return total


def _float_schedule(sched: ParamSchedule) -> ParamSchedule:
    return ParamSchedule(
        sched.base.as_float(),
        None if sched.a is None else tuple(float(a) for a in sched.a),
        None if sched.mu_schedule is None else tuple(float(m) for m in sched.mu_schedule),
    )


# --- inversion ----------------------------------------------------------------


@dataclass
class InversionResult:
    """Recovered pmf of x_n(t) + n on {0, ..., S}."""

    pmf: List[Any]
    support_cap: int
    min_probability: float
    mass_defect: float
    neglected_mass: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pmf": [float(value) for value in self.pmf],
            "support_cap": self.support_cap,
            "min_probability": self.min_probability,
            "mass_defect": self.mass_defect,
            "neglected_mass": self.neglected_mass,
        }


def leading_displacement_pmf(t: int, sched: ParamSchedule) -> np.ndarray:
    """
    Law of x_1(t) + 1 under step data: the convolution of the t free jumps
    of the first particle, each phi(.|infinity) with parameter a_1 mu_s.
    """
    pmf = np.array([1.0])
    for step in range(t):
        jump, _ = phi_row_infinite(sched.params_at(1, step).as_float(), mass_defect=1e-14)
        pmf = np.convolve(pmf, jump)
    return pmf


def support_cap_for(t: int, sched: ParamSchedule, tail: float = INVERSION_TAIL) -> Tuple[int, float]:
    """
    Smallest S with P(x_1(t) + 1 > S) < tail, and that tail.

    Since x_n + n <= x_1 + 1, the same S bounds x_n(t) + n for every n.
    """
    pmf = leading_displacement_pmf(t, sched)
    tails = 1 - np.cumsum(pmf)
    for s, remaining in enumerate(tails):
        if remaining < tail:
            return min(s, MAX_INVERSION_SUPPORT), max(float(remaining), 0.0)
    logger.warning(f"Support tail stays above {tail:.1e}; capping at {MAX_INVERSION_SUPPORT}")
    return MAX_INVERSION_SUPPORT, float(tails[min(MAX_INVERSION_SUPPORT, len(tails) - 1)])


def _qq_to_fraction(value: Any) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


def invert_distribution(n: int, t: int, sched: ParamSchedule,
                        support_cap: Optional[int] = None, exact: bool = True) -> InversionResult:
    """
    Recovers P(x_n(t) + n = s), s = 0..S, from the q-moments.

    Solves mu_k = sum_{s<=S} q^{ks} P(s), k = 0..S, a Vandermonde system in
    the nodes q^s, over QQ in exact mode and by least squares otherwise.

    Args:
        n: Particle index
        t: Horizon
        sched: Parameters; rational for exact mode
        support_cap: S; certified from the first particle's law when omitted
        exact: Solve in rational arithmetic

    Raises:
        DomainError: If q = 0 or exact mode gets float parameters
        IllConditionedError: If the float system is too ill-conditioned
    """
    if sched.q == 0:
        raise DomainError("moment inversion needs q > 0")
    if exact and not sched.exact:
        raise DomainError("exact inversion needs rational parameters")

    neglected = 0.0
    if support_cap is None:
        support_cap, neglected = support_cap_for(t, sched)
    size = support_cap + 1
    q = sched.q if exact else float(sched.q)

    moments = [qmoment_oracle((n,) * k, t, sched) for k in range(size)]
    logger.debug(f"Inverting {size} moments for n={n}, t={t}")

    if exact:
        vandermonde = DomainMatrix(
            [[QQ(*_ratio(q ** (k * s))) for s in range(size)] for k in range(size)],
            (size, size),
            QQ,
        )
        rhs = DomainMatrix([[QQ(*_ratio(moment))] for moment in moments], (size, 1), QQ)
        solution = vandermonde.lu_solve(rhs)
        pmf: List[Any] = [_qq_to_fraction(solution[s, 0].element) for s in range(size)]
    else:
        nodes = float(q) ** np.arange(size)
        matrix = nodes[None, :] ** np.arange(size)[:, None]
        condition = np.linalg.cond(matrix)
        if condition > 1e12:
            raise IllConditionedError(f"Vandermonde condition number {condition:.2e}")
        pmf = list(np.linalg.lstsq(matrix, np.asarray(moments, dtype=float), rcond=None)[0])

    total = sum(pmf)
    return InversionResult(
        pmf=pmf,
        support_cap=support_cap,
        min_probability=float(min(pmf)),
        mass_defect=float(1 - total),
        neglected_mass=neglected,
    )


def _ratio(value: Any) -> Tuple[int, int]:
    value = Fraction(value)
    return value.numerator, value.denominator


# --- continuous-time degeneration ---------------------------------------------


@dataclass
class DegenerationReport:
    """Residual sequences of the small-eps limit checks."""

    eps: List[float]
    g_residuals: List[float]
    rate_residuals: Dict[int, List[float]]

    def decrease_factors(self, residuals: Sequence[float]) -> List[float]:
        return [
            a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "g_residuals": self.g_residuals,
            "g_factors": self.decrease_factors(self.g_residuals),
            "rate_residuals": self.rate_residuals,
            "rate_factors": {
                j: self.decrease_factors(values) for j, values in self.rate_residuals.items()
            },
        }


def mhadp_params(q: float, eps: float) -> ModelParams:
    """mu = q and nu = (q - eps)/(1 - eps)."""
    return ModelParams(q, q, (q - eps) / (1 - eps))


def mhadp_g_limit(w: complex, n: int, tau: float, q: float) -> complex:
    """
    (1/(1-w))^n exp(-tau (1-q) sum_i q^i w / (1 - q^{i+1} w)) / (qw; q)_inf.
    """
    total = 0j
    i = 0
    while True:
        term = q**i * w / (1 - q ** (i + 1) * w)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) or i > 10_000:
            break
        i += 1
    return (1 / (1 - w)) ** n * cmath.exp(-tau * (1 - q) * total) / qpoch_inf(q * w, q)


def mhadp_g_limit_check(w: complex, n: int, tau: float, q: float, eps_list: Sequence[float],
                        m: int = 6, j_max: int = 3) -> DegenerationReport:
    """
    Residuals of the MHADP degeneration for each eps.

    Under mu = q, nu = (q - eps)/(1 - eps) and t = round(tau / eps):
      - |g(w) - limit| with the limit at tau_eff = t * eps;
      - |phi(j|m)/eps - 1/[j]_{q^{-1}}| for j = 1..j_max.
    Both sequences shrink linearly in eps.
    """
    w = complex(w)
    g_residuals: List[float] = []
    rate_residuals: Dict[int, List[float]] = {j: [] for j in range(1, j_max + 1)}
    for eps in eps_list:
        params = mhadp_params(q, eps)
        t = max(1, round(tau / eps))
        finite = complex(g_eval(w, n, t, params))
        limit = mhadp_g_limit(w, n, t * eps, q)
        g_residuals.append(abs(finite - limit))
        for j in rate_residuals:
            rate = phi_pmf(j, m, params) / eps
            rate_residuals[j].append(abs(rate - 1 / q_number(j, 1 / q)))
    return DegenerationReport(list(eps_list), g_residuals, rate_residuals)
