"""
Simulators for the (q, mu, nu)-Boson process and the (q, mu, nu)-TASEP.

States are integer numpy arrays. The single-state steps (boson_step,
tasep_step, ring_boson_step) and the ensemble steps share one vectorised
sampler; ensembles are shaped (replicas, sites) and are what the Monte
Carlo engine drives.

Conventions:
  - occupation y has length N + 1 and is indexed by site 0..N;
  - particle positions x have length N and x[n-1] is particle n;
  - the step from time t to t + 1 uses mu_{t+1}, i.e. mu_schedule[t].
"""

import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .qdist import INF_SUPPORT, ModelParams, get_sampler
from .qseries import CompensatedSum, qpoch_inf, qpoch_inf_log, qpoch_log
from .utils.constants import SAMPLER_MAX_SUPPORT
from .utils.exceptions import DomainError, ScheduleError, TailBoundError
from .utils.rng import RngStream

logger = getLogger(__name__)

PROCESSES = ("tasep", "boson", "ring")


@dataclass(frozen=True)
class ParamSchedule:
    """
    Model parameters with site weights a_i and time weights mu_t.

    Args:
        base: The scalars q, mu, nu; base.mu is used when no mu_schedule is given
        a: Site/particle weights a_1, a_2, ...; all 1 when omitted
        mu_schedule: mu_1, mu_2, ...; mu_schedule[t] drives the step t -> t+1
    """

    base: ModelParams
    a: Optional[Tuple[Any, ...]] = None
    mu_schedule: Optional[Tuple[Any, ...]] = None

    def __post_init__(self):
        if self.a is not None:
            object.__setattr__(self, "a", tuple(self.a))
            if any(weight <= 0 for weight in self.a):
                raise ScheduleError("site weights a_i must be positive")
        if self.mu_schedule is not None:
            object.__setattr__(self, "mu_schedule", tuple(self.mu_schedule))

    @property
    def q(self) -> Any:
        return self.base.q

    @property
    def nu(self) -> Any:
        return self.base.nu

    @property
    def exact(self) -> bool:
        return self.base.exact

    @property
    def homogeneous_sites(self) -> bool:
        return self.a is None or all(weight == 1 for weight in self.a)

    def mu_at(self, t: int) -> Any:
        """mu_{t+1}, the parameter of the step t -> t+1."""
        if self.mu_schedule is None:
            return self.base.mu
        if t >= len(self.mu_schedule):
            raise ScheduleError(f"mu_schedule has {len(self.mu_schedule)} entries, step {t} requested")
        return self.mu_schedule[t]

    def a_at(self, i: int) -> Any:
        """a_i for site or particle i >= 1."""
        if self.a is None:
            return 1
        if i > len(self.a):
            raise ScheduleError(f"a has {len(self.a)} entries, index {i} requested")
        return self.a[i - 1]

    def effective_mu(self, i: int, t: int) -> Any:
        """a_i mu_{t+1}, checked against [nu, 1)."""
        value = self.a_at(i) * self.mu_at(t)
        if not self.nu <= value < 1:
            raise ScheduleError(
                f"a_{i} * mu_{t + 1} = {value} leaves [nu, 1) with nu = {self.nu}"
            )
        return value

    def params_at(self, i: int, t: int) -> ModelParams:
        return self.base.with_mu(self.effective_mu(i, t))

    def effective_mus(self, count: int, t: int) -> np.ndarray:
        """Float array (a_1 mu_{t+1}, ..., a_count mu_{t+1})."""
        return np.array([float(self.effective_mu(i, t)) for i in range(1, count + 1)])

    def validate(self, count: int, horizon: int) -> None:
        """Checks every a_i mu_t used by a run on `count` sites over `horizon` steps."""
        for t in range(horizon):
            for i in range(1, count + 1):
                self.effective_mu(i, t)

    @classmethod
    def constant(cls, p: ModelParams) -> "ParamSchedule":
        return cls(base=p)


def step_initial_data(n_particles: int) -> np.ndarray:
    """Step initial data x_n = -n."""
    return -np.arange(1, n_particles + 1, dtype=np.int64)


def _sampler(sched: ParamSchedule):
    return get_sampler(float(sched.q), float(sched.nu))


# --- Boson process ------------------------------------------------------------


def boson_ensemble_step(y: np.ndarray, sched: ParamSchedule, t: int, u: np.ndarray) -> np.ndarray:
    """
    One parallel step for an ensemble of occupations, shape (replicas, N + 1).

    Site i in 1..N sends s_i ~ phi_{q, a_i mu_{t+1}, nu}(.|y_i) particles to
    site i - 1; all draws use the time-t state. u holds uniforms of shape
    (replicas, N).
    """
    n_sites = y.shape[1] - 1
    mus = sched.effective_mus(n_sites, t)
    sent = _sampler(sched).draw(y[:, 1:], mus, u)
    new_y = y.copy()
    new_y[:, 1:] -= sent
    new_y[:, :-1] += sent
    return new_y


def boson_step(y: Sequence[int], sched: ParamSchedule, t: int, stream: RngStream) -> np.ndarray:
    """
    One step of the N-site Boson process on the line.

    Site 0 only receives and site N only sends. The total count is conserved.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or (y < 0).any():
        raise DomainError(f"occupation must be a nonnegative vector, got {y}")
    u = stream.uniform((1, len(y) - 1))
    new_y = boson_ensemble_step(y[None, :], sched, t, u)[0]
    assert new_y.sum() == y.sum()
    return new_y


# --- TASEP --------------------------------------------------------------------


def tasep_gap_supports(x: np.ndarray) -> np.ndarray:
    """Jump supports x_{n-1} - x_n - 1, with INF_SUPPORT for the first particle."""
    supports = np.empty_like(x)
    supports[..., 0] = INF_SUPPORT
    supports[..., 1:] = x[..., :-1] - x[..., 1:] - 1
    return supports


def tasep_ensemble_step_with_draws(
    x: np.ndarray, sched: ParamSchedule, t: int, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One parallel step for an ensemble of TASEP states, shape (replicas, N).

    Particle n jumps j_n ~ phi_{q, a_n mu_{t+1}, nu}(.|x_{n-1} - x_n - 1), the
    first particle with infinite support. Returns (new states, jumps).
    """
    n_particles = x.shape[1]
    mus = sched.effective_mus(n_particles, t)
    jumps = _sampler(sched).draw(tasep_gap_supports(x), mus, u)
    return x + jumps, jumps


def tasep_ensemble_step(x: np.ndarray, sched: ParamSchedule, t: int, u: np.ndarray) -> np.ndarray:
    return tasep_ensemble_step_with_draws(x, sched, t, u)[0]


def _check_particles(x: np.ndarray) -> None:
    if x.ndim != 1 or (np.diff(x) >= 0).any():
        raise DomainError(f"particle positions must be strictly decreasing, got {x}")


def tasep_step_with_draws(
    x: Sequence[int], sched: ParamSchedule, t: int, stream: RngStream
) -> Tuple[np.ndarray, np.ndarray]:
    """tasep_step that also returns the jumps j_1..j_N."""
    x = np.asarray(x, dtype=np.int64)
    _check_particles(x)
    u = stream.uniform((1, len(x)))
    new_x, jumps = tasep_ensemble_step_with_draws(x[None, :], sched, t, u)
    _check_particles(new_x[0])
    return new_x[0], jumps[0]


def tasep_step(x: Sequence[int], sched: ParamSchedule, t: int, stream: RngStream) -> np.ndarray:
    """One step of the N-particle TASEP; order is preserved by the support restriction."""
    return tasep_step_with_draws(x, sched, t, stream)[0]


def gaps(x: Sequence[int]) -> np.ndarray:
    """
    Gap vector g_i = x_{i-1} - x_i, with g_1 = inf for the virtual particle at +infinity.

    Examples:
        >>> gaps([-1, -2, -3]).tolist()
        [inf, 1.0, 1.0]
    """
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    g[0] = math.inf
    g[1:] = x[:-1] - x[1:]
    return g


def rightward_boson_update(g: np.ndarray, jumps: Sequence[int]) -> np.ndarray:
    """
    Gap dynamics induced by TASEP jumps: g_i -> g_i + j_{i-1} - j_i for i >= 2.

    Read as free spaces e_i = g_i - 1, this is a Boson process moving
    particles to the right.
    """
    jumps = np.asarray(jumps)
    new_g = np.array(g, dtype=float)
    new_g[1:] += jumps[:-1] - jumps[1:]
    return new_g


def current_count(x: Sequence[int], s: int) -> int:
    """
    C_s = #{n : x_n + n >= s}.

    Since x_n + n is nonincreasing in n, {x_n + n >= s} = {C_s >= n}.
    For step initial data C_0 = N and C_1 = 0.
    """
    x = np.asarray(x, dtype=np.int64)
    shifted = x + np.arange(1, len(x) + 1)
    return int(np.count_nonzero(shifted >= s))


# --- ring ---------------------------------------------------------------------


def ring_ensemble_step(y: np.ndarray, p: ModelParams, u: np.ndarray) -> np.ndarray:
    """Parallel cyclic step: every site i sends s_i ~ phi(.|y_i) to site i - 1 mod L."""
    sent = get_sampler(float(p.q), float(p.nu)).draw(y, float(p.mu), u)
    return y - sent + np.roll(sent, -1, axis=-1)


def ring_boson_step(y: Sequence[int], p: ModelParams, stream: RngStream) -> np.ndarray:
    """One step of the Boson process on a ring of L >= 2 sites."""
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or len(y) < 2:
        raise DomainError(f"ring needs at least 2 sites, got {len(y)}")
    new_y = ring_ensemble_step(y[None, :], p, stream.uniform((1, len(y))))[0]
    assert new_y.sum() == y.sum()
    return new_y


def _stationary_log(rho: float, n: int, p: ModelParams) -> float:
    q, nu = float(p.q), float(p.nu)
    if rho == 0:
        return 0.0 if n == 0 else -math.inf
    return (
        n * math.log(rho)
        + qpoch_log(nu, q, n)[0]
        - qpoch_log(q, q, n)[0]
        + qpoch_inf_log(rho, q)
        - qpoch_inf_log(rho * nu, q)
    )


def stationary_pmf(rho: float, n: int, p: ModelParams) -> float:
    """
    One-site marginal of the product measure on the ring.

    rho^n (nu;q)_n / (q;q)_n * (rho;q)_inf / (rho nu;q)_inf, evaluated in log space.
    """
    if not 0 <= rho < 1:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    return math.exp(_stationary_log(rho, n, p))


def stationary_pmf_row(rho: float, p: ModelParams, tail: float = 1e-15,
                       mass_defect: float = 1e-10,
                       max_support: int = SAMPLER_MAX_SUPPORT) -> np.ndarray:
    """
    stationary_pmf(rho, n) for n = 0, 1, ... until the certified remaining mass is below tail.

    Past n the term ratio is at most r = rho / (1 - q^{n+1}), so once r < 1
    the rest of the row sums to at most t_n r / (1 - r).

    Raises:
        TailBoundError: If max_support terms are not enough, or the row sums
            to less than 1 - mass_defect
    """
    if not 0 <= rho < 1:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    q, nu = float(p.q), float(p.nu)
    log_first = _stationary_log(rho, 0, p)
    offset = CompensatedSum()
    values = [math.exp(log_first)]
    n = 0
    while rho > 0:
        ratio_bound = rho / (1 - q ** (n + 1))
        if ratio_bound < 1 and values[-1] * ratio_bound / (1 - ratio_bound) < tail:
            break
        if n + 1 >= max_support:
            raise TailBoundError(f"stationary pmf needs more than {max_support} terms at rho={rho}")
        offset.add(math.log(rho) + math.log1p(-nu * q**n) - math.log1p(-(q ** (n + 1))))
        values.append(math.exp(log_first + offset.value))
        n += 1

    row = np.asarray(values)
    mass = float(row.sum())
    if mass < 1 - mass_defect:
        raise TailBoundError(f"stationary pmf row sums to {mass:.15f} at rho={rho}, q={q}")
    return row


# --- Monte Carlo --------------------------------------------------------------


@dataclass
class MCResult:
    """Mean and standard error over independent replicas, elementwise."""

    mean: Any
    stderr: Any
    replicas: int
    blocks: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "blocks": self.blocks,
        }


@dataclass
class EnsembleSpec:
    """What to simulate: a process, its initial state and a horizon."""

    process: str
    initial: np.ndarray
    horizon: int
    record_trajectory: bool = False

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise DomainError(f"unknown process '{self.process}'")
        self.initial = np.asarray(self.initial, dtype=np.int64)
        if self.process != "tasep" and (self.initial < 0).any():
            raise DomainError(f"occupation must be nonnegative, got {self.initial}")
        if self.process == "ring" and len(self.initial) < 2:
            raise DomainError(f"ring needs at least 2 sites, got {len(self.initial)}")

    @property
    def sites(self) -> int:
        """Sites carrying a weight a_i: every ring site, Boson sites 1..N, TASEP particles."""
        return len(self.initial) - (1 if self.process == "boson" else 0)


def simulate_ensemble(
    spec: EnsembleSpec, sched: ParamSchedule, replicas: int, stream: RngStream
) -> List[np.ndarray]:
    """
    Runs `replicas` independent copies and returns the states at every recorded time.

    Only the final state is kept unless spec.record_trajectory is set.
    """
    state = np.broadcast_to(spec.initial, (replicas, len(spec.initial))).copy()
    trajectory = [state] if spec.record_trajectory else []
    for t in range(spec.horizon):
        if spec.process == "tasep":
            state = tasep_ensemble_step(state, sched, t, stream.uniform(state.shape))
        elif spec.process == "ring":
            state = ring_ensemble_step(state, sched.params_at(1, t), stream.uniform(state.shape))
        else:
            u = stream.uniform((replicas, state.shape[1] - 1))
            state = boson_ensemble_step(state, sched, t, u)
        if spec.record_trajectory:
            trajectory.append(state)
    return trajectory if spec.record_trajectory else [state]


def _block_moments(values: np.ndarray) -> Tuple[int, Any, Any]:
    values = np.asarray(values)
    count = values.shape[0]
    mean = values.mean(axis=0)
    m2 = (np.abs(values - mean) ** 2).sum(axis=0)
    return count, mean, m2


def _combine(acc: Tuple[int, Any, Any], block: Tuple[int, Any, Any]) -> Tuple[int, Any, Any]:
    n_a, mean_a, m2_a = acc
    n_b, mean_b, m2_b = block
    if n_a == 0:
        return block
    total = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / total)
    m2 = m2_a + m2_b + np.abs(delta) ** 2 * (n_a * n_b / total)
    return total, mean, m2


def mc_estimate(
    observable: Callable[[Any], np.ndarray],
    t: int,
    sched: ParamSchedule,
    replicas: int,
    master_seed: int,
    initial: Optional[np.ndarray] = None,
    n_particles: int = 1,
    process: str = "tasep",
    record_trajectory: bool = False,
    block_size: int = 10_000,
    max_workers: int = 1,
    progress: bool = False,
) -> MCResult:
    """
    Monte Carlo estimate of E[observable] at horizon t.

    Replicas are split into fixed-size blocks; block b draws from
    RngStream(master_seed, b) and blocks are reduced in index order, so the
    result is bitwise reproducible for any worker count.

    Args:
        observable: Maps a (replicas, sites) state array, or the list of such
            arrays when record_trajectory is set, to per-replica values of
            shape (replicas,) or (replicas, K); complex values are allowed
        t: Horizon
        sched: Parameter schedule
        replicas: Number of replicas, at least 2
        master_seed: Seed shared by all blocks
        initial: Initial state; TASEP step initial data when omitted
        n_particles: Particle count for the default TASEP initial state
        process: "tasep", "boson" or "ring"
        record_trajectory: Pass all recorded states to the observable
        block_size: Replicas per RNG block
        max_workers: Worker threads
        progress: Show a tqdm progress bar

    Returns:
        An MCResult with mean and standard error of the mean
    """
    if replicas < 2:
        raise DomainError(f"replicas must be at least 2, got {replicas}")
    if initial is None:
        if process != "tasep":
            raise DomainError(f"a {process} run needs an explicit initial occupation")
        initial = step_initial_data(n_particles)
    spec = EnsembleSpec(process, initial, t, record_trajectory)
    if process == "ring" and not sched.homogeneous_sites:
        raise ScheduleError("the ring runs with equal site weights a_i = 1")
    sched.validate(spec.sites, t)

    n_blocks = math.ceil(replicas / block_size)
    sizes = [min(block_size, replicas - b * block_size) for b in range(n_blocks)]

    def run_block(block_id: int) -> Tuple[int, Any, Any]:
        stream = RngStream(master_seed, block_id)
        states = simulate_ensemble(spec, sched, sizes[block_id], stream)
        values = observable(states if record_trajectory else states[-1])
        return _block_moments(values)

    results: Dict[int, Tuple[int, Any, Any]] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_map = {executor.submit(run_block, b): b for b in range(n_blocks)}
        for future in tqdm(
            as_completed(future_map),
            total=n_blocks,
            desc="Simulating blocks",
            disable=not progress,
        ):
            results[future_map[future]] = future.result()

    acc: Tuple[int, Any, Any] = (0, 0.0, 0.0)
    for block_id in range(n_blocks):
        acc = _combine(acc, results[block_id])
    count, mean, m2 = acc
    stderr = np.sqrt(m2 / (count - 1) / count)

    logger.debug(f"MC estimate over {count} replicas in {n_blocks} block(s)")
    if np.ndim(mean) == 0:
        mean, stderr = mean.item() if hasattr(mean, "item") else mean, float(stderr)
    return MCResult(mean=mean, stderr=stderr, replicas=count, blocks=n_blocks)


# --- observables --------------------------------------------------------------


def q_moment_observable(nvec: Sequence[int], q: float) -> Callable[[np.ndarray], np.ndarray]:
    """prod_i q^{x_{n_i} + n_i} on TASEP states; n_i = 0 refers to x_0 = +inf and gives 0."""
    nvec = list(nvec)
    q = float(q)

    def observable(x: np.ndarray) -> np.ndarray:
        exponent = np.zeros(x.shape[0])
        for n in nvec:
            if n == 0:
                return np.zeros(x.shape[0])
            exponent += x[:, n - 1] + n
        return q**exponent

    return observable


def eq_laplace_observable(n: int, zeta: complex, q: float) -> Callable[[np.ndarray], np.ndarray]:
    """1 / (zeta q^{x_n + n}; q)_inf on TASEP states."""
    q = float(q)

    def observable(x: np.ndarray) -> np.ndarray:
        return 1.0 / qpoch_inf(zeta * q ** (x[:, n - 1] + n).astype(float), q)

    return observable


def position_observable(n: int) -> Callable[[np.ndarray], np.ndarray]:
    """x_n(t) on TASEP states."""

    def observable(x: np.ndarray) -> np.ndarray:
        return x[:, n - 1].astype(float)

    return observable


def histogram_observable(n: int, support: int) -> Callable[[np.ndarray], np.ndarray]:
    """One-hot indicators of x_n + n = s for s = 0..support; larger values fall in no bin."""
    columns = np.arange(support + 1)

    def observable(x: np.ndarray) -> np.ndarray:
        shifted = x[:, n - 1] + n
        return (shifted[:, None] == columns[None, :]).astype(float)

    return observable


def current_observable(s: int) -> Callable[[np.ndarray], np.ndarray]:
    """C_s on TASEP states."""

    def observable(x: np.ndarray) -> np.ndarray:
        shifted = x + np.arange(1, x.shape[1] + 1)
        return (shifted >= s).sum(axis=1).astype(float)

    return observable


def occupation_observable() -> Callable[[np.ndarray], np.ndarray]:
    """The occupation vector itself, for Boson runs."""

    def observable(y: np.ndarray) -> np.ndarray:
        return y.astype(float)

    return observable


# --- stationarity experiment --------------------------------------------------


@dataclass
class StationarityReport:
    """Per-bin comparison of the one-site marginal with the product-measure pmf."""

    bins: List[int]
    expected: List[float]
    empirical: List[float]
    stderr: List[float]
    z_scores: List[float]
    replicas: int
    steps: int
    within_3_sigma: bool = field(default=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bins": self.bins,
            "expected": self.expected,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "z_scores": self.z_scores,
            "replicas": self.replicas,
            "steps": self.steps,
            "within_3_sigma": self.within_3_sigma,
        }


def stationarity_experiment(
    L: int,
    rho: float,
    T: int,
    replicas: int,
    p: ModelParams,
    master_seed: int,
    block_size: int = 10_000,
    max_workers: int = 1,
    min_bin_mass: float = 1e-4,
) -> StationarityReport:
    """
    Starts the ring from i.i.d. product-measure marginals and compares the
    site-0 marginal after T steps with the initial pmf.

    Bins with expected mass below min_bin_mass are merged into one tail bin.
    """
    if L < 2:
        raise DomainError(f"ring needs at least 2 sites, got {L}")
    pmf = stationary_pmf_row(rho, p)
    cdf = np.cumsum(pmf)
    n_bins = max(1, int(np.count_nonzero(pmf >= min_bin_mass)))
    expected = np.append(pmf[:n_bins], max(0.0, 1.0 - pmf[:n_bins].sum()))

    n_blocks = math.ceil(replicas / block_size)
    sizes = [min(block_size, replicas - b * block_size) for b in range(n_blocks)]

    def run_block(block_id: int) -> np.ndarray:
        stream = RngStream(master_seed, block_id)
        size = sizes[block_id]
        y = np.minimum(np.searchsorted(cdf, stream.uniform((size, L)), side="right"), len(pmf) - 1)
        for _ in range(T):
            y = ring_ensemble_step(y, p, stream.uniform((size, L)))
        site = np.minimum(y[:, 0], n_bins)
        return np.bincount(site, minlength=n_bins + 1)

    counts: Dict[int, np.ndarray] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_map = {executor.submit(run_block, b): b for b in range(n_blocks)}
        for future in tqdm(as_completed(future_map), total=n_blocks, desc="Ring blocks"):
            counts[future_map[future]] = future.result()

    total = sum(counts[b] for b in range(n_blocks))
    empirical = total / replicas
    stderr = np.sqrt(np.maximum(expected * (1 - expected), 1e-300) / replicas)
    z_scores = (empirical - expected) / stderr
    within = bool(np.all(np.abs(z_scores) <= 3))
    if not within:
        logger.warning(
            f"Ring stationarity experiment: max |z| = {np.max(np.abs(z_scores)):.2f} exceeds 3"
        )
    return StationarityReport(
        bins=list(range(n_bins + 1)),
        expected=expected.tolist(),
        empirical=empirical.tolist(),
        stderr=stderr.tolist(),
        z_scores=z_scores.tolist(),
        replicas=replicas,
        steps=T,
        within_3_sigma=within,
    )
