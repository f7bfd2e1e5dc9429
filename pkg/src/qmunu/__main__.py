"""
qmunu Main Entry Point

Command-line surface for the (q, mu, nu)-Boson process and (q, mu, nu)-TASEP:
verification suites, simulation, exact and contour moments, Fredholm
determinants, distribution recovery and the ring stationarity experiment.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qmunu.chains import (
    PROCESSES,
    ParamSchedule,
    current_observable,
    eq_laplace_observable,
    histogram_observable,
    mc_estimate,
    occupation_observable,
    position_observable,
    q_moment_observable,
    stationarity_experiment,
)
from qmunu.contour import ObservableSpec, contours_from_radii, qmoment_contour
from qmunu.exact import moment_table, qmoment_oracle
from qmunu.fredholm import det_cauchy, det_mb, invert_distribution
from qmunu.qdist import ModelParams
from qmunu.suites import DEFAULT_SUITES, SUITES
from qmunu.utils import (
    EXIT_INTERRUPTED,
    EXIT_PASS,
    EXIT_TOLERANCE_FAILURE,
    EXIT_USAGE_ERROR,
    ConfigError,
    ConfigurationError,
    ContourInfeasible,
    DomainError,
    QmunuError,
    RangeError,
    RunConfig,
    ScheduleError,
    apply_overrides,
    load_config,
    parse_int_list,
    parse_number,
    parse_number_list,
    write_csv_file,
    write_json_file,
)
from qmunu.utils.plotting import plot_pmf_comparison, plot_series

logger = logging.getLogger(__name__)

# Errors caused by the requested inputs rather than by the computation
USAGE_ERRORS = (
    ConfigurationError,
    DomainError,
    RangeError,
    ScheduleError,
    ContourInfeasible,
    ConfigError,
    ValueError,
)

Outcome = Tuple[Dict[str, Any], List[str], List[List[Any]], bool]


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    model = common.add_argument_group("model")
    model.add_argument("--q", help="Nome q in [0, 1); fractions like 1/3 are accepted.")
    model.add_argument("--mu", help="Parameter mu with nu <= mu < 1.")
    model.add_argument("--nu", help="Parameter nu in [0, mu].")
    model.add_argument("--a", help="Comma separated site weights a_1, a_2, ...")
    model.add_argument("--mu-schedule", help="Comma separated mu_1, ..., mu_t.")
    model.add_argument("--exact", action="store_true", help="Use rational arithmetic.")

    run = common.add_argument_group("run")
    run.add_argument("--n", type=int, default=1, help="Particle index or particle count.")
    run.add_argument("--k", type=int, default=1, help="Number of moment variables.")
    run.add_argument("--t", type=int, default=1, help="Horizon (number of steps).")
    run.add_argument("--seed", type=int, help="Master seed.")
    run.add_argument("--replicas", type=int, help="Monte Carlo replicas.")
    run.add_argument("--tol", type=float, help="Target tolerance.")
    run.add_argument("--threads", type=int, help="Worker pool size; the CPU count by default.")

    output = common.add_argument_group("output")
    output.add_argument("--format", choices=("csv", "json"), help="Report format.")
    output.add_argument("--out", help="Output directory.")
    output.add_argument("--plot", help="Write an SVG figure to this path.")
    output.add_argument("--config", help="Path to a config.json file.")
    output.add_argument("--verbose", action="store_true", help="Debug logging.")
    return common


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parses command-line arguments.

    Returns:
        Parsed command-line arguments
    """
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="qmunu",
        description="qmunu - exact, contour, Fredholm and Monte Carlo tools for (q, mu, nu)-TASEP",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run every default verification suite
  qmunu verify all --q 0.4 --mu 0.5 --nu 0.1

  # q-moment E[q^{x_2(3)+2} q^{x_1(3)+1}] from the contour formula
  qmunu moments --n-vec 2,1 --t 3

  # The same moment in rational arithmetic from the duality oracle
  qmunu exact --n-vec 2,1 --t 3 --q 1/2 --mu 2/5 --nu 1/10 --exact

  # Mellin-Barnes Fredholm determinant
  qmunu fredholm --type mb --zeta-re -0.2 --n 2 --t 2

  # Law of x_2(3) + 2 recovered from its moments
  qmunu invert --n 2 --t 3 --q 1/2 --mu 2/5 --nu 1/10 --exact
        """,
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    verify = subparsers.add_parser("verify", parents=[common], help="Run verification suites.")
    verify.add_argument("suite", choices=sorted(SUITES) + ["all"])

    simulate = subparsers.add_parser("simulate", parents=[common], help="Monte Carlo estimate.")
    simulate.add_argument("--process", choices=PROCESSES, default="tasep")
    simulate.add_argument(
        "--observable",
        choices=("position", "qmoment", "laplace", "current", "histogram", "occupation"),
        default="position",
    )
    simulate.add_argument("--n-vec", help="Indices for the q-moment observable.")
    simulate.add_argument("--initial", help="Boson occupation y_0, ..., y_N, or the ring occupation.")
    simulate.add_argument("--site", type=int, default=0, help="s for the current observable.")
    simulate.add_argument("--support", type=int, default=20, help="Histogram support.")
    simulate.add_argument("--zeta-re", type=float, default=-0.2)
    simulate.add_argument("--zeta-im", type=float, default=0.0)

    exact = subparsers.add_parser("exact", parents=[common], help="Duality oracle moments.")
    exact.add_argument("--n-vec", help="Weakly decreasing indices; all of length k when omitted.")

    moments = subparsers.add_parser("moments", parents=[common], help="Contour formula moments.")
    moments.add_argument("--n-vec", required=True, help="Weakly decreasing indices.")
    moments.add_argument("--radii", help="Comma separated circle radii around 1.")

    fredholm = subparsers.add_parser("fredholm", parents=[common], help="Fredholm determinants.")
    fredholm.add_argument("--type", choices=("mb", "cauchy"), default="mb")
    fredholm.add_argument("--zeta-re", type=float, default=-0.2)
    fredholm.add_argument("--zeta-im", type=float, default=0.0)

    invert = subparsers.add_parser("invert", parents=[common], help="Recover the law of x_n(t)+n.")
    invert.add_argument("--support-cap", type=int, help="Largest value S of the support.")

    stationarity = subparsers.add_parser(
        "stationarity", parents=[common], help="Ring stationarity experiment."
    )
    stationarity.add_argument("--sites", type=int, default=8, help="Ring size L.")
    stationarity.add_argument("--rho", type=float, default=0.5, help="Product-measure parameter.")

    return parser.parse_args(argv)


# --- settings -----------------------------------------------------------------


def parse_flag(flag: str, parse: Callable[..., Any], text: Optional[str], *args: Any) -> Any:
    """Parses one flag's text and names the flag when it does not parse."""
    try:
        return parse(text, *args)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigurationError(f"{flag}: cannot parse '{text}' ({e})") from e


def resolve_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Loads the config file and applies command-line overrides."""
    config = load_config(Path(args.config) if args.config else None)
    overrides = {
        "q": args.q,
        "mu": args.mu,
        "nu": args.nu,
        "seed": args.seed,
        "replicas": args.replicas,
        "tol": args.tol,
        "max_workers": args.threads,
        "output_format": args.format,
        "output_dir": args.out,
    }
    for key in ("q", "mu", "nu"):
        if overrides[key] is not None:
            overrides[key] = float(parse_flag(f"--{key}", parse_number, overrides[key]))
    return apply_overrides(config, overrides)


def build_schedule(args: argparse.Namespace, settings: Dict[str, Any],
                   exact: Optional[bool] = None) -> ParamSchedule:
    """ModelParams and the optional a_i / mu_t schedules, rational under --exact."""
    exact = args.exact if exact is None else exact

    def scalar(key: str) -> Any:
        raw = getattr(args, key)
        return parse_flag(f"--{key}", parse_number, raw if raw is not None else str(settings[key]), exact)

    base = ModelParams(scalar("q"), scalar("mu"), scalar("nu"))
    weights = parse_flag("--a", parse_number_list, args.a, exact)
    mus = parse_flag("--mu-schedule", parse_number_list, args.mu_schedule, exact)
    return ParamSchedule(
        base,
        tuple(weights) if weights else None,
        tuple(mus) if mus else None,
    )


def run_config(args: argparse.Namespace, settings: Dict[str, Any]) -> RunConfig:
    skipped = {"subcommand", "config", "verbose", "plot", "out", "format", "threads"}
    arguments = {key: value for key, value in sorted(vars(args).items()) if key not in skipped}
    return RunConfig(args.subcommand, {"settings": settings, "arguments": arguments})


# --- subcommands --------------------------------------------------------------


def run_verify(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    names = DEFAULT_SUITES if args.suite == "all" else (args.suite,)
    reports = []
    for name in names:
        reports.append(SUITES[name](settings).run())
        logger.info("-" * 20)

    passed = all(report.passed for report in reports)
    payload = {
        "passed": passed,
        "suites": {report.name: report.to_dict() for report in reports},
        "summary": {report.name: report.max_residual for report in reports},
    }
    header = ["suite", "case", "residual", "threshold", "passed"]
    rows = [
        [report.name, case["id"], case["residual"], case["threshold"], case["passed"]]
        for report in reports
        for case in report.cases
    ]
    if args.plot:
        _plot(args.plot, plot_series, x=list(range(len(reports))),
              series={"max residual": [max(r.max_residual, 1e-300) for r in reports]},
              xlabel="suite", ylabel="residual", title=", ".join(names), logy=True)
    return payload, header, rows, passed


def _simulation_observable(args: argparse.Namespace, sched: ParamSchedule) -> Callable:
    q = float(sched.q)
    if args.observable == "position":
        return position_observable(args.n)
    if args.observable == "qmoment":
        nvec = parse_flag("--n-vec", parse_int_list, args.n_vec) or [args.n]
        return q_moment_observable(nvec, q)
    if args.observable == "laplace":
        return eq_laplace_observable(args.n, complex(args.zeta_re, args.zeta_im), q)
    if args.observable == "current":
        return current_observable(args.site)
    if args.observable == "histogram":
        return histogram_observable(args.n, args.support)
    return occupation_observable()


def run_simulate(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    sched = build_schedule(args, settings)
    observable = _simulation_observable(args, sched)
    if (args.process == "tasep") == (args.observable == "occupation"):
        raise DomainError("the occupation observable goes with --process boson or ring and only with them")
    initial = parse_flag("--initial", parse_int_list, args.initial)
    nvec = parse_flag("--n-vec", parse_int_list, args.n_vec) or []
    estimate = mc_estimate(
        observable,
        args.t,
        sched,
        settings["replicas"],
        settings["seed"],
        initial=initial,
        n_particles=max([args.n] + nvec),
        process=args.process,
        block_size=settings["block_size"],
        max_workers=settings["max_workers"],
        progress=True,
    )
    payload = {"estimate": estimate.to_dict()}
    means = np.atleast_1d(estimate.mean)
    errors = np.atleast_1d(estimate.stderr)
    rows = [[index, mean, stderr] for index, (mean, stderr) in enumerate(zip(means, errors))]
    if args.plot and len(rows) > 1:
        _plot(args.plot, plot_series, x=[row[0] for row in rows],
              series={"mean": [float(abs(row[1])) for row in rows]},
              xlabel="component", ylabel="estimate", title=args.observable)
    return payload, ["component", "mean", "stderr"], rows, True


def run_exact(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    sched = build_schedule(args, settings)
    nvec = parse_flag("--n-vec", parse_int_list, args.n_vec)
    if nvec is not None:
        value = qmoment_oracle(nvec, args.t, sched, cap=settings["state_cap"])
        logger.info(f"E[prod q^(x_n + n)] for n = {nvec}, t = {args.t}: {value}")
        payload = {"nvec": nvec, "t": args.t, "value": value, "float": float(value)}
        return payload, ["nvec", "value"], [[" ".join(map(str, nvec)), value]], True

    table = moment_table(args.n, args.k, args.t, sched)
    payload = {"N": args.n, "k": args.k, "t": args.t,
               "moments": {" ".join(map(str, key)): value for key, value in sorted(table.items())}}
    rows = [[" ".join(map(str, key)), value] for key, value in sorted(table.items())]
    return payload, ["nvec", "value"], rows, True


def run_moments(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    sched = build_schedule(args, settings)
    if not sched.homogeneous_sites:
        raise DomainError("the contour formula takes homogeneous site weights")
    p = sched.base.as_float()
    mus = tuple(float(m) for m in sched.mu_schedule) if sched.mu_schedule else None
    nvec = tuple(parse_flag("--n-vec", parse_int_list, args.n_vec))
    obs = ObservableSpec(nvec, args.t, mus)
    radii = parse_flag("--radii", parse_number_list, args.radii)
    spec = (
        contours_from_radii(radii, p.q, p.nu, settings["contour_nodes"]) if radii else None
    )
    result = qmoment_contour(obs, p, spec, tol=settings["tol"],
                             max_doublings=settings["max_doublings"])
    logger.info(f"Contour moment for n = {list(nvec)}, t = {args.t}: {result.value.real!r}")
    payload = {"nvec": list(nvec), "t": args.t, "result": result.to_dict()}
    rows = [[" ".join(map(str, nvec)), result.value.real, result.imag_residual,
             result.refinement_delta]]
    return payload, ["nvec", "value", "imag_residual", "refinement_delta"], rows, True


def run_fredholm(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    sched = build_schedule(args, settings)
    if not sched.homogeneous_sites:
        raise DomainError("the Fredholm formulas take homogeneous site weights")
    p = sched.base.as_float()
    horizon = [float(m) for m in sched.mu_schedule[: args.t]] if sched.mu_schedule else args.t
    zeta = complex(args.zeta_re, args.zeta_im)
    evaluate = det_mb if args.type == "mb" else det_cauchy
    result = evaluate(zeta, args.n, horizon, p, tol=settings["tol"], nodes=settings["nystrom_nodes"])
    logger.info(f"{args.type} determinant at zeta = {zeta}: {result.value}")
    rows = [[index, value.real, value.imag] for index, value in enumerate(result.history)]
    if args.plot and len(result.history) > 1:
        changes = [abs(b - a) for a, b in zip(result.history, result.history[1:])]
        _plot(args.plot, plot_series, x=list(range(1, len(changes) + 1)),
              series={"|change|": [max(c, 1e-300) for c in changes]},
              xlabel="doubling", ylabel="change", title=f"{args.type} determinant", logy=True)
    return {"result": result.to_dict()}, ["refinement", "re", "im"], rows, True


def run_invert(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    # Moment inversion is only stable in rational arithmetic
    sched = build_schedule(args, settings, exact=True)
    result = invert_distribution(args.n, args.t, sched, args.support_cap)
    passed = result.min_probability >= -1e-12 and abs(result.mass_defect) < 1e-9
    if not passed:
        logger.warning(
            f"Recovered pmf: min probability {result.min_probability:.3e}, "
            f"mass defect {result.mass_defect:.3e}"
        )
    rows = [[s, value] for s, value in enumerate(result.pmf)]
    if args.plot:
        _plot(args.plot, plot_series, x=list(range(len(result.pmf))),
              series={"pmf": [max(float(v), 1e-300) for v in result.pmf]},
              xlabel="s", ylabel=f"P(x_{args.n}({args.t}) + {args.n} = s)", logy=True)
    payload = {"n": args.n, "t": args.t, "result": result.to_dict(), "exact_pmf": result.pmf}
    return payload, ["s", "probability"], rows, passed


def run_stationarity(args: argparse.Namespace, settings: Dict[str, Any]) -> Outcome:
    sched = build_schedule(args, settings)
    report = stationarity_experiment(
        args.sites,
        args.rho,
        args.t,
        settings["replicas"],
        sched.base.as_float(),
        settings["seed"],
        block_size=settings["block_size"],
        max_workers=settings["max_workers"],
    )
    if not report.within_3_sigma:
        # Exploratory experiment: reported, never gates the exit code
        logger.warning("=" * 40)
        logger.warning("Ring marginal deviates from the product measure beyond 3 sigma")
        logger.warning("=" * 40)
    rows = [
        [b, e, m, s, z]
        for b, e, m, s, z in zip(report.bins, report.expected, report.empirical,
                                 report.stderr, report.z_scores)
    ]
    if args.plot:
        _plot(args.plot, plot_pmf_comparison, empirical=report.empirical,
              reference=report.expected, xlabel="occupation of site 0",
              title=f"ring L={args.sites}, T={args.t}")
    return {"report": report.to_dict()}, ["bin", "expected", "empirical", "stderr", "z"], rows, True


SUBCOMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any]], Outcome]] = {
    "verify": run_verify,
    "simulate": run_simulate,
    "exact": run_exact,
    "moments": run_moments,
    "fredholm": run_fredholm,
    "invert": run_invert,
    "stationarity": run_stationarity,
}


# --- output -------------------------------------------------------------------


def _plot(path: str, plotter: Callable, **kwargs: Any) -> None:
    target = Path(path)
    plotter(str(target.parent), target.stem, **kwargs)


def _report_name(args: argparse.Namespace) -> str:
    return f"verify_{args.suite}" if args.subcommand == "verify" else args.subcommand


def write_report(args: argparse.Namespace, config: RunConfig, outcome: Outcome) -> Path:
    """Writes the JSON report, or the CSV table, named after the subcommand."""
    payload, header, rows, passed = outcome
    settings = config.settings["settings"]
    name = _report_name(args)
    if settings["output_format"] == "csv":
        path = write_csv_file(settings["output_dir"], name, header, rows, config.config_hash())
    else:
        document = {
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "passed": passed,
            "result": payload,
        }
        path = write_json_file(settings["output_dir"], name, document)
    logger.info(f"Report written to '{path}'")
    return path


def write_failure(args: argparse.Namespace, settings: Dict[str, Any], error: Exception) -> None:
    """Machine-readable failure report next to the regular outputs."""
    try:
        write_json_file(
            settings["output_dir"],
            f"{_report_name(args)}_failure",
            {"subcommand": args.subcommand, "error": type(error).__name__, "message": str(error)},
        )
    except OSError as e:
        logger.error(f"Could not write failure report: {e}")


def main(argv: Optional[Sequence[str]] = None) -> None:
    """
    Main entry point.

    This orchestrates a run:
    1. Parses command-line arguments
    2. Loads configuration and applies overrides
    3. Runs the subcommand
    4. Writes the report and exits with the verdict
    """
    args = parse_arguments(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    settings: Dict[str, Any] = {}
    try:
        settings = resolve_settings(args)
        config = run_config(args, settings)
        outcome = SUBCOMMANDS[args.subcommand](args, settings)
        write_report(args, config, outcome)
        passed = outcome[3]
        if not passed:
            logger.error("One or more residuals exceed their tolerance")
        sys.exit(EXIT_PASS if passed else EXIT_TOLERANCE_FAILURE)

    except USAGE_ERRORS as e:
        logger.error(f"Fatal error: {e}")
        if settings:
            write_failure(args, settings, e)
        sys.exit(EXIT_USAGE_ERROR)
    except QmunuError as e:
        logger.error(f"Computation failed: {e}")
        if settings:
            write_failure(args, settings, e)
        sys.exit(EXIT_TOLERANCE_FAILURE)
    except KeyboardInterrupt:
        logger.warning("\nOperation cancelled by user")
        sys.exit(EXIT_INTERRUPTED)
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        sys.exit(EXIT_TOLERANCE_FAILURE)


if __name__ == "__main__":
    main()
