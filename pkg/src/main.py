"""Main entry point for the igd-sync simulator."""
import argparse

from common import *
from analysis import asymptotic_bounds, certify_trace, write_violations_csv
from exceptions import CertificateError, InputError, SyncSimError
from harness import (
    OPTIONS,
    ExperimentConfig,
    build_config,
    load_config,
    load_trace_bundle,
    run_experiment,
    sanity_report,
    write_results,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3


def _add_experiment_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value file; flags override it")
    for key in OPTIONS:
        flag = "--" + key.replace("_", "-")
        if key == "fixed_instance":
            parser.add_argument(flag, dest=key, action="store_const", const="true")
        else:
            parser.add_argument(flag, dest=key, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igd-sync",
        description="Inexact distributed gradient descent with triggered synchronization",
    )
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run a seeded experiment and write CSV results")
    _add_experiment_options(run_parser)

    sanity_parser = sub.add_parser("sanity", help="print constants and bounds of one instance")
    _add_experiment_options(sanity_parser)

    certify_parser = sub.add_parser("certify", help="certify a saved trace bundle")
    certify_parser.add_argument("--trace", type=Path, required=True)
    certify_parser.add_argument("--violations", type=Path, help="write violations CSV here")

    bounds_parser = sub.add_parser("bounds", help="print the asymptotic bounds")
    bounds_parser.add_argument("--L", dest="L", type=float, required=True)
    bounds_parser.add_argument("--ell", type=float, required=True)
    bounds_parser.add_argument("--gamma", type=float)
    bounds_parser.add_argument("--r", type=float, default=0.0)
    bounds_parser.add_argument("--eps", default="0.1", help="comma separated")
    bounds_parser.add_argument("--zeta", type=float)
    bounds_parser.add_argument("--nodes", type=int, default=4)
    return parser


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {key: getattr(args, key) for key in OPTIONS}
    if args.config is not None:
        return load_config(args.config, overrides)
    return build_config(overrides)


def cmd_run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    try:
        result = run_experiment(config)
    except CertificateError as exc:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        write_violations_csv(exc.reports, config.output_dir / "violations.csv")
        raise
    paths = write_results(result, config.output_dir)
    for (algo, eps), value in result.plateaus.items():
        print(f"{algo:>6} eps={eps:<8g} plateau={value:.6g} syncs={result.communication[(algo, eps)][2]:.1f}")
    for summary in result.claims.values():
        print(summary.describe())
    print(f"violations: {result.violation_count}  redraws: {result.redraws}")
    print(f"wrote {len(paths)} file(s) to {config.output_dir}")
    return EXIT_OK


def cmd_sanity(args: argparse.Namespace) -> int:
    print(sanity_report(experiment_config(args)))
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    problem, config, trace = load_trace_bundle(args.trace)
    report = certify_trace(trace, problem, config)
    print(report.summary())
    if args.violations is not None:
        write_violations_csv([report], args.violations)
    return EXIT_OK if report.passed else EXIT_CERTIFICATE


def cmd_bounds(args: argparse.Namespace) -> int:
    try:
        epsilons = [float(part) for part in args.eps.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"invalid --eps: {exc}") from exc
    for eps in epsilons:
        bounds = asymptotic_bounds(eps, args.zeta, args.nodes, args.L, args.ell, args.r, args.gamma)
        print(f"eps = {eps:g}")
        print(bounds.describe())
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "run": cmd_run,
    "sanity": cmd_sanity,
    "certify": cmd_certify,
    "bounds": cmd_bounds,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the igd-sync command line."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except CertificateError as exc:
        logger.error("%s", exc)
        return EXIT_CERTIFICATE
    except SyncSimError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
