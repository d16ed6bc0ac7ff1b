"""Command-line interface.

Subcommands:
    build-pop        build a population directory from a config file
    run              execute the replication study described by a config file
    report           regenerate report CSVs/tables from a study directory
    validate-config  check a config file and echo the effective settings
"""

from __future__ import annotations

import argparse
import sys

from ._rng import derive_seed
from .config import ConfigError, StudyConfig, format_config, load_config
from .dgp import ItesSpec, SyntheticPopConfig, Y0Config, build_population, save_population
from .harness import load_tensors, run_study, write_reports


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htesim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build-pop", help="build and save a population directory")
    p_build.add_argument("--config", required=True, help="path to the study config file")
    p_build.add_argument("--out", help="override the population_dir from the config")

    p_run = sub.add_parser("run", help="run the study described by a config file")
    p_run.add_argument("--config", required=True, help="path to the study config file")

    p_report = sub.add_parser("report", help="regenerate reports from a study output directory")
    p_report.add_argument("--study", required=True, help="study output directory")

    p_val = sub.add_parser("validate-config", help="validate a config file and echo the effective settings")
    p_val.add_argument("--config", required=True, help="path to the study config file")
    return parser


def build_population_from_config(config: StudyConfig):
    ites = ItesSpec(alpha=config.alpha, noise=config.noise,
                    assignment=config.assignment, y_max=config.y_max)
    seed = derive_seed(config.master_seed, "population")
    if config.population_source == "csv":
        source = {
            "covariates": config.csv_path,
            "schema": config.csv_schema,
            "y0": config.csv_y0_column,
            "treatment": config.csv_treatment_column,
        }
    else:
        source = SyntheticPopConfig(
            n_population=config.n_population,
            k_continuous=config.k_continuous,
            k_binary=config.k_binary,
            propensity_coefficients=config.propensity_coefficients,
            y0_model=Y0Config(config.y0_zero_share, config.y0_max_share, config.y0_signal_weight),
            seed=seed,
        )
    return build_population(source, ites, seed, n_validation=config.n_validation)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate-config":
            config = load_config(args.config)
            sys.stdout.write(format_config(config))
            return 0
        if args.command == "build-pop":
            config = load_config(args.config)
            out_dir = args.out or config.population_dir
            pop = build_population_from_config(config)
            save_population(pop, out_dir)
            print(f"population of {pop.n} units written to {out_dir} "
                  f"({len(pop.validation_ids)} validation, {pop.n_groups} groups)")
            return 0
        if args.command == "run":
            config = load_config(args.config)
            result = run_study(config)
            n_ok = sum(1 for (_, lvl) in result.tensors if lvl == "iate")
            print(f"study finished: {config.n_replications} replications, "
                  f"{n_ok} estimators, reports in {config.output_dir}/reports")
            for est_id, count in sorted(result.failures.items()):
                if count:
                    print(f"  warning: {est_id} failed in {count} replication(s)")
            return 0
        if args.command == "report":
            result = load_tensors(args.study)
            written = write_reports(result, args.study)
            for path in written:
                print(path)
            return 0
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
