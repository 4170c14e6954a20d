"""Command-line front end.

Subcommands mirror the pipeline stages: simulate, fit, summarize, bma,
project, tables, plus config for inspecting defaults. Every numeric
output is deterministic for a fixed config and seed; exit status is 0
only if all requested stages succeed.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, PipelineError, RotaError
from .inference import posterior_summary
from .pipeline import (RunConfig, config_text, emit_plot_tables,
                       parse_config, rebuild_table_artifacts, stage_bma,
                       stage_fit, stage_project, stage_simulate,
                       write_run_manifest)
from .storage import load_case_series, load_chain, write_table

_CONFIG_FIELDS = ("output_dir", "seed", "models", "data_path", "iterations",
                  "burn_in", "threads", "population_size", "week_offset",
                  "coverages", "seroconversions", "scalar_draws",
                  "impact_draws")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", metavar="FILE",
                   help="flat key=value config file")
    p.add_argument("-o", "--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--models", help="comma-separated subset of A,B,C,D,E")
    p.add_argument("--data", dest="data_path",
                   help="case-series CSV (default: bundled synthetic data)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--threads", type=int,
                   help="worker budget; recorded, never changes results")
    p.add_argument("--population", dest="population_size", type=float)
    p.add_argument("--week-offset", dest="week_offset", type=int)
    p.add_argument("--coverages", help="comma-separated coverage grid")
    p.add_argument("--seroconversions",
                   help="comma-separated scenario values, e.g. 0.63,0.49")
    p.add_argument("--scalar-draws", dest="scalar_draws", type=int)
    p.add_argument("--impact-draws", dest="impact_draws", type=int)


def _config_from(args: argparse.Namespace,
                 extra: dict | None = None) -> RunConfig:
    overrides = {}
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    overrides.update(extra or {})
    return parse_config(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotaensemble",
        description="Ensemble fitting and vaccination projection for "
                    "age-structured rotavirus transmission models.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{simulate,fit,summarize,bma,"
                                        "project,tables,config}")

    p = sub.add_parser("simulate",
                       help="write a synthetic case-series file")
    _add_common(p)
    p.add_argument("--model", dest="sim_model")
    p.add_argument("--weeks", dest="sim_weeks", type=int)
    p.add_argument("--sim-seed", dest="sim_seed", type=int)
    p.add_argument("--out", dest="sim_output",
                   help="output filename inside the output directory")

    p = sub.add_parser("fit", help="run one MCMC chain per selected model")
    _add_common(p)

    p = sub.add_parser("summarize",
                       help="print posterior means and 95%% HPDs of a chain")
    p.add_argument("--chain", required=True, metavar="FILE")
    p.add_argument("--model", required=True, help="model id A..E")
    p.add_argument("--data", metavar="FILE",
                   help="fitted series; sets the observation count")
    p.add_argument("--out", metavar="FILE",
                   help="also write the summary as a table")

    p = sub.add_parser("bma",
                       help="model evidence, pmps, combined burden/R0/"
                            "profile")
    _add_common(p)

    p = sub.add_parser("project",
                       help="vaccination impact sweeps per model and BMA")
    _add_common(p)

    p = sub.add_parser("tables",
                       help="plot-ready tables from completed artifacts")
    _add_common(p)

    p = sub.add_parser("config", help="show configuration")
    p.add_argument("-c", "--config", metavar="FILE")
    p.add_argument("--defaults", action="store_true",
                   help="print the built-in defaults and exit")
    return parser


def _cmd_simulate(args) -> int:
    extra = {}
    for name in ("sim_model", "sim_weeks", "sim_seed", "sim_output"):
        value = getattr(args, name, None)
        if value is not None:
            extra[name] = value
    config = _config_from(args, extra)
    path = stage_simulate(config)
    print(f"wrote {path}")
    return 0


def _cmd_fit(args) -> int:
    config = _config_from(args)
    artifacts = stage_fit(config)
    for model_id, chain in artifacts["chains"].items():
        print(f"model {model_id}: {chain.n_samples} samples, "
              f"acceptance {chain.acceptance_rate:.3f}")
    write_run_manifest(config)
    print(f"chains and summaries in {config.output_dir}")
    return 0


def _cmd_summarize(args) -> int:
    n_obs = 0
    if args.data:
        n_obs = load_case_series(args.data).n_cells
    chain = load_chain(args.chain, args.model.strip().upper(), n_obs)
    summary = posterior_summary(chain)
    rows = list(summary.as_rows())
    print(f"model {summary.model_id}: n={summary.observation_count}, "
          f"k={summary.parameter_count}, "
          f"max log-likelihood={summary.max_log_likelihood:.4f}")
    print(f"{'parameter':>9}  {'mean':>12}  {'hpd_lower':>12}  "
          f"{'hpd_upper':>12}")
    for name, mean, lo, hi in rows:
        print(f"{name:>9}  {mean:12.6g}  {lo:12.6g}  {hi:12.6g}")
    if args.out:
        write_table(args.out,
                    ("parameter", "mean", "hpd_lower", "hpd_upper"), rows)
        print(f"wrote {args.out}")
    return 0


def _cmd_bma(args) -> int:
    config = _config_from(args)
    artifacts = stage_bma(config)
    for evidence in artifacts["evidences"]:
        print(f"model {evidence.model_id}: bic={evidence.bic:.2f} "
              f"pmp={evidence.pmp:.4f}")
    write_run_manifest(config)
    return 0


def _cmd_project(args) -> int:
    config = _config_from(args)
    stage_project(config)
    write_run_manifest(config)
    print(f"impact tables in {config.output_dir}")
    return 0


def _cmd_tables(args) -> int:
    config = _config_from(args)
    artifacts = rebuild_table_artifacts(config)
    written = emit_plot_tables(config, artifacts)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_config(args) -> int:
    if args.defaults or not args.config:
        print(config_text(RunConfig()), end="")
    else:
        print(config_text(parse_config(args.config)), end="")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "summarize": _cmd_summarize,
    "bma": _cmd_bma,
    "project": _cmd_project,
    "tables": _cmd_tables,
    "config": _cmd_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RotaError, ConfigError, OSError) as exc:
        print(f"error in stage '{args.command}': {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
