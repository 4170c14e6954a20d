"""Batch orchestration: fit, ensemble, projection, and plot tables.

A run is configured by a flat key=value file plus command-line overrides,
and writes a fixed artifact set into the output directory:

  model_<id>_chain.csv      posterior samples, one line per iteration
  model_<id>_summary.csv    per-parameter means and 95% HPDs
  evidence.csv              max log-likelihood, BIC, and pmp per model
  burden.csv / r0.csv       per-model and BMA scalar estimates
  bma_profile.csv           combined weekly reported-case profile
  impact_<id>_s<s>.csv      reduction by coverage, one file per scenario
  impact_bma_s<s>.csv       pmp-combined reduction by coverage
  relative_incidence.csv    weekly incidence ratios over the short horizon
  manifest.txt              seeds, versions, config hash (no timestamps)

Reruns with the same config and seed are byte-identical. The thread
budget is validated and recorded but execution is sequential; results
never depend on it.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import synthetic_reference_path
from .engine import find_periodic_solution
from .ensemble import (bma_combine_profile, bma_combine_scalar,
                       model_evidences)
from .errors import (ConfigError, MissingArtifact, NonConvergence,
                     PipelineError, StiffnessFailure)
from .inference import McmcConfig, posterior_summary, run_mcmc
from .metrics import (age_distribution, next_generation_matrix,
                      vaccination_impact)
from .models import MODEL_IDS, model_spec
from .observation import severe_incidence, simulate_observations
from .parameters import ParamVector
from .storage import (IMPACT_HEADER, load_case_series, load_chain,
                      read_table, save_chain, write_case_series,
                      write_manifest, write_table)

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "ROTAENSEMBLE_THREADS"
_COVERAGE_DEFAULT = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for a batch run; unknown keys are rejected."""

    models: tuple = MODEL_IDS
    data_path: str = ""                 # empty selects the bundled dataset
    output_dir: str = "results"
    seed: int = 0
    iterations: int = 50_000
    burn_in: int = 10_000
    population_size: float = 200_000.0
    week_offset: int = 0
    coverages: tuple = _COVERAGE_DEFAULT
    seroconversions: tuple = (0.63,)
    scalar_draws: int = 100
    impact_draws: int = 25
    threads: int = 1
    rtol: float = 1e-6
    atol: float = 1e-8
    sim_model: str = "B"
    sim_b: float = 0.41
    sim_phi: float = 7.4
    sim_r: float = 2.6
    sim_rho: float = 0.096
    sim_beta0: float = 20.0
    sim_weeks: int = 118
    sim_seed: int = 1729
    sim_output: str = "synthetic.csv"

    def __post_init__(self):
        models = tuple(str(m).strip().upper() for m in self.models)
        if not models or len(set(models)) != len(models):
            raise ConfigError("models must be a nonempty set of distinct ids")
        for m in models:
            if m not in MODEL_IDS:
                raise ConfigError(f"unknown model id {m!r}")
        object.__setattr__(self, "models", models)
        if self.iterations <= 0 or self.burn_in <= 0 \
                or self.iterations <= self.burn_in:
            raise ConfigError("need iterations > burn_in > 0")
        if self.population_size <= 0:
            raise ConfigError("population_size must be positive")
        coverages = tuple(float(c) for c in self.coverages)
        if not coverages or any(not 0.0 <= c <= 1.0 for c in coverages):
            raise ConfigError("coverages must lie in [0, 1]")
        object.__setattr__(self, "coverages", coverages)
        scenarios = tuple(float(s) for s in self.seroconversions)
        if not scenarios or any(not 0.0 <= s <= 1.0 for s in scenarios):
            raise ConfigError("seroconversions must lie in [0, 1]")
        object.__setattr__(self, "seroconversions", scenarios)
        if self.scalar_draws < 1 or self.impact_draws < 1:
            raise ConfigError("draw counts must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigError("tolerances must be positive")
        if str(self.sim_model).strip().upper() not in MODEL_IDS:
            raise ConfigError(f"unknown sim_model {self.sim_model!r}")
        object.__setattr__(self, "sim_model",
                           str(self.sim_model).strip().upper())
        if self.sim_weeks < 1:
            raise ConfigError("sim_weeks must be at least 1")

    def sim_params(self) -> ParamVector:
        return ParamVector(b=self.sim_b, phi=self.sim_phi, r=self.sim_r,
                           rho=self.sim_rho,
                           beta0=np.full(6, float(self.sim_beta0)))

    def resolved_data_path(self) -> Path:
        if self.data_path:
            return Path(self.data_path)
        return synthetic_reference_path()


_LIST_FIELDS = {"models", "coverages", "seroconversions"}
_INT_FIELDS = {"seed", "iterations", "burn_in", "week_offset",
               "scalar_draws", "impact_draws", "threads", "sim_weeks",
               "sim_seed"}
_FLOAT_FIELDS = {"population_size", "rtol", "atol", "sim_b", "sim_phi",
                 "sim_r", "sim_rho", "sim_beta0"}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    try:
        if name in _LIST_FIELDS:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if name == "models":
                return tuple(parts)
            return tuple(float(p) for p in parts)
        if name in _INT_FIELDS:
            return int(raw)
        if name in _FLOAT_FIELDS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {name}={raw!r}") from None
    return raw


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then overrides; unknown keys fail."""
    known = {f.name for f in fields(RunConfig)}
    settings: dict = {}
    if path is not None:
        for lineno, rawline in enumerate(
                Path(path).read_text().splitlines(), start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"line {lineno}: expected key=value, "
                                  f"got {line!r}")
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            settings[key] = _parse_value(key, value)
    env_threads = os.environ.get(THREADS_ENV_VAR)
    if env_threads is not None and "threads" not in settings:
        settings["threads"] = _parse_value("threads", env_threads)
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
        if value is None:
            continue
        settings[key] = _parse_value(key, str(value)) \
            if isinstance(value, str) else value
    return RunConfig(**settings)


def config_text(config: RunConfig) -> str:
    """Flat key=value rendering (the format parse_config reads)."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Digest of the run settings; output location deliberately excluded
    so reruns into different directories share a hash."""
    lines = [line for line in config_text(config).splitlines()
             if not line.startswith("output_dir=")]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def chain_seed(config: RunConfig, model_id: str) -> int:
    """Stable per-model chain seed derived from the run seed."""
    idx = MODEL_IDS.index(model_id)
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(idx,))
    return int(ss.generate_state(1)[0])


def _out(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_series(config: RunConfig):
    return load_case_series(config.resolved_data_path())


def _thin_indices(n: int, k: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, num=min(k, n)).astype(int))


def _stage(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, str(exc)) from exc
            return False
    return _Ctx()


# ---------------------------------------------------------------------------
# Stages


def stage_simulate(config: RunConfig) -> Path:
    """Write a synthetic case-series file at the configured parameters."""
    with _stage("simulate"):
        from .datasets import synthetic_series_means
        xi = synthetic_series_means(config.sim_weeks, config.population_size,
                                    config.sim_params(), config.sim_model)
        series = simulate_observations(xi, config.sim_r, config.sim_seed)
        out = _out(config) / config.sim_output
        return write_case_series(series, out)


def stage_fit(config: RunConfig) -> dict:
    """Run one chain per selected model; write chains and summaries."""
    with _stage("fit"):
        series = _load_series(config)
        out = _out(config)
        chains = {}
        summaries = {}
        for model_id in config.models:
            spec = model_spec(model_id)
            mcfg = McmcConfig(iterations=config.iterations,
                              burn_in=config.burn_in,
                              seed=chain_seed(config, model_id))
            chain = run_mcmc(spec, series, mcfg,
                             population_size=config.population_size,
                             rtol=config.rtol, atol=config.atol,
                             week_offset=config.week_offset)
            save_chain(chain, out / f"model_{model_id}_chain.csv")
            summary = posterior_summary(chain)
            write_table(out / f"model_{model_id}_summary.csv",
                        ("parameter", "mean", "hpd_lower", "hpd_upper"),
                        list(summary.as_rows()))
            chains[model_id] = chain
            summaries[model_id] = summary
        return {"series": series, "chains": chains, "summaries": summaries}


def _load_chains(config: RunConfig, series) -> dict:
    out = _out(config)
    chains = {}
    for model_id in config.models:
        path = out / f"model_{model_id}_chain.csv"
        if not path.exists():
            raise MissingArtifact(f"chain file {path} (run `fit` first)")
        chains[model_id] = load_chain(path, model_id, series.n_cells)
    return chains


def _draw_vectors(chain, k: int) -> list:
    idx = _thin_indices(chain.n_samples, k)
    return [chain.param_vector(int(i)) for i in idx]


def stage_bma(config: RunConfig, artifacts: dict | None = None) -> dict:
    """Model evidence, pmps, and combined burden/R0/profile tables."""
    with _stage("bma"):
        series = (artifacts or {}).get("series") or _load_series(config)
        chains = (artifacts or {}).get("chains") or _load_chains(config,
                                                                 series)
        summaries = (artifacts or {}).get("summaries") or {
            m: posterior_summary(chains[m]) for m in config.models}
        out = _out(config)
        ordered = [summaries[m] for m in config.models]
        evidences = model_evidences(ordered)
        write_table(out / "evidence.csv",
                    ("model_id", "max_log_likelihood", "k", "n", "bic",
                     "pmp"),
                    [(e.model_id, e.max_log_likelihood, e.k, e.n, e.bic,
                      e.pmp) for e in evidences])
        pmps = np.array([e.pmp for e in evidences])

        burden_draws = {}
        r0_draws = {}
        profile_draws = {}
        profile_age_means = {}
        for model_id in config.models:
            spec = model_spec(model_id)
            thetas = _draw_vectors(chains[model_id], config.scalar_draws)
            burdens = []
            r0s = []
            profiles = []
            age_totals = np.zeros(6)
            for d, theta in enumerate(thetas):
                # draws without a periodic limit are dropped, loudly;
                # the combined tables use whatever survives
                try:
                    sol = find_periodic_solution(
                        spec, theta,
                        population_size=config.population_size,
                        rtol=config.rtol, atol=config.atol)
                except (NonConvergence, StiffnessFailure) as exc:
                    logger.warning("model %s: dropping posterior draw %d "
                                   "(b=%.4g phi=%.4g rho=%.4g): %s",
                                   model_id, d, theta.b, theta.phi,
                                   theta.rho, exc)
                    continue
                severe = severe_incidence(spec, sol.weekly_incidence)
                burdens.append(100.0 * float(severe.sum())
                               / sol.mean_population)
                r0s.append(next_generation_matrix(spec,
                                                  theta).spectral_radius)
                profiles.append(sol.expected_profile.sum(axis=1))
                age_totals += severe.sum(axis=0)
            if not burdens:
                raise MissingArtifact(
                    f"model {model_id}: no posterior draw admits a "
                    "periodic solution; cannot summarize")
            burden_draws[model_id] = np.array(burdens)
            r0_draws[model_id] = np.array(r0s)
            profile_draws[model_id] = np.array(profiles)
            profile_age_means[model_id] = age_totals / len(burdens)

        def scalar_rows(draws: dict, level=0.95):
            rows = []
            sets = [draws[m] for m in config.models]
            for m in config.models:
                values = draws[m]
                lo, hi = np.quantile(values, [0.025, 0.975])
                rows.append((m, float(values.mean()), float(lo), float(hi)))
            combined = bma_combine_scalar(sets, pmps, level)
            rows.append(("BMA", combined.point, combined.interval[0],
                         combined.interval[1]))
            return rows

        write_table(out / "burden.csv",
                    ("model_id", "annual_percent", "lower95", "upper95"),
                    scalar_rows(burden_draws))
        write_table(out / "r0.csv",
                    ("model_id", "r0", "lower95", "upper95"),
                    scalar_rows(r0_draws))
        combined_profile = bma_combine_profile(
            [profile_draws[m] for m in config.models], pmps, 0.95)
        write_table(out / "bma_profile.csv",
                    ("week", "mean", "lower95", "upper95"),
                    [(t + 1, est.point, est.interval[0], est.interval[1])
                     for t, est in enumerate(combined_profile)])
        return {"series": series, "chains": chains, "summaries": summaries,
                "evidences": evidences, "pmps": pmps,
                "profile_draws": profile_draws,
                "profile_age_means": profile_age_means,
                "burden_draws": burden_draws, "r0_draws": r0_draws}


def _read_pmps(config: RunConfig) -> np.ndarray:
    path = _out(config) / "evidence.csv"
    if not path.exists():
        raise MissingArtifact(f"evidence table {path} (run `bma` first)")
    header, rows = read_table(path)
    pmp_col = header.index("pmp")
    id_col = header.index("model_id")
    by_id = {row[id_col]: float(row[pmp_col]) for row in rows}
    return np.array([by_id[m] for m in config.models])


def _impact_rows(results) -> list:
    rows = []
    for res in results:
        lo, hi = res.percent_interval if res.percent_interval is not None \
            else (res.long_term_percent_reduction,
                  res.long_term_percent_reduction)
        rows.append((res.coverage, res.long_term_percent_reduction,
                     lo, hi, res.long_term_absolute_reduction))
    return rows


def stage_project(config: RunConfig, artifacts: dict | None = None) -> dict:
    """Coverage sweeps per model and scenario, plus BMA-combined tables."""
    with _stage("project"):
        series = (artifacts or {}).get("series") or _load_series(config)
        chains = (artifacts or {}).get("chains") or _load_chains(config,
                                                                 series)
        if artifacts and "pmps" in artifacts:
            pmps = artifacts["pmps"]
        else:
            pmps = _read_pmps(config)
        out = _out(config)
        impact_results = {}
        relative_rows = []
        for s in config.seroconversions:
            per_model = {}
            for model_id in config.models:
                spec = model_spec(model_id)
                chain = chains[model_id]
                mean_theta = ParamVector.from_array(
                    chain.samples.mean(axis=0))
                draws = _draw_vectors(chain, config.impact_draws)
                results = vaccination_impact(
                    spec, mean_theta, config.coverages,
                    seroconversion=s,
                    population_size=config.population_size,
                    draw_params=draws, rtol=config.rtol, atol=config.atol)
                per_model[model_id] = results
                write_table(out / f"impact_{model_id}_s{s}.csv",
                            IMPACT_HEADER, _impact_rows(results))
                for res in results:
                    rel = res.relative_incidence_series
                    for week, value in enumerate(rel, start=1):
                        relative_rows.append((model_id, s, res.coverage,
                                              week, float(value)))
            bma_rows = []
            for ci, coverage in enumerate(config.coverages):
                pct_sets = []
                abs_sets = []
                for model_id in config.models:
                    res = per_model[model_id][ci]
                    pct = res.draw_percent_reductions
                    ab = res.draw_absolute_reductions
                    pct_sets.append(
                        pct if pct is not None
                        else np.array([res.long_term_percent_reduction]))
                    abs_sets.append(
                        ab if ab is not None
                        else np.array([res.long_term_absolute_reduction]))
                pct_est = bma_combine_scalar(pct_sets, pmps, 0.99)
                abs_est = bma_combine_scalar(abs_sets, pmps, 0.99)
                bma_rows.append((coverage, pct_est.point,
                                 pct_est.interval[0], pct_est.interval[1],
                                 abs_est.point))
            write_table(out / f"impact_bma_s{s}.csv", IMPACT_HEADER,
                        bma_rows)
            impact_results[s] = per_model
        write_table(out / "relative_incidence.csv",
                    ("model_id", "seroconversion", "coverage", "week",
                     "relative_incidence"),
                    relative_rows)
        return {"series": series, "chains": chains, "pmps": pmps,
                "impact_results": impact_results}


def emit_plot_tables(config: RunConfig, artifacts: dict) -> list:
    """Figure-family tables from completed pipeline artifacts."""
    with _stage("tables"):
        out = _out(config)
        series = artifacts.get("series")
        pmps = artifacts.get("pmps")
        age_means = artifacts.get("profile_age_means")
        profile_draws = artifacts.get("profile_draws")
        if series is None or pmps is None or age_means is None \
                or profile_draws is None:
            raise MissingArtifact("tables need the fit/bma artifacts; "
                                  "run `bma` in the same invocation or "
                                  "rebuild with `tables`")
        if not (_out(config) / "relative_incidence.csv").exists():
            raise MissingArtifact("relative_incidence.csv (run `project`)")
        written = []

        # Weekly fitted profile against the observations, by age group.
        mean_profiles = artifacts.get("profile_week_age")
        if mean_profiles is None:
            raise MissingArtifact("posterior-mean weekly profiles")
        per_age_expected = np.zeros((52, 6))
        for w, model_id in zip(pmps, config.models):
            per_age_expected += w * mean_profiles[model_id]
        rows = []
        for t in range(series.n_weeks):
            for a in range(6):
                rows.append((int(series.weeks[t]), a + 1,
                             int(series.counts[t, a]),
                             float(per_age_expected[
                                 (int(series.weeks[t]) - 1 +
                                  config.week_offset) % 52, a])))
        written.append(write_table(
            out / "fit_profile.csv",
            ("week", "age_group", "observed", "expected_bma"), rows))

        # Case age distributions: data, fitted baseline, vaccinated.
        dist_rows = []
        data_dist = age_distribution(series.counts.astype(float))
        for a in range(6):
            dist_rows.append(("data", a + 1, float(data_dist[a])))
        baseline_totals = np.zeros(6)
        for w, model_id in zip(pmps, config.models):
            baseline_totals += w * age_means[model_id]
        base_dist = age_distribution(baseline_totals)
        for a in range(6):
            dist_rows.append(("bma_baseline", a + 1, float(base_dist[a])))
        vax_totals = artifacts.get("vaccinated_age_totals")
        if vax_totals is not None:
            vax_dist = age_distribution(vax_totals)
            for a in range(6):
                dist_rows.append(("bma_vaccinated", a + 1,
                                  float(vax_dist[a])))
        written.append(write_table(
            out / "age_distribution.csv",
            ("source", "age_group", "proportion"), dist_rows))

        # Reduction by coverage, aggregated across models and scenarios.
        agg_rows = []
        for s in config.seroconversions:
            for model_id in list(config.models) + ["bma"]:
                path = out / f"impact_{model_id}_s{s}.csv"
                if not path.exists():
                    raise MissingArtifact(str(path))
                header, rows_ = read_table(path)
                for row in rows_:
                    agg_rows.append((model_id if model_id != "bma"
                                     else "BMA", s) + tuple(row))
        written.append(write_table(
            out / "reduction_by_coverage.csv",
            ("model_id", "seroconversion") + IMPACT_HEADER, agg_rows))
        return written


def run_pipeline(config: RunConfig) -> dict:
    """All stages in order; returns the in-memory artifact map."""
    artifacts = stage_fit(config)
    artifacts.update(stage_bma(config, artifacts))
    artifacts.update(stage_project(config, artifacts))
    artifacts.update(_derived_table_inputs(config, artifacts))
    emit_plot_tables(config, artifacts)
    write_run_manifest(config)
    return artifacts


def _derived_table_inputs(config: RunConfig, artifacts: dict) -> dict:
    """Posterior-mean per-age profiles and vaccinated age totals that the
    plot tables need but the main stages do not persist."""
    with _stage("tables"):
        from .metrics import model_a_efficacy
        from .engine import project
        from .structure import VaccinePolicy
        chains = artifacts["chains"]
        profile_week_age = {}
        vax_totals = np.zeros(6)
        pmps = artifacts["pmps"]
        cmax = max(config.coverages)
        s0 = config.seroconversions[0]
        for w, model_id in zip(pmps, config.models):
            spec = model_spec(model_id)
            theta = ParamVector.from_array(
                chains[model_id].samples.mean(axis=0))
            sol = find_periodic_solution(
                spec, theta, population_size=config.population_size,
                rtol=config.rtol, atol=config.atol)
            profile_week_age[model_id] = sol.expected_profile.copy()
            if cmax > 0:
                policy = VaccinePolicy(coverage=cmax, seroconversion=s0,
                                       model_a_efficacy=model_a_efficacy(s0))
                traj = project(spec, theta, sol.cycle_start_state, 1040,
                               policy,
                               population_size=config.population_size,
                               start_time=sol.start_time,
                               rtol=config.rtol, atol=config.atol)
                severe = severe_incidence(
                    spec, traj.weekly_new_infections)[-52:]
                vax_totals += w * severe.sum(axis=0)
        result = {"profile_week_age": profile_week_age}
        if cmax > 0:
            result["vaccinated_age_totals"] = vax_totals
        return result


def write_run_manifest(config: RunConfig) -> Path:
    out = _out(config)
    data_path = config.resolved_data_path()
    entries = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "models": ",".join(config.models),
        "data_file": data_path.name,
        "data_sha256": hashlib.sha256(data_path.read_bytes()).hexdigest(),
        "population_size": config.population_size,
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "week_offset": config.week_offset,
        "coverages": ",".join(str(c) for c in config.coverages),
        "seroconversions": ",".join(str(s) for s in config.seroconversions),
        "threads": config.threads,
    }
    for model_id in config.models:
        entries[f"chain_seed_{model_id}"] = chain_seed(config, model_id)
    return write_manifest(out / "manifest.txt", entries)


def rebuild_table_artifacts(config: RunConfig) -> dict:
    """Reconstruct the in-memory inputs `tables` needs from disk."""
    series = _load_series(config)
    chains = _load_chains(config, series)
    summaries = {m: posterior_summary(chains[m]) for m in config.models}
    artifacts = {"series": series, "chains": chains, "summaries": summaries}
    artifacts.update(stage_bma(config, artifacts))
    artifacts.update(_derived_table_inputs(config, artifacts))
    return artifacts
