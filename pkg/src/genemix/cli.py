"""Batch command-line front end.

Subcommands cover the full pipeline: ``simulate`` writes synthetic
genotype/environment/truth files, ``fit`` runs the sampler to a trace,
``calibrate`` turns a null-model trace into thresholds, ``test`` runs the
hypothesis battery, ``dpl`` exports per-locus distance tables, and
``report`` summarizes a trace.

Settings come from a key=value config file overridden by command-line
flags; the worker count falls back to the GENEMIX_WORKERS environment
variable.  All outputs are deterministic functions of inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .data import (
    DataFormatError,
    Dimensions,
    NullModelHyper,
    ScenarioConfig,
    SCENARIOS,
    generate_null_dataset,
    generate_scenario_dataset,
    load_environment,
    load_genotypes,
    write_environment,
    write_genotypes,
)
from .engine import ChainConfig, EngineError, TraceStore, run_chain, summarize_trace
from .hypotheses import (
    HypothesisError,
    ThresholdSet,
    calibrate_thresholds,
    detect_dpl,
    gene_gene_correlation_summary,
    run_test_battery,
    statistic_stream,
)

_CHAIN_KEYS = {
    "M": int,
    "alpha": float,
    "iterations": int,
    "burn_in": int,
    "thinning": int,
    "workers": int,
    "seed": int,
    "base_scale": float,
    "move_mix": float,
    "adapt_interval": int,
    "checkpoint_every": int,
}

_SCENARIO_KEYS = {
    "generator": str,
    "scenario": str,
    "n_individuals": int,
    "n_controls": int,
    "n_cases": int,
    "loci_per_gene": "int_list",
    "dpl_positions": "int_list",
    "n_subpopulations": int,
    "mixing_weights": "float_list",
    "genetic_effect": float,
    "env_effect": float,
    "gxg_effect": float,
    "gxe_effect": float,
    "baseline": float,
    "freq_spread": float,
    "env_kinds": "kind_list",
    "log_nu_override": "float_list",
}

_OTHER_KEYS = {
    "genotypes": str,
    "environment": str,
    "trace": str,
    "thresholds": str,
    "percentile": float,
    "top_fraction": float,
    "central_radius": float,
}

_ALL_KEYS = {**_CHAIN_KEYS, **_SCENARIO_KEYS, **_OTHER_KEYS}


def _coerce(key: str, raw: str):
    kind = _ALL_KEYS[key]
    if kind == "int_list":
        return tuple(int(v) for v in raw.split(","))
    if kind == "float_list":
        return tuple(float(v) for v in raw.split(","))
    if kind == "kind_list":
        mapping = {"b": "binary", "c": "continuous"}
        try:
            return tuple(mapping[v.strip()] for v in raw.split(","))
        except KeyError:
            raise ValueError(f"env_kinds entries must be 'b' or 'c', got {raw!r}") from None
    return kind(raw)


def parse_config_file(path) -> dict:
    settings = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _ALL_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown setting {key!r}")
            settings[key] = _coerce(key, raw)
    return settings


def merge_settings(args: argparse.Namespace) -> dict:
    """defaults < config file < flags < (workers: GENEMIX_WORKERS fallback)."""
    settings: dict = {}
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for flag in ("seed", "workers", "iterations", "burn_in", "scenario",
                 "genotypes", "environment", "trace", "thresholds"):
        value = getattr(args, flag, None)
        if value is not None:
            settings[flag.replace("-", "_")] = value
    if "workers" not in settings:
        env_workers = os.environ.get("GENEMIX_WORKERS")
        if env_workers:
            settings["workers"] = int(env_workers)
    return settings


def chain_config(settings: dict) -> ChainConfig:
    kwargs = {key: settings[key] for key in _CHAIN_KEYS if key in settings}
    return ChainConfig(**kwargs)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(settings: dict, key: str, parser: argparse.ArgumentParser):
    if key not in settings:
        parser.error(f"missing required setting {key!r} (flag or config file)")
    return settings[key]


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    seed = settings.get("seed", 0)
    generator = settings.get("generator", "scenario")
    if generator == "null_model":
        dims = Dimensions(
            n_controls=settings.get("n_controls", 50),
            n_cases=settings.get("n_cases", 50),
            loci_per_gene=settings.get("loci_per_gene", (10, 10)),
            env_kinds=settings.get("env_kinds", ("binary",)),
        )
        hyper = NullModelHyper(
            M=settings.get("M", 30),
            alpha=settings.get("alpha", 1.5),
            log_nu_override=settings.get("log_nu_override"),
        )
        dataset, env, truth = generate_null_dataset(dims, hyper, seed)
    elif generator == "scenario":
        scenario = settings.get("scenario")
        if scenario is None or scenario not in SCENARIOS:
            parser.error(
                f"scenario must be one of {sorted(SCENARIOS)}, got {scenario!r}"
            )
        loci = settings.get("loci_per_gene", (10, 10))
        cfg = ScenarioConfig(
            scenario=scenario,
            n_individuals=settings.get("n_individuals", 100),
            loci_per_gene=loci,
            dpl_positions=settings.get("dpl_positions", tuple(lj // 2 for lj in loci)),
            n_subpopulations=settings.get("n_subpopulations", 1),
            mixing_weights=settings.get("mixing_weights", (1.0,)),
            genetic_effect=settings.get("genetic_effect", 2.0),
            env_effect=settings.get("env_effect", 1.0),
            gxg_effect=settings.get("gxg_effect", 1.0),
            gxe_effect=settings.get("gxe_effect", 1.0),
            baseline=settings.get("baseline", 0.0),
            freq_spread=settings.get("freq_spread", 0.1),
            env_kinds=settings.get("env_kinds", ("binary",)),
            seed=seed,
        )
        dataset, env, truth = generate_scenario_dataset(cfg)
    else:
        parser.error(f"generator must be 'scenario' or 'null_model', got {generator!r}")
    write_genotypes(dataset, out / "genotypes.csv")
    write_environment(env, out / "environment.csv")
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'genotypes.csv'}, {out / 'environment.csv'}, {out / 'truth.json'}")
    return 0


def cmd_fit(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    dataset = load_genotypes(_require(settings, "genotypes", parser))
    env = load_environment(_require(settings, "environment", parser),
                           expected_n=dataset.n_individuals)
    cfg = chain_config(settings)
    trace_path = out / "trace.bin"
    trace = run_chain(dataset, env, cfg, trace_path, resume=args.resume)
    print(f"wrote {trace_path} ({trace.n_records} snapshots)")
    return 0


def cmd_calibrate(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    trace = TraceStore.open(_require(settings, "trace", parser))
    thresholds = calibrate_thresholds(
        trace,
        percentile=settings.get("percentile", 55.0),
    )
    payload = thresholds.to_json_dict()
    payload["seed"] = trace.header.get("seed")
    with open(out / "thresholds.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'thresholds.json'}")
    return 0


def cmd_test(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    trace = TraceStore.open(_require(settings, "trace", parser))
    with open(_require(settings, "thresholds", parser), "r", encoding="utf-8") as fh:
        thresholds = ThresholdSet.from_json_dict(json.load(fh))
    report = run_test_battery(
        trace, thresholds, central_radius=settings.get("central_radius")
    )
    seed = trace.header.get("seed")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(f"genemix test report (seed={seed})\n\n")
        fh.write(report.to_text())
    with open(out / "report.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("hypothesis,statistic,epsilon,probability,decision\n")
        for name, stat, eps, prob, decision in report.table_rows():
            fh.write(f"{name},{stat},{eps!r},{prob!r},{decision}\n")
    print(f"wrote {out / 'report.txt'}, {out / 'report.csv'}")
    return 0


def cmd_dpl(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    trace = TraceStore.open(_require(settings, "trace", parser))
    report = detect_dpl(trace, top_fraction=settings.get("top_fraction", 0.10))
    with open(out / "dpl.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gene,locus,distance,cutoff,flagged\n")
        for gene, locus, dist, cutoff, flagged in report.table_rows():
            fh.write(f"{gene},{locus},{dist!r},{cutoff!r},{int(flagged)}\n")
    print(f"wrote {out / 'dpl.csv'}")
    return 0


def cmd_report(args, parser) -> int:
    settings = merge_settings(args)
    out = _out_dir(args)
    trace = TraceStore.open(_require(settings, "trace", parser))
    summary = summarize_trace(trace)
    corr = gene_gene_correlation_summary(trace)
    names = trace.header["dims"]["gene_names"]
    seed = trace.header.get("seed")
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"genemix trace summary (seed={seed})\n\n")
        fh.write(summary.to_text())
        fh.write("\ngene-gene correlation medians\n")
        for j, row in enumerate(corr):
            cells = " ".join(f"{v:+.3f}" for v in row)
            fh.write(f"{names[j]:>10s} {cells}\n")
    with open(out / "tau_histograms.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gene,k,tau,probability\n")
        for key, hist in summary.tau_hist.items():
            gene, kpart = key.split(",k=")
            for tau0, prob in enumerate(hist):
                fh.write(f"{gene},{kpart},{tau0 + 1},{prob!r}\n")
    with open(out / "scalar_stats.csv", "w", encoding="utf-8", newline="\n") as fh:
        keys = sorted(summary.scalars)
        fh.write("statistic,mean,median,mc_se\n")
        for key in keys:
            s = summary.scalars[key]
            fh.write(f"{key},{s.mean!r},{s.median!r},{s.se!r}\n")
    print(f"wrote {out / 'summary.txt'}, {out / 'tau_histograms.csv'}, {out / 'scalar_stats.csv'}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genemix",
        description="Bayesian semiparametric gene-gene / gene-environment analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help="sweep workers (falls back to GENEMIX_WORKERS)")
        p.add_argument("--iterations", type=int, default=None)
        p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("simulate", help="write synthetic genotype/environment/truth files")
    common(p)
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler on genotype + environment files")
    common(p)
    p.add_argument("--genotypes", default=None)
    p.add_argument("--env", dest="environment", default=None)
    p.add_argument("--resume", action="store_true",
                   help="continue an interrupted run from its checkpoint")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="thresholds from a null-model trace")
    common(p)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("test", help="run the hypothesis battery on a fitted trace")
    common(p)
    p.add_argument("--trace", default=None)
    p.add_argument("--thresholds", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("dpl", help="per-locus disease-predisposing locus table")
    common(p)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_dpl)

    p = sub.add_parser("report", help="summaries and histograms for a trace")
    common(p)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DataFormatError, EngineError, HypothesisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
